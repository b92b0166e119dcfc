//! Grid-of-regions regression benchmark.
//!
//! Each cell of a `rows x cols` grid is a domain with `(lat, lon)` meta-data in
//! degrees. The target is `y = sum_k c_k(lat, lon) x_k + b(lat, lon) + noise`
//! where the coefficients vary smoothly over the grid, so neighbouring cells
//! have similar regression functions. The northern half of the cells (row-major
//! order) is used for training; the rest is split at random between validation
//! and test.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{DomainDataset, DomainId, Example, Split, TaskKind};
use crate::error::{Error, Result};
use crate::numerics::{stream, Purpose};
use crate::relations::Adjacency;

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub rows: usize,
    pub cols: usize,
    pub features: usize,
    pub per_domain: usize,
    pub noise_sigma: f64,
    /// Latitude of the northern row, degrees.
    pub lat0: f64,
    /// Longitude of the western column, degrees.
    pub lon0: f64,
    pub lat_step: f64,
    pub lon_step: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            rows: 4,
            cols: 6,
            features: 3,
            per_domain: 40,
            noise_sigma: 0.1,
            lat0: 48.0,
            lon0: -122.0,
            lat_step: 3.0,
            lon_step: 5.0,
        }
    }
}

/// Ground truth behind a generated spatial dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialWorld {
    cfg: GridConfig,
    lat_freq: Vec<f64>,
    lon_freq: Vec<f64>,
    phase: Vec<f64>,
}

impl SpatialWorld {
    fn normalized(&self, meta: &[f64]) -> (f64, f64) {
        let c = &self.cfg;
        let lat_c = c.lat0 - c.lat_step * (c.rows as f64 - 1.0) / 2.0;
        let lon_c = c.lon0 + c.lon_step * (c.cols as f64 - 1.0) / 2.0;
        (
            (meta[0] - lat_c) / (c.lat_step * c.rows as f64),
            (meta[1] - lon_c) / (c.lon_step * c.cols as f64),
        )
    }

    /// Noise-free regression function of the cell with meta-data `meta`.
    pub fn mean_response(&self, meta: &[f64], x: &[f64]) -> f64 {
        let (u, v) = self.normalized(meta);
        let linear: f64 = x
            .iter()
            .enumerate()
            .map(|(k, xk)| (self.lat_freq[k] * u + self.lon_freq[k] * v + self.phase[k]).sin() * xk)
            .sum();
        linear + 0.5 * (u - v).cos()
    }

    pub fn config(&self) -> &GridConfig {
        &self.cfg
    }
}

pub fn cell_id(cfg: &GridConfig, row: usize, col: usize) -> DomainId {
    DomainId((row * cfg.cols + col) as u32)
}

/// Returns the dataset (with 4-neighbour grid adjacency attached) and the
/// ground-truth world that produced it.
pub fn gen_spatial_regression(seed: u64, cfg: &GridConfig) -> Result<(DomainDataset, SpatialWorld)> {
    if cfg.rows < 3 || cfg.cols < 3 {
        return Err(Error::Config(format!("grid must be at least 3x3, got {}x{}", cfg.rows, cfg.cols)));
    }
    if cfg.features == 0 || cfg.per_domain == 0 || cfg.noise_sigma < 0.0 || !cfg.noise_sigma.is_finite() {
        return Err(Error::Config("spatial grid needs features, samples and sigma >= 0".into()));
    }
    let mut world_rng = stream(seed, Purpose::Data, 0);
    let signed = |rng: &mut crate::numerics::Rng| {
        let mag: f64 = rng.random_range(1.0..2.0);
        if rng.random::<bool>() {
            mag
        } else {
            -mag
        }
    };
    let lat_freq: Vec<f64> = (0..cfg.features).map(|_| signed(&mut world_rng)).collect();
    let lon_freq: Vec<f64> = (0..cfg.features).map(|_| signed(&mut world_rng)).collect();
    let phase: Vec<f64> = (0..cfg.features)
        .map(|_| world_rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    let world = SpatialWorld {
        cfg: cfg.clone(),
        lat_freq,
        lon_freq,
        phase,
    };

    let n_cells = cfg.rows * cfg.cols;
    let n_train = n_cells.div_ceil(2);
    let mut rest: Vec<usize> = (n_train..n_cells).collect();
    rest.shuffle(&mut stream(seed, Purpose::Split, 0));
    let n_valid = rest.len() / 2;

    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut examples = Vec::with_capacity(n_cells * cfg.per_domain);
    let mut meta = BTreeMap::new();
    let mut splits = BTreeMap::new();
    for row in 0..cfg.rows {
        for col in 0..cfg.cols {
            let cell = row * cfg.cols + col;
            let id = cell_id(cfg, row, col);
            let m = vec![cfg.lat0 - cfg.lat_step * row as f64, cfg.lon0 + cfg.lon_step * col as f64];
            let split = if cell < n_train {
                Split::Train
            } else if rest[..n_valid].contains(&cell) {
                Split::Valid
            } else {
                Split::Test
            };
            let mut rng = stream(seed, Purpose::Data, cell as u64 + 1);
            for _ in 0..cfg.per_domain {
                let x: Vec<f64> = (0..cfg.features).map(|_| StandardNormal.sample(&mut rng)).collect();
                let eps = if cfg.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                let y = world.mean_response(&m, &x) + eps;
                examples.push(Example { domain: id, x, y });
            }
            meta.insert(id, m);
            splits.insert(id, split);
        }
    }

    let mut edges = Vec::new();
    for row in 0..cfg.rows {
        for col in 0..cfg.cols {
            if col + 1 < cfg.cols {
                edges.push((cell_id(cfg, row, col), cell_id(cfg, row, col + 1)));
            }
            if row + 1 < cfg.rows {
                edges.push((cell_id(cfg, row, col), cell_id(cfg, row + 1, col)));
            }
        }
    }
    let adjacency = Adjacency::new(meta.keys().copied(), edges)?;
    let ds = DomainDataset::new(TaskKind::Regression, examples, meta, splits)?.with_adjacency(adjacency)?;
    Ok((ds, world))
}
