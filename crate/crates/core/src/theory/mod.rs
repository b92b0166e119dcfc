//! Monte Carlo checks of the excess-risk scaling of the threshold estimator
//! and of the averaging lower bound.
//!
//! Worlds use a scalar input `x ~ U[-1, 1]` with the identity extractor, and
//! linear heads `h_d(e) = G * v(Z_d) * e` where
//! `v(Z) = (1 / (pi * sqrt(r))) * sum_k sin(pi * Z_k + phi_k)` is 1-Lipschitz
//! in the Euclidean norm, so `sup_e |h_i(e) - h_j(e)| <= G * |Z_i - Z_j|`.

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{stream, Purpose, Rng};

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            stderr: (var / n).sqrt(),
            samples: values.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentDomain {
    pub z: Vec<f64>,
    /// True head slope `G * v(Z)`.
    pub slope: f64,
    pub samples: Vec<(f64, f64)>,
}

impl LatentDomain {
    pub fn head(&self, e: f64) -> f64 {
        self.slope * e
    }
}

/// `N^tr` training domains and one test domain with their samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub r: usize,
    pub lipschitz: f64,
    pub sigma: f64,
    pub phases: Vec<f64>,
    pub train: Vec<LatentDomain>,
    pub test: LatentDomain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub n_train: usize,
    pub r: usize,
    pub lipschitz: f64,
    pub n: usize,
    pub sigma: f64,
}

impl WorldConfig {
    fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.r == 0 || self.n < 2 {
            return Err(Error::Config("world needs >= 1 domain, r >= 1 and n >= 2".into()));
        }
        if !(self.lipschitz >= 0.0 && self.sigma >= 0.0 && self.lipschitz.is_finite() && self.sigma.is_finite()) {
            return Err(Error::Config("G and sigma must be finite and >= 0".into()));
        }
        Ok(())
    }
}

fn v_of(z: &[f64], phases: &[f64]) -> f64 {
    let s: f64 = z.iter().zip(phases).map(|(zk, pk)| (PI * zk + pk).sin()).sum();
    s / (PI * (z.len() as f64).sqrt())
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

impl World {
    fn domain(&self, z: Vec<f64>, n: usize, rng: &mut Rng) -> Result<LatentDomain> {
        let slope = self.lipschitz * v_of(&z, &self.phases);
        let noise = Normal::new(0.0, self.sigma).map_err(|e| Error::Config(e.to_string()))?;
        let samples = (0..n)
            .map(|_| {
                let x: f64 = rng.random_range(-1.0..=1.0);
                (x, slope * x + noise.sample(rng))
            })
            .collect();
        Ok(LatentDomain { z, slope, samples })
    }

    /// First `n_train` training domains of this world. Worlds sampled with the
    /// same seed are nested in this sense.
    pub fn prefix(&self, n_train: usize) -> World {
        World {
            train: self.train[..n_train.min(self.train.len())].to_vec(),
            ..self.clone()
        }
    }

    /// Largest ratio `sup_e |h_i - h_j| / (G |Z_i - Z_j|)` over `pairs`
    /// random domain pairs, probing `e` on `probes` grid points in `[-1, 1]`.
    pub fn lipschitz_ratio(&self, pairs: usize, probes: usize, seed: u64) -> f64 {
        let mut rng = stream(seed, Purpose::Evaluation, 1);
        let grid: Vec<f64> = (0..probes).map(|k| -1.0 + 2.0 * k as f64 / (probes.max(2) - 1) as f64).collect();
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let a: Vec<f64> = (0..self.r).map(|_| rng.random()).collect();
            let b: Vec<f64> = (0..self.r).map(|_| rng.random()).collect();
            let (sa, sb) = (self.lipschitz * v_of(&a, &self.phases), self.lipschitz * v_of(&b, &self.phases));
            let gap = grid.iter().map(|e| (sa * e - sb * e).abs()).fold(0.0, f64::max);
            let bound = self.lipschitz * distance(&a, &b);
            if bound > 0.0 {
                worst = worst.max(gap / bound);
            } else if gap > 0.0 {
                worst = f64::INFINITY;
            }
        }
        worst
    }
}

/// Samples a world: latent representations uniform on `[0, 1]^r`, `n`
/// noisy samples per domain. Domain `d` draws from its own stream so worlds
/// with more training domains extend those with fewer.
pub fn sample_world(cfg: &WorldConfig, seed: u64) -> Result<World> {
    cfg.validate()?;
    let mut base = stream(seed, Purpose::Theory, 0);
    let phases: Vec<f64> = (0..cfg.r).map(|_| base.random_range(0.0..std::f64::consts::TAU)).collect();
    let mut world = World {
        r: cfg.r,
        lipschitz: cfg.lipschitz,
        sigma: cfg.sigma,
        phases,
        train: Vec::with_capacity(cfg.n_train),
        test: LatentDomain {
            z: Vec::new(),
            slope: 0.0,
            samples: Vec::new(),
        },
    };
    let test_z: Vec<f64> = (0..cfg.r).map(|_| base.random()).collect();
    world.test = world.domain(test_z, cfg.n, &mut base)?;
    for d in 0..cfg.n_train {
        let mut rng = stream(seed, Purpose::Theory, d as u64 + 1);
        let z: Vec<f64> = (0..cfg.r).map(|_| rng.random()).collect();
        let dom = world.domain(z, cfg.n, &mut rng)?;
        world.train.push(dom);
    }
    Ok(world)
}

/// Least-squares slope through the origin for each domain.
pub fn fit_heads(domains: &[LatentDomain]) -> Result<Vec<f64>> {
    domains
        .iter()
        .map(|d| {
            if d.samples.len() < 2 {
                return Err(Error::InvalidDataset("least-squares fit needs n >= 2".into()));
            }
            let sxx: f64 = d.samples.iter().map(|(x, _)| x * x).sum();
            let sxy: f64 = d.samples.iter().map(|(x, y)| x * y).sum();
            if sxx <= f64::EPSILON {
                return Err(Error::Singular("least-squares design has no spread".into()));
            }
            Ok(sxy / sxx)
        })
        .collect()
}

/// Fitted heads with a distance threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimator {
    pub bandwidth: f64,
    pub slopes: Vec<f64>,
    pub latents: Vec<Vec<f64>>,
}

impl ThresholdEstimator {
    pub fn fit(domains: &[LatentDomain], bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) {
            return Err(Error::Config(format!("bandwidth must be > 0, got {bandwidth}")));
        }
        Ok(Self {
            bandwidth,
            slopes: fit_heads(domains)?,
            latents: domains.iter().map(|d| d.z.clone()).collect(),
        })
    }

    /// Slope of the combined head for a domain at `z_t`: the mean fitted
    /// slope over domains closer than the bandwidth, 0 when there are none.
    pub fn slope_for(&self, z_t: &[f64]) -> f64 {
        let (mut sum, mut count) = (0.0, 0usize);
        for (s, z) in self.slopes.iter().zip(&self.latents) {
            if distance(z, z_t) < self.bandwidth {
                sum += s;
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }
}

pub fn threshold_predict(est: &ThresholdEstimator, z_t: &[f64], x: f64) -> f64 {
    est.slope_for(z_t) * x
}

/// Mean of all fitted slopes: the uniform average.
pub fn uniform_slope(slopes: &[f64]) -> f64 {
    slopes.iter().sum::<f64>() / slopes.len() as f64
}

/// Paired Monte Carlo estimate of `E|pred(x) - y| - E|h(x) - y|` on the
/// domain `truth`, with fresh `(x, y)` draws.
pub fn excess_risk<F>(predict: F, truth: &LatentDomain, sigma: f64, n_eval: usize, rng: &mut Rng) -> Estimate
where
    F: Fn(f64) -> f64,
{
    let diffs: Vec<f64> = (0..n_eval)
        .map(|_| {
            let x: f64 = rng.random_range(-1.0..=1.0);
            let eps: f64 = StandardNormal.sample(rng);
            let y = truth.head(x) + sigma * eps;
            (predict(x) - y).abs() - (truth.head(x) - y).abs()
        })
        .collect();
    Estimate::from_samples(&diffs)
}

/// Theorem bandwidth schedule `c0 * (n * N)^(-1 / (r + 2))`.
pub fn bandwidth(c0: f64, n: usize, n_train: usize, r: usize) -> f64 {
    c0 * ((n * n_train) as f64).powf(-1.0 / (r as f64 + 2.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    pub r: usize,
    pub lipschitz: f64,
    pub n: usize,
    pub sigma: f64,
    pub grid: Vec<usize>,
    pub seeds: Vec<u64>,
    pub c0: f64,
    pub n_eval: usize,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            r: 2,
            lipschitz: 2.0,
            n: 50,
            sigma: 0.1,
            grid: vec![8, 16, 32, 64],
            seeds: (0..20).collect(),
            c0: 1.0,
            n_eval: 10_000,
        }
    }
}

impl ScalingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() || self.grid.windows(2).any(|w| w[0] >= w[1]) || self.grid[0] == 0 {
            return Err(Error::Config("N_tr grid must be positive and strictly increasing".into()));
        }
        if self.seeds.is_empty() || self.n_eval == 0 || !(self.c0 > 0.0) {
            return Err(Error::Config("need seeds, n_eval > 0 and c0 > 0".into()));
        }
        self.world(self.grid[0]).validate()
    }

    fn world(&self, n_train: usize) -> WorldConfig {
        WorldConfig {
            n_train,
            r: self.r,
            lipschitz: self.lipschitz,
            n: self.n,
            sigma: self.sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n_tr: usize,
    pub r: usize,
    pub n: usize,
    pub bandwidth: f64,
    pub mean_excess_risk: f64,
    /// Standard error across seeds.
    pub stderr: f64,
    pub seeds: usize,
}

/// Excess risk of the threshold estimator per seed (rows) and grid point
/// (columns). Each seed uses one nested world and one set of evaluation draws.
fn excess_table(cfg: &ScalingConfig, c0: f64, uniform: bool) -> Result<Vec<Vec<f64>>> {
    let max_n = *cfg.grid.last().expect("validated grid");
    cfg.seeds
        .iter()
        .map(|&seed| {
            let world = sample_world(&cfg.world(max_n), seed)?;
            cfg.grid
                .iter()
                .map(|&n_tr| {
                    let train = &world.train[..n_tr];
                    let slope = if uniform {
                        uniform_slope(&fit_heads(train)?)
                    } else {
                        ThresholdEstimator::fit(train, bandwidth(c0, cfg.n, n_tr, cfg.r))?.slope_for(&world.test.z)
                    };
                    let mut rng = stream(seed, Purpose::Evaluation, 0);
                    Ok(excess_risk(|x| slope * x, &world.test, cfg.sigma, cfg.n_eval, &mut rng).mean)
                })
                .collect()
        })
        .collect()
}

fn summarize(cfg: &ScalingConfig, c0: f64, table: &[Vec<f64>]) -> Vec<ScalingRow> {
    cfg.grid
        .iter()
        .enumerate()
        .map(|(k, &n_tr)| {
            let column: Vec<f64> = table.iter().map(|row| row[k]).collect();
            let est = Estimate::from_samples(&column);
            ScalingRow {
                n_tr,
                r: cfg.r,
                n: cfg.n,
                bandwidth: bandwidth(c0, cfg.n, n_tr, cfg.r),
                mean_excess_risk: est.mean,
                stderr: est.stderr,
                seeds: column.len(),
            }
        })
        .collect()
}

/// Seed-averaged excess risk of the threshold estimator per grid point.
pub fn scaling_experiment(cfg: &ScalingConfig) -> Result<Vec<ScalingRow>> {
    cfg.validate()?;
    Ok(summarize(cfg, cfg.c0, &excess_table(cfg, cfg.c0, false)?))
}

/// Same table for the uniform average of all fitted heads.
pub fn uniform_scaling(cfg: &ScalingConfig) -> Result<Vec<ScalingRow>> {
    cfg.validate()?;
    Ok(summarize(cfg, f64::INFINITY, &excess_table(cfg, cfg.c0, true)?))
}

/// Per-seed excess risks `(threshold, uniform)` at every grid point.
pub fn paired_excess(cfg: &ScalingConfig) -> Result<Vec<Vec<(f64, f64)>>> {
    cfg.validate()?;
    let t = excess_table(cfg, cfg.c0, false)?;
    let u = excess_table(cfg, cfg.c0, true)?;
    Ok(t.into_iter().zip(u).map(|(a, b)| a.into_iter().zip(b).collect()).collect())
}

/// Per-seed excess risks `(threshold, uniform)` with `n_tr` training
/// domains, each averaged over `tests` fresh test domains.
pub fn relation_vs_uniform(cfg: &ScalingConfig, n_tr: usize, tests: usize) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    let b = bandwidth(cfg.c0, cfg.n, n_tr, cfg.r);
    cfg.seeds
        .iter()
        .map(|&seed| {
            let world = sample_world(&cfg.world(n_tr), seed)?;
            let est = ThresholdEstimator::fit(&world.train, b)?;
            let uniform = uniform_slope(&est.slopes);
            let (mut t_sum, mut u_sum) = (0.0, 0.0);
            for k in 0..tests {
                let mut rng = stream(seed, Purpose::Theory, (1 << 32) + k as u64);
                let z: Vec<f64> = (0..cfg.r).map(|_| rng.random()).collect();
                let target = world.domain(z, 0, &mut rng)?;
                let slope = est.slope_for(&target.z);
                let mut eval = stream(seed, Purpose::Evaluation, k as u64);
                t_sum += excess_risk(|x| slope * x, &target, cfg.sigma, cfg.n_eval, &mut eval).mean;
                let mut eval = stream(seed, Purpose::Evaluation, k as u64);
                u_sum += excess_risk(|x| uniform * x, &target, cfg.sigma, cfg.n_eval, &mut eval).mean;
            }
            Ok((t_sum / tests as f64, u_sum / tests as f64))
        })
        .collect()
}

/// Test domain equal to training domain 0: excess risks of the threshold
/// estimator and of the fit on that domain alone, one pair per seed.
pub fn seen_domain_risks(cfg: &ScalingConfig, n_tr: usize) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    let b = bandwidth(cfg.c0, cfg.n, n_tr, cfg.r);
    cfg.seeds
        .iter()
        .map(|&seed| {
            let world = sample_world(&cfg.world(n_tr), seed)?;
            let est = ThresholdEstimator::fit(&world.train, b)?;
            let seen = &world.train[0];
            let (pooled, alone) = (est.slope_for(&seen.z), est.slopes[0]);
            let mut eval = stream(seed, Purpose::Evaluation, 0);
            let t = excess_risk(|x| pooled * x, seen, cfg.sigma, cfg.n_eval, &mut eval).mean;
            let mut eval = stream(seed, Purpose::Evaluation, 0);
            let a = excess_risk(|x| alone * x, seen, cfg.sigma, cfg.n_eval, &mut eval).mean;
            Ok((t, a))
        })
        .collect()
}

/// Picks the `c0` with the lowest grid-averaged excess risk on `holdout`
/// seeds, which should be disjoint from the evaluation seeds.
pub fn select_c0(cfg: &ScalingConfig, candidates: &[f64], holdout: &[u64]) -> Result<f64> {
    let probe = ScalingConfig {
        seeds: holdout.to_vec(),
        ..cfg.clone()
    };
    probe.validate()?;
    let mut best: Option<(f64, f64)> = None;
    for &c0 in candidates {
        let table = excess_table(&probe, c0, false)?;
        let score = table.iter().flatten().sum::<f64>() / (table.len() * probe.grid.len()) as f64;
        if best.is_none_or(|(_, s)| score < s) {
            best = Some((c0, score));
        }
    }
    best.map(|(c0, _)| c0).ok_or_else(|| Error::Config("no c0 candidates".into()))
}

/// Delimited table with header `N_tr,r,n,B,mean_excess_risk,stderr,seeds`.
pub fn scaling_csv(rows: &[ScalingRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["N_tr", "r", "n", "B", "mean_excess_risk", "stderr", "seeds"])?;
    for r in rows {
        w.write_record([
            r.n_tr.to_string(),
            r.r.to_string(),
            r.n.to_string(),
            r.bandwidth.to_string(),
            r.mean_excess_risk.to_string(),
            r.stderr.to_string(),
            r.seeds.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::io("scaling table", e.into_error()))
}

/// Population value of the averaging gap below.
pub const AVERAGING_TARGET: f64 = 1.0 / 12.0;

/// Monte Carlo estimate of `E[(pred(d, e) - d * e)^2]` with `d ~ U[0, 1]`
/// and `e ~ N(0, 1)`.
pub fn averaging_gap<F>(n_mc: usize, seed: u64, predict: F) -> Estimate
where
    F: Fn(f64, f64) -> f64,
{
    let mut rng = stream(seed, Purpose::Theory, (1 << 56) - 1);
    let values: Vec<f64> = (0..n_mc)
        .map(|_| {
            let d: f64 = rng.random();
            let e: f64 = StandardNormal.sample(&mut rng);
            (predict(d, e) - d * e).powi(2)
        })
        .collect();
    Estimate::from_samples(&values)
}

/// Gap of the plain average of all heads, `e / 2`; its population value is
/// [`AVERAGING_TARGET`].
pub fn averaging_oracle(n_mc: usize, seed: u64) -> Estimate {
    averaging_gap(n_mc, seed, |_, e| 0.5 * e)
}
