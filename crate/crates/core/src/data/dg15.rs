//! DG-15: fifteen 2-D binary classification domains.
//!
//! Domain `d` owns a key point `k_d` on a circle; positives are drawn from
//! `N(k_d, I)` and negatives from `N(-k_d, I)`. The meta-data of a domain is
//! the full-quadrant angle `atan2(k_d2, k_d1)`. Domain ids follow the angular
//! order of the key points, and splits are assigned from that order using
//! [`DG15_LAYOUT`].

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::{DomainDataset, DomainId, Example, Split, TaskKind};
use crate::error::{Error, Result};
use crate::numerics::{stream, Purpose};

/// Split of the `i`-th domain in angular order: blocks of two training
/// domains, one validation and two test domains.
pub const DG15_LAYOUT: [Split; 15] = {
    use Split::{Test as S, Train as T, Valid as V};
    [T, T, V, S, S, T, T, V, S, S, T, V, V, S, V]
};

#[derive(Debug, Clone, PartialEq)]
pub struct Dg15Config {
    pub radius: f64,
    pub per_class: usize,
    pub layout: Vec<Split>,
}

impl Default for Dg15Config {
    fn default() -> Self {
        Self {
            radius: 3.0,
            per_class: 50,
            layout: DG15_LAYOUT.to_vec(),
        }
    }
}

pub fn gen_dg15(seed: u64) -> DomainDataset {
    gen_dg15_with(seed, &Dg15Config::default()).expect("default DG-15 config is valid")
}

pub fn gen_dg15_with(seed: u64, cfg: &Dg15Config) -> Result<DomainDataset> {
    if cfg.layout.is_empty() || cfg.per_class == 0 || !(cfg.radius > 0.0) {
        return Err(Error::Config("DG-15 needs domains, samples and a positive radius".into()));
    }
    let n_domains = cfg.layout.len();
    let mut key_rng = stream(seed, Purpose::Data, 0);
    let mut angles: Vec<f64> = (0..n_domains)
        .map(|_| {
            // (-pi, pi]
            let u: f64 = key_rng.random();
            PI - 2.0 * PI * u
        })
        .collect();
    angles.sort_by(f64::total_cmp);

    let mut examples = Vec::with_capacity(n_domains * 2 * cfg.per_class);
    let mut meta = BTreeMap::new();
    let mut splits = BTreeMap::new();
    for (d, (&theta, &split)) in angles.iter().zip(&cfg.layout).enumerate() {
        let id = DomainId(d as u32);
        let key = [cfg.radius * theta.cos(), cfg.radius * theta.sin()];
        meta.insert(id, vec![key[1].atan2(key[0])]);
        splits.insert(id, split);
        let mut rng = stream(seed, Purpose::Data, d as u64 + 1);
        for (label, sign) in [(1.0, 1.0), (0.0, -1.0)] {
            for _ in 0..cfg.per_class {
                let e0: f64 = StandardNormal.sample(&mut rng);
                let e1: f64 = StandardNormal.sample(&mut rng);
                examples.push(Example {
                    domain: id,
                    x: vec![sign * key[0] + e0, sign * key[1] + e1],
                    y: label,
                });
            }
        }
    }
    DomainDataset::new(TaskKind::Classification { classes: 2 }, examples, meta, splits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_balance() {
        let ds = gen_dg15(0);
        assert_eq!(ds.examples().len(), 1500);
        for d in 0..15 {
            let ex: Vec<_> = ds.examples_of(DomainId(d)).collect();
            assert_eq!(ex.len(), 100);
            assert_eq!(ex.iter().filter(|e| e.y == 1.0).count(), 50);
        }
        for split in [Split::Train, Split::Valid, Split::Test] {
            assert_eq!(ds.domains(split).len(), 5);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(gen_dg15(9), gen_dg15(9));
        assert_ne!(gen_dg15(9), gen_dg15(10));
    }

    #[test]
    fn meta_is_sorted_full_quadrant_angle() {
        let ds = gen_dg15(4);
        let angles: Vec<f64> = ds.meta_table().values().map(|m| m[0]).collect();
        assert!(angles.windows(2).all(|w| w[0] <= w[1]));
        assert!(angles.iter().all(|a| *a > -PI && *a <= PI));
    }

    #[test]
    fn class_means_near_key_points() {
        let ds = gen_dg15(21);
        for d in 0..15 {
            let id = DomainId(d);
            let theta = ds.meta(id).unwrap()[0];
            let key = [3.0 * theta.cos(), 3.0 * theta.sin()];
            for (label, sign) in [(1.0, 1.0), (0.0, -1.0)] {
                let pts: Vec<&Vec<f64>> = ds.examples_of(id).filter(|e| e.y == label).map(|e| &e.x).collect();
                let n = pts.len() as f64;
                for k in 0..2 {
                    let mean = pts.iter().map(|p| p[k]).sum::<f64>() / n;
                    assert!((mean - sign * key[k]).abs() < 3.0 / n.sqrt(), "domain {d} axis {k}");
                }
            }
        }
    }

    #[test]
    fn class_conditional_covariance_is_identity() {
        // Within-domain residuals pooled over domains, one covariance per class.
        let ds = gen_dg15(21);
        for label in [0.0, 1.0] {
            let mut cov = [[0.0; 2]; 2];
            let mut dof = 0.0;
            for d in 0..15 {
                let pts: Vec<&Vec<f64>> = ds.examples_of(DomainId(d)).filter(|e| e.y == label).map(|e| &e.x).collect();
                let n = pts.len() as f64;
                let mean = [0, 1].map(|k| pts.iter().map(|p| p[k]).sum::<f64>() / n);
                for p in &pts {
                    for a in 0..2 {
                        for b in 0..2 {
                            cov[a][b] += (p[a] - mean[a]) * (p[b] - mean[b]);
                        }
                    }
                }
                dof += n - 1.0;
            }
            for a in 0..2 {
                assert!((0.6..=1.5).contains(&(cov[a][a] / dof)), "class {label} var {}", cov[a][a] / dof);
            }
            assert!((cov[0][1] / dof).abs() < 0.15);
        }
    }
}
