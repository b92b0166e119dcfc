//! Domain relations: fixed similarities from meta-data, learned similarities
//! from a small network over the same meta-data, and their fusion into the
//! matrix that weights heads during training and inference.

mod fixed;
mod io;
mod learned;
mod matrix;

pub use fixed::{fixed_adjacency, fixed_angle_similarity, wrap_angle, Adjacency, FixedRelation};
pub use io::{read_adjacency, read_relation_matrix, write_adjacency, write_relation_matrix};
pub use learned::{LearnedPass, RelationNet};
pub use matrix::{build_matrix, RelationMatrix};

use crate::error::{Error, Result};

pub fn check_beta(beta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&beta) {
        Ok(())
    } else {
        Err(Error::BetaOutOfRange(beta))
    }
}

/// `max(0, beta * fixed + (1 - beta) * learned)`.
pub fn fuse(fixed: f64, learned: f64, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(fuse_unclamped(fixed, learned, beta).max(0.0))
}

#[inline]
pub(crate) fn fuse_unclamped(fixed: f64, learned: f64, beta: f64) -> f64 {
    beta * fixed + (1.0 - beta) * learned
}

/// Scales a nonnegative row onto the simplex.
pub fn normalize_weights(row: &[f64]) -> Result<Vec<f64>> {
    if row.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParams("relation weights must be finite and >= 0".into()));
    }
    let total: f64 = row.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroRelationRow);
    }
    Ok(row.iter().map(|v| v / total).collect())
}

/// [`normalize_weights`], falling back to uniform weights (with a warning)
/// when the row carries no relation at all.
pub fn normalize_or_uniform(row: &[f64]) -> Result<Vec<f64>> {
    match normalize_weights(row) {
        Err(Error::ZeroRelationRow) => {
            log::warn!("all-zero relation row over {} domains; using uniform weights", row.len());
            Ok(vec![1.0 / row.len() as f64; row.len()])
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fuse_endpoints_and_midpoint() {
        assert_eq!(fuse(0.3, -0.7, 1.0).unwrap(), 0.3);
        assert_eq!(fuse(0.3, -0.7, 0.0).unwrap(), 0.0);
        assert_eq!(fuse(0.3, 0.6, 0.0).unwrap(), 0.6);
        assert!((fuse(1.0, 0.5, 0.8).unwrap() - 0.9).abs() < 1e-15);
        assert!(matches!(fuse(1.0, 0.5, 1.2), Err(Error::BetaOutOfRange(_))));
        assert!(fuse(1.0, 0.5, -0.1).is_err());
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_weights(&[1.0, 1.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(normalize_weights(&[3.0, 1.0]).unwrap(), vec![0.75, 0.25]);
        assert!(matches!(normalize_weights(&[0.0, 0.0]), Err(Error::ZeroRelationRow)));
        assert_eq!(normalize_or_uniform(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        assert!(normalize_weights(&[1.0, -0.5]).is_err());
    }
}
