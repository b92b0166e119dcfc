//! Learned domain similarity: a two-layer network `g` embeds meta-data, and
//! `R` weight vectors `w_r` re-weight the embedding before a cosine
//! similarity. The learned relation is the mean over the `R` heads:
//!
//! `a_ij = (1/R) * sum_r cos(w_r * g(m_i), w_r * g(m_j))`

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, Activation, Mlp, Parameters, Tape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationNet {
    g: Mlp,
    /// `R` vectors, each of length `g.out_dim()`.
    masks: Vec<Vec<f64>>,
}

impl RelationNet {
    pub fn new(g: Mlp, masks: Vec<Vec<f64>>) -> Result<Self> {
        if masks.is_empty() {
            return Err(Error::InvalidParams("relation net needs at least one similarity head".into()));
        }
        for m in &masks {
            if m.len() != g.out_dim() {
                return Err(Error::DimensionMismatch {
                    context: "similarity head",
                    expected: g.out_dim(),
                    actual: m.len(),
                });
            }
        }
        Ok(Self { g, masks })
    }

    /// `g` = two tanh layers of `width`; every `w_r` starts at all-ones.
    pub fn init<R: Rng + ?Sized>(meta_dim: usize, width: usize, heads: usize, rng: &mut R) -> Result<Self> {
        let g = Mlp::init(&[meta_dim, width, width], &[Activation::Tanh, Activation::Tanh], rng)?;
        Self::new(g, vec![vec![1.0; width]; heads])
    }

    pub fn embedding(&self) -> &Mlp {
        &self.g
    }

    pub fn masks(&self) -> &[Vec<f64>] {
        &self.masks
    }

    pub fn masks_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.masks
    }

    pub fn meta_dim(&self) -> usize {
        self.g.in_dim()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            g: self.g.zeros_like(),
            masks: self.masks.iter().map(|m| vec![0.0; m.len()]).collect(),
        }
    }

    /// Learned relation between two domains from their meta-data.
    pub fn learned_relation(&self, mi: &[f64], mj: &[f64]) -> Result<f64> {
        let a = self.g.predict(mi)?;
        let b = self.g.predict(mj)?;
        Ok(self.similarity(&a, &b))
    }

    fn similarity(&self, a: &[f64], b: &[f64]) -> f64 {
        let total: f64 = self.masks.iter().map(|w| masked_cosine(w, a, b).0).sum();
        total / self.masks.len() as f64
    }

    /// Embeds every meta-data vector once and evaluates all pairwise learned
    /// relations, keeping what [`LearnedPass::backward`] needs.
    pub fn forward_set(&self, metas: &[&[f64]]) -> Result<LearnedPass> {
        let mut embeddings = Vec::with_capacity(metas.len());
        let mut tapes = Vec::with_capacity(metas.len());
        for m in metas {
            let (e, t) = self.g.forward(m)?;
            embeddings.push(e);
            tapes.push(t);
        }
        let n = metas.len();
        let mut matrix = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                let v = self.similarity(&embeddings[i], &embeddings[j]);
                matrix[i][j] = v;
                matrix[j][i] = v;
            }
        }
        Ok(LearnedPass {
            embeddings,
            tapes,
            matrix,
        })
    }
}

impl Parameters for RelationNet {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.g.visit(f);
        self.masks.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.g.visit_mut(f);
        self.masks.visit_mut(f);
    }
}

/// Cosine of `w * a` and `w * b` together with the gradients of the cosine
/// with respect to `u = w * a` and `v = w * b`. A zero-norm side yields 0 and
/// zero gradients.
fn masked_cosine(w: &[f64], a: &[f64], b: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let u: Vec<f64> = w.iter().zip(a).map(|(w, a)| w * a).collect();
    let v: Vec<f64> = w.iter().zip(b).map(|(w, b)| w * b).collect();
    let nu = dot(&u, &u).sqrt();
    let nv = dot(&v, &v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return (0.0, vec![0.0; u.len()], vec![0.0; v.len()]);
    }
    let c = dot(&u, &v) / (nu * nv);
    let du = u.iter().zip(&v).map(|(ui, vi)| vi / (nu * nv) - c * ui / (nu * nu)).collect();
    let dv = u.iter().zip(&v).map(|(ui, vi)| ui / (nu * nv) - c * vi / (nv * nv)).collect();
    (c, du, dv)
}

/// Result of [`RelationNet::forward_set`].
#[derive(Debug, Clone)]
pub struct LearnedPass {
    embeddings: Vec<Vec<f64>>,
    tapes: Vec<Tape>,
    matrix: Vec<Vec<f64>>,
}

impl LearnedPass {
    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    /// Accumulates into `grads` the gradient of `sum_ij grad[i][j] * a_ij`.
    /// Entries `i == j` are ignored.
    pub fn backward(&self, net: &RelationNet, grad: &[Vec<f64>], grads: &mut RelationNet) -> Result<()> {
        let n = self.embeddings.len();
        if grad.len() != n || grad.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                context: "relation gradient",
                expected: n,
                actual: grad.len(),
            });
        }
        let heads = net.masks.len() as f64;
        let width = net.g.out_dim();
        let mut d_embed = vec![vec![0.0; width]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let g = (grad[i][j] + grad[j][i]) / heads;
                if g == 0.0 {
                    continue;
                }
                let (a, b) = (&self.embeddings[i], &self.embeddings[j]);
                for (r, w) in net.masks.iter().enumerate() {
                    let (_, du, dv) = masked_cosine(w, a, b);
                    for k in 0..width {
                        d_embed[i][k] += g * w[k] * du[k];
                        d_embed[j][k] += g * w[k] * dv[k];
                        grads.masks[r][k] += g * (a[k] * du[k] + b[k] * dv[k]);
                    }
                }
            }
        }
        for (tape, d) in self.tapes.iter().zip(&d_embed) {
            if d.iter().any(|&v| v != 0.0) {
                net.g.backward_into(tape, d, &mut grads.g)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{assign, flatten, grad_check, stream, Dense, Purpose};

    fn net(seed: u64) -> RelationNet {
        let mut rng = stream(seed, Purpose::Init, 7);
        let mut n = RelationNet::init(2, 6, 3, &mut rng).unwrap();
        // Move the masks off all-ones so every head differs.
        for (r, m) in n.masks.iter_mut().enumerate() {
            for (k, v) in m.iter_mut().enumerate() {
                *v += 0.1 * (r as f64 + 1.0) * ((k as f64) - 2.5);
            }
        }
        n
    }

    #[test]
    fn identical_meta_gives_one() {
        let n = net(1);
        let v = n.learned_relation(&[0.3, -0.4], &[0.3, -0.4]).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_embeddings_give_zero() {
        // g is the identity on R^2, so embeddings are the meta vectors themselves.
        let g = Mlp::from_layers(vec![Dense::from_parts(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0; 2], Activation::Identity)
            .unwrap()])
        .unwrap();
        let n = RelationNet::new(g, vec![vec![1.0, 1.0], vec![2.0, 0.5]]).unwrap();
        assert_eq!(n.learned_relation(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn zero_norm_masked_representation_gives_zero() {
        let g = Mlp::from_layers(vec![Dense::from_parts(1, 2, vec![1.0, 1.0], vec![0.0; 2], Activation::Identity).unwrap()])
            .unwrap();
        let n = RelationNet::new(g, vec![vec![1.0, 1.0]]).unwrap();
        assert_eq!(n.learned_relation(&[0.0], &[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn matches_brute_force_head_average() {
        let n = net(4);
        let (mi, mj) = ([0.9, -1.7], [-0.2, 0.4]);
        let (a, b) = (n.g.predict(&mi).unwrap(), n.g.predict(&mj).unwrap());
        let mut total = 0.0;
        for w in &n.masks {
            let mut uv = 0.0;
            let mut uu = 0.0;
            let mut vv = 0.0;
            for k in 0..w.len() {
                let u = w[k] * a[k];
                let v = w[k] * b[k];
                uv += u * v;
                uu += u * u;
                vv += v * v;
            }
            total += uv / (uu.sqrt() * vv.sqrt());
        }
        let expected = total / n.masks.len() as f64;
        assert!((n.learned_relation(&mi, &mj).unwrap() - expected).abs() < 1e-14);
        assert_eq!(n.learned_relation(&mi, &mj).unwrap(), n.learned_relation(&mj, &mi).unwrap());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let n = net(9);
        let metas: Vec<Vec<f64>> = vec![vec![0.1, 0.5], vec![-1.2, 0.3], vec![0.8, -0.9], vec![0.0, 2.0]];
        let refs: Vec<&[f64]> = metas.iter().map(Vec::as_slice).collect();
        let weights: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 0.0 } else { 0.3 * i as f64 - 0.7 * j as f64 + 0.2 }).collect())
            .collect();
        let objective = |net: &RelationNet| -> f64 {
            let pass = net.forward_set(&refs).unwrap();
            let m = pass.matrix();
            (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).map(|(i, j)| weights[i][j] * m[i][j]).sum()
        };
        let pass = n.forward_set(&refs).unwrap();
        let mut grads = n.zeros_like();
        pass.backward(&n, &weights, &mut grads).unwrap();
        let report = grad_check(
            |p| {
                let mut probe = n.clone();
                assign(&mut probe, p);
                objective(&probe)
            },
            &flatten(&n),
            &flatten(&grads),
        );
        assert!(report.max_rel_error < 1e-5, "{report:?}");
    }

    #[test]
    fn mask_length_is_validated() {
        let mut rng = stream(0, Purpose::Init, 0);
        let g = Mlp::init(&[1, 4, 4], &[Activation::Tanh, Activation::Tanh], &mut rng).unwrap();
        assert!(RelationNet::new(g.clone(), vec![vec![1.0; 3]]).is_err());
        assert!(RelationNet::new(g, vec![]).is_err());
    }
}
