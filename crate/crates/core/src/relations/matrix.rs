use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{check_beta, fuse_unclamped, FixedRelation, RelationNet};
use crate::data::DomainId;
use crate::error::{Error, Result};

/// Fused relations over an ordered set of domains, with the fixed and learned
/// components kept alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationMatrix {
    ids: Vec<DomainId>,
    beta: f64,
    fixed: Vec<Vec<f64>>,
    learned: Vec<Vec<f64>>,
    fused: Vec<Vec<f64>>,
}

impl RelationMatrix {
    pub fn ids(&self) -> &[DomainId] {
        &self.ids
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn fixed(&self) -> &[Vec<f64>] {
        &self.fixed
    }

    pub fn learned(&self) -> &[Vec<f64>] {
        &self.learned
    }

    pub fn fused(&self) -> &[Vec<f64>] {
        &self.fused
    }

    pub fn index_of(&self, id: DomainId) -> Result<usize> {
        self.ids.iter().position(|&d| d == id).ok_or(Error::UnknownDomain(id))
    }

    pub fn get(&self, i: DomainId, j: DomainId) -> Result<f64> {
        Ok(self.fused[self.index_of(i)?][self.index_of(j)?])
    }

    /// `a_{d,target}` for every `d` in `sources`, in that order.
    pub fn row_for(&self, target: DomainId, sources: &[DomainId]) -> Result<Vec<f64>> {
        let t = self.index_of(target)?;
        sources.iter().map(|&d| Ok(self.fused[self.index_of(d)?][t])).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.ids.len();
        (0..n).all(|i| (0..n).all(|j| self.fused[i][j] == self.fused[j][i]))
    }
}

/// Builds the fused relation matrix over `ids`.
///
/// Off-diagonal entries are `max(0, beta * a^g + (1 - beta) * a^l)`; the
/// diagonal is 1 by convention.
pub fn build_matrix(
    meta: &BTreeMap<DomainId, Vec<f64>>,
    ids: &[DomainId],
    fixed: &FixedRelation,
    net: &RelationNet,
    beta: f64,
) -> Result<RelationMatrix> {
    check_beta(beta)?;
    let metas = ids
        .iter()
        .map(|id| meta.get(id).map(Vec::as_slice).ok_or(Error::MissingMeta(*id)))
        .collect::<Result<Vec<&[f64]>>>()?;
    let learned = net.forward_set(&metas)?.matrix().to_vec();
    let n = ids.len();
    let mut fixed_m = vec![vec![0.0; n]; n];
    let mut fused = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let g = fixed.value(ids[i], metas[i], ids[j], metas[j])?;
            let a = if i == j {
                1.0
            } else {
                fuse_unclamped(g, learned[i][j], beta).max(0.0)
            };
            fixed_m[i][j] = g;
            fixed_m[j][i] = g;
            fused[i][j] = a;
            fused[j][i] = a;
        }
    }
    Ok(RelationMatrix {
        ids: ids.to_vec(),
        beta,
        fixed: fixed_m,
        learned,
        fused,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{stream, Purpose};
    use crate::relations::Adjacency;

    fn meta(values: &[f64]) -> BTreeMap<DomainId, Vec<f64>> {
        values.iter().enumerate().map(|(i, &v)| (DomainId(i as u32), vec![v])).collect()
    }

    fn net() -> RelationNet {
        RelationNet::init(1, 8, 4, &mut stream(2, Purpose::Init, 0)).unwrap()
    }

    #[test]
    fn beta_one_with_adjacency_is_the_adjacency() {
        let ids: Vec<DomainId> = (0..4).map(DomainId).collect();
        let adj = Adjacency::new(ids.clone(), [(DomainId(0), DomainId(1)), (DomainId(1), DomainId(2))]).unwrap();
        let m = build_matrix(&meta(&[0.1, 0.5, -1.0, 2.0]), &ids, &FixedRelation::Adjacency(adj.clone()), &net(), 1.0)
            .unwrap();
        for &i in &ids {
            for &j in &ids {
                assert_eq!(m.get(i, j).unwrap(), adj.related(i, j).unwrap());
            }
        }
    }

    #[test]
    fn identical_domains_relate_fully_when_learned_only() {
        let ids = [DomainId(0), DomainId(1)];
        let m = build_matrix(&meta(&[0.7, 0.7]), &ids, &FixedRelation::Angle, &net(), 0.0).unwrap();
        assert!((m.get(DomainId(0), DomainId(1)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn built_matrix_is_symmetric_and_nonnegative() {
        let values = [-3.0, -1.4, 0.2, 0.9, 2.5, 3.1];
        let ids: Vec<DomainId> = (0..6).map(DomainId).collect();
        for beta in [0.0, 0.3, 0.8, 1.0] {
            let m = build_matrix(&meta(&values), &ids, &FixedRelation::Angle, &net(), beta).unwrap();
            assert!(m.is_symmetric());
            assert!(m.fused().iter().flatten().all(|&v| v >= 0.0));
            assert!(m.fixed().iter().flatten().all(|&v| (0.0..=1.0).contains(&v)));
            assert!(m.learned().iter().flatten().all(|&v| (-1.0 - 1e-12..=1.0 + 1e-12).contains(&v)));
        }
    }

    #[test]
    fn missing_meta_is_reported() {
        let ids = [DomainId(0), DomainId(5)];
        assert!(matches!(
            build_matrix(&meta(&[0.1]), &ids, &FixedRelation::Angle, &net(), 0.5),
            Err(Error::MissingMeta(DomainId(5)))
        ));
    }

    #[test]
    fn rows_follow_source_order() {
        let ids: Vec<DomainId> = (0..3).map(DomainId).collect();
        let m = build_matrix(&meta(&[0.0, 0.5, 1.0]), &ids, &FixedRelation::Angle, &net(), 1.0).unwrap();
        let row = m.row_for(DomainId(0), &[DomainId(2), DomainId(1)]).unwrap();
        assert_eq!(row, vec![1.0_f64.cos(), 0.5_f64.cos()]);
    }
}
