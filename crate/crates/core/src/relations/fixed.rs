use std::collections::BTreeSet;
use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::data::DomainId;
use crate::error::{Error, Result};

/// Wraps an angle difference into `(-pi, pi]`.
pub fn wrap_angle(delta: f64) -> f64 {
    let mut d = delta.rem_euclid(TAU);
    if d > PI {
        d -= TAU;
    }
    d
}

/// Similarity of two domains described by angles (radians):
/// `max(0, cos(wrapped difference))`.
pub fn fixed_angle_similarity(a: f64, b: f64) -> f64 {
    wrap_angle(b - a).cos().max(0.0)
}

/// Undirected 0/1 domain graph. Every domain is related to itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adjacency {
    domains: BTreeSet<DomainId>,
    /// Stored with the smaller id first.
    edges: BTreeSet<(DomainId, DomainId)>,
}

impl Adjacency {
    pub fn new(
        domains: impl IntoIterator<Item = DomainId>,
        edges: impl IntoIterator<Item = (DomainId, DomainId)>,
    ) -> Result<Self> {
        let domains: BTreeSet<DomainId> = domains.into_iter().collect();
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            for id in [a, b] {
                if !domains.contains(&id) {
                    return Err(Error::UnknownDomain(id));
                }
            }
            if a != b {
                set.insert((a.min(b), a.max(b)));
            }
        }
        Ok(Self { domains, edges: set })
    }

    /// Adds domains that have no edges.
    pub fn extend_domains(&mut self, ids: impl IntoIterator<Item = DomainId>) {
        self.domains.extend(ids);
    }

    pub fn domains(&self) -> impl Iterator<Item = DomainId> + '_ {
        self.domains.iter().copied()
    }

    pub fn edges(&self) -> Vec<(DomainId, DomainId)> {
        self.edges.iter().copied().collect()
    }

    pub fn related(&self, i: DomainId, j: DomainId) -> Result<f64> {
        for id in [i, j] {
            if !self.domains.contains(&id) {
                return Err(Error::UnknownDomain(id));
            }
        }
        Ok(if i == j || self.edges.contains(&(i.min(j), i.max(j))) {
            1.0
        } else {
            0.0
        })
    }
}

pub fn fixed_adjacency(adjacency: &Adjacency, i: DomainId, j: DomainId) -> Result<f64> {
    adjacency.related(i, j)
}

/// Source of the fixed relation `a^g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FixedRelation {
    /// First meta-data entry is an angle in radians.
    Angle,
    Adjacency(Adjacency),
}

impl FixedRelation {
    pub fn value(&self, i: DomainId, mi: &[f64], j: DomainId, mj: &[f64]) -> Result<f64> {
        match self {
            FixedRelation::Angle => {
                if i == j {
                    return Ok(1.0);
                }
                match (mi.first(), mj.first()) {
                    (Some(&a), Some(&b)) => Ok(fixed_angle_similarity(a, b)),
                    _ => Err(Error::MissingMeta(if mi.is_empty() { i } else { j })),
                }
            }
            FixedRelation::Adjacency(adj) => adj.related(i, j),
        }
    }
}
