//! Constituent query transformations `q = g_r(h)`, all producing vectors in
//! the same `d`-dimensional real space.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry;

/// Constituent models, declared in canonical attention order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    TransE,
    RotatE,
    DistMult,
    ComplEx,
    Reflection,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::TransE,
        ModelKind::RotatE,
        ModelKind::DistMult,
        ModelKind::ComplEx,
        ModelKind::Reflection,
    ];

    /// Length of one relation's parameter block at dimension `d`.
    pub fn relation_width(self, d: usize) -> usize {
        match self {
            ModelKind::RotatE | ModelKind::Reflection => d / 2,
            _ => d,
        }
    }

    pub fn uses_pairs(self) -> bool {
        matches!(self, ModelKind::RotatE | ModelKind::ComplEx | ModelKind::Reflection)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::TransE => "TransE",
            ModelKind::RotatE => "RotatE",
            ModelKind::DistMult => "DistMult",
            ModelKind::ComplEx => "ComplEx",
            ModelKind::Reflection => "Reflection",
        }
    }

    /// Relation parameters that make the query equal to the head
    /// (Reflection has no identity; angle 0 is the x-axis mirror).
    pub fn neutral_relation(self, d: usize) -> Vec<f64> {
        match self {
            ModelKind::TransE | ModelKind::RotatE | ModelKind::Reflection => {
                vec![0.0; self.relation_width(d)]
            }
            ModelKind::DistMult => vec![1.0; d],
            ModelKind::ComplEx => (0..d).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect(),
        }
    }

    /// Writes `g_r(h)` into `out`. Lengths are assumed checked.
    pub(crate) fn apply(self, h: &[f64], rel: &[f64], out: &mut [f64]) {
        match self {
            ModelKind::TransE => {
                for ((o, a), b) in out.iter_mut().zip(h).zip(rel) {
                    *o = a + b;
                }
            }
            ModelKind::DistMult => {
                for ((o, a), b) in out.iter_mut().zip(h).zip(rel) {
                    *o = a * b;
                }
            }
            ModelKind::RotatE => geometry::rotate_into(h, rel, out),
            ModelKind::ComplEx => geometry::product_into(h, rel, out),
            ModelKind::Reflection => geometry::reflect_into(h, rel, out),
        }
    }

    /// Accumulates the backward of [`apply`](Self::apply); `q` is its output.
    pub(crate) fn backward(
        self,
        h: &[f64],
        rel: &[f64],
        q: &[f64],
        g: &[f64],
        g_h: &mut [f64],
        g_rel: &mut [f64],
    ) {
        match self {
            ModelKind::TransE => {
                for i in 0..g.len() {
                    g_h[i] += g[i];
                    g_rel[i] += g[i];
                }
            }
            ModelKind::DistMult => {
                for i in 0..g.len() {
                    g_h[i] += g[i] * rel[i];
                    g_rel[i] += g[i] * h[i];
                }
            }
            ModelKind::RotatE => geometry::rotate_vjp(rel, q, g, g_h, g_rel),
            ModelKind::ComplEx => geometry::product_vjp(h, rel, g, g_h, g_rel),
            ModelKind::Reflection => geometry::reflect_vjp(rel, q, g, g_h, g_rel),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown model `{s}`")))
    }
}

/// Sorts into canonical order and removes duplicates.
pub fn canonical_models(models: &[ModelKind]) -> Vec<ModelKind> {
    let mut out = models.to_vec();
    out.sort();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryRepresentation {
    pub vector: Vec<f64>,
    pub source: ModelKind,
}

fn checked(kind: ModelKind, h: &[f64], rel: &[f64]) -> Result<QueryRepresentation> {
    let d = h.len();
    if kind.uses_pairs() && !d.is_multiple_of(2) {
        return Err(Error::OddDimension(d));
    }
    let width = kind.relation_width(d);
    if rel.len() != width {
        return Err(Error::DimensionMismatch { expected: width, found: rel.len() });
    }
    let mut vector = vec![0.0; d];
    kind.apply(h, rel, &mut vector);
    Ok(QueryRepresentation { vector, source: kind })
}

/// `q = h + r`.
pub fn query_transe(h: &[f64], r: &[f64]) -> Result<QueryRepresentation> {
    checked(ModelKind::TransE, h, r)
}

/// Pairwise rotation of `h` by the angles `theta`.
pub fn query_rotate(h: &[f64], theta: &[f64]) -> Result<QueryRepresentation> {
    checked(ModelKind::RotatE, h, theta)
}

/// `q = h * r` elementwise.
pub fn query_distmult(h: &[f64], r: &[f64]) -> Result<QueryRepresentation> {
    checked(ModelKind::DistMult, h, r)
}

/// Pairwise complex product of `h` and `r`.
pub fn query_complex(h: &[f64], r: &[f64]) -> Result<QueryRepresentation> {
    checked(ModelKind::ComplEx, h, r)
}

/// Pairwise 2D reflection of `h` by the angles `theta`.
pub fn query_reflect(h: &[f64], theta: &[f64]) -> Result<QueryRepresentation> {
    checked(ModelKind::Reflection, h, theta)
}

/// One relation's parameters for each constituent model.
#[derive(Debug, Clone, Default)]
pub struct RelationParams<'a> {
    pub transe: Option<&'a [f64]>,
    pub rotate: Option<&'a [f64]>,
    pub distmult: Option<&'a [f64]>,
    pub complex: Option<&'a [f64]>,
    pub reflect: Option<&'a [f64]>,
}

impl<'a> RelationParams<'a> {
    pub fn get(&self, kind: ModelKind) -> Option<&'a [f64]> {
        match kind {
            ModelKind::TransE => self.transe,
            ModelKind::RotatE => self.rotate,
            ModelKind::DistMult => self.distmult,
            ModelKind::ComplEx => self.complex,
            ModelKind::Reflection => self.reflect,
        }
    }

    pub fn set(&mut self, kind: ModelKind, values: &'a [f64]) {
        let slot = match kind {
            ModelKind::TransE => &mut self.transe,
            ModelKind::RotatE => &mut self.rotate,
            ModelKind::DistMult => &mut self.distmult,
            ModelKind::ComplEx => &mut self.complex,
            ModelKind::Reflection => &mut self.reflect,
        };
        *slot = Some(values);
    }
}

/// Queries of every active model, in canonical order.
pub fn all_queries(
    h: &[f64],
    params: &RelationParams<'_>,
    active: &[ModelKind],
) -> Result<Vec<QueryRepresentation>> {
    if active.is_empty() {
        return Err(Error::InvalidConfig("no active model".into()));
    }
    canonical_models(active)
        .into_iter()
        .map(|kind| {
            let rel = params
                .get(kind)
                .ok_or_else(|| Error::InvalidConfig(format!("missing {kind} relation parameters")))?;
            checked(kind, h, rel)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transe_examples() {
        assert_eq!(query_transe(&[1.0, 2.0], &[0.0, 0.0]).unwrap().vector, vec![1.0, 2.0]);
        assert_eq!(query_transe(&[1.0, 2.0], &[-1.0, -2.0]).unwrap().vector, vec![0.0, 0.0]);
        assert!(query_transe(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn distmult_examples() {
        let h = [0.5, -1.5, 2.0];
        assert_eq!(query_distmult(&h, &[1.0; 3]).unwrap().vector, h.to_vec());
        assert_eq!(query_distmult(&h, &[0.0; 3]).unwrap().vector, vec![0.0; 3]);
    }

    #[test]
    fn pair_models_reject_odd_dimension() {
        assert!(matches!(query_rotate(&[1.0, 2.0, 3.0], &[0.0]), Err(Error::OddDimension(3))));
        assert!(matches!(query_reflect(&[1.0, 2.0, 3.0], &[0.0]), Err(Error::OddDimension(3))));
    }

    #[test]
    fn all_queries_shapes_and_order() {
        let d = 4;
        let h = [0.3, -0.2, 0.9, 0.4];
        let rels: Vec<Vec<f64>> = ModelKind::ALL.iter().map(|m| vec![0.1; m.relation_width(d)]).collect();
        let mut params = RelationParams::default();
        for (m, r) in ModelKind::ALL.iter().zip(&rels) {
            params.set(*m, r);
        }
        let reversed: Vec<ModelKind> = ModelKind::ALL.iter().rev().copied().collect();
        let qs = all_queries(&h, &params, &reversed).unwrap();
        assert_eq!(qs.len(), 5);
        assert!(qs.iter().all(|q| q.vector.len() == d));
        let order: Vec<ModelKind> = qs.iter().map(|q| q.source).collect();
        assert_eq!(order, ModelKind::ALL.to_vec());

        let single = all_queries(&h, &params, &[ModelKind::TransE]).unwrap();
        assert_eq!(single.len(), 1);
        assert!(all_queries(&h, &params, &[]).is_err());
    }

    #[test]
    fn neutral_parameters_return_the_head() {
        let d = 4;
        let h = [1.0, 0.0, 0.0, 0.0];
        let rels: Vec<Vec<f64>> = ModelKind::ALL.iter().map(|m| m.neutral_relation(d)).collect();
        let mut params = RelationParams::default();
        for (m, r) in ModelKind::ALL.iter().zip(&rels) {
            params.set(*m, r);
        }
        let qs = all_queries(&h, &params, &ModelKind::ALL).unwrap();
        for q in &qs[..4] {
            assert_eq!(q.vector, h.to_vec(), "{}", q.source);
        }
        assert_eq!(qs[4].vector, geometry::reflect2d(&h, &[0.0, 0.0]).unwrap());
    }

    #[test]
    fn parse_names() {
        assert_eq!("distmult".parse::<ModelKind>().unwrap(), ModelKind::DistMult);
        assert!("TuckER".parse::<ModelKind>().is_err());
    }
}
