//! Filtered link-prediction ranking: MRR, Hits@k, per-relation breakdown
//! and attention analysis.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, Split};
use crate::model::Model;
use crate::query::ModelKind;

/// Anything that can score every entity as tail of `(head, relation)`.
pub trait Scorer: Sync {
    fn n_entities(&self) -> usize;

    fn score_all(&self, head: u32, relation: u32, out: &mut [f64]);

    fn attention(&self, _head: u32, _relation: u32) -> Option<Vec<f64>> {
        None
    }
}

impl Scorer for Model {
    fn n_entities(&self) -> usize {
        self.n_entities
    }

    fn score_all(&self, head: u32, relation: u32, out: &mut [f64]) {
        Model::score_all(self, head, relation, out);
    }

    fn attention(&self, head: u32, relation: u32) -> Option<Vec<f64>> {
        Some(Model::attention(self, head, relation))
    }
}

/// `1 +` the number of unfiltered candidates other than `truth` scoring at
/// least as high as `truth`. `filter` must be sorted; a NaN true score ranks
/// below every candidate.
pub fn filtered_rank(scores: &[f64], truth: usize, filter: &[u32]) -> usize {
    let target = scores[truth];
    let above = scores
        .iter()
        .enumerate()
        .filter(|&(e, &s)| {
            e != truth
                && filter.binary_search(&(e as u32)).is_err()
                && (target.is_nan() || s >= target)
        })
        .count();
    1 + above
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MrrAggregation {
    /// Per triple: mean of the tail and head reciprocal ranks.
    #[default]
    Reciprocal,
    /// Per triple: reciprocal of the mean of the two ranks.
    Rank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub hits_at: Vec<usize>,
    pub aggregation: MrrAggregation,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { hits_at: vec![1, 3, 10], aggregation: MrrAggregation::Reciprocal }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationStats {
    pub mrr: f64,
    pub hits: BTreeMap<usize, f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub mrr: f64,
    pub hits: BTreeMap<usize, f64>,
    pub per_relation: BTreeMap<String, RelationStats>,
    /// Mean attention weights of tail queries, by relation.
    pub per_relation_attention: BTreeMap<String, Vec<f64>>,
    pub n_test: usize,
    /// `(tail rank, head rank)` per evaluated triple, in split order.
    #[serde(skip)]
    pub ranks: Vec<(usize, usize)>,
}

#[derive(Default)]
struct Accumulator {
    mrr: f64,
    hits: BTreeMap<usize, f64>,
    count: usize,
}

impl Accumulator {
    fn add(&mut self, ranks: (usize, usize), opts: &EvalOptions) {
        let (t, h) = (ranks.0 as f64, ranks.1 as f64);
        self.mrr += match opts.aggregation {
            MrrAggregation::Reciprocal => 0.5 * (1.0 / t + 1.0 / h),
            MrrAggregation::Rank => 2.0 / (t + h),
        };
        for &k in &opts.hits_at {
            let hit = 0.5 * (f64::from(ranks.0 <= k) + f64::from(ranks.1 <= k));
            *self.hits.entry(k).or_default() += hit;
        }
        self.count += 1;
    }

    fn finish(self) -> RelationStats {
        let n = self.count.max(1) as f64;
        RelationStats {
            mrr: self.mrr / n,
            hits: self.hits.into_iter().map(|(k, v)| (k, v / n)).collect(),
            count: self.count,
        }
    }
}

/// Tail rank directly, head rank through the reciprocal relation, both
/// filtered against every known triple.
pub fn evaluate<S: Scorer + ?Sized>(
    kg: &KnowledgeGraph,
    scorer: &S,
    split: Split,
    opts: &EvalOptions,
) -> Result<RankingReport> {
    if !kg.is_augmented() {
        return Err(Error::NotAugmented);
    }
    if scorer.n_entities() != kg.n_entities() {
        return Err(Error::DimensionMismatch { expected: kg.n_entities(), found: scorer.n_entities() });
    }
    kg.validate_split(split)?;
    let triples = kg.split(split);
    let n = kg.n_entities();
    let filter = kg.filter();
    let per_triple: Vec<((usize, usize), Option<Vec<f64>>)> = triples
        .par_iter()
        .map_init(
            || vec![0.0; n],
            |scores, t| {
                scorer.score_all(t.head, t.relation, scores);
                let tail = filtered_rank(scores, t.tail as usize, filter.tails(t.head, t.relation));
                let inv = kg.reciprocal(t.relation);
                scorer.score_all(t.tail, inv, scores);
                let head = filtered_rank(scores, t.head as usize, filter.tails(t.tail, inv));
                ((tail, head), scorer.attention(t.head, t.relation))
            },
        )
        .collect();

    let mut total = Accumulator::default();
    let mut by_rel: BTreeMap<String, Accumulator> = BTreeMap::new();
    let mut attention: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
    for (t, (ranks, alphas)) in triples.iter().zip(&per_triple) {
        let name = kg.relation_name(kg.raw_relation(t.relation)).to_string();
        total.add(*ranks, opts);
        by_rel.entry(name.clone()).or_default().add(*ranks, opts);
        if let Some(a) = alphas {
            let entry = attention.entry(name).or_insert_with(|| (vec![0.0; a.len()], 0));
            entry.0.iter_mut().zip(a).for_each(|(s, x)| *s += x);
            entry.1 += 1;
        }
    }
    let total = total.finish();
    Ok(RankingReport {
        mrr: total.mrr,
        hits: total.hits,
        per_relation: by_rel.into_iter().map(|(k, v)| (k, v.finish())).collect(),
        per_relation_attention: attention
            .into_iter()
            .map(|(k, (sum, c))| (k, sum.into_iter().map(|s| s / c as f64).collect()))
            .collect(),
        n_test: triples.len(),
        ranks: per_triple.into_iter().map(|(r, _)| r).collect(),
    })
}

/// A copy of `model` that answers with one constituent query only.
pub fn constituent_model(model: &Model, kind: ModelKind) -> Option<Model> {
    let index = model.active_models().iter().position(|&m| m == kind)?;
    let logits = (0..model.active_models().len())
        .map(|i| if i == index { 0.0 } else { -1e9 })
        .collect();
    let mut single = model.clone();
    single.pin_attention(Some(logits));
    Some(single)
}

/// Reports for each active constituent on its own.
pub fn constituent_reports(
    kg: &KnowledgeGraph,
    model: &Model,
    split: Split,
    opts: &EvalOptions,
) -> Result<Vec<(ModelKind, RankingReport)>> {
    model
        .active_models()
        .iter()
        .map(|&m| {
            let single = constituent_model(model, m).expect("active model");
            Ok((m, evaluate(kg, &single, split, opts)?))
        })
        .collect()
}

/// Per-relation rows: count, MRR and Hits@k of the combined model, then
/// Hits@k of every constituent.
pub fn per_relation_csv(report: &RankingReport, constituents: &[(ModelKind, RankingReport)]) -> String {
    let ks: Vec<usize> = report.hits.keys().copied().collect();
    let mut out = String::from("relation,count,mrr");
    for k in &ks {
        let _ = write!(out, ",H@{k}");
    }
    for (m, _) in constituents {
        for k in &ks {
            let _ = write!(out, ",{m}_H@{k}");
        }
    }
    out.push('\n');
    for (rel, stats) in &report.per_relation {
        let _ = write!(out, "{rel},{},{:.6}", stats.count, stats.mrr);
        for k in &ks {
            let _ = write!(out, ",{:.6}", stats.hits.get(k).copied().unwrap_or(0.0));
        }
        for (_, r) in constituents {
            let s = r.per_relation.get(rel);
            for k in &ks {
                let v = s.and_then(|s| s.hits.get(k)).copied().unwrap_or(0.0);
                let _ = write!(out, ",{v:.6}");
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_examples() {
        assert_eq!(filtered_rank(&[1.0, 5.0, 2.0], 1, &[]), 1);
        assert_eq!(filtered_rank(&[9.0, 7.0, 8.0, 6.0, 5.0], 1, &[2]), 2);
        assert_eq!(filtered_rank(&[0.5; 10], 3, &[]), 10);
        assert_eq!(filtered_rank(&[f64::NAN, 0.0, 1.0], 0, &[1]), 2);
    }

    #[test]
    fn aggregation_modes() {
        let opts = EvalOptions::default();
        let mut a = Accumulator::default();
        a.add((1, 3), &opts);
        let s = a.finish();
        assert!((s.mrr - (1.0 + 1.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(s.hits[&1], 0.5);
        assert_eq!(s.hits[&3], 1.0);
        let opts = EvalOptions { aggregation: MrrAggregation::Rank, ..Default::default() };
        let mut a = Accumulator::default();
        a.add((1, 3), &opts);
        assert_eq!(a.finish().mrr, 0.5);
    }
}
