//! Central finite-difference verification of the analytic gradients.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{query_loss, query_loss_grad, sample_negatives, Negatives, TrainQuery};
use crate::error::{Error, Result};
use crate::geometry;
use crate::model::{BlockKind, InitConfig, Model, ModelConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    pub probes_per_block: usize,
    /// Step of the five-point central difference.
    pub step: f64,
    /// Lower bound on the relative-error denominator.
    pub floor: f64,
    pub threshold: f64,
    pub seed: u64,
    pub n_entities: usize,
    pub n_relations: usize,
    pub negatives: usize,
    pub init_std: f64,
    pub curvature: f64,
    /// Queries whose ball points reach `sqrt(c) * |p|` at or beyond this are
    /// not probed.
    pub ball_limit: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            probes_per_block: 200,
            step: 1e-4,
            floor: 1e-5,
            threshold: 1e-4,
            seed: 0,
            n_entities: 12,
            n_relations: 4,
            negatives: 4,
            init_std: 0.3,
            curvature: 0.8,
            ball_limit: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub block: String,
    pub probes: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Largest analytic gradient magnitude seen, to flag vacuous checks.
    pub max_grad: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientReport {
    pub threshold: f64,
    pub blocks: Vec<BlockReport>,
}

impl GradientReport {
    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.passed)
    }

    pub fn block(&self, name: &str) -> Option<&BlockReport> {
        self.blocks.iter().find(|b| b.block == name)
    }
}

fn relative_error(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

/// Builds a random model for `config` and checks every parameter block.
pub fn grad_check(config: &ModelConfig, cfg: &GradCheckConfig) -> Result<GradientReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = InitConfig {
        embedding_std: cfg.init_std,
        attention_std: Some(cfg.init_std),
        curvature: cfg.curvature,
    };
    let mut model = Model::init(config.clone(), cfg.n_entities, cfg.n_relations, &init, &mut rng)?;
    let bias = Normal::new(0.0, 0.1).unwrap();
    if let Some(b) = model.store.block_mut(BlockKind::Bias) {
        b.data.iter_mut().for_each(|x| *x = bias.sample(&mut rng));
    }
    let mut pool = Vec::new();
    let mut attempts = 0;
    while pool.len() < 64 {
        attempts += 1;
        if attempts > 10_000 {
            return Err(Error::InvalidConfig("no query stays inside the probe ball".into()));
        }
        let head = rng.random_range(0..cfg.n_entities as u32);
        let relation = rng.random_range(0..cfg.n_relations as u32);
        let tail = rng.random_range(0..cfg.n_entities as u32);
        let negatives = sample_negatives(&mut rng, tail, cfg.negatives, cfg.n_entities)?;
        let q = TrainQuery { head, relation, tail, negatives: Negatives::Sampled(negatives) };
        if inside_probe_ball(&model, &q, cfg.ball_limit) {
            pool.push(q);
        }
    }
    check_model(&mut model, &pool, cfg, &mut rng)
}

fn inside_probe_ball(model: &Model, q: &TrainQuery, limit: f64) -> bool {
    if !model.config.variant.is_hyperbolic() {
        return true;
    }
    let c = model.curvature();
    let sc = c.sqrt();
    let state = model.forward_query(q.head, q.relation);
    if state.clamp_events > 0 || sc * geometry::norm(&state.point) >= limit {
        return false;
    }
    let Negatives::Sampled(neg) = &q.negatives else { return true };
    std::iter::once(&q.tail).chain(neg).all(|&t| {
        let y = geometry::exp_map_zero(model.entity(t), c);
        sc * y.norm() < limit
    })
}

/// Compares analytic and central-difference gradients on `(query, coordinate)`
/// probes drawn from `pool`, restricted to coordinates the query reaches.
pub fn check_model<R: Rng>(
    model: &mut Model,
    pool: &[TrainQuery],
    cfg: &GradCheckConfig,
    rng: &mut R,
) -> Result<GradientReport> {
    let grads: Vec<_> = pool.iter().map(|q| query_loss_grad(model, q).1).collect();
    let n_blocks = model.store.blocks.len();
    let mut blocks = Vec::with_capacity(n_blocks);
    for bi in 0..n_blocks {
        let cols = model.store.blocks[bi].cols;
        let name = model.store.blocks[bi].kind.name();
        let mut report = BlockReport {
            block: name,
            probes: 0,
            max_rel_error: 0.0,
            max_abs_error: 0.0,
            max_grad: 0.0,
            passed: true,
        };
        for _ in 0..cfg.probes_per_block {
            let qi = rng.random_range(0..pool.len());
            let mut rows: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for (_, r, v) in grads[qi].iter().filter(|(b, _, _)| *b == bi) {
                let acc = rows.entry(r).or_insert_with(|| vec![0.0; cols]);
                acc.iter_mut().zip(v).for_each(|(a, x)| *a += x);
            }
            let rows: Vec<(usize, Vec<f64>)> = rows.into_iter().collect();
            let (index, analytic) = match rows.choose(rng) {
                Some((row, values)) => {
                    let col = rng.random_range(0..cols);
                    (row * cols + col, values[col])
                }
                None => {
                    // The query never reads this block: analytic gradient is 0.
                    let len = model.store.blocks[bi].data.len();
                    (rng.random_range(0..len), 0.0)
                }
            };
            let original = model.store.blocks[bi].data[index];
            let mut at = |offset: f64| {
                model.store.blocks[bi].data[index] = original + offset;
                query_loss(model, &pool[qi])
            };
            let h = cfg.step;
            let numeric = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
            model.store.blocks[bi].data[index] = original;
            report.probes += 1;
            report.max_abs_error = report.max_abs_error.max((analytic - numeric).abs());
            report.max_rel_error = report.max_rel_error.max(relative_error(analytic, numeric, cfg.floor));
            report.max_grad = report.max_grad.max(analytic.abs());
        }
        report.passed = report.max_rel_error < cfg.threshold;
        blocks.push(report);
    }
    Ok(GradientReport { threshold: cfg.threshold, blocks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combiner::{AttentionVariant, DistancePower};
    use crate::geometry::DistancePrefactor;
    use crate::model::{AttentionScope, Variant};
    use crate::query::ModelKind;

    fn config(variant: Variant) -> ModelConfig {
        ModelConfig {
            dim: 8,
            models: ModelKind::ALL.to_vec(),
            variant,
            attention: AttentionVariant::Alpha,
            attention_scope: AttentionScope::PerRelation,
            distance_power: DistancePower::Squared,
            prefactor: DistancePrefactor::TwoOverC,
        }
    }

    #[test]
    fn relative_error_uses_floor() {
        assert_eq!(relative_error(0.0, 0.0, 1e-5), 0.0);
        assert!((relative_error(1e-9, 0.0, 1e-5) - 1e-4).abs() < 1e-18);
        assert!((relative_error(2.0, 1.0, 1e-5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn se_attention_gradient_is_zero() {
        let cfg = GradCheckConfig { probes_per_block: 20, ..Default::default() };
        let report = grad_check(&config(Variant::Se), &cfg).unwrap();
        let att = report.block("attention").unwrap();
        assert_eq!(att.max_grad, 0.0);
        assert_eq!(att.max_abs_error, 0.0);
    }

    #[test]
    fn small_checks_pass() {
        let cfg = GradCheckConfig { probes_per_block: 30, ..Default::default() };
        for v in [Variant::Sea, Variant::Sepa] {
            let report = grad_check(&config(v), &cfg).unwrap();
            assert!(report.passed(), "{report:?}");
        }
    }
}
