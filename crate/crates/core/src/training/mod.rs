//! Loss, negative sampling, optimisers and the training loop.

mod checkpoint;
mod gradcheck;
mod loss;
mod optim;

pub use checkpoint::{load_checkpoint, save_checkpoint, BlockEntry, Manifest};
pub use gradcheck::{grad_check, BlockReport, GradCheckConfig, GradientReport};
pub use loss::{loss_grad, loss_one_query, sample_negatives, sigmoid, softplus};
pub use optim::{Optimizer, OptimizerKind, ADAGRAD_EPS, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combiner::{AttentionVariant, DistancePower};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, EvalOptions};
use crate::geometry::DistancePrefactor;
use crate::kg::{KnowledgeGraph, Split, Triple};
use crate::model::{AttentionScope, InitConfig, Model, ModelConfig, Scratch, SparseGrad, Variant};
use crate::query::ModelKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dtype {
    /// Parameters are rounded to f32 after every update and stored as f32.
    #[default]
    Single,
    Double,
}

impl Dtype {
    #[inline]
    pub fn round(self, x: f64) -> f64 {
        match self {
            Dtype::Single => x as f32 as f64,
            Dtype::Double => x,
        }
    }
}

fn default_patience() -> usize {
    20
}

fn default_eval_every() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub dim: usize,
    pub models: Vec<ModelKind>,
    pub variant: Variant,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    /// Negatives per positive; `-1` scores every entity.
    pub negatives: i64,
    pub batch_size: usize,
    #[serde(default)]
    pub dtype: Dtype,
    /// Use squared, renormalised attention weights.
    #[serde(default)]
    pub attention_reg: bool,
    /// Also train every positive through its reciprocal query.
    #[serde(default)]
    pub double_neg: bool,
    pub max_epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub attention_scope: AttentionScope,
    #[serde(default)]
    pub distance_power: DistancePower,
    #[serde(default)]
    pub prefactor: DistancePrefactor,
    #[serde(default)]
    pub init: InitConfig,
}

impl TrainConfig {
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            dim: self.dim,
            models: self.models.clone(),
            variant: self.variant,
            attention: if self.attention_reg {
                AttentionVariant::AlphaSquared
            } else {
                AttentionVariant::Alpha
            },
            attention_scope: self.attention_scope,
            distance_power: self.distance_power,
            prefactor: self.prefactor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model_config().validate()?;
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.negatives == 0 || self.negatives < -1 {
            return bad("negatives must be -1 or positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be positive");
        }
        Ok(())
    }

    /// Whether the run stays on the reported hyperparameter grid.
    pub fn on_reference_grid(&self) -> bool {
        [0.1, 0.05, 0.001].contains(&self.lr)
            && [-1, 50, 100, 150, 200, 250].contains(&self.negatives)
            && [100, 500].contains(&self.batch_size)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Negatives {
    Sampled(Vec<u32>),
    /// Every entity other than the positive is a negative.
    Full,
}

/// One positive `(head, relation, tail)` with its negative tails.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainQuery {
    pub head: u32,
    pub relation: u32,
    pub tail: u32,
    pub negatives: Negatives,
}

/// Loss of one query, its sparse gradient and clamp events.
pub fn query_loss_grad(model: &Model, q: &TrainQuery) -> (f64, SparseGrad, u32) {
    let d = model.dim();
    let state = model.forward_query(q.head, q.relation);
    let mut scratch = Scratch::new(d);
    let mut grad = SparseGrad::default();
    let mut g_point = vec![0.0; d];
    let mut g_c = 0.0;
    let mut events = state.clamp_events;
    let mut loss = 0.0;
    let mut visit = |tail: u32, positive: bool, grad: &mut SparseGrad| {
        let (s, e) = model.score_candidate(&state, tail, &mut scratch);
        events += e;
        loss += if positive { softplus(-s) } else { softplus(s) };
        let g = loss_grad(s, positive);
        model.candidate_backward(&state, tail, g, grad, &mut g_point, &mut g_c);
    };
    visit(q.tail, true, &mut grad);
    match &q.negatives {
        Negatives::Sampled(neg) => neg.iter().for_each(|&e| visit(e, false, &mut grad)),
        Negatives::Full => (0..model.n_entities as u32)
            .filter(|&e| e != q.tail)
            .for_each(|e| visit(e, false, &mut grad)),
    }
    model.query_backward(&state, &g_point, g_c, &mut grad);
    (loss, grad, events)
}

/// Loss of one query without gradients.
pub fn query_loss(model: &Model, q: &TrainQuery) -> f64 {
    let state = model.forward_query(q.head, q.relation);
    let mut scratch = Scratch::new(model.dim());
    let mut loss = softplus(-model.score_candidate(&state, q.tail, &mut scratch).0);
    let mut neg = |e: u32| loss += softplus(model.score_candidate(&state, e, &mut scratch).0);
    match &q.negatives {
        Negatives::Sampled(ns) => ns.iter().for_each(|&e| neg(e)),
        Negatives::Full => (0..model.n_entities as u32).filter(|&e| e != q.tail).for_each(neg),
    }
    loss
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Mean loss over the batch's queries.
    pub loss: f64,
    pub clamp_events: u32,
}

/// One line of the JSON-lines training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub val_mrr: Option<f64>,
    pub wall_ms: u64,
    pub clamp_events: u64,
}

pub struct Trainer<'a> {
    kg: &'a KnowledgeGraph,
    config: TrainConfig,
    model: Model,
    optimizer: Optimizer,
    rng: ChaCha8Rng,
    grads: Vec<Vec<f64>>,
    widths: Vec<usize>,
    epoch: usize,
    batches: usize,
}

impl<'a> Trainer<'a> {
    /// Initialises parameters from `config.seed`.
    pub fn new(kg: &'a KnowledgeGraph, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if !kg.is_augmented() {
            return Err(Error::NotAugmented);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut model = Model::init(
            config.model_config(),
            kg.n_entities(),
            kg.n_relations(),
            &config.init,
            &mut rng,
        )?;
        for b in &mut model.store.blocks {
            b.data.iter_mut().for_each(|x| *x = config.dtype.round(*x));
        }
        Ok(Self::with_model(kg, config, model, rng))
    }

    /// Trains an externally prepared model.
    pub fn with_model(kg: &'a KnowledgeGraph, config: TrainConfig, model: Model, rng: ChaCha8Rng) -> Self {
        let sizes: Vec<usize> = model.store.blocks.iter().map(|b| b.data.len()).collect();
        let optimizer = Optimizer::new(config.optimizer, config.lr, &sizes);
        let grads = sizes.iter().map(|&n| vec![0.0; n]).collect();
        let widths = model.block_widths();
        Self { kg, config, model, optimizer, rng, grads, widths, epoch: 0, batches: 0 }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Attaches negatives to each positive, plus the reciprocal query when
    /// `double_neg` is set.
    pub fn prepare_batch(&mut self, triples: &[Triple]) -> Result<Vec<TrainQuery>> {
        let ne = self.kg.n_entities();
        let mut out = Vec::with_capacity(triples.len() * if self.config.double_neg { 2 } else { 1 });
        for t in triples {
            let mut push = |head: u32, relation: u32, tail: u32, rng: &mut ChaCha8Rng| -> Result<()> {
                let negatives = if self.config.negatives < 0 {
                    Negatives::Full
                } else {
                    Negatives::Sampled(sample_negatives(rng, tail, self.config.negatives as usize, ne)?)
                };
                out.push(TrainQuery { head, relation, tail, negatives });
                Ok(())
            };
            push(t.head, t.relation, t.tail, &mut self.rng)?;
            if self.config.double_neg {
                push(t.tail, self.kg.reciprocal(t.relation), t.head, &mut self.rng)?;
            }
        }
        Ok(out)
    }

    /// Computes the mean-loss gradient of `batch` and applies one optimiser
    /// update. Per-query gradients are reduced in batch order.
    pub fn step(&mut self, batch: &[TrainQuery]) -> Result<StepOutcome> {
        if batch.is_empty() {
            return Ok(StepOutcome { loss: 0.0, clamp_events: 0 });
        }
        let model = &self.model;
        let results: Vec<(f64, SparseGrad, u32)> =
            batch.par_iter().map(|q| query_loss_grad(model, q)).collect();
        let scale = 1.0 / batch.len() as f64;
        self.grads.iter_mut().for_each(|g| g.fill(0.0));
        let mut loss = 0.0;
        let mut events = 0;
        for (l, g, e) in &results {
            loss += l;
            events += e;
            g.accumulate_into(&mut self.grads, &self.widths, scale);
        }
        let loss = loss * scale;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch: self.epoch, batch: self.batches });
        }
        let mut params: Vec<&mut [f64]> =
            self.model.store.blocks.iter_mut().map(|b| b.data.as_mut_slice()).collect();
        self.optimizer.step(&mut params, &self.grads);
        let dtype = self.config.dtype;
        if dtype == Dtype::Single {
            for p in params {
                p.iter_mut().for_each(|x| *x = dtype.round(*x));
            }
        }
        debug_assert!(!self.model.config.variant.is_hyperbolic() || self.model.curvature() > 0.0);
        self.batches += 1;
        Ok(StepOutcome { loss, clamp_events: events })
    }

    /// One pass over the shuffled training triples; the last partial batch
    /// is kept.
    pub fn run_epoch(&mut self) -> Result<EpochRecord> {
        let start = Instant::now();
        self.epoch += 1;
        let mut order = self.kg.train.clone();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        let mut count = 0usize;
        let mut events = 0u64;
        for chunk in order.chunks(self.config.batch_size) {
            let batch = self.prepare_batch(chunk)?;
            let out = self.step(&batch)?;
            total += out.loss * batch.len() as f64;
            count += batch.len();
            events += u64::from(out.clamp_events);
        }
        Ok(EpochRecord {
            epoch: self.epoch,
            loss: total / count.max(1) as f64,
            val_mrr: None,
            wall_ms: start.elapsed().as_millis() as u64,
            clamp_events: events,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the best-validation epoch (the last epoch when no
    /// validation split exists).
    pub model: Model,
    pub best_epoch: usize,
    pub best_val_mrr: Option<f64>,
    pub log: Vec<EpochRecord>,
}

/// Trains with periodic validation and early stopping on validation MRR.
pub fn train(
    kg: &KnowledgeGraph,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(kg, config.clone())?;
    let has_valid = !kg.valid.is_empty();
    let mut best: Option<(f64, usize, Model)> = None;
    let mut log = Vec::new();
    for epoch in 1..=config.max_epochs {
        let mut record = trainer.run_epoch()?;
        let validate = has_valid && (epoch % config.eval_every == 0 || epoch == config.max_epochs);
        let mut stop = false;
        if validate {
            let report = evaluate(kg, trainer.model(), Split::Valid, &EvalOptions::default())?;
            record.val_mrr = Some(report.mrr);
            match &best {
                Some((mrr, _, _)) if report.mrr <= *mrr => {}
                _ => best = Some((report.mrr, epoch, trainer.model().clone())),
            }
            let best_epoch = best.as_ref().map_or(0, |b| b.1);
            stop = epoch - best_epoch >= config.patience;
        }
        on_epoch(&record);
        log.push(record);
        if stop {
            break;
        }
    }
    Ok(match best {
        Some((mrr, epoch, model)) => TrainOutcome { model, best_epoch: epoch, best_val_mrr: Some(mrr), log },
        None => {
            let best_epoch = log.len();
            TrainOutcome { model: trainer.into_model(), best_epoch, best_val_mrr: None, log }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{generate_synthetic, PatternKind, RelationPattern, SyntheticSpec};

    pub(crate) fn small_config(variant: Variant) -> TrainConfig {
        TrainConfig {
            dim: 8,
            models: ModelKind::ALL.to_vec(),
            variant,
            lr: 0.01,
            optimizer: OptimizerKind::Adam,
            negatives: 5,
            batch_size: 16,
            dtype: Dtype::Double,
            attention_reg: false,
            double_neg: false,
            max_epochs: 3,
            patience: 20,
            eval_every: 1,
            seed: 11,
            attention_scope: AttentionScope::PerRelation,
            distance_power: DistancePower::Squared,
            prefactor: DistancePrefactor::TwoOverC,
            init: InitConfig::default(),
        }
    }

    fn small_kg() -> KnowledgeGraph {
        let spec = SyntheticSpec {
            n_entities: 20,
            relations: vec![
                RelationPattern { name: None, pattern: PatternKind::Symmetric { pairs: 15, groups: 0 } },
                RelationPattern { name: None, pattern: PatternKind::Antisymmetric { edges: 20, groups: 0 } },
            ],
            seed: 1,
        };
        generate_synthetic(&spec).unwrap().augment_reciprocal().unwrap()
    }

    #[test]
    fn config_rejects_bad_values() {
        let mut c = small_config(Variant::Sea);
        c.negatives = 0;
        assert!(c.validate().is_err());
        let mut c = small_config(Variant::Sea);
        c.dim = 7;
        assert!(c.validate().is_err());
        let json = r#"{"dim": 8, "models": ["TransE"], "variant": "SEA", "lr": 0.1,
            "optimizer": "Adam", "negatives": 50, "batch_size": 100, "max_epochs": 1, "bogus": 1}"#;
        assert!(serde_json::from_str::<TrainConfig>(json).is_err());
    }

    #[test]
    fn trainer_requires_augmented_graph() {
        let kg = generate_synthetic(&SyntheticSpec {
            n_entities: 6,
            relations: vec![RelationPattern { name: None, pattern: PatternKind::InversePair { pairs: 10 } }],
            seed: 0,
        })
        .unwrap();
        assert!(matches!(Trainer::new(&kg, small_config(Variant::Sea)), Err(Error::NotAugmented)));
    }

    #[test]
    fn double_neg_adds_reciprocal_queries() {
        let kg = small_kg();
        let mut c = small_config(Variant::Sea);
        c.double_neg = true;
        let mut t = Trainer::new(&kg, c).unwrap();
        let batch = t.prepare_batch(&kg.train[..3]).unwrap();
        assert_eq!(batch.len(), 6);
        assert_eq!(batch[1].head, kg.train[0].tail);
        assert_eq!(batch[1].relation, kg.reciprocal(kg.train[0].relation));
    }

    #[test]
    fn same_seed_same_loss() {
        let kg = small_kg();
        let run = || {
            let mut t = Trainer::new(&kg, small_config(Variant::Sepa)).unwrap();
            (0..3).map(|_| t.run_epoch().unwrap().loss).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn single_dtype_keeps_f32_values() {
        let kg = small_kg();
        let mut c = small_config(Variant::Sea);
        c.dtype = Dtype::Single;
        let mut t = Trainer::new(&kg, c).unwrap();
        t.run_epoch().unwrap();
        for b in &t.model().store.blocks {
            assert!(b.data.iter().all(|&x| (x as f32) as f64 == x));
        }
    }

    #[test]
    fn full_negatives_touch_every_entity() {
        let kg = small_kg();
        let mut c = small_config(Variant::Sea);
        c.negatives = -1;
        let mut t = Trainer::new(&kg, c).unwrap();
        let batch = t.prepare_batch(&kg.train[..1]).unwrap();
        assert_eq!(batch[0].negatives, Negatives::Full);
        let (_, g, _) = query_loss_grad(t.model(), &batch[0]);
        let touched: std::collections::HashSet<usize> =
            g.iter().filter(|(b, _, _)| *b == 0).map(|(_, r, _)| r).collect();
        assert_eq!(touched.len(), kg.n_entities());
    }
}
