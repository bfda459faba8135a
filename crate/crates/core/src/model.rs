//! Parameter store and the full scoring pipeline with its analytic backward
//! pass.
//!
//! A query `(h, r)` is scored against a candidate tail `t` as
//!
//! ```text
//! q_i   = g_r^i(h)                         one per active model
//! alpha = softmax(<w_r, q_i>)              uniform when attention is off
//! q_E   = sum_i alpha_i q_i
//! SEA:   s = -|t - q_E|^p + b_h + b_t
//! SEPA:  x = exp_0(q_E) (+) exp_0(r_hyp),  s = -d^c(x, exp_0(t))^p + b_h + b_t
//! ```

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::combiner::{self, AttentionVariant, DistancePower};
use crate::error::{Error, Result};
use crate::geometry::{self, DistancePrefactor};
use crate::query::{canonical_models, ModelKind, RelationParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "SEA")]
    Sea,
    #[serde(rename = "SEPA")]
    Sepa,
    /// SEA with attention turned off.
    #[serde(rename = "SE")]
    Se,
    /// SEPA with attention turned off.
    #[serde(rename = "SEP")]
    Sep,
}

impl Variant {
    pub fn is_hyperbolic(self) -> bool {
        matches!(self, Variant::Sepa | Variant::Sep)
    }

    pub fn has_attention(self) -> bool {
        matches!(self, Variant::Sea | Variant::Sepa)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Sea => "SEA",
            Variant::Sepa => "SEPA",
            Variant::Se => "SE",
            Variant::Sep => "SEP",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionScope {
    #[default]
    PerRelation,
    /// One attention vector shared by every relation.
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    pub models: Vec<ModelKind>,
    pub variant: Variant,
    #[serde(default)]
    pub attention: AttentionVariant,
    #[serde(default)]
    pub attention_scope: AttentionScope,
    #[serde(default)]
    pub distance_power: DistancePower,
    #[serde(default)]
    pub prefactor: DistancePrefactor,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidConfig("dim must be positive".into()));
        }
        if self.models.is_empty() {
            return Err(Error::InvalidConfig("at least one model must be active".into()));
        }
        if !self.dim.is_multiple_of(2) && self.models.iter().any(|m| m.uses_pairs()) {
            return Err(Error::OddDimension(self.dim));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKind {
    Entity,
    Bias,
    Relation(ModelKind),
    Hyperbolic,
    Attention,
    LogCurvature,
}

impl BlockKind {
    pub fn name(self) -> String {
        match self {
            BlockKind::Entity => "entity".into(),
            BlockKind::Bias => "bias".into(),
            BlockKind::Relation(m) => format!("rel_{}", m.name().to_lowercase()),
            BlockKind::Hyperbolic => "rel_hyperbolic".into(),
            BlockKind::Attention => "attention".into(),
            BlockKind::LogCurvature => "log_curvature".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock {
    pub kind: BlockKind,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl ParamBlock {
    fn zeros(kind: BlockKind, rows: usize, cols: usize) -> Self {
        Self { kind, rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Positions of each block inside [`EmbeddingStore::blocks`].
#[derive(Debug, Clone, PartialEq)]
struct Layout {
    entity: usize,
    bias: usize,
    relation: [Option<usize>; 5],
    hyperbolic: Option<usize>,
    attention: usize,
    curvature: Option<usize>,
}

fn model_slot(m: ModelKind) -> usize {
    ModelKind::ALL.iter().position(|&k| k == m).unwrap()
}

/// Initial-value scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    /// Standard deviation of entity and relation entries.
    pub embedding_std: f64,
    /// Standard deviation of attention entries; `None` means `1/sqrt(d)`.
    pub attention_std: Option<f64>,
    pub curvature: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self { embedding_std: 1e-3, attention_std: None, curvature: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    pub blocks: Vec<ParamBlock>,
    layout: Layout,
}

impl EmbeddingStore {
    /// Zero-initialised store shaped for `config`.
    pub fn zeros(config: &ModelConfig, n_entities: usize, n_relations: usize) -> Self {
        let d = config.dim;
        let mut blocks = vec![
            ParamBlock::zeros(BlockKind::Entity, n_entities, d),
            ParamBlock::zeros(BlockKind::Bias, n_entities, 1),
        ];
        let mut relation = [None; 5];
        for m in canonical_models(&config.models) {
            relation[model_slot(m)] = Some(blocks.len());
            blocks.push(ParamBlock::zeros(BlockKind::Relation(m), n_relations, m.relation_width(d)));
        }
        let hyperbolic = config.variant.is_hyperbolic().then(|| {
            blocks.push(ParamBlock::zeros(BlockKind::Hyperbolic, n_relations, d));
            blocks.len() - 1
        });
        let att_rows = match config.attention_scope {
            AttentionScope::PerRelation => n_relations,
            AttentionScope::Global => 1,
        };
        blocks.push(ParamBlock::zeros(BlockKind::Attention, att_rows, d));
        let attention = blocks.len() - 1;
        let curvature = config.variant.is_hyperbolic().then(|| {
            blocks.push(ParamBlock::zeros(BlockKind::LogCurvature, 1, 1));
            blocks.len() - 1
        });
        Self {
            blocks,
            layout: Layout { entity: 0, bias: 1, relation, hyperbolic, attention, curvature },
        }
    }

    pub fn block(&self, kind: BlockKind) -> Option<&ParamBlock> {
        self.index_of(kind).map(|i| &self.blocks[i])
    }

    pub fn block_mut(&mut self, kind: BlockKind) -> Option<&mut ParamBlock> {
        self.index_of(kind).map(move |i| &mut self.blocks[i])
    }

    pub fn index_of(&self, kind: BlockKind) -> Option<usize> {
        let l = &self.layout;
        match kind {
            BlockKind::Entity => Some(l.entity),
            BlockKind::Bias => Some(l.bias),
            BlockKind::Relation(m) => l.relation[model_slot(m)],
            BlockKind::Hyperbolic => l.hyperbolic,
            BlockKind::Attention => Some(l.attention),
            BlockKind::LogCurvature => l.curvature,
        }
    }

    pub fn n_params(&self) -> usize {
        self.blocks.iter().map(|b| b.data.len()).sum()
    }
}

/// Sparse gradient: a list of (block, row) slices in insertion order.
/// Rows may repeat; consumers sum them.
#[derive(Debug, Clone, Default)]
pub struct SparseGrad {
    pub rows: Vec<(usize, usize, usize)>,
    pub values: Vec<f64>,
}

impl SparseGrad {
    /// Appends a zeroed row and returns it for accumulation.
    pub fn row(&mut self, block: usize, row: usize, width: usize) -> &mut [f64] {
        let start = self.values.len();
        self.rows.push((block, row, start));
        self.values.resize(start + width, 0.0);
        &mut self.values[start..]
    }

    /// Iterates `(block, row, values)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &[f64])> + '_ {
        self.rows.iter().enumerate().map(move |(i, &(b, r, start))| {
            let end = self.rows.get(i + 1).map_or(self.values.len(), |n| n.2);
            (b, r, &self.values[start..end])
        })
    }

    /// Adds every row into dense per-block buffers, scaled by `scale`.
    pub fn accumulate_into(&self, dense: &mut [Vec<f64>], widths: &[usize], scale: f64) {
        for (b, r, vals) in self.iter() {
            let w = widths[b];
            let dst = &mut dense[b][r * w..(r + 1) * w];
            for (d, v) in dst.iter_mut().zip(vals) {
                *d += scale * v;
            }
        }
    }
}

/// Poincare-ball intermediates of one query.
#[derive(Debug, Clone)]
struct BallState {
    qm_pre: Vec<f64>,
    qm: Vec<f64>,
    rh_pre: Vec<f64>,
    rh: Vec<f64>,
    x_pre: Vec<f64>,
}

/// Forward intermediates of one query `(h, r)`, shared by all candidates.
#[derive(Debug, Clone)]
pub struct QueryState {
    pub head: u32,
    pub relation: u32,
    /// Active-model queries, flattened `n x d`.
    pub queries: Vec<f64>,
    pub alphas: Vec<f64>,
    pub q_e: Vec<f64>,
    /// Query-side point compared against tails: `q_E` or its ball image.
    pub point: Vec<f64>,
    pub clamp_events: u32,
    ball: Option<BallState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub n_entities: usize,
    pub n_relations: usize,
    pub store: EmbeddingStore,
    models: Vec<ModelKind>,
    /// Attention logits that replace `<w, q_i>` when set.
    pinned_scores: Option<Vec<f64>>,
}

impl Model {
    /// Zero parameters; every relation block starts at its neutral value
    /// only if `init` is used.
    pub fn zeros(config: ModelConfig, n_entities: usize, n_relations: usize) -> Result<Self> {
        config.validate()?;
        let store = EmbeddingStore::zeros(&config, n_entities, n_relations);
        let models = canonical_models(&config.models);
        Ok(Self { config, n_entities, n_relations, store, models, pinned_scores: None })
    }

    /// Gaussian entity/relation entries, zero biases, Gaussian attention and
    /// the configured initial curvature.
    pub fn init<R: Rng>(
        config: ModelConfig,
        n_entities: usize,
        n_relations: usize,
        init: &InitConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let mut model = Self::zeros(config, n_entities, n_relations)?;
        let d = model.config.dim as f64;
        let emb = Normal::new(0.0, init.embedding_std)
            .map_err(|e| Error::InvalidConfig(format!("embedding_std: {e}")))?;
        let att = Normal::new(0.0, init.attention_std.unwrap_or(1.0 / d.sqrt()))
            .map_err(|e| Error::InvalidConfig(format!("attention_std: {e}")))?;
        if init.curvature <= 0.0 {
            return Err(Error::InvalidConfig("initial curvature must be positive".into()));
        }
        for block in &mut model.store.blocks {
            match block.kind {
                BlockKind::Entity | BlockKind::Relation(_) | BlockKind::Hyperbolic => {
                    block.data.iter_mut().for_each(|x| *x = emb.sample(rng));
                }
                BlockKind::Attention => block.data.iter_mut().for_each(|x| *x = att.sample(rng)),
                BlockKind::Bias => {}
                BlockKind::LogCurvature => block.data[0] = init.curvature.ln(),
            }
        }
        Ok(model)
    }

    /// Rebuilds a model from raw block contents in layout order.
    pub fn from_blocks(
        config: ModelConfig,
        n_entities: usize,
        n_relations: usize,
        blocks: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let mut model = Self::zeros(config, n_entities, n_relations)?;
        if blocks.len() != model.store.blocks.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter blocks, found {}",
                model.store.blocks.len(),
                blocks.len()
            )));
        }
        for (dst, src) in model.store.blocks.iter_mut().zip(blocks) {
            if dst.data.len() != src.len() {
                return Err(Error::Checkpoint(format!(
                    "block {} has {} values, expected {}",
                    dst.kind.name(),
                    src.len(),
                    dst.data.len()
                )));
            }
            dst.data = src;
        }
        Ok(model)
    }

    pub fn active_models(&self) -> &[ModelKind] {
        &self.models
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    /// Curvature `c = exp(log c)`; 0 for Euclidean variants.
    pub fn curvature(&self) -> f64 {
        self.store
            .block(BlockKind::LogCurvature)
            .map_or(0.0, |b| b.data[0].exp())
    }

    /// Forces the attention logits of every query (test and analysis hook).
    pub fn pin_attention(&mut self, scores: Option<Vec<f64>>) {
        self.pinned_scores = scores;
    }

    pub fn entity(&self, e: u32) -> &[f64] {
        self.store.blocks[self.store.layout.entity].row(e as usize)
    }

    pub fn bias(&self, e: u32) -> f64 {
        self.store.blocks[self.store.layout.bias].data[e as usize]
    }

    fn attention_row(&self, relation: u32) -> usize {
        match self.config.attention_scope {
            AttentionScope::PerRelation => relation as usize,
            AttentionScope::Global => 0,
        }
    }

    pub fn relation_params(&self, relation: u32) -> RelationParams<'_> {
        let mut params = RelationParams::default();
        for &m in &self.models {
            let block = self.store.block(BlockKind::Relation(m)).expect("active model block");
            params.set(m, block.row(relation as usize));
        }
        params
    }

    fn attention_active(&self) -> bool {
        self.config.variant.has_attention() && self.pinned_scores.is_none()
    }

    pub fn forward_query(&self, head: u32, relation: u32) -> QueryState {
        let d = self.dim();
        let n = self.models.len();
        let h = self.entity(head);
        let params = self.relation_params(relation);
        let mut queries = vec![0.0; n * d];
        for (i, &m) in self.models.iter().enumerate() {
            m.apply(h, params.get(m).unwrap(), &mut queries[i * d..(i + 1) * d]);
        }
        let views: Vec<&[f64]> = queries.chunks(d).collect();
        let alphas = if let Some(pinned) = &self.pinned_scores {
            combiner::weights_from_scores(pinned, self.config.attention)
        } else if self.config.variant.has_attention() {
            let w = self.store.blocks[self.store.layout.attention].row(self.attention_row(relation));
            combiner::weights_from_scores(&combiner::attention_scores(&views, w), self.config.attention)
        } else {
            combiner::uniform_weights(n)
        };
        let mut q_e = vec![0.0; d];
        combiner::combine_into(&views, &alphas, &mut q_e);

        let mut clamp_events = 0;
        let (point, ball) = if self.config.variant.is_hyperbolic() {
            let c = self.curvature();
            let lift = |v: &[f64], events: &mut u32| {
                let pre = geometry::exp_map_zero(v, c).data;
                let mut post = pre.clone();
                if geometry::project_in_place(&mut post, c) {
                    *events += 1;
                }
                (pre, post)
            };
            let (qm_pre, qm) = lift(&q_e, &mut clamp_events);
            let r_hyp = self.store.blocks[self.store.layout.hyperbolic.unwrap()].row(relation as usize);
            let (rh_pre, rh) = lift(r_hyp, &mut clamp_events);
            let mut x_pre = vec![0.0; d];
            geometry::mobius_into(&qm, &rh, c, &mut x_pre);
            let mut x = x_pre.clone();
            if geometry::project_in_place(&mut x, c) {
                clamp_events += 1;
            }
            (x, Some(BallState { qm_pre, qm, rh_pre, rh, x_pre }))
        } else {
            (q_e.clone(), None)
        };
        QueryState { head, relation, queries, alphas, q_e, point, clamp_events, ball }
    }

    /// Ball image of a tail embedding, with whether projection was active.
    fn lift_tail(&self, tail: u32, c: f64, out: &mut [f64]) -> bool {
        geometry::exp0_into(self.entity(tail), c, out);
        geometry::project_in_place(out, c)
    }

    /// Score of `tail` for a prepared query, with clamp events.
    pub fn score_candidate(&self, state: &QueryState, tail: u32, scratch: &mut Scratch) -> (f64, u32) {
        let biases = self.bias(state.head) + self.bias(tail);
        let power = self.config.distance_power;
        if self.config.variant.is_hyperbolic() {
            let c = self.curvature();
            let mut events = u32::from(self.lift_tail(tail, c, &mut scratch.y));
            let dist = geometry::distance_raw(&state.point, &scratch.y, c, self.config.prefactor, &mut scratch.m);
            events += u32::from(dist.clamped);
            (-power.apply(dist.value) + biases, events)
        } else {
            (combiner::score_sea(&state.point, self.entity(tail), 0.0, 0.0, power) + biases, 0)
        }
    }

    /// Scores every entity as tail of `(head, relation)`.
    pub fn score_all(&self, head: u32, relation: u32, out: &mut [f64]) -> u32 {
        let state = self.forward_query(head, relation);
        let mut scratch = Scratch::new(self.dim());
        let mut events = state.clamp_events;
        for (t, o) in out.iter_mut().enumerate() {
            let (s, e) = self.score_candidate(&state, t as u32, &mut scratch);
            *o = s;
            events += e;
        }
        events
    }

    /// Backward of one candidate score with upstream `g_s`. Accumulates the
    /// gradient with respect to the query-side point into `g_point` and with
    /// respect to the curvature `c` into `g_c`.
    pub fn candidate_backward(
        &self,
        state: &QueryState,
        tail: u32,
        g_s: f64,
        grad: &mut SparseGrad,
        g_point: &mut [f64],
        g_c: &mut f64,
    ) {
        let d = self.dim();
        let layout = &self.store.layout;
        grad.row(layout.bias, state.head as usize, 1)[0] += g_s;
        grad.row(layout.bias, tail as usize, 1)[0] += g_s;
        let t = self.entity(tail);
        let power = self.config.distance_power;
        if self.config.variant.is_hyperbolic() {
            let c = self.curvature();
            let mut y_pre = vec![0.0; d];
            geometry::exp0_into(t, c, &mut y_pre);
            let mut y = y_pre.clone();
            geometry::project_in_place(&mut y, c);
            let mut scratch = vec![0.0; d];
            let dist = geometry::distance_raw(&state.point, &y, c, self.config.prefactor, &mut scratch);
            let g_dist = -g_s * power.derivative(dist.value);
            let mut g_y = vec![0.0; d];
            *g_c += geometry::distance_vjp(&state.point, &y, c, self.config.prefactor, g_dist, g_point, &mut g_y);
            let mut g_ypre = vec![0.0; d];
            *g_c += geometry::project_vjp(&y_pre, c, &g_y, &mut g_ypre);
            let g_t = grad.row(layout.entity, tail as usize, d);
            *g_c += geometry::exp0_vjp(t, c, &g_ypre, g_t);
        } else {
            let q = &state.point;
            let scale = match power {
                DistancePower::Squared => 2.0,
                DistancePower::Plain => {
                    let dist = geometry::norm(&t.iter().zip(q).map(|(a, b)| a - b).collect::<Vec<_>>());
                    if dist == 0.0 {
                        0.0
                    } else {
                        1.0 / dist
                    }
                }
            };
            let g_t = grad.row(layout.entity, tail as usize, d);
            for i in 0..d {
                let diff = t[i] - q[i];
                g_point[i] += g_s * scale * diff;
                g_t[i] -= g_s * scale * diff;
            }
        }
    }

    /// Backward from the query-side point to head, relation, attention and
    /// curvature parameters.
    pub fn query_backward(&self, state: &QueryState, g_point: &[f64], mut g_c: f64, grad: &mut SparseGrad) {
        let d = self.dim();
        let n = self.models.len();
        let layout = &self.store.layout;
        let rel = state.relation as usize;

        let mut g_qe = vec![0.0; d];
        if let Some(ball) = &state.ball {
            let c = self.curvature();
            let mut g_xpre = vec![0.0; d];
            g_c += geometry::project_vjp(&ball.x_pre, c, g_point, &mut g_xpre);
            let mut g_qm = vec![0.0; d];
            let mut g_rh = vec![0.0; d];
            g_c += geometry::mobius_vjp(&ball.qm, &ball.rh, c, &g_xpre, &mut g_qm, &mut g_rh);
            let mut g_qmpre = vec![0.0; d];
            g_c += geometry::project_vjp(&ball.qm_pre, c, &g_qm, &mut g_qmpre);
            g_c += geometry::exp0_vjp(&state.q_e, c, &g_qmpre, &mut g_qe);
            let mut g_rhpre = vec![0.0; d];
            g_c += geometry::project_vjp(&ball.rh_pre, c, &g_rh, &mut g_rhpre);
            let r_hyp = self.store.blocks[layout.hyperbolic.unwrap()].row(rel);
            let g_r = grad.row(layout.hyperbolic.unwrap(), rel, d);
            g_c += geometry::exp0_vjp(r_hyp, c, &g_rhpre, g_r);
            if let Some(ci) = layout.curvature {
                grad.row(ci, 0, 1)[0] += g_c * c;
            }
        } else {
            g_qe.copy_from_slice(g_point);
        }

        let mut g_queries = vec![0.0; n * d];
        for (i, a) in state.alphas.iter().enumerate() {
            for j in 0..d {
                g_queries[i * d + j] = a * g_qe[j];
            }
        }
        if self.attention_active() {
            let g_alpha: Vec<f64> = state
                .queries
                .chunks(d)
                .map(|q| geometry::dot(q, &g_qe))
                .collect();
            let g_scores = combiner::weights_backward(&state.alphas, self.config.attention, &g_alpha);
            let arow = self.attention_row(state.relation);
            let w = self.store.blocks[layout.attention].row(arow).to_vec();
            let g_w = grad.row(layout.attention, arow, d);
            for (i, gs) in g_scores.iter().enumerate() {
                let q = &state.queries[i * d..(i + 1) * d];
                for j in 0..d {
                    g_w[j] += gs * q[j];
                    g_queries[i * d + j] += gs * w[j];
                }
            }
        }

        let h = self.entity(state.head);
        let params = self.relation_params(state.relation);
        let mut g_h = vec![0.0; d];
        for (i, &m) in self.models.iter().enumerate() {
            let r = params.get(m).unwrap();
            let bi = layout.relation[model_slot(m)].unwrap();
            let g_r = grad.row(bi, rel, m.relation_width(d));
            m.backward(
                h,
                r,
                &state.queries[i * d..(i + 1) * d],
                &g_queries[i * d..(i + 1) * d],
                &mut g_h,
                g_r,
            );
        }
        grad.row(layout.entity, state.head as usize, d)
            .iter_mut()
            .zip(&g_h)
            .for_each(|(a, b)| *a += b);
    }

    /// Mean attention weights of `(head, relation)`.
    pub fn attention(&self, head: u32, relation: u32) -> Vec<f64> {
        self.forward_query(head, relation).alphas
    }

    pub fn block_widths(&self) -> Vec<usize> {
        self.store.blocks.iter().map(|b| b.cols).collect()
    }
}

/// Reusable per-thread buffers for candidate scoring.
#[derive(Debug, Clone)]
pub struct Scratch {
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Scratch {
    pub fn new(d: usize) -> Self {
        Self { y: vec![0.0; d], m: vec![0.0; d] }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config(variant: Variant) -> ModelConfig {
        ModelConfig {
            dim: 4,
            models: ModelKind::ALL.to_vec(),
            variant,
            attention: AttentionVariant::Alpha,
            attention_scope: AttentionScope::PerRelation,
            distance_power: DistancePower::Squared,
            prefactor: DistancePrefactor::TwoOverC,
        }
    }

    #[test]
    fn block_layout_follows_variant() {
        let m = Model::zeros(config(Variant::Sea), 5, 3).unwrap();
        assert!(m.store.block(BlockKind::Hyperbolic).is_none());
        assert!(m.store.block(BlockKind::LogCurvature).is_none());
        assert_eq!(m.store.block(BlockKind::Relation(ModelKind::RotatE)).unwrap().cols, 2);
        let m = Model::zeros(config(Variant::Sepa), 5, 3).unwrap();
        assert_eq!(m.store.block(BlockKind::Hyperbolic).unwrap().rows, 3);
        assert_eq!(m.curvature(), 1.0);
    }

    #[test]
    fn odd_dimension_rejected_with_pair_models() {
        let mut c = config(Variant::Sea);
        c.dim = 3;
        assert!(matches!(Model::zeros(c.clone(), 2, 1), Err(Error::OddDimension(3))));
        c.models = vec![ModelKind::TransE, ModelKind::DistMult];
        assert!(Model::zeros(c, 2, 1).is_ok());
    }

    #[test]
    fn disabled_attention_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = Model::init(config(Variant::Se), 6, 2, &InitConfig::default(), &mut rng).unwrap();
        assert!(m.attention(0, 1).iter().all(|&a| a == 0.2));
    }

    #[test]
    fn score_all_matches_candidate_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let init = InitConfig { embedding_std: 0.3, ..Default::default() };
        for v in [Variant::Sea, Variant::Sepa] {
            let m = Model::init(config(v), 6, 2, &init, &mut rng).unwrap();
            let mut all = vec![0.0; 6];
            m.score_all(1, 1, &mut all);
            let st = m.forward_query(1, 1);
            let mut scratch = Scratch::new(4);
            for t in 0..6 {
                assert_eq!(all[t], m.score_candidate(&st, t as u32, &mut scratch).0);
            }
        }
    }
}
