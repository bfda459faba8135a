use geokge_core::evaluation::{
    constituent_model, constituent_reports, evaluate, filtered_rank, per_relation_csv, EvalOptions, MrrAggregation,
    Scorer,
};
use geokge_core::kg::{generate_synthetic, PatternKind, RelationPattern, SyntheticSpec};
use geokge_core::combiner::{AttentionVariant, DistancePower};
use geokge_core::geometry::DistancePrefactor;
use geokge_core::model::{AttentionScope, InitConfig};
use geokge_core::{KnowledgeGraph, Model, ModelConfig, ModelKind, Split, Variant};
use proptest::collection::vec;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn graph() -> KnowledgeGraph {
    let spec = SyntheticSpec {
        n_entities: 40,
        relations: vec![
            RelationPattern { name: None, pattern: PatternKind::Symmetric { pairs: 40, groups: 0 } },
            RelationPattern { name: None, pattern: PatternKind::Antisymmetric { edges: 60, groups: 0 } },
        ],
        seed: 8,
    };
    generate_synthetic(&spec).unwrap().augment_reciprocal().unwrap()
}

/// Scores drawn from a fixed-seed stream per `(head, relation)`, optionally
/// passed through a transform.
struct RandomScorer {
    n: usize,
    seed: u64,
    transform: fn(f64) -> f64,
}

impl Scorer for RandomScorer {
    fn n_entities(&self) -> usize {
        self.n
    }

    fn score_all(&self, head: u32, relation: u32, out: &mut [f64]) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (u64::from(head) << 32) ^ u64::from(relation));
        out.iter_mut().for_each(|x| *x = (self.transform)(rng.random::<f64>()));
    }
}

#[test]
fn random_scores_give_chance_level_ranks() {
    // With i.i.d. continuous scores the filtered rank is uniform on
    // 1..=m, where m is the number of unfiltered candidates.
    let kg = graph();
    let mut observed = 0.0;
    let mut expected = 0.0;
    let mut variance = 0.0;
    let mut n = 0.0;
    for seed in 0..20 {
        let scorer = RandomScorer { n: kg.n_entities(), seed, transform: |x| x };
        let report = evaluate(&kg, &scorer, Split::Test, &EvalOptions::default()).unwrap();
        for (t, &(rt, rh)) in kg.test.iter().zip(&report.ranks) {
            for (h, r, rank) in [(t.head, t.relation, rt), (t.tail, kg.reciprocal(t.relation), rh)] {
                let m = kg.n_entities() - kg.filter().tails(h, r).len() + 1;
                let mean = (1..=m).map(|k| 1.0 / k as f64).sum::<f64>() / m as f64;
                let second = (1..=m).map(|k| 1.0 / (k * k) as f64).sum::<f64>() / m as f64;
                observed += 1.0 / rank as f64;
                expected += mean;
                variance += second - mean * mean;
                n += 1.0;
            }
        }
    }
    let sigma = variance.sqrt();
    assert!((observed - expected).abs() <= 3.0 * sigma, "observed {observed}, expected {expected}, sigma {sigma}");
    assert!(n > 0.0);
}

#[test]
fn ranks_are_invariant_under_monotone_transforms() {
    let kg = graph();
    let opts = EvalOptions::default();
    let base = evaluate(&kg, &RandomScorer { n: kg.n_entities(), seed: 3, transform: |x| x }, Split::Test, &opts).unwrap();
    let transformed = evaluate(
        &kg,
        &RandomScorer { n: kg.n_entities(), seed: 3, transform: |x| 5.0 * x.powi(3) - 2.0 },
        Split::Test,
        &opts,
    )
    .unwrap();
    assert_eq!(base.ranks, transformed.ranks);
    assert_eq!(base.mrr, transformed.mrr);
}

#[test]
fn rank_aggregation_modes() {
    let kg = graph();
    let scorer = RandomScorer { n: kg.n_entities(), seed: 5, transform: |x| x };
    let reciprocal = evaluate(&kg, &scorer, Split::Test, &EvalOptions::default()).unwrap();
    let opts = EvalOptions { aggregation: MrrAggregation::Rank, ..Default::default() };
    let rank = evaluate(&kg, &scorer, Split::Test, &opts).unwrap();
    let n = reciprocal.ranks.len() as f64;
    let mean_reciprocal: f64 =
        reciprocal.ranks.iter().map(|&(t, h)| 0.5 / t as f64 + 0.5 / h as f64).sum::<f64>() / n;
    let mean_rank: f64 = reciprocal.ranks.iter().map(|&(t, h)| 2.0 / (t + h) as f64).sum::<f64>() / n;
    assert!((reciprocal.mrr - mean_reciprocal).abs() < 1e-12);
    assert!((rank.mrr - mean_rank).abs() < 1e-12);
    // Harmonic-mean style aggregation never exceeds the arithmetic one.
    assert!(rank.mrr <= reciprocal.mrr + 1e-12);
}

#[test]
fn evaluation_requires_an_augmented_graph() {
    let spec = SyntheticSpec {
        n_entities: 10,
        relations: vec![RelationPattern { name: None, pattern: PatternKind::Symmetric { pairs: 8, groups: 0 } }],
        seed: 1,
    };
    let raw = generate_synthetic(&spec).unwrap();
    let scorer = RandomScorer { n: raw.n_entities(), seed: 0, transform: |x| x };
    assert!(evaluate(&raw, &scorer, Split::Test, &EvalOptions::default()).is_err());
}

#[test]
fn constituent_reports_cover_every_model() {
    let kg = graph();
    let config = ModelConfig {
        dim: 8,
        models: ModelKind::ALL.to_vec(),
        variant: Variant::Sea,
        attention: AttentionVariant::Alpha,
        attention_scope: AttentionScope::PerRelation,
        distance_power: DistancePower::Squared,
        prefactor: DistancePrefactor::TwoOverC,
    };
    let init = InitConfig { embedding_std: 0.3, ..Default::default() };
    let model = Model::init(config, kg.n_entities(), kg.n_relations(), &init, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let opts = EvalOptions::default();
    let reports = constituent_reports(&kg, &model, Split::Test, &opts).unwrap();
    assert_eq!(reports.iter().map(|r| r.0).collect::<Vec<_>>(), ModelKind::ALL.to_vec());
    let single = constituent_model(&model, ModelKind::DistMult).unwrap();
    let alphas = single.attention(0, 0);
    assert_eq!(alphas[2], 1.0);
    let csv = per_relation_csv(&evaluate(&kg, &model, Split::Test, &opts).unwrap(), &reports);
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("relation,count,mrr"));
    assert!(header.contains("DistMult_H@10"));
    assert_eq!(csv.lines().count(), 1 + kg.raw_relations());
}

proptest! {
    #[test]
    fn filtering_never_worsens_the_rank(
        scores in vec(-3i32..3, 2..12),
        truth_seed in 0usize..100,
        filter_seed in vec(any::<bool>(), 12),
    ) {
        let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
        let truth = truth_seed % scores.len();
        let filter: Vec<u32> = (0..scores.len() as u32)
            .filter(|&e| e as usize != truth && filter_seed[e as usize])
            .collect();
        let unfiltered = filtered_rank(&scores, truth, &[]);
        let filtered = filtered_rank(&scores, truth, &filter);
        prop_assert!(filtered <= unfiltered);
        prop_assert!(filtered >= 1);
        let ahead = scores.iter().enumerate().filter(|&(e, s)| e != truth && *s >= scores[truth]).count();
        prop_assert_eq!(unfiltered, ahead + 1);
    }
}
