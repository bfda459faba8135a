//! Seeded generator for small graphs with declared relational patterns.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{KnowledgeGraph, NamedTriple};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_entities: usize,
    pub relations: Vec<RelationPattern>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationPattern {
    /// Base relation name; defaults to `<kind><index>`.
    #[serde(default)]
    pub name: Option<String>,
    pub pattern: PatternKind,
}

/// Size parameters per pattern.
///
/// `groups` (symmetric, antisymmetric) partitions the entities into that many
/// shuffled groups. Symmetric pairs are then drawn between groups `2k` and
/// `2k+1`; antisymmetric edges go from group `k` to group `k+1`. With
/// `groups <= 1` pairs are drawn uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PatternKind {
    Symmetric {
        pairs: usize,
        #[serde(default)]
        groups: usize,
    },
    Antisymmetric {
        edges: usize,
        #[serde(default)]
        groups: usize,
    },
    /// Emits `<name>_a` and `<name>_b` with `(h, a, t) <=> (t, b, h)`.
    InversePair { pairs: usize },
    /// Emits `<name>_1`, `<name>_2` with `edges` random edges each, and
    /// `<name>_12` holding their full composition.
    CompositionTriple { edges: usize },
    /// Complete tree with edges oriented child -> parent. With
    /// `ancestor_closure` a second relation `<name>_ancestor` holds the
    /// transitive closure.
    HierarchyTree {
        branching: usize,
        depth: usize,
        #[serde(default)]
        ancestor_closure: bool,
    },
}

impl PatternKind {
    fn label(&self) -> &'static str {
        match self {
            PatternKind::Symmetric { .. } => "symmetric",
            PatternKind::Antisymmetric { .. } => "antisymmetric",
            PatternKind::InversePair { .. } => "inverse",
            PatternKind::CompositionTriple { .. } => "composition",
            PatternKind::HierarchyTree { .. } => "hierarchy",
        }
    }
}

/// Number of nodes of a complete tree with `depth` levels below the root.
pub(crate) fn tree_nodes(branching: usize, depth: usize) -> Option<usize> {
    let mut total: usize = 0;
    let mut level: usize = 1;
    for _ in 0..=depth {
        total = total.checked_add(level)?;
        level = level.checked_mul(branching)?;
    }
    Some(total)
}

/// A relation's triples grouped into split units; a unit is never divided.
struct RelationUnits {
    name: String,
    units: Vec<Vec<(u32, u32)>>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidSynthetic(msg.into())
}

fn groups_of(n: usize, groups: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut group = vec![0; n];
    for (i, &e) in perm.iter().enumerate() {
        group[e] = i % groups.max(1);
    }
    group
}

fn pick<T: Copy>(candidates: &[T], amount: usize, what: &str, rng: &mut ChaCha8Rng) -> Result<Vec<T>> {
    if amount > candidates.len() {
        return Err(invalid(format!(
            "{what}: requested {amount} but only {} are available",
            candidates.len()
        )));
    }
    let mut chosen: Vec<usize> = index::sample(rng, candidates.len(), amount).into_vec();
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| candidates[i]).collect())
}

fn build_units(
    n: usize,
    idx: usize,
    rel: &RelationPattern,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<RelationUnits>> {
    let base = rel
        .name
        .clone()
        .unwrap_or_else(|| format!("{}{idx}", rel.pattern.label()));
    let n32 = n as u32;
    let singles = |pairs: Vec<(u32, u32)>| pairs.into_iter().map(|p| vec![p]).collect::<Vec<_>>();

    let out = match rel.pattern {
        PatternKind::Symmetric { pairs, groups } => {
            if pairs > n * n {
                return Err(invalid("symmetric pair count exceeds n_entities^2"));
            }
            let candidates: Vec<(u32, u32)> = if groups >= 2 {
                let g = groups_of(n, groups, rng);
                (0..n32)
                    .flat_map(|a| (0..n32).map(move |b| (a, b)))
                    .filter(|&(a, b)| {
                        let (ga, gb) = (g[a as usize], g[b as usize]);
                        ga % 2 == 0 && gb == ga + 1
                    })
                    .collect()
            } else {
                (0..n32)
                    .flat_map(|a| (a + 1..n32).map(move |b| (a, b)))
                    .collect()
            };
            let chosen = pick(&candidates, pairs, "symmetric pairs", rng)?;
            let units = chosen.into_iter().map(|(a, b)| vec![(a, b), (b, a)]).collect();
            vec![RelationUnits { name: base, units }]
        }
        PatternKind::Antisymmetric { edges, groups } => {
            if edges > n * n {
                return Err(invalid("antisymmetric edge count exceeds n_entities^2"));
            }
            let candidates: Vec<(u32, u32)> = if groups >= 2 {
                let g = groups_of(n, groups, rng);
                (0..n32)
                    .flat_map(|a| (0..n32).map(move |b| (a, b)))
                    .filter(|&(a, b)| g[b as usize] == g[a as usize] + 1)
                    .collect()
            } else {
                (0..n32)
                    .flat_map(|a| (a + 1..n32).map(move |b| (a, b)))
                    .collect()
            };
            let mut chosen = pick(&candidates, edges, "antisymmetric edges", rng)?;
            if groups < 2 {
                use rand::Rng;
                for e in chosen.iter_mut() {
                    if rng.random_bool(0.5) {
                        *e = (e.1, e.0);
                    }
                }
            }
            vec![RelationUnits { name: base, units: singles(chosen) }]
        }
        PatternKind::InversePair { pairs } => {
            if pairs > n * n {
                return Err(invalid("inverse pair count exceeds n_entities^2"));
            }
            let candidates: Vec<(u32, u32)> = (0..n32)
                .flat_map(|a| (0..n32).filter(move |&b| b != a).map(move |b| (a, b)))
                .collect();
            let chosen = pick(&candidates, pairs, "inverse pairs", rng)?;
            let reversed = chosen.iter().map(|&(a, b)| (b, a)).collect();
            vec![
                RelationUnits { name: format!("{base}_a"), units: singles(chosen) },
                RelationUnits { name: format!("{base}_b"), units: singles(reversed) },
            ]
        }
        PatternKind::CompositionTriple { edges } => {
            if edges > n * n {
                return Err(invalid("composition edge count exceeds n_entities^2"));
            }
            let candidates: Vec<(u32, u32)> = (0..n32)
                .flat_map(|a| (0..n32).filter(move |&b| b != a).map(move |b| (a, b)))
                .collect();
            let first = pick(&candidates, edges, "composition edges", rng)?;
            let second = pick(&candidates, edges, "composition edges", rng)?;
            let composed: BTreeSet<(u32, u32)> = first
                .iter()
                .flat_map(|&(a, b)| {
                    second
                        .iter()
                        .filter(move |&&(b2, _)| b2 == b)
                        .map(move |&(_, c)| (a, c))
                })
                .collect();
            vec![
                RelationUnits { name: format!("{base}_1"), units: singles(first) },
                RelationUnits { name: format!("{base}_2"), units: singles(second) },
                RelationUnits {
                    name: format!("{base}_12"),
                    units: singles(composed.into_iter().collect()),
                },
            ]
        }
        PatternKind::HierarchyTree { branching, depth, ancestor_closure } => {
            if branching == 0 {
                return Err(invalid("hierarchy branching must be positive"));
            }
            let nodes = tree_nodes(branching, depth)
                .filter(|&k| k <= n)
                .ok_or_else(|| invalid("hierarchy tree has more nodes than entities"))?;
            let mut perm: Vec<u32> = (0..n32).collect();
            perm.shuffle(rng);
            let entity = |node: usize| perm[node];
            let parent = |node: usize| (node - 1) / branching;
            let edges: Vec<(u32, u32)> = (1..nodes).map(|c| (entity(c), entity(parent(c)))).collect();
            let mut out = vec![RelationUnits { name: base.clone(), units: singles(edges) }];
            if ancestor_closure {
                let mut closure = Vec::new();
                for c in 1..nodes {
                    let mut a = c;
                    while a != 0 {
                        a = parent(a);
                        closure.push((entity(c), entity(a)));
                    }
                }
                out.push(RelationUnits { name: format!("{base}_ancestor"), units: singles(closure) });
            }
            out
        }
    };
    for r in &out {
        if r.units.is_empty() {
            return Err(invalid(format!("relation `{}` has no triples", r.name)));
        }
    }
    Ok(out)
}

/// Builds the graph described by `spec`. Each relation is split 80/10/10 on
/// its own; symmetric pairs move between splits together.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<KnowledgeGraph> {
    let n = spec.n_entities;
    if n < 2 {
        return Err(invalid("n_entities must be at least 2"));
    }
    if spec.relations.is_empty() {
        return Err(invalid("at least one relation pattern is required"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut relations = Vec::new();
    let mut seen = HashSet::new();
    for (idx, rel) in spec.relations.iter().enumerate() {
        for r in build_units(n, idx, rel, &mut rng)? {
            if !seen.insert(r.name.clone()) {
                return Err(invalid(format!("duplicate relation name `{}`", r.name)));
            }
            relations.push(r);
        }
    }

    let name = |e: u32| format!("e{e}");
    let mut splits: [Vec<NamedTriple>; 3] = Default::default();
    for mut rel in relations {
        rel.units.shuffle(&mut rng);
        let total = rel.units.len();
        let n_test = total / 10;
        let n_valid = total / 10;
        let n_train = total - n_test - n_valid;
        for (i, unit) in rel.units.iter().enumerate() {
            let split = if i < n_train {
                0
            } else if i < n_train + n_valid {
                1
            } else {
                2
            };
            for &(h, t) in unit {
                splits[split].push((name(h), rel.name.clone(), name(t)));
            }
        }
    }
    let [train, valid, test] = splits;
    KnowledgeGraph::from_named(&train, &valid, &test)
}

/// Writes the generated graph as TSV splits plus `spec.json`.
pub fn write_synthetic(spec: &SyntheticSpec, dir: &Path) -> Result<KnowledgeGraph> {
    let kg = generate_synthetic(spec)?;
    kg.write_tsv(dir)?;
    fs::write(dir.join("spec.json"), serde_json::to_string_pretty(spec)?)?;
    Ok(kg)
}
