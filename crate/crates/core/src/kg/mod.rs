//! Triple storage, vocabularies, reciprocal augmentation and the filter index.
//!
//! Entities and relations are interned in first-appearance order over the
//! train, valid and test splits, so reloading the same files always yields
//! the same ids.

mod synthetic;

pub use synthetic::{generate_synthetic, write_synthetic, PatternKind, RelationPattern, SyntheticSpec};

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TRAIN_FILE: &str = "train.txt";
pub const VALID_FILE: &str = "valid.txt";
pub const TEST_FILE: &str = "test.txt";

/// Suffix appended to a relation name to name its reciprocal.
pub const RECIPROCAL_SUFFIX: &str = "__reciprocal";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: u32,
    pub relation: u32,
    pub tail: u32,
}

impl Triple {
    pub fn new(head: u32, relation: u32, tail: u32) -> Self {
        Self { head, relation, tail }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidConfig(format!("unknown split `{other}`"))),
        }
    }
}

/// Bidirectional string <-> id map.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocab {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Known true tails per `(head, relation)` over every split.
#[derive(Debug, Clone, Default)]
pub struct FilterIndex {
    tails: HashMap<(u32, u32), Vec<u32>>,
}

impl FilterIndex {
    fn insert(&mut self, t: Triple) {
        let tails = self.tails.entry((t.head, t.relation)).or_default();
        if let Err(pos) = tails.binary_search(&t.tail) {
            tails.insert(pos, t.tail);
        }
    }

    /// Sorted true tails for the query, empty if none are known.
    pub fn tails(&self, head: u32, relation: u32) -> &[u32] {
        self.tails
            .get(&(head, relation))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn contains(&self, t: Triple) -> bool {
        self.tails(t.head, t.relation).binary_search(&t.tail).is_ok()
    }

    /// Number of distinct triples indexed.
    pub fn len(&self) -> usize {
        self.tails.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.tails.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    pub entities: Vocab,
    pub relations: Vocab,
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
    filter: FilterIndex,
    raw_relations: usize,
    augmented: bool,
}

/// A triple before integer coding.
pub type NamedTriple = (String, String, String);

impl KnowledgeGraph {
    /// Interns the named splits in train, valid, test order.
    pub fn from_named(
        train: &[NamedTriple],
        valid: &[NamedTriple],
        test: &[NamedTriple],
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyTrain);
        }
        let mut entities = Vocab::new();
        let mut relations = Vocab::new();
        let mut encode = |split: &[NamedTriple]| -> Vec<Triple> {
            split
                .iter()
                .map(|(h, r, t)| {
                    let head = entities.intern(h);
                    let relation = relations.intern(r);
                    let tail = entities.intern(t);
                    Triple { head, relation, tail }
                })
                .collect()
        };
        let train = encode(train);
        let valid = encode(valid);
        let test = encode(test);

        let mut filter = FilterIndex::default();
        for &t in train.iter().chain(&valid).chain(&test) {
            filter.insert(t);
        }
        let raw_relations = relations.len();
        Ok(Self {
            entities,
            relations,
            train,
            valid,
            test,
            filter,
            raw_relations,
            augmented: false,
        })
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    /// Relation count including reciprocals once augmented.
    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn raw_relations(&self) -> usize {
        self.raw_relations
    }

    pub fn is_augmented(&self) -> bool {
        self.augmented
    }

    pub fn filter(&self) -> &FilterIndex {
        &self.filter
    }

    pub fn split(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    /// Id of the reciprocal of `relation`. Only meaningful once augmented.
    pub fn reciprocal(&self, relation: u32) -> u32 {
        let raw = self.raw_relations as u32;
        if relation < raw {
            relation + raw
        } else {
            relation - raw
        }
    }

    /// Maps any relation id to its raw (non-reciprocal) id.
    pub fn raw_relation(&self, relation: u32) -> u32 {
        relation % self.raw_relations as u32
    }

    /// Adds `(t, r + R_raw, h)` for every train triple and extends the filter
    /// with the reciprocal of every known triple. Valid and test are left as is;
    /// head-side evaluation reaches them through the reciprocal ids.
    pub fn augment_reciprocal(mut self) -> Result<Self> {
        if self.augmented {
            return Err(Error::AlreadyAugmented);
        }
        let raw = self.raw_relations as u32;
        let names: Vec<String> = self.relations.names().to_vec();
        for name in &names {
            self.relations.intern(&format!("{name}{RECIPROCAL_SUFFIX}"));
        }
        debug_assert_eq!(self.relations.len(), 2 * self.raw_relations);

        let flip = |t: &Triple| Triple::new(t.tail, t.relation + raw, t.head);
        let reciprocal_train: Vec<Triple> = self.train.iter().map(flip).collect();
        let reciprocal_all: Vec<Triple> = self
            .train
            .iter()
            .chain(&self.valid)
            .chain(&self.test)
            .map(flip)
            .collect();
        self.train.extend(reciprocal_train);
        for t in reciprocal_all {
            self.filter.insert(t);
        }
        self.augmented = true;
        Ok(self)
    }

    /// Reads `train`, `valid` and `test` files (in that order) from `dir`.
    pub fn load_tsv(dir: &Path, files: [&str; 3]) -> Result<Self> {
        let [train, valid, test] = files.map(|name| read_triples(&dir.join(name)));
        Self::from_named(&train?, &valid?, &test?)
    }

    /// Loads `train.txt`, `valid.txt`, `test.txt` under `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        Self::load_tsv(dir, [TRAIN_FILE, VALID_FILE, TEST_FILE])
    }

    /// Writes the raw (non-reciprocal) splits as TSV under `dir`.
    pub fn write_tsv(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (split, file) in [
            (Split::Train, TRAIN_FILE),
            (Split::Valid, VALID_FILE),
            (Split::Test, TEST_FILE),
        ] {
            let mut out = BufWriter::new(fs::File::create(dir.join(file))?);
            for t in self.split(split) {
                if t.relation as usize >= self.raw_relations {
                    continue;
                }
                writeln!(
                    out,
                    "{}\t{}\t{}",
                    self.entity_name(t.head),
                    self.relation_name(t.relation),
                    self.entity_name(t.tail)
                )?;
            }
            out.flush()?;
        }
        Ok(())
    }

    pub fn entity_name(&self, id: u32) -> &str {
        self.entities.name(id).unwrap_or("<unknown>")
    }

    pub fn relation_name(&self, id: u32) -> &str {
        self.relations.name(id).unwrap_or("<unknown>")
    }

    /// Triples of `split` whose ids resolve inside the vocabularies.
    pub fn validate_split(&self, split: Split) -> Result<()> {
        let ne = self.n_entities() as u32;
        let nr = self.n_relations() as u32;
        for t in self.split(split) {
            if t.head >= ne || t.tail >= ne {
                return Err(Error::UnknownSymbol {
                    kind: "entity",
                    name: t.head.max(t.tail).to_string(),
                    split: split.name().to_owned(),
                });
            }
            if t.relation >= nr {
                return Err(Error::UnknownSymbol {
                    kind: "relation",
                    name: t.relation.to_string(),
                    split: split.name().to_owned(),
                });
            }
        }
        Ok(())
    }

    /// Codes named triples against the existing vocabularies.
    pub fn encode_named(&self, split: &str, triples: &[NamedTriple]) -> Result<Vec<Triple>> {
        let lookup = |vocab: &Vocab, kind: &'static str, name: &str| {
            vocab.id(name).ok_or_else(|| Error::UnknownSymbol {
                kind,
                name: name.to_owned(),
                split: split.to_owned(),
            })
        };
        triples
            .iter()
            .map(|(h, r, t)| {
                Ok(Triple::new(
                    lookup(&self.entities, "entity", h)?,
                    lookup(&self.relations, "relation", r)?,
                    lookup(&self.entities, "entity", t)?,
                ))
            })
            .collect()
    }
}

/// Parses one TSV triple file. Blank lines are skipped.
pub fn read_triples(path: &Path) -> Result<Vec<NamedTriple>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::MalformedLine {
                path: path.to_owned(),
                line: i + 1,
                found: fields.len(),
            });
        }
        out.push((
            fields[0].to_owned(),
            fields[1].to_owned(),
            fields[2].to_owned(),
        ));
    }
    Ok(out)
}
