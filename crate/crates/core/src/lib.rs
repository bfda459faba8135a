//! Knowledge graph embeddings that combine the queries of several constituent
//! models (TransE, RotatE, DistMult, ComplEx, 2D reflection) through
//! relation-conditioned attention, scored either in Euclidean space or on the
//! Poincare ball.

pub mod combiner;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod kg;
pub mod model;
pub mod query;
pub mod training;

pub use error::{Error, Result};
pub use kg::{KnowledgeGraph, Split, Triple};
pub use model::{Model, ModelConfig, Variant};
pub use query::ModelKind;
