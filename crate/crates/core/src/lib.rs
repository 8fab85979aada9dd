//! Multilingual answer retrieval: probabilistic query translation, lexical
//! similarity features, ensemble max-ent ranking and list merging.

pub mod classifier;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod merge;
pub mod pipeline;
pub mod representation;
pub mod selection;
pub mod simplify;
pub mod synthetic;
pub mod translation;

pub use corpus::{Candidate, Corpus, Judgment, Language, Question};
pub use error::{Error, Result};
