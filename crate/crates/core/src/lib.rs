//! Topic signatures for word senses.
//!
//! The crate links every sense of a word in a WordNet-style lexicon to a
//! document collection, distils weighted topic signatures from those
//! collections, clusters the senses into binary hierarchies and uses both for
//! word-sense disambiguation, with a precision harness over a sense-tagged
//! corpus.
//!
//! Pipeline: [`lexicon`] → [`querygen`] → [`retrieval`] → [`signature`] →
//! [`cluster`] → [`wsd`] → [`evalharness`], orchestrated by [`pipeline`].

pub mod cluster;
pub mod error;
pub mod evalharness;
pub mod fsutil;
pub mod lexicon;
pub mod pipeline;
pub mod querygen;
pub mod retrieval;
pub mod signature;
pub mod stopwords;
pub mod synth;
pub mod wsd;

pub use error::{Error, Result};
