//! Extraction of primary site, lesion size and metastasis site from
//! semi-structured oncology imaging reports.

pub mod corpus;
mod error;

pub use error::{Error, Result};
pub mod crf;
pub mod graph;
pub mod encoders;
pub mod ensemble;
pub mod eval;
pub mod taggers;
pub mod mrc;
