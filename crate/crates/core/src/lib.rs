//! Information-regularized open-ended item response theory for student code.
//!
//! Each student gets a knowledge state made of a free vector plus
//! interpretable Gaussian and categorical factors; a small decoder generates
//! the student's code for a problem conditioned on that state, and an
//! auxiliary head recovers the factors from the code.

pub mod analysis;
pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod error;
pub mod generator;
pub mod knowledge;
pub mod lexer;
pub mod metrics;
pub mod nn;
pub mod objective;
pub mod run;
pub mod tokenizer;
pub mod trainer;

pub use error::{Error, Result};
