//! APL to C# migration toolkit.
//!
//! The crate bundles a glyph-aware APL lexer, a type-header parser that
//! renders C# signatures, a 1-origin APL subset interpreter used as a test
//! oracle, dataset handling, model backends, retrieval, translation
//! strategies and a compile-and-execute runner.

pub mod backends;
pub mod config;
pub mod dataset;
pub mod eval;
pub mod header;
pub mod lexer;
pub mod par;
pub mod pipeline;
pub mod retrieval;
pub mod runner;
pub mod strategies;
