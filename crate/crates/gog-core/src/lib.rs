//! Symbolic computation over finitely presented groups arranged in graphs of
//! groups: free and cyclic reduction, recorded Tietze transformations,
//! abelianization via Smith normal form, labeled-graph linearity decisions,
//! signed permutation closures, Reidemeister-Schreier rewriting, right-angled
//! Artin normal forms with Britton reduction, and certificate-emitting
//! pipelines that descend to right-angled Artin presentations.

pub mod autext;
pub mod cert;
pub mod error;
pub mod gbs;
pub mod graphs;
pub mod io;
pub mod normalform;
pub mod pipelines;
pub mod rewrite;
pub mod snf;
pub mod words;

pub use error::{Error, Result};
pub use words::{Generator, Letter, Presentation, Sign, TietzeMove, Word};

/// Tool version stamped into certificates.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
