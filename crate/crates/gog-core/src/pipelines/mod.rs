//! End-to-end constructions: embeddings of HNN-style presentations into
//! ambient groups, finite-index descent through Reidemeister-Schreier
//! rewriting, chain introduction turning word conjugations into
//! letter permutations, star/tree assembly, and the amalgamated-product
//! route. Every pipeline emits a re-checkable [`Certificate`].

mod amalgam;
mod basis;
mod chains;
mod derive;
mod ladder;
mod star;

pub use amalgam::{amalgam_pipeline, AmalgamInput};
pub use basis::change_abelian_basis;
pub use chains::power_commutator_pipeline;
pub use ladder::{
    finite_closure_pipeline, raag_stable_pipeline, Level,
};
pub use star::{
    free_prop_pipeline, rose_pipeline, star_pipeline, tree4_pipeline, CenterKind, Leaf, LeafKind,
    RoseInput, StarInput, Tree4Input,
};

use crate::error::{Error, Result};
use crate::snf;
use num_bigint::BigInt;

/// Extend a primitive exponent vector to a unimodular integer matrix with
/// that first row.
pub fn primitive_extend(v: &[i64]) -> Result<Vec<Vec<BigInt>>> {
    if v.is_empty() || v.iter().all(|&x| x == 0) {
        return Err(Error::NotPrimitive("0".into()));
    }
    snf::primitive_extend(v).map_err(|g| Error::NotPrimitive(g.to_string()))
}

/// Options shared by the pipelines.
#[derive(Clone, Copy, Debug)]
pub struct PipelineOptions {
    /// Cap for closure sizes and automorphism orders.
    pub bound: usize,
    /// Word-length bound for injectivity sampling.
    pub inject_check_len: usize,
    /// Seed for the deterministic samplers.
    pub seed: u64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions { bound: 10_000, inject_check_len: 4, seed: 0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::{One, Signed};

    #[test]
    fn primitive_extend_examples() {
        let id = primitive_extend(&[1, 0, 0]).unwrap();
        assert_eq!(id, crate::snf::identity(3));
        let m = primitive_extend(&[2, 3]).unwrap();
        assert_eq!(m[0], vec![BigInt::from(2), BigInt::from(3)]);
        assert_eq!(crate::snf::determinant(&m).abs(), BigInt::one());
        assert!(matches!(primitive_extend(&[2, 4]), Err(Error::NotPrimitive(_))));
    }
}
