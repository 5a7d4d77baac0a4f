//! Basis change (placeholder during build-up).
use crate::error::Result;
use crate::words::{Presentation, TietzeMove};

pub fn change_abelian_basis(_p: &Presentation, _block: &[usize], _m: &[Vec<num_bigint::BigInt>]) -> Result<Vec<TietzeMove>> {
    unimplemented!()
}
