//! Amalgam pipeline (placeholder during build-up).
use crate::cert::Certificate;
use crate::error::Result;
use super::PipelineOptions;

pub struct AmalgamInput { pub rank1: usize, pub rank2: usize, pub shared: usize, pub exps_n: Vec<u64>, pub exps_m: Vec<u64> }
pub fn amalgam_pipeline(_i: &AmalgamInput, _t: &str, _o: &PipelineOptions) -> Result<Certificate> { unimplemented!() }
