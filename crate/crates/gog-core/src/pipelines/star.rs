//! Star/rose pipelines (placeholder during build-up).
use crate::cert::Certificate;
use crate::error::Result;
use crate::words::Word;
use super::PipelineOptions;

pub struct RoseInput { pub center_gens: Vec<String>, pub words: Vec<Word> }
pub enum CenterKind { FreeAbelian(Vec<String>), Free(Vec<String>) }
pub enum LeafKind { FreeAbelian(Vec<String>) }
pub struct Leaf { pub kind: LeafKind, pub alpha: Word, pub omega: Word }
pub struct StarInput { pub center: CenterKind, pub leaves: Vec<Leaf> }
pub struct Tree4Input { pub left: StarInput, pub right: StarInput, pub bridge_alpha: Word, pub bridge_omega: Word }

pub fn rose_pipeline(_i: &RoseInput, _t: &str, _o: &PipelineOptions) -> Result<Certificate> { unimplemented!() }
pub fn star_pipeline(_i: &StarInput, _t: &str, _o: &PipelineOptions) -> Result<Certificate> { unimplemented!() }
pub fn tree4_pipeline(_i: &Tree4Input, _t: &str, _o: &PipelineOptions) -> Result<Certificate> { unimplemented!() }
pub fn free_prop_pipeline(_n: usize, _t: &str, _o: &PipelineOptions) -> Result<Certificate> { unimplemented!() }
