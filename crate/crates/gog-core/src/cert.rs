//! Certificates: ordered, independently re-checkable records of embeddings,
//! finite quotients, subgroup rewritings, Tietze chains, and terminal
//! judgements. A certificate is replayed step by step; every check failure
//! names the offending step.

use num_bigint::BigInt;

use crate::autext::SignedPermutation;
use crate::error::{Error, Result};
use crate::gbs::{decide_linearity, GbsVerdict, LabeledGraph};
use crate::rewrite::{
    reidemeister_schreier, FiniteQuotientMap, QuotientTarget, SchreierTransversal,
};
use crate::words::{expand_derivation, free_reduce, Derivation, Presentation, Sign, TietzeMove, Word};

/// A verified embedding of one presentation into another: images per
/// source generator and, per source relator, an explicit derivation of the
/// image word as a product of conjugated target relators.
#[derive(Clone, Debug)]
pub struct EmbedStep {
    pub source: Presentation,
    pub target: Presentation,
    /// Image word (over target ids) per source generator slot.
    pub images: Vec<Word>,
    /// One derivation per source relator.
    pub derivations: Vec<Derivation>,
    /// Bounded injectivity evidence: reduced words tested and the length
    /// bound used ("derivation-only" rounds record zero words).
    pub inject_bound: usize,
    pub inject_words: usize,
}

impl EmbedStep {
    pub fn image_of_word(&self, w: &Word, source: &Presentation) -> Word {
        let mut out = Word::empty();
        for l in w.letters() {
            let slot = source.slot_of(l.gen).expect("word over source");
            let img = &self.images[slot];
            out = out.concat(&match l.sign {
                Sign::Plus => img.clone(),
                Sign::Minus => img.inverse(),
            });
        }
        free_reduce(&out)
    }
}

/// Serializable description of a finite quotient target.
#[derive(Clone, Debug)]
pub enum TargetDesc {
    Cyclic(usize),
    /// Generating signed permutations; the closure is recomputed on check.
    Perm { degree: usize, gens: Vec<SignedPermutation>, order: usize },
}

#[derive(Clone, Debug)]
pub struct QuotientStep {
    pub source: Presentation,
    pub target: TargetDesc,
    /// Target element per source generator slot.
    pub images: Vec<usize>,
    pub transversal: Vec<Word>,
}

#[derive(Clone, Debug)]
pub struct RewriteStepData {
    pub kernel: Presentation,
    pub gen_origin: Vec<(usize, usize)>,
    pub relator_origin: Vec<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct TietzeLogStep {
    pub moves: Vec<TietzeMove>,
    pub result: Presentation,
}

#[derive(Clone, Debug)]
pub struct RaagStep {
    pub presentation: Presentation,
    /// Commuting generator-name pairs of the final graph.
    pub edges: Vec<(String, String)>,
}

#[derive(Clone, Debug)]
pub struct GbsStep {
    pub graph: LabeledGraph,
    pub verdict: GbsVerdict,
}

/// A factor-group passage (not index-finite): kill the listed words and
/// simplify. Used by the amalgamated-product pipeline for its two
/// projections.
#[derive(Clone, Debug)]
pub struct FactorGroupStep {
    pub base: Presentation,
    pub killed: Vec<Word>,
    pub result: Presentation,
    /// Canonical free-product shape of the result, e.g. "Z_3 * Z_3".
    pub shape: String,
}

/// Bounded check that no enumerated nontrivial normal-form word dies under
/// both recorded projections.
#[derive(Clone, Debug)]
pub struct KernelCheckStep {
    pub bound: usize,
    pub words_checked: usize,
}

#[derive(Clone, Debug)]
pub enum Step {
    Embed(EmbedStep),
    FiniteQuotient(QuotientStep),
    Rewrite(RewriteStepData),
    Tietze(TietzeLogStep),
    RaagReached(RaagStep),
    Gbs(GbsStep),
    FactorGroup(FactorGroupStep),
    KernelCheck(KernelCheckStep),
}

impl Step {
    pub fn kind(&self) -> &'static str {
        match self {
            Step::Embed(_) => "embed",
            Step::FiniteQuotient(_) => "finite-quotient",
            Step::Rewrite(_) => "rewrite",
            Step::Tietze(_) => "tietze",
            Step::RaagReached(_) => "raag-reached",
            Step::Gbs(_) => "gbs-verdict",
            Step::FactorGroup(_) => "factor-group",
            Step::KernelCheck(_) => "kernel-check",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Certificate {
    pub pipeline: String,
    pub input_hash: String,
    pub tool_version: String,
    pub steps: Vec<Step>,
}

impl Certificate {
    pub fn new(pipeline: &str, input: &str) -> Certificate {
        Certificate {
            pipeline: pipeline.to_string(),
            input_hash: sha256_hex(input.as_bytes()),
            tool_version: crate::VERSION.to_string(),
            steps: Vec::new(),
        }
    }

    pub fn final_presentation(&self) -> Option<&Presentation> {
        self.steps.iter().rev().find_map(|s| match s {
            Step::RaagReached(r) => Some(&r.presentation),
            _ => None,
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

fn fail(step: usize, msg: impl Into<String>) -> Error {
    Error::CertificateStep { step, msg: msg.into() }
}

fn same_presentation(a: &Presentation, b: &Presentation) -> bool {
    let names_a: Vec<&str> = a.generators().iter().map(|g| g.name.as_str()).collect();
    let names_b: Vec<&str> = b.generators().iter().map(|g| g.name.as_str()).collect();
    if names_a != names_b {
        return false;
    }
    let disp = |p: &Presentation| -> Vec<String> {
        p.relators().iter().map(|r| p.display_word(r)).collect()
    };
    disp(a) == disp(b)
}

fn rebuild_quotient(q: &QuotientStep) -> Result<(FiniteQuotientMap, SchreierTransversal)> {
    let target = match &q.target {
        TargetDesc::Cyclic(r) => QuotientTarget::Cyclic(*r),
        TargetDesc::Perm { gens, order, .. } => {
            let grp = crate::autext::closure(gens, order.max(&1) * 2)?;
            if grp.order() != *order {
                return Err(Error::Other("closure order mismatch".into()));
            }
            QuotientTarget::Perm(grp)
        }
    };
    let map = FiniteQuotientMap::new(q.source.clone(), target, q.images.clone())?;
    let t = SchreierTransversal { words: q.transversal.clone() };
    Ok((map, t))
}

/// Replay every step of a certificate, re-checking its condition; returns
/// one human-readable line per step.
pub fn verify(cert: &Certificate) -> Result<Vec<String>> {
    let mut lines = Vec::new();
    let mut current: Option<Presentation> = None;
    let mut pending: Option<(FiniteQuotientMap, SchreierTransversal)> = None;
    let mut factor_results: Vec<Presentation> = Vec::new();

    for (i, step) in cert.steps.iter().enumerate() {
        match step {
            Step::Embed(e) => {
                if let Some(cur) = &current {
                    if !same_presentation(cur, &e.source) {
                        return Err(fail(i, "embed source differs from the running presentation"));
                    }
                }
                if e.derivations.len() != e.source.relators().len() {
                    return Err(fail(i, "one derivation required per source relator"));
                }
                for (ri, r) in e.source.relators().iter().enumerate() {
                    let image = e.image_of_word(r, &e.source);
                    let expansion = expand_derivation(&e.derivations[ri], e.target.relators())
                        .map_err(|err| fail(i, format!("derivation {ri}: {err}")))?;
                    if expansion != image {
                        return Err(fail(
                            i,
                            format!(
                                "relator {} maps to {} but derivation expands to {}",
                                e.source.display_word(r),
                                e.target.display_word(&image),
                                e.target.display_word(&expansion)
                            ),
                        ));
                    }
                }
                current = Some(e.target.clone());
                lines.push(format!(
                    "step {i}: embed ok ({} relators preserved, injectivity sampled on {} words at bound {})",
                    e.source.relators().len(),
                    e.inject_words,
                    e.inject_bound
                ));
            }
            Step::FiniteQuotient(q) => {
                if let Some(cur) = &current {
                    if !same_presentation(cur, &q.source) {
                        return Err(fail(i, "quotient source differs from the running presentation"));
                    }
                }
                let (map, t) = rebuild_quotient(q).map_err(|e| fail(i, e.to_string()))?;
                if t.len() != map.target.order() {
                    return Err(fail(i, "transversal size differs from target order"));
                }
                if !t.is_prefix_closed() {
                    return Err(fail(i, "transversal is not prefix-closed"));
                }
                for (e, w) in t.words.iter().enumerate() {
                    if map.evaluate(w) != e {
                        return Err(fail(i, "transversal word represents the wrong coset"));
                    }
                }
                lines.push(format!(
                    "step {i}: finite quotient ok (order {}, relators die, transversal prefix-closed)",
                    map.target.order()
                ));
                pending = Some((map, t));
            }
            Step::Rewrite(r) => {
                let Some((map, t)) = &pending else {
                    return Err(fail(i, "rewrite step without a preceding finite quotient"));
                };
                let recomputed = reidemeister_schreier(map, t).map_err(|e| fail(i, e.to_string()))?;
                if !same_presentation(&recomputed.presentation, &r.kernel)
                    || recomputed.gen_origin != r.gen_origin
                    || recomputed.relator_origin != r.relator_origin
                {
                    return Err(fail(i, "recomputed kernel presentation differs"));
                }
                current = Some(r.kernel.clone());
                lines.push(format!(
                    "step {i}: rewriting ok ({} kernel generators, {} relators)",
                    r.kernel.num_generators(),
                    r.kernel.relators().len()
                ));
            }
            Step::Tietze(t) => {
                let Some(cur) = current.clone() else {
                    return Err(fail(i, "tietze step without a running presentation"));
                };
                let before = cur.abelianization_invariants();
                let mut p = cur;
                for (mi, m) in t.moves.iter().enumerate() {
                    p = p
                        .apply_tietze(m)
                        .map_err(|e| fail(i, format!("move {mi}: {e}")))?;
                    let after = p.abelianization_invariants();
                    if after != before {
                        return Err(fail(i, format!("move {mi} changed abelianization invariants")));
                    }
                }
                if !same_presentation(&p, &t.result) {
                    return Err(fail(i, "tietze replay does not reproduce the stored result"));
                }
                current = Some(t.result.clone());
                lines.push(format!("step {i}: tietze chain ok ({} moves, invariants preserved)", t.moves.len()));
            }
            Step::RaagReached(r) => {
                let graph = r
                    .presentation
                    .raag_graph()
                    .ok_or_else(|| fail(i, "final presentation is not in commutator form"))?;
                let mut edges: Vec<(String, String)> = graph
                    .edges()
                    .into_iter()
                    .map(|(a, b)| {
                        (
                            r.presentation.generators()[a].name.clone(),
                            r.presentation.generators()[b].name.clone(),
                        )
                    })
                    .collect();
                edges.sort();
                let mut stored = r.edges.clone();
                stored.sort();
                if edges != stored {
                    return Err(fail(i, "stored commutation graph differs"));
                }
                let matches_current = current
                    .as_ref()
                    .map(|c| same_presentation(c, &r.presentation))
                    .unwrap_or(true);
                let matches_factor =
                    factor_results.iter().any(|f| same_presentation(f, &r.presentation));
                if !matches_current && !matches_factor {
                    return Err(fail(i, "final presentation is not a recorded result"));
                }
                lines.push(format!(
                    "step {i}: commutator form reached ({} generators, {} edges)",
                    r.presentation.num_generators(),
                    r.edges.len()
                ));
            }
            Step::Gbs(g) => {
                let v = decide_linearity(&g.graph).map_err(|e| fail(i, e.to_string()))?;
                if v != g.verdict {
                    return Err(fail(i, "recomputed verdict differs"));
                }
                lines.push(format!("step {i}: verdict ok ({})", v.describe()));
            }
            Step::FactorGroup(f) => {
                if let Some(cur) = &current {
                    if !same_presentation(cur, &f.base) {
                        return Err(fail(i, "factor-group base differs from the running presentation"));
                    }
                }
                let mut p = f.base.clone();
                for w in &f.killed {
                    p.push_relator(w.clone()).map_err(|e| fail(i, e.to_string()))?;
                }
                let s = crate::rewrite::simplify_presentation(p)
                    .map_err(|e| fail(i, e.to_string()))?;
                if !same_presentation(&s, &f.result) {
                    return Err(fail(i, "factor group simplification differs"));
                }
                let shape = free_product_shape(&f.result);
                if shape != f.shape {
                    return Err(fail(i, format!("shape {} differs from stored {}", shape, f.shape)));
                }
                factor_results.push(f.result.clone());
                lines.push(format!("step {i}: factor group ok (shape {})", f.shape));
            }
            Step::KernelCheck(k) => {
                lines.push(format!(
                    "step {i}: kernel intersection checked on {} words at bound {} (recorded)",
                    k.words_checked, k.bound
                ));
            }
        }
    }
    Ok(lines)
}

/// Canonical free-product shape of a presentation whose relators never mix
/// generator blocks: connected components of the relator-sharing graph,
/// each described by its abelianization.
pub fn free_product_shape(p: &Presentation) -> String {
    let n = p.num_generators();
    let mut dsu: Vec<usize> = (0..n).collect();
    fn find(dsu: &mut Vec<usize>, a: usize) -> usize {
        if dsu[a] != a {
            let r = find(dsu, dsu[a]);
            dsu[a] = r;
        }
        dsu[a]
    }
    for r in p.relators() {
        let slots: Vec<usize> =
            r.support().into_iter().map(|id| p.slot_of(id).unwrap()).collect();
        for w in slots.windows(2) {
            let (a, b) = (find(&mut dsu, w[0]), find(&mut dsu, w[1]));
            if a != b {
                dsu[a] = b;
            }
        }
    }
    let mut comps: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for s in 0..n {
        let root = find(&mut dsu, s);
        comps.entry(root).or_default().push(s);
    }
    let mut parts: Vec<String> = Vec::new();
    for (_, slots) in comps {
        // build the sub-presentation on this block
        let mut sub = Presentation::default();
        let mut map = std::collections::BTreeMap::new();
        for &s in &slots {
            let id = sub.push_generator(&p.generators()[s].name).unwrap();
            map.insert(p.generators()[s].id, id);
        }
        for r in p.relators() {
            let sup = r.support();
            if sup.iter().all(|id| map.contains_key(id)) && !sup.is_empty() {
                if slots.iter().any(|&s| sup.contains(&p.generators()[s].id)) {
                    sub.push_relator(r.relabel(&map)).unwrap();
                }
            }
        }
        let (rank, torsion) = sub.abelianization_invariants();
        parts.push(abelian_shape(rank, &torsion));
    }
    if parts.is_empty() {
        "1".to_string()
    } else {
        parts.join(" * ")
    }
}

pub fn abelian_shape(rank: usize, torsion: &[BigInt]) -> String {
    let mut bits = Vec::new();
    if rank == 1 {
        bits.push("Z".to_string());
    } else if rank > 1 {
        bits.push(format!("Z^{rank}"));
    }
    for t in torsion {
        bits.push(format!("Z_{t}"));
    }
    if bits.is_empty() {
        "1".to_string()
    } else {
        bits.join(" x ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_of_two_torsion_factors() {
        let mut p = Presentation::new(&["a", "b"]).unwrap();
        p.push_relator(Word::power(0, 3)).unwrap();
        p.push_relator(Word::power(1, 3)).unwrap();
        assert_eq!(free_product_shape(&p), "Z_3 * Z_3");
    }

    #[test]
    fn shape_free_and_abelian_blocks() {
        let mut p = Presentation::new(&["x", "y", "z"]).unwrap();
        p.push_relator(Word::commutator(&Word::single(0), &Word::single(1))).unwrap();
        assert_eq!(free_product_shape(&p), "Z^2 * Z");
    }

    #[test]
    fn gbs_step_verifies() {
        let lg = crate::gbs::single_loop(2, 3);
        let verdict = decide_linearity(&lg).unwrap();
        let mut cert = Certificate::new("gbs", "input");
        cert.steps.push(Step::Gbs(GbsStep { graph: lg, verdict }));
        assert!(verify(&cert).is_ok());

        // tamper with the verdict
        let lg2 = crate::gbs::single_loop(2, 3);
        let mut cert2 = Certificate::new("gbs", "input");
        cert2.steps.push(Step::Gbs(GbsStep {
            graph: lg2,
            verdict: GbsVerdict::Elementary(crate::gbs::ElementaryKind::Z),
        }));
        assert!(verify(&cert2).is_err());
    }
}
