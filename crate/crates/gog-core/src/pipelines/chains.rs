//! Chain introduction: a relator w x w^-1 x^-1 conjugating a generator by a
//! word is replaced, one letter at a time, by definitional chain generators
//! and a single-letter conjugation relation. Every move carries its
//! derivation. Includes the finite-index route for the two-generator
//! power-commutator groups.

use crate::autext::SignedPermutation;
use crate::cert::{Certificate, QuotientStep, RewriteStepData, Step, TargetDesc, TietzeLogStep};
use crate::error::{Error, Result};
use crate::rewrite::{
    reidemeister_schreier, schreier_transversal, simplify, FiniteQuotientMap, QuotientTarget,
};
use crate::words::{
    free_reduce, DerivationFactor, Presentation, Sign, TietzeMove, Word,
};

use super::ladder::{finite_closure_steps, Level};
use super::PipelineOptions;

/// Replace the relator at `idx` (which must be exactly `w x w^-1 x^-1` with
/// `x` a single positive letter and `|w| >= 2`) by chain generators named
/// from `names` (length `|w| - 1`) and the final single-letter conjugation
/// relation. Returns the transformed presentation; the relator keeps its
/// index and ends as `l1 c l1^-1 x^-1`.
pub fn chain_conjugation(
    p: &Presentation,
    idx: usize,
    names: &[String],
) -> Result<Presentation> {
    let r = p.relators()[idx].clone();
    let total = r.len();
    if total < 6 || total % 2 != 0 {
        return Err(Error::Other("relator is not a long conjugation".into()));
    }
    let half = (total - 2) / 2;
    let w = Word::from_letters(r.letters()[..half].to_vec());
    let x = r.letters()[half];
    let back = Word::from_letters(r.letters()[half + 1..total - 1].to_vec());
    if back != w.inverse() || r.letters()[total - 1] != x.inverse() || x.sign != Sign::Plus {
        return Err(Error::Other(format!(
            "relator {} is not of the form w x w^-1 x^-1",
            p.display_word(&r)
        )));
    }
    let len = w.len();
    if names.len() != len - 1 {
        return Err(Error::Other("one chain name required per inner letter".into()));
    }
    let mut cur = p.clone();
    let mut prev = Word::letter(x);
    for (j, name) in names.iter().enumerate() {
        // c_j := l_{len-j} prev l_{len-j}^-1
        let l = w.letters()[len - 1 - j];
        let definition = Word::letter(l).concat(&prev).concat(&Word::letter(l.inverse()));
        cur = cur.apply_tietze(&TietzeMove::AddGenerator {
            name: name.clone(),
            definition: definition.clone(),
        })?;
        let c = cur.id_by_name(name).expect("just added");
        let def_idx = cur.relators().len() - 1;
        // substitute the subword l prev l^-1 at position len-1-j by c
        let old = free_reduce(&definition);
        cur = cur.apply_tietze(&TietzeMove::SubstituteInRelator {
            index: idx,
            at: len - 1 - j,
            old,
            new: Word::single(c),
            justification: vec![DerivationFactor {
                relator: def_idx,
                inverted: true,
                conjugator: Word::empty(),
            }],
        })?;
        prev = Word::single(c);
    }
    Ok(cur)
}

/// Replace the relator at `idx` by an equivalent spelling (a rotation of it
/// or of its inverse): adds the new form with its derivation, then removes
/// the old one. The new relator lands at the end of the list.
pub fn reorient_relator(p: &Presentation, idx: usize, new_form: &Word) -> Result<Presentation> {
    let new_form = free_reduce(new_form);
    let (conj, inverted) = locate_as_conjugate(&p.relators()[idx], &new_form)
        .ok_or_else(|| Error::Other("new form is not a conjugate of the relator".into()))?;
    let mut cur = p.apply_tietze(&TietzeMove::AddRelator {
        word: new_form.clone(),
        derivation: vec![DerivationFactor { relator: idx, inverted, conjugator: conj }],
    })?;
    // remove the old relator, derived from the new one at the last index
    let new_idx = cur.relators().len() - 1;
    let (conj_back, inv_back) = locate_as_conjugate(&cur.relators()[new_idx], &cur.relators()[idx])
        .expect("inverse reorientation exists");
    cur = cur.apply_tietze(&TietzeMove::RemoveRelator {
        index: idx,
        derivation: vec![DerivationFactor {
            relator: new_idx,
            inverted: inv_back,
            conjugator: conj_back,
        }],
    })?;
    Ok(cur)
}

/// Find (conjugator, inverted) with conj * r^(+-1) * conj^-1 = target, for
/// target a rotation of r or of its inverse.
fn locate_as_conjugate(r: &Word, target: &Word) -> Option<(Word, bool)> {
    for k in 0..r.len().max(1) {
        let prefix = Word::from_letters(r.letters()[..k].to_vec());
        if free_reduce(&r.rotated(k)) == *target {
            return Some((prefix.inverse(), false));
        }
        let inv = r.inverse();
        let prefix_inv = Word::from_letters(inv.letters()[..k.min(inv.len())].to_vec());
        if free_reduce(&inv.rotated(k)) == *target {
            return Some((prefix_inv.inverse(), true));
        }
    }
    None
}

/// The full route for G = < x, y | [x^n, y^m] >: pass to the index-n
/// subgroup counted by x, rewrite, introduce chains, and finish with the
/// one-shot finite-closure descent.
pub fn power_commutator_pipeline(
    n: usize,
    m: usize,
    input_text: &str,
    opts: &PipelineOptions,
) -> Result<Certificate> {
    if n < 1 || m < 1 {
        return Err(Error::InvalidRanks("exponents must be positive".into()));
    }
    let mut cert = Certificate::new("lemma2", input_text);

    let mut g = Presentation::new(&["x", "y"]).unwrap();
    let x = g.id_by_name("x").unwrap();
    let y = g.id_by_name("y").unwrap();
    g.push_relator(Word::commutator(&Word::power(x, n as i64), &Word::power(y, m as i64)))?;

    // index-n pass counted by x
    let images = vec![1 % n, 0];
    let q = FiniteQuotientMap::new(g.clone(), QuotientTarget::Cyclic(n), images.clone())?;
    let t = schreier_transversal(&q)?;
    cert.steps.push(Step::FiniteQuotient(QuotientStep {
        source: g.clone(),
        target: TargetDesc::Cyclic(n),
        images,
        transversal: t.words.clone(),
    }));
    let kernel = reidemeister_schreier(&q, &t)?;
    cert.steps.push(Step::Rewrite(RewriteStepData {
        kernel: kernel.presentation.clone(),
        gen_origin: kernel.gen_origin.clone(),
        relator_origin: kernel.relator_origin.clone(),
    }));
    let mut sub = simplify(&kernel)?;

    // the kernel presents < z, w_0..w_{n-1} | [z, w_j^m] > (z the crossing
    // generator for x^n); reorient each relator to w_j^m z w_j^-m z^-1 and
    // introduce chains
    let z_name = format!("x.x{}", n - 1);
    let z = sub
        .id_by_name(&z_name)
        .ok_or_else(|| Error::Other("missing power generator after rewriting".into()))?;
    let stable_names: Vec<String> = sub
        .generators()
        .iter()
        .map(|gn| gn.name.clone())
        .filter(|nm| nm != &z_name)
        .collect();
    // reorienting moves the processed relator to the end, so always work
    // on the front of the list
    for _ in 0..sub.relators().len() {
        let wj = sub.relators()[0]
            .support()
            .into_iter()
            .find(|&id| id != z)
            .ok_or_else(|| Error::Other("unexpected kernel relator".into()))?;
        let target = Word::commutator(&Word::power(wj, m as i64), &Word::single(z));
        sub = reorient_relator(&sub, 0, &target)?;
    }
    if m >= 2 {
        let count = sub.relators().len();
        for j in 0..count {
            let names: Vec<String> = (1..m).map(|k| format!("r{}_{}", j + 1, k)).collect();
            sub = chain_conjugation(&sub, j, &names)?;
        }
    }
    cert.steps.push(Step::Tietze(TietzeLogStep {
        moves: sub.log().to_vec(),
        result: sub.clone(),
    }));

    // assemble the level: base = z and the chain generators, stable letters
    // the w_j, extensions the full chain cycles
    let clean = strip_log(sub);
    let stable_ids: Vec<usize> = stable_names
        .iter()
        .map(|nm| {
            clean
                .id_by_name(nm)
                .ok_or_else(|| Error::Other("stable letter vanished".into()))
        })
        .collect::<Result<_>>()?;
    let structure = super::ladder::classify(&clean, &stable_ids)?;
    let mut extensions = Vec::new();
    for (i, _) in stable_ids.iter().enumerate() {
        let ext = cycle_closure(&structure.arrows[i], structure.base_ids.len())?;
        extensions.push(ext);
    }
    let level = Level::new(clean, stable_ids, extensions)?;
    cert.steps.extend(finite_closure_steps(level, opts)?);
    Ok(cert)
}

/// Close the arrow paths of a partial action into full cycles, fixing
/// untouched slots. Arrows must be sign-preserving.
pub fn cycle_closure(
    arrows: &std::collections::BTreeMap<usize, crate::words::Letter>,
    n: usize,
) -> Result<SignedPermutation> {
    use crate::words::Letter;
    let mut image: Vec<Option<Letter>> = vec![None; n];
    for (&from, &img) in arrows {
        if img.sign != Sign::Plus {
            return Err(Error::MixedSigns(format!("slot {from}")));
        }
        image[from] = Some(img);
    }
    let hit: std::collections::BTreeSet<usize> = arrows.values().map(|l| l.gen).collect();
    // close each maximal path start -> ... -> end by end -> start
    let starts: Vec<usize> =
        (0..n).filter(|s| arrows.contains_key(s) && !hit.contains(s)).collect();
    for start in starts {
        let mut cur = start;
        while let Some(img) = image[cur] {
            cur = img.gen;
            if cur == start {
                break;
            }
        }
        if image[cur].is_none() {
            image[cur] = Some(Letter::plus(start));
        }
    }
    for (s, img) in image.iter_mut().enumerate() {
        if img.is_none() {
            *img = Some(Letter::plus(s));
        }
    }
    SignedPermutation::from_images(image.into_iter().map(|o| o.unwrap()).collect())
        .map_err(|e| Error::MixedSigns(e.to_string()))
}

/// Rebuild a presentation with the same names and relators but a fresh,
/// empty move log (the base of a new certificate segment).
pub fn strip_log(p: Presentation) -> Presentation {
    let mut out = Presentation::default();
    let mut map = std::collections::BTreeMap::new();
    for g in p.generators() {
        let id = out.push_generator(&g.name).expect("unique names");
        map.insert(g.id, id);
    }
    for r in p.relators() {
        out.push_relator(r.relabel(&map)).expect("valid relator");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_on_square_conjugation() {
        // [t, k^2] spelled k^2 t k^-2 t^-1: chain r1 = k t k^-1,
        // final relation k r1 k^-1 = t
        let mut p = Presentation::new(&["k", "t"]).unwrap();
        let (k, t) = (0, 1);
        p.push_relator(Word::commutator(&Word::power(k, 2), &Word::single(t))).unwrap();
        let before = p.abelianization_invariants();
        let out = chain_conjugation(&p, 0, &["r1".into()]).unwrap();
        assert_eq!(out.abelianization_invariants(), before);
        let r1 = out.id_by_name("r1").unwrap();
        let expect = Word::single(k)
            .concat(&Word::single(r1))
            .concat(&Word::single(k).inverse())
            .concat(&Word::single(t).inverse());
        assert_eq!(out.relators()[0], free_reduce(&expect));
        assert_eq!(out.relators().len(), 2);
    }

    #[test]
    fn chain_on_mixed_word() {
        // [t, a b^2]: relator a b^2 t b^-2 a^-1 t^-1 -> chains r1, r2
        let mut p = Presentation::new(&["a", "b", "t"]).unwrap();
        let (a, b, t) = (0, 1, 2);
        let w = Word::single(a).concat(&Word::power(b, 2));
        p.push_relator(Word::commutator(&w, &Word::single(t))).unwrap();
        let before = p.abelianization_invariants();
        let out = chain_conjugation(&p, 0, &["r1".into(), "r2".into()]).unwrap();
        assert_eq!(out.abelianization_invariants(), before);
        let r2 = out.id_by_name("r2").unwrap();
        let expect = Word::single(a)
            .concat(&Word::single(r2))
            .concat(&Word::single(a).inverse())
            .concat(&Word::single(t).inverse());
        assert_eq!(out.relators()[0], free_reduce(&expect));
    }

    #[test]
    fn reorient_swaps_commutator_sides() {
        let mut p = Presentation::new(&["z", "w"]).unwrap();
        p.push_relator(Word::commutator(&Word::single(0), &Word::power(1, 2))).unwrap();
        let target = Word::commutator(&Word::power(1, 2), &Word::single(0));
        let out = reorient_relator(&p, 0, &target).unwrap();
        assert_eq!(out.relators().len(), 1);
        assert_eq!(out.relators()[0], target);
    }

    #[test]
    fn power_commutator_2_2_reaches_commutator_form() {
        let opts = PipelineOptions::default();
        let cert = power_commutator_pipeline(2, 2, "xy22", &opts).unwrap();
        assert_eq!(cert.steps.last().unwrap().kind(), "raag-reached");
        crate::cert::verify(&cert).unwrap();
        let p = cert.final_presentation().unwrap();
        assert!(p.is_raag());
    }
}