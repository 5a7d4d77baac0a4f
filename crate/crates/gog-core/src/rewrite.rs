//! Finite quotient maps, Schreier transversals, the Reidemeister-Schreier
//! rewriting process, and deterministic simplification of the resulting
//! kernel presentations.

use crate::autext::FinitePermGroup;
use crate::error::{Error, Result};
use crate::words::{
    canonical_rotation, free_reduce, DerivationFactor, GeneratorTag, Presentation, Sign,
    TietzeMove, Word,
};

/// Target of a finite quotient: a cyclic group or a concrete permutation
/// group with its multiplication table. Elements are indices; 0 is the
/// identity.
#[derive(Clone, Debug)]
pub enum QuotientTarget {
    Cyclic(usize),
    Perm(FinitePermGroup),
}

impl QuotientTarget {
    pub fn order(&self) -> usize {
        match self {
            QuotientTarget::Cyclic(r) => *r,
            QuotientTarget::Perm(g) => g.order(),
        }
    }

    fn multiply(&self, a: usize, b: usize) -> usize {
        match self {
            QuotientTarget::Cyclic(r) => (a + b) % r,
            QuotientTarget::Perm(g) => g.table[a][b],
        }
    }

    fn inverse(&self, a: usize) -> usize {
        match self {
            QuotientTarget::Cyclic(r) => (r - a) % r,
            QuotientTarget::Perm(g) => {
                (0..g.order()).find(|&b| g.table[a][b] == 0).expect("group has inverses")
            }
        }
    }
}

/// A surjection of the source presentation onto a finite target, with every
/// relator in the kernel.
#[derive(Clone, Debug)]
pub struct FiniteQuotientMap {
    pub source: Presentation,
    pub target: QuotientTarget,
    /// Target element per source generator slot.
    pub images: Vec<usize>,
}

impl FiniteQuotientMap {
    pub fn new(
        source: Presentation,
        target: QuotientTarget,
        images: Vec<usize>,
    ) -> Result<FiniteQuotientMap> {
        if images.len() != source.num_generators() {
            return Err(Error::Other("image count mismatch".into()));
        }
        if target.order() == 0 {
            return Err(Error::Other("trivial modulus".into()));
        }
        let q = FiniteQuotientMap { source, target, images };
        for r in q.source.relators() {
            if q.evaluate(r) != 0 {
                return Err(Error::Other(format!(
                    "relator {} does not die in the quotient",
                    q.source.display_word(r)
                )));
            }
        }
        if !q.is_surjective() {
            return Err(Error::NotSurjective);
        }
        Ok(q)
    }

    fn image_of_slot(&self, slot: usize) -> usize {
        self.images[slot]
    }

    pub fn evaluate(&self, w: &Word) -> usize {
        let mut acc = 0usize;
        for l in w.letters() {
            let slot = self.source.slot_of(l.gen).expect("word over source generators");
            let img = self.image_of_slot(slot);
            let step = match l.sign {
                Sign::Plus => img,
                Sign::Minus => self.target.inverse(img),
            };
            acc = self.target.multiply(acc, step);
        }
        acc
    }

    fn is_surjective(&self) -> bool {
        // reachable set under the generator images and their inverses
        let n = self.target.order();
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut stack = vec![0usize];
        while let Some(e) = stack.pop() {
            for &img in &self.images {
                for step in [img, self.target.inverse(img)] {
                    let to = self.target.multiply(e, step);
                    if !seen[to] {
                        seen[to] = true;
                        stack.push(to);
                    }
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// A prefix-closed set of coset representatives, one word per target
/// element (indexed by element).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SchreierTransversal {
    pub words: Vec<Word>,
}

impl SchreierTransversal {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Every prefix of every representative is itself a representative.
    pub fn is_prefix_closed(&self) -> bool {
        self.words.iter().all(|w| {
            (0..w.len()).all(|k| {
                let prefix = Word::from_letters(w.letters()[..k].to_vec());
                self.words.contains(&prefix)
            })
        })
    }
}

/// Build the transversal for a quotient map: powers of a distinguished
/// generator for cyclic targets generated by a single generator image,
/// breadth-first representative words otherwise.
pub fn schreier_transversal(q: &FiniteQuotientMap) -> Result<SchreierTransversal> {
    if let QuotientTarget::Cyclic(r) = q.target {
        // powers of the first generator mapping to 1
        if let Some(slot) = (0..q.images.len()).find(|&s| q.images[s] == 1 % r) {
            let id = q.source.generators()[slot].id;
            let words = (0..r).map(|k| Word::power(id, k as i64)).collect();
            let t = SchreierTransversal { words };
            debug_assert!(t.is_prefix_closed());
            return Ok(t);
        }
    }
    // breadth-first over the target using generator images in slot order
    let n = q.target.order();
    let mut words: Vec<Option<Word>> = vec![None; n];
    words[0] = Some(Word::empty());
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(e) = queue.pop_front() {
        let base = words[e].clone().unwrap();
        for slot in 0..q.images.len() {
            let id = q.source.generators()[slot].id;
            let to = q.target.multiply(e, q.images[slot]);
            if words[to].is_none() {
                words[to] = Some(base.concat(&Word::single(id)));
                queue.push_back(to);
            }
        }
    }
    let words: Option<Vec<Word>> = words.into_iter().collect();
    let words = words.ok_or(Error::NotSurjective)?;
    let t = SchreierTransversal { words };
    if !t.is_prefix_closed() {
        return Err(Error::Other("transversal is not prefix-closed".into()));
    }
    Ok(t)
}

/// A kernel presentation with the provenance of every generator and
/// relator.
#[derive(Clone, Debug)]
pub struct KernelPresentation {
    pub presentation: Presentation,
    /// (coset index, source generator slot) per kernel generator, aligned
    /// with the presentation's generator list.
    pub gen_origin: Vec<(usize, usize)>,
    /// (coset index, source relator index) per kernel relator, aligned
    /// with the presentation's relator list.
    pub relator_origin: Vec<(usize, usize)>,
}

/// The Reidemeister-Schreier rewriting process: Schreier generators
/// u s (rep(us))^-1 and the relators u r u^-1 rewritten over them.
pub fn reidemeister_schreier(
    q: &FiniteQuotientMap,
    u: &SchreierTransversal,
) -> Result<KernelPresentation> {
    if u.len() != q.target.order() {
        return Err(Error::Other("transversal size does not match target order".into()));
    }
    for (e, w) in u.words.iter().enumerate() {
        if q.evaluate(w) != e {
            return Err(Error::Other("transversal word represents the wrong coset".into()));
        }
    }
    let n_cosets = u.len();
    let n_gens = q.source.num_generators();
    // Schreier generator table: gamma[coset][slot] = Some(kernel gen id)
    // or None when the word is freely trivial (a tree edge).
    let mut presentation = Presentation::default();
    let mut gen_origin = Vec::new();
    let mut gamma: Vec<Vec<Option<usize>>> = vec![vec![None; n_gens]; n_cosets];
    for coset in 0..n_cosets {
        for slot in 0..n_gens {
            let sid = q.source.generators()[slot].id;
            let to = q.target.multiply(coset, q.images[slot]);
            let word = free_reduce(
                &u.words[coset].concat(&Word::single(sid)).concat(&u.words[to].inverse()),
            );
            if word.is_empty() {
                continue;
            }
            let sname = &q.source.generators()[slot].name;
            let name = if word == Word::single(sid) {
                sname.clone()
            } else if coset > 0
                && word == Word::single(sid).conjugated_by(&u.words[coset])
            {
                format!("{sname}.u{coset}")
            } else {
                format!("{sname}.x{coset}")
            };
            let id =
                presentation.push_generator_tagged(&name, GeneratorTag { coset })?;
            gen_origin.push((coset, slot));
            gamma[coset][slot] = Some(id);
        }
    }
    // rewrite u r u^-1 by scanning r from each coset
    let mut relator_origin = Vec::new();
    for (ri, r) in q.source.relators().iter().enumerate() {
        for coset in 0..n_cosets {
            let mut cur = coset;
            let mut letters = Vec::new();
            for l in r.letters() {
                let slot = q.source.slot_of(l.gen).expect("relator over source");
                match l.sign {
                    Sign::Plus => {
                        if let Some(g) = gamma[cur][slot] {
                            letters.push(crate::words::Letter::plus(g));
                        }
                        cur = q.target.multiply(cur, q.images[slot]);
                    }
                    Sign::Minus => {
                        let back = q.target.multiply(cur, q.target.inverse(q.images[slot]));
                        if let Some(g) = gamma[back][slot] {
                            letters.push(crate::words::Letter::minus(g));
                        }
                        cur = back;
                    }
                }
            }
            debug_assert_eq!(cur, coset, "relator must return to its coset");
            let word = free_reduce(&Word::from_letters(letters));
            if word.is_empty() {
                continue;
            }
            presentation.push_relator(word)?;
            relator_origin.push((coset, ri));
        }
    }
    Ok(KernelPresentation { presentation, gen_origin, relator_origin })
}

/// Deterministic simplification toward commutator form: repeatedly remove
/// generators with single-occurrence defining relators (preferring
/// generators tagged with a nontrivial coset, then smallest id), free-reduce
/// and deduplicate relators up to rotation and inversion. Every step is a
/// logged Tietze move.
pub fn simplify(kp: &KernelPresentation) -> Result<Presentation> {
    simplify_presentation(kp.presentation.clone())
}

pub fn simplify_presentation(mut p: Presentation) -> Result<Presentation> {
    loop {
        p = dedupe_with_log(p)?;
        // pick the generator to remove: tagged (nontrivial coset) first,
        // then smallest id; among its defining relators use the shortest
        let mut gen_pick: Option<(bool, usize)> = None; // (tagged, id), tagged preferred
        for r in p.relators() {
            for l in r.letters() {
                if r.count_gen(l.gen) != 1 {
                    continue;
                }
                let slot = p.slot_of(l.gen).expect("relator over presentation");
                let tagged = p.tag(slot).coset != 0;
                let better = match gen_pick {
                    None => true,
                    Some((ct, cid)) => (tagged, std::cmp::Reverse(l.gen)) > (ct, std::cmp::Reverse(cid)),
                };
                if better {
                    gen_pick = Some((tagged, l.gen));
                }
            }
        }
        let Some((_, gen)) = gen_pick else {
            return Ok(p);
        };
        let ri = p
            .relators()
            .iter()
            .enumerate()
            .filter(|(_, r)| r.count_gen(gen) == 1)
            .min_by_key(|(i, r)| (r.len(), *i))
            .map(|(i, _)| i)
            .expect("candidate has a defining relator");
        let r = p.relators()[ri].clone();
        let pos = r
            .letters()
            .iter()
            .position(|l| l.gen == gen)
            .expect("candidate occurs");
        let mut rotated = r.rotated(pos);
        if rotated.letters()[0].sign == Sign::Minus {
            let inv = rotated.inverse();
            let p2 = inv.letters().iter().position(|l| l.gen == gen).unwrap();
            rotated = inv.rotated(p2);
        }
        debug_assert_eq!(rotated.letters()[0].gen, gen);
        debug_assert_eq!(rotated.letters()[0].sign, Sign::Plus);
        let definition =
            free_reduce(&Word::from_letters(rotated.letters()[1..].to_vec()).inverse());
        p = p.apply_tietze(&TietzeMove::RemoveGenerator { id: gen, definition })?;
    }
}

/// Remove duplicate relators (up to rotation/inversion) with recorded
/// removal derivations.
fn dedupe_with_log(mut p: Presentation) -> Result<Presentation> {
    loop {
        let mut found: Option<(usize, usize)> = None; // (kept, removed)
        'scan: for i in 0..p.relators().len() {
            for j in i + 1..p.relators().len() {
                if canonical_rotation(&p.relators()[i]) == canonical_rotation(&p.relators()[j]) {
                    found = Some((i, j));
                    break 'scan;
                }
            }
        }
        let Some((keep, drop)) = found else {
            return Ok(p);
        };
        let target = p.relators()[drop].clone();
        let kept = p.relators()[keep].clone();
        // target is a rotation of kept or of its inverse:
        // rotation by k of w equals prefix^-1 w prefix with prefix = first k letters.
        let mut derivation: Option<Vec<DerivationFactor>> = None;
        for k in 0..kept.len() {
            let prefix = Word::from_letters(kept.letters()[..k].to_vec());
            if kept.rotated(k) == target {
                derivation = Some(vec![DerivationFactor {
                    relator: keep,
                    inverted: false,
                    conjugator: prefix.inverse(),
                }]);
                break;
            }
            let inv = kept.inverse();
            let prefix_inv = Word::from_letters(inv.letters()[..k].to_vec());
            if inv.rotated(k) == target {
                derivation = Some(vec![DerivationFactor {
                    relator: keep,
                    inverted: true,
                    conjugator: prefix_inv.inverse(),
                }]);
                break;
            }
        }
        let derivation = derivation
            .ok_or_else(|| Error::Other("duplicate relator without rotation witness".into()))?;
        p = p.apply_tietze(&TietzeMove::RemoveRelator { index: drop, derivation })?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::Letter;

    fn free_group(names: &[&str]) -> Presentation {
        Presentation::new(names).unwrap()
    }

    fn z2_quotient_of_free_rank1() -> FiniteQuotientMap {
        let p = free_group(&["x"]);
        FiniteQuotientMap::new(p, QuotientTarget::Cyclic(2), vec![1]).unwrap()
    }

    #[test]
    fn transversal_cyclic_powers() {
        let q = z2_quotient_of_free_rank1();
        let t = schreier_transversal(&q).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.words[0], Word::empty());
        assert_eq!(t.words[1], Word::single(0));
        assert!(t.is_prefix_closed());
    }

    #[test]
    fn transversal_trivial_target() {
        let p = free_group(&["x"]);
        let q = FiniteQuotientMap::new(p, QuotientTarget::Cyclic(1), vec![0]).unwrap();
        let t = schreier_transversal(&q).unwrap();
        assert_eq!(t.len(), 1);
        assert!(t.words[0].is_empty());
    }

    #[test]
    fn transversal_perm_target_prefix_closed() {
        use crate::autext::{closure, SignedPermutation};
        let rot = SignedPermutation::from_cycles(3, &[vec![0, 1, 2]]).unwrap();
        let swap = SignedPermutation::from_cycles(3, &[vec![0, 1]]).unwrap();
        let d = closure(&[rot.clone(), swap.clone()], 100).unwrap();
        let p = free_group(&["a", "b"]);
        let ia = d.index_of(&rot).unwrap();
        let ib = d.index_of(&swap).unwrap();
        let q = FiniteQuotientMap::new(p, QuotientTarget::Perm(d), vec![ia, ib]).unwrap();
        let t = schreier_transversal(&q).unwrap();
        assert_eq!(t.len(), 6);
        assert!(t.is_prefix_closed());
    }

    #[test]
    fn kernel_of_free_rank1_mod2() {
        let q = z2_quotient_of_free_rank1();
        let t = schreier_transversal(&q).unwrap();
        let k = reidemeister_schreier(&q, &t).unwrap();
        // kernel <x^2 |> is free of rank 1
        assert_eq!(k.presentation.num_generators(), 1);
        assert!(k.presentation.relators().is_empty());
    }

    #[test]
    fn kernel_of_z2_quotient_of_z_squared() {
        // <x,y | [x,y]> onto Z_2 (x -> 1, y -> 0): kernel is Z^2
        let mut p = free_group(&["x", "y"]);
        p.push_relator(Word::commutator(&Word::single(0), &Word::single(1))).unwrap();
        let q = FiniteQuotientMap::new(p, QuotientTarget::Cyclic(2), vec![1, 0]).unwrap();
        let t = schreier_transversal(&q).unwrap();
        let k = reidemeister_schreier(&q, &t).unwrap();
        let s = simplify(&k).unwrap();
        assert_eq!(s.abelianization_invariants(), (2, vec![]));
    }

    #[test]
    fn nielsen_schreier_rank_for_free_sources() {
        // kernel of F_n ->> Z_k is free of rank 1 + k(n-1)
        for n in 1..=3usize {
            for k in 2..=4usize {
                let names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
                let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
                let p = free_group(&name_refs);
                let mut images = vec![0; n];
                images[0] = 1;
                let q = FiniteQuotientMap::new(p, QuotientTarget::Cyclic(k), images).unwrap();
                let t = schreier_transversal(&q).unwrap();
                let kp = reidemeister_schreier(&q, &t).unwrap();
                let s = simplify(&kp).unwrap();
                assert!(s.relators().is_empty());
                assert_eq!(s.num_generators(), 1 + k * (n - 1));
            }
        }
    }

    #[test]
    fn simplify_removes_chained_equalities() {
        // generators t, a, b with relators a = t, b = a: everything chains
        // down to t
        let mut p = Presentation::new(&["t", "a", "b"]).unwrap();
        p.push_relator(Word::single(1).concat(&Word::single(0).inverse())).unwrap();
        p.push_relator(Word::single(2).concat(&Word::single(1).inverse())).unwrap();
        let s = simplify_presentation(p).unwrap();
        assert_eq!(s.num_generators(), 1);
        assert!(s.relators().is_empty());
    }

    #[test]
    fn simplify_is_fixpoint_on_simplified_input() {
        let mut p = Presentation::new(&["a", "b"]).unwrap();
        p.push_relator(Word::commutator(&Word::single(0), &Word::single(1))).unwrap();
        let s = simplify_presentation(p.clone()).unwrap();
        assert_eq!(s.relators(), p.relators());
        assert_eq!(s.num_generators(), 2);
    }

    #[test]
    fn simplify_prefers_tagged_generators() {
        // relator a.u1 * t^-1 where a.u1 is tagged coset 1: the tagged
        // generator goes, t stays
        let mut p = Presentation::default();
        let t = p.push_generator("t").unwrap();
        let a = p.push_generator_tagged("t.u1", GeneratorTag { coset: 1 }).unwrap();
        p.push_relator(Word::from_letters(vec![Letter::plus(a), Letter::minus(t)])).unwrap();
        let s = simplify_presentation(p).unwrap();
        assert_eq!(s.num_generators(), 1);
        assert_eq!(s.generators()[0].name, "t");
    }

    #[test]
    fn rewriting_preserves_abelianization_through_simplify() {
        // kernel of <x,y | [x,y]> ->> Z_3 has invariants (2, {})
        let mut p = free_group(&["x", "y"]);
        p.push_relator(Word::commutator(&Word::single(0), &Word::single(1))).unwrap();
        let q = FiniteQuotientMap::new(p, QuotientTarget::Cyclic(3), vec![1, 0]).unwrap();
        let t = schreier_transversal(&q).unwrap();
        let k = reidemeister_schreier(&q, &t).unwrap();
        let before = k.presentation.abelianization_invariants();
        let s = simplify(&k).unwrap();
        assert_eq!(s.abelianization_invariants(), before);
    }
}
