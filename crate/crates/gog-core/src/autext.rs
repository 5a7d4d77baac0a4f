//! Partial generator maps, their extension to signed permutations of a
//! generating set, finite-order automorphisms given by generator-to-word
//! maps, commutation checks, and finite permutation-group closure with
//! multiplication table and prefix-closed witness words.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::normalform::{raag_equal, raag_normal_form, RaagContext};
use crate::words::{CommutationGraph, Letter, Sign, Word};

/// An injective map between generator subsets, given on slots of a context.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PartialGeneratorMap {
    pub domain: Vec<usize>,
    pub images: Vec<usize>,
}

impl PartialGeneratorMap {
    pub fn new(mut pairs: Vec<(usize, usize)>) -> Result<PartialGeneratorMap> {
        pairs.sort_by_key(|p| p.0);
        let domain: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let images: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        for w in domain.windows(2) {
            if w[0] == w[1] {
                return Err(Error::Other("duplicate domain generator".into()));
            }
        }
        let mut im = images.clone();
        im.sort_unstable();
        for w in im.windows(2) {
            if w[0] == w[1] {
                return Err(Error::Other("partial map is not injective".into()));
            }
        }
        Ok(PartialGeneratorMap { domain, images })
    }

    pub fn image_of(&self, slot: usize) -> Option<usize> {
        self.domain.binary_search(&slot).ok().map(|i| self.images[i])
    }
}

/// A permutation of the generator slots with a sign per slot: slot `i` maps
/// to the letter `image[i]` (a generator or its inverse).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct SignedPermutation {
    pub image: Vec<Letter>,
}

impl SignedPermutation {
    pub fn identity(n: usize) -> SignedPermutation {
        SignedPermutation { image: (0..n).map(Letter::plus).collect() }
    }

    pub fn from_images(image: Vec<Letter>) -> Result<SignedPermutation> {
        let mut seen = vec![false; image.len()];
        for l in &image {
            if l.gen >= image.len() || seen[l.gen] {
                return Err(Error::Other("signed permutation images are not a bijection".into()));
            }
            seen[l.gen] = true;
        }
        Ok(SignedPermutation { image })
    }

    /// Build from disjoint cycles over `n` slots; unnamed slots are fixed.
    /// Each cycle maps entry i to entry i+1 (wrapping).
    pub fn from_cycles(n: usize, cycles: &[Vec<usize>]) -> Result<SignedPermutation> {
        let mut image: Vec<Letter> = (0..n).map(Letter::plus).collect();
        let mut touched = vec![false; n];
        for c in cycles {
            for (k, &s) in c.iter().enumerate() {
                if s >= n || touched[s] {
                    return Err(Error::Other("cycles are not disjoint".into()));
                }
                touched[s] = true;
                image[s] = Letter::plus(c[(k + 1) % c.len()]);
            }
        }
        SignedPermutation::from_images(image)
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn apply(&self, l: Letter) -> Letter {
        let img = self.image[l.gen];
        match l.sign {
            Sign::Plus => img,
            Sign::Minus => img.inverse(),
        }
    }

    pub fn apply_word(&self, w: &Word) -> Word {
        Word::from_letters(w.letters().iter().map(|&l| self.apply(l)).collect())
    }

    /// Apply `self` first, then `other`.
    pub fn then(&self, other: &SignedPermutation) -> SignedPermutation {
        SignedPermutation { image: self.image.iter().map(|&l| other.apply(l)).collect() }
    }

    pub fn inverse(&self) -> SignedPermutation {
        let mut image = vec![Letter::plus(0); self.image.len()];
        for (i, l) in self.image.iter().enumerate() {
            image[l.gen] = Letter::new(i, l.sign);
        }
        SignedPermutation { image }
    }

    pub fn is_identity(&self) -> bool {
        self.image.iter().enumerate().all(|(i, l)| *l == Letter::plus(i))
    }

    pub fn commutes_with(&self, other: &SignedPermutation) -> bool {
        self.then(other) == other.then(self)
    }

    /// Least r >= 1 with self^r = id, if within `bound`.
    pub fn order(&self, bound: usize) -> Result<usize> {
        let mut acc = self.clone();
        for r in 1..=bound {
            if acc.is_identity() {
                return Ok(r);
            }
            acc = acc.then(self);
        }
        Err(Error::OrderExceedsBound(bound))
    }

    /// Nontrivial cycles of the underlying (unsigned) permutation.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.image.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut cycle = vec![start];
            seen[start] = true;
            let mut cur = self.image[start].gen;
            while cur != start {
                seen[cur] = true;
                cycle.push(cur);
                cur = self.image[cur].gen;
            }
            if cycle.len() > 1 || self.image[start] != Letter::plus(start) {
                out.push(cycle);
            }
        }
        out
    }

    /// Whether the underlying map preserves the commutation graph (the
    /// condition for conjugation by a stable letter to define an
    /// automorphism of the group).
    pub fn is_graph_automorphism(&self, graph: &CommutationGraph) -> bool {
        for (a, b) in graph.edges() {
            if !graph.has_edge(self.image[a].gen, self.image[b].gen) {
                return false;
            }
        }
        // bijective, so edge count is preserved iff all edges map to edges
        true
    }
}

/// Extend a partial generator map to a signed permutation of the whole
/// generator set: the map on its domain, unmatched codomain elements sent
/// back to unmatched domain elements in name order, fixed points elsewhere.
/// Every nontrivial cycle's support must be a clique in the commutation
/// graph.
pub fn extend_to_signed_permutation(
    ctx: &RaagContext,
    f: &PartialGeneratorMap,
) -> Result<SignedPermutation> {
    let n = ctx.gens.len();
    let mut image: Vec<Option<Letter>> = vec![None; n];
    for (&d, &i) in f.domain.iter().zip(&f.images) {
        if d >= n || i >= n {
            return Err(Error::Other("partial map references unknown generators".into()));
        }
        image[d] = Some(Letter::plus(i));
    }
    let in_domain = |s: usize| f.domain.binary_search(&s).is_ok();
    let hit: Vec<bool> = {
        let mut h = vec![false; n];
        for &i in &f.images {
            h[i] = true;
        }
        h
    };
    // codomain \ domain, domain \ codomain, both in name order
    let mut loose_sources: Vec<usize> = (0..n).filter(|&s| hit[s] && !in_domain(s)).collect();
    let mut loose_targets: Vec<usize> = (0..n).filter(|&s| in_domain(s) && !hit[s]).collect();
    loose_sources.sort_by(|&a, &b| ctx.gens[a].cmp(&ctx.gens[b]));
    loose_targets.sort_by(|&a, &b| ctx.gens[a].cmp(&ctx.gens[b]));
    debug_assert_eq!(loose_sources.len(), loose_targets.len());
    for (&s, &t) in loose_sources.iter().zip(&loose_targets) {
        image[s] = Some(Letter::plus(t));
    }
    for (s, img) in image.iter_mut().enumerate() {
        if img.is_none() {
            *img = Some(Letter::plus(s));
        }
    }
    let perm = SignedPermutation::from_images(image.into_iter().map(|o| o.unwrap()).collect())?;
    for cycle in perm.cycles() {
        if !ctx.graph.is_clique(&cycle) {
            let names: Vec<&str> = cycle.iter().map(|&s| ctx.gens[s].as_str()).collect();
            return Err(Error::NoValidExtension(format!(
                "cycle ({}) is not supported on a clique",
                names.join(" ")
            )));
        }
    }
    Ok(perm)
}

/// An automorphism given by generator-to-word images with a verified
/// inverse; equality of images is decided in the context's normal form.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GeneratorAutomorphism {
    pub images: Vec<Word>,
    pub inverses: Vec<Word>,
}

impl GeneratorAutomorphism {
    pub fn new(ctx: &RaagContext, images: Vec<Word>, inverses: Vec<Word>) -> Result<GeneratorAutomorphism> {
        let n = ctx.gens.len();
        if images.len() != n || inverses.len() != n {
            return Err(Error::Other("image count does not match generator count".into()));
        }
        let f = GeneratorAutomorphism { images, inverses };
        for g in 0..n {
            let roundtrip = f.apply_word(&f.inverse_apply_word(&Word::single(g)));
            if !raag_equal(&roundtrip, &Word::single(g), ctx) {
                return Err(Error::Other(format!(
                    "inverse map fails on generator {}",
                    ctx.gens[g]
                )));
            }
            let other = f.inverse_apply_word(&f.apply_word(&Word::single(g)));
            if !raag_equal(&other, &Word::single(g), ctx) {
                return Err(Error::Other(format!(
                    "map/inverse composition fails on generator {}",
                    ctx.gens[g]
                )));
            }
        }
        Ok(f)
    }

    pub fn identity(n: usize) -> GeneratorAutomorphism {
        GeneratorAutomorphism {
            images: (0..n).map(Word::single).collect(),
            inverses: (0..n).map(Word::single).collect(),
        }
    }

    pub fn from_signed_permutation(p: &SignedPermutation) -> GeneratorAutomorphism {
        let inv = p.inverse();
        GeneratorAutomorphism {
            images: p.image.iter().map(|&l| Word::letter(l)).collect(),
            inverses: inv.image.iter().map(|&l| Word::letter(l)).collect(),
        }
    }

    pub fn apply_word(&self, w: &Word) -> Word {
        let mut out = Word::empty();
        for l in w.letters() {
            let img = &self.images[l.gen];
            out = out.concat(&match l.sign {
                Sign::Plus => img.clone(),
                Sign::Minus => img.inverse(),
            });
        }
        out
    }

    pub fn inverse_apply_word(&self, w: &Word) -> Word {
        let mut out = Word::empty();
        for l in w.letters() {
            let img = &self.inverses[l.gen];
            out = out.concat(&match l.sign {
                Sign::Plus => img.clone(),
                Sign::Minus => img.inverse(),
            });
        }
        out
    }

    pub fn is_identity(&self, ctx: &RaagContext) -> bool {
        (0..self.images.len()).all(|g| raag_equal(&self.images[g], &Word::single(g), ctx))
    }

    pub fn compose(&self, then: &GeneratorAutomorphism) -> GeneratorAutomorphism {
        GeneratorAutomorphism {
            images: self.images.iter().map(|w| then.apply_word(w)).collect(),
            inverses: then.inverses.iter().map(|w| self.inverse_apply_word(w)).collect(),
        }
    }
}

/// Least r <= bound with f^r the identity on every generator. Images are
/// normal-formed between steps; unbounded image growth (the hallmark of an
/// infinite-order map) is cut off at a letter budget and reported as
/// exceeding the bound.
pub fn automorphism_order(
    f: &GeneratorAutomorphism,
    ctx: &RaagContext,
    bound: usize,
) -> Result<usize> {
    const LETTER_BUDGET: usize = 4_000;
    let mut images: Vec<Word> =
        f.images.iter().map(|w| raag_normal_form(w, ctx)).collect();
    for r in 1..=bound.max(1) {
        if images
            .iter()
            .enumerate()
            .all(|(g, w)| w.letters() == [crate::words::Letter::plus(g)])
        {
            return Ok(r);
        }
        images = images
            .iter()
            .map(|w| raag_normal_form(&f.apply_word(w), ctx))
            .collect();
        if images.iter().map(Word::len).sum::<usize>() > LETTER_BUDGET {
            return Err(Error::OrderExceedsBound(bound));
        }
    }
    Err(Error::OrderExceedsBound(bound))
}

/// Whether two automorphisms agree in both composition orders on every
/// generator.
pub fn commute(f: &GeneratorAutomorphism, g: &GeneratorAutomorphism, ctx: &RaagContext) -> bool {
    (0..ctx.gens.len()).all(|i| {
        let fg = g.apply_word(&f.images[i]);
        let gf = f.apply_word(&g.images[i]);
        raag_normal_form(&fg, ctx) == raag_normal_form(&gf, ctx)
    })
}

/// The closure of a set of signed permutations: full element list found by
/// breadth-first multiplication, one prefix-closed witness word per
/// element, and the multiplication table.
#[derive(Clone, Debug)]
pub struct FinitePermGroup {
    pub gens: Vec<SignedPermutation>,
    pub elements: Vec<SignedPermutation>,
    /// Witness word (generator indices) per element; index 0 is the
    /// identity with the empty word.
    pub witnesses: Vec<Vec<usize>>,
    /// table[a][b] = index of elements[a] followed by elements[b].
    pub table: Vec<Vec<usize>>,
}

impl FinitePermGroup {
    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn index_of(&self, p: &SignedPermutation) -> Option<usize> {
        self.elements.iter().position(|e| e == p)
    }

    /// Index of the element a given witness-style word evaluates to.
    pub fn evaluate(&self, word: &[(usize, Sign)]) -> usize {
        let n = self.gens.first().map_or(0, |g| g.len());
        let mut acc = SignedPermutation::identity(n);
        for &(g, sign) in word {
            let step = match sign {
                Sign::Plus => self.gens[g].clone(),
                Sign::Minus => self.gens[g].inverse(),
            };
            acc = acc.then(&step);
        }
        self.index_of(&acc).expect("closure contains all products")
    }

    /// Relator words of the multiplication-table presentation on one
    /// abstract generator per closure generator: for every element u and
    /// generator g, the word witness(u) g witness(u*g)^-1, skipping entries
    /// where the two sides agree letter-for-letter. The result presents the
    /// group on those generators.
    pub fn table_relators(&self) -> Vec<Word> {
        let mut out = Vec::new();
        for (u, wu) in self.witnesses.iter().enumerate() {
            for (gi, g) in self.gens.iter().enumerate() {
                let target = self.elements[u].then(g);
                let v = self.index_of(&target).expect("closed");
                let mut lhs: Vec<usize> = wu.clone();
                lhs.push(gi);
                if lhs == self.witnesses[v] {
                    continue; // tree edge
                }
                let mut letters: Vec<Letter> = lhs.into_iter().map(Letter::plus).collect();
                letters.extend(self.witnesses[v].iter().rev().map(|&g| Letter::minus(g)));
                out.push(Word::from_letters(letters));
            }
        }
        out
    }
}

/// Breadth-first closure of `gens` under composition, capped at `bound`
/// elements. Element order (and so every witness word) is deterministic.
pub fn closure(gens: &[SignedPermutation], bound: usize) -> Result<FinitePermGroup> {
    let n = gens.first().map_or(0, |g| g.len());
    for g in gens {
        if g.len() != n {
            return Err(Error::Other("generators act on different sets".into()));
        }
    }
    let id = SignedPermutation::identity(n);
    let mut elements = vec![id.clone()];
    let mut witnesses: Vec<Vec<usize>> = vec![vec![]];
    let mut index: BTreeMap<SignedPermutation, usize> = BTreeMap::new();
    index.insert(id, 0);
    let mut frontier = vec![0usize];
    while let Some(next) = {
        let mut new_frontier = Vec::new();
        for &u in &frontier {
            for (gi, g) in gens.iter().enumerate() {
                let prod = elements[u].then(g);
                if !index.contains_key(&prod) {
                    if elements.len() >= bound {
                        return Err(Error::ClosureExceedsBound(bound));
                    }
                    let mut w = witnesses[u].clone();
                    w.push(gi);
                    index.insert(prod.clone(), elements.len());
                    witnesses.push(w);
                    elements.push(prod);
                    new_frontier.push(elements.len() - 1);
                }
            }
        }
        if new_frontier.is_empty() {
            None
        } else {
            Some(new_frontier)
        }
    } {
        frontier = next;
    }
    let table: Vec<Vec<usize>> = elements
        .iter()
        .map(|a| elements.iter().map(|b| index[&a.then(b)]).collect())
        .collect();
    Ok(FinitePermGroup { gens: gens.to_vec(), elements, witnesses, table })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extend_simple_transposition() {
        let mut graph = CommutationGraph::empty(2);
        graph.add_edge(0, 1);
        let ctx = RaagContext::new(vec!["a".into(), "b".into()], graph);
        let f = PartialGeneratorMap::new(vec![(0, 1)]).unwrap();
        let p = extend_to_signed_permutation(&ctx, &f).unwrap();
        assert_eq!(p.image, vec![Letter::plus(1), Letter::plus(0)]);
    }

    #[test]
    fn extend_chain_closes_to_cycle() {
        // t -> r1 -> r2 -> t on a clique
        let ctx = RaagContext::free_abelian(vec!["r1".into(), "r2".into(), "t".into()]);
        let f = PartialGeneratorMap::new(vec![(2, 0), (0, 1), (1, 2)]).unwrap();
        let p = extend_to_signed_permutation(&ctx, &f).unwrap();
        assert_eq!(p.cycles(), vec![vec![0, 1, 2]]);
        assert_eq!(p.order(10).unwrap(), 3);
    }

    #[test]
    fn extend_rejects_non_clique_cycle() {
        let ctx = RaagContext::free(vec!["a".into(), "b".into()]);
        let f = PartialGeneratorMap::new(vec![(0, 1)]).unwrap();
        assert!(matches!(
            extend_to_signed_permutation(&ctx, &f),
            Err(Error::NoValidExtension(_))
        ));
    }

    #[test]
    fn automorphism_order_examples() {
        let ctx = RaagContext::free_abelian(vec!["a".into(), "b".into(), "c".into()]);
        let id = GeneratorAutomorphism::identity(3);
        assert_eq!(automorphism_order(&id, &ctx, 10).unwrap(), 1);

        // a -> a b, b -> c, c -> b^-1 c^-1 has order 3 on Z^3
        let images = vec![
            Word::single(0).concat(&Word::single(1)),
            Word::single(2),
            Word::power(1, -1).concat(&Word::power(2, -1)),
        ];
        // inverse: a -> a c^-1 b^-1 ... compute: f(a)=ab, f(b)=c, f(c)=b^-1c^-1
        // f^2 = f^-1 since ord 3
        let f_nocheck = GeneratorAutomorphism { images: images.clone(), inverses: images.clone() };
        let f2 = f_nocheck.compose(&f_nocheck);
        let f = GeneratorAutomorphism::new(&ctx, images, f2.images).unwrap();
        assert_eq!(automorphism_order(&f, &ctx, 10).unwrap(), 3);

        // matrix-power oracle: the exponent matrix of f has order 3
        let m = vec![vec![1i64, 1, 0], vec![0, 0, 1], vec![0, -1, -1]];
        let mul = |a: &Vec<Vec<i64>>, b: &Vec<Vec<i64>>| -> Vec<Vec<i64>> {
            (0..3)
                .map(|i| (0..3).map(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum()).collect())
                .collect()
        };
        let m2 = mul(&m, &m);
        let m3 = mul(&m2, &m);
        assert_eq!(m3, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        assert_ne!(m2, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);

        // a -> a^2 on Z has infinite order
        let ctx1 = RaagContext::free_abelian(vec!["a".into()]);
        let g = GeneratorAutomorphism {
            images: vec![Word::power(0, 2)],
            inverses: vec![Word::power(0, 2)],
        };
        assert!(matches!(
            automorphism_order(&g, &ctx1, 50),
            Err(Error::OrderExceedsBound(50))
        ));
    }

    #[test]
    fn commute_examples() {
        let ctx = RaagContext::free_abelian(vec!["a".into(), "b".into(), "c".into()]);
        let swap_ab = SignedPermutation::from_cycles(3, &[vec![0, 1]]).unwrap();
        let swap_bc = SignedPermutation::from_cycles(3, &[vec![1, 2]]).unwrap();
        let f = GeneratorAutomorphism::from_signed_permutation(&swap_ab);
        let g = GeneratorAutomorphism::from_signed_permutation(&swap_bc);
        assert!(commute(&f, &f, &ctx));
        assert!(!commute(&f, &g, &ctx));

        // disjoint-support cycles commute
        let ctx4 = RaagContext::free_abelian(vec!["a".into(), "b".into(), "c".into(), "d".into()]);
        let p = SignedPermutation::from_cycles(4, &[vec![0, 1]]).unwrap();
        let q = SignedPermutation::from_cycles(4, &[vec![2, 3]]).unwrap();
        assert!(commute(
            &GeneratorAutomorphism::from_signed_permutation(&p),
            &GeneratorAutomorphism::from_signed_permutation(&q),
            &ctx4
        ));
    }

    #[test]
    fn closure_examples() {
        let id = SignedPermutation::identity(3);
        assert_eq!(closure(&[id], 100).unwrap().order(), 1);

        let swap = SignedPermutation::from_cycles(3, &[vec![0, 1]]).unwrap();
        assert_eq!(closure(&[swap.clone()], 100).unwrap().order(), 2);

        let rot = SignedPermutation::from_cycles(3, &[vec![0, 1, 2]]).unwrap();
        let s3 = closure(&[rot, swap], 100).unwrap();
        assert_eq!(s3.order(), 6);
        // witness words are prefix-closed
        for w in &s3.witnesses {
            for k in 0..w.len() {
                let prefix = &w[..k];
                assert!(s3.witnesses.iter().any(|x| x == prefix));
            }
        }
        // table relators present the group: count = |D|*|gens| - (|D|-1)
        assert_eq!(s3.table_relators().len(), 6 * 2 - (6 - 1));
        // contains every generator
        assert!(s3.index_of(&s3.gens[0].clone()).is_some());
    }

    #[test]
    fn closure_bound_enforced() {
        let rot = SignedPermutation::from_cycles(5, &[vec![0, 1, 2, 3, 4]]).unwrap();
        let swap = SignedPermutation::from_cycles(5, &[vec![0, 1]]).unwrap();
        assert!(matches!(closure(&[rot, swap], 10), Err(Error::ClosureExceedsBound(10))));
    }

    #[test]
    fn closure_size_divides_signed_symmetric_order() {
        let swap = SignedPermutation::from_cycles(2, &[vec![0, 1]]).unwrap();
        let neg = SignedPermutation::from_images(vec![Letter::minus(0), Letter::plus(1)]).unwrap();
        let g = closure(&[swap, neg], 1000).unwrap();
        // hyperoctahedral group of rank 2 has order 8
        assert_eq!(g.order(), 8);
        let full: usize = 2 * 2 * 2; // 2! * 2^2
        assert_eq!(full % g.order(), 0);
    }

    #[test]
    fn forward_and_backward_chain_cycles_are_inverse() {
        // the two orientations of a chain cycle are mutually inverse
        let fwd = SignedPermutation::from_cycles(4, &[vec![0, 1, 2, 3]]).unwrap();
        let back = SignedPermutation::from_cycles(4, &[vec![3, 2, 1, 0]]).unwrap();
        assert!(fwd.then(&back).is_identity());
    }

    #[test]
    fn graph_automorphism_check() {
        // path a-b-c: swapping endpoints of the path is an automorphism,
        // swapping a and b is not
        let mut graph = CommutationGraph::empty(3);
        graph.add_edge(0, 1);
        graph.add_edge(1, 2);
        let swap_ends = SignedPermutation::from_cycles(3, &[vec![0, 2]]).unwrap();
        assert!(swap_ends.is_graph_automorphism(&graph));
        let swap_ab = SignedPermutation::from_cycles(3, &[vec![0, 1]]).unwrap();
        assert!(!swap_ab.is_graph_automorphism(&graph));
    }
}
