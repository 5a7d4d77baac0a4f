//! The descent engine. A level is a presentation of the shape
//!
//!   < base, stable | base commutators, stable-pair commutators,
//!                    t a t^-1 = (letter) >
//!
//! together with one finite-order signed permutation per stable letter
//! extending its partial action. One round embeds the level into an ambient
//! group that splits the chosen stable letter t into xi * zeta, descends to
//! the kernel of the xi-counting quotient, rewrites, simplifies, and
//! saturates the surviving commutations along the remaining actions. The
//! round removes one stable letter of order at least two; when none remain
//! the presentation is in commutator form.
//!
//! A variant descends all stable letters at once through the finite closure
//! of the extensions when the stable letters are free of each other.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};

use crate::autext::{closure, SignedPermutation};
use crate::cert::{
    Certificate, EmbedStep, QuotientStep, RaagStep, RewriteStepData, Step, TargetDesc,
    TietzeLogStep,
};
use crate::error::{Error, Result};
use crate::normalform::{britton_reduce, HnnData, LetterMap, RaagContext, StableLetter, SyllableWord};
use crate::rewrite::{
    reidemeister_schreier, schreier_transversal, simplify, FiniteQuotientMap, QuotientTarget,
};
use crate::words::{
    free_reduce, is_commutator_relator, CommutationGraph, Derivation, Letter, Presentation, Sign,
    TietzeMove, Word,
};

use super::derive::{shaped, transport_commutator};
use super::PipelineOptions;

/// One level of the descent.
#[derive(Clone, Debug)]
pub struct Level {
    pub p: Presentation,
    /// Generator ids of the stable letters, in order.
    pub stable_ids: Vec<usize>,
    /// One extension per stable letter, over the base-slot order of
    /// [`LevelStructure::base_ids`].
    pub extensions: Vec<SignedPermutation>,
}

/// Parsed structure of a level presentation.
#[derive(Clone, Debug)]
pub struct LevelStructure {
    pub base_ids: Vec<usize>,
    pub base_graph: CommutationGraph,
    /// Adjacency among stable indices.
    pub lambda: Vec<BTreeSet<usize>>,
    /// Per stable index: base slot -> image letter over base slots.
    pub arrows: Vec<BTreeMap<usize, Letter>>,
}

impl LevelStructure {
    pub fn base_slot(&self, id: usize) -> Option<usize> {
        self.base_ids.iter().position(|&b| b == id)
    }

    pub fn base_context(&self, p: &Presentation) -> RaagContext {
        let names = self
            .base_ids
            .iter()
            .map(|&id| p.name_of(id).unwrap_or("?").to_string())
            .collect();
        RaagContext::new(names, self.base_graph.clone())
    }
}

/// Classify every relator of a level presentation.
pub fn classify(p: &Presentation, stable_ids: &[usize]) -> Result<LevelStructure> {
    let stable_set: BTreeSet<usize> = stable_ids.iter().copied().collect();
    let base_ids: Vec<usize> = p
        .generators()
        .iter()
        .map(|g| g.id)
        .filter(|id| !stable_set.contains(id))
        .collect();
    let slot_of = |id: usize| base_ids.iter().position(|&b| b == id);
    let stable_index = |id: usize| stable_ids.iter().position(|&s| s == id);
    let mut base_graph = CommutationGraph::empty(base_ids.len());
    let mut lambda = vec![BTreeSet::new(); stable_ids.len()];
    let mut arrows: Vec<BTreeMap<usize, Letter>> = vec![BTreeMap::new(); stable_ids.len()];

    let add_arrow = |t: usize, from: usize, img: Letter, arrows: &mut Vec<BTreeMap<usize, Letter>>| -> Result<()> {
        if let Some(prev) = arrows[t].get(&from) {
            if *prev != img {
                return Err(Error::Other(format!(
                    "conflicting actions of stable letter on base generator (slot {from})"
                )));
            }
            return Ok(());
        }
        arrows[t].insert(from, img);
        Ok(())
    };

    'rel: for r in p.relators() {
        if let Some((a, b)) = is_commutator_relator(r) {
            match (stable_index(a), stable_index(b)) {
                (None, None) => {
                    let (sa, sb) = (slot_of(a).unwrap(), slot_of(b).unwrap());
                    base_graph.add_edge(sa, sb);
                }
                (Some(i), Some(j)) => {
                    lambda[i].insert(j);
                    lambda[j].insert(i);
                }
                (Some(i), None) => {
                    let s = slot_of(b).unwrap();
                    add_arrow(i, s, Letter::plus(s), &mut arrows)?;
                }
                (None, Some(j)) => {
                    let s = slot_of(a).unwrap();
                    add_arrow(j, s, Letter::plus(s), &mut arrows)?;
                }
            }
            continue;
        }
        if r.len() == 4 {
            for k in 0..4 {
                for cand in [r.rotated(k), r.rotated(k).inverse()] {
                    let l = cand.letters();
                    if l[0].sign == Sign::Plus
                        && l[2] == l[0].inverse()
                        && stable_index(l[0].gen).is_some()
                        && slot_of(l[1].gen).is_some()
                        && slot_of(l[3].gen).is_some()
                    {
                        // t x^s t^-1 y^d = 1, so t x^s t^-1 = y^-d
                        let t = stable_index(l[0].gen).unwrap();
                        let x = slot_of(l[1].gen).unwrap();
                        let y = slot_of(l[3].gen).unwrap();
                        let img = match l[1].sign {
                            Sign::Plus => Letter::new(y, l[3].sign.flip()),
                            Sign::Minus => Letter::new(y, l[3].sign),
                        };
                        add_arrow(t, x, img, &mut arrows)?;
                        continue 'rel;
                    }
                }
            }
        }
        return Err(Error::Other(format!(
            "relator {} does not fit the descent shape",
            p.display_word(r)
        )));
    }
    // arrows must be injective per stable letter
    for map in &arrows {
        let mut hit = BTreeSet::new();
        for img in map.values() {
            if !hit.insert(img.gen) {
                return Err(Error::Other("stable-letter action is not injective".into()));
            }
        }
    }
    Ok(LevelStructure { base_ids, base_graph, lambda, arrows })
}

impl Level {
    pub fn new(p: Presentation, stable_ids: Vec<usize>, extensions: Vec<SignedPermutation>) -> Result<Level> {
        let level = Level { p, stable_ids, extensions };
        level.validate()?;
        Ok(level)
    }

    pub fn structure(&self) -> Result<LevelStructure> {
        classify(&self.p, &self.stable_ids)
    }

    fn validate(&self) -> Result<()> {
        let s = self.structure()?;
        if self.extensions.len() != self.stable_ids.len() {
            return Err(Error::Other("one extension required per stable letter".into()));
        }
        for (i, ext) in self.extensions.iter().enumerate() {
            if ext.len() != s.base_ids.len() {
                return Err(Error::Other("extension acts on the wrong set".into()));
            }
            for (&from, &img) in &s.arrows[i] {
                if ext.apply(Letter::plus(from)) != img {
                    return Err(Error::NoValidExtension(format!(
                        "extension of stable letter {} does not restrict to its action",
                        self.p.name_of(self.stable_ids[i]).unwrap_or("?")
                    )));
                }
            }
            if !ext.is_graph_automorphism(&s.base_graph) {
                return Err(Error::NoValidExtension(format!(
                    "extension of stable letter {} does not preserve the commutation graph",
                    self.p.name_of(self.stable_ids[i]).unwrap_or("?")
                )));
            }
        }
        for i in 0..self.extensions.len() {
            for j in i + 1..self.extensions.len() {
                if !self.extensions[i].commutes_with(&self.extensions[j]) {
                    return Err(Error::ExtensionsDoNotCommute(format!(
                        "{} and {}",
                        self.p.name_of(self.stable_ids[i]).unwrap_or("?"),
                        self.p.name_of(self.stable_ids[j]).unwrap_or("?")
                    )));
                }
            }
        }
        Ok(())
    }
}

fn fresh_name(p: &Presentation, base: &str) -> String {
    let mut name = base.to_string();
    while p.id_by_name(&name).is_some() {
        name.push('_');
    }
    name
}

/// Assemble the ambient presentation for one round: the level with stable
/// letter `c` replaced by xi and zeta.
struct Ambient {
    p: Presentation,
    /// image word per source generator slot
    images: Vec<Word>,
    xi: usize,
    r: usize,
}

fn build_ambient(level: &Level, s: &LevelStructure, c: usize, round: usize, bound: usize) -> Result<Ambient> {
    let source = &level.p;
    let r = level.extensions[c].order(bound)?;
    let zeta_name = fresh_name(source, &format!("zeta{round}"));
    let xi_name = fresh_name(source, &format!("xi{round}"));

    let mut p = Presentation::default();
    let mut new_id: BTreeMap<usize, usize> = BTreeMap::new();
    for &bid in &s.base_ids {
        let id = p.push_generator(source.name_of(bid).unwrap())?;
        new_id.insert(bid, id);
    }
    for (i, &tid) in level.stable_ids.iter().enumerate() {
        if i == c {
            continue;
        }
        let id = p.push_generator(source.name_of(tid).unwrap())?;
        new_id.insert(tid, id);
    }
    let zeta = p.push_generator(&zeta_name)?;
    let xi = p.push_generator(&xi_name)?;

    let base_new = |slot: usize| new_id[&s.base_ids[slot]];
    // base commutators
    for (a, b) in s.base_graph.edges() {
        p.push_relator(Word::commutator(&Word::single(base_new(a)), &Word::single(base_new(b))))?;
    }
    // stable-pair commutators among the others
    for i in 0..level.stable_ids.len() {
        for &j in &s.lambda[i] {
            if i < j && i != c && j != c {
                p.push_relator(Word::commutator(
                    &Word::single(new_id[&level.stable_ids[i]]),
                    &Word::single(new_id[&level.stable_ids[j]]),
                ))?;
            }
        }
    }
    // actions of the others
    for (i, &tid) in level.stable_ids.iter().enumerate() {
        if i == c {
            continue;
        }
        let t = new_id[&tid];
        for (&from, &img) in &s.arrows[i] {
            let img_letter = Letter::new(base_new(img.gen), img.sign);
            p.push_relator(free_reduce(
                &Word::single(t)
                    .concat(&Word::single(base_new(from)))
                    .concat(&Word::single(t).inverse())
                    .concat(&Word::letter(img_letter).inverse()),
            ))?;
        }
    }
    // [t_i, zeta] for lambda-adjacent letters, [t_i, xi] for every other letter
    for (i, &tid) in level.stable_ids.iter().enumerate() {
        if i == c {
            continue;
        }
        if s.lambda[c].contains(&i) {
            p.push_relator(Word::commutator(&Word::single(new_id[&tid]), &Word::single(zeta)))?;
        }
    }
    for (i, &tid) in level.stable_ids.iter().enumerate() {
        if i == c {
            continue;
        }
        p.push_relator(Word::commutator(&Word::single(new_id[&tid]), &Word::single(xi)))?;
    }
    // [zeta, a] on the action domain
    for &from in s.arrows[c].keys() {
        p.push_relator(Word::commutator(&Word::single(zeta), &Word::single(base_new(from))))?;
    }
    // xi k xi^-1 = extension(k) for every base generator
    for slot in 0..s.base_ids.len() {
        let img = level.extensions[c].apply(Letter::plus(slot));
        let img_letter = Letter::new(base_new(img.gen), img.sign);
        p.push_relator(free_reduce(
            &Word::single(xi)
                .concat(&Word::single(base_new(slot)))
                .concat(&Word::single(xi).inverse())
                .concat(&Word::letter(img_letter).inverse()),
        ))?;
    }

    // images of the embedding
    let mut images = Vec::new();
    for g in source.generators() {
        if g.id == level.stable_ids[c] {
            images.push(Word::single(xi).concat(&Word::single(zeta)));
        } else {
            images.push(Word::single(new_id[&g.id]));
        }
    }
    Ok(Ambient { p, images, xi, r })
}

/// Produce the per-relator derivations of the embedding.
fn embed_derivations(
    level: &Level,
    _s: &LevelStructure,
    c: usize,
    ambient: &Ambient,
) -> Result<Vec<Derivation>> {
    let source = &level.p;
    let image_of = |w: &Word| -> Word {
        let mut out = Word::empty();
        for l in w.letters() {
            let slot = source.slot_of(l.gen).unwrap();
            let img = &ambient.images[slot];
            out = out.concat(&match l.sign {
                Sign::Plus => img.clone(),
                Sign::Minus => img.inverse(),
            });
        }
        free_reduce(&out)
    };
    let tc = level.stable_ids[c];
    let mut out = Vec::new();
    for r in source.relators() {
        if !r.support().contains(&tc) {
            // maps to a literal relator of the ambient presentation
            out.push(vec![shaped(&ambient.p, &image_of(r), &Word::empty(), false)?]);
            continue;
        }
        // normalize r = a * core^delta * a^-1 with core one of the two
        // canonical split shapes
        let mut handled = false;
        'search: for k in 0..r.len() {
            for delta_inv in [false, true] {
                let body = if delta_inv { r.inverse() } else { r.clone() };
                let prefix = Word::from_letters(body.letters()[..k].to_vec());
                let core = free_reduce(&body.rotated(k));
                let l = core.letters();
                // commutator [t_c, t_j]
                if let Some((a, b)) = is_commutator_relator(&core) {
                    let (a, b) = if a == tc { (a, b) } else { (b, a) };
                    if a != tc {
                        continue;
                    }
                    if !level.stable_ids.contains(&b) {
                        continue;
                    }
                    if l[0].gen != tc || l[0].sign != Sign::Plus {
                        continue; // try other rotations for the exact [t_c, t_j] spelling
                    }
                    // image of [t_c, t_j] = xi zeta t_j zeta^-1 xi^-1 t_j^-1
                    let tj = ambient.p.id_by_name(source.name_of(b).unwrap()).unwrap();
                    let xi_w = Word::single(ambient.xi);
                    let zeta_id = ambient.images[source.slot_of(tc).unwrap()].letters()[1].gen;
                    let zeta_w = Word::single(zeta_id);
                    let mut d: Derivation = vec![
                        shaped(
                            &ambient.p,
                            &Word::commutator(&zeta_w, &Word::single(tj)),
                            &xi_w,
                            false,
                        )?,
                        shaped(
                            &ambient.p,
                            &Word::commutator(&xi_w, &Word::single(tj)),
                            &Word::empty(),
                            false,
                        )?,
                    ];
                    if delta_inv {
                        d = invert_derivation(&d);
                    }
                    let conj = image_of(&if delta_inv { prefix.clone() } else { prefix.clone() });
                    d = conjugate_derivation(&d, &image_of_prefix(source, &ambient.images, &prefix, delta_inv));
                    let _ = conj;
                    out.push(d);
                    handled = true;
                    break 'search;
                }
                // action relator t_c x^s t_c^-1 y^d
                if core.len() == 4
                    && l[0].gen == tc
                    && l[0].sign == Sign::Plus
                    && l[2] == l[0].inverse()
                    && source.slot_of(l[1].gen).is_some()
                    && source.slot_of(l[3].gen).is_some()
                {
                    let a_letter = l[1];
                    let b_letter = l[3];
                    let a_new = Word::letter(Letter::new(
                        ambient.p.id_by_name(source.name_of(a_letter.gen).unwrap()).unwrap(),
                        a_letter.sign,
                    ));
                    let b_new = Word::letter(Letter::new(
                        ambient.p.id_by_name(source.name_of(b_letter.gen).unwrap()).unwrap(),
                        b_letter.sign,
                    ));
                    let xi_w = Word::single(ambient.xi);
                    let zeta_id = ambient.images[source.slot_of(tc).unwrap()].letters()[1].gen;
                    let zeta_w = Word::single(zeta_id);
                    // xi [zeta, a] xi^-1 * (xi a xi^-1 b)
                    let conj_shape = free_reduce(
                        &xi_w
                            .concat(&a_new)
                            .concat(&xi_w.inverse())
                            .concat(&b_new),
                    );
                    let mut d: Derivation = vec![
                        shaped(
                            &ambient.p,
                            &Word::commutator(&zeta_w, &a_new),
                            &xi_w,
                            false,
                        )?,
                        shaped(&ambient.p, &conj_shape, &Word::empty(), false)?,
                    ];
                    if delta_inv {
                        d = invert_derivation(&d);
                    }
                    d = conjugate_derivation(&d, &image_of_prefix(source, &ambient.images, &prefix, delta_inv));
                    out.push(d);
                    handled = true;
                    break 'search;
                }
            }
        }
        if !handled {
            return Err(Error::Other(format!(
                "no embedding derivation for relator {}",
                source.display_word(r)
            )));
        }
    }
    Ok(out)
}

fn image_of_prefix(source: &Presentation, images: &[Word], prefix: &Word, _inv: bool) -> Word {
    let mut out = Word::empty();
    for l in prefix.letters() {
        let slot = source.slot_of(l.gen).unwrap();
        let img = &images[slot];
        out = out.concat(&match l.sign {
            Sign::Plus => img.clone(),
            Sign::Minus => img.inverse(),
        });
    }
    free_reduce(&out)
}

fn invert_derivation(d: &Derivation) -> Derivation {
    d.iter()
        .rev()
        .map(|f| crate::words::DerivationFactor {
            relator: f.relator,
            inverted: !f.inverted,
            conjugator: f.conjugator.clone(),
        })
        .collect()
}

fn conjugate_derivation(d: &Derivation, c: &Word) -> Derivation {
    d.iter()
        .map(|f| crate::words::DerivationFactor {
            relator: f.relator,
            inverted: f.inverted,
            conjugator: free_reduce(&c.concat(&f.conjugator)),
        })
        .collect()
}

/// Saturate derived commutations: whenever [x, y] holds and a stable letter
/// maps x to x' and y to y', record [x', y'] with its transport derivation.
fn saturate(mut p: Presentation, stable_ids: &[usize]) -> Result<Presentation> {
    loop {
        let s = classify(&p, stable_ids)?;
        let mut added = false;
        'outer: for (t_idx, &tid) in stable_ids.iter().enumerate() {
            let map = &s.arrows[t_idx];
            for (&u, &lu) in map {
                for (&v, &lv) in map {
                    if u >= v {
                        continue;
                    }
                    if !s.base_graph.has_edge(u, v) || s.base_graph.has_edge(lu.gen, lv.gen) {
                        continue;
                    }
                    let idw = |slot: usize| Word::single(s.base_ids[slot]);
                    let letter_w =
                        |l: Letter| Word::letter(Letter::new(s.base_ids[l.gen], l.sign));
                    let target =
                        free_reduce(&Word::commutator(&letter_w(lu), &letter_w(lv)));
                    let derivation = transport_commutator(
                        &p,
                        tid,
                        &idw(u),
                        &letter_w(lu),
                        &idw(v),
                        &letter_w(lv),
                    )?;
                    p = p.apply_tietze(&TietzeMove::AddRelator { word: target, derivation })?;
                    added = true;
                    continue 'outer;
                }
            }
        }
        if !added {
            return Ok(p);
        }
    }
}

/// Complete a partial action to a signed permutation that preserves the
/// commutation graph: identity where possible, link-matching otherwise.
pub fn complete_to_graph_automorphism(
    graph: &CommutationGraph,
    arrows: &BTreeMap<usize, Letter>,
) -> Result<SignedPermutation> {
    let n = graph.n;
    let mut image: Vec<Option<Letter>> = vec![None; n];
    for (&from, &img) in arrows {
        image[from] = Some(img);
    }
    let mut hit: BTreeSet<usize> = arrows.values().map(|l| l.gen).collect();
    // identity for untouched slots when free
    for u in 0..n {
        if image[u].is_none() && !hit.contains(&u) {
            image[u] = Some(Letter::plus(u));
            hit.insert(u);
        }
    }
    // link matching for the rest
    loop {
        let uncovered: Vec<usize> = (0..n).filter(|&u| image[u].is_none()).collect();
        if uncovered.is_empty() {
            break;
        }
        let free_targets: Vec<usize> = (0..n).filter(|v| !hit.contains(v)).collect();
        let mut assigned = false;
        for &u in &uncovered {
            let candidates: Vec<usize> = free_targets
                .iter()
                .copied()
                .filter(|&v| {
                    graph.adj[v].len() == graph.adj[u].len()
                        && (0..n).all(|w| match image[w] {
                            Some(lw) => graph.has_edge(u, w) == graph.has_edge(v, lw.gen),
                            None => true,
                        })
                })
                .collect();
            if let Some(&v) = candidates.first() {
                image[u] = Some(Letter::plus(v));
                hit.insert(v);
                assigned = true;
                break;
            }
        }
        if !assigned {
            return Err(Error::NoValidExtension(
                "no completion of the action preserves the commutation graph".into(),
            ));
        }
    }
    let perm = SignedPermutation::from_images(image.into_iter().map(|o| o.unwrap()).collect())
        .map_err(|e| Error::NoValidExtension(e.to_string()))?;
    if !perm.is_graph_automorphism(graph) {
        return Err(Error::NoValidExtension(
            "completed action does not preserve the commutation graph".into(),
        ));
    }
    Ok(perm)
}

/// Try to present the level as a one-step HNN extension over a commutator
/// base: possible when every stable letter except `special` acts as the
/// identity on its domain. Returns the base context, the letter map of the
/// special letter, and the base ids in context order.
pub fn one_level_hnn(level: &Level, special: usize) -> Result<Option<(HnnData, Vec<usize>)>> {
    let s = level.structure()?;
    for (i, map) in s.arrows.iter().enumerate() {
        if i == special {
            continue;
        }
        if map.iter().any(|(&from, &img)| img != Letter::plus(from)) {
            return Ok(None);
        }
    }
    // base = everything except the special letter; edges: base graph,
    // lambda edges among others, identity-action edges, adjacency of others
    let mut ids = s.base_ids.clone();
    for (i, &tid) in level.stable_ids.iter().enumerate() {
        if i != special {
            ids.push(tid);
        }
    }
    let names: Vec<String> = ids
        .iter()
        .map(|&id| level.p.name_of(id).unwrap().to_string())
        .collect();
    let mut graph = CommutationGraph::empty(ids.len());
    let slot = |id: usize| ids.iter().position(|&x| x == id).unwrap();
    for (a, b) in s.base_graph.edges() {
        graph.add_edge(slot(s.base_ids[a]), slot(s.base_ids[b]));
    }
    for i in 0..level.stable_ids.len() {
        if i == special {
            continue;
        }
        for &j in &s.lambda[i] {
            if j != special && i < j {
                graph.add_edge(slot(level.stable_ids[i]), slot(level.stable_ids[j]));
            }
        }
        for &from in s.arrows[i].keys() {
            graph.add_edge(slot(level.stable_ids[i]), slot(s.base_ids[from]));
        }
    }
    let base = RaagContext::new(names, graph);
    // letter map of the special letter: its arrows plus fixed adjacent letters
    let mut pairs: Vec<(usize, Letter)> = s.arrows[special]
        .iter()
        .map(|(&from, &img)| {
            (slot(s.base_ids[from]), Letter::new(slot(s.base_ids[img.gen]), img.sign))
        })
        .collect();
    for &j in &s.lambda[special] {
        let tslot = slot(level.stable_ids[j]);
        pairs.push((tslot, Letter::plus(tslot)));
    }
    let map = LetterMap::new(pairs)?;
    let name = level.p.name_of(level.stable_ids[special]).unwrap().to_string();
    Ok(Some((HnnData { base, stable: vec![StableLetter { name, map }] }, ids)))
}

/// Generate a Britton-reduced word with `n` occurrences of the special
/// stable letter, signs non-increasing, and nonempty base chunks kept out
/// of the pinch subgroups.
pub fn random_reduced_word(
    h: &HnnData,
    rng: &mut impl Rng,
    n: usize,
    monotone: bool,
) -> SyllableWord {
    let nb = h.base.gens.len();
    let letter_map = &h.stable[0].map;
    let random_chunk = |rng: &mut dyn rand::RngCore, avoid: Option<&BTreeSet<usize>>| -> Word {
        loop {
            let len = 1 + (rng.next_u32() as usize) % 3;
            let letters: Vec<Letter> = (0..len)
                .map(|_| {
                    Letter::new(
                        (rng.next_u32() as usize) % nb,
                        if rng.next_u32() % 2 == 0 { Sign::Plus } else { Sign::Minus },
                    )
                })
                .collect();
            let w = crate::normalform::raag_normal_form(&Word::from_letters(letters), &h.base);
            if w.is_empty() {
                continue;
            }
            if let Some(avoid) = avoid {
                if w.support().is_subset(avoid) {
                    continue;
                }
            }
            return w;
        }
    };
    // sign pattern: monotone (plus then minus) or arbitrary
    let mut signs = Vec::new();
    if monotone {
        let plus = rng.gen_range(0..=n);
        for i in 0..n {
            signs.push(if i < plus { Sign::Plus } else { Sign::Minus });
        }
    } else {
        for _ in 0..n {
            signs.push(if rng.gen_bool(0.5) { Sign::Plus } else { Sign::Minus });
        }
    }
    let dom = letter_map.domain_set();
    let cod = letter_map.codomain();
    let mut w = SyllableWord::base(random_chunk(rng, None));
    for (k, &sign) in signs.iter().enumerate() {
        w.push_stable(0, sign);
        // the chunk after this letter must avoid the pinch subgroup when the
        // next letter has the opposite sign
        let avoid = if k + 1 < n && signs[k + 1] != sign {
            Some(match sign {
                Sign::Plus => &dom,
                Sign::Minus => &cod,
            })
        } else {
            None
        };
        w.push_base(&random_chunk(rng, avoid.map(|s| s as &BTreeSet<usize>)));
    }
    w
}

/// Map a syllable word through the embedding of one round: the special
/// letter becomes xi followed by zeta in the base.
pub fn embed_syllable_word(
    w: &SyllableWord,
    _ambient: &HnnData,
    zeta_slot: usize,
) -> SyllableWord {
    let mut out = SyllableWord::base(w.head.clone());
    for (_, sign, seg) in &w.tail {
        out.push_stable(0, *sign);
        match sign {
            Sign::Plus => {
                out.push_base(&Word::single(zeta_slot).concat(seg));
            }
            Sign::Minus => {
                // t^-1 = zeta^-1 xi^-1: the zeta^-1 goes before xi^-1,
                // i.e. into the previous chunk
                // handled by caller ordering: here we emit xi^-1 then seg,
                // with zeta^-1 appended to the chunk before the letter
                out.push_base(seg);
            }
        }
    }
    // second pass to insert zeta^-1 before negative letters
    let mut rebuilt = SyllableWord::base(out.head.clone());
    for (idx, (s, sign, seg)) in out.tail.iter().enumerate() {
        if *sign == Sign::Minus {
            rebuilt.push_base(&Word::letter(Letter::minus(zeta_slot)));
        }
        rebuilt.push_stable(*s, *sign);
        rebuilt.push_base(seg);
        let _ = idx;
    }
    rebuilt
}

/// Run injectivity sampling for one round when the structures allow it.
fn sample_injectivity(
    level: &Level,
    c: usize,
    opts: &PipelineOptions,
) -> Result<(usize, usize)> {
    let Some((source_h, source_ids)) = one_level_hnn(level, c)? else {
        return Ok((opts.inject_check_len, 0));
    };
    // ambient structure: base extended by zeta; stable letter xi acting by
    // the extension on old base and identity on the other letters
    let s = level.structure()?;
    let mut names = source_h.base.gens.clone();
    let zeta_slot = names.len();
    names.push("zeta*".to_string());
    let mut graph = CommutationGraph::empty(names.len());
    for (a, b) in source_h.base.graph.edges() {
        graph.add_edge(a, b);
    }
    let slot_of_id = |id: usize| source_ids.iter().position(|&x| x == id).unwrap();
    for &from in s.arrows[c].keys() {
        graph.add_edge(zeta_slot, slot_of_id(s.base_ids[from]));
    }
    for &j in &s.lambda[c] {
        graph.add_edge(zeta_slot, slot_of_id(level.stable_ids[j]));
    }
    let base = RaagContext::new(names, graph);
    let mut pairs: Vec<(usize, Letter)> = Vec::new();
    for bslot in 0..s.base_ids.len() {
        let img = level.extensions[c].apply(Letter::plus(bslot));
        pairs.push((
            slot_of_id(s.base_ids[bslot]),
            Letter::new(slot_of_id(s.base_ids[img.gen]), img.sign),
        ));
    }
    for (i, &tid) in level.stable_ids.iter().enumerate() {
        if i != c {
            let t = slot_of_id(tid);
            pairs.push((t, Letter::plus(t)));
        }
    }
    let map = LetterMap::new(pairs)?;
    let ambient = HnnData {
        base,
        stable: vec![StableLetter { name: "xi*".into(), map }],
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(97));
    let mut checked = 0usize;
    for _ in 0..40 {
        let n = 1 + (rng.gen_range(0..opts.inject_check_len.max(1)));
        let w = random_reduced_word(&source_h, &mut rng, n, false);
        let image = embed_syllable_word(&w, &ambient, zeta_slot);
        let reduced = britton_reduce(&image, &ambient);
        if reduced.is_base() && crate::normalform::raag_trivial(&reduced.head, &ambient.base) {
            return Err(Error::Other(
                "injectivity sampling found a nontrivial word with trivial image".into(),
            ));
        }
        checked += 1;
    }
    Ok((opts.inject_check_len, checked))
}

/// One descent round. Returns the certificate steps and the next level,
/// or the terminal step when every extension has order one.
pub fn descend_once(
    level: &Level,
    round: usize,
    opts: &PipelineOptions,
) -> Result<(Vec<Step>, Option<Level>)> {
    let s = level.structure()?;
    let mut chosen = None;
    for (i, ext) in level.extensions.iter().enumerate() {
        if ext.order(opts.bound)? >= 2 {
            chosen = Some(i);
            break;
        }
    }
    let Some(c) = chosen else {
        let graph = level.p.raag_graph().ok_or_else(|| {
            Error::Other("descent finished but the presentation is not in commutator form".into())
        })?;
        let edges = graph
            .edges()
            .into_iter()
            .map(|(a, b)| {
                (
                    level.p.generators()[a].name.clone(),
                    level.p.generators()[b].name.clone(),
                )
            })
            .collect();
        let step = Step::RaagReached(RaagStep { presentation: level.p.clone(), edges });
        return Ok((vec![step], None));
    };

    let ambient = build_ambient(level, &s, c, round, opts.bound)?;
    let derivations = embed_derivations(level, &s, c, &ambient)?;
    let (inject_bound, inject_words) = sample_injectivity(level, c, opts)?;
    let embed = EmbedStep {
        source: level.p.clone(),
        target: ambient.p.clone(),
        images: ambient.images.clone(),
        derivations,
        inject_bound,
        inject_words,
    };
    // sanity: the derivations expand to the images
    for (ri, r) in embed.source.relators().iter().enumerate() {
        let img = embed.image_of_word(r, &embed.source);
        let exp = crate::words::expand_derivation(&embed.derivations[ri], embed.target.relators())?;
        if img != exp {
            return Err(Error::Other(format!(
                "internal: embedding derivation mismatch on relator {}",
                embed.source.display_word(r)
            )));
        }
    }

    let mut images = vec![0usize; ambient.p.num_generators()];
    let xi_slot = ambient.p.slot_of(ambient.xi).unwrap();
    images[xi_slot] = 1 % ambient.r;
    let q = FiniteQuotientMap::new(ambient.p.clone(), QuotientTarget::Cyclic(ambient.r), images.clone())?;
    let t = schreier_transversal(&q)?;
    let quotient_step = QuotientStep {
        source: ambient.p.clone(),
        target: TargetDesc::Cyclic(ambient.r),
        images,
        transversal: t.words.clone(),
    };

    let kernel = reidemeister_schreier(&q, &t)?;
    let rewrite_step = RewriteStepData {
        kernel: kernel.presentation.clone(),
        gen_origin: kernel.gen_origin.clone(),
        relator_origin: kernel.relator_origin.clone(),
    };

    let simplified = simplify(&kernel)?;
    // surviving stable letters keep their names
    let next_stable_ids: Vec<usize> = level
        .stable_ids
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != c)
        .map(|(_, &tid)| {
            simplified
                .id_by_name(level.p.name_of(tid).unwrap())
                .ok_or_else(|| Error::Other("a stable letter vanished during simplification".into()))
        })
        .collect::<Result<_>>()?;
    let saturated = saturate(simplified, &next_stable_ids)?;
    let tietze_step = TietzeLogStep {
        moves: saturated.log().to_vec(),
        result: saturated.clone(),
    };

    // next level extensions
    let ns = classify(&saturated, &next_stable_ids)?;
    let mut next_exts = Vec::new();
    for map in &ns.arrows {
        next_exts.push(complete_to_graph_automorphism(&ns.base_graph, map)?);
    }
    let next = Level::new(saturated, next_stable_ids, next_exts)?;
    Ok((
        vec![
            Step::Embed(embed),
            Step::FiniteQuotient(quotient_step),
            Step::Rewrite(rewrite_step),
            Step::Tietze(tietze_step),
        ],
        Some(next),
    ))
}

/// Iterated descent for a level whose stable letters may commute; each
/// round removes one letter of order at least two.
pub fn raag_stable_steps(level: Level, opts: &PipelineOptions) -> Result<Vec<Step>> {
    let mut out = Vec::new();
    let mut cur = level;
    let mut round = 1;
    loop {
        let (steps, next) = descend_once(&cur, round, opts)?;
        out.extend(steps);
        match next {
            Some(n) => cur = n,
            None => return Ok(out),
        }
        round += 1;
        if round > 64 {
            return Err(Error::Other("descent did not terminate".into()));
        }
    }
}

pub fn raag_stable_pipeline(
    level: Level,
    input_text: &str,
    opts: &PipelineOptions,
) -> Result<Certificate> {
    let mut cert = Certificate::new("lemma1", input_text);
    cert.steps = raag_stable_steps(level, opts)?;
    Ok(cert)
}

/// One-shot descent through the finite closure of the extensions; requires
/// the stable letters to be free of one another.
pub fn finite_closure_pipeline(
    level: Level,
    input_text: &str,
    opts: &PipelineOptions,
) -> Result<Certificate> {
    let mut cert = Certificate::new("lemma2", input_text);
    cert.steps = finite_closure_steps(level, opts)?;
    Ok(cert)
}

pub fn finite_closure_steps(level: Level, opts: &PipelineOptions) -> Result<Vec<Step>> {
    let mut cert = Certificate::new("lemma2", "");
    let s = level.structure()?;
    if s.lambda.iter().any(|adj| !adj.is_empty()) {
        return Err(Error::Other(
            "the one-shot descent requires stable letters free of one another".into(),
        ));
    }
    if level.stable_ids.is_empty() {
        let graph = level
            .p
            .raag_graph()
            .ok_or_else(|| Error::Other("no stable letters and not in commutator form".into()))?;
        let edges = graph
            .edges()
            .into_iter()
            .map(|(a, b)| (level.p.generators()[a].name.clone(), level.p.generators()[b].name.clone()))
            .collect();
        cert.steps.push(Step::RaagReached(RaagStep { presentation: level.p, edges }));
        return Ok(cert.steps);
    }
    let group = closure(&level.extensions, opts.bound)?;

    // ambient: base + xi_i + zeta_i
    let source = &level.p;
    let mut p = Presentation::default();
    let mut new_id = BTreeMap::new();
    for &bid in &s.base_ids {
        let id = p.push_generator(source.name_of(bid).unwrap())?;
        new_id.insert(bid, id);
    }
    let mut xis = Vec::new();
    let mut zetas = Vec::new();
    for i in 0..level.stable_ids.len() {
        let xi = p.push_generator(&fresh_name(&p, &format!("xi{}", i + 1)))?;
        xis.push(xi);
        let zeta = p.push_generator(&fresh_name(&p, &format!("zeta{}", i + 1)))?;
        zetas.push(zeta);
    }
    let base_new = |slot: usize| new_id[&s.base_ids[slot]];
    for (a, b) in s.base_graph.edges() {
        p.push_relator(Word::commutator(&Word::single(base_new(a)), &Word::single(base_new(b))))?;
    }
    // multiplication-table relators of the closure, spelled in the xi's
    for w in group.table_relators() {
        let spelled = Word::from_letters(
            w.letters().iter().map(|l| Letter::new(xis[l.gen], l.sign)).collect(),
        );
        p.push_relator(free_reduce(&spelled))?;
    }
    for (i, _) in level.stable_ids.iter().enumerate() {
        for &from in s.arrows[i].keys() {
            p.push_relator(Word::commutator(&Word::single(zetas[i]), &Word::single(base_new(from))))?;
        }
    }
    for (i, _) in level.stable_ids.iter().enumerate() {
        for slot in 0..s.base_ids.len() {
            let img = level.extensions[i].apply(Letter::plus(slot));
            p.push_relator(free_reduce(
                &Word::single(xis[i])
                    .concat(&Word::single(base_new(slot)))
                    .concat(&Word::single(xis[i]).inverse())
                    .concat(&Word::letter(Letter::new(base_new(img.gen), img.sign)).inverse()),
            ))?;
        }
    }

    let mut images = Vec::new();
    for g in source.generators() {
        if let Some(i) = level.stable_ids.iter().position(|&t| t == g.id) {
            images.push(Word::single(xis[i]).concat(&Word::single(zetas[i])));
        } else {
            images.push(Word::single(new_id[&g.id]));
        }
    }
    // derivations
    let mut derivations = Vec::new();
    for r in source.relators() {
        let tpos = r
            .letters()
            .iter()
            .find_map(|l| level.stable_ids.iter().position(|&t| t == l.gen));
        if tpos.is_none() {
            let mut img = Word::empty();
            for l in r.letters() {
                let slot = source.slot_of(l.gen).unwrap();
                img = img.concat(&match l.sign {
                    Sign::Plus => images[slot].clone(),
                    Sign::Minus => images[slot].inverse(),
                });
            }
            derivations.push(vec![shaped(&p, &free_reduce(&img), &Word::empty(), false)?]);
            continue;
        }
        let i = tpos.unwrap();
        let tc = level.stable_ids[i];
        // normalize to t a t^-1 b
        let mut found = None;
        'srch: for k in 0..r.len() {
            for delta_inv in [false, true] {
                let body = if delta_inv { r.inverse() } else { r.clone() };
                let prefix = Word::from_letters(body.letters()[..k].to_vec());
                let core = free_reduce(&body.rotated(k));
                let l = core.letters();
                if core.len() == 4 && l[0].gen == tc && l[0].sign == Sign::Plus && l[2] == l[0].inverse() {
                    found = Some((delta_inv, prefix, core.clone()));
                    break 'srch;
                }
            }
        }
        let Some((delta_inv, prefix, core)) = found else {
            return Err(Error::Other(format!(
                "relator {} does not fit the one-shot shape",
                source.display_word(r)
            )));
        };
        let l = core.letters();
        let a_new = Word::letter(Letter::new(
            p.id_by_name(source.name_of(l[1].gen).unwrap()).unwrap(),
            l[1].sign,
        ));
        let b_new = Word::letter(Letter::new(
            p.id_by_name(source.name_of(l[3].gen).unwrap()).unwrap(),
            l[3].sign,
        ));
        let xi_w = Word::single(xis[i]);
        let zeta_w = Word::single(zetas[i]);
        let conj_shape =
            free_reduce(&xi_w.concat(&a_new).concat(&xi_w.inverse()).concat(&b_new));
        let mut d: Derivation = vec![
            shaped(&p, &Word::commutator(&zeta_w, &a_new), &xi_w, false)?,
            shaped(&p, &conj_shape, &Word::empty(), false)?,
        ];
        if delta_inv {
            d = invert_derivation(&d);
        }
        d = conjugate_derivation(&d, &image_of_prefix(source, &images, &prefix, delta_inv));
        derivations.push(d);
    }

    // the one-shot ambient is not a single-letter extension; injectivity
    // evidence here is the derivation set, recorded with zero sampled words
    let (inject_bound, inject_words) = (opts.inject_check_len, 0usize);
    let embed = EmbedStep {
        source: source.clone(),
        target: p.clone(),
        images: images.clone(),
        derivations,
        inject_bound,
        inject_words,
    };
    for (ri, r) in embed.source.relators().iter().enumerate() {
        let img = embed.image_of_word(r, &embed.source);
        let exp = crate::words::expand_derivation(&embed.derivations[ri], embed.target.relators())?;
        if img != exp {
            return Err(Error::Other(format!(
                "internal: one-shot derivation mismatch on relator {}",
                embed.source.display_word(r)
            )));
        }
    }
    cert.steps.push(Step::Embed(embed));

    // quotient onto the closure
    let mut q_images = vec![0usize; p.num_generators()];
    for (i, &xi) in xis.iter().enumerate() {
        let elem = group
            .index_of(&level.extensions[i])
            .ok_or_else(|| Error::Other("closure misses a generator".into()))?;
        q_images[p.slot_of(xi).unwrap()] = elem;
    }
    let target = QuotientTarget::Perm(group.clone());
    let q = FiniteQuotientMap::new(p.clone(), target, q_images.clone())?;
    let t = schreier_transversal(&q)?;
    cert.steps.push(Step::FiniteQuotient(QuotientStep {
        source: p.clone(),
        target: TargetDesc::Perm {
            degree: s.base_ids.len(),
            gens: level.extensions.clone(),
            order: group.order(),
        },
        images: q_images,
        transversal: t.words.clone(),
    }));

    let kernel = reidemeister_schreier(&q, &t)?;
    cert.steps.push(Step::Rewrite(RewriteStepData {
        kernel: kernel.presentation.clone(),
        gen_origin: kernel.gen_origin.clone(),
        relator_origin: kernel.relator_origin.clone(),
    }));

    let simplified = simplify(&kernel)?;
    cert.steps.push(Step::Tietze(TietzeLogStep {
        moves: simplified.log().to_vec(),
        result: simplified.clone(),
    }));

    let graph = simplified.raag_graph().ok_or_else(|| {
        Error::Other("one-shot descent did not reach commutator form".into())
    })?;
    let edges = graph
        .edges()
        .into_iter()
        .map(|(a, b)| {
            (
                simplified.generators()[a].name.clone(),
                simplified.generators()[b].name.clone(),
            )
        })
        .collect();
    cert.steps.push(Step::RaagReached(RaagStep { presentation: simplified, edges }));
    Ok(cert.steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// K = Z^2 on a,b; one stable letter t with t a t^-1 = b; extension the
    /// transposition (a b) of order 2.
    fn simple_level() -> Level {
        let mut p = Presentation::new(&["a", "b", "t"]).unwrap();
        p.push_relator(Word::commutator(&Word::single(0), &Word::single(1))).unwrap();
        p.push_relator(
            Word::single(2)
                .concat(&Word::single(0))
                .concat(&Word::single(2).inverse())
                .concat(&Word::single(1).inverse()),
        )
        .unwrap();
        let ext = SignedPermutation::from_cycles(2, &[vec![0, 1]]).unwrap();
        Level::new(p, vec![2], vec![ext]).unwrap()
    }

    #[test]
    fn classify_simple_level() {
        let level = simple_level();
        let s = level.structure().unwrap();
        assert_eq!(s.base_ids, vec![0, 1]);
        assert_eq!(s.base_graph.edges(), vec![(0, 1)]);
        assert_eq!(s.arrows[0].get(&0), Some(&Letter::plus(1)));
    }

    #[test]
    fn single_round_reaches_commutator_form() {
        let level = simple_level();
        let opts = PipelineOptions::default();
        let cert = raag_stable_pipeline(level, "test", &opts).unwrap();
        let last = cert.steps.last().unwrap();
        assert_eq!(last.kind(), "raag-reached");
        crate::cert::verify(&cert).unwrap();
    }

    #[test]
    fn identity_action_needs_no_descent() {
        // <a, t | [t, a]> is already in commutator form
        let mut p = Presentation::new(&["a", "t"]).unwrap();
        p.push_relator(Word::commutator(&Word::single(1), &Word::single(0))).unwrap();
        let ext = SignedPermutation::identity(1);
        let level = Level::new(p, vec![1], vec![ext]).unwrap();
        let cert = raag_stable_pipeline(level, "test", &PipelineOptions::default()).unwrap();
        assert_eq!(cert.steps.len(), 1);
        assert_eq!(cert.steps[0].kind(), "raag-reached");
        crate::cert::verify(&cert).unwrap();
    }

    #[test]
    fn one_shot_swap_on_z2() {
        // K = Z^2 <a, b | [a,b]>, one free letter swapping a and b
        let level = simple_level();
        let cert = finite_closure_pipeline(level, "test", &PipelineOptions::default()).unwrap();
        assert_eq!(cert.steps.last().unwrap().kind(), "raag-reached");
        crate::cert::verify(&cert).unwrap();
        let final_p = cert.final_presentation().unwrap();
        assert!(final_p.is_raag());
    }
}
