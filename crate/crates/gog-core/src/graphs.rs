//! Finite graphs with edge involution, graphs of groups with cyclic edge
//! groups, spanning trees, and fundamental-group presentations relative to
//! a maximal tree.
//!
//! Oriented edges are numbered so that `2k` and `2k+1` are mutually inverse;
//! the involution is `e ^ 1`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::words::{free_reduce, Presentation, Word};

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct OrientedGraph {
    vertex_names: Vec<String>,
    /// Name per non-oriented edge pair; oriented edges 2k, 2k+1 share pair k.
    edge_names: Vec<String>,
    /// Initial vertex per oriented edge.
    alpha: Vec<usize>,
}

impl OrientedGraph {
    pub fn new(vertex_names: Vec<String>) -> OrientedGraph {
        OrientedGraph { vertex_names, edge_names: Vec::new(), alpha: Vec::new() }
    }

    /// Add a non-oriented edge pair from `a` to `b`; returns the oriented
    /// edge id pointing `a -> b` (its inverse is `id ^ 1`).
    pub fn add_edge(&mut self, name: &str, a: usize, b: usize) -> usize {
        assert!(a < self.vertex_names.len() && b < self.vertex_names.len());
        self.edge_names.push(name.to_string());
        self.alpha.push(a);
        self.alpha.push(b);
        self.alpha.len() - 2
    }

    pub fn num_vertices(&self) -> usize {
        self.vertex_names.len()
    }

    /// Number of oriented edges (twice the non-oriented count).
    pub fn num_oriented_edges(&self) -> usize {
        self.alpha.len()
    }

    pub fn num_edge_pairs(&self) -> usize {
        self.edge_names.len()
    }

    pub fn inverse(&self, e: usize) -> usize {
        e ^ 1
    }

    pub fn alpha(&self, e: usize) -> usize {
        self.alpha[e]
    }

    pub fn omega(&self, e: usize) -> usize {
        self.alpha[e ^ 1]
    }

    pub fn pair_of(&self, e: usize) -> usize {
        e / 2
    }

    pub fn vertex_name(&self, v: usize) -> &str {
        &self.vertex_names[v]
    }

    pub fn edge_name(&self, e: usize) -> &str {
        &self.edge_names[e / 2]
    }

    pub fn vertex_by_name(&self, name: &str) -> Option<usize> {
        self.vertex_names.iter().position(|n| n == name)
    }

    /// Oriented edges leaving `v`, in id order.
    pub fn edges_from(&self, v: usize) -> Vec<usize> {
        (0..self.alpha.len()).filter(|&e| self.alpha[e] == v).collect()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges_from(v).len()
    }

    pub fn is_connected(&self) -> bool {
        if self.vertex_names.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.vertex_names.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for e in self.edges_from(v) {
                let w = self.omega(e);
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// A spanning tree given by one oriented edge per tree pair, directed away
/// from the BFS root.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SpanningTree {
    /// Oriented edges in the tree, root-to-leaf direction.
    pub edges: Vec<usize>,
}

impl SpanningTree {
    pub fn contains_pair(&self, e: usize) -> bool {
        self.edges.iter().any(|&t| t / 2 == e / 2)
    }

    /// Tree path from `a` to `b` as a sequence of oriented edges.
    pub fn path(&self, g: &OrientedGraph, a: usize, b: usize) -> Vec<usize> {
        // parent map from the stored edges
        let mut up: BTreeMap<usize, usize> = BTreeMap::new(); // child vertex -> edge child->parent
        for &e in &self.edges {
            up.insert(g.omega(e), e ^ 1);
        }
        let chain = |mut v: usize| -> Vec<usize> {
            let mut out = Vec::new();
            while let Some(&e) = up.get(&v) {
                out.push(e);
                v = g.omega(e);
            }
            out
        };
        let ca = chain(a); // a -> root
        let cb = chain(b); // b -> root
        // strip common tail
        let mut ia = ca.len();
        let mut ib = cb.len();
        while ia > 0 && ib > 0 && ca[ia - 1] == cb[ib - 1] {
            ia -= 1;
            ib -= 1;
        }
        let mut path: Vec<usize> = ca[..ia].to_vec();
        path.extend(cb[..ib].iter().rev().map(|&e| e ^ 1));
        path
    }
}

/// Deterministic BFS spanning tree from the lowest vertex id, exploring
/// edges in id order.
pub fn spanning_tree(g: &OrientedGraph) -> Result<SpanningTree> {
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let mut seen = vec![false; g.num_vertices()];
    let mut edges = Vec::new();
    if g.num_vertices() == 0 {
        return Ok(SpanningTree { edges });
    }
    seen[0] = true;
    let mut queue = VecDeque::from([0usize]);
    while let Some(v) = queue.pop_front() {
        for e in g.edges_from(v) {
            let w = g.omega(e);
            if !seen[w] {
                seen[w] = true;
                edges.push(e);
                queue.push_back(w);
            }
        }
    }
    Ok(SpanningTree { edges })
}

/// Enumerate every spanning tree of a small graph (used by invariance
/// tests), each as a set of oriented edges rooted consistently.
pub fn all_spanning_trees(g: &OrientedGraph) -> Vec<SpanningTree> {
    let n = g.num_vertices();
    if n == 0 {
        return vec![SpanningTree { edges: vec![] }];
    }
    let pairs = g.num_edge_pairs();
    let need = n - 1;
    let mut out = Vec::new();
    let mut choice = Vec::new();
    fn rec(
        g: &OrientedGraph,
        pairs: usize,
        need: usize,
        start: usize,
        choice: &mut Vec<usize>,
        out: &mut Vec<SpanningTree>,
    ) {
        if choice.len() == need {
            if let Some(t) = orient_tree(g, choice) {
                out.push(t);
            }
            return;
        }
        for p in start..pairs {
            choice.push(p);
            rec(g, pairs, need, p + 1, choice, out);
            choice.pop();
        }
    }
    rec(g, pairs, need, 0, &mut choice, &mut out);
    out
}

/// Orient a candidate pair set as a tree rooted at vertex 0, if it is one.
fn orient_tree(g: &OrientedGraph, pairs: &[usize]) -> Option<SpanningTree> {
    let set: BTreeSet<usize> = pairs.iter().copied().collect();
    let mut seen = vec![false; g.num_vertices()];
    seen[0] = true;
    let mut edges = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(v) = queue.pop_front() {
        for e in g.edges_from(v) {
            if set.contains(&(e / 2)) {
                let w = g.omega(e);
                if !seen[w] {
                    seen[w] = true;
                    edges.push(e);
                    queue.push_back(w);
                }
            }
        }
    }
    if seen.into_iter().all(|s| s) && edges.len() == pairs.len() {
        Some(SpanningTree { edges })
    } else {
        None
    }
}

/// A graph of groups with infinite cyclic edge groups: each oriented edge
/// carries the image word of the edge generator in the vertex presentation
/// at its initial vertex.
#[derive(Clone, Debug)]
pub struct GraphOfGroups {
    pub graph: OrientedGraph,
    pub vertex_presentations: Vec<Presentation>,
    /// Image of the edge-pair generator under the alpha-side monomorphism,
    /// one word per oriented edge, written in the generators of the vertex
    /// presentation at alpha(e).
    pub alpha_images: Vec<Word>,
}

impl GraphOfGroups {
    pub fn validate(&self) -> Result<()> {
        if !self.graph.is_connected() {
            return Err(Error::Disconnected);
        }
        for e in 0..self.graph.num_oriented_edges() {
            let w = free_reduce(&self.alpha_images[e]);
            if w.is_empty() {
                return Err(Error::Semantic {
                    line: 0,
                    msg: format!("edge {} has a trivial image word", self.graph.edge_name(e)),
                });
            }
            let p = &self.vertex_presentations[self.graph.alpha(e)];
            for l in w.letters() {
                if p.slot_of(l.gen).is_none() {
                    return Err(Error::Semantic {
                        line: 0,
                        msg: format!(
                            "edge {} image uses a generator unknown at vertex {}",
                            self.graph.edge_name(e),
                            self.graph.vertex_name(self.graph.alpha(e))
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    /// Fundamental presentation relative to `tree`: the union of the vertex
    /// presentations, one relator identifying the two edge images per tree
    /// pair, and one stable letter with a conjugation relator per non-tree
    /// pair. Vertex generator names must already be disjoint.
    pub fn fundamental_presentation(&self, tree: &SpanningTree) -> Result<Presentation> {
        self.validate()?;
        let mut out = Presentation::default();
        // vertex generators, namespaced check only
        let mut id_maps: Vec<BTreeMap<usize, usize>> = Vec::new();
        for vp in &self.vertex_presentations {
            let mut map = BTreeMap::new();
            for gen in vp.generators() {
                let new = out
                    .push_generator(&gen.name)
                    .map_err(|_| Error::NameClash(gen.name.clone()))?;
                map.insert(gen.id, new);
            }
            id_maps.push(map);
        }
        for (v, vp) in self.vertex_presentations.iter().enumerate() {
            for r in vp.relators() {
                out.push_relator(r.relabel(&id_maps[v]))?;
            }
        }
        let image = |e: usize| -> Word {
            let v = self.graph.alpha(e);
            free_reduce(&self.alpha_images[e]).relabel(&id_maps[v])
        };
        for pair in 0..self.graph.num_edge_pairs() {
            let e = 2 * pair;
            if tree.contains_pair(e) {
                // alpha_image(e) = alpha_image(inverse(e))
                out.push_relator(free_reduce(&image(e).concat(&image(e ^ 1).inverse())))?;
            } else {
                let t = out.push_generator(&format!("t_{}", self.graph.edge_name(e)))?;
                let tw = Word::single(t);
                out.push_relator(free_reduce(
                    &tw.concat(&image(e)).concat(&tw.inverse()).concat(&image(e ^ 1).inverse()),
                ))?;
            }
        }
        Ok(out)
    }
}
