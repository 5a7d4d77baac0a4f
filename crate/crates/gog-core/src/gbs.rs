//! Labeled graphs, the modular homomorphism over loops, tree-dependence
//! classification, elementary reduction, admissible sign changes, and the
//! linearity decision with its Baumslag-Solitar witness.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

use crate::error::{Error, Result};
use crate::graphs::{spanning_tree, GraphOfGroups, OrientedGraph, SpanningTree};
use crate::words::{Presentation, Word};

/// A finite connected graph with a nonzero integer label per oriented edge.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LabeledGraph {
    pub graph: OrientedGraph,
    /// One label per oriented edge, indexed by edge id; never zero.
    pub labels: Vec<i64>,
}

impl LabeledGraph {
    pub fn new(graph: OrientedGraph, labels: Vec<i64>) -> Result<LabeledGraph> {
        if labels.len() != graph.num_oriented_edges() {
            return Err(Error::Other("label count does not match oriented edge count".into()));
        }
        if labels.iter().any(|&l| l == 0) {
            return Err(Error::Semantic { line: 0, msg: "zero edge label".into() });
        }
        Ok(LabeledGraph { graph, labels })
    }

    pub fn label(&self, e: usize) -> i64 {
        self.labels[e]
    }

    /// Vertex groups are infinite cyclic; the alpha-side image of edge `e`
    /// is the label-th power of the vertex generator.
    pub fn to_graph_of_groups(&self) -> GraphOfGroups {
        let mut vps = Vec::new();
        for v in 0..self.graph.num_vertices() {
            let name = format!("g_{}", self.graph.vertex_name(v));
            vps.push(Presentation::new(&[&name]).expect("fresh name"));
        }
        let alpha_images = (0..self.graph.num_oriented_edges())
            .map(|e| {
                let v = self.graph.alpha(e);
                let gen = vps[v].generators()[0].id;
                Word::power(gen, self.labels[e])
            })
            .collect();
        GraphOfGroups { graph: self.graph.clone(), vertex_presentations: vps, alpha_images }
    }

    /// Standard presentation relative to the deterministic spanning tree.
    pub fn standard_presentation(&self) -> Result<Presentation> {
        let t = spanning_tree(&self.graph)?;
        self.to_graph_of_groups().fundamental_presentation(&t)
    }
}

/// Site of an admissible sign change.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SignChangeSite {
    Vertex(usize),
    /// Non-oriented edge pair index.
    EdgePair(usize),
}

/// Negate the labels near a vertex or the two labels of an edge pair; the
/// presented group is unchanged.
pub fn admissible_sign_change(lg: &LabeledGraph, site: SignChangeSite) -> LabeledGraph {
    let mut labels = lg.labels.clone();
    match site {
        SignChangeSite::Vertex(v) => {
            for e in 0..lg.graph.num_oriented_edges() {
                if lg.graph.alpha(e) == v {
                    labels[e] = -labels[e];
                }
            }
        }
        SignChangeSite::EdgePair(p) => {
            labels[2 * p] = -labels[2 * p];
            labels[2 * p + 1] = -labels[2 * p + 1];
        }
    }
    LabeledGraph { graph: lg.graph.clone(), labels }
}

/// Product of label ratios along a closed edge path.
pub fn delta_of_loop(lg: &LabeledGraph, edges: &[usize]) -> Result<BigRational> {
    if edges.is_empty() {
        return Ok(BigRational::one());
    }
    for w in edges.windows(2) {
        if lg.graph.omega(w[0]) != lg.graph.alpha(w[1]) {
            return Err(Error::NotALoop("consecutive edges do not compose".into()));
        }
    }
    let first = edges[0];
    let last = *edges.last().unwrap();
    if lg.graph.omega(last) != lg.graph.alpha(first) {
        return Err(Error::NotALoop("path does not close".into()));
    }
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for &e in edges {
        num *= BigInt::from(lg.label(e));
        den *= BigInt::from(lg.label(lg.graph.inverse(e)));
    }
    Ok(BigRational::new(num, den))
}

/// Classification of a non-tree edge against the labels along its tree path.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum TDependence {
    Dependent,
    SkewDependent,
    Independent(BigRational),
}

/// Classify non-tree edge `e`: compare the tree-path label products with
/// the edge's own label ratio. The reported rational for the independent
/// case is `(p1 * label(inverse e)) / (p2 * label(e))`.
pub fn t_dependence(lg: &LabeledGraph, tree: &SpanningTree, e: usize) -> Result<TDependence> {
    if tree.contains_pair(e) {
        return Err(Error::EdgeInTree);
    }
    let path = tree.path(&lg.graph, lg.graph.alpha(e), lg.graph.omega(e));
    let mut p1 = BigInt::one();
    let mut p2 = BigInt::one();
    for &f in &path {
        p1 *= BigInt::from(lg.label(f));
        p2 *= BigInt::from(lg.label(lg.graph.inverse(f)));
    }
    let ratio = BigRational::new(p1 * BigInt::from(lg.label(lg.graph.inverse(e))), p2 * BigInt::from(lg.label(e)));
    if ratio == BigRational::one() {
        Ok(TDependence::Dependent)
    } else if ratio == -BigRational::one() {
        Ok(TDependence::SkewDependent)
    } else {
        Ok(TDependence::Independent(ratio))
    }
}

/// Image class of the modular homomorphism, computed over the cycle basis
/// of non-tree edges.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ModularImageClass {
    Trivial,
    PlusMinusOne,
    /// Witness loop (a non-tree edge followed by its closing tree path)
    /// whose value is not +-1.
    Other(Vec<usize>),
}

pub fn modular_image_class(lg: &LabeledGraph) -> Result<ModularImageClass> {
    let tree = spanning_tree(&lg.graph)?;
    modular_image_class_for_tree(lg, &tree)
}

pub fn modular_image_class_for_tree(
    lg: &LabeledGraph,
    tree: &SpanningTree,
) -> Result<ModularImageClass> {
    let mut any_skew = false;
    for pair in 0..lg.graph.num_edge_pairs() {
        let e = 2 * pair;
        if tree.contains_pair(e) {
            continue;
        }
        match t_dependence(lg, tree, e)? {
            TDependence::Dependent => {}
            TDependence::SkewDependent => any_skew = true,
            TDependence::Independent(_) => {
                let mut witness = vec![e];
                witness.extend(tree.path(&lg.graph, lg.graph.omega(e), lg.graph.alpha(e)));
                return Ok(ModularImageClass::Other(witness));
            }
        }
    }
    Ok(if any_skew { ModularImageClass::PlusMinusOne } else { ModularImageClass::Trivial })
}

/// Collapse tree edges whose label at a degree-1 endpoint is +-1, absorbing
/// the leaf; iterate to a fixpoint. The verdict of `decide_linearity` is
/// unchanged.
pub fn reduce_elementary(lg: &LabeledGraph) -> LabeledGraph {
    let mut cur = lg.clone();
    loop {
        let mut collapse = None;
        for v in 0..cur.graph.num_vertices() {
            if cur.graph.num_vertices() == 1 {
                break;
            }
            let out = cur.graph.edges_from(v);
            if out.len() != 1 {
                continue;
            }
            let e = out[0]; // leaf -> neighbor
            if cur.graph.omega(e) != v && cur.label(e).abs() == 1 {
                collapse = Some((v, e));
                break;
            }
        }
        let Some((leaf, _)) = collapse else {
            return cur;
        };
        // rebuild without the leaf vertex and its edge pair
        let mut names = Vec::new();
        let mut vmap = vec![usize::MAX; cur.graph.num_vertices()];
        for v in 0..cur.graph.num_vertices() {
            if v != leaf {
                vmap[v] = names.len();
                names.push(cur.graph.vertex_name(v).to_string());
            }
        }
        let mut g = OrientedGraph::new(names);
        let mut labels = Vec::new();
        for pair in 0..cur.graph.num_edge_pairs() {
            let e = 2 * pair;
            let (a, b) = (cur.graph.alpha(e), cur.graph.omega(e));
            if a == leaf || b == leaf {
                continue;
            }
            g.add_edge(cur.graph.edge_name(e), vmap[a], vmap[b]);
            labels.push(cur.label(e));
            labels.push(cur.label(e ^ 1));
        }
        cur = LabeledGraph { graph: g, labels };
    }
}

/// Decision outcome for a labeled graph.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum GbsVerdict {
    Elementary(ElementaryKind),
    UnimodularLinear(UnimodularImage),
    NonLinear {
        /// Exponents (m, n) of the embedded Baumslag-Solitar subgroup,
        /// reported unreduced with |m| != |n|.
        witness: (BigInt, BigInt),
        /// Non-tree edge followed by its closing tree path.
        witness_loop: Vec<usize>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ElementaryKind {
    Z,
    Z2,
    Klein,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum UnimodularImage {
    Trivial,
    PlusMinusOne,
}

impl GbsVerdict {
    pub fn describe(&self) -> String {
        match self {
            GbsVerdict::Elementary(ElementaryKind::Z) => "ELEMENTARY Z".into(),
            GbsVerdict::Elementary(ElementaryKind::Z2) => "ELEMENTARY Z^2".into(),
            GbsVerdict::Elementary(ElementaryKind::Klein) => "ELEMENTARY Klein".into(),
            GbsVerdict::UnimodularLinear(UnimodularImage::Trivial) => {
                "LINEAR unimodular image {1}".into()
            }
            GbsVerdict::UnimodularLinear(UnimodularImage::PlusMinusOne) => {
                "LINEAR unimodular image {-1,1}".into()
            }
            GbsVerdict::NonLinear { witness: (m, n), .. } => {
                format!("NON-LINEAR witness BS({m},{n})")
            }
        }
    }
}

/// Decide linearity of the group presented by the labeled graph.
pub fn decide_linearity(lg: &LabeledGraph) -> Result<GbsVerdict> {
    if !lg.graph.is_connected() {
        return Err(Error::Disconnected);
    }
    let reduced = reduce_elementary(lg);
    if reduced.graph.num_vertices() == 1 && reduced.graph.num_edge_pairs() == 0 {
        return Ok(GbsVerdict::Elementary(ElementaryKind::Z));
    }
    if reduced.graph.num_vertices() == 1 && reduced.graph.num_edge_pairs() == 1 {
        let (a, b) = (reduced.label(0), reduced.label(1));
        if a.abs() == 1 && b.abs() == 1 {
            return Ok(if a == b {
                GbsVerdict::Elementary(ElementaryKind::Z2)
            } else {
                GbsVerdict::Elementary(ElementaryKind::Klein)
            });
        }
    }
    let tree = spanning_tree(&reduced.graph)?;
    match modular_image_class_for_tree(&reduced, &tree)? {
        ModularImageClass::Trivial => Ok(GbsVerdict::UnimodularLinear(UnimodularImage::Trivial)),
        ModularImageClass::PlusMinusOne => {
            Ok(GbsVerdict::UnimodularLinear(UnimodularImage::PlusMinusOne))
        }
        ModularImageClass::Other(witness_loop) => {
            let e = witness_loop[0];
            let path = tree.path(&reduced.graph, reduced.graph.alpha(e), reduced.graph.omega(e));
            let mut p1 = BigInt::one();
            let mut p2 = BigInt::one();
            for &f in &path {
                p1 *= BigInt::from(reduced.label(f));
                p2 *= BigInt::from(reduced.label(reduced.graph.inverse(f)));
            }
            let m = BigInt::from(reduced.label(e)) * p2;
            let n = BigInt::from(reduced.label(reduced.graph.inverse(e))) * p1;
            Ok(GbsVerdict::NonLinear { witness: (m, n), witness_loop })
        }
    }
}

/// Kind tag used by verdict-invariance tests.
impl GbsVerdict {
    pub fn kind(&self) -> &'static str {
        match self {
            GbsVerdict::Elementary(_) => "elementary",
            GbsVerdict::UnimodularLinear(_) => "unimodular",
            GbsVerdict::NonLinear { .. } => "nonlinear",
        }
    }
}

/// Single-loop labeled graph BS(m, n).
pub fn single_loop(m: i64, n: i64) -> LabeledGraph {
    let mut g = OrientedGraph::new(vec!["v".into()]);
    g.add_edge("e", 0, 0);
    LabeledGraph::new(g, vec![m, n]).expect("nonzero labels")
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    #[test]
    fn delta_single_loop_and_empty() {
        let lg = single_loop(2, 3);
        let d = delta_of_loop(&lg, &[0]).unwrap();
        assert_eq!(d, BigRational::new(BigInt::from(2), BigInt::from(3)));
        assert_eq!(delta_of_loop(&lg, &[]).unwrap(), BigRational::one());
    }

    #[test]
    fn delta_concatenation_multiplies() {
        let mut g = OrientedGraph::new(vec!["v".into()]);
        g.add_edge("e1", 0, 0);
        g.add_edge("e2", 0, 0);
        let lg = LabeledGraph::new(g, vec![2, 3, 5, 7]).unwrap();
        let a = delta_of_loop(&lg, &[0]).unwrap();
        let b = delta_of_loop(&lg, &[2]).unwrap();
        let ab = delta_of_loop(&lg, &[0, 2]).unwrap();
        assert_eq!(ab, a * b);
    }

    #[test]
    fn delta_backwards_is_reciprocal() {
        let lg = single_loop(2, 3);
        let fwd = delta_of_loop(&lg, &[0]).unwrap();
        let back = delta_of_loop(&lg, &[1]).unwrap();
        assert_eq!(fwd * back, BigRational::one());
    }

    #[test]
    fn delta_rejects_non_loops() {
        let mut g = OrientedGraph::new(vec!["a".into(), "b".into()]);
        g.add_edge("e", 0, 1);
        let lg = LabeledGraph::new(g, vec![2, 3]).unwrap();
        assert!(matches!(delta_of_loop(&lg, &[0]), Err(Error::NotALoop(_))));
    }

    #[test]
    fn t_dependence_loop_cases() {
        let t = SpanningTree { edges: vec![] };
        assert_eq!(t_dependence(&single_loop(5, 5), &t, 0).unwrap(), TDependence::Dependent);
        assert_eq!(t_dependence(&single_loop(2, -2), &t, 0).unwrap(), TDependence::SkewDependent);
        match t_dependence(&single_loop(2, 3), &t, 0).unwrap() {
            TDependence::Independent(r) => {
                assert_eq!(r, BigRational::new(BigInt::from(3), BigInt::from(2)));
            }
            other => panic!("expected independent, got {other:?}"),
        }
    }

    #[test]
    fn modular_image_class_cases() {
        // tree: trivial
        let mut g = OrientedGraph::new(vec!["a".into(), "b".into()]);
        g.add_edge("e", 0, 1);
        let lg = LabeledGraph::new(g, vec![2, 3]).unwrap();
        assert_eq!(modular_image_class(&lg).unwrap(), ModularImageClass::Trivial);

        assert_eq!(modular_image_class(&single_loop(2, -2)).unwrap(), ModularImageClass::PlusMinusOne);
        assert!(matches!(
            modular_image_class(&single_loop(2, 3)).unwrap(),
            ModularImageClass::Other(_)
        ));
    }

    #[test]
    fn reduce_elementary_cases() {
        // segment (1,1) -> single vertex
        let mut g = OrientedGraph::new(vec!["a".into(), "b".into()]);
        g.add_edge("e", 0, 1);
        let lg = LabeledGraph::new(g, vec![1, 1]).unwrap();
        let r = reduce_elementary(&lg);
        assert_eq!(r.graph.num_vertices(), 1);
        assert_eq!(r.graph.num_edge_pairs(), 0);

        // segment (2,3) unchanged
        let mut g2 = OrientedGraph::new(vec!["a".into(), "b".into()]);
        g2.add_edge("e", 0, 1);
        let lg2 = LabeledGraph::new(g2, vec![2, 3]).unwrap();
        assert_eq!(reduce_elementary(&lg2), lg2);

        // path (1,1),(1,1) -> single vertex
        let mut g3 = OrientedGraph::new(vec!["a".into(), "b".into(), "c".into()]);
        g3.add_edge("e1", 0, 1);
        g3.add_edge("e2", 1, 2);
        let lg3 = LabeledGraph::new(g3, vec![1, 1, 1, 1]).unwrap();
        let r3 = reduce_elementary(&lg3);
        assert_eq!(r3.graph.num_vertices(), 1);
    }

    #[test]
    fn decide_linearity_examples() {
        match decide_linearity(&single_loop(2, 3)).unwrap() {
            GbsVerdict::NonLinear { witness: (m, n), .. } => {
                assert_eq!((m, n), (BigInt::from(2), BigInt::from(3)));
            }
            other => panic!("expected nonlinear, got {other:?}"),
        }
        assert_eq!(
            decide_linearity(&single_loop(2, 2)).unwrap(),
            GbsVerdict::UnimodularLinear(UnimodularImage::Trivial)
        );
        assert_eq!(
            decide_linearity(&single_loop(1, -1)).unwrap(),
            GbsVerdict::Elementary(ElementaryKind::Klein)
        );
        assert_eq!(
            decide_linearity(&single_loop(1, 1)).unwrap(),
            GbsVerdict::Elementary(ElementaryKind::Z2)
        );
    }

    #[test]
    fn sign_change_examples_and_involution() {
        let lg = single_loop(2, 3);
        let v = admissible_sign_change(&lg, SignChangeSite::Vertex(0));
        assert_eq!(v.labels, vec![-2, -3]);
        let e = admissible_sign_change(&lg, SignChangeSite::EdgePair(0));
        assert_eq!(e.labels, vec![-2, -3]);
        let back = admissible_sign_change(&v, SignChangeSite::Vertex(0));
        assert_eq!(back, lg);
    }

    #[test]
    fn reduce_preserves_verdict_on_leafy_graphs() {
        // star with a +-1 leaf attached to a nonlinear loop
        let mut g = OrientedGraph::new(vec!["v".into(), "leaf".into()]);
        g.add_edge("l", 0, 0);
        g.add_edge("e", 0, 1);
        let lg = LabeledGraph::new(g, vec![2, 3, 5, 1]).unwrap();
        let before = decide_linearity(&lg).unwrap();
        let after = decide_linearity(&reduce_elementary(&lg)).unwrap();
        assert_eq!(before.kind(), after.kind());
    }

    #[test]
    fn nonlinear_witness_loop_value_not_unimodular() {
        let lg = single_loop(2, 3);
        if let GbsVerdict::NonLinear { witness_loop, .. } = decide_linearity(&lg).unwrap() {
            let d = delta_of_loop(&lg, &witness_loop).unwrap();
            assert!(d != BigRational::one() && d != -BigRational::one());
            assert!(!d.is_zero());
        } else {
            panic!("expected nonlinear");
        }
    }
}
