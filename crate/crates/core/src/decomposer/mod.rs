//! Cutting along invariant multicurves and the crochet algorithm.
//!
//! A multicurve is cut into its laminar tree of small spheres. Node 0 is the
//! region containing the last puncture; node `i + 1` is the region just
//! inside curve `i`. A node maps to the node holding the image of any of its
//! punctures that is not cut off by a peripheral lift.

pub mod amalgam;
pub mod stage;

use std::collections::BTreeSet;

use serde::Serialize;

use crate::biset::{validate, MarkedDynamics, SearchBudget, WreathRecursion};
use crate::clusters::{cluster_multicurve, stabilize, ClusterState};
use crate::error::{Error, Result};
use crate::multicurve::{
    classify_scc, generate_invariant, pullback, CurveLiftGraph, LiftTable, SccClassification, SccKind, MultiCurve,
};
use crate::words::{is_peripheral, ConjClass, Peripheral};

pub use amalgam::{mate, tune, TuneSpec};
pub use stage::{band_search, node_clusters, Band, BandSearch, Marked, NodeClusters};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SmallSphere {
    pub punctures: BTreeSet<usize>,
    /// Indices of the curves bounding the region.
    pub boundary: Vec<usize>,
    /// The curve towards the root, if any.
    pub outer: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SmallSphereComplex {
    pub curves: MultiCurve,
    pub nodes: Vec<SmallSphere>,
}

impl SmallSphereComplex {
    pub fn build(c: &MultiCurve) -> Self {
        let n = c.base().n();
        let inner: Vec<&BTreeSet<usize>> = c.sides().iter().map(|s| &s.inner).collect();
        // parent of a curve: the smallest curve strictly enclosing it
        let parent: Vec<Option<usize>> = (0..c.len())
            .map(|i| {
                (0..c.len())
                    .filter(|&j| j != i && inner[j].len() > inner[i].len() && inner[i].is_subset(inner[j]))
                    .min_by_key(|&j| inner[j].len())
            })
            .collect();
        let mut nodes = vec![SmallSphere { punctures: (1..=n).collect(), boundary: Vec::new(), outer: None }];
        for i in 0..c.len() {
            nodes.push(SmallSphere { punctures: inner[i].clone(), boundary: vec![i], outer: Some(i) });
        }
        for i in 0..c.len() {
            let p = parent[i].map_or(0, |j| j + 1);
            nodes[p].boundary.push(i);
            for a in inner[i] {
                nodes[p].punctures.remove(a);
            }
        }
        for z in &mut nodes {
            z.boundary.sort();
        }
        SmallSphereComplex { curves: c.clone(), nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_of(&self, a: usize) -> usize {
        self.nodes.iter().position(|z| z.punctures.contains(&a)).expect("every puncture lies in a node")
    }

    /// The two nodes adjacent to curve `i`: inside first.
    pub fn sides_of(&self, i: usize) -> (usize, usize) {
        let outside = self
            .nodes
            .iter()
            .position(|z| z.outer != Some(i) && z.boundary.contains(&i))
            .expect("curve borders its parent");
        (i + 1, outside)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SmallSphereDynamics {
    /// Image node of each node; `None` when every puncture is cut off.
    pub image: Vec<Option<usize>>,
    /// Degree of each node map, from the Riemann-Hurwitz count.
    pub degree: Vec<Option<usize>>,
    /// Period of each periodic node.
    pub period: Vec<Option<usize>>,
    pub cycles: Vec<Vec<usize>>,
    /// Punctures lying in trivial preimage components.
    pub trivial: BTreeSet<usize>,
    /// Number of annular preimage components parallel to each curve.
    pub annular: Vec<usize>,
    /// Common degree of the essential lifts isotopic to each curve.
    pub boundary_degree: Vec<Option<usize>>,
    /// Curves having a lift isotopic to themselves.
    pub self_lifting: Vec<bool>,
}

pub fn cut(r: &WreathRecursion, c: &MultiCurve) -> Result<(SmallSphereComplex, SmallSphereDynamics)> {
    let dy = validate(r)?;
    let (back, table) = pullback(r, c)?;
    if back != *c {
        return Err(Error::NotInvariant("the multicurve differs from its essential preimage".into()));
    }
    let complex = SmallSphereComplex::build(c);
    let dynamics = node_dynamics(&dy, &complex, &table)?;
    Ok((complex, dynamics))
}

fn node_dynamics(dy: &MarkedDynamics, complex: &SmallSphereComplex, table: &LiftTable) -> Result<SmallSphereDynamics> {
    let c = &complex.curves;
    let mut trivial = BTreeSet::new();
    let mut parallel: Vec<Vec<usize>> = vec![Vec::new(); c.len()];
    let mut self_lifting = vec![false; c.len()];
    for (i, g) in c.curves().iter().enumerate() {
        for l in &table[g] {
            if l.essential {
                let j = c.index_of(&l.class).expect("invariant multicurve");
                parallel[j].push(l.degree);
                self_lifting[i] |= i == j;
            } else if let Peripheral::Puncture(a, _) = is_peripheral(c.base(), &l.class) {
                trivial.insert(a);
            }
        }
    }
    let annular = parallel.iter().map(|v| v.len().saturating_sub(1)).collect();
    let boundary_degree: Vec<Option<usize>> = parallel
        .iter()
        .map(|v| match v.first() {
            Some(&k) if v.iter().all(|&x| x == k) => Some(k),
            _ => None,
        })
        .collect();

    let mut image = Vec::with_capacity(complex.len());
    for (z, node) in complex.nodes.iter().enumerate() {
        let targets: BTreeSet<usize> = node
            .punctures
            .iter()
            .filter(|a| !trivial.contains(a))
            .map(|&a| complex.node_of(dy.image(a)))
            .collect();
        if targets.len() > 1 {
            return Err(Error::NotInvariant(format!("punctures of node {z} map into nodes {targets:?}")));
        }
        image.push(targets.into_iter().next());
    }

    let degree = complex
        .nodes
        .iter()
        .map(|z| {
            let mut s = z.punctures.iter().map(|&a| dy.local_degree(a) - 1).sum::<usize>();
            for &i in &z.boundary {
                s += boundary_degree[i]? - 1;
            }
            (s % 2 == 0).then_some(s / 2 + 1)
        })
        .collect();

    let m = complex.len();
    let period: Vec<Option<usize>> = (0..m)
        .map(|z| {
            let mut x = z;
            for k in 1..=m {
                x = image[x]?;
                if x == z {
                    return Some(k);
                }
            }
            None
        })
        .collect();
    let mut cycles = Vec::new();
    let mut seen = vec![false; m];
    for z in 0..m {
        if period[z].is_some() && !seen[z] {
            let mut cy = vec![z];
            seen[z] = true;
            let mut x = image[z].unwrap();
            while x != z {
                seen[x] = true;
                cy.push(x);
                x = image[x].unwrap();
            }
            cycles.push(cy);
        }
    }
    Ok(SmallSphereDynamics { image, degree, period, cycles, trivial, annular, boundary_degree, self_lifting })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SmallMapType {
    Crochet,
    Sierpinski,
    NotWithinBudget,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Evidence {
    /// All marked points of the node, boundary points included, lie in one
    /// cluster.
    SpanningCluster { cluster: Vec<Marked> },
    /// A fixed boundary point is totally invariant: the small map is a
    /// polynomial.
    Polynomial { curve: usize, degree: usize },
    /// No two marked points of the node lie in a common cluster.
    SeparatedPoints { clusters: Vec<Vec<Marked>> },
    /// Type of the periodic node this one lands on.
    Image { node: usize },
    /// Union of crochet nodes glued along an eliminated unicycle.
    Merged { punctures: Vec<Vec<usize>> },
    Unresolved { reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NodeClass {
    pub node: usize,
    pub kind: SmallMapType,
    pub evidence: Evidence,
}

/// Type of a periodic node, read off from the clusters of its marked points.
pub fn classify_small_map(
    complex: &SmallSphereComplex,
    dynamics: &SmallSphereDynamics,
    clusters: &NodeClusters,
    node: usize,
) -> NodeClass {
    let z = &complex.nodes[node];
    let unresolved = |reason: &str| NodeClass {
        node,
        kind: SmallMapType::NotWithinBudget,
        evidence: Evidence::Unresolved { reason: reason.into() },
    };
    if dynamics.period[node].is_none() {
        return unresolved("node is not periodic");
    }
    let Some(d) = dynamics.degree[node] else { return unresolved("boundary degrees are ambiguous") };
    if dynamics.period[node] == Some(1) {
        for &i in &z.boundary {
            if dynamics.self_lifting[i] && dynamics.boundary_degree[i] == Some(d) && d >= 2 {
                return NodeClass {
                    node,
                    kind: SmallMapType::Crochet,
                    evidence: Evidence::Polynomial { curve: i, degree: d },
                };
            }
        }
    }
    if clusters.marks.len() < 2 {
        return unresolved("too few marked points to compare clusters");
    }
    if clusters.spanning() {
        let cluster = clusters.clusters[0].clone();
        return NodeClass { node, kind: SmallMapType::Crochet, evidence: Evidence::SpanningCluster { cluster } };
    }
    if clusters.separated() && d >= 2 {
        let clusters = clusters.clusters.clone();
        return NodeClass { node, kind: SmallMapType::Sierpinski, evidence: Evidence::SeparatedPoints { clusters } };
    }
    unresolved("clusters split the node; a further stage is required")
}

/// Classifies periodic nodes directly and every other node by the cycle it
/// lands on.
pub fn classify_nodes(
    complex: &SmallSphereComplex,
    dynamics: &SmallSphereDynamics,
    clusters: &[NodeClusters],
) -> Vec<NodeClass> {
    let m = complex.len();
    let mut out: Vec<Option<NodeClass>> = vec![None; m];
    for cy in &dynamics.cycles {
        let head = classify_small_map(complex, dynamics, &clusters[cy[0]], cy[0]);
        for &z in cy {
            let mut c = classify_small_map(complex, dynamics, &clusters[z], z);
            if c.kind != head.kind {
                // members of a cycle share the type of the first return
                c = NodeClass { node: z, kind: head.kind, evidence: Evidence::Image { node: cy[0] } };
            }
            out[z] = Some(c);
        }
    }
    for z in 0..m {
        if out[z].is_some() {
            continue;
        }
        let mut x = z;
        let mut landed = None;
        for _ in 0..m {
            match dynamics.image[x] {
                Some(y) if dynamics.period[y].is_some() => {
                    landed = Some(y);
                    break;
                }
                Some(y) => x = y,
                None => break,
            }
        }
        out[z] = Some(match landed {
            Some(y) => NodeClass { node: z, kind: out[y].as_ref().unwrap().kind, evidence: Evidence::Image { node: y } },
            None => NodeClass {
                node: z,
                kind: SmallMapType::NotWithinBudget,
                evidence: Evidence::Unresolved { reason: "image node is undetermined".into() },
            },
        });
    }
    out.into_iter().map(Option::unwrap).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct Stage {
    /// Clusters of the punctures (first stage) or the non-spanning clusters
    /// through boundary points that produced new curves.
    pub clusters: Vec<Vec<Marked>>,
    pub stable_level: usize,
    /// Seed curves of the stage.
    pub boundaries: MultiCurve,
    pub multicurve: MultiCurve,
}

#[derive(Clone, Debug, Serialize)]
pub struct CrochetDecomposition {
    pub budget: SearchBudget,
    pub stages: Vec<Stage>,
    /// The multicurve before eliminating unicycles.
    pub pre_crochet: MultiCurve,
    /// Curves of each eliminated primitive crochet unicycle.
    pub eliminated: Vec<Vec<ConjClass>>,
    pub c_dec: MultiCurve,
    pub c_sie: MultiCurve,
    pub c_bi: MultiCurve,
    pub complex: SmallSphereComplex,
    pub dynamics: SmallSphereDynamics,
    pub classes: Vec<NodeClass>,
    pub i_bullet: Vec<usize>,
    pub i_circ: Vec<usize>,
    pub unresolved: Vec<usize>,
    pub graph: CurveLiftGraph,
    pub scc: SccClassification,
}

impl CrochetDecomposition {
    /// Crochet map: nothing to cut and the single node is crochet.
    pub fn is_crochet(&self) -> bool {
        self.c_dec.is_empty() && self.classes.iter().all(|c| c.kind == SmallMapType::Crochet)
    }

    /// No primitive unicycle with crochet nodes on both sides survives, and
    /// the two parts of the split partition the result.
    pub fn postcondition(&self) -> bool {
        primitive_crochet_unicycles(&self.complex, &self.classes, &self.scc).is_empty()
            && self.c_sie.is_subset(&self.c_dec)
            && self.c_bi.len() + self.c_sie.len() == self.c_dec.len()
    }
}

/// Primitive unicycles whose curves have crochet nodes on both sides.
pub fn primitive_crochet_unicycles(
    complex: &SmallSphereComplex,
    classes: &[NodeClass],
    scc: &SccClassification,
) -> Vec<usize> {
    let crochet = |z: usize| classes[z].kind == SmallMapType::Crochet;
    scc.primitive
        .iter()
        .copied()
        .filter(|&k| {
            let comp = &scc.components[k];
            comp.kind == SccKind::Unicycle
                && comp.vertices.iter().all(|&i| {
                    let (a, b) = complex.sides_of(i);
                    crochet(a) && crochet(b)
                })
        })
        .collect()
}

/// Curves reached by lifting from the given vertices.
fn reach(g: &CurveLiftGraph, start: impl IntoIterator<Item = usize>) -> BTreeSet<usize> {
    let mut seen: BTreeSet<usize> = start.into_iter().collect();
    let mut stack: Vec<usize> = seen.iter().copied().collect();
    while let Some(v) = stack.pop() {
        for &(a, b, _) in &g.edges {
            if a == v && seen.insert(b) {
                stack.push(b);
            }
        }
    }
    seen
}

struct Cut {
    complex: SmallSphereComplex,
    dynamics: SmallSphereDynamics,
    bands: BandSearch,
    node_clusters: Vec<NodeClusters>,
    classes: Vec<NodeClass>,
    graph: CurveLiftGraph,
    scc: SccClassification,
}

fn cut_and_classify(
    r: &WreathRecursion,
    dy: &MarkedDynamics,
    c: &MultiCurve,
    clusters: &ClusterState,
    budget: &SearchBudget,
) -> Result<Cut> {
    let (complex, dynamics) = cut(r, c)?;
    let bands = band_search(r, dy, &complex, &dynamics, budget)?;
    let node_clusters: Vec<NodeClusters> =
        (0..complex.len()).map(|z| node_clusters(&complex, clusters, &bands, z)).collect();
    let classes = classify_nodes(&complex, &dynamics, &node_clusters);
    let graph = CurveLiftGraph::build(r, c)?;
    let scc = classify_scc(&graph);
    Ok(Cut { complex, dynamics, bands, node_clusters, classes, graph, scc })
}

/// A node left unresolved after removing curves is crochet when every old
/// node it absorbs was crochet.
fn inherit_merged(cut: &mut Cut, before: &Cut) {
    for z in 0..cut.complex.len() {
        if cut.classes[z].kind != SmallMapType::NotWithinBudget {
            continue;
        }
        let ps = &cut.complex.nodes[z].punctures;
        let parts: Vec<usize> = (0..before.complex.len())
            .filter(|&y| before.complex.nodes[y].punctures.is_subset(ps) && !before.complex.nodes[y].punctures.is_empty())
            .collect();
        if parts.len() >= 2 && parts.iter().all(|&y| before.classes[y].kind == SmallMapType::Crochet) {
            let punctures = parts.iter().map(|&y| before.complex.nodes[y].punctures.iter().copied().collect()).collect();
            cut.classes[z] = NodeClass { node: z, kind: SmallMapType::Crochet, evidence: Evidence::Merged { punctures } };
        }
    }
    // preperiodic nodes follow their images again
    for z in 0..cut.complex.len() {
        if let Evidence::Image { node } = cut.classes[z].evidence {
            cut.classes[z].kind = cut.classes[node].kind;
        }
    }
}

fn suspect(e: Error) -> Error {
    match e {
        Error::PreinvarianceViolation(m) => Error::ObstructionSuspected(m),
        e => e,
    }
}

/// Small spheres of an invariant multicurve and the type of each small map.
pub fn small_maps(
    r: &WreathRecursion,
    c: &MultiCurve,
    budget: &SearchBudget,
) -> Result<(SmallSphereComplex, SmallSphereDynamics, Vec<NodeClass>)> {
    let dy = validate(r)?;
    let clusters = stabilize(r, &dy, budget)?;
    let cut = cut_and_classify(r, &dy, c, &clusters.state, budget)?;
    Ok((cut.complex, cut.dynamics, cut.classes))
}

pub fn crochet_algorithm(r: &WreathRecursion, budget: &SearchBudget) -> Result<CrochetDecomposition> {
    let dy = validate(r)?;
    if dy.a_inf.is_empty() {
        return Err(Error::NonDynamicalData("no periodic critical points: the Fatou set is empty".into()));
    }
    let clusters = stabilize(r, &dy, budget)?;
    let boundaries = cluster_multicurve(r, &dy, &clusters)?;
    let c1 = generate_invariant(r, &boundaries, budget).map_err(suspect)?;
    let mut stages = vec![Stage {
        clusters: clusters
            .state
            .clusters()
            .into_iter()
            .map(|k| k.into_iter().map(Marked::Puncture).collect())
            .collect(),
        stable_level: clusters.stable_level,
        boundaries,
        multicurve: c1.clone(),
    }];

    // further stages: clusters through the points left by collapsing curves
    let mut current = c1;
    let mut cut = cut_and_classify(r, &dy, &current, &clusters.state, budget)?;
    for _ in 0..r.n() {
        let mut new = BTreeSet::new();
        let mut split = Vec::new();
        for cy in &cut.dynamics.cycles {
            for &z in cy {
                let (curves, _) = stage::split_curves(&cut.node_clusters[z], &cut.bands);
                for c in curves.into_iter().filter(|c| !current.contains(c)) {
                    new.insert(c);
                }
                split.extend(cut.node_clusters[z].clusters.iter().filter(|k| k.len() >= 2).cloned());
            }
        }
        if new.is_empty() {
            break;
        }
        let seed = MultiCurve::new(&r.base, current.curves().iter().cloned().chain(new.iter().cloned()))
            .map_err(|e| Error::ObstructionSuspected(format!("band curves cross the multicurve: {e}")))?;
        let next = generate_invariant(r, &seed, budget).map_err(suspect)?;
        stages.push(Stage {
            clusters: split,
            stable_level: clusters.stable_level,
            boundaries: MultiCurve::new(&r.base, new)?,
            multicurve: next.clone(),
        });
        current = next;
        cut = cut_and_classify(r, &dy, &current, &clusters.state, budget)?;
    }
    let pre_crochet = current.clone();

    let mut eliminated = Vec::new();
    loop {
        let drop = primitive_crochet_unicycles(&cut.complex, &cut.classes, &cut.scc);
        let Some(&k) = drop.first() else { break };
        let removed: BTreeSet<usize> = cut.scc.components[k].vertices.iter().copied().collect();
        let others = cut
            .scc
            .primitive
            .iter()
            .filter(|&&j| j != k)
            .flat_map(|&j| cut.scc.components[j].vertices.iter().copied());
        let keep = reach(&cut.graph, others);
        eliminated.push(removed.iter().map(|&i| current.curves()[i].clone()).collect());
        current = MultiCurve::new(&r.base, keep.iter().map(|&i| current.curves()[i].clone()))?;
        let before = cut;
        cut = cut_and_classify(r, &dy, &current, &clusters.state, budget)?;
        inherit_merged(&mut cut, &before);
    }

    let mut seed = BTreeSet::new();
    for cy in &cut.dynamics.cycles {
        for &z in cy {
            if cut.classes[z].kind == SmallMapType::Sierpinski {
                seed.extend(cut.complex.nodes[z].boundary.iter().map(|&i| current.curves()[i].clone()));
            }
        }
    }
    let c_sie = generate_invariant(r, &MultiCurve::new(&r.base, seed)?, budget)?;
    let c_bi = MultiCurve::new(&r.base, current.curves().iter().filter(|c| !c_sie.contains(c)).cloned())?;
    let pick = |kind| cut.classes.iter().filter(|c| c.kind == kind).map(|c| c.node).collect::<Vec<_>>();
    Ok(CrochetDecomposition {
        budget: *budget,
        stages,
        pre_crochet,
        eliminated,
        c_dec: current,
        c_sie,
        c_bi,
        i_bullet: pick(SmallMapType::Crochet),
        i_circ: pick(SmallMapType::Sierpinski),
        unresolved: pick(SmallMapType::NotWithinBudget),
        complex: cut.complex,
        dynamics: cut.dynamics,
        classes: cut.classes,
        graph: cut.graph,
        scc: cut.scc,
    })
}

/// Glues `pieces[i + 1]` into the accumulated recursion according to
/// `gluing[i]`.
pub fn amalgam(pieces: &[WreathRecursion], gluing: &[TuneSpec]) -> Result<WreathRecursion> {
    let Some(first) = pieces.first() else { return Err(Error::GluingMismatch("no pieces".into())) };
    if pieces.len() != gluing.len() + 1 {
        return Err(Error::GluingMismatch(format!(
            "{} pieces need {} gluings, got {}",
            pieces.len(),
            pieces.len() - 1,
            gluing.len()
        )));
    }
    let mut acc = first.clone();
    for (plug, spec) in pieces[1..].iter().zip(gluing) {
        acc = tune(&acc, plug, spec)?;
    }
    Ok(acc)
}
