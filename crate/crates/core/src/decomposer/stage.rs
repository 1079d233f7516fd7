//! Clusters of a small sphere that pass through its boundary points.
//!
//! An arc from a marked point `a` to the disk `D` cut off by a boundary
//! curve is determined, up to twisting around `D`, by the curve surrounding
//! `a` and `D`. The arc is a Levy arc exactly when that band curve returns
//! to itself under lifting, so the search follows band curves instead of
//! arcs. Two disks are handled the same way.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::biset::{lift_loop, MarkedDynamics, SearchBudget, WreathRecursion};
use crate::clusters::ClusterState;
use crate::error::Result;
use crate::multicurve::{CurveLiftGraph, MultiCurve};
use crate::par;
use crate::words::{conj_class, side_partition, ConjClass, Word};

use super::{SmallSphereComplex, SmallSphereDynamics};

/// A marked point of a small sphere: a puncture, or the point left by
/// collapsing the disk behind a boundary curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Marked {
    Puncture(usize),
    Boundary(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Band {
    pub u: Marked,
    pub v: Marked,
    pub curve: ConjClass,
}

/// Result of the band search for one multicurve.
#[derive(Clone, Debug, Default, Serialize)]
pub struct BandSearch {
    /// Bands on lifting cycles, with the index of their cycle.
    pub periodic: BTreeMap<Band, usize>,
    /// Periodic bands and all their lifts.
    pub clustered: BTreeSet<Band>,
}

struct Context<'a> {
    r: &'a WreathRecursion,
    dy: &'a MarkedDynamics,
    c: &'a MultiCurve,
    /// Curves of `c` that are essential lifts of each curve.
    lifts_of: Vec<BTreeSet<usize>>,
}

impl Context<'_> {
    fn side(&self, j: usize, avoid: &BTreeSet<usize>) -> Option<BTreeSet<usize>> {
        let s = &self.c.sides()[j];
        [&s.inner, &s.outer].into_iter().find(|x| x.is_disjoint(avoid)).cloned()
    }

    /// Marked set of the band between `u` and `v`, if the two are disjoint.
    fn band_set(&self, u: Marked, v: Marked) -> Option<BTreeSet<usize>> {
        match (u, v) {
            (Marked::Puncture(a), Marked::Puncture(b)) => Some([a, b].into()),
            (Marked::Puncture(a), Marked::Boundary(j)) | (Marked::Boundary(j), Marked::Puncture(a)) => {
                let mut s = self.side(j, &[a].into())?;
                s.insert(a);
                Some(s)
            }
            (Marked::Boundary(i), Marked::Boundary(j)) => {
                let si = &self.c.sides()[i];
                for x in [&si.inner, &si.outer] {
                    if let Some(y) = self.side(j, x) {
                        if !x.is_empty() && !y.is_empty() {
                            return Some(x.union(&y).copied().collect());
                        }
                    }
                }
                None
            }
        }
    }

    fn preimages(&self, m: Marked) -> Vec<Marked> {
        match m {
            Marked::Puncture(a) => {
                (1..=self.r.n()).filter(|&x| self.dy.image(x) == a).map(Marked::Puncture).collect()
            }
            Marked::Boundary(j) => self.lifts_of[j].iter().map(|&k| Marked::Boundary(k)).collect(),
        }
    }

    fn matches(&self, curve: &ConjClass, set: &BTreeSet<usize>) -> bool {
        match side_partition(&self.r.base, curve) {
            Ok(p) => p.inner == *set || p.outer == *set,
            Err(_) => false,
        }
    }

    /// Lifts of a band that are again bands between preimages.
    fn step(&self, b: &Band, budget: &SearchBudget) -> Vec<Band> {
        let mut out = Vec::new();
        let (us, vs) = (self.preimages(b.u), self.preimages(b.v));
        for (lift, _) in lift_loop(self.r, &b.curve) {
            if lift.len() > budget.max_len {
                continue;
            }
            for &u in &us {
                for &v in &vs {
                    if u == v {
                        continue;
                    }
                    if let Some(set) = self.band_set(u, v) {
                        if self.matches(&lift, &set) {
                            out.push(normalized(u, v, lift.clone()));
                        }
                    }
                }
            }
        }
        out
    }

    /// Loop around a marked point oriented so that its exponent sums
    /// indicate `set`.
    fn oriented_loops(&self, m: Marked, set: &BTreeSet<usize>) -> Vec<Word> {
        match m {
            Marked::Puncture(a) => vec![self.r.base.generator(a)],
            Marked::Boundary(j) => {
                let w = self.c.curves()[j].word().clone();
                let e = self.r.base.peripheral_sums(&w);
                let (a, b) = (set.iter().next().copied(), (1..=self.r.n()).find(|x| !set.contains(x)));
                let w = match (a, b) {
                    (Some(a), Some(b)) if e[a - 1] < e[b - 1] => w.inverse(),
                    _ => w,
                };
                let l = w.letters();
                (0..l.len()).map(|k| Word::new(l[k..].iter().chain(&l[..k]).copied())).collect()
            }
        }
    }

    fn seeds(&self, u: Marked, v: Marked) -> Vec<Band> {
        let (Some(su), Some(sv), Some(set)) = (self.mark_set(u, v), self.mark_set(v, u), self.band_set(u, v)) else {
            return Vec::new();
        };
        let lu = self.oriented_loops(u, &su);
        let lv = self.oriented_loops(v, &sv);
        let mut conj = vec![Word::identity()];
        for g in 1..self.r.n() {
            conj.push(self.r.base.generator(g));
            conj.push(self.r.base.generator(g).inverse());
        }
        let mut out = BTreeSet::new();
        for x in &lu {
            for y in &lv {
                for t in &conj {
                    for w in [x.mul(&t.mul(y).mul(&t.inverse())), t.mul(x).mul(&t.inverse()).mul(y)] {
                        let c = conj_class(&w);
                        if self.matches(&c, &set) {
                            out.insert(normalized(u, v, c));
                        }
                    }
                }
            }
        }
        out.into_iter().collect()
    }

    fn mark_set(&self, m: Marked, other: Marked) -> Option<BTreeSet<usize>> {
        match m {
            Marked::Puncture(a) => Some([a].into()),
            Marked::Boundary(j) => {
                let all = self.band_set(m, other)?;
                let s = &self.c.sides()[j];
                [&s.inner, &s.outer].into_iter().find(|x| x.is_subset(&all)).cloned()
            }
        }
    }
}

fn normalized(u: Marked, v: Marked, curve: ConjClass) -> Band {
    let (u, v) = if u <= v { (u, v) } else { (v, u) };
    Band { u, v, curve }
}

/// Curves of a multicurve whose collapsed disks return with degree > 1.
fn fatou_like_curves(g: &CurveLiftGraph) -> BTreeSet<usize> {
    let mut dg = DiGraph::<(), usize>::new();
    let nodes: Vec<_> = (0..g.len()).map(|_| dg.add_node(())).collect();
    for &(a, b, k) in &g.edges {
        dg.add_edge(nodes[a], nodes[b], k);
    }
    let mut out = BTreeSet::new();
    for comp in tarjan_scc(&dg) {
        let members: BTreeSet<usize> = comp.iter().map(|x| x.index()).collect();
        let internal: Vec<usize> =
            g.edges.iter().filter(|(a, b, _)| members.contains(a) && members.contains(b)).map(|e| e.2).collect();
        if !internal.is_empty() && internal.iter().any(|&k| k > 1) {
            out.extend(members);
        }
    }
    out
}

/// Searches band curves between marked points of periodic small spheres
/// where at least one end is a boundary point.
pub fn band_search(
    r: &WreathRecursion,
    dy: &MarkedDynamics,
    complex: &SmallSphereComplex,
    dynamics: &SmallSphereDynamics,
    budget: &SearchBudget,
) -> Result<BandSearch> {
    let c = &complex.curves;
    let graph = CurveLiftGraph::build(r, c)?;
    let mut lifts_of = vec![BTreeSet::new(); c.len()];
    for &(a, b, _) in &graph.edges {
        lifts_of[a].insert(b);
    }
    let periodic_curves = periodic_vertices(&graph);
    let fatou_curves = fatou_like_curves(&graph);
    let cx = Context { r, dy, c, lifts_of };

    let mut pairs = Vec::new();
    for (z, node) in complex.nodes.iter().enumerate() {
        if dynamics.period[z].is_none() {
            continue;
        }
        let mut marks: Vec<Marked> = node
            .punctures
            .iter()
            .filter(|&&a| dy.period[a - 1].is_some())
            .map(|&a| Marked::Puncture(a))
            .collect();
        marks.extend(node.boundary.iter().filter(|j| periodic_curves.contains(j)).map(|&j| Marked::Boundary(j)));
        let fatou = |m: Marked| match m {
            Marked::Puncture(a) => dy.a_inf.contains(&a),
            Marked::Boundary(j) => fatou_curves.contains(&j),
        };
        for (i, &u) in marks.iter().enumerate() {
            for &v in &marks[i + 1..] {
                let has_boundary = matches!(u, Marked::Boundary(_)) || matches!(v, Marked::Boundary(_));
                if has_boundary && (fatou(u) || fatou(v)) {
                    pairs.push((u, v));
                }
            }
        }
    }
    let seeds: Vec<Band> = par::map(&pairs, |&(u, v)| cx.seeds(u, v)).into_iter().flatten().collect();

    // explore the lifting graph on bands
    let cap = 4096 * budget.max_depth.max(1);
    let mut index: BTreeMap<Band, usize> = BTreeMap::new();
    let mut bands: Vec<Band> = Vec::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut queue = VecDeque::new();
    for s in seeds {
        if !index.contains_key(&s) {
            index.insert(s.clone(), bands.len());
            queue.push_back(bands.len());
            bands.push(s);
        }
    }
    while let Some(i) = queue.pop_front() {
        if bands.len() > cap {
            break;
        }
        for next in cx.step(&bands[i], budget) {
            let j = match index.get(&next) {
                Some(&j) => j,
                None => {
                    index.insert(next.clone(), bands.len());
                    queue.push_back(bands.len());
                    bands.push(next);
                    bands.len() - 1
                }
            };
            edges.push((i, j));
        }
    }

    let mut dg = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..bands.len()).map(|_| dg.add_node(())).collect();
    for &(a, b) in &edges {
        dg.add_edge(nodes[a], nodes[b], ());
    }
    let mut on_cycle = BTreeMap::new();
    for (k, comp) in tarjan_scc(&dg).into_iter().enumerate() {
        let cyclic = comp.len() > 1 || edges.iter().any(|&(a, b)| a == b && a == comp[0].index());
        if cyclic {
            on_cycle.extend(comp.iter().map(|x| (x.index(), k)));
        }
    }
    let mut reach: BTreeSet<usize> = on_cycle.keys().copied().collect();
    let mut stack: Vec<usize> = reach.iter().copied().collect();
    while let Some(v) = stack.pop() {
        for &(a, b) in &edges {
            if a == v && reach.insert(b) {
                stack.push(b);
            }
        }
    }
    Ok(BandSearch {
        periodic: on_cycle.iter().map(|(&i, &k)| (bands[i].clone(), k)).collect(),
        clustered: reach.iter().map(|&i| bands[i].clone()).collect(),
    })
}

fn periodic_vertices(g: &CurveLiftGraph) -> BTreeSet<usize> {
    let mut dg = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..g.len()).map(|_| dg.add_node(())).collect();
    for &(a, b, _) in &g.edges {
        dg.add_edge(nodes[a], nodes[b], ());
    }
    let mut out = BTreeSet::new();
    for comp in tarjan_scc(&dg) {
        if comp.len() > 1 || g.edges.iter().any(|&(a, b, _)| a == b && a == comp[0].index()) {
            out.extend(comp.iter().map(|x| x.index()));
        }
    }
    out
}

/// Clusters of the marked points of one small sphere.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NodeClusters {
    pub marks: Vec<Marked>,
    pub clusters: Vec<Vec<Marked>>,
}

impl NodeClusters {
    pub fn spanning(&self) -> bool {
        self.marks.len() >= 2 && self.clusters.len() == 1
    }

    pub fn separated(&self) -> bool {
        self.clusters.iter().all(|k| k.len() == 1)
    }
}

pub fn node_clusters(
    complex: &SmallSphereComplex,
    global: &ClusterState,
    bands: &BandSearch,
    node: usize,
) -> NodeClusters {
    let z = &complex.nodes[node];
    let mut marks: Vec<Marked> = z.punctures.iter().map(|&a| Marked::Puncture(a)).collect();
    marks.extend(z.boundary.iter().map(|&j| Marked::Boundary(j)));
    let pos = |m: Marked| marks.iter().position(|&x| x == m);
    let mut parent: Vec<usize> = (0..marks.len()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        if p[x] != x {
            let r = find(p, p[x]);
            p[x] = r;
        }
        p[x]
    }
    let join = |p: &mut Vec<usize>, a: usize, b: usize| {
        let (ra, rb) = (find(p, a), find(p, b));
        p[ra.max(rb)] = ra.min(rb);
    };
    let ps: Vec<usize> = z.punctures.iter().copied().collect();
    for (i, &a) in ps.iter().enumerate() {
        for &b in &ps[i + 1..] {
            if global.same_cluster(a, b) {
                join(&mut parent, pos(Marked::Puncture(a)).unwrap(), pos(Marked::Puncture(b)).unwrap());
            }
        }
    }
    for b in &bands.clustered {
        if let (Some(i), Some(j)) = (pos(b.u), pos(b.v)) {
            join(&mut parent, i, j);
        }
    }
    let mut groups: BTreeMap<usize, Vec<Marked>> = BTreeMap::new();
    for i in 0..marks.len() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(marks[i]);
    }
    NodeClusters { marks, clusters: groups.into_values().collect() }
}

/// Band curves of the non-spanning two-point clusters of a node, with the
/// rest of their lifting cycles. Larger clusters are returned unsplit.
pub fn split_curves(clusters: &NodeClusters, bands: &BandSearch) -> (BTreeSet<ConjClass>, Vec<Vec<Marked>>) {
    let mut cycles = BTreeSet::new();
    let mut stuck = Vec::new();
    if clusters.spanning() {
        return (BTreeSet::new(), stuck);
    }
    for k in clusters.clusters.iter().filter(|k| k.len() >= 2) {
        let (u, v) = (k[0].min(k[1]), k[0].max(k[1]));
        let hit = (k.len() == 2).then(|| bands.periodic.iter().find(|(b, _)| b.u == u && b.v == v)).flatten();
        match hit {
            Some((_, &id)) => {
                cycles.insert(id);
            }
            None => stuck.push(k.clone()),
        }
    }
    let curves = bands.periodic.iter().filter(|(_, id)| cycles.contains(id)).map(|(b, _)| b.curve.clone()).collect();
    (curves, stuck)
}
