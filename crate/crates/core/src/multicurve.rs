//! Multicurves, pullback, invariant multicurves and the curve-lifting graph.

use std::collections::{BTreeMap, BTreeSet};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::biset::{lift_loop, SearchBudget, WreathRecursion};
use crate::error::{Error, Result};
use crate::words::{is_peripheral, side_partition, ConjClass, Peripheral, SidePartition, SphereGroupPresentation};

/// A set of essential, pairwise laminar curve classes in canonical order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MultiCurve {
    #[serde(skip)]
    base: SphereGroupPresentation,
    curves: Vec<ConjClass>,
    #[serde(skip)]
    sides: Vec<SidePartition>,
}

impl MultiCurve {
    pub fn empty(base: &SphereGroupPresentation) -> Self {
        MultiCurve { base: base.clone(), curves: Vec::new(), sides: Vec::new() }
    }

    pub fn new(base: &SphereGroupPresentation, curves: impl IntoIterator<Item = ConjClass>) -> Result<Self> {
        let set: BTreeSet<ConjClass> = curves.into_iter().collect();
        let mut sides = Vec::with_capacity(set.len());
        for c in &set {
            let s = side_partition(base, c)?;
            if !s.is_essential() || is_peripheral(base, c) != Peripheral::Essential {
                return Err(Error::Shape(format!("curve {c:?} is not essential")));
            }
            sides.push(s);
        }
        // distinct classes may share a side partition only if they are not
        // disjoint simple curves; both situations point to bad input
        for i in 0..sides.len() {
            for j in 0..i {
                if !sides[i].laminar_with(&sides[j]) || sides[i] == sides[j] {
                    return Err(Error::NonSimpleWitness(format!(
                        "curves {:?} and {:?} cannot be disjoint and non-isotopic",
                        set.iter().nth(j).unwrap(),
                        set.iter().nth(i).unwrap()
                    )));
                }
            }
        }
        Ok(MultiCurve { base: base.clone(), curves: set.into_iter().collect(), sides })
    }

    pub fn base(&self) -> &SphereGroupPresentation {
        &self.base
    }

    pub fn curves(&self) -> &[ConjClass] {
        &self.curves
    }

    pub fn sides(&self) -> &[SidePartition] {
        &self.sides
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn contains(&self, c: &ConjClass) -> bool {
        self.curves.binary_search(c).is_ok()
    }

    pub fn index_of(&self, c: &ConjClass) -> Option<usize> {
        self.curves.binary_search(c).ok()
    }

    pub fn is_subset(&self, other: &MultiCurve) -> bool {
        self.curves.iter().all(|c| other.contains(c))
    }

    pub fn union(&self, other: &MultiCurve) -> Result<MultiCurve> {
        MultiCurve::new(&self.base, self.curves.iter().chain(other.curves.iter()).cloned())
    }

    /// Curves as canonical word arrays.
    pub fn to_arrays(&self) -> Vec<Vec<i32>> {
        self.curves.iter().map(|c| c.word().letters().to_vec()).collect()
    }
}

/// One lift component of a curve.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LiftEntry {
    pub class: ConjClass,
    pub degree: usize,
    pub essential: bool,
}

/// Lifts of every member of a multicurve, keyed by the member.
pub type LiftTable = BTreeMap<ConjClass, Vec<LiftEntry>>;

/// Essential lifts of a single curve, classified.
pub fn lift_entries(r: &WreathRecursion, c: &ConjClass) -> Result<Vec<LiftEntry>> {
    lift_loop(r, c)
        .into_iter()
        .map(|(class, degree)| {
            let essential = match is_peripheral(&r.base, &class) {
                Peripheral::Essential => {
                    let s = side_partition(&r.base, &class)?;
                    s.is_essential()
                }
                _ => false,
            };
            Ok(LiftEntry { class, degree, essential })
        })
        .collect()
}

pub fn pullback(r: &WreathRecursion, c: &MultiCurve) -> Result<(MultiCurve, LiftTable)> {
    let mut table = LiftTable::new();
    let mut out = BTreeSet::new();
    for g in c.curves() {
        let lifts = lift_entries(r, g)?;
        out.extend(lifts.iter().filter(|l| l.essential).map(|l| l.class.clone()));
        table.insert(g.clone(), lifts);
    }
    Ok((MultiCurve::new(&r.base, out)?, table))
}

pub fn is_invariant(r: &WreathRecursion, c: &MultiCurve) -> Result<bool> {
    Ok(pullback(r, c)?.0 == *c)
}

/// The invariant multicurve generated by a pre-invariant seed.
pub fn generate_invariant(r: &WreathRecursion, seed: &MultiCurve, budget: &SearchBudget) -> Result<MultiCurve> {
    let (first, _) = pullback(r, seed)?;
    if !seed.is_subset(&first) {
        let missing: Vec<&ConjClass> = seed.curves().iter().filter(|c| !first.contains(c)).collect();
        return Err(Error::PreinvarianceViolation(format!(
            "seed curves {missing:?} are not isotopic to preimage components"
        )));
    }
    let mut current = first;
    for _ in 0..budget.max_depth {
        if current.len() > r.n().saturating_sub(3) {
            return Err(Error::BudgetExhausted(format!(
                "{} curves exceed the multicurve capacity of the marked sphere",
                current.len()
            )));
        }
        let (next, _) = pullback(r, &current)?;
        if next == current {
            return Ok(current);
        }
        current = next;
    }
    Err(Error::BudgetExhausted("pullback saturation did not reach a fixpoint".into()))
}

/// The curve-lifting graph: an edge `γ → δ` for each essential lift of `γ`
/// isotopic to `δ`, labelled with its degree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CurveLiftGraph {
    pub curves: Vec<ConjClass>,
    pub edges: Vec<(usize, usize, usize)>,
}

impl CurveLiftGraph {
    pub fn build(r: &WreathRecursion, c: &MultiCurve) -> Result<Self> {
        let (_, table) = pullback(r, c)?;
        let mut edges = Vec::new();
        for (i, g) in c.curves().iter().enumerate() {
            for l in table[g].iter().filter(|l| l.essential) {
                let j = c.index_of(&l.class).ok_or_else(|| {
                    Error::NotInvariant(format!("lift {:?} of {g:?} is not in the multicurve", l.class))
                })?;
                edges.push((i, j, l.degree));
            }
        }
        Ok(CurveLiftGraph { curves: c.curves().to_vec(), edges })
    }

    /// Graph on `n` anonymous vertices.
    pub fn from_edges(n: usize, edges: Vec<(usize, usize, usize)>) -> Self {
        let curves = (0..n).map(|_| ConjClass::default()).collect();
        CurveLiftGraph { curves, edges }
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph lifts {\n");
        for (i, c) in self.curves.iter().enumerate() {
            s.push_str(&format!("  c{i} [label=\"{}\"];\n", c.word()));
        }
        for &(a, b, k) in &self.edges {
            s.push_str(&format!("  c{a} -> c{b} [label=\"k={k}\"];\n"));
        }
        s.push_str("}\n");
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SccKind {
    Unicycle,
    Bicycle,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Scc {
    pub vertices: Vec<usize>,
    pub kind: SccKind,
    pub internal_edges: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SccClassification {
    pub components: Vec<Scc>,
    /// Condensation edges between indices of `components`.
    pub order: Vec<(usize, usize)>,
    /// Components with no incoming walk from another component.
    pub primitive: Vec<usize>,
}

/// Edge-count test on one strongly connected vertex set.
pub fn is_unicycle_by_edges(g: &CurveLiftGraph, comp: &[usize]) -> bool {
    let inside: BTreeSet<usize> = comp.iter().copied().collect();
    let m = g.edges.iter().filter(|(a, b, _)| inside.contains(a) && inside.contains(b)).count();
    m == comp.len()
}

/// Walk-count test: some pair of vertices is joined by at least two walks of
/// a common length `m <= 2|comp|`.
pub fn is_bicycle_by_walks(g: &CurveLiftGraph, comp: &[usize]) -> bool {
    let s = comp.len();
    let pos: BTreeMap<usize, usize> = comp.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut a = vec![vec![0u64; s]; s];
    for (x, y, _) in &g.edges {
        if let (Some(&i), Some(&j)) = (pos.get(x), pos.get(y)) {
            a[i][j] += 1;
        }
    }
    let mut p = a.clone();
    for _ in 0..2 * s {
        if p.iter().flatten().any(|&x| x >= 2) {
            return true;
        }
        let mut q = vec![vec![0u64; s]; s];
        for i in 0..s {
            for k in 0..s {
                if p[i][k] == 0 {
                    continue;
                }
                for j in 0..s {
                    q[i][j] = (q[i][j] + p[i][k] * a[k][j]).min(2);
                }
            }
        }
        p = q;
    }
    false
}

pub fn classify_scc(g: &CurveLiftGraph) -> SccClassification {
    let mut pg: DiGraph<(), ()> = DiGraph::new();
    let nodes: Vec<_> = (0..g.len()).map(|_| pg.add_node(())).collect();
    for &(a, b, _) in &g.edges {
        pg.add_edge(nodes[a], nodes[b], ());
    }
    let mut comps: Vec<Vec<usize>> = tarjan_scc(&pg)
        .into_iter()
        .map(|c| {
            let mut v: Vec<usize> = c.into_iter().map(|x| x.index()).collect();
            v.sort();
            v
        })
        .filter(|c| c.len() > 1 || g.edges.iter().any(|&(a, b, _)| a == c[0] && b == c[0]))
        .collect();
    comps.sort();
    let components: Vec<Scc> = comps
        .iter()
        .map(|c| {
            let inside: BTreeSet<usize> = c.iter().copied().collect();
            let m = g.edges.iter().filter(|(a, b, _)| inside.contains(a) && inside.contains(b)).count();
            let kind = if m == c.len() { SccKind::Unicycle } else { SccKind::Bicycle };
            debug_assert_eq!(kind == SccKind::Bicycle, is_bicycle_by_walks(g, c));
            Scc { vertices: c.clone(), kind, internal_edges: m }
        })
        .collect();
    // reachability between components through arbitrary vertices
    let n = g.len();
    let mut adj = vec![Vec::new(); n];
    for &(a, b, _) in &g.edges {
        adj[a].push(b);
    }
    let reach_from = |start: &[usize]| {
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = start.to_vec();
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    };
    let mut order = Vec::new();
    for (i, ci) in components.iter().enumerate() {
        let seen = reach_from(&ci.vertices);
        for (j, cj) in components.iter().enumerate() {
            if i != j && seen[cj.vertices[0]] {
                order.push((i, j));
            }
        }
    }
    let primitive = (0..components.len())
        .filter(|&j| !order.iter().any(|&(_, t)| t == j))
        .collect();
    SccClassification { components, order, primitive }
}

/// Every vertex is reached by a forward walk from a primitive component.
pub fn generated_by_primitive(g: &CurveLiftGraph, cls: &SccClassification) -> bool {
    let n = g.len();
    let mut seen = vec![false; n];
    let mut stack: Vec<usize> = cls
        .primitive
        .iter()
        .flat_map(|&i| cls.components[i].vertices.iter().copied())
        .collect();
    for &v in &stack {
        seen[v] = true;
    }
    while let Some(v) = stack.pop() {
        for &(a, b, _) in &g.edges {
            if a == v && !seen[b] {
                seen[b] = true;
                stack.push(b);
            }
        }
    }
    seen.into_iter().all(|x| x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_loop_is_unicycle() {
        let g = CurveLiftGraph::from_edges(1, vec![(0, 0, 2)]);
        let c = classify_scc(&g);
        assert_eq!(c.components.len(), 1);
        assert_eq!(c.components[0].kind, SccKind::Unicycle);
    }

    #[test]
    fn double_loop_is_bicycle() {
        let g = CurveLiftGraph::from_edges(1, vec![(0, 0, 1), (0, 0, 1)]);
        assert_eq!(classify_scc(&g).components[0].kind, SccKind::Bicycle);
    }

    #[test]
    fn chorded_triangle_is_bicycle() {
        let g = CurveLiftGraph::from_edges(3, vec![(0, 1, 1), (1, 2, 1), (2, 0, 1), (0, 2, 1)]);
        let c = classify_scc(&g);
        assert_eq!(c.components[0].kind, SccKind::Bicycle);
        assert!(is_bicycle_by_walks(&g, &[0, 1, 2]));
    }

    #[test]
    fn loopless_singleton_is_not_a_component() {
        let g = CurveLiftGraph::from_edges(2, vec![(0, 0, 1), (0, 1, 1)]);
        let c = classify_scc(&g);
        assert_eq!(c.components.len(), 1);
        assert_eq!(c.primitive, vec![0]);
        assert!(generated_by_primitive(&g, &c));
    }
}
