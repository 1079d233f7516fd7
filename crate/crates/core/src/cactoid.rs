//! Finite cactoid models of the expanding quotient.
//!
//! Collapsing data splits an invariant multicurve into curves that become
//! points and curves that become segments, and the small spheres into those
//! that become points and those that stay spheres. The quotient of the
//! laminar tree under this data is a finite cactoid `X1`; lifting the data
//! gives `X2` together with the covering `f̄` and the forgetful map `ῑ`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::biset::{SearchBudget, WreathRecursion};
use crate::decomposer::{small_maps, CrochetDecomposition, NodeClass, SmallMapType, SmallSphereComplex, SmallSphereDynamics};
use crate::error::{Error, Result};
use crate::multicurve::{classify_scc, pullback, CurveLiftGraph, LiftTable, MultiCurve, SccKind};
use crate::words::{conj_class, ConjClass};

/// Default tolerance of the expansion certificate.
pub const TOLERANCE: f64 = 1e-9;

const ADDRESS_CAP: usize = 1 << 12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CollapsingData {
    /// The multicurve `C = C• ⊔ C−`.
    pub curves: MultiCurve,
    /// Indices into `curves` of `C−`, the curves opened into segments.
    pub segments: BTreeSet<usize>,
    /// Nodes of the cut along `curves` kept as spheres (`I∘`).
    pub spheres: BTreeSet<usize>,
}

/// JSON form of collapsing data: curves and segment curves as letter
/// arrays, spheres as node indices of the cut.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollapsingSpec {
    pub curves: Vec<Vec<i32>>,
    #[serde(default)]
    pub segments: Vec<Vec<i32>>,
    #[serde(default)]
    pub spheres: Vec<usize>,
}

impl CollapsingData {
    /// Canonical data of a decomposition: segments are the curves generated
    /// by bicycles, spheres are the Sierpiński nodes.
    pub fn from_decomposition(dec: &CrochetDecomposition) -> Self {
        let bicycles = dec
            .scc
            .components
            .iter()
            .filter(|c| c.kind == SccKind::Bicycle)
            .flat_map(|c| c.vertices.iter().copied());
        let segments = reach(&dec.graph, bicycles);
        let spheres = dec.classes.iter().filter(|c| c.kind == SmallMapType::Sierpinski).map(|c| c.node).collect();
        CollapsingData { curves: dec.c_dec.clone(), segments, spheres }
    }

    pub fn from_spec(r: &WreathRecursion, spec: &CollapsingSpec) -> Result<Self> {
        let class = |w: &Vec<i32>| r.base.to_free(w).map(|w| conj_class(&w));
        let curves = MultiCurve::new(&r.base, spec.curves.iter().map(class).collect::<Result<Vec<_>>>()?)?;
        let mut segments = BTreeSet::new();
        for w in &spec.segments {
            let c = class(w)?;
            let i = curves
                .index_of(&c)
                .ok_or_else(|| Error::NonDynamicalData(format!("segment curve {} is not in the multicurve", c.word())))?;
            segments.insert(i);
        }
        Ok(CollapsingData { curves, segments, spheres: spec.spheres.iter().copied().collect() })
    }

    pub fn to_spec(&self) -> CollapsingSpec {
        let arrays = self.curves.to_arrays();
        CollapsingSpec {
            segments: self.segments.iter().map(|&i| arrays[i].clone()).collect(),
            curves: arrays,
            spheres: self.spheres.iter().copied().collect(),
        }
    }

    pub fn points(&self) -> BTreeSet<usize> {
        (0..self.curves.len()).filter(|i| !self.segments.contains(i)).collect()
    }
}

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

/// Collapsing data checked against the dynamics of its multicurve.
#[derive(Clone, Debug)]
pub struct Collapse {
    pub data: CollapsingData,
    pub complex: SmallSphereComplex,
    pub dynamics: SmallSphereDynamics,
    pub classes: Vec<NodeClass>,
    pub graph: CurveLiftGraph,
    pub table: LiftTable,
}

/// Checks the hypotheses on collapsing data, classifying the small maps of
/// its multicurve within `budget`.
pub fn check_collapsing(r: &WreathRecursion, data: &CollapsingData, budget: &SearchBudget) -> Result<Collapse> {
    let (complex, dynamics, classes) = small_maps(r, &data.curves, budget).map_err(|e| match e {
        Error::NotInvariant(m) => Error::NonDynamicalData(format!("the multicurve is not invariant: {m}")),
        e => e,
    })?;
    check_over(r, data, complex, dynamics, classes)
}

/// Checks collapsing data over the multicurve of a decomposition, reusing
/// its classification.
pub fn check_against(r: &WreathRecursion, data: &CollapsingData, dec: &CrochetDecomposition) -> Result<Collapse> {
    if data.curves != dec.c_dec {
        return Err(Error::NonDynamicalData("collapsing data is over a different multicurve".into()));
    }
    check_over(r, data, dec.complex.clone(), dec.dynamics.clone(), dec.classes.clone())
}

/// Checks collapsing data against a given cut of its multicurve and the
/// types of the small maps.
pub fn check_over(
    r: &WreathRecursion,
    data: &CollapsingData,
    complex: SmallSphereComplex,
    dynamics: SmallSphereDynamics,
    classes: Vec<NodeClass>,
) -> Result<Collapse> {
    let bad = |m: String| Err(Error::NonDynamicalData(m));
    let c = &data.curves;
    if let Some(i) = data.segments.iter().find(|&&i| i >= c.len()) {
        return bad(format!("segment index {i} out of range"));
    }
    if let Some(z) = data.spheres.iter().find(|&&z| z >= complex.len()) {
        return bad(format!("sphere index {z} out of range"));
    }
    let (_, table) = pullback(r, c)?;
    let graph = CurveLiftGraph::build(r, c)?;

    for &j in &data.segments {
        if !graph.edges.iter().any(|&(i, t, _)| t == j && data.segments.contains(&i)) {
            return bad(format!("segment curve {} is not a lift of a segment curve", c.curves()[j].word()));
        }
    }
    let scc = classify_scc(&graph);
    let bicycles = scc
        .components
        .iter()
        .filter(|k| k.kind == SccKind::Bicycle && k.vertices.iter().all(|v| data.segments.contains(v)))
        .flat_map(|k| k.vertices.iter().copied());
    let generated = reach(&graph, bicycles);
    if let Some(&j) = data.segments.iter().find(|j| !generated.contains(j)) {
        return bad(format!("segment curve {} is not generated by bicycles", c.curves()[j].word()));
    }
    for &z in &data.spheres {
        match dynamics.image[z] {
            Some(y) if data.spheres.contains(&y) => {}
            _ => return bad(format!("sphere node {z} does not map to a sphere node")),
        }
        if dynamics.period[z].is_some() && classes[z].kind != SmallMapType::Sierpinski {
            return bad(format!("periodic sphere node {z} is not Sierpiński ({:?})", classes[z].kind));
        }
    }
    Ok(Collapse { data: data.clone(), complex, dynamics, classes, graph, table })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum CellRef {
    Point(usize),
    Sphere(usize),
    Segment(usize),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PointCell {
    pub punctures: Vec<usize>,
    /// Collapsed nodes.
    pub nodes: Vec<usize>,
    /// Curves of `C•` collapsed into the point.
    pub curves: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SphereCell {
    pub node: usize,
    /// Marked points on the sphere.
    pub marked: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SegmentCell {
    pub curve: usize,
    /// Endpoint on the inner side, then on the outer side.
    pub ends: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CactoidComplex {
    pub points: Vec<PointCell>,
    pub spheres: Vec<SphereCell>,
    pub segments: Vec<SegmentCell>,
    /// Cell of each node of the cut.
    pub node_cell: Vec<CellRef>,
    /// Point of each puncture (index `a-1`).
    pub puncture_point: Vec<usize>,
}

struct Uf(Vec<usize>);

impl Uf {
    fn find(&mut self, x: usize) -> usize {
        let mut x = x;
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn join(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        self.0[a.max(b)] = a.min(b);
    }
}

impl CactoidComplex {
    /// Collapses the cut along `data` without checking the data.
    pub fn build(n: usize, data: &CollapsingData, complex: &SmallSphereComplex) -> Self {
        let k = data.curves.len();
        let m = complex.len();
        let puncture = |a: usize| a - 1;
        let end = |i: usize, s: usize| n + 2 * i + s;
        let node_item = |z: usize| n + 2 * k + z;
        let ends_at = |z: usize| complex.nodes[z].boundary.iter().map(move |&i| end(i, usize::from(z != i + 1)));

        let mut uf = Uf((0..n + 2 * k + m).collect());
        for z in (0..m).filter(|z| !data.spheres.contains(z)) {
            for &a in &complex.nodes[z].punctures {
                uf.join(node_item(z), puncture(a));
            }
            for e in ends_at(z) {
                uf.join(node_item(z), e);
            }
        }
        for i in data.points() {
            uf.join(end(i, 0), end(i, 1));
        }

        let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
        let mut pid = |uf: &mut Uf, x: usize| {
            let root = uf.find(x);
            let next = ids.len();
            *ids.entry(root).or_insert(next)
        };
        let puncture_point: Vec<usize> = (1..=n).map(|a| pid(&mut uf, puncture(a))).collect();
        let end_point: Vec<[usize; 2]> = (0..k).map(|i| [pid(&mut uf, end(i, 0)), pid(&mut uf, end(i, 1))]).collect();
        let node_point: Vec<Option<usize>> =
            (0..m).map(|z| (!data.spheres.contains(&z)).then(|| pid(&mut uf, node_item(z)))).collect();

        let mut points = vec![PointCell::default(); ids.len()];
        for (a, &p) in puncture_point.iter().enumerate() {
            points[p].punctures.push(a + 1);
        }
        for i in data.points() {
            points[end_point[i][0]].curves.push(i);
        }
        let mut spheres = Vec::new();
        let mut node_cell = Vec::with_capacity(m);
        for z in 0..m {
            if let Some(p) = node_point[z] {
                points[p].nodes.push(z);
                node_cell.push(CellRef::Point(p));
            } else {
                let mut marked: Vec<usize> = complex.nodes[z].punctures.iter().map(|&a| puncture_point[a - 1]).collect();
                marked.extend(complex.nodes[z].boundary.iter().map(|&i| end_point[i][usize::from(z != i + 1)]));
                marked.sort();
                marked.dedup();
                node_cell.push(CellRef::Sphere(spheres.len()));
                spheres.push(SphereCell { node: z, marked });
            }
        }
        let segments = data.segments.iter().map(|&i| SegmentCell { curve: i, ends: end_point[i] }).collect();
        CactoidComplex { points, spheres, segments, node_cell, puncture_point }
    }

    /// The incidence graph of cells is a tree and every segment joins two
    /// distinct points.
    pub fn is_tree(&self) -> bool {
        let p = self.points.len();
        let s = self.spheres.len();
        let v = p + s + self.segments.len();
        let mut uf = Uf((0..v).collect());
        let mut e = 0;
        for (i, sp) in self.spheres.iter().enumerate() {
            for &x in &sp.marked {
                uf.join(p + i, x);
                e += 1;
            }
        }
        for (i, sg) in self.segments.iter().enumerate() {
            if sg.ends[0] == sg.ends[1] {
                return false;
            }
            for &x in &sg.ends {
                uf.join(p + s + i, x);
                e += 1;
            }
        }
        let roots: BTreeSet<usize> = (0..v).map(|x| uf.find(x)).collect();
        roots.len() == 1 && e + 1 == v
    }

    /// A single point: no spheres and no segments.
    pub fn is_point(&self) -> bool {
        self.spheres.is_empty() && self.segments.is_empty()
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("graph cactoid {\n");
        for (i, p) in self.points.iter().enumerate() {
            s.push_str(&format!("  p{i} [shape=point, xlabel=\"{:?}\"];\n", p.punctures));
        }
        for (i, sp) in self.spheres.iter().enumerate() {
            s.push_str(&format!("  s{i} [shape=circle, label=\"node {}\"];\n", sp.node));
            for &x in &sp.marked {
                s.push_str(&format!("  s{i} -- p{x};\n"));
            }
        }
        for sg in &self.segments {
            s.push_str(&format!("  p{} -- p{} [label=\"c{}\", penwidth=2];\n", sg.ends[0], sg.ends[1], sg.curve));
        }
        s.push_str("}\n");
        s
    }
}

pub fn build_cactoid(r: &WreathRecursion, data: &CollapsingData, budget: &SearchBudget) -> Result<CactoidComplex> {
    let col = check_collapsing(r, data, budget)?;
    Ok(CactoidComplex::build(r.n(), data, &col.complex))
}

/// A sphere of `X2` lying over a sphere of `X1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SphereLift {
    /// Node `z` whose essential preimage piece this is.
    pub node: usize,
    /// Sphere of `X1` that `f̄` covers.
    pub over: usize,
    pub degree: Option<usize>,
    /// Sphere of `X1` onto which `ῑ` is a homeomorphism; constant if `None`.
    pub iota: Option<usize>,
}

/// A segment of `X2`: one lift component of a segment curve.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SegmentLift {
    /// Segment of `X1` that `f̄` covers.
    pub over: usize,
    pub class: ConjClass,
    pub degree: usize,
    /// Segment of `X1` onto which `ῑ` is a homeomorphism; constant if `None`.
    pub iota: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CactoidCorrespondence {
    pub x1: CactoidComplex,
    pub spheres: Vec<SphereLift>,
    pub segments: Vec<SegmentLift>,
    /// `matrix[s][t]`: lifts of segment `s` mapped by `ῑ` across segment `t`.
    pub matrix: Vec<Vec<u64>>,
    /// Periodic sphere cycles with their return degree.
    pub sphere_cycles: Vec<(Vec<usize>, Option<usize>)>,
}

fn correspondence(r: &WreathRecursion, col: &Collapse) -> CactoidCorrespondence {
    let data = &col.data;
    let x1 = CactoidComplex::build(r.n(), data, &col.complex);
    let sphere_of = |z: usize| match x1.node_cell[z] {
        CellRef::Sphere(s) => Some(s),
        _ => None,
    };
    let mut spheres = Vec::new();
    for z in 0..col.complex.len() {
        if let Some(over) = col.dynamics.image[z].and_then(sphere_of) {
            spheres.push(SphereLift { node: z, over, degree: col.dynamics.degree[z], iota: sphere_of(z) });
        }
    }
    let seg_pos: BTreeMap<usize, usize> = data.segments.iter().enumerate().map(|(s, &i)| (i, s)).collect();
    let mut segments = Vec::new();
    let mut matrix = vec![vec![0u64; seg_pos.len()]; seg_pos.len()];
    for (&i, &s) in &seg_pos {
        for l in &col.table[&data.curves.curves()[i]] {
            let iota = if l.essential { data.curves.index_of(&l.class).and_then(|j| seg_pos.get(&j).copied()) } else { None };
            if let Some(t) = iota {
                matrix[s][t] += 1;
            }
            segments.push(SegmentLift { over: s, class: l.class.clone(), degree: l.degree, iota });
        }
    }
    let sphere_cycles = col
        .dynamics
        .cycles
        .iter()
        .filter(|cy| cy.iter().all(|z| data.spheres.contains(z)))
        .map(|cy| {
            let deg = cy.iter().try_fold(1usize, |acc, &z| col.dynamics.degree[z].map(|d| acc * d));
            (cy.clone(), deg)
        })
        .collect();
    CactoidCorrespondence { x1, spheres, segments, matrix, sphere_cycles }
}

pub fn build_correspondence(
    r: &WreathRecursion,
    data: &CollapsingData,
    budget: &SearchBudget,
) -> Result<CactoidCorrespondence> {
    Ok(correspondence(r, &check_collapsing(r, data, budget)?))
}

/// Correspondence of the canonical collapsing data of a decomposition.
pub fn decomposition_correspondence(r: &WreathRecursion, dec: &CrochetDecomposition) -> Result<CactoidCorrespondence> {
    let data = CollapsingData::from_decomposition(dec);
    Ok(correspondence(r, &check_against(r, &data, dec)?))
}

/// Subdivision matrix of a set of curves of an invariant multicurve,
/// without checking any hypothesis on them.
pub fn lift_matrix(r: &WreathRecursion, c: &MultiCurve, segments: &BTreeSet<usize>) -> Result<Vec<Vec<u64>>> {
    let graph = CurveLiftGraph::build(r, c)?;
    let pos: BTreeMap<usize, usize> = segments.iter().enumerate().map(|(s, &i)| (i, s)).collect();
    let mut m = vec![vec![0u64; pos.len()]; pos.len()];
    for &(a, b, _) in &graph.edges {
        if let (Some(&s), Some(&t)) = (pos.get(&a), pos.get(&b)) {
            m[s][t] += 1;
        }
    }
    Ok(m)
}

/// Enclosure of the Perron value of an irreducible nonnegative matrix.
///
/// Power iteration runs on `M + I`, which is primitive, and the
/// Collatz-Wielandt quotients of the final vector are evaluated in exact
/// integer arithmetic, then rounded outwards.
pub fn perron_bounds(m: &[Vec<u64>]) -> (f64, f64) {
    let n = m.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let b = |i: usize, j: usize| m[i][j] as f64 + if i == j { 1.0 } else { 0.0 };
    let mut x = vec![1.0f64; n];
    for _ in 0..10_000 {
        let y: Vec<f64> = (0..n).map(|i| (0..n).map(|j| b(i, j) * x[j]).sum()).collect();
        let top = y.iter().cloned().fold(0.0, f64::max);
        let next: Vec<f64> = y.iter().map(|v| v / top).collect();
        let moved = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = next;
        if moved < 1e-15 {
            break;
        }
    }
    let scale = (1u64 << 40) as f64;
    let xi: Vec<u128> = x.iter().map(|v| ((v * scale).round() as u128).max(1)).collect();
    let yi: Vec<u128> = (0..n)
        .map(|i| (0..n).map(|j| (m[i][j] as u128 + u128::from(i == j)) * xi[j]).sum())
        .collect();
    // min and max of y_i / x_i compared exactly
    let mut lo = 0;
    let mut hi = 0;
    for i in 1..n {
        if yi[i] * xi[lo] < yi[lo] * xi[i] {
            lo = i;
        }
        if yi[i] * xi[hi] > yi[hi] * xi[i] {
            hi = i;
        }
    }
    let down = |v: f64| v.next_down().next_down();
    let up = |v: f64| v.next_up().next_up();
    let lower = down(down(yi[lo] as f64 / xi[lo] as f64) - 1.0);
    let upper = up(up(yi[hi] as f64 / xi[hi] as f64) - 1.0);
    (lower.max(0.0), upper)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockBound {
    /// Segment indices of the strongly connected block.
    pub segments: Vec<usize>,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionCertificate {
    pub matrix: Vec<Vec<u64>>,
    pub blocks: Vec<BlockBound>,
    pub sphere_cycles: Vec<(Vec<usize>, Option<usize>)>,
    pub tolerance: f64,
    /// Smallest lower bound over the blocks.
    pub rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionFailure {
    pub certificate: ExpansionCertificate,
    pub reasons: Vec<String>,
}

/// Checks a subdivision matrix block by block and the return degrees of
/// sphere cycles.
pub fn certify_matrix(
    matrix: &[Vec<u64>],
    sphere_cycles: &[(Vec<usize>, Option<usize>)],
    tolerance: f64,
) -> std::result::Result<ExpansionCertificate, ExpansionFailure> {
    let n = matrix.len();
    let mut edges = Vec::new();
    for (i, row) in matrix.iter().enumerate() {
        for (j, &k) in row.iter().enumerate() {
            edges.extend(std::iter::repeat((i, j, 1)).take(k as usize));
        }
    }
    let scc = classify_scc(&CurveLiftGraph::from_edges(n, edges));
    let mut reasons = Vec::new();
    let mut blocks = Vec::new();
    for comp in &scc.components {
        let sub: Vec<Vec<u64>> =
            comp.vertices.iter().map(|&i| comp.vertices.iter().map(|&j| matrix[i][j]).collect()).collect();
        let (lower, upper) = perron_bounds(&sub);
        if lower <= 1.0 + tolerance {
            reasons.push(format!("block {:?} has Perron value at most {upper}", comp.vertices));
        }
        blocks.push(BlockBound { segments: comp.vertices.clone(), lower, upper });
    }
    for (cy, deg) in sphere_cycles {
        if deg.map_or(true, |d| d < 2) {
            reasons.push(format!("sphere cycle {cy:?} has return degree {deg:?}"));
        }
    }
    let rate = blocks.iter().map(|b| b.lower).reduce(f64::min);
    let certificate =
        ExpansionCertificate { matrix: matrix.to_vec(), blocks, sphere_cycles: sphere_cycles.to_vec(), tolerance, rate };
    if reasons.is_empty() {
        Ok(certificate)
    } else {
        Err(ExpansionFailure { certificate, reasons })
    }
}

pub fn certify_expansion(
    corr: &CactoidCorrespondence,
    tolerance: f64,
) -> std::result::Result<ExpansionCertificate, ExpansionFailure> {
    certify_matrix(&corr.matrix, &corr.sphere_cycles, tolerance)
}

/// Cells of the level `n` cactoid, seen through `ῑ^n` over `X1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelCactoid {
    pub level: usize,
    /// Number of segment cells over each segment of `X1`.
    pub segment_cells: Vec<u64>,
    /// Spheres carried homeomorphically at every level.
    pub sphere_cells: usize,
    /// Addresses of the segment cells: indices into the segment lifts of
    /// the correspondence, outermost first. Empty when over the cap.
    pub addresses: Vec<Vec<Vec<usize>>>,
    /// Symbolic diameter bound of the segment cells.
    pub mesh: f64,
}

pub fn iterate_correspondence(corr: &CactoidCorrespondence, n: usize) -> LevelCactoid {
    let k = corr.matrix.len();
    let mut counts = vec![1u64; k];
    for _ in 0..n {
        counts = (0..k)
            .map(|t| (0..k).fold(0u64, |acc, s| acc.saturating_add(corr.matrix[s][t].saturating_mul(counts[s]))))
            .collect();
    }
    let total = counts.iter().fold(0u64, |a, &b| a.saturating_add(b));
    let mut addresses = vec![Vec::new(); k];
    if total as usize <= ADDRESS_CAP {
        for (t, out) in addresses.iter_mut().enumerate() {
            let mut level: Vec<(usize, Vec<usize>)> = vec![(t, Vec::new())];
            for _ in 0..n {
                let mut next = Vec::new();
                for (seg, addr) in &level {
                    for (e, l) in corr.segments.iter().enumerate().filter(|(_, l)| l.iota == Some(*seg)) {
                        let mut a = addr.clone();
                        a.push(e);
                        next.push((l.over, a));
                    }
                }
                level = next;
            }
            *out = level.into_iter().map(|(_, a)| a).collect();
        }
    }
    let rate = certify_expansion(corr, TOLERANCE)
        .map(|c| c.rate)
        .unwrap_or_else(|f| f.certificate.rate)
        .unwrap_or(1.0)
        .max(1.0);
    LevelCactoid {
        level: n,
        segment_cells: counts,
        sphere_cells: corr.x1.spheres.len(),
        addresses,
        mesh: if k == 0 { 0.0 } else { rate.powi(-(n as i32)) },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum QuotientKind {
    Point,
    Dendrite,
    Cactoid,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NodeImage {
    pub node: usize,
    pub kind: SmallMapType,
    pub cell: CellRef,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlternativeCheck {
    pub data: CollapsingSpec,
    /// Validation error, if the data was rejected.
    pub rejected: Option<String>,
    /// Whether the canonical partition of the punctures refines this one.
    pub refined: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuotientReport {
    pub kind: QuotientKind,
    pub data: CollapsingSpec,
    pub cactoid: CactoidComplex,
    pub certificate: Option<ExpansionCertificate>,
    pub expansion_failure: Option<Vec<String>>,
    /// Cell receiving the small Julia set of each node.
    pub nodes: Vec<NodeImage>,
    /// Cell receiving each curve: a point, or a segment carrying a Cantor
    /// family of curves.
    pub curves: Vec<CellRef>,
    pub crochet_points_distinct: bool,
    pub alternatives: Vec<AlternativeCheck>,
}

/// `a ~ b` in `fine` implies `a ~ b` in `coarse`.
pub fn refines(fine: &[usize], coarse: &[usize]) -> bool {
    let mut image: BTreeMap<usize, usize> = BTreeMap::new();
    fine.iter().zip(coarse).all(|(&f, &c)| *image.entry(f).or_insert(c) == c)
}

pub fn quotient_report(
    r: &WreathRecursion,
    dec: &CrochetDecomposition,
    alternatives: &[CollapsingData],
    budget: &SearchBudget,
) -> Result<QuotientReport> {
    let data = CollapsingData::from_decomposition(dec);
    let col = check_against(r, &data, dec)?;
    let corr = correspondence(r, &col);
    let x = &corr.x1;
    let kind = if !x.spheres.is_empty() {
        QuotientKind::Cactoid
    } else if !x.segments.is_empty() {
        QuotientKind::Dendrite
    } else {
        QuotientKind::Point
    };
    let (certificate, expansion_failure) = match certify_expansion(&corr, TOLERANCE) {
        Ok(c) => (Some(c), None),
        Err(f) => (None, Some(f.reasons)),
    };
    let nodes: Vec<NodeImage> =
        dec.classes.iter().map(|c| NodeImage { node: c.node, kind: c.kind, cell: x.node_cell[c.node] }).collect();
    let crochet: Vec<CellRef> = nodes.iter().filter(|n| n.kind == SmallMapType::Crochet).map(|n| n.cell).collect();
    let crochet_points_distinct = crochet.iter().collect::<BTreeSet<_>>().len() == crochet.len();
    let seg_of: BTreeMap<usize, usize> = x.segments.iter().enumerate().map(|(s, g)| (g.curve, s)).collect();
    let curves = (0..data.curves.len())
        .map(|i| match seg_of.get(&i) {
            Some(&s) => CellRef::Segment(s),
            None => CellRef::Point(x.points.iter().position(|p| p.curves.contains(&i)).expect("collapsed curve")),
        })
        .collect();
    let mut checks = Vec::new();
    for alt in alternatives {
        let checked = if alt.curves == dec.c_dec { check_against(r, alt, dec) } else { check_collapsing(r, alt, budget) };
        checks.push(match checked {
            Ok(c) => {
                let y = CactoidComplex::build(r.n(), alt, &c.complex);
                AlternativeCheck {
                    data: alt.to_spec(),
                    rejected: None,
                    refined: Some(refines(&x.puncture_point, &y.puncture_point)),
                }
            }
            Err(e) => AlternativeCheck { data: alt.to_spec(), rejected: Some(e.to_string()), refined: None },
        });
    }
    Ok(QuotientReport {
        kind,
        data: data.to_spec(),
        cactoid: corr.x1.clone(),
        certificate,
        expansion_failure,
        nodes,
        curves,
        crochet_points_distinct,
        alternatives: checks,
    })
}

/// Every collapsing data over `c` with the given node count, in a fixed
/// order. Exponential; meant for small multicurves.
pub fn all_collapsing_data(c: &MultiCurve, nodes: usize) -> Vec<CollapsingData> {
    let k = c.len();
    let mut out = Vec::new();
    for sm in 0u64..(1 << k) {
        for nm in 0u64..(1 << nodes) {
            out.push(CollapsingData {
                curves: c.clone(),
                segments: (0..k).filter(|i| sm >> i & 1 == 1).collect(),
                spheres: (0..nodes).filter(|z| nm >> z & 1 == 1).collect(),
            });
        }
    }
    out
}
