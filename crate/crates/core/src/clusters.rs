//! Touching Fatou components and clusters.
//!
//! An angled arc runs from a marked point along an internal ray, through a
//! landing point and back along a ray of the other endpoint. Angles are
//! measured counterclockwise from the direction of the leg in turns, so a
//! lift through position `j` of a cycle of length `k` sends `t` to
//! `(j + t) / k`. Angles at Julia endpoints carry no information; arcs are
//! kept in the coset normal form there with angle zero.

use std::collections::{BTreeMap, BTreeSet};

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Serialize, Serializer};

use crate::biset::{lift_arc, nucleus_bound, MarkedDynamics, Nucleus, SearchBudget, WreathRecursion};
use crate::error::{Error, Result};
use crate::multicurve::{lift_entries, MultiCurve};
use crate::par;
use crate::words::{
    arc_normalize, conj_class, normalize_left, normalize_right, side_partition, ArcClass, ConjClass,
    SphereGroupPresentation, Word,
};

pub type Angle = Ratio<i64>;

fn ser_angle<S: Serializer>(t: &Angle, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{}/{}", t.numer(), t.denom()))
}

/// Arc from `a` to `b` homotopic to `leg_a^-1 w leg_b`, leaving `a` at
/// angle `ta` and arriving at `b` at angle `tb`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct AngledArc {
    pub a: usize,
    pub b: usize,
    pub w: Word,
    #[serde(serialize_with = "ser_angle")]
    pub ta: Angle,
    #[serde(serialize_with = "ser_angle")]
    pub tb: Angle,
}

impl AngledArc {
    pub fn new(a: usize, b: usize, w: Word, ta: Angle, tb: Angle) -> Self {
        AngledArc { a, b, w, ta, tb }
    }

    pub fn reversed(&self) -> Self {
        AngledArc { a: self.b, b: self.a, w: self.w.inverse(), ta: self.tb, tb: self.ta }
    }

    pub fn class(&self) -> ArcClass {
        ArcClass::new(self.a, self.b, self.w.clone())
    }
}

/// Coset normal form at Julia endpoints and a fixed orientation.
pub fn canonical(p: &SphereGroupPresentation, dy: &MarkedDynamics, arc: &AngledArc) -> AngledArc {
    let mut x = arc.clone();
    let one = Angle::from_integer(1);
    while x.ta >= one {
        x.ta -= one;
        x.w = p.generator(x.a).inverse().mul(&x.w);
    }
    while x.tb >= one {
        x.tb -= one;
        x.w = x.w.mul(&p.generator(x.b));
    }
    if !dy.is_fatou(x.a) {
        x.w = normalize_left(p, &x.w, x.a);
        x.ta = Angle::from_integer(0);
    }
    if !dy.is_fatou(x.b) {
        x.w = normalize_right(p, &x.w, x.b);
        x.tb = Angle::from_integer(0);
    }
    let y = x.reversed();
    if (y.a, y.ta, y.b, y.tb, &y.w) < (x.a, x.ta, x.b, x.tb, &x.w) {
        y
    } else {
        x
    }
}

/// All lifts with marked endpoints, not normalized.
pub fn lift_angled(r: &WreathRecursion, dy: &MarkedDynamics, arc: &AngledArc) -> Vec<AngledArc> {
    let mut out = Vec::new();
    for i in 0..r.degree {
        let Some((a2, ja)) = dy.sheet_owner[arc.a - 1][i] else { continue };
        let (j, rho) = r.restrict(&arc.w, i);
        let Some((b2, jb)) = dy.sheet_owner[arc.b - 1][j] else { continue };
        let la = &dy.legs[a2 - 1];
        let lb = &dy.legs[b2 - 1];
        let w = la.legs[ja].inverse().mul(&rho).mul(&lb.legs[jb]);
        let ta = (Angle::from_integer(ja as i64) + arc.ta) / Angle::from_integer(la.sheets.len() as i64);
        let tb = (Angle::from_integer(jb as i64) + arc.tb) / Angle::from_integer(lb.sheets.len() as i64);
        out.push(AngledArc { a: a2, b: b2, w, ta, tb });
    }
    out
}

fn frac(t: Angle) -> Angle {
    t - t.floor()
}

/// Angles of exact period `q` under multiplication by `d`.
pub fn periodic_angles(d: i64, q: u32) -> Vec<Angle> {
    let m = d.pow(q) - 1;
    (0..m.max(1))
        .map(|k| Angle::new(k, m.max(1)))
        .filter(|t| {
            let mut s = *t;
            (1..=q).find(|_| {
                s = frac(s * d);
                s == *t
            }) == Some(q)
        })
        .collect()
}

/// Product of local degrees along the cycle of a periodic point.
pub fn return_degree(dy: &MarkedDynamics, a: usize) -> Option<i64> {
    let p = dy.period[a - 1]?;
    Some((0..p).map(|k| dy.local_degree(dy.iterate(a, k)) as i64).product())
}

/// Forward orbit of the ray `(a, t)` until it closes up.
fn ray_orbit(dy: &MarkedDynamics, a: usize, t: Angle) -> Vec<(usize, Angle)> {
    let mut out = vec![(a, t)];
    loop {
        let (x, s) = *out.last().unwrap();
        let next = (dy.image(x), frac(s * dy.local_degree(x) as i64));
        if next == out[0] || out.len() > 4096 {
            return out;
        }
        out.push(next);
    }
}

fn predecessor(dy: &MarkedDynamics, b: usize) -> usize {
    let p = dy.period[b - 1].expect("periodic");
    dy.iterate(b, p - 1)
}

fn short_words(n: usize) -> Vec<Word> {
    let mut out = vec![Word::identity()];
    for g in 1..n as i32 {
        out.push(Word::new([g]));
        out.push(Word::new([-g]));
    }
    out
}

/// Short words with up to `SEED_WINDING` turns around either endpoint.
fn seeds(r: &WreathRecursion, a: usize, b: usize) -> Vec<Word> {
    let turn = |x: usize, k: i32| {
        let g = r.base.generator(x);
        (0..k.abs()).fold(Word::identity(), |acc, _| acc.mul(&if k > 0 { g.clone() } else { g.inverse() }))
    };
    let mut out = Vec::new();
    for s in short_words(r.n()) {
        for i in -SEED_WINDING..=SEED_WINDING {
            for j in -SEED_WINDING..=SEED_WINDING {
                out.push(turn(a, i).mul(&s).mul(&turn(b, j)));
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

const SEED_WINDING: i32 = 2;

/// Follows the lifts of arcs from the ray `(a, t)` to `b` that stay between
/// the periodic predecessors and returns the arcs on the limit cycles.
pub fn ray_search(
    r: &WreathRecursion,
    dy: &MarkedDynamics,
    a: usize,
    t: Angle,
    b: usize,
    budget: &SearchBudget,
) -> BTreeSet<AngledArc> {
    let orbit = ray_orbit(dy, a, t);
    let len = orbit.len();
    let pb = dy.period[b - 1].expect("periodic endpoint");
    let m = len.lcm(&pb);
    let fatou_b = dy.is_fatou(b);
    let mut found = BTreeSet::new();
    for seed in seeds(r, a, b) {
        // state: (step mod m, word); b-end moves backwards along its cycle
        let mut seen: BTreeMap<(usize, Word), usize> = BTreeMap::new();
        let mut trail: Vec<(usize, Word, usize, usize)> = Vec::new();
        let mut w = seed;
        let mut y = b;
        let mut step = 0usize;
        let closed = loop {
            if w.len() > budget.max_len || step > budget.max_depth * m {
                break None;
            }
            if let Some(&s) = seen.get(&(step % m, w.clone())) {
                break Some(s);
            }
            seen.insert((step % m, w.clone()), trail.len());
            let (x, tx) = orbit[(len - step % len) % len];
            let (x2, t2) = orbit[(len - (step + 1) % len) % len];
            let k = dy.local_degree(x2) as i64;
            let j = (t2 * k - tx).to_integer();
            let leg = &dy.legs[x2 - 1];
            debug_assert_eq!(dy.image(x2), x);
            let sheet = leg.sheets[j as usize];
            let (end, rho) = r.restrict(&w, sheet);
            let y2 = predecessor(dy, y);
            match dy.sheet_owner[y - 1][end] {
                Some((owner, jb)) if owner == y2 => {
                    let lb = &dy.legs[y2 - 1];
                    let mut w2 = leg.legs[j as usize].inverse().mul(&rho).mul(&lb.legs[jb]);
                    if !fatou_b {
                        w2 = normalize_right(&r.base, &w2, y2);
                    }
                    trail.push((step % m, w.clone(), jb, lb.sheets.len()));
                    w = w2;
                    y = y2;
                    step += 1;
                }
                _ => break None,
            }
        };
        let Some(start) = closed else { continue };
        let cyc = &trail[start..];
        // b-angles: fixed point of the affine contraction around the cycle
        let etas = if fatou_b {
            let (mut ca, mut cb) = (Angle::from_integer(1), Angle::from_integer(0));
            for &(_, _, jb, kb) in cyc {
                let kb = Angle::from_integer(kb as i64);
                ca /= kb;
                cb = (cb + Angle::from_integer(jb as i64)) / kb;
            }
            let mut eta = cb / (Angle::from_integer(1) - ca);
            let mut etas = Vec::with_capacity(cyc.len());
            for &(_, _, jb, kb) in cyc {
                etas.push(eta);
                eta = (Angle::from_integer(jb as i64) + eta) / Angle::from_integer(kb as i64);
            }
            etas
        } else {
            vec![Angle::from_integer(0); cyc.len()]
        };
        let mut yb = b;
        for _ in 0..start {
            yb = predecessor(dy, yb);
        }
        for (&(s, ref word, _, _), eta) in cyc.iter().zip(etas) {
            let (x, tx) = orbit[(len - s % len) % len];
            found.insert(canonical(&r.base, dy, &AngledArc::new(x, yb, word.clone(), tx, eta)));
            yb = predecessor(dy, yb);
        }
    }
    found
}

/// Periodic angled arcs from periodic Fatou centers to periodic marked
/// points, over rays of period at most `max_ray_period`.
pub fn levy_arcs(
    r: &WreathRecursion,
    dy: &MarkedDynamics,
    budget: &SearchBudget,
    max_ray_period: u32,
) -> BTreeSet<AngledArc> {
    let n = r.n();
    let mut jobs = Vec::new();
    for a in 1..=n {
        if !dy.a_inf.contains(&a) {
            continue;
        }
        let d = return_degree(dy, a).unwrap();
        let angles: Vec<Angle> = (1..=max_ray_period).flat_map(|q| periodic_angles(d, q)).collect();
        for b in (1..=n).filter(|&b| b != a && dy.period[b - 1].is_some()) {
            for t in &angles {
                jobs.push((a, *t, b));
            }
        }
    }
    par::map(&jobs, |&(a, t, b)| ray_search(r, dy, a, t, b, budget))
        .into_iter()
        .flatten()
        .collect()
}

/// Two internal rays given by marked center and angle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RayPair {
    pub a: usize,
    #[serde(serialize_with = "ser_angle")]
    pub ta: Angle,
    pub b: usize,
    #[serde(serialize_with = "ser_angle")]
    pub tb: Angle,
}

/// Whether the two rays land together. Both centers must be periodic
/// Fatou points.
pub fn touch(r: &WreathRecursion, dy: &MarkedDynamics, rays: &RayPair, budget: &SearchBudget) -> Result<bool> {
    for x in [rays.a, rays.b] {
        if !dy.a_inf.contains(&x) {
            return Err(Error::Shape(format!("{} is not a periodic Fatou center", r.base.name(x))));
        }
    }
    if rays.a == rays.b {
        return Ok(rays.ta == rays.tb);
    }
    let found = ray_search(r, dy, rays.a, rays.ta, rays.b, budget);
    let want = |x: &AngledArc| {
        (x.a, x.ta, x.b, x.tb) == (rays.a, rays.ta, rays.b, rays.tb)
            || (x.b, x.tb, x.a, x.ta) == (rays.a, rays.ta, rays.b, rays.tb)
    };
    Ok(found.iter().any(want))
}

/// Outcome of following the restricted lifts of an arc class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum LevyStatus {
    /// The class returns after `period` steps; `witness` lists the cycle.
    Periodic { period: usize, witness: Vec<ArcClass> },
    NotWithinBudget,
    /// No lift returns between the tracked endpoints.
    ShrinksOut,
}

/// Set-valued iteration of arc lifts that stay between the periodic
/// predecessors of the endpoints.
pub fn is_levy_arc(r: &WreathRecursion, dy: &MarkedDynamics, arc: &ArcClass, budget: &SearchBudget) -> LevyStatus {
    let (Some(pa), Some(pb)) = (dy.period[arc.a - 1], dy.period[arc.b - 1]) else {
        return LevyStatus::NotWithinBudget;
    };
    let m = pa.lcm(&pb);
    let start = arc_normalize(&r.base, arc);
    let mut parent: BTreeMap<(usize, ArcClass), Option<(usize, ArcClass)>> = BTreeMap::new();
    parent.insert((0, start.clone()), None);
    let mut layer = vec![start.clone()];
    let certified = matches!(nucleus_bound(r, budget), Nucleus::Found(_));
    for step in 0..budget.max_depth * m {
        let mut next = Vec::new();
        for x in &layer {
            let (a2, b2) = (predecessor(dy, x.a), predecessor(dy, x.b));
            for y in lift_arc(r, dy, x) {
                let y = if (y.a, y.b) == (a2, b2) {
                    y
                } else if (y.b, y.a) == (a2, b2) {
                    arc_normalize(&r.base, &y.reversed())
                } else {
                    continue;
                };
                if y.w.len() > budget.max_len {
                    continue;
                }
                let key = ((step + 1) % m, y.clone());
                if (step + 1) % m == 0 && y == start {
                    let mut witness = vec![y.clone()];
                    let mut cur = Some(((step % m), x.clone()));
                    while let Some(k) = cur {
                        witness.push(k.1.clone());
                        cur = parent.get(&k).cloned().flatten();
                    }
                    witness.reverse();
                    witness.pop();
                    return LevyStatus::Periodic { period: step + 1, witness };
                }
                if !parent.contains_key(&key) {
                    parent.insert(key, Some((step % m, x.clone())));
                    next.push(y);
                }
            }
        }
        if next.is_empty() {
            return if certified { LevyStatus::ShrinksOut } else { LevyStatus::NotWithinBudget };
        }
        layer = next;
    }
    LevyStatus::NotWithinBudget
}

/// Growth stage of the clusters: arcs known at this level and the induced
/// partition of the marked points.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClusterState {
    pub level: usize,
    pub arcs: BTreeSet<AngledArc>,
    #[serde(skip)]
    frontier: BTreeSet<AngledArc>,
    /// Smallest marked point of the cluster of each puncture.
    pub cluster_of: Vec<usize>,
}

fn find(uf: &mut [usize], x: usize) -> usize {
    let mut x = x;
    while uf[x] != x {
        uf[x] = uf[uf[x]];
        x = uf[x];
    }
    x
}

fn partition(n: usize, arcs: &BTreeSet<AngledArc>) -> Vec<usize> {
    let mut uf: Vec<usize> = (0..=n).collect();
    for e in arcs {
        let (x, y) = (find(&mut uf, e.a), find(&mut uf, e.b));
        uf[x.max(y)] = x.min(y);
    }
    (1..=n).map(|a| find(&mut uf, a)).collect()
}

impl ClusterState {
    pub fn initial(n: usize) -> Self {
        ClusterState { level: 0, arcs: BTreeSet::new(), frontier: BTreeSet::new(), cluster_of: (1..=n).collect() }
    }

    pub fn same_cluster(&self, a: usize, b: usize) -> bool {
        self.cluster_of[a - 1] == self.cluster_of[b - 1]
    }

    /// The marked points of each cluster, in order of their smallest point.
    pub fn clusters(&self) -> Vec<BTreeSet<usize>> {
        let mut m: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for (i, &c) in self.cluster_of.iter().enumerate() {
            m.entry(c).or_default().insert(i + 1);
        }
        m.into_values().collect()
    }

    /// Points outside the cluster of `a` sharing a complementary component
    /// of its spine. Spines are trees, so the complement is connected.
    pub fn same_complement(&self, a: usize, b: usize, c: usize) -> bool {
        !self.same_cluster(a, b) && !self.same_cluster(a, c)
    }
}

/// One growth step: level 1 adds the periodic arcs, later levels add the
/// lifts of the arcs added last.
pub fn grow_clusters(
    r: &WreathRecursion,
    dy: &MarkedDynamics,
    state: &ClusterState,
    periodic: &BTreeSet<AngledArc>,
    budget: &SearchBudget,
) -> Result<ClusterState> {
    let new: BTreeSet<AngledArc> = if state.level == 0 {
        periodic.clone()
    } else {
        let front: Vec<&AngledArc> = state.frontier.iter().collect();
        par::map(&front, |e| lift_angled(r, dy, e))
            .into_iter()
            .flatten()
            .filter(|e| e.w.len() <= budget.max_len)
            .map(|e| canonical(&r.base, dy, &e))
            .filter(|e| !state.arcs.contains(e))
            .collect()
    };
    let mut arcs = state.arcs.clone();
    arcs.extend(new.iter().cloned());
    if arcs.len() > 4096 * budget.max_len {
        return Err(Error::BudgetExhausted(format!("{} arcs at cluster level {}", arcs.len(), state.level + 1)));
    }
    let cluster_of = partition(r.n(), &arcs);
    Ok(ClusterState { level: state.level + 1, arcs, frontier: new, cluster_of })
}

/// Clusters after stabilization.
#[derive(Clone, Debug, Serialize)]
pub struct Clusters {
    pub state: ClusterState,
    pub periodic_arcs: BTreeSet<AngledArc>,
    /// Partition after each level, starting with the singletons.
    pub history: Vec<Vec<usize>>,
    /// First level from which the partition no longer changed.
    pub stable_level: usize,
}

/// Grows clusters until the partition repeats, then checks one further
/// level.
pub fn stabilize(r: &WreathRecursion, dy: &MarkedDynamics, budget: &SearchBudget) -> Result<Clusters> {
    let periodic = levy_arcs(r, dy, budget, 3);
    let mut state = ClusterState::initial(r.n());
    let mut history = vec![state.cluster_of.clone()];
    let mut quiet = 0;
    for _ in 0..budget.max_depth.max(2) + r.n() {
        let next = grow_clusters(r, dy, &state, &periodic, budget)?;
        let same = next.cluster_of == state.cluster_of && state.level > 0;
        history.push(next.cluster_of.clone());
        state = next;
        quiet = if same { quiet + 1 } else { 0 };
        if quiet >= 2 || (quiet == 1 && state.frontier.is_empty()) {
            let stable_level = history.len() - 1 - quiet;
            return Ok(Clusters { state, periodic_arcs: periodic, history, stable_level });
        }
    }
    Err(Error::BudgetExhausted("cluster partition did not stabilize".into()))
}

/// Spanning tree of a cluster made from its arcs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RibbonSpine {
    pub vertices: Vec<usize>,
    pub edges: Vec<AngledArc>,
}

impl RibbonSpine {
    pub fn build(cluster: &BTreeSet<usize>, arcs: &BTreeSet<AngledArc>, prefer: &BTreeSet<AngledArc>) -> Self {
        let mut cand: Vec<&AngledArc> = arcs.iter().filter(|e| cluster.contains(&e.a) && cluster.contains(&e.b)).collect();
        cand.sort_by_key(|e| (!prefer.contains(*e), e.w.len(), (*e).clone()));
        let n = cluster.iter().max().copied().unwrap_or(0);
        let mut uf: Vec<usize> = (0..=n).collect();
        let mut edges = Vec::new();
        for e in cand {
            let (x, y) = (find(&mut uf, e.a), find(&mut uf, e.b));
            if x != y {
                uf[x.max(y)] = x.min(y);
                edges.push(e.clone());
            }
        }
        RibbonSpine { vertices: cluster.iter().copied().collect(), edges }
    }

    /// Boundary loops of a regular neighbourhood, one for every admissible
    /// way of breaking ties between edges leaving a vertex at equal angles.
    pub fn boundary_candidates(&self, p: &SphereGroupPresentation, limit: usize) -> Vec<Word> {
        let Some(&root) = self.vertices.first() else { return Vec::new() };
        // incident edges oriented away from each vertex
        let mut inc: BTreeMap<usize, Vec<AngledArc>> = BTreeMap::new();
        for e in &self.edges {
            inc.entry(e.a).or_default().push(e.clone());
            inc.entry(e.b).or_default().push(e.reversed());
        }
        for v in inc.values_mut() {
            v.sort_by(|x, y| (x.ta, x.b).cmp(&(y.ta, y.b)));
        }
        // tie groups: runs of equal angle
        let mut groups: Vec<(usize, usize, usize)> = Vec::new();
        for (&v, es) in &inc {
            let mut s = 0;
            while s < es.len() {
                let mut e = s + 1;
                while e < es.len() && es[e].ta == es[s].ta {
                    e += 1;
                }
                if e - s > 1 {
                    groups.push((v, s, e));
                }
                s = e;
            }
        }
        let mut orders = vec![inc.clone()];
        for &(v, s, e) in &groups {
            let mut next = Vec::new();
            for o in &orders {
                for perm in permutations(e - s) {
                    let mut o2 = o.clone();
                    let base = o[&v][s..e].to_vec();
                    for (i, &k) in perm.iter().enumerate() {
                        o2.get_mut(&v).unwrap()[s + i] = base[k].clone();
                    }
                    next.push(o2);
                }
                if next.len() > limit {
                    break;
                }
            }
            next.truncate(limit);
            orders = next;
        }
        orders.iter().map(|o| loop_at(p, o, root, None)).collect()
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, k - 1);
            out.push(q);
        }
    }
    out
}

/// Boundary of the neighbourhood of the subtree at `v`, entered along the
/// edge back to `parent`, as a loop based along the leg of `v`.
fn loop_at(p: &SphereGroupPresentation, order: &BTreeMap<usize, Vec<AngledArc>>, v: usize, parent: Option<usize>) -> Word {
    let xv = p.generator(v);
    let es = order.get(&v).map(|x| x.as_slice()).unwrap_or(&[]);
    let ip = parent.and_then(|q| es.iter().position(|e| e.b == q));
    let excursion = |e: &AngledArc| e.w.mul(&loop_at(p, order, e.b, Some(v))).mul(&e.w.inverse());
    let mut out = Word::identity();
    match ip {
        None => {
            for e in es {
                out = out.mul(&excursion(e));
            }
            out.mul(&xv)
        }
        Some(ip) => {
            for e in &es[ip + 1..] {
                out = out.mul(&excursion(e));
            }
            out = out.mul(&xv);
            for e in &es[..ip] {
                out = out.mul(&excursion(e));
            }
            out
        }
    }
}

/// Essential lifts of `c` under `f^k`, as classes.
pub fn iterated_lifts(r: &WreathRecursion, c: &ConjClass, k: usize) -> Result<BTreeSet<ConjClass>> {
    let mut cur: BTreeSet<ConjClass> = [c.clone()].into();
    for _ in 0..k {
        let mut next = BTreeSet::new();
        for x in &cur {
            for e in lift_entries(r, x)? {
                if e.essential {
                    next.insert(e.class);
                }
            }
        }
        cur = next;
    }
    Ok(cur)
}

/// Smallest `p` with `f^p` mapping the cluster into itself.
pub fn cluster_period(dy: &MarkedDynamics, cluster: &BTreeSet<usize>) -> Option<usize> {
    let a = *cluster.iter().find(|&&a| dy.a_inf.contains(&a))?;
    (1..=dy.f.len()).find(|&k| cluster.contains(&dy.iterate(a, k)))
}

/// Candidate boundary curves of a periodic cluster, shortest first. Where
/// several components meet at one landing point the arcs do not fix their
/// cyclic order, so every order giving an invariant curve is kept.
pub fn cluster_boundary(
    r: &WreathRecursion,
    dy: &MarkedDynamics,
    clusters: &Clusters,
    cluster: &BTreeSet<usize>,
) -> Result<Vec<ConjClass>> {
    let n = r.n();
    if cluster.len() < 2 || n - cluster.len() < 2 {
        return Ok(Vec::new());
    }
    let Some(per) = cluster_period(dy, cluster) else { return Ok(Vec::new()) };
    let spine = RibbonSpine::build(cluster, &clusters.state.arcs, &clusters.periodic_arcs);
    let mut found = BTreeSet::new();
    let mut fallback = None;
    for w in spine.boundary_candidates(&r.base, 720) {
        let c = conj_class(&w);
        let Ok(s) = side_partition(&r.base, &c) else { continue };
        if s.inner != *cluster && s.outer != *cluster {
            continue;
        }
        if iterated_lifts(r, &c, per)?.contains(&c) {
            found.insert((c.len(), c));
        } else {
            fallback.get_or_insert(c);
        }
    }
    if !found.is_empty() {
        return Ok(found.into_iter().map(|(_, c)| c).collect());
    }
    // follow the lift with the same sides until it repeats
    let Some(mut c) = fallback else {
        return Err(Error::ObstructionSuspected(format!("no simple boundary curve for cluster {cluster:?}")));
    };
    let target = side_partition(&r.base, &c)?;
    let mut seen = BTreeSet::new();
    while seen.insert(c.clone()) {
        let next = iterated_lifts(r, &c, per)?
            .into_iter()
            .find(|x| side_partition(&r.base, x).map(|s| s == target).unwrap_or(false));
        match next {
            Some(x) => c = x,
            None => return Err(Error::ObstructionSuspected(format!("boundary of cluster {cluster:?} is not periodic"))),
        }
    }
    Ok(vec![c])
}

/// Boundary curves of the periodic clusters. Clusters with a single
/// candidate are placed first; the others take the shortest candidate
/// compatible with the curves already chosen.
pub fn cluster_multicurve(r: &WreathRecursion, dy: &MarkedDynamics, clusters: &Clusters) -> Result<MultiCurve> {
    let mut cands = Vec::new();
    for k in clusters.state.clusters() {
        let c = cluster_boundary(r, dy, clusters, &k)?;
        if !c.is_empty() {
            cands.push(c);
        }
    }
    cands.sort_by_key(|c| c.len());
    let mut chosen: Vec<ConjClass> = Vec::new();
    for c in cands {
        let pick = c
            .iter()
            .find(|x| {
                chosen.contains(x) || {
                    let mut t = chosen.clone();
                    t.push((*x).clone());
                    MultiCurve::new(&r.base, t).is_ok()
                }
            })
            .unwrap_or(&c[0])
            .clone();
        if !chosen.contains(&pick) {
            chosen.push(pick);
        }
    }
    MultiCurve::new(&r.base, chosen)
}
