//! Wreath recursions: validation, marked dynamics, loop and arc lifting,
//! composition and the contraction nucleus.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::words::{arc_normalize, conj_class, ArcClass, ConjClass, SphereGroupPresentation, Word};

/// Word-length and depth limits standing in for metric expansion constants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBudget {
    /// Maximum word length `L`.
    pub max_len: usize,
    /// Maximum iteration depth `N`.
    pub max_depth: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { max_len: 48, max_depth: 24 }
    }
}

impl SearchBudget {
    pub fn new(max_len: usize, max_depth: usize) -> Result<Self> {
        if max_len == 0 || max_depth == 0 {
            return Err(Error::Shape("budget limits must be positive".into()));
        }
        Ok(SearchBudget { max_len, max_depth })
    }

    /// Parses `"L,N"` or `"L"`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut it = s.split(',').map(|t| t.trim().parse::<usize>());
        let bad = || Error::Shape(format!("budget `{s}` is not of the form L[,N]"));
        let l = it.next().and_then(|r| r.ok()).ok_or_else(bad)?;
        let n = match it.next() {
            Some(r) => r.map_err(|_| bad())?,
            None => SearchBudget::default().max_depth,
        };
        SearchBudget::new(l, n)
    }
}

/// Permutation and restrictions of one peripheral generator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorImage {
    /// Zero-based: sheet `i` goes to sheet `perm[i]`.
    pub perm: Vec<usize>,
    pub rest: Vec<Word>,
}

/// A degree-`d` sphere biset given by its wreath recursion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WreathRecursion {
    pub base: SphereGroupPresentation,
    pub degree: usize,
    /// Indexed by puncture, zero-based.
    pub gens: Vec<GeneratorImage>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecursionFile {
    punctures: Vec<String>,
    degree: usize,
    generators: BTreeMap<String, GeneratorFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorFile {
    perm: Vec<usize>,
    rest: Vec<Vec<i32>>,
}

fn int_list(v: &[i64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

impl WreathRecursion {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: RecursionFile =
            serde_json::from_str(text).map_err(|e| Error::Shape(e.to_string()))?;
        let base = SphereGroupPresentation::new(file.punctures)?;
        let d = file.degree;
        if d < 2 {
            return Err(Error::Shape("degree must be at least 2".into()));
        }
        if file.generators.len() != base.n() {
            return Err(Error::Shape("one generator entry per puncture is required".into()));
        }
        let mut gens = Vec::with_capacity(base.n());
        for name in base.punctures() {
            let g = file
                .generators
                .get(name)
                .ok_or_else(|| Error::Shape(format!("no generator for puncture `{name}`")))?;
            if g.perm.len() != d || g.rest.len() != d {
                return Err(Error::Shape(format!("generator `{name}` needs {d} entries")));
            }
            let perm: Vec<usize> = g.perm.iter().map(|&i| i.wrapping_sub(1)).collect();
            let mut seen = vec![false; d];
            for &i in &perm {
                if i >= d || seen[i] {
                    return Err(Error::Shape(format!("generator `{name}` has no permutation")));
                }
                seen[i] = true;
            }
            let rest = g.rest.iter().map(|w| base.to_free(w)).collect::<Result<Vec<_>>>()?;
            gens.push(GeneratorImage { perm, rest });
        }
        Ok(WreathRecursion { base, degree: d, gens })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Canonical JSON: generators sorted by name, words in the free basis.
    pub fn to_json(&self) -> String {
        let names: Vec<String> =
            self.base.punctures().iter().map(|p| serde_json::to_string(p).unwrap()).collect();
        let mut order: Vec<usize> = (0..self.base.n()).collect();
        order.sort_by(|&i, &j| self.base.punctures()[i].cmp(&self.base.punctures()[j]));
        let mut out = String::new();
        out.push_str("{\n");
        out.push_str(&format!("  \"punctures\": [{}],\n", names.join(", ")));
        out.push_str(&format!("  \"degree\": {},\n", self.degree));
        out.push_str("  \"generators\": {\n");
        for (k, &i) in order.iter().enumerate() {
            let g = &self.gens[i];
            let perm: Vec<i64> = g.perm.iter().map(|&x| x as i64 + 1).collect();
            let rest: Vec<String> = g
                .rest
                .iter()
                .map(|w| int_list(&w.letters().iter().map(|&x| x as i64).collect::<Vec<_>>()))
                .collect();
            out.push_str(&format!(
                "    {}: {{\"perm\": {}, \"rest\": [{}]}}{}\n",
                names[i],
                int_list(&perm),
                rest.join(", "),
                if k + 1 < order.len() { "," } else { "" }
            ));
        }
        out.push_str("  }\n}\n");
        out
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    /// Wreath image `(perm, restrictions)` of a word in the free basis.
    ///
    /// Convention: `g` at sheet `i` first follows `g|_i`, then moves to
    /// `perm(i)`, so `(gh)|_i = g|_i h|_{perm_g(i)}`.
    pub fn image(&self, w: &Word) -> (Vec<usize>, Vec<Word>) {
        let d = self.degree;
        let mut pi: Vec<usize> = (0..d).collect();
        let mut rs = vec![Word::identity(); d];
        for &g in w.letters() {
            let gen = &self.gens[g.unsigned_abs() as usize - 1];
            for i in 0..d {
                let at = pi[i];
                if g > 0 {
                    rs[i] = rs[i].mul(&gen.rest[at]);
                    pi[i] = gen.perm[at];
                } else {
                    let pre = gen.perm.iter().position(|&x| x == at).unwrap();
                    rs[i] = rs[i].mul(&gen.rest[pre].inverse());
                    pi[i] = pre;
                }
            }
        }
        (pi, rs)
    }

    /// Restriction of `w` at sheet `i` together with the target sheet.
    pub fn restrict(&self, w: &Word, i: usize) -> (usize, Word) {
        let mut at = i;
        let mut r = Word::identity();
        for &g in w.letters() {
            let gen = &self.gens[g.unsigned_abs() as usize - 1];
            if g > 0 {
                r = r.mul(&gen.rest[at]);
                at = gen.perm[at];
            } else {
                let pre = gen.perm.iter().position(|&x| x == at).unwrap();
                r = r.mul(&gen.rest[pre].inverse());
                at = pre;
            }
        }
        (at, r)
    }

    /// Recursion of the second iterate, sheets `(i, j)` numbered `i*d + j`.
    pub fn compose(&self, other: &WreathRecursion) -> Result<WreathRecursion> {
        if self.base != other.base {
            return Err(Error::Shape("composition needs a common marked sphere".into()));
        }
        let (d1, d2) = (self.degree, other.degree);
        let mut gens = Vec::with_capacity(self.n());
        for g in &self.gens {
            let mut perm = vec![0; d1 * d2];
            let mut rest = vec![Word::identity(); d1 * d2];
            for i in 0..d1 {
                let (pi, rs) = other.image(&g.rest[i]);
                for j in 0..d2 {
                    perm[i * d2 + j] = g.perm[i] * d2 + pi[j];
                    rest[i * d2 + j] = rs[j].clone();
                }
            }
            gens.push(GeneratorImage { perm, rest });
        }
        Ok(WreathRecursion { base: self.base.clone(), degree: d1 * d2, gens })
    }
}

/// Cycles of a permutation, each starting at its least element, sorted.
pub fn cycles(perm: &[usize]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; perm.len()];
    let mut out = Vec::new();
    for s in 0..perm.len() {
        if seen[s] {
            continue;
        }
        let mut c = Vec::new();
        let mut i = s;
        while !seen[i] {
            seen[i] = true;
            c.push(i);
            i = perm[i];
        }
        out.push(c);
    }
    out
}

/// How one marked preimage sits over its image.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PreimageLeg {
    /// The image puncture `f(b)`.
    pub image: usize,
    /// Sheets of the cycle of `x_{f(b)}` attached to `b`, in cycle order.
    pub sheets: Vec<usize>,
    /// Lifted leg words: the leg to `b` from sheet `sheets[j]` is `legs[j]`
    /// followed by the base leg of `b`.
    pub legs: Vec<Word>,
}

/// Dynamics on the marked set extracted from a validated recursion.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MarkedDynamics {
    /// One-based image of each puncture (index `a-1`).
    pub f: Vec<usize>,
    pub deg: Vec<usize>,
    /// Forward orbits of periodic critical points.
    pub a_inf: BTreeSet<usize>,
    /// Period of each periodic puncture.
    pub period: Vec<Option<usize>>,
    pub legs: Vec<PreimageLeg>,
    /// For each puncture `a` and sheet `i`: the marked preimage whose cycle
    /// contains `i`, if any, and the position in that cycle.
    pub sheet_owner: Vec<Vec<Option<(usize, usize)>>>,
}

impl MarkedDynamics {
    pub fn image(&self, a: usize) -> usize {
        self.f[a - 1]
    }

    pub fn local_degree(&self, a: usize) -> usize {
        self.deg[a - 1]
    }

    /// Orbit of `a` reaches a periodic critical cycle.
    pub fn is_fatou(&self, a: usize) -> bool {
        let mut x = a;
        for _ in 0..=self.f.len() {
            if self.a_inf.contains(&x) {
                return true;
            }
            x = self.image(x);
        }
        false
    }

    pub fn iterate(&self, a: usize, k: usize) -> usize {
        (0..k).fold(a, |x, _| self.image(x))
    }
}

/// Writes a cycle product `P` as `u x_b u^-1`, if it has that form.
fn leg_word(base: &SphereGroupPresentation, p: &Word, b: usize) -> Option<Word> {
    let (v, c) = p.cyclic_split();
    let xb = base.generator(b);
    let m = xb.len();
    if c.len() != m {
        return None;
    }
    for s in 0..m {
        // c = t^-1 x_b t where x_b = t s'
        let t = Word::new(xb.letters()[..s].iter().copied());
        if t.inverse().mul(&xb).mul(&t) == c {
            return Some(v.mul(&t.inverse()));
        }
    }
    None
}

pub fn validate(r: &WreathRecursion) -> Result<MarkedDynamics> {
    let n = r.n();
    let d = r.degree;
    // product x_1 ... x_n from the stored data of all n generators
    let mut pi: Vec<usize> = (0..d).collect();
    let mut rs = vec![Word::identity(); d];
    for g in &r.gens {
        for i in 0..d {
            rs[i] = rs[i].mul(&g.rest[pi[i]]);
            pi[i] = g.perm[pi[i]];
        }
    }
    for i in 0..d {
        if pi[i] != i || !rs[i].is_empty() {
            return Err(Error::RelationViolation(format!(
                "product of peripheral generators is not trivial at sheet {}",
                i + 1
            )));
        }
    }
    // transitivity
    let mut reach = vec![false; d];
    let mut stack = vec![0];
    reach[0] = true;
    while let Some(i) = stack.pop() {
        for g in &r.gens {
            let j = g.perm[i];
            if !reach[j] {
                reach[j] = true;
                stack.push(j);
            }
        }
    }
    if reach.iter().any(|x| !x) {
        return Err(Error::RelationViolation("monodromy is not transitive".into()));
    }
    let rh: usize = r
        .gens
        .iter()
        .map(|g| cycles(&g.perm).iter().map(|c| c.len() - 1).sum::<usize>())
        .sum();
    if rh != 2 * d - 2 {
        return Err(Error::RiemannHurwitzViolation { found: rh, expected: 2 * d - 2 });
    }
    let mut found: Vec<Option<PreimageLeg>> = vec![None; n];
    let mut sheet_owner = vec![vec![None; d]; n];
    for (ai, g) in r.gens.iter().enumerate() {
        let a = ai + 1;
        for c in cycles(&g.perm) {
            let prod = c.iter().fold(Word::identity(), |acc, &i| acc.mul(&g.rest[i]));
            if prod.is_empty() {
                if c.len() > 1 {
                    return Err(Error::UnmarkedCriticalValue(format!(
                        "unmarked critical point of local degree {} over {}",
                        c.len(),
                        r.base.name(a)
                    )));
                }
                continue;
            }
            let Some((b, u0)) = (1..=n).find_map(|b| leg_word(&r.base, &prod, b).map(|u| (b, u))) else {
                return Err(Error::RelationViolation(format!(
                    "cycle product {prod} over {} is not a peripheral generator",
                    r.base.name(a)
                )));
            };
            if found[b - 1].is_some() {
                return Err(Error::RelationViolation(format!(
                    "puncture {} is the preimage of two cycles",
                    r.base.name(b)
                )));
            }
            let mut legs = Vec::with_capacity(c.len());
            let mut acc = Word::identity();
            for (j, &i) in c.iter().enumerate() {
                legs.push(acc.inverse().mul(&u0));
                acc = acc.mul(&g.rest[i]);
                sheet_owner[ai][i] = Some((b, j));
            }
            found[b - 1] = Some(PreimageLeg { image: a, sheets: c.clone(), legs });
        }
    }
    let mut legs = Vec::with_capacity(n);
    for (bi, l) in found.into_iter().enumerate() {
        legs.push(l.ok_or_else(|| {
            Error::RelationViolation(format!(
                "puncture {} has no marked image",
                r.base.name(bi + 1)
            ))
        })?);
    }
    let f: Vec<usize> = legs.iter().map(|l| l.image).collect();
    let deg: Vec<usize> = legs.iter().map(|l| l.sheets.len()).collect();
    let mut period = vec![None; n];
    for a in 1..=n {
        let mut x = f[a - 1];
        for k in 1..=n {
            if x == a {
                period[a - 1] = Some(k);
                break;
            }
            x = f[x - 1];
        }
    }
    let mut a_inf = BTreeSet::new();
    for a in 1..=n {
        if let Some(p) = period[a - 1] {
            let mut x = a;
            let mut critical = false;
            for _ in 0..p {
                critical |= deg[x - 1] > 1;
                x = f[x - 1];
            }
            if critical {
                a_inf.insert(a);
            }
        }
    }
    Ok(MarkedDynamics { f, deg, a_inf, period, legs, sheet_owner })
}

/// Lifts of a closed curve: one entry per cycle, with the covering degree.
pub fn lift_loop(r: &WreathRecursion, c: &ConjClass) -> Vec<(ConjClass, usize)> {
    let (pi, rs) = r.image(c.word());
    let mut out: Vec<(ConjClass, usize)> = cycles(&pi)
        .into_iter()
        .map(|cy| {
            let prod = cy.iter().fold(Word::identity(), |acc, &i| acc.mul(&rs[i]));
            (conj_class(&prod), cy.len())
        })
        .collect();
    out.sort();
    out
}

/// One lift of an arc, before normalization, with its starting sheet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArcLift {
    pub sheet: usize,
    pub arc: ArcClass,
}

/// The `d` lifts of an arc that end at marked points on both sides.
pub fn lift_arc_raw(r: &WreathRecursion, dy: &MarkedDynamics, arc: &ArcClass) -> Vec<ArcLift> {
    let mut out = Vec::with_capacity(r.degree);
    for i in 0..r.degree {
        let Some((a2, ja)) = dy.sheet_owner[arc.a - 1][i] else { continue };
        let (j, rho) = r.restrict(&arc.w, i);
        let Some((b2, jb)) = dy.sheet_owner[arc.b - 1][j] else { continue };
        let w = dy.legs[a2 - 1].legs[ja]
            .inverse()
            .mul(&rho)
            .mul(&dy.legs[b2 - 1].legs[jb]);
        out.push(ArcLift { sheet: i, arc: ArcClass::new(a2, b2, w) });
    }
    out
}

/// Normalized lifts of an arc between marked preimages.
pub fn lift_arc(r: &WreathRecursion, dy: &MarkedDynamics, arc: &ArcClass) -> BTreeSet<ArcClass> {
    lift_arc_raw(r, dy, arc)
        .into_iter()
        .map(|l| arc_normalize(&r.base, &l.arc))
        .collect()
}

/// Result of the nucleus computation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Nucleus {
    Found(BTreeSet<Word>),
    Exhausted,
}

/// Restriction closure of a set and the elements lying on restriction cycles.
fn cyclic_states(r: &WreathRecursion, seed: &BTreeSet<Word>, budget: &SearchBudget) -> Option<BTreeSet<Word>> {
    let mut states: BTreeMap<Word, Vec<Word>> = BTreeMap::new();
    let mut todo: Vec<Word> = seed.iter().cloned().collect();
    while let Some(w) = todo.pop() {
        if states.contains_key(&w) {
            continue;
        }
        if w.len() > budget.max_len || states.len() > 64 * budget.max_len {
            return None;
        }
        let (_, rs) = r.image(&w);
        for x in &rs {
            if !states.contains_key(x) {
                todo.push(x.clone());
            }
        }
        states.insert(w, rs);
    }
    // an element is cyclic iff it can reach itself
    let keys: Vec<Word> = states.keys().cloned().collect();
    let idx: BTreeMap<&Word, usize> = keys.iter().enumerate().map(|(i, w)| (w, i)).collect();
    let adj: Vec<Vec<usize>> = keys
        .iter()
        .map(|w| states[w].iter().map(|x| idx[x]).collect())
        .collect();
    let mut out = BTreeSet::new();
    for s in 0..keys.len() {
        let mut seen = vec![false; keys.len()];
        let mut stack = adj[s].clone();
        while let Some(v) = stack.pop() {
            if v == s {
                out.insert(keys[s].clone());
                break;
            }
            if !seen[v] {
                seen[v] = true;
                stack.extend(adj[v].iter().copied());
            }
        }
    }
    Some(out)
}

/// Elements on restriction cycles of the closure of generators and pairwise
/// products, iterated until the set stops growing.
pub fn nucleus_bound(r: &WreathRecursion, budget: &SearchBudget) -> Nucleus {
    let mut gens: BTreeSet<Word> = BTreeSet::new();
    gens.insert(Word::identity());
    for a in 1..r.n() {
        gens.insert(Word::new([a as i32]));
        gens.insert(Word::new([-(a as i32)]));
    }
    let Some(mut current) = cyclic_states(r, &gens, budget) else { return Nucleus::Exhausted };
    for _ in 0..budget.max_depth {
        let mut seed = gens.clone();
        for x in &current {
            for y in &current {
                seed.insert(x.mul(y));
            }
        }
        let Some(next) = cyclic_states(r, &seed, budget) else { return Nucleus::Exhausted };
        if next == current {
            return Nucleus::Found(current);
        }
        current = next;
    }
    Nucleus::Exhausted
}

#[cfg(test)]
mod tests {
    use super::*;

    const Z2: &str = include_str!("../corpus/z2.json");
    const BASILICA: &str = include_str!("../corpus/basilica.json");
    const RABBIT: &str = include_str!("../corpus/rabbit.json");
    const BASILICA_MARKED: &str = include_str!("../corpus/basilica_marked.json");
    const Z2_MARKED: &str = include_str!("../corpus/z2_marked.json");

    fn w(v: &[i32]) -> Word {
        Word::new(v.iter().copied())
    }

    #[test]
    fn json_round_trip() {
        for text in [Z2, BASILICA, RABBIT] {
            let r = WreathRecursion::from_json(text).unwrap();
            assert_eq!(WreathRecursion::from_json(&r.to_json()).unwrap(), r);
        }
    }

    #[test]
    fn basilica_dynamics() {
        let r = WreathRecursion::from_json(BASILICA).unwrap();
        let dy = validate(&r).unwrap();
        // -1 -> 0 -> -1, infinity fixed
        assert_eq!(dy.f, vec![2, 1, 3]);
        assert_eq!(dy.deg, vec![1, 2, 2]);
        assert_eq!(dy.a_inf, [1, 2, 3].into_iter().collect());
        assert_eq!(dy.period, vec![Some(2), Some(2), Some(1)]);
    }

    #[test]
    fn square_of_basilica_has_an_unmarked_critical_point() {
        // +1 is critical for the square and not marked
        let r = WreathRecursion::from_json(BASILICA).unwrap();
        assert!(matches!(validate(&r.compose(&r).unwrap()), Err(Error::UnmarkedCriticalValue(_))));
    }

    #[test]
    fn broken_recursions_are_named() {
        let r = WreathRecursion::from_json(BASILICA).unwrap();
        let mut m = r.clone();
        m.gens[1].rest[0] = w(&[1, 1]);
        assert!(matches!(validate(&m), Err(Error::RelationViolation(_))));
        let mut m = r.clone();
        m.gens[1].perm = vec![1, 0];
        assert!(validate(&m).is_err());
        let bad = BASILICA.replace("\"degree\": 2", "\"degree\": 3");
        assert!(matches!(WreathRecursion::from_json(&bad), Err(Error::Shape(_))));
    }

    #[test]
    fn composition_iterates_the_dynamics() {
        // the square needs the preimages of the critical points marked
        for text in [Z2, Z2_MARKED, BASILICA_MARKED] {
            let r = WreathRecursion::from_json(text).unwrap();
            let dy = validate(&r).unwrap();
            let r2 = r.compose(&r).unwrap();
            assert_eq!(r2.degree, r.degree * r.degree);
            let dy2 = validate(&r2).unwrap();
            for a in 1..=r.n() {
                assert_eq!(dy2.image(a), dy.iterate(a, 2));
                assert_eq!(dy2.local_degree(a), dy.local_degree(a) * dy.local_degree(dy.image(a)));
            }
        }
    }

    #[test]
    fn z2_nucleus() {
        // x1 restricts to x1 and 1, so only x1, its inverse and 1 recur
        let r = WreathRecursion::from_json(Z2).unwrap();
        let expect: BTreeSet<Word> = [w(&[]), w(&[1]), w(&[-1])].into_iter().collect();
        assert_eq!(nucleus_bound(&r, &SearchBudget::default()), Nucleus::Found(expect));
    }

    #[test]
    fn z2_lifts() {
        let r = WreathRecursion::from_json(Z2).unwrap();
        // the loop around 0 lifts to a single loop of degree two
        assert_eq!(lift_loop(&r, &conj_class(&w(&[1]))), vec![(conj_class(&w(&[1])), 2)]);
        assert_eq!(lift_loop(&r, &conj_class(&w(&[1, 1]))), vec![(conj_class(&w(&[1])), 1); 2]);
    }

    #[test]
    fn budget_parsing() {
        assert_eq!(SearchBudget::parse("30,10").unwrap(), SearchBudget { max_len: 30, max_depth: 10 });
        assert_eq!(SearchBudget::parse("30").unwrap().max_depth, SearchBudget::default().max_depth);
        assert!(SearchBudget::parse("0,3").is_err());
        assert!(SearchBudget::parse("x").is_err());
    }
}
