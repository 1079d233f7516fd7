//! Words, conjugacy classes, arcs and side partitions in the fundamental
//! group of a marked sphere.
//!
//! Letters are signed 1-based generator indices. The group is free on
//! `x_1..x_{n-1}`; the last peripheral generator is `x_n = (x_1 ⋯ x_{n-1})^-1`.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sort key for a letter: `x1 < x1^-1 < x2 < x2^-1 < ...`.
#[inline]
pub fn letter_key(g: i32) -> (u32, bool) {
    (g.unsigned_abs(), g < 0)
}

/// A freely reduced word.
#[derive(Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(Vec<i32>);

impl Word {
    pub fn identity() -> Self {
        Word(Vec::new())
    }

    /// Builds a word and freely reduces it.
    pub fn new(letters: impl IntoIterator<Item = i32>) -> Self {
        reduce(&Word(letters.into_iter().collect()))
    }


    pub fn letters(&self) -> &[i32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|g| -g).collect())
    }

    pub fn mul(&self, other: &Word) -> Word {
        let mut out = self.0.clone();
        for &g in &other.0 {
            if out.last() == Some(&-g) {
                out.pop();
            } else {
                out.push(g);
            }
        }
        Word(out)
    }

    pub fn pow(&self, k: i64) -> Word {
        let base = if k < 0 { self.inverse() } else { self.clone() };
        let mut out = Word::identity();
        for _ in 0..k.unsigned_abs() {
            out = out.mul(&base);
        }
        out
    }

    /// `self * other * self^-1`.
    pub fn conj(&self, other: &Word) -> Word {
        self.mul(other).mul(&self.inverse())
    }

    /// Writes `self = v c v^-1` with `c` cyclically reduced.
    pub fn cyclic_split(&self) -> (Word, Word) {
        let w = &self.0;
        let mut i = 0;
        let mut j = w.len();
        while j >= i + 2 && w[i] == -w[j - 1] {
            i += 1;
            j -= 1;
        }
        (Word(w[..i].to_vec()), Word(w[i..j].to_vec()))
    }

    pub fn cyclically_reduced(&self) -> Word {
        self.cyclic_split().1
    }

    /// Exponent sums over the free basis `x_1..x_{n-1}` (index 0 is `x_1`).
    pub fn exponent_sums(&self, n: usize) -> Vec<i64> {
        let mut e = vec![0i64; n.saturating_sub(1)];
        for &g in &self.0 {
            let i = g.unsigned_abs() as usize - 1;
            e[i] += g.signum() as i64;
        }
        e
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .iter()
            .map(|&g| letter_key(g))
            .cmp(other.0.iter().map(|&g| letter_key(g)))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (i, g) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            if *g > 0 {
                write!(f, "x{g}")?;
            } else {
                write!(f, "x{}^-1", -g)?;
            }
        }
        Ok(())
    }
}

/// Free reduction with a stack.
pub fn reduce(w: &Word) -> Word {
    let mut out: Vec<i32> = Vec::with_capacity(w.0.len());
    for &g in &w.0 {
        assert!(g != 0, "letter 0 is not a generator");
        if out.last() == Some(&-g) {
            out.pop();
        } else {
            out.push(g);
        }
    }
    Word(out)
}

/// The marked sphere: punctures in cyclic order with `x_1 ⋯ x_n = 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SphereGroupPresentation {
    punctures: Vec<String>,
}

impl SphereGroupPresentation {
    pub fn new(punctures: Vec<String>) -> Result<Self> {
        if punctures.len() < 2 {
            return Err(Error::Shape("a marked sphere needs at least two punctures".into()));
        }
        let distinct: BTreeSet<&String> = punctures.iter().collect();
        if distinct.len() != punctures.len() {
            return Err(Error::Shape("puncture identifiers must be unique".into()));
        }
        Ok(SphereGroupPresentation { punctures })
    }

    /// Punctures named `p1..pn`.
    pub fn numbered(n: usize) -> Self {
        Self::new((1..=n).map(|i| format!("p{i}")).collect()).expect("n >= 2")
    }

    pub fn n(&self) -> usize {
        self.punctures.len()
    }

    pub fn punctures(&self) -> &[String] {
        &self.punctures
    }

    pub fn name(&self, a: usize) -> &str {
        &self.punctures[a - 1]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.punctures.iter().position(|p| p == name).map(|i| i + 1)
    }

    /// The peripheral generator `x_a` in the free basis.
    pub fn generator(&self, a: usize) -> Word {
        let n = self.n();
        assert!(a >= 1 && a <= n, "puncture index out of range");
        if a < n {
            Word(vec![a as i32])
        } else {
            Word((1..n as i32).rev().map(|g| -g).collect())
        }
    }

    /// Rewrites a word that may use `±n` into the free basis.
    pub fn to_free(&self, letters: &[i32]) -> Result<Word> {
        let n = self.n() as i32;
        let mut out = Word::identity();
        for &g in letters {
            if g == 0 || g.abs() > n {
                return Err(Error::Shape(format!("letter {g} out of range for {n} punctures")));
            }
            let piece = if g.abs() == n {
                self.generator(n as usize).pow(g.signum() as i64)
            } else {
                Word(vec![g])
            };
            out = out.mul(&piece);
        }
        Ok(out)
    }

    /// Exponent sums in all `n` peripheral coordinates, normalized so the
    /// coordinate of `x_n` is zero.
    pub fn peripheral_sums(&self, w: &Word) -> Vec<i64> {
        let mut e = w.exponent_sums(self.n());
        e.push(0);
        e
    }

    /// Product `x_1 ⋯ x_n` evaluated in the free basis (always trivial).
    pub fn relation(&self) -> Word {
        (1..=self.n()).fold(Word::identity(), |acc, a| acc.mul(&self.generator(a)))
    }
}

/// A conjugacy class up to inversion, stored as its canonical cyclic word.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConjClass(Word);

impl ConjClass {
    pub fn word(&self) -> &Word {
        &self.0
    }

    pub fn is_trivial(&self) -> bool {
        self.0.is_empty()
    }

    /// Length of the cyclically reduced representative.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for ConjClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.0)
    }
}

fn least_rotation(c: &[i32]) -> Vec<i32> {
    let n = c.len();
    let mut best: Option<Vec<i32>> = None;
    for s in 0..n {
        let rot: Vec<i32> = c[s..].iter().chain(c[..s].iter()).copied().collect();
        let better = match &best {
            None => true,
            Some(b) => Word(rot.clone()) < Word(b.clone()),
        };
        if better {
            best = Some(rot);
        }
    }
    best.unwrap_or_default()
}

pub fn conj_class(w: &Word) -> ConjClass {
    let c = reduce(w).cyclically_reduced();
    let a = least_rotation(c.letters());
    let b = least_rotation(c.inverse().letters());
    ConjClass(Word(if Word(b.clone()) < Word(a.clone()) { b } else { a }))
}

/// Result of the peripherality test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Peripheral {
    Trivial,
    /// Class of `x_a^k`, `k > 0` (orientation is discarded).
    Puncture(usize, u32),
    Essential,
}

pub fn is_peripheral(p: &SphereGroupPresentation, c: &ConjClass) -> Peripheral {
    let w = c.word().letters();
    if w.is_empty() {
        return Peripheral::Trivial;
    }
    if w.iter().all(|&g| g == w[0]) {
        return Peripheral::Puncture(w[0].unsigned_abs() as usize, w.len() as u32);
    }
    let n = p.n();
    if n > 2 && w.len() % (n - 1) == 0 {
        let k = (w.len() / (n - 1)) as i64;
        if conj_class(&p.generator(n).pow(k)) == *c {
            return Peripheral::Puncture(n, k as u32);
        }
    }
    Peripheral::Essential
}

/// The two sides of a simple closed curve. `inner` never contains `x_n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SidePartition {
    pub inner: BTreeSet<usize>,
    pub outer: BTreeSet<usize>,
}

impl SidePartition {
    pub fn is_essential(&self) -> bool {
        self.inner.len() >= 2 && self.outer.len() >= 2
    }

    /// Laminar: some pair of sides is disjoint.
    pub fn laminar_with(&self, other: &SidePartition) -> bool {
        let sides = |s: &SidePartition| [s.inner.clone(), s.outer.clone()];
        sides(self)
            .iter()
            .any(|x| sides(other).iter().any(|y| x.is_disjoint(y)))
    }

    /// Side containing puncture `a`.
    pub fn side_of(&self, a: usize) -> &BTreeSet<usize> {
        if self.inner.contains(&a) {
            &self.inner
        } else {
            &self.outer
        }
    }
}

pub fn side_partition(p: &SphereGroupPresentation, c: &ConjClass) -> Result<SidePartition> {
    let e = p.peripheral_sums(c.word());
    let lo = *e.iter().min().unwrap();
    let hi = *e.iter().max().unwrap();
    if hi - lo != 1 {
        return Err(Error::NonSimpleWitness(format!(
            "class {c:?} has exponent sums {e:?}, not a block indicator"
        )));
    }
    let n = p.n();
    let last = e[n - 1];
    let inner = (1..=n).filter(|&a| e[a - 1] != last).collect();
    let outer = (1..=n).filter(|&a| e[a - 1] == last).collect();
    Ok(SidePartition { inner, outer })
}

/// An arc between punctures `a` and `b`, as the double coset
/// `<x_a> w <x_b>`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArcClass {
    pub a: usize,
    pub b: usize,
    pub w: Word,
}

impl ArcClass {
    pub fn new(a: usize, b: usize, w: Word) -> Self {
        ArcClass { a, b, w }
    }

    /// The same arc traversed backwards.
    pub fn reversed(&self) -> ArcClass {
        ArcClass { a: self.b, b: self.a, w: self.w.inverse() }
    }
}

fn strip_letter_powers(w: &[i32], a: Option<i32>, b: Option<i32>) -> Vec<i32> {
    let mut s = 0;
    let mut e = w.len();
    if let Some(a) = a {
        while s < e && w[s].abs() == a {
            s += 1;
        }
    }
    if let Some(b) = b {
        while e > s && w[e - 1].abs() == b {
            e -= 1;
        }
    }
    w[s..e].to_vec()
}

/// Minimal representative of the coset `<x_a> w`.
pub fn normalize_left(p: &SphereGroupPresentation, w: &Word, a: usize) -> Word {
    one_sided(p, w, a, true)
}

/// Minimal representative of the coset `w <x_b>`.
pub fn normalize_right(p: &SphereGroupPresentation, w: &Word, b: usize) -> Word {
    one_sided(p, w, b, false)
}

fn one_sided(p: &SphereGroupPresentation, w: &Word, a: usize, left: bool) -> Word {
    let n = p.n();
    if a < n {
        let l = Some(a as i32);
        let (x, y) = if left { (l, None) } else { (None, l) };
        return Word(strip_letter_powers(w.letters(), x, y));
    }
    let xa = p.generator(a);
    let k = (w.len() / (n - 1).max(1) + 2) as i64;
    let mut best = w.clone();
    for i in -k..=k {
        let cand = if left { xa.pow(i).mul(w) } else { w.mul(&xa.pow(i)) };
        if (cand.len(), &cand) < (best.len(), &best) {
            best = cand;
        }
    }
    best
}

/// Double-coset normal form: minimal length, ties broken by letter order.
pub fn arc_normalize(p: &SphereGroupPresentation, arc: &ArcClass) -> ArcClass {
    let n = p.n();
    let w = reduce(&arc.w);
    let letter = |a: usize| (a < n).then_some(a as i32);
    let (la, lb) = (letter(arc.a), letter(arc.b));
    let nw = if la.is_some() && lb.is_some() {
        Word(strip_letter_powers(w.letters(), la, lb))
    } else {
        // At least one endpoint is the last puncture, whose generator is a
        // word of length n-1; search a window of exponents around zero.
        let core = Word(strip_letter_powers(w.letters(), la, lb));
        let xa = p.generator(arc.a);
        let xb = p.generator(arc.b);
        let per = (n - 1).max(1);
        let k = (core.len() / per + 2) as i64;
        let range = |fixed: bool| if fixed { 0..=0 } else { -k..=k };
        let mut best = core.clone();
        for i in range(la.is_some()) {
            let left = xa.pow(i).mul(&core);
            for j in range(lb.is_some()) {
                let cand = left.mul(&xb.pow(j));
                let cand = Word(strip_letter_powers(cand.letters(), la, lb));
                if (cand.len(), &cand) < (best.len(), &best) {
                    best = cand;
                }
            }
        }
        best
    };
    ArcClass { a: arc.a, b: arc.b, w: nw }
}
