//! Shared fixtures for the integration tests.
//!
//! Expected values here never come from the library. Gluing curves are
//! read off the puncture names produced by the constructions, point
//! dynamics come from evaluating the polynomials in complex arithmetic.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use crochet_core::biset::WreathRecursion;
use crochet_core::decomposer::{amalgam, tune, TuneSpec};
use crochet_core::words::{conj_class, ConjClass, Word};
use num_complex::Complex64;

pub const CORPUS: [&str; 11] = [
    "z2",
    "z2_marked",
    "basilica",
    "basilica_marked",
    "rabbit",
    "z2_plus_i",
    "chebyshev",
    "cubic_pf",
    "sierpinski_g",
    "mcmullen3",
    "bicycle_amalgam",
];

pub const POLYNOMIALS: [&str; 8] =
    ["z2", "z2_marked", "basilica", "basilica_marked", "rabbit", "z2_plus_i", "chebyshev", "cubic_pf"];

pub fn corpus_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(format!("{name}.json"))
}

pub fn load(name: &str) -> WreathRecursion {
    WreathRecursion::load(&corpus_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Punctures whose letters have nonzero exponent sum, i.e. the side of a
/// simple closed curve that avoids the last puncture.
pub fn support(c: &ConjClass, n: usize) -> BTreeSet<usize> {
    let mut sums = vec![0i64; n + 1];
    for &g in c.word().letters() {
        sums[g.unsigned_abs() as usize] += g.signum() as i64;
    }
    (1..n).filter(|&a| sums[a] != 0).collect()
}

/// The side of a puncture set that avoids the last puncture.
pub fn normal_side(set: &BTreeSet<usize>, n: usize) -> BTreeSet<usize> {
    if set.contains(&n) {
        (1..=n).filter(|a| !set.contains(a)).collect()
    } else {
        set.clone()
    }
}

/// The curve `x_i ... x_j` around a run of consecutive punctures.
pub fn curve_around(set: &BTreeSet<usize>, n: usize) -> ConjClass {
    let side = normal_side(set, n);
    let (lo, hi) = (*side.first().unwrap(), *side.last().unwrap());
    assert_eq!(side.len(), hi - lo + 1, "side {side:?} is not a run of consecutive punctures");
    conj_class(&Word::new((lo..=hi).map(|a| a as i32)))
}

pub fn indices(r: &WreathRecursion, names: &[&str]) -> BTreeSet<usize> {
    names.iter().map(|s| r.base.index_of(s).unwrap_or_else(|| panic!("no puncture {s}"))).collect()
}

pub fn sides_of(curves: &[ConjClass], n: usize) -> BTreeSet<BTreeSet<usize>> {
    curves.iter().map(|c| support(c, n)).collect()
}

/// An amalgam together with what its construction predicts.
pub struct Amalgam {
    pub name: &'static str,
    pub r: WreathRecursion,
    /// Inner sides of the gluing curves.
    pub gluing: Vec<BTreeSet<usize>>,
    /// Inner sides of the curves expected in `C_dec`, and how they split.
    pub c_dec: BTreeSet<BTreeSet<usize>>,
    pub c_sie: BTreeSet<BTreeSet<usize>>,
    pub c_bi: BTreeSet<BTreeSet<usize>>,
}

fn set(v: &[BTreeSet<usize>]) -> BTreeSet<BTreeSet<usize>> {
    v.iter().cloned().collect()
}

/// Two crochet pieces glued along curves that lift to themselves twice.
pub fn bicycle() -> Amalgam {
    let r = load("bicycle_amalgam");
    let n = r.n();
    let inner = normal_side(&indices(&r, &["-q", "0", "q"]), n);
    let outer = normal_side(&indices(&r, &["w1", "w2", "w3", "w4", "-q", "0", "q"]), n);
    let both = set(&[inner.clone(), outer.clone()]);
    Amalgam { name: "bicycle", r, gluing: vec![inner, outer], c_dec: both.clone(), c_sie: BTreeSet::new(), c_bi: both }
}

/// The Sierpiński carpet map with the basilica tuned in at infinity; the
/// gluing curve is a fixed unicycle.
pub fn sierpinski_basilica() -> Amalgam {
    let g = load("sierpinski_g");
    let b = load("basilica");
    let spec = TuneSpec { at: g.n(), inf: b.n(), target: Some(1), prefix: "b_".into(), rotation: None };
    let r = tune(&g, &b, &spec).expect("tuning the basilica into the carpet map");
    let host: Vec<&str> = g.base.punctures()[..g.n() - 1].iter().map(String::as_str).collect();
    let side = normal_side(&indices(&r, &host), r.n());
    let one = set(&[side.clone()]);
    Amalgam { name: "sierpinski+basilica", r, gluing: vec![side], c_dec: one.clone(), c_sie: one, c_bi: BTreeSet::new() }
}

/// McMullen's degree three map with a cubic polynomial at infinity and the
/// basilica tuned into that polynomial. The two polynomial pieces meet
/// along a unicycle which the decomposition removes.
pub fn three_pieces() -> Amalgam {
    let g = load("mcmullen3");
    let z = load("cubic_pf");
    let b = load("basilica");
    let s1 = TuneSpec { at: g.n(), inf: z.n(), target: Some(1), prefix: "p_".into(), rotation: None };
    let two = tune(&g, &z, &s1).expect("tuning the cubic into the McMullen map");
    let at = two.base.index_of("1").expect("the cubic's point 1");
    let s2 = TuneSpec { at, inf: b.n(), target: Some(1), prefix: "b_".into(), rotation: None };
    let r = amalgam(&[g.clone(), z, b], &[s1, s2]).expect("three piece amalgam");
    let n = r.n();
    let host: Vec<&str> = g.base.punctures()[..g.n() - 1].iter().map(String::as_str).collect();
    let host_side = normal_side(&indices(&r, &host), n);
    // the basilica's 0 is renamed, its -1 is new
    let basilica_side = normal_side(&indices(&r, &["-1", "b_0"]), n);
    let one = set(&[host_side.clone()]);
    Amalgam {
        name: "three pieces",
        r,
        gluing: vec![host_side, basilica_side],
        c_dec: one.clone(),
        c_sie: one,
        c_bi: BTreeSet::new(),
    }
}

pub fn amalgams() -> Vec<Amalgam> {
    vec![bicycle(), sierpinski_basilica(), three_pieces()]
}

/// A polynomial by its coefficients, highest degree first, and named
/// marked points.
pub struct PolyOracle {
    pub name: &'static str,
    pub coeffs: Vec<Complex64>,
    pub points: Vec<(&'static str, Complex64)>,
}

impl PolyOracle {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    fn derivative(c: &[Complex64]) -> Vec<Complex64> {
        let d = c.len() - 1;
        c[..d].iter().enumerate().map(|(i, &x)| x * (d - i) as f64).collect()
    }

    /// Order of vanishing of `f(z) - f(p)` at `p`.
    pub fn local_degree(&self, p: Complex64) -> usize {
        let mut c = self.coeffs.clone();
        for k in 1.. {
            c = Self::derivative(&c);
            let v = c.iter().fold(Complex64::new(0.0, 0.0), |acc, &x| acc * p + x);
            if v.norm() > 1e-9 {
                return k;
            }
        }
        unreachable!()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn real(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|&x| c(x, 0.0)).collect()
}

/// The rabbit parameter: the root of `c^3 + 2c^2 + c + 1`
/// with positive imaginary part, by Newton's method.
fn rabbit_parameter() -> Complex64 {
    let p = |z: Complex64| ((z + 2.0) * z + 1.0) * z + 1.0;
    let dp = |z: Complex64| (z * 3.0 + 4.0) * z + 1.0;
    let mut z = c(-0.1, 0.9);
    for _ in 0..60 {
        z -= p(z) / dp(z);
    }
    assert!(p(z).norm() < 1e-12 && z.im > 0.0);
    z
}

pub fn polynomial_oracles() -> Vec<PolyOracle> {
    let cr = rabbit_parameter();
    vec![
        PolyOracle { name: "z2", coeffs: real(&[1.0, 0.0, 0.0]), points: vec![("0", c(0.0, 0.0))] },
        PolyOracle {
            name: "z2_marked",
            coeffs: real(&[1.0, 0.0, 0.0]),
            points: vec![("0", c(0.0, 0.0)), ("1", c(1.0, 0.0)), ("-1", c(-1.0, 0.0))],
        },
        PolyOracle {
            name: "basilica",
            coeffs: real(&[1.0, 0.0, -1.0]),
            points: vec![("0", c(0.0, 0.0)), ("-1", c(-1.0, 0.0))],
        },
        PolyOracle {
            name: "basilica_marked",
            coeffs: real(&[1.0, 0.0, -1.0]),
            points: vec![("0", c(0.0, 0.0)), ("-1", c(-1.0, 0.0)), ("1", c(1.0, 0.0))],
        },
        PolyOracle {
            name: "rabbit",
            coeffs: vec![c(1.0, 0.0), c(0.0, 0.0), cr],
            points: vec![("0", c(0.0, 0.0)), ("c", cr), ("c2+c", cr * cr + cr)],
        },
        PolyOracle {
            name: "z2_plus_i",
            coeffs: vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)],
            points: vec![("0", c(0.0, 0.0)), ("i", c(0.0, 1.0)), ("i-1", c(-1.0, 1.0)), ("-i", c(0.0, -1.0))],
        },
        PolyOracle {
            name: "chebyshev",
            coeffs: real(&[1.0, 0.0, -2.0]),
            points: vec![("0", c(0.0, 0.0)), ("-2", c(-2.0, 0.0)), ("2", c(2.0, 0.0))],
        },
        PolyOracle {
            name: "cubic_pf",
            coeffs: real(&[-2.0, 3.0, 0.0, 0.0]),
            points: vec![("0", c(0.0, 0.0)), ("1", c(1.0, 0.0))],
        },
    ]
}

/// Expected image and local degree of every puncture, by name; infinity is
/// fixed with full degree.
pub fn expected_dynamics(o: &PolyOracle) -> Vec<(String, String, usize)> {
    let mut out: Vec<(String, String, usize)> = o
        .points
        .iter()
        .map(|&(name, p)| {
            let w = o.eval(p);
            let (image, _) = o
                .points
                .iter()
                .map(|&(m, q)| (m, (q - w).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!((o.points.iter().find(|x| x.0 == image).unwrap().1 - w).norm() < 1e-9, "{name} escapes the marked set");
            (name.to_string(), image.to_string(), o.local_degree(p))
        })
        .collect();
    out.push(("inf".into(), "inf".into(), o.degree()));
    out
}
