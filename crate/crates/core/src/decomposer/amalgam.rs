//! Gluing maps along a fixed curve.
//!
//! `tune` replaces a neighbourhood of a fixed Fatou center `a` of a host
//! by a polynomial-like plug whose point `inf` is totally invariant with
//! the same local degree `k`. Host points mapping onto `a` are sent to a
//! chosen plug point. Mating is tuning a polynomial at infinity.

use serde::Serialize;

use crate::biset::{validate, GeneratorImage, WreathRecursion};
use crate::error::{Error, Result};
use crate::words::{SphereGroupPresentation, Word};

/// Parameters of a tuning.
#[derive(Clone, Debug, Serialize)]
pub struct TuneSpec {
    /// Host puncture replaced by the plug.
    pub at: usize,
    /// Totally invariant plug puncture.
    pub inf: usize,
    /// Plug puncture receiving host points that map onto `at`.
    pub target: Option<usize>,
    /// Prefix for plug names that collide with host names.
    pub prefix: String,
    /// Rotation of the identification of the two circles of sheets; the
    /// first rotation giving a valid recursion when absent.
    pub rotation: Option<usize>,
}

fn rename(host: &SphereGroupPresentation, name: &str, prefix: &str) -> String {
    if host.index_of(name).is_some() {
        format!("{prefix}{name}")
    } else {
        name.to_string()
    }
}

/// Substitutes generator images letter by letter.
fn substitute(w: &Word, images: &[Word]) -> Word {
    w.letters().iter().fold(Word::identity(), |acc, &g| {
        let x = &images[g.unsigned_abs() as usize - 1];
        acc.mul(&if g > 0 { x.clone() } else { x.inverse() })
    })
}

pub fn tune(host: &WreathRecursion, plug: &WreathRecursion, spec: &TuneSpec) -> Result<WreathRecursion> {
    if let Some(rot) = spec.rotation {
        return tune_with(host, plug, spec, rot);
    }
    let mut last = None;
    for rot in 0..plug.degree {
        match tune_with(host, plug, spec, rot) {
            Ok(r) => return Ok(r),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::GluingMismatch("no rotation".into())))
}

fn tune_with(host: &WreathRecursion, plug: &WreathRecursion, spec: &TuneSpec, rotation: usize) -> Result<WreathRecursion> {
    let dh = validate(host)?;
    let dp = validate(plug)?;
    let (a, inf) = (spec.at, spec.inf);
    if a == 0 || a > host.n() || inf == 0 || inf > plug.n() {
        return Err(Error::GluingMismatch("gluing point out of range".into()));
    }
    let k = dh.local_degree(a);
    if dh.image(a) != a || k < 2 {
        return Err(Error::GluingMismatch(format!("{} is not a fixed critical point", host.base.name(a))));
    }
    if plug.degree != k || dp.image(inf) != inf || dp.local_degree(inf) != k {
        return Err(Error::GluingMismatch(format!(
            "plug must have {} totally invariant of local degree {k}",
            plug.base.name(inf)
        )));
    }
    let indet: Vec<usize> = (1..=host.n()).filter(|&h| h != a && dh.image(h) == a).collect();
    let target = match (indet.is_empty(), spec.target) {
        (true, _) => None,
        (false, Some(q)) if q != inf && q <= plug.n() && q > 0 => Some(q),
        _ => {
            return Err(Error::GluingMismatch("host points map onto the gluing point; a plug target is required".into()))
        }
    };

    // plug block in cyclic order after `inf`
    let m = plug.n();
    let block: Vec<usize> = (1..m).map(|s| (inf - 1 + s) % m + 1).collect();
    let mut names = Vec::new();
    let mut host_idx = vec![0; host.n() + 1];
    let mut plug_idx = vec![0; m + 1];
    for h in 1..=host.n() {
        if h == a {
            for &q in &block {
                names.push(rename(&host.base, plug.base.name(q), &spec.prefix));
                plug_idx[q] = names.len();
            }
        } else {
            names.push(host.base.name(h).to_string());
            host_idx[h] = names.len();
        }
    }
    let base = SphereGroupPresentation::new(names)?;
    let gen = |g: usize| base.generator(g);
    let b_word = block.iter().fold(Word::identity(), |acc, &q| acc.mul(&gen(plug_idx[q])));
    let host_images: Vec<Word> =
        (1..=host.n()).map(|h| if h == a { b_word.clone() } else { gen(host_idx[h]) }).collect();
    let plug_images: Vec<Word> =
        (1..=m).map(|q| if q == inf { b_word.inverse() } else { gen(plug_idx[q]) }).collect();
    let phi_h = |w: &Word| substitute(w, &host_images);
    let phi_p = |w: &Word| substitute(w, &plug_images);

    let d = host.degree;
    let la = &dh.legs[a - 1];
    let li = &dp.legs[inf - 1];
    // host position j in the cycle over `a` meets plug sheet at position rot - j
    let plug_sheet = |j: usize| li.sheets[(rotation + k * d - j) % k];
    let plug_pos = |s: usize| li.sheets.iter().position(|&x| x == s).unwrap();
    let host_pos = |s: usize| (rotation + k * d - plug_pos(s)) % k;
    let lambda: Vec<Word> = (0..k)
        .map(|j| phi_h(&la.legs[j]).mul(&phi_p(&li.legs[plug_pos(plug_sheet(j))]).inverse()))
        .collect();

    let mut gens = vec![GeneratorImage { perm: Vec::new(), rest: Vec::new() }; base.n()];
    for h in 1..=host.n() {
        if h == a {
            continue;
        }
        let g = &host.gens[h - 1];
        gens[host_idx[h] - 1] = GeneratorImage { perm: g.perm.clone(), rest: g.rest.iter().map(phi_h).collect() };
    }
    for &q in &block {
        let mut perm: Vec<usize> = (0..d).collect();
        let mut rest = vec![Word::identity(); d];
        for i in 0..d {
            match dh.sheet_owner[a - 1][i] {
                Some((owner, j)) if owner == a => {
                    let (s2, rho) = plug.restrict(&plug.base.generator(q), plug_sheet(j));
                    let j2 = host_pos(s2);
                    perm[i] = la.sheets[j2];
                    rest[i] = lambda[j].mul(&phi_p(&rho)).mul(&lambda[j2].inverse());
                }
                Some((owner, _)) if indet.contains(&owner) && Some(q) == target => {
                    let ya = &host.gens[a - 1];
                    perm[i] = ya.perm[i];
                    rest[i] = phi_h(&ya.rest[i]);
                }
                _ => {}
            }
        }
        gens[plug_idx[q] - 1] = GeneratorImage { perm, rest };
    }
    let out = WreathRecursion { base, degree: d, gens };
    validate(&out).map_err(|e| Error::GluingMismatch(format!("glued recursion is invalid: {e}")))?;
    Ok(out)
}

/// Formal mating: the second polynomial replaces the basin of infinity of
/// the first.
pub fn mate(p1: &WreathRecursion, inf1: usize, p2: &WreathRecursion, inf2: usize) -> Result<WreathRecursion> {
    tune(p1, p2, &TuneSpec { at: inf1, inf: inf2, target: None, prefix: "m_".into(), rotation: None })
}
