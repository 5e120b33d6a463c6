//! Orbit labels of tie sets by canonical form.
//!
//! Moving one cusp of the set to infinity leaves the stabilizer of
//! infinity, acting on the remaining values by `x -> u^2 x + b`. A
//! reference difference fixes `u^2` and a reference value is translated
//! into the fundamental parallelogram of the integers; the label is the
//! smallest resulting cusp tuple over all choices.

use std::fmt;

use num_bigint::BigInt;
use serde::{Serialize, Serializer};

use crate::cusp::{act_cusp, moving_element, Cusp, GroupElement};
use crate::error::{Result, SpineError};
use crate::field::{field_spec, first_dominates, torsion_units, QuadElem};

/// Largest tie order handled by the canonical-form search.
pub const MAX_LABEL_ORDER: usize = 8;

#[derive(Clone, Debug)]
pub struct OrbitLabel {
    /// The tie set moved to its canonical form, sorted.
    pub canonical_cusps: Vec<Cusp>,
    /// An element taking the tie set to `canonical_cusps`.
    pub gamma: GroupElement,
}

impl PartialEq for OrbitLabel {
    fn eq(&self, other: &Self) -> bool {
        self.canonical_cusps == other.canonical_cusps
    }
}

impl Eq for OrbitLabel {}

impl PartialOrd for OrbitLabel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrbitLabel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.canonical_cusps
            .len()
            .cmp(&other.canonical_cusps.len())
            .reverse()
            .then_with(|| self.canonical_cusps.cmp(&other.canonical_cusps))
    }
}

impl std::hash::Hash for OrbitLabel {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.canonical_cusps.hash(state);
    }
}

impl OrbitLabel {
    pub fn key(&self) -> String {
        self.to_string()
    }

    pub fn order(&self) -> usize {
        self.canonical_cusps.len()
    }
}

impl fmt::Display for OrbitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.canonical_cusps.iter().map(|c| c.to_string()).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

impl Serialize for OrbitLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.key())
    }
}

/// Squares of units with their roots, as candidates for the scaling.
fn torsion_square_roots(d: i64) -> Vec<(QuadElem, QuadElem)> {
    let mut out: Vec<(QuadElem, QuadElem)> = Vec::new();
    for u in torsion_units(d) {
        let sq = &u * &u;
        if !out.iter().any(|(s, _)| *s == sq) {
            out.push((sq, u));
        }
    }
    out
}

/// The power `eps^k` putting `|x1/x2|` of `eps^(2k) x` into `[1, eps^4)`.
fn real_scaling(x: &QuadElem) -> QuadElem {
    let d = x.d();
    let eps = field_spec(d)
        .expect("supported")
        .fundamental_unit
        .clone()
        .expect("real field");
    let eps2 = &eps * &eps;
    let eps2_inv = eps2.inverse().expect("unit");
    let ratio = (x.embed_real(1).abs().ln() - x.embed_real(2).abs().ln()) / (4.0 * eps.embed_real(1).ln());
    let k = if ratio.is_finite() { -ratio.floor() as i32 } else { 0 };
    let mut u = eps.pow(k);
    let mut y = &(&u * &u) * x;
    for _ in 0..64 {
        if !first_dominates(&y) {
            y = &y * &eps2;
            u = &u * &eps;
        } else if first_dominates(&(&y * &eps2_inv)) {
            y = &y * &eps2_inv;
            u = &u * &eps.inverse().expect("unit");
        } else {
            break;
        }
    }
    u
}

/// Integer part of `x` in the integer basis, rounding both coordinates down.
fn floor_part(x: &QuadElem) -> QuadElem {
    let (m, n) = x.basis_coords();
    let fl = |r: &num_rational::BigRational| -> BigInt { r.floor().to_integer() };
    QuadElem::from_integer_coords_big(x.d(), &fl(&m), &fl(&n))
}

struct Candidate {
    cusps: Vec<Cusp>,
    gamma: GroupElement,
}

fn normalized(values: &[QuadElem], scale: &QuadElem, anchor: usize, to_inf: &GroupElement) -> Candidate {
    let d = scale.d();
    let u2 = scale * scale;
    let scaled: Vec<QuadElem> = values.iter().map(|x| &u2 * x).collect();
    let shift = -floor_part(&scaled[anchor]);
    let mut cusps = vec![Cusp::infinity(d)];
    cusps.extend(scaled.iter().map(|y| Cusp::from_value(&(y + &shift))));
    cusps.sort();
    let gamma = GroupElement::translation(&shift)
        .mul(&GroupElement::unit_diag(scale).expect("unit"))
        .mul(to_inf);
    Candidate { cusps, gamma }
}

/// Canonical form of a set of cusps under the group action.
pub fn canonical_form(cusps: &[Cusp]) -> Result<OrbitLabel> {
    if cusps.len() > MAX_LABEL_ORDER {
        return Err(SpineError::SearchBoundExceeded(cusps.len()));
    }
    let Some(first) = cusps.first() else {
        return Err(SpineError::PreconditionViolated("empty tie set".into()));
    };
    let d = first.d();
    let real = d > 0;
    let units = if real { Vec::new() } else { torsion_square_roots(d) };
    let mut best: Option<Candidate> = None;
    let mut offer = |c: Candidate| {
        if best.as_ref().is_none_or(|b| c.cusps < b.cusps) {
            best = Some(c);
        }
    };
    for c in cusps {
        let to_inf = moving_element(c).inverse();
        let values: Vec<QuadElem> = cusps
            .iter()
            .filter(|o| *o != c)
            .map(|o| act_cusp(&to_inf, o).value().expect("finite image"))
            .collect();
        match values.len() {
            0 => offer(Candidate {
                cusps: vec![Cusp::infinity(d)],
                gamma: to_inf.clone(),
            }),
            1 => offer(normalized(&values, &QuadElem::one(d), 0, &to_inf)),
            n => {
                for a in 0..n {
                    for b in 0..n {
                        if a == b {
                            continue;
                        }
                        if real {
                            let u = real_scaling(&(&values[b] - &values[a]));
                            offer(normalized(&values, &u, a, &to_inf));
                        } else {
                            for (_, u) in &units {
                                offer(normalized(&values, u, a, &to_inf));
                            }
                        }
                    }
                }
            }
        }
    }
    let best = best.expect("nonempty");
    Ok(OrbitLabel {
        canonical_cusps: best.cusps,
        gamma: best.gamma,
    })
}

/// Images of a cusp set under the height-preserving symmetries outside the
/// group: negation, conjugation and (real fields) multiplication by the
/// fundamental unit, modulo the group itself.
fn outer_images(cusps: &[Cusp]) -> Vec<Vec<Cusp>> {
    let d = cusps[0].d();
    let map = |f: &dyn Fn(&QuadElem) -> QuadElem| -> Vec<Cusp> {
        cusps
            .iter()
            .map(|c| match c.value() {
                Some(x) => Cusp::from_value(&f(&x)),
                None => c.clone(),
            })
            .collect()
    };
    let mut scalings = vec![QuadElem::one(d), -QuadElem::one(d)];
    if let Some(eps) = field_spec(d).ok().and_then(|s| s.fundamental_unit.clone()) {
        scalings.push(eps.clone());
        scalings.push(-eps);
    }
    let mut out = Vec::new();
    for u in &scalings {
        out.push(map(&|x| u * x));
        out.push(map(&|x| (u * x).conj()));
    }
    out
}

/// Coarser label: the smallest canonical form over the images of the set
/// under [`outer_images`]. Orbits related by these symmetries share
/// incidence numbers and geometry.
pub fn symmetry_type(cusps: &[Cusp]) -> Result<OrbitLabel> {
    if cusps.is_empty() {
        return Err(SpineError::PreconditionViolated("empty tie set".into()));
    }
    let mut best: Option<OrbitLabel> = None;
    for img in outer_images(cusps) {
        let l = canonical_form(&img)?;
        if best.as_ref().is_none_or(|b| l.canonical_cusps < b.canonical_cusps) {
            best = Some(l);
        }
    }
    Ok(best.expect("identity image"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(s: &[&str], d: i64) -> Vec<Cusp> {
        s.iter().map(|x| Cusp::parse(x, d).unwrap()).collect()
    }

    #[test]
    fn modular_labels() {
        let a = canonical_form(&set(&["inf", "0"], 0)).unwrap();
        let b = canonical_form(&set(&["inf", "1"], 0)).unwrap();
        assert_eq!(a, b);
        let c = canonical_form(&set(&["0", "1/2"], 0)).unwrap();
        assert_eq!(a, c);
        let v = canonical_form(&set(&["inf", "0", "1"], 0)).unwrap();
        let w = canonical_form(&set(&["inf", "1", "2"], 0)).unwrap();
        assert_eq!(v, w);
        assert_ne!(a, v);
        let s = canonical_form(&set(&["inf"], 0)).unwrap();
        assert_eq!(s.canonical_cusps, set(&["inf"], 0));
    }

    #[test]
    fn gamma_realizes_label() {
        for (d, cs) in [
            (0, vec!["inf", "1/3", "1/2"]),
            (-1, vec!["inf", "0", "1", "i"]),
            (2, vec!["inf", "0", "1", "sqrt(2)", "1/sqrt(2)"]),
            (-3, vec!["0", "1/2", "inf"]),
        ] {
            let ts = set(&cs, d);
            let l = canonical_form(&ts).unwrap();
            let mut img: Vec<Cusp> = ts.iter().map(|c| act_cusp(&l.gamma, c)).collect();
            img.sort();
            assert_eq!(img, l.canonical_cusps);
        }
    }

    #[test]
    fn symmetry_types_merge_mirror_orbits() {
        let a = set(&["inf", "0", "1"], 2);
        let b = set(&["inf", "0", "-1-sqrt(2)"], 2);
        assert_ne!(canonical_form(&a).unwrap(), canonical_form(&b).unwrap());
        assert_eq!(symmetry_type(&a).unwrap(), symmetry_type(&b).unwrap());
        let c = set(&["inf", "0", "sqrt(2)"], 2);
        assert_ne!(symmetry_type(&a).unwrap(), symmetry_type(&c).unwrap());
    }

    #[test]
    fn unit_scaling_is_absorbed() {
        let ts = set(&["inf", "0", "1", "sqrt(2)", "1/sqrt(2)"], 2);
        let base = canonical_form(&ts).unwrap();
        let eps = field_spec(2).unwrap().fundamental_unit.clone().unwrap();
        let g = GroupElement::unit_diag(&eps).unwrap();
        let moved: Vec<Cusp> = ts.iter().map(|c| act_cusp(&g, c)).collect();
        assert_eq!(canonical_form(&moved).unwrap(), base);
        let too_many: Vec<Cusp> = (0..9).map(|k| Cusp::parse(&format!("{k}"), 0).unwrap()).collect();
        assert_eq!(canonical_form(&too_many), Err(SpineError::SearchBoundExceeded(9)));
    }
}
