//! Cusps as normalized projective pairs `(p : q)` over the ring of integers,
//! and the action of `SL2` on them.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SpineError};
use crate::field::{self, field_spec, parse_elem, FieldSpec, QuadElem};

/// A cusp `(p : q)` in canonical form: coprime, `q` the unit-class
/// representative, and `(1 : 0)` for infinity.
#[derive(Clone, Debug)]
pub struct Cusp {
    p: QuadElem,
    q: QuadElem,
    /// Embeddings of `p` and `q`, cached for height evaluation.
    pe: [Complex64; 2],
    qe: [Complex64; 2],
}

impl PartialEq for Cusp {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.q == other.q
    }
}

impl Eq for Cusp {}

impl Hash for Cusp {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.p.hash(state);
        self.q.hash(state);
    }
}

impl PartialOrd for Cusp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Infinity first, then by `|N(q)|`, then `q`, then `p`.
impl Ord for Cusp {
    fn cmp(&self, other: &Self) -> Ordering {
        let nq = |c: &Cusp| c.q.norm().abs();
        self.q
            .is_zero()
            .cmp(&other.q.is_zero())
            .reverse()
            .then_with(|| nq(self).cmp(&nq(other)))
            .then_with(|| self.q.cmp(&other.q))
            .then_with(|| self.p.cmp(&other.p))
    }
}

impl Cusp {
    fn from_parts(p: QuadElem, q: QuadElem) -> Cusp {
        let pe = [p.embed(1), p.embed(2)];
        let qe = [q.embed(1), q.embed(2)];
        Cusp { p, q, pe, qe }
    }

    pub fn infinity(d: i64) -> Cusp {
        Cusp::from_parts(QuadElem::one(d), QuadElem::zero(d))
    }

    pub fn zero(d: i64) -> Cusp {
        Cusp::from_parts(QuadElem::zero(d), QuadElem::one(d))
    }

    /// The cusp at a field element `x`, i.e. `(x : 1)` after clearing
    /// denominators.
    pub fn from_value(x: &QuadElem) -> Cusp {
        let k = BigRational::from_integer(x.denominator());
        let p = x.scale(&k);
        let q = QuadElem::from_rational(x.d(), k);
        normalize_cusp(&p, &q).expect("q is nonzero")
    }

    /// Builds a cusp from a pair already known to be canonical.
    pub(crate) fn from_canonical(p: QuadElem, q: QuadElem) -> Cusp {
        debug_assert!(Cusp::from_parts(p.clone(), q.clone()).is_normalized());
        Cusp::from_parts(p, q)
    }

    pub fn p(&self) -> &QuadElem {
        &self.p
    }

    pub fn q(&self) -> &QuadElem {
        &self.q
    }

    pub fn d(&self) -> i64 {
        self.p.d()
    }

    pub fn is_infinity(&self) -> bool {
        self.q.is_zero()
    }

    pub(crate) fn p_emb(&self) -> &[Complex64; 2] {
        &self.pe
    }

    pub(crate) fn q_emb(&self) -> &[Complex64; 2] {
        &self.qe
    }

    /// Value `p/q` in the field, `None` at infinity.
    pub fn value(&self) -> Option<QuadElem> {
        if self.is_infinity() {
            None
        } else {
            Some(self.p.checked_div(&self.q).expect("q nonzero"))
        }
    }

    pub fn is_normalized(&self) -> bool {
        normalize_cusp(&self.p, &self.q).is_ok_and(|c| c.p == self.p && c.q == self.q)
    }

    /// Parses `inf`, `p/q` or a single element `p` (meaning `p/1`).
    pub fn parse(s: &str, d: i64) -> Result<Cusp> {
        let s = s.trim();
        if s == "inf" || s == "∞" {
            return Ok(Cusp::infinity(d));
        }
        let mut depth = 0i32;
        let mut split = None;
        for (i, ch) in s.char_indices() {
            match ch {
                '(' => depth += 1,
                ')' => depth -= 1,
                '/' if depth == 0 => {
                    if split.is_some() {
                        return Err(SpineError::Parse(format!("cusp `{s}` has more than one `/`")));
                    }
                    split = Some(i);
                }
                _ => {}
            }
        }
        let (p, q) = match split {
            Some(i) => (parse_elem(&s[..i], d)?, parse_elem(&s[i + 1..], d)?),
            None => (parse_elem(s, d)?, QuadElem::one(d)),
        };
        if !p.is_integral() || !q.is_integral() {
            // a rational entry: treat p/q as a field element
            if q.is_zero() {
                return Err(SpineError::DivisionByZero);
            }
            return Ok(Cusp::from_value(&p.checked_div(&q)?));
        }
        normalize_cusp(&p, &q)
    }
}

impl fmt::Display for Cusp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinity() {
            return write!(f, "inf");
        }
        let show = |x: &QuadElem| {
            if x.needs_parens() || (!x.is_rational() && !x.a().is_zero()) {
                format!("({x})")
            } else {
                x.to_string()
            }
        };
        write!(f, "{}/{}", show(&self.p), show(&self.q))
    }
}

/// Canonical coprime representative of `(p : q)`.
pub fn normalize_cusp(p: &QuadElem, q: &QuadElem) -> Result<Cusp> {
    if p.d() != q.d() {
        return Err(SpineError::FieldMismatch(p.d(), q.d()));
    }
    let d = p.d();
    if p.is_zero() && q.is_zero() {
        return Err(SpineError::BothZero);
    }
    for x in [p, q] {
        if !x.is_integral() {
            return Err(SpineError::NonIntegerInput(x.to_string()));
        }
    }
    if q.is_zero() {
        return Ok(Cusp::infinity(d));
    }
    if p.is_zero() {
        return Ok(Cusp::zero(d));
    }
    let g = field::euclid_gcd(p, q)?;
    let p1 = p.checked_div(&g)?;
    let q1 = q.checked_div(&g)?;
    let (qn, u) = field::unit_normalize(&q1);
    Ok(Cusp::from_parts(&u * &p1, qn))
}

/// `p1 q2 - p2 q1`; zero exactly when the cusps coincide.
pub fn cusp_delta(c1: &Cusp, c2: &Cusp) -> QuadElem {
    &(&c1.p * &c2.q) - &(&c2.p * &c1.q)
}

/// `|N(delta)|` as a rational.
pub fn delta_norm(c1: &Cusp, c2: &Cusp) -> BigRational {
    cusp_delta(c1, c2).norm().abs()
}

/// Element of `SL2(k)` with determinant exactly one.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroupElement {
    pub a: QuadElem,
    pub b: QuadElem,
    pub c: QuadElem,
    pub d: QuadElem,
}

impl GroupElement {
    pub fn new(a: QuadElem, b: QuadElem, c: QuadElem, d: QuadElem) -> Result<Self> {
        let dd = a.d();
        for x in [&b, &c, &d] {
            if x.d() != dd {
                return Err(SpineError::FieldMismatch(dd, x.d()));
            }
        }
        let g = GroupElement { a, b, c, d };
        if !g.det().is_one() {
            return Err(SpineError::NotUnimodular);
        }
        Ok(g)
    }

    /// Integer-entry convenience constructor.
    pub fn from_ints(d: i64, e: [i64; 4]) -> Result<Self> {
        let q = |n| QuadElem::from_int(d, n);
        GroupElement::new(q(e[0]), q(e[1]), q(e[2]), q(e[3]))
    }

    pub fn field_d(&self) -> i64 {
        self.a.d()
    }

    pub fn det(&self) -> QuadElem {
        &(&self.a * &self.d) - &(&self.b * &self.c)
    }

    pub fn identity(d: i64) -> Self {
        GroupElement {
            a: QuadElem::one(d),
            b: QuadElem::zero(d),
            c: QuadElem::zero(d),
            d: QuadElem::one(d),
        }
    }

    /// The Weyl representative `(0, -1; 1, 0)`.
    pub fn weyl(d: i64) -> Self {
        GroupElement {
            a: QuadElem::zero(d),
            b: QuadElem::from_int(d, -1),
            c: QuadElem::one(d),
            d: QuadElem::zero(d),
        }
    }

    pub fn translation(x: &QuadElem) -> Self {
        let d = x.d();
        GroupElement {
            a: QuadElem::one(d),
            b: x.clone(),
            c: QuadElem::zero(d),
            d: QuadElem::one(d),
        }
    }

    /// `diag(u, u^-1)` for a unit `u`.
    pub fn unit_diag(u: &QuadElem) -> Result<Self> {
        let d = u.d();
        GroupElement::new(u.clone(), QuadElem::zero(d), QuadElem::zero(d), u.inverse()?)
    }

    pub fn mul(&self, o: &GroupElement) -> GroupElement {
        GroupElement {
            a: &(&self.a * &o.a) + &(&self.b * &o.c),
            b: &(&self.a * &o.b) + &(&self.b * &o.d),
            c: &(&self.c * &o.a) + &(&self.d * &o.c),
            d: &(&self.c * &o.b) + &(&self.d * &o.d),
        }
    }

    pub fn inverse(&self) -> GroupElement {
        GroupElement {
            a: self.d.clone(),
            b: -&self.b,
            c: -&self.c,
            d: self.a.clone(),
        }
    }

    pub fn is_integral(&self) -> bool {
        [&self.a, &self.b, &self.c, &self.d].iter().all(|x| x.is_integral())
    }

    pub fn is_identity(&self) -> bool {
        *self == GroupElement::identity(self.field_d())
    }

    /// Entries `[a, b, c, d]` in embedding `which`.
    pub fn embed(&self, which: usize) -> [Complex64; 4] {
        [
            self.a.embed(which),
            self.b.embed(which),
            self.c.embed(which),
            self.d.embed(which),
        ]
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}; {}, {})", self.a, self.b, self.c, self.d)
    }
}

/// `g . c`, normalized. Rational entries are cleared before normalizing.
pub fn act_cusp(g: &GroupElement, c: &Cusp) -> Cusp {
    let p = &(&g.a * &c.p) + &(&g.b * &c.q);
    let q = &(&g.c * &c.p) + &(&g.d * &c.q);
    let k = BigRational::from_integer(num_integer::Integer::lcm(&p.denominator(), &q.denominator()));
    normalize_cusp(&p.scale(&k), &q.scale(&k)).expect("invertible action")
}

/// Factors of `g = u w p` off the parabolic, or the parabolic flag.
#[derive(Clone, Debug, PartialEq)]
pub struct BruhatFactors {
    pub in_parabolic: bool,
    pub u: GroupElement,
    pub w: GroupElement,
    pub p: GroupElement,
}

pub fn bruhat_decompose(g: &GroupElement) -> BruhatFactors {
    let d = g.field_d();
    let w = GroupElement::weyl(d);
    if g.c.is_zero() {
        return BruhatFactors {
            in_parabolic: true,
            u: GroupElement::identity(d),
            w,
            p: GroupElement::identity(d),
        };
    }
    let cinv = g.c.inverse().expect("c nonzero");
    let u = GroupElement::translation(&(&g.a * &cinv));
    let p = GroupElement {
        a: g.c.clone(),
        b: g.d.clone(),
        c: QuadElem::zero(d),
        d: cinv,
    };
    BruhatFactors {
        in_parabolic: false,
        u,
        w,
        p,
    }
}

/// Some `g in SL2(O)` with `g . inf = c`, built from a Bezout relation.
pub fn moving_element(c: &Cusp) -> GroupElement {
    let d = c.d();
    if c.is_infinity() {
        return GroupElement::identity(d);
    }
    let (g, x, y) = field::ext_gcd(&c.p, &c.q).expect("nonzero pair");
    // x p + y q = g, a unit
    let ginv = g.inverse().expect("unit");
    let s = &x * &ginv;
    let r = -(&y * &ginv);
    GroupElement::new(c.p.clone(), r, c.q.clone(), s).expect("Bezout determinant")
}

/// Generators of a finite-index subgroup of the stabilizer of `c`:
/// translations by the integer basis and, in real fields, the fundamental
/// unit, conjugated to `c`.
pub fn cusp_stabilizer_generators(c: &Cusp) -> Result<Vec<GroupElement>> {
    if !c.is_normalized() {
        return Err(SpineError::NotNormalized);
    }
    let d = c.d();
    let spec = field_spec(d)?;
    let mut gens = vec![GroupElement::translation(&QuadElem::one(d))];
    if d != 0 {
        gens.push(GroupElement::translation(&QuadElem::omega(d)));
    }
    if let Some(eps) = &spec.fundamental_unit {
        gens.push(GroupElement::unit_diag(eps)?);
    }
    if c.is_infinity() {
        return Ok(gens);
    }
    let g = moving_element(c);
    let gi = g.inverse();
    Ok(gens.iter().map(|h| g.mul(h).mul(&gi)).collect())
}

/// Deterministic word of length `size` in the stabilizer generators of
/// infinity, the Weyl element, and their inverses.
pub fn random_group_element(field: &FieldSpec, size: usize, seed: u64) -> GroupElement {
    let d = field.d;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut letters = cusp_stabilizer_generators(&Cusp::infinity(d)).expect("infinity");
    letters.push(GroupElement::weyl(d));
    let inverses: Vec<_> = letters.iter().map(|g| g.inverse()).collect();
    letters.extend(inverses);
    let mut g = GroupElement::identity(d);
    for _ in 0..size.max(1) {
        let k = rng.gen_range(0..letters.len());
        g = g.mul(&letters[k]);
    }
    g
}

/// Integer `m` as an element of O.
pub fn int_elem(d: i64, m: i64) -> QuadElem {
    QuadElem::from_int(d, m)
}

/// `n / m` as a rational element.
pub fn rat_elem(d: i64, n: i64, m: i64) -> QuadElem {
    QuadElem::from_rational(d, BigRational::new(BigInt::from(n), BigInt::from(m)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_field;

    fn e(d: i64, s: &str) -> QuadElem {
        parse_elem(s, d).unwrap()
    }

    #[test]
    fn normalization_examples() {
        let c = normalize_cusp(&int_elem(0, 2), &int_elem(0, 0)).unwrap();
        assert!(c.is_infinity());
        assert_eq!(c, Cusp::infinity(0));
        let c = normalize_cusp(&e(-1, "2+2*i"), &int_elem(-1, 2)).unwrap();
        let expect = normalize_cusp(&e(-1, "1+i"), &int_elem(-1, 1)).unwrap();
        assert_eq!(c, expect);
        assert_eq!(normalize_cusp(&int_elem(0, 0), &int_elem(0, 5)).unwrap(), Cusp::zero(0));
        assert_eq!(
            normalize_cusp(&int_elem(0, 0), &int_elem(0, 0)),
            Err(SpineError::BothZero)
        );
        // idempotent
        let again = normalize_cusp(c.p(), c.q()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn scalar_multiples_normalize_identically() {
        let d = 2;
        let p = e(d, "3+sqrt(2)");
        let q = e(d, "5");
        let base = normalize_cusp(&p, &q).unwrap();
        for s in ["1+sqrt(2)", "-1", "2", "sqrt(2)", "3-sqrt(2)"] {
            let s = e(d, s);
            let c = normalize_cusp(&(&s * &p), &(&s * &q)).unwrap();
            assert_eq!(c, base);
        }
    }

    #[test]
    fn delta_examples() {
        let inf = Cusp::infinity(0);
        let zero = Cusp::zero(0);
        assert_eq!(cusp_delta(&inf, &zero), int_elem(0, 1));
        let a = normalize_cusp(&int_elem(2, 1), &QuadElem::sqrt_d(2)).unwrap();
        let dn = delta_norm(&a, &Cusp::infinity(2));
        assert_eq!(dn, BigRational::from_integer(2.into()));
        let one = Cusp::parse("1", 0).unwrap();
        assert_eq!(cusp_delta(&zero, &one), int_elem(0, -1));
        assert!(cusp_delta(&one, &one).is_zero());
    }

    #[test]
    fn act_examples() {
        let s = GroupElement::weyl(0);
        assert_eq!(act_cusp(&s, &Cusp::infinity(0)), Cusp::zero(0));
        let t = GroupElement::translation(&int_elem(0, 1));
        assert_eq!(act_cusp(&t, &Cusp::zero(0)), Cusp::parse("1/1", 0).unwrap());
        let g = GroupElement::from_ints(0, [2, 1, 1, 1]).unwrap();
        assert_eq!(act_cusp(&g, &Cusp::infinity(0)), Cusp::parse("2/1", 0).unwrap());
    }

    #[test]
    fn bruhat_examples() {
        let w = GroupElement::weyl(0);
        let f = bruhat_decompose(&w);
        assert!(!f.in_parabolic);
        assert!(f.u.is_identity() && f.p.is_identity());
        let g = GroupElement::from_ints(0, [1, 0, 1, 1]).unwrap();
        let f = bruhat_decompose(&g);
        assert_eq!(f.u, GroupElement::from_ints(0, [1, 1, 0, 1]).unwrap());
        assert_eq!(f.p, GroupElement::from_ints(0, [1, 1, 0, 1]).unwrap());
        assert_eq!(f.u.mul(&f.w).mul(&f.p), g);
        let g = GroupElement::from_ints(0, [2, 1, 1, 1]).unwrap();
        let f = bruhat_decompose(&g);
        assert_eq!(f.u, GroupElement::from_ints(0, [1, 2, 0, 1]).unwrap());
        assert_eq!(f.p, GroupElement::from_ints(0, [1, 1, 0, 1]).unwrap());
        let t = GroupElement::translation(&int_elem(0, 3));
        assert!(bruhat_decompose(&t).in_parabolic);
    }

    #[test]
    fn stabilizer_examples() {
        let gens = cusp_stabilizer_generators(&Cusp::infinity(0)).unwrap();
        assert_eq!(gens, vec![GroupElement::from_ints(0, [1, 1, 0, 1]).unwrap()]);
        let gens = cusp_stabilizer_generators(&Cusp::infinity(2)).unwrap();
        assert_eq!(gens.len(), 3);
        assert_eq!(gens[1], GroupElement::translation(&QuadElem::sqrt_d(2)));
        assert_eq!(
            gens[2],
            GroupElement::new(e(2, "1+sqrt(2)"), int_elem(2, 0), int_elem(2, 0), e(2, "-1+sqrt(2)"))
                .unwrap()
        );
        let gens = cusp_stabilizer_generators(&Cusp::zero(0)).unwrap();
        assert_eq!(gens.len(), 1);
        let expect = GroupElement::from_ints(0, [1, 0, 1, 1]).unwrap();
        assert!(gens[0] == expect || gens[0] == expect.inverse());
        for d in field::SUPPORTED_FIELDS {
            let c = normalize_cusp(&int_elem(d, 2), &int_elem(d, 3)).unwrap();
            for g in cusp_stabilizer_generators(&c).unwrap() {
                assert_eq!(act_cusp(&g, &c), c);
                assert!(!g.is_identity());
            }
        }
    }

    #[test]
    fn random_element_properties() {
        let f = make_field(-1).unwrap();
        let g1 = random_group_element(&f, 1, 42);
        let mut gens = cusp_stabilizer_generators(&Cusp::infinity(-1)).unwrap();
        gens.push(GroupElement::weyl(-1));
        assert!(gens.iter().any(|g| *g == g1 || g.inverse() == g1));
        assert_eq!(random_group_element(&f, 7, 3), random_group_element(&f, 7, 3));
        for seed in 0..20 {
            let g = random_group_element(&f, 6, seed);
            assert!(g.det().is_one());
        }
    }

    #[test]
    fn cusp_strings() {
        for (s, d) in [("inf", 0), ("0/1", 0), ("1/sqrt(2)", 2), ("(1+i)/2", -1), ("sqrt(2)", 2)] {
            let c = Cusp::parse(s, d).unwrap();
            assert_eq!(Cusp::parse(&c.to_string(), d).unwrap(), c);
        }
        assert_eq!(Cusp::zero(0).to_string(), "0/1");
        assert_eq!(Cusp::infinity(0).to_string(), "inf");
        // (1+i)/2 = 1/(1-i)
        let c = Cusp::parse("(1+i)/2", -1).unwrap();
        assert_eq!(c.value().unwrap(), e(-1, "1/2+1/2*i"));
        assert_eq!(c.q().norm(), BigRational::from_integer(2.into()));
    }

    #[test]
    fn moving_element_sends_infinity() {
        for d in field::SUPPORTED_FIELDS {
            let c = Cusp::parse("3/7", d).unwrap();
            let g = moving_element(&c);
            assert!(g.is_integral());
            assert_eq!(act_cusp(&g, &Cusp::infinity(d)), c);
        }
    }
}
