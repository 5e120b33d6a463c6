//! Exact arithmetic in Q and in the quadratic fields Q(sqrt(D)) used by the
//! three models.
//!
//! Elements are stored as `a + b*sqrt(D)` with arbitrary-precision rational
//! coordinates. The ring of integers has basis `{1, omega}` where
//! `omega = sqrt(D)`, or `(1 + sqrt(D))/2` when `D = 1 mod 4`. Floating point
//! only appears at [`QuadElem::embed`].

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Result, SpineError};

/// Discriminants with a supported field. `0` stands for Q itself.
pub const SUPPORTED_FIELDS: [i64; 8] = [0, -1, -2, -3, -7, -11, 2, 5];

/// Static description of a supported field.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FieldSpec {
    pub d: i64,
    /// `D = 1 mod 4`, integer basis `{1, (1 + sqrt(D))/2}`.
    pub integer_basis_shift: bool,
    pub is_real: bool,
    /// Fundamental unit `> 1` in the first embedding (real fields only).
    pub fundamental_unit: Option<QuadElem>,
    pub euclidean: bool,
}

fn is_squarefree(d: i64) -> bool {
    if d == 0 {
        return true;
    }
    let n = d.unsigned_abs();
    let mut k = 2u64;
    while k * k <= n {
        if n % (k * k) == 0 {
            return false;
        }
        k += 1;
    }
    true
}

/// Builds the [`FieldSpec`] for `Q(sqrt(d))`, or Q when `d == 0`.
pub fn make_field(d: i64) -> Result<FieldSpec> {
    field_spec(d).cloned()
}

/// Shared, lazily built spec for a supported field.
pub fn field_spec(d: i64) -> Result<&'static FieldSpec> {
    if !is_squarefree(d) {
        return Err(SpineError::NotSquarefree(d));
    }
    static SPECS: OnceLock<Vec<FieldSpec>> = OnceLock::new();
    let specs = SPECS.get_or_init(|| SUPPORTED_FIELDS.iter().map(|&d| build_spec(d)).collect());
    specs
        .iter()
        .find(|s| s.d == d)
        .ok_or(SpineError::UnsupportedField(d))
}

fn build_spec(d: i64) -> FieldSpec {
    let is_real = d > 0;
    let fundamental_unit = if is_real {
        Some(search_fundamental_unit(d))
    } else {
        None
    };
    FieldSpec {
        d,
        integer_basis_shift: d != 0 && d.rem_euclid(4) == 1,
        is_real,
        fundamental_unit,
        euclidean: true,
    }
}

/// Smallest unit greater than one, by bounded search over integer-basis
/// coordinates.
fn search_fundamental_unit(d: i64) -> QuadElem {
    let mut best: Option<(f64, QuadElem)> = None;
    for n in 1..=64i64 {
        for m in -256..=256i64 {
            let x = QuadElem::from_integer_coords(d, m, n);
            let nm = x.norm();
            if nm.abs() != BigRational::one() {
                continue;
            }
            let v = x.embed_real(1);
            if v > 1.0 + 1e-12 && best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                best = Some((v, x));
            }
        }
    }
    let (_, unit) = best.expect("no unit found in search box");
    assert!(unit.norm().abs().is_one());
    unit
}

/// Element `a + b*sqrt(D)` of Q(sqrt(D)).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QuadElem {
    a: BigRational,
    b: BigRational,
    d: i64,
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl QuadElem {
    pub fn new(d: i64, a: BigRational, b: BigRational) -> Self {
        let b = if d == 0 { BigRational::zero() } else { b };
        QuadElem { a, b, d }
    }

    pub fn from_int(d: i64, n: i64) -> Self {
        QuadElem::new(d, rat(n), BigRational::zero())
    }

    pub fn from_rational(d: i64, r: BigRational) -> Self {
        QuadElem::new(d, r, BigRational::zero())
    }

    pub fn zero(d: i64) -> Self {
        QuadElem::from_int(d, 0)
    }

    pub fn one(d: i64) -> Self {
        QuadElem::from_int(d, 1)
    }

    /// `sqrt(D)` itself.
    pub fn sqrt_d(d: i64) -> Self {
        QuadElem::new(d, BigRational::zero(), BigRational::one())
    }

    /// Second integer-basis element.
    pub fn omega(d: i64) -> Self {
        QuadElem::from_integer_coords(d, 0, 1)
    }

    /// `m + n*omega`.
    pub fn from_integer_coords(d: i64, m: i64, n: i64) -> Self {
        QuadElem::from_integer_coords_big(d, &BigInt::from(m), &BigInt::from(n))
    }

    pub fn from_integer_coords_big(d: i64, m: &BigInt, n: &BigInt) -> Self {
        if d == 0 {
            return QuadElem::from_rational(d, BigRational::from_integer(m.clone()));
        }
        if d.rem_euclid(4) == 1 {
            let half_n = BigRational::new(n.clone(), BigInt::from(2));
            QuadElem::new(d, BigRational::from_integer(m.clone()) + &half_n, half_n)
        } else {
            QuadElem::new(
                d,
                BigRational::from_integer(m.clone()),
                BigRational::from_integer(n.clone()),
            )
        }
    }

    pub fn a(&self) -> &BigRational {
        &self.a
    }

    pub fn b(&self) -> &BigRational {
        &self.b
    }

    pub fn d(&self) -> i64 {
        self.d
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.a.is_one() && self.b.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    /// Coordinates `(m, n)` in the integer basis, as rationals.
    pub fn basis_coords(&self) -> (BigRational, BigRational) {
        if self.d != 0 && self.d.rem_euclid(4) == 1 {
            let n = &self.b * rat(2);
            (&self.a - &self.b, n)
        } else {
            (self.a.clone(), self.b.clone())
        }
    }

    /// Integer-basis coordinates when the element is an algebraic integer.
    pub fn integer_coords(&self) -> Option<(BigInt, BigInt)> {
        let (m, n) = self.basis_coords();
        if m.is_integer() && n.is_integer() {
            Some((m.to_integer(), n.to_integer()))
        } else {
            None
        }
    }

    pub fn is_integral(&self) -> bool {
        self.integer_coords().is_some()
    }

    /// Least positive integer `k` with `k * self` integral.
    pub fn denominator(&self) -> BigInt {
        let (m, n) = self.basis_coords();
        m.denom().lcm(n.denom())
    }

    pub fn conj(&self) -> QuadElem {
        QuadElem::new(self.d, self.a.clone(), -self.b.clone())
    }

    /// `a^2 - D b^2`.
    pub fn norm(&self) -> BigRational {
        &self.a * &self.a - rat(self.d) * &self.b * &self.b
    }

    pub fn trace(&self) -> BigRational {
        &self.a * rat(2)
    }

    pub fn inverse(&self) -> Result<QuadElem> {
        if self.is_zero() {
            return Err(SpineError::DivisionByZero);
        }
        let n = self.norm();
        let c = self.conj();
        Ok(QuadElem::new(self.d, c.a / &n, c.b / &n))
    }

    pub fn checked_div(&self, other: &QuadElem) -> Result<QuadElem> {
        Ok(self * &other.inverse()?)
    }

    pub fn scale(&self, r: &BigRational) -> QuadElem {
        QuadElem::new(self.d, &self.a * r, &self.b * r)
    }

    pub fn pow(&self, e: i32) -> QuadElem {
        let base = if e < 0 {
            self.inverse().expect("power of zero")
        } else {
            self.clone()
        };
        let mut acc = QuadElem::one(self.d);
        for _ in 0..e.unsigned_abs() {
            acc = &acc * &base;
        }
        acc
    }

    fn naive_embed(&self, which: usize) -> f64 {
        let a = self.a.to_f64().unwrap_or(f64::NAN);
        let b = self.b.to_f64().unwrap_or(f64::NAN);
        let s = (self.d as f64).abs().sqrt();
        if which == 1 {
            a + b * s
        } else {
            a - b * s
        }
    }

    /// Value in the real embedding `which` (1 or 2); real and rational
    /// fields only.
    pub fn embed_real(&self, which: usize) -> f64 {
        debug_assert!(self.d >= 0);
        if self.d == 0 {
            return self.a.to_f64().unwrap_or(f64::NAN);
        }
        let v = self.naive_embed(which);
        let w = self.naive_embed(3 - which);
        // recover a cancelled embedding from the norm
        if v.abs() < 1e-3 * w.abs() {
            let n = self.norm().to_f64().unwrap_or(f64::NAN);
            if n != 0.0 {
                return n / w;
            }
        }
        v
    }

    /// Value in embedding `which`; for `D < 0` embedding 2 is the complex
    /// conjugate of embedding 1.
    pub fn embed(&self, which: usize) -> Complex64 {
        if self.d >= 0 {
            return Complex64::new(self.embed_real(which), 0.0);
        }
        let a = self.a.to_f64().unwrap_or(f64::NAN);
        let b = self.b.to_f64().unwrap_or(f64::NAN) * (-self.d as f64).sqrt();
        if which == 1 {
            Complex64::new(a, b)
        } else {
            Complex64::new(a, -b)
        }
    }

    fn assert_same(&self, other: &QuadElem) {
        assert_eq!(self.d, other.d, "mixed fields in arithmetic");
    }

    /// Exact sign of the first real embedding (real and rational fields).
    pub fn sign_real(&self) -> Ordering {
        let sa = self.a.cmp(&BigRational::zero());
        let sb = self.b.cmp(&BigRational::zero());
        if self.d == 0 || sb == Ordering::Equal {
            return sa;
        }
        if sa == Ordering::Equal {
            return sb;
        }
        if sa == sb {
            return sa;
        }
        let a2 = &self.a * &self.a;
        let db2 = rat(self.d) * &self.b * &self.b;
        match a2.cmp(&db2) {
            Ordering::Greater => sa,
            Ordering::Less => sb,
            Ordering::Equal => Ordering::Equal,
        }
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr<&QuadElem> for &QuadElem {
            type Output = QuadElem;
            fn $m(self, rhs: &QuadElem) -> QuadElem {
                self.assert_same(rhs);
                let f: fn(&QuadElem, &QuadElem) -> QuadElem = $body;
                f(self, rhs)
            }
        }
        impl $tr<QuadElem> for QuadElem {
            type Output = QuadElem;
            fn $m(self, rhs: QuadElem) -> QuadElem {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&QuadElem> for QuadElem {
            type Output = QuadElem;
            fn $m(self, rhs: &QuadElem) -> QuadElem {
                (&self).$m(rhs)
            }
        }
    };
}

binop!(Add, add, |x, y| QuadElem::new(x.d, &x.a + &y.a, &x.b + &y.b));
binop!(Sub, sub, |x, y| QuadElem::new(x.d, &x.a - &y.a, &x.b - &y.b));
binop!(Mul, mul, |x, y| QuadElem::new(
    x.d,
    &x.a * &y.a + rat(x.d) * &x.b * &y.b,
    &x.a * &y.b + &x.b * &y.a
));

impl Neg for &QuadElem {
    type Output = QuadElem;
    fn neg(self) -> QuadElem {
        QuadElem::new(self.d, -self.a.clone(), -self.b.clone())
    }
}

impl Neg for QuadElem {
    type Output = QuadElem;
    fn neg(self) -> QuadElem {
        -&self
    }
}

impl PartialOrd for QuadElem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lexicographic on `(a, b)`; a total order for canonical forms, not the
/// field order.
impl Ord for QuadElem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.a.cmp(&other.a).then_with(|| self.b.cmp(&other.b))
    }
}

fn fmt_rat(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl QuadElem {
    /// Whether the display form needs parentheses inside a cusp string.
    pub fn needs_parens(&self) -> bool {
        !(self.a.is_integer() && self.b.is_integer())
    }
}

impl fmt::Display for QuadElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b.is_zero() {
            return write!(f, "{}", fmt_rat(&self.a));
        }
        let surd = format!("sqrt({})", self.d);
        let bterm = if self.b.abs().is_one() {
            surd
        } else {
            format!("{}*{}", fmt_rat(&self.b.abs()), surd)
        };
        let neg = self.b.is_negative();
        if self.a.is_zero() {
            if neg {
                write!(f, "-{bterm}")
            } else {
                write!(f, "{bterm}")
            }
        } else {
            let sign = if neg { '-' } else { '+' };
            write!(f, "{}{}{}", fmt_rat(&self.a), sign, bterm)
        }
    }
}

fn parse_rat(s: &str) -> Result<BigRational> {
    let bad = || SpineError::Parse(format!("bad rational '{s}'"));
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n).map_err(|_| bad())?;
        let d = BigInt::from_str(d).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        Ok(BigRational::new(n, d))
    } else {
        Ok(BigRational::from_integer(
            BigInt::from_str(s).map_err(|_| bad())?,
        ))
    }
}

/// Strips one pair of parentheses enclosing the whole string.
pub(crate) fn strip_outer_parens(s: &str) -> &str {
    let s = s.trim();
    if !(s.starts_with('(') && s.ends_with(')')) {
        return s;
    }
    let mut depth = 0i32;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 && i != s.len() - 1 {
                    return s;
                }
            }
            _ => {}
        }
    }
    &s[1..s.len() - 1]
}

/// Parses `a+b*sqrt(D)` syntax. `i` is accepted for `sqrt(-1)`.
pub fn parse_elem(s: &str, d: i64) -> Result<QuadElem> {
    let s: String = strip_outer_parens(s).chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err(SpineError::Parse("empty element".into()));
    }
    let mut terms: Vec<String> = Vec::new();
    let mut cur = String::new();
    let mut depth = 0;
    for ch in s.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            '+' | '-' if depth == 0 && !cur.is_empty() && !cur.ends_with('(') => {
                terms.push(std::mem::take(&mut cur));
            }
            _ => {}
        }
        cur.push(ch);
    }
    terms.push(cur);
    let mut a = BigRational::zero();
    let mut b = BigRational::zero();
    for t in terms {
        let (neg, body) = match t.strip_prefix('-') {
            Some(r) => (true, r),
            None => (false, t.strip_prefix('+').unwrap_or(&t)),
        };
        let (coef, is_surd) = if let Some(pos) = body.find("sqrt(") {
            let inner = body[pos + 5..]
                .strip_suffix(')')
                .ok_or_else(|| SpineError::Parse(format!("bad surd '{body}'")))?;
            let dd: i64 = inner
                .parse()
                .map_err(|_| SpineError::Parse(format!("bad surd '{body}'")))?;
            if dd != d {
                return Err(SpineError::FieldMismatch(dd, d));
            }
            let c = body[..pos].trim_end_matches('*');
            let c = if c.is_empty() { BigRational::one() } else { parse_rat(c)? };
            (c, true)
        } else if body == "i" || body.ends_with("*i") {
            if d != -1 {
                return Err(SpineError::FieldMismatch(-1, d));
            }
            let c = body.trim_end_matches('i').trim_end_matches('*');
            let c = if c.is_empty() { BigRational::one() } else { parse_rat(c)? };
            (c, true)
        } else {
            (parse_rat(body)?, false)
        };
        let coef = if neg { -coef } else { coef };
        if is_surd {
            b += coef;
        } else {
            a += coef;
        }
    }
    if d == 0 && !b.is_zero() {
        return Err(SpineError::Parse("surd in rational field".into()));
    }
    Ok(QuadElem::new(d, a, b))
}

/// Roots of unity in an imaginary field.
pub fn torsion_units(d: i64) -> Vec<QuadElem> {
    match d {
        -1 => vec![
            QuadElem::one(d),
            QuadElem::sqrt_d(d),
            QuadElem::from_int(d, -1),
            -QuadElem::sqrt_d(d),
        ],
        -3 => {
            let w = QuadElem::omega(d);
            (0..6).map(|k| w.pow(k)).collect()
        }
        _ => vec![QuadElem::one(d), QuadElem::from_int(d, -1)],
    }
}

fn in_unit_sector(d: i64, x: &QuadElem) -> bool {
    let zero = BigRational::zero();
    match d {
        0 => x.a > zero,
        d if d > 0 => unreachable!(),
        -1 => x.a > zero && x.b >= zero,
        -3 => x.a > zero && x.b >= zero && x.b < x.a,
        _ => x.b > zero || (x.b.is_zero() && x.a > zero),
    }
}

/// Whether `|x1| >= |x2|` in a real field, exactly (`x1^2 - x2^2 = 4ab sqrt(D)`).
pub(crate) fn first_dominates(x: &QuadElem) -> bool {
    !(&x.a * &x.b).is_negative()
}

/// Unit-class representative: returns `(u*x, u)` where `u*x` is canonical.
///
/// Q: positive. Imaginary fields: argument in `[0, 2pi/|mu|)`. Real fields:
/// embedding ratio `|x1/x2|` in `[1, eps^2)` and first embedding positive.
pub fn unit_normalize(x: &QuadElem) -> (QuadElem, QuadElem) {
    let d = x.d;
    if x.is_zero() {
        return (x.clone(), QuadElem::one(d));
    }
    if d <= 0 {
        for u in torsion_units(d) {
            let y = &u * x;
            if in_unit_sector(d, &y) {
                return (y, u);
            }
        }
        unreachable!("no unit moves {x} into the sector");
    }
    let spec = field_spec(d).expect("supported field");
    let eps = spec.fundamental_unit.clone().expect("real field unit");
    let eps_inv = eps.inverse().expect("unit");
    let n_abs = x.norm().abs().to_f64().unwrap_or(1.0);
    let e1 = x.embed_real(1).abs();
    let log_ratio = if e1 > 0.0 { 2.0 * e1.ln() - n_abs.ln() } else { 0.0 };
    let step = 2.0 * eps.embed_real(1).ln();
    let k = -(log_ratio / step).floor();
    let k = if k.is_finite() { k as i32 } else { 0 };
    let mut u = eps.pow(k);
    let mut y = &u * x;
    for _ in 0..64 {
        if !first_dominates(&y) {
            y = &y * &eps;
            u = &u * &eps;
            continue;
        }
        let down = &y * &eps_inv;
        if first_dominates(&down) {
            y = down;
            u = &u * &eps_inv;
            continue;
        }
        break;
    }
    if y.sign_real() == Ordering::Less {
        y = -y;
        u = -u;
    }
    (y, u)
}

pub fn is_unit_canonical(x: &QuadElem) -> bool {
    !x.is_zero() && unit_normalize(x).0 == *x
}

pub fn is_unit(x: &QuadElem) -> bool {
    x.is_integral() && x.norm().abs().is_one()
}

/// Nearest-coordinate rounded quotient: returns `(q, r)` with `x = q*y + r`
/// and `|N(r)| < |N(y)|`.
pub fn div_round(x: &QuadElem, y: &QuadElem) -> Result<(QuadElem, QuadElem)> {
    let exact = x.checked_div(y)?;
    let (m, n) = exact.basis_coords();
    let round = |r: &BigRational| (r + BigRational::new(1.into(), 2.into())).floor().to_integer();
    let (m0, n0) = (round(&m), round(&n));
    let target = y.norm().abs();
    let mut best: Option<(BigRational, QuadElem, QuadElem)> = None;
    for dm in [0i64, -1, 1] {
        for dn in [0i64, -1, 1] {
            let q = QuadElem::from_integer_coords_big(x.d, &(&m0 + dm), &(&n0 + dn));
            let r = x - &(&q * y);
            let nr = r.norm().abs();
            if nr < target {
                return Ok((q, r));
            }
            if best.as_ref().is_none_or(|(b, _, _)| nr < *b) {
                best = Some((nr, q, r));
            }
        }
    }
    let (_, q, r) = best.expect("candidates");
    Ok((q, r))
}

fn check_gcd_inputs(x: &QuadElem, y: &QuadElem) -> Result<()> {
    if x.d != y.d {
        return Err(SpineError::FieldMismatch(x.d, y.d));
    }
    if x.is_zero() && y.is_zero() {
        return Err(SpineError::BothZero);
    }
    for v in [x, y] {
        if !v.is_integral() {
            return Err(SpineError::NonIntegerInput(v.to_string()));
        }
    }
    Ok(())
}

/// Greatest common divisor in a Euclidean ring of integers, normalized to
/// the unit-class representative.
pub fn euclid_gcd(x: &QuadElem, y: &QuadElem) -> Result<QuadElem> {
    Ok(ext_gcd(x, y)?.0)
}

/// Extended gcd: `(g, s, t)` with `g = s*x + t*y`, `g` unit-normalized.
pub fn ext_gcd(x: &QuadElem, y: &QuadElem) -> Result<(QuadElem, QuadElem, QuadElem)> {
    check_gcd_inputs(x, y)?;
    let d = x.d;
    let (mut r0, mut r1) = (x.clone(), y.clone());
    let (mut s0, mut s1) = (QuadElem::one(d), QuadElem::zero(d));
    let (mut t0, mut t1) = (QuadElem::zero(d), QuadElem::one(d));
    while !r1.is_zero() {
        let (q, r) = div_round(&r0, &r1)?;
        let s2 = &s0 - &(&q * &s1);
        let t2 = &t0 - &(&q * &t1);
        r0 = std::mem::replace(&mut r1, r);
        s0 = std::mem::replace(&mut s1, s2);
        t0 = std::mem::replace(&mut t1, t2);
    }
    let (g, u) = unit_normalize(&r0);
    Ok((g, &u * &s0, &u * &t0))
}

/// Whether `y` divides `x` in the ring of integers.
pub fn divides(y: &QuadElem, x: &QuadElem) -> bool {
    if y.is_zero() {
        return x.is_zero();
    }
    x.checked_div(y).map(|q| q.is_integral()).unwrap_or(false)
}

/// Real 2x2 basis of the Minkowski embedding of the integer ring:
/// columns are the images of `1` and `omega`.
pub(crate) fn minkowski_basis(d: i64) -> [[f64; 2]; 2] {
    let w = QuadElem::omega(d);
    if d < 0 {
        let e = w.embed(1);
        [[1.0, e.re], [0.0, e.im]]
    } else {
        [[1.0, w.embed_real(1)], [1.0, w.embed_real(2)]]
    }
}

/// Integer-basis coordinates of lattice points inside an axis-aligned box
/// of Minkowski space. For `d == 0` only the first axis is used.
pub(crate) fn lattice_points_in_box(d: i64, center: [f64; 2], half: [f64; 2]) -> Vec<(i64, i64)> {
    let slack = 1e-9;
    if d == 0 {
        let lo = (center[0] - half[0] - slack).ceil() as i64;
        let hi = (center[0] + half[0] + slack).floor() as i64;
        return (lo..=hi).map(|m| (m, 0)).collect();
    }
    let b = minkowski_basis(d);
    let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
    let inv = [[b[1][1] / det, -b[0][1] / det], [-b[1][0] / det, b[0][0] / det]];
    let mut mr = [f64::INFINITY, f64::NEG_INFINITY];
    let mut nr = [f64::INFINITY, f64::NEG_INFINITY];
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            let px = center[0] + sx * half[0];
            let py = center[1] + sy * half[1];
            let m = inv[0][0] * px + inv[0][1] * py;
            let n = inv[1][0] * px + inv[1][1] * py;
            mr = [mr[0].min(m), mr[1].max(m)];
            nr = [nr[0].min(n), nr[1].max(n)];
        }
    }
    let mut out = Vec::new();
    let (m0, m1) = ((mr[0] - slack).ceil() as i64, (mr[1] + slack).floor() as i64);
    let (n0, n1) = ((nr[0] - slack).ceil() as i64, (nr[1] + slack).floor() as i64);
    for n in n0..=n1 {
        for m in m0..=m1 {
            let px = b[0][0] * m as f64 + b[0][1] * n as f64;
            let py = b[1][0] * m as f64 + b[1][1] * n as f64;
            let tol_x = slack * (1.0 + half[0]);
            let tol_y = slack * (1.0 + half[1]);
            if (px - center[0]).abs() <= half[0] + tol_x && (py - center[1]).abs() <= half[1] + tol_y {
                out.push((m, n));
            }
        }
    }
    out
}

/// Algebraic integers with `0 < |N(x)| <= bound`.
///
/// Without `per_embedding_bounds`, one representative per unit class is
/// returned (see [`unit_normalize`]). With bounds `(b1, b2)`, every element
/// with `|x^(i)| <= b_i` is returned.
pub fn enumerate_bounded_norm(
    field: &FieldSpec,
    bound: &BigRational,
    per_embedding_bounds: Option<(f64, f64)>,
) -> Vec<QuadElem> {
    let d = field.d;
    if !bound.is_positive() {
        return Vec::new();
    }
    let bf = bound.to_f64().unwrap_or(0.0);
    let root = bf.sqrt();
    let half = match (per_embedding_bounds, d) {
        (Some((b1, _)), 0) => [b1.min(bf), 0.0],
        (None, 0) => [bf, 0.0],
        (Some((b1, b2)), dd) if dd < 0 => [b1.min(root), b2.min(root)],
        (None, dd) if dd < 0 => [root, root],
        (Some((b1, b2)), _) => [b1, b2],
        (None, _) => {
            let eps = field.fundamental_unit.as_ref().expect("unit").embed_real(1);
            [eps * root, root]
        }
    };
    let mut out: Vec<QuadElem> = lattice_points_in_box(d, [0.0, 0.0], half)
        .into_iter()
        .map(|(m, n)| QuadElem::from_integer_coords(d, m, n))
        .filter(|x| {
            let nm = x.norm().abs();
            !x.is_zero() && nm <= *bound
        })
        .filter(|x| {
            if let Some((b1, b2)) = per_embedding_bounds {
                let e1 = x.embed(1).norm();
                let e2 = x.embed(2).norm();
                e1 <= b1 * (1.0 + 1e-12) && e2 <= b2 * (1.0 + 1e-12)
            } else {
                is_unit_canonical(x)
            }
        })
        .collect();
    out.sort_by(|x, y| x.norm().abs().cmp(&y.norm().abs()).then_with(|| x.cmp(y)));
    out
}
