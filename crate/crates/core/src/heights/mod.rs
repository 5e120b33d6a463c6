//! Exhaustion functions on the three models: evaluation, Riemannian
//! gradients, the geodesic action, high-cusp enumeration, exact pair
//! invariants, the flow-form fit and first contacts.

mod enumerate;
mod model;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_traits::ToPrimitive;
use serde::Serialize;

pub use enumerate::{relevant_cusps, scan_cusps};
pub use model::{act_embedded, EmbeddedMatrix, HeightParams, Model, ModelKind, ModelPoint};

use crate::cusp::{act_cusp, cusp_delta, moving_element, Cusp, GroupElement};
use crate::error::{Result, SpineError};

/// Height toward a cusp with unit scale, from cached embeddings.
pub(crate) fn base_height(pe: &[Complex64; 2], qe: &[Complex64; 2], z: &ModelPoint) -> f64 {
    match *z {
        ModelPoint::H2 { x, y } => {
            let (p, q) = (pe[0].re, qe[0].re);
            let u = q * x - p;
            y / (u * u + q * q * y * y)
        }
        ModelPoint::H3 { z, t } => {
            let w = qe[0] * z - pe[0];
            t / (w.norm_sqr() + qe[0].norm_sqr() * t * t)
        }
        ModelPoint::HH { x1, y1, x2, y2 } => {
            let a = |p: f64, q: f64, x: f64, y: f64| {
                let u = q * x - p;
                u * u + q * q * y * y
            };
            let a1 = a(pe[0].re, qe[0].re, x1, y1);
            let a2 = a(pe[1].re, qe[1].re, x2, y2);
            (y1 * y2 / (a1 * a2)).sqrt()
        }
    }
}

/// Euclidean differential of the unit-scale height, together with the
/// height itself.
fn base_differential(pe: &[Complex64; 2], qe: &[Complex64; 2], z: &ModelPoint) -> (f64, Vec<f64>) {
    let f = base_height(pe, qe, z);
    let df = match *z {
        ModelPoint::H2 { x, y } => {
            let (p, q) = (pe[0].re, qe[0].re);
            let u = q * x - p;
            let a = u * u + q * q * y * y;
            vec![-f * 2.0 * q * u / a, f / y - f * 2.0 * q * q * y / a]
        }
        ModelPoint::H3 { z, t } => {
            let q = qe[0];
            let w = q * z - pe[0];
            let a = w.norm_sqr() + q.norm_sqr() * t * t;
            let dx1 = 2.0 * (w.conj() * q).re;
            let dx2 = 2.0 * (w.conj() * q * Complex64::i()).re;
            vec![-f * dx1 / a, -f * dx2 / a, f / t - f * 2.0 * q.norm_sqr() * t / a]
        }
        ModelPoint::HH { x1, y1, x2, y2 } => {
            let part = |p: f64, q: f64, x: f64, y: f64| {
                let u = q * x - p;
                let a = u * u + q * q * y * y;
                (-f * q * u / a, f * (0.5 / y - q * q * y / a))
            };
            let (a, b) = part(pe[0].re, qe[0].re, x1, y1);
            let (c, d) = part(pe[1].re, qe[1].re, x2, y2);
            vec![a, b, c, d]
        }
    };
    (f, df)
}

fn check(model: &Model, c: &Cusp, z: &ModelPoint) -> Result<()> {
    if c.d() != model.d() {
        return Err(SpineError::FieldMismatch(c.d(), model.d()));
    }
    if z.kind() != model.kind {
        return Err(SpineError::InvalidPoint(format!(
            "point of kind {} in model {}",
            z.kind().name(),
            model.kind.name()
        )));
    }
    Ok(())
}

/// `f_c(z)` without validation.
pub(crate) fn height(params: &HeightParams, c: &Cusp, z: &ModelPoint) -> f64 {
    params.lambda(c) * base_height(c.p_emb(), c.q_emb(), z)
}

/// Exhaustion function `f_c(z) = lambda * base(c, z)`.
pub fn height_eval(model: &Model, params: &HeightParams, c: &Cusp, z: &ModelPoint) -> Result<f64> {
    check(model, c, z)?;
    Ok(height(params, c, z))
}

/// Riemannian gradient without validation.
pub(crate) fn gradient(params: &HeightParams, c: &Cusp, z: &ModelPoint) -> Vec<f64> {
    let lam = params.lambda(c);
    let (_, df) = base_differential(c.p_emb(), c.q_emb(), z);
    z.metric_scales()
        .iter()
        .zip(df)
        .map(|(s, g)| lam * s * s * g)
        .collect()
}

/// Height and the Euclidean differential of `log f_c`.
pub(crate) fn log_differential(params: &HeightParams, c: &Cusp, z: &ModelPoint) -> (f64, Vec<f64>) {
    let (f, df) = base_differential(c.p_emb(), c.q_emb(), z);
    let lam = params.lambda(c);
    (lam * f, df.into_iter().map(|g| g / f).collect())
}

/// Riemannian gradient of `f_c` with respect to the invariant metric.
pub fn riem_gradient(model: &Model, params: &HeightParams, c: &Cusp, z: &ModelPoint) -> Result<Vec<f64>> {
    check(model, c, z)?;
    Ok(gradient(params, c, z))
}

/// Isometric action of `g` on the model.
pub fn act_point(g: &GroupElement, z: &ModelPoint) -> ModelPoint {
    act_embedded(&EmbeddedMatrix::new(g), z)
}

fn flow_at_infinity(z: &ModelPoint, s: f64) -> ModelPoint {
    match *z {
        ModelPoint::H2 { x, y } => ModelPoint::H2 { x, y: s * y },
        ModelPoint::H3 { z, t } => ModelPoint::H3 { z, t: s * t },
        ModelPoint::HH { x1, y1, x2, y2 } => ModelPoint::HH {
            x1,
            y1: s * y1,
            x2,
            y2: s * y2,
        },
    }
}

/// A cusp together with an element moving it to infinity, embedded for
/// repeated use along flows.
#[derive(Clone, Debug)]
pub struct CuspFrame {
    pub cusp: Cusp,
    /// `gamma` with `gamma . cusp = inf`.
    pub to_inf: GroupElement,
    fwd: EmbeddedMatrix,
    back: EmbeddedMatrix,
}

impl CuspFrame {
    pub fn new(c: &Cusp) -> CuspFrame {
        let g = moving_element(c);
        let to_inf = g.inverse();
        CuspFrame {
            cusp: c.clone(),
            fwd: EmbeddedMatrix::new(&to_inf),
            back: EmbeddedMatrix::new(&g),
            to_inf,
        }
    }

    pub fn to_infinity(&self, z: &ModelPoint) -> ModelPoint {
        if self.cusp.is_infinity() {
            *z
        } else {
            act_embedded(&self.fwd, z)
        }
    }

    pub fn from_infinity(&self, z: &ModelPoint) -> ModelPoint {
        if self.cusp.is_infinity() {
            *z
        } else {
            act_embedded(&self.back, z)
        }
    }

    /// Geodesic action toward the cusp, scaling `f_cusp` by `s`.
    pub fn flow(&self, z: &ModelPoint, s: f64) -> ModelPoint {
        if s == 1.0 {
            return *z;
        }
        self.from_infinity(&flow_at_infinity(&self.to_infinity(z), s))
    }
}

/// Flows `z` along the geodesic action of the cusp so that `f_c` is
/// multiplied by `s`.
pub fn geodesic_flow(model: &Model, c: &Cusp, z: &ModelPoint, s: f64) -> Result<ModelPoint> {
    check(model, c, z)?;
    if s <= 0.0 || !s.is_finite() {
        return Err(SpineError::PreconditionViolated(format!("flow level {s} must be positive")));
    }
    Ok(CuspFrame::new(c).flow(z, s))
}

/// `f_c(z) / f_c(x)`.
pub fn geodesic_ratio(model: &Model, c: &Cusp, z: &ModelPoint, x: &ModelPoint) -> Result<f64> {
    let params = HeightParams::default();
    Ok(height_eval(model, &params, c, z)? / height_eval(model, &params, c, x)?)
}

/// `|delta|^2` in the model's absolute value: `delta^2`, the complex norm,
/// or `|N(delta)|`.
pub fn delta_abs_sq(model: &Model, c1: &Cusp, c2: &Cusp) -> f64 {
    let n = cusp_delta(c1, c2).norm();
    let v = n.to_f64().unwrap_or(f64::NAN).abs();
    match model.kind {
        // the rational delta squared equals its norm
        ModelKind::ModularH2 | ModelKind::BianchiH3 | ModelKind::HilbertH2xH2 => v,
    }
}

/// `rho(c1, c2) = lambda_1 lambda_2 / |delta|^2`, the limit of
/// `f_c1 f_c2` along the flow toward `c1`.
pub fn pair_invariant(model: &Model, params: &HeightParams, c1: &Cusp, c2: &Cusp) -> Result<f64> {
    if c1 == c2 {
        return Err(SpineError::EqualCusps);
    }
    for c in [c1, c2] {
        if c.d() != model.d() {
            return Err(SpineError::FieldMismatch(c.d(), model.d()));
        }
    }
    Ok(params.lambda(c1) * params.lambda(c2) / delta_abs_sq(model, c1, c2))
}

/// First contact of a pair: the common height `sqrt(rho)` and a witness.
pub fn first_contact_pair(
    model: &Model,
    params: &HeightParams,
    c1: &Cusp,
    c2: &Cusp,
) -> Result<(f64, ModelPoint)> {
    let rho = pair_invariant(model, params, c1, c2)?;
    let frame = CuspFrame::new(c1);
    let image = act_cusp(&frame.to_inf, c2);
    let xv = image.value().expect("distinct from infinity");
    let ratio = params.lambda(c2) / params.lambda(c1);
    let qe = image.q_emb();
    let w = match model.kind {
        ModelKind::ModularH2 => {
            let x = xv.embed_real(1);
            ModelPoint::h2(x, ratio.sqrt() / qe[0].re.abs())
        }
        ModelKind::BianchiH3 => {
            let x = xv.embed(1);
            ModelPoint::h3(x.re, x.im, ratio.sqrt() / qe[0].norm())
        }
        ModelKind::HilbertH2xH2 => {
            let (a1, a2) = (qe[0].re.abs(), qe[1].re.abs());
            let big_y = ratio / (a1 * a2);
            ModelPoint::hh(
                xv.embed_real(1),
                (big_y * a2 / a1).sqrt(),
                xv.embed_real(2),
                (big_y * a1 / a2).sqrt(),
            )
        }
    };
    Ok((rho.sqrt(), frame.from_infinity(&w)))
}

/// Fitted coefficients of `(u / f_Q)^N = sum_k e_k u^(2k)` along the flow
/// toward `P`, where `u = f_P`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowCoefficients {
    pub e: Vec<f64>,
    /// `e_N^(-1/N)`, the limit of `f_P f_Q` along the flow.
    pub limit_invariant: f64,
    /// Level `u*` at which `f_P = f_Q` on the sampled flow line, or the
    /// base level when the line never reaches the tie.
    pub tie_level: f64,
    /// Largest relative error of the fit on held-out levels.
    pub residual: f64,
}

impl FlowCoefficients {
    /// Coefficients scaled to the reference level: `e_k u*^(2k)`, summing to
    /// one when the line reaches the tie.
    pub fn normalized(&self) -> Vec<f64> {
        self.e
            .iter()
            .enumerate()
            .map(|(k, e)| e * self.tie_level.powi(2 * k as i32))
            .collect()
    }
}

pub const FIT_TOLERANCE: f64 = 1e-8;
pub const FIT_NONNEGATIVITY_SLACK: f64 = 1e-10;

/// Verifies the flow form of `f_Q` along the `P`-flow through `base` by
/// interpolating at `N+1` levels and validating on ten held-out levels.
pub fn flow_form_fit(
    model: &Model,
    params: &HeightParams,
    cp: &Cusp,
    cq: &Cusp,
    base: &ModelPoint,
) -> Result<FlowCoefficients> {
    if cp == cq {
        return Err(SpineError::EqualCusps);
    }
    check(model, cp, base)?;
    check(model, cq, base)?;
    let n = model.weight_count();
    let frame = CuspFrame::new(cp);
    let up = height(params, cp, base);
    // level u as a function of the flow parameter is u = s * up
    let sample = |u: f64| -> f64 {
        let z = frame.flow(base, u / up);
        height(params, cq, &z)
    };
    let g = |u: f64| (u / sample(u)).powi(n as i32);

    // tie level: f_Q / f_P decreases strictly as u grows; the line may
    // stay below the tie, in which case the base level stands in
    let (mut lo, mut hi) = (-60.0f64, 60.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let u = up * mid.exp();
        if sample(u) > u {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let tied = lo > -60.0 && hi < 60.0;
    let u_ref = if tied { up * (0.5 * (lo + hi)).exp() } else { up };

    // fitting window: from where the constant term dominates (or has
    // become negligible) up to where the top coefficient dominates
    let growth = 4f64.powi(n as i32);
    let mut u_hi = u_ref;
    for _ in 0..200 {
        if g(2.0 * u_hi) / g(u_hi) > growth * (1.0 - 1e-3) {
            break;
        }
        u_hi *= 2.0;
    }
    u_hi *= 2.0;
    let mut u_lo = u_ref;
    let g_ref = g(u_ref);
    for _ in 0..40 {
        if g(0.5 * u_lo) / g(u_lo) > 1.0 - 1e-3 || g(u_lo) < 1e-12 * g_ref {
            break;
        }
        u_lo *= 0.5;
    }
    let u_star = u_lo.min(u_ref);

    let nodes: Vec<f64> = (0..=n)
        .map(|j| u_star * (u_hi / u_star).powf(j as f64 / n as f64))
        .collect();
    let scale = |u: f64| (u / u_hi).powi(2);
    let mut a = DMatrix::<f64>::zeros(n + 1, n + 1);
    let mut rhs = DVector::<f64>::zeros(n + 1);
    for (i, &u) in nodes.iter().enumerate() {
        let v = scale(u);
        for k in 0..=n {
            a[(i, k)] = v.powi(k as i32);
        }
        rhs[i] = g(u);
    }
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| SpineError::FitResidualExceeded {
            residual: f64::INFINITY,
            tolerance: FIT_TOLERANCE,
        })?;
    // undo the level scaling: e_k = c_k / u_hi^(2k)
    let e: Vec<f64> = (0..=n).map(|k| sol[k] / u_hi.powi(2 * k as i32)).collect();

    let predict = |u: f64| {
        let s: f64 = e.iter().enumerate().map(|(k, ek)| ek * u.powi(2 * k as i32)).sum();
        u / s.powf(1.0 / n as f64)
    };
    let lo_u = u_star * 0.25;
    let hi_u = u_hi * 4.0;
    let mut residual: f64 = 0.0;
    for j in 0..10 {
        let t = (j as f64 + 0.5) / 10.0;
        let u = lo_u * (hi_u / lo_u).powf(t);
        let actual = sample(u);
        residual = residual.max((predict(u) / actual - 1.0).abs());
    }
    if residual.is_nan() || residual >= FIT_TOLERANCE {
        return Err(SpineError::FitResidualExceeded {
            residual,
            tolerance: FIT_TOLERANCE,
        });
    }
    let coeffs = FlowCoefficients {
        limit_invariant: e[n].powf(-1.0 / n as f64),
        e,
        tie_level: u_ref,
        residual,
    };
    if let Some((k, v)) = coeffs
        .normalized()
        .iter()
        .enumerate()
        .find(|(_, v)| **v < -FIT_NONNEGATIVITY_SLACK)
    {
        return Err(SpineError::CertificateViolated(format!(
            "flow coefficient e_{k} = {v:e} is negative"
        )));
    }
    if coeffs.e[n] <= 0.0 {
        return Err(SpineError::CertificateViolated("top flow coefficient vanishes".into()));
    }
    Ok(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cusp::normalize_cusp;
    use crate::field::{parse_elem, QuadElem};

    fn cusp(s: &str, d: i64) -> Cusp {
        Cusp::parse(s, d).unwrap()
    }

    fn p1() -> HeightParams {
        HeightParams::default()
    }

    #[test]
    fn height_examples() {
        let m = Model::modular();
        let f = height_eval(&m, &p1(), &cusp("inf", 0), &ModelPoint::h2(0.0, 1.0)).unwrap();
        assert_eq!(f, 1.0);
        let f = height_eval(&m, &p1(), &cusp("0", 0), &ModelPoint::h2(0.0, 2.0)).unwrap();
        assert!((f - 0.5).abs() < 1e-15);
        let b = Model::bianchi(-1).unwrap();
        let c = normalize_cusp(&QuadElem::one(-1), &parse_elem("1+i", -1).unwrap()).unwrap();
        let f = height_eval(&b, &p1(), &c, &ModelPoint::h3(0.0, 0.0, 0.5)).unwrap();
        assert!((f - 1.0 / 3.0).abs() < 1e-15);
        let h = Model::hilbert(2).unwrap();
        let f = height_eval(&h, &p1(), &cusp("0", 2), &ModelPoint::hh(0.0, 1.0, 0.0, 1.0)).unwrap();
        assert!((f - 1.0).abs() < 1e-15);
        assert!(matches!(
            height_eval(&m, &p1(), &cusp("0", 2), &ModelPoint::h2(0.0, 1.0)),
            Err(SpineError::FieldMismatch(2, 0))
        ));
    }

    #[test]
    fn act_point_examples() {
        let s = GroupElement::weyl(0);
        let w = act_point(&s, &ModelPoint::h2(0.0, 2.0));
        assert!(w.coord_dist(&ModelPoint::h2(0.0, 0.5)) < 1e-15);
        let t = GroupElement::translation(&QuadElem::one(0));
        let w = act_point(&t, &ModelPoint::h2(0.3, 0.7));
        assert!(w.coord_dist(&ModelPoint::h2(1.3, 0.7)) < 1e-15);
        let z = ModelPoint::h3(0.2, -0.1, 0.9);
        assert_eq!(act_point(&GroupElement::identity(-2), &z), z);
    }

    #[test]
    fn flow_examples() {
        let m = Model::modular();
        let z = geodesic_flow(&m, &cusp("inf", 0), &ModelPoint::h2(0.25, 3.0), 1.0 / 3.0).unwrap();
        assert!(z.coord_dist(&ModelPoint::h2(0.25, 1.0)) < 1e-15);
        let z = geodesic_flow(&m, &cusp("0", 0), &ModelPoint::h2(0.0, 1.0), 2.0).unwrap();
        assert!(z.coord_dist(&ModelPoint::h2(0.0, 0.5)) < 1e-15);
        assert!((height(&p1(), &cusp("0", 0), &z) - 2.0).abs() < 1e-14);
        let base = ModelPoint::h2(0.1, 0.2);
        assert_eq!(geodesic_flow(&m, &cusp("1/3", 0), &base, 1.0).unwrap(), base);
    }

    #[test]
    fn ratio_examples() {
        let m = Model::modular();
        let inf = cusp("inf", 0);
        let r = geodesic_ratio(&m, &inf, &ModelPoint::h2(0.0, 3.0), &ModelPoint::h2(0.0, 1.0)).unwrap();
        assert!((r - 3.0).abs() < 1e-15);
        let z = ModelPoint::h2(0.4, 0.3);
        assert_eq!(geodesic_ratio(&m, &cusp("2/5", 0), &z, &z).unwrap(), 1.0);
        let r = geodesic_ratio(&m, &inf, &ModelPoint::h2(0.0, 1.0), &ModelPoint::h2(0.0, 3.0)).unwrap();
        assert!((r - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_examples() {
        let m = Model::modular();
        let g = riem_gradient(&m, &p1(), &cusp("inf", 0), &ModelPoint::h2(0.0, 1.0)).unwrap();
        assert_eq!(g, vec![0.0, 1.0]);
        let g = riem_gradient(&m, &p1(), &cusp("0", 0), &ModelPoint::h2(0.0, 1.0)).unwrap();
        assert!((g[0]).abs() < 1e-15 && (g[1] + 1.0).abs() < 1e-15);
    }

    fn fd_gradient(params: &HeightParams, c: &Cusp, z: &ModelPoint) -> Vec<f64> {
        let h = 1e-6;
        let base = z.coords();
        let kind = z.kind();
        let scales = z.metric_scales();
        (0..base.len())
            .map(|i| {
                let mut a = base.clone();
                let mut b = base.clone();
                a[i] += h;
                b[i] -= h;
                let fa = height(params, c, &ModelPoint::from_coords(kind, &a).unwrap());
                let fb = height(params, c, &ModelPoint::from_coords(kind, &b).unwrap());
                scales[i] * scales[i] * (fa - fb) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradients_match_central_differences() {
        let cases = [
            (Model::modular(), cusp("2/3", 0), ModelPoint::h2(0.3, 1.7)),
            (Model::modular(), cusp("inf", 0), ModelPoint::h2(0.3, 1.7)),
            (Model::bianchi(-1).unwrap(), cusp("(1+i)/3", -1), ModelPoint::h3(0.2, 0.4, 0.8)),
            (Model::bianchi(-3).unwrap(), cusp("1/(1+sqrt(-3))", -3), ModelPoint::h3(0.1, 0.3, 0.6)),
            (Model::hilbert(2).unwrap(), cusp("1/sqrt(2)", 2), ModelPoint::hh(0.3, 0.9, -0.2, 1.3)),
            (Model::hilbert(5).unwrap(), cusp("2/(1+sqrt(5))", 5), ModelPoint::hh(0.3, 0.9, -0.2, 1.3)),
        ];
        for (m, c, z) in cases {
            let g = riem_gradient(&m, &p1(), &c, &z).unwrap();
            let fd = fd_gradient(&p1(), &c, &z);
            for (a, b) in g.iter().zip(&fd) {
                assert!((a - b).abs() < 1e-6, "{m}: {g:?} vs {fd:?}");
            }
        }
    }

    #[test]
    fn pair_invariant_examples() {
        let m = Model::modular();
        assert_eq!(pair_invariant(&m, &p1(), &cusp("inf", 0), &cusp("0", 0)).unwrap(), 1.0);
        assert_eq!(pair_invariant(&m, &p1(), &cusp("inf", 0), &cusp("1/2", 0)).unwrap(), 0.25);
        let b = Model::bianchi(-1).unwrap();
        let c = normalize_cusp(&QuadElem::one(-1), &parse_elem("1+i", -1).unwrap()).unwrap();
        assert_eq!(pair_invariant(&b, &p1(), &cusp("inf", -1), &c).unwrap(), 0.5);
        assert_eq!(
            pair_invariant(&m, &p1(), &cusp("0", 0), &cusp("0", 0)),
            Err(SpineError::EqualCusps)
        );
    }

    #[test]
    fn flow_form_examples() {
        let m = Model::modular();
        let fit = flow_form_fit(&m, &p1(), &cusp("inf", 0), &cusp("0", 0), &ModelPoint::h2(0.25, 0.7)).unwrap();
        assert!((fit.e[0] - 0.0625).abs() < 1e-9, "{fit:?}");
        assert!((fit.e[1] - 1.0).abs() < 1e-9);
        let h = Model::hilbert(2).unwrap();
        let fit = flow_form_fit(&h, &p1(), &cusp("inf", 2), &cusp("0", 2), &ModelPoint::hh(0.0, 1.0, 0.0, 1.0)).unwrap();
        assert!(fit.e[0].abs() < 1e-9 && fit.e[1].abs() < 1e-9, "{fit:?}");
        assert!((fit.e[2] - 1.0).abs() < 1e-9);
        assert_eq!(
            flow_form_fit(&m, &p1(), &cusp("0", 0), &cusp("0", 0), &ModelPoint::h2(0.0, 1.0)),
            Err(SpineError::EqualCusps)
        );
    }

    #[test]
    fn first_contact_examples() {
        let m = Model::modular();
        let (h, w) = first_contact_pair(&m, &p1(), &cusp("inf", 0), &cusp("0", 0)).unwrap();
        assert!((h - 1.0).abs() < 1e-15);
        assert!(w.coord_dist(&ModelPoint::h2(0.0, 1.0)) < 1e-15);
        let b = Model::bianchi(-1).unwrap();
        let (h, w) = first_contact_pair(&b, &p1(), &cusp("inf", -1), &cusp("0", -1)).unwrap();
        assert!((h - 1.0).abs() < 1e-15);
        assert!(w.coord_dist(&ModelPoint::h3(0.0, 0.0, 1.0)) < 1e-15);
        for q in 1..6 {
            let c = Cusp::parse(&format!("1/{q}"), 0).unwrap();
            let (h, w) = first_contact_pair(&m, &p1(), &cusp("inf", 0), &c).unwrap();
            assert!((h - 1.0 / q as f64).abs() < 1e-15);
            let g1 = gradient(&p1(), &cusp("inf", 0), &w);
            let g2 = gradient(&p1(), &c, &w);
            assert!(g1.iter().zip(&g2).all(|(a, b)| (a + b).abs() < 1e-9));
        }
    }
}
