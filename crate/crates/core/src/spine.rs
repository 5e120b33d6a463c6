//! Active sets, the retraction onto the spine, first-contact certificates,
//! the Newton tie solver and separatedness diagnostics.

use nalgebra::{DMatrix, DVector};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::cusp::Cusp;
use crate::error::{Result, SpineError};
use crate::heights::{
    gradient, height, log_differential, pair_invariant, scan_cusps, CuspFrame, HeightParams, Model, ModelPoint,
};
use crate::linalg;

pub const DEFAULT_TIE_TOL: f64 = 1e-9;
pub const NEWTON_MAX_ITER: usize = 100;
/// Flow levels below this are treated as an exhausted search.
pub const MU_FLOOR: f64 = 1e-12;
pub const FIRST_CONTACT_TOL: f64 = 1e-8;
pub const SEPARATION_SLACK: f64 = 1e-10;
const ON_TIE_TOL: f64 = 1e-8;

/// Cusps whose heights agree at a witness point.
#[derive(Clone, Debug, PartialEq)]
pub struct TieSet {
    /// Sorted by the cusp order.
    pub cusps: Vec<Cusp>,
    pub witness: ModelPoint,
    pub height: f64,
    /// `max |f_c(witness) / height - 1|` over the cusps.
    pub residual: f64,
}

impl TieSet {
    /// Tie set of the given cusps at `z`, with height the largest of their
    /// heights.
    pub fn at_point(params: &HeightParams, cusps: &[Cusp], z: &ModelPoint) -> TieSet {
        let mut cusps = cusps.to_vec();
        cusps.sort();
        cusps.dedup();
        let hs: Vec<f64> = cusps.iter().map(|c| height(params, c, z)).collect();
        let top = hs.iter().cloned().fold(f64::MIN, f64::max);
        let residual = hs.iter().map(|h| (h / top - 1.0).abs()).fold(0.0, f64::max);
        TieSet {
            cusps,
            witness: *z,
            height: top,
            residual,
        }
    }

    pub fn order(&self) -> usize {
        self.cusps.len()
    }

    pub fn contains(&self, c: &Cusp) -> bool {
        self.cusps.binary_search(c).is_ok()
    }

    pub fn cusp_strings(&self) -> Vec<String> {
        self.cusps.iter().map(|c| c.to_string()).collect()
    }
}

impl Serialize for TieSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("TieSet", 4)?;
        st.serialize_field("cusps", &self.cusp_strings())?;
        st.serialize_field("witness", &self.witness)?;
        st.serialize_field("height", &self.height)?;
        st.serialize_field("residual", &self.residual)?;
        st.end()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RetractionResult {
    pub point: ModelPoint,
    pub mu: f64,
    pub dominant: Cusp,
    pub active: TieSet,
}

impl Serialize for RetractionResult {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("RetractionResult", 4)?;
        st.serialize_field("point", &self.point)?;
        st.serialize_field("mu", &self.mu)?;
        st.serialize_field("dominant", &self.dominant.to_string())?;
        st.serialize_field("active", &self.active)?;
        st.end()
    }
}

/// All cusps within relative `tol` of the maximal height at `z`, highest
/// first.
pub fn ranked_cusps(model: &Model, params: &HeightParams, z: &ModelPoint, tol: f64) -> Vec<(Cusp, f64)> {
    let d = model.d();
    let lower = height(params, &Cusp::infinity(d), z).max(height(params, &Cusp::zero(d), z));
    let keep = 1.0 - tol;
    let mut theta = params.max_lambda().max(lower);
    loop {
        let floor = lower * keep;
        let at = theta.max(floor);
        let found = scan_cusps(model, params, z, at);
        if let Some((_, top)) = found.first() {
            let cut = top * keep;
            if cut >= at || at <= floor {
                return found.into_iter().filter(|(_, f)| *f >= cut).collect();
            }
            theta = cut;
        } else {
            theta = (theta * 0.5).max(floor);
        }
    }
}

/// The active set `M(z)`: every cusp whose height is within relative `tol`
/// of the maximum.
pub fn active_set(model: &Model, params: &HeightParams, z: &ModelPoint, tol: f64) -> TieSet {
    let ranked = ranked_cusps(model, params, z, tol);
    let cusps: Vec<Cusp> = ranked.iter().map(|(c, _)| c.clone()).collect();
    TieSet::at_point(params, &cusps, z)
}

/// Highest cusp other than `p` whose height at `z` is at least `level`.
fn challenger(model: &Model, params: &HeightParams, z: &ModelPoint, p: &Cusp, level: f64) -> Option<(Cusp, f64)> {
    scan_cusps(model, params, z, level).into_iter().find(|(c, _)| c != p)
}

/// Largest flow level `s <= 1` toward the dominant cusp at which another
/// cusp ties it, together with that cusp.
pub fn mu_level(model: &Model, params: &HeightParams, z: &ModelPoint, tol: f64) -> Result<(f64, Cusp)> {
    z.validate()?;
    let ranked = ranked_cusps(model, params, z, tol);
    if ranked.len() >= 2 {
        return Ok((1.0, ranked[1].0.clone()));
    }
    let (p, fp) = ranked[0].clone();
    let frame = CuspFrame::new(&p);
    let probe = |s: f64| challenger(model, params, &frame.flow(z, s), &p, fp * s);
    let mut hi = 1.0f64;
    let mut lo = 0.5f64;
    while probe(lo).is_none() {
        hi = lo;
        lo *= 0.5;
        if lo < MU_FLOOR {
            return Err(SpineError::NoSecondCusp(lo));
        }
    }
    for _ in 0..200 {
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if probe(mid).is_some() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (second, _) = probe(lo).expect("tied side of the bracket");
    Ok((lo, second))
}

/// `r_t(z)`: flows `z` toward its dominant cusp by `(1 - t) + t mu(z)`.
pub fn retract_map(model: &Model, params: &HeightParams, z: &ModelPoint, t: f64, tol: f64) -> Result<RetractionResult> {
    if !(0.0..=1.0).contains(&t) {
        return Err(SpineError::PreconditionViolated(format!("t = {t} outside [0, 1]")));
    }
    if z.kind() != model.kind {
        return Err(SpineError::InvalidPoint("point is not in the model".into()));
    }
    z.validate()?;
    let ranked = ranked_cusps(model, params, z, tol);
    let dominant = ranked[0].0.clone();
    let (mu, _) = mu_level(model, params, z, tol)?;
    let s = (1.0 - t) + t * mu;
    let point = if mu == 1.0 || t == 0.0 {
        *z
    } else {
        CuspFrame::new(&dominant).flow(z, s)
    };
    let active = active_set(model, params, &point, tol);
    Ok(RetractionResult {
        point,
        mu,
        dominant,
        active,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FirstContactReport {
    pub first_contact: bool,
    /// `grad f_1 + grad f_2` at the point.
    pub defect: Vec<f64>,
    /// Metric norm of the defect relative to `|grad f_1|`.
    pub relative_defect: f64,
    pub height: f64,
    /// `sqrt(rho)`, the first-contact height of the pair.
    pub contact_height: f64,
    pub height_certificate: bool,
    pub certificates_agree: bool,
}

/// Gradient certificate `grad f_1 = -grad f_2` for a point on the pair's
/// tie set, compared against the height certificate `f = sqrt(rho)`.
pub fn first_contact_check(
    model: &Model,
    params: &HeightParams,
    z: &ModelPoint,
    c1: &Cusp,
    c2: &Cusp,
) -> Result<FirstContactReport> {
    let rho = pair_invariant(model, params, c1, c2)?;
    let f1 = crate::heights::height_eval(model, params, c1, z)?;
    let f2 = height(params, c2, z);
    let gap = (f1 - f2).abs() / f1.max(f2);
    if gap > ON_TIE_TOL {
        return Err(SpineError::NotOnTieSet(gap));
    }
    let g1 = gradient(params, c1, z);
    let g2 = gradient(params, c2, z);
    let defect: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a + b).collect();
    let relative_defect = z.norm(&defect) / z.norm(&g1);
    let first_contact = relative_defect <= FIRST_CONTACT_TOL;
    let contact_height = rho.sqrt();
    let height_certificate = (f1 - contact_height).abs() <= FIRST_CONTACT_TOL * contact_height;
    Ok(FirstContactReport {
        first_contact,
        defect,
        relative_defect,
        height: f1,
        contact_height,
        height_certificate,
        certificates_agree: first_contact == height_certificate,
    })
}

/// Log-height residuals `log f_0 - log f_i` and their Jacobian in the
/// orthonormal frame at `z`.
fn log_system(params: &HeightParams, cusps: &[Cusp], z: &ModelPoint) -> (DVector<f64>, DMatrix<f64>) {
    let scales = z.metric_scales();
    let n = scales.len();
    let (f0, g0) = log_differential(params, &cusps[0], z);
    let k = cusps.len() - 1;
    let mut r = DVector::zeros(k);
    let mut j = DMatrix::zeros(k, n);
    for (i, c) in cusps[1..].iter().enumerate() {
        let (f, g) = log_differential(params, c, z);
        r[i] = f0.ln() - f.ln();
        for a in 0..n {
            j[(i, a)] = (g0[a] - g[a]) * scales[a];
        }
    }
    (r, j)
}

/// Damped least-squares Newton iteration onto the tie locus of `cusps`,
/// ignoring every other cusp. Returns the point and its relative residual.
pub fn newton_tie(params: &HeightParams, cusps: &[Cusp], seed: &ModelPoint) -> (ModelPoint, f64) {
    let kind = seed.kind();
    let mut z = *seed;
    let (mut r, mut j) = log_system(params, cusps, &z);
    let mut rn = r.amax();
    for _ in 0..NEWTON_MAX_ITER {
        if rn < 1e-15 {
            break;
        }
        let step = linalg::lstsq(&j, &(-&r));
        let scales = z.metric_scales();
        let base = z.coords();
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = base
                .iter()
                .zip(step.iter().zip(&scales))
                .map(|(x, (d, s))| x + alpha * d * s)
                .collect();
            if let Ok(zn) = ModelPoint::from_coords(kind, &trial) {
                let (rt, jt) = log_system(params, cusps, &zn);
                let tn = rt.amax();
                if tn.is_finite() && tn < rn {
                    z = zn;
                    r = rt;
                    j = jt;
                    rn = tn;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let ts = TieSet::at_point(params, cusps, &z);
    (z, ts.residual)
}

/// Solves for a point where all `cusps` tie and checks that no other cusp
/// is higher there. Cusps that tie as well are added to the result.
pub fn solve_tie(
    model: &Model,
    params: &HeightParams,
    cusps: &[Cusp],
    seed: &ModelPoint,
    tol: f64,
) -> Result<TieSet> {
    if cusps.len() < 2 {
        return Err(SpineError::PreconditionViolated("a tie needs at least two cusps".into()));
    }
    for c in cusps {
        if c.d() != model.d() {
            return Err(SpineError::FieldMismatch(c.d(), model.d()));
        }
    }
    if seed.kind() != model.kind {
        return Err(SpineError::InvalidPoint("seed is not a point of the model".into()));
    }
    seed.validate()?;
    let mut sorted = cusps.to_vec();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != cusps.len() {
        return Err(SpineError::EqualCusps);
    }
    let (z, residual) = newton_tie(params, &sorted, seed);
    if !residual.is_finite() || residual >= tol {
        return Err(SpineError::NewtonDiverged(residual));
    }
    certify_maximal(model, params, &sorted, &z, tol.max(DEFAULT_TIE_TOL))
}

/// Checks the maximality side-condition at a tie point and enlarges the
/// set by every outside cusp tied within `tol`.
pub fn certify_maximal(
    model: &Model,
    params: &HeightParams,
    cusps: &[Cusp],
    z: &ModelPoint,
    tol: f64,
) -> Result<TieSet> {
    let ts = TieSet::at_point(params, cusps, z);
    let mut all = ts.cusps.clone();
    for (c, f) in scan_cusps(model, params, z, ts.height * (1.0 - tol)) {
        if ts.contains(&c) {
            continue;
        }
        if f > ts.height * (1.0 + tol) {
            return Err(SpineError::DominatedTie {
                cusp: c.to_string(),
                height: ts.height,
                other: f,
            });
        }
        all.push(c);
    }
    Ok(TieSet::at_point(params, &all, z))
}

/// Riemannian gradient differences `grad f_0 - grad f_i` in the
/// orthonormal frame at the witness.
pub fn tie_jacobian(params: &HeightParams, cusps: &[Cusp], z: &ModelPoint) -> DMatrix<f64> {
    let scales = z.metric_scales();
    let g0 = gradient(params, &cusps[0], z);
    let rows: Vec<Vec<f64>> = cusps[1..]
        .iter()
        .map(|c| {
            let g = gradient(params, c, z);
            g0.iter().zip(&g).zip(&scales).map(|((a, b), s)| (a - b) / s).collect()
        })
        .collect();
    linalg::from_rows(&rows, scales.len())
}

/// Dimension of the tie locus at the witness: model dimension minus the
/// numerical rank of the gradient differences.
pub fn tie_locus_dim(model: &Model, params: &HeightParams, ts: &TieSet) -> Result<usize> {
    if !(ts.residual < 1e-8) {
        return Err(SpineError::ResidualTooLarge(ts.residual));
    }
    if ts.order() < 2 {
        return Ok(model.dim());
    }
    let j = tie_jacobian(params, &ts.cusps, &ts.witness);
    Ok(model.dim() - linalg::rank(&j))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationEntry {
    pub pair: [String; 2],
    pub sample: usize,
    pub inner_product: f64,
    pub verdict: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparationVerdict {
    Empty,
    StrictlySeparated,
    Separated,
    Violated,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationReport {
    pub entries: Vec<SeparationEntry>,
    /// Sample indices left out, with the reason.
    pub skipped: Vec<(usize, String)>,
    pub verdict: SeparationVerdict,
}

/// Samples `<grad f_P, grad f_Q>` over pairs of `cusps` at points of
/// `D(cusps)`. A diagnostic, not a proof.
pub fn separation_report(
    model: &Model,
    params: &HeightParams,
    cusps: &[Cusp],
    samples: &[ModelPoint],
) -> SeparationReport {
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for (i, z) in samples.iter().enumerate() {
        if z.kind() != model.kind || z.validate().is_err() {
            skipped.push((i, "not a point of the model".to_string()));
            continue;
        }
        let ts = TieSet::at_point(params, cusps, z);
        if ts.residual > ON_TIE_TOL {
            skipped.push((i, format!("not on the tie set (gap {:e})", ts.residual)));
            continue;
        }
        if let Err(e) = certify_maximal(model, params, cusps, z, ON_TIE_TOL) {
            skipped.push((i, format!("outside D: {e}")));
            continue;
        }
        let grads: Vec<Vec<f64>> = ts.cusps.iter().map(|c| gradient(params, c, z)).collect();
        for a in 0..ts.cusps.len() {
            for b in a + 1..ts.cusps.len() {
                let ip = z.inner(&grads[a], &grads[b]);
                let verdict = if ip < -SEPARATION_SLACK {
                    "strict"
                } else if ip <= SEPARATION_SLACK {
                    "separated"
                } else {
                    "violated"
                };
                entries.push(SeparationEntry {
                    pair: [ts.cusps[a].to_string(), ts.cusps[b].to_string()],
                    sample: i,
                    inner_product: ip,
                    verdict: verdict.to_string(),
                });
            }
        }
    }
    let verdict = if entries.is_empty() {
        SeparationVerdict::Empty
    } else if entries.iter().any(|e| e.verdict == "violated") {
        SeparationVerdict::Violated
    } else if entries.iter().all(|e| e.verdict == "strict") {
        SeparationVerdict::StrictlySeparated
    } else {
        SeparationVerdict::Separated
    };
    SeparationReport {
        entries,
        skipped,
        verdict,
    }
}
