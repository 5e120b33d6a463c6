//! Local geometry of tie loci: entering a smaller tie set from a point of
//! a larger one, and predictor-corrector walks along a locus until some
//! outside cusp catches up.
//!
//! Tangent vectors are expressed in the orthonormal frame of the point.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cusp::Cusp;
use crate::heights::{height, log_differential, relevant_cusps, HeightParams, Model, ModelPoint};
use crate::linalg;
use crate::spine::{active_set, newton_tie, tie_jacobian, tie_locus_dim, TieSet};

/// Corrector residual accepted along a walk.
const WALK_RESIDUAL: f64 = 1e-12;
/// Distance after which the candidate pool is rebuilt.
const POOL_RADIUS: f64 = 0.25;
const MAX_WALK_LENGTH: f64 = 60.0;
const MAX_WALK_STEPS: usize = 20_000;
/// Relative singular value below which a direction counts as nearly tangent.
const NEAR_NULL: f64 = 1e-3;

pub(crate) struct Ctx<'a> {
    pub model: &'a Model,
    pub params: &'a HeightParams,
    pub tol: f64,
}

/// Orthonormal basis of the tangent space of the tie locus, as columns.
pub(crate) fn tangent_basis(params: &HeightParams, cusps: &[Cusp], z: &ModelPoint) -> DMatrix<f64> {
    let n = z.coords().len();
    if cusps.len() < 2 {
        return DMatrix::identity(n, n);
    }
    linalg::null_space(&tie_jacobian(params, cusps, z))
}

/// Singular vectors whose singular value is small relative to the largest.
fn near_tangent_basis(params: &HeightParams, cusps: &[Cusp], z: &ModelPoint, rel: f64) -> DMatrix<f64> {
    let n = z.coords().len();
    if cusps.len() < 2 {
        return DMatrix::identity(n, n);
    }
    let (sigma, v) = linalg::full_svd(&tie_jacobian(params, cusps, z));
    let top = sigma[0].max(f64::MIN_POSITIVE);
    let keep = sigma.iter().filter(|s| **s > rel * top).count();
    v.columns(keep, n - keep).into_owned()
}

/// Smallest nonzero relative singular value of the tie Jacobian.
pub(crate) fn conditioning(params: &HeightParams, cusps: &[Cusp], z: &ModelPoint, expected_rank: usize) -> f64 {
    if expected_rank == 0 {
        return 1.0;
    }
    let (sigma, _) = linalg::full_svd(&tie_jacobian(params, cusps, z));
    sigma[expected_rank - 1] / sigma[0]
}

/// Derivatives of `log f_c - log f_base` along the orthonormal frame.
fn log_gap_rows(params: &HeightParams, base: &Cusp, others: &[Cusp], z: &ModelPoint) -> Vec<Vec<f64>> {
    let scales = z.metric_scales();
    let (_, g0) = log_differential(params, base, z);
    others
        .iter()
        .map(|c| {
            let (_, g) = log_differential(params, c, z);
            g.iter().zip(&g0).zip(&scales).map(|((a, b), s)| s * (a - b)).collect()
        })
        .collect()
}

fn unit(v: &DVector<f64>) -> Option<DVector<f64>> {
    let n = v.norm();
    (n > 1e-300).then(|| v / n)
}

/// A tangent direction of the locus of `inner` along which every cusp of
/// `outer` drops below the tie to first order. Returns the direction and
/// its worst normalized rate.
pub(crate) fn descent_direction(
    params: &HeightParams,
    inner: &[Cusp],
    outer: &[Cusp],
    z: &ModelPoint,
) -> Option<(Vec<f64>, f64)> {
    let basis = tangent_basis(params, inner, z);
    let k = basis.ncols();
    if k == 0 {
        return None;
    }
    let rows = log_gap_rows(params, &inner[0], outer, z);
    let mut r = DMatrix::<f64>::zeros(rows.len(), k);
    for (i, row) in rows.iter().enumerate() {
        let g = DVector::from_row_slice(row);
        let proj = basis.transpose() * g;
        let n = proj.norm();
        if n < 1e-12 {
            return None;
        }
        r.set_row(i, &(proj / n).transpose());
    }
    let worst = |w: &DVector<f64>| (&r * w).max();
    let mut best: Option<(DVector<f64>, f64)> = None;
    let offer = |best: &mut Option<(DVector<f64>, f64)>, w: DVector<f64>| {
        if let Some(w) = unit(&w) {
            let m = worst(&w);
            if best.as_ref().is_none_or(|(_, b)| m < *b) {
                *best = Some((w, m));
            }
        }
    };
    if k == 1 {
        offer(&mut best, DVector::from_element(1, 1.0));
        offer(&mut best, DVector::from_element(1, -1.0));
    } else {
        let rhs = DVector::from_element(r.nrows(), -1.0);
        offer(&mut best, linalg::lstsq(&r, &rhs));
        if best.as_ref().is_none_or(|(_, m)| *m >= -1e-6) {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
            for _ in 0..4000 {
                offer(&mut best, DVector::from_fn(k, |_, _| rng.gen_range(-1.0..1.0)));
            }
            // hill climbing from the best sample
            let mut step = 0.2;
            for _ in 0..400 {
                let (w, _) = best.clone().expect("sampled");
                offer(&mut best, &w + DVector::from_fn(k, |_, _| step * rng.gen_range(-1.0..1.0)));
                step *= 0.99;
            }
        }
    }
    let (w, m) = best?;
    if m >= -1e-7 {
        return None;
    }
    Some(((basis * w).iter().cloned().collect(), m))
}

/// Steps from `z` (a point where `outer` ties with `inner`) into the
/// locus where exactly `inner` is maximal. Returns the resulting tie set.
pub(crate) fn enter(ctx: &Ctx<'_>, inner: &[Cusp], outer: &[Cusp], z: &ModelPoint) -> Option<TieSet> {
    let (v, _) = descent_direction(ctx.params, inner, outer, z)?;
    let mut want = inner.to_vec();
    want.sort();
    for h in [1e-4, 3e-4, 3e-5, 1e-3] {
        let Some(zp) = z.offset(&v, h) else { continue };
        let (zn, res) = if inner.len() >= 2 {
            newton_tie(ctx.params, inner, &zp)
        } else {
            (zp, 0.0)
        };
        if res >= WALK_RESIDUAL || z.hyp_dist(&zn) > 3.0 * h {
            continue;
        }
        let act = active_set(ctx.model, ctx.params, &zn, ctx.tol);
        if act.cusps == want {
            return Some(act);
        }
    }
    None
}

/// Cusps that can reach the tie level near a centre point.
struct Pool {
    center: ModelPoint,
    cusps: Vec<Cusp>,
}

impl Pool {
    fn new(ctx: &Ctx<'_>, tie: &[Cusp], z: &ModelPoint) -> Pool {
        let level = height(ctx.params, &tie[0], z);
        let theta = level * (-2.0 * POOL_RADIUS).exp() * (1.0 - 1e-9);
        let cusps = relevant_cusps(ctx.model, ctx.params, z, theta)
            .into_iter()
            .filter(|c| !tie.contains(c))
            .collect();
        Pool { center: *z, cusps }
    }

    /// The outside cusp with the largest height ratio to the tie, if
    /// it is above the tie.
    fn overtaker(&self, params: &HeightParams, tie: &[Cusp], z: &ModelPoint) -> Option<(Cusp, f64)> {
        let level = height(params, &tie[0], z);
        self.cusps
            .iter()
            .map(|c| (c, height(params, c, z) / level))
            .filter(|(_, r)| *r > 1.0)
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(c, r)| (c.clone(), r))
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Walk {
    /// Tie set where the walk stopped, if an outside cusp caught up.
    pub end: Option<TieSet>,
    pub path: Vec<ModelPoint>,
    /// Point of worst conditioning along the way, with its relative
    /// singular value.
    pub pinch: Option<(ModelPoint, Vec<f64>, f64)>,
}

/// Walks from `start` along the locus of `tie`, initially in direction
/// `v`, keeping the direction as straight as the locus allows.
pub(crate) fn walk(ctx: &Ctx<'_>, tie: &[Cusp], start: &ModelPoint, v: &[f64]) -> Walk {
    let rank = tie.len().saturating_sub(1);
    let mut z = *start;
    let mut dir = DVector::from_row_slice(v);
    let mut path = vec![z];
    let mut pool = Pool::new(ctx, tie, &z);
    let mut h = 0.02;
    let mut length = 0.0;
    let mut pinch: Option<(ModelPoint, Vec<f64>, f64)> = None;
    let project = |zp: &ModelPoint| {
        if tie.len() >= 2 {
            newton_tie(ctx.params, tie, zp)
        } else {
            (*zp, 0.0)
        }
    };
    for _ in 0..MAX_WALK_STEPS {
        if length > MAX_WALK_LENGTH {
            break;
        }
        let d: Vec<f64> = dir.iter().cloned().collect();
        let Some(zp) = z.offset(&d, h) else {
            h *= 0.5;
            continue;
        };
        let (zn, res) = project(&zp);
        let moved = z.hyp_dist(&zn);
        if res >= WALK_RESIDUAL || moved > 2.0 * h || moved < 0.3 * h {
            h *= 0.5;
            if h < 1e-9 {
                break;
            }
            continue;
        }
        let nb = near_tangent_basis(ctx.params, tie, &zn, NEAR_NULL);
        let proj = &nb * (nb.transpose() * &dir);
        let Some(next) = unit(&proj).filter(|_| proj.norm() > 0.5) else {
            h *= 0.5;
            if h < 1e-9 {
                break;
            }
            continue;
        };
        if pool.center.hyp_dist(&zn) > POOL_RADIUS {
            pool = Pool::new(ctx, tie, &zn);
        }
        if pool.overtaker(ctx.params, tie, &zn).is_some() {
            let end = close_in(ctx, tie, &pool, &z, &d, h);
            if let Some(e) = &end {
                path.push(e.witness);
            }
            return Walk { end, path, pinch };
        }
        let cond = conditioning(ctx.params, tie, &zn, rank);
        if cond < 0.05 && pinch.as_ref().is_none_or(|(_, _, c)| cond < *c) {
            pinch = Some((zn, next.iter().cloned().collect(), cond));
        }
        length += moved;
        z = zn;
        dir = next;
        path.push(z);
        h = (h * 1.5).min(0.05);
    }
    Walk { end: None, path, pinch }
}

/// Bisects the last step for the first point where an outside cusp
/// reaches the tie, then solves for the enlarged tie there.
fn close_in(ctx: &Ctx<'_>, tie: &[Cusp], pool: &Pool, z: &ModelPoint, d: &[f64], h: f64) -> Option<TieSet> {
    let at = |s: f64| -> Option<ModelPoint> {
        let zp = z.offset(d, s)?;
        if tie.len() >= 2 {
            let (zn, res) = newton_tie(ctx.params, tie, &zp);
            (res < WALK_RESIDUAL).then_some(zn)
        } else {
            Some(zp)
        }
    };
    let (mut lo, mut hi) = (0.0, h);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let zm = at(mid)?;
        if pool.overtaker(ctx.params, tie, &zm).is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let zh = at(hi)?;
    let (c, _) = pool.overtaker(ctx.params, tie, &zh)?;
    let mut bigger = tie.to_vec();
    bigger.push(c);
    let (zt, res) = newton_tie(ctx.params, &bigger, &zh);
    if res >= WALK_RESIDUAL || zt.hyp_dist(&zh) > 1e-3 {
        return None;
    }
    let act = active_set(ctx.model, ctx.params, &zt, ctx.tol);
    bigger.iter().all(|c| act.contains(c)).then_some(act)
}

/// Both ends of a one-dimensional locus through `ts.witness`.
pub(crate) fn edge_walks(ctx: &Ctx<'_>, ts: &TieSet) -> Vec<Walk> {
    let basis = tangent_basis(ctx.params, &ts.cusps, &ts.witness);
    if basis.ncols() != 1 {
        return Vec::new();
    }
    let v: Vec<f64> = basis.column(0).iter().cloned().collect();
    let back: Vec<f64> = v.iter().map(|x| -x).collect();
    vec![walk(ctx, &ts.cusps, &ts.witness, &v), walk(ctx, &ts.cusps, &ts.witness, &back)]
}

/// Two branches of a one-dimensional locus crossing at one point.
#[derive(Clone, Debug)]
pub struct Crossing {
    pub point: ModelPoint,
    /// Unit tangents of the two branches, orthonormal frame.
    pub branches: [Vec<f64>; 2],
    /// Angle between the branches, in `(0, pi/2]`.
    pub angle: f64,
    /// Relative smallest nonzero singular value at the crossing.
    pub conditioning: f64,
}

/// Relative size of the Newton correction after stepping `h` along `v`.
fn correction(params: &HeightParams, tie: &[Cusp], z: &ModelPoint, v: &[f64], h: f64) -> f64 {
    match z.offset(v, h) {
        Some(zp) => {
            let (zn, res) = newton_tie(params, tie, &zp);
            if res < WALK_RESIDUAL {
                zp.hyp_dist(&zn) / h
            } else {
                f64::INFINITY
            }
        }
        None => f64::INFINITY,
    }
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Locates a transverse self-crossing of the one-dimensional locus of
/// `ts` by walking from its witness, and recovers both branches.
pub fn locate_crossing(model: &Model, params: &HeightParams, ts: &TieSet, tol: f64) -> Option<Crossing> {
    let ctx = Ctx { model, params, tol };
    let rank = ts.order() - 1;
    let mut best: Option<(ModelPoint, Vec<f64>, f64)> = None;
    for w in edge_walks(&ctx, ts) {
        if let Some(p) = w.pinch {
            if best.as_ref().is_none_or(|b| p.2 < b.2) {
                best = Some(p);
            }
        }
    }
    let (z0, v0, _) = best?;
    // refine along the branch
    let along = |s: f64| -> (ModelPoint, f64) {
        let zp = z0.offset(&v0, s).unwrap_or(z0);
        let (zn, _) = newton_tie(params, &ts.cusps, &zp);
        (zn, conditioning(params, &ts.cusps, &zn, rank))
    };
    let s = golden_min(|s| along(s).1, -0.05, 0.05, 80);
    let (x, cond) = along(s);
    // two-dimensional near-null plane at the crossing
    let (sigma, vmat) = linalg::full_svd(&tie_jacobian(params, &ts.cusps, &x));
    let n = sigma.len();
    if rank < 1 || n < rank + 1 {
        return None;
    }
    let a: Vec<f64> = vmat.column(rank - 1).iter().cloned().collect();
    let b: Vec<f64> = vmat.column(rank).iter().cloned().collect();
    let dir = |phi: f64| -> Vec<f64> { a.iter().zip(&b).map(|(p, q)| phi.cos() * p + phi.sin() * q).collect() };
    let h = 1e-3;
    let score = |phi: f64| correction(params, &ts.cusps, &x, &dir(phi), h);
    let samples: Vec<(f64, f64)> = (0..180)
        .map(|i| {
            let phi = i as f64 * std::f64::consts::PI / 180.0;
            (phi, score(phi))
        })
        .collect();
    // local minima on the circle of directions modulo sign
    let mut minima: Vec<(f64, f64)> = Vec::new();
    for i in 0..samples.len() {
        let prev = samples[(i + samples.len() - 1) % samples.len()].1;
        let next = samples[(i + 1) % samples.len()].1;
        if samples[i].1 <= prev && samples[i].1 <= next {
            let step = std::f64::consts::PI / 180.0;
            let phi = golden_min(&score, samples[i].0 - step, samples[i].0 + step, 40);
            minima.push((phi, score(phi)));
        }
    }
    minima.sort_by(|p, q| p.1.total_cmp(&q.1));
    if minima.len() < 2 {
        return None;
    }
    let (p1, p2) = (minima[0].0, minima[1].0);
    let mut angle = (p1 - p2).rem_euclid(std::f64::consts::PI);
    if angle > std::f64::consts::FRAC_PI_2 {
        angle = std::f64::consts::PI - angle;
    }
    // both branches must carry a genuine locus, not just a shallow dip
    for phi in [p1, p2] {
        if correction(params, &ts.cusps, &x, &dir(phi), 1e-2) > 0.05 {
            return None;
        }
    }
    Some(Crossing {
        point: x,
        branches: [dir(p1), dir(p2)],
        angle,
        conditioning: cond,
    })
}

/// Tie sets whose loci have the locus of `ts` in their closure and meet
/// it at its witness.
pub(crate) fn star(ctx: &Ctx<'_>, ts: &TieSet) -> Vec<TieSet> {
    let n = ts.order();
    let mut out = Vec::new();
    if n > 12 {
        return out;
    }
    for mask in 1u32..(1 << n) - 1 {
        if mask.count_ones() < 2 {
            continue;
        }
        let (inner, outer): (Vec<_>, Vec<_>) = (0..n).partition(|i| mask & (1 << i) != 0);
        let inner: Vec<Cusp> = inner.into_iter().map(|i| ts.cusps[i].clone()).collect();
        let outer: Vec<Cusp> = outer.into_iter().map(|i| ts.cusps[i].clone()).collect();
        if let Some(t) = enter(ctx, &inner, &outer, &ts.witness) {
            out.push(t);
        }
    }
    out
}

/// Tie sets met by walking straight from the witness along each tangent
/// axis in both directions.
pub(crate) fn probe(ctx: &Ctx<'_>, ts: &TieSet) -> Vec<TieSet> {
    let basis = tangent_basis(ctx.params, &ts.cusps, &ts.witness);
    let mut out: Vec<TieSet> = Vec::new();
    for j in 0..basis.ncols() {
        for sign in [1.0, -1.0] {
            let v: Vec<f64> = basis.column(j).iter().map(|x| sign * x).collect();
            if let Some(end) = walk(ctx, &ts.cusps, &ts.witness, &v).end {
                if !out.iter().any(|o| o.cusps == end.cusps) {
                    out.push(end);
                }
            }
        }
    }
    out
}

/// Whether the locus of `lower` (a subset of `upper.cusps`) has the point
/// `upper.witness` in its closure.
pub(crate) fn in_closure(ctx: &Ctx<'_>, lower: &[Cusp], upper: &TieSet) -> bool {
    let outer: Vec<Cusp> = upper.cusps.iter().filter(|c| !lower.contains(c)).cloned().collect();
    if outer.is_empty() {
        return false;
    }
    enter(ctx, lower, &outer, &upper.witness).is_some()
}

/// Boundary of a compact two-dimensional cell found by walking.
#[derive(Clone, Debug, Default)]
pub(crate) struct FaceBoundary {
    pub vertices: Vec<TieSet>,
    /// Edge tie sets with the indices of their end vertices.
    pub edges: Vec<(TieSet, Vec<usize>, Vec<ModelPoint>)>,
}

fn locus_dim(ctx: &Ctx<'_>, ts: &TieSet) -> Option<usize> {
    tie_locus_dim(ctx.model, ctx.params, ts).ok()
}

/// Finds the vertices and edges of the two-dimensional locus of `face` by
/// a breadth-first search over its vertices.
pub(crate) fn face_boundary(ctx: &Ctx<'_>, face: &TieSet, max_vertices: usize) -> FaceBoundary {
    let mut fb = FaceBoundary::default();
    let mut queue: Vec<usize> = Vec::new();
    let add_vertex = |fb: &mut FaceBoundary, queue: &mut Vec<usize>, v: TieSet| -> usize {
        if let Some(i) = fb.vertices.iter().position(|w| w.cusps == v.cusps) {
            return i;
        }
        fb.vertices.push(v);
        queue.push(fb.vertices.len() - 1);
        fb.vertices.len() - 1
    };
    let mut walked: Vec<Vec<Cusp>> = Vec::new();
    let follow_edge = |fb: &mut FaceBoundary, queue: &mut Vec<usize>, walked: &mut Vec<Vec<Cusp>>, e: TieSet| {
        if walked.contains(&e.cusps) {
            return;
        }
        walked.push(e.cusps.clone());
        let walks = edge_walks(ctx, &e);
        let mut ends = Vec::new();
        let mut path: Vec<ModelPoint> = Vec::new();
        for (k, w) in walks.into_iter().enumerate() {
            if k == 0 {
                path.extend(w.path.iter().rev());
            } else {
                path.extend(w.path.iter().skip(1));
            }
            if let Some(v) = w.end {
                if locus_dim(ctx, &v) == Some(0) {
                    ends.push(add_vertex(fb, queue, v));
                }
            }
        }
        fb.edges.push((e, ends, path));
    };

    // first contact with the boundary
    let basis = tangent_basis(ctx.params, &face.cusps, &face.witness);
    if basis.ncols() == 0 {
        return fb;
    }
    let v: Vec<f64> = basis.column(0).iter().cloned().collect();
    let first = walk(ctx, &face.cusps, &face.witness, &v);
    let Some(hit) = first.end else { return fb };
    match locus_dim(ctx, &hit) {
        Some(0) => {
            add_vertex(&mut fb, &mut queue, hit);
        }
        Some(1) => follow_edge(&mut fb, &mut queue, &mut walked, hit),
        _ => return fb,
    }

    while let Some(i) = queue.pop() {
        if fb.vertices.len() > max_vertices {
            break;
        }
        let vtx = fb.vertices[i].clone();
        let extra: Vec<Cusp> = vtx.cusps.iter().filter(|c| !face.contains(c)).cloned().collect();
        let m = extra.len();
        if m > 12 || !face.cusps.iter().all(|c| vtx.contains(c)) {
            continue;
        }
        for mask in 1u32..(1 << m) - 1 {
            let mut inner = face.cusps.clone();
            let mut outer = Vec::new();
            for (k, c) in extra.iter().enumerate() {
                if mask & (1 << k) != 0 {
                    inner.push(c.clone());
                } else {
                    outer.push(c.clone());
                }
            }
            inner.sort();
            if walked.contains(&inner) {
                continue;
            }
            let Some(e) = enter(ctx, &inner, &outer, &vtx.witness) else { continue };
            if locus_dim(ctx, &e) != Some(1) || !in_closure(ctx, &face.cusps, &e) {
                continue;
            }
            follow_edge(&mut fb, &mut queue, &mut walked, e);
        }
    }
    fb
}

/// Whether `cusps` (of order two, real quadratic field) is fixed by a
/// hyperbolic element, making its locus non-compact modulo the group.
pub(crate) fn has_unit_direction(cusps: &[Cusp]) -> bool {
    use crate::cusp::{act_cusp, moving_element};
    use crate::field::{field_spec, QuadElem};
    if cusps.len() != 2 {
        return false;
    }
    let d = cusps[0].d();
    let Some(eps) = field_spec(d).ok().and_then(|s| s.fundamental_unit.clone()) else {
        return false;
    };
    let to_inf = moving_element(&cusps[0]).inverse();
    let Some(x) = act_cusp(&to_inf, &cusps[1]).value() else { return false };
    let mut u = QuadElem::one(d);
    for _ in 0..48 {
        u = &u * &eps;
        let b = &x * &(&u.inverse().expect("unit") - &u);
        if b.is_integral() {
            return true;
        }
    }
    false
}
