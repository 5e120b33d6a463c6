//! Complete enumeration of the cusps that are high at a point.
//!
//! Every bound below comes from `A >= |q|^2 * height^2` in the height
//! denominator: it first bounds the embeddings of `q`, then confines `p`
//! to a box around `q z`. Candidates are filtered in floating point and
//! only the survivors are turned into exact cusps.

use num_integer::Integer;
use num_traits::{One, Signed};

use super::{height, HeightParams, Model, ModelPoint};
use crate::cusp::Cusp;
use crate::field::{euclid_gcd, field_spec, is_unit_canonical, lattice_points_in_box, minkowski_basis, QuadElem};

/// Relative slack on enumeration radii; the final filter is exact in the
/// sense that it uses the same float formula as [`height`].
const RADIUS_SLACK: f64 = 1e-9;

/// Minkowski coordinates of `m + n*omega`.
fn mink(basis: &[[f64; 2]; 2], m: i64, n: i64) -> [f64; 2] {
    let (m, n) = (m as f64, n as f64);
    [basis[0][0] * m + basis[0][1] * n, basis[1][0] * m + basis[1][1] * n]
}

fn coprime(p: &QuadElem, q: &QuadElem) -> bool {
    euclid_gcd(p, q).expect("q nonzero").norm().abs().is_one()
}

/// Float height of `(p : q)` from Minkowski coordinates, unit scale.
fn float_height(d: i64, p: [f64; 2], q: [f64; 2], z: &ModelPoint) -> f64 {
    match *z {
        ModelPoint::H2 { x, y } => {
            let u = q[0] * x - p[0];
            y / (u * u + q[0] * q[0] * y * y)
        }
        ModelPoint::H3 { z, t } => {
            debug_assert!(d < 0);
            let (qr, qi, pr, pi) = (q[0], q[1], p[0], p[1]);
            let wr = qr * z.re - qi * z.im - pr;
            let wi = qr * z.im + qi * z.re - pi;
            t / (wr * wr + wi * wi + (qr * qr + qi * qi) * t * t)
        }
        ModelPoint::HH { x1, y1, x2, y2 } => {
            let u1 = q[0] * x1 - p[0];
            let u2 = q[1] * x2 - p[1];
            let a1 = u1 * u1 + q[0] * q[0] * y1 * y1;
            let a2 = u2 * u2 + q[1] * q[1] * y2 * y2;
            (y1 * y2 / (a1 * a2)).sqrt()
        }
    }
}

/// All cusps with `f_c(z) >= theta`, paired with their heights and sorted
/// by decreasing height (ties broken by the cusp order).
pub fn scan_cusps(model: &Model, params: &HeightParams, z: &ModelPoint, theta: f64) -> Vec<(Cusp, f64)> {
    assert!(theta > 0.0, "threshold must be positive");
    let d = model.d();
    let lam = params.max_lambda();
    let widen = 1.0 + RADIUS_SLACK;
    let mut out: Vec<(Cusp, f64)> = Vec::new();

    let inf = Cusp::infinity(d);
    let f_inf = height(params, &inf, z);
    if f_inf >= theta {
        out.push((inf, f_inf));
    }
    // pre-filter threshold for unit-scale heights
    let floor = theta / lam * (1.0 - RADIUS_SLACK);
    let consider = |p: QuadElem, q: QuadElem, out: &mut Vec<(Cusp, f64)>| {
        if !coprime(&p, &q) {
            return;
        }
        let c = Cusp::from_canonical(p, q);
        let f = height(params, &c, z);
        if f >= theta {
            out.push((c, f));
        }
    };

    match *z {
        ModelPoint::H2 { x, y } => {
            let qmax = (lam / (theta * y)).sqrt() * widen;
            for q in 1..=(qmax.floor() as i64) {
                let qf = q as f64;
                let r2 = lam * y / theta - qf * qf * y * y;
                if r2 < -RADIUS_SLACK * lam * y / theta {
                    continue;
                }
                let r = r2.max(0.0).sqrt() * widen + RADIUS_SLACK;
                let lo = (qf * x - r).ceil() as i64;
                let hi = (qf * x + r).floor() as i64;
                for p in lo..=hi {
                    if p.gcd(&q) != 1 {
                        continue;
                    }
                    if float_height(d, [p as f64, 0.0], [qf, 0.0], z) < floor {
                        continue;
                    }
                    consider(QuadElem::from_int(d, p), QuadElem::from_int(d, q), &mut out);
                }
            }
        }
        ModelPoint::H3 { z: w, t } => {
            let basis = minkowski_basis(d);
            let bound = lam / (theta * t);
            let rq = bound.sqrt() * widen;
            for (m, n) in lattice_points_in_box(d, [0.0, 0.0], [rq, rq]) {
                let qm = mink(&basis, m, n);
                let nq = qm[0] * qm[0] + qm[1] * qm[1];
                if nq == 0.0 || nq > bound * widen {
                    continue;
                }
                let q = QuadElem::from_integer_coords(d, m, n);
                if !is_unit_canonical(&q) {
                    continue;
                }
                let r2 = lam * t / theta - nq * t * t;
                let r = r2.max(0.0).sqrt() * widen + RADIUS_SLACK;
                let center = [qm[0] * w.re - qm[1] * w.im, qm[0] * w.im + qm[1] * w.re];
                for (a, b) in lattice_points_in_box(d, center, [r, r]) {
                    let pm = mink(&basis, a, b);
                    if float_height(d, pm, qm, z) < floor {
                        continue;
                    }
                    consider(QuadElem::from_integer_coords(d, a, b), q.clone(), &mut out);
                }
            }
        }
        ModelPoint::HH { x1, y1, x2, y2 } => {
            let basis = minkowski_basis(d);
            let eps = field_spec(d)
                .expect("supported")
                .fundamental_unit
                .as_ref()
                .expect("real field")
                .embed_real(1);
            let bound = lam / (theta * (y1 * y2).sqrt());
            let root = bound.sqrt() * widen;
            let half = [0.5 * eps * root, root];
            for (m, n) in lattice_points_in_box(d, [0.5 * eps * root, 0.0], half) {
                let qm = mink(&basis, m, n);
                let nq = (qm[0] * qm[1]).abs();
                if qm[0] <= 0.0 || nq < 0.5 || nq > bound * widen {
                    continue;
                }
                let q = QuadElem::from_integer_coords(d, m, n);
                if !is_unit_canonical(&q) {
                    continue;
                }
                let k = lam / theta * widen;
                let half_p = [
                    k * (y1 / y2).sqrt() / qm[1].abs() + RADIUS_SLACK,
                    k * (y2 / y1).sqrt() / qm[0].abs() + RADIUS_SLACK,
                ];
                let center = [qm[0] * x1, qm[1] * x2];
                for (a, b) in lattice_points_in_box(d, center, half_p) {
                    let pm = mink(&basis, a, b);
                    if float_height(d, pm, qm, z) < floor {
                        continue;
                    }
                    consider(QuadElem::from_integer_coords(d, a, b), q.clone(), &mut out);
                }
            }
        }
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

/// Every cusp whose height at `z` is at least `theta`, highest first.
pub fn relevant_cusps(model: &Model, params: &HeightParams, z: &ModelPoint, theta: f64) -> Vec<Cusp> {
    scan_cusps(model, params, z, theta).into_iter().map(|(c, _)| c).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modular_examples() {
        let m = Model::modular();
        let p = HeightParams::default();
        let hi = relevant_cusps(&m, &p, &ModelPoint::h2(0.0, 5.0), 2.0);
        assert_eq!(hi, vec![Cusp::infinity(0)]);
        let z = ModelPoint::h2(0.25, 3.0);
        let got = relevant_cusps(&m, &p, &z, 0.3);
        assert_eq!(got[0], Cusp::infinity(0));
        for c in &got[1..] {
            assert!(c.q().is_one());
        }
        let expected: Vec<i64> = (-3..=3)
            .filter(|&k| {
                let u = 0.25 - k as f64;
                3.0 / (u * u + 9.0) >= 0.3
            })
            .collect();
        assert_eq!(got.len(), 1 + expected.len());
        assert!(relevant_cusps(&m, &p, &z, 10.0).is_empty());
    }
}
