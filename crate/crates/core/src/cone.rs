//! Linear algebra of obtuse vector configurations: dual bases, the
//! dominant-cone certificate, rank lemmas for pairwise negative families
//! and the boundary projection inequality.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Result, SpineError};
use crate::linalg;

/// Slack allowed on sign conditions.
pub const CONE_SLACK: f64 = 1e-10;
/// Largest accepted condition number of a basis.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VectorConfig {
    pub vectors: Vec<Vec<f64>>,
    pub gram: Vec<Vec<f64>>,
}

impl VectorConfig {
    pub fn new(vectors: Vec<Vec<f64>>) -> VectorConfig {
        let gram = vectors
            .iter()
            .map(|a| vectors.iter().map(|b| linalg::dot(a, b)).collect())
            .collect();
        VectorConfig { vectors, gram }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.vectors.first().map_or(0, |v| v.len())
    }

    fn matrix(&self) -> DMatrix<f64> {
        linalg::from_rows(&self.vectors, self.ambient_dim())
    }

    fn gram_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| self.gram[i][j])
    }

    /// Largest off-diagonal inner product and where it occurs.
    fn max_off_diagonal(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                let v = self.gram[i][j];
                if best.is_none_or(|b| v > b.2) {
                    best = Some((i, j, v));
                }
            }
        }
        best
    }

    fn condition(&self) -> f64 {
        let (sigma, _) = linalg::full_svd(&self.matrix().transpose());
        let n = self.len();
        if n == 0 {
            return 1.0;
        }
        if sigma.len() < n || sigma[n - 1] == 0.0 {
            return f64::INFINITY;
        }
        sigma[0] / sigma[n - 1]
    }
}

fn require_obtuse(vs: &VectorConfig) -> Result<()> {
    match vs.max_off_diagonal() {
        Some((i, j, v)) if v > CONE_SLACK => Err(SpineError::NotObtuse(i, j, v)),
        _ => Ok(()),
    }
}

fn require_strictly_obtuse(vs: &VectorConfig) -> Result<()> {
    match vs.max_off_diagonal() {
        Some((i, j, v)) if v >= 0.0 => Err(SpineError::NotStrictlyObtuse(i, j, v)),
        _ => Ok(()),
    }
}

fn require_independent(vs: &VectorConfig) -> Result<f64> {
    let cond = vs.condition();
    if !(cond < MAX_CONDITION) || vs.len() > vs.ambient_dim() {
        return Err(SpineError::SingularBasis(cond));
    }
    Ok(cond)
}

/// Gram inverse, i.e. the coefficients of the dual basis in the basis.
fn gram_inverse(vs: &VectorConfig) -> DMatrix<f64> {
    vs.gram_matrix().try_inverse().expect("independent basis")
}

/// Dual basis `beta` with `<beta_i, alpha_j> = delta_ij`, inside the span.
pub fn dual_basis(basis: &VectorConfig) -> Result<VectorConfig> {
    require_independent(basis)?;
    require_obtuse(basis)?;
    let coeffs = gram_inverse(basis);
    let a = basis.matrix();
    let b = &coeffs * &a;
    let rows = (0..b.nrows()).map(|i| b.row(i).iter().cloned().collect()).collect();
    Ok(VectorConfig::new(rows))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LanglandsCertificate {
    /// `coefficients[i][j]`: coefficient of `alpha_j` in `beta_i`.
    pub coefficients: Vec<Vec<f64>>,
    /// Gram matrix of the dual basis.
    pub dual_gram: Vec<Vec<f64>>,
    pub holds: bool,
}

/// Expresses the dual basis in the basis and certifies that every
/// coefficient and every inner product `<beta_i, beta_j>` is nonnegative.
pub fn langlands_certificate(basis: &VectorConfig) -> Result<LanglandsCertificate> {
    let dual = dual_basis(basis)?;
    let inv = gram_inverse(basis);
    let n = basis.len();
    let coefficients: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| inv[(i, j)]).collect()).collect();
    if let Some(v) = coefficients.iter().flatten().find(|v| **v < -CONE_SLACK) {
        return Err(SpineError::CertificateViolated(format!("negative coefficient {v:e}")));
    }
    if let Some(v) = dual.gram.iter().flatten().find(|v| **v < -CONE_SLACK) {
        return Err(SpineError::CertificateViolated(format!("negative dual inner product {v:e}")));
    }
    Ok(LanglandsCertificate {
        coefficients,
        dual_gram: dual.gram,
        holds: true,
    })
}

/// Rank of a pairwise negative family of `k + 1` vectors, which is `k` or
/// `k + 1`; every `k` of them are independent.
pub fn pairwise_negative_rank(vs: &VectorConfig) -> Result<usize> {
    require_strictly_obtuse(vs)?;
    let n = vs.len();
    if n == 0 {
        return Ok(0);
    }
    let r = linalg::rank(&vs.matrix());
    let k = n - 1;
    if r != k && r != k + 1 {
        return Err(SpineError::CertificateViolated(format!("rank {r} of {n} pairwise negative vectors")));
    }
    for skip in 0..n {
        let sub: Vec<Vec<f64>> = (0..n).filter(|&i| i != skip).map(|i| vs.vectors[i].clone()).collect();
        if !sub.is_empty() && linalg::rank(&linalg::from_rows(&sub, vs.ambient_dim())) != k {
            return Err(SpineError::CertificateViolated(format!("dependent subset omitting vector {skip}")));
        }
    }
    Ok(r)
}

/// Dimension of the span of the differences `v_0 - v_i`, which is
/// `count - 1` for a pairwise negative family.
pub fn difference_span_dim(vs: &VectorConfig) -> Result<usize> {
    require_strictly_obtuse(vs)?;
    let n = vs.len();
    if n < 2 {
        return Ok(0);
    }
    let diffs: Vec<Vec<f64>> = vs.vectors[1..]
        .iter()
        .map(|v| vs.vectors[0].iter().zip(v).map(|(a, b)| a - b).collect())
        .collect();
    let r = linalg::rank(&linalg::from_rows(&diffs, vs.ambient_dim()));
    if r != n - 1 {
        return Err(SpineError::CertificateViolated(format!("differences span {r}, expected {}", n - 1)));
    }
    Ok(r)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectionCheck {
    pub projection: Vec<f64>,
    /// `<pr(v_0), v_i - u>` for each `i`.
    pub margins: Vec<f64>,
    pub holds: bool,
}

/// Projects `v_0` onto the orthogonal complement of the differences
/// `v_i - v_j` and checks `<pr(v_0), v_i - u> > 0` for all `i`.
pub fn boundary_projection_check(vs: &VectorConfig, u: &[f64]) -> Result<ProjectionCheck> {
    let m = vs.ambient_dim();
    if vs.is_empty() || u.len() != m {
        return Err(SpineError::PreconditionViolated("dimension mismatch".into()));
    }
    if vs.len() > m || !(vs.condition() < MAX_CONDITION) {
        return Err(SpineError::PreconditionViolated("vectors are not independent".into()));
    }
    if let Some((i, j, v)) = vs.max_off_diagonal() {
        if v > CONE_SLACK {
            return Err(SpineError::PreconditionViolated(format!("<v_{i}, v_{j}> = {v:e} > 0")));
        }
    }
    for (i, v) in vs.vectors.iter().enumerate() {
        let ip = linalg::dot(v, u);
        if ip > CONE_SLACK {
            return Err(SpineError::PreconditionViolated(format!("<v_{i}, u> = {ip:e} > 0")));
        }
    }
    let v0 = DVector::from_column_slice(&vs.vectors[0]);
    let projection: Vec<f64> = if vs.len() == 1 {
        vs.vectors[0].clone()
    } else {
        let diffs: Vec<Vec<f64>> = vs.vectors[1..]
            .iter()
            .map(|v| v.iter().zip(&vs.vectors[0]).map(|(a, b)| a - b).collect())
            .collect();
        let basis = linalg::null_space(&linalg::from_rows(&diffs, m));
        let p = &basis * (basis.transpose() * &v0);
        p.iter().cloned().collect()
    };
    let margins: Vec<f64> = vs
        .vectors
        .iter()
        .map(|v| {
            let w: Vec<f64> = v.iter().zip(u).map(|(a, b)| a - b).collect();
            linalg::dot(&projection, &w)
        })
        .collect();
    let holds = margins.iter().all(|m| *m > 1e-12);
    Ok(ProjectionCheck {
        projection,
        margins,
        holds,
    })
}

/// Seeded generators of inputs satisfying the lemma hypotheses.
pub struct ConeSampler {
    rng: ChaCha8Rng,
}

impl ConeSampler {
    pub fn new(seed: u64) -> ConeSampler {
        ConeSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn gaussian(&mut self) -> f64 {
        // Box-Muller
        let u: f64 = self.rng.gen_range(f64::EPSILON..1.0);
        let v: f64 = self.rng.gen();
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    }

    /// Random orthogonal map from `R^k` into `R^m`, as an `m x k` matrix.
    fn isometry(&mut self, m: usize, k: usize) -> DMatrix<f64> {
        let g = DMatrix::from_fn(m, m, |_, _| self.gaussian());
        let q = g.qr().q();
        q.columns(0, k).into_owned()
    }

    fn realize(&mut self, rows: &DMatrix<f64>, m: usize) -> Vec<Vec<f64>> {
        let k = rows.ncols();
        let iso = self.isometry(m, k);
        (0..rows.nrows())
            .map(|i| (&iso * rows.row(i).transpose()).iter().cloned().collect())
            .collect()
    }

    /// Independent vectors with pairwise inner products `<= 0`, obtained by
    /// rejection sampling of Gram matrices with nonpositive off-diagonal.
    pub fn obtuse_basis(&mut self, n: usize, m: usize) -> VectorConfig {
        assert!(n <= m && n >= 1);
        loop {
            let mut g = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                g[(i, i)] = self.rng.gen_range(0.5..2.0);
                for j in 0..i {
                    let v = if self.rng.gen_bool(0.2) {
                        0.0
                    } else {
                        -self.rng.gen_range(0.0..1.0)
                    };
                    g[(i, j)] = v;
                    g[(j, i)] = v;
                }
            }
            let Some(ch) = g.clone().cholesky() else { continue };
            let l = ch.l();
            let vs = VectorConfig::new(self.realize(&l, m));
            if vs.condition() < 1e6 {
                return vs;
            }
        }
    }

    /// `count` vectors with strictly negative pairwise inner products, of
    /// rank `count - 1` (a perturbed centred simplex) or `count`.
    pub fn negative_family(&mut self, count: usize, full_rank: bool, m: usize) -> VectorConfig {
        assert!(count >= 2);
        let k = count - 1;
        let dim = if full_rank { count } else { k };
        assert!(dim <= m);
        loop {
            // rows of an orthonormal basis of the sum-zero plane form a
            // centred regular simplex with pairwise inner product -1/count
            let mut rows = DMatrix::<f64>::zeros(count, dim);
            let simplex = linalg::null_space(&DMatrix::from_element(1, count, 1.0));
            for i in 0..count {
                for j in 0..k {
                    rows[(i, j)] = simplex[(i, j)] * self.rng.gen_range(0.8..1.25);
                }
            }
            if full_rank {
                for i in 0..count {
                    rows[(i, k)] = self.rng.gen_range(-0.3..0.3);
                }
            }
            let vs = VectorConfig::new(self.realize(&rows, m));
            let neg = vs.max_off_diagonal().is_none_or(|(_, _, v)| v < -1e-6);
            let r = linalg::rank(&vs.matrix());
            if neg && r == dim {
                return vs;
            }
        }
    }

    /// A vector `u` with `<v_i, u> <= 0` for all `i`: a nonpositive
    /// combination of the dual basis plus an orthogonal part.
    pub fn nonpositive_against(&mut self, vs: &VectorConfig) -> Vec<f64> {
        let dual = dual_basis(vs).expect("valid basis");
        let m = vs.ambient_dim();
        let mut u = vec![0.0; m];
        for b in &dual.vectors {
            let c = if self.rng.gen_bool(0.2) { 0.0 } else { self.rng.gen_range(0.0..2.0) };
            for (x, y) in u.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
        let orth = linalg::null_space(&vs.matrix());
        for j in 0..orth.ncols() {
            let c = self.gaussian();
            for (i, x) in u.iter_mut().enumerate() {
                *x += c * orth[(i, j)];
            }
        }
        u
    }

    pub fn dim(&mut self, lo: usize, hi: usize) -> usize {
        self.rng.gen_range(lo..=hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn dual_basis_examples() {
        let s3 = 3f64.sqrt();
        let d = VectorConfig::new(vec![vec![1.0, 0.0], vec![-0.5, s3 / 2.0]]);
        let b = dual_basis(&d).unwrap();
        assert!(close(&b.vectors[0], &[1.0, 1.0 / s3]));
        assert!(close(&b.vectors[1], &[0.0, 2.0 / s3]));
        let id = VectorConfig::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(dual_basis(&id).unwrap(), id);
        let bad = VectorConfig::new(vec![vec![1.0, 0.0], vec![2.0, 0.0]]);
        assert!(matches!(dual_basis(&bad), Err(SpineError::SingularBasis(_))));
        let acute = VectorConfig::new(vec![vec![1.0, 0.0], vec![1.0, 1.0]]);
        assert!(matches!(dual_basis(&acute), Err(SpineError::NotObtuse(0, 1, _))));
    }

    #[test]
    fn certificate_examples() {
        let s3 = 3f64.sqrt();
        let d = VectorConfig::new(vec![vec![1.0, 0.0], vec![-0.5, s3 / 2.0]]);
        let c = langlands_certificate(&d).unwrap();
        assert!(close(&c.coefficients[0], &[4.0 / 3.0, 2.0 / 3.0]));
        assert!(close(&c.coefficients[1], &[2.0 / 3.0, 4.0 / 3.0]));
        let id = VectorConfig::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let c = langlands_certificate(&id).unwrap();
        assert!(close(&c.coefficients[0], &[1.0, 0.0]) && close(&c.coefficients[1], &[0.0, 1.0]));
    }

    #[test]
    fn rank_examples() {
        let opp = VectorConfig::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0]]);
        assert_eq!(pairwise_negative_rank(&opp).unwrap(), 1);
        assert_eq!(difference_span_dim(&opp).unwrap(), 1);
        let s3 = 3f64.sqrt() / 2.0;
        let tri = VectorConfig::new(vec![vec![1.0, 0.0], vec![-0.5, s3], vec![-0.5, -s3]]);
        assert_eq!(pairwise_negative_rank(&tri).unwrap(), 2);
        assert_eq!(difference_span_dim(&tri).unwrap(), 2);
        let lifted = VectorConfig::new(vec![vec![1.0, 0.0, 0.1], vec![-0.5, s3, 0.1], vec![-0.5, -s3, 0.1]]);
        assert_eq!(pairwise_negative_rank(&lifted).unwrap(), 3);
        let right = VectorConfig::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(pairwise_negative_rank(&right), Err(SpineError::NotStrictlyObtuse(..))));
    }

    #[test]
    fn projection_examples() {
        let vs = VectorConfig::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let c = boundary_projection_check(&vs, &[-1.0, -1.0]).unwrap();
        assert!(close(&c.projection, &[0.5, 0.5]));
        assert!(close(&c.margins, &[1.5, 1.5]) && c.holds);
        let c = boundary_projection_check(&vs, &[0.0, 0.0]).unwrap();
        assert!(c.holds);
        assert!(matches!(
            boundary_projection_check(&vs, &[1.0, 0.0]),
            Err(SpineError::PreconditionViolated(_))
        ));
    }

    #[test]
    fn samplers_meet_hypotheses() {
        let mut s = ConeSampler::new(3);
        for n in 1..=6 {
            let b = s.obtuse_basis(n, 6);
            assert!(langlands_certificate(&b).is_ok());
            let u = s.nonpositive_against(&b);
            assert!(boundary_projection_check(&b, &u).unwrap().holds);
        }
        for count in 2..=6 {
            let f = s.negative_family(count, false, 6);
            assert_eq!(pairwise_negative_rank(&f).unwrap(), count - 1);
            let f = s.negative_family(count, true, 6);
            assert_eq!(pairwise_negative_rank(&f).unwrap(), count);
        }
    }
}
