//! Randomized verification suites over the library, used by the `verify`
//! subcommand and the acceptance harness.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::complex::{discover_cells, verify_cover, Region};
use crate::cone::{
    boundary_projection_check, difference_span_dim, dual_basis, langlands_certificate, pairwise_negative_rank,
    ConeSampler, CONE_SLACK,
};
use crate::cusp::{act_cusp, random_group_element, Cusp, GroupElement};
use crate::error::Result;
use crate::heights::{
    act_point, first_contact_pair, flow_form_fit, height_eval, pair_invariant, HeightParams, Model, ModelKind,
    ModelPoint, FIT_NONNEGATIVITY_SLACK, FIT_TOLERANCE,
};
use crate::spine::{retract_map, DEFAULT_TIE_TOL};

/// Failure messages kept per report.
const KEEP_NOTES: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub trials: usize,
    pub passed: usize,
    pub failed: usize,
    /// Largest error seen, in the unit the suite compares.
    pub max_error: f64,
    pub tolerance: f64,
    pub notes: Vec<String>,
}

impl SuiteReport {
    pub fn ok(&self) -> bool {
        self.failed == 0
    }

    fn collect(suite: &str, tolerance: f64, outcomes: Vec<std::result::Result<f64, String>>) -> SuiteReport {
        let mut r = SuiteReport {
            suite: suite.to_string(),
            trials: outcomes.len(),
            passed: 0,
            failed: 0,
            max_error: 0.0,
            tolerance,
            notes: Vec::new(),
        };
        for (k, o) in outcomes.into_iter().enumerate() {
            match o {
                Ok(e) if e <= tolerance => {
                    r.passed += 1;
                    r.max_error = r.max_error.max(e);
                }
                Ok(e) => {
                    r.failed += 1;
                    r.max_error = r.max_error.max(e);
                    if r.notes.len() < KEEP_NOTES {
                        r.notes.push(format!("trial {k}: error {e:e}"));
                    }
                }
                Err(msg) => {
                    r.failed += 1;
                    if r.notes.len() < KEEP_NOTES {
                        r.notes.push(format!("trial {k}: {msg}"));
                    }
                }
            }
        }
        r
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// A point with moderate coordinates and heights between 0.3 and 3.
pub fn random_point(kind: ModelKind, rng: &mut impl Rng) -> ModelPoint {
    let mut x = || rng.gen_range(-1.0..1.0);
    match kind {
        ModelKind::ModularH2 => ModelPoint::h2(x(), rng.gen_range(0.3..3.0)),
        ModelKind::BianchiH3 => {
            let (a, b) = (x(), rng.gen_range(-1.0..1.0));
            ModelPoint::h3(a, b, rng.gen_range(0.3..3.0))
        }
        ModelKind::HilbertH2xH2 => {
            let (a, b) = (x(), rng.gen_range(-1.0..1.0));
            ModelPoint::hh(a, rng.gen_range(0.3..3.0), b, rng.gen_range(0.3..3.0))
        }
    }
}

/// A cusp `g * infinity` for a short random word `g`.
pub fn random_cusp(model: &Model, rng: &mut impl Rng) -> Cusp {
    let g = random_group_element(&model.field, rng.gen_range(1..=5), rng.gen());
    act_cusp(&g, &Cusp::infinity(model.d()))
}

fn short_element(model: &Model, rng: &mut impl Rng) -> GroupElement {
    random_group_element(&model.field, rng.gen_range(1..=4), rng.gen())
}

fn trial_rngs(seed: u64, trials: usize) -> Vec<ChaCha8Rng> {
    (0..trials)
        .map(|k| ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64)))
        .collect()
}

/// `f_{g c}(g z) = f_c(z)` for random `(g, c, z)`; relative error.
pub fn height_invariance(model: &Model, params: &HeightParams, trials: usize, seed: u64) -> SuiteReport {
    let outcomes = trial_rngs(seed, trials)
        .into_par_iter()
        .map(|mut rng| {
            let g = short_element(model, &mut rng);
            let c = random_cusp(model, &mut rng);
            let z = random_point(model.kind, &mut rng);
            let a = height_eval(model, params, &c, &z).map_err(|e| e.to_string())?;
            let b = height_eval(model, params, &act_cusp(&g, &c), &act_point(&g, &z)).map_err(|e| e.to_string())?;
            Ok(rel(a, b))
        })
        .collect();
    SuiteReport::collect("height invariance", 1e-9, outcomes)
}

/// `r(g z, t) = g r(z, t)` for random `(g, z, t)`; distance relative to
/// the displacement of the retraction.
pub fn retraction_equivariance(model: &Model, params: &HeightParams, trials: usize, seed: u64) -> SuiteReport {
    let outcomes = trial_rngs(seed, trials)
        .into_par_iter()
        .map(|mut rng| {
            let g = short_element(model, &mut rng);
            let z = random_point(model.kind, &mut rng);
            let t = rng.gen_range(0.0..=1.0);
            let a = retract_map(model, params, &z, t, DEFAULT_TIE_TOL).map_err(|e| e.to_string())?;
            let b = retract_map(model, params, &act_point(&g, &z), t, DEFAULT_TIE_TOL).map_err(|e| e.to_string())?;
            let moved = act_point(&g, &a.point);
            Ok(moved.hyp_dist(&b.point) / (1.0 + z.hyp_dist(&a.point)))
        })
        .collect();
    SuiteReport::collect("retraction equivariance", 1e-9, outcomes)
}

/// Held-out residual, sign of the normalized coefficients and the limit
/// invariant of flow-form fits on random pairs, plus vanishing of the
/// lower coefficients on first-contact flow lines.
pub fn flow_form(model: &Model, params: &HeightParams, trials: usize, seed: u64) -> SuiteReport {
    let outcomes = trial_rngs(seed, trials)
        .into_par_iter()
        .map(|mut rng| {
            let p = random_cusp(model, &mut rng);
            let mut q = random_cusp(model, &mut rng);
            while q == p {
                q = random_cusp(model, &mut rng);
            }
            let z = random_point(model.kind, &mut rng);
            let fit = flow_form_fit(model, params, &p, &q, &z).map_err(|e| e.to_string())?;
            if let Some(e) = fit.normalized().iter().find(|e| **e < -FIT_NONNEGATIVITY_SLACK) {
                return Err(format!("negative coefficient {e:e}"));
            }
            let rho = pair_invariant(model, params, &p, &q).map_err(|e| e.to_string())?;
            let (_, w) = first_contact_pair(model, params, &p, &q).map_err(|e| e.to_string())?;
            let contact = flow_form_fit(model, params, &p, &q, &w).map_err(|e| e.to_string())?;
            let n = contact.e.len() - 1;
            let lower = contact.normalized()[..n].iter().fold(0.0f64, |m, e| m.max(e.abs()));
            Ok(fit.residual.max(rel(fit.limit_invariant, rho)).max(lower))
        })
        .collect();
    SuiteReport::collect("flow form", FIT_TOLERANCE, outcomes)
}

/// One report per cone lemma: dominant-cone certificate, rank of pairwise
/// negative families, span of differences, boundary projection.
pub fn cone_lemmas(trials: usize, seed: u64) -> Vec<SuiteReport> {
    let mut s = ConeSampler::new(seed);
    let mut cert = Vec::new();
    let mut rank = Vec::new();
    let mut span = Vec::new();
    let mut proj = Vec::new();
    for _ in 0..trials {
        let n = s.dim(1, 6);
        let m = s.dim(n, 6);
        let basis = s.obtuse_basis(n, m);
        cert.push(langlands_certificate(&basis).map_err(|e| e.to_string()).and_then(|c| {
            // round trip: the coefficients rebuild the dual basis
            let dual = dual_basis(&basis).map_err(|e| e.to_string())?;
            let mut worst = 0.0f64;
            for (i, b) in dual.vectors.iter().enumerate() {
                for (k, bk) in b.iter().enumerate() {
                    let r: f64 = (0..n).map(|j| c.coefficients[i][j] * basis.vectors[j][k]).sum();
                    worst = worst.max((r - bk).abs());
                }
            }
            Ok(worst)
        }));

        let count = s.dim(2, 6);
        let full = s.dim(0, 1) == 1;
        let m = s.dim(if full { count } else { count - 1 }, 7);
        let fam = s.negative_family(count, full, m);
        let want = if full { count } else { count - 1 };
        rank.push(match pairwise_negative_rank(&fam) {
            Ok(r) if r == want => Ok(0.0),
            Ok(r) => Err(format!("rank {r}, expected {want}")),
            Err(e) => Err(e.to_string()),
        });
        span.push(match difference_span_dim(&fam) {
            Ok(r) if r == count - 1 => Ok(0.0),
            Ok(r) => Err(format!("span {r}, expected {}", count - 1)),
            Err(e) => Err(e.to_string()),
        });

        let n = s.dim(1, 6);
        let m = s.dim(n, 6);
        let vs = s.obtuse_basis(n, m);
        let u = s.nonpositive_against(&vs);
        proj.push(match boundary_projection_check(&vs, &u) {
            Ok(c) if c.holds => Ok(0.0),
            Ok(c) => Err(format!("margins {:?}", c.margins)),
            Err(e) => Err(e.to_string()),
        });
    }
    vec![
        SuiteReport::collect("dominant cone certificate", CONE_SLACK, cert),
        SuiteReport::collect("pairwise negative rank", 0.0, rank),
        SuiteReport::collect("difference span", 0.0, span),
        SuiteReport::collect("boundary projection", 0.0, proj),
    ]
}

/// Region used for coverage checks: the discovery box with its height
/// axes opened up to `[0.2, 2]`.
pub fn cover_region(model: &Model) -> Region {
    let mut r = Region::default_for(model);
    for &i in ModelPoint::height_axes(model.kind) {
        r.lo[i] = 0.2;
        r.hi[i] = 2.0;
    }
    r
}

/// Discovers a complex over [`cover_region`] and checks that random
/// samples retract into known orbits; error is the unmatched fraction.
pub fn cover(model: &Model, params: &HeightParams, grid: usize, samples: usize, seed: u64) -> Result<SuiteReport> {
    let cx = discover_cells(model, params, &cover_region(model), grid, DEFAULT_TIE_TOL)?;
    let rep = verify_cover(model, params, &cx, samples, seed);
    let mut r = SuiteReport {
        suite: "cover".into(),
        trials: rep.samples,
        passed: rep.matched,
        failed: rep.samples - rep.matched,
        max_error: 1.0 - rep.fraction,
        tolerance: 0.0,
        notes: rep.unmatched_labels.iter().take(KEEP_NOTES).cloned().collect(),
    };
    if rep.failures > 0 {
        r.notes.push(format!("{} samples failed to retract", rep.failures));
    }
    Ok(r)
}
