use proptest::prelude::*;

use spinekit::cone::{boundary_projection_check, VectorConfig};
use spinekit::cusp::{act_cusp, cusp_stabilizer_generators, random_group_element, Cusp, GroupElement};
use spinekit::heights::{
    act_point, first_contact_pair, geodesic_flow, height_eval, pair_invariant, riem_gradient, HeightParams, Model,
    ModelKind, ModelPoint,
};
use spinekit::spine::{
    active_set, first_contact_check, ranked_cusps, retract_map, solve_tie, tie_locus_dim, DEFAULT_TIE_TOL,
};

const TOL: f64 = DEFAULT_TIE_TOL;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn model_of(k: usize) -> Model {
    match k {
        0 => Model::modular(),
        1 => Model::bianchi(-1).unwrap(),
        2 => Model::bianchi(-3).unwrap(),
        3 => Model::hilbert(2).unwrap(),
        _ => Model::hilbert(5).unwrap(),
    }
}

fn point(kind: ModelKind, c: &[f64]) -> ModelPoint {
    match kind {
        ModelKind::ModularH2 => ModelPoint::h2(c[0], 0.3 + 2.7 * c[1]),
        ModelKind::BianchiH3 => ModelPoint::h3(c[0], c[2], 0.3 + 2.7 * c[1]),
        ModelKind::HilbertH2xH2 => ModelPoint::hh(c[0], 0.3 + 2.7 * c[1], c[2], 0.3 + 2.7 * c[3]),
    }
}

fn coords() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 4).prop_map(|mut v| {
        // height slots come from the upper half of the range
        v[1] = v[1].abs();
        v[3] = v[3].abs();
        v
    })
}

fn cusp_from(m: &Model, seed: u64, len: usize) -> Cusp {
    act_cusp(&random_group_element(&m.field, len, seed), &Cusp::infinity(m.d()))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn orthonormal(z: &ModelPoint, g: &[f64]) -> Vec<f64> {
    g.iter().zip(z.metric_scales()).map(|(a, s)| a / s).collect()
}

proptest! {
    #![proptest_config(config(300))]

    #[test]
    fn heights_are_group_invariant(k in 0usize..5, c in coords(), s in any::<u64>(), t in any::<u64>(), len in 1usize..6) {
        let m = model_of(k);
        let p = HeightParams::default();
        let z = point(m.kind, &c);
        let cusp = cusp_from(&m, s, len);
        let g = random_group_element(&m.field, len, t);
        let a = height_eval(&m, &p, &cusp, &z).unwrap();
        let b = height_eval(&m, &p, &act_cusp(&g, &cusp), &act_point(&g, &z)).unwrap();
        prop_assert!(rel(a, b) < 1e-9, "{} vs {}", a, b);
    }

    #[test]
    fn flow_scales_height(k in 0usize..5, c in coords(), s in any::<u64>(), len in 0usize..5) {
        let m = model_of(k);
        let p = HeightParams::default();
        let z = point(m.kind, &c);
        let cusp = if len == 0 { Cusp::infinity(m.d()) } else { cusp_from(&m, s, len) };
        let f = height_eval(&m, &p, &cusp, &z).unwrap();
        for level in [0.1, 0.5, 2.0, 10.0] {
            let w = geodesic_flow(&m, &cusp, &z, level).unwrap();
            let g = height_eval(&m, &p, &cusp, &w).unwrap();
            prop_assert!(rel(g, level * f) < 1e-10, "level {}: {} vs {}", level, g, level * f);
        }
    }

    #[test]
    fn infinity_height_ignores_its_stabilizer(k in 0usize..5, c in coords()) {
        let m = model_of(k);
        let p = HeightParams::default();
        let z = point(m.kind, &c);
        let inf = Cusp::infinity(m.d());
        let f = height_eval(&m, &p, &inf, &z).unwrap();
        for g in cusp_stabilizer_generators(&inf).unwrap() {
            let w = act_point(&g, &z);
            prop_assert!(rel(height_eval(&m, &p, &inf, &w).unwrap(), f) < 1e-12);
        }
    }

    #[test]
    fn gradient_norm_tracks_height(k in 0usize..5, c in coords(), s in any::<u64>(), len in 0usize..5) {
        let m = model_of(k);
        let p = HeightParams::default();
        let z = point(m.kind, &c);
        let cusp = if len == 0 { Cusp::infinity(m.d()) } else { cusp_from(&m, s, len) };
        let f = height_eval(&m, &p, &cusp, &z).unwrap();
        let g = riem_gradient(&m, &p, &cusp, &z).unwrap();
        prop_assert!(rel(z.norm(&g), m.grad_norm_ratio() * f) < 1e-8);
    }

    #[test]
    fn gradient_norm_is_constant_on_levels(k in 0usize..5, a in coords(), b in coords(), s in any::<u64>(), len in 1usize..5) {
        // two points on one level of f_c: move points of equal f_inf level by g
        let m = model_of(k);
        let p = HeightParams::default();
        let g = random_group_element(&m.field, len, s);
        let cusp = act_cusp(&g, &Cusp::infinity(m.d()));
        let mut b = b.clone();
        b[1] = a[1];
        b[3] = a[3];
        let z1 = act_point(&g, &point(m.kind, &a));
        let z2 = act_point(&g, &point(m.kind, &b));
        let f1 = height_eval(&m, &p, &cusp, &z1).unwrap();
        let f2 = height_eval(&m, &p, &cusp, &z2).unwrap();
        prop_assert!(rel(f1, f2) < 1e-9);
        let n1 = z1.norm(&riem_gradient(&m, &p, &cusp, &z1).unwrap());
        let n2 = z2.norm(&riem_gradient(&m, &p, &cusp, &z2).unwrap());
        prop_assert!(rel(n1, n2) < 1e-8, "{} vs {}", n1, n2);
    }

    #[test]
    fn ratio_grows_down_the_flow(k in 0usize..5, c in coords(), s in any::<u64>(), t in any::<u64>()) {
        let m = model_of(k);
        let p = HeightParams::default();
        let z = point(m.kind, &c);
        let cp = cusp_from(&m, s, 3);
        let cq = cusp_from(&m, t, 4);
        prop_assume!(cp != cq);
        let mut last = 0.0;
        for j in 0..40 {
            let level = 4f64.powf(1.0 - j as f64 / 10.0);
            let w = geodesic_flow(&m, &cp, &z, level).unwrap();
            let r = height_eval(&m, &p, &cq, &w).unwrap() / height_eval(&m, &p, &cp, &w).unwrap();
            prop_assert!(r > last, "ratio {} after {} at level {}", r, last, level);
            last = r;
        }
    }
}

proptest! {
    #![proptest_config(config(120))]

    #[test]
    fn retraction_is_equivariant(k in 0usize..4, c in coords(), s in any::<u64>(), len in 1usize..5, t in 0.0f64..=1.0) {
        let m = model_of(if k == 2 { 3 } else { k });
        let p = HeightParams::default();
        let z = point(m.kind, &c);
        let g = random_group_element(&m.field, len, s);
        let a = retract_map(&m, &p, &z, t, TOL).unwrap();
        let b = retract_map(&m, &p, &act_point(&g, &z), t, TOL).unwrap();
        let d = act_point(&g, &a.point).hyp_dist(&b.point);
        prop_assert!(d < 1e-9 * (1.0 + z.hyp_dist(&a.point)), "distance {}", d);
    }

    #[test]
    fn retraction_fixes_the_spine(k in 0usize..4, c in coords(), t in 0.0f64..=1.0) {
        let m = model_of(if k == 2 { 3 } else { k });
        let p = HeightParams::default();
        let w = retract_map(&m, &p, &point(m.kind, &c), 1.0, TOL).unwrap().point;
        prop_assert!(active_set(&m, &p, &w, TOL).order() >= 2);
        let again = retract_map(&m, &p, &w, t, TOL).unwrap();
        prop_assert_eq!(again.point, w);
        prop_assert_eq!(again.mu, 1.0);
    }

    #[test]
    fn retraction_stays_on_its_geodesic(k in 0usize..4, c in coords()) {
        let m = model_of(if k == 2 { 3 } else { k });
        let p = HeightParams::default();
        let z = point(m.kind, &c);
        let dominant = ranked_cusps(&m, &p, &z, TOL)[0].0.clone();
        for j in 1..10 {
            let w = retract_map(&m, &p, &z, j as f64 / 10.0, TOL).unwrap().point;
            let act = active_set(&m, &p, &w, TOL);
            prop_assert!(act.order() >= 2 || act.cusps[0] == dominant, "left the geodesic at t = {}", j as f64 / 10.0);
        }
    }

    #[test]
    fn active_sets_are_stable_under_stabilizers(k in 0usize..4, s in any::<u64>(), len in 1usize..5, which in 0usize..2) {
        let m = model_of(if k == 2 { 3 } else { k });
        let p = HeightParams::default();
        let d = m.d();
        let weyl = GroupElement::weyl(d);
        let (h, z0) = match (m.kind, which) {
            (ModelKind::ModularH2, 1) => {
                // S T fixes the order-three point
                (weyl.mul(&GroupElement::from_ints(d, [1, 1, 0, 1]).unwrap()), ModelPoint::h2(-0.5, 3f64.sqrt() / 2.0))
            }
            (ModelKind::ModularH2, _) => (weyl, ModelPoint::h2(0.0, 1.0)),
            (ModelKind::BianchiH3, _) => (weyl, ModelPoint::h3(0.0, 0.0, 1.0)),
            (ModelKind::HilbertH2xH2, _) => (weyl, ModelPoint::hh(0.0, 1.0, 0.0, 1.0)),
        };
        prop_assert!(act_point(&h, &z0).coord_dist(&z0) < 1e-12);
        let g = random_group_element(&m.field, len, s);
        let z = act_point(&g, &z0);
        let hz = g.mul(&h).mul(&g.inverse());
        let act = active_set(&m, &p, &z, TOL);
        let mut moved: Vec<Cusp> = act.cusps.iter().map(|c| act_cusp(&hz, c)).collect();
        moved.sort();
        prop_assert_eq!(moved, act.cusps.clone());
    }

    #[test]
    fn tie_dimension_law(k in 0usize..4, c in coords()) {
        let m = model_of(if k == 2 { 3 } else { k });
        let p = HeightParams::default();
        let r = retract_map(&m, &p, &point(m.kind, &c), 1.0, TOL).unwrap();
        let ts = r.active;
        prop_assume!(ts.order() <= 3);
        let dim = tie_locus_dim(&m, &p, &ts).unwrap();
        prop_assert_eq!(dim, m.dim() + 1 - ts.order());
    }

    #[test]
    fn contact_certificates_agree(k in 0usize..5, s in any::<u64>(), t in any::<u64>(), len in 1usize..5) {
        let m = model_of(k);
        let p = HeightParams::default();
        let a = cusp_from(&m, s, len);
        let b = cusp_from(&m, t, len + 1);
        prop_assume!(a != b);
        let (h, w) = first_contact_pair(&m, &p, &a, &b).unwrap();
        prop_assert!(rel(h, pair_invariant(&m, &p, &a, &b).unwrap().sqrt()) < 1e-12);
        let check = first_contact_check(&m, &p, &w, &a, &b).unwrap();
        prop_assert!(check.first_contact && check.height_certificate && check.certificates_agree);
        prop_assert!(rel(check.height, check.contact_height) < 1e-8);
    }

    #[test]
    fn scaling_every_cusp(k in 0usize..4, c in coords(), s in any::<u64>(), t in any::<u64>()) {
        let m = model_of(if k == 2 { 3 } else { k });
        let one = HeightParams::default();
        let two = HeightParams::uniform(2.0);
        let z = point(m.kind, &c);
        let a = retract_map(&m, &one, &z, 1.0, TOL).unwrap();
        let b = retract_map(&m, &two, &z, 1.0, TOL).unwrap();
        prop_assert_eq!(a.active.cusps, b.active.cusps);
        let (c1, c2) = (cusp_from(&m, s, 3), cusp_from(&m, t, 2));
        prop_assume!(c1 != c2);
        let h1 = first_contact_pair(&m, &one, &c1, &c2).unwrap().0;
        let h2 = first_contact_pair(&m, &two, &c1, &c2).unwrap().0;
        prop_assert!(rel(h2, 2.0 * h1) < 1e-12);
    }
}

#[test]
fn height_maximum_is_bounded_below_on_the_fundamental_domain() {
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    let m = Model::modular();
    let p = HeightParams::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(52);
    let mut least = f64::INFINITY;
    let mut at = (0.0, 0.0);
    for _ in 0..10_000 {
        let x: f64 = rng.gen_range(-0.5..0.5);
        let lo = (1.0 - x * x).sqrt();
        let y = rng.gen_range(lo..lo + 2.0);
        let top = ranked_cusps(&m, &p, &ModelPoint::h2(x, y), TOL)[0].1;
        if top < least {
            least = top;
            at = (x, y);
        }
    }
    let corner = 3f64.sqrt() / 2.0;
    assert!(least >= corner - 1e-6, "max height {least} at {at:?}");
    assert!(least < corner + 0.05 && (at.0.abs() - 0.5).abs() < 0.1, "minimum {least} far from the corner at {at:?}");
}

#[test]
fn boundary_flow_points_inward_at_vertices() {
    let cases: Vec<(Model, Vec<&str>, ModelPoint)> = vec![
        (Model::modular(), vec!["inf", "0", "1"], ModelPoint::h2(0.4, 0.9)),
        (Model::bianchi(-1).unwrap(), vec!["inf", "0", "1", "i"], ModelPoint::h3(0.45, 0.45, 0.75)),
        (Model::hilbert(2).unwrap(), vec!["inf", "0", "1", "sqrt(2)", "1/sqrt(2)"], ModelPoint::hh(0.5, 0.6, 0.3, 0.6)),
    ];
    let p = HeightParams::default();
    for (m, names, seed) in cases {
        let cs: Vec<Cusp> = names.iter().map(|s| Cusp::parse(s, m.d()).unwrap()).collect();
        let ts = solve_tie(&m, &p, &cs, &seed, 1e-10).unwrap();
        let w = ts.witness;
        let grads: Vec<Vec<f64>> = ts.cusps.iter().map(|c| orthonormal(&w, &riem_gradient(&m, &p, c, &w).unwrap())).collect();
        let mut checked = 0;
        // each cusp leaving the tie plays the outside role against every
        // small enough subset of the rest
        let n = grads.len();
        for out in 0..n {
            for mask in 1u32..(1 << n) {
                if mask & (1 << out) != 0 || mask.count_ones() as usize > m.dim() {
                    continue;
                }
                let rest: Vec<Vec<f64>> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| grads[i].clone()).collect();
                if let Ok(chk) = boundary_projection_check(&VectorConfig::new(rest), &grads[out]) {
                    assert!(chk.holds, "{:?} without {}: margins {:?}", names, ts.cusps[out], chk.margins);
                    checked += 1;
                }
            }
        }
        assert!(checked > 0, "no configuration met the hypotheses for {names:?}");
    }
}
