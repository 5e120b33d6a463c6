use std::collections::HashMap;
use std::sync::OnceLock;

use proptest::prelude::*;

use spinekit::complex::{
    build_incidence, classify_orbit, discover_cells, explore_from, incidence_table, locate_crossing, verify_cover,
    Region, SpineComplex, TableEntry,
};
use spinekit::cusp::{act_cusp, normalize_cusp, random_group_element, Cusp, GroupElement};
use spinekit::field::QuadElem;
use spinekit::heights::{act_point, height_eval, HeightParams, Model, ModelPoint};
use spinekit::spine::{active_set, ranked_cusps, solve_tie, tie_locus_dim, TieSet, DEFAULT_TIE_TOL};

const TOL: f64 = DEFAULT_TIE_TOL;

fn cusps(list: &[&str], d: i64) -> Vec<Cusp> {
    list.iter().map(|s| Cusp::parse(s, d).unwrap()).collect()
}

fn solved(m: &Model, list: &[&str], seed: ModelPoint) -> TieSet {
    solve_tie(m, &HeightParams::default(), &cusps(list, m.d()), &seed, 1e-10).unwrap()
}

fn modular() -> &'static SpineComplex {
    static CX: OnceLock<SpineComplex> = OnceLock::new();
    CX.get_or_init(|| {
        let m = Model::modular();
        let p = HeightParams::default();
        let cx = discover_cells(&m, &p, &Region::default_for(&m), 64, TOL).unwrap();
        build_incidence(&cx, TOL)
    })
}

fn gaussian() -> &'static SpineComplex {
    static CX: OnceLock<SpineComplex> = OnceLock::new();
    CX.get_or_init(|| {
        let m = Model::bianchi(-1).unwrap();
        let p = HeightParams::default();
        let cx = discover_cells(&m, &p, &Region::default_for(&m), 32, TOL).unwrap();
        build_incidence(&cx, TOL)
    })
}

const L5: [&str; 5] = ["inf", "0", "1", "sqrt(2)", "1/sqrt(2)"];

fn hilbert() -> &'static SpineComplex {
    static CX: OnceLock<SpineComplex> = OnceLock::new();
    CX.get_or_init(|| {
        let m = Model::hilbert(2).unwrap();
        let p = HeightParams::default();
        let v = solved(&m, &L5, ModelPoint::hh(0.5, 0.6, 0.3, 0.6));
        build_incidence(&explore_from(&m, &p, &[v], TOL), TOL)
    })
}

fn all_complexes() -> [&'static SpineComplex; 3] {
    [modular(), gaussian(), hilbert()]
}

fn moved(g: &GroupElement, ts: &TieSet) -> TieSet {
    let cs: Vec<Cusp> = ts.cusps.iter().map(|c| act_cusp(g, c)).collect();
    TieSet::at_point(&HeightParams::default(), &cs, &act_point(g, &ts.witness))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn orbit_labels_are_invariant(which in 0usize..3, pick in any::<prop::sample::Index>(), seed in any::<u64>(), len in 1usize..7) {
        let cx = all_complexes()[which];
        let cell = &cx.cells[pick.index(cx.cells.len())];
        let g = random_group_element(&cx.model.field, len, seed);
        let label = classify_orbit(&cx.model, &moved(&g, &cell.tie)).unwrap();
        prop_assert_eq!(&label, &cell.orbit);
    }
}

#[test]
fn modular_spine_has_one_vertex_and_one_edge_orbit() {
    let cx = modular();
    let labels: Vec<String> = cx.orbits().iter().map(|l| l.key()).collect();
    assert_eq!(labels, ["{inf, 0/1}", "{inf, -1/1, 0/1}"]);
    for c in &cx.cells {
        match c.dim {
            0 => assert_eq!(c.coboundary_ids.len(), 3, "vertex {:?}", c.tie.cusp_strings()),
            1 => assert!(c.boundary_ids.len() <= 2),
            d => panic!("unexpected dimension {d}"),
        }
    }
    let table = incidence_table(cx).unwrap();
    let vertex = &cx.orbits_of_dim(0)[0];
    let edge = &cx.orbits_of_dim(1)[0];
    assert_eq!(table.get(vertex, edge), Some(TableEntry::Count(2)));
    assert_eq!(table.get(edge, vertex), Some(TableEntry::Count(3)));
}

#[test]
fn gaussian_vertex_class_is_found() {
    let cx = gaussian();
    let m = &cx.model;
    let v = solved(m, &["inf", "0", "1", "i"], ModelPoint::h3(0.45, 0.45, 0.75));
    let label = classify_orbit(m, &v).unwrap();
    assert!(cx.orbits_of_dim(0).contains(&label), "{label} not among {:?}", cx.orbits_of_dim(0));
    let rep = cx.representative(&label).unwrap();
    assert!((rep.tie.height - 0.5f64.sqrt()).abs() < 1e-9);
}

#[test]
fn gaussian_cover_is_complete() {
    let cx = gaussian();
    let rep = verify_cover(&cx.model, &cx.params, cx, 1000, 3);
    assert_eq!(rep.matched, 1000, "unmatched {:?}", rep.unmatched_labels);
}

#[test]
fn boundaries_raise_order_and_lower_dimension() {
    for cx in all_complexes() {
        let by_id: HashMap<usize, _> = cx.cells.iter().map(|c| (c.id, c)).collect();
        for c in &cx.cells {
            for b in &c.boundary_ids {
                let f = by_id[b];
                assert!(f.tie.order() > c.tie.order() && f.dim < c.dim, "{:?} in {:?}", f.tie.cusp_strings(), c.tie.cusp_strings());
                assert!(c.tie.cusps.iter().all(|q| f.tie.contains(q)));
                assert!(f.coboundary_ids.contains(&c.id));
            }
        }
    }
}

#[test]
fn dimension_follows_order() {
    for cx in all_complexes() {
        let dim = cx.model.dim();
        for c in cx.cells.iter().filter(|c| c.tie.order() <= 3) {
            assert_eq!(c.dim, dim + 1 - c.tie.order(), "{:?}", c.tie.cusp_strings());
        }
    }
    // every configuration around the Hilbert vertex has codimension order - 1
    let cx = hilbert();
    for c in &cx.cells {
        let codim = 4 - tie_locus_dim(&cx.model, &cx.params, &c.tie).unwrap();
        if c.tie.order() <= 5 && c.dim > 0 {
            assert_eq!(codim, c.tie.order() - 1, "{:?}", c.tie.cusp_strings());
        }
    }
    let named: [&[&str]; 7] = [
        &["inf", "0"],
        &["inf", "1/sqrt(2)"],
        &["inf", "0", "1"],
        &["inf", "0", "1/sqrt(2)"],
        &["inf", "0", "1", "1/sqrt(2)"],
        &["inf", "0", "sqrt(2)", "1/sqrt(2)"],
        &L5,
    ];
    for s in named {
        let c = cx.find(&cusps(s, 2)).unwrap_or_else(|| panic!("{s:?} missing"));
        assert_eq!(c.dim, 5 - s.len(), "{s:?}");
    }
}

#[test]
fn crossing_segments_meet_transversally() {
    let cx = hilbert();
    let cell = cx.find(&cusps(&["inf", "0", "sqrt(2)", "1/sqrt(2)"], 2)).unwrap();
    let x = locate_crossing(&cx.model, &cx.params, &cell.tie, TOL).expect("no crossing found");
    assert!(x.angle > 0.3 && x.angle < std::f64::consts::PI - 0.3, "angle {}", x.angle);
    assert!(x.conditioning < 1e-4, "conditioning {}", x.conditioning);
    let dot: f64 = x.branches[0].iter().zip(&x.branches[1]).map(|(a, b)| a * b).sum();
    assert!(dot.abs() < 0.99);
    let at = active_set(&cx.model, &cx.params, &x.point, 1e-7);
    assert_eq!(at.cusps, cell.tie.cusps);
    // the ordinary segment has no crossing
    let plain = cx.find(&cusps(&["inf", "0", "1", "1/sqrt(2)"], 2)).unwrap();
    assert!(locate_crossing(&cx.model, &cx.params, &plain.tie, TOL).is_none());
}

#[test]
fn tubes_are_invariant_under_unit_translations() {
    let cx = hilbert();
    let m = &cx.model;
    let eps = m.field.fundamental_unit.clone().unwrap();
    let tubes: Vec<_> = cx.cells.iter().filter(|c| c.tie.order() == 2).collect();
    assert!(!tubes.is_empty());
    for c in tubes {
        assert!(!c.compact, "{:?}", c.tie.cusp_strings());
        // move the first cusp to infinity and look for a unit element fixing the pair
        let inf = Cusp::infinity(2);
        let to_inf = spinekit::cusp::moving_element(&c.tie.cusps[0]);
        let back = to_inf.inverse();
        let other = act_cusp(&back, &c.tie.cusps[1]);
        let x = other.value().unwrap();
        let mut found = None;
        let mut u = eps.clone();
        for _ in 0..48 {
            let shift = &x * &(&u.inverse().unwrap() - &u);
            if shift.is_integral() {
                found = Some(GroupElement::new(u.clone(), shift, QuadElem::zero(2), u.inverse().unwrap()).unwrap());
                break;
            }
            u = &u * &eps;
        }
        let h = found.unwrap_or_else(|| panic!("no unit direction for {:?}", c.tie.cusp_strings()));
        assert_eq!(act_cusp(&h, &inf), inf);
        assert_eq!(act_cusp(&h, &other), other);
        let g = to_inf.mul(&h).mul(&back);
        let w = act_point(&g, &c.tie.witness);
        for q in &c.tie.cusps {
            let a = height_eval(m, &cx.params, q, &c.tie.witness).unwrap();
            let b = height_eval(m, &cx.params, q, &w).unwrap();
            assert!((a / b - 1.0).abs() < 1e-9);
        }
        assert!(w.coord_dist(&c.tie.witness) > 1e-3, "unit element acts trivially");
    }
    assert!(cx.cells.iter().filter(|c| c.tie.order() > 2).all(|c| c.compact));
}

/// Every cusp `p/q` of Z or Z[i] with small numerator and denominator.
fn brute_cusps(d: i64, r: i64) -> Vec<Cusp> {
    let mut out = vec![Cusp::infinity(d)];
    let im = if d == 0 { 0 } else { r };
    for qa in -r..=r {
        for qb in -im..=im {
            for pa in -3 * r..=3 * r {
                for pb in -3 * im..=3 * im {
                    let q = QuadElem::from_integer_coords(d, qa, qb);
                    if q.is_zero() {
                        continue;
                    }
                    if let Ok(c) = normalize_cusp(&QuadElem::from_integer_coords(d, pa, pb), &q) {
                        out.push(c);
                    }
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

#[test]
fn enumeration_matches_brute_force() {
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    for (m, r) in [(Model::modular(), 8), (Model::bianchi(-1).unwrap(), 4)] {
        let all = brute_cusps(m.d(), r);
        let p = HeightParams::default();
        for _ in 0..200 {
            let z = match m.d() {
                0 => ModelPoint::h2(rng.gen_range(-0.5..0.5), rng.gen_range(0.45..2.0)),
                _ => ModelPoint::h3(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(0.5..2.0)),
            };
            let mut hs: Vec<(f64, &Cusp)> = all.iter().map(|c| (height_eval(&m, &p, c, &z).unwrap(), c)).collect();
            hs.sort_by(|a, b| b.0.total_cmp(&a.0));
            let ranked = ranked_cusps(&m, &p, &z, TOL);
            assert!((ranked[0].1 / hs[0].0 - 1.0).abs() < 1e-12, "top height at {:?}", z.coords());
            let tied: Vec<&Cusp> = hs.iter().take_while(|(h, _)| *h >= hs[0].0 * (1.0 - TOL)).map(|(_, c)| *c).collect();
            for c in tied {
                assert!(ranked.iter().any(|(q, _)| q == c), "{c} missing at {:?}", z.coords());
            }
        }
    }
}

#[test]
fn empty_inputs_give_empty_outputs() {
    let m = Model::modular();
    let p = HeightParams::default();
    let empty = build_incidence(&SpineComplex::empty(&m, &p, Region::default_for(&m), TOL), TOL);
    let table = incidence_table(&empty).unwrap();
    assert!(table.labels.is_empty() && table.entries.is_empty());
    let rep = verify_cover(&m, &p, modular(), 0, 1);
    assert_eq!((rep.samples, rep.matched), (0, 0));
    assert!(rep.unmatched_labels.is_empty());
}

#[test]
fn incidence_needs_to_be_built() {
    let m = Model::modular();
    let p = HeightParams::default();
    let cx = discover_cells(&m, &p, &Region::default_for(&m), 4, TOL).unwrap();
    assert!(incidence_table(&cx).is_err());
}
