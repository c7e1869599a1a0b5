mod common;

use metldpc::check_design::{design_checks, four_edge_groups};
use metldpc::data::REFERENCES;
use metldpc::density_evolution::{bec_de_step, threshold, ChannelKind, DeConfig};
use metldpc::optimizer_ar::{CoefficientProblem, CANDIDATE_TOL};
use metldpc::template::parse_template;
use metldpc::{CheckClass, Ensemble, VariableClass};
use proptest::prelude::*;

use common::{random_single_type, read_data};

fn problem(name: &str, rate: f64) -> CoefficientProblem {
    let t = parse_template(&read_data(&format!("templates/{name}"))).unwrap();
    CoefficientProblem::new(t.structure().unwrap(), rate, ChannelKind::Bec, DeConfig::default())
        .unwrap()
}

/// Feasible four-edge-type ensembles from the two reference structures with
/// random coefficients.
fn arb_designed() -> impl Strategy<Value = Ensemble> {
    let half = prop::collection::vec(0.0..1.0f64, 3).prop_filter_map("infeasible", |x| {
        problem("ref_half.tpl", 0.5).ensemble(&x).ok()
    });
    let tenth = prop::collection::vec(0.0..0.3f64, 2).prop_filter_map("infeasible", |x| {
        problem("ref_tenth.tpl", 0.1).ensemble(&x).ok()
    });
    prop_oneof![half, tenth]
}

fn arb_any() -> impl Strategy<Value = Ensemble> {
    prop_oneof![
        arb_designed(),
        (0..REFERENCES.len()).prop_map(|k| REFERENCES[k].ensemble()),
        (0..1000u64).prop_map(|s| random_single_type(s).0),
    ]
}

fn permuted(e: &Ensemble, vrot: usize, crot: usize) -> Ensemble {
    let mut v: Vec<VariableClass> = e.var_classes().to_vec();
    let mut c: Vec<CheckClass> = e.chk_classes().to_vec();
    v.reverse();
    c.reverse();
    let (nv, nc) = (v.len(), c.len());
    v.rotate_left(vrot % nv);
    c.rotate_left(crot % nc);
    Ensemble::new(e.edge_types(), v, c, e.design_rate()).unwrap()
}

fn point(me: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.1..0.9f64, me)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn socket_derivatives_match_at_ones(e in arb_any()) {
        let ones = vec![1.0; e.edge_types()];
        for i in 0..e.edge_types() {
            let l = e.deriv_l(i, &[1.0, 1.0], &ones).unwrap();
            let r = e.deriv_r(i, &ones).unwrap();
            prop_assert!((l - r).abs() <= 1e-4, "type {i}: {l} vs {r}");
        }
    }

    #[test]
    fn derivatives_match_finite_differences(
        e in arb_any(),
        seed in point(4),
        r1 in 0.0..1.0f64,
    ) {
        let me = e.edge_types();
        let x: Vec<f64> = seed[..me].to_vec();
        let r = [1.0, r1];
        let h = 1e-5;
        for i in 0..me {
            let (mut up, mut dn) = (x.clone(), x.clone());
            up[i] += h;
            dn[i] -= h;
            let fd_l = (e.eval_l(&r, &up).unwrap() - e.eval_l(&r, &dn).unwrap()) / (2.0 * h);
            let fd_r = (e.eval_r(&up).unwrap() - e.eval_r(&dn).unwrap()) / (2.0 * h);
            prop_assert!((e.deriv_l(i, &r, &x).unwrap() - fd_l).abs() <= 1e-6);
            prop_assert!((e.deriv_r(i, &x).unwrap() - fd_r).abs() <= 1e-6);
        }
    }

    #[test]
    fn polynomials_are_monotone(e in arb_any(), x in point(4), i in 0..4usize, dx in 0.0..0.1f64) {
        let me = e.edge_types();
        let i = i % me;
        let x: Vec<f64> = x[..me].to_vec();
        let mut y = x.clone();
        y[i] += dx;
        prop_assert!(e.eval_l(&[1.0, 1.0], &y).unwrap() >= e.eval_l(&[1.0, 1.0], &x).unwrap());
        prop_assert!(e.eval_r(&y).unwrap() >= e.eval_r(&x).unwrap());
    }

    #[test]
    fn rate_ignores_class_order(e in arb_any(), a in 0..8usize, b in 0..8usize) {
        prop_assert!((permuted(&e, a, b).code_rate() - e.code_rate()).abs() <= 1e-12);
    }

    #[test]
    fn designed_checks_satisfy_constraints(e in arb_designed()) {
        let report = e.validate(1e-9);
        prop_assert!(report.is_ok(), "{report}");
    }

    #[test]
    fn designed_checks_are_concentrated(e in arb_designed()) {
        for g in four_edge_groups() {
            let classes: Vec<&CheckClass> = e
                .chk_classes()
                .iter()
                .filter(|c| g.edge_types().any(|t| c.degrees.get(t) > 0))
                .collect();
            prop_assert!(classes.len() <= 3);
            for t in g.edge_types() {
                let ds: Vec<u32> = classes.iter().map(|c| c.degrees.get(t)).collect();
                let (lo, hi) = (ds.iter().min().unwrap(), ds.iter().max().unwrap());
                prop_assert!(hi - lo <= 1, "type {t} degrees {ds:?}");
            }
        }
    }

    #[test]
    fn design_is_deterministic(e in arb_designed()) {
        let a = design_checks(e.var_classes(), 4, e.design_rate(), &four_edge_groups()).unwrap();
        let b = design_checks(e.var_classes(), 4, e.design_rate(), &four_edge_groups()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn candidates_pass_strict_validation(x in prop::collection::vec(0.0..1.0f64, 3)) {
        if let Ok(e) = problem("ref_half.tpl", 0.5).ensemble(&x) {
            prop_assert!(e.validate(CANDIDATE_TOL).is_ok());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bec_probes_are_monotone(e in arb_any()) {
        let th = threshold(&e, ChannelKind::Bec, &DeConfig::default()).unwrap();
        let good = th.probes.iter().filter(|p| p.decodable).map(|p| p.param).fold(f64::NEG_INFINITY, f64::max);
        let bad = th.probes.iter().filter(|p| !p.decodable).map(|p| p.param).fold(f64::INFINITY, f64::min);
        prop_assert!(good < bad, "decodable at {good} but not at {bad}");
        prop_assert!(th.lower <= th.threshold && th.threshold <= th.upper);
    }

    #[test]
    fn bec_trajectory_never_increases(e in arb_any(), eps in 0.0..1.0f64) {
        let mut x = bec_de_step(&e, eps, &vec![1.0; e.edge_types()]);
        for _ in 0..60 {
            let next = bec_de_step(&e, eps, &x);
            for (a, b) in next.iter().zip(&x) {
                prop_assert!(*a <= b + 1e-15, "{a} > {b}");
            }
            x = next;
        }
    }

    #[test]
    fn thresholds_ignore_class_order(e in arb_any(), a in 0..8usize, b in 0..8usize) {
        let de = DeConfig::default();
        for kind in [ChannelKind::Bec, ChannelKind::BiAwgn] {
            let t1 = threshold(&e, kind, &de).unwrap().threshold;
            let t2 = threshold(&permuted(&e, a, b), kind, &de).unwrap().threshold;
            prop_assert!((t1 - t2).abs() <= de.bisect_tol(kind), "{kind}: {t1} vs {t2}");
        }
    }
}
