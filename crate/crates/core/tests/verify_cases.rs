//! Report-level invariants of the verification harness and the worked
//! examples behind individual cases.

use rikit_core::operators::{pair_h, pair_r};
use rikit_core::report::{summary_csv, to_json};
use rikit_core::verify::{
    default_params, honsimple_sides, iteration_h_sides, paper_constant, run_all, run_case, CaseId, IterationHConfig,
    Report, RunOptions, Verdict,
};
use rikit_core::{par, Bijection, Error, OperatorSpec, SpaceSpec, StepFunction, Weight};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::sync::OnceLock;

fn all() -> &'static [Report] {
    static R: OnceLock<Vec<Report>> = OnceLock::new();
    R.get_or_init(|| run_all(&RunOptions::default()).unwrap())
}

fn chi(len: f64, a: f64, b: f64) -> StepFunction {
    StepFunction::indicator(len, a, b, 1.0).unwrap()
}

fn as_f64(v: &Value) -> f64 {
    match v {
        Value::Number(n) => n.as_f64().unwrap(),
        Value::String(s) if s == "inf" => f64::INFINITY,
        Value::String(s) if s == "-inf" => f64::NEG_INFINITY,
        other => panic!("not a number: {other}"),
    }
}

#[test]
fn every_default_case_passes() {
    for r in all() {
        assert_eq!(r.verdict, Verdict::Pass, "{}: {:?}", r.case_id, r.notes);
        assert_eq!(r.schema_version, 1);
        assert!(r.n_samples > 0);
    }
    let ids: Vec<CaseId> = all().iter().map(|r| r.case_id).collect();
    assert_eq!(ids, CaseId::ALL.to_vec());
}

#[test]
fn paper_constants_recompute_from_json() {
    let mut seen = 0;
    for r in all() {
        let v: Value = serde_json::from_str(&to_json(r)).unwrap();
        for c in v["constants"].as_array().unwrap() {
            if c["provenance"] != "paper-derived" {
                assert_eq!(c["provenance"], "empirical");
                continue;
            }
            let inputs: BTreeMap<String, f64> =
                c["inputs"].as_object().unwrap().iter().map(|(k, x)| (k.clone(), as_f64(x))).collect();
            let again = paper_constant(c["formula"].as_str().unwrap(), &inputs).unwrap();
            let stored = as_f64(&c["value"]);
            assert!(again == stored || (again.is_nan() && stored.is_nan()), "{}: {again} vs {stored}", c["name"]);
            seen += 1;
        }
    }
    assert!(seen > 10, "only {seen} paper-derived constants");
}

#[test]
fn pass_means_every_ratio_in_band() {
    for r in all().iter().filter(|r| r.verdict == Verdict::Pass) {
        for c in &r.checks {
            for x in [c.min_ratio, c.max_ratio, c.worst_ratio].into_iter().flatten() {
                assert!(c.band.contains(x), "{} / {}: {x} outside {:?}", r.case_id, c.name, c.band);
            }
            assert_eq!(c.n_violations, 0);
            assert!(c.violations.is_empty());
        }
    }
}

#[test]
fn failed_hypothesis_is_not_applicable() {
    let o = RunOptions::default();
    // v = s^{-1.2} is not averaging: the bracket constant C does not exist.
    let r = run_case(CaseId::Honsimple, Some(&json!({"betas": [1.2]})), &o).unwrap();
    assert_eq!(r.verdict, Verdict::NotApplicable);
    assert!(r.hypotheses.iter().any(|h| !h.holds));
    // xi not in X: H has no optimal domain, the collapse case cannot run.
    let p = json!({"configs": [{"u_exp": 0.0, "alpha": 1.0, "space": {"kind": "lebesgue", "p": "inf"}}]});
    let r = run_case(CaseId::WhenRNonincreasing, Some(&p), &o).unwrap();
    assert_ne!(r.verdict, Verdict::Pass);
}

#[test]
fn invalid_params_are_rejected() {
    let o = RunOptions::default();
    for (id, p) in [
        (CaseId::DualityIdentity, json!({"samples": 3})),
        (CaseId::Honsimple, json!({"betas": "0.5"})),
        (CaseId::KFormula, json!([1, 2])),
    ] {
        match run_case(id, Some(&p), &o) {
            Err(Error::InvalidSpec(_)) => {}
            other => panic!("{id}: expected an invalid-spec error, got {other:?}"),
        }
    }
    assert!("no-such-case".parse::<CaseId>().is_err());
    assert_eq!("ITERATION-r".parse::<CaseId>().unwrap(), CaseId::IterationR);
}

#[test]
fn default_params_round_trip() {
    let o = RunOptions::default();
    for id in [CaseId::DualityIdentity, CaseId::KFormula, CaseId::IterationH] {
        let p = default_params(id);
        let a = run_case(id, Some(&p), &o).unwrap();
        let b = all().iter().find(|r| r.case_id == id).unwrap();
        assert_eq!(to_json(&a), to_json(b));
    }
}

#[test]
fn seed_and_worker_count() {
    let a = RunOptions::default();
    let b = RunOptions { seed: a.seed + 1, ..a.clone() };
    let ra = run_case(CaseId::DualityIdentity, None, &a).unwrap();
    let rb = run_case(CaseId::DualityIdentity, None, &b).unwrap();
    assert_ne!(to_json(&ra), to_json(&rb));
    assert_eq!(rb.verdict, Verdict::Pass);
    let r1 = par::with_jobs(Some(1), || run_case(CaseId::Axioms, None, &a)).unwrap();
    let r2 = par::with_jobs(Some(3), || run_case(CaseId::Axioms, None, &a)).unwrap();
    assert_eq!(to_json(&r1), to_json(&r2));
}

#[test]
fn tolerance_override_tightens_bands() {
    let o = RunOptions { tol_rel: Some(0.0), ..RunOptions::default() };
    let r = run_case(CaseId::DualityIdentity, None, &o).unwrap();
    assert_eq!(r.checks[0].band.upper, 0.0);
    // Round-off of order 1e-14 now counts as a violation.
    assert_eq!(r.verdict, Verdict::Fail);
    assert!(r.checks[0].violations.len() <= 10);
    assert!(r.checks[0].violations.iter().all(|v| !v.witness.is_null()));
}

#[test]
fn csv_has_one_row_per_check() {
    let csv = summary_csv(all());
    let rows = csv.lines().count() - 1;
    assert_eq!(rows, all().iter().map(|r| r.checks.len()).sum::<usize>());
}

// ---------------------------------------------------------------- worked examples

#[test]
fn duality_closed_form() {
    // R chi_(0,2) = t on (0,2), so \int chi_(0,1) R g = 1/2; H chi_(0,1) = (1-t)_+.
    let one = Weight::constant(1.0);
    let spec = OperatorSpec::r(one.clone(), one.clone(), Bijection::identity(), 2.0);
    let hspec = OperatorSpec::h(one.clone(), one, Bijection::identity(), 2.0);
    let (f, g) = (chi(2.0, 0.0, 1.0), chi(2.0, 0.0, 2.0));
    assert!((pair_r(&spec, &f, &g).unwrap() - 0.5).abs() < 1e-15);
    assert!((pair_h(&hspec, &g, &f).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn honsimple_closed_form() {
    // LHS = sup_t \int_t^1 s^{-1/2} = 2; RHS = a c v(a) = 1. Band [1/4, 2].
    let (l, r) = honsimple_sides(
        &SpaceSpec::lebesgue(f64::INFINITY),
        &Weight::constant(1.0),
        &Weight::power(1.0, -0.5),
        &Bijection::identity(),
        1.0,
        &[(1.0, 1.0)],
    )
    .unwrap();
    assert!((l - 2.0).abs() < 1e-9 && (r - 1.0).abs() < 1e-12, "{l} {r}");
    assert!((0.25..=2.0).contains(&(l / r)));
}

#[test]
fn iteration_h_closed_form() {
    // H2 chi = 1 - s; \int_0^1 (1 - s) s^{-1/2} = 4/3. v(t) = t^{1/2}: \int_0^1 = 2/3.
    let c = IterationHConfig { u1_exp: 0.0, v1_exp: -0.5, alpha1: 1.0, u2_exp: 0.0, v2_exp: 0.0, alpha2: 1.0 };
    let (l, r) = iteration_h_sides(&c, &SpaceSpec::lebesgue(f64::INFINITY), 1.0, &chi(1.0, 0.0, 1.0)).unwrap();
    assert!((l - 4.0 / 3.0).abs() < 1e-8, "{l}");
    assert!((r - 2.0 / 3.0).abs() < 1e-10, "{r}");
}

#[test]
fn restricted_example_within_proof_factor() {
    let r = all().iter().find(|r| r.case_id == CaseId::RestrictedUnrestricted).unwrap();
    let c = r.check("config 0: unrestricted / restricted").unwrap();
    // u = 1, v = s^{-1/2} (averaging constant 2), nu = t^2 on L^inf.
    assert!(c.band.upper <= 4.0 * 2.0 * (1.0 + 1e-12), "{:?}", c.band);
    assert!(c.worst_ratio.unwrap() <= c.band.upper);
}

#[test]
fn norm_duality_constant_two() {
    let r = all().iter().find(|r| r.case_id == CaseId::NormDuality).unwrap();
    for name in ["R estimate / 2", "H estimate / 2"] {
        let c = r.check(name).unwrap();
        let x = c.max_ratio.unwrap();
        assert!(x >= 0.95 && 2.0 * x <= 2.001, "{name}: {x}");
    }
}
