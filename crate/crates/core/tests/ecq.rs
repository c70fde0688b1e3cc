mod common;

use ecq::ecq::{
    detect_conflict, pareto_front, score_runs, select_policy, summarize, BoxStats, EcqError, EcqResult,
    ScoreMatrix, ScoreRow, ValueProfile,
};
use ecq::engine;
use ecq::{Policy, ValueModel};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::statistics::{Data, Distribution, Median, OrderStatistics};

/// A result whose per-policy means are exactly the given points.
fn from_means(dims: &[&str], points: &[(Policy, Vec<f64>)]) -> EcqResult {
    let rows = points
        .iter()
        .map(|(p, v)| ScoreRow { policy: *p, run_id: p.slug(), scores: v.iter().copied().map(Some).collect() })
        .collect();
    summarize(&ScoreMatrix { dimensions: dims.iter().map(|d| d.to_string()).collect(), rows }).unwrap()
}

const A: Policy = Policy::Watch(0);
const B: Policy = Policy::Watch(1);
const C: Policy = Policy::Watch(2);

#[test]
fn pareto_examples() {
    let r = from_means(&["s", "f"], &[(A, vec![0.1, 0.5]), (B, vec![0.3, 0.2]), (C, vec![0.35, 0.4])]);
    assert_eq!(pareto_front(&r, &["s", "f"]).unwrap(), vec![A, B]);
    assert_eq!(pareto_front(&r, &["f"]).unwrap(), vec![B]);
    let same = from_means(&["s"], &[(A, vec![0.2]), (B, vec![0.2]), (C, vec![0.2])]);
    assert_eq!(pareto_front(&same, &["s"]).unwrap(), vec![A, B, C]);
    assert!(matches!(pareto_front(&r, &["x"]), Err(EcqError::UnknownDimension(_))));
}

#[test]
fn conflict_examples() {
    let r = from_means(&["safety", "fairness"], &[(A, vec![0.1, 0.5]), (B, vec![0.2, 0.3]), (C, vec![0.3, 0.1])]);
    let c = detect_conflict(&r, "safety", "fairness").unwrap();
    assert_eq!((c.rho, c.conflicting, c.undefined), (Some(-1.0), true, false));
    let s = detect_conflict(&r, "safety", "safety").unwrap();
    assert_eq!((s.rho, s.conflicting), (Some(1.0), false));
    let flat = from_means(&["s", "f"], &[(A, vec![0.1, 0.4]), (B, vec![0.2, 0.4]), (C, vec![0.3, 0.4])]);
    let u = detect_conflict(&flat, "s", "f").unwrap();
    assert_eq!((u.rho, u.conflicting, u.undefined), (None, false, true));
    let two = r.subset(&[A, B]);
    assert!(matches!(detect_conflict(&two, "safety", "fairness"), Err(EcqError::TooFewPolicies(2))));
}

#[test]
fn selection_examples() {
    let r = from_means(&["safety_refined", "fairness"], &[(A, vec![0.05, 0.9]), (Policy::Watch(5), vec![0.15, 0.1])]);
    let safety_only = ValueProfile::new("safety", [("safety_refined", 1.0), ("fairness", 0.0)]).unwrap();
    assert_eq!(select_policy(&r, &safety_only).unwrap().0, A);

    let r = from_means(&["s", "f"], &[(A, vec![0.1, 0.5]), (B, vec![0.3, 0.2])]);
    let uniform = ValueProfile::new("uniform", [("s", 1.0), ("f", 1.0)]).unwrap();
    let (p, score) = select_policy(&r, &uniform).unwrap();
    assert_eq!(p, B);
    assert!((score - 0.25).abs() < 1e-12);

    let tie = from_means(&["s"], &[(C, vec![0.2]), (A, vec![0.2])]);
    let one = ValueProfile::new("one", [("s", 1.0)]).unwrap();
    assert_eq!(select_policy(&tie, &one).unwrap().0, C);

    let missing = ValueProfile::new("x", [("nope", 1.0)]).unwrap();
    assert!(matches!(select_policy(&r, &missing), Err(EcqError::UnknownDimension(_))));
    assert!(ValueProfile::new("bad", [("s", -1.0)]).is_err());
    assert!(ValueProfile::new("zero", [("s", 0.0)]).is_err());
}

#[test]
fn uniform_quantile_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let xs: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
    let b = BoxStats::from_scores(&xs.iter().copied().map(Some).collect::<Vec<_>>());
    assert!((b.median - 0.5).abs() <= 0.02);
    assert!((b.q3 - b.q1 - 0.5).abs() <= 0.03);
    // agreement with an independent implementation
    let mut data = Data::new(xs.clone());
    assert!((b.mean - data.mean().unwrap()).abs() < 1e-12);
    assert_eq!(b.median, data.median());
    assert!((b.q1 - data.lower_quartile()).abs() < 1e-3);
}

#[test]
fn shape_contract_and_missing_nurse() {
    let cfg = common::inline_config(common::CORRIDOR, "A", "B", 0.3, serde_json::json!({}));
    let runs = engine::batch(&cfg, &[Policy::NoHelp, Policy::Watch(0)], 903, 1, None).unwrap();
    let m = score_runs(&runs, &cfg.plan, &ValueModel::default_model()).unwrap();
    assert_eq!(m.rows.len(), 1806);
    assert_eq!(m.dimensions, vec!["safety_original", "safety_refined", "fairness"]);
    // no nurse configured: nurse time is zero, fairness undefined everywhere
    assert!(m.rows.iter().all(|r| r.scores[2].is_none()));
    assert_eq!(m.undefined_count(), 1806);
    let s = summarize(&m).unwrap();
    let f = s.stats_for(Policy::NoHelp, "fairness").unwrap();
    assert_eq!((f.n, f.excluded_undefined), (0, 903));
    assert!(matches!(summarize(&ScoreMatrix { dimensions: vec![], rows: vec![] }), Err(EcqError::EmptyMatrix)));
}

#[test]
fn rescoring_needs_no_simulation() {
    let cfg = common::ward_config();
    let runs = engine::batch(&cfg, &[Policy::NurseOnly, Policy::Watch(2)], 20, 3, None).unwrap();
    let logs: Vec<String> = runs.iter().map(|p| p.to_log()).collect();
    let base = score_runs(&runs, &cfg.plan, &ValueModel::default_model()).unwrap();
    let ext = score_runs(&runs, &cfg.plan, &ValueModel::extended_model()).unwrap();
    assert_eq!(ext.dimensions.len(), 4);
    for (b, e) in base.rows.iter().zip(&ext.rows) {
        assert_eq!(b.scores[..], e.scores[..3]);
    }
    let after: Vec<String> = runs.iter().map(|p| p.to_log()).collect();
    assert_eq!(logs, after);
}

#[test]
fn duplicate_runs_are_rejected() {
    let cfg = common::ward_config();
    let mut runs = engine::batch(&cfg, &[Policy::NoHelp], 2, 3, None).unwrap();
    runs.push(runs[0].clone());
    assert!(matches!(
        score_runs(&runs, &cfg.plan, &ValueModel::default_model()),
        Err(EcqError::DuplicateRow(_))
    ));
}

#[test]
fn score_csv_round_trip() {
    let m = ScoreMatrix {
        dimensions: vec!["a".into(), "b".into()],
        rows: vec![
            ScoreRow { policy: A, run_id: "watch0-0000".into(), scores: vec![Some(0.125), None] },
            ScoreRow { policy: Policy::NoHelp, run_id: "nohelp-0000".into(), scores: vec![Some(1.0), Some(0.0)] },
        ],
    };
    let text = m.to_csv();
    assert_eq!(text, "policy,run_id,a,b\nWatch(0),watch0-0000,0.125,\nNoHelp,nohelp-0000,1,0\n");
    assert_eq!(ScoreMatrix::from_csv(&text).unwrap(), m);
}

fn points() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    proptest::collection::vec((0u8..20, 0u8..20, 0u8..20), 1..8)
        .prop_map(|v| v.into_iter().map(|(a, b, c)| (f64::from(a) / 20.0, f64::from(b) / 20.0, f64::from(c) / 20.0)).collect())
}

fn result_of(pts: &[(f64, f64, f64)]) -> EcqResult {
    let pts: Vec<(Policy, Vec<f64>)> =
        pts.iter().enumerate().map(|(i, &(a, b, c))| (Policy::Watch(i as u32), vec![a, b, c])).collect();
    from_means(&["x", "y", "z"], &pts)
}

proptest! {
    #[test]
    fn front_is_exactly_the_undominated_set(pts in points()) {
        let r = result_of(&pts);
        let front = pareto_front(&r, &["x", "y", "z"]).unwrap();
        prop_assert!(!front.is_empty());
        let v = |i: usize| [pts[i].0, pts[i].1, pts[i].2];
        for i in 0..pts.len() {
            let dominated = (0..pts.len()).any(|j| {
                (0..3).all(|d| v(j)[d] <= v(i)[d]) && (0..3).any(|d| v(j)[d] < v(i)[d])
            });
            prop_assert_eq!(front.contains(&Policy::Watch(i as u32)), !dominated);
        }
    }

    #[test]
    fn selection_is_scale_invariant_and_on_the_front(pts in points(), w in (0u8..5, 0u8..5, 1u8..5), k in 1u8..10) {
        let r = result_of(&pts);
        let (wx, wy, wz) = (f64::from(w.0), f64::from(w.1), f64::from(w.2));
        let p1 = ValueProfile::new("p", [("x", wx), ("y", wy), ("z", wz)]).unwrap();
        let s = f64::from(k) * 0.7;
        let p2 = ValueProfile::new("q", [("x", wx * s), ("y", wy * s), ("z", wz * s)]).unwrap();
        let (a, _) = select_policy(&r, &p1).unwrap();
        let (b, _) = select_policy(&r, &p2).unwrap();
        prop_assert_eq!(a, b);
        let dims = p1.positive_dimensions();
        let front = pareto_front(&r, &dims).unwrap();
        prop_assert!(front.contains(&a), "{:?} not on {:?}", a, front);
    }

    #[test]
    fn summarize_ignores_row_order(xs in proptest::collection::vec(proptest::option::weighted(0.9, 0.0f64..1.0), 1..40), seed in any::<u64>()) {
        let rows: Vec<ScoreRow> = xs.iter().enumerate().map(|(i, &x)| ScoreRow {
            policy: if i % 2 == 0 { A } else { B },
            run_id: format!("r{i}"),
            scores: vec![x],
        }).collect();
        let m1 = ScoreMatrix { dimensions: vec!["d".into()], rows: rows.clone() };
        let mut shuffled = rows;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let m2 = ScoreMatrix { dimensions: vec!["d".into()], rows: shuffled };
        let (r1, r2) = (summarize(&m1).unwrap(), summarize(&m2).unwrap());
        for p in r1.policies.clone() {
            let (a, b) = (r1.stats_for(p, "d").unwrap(), r2.stats_for(p, "d").unwrap());
            prop_assert_eq!((a.n, a.excluded_undefined), (b.n, b.excluded_undefined));
            prop_assert!(a.median == b.median || (a.median.is_nan() && b.median.is_nan()));
            prop_assert!(a.q1 == b.q1 || a.q1.is_nan());
            prop_assert!(a.q3 == b.q3 || a.q3.is_nan());
        }
    }
}
