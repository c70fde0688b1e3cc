mod common;

use ecq::ecq::{summarize, EcqResult, ScoreMatrix, ScoreRow};
use ecq::engine::{self, EventKind, RunProtocol};
use ecq::report::{
    emit_box_plot, emit_csv, emit_trajectory_plot, parse_csv, read_protocol_dir, ReportError, YAxis,
    CSV_HEADER, DISORIENTED_COLOR, ORIENTED_COLOR,
};
use ecq::{Policy, ValueModel};
use roxmltree::Document;
use serde_json::json;

fn polylines(svg: &str) -> Vec<(String, String)> {
    let doc = Document::parse(svg).expect("well-formed SVG");
    doc.descendants()
        .filter(|n| n.has_tag_name("polyline"))
        .map(|n| (n.attribute("class").unwrap().to_owned(), n.attribute("stroke").unwrap().to_owned()))
        .collect()
}

fn canvas(svg: &str) -> (String, String) {
    let doc = Document::parse(svg).unwrap();
    let root = doc.root_element();
    (root.attribute("width").unwrap().to_owned(), root.attribute("height").unwrap().to_owned())
}

#[test]
fn oriented_corridor_is_one_blue_line() {
    let cfg = common::inline_config(common::CORRIDOR, "A", "B", 0.0, json!({}));
    let p = engine::run(&cfg, 1).unwrap();
    let svg = emit_trajectory_plot(&p, &cfg.plan).unwrap();
    assert_eq!(polylines(&svg), vec![("oriented".to_owned(), ORIENTED_COLOR.to_owned())]);
    assert_eq!(canvas(&svg), ("800".into(), "600".into()));
    assert!(svg.contains("dis_level=0"));
    assert_eq!(svg, emit_trajectory_plot(&p, &cfg.plan).unwrap());
}

fn one_prompted_episode() -> RunProtocol {
    let mut cfg = common::ward_config().with_policy(Policy::Watch(3));
    cfg.patients[0].dis_level = 0.2;
    cfg.watch.p_intervene = 1.0;
    cfg.watch.p_detect = 0.3;
    let tick_of = |p: &RunProtocol, k: EventKind| p.events.iter().find(|e| e.kind == k).map(|e| e.tick);
    (0..500)
        .map(|s| engine::run(&cfg, s).unwrap())
        .find(|p| {
            p.count(EventKind::Disoriented) == 1
                && p.count(EventKind::PromptSucceeded) == 1
                && tick_of(p, EventKind::Reoriented) >= tick_of(p, EventKind::Disoriented).map(|t| t + 2)
                && p.events.last().unwrap().kind == EventKind::ReachedDestination
        })
        .expect("some seed has a single prompted episode")
}

#[test]
fn one_episode_gives_two_color_transitions() {
    let cfg = common::ward_config();
    let p = one_prompted_episode();
    assert!(p.events.iter().filter(|e| e.kind == EventKind::Moved).last().unwrap().tick > p.events.iter().find(|e| e.kind == EventKind::Reoriented).unwrap().tick);
    let svg = emit_trajectory_plot(&p, &cfg.plan).unwrap();
    let lines = polylines(&svg);
    let classes: Vec<&str> = lines.iter().map(|(c, _)| c.as_str()).collect();
    assert_eq!(classes, vec!["oriented", "disoriented", "oriented"]);
    assert_eq!(lines[1].1, DISORIENTED_COLOR);
    let transitions = lines.windows(2).filter(|w| w[0].0 != w[1].0).count();
    assert_eq!(transitions, 2);
    assert!(svg.contains("dis_level=0.2"));
}

#[test]
fn no_patients_means_no_trajectory() {
    let cfg = common::inline_config(common::CORRIDOR, "A", "B", 0.0, json!({}));
    let mut p = engine::run(&cfg, 1).unwrap();
    p.patients.clear();
    assert!(matches!(emit_trajectory_plot(&p, &cfg.plan), Err(ReportError::MissingTrajectory(_))));
}

fn result_for(policies: &[Policy], dims: &[&str], value: impl Fn(Policy, usize) -> Option<f64>) -> EcqResult {
    let mut rows = Vec::new();
    for &p in policies {
        for i in 0..9 {
            rows.push(ScoreRow { policy: p, run_id: format!("{}-{i}", p.slug()), scores: dims.iter().map(|_| value(p, i)).collect() });
        }
    }
    summarize(&ScoreMatrix { dimensions: dims.iter().map(|d| d.to_string()).collect(), rows }).unwrap()
}

fn boxes(svg: &str) -> Vec<String> {
    let doc = Document::parse(svg).unwrap();
    doc.descendants()
        .filter(|n| n.has_tag_name("g") && n.attribute("class") == Some("box"))
        .map(|n| n.attribute("data-policy").unwrap().to_owned())
        .collect()
}

#[test]
fn one_glyph_per_policy_in_canonical_order() {
    let all = Policy::default_set();
    let mut shuffled = all.clone();
    shuffled.rotate_left(3);
    let r = result_for(&shuffled, &["safety"], |p, i| Some((p.code() as f64 + i as f64) / 100.0));
    let svg = emit_box_plot(&r, "safety").unwrap();
    let expected: Vec<String> = all.iter().map(|p| p.slug()).collect();
    assert_eq!(boxes(&svg), expected);
    let seven = r.subset(&all[..7]);
    assert_eq!(boxes(&emit_box_plot(&seven, "safety").unwrap()).len(), 7);
    assert_eq!(canvas(&svg), ("800".into(), "500".into()));
    let doc = Document::parse(&svg).unwrap();
    let ylabel = doc.descendants().find(|n| n.attribute("class") == Some("ylabel")).unwrap();
    assert_eq!(ylabel.text(), Some("safety violation"));
    assert!(matches!(emit_box_plot(&r, "nope"), Err(ReportError::UnknownDimension(_))));
}

#[test]
fn median_between_hinges_and_degenerate_boxes() {
    let r = result_for(&[Policy::NoHelp, Policy::NurseOnly, Policy::Watch(0)], &["d"], |p, i| match p {
        Policy::NoHelp => Some(0.4),
        Policy::NurseOnly => None,
        _ => Some(i as f64 / 10.0 + if i == 8 { 5.0 } else { 0.0 }),
    });
    let svg = emit_box_plot(&r, "d").unwrap();
    let doc = Document::parse(&svg).unwrap();
    let group = |slug: &str| {
        doc.descendants()
            .find(|n| n.has_tag_name("g") && n.attribute("data-policy") == Some(slug))
            .unwrap()
    };
    let num = |n: roxmltree::Node, a: &str| n.attribute(a).unwrap().parse::<f64>().unwrap();

    let flat = group("nohelp");
    let hinge = flat.descendants().find(|n| n.attribute("class") == Some("hinge degenerate")).unwrap();
    assert_eq!(hinge.tag_name().name(), "line");
    assert!(flat.descendants().all(|n| !n.has_tag_name("rect")));

    let none = group("nurseonly");
    assert!(none.descendants().any(|n| n.text() == Some("n/a")));

    let w = group("watch0");
    let rect = w.descendants().find(|n| n.attribute("class") == Some("hinge")).unwrap();
    let med = w.descendants().find(|n| n.attribute("class") == Some("median")).unwrap();
    let (top, bottom) = (num(rect, "y"), num(rect, "y") + num(rect, "height"));
    let y = num(med, "y1");
    assert!(top <= y && y <= bottom, "{top} {y} {bottom}");
    assert_eq!(w.descendants().filter(|n| n.attribute("class") == Some("outlier")).count(), 1);
}

#[test]
fn y_axis_is_affine() {
    let a = YAxis { lo: -1.0, hi: 3.0, top: 40.0, bottom: 440.0 };
    assert_eq!(a.pixel(-1.0), 440.0);
    assert_eq!(a.pixel(3.0), 40.0);
    for (u, v) in [(0.0, 1.0), (0.5, 2.5), (-0.75, 0.25)] {
        let mid = a.pixel((u + v) / 2.0);
        assert!((mid - (a.pixel(u) + a.pixel(v)) / 2.0).abs() < 1e-9);
        assert!(a.pixel(u) > a.pixel(v));
    }
}

#[test]
fn csv_grid_and_round_trip() {
    let all = Policy::default_set();
    let dims = ["safety_original", "safety_refined", "fairness"];
    let r = result_for(&all[..7], &dims, |p, i| Some(1.0 / (3.0 + p.code() as f64 + i as f64)));
    let text = emit_csv(&r);
    assert_eq!(text.lines().count(), 22);
    assert!(text.starts_with(CSV_HEADER));
    assert!(!text.contains('\r'));
    let rows = parse_csv(&text).unwrap();
    for row in rows {
        let s = r.stats_for(row.policy, &row.dimension).unwrap();
        for (got, want) in [(row.mean, s.mean), (row.min, s.min), (row.q1, s.q1), (row.median, s.median), (row.q3, s.q3), (row.max, s.max)] {
            assert!(((got - want) / want).abs() < 1e-5, "{got} vs {want}");
        }
        assert_eq!((row.n, row.excluded), (s.n, s.excluded_undefined));
    }
    let empty = result_for(&all[..2], &[], |_, _| None);
    assert_eq!(emit_csv(&empty), format!("{CSV_HEADER}\n"));
    assert!(parse_csv("policy,dim\n").is_err());
}

#[test]
fn protocol_directory_is_read_in_canonical_order() {
    let cfg = common::ward_config();
    let runs = engine::batch(&cfg, &[Policy::Watch(1), Policy::NoHelp], 3, 1, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for p in &runs {
        std::fs::write(dir.path().join(format!("{}.log", p.run_id)), p.to_log()).unwrap();
    }
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let back = read_protocol_dir(dir.path()).unwrap();
    let ids: Vec<&str> = back.iter().map(|p| p.run_id.as_str()).collect();
    assert_eq!(ids, ["nohelp-0000", "nohelp-0001", "nohelp-0002", "watch1-0000", "watch1-0001", "watch1-0002"]);
    let m = ecq::ecq::score_runs(&back, &cfg.plan, &ValueModel::default_model()).unwrap();
    assert_eq!(m.rows.len(), 6);
    let empty = tempfile::tempdir().unwrap();
    assert!(read_protocol_dir(empty.path()).is_err());
}
