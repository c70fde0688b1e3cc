mod common;

use ecq::engine::RunProtocol;
use ecq::valuelang::{self, derive_measures, MeasureTable, ValueModel, ValueModelError};
use ecq::world::load_floor_plan;
use proptest::prelude::*;

#[test]
fn golden_corpus() {
    assert!(common::GOLDEN.len() >= 20);
    let table = common::golden_table();
    for &(src, want) in common::GOLDEN {
        let expr = valuelang::parse(src).unwrap_or_else(|e| panic!("{src}: {e}"));
        assert_eq!(valuelang::eval(&expr, &table).unwrap(), want, "{src}");
        let shown = expr.to_string();
        assert_eq!(valuelang::parse(&shown).unwrap(), expr, "{src} displayed as {shown}");
    }
    for &src in common::GOLDEN_SYNTAX_ERRORS {
        assert!(valuelang::parse(src).is_err(), "{src:?} should not parse");
    }
}

#[test]
fn syntax_error_offsets_count_characters() {
    assert_eq!(valuelang::parse("2 $ 3").unwrap_err().offset, 2);
    assert_eq!(valuelang::parse("1 +").unwrap_err().offset, 3);
    assert_eq!(valuelang::parse("6 × $").unwrap_err().offset, 4);
}

#[test]
fn unknown_measure_is_an_evaluation_error() {
    let e = valuelang::parse("speed / 2").unwrap();
    assert!(valuelang::eval(&e, &common::golden_table()).is_err());
}

// Escorted patient on a straight corridor: lost at tick 3, watch prompt
// fails, call at tick 4, nurse arrives at tick 5 and delivers at tick 11.
const HAND_LOG: &str = r#"{"record":"header","run_id":"hand","policy":"Watch(1)","seed":0,"outcome":"ReachedDestination","t_max":100,"tick_seconds":1.0,"cell_size":1.0,"patients":[{"id":"p0","start":{"x":0,"y":0},"destination":{"x":6,"y":0},"dis_level":0.5}]}
{"run_id":"hand","tick":1,"agent":"p0","kind":"Moved","payload":{"x":1,"y":0}}
{"run_id":"hand","tick":2,"agent":"p0","kind":"Moved","payload":{"x":2,"y":0}}
{"run_id":"hand","tick":3,"agent":"p0","kind":"WrongTurn","payload":{"to":[1,0],"x":2,"y":0}}
{"run_id":"hand","tick":3,"agent":"p0","kind":"Disoriented","payload":{}}
{"run_id":"hand","tick":3,"agent":"p0","kind":"Moved","payload":{"x":1,"y":0}}
{"run_id":"hand","tick":3,"agent":"w0","kind":"Detected","payload":{"patient":"p0"}}
{"run_id":"hand","tick":3,"agent":"w0","kind":"PromptIssued","payload":{"attempt":1}}
{"run_id":"hand","tick":3,"agent":"w0","kind":"PromptFailed","payload":{"attempt":1}}
{"run_id":"hand","tick":4,"agent":"p0","kind":"Moved","payload":{"x":0,"y":0}}
{"run_id":"hand","tick":4,"agent":"w0","kind":"NurseCalled","payload":{"failed_prompts":1,"patient":"p0"}}
{"run_id":"hand","tick":5,"agent":"n0","kind":"NurseArrived","payload":{"patient":"p0"}}
{"run_id":"hand","tick":5,"agent":"n0","kind":"GuidanceStarted","payload":{"patient":"p0"}}
{"run_id":"hand","tick":6,"agent":"p0","kind":"Moved","payload":{"x":1,"y":0}}
{"run_id":"hand","tick":7,"agent":"p0","kind":"Moved","payload":{"x":2,"y":0}}
{"run_id":"hand","tick":8,"agent":"p0","kind":"Moved","payload":{"x":3,"y":0}}
{"run_id":"hand","tick":9,"agent":"p0","kind":"Moved","payload":{"x":4,"y":0}}
{"run_id":"hand","tick":10,"agent":"p0","kind":"Moved","payload":{"x":5,"y":0}}
{"run_id":"hand","tick":11,"agent":"p0","kind":"Moved","payload":{"x":6,"y":0}}
{"run_id":"hand","tick":11,"agent":"n0","kind":"GuidanceEnded","payload":{"patient":"p0"}}
{"run_id":"hand","tick":11,"agent":"p0","kind":"Reoriented","payload":{"cause":"nurse"}}
{"run_id":"hand","tick":12,"agent":"p0","kind":"ReachedDestination","payload":{"x":6,"y":0}}
{"record":"activity","run_id":"hand","agent":"n0","ticks":"O3,R2,G6,O1"}
"#;

#[test]
fn measures_of_a_hand_written_protocol() {
    let plan = load_floor_plan("A.....B\n").unwrap();
    let p = RunProtocol::from_log(HAND_LOG).unwrap();
    p.validate().unwrap();
    let m = derive_measures(&p, &plan).unwrap();
    let expect = [
        ("total_time", 12.0),
        ("time_disoriented", 8.0),
        ("time_guided", 6.0),
        ("time_disoriented_unguided", 2.0),
        ("time_disoriented_unguided.p0", 2.0),
        ("distance_traveled", 10.0),
        ("straight_line", 6.0),
        ("nurse_time_guidance", 8.0),
        ("nurse_time_other", 4.0),
        ("nurse_time_total", 12.0),
        ("count(PromptIssued)", 1.0),
        ("count(Moved)", 10.0),
        ("count(NurseCalled)", 1.0),
        ("count(Timeout)", 0.0),
    ];
    for (k, v) in expect {
        assert_eq!(m.get(k).unwrap(), v, "{k}");
    }
    let scores = ValueModel::extended_model().evaluate(&m).unwrap();
    assert_eq!(scores, vec![Some(8.0 / 12.0), Some(2.0 / 12.0), Some(8.0 / 12.0), Some(1.0 - 0.6)]);
}

#[test]
fn tampered_protocols_are_not_scored() {
    let plan = load_floor_plan("A.....B\n").unwrap();
    let broken = HAND_LOG.replace(r#""kind":"Disoriented""#, r#""kind":"Moved""#);
    let p = RunProtocol::from_log(&broken).unwrap();
    assert!(derive_measures(&p, &plan).is_err());
}

#[test]
fn model_file_checks() {
    assert!(matches!(
        ValueModel::parse("a violation = total_time / bogus"),
        Err(ValueModelError::UnknownMeasure { .. })
    ));
    assert!(ValueModel::parse("# only a comment\n").unwrap().dimensions().is_empty());
    let m = ValueModel::parse("x compliance = straight_line / distance_traveled\n").unwrap();
    let mut t = MeasureTable::new();
    t.insert("straight_line", 3.0);
    t.insert("distance_traveled", 4.0);
    assert_eq!(m.evaluate(&t).unwrap(), vec![Some(0.25)]);
}

/// Expression trees rendered fully parenthesized, with a reference value.
#[derive(Debug, Clone)]
enum Tree {
    Num(u8),
    Var(usize),
    Neg(Box<Tree>),
    Bin(char, Box<Tree>, Box<Tree>),
    Min(Box<Tree>, Box<Tree>),
    Max(Box<Tree>, Box<Tree>),
}

const VARS: [(&str, f64); 3] = [("total_time", 100.0), ("time_disoriented", 25.0), ("nurse_time_total", 80.0)];

impl Tree {
    fn render(&self) -> String {
        match self {
            Tree::Num(n) => n.to_string(),
            Tree::Var(i) => VARS[*i].0.to_string(),
            Tree::Neg(a) => format!("(-{})", a.render()),
            Tree::Bin(op, a, b) => format!("({} {op} {})", a.render(), b.render()),
            Tree::Min(a, b) => format!("min({}, {})", a.render(), b.render()),
            Tree::Max(a, b) => format!("max({}, {})", a.render(), b.render()),
        }
    }

    fn value(&self) -> Option<f64> {
        Some(match self {
            Tree::Num(n) => f64::from(*n),
            Tree::Var(i) => VARS[*i].1,
            Tree::Neg(a) => -a.value()?,
            Tree::Bin(op, a, b) => {
                let (x, y) = (a.value()?, b.value()?);
                match op {
                    '+' => x + y,
                    '-' => x - y,
                    '*' => x * y,
                    _ if y == 0.0 => return None,
                    _ => x / y,
                }
            }
            Tree::Min(a, b) => a.value()?.min(b.value()?),
            Tree::Max(a, b) => a.value()?.max(b.value()?),
        })
    }
}

fn tree() -> impl Strategy<Value = Tree> {
    let leaf = prop_oneof![(0u8..10).prop_map(Tree::Num), (0usize..3).prop_map(Tree::Var)];
    leaf.prop_recursive(5, 40, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Tree::Neg(Box::new(a))),
            (prop::sample::select(vec!['+', '-', '*', '/']), inner.clone(), inner.clone())
                .prop_map(|(op, a, b)| Tree::Bin(op, Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Tree::Min(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| Tree::Max(Box::new(a), Box::new(b))),
        ]
    })
}

proptest! {
    #[test]
    fn parser_agrees_with_reference_evaluator(t in tree()) {
        let mut table = MeasureTable::new();
        for (k, v) in VARS {
            table.insert(k, v);
        }
        let src = t.render();
        let expr = valuelang::parse(&src).unwrap();
        let got = valuelang::eval(&expr, &table).unwrap();
        let want = t.value();
        match (got, want) {
            (Some(a), Some(b)) => prop_assert!(a == b || (a.is_nan() && b.is_nan()), "{src}: {a} vs {b}"),
            (a, b) => prop_assert_eq!(a, b, "{}", src),
        }
        // minimal-parenthesis display means the same thing
        let again = valuelang::parse(&expr.to_string()).unwrap();
        prop_assert_eq!(again, expr);
    }
}
