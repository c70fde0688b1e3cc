#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::PathBuf;

use ecq::engine::{AgentRef, EventKind, RunProtocol, SimConfig};
use ecq::valuelang::MeasureTable;
use serde_json::json;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn ward_config() -> SimConfig {
    SimConfig::from_path(&data_dir().join("ward.json")).expect("shipped ward config loads")
}

/// Config with the plan inlined and one patient; extra top-level keys are
/// merged in.
pub fn inline_config(plan: &str, start: &str, dest: &str, dis_level: f64, extra: serde_json::Value) -> SimConfig {
    let mut v = json!({
        "plan": plan,
        "patient": {"start": start, "destination": dest, "dis_level": dis_level},
    });
    if let serde_json::Value::Object(m) = extra {
        for (k, val) in m {
            v[k] = val;
        }
    }
    SimConfig::from_json(&v.to_string(), std::path::Path::new(".")).expect("test config is valid")
}

pub const CORRIDOR: &str = "########\n#A....B#\n########\n";

pub const T_MAZE: &str = "\
#######
#A...B#
###.###
###.###
###.###
###.###
###S###
#######
";

/// Minimal grid reader for oracles: walkable cells and lettered markers.
pub struct Grid {
    cells: Vec<Vec<bool>>,
    pub marks: HashMap<char, (usize, usize)>,
}

impl Grid {
    pub fn parse(text: &str) -> Self {
        let mut cells = Vec::new();
        let mut marks = HashMap::new();
        for (y, line) in text.lines().enumerate() {
            let mut row = Vec::new();
            for (x, c) in line.chars().enumerate() {
                row.push(c != '#');
                if c.is_ascii_alphabetic() {
                    marks.insert(c, (x, y));
                }
            }
            cells.push(row);
        }
        Self { cells, marks }
    }

    pub fn open(&self, (x, y): (usize, usize)) -> bool {
        self.cells.get(y).and_then(|r| r.get(x)).copied().unwrap_or(false)
    }

    pub fn neighbours(&self, (x, y): (usize, usize)) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        if y > 0 && self.open((x, y - 1)) {
            out.push((x, y - 1));
        }
        if self.open((x + 1, y)) {
            out.push((x + 1, y));
        }
        if self.open((x, y + 1)) {
            out.push((x, y + 1));
        }
        if x > 0 && self.open((x - 1, y)) {
            out.push((x - 1, y));
        }
        out
    }

    pub fn bfs_path(&self, from: (usize, usize), to: (usize, usize)) -> Vec<(usize, usize)> {
        let mut prev: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        let mut q = VecDeque::from([from]);
        prev.insert(from, from);
        while let Some(p) = q.pop_front() {
            if p == to {
                break;
            }
            for n in self.neighbours(p) {
                if let std::collections::hash_map::Entry::Vacant(e) = prev.entry(n) {
                    e.insert(p);
                    q.push_back(n);
                }
            }
        }
        let mut path = vec![to];
        while *path.last().unwrap() != from {
            path.push(prev[path.last().unwrap()]);
        }
        path.reverse();
        path
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum State {
    Oriented(usize),
    Lost((usize, usize), (usize, usize)),
}

/// Probability that an unaided patient has not reached `dest` after `t_max`
/// ticks, by forward iteration of the absorbing chain over
/// (route index | cell and previous cell). Plans must have a unique
/// shortest route.
pub fn timeout_probability(plan: &str, start: char, dest: char, dis_level: f64, t_max: u32) -> f64 {
    let g = Grid::parse(plan);
    let s = g.marks[&start];
    let d = g.marks[&dest];
    let route = g.bfs_path(s, d);
    let mut mass: BTreeMap<State, f64> = BTreeMap::from([(State::Oriented(0), 1.0)]);
    for _ in 0..t_max {
        let mut next: BTreeMap<State, f64> = BTreeMap::new();
        let mut put = |st: State, cell: (usize, usize), p: f64| {
            if cell != d {
                *next.entry(st).or_default() += p;
            }
        };
        for (&st, &p) in &mass {
            match st {
                State::Oriented(i) => {
                    let cur = route[i];
                    let ahead = route[i + 1];
                    let nb = g.neighbours(cur);
                    if nb.len() >= 3 && dis_level > 0.0 {
                        let behind = i.checked_sub(1).map(|j| route[j]);
                        let opts: Vec<_> = nb.into_iter().filter(|&c| c != ahead && Some(c) != behind).collect();
                        for &o in &opts {
                            put(State::Lost(o, cur), o, p * dis_level / opts.len() as f64);
                        }
                        put(State::Oriented(i + 1), ahead, p * (1.0 - dis_level));
                    } else {
                        put(State::Oriented(i + 1), ahead, p);
                    }
                }
                State::Lost(cur, prev) => {
                    let all = g.neighbours(cur);
                    let fwd: Vec<_> = all.iter().copied().filter(|&c| c != prev).collect();
                    let opts = if fwd.is_empty() { all } else { fwd };
                    for &o in &opts {
                        put(State::Lost(o, cur), o, p / opts.len() as f64);
                    }
                }
            }
        }
        mass = next;
    }
    mass.values().sum()
}

/// One disorientation episode of patient 0, read off a protocol.
#[derive(Debug, Clone, Default)]
pub struct Episode {
    pub start: u32,
    pub detected: Option<u32>,
    pub failed_prompts: u32,
    pub called: bool,
    pub prompt_resolved: bool,
    pub truncated: bool,
}

impl Episode {
    /// Whether the escalation outcome was decided before the run ended.
    pub fn decided(&self) -> bool {
        self.called || self.prompt_resolved
    }

    /// Detection latency in per-tick trials, counting the first tick.
    pub fn latency(&self) -> Option<u32> {
        self.detected.map(|t| t - self.start + 1)
    }
}

pub fn episodes(p: &RunProtocol) -> Vec<Episode> {
    let mut out = Vec::new();
    let mut open: Option<Episode> = None;
    for e in &p.events {
        match (e.kind, e.agent) {
            (EventKind::Disoriented, AgentRef::Patient(0)) => {
                assert!(open.is_none(), "{}: overlapping episodes", p.run_id);
                open = Some(Episode { start: e.tick, ..Default::default() });
            }
            (EventKind::Detected, AgentRef::Watch(0)) => {
                let ep = open.as_mut().expect("detection inside an episode");
                ep.detected = Some(e.tick);
            }
            (EventKind::PromptFailed, AgentRef::Watch(0)) => open.as_mut().unwrap().failed_prompts += 1,
            (EventKind::NurseCalled, _) => open.as_mut().unwrap().called = true,
            (EventKind::PromptSucceeded, AgentRef::Watch(0)) => open.as_mut().unwrap().prompt_resolved = true,
            (EventKind::Reoriented, AgentRef::Patient(0)) => out.push(open.take().unwrap()),
            (k, _) if k.is_terminal() => {
                if let Some(mut ep) = open.take() {
                    ep.truncated = true;
                    out.push(ep);
                }
            }
            _ => {}
        }
    }
    out
}

/// Golden corpus for the value DSL, evaluated against [`golden_table`].
/// `Ok(None)` is an undefined result (division by zero).
pub const GOLDEN: &[(&str, Option<f64>)] = &[
    ("total_time", Some(100.0)),
    ("time_disoriented / total_time", Some(0.25)),
    ("1 + 2 * 3", Some(7.0)),
    ("(1 + 2) * 3", Some(9.0)),
    ("10 - 4 - 3", Some(3.0)),
    ("64 / 4 / 2", Some(8.0)),
    ("1 - 2 + 3", Some(2.0)),
    ("-3 + 5", Some(2.0)),
    ("--2", Some(2.0)),
    ("2 * -3", Some(-6.0)),
    ("min(3, 4)", Some(3.0)),
    ("max(time_disoriented, 30)", Some(30.0)),
    ("min(max(1, 2), 3) - 0.5", Some(1.5)),
    ("count(PromptFailed)", Some(3.0)),
    ("count(PromptFailed) / count(PromptIssued)", Some(0.75)),
    ("1.5e2", Some(150.0)),
    ("2.5E-1 * 4", Some(1.0)),
    ("nurse_time_guidance / nurse_time_total", Some(0.25)),
    ("time_disoriented_unguided.p0 / total_time", Some(0.125)),
    ("straight_line / distance_traveled", Some(1.0)),
    ("6 × 7", Some(42.0)),
    ("9 ÷ 2", Some(4.5)),
    ("0 / 5", Some(0.0)),
    ("1 / 0", None),
    ("max(1 / 0, 2)", None),
    ("-(time_disoriented / (total_time - 100))", None),
];

pub const GOLDEN_SYNTAX_ERRORS: &[&str] = &["", "1 +", "(1", "min(1)", "2 $ 3", "1 2", "count(1)", "max(1,)"];

pub fn golden_table() -> MeasureTable {
    let mut t = MeasureTable::new();
    for (k, v) in [
        ("total_time", 100.0),
        ("time_disoriented", 25.0),
        ("time_disoriented_unguided.p0", 12.5),
        ("nurse_time_guidance", 20.0),
        ("nurse_time_total", 80.0),
        ("straight_line", 12.0),
        ("distance_traveled", 12.0),
        ("count(PromptFailed)", 3.0),
        ("count(PromptIssued)", 4.0),
    ] {
        t.insert(k, v);
    }
    t
}
