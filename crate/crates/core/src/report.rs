//! Artifacts: SVG figures and CSV summary tables.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::ecq::{format_sig, BoxStats, EcqResult};
use crate::engine::protocol::{RunProtocol, TrajectoryPoint};
use crate::iat::Policy;
use crate::world::{FloorPlan, Position};

pub const ORIENTED_COLOR: &str = "#1f77b4";
pub const DISORIENTED_COLOR: &str = "#d62728";

pub const TRAJECTORY_CANVAS: (u32, u32) = (800, 600);
pub const BOX_CANVAS: (u32, u32) = (800, 500);

pub const CSV_HEADER: &str = "policy,dimension,n,mean,min,q1,median,q3,max,excluded";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReportError {
    #[error("protocol {0} has no trajectory data")]
    MissingTrajectory(String),
    #[error("unknown dimension {0:?}")]
    UnknownDimension(String),
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Protocol(String),
}

pub fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn svg_open(out: &mut String, (w, h): (u32, u32)) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
}

/// Maximal runs of equally-oriented moves. Each segment is a list of points;
/// adjacent segments share their boundary point. A step is colored by the
/// orientation at its end point.
pub fn orientation_segments(points: &[TrajectoryPoint]) -> Vec<(bool, Vec<Position>)> {
    let mut segments: Vec<(bool, Vec<Position>)> = Vec::new();
    let Some(first) = points.first() else {
        return segments;
    };
    if points.len() == 1 {
        return vec![(first.oriented, vec![first.position])];
    }
    for pair in points.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        match segments.last_mut() {
            Some((o, cells)) if *o == b.oriented => cells.push(b.position),
            _ => segments.push((b.oriented, vec![a.position, b.position])),
        }
    }
    segments
}

/// Load every `*.log` protocol in a directory, ordered by policy code and
/// run id so the result does not depend on directory listing order.
pub fn read_protocol_dir(dir: &Path) -> Result<Vec<RunProtocol>, ReportError> {
    let io = |e: std::io::Error| ReportError::Io(format!("{}: {e}", dir.display()));
    let mut protocols = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.extension().is_some_and(|e| e == "log") {
            let text = std::fs::read_to_string(&path).map_err(|e| ReportError::Io(format!("{}: {e}", path.display())))?;
            let p = RunProtocol::from_log(&text).map_err(|e| ReportError::Protocol(format!("{}: {e}", path.display())))?;
            protocols.push(p);
        }
    }
    if protocols.is_empty() {
        return Err(ReportError::Io(format!("no .log protocols in {}", dir.display())));
    }
    sort_canonical(&mut protocols);
    Ok(protocols)
}

pub fn sort_canonical(protocols: &mut [RunProtocol]) {
    protocols.sort_by(|a, b| (a.policy.code(), &a.run_id).cmp(&(b.policy.code(), &b.run_id)));
}

/// Floor plan with every patient's path, colored by orientation state.
pub fn emit_trajectory_plot(protocol: &RunProtocol, plan: &FloorPlan) -> Result<String, ReportError> {
    let missing = || ReportError::MissingTrajectory(protocol.run_id.clone());
    if protocol.patients.is_empty() {
        return Err(missing());
    }
    let mut paths = Vec::new();
    for info in &protocol.patients {
        let t = protocol.trajectory(info.id).filter(|t| !t.is_empty()).ok_or_else(missing)?;
        paths.push((info, t));
    }

    let (cw, ch) = TRAJECTORY_CANVAS;
    let (left, top, legend_h) = (20.0, 20.0, 70.0);
    let avail_w = f64::from(cw) - 2.0 * left;
    let avail_h = f64::from(ch) - 2.0 * top - legend_h;
    let cell = (avail_w / plan.width() as f64).min(avail_h / plan.height() as f64);
    let cx = |x: usize| left + (x as f64 + 0.5) * cell;
    let cy = |y: usize| top + (y as f64 + 0.5) * cell;

    let mut out = String::new();
    svg_open(&mut out, TRAJECTORY_CANVAS);
    let _ = writeln!(out, r#"<title>{}</title>"#, xml_escape(&protocol.run_id));
    out.push_str("<g class=\"plan\">\n");
    for y in 0..plan.height() {
        for x in 0..plan.width() {
            let fill = if plan.is_walkable(Position::new(x, y)) { "#f4f4f4" } else { "#555555" };
            let _ = writeln!(
                out,
                r##"<rect x="{:.2}" y="{:.2}" width="{cell:.2}" height="{cell:.2}" fill="{fill}" stroke="#dddddd" stroke-width="0.5"/>"##,
                left + x as f64 * cell,
                top + y as f64 * cell,
            );
        }
    }
    for (name, p) in plan.destinations() {
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="{:.1}" text-anchor="middle" dominant-baseline="central" fill="#333333">{}</text>"##,
            cx(p.x),
            cy(p.y),
            cell * 0.6,
            xml_escape(name)
        );
    }
    out.push_str("</g>\n");

    let stroke = (cell * 0.25).max(1.5);
    for (info, points) in &paths {
        let _ = writeln!(out, r#"<g class="trajectory" data-patient="{}">"#, info.id);
        for (oriented, cells) in orientation_segments(points) {
            let (class, color) =
                if oriented { ("oriented", ORIENTED_COLOR) } else { ("disoriented", DISORIENTED_COLOR) };
            let pts: Vec<String> = cells.iter().map(|p| format!("{:.2},{:.2}", cx(p.x), cy(p.y))).collect();
            let _ = writeln!(
                out,
                r#"<polyline class="{class}" points="{}" fill="none" stroke="{color}" stroke-width="{stroke:.2}" stroke-linejoin="round" stroke-linecap="round"/>"#,
                pts.join(" ")
            );
        }
        let s = info.start;
        let d = info.destination;
        let _ = writeln!(
            out,
            r#"<circle class="start" cx="{:.2}" cy="{:.2}" r="{:.2}" fill="none" stroke="black"/>"#,
            cx(s.x),
            cy(s.y),
            cell * 0.35
        );
        let _ = writeln!(
            out,
            r#"<rect class="goal" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            cx(d.x) - cell * 0.35,
            cy(d.y) - cell * 0.35,
            cell * 0.7,
            cell * 0.7
        );
        out.push_str("</g>\n");
    }

    let ly = f64::from(ch) - legend_h + 10.0;
    out.push_str("<g class=\"legend\" font-family=\"sans-serif\" font-size=\"13\">\n");
    let _ = writeln!(
        out,
        r#"<line x1="{left}" y1="{ly}" x2="{}" y2="{ly}" stroke="{ORIENTED_COLOR}" stroke-width="4"/><text x="{}" y="{}">oriented</text>"#,
        left + 30.0,
        left + 38.0,
        ly + 4.0
    );
    let _ = writeln!(
        out,
        r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{DISORIENTED_COLOR}" stroke-width="4"/><text x="{}" y="{}">disoriented</text>"#,
        left + 140.0,
        left + 170.0,
        left + 178.0,
        ly + 4.0
    );
    let levels: Vec<String> =
        protocol.patients.iter().map(|p| format!("{} dis_level={}", p.id, format_sig(p.dis_level, 6))).collect();
    let _ = writeln!(
        out,
        r#"<text x="{left}" y="{}">{} | policy {} | {} ticks | {}</text>"#,
        ly + 28.0,
        xml_escape(&levels.join(", ")),
        xml_escape(&protocol.policy.label()),
        protocol.terminal_tick(),
        xml_escape(&protocol.run_id)
    );
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

/// Affine map from score to pixel row (larger scores higher up).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YAxis {
    pub lo: f64,
    pub hi: f64,
    pub top: f64,
    pub bottom: f64,
}

impl YAxis {
    pub fn pixel(&self, v: f64) -> f64 {
        self.bottom - (v - self.lo) / (self.hi - self.lo) * (self.bottom - self.top)
    }

    fn fit(stats: &[&BoxStats], top: f64, bottom: f64) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in stats.iter().filter(|s| s.n > 0) {
            lo = lo.min(s.min);
            hi = hi.max(s.max);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        } else {
            let pad = (hi - lo) * 0.05;
            lo -= pad;
            hi += pad;
        }
        Self { lo, hi, top, bottom }
    }
}

/// One box glyph per policy, in canonical policy order.
pub fn emit_box_plot(result: &EcqResult, dimension: &str) -> Result<String, ReportError> {
    let d = result
        .dimension_index(dimension)
        .map_err(|_| ReportError::UnknownDimension(dimension.to_owned()))?;
    let mut order: Vec<(Policy, &BoxStats)> =
        result.policies.iter().zip(&result.stats).map(|(p, row)| (*p, &row[d])).collect();
    order.sort_by_key(|(p, _)| p.code());

    let (cw, ch) = BOX_CANVAS;
    let (left, right, top, bottom) = (90.0, f64::from(cw) - 20.0, 40.0, f64::from(ch) - 60.0);
    let stats: Vec<&BoxStats> = order.iter().map(|(_, s)| *s).collect();
    let axis = YAxis::fit(&stats, top, bottom);

    let mut out = String::new();
    svg_open(&mut out, BOX_CANVAS);
    let _ = writeln!(out, r#"<title>{} violation</title>"#, xml_escape(dimension));
    let _ = writeln!(
        out,
        r#"<g class="axes" font-family="sans-serif" font-size="12"><line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/><line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>"#
    );
    for i in 0..=5 {
        let v = axis.lo + (axis.hi - axis.lo) * f64::from(i) / 5.0;
        let y = axis.pixel(v);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 5.0,
            left - 8.0,
            y + 4.0,
            format_sig(v, 3)
        );
    }
    let mid = (top + bottom) / 2.0;
    let _ = writeln!(
        out,
        r#"<text class="ylabel" x="20" y="{mid:.2}" text-anchor="middle" transform="rotate(-90 20 {mid:.2})">{} violation</text>"#,
        xml_escape(dimension)
    );
    out.push_str("</g>\n");

    let slot = (right - left) / order.len().max(1) as f64;
    let half = (slot * 0.3).min(30.0);
    for (i, (policy, s)) in order.iter().enumerate() {
        let x = left + slot * (i as f64 + 0.5);
        let _ = writeln!(out, r#"<g class="box" data-policy="{}">"#, policy.slug());
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
            bottom + 20.0,
            xml_escape(&policy.label())
        );
        if s.n == 0 {
            let _ = writeln!(
                out,
                r#"<text x="{x:.2}" y="{mid:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">n/a</text>"#
            );
            out.push_str("</g>\n");
            continue;
        }
        let (yq1, yq3, ymed) = (axis.pixel(s.q1), axis.pixel(s.q3), axis.pixel(s.median));
        let (ylo, yhi) = (axis.pixel(s.whisker_low), axis.pixel(s.whisker_high));
        let _ = writeln!(
            out,
            r#"<line class="whisker" x1="{x:.2}" y1="{ylo:.2}" x2="{x:.2}" y2="{yq1:.2}" stroke="black"/><line class="whisker" x1="{x:.2}" y1="{yq3:.2}" x2="{x:.2}" y2="{yhi:.2}" stroke="black"/>"#
        );
        for y in [ylo, yhi] {
            let _ = writeln!(
                out,
                r#"<line class="cap" x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black"/>"#,
                x - half / 2.0,
                x + half / 2.0
            );
        }
        if s.q1 == s.q3 {
            let _ = writeln!(
                out,
                r#"<line class="hinge degenerate" x1="{:.2}" y1="{yq1:.2}" x2="{:.2}" y2="{yq1:.2}" stroke="{ORIENTED_COLOR}" stroke-width="2"/>"#,
                x - half,
                x + half
            );
        } else {
            let _ = writeln!(
                out,
                r##"<rect class="hinge" x="{:.2}" y="{yq3:.2}" width="{:.2}" height="{:.2}" fill="#c6dbef" stroke="{ORIENTED_COLOR}"/>"##,
                x - half,
                2.0 * half,
                yq1 - yq3
            );
        }
        let _ = writeln!(
            out,
            r#"<line class="median" x1="{:.2}" y1="{ymed:.2}" x2="{:.2}" y2="{ymed:.2}" stroke="{DISORIENTED_COLOR}" stroke-width="2"/>"#,
            x - half,
            x + half
        );
        for o in &s.outliers {
            let _ = writeln!(
                out,
                r#"<circle class="outlier" cx="{x:.2}" cy="{:.2}" r="2.5" fill="none" stroke="black"/>"#,
                axis.pixel(*o)
            );
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Summary table, one row per (policy, dimension).
pub fn emit_csv(result: &EcqResult) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (policy, row) in result.policies.iter().zip(&result.stats) {
        for (dim, s) in result.dimensions.iter().zip(row) {
            let nums = [s.mean, s.min, s.q1, s.median, s.q3, s.max].map(|v| format_sig(v, 6));
            let _ = writeln!(out, "{policy},{dim},{},{},{}", s.n, nums.join(","), s.excluded_undefined);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub policy: Policy,
    pub dimension: String,
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub excluded: usize,
}

/// Read back a table written by [`emit_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>, ReportError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => return Err(ReportError::Csv { line: 1, message: "missing header".into() }),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let err = |message: String| ReportError::Csv { line: i + 1, message };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(err(format!("expected 10 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| err(format!("{s:?}: {e}")));
        let int = |s: &str| s.parse::<usize>().map_err(|e| err(format!("{s:?}: {e}")));
        rows.push(CsvRow {
            policy: f[0].parse().map_err(err)?,
            dimension: f[1].to_owned(),
            n: int(f[2])?,
            mean: num(f[3])?,
            min: num(f[4])?,
            q1: num(f[5])?,
            median: num(f[6])?,
            q3: num(f[7])?,
            max: num(f[8])?,
            excluded: int(f[9])?,
        });
    }
    Ok(rows)
}
