use std::error::Error;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ecq::ecq::{detect_conflict, pareto_front, score_runs, summarize, EcqResult, Provenance, ScoreMatrix};
use ecq::engine::{self, RunProtocol, SimConfig};
use ecq::report::{emit_box_plot, emit_csv, emit_trajectory_plot, read_protocol_dir, sort_canonical};
use ecq::{Policy, ValueModel};

type Res<T> = Result<T, Box<dyn Error>>;

#[derive(Parser)]
#[command(name = "ecq", version, about = "Simulate assistance policies and score them against value models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its protocol.
    Simulate(SimulateArgs),
    /// Run every policy many times; write protocols and score tables.
    Sweep(SweepArgs),
    /// Re-score stored protocols with a value model (no re-simulation).
    Ecq(EcqArgs),
    /// Render figures.
    #[command(subcommand)]
    Plot(PlotCommand),
    /// Full pipeline: sweep, score, plots and a text summary.
    Report(SweepArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Policy to simulate; defaults to the one in the config.
    #[arg(long, value_parser = parse_policies)]
    policies: Option<PolicyList>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Value model file; the shipped default model when omitted.
    #[arg(long)]
    values: Option<PathBuf>,
    #[arg(long, value_parser = parse_policies, default_value = "NoHelp,NurseOnly,Watch(0..5)")]
    policies: PolicyList,
    #[arg(long, default_value_t = 300, value_parser = clap::value_parser!(u32).range(1..))]
    runs: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; all cores when unset.
    #[arg(long, env = "ECQ_JOBS", value_parser = clap::value_parser!(u32).range(1..))]
    jobs: Option<u32>,
}

#[derive(Args)]
struct EcqArgs {
    /// Directory of protocol logs.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    values: Option<PathBuf>,
    /// Defaults to config.json next to the protocol directory.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum PlotCommand {
    /// Trajectory of one run over the floor plan.
    Traj {
        /// Protocol log file.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output SVG file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-policy box plot for one value dimension.
    Box {
        /// Protocol directory or a per-run score table (runs.csv).
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        dimension: String,
        #[arg(long)]
        values: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Comma-separated policies; `Watch(a..b)` expands to a range.
#[derive(Clone)]
struct PolicyList(Vec<Policy>);

fn parse_policies(s: &str) -> Result<PolicyList, String> {
    Policy::parse_list(s).map(PolicyList)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(&a).map(|_| ()),
        Command::Ecq(a) => rescore(a),
        Command::Plot(p) => plot(p),
        Command::Report(a) => full_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ecq: {e}");
            ExitCode::from(1)
        }
    }
}

fn write(path: &Path, contents: &str) -> Res<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn load_model(values: Option<&Path>) -> Res<ValueModel> {
    match values {
        None => Ok(ValueModel::default_model()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            Ok(ValueModel::parse(&text).map_err(|e| format!("{}: {e}", p.display()))?)
        }
    }
}

fn load_config(path: &Path) -> Res<SimConfig> {
    Ok(SimConfig::from_path(path)?)
}

/// `--config` if given, else `config.json` beside the protocol directory.
fn config_near(explicit: Option<&Path>, protocols: &Path) -> Res<SimConfig> {
    if let Some(p) = explicit {
        return load_config(p);
    }
    let dir = if protocols.is_dir() { protocols } else { protocols.parent().unwrap_or(Path::new(".")) };
    let candidates = [dir.join("config.json"), dir.join("..").join("config.json")];
    let found = candidates
        .iter()
        .find(|p| p.is_file())
        .ok_or_else(|| format!("no config.json near {}; pass --config", protocols.display()))?;
    load_config(found)
}

fn write_protocols(out: &Path, protocols: &[RunProtocol]) -> Res<()> {
    let dir = out.join("protocols");
    fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    for p in protocols {
        write(&dir.join(format!("{}.log", p.run_id)), &p.to_log())?;
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> Res<()> {
    let mut config = load_config(&a.config)?;
    if let Some(list) = a.policies {
        let [p] = list.0[..] else {
            return Err("simulate takes exactly one policy".into());
        };
        config = config.with_policy(p);
    }
    let protocol = engine::run(&config, a.seed)?;
    write_protocols(&a.out, std::slice::from_ref(&protocol))?;
    write(&a.out.join("config.json"), &config.to_json())?;
    println!(
        "{}: {:?} at tick {} ({} events)",
        protocol.run_id,
        protocol.outcome,
        protocol.terminal_tick(),
        protocol.events.len()
    );
    Ok(())
}

struct Scored {
    config: SimConfig,
    protocols: Vec<RunProtocol>,
    matrix: ScoreMatrix,
    result: EcqResult,
}

fn score_and_write(config: SimConfig, mut protocols: Vec<RunProtocol>, model: &ValueModel, provenance: Provenance, out: &Path) -> Res<Scored> {
    sort_canonical(&mut protocols);
    let matrix = score_runs(&protocols, &config.plan, model)?;
    let result = summarize(&matrix)?.with_provenance(provenance);
    write(&out.join("runs.csv"), &matrix.to_csv())?;
    write(&out.join("scores.csv"), &emit_csv(&result))?;
    write(&out.join("summary.txt"), &summary_text(&result, model))?;
    Ok(Scored { config, protocols, matrix, result })
}

fn sweep(a: &SweepArgs) -> Res<Scored> {
    let config = load_config(&a.config)?;
    let model = load_model(a.values.as_deref())?;
    let protocols = engine::batch(&config, &a.policies.0, a.runs as usize, a.seed, a.jobs.map(|j| j as usize))?;
    write_protocols(&a.out, &protocols)?;
    write(&a.out.join("config.json"), &config.to_json())?;
    let provenance = Provenance { config_digest: config.digest(), master_seed: a.seed, runs_per_policy: a.runs as usize };
    let manifest = serde_json::json!({
        "config_sha256": provenance.config_digest,
        "master_seed": a.seed,
        "runs_per_policy": a.runs,
        "policies": a.policies.0.iter().map(Policy::to_string).collect::<Vec<_>>(),
    });
    write(&a.out.join("manifest.json"), &format!("{manifest:#}\n"))?;
    let scored = score_and_write(config, protocols, &model, provenance, &a.out)?;
    println!(
        "{} runs of {} policies -> {}",
        scored.protocols.len(),
        a.policies.0.len(),
        a.out.join("scores.csv").display()
    );
    Ok(scored)
}

fn rescore(a: EcqArgs) -> Res<()> {
    let protocols = read_protocol_dir(&a.input)?;
    let config = config_near(a.config.as_deref(), &a.input)?;
    let model = load_model(a.values.as_deref())?;
    let first = &protocols[0];
    let runs = protocols.iter().filter(|p| p.policy == first.policy).count();
    let master_seed = fs::read_to_string(a.input.join("..").join("manifest.json"))
        .ok()
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
        .and_then(|v| v["master_seed"].as_u64())
        .unwrap_or(0);
    let provenance = Provenance { config_digest: config.digest(), master_seed, runs_per_policy: runs };
    let scored = score_and_write(config, protocols, &model, provenance, &a.out)?;
    println!(
        "re-scored {} protocols on {} dimensions -> {}",
        scored.matrix.rows.len(),
        scored.matrix.dimensions.len(),
        a.out.join("scores.csv").display()
    );
    Ok(())
}

fn plot(p: PlotCommand) -> Res<()> {
    match p {
        PlotCommand::Traj { input, config, out } => {
            let text = fs::read_to_string(&input).map_err(|e| format!("{}: {e}", input.display()))?;
            let protocol = RunProtocol::from_log(&text)?;
            let config = config_near(config.as_deref(), &input)?;
            write(&out, &emit_trajectory_plot(&protocol, &config.plan)?)
        }
        PlotCommand::Box { input, dimension, values, config, out } => {
            let matrix = if input.is_dir() {
                let protocols = read_protocol_dir(&input)?;
                let config = config_near(config.as_deref(), &input)?;
                score_runs(&protocols, &config.plan, &load_model(values.as_deref())?)?
            } else {
                let text = fs::read_to_string(&input).map_err(|e| format!("{}: {e}", input.display()))?;
                ScoreMatrix::from_csv(&text)?
            };
            write(&out, &emit_box_plot(&summarize(&matrix)?, &dimension)?)
        }
    }
}

fn full_report(a: SweepArgs) -> Res<()> {
    let scored = sweep(&a)?;
    let figures = a.out.join("figures");
    for dim in &scored.result.dimensions {
        write(&figures.join(format!("box_{dim}.svg")), &emit_box_plot(&scored.result, dim)?)?;
    }
    for policy in &scored.result.policies {
        if let Some(p) = scored.protocols.iter().find(|p| p.policy == *policy) {
            write(
                &figures.join(format!("traj_{}.svg", p.run_id)),
                &emit_trajectory_plot(p, &scored.config.plan)?,
            )?;
        }
    }
    print!("{}", fs::read_to_string(a.out.join("summary.txt"))?);
    Ok(())
}

fn summary_text(result: &EcqResult, model: &ValueModel) -> String {
    let mut s = String::new();
    let prov = &result.provenance;
    let _ = writeln!(s, "config sha256 {}", prov.config_digest);
    let _ = writeln!(s, "master seed {}, {} runs per policy", prov.master_seed, prov.runs_per_policy);
    let _ = writeln!(s, "\nvalue model:");
    for line in model.to_string().lines() {
        let _ = writeln!(s, "  {line}");
    }
    let _ = writeln!(s, "\nmean violation:");
    let _ = write!(s, "  {:<12}", "policy");
    for d in &result.dimensions {
        let _ = write!(s, " {d:>18}");
    }
    s.push('\n');
    for (p, row) in result.policies.iter().zip(&result.stats) {
        let _ = write!(s, "  {:<12}", p.to_string());
        for st in row {
            let _ = write!(s, " {:>18}", ecq::ecq::format_sig(st.mean, 4));
        }
        s.push('\n');
    }
    let dims: Vec<&str> = result.dimensions.iter().map(String::as_str).collect();
    if let Ok(front) = pareto_front(result, &dims) {
        let names: Vec<String> = front.iter().map(Policy::to_string).collect();
        let _ = writeln!(s, "\npareto front: {}", names.join(", "));
    }
    let watches: Vec<Policy> = result.policies.iter().copied().filter(|p| matches!(p, Policy::Watch(_))).collect();
    let sub = result.subset(&watches);
    for (i, a) in dims.iter().enumerate() {
        for b in &dims[i + 1..] {
            if let Ok(c) = detect_conflict(&sub, a, b) {
                let rho = c.rho.map_or("undefined".to_owned(), |r| format!("{r:.3}"));
                let verdict = if c.conflicting { "conflict" } else { "no conflict" };
                let _ = writeln!(s, "watch policies, {a} vs {b}: rho {rho} ({verdict})");
            }
        }
    }
    s
}
