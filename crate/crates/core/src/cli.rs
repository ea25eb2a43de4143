//! The `fpcex` command line: solve or inspect one `.fpv` file, or run the
//! benchmark matrix over a directory.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::fpbits::to_hex;
use crate::harness::{self, MatrixConfig};
use crate::metrics::{PropertyKind, StaticWeights};
use crate::model::{derive, DisjunctSet};
use crate::parser::parse;
use crate::search::{solve_disjuncts, SearchConfig, SearchOutcome, Verdict, DEFAULT_HORIZON};

pub const EXIT_SAT: i32 = 10;
pub const EXIT_UNSAT: i32 = 20;
pub const EXIT_TIMEOUT: i32 = 30;
pub const EXIT_ERROR: i32 = 1;

pub const CSV_HEADER: [&str; 9] = [
    "benchmark",
    "strategy",
    "features",
    "verdict",
    "t_s",
    "nodes",
    "fails",
    "max_depth",
    "witness",
];

/// One solver run, as written to CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub benchmark: String,
    pub strategy: String,
    pub features: String,
    pub verdict: String,
    pub t_s: f64,
    pub nodes: u64,
    pub fails: u64,
    pub max_depth: usize,
    /// `name=hex;name=hex`, empty unless SAT.
    pub witness: String,
}

impl RunRecord {
    pub fn new(benchmark: &str, cfg: &SearchConfig, out: &SearchOutcome) -> RunRecord {
        RunRecord {
            benchmark: benchmark.to_string(),
            strategy: cfg.property.name().to_string(),
            features: cfg.features().name().to_string(),
            verdict: out.verdict.name().to_string(),
            t_s: out.stats.elapsed.as_secs_f64(),
            nodes: out.stats.nodes,
            fails: out.stats.fails,
            max_depth: out.stats.max_depth,
            witness: match &out.verdict {
                Verdict::Sat(w) => format_witness(&w.inputs),
                _ => String::new(),
            },
        }
    }

    pub fn fields(&self) -> [String; 9] {
        [
            self.benchmark.clone(),
            self.strategy.clone(),
            self.features.clone(),
            self.verdict.clone(),
            format!("{:.6}", self.t_s),
            self.nodes.to_string(),
            self.fails.to_string(),
            self.max_depth.to_string(),
            self.witness.clone(),
        ]
    }
}

pub fn format_witness(inputs: &[(String, f64)]) -> String {
    inputs
        .iter()
        .map(|(n, v)| format!("{n}={}", to_hex(*v)))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn write_csv(path: &Path, records: &[RunRecord]) -> Result<(), String> {
    let mut w = csv::Writer::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    w.write_record(CSV_HEADER).map_err(|e| e.to_string())?;
    for r in records {
        w.write_record(r.fields()).map_err(|e| e.to_string())?;
    }
    w.flush().map_err(|e| e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "fpcex",
    version,
    about = "Search for floating-point counter-examples to program post-conditions",
    args_conflicts_with_subcommands = true,
    subcommand_negates_reqs = true
)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    solve: SolveArgs,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Variable property: width, card, density, absorption, lex, degree,
    /// localocc, globalocc
    #[arg(long, default_value = "globalocc", value_parser = parse_property)]
    strategy: PropertyKind,
    /// Branch on input variables only
    #[arg(long)]
    restrict: bool,
    /// Prohibition horizon (0 disables)
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    diversify: usize,
    /// Wall-clock budget in seconds
    #[arg(long, default_value_t = 60.0, value_parser = parse_seconds)]
    timeout: f64,
    /// Node budget
    #[arg(long)]
    nodes: Option<u64>,
    /// Write a one-row CSV report
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Print the derived model instead of solving
    #[arg(long)]
    inspect: bool,
    #[arg(required = true)]
    file: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every strategy and feature set over a benchmark directory
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, default_value_t = 60.0, value_parser = parse_seconds)]
    timeout: f64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Per-run CSV; the aggregate table goes next to it
    #[arg(long, default_value = "report.csv")]
    out: PathBuf,
    #[arg(long)]
    nodes: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    diversify: usize,
}

fn parse_property(s: &str) -> Result<PropertyKind, String> {
    PropertyKind::from_name(s).ok_or_else(|| format!("unknown strategy '{s}'"))
}

fn parse_seconds(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number of seconds, got '{s}'")),
    }
}

pub fn benchmark_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn load(path: &Path) -> Result<DisjunctSet, String> {
    let src = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let p = parse(&src).map_err(|e| format!("{}:{e}", path.display()))?;
    derive(&p).map_err(|e| format!("{}: {e}", path.display()))
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_ERROR,
            };
            let _ = if code == 0 {
                write!(out, "{}", e.render())
            } else {
                write!(err, "{}", e.render())
            };
            return code;
        }
    };
    let res = match cli.command {
        Some(Command::Bench(b)) => run_bench(&b, out),
        None => run_solve(&cli.solve, out),
    };
    match res {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_ERROR
        }
    }
}

fn run_solve(a: &SolveArgs, out: &mut dyn Write) -> Result<i32, String> {
    let path = a.file.as_deref().expect("required by clap");
    let ds = load(path)?;
    let name = benchmark_name(path);
    if a.inspect {
        write!(out, "{}", inspect_report(&name, &ds)).map_err(|e| e.to_string())?;
        return Ok(0);
    }
    let cfg = SearchConfig {
        restrict: a.restrict,
        diversify: a.diversify,
        node_budget: a.nodes,
        timeout: Duration::from_secs_f64(a.timeout),
        ..SearchConfig::new(a.strategy)
    };
    let outcome = solve_disjuncts(&ds, &cfg);
    let rec = RunRecord::new(&name, &cfg, &outcome);
    let mut line = format!(
        "{} {} strategy={} features={} nodes={} fails={} max_depth={} t_s={:.3}",
        rec.verdict,
        rec.benchmark,
        rec.strategy,
        rec.features,
        rec.nodes,
        rec.fails,
        rec.max_depth,
        rec.t_s
    );
    if !rec.witness.is_empty() {
        line.push_str(" witness ");
        line.push_str(&rec.witness);
    }
    writeln!(out, "{line}").map_err(|e| e.to_string())?;
    if let Some(p) = &a.csv {
        write_csv(p, std::slice::from_ref(&rec))?;
    }
    Ok(match outcome.verdict {
        Verdict::Sat(_) => EXIT_SAT,
        Verdict::Unsat => EXIT_UNSAT,
        Verdict::Timeout => EXIT_TIMEOUT,
    })
}

/// Human-readable description of a derived model.
pub fn inspect_report(name: &str, ds: &DisjunctSet) -> String {
    use std::fmt::Write as _;
    let m = &ds.models[0];
    let mut s = String::new();
    let _ = writeln!(s, "benchmark {name} ({})", m.format());
    let _ = writeln!(s, "X ({} variables):", m.num_vars());
    for (i, v) in m.vars().iter().enumerate() {
        let kind = if v.is_input { "input" } else { "temp" };
        let _ = writeln!(s, "  [{}] {} {} D = {:#}", i + 1, v.name, kind, v.domain);
    }
    let names: Vec<&str> = m.inputs().iter().map(|&v| m.var(v).name.as_str()).collect();
    let _ = writeln!(s, "I = {{{}}} (|I| = {})", names.join(", "), names.len());
    if names.len() == 1 {
        let _ = writeln!(s, "note: |I| = 1, restricting to inputs leaves no selection choice");
    }
    let _ = writeln!(s, "C ({} constraints, disjunct 1):", m.constraints().len());
    for c in m.constraints() {
        let _ = writeln!(s, "  {}  [{:?}]", m.display_constraint(c), c.source);
    }
    let w = StaticWeights::compute(m);
    let _ = writeln!(s, "static weights:");
    let _ = writeln!(s, "  {:<12} {:>5} {:>7} {:>6} {:>6}", "var", "lex", "degree", "occ_l", "occ_g");
    for (i, v) in m.vars().iter().enumerate() {
        let _ = writeln!(
            s,
            "  {:<12} {:>5} {:>7} {:>6} {:>6}",
            v.name, w.lex[i], w.degree[i], w.occ_l[i], w.occ_g[i]
        );
    }
    let _ = writeln!(s, "disjuncts: {}", ds.models.len());
    s
}

fn run_bench(b: &BenchArgs, out: &mut dyn Write) -> Result<i32, String> {
    let cfg = MatrixConfig {
        timeout: Duration::from_secs_f64(b.timeout),
        node_budget: b.nodes,
        jobs: b.jobs.max(1),
        horizon: b.diversify,
    };
    let run = harness::run_matrix(&b.dir, &cfg)?;
    write_csv(&b.out, &run.records)?;
    let summary = harness::summary_path(&b.out);
    harness::write_summary_csv(&summary, &run.report)?;
    write!(out, "{}", harness::render_report(&run.report)).map_err(|e| e.to_string())?;
    writeln!(out, "runs: {}\nsummary: {}", b.out.display(), summary.display()).map_err(|e| e.to_string())?;
    Ok(if run.report.problems.is_empty() { 0 } else { EXIT_ERROR })
}
