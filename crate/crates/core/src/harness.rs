//! Benchmark matrix: every strategy under every feature set over a
//! directory of `.fpv` files, with per-row aggregates.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;

use crate::cli::{benchmark_name, RunRecord};
use crate::metrics::PropertyKind;
use crate::model::{derive, DisjunctSet};
use crate::parser::parse;
use crate::search::{solve_disjuncts, Features, SearchConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Expect {
    Sat,
    Unsat,
    Unknown,
}

impl Expect {
    pub fn name(self) -> &'static str {
        match self {
            Expect::Sat => "SAT",
            Expect::Unsat => "UNSAT",
            Expect::Unknown => "UNKNOWN",
        }
    }
}

/// The `# expect: CLASS` annotation on the first comment line.
pub fn read_expect(src: &str) -> Expect {
    let Some(line) = src.lines().map(str::trim).find(|l| l.starts_with('#')) else {
        return Expect::Unknown;
    };
    let body = line.trim_start_matches('#').trim();
    let Some(rest) = body.strip_prefix("expect:") else {
        return Expect::Unknown;
    };
    match rest.trim().to_ascii_uppercase().as_str() {
        "SAT" => Expect::Sat,
        "UNSAT" => Expect::Unsat,
        _ => Expect::Unknown,
    }
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub name: String,
    pub expect: Expect,
    pub disjuncts: DisjunctSet,
}

impl Benchmark {
    pub fn from_source(name: &str, src: &str) -> Result<Benchmark, String> {
        let p = parse(src).map_err(|e| format!("{name}:{e}"))?;
        let disjuncts = derive(&p).map_err(|e| format!("{name}: {e}"))?;
        Ok(Benchmark {
            name: name.to_string(),
            expect: read_expect(src),
            disjuncts,
        })
    }

    pub fn num_inputs(&self) -> usize {
        self.disjuncts.models[0].inputs().len()
    }

    pub fn num_vars(&self) -> usize {
        self.disjuncts.models[0].num_vars()
    }
}

/// Loads every `.fpv` file of `dir`, sorted by name.
pub fn load_dir(dir: &Path) -> Result<Vec<Benchmark>, String> {
    let entries = fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "fpv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(format!("no .fpv files in {}", dir.display()));
    }
    paths
        .iter()
        .map(|p| {
            let src = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            Benchmark::from_source(&benchmark_name(p), &src)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixConfig {
    pub timeout: Duration,
    pub node_budget: Option<u64>,
    pub jobs: usize,
    /// Horizon used by the diversify feature sets.
    pub horizon: usize,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        MatrixConfig {
            timeout: crate::search::DEFAULT_TIMEOUT,
            node_budget: None,
            jobs: 1,
            horizon: crate::search::DEFAULT_HORIZON,
        }
    }
}

/// Timeouts and total time over the runs of one class.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClassCell {
    pub runs: usize,
    pub to: usize,
    pub t_s: f64,
}

impl ClassCell {
    fn add(&mut self, r: &RunRecord) {
        self.runs += 1;
        self.t_s += r.t_s;
        if r.verdict == "TIMEOUT" {
            self.to += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Class {
    Sat,
    Unsat,
    All,
}

impl Class {
    pub const ALL: [Class; 3] = [Class::Sat, Class::Unsat, Class::All];

    pub fn name(self) -> &'static str {
        match self {
            Class::Sat => "SAT",
            Class::Unsat => "UNSAT",
            Class::All => "ALL",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub strategy: PropertyKind,
    pub features: Features,
    pub sat: ClassCell,
    pub unsat: ClassCell,
    pub all: ClassCell,
}

impl Cell {
    pub fn class(&self, c: Class) -> &ClassCell {
        match c {
            Class::Sat => &self.sat,
            Class::Unsat => &self.unsat,
            Class::All => &self.all,
        }
    }
}

/// Spread of total time across the strategies of one feature row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowStats {
    pub features: Features,
    pub class: Class,
    pub sigma: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixReport {
    pub strategies: Vec<PropertyKind>,
    /// Feature-major, strategies in column order.
    pub cells: Vec<Cell>,
    pub rows: Vec<RowStats>,
    /// `(benchmark, |I|, |X|)`.
    pub sizes: Vec<(String, usize, usize)>,
    /// Benchmarks left out of the aggregates (unknown class, no verdict).
    pub excluded: Vec<String>,
    /// Annotation mismatches and SAT/UNSAT disagreements.
    pub problems: Vec<String>,
}

impl MatrixReport {
    pub fn cell(&self, s: PropertyKind, f: Features) -> Option<&Cell> {
        self.cells.iter().find(|c| c.strategy == s && c.features == f)
    }

    pub fn row(&self, f: Features, class: Class) -> Option<&RowStats> {
        self.rows.iter().find(|r| r.features == f && r.class == class)
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct MatrixRun {
    pub records: Vec<RunRecord>,
    pub report: MatrixReport,
}

/// Runs all strategies and feature sets over the benchmarks of `dir`.
pub fn run_matrix(dir: &Path, cfg: &MatrixConfig) -> Result<MatrixRun, String> {
    let benches = load_dir(dir)?;
    run_benchmarks(&benches, cfg)
}

pub fn run_benchmarks(benches: &[Benchmark], cfg: &MatrixConfig) -> Result<MatrixRun, String> {
    let mut tasks = Vec::new();
    for (bi, _) in benches.iter().enumerate() {
        for f in Features::ALL {
            for s in PropertyKind::ALL {
                tasks.push((bi, f, s));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| e.to_string())?;
    let records: Vec<RunRecord> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(bi, f, s)| {
                let b = &benches[bi];
                let sc = SearchConfig::with_features(s, f, cfg.horizon)
                    .timeout(cfg.timeout)
                    .nodes(cfg.node_budget);
                let out = solve_disjuncts(&b.disjuncts, &sc);
                // label by the requested set: with horizon 0 a diversify run
                // is configured exactly like the baseline one
                RunRecord {
                    features: f.name().to_string(),
                    ..RunRecord::new(&b.name, &sc, &out)
                }
            })
            .collect()
    });
    let report = build_report(benches, &records);
    Ok(MatrixRun { records, report })
}

/// Aggregates run records into the matrix report.
pub fn build_report(benches: &[Benchmark], records: &[RunRecord]) -> MatrixReport {
    let strategies = PropertyKind::ALL.to_vec();
    let mut problems = Vec::new();
    let mut excluded = Vec::new();
    let mut classes = Vec::new();
    for b in benches {
        let runs: Vec<&RunRecord> = records.iter().filter(|r| r.benchmark == b.name).collect();
        let any_sat = runs.iter().any(|r| r.verdict == "SAT");
        let any_unsat = runs.iter().any(|r| r.verdict == "UNSAT");
        if any_sat && any_unsat {
            problems.push(format!("{}: runs disagree on SAT vs UNSAT", b.name));
        }
        for r in &runs {
            let wrong = matches!(
                (b.expect, r.verdict.as_str()),
                (Expect::Sat, "UNSAT") | (Expect::Unsat, "SAT")
            );
            if wrong {
                problems.push(format!(
                    "{}: expected {} but {} under {}/{}",
                    b.name,
                    b.expect.name(),
                    r.verdict,
                    r.strategy,
                    r.features
                ));
            }
        }
        let class = match b.expect {
            Expect::Sat => Some(Class::Sat),
            Expect::Unsat => Some(Class::Unsat),
            Expect::Unknown if any_sat => Some(Class::Sat),
            Expect::Unknown if any_unsat => Some(Class::Unsat),
            Expect::Unknown => None,
        };
        if class.is_none() {
            excluded.push(b.name.clone());
        }
        classes.push((b.name.as_str(), class));
    }
    let mut cells = Vec::new();
    for f in Features::ALL {
        for &s in &strategies {
            let mut cell = Cell {
                strategy: s,
                features: f,
                sat: ClassCell::default(),
                unsat: ClassCell::default(),
                all: ClassCell::default(),
            };
            for r in records
                .iter()
                .filter(|r| r.strategy == s.name() && r.features == f.name())
            {
                let class = classes
                    .iter()
                    .find(|(n, _)| *n == r.benchmark)
                    .and_then(|(_, c)| *c);
                match class {
                    Some(Class::Sat) => cell.sat.add(r),
                    Some(Class::Unsat) => cell.unsat.add(r),
                    _ => continue,
                }
                cell.all.add(r);
            }
            cells.push(cell);
        }
    }
    let mut rows = Vec::new();
    for f in Features::ALL {
        for class in Class::ALL {
            let ts: Vec<f64> = cells
                .iter()
                .filter(|c| c.features == f)
                .map(|c| c.class(class).t_s)
                .collect();
            rows.push(RowStats {
                features: f,
                class,
                sigma: population_std(&ts),
                mu: mean(&ts),
            });
        }
    }
    let sizes = benches
        .iter()
        .map(|b| (b.name.clone(), b.num_inputs(), b.num_vars()))
        .collect();
    MatrixReport {
        strategies,
        cells,
        rows,
        sizes,
        excluded,
        problems,
    }
}

/// Per-row spread of total time, compared with the baseline row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowComparison {
    pub features: Features,
    pub min: f64,
    pub max: f64,
    pub sigma: f64,
    pub mu: f64,
    /// `sigma / sigma(baseline)`; `None` when the baseline spread is zero.
    pub ratio: Option<f64>,
}

pub fn compare_rows(report: &MatrixReport) -> Vec<RowComparison> {
    let sigma_of = |f: Features| report.row(f, Class::All).map(|r| r.sigma).unwrap_or(0.0);
    let base = sigma_of(Features::BASELINE);
    Features::ALL
        .iter()
        .map(|&f| {
            let ts: Vec<f64> = report
                .cells
                .iter()
                .filter(|c| c.features == f)
                .map(|c| c.all.t_s)
                .collect();
            let sigma = sigma_of(f);
            RowComparison {
                features: f,
                min: ts.iter().copied().fold(f64::INFINITY, f64::min),
                max: ts.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                sigma,
                mu: mean(&ts),
                ratio: (base > 0.0).then(|| sigma / base),
            }
        })
        .collect()
}

/// The aggregate table as aligned text.
pub fn render_report(report: &MatrixReport) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:<20} {:<6} {:<4}", "features", "class", "");
    for k in &report.strategies {
        let _ = write!(s, " {:>10}", k.heading());
    }
    let _ = writeln!(s, " {:>10}", "sigma/mu");
    for f in Features::ALL {
        for class in Class::ALL {
            let row = report.row(f, class).expect("every row is computed");
            let cells: Vec<&ClassCell> = report
                .strategies
                .iter()
                .map(|&k| report.cell(k, f).expect("cell").class(class))
                .collect();
            let _ = write!(s, "{:<20} {:<6} {:<4}", f.name(), class.name(), "To");
            for c in &cells {
                let _ = write!(s, " {:>10}", c.to);
            }
            let _ = writeln!(s, " {:>10.3}", row.sigma);
            let _ = write!(s, "{:<20} {:<6} {:<4}", "", "", "t_s");
            for c in &cells {
                let _ = write!(s, " {:>10.3}", c.t_s);
            }
            let _ = writeln!(s, " {:>10.3}", row.mu);
        }
    }
    let _ = writeln!(s);
    for r in compare_rows(report) {
        let ratio = r
            .ratio
            .map(|x| format!("{x:.3}"))
            .unwrap_or_else(|| "n/a".into());
        let _ = writeln!(
            s,
            "{:<20} min {:.3}  max {:.3}  sigma {:.3}  mu {:.3}  sigma/baseline {}",
            r.features.name(),
            r.min,
            r.max,
            r.sigma,
            r.mu,
            ratio
        );
    }
    let _ = writeln!(s);
    for (name, i, x) in &report.sizes {
        let red = if *x == 0 {
            0.0
        } else {
            100.0 * (1.0 - *i as f64 / *x as f64)
        };
        let _ = writeln!(s, "{name}: |I| = {i}, |X| = {x}, restriction removes {red:.1}% of the variables");
    }
    for name in &report.excluded {
        let _ = writeln!(s, "excluded (no verdict, unknown class): {name}");
    }
    for p in &report.problems {
        let _ = writeln!(s, "PROBLEM: {p}");
    }
    s
}

/// `report.csv` becomes `report.summary.csv`.
pub fn summary_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    out.with_file_name(format!("{stem}.summary.csv"))
}

pub fn write_summary_csv(path: &Path, report: &MatrixReport) -> Result<(), String> {
    let mut w = csv::Writer::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let err = |e: csv::Error| e.to_string();
    w.write_record(["features", "class", "strategy", "to", "t_s", "runs"])
        .map_err(err)?;
    for c in &report.cells {
        for class in Class::ALL {
            let cc = c.class(class);
            w.write_record([
                c.features.name().to_string(),
                class.name().to_string(),
                c.strategy.name().to_string(),
                cc.to.to_string(),
                format!("{:.6}", cc.t_s),
                cc.runs.to_string(),
            ])
            .map_err(err)?;
        }
    }
    for r in &report.rows {
        for (label, v) in [("sigma", r.sigma), ("mu", r.mu)] {
            w.write_record([
                r.features.name().to_string(),
                r.class.name().to_string(),
                label.to_string(),
                String::new(),
                format!("{v:.6}"),
                String::new(),
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| e.to_string())
}
