//! Depth-first search with five-way splitting and trailed backtracking.

use std::fmt;
use std::time::{Duration, Instant};

use crate::interval::FpInterval;
use crate::metrics::PropertyKind;
use crate::model::{DisjunctSet, Model, VarId};
use crate::propagate::{execute, DomainStore, Propagator};
use crate::strategy::SelectorState;

/// Which of the two search features are enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Features {
    pub restrict: bool,
    pub diversify: bool,
}

impl Features {
    pub const BASELINE: Features = Features {
        restrict: false,
        diversify: false,
    };
    pub const RESTRICT: Features = Features {
        restrict: true,
        diversify: false,
    };
    pub const DIVERSIFY: Features = Features {
        restrict: false,
        diversify: true,
    };
    pub const BOTH: Features = Features {
        restrict: true,
        diversify: true,
    };
    pub const ALL: [Features; 4] = [
        Features::BASELINE,
        Features::RESTRICT,
        Features::DIVERSIFY,
        Features::BOTH,
    ];

    pub fn name(self) -> &'static str {
        match (self.restrict, self.diversify) {
            (false, false) => "baseline",
            (true, false) => "restrict",
            (false, true) => "diversify",
            (true, true) => "restrict+diversify",
        }
    }

    pub fn from_name(s: &str) -> Option<Features> {
        Features::ALL.into_iter().find(|f| f.name() == s)
    }
}

impl fmt::Display for Features {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);
pub const DEFAULT_HORIZON: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub property: PropertyKind,
    pub restrict: bool,
    /// Prohibition horizon; 0 disables diversification.
    pub diversify: usize,
    pub timeout: Duration,
    pub node_budget: Option<u64>,
    /// Record `(depth, variable)` for every selection.
    pub trace: bool,
}

impl SearchConfig {
    /// No restriction, no diversification, 60 s.
    pub fn new(property: PropertyKind) -> SearchConfig {
        SearchConfig {
            property,
            restrict: false,
            diversify: 0,
            timeout: DEFAULT_TIMEOUT,
            node_budget: None,
            trace: false,
        }
    }

    /// Configuration of a feature set, using `u` when diversifying.
    pub fn with_features(property: PropertyKind, features: Features, u: usize) -> SearchConfig {
        SearchConfig {
            restrict: features.restrict,
            diversify: if features.diversify { u } else { 0 },
            ..SearchConfig::new(property)
        }
    }

    pub fn features(&self) -> Features {
        Features {
            restrict: self.restrict,
            diversify: self.diversify > 0,
        }
    }

    pub fn timeout(mut self, t: Duration) -> Self {
        self.timeout = t;
        self
    }

    pub fn nodes(mut self, n: Option<u64>) -> Self {
        self.node_budget = n;
        self
    }

    pub fn traced(mut self) -> Self {
        self.trace = true;
        self
    }
}

/// A certified counter-example.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    /// Input names and values, in declaration order.
    pub inputs: Vec<(String, f64)>,
    /// Values of every variable of the disjunct model that produced it.
    pub values: Vec<f64>,
}

impl Witness {
    pub fn input_values(&self) -> Vec<f64> {
        self.inputs.iter().map(|(_, v)| *v).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Sat(Witness),
    Unsat,
    Timeout,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Sat(_) => "SAT",
            Verdict::Unsat => "UNSAT",
            Verdict::Timeout => "TIMEOUT",
        }
    }

    pub fn is_sat(&self) -> bool {
        matches!(self, Verdict::Sat(_))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    /// Search nodes entered below the root.
    pub nodes: u64,
    pub fails: u64,
    pub max_depth: usize,
    /// Selections where every unbound candidate was prohibited.
    pub fallbacks: u64,
    pub elapsed: Duration,
}

impl Stats {
    fn absorb(&mut self, o: &Stats) {
        self.nodes += o.nodes;
        self.fails += o.fails;
        self.max_depth = self.max_depth.max(o.max_depth);
        self.fallbacks += o.fallbacks;
        self.elapsed += o.elapsed;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub verdict: Verdict,
    pub stats: Stats,
    /// `(depth, variable)` of every selection, when tracing.
    pub trace: Vec<(usize, VarId)>,
}

struct Frame {
    var: VarId,
    children: Vec<FpInterval>,
    next: usize,
    depth: usize,
    store_mark: usize,
    sel_mark: usize,
}

enum Stop {
    Sat(Witness),
    Limit,
}

struct Solver<'a> {
    m: &'a Model,
    store: DomainStore,
    prop: Propagator,
    sel: SelectorState,
    deadline: Instant,
    budget: Option<u64>,
    stats: Stats,
    trace: Option<Vec<(usize, VarId)>>,
}

impl Solver<'_> {
    /// Certifies a leaf by re-executing the program on its free values.
    fn certify(&self) -> Option<Witness> {
        let seed: Vec<Option<f64>> = self
            .store
            .domains()
            .iter()
            .map(|d| d.is_point().then(|| d.lo()))
            .collect();
        let values = execute(self.m, &seed)?;
        let inputs = self
            .m
            .inputs()
            .iter()
            .map(|&v| (self.m.var(v).name.clone(), values[v.0]))
            .collect();
        Some(Witness { inputs, values })
    }

    /// Selects and splits at a node that propagated successfully; pushes a
    /// frame, or returns a witness / records a failed leaf.
    fn expand(&mut self, depth: usize, stack: &mut Vec<Frame>) -> Option<Witness> {
        match self.sel.select(&self.store, self.m, depth) {
            None => {
                let w = self.certify();
                if w.is_none() {
                    self.stats.fails += 1;
                }
                w
            }
            Some(x) => {
                if let Some(t) = &mut self.trace {
                    t.push((depth, x));
                }
                let children = self.store.get(x).split5().children;
                stack.push(Frame {
                    var: x,
                    children,
                    next: 0,
                    depth,
                    store_mark: self.store.mark(),
                    sel_mark: self.sel.mark(),
                });
                None
            }
        }
    }

    fn run(&mut self) -> Result<(), Stop> {
        if self.prop.propagate_all(&mut self.store).is_failure() {
            self.stats.fails += 1;
            return Ok(());
        }
        let mut stack = Vec::new();
        if let Some(w) = self.expand(0, &mut stack) {
            return Err(Stop::Sat(w));
        }
        while let Some(top) = stack.last_mut() {
            if top.next == top.children.len() {
                stack.pop();
                continue;
            }
            let child = top.children[top.next];
            top.next += 1;
            let (var, depth) = (top.var, top.depth + 1);
            self.store.restore(top.store_mark);
            self.sel.restore_to(top.sel_mark).expect("marks follow the stack");
            if self.budget.is_some_and(|b| self.stats.nodes >= b) || Instant::now() >= self.deadline {
                return Err(Stop::Limit);
            }
            self.stats.nodes += 1;
            self.stats.max_depth = self.stats.max_depth.max(depth);
            self.store.set(var, child);
            if self.prop.propagate_from(&mut self.store, &[var]).is_failure() {
                self.stats.fails += 1;
                continue;
            }
            if let Some(w) = self.expand(depth, &mut stack) {
                return Err(Stop::Sat(w));
            }
        }
        Ok(())
    }
}

fn solve_until(m: &Model, cfg: &SearchConfig, deadline: Instant, budget: Option<u64>) -> SearchOutcome {
    let start = Instant::now();
    let mut s = Solver {
        m,
        store: DomainStore::new(m),
        prop: Propagator::new(m),
        sel: SelectorState::new(m, cfg.property, cfg.restrict, cfg.diversify),
        deadline,
        budget,
        stats: Stats::default(),
        trace: cfg.trace.then(Vec::new),
    };
    let verdict = match s.run() {
        Ok(_) => Verdict::Unsat,
        Err(Stop::Sat(w)) => Verdict::Sat(w),
        Err(Stop::Limit) => Verdict::Timeout,
    };
    s.stats.fallbacks = s.sel.fallbacks();
    s.stats.elapsed = start.elapsed();
    SearchOutcome {
        verdict,
        stats: s.stats,
        trace: s.trace.unwrap_or_default(),
    }
}

/// Searches one conjunctive model for a counter-example.
pub fn solve(m: &Model, cfg: &SearchConfig) -> SearchOutcome {
    solve_until(m, cfg, Instant::now() + cfg.timeout, cfg.node_budget)
}

/// Solves the disjuncts in order under one shared time and node budget.
pub fn solve_disjuncts(ds: &DisjunctSet, cfg: &SearchConfig) -> SearchOutcome {
    let start = Instant::now();
    let deadline = start + cfg.timeout;
    let mut total = Stats::default();
    let mut trace = Vec::new();
    let mut verdict = Verdict::Unsat;
    for m in &ds.models {
        let budget = cfg.node_budget.map(|b| b.saturating_sub(total.nodes));
        let out = solve_until(m, cfg, deadline, budget);
        total.absorb(&out.stats);
        trace.extend(out.trace);
        match out.verdict {
            Verdict::Unsat => continue,
            v => {
                verdict = v;
                break;
            }
        }
    }
    total.elapsed = start.elapsed();
    SearchOutcome {
        verdict,
        stats: total,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::derive;
    use crate::parser::parse;
    use crate::propagate::{concrete_eval, EvalVerdict};

    fn disjuncts(src: &str) -> DisjunctSet {
        derive(&parse(src).unwrap()).unwrap()
    }

    #[test]
    fn infeasible_root_has_no_nodes() {
        let ds = disjuncts("input x in [0, 5]; assume(x >= 2); assume(x <= 1); assert(x > 0);");
        for p in PropertyKind::ALL {
            for f in Features::ALL {
                let out = solve_disjuncts(&ds, &SearchConfig::with_features(p, f, 2));
                assert_eq!(out.verdict, Verdict::Unsat);
                assert_eq!(out.stats.nodes, 0);
            }
        }
    }

    #[test]
    fn singleton_input_counterexample() {
        let ds = disjuncts("input x in [1, 1]; assert(x != 1);");
        let out = solve_disjuncts(&ds, &SearchConfig::new(PropertyKind::Lex));
        match out.verdict {
            Verdict::Sat(w) => assert_eq!(w.inputs, vec![("x".to_string(), 1.0)]),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn finds_certified_witness_by_splitting() {
        let ds = disjuncts(
            "input x in [0, 100]; input y in [0, 100]; z = x * y; assume(x > 3); assert(z < 1000 || y < 50);",
        );
        for f in Features::ALL {
            let out = solve_disjuncts(&ds, &SearchConfig::with_features(PropertyKind::Density, f, 2));
            let Verdict::Sat(w) = &out.verdict else {
                panic!("{f}: {:?}", out.verdict)
            };
            assert_eq!(concrete_eval(&ds.models[0], &w.input_values()), EvalVerdict::Counterexample);
        }
    }

    #[test]
    fn disjunct_handling() {
        let ds = disjuncts("input x in [0, 4]; assert(x <= 10 && x >= 0 && x != 3);");
        assert_eq!(ds.models.len(), 3);
        let out = solve_disjuncts(&ds, &SearchConfig::new(PropertyKind::Width));
        assert_eq!(out.verdict.name(), "SAT");
        let ds = disjuncts("input x in [0, 4]; assert(x <= 10 && x >= 0);");
        assert_eq!(solve_disjuncts(&ds, &SearchConfig::new(PropertyKind::Width)).verdict, Verdict::Unsat);
        let ds = disjuncts("input x in [0, 4]; input y in [0, 4]; assert(x * y != x * y + 0.5 && x < 5);");
        let cfg = SearchConfig::new(PropertyKind::Width).nodes(Some(10));
        assert_eq!(solve_disjuncts(&ds, &cfg).verdict, Verdict::Timeout);
    }

    #[test]
    fn zero_horizon_matches_baseline() {
        let ds = disjuncts(
            "input x in [-4, 4]; input y in [-4, 4]; a = x * y; b = a - y; assert(b != 1.25);",
        );
        for p in PropertyKind::ALL {
            let base = solve(&ds.models[0], &SearchConfig::new(p).traced().nodes(Some(5000)));
            let mut cfg = SearchConfig::new(p).traced().nodes(Some(5000));
            cfg.diversify = 0;
            let zero = solve(&ds.models[0], &cfg);
            assert_eq!(base.trace, zero.trace);
            assert_eq!(base.stats.nodes, zero.stats.nodes);
        }
    }

    #[test]
    fn restrict_selects_inputs_only() {
        let ds = disjuncts("input x in [-4, 4]; input y in [-4, 4]; a = x * y; b = a - y; assert(b != 1.25);");
        let m = &ds.models[0];
        let out = solve(m, &SearchConfig::with_features(PropertyKind::Width, Features::BOTH, 2).traced());
        assert!(!out.trace.is_empty());
        assert!(out.trace.iter().all(|(_, v)| m.var(*v).is_input));
    }
}
