//! Interval propagation under round-to-nearest-even semantics.
//!
//! Forward projections are exact hulls of the rounded results. Backward
//! projections invert the real operation with outward rounding, then widen
//! by one ulp of the format, so no feasible float is ever removed.
//! Constraints are revised HC4-style over a flattened expression tree and
//! scheduled by a FIFO worklist.

use std::collections::VecDeque;

use crate::fpbits::{canonical, FloatFormat, FormatKind};
use crate::interval::FpInterval;
use crate::model::{BinOp, CmpOp, ConstraintKind, Expr, Model, VarId};

/// Variable domains with a trail for backtracking.
#[derive(Debug, Clone)]
pub struct DomainStore {
    doms: Vec<FpInterval>,
    revisions: Vec<u64>,
    trail: Vec<(usize, FpInterval)>,
}

impl DomainStore {
    pub fn new(m: &Model) -> DomainStore {
        DomainStore::from_domains(m.root_domains())
    }

    pub fn from_domains(doms: Vec<FpInterval>) -> DomainStore {
        let n = doms.len();
        DomainStore {
            doms,
            revisions: vec![0; n],
            trail: Vec::new(),
        }
    }

    #[inline]
    pub fn get(&self, v: VarId) -> FpInterval {
        self.doms[v.0]
    }

    pub fn domains(&self) -> &[FpInterval] {
        &self.doms
    }

    pub fn revision(&self, v: VarId) -> u64 {
        self.revisions[v.0]
    }

    pub fn is_bound(&self, v: VarId) -> bool {
        self.doms[v.0].is_point()
    }

    /// Replaces a domain, recording the old one. Returns whether it changed.
    pub fn set(&mut self, v: VarId, iv: FpInterval) -> bool {
        let old = self.doms[v.0];
        if old == iv {
            return false;
        }
        self.trail.push((v.0, old));
        self.doms[v.0] = iv;
        self.revisions[v.0] += 1;
        true
    }

    pub fn mark(&self) -> usize {
        self.trail.len()
    }

    /// Undoes every change made since `mark`.
    pub fn restore(&mut self, mark: usize) {
        assert!(mark <= self.trail.len(), "stale domain trail mark");
        while self.trail.len() > mark {
            let (v, old) = self.trail.pop().expect("non-empty");
            self.doms[v] = old;
            self.revisions[v] += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Fixpoint,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropagationResult {
    pub outcome: Outcome,
    /// Variables whose domain changed, in order of first change.
    pub changed: Vec<VarId>,
}

impl PropagationResult {
    pub fn is_failure(&self) -> bool {
        self.outcome == Outcome::Failure
    }
}

/// Which operand of `z = x op y` a backward projection refines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

fn finish(fmt: FloatFormat, lo: f64, hi: f64) -> Option<FpInterval> {
    let max = fmt.max_finite();
    if lo.is_nan() || hi.is_nan() || lo > max || hi < -max {
        return None;
    }
    let lo = canonical(lo.max(-max));
    let hi = canonical(hi.min(max));
    Some(FpInterval::new_unchecked(lo, hi, fmt))
}

fn corners(fmt: FloatFormat, op: BinOp, a: &FpInterval, b: &FpInterval) -> Option<FpInterval> {
    let c = [
        fmt.apply(op, a.lo(), b.lo()),
        fmt.apply(op, a.lo(), b.hi()),
        fmt.apply(op, a.hi(), b.lo()),
        fmt.apply(op, a.hi(), b.hi()),
    ];
    let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    finish(fmt, lo, hi)
}

/// Negative and positive parts of a domain, zero excluded.
fn sign_parts(b: &FpInterval) -> [Option<FpInterval>; 2] {
    let fmt = b.format();
    let tiny = fmt.min_subnormal();
    let neg = (b.lo() < 0.0).then(|| FpInterval::new_unchecked(b.lo(), b.hi().min(-tiny), fmt));
    let pos = (b.hi() > 0.0).then(|| FpInterval::new_unchecked(b.lo().max(tiny), b.hi(), fmt));
    [neg, pos]
}

fn hull_opt(a: Option<FpInterval>, b: Option<FpInterval>) -> Option<FpInterval> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a.hull(&b)),
        (a, None) => a,
        (None, b) => b,
    }
}

/// Exact hull of `{ fl(u op v) : u in a, v in b }` over finite results.
/// `None` when no finite result exists.
pub fn forward_project(op: BinOp, a: &FpInterval, b: &FpInterval) -> Option<FpInterval> {
    let fmt = a.format();
    match op {
        BinOp::Add => finish(
            fmt,
            fmt.apply(op, a.lo(), b.lo()),
            fmt.apply(op, a.hi(), b.hi()),
        ),
        BinOp::Sub => finish(
            fmt,
            fmt.apply(op, a.lo(), b.hi()),
            fmt.apply(op, a.hi(), b.lo()),
        ),
        BinOp::Mul => corners(fmt, op, a, b),
        BinOp::Div => {
            if b.lo() > 0.0 || b.hi() < 0.0 {
                corners(fmt, op, a, b)
            } else {
                let [neg, pos] = sign_parts(b);
                hull_opt(
                    neg.and_then(|n| corners(fmt, op, a, &n)),
                    pos.and_then(|p| corners(fmt, op, a, &p)),
                )
            }
        }
    }
}

/// A real interval with possibly infinite bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Real {
    lo: f64,
    hi: f64,
}

const WHOLE: Real = Real {
    lo: f64::NEG_INFINITY,
    hi: f64::INFINITY,
};

fn down(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else if v.is_finite() {
        v.next_down()
    } else {
        v
    }
}

fn up(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else if v.is_finite() {
        v.next_up()
    } else {
        v
    }
}

impl Real {
    fn of(iv: &FpInterval) -> Real {
        Real {
            lo: iv.lo(),
            hi: iv.hi(),
        }
    }

    fn contains_zero(&self) -> bool {
        self.lo <= 0.0 && 0.0 <= self.hi
    }

    fn add(self, o: Real) -> Real {
        Real {
            lo: down(self.lo + o.lo),
            hi: up(self.hi + o.hi),
        }
    }

    fn sub(self, o: Real) -> Real {
        Real {
            lo: down(self.lo - o.hi),
            hi: up(self.hi - o.lo),
        }
    }

    fn mul(self, o: Real) -> Real {
        // 0 * inf is taken as 0, the limit along a bounded factor
        let m = |a: f64, b: f64| if a == 0.0 || b == 0.0 { 0.0 } else { a * b };
        let c = [m(self.lo, o.lo), m(self.lo, o.hi), m(self.hi, o.lo), m(self.hi, o.hi)];
        Real {
            lo: down(c.iter().copied().fold(f64::INFINITY, f64::min)),
            hi: up(c.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        }
    }

    /// Division by an interval excluding zero.
    fn div_nonzero(self, o: Real) -> Real {
        let c = [self.lo / o.lo, self.lo / o.hi, self.hi / o.lo, self.hi / o.hi];
        if c.iter().any(|v| v.is_nan()) {
            return WHOLE;
        }
        Real {
            lo: down(c.iter().copied().fold(f64::INFINITY, f64::min)),
            hi: up(c.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        }
    }

    fn hull(self, o: Real) -> Real {
        Real {
            lo: self.lo.min(o.lo),
            hi: self.hi.max(o.hi),
        }
    }
}

/// `num / den` over the nonzero floats of `den`.
fn div_by_domain(num: Real, den: &FpInterval) -> Option<Real> {
    let d = Real::of(den);
    if !d.contains_zero() {
        return Some(num.div_nonzero(d));
    }
    if num.contains_zero() {
        return Some(WHOLE);
    }
    let [neg, pos] = sign_parts(den);
    let parts: Vec<Real> = [neg, pos]
        .into_iter()
        .flatten()
        .map(|p| num.div_nonzero(Real::of(&p)))
        .collect();
    parts.into_iter().reduce(Real::hull)
}

/// Reals whose rounding falls into `z`: up to the midpoints with the
/// neighbouring floats, which are exact in `f64` except for the double
/// format where they are rounded outward.
fn preimage(z: &FpInterval) -> Real {
    let fmt = z.format();
    let exact = fmt.kind != FormatKind::Double;
    let lo = match fmt.next_down(z.lo()) {
        Ok(p) if exact => 0.5 * p + 0.5 * z.lo(),
        Ok(p) => down(0.5 * p + 0.5 * z.lo()),
        Err(_) => f64::NEG_INFINITY,
    };
    let hi = match fmt.next_up(z.hi()) {
        Ok(n) if exact => 0.5 * n + 0.5 * z.hi(),
        Ok(n) => up(0.5 * n + 0.5 * z.hi()),
        Err(_) => f64::INFINITY,
    };
    Real { lo, hi }
}

/// Narrows `dom` to the members of the real range `r`, widened by one ulp.
fn narrow(dom: &FpInterval, r: Real) -> Option<FpInterval> {
    let fmt = dom.format();
    let max = fmt.max_finite();
    if r.lo > max || r.hi < -max {
        return None;
    }
    let lo = if r.lo.is_nan() || r.lo <= -max {
        dom.lo()
    } else {
        let v = fmt.round_down(r.lo)?;
        fmt.next_down(v).unwrap_or(v)
    };
    let hi = if r.hi.is_nan() || r.hi >= max {
        dom.hi()
    } else {
        let v = fmt.round_up(r.hi)?;
        fmt.next_up(v).unwrap_or(v)
    };
    if lo > hi {
        return None;
    }
    dom.intersect(&FpInterval::new_unchecked(lo, hi, fmt))
}

/// Sound over-approximation of `{ u in target : exists v in known,
/// fl(u op v) in z }` (left side) or of `{ v in target : exists u in known,
/// fl(u op v) in z }` (right side). `None` when provably empty.
pub fn backward_project(
    op: BinOp,
    z: &FpInterval,
    known: &FpInterval,
    target: &FpInterval,
    side: Side,
) -> Option<FpInterval> {
    let r = preimage(z);
    let k = Real::of(known);
    let range = match (op, side) {
        (BinOp::Add, _) => r.sub(k),
        (BinOp::Sub, Side::Left) => r.add(k),
        (BinOp::Sub, Side::Right) => k.sub(r),
        (BinOp::Mul, _) => div_by_domain(r, known)?,
        (BinOp::Div, Side::Left) => r.mul(k),
        (BinOp::Div, Side::Right) => {
            if r.contains_zero() {
                WHOLE
            } else {
                k.div_nonzero(r)
            }
        }
    };
    narrow(target, range)
}

#[derive(Debug, Clone, Copy)]
enum Node {
    Var(usize),
    Lit(f64),
    Neg(usize),
    Bin(BinOp, usize, usize),
}

#[derive(Debug, Clone)]
struct Compiled {
    nodes: Vec<Node>,
    rel: CmpOp,
    lhs: usize,
    rhs: usize,
}

fn flatten(e: &Expr, out: &mut Vec<Node>) -> usize {
    let node = match e {
        Expr::Var(v) => Node::Var(v.0),
        Expr::Lit(c) => Node::Lit(*c),
        Expr::Neg(inner) => Node::Neg(flatten(inner, out)),
        Expr::Bin(op, l, r) => {
            let l = flatten(l, out);
            let r = flatten(r, out);
            Node::Bin(*op, l, r)
        }
    };
    out.push(node);
    out.len() - 1
}

fn compile(kind: &ConstraintKind) -> Compiled {
    let mut nodes = Vec::new();
    let (rel, lhs, rhs) = match kind {
        ConstraintKind::Assign { target, expr } => {
            let l = flatten(&Expr::Var(*target), &mut nodes);
            let r = flatten(expr, &mut nodes);
            (CmpOp::Eq, l, r)
        }
        ConstraintKind::Compare { op, lhs, rhs } => {
            let l = flatten(lhs, &mut nodes);
            let r = flatten(rhs, &mut nodes);
            (*op, l, r)
        }
    };
    Compiled {
        nodes,
        rel,
        lhs,
        rhs,
    }
}

fn negate(iv: &FpInterval) -> FpInterval {
    FpInterval::new_unchecked(-iv.hi(), -iv.lo(), iv.format())
}

/// Narrows `(a, b)` so that `a rel b` can hold, or `None`.
fn relate(rel: CmpOp, a: FpInterval, b: FpInterval) -> Option<(FpInterval, FpInterval)> {
    let fmt = a.format();
    let below = |v: f64| fmt.next_down(v).ok();
    let above = |v: f64| fmt.next_up(v).ok();
    let le = |a: FpInterval, b: FpInterval, strict: bool| -> Option<(FpInterval, FpInterval)> {
        let (a_hi, b_lo) = if strict {
            (below(b.hi())?, above(a.lo())?)
        } else {
            (b.hi(), a.lo())
        };
        Some((a.clip(f64::NEG_INFINITY, a_hi)?, b.clip(b_lo, f64::INFINITY)?))
    };
    match rel {
        CmpOp::Eq => {
            let i = a.intersect(&b)?;
            Some((i, i))
        }
        CmpOp::Le => le(a, b, false),
        CmpOp::Lt => le(a, b, true),
        CmpOp::Ge => le(b, a, false).map(|(b, a)| (a, b)),
        CmpOp::Gt => le(b, a, true).map(|(b, a)| (a, b)),
        CmpOp::Ne => {
            let prune = |s: &FpInterval, o: FpInterval| -> Option<FpInterval> {
                if !s.is_point() {
                    return Some(o);
                }
                let v = s.lo();
                if o.is_point() {
                    (o.lo() != v).then_some(o)
                } else if o.lo() == v {
                    Some(FpInterval::new_unchecked(above(v)?, o.hi(), fmt))
                } else if o.hi() == v {
                    Some(FpInterval::new_unchecked(o.lo(), below(v)?, fmt))
                } else {
                    Some(o)
                }
            };
            let b = prune(&a, b)?;
            let a = prune(&b, a)?;
            Some((a, b))
        }
    }
}

/// A narrowing of a domain wider than `EXACT_CARD` floats only wakes the
/// variable's constraints when it removes at least 1/`MIN_SHRINK` of the
/// floats; smaller ones are kept but not propagated further. Without this,
/// chains like `s = a + b, s < a` crawl one float per revision across
/// 2^30 values.
const EXACT_CARD: u128 = 4096;
const MIN_SHRINK: u128 = 64;

fn significant(old: &FpInterval, new: &FpInterval) -> bool {
    let (c0, c1) = (old.card(), new.card());
    let step = if c0 <= EXACT_CARD { 1 } else { c0 / MIN_SHRINK };
    new.is_point() || c0 - c1 >= step
}

/// A worklist propagator compiled from one model.
#[derive(Debug, Clone)]
pub struct Propagator {
    compiled: Vec<Compiled>,
    cstr: Vec<Vec<usize>>,
    fwd: Vec<FpInterval>,
    target: Vec<Option<FpInterval>>,
    queued: Vec<bool>,
    queue: VecDeque<usize>,
    revisions: u64,
}

impl Propagator {
    pub fn new(m: &Model) -> Propagator {
        let compiled: Vec<Compiled> = m.constraints().iter().map(|c| compile(&c.kind)).collect();
        let cstr = m.var_ids().map(|v| m.cstr(v).to_vec()).collect();
        let n = compiled.len();
        Propagator {
            compiled,
            cstr,
            fwd: Vec::new(),
            target: Vec::new(),
            queued: vec![false; n],
            queue: VecDeque::new(),
            revisions: 0,
        }
    }

    /// Number of constraint revisions performed so far.
    pub fn revisions(&self) -> u64 {
        self.revisions
    }

    /// Propagates every constraint to a fixpoint.
    pub fn propagate_all(&mut self, store: &mut DomainStore) -> PropagationResult {
        let all: Vec<usize> = (0..self.compiled.len()).collect();
        self.propagate(store, &all)
    }

    /// Propagates the constraints of `vars` to a fixpoint.
    pub fn propagate_from(&mut self, store: &mut DomainStore, vars: &[VarId]) -> PropagationResult {
        let mut seeds = Vec::new();
        for v in vars {
            seeds.extend_from_slice(&self.cstr[v.0]);
        }
        self.propagate(store, &seeds)
    }

    pub fn propagate(&mut self, store: &mut DomainStore, seeds: &[usize]) -> PropagationResult {
        self.queue.clear();
        self.queued.iter_mut().for_each(|q| *q = false);
        for &c in seeds {
            if !self.queued[c] {
                self.queued[c] = true;
                self.queue.push_back(c);
            }
        }
        let mut changed = Vec::new();
        let mut seen = vec![false; store.domains().len()];
        let mut touched = Vec::new();
        while let Some(c) = self.queue.pop_front() {
            self.queued[c] = false;
            touched.clear();
            self.revisions += 1;
            if !self.revise(c, store, &mut touched) {
                self.queue.clear();
                return PropagationResult {
                    outcome: Outcome::Failure,
                    changed,
                };
            }
            for &v in &touched {
                if !seen[v] {
                    seen[v] = true;
                    changed.push(VarId(v));
                }
                for &d in &self.cstr[v] {
                    if !self.queued[d] {
                        self.queued[d] = true;
                        self.queue.push_back(d);
                    }
                }
            }
        }
        PropagationResult {
            outcome: Outcome::Fixpoint,
            changed,
        }
    }

    /// One HC4 revision of constraint `ci`; returns false on failure.
    fn revise(&mut self, ci: usize, store: &mut DomainStore, touched: &mut Vec<usize>) -> bool {
        let c = &self.compiled[ci];
        let n = c.nodes.len();
        self.fwd.clear();
        let fmt = store.domains()[0].format();
        for node in &c.nodes {
            let iv = match *node {
                Node::Var(v) => store.doms[v],
                Node::Lit(k) => FpInterval::new_unchecked(k, k, fmt),
                Node::Neg(ch) => negate(&self.fwd[ch]),
                Node::Bin(op, l, r) => match forward_project(op, &self.fwd[l], &self.fwd[r]) {
                    Some(iv) => iv,
                    None => return false,
                },
            };
            self.fwd.push(iv);
        }
        let (l0, r0) = (self.fwd[c.lhs], self.fwd[c.rhs]);
        let Some((l1, r1)) = relate(c.rel, l0, r0) else {
            return false;
        };
        self.target.clear();
        self.target.resize(n, None);
        if l1 != l0 {
            self.target[c.lhs] = Some(l1);
        }
        if r1 != r0 {
            self.target[c.rhs] = Some(r1);
        }
        for i in (0..n).rev() {
            let Some(t) = self.target[i] else { continue };
            match c.nodes[i] {
                Node::Var(v) => {
                    let Some(nv) = store.doms[v].intersect(&t) else {
                        return false;
                    };
                    let old = store.doms[v];
                    if store.set(VarId(v), nv) && significant(&old, &nv) && !touched.contains(&v) {
                        touched.push(v);
                    }
                }
                Node::Lit(k) => {
                    if !t.contains(k) {
                        return false;
                    }
                }
                Node::Neg(ch) => {
                    let cur = self.target[ch].unwrap_or(self.fwd[ch]);
                    let Some(nv) = cur.intersect(&negate(&t)) else {
                        return false;
                    };
                    if nv != cur {
                        self.target[ch] = Some(nv);
                    }
                }
                Node::Bin(op, l, r) => {
                    let a = self.target[l].unwrap_or(self.fwd[l]);
                    let b = self.target[r].unwrap_or(self.fwd[r]);
                    let Some(a1) = backward_project(op, &t, &b, &a, Side::Left) else {
                        return false;
                    };
                    let Some(b1) = backward_project(op, &t, &a1, &b, Side::Right) else {
                        return false;
                    };
                    if a1 != a {
                        self.target[l] = Some(a1);
                    }
                    if b1 != b {
                        self.target[r] = Some(b1);
                    }
                }
            }
        }
        true
    }
}

/// Propagates every constraint of `m` over `store`.
pub fn propagate_to_fixpoint(store: &mut DomainStore, m: &Model) -> PropagationResult {
    Propagator::new(m).propagate_all(store)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalVerdict {
    Counterexample,
    NotCounterexample,
}

/// Runs the model on concrete values. `seed` gives a value for every
/// variable without a defining assignment; assignments are executed in
/// order. Returns all variable values when every constraint holds.
pub fn execute(m: &Model, seed: &[Option<f64>]) -> Option<Vec<f64>> {
    let fmt = m.format();
    let mut vals: Vec<Option<f64>> = vec![None; m.num_vars()];
    for v in m.free_vars() {
        let x = seed[v.0]?;
        if !m.var(v).domain.contains(x) || !fmt.is_member(x) {
            return None;
        }
        vals[v.0] = Some(canonical(x));
    }
    for (ci, c) in m.constraints().iter().enumerate() {
        if let ConstraintKind::Assign { target, expr } = &c.kind {
            if m.definition(*target) != Some(ci) {
                continue;
            }
            let x = expr.eval(fmt, &vals)?;
            if !m.var(*target).domain.contains(x) {
                return None;
            }
            vals[target.0] = Some(x);
        }
    }
    let vals: Vec<f64> = vals.into_iter().collect::<Option<_>>()?;
    let some: Vec<Option<f64>> = vals.iter().map(|&v| Some(v)).collect();
    for c in m.constraints() {
        let ok = match &c.kind {
            ConstraintKind::Assign { target, expr } => expr.eval(fmt, &some) == Some(vals[target.0]),
            ConstraintKind::Compare { op, lhs, rhs } => {
                match (lhs.eval(fmt, &some), rhs.eval(fmt, &some)) {
                    (Some(a), Some(b)) => op.holds(a, b),
                    _ => false,
                }
            }
        };
        if !ok {
            return None;
        }
    }
    Some(vals)
}

/// Certifies an input assignment (in the order of `m.inputs()`).
pub fn concrete_eval(m: &Model, inputs: &[f64]) -> EvalVerdict {
    let mut seed = vec![None; m.num_vars()];
    for (v, &x) in m.inputs().iter().zip(inputs) {
        seed[v.0] = Some(x);
    }
    if inputs.len() == m.inputs().len() && execute(m, &seed).is_some() {
        EvalVerdict::Counterexample
    } else {
        EvalVerdict::NotCounterexample
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpbits::pow2;
    use crate::model::derive;
    use crate::parser::parse;

    const F32: FloatFormat = FloatFormat::SINGLE;
    const MOCK: FloatFormat = FloatFormat::MOCK;

    fn iv(lo: f64, hi: f64) -> FpInterval {
        FpInterval::new(lo, hi, F32).unwrap()
    }

    #[test]
    fn forward_examples() {
        assert_eq!(forward_project(BinOp::Add, &iv(1.0, 1.0), &iv(2.0, 2.0)), Some(iv(3.0, 3.0)));
        let eps = pow2(-24);
        assert_eq!((1.0f32 + eps as f32) as f64, 1.0);
        assert_eq!(forward_project(BinOp::Add, &iv(1.0, 1.0), &iv(eps, eps)), Some(iv(1.0, 1.0)));
        assert_eq!(
            forward_project(BinOp::Mul, &iv(-2.0, 3.0), &iv(-1.0, 1.0)),
            Some(iv(-3.0, 3.0))
        );
        assert_eq!(forward_project(BinOp::Div, &iv(1.0, 1.0), &iv(0.0, 0.0)), None);
        let big = F32.max_finite();
        assert_eq!(forward_project(BinOp::Mul, &iv(big, big), &iv(2.0, 2.0)), None);
        assert_eq!(
            forward_project(BinOp::Mul, &iv(1.0, big), &iv(2.0, 2.0)),
            Some(iv(2.0, big))
        );
    }

    #[test]
    fn division_by_zero_straddling_divisor() {
        let r = forward_project(BinOp::Div, &iv(1.0, 1.0), &iv(-2.0, 4.0)).unwrap();
        let tiny = F32.min_subnormal();
        assert_eq!(r.lo(), F32.round(1.0 / -tiny).max(-F32.max_finite()));
        assert_eq!(r.hi(), F32.max_finite());
        let r = forward_project(BinOp::Div, &iv(1.0, 1.0), &iv(0.0, 4.0)).unwrap();
        assert_eq!(r.lo(), 0.25);
    }

    #[test]
    fn backward_examples() {
        let full = FpInterval::full(F32);
        let b = backward_project(BinOp::Add, &iv(3.0, 3.0), &iv(2.0, 2.0), &full, Side::Left).unwrap();
        assert!(b.contains(1.0));
        assert!(b.card() <= 8);
        let b = backward_project(BinOp::Mul, &iv(1.0, 1.0), &iv(1.0, 1.0), &full, Side::Left).unwrap();
        // oracle: scan a window of floats around 1
        let mut v = 0.5;
        while v < 2.0 {
            if F32.round(v * 1.0) == 1.0 {
                assert!(b.contains(v));
            }
            v = F32.next_up(v).unwrap();
        }
        assert!(b.card() <= 5);
        let b = backward_project(BinOp::Mul, &iv(0.0, 0.0), &iv(5.0, 5.0), &full, Side::Left).unwrap();
        assert!(b.contains(0.0));
    }

    /// Every member of `target` compatible with some member of `known` must
    /// survive, at the mock format.
    #[test]
    fn backward_is_sound_exhaustively_at_mock() {
        let all: Vec<f64> = {
            let mut v = -MOCK.max_finite();
            let mut out = vec![v];
            while v < MOCK.max_finite() {
                v = MOCK.next_up(v).unwrap();
                out.push(v);
            }
            out
        };
        let pick = |i: usize, w: usize| {
            let lo = all[i % all.len()];
            let hi = all[(i + w).min(all.len() - 1)];
            FpInterval::new(lo, hi, MOCK).unwrap()
        };
        let mut seed = 7usize;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            seed >> 33
        };
        let full = FpInterval::full(MOCK);
        for _ in 0..3000 {
            let z = pick(next(), next() % 12);
            let known = pick(next(), next() % 6);
            for op in [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div] {
                for side in [Side::Left, Side::Right] {
                    let res = backward_project(op, &z, &known, &full, side);
                    for &u in &all {
                        let mut k = known.lo();
                        loop {
                            let r = match side {
                                Side::Left => MOCK.apply(op, u, k),
                                Side::Right => MOCK.apply(op, k, u),
                            };
                            if r.is_finite() && z.contains(r) {
                                assert!(
                                    res.is_some_and(|i| i.contains(u)),
                                    "{op} {side:?} z={z} known={known} lost {u}"
                                );
                            }
                            if k >= known.hi() {
                                break;
                            }
                            k = MOCK.next_up(k).unwrap();
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn forward_is_exact_hull_at_mock() {
        let mut seed = 11u64;
        let mut next = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            seed
        };
        let max_ord = MOCK.max_ord();
        let mut rand_iv = |w: i64| {
            let a = (next() % (2 * max_ord as u64 + 1)) as i64 - max_ord;
            let b = (a + (next() % (w as u64 + 1)) as i64).min(max_ord);
            FpInterval::new(MOCK.from_ord(a).unwrap(), MOCK.from_ord(b).unwrap(), MOCK).unwrap()
        };
        for _ in 0..3000 {
            let a = rand_iv(10);
            let b = rand_iv(10);
            for op in [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div] {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                let mut u = a.lo();
                loop {
                    let mut v = b.lo();
                    loop {
                        let r = MOCK.apply(op, u, v);
                        if r.is_finite() {
                            lo = lo.min(r);
                            hi = hi.max(r);
                        }
                        if v >= b.hi() {
                            break;
                        }
                        v = MOCK.next_up(v).unwrap();
                    }
                    if u >= a.hi() {
                        break;
                    }
                    u = MOCK.next_up(u).unwrap();
                }
                let got = forward_project(op, &a, &b);
                if lo > hi {
                    assert_eq!(got, None, "{op} {a} {b}");
                } else {
                    let got = got.unwrap();
                    // exact unless an overflowing corner was clamped
                    assert!(got.lo() <= lo && got.hi() >= hi, "{op} {a} {b}");
                    let clamped = got.lo() == -MOCK.max_finite() || got.hi() == MOCK.max_finite();
                    if !clamped {
                        assert_eq!((got.lo(), got.hi()), (lo, hi), "{op} {a} {b}");
                    }
                }
            }
        }
    }

    fn model(src: &str) -> Model {
        derive(&parse(src).unwrap()).unwrap().models.remove(0)
    }

    #[test]
    fn fixpoint_examples() {
        let m = model("input x in [0, 5]; assume(x <= 1); assert(x > 100);");
        let mut s = DomainStore::new(&m);
        let r = propagate_to_fixpoint(&mut s, &m);
        assert_eq!(r.outcome, Outcome::Fixpoint);
        assert_eq!(s.get(VarId(0)), iv(0.0, 1.0));

        let m = model("input x in [0, 5]; assume(x >= 2); assume(x <= 1); assert(x > 0);");
        let mut s = DomainStore::new(&m);
        assert!(propagate_to_fixpoint(&mut s, &m).is_failure());

        let m = model("input x in [1.5, 1.5]; input y in [3, 3]; a = x * y; b = a - x / y; assert(b > 0);");
        let mut s = DomainStore::new(&m);
        let r = propagate_to_fixpoint(&mut s, &m);
        assert!(r.is_failure());
        let m = model("input x in [1.5, 1.5]; input y in [3, 3]; a = x * y; b = a - x / y; assert(b < 0);");
        let mut s = DomainStore::new(&m);
        assert_eq!(propagate_to_fixpoint(&mut s, &m).outcome, Outcome::Fixpoint);
        assert!(m.var_ids().all(|v| s.is_bound(v)));
        assert_eq!(s.get(m.find("b").unwrap()).lo(), F32.round(4.5 - F32.round(0.5)));
    }

    #[test]
    fn strict_comparisons_step_one_float() {
        let m = model("input x in [0, 1]; assert(x >= 1);");
        let mut s = DomainStore::new(&m);
        propagate_to_fixpoint(&mut s, &m);
        assert_eq!(s.get(VarId(0)).hi(), F32.next_down(1.0).unwrap());

        let m = model("input x in [1, 2]; assert(x != 1);");
        let mut s = DomainStore::new(&m);
        propagate_to_fixpoint(&mut s, &m);
        assert_eq!(s.get(VarId(0)), iv(1.0, 1.0));

        let m = model("input x in [1, 2]; assert(x == 1);");
        let mut s = DomainStore::new(&m);
        propagate_to_fixpoint(&mut s, &m);
        assert_eq!(s.get(VarId(0)), iv(F32.next_up(1.0).unwrap(), 2.0));
    }

    #[test]
    fn trail_restores_domains() {
        let m = model("input x in [0, 5]; y = x + 1; assert(y > 3);");
        let mut s = DomainStore::new(&m);
        let root = s.domains().to_vec();
        let mark = s.mark();
        propagate_to_fixpoint(&mut s, &m);
        assert_ne!(s.domains(), &root[..]);
        s.restore(mark);
        assert_eq!(s.domains(), &root[..]);
    }

    #[test]
    fn propagation_is_idempotent() {
        let m = model(
            "input x in [-3, 7]; input y in [0.5, 2]; a = x * y; b = a / y; c = b - x; assert(c != 0);",
        );
        let mut s = DomainStore::new(&m);
        let mut p = Propagator::new(&m);
        p.propagate_all(&mut s);
        let once = s.domains().to_vec();
        let r = p.propagate_all(&mut s);
        assert!(r.changed.is_empty());
        assert_eq!(s.domains(), &once[..]);
        for (a, b) in once.iter().zip(m.root_domains()) {
            assert!(a.is_subset_of(&b));
        }
    }

    #[test]
    fn concrete_eval_examples() {
        let m = model("input x in [-5, 5]; assume(x >= -3); assume(x <= 3); y = x * x; assert(y < 100);");
        assert_eq!(concrete_eval(&m, &[5.0]), EvalVerdict::NotCounterexample);
        assert_eq!(concrete_eval(&m, &[7.0]), EvalVerdict::NotCounterexample);
        let m = model("input x in [1, 1]; assert(x != 1);");
        assert_eq!(concrete_eval(&m, &[1.0]), EvalVerdict::Counterexample);
        let m = model("input x in [0, 1e30]; y = x * x; assert(y < 0);");
        // x*x overflows single: not a counterexample
        assert_eq!(concrete_eval(&m, &[1e30f32 as f64]), EvalVerdict::NotCounterexample);
    }
}
