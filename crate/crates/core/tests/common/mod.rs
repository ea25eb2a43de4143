//! Test oracles that share no arithmetic with the library: an interpreter
//! for parsed programs with its own mock-format rounding (a value table and
//! nearest-even lookup) and hardware `f32`/`f64` arithmetic for the real
//! formats, plus a generator of tiny random mock programs.

#![allow(dead_code)]

use std::collections::HashMap;

use fpcex::fpbits::{FloatFormat, FormatKind};
use fpcex::model::{BinOp, CmpOp};
use fpcex::parser::{BExpr, PExpr, ParsedProgram, Stmt};
use rand::Rng;

/// Non-negative mock values in increasing order: 1 sign, 4 exponent and
/// 3 fraction bits, bias 7. Index `i` is the rank of the value, so even
/// indices have even significands.
pub fn mock_positive() -> Vec<f64> {
    let mut v = Vec::new();
    for k in 0..8 {
        v.push(k as f64 / 8.0 * 2f64.powi(-6));
    }
    for e in -6..=7 {
        for k in 0..8 {
            v.push((8 + k) as f64 / 8.0 * 2f64.powi(e));
        }
    }
    v
}

/// Every mock value, negative to positive, zero once.
pub fn mock_all() -> Vec<f64> {
    let pos = mock_positive();
    let mut v: Vec<f64> = pos[1..].iter().rev().map(|x| -x).collect();
    v.extend_from_slice(&pos);
    v
}

pub struct Oracle {
    pos: Vec<f64>,
}

impl Default for Oracle {
    fn default() -> Self {
        Oracle { pos: mock_positive() }
    }
}

impl Oracle {
    /// Round-to-nearest-even into the mock format; `None` on overflow.
    pub fn round_mock(&self, x: f64) -> Option<f64> {
        if !x.is_finite() {
            return None;
        }
        let a = x.abs();
        // 240 is the largest value; from 248 up IEEE rounds to infinity
        if a >= 248.0 {
            return None;
        }
        let i = self.pos.partition_point(|&v| v <= a) - 1;
        let r = if i + 1 == self.pos.len() || self.pos[i] == a {
            self.pos[i]
        } else {
            let (lo, hi) = (self.pos[i], self.pos[i + 1]);
            match (a - lo).partial_cmp(&(hi - a)).unwrap() {
                std::cmp::Ordering::Less => lo,
                std::cmp::Ordering::Greater => hi,
                std::cmp::Ordering::Equal => {
                    if i % 2 == 0 {
                        lo
                    } else {
                        hi
                    }
                }
            }
        };
        Some(if r == 0.0 { 0.0 } else { r.copysign(x) })
    }

    pub fn apply(&self, fmt: FloatFormat, op: BinOp, a: f64, b: f64) -> Option<f64> {
        let r = match fmt.kind {
            FormatKind::Single => {
                let (a, b) = (a as f32, b as f32);
                (match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }) as f64
            }
            FormatKind::Double => match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
            },
            // f64 has more than 2p + 2 bits, so rounding twice is harmless
            FormatKind::Mock => {
                let exact = match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                };
                return self.round_mock(exact);
            }
        };
        r.is_finite().then_some(if r == 0.0 { 0.0 } else { r })
    }

    fn eval(&self, fmt: FloatFormat, e: &PExpr, env: &HashMap<String, f64>) -> Option<f64> {
        match e {
            PExpr::Name(n) => env.get(n).copied(),
            PExpr::Lit(v) => Some(*v),
            PExpr::Neg(inner) => self.eval(fmt, inner, env).map(|v| if v == 0.0 { 0.0 } else { -v }),
            PExpr::Bin(op, l, r) => {
                let a = self.eval(fmt, l, env)?;
                let b = self.eval(fmt, r, env)?;
                self.apply(fmt, *op, a, b)
            }
        }
    }

    /// Truth of `b`, or of its negation; an atom over a non-finite
    /// computation is false either way.
    fn truth(&self, fmt: FloatFormat, b: &BExpr, env: &HashMap<String, f64>, negated: bool) -> bool {
        match b {
            BExpr::Cmp(op, l, r) => {
                let (Some(x), Some(y)) = (self.eval(fmt, l, env), self.eval(fmt, r, env)) else {
                    return false;
                };
                let holds = match op {
                    CmpOp::Eq => x == y,
                    CmpOp::Ne => x != y,
                    CmpOp::Lt => x < y,
                    CmpOp::Le => x <= y,
                    CmpOp::Gt => x > y,
                    CmpOp::Ge => x >= y,
                };
                holds != negated
            }
            BExpr::And(l, r) if !negated => self.truth(fmt, l, env, false) && self.truth(fmt, r, env, false),
            BExpr::And(l, r) => self.truth(fmt, l, env, true) || self.truth(fmt, r, env, true),
            BExpr::Or(l, r) if !negated => self.truth(fmt, l, env, false) || self.truth(fmt, r, env, false),
            BExpr::Or(l, r) => self.truth(fmt, l, env, true) && self.truth(fmt, r, env, true),
        }
    }

    /// Whether running `p` on `inputs` (declaration order) satisfies every
    /// assume and violates some assert.
    pub fn is_counterexample(&self, p: &ParsedProgram, inputs: &[f64]) -> bool {
        let fmt = p.format;
        let mut env = HashMap::new();
        for (d, &v) in p.inputs.iter().zip(inputs) {
            if !(d.lo <= v && v <= d.hi) {
                return false;
            }
            env.insert(d.name.clone(), v);
        }
        let mut violated = false;
        for s in &p.stmts {
            match s {
                Stmt::Assign { name, expr } => match self.eval(fmt, expr, &env) {
                    Some(v) => {
                        env.insert(name.clone(), v);
                    }
                    None => return false,
                },
                Stmt::Assume(b) => {
                    if !self.truth(fmt, b, &env, false) {
                        return false;
                    }
                }
                Stmt::Assert(b) => violated |= self.truth(fmt, b, &env, true),
            }
        }
        violated
    }

    /// Mock values of `[lo, hi]`.
    pub fn mock_range(&self, lo: f64, hi: f64) -> Vec<f64> {
        mock_all().into_iter().filter(|&v| lo <= v && v <= hi).collect()
    }

    /// Brute force over every input tuple of a mock program: the number of
    /// tuples and the counter-examples among them.
    pub fn enumerate(&self, p: &ParsedProgram) -> (usize, Vec<Vec<f64>>) {
        let ranges: Vec<Vec<f64>> = p.inputs.iter().map(|d| self.mock_range(d.lo, d.hi)).collect();
        let total = ranges.iter().map(Vec::len).product();
        let mut found = Vec::new();
        let mut idx = vec![0usize; ranges.len()];
        if ranges.iter().any(Vec::is_empty) {
            return (0, found);
        }
        loop {
            let t: Vec<f64> = idx.iter().zip(&ranges).map(|(&i, r)| r[i]).collect();
            if self.is_counterexample(p, &t) {
                found.push(t);
            }
            let mut k = 0;
            loop {
                if k == idx.len() {
                    return (total, found);
                }
                idx[k] += 1;
                if idx[k] < ranges[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
}

const CMPS: [&str; 6] = ["==", "!=", "<", "<=", ">", ">="];
const OPS: [&str; 4] = ["+", "-", "*", "/"];

fn literal<R: Rng>(rng: &mut R) -> String {
    const LITS: [f64; 12] = [0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0, 0.001953125, 12.0];
    let v = LITS[rng.gen_range(0..LITS.len())];
    if rng.gen_bool(0.25) && v != 0.0 {
        format!("({})", -v)
    } else {
        format!("{v}")
    }
}

fn expr<R: Rng>(rng: &mut R, names: &[String], depth: u32) -> String {
    if depth == 0 || rng.gen_bool(0.35) {
        if rng.gen_bool(0.8) {
            names[rng.gen_range(0..names.len())].clone()
        } else {
            literal(rng)
        }
    } else {
        let op = OPS[rng.gen_range(0..OPS.len())];
        let l = expr(rng, names, depth - 1);
        let r = expr(rng, names, depth - 1);
        if rng.gen_bool(0.1) {
            format!("-({l} {op} {r})")
        } else {
            format!("({l} {op} {r})")
        }
    }
}

fn atom<R: Rng>(rng: &mut R, names: &[String]) -> String {
    let c = CMPS[rng.gen_range(0..CMPS.len())];
    let l = expr(rng, names, 1);
    let r = if rng.gen_bool(0.5) { literal(rng) } else { expr(rng, names, 1) };
    format!("{l} {c} {r}")
}

/// A random mock program with at most 2^12 input tuples.
pub fn random_mock_program<R: Rng>(rng: &mut R) -> String {
    let all = mock_all();
    let n = rng.gen_range(1..=3);
    let cap = [0, 64, 64, 16][n];
    let mut src = String::from("format mock;\n");
    let mut names: Vec<String> = Vec::new();
    for i in 0..n {
        let w = rng.gen_range(1..=cap);
        let start = rng.gen_range(0..=all.len() - w);
        let name = ["x", "y", "z"][i].to_string();
        src += &format!("input {name} in [{}, {}];\n", all[start], all[start + w - 1]);
        names.push(name);
    }
    for _ in 0..rng.gen_range(0..=3) {
        let e = expr(rng, &names, 2);
        let t = ["t", "u"][rng.gen_range(0..2)].to_string();
        src += &format!("{t} = {e};\n");
        if !names.contains(&t) {
            names.push(t);
        }
    }
    if rng.gen_bool(0.4) {
        src += &format!("assume({});\n", atom(rng, &names));
    }
    let mut post = atom(rng, &names);
    for _ in 0..rng.gen_range(0..=2) {
        let joint = if rng.gen_bool(0.5) { "&&" } else { "||" };
        post = format!("{post} {joint} {}", atom(rng, &names));
    }
    src += &format!("assert({post});\n");
    src
}
