//! Verification CSPs: variables, domains, constraints and the input set,
//! plus the derivation of one conjunctive model per disjunct of
//! `Pre ∧ ¬Post` from a parsed program.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::fpbits::{to_hex, FloatFormat};
use crate::interval::FpInterval;
use crate::parser::{BExpr, PExpr, ParsedProgram, Stmt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

impl VarId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    /// The complement, valid because domains never hold NaN.
    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
        }
    }

    /// The same relation with its operands swapped.
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            op => op,
        }
    }

    pub fn holds(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var(VarId),
    Lit(f64),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(v: VarId) -> Expr {
        Expr::Var(v)
    }

    pub fn lit(v: f64) -> Expr {
        Expr::Lit(v)
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Bin(op, Box::new(l), Box::new(r))
    }

    pub fn count(&self, x: VarId) -> usize {
        match self {
            Expr::Var(v) => usize::from(*v == x),
            Expr::Lit(_) => 0,
            Expr::Neg(e) => e.count(x),
            Expr::Bin(_, l, r) => l.count(x) + r.count(x),
        }
    }

    fn collect_vars(&self, out: &mut Vec<VarId>) {
        match self {
            Expr::Var(v) => {
                if !out.contains(v) {
                    out.push(*v);
                }
            }
            Expr::Lit(_) => {}
            Expr::Neg(e) => e.collect_vars(out),
            Expr::Bin(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }

    /// Exact evaluation under round-to-nearest-even; `None` when a variable
    /// has no value or an intermediate result is not finite.
    pub fn eval(&self, fmt: FloatFormat, values: &[Option<f64>]) -> Option<f64> {
        let v = match self {
            Expr::Var(v) => values[v.0]?,
            Expr::Lit(c) => *c,
            Expr::Neg(e) => -e.eval(fmt, values)?,
            Expr::Bin(op, l, r) => {
                let a = l.eval(fmt, values)?;
                let b = r.eval(fmt, values)?;
                fmt.apply(*op, a, b)
            }
        };
        v.is_finite().then_some(crate::fpbits::canonical(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Body,
    Pre,
    NegatedPost,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintKind {
    Assign { target: VarId, expr: Expr },
    Compare { op: CmpOp, lhs: Expr, rhs: Expr },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub source: Source,
}

impl Constraint {
    pub fn assign(target: VarId, expr: Expr) -> Self {
        Constraint {
            kind: ConstraintKind::Assign { target, expr },
            source: Source::Body,
        }
    }

    pub fn compare(op: CmpOp, lhs: Expr, rhs: Expr, source: Source) -> Self {
        Constraint {
            kind: ConstraintKind::Compare { op, lhs, rhs },
            source,
        }
    }

    /// Leaf references to `x`; an assignment's target counts once.
    pub fn count_occ(&self, x: VarId) -> usize {
        match &self.kind {
            ConstraintKind::Assign { target, expr } => usize::from(*target == x) + expr.count(x),
            ConstraintKind::Compare { lhs, rhs, .. } => lhs.count(x) + rhs.count(x),
        }
    }

    /// Distinct variables in order of first appearance.
    pub fn vars(&self) -> Vec<VarId> {
        let mut out = Vec::new();
        match &self.kind {
            ConstraintKind::Assign { target, expr } => {
                out.push(*target);
                expr.collect_vars(&mut out);
            }
            ConstraintKind::Compare { lhs, rhs, .. } => {
                lhs.collect_vars(&mut out);
                rhs.collect_vars(&mut out);
            }
        }
        out
    }

    /// For `z = a ± b` with both operands variables, the operand pair.
    pub fn additive_operands(&self) -> Option<(VarId, VarId)> {
        match &self.kind {
            ConstraintKind::Assign {
                expr: Expr::Bin(BinOp::Add | BinOp::Sub, l, r),
                ..
            } => match (&**l, &**r) {
                (Expr::Var(a), Expr::Var(b)) => Some((*a, *b)),
                _ => None,
            },
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub domain: FpInterval,
    pub is_input: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("model has no input variable")]
    NoInputs,
    #[error("constraint {0} references an unknown variable")]
    UnknownVariable(usize),
    #[error("domain of '{0}' is not in the model format")]
    DomainFormat(String),
}

/// A verification CSP over one float format.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    format: FloatFormat,
    vars: Vec<Variable>,
    constraints: Vec<Constraint>,
    inputs: Vec<VarId>,
    output: Option<VarId>,
    cstr: Vec<Vec<usize>>,
    definition: Vec<Option<usize>>,
}

impl Model {
    pub fn new(
        format: FloatFormat,
        vars: Vec<Variable>,
        constraints: Vec<Constraint>,
        output: Option<VarId>,
    ) -> Result<Model, ModelError> {
        let inputs: Vec<VarId> = vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_input)
            .map(|(i, _)| VarId(i))
            .collect();
        if inputs.is_empty() {
            return Err(ModelError::NoInputs);
        }
        if let Some(v) = vars.iter().find(|v| v.domain.format() != format) {
            return Err(ModelError::DomainFormat(v.name.clone()));
        }
        let mut cstr = vec![Vec::new(); vars.len()];
        let mut definition = vec![None; vars.len()];
        for (ci, c) in constraints.iter().enumerate() {
            for v in c.vars() {
                if v.0 >= vars.len() {
                    return Err(ModelError::UnknownVariable(ci));
                }
                cstr[v.0].push(ci);
            }
            if let ConstraintKind::Assign { target, .. } = c.kind {
                if !vars[target.0].is_input && definition[target.0].is_none() {
                    definition[target.0] = Some(ci);
                }
            }
        }
        Ok(Model {
            format,
            vars,
            constraints,
            inputs,
            output,
            cstr,
            definition,
        })
    }

    pub fn format(&self) -> FloatFormat {
        self.format
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn var(&self, v: VarId) -> &Variable {
        &self.vars[v.0]
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn var_ids(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.vars.len()).map(VarId)
    }

    pub fn find(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn inputs(&self) -> &[VarId] {
        &self.inputs
    }

    pub fn output(&self) -> Option<VarId> {
        self.output
    }

    /// Indices of the constraints mentioning `x`.
    pub fn cstr(&self, x: VarId) -> &[usize] {
        &self.cstr[x.0]
    }

    /// The assignment defining a non-input variable, if any.
    pub fn definition(&self, x: VarId) -> Option<usize> {
        self.definition[x.0]
    }

    /// Variables whose value is not fixed by the inputs: the inputs plus any
    /// non-input left without a defining assignment.
    pub fn free_vars(&self) -> Vec<VarId> {
        self.var_ids()
            .filter(|&v| self.vars[v.0].is_input || self.definition[v.0].is_none())
            .collect()
    }

    /// Whether every non-input is defined by exactly one assignment.
    pub fn is_functional(&self) -> bool {
        self.var_ids().all(|v| {
            let defs = self.cstr[v.0]
                .iter()
                .filter(|&&ci| {
                    matches!(self.constraints[ci].kind, ConstraintKind::Assign { target, .. } if target == v)
                })
                .count();
            if self.vars[v.0].is_input {
                defs == 0
            } else {
                defs == 1
            }
        })
    }

    /// Number of leaf references to `x` in constraint `c`.
    pub fn count_occ(&self, x: VarId, c: usize) -> usize {
        self.constraints[c].count_occ(x)
    }

    /// Number of constraints mentioning `x`.
    pub fn degree(&self, x: VarId) -> usize {
        self.cstr[x.0].len()
    }

    pub fn root_domains(&self) -> Vec<FpInterval> {
        self.vars.iter().map(|v| v.domain).collect()
    }

    pub fn display_expr<'a>(&'a self, e: &'a Expr) -> impl fmt::Display + 'a {
        ExprDisplay { model: self, expr: e }
    }

    pub fn display_constraint(&self, c: &Constraint) -> String {
        match &c.kind {
            ConstraintKind::Assign { target, expr } => {
                format!("{} = {}", self.vars[target.0].name, self.display_expr(expr))
            }
            ConstraintKind::Compare { op, lhs, rhs } => format!(
                "{} {op} {}",
                self.display_expr(lhs),
                self.display_expr(rhs)
            ),
        }
    }
}

struct ExprDisplay<'a> {
    model: &'a Model,
    expr: &'a Expr,
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |e| ExprDisplay {
            model: self.model,
            expr: e,
        };
        match self.expr {
            Expr::Var(v) => f.write_str(&self.model.vars[v.0].name),
            Expr::Lit(c) => {
                if *c == c.trunc() && c.abs() < 1e15 {
                    write!(f, "{c}")
                } else {
                    write!(f, "{}", to_hex(*c))
                }
            }
            Expr::Neg(e) => write!(f, "-({})", sub(e)),
            Expr::Bin(op, l, r) => write!(f, "({} {op} {})", sub(l), sub(r)),
        }
    }
}

/// One conjunctive model per disjunct; all share variables, domains and
/// inputs and differ only in their pre/negated-post comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct DisjunctSet {
    pub models: Vec<Model>,
}

pub const DEFAULT_DNF_CAP: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeriveError {
    #[error("use of undeclared variable '{0}'")]
    Undeclared(String),
    #[error("assignment to input variable '{0}'")]
    AssignToInput(String),
    #[error("duplicate input '{0}'")]
    DuplicateInput(String),
    #[error("program has no assert")]
    NoAssert,
    #[error("negated post-condition expands to more than {cap} disjuncts")]
    TooManyDisjuncts { cap: usize },
    #[error("invalid input domain for '{0}'")]
    BadDomain(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone)]
enum Formula {
    Atom(CmpOp, Expr, Expr, Source),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

type Conj = Vec<(CmpOp, Expr, Expr, Source)>;

fn dnf(f: &Formula, cap: usize) -> Result<Vec<Conj>, DeriveError> {
    match f {
        Formula::Atom(op, l, r, s) => Ok(vec![vec![(*op, l.clone(), r.clone(), *s)]]),
        Formula::Or(parts) => {
            let mut out = Vec::new();
            for p in parts {
                out.extend(dnf(p, cap)?);
                if out.len() > cap {
                    return Err(DeriveError::TooManyDisjuncts { cap });
                }
            }
            Ok(out)
        }
        Formula::And(parts) => {
            let mut acc: Vec<Conj> = vec![Vec::new()];
            for p in parts {
                let rhs = dnf(p, cap)?;
                if acc.len() * rhs.len() > cap {
                    return Err(DeriveError::TooManyDisjuncts { cap });
                }
                acc = acc
                    .iter()
                    .flat_map(|a| {
                        rhs.iter().map(move |b| {
                            let mut c = a.clone();
                            c.extend(b.iter().cloned());
                            c
                        })
                    })
                    .collect();
            }
            Ok(acc)
        }
    }
}

struct Deriver {
    fmt: FloatFormat,
    vars: Vec<Variable>,
    env: HashMap<String, VarId>,
    versions: HashMap<String, usize>,
}

impl Deriver {
    fn expr(&self, e: &PExpr) -> Result<Expr, DeriveError> {
        Ok(match e {
            PExpr::Name(n) => Expr::Var(
                *self
                    .env
                    .get(n)
                    .ok_or_else(|| DeriveError::Undeclared(n.clone()))?,
            ),
            PExpr::Lit(v) => Expr::Lit(*v),
            PExpr::Neg(inner) => Expr::Neg(Box::new(self.expr(inner)?)),
            PExpr::Bin(op, l, r) => Expr::bin(*op, self.expr(l)?, self.expr(r)?),
        })
    }

    fn formula(&self, b: &BExpr, negate: bool, source: Source) -> Result<Formula, DeriveError> {
        Ok(match b {
            BExpr::Cmp(op, l, r) => {
                let op = if negate { op.negate() } else { *op };
                let (l, r) = (self.expr(l)?, self.expr(r)?);
                // keep a variable-like side on the left: `c > x` becomes `x < c`
                if matches!(l, Expr::Lit(_)) && !matches!(r, Expr::Lit(_)) {
                    Formula::Atom(op.flip(), r, l, source)
                } else {
                    Formula::Atom(op, l, r, source)
                }
            }
            BExpr::And(l, r) | BExpr::Or(l, r) => {
                let parts = vec![
                    self.formula(l, negate, source)?,
                    self.formula(r, negate, source)?,
                ];
                if matches!(b, BExpr::And(..)) != negate {
                    Formula::And(parts)
                } else {
                    Formula::Or(parts)
                }
            }
        })
    }

    fn fresh(&mut self, name: &str) -> VarId {
        let version = self.versions.entry(name.to_string()).or_insert(0);
        let full = if *version == 0 {
            name.to_string()
        } else {
            format!("{name}#{version}")
        };
        *version += 1;
        let id = VarId(self.vars.len());
        self.vars.push(Variable {
            name: full,
            domain: FpInterval::full(self.fmt),
            is_input: false,
        });
        self.env.insert(name.to_string(), id);
        id
    }
}

/// Derives the verification CSP of a program, split into disjuncts.
///
/// Each assignment creates a fresh state variable (`name`, then `name#1`,
/// `name#2`, ... on reassignment). Assumes form the pre-condition, the
/// conjunction of all asserts forms the post-condition, and
/// `Pre ∧ ¬Post` is expanded to disjunctive normal form.
pub fn derive(program: &ParsedProgram) -> Result<DisjunctSet, DeriveError> {
    derive_with_cap(program, DEFAULT_DNF_CAP)
}

pub fn derive_with_cap(program: &ParsedProgram, cap: usize) -> Result<DisjunctSet, DeriveError> {
    let fmt = program.format;
    let mut d = Deriver {
        fmt,
        vars: Vec::new(),
        env: HashMap::new(),
        versions: HashMap::new(),
    };
    for decl in &program.inputs {
        if d.env.contains_key(&decl.name) {
            return Err(DeriveError::DuplicateInput(decl.name.clone()));
        }
        let domain = FpInterval::new(decl.lo, decl.hi, fmt)
            .map_err(|_| DeriveError::BadDomain(decl.name.clone()))?;
        d.env.insert(decl.name.clone(), VarId(d.vars.len()));
        d.versions.insert(decl.name.clone(), 1);
        d.vars.push(Variable {
            name: decl.name.clone(),
            domain,
            is_input: true,
        });
    }
    let n_inputs = d.vars.len();
    let mut body = Vec::new();
    let mut pre = Vec::new();
    let mut post = Vec::new();
    let mut output = None;
    for stmt in &program.stmts {
        match stmt {
            Stmt::Assign { name, expr } => {
                if d.env.get(name).is_some_and(|v| v.0 < n_inputs) {
                    return Err(DeriveError::AssignToInput(name.clone()));
                }
                let e = d.expr(expr)?;
                let target = d.fresh(name);
                body.push(Constraint::assign(target, e));
            }
            Stmt::Assume(b) => pre.push(d.formula(b, false, Source::Pre)?),
            Stmt::Assert(b) => {
                if let BExpr::Cmp(_, l, r) = b {
                    output = match (l, r) {
                        (PExpr::Name(n), _) | (PExpr::Lit(_), PExpr::Name(n)) => d.env.get(n).copied(),
                        _ => None,
                    };
                }
                post.push(d.formula(b, true, Source::NegatedPost)?);
            }
        }
    }
    if post.is_empty() {
        return Err(DeriveError::NoAssert);
    }
    if post.len() > 1 {
        output = None;
    }
    let mut parts = pre;
    parts.push(Formula::Or(post));
    let disjuncts = dnf(&Formula::And(parts), cap)?;
    let models = disjuncts
        .into_iter()
        .map(|conj| {
            let mut cs = body.clone();
            cs.extend(
                conj.into_iter()
                    .map(|(op, l, r, s)| Constraint::compare(op, l, r, s)),
            );
            Model::new(fmt, d.vars.clone(), cs, output)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DisjunctSet { models })
}
