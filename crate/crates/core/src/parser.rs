//! Front-end for `.fpv` verification programs.
//!
//! ```text
//! program := format? decl* stmt+
//! format  := "format" ("single" | "double" | "mock") ";"
//! decl    := "input" NAME "in" "[" LIT "," LIT "]" ";"
//! stmt    := NAME "=" expr ";" | "assume" "(" bexpr ")" ";" | "assert" "(" bexpr ")" ";"
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := "-" unary | LIT | NAME | "(" expr ")"
//! bexpr   := conj ("||" conj)*
//! conj    := atom ("&&" atom)*
//! atom    := "(" bexpr ")" | expr CMP expr
//! ```
//!
//! `#` starts a comment running to the end of the line. Literals are decimal
//! or hexadecimal floats (an optional trailing `f` is accepted) and are
//! rounded to nearest into the program format when parsed. Names may be
//! reassigned; inputs may not.

use std::collections::HashSet;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::fpbits::{canonical, parse_hex, to_hex, FloatFormat};
use crate::model::{BinOp, CmpOp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PExpr {
    Name(String),
    Lit(f64),
    Neg(Box<PExpr>),
    Bin(BinOp, Box<PExpr>, Box<PExpr>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum BExpr {
    Cmp(CmpOp, PExpr, PExpr),
    And(Box<BExpr>, Box<BExpr>),
    Or(Box<BExpr>, Box<BExpr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputDecl {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Assign { name: String, expr: PExpr },
    Assume(BExpr),
    Assert(BExpr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedProgram {
    pub format: FloatFormat,
    pub inputs: Vec<InputDecl>,
    pub stmts: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(String),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: [&str; 19] = [
    "==", "!=", "<=", ">=", "&&", "||", "<", ">", "=", ";", ",", "[", "]", "(", ")", "+", "-",
    "*", "/",
];

const KEYWORDS: [&str; 8] = [
    "format", "single", "double", "mock", "input", "in", "assume", "assert",
];

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let (tl, tc) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            toks.push(Token {
                tok: Tok::Ident(s),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let hex = c == '0' && matches!(chars.get(i + 1), Some('x' | 'X'));
            if hex {
                i += 2;
                while i < chars.len() && (chars[i].is_ascii_hexdigit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && matches!(chars[i], 'p' | 'P') {
                    i += 1;
                    if i < chars.len() && matches!(chars[i], '+' | '-') {
                        i += 1;
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            } else {
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && matches!(chars[i], 'e' | 'E') {
                    i += 1;
                    if i < chars.len() && matches!(chars[i], '+' | '-') {
                        i += 1;
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            if i < chars.len() && matches!(chars[i], 'f' | 'F') {
                i += 1;
            }
            col += i - start;
            toks.push(Token {
                tok: Tok::Num(s),
                line: tl,
                col: tc,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(sym) => {
                i += sym.len();
                col += sym.len();
                toks.push(Token {
                    tok: Tok::Sym(sym),
                    line: tl,
                    col: tc,
                });
            }
            None => {
                return Err(ParseError {
                    line,
                    col,
                    msg: format!("unexpected character '{c}'"),
                })
            }
        }
    }
    toks.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(toks)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    format: FloatFormat,
    inputs: HashSet<String>,
    defined: HashSet<String>,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let t = self.here();
        Err(ParseError {
            line: t.line,
            col: t.col,
            msg: msg.into(),
        })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == kw)
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.is_sym(s) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected '{s}', found {}", describe(self.peek())))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected '{kw}', found {}", describe(self.peek())))
        }
    }

    fn name(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            other => self.err(format!("expected a name, found {}", describe(&other))),
        }
    }

    fn literal_value(&self, raw: &str) -> PResult<f64> {
        let fmt = self.format;
        let v = if raw.starts_with("0x") || raw.starts_with("0X") {
            match parse_hex(raw) {
                Some(v) => fmt.round(v),
                None => return self.err(format!("invalid hexadecimal literal '{raw}'")),
            }
        } else {
            let parsed = match fmt {
                FloatFormat::SINGLE => raw.parse::<f32>().map(f64::from),
                _ => raw.parse::<f64>().map(|v| fmt.round(v)),
            };
            match parsed {
                Ok(v) => v,
                Err(_) => return self.err(format!("invalid literal '{raw}'")),
            }
        };
        if !v.is_finite() {
            return self.err(format!("literal '{raw}' overflows the {fmt} format"));
        }
        Ok(canonical(v))
    }

    fn signed_literal(&mut self) -> PResult<f64> {
        let neg = if self.is_sym("-") {
            self.bump();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Num(raw) => {
                let v = self.literal_value(&raw)?;
                self.bump();
                Ok(canonical(if neg { -v } else { v }))
            }
            other => self.err(format!("expected a literal, found {}", describe(&other))),
        }
    }

    fn program(&mut self) -> PResult<ParsedProgram> {
        if self.is_kw("format") {
            self.bump();
            let fmt = match self.peek() {
                Tok::Ident(s) => FloatFormat::from_name(s),
                _ => None,
            };
            match fmt {
                Some(f) => {
                    self.format = f;
                    self.bump();
                }
                None => return self.err("expected 'single', 'double' or 'mock'"),
            }
            self.expect_sym(";")?;
        }
        let mut inputs = Vec::new();
        while self.is_kw("input") {
            self.bump();
            let at = self.here().clone();
            let name = self.name()?;
            if self.inputs.contains(&name) {
                return Err(ParseError {
                    line: at.line,
                    col: at.col,
                    msg: format!("duplicate name '{name}'"),
                });
            }
            self.expect_kw("in")?;
            self.expect_sym("[")?;
            let lo = self.signed_literal()?;
            self.expect_sym(",")?;
            let hi = self.signed_literal()?;
            self.expect_sym("]")?;
            if lo > hi {
                return Err(ParseError {
                    line: at.line,
                    col: at.col,
                    msg: format!("empty domain for '{name}'"),
                });
            }
            self.expect_sym(";")?;
            self.inputs.insert(name.clone());
            self.defined.insert(name.clone());
            inputs.push(InputDecl { name, lo, hi });
        }
        let mut stmts = Vec::new();
        while *self.peek() != Tok::Eof {
            stmts.push(self.stmt()?);
        }
        if inputs.is_empty() {
            return self.err("no input declaration");
        }
        if !stmts.iter().any(|s| matches!(s, Stmt::Assert(_))) {
            return self.err("no assert");
        }
        Ok(ParsedProgram {
            format: self.format,
            inputs,
            stmts,
        })
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        if self.is_kw("assume") || self.is_kw("assert") {
            let assume = self.is_kw("assume");
            self.bump();
            self.expect_sym("(")?;
            let b = self.bexpr()?;
            self.expect_sym(")")?;
            self.expect_sym(";")?;
            return Ok(if assume { Stmt::Assume(b) } else { Stmt::Assert(b) });
        }
        if self.is_kw("input") {
            return self.err("input declarations must precede statements");
        }
        let at = self.here().clone();
        let name = self.name()?;
        if self.inputs.contains(&name) {
            return Err(ParseError {
                line: at.line,
                col: at.col,
                msg: format!("assignment to input '{name}'"),
            });
        }
        self.expect_sym("=")?;
        let expr = self.expr()?;
        self.expect_sym(";")?;
        self.defined.insert(name.clone());
        Ok(Stmt::Assign { name, expr })
    }

    fn bexpr(&mut self) -> PResult<BExpr> {
        let mut lhs = self.conj()?;
        while self.is_sym("||") {
            self.bump();
            let rhs = self.conj()?;
            lhs = BExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> PResult<BExpr> {
        let mut lhs = self.batom()?;
        while self.is_sym("&&") {
            self.bump();
            let rhs = self.batom()?;
            lhs = BExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn batom(&mut self) -> PResult<BExpr> {
        if self.is_sym("(") {
            // either a parenthesised formula or the start of an arithmetic operand
            let save = self.pos;
            self.bump();
            if let Ok(b) = self.bexpr() {
                if self.is_sym(")") {
                    self.bump();
                    let continues = matches!(self.peek(), Tok::Sym(s) if cmp_op(s).is_some()
                        || matches!(*s, "+" | "-" | "*" | "/"));
                    if !continues {
                        return Ok(b);
                    }
                }
            }
            self.pos = save;
        }
        let lhs = self.expr()?;
        let op = match self.peek() {
            Tok::Sym(s) => cmp_op(s),
            _ => None,
        };
        let Some(op) = op else {
            return self.err(format!("expected a comparison, found {}", describe(self.peek())));
        };
        self.bump();
        let rhs = self.expr()?;
        Ok(BExpr::Cmp(op, lhs, rhs))
    }

    fn expr(&mut self) -> PResult<PExpr> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.is_sym("+") {
                BinOp::Add
            } else if self.is_sym("-") {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            self.bump();
            let rhs = self.term()?;
            lhs = PExpr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> PResult<PExpr> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.is_sym("*") {
                BinOp::Mul
            } else if self.is_sym("/") {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = PExpr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> PResult<PExpr> {
        if self.is_sym("-") {
            self.bump();
            return Ok(match self.unary()? {
                PExpr::Lit(v) => PExpr::Lit(canonical(-v)),
                e => PExpr::Neg(Box::new(e)),
            });
        }
        match self.peek().clone() {
            Tok::Num(raw) => {
                let v = self.literal_value(&raw)?;
                self.bump();
                Ok(PExpr::Lit(v))
            }
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                if !self.defined.contains(&name) {
                    return self.err(format!("use of undefined name '{name}'"));
                }
                self.bump();
                Ok(PExpr::Name(name))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            other => self.err(format!("expected an expression, found {}", describe(&other))),
        }
    }
}

fn cmp_op(s: &str) -> Option<CmpOp> {
    Some(match s {
        "==" => CmpOp::Eq,
        "!=" => CmpOp::Ne,
        "<" => CmpOp::Lt,
        "<=" => CmpOp::Le,
        ">" => CmpOp::Gt,
        ">=" => CmpOp::Ge,
        _ => return None,
    })
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("'{s}'"),
        Tok::Num(s) => format!("literal '{s}'"),
        Tok::Sym(s) => format!("'{s}'"),
        Tok::Eof => "end of input".into(),
    }
}

pub fn parse(src: &str) -> Result<ParsedProgram, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        format: FloatFormat::SINGLE,
        inputs: HashSet::new(),
        defined: HashSet::new(),
    };
    p.program()
}

fn prec(op: BinOp) -> u8 {
    match op {
        BinOp::Add | BinOp::Sub => 1,
        BinOp::Mul | BinOp::Div => 2,
    }
}

fn write_expr(out: &mut String, e: &PExpr, ctx: u8, right: bool) {
    match e {
        PExpr::Name(n) => out.push_str(n),
        PExpr::Lit(v) => out.push_str(&to_hex(*v)),
        PExpr::Neg(inner) => {
            out.push('-');
            write_expr(out, inner, 3, false);
        }
        PExpr::Bin(op, l, r) => {
            let p = prec(*op);
            let paren = p < ctx || (p == ctx && right);
            if paren {
                out.push('(');
            }
            write_expr(out, l, p, false);
            let _ = write!(out, " {op} ");
            write_expr(out, r, p, true);
            if paren {
                out.push(')');
            }
        }
    }
}

fn write_bexpr(out: &mut String, b: &BExpr, ctx: u8, right: bool) {
    let (p, sym, l, r) = match b {
        BExpr::Cmp(op, l, r) => {
            write_expr(out, l, 0, false);
            let _ = write!(out, " {op} ");
            write_expr(out, r, 0, false);
            return;
        }
        BExpr::Or(l, r) => (1, "||", l, r),
        BExpr::And(l, r) => (2, "&&", l, r),
    };
    let paren = p < ctx || (p == ctx && right);
    if paren {
        out.push('(');
    }
    write_bexpr(out, l, p, false);
    let _ = write!(out, " {sym} ");
    write_bexpr(out, r, p, true);
    if paren {
        out.push(')');
    }
}

/// Canonical source text; literals are written as hexadecimal floats so the
/// output parses back to bit-identical values.
pub fn render(p: &ParsedProgram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "format {};", p.format);
    for d in &p.inputs {
        let _ = writeln!(out, "input {} in [{}, {}];", d.name, to_hex(d.lo), to_hex(d.hi));
    }
    for s in &p.stmts {
        match s {
            Stmt::Assign { name, expr } => {
                let _ = write!(out, "{name} = ");
                write_expr(&mut out, expr, 0, false);
            }
            Stmt::Assume(b) | Stmt::Assert(b) => {
                out.push_str(if matches!(s, Stmt::Assume(_)) {
                    "assume("
                } else {
                    "assert("
                });
                write_bexpr(&mut out, b, 0, false);
                out.push(')');
            }
        }
        out.push_str(";\n");
    }
    out
}

impl fmt::Display for ParsedProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}
