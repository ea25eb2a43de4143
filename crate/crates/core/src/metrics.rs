//! The eight variable properties used by the selection heuristics.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::fpbits::pow2;
use crate::interval::FpInterval;
use crate::model::{BinOp, CmpOp, ConstraintKind, Expr, Model, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PropertyKind {
    Width,
    Card,
    Density,
    Absorption,
    Lex,
    Degree,
    LocalOcc,
    GlobalOcc,
}

impl PropertyKind {
    /// Column order used in reports.
    pub const ALL: [PropertyKind; 8] = [
        PropertyKind::Density,
        PropertyKind::Card,
        PropertyKind::LocalOcc,
        PropertyKind::Degree,
        PropertyKind::Width,
        PropertyKind::Absorption,
        PropertyKind::Lex,
        PropertyKind::GlobalOcc,
    ];

    /// Dynamic properties depend on the current domains; static ones are
    /// computed once per model.
    pub fn is_dynamic(self) -> bool {
        matches!(
            self,
            PropertyKind::Width | PropertyKind::Card | PropertyKind::Density | PropertyKind::Absorption
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            PropertyKind::Width => "width",
            PropertyKind::Card => "card",
            PropertyKind::Density => "density",
            PropertyKind::Absorption => "absorption",
            PropertyKind::Lex => "lex",
            PropertyKind::Degree => "degree",
            PropertyKind::LocalOcc => "localocc",
            PropertyKind::GlobalOcc => "globalocc",
        }
    }

    /// Case-insensitive; also accepts the table headings (`maxDens`, ...).
    pub fn from_name(s: &str) -> Option<PropertyKind> {
        let s = s.to_ascii_lowercase();
        let k = match s.as_str() {
            "width" | "maxwidth" => PropertyKind::Width,
            "card" | "maxcard" => PropertyKind::Card,
            "density" | "dens" | "maxdens" => PropertyKind::Density,
            "absorption" | "abs" | "maxabs" => PropertyKind::Absorption,
            "lex" => PropertyKind::Lex,
            "degree" | "deg" | "maxdeg" => PropertyKind::Degree,
            "localocc" => PropertyKind::LocalOcc,
            "globalocc" => PropertyKind::GlobalOcc,
            _ => return None,
        };
        Some(k)
    }

    pub fn heading(self) -> &'static str {
        match self {
            PropertyKind::Width => "maxWidth",
            PropertyKind::Card => "maxCard",
            PropertyKind::Density => "maxDens",
            PropertyKind::Absorption => "maxAbs",
            PropertyKind::Lex => "lex",
            PropertyKind::Degree => "maxDeg",
            PropertyKind::LocalOcc => "LocalOcc",
            PropertyKind::GlobalOcc => "GlobalOcc",
        }
    }
}

impl fmt::Display for PropertyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A property value. Comparison is exact across representations; `Max`
/// is above every finite value.
#[derive(Debug, Clone)]
pub enum Weight {
    Int(i128),
    /// A finite float, compared exactly.
    Float(f64),
    Ratio(BigRational),
    Max,
}

impl Weight {
    fn to_ratio(&self) -> Option<BigRational> {
        match self {
            Weight::Int(i) => Some(BigRational::from_integer(BigInt::from(*i))),
            Weight::Float(f) => BigRational::from_float(*f),
            Weight::Ratio(r) => Some(r.clone()),
            Weight::Max => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Weight::Int(i) => *i as f64,
            Weight::Float(f) => *f,
            Weight::Ratio(r) => {
                use num_traits::ToPrimitive;
                r.to_f64().unwrap_or(f64::NAN)
            }
            Weight::Max => f64::INFINITY,
        }
    }
}

impl PartialEq for Weight {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Weight {}

impl PartialOrd for Weight {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Weight {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Weight::Max, Weight::Max) => Ordering::Equal,
            (Weight::Max, _) => Ordering::Greater,
            (_, Weight::Max) => Ordering::Less,
            (Weight::Int(a), Weight::Int(b)) => a.cmp(b),
            (Weight::Float(a), Weight::Float(b)) => a.total_cmp(b),
            _ => self
                .to_ratio()
                .expect("finite")
                .cmp(&other.to_ratio().expect("finite")),
        }
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Int(i) => write!(f, "{i}"),
            Weight::Float(v) => write!(f, "{v:e}"),
            Weight::Ratio(r) => write!(f, "{r}"),
            Weight::Max => f.write_str("max"),
        }
    }
}

/// Structural weights, computed once per model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaticWeights {
    /// 1-based declaration index.
    pub lex: Vec<usize>,
    pub degree: Vec<usize>,
    pub occ_l: Vec<usize>,
    pub occ_g: Vec<usize>,
}

impl StaticWeights {
    pub fn compute(m: &Model) -> StaticWeights {
        let n = m.num_vars();
        let mut w = StaticWeights {
            lex: (1..=n).collect(),
            degree: vec![0; n],
            occ_l: vec![0; n],
            occ_g: vec![0; n],
        };
        for x in m.var_ids() {
            w.degree[x.0] = m.degree(x);
            w.occ_l[x.0] = local_occ(x, m);
            w.occ_g[x.0] = global_occ(x, m);
        }
        w
    }
}

/// Maximum number of occurrences of `x` in a single constraint.
pub fn local_occ(x: VarId, m: &Model) -> usize {
    m.cstr(x)
        .iter()
        .map(|&c| m.count_occ(x, c))
        .max()
        .unwrap_or(0)
}

/// Total number of occurrences of `x` over its constraints.
pub fn global_occ(x: VarId, m: &Model) -> usize {
    m.cstr(x).iter().map(|&c| m.count_occ(x, c)).sum()
}

fn ratio(num: u128, den: u128) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// `card / width`, with `Weight::Max` for singletons.
pub fn density(iv: &FpInterval) -> Weight {
    if iv.is_point() {
        return Weight::Max;
    }
    let w = iv.width().value;
    let card = BigRational::from_integer(BigInt::from(iv.card()));
    Weight::Ratio(card / BigRational::from_float(w).expect("finite width"))
}

/// Exact density as a rational, `None` for singletons.
pub fn density_ratio(iv: &FpInterval) -> Option<BigRational> {
    match density(iv) {
        Weight::Ratio(r) => Some(r),
        _ => None,
    }
}

/// The absorption threshold `2^(e_max - p - 1)` of a domain, where `e_max`
/// is the exponent of its largest magnitude.
pub fn absorb_threshold(dx: &FpInterval) -> f64 {
    let fmt = dx.format();
    let big = dx.lo().abs().max(dx.hi().abs());
    let e = fmt.decompose(big).expect("member").exponent;
    pow2(e - fmt.absorption_p() - 1)
}

/// Fraction of `dy` inside the threshold of `dx`, in `[0, 1]`.
pub fn absorb(dx: &FpInterval, dy: &FpInterval) -> BigRational {
    let t = absorb_threshold(dx);
    match dy.clip(-t, t) {
        Some(inside) => ratio(inside.card(), dy.card()),
        None => BigRational::zero(),
    }
}

/// Operands of `z = a ± b` (as an assignment or an equality with a
/// variable side), both operands being variables.
fn additive_pair(kind: &ConstraintKind) -> Option<(VarId, VarId)> {
    let sum = match kind {
        ConstraintKind::Assign { expr, .. } => expr,
        ConstraintKind::Compare {
            op: CmpOp::Eq,
            lhs,
            rhs,
        } => match (lhs, rhs) {
            (Expr::Var(_), e @ Expr::Bin(..)) | (e @ Expr::Bin(..), Expr::Var(_)) => e,
            _ => return None,
        },
        _ => return None,
    };
    match sum {
        Expr::Bin(BinOp::Add | BinOp::Sub, l, r) => match (&**l, &**r) {
            (Expr::Var(a), Expr::Var(b)) => Some((*a, *b)),
            _ => None,
        },
        _ => None,
    }
}

/// Maximum of `absorb(x, y)` over constraints `z = x ± y` or `z = y ± x`;
/// zero when there is none.
pub fn absorption(x: VarId, m: &Model, doms: &[FpInterval]) -> BigRational {
    let mut best = BigRational::zero();
    for &c in m.cstr(x) {
        let Some((a, b)) = additive_pair(&m.constraints()[c].kind) else {
            continue;
        };
        let y = if a == x {
            b
        } else if b == x {
            a
        } else {
            continue;
        };
        let v = absorb(&doms[x.0], &doms[y.0]);
        if v > best {
            best = v;
            if best.is_one() {
                break;
            }
        }
    }
    best
}

/// The weight of `x` under `kind`; selection maximizes it.
pub fn weight(
    kind: PropertyKind,
    x: VarId,
    m: &Model,
    statics: &StaticWeights,
    doms: &[FpInterval],
) -> Weight {
    let i = x.0;
    match kind {
        PropertyKind::Width => Weight::Float(doms[i].width().value),
        PropertyKind::Card => Weight::Int(doms[i].card() as i128),
        PropertyKind::Density => density(&doms[i]),
        PropertyKind::Absorption => Weight::Ratio(absorption(x, m, doms)),
        PropertyKind::Lex => Weight::Int(-(statics.lex[i] as i128)),
        PropertyKind::Degree => Weight::Int(statics.degree[i] as i128),
        PropertyKind::LocalOcc => Weight::Int(statics.occ_l[i] as i128),
        PropertyKind::GlobalOcc => Weight::Int(statics.occ_g[i] as i128),
    }
}

/// Fraction of a format's finite floats lying in `iv`.
pub fn card_fraction(iv: &FpInterval) -> f64 {
    let full = FpInterval::full(iv.format()).card();
    iv.card() as f64 / full as f64
}
