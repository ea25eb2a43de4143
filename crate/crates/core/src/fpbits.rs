//! Bit-exact helpers over IEEE-754 values.
//!
//! Every value in this crate is carried as an `f64`, whatever the working
//! format. A [`FloatFormat`] decides which `f64`s are members of the format,
//! how real results round into it, and how its members are ranked.
//!
//! The rank (`ord`) maps the finite members of a format onto a contiguous
//! integer range, with both zeros sharing rank 0. Neighbour functions and
//! interval cardinalities are plain integer arithmetic on ranks.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum FpError {
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("{value:e} is not a member of the {format} format")]
    NotRepresentable { value: f64, format: &'static str },
    #[error("stepping past the largest finite {0} value")]
    OutOfRange(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FormatKind {
    Single,
    Double,
    /// Reduced-width format used by exhaustive test oracles.
    Mock,
}

/// Precision descriptor of a binary floating-point format.
///
/// `p` is the stored fraction width; normal numbers carry one more implicit
/// bit. Exponents are unbiased.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FloatFormat {
    pub kind: FormatKind,
    pub p: u32,
    pub e_min: i32,
    pub e_max: i32,
}

/// Sign, unbiased exponent and stored fraction of a finite value.
///
/// Subnormals (and zero) carry `exponent == e_min` with the implicit bit
/// cleared, so `value = sign * (implicit + mantissa / 2^p) * 2^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FloatDecomp {
    pub sign: i8,
    pub exponent: i32,
    pub mantissa: u64,
    pub subnormal: bool,
}

impl FloatFormat {
    pub const SINGLE: FloatFormat = FloatFormat {
        kind: FormatKind::Single,
        p: 23,
        e_min: -126,
        e_max: 127,
    };
    pub const DOUBLE: FloatFormat = FloatFormat {
        kind: FormatKind::Double,
        p: 52,
        e_min: -1022,
        e_max: 1023,
    };
    /// 8-bit minifloat with IEEE semantics: 1 sign, 4 exponent, 3 fraction bits.
    pub const MOCK: FloatFormat = FloatFormat {
        kind: FormatKind::Mock,
        p: 3,
        e_min: -6,
        e_max: 7,
    };

    pub fn name(&self) -> &'static str {
        match self.kind {
            FormatKind::Single => "single",
            FormatKind::Double => "double",
            FormatKind::Mock => "mock",
        }
    }

    pub fn from_name(name: &str) -> Option<FloatFormat> {
        match name {
            "single" => Some(Self::SINGLE),
            "double" => Some(Self::DOUBLE),
            "mock" => Some(Self::MOCK),
            _ => None,
        }
    }

    /// Mantissa length used by the absorption threshold.
    ///
    /// Single keeps the fraction width (23) while double uses 53, the width
    /// including the implicit bit. The mock format follows single.
    pub fn absorption_p(&self) -> i32 {
        match self.kind {
            FormatKind::Single => 23,
            FormatKind::Double => 53,
            FormatKind::Mock => self.p as i32,
        }
    }

    /// Exponent of the smallest subnormal quantum.
    fn quantum_exp(&self) -> i32 {
        self.e_min - self.p as i32
    }

    pub fn max_finite(&self) -> f64 {
        let sig = (1u64 << (self.p + 1)) - 1;
        compose(sig, self.e_max - self.p as i32).expect("max finite fits in f64")
    }

    pub fn min_subnormal(&self) -> f64 {
        pow2(self.quantum_exp())
    }

    pub fn min_normal(&self) -> f64 {
        pow2(self.e_min)
    }

    /// Largest rank; ranks span `-max_ord()..=max_ord()`.
    pub fn max_ord(&self) -> i64 {
        ((self.e_max - self.e_min + 2) as i64) * (1i64 << self.p) - 1
    }

    /// Whether `v` is a finite member of this format.
    pub fn is_member(&self, v: f64) -> bool {
        if !v.is_finite() {
            return false;
        }
        match self.kind {
            FormatKind::Double => true,
            FormatKind::Single => (v as f32) as f64 == v,
            FormatKind::Mock => self.generic_rank(v.abs()).is_some(),
        }
    }

    /// Rounds a real value (given as an `f64`) to nearest, ties to even.
    ///
    /// Overflow yields an infinity; zero keeps its sign.
    pub fn round(&self, x: f64) -> f64 {
        match self.kind {
            FormatKind::Double => x,
            FormatKind::Single => (x as f32) as f64,
            FormatKind::Mock => self.generic_round(x),
        }
    }

    /// Rounding by rescaling into the quantum of the binade, valid for any
    /// format whose range lies well inside the `f64` normal range.
    pub(crate) fn generic_round(&self, x: f64) -> f64 {
        if x == 0.0 || !x.is_finite() {
            return x;
        }
        let a = x.abs();
        let (_, _, e_a) = split_f64(a);
        let qe = e_a.max(self.e_min) - self.p as i32;
        let scaled = a * pow2(-qe);
        let r = scaled.round_ties_even() * pow2(qe);
        let r = if r >= pow2(self.e_max + 1) {
            f64::INFINITY
        } else {
            r
        };
        r.copysign(x)
    }

    /// Largest member `<= x`, or `None` when `x` lies below `-max_finite`.
    /// Values above the range clamp to `max_finite`.
    pub fn round_down(&self, x: f64) -> Option<f64> {
        let max = self.max_finite();
        if x.is_nan() || x < -max {
            return None;
        }
        if x >= max {
            return Some(max);
        }
        let r = canonical(self.round(x));
        if r > x {
            self.next_down(r).ok()
        } else {
            Some(r)
        }
    }

    /// Smallest member `>= x`, or `None` when `x` lies above `max_finite`.
    /// Values below the range clamp to `-max_finite`.
    pub fn round_up(&self, x: f64) -> Option<f64> {
        let max = self.max_finite();
        if x.is_nan() || x > max {
            return None;
        }
        if x <= -max {
            return Some(-max);
        }
        let r = canonical(self.round(x));
        if r < x {
            self.next_up(r).ok()
        } else {
            Some(r)
        }
    }

    fn check(&self, v: f64) -> Result<(), FpError> {
        if !v.is_finite() {
            return Err(FpError::NonFinite(v));
        }
        if !self.is_member(v) {
            return Err(FpError::NotRepresentable {
                value: v,
                format: self.name(),
            });
        }
        Ok(())
    }

    /// Rank of a finite member; `-0.0` and `+0.0` both map to 0.
    pub fn ord(&self, v: f64) -> Result<i64, FpError> {
        self.check(v)?;
        let mag = match self.kind {
            FormatKind::Single => ((v as f32).to_bits() & 0x7fff_ffff) as i64,
            FormatKind::Double => (v.to_bits() & 0x7fff_ffff_ffff_ffff) as i64,
            FormatKind::Mock => self.generic_rank(v.abs()).expect("checked member"),
        };
        Ok(if v < 0.0 { -mag } else { mag })
    }

    /// Inverse of [`FloatFormat::ord`]; rank 0 yields `+0.0`.
    pub fn from_ord(&self, k: i64) -> Result<f64, FpError> {
        if k.unsigned_abs() > self.max_ord() as u64 {
            return Err(FpError::OutOfRange(self.name()));
        }
        let mag = k.unsigned_abs();
        let a = match self.kind {
            FormatKind::Single => f32::from_bits(mag as u32) as f64,
            FormatKind::Double => f64::from_bits(mag),
            FormatKind::Mock => self.generic_unrank(mag),
        };
        Ok(if k < 0 { -a } else { a })
    }

    /// Rank of a non-negative magnitude computed from its exact significand,
    /// or `None` if it is not a finite member.
    pub(crate) fn generic_rank(&self, a: f64) -> Option<i64> {
        if a == 0.0 {
            return Some(0);
        }
        if !a.is_finite() {
            return None;
        }
        let (sig, exp2, e_a) = split_f64(a);
        if e_a > self.e_max {
            return None;
        }
        let p = self.p as i32;
        if e_a < self.e_min {
            // subnormal: a = m * 2^(e_min - p)
            let m = shift_exact(sig, exp2 - self.quantum_exp())?;
            Some(m as i64)
        } else {
            let full = shift_exact(sig, exp2 - (e_a - p))?;
            let frac = full - (1u64 << p);
            Some(((e_a - self.e_min + 1) as i64) * (1i64 << p) + frac as i64)
        }
    }

    pub(crate) fn generic_unrank(&self, k: u64) -> f64 {
        let p = self.p;
        if k < (1u64 << p) {
            compose(k, self.quantum_exp()).expect("subnormal in range")
        } else {
            let e = (k >> p) as i32 - 1 + self.e_min;
            let m = k & ((1u64 << p) - 1);
            compose((1u64 << p) | m, e - p as i32).expect("normal in range")
        }
    }

    pub fn next_up(&self, v: f64) -> Result<f64, FpError> {
        let k = self.ord(v)?;
        self.from_ord(k + 1)
    }

    pub fn next_down(&self, v: f64) -> Result<f64, FpError> {
        let k = self.ord(v)?;
        self.from_ord(k - 1)
    }

    pub fn decompose(&self, v: f64) -> Result<FloatDecomp, FpError> {
        self.check(v)?;
        let k = self.ord(v)?.unsigned_abs();
        let p = self.p;
        let sign = if v < 0.0 { -1 } else { 1 };
        if k < (1u64 << p) {
            Ok(FloatDecomp {
                sign,
                exponent: self.e_min,
                mantissa: k,
                subnormal: true,
            })
        } else {
            Ok(FloatDecomp {
                sign,
                exponent: (k >> p) as i32 - 1 + self.e_min,
                mantissa: k & ((1u64 << p) - 1),
                subnormal: false,
            })
        }
    }

    pub fn recompose(&self, d: &FloatDecomp) -> f64 {
        let p = self.p as i32;
        let sig = if d.subnormal {
            d.mantissa
        } else {
            (1u64 << p) | d.mantissa
        };
        let a = compose(sig, d.exponent - p).unwrap_or(f64::INFINITY);
        if d.sign < 0 {
            -a
        } else {
            a
        }
    }

    /// Rounded result of one arithmetic operation in this format. Zero is
    /// returned canonical; the result may be infinite or NaN.
    pub fn apply(&self, op: crate::model::BinOp, a: f64, b: f64) -> f64 {
        use crate::model::BinOp::*;
        let r = match op {
            Add => a + b,
            Sub => a - b,
            Mul => a * b,
            Div => a / b,
        };
        canonical(self.round(r))
    }
}

impl fmt::Display for FloatFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Maps `-0.0` to `+0.0`, leaves everything else untouched.
#[inline]
pub fn canonical(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

/// `(significand, exp2, floor(log2 a))` with `a = significand * 2^exp2`,
/// for a finite positive `a`.
fn split_f64(a: f64) -> (u64, i32, i32) {
    let bits = a.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (sig, exp2) = if biased == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), biased - 1075)
    };
    let e_a = exp2 + 63 - sig.leading_zeros() as i32;
    (sig, exp2, e_a)
}

/// `sig * 2^shift` as an integer, `None` if bits would be lost.
fn shift_exact(sig: u64, shift: i32) -> Option<u64> {
    if shift >= 0 {
        if shift >= 64 || sig.leading_zeros() < shift as u32 {
            return None;
        }
        Some(sig << shift)
    } else {
        let s = (-shift) as u32;
        if s >= 64 {
            return if sig == 0 { Some(0) } else { None };
        }
        if sig & ((1u64 << s) - 1) != 0 {
            return None;
        }
        Some(sig >> s)
    }
}

/// Exactly `sig * 2^exp2` as an `f64`, or `None` when that value is not
/// representable (overflow or lost low bits).
pub fn compose(mut sig: u64, mut exp2: i32) -> Option<f64> {
    if sig == 0 {
        return Some(0.0);
    }
    while sig >= (1u64 << 53) {
        if sig & 1 != 0 {
            return None;
        }
        sig >>= 1;
        exp2 += 1;
    }
    let bitlen = 64 - sig.leading_zeros() as i32;
    let e_a = exp2 + bitlen - 1;
    if e_a > 1023 {
        return None;
    }
    if e_a >= -1022 {
        let norm = sig << (53 - bitlen);
        let bits = (((e_a + 1023) as u64) << 52) | (norm & ((1u64 << 52) - 1));
        Some(f64::from_bits(bits))
    } else {
        let frac = shift_exact(sig, exp2 + 1074)?;
        Some(f64::from_bits(frac))
    }
}

/// `2^k` for `k` in `[-1074, 1023]`; saturates to 0 or infinity outside.
pub fn pow2(k: i32) -> f64 {
    if k > 1023 {
        f64::INFINITY
    } else if k < -1074 {
        0.0
    } else {
        compose(1, k).expect("power of two in range")
    }
}

/// Hexadecimal-float rendering, exact for every finite `f64`.
pub fn to_hex(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sign = if v.is_sign_negative() && v != 0.0 {
        "-"
    } else {
        ""
    };
    if v == 0.0 {
        return "0x0p+0".into();
    }
    let bits = v.abs().to_bits();
    let biased = (bits >> 52) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (lead, exp) = if biased == 0 {
        (0, -1022)
    } else {
        (1, biased - 1023)
    };
    let mut digits = format!("{frac:013x}");
    while digits.ends_with('0') {
        digits.pop();
    }
    let esign = if exp >= 0 { "+" } else { "" };
    if digits.is_empty() {
        format!("{sign}0x{lead}p{esign}{exp}")
    } else {
        format!("{sign}0x{lead}.{digits}p{esign}{exp}")
    }
}

/// Parses `[-+]0x<hex>[.<hex>]p[-+]<dec>`; the value must be exactly
/// representable as an `f64`.
pub fn parse_hex(s: &str) -> Option<f64> {
    let (neg, rest) = match s.as_bytes().first()? {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let rest = rest
        .strip_prefix("0x")
        .or_else(|| rest.strip_prefix("0X"))?;
    let ppos = rest.find(['p', 'P'])?;
    let (mant, exp) = (&rest[..ppos], &rest[ppos + 1..]);
    let exp: i32 = exp.parse().ok()?;
    let (int_part, frac_part) = match mant.find('.') {
        Some(i) => (&mant[..i], &mant[i + 1..]),
        None => (mant, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let mut sig: u128 = 0;
    let mut exp2 = exp;
    for c in int_part.chars() {
        let d = c.to_digit(16)? as u128;
        sig = sig.checked_mul(16)?.checked_add(d)?;
    }
    for c in frac_part.chars() {
        let d = c.to_digit(16)? as u128;
        sig = sig.checked_mul(16)?.checked_add(d)?;
        exp2 = exp2.checked_sub(4)?;
    }
    while sig >= (1u128 << 64) {
        if sig & 1 != 0 {
            return None;
        }
        sig >>= 1;
        exp2 += 1;
    }
    let v = compose(sig as u64, exp2)?;
    Some(if neg { -v } else { v })
}
