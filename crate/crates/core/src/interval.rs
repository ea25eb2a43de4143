//! Closed intervals of finite floats and the five-way split.

use std::fmt;

use thiserror::Error;

use crate::fpbits::{canonical, to_hex, FloatFormat, FpError};
use crate::model::BinOp;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum IntervalError {
    #[error(transparent)]
    Bound(#[from] FpError),
    #[error("empty interval [{lo}, {hi}]")]
    Empty { lo: f64, hi: f64 },
}

/// `[lo, hi]` over the finite members of a format. Never empty; bounds are
/// canonical (no `-0.0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpInterval {
    lo: f64,
    hi: f64,
    fmt: FloatFormat,
}

/// Result of [`FpInterval::width`]; `saturated` is set when the rounded
/// subtraction overflowed and `value` was clamped to the largest finite float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Width {
    pub value: f64,
    pub saturated: bool,
}

/// Children of a split, in exploration order.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub children: Vec<FpInterval>,
}

impl FpInterval {
    pub fn new(lo: f64, hi: f64, fmt: FloatFormat) -> Result<Self, IntervalError> {
        fmt.ord(lo)?;
        fmt.ord(hi)?;
        if lo > hi {
            return Err(IntervalError::Empty { lo, hi });
        }
        Ok(Self::new_unchecked(lo, hi, fmt))
    }

    #[inline]
    pub(crate) fn new_unchecked(lo: f64, hi: f64, fmt: FloatFormat) -> Self {
        debug_assert!(lo <= hi && fmt.is_member(lo) && fmt.is_member(hi));
        FpInterval {
            lo: canonical(lo),
            hi: canonical(hi),
            fmt,
        }
    }

    pub fn point(v: f64, fmt: FloatFormat) -> Result<Self, IntervalError> {
        Self::new(v, v, fmt)
    }

    /// Every finite member of the format.
    pub fn full(fmt: FloatFormat) -> Self {
        let max = fmt.max_finite();
        Self::new_unchecked(-max, max, fmt)
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn format(&self) -> FloatFormat {
        self.fmt
    }

    #[inline]
    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn is_subset_of(&self, other: &FpInterval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    /// `hi - lo` rounded to nearest in the interval's format.
    pub fn width(&self) -> Width {
        let w = self.fmt.apply(BinOp::Sub, self.hi, self.lo);
        if w.is_finite() {
            Width {
                value: w,
                saturated: false,
            }
        } else {
            Width {
                value: self.fmt.max_finite(),
                saturated: true,
            }
        }
    }

    /// Number of floats in the interval.
    pub fn card(&self) -> u128 {
        let lo = self.fmt.ord(self.lo).expect("valid bound") as i128;
        let hi = self.fmt.ord(self.hi).expect("valid bound") as i128;
        (hi - lo + 1) as u128
    }

    /// `lo/2 + hi/2` rounded to nearest, forced strictly inside when the
    /// interval holds at least three floats.
    pub fn midpoint(&self) -> f64 {
        let fmt = self.fmt;
        let mut mid = canonical(fmt.round(0.5 * self.lo + 0.5 * self.hi));
        if self.card() >= 3 {
            if mid <= self.lo {
                mid = fmt.next_up(self.lo).expect("interior exists");
            } else if mid >= self.hi {
                mid = fmt.next_down(self.hi).expect("interior exists");
            }
        }
        mid
    }

    /// Five-way split: the points `L`, `Mid`, `U`, then `[L+, Mid-]` and
    /// `[Mid+, U-]`. Intervals of at most five floats are enumerated.
    pub fn split5(&self) -> SplitOutcome {
        let fmt = self.fmt;
        let point = |v: f64| FpInterval::new_unchecked(v, v, fmt);
        let card = self.card();
        if card <= 5 {
            let mut children = Vec::with_capacity(card as usize);
            let mut v = self.lo;
            children.push(point(v));
            while v < self.hi {
                v = fmt.next_up(v).expect("bounded by hi");
                children.push(point(v));
            }
            return SplitOutcome { children };
        }
        let mid = self.midpoint();
        let mut children = vec![point(self.lo), point(mid), point(self.hi)];
        let lo_in = fmt.next_up(self.lo).expect("interior");
        let mid_dn = fmt.next_down(mid).expect("interior");
        if lo_in <= mid_dn {
            children.push(FpInterval::new_unchecked(lo_in, mid_dn, fmt));
        }
        let mid_up = fmt.next_up(mid).expect("interior");
        let hi_in = fmt.next_down(self.hi).expect("interior");
        if mid_up <= hi_in {
            children.push(FpInterval::new_unchecked(mid_up, hi_in, fmt));
        }
        SplitOutcome { children }
    }

    pub fn intersect(&self, other: &FpInterval) -> Option<FpInterval> {
        debug_assert_eq!(self.fmt, other.fmt);
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then(|| FpInterval::new_unchecked(lo, hi, self.fmt))
    }

    /// Intersection with the real range `[lo, hi]`, where the bounds need
    /// not be members (infinite bounds are allowed).
    pub fn clip(&self, lo: f64, hi: f64) -> Option<FpInterval> {
        let fmt = self.fmt;
        let lo = if lo <= self.lo {
            self.lo
        } else {
            fmt.round_up(lo)?
        };
        let hi = if hi >= self.hi {
            self.hi
        } else {
            fmt.round_down(hi)?
        };
        (lo <= hi).then(|| FpInterval::new_unchecked(lo, hi, fmt))
    }

    pub fn hull(&self, other: &FpInterval) -> FpInterval {
        FpInterval::new_unchecked(self.lo.min(other.lo), self.hi.max(other.hi), self.fmt)
    }
}

impl fmt::Display for FpInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if f.alternate() {
            write!(f, "[{}, {}]", to_hex(self.lo), to_hex(self.hi))
        } else {
            write!(f, "[{:e}, {:e}]", self.lo, self.hi)
        }
    }
}
