use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

use crate::formula::BinOp;

/// An integer extended with both infinities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtendedInt {
    NegInf,
    Finite(i64),
    PosInf,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("integer overflow in interval arithmetic")]
    Overflow,
    #[error("undefined sum of opposite infinities")]
    OppositeInfinities,
}

use ExtendedInt::{Finite, NegInf, PosInf};

impl ExtendedInt {
    pub fn finite(self) -> Option<i64> {
        match self {
            Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Finite(_))
    }

    fn signum(self) -> i64 {
        match self {
            NegInf => -1,
            Finite(v) => v.signum(),
            PosInf => 1,
        }
    }

    fn inf_with_sign(s: i64) -> ExtendedInt {
        if s < 0 {
            NegInf
        } else {
            PosInf
        }
    }

    pub fn checked_add(self, other: ExtendedInt) -> Result<ExtendedInt, ArithError> {
        match (self, other) {
            (Finite(a), Finite(b)) => a.checked_add(b).map(Finite).ok_or(ArithError::Overflow),
            (NegInf, PosInf) | (PosInf, NegInf) => Err(ArithError::OppositeInfinities),
            (NegInf, _) | (_, NegInf) => Ok(NegInf),
            (PosInf, _) | (_, PosInf) => Ok(PosInf),
        }
    }

    pub fn checked_sub(self, other: ExtendedInt) -> Result<ExtendedInt, ArithError> {
        self.checked_add(-other)
    }

    /// Product with the convention `0 × ±∞ = 0`.
    pub fn checked_mul(self, other: ExtendedInt) -> Result<ExtendedInt, ArithError> {
        match (self, other) {
            (Finite(a), Finite(b)) => a.checked_mul(b).map(Finite).ok_or(ArithError::Overflow),
            (Finite(0), _) | (_, Finite(0)) => Ok(Finite(0)),
            (a, b) => Ok(Self::inf_with_sign(a.signum() * b.signum())),
        }
    }

    pub fn min(self, other: ExtendedInt) -> ExtendedInt {
        Ord::min(self, other)
    }

    pub fn max(self, other: ExtendedInt) -> ExtendedInt {
        Ord::max(self, other)
    }
}

impl From<i64> for ExtendedInt {
    fn from(v: i64) -> Self {
        Finite(v)
    }
}

impl PartialEq<i64> for ExtendedInt {
    fn eq(&self, other: &i64) -> bool {
        *self == Finite(*other)
    }
}

impl PartialOrd<i64> for ExtendedInt {
    fn partial_cmp(&self, other: &i64) -> Option<Ordering> {
        Some(self.cmp(&Finite(*other)))
    }
}

impl std::ops::Neg for ExtendedInt {
    type Output = ExtendedInt;

    fn neg(self) -> ExtendedInt {
        match self {
            NegInf => PosInf,
            PosInf => NegInf,
            // -i64::MIN overflows; saturating to +inf keeps bounds sound.
            Finite(v) => v.checked_neg().map_or(PosInf, Finite),
        }
    }
}

impl fmt::Display for ExtendedInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NegInf => f.write_str("-inf"),
            Finite(v) => write!(f, "{v}"),
            PosInf => f.write_str("+inf"),
        }
    }
}

/// A closed interval of extended integers. All empty intervals share the
/// representation `[+inf..-inf]`, so structural equality is set equality.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Interval {
    lo: ExtendedInt,
    hi: ExtendedInt,
}

impl Interval {
    pub const TOP: Interval = Interval { lo: PosInf, hi: NegInf };
    pub const BOTTOM: Interval = Interval { lo: NegInf, hi: PosInf };

    pub fn new(lo: impl Into<ExtendedInt>, hi: impl Into<ExtendedInt>) -> Interval {
        let (lo, hi) = (lo.into(), hi.into());
        // An interval must contain an integer, so [+inf..+inf] is empty too.
        if lo > hi || lo == PosInf || hi == NegInf {
            Interval::TOP
        } else {
            Interval { lo, hi }
        }
    }

    /// The unconstrained interval, written ⊥ (no information).
    pub fn bottom() -> Interval {
        Interval::BOTTOM
    }

    /// The empty interval, written ⊤ (inconsistent).
    pub fn empty() -> Interval {
        Interval::TOP
    }

    pub fn singleton(v: i64) -> Interval {
        Interval { lo: Finite(v), hi: Finite(v) }
    }

    pub fn at_most(v: impl Into<ExtendedInt>) -> Interval {
        Interval::new(NegInf, v)
    }

    pub fn at_least(v: impl Into<ExtendedInt>) -> Interval {
        Interval::new(v, PosInf)
    }

    pub fn lo(&self) -> ExtendedInt {
        self.lo
    }

    pub fn hi(&self) -> ExtendedInt {
        self.hi
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn is_bottom(&self) -> bool {
        *self == Interval::BOTTOM
    }

    pub fn as_singleton(&self) -> Option<i64> {
        match (self.lo, self.hi) {
            (Finite(a), Finite(b)) if a == b => Some(a),
            _ => None,
        }
    }

    pub fn is_singleton(&self) -> bool {
        self.as_singleton().is_some()
    }

    pub fn contains(&self, v: i64) -> bool {
        self.lo <= Finite(v) && Finite(v) <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0)
    }

    /// Number of integers in the interval, `None` when unbounded.
    pub fn width(&self) -> Option<u128> {
        if self.is_empty() {
            return Some(0);
        }
        match (self.lo, self.hi) {
            (Finite(a), Finite(b)) => Some((b as i128 - a as i128 + 1) as u128),
            _ => None,
        }
    }

    /// Lattice order: `self ≤ other` iff `γ(self) ⊇ γ(other)`.
    pub fn leq(&self, other: &Interval) -> bool {
        other.is_empty() || (!self.is_empty() && self.lo <= other.lo && other.hi <= self.hi)
    }

    /// Set intersection.
    pub fn meet_set(&self, other: &Interval) -> Interval {
        interval_join(*self, *other)
    }

    /// Smallest interval containing both (set union hull).
    pub fn hull(&self, other: &Interval) -> Interval {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        Interval { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }

    pub fn neg(&self) -> Interval {
        if self.is_empty() {
            return *self;
        }
        Interval::new(-self.hi, -self.lo)
    }

    /// Finite integers of a bounded interval; nothing for unbounded ones.
    #[allow(clippy::reversed_empty_ranges)]
    pub fn iter(&self) -> std::ops::RangeInclusive<i64> {
        match (self.lo, self.hi) {
            (Finite(a), Finite(b)) => a..=b,
            _ => 1..=0,
        }
    }
}

/// Defaults to the unconstrained interval.
impl Default for Interval {
    fn default() -> Self {
        Interval::BOTTOM
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            f.write_str("empty")
        } else {
            write!(f, "[{}..{}]", self.lo, self.hi)
        }
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Lattice join of intervals, which is set intersection.
pub fn interval_join(a: Interval, b: Interval) -> Interval {
    if a.is_empty() || b.is_empty() {
        return Interval::TOP;
    }
    Interval::new(a.lo.max(b.lo), a.hi.min(b.hi))
}

/// Forward evaluation: the smallest interval containing `x op y` for
/// `x ∈ a`, `y ∈ b`.
pub fn interval_arith(op: BinOp, a: Interval, b: Interval) -> Result<Interval, ArithError> {
    if a.is_empty() || b.is_empty() {
        return Ok(Interval::TOP);
    }
    match op {
        BinOp::Add => Ok(Interval::new(a.lo.checked_add(b.lo)?, a.hi.checked_add(b.hi)?)),
        BinOp::Sub => Ok(Interval::new(a.lo.checked_sub(b.hi)?, a.hi.checked_sub(b.lo)?)),
        BinOp::Mul => {
            let corners = [
                a.lo.checked_mul(b.lo)?,
                a.lo.checked_mul(b.hi)?,
                a.hi.checked_mul(b.lo)?,
                a.hi.checked_mul(b.hi)?,
            ];
            let lo = corners.iter().copied().min().unwrap();
            let hi = corners.iter().copied().max().unwrap();
            Ok(Interval::new(lo, hi))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

fn floor_div(a: i64, b: i64) -> Option<i64> {
    let q = a.checked_div(b)?;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        Some(q - 1)
    } else {
        Some(q)
    }
}

fn ceil_div(a: i64, b: i64) -> Option<i64> {
    let q = a.checked_div(b)?;
    if (a % b != 0) && ((a < 0) == (b < 0)) {
        Some(q + 1)
    } else {
        Some(q)
    }
}

/// Quotient bound `r / k` for `k ≠ 0`, rounded towards the given direction.
/// A finite numerator over an infinite divisor tends to zero.
fn div_bound(r: ExtendedInt, k: ExtendedInt, round_up: bool) -> ExtendedInt {
    match (r, k) {
        (Finite(r), Finite(k)) => {
            let q = if round_up { ceil_div(r, k) } else { floor_div(r, k) };
            q.map_or(if round_up { NegInf } else { PosInf }, Finite)
        }
        (Finite(_), _) => Finite(0),
        (r, k) => ExtendedInt::inf_with_sign(r.signum() * k.signum()),
    }
}

/// Backward narrowing: a hull of the values `v` for which some `k ∈ known`
/// gives `v op k ∈ result` (`side = Left`) or `k op v ∈ result`
/// (`side = Right`).
pub fn interval_inv_narrow(op: BinOp, result: Interval, known: Interval, side: Side) -> Interval {
    if result.is_empty() || known.is_empty() {
        return Interval::TOP;
    }
    let (r, k) = (result, known);
    let bounded = |lo: Result<ExtendedInt, ArithError>, hi: Result<ExtendedInt, ArithError>| {
        Interval::new(lo.unwrap_or(NegInf), hi.unwrap_or(PosInf))
    };
    match (op, side) {
        (BinOp::Add, _) => bounded(r.lo.checked_sub(k.hi), r.hi.checked_sub(k.lo)),
        (BinOp::Sub, Side::Left) => bounded(r.lo.checked_add(k.lo), r.hi.checked_add(k.hi)),
        (BinOp::Sub, Side::Right) => bounded(k.lo.checked_sub(r.hi), k.hi.checked_sub(r.lo)),
        (BinOp::Mul, _) => {
            if k.contains_zero() {
                return Interval::BOTTOM;
            }
            let mut lo = PosInf;
            let mut hi = NegInf;
            for rv in [r.lo, r.hi] {
                for kv in [k.lo, k.hi] {
                    lo = lo.min(div_bound(rv, kv, true));
                    hi = hi.max(div_bound(rv, kv, false));
                }
            }
            Interval::new(lo, hi)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(a: i64, b: i64) -> Interval {
        Interval::new(a, b)
    }

    #[test]
    fn join_examples() {
        assert_eq!(interval_join(iv(1, 5), iv(3, 8)), iv(3, 5));
        assert_eq!(interval_join(Interval::at_most(4), Interval::at_least(3)), iv(3, 4));
        assert!(interval_join(iv(1, 2), iv(4, 5)).is_empty());
        assert_eq!(interval_join(iv(1, 2), iv(4, 5)), Interval::empty());
    }

    #[test]
    fn arith_examples() {
        assert_eq!(interval_arith(BinOp::Add, iv(0, 3), iv(2, 5)).unwrap(), iv(2, 8));
        assert_eq!(interval_arith(BinOp::Sub, iv(1, 1), iv(1, 1)).unwrap(), iv(0, 0));
        let m = interval_arith(BinOp::Mul, iv(0, 0), Interval::bottom()).unwrap();
        assert_eq!(m, iv(0, 0));
        let m = interval_arith(BinOp::Mul, iv(2, 3), Interval::at_least(1)).unwrap();
        assert_eq!(m, Interval::at_least(2));
    }

    #[test]
    fn arith_overflow_is_an_error() {
        let big = Interval::singleton(i64::MAX);
        assert_eq!(interval_arith(BinOp::Add, big, iv(1, 1)), Err(ArithError::Overflow));
        assert_eq!(interval_arith(BinOp::Mul, big, iv(2, 2)), Err(ArithError::Overflow));
    }

    #[test]
    fn opposite_infinities_are_rejected() {
        assert_eq!(NegInf.checked_add(PosInf), Err(ArithError::OppositeInfinities));
    }

    #[test]
    fn inverse_examples() {
        let mul = interval_inv_narrow(BinOp::Mul, iv(0, 5), iv(0, 2), Side::Left);
        assert_eq!(mul, Interval::bottom());
        assert_eq!(interval_inv_narrow(BinOp::Sub, iv(0, 0), iv(4, 4), Side::Left), iv(4, 4));
        assert_eq!(interval_inv_narrow(BinOp::Sub, iv(0, 0), iv(4, 4), Side::Right), iv(4, 4));
        // v * 3 in [4..10] -> v in [2..3]
        assert_eq!(interval_inv_narrow(BinOp::Mul, iv(4, 10), iv(3, 3), Side::Left), iv(2, 3));
        // v * [-2..-1] in [1..4] -> v in [-4..-1]
        assert_eq!(interval_inv_narrow(BinOp::Mul, iv(1, 4), iv(-2, -1), Side::Left), iv(-4, -1));
    }

    #[test]
    fn rounding_helpers() {
        assert_eq!(floor_div(-7, 2), Some(-4));
        assert_eq!(ceil_div(-7, 2), Some(-3));
        assert_eq!(floor_div(7, -2), Some(-4));
        assert_eq!(ceil_div(7, 2), Some(4));
        assert_eq!(floor_div(i64::MIN, -1), None);
    }

    #[test]
    fn widths_and_order() {
        assert_eq!(iv(1, 3).width(), Some(3));
        assert_eq!(Interval::at_least(0).width(), None);
        assert!(Interval::bottom().leq(&iv(1, 2)));
        assert!(iv(1, 2).leq(&Interval::empty()));
        assert!(!iv(1, 2).leq(&iv(0, 2)));
        assert!(Interval::new(PosInf, PosInf).is_empty());
    }
}
