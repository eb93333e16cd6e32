//! Signed numbers stored as `sign * exp(ln)`.
//!
//! The Carleman weights contain `exp(lambda psi)` with `lambda psi` in the
//! thousands; every product and sum that touches them goes through this type.

use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNum {
    sign: i8,
    ln: f64,
}

impl LogNum {
    pub const ZERO: LogNum = LogNum { sign: 0, ln: f64::NEG_INFINITY };
    pub const ONE: LogNum = LogNum { sign: 1, ln: 0.0 };

    pub fn new(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            LogNum { sign: if x > 0.0 { 1 } else { -1 }, ln: x.abs().ln() }
        }
    }

    /// `exp(l)`.
    pub fn exp(l: f64) -> Self {
        if l == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogNum { sign: 1, ln: l }
        }
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    /// `ln |x|`, `-inf` for zero.
    pub fn ln_abs(&self) -> f64 {
        self.ln
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    pub fn abs(self) -> Self {
        if self.sign == 0 {
            self
        } else {
            LogNum { sign: 1, ln: self.ln }
        }
    }

    /// `x^p` for `x >= 0`.
    pub fn powf(self, p: f64) -> Self {
        assert!(self.sign >= 0, "powf of a negative LogNum");
        if self.sign == 0 {
            if p > 0.0 {
                Self::ZERO
            } else {
                LogNum { sign: 1, ln: f64::INFINITY }
            }
        } else {
            LogNum { sign: 1, ln: self.ln * p }
        }
    }

    /// Saturates to `+-inf` or `0`.
    pub fn to_f64(self) -> f64 {
        f64::from(self.sign) * self.ln.exp()
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    /// `(self - other) / max(|self|, |other|)`, a bounded relative slack.
    pub fn rel_slack(self, other: Self) -> f64 {
        let scale = self.abs().max(other.abs());
        if scale.is_zero() {
            return 0.0;
        }
        ((self - other) / scale).to_f64()
    }
}

impl From<f64> for LogNum {
    fn from(x: f64) -> Self {
        LogNum::new(x)
    }
}

impl Neg for LogNum {
    type Output = LogNum;
    fn neg(self) -> LogNum {
        LogNum { sign: -self.sign, ln: self.ln }
    }
}

impl Mul for LogNum {
    type Output = LogNum;
    fn mul(self, rhs: LogNum) -> LogNum {
        if self.sign == 0 || rhs.sign == 0 {
            return LogNum::ZERO;
        }
        LogNum { sign: self.sign * rhs.sign, ln: self.ln + rhs.ln }
    }
}

impl Mul<f64> for LogNum {
    type Output = LogNum;
    fn mul(self, rhs: f64) -> LogNum {
        self * LogNum::new(rhs)
    }
}

impl Div for LogNum {
    type Output = LogNum;
    fn div(self, rhs: LogNum) -> LogNum {
        assert!(rhs.sign != 0, "LogNum division by zero");
        if self.sign == 0 {
            return LogNum::ZERO;
        }
        LogNum { sign: self.sign * rhs.sign, ln: self.ln - rhs.ln }
    }
}

impl Add for LogNum {
    type Output = LogNum;
    fn add(self, rhs: LogNum) -> LogNum {
        if self.sign == 0 {
            return rhs;
        }
        if rhs.sign == 0 {
            return self;
        }
        let (big, small) = if self.ln >= rhs.ln { (self, rhs) } else { (rhs, self) };
        let r = (small.ln - big.ln).exp();
        if big.sign == small.sign {
            LogNum { sign: big.sign, ln: big.ln + r.ln_1p() }
        } else if r == 1.0 {
            LogNum::ZERO
        } else {
            LogNum { sign: big.sign, ln: big.ln + (-r).ln_1p() }
        }
    }
}

impl Add<f64> for LogNum {
    type Output = LogNum;
    fn add(self, rhs: f64) -> LogNum {
        self + LogNum::new(rhs)
    }
}

impl Sub for LogNum {
    type Output = LogNum;
    fn sub(self, rhs: LogNum) -> LogNum {
        self + (-rhs)
    }
}

impl PartialOrd for LogNum {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.sign.cmp(&other.sign) {
            Ordering::Equal => match self.sign {
                0 => Some(Ordering::Equal),
                1 => self.ln.partial_cmp(&other.ln),
                _ => other.ln.partial_cmp(&self.ln),
            },
            o => Some(o),
        }
    }
}

impl std::iter::Sum for LogNum {
    fn sum<I: Iterator<Item = LogNum>>(iter: I) -> LogNum {
        iter.fold(LogNum::ZERO, |a, b| a + b)
    }
}
