//! Checked integer accumulation: i128 until something overflows, then BigInt.

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

#[derive(Clone, Debug, Default)]
pub struct ExactSum {
    small: i128,
    big: Option<BigInt>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: i128) {
        if let Some(b) = &mut self.big {
            *b += v;
            return;
        }
        match self.small.checked_add(v) {
            Some(s) => self.small = s,
            None => self.big = Some(BigInt::from(self.small) + v),
        }
    }

    pub fn add_big(&mut self, v: &BigInt) {
        match v.to_i128() {
            Some(s) => self.add(s),
            None => {
                let cur = self.big.take().unwrap_or_else(|| BigInt::from(self.small));
                self.big = Some(cur + v);
            }
        }
    }

    /// Adds `a * b`.
    #[inline]
    pub fn add_product(&mut self, a: i128, b: i128) {
        match a.checked_mul(b) {
            Some(p) => self.add(p),
            None => self.add_big(&(BigInt::from(a) * b)),
        }
    }

    /// Adds `base^exp`.
    #[inline]
    pub fn add_pow(&mut self, base: i128, exp: u32) {
        match base.checked_pow(exp) {
            Some(p) => self.add(p),
            None => self.add_big(&num_traits::pow(BigInt::from(base), exp as usize)),
        }
    }

    pub fn value(&self) -> BigInt {
        match &self.big {
            Some(b) => b.clone(),
            None => BigInt::from(self.small),
        }
    }
}

/// `base^exp` exactly.
pub fn ipow(base: i128, exp: u32) -> BigInt {
    match base.checked_pow(exp) {
        Some(p) => BigInt::from(p),
        None => num_traits::pow(BigInt::from(base), exp as usize),
    }
}

pub fn big_pow(base: &BigInt, exp: u32) -> BigInt {
    num_traits::pow(base.clone(), exp as usize)
}

/// Lossy conversion used only for ratios and logs.
pub fn to_f64(v: &BigInt) -> f64 {
    v.to_f64().unwrap_or(f64::INFINITY)
}

/// Natural log of a positive BigInt without going through an overflowing f64.
pub fn ln_big(v: &BigInt) -> f64 {
    if v.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = v.bits();
    if bits < 1000 {
        return to_f64(v).ln();
    }
    let shift = bits - 64;
    let top: BigInt = v >> shift;
    to_f64(&top).ln() + shift as f64 * std::f64::consts::LN_2
}
