//! Finite abelian groups as products of cyclic factors, and the Fourier
//! transform on them.
//!
//! Elements are indexed in mixed radix with the first factor as the least
//! significant digit, so in `Z_2^n` the index of a vector is its bit pattern
//! and addition is XOR.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

pub const DEFAULT_MAX_N: usize = 1 << 20;
pub const MAX_N_ENV: &str = "ENERGY_LAB_MAX_N";

/// Group-size cap, read from `ENERGY_LAB_MAX_N` when set.
pub fn max_group_size() -> usize {
    std::env::var(MAX_N_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&v| v >= 2)
        .unwrap_or(DEFAULT_MAX_N)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Layout {
    Cyclic,
    Boolean,
    Mixed,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroupSpec {
    factors: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
    layout: Layout,
}

/// Shared handle; sets and functions hold one of these.
pub type Group = Arc<GroupSpec>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Element(pub usize);

impl Element {
    pub fn index(self) -> usize {
        self.0
    }
}

pub fn make_group(factors: &[usize]) -> Result<Group> {
    make_group_with_cap(factors, max_group_size())
}

pub fn make_group_with_cap(factors: &[usize], cap: usize) -> Result<Group> {
    if factors.is_empty() {
        return Err(Error::InvalidGroup("empty factor list".into()));
    }
    let mut size: usize = 1;
    let mut strides = Vec::with_capacity(factors.len());
    for &n in factors {
        if n < 2 {
            return Err(Error::InvalidGroup(format!("factor {n} < 2")));
        }
        strides.push(size);
        size = size
            .checked_mul(n)
            .ok_or_else(|| Error::InvalidGroup("group order overflows".into()))?;
        if size > cap {
            return Err(Error::CapExceeded(format!("group order exceeds cap {cap}")));
        }
    }
    let layout = if factors.len() == 1 {
        Layout::Cyclic
    } else if factors.iter().all(|&n| n == 2) {
        Layout::Boolean
    } else {
        Layout::Mixed
    };
    Ok(Arc::new(GroupSpec {
        factors: factors.to_vec(),
        strides,
        size,
        layout,
    }))
}

/// `Z_2^n`.
pub fn boolean_cube(n: usize) -> Result<Group> {
    if n == 0 {
        return Err(Error::InvalidGroup("F_2^0 is trivial".into()));
    }
    make_group(&vec![2; n])
}

/// `Z_n`.
pub fn cyclic(n: usize) -> Result<Group> {
    make_group(&[n])
}

/// Parses a comma-separated factor list such as `"2,2,2,2"` or `"101"`.
pub fn parse_factors(text: &str) -> Result<Vec<usize>> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::Parse("empty factor list".into()));
    }
    text.split(',')
        .map(|part| {
            let part = part.trim();
            part.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad factor {part:?}")))
        })
        .collect()
}

pub fn parse_group(text: &str) -> Result<Group> {
    make_group(&parse_factors(text)?)
}

impl FromStr for GroupSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_group(s).map(|g| (*g).clone())
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.factors.iter().map(|n| n.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl GroupSpec {
    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn is_boolean(&self) -> bool {
        self.factors.iter().all(|&n| n == 2)
    }

    pub fn zero(&self) -> Element {
        Element(0)
    }

    fn check(&self, x: Element) -> Result<usize> {
        if x.0 < self.size {
            Ok(x.0)
        } else {
            Err(Error::OutOfRange {
                index: x.0,
                size: self.size,
            })
        }
    }

    pub fn add(&self, x: Element, y: Element) -> Result<Element> {
        Ok(Element(self.add_idx(self.check(x)?, self.check(y)?)))
    }

    pub fn sub(&self, x: Element, y: Element) -> Result<Element> {
        Ok(Element(self.sub_idx(self.check(x)?, self.check(y)?)))
    }

    pub fn neg(&self, x: Element) -> Result<Element> {
        Ok(Element(self.neg_idx(self.check(x)?)))
    }

    #[inline]
    pub fn add_idx(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.size && y < self.size);
        match self.layout {
            Layout::Cyclic => {
                let s = x + y;
                if s >= self.size {
                    s - self.size
                } else {
                    s
                }
            }
            Layout::Boolean => x ^ y,
            Layout::Mixed => {
                let mut out = 0;
                let (mut a, mut b) = (x, y);
                for (&n, &st) in self.factors.iter().zip(&self.strides) {
                    let d = a % n + b % n;
                    out += if d >= n { d - n } else { d } * st;
                    a /= n;
                    b /= n;
                }
                out
            }
        }
    }

    #[inline]
    pub fn neg_idx(&self, x: usize) -> usize {
        debug_assert!(x < self.size);
        match self.layout {
            Layout::Cyclic => {
                if x == 0 {
                    0
                } else {
                    self.size - x
                }
            }
            Layout::Boolean => x,
            Layout::Mixed => {
                let mut out = 0;
                let mut a = x;
                for (&n, &st) in self.factors.iter().zip(&self.strides) {
                    let d = a % n;
                    out += if d == 0 { 0 } else { n - d } * st;
                    a /= n;
                }
                out
            }
        }
    }

    #[inline]
    pub fn sub_idx(&self, x: usize, y: usize) -> usize {
        match self.layout {
            Layout::Cyclic => {
                if x >= y {
                    x - y
                } else {
                    x + self.size - y
                }
            }
            Layout::Boolean => x ^ y,
            Layout::Mixed => self.add_idx(x, self.neg_idx(y)),
        }
    }

    /// Coordinate vector of an index.
    pub fn decode(&self, x: usize) -> Result<Vec<usize>> {
        let mut a = self.check(Element(x))?;
        Ok(self
            .factors
            .iter()
            .map(|&n| {
                let d = a % n;
                a /= n;
                d
            })
            .collect())
    }

    pub fn encode(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.factors.len() {
            return Err(Error::SizeMismatch {
                expected: self.factors.len(),
                got: coords.len(),
            });
        }
        let mut out = 0;
        for ((&c, &n), &st) in coords.iter().zip(&self.factors).zip(&self.strides) {
            if c >= n {
                return Err(Error::OutOfRange { index: c, size: n });
            }
            out += c * st;
        }
        Ok(out)
    }

    /// `e(-xi . x)` evaluated directly; slow, meant for cross-checks.
    pub fn character(&self, xi: usize, x: usize) -> Complex64 {
        let (mut a, mut b) = (xi, x);
        let mut phase = 0.0f64;
        for &n in &self.factors {
            phase += ((a % n) * (b % n) % n) as f64 / n as f64;
            a /= n;
            b /= n;
        }
        Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * phase.fract())
    }

    /// `f^(xi) = sum_x f(x) e(-xi . x)`.
    pub fn fourier(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        self.transform(f, false)
    }

    /// `f(x) = N^{-1} sum_xi f^(xi) e(xi . x)`.
    pub fn inverse_fourier(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut out = self.transform(f, true)?;
        let scale = 1.0 / self.size as f64;
        for v in &mut out {
            *v *= scale;
        }
        Ok(out)
    }

    pub fn fourier_real(&self, f: &[f64]) -> Result<Vec<Complex64>> {
        let c: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fourier(&c)
    }

    fn transform(&self, f: &[Complex64], inverse: bool) -> Result<Vec<Complex64>> {
        if f.len() != self.size {
            return Err(Error::SizeMismatch {
                expected: self.size,
                got: f.len(),
            });
        }
        let mut data = f.to_vec();
        let mut planner = FftPlanner::<f64>::new();
        let mut line = Vec::new();
        for (&n, &st) in self.factors.iter().zip(&self.strides) {
            let block = n * st;
            if n == 2 {
                for base in (0..self.size).step_by(block) {
                    for i in base..base + st {
                        let (a, b) = (data[i], data[i + st]);
                        data[i] = a + b;
                        data[i + st] = a - b;
                    }
                }
                continue;
            }
            let fft = if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            };
            line.resize(n, Complex64::new(0.0, 0.0));
            for base in (0..self.size).step_by(block) {
                for i in base..base + st {
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = data[i + j * st];
                    }
                    fft.process(&mut line);
                    for (j, v) in line.iter().enumerate() {
                        data[i + j * st] = *v;
                    }
                }
            }
        }
        Ok(data)
    }
}

/// Fourier transform of a function, indexed by the dual group (identified
/// with the group itself).
#[derive(Clone, Debug)]
pub struct Spectrum {
    group: Group,
    values: Vec<Complex64>,
}

impl Spectrum {
    pub fn of(group: &Group, f: &[Complex64]) -> Result<Spectrum> {
        Ok(Spectrum {
            group: group.clone(),
            values: group.fourier(f)?,
        })
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn inverse(&self) -> Vec<Complex64> {
        self.group
            .inverse_fourier(&self.values)
            .expect("spectrum length matches its group")
    }

    /// `|f^(xi)|^2` for every `xi`.
    pub fn abs_sq(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }
}
