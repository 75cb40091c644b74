//! Sets and functions on a group: convolutions, correlations, slices,
//! sumsets and the counts `|A^n ± Δ(A)|`.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::exact::ExactSum;
use crate::group::{Element, Group, Spectrum};

/// Above this group order, large convolutions go through the transform.
pub const DIRECT_CONV_MAX_N: usize = 1 << 14;

pub(crate) fn same_group(a: &Group, b: &Group) -> Result<()> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(Error::GroupMismatch(a.to_string(), b.to_string()))
    }
}

/// A subset of a group, stored as a bit array.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GSet {
    group: Group,
    bits: Vec<u64>,
    card: usize,
}

impl fmt::Debug for GSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GSet[{}]{:?}", self.group, self.to_vec())
    }
}

impl GSet {
    pub fn empty(group: &Group) -> Self {
        GSet {
            group: group.clone(),
            bits: vec![0; group.size().div_ceil(64)],
            card: 0,
        }
    }

    pub fn full(group: &Group) -> Self {
        let mut s = Self::empty(group);
        for x in 0..group.size() {
            s.insert(x);
        }
        s
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(group: &Group, items: I) -> Result<Self> {
        let mut s = Self::empty(group);
        for x in items {
            if x >= group.size() {
                return Err(Error::OutOfRange {
                    index: x,
                    size: group.size(),
                });
            }
            s.insert(x);
        }
        Ok(s)
    }

    pub fn from_elements(group: &Group, items: &[Element]) -> Result<Self> {
        Self::from_indices(group, items.iter().map(|e| e.0))
    }

    #[inline]
    pub(crate) fn insert(&mut self, x: usize) {
        let (w, b) = (x / 64, x % 64);
        if self.bits[w] >> b & 1 == 0 {
            self.bits[w] |= 1 << b;
            self.card += 1;
        }
    }

    pub(crate) fn remove(&mut self, x: usize) {
        let (w, b) = (x / 64, x % 64);
        if self.bits[w] >> b & 1 == 1 {
            self.bits[w] &= !(1 << b);
            self.card -= 1;
        }
    }

    fn from_bits(group: &Group, bits: Vec<u64>) -> Self {
        let card = bits.iter().map(|w| w.count_ones() as usize).sum();
        GSet {
            group: group.clone(),
            bits,
            card,
        }
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    pub fn len(&self) -> usize {
        self.card
    }

    pub fn is_empty(&self) -> bool {
        self.card == 0
    }

    #[inline]
    pub fn contains(&self, x: usize) -> bool {
        x < self.group.size() && self.bits[x / 64] >> (x % 64) & 1 == 1
    }

    /// Elements in increasing index order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().flat_map(|(wi, &w)| {
            let mut word = w;
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let t = word.trailing_zeros() as usize;
                word &= word - 1;
                Some(wi * 64 + t)
            })
        })
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub(crate) fn to_u32(&self) -> Vec<u32> {
        self.iter().map(|x| x as u32).collect()
    }

    fn zip_bits(&self, other: &GSet, op: impl Fn(u64, u64) -> u64) -> GSet {
        assert!(
            same_group(&self.group, &other.group).is_ok(),
            "group mismatch"
        );
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| op(a, b))
            .collect();
        GSet::from_bits(&self.group, bits)
    }

    /// Panics on a group mismatch, as do the other binary set operations.
    pub fn union(&self, other: &GSet) -> GSet {
        self.zip_bits(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &GSet) -> GSet {
        self.zip_bits(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &GSet) -> GSet {
        self.zip_bits(other, |a, b| a & !b)
    }

    pub fn intersection_len(&self, other: &GSet) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn is_subset(&self, other: &GSet) -> bool {
        self.bits
            .iter()
            .zip(&other.bits)
            .all(|(&a, &b)| a & !b == 0)
    }

    pub fn is_disjoint(&self, other: &GSet) -> bool {
        self.intersection_len(other) == 0
    }

    pub fn complement(&self) -> GSet {
        let mut out = GSet::empty(&self.group);
        for x in 0..self.group.size() {
            if !self.contains(x) {
                out.insert(x);
            }
        }
        out
    }

    /// `{x + s : x in self}`.
    pub fn translate(&self, s: usize) -> GSet {
        let mut out = GSet::empty(&self.group);
        for x in self.iter() {
            out.insert(self.group.add_idx(x, s));
        }
        out
    }

    /// `{-x : x in self}`.
    pub fn negate(&self) -> GSet {
        let mut out = GSet::empty(&self.group);
        for x in self.iter() {
            out.insert(self.group.neg_idx(x));
        }
        out
    }

    pub fn indicator(&self) -> DenseFunc {
        let mut v = vec![0i128; self.group.size()];
        for x in self.iter() {
            v[x] = 1;
        }
        DenseFunc {
            group: self.group.clone(),
            values: Values::Int(v),
        }
    }

    pub fn spectrum(&self) -> Spectrum {
        let mut v = vec![Complex64::new(0.0, 0.0); self.group.size()];
        for x in self.iter() {
            v[x] = Complex64::new(1.0, 0.0);
        }
        Spectrum::of(&self.group, &v).expect("length matches group")
    }
}

/// Values of a function on the group. Integer functions stay exact and move
/// to BigInt only when i128 overflows; real functions are flagged as such.
#[derive(Clone, Debug, PartialEq)]
pub enum Values {
    Int(Vec<i128>),
    Big(Vec<BigInt>),
    Real(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseFunc {
    group: Group,
    values: Values,
}

impl DenseFunc {
    fn check_len(group: &Group, len: usize) -> Result<()> {
        if len == group.size() {
            Ok(())
        } else {
            Err(Error::SizeMismatch {
                expected: group.size(),
                got: len,
            })
        }
    }

    pub fn from_ints(group: &Group, values: Vec<i128>) -> Result<Self> {
        Self::check_len(group, values.len())?;
        Ok(DenseFunc {
            group: group.clone(),
            values: Values::Int(values),
        })
    }

    pub fn from_bigs(group: &Group, values: Vec<BigInt>) -> Result<Self> {
        Self::check_len(group, values.len())?;
        let small: Option<Vec<i128>> = values.iter().map(|v| v.to_i128()).collect();
        Ok(DenseFunc {
            group: group.clone(),
            values: match small {
                Some(s) => Values::Int(s),
                None => Values::Big(values),
            },
        })
    }

    pub fn from_reals(group: &Group, values: Vec<f64>) -> Result<Self> {
        Self::check_len(group, values.len())?;
        Ok(DenseFunc {
            group: group.clone(),
            values: Values::Real(values),
        })
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    pub fn values(&self) -> &Values {
        &self.values
    }

    pub fn is_real(&self) -> bool {
        matches!(self.values, Values::Real(_))
    }

    pub fn as_ints(&self) -> Option<&[i128]> {
        match &self.values {
            Values::Int(v) => Some(v),
            _ => None,
        }
    }

    /// Exact value at `x`; `None` for real functions.
    pub fn exact_at(&self, x: usize) -> Option<BigInt> {
        match &self.values {
            Values::Int(v) => Some(BigInt::from(v[x])),
            Values::Big(v) => Some(v[x].clone()),
            Values::Real(_) => None,
        }
    }

    pub fn real_at(&self, x: usize) -> f64 {
        match &self.values {
            Values::Int(v) => v[x] as f64,
            Values::Big(v) => v[x].to_f64().unwrap_or(f64::NAN),
            Values::Real(v) => v[x],
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.group.size()).map(|x| self.real_at(x)).collect()
    }

    pub fn to_bigs(&self) -> Option<Vec<BigInt>> {
        match &self.values {
            Values::Int(v) => Some(v.iter().map(|&x| BigInt::from(x)).collect()),
            Values::Big(v) => Some(v.clone()),
            Values::Real(_) => None,
        }
    }

    fn is_nonzero(&self, x: usize) -> bool {
        match &self.values {
            Values::Int(v) => v[x] != 0,
            Values::Big(v) => !v[x].is_zero(),
            Values::Real(v) => v[x] != 0.0,
        }
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.group.size())
            .filter(|&x| self.is_nonzero(x))
            .collect()
    }

    /// `x -> f(-x)`.
    pub fn reflect(&self) -> DenseFunc {
        let g = &self.group;
        let perm = |x: usize| g.neg_idx(x);
        let values = match &self.values {
            Values::Int(v) => Values::Int((0..g.size()).map(|x| v[perm(x)]).collect()),
            Values::Big(v) => Values::Big((0..g.size()).map(|x| v[perm(x)].clone()).collect()),
            Values::Real(v) => Values::Real((0..g.size()).map(|x| v[perm(x)]).collect()),
        };
        DenseFunc {
            group: g.clone(),
            values,
        }
    }

    /// Pointwise power; exact for integer functions.
    pub fn pointwise_pow(&self, k: u32) -> DenseFunc {
        match &self.values {
            Values::Real(v) => DenseFunc {
                group: self.group.clone(),
                values: Values::Real(v.iter().map(|x| x.powi(k as i32)).collect()),
            },
            _ => {
                let bigs = self.to_bigs().expect("integer function");
                let powed = bigs
                    .iter()
                    .map(|b| num_traits::pow(b.clone(), k as usize))
                    .collect();
                DenseFunc::from_bigs(&self.group, powed).expect("same length")
            }
        }
    }

    pub fn fourier(&self) -> Spectrum {
        let v: Vec<Complex64> = self
            .to_f64()
            .into_iter()
            .map(|x| Complex64::new(x, 0.0))
            .collect();
        Spectrum::of(&self.group, &v).expect("length matches group")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PairOp {
    /// `(f*g)(x) = sum_y f(y) g(x-y)`
    Conv,
    /// `(f o g)(x) = sum_y f(y) g(y+x)`
    Corr,
}

#[inline]
fn pair_target(g: &crate::group::GroupSpec, op: PairOp, y: usize, z: usize) -> usize {
    match op {
        PairOp::Conv => g.add_idx(y, z),
        PairOp::Corr => g.sub_idx(z, y),
    }
}

/// Rounds a transform-path result when the float error is provably far
/// below 1/2; otherwise declines.
fn transform_exact(
    group: &Group,
    f: &[f64],
    h: &[f64],
    op: PairOp,
    l1: f64,
    l2: f64,
) -> Option<Vec<i128>> {
    let n = group.size() as f64;
    let bound = 16.0 * f64::EPSILON * (n.log2() + 2.0) * l1.max(l2 * n.sqrt());
    if bound >= 0.25 || l1 >= 2f64.powi(50) {
        return None;
    }
    let out = transform_pair(group, f, h, op);
    Some(out.iter().map(|v| v.round() as i128).collect())
}

fn transform_pair(group: &Group, f: &[f64], h: &[f64], op: PairOp) -> Vec<f64> {
    let ff = group.fourier_real(f).expect("length");
    let hh = group.fourier_real(h).expect("length");
    let prod: Vec<Complex64> = ff
        .iter()
        .zip(&hh)
        .map(|(a, b)| match op {
            PairOp::Conv => a * b,
            PairOp::Corr => a.conj() * b,
        })
        .collect();
    group
        .inverse_fourier(&prod)
        .expect("length")
        .into_iter()
        .map(|c| c.re)
        .collect()
}

fn pair_exact(f: &DenseFunc, h: &DenseFunc, op: PairOp) -> DenseFunc {
    let g = &f.group;
    let sf = f.support();
    let sh = h.support();
    if g.size() > DIRECT_CONV_MAX_N && sf.len().saturating_mul(sh.len()) > 64 * g.size() {
        if let (Some(a), Some(b)) = (f.as_ints(), h.as_ints()) {
            let l1a: f64 = a.iter().map(|v| v.unsigned_abs() as f64).sum();
            let l1b: f64 = b.iter().map(|v| v.unsigned_abs() as f64).sum();
            let l2a: f64 = a.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
            let l2b: f64 = b.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
            if let Some(v) = transform_exact(g, &f.to_f64(), &h.to_f64(), op, l1a * l1b, l2a * l2b)
            {
                return DenseFunc::from_ints(g, v).expect("length");
            }
        }
    }
    if let (Some(a), Some(b)) = (f.as_ints(), h.as_ints()) {
        let mut out = vec![0i128; g.size()];
        let mut ok = true;
        'outer: for &y in &sf {
            for &z in &sh {
                let t = pair_target(g, op, y, z);
                match a[y].checked_mul(b[z]).and_then(|p| out[t].checked_add(p)) {
                    Some(v) => out[t] = v,
                    None => {
                        ok = false;
                        break 'outer;
                    }
                }
            }
        }
        if ok {
            return DenseFunc::from_ints(g, out).expect("length");
        }
    }
    let a = f.to_bigs().expect("integer function");
    let b = h.to_bigs().expect("integer function");
    let mut out = vec![BigInt::zero(); g.size()];
    for &y in &sf {
        for &z in &sh {
            out[pair_target(g, op, y, z)] += &a[y] * &b[z];
        }
    }
    DenseFunc::from_bigs(g, out).expect("length")
}

fn pair_real(f: &DenseFunc, h: &DenseFunc, op: PairOp) -> DenseFunc {
    let g = &f.group;
    let (a, b) = (f.to_f64(), h.to_f64());
    let values = if g.size() <= DIRECT_CONV_MAX_N {
        let mut out = vec![0.0; g.size()];
        let sh = h.support();
        for y in f.support() {
            for &z in &sh {
                out[pair_target(g, op, y, z)] += a[y] * b[z];
            }
        }
        out
    } else {
        transform_pair(g, &a, &b, op)
    };
    DenseFunc::from_reals(g, values).expect("length")
}

fn pair(f: &DenseFunc, h: &DenseFunc, op: PairOp) -> Result<DenseFunc> {
    same_group(&f.group, &h.group)?;
    if f.is_real() || h.is_real() {
        Ok(pair_real(f, h, op))
    } else {
        Ok(pair_exact(f, h, op))
    }
}

/// `(f*g)(x) = sum_y f(y) g(x-y)`.
pub fn convolve(f: &DenseFunc, g: &DenseFunc) -> Result<DenseFunc> {
    pair(f, g, PairOp::Conv)
}

/// `(f o g)(x) = sum_y f(y) g(y+x)`.
pub fn correlate(f: &DenseFunc, g: &DenseFunc) -> Result<DenseFunc> {
    pair(f, g, PairOp::Corr)
}

/// Convolution through the transform, never rounded; the cross-check path.
pub fn convolve_fourier(f: &DenseFunc, g: &DenseFunc) -> Result<Vec<f64>> {
    same_group(&f.group, &g.group)?;
    Ok(transform_pair(
        &f.group,
        &f.to_f64(),
        &g.to_f64(),
        PairOp::Conv,
    ))
}

pub fn correlate_fourier(f: &DenseFunc, g: &DenseFunc) -> Result<Vec<f64>> {
    same_group(&f.group, &g.group)?;
    Ok(transform_pair(
        &f.group,
        &f.to_f64(),
        &g.to_f64(),
        PairOp::Corr,
    ))
}

/// `k` convolution steps: `k = 1` gives `f*f`.
pub fn iterated_convolve(f: &DenseFunc, k: usize) -> Result<DenseFunc> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut acc = convolve(f, f)?;
    for _ in 1..k {
        acc = convolve(&acc, f)?;
    }
    Ok(acc)
}

/// Number of solutions of `a_1 + ... + a_k = 0` in `A`.
pub fn sigma_k(a: &GSet, k: usize) -> Result<BigInt> {
    match k {
        0 => Err(Error::InvalidArgument("k must be at least 1".into())),
        1 => Ok(BigInt::from(a.contains(0) as u8)),
        _ => {
            let f = iterated_convolve(&a.indicator(), k - 1)?;
            Ok(f.exact_at(0).expect("integer function"))
        }
    }
}

fn pair_counts(a: &GSet, b: &GSet, op: PairOp) -> Vec<u64> {
    let g = &a.group;
    let n = g.size();
    let (ea, eb) = (a.to_vec(), b.to_vec());
    if n > DIRECT_CONV_MAX_N && ea.len().saturating_mul(eb.len()) > 64 * n {
        let (fa, fb) = (indicator_f64(a), indicator_f64(b));
        let l1 = (ea.len() * eb.len()) as f64;
        let l2 = ((ea.len() * eb.len()) as f64).sqrt();
        if let Some(v) = transform_exact(g, &fa, &fb, op, l1, l2) {
            return v.into_iter().map(|x| x.max(0) as u64).collect();
        }
    }
    let mut out = vec![0u64; n];
    for &y in &ea {
        for &z in &eb {
            out[pair_target(g, op, y, z)] += 1;
        }
    }
    out
}

fn indicator_f64(a: &GSet) -> Vec<f64> {
    let mut v = vec![0.0; a.group.size()];
    for x in a.iter() {
        v[x] = 1.0;
    }
    v
}

/// `(A o B)(x) = |{y in A : y + x in B}|`.
pub fn correlation_counts(a: &GSet, b: &GSet) -> Result<Vec<u64>> {
    same_group(&a.group, &b.group)?;
    Ok(pair_counts(a, b, PairOp::Corr))
}

/// `(A * B)(x) = |{y in A : x - y in B}|`.
pub fn convolution_counts(a: &GSet, b: &GSet) -> Result<Vec<u64>> {
    same_group(&a.group, &b.group)?;
    Ok(pair_counts(a, b, PairOp::Conv))
}

/// A tuple of shifts `(s_1, ..., s_{k-1})`; the empty tuple is allowed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ShiftTuple {
    pub shifts: Vec<Element>,
}

impl ShiftTuple {
    pub fn new(shifts: &[usize]) -> Self {
        ShiftTuple {
            shifts: shifts.iter().map(|&s| Element(s)).collect(),
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn arity(&self) -> usize {
        self.shifts.len()
    }

    fn check(&self, group: &Group) -> Result<()> {
        for s in &self.shifts {
            if s.0 >= group.size() {
                return Err(Error::OutOfRange {
                    index: s.0,
                    size: group.size(),
                });
            }
        }
        Ok(())
    }
}

/// `B ∩ (A - s_1) ∩ ... ∩ (A - s_{k-1})`; the empty tuple gives `B ∩ A`.
pub fn slice(a: &GSet, b: &GSet, t: &ShiftTuple) -> Result<GSet> {
    same_group(&a.group, &b.group)?;
    t.check(&a.group)?;
    if t.shifts.is_empty() {
        return Ok(b.intersection(a));
    }
    let g = &a.group;
    let mut out = b.clone();
    for s in &t.shifts {
        out = out.intersection(&a.translate(g.neg_idx(s.0)));
    }
    Ok(out)
}

/// `A_s = A ∩ (A - s)`.
pub fn self_slice(a: &GSet, s: usize) -> GSet {
    a.intersection(&a.translate(a.group.neg_idx(s)))
}

fn sum_or_diff(a: &GSet, b: &GSet, op: PairOp) -> Result<GSet> {
    same_group(&a.group, &b.group)?;
    let g = &a.group;
    if g.size() > DIRECT_CONV_MAX_N && a.len().saturating_mul(b.len()) > 64 * g.size() {
        // support of the exact count function
        let counts = pair_counts(a, b, op);
        return GSet::from_indices(g, (0..g.size()).filter(|&x| counts[x] > 0));
    }
    let mut out = GSet::empty(g);
    let eb = b.to_vec();
    for y in a.iter() {
        for &z in &eb {
            out.insert(pair_target(g, op, y, z));
        }
    }
    Ok(out)
}

/// `A + B`.
pub fn sumset(a: &GSet, b: &GSet) -> Result<GSet> {
    sum_or_diff(a, b, PairOp::Conv)
}

/// `A - B`.
pub fn difference_set(a: &GSet, b: &GSet) -> Result<GSet> {
    // (B o A) is supported on A - B
    sum_or_diff(b, a, PairOp::Corr)
}

/// `|nA - mA|`, with `n + m >= 1`.
pub fn iterated_sumset(a: &GSet, n: usize, m: usize) -> Result<GSet> {
    if n + m == 0 {
        return Err(Error::InvalidArgument("n + m must be positive".into()));
    }
    let neg = a.negate();
    let mut acc: Option<GSet> = None;
    for part in std::iter::repeat_n(a, n).chain(std::iter::repeat_n(&neg, m)) {
        acc = Some(match acc {
            None => part.clone(),
            Some(s) => sumset(&s, part)?,
        });
    }
    Ok(acc.expect("n + m >= 1"))
}

/// `C_k(f_0, ..., f_{k-1})(x_1, ..., x_{k-1}) = sum_z f_0(z) f_1(z+x_1) ...`.
pub fn generalized_convolution(fs: &[DenseFunc], xs: &[Element]) -> Result<BigInt> {
    if fs.len() < 2 {
        return Err(Error::InvalidArgument("need at least two functions".into()));
    }
    if xs.len() + 1 != fs.len() {
        return Err(Error::InvalidArgument(format!(
            "{} functions need {} shifts, got {}",
            fs.len(),
            fs.len() - 1,
            xs.len()
        )));
    }
    let g = fs[0].group.clone();
    for f in &fs[1..] {
        same_group(&g, &f.group)?;
    }
    for x in xs {
        if x.0 >= g.size() {
            return Err(Error::OutOfRange {
                index: x.0,
                size: g.size(),
            });
        }
    }
    if fs.iter().any(|f| f.is_real()) {
        return Err(Error::InvalidArgument(
            "generalized convolution is exact; got a real function".into(),
        ));
    }
    let bigs: Vec<Vec<BigInt>> = fs.iter().map(|f| f.to_bigs().expect("exact")).collect();
    let mut total = ExactSum::new();
    for z in fs[0].support() {
        let mut prod = bigs[0][z].clone();
        for (f, x) in bigs[1..].iter().zip(xs) {
            let v = &f[g.add_idx(z, x.0)];
            if v.is_zero() {
                prod = BigInt::zero();
                break;
            }
            prod *= v;
        }
        total.add_big(&prod);
    }
    Ok(total.value())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

/// `A + B` or `A - B`.
pub fn signed_sumset(a: &GSet, b: &GSet, sign: Sign) -> Result<GSet> {
    match sign {
        Sign::Plus => sumset(a, b),
        Sign::Minus => difference_set(a, b),
    }
}

/// `|A^2 ± Δ(A)|` by listing the pairs `(a_1 ± a, a_2 ± a)` directly.
pub fn delta_sumset_size_direct(a: &GSet, sign: Sign) -> Result<u128> {
    let g = &a.group;
    let n = g.size();
    let el = a.to_vec();
    let shift = |x: usize, t: usize| match sign {
        Sign::Plus => g.add_idx(x, t),
        Sign::Minus => g.sub_idx(x, t),
    };
    if (n as u128) * (n as u128) <= 1 << 30 {
        let mut seen = vec![0u64; (n * n).div_ceil(64)];
        let mut count = 0u128;
        for &t in &el {
            for &x in &el {
                let row = shift(x, t) * n;
                for &y in &el {
                    let idx = row + shift(y, t);
                    let (w, b) = (idx / 64, idx % 64);
                    if seen[w] >> b & 1 == 0 {
                        seen[w] |= 1 << b;
                        count += 1;
                    }
                }
            }
        }
        Ok(count)
    } else {
        let mut seen: HashSet<(usize, usize)> = HashSet::new();
        for &t in &el {
            for &x in &el {
                for &y in &el {
                    seen.insert((shift(x, t), shift(y, t)));
                }
            }
        }
        Ok(seen.len() as u128)
    }
}

/// Bucket sort of the pairs `(c, r)` by shift `r - c`: afterwards bucket `s`
/// lists `{c in node : c + s in reference}` in increasing order.
pub(crate) struct SliceBuckets {
    counts: Vec<u32>,
    pos: Vec<u32>,
    data: Vec<u32>,
    touched: Vec<u32>,
    starts: Vec<u32>,
}

impl SliceBuckets {
    pub(crate) fn new(n: usize) -> Self {
        SliceBuckets {
            counts: vec![0; n],
            pos: vec![0; n],
            data: Vec::new(),
            touched: Vec::new(),
            starts: Vec::new(),
        }
    }

    /// Only the bucket sizes; leaves `touched` and `counts` filled.
    pub(crate) fn count(&mut self, g: &crate::group::GroupSpec, node: &[u32], reference: &[u32]) {
        self.clear();
        for &c in node {
            for &r in reference {
                let s = g.sub_idx(r as usize, c as usize);
                if self.counts[s] == 0 {
                    self.touched.push(s as u32);
                }
                self.counts[s] += 1;
            }
        }
    }

    pub(crate) fn fill(&mut self, g: &crate::group::GroupSpec, node: &[u32], reference: &[u32]) {
        self.count(g, node, reference);
        self.touched.sort_unstable();
        self.starts.clear();
        let mut off = 0u32;
        for &s in &self.touched {
            self.starts.push(off);
            self.pos[s as usize] = off;
            off += self.counts[s as usize];
        }
        self.data.clear();
        self.data.resize(off as usize, 0);
        for &c in node {
            for &r in reference {
                let s = g.sub_idx(r as usize, c as usize);
                let p = &mut self.pos[s];
                self.data[*p as usize] = c;
                *p += 1;
            }
        }
    }

    pub(crate) fn sizes(&self) -> impl Iterator<Item = u32> + '_ {
        self.touched.iter().map(|&s| self.counts[s as usize])
    }

    /// `(s, bucket)` in increasing `s`; valid after `fill`.
    pub(crate) fn buckets(&self) -> impl Iterator<Item = (usize, &[u32])> + '_ {
        self.touched.iter().zip(&self.starts).map(|(&s, &st)| {
            let len = self.counts[s as usize];
            (s as usize, &self.data[st as usize..(st + len) as usize])
        })
    }

    fn clear(&mut self) {
        for &s in &self.touched {
            self.counts[s as usize] = 0;
        }
        self.touched.clear();
    }
}

/// Upper limit on the tuple length accepted by [`delta_sumset_size`].
pub const MAX_DELTA_ARITY: usize = 8;

/// `|A^n ± Δ(A)|` through `sum_{s in A^{n-1} - Δ(A)} |A ± A_s|`.
pub fn delta_sumset_size(a: &GSet, n: usize, sign: Sign) -> Result<BigInt> {
    if n < 2 {
        return Err(Error::InvalidArgument("n must be at least 2".into()));
    }
    if n > MAX_DELTA_ARITY {
        return Err(Error::CapExceeded(format!(
            "tuple length {n} exceeds {MAX_DELTA_ARITY}"
        )));
    }
    let g = a.group.clone();
    let el = a.to_u32();
    let mut total = ExactSum::new();
    let mut scratch: Vec<SliceBuckets> = (0..n - 1).map(|_| SliceBuckets::new(g.size())).collect();
    let leaf = LeafUnion::new(a, sign);
    delta_rec(&leaf, &el, &el, n - 1, &mut scratch, &mut total)?;
    Ok(total.value())
}

/// Largest group for which every translate `A ± p` is tabulated.
const TRANSLATE_TABLE_MAX_N: usize = 1 << 13;

/// `|A ± node|` as a union of translates, tabulated for small groups.
struct LeafUnion<'a> {
    a: &'a GSet,
    sign: Sign,
    words: usize,
    table: Vec<u64>,
    acc: std::cell::RefCell<Vec<u64>>,
}

impl<'a> LeafUnion<'a> {
    fn new(a: &'a GSet, sign: Sign) -> Self {
        let n = a.group.size();
        let words = a.bits.len();
        let mut table = Vec::new();
        if n <= TRANSLATE_TABLE_MAX_N {
            table = vec![0u64; n * words];
            for p in 0..n {
                let row = &mut table[p * words..(p + 1) * words];
                for x in a.iter() {
                    let y = match sign {
                        Sign::Plus => a.group.add_idx(x, p),
                        Sign::Minus => a.group.sub_idx(x, p),
                    };
                    row[y / 64] |= 1 << (y % 64);
                }
            }
        }
        LeafUnion {
            a,
            sign,
            words,
            table,
            acc: std::cell::RefCell::new(vec![0; words]),
        }
    }

    fn size(&self, node: &[u32]) -> Result<usize> {
        if self.table.is_empty() {
            let part = GSet::from_indices(&self.a.group, node.iter().map(|&x| x as usize))?;
            return Ok(signed_sumset(self.a, &part, self.sign)?.len());
        }
        let mut acc = self.acc.borrow_mut();
        acc.iter_mut().for_each(|w| *w = 0);
        for &p in node {
            let row = &self.table[p as usize * self.words..(p as usize + 1) * self.words];
            for (w, r) in acc.iter_mut().zip(row) {
                *w |= r;
            }
        }
        Ok(acc.iter().map(|w| w.count_ones() as usize).sum())
    }
}

fn delta_rec(
    leaf: &LeafUnion<'_>,
    el: &[u32],
    node: &[u32],
    remaining: usize,
    scratch: &mut [SliceBuckets],
    total: &mut ExactSum,
) -> Result<()> {
    if remaining == 0 {
        total.add(leaf.size(node)? as i128);
        return Ok(());
    }
    let (head, rest) = scratch.split_first_mut().expect("depth matches scratch");
    head.fill(&leaf.a.group, node, el);
    for (_, bucket) in head.buckets() {
        delta_rec(leaf, el, bucket, remaining - 1, rest, total)?;
    }
    Ok(())
}

/// Checks `A - A_x ⊆ (A-A)_{-x}` and `A + A_x ⊆ (A+A)_x` for a shift tuple.
pub fn katz_koester_check(a: &GSet, t: &ShiftTuple) -> Result<bool> {
    t.check(&a.group)?;
    let g = &a.group;
    let d = difference_set(a, a)?;
    let s = sumset(a, a)?;
    let a_t = slice(a, a, t)?;
    let neg: Vec<usize> = t.shifts.iter().map(|x| g.neg_idx(x.0)).collect();
    let d_neg = slice(&d, &d, &ShiftTuple::new(&neg))?;
    let s_t = slice(&s, &s, t)?;
    let minus_ok = difference_set(a, &a_t)?.is_subset(&d_neg);
    let plus_ok = sumset(a, &a_t)?.is_subset(&s_t);
    Ok(minus_ok && plus_ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{boolean_cube, cyclic};
    use proptest::prelude::*;

    fn z7_example() -> GSet {
        GSet::from_indices(&cyclic(7).unwrap(), [0, 1, 2]).unwrap()
    }

    fn brute_corr(a: &GSet, b: &GSet) -> Vec<u64> {
        let g = a.group();
        (0..g.size())
            .map(|x| a.iter().filter(|&y| b.contains(g.add_idx(y, x))).count() as u64)
            .collect()
    }

    fn brute_conv(a: &GSet, b: &GSet) -> Vec<u64> {
        let g = a.group();
        (0..g.size())
            .map(|x| a.iter().filter(|&y| b.contains(g.sub_idx(x, y))).count() as u64)
            .collect()
    }

    #[test]
    fn running_example_correlations() {
        let a = z7_example();
        assert_eq!(
            correlation_counts(&a, &a).unwrap(),
            vec![3, 2, 1, 0, 0, 1, 2]
        );
        assert_eq!(
            convolution_counts(&a, &a).unwrap(),
            vec![1, 2, 3, 2, 1, 0, 0]
        );
        let f = a.indicator();
        assert_eq!(
            correlate(&f, &f).unwrap().as_ints().unwrap(),
            &[3, 2, 1, 0, 0, 1, 2]
        );
        assert_eq!(
            convolve(&f, &f).unwrap().as_ints().unwrap(),
            &[1, 2, 3, 2, 1, 0, 0]
        );
    }

    #[test]
    fn subgroup_correlation_is_scaled_indicator() {
        let g = boolean_cube(4).unwrap();
        let h = GSet::from_indices(&g, 0..4).unwrap();
        let c = correlation_counts(&h, &h).unwrap();
        for (x, v) in c.iter().enumerate() {
            assert_eq!(*v, if x < 4 { 4 } else { 0 });
        }
    }

    #[test]
    fn sigma_values() {
        let a = z7_example();
        assert_eq!(sigma_k(&a, 2).unwrap(), BigInt::from(1));
        assert_eq!(sigma_k(&a, 3).unwrap(), BigInt::from(1));
        let h = GSet::from_indices(&boolean_cube(3).unwrap(), [0, 1, 2, 3]).unwrap();
        assert_eq!(sigma_k(&h, 2).unwrap(), BigInt::from(4));
        assert!(iterated_convolve(&a.indicator(), 0).is_err());
    }

    #[test]
    fn generalized_convolution_examples() {
        let a = z7_example();
        let f = a.indicator();
        let two = [f.clone(), f.clone()];
        assert_eq!(
            generalized_convolution(&two, &[Element(1)]).unwrap(),
            BigInt::from(2)
        );
        let three = [f.clone(), f.clone(), f.clone()];
        assert_eq!(
            generalized_convolution(&three, &[Element(1), Element(2)]).unwrap(),
            BigInt::from(1)
        );
        assert!(generalized_convolution(&three, &[Element(1)]).is_err());
        let g = boolean_cube(3).unwrap();
        let h = GSet::from_indices(&g, [0, 1, 2, 3]).unwrap().indicator();
        let hs = [h.clone(), h.clone(), h.clone()];
        assert_eq!(
            generalized_convolution(&hs, &[Element(1), Element(3)]).unwrap(),
            BigInt::from(4)
        );
    }

    #[test]
    fn slice_examples() {
        let a = z7_example();
        assert_eq!(
            slice(&a, &a, &ShiftTuple::new(&[1])).unwrap().to_vec(),
            vec![0, 1]
        );
        assert_eq!(
            slice(&a, &a, &ShiftTuple::new(&[1, 2])).unwrap().to_vec(),
            vec![0]
        );
        assert_eq!(slice(&a, &a, &ShiftTuple::empty()).unwrap(), a);
        let g = boolean_cube(3).unwrap();
        let h = GSet::from_indices(&g, [0, 1, 2, 3]).unwrap();
        assert_eq!(slice(&h, &h, &ShiftTuple::new(&[2])).unwrap(), h);
    }

    #[test]
    fn sumset_examples() {
        let a = z7_example();
        assert_eq!(sumset(&a, &a).unwrap().to_vec(), vec![0, 1, 2, 3, 4]);
        assert_eq!(
            difference_set(&a, &a).unwrap().to_vec(),
            vec![0, 1, 2, 5, 6]
        );
        let g = boolean_cube(3).unwrap();
        let h = GSet::from_indices(&g, [0, 1, 2, 3]).unwrap();
        assert_eq!(sumset(&h, &h).unwrap(), h);
    }

    #[test]
    fn delta_sumset_examples() {
        let a = z7_example();
        for sign in [Sign::Minus, Sign::Plus] {
            assert_eq!(delta_sumset_size_direct(&a, sign).unwrap(), 19);
            assert_eq!(delta_sumset_size(&a, 2, sign).unwrap(), BigInt::from(19));
        }
        let per_shift: Vec<usize> = difference_set(&a, &a)
            .unwrap()
            .iter()
            .map(|s| difference_set(&a, &self_slice(&a, s)).unwrap().len())
            .collect();
        assert_eq!(per_shift, vec![5, 4, 3, 3, 4]);
        let g = boolean_cube(4).unwrap();
        let h = GSet::from_indices(&g, 0..4).unwrap();
        assert_eq!(delta_sumset_size_direct(&h, Sign::Minus).unwrap(), 16);
        assert!(delta_sumset_size(&a, 1, Sign::Minus).is_err());
    }

    fn brute_delta(a: &GSet, n: usize, sign: Sign) -> usize {
        let g = a.group();
        let el = a.to_vec();
        let mut seen = HashSet::new();
        let mut idx = vec![0usize; n];
        loop {
            for &t in &el {
                let tuple: Vec<usize> = idx
                    .iter()
                    .map(|&i| match sign {
                        Sign::Plus => g.add_idx(el[i], t),
                        Sign::Minus => g.sub_idx(el[i], t),
                    })
                    .collect();
                seen.insert(tuple);
            }
            let mut j = 0;
            loop {
                if j == n {
                    return seen.len();
                }
                idx[j] += 1;
                if idx[j] < el.len() {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
        }
    }

    #[test]
    fn delta_identity_path_matches_brute_force_for_triples() {
        let g = cyclic(11).unwrap();
        let a = GSet::from_indices(&g, [0, 1, 3, 7]).unwrap();
        for sign in [Sign::Minus, Sign::Plus] {
            assert_eq!(
                delta_sumset_size(&a, 3, sign).unwrap(),
                BigInt::from(brute_delta(&a, 3, sign))
            );
        }
    }

    #[test]
    fn katz_koester_examples() {
        let a = z7_example();
        assert!(katz_koester_check(&a, &ShiftTuple::new(&[1])).unwrap());
        assert!(katz_koester_check(&a, &ShiftTuple::empty()).unwrap());
    }

    #[test]
    fn big_values_escalate() {
        let g = cyclic(3).unwrap();
        let f = DenseFunc::from_ints(&g, vec![i128::MAX / 2, 7, 0]).unwrap();
        let c = convolve(&f, &f).unwrap();
        assert!(matches!(c.values(), Values::Big(_)));
        let expect = BigInt::from(i128::MAX / 2) * BigInt::from(i128::MAX / 2);
        assert_eq!(c.exact_at(0).unwrap(), expect);
    }

    #[test]
    fn transform_path_for_large_groups_is_exact() {
        let g = cyclic(1 << 15).unwrap();
        let a = GSet::from_indices(&g, (0..g.size()).filter(|x| x % 3 == 0 || x % 7 == 1)).unwrap();
        let b = GSet::from_indices(&g, (0..200).map(|x| x * 5)).unwrap();
        let fast = correlation_counts(&a, &b).unwrap();
        let mut slow = vec![0u64; g.size()];
        for y in a.iter() {
            for z in b.iter() {
                slow[g.sub_idx(z, y)] += 1;
            }
        }
        assert_eq!(fast, slow);
    }

    fn arb_set(factors: Vec<usize>) -> impl Strategy<Value = GSet> {
        let g = crate::group::make_group(&factors).unwrap();
        let n = g.size();
        proptest::collection::vec(any::<bool>(), n)
            .prop_map(move |bits| GSet::from_indices(&g, (0..n).filter(|&i| bits[i])).unwrap())
    }

    fn arb_group_set() -> impl Strategy<Value = GSet> {
        prop_oneof![
            arb_set(vec![13]),
            arb_set(vec![2, 2, 2, 2]),
            arb_set(vec![3, 4]),
            arb_set(vec![2, 6]),
        ]
    }

    proptest! {
        #[test]
        fn counts_match_brute_force(a in arb_group_set(), seed in 0usize..1000) {
            let g = a.group().clone();
            let b = GSet::from_indices(&g, (0..g.size()).filter(|x| (x * 7 + seed) % 3 == 0)).unwrap();
            prop_assert_eq!(correlation_counts(&a, &b).unwrap(), brute_corr(&a, &b));
            prop_assert_eq!(convolution_counts(&a, &b).unwrap(), brute_conv(&a, &b));
        }

        #[test]
        fn reflection_and_commutativity(a in arb_group_set()) {
            let g = a.group().clone();
            let b = a.translate(1 % g.size()).union(&GSet::from_indices(&g, [0]).unwrap());
            let (fa, fb) = (a.indicator(), b.indicator());
            prop_assert_eq!(convolve(&fa, &fb).unwrap(), convolve(&fb, &fa).unwrap());
            let ab = correlate(&fa, &fb).unwrap();
            let ba = correlate(&fb, &fa).unwrap();
            prop_assert_eq!(ab, ba.reflect());
        }

        #[test]
        fn slice_size_is_correlation(a in arb_group_set()) {
            let c = correlation_counts(&a, &a).unwrap();
            for (s, &v) in c.iter().enumerate() {
                prop_assert_eq!(self_slice(&a, s).len() as u64, v);
            }
        }

        #[test]
        fn difference_membership_criterion(a in arb_group_set()) {
            // t in A - A_s  iff  A_t ∩ A_s nonempty
            let g = a.group().clone();
            for s in 0..g.size() {
                let a_s = self_slice(&a, s);
                let d = difference_set(&a, &a_s).unwrap();
                for t in 0..g.size() {
                    let meet = !self_slice(&a, t).is_disjoint(&a_s);
                    prop_assert_eq!(d.contains(t), meet);
                }
            }
        }

        #[test]
        fn delta_paths_agree(a in arb_group_set()) {
            for sign in [Sign::Minus, Sign::Plus] {
                let direct = delta_sumset_size_direct(&a, sign).unwrap();
                prop_assert_eq!(delta_sumset_size(&a, 2, sign).unwrap(), BigInt::from(direct));
            }
        }

        #[test]
        fn katz_koester_holds(a in arb_group_set(), s1 in 0usize..16, s2 in 0usize..16) {
            let n = a.group().size();
            prop_assert!(katz_koester_check(&a, &ShiftTuple::new(&[s1 % n])).unwrap());
            prop_assert!(katz_koester_check(&a, &ShiftTuple::new(&[s1 % n, s2 % n])).unwrap());
        }

        #[test]
        fn fourier_path_matches_exact(a in arb_group_set()) {
            let f = a.indicator();
            let g = a.translate(2 % a.group().size()).indicator();
            let exact = convolve(&f, &g).unwrap();
            let approx = convolve_fourier(&f, &g).unwrap();
            for (x, v) in approx.iter().enumerate() {
                prop_assert!((v - exact.real_at(x)).abs() < 1e-6);
            }
        }
    }
}
