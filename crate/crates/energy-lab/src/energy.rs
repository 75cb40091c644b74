//! Energies: `E_k`, `E_k(A,B)`, mixed energies, `T_k`, restricted and
//! starred energies, `σ_P`, weighted energies and the Wiener norm.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{to_f64, ExactSum};
use crate::group::Group;
use crate::setfun::{convolve, correlate, correlation_counts, same_group, DenseFunc, GSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyKind {
    E,
    T,
    Sigma,
    Restricted,
    Starred,
    Mixed,
    Weighted,
    Wiener,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Number {
    Exact(BigInt),
    Real(f64),
}

impl Number {
    pub fn as_f64(&self) -> f64 {
        match self {
            Number::Exact(b) => to_f64(b),
            Number::Real(r) => *r,
        }
    }

    pub fn exact(&self) -> Option<&BigInt> {
        match self {
            Number::Exact(b) => Some(b),
            Number::Real(_) => None,
        }
    }
}

impl fmt::Display for Number {
    /// Exact values print as integers; reals use the shortest round-trip form.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Exact(b) => write!(f, "{b}"),
            Number::Real(r) => write!(f, "{r:?}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyValue {
    pub value: Number,
    pub exponent: f64,
    pub kind: EnergyKind,
}

impl EnergyValue {
    fn exact(value: BigInt, exponent: f64, kind: EnergyKind) -> Self {
        EnergyValue {
            value: Number::Exact(value),
            exponent,
            kind,
        }
    }

    /// The exact value; panics for real-exponent results.
    pub fn expect_exact(&self) -> &BigInt {
        self.value.exact().expect("exact energy value")
    }

    pub fn as_f64(&self) -> f64 {
        self.value.as_f64()
    }
}

/// `Some(k)` when the exponent is a positive integer.
pub fn integer_exponent(k: f64) -> Option<u32> {
    if k >= 1.0 && k.fract() == 0.0 && k <= u32::MAX as f64 {
        Some(k as u32)
    } else {
        None
    }
}

fn check_exponent(k: f64) -> Result<()> {
    if k.is_finite() && k >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("exponent {k} must be >= 1")))
    }
}

/// `sum_x w(x) c(x)^k` over the counts `c`, in index order; exact for
/// integer `k`.
fn power_sum(counts: &[u64], weights: Option<&[u64]>, k: f64) -> Number {
    match integer_exponent(k) {
        Some(e) => {
            let mut acc = ExactSum::new();
            for (x, &c) in counts.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                match weights {
                    None => acc.add_pow(c as i128, e),
                    Some(w) if w[x] != 0 => acc.add_big(&(crate::exact::ipow(c as i128, e) * w[x])),
                    Some(_) => {}
                }
            }
            Number::Exact(acc.value())
        }
        None => {
            let mut acc = 0.0f64;
            for (x, &c) in counts.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let w = weights.map_or(1.0, |w| w[x] as f64);
                acc += w * (c as f64).powf(k);
            }
            Number::Real(acc)
        }
    }
}

/// `E_k(A) = sum_x (A o A)(x)^k`.
pub fn energy_k(a: &GSet, k: f64) -> Result<EnergyValue> {
    check_exponent(k)?;
    let c = correlation_counts(a, a)?;
    Ok(EnergyValue {
        value: power_sum(&c, None, k),
        exponent: k,
        kind: EnergyKind::E,
    })
}

/// `E_k(A)` for integer `k`.
pub fn energy_int(a: &GSet, k: u32) -> BigInt {
    energy_k(a, k as f64)
        .expect("k >= 1")
        .expect_exact()
        .clone()
}

/// Additive energy `E(A) = E_2(A)`.
pub fn energy(a: &GSet) -> BigInt {
    energy_int(a, 2)
}

/// `E_k(A,B) = sum_x (A o A)(x) (B o B)(x)^{k-1}`.
pub fn energy_pair_k(a: &GSet, b: &GSet, k: f64) -> Result<EnergyValue> {
    check_exponent(k)?;
    let ca = correlation_counts(a, a)?;
    let cb = correlation_counts(b, b)?;
    let value = match integer_exponent(k) {
        Some(e) => {
            let mut acc = ExactSum::new();
            for (&x, &y) in ca.iter().zip(&cb) {
                if x != 0 {
                    acc.add_big(&(crate::exact::ipow(y as i128, e - 1) * x));
                }
            }
            Number::Exact(acc.value())
        }
        None => Number::Real(
            ca.iter()
                .zip(&cb)
                .filter(|(&x, &y)| x != 0 && y != 0)
                .map(|(&x, &y)| x as f64 * (y as f64).powf(k - 1.0))
                .sum(),
        ),
    };
    Ok(EnergyValue {
        value,
        exponent: k,
        kind: EnergyKind::E,
    })
}

/// `E(A,B) = sum_x (A o A)(x)(B o B)(x)`.
pub fn energy_pair(a: &GSet, b: &GSet) -> BigInt {
    energy_pair_k(a, b, 2.0)
        .expect("same group")
        .expect_exact()
        .clone()
}

/// `sum_x prod_i (f_i o f_i)(x)`.
pub fn mixed_energy(fs: &[DenseFunc]) -> Result<EnergyValue> {
    if fs.len() < 2 {
        return Err(Error::InvalidArgument("need at least two functions".into()));
    }
    let g = fs[0].group().clone();
    for f in &fs[1..] {
        same_group(&g, f.group())?;
    }
    let corrs: Vec<DenseFunc> = fs.iter().map(|f| correlate(f, f)).collect::<Result<_>>()?;
    let k = fs.len() as f64;
    if corrs.iter().any(|c| c.is_real()) {
        let vals: Vec<Vec<f64>> = corrs.iter().map(|c| c.to_f64()).collect();
        let total = (0..g.size())
            .map(|x| vals.iter().map(|v| v[x]).product::<f64>())
            .sum();
        return Ok(EnergyValue {
            value: Number::Real(total),
            exponent: k,
            kind: EnergyKind::Mixed,
        });
    }
    let vals: Vec<Vec<BigInt>> = corrs.iter().map(|c| c.to_bigs().expect("exact")).collect();
    let mut acc = ExactSum::new();
    for x in 0..g.size() {
        let mut p = BigInt::from(1);
        for v in &vals {
            p *= &v[x];
        }
        acc.add_big(&p);
    }
    Ok(EnergyValue::exact(acc.value(), k, EnergyKind::Mixed))
}

/// Mixed energy of indicator functions.
pub fn mixed_energy_sets(sets: &[&GSet]) -> Result<BigInt> {
    let fs: Vec<DenseFunc> = sets.iter().map(|s| s.indicator()).collect();
    Ok(mixed_energy(&fs)?.expect_exact().clone())
}

/// `T_k(A_1, ..., A_k) = sum_x (A_1 * ... * A_k)(x)^2`.
pub fn t_energy(sets: &[GSet]) -> Result<EnergyValue> {
    if sets.len() < 2 {
        return Err(Error::InvalidArgument("T_k needs k >= 2 sets".into()));
    }
    let fs: Vec<DenseFunc> = sets.iter().map(|s| s.indicator()).collect();
    t_energy_functions(&fs)
}

/// `T_k(A) = T_k(A, ..., A)`.
pub fn t_energy_k(a: &GSet, k: usize) -> Result<BigInt> {
    let sets = vec![a.clone(); k];
    Ok(t_energy(&sets)?.expect_exact().clone())
}

/// `sum_x |(f_1 * ... * f_k)(x)|^2`; exact for integer functions.
pub fn t_energy_functions(fs: &[DenseFunc]) -> Result<EnergyValue> {
    if fs.len() < 2 {
        return Err(Error::InvalidArgument("T_k needs k >= 2 functions".into()));
    }
    let mut acc = fs[0].clone();
    for f in &fs[1..] {
        acc = convolve(&acc, f)?;
    }
    let k = fs.len() as f64;
    if acc.is_real() {
        let total = acc.to_f64().iter().map(|v| v * v).sum();
        return Ok(EnergyValue {
            value: Number::Real(total),
            exponent: k,
            kind: EnergyKind::T,
        });
    }
    let mut sum = ExactSum::new();
    for v in acc.to_bigs().expect("exact") {
        sum.add_big(&(&v * &v));
    }
    Ok(EnergyValue::exact(sum.value(), k, EnergyKind::T))
}

/// The transform-side value `N^{-1} sum_xi |A^(xi)|^{2k}`.
pub fn t_energy_fourier(a: &GSet, k: u32) -> f64 {
    let n = a.group().size() as f64;
    a.spectrum()
        .abs_sq()
        .iter()
        .map(|v| v.powi(k as i32))
        .sum::<f64>()
        / n
}

/// `E(A,B)` through `N^{-1} sum |A^|^2 |B^|^2`.
pub fn energy_pair_fourier(a: &GSet, b: &GSet) -> Result<f64> {
    same_group(a.group(), b.group())?;
    let n = a.group().size() as f64;
    let (sa, sb) = (a.spectrum().abs_sq(), b.spectrum().abs_sq());
    Ok(sa.iter().zip(&sb).map(|(x, y)| x * y).sum::<f64>() / n)
}

/// `E^P_k(A) = sum_{s in P} |A_s|^k`.
pub fn restricted_energy(a: &GSet, p: &GSet, k: f64) -> Result<EnergyValue> {
    check_exponent(k)?;
    same_group(a.group(), p.group())?;
    let c = correlation_counts(a, a)?;
    let masked: Vec<u64> = (0..c.len())
        .map(|x| if p.contains(x) { c[x] } else { 0 })
        .collect();
    Ok(EnergyValue {
        value: power_sum(&masked, None, k),
        exponent: k,
        kind: EnergyKind::Restricted,
    })
}

/// `E*_k(A) = sum_{s != 0} |A_s|^k`.
pub fn starred_energy(a: &GSet, k: f64) -> Result<EnergyValue> {
    check_exponent(k)?;
    let mut c = correlation_counts(a, a)?;
    c[0] = 0;
    Ok(EnergyValue {
        value: power_sum(&c, None, k),
        exponent: k,
        kind: EnergyKind::Starred,
    })
}

/// `σ_P(A) = sum_{x in P} (A o A)(x)`.
pub fn sigma_p(a: &GSet, p: &GSet) -> Result<BigInt> {
    same_group(a.group(), p.group())?;
    let c = correlation_counts(a, a)?;
    Ok(BigInt::from(p.iter().map(|x| c[x]).sum::<u64>()))
}

#[derive(Clone, Debug, PartialEq)]
pub enum KernelForm {
    /// `q(x,y) = w(x - y)`
    Difference(Vec<f64>),
    /// Row-major `N x N` matrix.
    Matrix(Vec<f64>),
}

/// A symmetric nonnegative weight `q` on `G x G`.
#[derive(Clone, Debug)]
pub struct WeightKernel {
    group: Group,
    form: KernelForm,
    psd: Option<bool>,
    sup: f64,
}

/// Largest group order for which a full matrix is tested for definiteness.
pub const PSD_CHECK_MAX_N: usize = 512;

impl WeightKernel {
    pub fn difference(group: &Group, w: Vec<f64>) -> Result<Self> {
        if w.len() != group.size() {
            return Err(Error::SizeMismatch {
                expected: group.size(),
                got: w.len(),
            });
        }
        for x in 0..w.len() {
            if !w[x].is_finite() || w[x] < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "kernel value {} at {x} is not a nonnegative number",
                    w[x]
                )));
            }
            if w[x] != w[group.neg_idx(x)] {
                return Err(Error::InvalidArgument(format!(
                    "asymmetric kernel: w({x}) != w(-{x})"
                )));
            }
        }
        // eigenvalues of a difference kernel are the values of its transform
        let spec = group.fourier_real(&w)?;
        let top = spec.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let low = spec.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
        let sup = w.iter().cloned().fold(0.0, f64::max);
        Ok(WeightKernel {
            group: group.clone(),
            psd: Some(low >= -1e-9 * top.max(1.0)),
            form: KernelForm::Difference(w),
            sup,
        })
    }

    pub fn matrix(group: &Group, m: Vec<f64>) -> Result<Self> {
        let n = group.size();
        if m.len() != n * n {
            return Err(Error::SizeMismatch {
                expected: n * n,
                got: m.len(),
            });
        }
        for x in 0..n {
            for y in 0..n {
                let v = m[x * n + y];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "kernel value {v} at ({x},{y}) is not a nonnegative number"
                    )));
                }
                if v != m[y * n + x] {
                    return Err(Error::InvalidArgument(format!(
                        "asymmetric kernel at ({x},{y})"
                    )));
                }
            }
        }
        let psd = if n <= PSD_CHECK_MAX_N {
            let eig = SymmetricEigen::new(DMatrix::from_row_slice(n, n, &m));
            let top = eig.eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let low = eig
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            Some(low >= -1e-9 * top.max(1.0))
        } else {
            None
        };
        let sup = m.iter().cloned().fold(0.0, f64::max);
        Ok(WeightKernel {
            group: group.clone(),
            form: KernelForm::Matrix(m),
            psd,
            sup,
        })
    }

    /// `q(x,y) = (A o A)(x-y)^k`.
    pub fn correlation_power(a: &GSet, k: u32) -> Self {
        let c = correlation_counts(a, a).expect("same group");
        let w = c.iter().map(|&v| (v as f64).powi(k as i32)).collect();
        Self::difference(a.group(), w).expect("correlations are symmetric")
    }

    /// `q ≡ 1`.
    pub fn ones(group: &Group) -> Self {
        Self::difference(group, vec![1.0; group.size()]).expect("constant kernel")
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    pub fn form(&self) -> &KernelForm {
        &self.form
    }

    /// `None` when the group is too large to test.
    pub fn is_psd(&self) -> Option<bool> {
        self.psd
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        match &self.form {
            KernelForm::Difference(w) => w[self.group.sub_idx(x, y)],
            KernelForm::Matrix(m) => m[x * self.group.size() + y],
        }
    }

    /// `r(x) = sum_{y in B} q(x,y)` for every `x`.
    pub fn row_sums(&self, b: &GSet) -> Vec<f64> {
        let el = b.to_vec();
        (0..self.group.size())
            .map(|x| el.iter().map(|&y| self.at(x, y)).sum())
            .collect()
    }
}

/// `E_q(A,B) = sum_{x,y} q(x,y) A(x) B(y)`.
pub fn weighted_energy(a: &GSet, b: &GSet, q: &WeightKernel) -> Result<EnergyValue> {
    same_group(a.group(), b.group())?;
    same_group(a.group(), q.group())?;
    Ok(EnergyValue {
        value: Number::Real(weighted_energy_f64(a, b, q)),
        exponent: 1.0,
        kind: EnergyKind::Weighted,
    })
}

pub(crate) fn weighted_energy_f64(a: &GSet, b: &GSet, q: &WeightKernel) -> f64 {
    let eb = b.to_vec();
    a.iter()
        .map(|x| eb.iter().map(|&y| q.at(x, y)).sum::<f64>())
        .sum()
}

/// `E_q(A,B)^2 <= E_q(A) E_q(B)`; `None` if `q` is not known to be
/// nonnegatively defined.
pub fn weight_property_holds(a: &GSet, b: &GSet, q: &WeightKernel) -> Result<Option<bool>> {
    if q.is_psd() != Some(true) {
        return Ok(None);
    }
    let ab = weighted_energy(a, b, q)?.as_f64();
    let aa = weighted_energy(a, a, q)?.as_f64();
    let bb = weighted_energy(b, b, q)?.as_f64();
    Ok(Some(ab * ab <= aa * bb * (1.0 + 1e-12)))
}

/// `‖A‖_W = N^{-1} sum_xi |A^(xi)|`.
pub fn wiener_norm(a: &GSet) -> f64 {
    let n = a.group().size() as f64;
    a.spectrum().values().iter().map(|v| v.norm()).sum::<f64>() / n
}
