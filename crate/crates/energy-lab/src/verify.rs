//! Verification harness: exact identities, inequalities checked in cleared
//! integer form, and report-only ratios for bounds with unspecified constants.

#![allow(clippy::needless_range_loop)]

use std::io::Write;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::ser::{Serialize, Serializer};
use serde::Serialize as DeriveSerialize;

use crate::constructors::InstanceSpec;
use crate::energy::{energy_pair, energy_pair_fourier, t_energy_fourier, t_energy_k};
use crate::error::{Error, Result};
use crate::exact::{big_pow, ipow, ExactSum};
use crate::gowers::{gowers_pair_u3, gowers_profile, monotone_from_profile};
use crate::group::make_group;
use crate::setfun::{
    convolution_counts, convolve, convolve_fourier, correlation_counts, delta_sumset_size,
    delta_sumset_size_direct, difference_set, iterated_sumset, katz_koester_check, same_group,
    self_slice, signed_sumset, sumset, GSet, ShiftTuple, Sign,
};
use crate::structure::{
    connectedness_gamma, energy_with_function, greedy_disjoint_in_target, greedy_disjoint_slices,
    greedy_disjoint_translates, min_slice_energy_ratio, random_disjoint_family, regular_part,
    small_doubling_subset_oracle, MAX_ORACLE_N,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, DeriveSerialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Identity,
    Inequality,
    Algorithm,
    Ratio,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    ReportOnly,
    Skipped,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "true",
            Verdict::Fail => "false",
            Verdict::ReportOnly => "report-only",
            Verdict::Skipped => "skipped",
        }
    }
}

impl Serialize for Verdict {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Verdict::Pass => s.serialize_bool(true),
            Verdict::Fail => s.serialize_bool(false),
            other => s.serialize_str(other.as_str()),
        }
    }
}

#[derive(Clone, Debug, DeriveSerialize)]
pub struct CheckResult {
    pub instance: String,
    pub name: String,
    /// The statement being checked, in the cleared form actually compared.
    pub anchor: String,
    pub kind: CheckKind,
    pub lhs: String,
    pub rhs: String,
    pub pass: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl CheckResult {
    pub fn failed(&self) -> bool {
        self.pass == Verdict::Fail
    }
}

/// Tunables shared by all suites.
#[derive(Clone, Debug)]
pub struct SuiteOptions {
    /// Seed for the random test functions.
    pub seed: u64,
    pub random_functions: usize,
    /// Largest `|A|` for which connectedness constants are measured exhaustively.
    pub connected_cap: usize,
    /// Work budget, in slice-pair visits, for the next Gowers norm.
    pub gowers_budget: f64,
    /// Work budget, in element visits, for `|A^n ± Δ(A)|` with `n >= 3`.
    pub delta_budget: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            seed: 0x5eed,
            random_functions: 50,
            connected_cap: 20,
            gowers_budget: 4e8,
            delta_budget: 4e8,
        }
    }
}

fn big(v: impl Into<BigInt>) -> BigInt {
    v.into()
}

fn big_ratio(l: &BigInt, r: &BigInt) -> Option<f64> {
    if r.is_zero() {
        return None;
    }
    BigRational::new(l.clone(), r.clone()).to_f64()
}

fn fmt_f64(v: f64) -> String {
    if v.is_finite() && v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn fmt_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        fmt_f64(r.to_f64().unwrap_or(f64::NAN))
    }
}

/// Relative tolerance for statements that involve real exponents.
pub const REAL_TOLERANCE: f64 = 1e-9;

/// Collects entries for one instance.
struct Sheet {
    instance: String,
    out: Vec<CheckResult>,
}

impl Sheet {
    fn new(instance: &str) -> Self {
        Sheet {
            instance: instance.to_string(),
            out: Vec::new(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        name: impl Into<String>,
        anchor: impl Into<String>,
        kind: CheckKind,
        lhs: String,
        rhs: String,
        pass: Verdict,
        ratio: Option<f64>,
        reason: Option<String>,
    ) {
        self.out.push(CheckResult {
            instance: self.instance.clone(),
            name: name.into(),
            anchor: anchor.into(),
            kind,
            lhs,
            rhs,
            pass,
            ratio,
            reason,
        });
    }

    fn identity(&mut self, name: &str, anchor: &str, lhs: BigInt, rhs: BigInt) {
        let pass = if lhs == rhs {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        let r = big_ratio(&lhs, &rhs);
        self.push(
            name,
            anchor,
            CheckKind::Identity,
            lhs.to_string(),
            rhs.to_string(),
            pass,
            r,
            None,
        );
    }

    /// `lhs <= rhs` exactly.
    fn le(&mut self, name: &str, anchor: &str, lhs: BigInt, rhs: BigInt) {
        let pass = if lhs <= rhs {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        let r = big_ratio(&lhs, &rhs);
        self.push(
            name,
            anchor,
            CheckKind::Inequality,
            lhs.to_string(),
            rhs.to_string(),
            pass,
            r,
            None,
        );
    }

    fn le_rational(&mut self, name: &str, anchor: &str, lhs: BigRational, rhs: BigRational) {
        let pass = if lhs <= rhs {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        let r = (lhs.clone() / rhs.clone()).to_f64();
        self.push(
            name,
            anchor,
            CheckKind::Inequality,
            fmt_rational(&lhs),
            fmt_rational(&rhs),
            pass,
            r,
            None,
        );
    }

    /// `lhs <= rhs (1 + REAL_TOLERANCE)` for floating evaluations.
    fn le_real(&mut self, name: &str, anchor: &str, lhs: f64, rhs: f64) {
        let pass = if lhs <= rhs * (1.0 + REAL_TOLERANCE) + f64::MIN_POSITIVE {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        self.push(
            name,
            anchor,
            CheckKind::Inequality,
            fmt_f64(lhs),
            fmt_f64(rhs),
            pass,
            Some(lhs / rhs),
            None,
        );
    }

    fn check(
        &mut self,
        name: &str,
        anchor: &str,
        kind: CheckKind,
        ok: bool,
        lhs: String,
        rhs: String,
    ) {
        let pass = if ok { Verdict::Pass } else { Verdict::Fail };
        self.push(name, anchor, kind, lhs, rhs, pass, None, None);
    }

    fn report(&mut self, name: &str, anchor: &str, lhs: f64, rhs: f64) {
        self.push(
            name,
            anchor,
            CheckKind::Ratio,
            fmt_f64(lhs),
            fmt_f64(rhs),
            Verdict::ReportOnly,
            Some(lhs / rhs),
            None,
        );
    }

    fn report_big(&mut self, name: &str, anchor: &str, lhs: &BigInt, rhs: &BigInt) {
        self.push(
            name,
            anchor,
            CheckKind::Ratio,
            lhs.to_string(),
            rhs.to_string(),
            Verdict::ReportOnly,
            big_ratio(lhs, rhs),
            None,
        );
    }

    fn skip(&mut self, name: &str, anchor: &str, kind: CheckKind, reason: impl Into<String>) {
        self.push(
            name,
            anchor,
            kind,
            String::new(),
            String::new(),
            Verdict::Skipped,
            None,
            Some(reason.into()),
        );
    }

    fn finish(mut self) -> Vec<CheckResult> {
        self.out.sort_by(|x, y| x.name.cmp(&y.name));
        self.out
    }
}

/// Quantities shared by the suites for one instance.
pub struct Ctx {
    pub name: String,
    pub a: GSet,
    pub b: GSet,
    /// `(A o A)(x)`.
    pub aa: Vec<u64>,
    pub d: GSet,
    pub s: GSet,
    pub e: BigInt,
    pub e3: BigInt,
    pub e4: BigInt,
    /// `‖A‖_{U^1}, ‖A‖_{U^2}, ...` as far as the work budget allows.
    pub gowers: Vec<BigInt>,
    pub gowers_limit_reason: Option<String>,
    pub popular: GSet,
    opts: SuiteOptions,
    gamma2: OnceLock<Option<f64>>,
    gamma3: OnceLock<Option<f64>>,
    gamma32: OnceLock<Option<f64>>,
}

fn power_sum(counts: &[u64], k: u32) -> BigInt {
    let mut acc = ExactSum::new();
    for &c in counts {
        if c != 0 {
            acc.add_pow(c as i128, k);
        }
    }
    acc.value()
}

/// `{x : (A o A)(x) >= m}` with `m` the lower median of the nonzero values.
pub fn popular_half(a: &GSet) -> Result<GSet> {
    let aa = correlation_counts(a, a)?;
    Ok(popular_from_counts(a, &aa))
}

fn popular_from_counts(a: &GSet, aa: &[u64]) -> GSet {
    let mut vals: Vec<u64> = aa.iter().copied().filter(|&v| v > 0).collect();
    vals.sort_unstable();
    let median = vals
        .get(vals.len().saturating_sub(1) / 2)
        .copied()
        .unwrap_or(1);
    GSet::from_indices(a.group(), (0..aa.len()).filter(|&x| aa[x] >= median.max(1)))
        .expect("indices in range")
}

impl Ctx {
    pub fn new(name: &str, a: &GSet, b: Option<&GSet>, opts: &SuiteOptions) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::InvalidArgument(
                "the suites need a nonempty set".into(),
            ));
        }
        let b = b.cloned().unwrap_or_else(|| a.clone());
        same_group(a.group(), b.group())?;
        if b.is_empty() {
            return Err(Error::InvalidArgument(
                "the second set must be nonempty".into(),
            ));
        }
        let aa = correlation_counts(a, a)?;
        let (e, e3, e4) = (power_sum(&aa, 2), power_sum(&aa, 3), power_sum(&aa, 4));
        let mut gowers = gowers_profile(a, 4)?;
        let mut gowers_limit_reason = None;
        let next_cost = gowers[3].to_f64().unwrap_or(f64::INFINITY);
        if next_cost <= opts.gowers_budget {
            gowers = gowers_profile(a, 5)?;
        } else {
            gowers_limit_reason = Some(format!(
                "‖A‖_{{U^5}} needs about {next_cost:.3e} slice visits, above the budget {:.1e}",
                opts.gowers_budget
            ));
        }
        Ok(Ctx {
            name: name.to_string(),
            d: difference_set(a, a)?,
            s: sumset(a, a)?,
            popular: popular_from_counts(a, &aa),
            a: a.clone(),
            b,
            aa,
            e,
            e3,
            e4,
            gowers,
            gowers_limit_reason,
            opts: opts.clone(),
            gamma2: OnceLock::new(),
            gamma3: OnceLock::new(),
            gamma32: OnceLock::new(),
        })
    }

    fn n(&self) -> usize {
        self.a.len()
    }

    fn gamma(&self, alpha: f64) -> Option<f64> {
        let cell = if alpha == 2.0 {
            &self.gamma2
        } else if alpha == 3.0 {
            &self.gamma3
        } else {
            &self.gamma32
        };
        *cell.get_or_init(|| {
            if self.n() > self.opts.connected_cap {
                None
            } else {
                connectedness_gamma(&self.a, alpha, 0.5)
                    .ok()
                    .map(|c| c.gamma)
            }
        })
    }

    fn gamma_skip(&self) -> String {
        format!(
            "connectedness constant needs exhaustive search; |A| = {} exceeds {}",
            self.n(),
            self.opts.connected_cap
        )
    }

    fn sign_set(&self, sign: Sign) -> &GSet {
        match sign {
            Sign::Plus => &self.s,
            Sign::Minus => &self.d,
        }
    }
}

fn sign_tag(sign: Sign) -> &'static str {
    match sign {
        Sign::Plus => "plus",
        Sign::Minus => "minus",
    }
}

/// Exact-equality checks; any mismatch is a bug.
pub fn run_identity_suite(a: &GSet, b: Option<&GSet>) -> Result<Vec<CheckResult>> {
    let ctx = Ctx::new("input", a, b, &SuiteOptions::default())?;
    identity_entries(&ctx)
}

pub fn identity_entries(ctx: &Ctx) -> Result<Vec<CheckResult>> {
    let mut sh = Sheet::new(&ctx.name);
    let a = &ctx.a;
    let g = a.group().clone();
    let nn = g.size();

    // slice correlations c_s = A_s o A_s
    let mut slice_energy_sum = ExactSum::new();
    let mut summed = vec![0u64; nn];
    for s in ctx.d.iter() {
        let c = correlation_counts(&self_slice(a, s), &self_slice(a, s))?;
        for x in 0..nn {
            if c[x] != 0 {
                slice_energy_sum.add_product(ctx.aa[x] as i128, c[x] as i128);
                summed[x] += c[x];
            }
        }
    }
    sh.identity(
        "e3_slice_energy_sum",
        "E_3(A) = sum_s E(A, A_s)",
        ctx.e3.clone(),
        slice_energy_sum.value(),
    );
    let mut pair_sum = ExactSum::new();
    for &v in &summed {
        pair_sum.add_pow(v as i128, 2);
    }
    sh.identity(
        "e4_slice_pair_energy_sum",
        "E_4(A) = sum_{s,t} E(A_s, A_t)",
        ctx.e4.clone(),
        pair_sum.value(),
    );

    for sign in [Sign::Minus, Sign::Plus] {
        let direct = delta_sumset_size_direct(a, sign)?;
        let via = delta_sumset_size(a, 2, sign)?;
        sh.identity(
            &format!("delta_sumset_two_paths_{}", sign_tag(sign)),
            &format!("|A^2 {sign} Δ(A)| listed = sum_{{s in A-A}} |A {sign} A_s|"),
            big(direct),
            via,
        );
    }

    sh.identity(
        "gowers_u1_size_squared",
        "‖A‖_{U^1} = |A|^2",
        ctx.gowers[0].clone(),
        big(ctx.n() * ctx.n()),
    );
    sh.identity(
        "gowers_u2_energy",
        "‖A‖_{U^2} = E(A)",
        ctx.gowers[1].clone(),
        ctx.e.clone(),
    );

    // E_3(A,B) as a sum over shift pairs of squared tuple-slice sizes
    let bset = &ctx.b;
    let e3ab = {
        let bb = correlation_counts(bset, bset)?;
        let mut acc = ExactSum::new();
        for x in 0..nn {
            if ctx.aa[x] != 0 && bb[x] != 0 {
                acc.add_product(ctx.aa[x] as i128, (bb[x] as i128) * (bb[x] as i128));
            }
        }
        acc.value()
    };
    let mut tuple = ExactSum::new();
    let ab = correlation_counts(a, bset)?;
    for x1 in 0..nn {
        if ab[x1] == 0 {
            continue;
        }
        let c = a.intersection(&bset.translate(g.neg_idx(x1)));
        for v in correlation_counts(&c, bset)? {
            if v != 0 {
                tuple.add_pow(v as i128, 2);
            }
        }
    }
    sh.identity(
        "e3_pair_tuple_slices",
        "E_3(A,B) = sum_{x1,x2} |{y in A : y+x1, y+x2 in B}|^2",
        e3ab,
        tuple.value(),
    );

    // transform-side quantities, compared after rounding
    fourier_entries(ctx, &mut sh)?;
    Ok(sh.finish())
}

/// Largest absolute residual allowed before rounding a transform-side value.
pub const ROUNDING_RESIDUAL: f64 = 1e-6;

fn rounded_identity(sh: &mut Sheet, name: &str, anchor: &str, approx: f64, exact: &BigInt) {
    let scale = exact.to_f64().unwrap_or(f64::INFINITY).abs().max(1.0);
    let residual = (approx - exact.to_f64().unwrap_or(f64::NAN)).abs() / scale;
    let rounded = BigInt::from(approx.round() as i128);
    let ok = &rounded == exact && residual < ROUNDING_RESIDUAL;
    sh.push(
        name,
        anchor,
        CheckKind::Identity,
        rounded.to_string(),
        exact.to_string(),
        if ok { Verdict::Pass } else { Verdict::Fail },
        Some(residual),
        None,
    );
}

fn fourier_entries(ctx: &Ctx, sh: &mut Sheet) -> Result<()> {
    let a = &ctx.a;
    let g = a.group().clone();
    let nn = g.size();

    let e_ab = energy_pair(a, &ctx.b);
    rounded_identity(
        sh,
        "energy_pair_transform_vs_direct",
        "N^-1 sum |A^|^2 |B^|^2 = E(A,B) (relative residual in ratio)",
        energy_pair_fourier(a, &ctx.b)?,
        &e_ab,
    );
    let t2 = t_energy_k(a, 2)?;
    rounded_identity(
        sh,
        "t2_transform_vs_direct",
        "N^-1 sum |A^|^4 = T_2(A) (relative residual in ratio)",
        t_energy_fourier(a, 2),
        &t2,
    );

    let f = a.indicator();
    let h = ctx.b.indicator();
    let exact = convolve(&f, &h)?;
    let approx = convolve_fourier(&f, &h)?;
    let mut worst = 0.0f64;
    let mut agree = true;
    for x in 0..nn {
        let e = exact
            .exact_at(x)
            .expect("integer valued")
            .to_f64()
            .unwrap_or(f64::NAN);
        worst = worst.max((approx[x] - e).abs());
        agree &= approx[x].round() == e;
    }
    sh.push(
        "convolution_transform_vs_direct",
        "(A*B)(x) by transform = (A*B)(x) direct, every x (max residual in ratio)",
        CheckKind::Identity,
        fmt_f64(worst),
        fmt_f64(ROUNDING_RESIDUAL),
        if agree && worst < ROUNDING_RESIDUAL {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
        Some(worst),
        None,
    );

    // T_2(|A^|^2) = N^3 E_4(A)
    let spec = a.spectrum();
    let p: Vec<f64> = spec.abs_sq();
    let pc: Vec<Complex64> = p.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let ph = g.fourier(&pc)?;
    let t2p = ph.iter().map(|v| v.norm_sqr().powi(2)).sum::<f64>() / nn as f64;
    rounded_identity(
        sh,
        "dual_t2_of_spectrum",
        "T_2(|A^|^2) = N^3 E_4(A) (relative residual in ratio)",
        t2p,
        &(ipow(nn as i128, 3) * &ctx.e4),
    );

    // A^(x) = N^-1 sum_y conj(A^(y)) A^(y+x)
    let av = spec.values();
    let mut worst = 0.0f64;
    let scale = a.len().max(1) as f64;
    for x in 0..nn {
        let mut acc = Complex64::new(0.0, 0.0);
        for y in 0..nn {
            acc += av[y].conj() * av[g.add_idx(y, x)];
        }
        worst = worst.max((acc / nn as f64 - av[x]).norm() / scale);
    }
    sh.push(
        "indicator_spectrum_self_correlation",
        "A^(x) = N^-1 (conj(A^) o A^)(x), every x (max residual / |A| in ratio)",
        CheckKind::Identity,
        fmt_f64(worst),
        fmt_f64(ROUNDING_RESIDUAL),
        if worst < ROUNDING_RESIDUAL {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
        Some(worst),
        None,
    );
    Ok(())
}

/// Inequalities that are theorems; applicable entries must all pass.
pub fn run_inequality_suite(a: &GSet, b: Option<&GSet>) -> Result<Vec<CheckResult>> {
    let ctx = Ctx::new("input", a, b, &SuiteOptions::default())?;
    inequality_entries(&ctx)
}

pub fn inequality_entries(ctx: &Ctx) -> Result<Vec<CheckResult>> {
    let mut sh = Sheet::new(&ctx.name);
    let a = &ctx.a;
    let n = ctx.n();
    let nb = big(n);
    let g = a.group().clone();
    let nn = g.size();

    // per-shift slice data
    let shifts: Vec<usize> = ctx.d.iter().collect();
    let slices: Vec<GSet> = shifts.iter().map(|&s| self_slice(a, s)).collect();
    let mut sizes_pm = [Vec::new(), Vec::new()];
    for (i, sign) in [Sign::Minus, Sign::Plus].into_iter().enumerate() {
        for sl in &slices {
            sizes_pm[i].push(signed_sumset(a, sl, sign)?.len());
        }
    }

    for (label, p) in [("D", &ctx.d), ("popular", &ctx.popular)] {
        let sigma: u64 = p.iter().map(|x| ctx.aa[x]).sum();
        let sig = big(sigma);
        for (i, sign) in [Sign::Minus, Sign::Plus].into_iter().enumerate() {
            let total: usize = shifts
                .iter()
                .zip(&sizes_pm[i])
                .filter(|(s, _)| p.contains(**s))
                .map(|(_, &v)| v)
                .sum();
            sh.le(
                &format!("corpop_slice_sumsets_{}[P={label}]", sign_tag(sign)),
                &format!("σ_P(A)^2 |A|^2 <= E_3(A) sum_{{s in P}} |A {sign} A_s|"),
                &sig * &sig * &nb * &nb,
                &ctx.e3 * big(total),
            );
        }
        let pp = correlation_counts(p, p)?;
        let mut e3p = ExactSum::new();
        for x in 0..nn {
            if pp[x] != 0 && ctx.aa[x] != 0 {
                e3p.add_product(pp[x] as i128, (ctx.aa[x] as i128) * (ctx.aa[x] as i128));
            }
        }
        sh.le(
            &format!("corpop_e3_product[P={label}]"),
            "E(A)^2 σ_P(A)^4 <= E_3(P,A,A) E_3(A) |A|^6",
            &ctx.e * &ctx.e * big_pow(&sig, 4),
            e3p.value() * &ctx.e3 * ipow(n as i128, 6),
        );
    }

    for (i, sign) in [Sign::Minus, Sign::Plus].into_iter().enumerate() {
        let mut lhs = BigRational::zero();
        for (k, &s) in shifts.iter().enumerate() {
            let c = ctx.aa[s];
            lhs += BigRational::new(big(c * c), big(sizes_pm[i][k]));
        }
        sh.le_rational(
            &format!("e3_weighted_slice_sum_{}", sign_tag(sign)),
            &format!("sum_s |A_s|^2 / |A {sign} A_s| <= E_3(A)/|A|^2"),
            lhs,
            BigRational::new(ctx.e3.clone(), &nb * &nb),
        );
        let total: usize = sizes_pm[i].iter().sum();
        let floor = match sign {
            Sign::Minus => ctx.d.len(),
            Sign::Plus => ctx.d.len().max(ctx.s.len()),
        };
        sh.le(
            &format!("delta_sumset_lower_{}", sign_tag(sign)),
            &format!(
                "|A| {} <= |A^2 {sign} Δ(A)|",
                if sign == Sign::Minus {
                    "|A-A|"
                } else {
                    "max(|A+A|, |A-A|)"
                }
            ),
            big(n * floor),
            big(total),
        );
    }

    let k_num = ctx.s.len();
    for (p, q) in [(2usize, 0usize), (1, 1), (2, 1)] {
        let size = iterated_sumset(a, p, q)?.len();
        let e = (p + q) as u32;
        sh.le(
            &format!("plunnecke_{p}_{q}"),
            &format!("|{p}A-{q}A| |A|^{e} <= |A+A|^{e} |A|"),
            big(size) * ipow(n as i128, e),
            ipow(k_num as i128, e) * &nb,
        );
    }

    connected_entries(ctx, &mut sh)?;

    // ψ = A o A, S = A + B
    {
        let bset = &ctx.b;
        let s_ab = sumset(a, bset)?;
        let ss = correlation_counts(&s_ab, &s_ab)?;
        let bb = correlation_counts(bset, bset)?;
        let mut lin = ExactSum::new();
        let mut quad = ExactSum::new();
        let mut e3ba = ExactSum::new();
        for x in 0..nn {
            let psi = ctx.aa[x] as i128;
            if psi == 0 {
                continue;
            }
            lin.add_product(psi, psi);
            quad.add_product(psi * psi, ss[x] as i128);
            e3ba.add_product(bb[x] as i128, psi * psi);
        }
        let nb2 = big(bset.len() * bset.len());
        sh.le(
            "t_ab_weighted_correlation",
            "|B|^2 (sum ψ (A o A))^2 <= E_3(B,A) sum ψ^2 (S o S), ψ = A o A, S = A+B",
            nb2 * big_pow(&lin.value(), 2),
            e3ba.value() * quad.value(),
        );
    }

    ek_simple_entries(ctx, &mut sh)?;

    // |A|^{4k} <= E_{2k}(A) T_k(A ± A), k = 2
    for sign in [Sign::Minus, Sign::Plus] {
        let t2 = crate::energy::energy(ctx.sign_set(sign));
        sh.le(
            &format!("lev_sumset_t2_{}", sign_tag(sign)),
            &format!("|A|^8 <= E_4(A) T_2(A {sign} A)"),
            ipow(n as i128, 8),
            &ctx.e4 * t2,
        );
    }
    for (label, p) in [("D", &ctx.d), ("popular", &ctx.popular)] {
        let sigma: u64 = p.iter().map(|x| ctx.aa[x]).sum();
        sh.le(
            &format!("lev_popular_t2[P={label}]"),
            "(sum_{x in P} (A o A)(x))^8 <= |A|^8 E_4(A) T_2(P)",
            big_pow(&big(sigma), 8),
            ipow(n as i128, 8) * &ctx.e4 * crate::energy::energy(p),
        );
    }
    {
        let bset = &ctx.b;
        let ab = correlation_counts(a, bset)?;
        let bb = correlation_counts(bset, bset)?;
        let p = GSet::from_indices(&g, (0..nn).filter(|&x| ab[x] > 0))?;
        let sigma: u64 = ab.iter().sum();
        let mut e4aabb = ExactSum::new();
        for x in 0..nn {
            if ctx.aa[x] != 0 && bb[x] != 0 {
                let (u, v) = (ctx.aa[x] as i128, bb[x] as i128);
                e4aabb.add_product(u * u, v * v);
            }
        }
        sh.le(
            "lev_two_sets_t2",
            "(sum_{x in P} (A o B)(x))^8 <= |A|^4 |B|^4 E_4(A,A,B,B) T_2(P), P = supp(A o B)",
            big_pow(&big(sigma), 8),
            ipow(n as i128, 4)
                * ipow(bset.len() as i128, 4)
                * e4aabb.value()
                * crate::energy::energy(&p),
        );
    }

    gowers_entries(ctx, &mut sh)?;
    eigen_entries(ctx, &mut sh)?;

    // Katz–Koester inclusions for every single shift and a few shift pairs
    let mut ok = true;
    let mut checked = 0usize;
    for &s in &shifts {
        ok &= katz_koester_check(a, &ShiftTuple::new(&[s]))?;
        checked += 1;
    }
    for (i, &s) in shifts.iter().enumerate().take(8) {
        for &t in shifts.iter().skip(i).take(8) {
            ok &= katz_koester_check(a, &ShiftTuple::new(&[s, t]))?;
            checked += 1;
        }
    }
    sh.check(
        "katz_koester_inclusions",
        "A - A_x ⊆ (A-A)_{-x} and A + A_x ⊆ (A+A)_x",
        CheckKind::Inequality,
        ok,
        checked.to_string(),
        "tuples".into(),
    );
    Ok(sh.finish())
}

fn connected_entries(ctx: &Ctx, sh: &mut Sheet) -> Result<()> {
    let anchor = "E_s(A) >= 2^-5 γ |A|^{1-s/2} E(A)^{s/2} for (2,1/2,γ)-connected A";
    let Some(gamma) = ctx.gamma(2.0) else {
        sh.skip(
            "connected_energy_lower",
            anchor,
            CheckKind::Inequality,
            ctx.gamma_skip(),
        );
        return Ok(());
    };
    let n = ctx.n() as f64;
    let e = ctx.e.to_f64().unwrap_or(f64::INFINITY);
    for s in [1.0, 1.25, 1.5, 1.75, 2.0] {
        let es: f64 = ctx
            .aa
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| (c as f64).powf(s))
            .sum();
        let rhs = gamma / 32.0 * n.powf(1.0 - s / 2.0) * e.powf(s / 2.0);
        sh.le_real(
            &format!("connected_energy_lower[s={s:.2}]"),
            anchor,
            rhs,
            es,
        );
    }
    Ok(())
}

/// `n^{k+1}`-sized tuple counts, skipped above the budget.
fn delta_affordable(ctx: &Ctx, k: u32) -> bool {
    k < 2
        || (ctx.n() as f64).powi(k as i32 + 1) * (ctx.a.group().size() as f64 / 64.0).max(1.0)
            <= ctx.opts.delta_budget
}

fn ek_simple_entries(ctx: &Ctx, sh: &mut Sheet) -> Result<()> {
    let a = &ctx.a;
    let n = ctx.n();
    let dd = correlation_counts(&ctx.d, &ctx.d)?;
    let ss = correlation_counts(&ctx.s, &ctx.s)?;
    let sd = convolution_counts(&ctx.s, &ctx.d)?;
    let maxds = ctx.d.len().max(ctx.s.len());
    let delta2_plus = delta_sumset_size(a, 2, Sign::Plus)?;
    for k in 1u32..=3 {
        let edd = {
            let mut acc = ExactSum::new();
            for x in ctx.d.iter() {
                acc.add_pow(dd[x] as i128, k);
            }
            acc.value()
        };
        let ssd = {
            let mut acc = ExactSum::new();
            for x in ctx.s.iter() {
                acc.add_pow(sd[x] as i128, k);
            }
            acc.value()
        };
        let eds = {
            let mut acc = ExactSum::new();
            for x in ctx.d.iter() {
                acc.add_pow(ss[x] as i128, k);
            }
            acc.value()
        };
        let nk = ipow(n as i128, k);
        if delta_affordable(ctx, k) {
            let dm = delta_sumset_size(a, k as usize + 1, Sign::Minus)?;
            let dp = delta_sumset_size(a, k as usize + 1, Sign::Plus)?;
            sh.le(
                &format!("ek_difference_set_k{k}_upper"),
                &format!("|A^{} - Δ(A)| <= sum_{{x in D}} (D o D)^{k}(x)", k + 1),
                dm.clone(),
                edd.clone(),
            );
            sh.le(
                &format!("ek_difference_set_k{k}_lower"),
                &format!("|A-A| |A|^{k} <= |A^{} - Δ(A)|", k + 1),
                big(ctx.d.len()) * &nk,
                dm,
            );
            sh.le(
                &format!("ek_sumset_convolution_k{k}_upper"),
                &format!("|A^{} + Δ(A)| <= sum_x S(x) (S*D)^{k}(x)", k + 1),
                dp.clone(),
                ssd,
            );
            sh.le(
                &format!("ek_sumset_convolution_k{k}_lower"),
                &format!("|A|^{k} max(|A-A|,|A+A|) <= |A^{} + Δ(A)|", k + 1),
                big(maxds) * &nk,
                dp,
            );
        } else {
            let why = format!(
                "|A^{} ± Δ(A)| costs about |A|^{} N/64 = {:.2e} visits, above the budget {:.1e}",
                k + 1,
                k + 1,
                (n as f64).powi(k as i32 + 1) * (ctx.a.group().size() as f64 / 64.0).max(1.0),
                ctx.opts.delta_budget
            );
            for name in ["difference_set", "sumset_convolution"] {
                for side in ["upper", "lower"] {
                    sh.skip(
                        &format!("ek_{name}_k{k}_{side}"),
                        "tuple-sumset bounds",
                        CheckKind::Inequality,
                        why.clone(),
                    );
                }
            }
        }
        sh.le(
            &format!("ek_sumset_on_differences_k{k}_upper"),
            "|A|^{k-1} |A^2 + Δ(A)| <= sum_{s in D} (S o S)^k(s)",
            ipow(n as i128, k - 1) * &delta2_plus,
            eds,
        );
        sh.le(
            &format!("ek_sumset_on_differences_k{k}_lower"),
            "|A|^k max(|A-A|,|A+A|) <= |A|^{k-1} |A^2 + Δ(A)|",
            big(maxds) * &nk,
            ipow(n as i128, k - 1) * &delta2_plus,
        );
    }
    Ok(())
}

fn gowers_entries(ctx: &Ctx, sh: &mut Sheet) -> Result<()> {
    let u = &ctx.gowers;
    let n = ctx.n();
    let nn = ctx.a.group().size();
    for k in 2u32..=4 {
        let name = format!("gowers_chain_k{k}");
        let anchor = format!(
            "‖A‖_{{U^{k}}}^{} <= ‖A‖_{{U^{}}}^{} ‖A‖_{{U^{}}}^{}",
            3 * k - 2,
            k + 1,
            k - 1,
            k - 1,
            2 * k
        );
        let ki = k as usize;
        if u.len() <= ki {
            sh.skip(
                &name,
                &anchor,
                CheckKind::Inequality,
                ctx.gowers_limit_reason.clone().unwrap_or_default(),
            );
            continue;
        }
        sh.le(
            &name,
            &anchor,
            big_pow(&u[ki - 1], 3 * k - 2),
            big_pow(&u[ki], k - 1) * big_pow(&u[ki - 2], 2 * k),
        );
    }
    sh.le(
        "gowers_u3_energy_lower",
        "E(A)^4 <= ‖A‖_{U^3} |A|^8",
        big_pow(&ctx.e, 4),
        &u[2] * ipow(n as i128, 8),
    );
    sh.le(
        "gowers_u3_below_e3",
        "‖A‖_{U^3} <= E_3(A)",
        u[2].clone(),
        ctx.e3.clone(),
    );
    sh.le(
        "gowers_u3_squared_below_e4_e",
        "‖A‖_{U^3}^2 <= E_4(A) E(A)",
        &u[2] * &u[2],
        &ctx.e4 * &ctx.e,
    );
    let m = ctx.d.len().min(ctx.s.len());
    sh.le(
        "gowers_u3_doubling_lower",
        "|A|^8 <= ‖A‖_{U^3} min(|A+A|,|A-A|)^4",
        ipow(n as i128, 8),
        &u[2] * ipow(m as i128, 4),
    );
    for k in 3u32..=4 {
        let ek = (1u32 << k) - k - 1;
        let ak = 3 * (1u32 << k) - 4 * k - 4;
        sh.le(
            &format!("gowers_energy_power_lower_k{k}"),
            &format!("E(A)^{ek} <= ‖A‖_{{U^{k}}} |A|^{ak}"),
            big_pow(&ctx.e, ek),
            &u[k as usize - 1] * ipow(n as i128, ak),
        );
    }
    for d in 2..u.len() + 1 {
        sh.check(
            &format!("gowers_normalized_monotone_d{d}"),
            &format!("‖A‖_{{U^{}}}^2 <= ‖A‖_{{U^{d}}} N^{}", d - 1, d - 1),
            CheckKind::Inequality,
            monotone_from_profile(u, nn, d),
            (&u[d - 2] * &u[d - 2]).to_string(),
            (&u[d - 1] * ipow(nn as i128, d as u32 - 1)).to_string(),
        );
    }
    let pair = gowers_pair_u3(&ctx.a, &ctx.b)?;
    let eab = energy_pair(&ctx.a, &ctx.b);
    sh.le(
        "gowers_pair_u3_lower",
        "E(A,B)^4 <= U^3(A,B) |A|^4 |B|^4",
        big_pow(&eab, 4),
        &pair.value * ipow(n as i128, 4) * ipow(ctx.b.len() as i128, 4),
    );
    Ok(())
}

fn eigen_entries(ctx: &Ctx, sh: &mut Sheet) -> Result<()> {
    let a = &ctx.a;
    let nn = a.group().size();
    let reg = regular_part(a)?;
    sh.check(
        "regular_part_size",
        "2|A'| >= |A|, A' = {x in A : ((A*A) o A)(x) <= 2E(A)/|A|}",
        CheckKind::Inequality,
        2 * reg.len() >= a.len(),
        (2 * reg.len()).to_string(),
        a.len().to_string(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.opts.seed);
    let draw = |support: &GSet, rng: &mut ChaCha8Rng| {
        let mut f = vec![0i64; nn];
        for x in support.iter() {
            f[x] = rng.random_range(-8..=8);
        }
        f
    };
    let mut worst_full: Option<(BigInt, BigInt)> = None;
    let mut worst_reg: Option<(BigInt, BigInt)> = None;
    let (mut ok_full, mut ok_reg) = (true, true);
    for _ in 0..ctx.opts.random_functions {
        let f = draw(a, &mut rng);
        let l2: i64 = f.iter().map(|v| v * v).sum();
        let e = energy_with_function(a, &f)?;
        let (l, r) = (&e * &e, &ctx.e3 * big(l2 * l2));
        ok_full &= l <= r;
        if worst_full.as_ref().is_none_or(|(wl, wr)| &l * wr > wl * &r) {
            worst_full = Some((l, r));
        }
        let f = draw(&reg, &mut rng);
        let l2: i64 = f.iter().map(|v| v * v).sum();
        let e = energy_with_function(a, &f)?;
        let (l, r) = (e * big(a.len()), &ctx.e * 2 * big(l2));
        ok_reg &= l <= r;
        if worst_reg.as_ref().is_none_or(|(wl, wr)| &l * wr > wl * &r) {
            worst_reg = Some((l, r));
        }
    }
    let k = ctx.opts.random_functions;
    for (name, anchor, ok, worst) in [
        (
            "eigen_full_random_functions",
            format!("E(A,f)^2 <= E_3(A) ‖f‖_2^4 for {k} random f on A (worst case shown)"),
            ok_full,
            worst_full,
        ),
        (
            "eigen_regular_random_functions",
            format!("|A| E(A,f) <= 2E(A) ‖f‖_2^2 for {k} random f on A' (worst case shown)"),
            ok_reg,
            worst_reg,
        ),
    ] {
        let (l, r) = worst.unwrap_or_default();
        let ratio = big_ratio(&l, &r);
        sh.push(
            name,
            anchor,
            CheckKind::Inequality,
            l.to_string(),
            r.to_string(),
            if ok { Verdict::Pass } else { Verdict::Fail },
            ratio,
            None,
        );
    }
    Ok(())
}

/// Post-hoc audits of the greedy constructions on `A` and `B`.
pub fn algorithm_entries(ctx: &Ctx) -> Result<Vec<CheckResult>> {
    let mut sh = Sheet::new(&ctx.name);
    let push_family = |sh: &mut Sheet, name: &str, f: &crate::structure::DisjointFamily| {
        let audit = f.audit();
        sh.push(
            name,
            format!(
                "count >= {}; disjoint; sizes >= {}; inclusions",
                f.bound_formula, f.min_size
            ),
            CheckKind::Algorithm,
            f.len().to_string(),
            fmt_rational(&f.bound),
            if audit.passed() {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
            (BigRational::from_integer(big(f.len())) / f.bound.clone()).to_f64(),
            if audit.passed() {
                None
            } else {
                Some(format!("{audit:?}"))
            },
        );
    };
    let f = greedy_disjoint_translates(&ctx.a, &ctx.b)?;
    push_family(&mut sh, "family_translates", &f);
    let f = greedy_disjoint_slices(&ctx.a, &ctx.d)?;
    push_family(&mut sh, "family_slices", &f);
    let target = sumset(&ctx.a, &ctx.b)?;
    match greedy_disjoint_in_target(&ctx.a, &ctx.b, &target) {
        Ok(f) => push_family(&mut sh, "family_translates_in_target", &f),
        Err(Error::Precondition(why)) => sh.skip(
            "family_translates_in_target",
            "count >= σ^3/(256|A|^2|B|E(A,B))",
            CheckKind::Algorithm,
            why,
        ),
        Err(e) => return Err(e),
    }
    let reg = regular_part(&ctx.a)?;
    sh.check(
        "regular_part_half",
        "2|A'| >= |A|",
        CheckKind::Algorithm,
        2 * reg.len() >= ctx.a.len(),
        reg.len().to_string(),
        ctx.a.len().to_string(),
    );
    Ok(sh.finish())
}

/// Report-only ratios for bounds whose constants are unspecified.
pub fn run_ratio_report(a: &GSet) -> Result<Vec<CheckResult>> {
    let ctx = Ctx::new("input", a, None, &SuiteOptions::default())?;
    ratio_entries(&ctx)
}

pub fn ratio_entries(ctx: &Ctx) -> Result<Vec<CheckResult>> {
    let mut sh = Sheet::new(&ctx.name);
    let a = &ctx.a;
    let n = ctx.n();
    let nf = n as f64;
    let nn = a.group().size();
    let ef = ctx.e.to_f64().unwrap_or(f64::INFINITY);
    let (d, s) = (&ctx.d, &ctx.s);
    let k = d.len() as f64 / nf;

    let dd = correlation_counts(d, d)?;
    let ss = correlation_counts(s, s)?;
    let e3d = power_sum(&dd, 3);
    sh.report(
        "e3_difference_set_doubling",
        "E_3(A-A) / (K^{7/4} |A|^4), K = |A-A|/|A|",
        e3d.to_f64().unwrap_or(f64::INFINITY),
        k.powf(1.75) * nf.powi(4),
    );

    // max_{s != 0} |A ± A_s|
    let mut max_pm = [0usize; 2];
    for x in d.iter().filter(|&x| x != 0) {
        let sl = self_slice(a, x);
        for (i, sign) in [Sign::Minus, Sign::Plus].into_iter().enumerate() {
            max_pm[i] = max_pm[i].max(signed_sumset(a, &sl, sign)?.len());
        }
    }
    let hyp = ctx.e3 >= big(2) * ipow(n as i128, 3);
    for (i, sign) in [Sign::Minus, Sign::Plus].into_iter().enumerate() {
        let name = format!("slice_sumset_max_cubed_{}", sign_tag(sign));
        let anchor = format!(
            "(max_{{s≠0}} |A {sign} A_s|)^3 / (|A|^10 / (|A-A| E(A)^2)), when E_3(A) >= 2|A|^3"
        );
        if hyp {
            sh.report_big(
                &name,
                &anchor,
                &(ipow(max_pm[i] as i128, 3) * big(d.len()) * &ctx.e * &ctx.e),
                &ipow(n as i128, 10),
            );
        } else {
            sh.skip(&name, &anchor, CheckKind::Ratio, "E_3(A) < 2|A|^3");
        }
    }
    let g3 = ctx.gamma(3.0);
    for (i, sign) in [Sign::Minus, Sign::Plus].into_iter().enumerate() {
        let name = format!("slice_sumset_max_squared_{}", sign_tag(sign));
        let anchor = format!(
            "(max_{{s≠0}} |A {sign} A_s|)^2 / (γ_3 |A|^5 / E(A)), when E_3(A) >= 16 |A|^3 / γ_3"
        );
        match g3 {
            None => sh.skip(&name, &anchor, CheckKind::Ratio, ctx.gamma_skip()),
            Some(g) if ctx.e3.to_f64().unwrap_or(0.0) >= 16.0 / g * nf.powi(3) => sh.report(
                &name,
                &anchor,
                (max_pm[i] as f64).powi(2),
                g * nf.powi(5) / ef,
            ),
            Some(_) => sh.skip(&name, &anchor, CheckKind::Ratio, "E_3(A) < 16|A|^3/γ_3"),
        }
    }

    // E_3(D,A,A), E_3(S,A,A)
    let mut e3xaa = [ExactSum::new(), ExactSum::new()];
    for x in 0..nn {
        let c = ctx.aa[x] as i128;
        if c != 0 {
            e3xaa[0].add_product(dd[x] as i128, c * c);
            e3xaa[1].add_product(ss[x] as i128, c * c);
        }
    }
    let e3xaa = [e3xaa[0].value(), e3xaa[1].value()];
    for (label, v) in [("D", &e3xaa[0]), ("S", &e3xaa[1])] {
        sh.report_big(
            &format!("e3_mixed_squared[{label}]"),
            &format!("E_3({label},A,A)^2 / (|A|^13 / (|A-A|^2 E(A)))"),
            &(v * v * big(d.len() * d.len()) * &ctx.e),
            &ipow(n as i128, 13),
        );
    }
    let edd3 = {
        let mut acc = ExactSum::new();
        for x in d.iter() {
            acc.add_pow(dd[x] as i128, 3);
        }
        acc.value()
    };
    let eds3 = {
        let mut acc = ExactSum::new();
        for x in d.iter() {
            acc.add_pow(ss[x] as i128, 3);
        }
        acc.value()
    };
    for (label, v, base) in [("D", &edd3, d.len()), ("S", &eds3, s.len())] {
        let first = BigRational::from_integer(ipow(base as i128, 12));
        let second = BigRational::new(
            ipow(n as i128, 45),
            big_pow(&ctx.e, 9) * big(d.len() * d.len()),
        );
        let rhs = if first > second { first } else { second };
        let lhs = BigRational::from_integer(big_pow(v, 4));
        sh.push(
            format!("e3_restricted_fourth[{label}]"),
            format!("(E^D_3({label}))^4 / max(|{label}|^12, |A|^45/(E(A)^9 |A-A|^2))"),
            CheckKind::Ratio,
            fmt_rational(&lhs),
            fmt_rational(&rhs),
            Verdict::ReportOnly,
            (lhs / rhs).to_f64(),
            None,
        );
    }
    let g2 = ctx.gamma(2.0);
    let g32 = ctx.gamma(1.5);
    let log_n = nf.ln().max(f64::MIN_POSITIVE);
    for (label, v, w) in [("D", &e3xaa[0], &edd3), ("S", &e3xaa[1], &eds3)] {
        let vf = v.to_f64().unwrap_or(f64::INFINITY);
        let wf = w.to_f64().unwrap_or(f64::INFINITY);
        let anchors = [
            format!("E_3({label},A,A)^2 / (γ_2 |A|^5 E(A))"),
            format!(
                "E^D_3({label}) / (γ_{{3/2}} |A|^{{33/4}} E_{{3/2}}(A) / (E(A)^{{9/4}} log|A|))"
            ),
            format!("E^D_3({label}) / (γ_2 |A|^{{17/2}} / (E(A)^{{3/2}} log|A|))"),
        ];
        let names = [
            format!("e3_mixed_connected[{label}]"),
            format!("e3_restricted_connected_three_halves[{label}]"),
            format!("e3_restricted_connected_two[{label}]"),
        ];
        match (g2, g32) {
            (Some(g2), Some(g32)) if n > 1 => {
                let e32: f64 = ctx
                    .aa
                    .iter()
                    .filter(|&&c| c > 0)
                    .map(|&c| (c as f64).powf(1.5))
                    .sum();
                sh.report(&names[0], &anchors[0], vf * vf, g2 * nf.powi(5) * ef);
                sh.report(
                    &names[1],
                    &anchors[1],
                    wf,
                    g32 * nf.powf(8.25) * e32 / (ef.powf(2.25) * log_n),
                );
                sh.report(
                    &names[2],
                    &anchors[2],
                    wf,
                    g2 * nf.powf(8.5) / (ef.powf(1.5) * log_n),
                );
            }
            _ => {
                for (nm, an) in names.iter().zip(&anchors) {
                    sh.skip(nm, an, CheckKind::Ratio, ctx.gamma_skip());
                }
            }
        }
    }

    // sum_{x≠0} (A o A)^2(x) d_2(x), d_2(x) = sum_α D_x(α) (D o D_x)(α)
    {
        let names = ["e4_difference_slices", "e4_sumset_slices"];
        let anchors = [
            "sum_{x≠0} (A o A)^2 d_2 / (γ_3 |A|^5), d_2(x) = sum_α D_x(α)(D o D_x)(α)",
            "sum_{x≠0} (A o A)^2 s_2 / (γ_3 |A|^5), s_2(x) = sum_α S_x(α)(S_x * D)(α)",
        ];
        let mut totals = [ExactSum::new(), ExactSum::new()];
        let mut uppers = [ExactSum::new(), ExactSum::new()];
        for x in 1..nn {
            let c = ctx.aa[x] as i128;
            if c == 0 {
                continue;
            }
            let dx = self_slice(d, x);
            let corr = correlation_counts(d, &dx)?;
            let dk: u64 = dx.iter().map(|al| corr[al]).sum();
            totals[0].add_product(c * c, dk as i128);
            uppers[0].add_product(c * c, (dd[x] as i128) * (dd[x] as i128));
            let sx = self_slice(s, x);
            let conv = convolution_counts(&sx, d)?;
            let sk: u64 = sx.iter().map(|al| conv[al]).sum();
            totals[1].add_product(c * c, sk as i128);
            uppers[1].add_product(c * c, (ss[x] as i128) * (ss[x] as i128));
        }
        for i in 0..2 {
            let t = totals[i].value();
            match g3 {
                Some(g) if ctx.e3.to_f64().unwrap_or(0.0) >= 16.0 / g * nf.powi(3) => sh.report(
                    names[i],
                    anchors[i],
                    t.to_f64().unwrap_or(f64::INFINITY),
                    g * nf.powi(5),
                ),
                Some(_) => sh.skip(
                    names[i],
                    anchors[i],
                    CheckKind::Ratio,
                    "E_3(A) < 16|A|^3/γ_3",
                ),
                None => sh.skip(names[i], anchors[i], CheckKind::Ratio, ctx.gamma_skip()),
            }
            sh.report_big(
                &format!("{}_vs_full", names[i]),
                "slice-weighted sum / sum_{x≠0} (A o A)^2 (X o X)^2",
                &t,
                &uppers[i].value(),
            );
        }
    }

    // max_{x≠0} min(|D_x|, |S_x|)
    {
        let best = (1..nn).map(|x| dd[x].min(ss[x])).max().unwrap_or(0);
        let anchor = "max_{x≠0} min(|D_x|,|S_x|) / (γ_3^{1/2} K_E^{1/2} |A|), K_E = |A|^3/E(A)";
        match g3 {
            Some(g) => sh.report(
                "popular_sumset_slices",
                anchor,
                best as f64,
                (g * nf.powi(3) / ef).sqrt() * nf,
            ),
            None => sh.skip(
                "popular_sumset_slices",
                anchor,
                CheckKind::Ratio,
                ctx.gamma_skip(),
            ),
        }
    }

    let u3 = &ctx.gowers[2];
    sh.report_big(
        "self_dual_u3",
        "‖A‖_{U^3}^2 / (E_4(A) E(A))",
        &(u3 * u3),
        &(&ctx.e4 * &ctx.e),
    );
    sh.report_big(
        "critical_e3",
        "E_3(A) / (|A| E(A))",
        &ctx.e3,
        &(big(n) * &ctx.e),
    );
    let t4 = t_energy_k(a, 4)?;
    sh.report_big(
        "critical_t4",
        "T_4(A) / (|A|^4 E(A))",
        &t4,
        &(ipow(n as i128, 4) * &ctx.e),
    );
    {
        let anchor = "E_3(D,A,A) / (2^-9 γ_3^{1/2} σ_D(A)^5 E(A) |A|^-9)";
        match g3 {
            Some(g) if nf * nf / (8.0 * nf) >= 0.5 => {
                let sigma = nf * nf;
                sh.report(
                    "e3_mixed_popular",
                    anchor,
                    e3xaa[0].to_f64().unwrap_or(f64::INFINITY),
                    g.sqrt() / 512.0 * sigma.powi(5) * ef / nf.powi(9),
                );
            }
            Some(_) => sh.skip(
                "e3_mixed_popular",
                anchor,
                CheckKind::Ratio,
                "β = 1/2 exceeds σ_D/(8|A|)",
            ),
            None => sh.skip(
                "e3_mixed_popular",
                anchor,
                CheckKind::Ratio,
                ctx.gamma_skip(),
            ),
        }
    }
    for k in 3u32..=4 {
        let ek = (1u32 << k) - k - 1;
        let ak = 3 * (1u32 << k) - 4 * k - 4;
        sh.report_big(
            &format!("gowers_energy_power_ratio_k{k}"),
            &format!("‖A‖_{{U^{k}}} |A|^{ak} / E(A)^{ek}"),
            &(&ctx.gowers[k as usize - 1] * ipow(n as i128, ak)),
            &big_pow(&ctx.e, ek),
        );
    }
    let scan = min_slice_energy_ratio(a)?;
    match scan.shift {
        Some(x) => sh.push(
            "slice_energy_min_ratio",
            format!("min E(A_s)/|A_s|^3 over s≠0, |A_s| >= |A|/(2K); attained at s = {x}"),
            CheckKind::Ratio,
            fmt_f64(scan.ratio),
            "1".into(),
            Verdict::ReportOnly,
            Some(scan.ratio),
            None,
        ),
        None => sh.skip(
            "slice_energy_min_ratio",
            "min E(A_s)/|A_s|^3 over s≠0, |A_s| >= |A|/(2K)",
            CheckKind::Ratio,
            "no qualifying shift",
        ),
    }
    {
        let anchor = "min |A'-A'|/|A'| over |A'| >= |A|/2, against K_E = |A|^3/E(A)";
        if n <= MAX_ORACLE_N {
            let o = small_doubling_subset_oracle(a, 0.5)?;
            sh.report("small_doubling_oracle", anchor, o.doubling, nf.powi(3) / ef);
        } else {
            sh.skip(
                "small_doubling_oracle",
                anchor,
                CheckKind::Ratio,
                format!("exhaustive search needs |A| <= {MAX_ORACLE_N}"),
            );
        }
    }
    Ok(sh.finish())
}

/// Number of singleton sources in the seeded random-family instance.
pub const SINGLETON_SOURCES: usize = 10_000;

/// `t` singletons `{0}, ..., {t-1}` in `Z_{2^15}`: `Δ = 1`, `σ = t`.
pub fn singleton_sources(t: usize) -> Result<Vec<GSet>> {
    let g = make_group(&[1 << 15])?;
    (0..t).map(|i| GSet::from_indices(&g, [i])).collect()
}

/// Audit of the random disjoint family on the singleton instance with `C = 1`.
pub fn random_family_entries(seed: u64) -> Result<Vec<CheckResult>> {
    let mut sh = Sheet::new(&format!("singletons(t={SINGLETON_SOURCES})"));
    let anchor =
        "count >= t^2 Δ/((32C+16)σ) within 64 seeded attempts; disjoint; sizes >= Δ/(8C+4)";
    match random_disjoint_family(&singleton_sources(SINGLETON_SOURCES)?, 1, 1.0, seed) {
        Ok(f) => {
            let audit = f.audit();
            sh.push(
                "family_random",
                anchor,
                CheckKind::Algorithm,
                f.len().to_string(),
                fmt_rational(&f.bound),
                if audit.passed() {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                },
                (BigRational::from_integer(big(f.len())) / f.bound.clone()).to_f64(),
                if audit.passed() {
                    None
                } else {
                    Some(format!("{audit:?}"))
                },
            );
        }
        Err(Error::Exhausted(why)) => sh.push(
            "family_random",
            anchor,
            CheckKind::Algorithm,
            String::new(),
            String::new(),
            Verdict::Fail,
            None,
            Some(why),
        ),
        Err(e) => return Err(e),
    }
    Ok(sh.finish())
}

/// Which suites to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Identity,
    Inequality,
    Algorithm,
    Ratio,
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Suite::Identity),
            "inequality" => Ok(Suite::Inequality),
            "algorithm" => Ok(Suite::Algorithm),
            "ratio" => Ok(Suite::Ratio),
            other => Err(Error::Parse(format!("unknown suite {other:?}"))),
        }
    }
}

pub fn run_suites(ctx: &Ctx, suites: &[Suite]) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for s in suites {
        out.extend(match s {
            Suite::Identity => identity_entries(ctx)?,
            Suite::Inequality => inequality_entries(ctx)?,
            Suite::Algorithm => algorithm_entries(ctx)?,
            Suite::Ratio => ratio_entries(ctx)?,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub name: String,
    pub set: GSet,
    pub spec: Option<InstanceSpec>,
}

/// The groups of the seeded random part of the corpus.
pub const RANDOM_GROUPS: [&[usize]; 4] = [&[101], &[256], &[2, 2, 2, 2, 2, 2, 2, 2], &[2; 10]];

/// Densities cycled through by the seeded random sets of each group.
pub fn random_densities(factors: &[usize]) -> &'static [f64] {
    let size: usize = factors.iter().product();
    if size <= 128 {
        &[0.05, 0.1, 0.15, 0.2, 0.3]
    } else if size <= 256 {
        &[0.02, 0.05, 0.1, 0.15, 0.2]
    } else {
        &[0.01, 0.02, 0.04, 0.06, 0.08]
    }
}

/// Seeded random instances: `count` per group, seeds `0..count`.
pub fn random_corpus(count: usize) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    for factors in RANDOM_GROUPS {
        let dens = random_densities(factors);
        for seed in 0..count as u64 {
            let spec = InstanceSpec::Random {
                group: factors.to_vec(),
                density: dens[seed as usize % dens.len()],
                seed,
            };
            let set = spec.build()?;
            if set.is_empty() {
                continue;
            }
            out.push(Instance {
                name: spec.label(),
                set,
                spec: Some(spec),
            });
        }
    }
    Ok(out)
}

/// Structured instances: subspaces, `H ⊕ Λ`, progressions, dissociated
/// sets, unions of subspaces and the three-element example in `Z_7`.
pub fn structured_corpus() -> Result<Vec<Instance>> {
    let specs = vec![
        InstanceSpec::Ap {
            n: 7,
            start: 0,
            step: 1,
            len: 3,
        },
        InstanceSpec::Subspace { n: 4, dim: 2 },
        InstanceSpec::Subspace { n: 6, dim: 3 },
        InstanceSpec::Subspace { n: 8, dim: 4 },
        InstanceSpec::Hplusl { n: 6, dim: 2, k: 4 },
        InstanceSpec::Hplusl { n: 8, dim: 3, k: 5 },
        InstanceSpec::Hplusl {
            n: 10,
            dim: 4,
            k: 6,
        },
        InstanceSpec::Ap {
            n: 101,
            start: 0,
            step: 1,
            len: 8,
        },
        InstanceSpec::Ap {
            n: 101,
            start: 5,
            step: 7,
            len: 20,
        },
        InstanceSpec::Ap {
            n: 12,
            start: 0,
            step: 4,
            len: 3,
        },
        InstanceSpec::Ap {
            n: 256,
            start: 0,
            step: 1,
            len: 40,
        },
        InstanceSpec::Dissociated { n: 8, k: 6 },
        InstanceSpec::CosetUnion {
            n: 6,
            dims: vec![2, 2, 2],
        },
        InstanceSpec::CosetUnion {
            n: 8,
            dims: vec![3, 3],
        },
        InstanceSpec::CosetUnion {
            n: 10,
            dims: vec![3, 3, 3],
        },
    ];
    specs
        .into_iter()
        .map(|spec| {
            Ok(Instance {
                name: spec.label(),
                set: spec.build()?,
                spec: Some(spec),
            })
        })
        .collect()
}

/// Structured instances followed by `count` seeded random sets per group.
pub fn corpus(count: usize) -> Result<Vec<Instance>> {
    let mut out = structured_corpus()?;
    out.extend(random_corpus(count)?);
    Ok(out)
}

/// Runs the suites on every instance in parallel; results keep corpus order.
pub fn run_corpus(
    instances: &[Instance],
    suites: &[Suite],
    opts: &SuiteOptions,
) -> Result<Vec<CheckResult>> {
    let parts: Vec<Result<Vec<CheckResult>>> = instances
        .par_iter()
        .map(|inst| {
            let ctx = Ctx::new(&inst.name, &inst.set, None, opts)?;
            run_suites(&ctx, suites)
        })
        .collect();
    let mut out = Vec::new();
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, DeriveSerialize)]
pub struct Summary {
    pub instances: usize,
    pub entries: usize,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub report_only: usize,
}

pub fn summarize(results: &[CheckResult]) -> Summary {
    let mut names: Vec<&str> = results.iter().map(|r| r.instance.as_str()).collect();
    names.dedup();
    let count = |v: Verdict| results.iter().filter(|r| r.pass == v).count();
    Summary {
        instances: names.len(),
        entries: results.len(),
        passed: count(Verdict::Pass),
        failed: count(Verdict::Fail),
        skipped: count(Verdict::Skipped),
        report_only: count(Verdict::ReportOnly),
    }
}

/// Flat CSV with the same fields as the JSON report.
pub fn write_csv<W: Write>(results: &[CheckResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Parse(format!("csv: {e}"));
    w.write_record([
        "instance", "name", "kind", "anchor", "lhs", "rhs", "pass", "ratio", "reason",
    ])
    .map_err(io)?;
    for r in results {
        let kind = match r.kind {
            CheckKind::Identity => "identity",
            CheckKind::Inequality => "inequality",
            CheckKind::Algorithm => "algorithm",
            CheckKind::Ratio => "ratio",
        };
        let ratio = r.ratio.map(|v| format!("{v}")).unwrap_or_default();
        w.write_record([
            r.instance.as_str(),
            r.name.as_str(),
            kind,
            r.anchor.as_str(),
            r.lhs.as_str(),
            r.rhs.as_str(),
            r.pass.as_str(),
            ratio.as_str(),
            r.reason.as_deref().unwrap_or(""),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Parse(format!("csv: {e}")))?;
    Ok(())
}
