//! Constructive procedures: greedy disjoint translates and slices, a seeded
//! randomized disjoint family, the regular part `A'`, exhaustive
//! connectedness measurement, connected-subset extraction, a slice-energy
//! scan and a brute-force small-doubling subset search.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::energy::{energy, energy_pair, WeightKernel};
use crate::error::{Error, Result};
use crate::exact::ipow;
use crate::gowers::{gowers_profile, MAX_GOWERS_D};
use crate::setfun::{
    convolve, correlate, correlation_counts, difference_set, same_group, self_slice, GSet,
};

/// Largest set for exhaustive subset searches over `2^|A|` masks.
pub const MAX_EXHAUSTIVE_N: usize = 22;
/// Largest set for the small-doubling oracle and the post-hoc connectedness audit.
pub const MAX_ORACLE_N: usize = 18;
/// Retries granted to [`random_disjoint_family`].
pub const RANDOM_FAMILY_RETRIES: u64 = 64;

/// What a family member was indexed by.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tag {
    /// A translate `b_j` of `A`.
    Translate(usize),
    /// A slice shift `s_j`.
    Shift(usize),
    /// Position of the source set `M_i` in the input list.
    Source(usize),
}

impl Tag {
    fn to_json(&self) -> Value {
        match self {
            Tag::Translate(b) => json!({ "translate": b }),
            Tag::Shift(s) => json!({ "shift": s }),
            Tag::Source(i) => json!({ "source": i }),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Member {
    pub tag: Tag,
    pub set: GSet,
    /// The set this member is required to lie in.
    pub container: GSet,
}

/// A family of pairwise disjoint sets together with the lower bound on its
/// size that the construction guarantees.
#[derive(Clone, Debug)]
pub struct DisjointFamily {
    pub members: Vec<Member>,
    pub min_size: usize,
    pub algorithm: String,
    pub params: Vec<(String, String)>,
    /// Guaranteed lower bound on the number of members.
    pub bound: BigRational,
    pub bound_formula: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyAudit {
    pub disjoint: bool,
    pub sizes_ok: bool,
    pub inclusions_ok: bool,
    pub count_ok: bool,
}

impl FamilyAudit {
    pub fn passed(&self) -> bool {
        self.disjoint && self.sizes_ok && self.inclusions_ok && self.count_ok
    }
}

impl DisjointFamily {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Recomputes every guarantee from the members alone.
    pub fn audit(&self) -> FamilyAudit {
        let total: usize = self.members.iter().map(|m| m.set.len()).sum();
        let disjoint = match self.members.first() {
            None => true,
            Some(first) => {
                let mut union = GSet::empty(first.set.group());
                for m in &self.members {
                    union = union.union(&m.set);
                }
                union.len() == total
            }
        };
        FamilyAudit {
            disjoint,
            sizes_ok: self.members.iter().all(|m| m.set.len() >= self.min_size),
            inclusions_ok: self.members.iter().all(|m| m.set.is_subset(&m.container)),
            count_ok: BigRational::from_integer(BigInt::from(self.len())) >= self.bound,
        }
    }

    pub fn to_json(&self) -> Value {
        let audit = self.audit();
        let params: serde_json::Map<String, Value> = self
            .params
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        json!({
            "algorithm": self.algorithm,
            "params": params,
            "count": self.len().to_string(),
            "minSize": self.min_size.to_string(),
            "bound": rational_string(&self.bound),
            "boundDecimal": format!("{:.6}", rational_f64(&self.bound)),
            "boundFormula": self.bound_formula,
            "audit": {
                "disjoint": audit.disjoint,
                "sizes": audit.sizes_ok,
                "inclusions": audit.inclusions_ok,
                "count": audit.count_ok,
            },
            "members": self.members.iter().map(|m| json!({
                "tag": m.tag.to_json(),
                "elements": m.set.to_vec(),
            })).collect::<Vec<_>>(),
        })
    }
}

pub(crate) fn rational_string(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub(crate) fn rational_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn ratio(num: BigInt, den: BigInt) -> BigRational {
    BigRational::new(num, den)
}

fn big(v: usize) -> BigInt {
    BigInt::from(v)
}

pub(crate) fn float_rational(x: f64) -> Result<BigRational> {
    BigRational::from_float(x)
        .ok_or_else(|| Error::InvalidArgument(format!("{x} is not a finite number")))
}

/// Disjoint `A_j ⊆ A + b_j` with `|A_j| >= |A|/2`, scanning `b ∈ B` in
/// increasing order and keeping the residual of each translate when large
/// enough. Guarantees `s >= |A||B|^2 / (16 E(A,B))`.
pub fn greedy_disjoint_translates(a: &GSet, b: &GSet) -> Result<DisjointFamily> {
    same_group(a.group(), b.group())?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("A and B must be nonempty".into()));
    }
    let mut used = GSet::empty(a.group());
    let mut members = Vec::new();
    for x in b.iter() {
        let translate = a.translate(x);
        let rest = translate.difference(&used);
        if 2 * rest.len() >= a.len() {
            used = used.union(&rest);
            members.push(Member {
                tag: Tag::Translate(x),
                set: rest,
                container: translate,
            });
        }
    }
    let e = energy_pair(a, b);
    Ok(DisjointFamily {
        members,
        min_size: a.len().div_ceil(2),
        algorithm: "translates".into(),
        params: vec![
            ("|A|".into(), a.len().to_string()),
            ("|B|".into(), b.len().to_string()),
            ("E(A,B)".into(), e.to_string()),
            ("halfB".into(), b.len().div_ceil(2).to_string()),
        ],
        bound: ratio(
            big(a.len()) * big(b.len()) * big(b.len()),
            BigInt::from(16) * e,
        ),
        bound_formula: "|A||B|^2/(16E(A,B))".into(),
    })
}

/// Disjoint `S_j ⊆ S ∩ (A + b_j)` of size `⌈σ/(8|B|)⌉` where
/// `σ = sum_{x in S} (A*B)(x)`; requires `σ >= 16|B|`. Each member takes the
/// smallest available elements. Guarantees `s >= σ^3 / (256 |A|^2 |B| E(A,B))`.
pub fn greedy_disjoint_in_target(a: &GSet, b: &GSet, s: &GSet) -> Result<DisjointFamily> {
    same_group(a.group(), b.group())?;
    same_group(a.group(), s.group())?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("A and B must be nonempty".into()));
    }
    let conv = crate::setfun::convolution_counts(a, b)?;
    let sigma: u64 = s.iter().map(|x| conv[x]).sum();
    if sigma < 16 * b.len() as u64 {
        return Err(Error::Precondition(format!(
            "σ = {sigma} < 16|B| = {}",
            16 * b.len()
        )));
    }
    let take = (sigma as usize).div_ceil(8 * b.len());
    let mut used = GSet::empty(a.group());
    let mut members = Vec::new();
    for x in b.iter() {
        let container = s.intersection(&a.translate(x));
        let rest = container.difference(&used);
        if rest.len() >= take {
            let part = GSet::from_indices(a.group(), rest.iter().take(take))?;
            used = used.union(&part);
            members.push(Member {
                tag: Tag::Translate(x),
                set: part,
                container,
            });
        }
    }
    let e = energy_pair(a, b);
    let sig = BigInt::from(sigma);
    Ok(DisjointFamily {
        members,
        min_size: take,
        algorithm: "translates-in-target".into(),
        params: vec![
            ("|A|".into(), a.len().to_string()),
            ("|B|".into(), b.len().to_string()),
            ("|S|".into(), s.len().to_string()),
            ("sigma".into(), sigma.to_string()),
            ("E(A,B)".into(), e.to_string()),
        ],
        bound: ratio(
            &sig * &sig * &sig,
            BigInt::from(256) * big(a.len()) * big(a.len()) * big(b.len()) * e,
        ),
        bound_formula: "σ^3/(256|A|^2|B|E(A,B))".into(),
    })
}

/// Shifts `s_j ∈ D` with pairwise disjoint slices `A_{s_j}`: repeatedly take
/// the surviving shift minimizing `|A - A_s|` and discard `A - A_s`, until
/// fewer than `|D|/2` shifts survive. Guarantees `l >= |D|^2 / (4σ)` with
/// `σ = sum_{s in D} |A - A_s|`.
pub fn greedy_disjoint_slices(a: &GSet, d: &GSet) -> Result<DisjointFamily> {
    same_group(a.group(), d.group())?;
    if d.is_empty() {
        return Err(Error::InvalidArgument("D must be nonempty".into()));
    }
    if !d.is_subset(&difference_set(a, a)?) {
        return Err(Error::InvalidArgument("D must lie in A - A".into()));
    }
    let mut diffs: Vec<(usize, GSet, GSet)> = Vec::with_capacity(d.len());
    let mut sigma = 0usize;
    for s in d.iter() {
        let slice = self_slice(a, s);
        let dd = difference_set(a, &slice)?;
        sigma += dd.len();
        diffs.push((s, slice, dd));
    }
    let mut alive = d.clone();
    let mut members = Vec::new();
    while !alive.is_empty() {
        let (s, slice, dd) = diffs
            .iter()
            .filter(|(s, _, _)| alive.contains(*s))
            .min_by_key(|(s, _, dd)| (dd.len(), *s))
            .expect("alive is nonempty");
        members.push(Member {
            tag: Tag::Shift(*s),
            set: slice.clone(),
            container: a.clone(),
        });
        alive = alive.difference(dd);
        if 2 * alive.len() < d.len() {
            break;
        }
    }
    Ok(DisjointFamily {
        members,
        min_size: 1,
        algorithm: "slices".into(),
        params: vec![
            ("|A|".into(), a.len().to_string()),
            ("|D|".into(), d.len().to_string()),
            ("sigma".into(), sigma.to_string()),
        ],
        bound: ratio(big(d.len()) * big(d.len()), BigInt::from(4) * big(sigma)),
        bound_formula: "|D|^2/(4σ)".into(),
    })
}

/// Randomized disjoint family from sets `Δ <= |M_i| <= CΔ` with
/// `σ = sum_{i,j} |M_i ∩ M_j| <= 10^{-4} t^2 Δ`: keep each `M_i` with
/// probability `p = tΔ/(2σ)`, disjointify in index order and keep pieces of
/// size at least `Δ/(8C+4)`. Attempt `r` draws from stream `r` of a ChaCha8
/// generator seeded with `seed`; succeeds once the count reaches
/// `t^2 Δ / ((32C+16)σ)`.
pub fn random_disjoint_family(
    ms: &[GSet],
    delta: usize,
    c: f64,
    seed: u64,
) -> Result<DisjointFamily> {
    let first = ms
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty list of sets".into()))?;
    let g = first.group().clone();
    if delta == 0 {
        return Err(Error::InvalidArgument("Δ must be positive".into()));
    }
    if !(c >= 1.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "C = {c} must be at least 1"
        )));
    }
    let cr = float_rational(c)?;
    let mut cover = vec![0u64; g.size()];
    for (i, m) in ms.iter().enumerate() {
        same_group(&g, m.group())?;
        let len = BigRational::from_integer(big(m.len()));
        if m.len() < delta || len > &cr * BigRational::from_integer(big(delta)) {
            return Err(Error::Precondition(format!(
                "|M_{i}| = {} outside [Δ, CΔ] = [{delta}, {c}·{delta}]",
                m.len()
            )));
        }
        for x in m.iter() {
            cover[x] += 1;
        }
    }
    let t = ms.len();
    let sigma: u128 = cover.iter().map(|&v| (v as u128) * (v as u128)).sum();
    let tt = big(t) * big(t) * big(delta);
    if BigInt::from(sigma) * 10_000 > tt {
        return Err(Error::Precondition(format!(
            "σ = {sigma} exceeds 10^-4 t^2 Δ with t = {t}, Δ = {delta}"
        )));
    }
    let sig = BigRational::from_integer(BigInt::from(sigma));
    let bound = BigRational::from_integer(tt.clone())
        / ((BigRational::from_integer(32.into()) * &cr + BigRational::from_integer(16.into()))
            * &sig);
    let min_piece = BigRational::from_integer(big(delta))
        / (BigRational::from_integer(8.into()) * &cr + BigRational::from_integer(4.into()));
    let min_size = min_piece
        .ceil()
        .to_integer()
        .to_usize()
        .unwrap_or(usize::MAX)
        .max(1);
    let p = (t as f64) * (delta as f64) / (2.0 * sigma as f64);
    let mut last = 0;
    for attempt in 0..RANDOM_FAMILY_RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt);
        let mut used = GSet::empty(&g);
        let mut members = Vec::new();
        for (i, m) in ms.iter().enumerate() {
            if rng.random::<f64>() >= p {
                continue;
            }
            let piece = m.difference(&used);
            used = used.union(&piece);
            if piece.len() >= min_size {
                members.push(Member {
                    tag: Tag::Source(i),
                    set: piece,
                    container: m.clone(),
                });
            }
        }
        last = members.len();
        if BigRational::from_integer(big(last)) >= bound {
            return Ok(DisjointFamily {
                members,
                min_size,
                algorithm: "random-family".into(),
                params: vec![
                    ("t".into(), t.to_string()),
                    ("Delta".into(), delta.to_string()),
                    ("C".into(), c.to_string()),
                    ("sigma".into(), sigma.to_string()),
                    ("p".into(), format!("{p}")),
                    ("seed".into(), seed.to_string()),
                    ("attempt".into(), attempt.to_string()),
                    ("maxAttempts".into(), RANDOM_FAMILY_RETRIES.to_string()),
                ],
                bound,
                bound_formula: "t^2Δ/((32C+16)σ)".into(),
            });
        }
    }
    Err(Error::Exhausted(format!(
        "{RANDOM_FAMILY_RETRIES} attempts failed; last count {last} below {:.4}",
        rational_f64(&bound)
    )))
}

/// `((A*A) o A)(x)` for every `x`.
pub fn cubic_profile(a: &GSet) -> Vec<BigInt> {
    let f = a.indicator();
    let aa = convolve(&f, &f).expect("same group");
    let c = correlate(&aa, &f).expect("same group");
    (0..a.group().size())
        .map(|x| c.exact_at(x).expect("integer valued"))
        .collect()
}

/// `A' = {x ∈ A : ((A*A) o A)(x) <= 2E(A)/|A|}`; `|A'| >= |A|/2`.
pub fn regular_part(a: &GSet) -> Result<GSet> {
    if a.is_empty() {
        return Err(Error::InvalidArgument("A must be nonempty".into()));
    }
    let e2 = energy(a) * 2;
    let n = big(a.len());
    let prof = cubic_profile(a);
    GSet::from_indices(a.group(), a.iter().filter(|&x| &prof[x] * &n <= e2))
}

/// Parameters of `(α, β, γ)`-connectedness and of the extraction procedure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConnectednessParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub rho: f64,
}

#[derive(Clone, Debug)]
pub struct Connectedness {
    /// Minimum of the normalized ratio over qualifying subsets; at most 1.
    pub gamma: f64,
    pub witness: GSet,
}

fn check_exhaustive(a: &GSet, cap: usize) -> Result<()> {
    if a.is_empty() {
        return Err(Error::InvalidArgument("A must be nonempty".into()));
    }
    if a.len() > cap {
        return Err(Error::CapExceeded(format!(
            "|A| = {} exceeds exhaustive cap {cap}",
            a.len()
        )));
    }
    Ok(())
}

fn min_subset_len(beta: f64, n: usize) -> Result<usize> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidArgument(format!("β = {beta} outside [0, 1]")));
    }
    Ok(((beta * n as f64 - 1e-9).ceil() as usize).max(1))
}

fn mask_set(a: &GSet, el: &[usize], mask: u64) -> GSet {
    GSet::from_indices(
        a.group(),
        (0..el.len()).filter(|&i| mask >> i & 1 == 1).map(|i| el[i]),
    )
    .expect("subset of a valid set")
}

/// Dense ids for the differences `a_i - a_j` of a small set.
struct DiffTable {
    ids: Vec<u16>,
    n: usize,
    count: usize,
    zero: usize,
}

impl DiffTable {
    fn new(a: &GSet, el: &[usize]) -> Self {
        let g = a.group();
        let n = el.len();
        let mut map = std::collections::HashMap::new();
        let mut ids = vec![0u16; n * n];
        for i in 0..n {
            for j in 0..n {
                let d = g.sub_idx(el[i], el[j]);
                let next = map.len() as u16;
                ids[i * n + j] = *map.entry(d).or_insert(next);
            }
        }
        let zero = ids[0] as usize;
        DiffTable {
            ids,
            n,
            count: map.len(),
            zero,
        }
    }
}

/// Running `sum_s |B ∩ (B - s)|^α` under single-element toggles.
struct EnergyWalker<'a> {
    table: &'a DiffTable,
    counts: Vec<u32>,
    mask: u64,
    exact: u128,
    real: f64,
    pow_exact: &'a [u128],
    pow_real: &'a [f64],
}

impl<'a> EnergyWalker<'a> {
    fn new(table: &'a DiffTable, pow_exact: &'a [u128], pow_real: &'a [f64]) -> Self {
        EnergyWalker {
            table,
            counts: vec![0; table.count],
            mask: 0,
            exact: 0,
            real: 0.0,
            pow_exact,
            pow_real,
        }
    }

    #[inline]
    fn bump(&mut self, id: usize, up: bool) {
        let old = self.counts[id] as usize;
        let new = if up { old + 1 } else { old - 1 };
        self.counts[id] = new as u32;
        self.exact = self
            .exact
            .wrapping_add(self.pow_exact[new])
            .wrapping_sub(self.pow_exact[old]);
        self.real += self.pow_real[new] - self.pow_real[old];
    }

    fn toggle(&mut self, i: usize) {
        let n = self.table.n;
        let adding = self.mask >> i & 1 == 0;
        if !adding {
            self.mask &= !(1 << i);
        }
        let mut rest = self.mask;
        while rest != 0 {
            let j = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            self.bump(self.table.ids[i * n + j] as usize, adding);
            self.bump(self.table.ids[j * n + i] as usize, adding);
        }
        self.bump(self.table.zero, adding);
        if adding {
            self.mask |= 1 << i;
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    exact: u128,
    real: f64,
    len: u32,
    mask: u64,
}

/// Whether `x` has a strictly smaller normalized ratio than `y`, ties by mask.
fn better(x: &Candidate, y: &Candidate, exp: Option<u32>) -> bool {
    let ord = match exp {
        Some(e) => {
            let lhs = x.exact * (y.len as u128).pow(2 * e);
            let rhs = y.exact * (x.len as u128).pow(2 * e);
            lhs.cmp(&rhs)
        }
        None => x.real.partial_cmp(&y.real).expect("finite ratios"),
    };
    match ord {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => x.mask < y.mask,
    }
}

/// Largest integer exponent handled with exact `u128` ratios.
const EXACT_ALPHA_MAX: u32 = 8;

/// `γ = min_{B ⊆ A, |B| >= β|A|} E_α(B) (|A|/|B|)^{2α} / E_α(A)` by
/// exhaustive enumeration, with the smallest-mask minimizer as witness
/// (bit `j` of a mask stands for the `j`-th smallest element of `A`).
pub fn connectedness_gamma(a: &GSet, alpha: f64, beta: f64) -> Result<Connectedness> {
    check_exhaustive(a, MAX_EXHAUSTIVE_N)?;
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "α = {alpha} must be at least 1"
        )));
    }
    let el = a.to_vec();
    let n = el.len();
    let min_len = min_subset_len(beta, n)?;
    let exp = crate::energy::integer_exponent(alpha).filter(|&k| k <= EXACT_ALPHA_MAX);
    let table = DiffTable::new(a, &el);
    let pow_exact: Vec<u128> = (0..=n as u128)
        .map(|v| exp.map_or(0, |e| v.pow(e)))
        .collect();
    let pow_real: Vec<f64> = (0..=n).map(|v| (v as f64).powf(alpha)).collect();
    let low = n.min(14);
    let high = n - low;
    let best = (0u64..1 << high)
        .into_par_iter()
        .filter_map(|prefix| {
            let mut walk = EnergyWalker::new(&table, &pow_exact, &pow_real);
            for j in 0..high {
                if prefix >> j & 1 == 1 {
                    walk.toggle(low + j);
                }
            }
            let mut best: Option<Candidate> = None;
            let mut consider = |walk: &EnergyWalker| {
                let len = walk.mask.count_ones();
                if (len as usize) < min_len {
                    return;
                }
                let cand = Candidate {
                    exact: walk.exact,
                    real: walk.real / (len as f64).powf(2.0 * alpha),
                    len,
                    mask: walk.mask,
                };
                if best.is_none_or(|b| better(&cand, &b, exp)) {
                    best = Some(cand);
                }
            };
            consider(&walk);
            for i in 1u64..1 << low {
                walk.toggle(i.trailing_zeros() as usize);
                consider(&walk);
            }
            best
        })
        .reduce_with(|x, y| if better(&y, &x, exp) { y } else { x })
        .ok_or_else(|| Error::InvalidArgument("no subset meets the size bound".into()))?;
    let witness = mask_set(a, &el, best.mask);
    let full = crate::energy::energy_k(a, alpha)?.value;
    let gamma = match exp {
        Some(e) => {
            let num = BigInt::from(best.exact) * ipow(n as i128, 2 * e);
            let den =
                full.exact().expect("integer exponent").clone() * ipow(best.len as i128, 2 * e);
            rational_f64(&ratio(num, den))
        }
        None => best.real * (n as f64).powf(2.0 * alpha) / full.as_f64(),
    };
    Ok(Connectedness { gamma, witness })
}

/// `γ = min_{B ⊆ A, |B| >= β|A|} ‖B‖_{U^k} (|A|/|B|)^{2^k} / ‖A‖_{U^k}`.
pub fn gowers_connectedness_gamma(a: &GSet, k: usize, beta: f64) -> Result<Connectedness> {
    check_exhaustive(a, MAX_EXHAUSTIVE_N)?;
    if k == 0 || k > MAX_GOWERS_D {
        return Err(Error::InvalidArgument(format!(
            "k = {k} outside 1..={MAX_GOWERS_D}"
        )));
    }
    let el = a.to_vec();
    let n = el.len();
    let min_len = min_subset_len(beta, n)?;
    let e = 1u32 << k;
    let best = (1u64..1 << n)
        .into_par_iter()
        .filter(|m| m.count_ones() as usize >= min_len)
        .map(|m| {
            let b = mask_set(a, &el, m);
            let v = gowers_profile(&b, k)
                .expect("k checked")
                .pop()
                .expect("k >= 1");
            (v, m.count_ones(), m)
        })
        .reduce_with(|x, y| {
            let lhs = &x.0 * ipow(y.1 as i128, e);
            let rhs = &y.0 * ipow(x.1 as i128, e);
            match lhs.cmp(&rhs) {
                std::cmp::Ordering::Less => x,
                std::cmp::Ordering::Greater => y,
                std::cmp::Ordering::Equal => {
                    if x.2 < y.2 {
                        x
                    } else {
                        y
                    }
                }
            }
        })
        .ok_or_else(|| Error::InvalidArgument("no subset meets the size bound".into()))?;
    let full = gowers_profile(a, k)?.pop().expect("k >= 1");
    let gamma = rational_f64(&ratio(
        best.0 * ipow(n as i128, e),
        full * ipow(best.1 as i128, e),
    ));
    Ok(Connectedness {
        gamma,
        witness: mask_set(a, &el, best.2),
    })
}

#[derive(Clone, Debug)]
pub struct Extraction {
    pub aprime: GSet,
    pub steps: usize,
    /// The violating sets removed, in order.
    pub removed: Vec<GSet>,
    /// `c = E_q(A) / (|A|^2 ‖q‖_∞)`.
    pub c: f64,
    /// `⌈log(1/c) / (2 log((1 - β₂ρ)/(1 - β₁)))⌉`.
    pub step_bound: f64,
    pub eq_initial: f64,
    pub eq_final: f64,
    /// `E_q(A') > (1 - β₂ρ)^{2s} E_q(A)` compared exactly; with no step
    /// taken `A' = A` and equality is required instead.
    pub energy_bound_holds: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub rho: f64,
}

/// Removes violating subsets `C ⊆ A^i` with `β₁|A^i| <= |C| <= β₂|A^i|` and
/// `E_q(C, A^i) < ρ μ(C) E_q(A^i)`, always the first violator in mask order,
/// until none is left.
pub fn extract_connected_subset(
    a: &GSet,
    q: &WeightKernel,
    beta1: f64,
    beta2: f64,
    rho: f64,
) -> Result<Extraction> {
    check_exhaustive(a, MAX_EXHAUSTIVE_N)?;
    same_group(a.group(), q.group())?;
    if !(0.0 < beta1 && beta1 <= beta2 && beta2 <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < β₁ <= β₂ <= 1, got β₁ = {beta1}, β₂ = {beta2}"
        )));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidArgument(format!("ρ = {rho} outside (0, 1]")));
    }
    if rho * beta2 >= beta1 {
        return Err(Error::InvalidArgument(format!(
            "ρ = {rho} must be below β₁/β₂ = {}",
            beta1 / beta2
        )));
    }
    let eq = |s: &GSet| crate::energy::weighted_energy_f64(s, s, q);
    let eq_initial = eq(a);
    if eq_initial <= 0.0 {
        return Err(Error::Precondition("E_q(A) must be positive".into()));
    }
    let mut cur = a.clone();
    let mut removed = Vec::new();
    loop {
        let el = cur.to_vec();
        let n = el.len();
        let rows = q.row_sums(&cur);
        let r: Vec<f64> = el.iter().map(|&x| rows[x]).collect();
        let total: f64 = r.iter().sum();
        let lo = ((beta1 * n as f64 - 1e-9).ceil() as u32).max(1);
        let hi = (beta2 * n as f64 + 1e-9).floor() as u32;
        let violator = (1u64..1 << n).find(|&m| {
            let len = m.count_ones();
            if len < lo || len > hi {
                return false;
            }
            let mut sum = 0.0;
            let mut rest = m;
            while rest != 0 {
                sum += r[rest.trailing_zeros() as usize];
                rest &= rest - 1;
            }
            sum * (n as f64) < rho * len as f64 * total
        });
        match violator {
            None => break,
            Some(m) => {
                let c = mask_set(&cur, &el, m);
                cur = cur.difference(&c);
                removed.push(c);
            }
        }
    }
    let steps = removed.len();
    let eq_final = eq(&cur);
    let c = eq_initial / ((a.len() * a.len()) as f64 * q.sup_norm());
    let denom = 2.0 * ((1.0 - beta2 * rho) / (1.0 - beta1)).ln();
    let step_bound = if c >= 1.0 || denom.is_infinite() {
        0.0
    } else {
        ((1.0 / c).ln() / denom).ceil()
    };
    let factor = BigRational::one() - float_rational(beta2)? * float_rational(rho)?;
    let lhs = float_rational(eq_final)?;
    let rhs = num_traits::pow(factor, 2 * steps) * float_rational(eq_initial)?;
    Ok(Extraction {
        aprime: cur,
        steps,
        removed,
        c,
        step_bound,
        eq_initial,
        eq_final,
        energy_bound_holds: if steps == 0 { lhs == rhs } else { lhs > rhs },
        beta1,
        beta2,
        rho,
    })
}

/// Extraction with `q(x,y) = (A o A)^{k-1}(x-y)`, `β₁ = β`, `β₂ = 1`,
/// `ρ = β/2`; the result is `(k, β, γ)`-connected for [`implied_gamma`].
pub fn extract_connected_k(a: &GSet, k: u32, beta: f64) -> Result<Extraction> {
    if k < 2 {
        return Err(Error::InvalidArgument("k must be at least 2".into()));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!("β = {beta} outside (0, 1)")));
    }
    let q = WeightKernel::correlation_power(a, k - 1);
    extract_connected_subset(a, &q, beta, 1.0, beta / 2.0)
}

/// `2^{-(2sk+2k-2s)} β^{2k} (2-β)^{2s(k-1)}`.
pub fn implied_gamma(k: u32, beta: f64, steps: usize) -> f64 {
    let (k, s) = (k as f64, steps as f64);
    (-(2.0 * s * k + 2.0 * k - 2.0 * s) * std::f64::consts::LN_2
        + 2.0 * k * beta.ln()
        + 2.0 * s * (k - 1.0) * (2.0 - beta).ln())
    .exp()
}

/// Whether `E_q(Ã) >= ρ^2 μ(Ã)^2 E_q(A')` for every `Ã ⊆ A'` with
/// `β₁|A'| <= |Ã| <= β₂|A'|`, by exhaustive enumeration.
pub fn connected_ab_holds(
    aprime: &GSet,
    q: &WeightKernel,
    beta1: f64,
    beta2: f64,
    rho: f64,
) -> Result<bool> {
    check_exhaustive(aprime, MAX_ORACLE_N)?;
    let el = aprime.to_vec();
    let n = el.len();
    let qm: Vec<f64> = el
        .iter()
        .flat_map(|&x| el.iter().map(move |&y| (x, y)))
        .map(|(x, y)| q.at(x, y))
        .collect();
    let full: f64 = qm.iter().sum();
    let lo = ((beta1 * n as f64 - 1e-9).ceil() as u32).max(1);
    let hi = (beta2 * n as f64 + 1e-9).floor() as u32;
    let tol = 1e-9 * full.max(1.0);
    let mut rows = vec![0.0f64; n];
    let mut mask = 0u64;
    let mut e = 0.0f64;
    for i in 1u64..1 << n {
        let j = i.trailing_zeros() as usize;
        let adding = mask >> j & 1 == 0;
        let sign = if adding { 1.0 } else { -1.0 };
        if adding {
            e += 2.0 * rows[j] + qm[j * n + j];
            mask |= 1 << j;
        } else {
            mask &= !(1 << j);
            e -= 2.0 * rows[j] - qm[j * n + j];
        }
        for (x, row) in rows.iter_mut().enumerate() {
            *row += sign * qm[x * n + j];
        }
        let len = mask.count_ones();
        if len >= lo && len <= hi {
            let mu = len as f64 / n as f64;
            if e < rho * rho * mu * mu * full - tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Clone, Debug)]
pub struct SliceScan {
    pub shift: Option<usize>,
    pub ratio: f64,
    /// Number of shifts meeting the size requirement.
    pub qualifying: usize,
}

/// Minimizes `E(A_s)/|A_s|^3` over `s != 0` with `|A_s| >= |A|/(2K)`,
/// `K = |A|^3/E(A)`; ties go to the smallest shift.
pub fn min_slice_energy_ratio(a: &GSet) -> Result<SliceScan> {
    if a.is_empty() {
        return Err(Error::InvalidArgument("A must be nonempty".into()));
    }
    let e = energy(a);
    let counts = correlation_counts(a, a)?;
    let n2 = big(a.len()) * big(a.len());
    let mut best: Option<(BigRational, usize)> = None;
    let mut qualifying = 0;
    for (s, &c) in counts.iter().enumerate().skip(1) {
        if c == 0 || BigInt::from(2 * c) * &n2 < e {
            continue;
        }
        qualifying += 1;
        let r = ratio(energy(&self_slice(a, s)), BigInt::from(c).pow(3));
        if best.as_ref().is_none_or(|(b, _)| &r < b) {
            best = Some((r, s));
        }
    }
    Ok(match best {
        Some((r, s)) => SliceScan {
            shift: Some(s),
            ratio: rational_f64(&r),
            qualifying,
        },
        None => SliceScan {
            shift: None,
            ratio: f64::NAN,
            qualifying: 0,
        },
    })
}

#[derive(Clone, Debug)]
pub struct DoublingOracle {
    pub subset: GSet,
    pub difference_size: usize,
    pub doubling: f64,
}

/// Exhaustive minimum of `|A'-A'|/|A'|` over `A' ⊆ A`, `|A'| >= minFrac|A|`.
pub fn small_doubling_subset_oracle(a: &GSet, min_frac: f64) -> Result<DoublingOracle> {
    check_exhaustive(a, MAX_ORACLE_N)?;
    let el = a.to_vec();
    let n = el.len();
    let min_len = min_subset_len(min_frac, n)?;
    let g = a.group().clone();
    let best = (1u64..1 << n)
        .into_par_iter()
        .filter(|m| m.count_ones() as usize >= min_len)
        .map_init(
            || vec![0u64; g.size().div_ceil(64)],
            |seen, m| {
                seen.iter_mut().for_each(|w| *w = 0);
                let idx: Vec<usize> = (0..n).filter(|&i| m >> i & 1 == 1).map(|i| el[i]).collect();
                let mut size = 0usize;
                for &x in &idx {
                    for &y in &idx {
                        let d = g.sub_idx(x, y);
                        if seen[d / 64] >> (d % 64) & 1 == 0 {
                            seen[d / 64] |= 1 << (d % 64);
                            size += 1;
                        }
                    }
                }
                (size, idx.len(), m)
            },
        )
        .reduce_with(|x, y| match (x.0 * y.1).cmp(&(y.0 * x.1)) {
            std::cmp::Ordering::Less => x,
            std::cmp::Ordering::Greater => y,
            std::cmp::Ordering::Equal => {
                if x.2 < y.2 {
                    x
                } else {
                    y
                }
            }
        })
        .ok_or_else(|| Error::InvalidArgument("no subset meets the size bound".into()))?;
    Ok(DoublingOracle {
        subset: mask_set(a, &el, best.2),
        difference_size: best.0,
        doubling: best.0 as f64 / best.1 as f64,
    })
}

/// `sum_x (A o A)(x) (f o f)(x)` for an integer function `f`.
pub fn energy_with_function(a: &GSet, f: &[i64]) -> Result<BigInt> {
    let g = a.group();
    if f.len() != g.size() {
        return Err(Error::SizeMismatch {
            expected: g.size(),
            got: f.len(),
        });
    }
    let fd = crate::setfun::DenseFunc::from_ints(g, f.iter().map(|&v| v as i128).collect())?;
    let ff = correlate(&fd, &fd)?;
    let aa = correlation_counts(a, a)?;
    let mut total = BigInt::zero();
    for (x, &c) in aa.iter().enumerate() {
        if c != 0 {
            total += ff.exact_at(x).expect("integer valued") * c;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructors::{arithmetic_progression, coset_union, random_set, subspace};
    use crate::group::{boolean_cube, cyclic};
    use proptest::prelude::*;

    fn z7() -> GSet {
        GSet::from_indices(&cyclic(7).unwrap(), [0, 1, 2]).unwrap()
    }

    fn set(g: &crate::group::Group, idx: &[usize]) -> GSet {
        GSet::from_indices(g, idx.iter().copied()).unwrap()
    }

    #[test]
    fn translates_examples() {
        let z5 = cyclic(5).unwrap();
        let f = greedy_disjoint_translates(&set(&z5, &[0]), &set(&z5, &[0])).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.members[0].set.to_vec(), vec![0]);
        assert!(f.audit().passed());

        let a = z7();
        let b = set(a.group(), &[0, 3]);
        let f = greedy_disjoint_translates(&a, &b).unwrap();
        let got: Vec<Vec<usize>> = f.members.iter().map(|m| m.set.to_vec()).collect();
        assert_eq!(got, vec![vec![0, 1, 2], vec![3, 4, 5]]);
        assert_eq!(f.bound, ratio(12.into(), 96.into()));
        assert!(f.audit().passed());

        let h = subspace(4, 2).unwrap();
        let f = greedy_disjoint_translates(&h, &h).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.bound, ratio(1.into(), 16.into()));
        assert!(f.audit().passed());
        assert!(greedy_disjoint_translates(&h, &GSet::empty(h.group())).is_err());
    }

    #[test]
    fn in_target_examples() {
        let h = subspace(5, 5).unwrap();
        let s = sumset_of(&h, &h);
        let f = greedy_disjoint_in_target(&h, &h, &s).unwrap();
        assert!(!f.is_empty());
        assert!(f.members.iter().all(|m| m.set.is_subset(&h)));
        assert!(f.audit().passed());

        let a = z7();
        let err = greedy_disjoint_in_target(&a, &a, &sumset_of(&a, &a));
        assert!(matches!(err, Err(Error::Precondition(_))));

        let z = cyclic(101).unwrap();
        let a = random_set(&z, 0.5, 42).unwrap();
        let b0 = a.iter().next().unwrap();
        let target = a.translate(b0);
        let f = greedy_disjoint_in_target(&a, &a, &target).unwrap();
        assert!(!f.is_empty());
        assert!(f.members.iter().all(|m| m.set.is_subset(&target)));
        assert!(f.audit().passed());
    }

    fn sumset_of(a: &GSet, b: &GSet) -> GSet {
        crate::setfun::sumset(a, b).unwrap()
    }

    #[test]
    fn slices_examples() {
        let a = z7();
        let d = difference_set(&a, &a).unwrap();
        let f = greedy_disjoint_slices(&a, &d).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.members[0].tag, Tag::Shift(2));
        assert_eq!(f.bound, ratio(25.into(), 76.into()));
        assert!(f.audit().passed());

        let h = subspace(4, 2).unwrap();
        let f = greedy_disjoint_slices(&h, &h).unwrap();
        assert_eq!(f.len(), 1);
        assert!(f.audit().passed());

        let g = boolean_cube(4).unwrap();
        let two = set(&g, &[0, 1, 2, 3, 4, 5, 6, 7])
            .difference(&set(&g, &[4, 5, 6, 7]))
            .union(&set(&g, &[12, 13, 14, 15]));
        let d = difference_set(&two, &two).unwrap();
        let f = greedy_disjoint_slices(&two, &d).unwrap();
        assert!(!f.is_empty());
        assert!(f.audit().passed());

        assert!(greedy_disjoint_slices(&a, &GSet::empty(a.group())).is_err());
        assert!(greedy_disjoint_slices(&a, &set(a.group(), &[3])).is_err());
    }

    #[test]
    fn random_family_examples() {
        let z = cyclic(7).unwrap();
        let ms = vec![set(&z, &[0, 1]), set(&z, &[1, 2]), set(&z, &[0, 2])];
        assert!(matches!(
            random_disjoint_family(&ms, 2, 1.0, 1),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            random_disjoint_family(&ms, 3, 1.0, 1),
            Err(Error::Precondition(_))
        ));

        let g = cyclic(1 << 15).unwrap();
        let singles: Vec<GSet> = (0..10_000).map(|i| set(&g, &[i])).collect();
        let f = random_disjoint_family(&singles, 1, 1.0, 7).unwrap();
        assert_eq!(f.bound, ratio(100_000_000.into(), 480_000.into()));
        assert!(f.len() >= 209);
        assert!(f.audit().passed());
        let again = random_disjoint_family(&singles, 1, 1.0, 7).unwrap();
        let tags = |f: &DisjointFamily| f.members.iter().map(|m| m.tag.clone()).collect::<Vec<_>>();
        assert_eq!(tags(&f), tags(&again));
    }

    #[test]
    fn random_family_overlapping_sources() {
        let g = cyclic(1 << 16).unwrap();
        // 20000 sets of size 2 or 3 on a sparse window with light overlaps
        let ms: Vec<GSet> = (0..20_000)
            .map(|i| {
                let base = 3 * i;
                if i % 5 == 0 {
                    set(&g, &[base, base + 1, base + 3])
                } else {
                    set(&g, &[base, base + 1])
                }
            })
            .collect();
        let f = random_disjoint_family(&ms, 2, 1.5, 11).unwrap();
        assert!(f.audit().passed());
        assert!(f.members.iter().all(|m| !m.set.is_empty()));
    }

    fn brute_cubic(a: &GSet, x: usize) -> u64 {
        let g = a.group();
        let mut total = 0;
        for y in 0..g.size() {
            if !a.contains(g.add_idx(y, x)) {
                continue;
            }
            for p in a.iter() {
                if a.contains(g.sub_idx(y, p)) {
                    total += 1;
                }
            }
        }
        total
    }

    #[test]
    fn regular_part_examples() {
        let h = subspace(5, 3).unwrap();
        assert_eq!(regular_part(&h).unwrap(), h);
        let a = z7();
        let prof = cubic_profile(&a);
        assert_eq!(prof[0..3], [6.into(), 3.into(), 1.into()]);
        assert_eq!(regular_part(&a).unwrap(), a);
        let z = cyclic(101).unwrap();
        let r = random_set(&z, 0.2, 42).unwrap();
        let r20 = GSet::from_indices(&z, r.iter().take(20)).unwrap();
        assert_eq!(r20.len(), 20);
        for a in [r, r20] {
            let p = regular_part(&a).unwrap();
            assert!(2 * p.len() >= a.len());
            let prof = cubic_profile(&a);
            for (x, v) in prof.iter().enumerate() {
                assert_eq!(*v, BigInt::from(brute_cubic(&a, x)));
            }
        }
    }

    fn brute_gamma(a: &GSet, alpha: f64, beta: f64) -> f64 {
        let el = a.to_vec();
        let n = el.len();
        let min_len = min_subset_len(beta, n).unwrap();
        let ea = crate::energy::energy_k(a, alpha).unwrap().as_f64();
        (1u64..1 << n)
            .filter(|m| m.count_ones() as usize >= min_len)
            .map(|m| {
                let b = mask_set(a, &el, m);
                let eb = crate::energy::energy_k(&b, alpha).unwrap().as_f64();
                eb / ea * (n as f64 / b.len() as f64).powf(2.0 * alpha)
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn connectedness_examples() {
        let full = subspace(2, 2).unwrap();
        let c = connectedness_gamma(&full, 2.0, 0.5).unwrap();
        assert_eq!(c.gamma, 1.0);
        assert_eq!(c.witness, full);
        let a = z7();
        let c = connectedness_gamma(&a, 2.0, 0.9).unwrap();
        assert_eq!((c.gamma, c.witness.clone()), (1.0, a.clone()));
        let c = connectedness_gamma(&a, 2.0, 2.0 / 3.0).unwrap();
        assert!((c.gamma - brute_gamma(&a, 2.0, 2.0 / 3.0)).abs() < 1e-12);
        // every pair has E = 6 and ratio 6·(3/2)^4/19 > 1
        assert_eq!(c.gamma, 1.0);
        assert_eq!(c.witness, a);

        let u = gowers_connectedness_gamma(&full, 2, 0.5).unwrap();
        assert_eq!(u.gamma, connectedness_gamma(&full, 2.0, 0.5).unwrap().gamma);
        let u = gowers_connectedness_gamma(&a, 3, 2.0 / 3.0).unwrap();
        assert!(u.gamma <= 1.0);
        let u2 = gowers_connectedness_gamma(&a, 2, 2.0 / 3.0).unwrap();
        assert!((u2.gamma - c.gamma).abs() < 1e-12);
        assert!(connectedness_gamma(&GSet::full(&cyclic(23).unwrap()), 2.0, 0.5).is_err());
    }

    #[test]
    fn subgroups_are_connected() {
        for (n, dim) in [(3, 2), (4, 3), (5, 4)] {
            let h = subspace(n, dim).unwrap();
            for beta in [0.5, 0.75, 1.0] {
                let c = connectedness_gamma(&h, 2.0, beta).unwrap();
                assert!(c.gamma > 0.0 && c.gamma <= 1.0);
            }
        }
        let h = subspace(3, 2).unwrap();
        assert_eq!(connectedness_gamma(&h, 2.0, 0.5).unwrap().gamma, 1.0);
    }

    #[test]
    fn extraction_examples() {
        let h = subspace(4, 3).unwrap();
        let x = extract_connected_k(&h, 2, 0.5).unwrap();
        assert_eq!(x.aprime, h);
        assert_eq!(x.steps, 0);
        assert!(x.energy_bound_holds);

        let a = z7();
        let q = WeightKernel::correlation_power(&a, 1);
        let x = extract_connected_subset(&a, &q, 1.0, 1.0, 0.5).unwrap();
        assert!(!x.aprime.is_empty());
        assert!(extract_connected_subset(&a, &q, 0.2, 0.4, 0.5).is_err());

        let z = cyclic(101).unwrap();
        let mut idx: Vec<usize> = (0..9).collect();
        idx.push(60);
        let a = GSet::from_indices(&z, idx).unwrap();
        let q = WeightKernel::correlation_power(&a, 1);
        let x = extract_connected_subset(&a, &q, 0.1, 0.2, 0.4).unwrap();
        assert!(x.energy_bound_holds);
        assert!(x.steps as f64 <= x.step_bound);
        assert!(connected_ab_holds(&x.aprime, &q, 0.1, 0.2, 0.4).unwrap());
    }

    #[test]
    fn implied_gamma_formula() {
        let direct = |k: f64, b: f64, s: f64| {
            2f64.powf(-(2.0 * s * k + 2.0 * k - 2.0 * s))
                * b.powf(2.0 * k)
                * (2.0 - b).powf(2.0 * s * (k - 1.0))
        };
        for (k, b, s) in [(2, 0.5, 0), (3, 0.25, 2), (2, 0.9, 5)] {
            let v = implied_gamma(k, b, s);
            assert!((v / direct(k as f64, b, s as f64) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn slice_scan_examples() {
        let h = subspace(5, 3).unwrap();
        let s = min_slice_energy_ratio(&h).unwrap();
        assert_eq!(s.ratio, 1.0);
        let z = cyclic(101).unwrap();
        let r = random_set(&z, 0.25, 42).unwrap();
        let s = min_slice_energy_ratio(&r).unwrap();
        assert!(s.ratio < 0.5 && s.shift.is_some());
        let hl = crate::constructors::h_plus_lambda(6, 2, 4).unwrap();
        let s = min_slice_energy_ratio(&hl).unwrap();
        assert!(s.ratio > 0.0 && s.ratio <= 1.0);
        let single = set(&z, &[5]);
        assert!(min_slice_energy_ratio(&single).unwrap().shift.is_none());
    }

    fn brute_min_doubling(a: &GSet, min_frac: f64) -> (usize, usize) {
        let el = a.to_vec();
        let min_len = min_subset_len(min_frac, el.len()).unwrap();
        (1u64..1 << el.len())
            .filter(|m| m.count_ones() as usize >= min_len)
            .map(|m| {
                let b = mask_set(a, &el, m);
                (difference_set(&b, &b).unwrap().len(), b.len())
            })
            .min_by(|x, y| (x.0 * y.1).cmp(&(y.0 * x.1)))
            .unwrap()
    }

    #[test]
    fn oracle_examples() {
        let g = boolean_cube(4).unwrap();
        let a = set(&g, &[0, 1, 2, 3, 4]);
        let o = small_doubling_subset_oracle(&a, 0.5).unwrap();
        assert_eq!(o.subset.to_vec(), vec![0, 1, 2, 3]);
        assert_eq!(o.doubling, 1.0);
        let ap = arithmetic_progression(101, 0, 1, 8).unwrap();
        let o = small_doubling_subset_oracle(&ap, 1.0).unwrap();
        assert_eq!(o.doubling, 15.0 / 8.0);
        let z = cyclic(101).unwrap();
        let r = random_set(&z, 0.1, 3).unwrap();
        let r10 = GSet::from_indices(&z, r.iter().take(10)).unwrap();
        let o = small_doubling_subset_oracle(&r10, 0.5).unwrap();
        let (d, n) = brute_min_doubling(&r10, 0.5);
        assert_eq!(o.difference_size * n, d * o.subset.len());
        let recount = difference_set(&o.subset, &o.subset).unwrap().len();
        assert_eq!(recount, o.difference_size);
        assert!(small_doubling_subset_oracle(&GSet::full(&cyclic(19).unwrap()), 0.5).is_err());
    }

    #[test]
    fn coset_union_slices_family() {
        let u = coset_union(6, &[2, 2, 2]).unwrap();
        let d = difference_set(&u, &u).unwrap();
        let f = greedy_disjoint_slices(&u, &d).unwrap();
        assert!(f.audit().passed());
        let json = f.to_json();
        assert_eq!(json["algorithm"], "slices");
        assert_eq!(json["count"], f.len().to_string());
    }

    fn arb_small() -> impl Strategy<Value = GSet> {
        prop_oneof![
            proptest::collection::btree_set(0usize..31, 1..9)
                .prop_map(|s| { GSet::from_indices(&cyclic(31).unwrap(), s).unwrap() }),
            proptest::collection::btree_set(0usize..32, 1..9)
                .prop_map(|s| { GSet::from_indices(&boolean_cube(5).unwrap(), s).unwrap() }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn gamma_matches_brute_force(a in arb_small(), beta in 0.0f64..1.0, alpha in prop_oneof![Just(2.0), Just(3.0), Just(1.5)]) {
            let c = connectedness_gamma(&a, alpha, beta).unwrap();
            let brute = brute_gamma(&a, alpha, beta);
            prop_assert!((c.gamma - brute).abs() <= 1e-9 * brute.max(1.0));
            prop_assert!(c.gamma <= 1.0 + 1e-12);
            prop_assert!(c.witness.len() as f64 >= beta * a.len() as f64 - 1e-9);
        }

        #[test]
        fn families_pass_audit(a in arb_small(), b in arb_small()) {
            prop_assume!(a.group() == b.group());
            prop_assert!(greedy_disjoint_translates(&a, &b).unwrap().audit().passed());
            let d = difference_set(&a, &a).unwrap();
            prop_assert!(greedy_disjoint_slices(&a, &d).unwrap().audit().passed());
            let s = sumset_of(&a, &b);
            if let Ok(f) = greedy_disjoint_in_target(&a, &b, &s) {
                prop_assert!(f.audit().passed());
            }
            let r = regular_part(&a).unwrap();
            prop_assert!(2 * r.len() >= a.len());
        }

        #[test]
        fn connected_audit_matches_brute_force(a in arb_small(), b1 in 0.1f64..0.6, rho in 0.3f64..1.0) {
            let q = WeightKernel::correlation_power(&a, 1);
            let el = a.to_vec();
            let n = el.len();
            let full = crate::energy::weighted_energy_f64(&a, &a, &q);
            let lo = ((b1 * n as f64 - 1e-9).ceil() as u32).max(1);
            let brute = (1u64..1 << n).filter(|m| m.count_ones() >= lo).all(|m| {
                let t = mask_set(&a, &el, m);
                let mu = t.len() as f64 / n as f64;
                crate::energy::weighted_energy_f64(&t, &t, &q) >= rho * rho * mu * mu * full - 1e-9
            });
            prop_assert_eq!(connected_ab_holds(&a, &q, b1, 1.0, rho).unwrap(), brute);
        }

        #[test]
        fn extraction_guarantees(a in arb_small(), k in 2u32..4, beta in 0.2f64..0.8) {
            let x = extract_connected_k(&a, k, beta).unwrap();
            prop_assert!(x.energy_bound_holds);
            prop_assert!(x.steps as f64 <= x.step_bound);
            let q = WeightKernel::correlation_power(&a, k - 1);
            prop_assert!(connected_ab_holds(&x.aprime, &q, beta, 1.0, beta / 2.0).unwrap());
            let g = connectedness_gamma(&x.aprime, k as f64, beta).unwrap();
            prop_assert!(g.gamma >= implied_gamma(k, beta, x.steps) * (1.0 - 1e-12));
        }
    }
}
