//! Unnormalized projected Gowers norms `‖A‖_{U^d}` computed through the
//! slice recursion `‖A‖_{U^d} = sum_h ‖A_h‖_{U^{d-1}}`, `‖B‖_{U^1} = |B|^2`.

use num_bigint::BigInt;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::{big_pow, ipow, ln_big, ExactSum};
use crate::group::GroupSpec;
use crate::setfun::{same_group, GSet, SliceBuckets};

pub const MAX_GOWERS_D: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct GowersValue {
    pub count: BigInt,
    pub d: usize,
    /// `(count / N^{d+1})^{1/2^d}`
    pub normalized: f64,
}

/// `(count / N^{d+1})^{1/2^d}`, evaluated in log space.
pub fn normalize(count: &BigInt, n: usize, d: usize) -> f64 {
    if count.sign() == num_bigint::Sign::NoSign {
        return 0.0;
    }
    let log = ln_big(count) - (d as f64 + 1.0) * (n as f64).ln();
    (log / 2f64.powi(d as i32)).exp()
}

fn check_d(d: usize) -> Result<()> {
    if d == 0 || d > MAX_GOWERS_D {
        Err(Error::InvalidArgument(format!(
            "d = {d} outside 1..={MAX_GOWERS_D}"
        )))
    } else {
        Ok(())
    }
}

/// `‖A‖_{U^1}, ..., ‖A‖_{U^{d_max}}` from a single traversal of the slice tree.
pub fn gowers_profile(a: &GSet, d_max: usize) -> Result<Vec<BigInt>> {
    check_d(d_max)?;
    let g = a.group().clone();
    let el = a.to_u32();
    let mut totals: Vec<ExactSum> = vec![ExactSum::new(); d_max];
    totals[0].add_pow(el.len() as i128, 2);
    if d_max >= 2 && !el.is_empty() {
        let mut top = SliceBuckets::new(g.size());
        if d_max == 2 {
            top.count(&g, &el, &el);
            for c in top.sizes() {
                totals[1].add_pow(c as i128, 2);
            }
        } else {
            top.fill(&g, &el, &el);
            let children: Vec<&[u32]> = top.buckets().map(|(_, b)| b).collect();
            let parts: Vec<Vec<ExactSum>> = children
                .par_iter()
                .map_init(
                    || {
                        (0..d_max - 2)
                            .map(|_| SliceBuckets::new(g.size()))
                            .collect::<Vec<_>>()
                    },
                    |scratch, child| {
                        let mut local = vec![ExactSum::new(); d_max];
                        descend(&g, child, 1, d_max, scratch, &mut local);
                        local
                    },
                )
                .collect();
            for part in parts {
                for (t, p) in totals.iter_mut().zip(part) {
                    t.add_big(&p.value());
                }
            }
        }
    }
    Ok(totals.iter().map(ExactSum::value).collect())
}

/// A node at `depth` contributes `|node|^2` to `U^{depth+1}`.
fn descend(
    g: &GroupSpec,
    node: &[u32],
    depth: usize,
    d_max: usize,
    scratch: &mut [SliceBuckets],
    totals: &mut [ExactSum],
) {
    totals[depth].add_pow(node.len() as i128, 2);
    if depth + 1 == d_max {
        return;
    }
    let (head, rest) = scratch.split_first_mut().expect("scratch depth");
    if depth + 2 == d_max {
        head.count(g, node, node);
        for c in head.sizes() {
            totals[depth + 1].add_pow(c as i128, 2);
        }
        return;
    }
    head.fill(g, node, node);
    for (_, child) in head.buckets() {
        descend(g, child, depth + 1, d_max, rest, totals);
    }
}

pub fn gowers_u(a: &GSet, d: usize) -> Result<GowersValue> {
    let profile = gowers_profile(a, d)?;
    let count = profile[d - 1].clone();
    Ok(GowersValue {
        normalized: normalize(&count, a.group().size(), d),
        count,
        d,
    })
}

/// `sum_{s_1..s_d} |A_{π(s_1..s_d)}|`: the cube count summed linearly over
/// depth-`d` slices, each built by explicit intersection. Small groups only.
pub fn gowers_u_linear_form(a: &GSet, d: usize) -> Result<BigInt> {
    check_d(d)?;
    let mut total = ExactSum::new();
    linear_rec(a, d, &mut total);
    Ok(total.value())
}

fn linear_rec(node: &GSet, remaining: usize, total: &mut ExactSum) {
    if remaining == 0 {
        total.add(node.len() as i128);
        return;
    }
    let g = node.group();
    for h in 0..g.size() {
        let child = crate::setfun::self_slice(node, h);
        if !child.is_empty() {
            linear_rec(&child, remaining - 1, total);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairU3 {
    /// `sum_{s1,s2} (sum_x A(x)B(x+s1)A(x+s2)B(x+s1+s2))^2`
    pub value: BigInt,
    /// Set when `A` or `B` is empty; the lower bound is then vacuous.
    pub vacuous: bool,
}

/// The two-set `U^3` quantity; equals `sum_{s} E(A ∩ (B - s))`.
pub fn gowers_pair_u3(a: &GSet, b: &GSet) -> Result<PairU3> {
    same_group(a.group(), b.group())?;
    if a.is_empty() || b.is_empty() {
        return Ok(PairU3 {
            value: BigInt::from(0),
            vacuous: true,
        });
    }
    let g = a.group().clone();
    let (ea, eb) = (a.to_u32(), b.to_u32());
    let mut top = SliceBuckets::new(g.size());
    top.fill(&g, &ea, &eb);
    let mut inner = SliceBuckets::new(g.size());
    let mut total = ExactSum::new();
    for (_, c) in top.buckets() {
        inner.count(&g, c, c);
        for m in inner.sizes() {
            total.add_pow(m as i128, 2);
        }
    }
    Ok(PairU3 {
        value: total.value(),
        vacuous: false,
    })
}

/// Whether `value >= E(A,B)^4 / (|A|^4 |B|^4)`, compared exactly.
pub fn pair_u3_bound_holds(a: &GSet, b: &GSet, v: &PairU3) -> bool {
    if v.vacuous {
        return true;
    }
    let e = crate::energy::energy_pair(a, b);
    let lhs = &v.value * ipow(a.len() as i128, 4) * ipow(b.len() as i128, 4);
    lhs >= big_pow(&e, 4)
}

/// Normalized monotonicity between `U^{d-1}` and `U^d`, i.e.
/// `(U^{d-1})^2 <= U^d N^{d-1}` after clearing roots.
pub fn gowers_normalized_monotonicity(a: &GSet, d: usize) -> Result<bool> {
    if d < 2 {
        return Err(Error::InvalidArgument("d must be at least 2".into()));
    }
    let p = gowers_profile(a, d)?;
    Ok(monotone_from_profile(&p, a.group().size(), d))
}

pub(crate) fn monotone_from_profile(p: &[BigInt], n: usize, d: usize) -> bool {
    let lower = &p[d - 2];
    let upper = &p[d - 1];
    lower * lower <= upper * ipow(n as i128, d as u32 - 1)
}
