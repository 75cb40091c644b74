//! Instance generators: subspaces, dissociated sets, `H ⊕ Λ`, arithmetic
//! progressions, seeded random sets and unions of subspaces on disjoint
//! coordinate blocks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{boolean_cube, cyclic, make_group, Group};
use crate::setfun::GSet;

/// Largest set accepted by [`is_dissociated`].
pub const MAX_DISSOCIATED_LEN: usize = 24;

/// Span of the first `dim` basis vectors of `F_2^n`.
pub fn subspace(n: usize, dim: usize) -> Result<GSet> {
    if dim > n {
        return Err(Error::InvalidArgument(format!("dim {dim} > n {n}")));
    }
    let g = boolean_cube(n)?;
    GSet::from_indices(&g, 0..1usize << dim)
}

/// Whether all `2^|L|` subset sums of `L` are distinct.
pub fn is_dissociated(l: &GSet) -> Result<bool> {
    if l.len() > MAX_DISSOCIATED_LEN {
        return Err(Error::CapExceeded(format!(
            "|L| = {} exceeds {MAX_DISSOCIATED_LEN}",
            l.len()
        )));
    }
    let g = l.group();
    let el = l.to_vec();
    if (1u128 << el.len()) > g.size() as u128 {
        return Ok(false);
    }
    let mut seen = vec![false; g.size()];
    seen[0] = true;
    // walk subsets in Gray-code order, one element toggled per step
    let mut sum = 0usize;
    let mut mask = 0u32;
    for i in 1u32..1 << el.len() {
        let bit = i.trailing_zeros() as usize;
        if mask >> bit & 1 == 1 {
            sum = g.sub_idx(sum, el[bit]);
        } else {
            sum = g.add_idx(sum, el[bit]);
        }
        mask ^= 1 << bit;
        if seen[sum] {
            return Ok(false);
        }
        seen[sum] = true;
    }
    Ok(true)
}

/// `Λ = {0, e_{dim+1}, ..., e_{dim+K-1}}` in `F_2^n`.
pub fn lambda_set(n: usize, dim: usize, k: usize) -> Result<GSet> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    if dim + k - 1 > n {
        return Err(Error::InvalidArgument(format!(
            "dim + K - 1 = {} exceeds n = {n}",
            dim + k - 1
        )));
    }
    let g = boolean_cube(n)?;
    GSet::from_indices(
        &g,
        std::iter::once(0).chain((dim..dim + k - 1).map(|i| 1 << i)),
    )
}

/// `A = H ⊕ Λ` with `H` the span of the first `dim` basis vectors and `|Λ| = K`.
pub fn h_plus_lambda(n: usize, dim: usize, k: usize) -> Result<GSet> {
    let h = subspace(n, dim)?;
    let lambda = lambda_set(n, dim, k)?;
    let g = h.group().clone();
    let mut idx = Vec::with_capacity(h.len() * lambda.len());
    for x in h.iter() {
        for l in lambda.iter() {
            idx.push(g.add_idx(x, l));
        }
    }
    let a = GSet::from_indices(&g, idx)?;
    if a.len() != h.len() * lambda.len() {
        return Err(Error::Precondition(format!(
            "sum is not direct: |A| = {} != |H||Λ| = {}",
            a.len(),
            h.len() * lambda.len()
        )));
    }
    Ok(a)
}

/// `{start + i·step mod N : 0 <= i < len}` in `Z_N`.
pub fn arithmetic_progression(n: usize, start: usize, step: usize, len: usize) -> Result<GSet> {
    if len == 0 {
        return Err(Error::InvalidArgument("len must be positive".into()));
    }
    let g = cyclic(n)?;
    let (start, step) = (start % n, step % n);
    let mut x = start;
    let mut idx = Vec::with_capacity(len);
    for _ in 0..len {
        idx.push(x);
        x = (x + step) % n;
    }
    GSet::from_indices(&g, idx)
}

/// Each element kept independently with probability `density`.
pub fn random_set(g: &Group, density: f64, seed: u64) -> Result<GSet> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "density {density} outside (0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep: Vec<usize> = (0..g.size())
        .filter(|_| rng.random::<f64>() < density)
        .collect();
    GSet::from_indices(g, keep)
}

/// Union of subspaces of the given dimensions on consecutive disjoint
/// coordinate blocks of `F_2^n`; any two meet only in `0`.
pub fn coset_union(n: usize, dims: &[usize]) -> Result<GSet> {
    let total: usize = dims.iter().sum();
    if total > n {
        return Err(Error::InvalidArgument(format!(
            "blocks use {total} coordinates but n = {n}"
        )));
    }
    let g = boolean_cube(n)?;
    let mut idx = Vec::new();
    let mut offset = 0;
    for &d in dims {
        idx.extend((0..1usize << d).map(|v| v << offset));
        offset += d;
    }
    GSet::from_indices(&g, idx)
}

/// A serializable description of one generated instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
pub enum InstanceSpec {
    Subspace {
        n: usize,
        dim: usize,
    },
    /// The first `k` basis vectors of `F_2^n`.
    Dissociated {
        n: usize,
        k: usize,
    },
    Hplusl {
        n: usize,
        dim: usize,
        k: usize,
    },
    Ap {
        n: usize,
        start: usize,
        step: usize,
        len: usize,
    },
    Random {
        group: Vec<usize>,
        density: f64,
        seed: u64,
    },
    CosetUnion {
        n: usize,
        dims: Vec<usize>,
    },
}

impl InstanceSpec {
    /// Generates the set and checks its defining predicate.
    pub fn build(&self) -> Result<GSet> {
        let a = match self {
            InstanceSpec::Subspace { n, dim } => subspace(*n, *dim)?,
            InstanceSpec::Dissociated { n, k } => {
                if k > n {
                    return Err(Error::InvalidArgument(format!("k {k} > n {n}")));
                }
                GSet::from_indices(&boolean_cube(*n)?, (0..*k).map(|i| 1usize << i))?
            }
            InstanceSpec::Hplusl { n, dim, k } => h_plus_lambda(*n, *dim, *k)?,
            InstanceSpec::Ap {
                n,
                start,
                step,
                len,
            } => arithmetic_progression(*n, *start, *step, *len)?,
            InstanceSpec::Random {
                group,
                density,
                seed,
            } => random_set(&make_group(group)?, *density, *seed)?,
            InstanceSpec::CosetUnion { n, dims } => coset_union(*n, dims)?,
        };
        self.check(&a)?;
        Ok(a)
    }

    fn check(&self, a: &GSet) -> Result<()> {
        let ok = match self {
            InstanceSpec::Subspace { dim, .. } => {
                a.len() == 1 << dim && crate::setfun::sumset(a, a)? == *a
            }
            InstanceSpec::Dissociated { k, .. } => {
                a.len() == *k && (a.len() > MAX_DISSOCIATED_LEN || is_dissociated(a)?)
            }
            InstanceSpec::Hplusl { n, dim, k } => {
                // 0 ∈ Λ by construction, so the predicate applies to Λ \ {0}
                let mut l = lambda_set(*n, *dim, *k)?;
                l.remove(0);
                a.len() == (1 << dim) * k && (l.len() > MAX_DISSOCIATED_LEN || is_dissociated(&l)?)
            }
            InstanceSpec::Ap { len, .. } => a.len() <= *len,
            InstanceSpec::Random { .. } => true,
            InstanceSpec::CosetUnion { dims, .. } => {
                let expect: usize =
                    dims.iter().map(|d| 1usize << d).sum::<usize>() + 1 - dims.len().max(1);
                a.len() == expect
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "generated set violates {self:?}"
            )))
        }
    }

    /// Short stable label used in reports.
    pub fn label(&self) -> String {
        match self {
            InstanceSpec::Subspace { n, dim } => format!("subspace(n={n},dim={dim})"),
            InstanceSpec::Dissociated { n, k } => format!("dissociated(n={n},k={k})"),
            InstanceSpec::Hplusl { n, dim, k } => format!("hplusl(n={n},dim={dim},K={k})"),
            InstanceSpec::Ap {
                n,
                start,
                step,
                len,
            } => {
                format!("ap(N={n},start={start},step={step},len={len})")
            }
            InstanceSpec::Random {
                group,
                density,
                seed,
            } => {
                let g: Vec<String> = group.iter().map(|f| f.to_string()).collect();
                if group.iter().all(|&f| f == 2) {
                    format!("random(F2^{},d={density},seed={seed})", group.len())
                } else {
                    format!("random(Z_{},d={density},seed={seed})", g.join("xZ_"))
                }
            }
            InstanceSpec::CosetUnion { n, dims } => {
                let d: Vec<String> = dims.iter().map(|x| x.to_string()).collect();
                format!("cosetUnion(n={n},dims=[{}])", d.join(","))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{energy, energy_int};
    use crate::setfun::{difference_set, self_slice};
    use num_bigint::BigInt;

    #[test]
    fn subspace_examples() {
        assert_eq!(subspace(3, 0).unwrap().to_vec(), vec![0]);
        assert_eq!(subspace(3, 3).unwrap().len(), 8);
        let h = subspace(4, 2).unwrap();
        assert_eq!(h.to_vec(), vec![0, 1, 2, 3]);
        assert_eq!(energy(&h), BigInt::from(64));
        assert!(subspace(3, 4).is_err());
    }

    #[test]
    fn dissociated_examples() {
        let g = boolean_cube(4).unwrap();
        assert!(is_dissociated(&GSet::from_indices(&g, [1, 2, 4]).unwrap()).unwrap());
        assert!(!is_dissociated(&GSet::from_indices(&g, [1, 2, 3]).unwrap()).unwrap());
        assert!(is_dissociated(&GSet::empty(&g)).unwrap());
        let z = cyclic(100).unwrap();
        assert!(is_dissociated(&GSet::from_indices(&z, [1, 2, 4, 8]).unwrap()).unwrap());
        assert!(!is_dissociated(&GSet::from_indices(&z, [1, 2, 3]).unwrap()).unwrap());
        let big = cyclic(1 << 12).unwrap();
        let l = GSet::from_indices(&big, 0..25).unwrap();
        assert!(matches!(is_dissociated(&l), Err(Error::CapExceeded(_))));
    }

    fn brute_is_dissociated(l: &GSet) -> bool {
        let g = l.group();
        let el = l.to_vec();
        let mut sums = std::collections::HashSet::new();
        for mask in 0u32..1 << el.len() {
            let s = (0..el.len())
                .filter(|&i| mask >> i & 1 == 1)
                .fold(0, |acc, i| g.add_idx(acc, el[i]));
            if !sums.insert(s) {
                return false;
            }
        }
        true
    }

    #[test]
    fn dissociated_matches_brute_force() {
        let g = cyclic(61).unwrap();
        for seed in 0..40 {
            let l = random_set(&g, 0.08, seed).unwrap();
            assert_eq!(
                is_dissociated(&l).unwrap(),
                brute_is_dissociated(&l),
                "{l:?}"
            );
        }
    }

    #[test]
    fn h_plus_lambda_golden() {
        let a = h_plus_lambda(6, 2, 4).unwrap();
        assert_eq!(a.len(), 16);
        assert_eq!(energy(&a), BigInt::from(2560));
        assert_eq!(energy_int(&a, 3), BigInt::from(28672));
        let sizes: Vec<usize> = (0..64).map(|s| self_slice(&a, s).len()).collect();
        assert_eq!(sizes.iter().filter(|&&c| c == 16).count(), 4);
        assert_eq!(sizes.iter().filter(|&&c| c == 8).count(), 24);
        assert!(h_plus_lambda(4, 2, 4).is_err());
    }

    #[test]
    fn h_plus_lambda_degenerate() {
        let a = h_plus_lambda(6, 3, 1).unwrap();
        assert_eq!(a, subspace(6, 3).unwrap());
        assert_eq!(energy(&a), BigInt::from(512));
        let l = h_plus_lambda(6, 0, 5).unwrap();
        for s in 1..64 {
            assert!(self_slice(&l, s).len() <= 2);
        }
        let m = l.len();
        assert!(energy(&l) <= BigInt::from(m * m + 2 * (m * m - m)));
    }

    #[test]
    fn progression_examples() {
        let ap = arithmetic_progression(101, 0, 1, 8).unwrap();
        assert_eq!(ap.to_vec(), (0..8).collect::<Vec<_>>());
        assert_eq!(difference_set(&ap, &ap).unwrap().len(), 15);
        assert_eq!(
            arithmetic_progression(7, 0, 1, 3).unwrap().to_vec(),
            vec![0, 1, 2]
        );
        let sub = arithmetic_progression(12, 0, 4, 3).unwrap();
        assert_eq!(sub.to_vec(), vec![0, 4, 8]);
        assert_eq!(energy(&sub), BigInt::from(27));
        assert_eq!(arithmetic_progression(12, 0, 4, 7).unwrap().len(), 3);
        assert!(arithmetic_progression(12, 0, 4, 0).is_err());
    }

    #[test]
    fn random_and_unions() {
        let g = cyclic(101).unwrap();
        assert_eq!(random_set(&g, 1.0, 3).unwrap().len(), 101);
        assert_eq!(
            random_set(&g, 0.2, 42).unwrap(),
            random_set(&g, 0.2, 42).unwrap()
        );
        assert_ne!(
            random_set(&g, 0.2, 42).unwrap(),
            random_set(&g, 0.2, 43).unwrap()
        );
        assert!(random_set(&g, 0.0, 1).is_err());
        assert!(random_set(&g, 1.5, 1).is_err());
        let u = coset_union(6, &[2, 2, 2]).unwrap();
        assert_eq!(u.len(), 10);
        assert!(coset_union(5, &[2, 2, 2]).is_err());
        // a shift inside block j keeps all of H_j in the slice
        let h1 = GSet::from_indices(u.group(), [0, 4, 8, 12]).unwrap();
        assert!(h1.is_subset(&self_slice(&u, 4)));
    }

    #[test]
    fn specs_build_and_roundtrip() {
        let specs = vec![
            InstanceSpec::Subspace { n: 5, dim: 3 },
            InstanceSpec::Dissociated { n: 6, k: 4 },
            InstanceSpec::Hplusl { n: 6, dim: 2, k: 4 },
            InstanceSpec::Ap {
                n: 101,
                start: 3,
                step: 5,
                len: 8,
            },
            InstanceSpec::Random {
                group: vec![101],
                density: 0.2,
                seed: 42,
            },
            InstanceSpec::CosetUnion {
                n: 6,
                dims: vec![2, 2, 2],
            },
        ];
        for s in specs {
            let a = s.build().unwrap();
            assert!(!a.is_empty());
            let text = serde_json::to_string(&s).unwrap();
            let back: InstanceSpec = serde_json::from_str(&text).unwrap();
            assert_eq!(back, s);
            assert!(!s.label().is_empty());
        }
    }
}
