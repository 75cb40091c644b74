//! Acceptance criteria, one PASS/FAIL line each.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use energy_lab::constructors::{random_set, subspace, InstanceSpec};
use energy_lab::energy::{
    energy, energy_int, energy_pair, energy_pair_fourier, t_energy_k, WeightKernel,
};
use energy_lab::gowers::gowers_u;
use energy_lab::io::load_set;
use energy_lab::setfun::{convolve, convolve_fourier, delta_sumset_size_direct, difference_set};
use energy_lab::structure::{
    connected_ab_holds, connectedness_gamma, extract_connected_k, extract_connected_subset,
    implied_gamma,
};
use energy_lab::verify::{
    corpus, random_family_entries, run_corpus, CheckKind, CheckResult, Suite, SuiteOptions, Verdict,
};
use energy_lab::{make_group, GSet, Sign};
use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random sets per group shape in the corpus.
const CORPUS_COUNT: usize = 100;
/// Residual allowed between transform-side and exact values.
const TRANSFORM_RESIDUAL: f64 = 1e-6;
/// Largest spread allowed in the scaling family.
const SCALING_BAND: f64 = 4.0;
/// Relative slack when comparing a measured γ with the implied one.
const GAMMA_SLACK: f64 = 1e-12;

const BUDGET_GOLDEN: Duration = Duration::from_secs(1);
const BUDGET_IDENTITY: Duration = Duration::from_secs(60);
const BUDGET_INEQUALITY: Duration = Duration::from_secs(600);
const BUDGET_EXTRACTION: Duration = Duration::from_secs(300);

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        ok,
        detail: detail.into(),
    }
}

fn data(name: &str) -> GSet {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name);
    load_set(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn big(v: u64) -> BigInt {
    BigInt::from(v)
}

fn within(t: Instant, budget: Duration) -> (bool, String) {
    let el = t.elapsed();
    (
        el < budget,
        format!("{:.2}s of {:.0}s", el.as_secs_f64(), budget.as_secs_f64()),
    )
}

fn failures(r: &[CheckResult]) -> Vec<String> {
    r.iter()
        .filter(|c| c.pass == Verdict::Fail)
        .take(5)
        .map(|c| format!("{} / {}: {} vs {}", c.instance, c.name, c.lhs, c.rhs))
        .collect()
}

fn golden_values() -> Outcome {
    let t = Instant::now();
    let a = data("golden_z7.json");
    let got = [
        ("E", energy(&a)),
        ("E_3", energy_int(&a, 3)),
        ("E_4", energy_int(&a, 4)),
        ("T_2", t_energy_k(&a, 2).unwrap()),
        ("U^3", gowers_u(&a, 3).unwrap().count),
        ("U^4", gowers_u(&a, 4).unwrap().count),
        (
            "|A^2-Δ|",
            BigInt::from(delta_sumset_size_direct(&a, Sign::Minus).unwrap()),
        ),
        (
            "|A^2+Δ|",
            BigInt::from(delta_sumset_size_direct(&a, Sign::Plus).unwrap()),
        ),
    ];
    let want = [19u64, 45, 115, 19, 33, 51, 19, 19];
    let mut bad: Vec<String> = got
        .iter()
        .zip(want)
        .filter(|((_, g), w)| *g != big(*w))
        .map(|((n, g), w)| format!("{n}={g} (want {w})"))
        .collect();
    let h = data("hplusl_6_2_4.json");
    for (n, g, w) in [
        ("|A|", big(h.len() as u64), 16u64),
        ("E", energy(&h), 2560),
        ("E_3", energy_int(&h, 3), 28672),
    ] {
        if g != big(w) {
            bad.push(format!("H+Λ {n}={g} (want {w})"));
        }
    }
    let (fast, time) = within(t, BUDGET_GOLDEN);
    outcome(
        bad.is_empty() && fast,
        format!("mismatches {bad:?}; {time}"),
    )
}

fn identity_corpus(instances: &[energy_lab::verify::Instance]) -> (Outcome, Vec<CheckResult>) {
    let t = Instant::now();
    let r = run_corpus(instances, &[Suite::Identity], &SuiteOptions::default()).unwrap();
    let f = failures(&r);
    let all_identity = r.iter().all(|c| c.kind == CheckKind::Identity);
    let (fast, time) = within(t, BUDGET_IDENTITY);
    let o = outcome(
        f.is_empty() && fast && all_identity,
        format!(
            "{} instances, {} entries, failures {f:?}; {time}",
            instances.len(),
            r.len()
        ),
    );
    (o, r)
}

fn transform_paths(identity: &[CheckResult]) -> Outcome {
    let names = [
        "energy_pair_transform_vs_direct",
        "t2_transform_vs_direct",
        "convolution_transform_vs_direct",
        "dual_t2_of_spectrum",
    ];
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    let mut seen = 0usize;
    for c in identity.iter().filter(|c| names.contains(&c.name.as_str())) {
        seen += 1;
        let r = c.ratio.unwrap_or(f64::INFINITY);
        worst = worst.max(r);
        if c.pass != Verdict::Pass || r >= TRANSFORM_RESIDUAL {
            bad.push(format!("{} / {}", c.instance, c.name));
        }
    }
    // distinct pairs (A_i, A_{i+1}) in Z_101 and F_2^8
    let mut pairs = 0usize;
    for factors in [vec![101usize], vec![2; 8]] {
        let g = make_group(&factors).unwrap();
        let sets: Vec<GSet> = (0..101u64)
            .map(|s| random_set(&g, 0.2, 1000 + s).unwrap())
            .collect();
        for w in sets.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            pairs += 1;
            let exact = energy_pair(a, b).to_f64().unwrap();
            let approx = energy_pair_fourier(a, b).unwrap();
            let rel = (approx - exact).abs() / exact.max(1.0);
            worst = worst.max(rel);
            if approx.round() != exact || rel >= TRANSFORM_RESIDUAL {
                bad.push(format!("E(A,B) pair {pairs}"));
            }
            let direct = convolve(&a.indicator(), &b.indicator()).unwrap();
            let fast = convolve_fourier(&a.indicator(), &b.indicator()).unwrap();
            for (x, v) in fast.iter().enumerate() {
                let e = direct.exact_at(x).unwrap().to_f64().unwrap();
                let r = (v - e).abs();
                worst = worst.max(r);
                if v.round() != e || r >= TRANSFORM_RESIDUAL {
                    bad.push(format!("A*B pair {pairs} at {x}"));
                    break;
                }
            }
        }
    }
    outcome(
        bad.is_empty() && seen > 0,
        format!(
            "{seen} corpus entries, {pairs} extra pairs, worst residual {worst:.3e}, failures {:?}",
            &bad[..bad.len().min(5)]
        ),
    )
}

fn inequality_and_algorithms(instances: &[energy_lab::verify::Instance]) -> (Outcome, Outcome) {
    let t = Instant::now();
    let opts = SuiteOptions::default();
    let r = run_corpus(instances, &[Suite::Inequality, Suite::Algorithm], &opts).unwrap();
    let (fast, time) = within(t, BUDGET_INEQUALITY);
    let (ineq, algo): (Vec<CheckResult>, Vec<CheckResult>) =
        r.into_iter().partition(|c| c.kind == CheckKind::Inequality);
    let applied = ineq.iter().filter(|c| c.pass == Verdict::Pass).count();
    let skipped = ineq.iter().filter(|c| c.pass == Verdict::Skipped).count();
    let f = failures(&ineq);
    let o4 = outcome(
        f.is_empty() && fast,
        format!(
            "{applied} passed, {skipped} skipped by hypothesis or cost, failures {f:?}; {time}"
        ),
    );

    let mut algo = algo;
    algo.extend(random_family_entries(opts.seed).unwrap());
    let count = |name: &str| {
        algo.iter()
            .filter(|c| c.name == name && c.pass == Verdict::Pass)
            .count()
    };
    let need = ["family_translates", "family_slices", "regular_part_half"];
    let every = need.iter().all(|n| count(n) == instances.len());
    let f = failures(&algo);
    let o5 = outcome(
        f.is_empty() && every && count("family_random") == 1,
        format!(
            "translates {}, slices {}, regular part {}, in-target {}, random family {}; failures {f:?}",
            count("family_translates"),
            count("family_slices"),
            count("regular_part_half"),
            count("family_translates_in_target"),
            count("family_random"),
        ),
    );
    (o4, o5)
}

fn extraction() -> Outcome {
    let t = Instant::now();
    let mut sets: Vec<GSet> = Vec::new();
    for (factors, density) in [
        (vec![31usize], 0.4),
        (vec![2; 5], 0.4),
        (vec![2; 6], 0.2),
        (vec![40], 0.3),
    ] {
        let g = make_group(&factors).unwrap();
        let mut seed = 0u64;
        let mut taken = 0;
        while taken < 4 {
            let a = random_set(&g, density, seed).unwrap();
            seed += 1;
            if (6..=16).contains(&a.len()) {
                sets.push(a);
                taken += 1;
            }
        }
    }
    for spec in [
        InstanceSpec::Hplusl { n: 6, dim: 2, k: 4 },
        InstanceSpec::Ap {
            n: 31,
            start: 0,
            step: 1,
            len: 10,
        },
        InstanceSpec::CosetUnion {
            n: 6,
            dims: vec![2, 2, 2],
        },
        InstanceSpec::Dissociated { n: 8, k: 8 },
    ] {
        sets.push(spec.build().unwrap());
    }
    let mut bad = Vec::new();
    let mut removals = 0usize;
    for (i, a) in sets.iter().enumerate() {
        let x = extract_connected_k(a, 2, 0.5).unwrap();
        removals += x.steps;
        let want = implied_gamma(2, 0.5, x.steps);
        let got = connectedness_gamma(&x.aprime, 2.0, 0.5).unwrap().gamma;
        if got < want * (1.0 - GAMMA_SLACK) || !x.energy_bound_holds {
            bad.push(format!(
                "#{i}: γ {got} vs {want}, energy bound {}",
                x.energy_bound_holds
            ));
        }
    }

    // The kernel (A o A)^{k-1} has q(x,x) = |A|^{k-1}, which rules out
    // violators at this size, so the removal path is driven by a coset kernel:
    // A = H ∪ X with H of dimension 3 in F_2^7 and X one point in each of 8
    // other cosets, q(x,y) = H(x-y).
    let g = make_group(&[2; 7]).unwrap();
    let h = subspace(7, 3).unwrap();
    let w: Vec<f64> = (0..g.size())
        .map(|x| f64::from(u8::from(h.contains(x))))
        .collect();
    let q = WeightKernel::difference(&g, w).unwrap();
    let mut coset_removals = 0usize;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picks = sample(&mut rng, 15, 8);
        let xs: Vec<usize> = picks
            .iter()
            .map(|c| ((c + 1) << 3) | rng.random_range(0..8))
            .collect();
        let a = h.union(&GSet::from_indices(&g, xs).unwrap());
        let x = extract_connected_subset(&a, &q, 0.5, 1.0, 0.25).unwrap();
        coset_removals += x.steps;
        let holds = connected_ab_holds(&x.aprime, &q, 0.5, 1.0, 0.25).unwrap();
        if !holds || !x.energy_bound_holds || x.steps == 0 {
            bad.push(format!(
                "coset seed {seed}: steps {}, connected {holds}, energy bound {}",
                x.steps, x.energy_bound_holds
            ));
        }
    }
    let (fast, time) = within(t, BUDGET_EXTRACTION);
    outcome(
        bad.is_empty() && fast && sets.len() == 20,
        format!(
            "{} instances with (A o A)-kernel ({removals} removals), 20 with coset kernel ({coset_removals} removals), failures {bad:?}; {time}",
            sets.len()
        ),
    )
}

fn scaling_family() -> Outcome {
    // (n, dim, K) -> (|A|, |A-A|, E_3(A-A)) from the first run
    type Row = ((usize, usize, usize), (u64, u64, u64));
    let frozen: [Row; 3] = [
        ((6, 2, 4), (16, 28, 474_880)),
        ((8, 3, 5), (40, 88, 30_846_976)),
        ((10, 4, 6), (96, 256, 1_463_812_096)),
    ];
    let mut ratios = Vec::new();
    let mut bad = Vec::new();
    for ((n, dim, k), (sa, sd, e3d)) in frozen {
        let a = InstanceSpec::Hplusl { n, dim, k }.build().unwrap();
        let d = difference_set(&a, &a).unwrap();
        let got = (a.len() as u64, d.len() as u64, energy_int(&d, 3));
        if got != (sa, sd, big(e3d)) {
            bad.push(format!("({n},{dim},{k}): {got:?}"));
        }
        let kk = got.1 as f64 / got.0 as f64;
        ratios.push(got.2.to_f64().unwrap() / (kk.powf(1.75) * (got.0 as f64).powi(4)));
    }
    let hi = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let lo = ratios.iter().cloned().fold(f64::MAX, f64::min);
    outcome(
        bad.is_empty() && hi / lo <= SCALING_BAND,
        format!(
            "ratios {ratios:.4?}, spread {:.3} (band {SCALING_BAND}), mismatches {bad:?}",
            hi / lo
        ),
    )
}

fn main() {
    let instances = corpus(CORPUS_COUNT).unwrap();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push(("1 golden values", golden_values()));
    let (o2, identity) = identity_corpus(&instances);
    results.push(("2 identity suite", o2));
    results.push(("3 transform paths", transform_paths(&identity)));
    let (o4, o5) = inequality_and_algorithms(&instances);
    results.push(("4 inequality suite", o4));
    results.push(("5 algorithm guarantees", o5));
    results.push(("6 connectedness extraction", extraction()));
    results.push(("7 scaling report", scaling_family()));

    let mut failed = 0;
    for (name, o) in &results {
        println!(
            "{} criterion {name}: {}",
            if o.ok { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.ok);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
