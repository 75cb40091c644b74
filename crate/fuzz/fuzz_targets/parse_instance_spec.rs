#![no_main]

use energy_lab::constructors::InstanceSpec;
use libfuzzer_sys::fuzz_target;

/// Instances larger than this are parsed but not built.
const BUILD_CAP: usize = 1 << 12;

fuzz_target!(|data: &[u8]| {
    let Ok(spec) = serde_json::from_slice::<InstanceSpec>(data) else {
        return;
    };
    let small = match &spec {
        InstanceSpec::Subspace { n, .. }
        | InstanceSpec::Dissociated { n, .. }
        | InstanceSpec::Hplusl { n, .. }
        | InstanceSpec::CosetUnion { n, .. } => *n <= 12,
        InstanceSpec::Ap { n, .. } => *n <= BUILD_CAP,
        InstanceSpec::Random { group, .. } => group
            .iter()
            .try_fold(1usize, |acc, &f| acc.checked_mul(f))
            .is_some_and(|s| s <= BUILD_CAP),
    };
    if small {
        if let Ok(a) = spec.build() {
            let _ = spec.label();
            assert!(a.len() <= a.group().size());
        }
    }
});
