use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use energy_lab::constructors::InstanceSpec;
use energy_lab::energy::{energy_k, restricted_energy, sigma_p, t_energy_k, Number};
use energy_lab::gowers::gowers_u;
use energy_lab::group::parse_factors;
use energy_lab::io::{load_set, save_set};
use energy_lab::setfun::sigma_k;
use energy_lab::structure::{
    extract_connected_k, greedy_disjoint_slices, greedy_disjoint_translates, implied_gamma,
    random_disjoint_family, regular_part, small_doubling_subset_oracle,
};
use energy_lab::verify::{
    corpus, random_family_entries, run_corpus, run_suites, singleton_sources, summarize, write_csv,
    CheckResult, Ctx, Suite, SuiteOptions,
};
use energy_lab::{Error, GSet};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "energy-lab",
    version,
    about = "Additive energies, Gowers norms and structure extraction over finite abelian groups"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConstructKind {
    Subspace,
    Dissociated,
    Hplusl,
    Ap,
    Random,
    CosetUnion,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnergyKind {
    #[value(name = "E")]
    E,
    #[value(name = "T")]
    T,
    #[value(name = "sigma")]
    Sigma,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Translates,
    Slices,
    RandomFamily,
    Connected,
    RegularPart,
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Identity,
    Inequality,
    Algorithm,
    Ratio,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Suite {
        match s {
            SuiteArg::Identity => Suite::Identity,
            SuiteArg::Inequality => Suite::Inequality,
            SuiteArg::Algorithm => Suite::Algorithm,
            SuiteArg::Ratio => Suite::Ratio,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build a canonical instance and write it as a set file.
    Construct {
        #[arg(long, value_enum)]
        kind: ConstructKind,
        /// Dimension of F_2^n, or the modulus of Z_n for `ap`.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        start: Option<usize>,
        #[arg(long)]
        step: Option<usize>,
        #[arg(long)]
        len: Option<usize>,
        /// Comma-separated cyclic factors, e.g. "2,2,2,2" or "101".
        #[arg(long)]
        group: Option<String>,
        #[arg(long)]
        density: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated block dimensions for `coset-union`.
        #[arg(long)]
        dims: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute an energy-type quantity exactly where possible.
    Energy {
        #[arg(long)]
        set: PathBuf,
        #[arg(long, value_enum)]
        kind: EnergyKind,
        #[arg(long, default_value_t = 2.0)]
        k: f64,
        /// Restrict the sum to the shifts in this set.
        #[arg(long)]
        restrict: Option<PathBuf>,
    },
    /// Unnormalized Gowers norm as a cube count.
    Gowers {
        #[arg(long)]
        set: PathBuf,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        normalized: bool,
    },
    /// Run a structure-extraction algorithm and audit its output.
    Extract {
        #[arg(long, value_enum)]
        algo: Algo,
        #[arg(long)]
        set: Option<PathBuf>,
        /// Second set (`translates` only); defaults to the first.
        #[arg(long)]
        set2: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of singleton sources for `random-family`.
        #[arg(long, default_value_t = 10_000)]
        singletons: usize,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
        /// Exponent of the kernel (A o A)^{k-1} for `connected`.
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run verification suites on one set.
    Verify {
        #[arg(long)]
        set: PathBuf,
        #[arg(long)]
        set2: Option<PathBuf>,
        #[arg(long, value_enum, value_delimiter = ',', default_values = ["identity", "inequality", "ratio"])]
        suite: Vec<SuiteArg>,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Verify the whole corpus: structured instances plus seeded random sets.
    Corpus {
        /// Random sets per group shape.
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
        #[arg(long, value_enum, value_delimiter = ',', default_values = ["identity", "inequality", "algorithm", "ratio"])]
        suite: Vec<SuiteArg>,
        /// Summary JSON; the full report goes to `--report`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Suite,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Suite) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn need<T>(v: Option<T>, flag: &str) -> std::result::Result<T, Failure> {
    v.ok_or_else(|| Failure::Usage(format!("--{flag} is required for this kind")))
}

fn list(text: &str) -> std::result::Result<Vec<usize>, Failure> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|e| Failure::Usage(format!("{t:?}: {e}")))
        })
        .collect()
}

fn emit(value: &Value, out: Option<&Path>) -> Outcome {
    let text = serde_json::to_string_pretty(value).expect("plain data serializes") + "\n";
    match out {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_csv_file(results: &[CheckResult], path: &Path) -> Outcome {
    let f = File::create(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    write_csv(results, BufWriter::new(f))?;
    Ok(())
}

fn number(n: &Number) -> Value {
    match n.exact() {
        Some(v) => json!({ "value": v.to_string(), "exact": true }),
        None => json!({ "value": format!("{}", n.as_f64()), "exact": false }),
    }
}

fn load_optional(path: Option<&PathBuf>) -> std::result::Result<Option<GSet>, Failure> {
    Ok(match path {
        Some(p) => Some(load_set(p)?),
        None => None,
    })
}

fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Construct {
            kind,
            n,
            dim,
            k,
            start,
            step,
            len,
            group,
            density,
            seed,
            dims,
            out,
        } => {
            let spec = match kind {
                ConstructKind::Subspace => InstanceSpec::Subspace {
                    n: need(n, "n")?,
                    dim: need(dim, "dim")?,
                },
                ConstructKind::Dissociated => InstanceSpec::Dissociated {
                    n: need(n, "n")?,
                    k: need(k, "k")?,
                },
                ConstructKind::Hplusl => InstanceSpec::Hplusl {
                    n: need(n, "n")?,
                    dim: need(dim, "dim")?,
                    k: need(k, "k")?,
                },
                ConstructKind::Ap => InstanceSpec::Ap {
                    n: need(n, "n")?,
                    start: start.unwrap_or(0),
                    step: step.unwrap_or(1),
                    len: need(len, "len")?,
                },
                ConstructKind::Random => InstanceSpec::Random {
                    group: parse_factors(&need(group, "group")?)?,
                    density: need(density, "density")?,
                    seed,
                },
                ConstructKind::CosetUnion => InstanceSpec::CosetUnion {
                    n: need(n, "n")?,
                    dims: list(&need(dims, "dims")?)?,
                },
            };
            let a = spec.build()?;
            save_set(&a, &out)?;
            emit(
                &json!({
                    "instance": spec.label(),
                    "group": a.group().factors(),
                    "size": a.len().to_string(),
                    "out": out.display().to_string(),
                }),
                None,
            )
        }
        Command::Energy {
            set,
            kind,
            k,
            restrict,
        } => {
            let a = load_set(&set)?;
            let p = load_optional(restrict.as_ref())?;
            let value = match (kind, &p) {
                (EnergyKind::E, None) => number(&energy_k(&a, k)?.value),
                (EnergyKind::E, Some(p)) => number(&restricted_energy(&a, p, k)?.value),
                (EnergyKind::T, _) => {
                    let kk = integer_k(k)?;
                    json!({ "value": t_energy_k(&a, kk)?.to_string(), "exact": true })
                }
                (EnergyKind::Sigma, Some(p)) => {
                    json!({ "value": sigma_p(&a, p)?.to_string(), "exact": true })
                }
                (EnergyKind::Sigma, None) => {
                    let kk = integer_k(k)?;
                    json!({ "value": sigma_k(&a, kk)?.to_string(), "exact": true })
                }
            };
            let kind_name = match kind {
                EnergyKind::E => "E",
                EnergyKind::T => "T",
                EnergyKind::Sigma => "sigma",
            };
            let mut rec = json!({
                "kind": kind_name,
                "k": format!("{k}"),
                "size": a.len().to_string(),
            });
            rec["value"] = value["value"].clone();
            rec["exact"] = value["exact"].clone();
            if let Some(p) = p {
                rec["restrict"] = json!(p.to_vec());
            }
            emit(&rec, None)
        }
        Command::Gowers { set, d, normalized } => {
            let a = load_set(&set)?;
            let g = gowers_u(&a, d)?;
            let mut rec = json!({ "d": d.to_string(), "count": g.count.to_string() });
            if normalized {
                rec["normalized"] = json!(format!("{}", g.normalized));
            }
            emit(&rec, None)
        }
        Command::Extract {
            algo,
            set,
            set2,
            seed,
            singletons,
            c,
            beta,
            k,
            out,
        } => {
            let rec = match algo {
                Algo::RandomFamily => {
                    let f = random_disjoint_family(&singleton_sources(singletons)?, 1, c, seed)?;
                    let mut v = f.to_json();
                    v["seed"] = json!(seed.to_string());
                    v
                }
                _ => {
                    let a = load_set(&need(set, "set")?)?;
                    match algo {
                        Algo::Translates => {
                            let b = load_optional(set2.as_ref())?.unwrap_or_else(|| a.clone());
                            greedy_disjoint_translates(&a, &b)?.to_json()
                        }
                        Algo::Slices => {
                            let d = energy_lab::setfun::difference_set(&a, &a)?;
                            greedy_disjoint_slices(&a, &d)?.to_json()
                        }
                        Algo::Connected => {
                            let x = extract_connected_k(&a, k, beta)?;
                            json!({
                                "algorithm": "connected",
                                "k": k.to_string(),
                                "beta": format!("{beta}"),
                                "aprime": x.aprime.to_vec(),
                                "steps": x.steps.to_string(),
                                "removed": x.removed.iter().map(|r| r.to_vec()).collect::<Vec<_>>(),
                                "impliedGamma": format!("{}", implied_gamma(k, beta, x.steps)),
                                "eqInitial": format!("{}", x.eq_initial),
                                "eqFinal": format!("{}", x.eq_final),
                                "stepBound": format!("{}", x.step_bound),
                                "energyBoundHolds": x.energy_bound_holds,
                            })
                        }
                        Algo::RegularPart => {
                            let r = regular_part(&a)?;
                            json!({
                                "algorithm": "regular-part",
                                "elements": r.to_vec(),
                                "size": r.len().to_string(),
                                "halfSizeHolds": 2 * r.len() >= a.len(),
                            })
                        }
                        Algo::Oracle => {
                            let o = small_doubling_subset_oracle(&a, 0.5)?;
                            json!({
                                "algorithm": "oracle",
                                "subset": o.subset.to_vec(),
                                "differenceSize": o.difference_size.to_string(),
                                "doubling": format!("{}", o.doubling),
                            })
                        }
                        Algo::RandomFamily => unreachable!(),
                    }
                }
            };
            emit(&rec, out.as_deref())
        }
        Command::Verify {
            set,
            set2,
            suite,
            seed,
            out,
            csv,
        } => {
            let a = load_set(&set)?;
            let b = load_optional(set2.as_ref())?;
            let opts = SuiteOptions {
                seed,
                ..SuiteOptions::default()
            };
            let name = set
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let ctx = Ctx::new(&name, &a, b.as_ref(), &opts)?;
            let suites: Vec<Suite> = suite.into_iter().map(Suite::from).collect();
            let results = run_suites(&ctx, &suites)?;
            finish(&results, out.as_deref(), csv.as_deref(), None)
        }
        Command::Corpus {
            count,
            seed,
            suite,
            out,
            report,
            csv,
        } => {
            let opts = SuiteOptions {
                seed,
                ..SuiteOptions::default()
            };
            let suites: Vec<Suite> = suite.into_iter().map(Suite::from).collect();
            let instances = corpus(count)?;
            let mut results = run_corpus(&instances, &suites, &opts)?;
            if suites.contains(&Suite::Algorithm) {
                results.extend(random_family_entries(seed)?);
            }
            let s = summarize(&results);
            let failures: Vec<&CheckResult> = results.iter().filter(|r| r.failed()).collect();
            let summary = json!({
                "instances": s.instances.to_string(),
                "entries": s.entries.to_string(),
                "passed": s.passed.to_string(),
                "failed": s.failed.to_string(),
                "skipped": s.skipped.to_string(),
                "reportOnly": s.report_only.to_string(),
                "failures": failures,
            });
            finish(
                &results,
                report.as_deref(),
                csv.as_deref(),
                Some((&summary, out.as_deref())),
            )
        }
    }
}

fn integer_k(k: f64) -> std::result::Result<usize, Failure> {
    if k >= 1.0 && k.fract() == 0.0 {
        Ok(k as usize)
    } else {
        Err(Failure::Usage(format!(
            "k = {k} must be a positive integer for this kind"
        )))
    }
}

fn finish(
    results: &[CheckResult],
    report: Option<&Path>,
    csv: Option<&Path>,
    summary: Option<(&Value, Option<&Path>)>,
) -> Outcome {
    let full = serde_json::to_value(results).expect("plain data serializes");
    match summary {
        Some((s, out)) => {
            if report.is_some() {
                emit(&full, report)?;
            }
            emit(s, out)?;
        }
        None => emit(&full, report)?,
    }
    if let Some(p) = csv {
        write_csv_file(results, p)?;
    }
    if results.iter().any(|r| r.failed()) {
        Err(Failure::Suite)
    } else {
        Ok(())
    }
}
