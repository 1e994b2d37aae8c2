//! Batch front-end: generate constraint formulas and their gadget samples,
//! rewrite samples under random network weight transforms, and run the
//! verification checks. Every output file embeds a run manifest whose argv
//! replays the run byte for byte; seeds come only from flags (no
//! environment overrides).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use csp2nn::csp::{self, io as csp_io, Formula};
use csp2nn::gadget::{encode_formula, io as gadget_io, realizing_weights, LabeledSample};
use csp2nn::harness::{
    check_realizable, distinguish_with_learner, exit_code, mc_smin_tail, mc_smin_values,
    render_table,
    learners::{CheatingLearner, ConstantLearner, Learner, MemorizingLearner},
    test_distribution, test_scattered, DistinguishReport, Outcome, StatReport, Verdict,
    REALIZABILITY_TOL,
};
use csp2nn::manifest::RunManifest;
use csp2nn::neural::{io as neural_io, NetworkWeights};
use csp2nn::pipeline::{
    clauses_per_group, end_to_end, reduce_to_random_cnn, reduce_to_random_fc, weight_stats,
    Architecture, EndToEndOptions, Mode, RealizabilityStats, Reduction, ReductionReport,
    RejectionPolicy, StageRecord, StageStatus,
};
use csp2nn::rng::derive_seed;
use csp2nn::transform::{io as transform_io, smin_threshold, CovModel, DistributionSpec, IidLaw};

#[derive(Parser)]
#[command(
    name = "csp2nn",
    version,
    about = "Constraint formulas, gadget samples, and random-network reductions"
)]
struct Cli {
    /// Cap the worker thread pool (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Draw a constraint formula and write it with its gadget-encoded sample.
    Gen(GenArgs),
    /// Rewrite a sample through a freshly drawn random weight transform.
    Reduce(ReduceArgs),
    /// Exact and statistical checks on samples and weights.
    #[command(subcommand)]
    Verify(VerifyCmd),
    /// Render a saved report JSON as a table (optionally CSV).
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Random,
    Planted,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Random => Mode::Random,
            ModeArg::Planted => Mode::Planted,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RouteArg {
    /// Draw the mixed formula directly (planted mode conditions every constraint).
    Direct,
    /// Draw a SAT formula, group it into disjoint conjunctions, then mix.
    Sat,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FamilyArg {
    #[value(name = "iid-normal", alias = "normal")]
    Normal,
    #[value(name = "iid-uniform", alias = "uniform")]
    Uniform,
    #[value(name = "iid-bernoulli", alias = "bernoulli")]
    Bernoulli,
    #[value(name = "gaussian-cols", alias = "gaussian")]
    Gaussian,
    #[value(name = "sphere-cols", alias = "sphere")]
    Sphere,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TargetArg {
    #[value(name = "fc-normal")]
    FcNormal,
    #[value(name = "fc-uniform")]
    FcUniform,
    #[value(name = "fc-bernoulli")]
    FcBernoulli,
    #[value(name = "fc-gaussian")]
    FcGaussian,
    #[value(name = "fc-sphere")]
    FcSphere,
    #[value(name = "cnn-normal")]
    CnnNormal,
    #[value(name = "cnn-uniform")]
    CnnUniform,
    #[value(name = "cnn-bernoulli")]
    CnnBernoulli,
    #[value(name = "cnn-gaussian")]
    CnnGaussian,
    #[value(name = "cnn-sphere")]
    CnnSphere,
}

impl TargetArg {
    fn split(self) -> (Architecture, FamilyArg) {
        match self {
            TargetArg::FcNormal => (Architecture::Fc, FamilyArg::Normal),
            TargetArg::FcUniform => (Architecture::Fc, FamilyArg::Uniform),
            TargetArg::FcBernoulli => (Architecture::Fc, FamilyArg::Bernoulli),
            TargetArg::FcGaussian => (Architecture::Fc, FamilyArg::Gaussian),
            TargetArg::FcSphere => (Architecture::Fc, FamilyArg::Sphere),
            TargetArg::CnnNormal => (Architecture::Cnn, FamilyArg::Normal),
            TargetArg::CnnUniform => (Architecture::Cnn, FamilyArg::Uniform),
            TargetArg::CnnBernoulli => (Architecture::Cnn, FamilyArg::Bernoulli),
            TargetArg::CnnGaussian => (Architecture::Cnn, FamilyArg::Gaussian),
            TargetArg::CnnSphere => (Architecture::Cnn, FamilyArg::Sphere),
        }
    }
}

#[derive(Args, Clone, Debug)]
struct FamilyParams {
    /// Entry standard deviation (normal family).
    #[arg(long)]
    sigma: Option<f64>,
    /// Entry or column radius (uniform, bernoulli, sphere families).
    #[arg(long)]
    radius: Option<f64>,
    /// Covariance model for the gaussian family:
    /// identity | ar1:RHO | equi:C | diag-cycle:V1,V2,...
    #[arg(long)]
    cov: Option<String>,
}

fn parse_cov(s: &str) -> Result<CovModel> {
    if s == "identity" {
        return Ok(CovModel::Identity);
    }
    if let Some(rho) = s.strip_prefix("ar1:") {
        return Ok(CovModel::Ar1 {
            rho: rho.parse().context("bad ar1 correlation")?,
        });
    }
    if let Some(c) = s.strip_prefix("equi:") {
        return Ok(CovModel::Equicorrelated {
            c: c.parse().context("bad equicorrelation")?,
        });
    }
    if let Some(vals) = s.strip_prefix("diag-cycle:") {
        let values = vals
            .split(',')
            .map(|v| v.trim().parse::<f64>().context("bad diagonal value"))
            .collect::<Result<Vec<f64>>>()?;
        return Ok(CovModel::DiagCycle { values });
    }
    bail!("unrecognized covariance model {s:?} (identity | ar1:RHO | equi:C | diag-cycle:V1,V2,...)")
}

fn build_spec(family: FamilyArg, p: &FamilyParams) -> Result<DistributionSpec> {
    let reject = |flag: &str, present: bool| -> Result<()> {
        if present {
            bail!("--{flag} does not apply to this family");
        }
        Ok(())
    };
    let spec = match family {
        FamilyArg::Normal => {
            reject("radius", p.radius.is_some())?;
            reject("cov", p.cov.is_some())?;
            DistributionSpec::IidSymmetric(IidLaw::Normal {
                sigma: p.sigma.unwrap_or(1.0),
            })
        }
        FamilyArg::Uniform => {
            reject("sigma", p.sigma.is_some())?;
            reject("cov", p.cov.is_some())?;
            DistributionSpec::IidSymmetric(IidLaw::Uniform {
                radius: p.radius.unwrap_or(1.0),
            })
        }
        FamilyArg::Bernoulli => {
            reject("sigma", p.sigma.is_some())?;
            reject("cov", p.cov.is_some())?;
            DistributionSpec::IidSymmetric(IidLaw::Bernoulli {
                radius: p.radius.unwrap_or(1.0),
            })
        }
        FamilyArg::Gaussian => {
            reject("sigma", p.sigma.is_some())?;
            reject("radius", p.radius.is_some())?;
            DistributionSpec::GaussianCols {
                cov: match &p.cov {
                    None => CovModel::Identity,
                    Some(s) => parse_cov(s)?,
                },
            }
        }
        FamilyArg::Sphere => {
            reject("sigma", p.sigma.is_some())?;
            reject("cov", p.cov.is_some())?;
            DistributionSpec::SphereCols {
                radius: p.radius.unwrap_or(1.0),
            }
        }
    };
    spec.validate()?;
    Ok(spec)
}

#[derive(Args)]
struct GenArgs {
    /// random: fresh constraints; planted: conditioned on a hidden assignment.
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Variable count n'.
    #[arg(long)]
    nvars: usize,
    /// Literals per clause.
    #[arg(long)]
    k: usize,
    /// Constraints in the mixed formula.
    #[arg(long, default_value_t = 100)]
    groups: usize,
    #[arg(long, value_enum, default_value_t = RouteArg::Direct)]
    route: RouteArg,
    /// SAT clause budget for --route sat (default: first-moment heuristic).
    #[arg(long)]
    sat_clauses: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Output file stem.
    #[arg(long, default_value = "run")]
    prefix: String,
}

#[derive(Args)]
struct ReduceArgs {
    /// Target architecture and weight family.
    #[arg(long, value_enum)]
    target: TargetArg,
    #[command(flatten)]
    family: FamilyParams,
    /// Gadget sample file to transform (alternative: --mode for a full run).
    #[arg(long)]
    sample: Option<PathBuf>,
    /// Realizing filter (cnn-form weights file) for --sample.
    #[arg(long)]
    filter: Option<PathBuf>,
    /// Run the whole front end first: random | planted.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    nvars: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 100)]
    groups: usize,
    #[arg(long)]
    sat_clauses: Option<usize>,
    /// Transform draws before giving up.
    #[arg(long, default_value_t = 16)]
    retry_cap: usize,
    /// Reject draws whose chain condition number exceeds this.
    #[arg(long)]
    max_cond: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value = "run")]
    prefix: String,
    /// Per-point norm table for plotting.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum VerifyCmd {
    /// Certify that weights reproduce every label in a sample.
    Realizable {
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        /// Pre-clip residual tolerance.
        #[arg(long, default_value_t = REALIZABILITY_TOL)]
        tol: f64,
        /// Save the reports as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Fair-coin label checks on a sample.
    Scattered {
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Weight-law checks against a target family.
    Distribution {
        /// Weights file(s); columns pool across files.
        #[arg(long, required = true)]
        weights: Vec<PathBuf>,
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[command(flatten)]
        params: FamilyParams,
        /// Seed for the fresh reference draws.
        #[arg(long, default_value_t = 0)]
        reference_seed: u64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Monte Carlo smallest-singular-value tail of the block transform.
    SminTail {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[command(flatten)]
        params: FamilyParams,
        /// Variable count n' (patch dimension minus one).
        #[arg(long, default_value_t = 63)]
        nvars: usize,
        /// Blocks per transform (hidden width).
        #[arg(long, default_value_t = 18)]
        k: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Singular-value floor (default: the family's own threshold at n').
        #[arg(long)]
        threshold: Option<f64>,
        /// Turn the run into a pass/fail check against this exceedance.
        #[arg(long)]
        exceedance_bound: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write one smallest singular value per trial.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Learner-to-distinguisher wrapper on a sample file.
    Distinguish {
        #[arg(long, value_enum)]
        learner: LearnerArg,
        #[arg(long)]
        sample: PathBuf,
        /// Oracle draw budget m; the sample must hold >= 9m + dim points.
        #[arg(long, default_value_t = 100)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Weights file for the cheating learner.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LearnerArg {
    Cheating,
    Constant,
    Memorizing,
}

#[derive(Args)]
struct ReportArgs {
    /// Report JSON written by reduce or verify.
    #[arg(long)]
    input: PathBuf,
    /// Re-emit statistical reports as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Commands) -> Result<u8> {
    match command {
        Commands::Gen(args) => cmd_gen(args),
        Commands::Reduce(args) => cmd_reduce(args),
        Commands::Verify(cmd) => cmd_verify(cmd),
        Commands::Report(args) => cmd_report(args),
    }
}

fn manifest_for(
    subcommand: &str,
    seed: u64,
    params: BTreeMap<String, String>,
    outputs: Vec<String>,
) -> RunManifest {
    RunManifest {
        tool: "csp2nn".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: subcommand.into(),
        seed,
        params,
        argv: std::env::args().skip(1).collect(),
        outputs,
    }
}

fn path_string(p: &Path) -> String {
    p.display().to_string()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

// ─── gen ───

fn cmd_gen(args: GenArgs) -> Result<u8> {
    let q = clauses_per_group(args.nvars)?;
    let mut params = BTreeMap::new();
    for (k, v) in [
        ("mode", format!("{:?}", args.mode).to_lowercase()),
        ("nvars", args.nvars.to_string()),
        ("k", args.k.to_string()),
        ("groups", args.groups.to_string()),
        ("route", format!("{:?}", args.route).to_lowercase()),
        ("q", q.to_string()),
    ] {
        params.insert(k.into(), v);
    }
    if let Some(m) = args.sat_clauses {
        params.insert("sat_clauses".into(), m.to_string());
    }

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let formula_path = args.out.join(format!("{}.formula.txt", args.prefix));
    let sample_path = args.out.join(format!("{}.sample.txt", args.prefix));
    let filter_path = args.out.join(format!("{}.filter.txt", args.prefix));
    let sat_path = args.out.join(format!("{}.sat.txt", args.prefix));
    let manifest_path = args.out.join(format!("{}.manifest.json", args.prefix));

    let mut outputs = vec![path_string(&formula_path), path_string(&sample_path)];
    if args.route == RouteArg::Sat {
        outputs.insert(0, path_string(&sat_path));
    }
    if args.mode == ModeArg::Planted {
        outputs.push(path_string(&filter_path));
    }
    outputs.push(path_string(&manifest_path));
    let manifest = manifest_for("gen", args.seed, params, outputs);

    let mixed: Formula = match args.route {
        RouteArg::Direct => match args.mode {
            ModeArg::Random => {
                csp::sample_random_mixed(args.nvars, args.groups, args.k, q, args.seed)?
            }
            ModeArg::Planted => {
                csp::sample_planted_mixed(args.nvars, args.groups, args.k, q, args.seed)?
            }
        },
        RouteArg::Sat => {
            let m_sat = args.sat_clauses.unwrap_or_else(|| {
                csp2nn::pipeline::default_sat_clauses(args.nvars, args.k, q, args.groups)
            });
            let sat_seed = derive_seed(args.seed, "sat", 0);
            let sat = match args.mode {
                ModeArg::Random => csp::sample_random_ksat(args.nvars, m_sat, args.k, sat_seed)?,
                ModeArg::Planted => csp::sample_planted_ksat(args.nvars, m_sat, args.k, sat_seed)?,
            };
            csp_io::write_formula_file(&sat_path, &sat, Some(&manifest))?;
            println!("wrote {}", sat_path.display());
            match csp::reduce_sat_to_t(&sat, q, args.groups)? {
                csp::ReduceOutcome::Reduced(t) => {
                    csp::flip_to_mixed(&t, derive_seed(args.seed, "mix", 0))?
                }
                csp::ReduceOutcome::Fail { groups_built } => {
                    write_text(&manifest_path, &manifest.to_json())?;
                    eprintln!(
                        "grouping failed: filled {groups_built} of {} variable-disjoint groups \
                         from {m_sat} clauses (raise --sat-clauses)",
                        args.groups
                    );
                    return Ok(1);
                }
            }
        }
    };

    let sample = encode_formula(&mixed)?;
    csp_io::write_formula_file(&formula_path, &mixed, Some(&manifest))?;
    println!("wrote {}", formula_path.display());
    gadget_io::write_sample_file(&sample_path, &sample, Some(&manifest))?;
    println!("wrote {}", sample_path.display());
    if let Some(psi) = mixed.planted() {
        let filter = NetworkWeights::Cnn(realizing_weights(psi));
        neural_io::write_weights_file(&filter_path, &filter, Some(&manifest))?;
        println!("wrote {}", filter_path.display());
    }
    write_text(&manifest_path, &manifest.to_json())?;

    println!(
        "formula: {} constraints of {q} {}-clauses over {} vars ({})",
        args.groups,
        args.k,
        args.nvars,
        if mixed.planted().is_some() {
            "planted"
        } else {
            "no plant"
        }
    );
    println!(
        "sample: dim {}, {} points, provenance {}, max norm {:?}",
        sample.dim(),
        sample.len(),
        sample.provenance().label(),
        sample.max_norm()
    );
    Ok(0)
}

// ─── reduce ───

fn cmd_reduce(args: ReduceArgs) -> Result<u8> {
    let (arch, family) = args.target.split();
    let spec = build_spec(family, &args.family)?;
    let policy = RejectionPolicy {
        retry_cap: args.retry_cap,
        max_cond: args.max_cond,
        ..RejectionPolicy::default()
    };

    let mut params = BTreeMap::new();
    params.insert("target".into(), format!("{}-{}", arch.label(), spec.label()));
    params.insert("retry_cap".into(), args.retry_cap.to_string());
    if let Some(mc) = args.max_cond {
        params.insert("max_cond".into(), mc.to_string());
    }
    if let Some(s) = &args.sample {
        params.insert("sample".into(), path_string(s));
    }
    if let Some(f) = &args.filter {
        params.insert("filter".into(), path_string(f));
    }
    if let Some(m) = args.mode {
        params.insert("mode".into(), format!("{m:?}").to_lowercase());
    }
    for (key, v) in [
        ("nvars", args.nvars),
        ("k", args.k),
        ("sat_clauses", args.sat_clauses),
    ] {
        if let Some(v) = v {
            params.insert(key.into(), v.to_string());
        }
    }
    params.insert("groups".into(), args.groups.to_string());

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let p = |suffix: &str| args.out.join(format!("{}.{suffix}", args.prefix));
    let reduced_path = p("reduced.sample.txt");
    let weights_path = p("weights.txt");
    let chain_path = p("chain.bin");
    let report_path = p("report.json");
    let manifest_path = p("manifest.json");
    let sat_path = p("sat.txt");
    let formula_path = p("formula.txt");
    let gadget_path = p("gadget.sample.txt");

    match (&args.sample, args.mode) {
        (Some(sample_path), None) => {
            let mut outputs: Vec<String> = vec![
                path_string(&reduced_path),
                path_string(&chain_path),
                path_string(&report_path),
                path_string(&manifest_path),
            ];
            if args.filter.is_some() {
                outputs.insert(1, path_string(&weights_path));
            }
            if let Some(c) = &args.csv {
                outputs.push(path_string(c));
            }
            let manifest = manifest_for("reduce", args.seed, params, outputs);

            let (sample, _) = gadget_io::read_sample_file(sample_path)
                .with_context(|| format!("reading {}", sample_path.display()))?;
            let filter = match &args.filter {
                None => None,
                Some(fp) => match neural_io::read_weights_file(fp)
                    .with_context(|| format!("reading {}", fp.display()))?
                {
                    NetworkWeights::Cnn(f) => Some(f),
                    NetworkWeights::Fc(_) => {
                        bail!("--filter must hold a cnn-form filter, not an fc matrix")
                    }
                },
            };

            let mut report = ReductionReport {
                mode: "file".into(),
                architecture: arch.label().into(),
                family: spec.label().into(),
                seed: args.seed,
                manifest: Some(manifest.clone()),
                ..ReductionReport::default()
            };
            let tseed = derive_seed(args.seed, "transform", 0);
            let outcome = match arch {
                Architecture::Fc => {
                    reduce_to_random_fc(&sample, filter.as_ref(), &spec, tseed, &policy)
                }
                Architecture::Cnn => {
                    reduce_to_random_cnn(&sample, filter.as_ref(), &spec, tseed, &policy)
                }
            };
            match outcome {
                Err(csp2nn::Error::SingularTransform(reason)) => {
                    report.stages.push(StageRecord {
                        stage: "transform".into(),
                        status: StageStatus::Failed {
                            reason: reason.clone(),
                        },
                    });
                    write_text(&report_path, &report.to_json()?)?;
                    write_text(&manifest_path, &manifest.to_json())?;
                    print!("{}", render_reduction(&report));
                    return Ok(1);
                }
                Err(e) => return Err(e.into()),
                Ok(red) => {
                    finish_reduction(
                        &mut report,
                        &red,
                        &sample,
                        filter.is_some(),
                        ReducePaths {
                            reduced: &reduced_path,
                            weights: &weights_path,
                            chain: &chain_path,
                            csv: args.csv.as_deref(),
                        },
                        &manifest,
                    )?;
                    write_text(&report_path, &report.to_json()?)?;
                    write_text(&manifest_path, &manifest.to_json())?;
                    print!("{}", render_reduction(&report));
                    Ok(u8::from(!report.verdict_ok()))
                }
            }
        }
        (None, Some(mode)) => {
            let (Some(nvars), Some(k)) = (args.nvars, args.k) else {
                bail!("--mode needs --nvars and --k");
            };
            let mut outputs: Vec<String> = vec![
                path_string(&sat_path),
                path_string(&formula_path),
                path_string(&gadget_path),
                path_string(&reduced_path),
                path_string(&chain_path),
                path_string(&report_path),
                path_string(&manifest_path),
            ];
            if mode == ModeArg::Planted {
                outputs.insert(4, path_string(&weights_path));
            }
            if let Some(c) = &args.csv {
                outputs.push(path_string(c));
            }
            let manifest = manifest_for("reduce", args.seed, params, outputs);

            let opts = EndToEndOptions {
                mode: mode.into(),
                architecture: arch,
                n_prime: nvars,
                clause_size: k,
                n_groups: args.groups,
                sat_clauses: args.sat_clauses,
                spec,
                policy,
                seed: args.seed,
            };
            let mut out = end_to_end(&opts)?;
            out.report.manifest = Some(manifest.clone());

            if let Some(f) = &out.sat {
                csp_io::write_formula_file(&sat_path, f, Some(&manifest))?;
                println!("wrote {}", sat_path.display());
            }
            if let Some(f) = &out.mixed {
                csp_io::write_formula_file(&formula_path, f, Some(&manifest))?;
                println!("wrote {}", formula_path.display());
            }
            if let Some(s) = &out.gadget {
                gadget_io::write_sample_file(&gadget_path, s, Some(&manifest))?;
                println!("wrote {}", gadget_path.display());
            }
            if let Some(s) = &out.sample {
                gadget_io::write_sample_file(&reduced_path, s, Some(&manifest))?;
                println!("wrote {}", reduced_path.display());
            }
            if let Some(w) = &out.weights {
                neural_io::write_weights_file(&weights_path, w, Some(&manifest))?;
                println!("wrote {}", weights_path.display());
            }
            if let Some(c) = &out.chain {
                transform_io::write_chain_file(&chain_path, c, Some(&manifest))?;
                println!("wrote {}", chain_path.display());
            }
            if let (Some(csv), Some(input), Some(output)) =
                (args.csv.as_deref(), &out.gadget, &out.sample)
            {
                write_norm_csv(csv, input, output, &manifest)?;
            }
            write_text(&report_path, &out.report.to_json()?)?;
            write_text(&manifest_path, &manifest.to_json())?;
            print!("{}", render_reduction(&out.report));
            Ok(u8::from(!out.report.verdict_ok()))
        }
        (Some(_), Some(_)) => bail!("--sample and --mode are mutually exclusive"),
        (None, None) => bail!("pass a gadget sample (--sample) or run the front end (--mode)"),
    }
}

struct ReducePaths<'a> {
    reduced: &'a Path,
    weights: &'a Path,
    chain: &'a Path,
    csv: Option<&'a Path>,
}

fn finish_reduction(
    report: &mut ReductionReport,
    red: &Reduction,
    input: &LabeledSample,
    had_filter: bool,
    paths: ReducePaths<'_>,
    manifest: &RunManifest,
) -> Result<()> {
    report.transform = Some(red.stats.clone());
    report.pushed_weights = red.weights.as_ref().map(weight_stats);
    report.stages.push(StageRecord {
        stage: "transform".into(),
        status: StageStatus::Completed,
    });
    match &red.weights {
        Some(w) => {
            let chk = check_realizable(&red.sample, w, REALIZABILITY_TOL)?;
            report.realizability = Some(RealizabilityStats {
                tolerance: REALIZABILITY_TOL,
                residual: chk.residual,
                realizable: chk.realizable,
                labels_exact: chk.labels_exact,
            });
            report.stages.push(StageRecord {
                stage: "verify".into(),
                status: StageStatus::Completed,
            });
            neural_io::write_weights_file(paths.weights, w, Some(manifest))?;
            println!("wrote {}", paths.weights.display());
        }
        None => {
            report.stages.push(StageRecord {
                stage: "verify".into(),
                status: StageStatus::Skipped {
                    reason: if had_filter {
                        "no weights emitted".into()
                    } else {
                        "no realizing filter supplied".into()
                    },
                },
            });
        }
    }
    gadget_io::write_sample_file(paths.reduced, &red.sample, Some(manifest))?;
    println!("wrote {}", paths.reduced.display());
    transform_io::write_chain_file(paths.chain, &red.chain, Some(manifest))?;
    println!("wrote {}", paths.chain.display());
    if let Some(csv) = paths.csv {
        write_norm_csv(csv, input, &red.sample, manifest)?;
    }
    Ok(())
}

fn write_norm_csv(
    path: &Path,
    input: &LabeledSample,
    output: &LabeledSample,
    manifest: &RunManifest,
) -> Result<()> {
    let mut text = format!("# manifest {}\n", manifest.to_json());
    text.push_str("point,label,input_norm,output_norm\n");
    for (i, (a, b)) in input.points().iter().zip(output.points()).enumerate() {
        let na = a.x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb = b.x.iter().map(|v| v * v).sum::<f64>().sqrt();
        text.push_str(&format!("{i},{},{na:?},{nb:?}\n", a.y));
    }
    write_text(path, &text)
}

fn render_reduction(report: &ReductionReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "run: mode {}, architecture {}, family {}, seed {}\n",
        report.mode, report.architecture, report.family, report.seed
    ));
    for s in &report.stages {
        match &s.status {
            StageStatus::Completed => out.push_str(&format!("stage {}: completed\n", s.stage)),
            StageStatus::Skipped { reason } => {
                out.push_str(&format!("stage {}: skipped ({reason})\n", s.stage))
            }
            StageStatus::Failed { reason } => {
                out.push_str(&format!("stage {}: FAILED ({reason})\n", s.stage))
            }
        }
    }
    if let Some(g) = &report.grouping {
        out.push_str(&format!(
            "grouping: {} of {} groups from {} clauses\n",
            g.groups_built, g.groups_requested, g.source_clauses
        ));
    }
    if let Some(f) = &report.mixed_formula {
        let broken = f
            .negated_satisfied
            .map(|s| format!(", plant satisfies {s} of {}", f.negated_constraints));
        out.push_str(&format!(
            "mixed formula: {} constraints, {} negated{}\n",
            f.n_constraints,
            f.negated_constraints,
            broken.unwrap_or_default()
        ));
    }
    if let Some(t) = &report.transform {
        out.push_str(&format!(
            "transform: {} in {} attempt(s), smin {:.3e} vs floor {:.3e} ({}), cond {:.3e}\n",
            t.description,
            t.attempts,
            t.smin,
            t.smin_threshold,
            if t.smin_event_held {
                "event held"
            } else {
                "event failed"
            },
            t.condition_number
        ));
        out.push_str(&format!(
            "norms: max {:.6} vs ceiling {:.6} ({})\n",
            t.output_max_norm,
            t.norm_threshold,
            if t.norm_within_threshold {
                "within"
            } else if t.norm_compliant {
                "exceeded, excused by failed smin event"
            } else {
                "EXCEEDED"
            }
        ));
    }
    if let Some(w) = &report.pushed_weights {
        if w.form == "cnn" {
            out.push_str(&format!(
                "weights: cnn filter over {} taps, norm {:?}\n",
                w.dim, w.max_norm
            ));
        } else {
            out.push_str(&format!(
                "weights: fc, {} columns of dim {}, column norms in [{:?}, {:?}]\n",
                w.units, w.dim, w.min_norm, w.max_norm
            ));
        }
    }
    if let Some(r) = &report.realizability {
        out.push_str(&format!(
            "realizability: residual {:.3e} vs tol {:.1e} -> {}{}\n",
            r.residual,
            r.tolerance,
            if r.realizable { "realizable" } else { "NOT realizable" },
            if r.labels_exact { ", labels exact" } else { "" }
        ));
    }
    out.push_str(&format!(
        "verdict: {}\n",
        if report.verdict_ok() { "ok" } else { "FAILED" }
    ));
    out
}

// ─── verify ───

/// Reports bundled with the manifest so saved JSON carries its provenance.
#[derive(serde::Serialize, serde::Deserialize)]
struct VerifyDocument {
    manifest: RunManifest,
    reports: Vec<StatReport>,
}

fn finish_verify(
    reports: Vec<StatReport>,
    manifest: RunManifest,
    json: Option<&Path>,
) -> Result<u8> {
    print!("{}", render_table(&reports));
    if let Some(path) = json {
        let doc = VerifyDocument {
            manifest,
            reports: reports.clone(),
        };
        write_text(path, &serde_json::to_string_pretty(&doc)?)?;
    }
    Ok(exit_code(&reports) as u8)
}

fn cmd_verify(cmd: VerifyCmd) -> Result<u8> {
    match cmd {
        VerifyCmd::Realizable {
            sample,
            weights,
            tol,
            json,
        } => {
            let (s, _) = gadget_io::read_sample_file(&sample)
                .with_context(|| format!("reading {}", sample.display()))?;
            let w = neural_io::read_weights_file(&weights)
                .with_context(|| format!("reading {}", weights.display()))?;
            let chk = check_realizable(&s, &w, tol)?;
            let mut params = BTreeMap::new();
            params.insert("sample".into(), path_string(&sample));
            params.insert("weights".into(), path_string(&weights));
            params.insert("tol".into(), format!("{tol:?}"));
            let outputs = json.iter().map(|p| path_string(p)).collect();
            let report = StatReport {
                test: "realizable".into(),
                statistic: chk.residual,
                p_value: None,
                outcome: if chk.realizable {
                    Outcome::Pass
                } else {
                    Outcome::Fail
                },
                sample_size: s.len(),
                threshold: tol,
                note: format!(
                    "max pre-clip residual; labels exact: {}",
                    chk.labels_exact
                ),
            };
            finish_verify(
                vec![report],
                manifest_for("verify-realizable", 0, params, outputs),
                json.as_deref(),
            )
        }
        VerifyCmd::Scattered { sample, json } => {
            let (s, _) = gadget_io::read_sample_file(&sample)
                .with_context(|| format!("reading {}", sample.display()))?;
            let reports = test_scattered(&s)?;
            let mut params = BTreeMap::new();
            params.insert("sample".into(), path_string(&sample));
            let outputs = json.iter().map(|p| path_string(p)).collect();
            finish_verify(
                reports,
                manifest_for("verify-scattered", 0, params, outputs),
                json.as_deref(),
            )
        }
        VerifyCmd::Distribution {
            weights,
            family,
            params: fam,
            reference_seed,
            json,
        } => {
            let spec = build_spec(family, &fam)?;
            let mut columns: Vec<Vec<f64>> = Vec::new();
            for path in &weights {
                match neural_io::read_weights_file(path)
                    .with_context(|| format!("reading {}", path.display()))?
                {
                    NetworkWeights::Fc(fc) => columns.extend(fc.columns().iter().cloned()),
                    NetworkWeights::Cnn(f) => columns.push(f.weights().to_vec()),
                }
            }
            let reports = test_distribution(&columns, &spec, reference_seed)?;
            let mut params = BTreeMap::new();
            params.insert("family".into(), spec.label().into());
            params.insert(
                "weights".into(),
                weights
                    .iter()
                    .map(|p| path_string(p))
                    .collect::<Vec<_>>()
                    .join(","),
            );
            let outputs = json.iter().map(|p| path_string(p)).collect();
            finish_verify(
                reports,
                manifest_for("verify-distribution", reference_seed, params, outputs),
                json.as_deref(),
            )
        }
        VerifyCmd::SminTail {
            family,
            params: fam,
            nvars,
            k,
            trials,
            threshold,
            exceedance_bound,
            seed,
            csv,
            json,
        } => {
            let spec = build_spec(family, &fam)?;
            let floor = match threshold {
                Some(t) => t,
                None => smin_threshold(&spec, nvars)?,
            };
            let tail = mc_smin_tail(&spec, nvars, k, trials, floor, seed)?;
            let mut params = BTreeMap::new();
            for (key, v) in [
                ("family", spec.label().to_string()),
                ("nvars", nvars.to_string()),
                ("k", k.to_string()),
                ("trials", trials.to_string()),
                ("threshold", format!("{floor:?}")),
            ] {
                params.insert(key.into(), v);
            }
            let mut outputs: Vec<String> = csv.iter().map(|p| path_string(p)).collect();
            outputs.extend(json.iter().map(|p| path_string(p)));
            let manifest = manifest_for("verify-smin-tail", seed, params, outputs);

            if let Some(csv_path) = &csv {
                let values = mc_smin_values(&spec, nvars, k, trials, seed)?;
                let mut text = format!("# manifest {}\n", manifest.to_json());
                text.push_str("trial,smin\n");
                for (i, v) in values.iter().enumerate() {
                    text.push_str(&format!("{i},{v:?}\n"));
                }
                write_text(csv_path, &text)?;
            }
            println!(
                "smin tail: {} of {} trials below {:.6e} -> exceedance {:.4}",
                tail.below, tail.trials, tail.threshold, tail.exceedance
            );
            match exceedance_bound {
                None => {
                    if let Some(path) = &json {
                        let doc = serde_json::json!({
                            "manifest": manifest,
                            "tail": tail,
                        });
                        write_text(path, &serde_json::to_string_pretty(&doc)?)?;
                    }
                    Ok(0)
                }
                Some(bound) => {
                    let report = StatReport {
                        test: "smin-tail".into(),
                        statistic: tail.exceedance,
                        p_value: None,
                        outcome: if tail.exceedance <= bound {
                            Outcome::Pass
                        } else {
                            Outcome::Fail
                        },
                        sample_size: trials,
                        threshold: bound,
                        note: format!("fraction of trials with smin below {:.6e}", tail.threshold),
                    };
                    finish_verify(vec![report], manifest, json.as_deref())
                }
            }
        }
        VerifyCmd::Distinguish {
            learner,
            sample,
            budget,
            seed,
            weights,
            json,
        } => {
            let (s, _) = gadget_io::read_sample_file(&sample)
                .with_context(|| format!("reading {}", sample.display()))?;
            let mut boxed: Box<dyn Learner> = match learner {
                LearnerArg::Constant => Box::new(ConstantLearner),
                LearnerArg::Memorizing => Box::new(MemorizingLearner),
                LearnerArg::Cheating => {
                    let Some(wp) = &weights else {
                        bail!("the cheating learner needs --weights");
                    };
                    Box::new(CheatingLearner {
                        weights: neural_io::read_weights_file(wp)
                            .with_context(|| format!("reading {}", wp.display()))?,
                    })
                }
            };
            let report = distinguish_with_learner(boxed.as_mut(), &s, budget, seed)?;
            println!(
                "verdict: {} (loss {:.6} vs bound {}, {} of {} draws, {} points)",
                match report.verdict {
                    Verdict::Realizable => "realizable",
                    Verdict::Scattered => "scattered",
                },
                report.loss,
                report.loss_bound,
                report.draws_used,
                report.budget,
                report.sample_size
            );
            if let Some(path) = &json {
                let mut params = BTreeMap::new();
                params.insert("learner".into(), report.learner.clone());
                params.insert("budget".into(), budget.to_string());
                params.insert("sample".into(), path_string(&sample));
                let manifest = manifest_for(
                    "verify-distinguish",
                    seed,
                    params,
                    vec![path_string(path)],
                );
                let doc = serde_json::json!({
                    "manifest": manifest,
                    "distinguish": report,
                });
                write_text(path, &serde_json::to_string_pretty(&doc)?)?;
            }
            Ok(0)
        }
    }
}

// ─── report ───

fn cmd_report(args: ReportArgs) -> Result<u8> {
    let text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;

    let reports: Option<Vec<StatReport>> = serde_json::from_str::<Vec<StatReport>>(&text)
        .ok()
        .or_else(|| {
            serde_json::from_str::<VerifyDocument>(&text)
                .ok()
                .map(|d| d.reports)
        });
    if let Some(reports) = reports {
        print!("{}", render_table(&reports));
        if let Some(csv) = &args.csv {
            let mut text = String::from("test,outcome,statistic,p_value,sample_size,threshold,note\n");
            for r in &reports {
                text.push_str(&format!(
                    "{},{},{:?},{},{},{:?},{:?}\n",
                    r.test,
                    r.outcome.label(),
                    r.statistic,
                    r.p_value.map(|p| format!("{p:?}")).unwrap_or_default(),
                    r.sample_size,
                    r.threshold,
                    r.note
                ));
            }
            write_text(csv, &text)?;
        }
        return Ok(exit_code(&reports) as u8);
    }

    if let Ok(report) = ReductionReport::from_json(&text) {
        if args.csv.is_some() {
            bail!("--csv applies to statistical reports, not reduction reports");
        }
        print!("{}", render_reduction(&report));
        return Ok(u8::from(!report.verdict_ok()));
    }

    if let Ok(doc) = serde_json::from_str::<serde_json::Value>(&text) {
        if let Some(d) = doc.get("distinguish") {
            let report: DistinguishReport = serde_json::from_value(d.clone())?;
            println!(
                "verdict: {} (loss {:.6} vs bound {}, learner {})",
                match report.verdict {
                    Verdict::Realizable => "realizable",
                    Verdict::Scattered => "scattered",
                },
                report.loss,
                report.loss_bound,
                report.learner
            );
            return Ok(0);
        }
    }
    bail!("unrecognized report format in {}", args.input.display())
}
