//! `tdesign`: build, verify and use approximate quantum designs from the
//! command line. Every command prints one JSON document carrying the
//! parsed configuration and the library version; failures print an error
//! document and exit non-zero.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::ToPrimitive;
use serde::Serialize;
use serde_json::{json, Map, Value};

use tdesign::design::{
    build_design, build_design_improved, build_mub_design, DesignEnsemble, EnsembleSpec,
};
use tdesign::distinction::{distinguish, haar_baseline, mub_counterexample};
use tdesign::haar::{haar_expectation, Monomial};
use tdesign::povm::{chi_square, total_variation, TwoStagePovm};
use tdesign::quadrature::{haar_limit_rule, round_rule};
use tdesign::reduce::with_threads;
use tdesign::states::{DensityMatrix, PureState};
use tdesign::verifier::{check_conditions, Route, VerifyOptions};
use tdesign::Error;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "tdesign", version, about = "Explicit approximate quantum (t,t)-designs")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, env = "TDESIGN_THREADS")]
    threads: Option<usize>,
    /// Write the JSON document here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
enum Command {
    /// Emit the spec of an ensemble (parameters, rule, family seeds, size).
    Build(EnsembleArgs),
    /// Check the design conditions and the frame-operator epsilon.
    Verify(VerifyArgs),
    /// Distinguish two density matrices with the design POVM.
    Distinguish(DistinguishArgs),
    /// MUB (2,2)-design check and the 2/(N+1) counterexample.
    MubCheck(MubArgs),
    /// Sample the two-stage POVM and compare with exact probabilities.
    SamplePovm(SampleArgs),
    /// Dump the quadrature rule of order t, optionally rounded to 1/N.
    Quadrature(QuadratureArgs),
    /// Exact Haar expectation of an amplitude monomial.
    HaarMoment(HaarArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum VariantArg {
    Main,
    Improved,
    Mub,
}

#[derive(Args, Debug, Serialize)]
struct EnsembleArgs {
    #[arg(long, value_enum, default_value = "main")]
    variant: VariantArg,
    /// Dimension: a power of two for main/improved, a prime for mub.
    #[arg(long = "n", required_unless_present = "spec_file")]
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    n: Option<u64>,
    /// Design order (mub ensembles are (2,2)-designs).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<u32>,
    /// Target epsilon for the improved construction.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    /// Regenerate the ensemble from a spec file written by `build`.
    #[arg(long, conflicts_with_all = ["n", "epsilon"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    spec_file: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum RouteArg {
    Auto,
    Streamed,
    Factored,
}

#[derive(Args, Debug, Serialize)]
struct VerifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    ensemble: EnsembleArgs,
    #[arg(long, value_enum, default_value = "auto")]
    route: RouteArg,
    /// Largest symmetric-subspace dimension for the frame operator.
    #[arg(long, default_value_t = 2048)]
    frame_budget: u64,
    /// Largest moment-matrix dimension on the streamed route.
    #[arg(long, default_value_t = 512)]
    moment_budget: u64,
    /// Largest number of monomials checked before striding.
    #[arg(long, default_value_t = 1 << 22)]
    monomial_budget: u64,
    /// Epsilon claimed for the balanced-monomial condition.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    claimed_epsilon: Option<f64>,
    /// Enumerate phase families instead of using exact independence.
    #[arg(long)]
    enumerate_phases: bool,
    /// Include the per-monomial table.
    #[arg(long)]
    table: bool,
}

#[derive(Args, Debug, Serialize)]
struct DistinguishArgs {
    #[command(flatten)]
    #[serde(flatten)]
    ensemble: EnsembleArgs,
    /// First density matrix: JSON {"N","entries"}, pure-state JSON or CSV.
    #[arg(long)]
    rho1: PathBuf,
    #[arg(long)]
    rho2: PathBuf,
    /// Haar-random-basis trials for the baseline (0 skips it).
    #[arg(long, default_value_t = 0)]
    baseline_trials: u64,
    /// Required when a baseline is requested.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Args, Debug, Serialize)]
struct MubArgs {
    /// Prime dimension (or 2).
    #[arg(long = "n")]
    #[serde(rename = "N")]
    n: u64,
}

#[derive(Args, Debug, Serialize)]
struct SampleArgs {
    #[arg(long = "n")]
    #[serde(rename = "N")]
    n: u64,
    #[arg(long)]
    t: u32,
    /// Pure state JSON {"amplitudes": [[re, im], ...]}; defaults to |0>.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    state_file: Option<PathBuf>,
    #[arg(long)]
    count: u64,
    #[arg(long)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct QuadratureArgs {
    #[arg(long)]
    t: u32,
    /// Round the weights to multiples of 1/N.
    #[arg(long = "n")]
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    n: Option<u64>,
}

#[derive(Args, Debug, Serialize)]
struct HaarArgs {
    #[arg(long = "n")]
    #[serde(rename = "N")]
    n: u64,
    /// Terms `index:c,d` or `index:c` (meaning c = d) separated by `;`.
    /// Indices start at 0; `c` counts alpha_i and `d` its conjugate.
    /// Balanced terms may also be chained with commas: "1:2,2:0" is |alpha_1|^4.
    #[arg(long, allow_hyphen_values = true)]
    monomial: String,
}

#[derive(Debug)]
enum Failure {
    Library(Error),
    Io(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Library(e)
    }
}

impl Failure {
    fn document(&self) -> Value {
        let (kind, message) = match self {
            Failure::Library(e) => (e.kind(), e.to_string()),
            Failure::Io(m) => ("io", m.clone()),
            Failure::Usage(m) => ("usage", m.clone()),
        };
        json!({ "error": { "kind": kind, "message": message }, "version": VERSION })
    }

    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn read(path: &PathBuf) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn ensemble(args: &EnsembleArgs) -> Result<DesignEnsemble, Failure> {
    if let Some(path) = &args.spec_file {
        let spec: EnsembleSpec =
            serde_json::from_str(&read(path)?).map_err(|e| Error::Parse(e.to_string()))?;
        return Ok(DesignEnsemble::from_spec(&spec)?);
    }
    let n = args.n.ok_or_else(|| Failure::Usage("--n is required".into()))?;
    let need_t = || args.t.ok_or_else(|| Failure::Usage("--t is required".into()));
    Ok(match args.variant {
        VariantArg::Main => build_design(n, need_t()?)?,
        VariantArg::Improved => {
            let eps = args
                .epsilon
                .ok_or_else(|| Failure::Usage("--epsilon is required for the improved variant".into()))?;
            build_design_improved(n, need_t()?, eps)?
        }
        VariantArg::Mub => {
            if let Some(t) = args.t.filter(|&t| t != 2) {
                return Err(Failure::Usage(format!("mub ensembles are (2,2)-designs, got --t {t}")));
            }
            build_mub_design(n)?
        }
    })
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serialises")
}

fn integer(v: &num_bigint::BigInt) -> Value {
    match v.to_i64() {
        Some(x) => json!(x),
        None => json!(v.to_string()),
    }
}

fn run(command: &Command) -> Result<Value, Failure> {
    Ok(match command {
        Command::Build(args) => to_value(&ensemble(args)?.spec()),
        Command::Verify(args) => {
            let e = ensemble(&args.ensemble)?;
            let opts = VerifyOptions {
                route: match args.route {
                    RouteArg::Auto => Route::Auto,
                    RouteArg::Streamed => Route::Streamed,
                    RouteArg::Factored => Route::Factored,
                },
                frame_budget: args.frame_budget,
                moment_budget: args.moment_budget,
                monomial_budget: args.monomial_budget,
                enumerate_phases: args.enumerate_phases,
                table: args.table,
                ..VerifyOptions::default()
            };
            let t = args.ensemble.t.unwrap_or(e.order());
            let claimed = args.claimed_epsilon.or(e.epsilon());
            to_value(&check_conditions(&e, t, claimed, &opts)?)
        }
        Command::Distinguish(args) => {
            let e = ensemble(&args.ensemble)?;
            let rho1 = DensityMatrix::parse(&read(&args.rho1)?)?;
            let rho2 = DensityMatrix::parse(&read(&args.rho2)?)?;
            let mut report = distinguish(&e, &rho1, &rho2)?;
            if args.baseline_trials > 0 {
                let seed = args
                    .seed
                    .ok_or_else(|| Failure::Usage("--seed is required with --baseline-trials".into()))?;
                report.haar_baseline = Some(haar_baseline(&rho1, &rho2, args.baseline_trials, seed)?);
            }
            to_value(&report)
        }
        Command::MubCheck(args) => {
            let e = build_mub_design(args.n)?;
            let report = check_conditions(&e, 2, Some(0.0), &VerifyOptions::default())?;
            let l1 = mub_counterexample(args.n)?;
            let expected = 2.0 / (args.n as f64 + 1.0);
            json!({
                "N": args.n,
                "size": e.size(),
                "measured_epsilon": report.measured_epsilon,
                "max_unbalanced_residual": report.max_unbalanced_residual,
                "counterexample_l1": l1,
                "expected_l1": expected,
                "counterexample_matches": (l1 - expected).abs() <= 1e-10,
            })
        }
        Command::SamplePovm(args) => {
            let state = match &args.state_file {
                Some(path) => PureState::from_json_str(&read(path)?)?,
                None => PureState::basis(args.n as usize, 0),
            };
            let povm = TwoStagePovm::new(args.n, args.t)?;
            let exact = povm.composed_distribution(&state)?;
            let hist = povm.sample(&state, args.count, args.seed)?;
            let outcomes: Vec<Value> = hist
                .counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(i, &c)| {
                    let (f, g) = (i as u64 / hist.g_count, i as u64 % hist.g_count);
                    json!({
                        "f": povm.f_coefficients(f),
                        "g": povm.g_coefficients(g),
                        "count": c,
                        "probability": exact[i],
                    })
                })
                .collect();
            let chi = if args.count > 0 { Some(chi_square(&hist.counts, &exact)?) } else { None };
            json!({
                "N": args.n,
                "t": args.t,
                "shots": hist.shots,
                "seed": hist.seed,
                "f_count": hist.f_count,
                "g_count": hist.g_count,
                "total_variation": (args.count > 0).then(|| total_variation(&hist.frequencies(), &exact)),
                "chi_square": chi,
                "outcomes": outcomes,
            })
        }
        Command::Quadrature(args) => {
            let mut rule = haar_limit_rule(args.t)?;
            if let Some(n) = args.n {
                rule = round_rule(&rule, n)?;
            }
            let moments: Vec<f64> = (0..=2 * args.t).map(|j| rule.moment(j)).collect();
            let mut v = to_value(&rule);
            v["moments"] = json!(moments);
            v
        }
        Command::HaarMoment(args) => {
            let m: Monomial = args.monomial.parse()?;
            let value = haar_expectation(args.n, &m)?;
            json!({
                "num": integer(value.numer()),
                "den": integer(value.denom()),
                "value": value.to_f64(),
                "monomial": m.to_string(),
            })
        }
    })
}

fn emit(doc: &Value, output: Option<&PathBuf>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(doc).expect("json values serialise") + "\n";
    match output {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let failure = Failure::Usage(e.render().to_string().trim().to_string());
            let _ = emit(&failure.document(), None);
            return ExitCode::from(failure.exit_code());
        }
    };
    let result = with_threads(cli.threads, || run(&cli.command));
    let outcome = result.and_then(|body| {
        let mut doc = match body {
            Value::Object(map) => map,
            other => Map::from_iter([("result".to_string(), other)]),
        };
        let config = to_value(&cli.command);
        doc.insert("config".into(), config);
        doc.insert("version".into(), json!(VERSION));
        emit(&Value::Object(doc), cli.output.as_ref())
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let _ = emit(&failure.document(), None);
            ExitCode::from(failure.exit_code())
        }
    }
}
