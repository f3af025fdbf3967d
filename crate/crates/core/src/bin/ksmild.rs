use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ksmild::fixtures::Fixture;
use ksmild::gevrey::GevreyWeight;
use ksmild::runner::{self, error_category, Command, DataSpec, PairKind, RunConfig, Scaling};
use ksmild::KsError;

#[derive(Parser)]
#[command(
    name = "ksmild",
    version,
    about = "Mild Kuramoto-Sivashinsky solutions on the torus"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Picard solve of the mild equation.
    Solve(Opts),
    /// Picard solve of the exponentially weighted equation.
    SolveWeighted(Opts),
    /// Reference Galerkin integration.
    Oracle(Opts),
    /// Randomized and exhaustive checks of the estimates.
    VerifyEstimates(Opts),
    /// Solve, then fit the decay rate of the spectrum.
    Radius(Opts),
    /// Norms of a snapshot.
    Norms(Opts),
    /// Run from a JSON config or a previous run's manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the output directory of the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Default)]
struct Opts {
    #[arg(long)]
    dim: Option<usize>,
    /// Periods, comma separated (one per axis).
    #[arg(long = "L", value_delimiter = ',')]
    lengths: Vec<f64>,
    /// Mode cutoff per axis.
    #[arg(long = "N")]
    cutoff: Option<usize>,
    /// Horizon of the symbol table (required when a period is >= 2 pi).
    #[arg(long = "T")]
    horizon: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Named data: cos1, pm-boundary, y-lacunary.
    #[arg(long, conflicts_with_all = ["data", "random_seed"])]
    fixture: Option<Fixture>,
    /// Data snapshot CSV.
    #[arg(long, conflicts_with = "random_seed")]
    data: Option<PathBuf>,
    /// Random data with this seed.
    #[arg(long)]
    random_seed: Option<u64>,
    /// Decay exponent of random data.
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    /// Rescale the data to this norm in the pair's data space.
    #[arg(long, conflicts_with = "eta_fraction")]
    norm: Option<f64>,
    /// Rescale the data norm to this fraction of 1/(4 eta).
    #[arg(long, conflicts_with = "gate_fraction")]
    eta_fraction: Option<f64>,
    /// Rescale the data so that the gate product 4 eta |S phi0| is this.
    #[arg(long, conflicts_with = "norm")]
    gate_fraction: Option<f64>,
    /// Use the data unscaled.
    #[arg(long, conflicts_with_all = ["norm", "eta_fraction", "gate_fraction"])]
    unscaled: bool,
    /// Space pair: Y or PM.
    #[arg(long)]
    pair: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    /// Weight family: linear or fourth-root.
    #[arg(long)]
    weight: Option<String>,
    #[arg(long, requires = "weight")]
    weight_param: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Largest oracle step.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    range: Option<i32>,
    /// Snapshot for the norms command.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Norm ids, comma separated, e.g. Y[-1],PM[-0.25].
    #[arg(long, value_delimiter = ',')]
    norms: Vec<String>,
    #[arg(long)]
    noise_floor: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    radius_times: Vec<f64>,
    /// Output directory (default: $KSMILD_OUTPUT_DIR or ./ksmild-out).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn build_config(command: Command, o: Opts) -> Result<RunConfig, KsError> {
    let mut c = RunConfig::new(command);
    if let Some(d) = o.dim {
        c.dim = d;
    } else if !o.lengths.is_empty() {
        c.dim = o.lengths.len();
    }
    c.lengths = o.lengths;
    if let Some(n) = o.cutoff {
        c.cutoff = n;
    }
    c.horizon = o.horizon;
    if let Some(t) = o.t_end {
        c.t_end = t;
    } else if let Some(h) = o.horizon {
        c.t_end = c.t_end.min(h);
    }
    c.steps = o.steps;
    if let Some(name) = o.fixture {
        c.data = DataSpec::Fixture { name };
    } else if let Some(path) = o.data {
        c.data = DataSpec::File { path };
    } else if let Some(seed) = o.random_seed {
        c.data = DataSpec::Random {
            seed,
            alpha: o.alpha,
        };
    }
    c.scaling = if o.unscaled {
        Some(Scaling::Unscaled)
    } else if let Some(value) = o.norm {
        Some(Scaling::DataNorm { value })
    } else if let Some(value) = o.gate_fraction {
        Some(Scaling::GateFraction { value })
    } else {
        o.eta_fraction.map(|value| Scaling::EtaFraction { value })
    };
    if let Some(pair) = o.pair {
        c.pair = match pair.as_str() {
            "Y" | "y" => PairKind::Y,
            "PM" | "pm" => PairKind::Pm,
            other => return Err(KsError::Config(format!("unknown pair {other:?}"))),
        };
    }
    if let Some(p) = o.p {
        c.p = p;
    }
    if let Some(kind) = o.weight {
        let param = o.weight_param;
        c.weight =
            Some(match kind.as_str() {
                "linear" => GevreyWeight::linear(param.ok_or_else(|| {
                    KsError::Config("--weight linear needs --weight-param".into())
                })?),
                "fourth-root" => GevreyWeight::fourth_root(param.unwrap_or(1.0)),
                other => return Err(KsError::Config(format!("unknown weight {other:?}"))),
            });
    }
    macro_rules! set {
        ($($f:ident),*) => { $( if let Some(v) = o.$f { c.$f = v; } )* };
    }
    set!(tol, max_iter, dt, trials, seed, range, noise_floor);
    c.input = o.input;
    c.norms = o.norms;
    if !o.radius_times.is_empty() {
        c.radius_times = o.radius_times;
    }
    c.output_dir = o.out;
    Ok(c)
}

fn report_error(err: &KsError) -> ExitCode {
    let (category, code) = error_category(err);
    eprintln!(
        "{}",
        serde_json::json!({ "error": category, "exit_code": code, "message": err.to_string() })
    );
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match cli.command {
        Cmd::Solve(o) => build_config(Command::Solve, o),
        Cmd::SolveWeighted(o) => build_config(Command::SolveWeighted, o),
        Cmd::Oracle(o) => build_config(Command::Oracle, o),
        Cmd::VerifyEstimates(o) => build_config(Command::VerifyEstimates, o),
        Cmd::Radius(o) => build_config(Command::Radius, o),
        Cmd::Norms(o) => build_config(Command::Norms, o),
        Cmd::Run { config, out } => std::fs::read_to_string(&config)
            .map_err(|e| KsError::Config(format!("{}: {e}", config.display())))
            .and_then(|text| RunConfig::from_json(&text))
            .map(|mut c| {
                if out.is_some() {
                    c.output_dir = out;
                }
                c
            }),
    };
    let config = match config {
        Ok(c) => c,
        Err(e) => return report_error(&e),
    };
    match runner::run(&config) {
        Ok(outcome) => {
            println!("{}", outcome.output_dir.join("manifest.json").display());
            if let Some(n) = outcome.manifest.get("norms") {
                println!("{n}");
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => report_error(&e),
    }
}
