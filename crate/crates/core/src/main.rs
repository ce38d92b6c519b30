use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use ssdfit::plot::turnbull_csv;
use ssdfit::report::format_number;
use ssdfit::{
    build_report, parse_dataset, render_plot_data, summarize, transform_to_non_censored,
    turnbull_estimate, AnalysisOptions, BootstrapPlan, Dataset, Error, Family, FitOptions, Method,
    TurnbullOptions, DEFAULT_HC_LEVELS,
};

#[derive(Parser)]
#[command(name = "ssdfit", version, about = "Fit species sensitivity distributions to censored toxicity data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit distributions and report hazardous concentrations
    Fit(FitArgs),
    /// Nonparametric (Turnbull) CDF as step points
    Turnbull {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        full_precision: bool,
    },
    /// Drop left/right-censored values and replace intervals by their midpoint
    Transform {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count observations by censoring kind
    Summary {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    /// Distributions to fit
    #[arg(long, value_delimiter = ',', default_value = "lognormal")]
    dist: Vec<Family>,
    /// Estimation methods; maximum likelihood always runs
    #[arg(long, value_delimiter = ',', default_value = "mle")]
    method: Vec<Method>,
    /// HC levels in percent
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_HC_LEVELS.to_vec())]
    hc: Vec<f64>,
    #[arg(long)]
    bootstrap: bool,
    #[arg(long, default_value_t = 5)]
    batches: usize,
    #[arg(long, default_value_t = 1000)]
    batch_size: usize,
    /// Upper bound on the batch count when doubling towards convergence
    #[arg(long, default_value_t = 80)]
    max_batches: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bootstrap time budget in seconds
    #[arg(long, default_value_t = 300.0)]
    time_limit: f64,
    /// Exit with status 4 if the bootstrap did not converge
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    curves: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long)]
    full_precision: bool,
    /// Worker threads for the bootstrap (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Record bootstrap wall-clock time in the report
    #[arg(long)]
    timings: bool,
}

const EXIT_PARSE: u8 = 2;
const EXIT_FIT: u8 = 3;
const EXIT_UNCONVERGED: u8 = 4;
const EXIT_IO: u8 = 5;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Json(_) => EXIT_IO,
        e if e.is_input_error() => EXIT_PARSE,
        Error::InvalidArgument(_) => EXIT_PARSE,
        _ => EXIT_FIT,
    }
}

fn read_dataset(path: &Path) -> Result<Dataset, Error> {
    parse_dataset(&fs::read_to_string(path)?)
}

fn write_or_print(path: Option<&Path>, content: &str) -> Result<(), Error> {
    match path {
        Some(p) => fs::write(p, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn run_fit(args: &FitArgs) -> Result<u8, Error> {
    let d = read_dataset(&args.input)?;
    if !(args.time_limit >= 0.0 && args.time_limit.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid time limit {}", args.time_limit)));
    }
    let plan = args.bootstrap.then(|| BootstrapPlan {
        batches: args.batches,
        batch_size: args.batch_size,
        max_batches: args.max_batches,
        seed: args.seed,
        time_budget: Duration::from_secs_f64(args.time_limit),
        ..Default::default()
    });
    if let Some(p) = &plan {
        p.validate()?;
    }
    let opts = AnalysisOptions {
        families: args.dist.clone(),
        methods: args.method.clone(),
        bootstrap: plan,
        hc_levels: args.hc.clone(),
        fit: FitOptions::default(),
        record_elapsed: args.timings,
    };
    let analysis = match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(|| build_report(&d, &opts))?,
        None => build_report(&d, &opts)?,
    };
    let report = &analysis.report;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    write_or_print(args.out.as_deref(), &report.to_json(args.full_precision)?)?;

    if args.curves.is_some() || args.svg.is_some() {
        let table = render_plot_data(&d, &analysis.fits)?;
        if let Some(p) = &args.curves {
            fs::write(p, table.to_csv(args.full_precision))?;
        }
        if let Some(p) = &args.svg {
            let top = &report.ranking[0];
            let level = report
                .hc_table
                .iter()
                .find(|row| row.family == top.family && row.method == top.method)
                .and_then(|row| {
                    let est = &row.estimates;
                    est.iter().find(|e| e.p == 5.0).or(est.first())
                })
                .map(|e| (e.p, e.point));
            fs::write(p, table.to_svg(level))?;
        }
    }
    if args.strict && report.bootstrap_unconverged() {
        eprintln!("bootstrap did not converge");
        return Ok(EXIT_UNCONVERGED);
    }
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Fit(args) => run_fit(&args),
        Command::Turnbull {
            input,
            out,
            full_precision,
        } => {
            let d = read_dataset(&input)?;
            let curve = turnbull_estimate(&d, &TurnbullOptions::default())?;
            write_or_print(out.as_deref(), &turnbull_csv(&curve, full_precision))?;
            Ok(0)
        }
        Command::Transform { input, out } => {
            let d = read_dataset(&input)?;
            let t = transform_to_non_censored(&d)?;
            write_or_print(out.as_deref(), &t.to_text())?;
            Ok(0)
        }
        Command::Summary { input } => {
            let s = summarize(&read_dataset(&input)?);
            println!("observations       {}", s.n_total);
            println!("exact              {}", s.n_exact);
            println!("left-censored      {}", s.n_left);
            println!("right-censored     {}", s.n_right);
            println!("interval-censored  {}", s.n_interval);
            println!("fraction censored  {}", format_number(s.fraction_censored, false));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
