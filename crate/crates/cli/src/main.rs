use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use elliptic_lss::harness::{self, ExperimentConfig};
use elliptic_lss::mp_law::MpLaw;
use elliptic_lss::pipeline::{self, InputKind, Layout};
use elliptic_lss::rng::{derive_stream, Purpose};
use elliptic_lss::sphericity::{s_bar, tlr_power, TestConfig, TestKind, S_MARGIN};
use elliptic_lss::spectrum::DiscreteSpectrum;
use elliptic_lss::Error;

#[derive(Parser)]
#[command(name = "elliptic-lss", version, about = "Sphericity tests and spectral statistics for elliptical data")]
struct Cli {
    /// Increase logging verbosity (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment described by a JSON config
    Simulate(SimulateArgs),
    /// Run a sphericity test on a price or return file
    Test(TestArgs),
    /// Density or support edges of the limiting spectral law
    MpLaw(MpLawArgs),
    /// Power curve of the TLR_tilde test over s
    Power(PowerArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Directory for replications.csv, qq.csv and summary.json
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the seed in the config
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    T1,
    T2,
    Tm,
    Tlr,
    TlrTilde,
}

impl From<Method> for TestKind {
    fn from(m: Method) -> Self {
        match m {
            Method::T1 => TestKind::T1,
            Method::T2 => TestKind::T2,
            Method::Tm => TestKind::Tm,
            Method::Tlr => TestKind::Tlr,
            Method::TlrTilde => TestKind::TlrTilde,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutArg {
    DatesAsRows,
    AssetsAsRows,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputArg {
    Prices,
    Returns,
}

#[derive(Args)]
struct TestArgs {
    /// CSV file; the first column holds labels
    file: PathBuf,
    #[arg(long, value_enum, default_value = "tm")]
    method: Method,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "dates-as-rows")]
    layout: LayoutArg,
    #[arg(long, value_enum, default_value = "prices")]
    input: InputArg,
    /// asset,sector CSV; enables random group tests
    #[arg(long)]
    sectors: Option<PathBuf>,
    /// Assets per group (one per sector); defaults to the number of sectors
    #[arg(long)]
    group_size: Option<usize>,
    /// Number of random groups
    #[arg(long, default_value_t = 1)]
    groups: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MpLawArgs {
    #[arg(long)]
    c: f64,
    /// Population spectrum atoms, comma separated
    #[arg(long, value_delimiter = ',', default_value = "1")]
    atoms: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    weights: Vec<f64>,
    /// Grid points per support interval
    #[arg(long, default_value_t = 200)]
    points: usize,
    /// Write the support intervals instead of the density
    #[arg(long)]
    edges: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PowerArgs {
    #[arg(long)]
    c: f64,
    #[arg(long)]
    h0: f64,
    #[arg(long)]
    tau: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Values of s; defaults to an even grid on (0, s_bar)
    #[arg(long, value_delimiter = ',')]
    s: Vec<f64>,
    #[arg(long, default_value_t = 99)]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical { .. } | Error::Resource(_) => 3,
        _ => 2,
    }
}

fn run(cmd: Command) -> elliptic_lss::Result<()> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Test(a) => test(a),
        Command::MpLaw(a) => mp_law(a),
        Command::Power(a) => power(a),
    }
}

fn output(path: Option<&Path>) -> elliptic_lss::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn simulate(a: SimulateArgs) -> elliptic_lss::Result<()> {
    let mut cfg = ExperimentConfig::from_json_file(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if a.workers.is_some() {
        cfg.workers = a.workers;
    }
    let summary = match &a.out {
        Some(dir) => harness::run_to_dir(&cfg, dir)?,
        None => harness::summarize(&cfg, &harness::run_replications(&cfg)?)?,
    };
    for flag in &summary.flags {
        log::warn!("{flag}");
    }
    pipeline::write_report(io::stdout().lock(), &summary)
}

fn test(a: TestArgs) -> elliptic_lss::Result<()> {
    let layout = match a.layout {
        LayoutArg::DatesAsRows => Layout::DatesAsRows,
        LayoutArg::AssetsAsRows => Layout::AssetsAsRows,
    };
    let kind = match a.input {
        InputArg::Prices => InputKind::Prices,
        InputArg::Returns => InputKind::Returns,
    };
    let (returns, digest) = pipeline::load_returns(&a.file, layout, kind)?;
    if !returns.dropped.is_empty() {
        log::warn!("{} asset(s) dropped during ingestion", returns.dropped.len());
    }
    let cfg = TestConfig {
        alpha: a.alpha,
        s: a.s,
        tau: a.tau,
        seed: a.seed,
        digest: Some(digest),
    };
    let method = TestKind::from(a.method);
    let out = output(a.out.as_deref())?;
    match &a.sectors {
        None => {
            let report = pipeline::test_returns(method, &returns, &cfg)?;
            pipeline::write_report(out, &report)
        }
        Some(path) => {
            let mut sectors = pipeline::read_sectors(path)?;
            for members in sectors.values_mut() {
                members.retain(|m| returns.assets.contains(m));
            }
            let size = a.group_size.unwrap_or(sectors.len());
            let mut rng = derive_stream(a.seed.unwrap_or(0), Purpose::GroupSelection, 0);
            let groups = pipeline::group_sample(&sectors, size, a.groups, &mut rng)?;
            let reports = pipeline::test_groups(method, &returns, &groups, &cfg)?;
            pipeline::write_report(out, &reports)
        }
    }
}

fn mp_law(a: MpLawArgs) -> elliptic_lss::Result<()> {
    let h = DiscreteSpectrum::new(a.atoms, a.weights)?;
    let law = MpLaw::new(a.c, h)?;
    let mut out = output(a.out.as_deref())?;
    if a.edges {
        writeln!(out, "lower,upper")?;
        for (lo, hi) in law.support() {
            writeln!(out, "{lo},{hi}")?;
        }
    } else {
        writeln!(out, "x,density")?;
        let k = a.points.max(2);
        for &(lo, hi) in law.support() {
            for i in 0..k {
                let x = lo + (hi - lo) * i as f64 / (k - 1) as f64;
                writeln!(out, "{x},{}", law.density(x)?)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn power(a: PowerArgs) -> elliptic_lss::Result<()> {
    let grid = if a.s.is_empty() {
        let top = s_bar(a.c, a.h0) - 2.0 * S_MARGIN;
        let k = a.points.max(1);
        (1..=k).map(|i| top * i as f64 / (k + 1) as f64).collect()
    } else {
        a.s
    };
    let mut out = output(a.out.as_deref())?;
    writeln!(out, "s,power")?;
    for s in grid {
        writeln!(out, "{s},{}", tlr_power(a.c, s, a.h0, a.tau, a.alpha)?)?;
    }
    out.flush()?;
    Ok(())
}
