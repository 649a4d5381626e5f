use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use element_analysis::cwt::TimeSeries;
use element_analysis::detect::{self, Element};
use element_analysis::io::{self, AnalysisConfig, ConfigOverrides, NoiseMethodName};
use element_analysis::par::Execution;
use element_analysis::theory;
use element_analysis::{pipeline, proxy, Error};

#[derive(Parser)]
#[command(name = "element-analysis", version, about = "Element analysis of time series with generalized Morse wavelets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: read, resample, high-pass, transform, detect, reconstruct, write.
    Analyze {
        /// Input CSV with a date column and a value column.
        #[arg(long)]
        input: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[command(flatten)]
        opts: Options,
    },
    /// Wavelet scalogram of a series (no filtering), as CSV and PGM.
    Transform {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[command(flatten)]
        opts: Options,
    },
    /// Significant events of a series (no filtering), as JSON-lines and CSV.
    Detect {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[command(flatten)]
        opts: Options,
    },
    /// Element scalogram from an events file, on the time axis of a series.
    Reconstruct {
        /// Events in JSON-lines form, as written by `detect` or `analyze`.
        #[arg(long)]
        events: PathBuf,
        /// Series whose length and time axis the scalogram uses.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[command(flatten)]
        opts: Options,
    },
    /// Resample and high-pass a series.
    Filter {
        #[arg(long)]
        input: PathBuf,
        /// Output CSV.
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        opts: Options,
    },
    /// Synthesize a series from an element list, or the bundled proxy.
    Synth {
        /// CSV with columns t (samples), c_abs, c_phase (radians), rho (samples).
        #[arg(long, conflicts_with = "proxy", required_unless_present = "proxy")]
        events: Option<PathBuf>,
        /// Generate the synthetic proxy series (trend, annual cycle, five events, noise).
        #[arg(long)]
        proxy: bool,
        /// Output CSV.
        #[arg(long)]
        output: PathBuf,
        /// Number of samples.
        #[arg(long, default_value_t = 1024)]
        n: usize,
        /// Date of the first sample.
        #[arg(long, default_value = "2000-01-01")]
        start: String,
        /// Standard deviation of the added white noise.
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[command(flatten)]
        opts: Options,
    },
    /// Print the closed-form quantities for the configured parameters.
    Theory {
        #[command(flatten)]
        opts: Options,
    },
}

/// Run parameters. Each flag overrides the config file, which overrides the
/// built-in default shown.
#[derive(Args)]
struct Options {
    /// TOML file with any of the run parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Wavelet order beta [default: 3].
    #[arg(long)]
    beta: Option<f64>,
    /// Wavelet family gamma [default: 1].
    #[arg(long)]
    gamma: Option<f64>,
    /// Element order mu [default: 3].
    #[arg(long)]
    mu: Option<f64>,
    /// Shortest analysed period; bare numbers are samples, or use a d/w/m/y suffix [default: 4].
    #[arg(long)]
    min_period: Option<String>,
    /// Longest analysed period [default: 128].
    #[arg(long)]
    max_period: Option<String>,
    /// Scales per octave [default: 16].
    #[arg(long)]
    voxels_per_octave: Option<u32>,
    /// False-alarm level per series [default: 0.05].
    #[arg(long)]
    alpha: Option<f64>,
    /// Threshold calibration: monte-carlo or analytic-white [default: monte-carlo].
    #[arg(long)]
    noise_method: Option<NoiseMethodName>,
    /// Monte Carlo realizations [default: 200].
    #[arg(long)]
    mc_trials: Option<usize>,
    /// Seed for all random draws [default: 42].
    #[arg(long)]
    seed: Option<u64>,
    /// High-pass cutoff period [default: 1/3y].
    #[arg(long)]
    cutoff_period: Option<String>,
    /// Butterworth order [default: 3].
    #[arg(long)]
    filter_order: Option<u32>,
    /// Skip the high-pass stage.
    #[arg(long)]
    no_filter: bool,
    /// Resampling interval; bare numbers are days [default: 1d].
    #[arg(long)]
    dt: Option<String>,
    /// Longest gap bridged by interpolation, in multiples of dt [default: 10].
    #[arg(long)]
    max_gap: Option<f64>,
    /// Edge margin in envelope standard deviations [default: 2].
    #[arg(long)]
    decay_multiplier: Option<f64>,
    /// Name of the date column [default: date].
    #[arg(long)]
    date_column: Option<String>,
    /// Name of the value column [default: value].
    #[arg(long)]
    value_column: Option<String>,
    /// Run on one thread.
    #[arg(long)]
    sequential: bool,
}

impl Options {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            beta: self.beta,
            gamma: self.gamma,
            mu: self.mu,
            min_period: self.min_period.clone(),
            max_period: self.max_period.clone(),
            voxels_per_octave: self.voxels_per_octave,
            alpha: self.alpha,
            noise_method: self.noise_method,
            mc_trials: self.mc_trials,
            seed: self.seed,
            filter: self.no_filter.then_some(false),
            cutoff_period: self.cutoff_period.clone(),
            filter_order: self.filter_order,
            dt: self.dt.clone(),
            max_gap: self.max_gap,
            decay_multiplier: self.decay_multiplier,
            date_column: self.date_column.clone(),
            value_column: self.value_column.clone(),
        }
    }

    fn resolve(&self) -> Result<AnalysisConfig, Error> {
        io::load_config(self.config.as_deref(), &self.overrides())
    }

    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

fn read_uniform(path: &Path, cfg: &AnalysisConfig) -> Result<TimeSeries, Error> {
    let series = pipeline::load_series(path, cfg)?;
    pipeline::resample(&series.raw, cfg)
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_scalogram(dir: &Path, stem: &str, sc: &element_analysis::cwt::Scalogram) -> Result<(), Error> {
    create_dir(dir)?;
    let modulus = sc.modulus();
    let periods: Vec<f64> = sc.grid.periods().iter().map(|p| p * sc.dt).collect();
    io::write_scalogram_csv(&dir.join(format!("{stem}.csv")), &modulus, &periods, sc.t0, sc.dt)?;
    io::write_pgm(&dir.join(format!("{stem}.pgm")), &modulus)
}

fn theory_report(cfg: &AnalysisConfig) -> Result<String, Error> {
    let p = cfg.element_params()?;
    let lines = [
        ("beta", p.beta()),
        ("mu", p.mu()),
        ("gamma", p.gamma()),
        ("a_beta", p.analysis().norm()),
        ("a_mu", p.element().norm()),
        ("omega_beta", p.analysis().peak_frequency()),
        ("omega_mu", p.element().peak_frequency()),
        ("s_tilde_max", theory::s_tilde_max(&p)),
        ("eta", theory::eta(&p)),
        ("zeta_max", theory::zeta_max(&p)),
        ("frequency_factor", theory::frequency_factor(&p)),
    ];
    Ok(lines.iter().map(|(k, v)| format!("{k}={}\n", io::sig9(*v))).collect())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Analyze { input, out_dir, opts } => {
            let cfg = opts.resolve()?;
            let (results, _) = pipeline::analyze(&input, &cfg, &out_dir, opts.execution())?;
            println!(
                "{} significant events written to {}",
                results.detection.events.len(),
                out_dir.display()
            );
        }
        Command::Transform { input, out_dir, opts } => {
            let cfg = opts.resolve()?;
            let x = read_uniform(&input, &cfg)?;
            let sc = pipeline::transform(&x, &cfg, opts.execution())?;
            write_scalogram(&out_dir, "scalogram", &sc)?;
        }
        Command::Detect { input, out_dir, opts } => {
            let cfg = opts.resolve()?;
            let x = read_uniform(&input, &cfg)?;
            let sc = pipeline::transform(&x, &cfg, opts.execution())?;
            let det = pipeline::detect(&sc, &cfg, opts.execution())?;
            let records: Vec<io::EventRecord> = det.events.iter().map(io::EventRecord::from).collect();
            create_dir(&out_dir)?;
            io::write_events_jsonl(&out_dir.join("events.jsonl"), &records)?;
            io::write_events_csv(&out_dir.join("events.csv"), &records)?;
            println!("{} significant events", records.len());
        }
        Command::Reconstruct {
            events,
            input,
            out_dir,
            opts,
        } => {
            let cfg = opts.resolve()?;
            let x = read_uniform(&input, &cfg)?;
            let like = pipeline::transform(&x, &cfg, opts.execution())?;
            let elements: Vec<Element> = io::read_events_jsonl(&events)?.iter().map(|r| r.element()).collect();
            let sc = pipeline::reconstruct(&elements, &cfg, &like, opts.execution())?;
            write_scalogram(&out_dir, "element_scalogram", &sc)?;
        }
        Command::Filter { input, output, opts } => {
            let cfg = opts.resolve()?;
            let x = read_uniform(&input, &cfg)?;
            let y = pipeline::filter(&x, &cfg)?;
            io::write_series_csv(&output, y.t0(), y.dt(), y.values())?;
        }
        Command::Synth {
            events,
            proxy: use_proxy,
            output,
            n,
            start,
            sigma,
            opts,
        } => {
            let cfg = opts.resolve()?;
            let x = if use_proxy {
                proxy::series(opts.seed.unwrap_or(proxy::DEFAULT_SEED))?
            } else {
                let path = events.expect("clap requires --events without --proxy");
                let elements = io::read_element_spec(&path)?;
                let t0 = io::parse_date(&start).ok_or_else(|| Error::Config {
                    field: "start".into(),
                    message: format!("cannot parse date `{start}`"),
                })?;
                let y = detect::synthesize(&elements, &cfg.element_params()?, n, cfg.dt_days()?, sigma, cfg.seed)?;
                TimeSeries::new(y.into_values(), cfg.dt_days()?, t0)?
            };
            io::write_series_csv(&output, x.t0(), x.dt(), x.values())?;
        }
        Command::Theory { opts } => {
            print!("{}", theory_report(&opts.resolve()?)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
