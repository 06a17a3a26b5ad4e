//! `imgspec` command-line front end.
//!
//! Exit codes: 0 success, 1 a finite-n check failed (`verify`), 2 input
//! error, 3 capacity or solver-budget error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use imgspec::decompose::{self, CharacterizeConfig, EmptyPolicy, ParamOverrides};
use imgspec::error::Error;
use imgspec::exact::{self, Rational};
use imgspec::images::{self, ImageMode};
use imgspec::instance::Instance;
use imgspec::model::{self, Limits};
use imgspec::report;
use imgspec::spectrum;
use imgspec::verify::{self, CorpusConfig, Suite, VerifyConfig, VerifyInstance};

#[derive(Parser, Debug)]
#[command(name = "imgspec", version, about = "Information-spectrum partitions and minimum images over discrete memoryless channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// δ-information-spectrum partition and its level profile.
    Spectrum {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_parser = parse_rational)]
        delta: Rational,
        #[arg(long, default_value_t = 0)]
        channel: usize,
    },
    /// Minimum η-quasi-image.
    QuasiImage {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_parser = parse_rational)]
        eta: Rational,
        #[arg(long, default_value_t = 0)]
        channel: usize,
    },
    /// Minimum η-image.
    Image {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_parser = parse_rational)]
        eta: Rational,
        #[arg(long, value_enum, default_value_t = Mode::Auto)]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        channel: usize,
    },
    /// Members dense on the minimum α-quasi-image.
    DenseSubset {
        #[command(flatten)]
        io: Io,
        #[arg(long, alias = "alpha", value_parser = parse_rational)]
        eta: Rational,
        #[arg(long, default_value_t = 0)]
        channel: usize,
    },
    /// Nested entropy-dense subsets, one channel at a time.
    Characterize {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        run: Decompose,
    },
    /// Partition of the source set into characterized cells.
    Partition {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        run: Decompose,
    },
    /// Run the verification suite on a seeded corpus or on one instance.
    Verify {
        #[command(flatten)]
        io: Io,
        /// Corpus kind; only `random` is available.
        #[arg(long, value_enum)]
        corpus: Option<Corpus>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        count: usize,
        /// Spectrum resolution(s) for `--config` runs.
        #[arg(long, value_parser = parse_rational, value_delimiter = ',')]
        delta: Vec<Rational>,
        /// Thresholds for `--config` runs.
        #[arg(long, value_parser = parse_rational, value_delimiter = ',', default_values = ["1/4", "1/2", "3/4"])]
        etas: Vec<Rational>,
        #[arg(long, value_parser = parse_decimal, default_value = "1/10")]
        epsilon: f64,
    },
    /// Minimum image sizes along a grid of thresholds.
    Scan {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_parser = parse_rational, value_delimiter = ',',
              default_values = ["1/10", "2/10", "3/10", "4/10", "5/10", "6/10", "7/10", "8/10", "9/10"])]
        etas: Vec<Rational>,
        #[arg(long, value_enum, default_value_t = Mode::Auto)]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        channel: usize,
    },
}

#[derive(Args, Debug)]
struct Io {
    /// Instance JSON file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path prefix; the extension follows the format.
    #[arg(long, default_value = "imgspec-report")]
    output: PathBuf,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct Decompose {
    #[arg(long, value_parser = parse_rational)]
    eta: Rational,
    #[arg(long, value_parser = parse_decimal, default_value = "1/10")]
    epsilon: f64,
    /// One δ for every channel.
    #[arg(long, value_parser = parse_rational, conflicts_with = "deltas")]
    delta: Option<Rational>,
    /// Per-channel δ list, comma separated.
    #[arg(long, value_parser = parse_rational, value_delimiter = ',')]
    deltas: Vec<Rational>,
    #[arg(long, value_parser = parse_rational)]
    beta_n: Option<Rational>,
    #[arg(long, value_parser = parse_decimal)]
    tau_n: Option<f64>,
    #[arg(long, value_parser = parse_decimal)]
    epsilon_n: Option<f64>,
    #[arg(long, value_enum, default_value_t = Policy::Fallback)]
    empty_policy: Policy,
    #[arg(long, value_enum, default_value_t = Mode::Auto)]
    mode: Mode,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Mode {
    Exact,
    Greedy,
    Auto,
}

impl From<Mode> for ImageMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Exact => ImageMode::Exact,
            Mode::Greedy => ImageMode::Greedy,
            Mode::Auto => ImageMode::Auto,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Policy {
    Strict,
    Fallback,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Corpus {
    Random,
}

fn parse_rational(s: &str) -> Result<Rational, String> {
    exact::parse_rational(s).map_err(|e| e.to_string())
}

fn parse_decimal(s: &str) -> Result<f64, String> {
    if let Ok(r) = exact::parse_rational(s) {
        return Ok(exact::rational_to_f64(&r));
    }
    s.trim().parse::<f64>().map_err(|_| format!("expected a decimal or \"a/b\", got {s:?}"))
}

enum Failure {
    Check(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn limits() -> Result<Limits, Error> {
    let mut l = Limits::default();
    if let Ok(v) = std::env::var("IMGSPEC_MAX_SPACE") {
        l.max_space = v
            .trim()
            .parse()
            .map_err(|_| Error::Parameter(format!("IMGSPEC_MAX_SPACE must be a positive integer, got {v:?}")))?;
    }
    Ok(l)
}

fn load(io: &Io, limits: &Limits) -> Result<Instance, Error> {
    let path = io
        .config
        .as_ref()
        .ok_or_else(|| Error::Parameter("--config <instance.json> is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Instance::from_json(&text, limits)
}

fn pick(inst: &Instance, channel: usize) -> Result<&model::Channel, Error> {
    inst.channels.get(channel).ok_or_else(|| {
        Error::Parameter(format!("channel {channel} requested, instance has {}", inst.channels.len()))
    })
}

fn write(prefix: &Path, format: Format, body: &str) -> Result<PathBuf, Error> {
    let ext = match format {
        Format::Json => "json",
        Format::Csv => "csv",
    };
    let mut name = prefix.as_os_str().to_owned();
    name.push(".");
    name.push(ext);
    let path = PathBuf::from(name);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(&path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn decompose_config(run: &Decompose, channels: usize) -> Result<CharacterizeConfig, Error> {
    let deltas = match (&run.delta, run.deltas.is_empty()) {
        (Some(d), _) => vec![d.clone(); channels],
        (None, false) => run.deltas.clone(),
        (None, true) => return Err(Error::Parameter("--delta or --deltas is required".into())),
    };
    let mut cfg = CharacterizeConfig::new(run.eta.clone(), run.epsilon, deltas);
    cfg.overrides = ParamOverrides {
        beta_n: run.beta_n.clone(),
        tau_n: run.tau_n,
        epsilon_n: run.epsilon_n,
    };
    cfg.policy = match run.empty_policy {
        Policy::Strict => EmptyPolicy::Strict,
        Policy::Fallback => EmptyPolicy::FallbackToDense,
    };
    cfg.image_mode = run.mode.into();
    Ok(cfg)
}

fn run(cli: Cli) -> Result<String, Failure> {
    let limits = limits()?;
    match cli.command {
        Command::Spectrum { io, delta, channel } => {
            let inst = load(&io, &limits)?;
            let dist = model::output_distribution(&inst.source, pick(&inst, channel)?, &limits)?;
            let part = spectrum::build_partition(&dist, &delta)?;
            let profile = spectrum::level_profile(&part);
            let format = io.format.unwrap_or(Format::Csv);
            let body = match format {
                Format::Csv => report::level_profile_csv(&profile),
                Format::Json => report::render_json(&report::spectrum_json(&part, &profile)),
            };
            let path = write(&io.output, format, &body)?;
            Ok(format!(
                "spectrum: K_delta={} occupied_levels={} b_infinity={} -> {}",
                part.k_delta(),
                part.level_points().len(),
                part.b_infinity_size(),
                path.display()
            ))
        }
        Command::QuasiImage { io, eta, channel } => {
            let inst = load(&io, &limits)?;
            let res = images::min_quasi_image(&inst.source, pick(&inst, channel)?, &eta, &limits)?;
            let format = io.format.unwrap_or(Format::Json);
            let body = match format {
                Format::Json => report::render_json(&report::image_json(&res)),
                Format::Csv => report::image_csv(&res),
            };
            let path = write(&io.output, format, &body)?;
            Ok(format!("quasi-image: size={} certificate={} -> {}", res.size(), res.certificate, path.display()))
        }
        Command::Image { io, eta, mode, channel } => {
            let inst = load(&io, &limits)?;
            let res = images::min_image(&inst.source, pick(&inst, channel)?, &eta, mode.into(), &limits)?;
            let format = io.format.unwrap_or(Format::Json);
            let body = match format {
                Format::Json => report::render_json(&report::image_json(&res)),
                Format::Csv => report::image_csv(&res),
            };
            let path = write(&io.output, format, &body)?;
            Ok(format!("image: size={} certificate={} -> {}", res.size(), res.certificate, path.display()))
        }
        Command::DenseSubset { io, eta, channel } => {
            let inst = load(&io, &limits)?;
            let out = decompose::dense_subset(&inst.source, pick(&inst, channel)?, &eta, &limits)?;
            let body = report::render_json(&report::dense_json(&out, &eta));
            let path = write(&io.output, Format::Json, &body)?;
            Ok(format!(
                "dense-subset: |A'|={} of {} quasi_image={} -> {}",
                out.subset.len(),
                inst.source.len(),
                out.quasi_image.size(),
                path.display()
            ))
        }
        Command::Characterize { io, run } => {
            let inst = load(&io, &limits)?;
            let cfg = decompose_config(&run, inst.channels.len())?;
            let rep = decompose::characterize_subset(&inst.source, &inst.channels, &cfg, &limits)?;
            let body = report::render_json(&report::characterize_json(&rep, cfg.epsilon));
            let path = write(&io.output, Format::Json, &body)?;
            let gaps: Vec<String> = rep.metrics.channels.iter().map(|c| report::fmt_decimal(c.gap)).collect();
            Ok(format!(
                "characterize: |A'|={} of {} gaps=[{}] -> {}",
                rep.subset.len(),
                inst.source.len(),
                gaps.join(","),
                path.display()
            ))
        }
        Command::Partition { io, run } => {
            let inst = load(&io, &limits)?;
            let cfg = decompose_config(&run, inst.channels.len())?;
            let rep = decompose::partition_source(&inst.source, &inst.channels, &cfg, &limits)?;
            let format = io.format.unwrap_or(Format::Json);
            let body = match format {
                Format::Json => report::render_json(&report::partition_json(&rep)),
                Format::Csv => report::partition_csv(&rep),
            };
            let path = write(&io.output, format, &body)?;
            Ok(format!(
                "partition: m={} gamma={} cell_bound={} -> {}",
                rep.m(),
                report::fmt_decimal(rep.gamma),
                rep.cell_bound,
                path.display()
            ))
        }
        Command::Verify { io, corpus, seed, count, delta, etas, epsilon } => {
            let vcfg = VerifyConfig {
                epsilon,
                limits: limits.clone(),
                ..VerifyConfig::default()
            };
            let rep = match (corpus, &io.config) {
                (Some(Corpus::Random), None) => verify::run_corpus(&CorpusConfig::new(seed, count), &vcfg),
                (None, Some(_)) => {
                    let inst = load(&io, &limits)?;
                    let deltas = match delta.len() {
                        0 => return Err(Error::Parameter("--delta is required with --config".into()).into()),
                        1 => vec![delta[0].clone(); inst.channels.len()],
                        _ => delta,
                    };
                    let vi = VerifyInstance {
                        id: 0,
                        suite: Suite::Given,
                        source: inst.source,
                        channels: inst.channels,
                        deltas,
                        etas,
                    };
                    verify::run_instances(&[vi], &vcfg, None)
                }
                _ => {
                    return Err(Error::Parameter("give exactly one of --corpus random or --config".into()).into())
                }
            };
            let format = io.format.unwrap_or(Format::Json);
            let body = match format {
                Format::Json => report::render_json(&report::suite_json(&rep)),
                Format::Csv => report::suite_csv(&rep),
            };
            let path = write(&io.output, format, &body)?;
            let s = rep.summary;
            let line = format!(
                "verify: instances={} total={} pass={} fail={} report_only={} -> {}",
                rep.instances,
                s.total,
                s.pass,
                s.fail,
                s.report_only,
                path.display()
            );
            if rep.passed() {
                Ok(line)
            } else {
                Err(Failure::Check(line))
            }
        }
        Command::Scan { io, etas, mode, channel } => {
            let inst = load(&io, &limits)?;
            let rep = images::continuity_scan(&inst.source, pick(&inst, channel)?, &etas, mode.into(), &limits)?;
            let format = io.format.unwrap_or(Format::Csv);
            let body = match format {
                Format::Csv => report::scan_csv(&rep),
                Format::Json => report::render_json(&report::scan_json(&rep)),
            };
            let path = write(&io.output, format, &body)?;
            Ok(format!(
                "scan: points={} max_gap={} -> {}",
                rep.rows.len(),
                report::fmt_decimal(rep.max_gap),
                path.display()
            ))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(Failure::Check(line)) => {
            println!("{line}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_capacity() { 3 } else { 2 })
        }
    }
}
