//! `qd`: moments, evolution runs and numerical checks for polynomial
//! quadrature domains.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use quadomain::checks::{self, CheckOptions, CheckRecord, DomainCheck};
use quadomain::domain::DEFAULT_SAMPLES;
use quadomain::flow::{evolve_moment, evolve_source, Direction, Trajectory};
use quadomain::io::{parse_domain, GridFile, MomentFile};
use quadomain::moments::{complex_moments, harmonic_moments, negative_moments};
use quadomain::PolyDomain;

mod render;

#[derive(Parser)]
#[command(name = "qd", version, about = "Quadrature domain moments, Laplacian growth and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Harmonic moments of a domain file.
    Moments(MomentsArgs),
    /// Laplacian growth from a point source, or with one moment driven.
    Evolve(EvolveArgs),
    /// Run a named check and print a JSON report.
    Check(CheckArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Dir {
    Re,
    Im,
}

#[derive(Args)]
struct MomentsArgs {
    /// Domain JSON file.
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also emit the grid M_kj for k, j ≤ K.
    #[arg(short = 'K', long = "grid")]
    grid: Option<usize>,
    /// Also emit M₋₁..M₋J.
    #[arg(short = 'J', long = "neg")]
    neg: Option<usize>,
    /// Boundary samples for the negative moments (power of two).
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    /// Relative threshold for reporting a grid moment M_k0 as zero.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct EvolveArgs {
    /// Domain JSON file.
    #[arg(short, long)]
    input: PathBuf,
    /// CSV file, or the file prefix for SVG frames.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// End time.
    #[arg(long = "t", allow_negative_numbers = true)]
    t: f64,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    steps: u64,
    /// Drive moment k at rate 2·k! instead of the unit source.
    #[arg(long)]
    moment: Option<usize>,
    #[arg(long, value_enum, default_value_t = Dir::Re, requires = "moment")]
    dir: Dir,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Boundary points per SVG polyline (power of two).
    #[arg(long, default_value_t = 256)]
    samples: usize,
    /// Write every stride-th state as an SVG frame.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    stride: u64,
}

#[derive(Args)]
struct CheckArgs {
    /// A domain check, `crossratio`, `weil` or `all`.
    name: String,
    /// Domain JSON file.
    #[arg(short, long)]
    input: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Built-in moment grid for `reconstruct`.
    #[arg(long)]
    example: Option<String>,
    /// Built-in domain list for `all`.
    #[arg(long)]
    corpus: Option<String>,
    /// Boundary samples (power of two).
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    /// Override every check's own tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Override every check's own finite-difference step.
    #[arg(long = "fd-step")]
    fd_step: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

enum Failure {
    Usage(String),
    Check,
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check => 1,
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.command {
        Command::Moments(a) => cmd_moments(a),
        Command::Evolve(a) => cmd_evolve(a),
        Command::Check(a) => cmd_check(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("qd: {m}"),
                Failure::Runtime(m) => eprintln!("qd: {m}"),
                Failure::Check => {}
            }
            ExitCode::from(f.code())
        }
    }
}

fn read_domain(path: &Path) -> Result<PolyDomain, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    parse_domain(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn emit(output: &Option<PathBuf>, text: &str) -> Outcome {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn check_samples(n: usize) -> Outcome {
    if n < 8 || !n.is_power_of_two() {
        return Err(Failure::Usage(format!("--samples must be a power of two ≥ 8, got {n}")));
    }
    Ok(())
}

fn check_positive(flag: &str, x: Option<f64>) -> Outcome {
    match x {
        Some(v) if !(v.is_finite() && v > 0.0) => Err(Failure::Usage(format!("{flag} must be positive, got {v}"))),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct MomentsReport {
    #[serde(flatten)]
    moments: MomentFile,
    #[serde(flatten)]
    grid: Option<GridFile>,
    /// Grid indices k > N with M_k0 = 0.
    #[serde(skip_serializing_if = "Option::is_none")]
    vanishing: Option<Vec<usize>>,
}

fn cmd_moments(a: MomentsArgs) -> Outcome {
    if a.format != Format::Json {
        return Err(Failure::Usage("moments only writes json".into()));
    }
    check_samples(a.samples)?;
    check_positive("--tol", Some(a.tol))?;
    let d = read_domain(&a.input)?;
    let mut mv = harmonic_moments(&d);
    if let Some(j) = a.neg {
        let neg = negative_moments(&d, j, a.samples).map_err(|e| Failure::Runtime(e.to_string()))?;
        mv = mv.with_negative(neg);
    }
    let (grid, vanishing) = match a.grid {
        Some(k) => {
            let g = complex_moments(&d, k);
            let scale = g.get(0, 0).norm();
            let zero: Vec<usize> = (d.order() + 1..=k).filter(|&i| g.get(i, 0).norm() <= a.tol * scale).collect();
            (Some(GridFile::from_grid(&g)), Some(zero))
        }
        None => (None, None),
    };
    let report = MomentsReport { moments: MomentFile::from_moments(&mv), grid, vanishing };
    let mut text = serde_json::to_string(&report).expect("plain data");
    text.push('\n');
    emit(&a.output, &text)
}

fn cmd_evolve(a: EvolveArgs) -> Outcome {
    if !a.t.is_finite() {
        return Err(Failure::Usage(format!("--t must be finite, got {}", a.t)));
    }
    if a.format == Format::Json {
        return Err(Failure::Usage("evolve writes csv or svg".into()));
    }
    check_samples(a.samples)?;
    let d = read_domain(&a.input)?;
    let steps = a.steps as usize;
    let tr: Trajectory = match a.moment {
        Some(k) => {
            let dir = match a.dir {
                Dir::Re => Direction::Re,
                Dir::Im => Direction::Im,
            };
            evolve_moment(&d, k, dir, a.t, steps)
        }
        None => evolve_source(&d, a.t, steps),
    }
    .map_err(|e| Failure::Runtime(e.to_string()))?;
    let csv = render::trajectory_csv(&tr.states);
    match a.format {
        Format::Svg => {
            let prefix = a.output.as_ref().ok_or_else(|| Failure::Usage("--format svg needs -o PREFIX".into()))?;
            let frames = render::svg_frames(&tr.states, a.samples, a.stride as usize)
                .map_err(|e| Failure::Runtime(e.to_string()))?;
            for (i, svg) in frames {
                let name = format!("{}-{i:04}.svg", prefix.display());
                fs::write(&name, svg).map_err(|e| Failure::Runtime(format!("{name}: {e}")))?;
            }
            print!("{csv}");
        }
        _ => emit(&a.output, &csv)?,
    }
    match tr.termination {
        Some(term) => Err(Failure::Runtime(format!("terminated at t = {}: {}", term.t, term.reason))),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct CheckReport {
    pass: bool,
    checks: Vec<CheckRecord>,
}

fn cmd_check(a: CheckArgs) -> Outcome {
    if a.format == Format::Svg {
        return Err(Failure::Usage("check writes json or csv".into()));
    }
    check_samples(a.samples)?;
    check_positive("--tol", a.tol)?;
    check_positive("--fd-step", a.fd_step)?;
    let opts = CheckOptions { samples: a.samples, tol: a.tol, fd_step: a.fd_step };
    let domain = a.input.as_deref().map(read_domain).transpose()?;
    let records = match a.name.as_str() {
        "all" => {
            let domains = match (&a.corpus, domain) {
                (Some(c), None) => checks::corpus(c).map_err(|e| Failure::Usage(e.to_string()))?,
                (None, Some(d)) => vec![("input", d)],
                (None, None) => checks::corpus("default").expect("built in"),
                (Some(_), Some(_)) => return Err(Failure::Usage("give either -i or --corpus".into())),
            };
            checks::run_all(&domains, &opts)
        }
        "crossratio" => vec![checks::crossratio_check(&opts)],
        "weil" => vec![checks::weil_check(&opts)],
        "reconstruct" if a.example.is_some() => {
            let name = a.example.as_deref().expect("checked");
            checks::reconstruct_example(name, &opts).map_err(|e| Failure::Usage(e.to_string()))?
        }
        name => {
            let check = DomainCheck::parse(name).ok_or_else(|| {
                let known: Vec<&str> = DomainCheck::ALL.iter().map(|c| c.name()).collect();
                Failure::Usage(format!("unknown check {name:?}; known: {}, crossratio, weil, all", known.join(", ")))
            })?;
            let d = domain.ok_or_else(|| Failure::Usage(format!("check {name} needs -i DOMAIN")))?;
            check.run(&d, &opts)
        }
    };
    let pass = records.iter().all(|r| r.pass);
    let text = match a.format {
        Format::Csv => render::checks_csv(&records),
        _ => {
            let mut s = serde_json::to_string_pretty(&CheckReport { pass, checks: records }).expect("plain data");
            s.push('\n');
            s
        }
    };
    emit(&a.output, &text)?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}
