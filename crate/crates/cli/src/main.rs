use std::path::{Path, PathBuf};
use std::process::ExitCode;

use calderon_core::atoms::{make_atom, read_decomposition, validate_atom, write_decomposition};
use calderon_core::exponents::{luxemburg_norm, modular, ExponentSpec, DEFAULT_NORM_TOL};
use calderon_core::experiments::{load_config, run_experiments, write_outcomes, Experiment, Outcome, Status};
use calderon_core::maximal::{eta_maximal, hl_maximal, n_field, write_field_csv, FieldRow, NOptions};
use calderon_core::potential::{potential_of_decomposition, KernelSpec};
use calderon_core::{
    AtomicDecomposition, Cube, DomainBox, Error, ExponentFunction, FunctionClass, GridFunction, MaximalParams, Result,
    ScaleGrid,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

const THREADS_VAR: &str = "CALDERON_LAB_THREADS";

#[derive(Parser)]
#[command(name = "calderon-lab", version, about = "Calderón–Hardy space experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Suite configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory or file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Grid refinement: points per axis are multiplied by 2^resolution.
    #[arg(long, global = true, allow_hyphen_values = true)]
    resolution: Option<i32>,
}

#[derive(Subcommand)]
enum Command {
    /// Modular and Luxemburg norm of a grid function.
    Norm {
        #[arg(long)]
        input: PathBuf,
        /// Exponent as JSON text or a path to a JSON file.
        #[arg(long)]
        exponent: String,
    },
    /// Maximal-function field of a grid function, as CSV.
    Maximal {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Operator::Hl)]
        operator: Operator,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long, default_value_t = 2.0)]
        gamma: f64,
        #[arg(long)]
        r_min: Option<f64>,
        #[arg(long)]
        r_max: Option<f64>,
    },
    /// Draws one atom and writes it as a decomposition.
    Atom {
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 8.0)]
        half_width: f64,
        #[arg(long, default_value_t = 1024)]
        points: usize,
        /// Cube centre, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        center: Vec<f64>,
        #[arg(long, default_value_t = 0.5)]
        side: f64,
        #[arg(long, default_value_t = 2.0)]
        p0: f64,
        #[arg(long, default_value_t = 1)]
        degree: u32,
        #[arg(long, default_value = r#"{"form":"constant","parameters":{"value":1.0}}"#)]
        exponent: String,
    },
    /// Potential `Σ kⱼ h ∗ aⱼ` of a stored decomposition.
    Solve {
        #[arg(long)]
        decomposition: PathBuf,
        #[arg(long, default_value_t = 1)]
        m: u32,
    },
    /// Runs one verification.
    Verify {
        #[arg(value_enum)]
        experiment: Which,
    },
    /// Runs every verification and writes one CSV per experiment and a JSON summary.
    Suite,
}

#[derive(Clone, Copy, ValueEnum)]
enum Operator {
    Hl,
    Eta,
    N,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Lemma12,
    Lemma14,
    Prop15,
    Thm1,
    #[value(name = "thm1-pointwise")]
    Thm1Pointwise,
    Thm2,
}

impl Which {
    fn experiment(self) -> Experiment {
        match self {
            Which::Lemma12 => Experiment::Lemma12,
            Which::Lemma14 => Experiment::Lemma14,
            Which::Prop15 => Experiment::Prop15,
            Which::Thm1 => Experiment::Theorem1,
            Which::Thm1Pointwise => Experiment::Theorem1Pointwise,
            Which::Thm2 => Experiment::Theorem2,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|t| *t > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_VAR} must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<ExitCode> {
    let common = cli.common;
    match cli.command {
        Command::Norm { input, exponent } => {
            let f = GridFunction::read_csv(&input)?;
            let p = parse_exponent(&exponent)?;
            let rho = modular(&f, &p);
            let norm = luxemburg_norm(&f, &p, DEFAULT_NORM_TOL)?;
            let out = serde_json::json!({ "modular": rho.value, "luxemburg_norm": norm });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Maximal { input, operator, q, gamma, r_min, r_max } => {
            let f = GridFunction::read_csv(&input)?;
            let d = *f.domain();
            let scales = ScaleGrid::geometric(
                r_min.unwrap_or(8.0 * d.spacing()),
                r_max.unwrap_or(2.0 * d.half_width()),
            )?;
            let rows = maximal_rows(&f, operator, q, gamma, scales, common.seed.unwrap_or(0))?;
            match &common.out {
                Some(path) => write_field_csv(&rows, path)?,
                None => print!("{}", calderon_core::maximal::field_csv_string(&rows)),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Atom { dim, half_width, points, center, side, p0, degree, exponent } => {
            let points = refine(points, common.resolution)?;
            let domain = DomainBox::new(dim, half_width, points)?;
            let p = parse_exponent(&exponent)?;
            let cube = Cube::new(&center, side)?;
            let atom = make_atom(domain, &cube, p0, degree, &p, common.seed.unwrap_or(0))?;
            let report = validate_atom(&atom, &p, None)?;
            let mut dec = AtomicDecomposition::new();
            dec.push(1.0, atom)?;
            let dir = common.out.unwrap_or_else(|| PathBuf::from("atom"));
            let path = write_decomposition(&dec, &dir)?;
            println!("{}", path.display());
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve { decomposition, m } => {
            let dec = read_decomposition(&decomposition)?;
            let Some((_, first)) = dec.terms.first() else {
                return Err(Error::Config("decomposition is empty".into()));
            };
            let domain = *first.domain();
            let class = potential_of_decomposition(&dec, &KernelSpec::new(m, domain.dim())?, domain)?;
            let path = common.out.unwrap_or_else(|| PathBuf::from("potential.csv"));
            class.representative().write_csv(&path)?;
            println!("{}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { experiment } => verify(&common, &[experiment.experiment()]),
        Command::Suite => verify(&common, &Experiment::ALL),
    }
}

fn refine(points: usize, resolution: Option<i32>) -> Result<usize> {
    match resolution.unwrap_or(0) {
        r @ 0..=4 => Ok(points << r),
        r @ -4..=-1 => Ok(points >> (-r)),
        r => Err(Error::Config(format!("resolution {r} outside [-4, 4]"))),
    }
}

fn parse_exponent(text: &str) -> Result<ExponentFunction> {
    let json = if text.trim_start().starts_with('{') {
        text.to_string()
    } else {
        std::fs::read_to_string(text)?
    };
    let spec: ExponentSpec = serde_json::from_str(&json)
        .map_err(|e| Error::Config(format!("exponent: line {}, column {}: {e}", e.line(), e.column())))?;
    ExponentFunction::from_spec(&spec)
}

fn maximal_rows(f: &GridFunction, op: Operator, q: f64, gamma: f64, scales: ScaleGrid, seed: u64) -> Result<Vec<FieldRow>> {
    use rayon::prelude::*;
    let d = *f.domain();
    let n = d.dim();
    let room = 0.5 * scales.r_min();
    let points: Vec<Vec<f64>> = (0..d.len())
        .map(|i| d.center(i)[..n].to_vec())
        .filter(|x| !matches!(op, Operator::Eta | Operator::N) || d.distance_to_boundary(x) >= room)
        .collect();
    match op {
        Operator::Hl => points
            .par_iter()
            .map(|x| {
                let m = hl_maximal(f, x, &scales)?;
                Ok(FieldRow { x: x.clone(), value: m.value, argmax_scale: m.argmax_scale })
            })
            .collect(),
        Operator::Eta => {
            let prm = MaximalParams::new(q, gamma, scales)?;
            points
                .par_iter()
                .map(|x| {
                    let m = eta_maximal(f, &prm, x)?;
                    Ok(FieldRow { x: x.clone(), value: m.value, argmax_scale: m.argmax_scale })
                })
                .collect()
        }
        Operator::N => {
            let prm = MaximalParams::new(q, gamma, scales)?;
            let class = FunctionClass::new(f.clone(), prm.k);
            let opts = NOptions { seed, ..NOptions::default() };
            let values = n_field(&class, &prm, &points, &opts)?;
            Ok(points
                .into_iter()
                .zip(values)
                .map(|(x, v)| FieldRow { x, value: v.value, argmax_scale: v.argmax_scale })
                .collect())
        }
    }
}

fn verify(common: &Common, which: &[Experiment]) -> Result<ExitCode> {
    // The config is parsed before anything is run or written.
    let cfg = load_config(common.config.as_deref(), common.seed, common.resolution)?;
    let outcomes = run_experiments(&cfg, which)?;
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("reports"));
    write_outcomes(&outcomes, &dir)?;
    print_outcomes(&outcomes, &dir);
    let failed = outcomes.iter().any(|o| o.report.status() == Status::Fail);
    Ok(if failed { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn print_outcomes(outcomes: &[Outcome], dir: &Path) {
    for o in outcomes {
        let r = &o.report;
        let status = match r.status() {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        };
        let detail = match (&r.skip_reason, r.status()) {
            (Some(reason), _) => reason.clone(),
            (None, Status::Fail) => format!("outside tolerance: {}", r.violations().join(", ")),
            _ => r
                .tolerance
                .keys()
                .map(|k| format!("{k}={:.4e}", r.measured[k]))
                .collect::<Vec<_>>()
                .join(" "),
        };
        println!("{status} {:<15} {detail}", r.name);
    }
    println!("reports written to {}", dir.display());
}
