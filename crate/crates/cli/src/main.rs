use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use serde::Serialize;
use serde_json::json;

use tetracomm::bounds::{fuzz_hbl, lower_bound, opt_solution};
use tetracomm::partition::{pad_dimension, storage_count};
use tetracomm::report::render_checks;
use tetracomm::schedule::{build_demands, build_schedule, validate};
use tetracomm::simulator::{compute_report, verify_run};
use tetracomm::tensor::{cp_gradient, hopm, random_vector, read_vector, write_vector};
use tetracomm::{Error, Exec, Mode, PackedSymTensor, SteinerSystem, TetraPartition, VectorLayout};

#[derive(Parser)]
#[command(name = "tetracomm", version, about = "Steiner-system partitions for parallel symmetric tensor-times-vector")]
struct Cli {
    /// Run data-parallel loops on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build, verify or list Steiner systems.
    Steiner {
        #[command(subcommand)]
        action: SteinerAction,
    },
    /// Print the block partition and vector layout.
    Partition {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the point-to-point communication schedule.
    Schedule {
        #[command(flatten)]
        design: DesignArgs,
        /// Vector length, used to report words per step.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the parallel algorithm on virtual processors and check every counter.
    Simulate {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, required_unless_present_all = ["tensor", "vector"])]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = ModeArg::P2p)]
        mode: ModeArg,
        /// Packed tensor file written by `gen`.
        #[arg(long)]
        tensor: Option<PathBuf>,
        /// Vector file written by `gen`.
        #[arg(long)]
        vector: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a random packed symmetric tensor and vector.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        tensor: PathBuf,
        #[arg(long)]
        vector: Option<PathBuf>,
    },
    /// Lower bound and optimum of the bandwidth problem.
    Bounds {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        p: u64,
    },
    /// Higher-order power method on a random symmetric tensor.
    Hopm {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 1000)]
        max_iters: usize,
        #[arg(long)]
        tensor: Option<PathBuf>,
    },
    /// Gradient of the symmetric CP objective at a random factor matrix.
    Cpgrad {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        seed: u64,
        /// Build the tensor from the same factors, so the gradient vanishes.
        #[arg(long)]
        exact: bool,
    },
    /// Check the projection inequalities on random point sets.
    HblFuzz {
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        max_points: usize,
    },
}

#[derive(Subcommand)]
enum SteinerAction {
    /// Spherical (q²+1, q+1, 3) system.
    Construct {
        #[arg(long)]
        q: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    Verify { path: PathBuf },
    /// Verify every design in the fixture directory.
    Fixtures,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct DesignArgs {
    /// Prime power of a spherical design.
    #[arg(long)]
    q: Option<u64>,
    /// Steiner system file.
    #[arg(long)]
    design: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    P2p,
    Alltoall,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

enum Failure {
    Validation(String),
    Usage(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) => Failure::Usage(e.to_string()),
            Error::InvalidDesign(_) | Error::InvalidSchedule(_) | Error::Locality { .. } => {
                Failure::Validation(e.to_string())
            }
            _ => Failure::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    match run(cli.command, exec) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("validation failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command, exec: Exec) -> CmdResult {
    match command {
        Command::Steiner { action } => cmd_steiner(action, exec),
        Command::Partition { design, n, out } => cmd_partition(&design, n, out.as_deref()),
        Command::Schedule { design, n, out } => cmd_schedule(&design, n, out.as_deref()),
        Command::Simulate { design, n, seed, mode, tensor, vector, format, out } => {
            let mode = match mode {
                ModeArg::P2p => Mode::P2p,
                ModeArg::Alltoall => Mode::AllToAll,
            };
            cmd_simulate(&design, n, seed, mode, tensor.as_deref(), vector.as_deref(), format, out.as_deref(), exec)
        }
        Command::Gen { n, seed, tensor, vector } => {
            PackedSymTensor::random(n, seed).save(&tensor)?;
            if let Some(path) = vector {
                write_vector(&random_vector(n, seed.wrapping_add(1)), fs::File::create(path)?)?;
            }
            Ok(())
        }
        Command::Bounds { n, p } => {
            if n < 3 || p == 0 {
                return Err(Failure::Usage("need n >= 3 and p >= 1".into()));
            }
            let (x1, x2) = opt_solution(n, p);
            emit(&json!({ "n": n, "p": p, "lower_bound": lower_bound(n, p), "opt": [x1, x2] }), None)
        }
        Command::Hopm { n, seed, tol, max_iters, tensor } => {
            let a = match tensor {
                Some(path) => PackedSymTensor::load(path)?,
                None => PackedSymTensor::random(n, seed),
            };
            let res = hopm(&a, seed, tol, max_iters)?;
            emit(&res, None)?;
            if res.converged {
                Ok(())
            } else {
                Err(Failure::Validation(format!("no convergence in {} iterations", res.iters)))
            }
        }
        Command::Cpgrad { n, r, seed, exact } => {
            let x = Array2::from_shape_vec((n, r), random_vector(n * r, seed))
                .map_err(|e| Failure::Other(e.to_string()))?;
            let a = if exact { PackedSymTensor::from_cp(&x) } else { PackedSymTensor::random(n, seed.wrapping_add(1)) };
            let g = cp_gradient(&a, &x)?;
            let rows: Vec<Vec<f64>> = g.rows().into_iter().map(|row| row.to_vec()).collect();
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            emit(&json!({ "n": n, "r": r, "exact": exact, "norm": norm, "gradient": rows }), None)
        }
        Command::HblFuzz { trials, seed, max_points } => {
            let summary = fuzz_hbl(trials, max_points, seed, exec);
            emit(&summary, None)?;
            if summary.passed() {
                Ok(())
            } else {
                Err(Failure::Validation(format!("first failing trial {:?}", summary.first_failure)))
            }
        }
    }
}

fn fixture_dir() -> PathBuf {
    std::env::var_os("TETRACOMM_FIXTURES")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures"))
}

fn cmd_steiner(action: SteinerAction, exec: Exec) -> CmdResult {
    match action {
        SteinerAction::Construct { q, out } => {
            let sys = SteinerSystem::construct_spherical_with(q, exec)?;
            match out {
                Some(path) => {
                    sys.save(&path)?;
                    eprintln!("wrote {} blocks to {}", sys.block_count(), path.display());
                    Ok(())
                }
                None => {
                    print!("{}", sys.to_text());
                    Ok(())
                }
            }
        }
        SteinerAction::Verify { path } => {
            let sys = SteinerSystem::parse(&fs::read_to_string(&path)?)?;
            let report = sys.verify();
            println!("{report}");
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Validation(format!("{} is not a Steiner system", path.display())))
            }
        }
        SteinerAction::Fixtures => {
            let dir = fixture_dir();
            let mut paths: Vec<PathBuf> = fs::read_dir(&dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "txt"))
                .collect();
            paths.sort();
            let mut bad = 0;
            for path in &paths {
                let ok = fs::read_to_string(path)
                    .map_err(Error::from)
                    .and_then(|t| SteinerSystem::parse(&t))
                    .map(|s| s.verify().passed())
                    .unwrap_or(false);
                println!("{} {}", if ok { "[pass]" } else { "[FAIL]" }, path.display());
                bad += usize::from(!ok);
            }
            if bad == 0 {
                Ok(())
            } else {
                Err(Failure::Validation(format!("{bad} fixture(s) failed")))
            }
        }
    }
}

fn load_partition(design: &DesignArgs) -> Result<(TetraPartition, String), Failure> {
    let (sys, label) = match (&design.q, &design.design) {
        (Some(q), _) => (SteinerSystem::construct_spherical(*q)?, format!("q={q}")),
        (None, Some(path)) => (SteinerSystem::load(path)?, path.display().to_string()),
        (None, None) => return Err(Failure::Usage("give --q or --design".into())),
    };
    Ok((TetraPartition::build(&sys)?, label))
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> CmdResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Other(e.to_string()))?;
    match out {
        Some(path) => fs::write(path, text + "\n")?,
        None => {
            if let Err(e) = writeln!(std::io::stdout().lock(), "{text}") {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    return Err(e.into());
                }
            }
        }
    }
    Ok(())
}

fn cmd_partition(design: &DesignArgs, n: usize, out: Option<&Path>) -> CmdResult {
    let (part, _) = load_partition(design)?;
    let padded = pad_dimension(n, &part)?;
    if padded != n {
        eprintln!("n = {n} does not fit the layout; padding to {padded}");
    }
    let layout = VectorLayout::new(padded, &part)?;
    let storage: Vec<u64> = (0..part.processors()).map(|p| storage_count(&part, padded, p)).collect();
    let checks = part.check();
    let doc = json!({
        "n": n,
        "padded_n": padded,
        "b": layout.b,
        "chunk": layout.chunk,
        "partition": part.to_document(),
        "storage": storage,
        "checks": checks,
    });
    emit(&doc, out)?;
    if checks.iter().all(|c| c.passed) {
        Ok(())
    } else {
        Err(Failure::Validation(render_checks(&checks)))
    }
}

fn cmd_schedule(design: &DesignArgs, n: Option<usize>, out: Option<&Path>) -> CmdResult {
    let (part, label) = load_partition(design)?;
    let chunk = match n {
        Some(n) => VectorLayout::new(n, &part)?.chunk,
        None => 1,
    };
    let demands = build_demands(&part);
    let sched = build_schedule(&demands, part.processors())?;
    let report = validate(&sched, &demands, chunk);
    emit(&sched.to_document(label, chunk), out)?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Validation(report.summary()))
    }
}

#[derive(Serialize)]
struct VolumeRow {
    id: usize,
    words_sent: u64,
    words_received: u64,
    sent_x: u64,
    sent_y: u64,
    ternary_mults: u64,
    tensor_elems: u64,
    predicted_ternary: u64,
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    design: &DesignArgs,
    n: usize,
    seed: Option<u64>,
    mode: Mode,
    tensor: Option<&Path>,
    vector: Option<&Path>,
    format: Format,
    out: Option<&Path>,
    exec: Exec,
) -> CmdResult {
    let (part, label) = load_partition(design)?;
    let layout = VectorLayout::new(n, &part)?;
    let need_seed = || seed.ok_or_else(|| Failure::Usage("--seed is required for generated inputs".into()));
    let a = match tensor {
        Some(path) => PackedSymTensor::load(path)?,
        None => PackedSymTensor::random(n, need_seed()?),
    };
    let x = match vector {
        Some(path) => read_vector(fs::File::open(path)?)?,
        None => random_vector(n, need_seed()?.wrapping_add(1)),
    };
    let verdict = verify_run(&a, &x, &part, &layout, mode, exec);
    let predicted = compute_report(&part, &layout);

    match format {
        Format::Json => {
            let doc = json!({
                "design": label,
                "n": n,
                "mode": mode,
                "passed": verdict.passed(),
                "report": verdict.report,
                "prediction": predicted,
                "verdicts": verdict.checks,
            });
            emit(&doc, out)?;
        }
        Format::Csv => {
            let sink: Box<dyn Write> = match out {
                Some(path) => Box::new(fs::File::create(path)?),
                None => Box::new(std::io::stdout()),
            };
            let mut w = csv::Writer::from_writer(sink);
            if let Some(report) = &verdict.report {
                for (c, p) in report.processors.iter().zip(&predicted.processors) {
                    w.serialize(VolumeRow {
                        id: c.id,
                        words_sent: c.words_sent,
                        words_received: c.words_received,
                        sent_x: c.sent_x,
                        sent_y: c.sent_y,
                        ternary_mults: c.ternary_mults,
                        tensor_elems: c.tensor_elems,
                        predicted_ternary: p.ternary_mults,
                    })
                    .map_err(|e| Failure::Other(e.to_string()))?;
                }
            }
            w.flush()?;
        }
    }
    if verdict.passed() {
        Ok(())
    } else {
        Err(Failure::Validation(render_checks(&verdict.checks)))
    }
}
