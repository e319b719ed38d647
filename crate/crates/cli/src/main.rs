//! `kbuild`: command-line front end for the knowledge-building model.
//!
//! Exit codes: 0 success, 1 infeasible distribution or no feasible point,
//! 2 argument or file errors.

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kbuild::format::fmt12;
use kbuild::io::{load_instance, write_surface, write_trace_csv, write_trajectory};
use kbuild::model::FEASIBILITY_MARGIN;
use kbuild::optimizer::DEFAULT_BRUTE_FORCE_CAP;
use kbuild::{
    brute_force_parallel, evaluate, feasibility, hill_climb, multi_start, random_distribution,
    simulate, steady_state_total, sweep_surface, triggered_decomposition, Error, Instance,
    ReleaseSchedule, UserDistribution, Vector,
};

#[derive(Parser, Debug)]
#[command(name = "kbuild", version, about = "Knowledge-building triggering model toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Instance JSON file
    #[arg(long, value_name = "PATH")]
    instance: PathBuf,
    /// Objective weights overriding the instance's, e.g. 1,0,0
    #[arg(long, value_name = "W1,..,WM")]
    weights: Option<String>,
    /// Print the resolved configuration before running
    #[arg(long)]
    print_config: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check an instance and optionally the feasibility of a distribution
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "N1,..,NM")]
        dist: Option<String>,
    },
    /// Closed-form total knowledge for a distribution
    Steady {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "N1,..,NM")]
        dist: String,
    },
    /// Step the recursion and write the trajectory as CSV
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "N1,..,NM")]
        dist: String,
        /// impulse | uniform:W | geometric:q
        #[arg(long, default_value = "impulse")]
        schedule: String,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_steps: usize,
        /// Output CSV (stdout when omitted)
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Split total knowledge into internal and triggered parts
    Decompose {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "N1,..,NM")]
        dist: String,
    },
    /// Hill-climb towards the best distribution
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Explicit start; drawn from --seed when omitted
        #[arg(long, value_name = "N1,..,NM")]
        start: Option<String>,
        /// Number of random starts
        #[arg(long, default_value_t = 1)]
        starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the hill-climb path of the best run as CSV
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
    },
    /// Evaluate every distribution
    Brute {
        #[command(flatten)]
        common: Common,
        /// Refuse to run above this many compositions
        #[arg(long, default_value_t = DEFAULT_BRUTE_FORCE_CAP)]
        cap: u128,
    },
    /// Objective over all (n1, n2) for three categories, as CSV
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Output CSV (stdout when omitted)
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    /// exit 1
    Infeasible(String),
    /// exit 2
    Usage(String),
}

impl Failure {
    fn usage(ctx: &str, e: impl std::fmt::Display) -> Self {
        Failure::Usage(format!("{ctx}: {e}"))
    }

    fn model(ctx: &str, e: Error) -> Self {
        match e {
            Error::Infeasible { .. } | Error::NoFeasiblePoint { .. } | Error::Divergent { .. } => {
                Failure::Infeasible(format!("{ctx}: {e}"))
            }
            other => Failure::Usage(format!("{ctx}: {other}")),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let (stdout, stderr) = (io::stdout(), io::stderr());
    let code = invoke(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock());
    ExitCode::from(code)
}

/// Parses `args` (program name first), runs the command and returns the exit code.
fn invoke<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return e.exit_code().clamp(0, 255) as u8;
        }
    };
    let result = run(cli.command, out);
    let _ = out.flush();
    match result {
        Ok(()) => 0,
        Err(Failure::Infeasible(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
    }
}

fn join(xs: impl IntoIterator<Item = f64>) -> String {
    xs.into_iter().map(fmt12).collect::<Vec<_>>().join(",")
}

fn load(common: &Common) -> CliResult<Instance> {
    let inst = load_instance(&common.instance)
        .map_err(|e| Failure::usage(&format!("--instance {}", common.instance.display()), e))?;
    match &common.weights {
        None => Ok(inst),
        Some(raw) => {
            let w = raw
                .split(',')
                .enumerate()
                .map(|(i, s)| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Failure::usage("--weights", format!("entry {i} ({s:?}) is not a number")))
                })
                .collect::<CliResult<Vec<_>>>()?;
            let w = Vector::new(w).map_err(|e| Failure::usage("--weights", e))?;
            inst.with_weights(Some(w)).map_err(|e| Failure::usage("--weights", e))
        }
    }
}

fn parse_dist(flag: &str, raw: &str, inst: &Instance) -> CliResult<UserDistribution> {
    let dist: UserDistribution = raw.parse().map_err(|e| Failure::usage(flag, e))?;
    dist.check(inst).map_err(|e| Failure::usage(flag, e))?;
    Ok(dist)
}

fn write_or_stdout(
    path: Option<&Path>,
    out: &mut dyn Write,
    body: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> CliResult {
    match path {
        None => body(out).map_err(|e| Failure::usage("stdout", e)),
        Some(p) => {
            let ctx = format!("--out {}", p.display());
            let file = std::fs::File::create(p).map_err(|e| Failure::usage(&ctx, e))?;
            let mut w = io::BufWriter::new(file);
            body(&mut w).map_err(|e| Failure::usage(&ctx, e))?;
            w.flush().map_err(|e| Failure::usage(&ctx, e))
        }
    }
}

fn print_config(out: &mut dyn Write, common: &Common, subcommand: &str, extra: &[(&str, String)]) -> CliResult {
    if !common.print_config {
        return Ok(());
    }
    let mut lines = vec![
        ("subcommand", subcommand.to_string()),
        ("instance", common.instance.display().to_string()),
        ("weights", common.weights.clone().unwrap_or_else(|| "instance".into())),
        ("feasibility_margin", fmt12(FEASIBILITY_MARGIN)),
    ];
    lines.extend(extra.iter().map(|(k, v)| (*k, v.clone())));
    for (k, v) in lines {
        writeln!(out, "# config {k}={v}").map_err(|e| Failure::usage("stdout", e))?;
    }
    Ok(())
}

macro_rules! emit {
    ($out:expr, $($arg:tt)*) => {
        writeln!($out, $($arg)*).map_err(|e| Failure::usage("stdout", e))?
    };
}

fn run(command: Command, out: &mut dyn Write) -> CliResult {
    match command {
        Command::Validate { common, dist } => {
            print_config(out, &common, "validate", &[])?;
            let inst = load(&common)?;
            emit!(out, "name={}", inst.name().unwrap_or("-"));
            emit!(out, "n={}", inst.n());
            emit!(out, "m={}", inst.m());
            for (i, row) in inst.triggering().to_rows().into_iter().enumerate() {
                emit!(out, "T[{i}]={}", join(row));
            }
            emit!(out, "r={}", join(inst.internal().as_slice().iter().copied()));
            match inst.weights() {
                Some(w) => emit!(out, "weights={}", join(w.as_slice().iter().copied())),
                None => emit!(out, "weights=default"),
            }
            if let Some(raw) = dist {
                let dist = parse_dist("--dist", &raw, &inst)?;
                let f = feasibility(&inst, &dist).map_err(|e| Failure::model("--dist", e))?;
                emit!(out, "dist={dist}");
                emit!(out, "rho={}", fmt12(f.rho));
                emit!(out, "feasible={}", f.feasible);
                f.into_result().map_err(|e| Failure::model("--dist", e))?;
            }
            Ok(())
        }
        Command::Steady { common, dist } => {
            print_config(out, &common, "steady", &[])?;
            let inst = load(&common)?;
            let dist = parse_dist("--dist", &dist, &inst)?;
            let k = steady_state_total(&inst, &dist).map_err(|e| Failure::model("--dist", e))?;
            let ev = evaluate(&inst, &dist).map_err(|e| Failure::model("--dist", e))?;
            emit!(out, "dist={dist}");
            emit!(out, "K={}", join(k.as_slice().iter().copied()));
            emit!(out, "total={}", fmt12(k.total()));
            if inst.weights().is_some() {
                emit!(out, "objective={}", fmt12(ev.objective.unwrap_or(f64::NAN)));
            }
            emit!(out, "rho={}", fmt12(ev.rho));
            Ok(())
        }
        Command::Decompose { common, dist } => {
            print_config(out, &common, "decompose", &[])?;
            let inst = load(&common)?;
            let dist = parse_dist("--dist", &dist, &inst)?;
            let dec = triggered_decomposition(&inst, &dist).map_err(|e| Failure::model("--dist", e))?;
            emit!(out, "dist={dist}");
            emit!(out, "internal={}", join(dec.internal.as_slice().iter().copied()));
            emit!(out, "triggered={}", join(dec.triggered.as_slice().iter().copied()));
            emit!(out, "total={}", join(dec.total.as_slice().iter().copied()));
            emit!(out, "triggered_ratio={}", fmt12(dec.triggered_ratio()));
            Ok(())
        }
        Command::Simulate {
            common,
            dist,
            schedule,
            tol,
            max_steps,
            out: path,
        } => {
            let sched: ReleaseSchedule = schedule.parse().map_err(|e| Failure::usage("--schedule", e))?;
            if !(tol > 0.0) {
                return Err(Failure::usage("--tol", "must be positive"));
            }
            if max_steps == 0 {
                return Err(Failure::usage("--max-steps", "must be at least 1"));
            }
            print_config(
                out,
                &common,
                "simulate",
                &[
                    ("schedule", sched.to_string()),
                    ("tol", fmt12(tol)),
                    ("max_steps", max_steps.to_string()),
                ],
            )?;
            let inst = load(&common)?;
            let dist = parse_dist("--dist", &dist, &inst)?;
            let res = simulate(&inst, &dist, &sched, tol, max_steps).map_err(|e| Failure::model("--dist", e))?;
            write_or_stdout(path.as_deref(), out, |w| write_trajectory(&res, w))?;
            if path.is_some() {
                emit!(out, "dist={dist}");
                emit!(out, "schedule={sched}");
                emit!(out, "steps={}", res.steps_run);
                emit!(out, "converged={}", res.converged);
                emit!(out, "cumulative={}", join(res.cumulative.as_slice().iter().copied()));
                emit!(out, "total={}", fmt12(res.cumulative.total()));
            }
            Ok(())
        }
        Command::Optimize {
            common,
            start,
            starts,
            seed,
            trace,
        } => {
            if starts == 0 {
                return Err(Failure::usage("--starts", "must be at least 1"));
            }
            if starts > 1 && start.is_some() {
                return Err(Failure::usage("--start", "cannot be combined with --starts > 1"));
            }
            print_config(
                out,
                &common,
                "optimize",
                &[("starts", starts.to_string()), ("seed", seed.to_string())],
            )?;
            let inst = load(&common)?;
            let run = if starts > 1 {
                let ms = multi_start(&inst, starts, seed).map_err(|e| Failure::model("optimize", e))?;
                emit!(out, "starts={starts}");
                emit!(out, "seed={seed}");
                emit!(out, "agreement={}", fmt12(ms.agreement));
                let best = ms
                    .best()
                    .cloned()
                    .ok_or_else(|| Failure::Infeasible("optimize: every start is infeasible".into()))?;
                emit!(out, "start={}", ms.starts[ms.best_index.expect("best exists")]);
                best
            } else {
                let start = match start {
                    Some(raw) => parse_dist("--start", &raw, &inst)?,
                    None => {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        random_distribution(inst.n(), inst.m(), &mut rng)
                    }
                };
                emit!(out, "start={start}");
                hill_climb(&inst, &start).map_err(|e| Failure::model("--start", e))?
            };
            let Some(objective) = run.objective else {
                return Err(Failure::Infeasible(format!(
                    "--start {}: start and all its neighbors are infeasible",
                    run.best
                )));
            };
            let rho = run.trace.steps.last().map_or(f64::NAN, |s| s.rho);
            emit!(out, "best={}", run.best);
            emit!(out, "objective={}", fmt12(objective));
            emit!(out, "rho={}", fmt12(rho));
            emit!(out, "moves={}", run.trace.steps.len().saturating_sub(1));
            emit!(out, "outcome={}", run.trace.outcome.as_str());
            if let Some(p) = trace {
                let ctx = format!("--trace {}", p.display());
                write_trace_csv(&run.trace, inst.m(), &p).map_err(|e| Failure::usage(&ctx, e))?;
            }
            Ok(())
        }
        Command::Brute { common, cap } => {
            print_config(out, &common, "brute", &[("cap", cap.to_string())])?;
            let inst = load(&common)?;
            let res = brute_force_parallel(&inst, cap).map_err(|e| Failure::model("brute", e))?;
            let ev = evaluate(&inst, &res.best).map_err(|e| Failure::model("brute", e))?;
            emit!(out, "best={}", res.best);
            emit!(out, "objective={}", fmt12(res.objective));
            emit!(out, "rho={}", fmt12(ev.rho));
            emit!(out, "evaluated={}", res.evaluated);
            emit!(out, "infeasible={}", res.infeasible_count);
            Ok(())
        }
        Command::Sweep { common, out: path } => {
            print_config(out, &common, "sweep", &[])?;
            let inst = load(&common)?;
            let records = sweep_surface(&inst).map_err(|e| Failure::model("--instance", e))?;
            write_or_stdout(path.as_deref(), out, |w| write_surface(&records, w))?;
            if path.is_some() {
                let feasible = records.iter().filter(|r| r.objective.is_some()).count();
                emit!(out, "records={}", records.len());
                emit!(out, "feasible={feasible}");
                let best = records
                    .iter()
                    .filter_map(|r| r.objective.map(|o| (r, o)))
                    .fold(None::<(&kbuild::SurfaceRecord<f64>, f64)>, |acc, (r, o)| match acc {
                        Some((_, bo)) if bo >= o => acc,
                        _ => Some((r, o)),
                    });
                if let Some((r, o)) = best {
                    emit!(out, "max={},{},{}", r.n1, r.n2, r.n3);
                    emit!(out, "max_objective={}", fmt12(o));
                }
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests;
