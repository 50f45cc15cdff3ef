use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use capdisc::discrepancy::{discrepancy_with, generalized_discrepancy_with, DiscrepancyOptions, Family, Side};
use capdisc::optimality::{optimality_residual, DEFAULT_ACTIVITY_TOL};
use capdisc::oracle::{oracle_discrepancy, Variant};
use capdisc::pointset::{load_pointset, sample_uniform_sphere, save_pointset, Format, IndexSet, PointSet};
use capdisc::scan::{scan, ScanSpec};
use capdisc::smooth::{finite_difference_check, lipschitz_estimate_with, phi_tilde_gradient, beta_gradient, DEFAULT_FD_STEP};
use capdisc::Error;

const EXIT_OTHER: u8 = 1;
const EXIT_DEGENERATE: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_USAGE: u8 = 4;

#[derive(Parser)]
#[command(name = "capdisc", version, about = "Exact spherical cap discrepancy tools")]
struct Cli {
    /// Worker threads for subset enumeration and direction batches.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Print a JSON run report instead of text.
    #[arg(long, global = true)]
    json: bool,

    /// Leave wall-clock timing out of the report.
    #[arg(long, global = true)]
    no_timing: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Phi,
    Phibar,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Closed,
    Open,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Exact discrepancy (or its generalized form off the sphere).
    Discrepancy {
        input: PathBuf,
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
        #[arg(long)]
        generalized: bool,
        /// Include every local discrepancy in the output.
        #[arg(long)]
        locals: bool,
        #[arg(long, default_value_t = 1e-9)]
        eps_count: f64,
    },
    /// Gradient of the selection functions of one index set.
    Grad {
        input: PathBuf,
        /// 1-based, comma separated.
        #[arg(long)]
        index_set: String,
        /// 1 or 2; omit for the gradient of the cap term itself.
        #[arg(long)]
        side: Option<u8>,
        #[arg(long)]
        check_fd: bool,
        #[arg(long, default_value_t = DEFAULT_FD_STEP)]
        h: f64,
    },
    /// Lipschitz estimates at the given set.
    Lipschitz {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "phi")]
        family: FamilyArg,
        #[arg(long)]
        table: bool,
    },
    /// First-order optimality residual.
    Optcheck {
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ACTIVITY_TOL)]
        tol: f64,
    },
    /// Direction-sampling lower bound.
    Oracle {
        input: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "closed")]
        variant: VariantArg,
    },
    /// Uniform random points on the sphere.
    Sample {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
        /// Defaults to the extension of the output path.
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Move one point along a great circle and record every local value.
    Scan {
        #[arg(long)]
        input: PathBuf,
        /// 1-based index of the moving point.
        #[arg(long)]
        point: usize,
        /// Comma separated vector; its tangential part sets the circle.
        #[arg(long, allow_hyphen_values = true)]
        direction: String,
        /// `start:end` in radians.
        #[arg(long, default_value = "-3.141592653589793:3.141592653589793", allow_hyphen_values = true)]
        range: String,
        #[arg(long, default_value_t = 401)]
        steps: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Time the exact discrepancy of a random set.
    Bench {
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Serialize)]
struct RunReport {
    command: &'static str,
    version: &'static str,
    inputs: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    results: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_seconds: Option<f64>,
}

/// Failures carry the exit code they map to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Degenerate { .. } => EXIT_DEGENERATE,
            Error::Parse { .. } | Error::Shape(_) | Error::Io { .. } => EXIT_INPUT,
            _ => EXIT_OTHER,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.threads {
        Some(0) => Err(usage("--threads must be at least 1")),
        Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
            Ok(pool) => pool.install(|| run(&cli)),
            Err(e) => Err(Failure {
                code: EXIT_OTHER,
                message: e.to_string(),
            }),
        },
        None => run(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load(path: &Path) -> Result<PointSet, Failure> {
    Ok(load_pointset(path, Format::from_path(path))?)
}

fn side_of(n: u8) -> Result<Side, Failure> {
    match n {
        1 => Ok(Side::Upper),
        2 => Ok(Side::Lower),
        other => Err(usage(format!("--side must be 1 or 2, got {other}"))),
    }
}

fn parse_vector(s: &str, flag: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("{flag}: cannot parse {p:?}")))
        })
        .collect()
}

fn parse_range(s: &str) -> Result<(f64, f64), Failure> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| usage(format!("--range expects start:end, got {s:?}")))?;
    let v = parse_vector(&format!("{a},{b}"), "--range")?;
    Ok((v[0], v[1]))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let start = Instant::now();
    let (command, inputs, seed, results, text) = match &cli.command {
        Command::Discrepancy {
            input,
            family,
            generalized,
            locals,
            eps_count,
        } => {
            let x = load(input)?;
            let mut opts = DiscrepancyOptions {
                eps_count: *eps_count,
                ..DiscrepancyOptions::default()
            };
            opts.keep_locals = *locals;
            let family = match family {
                Some(FamilyArg::Phi) => Family::Full,
                Some(FamilyArg::Phibar) => Family::Reduced,
                None if x.len() >= 2 => Family::Reduced,
                None => Family::Full,
            };
            let r = if *generalized {
                generalized_discrepancy_with(&x, &opts)?
            } else {
                discrepancy_with(&x, family, &opts)?
            };
            let witness = &r.witness;
            let text = format!(
                "value {}\nwitness I={} s={} t={}\nw {:?}\nindex sets evaluated {}",
                r.value,
                witness.index_set(),
                witness.side,
                witness.t,
                witness.w,
                r.evaluated
            );
            let mut results = json!({
                "value": r.value,
                "witness": {
                    "index_set": witness.index_set().one_based(),
                    "side": witness.side.number(),
                    "w": witness.w,
                    "t": witness.t,
                    "emp": [witness.emp.count, witness.emp.total],
                    "cap": witness.cap,
                },
                "evaluated": r.evaluated,
            });
            if let Some(all) = &r.locals {
                results["locals"] = all
                    .iter()
                    .map(|l| {
                        json!({
                            "index_set": l.index_set().one_based(),
                            "side": l.side.number(),
                            "value": l.value,
                            "emp": [l.emp.count, l.emp.total],
                            "cap": l.cap,
                        })
                    })
                    .collect();
            }
            let inputs = json!({
                "input": input,
                "family": if *generalized { "phi" } else if family == Family::Full { "phi" } else { "phibar" },
                "generalized": generalized,
                "eps_count": eps_count,
            });
            ("discrepancy", inputs, None, results, text)
        }
        Command::Grad {
            input,
            index_set,
            side,
            check_fd,
            h,
        } => {
            let x = load(input)?;
            let i = IndexSet::parse_one_based(index_set).map_err(|e| usage(e.to_string()))?;
            let table = match side {
                Some(s) => phi_tilde_gradient(&x, &i, side_of(*s)?)?,
                None => beta_gradient(&x, &i)?,
            };
            let mut text = format!("I={} t={} rho={}", i, table.t, table.rho);
            for (l, p) in table.partials.iter().enumerate() {
                text.push_str(&format!("\nx{} {:?}", l + 1, p));
            }
            let mut results = serde_json::to_value(&table).expect("serializable");
            if *check_fd {
                let fd = finite_difference_check(&x, &i, *h)?;
                text.push_str(&format!("\nmax fd relative error {:e}", fd.max_rel_error));
                results["finite_difference"] = serde_json::to_value(&fd).expect("serializable");
            }
            let inputs = json!({"input": input, "index_set": i.one_based(), "side": side, "h": h});
            ("grad", inputs, None, results, text)
        }
        Command::Lipschitz { input, family, table } => {
            let x = load(input)?;
            let family = match family {
                FamilyArg::Phi => Family::Full,
                FamilyArg::Phibar => Family::Reduced,
            };
            let est = lipschitz_estimate_with(&x, family, *table)?;
            let text = format!(
                "L_exact {} (I={:?})\nL_rough {}",
                est.l_exact, est.argmax, est.l_rough
            );
            let results = serde_json::to_value(&est).expect("serializable");
            ("lipschitz", json!({"input": input}), None, results, text)
        }
        Command::Optcheck { input, tol } => {
            let x = load(input)?;
            let cert = optimality_residual(&x, *tol)?;
            let mut text = format!(
                "residual {}\nactive pairs {}\nLambda {}",
                cert.residual,
                cert.active.entries.len(),
                cert.active.value
            );
            for g in &cert.gamma {
                text.push_str(&format!("\ngamma I={} s={} {}", g.index_set, g.side, g.gamma));
            }
            text.push_str(&format!("\nlambda {:?}", cert.lambda));
            let results = serde_json::to_value(&cert).expect("serializable");
            ("optcheck", json!({"input": input, "tol": tol}), None, results, text)
        }
        Command::Oracle {
            input,
            n,
            seed,
            variant,
        } => {
            let x = load(input)?;
            let variant = match variant {
                VariantArg::Closed => Variant::Closed,
                VariantArg::Open => Variant::Open,
            };
            let r = oracle_discrepancy(&x, *n, *seed, variant)?;
            let text = format!(
                "value {}\nthreshold {}\ndirection {:?}",
                r.value, r.best_threshold, r.best_direction
            );
            let results = serde_json::to_value(&r).expect("serializable");
            ("oracle", json!({"input": input, "n": n}), Some(*seed), results, text)
        }
        Command::Sample {
            d,
            n,
            seed,
            output,
            format,
        } => {
            let x = sample_uniform_sphere(*d, *n, *seed)?;
            let fmt = match format {
                Some(FormatArg::Csv) => Format::Csv,
                Some(FormatArg::Json) => Format::Json,
                None => Format::from_path(output),
            };
            save_pointset(&x, output, fmt)?;
            let text = format!("wrote {} points in d={} to {}", n, d, output.display());
            let results = json!({"output": output, "d": d, "N": n});
            ("sample", json!({"d": d, "N": n}), Some(*seed), results, text)
        }
        Command::Scan {
            input,
            point,
            direction,
            range,
            steps,
            output,
        } => {
            let x = load(input)?;
            if *point == 0 {
                return Err(usage("--point is 1-based"));
            }
            let (theta_start, theta_end) = parse_range(range)?;
            let spec = ScanSpec {
                point: point - 1,
                direction: parse_vector(direction, "--direction")?,
                theta_start,
                theta_end,
                steps: *steps,
            };
            let r = scan(&x, &spec)?;
            let mut file = fs::File::create(output).map_err(|source| Error::Io {
                path: output.clone(),
                source,
            })?;
            r.write_csv(&mut file)?;
            let text = format!(
                "wrote {} steps to {}\nmax Lambda step {}\nmax phi jump {}\nL_hat {}",
                steps,
                output.display(),
                r.max_lambda_step(),
                r.max_phi_jump(),
                r.l_hat()
            );
            let results = json!({
                "output": output,
                "columns": r.columns.len(),
                "max_lambda_step": r.max_lambda_step(),
                "max_phi_jump": r.max_phi_jump(),
                "step_size": r.step_size(),
                "l_hat": r.l_hat(),
            });
            let inputs = json!({
                "input": input,
                "point": point,
                "direction": spec.direction,
                "range": [theta_start, theta_end],
                "steps": steps,
            });
            ("scan", inputs, None, results, text)
        }
        Command::Bench { d, n, seed } => {
            let x = sample_uniform_sphere(*d, *n, *seed)?;
            let t0 = Instant::now();
            let r = discrepancy_with(&x, Family::Reduced, &DiscrepancyOptions::default())?;
            let secs = t0.elapsed().as_secs_f64();
            let text = format!(
                "d={} N={} threads={} value {} index sets {} seconds {:.3}",
                d,
                n,
                rayon::current_num_threads(),
                r.value,
                r.evaluated,
                secs
            );
            let results = json!({"value": r.value, "evaluated": r.evaluated, "seconds": secs});
            ("bench", json!({"d": d, "N": n}), Some(*seed), results, text)
        }
    };

    let mut out = std::io::stdout().lock();
    let written = if cli.json {
        let report = RunReport {
            command,
            version: env!("CARGO_PKG_VERSION"),
            inputs,
            seed,
            results,
            wall_seconds: (!cli.no_timing).then(|| start.elapsed().as_secs_f64()),
        };
        serde_json::to_writer_pretty(&mut out, &report)
            .map_err(std::io::Error::from)
            .and_then(|()| writeln!(out))
    } else {
        writeln!(out, "{text}")
    };
    written.map_err(|e| Failure {
        code: EXIT_OTHER,
        message: e.to_string(),
    })
}
