use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde_json::json;

use otflow::config::RunConfig;
use otflow::construct::{analyze_matrix, parse_matrix, InoueStructure};
use otflow::diagnostics::{Summary, Verdict};
use otflow::modelgeom::{bismut_ricci_model, chern_curvature_model, model_beta, model_flow, ModelParams};
use otflow::run::{diagnose_snapshots, run, snapshot_files, write_rows};
use otflow::verify::{run_suite, Suite};
use otflow::Error;

const EXIT_INVALID: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_RED_FLAG: u8 = 4;
const EXIT_VERIFY: u8 = 5;

#[derive(Parser)]
#[command(name = "otflow", version, about = "Normalized pluriclosed flow on Inoue surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze an SL(3,Z) matrix given as "m11,m12,m13;m21,m22,m23;m31,m32,m33".
    Construct { matrix: String },
    /// Model metric, Chern curvature and Bismut-Ricci coefficient along the exact flow.
    Model {
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        /// Comma-separated times.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        t: Vec<f64>,
        /// Comma-separated values of Im w.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        imw: Vec<f64>,
    },
    /// Integrate the flow described by a JSON config.
    Run { config: PathBuf },
    /// Recompute diagnostics from a directory of snapshots.
    Diag {
        dir: PathBuf,
        /// Also compute the weighted scalar curvature.
        #[arg(long)]
        stretch: bool,
        /// Write the recomputed rows here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run a self-check suite: formulas, flow, estimates or all.
    Verify { suite: String },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn configure_threads() {
    let Ok(v) = std::env::var("OTFLOW_THREADS") else {
        return;
    };
    match v.trim().parse::<usize>() {
        Ok(0) => {}
        Ok(n) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("warning: could not set thread count: {e}");
            }
        }
        Err(_) => eprintln!("warning: ignoring OTFLOW_THREADS={v:?}"),
    }
}

fn structure_json(s: &InoueStructure) -> serde_json::Value {
    let c = |z: &Complex64| json!({"re": z.re, "im": z.im});
    json!({
        "matrix": s.matrix,
        "lambda": s.lambda,
        "mu": c(&s.mu),
        "abs_mu": s.mu.norm(),
        "lambda_abs_mu_sq": s.lambda * s.mu.norm_sqr(),
        "a_vec": s.a_vec,
        "b_vec": s.b_vec.iter().map(c).collect::<Vec<_>>(),
        "V": s.v,
        "det_V": s.det_v(),
        "eigen_residual": s.eigen_residual(),
    })
}

fn cmd_construct(matrix: &str) -> ExitCode {
    let m = match parse_matrix(matrix) {
        Ok(m) => m,
        Err(e) => return fail(EXIT_INVALID, e),
    };
    match analyze_matrix(&m) {
        Ok(s) => {
            println!("{}", serde_json::to_string_pretty(&structure_json(&s)).expect("serializable"));
            ExitCode::SUCCESS
        }
        Err(e) => fail(EXIT_VALIDATION, e),
    }
}

fn cmd_model(a: f64, b: f64, ts: &[f64], imw: &[f64]) -> ExitCode {
    let params = match ModelParams::single(a, b) {
        Ok(p) => p,
        Err(e) => return fail(EXIT_INVALID, e),
    };
    let mut out = Vec::new();
    for &t in ts {
        for &y in imw {
            let w = [Complex64::new(0.0, y)];
            let row = (|| -> otflow::Result<serde_json::Value> {
                let metric = model_flow(&params, t, &w)?;
                let flowed = ModelParams::single(model_beta(a, t), (-t).exp() * b)?;
                Ok(json!({
                    "t": t,
                    "imw": y,
                    "metric": metric,
                    "chern": chern_curvature_model(&flowed, &w)?,
                    "bismut_ricci": bismut_ricci_model(&w)?[0],
                }))
            })();
            match row {
                Ok(v) => out.push(v),
                Err(e) => return fail(EXIT_INVALID, e),
            }
        }
    }
    let doc = json!({"a": a, "b": b, "points": out});
    println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
    ExitCode::SUCCESS
}

fn print_summary(summary: &Summary) -> ExitCode {
    for r in &summary.reports {
        let tag = match r.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Skipped => "SKIP",
        };
        println!("{tag:4}  {:20} {}", r.name, r.detail);
    }
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    let flags = summary.red_flags();
    if flags.is_empty() {
        ExitCode::SUCCESS
    } else {
        let names: Vec<&str> = flags.iter().map(|r| r.name.as_str()).collect();
        fail(EXIT_RED_FLAG, format!("diagnostics red flag: {}", names.join(", ")))
    }
}

fn cmd_run(path: &Path) -> ExitCode {
    let cfg = match RunConfig::load(path) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_INVALID, e),
    };
    match run(&cfg) {
        Ok(out) => {
            println!(
                "completed t = {} in {} steps, {} rows, {} snapshots",
                out.final_state.t,
                out.steps,
                out.rows.len(),
                out.snapshots.len()
            );
            print_summary(&out.summary)
        }
        Err(e @ Error::SolverFailed { .. }) => fail(EXIT_SOLVER, e),
        Err(e) => fail(EXIT_INVALID, e),
    }
}

fn cmd_diag(dir: &Path, stretch: bool, csv: Option<&PathBuf>) -> ExitCode {
    let files = match snapshot_files(dir) {
        Ok(f) if f.is_empty() => return fail(EXIT_INVALID, format!("no snapshots in {}", dir.display())),
        Ok(f) => f,
        Err(e) => return fail(EXIT_INVALID, e),
    };
    let (rows, summary) = match diagnose_snapshots(&files, stretch) {
        Ok(r) => r,
        Err(e @ Error::SolverFailed { .. }) => return fail(EXIT_SOLVER, e),
        Err(e) => return fail(EXIT_INVALID, e),
    };
    println!("{} snapshots, t = {} .. {}", rows.len(), rows[0].t, rows[rows.len() - 1].t);
    if let Some(p) = csv {
        if let Err(e) = write_rows(p, &rows) {
            return fail(EXIT_INVALID, e);
        }
    }
    print_summary(&summary)
}

fn cmd_verify(suite: &str) -> ExitCode {
    let suite: Suite = match suite.parse() {
        Ok(s) => s,
        Err(e) => return fail(EXIT_INVALID, e),
    };
    let checks = run_suite(suite, |c| {
        println!("{}  {:22} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    });
    match checks {
        Ok(checks) => match checks.iter().find(|c| !c.passed) {
            None => ExitCode::SUCCESS,
            Some(c) => fail(EXIT_VERIFY, format!("verification failed: {}", c.name)),
        },
        Err(e) => fail(EXIT_VERIFY, format!("verification failed: {e}")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    match &cli.command {
        Command::Construct { matrix } => cmd_construct(matrix),
        Command::Model { a, b, t, imw } => cmd_model(*a, *b, t, imw),
        Command::Run { config } => cmd_run(config),
        Command::Diag { dir, stretch, csv } => cmd_diag(dir, *stretch, csv.as_ref()),
        Command::Verify { suite } => cmd_verify(suite),
    }
}
