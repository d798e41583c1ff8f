//! `conedp` subcommands. Each returns a process exit code:
//! 0 ok, 2 bad input, 3 numeric failure, 4 check violated, 5 hash mismatch,
//! 6 enumeration cap exceeded.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::control::ControlError;
use crate::dp::{backward_solve, export_field, import_field, read_manifest, DpError};
use crate::io::ProblemFile;
use crate::oracle::{enumerate_front, scalar_dp, OracleError};
use crate::pareto::write_points_csv;
use crate::verify::{check_contingent, check_dpp, check_estimates, check_lipschitz, check_proximal, VerifyError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_VIOLATION: i32 = 4;
pub const EXIT_HASH: i32 = 5;
pub const EXIT_CAP: i32 = 6;

#[derive(Parser, Debug)]
#[command(name = "conedp", version, about = "Cone-ordered multiobjective dynamic programming")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve the DP recursion and export the value field.
    Solve { problem: PathBuf, out_dir: PathBuf },
    /// Run checks against a solved field.
    Verify {
        problem: PathBuf,
        field_dir: PathBuf,
        #[arg(long = "check", value_enum, required = true)]
        checks: Vec<Check>,
        /// Write the JSON report here instead of standard output.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Brute-force ground truth at the initial state.
    Oracle {
        problem: PathBuf,
        out_dir: PathBuf,
        /// Classical scalar DP table (single-objective problems only).
        #[arg(long)]
        scalar: bool,
        /// Enumerate without snapping states to the lattice.
        #[arg(long)]
        exact_states: bool,
        #[arg(long)]
        cap: Option<u64>,
    },
    /// Print a summary of a problem file.
    Info { problem: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Check {
    Estimates,
    Dpp,
    Contingent,
    Proximal,
    Lipschitz,
}

pub fn run(cli: Cli) -> i32 {
    let exec = || match cli.command {
        Command::Solve { problem, out_dir } => cmd_solve(&problem, &out_dir),
        Command::Verify {
            problem,
            field_dir,
            checks,
            report,
        } => cmd_verify(&problem, &field_dir, &checks, report.as_deref()),
        Command::Oracle {
            problem,
            out_dir,
            scalar,
            exact_states,
            cap,
        } => cmd_oracle(&problem, &out_dir, scalar, exact_states, cap),
        Command::Info { problem } => cmd_info(&problem),
    };
    match cli.jobs {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(exec),
            Err(e) => fail(EXIT_INPUT, &format!("cannot start {n} workers: {e}")),
        },
        None => exec(),
    }
}

fn fail(code: i32, msg: &str) -> i32 {
    eprintln!("conedp: {msg}");
    code
}

fn load(path: &Path) -> Result<ProblemFile, i32> {
    ProblemFile::load(path).map_err(|e| fail(EXIT_INPUT, &e.to_string()))
}

fn control_code(e: &ControlError) -> i32 {
    match e {
        ControlError::NonFinite { .. } => EXIT_NUMERIC,
        ControlError::CapExceeded { .. } => EXIT_CAP,
        _ => EXIT_INPUT,
    }
}

fn dp_code(e: &DpError) -> i32 {
    match e {
        DpError::Control(c) => control_code(c),
        DpError::Undefined { .. } => EXIT_NUMERIC,
        DpError::Format(_) | DpError::Json(_) => EXIT_INPUT,
        _ => EXIT_INPUT,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    fs::write(path, s)
}

pub fn cmd_solve(path: &Path, out_dir: &Path) -> i32 {
    let pf = match load(path) {
        Ok(p) => p,
        Err(c) => return c,
    };
    let field = match backward_solve(&pf.problem, &pf.cone, &pf.grid, &pf.config) {
        Ok(f) => f,
        Err(e) => return fail(dp_code(&e), &e.to_string()),
    };
    let node = pf.grid.nearest(&pf.initial_state).expect("validated inside the box");
    let Some(front) = field.front(0, node) else {
        let x = pf.grid.node(node);
        return fail(EXIT_NUMERIC, &format!("trajectory escape: some control sequence from node {node} at x = {x:?} leaves the grid box"));
    };
    if let Err(e) = export_field(&field, out_dir, &pf.hash()) {
        return fail(EXIT_INPUT, &e.to_string());
    }
    let res = fs::File::create(out_dir.join("front_initial.csv")).and_then(|f| {
        let mut w = BufWriter::new(f);
        write_points_csv(front.points(), &mut w)?;
        w.flush()
    });
    if let Err(e) = res {
        return fail(EXIT_INPUT, &e.to_string());
    }
    println!("solved {}: {} slices, {} points at the initial node", pf.name, field.steps() + 1, front.len());
    EXIT_OK
}

#[derive(Serialize)]
struct VerifyReport {
    tool: &'static str,
    version: &'static str,
    problem_hash: String,
    checks: serde_json::Map<String, serde_json::Value>,
    passed: bool,
}

pub fn cmd_verify(path: &Path, field_dir: &Path, checks: &[Check], report_path: Option<&Path>) -> i32 {
    let pf = match load(path) {
        Ok(p) => p,
        Err(c) => return c,
    };
    if checks.contains(&Check::Lipschitz) && pf.outer_cone.is_none() {
        return fail(EXIT_INPUT, "cone C required");
    }
    let hash = pf.hash();
    let needs_field = checks.iter().any(|c| matches!(c, Check::Dpp | Check::Contingent | Check::Proximal));
    let field = if needs_field {
        match read_manifest(field_dir) {
            Ok(m) if m.problem_hash != hash => {
                return fail(EXIT_HASH, &format!("field was solved for problem {} but this problem hashes to {hash}", m.problem_hash))
            }
            Ok(_) => {}
            Err(e) => return fail(EXIT_INPUT, &e.to_string()),
        }
        let (field, _) = match import_field(field_dir) {
            Ok(f) => f,
            Err(e) => return fail(EXIT_INPUT, &e.to_string()),
        };
        if let Some(w) = field.antichain_witness() {
            return fail(
                EXIT_VIOLATION,
                &format!(
                    "front at t_{} node {} is not an antichain: {:?} dominates {:?}",
                    w.time_index, w.node, w.dominating, w.dominated
                ),
            );
        }
        Some(field)
    } else {
        None
    };
    let mut out = serde_json::Map::new();
    let mut passed = true;
    let mut worst = Vec::new();
    for &check in checks {
        let key = serde_json::to_value(check).expect("plain enum").as_str().unwrap_or_default().to_string();
        let res: Result<(bool, serde_json::Value, String), VerifyError> = (|| {
            let field = field.as_ref();
            Ok(match check {
                Check::Estimates => {
                    let r = check_estimates(&pf)?;
                    let w = format!("cost estimate max violation {:e}", r.cost.max_violation.max(r.trajectory.max_violation).max(r.objective.max_violation));
                    (r.passed, json(&r), w)
                }
                Check::Dpp => {
                    let r = check_dpp(&pf, field.expect("loaded"))?;
                    let w = format!("worst DP gap {:e} ({}x tolerance)", r.worst_gap, r.worst_ratio);
                    (r.passed, json(&r), w)
                }
                Check::Contingent => {
                    let r = check_contingent(&pf, field.expect("loaded"))?;
                    let w = match r.failures.first() {
                        Some(f) => format!("{} of {} triples satisfied; first failure at t_{} node {} y {:?}", r.satisfied, r.sampled, f.time_index, f.node, f.y),
                        None => format!("{} of {} triples satisfied", r.satisfied, r.sampled),
                    };
                    (r.passed, json(&r), w)
                }
                Check::Proximal => {
                    let r = check_proximal(&pf, field.expect("loaded"))?;
                    let w = format!("{} normals, polarity excess {:?}, boundary excess {:?}", r.normals, r.polarity_excess, r.boundary_excess);
                    (r.passed, json(&r), w)
                }
                Check::Lipschitz => {
                    let r = check_lipschitz(&pf, pf.budgets.lipschitz_pairs, 30)?;
                    let w = format!("{} violations in {} pairs, max ratio {} vs M = {}", r.violations, r.pairs, r.max_ratio, r.constant);
                    (r.passed, json(&r), w)
                }
            })
        })();
        match res {
            Ok((ok, value, witness)) => {
                if !ok {
                    passed = false;
                    worst.push(format!("{key}: {witness}"));
                }
                out.insert(key, value);
            }
            Err(VerifyError::NoOuterCone) => return fail(EXIT_INPUT, "cone C required"),
            Err(VerifyError::Control(e)) => return fail(control_code(&e), &e.to_string()),
            Err(VerifyError::Dp(e)) => return fail(dp_code(&e), &e.to_string()),
            Err(e) => return fail(EXIT_INPUT, &e.to_string()),
        }
    }
    let report = VerifyReport {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        problem_hash: hash,
        checks: out,
        passed,
    };
    let written = match report_path {
        Some(p) => write_json(p, &report),
        None => {
            let mut s = serde_json::to_string_pretty(&report).expect("reports serialize");
            s.push('\n');
            std::io::stdout().write_all(s.as_bytes())
        }
    };
    if let Err(e) = written {
        return fail(EXIT_INPUT, &e.to_string());
    }
    if passed {
        EXIT_OK
    } else {
        for w in worst {
            eprintln!("conedp: violation: {w}");
        }
        EXIT_VIOLATION
    }
}

#[derive(Serialize)]
struct OracleSummary<'a> {
    tool: &'static str,
    version: &'static str,
    problem_hash: String,
    mode: &'a str,
    sequences: Option<u64>,
    front_size: Option<usize>,
}

pub fn cmd_oracle(path: &Path, out_dir: &Path, scalar: bool, exact_states: bool, cap: Option<u64>) -> i32 {
    let pf = match load(path) {
        Ok(p) => p,
        Err(c) => return c,
    };
    if scalar && pf.problem.cost_dim != 1 {
        return fail(EXIT_INPUT, &format!("--scalar needs a single objective, this problem has {}", pf.problem.cost_dim));
    }
    if let Err(e) = fs::create_dir_all(out_dir) {
        return fail(EXIT_INPUT, &e.to_string());
    }
    let oracle_code = |e: &OracleError| match e {
        OracleError::CapExceeded { .. } => EXIT_CAP,
        OracleError::Escape { .. } => EXIT_NUMERIC,
        OracleError::Control(c) => control_code(c),
        _ => EXIT_INPUT,
    };
    let summary = if scalar {
        let table = match scalar_dp(&pf.problem, &pf.grid, &pf.config) {
            Ok(t) => t,
            Err(e) => return fail(oracle_code(&e), &e.to_string()),
        };
        let res = fs::File::create(out_dir.join("scalar_table.csv")).and_then(|f| {
            let mut w = BufWriter::new(f);
            for (i, slice) in table.values.iter().enumerate() {
                for (node, v) in slice.iter().enumerate() {
                    if let Some(v) = v {
                        writeln!(w, "{i},{node},{v:?}")?;
                    }
                }
            }
            w.flush()
        });
        if let Err(e) = res {
            return fail(EXIT_INPUT, &e.to_string());
        }
        OracleSummary {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            problem_hash: pf.hash(),
            mode: "scalar",
            sequences: None,
            front_size: None,
        }
    } else {
        let landing = (!exact_states).then_some(&pf.grid);
        let r = match enumerate_front(&pf.problem, &pf.cone, 0.0, &pf.initial_state, &pf.config, landing, cap.unwrap_or(pf.oracle_cap)) {
            Ok(r) => r,
            Err(e) => return fail(oracle_code(&e), &e.to_string()),
        };
        let res = (|| -> std::io::Result<()> {
            for (name, pts) in [("oracle_front.csv", r.front.points()), ("oracle_cloud.csv", r.cloud.points())] {
                let mut w = BufWriter::new(fs::File::create(out_dir.join(name))?);
                write_points_csv(pts, &mut w)?;
                w.flush()?;
            }
            Ok(())
        })();
        if let Err(e) = res {
            return fail(EXIT_INPUT, &e.to_string());
        }
        OracleSummary {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            problem_hash: pf.hash(),
            mode: if exact_states { "exact" } else { "nearest" },
            sequences: Some(r.count),
            front_size: Some(r.front.len()),
        }
    };
    if let Err(e) = write_json(&out_dir.join("oracle.json"), &summary) {
        return fail(EXIT_INPUT, &e.to_string());
    }
    EXIT_OK
}

pub fn cmd_info(path: &Path) -> i32 {
    let pf = match load(path) {
        Ok(p) => p,
        Err(c) => return c,
    };
    let p = &pf.problem;
    println!("name        {}", pf.name);
    println!("hash        {}", pf.hash());
    println!("dimensions  state {} / cost {} / control {}", p.state_dim, p.cost_dim, p.control_dim);
    println!("controls    {}", p.controls.len());
    println!("horizon     {} in {} steps of {}", p.horizon, pf.config.steps, pf.step());
    println!("grid        {:?} nodes on [{:?}, {:?}]", pf.grid.nodes, pf.grid.lower, pf.grid.upper);
    println!("sequences   {}", crate::control::sequence_count(p.controls.len(), pf.config.steps));
    println!("mu(P)       {}", pf.cone.mu().map_or_else(|e| e.to_string(), |m| m.to_string()));
    match pf.cone_pair() {
        Some(Ok(pair)) => println!(
            "alpha       {}\nM(C,P)      {}",
            pair.alpha(),
            pair.lipschitz_constant().map_or_else(|e| e.to_string(), |m| m.to_string())
        ),
        Some(Err(e)) => return fail(EXIT_INPUT, &e.to_string()),
        None => println!("M(C,P)      (no comparison cone)"),
    }
    EXIT_OK
}

fn json<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("reports serialize")
}
