//! External-process backend: write the LP file, run a solver command
//! with `{lp}` and `{sol}` placeholders, parse the solution file it
//! leaves behind. Each solve owns a private temp workspace.

use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use crate::milp::MilpModel;
use crate::solver::lp_format;
use crate::solver::sol_format::{self, write_solution};
use crate::solver::{RawSolution, SolveError, SolveParams, SolveStatus, TMPDIR_ENV};

fn workspace() -> Result<tempfile::TempDir, SolveError> {
    let mut builder = tempfile::Builder::new();
    let builder = builder.prefix("gridmend-solve.");
    match std::env::var_os(TMPDIR_ENV) {
        Some(dir) => {
            std::fs::create_dir_all(&dir)?;
            Ok(builder.tempdir_in(dir)?)
        }
        None => Ok(builder.tempdir()?),
    }
}

fn build_argv(template: &str, lp: &Path, sol: &Path) -> Result<Vec<String>, SolveError> {
    if !template.contains("{lp}") || !template.contains("{sol}") {
        return Err(SolveError::Process(format!(
            "solver command template needs {{lp}} and {{sol}} placeholders: {template:?}"
        )));
    }
    Ok(template
        .split_whitespace()
        .map(|tok| {
            tok.replace("{lp}", &lp.display().to_string())
                .replace("{sol}", &sol.display().to_string())
        })
        .collect())
}

fn run_with_deadline(argv: &[String], deadline: Duration) -> Result<(), SolveError> {
    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| SolveError::Process(format!("cannot spawn {:?}: {e}", argv[0])))?;
    let start = Instant::now();
    loop {
        match child.try_wait()? {
            Some(status) if status.success() => return Ok(()),
            Some(status) => {
                let mut err = String::new();
                if let Some(mut pipe) = child.stderr.take() {
                    use std::io::Read;
                    let _ = pipe.read_to_string(&mut err);
                }
                let tail: String = err.lines().rev().take(5).collect::<Vec<_>>().join(" | ");
                return Err(SolveError::Process(format!(
                    "solver exited with {status}: {tail}"
                )));
            }
            None if start.elapsed() > deadline => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(SolveError::Killed);
            }
            None => std::thread::sleep(Duration::from_millis(20)),
        }
    }
}

pub(crate) fn solve(
    model: &MilpModel,
    params: &SolveParams,
    command: &str,
) -> Result<RawSolution, SolveError> {
    let dir = workspace()?;
    let lp_path = dir.path().join("model.lp");
    let sol_path = dir.path().join("model.sol");
    std::fs::write(&lp_path, lp_format::write_lp(model, false)?)?;

    let argv = build_argv(command, &lp_path, &sol_path)?;
    let grace = Duration::from_secs_f64(params.time_limit * 1.5 + 30.0);
    run_with_deadline(&argv, grace)?;

    let text = std::fs::read_to_string(&sol_path).map_err(|e| {
        SolveError::Process(format!(
            "solver wrote no solution file at {}: {e}",
            sol_path.display()
        ))
    })?;
    let parsed = sol_format::parse_solution(&text)?;
    if !parsed.status.has_solution() {
        return Ok(RawSolution {
            status: parsed.status,
            values: Vec::new(),
            reported_objective: parsed.objective,
        });
    }
    let mut values = vec![0.0; model.vars.len()];
    for (name, v) in &parsed.values {
        match model.var_by_name(name) {
            Some(id) => values[id.0] = *v,
            None => {
                return Err(SolveError::Unparseable(format!(
                    "solution names unknown variable {name:?}"
                )))
            }
        }
    }
    Ok(RawSolution {
        status: parsed.status,
        values,
        reported_objective: parsed.objective,
    })
}

/// File-to-file MILP solve of an LP-format model, writing the solution
/// dialect our parser reads. This is what the CLI's `solve-lp`
/// subcommand calls, letting the test suite (or a user without a system
/// solver) point the external backend at this binary itself.
pub fn solve_lp_file(
    lp_path: &Path,
    sol_path: &Path,
    params: &SolveParams,
) -> Result<SolveStatus, SolveError> {
    let text = std::fs::read_to_string(lp_path)?;
    let lp = lp_format::parse_lp(&text)?;
    let (status, objective, values) = super::embedded::solve_parsed(&lp, params)?;
    let out = write_solution(status, objective, &values);
    if let Some(parent) = sol_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(sol_path, out)?;
    Ok(status)
}

#[allow(dead_code)]
fn _path_types(_: PathBuf) {}
