//! Executes a resolved configuration and writes the table and manifest.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use biot_core::verification::{
    run_convergence_experiment, run_locking_experiment, run_single, ConvergenceConfig, LockingConfig, ManufacturedCase, RateTable,
};
use biot_core::{BiotSolver, Mesh, MixedSpaces};
use thiserror::Error;

use crate::config::{Command, Format, RunConfig};

/// A failure after the configuration was accepted, tagged with the stage
/// that failed.
#[derive(Debug, Error)]
#[error("{stage} failed: {reason}")]
pub struct RunError {
    pub stage: &'static str,
    pub reason: String,
}

fn fail(stage: &'static str) -> impl Fn(&dyn std::fmt::Display) -> RunError {
    move |e| RunError { stage, reason: e.to_string() }
}

/// Runs the experiment and returns the rendered table.
pub fn render_table(config: &RunConfig) -> Result<String, RunError> {
    match config.command {
        Command::Convergence | Command::ZeroStorage => {
            let mut c = ConvergenceConfig::new(config.element, config.params, config.dt_rule, config.refinements.clone());
            c.t_final = config.t_final;
            c.diagonal = config.diagonal;
            c.scheme = config.scheme;
            c.max_over_steps = config.max_over_steps;
            let start = Instant::now();
            let table = run_convergence_experiment(&c, |run| {
                eprintln!("1/h={} dofs={} steps={} [{:.1}s]", run.n, run.dofs, run.steps, start.elapsed().as_secs_f64());
            })
            .map_err(|e| fail("convergence run")(&e))?;
            Ok(render_rates(&table, config.format))
        }
        Command::SingleRun => {
            let n = config.refinements[0];
            if let Some(path) = &config.export_matrix {
                export_matrix(config, n, path)?;
            }
            let mut c = ConvergenceConfig::new(config.element, config.params, config.dt_rule, vec![n]);
            c.t_final = config.t_final;
            c.diagonal = config.diagonal;
            c.scheme = config.scheme;
            c.max_over_steps = config.max_over_steps;
            let run = run_single(&c, n).map_err(|e| fail("single run")(&e))?;
            eprintln!("1/h={} dofs={} steps={}", run.n, run.dofs, run.steps);
            let table = RateTable::from_errors(&[(n, run.errors)]).map_err(|e| fail("error table")(&e))?;
            Ok(render_rates(&table, config.format))
        }
        Command::Locking => {
            let c = LockingConfig {
                lambdas: config.lambdas.clone(),
                refinements: config.refinements.clone(),
                reference: config.reference,
                mu: config.params.mu,
                s0: config.params.s0,
                kappa: config.params.kappa,
                alpha: config.params.alpha,
                t_final: config.t_final,
                dt_rule: config.dt_rule,
                diagonal: config.diagonal,
            };
            let start = Instant::now();
            let table = run_locking_experiment(&c, |row| {
                eprintln!("lambda={:e} 1/h={} [{:.1}s]", row.lambda, row.one_over_h, start.elapsed().as_secs_f64());
            })
            .map_err(|e| fail("locking run")(&e))?;
            Ok(match config.format {
                Format::Csv => table.to_csv(),
                Format::Md => table.to_markdown(),
            })
        }
    }
}

fn render_rates(table: &RateTable, format: Format) -> String {
    match format {
        Format::Csv => table.to_csv(),
        Format::Md => table.to_markdown(),
    }
}

fn export_matrix(config: &RunConfig, n: usize, path: &Path) -> Result<(), RunError> {
    let stage = "matrix export";
    let mesh = Mesh::structured(n, config.diagonal).map_err(|e| fail(stage)(&e))?;
    let spaces = MixedSpaces::new(Arc::new(mesh), config.element).map_err(|e| fail(stage)(&e))?;
    let case = ManufacturedCase::new(config.params);
    let grid = config.dt_rule.grid(n, config.t_final).map_err(|e| fail(stage)(&e))?;
    let solver = BiotSolver::new(&spaces, &case, grid.dt(), config.scheme).map_err(|e| fail(stage)(&e))?;
    let file = std::fs::File::create(path).map_err(|e| fail(stage)(&e))?;
    solver.matrix().write_matrix_market(std::io::BufWriter::new(file)).map_err(|e| fail(stage)(&e))
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

/// Runs `config`, writes the table to the output (or stdout) and the
/// manifest next to it (or to stderr).
pub fn dispatch(config: &RunConfig) -> Result<(), RunError> {
    let start = Instant::now();
    let table = render_table(config)?;
    let manifest = format!("{}wall-time-s={:.3}\n", config.to_manifest(), start.elapsed().as_secs_f64());
    let write = fail("writing output");
    match &config.output {
        Some(path) => {
            std::fs::write(path, &table).map_err(|e| write(&e))?;
            std::fs::write(manifest_path(path), manifest).map_err(|e| write(&e))?;
        }
        None => {
            std::io::stdout().write_all(table.as_bytes()).map_err(|e| write(&e))?;
            eprint!("{manifest}");
        }
    }
    Ok(())
}
