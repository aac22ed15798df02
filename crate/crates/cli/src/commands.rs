//! The `check`, `solve` and `sweep` subcommands.

use std::io::Write;
use std::path::{Path, PathBuf};

use multibump::model::{check_hypotheses, HypothesisReport, ProblemSpec};
use multibump::nehari::{build_seed, NehariConstants};
use multibump::par;
use multibump::solver::{
    concentration_gap, minimize_with, mu_sweep_partial, solve_limit_problems, GapRow, LimitResult,
    Setup, SolveOptions, SolveReport,
};
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::error::CliError;
use crate::output;

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mu: Option<f64>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl Overrides {
    fn directory(&self, config: &RunConfig) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| config.output.directory.clone())
    }

    fn options(&self, config: &RunConfig) -> SolveOptions {
        let mut opts = config.solver.clone();
        if let Some(seed) = self.seed {
            opts.rng_seed = seed;
        }
        opts
    }
}

/// Written in place of a solver report when the run fails.
#[derive(Debug, Serialize)]
struct FailureReport {
    mu: f64,
    lambda: f64,
    error: String,
    energy_trace: Option<Vec<f64>>,
}

impl FailureReport {
    fn new(spec: &ProblemSpec, err: &multibump::Error) -> Self {
        let mut inner = err;
        while let multibump::Error::Sweep { source, .. } = inner {
            inner = source;
        }
        let energy_trace = inner.energy_trace().map(<[f64]>::to_vec);
        Self {
            mu: spec.mu(),
            lambda: spec.lambda(),
            error: inner.to_string(),
            energy_trace,
        }
    }
}

fn numeric(e: multibump::Error) -> CliError {
    CliError::Failed(e.to_string())
}

fn say(out: &mut dyn Write, line: std::fmt::Arguments) {
    // Console output is informational; a closed stdout must not abort a run
    // whose artifacts are already on disk.
    let _ = writeln!(out, "{line}");
}

fn print_hypotheses(out: &mut dyn Write, report: &HypothesisReport) {
    say(out, format_args!("hypotheses"));
    for o in &report.outcomes {
        let mark = if o.passed { "pass" } else { "FAIL" };
        say(out, format_args!("  {:<4} {mark}  {}", o.name, o.detail));
    }
    let [t, h, b] = report.eigenvalues;
    say(
        out,
        format_args!("eigenvalues  tilde {t:.6}  hat {h:.6}  bar {b:.6}"),
    );
}

fn print_constants(out: &mut dyn Write, c: &NehariConstants) {
    say(out, format_args!("constants"));
    let rows = [
        ("Λ₁", c.lambda_1),
        ("Λ̃", c.lambda_tilde),
        ("γ", c.gamma),
        ("c_p", c.c_p),
        ("ρ", c.rho),
        ("R", c.radius),
        ("κ₁", c.kappa_1),
        ("ν₀", c.nu_0),
        ("I(v)", c.seed_energy),
    ];
    for (name, v) in rows {
        say(out, format_args!("  {name:<5} {v:.6e}"));
    }
}

/// Spectral data, hypotheses, seed and constants for `spec`.
fn setup(
    spec: &ProblemSpec,
    opts: &SolveOptions,
) -> Result<(HypothesisReport, Option<Setup>), CliError> {
    let spectral = spec.disc().spectral(1e-12).map_err(numeric)?;
    let hypotheses = check_hypotheses(spec, &spectral);
    if !hypotheses.all_passed() {
        return Ok((hypotheses, None));
    }
    let seed = build_seed(spec, opts.tol_fiber).map_err(numeric)?;
    let constants =
        NehariConstants::compute(spec, &spectral, spec.energy(&seed.u)).map_err(numeric)?;
    Ok((
        hypotheses,
        Some(Setup {
            spectral,
            seed,
            constants,
        }),
    ))
}

fn failed_hypotheses(report: &HypothesisReport) -> CliError {
    let names: Vec<&str> = report
        .outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| o.name.as_str())
        .collect();
    CliError::Failed(format!("hypotheses failed: {}", names.join(", ")))
}

pub fn cmd_check(path: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let config = RunConfig::load(path)?;
    let spec = config.problem()?;
    let (hypotheses, setup) = setup(&spec, &config.solver)?;
    print_hypotheses(out, &hypotheses);
    say(out, format_args!("Λ₁ = {:.6}", hypotheses.lambda_1));
    match setup {
        Some(s) => {
            print_constants(out, &s.constants);
            Ok(())
        }
        None => Err(failed_hypotheses(&hypotheses)),
    }
}

fn write_solve_artifacts(
    dir: &Path,
    config: &RunConfig,
    spec: &ProblemSpec,
    result: &Result<SolveReport, multibump::Error>,
) -> Result<(), CliError> {
    match result {
        Ok(report) => {
            if config.output.wants(Format::Csv) {
                output::write(
                    &dir.join("solution.csv"),
                    &output::solution_csv(spec, &report.solution),
                )?;
            }
            if config.output.wants(Format::Json) {
                output::write(&dir.join("report.json"), &output::json(report))?;
            }
        }
        Err(e) => {
            output::write(
                &dir.join("report.json"),
                &output::json(&FailureReport::new(spec, e)),
            )?;
        }
    }
    Ok(())
}

pub fn cmd_solve(path: &Path, overrides: &Overrides, out: &mut dyn Write) -> Result<(), CliError> {
    let config = RunConfig::load(path)?;
    let mu = overrides
        .mu
        .unwrap_or(*config.parameters.mu.last().expect("validated non-empty"));
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(CliError::Usage(format!("--mu {mu} must be finite and ≥ 0")));
    }
    let spec = config
        .problem()?
        .with_mu(mu)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let opts = overrides.options(&config);
    let dir = overrides.directory(&config);
    let (hypotheses, setup) = setup(&spec, &opts)?;
    let Some(setup) = setup else {
        print_hypotheses(out, &hypotheses);
        return Err(failed_hypotheses(&hypotheses));
    };
    let result = minimize_with(&spec, &setup.seed, &setup.constants, &opts);
    write_solve_artifacts(&dir, &config, &spec, &result)?;
    match result {
        Ok(r) => {
            say(
                out,
                format_args!(
                    "mu {mu}: energy {:.10e}, gradient {:.3e}, {} iterations{}",
                    r.energy,
                    r.grad_norm,
                    r.iterations,
                    if r.mu == 0.0 { " (penalty off)" } else { "" }
                ),
            );
            if r.converged {
                Ok(())
            } else {
                Err(CliError::Failed(format!(
                    "no convergence within {} iterations",
                    r.iterations
                )))
            }
        }
        Err(e) => Err(numeric(e)),
    }
}

#[derive(Debug, Serialize)]
struct LimitSummary {
    nodal_energy: f64,
    positive_energy: f64,
    combined_energy: f64,
    nodal_converged: bool,
    positive_converged: bool,
}

#[derive(Debug, Serialize)]
struct SweepFailure {
    index: usize,
    mu: f64,
    error: String,
}

#[derive(Debug, Serialize)]
struct SweepSummary {
    mu: Vec<f64>,
    limit: Option<LimitSummary>,
    rows: Vec<GapRow>,
    failures: Vec<SweepFailure>,
}

fn mu_directory(dir: &Path, mu: f64) -> PathBuf {
    dir.join(format!("mu_{mu}"))
}

pub fn cmd_sweep(
    path: &Path,
    overrides: &Overrides,
    limit_only: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let config = RunConfig::load(path)?;
    let spec = config.problem()?;
    let opts = overrides.options(&config);
    let dir = overrides.directory(&config);
    if limit_only {
        let limit = solve_limit_problems(&spec, &opts).map_err(numeric)?;
        output::write(&dir.join("limit.json"), &output::json(&limit))?;
        say(
            out,
            format_args!(
                "limit energies: nodal {:.10e}, positive {:.10e}",
                limit.nodal.energy, limit.positive.energy
            ),
        );
        return Ok(());
    }
    let mus = &config.parameters.mu;
    if mus.len() < 2 {
        return Err(CliError::Usage("sweep needs ≥ 2 values".into()));
    }
    let (sweep, limit): (
        (Vec<SolveReport>, Option<multibump::Error>),
        Result<LimitResult, multibump::Error>,
    ) = par::join(
        || mu_sweep_partial(&spec, mus, &opts),
        || solve_limit_problems(&spec, &opts),
    );
    let (reports, sweep_error) = sweep;
    if matches!(sweep_error, Some(multibump::Error::InvalidParameter(_))) {
        return Err(CliError::Usage(sweep_error.unwrap().to_string()));
    }

    for report in &reports {
        let s = spec.with_mu(report.mu).map_err(numeric)?;
        write_solve_artifacts(
            &mu_directory(&dir, report.mu),
            &config,
            &s,
            &Ok(report.clone()),
        )?;
    }
    let mut failures = Vec::new();
    if let Some(e) = &sweep_error {
        let (index, mu) = match e {
            multibump::Error::Sweep { index, mu, .. } => (*index, *mu),
            _ => (reports.len(), mus[reports.len()]),
        };
        let s = spec.with_mu(mu).map_err(numeric)?;
        write_solve_artifacts(&mu_directory(&dir, mu), &config, &s, &Err(e.clone()))?;
        failures.push(SweepFailure {
            index,
            mu,
            error: e.to_string(),
        });
    }
    let rows = match &limit {
        Ok(l) => concentration_gap(&spec, &reports, l).map_err(numeric)?,
        Err(e) => {
            failures.push(SweepFailure {
                index: mus.len(),
                mu: 0.0,
                error: format!("limit problems: {e}"),
            });
            Vec::new()
        }
    };
    let summary = SweepSummary {
        mu: mus.clone(),
        limit: limit.as_ref().ok().map(|l| LimitSummary {
            nodal_energy: l.nodal.energy,
            positive_energy: l.positive.energy,
            combined_energy: l.combined_energy(),
            nodal_converged: l.nodal.converged,
            positive_converged: l.positive.converged,
        }),
        rows,
        failures,
    };
    output::write(&dir.join("sweep.json"), &output::json(&summary))?;
    for row in &summary.rows {
        say(
            out,
            format_args!(
                "mu {:<10} gap {:.6e}  off-support {:.6e}  distance {:.6e}",
                row.mu, row.energy_gap, row.off_support, row.distance
            ),
        );
    }
    let unconverged: Vec<f64> = reports
        .iter()
        .filter(|r| !r.converged)
        .map(|r| r.mu)
        .collect();
    if let Some(f) = summary.failures.first() {
        return Err(CliError::Failed(f.error.clone()));
    }
    if !unconverged.is_empty() {
        return Err(CliError::Failed(format!(
            "no convergence at mu {unconverged:?}"
        )));
    }
    Ok(())
}
