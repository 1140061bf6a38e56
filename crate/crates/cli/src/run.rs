//! Dispatch of a resolved [`RunConfig`] to the core library.

use nlspec_core::quotient::lambda_p0p1;
use nlspec_core::relations::{run_suite, SuiteParams};
use nlspec_core::scaling::ray_scan;
use nlspec_core::solver::{lambda_sweep, solve_tagged};
use nlspec_core::{GridFunction, QuotientProblem};

use crate::config::{Command, RunConfig};
use crate::record::{OperatorReport, Payload};
use crate::CliError;

/// Result payload and whether every required computation converged.
pub struct Outcome {
    pub payload: Payload,
    pub converged: bool,
    pub note: Option<String>,
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mesh = cfg.mesh()?;
    match cfg.command {
        Command::Eig => {
            let (f, g) = cfg.operators()?;
            let problem = QuotientProblem::new(f, g, mesh)?;
            let res = problem.minimize(&cfg.minimize)?;
            let ok = res.converged;
            Ok(Outcome {
                note: (!ok).then(|| format!("minimization stopped at stationarity {:e}", res.stationarity)),
                payload: Payload::Eigen(res),
                converged: ok,
            })
        }
        Command::Scan => {
            let (f, g) = cfg.operators()?;
            let problem = QuotientProblem::new(f, g, mesh)?;
            let u0 = GridFunction::ground_state(mesh);
            let report = ray_scan(&problem, &u0, &cfg.radii)?;
            Ok(Outcome {
                payload: Payload::Scan(report),
                converged: true,
                note: None,
            })
        }
        Command::Verify => {
            let mut params = SuiteParams::new(mesh, cfg.minimize.clone());
            params.p = cfg.p;
            params.p0 = cfg.p0;
            params.p1 = cfg.p1;
            let reports = run_suite(cfg.suite(), &params)?;
            let stalled: Vec<&str> = reports
                .iter()
                .filter(|r| !r.converged)
                .map(|r| r.name.as_str())
                .collect();
            Ok(Outcome {
                converged: stalled.is_empty(),
                note: (!stalled.is_empty()).then(|| format!("not converged: {}", stalled.join(", "))),
                payload: Payload::Relations(reports),
            })
        }
        Command::Solve => {
            let (p0, p1) = cfg.solve_exponents()?;
            let rhs = cfg.rhs();
            let h = rhs.build(mesh);
            let tag = rhs.tag();
            if let Some(lambda) = cfg.lambda {
                let rep = solve_tagged(p0, p1, lambda, &h, &tag, &cfg.solve)?;
                let ok = rep.converged;
                return Ok(Outcome {
                    note: (!ok).then(|| format!("residual {:e} above tolerance", rep.residual)),
                    payload: Payload::Solve(rep),
                    converged: ok,
                });
            }
            let disc = lambda_p0p1(p0, p1, mesh, &cfg.minimize)?.lambda_power;
            let lambdas: Vec<f64> = match (&cfg.lambdas, &cfg.fractions) {
                (Some(l), _) => l.clone(),
                (None, Some(fr)) => fr.iter().map(|f| f * disc).collect(),
                (None, None) => [0.0, 0.25, 0.5, 0.75].iter().map(|f| f * disc).collect(),
            };
            let table = lambda_sweep(p0, p1, &lambdas, &h, &tag, Some(disc), &cfg.solve, &cfg.minimize)?;
            let ok = table.metadata.required_ok;
            Ok(Outcome {
                note: (!ok).then(|| "a sweep row below the eigenvalue margin did not converge".to_string()),
                payload: Payload::Sweep(table),
                converged: ok,
            })
        }
        Command::Report => {
            let (f, g) = cfg.operators()?;
            Ok(Outcome {
                payload: Payload::Report(OperatorReport::new(&f, &g)),
                converged: true,
                note: None,
            })
        }
    }
}
