//! Monte Carlo estimators of the elliptic, finite-horizon and discounted
//! value functions over finite policy families, and the dynamic-programming
//! checker that reconciles them with the PDE solutions.
//!
//! All estimators use common random numbers across policies (path `i` draws
//! from stream `i` for every policy), so the per-policy table is comparable
//! and the minimum is stable under family enlargement.

use serde::Serialize;

use crate::control::{Domain, ProblemSpec, Variant};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::sde::{run_batch, FeedbackPolicy, StopRule};

#[derive(Debug, Clone, Serialize)]
pub struct PolicyEstimate {
    pub policy_id: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub truncated: usize,
}

/// Value estimate over a finite policy family: the minimum of the per-policy
/// table and the policy attaining it.
#[derive(Debug, Clone, Serialize)]
pub struct ValueEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub table: Vec<PolicyEstimate>,
    pub argmin: usize,
    /// Some paths hit the step cap; the minimum is still reported but
    /// carries this caveat.
    pub truncation_caveat: bool,
    /// Discounted estimators add the horizon-cut tail bound here.
    pub tail_bound: f64,
}

impl ValueEstimate {
    fn from_table(table: Vec<PolicyEstimate>, n_paths: usize, tail_bound: f64) -> ValueEstimate {
        let mut argmin = 0;
        let mut best = f64::INFINITY;
        for (i, row) in table.iter().enumerate() {
            if row.estimate < best {
                best = row.estimate;
                argmin = i;
            }
        }
        let caveat = table.iter().any(|r| r.truncated > 0);
        ValueEstimate {
            value: best,
            stderr: table[argmin].stderr,
            n_paths,
            table,
            argmin,
            truncation_caveat: caveat,
            tail_bound,
        }
    }

    /// `policy_id,estimate,stderr` rows.
    pub fn write_table_csv(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "policy_id,estimate,stderr")?;
        for row in &self.table {
            writeln!(w, "{},{},{}", row.policy_id, row.estimate, row.stderr)?;
        }
        Ok(())
    }
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[allow(clippy::too_many_arguments)]
fn estimate_per_policy(
    spec: &ProblemSpec,
    policies: &[FeedbackPolicy],
    x0: &[f64],
    dt: f64,
    n_paths: usize,
    seed: u64,
    max_steps: usize,
    stop: StopRule,
    antithetic: bool,
    cost_of: impl Fn(&crate::sde::PathOutcome) -> f64,
) -> Result<Vec<PolicyEstimate>> {
    if policies.is_empty() {
        return Err(Error::Argument("policy family must be non-empty".into()));
    }
    let mut table = Vec::with_capacity(policies.len());
    for (id, policy) in policies.iter().enumerate() {
        let outcomes =
            run_batch(spec, policy, x0, dt, n_paths, seed, max_steps, stop, antithetic)?;
        let costs: Vec<f64> = outcomes.iter().map(&cost_of).collect();
        let truncated = outcomes.iter().filter(|o| o.truncated).count();
        let (mean, se) = mean_stderr(&costs);
        table.push(PolicyEstimate { policy_id: id, estimate: mean, stderr: se, truncated });
    }
    Ok(table)
}

/// Estimate `inf_pi E[f(X_tau) + int_0^tau g]` on the elliptic problem.
#[allow(clippy::too_many_arguments)]
pub fn value_elliptic_mc(
    spec: &ProblemSpec,
    policies: &[FeedbackPolicy],
    x0: &[f64],
    dt: f64,
    n_paths: usize,
    seed: u64,
    max_steps: usize,
    antithetic: bool,
) -> Result<ValueEstimate> {
    if !spec.is_elliptic() {
        return Err(Error::Argument("value_elliptic_mc needs an elliptic problem".into()));
    }
    let table = estimate_per_policy(
        spec,
        policies,
        x0,
        dt,
        n_paths,
        seed,
        max_steps,
        StopRule::Exit,
        antithetic,
        |o| o.terminal_cost + o.running_cost,
    )?;
    Ok(ValueEstimate::from_table(table, n_paths, 0.0))
}

/// Estimate `inf_pi E[f(X_t) + int_0^t g]` on the finite-horizon problem.
#[allow(clippy::too_many_arguments)]
pub fn value_parabolic_mc(
    spec: &ProblemSpec,
    policies: &[FeedbackPolicy],
    t: f64,
    x0: &[f64],
    dt: f64,
    n_paths: usize,
    seed: u64,
    antithetic: bool,
) -> Result<ValueEstimate> {
    let horizon = match &spec.variant {
        Variant::FiniteHorizon { horizon } => *horizon,
        _ => {
            return Err(Error::Argument(
                "value_parabolic_mc needs a finite-horizon problem".into(),
            ))
        }
    };
    if !(0.0..=horizon).contains(&t) {
        return Err(Error::Argument(format!("time {t} outside [0, {horizon}]")));
    }
    if policies.is_empty() {
        return Err(Error::Argument("policy family must be non-empty".into()));
    }
    if t == 0.0 {
        // S_0 is the identity: f(x0) with zero variance
        let v = spec.field.boundary_cost(x0);
        let table = policies
            .iter()
            .enumerate()
            .map(|(id, _)| PolicyEstimate { policy_id: id, estimate: v, stderr: 0.0, truncated: 0 })
            .collect();
        return Ok(ValueEstimate::from_table(table, n_paths, 0.0));
    }
    let max_steps = (t / dt).round() as usize + 1;
    let table = estimate_per_policy(
        spec,
        policies,
        x0,
        dt,
        n_paths,
        seed,
        max_steps,
        StopRule::FixedTime(t),
        antithetic,
        |o| spec.field.boundary_cost(&o.terminal_state) + o.running_cost,
    )?;
    Ok(ValueEstimate::from_table(table, n_paths, 0.0))
}

/// Estimate `inf_pi E[int_0^inf e^{-rho s} g ds]`, cut at `horizon_cut`.
/// The truncated tail is bounded by `e^{-rho cut} ||g||_inf / rho` and is
/// reported with the estimate; the cut must make it smaller than `tail_tol`.
#[allow(clippy::too_many_arguments)]
pub fn value_discounted_mc(
    spec: &ProblemSpec,
    policies: &[FeedbackPolicy],
    x0: &[f64],
    dt: f64,
    n_paths: usize,
    horizon_cut: f64,
    tail_tol: f64,
    seed: u64,
) -> Result<ValueEstimate> {
    let rho = match &spec.variant {
        Variant::Discounted { rho } => *rho,
        _ => {
            return Err(Error::Argument(
                "value_discounted_mc needs a discounted problem".into(),
            ))
        }
    };
    let tail_bound = (-rho * horizon_cut).exp() * spec.field.g_bound / rho;
    if tail_bound > tail_tol {
        return Err(Error::Argument(format!(
            "horizon cut {horizon_cut} leaves tail bound {tail_bound:.3e} > {tail_tol:.3e}"
        )));
    }
    let max_steps = (horizon_cut / dt).round() as usize;
    let table = estimate_per_policy(
        spec,
        policies,
        x0,
        dt,
        n_paths,
        seed,
        max_steps,
        StopRule::FixedTime(horizon_cut),
        false,
        |o| o.discounted_cost,
    )?;
    Ok(ValueEstimate::from_table(table, n_paths, tail_bound))
}

/// Intermediate stopping rule for the dynamic-programming check.
#[derive(Debug, Clone)]
pub enum DppIntermediate {
    /// `rho = min(s, tau_D)`.
    FixedTime(f64),
    /// First exit from a subdomain strictly inside `D`.
    SubdomainExit(Domain),
}

#[derive(Debug, Clone, Serialize)]
pub struct DppReport {
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    pub rhs_stderr: f64,
    pub gap: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Check the dynamic programming principle: the direct value estimate at
/// `x0` against `E[v_hat(X_rho) + int_0^rho g]`, where `v_hat` is the PDE
/// solution evaluated by grid interpolation. Passes iff
/// `|lhs - rhs| <= tol + 3 (se_lhs + se_rhs)`.
#[allow(clippy::too_many_arguments)]
pub fn check_dpp(
    spec: &ProblemSpec,
    x0: &[f64],
    intermediate: DppIntermediate,
    policies: &[FeedbackPolicy],
    v_hat: Option<&GridFunction>,
    dt: f64,
    n_paths: usize,
    seed: u64,
    max_steps: usize,
    tol: f64,
) -> Result<DppReport> {
    let v_hat = v_hat.ok_or_else(|| {
        Error::Dependency("check_dpp needs the PDE solution for the intermediate values".into())
    })?;
    if !spec.is_elliptic() {
        return Err(Error::Argument("check_dpp needs an elliptic problem".into()));
    }
    let lhs_est = value_elliptic_mc(spec, policies, x0, dt, n_paths, seed, max_steps, false)?;

    let (rhs, rhs_stderr) = match &intermediate {
        DppIntermediate::FixedTime(s) => {
            if *s < 0.0 {
                return Err(Error::Argument("intermediate time must be nonnegative".into()));
            }
            if *s == 0.0 {
                (v_hat.interpolate(x0), 0.0)
            } else {
                let table = estimate_per_policy(
                    spec,
                    policies,
                    x0,
                    dt,
                    n_paths,
                    seed,
                    max_steps,
                    StopRule::FixedTimeOrExit(*s),
                    false,
                    |o| v_hat.interpolate(&o.terminal_state) + o.running_cost,
                )?;
                let est = ValueEstimate::from_table(table, n_paths, 0.0);
                (est.value, est.stderr)
            }
        }
        DppIntermediate::SubdomainExit(u) => {
            let d_outer = spec.domain().unwrap();
            // U must sit strictly inside D: probe its boundary
            for p in subdomain_boundary_probes(u) {
                if d_outer.signed_distance(&p) >= 0.0 {
                    return Err(Error::Argument(
                        "intermediate subdomain must lie strictly inside the domain".into(),
                    ));
                }
            }
            if u.signed_distance(x0) > 0.0 {
                return Err(Error::Argument(
                    "x0 must lie inside the intermediate subdomain".into(),
                ));
            }
            let spec_u = ProblemSpec::elliptic(
                &format!("{}_subdomain", spec.name),
                spec.field.clone(),
                u.clone(),
            )?;
            let table = estimate_per_policy(
                &spec_u,
                policies,
                x0,
                dt,
                n_paths,
                seed,
                max_steps,
                StopRule::Exit,
                false,
                |o| v_hat.interpolate(&o.terminal_state) + o.running_cost,
            )?;
            let est = ValueEstimate::from_table(table, n_paths, 0.0);
            (est.value, est.stderr)
        }
    };

    let gap = (lhs_est.value - rhs).abs();
    let slack = tol + 3.0 * (lhs_est.stderr + rhs_stderr);
    Ok(DppReport {
        lhs: lhs_est.value,
        lhs_stderr: lhs_est.stderr,
        rhs,
        rhs_stderr,
        gap,
        tol,
        pass: gap <= slack,
    })
}

fn subdomain_boundary_probes(u: &Domain) -> Vec<Vec<f64>> {
    match u {
        Domain::Ball { center, radius } => {
            let d = center.len();
            let mut out = Vec::new();
            for i in 0..d {
                for s in [-1.0, 1.0] {
                    let mut p = center.clone();
                    p[i] += s * radius;
                    out.push(p);
                }
            }
            let diag = radius / (d as f64).sqrt();
            for corner in 0..(1usize << d) {
                let mut p = center.clone();
                for (i, pi) in p.iter_mut().enumerate() {
                    *pi += if (corner >> i) & 1 == 1 { diag } else { -diag };
                }
                out.push(p);
            }
            out
        }
        Domain::Box { lo, hi } => {
            let d = lo.len();
            (0..(1usize << d))
                .map(|corner| {
                    (0..d)
                        .map(|i| if (corner >> i) & 1 == 1 { hi[i] } else { lo[i] })
                        .collect()
                })
                .collect()
        }
        Domain::WholeSpace { .. } => Vec::new(),
    }
}
