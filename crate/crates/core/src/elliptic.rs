//! Finite-difference solution of the HJB Dirichlet problem by policy
//! iteration, plus discounted-resolvent solves.
//!
//! The generator is discretized with the Kushner-Dupuis splitting: central
//! second differences on the axes, sign-dependent corner stencils for the
//! cross derivatives, and first-order upwind differences for the drift.
//! Off-diagonal weights are nonnegative where the diagonal-dominance
//! condition `a_ii - sum_{j != i} |a_ij| >= 0` holds; where it fails the
//! solver proceeds but counts the violation per node. Boundary arms are cut
//! at the signed-distance crossing and take the Dirichlet value there
//! (first-order boundary fitting). Nodes where the drift dominator makes
//! central differencing unstable (`dominator * h / delta > 1`) drop the
//! cross terms and are counted as drift-dominated.

use std::sync::Arc;

use serde::Serialize;

use crate::control::{Domain, ProblemSpec, Variant};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction, NodeClass};
use crate::parallel::map_indexed;
use crate::sde::PolicyGrid;

/// Shortley-Weller arms shorter than this fraction of `h` are clamped.
const THETA_MIN: f64 = 1e-3;

/// One interior-node row of the discretized generator `L`:
/// `(L u)(x) ~ diag * u(x) + sum entries w * u(nbr) + boundary_const`.
#[derive(Debug, Clone)]
pub struct GeneratorRow {
    /// Flat grid index of the interior node.
    pub node: usize,
    pub diag: f64,
    /// `(flat neighbor index, weight)`; boundary neighbors keep their pinned
    /// Dirichlet value during sweeps.
    pub entries: Vec<(usize, f64)>,
    /// Contributions of Dirichlet values at non-node boundary crossings.
    pub boundary_const: f64,
    pub positivity_violation: bool,
    pub drift_dominated: bool,
}

impl GeneratorRow {
    #[inline]
    pub fn apply(&self, u: &[f64]) -> f64 {
        let mut acc = self.diag * u[self.node] + self.boundary_const;
        for &(j, w) in &self.entries {
            acc += w * u[j];
        }
        acc
    }
}

/// How the lattice closes the problem at the grid-box edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Closure {
    /// Dirichlet data on the domain boundary (bounded domains).
    Dirichlet,
    /// Copy-node homogeneous Neumann closure at the box edge (whole space).
    CopyNode,
}

fn bisect_crossing(domain: &Domain, x: &[f64], axis: usize, step: f64) -> f64 {
    // signed distance is < 0 at x and >= 0 at x + step e_axis
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut probe = x.to_vec();
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        probe[axis] = x[axis] + mid * step;
        if domain.signed_distance(&probe) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Discretize the generator for one frozen control over the grid's interior
/// nodes. Rows come back in ascending interior order.
pub fn discretize_generator(
    spec: &ProblemSpec,
    control: usize,
    grid: &Grid,
    closure: Closure,
) -> Result<Vec<GeneratorRow>> {
    let field = &spec.field;
    let d = field.dim;
    let h = grid.h;
    let rows: Vec<Result<GeneratorRow>> = map_indexed(grid.interior.len(), |pos| {
        let flat = grid.interior[pos];
        let mut x = vec![0.0; d];
        grid.node_coords(flat, &mut x);
        let mut a = vec![0.0; d * d];
        let mut b = vec![0.0; d];
        field.diffusion_into(control, &x, &mut a);
        field.drift_into(control, &x, &mut b);
        for i in 0..d {
            for j in (i + 1)..d {
                if (a[i * d + j] - a[j * d + i]).abs() > 1e-10 {
                    return Err(Error::Data(format!(
                        "diffusion matrix asymmetric at node {flat} (control {control})"
                    )));
                }
            }
        }
        let drift_dominated = field.dominator(&x) * h / field.delta > 1.0;

        let mut diag = 0.0f64;
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(2 * d + d * (d - 1));
        let mut boundary_const = 0.0f64;
        let mut violation = false;

        // resolve a lattice offset: entry on the target node, or (copy
        // closure) fold arms leaving the box onto the node itself
        let push = |steps: &[isize], w: f64, diag: &mut f64, entries: &mut Vec<(usize, f64)>| {
            match closure {
                Closure::CopyNode => {
                    let mut idx = grid.multi_index(flat);
                    for (axis, &s) in steps.iter().enumerate() {
                        let v =
                            (idx[axis] as isize + s).clamp(0, grid.shape[axis] as isize - 1);
                        idx[axis] = v as usize;
                    }
                    let target = grid.flat_index(&idx);
                    if target == flat {
                        *diag += w;
                    } else {
                        entries.push((target, w));
                    }
                }
                Closure::Dirichlet => {
                    let target = grid.offset(flat, steps).expect("boundary ring enforced");
                    entries.push((target, w));
                }
            }
        };

        // cross-derivative corner stencils
        if !drift_dominated {
            for i in 0..d {
                for j in (i + 1)..d {
                    let aij = a[i * d + j];
                    if aij == 0.0 {
                        continue;
                    }
                    let w = aij.abs() / (2.0 * h * h);
                    let (s1, s2) = if aij > 0.0 { (1isize, 1isize) } else { (1, -1) };
                    for sign in [1isize, -1] {
                        let mut steps = vec![0isize; d];
                        steps[i] = s1 * sign;
                        steps[j] = s2 * sign;
                        push(&steps, w, &mut diag, &mut entries);
                    }
                    diag -= 2.0 * w;
                }
            }
        }

        // axis second differences with Shortley-Weller boundary arms
        for i in 0..d {
            let mut off_sum = 0.0;
            if !drift_dominated {
                for j in 0..d {
                    if j != i {
                        off_sum += a[i * d + j].abs();
                    }
                }
            }
            let coef = 0.5 * (a[i * d + i] - off_sum);
            if coef < 0.0 {
                violation = true;
            }
            if coef != 0.0 {
                let mut theta = [1.0f64; 2];
                let mut cross_value = [0.0f64; 2];
                let mut cut = [false; 2];
                if closure == Closure::Dirichlet {
                    for (s_idx, s) in [-1isize, 1].iter().enumerate() {
                        let nb = grid.neighbor(flat, i, *s).expect("boundary ring enforced");
                        if grid.class[nb] != NodeClass::Interior {
                            let domain = spec.domain().expect("dirichlet closure needs a domain");
                            let th =
                                bisect_crossing(domain, &x, i, *s as f64 * h).max(THETA_MIN);
                            let mut cp = x.clone();
                            cp[i] = x[i] + th * (*s as f64) * h;
                            let cp = domain.project_to_boundary(&cp);
                            theta[s_idx] = th;
                            cross_value[s_idx] = field.boundary_cost(&cp);
                            cut[s_idx] = true;
                        }
                    }
                }
                let (tm, tp) = (theta[0], theta[1]);
                let wm = 2.0 * coef / (tm * (tm + tp) * h * h);
                let wp = 2.0 * coef / (tp * (tm + tp) * h * h);
                diag -= 2.0 * coef / (tm * tp * h * h);
                for (s_idx, s, w) in [(0usize, -1isize, wm), (1, 1, wp)] {
                    if cut[s_idx] {
                        boundary_const += w * cross_value[s_idx];
                    } else {
                        let mut steps = vec![0isize; d];
                        steps[i] = s;
                        push(&steps, w, &mut diag, &mut entries);
                    }
                }
            }

            // upwind drift
            let bi = b[i];
            if bi != 0.0 {
                let s: isize = if bi > 0.0 { 1 } else { -1 };
                let mag = bi.abs();
                let mut theta_arm = 1.0;
                let mut cut_arm = false;
                let mut cross_val = 0.0;
                if closure == Closure::Dirichlet {
                    let nb = grid.neighbor(flat, i, s).expect("boundary ring enforced");
                    if grid.class[nb] != NodeClass::Interior {
                        let domain = spec.domain().expect("dirichlet closure needs a domain");
                        let th = bisect_crossing(domain, &x, i, s as f64 * h).max(THETA_MIN);
                        let mut cp = x.clone();
                        cp[i] = x[i] + th * (s as f64) * h;
                        let cp = domain.project_to_boundary(&cp);
                        theta_arm = th;
                        cross_val = field.boundary_cost(&cp);
                        cut_arm = true;
                    }
                }
                let w = mag / (theta_arm * h);
                diag -= w;
                if cut_arm {
                    boundary_const += w * cross_val;
                } else {
                    let mut steps = vec![0isize; d];
                    steps[i] = s;
                    push(&steps, w, &mut diag, &mut entries);
                }
            }
        }

        // merge arms that hit the same neighbor (axis diffusion + drift)
        entries.sort_unstable_by_key(|&(j, _)| j);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (j, w) in entries {
            match merged.last_mut() {
                Some((jl, wl)) if *jl == j => *wl += w,
                _ => merged.push((j, w)),
            }
        }

        Ok(GeneratorRow {
            node: flat,
            diag,
            entries: merged,
            boundary_const,
            positivity_violation: violation,
            drift_dominated,
        })
    });
    rows.into_iter().collect()
}

/// Per-control rows and running costs cached for policy iteration.
pub struct OperatorCache {
    pub rows: Vec<Vec<GeneratorRow>>,
    /// `g(control, node)` by `[control][interior position]`.
    pub costs: Vec<Vec<f64>>,
    pub positivity_violations: usize,
    pub drift_dominated: usize,
}

pub fn build_operator_cache(
    spec: &ProblemSpec,
    grid: &Grid,
    closure: Closure,
) -> Result<OperatorCache> {
    let k = spec.field.n_controls();
    let mut rows = Vec::with_capacity(k);
    let mut costs = Vec::with_capacity(k);
    for control in 0..k {
        rows.push(discretize_generator(spec, control, grid, closure)?);
        let cost: Vec<f64> = map_indexed(grid.interior.len(), |pos| {
            let mut x = vec![0.0; spec.field.dim];
            grid.node_coords(grid.interior[pos], &mut x);
            spec.field.running_cost(control, &x)
        });
        costs.push(cost);
    }
    let positivity_violations = rows
        .iter()
        .flat_map(|r| r.iter())
        .filter(|r| r.positivity_violation)
        .count();
    let drift_dominated = rows[0].iter().filter(|r| r.drift_dominated).count();
    Ok(OperatorCache { rows, costs, positivity_violations, drift_dominated })
}

/// Fill boundary-node values with `f` at their signed-distance projections.
pub fn dirichlet_fill(spec: &ProblemSpec, grid: &Grid) -> Result<Vec<f64>> {
    let domain = spec
        .domain()
        .ok_or_else(|| Error::Argument("Dirichlet fill needs an elliptic problem".into()))?;
    let d = grid.dim;
    let values: Vec<f64> = map_indexed(grid.len(), |flat| {
        if grid.class[flat] == NodeClass::Boundary {
            let mut x = vec![0.0; d];
            grid.node_coords(flat, &mut x);
            let p = domain.project_to_boundary(&x);
            spec.field.boundary_cost(&p)
        } else {
            0.0
        }
    });
    Ok(values)
}

/// Deterministic SOR statistics.
#[derive(Debug, Clone, Serialize, Default)]
pub struct LinearSolveStats {
    pub sweeps: usize,
    pub final_residual: f64,
    pub omega: f64,
    pub omega_fallbacks: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct SorOptions {
    pub omega: f64,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for SorOptions {
    fn default() -> Self {
        SorOptions { omega: 1.9, tol: 1e-7, max_sweeps: 200_000 }
    }
}

/// Solve `(sigma I - L_pi) u = rhs` in place by SOR with fixed ascending
/// sweep order. `u` is the full grid array (Dirichlet values pre-filled and
/// never updated). If the iteration diverges the relaxation factor falls
/// back toward plain Gauss-Seidel, restarting from the best iterate seen.
pub fn sor_solve(
    rows: &[&GeneratorRow],
    rhs: &[f64],
    sigma: f64,
    u: &mut [f64],
    opts: &SorOptions,
) -> Result<LinearSolveStats> {
    let residual = |u: &[f64]| -> f64 {
        let mut r = 0.0f64;
        for (p, row) in rows.iter().enumerate() {
            let lhs = sigma * u[row.node] - row.apply(u);
            r = r.max((lhs - rhs[p]).abs());
        }
        r
    };
    let mut omega = opts.omega;
    let mut fallbacks = 0usize;
    let mut sweeps_total = 0usize;
    let mut best: Option<(f64, Vec<f64>)> = None;
    'attempt: loop {
        let r0 = residual(u);
        if r0 <= opts.tol {
            return Ok(LinearSolveStats {
                sweeps: sweeps_total,
                final_residual: r0,
                omega,
                omega_fallbacks: fallbacks,
                converged: true,
            });
        }
        loop {
            for (p, row) in rows.iter().enumerate() {
                let denom = sigma - row.diag;
                let mut acc = rhs[p] + row.boundary_const;
                for &(j, w) in &row.entries {
                    acc += w * u[j];
                }
                let unew = acc / denom;
                let old = u[row.node];
                u[row.node] = old + omega * (unew - old);
            }
            sweeps_total += 1;
            let r = residual(u);
            if r <= opts.tol {
                return Ok(LinearSolveStats {
                    sweeps: sweeps_total,
                    final_residual: r,
                    omega,
                    omega_fallbacks: fallbacks,
                    converged: true,
                });
            }
            if !r.is_finite() || r > 10.0 * r0.max(1.0) {
                if omega > 1.0 + 1e-9 {
                    omega = ((omega + 1.0) / 2.0).max(1.0);
                    if omega < 1.05 {
                        omega = 1.0;
                    }
                    fallbacks += 1;
                    if let Some((_, snap)) = &best {
                        u.copy_from_slice(snap);
                    }
                    continue 'attempt;
                }
                return Err(Error::Solver(format!(
                    "SOR diverged at omega = 1 (residual {r:.3e} from {r0:.3e})"
                )));
            }
            if sweeps_total >= opts.max_sweeps {
                return Ok(LinearSolveStats {
                    sweeps: sweeps_total,
                    final_residual: r,
                    omega,
                    omega_fallbacks: fallbacks,
                    converged: false,
                });
            }
            if best.as_ref().map(|(b, _)| r < *b).unwrap_or(true) {
                best = Some((r, u.to_vec()));
            }
        }
    }
}

/// Outcome of an HJB solve.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub solution: GridFunction,
    #[serde(skip)]
    pub policy: PolicyGrid,
    pub iterations: usize,
    /// Sup norm of the discrete HJB residual recomputed after the final
    /// iterate (not the last inner-loop value).
    pub residual: f64,
    pub linear_stats: LinearSolveStats,
    pub positivity_violations: usize,
    pub drift_dominated_nodes: usize,
    pub damping_events: usize,
    pub converged: bool,
    pub policy_counts: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct PolicyIterationOptions {
    pub tol: f64,
    pub max_outer: usize,
    pub sor: SorOptions,
}

impl Default for PolicyIterationOptions {
    fn default() -> Self {
        PolicyIterationOptions { tol: 1e-6, max_outer: 100, sor: SorOptions::default() }
    }
}

/// Pointwise Hamiltonian minimization given the current iterate; ties break
/// to the lowest control index. Returns whether any node changed.
pub(crate) fn improve_policy(cache: &OperatorCache, u: &[f64], policy: &mut [u16]) -> bool {
    let k = cache.rows.len();
    let n = cache.rows[0].len();
    let mut changed = false;
    for p in 0..n {
        let mut best = f64::INFINITY;
        let mut best_k = 0u16;
        for c in 0..k {
            let v = cache.rows[c][p].apply(u) + cache.costs[c][p];
            if v < best {
                best = v;
                best_k = c as u16;
            }
        }
        if policy[p] != best_k {
            policy[p] = best_k;
            changed = true;
        }
    }
    changed
}

/// Sup norm over interior nodes of the discrete HJB residual
/// `sigma u - min_c (L_c u + g_c)`.
pub(crate) fn hjb_residual(cache: &OperatorCache, u: &[f64], sigma: f64) -> f64 {
    let k = cache.rows.len();
    let n = cache.rows[0].len();
    let per_node: Vec<f64> = map_indexed(n, |p| {
        let mut best = f64::INFINITY;
        for c in 0..k {
            let v = cache.rows[c][p].apply(u) + cache.costs[c][p];
            if v < best {
                best = v;
            }
        }
        (sigma * u[cache.rows[0][p].node] - best).abs()
    });
    per_node.into_iter().fold(0.0, f64::max)
}

pub(crate) fn frozen_rows<'a>(cache: &'a OperatorCache, policy: &[u16]) -> Vec<&'a GeneratorRow> {
    policy
        .iter()
        .enumerate()
        .map(|(p, &c)| &cache.rows[c as usize][p])
        .collect()
}

fn frozen_rhs(cache: &OperatorCache, policy: &[u16], sign: f64) -> Vec<f64> {
    policy
        .iter()
        .enumerate()
        .map(|(p, &c)| sign * cache.costs[c as usize][p])
        .collect()
}

fn policy_grid_from(grid: &Arc<Grid>, policy: &[u16]) -> PolicyGrid {
    let mut indices = vec![0u16; grid.len()];
    for (p, &flat) in grid.interior.iter().enumerate() {
        indices[flat] = policy[p];
    }
    PolicyGrid { grid: grid.clone(), indices }
}

fn policy_counts(policy: &[u16], k: usize) -> Vec<usize> {
    let mut counts = vec![0usize; k];
    for &c in policy {
        counts[c as usize] += 1;
    }
    counts
}

fn howard_loop(
    spec: &ProblemSpec,
    grid: &Arc<Grid>,
    cache: &OperatorCache,
    mut u: Vec<f64>,
    sigma: f64,
    rhs_sign: f64,
    opts: &PolicyIterationOptions,
    created_by: &str,
) -> Result<SolveReport> {
    let n = grid.interior.len();
    if n == 0 {
        return Err(Error::Argument("grid has no interior nodes".into()));
    }
    let k = spec.field.n_controls();
    let mut policy = vec![0u16; n];
    let sor_opts = SorOptions {
        omega: opts.sor.omega,
        tol: opts.tol / 10.0,
        max_sweeps: opts.sor.max_sweeps,
    };
    let mut iterations = 0usize;
    let mut damping_events = 0usize;
    let mut linear_stats = LinearSolveStats::default();
    let mut prev_residual = f64::INFINITY;
    let mut converged = false;
    for _outer in 0..opts.max_outer {
        let rows = frozen_rows(cache, &policy);
        let rhs = frozen_rhs(cache, &policy, rhs_sign);
        let u_prev = u.clone();
        linear_stats = sor_solve(&rows, &rhs, sigma, &mut u, &sor_opts)?;
        if !linear_stats.converged {
            return Err(Error::Solver(format!(
                "policy evaluation did not converge in {} sweeps (residual {:.3e})",
                linear_stats.sweeps, linear_stats.final_residual
            )));
        }
        iterations += 1;
        let mut residual = hjb_residual(cache, &u, sigma);
        if residual > prev_residual {
            // monotone damping: halve the update and re-measure
            for &flat in grid.interior.iter() {
                u[flat] = 0.5 * (u[flat] + u_prev[flat]);
            }
            damping_events += 1;
            residual = hjb_residual(cache, &u, sigma);
        }
        prev_residual = residual;
        let update = grid
            .interior
            .iter()
            .map(|&f| (u[f] - u_prev[f]).abs())
            .fold(0.0f64, f64::max);
        let changed = improve_policy(cache, &u, &mut policy);
        if !changed {
            converged = true;
            break;
        }
        if update <= opts.tol && residual <= opts.tol {
            converged = true;
            break;
        }
    }
    let residual = hjb_residual(cache, &u, sigma);
    let mut solution = GridFunction { grid: grid.clone(), values: u, meta: Default::default() };
    solution.meta.created_by = created_by.into();
    Ok(SolveReport {
        solution,
        policy: policy_grid_from(grid, &policy),
        iterations,
        residual,
        linear_stats,
        positivity_violations: cache.positivity_violations,
        drift_dominated_nodes: cache.drift_dominated,
        damping_events,
        converged,
        policy_counts: policy_counts(&policy, k),
    })
}

/// Howard policy iteration for the elliptic Dirichlet problem
/// `-min_c (L_c u + g_c) = 0` in `D`, `u = f` on the boundary.
///
/// Alternates pointwise policy improvement with frozen-policy linear solves
/// (SOR, tolerance slaved to `tol / 10`); terminates when the policy is
/// stable or the sup-norm update and residual drop below `tol`.
pub fn policy_iteration(
    spec: &ProblemSpec,
    grid: &Arc<Grid>,
    opts: &PolicyIterationOptions,
) -> Result<SolveReport> {
    if !spec.is_elliptic() {
        return Err(Error::Argument("policy_iteration needs an elliptic problem".into()));
    }
    let cache = build_operator_cache(spec, grid, Closure::Dirichlet)?;
    let mut u = dirichlet_fill(spec, grid)?;
    // initial fill: mean of the boundary data
    let boundary_nodes: Vec<usize> = (0..grid.len())
        .filter(|&f| grid.class[f] == NodeClass::Boundary)
        .collect();
    let mean_f = if boundary_nodes.is_empty() {
        0.0
    } else {
        boundary_nodes.iter().map(|&b| u[b]).sum::<f64>() / boundary_nodes.len() as f64
    };
    for &flat in grid.interior.iter() {
        u[flat] = mean_f;
    }
    // elliptic: L u + g = 0, i.e. (0 I - L) u = g
    howard_loop(spec, grid, &cache, u, 0.0, 1.0, opts, "policy_iteration")
}

/// Discounted-resolvent report: the solve plus the truncation-domain
/// sensitivity from re-solving on a 25% larger box.
#[derive(Debug, Clone, Serialize)]
pub struct DiscountedReport {
    #[serde(flatten)]
    pub report: SolveReport,
    /// Sup difference on the inner box against the enlarged-box solve.
    pub truncation_sensitivity: f64,
}

/// Policy iteration on `(rho I - L_c) w = g_c` over a truncation box with
/// copy-node Neumann lateral closure.
pub fn solve_discounted(
    spec: &ProblemSpec,
    box_lo: &[f64],
    box_hi: &[f64],
    h: f64,
    opts: &PolicyIterationOptions,
) -> Result<DiscountedReport> {
    let rho = match &spec.variant {
        Variant::Discounted { rho } => *rho,
        _ => return Err(Error::Argument("solve_discounted needs a discounted problem".into())),
    };
    let report = solve_discounted_on_box(spec, rho, box_lo, box_hi, h, opts)?;
    let center: Vec<f64> = box_lo.iter().zip(box_hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let lo2: Vec<f64> = box_lo.iter().zip(&center).map(|(a, c)| c + 1.25 * (a - c)).collect();
    let hi2: Vec<f64> = box_hi.iter().zip(&center).map(|(b, c)| c + 1.25 * (b - c)).collect();
    let enlarged = solve_discounted_on_box(spec, rho, &lo2, &hi2, h, opts)?;
    let mut diff = 0.0f64;
    let mut x = vec![0.0; spec.field.dim];
    for &flat in report.solution.grid.interior.iter() {
        report.solution.grid.node_coords(flat, &mut x);
        let other = enlarged.solution.interpolate(&x);
        diff = diff.max((report.solution.values[flat] - other).abs());
    }
    Ok(DiscountedReport { report, truncation_sensitivity: diff })
}

fn solve_discounted_on_box(
    spec: &ProblemSpec,
    rho: f64,
    box_lo: &[f64],
    box_hi: &[f64],
    h: f64,
    opts: &PolicyIterationOptions,
) -> Result<SolveReport> {
    let grid = Arc::new(Grid::new(
        Domain::WholeSpace { dim: spec.field.dim },
        box_lo,
        box_hi,
        h,
    )?);
    let cache = build_operator_cache(spec, &grid, Closure::CopyNode)?;
    let u = vec![0.0; grid.len()];
    // (rho I - L) w = g
    howard_loop(spec, &grid, &cache, u, rho, 1.0, opts, "solve_discounted")
}

/// One implicit time step `(I/dt - L_pi) u_new = u_old/dt + g_pi` with the
/// frozen policy; used by the parabolic module.
pub(crate) fn implicit_step(
    cache: &OperatorCache,
    policy: &[u16],
    dt: f64,
    u: &mut [f64],
    sor_opts: &SorOptions,
) -> Result<LinearSolveStats> {
    let rows = frozen_rows(cache, policy);
    let mut rhs = Vec::with_capacity(rows.len());
    for (p, &c) in policy.iter().enumerate() {
        rhs.push(u[rows[p].node] / dt + cache.costs[c as usize][p]);
    }
    sor_solve(&rows, &rhs, 1.0 / dt, u, sor_opts)
}
