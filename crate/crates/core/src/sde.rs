//! Euler-Maruyama simulation of the controlled diffusion under feedback
//! policies, with domain-exit detection and exit-time statistics.
//!
//! Batch operations fan the paths out across workers and reduce in fixed
//! path-index order; path `i` always draws from stream `i` of the seeded
//! generator, so results are bit-identical for a fixed seed regardless of
//! worker count, and common random numbers across policies come for free.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use std::sync::Arc;

use crate::control::{ProblemSpec, Variant};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::sqrt_spd;
use crate::parallel::map_indexed;

/// Per-step drift displacement cap: `||b|| dt <= C_CLIP sqrt(dt) / delta`.
/// Keeps the explicit scheme stable when the drift is only L_d-dominated
/// and may blow up; every clip event is counted and reported.
pub const C_CLIP: f64 = 10.0;

/// Control indices over a grid (nearest-node lookup).
#[derive(Debug, Clone)]
pub struct PolicyGrid {
    pub grid: Arc<Grid>,
    pub indices: Vec<u16>,
}

impl PolicyGrid {
    pub fn constant(grid: Arc<Grid>, index: u16) -> PolicyGrid {
        let n = grid.len();
        PolicyGrid { grid, indices: vec![index; n] }
    }

    pub fn lookup(&self, x: &[f64]) -> usize {
        self.indices[self.grid.nearest_node(x)] as usize
    }
}

/// A feedback control rule: constant, stationary grid, or one grid per time
/// step (finite-horizon problems).
#[derive(Debug, Clone)]
pub enum FeedbackPolicy {
    Constant(usize),
    Grid(PolicyGrid),
    TimeVarying(Vec<PolicyGrid>),
}

impl FeedbackPolicy {
    /// Control index used at state `x` during step `k`.
    pub fn control_at(&self, k: usize, x: &[f64]) -> usize {
        match self {
            FeedbackPolicy::Constant(i) => *i,
            FeedbackPolicy::Grid(pg) => pg.lookup(x),
            FeedbackPolicy::TimeVarying(list) => {
                let idx = k.min(list.len().saturating_sub(1));
                list[idx].lookup(x)
            }
        }
    }

    /// Check every stored index against the control-set size.
    pub fn validate(&self, n_controls: usize) -> Result<()> {
        let check_grid = |pg: &PolicyGrid| -> Result<()> {
            if pg.indices.iter().any(|&i| (i as usize) >= n_controls) {
                return Err(Error::Data(format!(
                    "policy grid holds control index >= {n_controls}"
                )));
            }
            Ok(())
        };
        match self {
            FeedbackPolicy::Constant(i) => {
                if *i >= n_controls {
                    return Err(Error::Data(format!(
                        "constant policy index {i} out of range (K = {n_controls})"
                    )));
                }
                Ok(())
            }
            FeedbackPolicy::Grid(pg) => check_grid(pg),
            FeedbackPolicy::TimeVarying(list) => {
                for pg in list {
                    check_grid(pg)?;
                }
                Ok(())
            }
        }
    }
}

/// One simulated trajectory with exit data.
#[derive(Debug, Clone)]
pub struct PathSample {
    pub dt: f64,
    /// States at step times, flattened `(n_states, d)`; the last state is
    /// the (projected) exit point for exited paths.
    pub states: Vec<f64>,
    pub dim: usize,
    pub controls: Vec<u16>,
    pub exited: bool,
    /// Exit time, linearly interpolated within the crossing step.
    pub exit_time: f64,
    pub running_cost: f64,
    pub discounted_cost: f64,
    pub clip_events: usize,
    pub truncated: bool,
}

impl PathSample {
    pub fn n_states(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    /// `t,x1..xd,control_index` rows.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        let header: Vec<String> = (1..=self.dim).map(|i| format!("x{i}")).collect();
        writeln!(w, "t,{},control_index", header.join(","))?;
        for k in 0..self.n_states() {
            let t = if self.exited && k == self.n_states() - 1 {
                self.exit_time
            } else {
                k as f64 * self.dt
            };
            write!(w, "{t}")?;
            for v in self.state(k) {
                write!(w, ",{v}")?;
            }
            let c = self.controls.get(k).copied().unwrap_or(0);
            writeln!(w, ",{c}")?;
        }
        Ok(())
    }
}

/// When a simulated path stops.
#[derive(Debug, Clone, Copy)]
pub enum StopRule {
    /// First exit from the elliptic domain.
    Exit,
    /// Fixed time, no exit detection (whole-space runs).
    FixedTime(f64),
    /// Whichever comes first.
    FixedTimeOrExit(f64),
}

/// Reduced outcome of one path, used by the batch estimators.
#[derive(Debug, Clone, Default)]
pub struct PathOutcome {
    pub exit_time: f64,
    pub exited: bool,
    pub truncated: bool,
    pub running_cost: f64,
    pub discounted_cost: f64,
    pub terminal_cost: f64,
    /// Exit point (projected to the boundary) or the state at the stop time.
    pub terminal_state: Vec<f64>,
    pub clip_events: usize,
    pub sup_norm: f64,
    pub steps: usize,
}

struct StepCtx {
    d: usize,
    a: Vec<f64>,
    a_prev: Vec<f64>,
    sqrt_a: Vec<f64>,
    have_sqrt: bool,
    b: Vec<f64>,
    xi: Vec<f64>,
}

impl StepCtx {
    fn new(d: usize) -> StepCtx {
        StepCtx {
            d,
            a: vec![0.0; d * d],
            a_prev: vec![f64::NAN; d * d],
            sqrt_a: vec![0.0; d * d],
            have_sqrt: false,
            b: vec![0.0; d],
            xi: vec![0.0; d],
        }
    }

    fn refresh_sqrt(&mut self) -> Result<()> {
        if self.have_sqrt && self.a == self.a_prev {
            return Ok(());
        }
        sqrt_spd(self.d, &self.a, &mut self.sqrt_a)?;
        self.a_prev.copy_from_slice(&self.a);
        self.have_sqrt = true;
        Ok(())
    }
}

/// RNG for path `i` of a batch: stream `i` of the ChaCha generator seeded by
/// `seed`. Streams are independent, so swapping two path indices permutes
/// outputs without changing any path's content.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

#[allow(clippy::too_many_arguments)]
fn run_path_inner(
    spec: &ProblemSpec,
    policy: &FeedbackPolicy,
    x0: &[f64],
    dt: f64,
    rng: &mut ChaCha12Rng,
    max_steps: usize,
    stop: StopRule,
    negate_noise: bool,
    mut record: Option<&mut PathSample>,
) -> Result<PathOutcome> {
    let field = &spec.field;
    let d = field.dim;
    if dt <= 0.0 {
        return Err(Error::Argument("dt must be positive".into()));
    }
    if x0.len() != d {
        return Err(Error::Argument("x0 dimension mismatch".into()));
    }
    let domain = spec.domain();
    let detect_exit = matches!(stop, StopRule::Exit | StopRule::FixedTimeOrExit(_));
    if detect_exit {
        let dom = domain.ok_or_else(|| {
            Error::Argument("exit detection requires an elliptic problem".into())
        })?;
        let sd0 = dom.signed_distance(x0);
        if sd0 > 1e-12 {
            return Err(Error::Argument(format!(
                "x0 = {x0:?} lies outside the closed domain (signed distance {sd0:.3e})"
            )));
        }
    }
    let fixed_steps = match stop {
        StopRule::Exit => None,
        StopRule::FixedTime(t) | StopRule::FixedTimeOrExit(t) => {
            if t < 0.0 {
                return Err(Error::Argument("stop time must be nonnegative".into()));
            }
            Some((t / dt).round() as usize)
        }
    };
    let rho = match &spec.variant {
        Variant::Discounted { rho } => Some(*rho),
        _ => field.discount,
    };
    let sqrt_dt = dt.sqrt();
    let clip_cap = C_CLIP * sqrt_dt / field.delta;

    let mut ctx = StepCtx::new(d);
    let mut x = x0.to_vec();
    let mut x_new = vec![0.0; d];
    let mut out = PathOutcome::default();
    out.sup_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();

    if let Some(rec) = record.as_deref_mut() {
        rec.states.extend_from_slice(&x);
    }

    // start already on the boundary: exit immediately with zero cost
    if detect_exit {
        let dom = domain.unwrap();
        if dom.signed_distance(&x) >= 0.0 {
            let exit_pt = dom.project_to_boundary(&x);
            out.exited = true;
            out.exit_time = 0.0;
            out.terminal_cost = field.boundary_cost(&exit_pt);
            out.terminal_state = exit_pt;
            if let Some(rec) = record.as_deref_mut() {
                rec.exited = true;
                rec.exit_time = 0.0;
            }
            return Ok(out);
        }
    }

    let mut sd_old = domain.map(|d| d.signed_distance(&x)).unwrap_or(f64::NEG_INFINITY);
    let mut step = 0usize;
    loop {
        if let Some(n) = fixed_steps {
            if step >= n {
                break;
            }
        }
        if step >= max_steps {
            out.truncated = true;
            if let Some(rec) = record.as_deref_mut() {
                rec.truncated = true;
            }
            break;
        }
        let control = policy.control_at(step, &x);
        if let Some(rec) = record.as_deref_mut() {
            rec.controls.push(control as u16);
        }
        let t_left = step as f64 * dt;

        // left-endpoint cost accumulation; the discount factor is
        // integrated exactly over the step so the gamma/rho bound survives
        // discretization
        let g = field.running_cost(control, &x);
        out.running_cost += g * dt;
        if let Some(r) = rho {
            out.discounted_cost +=
                g * ((-r * t_left).exp() - (-r * (t_left + dt)).exp()) / r;
        }

        field.drift_into(control, &x, &mut ctx.b);
        field.diffusion_into(control, &x, &mut ctx.a);
        ctx.refresh_sqrt()?;

        // drift displacement with clipping
        let mut disp_norm = 0.0;
        for i in 0..d {
            let v = ctx.b[i] * dt;
            disp_norm += v * v;
        }
        let disp_norm = disp_norm.sqrt();
        let scale = if disp_norm > clip_cap {
            out.clip_events += 1;
            clip_cap / disp_norm
        } else {
            1.0
        };

        for i in 0..d {
            let mut xi: f64 = StandardNormal.sample(rng);
            if negate_noise {
                xi = -xi;
            }
            ctx.xi[i] = xi;
        }
        for i in 0..d {
            let mut diff = 0.0;
            for j in 0..d {
                diff += ctx.sqrt_a[i * d + j] * ctx.xi[j];
            }
            x_new[i] = x[i] + ctx.b[i] * dt * scale + sqrt_dt * diff;
        }
        step += 1;

        if detect_exit {
            let dom = domain.unwrap();
            let sd_new = dom.signed_distance(&x_new);
            if sd_new >= 0.0 {
                // linear interpolation of the crossing, then one projection;
                // sd_old < 0 <= sd_new, so the denominator is positive
                let theta = ((-sd_old) / (sd_new - sd_old)).clamp(0.0, 1.0);
                let tau = (step as f64 - 1.0 + theta) * dt;
                let mut exit_pt = vec![0.0; d];
                for i in 0..d {
                    exit_pt[i] = x[i] + theta * (x_new[i] - x[i]);
                }
                let exit_pt = dom.project_to_boundary(&exit_pt);
                // correct the last cost increment to the partial step
                out.running_cost -= g * dt * (1.0 - theta);
                if let Some(r) = rho {
                    out.discounted_cost -= g
                        * ((-r * (t_left + theta * dt)).exp() - (-r * (t_left + dt)).exp())
                        / r;
                }
                out.exited = true;
                out.exit_time = tau;
                out.terminal_cost = field.boundary_cost(&exit_pt);
                out.steps = step;
                let n: f64 = exit_pt.iter().map(|v| v * v).sum::<f64>().sqrt();
                out.sup_norm = out.sup_norm.max(n);
                if let Some(rec) = record.as_deref_mut() {
                    rec.states.extend_from_slice(&exit_pt);
                    rec.exited = true;
                    rec.exit_time = tau;
                }
                out.terminal_state = exit_pt;
                break;
            }
            sd_old = sd_new;
        }

        x.copy_from_slice(&x_new);
        let n: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        out.sup_norm = out.sup_norm.max(n);
        if let Some(rec) = record.as_deref_mut() {
            rec.states.extend_from_slice(&x);
        }
    }

    if !out.exited {
        out.steps = step;
        out.exit_time = step as f64 * dt;
        out.terminal_state = x.clone();
        if matches!(&spec.variant, Variant::FiniteHorizon { .. }) {
            out.terminal_cost = field.boundary_cost(&x);
        }
    }
    if let Some(rec) = record.as_deref_mut() {
        rec.running_cost = out.running_cost;
        rec.discounted_cost = out.discounted_cost;
        rec.clip_events = out.clip_events;
    }
    Ok(out)
}

/// Simulate one trajectory, recording all states. Fully deterministic given
/// `(seed, dt, policy)`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_path(
    spec: &ProblemSpec,
    policy: &FeedbackPolicy,
    x0: &[f64],
    dt: f64,
    seed: u64,
    max_steps: usize,
) -> Result<PathSample> {
    policy.validate(spec.field.n_controls())?;
    let stop = match &spec.variant {
        Variant::EllipticDirichlet { .. } => StopRule::Exit,
        Variant::FiniteHorizon { horizon } => StopRule::FixedTime(*horizon),
        Variant::Discounted { .. } => StopRule::FixedTime(dt * max_steps as f64),
    };
    let mut sample = PathSample {
        dt,
        states: Vec::new(),
        dim: spec.field.dim,
        controls: Vec::new(),
        exited: false,
        exit_time: 0.0,
        running_cost: 0.0,
        discounted_cost: 0.0,
        clip_events: 0,
        truncated: false,
    };
    let mut rng = path_rng(seed, 0);
    let out = run_path_inner(
        spec, policy, x0, dt, &mut rng, max_steps, stop, false, Some(&mut sample),
    )?;
    sample.running_cost = out.running_cost;
    sample.discounted_cost = out.discounted_cost;
    sample.clip_events = out.clip_events;
    Ok(sample)
}

/// Run a batch of paths (no state recording) and return outcomes in path
/// order.
#[allow(clippy::too_many_arguments)]
pub fn run_batch(
    spec: &ProblemSpec,
    policy: &FeedbackPolicy,
    x0: &[f64],
    dt: f64,
    n_paths: usize,
    seed: u64,
    max_steps: usize,
    stop: StopRule,
    antithetic: bool,
) -> Result<Vec<PathOutcome>> {
    policy.validate(spec.field.n_controls())?;
    let results: Vec<Result<PathOutcome>> = map_indexed(n_paths, |i| {
        let (stream, negate) = if antithetic {
            ((i / 2) as u64, i % 2 == 1)
        } else {
            (i as u64, false)
        };
        let mut rng = path_rng(seed, stream);
        run_path_inner(spec, policy, x0, dt, &mut rng, max_steps, stop, negate, None)
    });
    results.into_iter().collect()
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Exit-time statistics from a batch of paths.
#[derive(Debug, Clone, Serialize)]
pub struct ExitStats {
    pub mean_exit_time: f64,
    pub stderr: f64,
    pub mean_cost: f64,
    pub cost_stderr: f64,
    pub n: usize,
    pub truncated: usize,
    pub truncation_warning: bool,
    pub clip_events: usize,
    /// `(t, P(tau > t))` pairs.
    pub tail: Vec<(f64, f64)>,
}

#[allow(clippy::too_many_arguments)]
pub fn exit_stats(
    spec: &ProblemSpec,
    policy: &FeedbackPolicy,
    x0: &[f64],
    dt: f64,
    n_paths: usize,
    seed: u64,
    max_steps: usize,
    tail_grid: &[f64],
) -> Result<ExitStats> {
    if !spec.is_elliptic() {
        return Err(Error::Argument("exit statistics need an elliptic problem".into()));
    }
    let outcomes = run_batch(spec, policy, x0, dt, n_paths, seed, max_steps, StopRule::Exit, false)?;
    let taus: Vec<f64> = outcomes.iter().map(|o| o.exit_time).collect();
    let costs: Vec<f64> = outcomes
        .iter()
        .map(|o| o.terminal_cost + o.running_cost)
        .collect();
    let truncated = outcomes.iter().filter(|o| o.truncated).count();
    let clip_events = outcomes.iter().map(|o| o.clip_events).sum();
    let (mean_tau, se_tau) = mean_stderr(&taus);
    let (mean_cost, se_cost) = mean_stderr(&costs);
    let tail = tail_grid
        .iter()
        .map(|&t| {
            let count = taus.iter().filter(|&&tau| tau > t).count();
            (t, count as f64 / n_paths as f64)
        })
        .collect();
    Ok(ExitStats {
        mean_exit_time: mean_tau,
        stderr: se_tau,
        mean_cost,
        cost_stderr: se_cost,
        n: n_paths,
        truncated,
        truncation_warning: truncated as f64 > 0.01 * n_paths as f64,
        clip_events,
        tail,
    })
}

/// Empirical `E[exp(nu tau / diam(D)^2)]`.
#[derive(Debug, Clone, Serialize)]
pub struct ExpMomentEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub max_exit_time: f64,
    pub truncated: usize,
    /// Truncated paths make the estimate a lower bound.
    pub lower_bound_only: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn exit_exp_moment(
    spec: &ProblemSpec,
    policy: &FeedbackPolicy,
    x0: &[f64],
    nu: f64,
    n_paths: usize,
    dt: f64,
    seed: u64,
    max_steps: usize,
) -> Result<ExpMomentEstimate> {
    if nu < 0.0 {
        return Err(Error::Argument("exponential-moment rate must be nonnegative".into()));
    }
    if !spec.is_elliptic() {
        return Err(Error::Argument("exit moments need an elliptic problem".into()));
    }
    if nu == 0.0 {
        return Ok(ExpMomentEstimate {
            estimate: 1.0,
            stderr: 0.0,
            max_exit_time: 0.0,
            truncated: 0,
            lower_bound_only: false,
        });
    }
    let diam = spec.domain().unwrap().diameter();
    let outcomes = run_batch(spec, policy, x0, dt, n_paths, seed, max_steps, StopRule::Exit, false)?;
    let vals: Vec<f64> = outcomes
        .iter()
        .map(|o| (nu * o.exit_time / (diam * diam)).exp())
        .collect();
    let truncated = outcomes.iter().filter(|o| o.truncated).count();
    let (mean, se) = mean_stderr(&vals);
    let max_tau = outcomes.iter().map(|o| o.exit_time).fold(0.0f64, f64::max);
    Ok(ExpMomentEstimate {
        estimate: mean,
        stderr: se,
        max_exit_time: max_tau,
        truncated,
        lower_bound_only: truncated > 0,
    })
}

/// JSON batch report shared by the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct BatchReport {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub truncated: usize,
    pub clip_events: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{Domain, ProblemSpec};
    use crate::presets::coefficient_preset;

    fn unit_disk_spec(preset: &str) -> ProblemSpec {
        let field = coefficient_preset(preset, 2).unwrap();
        ProblemSpec::elliptic(preset, field, Domain::ball(vec![0.0, 0.0], 1.0).unwrap()).unwrap()
    }

    #[test]
    fn boundary_start_exits_immediately() {
        let spec = unit_disk_spec("identity");
        let p = FeedbackPolicy::Constant(0);
        let s = simulate_path(&spec, &p, &[1.0, 0.0], 1e-3, 42, 10_000).unwrap();
        assert!(s.exited);
        assert_eq!(s.exit_time, 0.0);
        assert_eq!(s.running_cost, 0.0);
    }

    #[test]
    fn outside_start_is_an_argument_error() {
        let spec = unit_disk_spec("identity");
        let p = FeedbackPolicy::Constant(0);
        assert!(matches!(
            simulate_path(&spec, &p, &[2.0, 0.0], 1e-3, 42, 10).unwrap_err(),
            Error::Argument(_)
        ));
    }

    #[test]
    fn single_step_is_scheme_exact() {
        // b = 0, a = I: X_dt = x0 + sqrt(dt) * xi bitwise
        let field = coefficient_preset("heat", 2).unwrap();
        let spec = ProblemSpec::finite_horizon("heat", field, 1e-3).unwrap();
        let p = FeedbackPolicy::Constant(0);
        let dt = 1e-3;
        let x0 = [0.25, -0.5];
        let s = simulate_path(&spec, &p, &x0, dt, 7, 10).unwrap();
        assert_eq!(s.n_states(), 2);
        // replay the same stream
        let mut rng = path_rng(7, 0);
        let xi0: f64 = StandardNormal.sample(&mut rng);
        let xi1: f64 = StandardNormal.sample(&mut rng);
        let want = [x0[0] + dt.sqrt() * xi0, x0[1] + dt.sqrt() * xi1];
        assert_eq!(s.state(1), &want[..]);
    }

    #[test]
    fn batch_is_deterministic_and_stream_indexed() {
        let spec = unit_disk_spec("identity");
        let p = FeedbackPolicy::Constant(0);
        let a = run_batch(&spec, &p, &[0.2, 0.1], 1e-2, 64, 9, 100_000, StopRule::Exit, false)
            .unwrap();
        let b = run_batch(&spec, &p, &[0.2, 0.1], 1e-2, 64, 9, 100_000, StopRule::Exit, false)
            .unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.exit_time.to_bits(), y.exit_time.to_bits());
            assert_eq!(x.running_cost.to_bits(), y.running_cost.to_bits());
        }
        // path i alone reproduces batch entry i
        let mut rng = path_rng(9, 17);
        let solo = run_path_inner(
            &spec,
            &p,
            &[0.2, 0.1],
            1e-2,
            &mut rng,
            100_000,
            StopRule::Exit,
            false,
            None,
        )
        .unwrap();
        assert_eq!(solo.exit_time.to_bits(), a[17].exit_time.to_bits());
    }

    #[test]
    fn mean_exit_time_matches_poisson_oracle() {
        // E[tau] = (R^2 - ||x||^2) / d for B_R, b = 0, a = I
        let spec = unit_disk_spec("identity");
        let p = FeedbackPolicy::Constant(0);
        let st =
            exit_stats(&spec, &p, &[0.0, 0.0], 1e-3, 4000, 11, 1_000_000, &[0.25, 0.5, 1.0])
                .unwrap();
        assert_eq!(st.truncated, 0);
        // generous 3 sigma + O(sqrt(dt)) bias allowance
        assert!(
            (st.mean_exit_time - 0.5).abs() < 3.0 * st.stderr + 0.03,
            "mean {} stderr {}",
            st.mean_exit_time,
            st.stderr
        );
        let st2 =
            exit_stats(&spec, &p, &[0.8, 0.0], 1e-3, 4000, 12, 1_000_000, &[0.25]).unwrap();
        assert!(
            (st2.mean_exit_time - 0.18).abs() < 3.0 * st2.stderr + 0.03,
            "mean {}",
            st2.mean_exit_time
        );
    }

    #[test]
    fn exit_times_scale_quadratically_in_radius() {
        let field = coefficient_preset("identity", 2).unwrap();
        let p = FeedbackPolicy::Constant(0);
        let mut radii = Vec::new();
        let mut means = Vec::new();
        for (k, r) in [0.5f64, 1.0, 2.0].iter().enumerate() {
            let spec = ProblemSpec::elliptic(
                "scale",
                field.clone(),
                Domain::ball(vec![0.0, 0.0], *r).unwrap(),
            )
            .unwrap();
            let st = exit_stats(
                &spec,
                &p,
                &[0.0, 0.0],
                2e-4 * r * r,
                4000,
                100 + k as u64,
                10_000_000,
                &[],
            )
            .unwrap();
            radii.push(*r);
            means.push(st.mean_exit_time);
        }
        let (slope, _c, r2) = crate::numeric::power_law_fit(&radii, &means);
        assert!((slope - 2.0).abs() < 0.05, "slope {slope}");
        assert!(r2 > 0.999);
    }

    #[test]
    fn exp_moment_zero_rate_is_one() {
        let spec = unit_disk_spec("identity");
        let p = FeedbackPolicy::Constant(0);
        let m = exit_exp_moment(&spec, &p, &[0.0, 0.0], 0.0, 10, 1e-2, 5, 1000).unwrap();
        assert_eq!(m.estimate, 1.0);
        assert_eq!(m.stderr, 0.0);
    }

    #[test]
    fn clipping_is_inactive_for_bounded_drift() {
        let spec = unit_disk_spec("two_drift");
        let p = FeedbackPolicy::Constant(1);
        let st = exit_stats(&spec, &p, &[0.0, 0.0], 1e-3, 200, 3, 100_000, &[]).unwrap();
        assert_eq!(st.clip_events, 0);
    }

    #[test]
    fn policy_validation_catches_bad_indices() {
        let spec = unit_disk_spec("identity");
        assert!(FeedbackPolicy::Constant(1).validate(spec.field.n_controls()).is_err());
        assert!(FeedbackPolicy::Constant(0).validate(spec.field.n_controls()).is_ok());
    }

    #[test]
    fn antithetic_pairs_share_streams() {
        let field = coefficient_preset("heat", 2).unwrap();
        let spec = ProblemSpec::finite_horizon("heat", field, 0.01).unwrap();
        let p = FeedbackPolicy::Constant(0);
        let out = run_batch(
            &spec,
            &p,
            &[0.0, 0.0],
            1e-2,
            2,
            21,
            100,
            StopRule::FixedTime(0.01),
            true,
        )
        .unwrap();
        // one step from the origin with negated noise: exact mirror images
        assert!(out[0].sup_norm > 0.0);
        assert_eq!(out[0].sup_norm.to_bits(), out[1].sup_norm.to_bits());
    }
}
