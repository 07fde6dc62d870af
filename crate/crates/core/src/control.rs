//! Problem data for the controlled diffusion: control set, coefficient
//! fields, domain geometry, and the Hamiltonian built from them.
//!
//! The control set is a finite discretization of the compact control space;
//! coefficients are pure callables `(lambda, x) -> value` shared across
//! workers. The diffusion matrix must stay in the ellipticity class
//! `S_delta` (eigenvalues in `[delta, 1/delta]`) and the drift must be
//! dominated pointwise by the declared scalar field.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;

/// One admissible control: an opaque label plus its numeric parameters.
#[derive(Debug, Clone)]
pub struct ControlPoint {
    pub label: String,
    pub params: Vec<f64>,
}

/// Finite discretization of the control space.
#[derive(Debug, Clone)]
pub struct ControlSet {
    points: Vec<ControlPoint>,
}

impl ControlSet {
    pub fn new(points: Vec<ControlPoint>) -> Result<ControlSet> {
        if points.is_empty() {
            return Err(Error::Data("control set must be non-empty".into()));
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if points[i].params == points[j].params {
                    return Err(Error::Data(format!(
                        "control points `{}` and `{}` share the same parameter vector",
                        points[i].label, points[j].label
                    )));
                }
            }
        }
        Ok(ControlSet { points })
    }

    /// Single dummy control with an empty parameter vector (uncontrolled
    /// problems).
    pub fn singleton() -> ControlSet {
        ControlSet {
            points: vec![ControlPoint { label: "0".into(), params: vec![] }],
        }
    }

    pub fn from_params(params: Vec<Vec<f64>>) -> Result<ControlSet> {
        let points = params
            .into_iter()
            .enumerate()
            .map(|(i, p)| ControlPoint { label: i.to_string(), params: p })
            .collect();
        ControlSet::new(points)
    }

    /// Uniform mesh of the parameter box `[lo, hi]` with `k` points per axis.
    pub fn mesh(lo: &[f64], hi: &[f64], k: usize) -> Result<ControlSet> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Argument("mesh bounds must have equal nonzero length".into()));
        }
        if k < 1 {
            return Err(Error::Argument("mesh needs at least one point per axis".into()));
        }
        let m = lo.len();
        let total = k.pow(m as u32);
        let mut params = Vec::with_capacity(total);
        for flat in 0..total {
            let mut idx = flat;
            let mut p = Vec::with_capacity(m);
            for a in 0..m {
                let i = idx % k;
                idx /= k;
                let t = if k == 1 { 0.5 } else { i as f64 / (k - 1) as f64 };
                p.push(lo[a] + t * (hi[a] - lo[a]));
            }
            params.push(p);
        }
        ControlSet::from_params(params)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, k: usize) -> &ControlPoint {
        &self.points[k]
    }

    pub fn params(&self, k: usize) -> &[f64] {
        &self.points[k].params
    }

    pub fn param_dim(&self) -> usize {
        self.points[0].params.len()
    }
}

pub type VectorField = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
pub type MatrixField = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
pub type ControlScalarField = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// The coefficients `(b, a, g, f)` of the control problem together with the
/// ellipticity constant, the drift dominator, declared sup-norm bounds and
/// an optional discount rate.
#[derive(Clone)]
pub struct CoefficientField {
    pub dim: usize,
    pub controls: ControlSet,
    drift: VectorField,
    diffusion: MatrixField,
    running_cost: ControlScalarField,
    boundary_cost: ScalarField,
    dominator: ScalarField,
    pub delta: f64,
    pub discount: Option<f64>,
    pub g_bound: f64,
    pub f_bound: f64,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("dim", &self.dim)
            .field("controls", &self.controls.len())
            .field("delta", &self.delta)
            .field("discount", &self.discount)
            .finish()
    }
}

impl CoefficientField {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dim: usize,
        controls: ControlSet,
        drift: VectorField,
        diffusion: MatrixField,
        running_cost: ControlScalarField,
        boundary_cost: ScalarField,
        dominator: ScalarField,
        delta: f64,
        discount: Option<f64>,
        g_bound: f64,
        f_bound: f64,
    ) -> Result<CoefficientField> {
        if dim < 2 {
            return Err(Error::Data("state dimension must be at least 2".into()));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Data("ellipticity constant must lie in (0, 1)".into()));
        }
        if let Some(rho) = discount {
            if rho <= 0.0 {
                return Err(Error::Data("discount rate must be positive".into()));
            }
        }
        Ok(CoefficientField {
            dim,
            controls,
            drift,
            diffusion,
            running_cost,
            boundary_cost,
            dominator,
            delta,
            discount,
            g_bound,
            f_bound,
        })
    }

    /// Build a field from expression strings. Drift and diffusion entries are
    /// indexed row-major; a missing diffusion defaults to the identity.
    #[allow(clippy::too_many_arguments)]
    pub fn from_expressions(
        dim: usize,
        controls: ControlSet,
        drift_exprs: &[String],
        diffusion_exprs: Option<&[String]>,
        running_cost_expr: &str,
        boundary_cost_expr: &str,
        dominator_expr: &str,
        delta: f64,
        discount: Option<f64>,
        g_bound: f64,
        f_bound: f64,
    ) -> Result<CoefficientField> {
        let m = controls.param_dim();
        if drift_exprs.len() != dim {
            return Err(Error::Argument(format!(
                "expected {dim} drift expressions, got {}",
                drift_exprs.len()
            )));
        }
        let drift_c: Vec<Expr> = drift_exprs
            .iter()
            .map(|s| Expr::parse(s, dim, m))
            .collect::<Result<_>>()?;
        let diff_c: Option<Vec<Expr>> = match diffusion_exprs {
            Some(list) => {
                if list.len() != dim * dim {
                    return Err(Error::Argument(format!(
                        "expected {} diffusion expressions, got {}",
                        dim * dim,
                        list.len()
                    )));
                }
                Some(list.iter().map(|s| Expr::parse(s, dim, m)).collect::<Result<_>>()?)
            }
            None => None,
        };
        let g_c = Expr::parse(running_cost_expr, dim, m)?;
        let f_c = Expr::parse(boundary_cost_expr, dim, 0)?;
        let dom_c = Expr::parse(dominator_expr, dim, 0)?;

        let d = dim;
        let drift: VectorField = Arc::new(move |lam, x, out| {
            for (i, e) in drift_c.iter().enumerate() {
                out[i] = e.eval(x, lam);
            }
        });
        let diffusion: MatrixField = match diff_c {
            Some(entries) => Arc::new(move |lam, x, out| {
                for (i, e) in entries.iter().enumerate() {
                    out[i] = e.eval(x, lam);
                }
            }),
            None => Arc::new(move |_lam, _x, out| {
                out.fill(0.0);
                for i in 0..d {
                    out[i * d + i] = 1.0;
                }
            }),
        };
        let running_cost: ControlScalarField = Arc::new(move |lam, x| g_c.eval(x, lam));
        let boundary_cost: ScalarField = Arc::new(move |x| f_c.eval(x, &[]));
        let dominator: ScalarField = Arc::new(move |x| dom_c.eval(x, &[]));
        CoefficientField::new(
            dim, controls, drift, diffusion, running_cost, boundary_cost, dominator, delta,
            discount, g_bound, f_bound,
        )
    }

    pub fn drift_into(&self, control: usize, x: &[f64], out: &mut [f64]) {
        (self.drift)(self.controls.params(control), x, out);
    }

    /// Row-major `dim * dim` diffusion matrix at `(control, x)`.
    pub fn diffusion_into(&self, control: usize, x: &[f64], out: &mut [f64]) {
        (self.diffusion)(self.controls.params(control), x, out);
    }

    pub fn running_cost(&self, control: usize, x: &[f64]) -> f64 {
        (self.running_cost)(self.controls.params(control), x)
    }

    pub fn boundary_cost(&self, x: &[f64]) -> f64 {
        (self.boundary_cost)(x)
    }

    pub fn dominator(&self, x: &[f64]) -> f64 {
        (self.dominator)(x)
    }

    pub fn n_controls(&self) -> usize {
        self.controls.len()
    }

    /// Replace the boundary/terminal cost, keeping everything else.
    pub fn with_boundary_cost(&self, f: ScalarField, f_bound: f64) -> CoefficientField {
        let mut out = self.clone();
        out.boundary_cost = f;
        out.f_bound = f_bound;
        out
    }

    /// Replace the running cost, keeping everything else.
    pub fn with_running_cost(&self, g: ControlScalarField, g_bound: f64) -> CoefficientField {
        let mut out = self.clone();
        out.running_cost = g;
        out.g_bound = g_bound;
        out
    }

    pub(crate) fn raw_drift(&self) -> VectorField {
        self.drift.clone()
    }

    pub(crate) fn raw_diffusion(&self) -> MatrixField {
        self.diffusion.clone()
    }

    pub(crate) fn raw_running_cost(&self) -> ControlScalarField {
        self.running_cost.clone()
    }

    pub(crate) fn raw_boundary_cost(&self) -> ScalarField {
        self.boundary_cost.clone()
    }
}

/// Bounded region (ball or axis-aligned box) or the whole space.
///
/// Balls and boxes are convex, hence satisfy the uniform exterior ball
/// condition with every radius.
#[derive(Debug, Clone, Serialize)]
pub enum Domain {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    WholeSpace { dim: usize },
}

impl Domain {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Domain> {
        if radius <= 0.0 {
            return Err(Error::Data("ball radius must be positive".into()));
        }
        Ok(Domain::Ball { center, radius })
    }

    pub fn bounded_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Domain> {
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| a >= b) {
            return Err(Error::Data("box must have lo < hi on every axis".into()));
        }
        Ok(Domain::Box { lo, hi })
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Ball { center, .. } => center.len(),
            Domain::Box { lo, .. } => lo.len(),
            Domain::WholeSpace { dim } => *dim,
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, Domain::WholeSpace { .. })
    }

    /// Signed distance: negative strictly inside, zero on the boundary,
    /// positive outside.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Ball { center, radius } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                r2.sqrt() - radius
            }
            Domain::Box { lo, hi } => {
                let mut out2 = 0.0;
                let mut inside = f64::NEG_INFINITY;
                for i in 0..lo.len() {
                    let q = (lo[i] - x[i]).max(x[i] - hi[i]);
                    if q > 0.0 {
                        out2 += q * q;
                    }
                    inside = inside.max(q);
                }
                if out2 > 0.0 {
                    out2.sqrt()
                } else {
                    inside
                }
            }
            Domain::WholeSpace { .. } => f64::NEG_INFINITY,
        }
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        self.signed_distance(x) <= 1e-12
    }

    /// Project `x` onto the boundary: exact for balls, one signed-distance
    /// Newton step for boxes.
    pub fn project_to_boundary(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Domain::Ball { center, radius } => {
                let mut dir: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
                let n: f64 = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                if n < 1e-300 {
                    dir = vec![0.0; center.len()];
                    dir[0] = 1.0;
                    return dir.iter().zip(center).map(|(d, c)| c + radius * d).collect();
                }
                dir.iter().zip(center).map(|(d, c)| c + radius * d / n).collect()
            }
            Domain::Box { .. } => {
                let sd = self.signed_distance(x);
                let grad = self.sdf_gradient(x);
                x.iter().zip(&grad).map(|(a, g)| a - sd * g).collect()
            }
            Domain::WholeSpace { .. } => x.to_vec(),
        }
    }

    fn sdf_gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Domain::Ball { center, radius: _ } => {
                let mut g: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
                let n: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if n < 1e-300 {
                    g.fill(0.0);
                    g[0] = 1.0;
                } else {
                    g.iter_mut().for_each(|v| *v /= n);
                }
                g
            }
            Domain::Box { lo, hi } => {
                let d = lo.len();
                let mut q = vec![0.0; d];
                let mut any_out = false;
                for i in 0..d {
                    let qi = (lo[i] - x[i]).max(x[i] - hi[i]);
                    q[i] = qi;
                    if qi > 0.0 {
                        any_out = true;
                    }
                }
                let mut g = vec![0.0; d];
                if any_out {
                    let mut n = 0.0;
                    for i in 0..d {
                        if q[i] > 0.0 {
                            let sign = if x[i] > hi[i] { 1.0 } else { -1.0 };
                            g[i] = sign * q[i];
                            n += q[i] * q[i];
                        }
                    }
                    let n = n.sqrt();
                    g.iter_mut().for_each(|v| *v /= n);
                } else {
                    // inside: steepest ascent is through the nearest face
                    let (mut best, mut bi) = (f64::NEG_INFINITY, 0);
                    for i in 0..d {
                        if q[i] > best {
                            best = q[i];
                            bi = i;
                        }
                    }
                    g[bi] = if (x[bi] - lo[bi]) < (hi[bi] - x[bi]) { -1.0 } else { 1.0 };
                }
                g
            }
            Domain::WholeSpace { dim } => vec![0.0; *dim],
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Ball { radius, .. } => 2.0 * radius,
            Domain::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(a, b)| (b - a) * (b - a))
                .sum::<f64>()
                .sqrt(),
            Domain::WholeSpace { .. } => f64::INFINITY,
        }
    }

    /// Exterior-ball radius metadata; any positive value is valid for the
    /// convex shapes supported here.
    pub fn exterior_ball_radius(&self) -> Option<f64> {
        match self {
            Domain::Ball { radius, .. } => Some(*radius),
            Domain::Box { lo, hi } => {
                let min_side = lo.iter().zip(hi).map(|(a, b)| b - a).fold(f64::INFINITY, f64::min);
                Some(0.5 * min_side)
            }
            Domain::WholeSpace { .. } => None,
        }
    }

    /// Axis-aligned bounding box, `None` for the whole space.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            Domain::Ball { center, radius } => Some((
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            )),
            Domain::Box { lo, hi } => Some((lo.clone(), hi.clone())),
            Domain::WholeSpace { .. } => None,
        }
    }
}

/// Which value function the problem asks for.
#[derive(Debug, Clone)]
pub enum Variant {
    /// Exit cost `f(X_tau) + int_0^tau g` on a bounded domain.
    EllipticDirichlet { domain: Domain },
    /// Terminal cost at a fixed horizon.
    FiniteHorizon { horizon: f64 },
    /// Infinite-horizon discounted running cost.
    Discounted { rho: f64 },
}

/// A fully specified problem: coefficients plus variant plus provenance.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub config_hash: String,
    pub field: CoefficientField,
    pub variant: Variant,
}

impl ProblemSpec {
    pub fn elliptic(name: &str, field: CoefficientField, domain: Domain) -> Result<ProblemSpec> {
        if !domain.is_bounded() {
            return Err(Error::Data("elliptic problems require a bounded domain".into()));
        }
        if domain.dim() != field.dim {
            return Err(Error::Data("domain and field dimension mismatch".into()));
        }
        Ok(ProblemSpec {
            name: name.into(),
            config_hash: String::new(),
            field,
            variant: Variant::EllipticDirichlet { domain },
        })
    }

    pub fn finite_horizon(name: &str, field: CoefficientField, horizon: f64) -> Result<ProblemSpec> {
        if horizon <= 0.0 {
            return Err(Error::Data("finite-horizon problems require T > 0".into()));
        }
        Ok(ProblemSpec {
            name: name.into(),
            config_hash: String::new(),
            field,
            variant: Variant::FiniteHorizon { horizon },
        })
    }

    pub fn discounted(name: &str, field: CoefficientField, rho: f64) -> Result<ProblemSpec> {
        if rho <= 0.0 {
            return Err(Error::Data("discounted problems require rho > 0".into()));
        }
        Ok(ProblemSpec {
            name: name.into(),
            config_hash: String::new(),
            field,
            variant: Variant::Discounted { rho },
        })
    }

    pub fn domain(&self) -> Option<&Domain> {
        match &self.variant {
            Variant::EllipticDirichlet { domain } => Some(domain),
            _ => None,
        }
    }

    pub fn is_elliptic(&self) -> bool {
        matches!(self.variant, Variant::EllipticDirichlet { .. })
    }
}

/// Result of sampling the ellipticity class over `(control, x)` pairs.
#[derive(Debug, Clone, Serialize)]
pub struct EllipticityReport {
    pub min_eig: f64,
    pub max_eig: f64,
    pub pass: bool,
    pub n_samples: usize,
}

const EIG_TOL: f64 = 1e-10;
const SYM_TOL: f64 = 1e-10;

/// Check that every sampled diffusion matrix is symmetric with eigenvalues
/// in `[delta (1 - tol), (1/delta)(1 + tol)]`.
pub fn check_ellipticity(
    field: &CoefficientField,
    samples: &[(usize, Vec<f64>)],
) -> Result<EllipticityReport> {
    if samples.is_empty() {
        return Err(Error::Argument("ellipticity check needs at least one sample".into()));
    }
    let d = field.dim;
    let mut buf = vec![0.0; d * d];
    let mut min_eig = f64::INFINITY;
    let mut max_eig = f64::NEG_INFINITY;
    for (si, (control, x)) in samples.iter().enumerate() {
        field.diffusion_into(*control, x, &mut buf);
        for i in 0..d {
            for j in (i + 1)..d {
                let asym = (buf[i * d + j] - buf[j * d + i]).abs();
                if asym > SYM_TOL {
                    return Err(Error::Data(format!(
                        "diffusion matrix asymmetric ({asym:.3e}) at sample {si} (control {control}, x = {x:?})"
                    )));
                }
            }
        }
        let m = DMatrix::from_row_slice(d, d, &buf);
        let eigs = m.symmetric_eigenvalues();
        for &e in eigs.iter() {
            min_eig = min_eig.min(e);
            max_eig = max_eig.max(e);
        }
    }
    let lo = field.delta * (1.0 - EIG_TOL);
    let hi = (1.0 / field.delta) * (1.0 + EIG_TOL);
    Ok(EllipticityReport {
        min_eig,
        max_eig,
        pass: min_eig >= lo && max_eig <= hi,
        n_samples: samples.len(),
    })
}

/// Evaluate the Hamiltonian
/// `min_k { 1/2 tr[a(k,x) M] + <b(k,x), p> + g(k,x) }`
/// over the finite control set. Returns the minimum and the first attaining
/// control index (ties resolved to the lowest index).
pub fn hamiltonian(
    field: &CoefficientField,
    x: &[f64],
    p: &[f64],
    m: &[f64],
) -> Result<(f64, usize)> {
    let d = field.dim;
    if x.len() != d || p.len() != d || m.len() != d * d {
        return Err(Error::Argument("hamiltonian: dimension mismatch".into()));
    }
    for i in 0..d {
        for j in (i + 1)..d {
            if (m[i * d + j] - m[j * d + i]).abs() > SYM_TOL {
                return Err(Error::Argument("hamiltonian: M must be symmetric".into()));
            }
        }
    }
    let mut a = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    let mut best = f64::INFINITY;
    let mut best_k = 0usize;
    for k in 0..field.n_controls() {
        field.diffusion_into(k, x, &mut a);
        field.drift_into(k, x, &mut b);
        let mut val = field.running_cost(k, x);
        // 1/2 tr(a M)
        let mut tr = 0.0;
        for i in 0..d {
            for j in 0..d {
                tr += a[i * d + j] * m[j * d + i];
            }
        }
        val += 0.5 * tr;
        for i in 0..d {
            val += b[i] * p[i];
        }
        if val < best {
            best = val;
            best_k = k;
        }
    }
    Ok((best, best_k))
}

/// Sampled equicontinuity-in-control report: for neighbouring control pairs,
/// the largest coefficient increment observed over the sample points,
/// against the control-parameter distance. Informational only; the modulus
/// has no decidable acceptance threshold.
#[derive(Debug, Clone, Serialize)]
pub struct EquicontinuityReport {
    /// `(param_distance, max_coefficient_increment)` per sampled pair.
    pub pairs: Vec<(f64, f64)>,
    pub max_increment: f64,
}

pub fn equicontinuity_report(
    field: &CoefficientField,
    sample_points: &[Vec<f64>],
) -> EquicontinuityReport {
    let d = field.dim;
    let k = field.n_controls();
    let mut pairs = Vec::new();
    let mut max_inc = 0.0f64;
    let mut a1 = vec![0.0; d * d];
    let mut a2 = vec![0.0; d * d];
    let mut b1 = vec![0.0; d];
    let mut b2 = vec![0.0; d];
    for i in 0..k {
        for j in (i + 1)..k {
            let dist: f64 = field
                .controls
                .params(i)
                .iter()
                .zip(field.controls.params(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let mut inc = 0.0f64;
            for x in sample_points {
                field.diffusion_into(i, x, &mut a1);
                field.diffusion_into(j, x, &mut a2);
                field.drift_into(i, x, &mut b1);
                field.drift_into(j, x, &mut b2);
                for t in 0..d * d {
                    inc = inc.max((a1[t] - a2[t]).abs());
                }
                for t in 0..d {
                    inc = inc.max((b1[t] - b2[t]).abs());
                }
                inc = inc.max((field.running_cost(i, x) - field.running_cost(j, x)).abs());
            }
            pairs.push((dist, inc));
            max_inc = max_inc.max(inc);
        }
    }
    EquicontinuityReport { pairs, max_increment: max_inc }
}

/// Convenience constructor for constant-diffusion fields used across tests.
pub fn constant_matrix_field(d: usize, entries: Vec<f64>) -> MatrixField {
    assert_eq!(entries.len(), d * d);
    Arc::new(move |_lam, _x, out| out.copy_from_slice(&entries))
}

pub fn zero_vector_field(d: usize) -> VectorField {
    Arc::new(move |_lam, _x, out| out[..d].fill(0.0))
}

pub fn zero_control_scalar() -> ControlScalarField {
    Arc::new(|_lam, _x| 0.0)
}

pub fn constant_scalar(c: f64) -> ScalarField {
    Arc::new(move |_x| c)
}

pub fn constant_control_scalar(c: f64) -> ControlScalarField {
    Arc::new(move |_lam, _x| c)
}

#[allow(dead_code)]
fn _assert_send_sync() {
    fn check<T: Send + Sync>() {}
    check::<CoefficientField>();
    check::<Domain>();
    check::<ProblemSpec>();
}
