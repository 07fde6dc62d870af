//! Quadrature for drift-dominator integrability checks and coefficient
//! mollification.
//!
//! `lp_norm` measures `(int_region b^p dx)^(1/p)` with a polar-aware rule:
//! ball regions are integrated in polar/spherical coordinates with radial
//! panels packed geometrically toward the (possible) singularity, so
//! integrable blow-ups like `1/(2 ||x||)` are resolved to the target
//! accuracy. An inner cutoff radius excises a ball around the declared
//! singularity, which is how the divergence at the critical exponent is
//! exhibited: the excised integral grows logarithmically as the cutoff
//! shrinks.

use std::sync::Arc;

use crate::control::{CoefficientField, Domain};
use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on `[-1, 1]` via Newton iteration on the
/// Legendre recurrence; deterministic for fixed `n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-style initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            // evaluate P_n and derivative by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            pp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / pp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn radial_panels(r_lo: f64, r_hi: f64, n_panels: usize) -> Vec<(f64, f64)> {
    // geometric packing toward r_lo
    let ratio = (r_hi / r_lo).powf(1.0 / n_panels as f64);
    let mut edges = Vec::with_capacity(n_panels + 1);
    let mut r = r_lo;
    edges.push(r);
    for _ in 0..n_panels {
        r *= ratio;
        edges.push(r);
    }
    *edges.last_mut().unwrap() = r_hi;
    edges.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Integrate `f` over the ball shell `cutoff <= ||x - c|| <= radius` in
/// polar/spherical coordinates (d = 2 or 3).
fn ball_integral(
    f: &dyn Fn(&[f64]) -> f64,
    center: &[f64],
    radius: f64,
    cutoff: f64,
    n_radial_panels: usize,
    n_angular: usize,
) -> Result<f64> {
    let d = center.len();
    let (gl_nodes, gl_weights) = gauss_legendre(12);
    let r_lo = if cutoff > 0.0 { cutoff } else { radius * 1e-14 };
    let panels = radial_panels(r_lo, radius, n_radial_panels);
    let mut x = vec![0.0; d];
    let mut total = 0.0;
    match d {
        2 => {
            let dtheta = 2.0 * std::f64::consts::PI / n_angular as f64;
            for &(a, b) in &panels {
                let half = 0.5 * (b - a);
                let mid = 0.5 * (a + b);
                for (gn, gw) in gl_nodes.iter().zip(&gl_weights) {
                    let r = mid + half * gn;
                    let wr = gw * half * r; // r^{d-1} = r
                    for k in 0..n_angular {
                        let th = dtheta * (k as f64 + 0.5);
                        x[0] = center[0] + r * th.cos();
                        x[1] = center[1] + r * th.sin();
                        let v = f(&x);
                        if !v.is_finite() {
                            return Err(Error::Data(format!(
                                "non-finite integrand sample at x = {x:?} (outside cutoff)"
                            )));
                        }
                        total += wr * dtheta * v;
                    }
                }
            }
        }
        3 => {
            let dtheta = 2.0 * std::f64::consts::PI / n_angular as f64;
            let (u_nodes, u_weights) = gauss_legendre(n_angular.min(48));
            for &(a, b) in &panels {
                let half = 0.5 * (b - a);
                let mid = 0.5 * (a + b);
                for (gn, gw) in gl_nodes.iter().zip(&gl_weights) {
                    let r = mid + half * gn;
                    let wr = gw * half * r * r;
                    for (un, uw) in u_nodes.iter().zip(&u_weights) {
                        let cosphi = *un; // u = cos(phi), du absorbs sin(phi)
                        let sinphi = (1.0 - cosphi * cosphi).sqrt();
                        for k in 0..n_angular {
                            let th = dtheta * (k as f64 + 0.5);
                            x[0] = center[0] + r * sinphi * th.cos();
                            x[1] = center[1] + r * sinphi * th.sin();
                            x[2] = center[2] + r * cosphi;
                            let v = f(&x);
                            if !v.is_finite() {
                                return Err(Error::Data(format!(
                                    "non-finite integrand sample at x = {x:?} (outside cutoff)"
                                )));
                            }
                            total += wr * uw * dtheta * v;
                        }
                    }
                }
            }
        }
        other => {
            return Err(Error::Argument(format!(
                "polar quadrature supports d = 2 or 3, got {other}"
            )))
        }
    }
    Ok(total)
}

fn box_integral(
    f: &dyn Fn(&[f64]) -> f64,
    lo: &[f64],
    hi: &[f64],
    panels_per_axis: usize,
) -> Result<f64> {
    let d = lo.len();
    let (gl_nodes, gl_weights) = gauss_legendre(8);
    let per_axis = panels_per_axis * gl_nodes.len();
    // flatten tensor loop over (panel, node) per axis
    let mut coords = vec![0.0; d];
    let mut weights = vec![0.0; d];
    let total_nodes = per_axis.pow(d as u32);
    let mut sum = 0.0;
    for flat in 0..total_nodes {
        let mut idx = flat;
        for a in 0..d {
            let i = idx % per_axis;
            idx /= per_axis;
            let panel = i / gl_nodes.len();
            let node = i % gl_nodes.len();
            let width = (hi[a] - lo[a]) / panels_per_axis as f64;
            let pa = lo[a] + panel as f64 * width;
            let half = 0.5 * width;
            coords[a] = pa + half + half * gl_nodes[node];
            weights[a] = gl_weights[node] * half;
        }
        let w: f64 = weights.iter().product();
        let v = f(&coords);
        if !v.is_finite() {
            return Err(Error::Data(format!(
                "non-finite integrand sample at x = {coords:?}"
            )));
        }
        sum += w * v;
    }
    Ok(sum)
}

/// `(int_{region \ B_cutoff(singularity)} b(x)^p dx)^{1/p}` by adaptive
/// polar-aware quadrature. `singularity` defaults to the ball center (or the
/// origin for boxes); for box regions the cutoff must be zero.
pub fn lp_norm(
    b: &dyn Fn(&[f64]) -> f64,
    region: &Domain,
    p: f64,
    inner_cutoff: f64,
    singularity: Option<&[f64]>,
) -> Result<f64> {
    if p < 1.0 {
        return Err(Error::Argument("lp_norm requires p >= 1".into()));
    }
    if inner_cutoff < 0.0 {
        return Err(Error::Argument("inner cutoff must be nonnegative".into()));
    }
    if !region.is_bounded() {
        return Err(Error::Argument("lp_norm requires a bounded region".into()));
    }
    let integrand = |x: &[f64]| b(x).powf(p);
    let integral = match region {
        Domain::Ball { center, radius } => {
            let sing = singularity.unwrap_or(center);
            let dist: f64 = sing
                .iter()
                .zip(center)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if dist > 1e-12 {
                return Err(Error::Argument(
                    "lp_norm: singularity must coincide with the ball center".into(),
                ));
            }
            // refine radial panels and angular resolution until stable
            let mut prev = f64::NAN;
            let mut value = 0.0;
            let mut n_panels = 32;
            let mut n_angular = 32;
            for _ in 0..5 {
                value = ball_integral(&integrand, center, *radius, inner_cutoff, n_panels, n_angular)?;
                if prev.is_finite() {
                    let denom = value.abs().max(1e-300);
                    if ((value - prev) / denom).abs() < 1e-7 {
                        break;
                    }
                }
                prev = value;
                n_panels *= 2;
                n_angular *= 2;
            }
            value
        }
        Domain::Box { lo, hi } => {
            if inner_cutoff > 0.0 {
                return Err(Error::Argument(
                    "cutoff excision is only supported for ball regions".into(),
                ));
            }
            let mut prev = f64::NAN;
            let mut value = 0.0;
            let mut panels = 2;
            for _ in 0..5 {
                value = box_integral(&integrand, lo, hi, panels)?;
                if prev.is_finite() {
                    let denom = value.abs().max(1e-300);
                    if ((value - prev) / denom).abs() < 1e-7 {
                        break;
                    }
                }
                prev = value;
                panels *= 2;
            }
            value
        }
        Domain::WholeSpace { .. } => unreachable!("bounded checked above"),
    };
    Ok(integral.powf(1.0 / p))
}

/// Discrete mollification kernel: tensor grid of offsets in `(-1, 1)^d`
/// (even count per axis, so no node sits on a symmetry plane), weighted by
/// the standard radial bump and normalized to unit mass.
#[derive(Debug, Clone)]
pub struct MollifierKernel {
    /// offsets scaled by the smoothing radius at evaluation time
    offsets: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

const MOLLIFIER_NODES_PER_AXIS: usize = 8;

impl MollifierKernel {
    pub fn standard(d: usize) -> MollifierKernel {
        let n = MOLLIFIER_NODES_PER_AXIS;
        let axis: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) / (n as f64 / 2.0) - 1.0).collect();
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        let total = n.pow(d as u32);
        for flat in 0..total {
            let mut idx = flat;
            let mut y = Vec::with_capacity(d);
            for _ in 0..d {
                y.push(axis[idx % n]);
                idx /= n;
            }
            let r2: f64 = y.iter().map(|v| v * v).sum();
            if r2 < 1.0 {
                let w = (-1.0 / (1.0 - r2)).exp();
                offsets.push(y);
                weights.push(w);
            }
        }
        let sum: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= sum);
        MollifierKernel { offsets, weights }
    }

    /// Smooth a scalar callable: `f_h(x) = f(x) + sum_i w_i (f(x - h y_i) - f(x))`.
    ///
    /// The anchored form keeps constants exactly fixed.
    pub fn smooth_scalar(&self, f: &dyn Fn(&[f64]) -> f64, h: f64, x: &[f64]) -> f64 {
        let base = f(x);
        let mut acc = 0.0;
        let mut shifted = x.to_vec();
        for (y, w) in self.offsets.iter().zip(&self.weights) {
            for i in 0..x.len() {
                shifted[i] = x[i] - h * y[i];
            }
            acc += w * (f(&shifted) - base);
        }
        base + acc
    }
}

/// Mollify the coefficient field: `b`, `a`, `g` and the drift dominator are
/// replaced by their discrete mollifications with radius `h`. The boundary
/// cost and the ellipticity class are unchanged (convex combinations of
/// `S_delta` matrices stay in `S_delta`).
pub fn mollify(field: &CoefficientField, h: f64) -> Result<CoefficientField> {
    if h <= 0.0 {
        return Err(Error::Argument("mollification radius must be positive".into()));
    }
    let d = field.dim;
    let kernel = Arc::new(MollifierKernel::standard(d));

    let drift0 = field.raw_drift();
    let k1 = kernel.clone();
    let drift = Arc::new(move |lam: &[f64], x: &[f64], out: &mut [f64]| {
        let mut base = vec![0.0; d];
        drift0(lam, x, &mut base);
        let mut acc = vec![0.0; d];
        let mut shifted = x.to_vec();
        let mut tmp = vec![0.0; d];
        for (y, w) in k1.offsets.iter().zip(&k1.weights) {
            for i in 0..d {
                shifted[i] = x[i] - h * y[i];
            }
            drift0(lam, &shifted, &mut tmp);
            for i in 0..d {
                acc[i] += w * (tmp[i] - base[i]);
            }
        }
        for i in 0..d {
            out[i] = base[i] + acc[i];
        }
    });

    let diffusion0 = field.raw_diffusion();
    let k2 = kernel.clone();
    let diffusion = Arc::new(move |lam: &[f64], x: &[f64], out: &mut [f64]| {
        let n = d * d;
        let mut base = vec![0.0; n];
        diffusion0(lam, x, &mut base);
        let mut acc = vec![0.0; n];
        let mut shifted = x.to_vec();
        let mut tmp = vec![0.0; n];
        for (y, w) in k2.offsets.iter().zip(&k2.weights) {
            for i in 0..d {
                shifted[i] = x[i] - h * y[i];
            }
            diffusion0(lam, &shifted, &mut tmp);
            for i in 0..n {
                acc[i] += w * (tmp[i] - base[i]);
            }
        }
        for i in 0..n {
            out[i] = base[i] + acc[i];
        }
    });

    let g0 = field.raw_running_cost();
    let k3 = kernel.clone();
    let running = Arc::new(move |lam: &[f64], x: &[f64]| -> f64 {
        let base = g0(lam, x);
        let mut acc = 0.0;
        let mut shifted = x.to_vec();
        for (y, w) in k3.offsets.iter().zip(&k3.weights) {
            for i in 0..x.len() {
                shifted[i] = x[i] - h * y[i];
            }
            acc += w * (g0(lam, &shifted) - base);
        }
        base + acc
    });

    let field2 = field.clone();
    let k4 = kernel.clone();
    let dominator = Arc::new(move |x: &[f64]| -> f64 {
        k4.smooth_scalar(&|y| field2.dominator(y), h, x)
    });

    CoefficientField::new(
        d,
        field.controls.clone(),
        drift,
        diffusion,
        running,
        field.raw_boundary_cost(),
        dominator,
        field.delta,
        field.discount,
        field.g_bound,
        field.f_bound,
    )
}
