//! Named coefficient and terminal-data presets selectable from configs.

use std::sync::Arc;

use crate::control::{
    constant_control_scalar, constant_matrix_field, constant_scalar, zero_control_scalar,
    zero_vector_field, CoefficientField, ControlSet, ScalarField,
};
use crate::error::{Error, Result};

fn identity_matrix(d: usize) -> Vec<f64> {
    let mut a = vec![0.0; d * d];
    for i in 0..d {
        a[i * d + i] = 1.0;
    }
    a
}

/// Built-in coefficient fields.
///
/// * `identity`: no drift, unit diffusion, `g = 1`, `f = 0` (the Poisson
///   exit-time problem).
/// * `two_drift`: two controls pushing along the first axis with speed
///   `0.5`, `f = x1`, `g = 0`.
/// * `heat`: single control, no drift, unit diffusion, zero costs.
/// * `ld_singular`: drift `-x / (2 ||x||^2)` inside the unit ball — the
///   critical-integrability example (dominated by `1/(2 ||x||)`, which lies
///   in `L_p` for every `p < d` but not `p = d`).
/// * `checkerboard`: scalar diffusion alternating between `0.5 I` and `I`
///   on a period-`1/2` checkerboard, `g = 1`, `f = 0`.
/// * `discounted_quad`: `g = min(||x||^2, 4)` with discount rate `1`.
pub fn coefficient_preset(name: &str, dim: usize) -> Result<CoefficientField> {
    let d = dim;
    match name {
        "identity" => CoefficientField::new(
            d,
            ControlSet::singleton(),
            zero_vector_field(d),
            constant_matrix_field(d, identity_matrix(d)),
            constant_control_scalar(1.0),
            constant_scalar(0.0),
            constant_scalar(0.0),
            0.5,
            None,
            1.0,
            0.0,
        ),
        "two_drift" => {
            let controls = ControlSet::from_params(vec![vec![1.0], vec![-1.0]])?;
            CoefficientField::new(
                d,
                controls,
                Arc::new(move |lam: &[f64], _x: &[f64], out: &mut [f64]| {
                    out[..d].fill(0.0);
                    out[0] = 0.5 * lam[0];
                }),
                constant_matrix_field(d, identity_matrix(d)),
                zero_control_scalar(),
                Arc::new(|x: &[f64]| x[0]),
                constant_scalar(0.5),
                0.9,
                None,
                0.0,
                1.0,
            )
        }
        "heat" => CoefficientField::new(
            d,
            ControlSet::singleton(),
            zero_vector_field(d),
            constant_matrix_field(d, identity_matrix(d)),
            zero_control_scalar(),
            constant_scalar(0.0),
            constant_scalar(0.0),
            0.9,
            None,
            0.0,
            1.0,
        ),
        "ld_singular" => CoefficientField::new(
            d,
            ControlSet::singleton(),
            Arc::new(move |_lam: &[f64], x: &[f64], out: &mut [f64]| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                if r2 > 0.0 && r2 <= 1.0 {
                    for i in 0..d {
                        out[i] = -x[i] / (2.0 * r2);
                    }
                } else {
                    out[..d].fill(0.0);
                }
            }),
            constant_matrix_field(d, identity_matrix(d)),
            zero_control_scalar(),
            constant_scalar(0.0),
            Arc::new(|x: &[f64]| {
                let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if r > 0.0 && r <= 1.0 {
                    1.0 / (2.0 * r)
                } else {
                    0.0
                }
            }),
            0.9,
            None,
            0.0,
            0.0,
        ),
        "checkerboard" => CoefficientField::new(
            d,
            ControlSet::singleton(),
            zero_vector_field(d),
            Arc::new(move |_lam: &[f64], x: &[f64], out: &mut [f64]| {
                // unit cells: the scalar diffusion alternates between 0.5
                // and 1 across the coordinate axes
                let mut s = 1.0;
                for &xi in x.iter().take(2) {
                    s *= (std::f64::consts::PI * xi).sin();
                }
                let c = if s > 0.0 { 1.0 } else { 0.5 };
                out.fill(0.0);
                for i in 0..d {
                    out[i * d + i] = c;
                }
            }),
            constant_control_scalar(1.0),
            constant_scalar(0.0),
            constant_scalar(0.0),
            0.5,
            None,
            1.0,
            0.0,
        ),
        "discounted_quad" => CoefficientField::new(
            d,
            ControlSet::singleton(),
            zero_vector_field(d),
            constant_matrix_field(d, identity_matrix(d)),
            Arc::new(|_lam: &[f64], x: &[f64]| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                r2.min(4.0)
            }),
            constant_scalar(0.0),
            constant_scalar(0.0),
            0.9,
            Some(1.0),
            4.0,
            0.0,
        ),
        other => Err(Error::Argument(format!("unknown coefficient preset `{other}`"))),
    }
}

/// Terminal-data presets for parabolic runs. The indicator presets are
/// lower semicontinuous (indicators of open sets); `quadratic` and
/// `coordinate` are smooth references. Returns the callable and its sup
/// bound on the usual truncation boxes.
pub fn terminal_preset(name: &str) -> Result<(ScalarField, f64)> {
    match name {
        "halfspace_indicator" => Ok((
            Arc::new(|x: &[f64]| if x[0] > 0.0 { 1.0 } else { 0.0 }),
            1.0,
        )),
        "ball_indicator" => Ok((
            Arc::new(|x: &[f64]| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                if r2 < 0.25 {
                    1.0
                } else {
                    0.0
                }
            }),
            1.0,
        )),
        "step_stack" => Ok((
            Arc::new(|x: &[f64]| {
                // lower semicontinuous staircase in x1 (jumps across open sets)
                let mut v = 0.0;
                if x[0] > -0.5 {
                    v += 0.25;
                }
                if x[0] > 0.0 {
                    v += 0.5;
                }
                if x[0] > 0.5 {
                    v += 0.25;
                }
                v
            }),
            1.0,
        )),
        "quadratic" => Ok((
            Arc::new(|x: &[f64]| x.iter().map(|v| v * v).sum()),
            f64::INFINITY,
        )),
        "coordinate" => Ok((Arc::new(|x: &[f64]| x[0]), f64::INFINITY)),
        other => Err(Error::Argument(format!("unknown terminal preset `{other}`"))),
    }
}
