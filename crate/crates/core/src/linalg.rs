//! Symmetric matrix square roots for the diffusion term.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Symmetric square root of a symmetric positive-definite matrix (row-major
/// `d x d` slices). Diagonal matrices take the elementwise-sqrt fast path,
/// which also keeps `sqrt(I) = I` exact; the general case goes through a
/// spectral decomposition.
pub fn sqrt_spd(d: usize, a: &[f64], out: &mut [f64]) -> Result<()> {
    debug_assert_eq!(a.len(), d * d);
    debug_assert_eq!(out.len(), d * d);
    let mut diagonal = true;
    'outer: for i in 0..d {
        for j in 0..d {
            if i != j && a[i * d + j] != 0.0 {
                diagonal = false;
                break 'outer;
            }
        }
    }
    if diagonal {
        out.fill(0.0);
        for i in 0..d {
            let v = a[i * d + i];
            if v <= 0.0 {
                return Err(Error::Ellipticity(format!(
                    "diffusion matrix has nonpositive eigenvalue {v}"
                )));
            }
            out[i * d + i] = v.sqrt();
        }
        return Ok(());
    }
    for i in 0..d {
        for j in (i + 1)..d {
            if (a[i * d + j] - a[j * d + i]).abs() > 1e-10 {
                return Err(Error::Data("sqrt_spd: matrix is not symmetric".into()));
            }
        }
    }
    let m = DMatrix::from_row_slice(d, d, a);
    let eig = m.symmetric_eigen();
    for &v in eig.eigenvalues.iter() {
        if v <= 0.0 {
            return Err(Error::Ellipticity(format!(
                "diffusion matrix has nonpositive eigenvalue {v}"
            )));
        }
    }
    let sqrt_vals = eig.eigenvalues.map(|v| v.sqrt());
    let s = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = s[(i, j)];
        }
    }
    // symmetrize to wash out the last-bit asymmetry of the reconstruction
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (out[i * d + j] + out[j * d + i]);
            out[i * d + j] = avg;
            out[j * d + i] = avg;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn frob_err(d: usize, s: &[f64], a: &[f64]) -> f64 {
        let mut err = 0.0;
        for i in 0..d {
            for j in 0..d {
                let mut v = 0.0;
                for k in 0..d {
                    v += s[i * d + k] * s[k * d + j];
                }
                err += (v - a[i * d + j]) * (v - a[i * d + j]);
            }
        }
        err.sqrt()
    }

    #[test]
    fn identity_is_exact() {
        let a = [1.0, 0.0, 0.0, 1.0];
        let mut s = [0.0; 4];
        sqrt_spd(2, &a, &mut s).unwrap();
        assert_eq!(s, a);
    }

    #[test]
    fn diagonal_is_exact() {
        let a = [4.0, 0.0, 0.0, 9.0];
        let mut s = [0.0; 4];
        sqrt_spd(2, &a, &mut s).unwrap();
        assert_eq!(s, [2.0, 0.0, 0.0, 3.0]);
    }

    #[test]
    fn random_spd_reconstructs() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        for _ in 0..50 {
            // random A in S_{0.5}, d = 3: Q diag(lams) Q^T with lams in [0.5, 2]
            let d = 3;
            let mut m = vec![0.0; d * d];
            for v in m.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            // symmetrize a random matrix and shift to make it SPD inside the class
            let mut a = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    a[i * d + j] = 0.25 * (m[i * d + j] + m[j * d + i]);
                }
                a[i * d + i] += 1.2;
            }
            let mut s = vec![0.0; d * d];
            sqrt_spd(d, &a, &mut s).unwrap();
            assert!(frob_err(d, &s, &a) <= 1e-12, "err {}", frob_err(d, &s, &a));
        }
    }

    #[test]
    fn rejects_degenerate() {
        let a = [1.0, 0.0, 0.0, 0.0];
        let mut s = [0.0; 4];
        assert!(matches!(sqrt_spd(2, &a, &mut s), Err(Error::Ellipticity(_))));
    }
}
