use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Newton iteration on `residual(x) = 0`.
///
/// `scales[i]` is the magnitude against which component `i` of the residual
/// and of the update are measured. Without a supplied Jacobian a forward
/// difference is used, one residual evaluation per column.
pub fn newton_solve<R>(
    mut residual: R,
    guess: &[f64],
    mut jacobian: Option<&mut dyn FnMut(&[f64], &mut DMatrix<f64>)>,
    scales: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)>
where
    R: FnMut(&[f64], &mut [f64]),
{
    let n = guess.len();
    let mut x = guess.to_vec();
    let mut r = vec![0.0; n];
    let mut r_pert = vec![0.0; n];
    let mut jac = DMatrix::<f64>::zeros(n, n);
    let norm = |v: &[f64]| -> f64 {
        v.iter()
            .zip(scales)
            .fold(0.0f64, |m, (a, s)| m.max((a / s).abs()))
    };

    residual(&x, &mut r);
    let mut res_norm = norm(&r);
    if !res_norm.is_finite() {
        return Err(Error::NewtonDivergence {
            iterations: 0,
            last_norm: res_norm,
        });
    }
    if res_norm <= tol {
        return Ok((x, 0));
    }

    for iter in 1..=max_iter {
        match jacobian.as_deref_mut() {
            Some(jf) => jf(&x, &mut jac),
            None => {
                let mut xp = x.clone();
                for j in 0..n {
                    let h = f64::EPSILON.sqrt() * x[j].abs().max(scales[j]);
                    xp[j] = x[j] + h;
                    let h = xp[j] - x[j];
                    residual(&xp, &mut r_pert);
                    for i in 0..n {
                        jac[(i, j)] = (r_pert[i] - r[i]) / h;
                    }
                    xp[j] = x[j];
                }
            }
        }

        let rhs = DVector::from_iterator(n, r.iter().map(|v| -v));
        let Some(delta) = jac.clone().lu().solve(&rhs) else {
            return Err(Error::NewtonDivergence {
                iterations: iter,
                last_norm: res_norm,
            });
        };
        if delta.iter().any(|d| !d.is_finite()) {
            return Err(Error::NewtonDivergence {
                iterations: iter,
                last_norm: res_norm,
            });
        }
        for (xi, di) in x.iter_mut().zip(delta.iter()) {
            *xi += di;
        }
        let step_norm = norm(delta.as_slice());

        residual(&x, &mut r);
        res_norm = norm(&r);
        if !res_norm.is_finite() {
            return Err(Error::NewtonDivergence {
                iterations: iter,
                last_norm: res_norm,
            });
        }
        // The second clause accepts a residual stuck at rounding level once
        // the update itself has vanished.
        if res_norm <= tol || (step_norm <= tol * 1e-2 && res_norm <= tol * 1e3) {
            return Ok((x, iter));
        }
    }
    Err(Error::NewtonDivergence {
        iterations: max_iter,
        last_norm: res_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_root_of_four() {
        let (x, iters) = newton_solve(
            |x, r| r[0] = x[0] * x[0] - 4.0,
            &[3.0],
            None,
            &[1.0],
            1e-12,
            20,
        )
        .unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!(iters <= 6);
    }

    #[test]
    fn supplied_jacobian() {
        let mut jac = |x: &[f64], j: &mut DMatrix<f64>| j[(0, 0)] = 2.0 * x[0];
        let (x, _) = newton_solve(
            |x, r| r[0] = x[0] * x[0] - 4.0,
            &[3.0],
            Some(&mut jac),
            &[1.0],
            1e-12,
            20,
        )
        .unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_derivative_diverges() {
        let mut jac = |x: &[f64], j: &mut DMatrix<f64>| j[(0, 0)] = 2.0 * x[0];
        let err = newton_solve(
            |x, r| r[0] = x[0] * x[0] - 4.0,
            &[0.0],
            Some(&mut jac),
            &[1.0],
            1e-12,
            20,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NewtonDivergence { .. }));
    }

    #[test]
    fn cube_root_converges_fast() {
        let (root, iters) = newton_solve(
            |x, r| r[0] = x[0] * x[0] * x[0] - 8.0,
            &[3.0],
            None,
            &[1.0],
            1e-12,
            20,
        )
        .unwrap();
        assert!((root[0] - 2.0).abs() < 1e-12);
        assert!(iters <= 7, "{iters}");
    }
}
