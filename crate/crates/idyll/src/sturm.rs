//! Ground state of the periodic Sturm-Liouville operator L = -d^2/dy^2 - K(y).
//!
//! The lowest eigenvalue -alpha_max^2 fixes the instability band (0, alpha_max)
//! of the shear profile, and the positive ground state phi_s seeds the
//! neutral-mode consistency check in the shooting module.

use crate::error::{Error, Result};
use crate::fields::{spectral_derivative, PeriodicGrid1D, ShearProfile};
use nalgebra::DMatrix;

/// Lowest eigenpair of the discretized operator, plus the spectral gap.
#[derive(Debug, Clone)]
pub struct SlResult {
    pub lambda_min: f64,
    /// sqrt(-lambda_min); only defined because construction fails otherwise.
    pub alpha_max: f64,
    /// Ground state, positive, scaled so its minimum value is exactly 1.
    pub phi_s: Vec<f64>,
    /// Distance to the second eigenvalue.
    pub gap: f64,
    pub grid: PeriodicGrid1D,
}

impl SlResult {
    /// First node index attaining the minimum of phi_s (the paper's y_1).
    pub fn min_node(&self) -> usize {
        let mut best = 0;
        for (j, &v) in self.phi_s.iter().enumerate() {
            if v < self.phi_s[best] {
                best = j;
            }
        }
        best
    }
}

/// The Rayleigh potential K = -U'' / (U - U_s).
///
/// Nodes where the denominator vanishes must be inflection points (U'' = 0
/// there too); K is filled with the L'Hopital limit -U'''/U'. All inflection
/// values found on the period must agree with `u_s` to within 1e-6 of the
/// profile scale, and the resulting K must be positive everywhere.
pub fn build_k(profile: &ShearProfile, u_s: f64) -> Result<Vec<f64>> {
    let grid = profile.grid();
    let n = grid.n();
    let u = profile.u();
    let ddu = profile.ddu();
    let dddu = profile.dddu();
    let du = profile.du();

    let scale_u = u.iter().fold(0.0f64, |a, &x| a.max((x - u_s).abs())).max(1e-300);
    let scale_dd = ddu.iter().fold(0.0f64, |a, &x| a.max(x.abs())).max(1e-300);
    let tol_zero = 1e-8 * scale_u;
    let tol_dd = 1e-6 * scale_dd;

    check_single_inflection_value(profile, u_s, scale_u)?;

    let mut k = vec![0.0; n];
    for j in 0..n {
        let denom = u[j] - u_s;
        if denom.abs() < tol_zero {
            if ddu[j].abs() > tol_dd {
                return Err(Error::SingularPotential { y: grid.node(j), ddu: ddu[j] });
            }
            if du[j].abs() < tol_dd {
                // U' = 0 together with U = U_s: degenerate critical point
                return Err(Error::SingularPotential { y: grid.node(j), ddu: ddu[j] });
            }
            k[j] = -dddu[j] / du[j];
        } else {
            k[j] = -ddu[j] / denom;
        }
        if !(k[j] > 0.0) {
            return Err(Error::PotentialNotPositive { y: grid.node(j), value: k[j] });
        }
    }
    Ok(k)
}

/// Locate zeros of U'' by sign change + bisection on the trigonometric
/// interpolant and verify all inflection values cluster at `u_s`.
fn check_single_inflection_value(profile: &ShearProfile, u_s: f64, scale_u: f64) -> Result<()> {
    let grid = profile.grid();
    let n = grid.n();
    let ddu = profile.ddu();
    let mut values: Vec<f64> = Vec::new();
    for j in 0..n {
        let a = ddu[j];
        let b = ddu[(j + 1) % n];
        if a == 0.0 {
            values.push(profile.eval(grid.node(j)));
            continue;
        }
        if a * b < 0.0 {
            let mut lo = grid.node(j);
            let mut hi = grid.node(j) + grid.spacing();
            let mut flo = a;
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let fm = profile.eval_derivative(mid, 2);
                if flo * fm <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            values.push(profile.eval(0.5 * (lo + hi)));
        }
    }
    let tol = 1e-6 * scale_u.max(u_s.abs()).max(1.0);
    for &v in &values {
        if (v - u_s).abs() > tol {
            // a second inflection value distinct from u_s
            return Err(Error::MultipleInflectionValues { u1: u_s, u2: v });
        }
    }
    Ok(())
}

/// Dense Fourier-collocation second-derivative matrix.
fn second_derivative_matrix(grid: &PeriodicGrid1D) -> DMatrix<f64> {
    let n = grid.n();
    let mut d2 = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = spectral_derivative(grid, &e, 2).expect("unit vector is finite");
        for i in 0..n {
            d2[(i, j)] = col[i];
        }
        e[j] = 0.0;
    }
    d2
}

/// Lowest eigenpair of -d^2/dy^2 - K(y) with periodic boundary conditions.
pub fn lowest_eigenpair(grid: &PeriodicGrid1D, k: &[f64]) -> Result<SlResult> {
    if k.len() != grid.n() {
        return Err(Error::SampleLength { expected: grid.n(), got: k.len() });
    }
    if !k.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let n = grid.n();
    let mut mat = -second_derivative_matrix(grid);
    for j in 0..n {
        mat[(j, j)] -= k[j];
    }
    // symmetrize away FFT round-off
    let mat = 0.5 * (&mat + mat.transpose());
    let eig = mat.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let lambda_min = eig.eigenvalues[order[0]];
    let lambda_2 = eig.eigenvalues[order[1]];
    let gap = lambda_2 - lambda_min;

    if lambda_min >= 0.0 {
        return Err(Error::NoInstabilityBand { lambda_min });
    }
    let threshold = 1e-10 * lambda_min.abs();
    if gap < threshold {
        return Err(Error::DegenerateGroundState { gap, threshold });
    }

    let mut phi: Vec<f64> = eig.eigenvectors.column(order[0]).iter().copied().collect();
    let mass: f64 = phi.iter().sum();
    if mass < 0.0 {
        for v in phi.iter_mut() {
            *v = -*v;
        }
    }
    if phi.iter().any(|&v| v <= 0.0) {
        return Err(Error::GroundStateSignChange);
    }
    // scale so the minimum value is exactly 1
    let min_val = phi.iter().cloned().fold(f64::INFINITY, f64::min);
    for v in phi.iter_mut() {
        *v /= min_val;
    }

    // eigen-residual sanity in the sup norm
    let ddphi = spectral_derivative(grid, &phi, 2)?;
    let mut resid = 0.0f64;
    let mut phimax = 0.0f64;
    for j in 0..n {
        resid = resid.max((-ddphi[j] - k[j] * phi[j] - lambda_min * phi[j]).abs());
        phimax = phimax.max(phi[j].abs());
    }
    if resid / phimax > 1e-8 {
        return Err(Error::EigensolveFailed);
    }

    Ok(SlResult { lambda_min, alpha_max: (-lambda_min).sqrt(), phi_s: phi, gap, grid: grid.clone() })
}

/// Convenience: K and the lowest eigenpair in one call.
pub fn ground_state(profile: &ShearProfile, u_s: f64) -> Result<SlResult> {
    let k = build_k(profile, u_s)?;
    lowest_eigenpair(profile.grid(), &k)
}
