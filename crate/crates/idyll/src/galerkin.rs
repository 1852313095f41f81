//! Sharp-cutoff Fourier truncation of the 2D Euler equations around a shear
//! steady state, realified and packaged for the Lyapunov-Perron machinery.
//!
//! The vorticity perturbation is expanded over modes e^{i j alpha x} e^{i beta m y}
//! with j in {0, +-1, +-2} and |m| <= N. Reality of the field identifies
//! (j, m) with (-j, -m), so the independent unknowns are the complex
//! coefficients for j = 1, 2 and the half-line of j = 0, a real state of
//! dimension (2 jmax + 1)(2N + 1). The linear part is block-diagonal over
//! the sectors; the quadratic part couples them through the truncated
//! convolution of -(v . grad) omega.

use crate::error::{Error, Result};
use crate::fft::C64;
use crate::fields::ShearProfile;
use crate::lp::{LpSystem, Propagator, RealSplit};
use crate::spectra::{self, DichotomySplit};
use nalgebra::{DMatrix, DVector};

const J_MAX: i64 = 2;

/// Complex coefficient table over j in 0..=J_MAX, m in -N..=N.
type Field = Vec<Vec<C64>>;

/// The truncated system: index maps, profile data, and the steady state.
pub struct GalerkinSystem {
    pub alpha: f64,
    pub beta: f64,
    pub n_modes: usize,
    pub dim: usize,
    /// Fourier coefficients of U indexed by signed mode offset
    u_modes: Vec<C64>,
    u_dd_modes: Vec<C64>,
    mode_span: i64,
}

impl GalerkinSystem {
    pub fn new(profile: &ShearProfile, alpha: f64, n_modes: usize) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::ParameterRange(format!("alpha must be positive, got {alpha}")));
        }
        if n_modes < 4 {
            return Err(Error::TruncationTooSmall(n_modes));
        }
        let beta = profile.grid().base_frequency();
        let n_grid = profile.grid().n();
        let coefs = crate::fft::coefficients(profile.u());
        let dd_coefs = crate::fft::coefficients(profile.ddu());
        let span = (n_grid / 2) as i64 - 1;
        let mut u_modes = vec![C64::new(0.0, 0.0); (2 * span + 1) as usize];
        let mut u_dd_modes = vec![C64::new(0.0, 0.0); (2 * span + 1) as usize];
        for k in -span..=span {
            let idx = k.rem_euclid(n_grid as i64) as usize;
            u_modes[(k + span) as usize] = coefs[idx];
            u_dd_modes[(k + span) as usize] = dd_coefs[idx];
        }
        let dim = (2 * J_MAX as usize + 1) * (2 * n_modes + 1);
        Ok(Self { alpha, beta, n_modes, dim, u_modes, u_dd_modes, mode_span: span })
    }

    fn u_mode(&self, k: i64) -> C64 {
        if k.abs() > self.mode_span {
            C64::new(0.0, 0.0)
        } else {
            self.u_modes[(k + self.mode_span) as usize]
        }
    }

    fn u_dd_mode(&self, k: i64) -> C64 {
        if k.abs() > self.mode_span {
            C64::new(0.0, 0.0)
        } else {
            self.u_dd_modes[(k + self.mode_span) as usize]
        }
    }

    fn blank(&self) -> Field {
        vec![vec![C64::new(0.0, 0.0); 2 * self.n_modes + 1]; J_MAX as usize + 1]
    }

    fn midx(&self, m: i64) -> usize {
        (m + self.n_modes as i64) as usize
    }

    /// Coefficient at (j, m) for any j in -J_MAX..=J_MAX via the reality
    /// identification.
    fn coef(&self, field: &Field, j: i64, m: i64) -> C64 {
        if m.abs() > self.n_modes as i64 || j.abs() > J_MAX {
            return C64::new(0.0, 0.0);
        }
        if j >= 0 {
            field[j as usize][self.midx(m)]
        } else {
            field[(-j) as usize][self.midx(-m)].conj()
        }
    }

    /// Unpack the real state vector into the coefficient table.
    pub fn unpack(&self, state: &DVector<f64>) -> Field {
        let n = self.n_modes;
        let mut f = self.blank();
        let mut pos = 0usize;
        // j = 0: m = 0 real, then (re, im) for m = 1..N
        f[0][self.midx(0)] = C64::new(state[pos], 0.0);
        pos += 1;
        for m in 1..=n as i64 {
            f[0][self.midx(m)] = C64::new(state[pos], state[pos + 1]);
            f[0][self.midx(-m)] = f[0][self.midx(m)].conj();
            pos += 2;
        }
        for j in 1..=J_MAX as usize {
            for m in -(n as i64)..=n as i64 {
                f[j][self.midx(m)] = C64::new(state[pos], state[pos + 1]);
                pos += 2;
            }
        }
        debug_assert_eq!(pos, self.dim);
        f
    }

    /// Pack a coefficient table into the real state vector, folding the j = 0
    /// reality constraint symmetrically.
    pub fn pack(&self, field: &Field) -> DVector<f64> {
        let n = self.n_modes;
        let mut state = DVector::zeros(self.dim);
        let mut pos = 0usize;
        state[pos] = field[0][self.midx(0)].re;
        pos += 1;
        for m in 1..=n as i64 {
            let folded = 0.5 * (field[0][self.midx(m)] + field[0][self.midx(-m)].conj());
            state[pos] = folded.re;
            state[pos + 1] = folded.im;
            pos += 2;
        }
        for j in 1..=J_MAX as usize {
            for m in -(n as i64)..=n as i64 {
                let c = field[j][self.midx(m)];
                state[pos] = c.re;
                state[pos + 1] = c.im;
                pos += 2;
            }
        }
        state
    }

    /// Streamfunction coefficient: psi = omega / (-|k|^2), zero mode gauged
    /// to zero.
    fn psi_coef(&self, omega: C64, j: i64, m: i64) -> C64 {
        let k2 = (j as f64 * self.alpha).powi(2) + (m as f64 * self.beta).powi(2);
        if k2 == 0.0 {
            C64::new(0.0, 0.0)
        } else {
            -omega / k2
        }
    }

    /// Linearization of -(v . grad) omega around the shear steady state:
    /// per sector j, -i j alpha U * omega + i j alpha U'' * psi (convolutions
    /// in m over the profile modes).
    pub fn apply_linear(&self, state: &DVector<f64>) -> DVector<f64> {
        let f = self.unpack(state);
        let mut out = self.blank();
        let n = self.n_modes as i64;
        for j in 0..=J_MAX {
            if j == 0 {
                continue; // neutral sector
            }
            let ja = j as f64 * self.alpha;
            for m in -n..=n {
                let mut acc = C64::new(0.0, 0.0);
                for mp in -n..=n {
                    let w = self.coef(&f, j, mp);
                    if w.norm_sqr() == 0.0 {
                        continue;
                    }
                    let conv_u = self.u_mode(m - mp);
                    let conv_dd = self.u_dd_mode(m - mp);
                    let psi = self.psi_coef(w, j, mp);
                    acc += C64::new(0.0, -ja) * conv_u * w + C64::new(0.0, ja) * conv_dd * psi;
                }
                out[j as usize][self.midx(m)] = acc;
            }
        }
        self.pack(&out)
    }

    /// The pure quadratic term F(z) = -(v_z . grad z) with the sharp cutoff.
    pub fn quadratic(&self, state: &DVector<f64>) -> DVector<f64> {
        let f = self.unpack(state);
        let mut out = self.blank();
        let n = self.n_modes as i64;
        // loop over the source mode (velocity factor) and the gradient factor
        for j1 in -J_MAX..=J_MAX {
            for m1 in -n..=n {
                let w1 = self.coef(&f, j1, m1);
                if w1.norm_sqr() < 1e-300 {
                    continue;
                }
                let psi1 = self.psi_coef(w1, j1, m1);
                if psi1.norm_sqr() < 1e-300 {
                    continue;
                }
                // v = (-psi_y, psi_x) = (-i beta m1 psi, i j1 alpha psi)
                let vx = C64::new(0.0, -(m1 as f64) * self.beta) * psi1;
                let vy = C64::new(0.0, (j1 as f64) * self.alpha) * psi1;
                for j2 in -J_MAX..=J_MAX {
                    let jt = j1 + j2;
                    if !(0..=J_MAX).contains(&jt) {
                        continue; // output folded onto j >= 0 by reality
                    }
                    for m2 in -n..=n {
                        let mt = m1 + m2;
                        if mt.abs() > n {
                            continue;
                        }
                        let w2 = self.coef(&f, j2, m2);
                        if w2.norm_sqr() < 1e-300 {
                            continue;
                        }
                        // grad omega = (i j2 alpha, i beta m2) w2
                        let adv = vx * C64::new(0.0, (j2 as f64) * self.alpha) * w2
                            + vy * C64::new(0.0, (m2 as f64) * self.beta) * w2;
                        out[jt as usize][self.midx(mt)] -= adv;
                    }
                }
            }
        }
        self.pack(&out)
    }

    /// Energy (squared L^2 norm of the velocity) of a perturbation state.
    pub fn energy(&self, state: &DVector<f64>) -> f64 {
        let f = self.unpack(state);
        let n = self.n_modes as i64;
        let mut e = 0.0;
        for j in -J_MAX..=J_MAX {
            for m in -n..=n {
                let k2 = (j as f64 * self.alpha).powi(2) + (m as f64 * self.beta).powi(2);
                if k2 == 0.0 {
                    continue;
                }
                e += self.coef(&f, j, m).norm_sqr() / k2;
            }
        }
        e
    }

    /// Enstrophy (squared L^2 norm of the vorticity).
    pub fn enstrophy(&self, state: &DVector<f64>) -> f64 {
        let f = self.unpack(state);
        let n = self.n_modes as i64;
        let mut e = 0.0;
        for j in -J_MAX..=J_MAX {
            for m in -n..=n {
                e += self.coef(&f, j, m).norm_sqr();
            }
        }
        e
    }

    /// Energy pairing <a, b>_{1/|k|^2} used by the conservation checks.
    pub fn energy_pairing(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let fa = self.unpack(a);
        let fb = self.unpack(b);
        let n = self.n_modes as i64;
        let mut acc = 0.0;
        for j in -J_MAX..=J_MAX {
            for m in -n..=n {
                let k2 = (j as f64 * self.alpha).powi(2) + (m as f64 * self.beta).powi(2);
                if k2 == 0.0 {
                    continue;
                }
                acc += (self.coef(&fa, j, m) * self.coef(&fb, j, m).conj()).re / k2;
            }
        }
        acc
    }

    /// Plain L^2 pairing.
    pub fn enstrophy_pairing(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let fa = self.unpack(a);
        let fb = self.unpack(b);
        let n = self.n_modes as i64;
        let mut acc = 0.0;
        for j in -J_MAX..=J_MAX {
            for m in -n..=n {
                acc += (self.coef(&fa, j, m) * self.coef(&fb, j, m).conj()).re;
            }
        }
        acc
    }

    /// The steady vorticity omega_0 = -U'(y) packed as a state (j = 0 row).
    pub fn steady_state(&self) -> DVector<f64> {
        let mut f = self.blank();
        let n = self.n_modes as i64;
        for m in -n..=n {
            if m == 0 {
                continue;
            }
            // omega0_hat(m) = -(i beta m) U_hat(m)
            f[0][self.midx(m)] = C64::new(0.0, -(m as f64) * self.beta) * self.u_mode(m);
        }
        self.pack(&f)
    }

    /// Dense matrix of the linearization.
    pub fn linear_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.dim, self.dim);
        let mut e = DVector::zeros(self.dim);
        for jcol in 0..self.dim {
            e[jcol] = 1.0;
            let col = self.apply_linear(&e);
            a.column_mut(jcol).copy_from(&col);
            e[jcol] = 0.0;
        }
        a
    }
}

/// Everything the manifold construction needs about the truncated system.
pub struct GalerkinLp {
    pub lp: LpSystem,
    pub system: GalerkinSystem,
    pub split_complex: DichotomySplit,
    pub leading_rate: f64,
    pub c0: f64,
    pub c1: f64,
}

/// Build the Lyapunov-Perron system for the truncated 2D Euler equations
/// around the given shear profile: linear dichotomy split at the given rates
/// and the quadratic constant measured on sampled directions.
pub fn galerkin_reduce(
    profile: &ShearProfile,
    alpha: f64,
    n_modes: usize,
    lambda_cs: f64,
    lambda_u: f64,
) -> Result<GalerkinLp> {
    let system = GalerkinSystem::new(profile, alpha, n_modes)?;
    let a = system.linear_matrix();
    let a_c = DMatrix::from_fn(system.dim, system.dim, |i, j| C64::new(a[(i, j)], 0.0));
    let split_complex = spectra::split_matrix(&a_c, lambda_cs, lambda_u)?;
    let split = RealSplit::from_complex(&split_complex, &a)?;

    // measured constants: C0 from the dichotomy, C1 from sampled directions
    // of the quadratic term in the oblique coordinates actually used
    let c0 = split.m_const.max(1.0);
    let mut c1 = 0.0f64;
    for i in 0..100 {
        let mut z = DVector::zeros(system.dim);
        for k in 0..system.dim {
            z[k] = 2.0 * crate::fields::halton((i + 1) * (k + 2), 3) - 1.0;
        }
        z /= z.norm();
        let fz = system.quadratic(&z);
        let fu = (&split.w_u * &fz).norm();
        let fcs = (&split.w_cs * &fz).norm();
        c1 = c1.max(fu.max(fcs));
    }
    let leading_rate = split
        .restricted_u
        .complex_eigenvalues()
        .iter()
        .fold(0.0f64, |acc, l| acc.max(l.re));

    let sys2 = GalerkinSystem::new(profile, alpha, n_modes)?;
    let nonlinearity = move |_t: f64, z: &DVector<f64>| sys2.quadratic(z);
    let lp = LpSystem::new(
        split,
        Propagator::Autonomous(a),
        Box::new(nonlinearity),
        c0,
        c1,
        0.0,
        0.0,
    )?;
    Ok(GalerkinLp { lp, system, split_complex, leading_rate, c0, c1 })
}

/// Default dichotomy rates for a profile: 0.01 and 0.9 of the leading real
/// part of the truncated linearization.
pub fn default_rates(profile: &ShearProfile, alpha: f64, n_modes: usize) -> Result<(f64, f64)> {
    let system = GalerkinSystem::new(profile, alpha, n_modes)?;
    let a = system.linear_matrix();
    let a_c = DMatrix::from_fn(system.dim, system.dim, |i, j| C64::new(a[(i, j)], 0.0));
    let evs = spectra::eigenvalues(&a_c)?;
    let top = evs.iter().fold(0.0f64, |acc, l| acc.max(l.re));
    if top <= 0.0 {
        return Err(Error::NoInstabilityBand { lambda_min: top });
    }
    Ok((0.01 * top, 0.9 * top))
}
