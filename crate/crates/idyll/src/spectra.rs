//! Linearized Euler operators as finite matrices, their spectra, and the
//! exponential-dichotomy splitting.
//!
//! Two assemblies: the 2D vorticity-form operator per x-wavenumber sector,
//! and the 3D-shear modal operator with the pressure eliminated by the modal
//! divergence-free projector. The dichotomy split orders a complex Schur
//! form to extract invariant subspaces and measures the constant M on the
//! restricted propagators.

use crate::error::{Error, Result};
use crate::fft::{self, C64};
use crate::fields::{PeriodicGrid1D, ShearProfile};
use nalgebra::DMatrix;

/// Which operator a [`ModalOperator`] matrix represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    PlanarVorticity,
    Shear3dModal,
}

/// A dense complex matrix representing a linearized Euler operator on
/// truncated Fourier coefficients.
#[derive(Debug, Clone)]
pub struct ModalOperator {
    pub alpha: f64,
    pub matrix: DMatrix<C64>,
    pub n_modes: usize,
    pub kind: OperatorKind,
}

/// The exponential-dichotomy data of a matrix: invariant bases, spectral
/// projections, rates, and the measured constant M.
#[derive(Debug, Clone)]
pub struct DichotomySplit {
    pub lambda_u: f64,
    pub lambda_cs: f64,
    /// Orthonormal basis of the unstable invariant subspace (n x r).
    pub basis_u: DMatrix<C64>,
    /// Orthonormal basis of the center-stable invariant subspace (n x (n-r)).
    pub basis_cs: DMatrix<C64>,
    pub proj_u: DMatrix<C64>,
    pub proj_cs: DMatrix<C64>,
    /// max over the sampled t-grid of |e^{t L_cs}| e^{-lambda_cs t} and
    /// |e^{-t L_u}| e^{lambda_u t}.
    pub m_const: f64,
    /// Restriction of the operator to basis_u coordinates (r x r).
    pub restricted_u: DMatrix<C64>,
    /// Restriction to basis_cs coordinates.
    pub restricted_cs: DMatrix<C64>,
}

impl DichotomySplit {
    pub fn rank_u(&self) -> usize {
        self.basis_u.ncols()
    }
}

/// Toeplitz convolution entry source: Fourier coefficients of a profile
/// indexed by signed mode, zero outside the resolved band.
struct ModeTable {
    coefs: Vec<C64>,
    n: usize,
}

impl ModeTable {
    fn new(samples: &[f64]) -> Self {
        Self { coefs: fft::coefficients(samples), n: samples.len() }
    }

    fn get(&self, m: i64) -> C64 {
        let half = (self.n / 2) as i64;
        if m.abs() > half {
            return C64::new(0.0, 0.0);
        }
        // drop the unresolved Nyquist bin
        if self.n % 2 == 0 && m.abs() == half {
            return C64::new(0.0, 0.0);
        }
        let idx = m.rem_euclid(self.n as i64) as usize;
        self.coefs[idx]
    }
}

/// Assemble the 2D vorticity operator in the e^{i alpha x} sector:
/// omega_t = -i alpha U omega + i alpha U'' psi with (d_yy - alpha^2) psi = omega,
/// over y-modes |m| <= n_modes.
pub fn assemble_planar(profile: &ShearProfile, alpha: f64, n_modes: usize) -> Result<ModalOperator> {
    if alpha == 0.0 {
        return Err(Error::AlphaZero);
    }
    if !(alpha > 0.0) {
        return Err(Error::ParameterRange(format!("alpha must be positive, got {alpha}")));
    }
    if n_modes < 16 {
        return Err(Error::TruncationTooSmall(n_modes));
    }
    let beta = profile.grid().base_frequency();
    let u = ModeTable::new(profile.u());
    let ddu = ModeTable::new(profile.ddu());
    let nm = n_modes as i64;
    let dim = 2 * n_modes + 1;
    let idx = |m: i64| (m + nm) as usize;
    let mut a = DMatrix::<C64>::zeros(dim, dim);
    for m in -nm..=nm {
        for mp in -nm..=nm {
            let conv_u = u.get(m - mp);
            let conv_ddu = ddu.get(m - mp);
            if conv_u.norm() == 0.0 && conv_ddu.norm() == 0.0 {
                continue;
            }
            let km = beta * mp as f64;
            let poisson = -1.0 / (km * km + alpha * alpha);
            let val = C64::new(0.0, -alpha) * conv_u
                + C64::new(0.0, alpha) * conv_ddu * C64::new(poisson, 0.0);
            a[(idx(m), idx(mp))] += val;
        }
    }
    Ok(ModalOperator { alpha, matrix: a, n_modes, kind: OperatorKind::PlanarVorticity })
}

/// 2D Fourier coefficients of real samples laid out `[iy + ny * iz]`.
fn coefficients_2d(ny: usize, nz: usize, samples: &[f64]) -> Vec<C64> {
    let mut data: Vec<C64> = samples.iter().map(|&x| C64::new(x, 0.0)).collect();
    for iz in 0..nz {
        fft::fft(&mut data[iz * ny..(iz + 1) * ny]);
    }
    let mut col = vec![C64::new(0.0, 0.0); nz];
    for iy in 0..ny {
        for iz in 0..nz {
            col[iz] = data[iy + ny * iz];
        }
        fft::fft(&mut col);
        for iz in 0..nz {
            data[iy + ny * iz] = col[iz];
        }
    }
    let scale = 1.0 / (ny * nz) as f64;
    for v in data.iter_mut() {
        *v *= scale;
    }
    data
}

struct ModeTable2D {
    coefs: Vec<C64>,
    ny: usize,
    nz: usize,
}

impl ModeTable2D {
    fn new(ny: usize, nz: usize, samples: &[f64]) -> Self {
        Self { coefs: coefficients_2d(ny, nz, samples), ny, nz }
    }

    fn get(&self, p: i64, q: i64) -> C64 {
        let hy = (self.ny / 2) as i64;
        let hz = (self.nz / 2) as i64;
        if p.abs() >= hy || q.abs() >= hz {
            return C64::new(0.0, 0.0);
        }
        let iy = p.rem_euclid(self.ny as i64) as usize;
        let iz = q.rem_euclid(self.nz as i64) as usize;
        self.coefs[iy + self.ny * iz]
    }
}

/// Assemble the 3D-shear modal operator for u0 = (U(y,z), 0, 0) in the
/// e^{i alpha x} sector. Unknowns are the two transverse polarizations of the
/// divergence-free velocity per (y,z)-mode; the pressure is eliminated by the
/// modal Leray projector. Eigenvalues relate to phase speeds by
/// lambda = -i alpha c.
pub fn assemble_shear3d(
    grid_y: &PeriodicGrid1D,
    grid_z: &PeriodicGrid1D,
    u_samples: &[f64],
    alpha: f64,
    n_modes: usize,
) -> Result<ModalOperator> {
    assemble_shear3d_rect(grid_y, grid_z, u_samples, alpha, n_modes, n_modes)
}

/// [`assemble_shear3d`] with independent truncations in y and z; useful when
/// the profile couples the two directions very unevenly.
pub fn assemble_shear3d_rect(
    grid_y: &PeriodicGrid1D,
    grid_z: &PeriodicGrid1D,
    u_samples: &[f64],
    alpha: f64,
    n_modes_y: usize,
    n_modes_z: usize,
) -> Result<ModalOperator> {
    if alpha == 0.0 {
        return Err(Error::AlphaZero);
    }
    if !(alpha > 0.0) {
        return Err(Error::ParameterRange(format!("alpha must be positive, got {alpha}")));
    }
    let (ny, nz) = (grid_y.n(), grid_z.n());
    if u_samples.len() != ny * nz {
        return Err(Error::SampleLength { expected: ny * nz, got: u_samples.len() });
    }
    let beta_y = grid_y.base_frequency();
    let beta_z = grid_z.base_frequency();
    let table = ModeTable2D::new(ny, nz, u_samples);
    let nmy = n_modes_y as i64;
    let nmz = n_modes_z as i64;
    let side_y = 2 * n_modes_y + 1;
    let side_z = 2 * n_modes_z + 1;
    let dim = 2 * side_y * side_z;

    // orthonormal polarization pair perpendicular to k = (alpha, ky, kz)
    let polarization = |ky: f64, kz: f64| -> ([f64; 3], [f64; 3]) {
        let k = [alpha, ky, kz];
        let kn = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
        let khat = [k[0] / kn, k[1] / kn, k[2] / kn];
        // e1 = normalize(khat x ex) unless degenerate (never: alpha > 0 means
        // khat is not parallel to ex only when ky = kz = 0; handle that case)
        let (e1, e2);
        if ky == 0.0 && kz == 0.0 {
            e1 = [0.0, 1.0, 0.0];
            e2 = [0.0, 0.0, 1.0];
        } else {
            let cross = [0.0, khat[2], -khat[1]]; // khat x ex
            let cn = (cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
            e1 = [0.0, cross[1] / cn, cross[2] / cn];
            e2 = [
                khat[1] * e1[2] - khat[2] * e1[1],
                khat[2] * e1[0] - khat[0] * e1[2],
                khat[0] * e1[1] - khat[1] * e1[0],
            ];
        }
        (e1, e2)
    };

    let mode_of = |p: i64, q: i64| ((p + nmy) + (q + nmz) * (2 * nmy + 1)) as usize;
    let mut a = DMatrix::<C64>::zeros(dim, dim);
    for qp in -nmz..=nmz {
        for pp in -nmy..=nmy {
            let (f1, f2) = polarization(beta_y * pp as f64, beta_z * qp as f64);
            for (jcol, f) in [f1, f2].iter().enumerate() {
                let col = 2 * mode_of(pp, qp) + jcol;
                // action of the advection + stretching on amplitude f at (pp, qp):
                // output at mode (p, q) = -i alpha U_{p-pp, q-qp} * f
                //   - e_x ((i beta_y (p-pp)) U v + (i beta_z (q-qp)) U w)
                for q in -nmz..=nmz {
                    for p in -nmy..=nmy {
                        let coef = table.get(p - pp, q - qp);
                        if coef.norm() == 0.0 {
                            continue;
                        }
                        let mut g = [
                            C64::new(0.0, -alpha) * coef * C64::new(f[0], 0.0),
                            C64::new(0.0, -alpha) * coef * C64::new(f[1], 0.0),
                            C64::new(0.0, -alpha) * coef * C64::new(f[2], 0.0),
                        ];
                        // stretching term: -(v U_y + w U_z) in the x-component
                        let uy = C64::new(0.0, beta_y * (p - pp) as f64) * coef;
                        let uz = C64::new(0.0, beta_z * (q - qp) as f64) * coef;
                        g[0] -= uy * C64::new(f[1], 0.0) + uz * C64::new(f[2], 0.0);
                        // project onto the divergence-free subspace at (p, q)
                        let ky = beta_y * p as f64;
                        let kz = beta_z * q as f64;
                        let k = [alpha, ky, kz];
                        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
                        let kg = g[0] * C64::new(k[0], 0.0)
                            + g[1] * C64::new(k[1], 0.0)
                            + g[2] * C64::new(k[2], 0.0);
                        for i in 0..3 {
                            g[i] -= kg * C64::new(k[i] / k2, 0.0);
                        }
                        let (e1, e2) = polarization(ky, kz);
                        let row0 = 2 * mode_of(p, q);
                        for (jrow, e) in [e1, e2].iter().enumerate() {
                            let val = g[0] * C64::new(e[0], 0.0)
                                + g[1] * C64::new(e[1], 0.0)
                                + g[2] * C64::new(e[2], 0.0);
                            if val.norm() != 0.0 {
                                a[(row0 + jrow, col)] += val;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(ModalOperator { alpha, matrix: a, n_modes: n_modes_y, kind: OperatorKind::Shear3dModal })
}

/// Complex Schur decomposition a = q t q^H with t upper triangular.
fn schur_complex(a: &DMatrix<C64>) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    let schur = a
        .clone()
        .try_schur(1e-14, 100_000)
        .ok_or(Error::EigensolveFailed)?;
    let (q, mut t) = schur.unpack();
    let n = t.nrows();
    for i in 0..n {
        for j in 0..i {
            t[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    Ok((q, t))
}

/// Eigenvalues of a complex matrix via the Schur form.
pub fn eigenvalues(a: &DMatrix<C64>) -> Result<Vec<C64>> {
    let (_, t) = schur_complex(a)?;
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Full spectrum sorted by decreasing real part, with the count above the
/// threshold.
pub fn unstable_spectrum(op: &ModalOperator, threshold: f64) -> Result<(Vec<C64>, usize)> {
    let mut evs = eigenvalues(&op.matrix)?;
    evs.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    let count = evs.iter().filter(|l| l.re > threshold).count();
    Ok((evs, count))
}

/// Swap adjacent diagonal entries k, k+1 of an upper-triangular t with a
/// unitary similarity, accumulating into q.
fn swap_adjacent(q: &mut DMatrix<C64>, t: &mut DMatrix<C64>, k: usize) {
    let t11 = t[(k, k)];
    let t12 = t[(k, k + 1)];
    let t22 = t[(k + 1, k + 1)];
    // eigenvector of [[t11, t12], [0, t22]] for eigenvalue t22
    let v = (t12, t22 - t11);
    let vn = (v.0.norm_sqr() + v.1.norm_sqr()).sqrt();
    if vn < 1e-300 {
        return; // equal eigenvalues with zero coupling: nothing to do
    }
    let c0 = v.0 / C64::new(vn, 0.0);
    let c1 = v.1 / C64::new(vn, 0.0);
    // unitary g = [[c0, -conj(c1)], [c1, conj(c0)]]
    let g = [[c0, -c1.conj()], [c1, c0.conj()]];
    let n = t.nrows();
    // t <- g^H t g on rows/cols k, k+1
    for j in 0..n {
        let a = t[(k, j)];
        let b = t[(k + 1, j)];
        t[(k, j)] = g[0][0].conj() * a + g[1][0].conj() * b;
        t[(k + 1, j)] = g[0][1].conj() * a + g[1][1].conj() * b;
    }
    for i in 0..n {
        let a = t[(i, k)];
        let b = t[(i, k + 1)];
        t[(i, k)] = a * g[0][0] + b * g[1][0];
        t[(i, k + 1)] = a * g[0][1] + b * g[1][1];
    }
    for i in 0..n {
        let a = q[(i, k)];
        let b = q[(i, k + 1)];
        q[(i, k)] = a * g[0][0] + b * g[1][0];
        q[(i, k + 1)] = a * g[0][1] + b * g[1][1];
    }
    t[(k + 1, k)] = C64::new(0.0, 0.0);
}

/// Reorder a Schur form so that the selected eigenvalues come first. Returns
/// the number selected.
fn reorder_schur(
    q: &mut DMatrix<C64>,
    t: &mut DMatrix<C64>,
    select: impl Fn(C64) -> bool,
) -> usize {
    let n = t.nrows();
    let mut target = 0usize;
    for i in 0..n {
        if select(t[(i, i)]) {
            let mut pos = i;
            while pos > target {
                swap_adjacent(q, t, pos - 1);
                pos -= 1;
            }
            target += 1;
        }
    }
    target
}


/// Largest entry modulus of a complex matrix.
fn camax(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.norm()))
}

/// Operator 2-norm via SVD.
fn op_norm(m: &DMatrix<C64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0f64, |a, &s| a.max(s))
}

/// Matrix exponential powers e^{k dt A} for k = 0..=steps.
fn exp_powers(a: &DMatrix<C64>, dt: f64, steps: usize) -> Vec<DMatrix<C64>> {
    let n = a.nrows();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(DMatrix::identity(n, n));
    if n == 0 || steps == 0 {
        return out;
    }
    let e = (a * C64::new(dt, 0.0)).exp();
    for k in 1..=steps {
        let next = &out[k - 1] * &e;
        out.push(next);
    }
    out
}

/// Construct the dichotomy split of a modal operator at the given rates.
///
/// Preconditions: lambda_u > lambda_cs and no eigenvalue real part inside
/// [lambda_cs, lambda_u]. M is measured on t in {0, 0.5, ..., 10}.
pub fn dichotomy_split(op: &ModalOperator, lambda_cs: f64, lambda_u: f64) -> Result<DichotomySplit> {
    split_matrix(&op.matrix, lambda_cs, lambda_u)
}

/// [`dichotomy_split`] on a raw matrix.
pub fn split_matrix(a: &DMatrix<C64>, lambda_cs: f64, lambda_u: f64) -> Result<DichotomySplit> {
    if !(lambda_u > lambda_cs) {
        return Err(Error::BadRates { lambda_u, lambda_cs });
    }
    let n = a.nrows();
    let (mut q, mut t) = schur_complex(a)?;
    for i in 0..n {
        let ev = t[(i, i)];
        if ev.re >= lambda_cs && ev.re <= lambda_u {
            return Err(Error::SpectralGapViolated { re: ev.re, im: ev.im, lambda_cs, lambda_u });
        }
    }
    let mid = 0.5 * (lambda_cs + lambda_u);
    let r = reorder_schur(&mut q, &mut t, |ev| ev.re > mid);
    let basis_u = q.columns(0, r).into_owned();

    // second ordering for the center-stable basis
    let (mut q2, mut t2) = (q.clone(), t.clone());
    let r_cs = reorder_schur(&mut q2, &mut t2, |ev| ev.re < mid);
    debug_assert_eq!(r + r_cs, n);
    let basis_cs = q2.columns(0, r_cs).into_owned();

    // complementary projections from the combined basis inverse
    let mut combined = DMatrix::<C64>::zeros(n, n);
    combined.view_mut((0, 0), (n, r)).copy_from(&basis_u);
    combined.view_mut((0, r), (n, r_cs)).copy_from(&basis_cs);
    let inv = combined
        .clone()
        .lu()
        .solve(&DMatrix::identity(n, n))
        .ok_or(Error::EigensolveFailed)?;
    let w_u = inv.rows(0, r).into_owned();
    let w_cs = inv.rows(r, r_cs).into_owned();
    let proj_u = &basis_u * &w_u;
    let proj_cs = &basis_cs * &w_cs;

    let restricted_u = basis_u.adjoint() * a * &basis_u;
    let restricted_cs = basis_cs.adjoint() * a * &basis_cs;

    // measure M on the t-grid {0, 0.5, ..., 10}
    let steps = 20usize;
    let dt = 0.5;
    let mut m_const = 1.0f64;
    if r_cs > 0 {
        let powers = exp_powers(&restricted_cs, dt, steps);
        for (k, p) in powers.iter().enumerate() {
            let t_k = k as f64 * dt;
            m_const = m_const.max(op_norm(p) * (-lambda_cs * t_k).exp());
        }
    }
    if r > 0 {
        let powers = exp_powers(&restricted_u, -dt, steps);
        for (k, p) in powers.iter().enumerate() {
            let t_k = k as f64 * dt;
            m_const = m_const.max(op_norm(p) * (lambda_u * t_k).exp());
        }
    }

    let split = DichotomySplit {
        lambda_u,
        lambda_cs,
        basis_u,
        basis_cs,
        proj_u,
        proj_cs,
        m_const,
        restricted_u,
        restricted_cs,
    };
    verify_split(a, &split)?;
    Ok(split)
}

/// Internal consistency of a freshly built split.
fn verify_split(a: &DMatrix<C64>, s: &DichotomySplit) -> Result<()> {
    let n = a.nrows();
    let id = DMatrix::<C64>::identity(n, n);
    let sum_err = camax(&(&s.proj_u + &s.proj_cs - id));
    let idem_u = camax(&(&s.proj_u * &s.proj_u - &s.proj_u));
    let idem_cs = camax(&(&s.proj_cs * &s.proj_cs - &s.proj_cs));
    if sum_err > 1e-10 || idem_u > 1e-10 || idem_cs > 1e-10 {
        return Err(Error::EigensolveFailed);
    }
    let scale = camax(a).max(1.0);
    let comm = camax(&(&s.proj_u * a - a * &s.proj_u)) / scale;
    if comm > 1e-8 {
        return Err(Error::EigensolveFailed);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rayleigh;
    use nalgebra::DVector;
    use std::f64::consts::PI;

    fn cm(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sin_profile() -> ShearProfile {
        ShearProfile::sinusoid(128, 2.0 * PI).unwrap()
    }

    #[test]
    fn zero_profile_gives_zero_matrix() {
        let grid = PeriodicGrid1D::new(64, 2.0 * PI).unwrap();
        let p = ShearProfile::from_samples(grid, vec![0.0; 64]).unwrap();
        let op = assemble_planar(&p, 1.0, 16).unwrap();
        assert!(super::camax(&op.matrix) == 0.0);
    }

    #[test]
    fn constant_profile_is_diagonal_advection() {
        let grid = PeriodicGrid1D::new(64, 2.0 * PI).unwrap();
        let p = ShearProfile::from_samples(grid, vec![1.0; 64]).unwrap();
        let op = assemble_planar(&p, 1.0, 16).unwrap();
        for i in 0..op.matrix.nrows() {
            for j in 0..op.matrix.ncols() {
                if i == j {
                    assert!((op.matrix[(i, j)] - cm(0.0, -1.0)).norm() < 1e-12);
                } else {
                    assert!(op.matrix[(i, j)].norm() < 1e-12);
                }
            }
        }
        let (evs, count) = unstable_spectrum(&op, 0.0).unwrap();
        assert_eq!(count, 0);
        assert!(evs.iter().all(|l| l.re.abs() < 1e-10));
    }

    #[test]
    fn alpha_zero_refused() {
        let p = sin_profile();
        assert!(matches!(assemble_planar(&p, 0.0, 16), Err(Error::AlphaZero)));
    }

    #[test]
    fn sin_profile_has_one_unstable_sector_eigenvalue() {
        // one unstable eigenvalue per complex sector; its count is confirmed
        // by the argument-principle oracle on the shooting discriminant
        let p = sin_profile();
        let op = assemble_planar(&p, 0.8, 64).unwrap();
        let (evs, count) = unstable_spectrum(&op, 1e-8).unwrap();
        assert_eq!(count, 1, "top: {:?}", &evs[..3]);
        let w = rayleigh::winding_number(&p, 0.0, 0.64, (-0.5, 0.5), (1e-3, 0.8), 16).unwrap();
        assert_eq!(w as usize, count);
    }

    #[test]
    fn shooting_and_galerkin_rates_agree() {
        let p = sin_profile();
        for &(alpha, im_seed) in &[(0.3, 0.55), (0.5, 0.45), (0.8, 0.3)] {
            let mode = rayleigh::find_unstable_mode(&p, 0.0, alpha, cm(0.0, im_seed)).unwrap();
            let op = assemble_planar(&p, alpha, 64).unwrap();
            let (evs, _) = unstable_spectrum(&op, 0.0).unwrap();
            let top = evs[0];
            let rel = (mode.growth_rate - top.re).abs() / mode.growth_rate;
            assert!(rel <= 1e-3, "alpha {alpha}: {} vs {}", mode.growth_rate, top.re);
        }
    }

    #[test]
    fn resolution_convergence_of_leading_eigenvalue() {
        let p = sin_profile();
        let lead = |n_modes: usize| {
            let op = assemble_planar(&p, 0.8, n_modes).unwrap();
            unstable_spectrum(&op, 0.0).unwrap().0[0]
        };
        let a = lead(64);
        let b = lead(128);
        assert!((a - b).norm() <= 1e-8, "{a} vs {b}");
    }

    #[test]
    fn spectrum_is_conjugation_symmetric() {
        let p = sin_profile();
        let op = assemble_planar(&p, 0.8, 32).unwrap();
        let (evs, _) = unstable_spectrum(&op, 0.0).unwrap();
        for &l in &evs {
            let best = evs
                .iter()
                .map(|&m| (m - l.conj()).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(best <= 1e-8, "missing conjugate of {l}");
        }
    }

    #[test]
    fn sin_beta_profiles_are_unstable() {
        for &beta in &[1.2f64, 1.5] {
            let p = ShearProfile::sin_beta(128, beta).unwrap();
            let mut found = false;
            for &frac in &[0.4, 0.6, 0.8] {
                let alpha = frac * beta;
                let op = assemble_planar(&p, alpha, 32).unwrap();
                let (_, count) = unstable_spectrum(&op, 1e-8).unwrap();
                if count > 0 {
                    found = true;
                    break;
                }
            }
            assert!(found, "no unstable sector found for beta = {beta}");
        }
    }

    #[test]
    fn diagonal_unstable_count() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![
            cm(1.0, 0.0),
            cm(-1.0, 0.0),
            cm(0.0, 3.0),
        ]));
        let op = ModalOperator { alpha: 1.0, matrix: m, n_modes: 1, kind: OperatorKind::PlanarVorticity };
        let (evs, count) = unstable_spectrum(&op, 0.0).unwrap();
        assert_eq!(count, 1);
        assert!((evs[0] - cm(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn shear3d_z_independent_contains_planar_spectrum() {
        let p = sin_profile();
        let gy = PeriodicGrid1D::new(32, 2.0 * PI).unwrap();
        let gz = PeriodicGrid1D::new(32, 2.0 * PI).unwrap();
        let mut u = vec![0.0; 32 * 32];
        for iz in 0..32 {
            for (iy, &y) in gy.nodes().iter().enumerate() {
                u[iy + 32 * iz] = y.sin();
            }
        }
        let op3 = assemble_shear3d_rect(&gy, &gz, &u, 0.8, 16, 2).unwrap();
        let op2 = assemble_planar(&p, 0.8, 16).unwrap();
        let (ev3, _) = unstable_spectrum(&op3, 0.0).unwrap();
        let (ev2, _) = unstable_spectrum(&op2, 0.0).unwrap();
        for &l2 in &ev2 {
            let best = ev3.iter().map(|&l3| (l3 - l2).norm()).fold(f64::INFINITY, f64::min);
            assert!(best <= 1e-8, "planar eigenvalue {l2} missing from 3D spectrum (gap {best})");
        }
    }

    #[test]
    fn shear3d_perturbation_moves_eigenvalue_linearly() {
        let gy = PeriodicGrid1D::new(32, 2.0 * PI).unwrap();
        let gz = PeriodicGrid1D::new(32, 2.0 * PI).unwrap();
        let alpha = 0.8;
        let lead_c = |eps: f64| {
            let mut u = vec![0.0; 32 * 32];
            for (iz, &z) in gz.nodes().iter().enumerate() {
                for (iy, &y) in gy.nodes().iter().enumerate() {
                    u[iy + 32 * iz] = y.sin() + eps * z.sin();
                }
            }
            let op = assemble_shear3d_rect(&gy, &gz, &u, alpha, 16, 4).unwrap();
            let (evs, _) = unstable_spectrum(&op, 0.0).unwrap();
            // c = i lambda / alpha
            C64::new(0.0, 1.0) * evs[0] / C64::new(alpha, 0.0)
        };
        let c0 = lead_c(0.0);
        let amps = [0.02, 0.05, 0.1];
        let mut shifts = Vec::new();
        for &eps in &amps {
            shifts.push((lead_c(eps) - c0).norm());
        }
        assert!(shifts[0] < shifts[1] && shifts[1] < shifts[2], "{shifts:?}");
        // the sin z perturbation has no first-order overlap with the
        // unperturbed mode, so the shift is quadratic in the amplitude;
        // extrapolate with the constant fit from the two smallest
        let k_fit = (shifts[0] / (amps[0] * amps[0])).max(shifts[1] / (amps[1] * amps[1])) * 1.3;
        assert!(shifts[2] <= k_fit * amps[2] * amps[2], "{} vs {}", shifts[2], k_fit * amps[2] * amps[2]);
        // the acceptance-scale linear envelope still holds at every amplitude
        for (i, &eps) in amps.iter().enumerate() {
            assert!(shifts[i] <= 5.0 * eps);
        }
    }

    #[test]
    fn split_of_diagonal_matrix() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![cm(2.0, 0.0), cm(-1.0, 0.0)]));
        let s = split_matrix(&m, 0.0, 1.0).unwrap();
        assert_eq!(s.rank_u(), 1);
        assert!((s.proj_u[(0, 0)] - cm(1.0, 0.0)).norm() < 1e-12);
        assert!(s.proj_u[(1, 1)].norm() < 1e-12);
        assert!((s.m_const - 1.0).abs() < 1e-10);
    }

    #[test]
    fn split_of_planar_operator() {
        let p = sin_profile();
        let op = assemble_planar(&p, 0.8, 48).unwrap();
        let (evs, _) = unstable_spectrum(&op, 0.0).unwrap();
        let top = evs[0].re;
        let s = dichotomy_split(&op, 0.01 * top, 0.9 * top).unwrap();
        assert_eq!(s.rank_u(), 1);
        // dichotomy inequalities on the sampled grid with the measured M
        let r_cs = &s.restricted_cs;
        for k in 0..=20 {
            let t = 0.5 * k as f64;
            let e = (r_cs * cm(t, 0.0)).exp();
            assert!(op_norm(&e) <= s.m_const * (s.lambda_cs * t).exp() + 1e-9);
        }
        let r_u = &s.restricted_u;
        for k in 0..=20 {
            let t = 0.5 * k as f64;
            let e = (r_u * cm(-t, 0.0)).exp();
            assert!(op_norm(&e) <= s.m_const * (-s.lambda_u * t).exp() + 1e-9);
        }
    }

    #[test]
    fn split_detects_gap_violation() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![cm(0.5, 0.0), cm(-1.0, 0.0)]));
        assert!(matches!(
            split_matrix(&m, 0.0, 1.0),
            Err(Error::SpectralGapViolated { .. })
        ));
    }

    #[test]
    fn jordan_block_shows_nonnormal_transient() {
        // defective block: with the rate close to the eigenvalue the
        // transient of e^{-tA} makes M exceed 1 on the grid
        let m = DMatrix::from_row_slice(2, 2, &[cm(1.0, 0.0), cm(1.0, 0.0), cm(0.0, 0.0), cm(1.0, 0.0)]);
        let s = split_matrix(&m, 0.0, 0.9).unwrap();
        assert_eq!(s.rank_u(), 2);
        assert!(s.m_const > 1.0, "M = {}", s.m_const);
        // with generous slack the polynomial transient is fully absorbed and
        // the measured constant collapses to 1
        let s2 = split_matrix(&m, 0.0, 0.5).unwrap();
        assert!((s2.m_const - 1.0).abs() < 1e-9, "M = {}", s2.m_const);
    }

    #[test]
    fn split_invariants_on_random_conjugated_blocks() {
        // diag(stable, unstable) conjugated by a fixed well-conditioned
        // similarity: all four split invariants hold
        let n = 6;
        for trial in 0..10 {
            let mut d = DMatrix::<C64>::zeros(n, n);
            for i in 0..3 {
                d[(i, i)] = cm(0.8 + 0.1 * i as f64 + 0.05 * trial as f64, 0.3 * i as f64);
            }
            for i in 3..n {
                d[(i, i)] = cm(-0.5 - 0.2 * i as f64, -0.1 * trial as f64);
            }
            let mut s = DMatrix::<C64>::identity(n, n);
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let v = 0.3 * ((i * 7 + j * 13 + trial * 3) % 11) as f64 / 11.0;
                        s[(i, j)] = cm(v, -0.5 * v);
                    }
                }
            }
            let a = &s * &d * s.clone().lu().solve(&DMatrix::identity(n, n)).unwrap();
            let split = split_matrix(&a, 0.0, 0.7).unwrap();
            assert_eq!(split.rank_u(), 3, "trial {trial}");
            let id = DMatrix::<C64>::identity(n, n);
            assert!(super::camax(&(&split.proj_u + &split.proj_cs - id)) <= 1e-10);
            assert!(super::camax(&(&split.proj_u * &split.proj_u - &split.proj_u)) <= 1e-10);
            assert!(super::camax(&(&split.proj_cs * &split.proj_cs - &split.proj_cs)) <= 1e-10);
            let comm = super::camax(&(&split.proj_u * &a - &a * &split.proj_u)) / super::camax(&a);
            assert!(comm <= 1e-8);
        }
    }
}
