//! Periodic grids, spectral differentiation, and the Hodge/Leray projection.
//!
//! Everything here is fully periodic: grids are uniform, derivatives are
//! trigonometric, and Poisson solves pin the zero mode to give the mean-zero
//! gauge. Exactness on band-limited data is what makes the downstream
//! eigenvalue and shooting computations verifiable.

use crate::error::{Error, Result};
use crate::fft::{self, C64};
use std::f64::consts::PI;
use std::sync::Arc;

/// Uniform periodic collocation grid with nodes y_j = j L / n.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicGrid1D {
    n: usize,
    length: f64,
}

impl PeriodicGrid1D {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 8 || n % 2 != 0 || !length.is_finite() || length <= 0.0 {
            return Err(Error::InvalidGrid { n, length });
        }
        Ok(Self { n, length })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.length / self.n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Base wavenumber 2 pi / L.
    pub fn base_frequency(&self) -> f64 {
        2.0 * PI / self.length
    }
}

fn check_finite(samples: &[f64]) -> Result<()> {
    if samples.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteInput)
    }
}

fn check_len(grid: &PeriodicGrid1D, len: usize) -> Result<()> {
    if len == grid.n() {
        Ok(())
    } else {
        Err(Error::SampleLength { expected: grid.n(), got: len })
    }
}

/// Derivative of the trigonometric interpolant at the nodes.
pub fn spectral_derivative(grid: &PeriodicGrid1D, samples: &[f64], order: u32) -> Result<Vec<f64>> {
    check_len(grid, samples.len())?;
    check_finite(samples)?;
    let buf: Vec<C64> = samples.iter().map(|&x| C64::new(x, 0.0)).collect();
    let out = spectral_derivative_complex(grid, &buf, order)?;
    Ok(out.into_iter().map(|c| c.re).collect())
}

/// Complex-sample variant of [`spectral_derivative`].
pub fn spectral_derivative_complex(
    grid: &PeriodicGrid1D,
    samples: &[C64],
    order: u32,
) -> Result<Vec<C64>> {
    check_len(grid, samples.len())?;
    if !samples.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    if order == 0 || order > 4 {
        return Err(Error::UnsupportedOrder(order));
    }
    let n = grid.n();
    let mut buf = samples.to_vec();
    fft::fft(&mut buf);
    for (i, v) in buf.iter_mut().enumerate() {
        *v *= fft::derivative_symbol(i, n, grid.length(), order);
    }
    fft::ifft(&mut buf);
    Ok(buf)
}

/// A periodic shear profile U(y) with spectrally consistent derivatives.
///
/// The profile keeps its Fourier coefficients so that U, U', U'' (and U''',
/// needed for the inflection-point limit of the Rayleigh potential) can be
/// evaluated anywhere in the period, not just at the nodes.
#[derive(Debug, Clone)]
pub struct ShearProfile {
    grid: PeriodicGrid1D,
    u: Vec<f64>,
    du: Vec<f64>,
    ddu: Vec<f64>,
    dddu: Vec<f64>,
    inflection_value: Option<f64>,
    // compact spectral representation: (integer mode, coefficient) pairs
    modes: Vec<(i64, C64)>,
}

impl ShearProfile {
    /// Build from samples; derivatives are computed spectrally.
    pub fn from_samples(grid: PeriodicGrid1D, u: Vec<f64>) -> Result<Self> {
        check_len(&grid, u.len())?;
        check_finite(&u)?;
        let du = spectral_derivative(&grid, &u, 1)?;
        let ddu = spectral_derivative(&grid, &u, 2)?;
        let dddu = spectral_derivative(&grid, &u, 3)?;
        let modes = compact_modes(&u);
        Ok(Self { grid, u, du, ddu, dddu, inflection_value: None, modes })
    }

    /// Build from analytic samples of U, U', U''. The supplied derivatives
    /// must agree with the spectral ones to relative tolerance 1e-8.
    pub fn from_analytic(
        grid: PeriodicGrid1D,
        u: Vec<f64>,
        du: Vec<f64>,
        ddu: Vec<f64>,
    ) -> Result<Self> {
        check_len(&grid, u.len())?;
        check_len(&grid, du.len())?;
        check_len(&grid, ddu.len())?;
        check_finite(&u)?;
        check_finite(&du)?;
        check_finite(&ddu)?;
        let sdu = spectral_derivative(&grid, &u, 1)?;
        let sddu = spectral_derivative(&grid, &u, 2)?;
        let scale_1 = sdu.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-300);
        let scale_2 = sddu.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-300);
        for j in 0..grid.n() {
            let r1 = (du[j] - sdu[j]).abs() / scale_1;
            let r2 = (ddu[j] - sddu[j]).abs() / scale_2;
            if r1 > 1e-8 || r2 > 1e-8 {
                return Err(Error::DerivativeMismatch { max_rel: r1.max(r2), node: j });
            }
        }
        let dddu = spectral_derivative(&grid, &u, 3)?;
        let modes = compact_modes(&u);
        Ok(Self { grid, u, du, ddu, dddu, inflection_value: None, modes })
    }

    /// Sample a closure on the grid.
    pub fn from_fn(grid: PeriodicGrid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        let u = grid.nodes().iter().map(|&y| f(y)).collect();
        Self::from_samples(grid, u)
    }

    /// U(y) = sin(2 pi y / L) on a period-L grid.
    pub fn sinusoid(n: usize, length: f64) -> Result<Self> {
        let grid = PeriodicGrid1D::new(n, length)?;
        let k = grid.base_frequency();
        Self::from_fn(grid, |y| (k * y).sin())
    }

    /// U(y) = sin(beta y) on its own periodic cell [0, 2 pi / beta].
    pub fn sin_beta(n: usize, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::ParameterRange(format!("beta must be positive, got {beta}")));
        }
        Self::sinusoid(n, 2.0 * PI / beta)
    }

    pub fn with_inflection_value(mut self, u_s: f64) -> Self {
        self.inflection_value = Some(u_s);
        self
    }

    pub fn grid(&self) -> &PeriodicGrid1D {
        &self.grid
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn du(&self) -> &[f64] {
        &self.du
    }

    pub fn ddu(&self) -> &[f64] {
        &self.ddu
    }

    pub fn dddu(&self) -> &[f64] {
        &self.dddu
    }

    pub fn inflection_value(&self) -> Option<f64> {
        self.inflection_value
    }

    pub fn u_min(&self) -> f64 {
        self.u.iter().fold(f64::INFINITY, |a, &x| a.min(x))
    }

    pub fn u_max(&self) -> f64 {
        self.u.iter().fold(f64::NEG_INFINITY, |a, &x| a.max(x))
    }

    /// Evaluate the trigonometric interpolant of U at an arbitrary point.
    pub fn eval(&self, y: f64) -> f64 {
        self.eval_derivative(y, 0)
    }

    /// Evaluate the order-th derivative of the interpolant at an arbitrary point.
    pub fn eval_derivative(&self, y: f64, order: u32) -> f64 {
        let k0 = self.grid.base_frequency();
        let mut acc = C64::new(0.0, 0.0);
        for &(m, coef) in &self.modes {
            let ik = C64::new(0.0, k0 * m as f64);
            let phase = C64::new(0.0, k0 * m as f64 * y).exp();
            acc += coef * ik.powu(order) * phase;
        }
        acc.re
    }
}

/// Keep only modes that carry weight; exact profiles like sin stay O(1)-term.
fn compact_modes(samples: &[f64]) -> Vec<(i64, C64)> {
    let n = samples.len();
    let coefs = fft::coefficients(samples);
    let peak = coefs.iter().fold(0.0f64, |a, c| a.max(c.norm())).max(1e-300);
    let mut modes = Vec::new();
    for (i, &c) in coefs.iter().enumerate() {
        if c.norm() > 1e-14 * peak {
            // drop the Nyquist bin from point evaluation: it is not resolvable
            // as a symmetric mode and the profiles of interest never reach it
            if n % 2 == 0 && 2 * i == n {
                continue;
            }
            modes.push((fft::wavenumber(i, n), c));
        }
    }
    modes
}

/// Two-component velocity samples on a periodic rectangle.
///
/// Layout: `vx[ix + nx * iy]`, x varying fastest.
#[derive(Debug, Clone)]
pub struct PlanarField {
    pub grid_x: PeriodicGrid1D,
    pub grid_y: PeriodicGrid1D,
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
}

impl PlanarField {
    pub fn new(
        grid_x: PeriodicGrid1D,
        grid_y: PeriodicGrid1D,
        vx: Vec<f64>,
        vy: Vec<f64>,
    ) -> Result<Self> {
        let len = grid_x.n() * grid_y.n();
        if vx.len() != len || vy.len() != len {
            return Err(Error::SampleLength { expected: len, got: vx.len().max(vy.len()) });
        }
        check_finite(&vx)?;
        check_finite(&vy)?;
        Ok(Self { grid_x, grid_y, vx, vy })
    }

    pub fn from_fn(
        grid_x: PeriodicGrid1D,
        grid_y: PeriodicGrid1D,
        f: impl Fn(f64, f64) -> (f64, f64),
    ) -> Result<Self> {
        let (nx, ny) = (grid_x.n(), grid_y.n());
        let mut vx = vec![0.0; nx * ny];
        let mut vy = vec![0.0; nx * ny];
        for iy in 0..ny {
            for ix in 0..nx {
                let (a, b) = f(grid_x.node(ix), grid_y.node(iy));
                vx[ix + nx * iy] = a;
                vy[ix + nx * iy] = b;
            }
        }
        Self::new(grid_x, grid_y, vx, vy)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            grid_x: self.grid_x.clone(),
            grid_y: self.grid_y.clone(),
            vx: vec![0.0; self.vx.len()],
            vy: vec![0.0; self.vy.len()],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.vx
            .iter()
            .chain(self.vy.iter())
            .fold(0.0f64, |a, &x| a.max(x.abs()))
    }
}

/// 2D forward FFT (unnormalized) on the layout used by [`PlanarField`].
fn fft2(nx: usize, ny: usize, samples: &[f64]) -> Vec<C64> {
    let mut data: Vec<C64> = samples.iter().map(|&x| C64::new(x, 0.0)).collect();
    // rows (x direction)
    for iy in 0..ny {
        fft::fft(&mut data[iy * nx..(iy + 1) * nx]);
    }
    // columns (y direction)
    let mut col = vec![C64::new(0.0, 0.0); ny];
    for ix in 0..nx {
        for iy in 0..ny {
            col[iy] = data[ix + nx * iy];
        }
        fft::fft(&mut col);
        for iy in 0..ny {
            data[ix + nx * iy] = col[iy];
        }
    }
    data
}

fn ifft2_real(nx: usize, ny: usize, mut data: Vec<C64>) -> Vec<f64> {
    let mut col = vec![C64::new(0.0, 0.0); ny];
    for ix in 0..nx {
        for iy in 0..ny {
            col[iy] = data[ix + nx * iy];
        }
        fft::ifft(&mut col);
        for iy in 0..ny {
            data[ix + nx * iy] = col[iy];
        }
    }
    for iy in 0..ny {
        fft::ifft(&mut data[iy * nx..(iy + 1) * nx]);
    }
    data.into_iter().map(|c| c.re).collect()
}

/// First-derivative symbol i k with the Nyquist bin zeroed.
fn ik_symbol(i: usize, n: usize, length: f64) -> C64 {
    fft::derivative_symbol(i, n, length, 1)
}

/// Hodge/Leray decomposition of a periodic field: `field = divfree + gradient`
/// with `gradient = grad h`, `lap h = div field`, h mean-zero. The constant
/// Fourier mode (the mean flow) goes to the divergence-free part.
pub fn leray_project(field: &PlanarField) -> Result<(PlanarField, PlanarField)> {
    let (nx, ny) = (field.grid_x.n(), field.grid_y.n());
    let (lx, ly) = (field.grid_x.length(), field.grid_y.length());
    let mut fx = fft2(nx, ny, &field.vx);
    let mut fy = fft2(nx, ny, &field.vy);
    let mut gx = vec![C64::new(0.0, 0.0); nx * ny];
    let mut gy = vec![C64::new(0.0, 0.0); nx * ny];
    for iy in 0..ny {
        for ix in 0..nx {
            if ix == 0 && iy == 0 {
                continue; // mean mode: divergence-free by convention
            }
            let ikx = ik_symbol(ix, nx, lx);
            let iky = ik_symbol(iy, ny, ly);
            let k2 = (ikx.im * ikx.im + iky.im * iky.im).max(0.0);
            if k2 == 0.0 {
                continue; // unreachable Nyquist-only corner with zeroed symbols
            }
            let idx = ix + nx * iy;
            let div = ikx * fx[idx] + iky * fy[idx];
            let h = -div / k2; // lap^{-1} with symbol -k^2
            gx[idx] = ikx * h;
            gy[idx] = iky * h;
            fx[idx] -= gx[idx];
            fy[idx] -= gy[idx];
        }
    }
    let divfree = PlanarField {
        grid_x: field.grid_x.clone(),
        grid_y: field.grid_y.clone(),
        vx: ifft2_real(nx, ny, fx),
        vy: ifft2_real(nx, ny, fy),
    };
    let gradient = PlanarField {
        grid_x: field.grid_x.clone(),
        grid_y: field.grid_y.clone(),
        vx: ifft2_real(nx, ny, gx),
        vy: ifft2_real(nx, ny, gy),
    };
    Ok((divfree, gradient))
}

/// Maximum pointwise spectral divergence of a planar field.
pub fn max_divergence(field: &PlanarField) -> f64 {
    let (nx, ny) = (field.grid_x.n(), field.grid_y.n());
    let (lx, ly) = (field.grid_x.length(), field.grid_y.length());
    let fx = fft2(nx, ny, &field.vx);
    let fy = fft2(nx, ny, &field.vy);
    let mut div = vec![C64::new(0.0, 0.0); nx * ny];
    for iy in 0..ny {
        for ix in 0..nx {
            let idx = ix + nx * iy;
            div[idx] = ik_symbol(ix, nx, lx) * fx[idx] + ik_symbol(iy, ny, ly) * fy[idx];
        }
    }
    ifft2_real(nx, ny, div)
        .into_iter()
        .fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Curl and average horizontal momentum of a divergence-free field.
pub fn vorticity_and_momentum(field: &PlanarField) -> Result<(Vec<f64>, f64)> {
    let max_div = max_divergence(field);
    let tol = 1e-10 * field.max_abs().max(1.0);
    if max_div > tol {
        return Err(Error::NotDivergenceFree { max_div, tol });
    }
    let (nx, ny) = (field.grid_x.n(), field.grid_y.n());
    let (lx, ly) = (field.grid_x.length(), field.grid_y.length());
    let fx = fft2(nx, ny, &field.vx);
    let fy = fft2(nx, ny, &field.vy);
    let mut w = vec![C64::new(0.0, 0.0); nx * ny];
    for iy in 0..ny {
        for ix in 0..nx {
            let idx = ix + nx * iy;
            w[idx] = ik_symbol(ix, nx, lx) * fy[idx] - ik_symbol(iy, ny, ly) * fx[idx];
        }
    }
    let omega = ifft2_real(nx, ny, w);
    let s = field.vx.iter().sum::<f64>() / (nx * ny) as f64;
    Ok((omega, s))
}

/// Reconstruct the velocity from vorticity and mean momentum:
/// v = J grad lap^{-1} omega + s e1.
pub fn velocity_from_vorticity(
    grid_x: &PeriodicGrid1D,
    grid_y: &PeriodicGrid1D,
    omega: &[f64],
    s: f64,
) -> Result<PlanarField> {
    let (nx, ny) = (grid_x.n(), grid_y.n());
    if omega.len() != nx * ny {
        return Err(Error::SampleLength { expected: nx * ny, got: omega.len() });
    }
    check_finite(omega)?;
    let mean = omega.iter().sum::<f64>() / (nx * ny) as f64;
    let scale = omega.iter().fold(0.0f64, |a, &x| a.max(x.abs())).max(1.0);
    if mean.abs() > 1e-10 * scale {
        return Err(Error::NonZeroMean { mean });
    }
    let (lx, ly) = (grid_x.length(), grid_y.length());
    let w = fft2(nx, ny, omega);
    let mut fx = vec![C64::new(0.0, 0.0); nx * ny];
    let mut fy = vec![C64::new(0.0, 0.0); nx * ny];
    for iy in 0..ny {
        for ix in 0..nx {
            if ix == 0 && iy == 0 {
                continue;
            }
            let ikx = ik_symbol(ix, nx, lx);
            let iky = ik_symbol(iy, ny, ly);
            let k2 = ikx.im * ikx.im + iky.im * iky.im;
            if k2 == 0.0 {
                continue;
            }
            let idx = ix + nx * iy;
            let psi = -w[idx] / k2;
            // J grad psi = (-psi_y, psi_x)
            fx[idx] = -iky * psi;
            fy[idx] = ikx * psi;
        }
    }
    let mut vx = ifft2_real(nx, ny, fx);
    let vy = ifft2_real(nx, ny, fy);
    for v in vx.iter_mut() {
        *v += s;
    }
    PlanarField::new(grid_x.clone(), grid_y.clone(), vx, vy)
}

type VelocityFn = dyn Fn(&[f64; 3]) -> [f64; 3] + Send + Sync;
type JacobianFn = dyn Fn(&[f64; 3]) -> [[f64; 3]; 3] + Send + Sync;

/// What kind of steady flow a [`VectorField3D`] represents. Shear flows carry
/// their profile gradient so trajectory diagnostics can monitor the conserved
/// combination specific to them.
#[derive(Clone)]
pub enum FlowKind {
    General,
    /// u = (U(y, z), 0, 0) with the gradient (U_y, U_z) available pointwise.
    Shear { grad: Arc<dyn Fn(f64, f64) -> (f64, f64) + Send + Sync> },
}

/// A steady 3D velocity field on a periodic box, given by callbacks for the
/// velocity and its Jacobian. Construction validates incompressibility and
/// the consistency of the Jacobian against finite differences.
#[derive(Clone)]
pub struct VectorField3D {
    periods: [f64; 3],
    velocity: Arc<VelocityFn>,
    jacobian: Arc<JacobianFn>,
    kind: FlowKind,
}

impl VectorField3D {
    pub fn new(
        periods: [f64; 3],
        velocity: Arc<VelocityFn>,
        jacobian: Arc<JacobianFn>,
    ) -> Result<Self> {
        Self::with_kind(periods, velocity, jacobian, FlowKind::General)
    }

    pub fn with_kind(
        periods: [f64; 3],
        velocity: Arc<VelocityFn>,
        jacobian: Arc<JacobianFn>,
        kind: FlowKind,
    ) -> Result<Self> {
        if periods.iter().any(|&p| !(p.is_finite() && p > 0.0)) {
            return Err(Error::ParameterRange(format!("periods must be positive, got {periods:?}")));
        }
        let field = Self { periods, velocity, jacobian, kind };
        field.validate()?;
        Ok(field)
    }

    /// Divergence and Jacobian-consistency checks at 1000 deterministic
    /// pseudo-random points.
    fn validate(&self) -> Result<()> {
        let mut max_div = 0.0f64;
        let mut max_err = 0.0f64;
        for i in 0..1000 {
            let x = [
                halton(i + 1, 2) * self.periods[0],
                halton(i + 1, 3) * self.periods[1],
                halton(i + 1, 5) * self.periods[2],
            ];
            let j = (self.jacobian)(&x);
            max_div = max_div.max((j[0][0] + j[1][1] + j[2][2]).abs());
            // central finite differences of the velocity callback
            for col in 0..3 {
                let h = 1e-5 * self.periods[col].max(1.0);
                let mut xp = x;
                let mut xm = x;
                xp[col] += h;
                xm[col] -= h;
                let vp = (self.velocity)(&xp);
                let vm = (self.velocity)(&xm);
                for row in 0..3 {
                    let fd = (vp[row] - vm[row]) / (2.0 * h);
                    max_err = max_err.max((j[row][col] - fd).abs());
                }
            }
        }
        if max_div > 1e-10 {
            return Err(Error::NotDivergenceFree { max_div, tol: 1e-10 });
        }
        if max_err > 1e-6 {
            return Err(Error::JacobianMismatch { max_err });
        }
        Ok(())
    }

    pub fn periods(&self) -> [f64; 3] {
        self.periods
    }

    pub fn velocity(&self, x: &[f64; 3]) -> [f64; 3] {
        (self.velocity)(x)
    }

    pub fn jacobian(&self, x: &[f64; 3]) -> [[f64; 3]; 3] {
        (self.jacobian)(x)
    }

    pub fn kind(&self) -> &FlowKind {
        &self.kind
    }

    /// Reduce a point into the fundamental cell.
    pub fn reduce(&self, x: &[f64; 3]) -> [f64; 3] {
        let mut out = *x;
        for i in 0..3 {
            out[i] = out[i].rem_euclid(self.periods[i]);
        }
        out
    }

    /// Constant flow; zero Jacobian.
    pub fn constant(v: [f64; 3]) -> Self {
        Self {
            periods: [2.0 * PI; 3],
            velocity: Arc::new(move |_| v),
            jacobian: Arc::new(|_| [[0.0; 3]; 3]),
            kind: FlowKind::General,
        }
    }

    /// Shear flow u = (U(y, z), 0, 0) from closures for U and its gradient.
    pub fn shear(
        periods: [f64; 3],
        u: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        grad: impl Fn(f64, f64) -> (f64, f64) + Send + Sync + Clone + 'static,
    ) -> Result<Self> {
        let grad_for_jac = grad.clone();
        Self::with_kind(
            periods,
            Arc::new(move |x: &[f64; 3]| [u(x[1], x[2]), 0.0, 0.0]),
            Arc::new(move |x: &[f64; 3]| {
                let (uy, uz) = grad_for_jac(x[1], x[2]);
                [[0.0, uy, uz], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]
            }),
            FlowKind::Shear { grad: Arc::new(grad) },
        )
    }

    /// Beltrami flow (A sin z + C cos y, B sin x + A cos z, C sin y + B cos x)
    /// on the 2 pi box; a steady Euler flow for any coefficients.
    pub fn abc(a: f64, b: f64, c: f64) -> Result<Self> {
        Self::with_kind(
            [2.0 * PI; 3],
            Arc::new(move |x: &[f64; 3]| {
                [
                    a * x[2].sin() + c * x[1].cos(),
                    b * x[0].sin() + a * x[2].cos(),
                    c * x[1].sin() + b * x[0].cos(),
                ]
            }),
            Arc::new(move |x: &[f64; 3]| {
                [
                    [0.0, -c * x[1].sin(), a * x[2].cos()],
                    [b * x[0].cos(), 0.0, -a * x[2].sin()],
                    [-b * x[0].sin(), c * x[1].cos(), 0.0],
                ]
            }),
            FlowKind::General,
        )
    }
}

/// Van der Corput radical inverse in the given prime base.
pub fn halton(mut index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// Write 1D node-indexed columns as CSV with 17 significant digits.
pub fn write_csv_1d(
    path: &std::path::Path,
    grid: &PeriodicGrid1D,
    header: &[&str],
    columns: &[&[f64]],
) -> Result<()> {
    use std::io::Write;
    let mut out = String::new();
    out.push_str("index,y");
    for h in header {
        out.push(',');
        out.push_str(h);
    }
    out.push('\n');
    for j in 0..grid.n() {
        out.push_str(&format!("{},{:.16e}", j, grid.node(j)));
        for col in columns {
            out.push_str(&format!(",{:.16e}", col[j]));
        }
        out.push('\n');
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// JSON envelope {grid: {n, length}, data: [...]} for 1D samples.
pub fn samples_json(grid: &PeriodicGrid1D, data: &[f64]) -> serde_json::Value {
    serde_json::json!({
        "grid": { "n": grid.n(), "length": grid.length() },
        "data": data,
    })
}
