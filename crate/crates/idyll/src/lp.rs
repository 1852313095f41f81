//! Local unstable manifolds of finite-dimensional systems by the
//! Lyapunov-Perron integral map.
//!
//! For z' = A0 z + F(t, z) with an exponential dichotomy and a quadratically
//! vanishing nonlinearity, the map
//!
//!   (L z)_u(t)  = T_u(t, 0) z_u0 + int_0^t T_u(t, s) F_u(s, z(s)) ds
//!   (L z)_cs(t) = int_{-inf}^t T_cs(t, s) F_cs(s, z(s)) ds
//!
//! is a contraction on the space of backward-decaying paths measured in the
//! weighted norm |z|_lambda = sup_{t<=0} e^{-lambda t} |z(t)|. Its fixed
//! point parameterizes the unstable manifold: h(z_u0) is the center-stable
//! component at t = 0. The infinite lower limit is truncated at -t_max with
//! the dropped tail bounded analytically and surfaced as an error budget.

use crate::error::{Error, Result};
use crate::fft::C64;
use crate::fields::halton;
use crate::ode::{integrate_with_samples, OdeOptions};
use crate::spectra::DichotomySplit;
use nalgebra::{DMatrix, DVector};

/// Real form of an exponential-dichotomy splitting: orthonormal bases of the
/// two invariant subspaces, the coordinate extractors of the oblique
/// projections, and the restricted generators.
#[derive(Debug, Clone)]
pub struct RealSplit {
    pub basis_u: DMatrix<f64>,
    pub basis_cs: DMatrix<f64>,
    /// r x n extractor: P_u = basis_u * w_u.
    pub w_u: DMatrix<f64>,
    pub w_cs: DMatrix<f64>,
    pub restricted_u: DMatrix<f64>,
    pub restricted_cs: DMatrix<f64>,
    pub lambda_u: f64,
    pub lambda_cs: f64,
    pub m_const: f64,
}

impl RealSplit {
    pub fn dim(&self) -> usize {
        self.basis_u.nrows()
    }

    pub fn rank_u(&self) -> usize {
        self.basis_u.ncols()
    }

    /// Assemble a split directly from real invariant bases and a generator.
    pub fn from_bases(
        a: &DMatrix<f64>,
        basis_u: DMatrix<f64>,
        basis_cs: DMatrix<f64>,
        lambda_u: f64,
        lambda_cs: f64,
        m_const: f64,
    ) -> Result<Self> {
        let n = a.nrows();
        let r = basis_u.ncols();
        let mut combined = DMatrix::<f64>::zeros(n, n);
        combined.view_mut((0, 0), (n, r)).copy_from(&basis_u);
        combined.view_mut((0, r), (n, n - r)).copy_from(&basis_cs);
        let inv = combined
            .lu()
            .solve(&DMatrix::identity(n, n))
            .ok_or(Error::EigensolveFailed)?;
        let w_u = inv.rows(0, r).into_owned();
        let w_cs = inv.rows(r, n - r).into_owned();
        let restricted_u = basis_u.transpose() * a * &basis_u;
        let restricted_cs = basis_cs.transpose() * a * &basis_cs;
        Ok(Self {
            basis_u,
            basis_cs,
            w_u,
            w_cs,
            restricted_u,
            restricted_cs,
            lambda_u,
            lambda_cs,
            m_const,
        })
    }

    /// Extract the real form of a complex [`DichotomySplit`] whose projections
    /// are real to round-off (conjugation-closed spectral sets).
    pub fn from_complex(split: &DichotomySplit, a: &DMatrix<f64>) -> Result<Self> {
        let n = split.proj_u.nrows();
        let max_im = split
            .proj_u
            .iter()
            .chain(split.proj_cs.iter())
            .fold(0.0f64, |acc, v| acc.max(v.im.abs()));
        if max_im > 1e-8 {
            return Err(Error::SplitNotReal(max_im));
        }
        let proj_u_re = DMatrix::from_fn(n, n, |i, j| split.proj_u[(i, j)].re);
        let proj_cs_re = DMatrix::from_fn(n, n, |i, j| split.proj_cs[(i, j)].re);
        let r = split.rank_u();
        let basis_u = range_basis(&proj_u_re, r)?;
        let basis_cs = range_basis(&proj_cs_re, n - r)?;
        Self::from_bases(a, basis_u, basis_cs, split.lambda_u, split.lambda_cs, split.m_const)
    }
}

/// Orthonormal basis of the range of a rank-r projection via SVD.
fn range_basis(p: &DMatrix<f64>, r: usize) -> Result<DMatrix<f64>> {
    let svd = p.clone().svd(true, false);
    let u = svd.u.as_ref().ok_or(Error::EigensolveFailed)?;
    // singular values of an oblique projection are >= 1 or ~0; take the r
    // dominant directions
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
    if r > 0 && svd.singular_values[order[r - 1]] < 0.5 {
        return Err(Error::EigensolveFailed);
    }
    let cols: Vec<_> = order[..r].iter().map(|&j| u.column(j).into_owned()).collect();
    if r == 0 {
        return Ok(DMatrix::zeros(p.nrows(), 0));
    }
    Ok(DMatrix::from_columns(&cols))
}

type NonlinearityFn = dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync;
type PropagatorFn = dyn Fn(f64, f64) -> DMatrix<f64> + Send + Sync;

/// Linear propagation: a generator matrix (autonomous, exact exponentials)
/// or a general two-time solution operator callback.
pub enum Propagator {
    Autonomous(DMatrix<f64>),
    Callback(Box<PropagatorFn>),
}

/// A finite-dimensional system prepared for the Lyapunov-Perron iteration.
pub struct LpSystem {
    pub split: RealSplit,
    pub propagator: Propagator,
    pub nonlinearity: Box<NonlinearityFn>,
    /// dichotomy constant C0 >= 1 (measured: max of M and 1)
    pub c0: f64,
    /// quadratic bound: |F_{u,cs}(t, z)| <= c1 e^{-k_exp mu t} |z|^2
    pub c1: f64,
    pub mu: f64,
    pub k_exp: f64,
    /// weighted-norm decay rate, inside (lambda_cs + K mu, lambda_u - K mu)
    pub lambda: f64,
    /// radius of the admissible ball
    pub delta1: f64,
}

impl LpSystem {
    /// Build a system with the default rate (midpoint of the admissible
    /// window) and the largest delta1 allowed by the smallness condition
    /// with a 0.8 safety factor.
    pub fn new(
        split: RealSplit,
        propagator: Propagator,
        nonlinearity: Box<NonlinearityFn>,
        c0: f64,
        c1: f64,
        mu: f64,
        k_exp: f64,
    ) -> Result<Self> {
        let lo = split.lambda_cs + k_exp * mu;
        let hi = split.lambda_u - k_exp * mu;
        if !(hi > lo) {
            return Err(Error::GapCondition { lambda: 0.5 * (lo + hi), lo, hi });
        }
        let lambda = 0.5 * (lo + hi);
        let c0 = c0.max(1.0);
        let s = 1.0 / (lambda - split.lambda_cs) + 1.0 / (split.lambda_u - k_exp * mu - lambda);
        let delta1 = 0.8 * 0.5 / (c0 * c1 * s);
        let sys = Self { split, propagator, nonlinearity, c0, c1, mu, k_exp, lambda, delta1 };
        sys.validate()?;
        Ok(sys)
    }

    /// Override the decay rate and ball radius; the gap and smallness
    /// conditions are re-checked.
    pub fn with_rate_and_radius(mut self, lambda: f64, delta1: f64) -> Result<Self> {
        self.lambda = lambda;
        self.delta1 = delta1;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let lo = self.split.lambda_cs + self.k_exp * self.mu;
        let hi = self.split.lambda_u - self.k_exp * self.mu;
        if !(self.lambda > lo && self.lambda < hi) {
            return Err(Error::GapCondition { lambda: self.lambda, lo, hi });
        }
        let value = self.smallness();
        if !(value < 0.5) {
            return Err(Error::SmallnessCondition { value });
        }
        // propagator(t, t) = identity
        let n = self.split.dim();
        if let Propagator::Callback(p) = &self.propagator {
            for &t in &[0.0, -1.0, -7.5] {
                let err = (p(t, t) - DMatrix::<f64>::identity(n, n)).amax();
                if err > 1e-12 {
                    return Err(Error::PropagatorNotIdentity(err));
                }
            }
        }
        // quadratic vanishing of F on sampled (t, z)
        for i in 0..100 {
            let t = -20.0 * halton(i + 1, 2);
            let z0 = (self.nonlinearity)(t, &DVector::zeros(n));
            if z0.norm() > 1e-14 {
                return Err(Error::QuadraticBoundViolated { t, f_norm: z0.norm(), bound: 0.0 });
            }
            let mut z = DVector::zeros(n);
            for j in 0..n {
                z[j] = 2.0 * halton((i + 1) * (j + 2), 3) - 1.0;
            }
            let scale = self.delta1 * halton(i + 1, 5) / z.norm().max(1e-300);
            z *= scale;
            let f = (self.nonlinearity)(t, &z);
            let fu = (&self.split.w_u * &f).norm();
            let fcs = (&self.split.w_cs * &f).norm();
            let bound = self.c1 * (-self.k_exp * self.mu * t).exp() * z.norm_squared();
            let fmax = fu.max(fcs);
            if fmax > bound * (1.0 + 1e-9) + 1e-14 {
                return Err(Error::QuadraticBoundViolated { t, f_norm: fmax, bound });
            }
        }
        Ok(())
    }

    fn smallness(&self) -> f64 {
        let s = 1.0 / (self.lambda - self.split.lambda_cs)
            + 1.0 / (self.split.lambda_u - self.k_exp * self.mu - self.lambda);
        self.c0 * self.c1 * self.delta1 * s
    }

    /// Largest admissible |z_u0|.
    pub fn z_u0_limit(&self) -> f64 {
        self.delta1 / (2.0 * self.c0)
    }

    /// The generator matrix, when the system is autonomous.
    pub fn generator(&self) -> Result<&DMatrix<f64>> {
        match &self.propagator {
            Propagator::Autonomous(a) => Ok(a),
            Propagator::Callback(_) => Err(Error::NotAutonomous),
        }
    }
}

/// Discretization of the backward time axis for the integral map.
#[derive(Debug, Clone)]
pub struct LpOptions {
    pub dt: f64,
    pub t_max: f64,
    /// ceiling for the truncated-tail error budget
    pub quad_tol: f64,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self { dt: 0.05, t_max: 30.0, quad_tol: 1e-9 }
    }
}

/// A backward-in-time path sampled on the uniform grid, with its weighted
/// norm and the truncation error budget of the map application that built it.
#[derive(Debug, Clone)]
pub struct WeightedPath {
    /// decreasing times 0 = t_0 > t_1 > ... > t_N = -t_max
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub lambda: f64,
    pub norm_lambda: f64,
    pub tail_budget: f64,
}

impl WeightedPath {
    fn zero(dim: usize, lambda: f64, opts: &LpOptions) -> Self {
        let n_steps = (opts.t_max / opts.dt).round() as usize;
        let times: Vec<f64> = (0..=n_steps).map(|k| -(k as f64) * opts.dt).collect();
        let states = vec![DVector::zeros(dim); times.len()];
        Self { times, states, lambda, norm_lambda: 0.0, tail_budget: 0.0 }
    }

    fn compute_norm(&mut self) {
        self.norm_lambda = self
            .times
            .iter()
            .zip(&self.states)
            .map(|(&t, z)| (-self.lambda * t).exp() * z.norm())
            .fold(0.0, f64::max);
    }

    /// Weighted distance to another path on the same grid.
    pub fn distance(&self, other: &WeightedPath) -> f64 {
        self.times
            .iter()
            .zip(self.states.iter().zip(&other.states))
            .map(|(&t, (a, b))| (-self.lambda * t).exp() * (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn state_at_zero(&self) -> &DVector<f64> {
        &self.states[0]
    }

    fn check_ball(&self, delta1: f64) -> Result<()> {
        for (&t, z) in self.times.iter().zip(&self.states) {
            let n = z.norm();
            if n > delta1 * (1.0 + 1e-9) {
                return Err(Error::PathLeftBall { norm: n, delta1, t });
            }
        }
        Ok(())
    }
}

/// Cubic interpolation of the path at the midpoint between nodes k and k+1.
fn midpoint_state(states: &[DVector<f64>], k: usize) -> DVector<f64> {
    let n = states.len();
    if k == 0 {
        cubic_combine(&states[0], &states[1], &states[2], &states[3], [0.3125, 0.9375, -0.3125, 0.0625])
    } else if k + 2 >= n {
        cubic_combine(
            &states[n - 1],
            &states[n - 2],
            &states[n - 3],
            &states[n - 4],
            [0.3125, 0.9375, -0.3125, 0.0625],
        )
    } else {
        cubic_combine(
            &states[k - 1],
            &states[k],
            &states[k + 1],
            &states[k + 2],
            [-0.0625, 0.5625, 0.5625, -0.0625],
        )
    }
}

fn cubic_combine(
    a: &DVector<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
    d: &DVector<f64>,
    w: [f64; 4],
) -> DVector<f64> {
    let mut out = a * w[0];
    out += b * w[1];
    out += c * w[2];
    out += d * w[3];
    out
}

/// Per-step restricted propagators for the marches. For autonomous systems
/// they are constant across steps.
struct StepPropagators {
    /// T_u(t_{k+1}, t_k): full backward step on the unstable coordinates
    u_full: Vec<DMatrix<f64>>,
    /// T_u(t_{k+1}, t_k - dt/2)
    u_half: Vec<DMatrix<f64>>,
    /// T_cs(t_{k-1}, t_k): full forward step on the center-stable coordinates
    cs_full: Vec<DMatrix<f64>>,
    /// T_cs(t_{k-1}, t_{k-1} - dt/2)
    cs_half: Vec<DMatrix<f64>>,
}

fn step_propagators(system: &LpSystem, times: &[f64]) -> StepPropagators {
    let n_steps = times.len() - 1;
    match &system.propagator {
        Propagator::Autonomous(_) => {
            let dt = times[0] - times[1];
            let u_full = (&system.split.restricted_u * (-dt)).exp();
            let u_half = (&system.split.restricted_u * (-dt / 2.0)).exp();
            let cs_full = (&system.split.restricted_cs * dt).exp();
            let cs_half = (&system.split.restricted_cs * (dt / 2.0)).exp();
            StepPropagators {
                u_full: vec![u_full; n_steps],
                u_half: vec![u_half; n_steps],
                cs_full: vec![cs_full; n_steps],
                cs_half: vec![cs_half; n_steps],
            }
        }
        Propagator::Callback(p) => {
            let bu = &system.split.basis_u;
            let bcs = &system.split.basis_cs;
            let wu = &system.split.w_u;
            let wcs = &system.split.w_cs;
            let mut u_full = Vec::with_capacity(n_steps);
            let mut u_half = Vec::with_capacity(n_steps);
            let mut cs_full = Vec::with_capacity(n_steps);
            let mut cs_half = Vec::with_capacity(n_steps);
            for k in 0..n_steps {
                let (t_hi, t_lo) = (times[k], times[k + 1]);
                let mid = 0.5 * (t_hi + t_lo);
                u_full.push(wu * p(t_lo, t_hi) * bu);
                u_half.push(wu * p(t_lo, mid) * bu);
                cs_full.push(wcs * p(t_hi, t_lo) * bcs);
                cs_half.push(wcs * p(t_hi, mid) * bcs);
            }
            StepPropagators { u_full, u_half, cs_full, cs_half }
        }
    }
}

/// One application of the Lyapunov-Perron map to a path.
///
/// Both integrals are evaluated by composite Simpson on the path grid, with
/// midpoint values from cubic interpolation of the path. The dropped tail of
/// the center-stable integral below -t_max is bounded by the decay of the
/// path anchored at its last sample and reported in `tail_budget`.
pub fn apply_lp_map(
    path: &WeightedPath,
    z_u0: &DVector<f64>,
    system: &LpSystem,
    opts: &LpOptions,
) -> Result<WeightedPath> {
    let split = &system.split;
    let dim = split.dim();
    let limit = system.z_u0_limit();
    if z_u0.norm() > limit * (1.0 + 1e-12) {
        return Err(Error::InitialDataTooLarge { norm: z_u0.norm(), limit });
    }
    path.check_ball(system.delta1)?;
    let times = &path.times;
    let n_steps = times.len() - 1;
    let dt = times[0] - times[1];

    // nonlinearity in coordinates at nodes and midpoints
    let f_at = |t: f64, z: &DVector<f64>| -> (DVector<f64>, DVector<f64>) {
        let f = (system.nonlinearity)(t, z);
        (&split.w_u * &f, &split.w_cs * &f)
    };
    let mut fu_node = Vec::with_capacity(times.len());
    let mut fcs_node = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        let (fu, fcs) = f_at(t, &path.states[i]);
        fu_node.push(fu);
        fcs_node.push(fcs);
    }
    let mut fu_mid = Vec::with_capacity(n_steps);
    let mut fcs_mid = Vec::with_capacity(n_steps);
    for k in 0..n_steps {
        let zm = midpoint_state(&path.states, k);
        let (fu, fcs) = f_at(0.5 * (times[k] + times[k + 1]), &zm);
        fu_mid.push(fu);
        fcs_mid.push(fcs);
    }

    let props = step_propagators(system, times);

    // unstable component: march down from t = 0
    let cu0 = &split.w_u * z_u0;
    let mut zu = vec![DVector::<f64>::zeros(split.rank_u()); times.len()];
    let mut homogeneous = cu0.clone();
    let mut integral = DVector::<f64>::zeros(split.rank_u());
    zu[0] = homogeneous.clone();
    for k in 0..n_steps {
        // J(t_{k+1}) = T(t_{k+1}, t_k) J(t_k)
        //   - dt/6 [ f(t_{k+1}) + 4 T(t_{k+1}, mid) f(mid) + T(t_{k+1}, t_k) f(t_k) ]
        let local = (&fu_node[k + 1]
            + &props.u_half[k] * &fu_mid[k] * 4.0
            + &props.u_full[k] * &fu_node[k])
            * (dt / 6.0);
        integral = &props.u_full[k] * &integral - local;
        homogeneous = &props.u_full[k] * &homogeneous;
        zu[k + 1] = &homogeneous + &integral;
    }

    // center-stable component: march up from t = -t_max
    let mut zcs = vec![DVector::<f64>::zeros(dim - split.rank_u()); times.len()];
    let mut acc = DVector::<f64>::zeros(dim - split.rank_u());
    for k in (1..=n_steps).rev() {
        let local = (&fcs_node[k - 1]
            + &props.cs_half[k - 1] * &fcs_mid[k - 1] * 4.0
            + &props.cs_full[k - 1] * &fcs_node[k])
            * (dt / 6.0);
        acc = &props.cs_full[k - 1] * &acc + local;
        zcs[k - 1] = acc.clone();
    }

    // tail of the center-stable integral below -t_max, anchored at the decay
    // of the input path from its final sample
    let z_end = path.states.last().expect("path nonempty").norm();
    let two_lambda_gap = 2.0 * path.lambda - split.lambda_cs;
    let tail_budget = if two_lambda_gap > 0.0 {
        system.c0 * system.c1 * z_end * z_end * (path.lambda * opts.t_max).exp() / two_lambda_gap
    } else {
        f64::INFINITY
    };
    if tail_budget > opts.quad_tol {
        return Err(Error::TailBudgetExceeded { budget: tail_budget, tol: opts.quad_tol });
    }

    let states: Vec<DVector<f64>> = (0..times.len())
        .map(|k| &split.basis_u * &zu[k] + &split.basis_cs * &zcs[k])
        .collect();
    let mut out = WeightedPath {
        times: times.clone(),
        states,
        lambda: path.lambda,
        norm_lambda: 0.0,
        tail_budget,
    };
    out.compute_norm();
    Ok(out)
}

/// Picard-iterate the map to its fixed point from the zero path.
///
/// Returns the fixed path and the largest observed ratio of successive
/// increments in the weighted norm; under the smallness condition the ratio
/// is guaranteed below 0.55.
pub fn solve_fixed_point(
    z_u0: &DVector<f64>,
    system: &LpSystem,
    tol: f64,
    max_iter: usize,
    opts: &LpOptions,
) -> Result<(WeightedPath, f64)> {
    let limit = system.z_u0_limit();
    if z_u0.norm() > limit * (1.0 + 1e-12) {
        return Err(Error::InitialDataTooLarge { norm: z_u0.norm(), limit });
    }
    let mut path = WeightedPath::zero(system.split.dim(), system.lambda, opts);
    let mut prev_increment: Option<f64> = None;
    let mut contraction: f64 = 0.0;
    let mut high_ratio_count = 0usize;
    let floor = 1e-14 * system.delta1.max(1e-300);
    for _ in 0..max_iter {
        let next = apply_lp_map(&path, z_u0, system, opts)?;
        let d = next.distance(&path);
        path = next;
        if let Some(p) = prev_increment {
            if p > floor.max(tol) {
                let ratio = d / p;
                contraction = contraction.max(ratio);
                if ratio > 0.9 {
                    high_ratio_count += 1;
                    if high_ratio_count >= 2 {
                        return Err(Error::NonContraction { ratio });
                    }
                }
            }
        }
        prev_increment = Some(d);
        if d <= tol {
            if contraction > 0.55 {
                return Err(Error::ContractionExceeded { factor: contraction });
            }
            return Ok((path, contraction));
        }
    }
    Err(Error::IterationCap(max_iter))
}

/// Samples of the manifold graph h over a ball in the unstable coordinates.
#[derive(Debug, Clone)]
pub struct UnstableGraph {
    /// (unstable coordinates, center-stable coordinates of h)
    pub samples: Vec<(DVector<f64>, DVector<f64>)>,
    pub radius: f64,
    /// finite-difference estimate of |Dh(0)|
    pub tangency_norm: f64,
}

/// Evaluate the graph at one point of the unstable subspace (coordinates in
/// the orthonormal basis). Returns h in center-stable coordinates together
/// with the fixed path.
pub fn evaluate_graph(
    system: &LpSystem,
    cu: &DVector<f64>,
    tol: f64,
    opts: &LpOptions,
) -> Result<(DVector<f64>, WeightedPath, f64)> {
    let z_u0 = &system.split.basis_u * cu;
    let (path, contraction) = solve_fixed_point(&z_u0, system, tol, 200, opts)?;
    let h = &system.split.w_cs * path.state_at_zero();
    Ok((h, path, contraction))
}

/// Deterministic mesh of the radius-`radius` ball in R^r.
fn ball_mesh(r: usize, radius: f64, n_samples: usize) -> Vec<DVector<f64>> {
    let mut pts = Vec::with_capacity(n_samples);
    pts.push(DVector::zeros(r));
    match r {
        0 => {}
        1 => {
            let half = (n_samples.saturating_sub(1) / 2).max(1);
            for i in 1..=half {
                let x = radius * i as f64 / half as f64;
                pts.push(DVector::from_vec(vec![x]));
                pts.push(DVector::from_vec(vec![-x]));
            }
        }
        2 => {
            let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
            for i in 1..n_samples {
                let rho = radius * ((i as f64) / (n_samples - 1) as f64).sqrt();
                let th = golden * i as f64;
                pts.push(DVector::from_vec(vec![rho * th.cos(), rho * th.sin()]));
            }
        }
        _ => {
            for i in 1..n_samples {
                let mut v = DVector::zeros(r);
                let mut norm2 = 0.0;
                for j in 0..r {
                    v[j] = 2.0 * halton(i, [2, 3, 5, 7, 11, 13][j % 6]) - 1.0;
                    norm2 += v[j] * v[j];
                }
                let rho = radius * halton(i, 17).powf(1.0 / r as f64);
                v *= rho / norm2.sqrt().max(1e-300);
                pts.push(v);
            }
        }
    }
    pts.truncate(n_samples.max(1));
    pts
}

/// Sample the unstable graph over a deterministic mesh of the ball and
/// estimate the tangency |Dh(0)| by centered differences.
pub fn unstable_graph(
    system: &LpSystem,
    radius: f64,
    n_samples: usize,
    tol: f64,
    opts: &LpOptions,
) -> Result<UnstableGraph> {
    let limit = system.z_u0_limit();
    if radius > limit * (1.0 + 1e-12) {
        return Err(Error::RadiusTooLarge { radius, limit });
    }
    let r = system.split.rank_u();
    let mesh = ball_mesh(r, radius, n_samples);
    let mut samples = Vec::with_capacity(mesh.len());
    for cu in mesh {
        let (h, _, _) = evaluate_graph(system, &cu, tol, opts)?;
        samples.push((cu, h));
    }
    // h(0) = 0 by uniqueness of the trivial fixed point
    let h0 = samples[0].1.norm();
    if h0 > 1e-10 {
        return Err(Error::NoConvergence { iters: 0, residual: h0 });
    }
    // centered differences at the origin
    let step = radius / 100.0;
    let mut tangency_norm: f64 = 0.0;
    for j in 0..r {
        let mut e = DVector::zeros(r);
        e[j] = step;
        let (hp, _, _) = evaluate_graph(system, &e, tol, opts)?;
        e[j] = -step;
        let (hm, _, _) = evaluate_graph(system, &e, tol, opts)?;
        tangency_norm = tangency_norm.max(((&hp - &hm) / (2.0 * step)).norm());
    }
    Ok(UnstableGraph { samples, radius, tangency_norm })
}

/// Integrate the full system z' = A z + F(t, z), sampling at the given times.
pub fn integrate_full(
    system: &LpSystem,
    z0: &DVector<f64>,
    t0: f64,
    t1: f64,
    sample_times: &[f64],
    rk_tol: f64,
) -> Result<Vec<(f64, DVector<f64>)>> {
    let a = system.generator()?;
    let dim = system.split.dim();
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let z = DVector::from_column_slice(y);
        let out = a * &z + (system.nonlinearity)(t, &z);
        dy.copy_from_slice(out.as_slice());
        Ok(())
    };
    let mut samples = Vec::new();
    let opts = OdeOptions::with_tol(rk_tol);
    integrate_with_samples(
        rhs,
        t0,
        t1,
        z0.as_slice(),
        &opts,
        sample_times,
        |t, y| samples.push((t, DVector::from_column_slice(y))),
    )?;
    let _ = dim;
    Ok(samples)
}

/// Invariance diagnostics: how far forward trajectories started on the graph
/// stray from it.
#[derive(Debug, Clone)]
pub struct InvarianceReport {
    /// max over checkpoints of |z_cs(t) - h(z_u(t))|
    pub max_off_graph: f64,
    pub checkpoints: usize,
}

/// Integrate the full flow from on-graph points for `horizon` time units and
/// measure the distance to the graph while the state stays in the patch.
pub fn verify_local_invariance(
    graph: &UnstableGraph,
    system: &LpSystem,
    horizon: f64,
    tol: f64,
    opts: &LpOptions,
) -> Result<InvarianceReport> {
    if !(horizon > 0.0 && horizon <= 5.0) {
        return Err(Error::ParameterRange(format!(
            "horizon must lie in (0, 5], got {horizon}"
        )));
    }
    let split = &system.split;
    let mut max_off_graph = 0.0f64;
    let mut checkpoints = 0usize;
    // start from interior samples so that the forward orbit, growing at most
    // like e^{lambda_u t}, remains inside the evaluable patch over the horizon
    let headroom = (-(system.split.lambda_u * horizon)).exp() * 0.9;
    let mut starts: Vec<&(DVector<f64>, DVector<f64>)> = graph
        .samples
        .iter()
        .filter(|(cu, _)| {
            let n = cu.norm();
            n > 1e-12 && n <= headroom * graph.radius
        })
        .collect();
    starts.sort_by(|a, b| b.0.norm().partial_cmp(&a.0.norm()).unwrap());
    starts.truncate(4);
    if starts.is_empty() {
        return Err(Error::ParameterRange("graph has no off-origin samples".into()));
    }
    for (cu, h) in starts {
        let z0 = &split.basis_u * cu + &split.basis_cs * h;
        let times: Vec<f64> = (1..=10).map(|i| horizon * i as f64 / 10.0).collect();
        let traj = integrate_full(system, &z0, 0.0, horizon, &times, 1e-12)?;
        let mut inside_any = false;
        for (_, z) in &traj {
            let cu_t = &split.w_u * z;
            // leave the patch: h is only defined on the mesh ball, and the
            // path solve needs |z_u0| within its own limit
            if cu_t.norm() > graph.radius.min(system.z_u0_limit()) || z.norm() > system.delta1 {
                break;
            }
            inside_any = true;
            let (h_t, _, _) = evaluate_graph(system, &cu_t, tol, opts)?;
            let ccs_t = &split.w_cs * z;
            max_off_graph = max_off_graph.max((ccs_t - h_t).norm());
            checkpoints += 1;
        }
        if !inside_any {
            return Err(Error::TrajectoryEscaped);
        }
    }
    Ok(InvarianceReport { max_off_graph, checkpoints })
}

/// The two-dimensional saddle z_u' = z_u, z_cs' = -z_cs + z_u^2, whose
/// unstable manifold is exactly h(x) = x^2 / 3.
pub fn toy_system() -> LpSystem {
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let split = RealSplit::from_bases(
        &a,
        DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
        DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
        1.0,
        -1.0,
        1.0,
    )
    .expect("toy bases are exact");
    let f = |_t: f64, z: &DVector<f64>| {
        let mut out = DVector::zeros(2);
        out[1] = z[0] * z[0];
        out
    };
    LpSystem::new(split, Propagator::Autonomous(a), Box::new(f), 1.0, 1.0, 0.0, 0.0)
        .expect("toy constants satisfy the smallness condition")
        .with_rate_and_radius(0.05, 0.21)
        .expect("sharp toy rates admit the 0.1 ball")
}

/// Complex-entry helper used by the realification bridge tests.
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
