use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: n = {n} (need even n >= 8) or length = {length} (need > 0)")]
    InvalidGrid { n: usize, length: f64 },

    #[error("non-finite value in input samples")]
    NonFiniteInput,

    #[error("derivative order {0} not supported (must be 1..=4)")]
    UnsupportedOrder(u32),

    #[error("sample array length {got} does not match grid size {expected}")]
    SampleLength { expected: usize, got: usize },

    #[error("analytic derivative disagrees with spectral derivative (max rel err {max_rel:.3e} at node {node})")]
    DerivativeMismatch { max_rel: f64, node: usize },

    #[error("field is not divergence-free: max |div| = {max_div:.3e} exceeds {tol:.1e}")]
    NotDivergenceFree { max_div: f64, tol: f64 },

    #[error("jacobian callback disagrees with finite differences of velocity (max err {max_err:.3e})")]
    JacobianMismatch { max_err: f64 },

    #[error("vorticity must have zero mean for the Poisson solve; got mean {mean:.3e}")]
    NonZeroMean { mean: f64 },

    #[error("potential K is not positive at y = {y:.6} (K = {value:.6e}); profile violates the positivity condition")]
    PotentialNotPositive { y: f64, value: f64 },

    #[error("profile has multiple inflection values: U = {u1:.6e} and U = {u2:.6e} both occur where U'' vanishes")]
    MultipleInflectionValues { u1: f64, u2: f64 },

    #[error("denominator U - U_s vanishes at y = {y:.6} but U'' = {ddu:.3e} does not; K is singular there")]
    SingularPotential { y: f64, ddu: f64 },

    #[error("no instability band: lowest eigenvalue {lambda_min:.6e} is not negative")]
    NoInstabilityBand { lambda_min: f64 },

    #[error("ground state is degenerate: gap {gap:.3e} below threshold {threshold:.3e}")]
    DegenerateGroundState { gap: f64, threshold: f64 },

    #[error("ground state changes sign; discretization too coarse")]
    GroundStateSignChange,

    #[error("critical layer: U - c vanishes on the integration path (min |U - c| = {min_abs:.3e})")]
    CriticalLayer { min_abs: f64 },

    #[error("adaptive step size underflow at t = {t:.6e} (h = {h:.3e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("integrator exceeded {0} steps")]
    MaxStepsExceeded(usize),

    #[error("root finder did not converge in {iters} iterations (last |I| = {residual:.3e})")]
    NoConvergence { iters: usize, residual: f64 },

    #[error("converged root c = {re:.6e} + {im:.6e}i is not unstable (Im c <= 1e-12)")]
    RootNotUnstable { re: f64, im: f64 },

    #[error("wavenumber alpha must satisfy 0 < alpha < alpha_max = {alpha_max:.6}; got {alpha:.6}")]
    AlphaOutOfBand { alpha: f64, alpha_max: f64 },

    #[error("alpha = 0 sector is refused; it is neutral and handled analytically")]
    AlphaZero,

    #[error("truncation n_modes = {0} too small (need >= 16)")]
    TruncationTooSmall(usize),

    #[error("spectral gap violated: eigenvalue {re:.6e} + {im:.6e}i has real part inside [{lambda_cs:.6e}, {lambda_u:.6e}]")]
    SpectralGapViolated { re: f64, im: f64, lambda_cs: f64, lambda_u: f64 },

    #[error("eigendecomposition failed to converge")]
    EigensolveFailed,

    #[error("rates must satisfy lambda_u > lambda_cs; got lambda_u = {lambda_u:.6e}, lambda_cs = {lambda_cs:.6e}")]
    BadRates { lambda_u: f64, lambda_cs: f64 },

    #[error("xi underflow: |xi| = {norm:.3e} below 1e-8")]
    XiUnderflow { norm: f64 },

    #[error("conserved quantity drifted by {drift:.3e}, exceeding {limit:.3e}; check the jacobian callback")]
    InvariantDrift { drift: f64, limit: f64 },

    #[error("parameter out of range: {0}")]
    ParameterRange(String),

    #[error("sample {index} failed: {source}")]
    SampleFailed { index: usize, #[source] source: Box<Error> },

    #[error("decay gap condition fails: lambda = {lambda:.6e} outside ({lo:.6e}, {hi:.6e})")]
    GapCondition { lambda: f64, lo: f64, hi: f64 },

    #[error("smallness condition fails: C0*C1*delta1*(1/(lambda-lambda_cs) + 1/(lambda_u-K*mu-lambda)) = {value:.6e} >= 0.5")]
    SmallnessCondition { value: f64 },

    #[error("initial unstable data too large: |z_u0| = {norm:.3e} exceeds delta1/(2 C0) = {limit:.3e}")]
    InitialDataTooLarge { norm: f64, limit: f64 },

    #[error("iteration is not a contraction (increment ratio {ratio:.3} > 0.9 twice)")]
    NonContraction { ratio: f64 },

    #[error("contraction factor {factor:.3} exceeds guaranteed 0.55")]
    ContractionExceeded { factor: f64 },

    #[error("fixed point iteration hit the cap of {0} sweeps")]
    IterationCap(usize),

    #[error("path left the admissible ball: |z(t)| = {norm:.3e} > delta1 = {delta1:.3e} at t = {t:.3}")]
    PathLeftBall { norm: f64, delta1: f64, t: f64 },

    #[error("truncation tail bound {budget:.3e} exceeds quadrature tolerance {tol:.3e}; increase t_max")]
    TailBudgetExceeded { budget: f64, tol: f64 },

    #[error("graph radius {radius:.3e} exceeds admissible {limit:.3e}")]
    RadiusTooLarge { radius: f64, limit: f64 },

    #[error("trajectory exits the ball immediately; radius too large")]
    TrajectoryEscaped,

    #[error("nonlinearity violates the quadratic bound at t = {t:.3}: |F| = {f_norm:.3e} > bound {bound:.3e}")]
    QuadraticBoundViolated { t: f64, f_norm: f64, bound: f64 },

    #[error("propagator(t, t) is not the identity (err {0:.3e})")]
    PropagatorNotIdentity(f64),

    #[error("operation requires an autonomous system with an explicit generator matrix")]
    NotAutonomous,

    #[error("dichotomy split is not real: max imaginary part {0:.3e}")]
    SplitNotReal(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit status for the batch runner: 1 for configuration problems, 2 for numerical ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) => 1,
            _ => 2,
        }
    }
}
