//! Batch front door: parse a JSON config, dispatch to the computation
//! modules, and emit machine-readable results with full provenance.
//!
//! One command per process. The config file is the single source of truth;
//! no environment variables are consulted. Results are deterministic given
//! the config (seeds included), so identical runs produce byte-identical
//! payloads; wall time lives in a separate manifest file.

use crate::error::{Error, Result};
use crate::fft::C64;
use crate::fields::{PeriodicGrid1D, ShearProfile};
use crate::{galerkin, lp, rayleigh, rays, spectra, sturm};
use nalgebra::DVector;
use serde::Deserialize;
use serde_json::json;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

/// A batch run: which computation, on which profile, with which numbers.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub profile: ProfileConfig,
    #[serde(default)]
    pub numeric: NumericConfig,
    /// Output directory; overridable from the command line.
    #[serde(default)]
    pub output: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum Command {
    #[serde(rename = "sturm")]
    Sturm,
    #[serde(rename = "rayleigh-sweep")]
    RayleighSweep,
    #[serde(rename = "spectrum2d")]
    Spectrum2d,
    #[serde(rename = "spectrum3d")]
    Spectrum3d,
    #[serde(rename = "lambda-m")]
    LambdaM,
    #[serde(rename = "mu0")]
    Mu0,
    #[serde(rename = "manifold")]
    Manifold,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub kind: ProfileKind,
    /// period (kind = sin, custom-samples); default 2 pi
    #[serde(default)]
    pub length: Option<f64>,
    /// wavenumber for kind = sin-beta
    #[serde(default)]
    pub beta: Option<f64>,
    /// samples for kind = custom-samples
    #[serde(default)]
    pub samples: Option<Vec<f64>>,
    /// inflection value U_s; default 0
    #[serde(default)]
    pub inflection_value: Option<f64>,
    /// amplitude of the sin z perturbation for 3D commands
    #[serde(default)]
    pub epsilon_z: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum ProfileKind {
    #[serde(rename = "sin")]
    Sin,
    #[serde(rename = "sin-beta")]
    SinBeta,
    #[serde(rename = "custom-samples")]
    CustomSamples,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericConfig {
    pub n: Option<usize>,
    pub n_modes: Option<usize>,
    pub tol: Option<f64>,
    pub t_final: Option<f64>,
    pub n_samples: Option<usize>,
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub alpha_grid: Option<Vec<f64>>,
    pub lambda_cs: Option<f64>,
    pub lambda_u: Option<f64>,
    pub radius: Option<f64>,
    pub m: Option<u32>,
    pub t_max: Option<f64>,
    pub dt: Option<f64>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str_strict(&text)
    }

    pub fn from_str_strict(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

fn build_profile(cfg: &ProfileConfig, n: usize) -> Result<ShearProfile> {
    let profile = match cfg.kind {
        ProfileKind::Sin => {
            let length = cfg.length.unwrap_or(2.0 * PI);
            ShearProfile::sinusoid(n, length)?
        }
        ProfileKind::SinBeta => {
            let beta = cfg
                .beta
                .ok_or_else(|| Error::Config("sin-beta profile requires `beta`".into()))?;
            ShearProfile::sin_beta(n, beta)?
        }
        ProfileKind::CustomSamples => {
            let samples = cfg
                .samples
                .clone()
                .ok_or_else(|| Error::Config("custom-samples profile requires `samples`".into()))?;
            let length = cfg.length.unwrap_or(2.0 * PI);
            let grid = PeriodicGrid1D::new(samples.len(), length)?;
            ShearProfile::from_samples(grid, samples)?
        }
    };
    Ok(profile.with_inflection_value(cfg.inflection_value.unwrap_or(0.0)))
}

/// Format a float with 17 significant digits for the CSV side files.
fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

/// Everything a run produces: the payload (deterministic) and side files.
pub struct RunOutput {
    pub payload: serde_json::Value,
    pub files: Vec<PathBuf>,
}

/// Execute a config against an output directory; returns the deterministic
/// result payload. Side files (CSV) are written under `out_dir`.
pub fn run(config: &RunConfig, out_dir: &Path) -> Result<RunOutput> {
    std::fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let u_s = config.profile.inflection_value.unwrap_or(0.0);
    let numeric = &config.numeric;
    let payload = match config.command {
        Command::Sturm => {
            let n = numeric.n.unwrap_or(128);
            let profile = build_profile(&config.profile, n)?;
            let sl = sturm::ground_state(&profile, u_s)?;
            let csv = out_dir.join("phi_s.csv");
            crate::fields::write_csv_1d(&csv, &sl.grid, &["phi_s"], &[&sl.phi_s])?;
            files.push(csv);
            json!({
                "lambda_min": sl.lambda_min,
                "alpha_max": sl.alpha_max,
                "gap": sl.gap,
                "phi_s": "phi_s.csv",
                "grid": { "n": sl.grid.n(), "length": sl.grid.length() },
            })
        }
        Command::RayleighSweep => {
            let n = numeric.n.unwrap_or(256);
            let profile = build_profile(&config.profile, n)?;
            let grid = numeric
                .alpha_grid
                .clone()
                .ok_or_else(|| Error::Config("rayleigh-sweep requires `alpha_grid`".into()))?;
            let branch = rayleigh::continue_branch(&profile, u_s, &grid)?;
            let mut csv = String::from("alpha,re_c,im_c,growth_rate,residual\n");
            for mode in &branch.modes {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    fmt17(mode.alpha),
                    fmt17(mode.c.re),
                    fmt17(mode.c.im),
                    fmt17(mode.growth_rate),
                    fmt17(mode.discriminant_residual)
                ));
            }
            let path = out_dir.join("sweep.csv");
            write_text(&path, &csv)?;
            files.push(path);
            json!({
                "modes_found": branch.modes.len(),
                "alpha_grid_len": grid.len(),
                "sweep": "sweep.csv",
                "branch_lost_at": branch.failure.as_ref().map(|(a, e)| json!({
                    "alpha": a, "error": e.to_string()
                })),
            })
        }
        Command::Spectrum2d => {
            let n = numeric.n.unwrap_or(128);
            let profile = build_profile(&config.profile, n)?;
            let alpha = numeric
                .alpha
                .ok_or_else(|| Error::Config("spectrum2d requires `alpha`".into()))?;
            let n_modes = numeric.n_modes.unwrap_or(64);
            let op = spectra::assemble_planar(&profile, alpha, n_modes)?;
            spectrum_payload(&op, numeric)?
        }
        Command::Spectrum3d => {
            let n = numeric.n.unwrap_or(32);
            let profile = build_profile(&config.profile, n)?;
            let alpha = numeric
                .alpha
                .ok_or_else(|| Error::Config("spectrum3d requires `alpha`".into()))?;
            let n_modes = numeric.n_modes.unwrap_or(8);
            let eps = config.profile.epsilon_z.unwrap_or(0.0);
            let gz = PeriodicGrid1D::new(n, 2.0 * PI)?;
            let gy = profile.grid().clone();
            let mut u = vec![0.0; gy.n() * gz.n()];
            for (iz, &z) in gz.nodes().iter().enumerate() {
                for (iy, &uy) in profile.u().iter().enumerate() {
                    u[iy + gy.n() * iz] = uy + eps * z.sin();
                }
            }
            let op = spectra::assemble_shear3d(&gy, &gz, &u, alpha, n_modes)?;
            spectrum_payload(&op, numeric)?
        }
        Command::LambdaM => {
            let flow = shear_flow_from_profile(&config.profile, numeric)?;
            let m = numeric.m.unwrap_or(1);
            let t_final = numeric.t_final.unwrap_or(200.0);
            let n_samples = numeric.n_samples.unwrap_or(200);
            let seed = numeric.seed.unwrap_or(0);
            let est = rays::estimate_lambda_m(&flow, m, t_final, n_samples, seed)?;
            let mut csv = String::from("sample,exponent\n");
            for (i, e) in est.per_sample.iter().enumerate() {
                csv.push_str(&format!("{i},{}\n", fmt17(*e)));
            }
            let path = out_dir.join("per_sample.csv");
            write_text(&path, &csv)?;
            files.push(path);
            json!({
                "m": est.m,
                "T": est.t_final,
                "n_samples": est.n_samples,
                "seed": est.seed,
                "value": est.value,
                "bias_bound": est.bias_bound,
                "max_b_final": est.max_b_final,
                "per_sample_histogram": "per_sample.csv",
            })
        }
        Command::Mu0 => {
            let flow = shear_flow_from_profile(&config.profile, numeric)?;
            let t_final = numeric.t_final.unwrap_or(200.0);
            let n_samples = numeric.n_samples.unwrap_or(200);
            let seed = numeric.seed.unwrap_or(0);
            let value = rays::estimate_mu0(&flow, t_final, n_samples, seed)?;
            json!({
                "T": t_final,
                "n_samples": n_samples,
                "seed": seed,
                "value": value,
            })
        }
        Command::Manifold => {
            let n = numeric.n.unwrap_or(64);
            let profile = build_profile(&config.profile, n)?;
            let alpha = numeric.alpha.unwrap_or(0.8);
            let n_modes = numeric.n_modes.unwrap_or(16);
            let (lcs, lu) = match (numeric.lambda_cs, numeric.lambda_u) {
                (Some(a), Some(b)) => (a, b),
                _ => galerkin::default_rates(&profile, alpha, n_modes)?,
            };
            let g = galerkin::galerkin_reduce(&profile, alpha, n_modes, lcs, lu)?;
            let radius = numeric.radius.unwrap_or_else(|| 0.5 * g.lp.z_u0_limit());
            let opts = lp::LpOptions {
                dt: numeric.dt.unwrap_or(0.1),
                t_max: numeric.t_max.unwrap_or(80.0),
                quad_tol: 1e-8,
            };
            let tol = numeric.tol.unwrap_or(1e-10);
            let graph = lp::unstable_graph(&g.lp, radius, numeric.n_samples.unwrap_or(9), tol, &opts)?;
            // graph samples CSV
            let r = g.lp.split.rank_u();
            let mut csv = String::new();
            for i in 0..r {
                csv.push_str(&format!("zu_{i},"));
            }
            csv.push_str("h_norm\n");
            for (cu, h) in &graph.samples {
                for i in 0..r {
                    csv.push_str(&fmt17(cu[i]));
                    csv.push(',');
                }
                csv.push_str(&fmt17(h.norm()));
                csv.push('\n');
            }
            let gpath = out_dir.join("graph.csv");
            write_text(&gpath, &csv)?;
            files.push(gpath);
            // one representative decaying trajectory
            let mut cu = DVector::zeros(r);
            cu[0] = radius;
            let (_, path, contraction) = lp::evaluate_graph(&g.lp, &cu, tol, &opts)?;
            let mut tcsv = String::from("t,norm,bound\n");
            for (t, z) in path.times.iter().zip(&path.states) {
                let bound = 2.0 * g.c0 * radius * (g.lp.lambda * t).exp();
                tcsv.push_str(&format!("{},{},{}\n", fmt17(*t), fmt17(z.norm()), fmt17(bound)));
            }
            let tpath = out_dir.join("trajectory.csv");
            write_text(&tpath, &tcsv)?;
            files.push(tpath);
            json!({
                "system": {
                    "kind": "galerkin-2d-euler",
                    "alpha": alpha,
                    "n_modes": n_modes,
                    "dim": g.system.dim,
                    "rank_u": g.split_complex.rank_u(),
                    "lambda_cs": lcs,
                    "lambda_u": lu,
                    "M": g.split_complex.m_const,
                },
                "lambda": g.lp.lambda,
                "delta1": g.lp.delta1,
                "C0": g.c0,
                "C1": g.c1,
                "contraction_factor": contraction,
                "tangency_norm": graph.tangency_norm,
                "radius": radius,
                "graph": "graph.csv",
                "trajectory": "trajectory.csv",
            })
        }
    };
    Ok(RunOutput { payload, files })
}

fn spectrum_payload(op: &spectra::ModalOperator, numeric: &NumericConfig) -> Result<serde_json::Value> {
    let (evs, count) = spectra::unstable_spectrum(op, 1e-8)?;
    let top = evs.first().map(|l| l.re).unwrap_or(0.0);
    let dichotomy = if count > 0 && top > 0.0 {
        let lcs = numeric.lambda_cs.unwrap_or(0.01 * top);
        let lu = numeric.lambda_u.unwrap_or(0.9 * top);
        match spectra::dichotomy_split(op, lcs, lu) {
            Ok(split) => json!({
                "lambda_u": split.lambda_u,
                "lambda_cs": split.lambda_cs,
                "M": split.m_const,
                "rank_u": split.rank_u(),
            }),
            Err(e) => json!({ "error": e.to_string() }),
        }
    } else {
        serde_json::Value::Null
    };
    Ok(json!({
        "alpha": op.alpha,
        "n_modes": op.n_modes,
        "eigenvalues": evs.iter().map(|l| vec![l.re, l.im]).collect::<Vec<_>>(),
        "unstable_count": count,
        "dichotomy": dichotomy,
    }))
}

fn shear_flow_from_profile(
    profile: &ProfileConfig,
    _numeric: &NumericConfig,
) -> Result<crate::fields::VectorField3D> {
    match profile.kind {
        ProfileKind::Sin => {
            let eps = profile.epsilon_z.unwrap_or(0.0);
            let length = profile.length.unwrap_or(2.0 * PI);
            let k = 2.0 * PI / length;
            crate::fields::VectorField3D::shear(
                [2.0 * PI, length, 2.0 * PI],
                move |y, z| (k * y).sin() + eps * z.sin(),
                move |y, z| (k * (k * y).cos(), eps * z.cos()),
            )
        }
        _ => Err(Error::Config(
            "lambda-m / mu0 support the `sin` profile kind (with optional epsilon_z)".into(),
        )),
    }
}

/// Serialize the payload deterministically (serde_json preserves insertion
/// order) and write result + manifest files.
pub fn run_to_files(config: &RunConfig, out_dir: &Path) -> Result<()> {
    use sha2::{Digest, Sha256};
    let started = std::time::Instant::now();
    let out = run(config, out_dir)?;
    let result_path = out_dir.join("result.json");
    let text = serde_json::to_string_pretty(&out.payload)
        .map_err(|e| Error::Config(e.to_string()))?;
    write_text(&result_path, &text)?;
    let config_text = serde_json::to_string(&json!({
        "command": format!("{:?}", config.command),
    }))
    .unwrap_or_default();
    let mut hasher = Sha256::new();
    hasher.update(config_text.as_bytes());
    hasher.update(text.as_bytes());
    let manifest = json!({
        "config_sha256": format!("{:x}", hasher.finalize()),
        "wall_time_ms": started.elapsed().as_millis() as u64,
        "version": env!("CARGO_PKG_VERSION"),
    });
    write_text(
        &out_dir.join("manifest.json"),
        &serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?,
    )?;
    Ok(())
}

/// Winding-number helper re-export used by examples.
pub fn planar_growth_rate(profile: &ShearProfile, alpha: f64, n_modes: usize) -> Result<C64> {
    let op = spectra::assemble_planar(profile, alpha, n_modes)?;
    let (evs, _) = spectra::unstable_spectrum(&op, 0.0)?;
    Ok(evs[0])
}
