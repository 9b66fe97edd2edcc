use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::C64;
use crate::engine::{run_blockdiag, EngineConfig};
use crate::error::{Error, Result};
use crate::models::ChainSpec;

/// Taylor coefficients `c_j = (1/m) Σ_p f(r e^{iθ_p}) e^{-ijθ_p} / r^j`,
/// `j = 0..m`, from `m` samples at `θ_p = 2πp/m`. Exact for polynomials of
/// degree below `m`.
pub fn cauchy_coefficients(samples: &[C64], radius: f64) -> Result<Vec<C64>> {
    let m = samples.len();
    if m < 16 || !m.is_power_of_two() {
        return Err(Error::Config(format!("sample count must be a power of two >= 16, got {m}")));
    }
    if !(radius > 0.0) {
        return Err(Error::Config(format!("radius must be positive, got {radius}")));
    }
    let coeffs = (0..m)
        .map(|j| {
            let sum: C64 = samples
                .iter()
                .enumerate()
                .map(|(p, f)| {
                    // reduce the angle index first so large j·p stays exact
                    let theta = 2.0 * std::f64::consts::PI * ((j * p) % m) as f64 / m as f64;
                    f * C64::from_polar(1.0, -theta)
                })
                .sum();
            sum / (m as f64 * radius.powi(j as i32))
        })
        .collect();
    Ok(coeffs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticityReport {
    pub n_sites: usize,
    pub radius: f64,
    #[serde(with = "super::complex_list")]
    pub samples: Vec<C64>,
    #[serde(with = "super::complex_list")]
    pub coefficients: Vec<C64>,
    /// `max_{j ∈ [m/4, m/2]} |c_j|^{1/j}`
    pub decay_ratio: f64,
    pub max_abs: f64,
    /// Largest `|c_j| r^j / max|E_N|` for `j < m/2`; the Cauchy estimate
    /// makes this at most one.
    pub cauchy_ratio: f64,
    /// `|∂E/∂Re τ + i ∂E/∂Im τ|` at the probe point.
    pub cr_residual: f64,
    #[serde(with = "crate::numfmt::complex")]
    pub cr_probe: C64,
    pub cr_step: f64,
}

/// Central-difference Cauchy-Riemann residual of `E_N` at `probe`.
pub fn cr_residual(spec: &ChainSpec, cfg: &EngineConfig, probe: C64, h: f64) -> Result<f64> {
    let points = [
        probe + C64::new(h, 0.0),
        probe - C64::new(h, 0.0),
        probe + C64::new(0.0, h),
        probe - C64::new(0.0, h),
    ];
    let values: Vec<C64> = points
        .par_iter()
        .map(|&tau| run_blockdiag(spec, &EngineConfig { tau, ..cfg.clone() }).map(|r| r.e_n))
        .collect::<Result<_>>()?;
    let dx = (values[0] - values[1]) / (2.0 * h);
    let dy = (values[2] - values[3]) / (2.0 * h);
    Ok((dx + C64::new(0.0, 1.0) * dy).norm())
}

/// Samples `E_N` on `|τ| = radius`, extracts Taylor coefficients and
/// probes the Cauchy-Riemann equations at `τ = radius/2` with step `h`.
pub fn analyticity_report(
    spec: &ChainSpec,
    cfg: &EngineConfig,
    radius: f64,
    m: usize,
    h: f64,
) -> Result<AnalyticityReport> {
    let samples: Vec<C64> = (0..m)
        .into_par_iter()
        .map(|p| {
            let tau = C64::from_polar(radius, 2.0 * std::f64::consts::PI * p as f64 / m as f64);
            run_blockdiag(spec, &EngineConfig { tau, ..cfg.clone() }).map(|r| r.e_n)
        })
        .collect::<Result<_>>()?;
    let coefficients = cauchy_coefficients(&samples, radius)?;
    let decay_ratio = (m / 4..=m / 2)
        .filter(|&j| j > 0 && j < m)
        .map(|j| coefficients[j].norm().powf(1.0 / j as f64))
        .fold(0.0, f64::max);
    let max_abs = samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let cauchy_ratio = if max_abs > 0.0 {
        coefficients[..m / 2]
            .iter()
            .enumerate()
            .map(|(j, c)| c.norm() * radius.powi(j as i32) / max_abs)
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    let cr_probe = C64::new(radius / 2.0, 0.0);
    Ok(AnalyticityReport {
        n_sites: spec.n_sites,
        radius,
        samples,
        coefficients,
        decay_ratio,
        max_abs,
        cauchy_ratio,
        cr_residual: cr_residual(spec, cfg, cr_probe, h)?,
        cr_probe,
        cr_step: h,
    })
}
