//! Outage analysis for the single-antenna case with unit-variance Rayleigh links.
//!
//! With optimal phases the received power normalized by `Pt` is
//! `X = (|χ_0| + Σ_k |χ_k|)²`; with unit phases it is `|Σ_k χ_k|²`, where the
//! `K̄ + 1` coefficients are i.i.d. `CN(0, 1)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{gamma_fn, RngStream};

/// Moment-matched Gamma approximation of `X`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaApprox {
    pub k_x: f64,
    pub theta_x: f64,
    pub ex: f64,
    pub ex2: f64,
}

pub fn gamma_approx_params(kbar: usize) -> GammaApprox {
    let k = kbar as f64;
    let n = k + 1.0;
    let ex = n * (1.0 + PI / 4.0 * k);
    let ex2 = 2.0 * n
        + (1.5 * PI + 3.0) * n * k
        + 1.5 * PI * n * k * (k - 1.0)
        + PI * PI / 16.0 * n * k * (k - 1.0) * (k - 2.0);
    let var = ex2 - ex * ex;
    GammaApprox {
        k_x: ex * ex / var,
        theta_x: var / ex,
        ex,
        ex2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseMode {
    Optimal,
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageQuery {
    pub kbar: usize,
    /// Target rate, bits/s/Hz.
    pub rate: f64,
    /// `Pt / σ²`, linear.
    pub gamma: f64,
    pub phase_mode: PhaseMode,
}

impl OutageQuery {
    pub fn new(kbar: usize, rate: f64, gamma: f64, phase_mode: PhaseMode) -> Result<Self> {
        let q = Self {
            kbar,
            rate,
            gamma,
            phase_mode,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0) || !self.rate.is_finite() {
            return Err(Error::validation(format!("target rate must be positive, got {}", self.rate)));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::validation(format!("SNR must be positive, got {}", self.gamma)));
        }
        Ok(())
    }

    /// Power threshold `(2^R − 1)/γ` on `X`.
    pub fn threshold(&self) -> f64 {
        pow2_m1(self.rate) / self.gamma
    }
}

/// `2^r − 1` without cancellation for small `r`.
fn pow2_m1(r: f64) -> f64 {
    (r * std::f64::consts::LN_2).exp_m1()
}

/// An asymptotic probability clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageApprox {
    pub p: f64,
    /// The raw formula left `[0, 1]` (outside the high-SNR regime).
    pub clamped: bool,
}

fn clamp_probability(raw: f64) -> OutageApprox {
    let p = raw.clamp(0.0, 1.0);
    OutageApprox { p, clamped: p != raw }
}

/// High-SNR Gamma approximation for the optimal-phase design.
pub fn outage_closed_form(q: &OutageQuery) -> Result<OutageApprox> {
    q.validate()?;
    if q.phase_mode != PhaseMode::Optimal {
        return Err(Error::validation("closed form applies to optimal phases"));
    }
    let ga = gamma_approx_params(q.kbar);
    let k = ga.k_x;
    let raw = (q.threshold() / ga.theta_x).powf(k) / gamma_fn(k + 1.0)?;
    Ok(clamp_probability(raw))
}

/// High-SNR approximation for unit phases.
pub fn outage_unit_phase(q: &OutageQuery) -> Result<OutageApprox> {
    q.validate()?;
    if q.phase_mode != PhaseMode::Unit {
        return Err(Error::validation("unit-phase formula applies to unit phases"));
    }
    Ok(clamp_probability(q.threshold() / (q.kbar as f64 + 1.0)))
}

/// Exact unit-phase outage: the sum is `CN(0, K̄ + 1)`.
pub fn outage_unit_phase_exact(q: &OutageQuery) -> Result<f64> {
    q.validate()?;
    Ok(-(-q.threshold() / (q.kbar as f64 + 1.0)).exp_m1())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageEstimate {
    pub p_hat: f64,
    pub stderr: f64,
    pub trials: usize,
}

fn check_mc(q: &OutageQuery, g: usize, trials: usize) -> Result<()> {
    q.validate()?;
    if trials == 0 {
        return Err(Error::validation("trials must be at least 1"));
    }
    if q.kbar > g {
        return Err(Error::validation(format!("K̄ = {} exceeds G = {g}", q.kbar)));
    }
    Ok(())
}

/// Counts outage events over `trials` draws of the `K̄ + 1` coefficients.
pub fn outage_monte_carlo(q: &OutageQuery, g: usize, trials: usize, rng: &mut RngStream) -> Result<OutageEstimate> {
    check_mc(q, g, trials)?;
    let delta = q.threshold();
    let mut hits = 0usize;
    for _ in 0..trials {
        let x = match q.phase_mode {
            PhaseMode::Optimal => (0..=q.kbar).map(|_| rng.complex_normal(1.0).norm()).sum::<f64>().powi(2),
            PhaseMode::Unit => (0..=q.kbar).map(|_| rng.complex_normal(1.0)).sum::<num_complex::Complex64>().norm_sqr(),
        };
        if x < delta {
            hits += 1;
        }
    }
    let p = hits as f64 / trials as f64;
    Ok(OutageEstimate {
        p_hat: p,
        stderr: (p * (1.0 - p) / trials as f64).sqrt(),
        trials,
    })
}

/// Optimal-phase outage with the direct-link magnitude integrated out:
/// `P(|χ_0| < r − S | S) = 1 − e^{−(r−S)²}` for `S = Σ_{k≥1} |χ_k| < r`.
///
/// Outage needs every `|χ_k| < r`, so the reflected magnitudes are drawn from
/// the Rayleigh law truncated to `[0, r)` and the estimate is weighted by
/// `P(|χ_k| < r)^{K̄} = (1 − e^{−r²})^{K̄}`. Unbiased, with bounded relative
/// error at any SNR.
pub fn outage_conditional_mc(q: &OutageQuery, g: usize, trials: usize, rng: &mut RngStream) -> Result<OutageEstimate> {
    check_mc(q, g, trials)?;
    if q.phase_mode != PhaseMode::Optimal {
        return Err(Error::validation("conditional estimator applies to optimal phases"));
    }
    let r = q.threshold().sqrt();
    let tail = -(-r * r).exp_m1();
    let weight = tail.powi(q.kbar as i32);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..trials {
        // Inverse CDF of the truncated Rayleigh: x = sqrt(−ln(1 − u·tail)).
        let s: f64 = (0..q.kbar).map(|_| (-(-rng.uniform() * tail).ln_1p()).sqrt()).sum();
        let v = if s < r { -(-(r - s).powi(2)).exp_m1() } else { 0.0 };
        sum += v;
        sum_sq += v * v;
    }
    let n = trials as f64;
    let mean = sum / n;
    let var = if trials > 1 { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(OutageEstimate {
        p_hat: weight * mean,
        stderr: weight * (var / n).sqrt(),
        trials,
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::validation("need at least two paired points"));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(Error::Domain("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all abscissae coincide".into()));
    }
    Ok(sxy / sxx)
}
