//! Uplink pilot phase with DFT reflection patterns and the LS channel estimator.

use std::f64::consts::PI;

use crate::channel::{ChannelSet, ScenarioConfig};
use crate::error::{Error, Result};
use crate::numkit::{cis, dft_matrix, CMatrix, CVector, RngStream, C64};

/// Zadoff-Chu sequence of the given length and root.
pub fn zadoff_chu(length: usize, root: usize) -> Result<CVector> {
    if length == 0 || root == 0 {
        return Err(Error::validation("Zadoff-Chu length and root must be positive"));
    }
    if gcd(length, root) != 1 {
        return Err(Error::validation(format!(
            "root {root} is not coprime to length {length}"
        )));
    }
    let l = length as u128;
    let u = root as u128;
    Ok(CVector::from_fn(length, |n, _| {
        let n = n as u128;
        // Exponent reduced modulo 2L keeps the phase argument small.
        let num = if length % 2 == 1 { u * n * (n + 1) } else { u * n * n } % (2 * l);
        cis(-PI * num as f64 / length as f64)
    }))
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Stacked pilot observations over `G + 1` symbol periods.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotBlock {
    /// Pilot symbols, length `G + 1`.
    pub xp: CVector,
    /// Augmented reflection patterns; column `i` is `[1; ψ^(i)]`.
    pub psi: CMatrix,
    /// Received pilots, `N × (G + 1)`.
    pub yp: CMatrix,
}

/// `[ĥ_d, Ĥ^H]` split into its parts.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub hd_hat: CVector,
    /// `G × N`.
    pub h_hat: CMatrix,
}

impl ChannelEstimate {
    /// Perfect CSI.
    pub fn exact(set: &ChannelSet) -> Self {
        Self {
            hd_hat: set.hd.clone(),
            h_hat: set.h.clone(),
        }
    }

    /// Augmented `N × (G + 1)` matrix `[ĥ_d, Ĥ^H]`.
    pub fn augmented(&self) -> CMatrix {
        augment(&self.h_hat, &self.hd_hat)
    }
}

/// `H̃ = [h_d, H^H]`.
pub fn augment(h: &CMatrix, hd: &CVector) -> CMatrix {
    let n = hd.len();
    let g = h.nrows();
    CMatrix::from_fn(n, g + 1, |r, col| if col == 0 { hd[r] } else { h[(col - 1, r)].conj() })
}

/// Transmits the Zadoff-Chu pilot (root 1) over `G + 1` DFT patterns.
pub fn run_pilot_phase(set: &ChannelSet, cfg: &ScenarioConfig, rng: &mut RngStream) -> Result<PilotBlock> {
    let xp = zadoff_chu(set.groups() + 1, 1)?;
    run_pilot_phase_with(set, &xp, cfg.pp, cfg.sigma2, rng)
}

pub fn run_pilot_phase_with(
    set: &ChannelSet,
    xp: &CVector,
    pp: f64,
    sigma2: f64,
    rng: &mut RngStream,
) -> Result<PilotBlock> {
    let g = set.groups();
    if set.h.ncols() != set.antennas() {
        return Err(Error::validation("H has the wrong number of columns"));
    }
    if xp.len() != g + 1 {
        return Err(Error::validation(format!(
            "pilot length {} differs from G + 1 = {}",
            xp.len(),
            g + 1
        )));
    }
    if !(pp > 0.0) || !(sigma2 >= 0.0) {
        return Err(Error::validation("pilot power must be positive and noise non-negative"));
    }
    let psi = dft_matrix(g + 1)?;
    let ht = augment(&set.h, &set.hd);
    let mut yp = (&ht * &psi) * C64::new(pp.sqrt(), 0.0);
    for col in 0..=g {
        let x = xp[col];
        for v in yp.column_mut(col).iter_mut() {
            *v *= x;
        }
    }
    if sigma2 > 0.0 {
        for v in yp.iter_mut() {
            *v += rng.complex_normal(sigma2);
        }
    }
    Ok(PilotBlock {
        xp: xp.clone(),
        psi,
        yp,
    })
}

/// `H̃_hat = Yp diag(xp)^{-1} F^H / (sqrt(Pp) (G + 1))`.
pub fn estimate_channels(block: &PilotBlock, pp: f64) -> Result<ChannelEstimate> {
    let cols = block.yp.ncols();
    if block.xp.len() != cols || block.psi.nrows() != cols || block.psi.ncols() != cols {
        return Err(Error::validation("pilot block dimensions are inconsistent"));
    }
    if !(pp > 0.0) {
        return Err(Error::validation("pilot power must be positive"));
    }
    if block.xp.iter().any(|x| x.norm() == 0.0) {
        return Err(Error::validation("pilot sequence has a zero entry"));
    }
    let mut scaled = block.yp.clone();
    for col in 0..cols {
        let inv = block.xp[col].inv();
        for v in scaled.column_mut(col).iter_mut() {
            *v *= inv;
        }
    }
    let ht = (scaled * block.psi.adjoint()) / C64::new(pp.sqrt() * cols as f64, 0.0);
    let n = ht.nrows();
    let hd_hat = ht.column(0).into_owned();
    let h_hat = CMatrix::from_fn(cols - 1, n, |g, k| ht[(k, g + 1)].conj());
    Ok(ChannelEstimate { hd_hat, h_hat })
}
