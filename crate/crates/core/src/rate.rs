//! Finite-alphabet achievable rate of reflection pattern modulation.
//!
//! Both estimators evaluate
//!
//! `R = log2(JM) − (1/JM) Σ_{j,m} E_u log2 Σ_{j',m'} exp(−(|u + d|² − |u|²))`
//!
//! with `u ~ CN(0, 1)` and `d = sqrt(Pt/σ²)(c_j a_m − c_{j'} a_{m'})`, where
//! `c_j` is the effective channel under ON set `S_j`. Subtracting `|u|²`
//! inside the exponent replaces the constant `log2 e` by its sample
//! counterpart, which leaves the expectation unchanged and removes most of
//! the Monte-Carlo noise.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2};

use serde::{Deserialize, Serialize};

use crate::beamform::{alternating_optimize_instantaneous, select_rows, InstantaneousSettings};
use crate::error::{Error, Result};
use crate::numkit::{self, CMatrix, CVector, RngStream, C64};

/// ON sets indexed `j = 0..J` in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComboIndex {
    pub g: usize,
    pub sets: Vec<Vec<usize>>,
}

impl ComboIndex {
    pub fn j(&self) -> usize {
        self.sets.len()
    }

    /// Every subset of `0..G` (`J = 2^G`), for independent per-group states.
    pub fn all_subsets(g: usize) -> Result<Self> {
        if g >= 24 {
            return Err(Error::validation(format!("2^{g} subsets is too many")));
        }
        let sets = (0..1usize << g)
            .map(|mask| (0..g).filter(|i| mask >> i & 1 == 1).collect())
            .collect();
        Ok(Self { g, sets })
    }
}

pub fn combo_index_set(g: usize, kbar: usize) -> Result<ComboIndex> {
    if kbar > g {
        return Err(Error::validation(format!("K̄ = {kbar} exceeds G = {g}")));
    }
    Ok(ComboIndex {
        g,
        sets: numkit::combinations(g, kbar),
    })
}

/// Lexicographic rank of a sorted `k`-subset of `0..g`.
pub fn combination_rank(set: &[usize], g: usize) -> Result<usize> {
    let k = set.len();
    if set.windows(2).any(|p| p[0] >= p[1]) || set.last().is_some_and(|&x| x >= g) {
        return Err(Error::validation("set must be strictly increasing within 0..G"));
    }
    let mut rank = 0;
    let mut start = 0;
    for (i, &x) in set.iter().enumerate() {
        for c in start..x {
            rank += numkit::binomial(g - c - 1, k - i - 1);
        }
        start = x + 1;
    }
    Ok(rank)
}

/// Inverse of [`combination_rank`].
pub fn combination_unrank(mut rank: usize, g: usize, k: usize) -> Result<Vec<usize>> {
    if k > g || rank >= numkit::binomial(g, k) {
        return Err(Error::validation(format!("rank {rank} out of range for C({g}, {k})")));
    }
    let mut out = Vec::with_capacity(k);
    let mut c = 0;
    for i in 0..k {
        loop {
            let count = numkit::binomial(g - c - 1, k - i - 1);
            if rank < count {
                break;
            }
            rank -= count;
            c += 1;
        }
        out.push(c);
        c += 1;
    }
    Ok(out)
}

/// Bits carried by the ON pattern when only `2^⌊log2 J⌋` sets are used.
pub fn pattern_bits(g: usize, k: usize) -> u32 {
    let j = numkit::binomial(g, k);
    if j == 0 {
        0
    } else {
        usize::BITS - 1 - j.leading_zeros()
    }
}

/// Maps a `⌊log2 J⌋`-bit word to an ON set.
pub fn bits_to_combination(bits: u64, g: usize, k: usize) -> Result<Vec<usize>> {
    let width = pattern_bits(g, k);
    if width < 64 && bits >> width != 0 {
        return Err(Error::validation(format!("{bits} does not fit in {width} bits")));
    }
    combination_unrank(bits as usize, g, k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    pub points: Vec<C64>,
}

impl Constellation {
    pub fn new(points: Vec<C64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::validation("empty constellation"));
        }
        let power = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / points.len() as f64;
        if (power - 1.0).abs() > 1e-12 {
            return Err(Error::validation(format!("average power {power} is not 1")));
        }
        for (i, a) in points.iter().enumerate() {
            if points[..i].iter().any(|b| (a - b).norm() < 1e-12) {
                return Err(Error::validation("constellation points must be distinct"));
            }
        }
        Ok(Self { points })
    }

    /// Gray-labelled QPSK: label `2 b1 + b0` maps to `((1 − 2 b1) + j(1 − 2 b0))/√2`.
    pub fn qpsk() -> Self {
        let points = (0..4)
            .map(|m| C64::new(1.0 - 2.0 * (m >> 1) as f64, 1.0 - 2.0 * (m & 1) as f64) * FRAC_1_SQRT_2)
            .collect();
        Self { points }
    }

    pub fn bpsk() -> Self {
        Self {
            points: vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)],
        }
    }

    /// QPSK for `M = 4`, BPSK for `M = 2`, unit-circle PSK otherwise.
    pub fn for_order(m: usize) -> Result<Self> {
        match m {
            0 => Err(Error::validation("empty constellation")),
            2 => Ok(Self::bpsk()),
            4 => Ok(Self::qpsk()),
            _ => Self::new(
                (0..m)
                    .map(|i| numkit::cis(2.0 * std::f64::consts::PI * i as f64 / m as f64))
                    .collect(),
            ),
        }
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }
}

/// Effective channels seen by the user.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannels {
    /// `ΦĤw` per group.
    pub g_r: CVector,
    /// `ĥ_d^H w`.
    pub g_d: C64,
}

impl EffectiveChannels {
    /// For beamformer `w` and phases `φ` on channels `(h, hd)`.
    pub fn new(w: &CVector, phi: &CVector, h: &CMatrix, hd: &CVector) -> Result<Self> {
        if h.nrows() != phi.len() || h.ncols() != w.len() || hd.len() != w.len() {
            return Err(Error::validation("effective channel dimensions disagree"));
        }
        let hw = h * w;
        Ok(Self {
            g_r: CVector::from_fn(phi.len(), |g, _| phi[g] * hw[g]),
            g_d: hd.dotc(w),
        })
    }

    /// `Σ_{k ∈ S} g_r[k] + g_d`.
    pub fn combined(&self, set: &[usize]) -> C64 {
        set.iter().map(|&k| self.g_r[k]).sum::<C64>() + self.g_d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub mean_bits: f64,
    pub stderr: f64,
    pub noise_samples: usize,
    pub channel_samples: usize,
}

/// Draws the `CN(0, 1)` noise samples shared by every `(j, m)` term.
pub fn draw_noise(noise_samples: usize, rng: &mut RngStream) -> Result<Vec<C64>> {
    if noise_samples == 0 {
        return Err(Error::validation("noise_samples must be at least 1"));
    }
    Ok((0..noise_samples).map(|_| rng.complex_normal(1.0)).collect())
}

/// Rate for per-set effective channels `c_j` with normalized noise samples `u`.
pub fn rate_from_channels(
    channels: &[C64],
    constellation: &Constellation,
    pt: f64,
    sigma2: f64,
    noise: &[C64],
) -> Result<RateEstimate> {
    if constellation.points.is_empty() {
        return Err(Error::validation("empty constellation"));
    }
    if channels.is_empty() {
        return Err(Error::validation("no ON sets"));
    }
    if noise.is_empty() {
        return Err(Error::validation("noise_samples must be at least 1"));
    }
    if !(sigma2 > 0.0) || !(pt >= 0.0) {
        return Err(Error::validation("need σ² > 0 and Pt ≥ 0"));
    }
    let scale = (pt / sigma2).sqrt();
    let points: Vec<C64> = channels
        .iter()
        .flat_map(|c| constellation.points.iter().map(move |a| c * a * scale))
        .collect();
    let jm = points.len();
    let log_jm = (jm as f64).log2();

    let mut per_sample = Vec::with_capacity(noise.len());
    let mut exps = vec![0.0; jm];
    for u in noise {
        let mut acc = 0.0;
        for p in &points {
            for (e, q) in exps.iter_mut().zip(&points) {
                let d = p - q;
                // −(|u + d|² − |u|²)
                *e = -(d.norm_sqr() + 2.0 * (u.conj() * d).re);
            }
            acc += numkit::log_sum_exp(&exps);
        }
        per_sample.push(log_jm - acc / (jm as f64 * LN_2));
    }
    let n = per_sample.len() as f64;
    let mean = per_sample.iter().sum::<f64>() / n;
    let var = if per_sample.len() > 1 {
        per_sample.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(RateEstimate {
        // Tiny negatives are sampling noise around a non-negative quantity.
        mean_bits: mean.max(0.0),
        stderr: (var / n).sqrt(),
        noise_samples: noise.len(),
        channel_samples: 1,
    })
}

/// Rate of a fixed design `(w, φ)` whose ON set is drawn uniformly from `combos`.
pub fn rate_practical(
    eff: &EffectiveChannels,
    combos: &ComboIndex,
    constellation: &Constellation,
    pt: f64,
    sigma2: f64,
    noise_samples: usize,
    rng: &mut RngStream,
) -> Result<RateEstimate> {
    let noise = draw_noise(noise_samples, rng)?;
    rate_practical_with_noise(eff, combos, constellation, pt, sigma2, &noise)
}

pub fn rate_practical_with_noise(
    eff: &EffectiveChannels,
    combos: &ComboIndex,
    constellation: &Constellation,
    pt: f64,
    sigma2: f64,
    noise: &[C64],
) -> Result<RateEstimate> {
    if combos.sets.iter().flatten().any(|&k| k >= eff.g_r.len()) {
        return Err(Error::validation("ON set refers to a missing group"));
    }
    let channels: Vec<C64> = combos.sets.iter().map(|s| eff.combined(s)).collect();
    rate_from_channels(&channels, constellation, pt, sigma2, noise)
}

/// Effective channels `f(S_j, H, h_d)` of the per-set instantaneous design.
pub fn upper_bound_channels(h: &CMatrix, hd: &CVector, combos: &ComboIndex) -> Result<Vec<C64>> {
    combos
        .sets
        .iter()
        .map(|set| {
            let h_i = select_rows(h, set);
            let sol = alternating_optimize_instantaneous(&h_i, hd, &InstantaneousSettings::default())?;
            Ok(crate::channel::link_gain(&h_i, hd, &sol.theta, &sol.w))
        })
        .collect()
}

/// Rate when the transmitter knows the ON set and redesigns `(w, θ)` for each.
pub fn rate_upper_bound(
    h: &CMatrix,
    hd: &CVector,
    combos: &ComboIndex,
    constellation: &Constellation,
    pt: f64,
    sigma2: f64,
    noise_samples: usize,
    rng: &mut RngStream,
) -> Result<RateEstimate> {
    let noise = draw_noise(noise_samples, rng)?;
    let channels = upper_bound_channels(h, hd, combos)?;
    rate_from_channels(&channels, constellation, pt, sigma2, &noise)
}

/// Pilot overhead `ξ = (G + 1)/T_c`.
pub fn overhead_ratio(g: usize, tc: usize) -> Result<f64> {
    if tc <= g + 1 {
        return Err(Error::validation(format!("T_c = {tc} must exceed G + 1 = {}", g + 1)));
    }
    Ok((g + 1) as f64 / tc as f64)
}

/// `(1 − ξ) · rate`.
pub fn effective_rate_with_overhead(rate: f64, g: usize, tc: usize) -> Result<f64> {
    Ok((1.0 - overhead_ratio(g, tc)?) * rate)
}
