//! Scenario geometry and fading channel synthesis.
//!
//! Coordinates: the AP array is centred at the origin along the x axis, the
//! RIS is centred at `(0, d0, 0)` in the x-z plane and the user is a point at
//! `(0, dy, dz)`. Both arrays use half-wavelength spacing. Line-of-sight terms
//! use the far-field planar-wave approximation around the array centres, so
//! the LoS AP→RIS matrix is rank one.
//!
//! RIS elements are indexed group by group: group `g` owns the contiguous
//! element block `g·L̄ .. (g+1)·L̄`, laid out physically as a rectangular tile
//! (see [`GroupLayout`]).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{cis, CMatrix, CVector, RngStream, C64};

/// Physical and protocol parameters, all in linear units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// AP antennas.
    pub n: usize,
    /// RIS elements along x.
    pub ris_x: usize,
    /// RIS elements along z.
    pub ris_z: usize,
    /// Number of element groups.
    pub g: usize,
    /// ON-state groups per symbol.
    pub kbar: usize,
    /// AP transmit power, W.
    pub pt: f64,
    /// User pilot power, W.
    pub pp: f64,
    /// Noise power, W.
    pub sigma2: f64,
    pub d0: f64,
    pub dy: f64,
    pub dz: f64,
    pub wavelength: f64,
    pub alpha_au: f64,
    pub alpha_ar: f64,
    pub alpha_ru: f64,
    /// Channel power gain at 1 m (linear).
    pub c0: f64,
    #[serde(with = "kappa_serde")]
    pub kappa_au: f64,
    #[serde(with = "kappa_serde")]
    pub kappa_ar: f64,
    #[serde(with = "kappa_serde")]
    pub kappa_ru: f64,
    /// Coherence length in symbol periods.
    pub tc: usize,
    /// Constellation order.
    pub m: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n: 4,
            ris_x: 12,
            ris_z: 12,
            g: 4,
            kbar: 3,
            pt: dbm_to_watts(20.0),
            pp: dbm_to_watts(10.0),
            sigma2: dbm_to_watts(-80.0),
            d0: 50.0,
            dy: 45.0,
            dz: 2.0,
            wavelength: 0.1,
            alpha_au: 3.8,
            alpha_ar: 2.2,
            alpha_ru: 2.4,
            c0: db_to_linear(-30.0),
            kappa_au: 0.0,
            kappa_ar: f64::INFINITY,
            kappa_ru: 0.0,
            tc: 150,
            m: 4,
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl ScenarioConfig {
    /// RIS element count `L`.
    pub fn l(&self) -> usize {
        self.ris_x * self.ris_z
    }

    /// Grouping size `L̄ = L / G`.
    pub fn lbar(&self) -> usize {
        self.l() / self.g.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::config(format!("scenario.{key}"), msg));
        if self.n == 0 {
            return bad("n", "AP needs at least one antenna".into());
        }
        if self.ris_x == 0 || self.ris_z == 0 {
            return bad("ris_x", "RIS dimensions must be positive".into());
        }
        if self.g == 0 {
            return bad("g", "group count must be positive".into());
        }
        if self.l() % self.g != 0 {
            return bad(
                "g",
                format!("L = {} is not divisible by G = {} (grouping size must be an integer)", self.l(), self.g),
            );
        }
        if self.kbar > self.g {
            return bad("kbar", format!("K̄ = {} exceeds G = {}", self.kbar, self.g));
        }
        for (key, v) in [("pt", self.pt), ("pp", self.pp), ("sigma2", self.sigma2)] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(key, format!("power must be positive and finite, got {v}"));
            }
        }
        for (key, v) in [("d0", self.d0), ("wavelength", self.wavelength), ("c0", self.c0)] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(key, format!("must be positive, got {v}"));
            }
        }
        for (key, v) in [("dy", self.dy), ("dz", self.dz)] {
            if !v.is_finite() {
                return bad(key, format!("must be finite, got {v}"));
            }
        }
        for (key, v) in [("kappa_au", self.kappa_au), ("kappa_ar", self.kappa_ar), ("kappa_ru", self.kappa_ru)] {
            if !(v >= 0.0) {
                return bad(key, format!("Rician factor must be non-negative, got {v}"));
            }
        }
        if self.tc <= self.g + 1 {
            return bad("tc", format!("coherence length {} must exceed G + 1 = {}", self.tc, self.g + 1));
        }
        if self.m == 0 {
            return bad("m", "constellation order must be positive".into());
        }
        let d = self.distances();
        if !(d.ap_user > 0.0 && d.ris_user > 0.0) {
            return Err(Error::validation("user position coincides with the AP or the RIS"));
        }
        Ok(())
    }

    pub fn ap_center(&self) -> [f64; 3] {
        [0.0, 0.0, 0.0]
    }

    pub fn ris_center(&self) -> [f64; 3] {
        [0.0, self.d0, 0.0]
    }

    pub fn user_position(&self) -> [f64; 3] {
        [0.0, self.dy, self.dz]
    }

    pub fn distances(&self) -> LinkDistances {
        LinkDistances {
            ap_user: dist(self.ap_center(), self.user_position()),
            ap_ris: dist(self.ap_center(), self.ris_center()),
            ris_user: dist(self.ris_center(), self.user_position()),
        }
    }

    /// Channel power gains `C0 · d^{-α}` per link.
    pub fn path_gains(&self) -> LinkGains {
        let d = self.distances();
        LinkGains {
            ap_user: path_gain(self.c0, d.ap_user, self.alpha_au),
            ap_ris: path_gain(self.c0, d.ap_ris, self.alpha_ar),
            ris_user: path_gain(self.c0, d.ris_user, self.alpha_ru),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkDistances {
    pub ap_user: f64,
    pub ap_ris: f64,
    pub ris_user: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGains {
    pub ap_user: f64,
    pub ap_ris: f64,
    pub ris_user: f64,
}

pub fn path_gain(c0: f64, distance: f64, alpha: f64) -> f64 {
    c0 * distance.powf(-alpha)
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn unit(a: [f64; 3]) -> [f64; 3] {
    let n = dot(a, a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Physical arrangement of the RIS groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupLayout {
    /// `(elements along x, elements along z)` of each group, or `None` when no
    /// rectangular tiling exists and groups are consecutive runs in row-major order.
    pub tile: Option<(usize, usize)>,
    /// Element positions in group-major order.
    pub positions: Vec<[f64; 3]>,
}

/// Chooses the most square tile `tx × tz = L̄` (ties prefer the wider tile)
/// that divides the RIS grid.
pub fn choose_tile(ris_x: usize, ris_z: usize, g: usize) -> Option<(usize, usize)> {
    let l = ris_x * ris_z;
    if g == 0 || l % g != 0 {
        return None;
    }
    let lbar = l / g;
    (1..=ris_x)
        .filter(|tx| ris_x % tx == 0 && lbar % tx == 0)
        .map(|tx| (tx, lbar / tx))
        .filter(|&(_, tz)| tz <= ris_z && ris_z % tz == 0)
        .min_by_key(|&(tx, tz)| (tx.abs_diff(tz), std::cmp::Reverse(tx)))
}

pub fn group_layout(cfg: &ScenarioConfig) -> GroupLayout {
    let half = cfg.wavelength / 2.0;
    let pos = |ix: usize, iz: usize| {
        [
            (ix as f64 - (cfg.ris_x as f64 - 1.0) / 2.0) * half,
            cfg.d0,
            (iz as f64 - (cfg.ris_z as f64 - 1.0) / 2.0) * half,
        ]
    };
    let tile = choose_tile(cfg.ris_x, cfg.ris_z, cfg.g);
    let mut positions = Vec::with_capacity(cfg.l());
    match tile {
        Some((tx, tz)) => {
            for gz in 0..cfg.ris_z / tz {
                for gx in 0..cfg.ris_x / tx {
                    for iz in 0..tz {
                        for ix in 0..tx {
                            positions.push(pos(gx * tx + ix, gz * tz + iz));
                        }
                    }
                }
            }
        }
        None => {
            for iz in 0..cfg.ris_z {
                for ix in 0..cfg.ris_x {
                    positions.push(pos(ix, iz));
                }
            }
        }
    }
    GroupLayout { tile, positions }
}

pub fn ap_positions(cfg: &ScenarioConfig) -> Vec<[f64; 3]> {
    let half = cfg.wavelength / 2.0;
    (0..cfg.n)
        .map(|i| [(i as f64 - (cfg.n as f64 - 1.0) / 2.0) * half, 0.0, 0.0])
        .collect()
}

/// One Rician draw `sqrt(κϖ/(κ+1))·los + sqrt(ϖ/(κ+1))·CN(0,1)`; `κ = ∞`
/// returns the scaled LoS term without consuming randomness.
pub fn rician_link(los: C64, gain: f64, kappa: f64, rng: &mut RngStream) -> C64 {
    if kappa.is_infinite() {
        return los * gain.sqrt();
    }
    let los_amp = (kappa * gain / (kappa + 1.0)).sqrt();
    let nlos_var = gain / (kappa + 1.0);
    los * los_amp + rng.complex_normal(nlos_var)
}

/// One channel realization. Channel rows are stored as conjugated columns,
/// so the downlink gain toward the user is `hd^H w` and `hr^H` is the RIS→user row.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// AP→RIS, `L × N`.
    pub gmat: CMatrix,
    /// RIS→user, length `L`.
    pub hr: CVector,
    /// AP→user, length `N`.
    pub hd: CVector,
    /// Grouped cascaded channel, `G × N`.
    pub h: CMatrix,
}

impl ChannelSet {
    pub fn new(gmat: CMatrix, hr: CVector, hd: CVector, g: usize) -> Result<Self> {
        if gmat.ncols() != hd.len() || gmat.nrows() != hr.len() {
            return Err(Error::validation(format!(
                "inconsistent channel sizes: G is {}x{}, hr has {}, hd has {}",
                gmat.nrows(),
                gmat.ncols(),
                hr.len(),
                hd.len()
            )));
        }
        let h = group_cascade(&gmat, &hr, g)?;
        Ok(Self { gmat, hr, hd, h })
    }

    pub fn groups(&self) -> usize {
        self.h.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.hd.len()
    }

    /// Replaces `h` and `hd` (keeps the ungrouped parts as given).
    pub fn with_estimates(&self, h: CMatrix, hd: CVector) -> Self {
        Self {
            gmat: self.gmat.clone(),
            hr: self.hr.clone(),
            hd,
            h,
        }
    }
}

/// `H[g, :] = r_g^H Δ_g^H = Σ_{ℓ ∈ group g} conj(hr_ℓ) · G[ℓ, :]` over contiguous blocks.
pub fn group_cascade(gmat: &CMatrix, hr: &CVector, g: usize) -> Result<CMatrix> {
    let l = gmat.nrows();
    if g == 0 || l % g != 0 {
        return Err(Error::validation(format!("L = {l} is not divisible by G = {g}")));
    }
    if hr.len() != l {
        return Err(Error::validation("hr length differs from the row count of G"));
    }
    let lbar = l / g;
    let n = gmat.ncols();
    let mut h = CMatrix::zeros(g, n);
    for grp in 0..g {
        for el in grp * lbar..(grp + 1) * lbar {
            let r = hr[el].conj();
            for k in 0..n {
                h[(grp, k)] += r * gmat[(el, k)];
            }
        }
    }
    Ok(h)
}

/// Draws AP→RIS, RIS→user and AP→user channels for `cfg`.
pub fn sample_channels(cfg: &ScenarioConfig, rng: &mut RngStream) -> Result<ChannelSet> {
    cfg.validate()?;
    let d = cfg.distances();
    let gains = cfg.path_gains();
    let k = 2.0 * PI / cfg.wavelength;

    let ap = ap_positions(cfg);
    let ris = group_layout(cfg).positions;
    let ca = cfg.ap_center();
    let cr = cfg.ris_center();
    let cu = cfg.user_position();

    let u_ar = unit(sub(cr, ca));
    let u_ru = unit(sub(cr, cu));
    let u_au = unit(sub(cu, ca));

    // Far-field path lengths around the array centres.
    let gmat = CMatrix::from_fn(ris.len(), ap.len(), |l, n| {
        let path = d.ap_ris + dot(sub(ris[l], cr), u_ar) - dot(sub(ap[n], ca), u_ar);
        rician_link(cis(-k * path), gains.ap_ris, cfg.kappa_ar, rng)
    });
    let hr = CVector::from_fn(ris.len(), |l, _| {
        let path = d.ris_user + dot(sub(ris[l], cr), u_ru);
        rician_link(cis(-k * path), gains.ris_user, cfg.kappa_ru, rng).conj()
    });
    let hd = CVector::from_fn(ap.len(), |n, _| {
        let path = d.ap_user - dot(sub(ap[n], ca), u_au);
        rician_link(cis(-k * path), gains.ap_user, cfg.kappa_au, rng).conj()
    });
    ChannelSet::new(gmat, hr, hd, cfg.g)
}

/// Scalar gain `(θ^T H + hd^H) w`.
pub fn link_gain(h: &CMatrix, hd: &CVector, theta: &CVector, w: &CVector) -> C64 {
    let hw = h * w;
    let reflected: C64 = theta.iter().zip(hw.iter()).map(|(t, x)| t * x).sum();
    reflected + hd.dotc(w)
}

/// `y = sqrt(Pt) (θ^T H + hd^H) w x + noise`.
pub fn received_signal(
    set: &ChannelSet,
    theta: &CVector,
    w: &CVector,
    x: C64,
    pt: f64,
    noise: C64,
) -> Result<C64> {
    if theta.len() != set.groups() {
        return Err(Error::validation(format!(
            "reflection vector has length {}, expected G = {}",
            theta.len(),
            set.groups()
        )));
    }
    if w.len() != set.antennas() {
        return Err(Error::validation(format!(
            "beamformer has length {}, expected N = {}",
            w.len(),
            set.antennas()
        )));
    }
    if w.norm() > 1.0 + 1e-12 {
        return Err(Error::validation(format!("beamformer norm {} exceeds 1", w.norm())));
    }
    if theta.iter().any(|t| {
        let r = t.norm();
        r > 1e-9 && (r - 1.0).abs() > 1e-9
    }) {
        return Err(Error::validation("reflection coefficients must have modulus 0 or 1"));
    }
    Ok(link_gain(&set.h, &set.hd, theta, w) * (pt.sqrt() * x) + noise)
}

mod kappa_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t.trim().eq_ignore_ascii_case("inf") => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got {t:?}"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{c, substream};

    #[test]
    fn default_geometry() {
        let cfg = ScenarioConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.l(), 144);
        assert_eq!(cfg.lbar(), 36);
        assert!((cfg.pt - 0.1).abs() < 1e-15);
        assert!((cfg.sigma2 - 1e-11).abs() < 1e-25);
        assert!((cfg.c0 - 1e-3).abs() < 1e-15);
        let d = cfg.distances();
        assert!((d.ris_user - 29f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn tiles_follow_table() {
        assert_eq!(choose_tile(12, 12, 2), Some((12, 6)));
        assert_eq!(choose_tile(12, 12, 4), Some((6, 6)));
        assert_eq!(choose_tile(12, 12, 6), Some((6, 4)));
        assert_eq!(choose_tile(12, 12, 9), Some((4, 4)));
        assert_eq!(choose_tile(12, 12, 144), Some((1, 1)));
        assert_eq!(choose_tile(12, 12, 5), None);
        assert_eq!(choose_tile(5, 1, 5), Some((1, 1)));
        // 7 elements, 7 groups along x only.
        assert_eq!(choose_tile(7, 2, 2), Some((7, 1)));
    }

    #[test]
    fn layout_groups_are_contiguous_tiles() {
        let cfg = ScenarioConfig::default();
        let layout = group_layout(&cfg);
        assert_eq!(layout.positions.len(), 144);
        let lbar = cfg.lbar();
        for grp in 0..cfg.g {
            let block = &layout.positions[grp * lbar..(grp + 1) * lbar];
            let xs: Vec<f64> = block.iter().map(|p| p[0]).collect();
            let zs: Vec<f64> = block.iter().map(|p| p[2]).collect();
            let span = |v: &[f64]| v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min);
            assert!((span(&xs) - 5.0 * 0.05).abs() < 1e-12);
            assert!((span(&zs) - 5.0 * 0.05).abs() < 1e-12);
        }
    }

    #[test]
    fn pure_los_has_fixed_magnitude() {
        let mut rng = substream(1, 1);
        let gain = path_gain(1e-3, 20.0, 2.2);
        let draws: Vec<C64> = (0..100).map(|_| rician_link(cis(0.7), gain, f64::INFINITY, &mut rng)).collect();
        for z in &draws {
            assert!((z.norm() - gain.sqrt()).abs() < 1e-18);
            assert_eq!(*z, draws[0]);
        }
    }

    #[test]
    fn rayleigh_moments_at_reference_distance() {
        let mut rng = substream(2, 7);
        let c0 = 1e-3;
        let gain = path_gain(c0, 1.0, 3.8);
        let n = 100_000;
        let draws: Vec<C64> = (0..n).map(|_| rician_link(cis(1.3), gain, 0.0, &mut rng)).collect();
        let mean: C64 = draws.iter().sum::<C64>() / n as f64;
        let var = draws.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / (n as f64 - 1.0);
        assert!((var / c0 - 1.0).abs() <= 0.02, "{var}");
        assert!(mean.norm() <= 0.02 * gain.sqrt());
    }

    #[test]
    fn rician_energy_bookkeeping() {
        let mut rng = substream(3, 3);
        let gain = 2.5;
        for kappa in [0.0, 1.0, 10.0] {
            let n = 200_000;
            let p = (0..n).map(|_| rician_link(cis(0.2), gain, kappa, &mut rng).norm_sqr()).sum::<f64>() / n as f64;
            assert!((p / gain - 1.0).abs() < 0.02, "kappa {kappa}: {p}");
        }
    }

    #[test]
    fn los_ap_ris_is_rank_one() {
        let mut cfg = ScenarioConfig::default();
        // Off-broadside so the steering vectors are non-trivial.
        cfg.d0 = 30.0;
        let mut rng = substream(4, 0);
        let set = sample_channels(&cfg, &mut rng).unwrap();
        let sv = set.gmat.clone().singular_values();
        let mut s: Vec<f64> = sv.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        assert!(s[1] <= 1e-9 * s[0]);
    }

    #[test]
    fn cascade_single_element_groups() {
        let mut rng = substream(5, 0);
        let gmat = CMatrix::from_fn(3, 2, |_, _| rng.complex_normal(1.0));
        let hr = rng.complex_normal_vec(3, 1.0);
        let h = group_cascade(&gmat, &hr, 3).unwrap();
        for grp in 0..3 {
            for k in 0..2 {
                assert!((h[(grp, k)] - hr[grp].conj() * gmat[(grp, k)]).norm() < 1e-15);
            }
        }
        let zero = group_cascade(&gmat, &CVector::zeros(3), 3).unwrap();
        assert!(zero.iter().all(|z| z.norm() == 0.0));
        assert!(group_cascade(&gmat, &hr, 2).is_err());
    }

    #[test]
    fn grouped_sum_equals_ungrouped_sum() {
        let mut rng = substream(6, 0);
        let gmat = CMatrix::from_fn(4, 3, |_, _| rng.complex_normal(1.0));
        let hr = rng.complex_normal_vec(4, 1.0);
        let h = group_cascade(&gmat, &hr, 2).unwrap();
        for _ in 0..10 {
            let w = rng.complex_normal_vec(3, 1.0);
            let grouped: C64 = (&h * &w).iter().sum();
            let ungrouped: C64 = (0..4)
                .map(|l| hr[l].conj() * (0..3).map(|k| gmat[(l, k)] * w[k]).sum::<C64>())
                .sum();
            assert!((grouped - ungrouped).norm() < 1e-12);
        }
    }

    #[test]
    fn received_signal_forms_agree() {
        let cfg = ScenarioConfig::default();
        let mut rng = substream(7, 0);
        let set = sample_channels(&cfg, &mut rng).unwrap();
        let w = rng.complex_normal_vec(cfg.n, 1.0);
        let w = w.unscale(w.norm());
        let theta = CVector::from_vec(vec![cis(0.3), C64::new(0.0, 0.0), cis(-1.0), cis(2.2)]);
        let x = c(0.6, -0.8);
        let noise = c(1e-6, 2e-6);
        let y = received_signal(&set, &theta, &w, x, cfg.pt, noise).unwrap();

        // Per-group sum Σ_g r_g^H θ_g Δ_g^H w + hd^H w from the ungrouped channels.
        let lbar = cfg.lbar();
        let mut acc = set.hd.dotc(&w);
        for grp in 0..cfg.g {
            for el in grp * lbar..(grp + 1) * lbar {
                let row_w: C64 = (0..cfg.n).map(|k| set.gmat[(el, k)] * w[k]).sum();
                acc += set.hr[el].conj() * theta[grp] * row_w;
            }
        }
        let y_ref = acc * cfg.pt.sqrt() * x + noise;
        assert!((y - y_ref).norm() <= 1e-12 * y_ref.norm().max(1e-300));

        let off = received_signal(&set, &CVector::zeros(cfg.g), &w, x, cfg.pt, C64::new(0.0, 0.0)).unwrap();
        assert!((off - set.hd.dotc(&w) * cfg.pt.sqrt() * x).norm() < 1e-20);
        let silent = received_signal(&set, &theta, &w, C64::new(0.0, 0.0), cfg.pt, C64::new(0.0, 0.0)).unwrap();
        assert_eq!(silent, C64::new(0.0, 0.0));
    }

    #[test]
    fn received_signal_rejects_bad_inputs() {
        let cfg = ScenarioConfig::default();
        let set = sample_channels(&cfg, &mut substream(8, 0)).unwrap();
        let w = CVector::from_element(cfg.n, c(0.5, 0.0));
        let short = CVector::zeros(3);
        assert!(received_signal(&set, &short, &w, c(1.0, 0.0), 1.0, c(0.0, 0.0)).is_err());
        let big = CVector::from_element(cfg.n, c(1.0, 0.0));
        assert!(received_signal(&set, &CVector::zeros(4), &big, c(1.0, 0.0), 1.0, c(0.0, 0.0)).is_err());
        let half = CVector::from_element(4, c(0.5, 0.0));
        assert!(received_signal(&set, &half, &w, c(1.0, 0.0), 1.0, c(0.0, 0.0)).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = ScenarioConfig::default();
        cfg.ris_x = 145;
        cfg.ris_z = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::default();
        cfg.kbar = 5;
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::default();
        cfg.tc = 5;
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::default();
        cfg.dy = 50.0;
        cfg.dz = 0.0;
        assert!(sample_channels(&cfg, &mut substream(0, 0)).is_err());
    }

    #[test]
    fn kappa_serde_handles_infinity() {
        let cfg = ScenarioConfig::default();
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"kappa_ar\":\"inf\""));
        let back: ScenarioConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }
}
