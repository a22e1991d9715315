//! Joint active/passive beamforming designs.
//!
//! Conventions: `h` is the `G × N` grouped cascaded channel whose row `g` is
//! `ĥ_g^H`, and `hd` is the direct channel column, so the received amplitude
//! for ON/OFF vector `s` and phases `φ` is `(sᵀ Φ h + hd^H) w`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{self, cis, CMatrix, CVector, RngStream, C64};
use crate::sdp::{self, SdpSettings, SdrProblem};

/// First and second moments of the ON/OFF vector `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct OnOffStatistics {
    /// `E[s sᵀ]`.
    pub a_mat: DMatrix<f64>,
    /// `E[s]`.
    pub a_vec: DVector<f64>,
}

impl OnOffStatistics {
    pub fn groups(&self) -> usize {
        self.a_vec.len()
    }

    /// `[[A, a], [aᵀ, 1]]`.
    pub fn atilde(&self) -> DMatrix<f64> {
        let g = self.groups();
        DMatrix::from_fn(g + 1, g + 1, |i, j| match (i == g, j == g) {
            (false, false) => self.a_mat[(i, j)],
            (false, true) => self.a_vec[i],
            (true, false) => self.a_vec[j],
            (true, true) => 1.0,
        })
    }

    /// `E[sᵀ s]`, the mean number of ON groups.
    pub fn expected_on(&self) -> f64 {
        self.a_mat.trace()
    }
}

/// Uniform choice of `K̄` ON groups out of `G`.
pub fn onoff_stats_rpm(g: usize, kbar: usize) -> Result<OnOffStatistics> {
    if g == 0 {
        return Err(Error::validation("G must be at least 1"));
    }
    if kbar > g {
        return Err(Error::validation(format!("K̄ = {kbar} exceeds G = {g}")));
    }
    let (gf, kf) = (g as f64, kbar as f64);
    let diag = kf / gf;
    let off = if g > 1 { kf * (kf - 1.0) / (gf * (gf - 1.0)) } else { 0.0 };
    Ok(OnOffStatistics {
        a_mat: DMatrix::from_fn(g, g, |i, j| if i == j { diag } else { off }),
        a_vec: DVector::from_element(g, diag),
    })
}

/// Independent fair coin per group.
pub fn onoff_stats_pbit(g: usize) -> Result<OnOffStatistics> {
    if g == 0 {
        return Err(Error::validation("G must be at least 1"));
    }
    Ok(OnOffStatistics {
        a_mat: DMatrix::from_fn(g, g, |i, j| if i == j { 0.5 } else { 0.25 }),
        a_vec: DVector::from_element(g, 0.5),
    })
}

fn check_dims(h: &CMatrix, hd: &CVector, groups: usize) -> Result<()> {
    if h.nrows() != groups {
        return Err(Error::validation(format!(
            "H has {} rows, expected {groups}",
            h.nrows()
        )));
    }
    if h.ncols() != hd.len() {
        return Err(Error::validation(format!(
            "H has {} columns but hd has length {}",
            h.ncols(),
            hd.len()
        )));
    }
    Ok(())
}

/// `[ΦĤ; ĥ_d^H] w` as a length-`G+1` vector.
fn stacked_gains(w: &CVector, phi: &CVector, h: &CMatrix, hd: &CVector) -> CVector {
    let hw = h * w;
    let g = hw.len();
    let gd = hd.dotc(w);
    CVector::from_fn(g + 1, |i, _| if i < g { phi[i] * hw[i] } else { gd })
}

fn real_quadratic(v: &CVector, m: &DMatrix<f64>) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..v.len() {
        for j in 0..v.len() {
            acc += v[i].conj() * m[(i, j)] * v[j];
        }
    }
    acc.re.max(0.0)
}

/// Average received power over `s`, normalized by `Pt`.
pub fn avg_power_objective(
    w: &CVector,
    phi: &CVector,
    h: &CMatrix,
    hd: &CVector,
    stats: &OnOffStatistics,
) -> Result<f64> {
    check_dims(h, hd, stats.groups())?;
    if phi.len() != stats.groups() || w.len() != hd.len() {
        return Err(Error::validation("w or φ has the wrong length"));
    }
    Ok(real_quadratic(&stacked_gains(w, phi, h, hd), &stats.atilde()))
}

/// `R̃ = B^H Ã B` with `B = [ΦĤ; ĥ_d^H]`.
fn rtilde(phi: &CVector, h: &CMatrix, hd: &CVector, stats: &OnOffStatistics) -> CMatrix {
    let g = h.nrows();
    let n = h.ncols();
    let b = CMatrix::from_fn(g + 1, n, |i, k| if i < g { phi[i] * h[(i, k)] } else { hd[k].conj() });
    let at = stats.atilde().map(|v| C64::new(v, 0.0));
    let r = b.adjoint() * at * &b;
    (&r + r.adjoint()) * C64::new(0.5, 0.0)
}

/// Optimal `w` for fixed `φ` and its objective `λ_max(R̃)`.
pub fn solve_w_given_phi(
    phi: &CVector,
    h: &CMatrix,
    hd: &CVector,
    stats: &OnOffStatistics,
) -> Result<(CVector, f64)> {
    check_dims(h, hd, stats.groups())?;
    if phi.len() != stats.groups() {
        return Err(Error::validation("φ has the wrong length"));
    }
    let (lambda, v) = numkit::hermitian_eig_max(&rtilde(phi, h, hd, stats))?;
    let norm = v.norm();
    let w = if norm > 0.0 { v.unscale(norm) } else { unit_first(hd.len()) };
    Ok((w, lambda.max(0.0)))
}

fn unit_first(n: usize) -> CVector {
    CVector::from_fn(n, |i, _| if i == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
}

/// `Λ = diag(Ĥw)` and `g_d = ĥ_d^H w`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSubproblem {
    pub lambda: CVector,
    pub gd: C64,
}

impl PhaseSubproblem {
    pub fn new(w: &CVector, h: &CMatrix, hd: &CVector) -> Self {
        Self {
            lambda: h * w,
            gd: hd.dotc(w),
        }
    }

    /// `Ξ = [[Λ^H A Λ, g_d Λ^H a], [g_d^* aᵀ Λ, 0]]`.
    pub fn xi(&self, stats: &OnOffStatistics) -> CMatrix {
        let g = self.lambda.len();
        CMatrix::from_fn(g + 1, g + 1, |i, j| match (i == g, j == g) {
            (false, false) => self.lambda[i].conj() * stats.a_mat[(i, j)] * self.lambda[j],
            (false, true) => self.gd * self.lambda[i].conj() * stats.a_vec[i],
            (true, false) => self.gd.conj() * stats.a_vec[j] * self.lambda[j],
            (true, true) => C64::new(0.0, 0.0),
        })
    }
}

/// Phase-step tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSettings {
    pub eps: f64,
    pub max_iter: usize,
    pub randomization_samples: usize,
    pub sdp: SdpSettings,
}

impl Default for AlgorithmSettings {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            max_iter: 5,
            randomization_samples: 100,
            sdp: SdpSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseStep {
    pub phi: CVector,
    /// `φ̃^H Ξ φ̃`, i.e. the average power minus the constant `|g_d|²`.
    pub objective: f64,
}

/// SDR plus Gaussian randomization for `φ` at fixed `w`.
pub fn solve_phi_given_w(
    w: &CVector,
    h: &CMatrix,
    hd: &CVector,
    stats: &OnOffStatistics,
    settings: &AlgorithmSettings,
    rng: &mut RngStream,
) -> Result<PhaseStep> {
    check_dims(h, hd, stats.groups())?;
    if w.norm() > 1.0 + 1e-12 {
        return Err(Error::validation("‖w‖ exceeds 1"));
    }
    let sub = PhaseSubproblem::new(w, h, hd);
    let problem = SdrProblem::new(sub.xi(stats))?;
    let sol = match sdp::solve_unit_diag_sdp_with(&problem, &settings.sdp) {
        Ok(sol) => sol,
        // The last interior iterate is still a usable randomization source.
        Err(Error::Convergence { last, .. }) => *last,
        Err(e) => return Err(e),
    };
    let best = sdp::gaussian_randomize(&sol, &problem, settings.randomization_samples, rng)?;
    let phi = sdp::extract_phases(&best.phases)?;
    let phi_tilde = phi.clone().insert_row(phi.len(), C64::new(1.0, 0.0));
    Ok(PhaseStep {
        objective: problem.quadratic(&phi_tilde),
        phi,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformSolution {
    pub w: CVector,
    pub phi: CVector,
    /// Objective after the initial `w` step and after every iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl BeamformSolution {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().unwrap_or(&0.0)
    }
}

/// Alternating optimization of `w` and `φ` for the average received power.
pub fn alternating_optimize_statistical(
    h: &CMatrix,
    hd: &CVector,
    stats: &OnOffStatistics,
    settings: &AlgorithmSettings,
    rng: &mut RngStream,
) -> Result<BeamformSolution> {
    check_dims(h, hd, stats.groups())?;
    if !(settings.eps > 0.0) || settings.max_iter == 0 {
        return Err(Error::validation("ε must be positive and the iteration cap at least 1"));
    }
    let g = stats.groups();
    let mut phi = CVector::from_element(g, C64::new(1.0, 0.0));
    let (mut w, mut obj) = solve_w_given_phi(&phi, h, hd, stats)?;
    let mut trace = vec![obj];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < settings.max_iter {
        iterations += 1;
        let step = solve_phi_given_w(&w, h, hd, stats, settings, rng)?;
        // Randomization is heuristic; never accept a worse φ.
        if avg_power_objective(&w, &step.phi, h, hd, stats)? >= avg_power_objective(&w, &phi, h, hd, stats)? {
            phi = step.phi;
        }
        let (w_new, obj_new) = solve_w_given_phi(&phi, h, hd, stats)?;
        let prev = obj;
        if obj_new >= prev {
            w = w_new;
            obj = obj_new;
        }
        trace.push(obj);
        if prev <= 0.0 || (obj - prev) / prev < settings.eps {
            converged = true;
            break;
        }
    }

    Ok(BeamformSolution {
        w,
        phi,
        objective_trace: trace,
        iterations,
        converged,
    })
}

/// Design for one known ON set.
#[derive(Debug, Clone, PartialEq)]
pub struct InstantaneousSolution {
    pub w: CVector,
    /// Phases of the ON groups, in the row order of `H_I`.
    pub theta: CVector,
    /// `|(θᵀ H_I + hd^H) w|²`.
    pub objective: f64,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstantaneousSettings {
    pub eps: f64,
    pub max_iter: usize,
}

impl Default for InstantaneousSettings {
    fn default() -> Self {
        Self { eps: 1e-6, max_iter: 50 }
    }
}

fn cophase(h_i: &CMatrix, gd: C64, w: &CVector) -> CVector {
    let reference = if gd.norm() > 0.0 { gd.arg() } else { 0.0 };
    let hw = h_i * w;
    hw.map(|x| if x.norm() > 0.0 { cis(reference - x.arg()) } else { C64::new(1.0, 0.0) })
}

fn combined_row(h_i: &CMatrix, hd: &CVector, theta: &CVector) -> CVector {
    // Conjugate of the row θᵀ H_I + hd^H, so that MRT is its normalization.
    let mut col = hd.clone();
    for k in 0..h_i.nrows() {
        for n in 0..h_i.ncols() {
            col[n] += (theta[k] * h_i[(k, n)]).conj();
        }
    }
    col
}

/// Alternates closed-form co-phasing and MRT for a known ON set `H_I` (rows).
pub fn alternating_optimize_instantaneous(
    h_i: &CMatrix,
    hd: &CVector,
    settings: &InstantaneousSettings,
) -> Result<InstantaneousSolution> {
    if h_i.ncols() != hd.len() {
        return Err(Error::validation("H_I and hd disagree on N"));
    }
    if hd.is_empty() {
        return Err(Error::validation("N must be at least 1"));
    }
    let n = hd.len();
    let mut w = if hd.norm() > 0.0 {
        hd.unscale(hd.norm())
    } else if h_i.nrows() > 0 {
        let gram = h_i.adjoint() * h_i;
        let (_, v) = numkit::hermitian_eig_max(&gram)?;
        if v.norm() > 0.0 { v.unscale(v.norm()) } else { unit_first(n) }
    } else {
        unit_first(n)
    };
    let mut theta = cophase(h_i, hd.dotc(&w), &w);
    let mut obj = crate::channel::link_gain(h_i, hd, &theta, &w).norm_sqr();
    let mut trace = vec![obj];
    let mut iterations = 0;

    while iterations < settings.max_iter {
        iterations += 1;
        let c = combined_row(h_i, hd, &theta);
        let norm = c.norm();
        if norm == 0.0 {
            break;
        }
        w = c.unscale(norm);
        let prev = obj;
        theta = cophase(h_i, hd.dotc(&w), &w);
        obj = crate::channel::link_gain(h_i, hd, &theta, &w).norm_sqr();
        trace.push(obj);
        if prev <= 0.0 || (obj - prev) / prev < settings.eps {
            break;
        }
    }
    Ok(InstantaneousSolution {
        w,
        theta,
        objective: obj,
        objective_trace: trace,
        iterations,
    })
}

/// Masks `φ` to the ON set.
pub fn apply_onoff(phi: &CVector, on: &[usize]) -> Result<CVector> {
    let mut theta = CVector::zeros(phi.len());
    for &g in on {
        if g >= phi.len() {
            return Err(Error::validation(format!("group index {g} out of range 0..{}", phi.len())));
        }
        theta[g] = phi[g];
    }
    Ok(theta)
}

/// Rows of `h` selected by `on`.
pub fn select_rows(h: &CMatrix, on: &[usize]) -> CMatrix {
    CMatrix::from_fn(on.len(), h.ncols(), |r, c| h[(on[r], c)])
}

/// Benchmarks and proposed designs compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// Statistical design with `K̄` ON groups.
    RpmStatistical(usize),
    /// Per-combination instantaneous design (upper bound).
    RpmInstantaneous(usize),
    /// All groups ON, instantaneous design, no information transfer.
    NoItFullOn,
    /// MRT over the direct link only.
    NoRisMrt,
    /// Uniform random phases, `K̄` random ON groups, optimal `w`.
    RandomPhase(usize),
    /// Independent fair-coin ON/OFF states.
    Pbit,
}

impl Scheme {
    pub fn label(&self) -> String {
        self.to_string()
    }

    /// Names of the form `rpm_statistical`, `no_ris_mrt`, ...; `kbar` fills in
    /// the ON count where the scheme needs one.
    pub fn from_name(name: &str, kbar: usize) -> Result<Self> {
        Ok(match name {
            "rpm_statistical" => Scheme::RpmStatistical(kbar),
            "rpm_instantaneous" => Scheme::RpmInstantaneous(kbar),
            "no_it_full_on" => Scheme::NoItFullOn,
            "no_ris_mrt" => Scheme::NoRisMrt,
            "random_phase" => Scheme::RandomPhase(kbar),
            "pbit" => Scheme::Pbit,
            other => other.parse()?,
        })
    }

    pub fn kbar(&self, g: usize) -> Option<usize> {
        match *self {
            Scheme::RpmStatistical(k) | Scheme::RpmInstantaneous(k) | Scheme::RandomPhase(k) => Some(k),
            Scheme::NoItFullOn => Some(g),
            Scheme::NoRisMrt => Some(0),
            Scheme::Pbit => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::RpmStatistical(k) => write!(f, "rpm_k{k}"),
            Scheme::RpmInstantaneous(k) => write!(f, "ub_k{k}"),
            Scheme::NoItFullOn => write!(f, "no_it"),
            Scheme::NoRisMrt => write!(f, "no_ris"),
            Scheme::RandomPhase(k) => write!(f, "random_k{k}"),
            Scheme::Pbit => write!(f, "pbit"),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let with_k = |prefix: &str| -> Option<Result<usize>> {
            s.strip_prefix(prefix).map(|k| {
                k.parse::<usize>()
                    .map_err(|_| Error::validation(format!("bad ON count in scheme {s:?}")))
            })
        };
        if let Some(k) = with_k("rpm_k") {
            return Ok(Scheme::RpmStatistical(k?));
        }
        if let Some(k) = with_k("ub_k") {
            return Ok(Scheme::RpmInstantaneous(k?));
        }
        if let Some(k) = with_k("random_k") {
            return Ok(Scheme::RandomPhase(k?));
        }
        match s {
            "no_it" => Ok(Scheme::NoItFullOn),
            "no_ris" => Ok(Scheme::NoRisMrt),
            "pbit" => Ok(Scheme::Pbit),
            _ => Err(Error::validation(format!("unknown scheme {s:?}"))),
        }
    }
}

/// A scheme's beamforming decision for one channel estimate.
#[derive(Debug, Clone, PartialEq)]
pub enum Design {
    /// One `(w, φ)` pair used for every ON/OFF state drawn from `stats`.
    Static {
        solution: BeamformSolution,
        stats: OnOffStatistics,
    },
    /// A dedicated design per ON set (the transmitter knows the state).
    PerState {
        states: Vec<(Vec<usize>, InstantaneousSolution)>,
        groups: usize,
    },
}

impl Design {
    /// `(w, full-length θ)` for a given ON set.
    pub fn for_state(&self, on: &[usize]) -> Result<(CVector, CVector)> {
        match self {
            Design::Static { solution, .. } => Ok((solution.w.clone(), apply_onoff(&solution.phi, on)?)),
            Design::PerState { states, groups } => {
                let (_, sol) = states
                    .iter()
                    .find(|(set, _)| set.as_slice() == on)
                    .ok_or_else(|| Error::validation(format!("no design for ON set {on:?}")))?;
                let mut theta = CVector::zeros(*groups);
                for (k, &g) in on.iter().enumerate() {
                    theta[g] = sol.theta[k];
                }
                Ok((sol.w.clone(), theta))
            }
        }
    }
}

/// Runs the design of `scheme` on the estimates `(h, hd)`.
pub fn scheme_select(
    scheme: Scheme,
    h: &CMatrix,
    hd: &CVector,
    settings: &AlgorithmSettings,
    rng: &mut RngStream,
) -> Result<Design> {
    let g = h.nrows();
    check_dims(h, hd, g)?;
    let inst = InstantaneousSettings::default();
    match scheme {
        Scheme::RpmStatistical(k) => {
            let stats = onoff_stats_rpm(g, k)?;
            let solution = alternating_optimize_statistical(h, hd, &stats, settings, rng)?;
            Ok(Design::Static { solution, stats })
        }
        Scheme::Pbit => {
            let stats = onoff_stats_pbit(g)?;
            let solution = alternating_optimize_statistical(h, hd, &stats, settings, rng)?;
            Ok(Design::Static { solution, stats })
        }
        Scheme::RandomPhase(k) => {
            let stats = onoff_stats_rpm(g, k)?;
            let phi = CVector::from_fn(g, |_, _| cis(rng.uniform_phase()));
            let (w, obj) = solve_w_given_phi(&phi, h, hd, &stats)?;
            Ok(Design::Static {
                solution: BeamformSolution {
                    w,
                    phi,
                    objective_trace: vec![obj],
                    iterations: 0,
                    converged: true,
                },
                stats,
            })
        }
        Scheme::NoRisMrt => {
            let stats = onoff_stats_rpm(g, 0)?;
            let w = if hd.norm() > 0.0 { hd.unscale(hd.norm()) } else { unit_first(hd.len()) };
            Ok(Design::Static {
                solution: BeamformSolution {
                    objective_trace: vec![hd.norm_squared()],
                    w,
                    phi: CVector::from_element(g, C64::new(1.0, 0.0)),
                    iterations: 0,
                    converged: true,
                },
                stats,
            })
        }
        Scheme::NoItFullOn => {
            let all: Vec<usize> = (0..g).collect();
            let sol = alternating_optimize_instantaneous(h, hd, &inst)?;
            Ok(Design::PerState {
                states: vec![(all, sol)],
                groups: g,
            })
        }
        Scheme::RpmInstantaneous(k) => {
            if k > g {
                return Err(Error::validation(format!("K̄ = {k} exceeds G = {g}")));
            }
            let states = numkit::combinations(g, k)
                .into_iter()
                .map(|on| {
                    let sol = alternating_optimize_instantaneous(&select_rows(h, &on), hd, &inst)?;
                    Ok((on, sol))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Design::PerState { states, groups: g })
        }
    }
}

/// Mean received power (normalized by `Pt`) of `design` over its ON/OFF
/// distribution, evaluated on the channels `(h, hd)`.
pub fn received_power(design: &Design, h: &CMatrix, hd: &CVector) -> Result<f64> {
    match design {
        Design::Static { solution, stats } => avg_power_objective(&solution.w, &solution.phi, h, hd, stats),
        Design::PerState { states, .. } => {
            let mut acc = 0.0;
            for (on, sol) in states {
                let h_i = select_rows(h, on);
                acc += crate::channel::link_gain(&h_i, hd, &sol.theta, &sol.w).norm_sqr();
            }
            Ok(acc / states.len() as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{c, substream};
    use std::f64::consts::PI;

    fn random_instance(n: usize, g: usize, rng: &mut RngStream) -> (CMatrix, CVector) {
        let h = CMatrix::from_fn(g, n, |_, _| rng.complex_normal(1.0));
        let hd = rng.complex_normal_vec(n, 0.3);
        (h, hd)
    }

    fn random_unit(n: usize, rng: &mut RngStream) -> CVector {
        let v = rng.complex_normal_vec(n, 1.0);
        v.unscale(v.norm())
    }

    fn enumerated(stats_on: &[Vec<usize>], g: usize) -> (DMatrix<f64>, DVector<f64>) {
        let mut a = DMatrix::zeros(g, g);
        let mut m = DVector::zeros(g);
        for on in stats_on {
            let s = DVector::from_fn(g, |i, _| if on.contains(&i) { 1.0 } else { 0.0 });
            a += &s * s.transpose();
            m += &s;
        }
        let j = stats_on.len() as f64;
        (a / j, m / j)
    }

    #[test]
    fn rpm_statistics() {
        let st = onoff_stats_rpm(4, 3).unwrap();
        assert_eq!(st.a_mat[(0, 0)], 0.75);
        assert_eq!(st.a_mat[(1, 2)], 0.5);
        assert!(st.a_vec.iter().all(|&v| v == 0.75));
        let full = onoff_stats_rpm(3, 3).unwrap();
        assert!(full.a_mat.iter().all(|&v| v == 1.0));
        assert!(full.a_vec.iter().all(|&v| v == 1.0));
        let st = onoff_stats_rpm(5, 2).unwrap();
        let (a, m) = enumerated(&numkit::combinations(5, 2), 5);
        assert!((st.a_mat - a).amax() < 1e-15);
        assert!((st.a_vec - m).amax() < 1e-15);
        assert!(onoff_stats_rpm(2, 3).is_err());
        let one = onoff_stats_rpm(1, 1).unwrap();
        assert_eq!(one.a_mat[(0, 0)], 1.0);
    }

    #[test]
    fn pbit_statistics() {
        let st = onoff_stats_pbit(2).unwrap();
        assert_eq!(st.a_mat, DMatrix::from_row_slice(2, 2, &[0.5, 0.25, 0.25, 0.5]));
        assert_eq!(st.a_vec, DVector::from_vec(vec![0.5, 0.5]));
        let all: Vec<Vec<usize>> = (0..16usize)
            .map(|mask| (0..4).filter(|i| mask >> i & 1 == 1).collect())
            .collect();
        let (a, m) = enumerated(&all, 4);
        let st = onoff_stats_pbit(4).unwrap();
        assert!((st.a_mat - a).amax() < 1e-15);
        assert!((st.a_vec - m).amax() < 1e-15);
        assert_eq!(onoff_stats_pbit(4).unwrap().expected_on(), 2.0);
        assert_eq!(onoff_stats_pbit(1).unwrap().a_mat[(0, 0)], 0.5);
    }

    #[test]
    fn atilde_is_psd() {
        for st in [onoff_stats_rpm(4, 3).unwrap(), onoff_stats_rpm(6, 1).unwrap(), onoff_stats_pbit(5).unwrap()] {
            let ev = st.atilde().symmetric_eigenvalues();
            assert!(ev.min() >= -1e-9);
        }
    }

    #[test]
    fn objective_special_cases() {
        let mut rng = substream(10, 0);
        let (h, hd) = random_instance(3, 4, &mut rng);
        let w = random_unit(3, &mut rng);
        let phi = CVector::from_fn(4, |_, _| cis(rng.uniform_phase()));
        let zero = avg_power_objective(&w, &phi, &h, &hd, &onoff_stats_rpm(4, 0).unwrap()).unwrap();
        assert!((zero - hd.dotc(&w).norm_sqr()).abs() < 1e-12);
        let full = avg_power_objective(&w, &phi, &h, &hd, &onoff_stats_rpm(4, 4).unwrap()).unwrap();
        let amp = crate::channel::link_gain(&h, &hd, &phi, &w);
        assert!((full - amp.norm_sqr()).abs() < 1e-12 * full.max(1.0));
        let two = avg_power_objective(&w, &phi, &h, &hd, &onoff_stats_rpm(4, 2).unwrap()).unwrap();
        let combos = numkit::combinations(4, 2);
        let brute = combos
            .iter()
            .map(|on| crate::channel::link_gain(&h, &hd, &apply_onoff(&phi, on).unwrap(), &w).norm_sqr())
            .sum::<f64>()
            / combos.len() as f64;
        assert!((two - brute).abs() <= 1e-10 * brute.max(1.0));
        assert!(avg_power_objective(&w, &phi, &h, &CVector::zeros(2), &onoff_stats_rpm(4, 2).unwrap()).is_err());
    }

    #[test]
    fn w_step_rank_one_and_eigen_identity() {
        // K̄ = G = 1 with hd = 0 gives R̃ = r r^H.
        let r = CVector::from_vec(vec![c(1.0, 2.0), c(-0.5, 0.3), c(0.0, -1.0)]);
        let h = CMatrix::from_fn(1, 3, |_, k| r[k].conj());
        let hd = CVector::zeros(3);
        let stats = onoff_stats_rpm(1, 1).unwrap();
        let phi = CVector::from_element(1, c(1.0, 0.0));
        let (w, obj) = solve_w_given_phi(&phi, &h, &hd, &stats).unwrap();
        let overlap = w.dotc(&r).norm() / r.norm();
        assert!((overlap - 1.0).abs() < 1e-10);
        assert!((obj - r.norm_squared()).abs() < 1e-9);

        let mut rng = substream(11, 0);
        for _ in 0..20 {
            let (h, hd) = random_instance(4, 4, &mut rng);
            let stats = onoff_stats_rpm(4, 3).unwrap();
            let phi = CVector::from_fn(4, |_, _| cis(rng.uniform_phase()));
            let (w, obj) = solve_w_given_phi(&phi, &h, &hd, &stats).unwrap();
            let at_w = avg_power_objective(&w, &phi, &h, &hd, &stats).unwrap();
            assert!((obj - at_w).abs() <= 1e-9 * obj.max(1.0));
            for _ in 0..1000 {
                let v = random_unit(4, &mut rng);
                assert!(avg_power_objective(&v, &phi, &h, &hd, &stats).unwrap() <= obj + 1e-9);
            }
        }
    }

    #[test]
    fn phase_step_single_group_matches_grid() {
        let mut rng = substream(12, 0);
        let settings = AlgorithmSettings::default();
        for _ in 0..5 {
            let (h, hd) = random_instance(2, 1, &mut rng);
            let stats = onoff_stats_rpm(1, 1).unwrap();
            let w = random_unit(2, &mut rng);
            let step = solve_phi_given_w(&w, &h, &hd, &stats, &settings, &mut rng).unwrap();
            let sub = PhaseSubproblem::new(&w, &h, &hd);
            let lam = sub.lambda[0].norm();
            let closed = stats.a_mat[(0, 0)] * lam * lam + 2.0 * stats.a_vec[0] * sub.gd.norm() * lam;
            let n = 100_000;
            let grid = (0..n)
                .map(|i| {
                    let phi = CVector::from_element(1, cis(2.0 * PI * i as f64 / n as f64));
                    avg_power_objective(&w, &phi, &h, &hd, &stats).unwrap() - sub.gd.norm_sqr()
                })
                .fold(f64::MIN, f64::max);
            assert!((step.objective - closed).abs() <= 1e-9 * closed);
            assert!((step.objective - grid).abs() <= 1e-6 * grid);
        }
    }

    #[test]
    fn phase_step_zero_lambda() {
        let h = CMatrix::zeros(3, 2);
        let hd = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let w = hd.unscale(hd.norm());
        let step = solve_phi_given_w(&w, &h, &hd, &onoff_stats_rpm(3, 2).unwrap(), &AlgorithmSettings::default(), &mut substream(0, 0)).unwrap();
        assert!(step.objective.abs() < 1e-15);
        assert!(step.phi.iter().all(|p| (p.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn phase_step_two_groups_matches_grid() {
        let mut rng = substream(13, 0);
        let settings = AlgorithmSettings::default();
        for _ in 0..3 {
            let (h, hd) = random_instance(3, 2, &mut rng);
            let stats = onoff_stats_rpm(2, 1).unwrap();
            let w = random_unit(3, &mut rng);
            let step = solve_phi_given_w(&w, &h, &hd, &stats, &settings, &mut rng).unwrap();
            let gd2 = hd.dotc(&w).norm_sqr();
            let n = 400;
            let mut grid = f64::MIN;
            for i in 0..n {
                for j in 0..n {
                    let phi = CVector::from_vec(vec![cis(2.0 * PI * i as f64 / n as f64), cis(2.0 * PI * j as f64 / n as f64)]);
                    grid = grid.max(avg_power_objective(&w, &phi, &h, &hd, &stats).unwrap() - gd2);
                }
            }
            assert!(step.objective >= grid * (1.0 - 1e-4), "{} vs {grid}", step.objective);
        }
    }

    #[test]
    fn statistical_no_reflection() {
        let h = CMatrix::zeros(4, 3);
        let hd = CVector::from_vec(vec![c(0.3, 0.1), c(-0.2, 0.5), c(0.0, 0.4)]);
        let sol = alternating_optimize_statistical(&h, &hd, &onoff_stats_rpm(4, 3).unwrap(), &AlgorithmSettings::default(), &mut substream(0, 0)).unwrap();
        assert_eq!(sol.iterations, 1);
        assert!(sol.converged);
        assert!((sol.objective() - hd.norm_squared()).abs() < 1e-12);
        assert!((sol.w.dotc(&hd).norm() - hd.norm()).abs() < 1e-10);
    }

    #[test]
    fn statistical_monotone_and_beats_random() {
        let mut rng = substream(14, 0);
        let settings = AlgorithmSettings::default();
        let stats = onoff_stats_rpm(4, 3).unwrap();
        let mut wins = 0;
        for _ in 0..30 {
            let (h, hd) = random_instance(4, 4, &mut rng);
            let sol = alternating_optimize_statistical(&h, &hd, &stats, &settings, &mut rng).unwrap();
            assert!(sol.objective_trace.windows(2).all(|p| p[1] >= p[0] - 1e-9));
            assert!(sol.w.norm() <= 1.0 + 1e-12);
            assert!(sol.phi.iter().all(|p| (p.norm() - 1.0).abs() < 1e-12));
            let phi = CVector::from_fn(4, |_, _| cis(rng.uniform_phase()));
            let (_, base) = solve_w_given_phi(&phi, &h, &hd, &stats).unwrap();
            if sol.objective() >= base {
                wins += 1;
            }
        }
        assert!(wins >= 28);
    }

    #[test]
    fn instantaneous_single_antenna_example() {
        // Rows of H hold ĥ^H, so the column ĥ = e^{jπ/3} is stored conjugated.
        let h = CMatrix::from_element(1, 1, cis(PI / 3.0).conj());
        let hd = CVector::from_element(1, cis(PI / 6.0));
        let sol = alternating_optimize_instantaneous(&h, &hd, &InstantaneousSettings::default()).unwrap();
        assert!((sol.theta[0] - cis(PI / 6.0)).norm() < 1e-12);
        assert_eq!(sol.iterations, 1);
        assert!((sol.objective - 4.0).abs() < 1e-12);
    }

    #[test]
    fn instantaneous_aligned_sum() {
        let mut rng = substream(15, 0);
        for k in 0..4 {
            let h = CMatrix::from_fn(k, 1, |_, _| rng.complex_normal(1.0));
            let hd = rng.complex_normal_vec(1, 1.0);
            let sol = alternating_optimize_instantaneous(&h, &hd, &InstantaneousSettings::default()).unwrap();
            let expect = (h.iter().map(|z| z.norm()).sum::<f64>() + hd[0].norm()).powi(2);
            assert!((sol.objective - expect).abs() <= 1e-12 * expect);
        }
    }

    #[test]
    fn instantaneous_direct_only() {
        let hd = CVector::from_vec(vec![c(1.0, -1.0), c(0.5, 0.0)]);
        let sol = alternating_optimize_instantaneous(&CMatrix::zeros(0, 2), &hd, &InstantaneousSettings::default()).unwrap();
        assert!((&sol.w - hd.unscale(hd.norm())).norm() < 1e-15);
        assert!((sol.objective - hd.norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn instantaneous_fixed_point_cophases() {
        let mut rng = substream(16, 0);
        let tight = InstantaneousSettings { eps: 1e-15, max_iter: 10_000 };
        for _ in 0..10 {
            let (h, hd) = random_instance(4, 3, &mut rng);
            let sol = alternating_optimize_instantaneous(&h, &hd, &tight).unwrap();
            assert!(sol.objective_trace.windows(2).all(|p| p[1] >= p[0] * (1.0 - 1e-12)));
            let gd = hd.dotc(&sol.w);
            let hw = &h * &sol.w;
            for k in 0..3 {
                let diff = (sol.theta[k] * hw[k] * gd.conj()).arg();
                assert!(diff.abs() <= 1e-9, "{diff}");
            }
            let c = combined_row(&h, &hd, &sol.theta);
            assert!((&sol.w - c.unscale(c.norm())).norm() <= 1e-6);
        }
    }

    #[test]
    fn instantaneous_dominates_statistical_restriction() {
        let mut rng = substream(17, 0);
        let stats = onoff_stats_rpm(4, 3).unwrap();
        let settings = AlgorithmSettings::default();
        let mut ok = 0;
        let trials = 40;
        for _ in 0..trials {
            let (h, hd) = random_instance(4, 4, &mut rng);
            let stat = alternating_optimize_statistical(&h, &hd, &stats, &settings, &mut rng).unwrap();
            let on = numkit::combinations(4, 3)[rng.below(4)].clone();
            let h_i = select_rows(&h, &on);
            let inst = alternating_optimize_instantaneous(&h_i, &hd, &InstantaneousSettings::default()).unwrap();
            let theta = CVector::from_fn(3, |k, _| stat.phi[on[k]]);
            let restricted = crate::channel::link_gain(&h_i, &hd, &theta, &stat.w).norm_sqr();
            if inst.objective >= restricted {
                ok += 1;
            }
        }
        assert!(ok as f64 >= 0.95 * trials as f64);
    }

    #[test]
    fn onoff_masking() {
        let phi = CVector::from_fn(4, |g, _| cis(g as f64));
        assert_eq!(apply_onoff(&phi, &[0, 1, 2, 3]).unwrap(), phi);
        assert!(apply_onoff(&phi, &[]).unwrap().iter().all(|z| z.norm() == 0.0));
        let t = apply_onoff(&phi, &[0, 2]).unwrap();
        assert_eq!(t[1], c(0.0, 0.0));
        assert_eq!(t[3], c(0.0, 0.0));
        assert_eq!(t[2], phi[2]);
        assert!(apply_onoff(&phi, &[4]).is_err());
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in [
            Scheme::RpmStatistical(3),
            Scheme::RpmInstantaneous(2),
            Scheme::NoItFullOn,
            Scheme::NoRisMrt,
            Scheme::RandomPhase(3),
            Scheme::Pbit,
        ] {
            assert_eq!(s.label().parse::<Scheme>().unwrap(), s);
        }
        assert_eq!(Scheme::from_name("rpm_statistical", 3).unwrap(), Scheme::RpmStatistical(3));
        assert_eq!(Scheme::from_name("no_ris_mrt", 3).unwrap(), Scheme::NoRisMrt);
        assert!(Scheme::from_name("mystery", 3).is_err());
        assert!("rpm_kx".parse::<Scheme>().is_err());
    }

    #[test]
    fn scheme_designs() {
        let mut rng = substream(18, 0);
        let (h, hd) = random_instance(4, 4, &mut rng);
        let settings = AlgorithmSettings::default();
        let d = scheme_select(Scheme::NoRisMrt, &h, &hd, &settings, &mut rng).unwrap();
        let (w, theta) = d.for_state(&[]).unwrap();
        assert!((&w - hd.unscale(hd.norm())).norm() < 1e-15);
        assert!(theta.iter().all(|z| z.norm() == 0.0));
        assert!((received_power(&d, &h, &hd).unwrap() - hd.norm_squared()).abs() < 1e-12);

        let ub = scheme_select(Scheme::RpmInstantaneous(3), &h, &hd, &settings, &mut rng).unwrap();
        let full = scheme_select(Scheme::NoItFullOn, &h, &hd, &settings, &mut rng).unwrap();
        let rpm = scheme_select(Scheme::RpmStatistical(3), &h, &hd, &settings, &mut rng).unwrap();
        let p_ub = received_power(&ub, &h, &hd).unwrap();
        let p_full = received_power(&full, &h, &hd).unwrap();
        let p_rpm = received_power(&rpm, &h, &hd).unwrap();
        assert!(p_ub >= p_rpm * (1.0 - 1e-9));
        assert!(p_full > 0.0);
        assert!(matches!(ub, Design::PerState { ref states, .. } if states.len() == 4));

        let pbit = scheme_select(Scheme::Pbit, &h, &hd, &settings, &mut rng).unwrap();
        let Design::Static { stats, .. } = pbit else { panic!() };
        assert_eq!(stats, onoff_stats_pbit(4).unwrap());
    }
}
