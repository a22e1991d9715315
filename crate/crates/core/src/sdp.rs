//! Unit-diagonal complex SDP and rank-one recovery.
//!
//! `maximize tr(Ξ Q)  s.t.  Q_ii = 1, Q ⪰ 0` is solved on its real symmetric
//! embedding `[[Re, -Im], [Im, Re]]` (dimension `2n`) with a primal-dual
//! path-following method using the HKM search direction. The embedding's
//! optimum is averaged back onto the complex structure, which is feasible
//! and optimal because `Ξ` itself has that structure.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{self, cis, CMatrix, CVector, RngStream, C64};

/// Solver knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdpSettings {
    pub max_iter: usize,
    /// Centering parameter σ in μ = σ⟨X, Z⟩ / m.
    pub centering: f64,
    /// Relative duality gap at which the iteration stops.
    pub gap_tol: f64,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self {
            max_iter: 200,
            centering: 0.1,
            gap_tol: 1e-10,
        }
    }
}

const STEP_FRACTION: f64 = 0.95;
const FEAS_TOL: f64 = 1e-9;

/// The lifted phase problem: a Hermitian `Ξ` of size `G + 1`; the last
/// coordinate is the homogenizing slot.
#[derive(Debug, Clone)]
pub struct SdrProblem {
    xi: CMatrix,
}

impl SdrProblem {
    pub fn new(xi: CMatrix) -> Result<Self> {
        numkit::check_hermitian(&xi)?;
        Ok(Self { xi })
    }

    pub fn xi(&self) -> &CMatrix {
        &self.xi
    }

    pub fn dim(&self) -> usize {
        self.xi.nrows()
    }

    /// `v^H Ξ v`.
    pub fn quadratic(&self, v: &CVector) -> f64 {
        (v.adjoint() * &self.xi * v)[(0, 0)].re
    }
}

#[derive(Debug, Clone)]
pub struct SdrSolution {
    pub q: CMatrix,
    /// `tr(Ξ Q)`.
    pub objective: f64,
    /// Primal-dual gap in the units of `objective`.
    pub duality_gap: f64,
    pub iterations: usize,
}

pub fn solve_unit_diag_sdp(problem: &SdrProblem) -> Result<SdrSolution> {
    solve_unit_diag_sdp_with(problem, &SdpSettings::default())
}

pub fn solve_unit_diag_sdp_with(problem: &SdrProblem, settings: &SdpSettings) -> Result<SdrSolution> {
    let n = problem.dim();
    let scale = numkit::max_abs(problem.xi());
    if scale == 0.0 {
        return Ok(SdrSolution {
            q: CMatrix::identity(n, n),
            objective: 0.0,
            duality_gap: 0.0,
            iterations: 0,
        });
    }

    // Minimization form: min ⟨C, X⟩ with C = -embed(Ξ) / scale.
    let c = embed(problem.xi()).scale(-1.0 / scale);
    let m = 2 * n;

    let mut x = DMatrix::<f64>::identity(m, m);
    let mut y = DVector::<f64>::from_fn(m, |i, _| {
        -(c.row(i).iter().map(|v| v.abs()).sum::<f64>() + 1.0)
    });
    let mut z = &c - DMatrix::from_diagonal(&y);

    let mut iterations = 0;
    let mut gap;
    loop {
        let pobj = c.dot(&x);
        let rp = DVector::from_fn(m, |i, _| 1.0 - x[(i, i)]);
        let rd = &c - DMatrix::from_diagonal(&y) - &z;
        gap = x.dot(&z);
        if gap <= settings.gap_tol * pobj.abs().max(1.0) && rp.amax() <= FEAS_TOL && rd.amax() <= FEAS_TOL {
            break;
        }
        if iterations >= settings.max_iter {
            let last = finish(problem, &x, gap * scale / 2.0, iterations);
            return Err(Error::Convergence {
                iterations,
                gap: last.duality_gap,
                last: Box::new(last),
            });
        }
        iterations += 1;

        let mu = settings.centering * gap / m as f64;
        let z_chol = match z.clone().cholesky() {
            Some(ch) => ch,
            None => return Err(stalled(problem, &x, gap, scale, iterations)),
        };
        let z_inv = z_chol.inverse();

        // Schur complement (Z^{-1} ∘ X) Δy = 1 - μ diag(Z^{-1}) + diag(Z^{-1} R_d X).
        let schur = z_inv.component_mul(&x);
        let zrx = &z_inv * &rd * &x;
        let rhs = DVector::from_fn(m, |i, _| 1.0 - mu * z_inv[(i, i)] + zrx[(i, i)]);
        let dy = match schur.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => match schur.lu().solve(&rhs) {
                Some(v) => v,
                None => return Err(stalled(problem, &x, gap, scale, iterations)),
            },
        };
        let dz = &rd - DMatrix::from_diagonal(&dy);
        let dx_raw = z_inv.scale(mu) - &x - &z_inv * &dz * &x;
        let dx = (&dx_raw + dx_raw.transpose()).scale(0.5);

        let alpha_p = max_step(&x, &dx);
        let alpha_d = max_step(&z, &dz);
        x += dx.scale(alpha_p);
        y += dy.scale(alpha_d);
        z += dz.scale(alpha_d);
        x = (&x + x.transpose()).scale(0.5);
        z = (&z + z.transpose()).scale(0.5);
    }

    Ok(finish(problem, &x, gap * scale / 2.0, iterations))
}

fn stalled(problem: &SdrProblem, x: &DMatrix<f64>, gap: f64, scale: f64, iterations: usize) -> Error {
    let last = finish(problem, x, gap * scale / 2.0, iterations);
    Error::Convergence {
        iterations,
        gap: last.duality_gap,
        last: Box::new(last),
    }
}

/// Largest step in (0, 1] keeping `base + α dir` positive definite, shortened by
/// [`STEP_FRACTION`] when the boundary is within reach.
fn max_step(base: &DMatrix<f64>, dir: &DMatrix<f64>) -> f64 {
    let Some(chol) = base.clone().cholesky() else {
        return 0.0;
    };
    let l = chol.l();
    let Some(l_inv) = l.clone().try_inverse() else {
        return 0.0;
    };
    let w = &l_inv * dir * l_inv.transpose();
    let w = (&w + w.transpose()).scale(0.5);
    let lambda_min = w.symmetric_eigenvalues().min();
    if lambda_min >= 0.0 {
        1.0
    } else {
        (STEP_FRACTION * (-1.0 / lambda_min)).min(1.0)
    }
}

fn embed(m: &CMatrix) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = m[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

fn finish(problem: &SdrProblem, x: &DMatrix<f64>, gap: f64, iterations: usize) -> SdrSolution {
    let n = problem.dim();
    let q = CMatrix::from_fn(n, n, |i, j| {
        let re = 0.5 * (x[(i, j)] + x[(i + n, j + n)]);
        let im = 0.5 * (x[(i + n, j)] - x[(i, j + n)]);
        C64::new(re, im)
    });
    let q = (&q + q.adjoint()).scale(0.5);
    let objective = (problem.xi() * &q).trace().re;
    SdrSolution {
        q,
        objective,
        duality_gap: gap,
        iterations,
    }
}

/// Where the recovered vector came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Candidate {
    /// `U D^{1/2} 1`, projected to unit modulus.
    Deterministic,
    /// The i-th randomized draw `U D^{1/2} ϰ`, `ϰ ~ CN(0, I)`.
    Sample(usize),
}

#[derive(Debug, Clone)]
pub struct Randomized {
    /// Unit-modulus vector of length `G + 1`.
    pub phases: CVector,
    /// `φ̃^H Ξ φ̃` at `phases`.
    pub objective: f64,
    pub chosen: Candidate,
    /// Number of randomized draws evaluated (the single-draw recipe uses one).
    pub samples: usize,
}

/// Best unit-modulus candidate among the deterministic factor and
/// `num_samples` Gaussian draws. Ties keep the earlier candidate.
pub fn gaussian_randomize(
    sol: &SdrSolution,
    problem: &SdrProblem,
    num_samples: usize,
    rng: &mut RngStream,
) -> Result<Randomized> {
    if num_samples == 0 {
        return Err(Error::validation("num_samples must be at least 1"));
    }
    let n = problem.dim();
    if sol.q.nrows() != n {
        return Err(Error::validation(format!(
            "solution has size {}, problem has size {n}",
            sol.q.nrows()
        )));
    }
    let eig = numkit::hermitian_eig(&sol.q)?;
    let mut factor = eig.vectors.clone();
    let lambda_max = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    for (k, &lambda) in eig.values.iter().enumerate() {
        // Eigenvalues at rounding level are treated as zero (numerical rank).
        let s = if lambda > 1e-12 * lambda_max { lambda.sqrt() } else { 0.0 };
        factor.column_mut(k).scale_mut(s);
    }

    // Improvements below rounding level count as ties.
    let tie = 1e-12 * numkit::max_abs(problem.xi()) * (n * n) as f64;
    let ones = CVector::from_element(n, C64::new(1.0, 0.0));
    let mut best_phases = project_unit(&(&factor * ones));
    let mut best = problem.quadratic(&best_phases);
    let mut chosen = Candidate::Deterministic;

    for i in 0..num_samples {
        let kappa = rng.complex_normal_vec(n, 1.0);
        let cand = project_unit(&(&factor * kappa));
        let obj = problem.quadratic(&cand);
        if obj > best + tie {
            best = obj;
            best_phases = cand;
            chosen = Candidate::Sample(i);
        }
    }

    Ok(Randomized {
        phases: best_phases,
        objective: best,
        chosen,
        samples: num_samples,
    })
}

fn project_unit(v: &CVector) -> CVector {
    v.map(|z| {
        let r = z.norm();
        if r > 0.0 && r.is_finite() {
            z / r
        } else {
            C64::new(1.0, 0.0)
        }
    })
}

/// Drops the homogenizing slot: `φ_g = (φ̃_g / φ̃_last) / |φ̃_g / φ̃_last|`.
pub fn extract_phases(phi_tilde: &CVector) -> Result<CVector> {
    let n = phi_tilde.len();
    if n == 0 {
        return Err(Error::validation("empty phase vector"));
    }
    let last = phi_tilde[n - 1];
    if last.norm() < 1e-12 {
        return Err(Error::Degenerate(format!(
            "homogenizing entry has modulus {:.3e}",
            last.norm()
        )));
    }
    Ok(CVector::from_fn(n - 1, |g, _| {
        let ratio = phi_tilde[g] / last;
        let r = ratio.norm();
        if r > 0.0 {
            cis(ratio.arg())
        } else {
            C64::new(1.0, 0.0)
        }
    }))
}
