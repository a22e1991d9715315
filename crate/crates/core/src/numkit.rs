//! Small dense numerical kernels shared by the rest of the crate.
//!
//! Matrices are `nalgebra` dynamic matrices over [`C64`]. Sizes in this crate
//! stay below ~64, so everything here favours robustness over asymptotics:
//! the Hermitian eigensolver is a cyclic complex Jacobi iteration and the
//! random streams are ChaCha8 generators keyed by `(master_seed, stream_id)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative tolerance on `max |M - M^H|` accepted for Hermitian inputs.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Relative eigen-residual bound `|Mv - λv| / |M|` guaranteed by the eigensolver.
pub const EIG_RESIDUAL_TOL: f64 = 1e-9;
/// Deviation from unit norm allowed for returned eigenvectors.
pub const UNIT_NORM_TOL: f64 = 1e-12;
/// Relative accuracy of [`gamma_fn`].
pub const GAMMA_REL_TOL: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 100;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `e^{j angle}`.
pub fn cis(angle: f64) -> C64 {
    C64::from_polar(1.0, angle)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Fails unless `m` is square and Hermitian to within [`HERMITIAN_TOL`].
pub fn check_hermitian(m: &CMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::validation(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Err(Error::validation("matrix has dimension 0"));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::validation("matrix has non-finite entries"));
    }
    let scale = max_abs(m);
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    if worst > HERMITIAN_TOL * scale {
        return Err(Error::validation(format!(
            "matrix is not Hermitian (max |M - M^H| = {worst:.3e}, max |M| = {scale:.3e})"
        )));
    }
    Ok(())
}

/// Full eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Unit-norm eigenvectors stored as columns, matching `values`.
    pub vectors: CMatrix,
}

/// Cyclic Jacobi eigendecomposition.
///
/// Each rotation first removes the phase of the pivot `a_pq` with a diagonal
/// unitary, then applies the classical real Jacobi rotation to the resulting
/// real symmetric 2x2 block.
pub fn hermitian_eig(m: &CMatrix) -> Result<HermitianEigen> {
    check_hermitian(m)?;
    let n = m.nrows();
    // Symmetrize so the iteration starts from an exactly Hermitian matrix.
    let mut a = (m + m.adjoint()).scale(0.5);
    let mut v = CMatrix::identity(n, n);
    let scale = max_abs(&a);

    if scale > 0.0 {
        for _ in 0..JACOBI_MAX_SWEEPS {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)].norm_sqr())
                .sum();
            if off.sqrt() <= 1e-15 * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    rotate(&mut a, &mut v, p, q);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = v.column(src);
        let norm = col.norm();
        vectors.set_column(dst, &col.unscale(norm));
    }
    Ok(HermitianEigen { values, vectors })
}

fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let phase = apq / mag; // e^{j alpha}
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let tau = (aqq - app) / (2.0 * mag);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let cs = 1.0 / (1.0 + t * t).sqrt();
    let sn = t * cs;
    // U = [[c, s], [-s e^{-j alpha}, c e^{-j alpha}]] acting on (p, q).
    let u_pp = C64::from(cs);
    let u_pq = C64::from(sn);
    let u_qp = -phase.conj() * sn;
    let u_qq = phase.conj() * cs;

    let n = a.nrows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * u_pp + akq * u_qp;
        a[(k, q)] = akp * u_pq + akq * u_qq;
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * u_pp + vkq * u_qp;
        v[(k, q)] = vkp * u_pq + vkq * u_qq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
        a[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
    }
    a[(p, q)] = C64::from(0.0);
    a[(q, p)] = C64::from(0.0);
    a[(p, p)] = C64::from(a[(p, p)].re);
    a[(q, q)] = C64::from(a[(q, q)].re);
}

/// Largest eigenvalue and a unit eigenvector for it.
pub fn hermitian_eig_max(m: &CMatrix) -> Result<(f64, CVector)> {
    let eig = hermitian_eig(m)?;
    let last = eig.values.len() - 1;
    Ok((eig.values[last], eig.vectors.column(last).into_owned()))
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        // Rightmost position that can still advance.
        let Some(i) = (0..k).rev().find(|&i| cur[i] < n - k + i) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// `[F]_{i,k} = e^{-j 2 pi i k / n}` for `i, k = 0..n`.
pub fn dft_matrix(n: usize) -> Result<CMatrix> {
    if n == 0 {
        return Err(Error::validation("DFT size must be positive"));
    }
    Ok(CMatrix::from_fn(n, n, |i, k| {
        // Reduce the exponent modulo n before scaling to keep the angle small.
        let e = (i * k) % n;
        cis(-2.0 * PI * e as f64 / n as f64)
    }))
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function for positive real arguments (Lanczos approximation).
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("gamma_fn requires x > 0, got {x}")));
    }
    if x < 0.5 {
        // Reflection: Γ(x) Γ(1-x) = π / sin(πx)
        return Ok(PI / ((PI * x).sin() * lanczos(1.0 - x)));
    }
    Ok(lanczos(x))
}

fn lanczos(x: f64) -> f64 {
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, &coef) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += coef / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}

/// Numerically stable `ln Σ exp(v_i)`. Returns `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Deterministic random stream identified by `(master_seed, stream_id)`.
///
/// Distinct stream ids map to distinct ChaCha streams under the same key, so
/// trials drawn from different ids are independent. Each concurrent task must
/// own its stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

pub fn substream(master_seed: u64, stream_id: u64) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id);
    rng.set_word_pos(0);
    RngStream {
        master_seed,
        stream_id,
        rng,
    }
}

/// Stream id for a `(trial, tag)` pair; tags name the consumer (a scheme,
/// the channel sampler, the pilot noise, ...).
pub fn stream_id(trial: u64, tag: &str) -> u64 {
    // FNV-1a over the tag, then a SplitMix64 finalizer with the trial mixed in.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = h ^ trial.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// One draw of `CN(0, variance)`: two real normals scaled by `sqrt(variance / 2)`.
    pub fn complex_normal(&mut self, variance: f64) -> C64 {
        let s = (variance / 2.0).sqrt();
        let re = self.standard_normal();
        let im = self.standard_normal();
        C64::new(s * re, s * im)
    }

    pub fn complex_normal_vec(&mut self, len: usize, variance: f64) -> CVector {
        CVector::from_fn(len, |_, _| self.complex_normal(variance))
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform phase on `(0, 2π]`.
    pub fn uniform_phase(&mut self) -> f64 {
        2.0 * PI * (1.0 - self.uniform())
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn coin(&mut self) -> bool {
        self.rng.random::<bool>()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
