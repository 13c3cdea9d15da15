//! Zero-mean Gaussian states in quadrature ordering and their Q-function kernel.
//!
//! States are stored as real covariance matrices in (x₁…x_M, p₁…p_M) order with
//! vacuum variance 1/2. The complex-amplitude ordering (α₁…α_M, α₁*…α_M*) only
//! appears inside [`kernel`].

use crate::error::{invalid, GbsError, Result};
use crate::linalg::{CMat, C64, ONE};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const SYMMETRY_TOL: f64 = 1e-12;
const PHYSICALITY_TOL: f64 = 1e-9;

/// Gaussian state with zero displacement.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState {
    modes: usize,
    cov: DMatrix<f64>,
}

impl GaussianState {
    /// Builds a state from a 2M×2M covariance in (x, p) ordering and checks
    /// symmetry and the uncertainty principle.
    pub fn from_covariance(cov: DMatrix<f64>) -> Result<Self> {
        let n2 = cov.nrows();
        if n2 == 0 || n2 != cov.ncols() || !n2.is_multiple_of(2) {
            return Err(GbsError::Dimension(format!(
                "covariance must be square with even size, got {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        for i in 0..n2 {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(GbsError::Unphysical(format!(
                        "covariance not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let state = Self { modes: n2 / 2, cov };
        let lowest = state.uncertainty_margin();
        if lowest < -PHYSICALITY_TOL {
            return Err(GbsError::Unphysical(format!(
                "covariance violates the uncertainty relation (min eigenvalue of σ + iΩ/2 is {lowest:e})"
            )));
        }
        Ok(state)
    }

    pub fn vacuum(modes: usize) -> Self {
        Self {
            modes,
            cov: DMatrix::identity(2 * modes, 2 * modes) * 0.5,
        }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Smallest eigenvalue of σ + (i/2)Ω, which is non-negative for physical states.
    pub fn uncertainty_margin(&self) -> f64 {
        // The Hermitian matrix H = σ + iΩ/2 is embedded in the real symmetric
        // matrix [[Re H, −Im H], [Im H, Re H]], which has the same spectrum
        // with every eigenvalue doubled.
        let n2 = 2 * self.modes;
        let m = self.modes;
        let omega = |i: usize, j: usize| -> f64 {
            if i < m && j == i + m {
                1.0
            } else if i >= m && j + m == i {
                -1.0
            } else {
                0.0
            }
        };
        let big = DMatrix::from_fn(2 * n2, 2 * n2, |i, j| {
            let (bi, ii) = (i / n2, i % n2);
            let (bj, jj) = (j / n2, j % n2);
            let re = self.cov[(ii, jj)];
            let im = 0.5 * omega(ii, jj);
            match (bi, bj) {
                (0, 0) | (1, 1) => re,
                (0, 1) => -im,
                _ => im,
            }
        });
        big.symmetric_eigenvalues().min()
    }

    /// Symplectic eigenvalues, sorted ascending.
    pub fn symplectic_eigenvalues(&self) -> Vec<f64> {
        let m = self.modes;
        let n2 = 2 * m;
        // Ωσ has eigenvalues ±iν_k, so the moduli come in equal pairs.
        let omega = DMatrix::from_fn(n2, n2, |i, j| {
            if i < m && j == i + m {
                1.0
            } else if i >= m && j + m == i {
                -1.0
            } else {
                0.0
            }
        });
        let prod = &omega * &self.cov;
        let ev = prod.complex_eigenvalues();
        let mut moduli: Vec<f64> = ev.iter().map(|z| z.norm()).collect();
        moduli.sort_by(|a, b| a.partial_cmp(b).unwrap());
        moduli.into_iter().step_by(2).collect()
    }

    /// Expected total photon number (tr σ − M)/2.
    pub fn mean_photons(&self) -> f64 {
        (self.cov.trace() - self.modes as f64) / 2.0
    }

    /// Variance of the total photon number, ½ tr(σ²) − M/4.
    pub fn photon_variance(&self) -> f64 {
        let sq: f64 = self.cov.iter().map(|v| v * v).sum();
        0.5 * sq - self.modes as f64 / 4.0
    }

    /// Uniform loss σ → ησ + (1−η)I/2.
    pub fn apply_loss(&self, eta: f64) -> Result<Self> {
        check_efficiency(eta)?;
        let n2 = 2 * self.modes;
        let cov = &self.cov * eta + DMatrix::identity(n2, n2) * (0.5 * (1.0 - eta));
        Ok(Self {
            modes: self.modes,
            cov,
        })
    }

    /// Applies the passive transformation a → U a.
    pub fn apply_interferometer(&self, u: &Interferometer) -> Result<Self> {
        if u.modes() != self.modes {
            return Err(GbsError::Dimension(format!(
                "interferometer has {} modes, state has {}",
                u.modes(),
                self.modes
            )));
        }
        let s = u.symplectic();
        let cov = &s * &self.cov * s.transpose();
        let cov = (&cov + cov.transpose()) * 0.5;
        Ok(Self {
            modes: self.modes,
            cov,
        })
    }

    /// The complex-ordering covariance σ_c = T σ T† with α = (x + ip)/√2.
    pub fn complex_covariance(&self) -> CMat {
        let t = quadrature_to_complex(self.modes);
        let sigma = CMat::from_fn(2 * self.modes, |i, j| C64::new(self.cov[(i, j)], 0.0));
        t.matmul(&sigma).matmul(&t.adjoint())
    }

    /// Inverse of [`GaussianState::complex_covariance`].
    pub fn from_complex_covariance(sigma_c: &CMat) -> Result<Self> {
        let n2 = sigma_c.dim();
        if !n2.is_multiple_of(2) {
            return Err(GbsError::Dimension("odd complex covariance".into()));
        }
        let t = quadrature_to_complex(n2 / 2);
        let back = t.adjoint().matmul(sigma_c).matmul(&t);
        let cov = DMatrix::from_fn(n2, n2, |i, j| back[(i, j)].re);
        Self::from_covariance(cov)
    }

    /// Single-mode marginal as a 2×2 matrix [[xx, xp], [px, pp]].
    pub fn mode_block(&self, j: usize) -> [[f64; 2]; 2] {
        let m = self.modes;
        [
            [self.cov[(j, j)], self.cov[(j, j + m)]],
            [self.cov[(j + m, j)], self.cov[(j + m, j + m)]],
        ]
    }
}

fn quadrature_to_complex(m: usize) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut t = CMat::zeros(2 * m);
    for i in 0..m {
        t[(i, i)] = C64::new(s, 0.0);
        t[(i, i + m)] = C64::new(0.0, s);
        t[(i + m, i)] = C64::new(s, 0.0);
        t[(i + m, i + m)] = C64::new(0.0, -s);
    }
    t
}

fn check_efficiency(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(invalid("eta", format!("must lie in (0, 1], got {eta}")));
    }
    Ok(())
}

fn single_mode(xx: f64, xp: f64, pp: f64) -> GaussianState {
    GaussianState {
        modes: 1,
        cov: DMatrix::from_row_slice(2, 2, &[xx, xp, xp, pp]),
    }
}

/// Thermalized squeezed vacuum with squeezing `r` and thermalization `epsilon`.
pub fn make_thermalized_squeezed(r: f64, epsilon: f64) -> Result<GaussianState> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(invalid(
            "r",
            format!("must be finite and non-negative, got {r}"),
        ));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(invalid(
            "epsilon",
            format!("must lie in [0, 1], got {epsilon}"),
        ));
    }
    let c = (2.0 * r).cosh() / 2.0;
    let s = (1.0 - epsilon) * (2.0 * r).sinh() / 2.0;
    Ok(single_mode(c, s, c))
}

/// Thermal state with mean photon number `n_th`.
pub fn make_thermal(n_th: f64) -> Result<GaussianState> {
    check_occupation(n_th)?;
    let v = (1.0 + 2.0 * n_th) / 2.0;
    Ok(single_mode(v, 0.0, v))
}

/// Squashed state: classical noise `n_th` added along the (x + p)/√2 direction.
pub fn make_squashed(n_th: f64) -> Result<GaussianState> {
    check_occupation(n_th)?;
    let d = (1.0 + 2.0 * n_th) / 2.0;
    Ok(single_mode(d, n_th, d))
}

fn check_occupation(n_th: f64) -> Result<()> {
    if !(n_th >= 0.0 && n_th.is_finite()) {
        return Err(invalid(
            "n_th",
            format!("must be finite and non-negative, got {n_th}"),
        ));
    }
    Ok(())
}

/// Places single-mode `inputs` on the first modes of an M-mode vacuum, applies
/// `u`, then uniform loss `eta`.
pub fn assemble_and_propagate(
    inputs: &[GaussianState],
    u: &Interferometer,
    eta: f64,
) -> Result<GaussianState> {
    check_efficiency(eta)?;
    let m = u.modes();
    if inputs.len() > m {
        return Err(GbsError::Dimension(format!(
            "{} inputs exceed {} interferometer modes",
            inputs.len(),
            m
        )));
    }
    let mut cov = DMatrix::identity(2 * m, 2 * m) * 0.5;
    for (j, s) in inputs.iter().enumerate() {
        if s.modes() != 1 {
            return Err(GbsError::Dimension(format!(
                "input {j} has {} modes, expected a single mode",
                s.modes()
            )));
        }
        let b = s.mode_block(0);
        cov[(j, j)] = b[0][0];
        cov[(j, j + m)] = b[0][1];
        cov[(j + m, j)] = b[1][0];
        cov[(j + m, j + m)] = b[1][1];
    }
    let state = GaussianState { modes: m, cov };
    state.apply_interferometer(u)?.apply_loss(eta)
}

/// Squeezing that yields `n_ph` photons in total after loss `eta` over `m_prime` inputs.
pub fn solve_squeezing(n_ph: f64, m_prime: usize, eta: f64) -> Result<f64> {
    if n_ph < 0.0 || !n_ph.is_finite() {
        return Err(invalid("n_ph", format!("must be non-negative, got {n_ph}")));
    }
    if m_prime == 0 {
        return Err(invalid("m_prime", "must be positive"));
    }
    check_efficiency(eta)?;
    Ok((n_ph / (eta * m_prime as f64)).sqrt().asinh())
}

/// Total photons after loss for `m_prime` squeezed inputs with parameter `r`.
pub fn photons_after_loss(r: f64, m_prime: usize, eta: f64) -> f64 {
    eta * m_prime as f64 * r.sinh().powi(2)
}

/// Passive linear interferometer acting on annihilation operators.
#[derive(Clone, Debug, PartialEq)]
pub struct Interferometer {
    u: CMat,
}

impl Interferometer {
    pub fn new(u: CMat) -> Result<Self> {
        let n = u.dim();
        if n == 0 {
            return Err(GbsError::Dimension("empty interferometer".into()));
        }
        let err = u.adjoint().matmul(&u).max_abs_diff(&CMat::identity(n));
        if err > 1e-10 {
            return Err(invalid("U", format!("not unitary, |U†U − I| = {err:e}")));
        }
        Ok(Self { u })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            u: CMat::identity(m),
        }
    }

    pub fn modes(&self) -> usize {
        self.u.dim()
    }

    pub fn matrix(&self) -> &CMat {
        &self.u
    }

    /// S = [[Re U, −Im U], [Im U, Re U]] in (x, p) ordering.
    pub fn symplectic(&self) -> DMatrix<f64> {
        let m = self.modes();
        DMatrix::from_fn(2 * m, 2 * m, |i, j| {
            let (bi, ii) = (i / m, i % m);
            let (bj, jj) = (j / m, j % m);
            let z = self.u[(ii, jj)];
            match (bi, bj) {
                (0, 0) | (1, 1) => z.re,
                (0, 1) => -z.im,
                _ => z.im,
            }
        })
    }
}

/// Haar-random unitary from the QR decomposition of a complex Ginibre matrix.
pub fn haar_random_unitary(m: usize, seed: u64) -> Result<Interferometer> {
    if m == 0 {
        return Err(invalid("M", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::<C64>::from_fn(m, m, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let u = CMat::from_fn(m, |i, j| {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        q[(i, j)] * phase
    });
    Interferometer::new(u)
}

/// Kernel A = I − σ_Q⁻¹ in complex-amplitude ordering plus √det σ_Q.
#[derive(Clone, Debug)]
pub struct KernelMatrix {
    pub a: CMat,
    pub norm_q: f64,
}

impl KernelMatrix {
    pub fn modes(&self) -> usize {
        self.a.dim() / 2
    }

    /// Largest deviation from X·A·X = A*.
    pub fn conjugate_symmetry_error(&self) -> f64 {
        let n2 = self.a.dim();
        let x = CMat::block_swap(n2);
        x.matmul(&self.a).matmul(&x).max_abs_diff(&self.a.conj())
    }
}

pub fn kernel(state: &GaussianState) -> Result<KernelMatrix> {
    let n2 = 2 * state.modes();
    let mut sigma_q = state.complex_covariance();
    for i in 0..n2 {
        sigma_q[(i, i)] += C64::new(0.5, 0.0);
    }
    let det = sigma_q.determinant();
    if det.re <= 0.0 || det.im.abs() > 1e-9 * det.re.max(1.0) {
        return Err(GbsError::Singular(format!("det σ_Q = {det}")));
    }
    let inv = sigma_q
        .inverse()
        .ok_or_else(|| GbsError::Singular("σ_Q is not invertible".into()))?;
    let mut a = CMat::identity(n2).sub(&inv);
    // Clean the rounding noise so X·A·X = A* holds to machine precision.
    let x = CMat::block_swap(n2);
    let mirrored = x.matmul(&a.conj()).matmul(&x);
    a = CMat::from_fn(n2, |i, j| (a[(i, j)] + mirrored[(i, j)]) * 0.5);
    Ok(KernelMatrix {
        a,
        norm_q: det.re.sqrt(),
    })
}
