//! Dense Hermitian linear algebra over `nalgebra` complex matrices.
//!
//! Operators are thin newtypes over [`CMatrix`] whose constructors check the
//! defining invariant (hermiticity, unit trace and positivity, unitarity).
//! Everything downstream works in units where `hbar = k_B = 1`; entropies are
//! in nats.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Relative hermiticity tolerance, scaled by the largest entry magnitude.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Absolute tolerance on `Tr(rho) = 1`.
pub const TRACE_TOL: f64 = 1e-10;
/// Smallest eigenvalue tolerated in a density operator.
pub const POSITIVITY_TOL: f64 = 1e-10;
/// Max-norm tolerance on `U U^dagger = I`.
pub const UNITARITY_TOL: f64 = 1e-10;
/// Probabilities and eigenvalues below this are exact zeros inside logarithms.
pub const LOG_FLOOR: f64 = 1e-14;
/// Eigenvalue clamping slack before logarithms and square roots.
pub const CLAMP_TOL: f64 = 1e-12;
/// Rank tolerance used when checking support inclusion.
pub const RANK_TOL: f64 = 1e-10;

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `max |a_ij - b_ij|`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// `Tr(A B)` without forming the product.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Real part of `Tr(A B)`; exact for products of Hermitian matrices.
pub fn real_trace_of_product(a: &CMatrix, b: &CMatrix) -> f64 {
    trace_of_product(a, b).re
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `(M + M^dagger) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

fn check_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

fn is_diagonal(m: &CMatrix) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == Complex64::new(0.0, 0.0)))
}

/// `U diag(values) U^dagger`.
pub fn from_spectrum(basis: &CMatrix, values: &[Complex64]) -> CMatrix {
    let mut scaled = basis.clone();
    for (j, v) in values.iter().enumerate() {
        let mut col = scaled.column_mut(j);
        col *= *v;
    }
    scaled * basis.adjoint()
}

/// A Hermitian operator: Hamiltonians and observables.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator(CMatrix);

impl HermitianOperator {
    /// Validates hermiticity within `1e-12 * max|entry|` and stores the
    /// exactly Hermitian part.
    pub fn new(m: CMatrix) -> Result<Self> {
        check_square(&m)?;
        let tolerance = HERMITICITY_TOL * max_abs(&m);
        let deviation = hermiticity_deviation(&m);
        if deviation > tolerance {
            return Err(Error::NotHermitian {
                deviation,
                tolerance,
            });
        }
        Ok(Self(hermitian_part(&m)))
    }

    /// Hermitian part of `m`, without validation. For matrices that are
    /// Hermitian up to round-off by construction.
    pub(crate) fn hermitized(m: CMatrix) -> Self {
        Self(hermitian_part(&m))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let v: Vec<Complex64> = diag.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self(CMatrix::from_diagonal(&DVector::from_vec(v)))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(CMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    /// `a * self + b * other`, for real `a`, `b`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        Self(&self.0 * Complex64::new(a, 0.0) + &other.0 * Complex64::new(b, 0.0))
    }

    pub fn scale(&self, a: f64) -> Self {
        Self(&self.0 * Complex64::new(a, 0.0))
    }

    /// Conjugation `V self V^dagger`.
    pub fn conjugate_by(&self, v: &UnitaryOperator) -> Self {
        Self::hermitized(v.matrix() * &self.0 * v.matrix().adjoint())
    }
}

/// A positive semidefinite, unit-trace operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator(CMatrix);

impl DensityOperator {
    /// Validates hermiticity, `|Tr - 1| <= 1e-10` and `min eig >= -1e-10`.
    pub fn new(m: CMatrix) -> Result<Self> {
        let h = HermitianOperator::new(m)?;
        let tr = trace(h.matrix()).re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidTrace { trace: tr });
        }
        let es = eigh(&h)?;
        let min_eigenvalue = es.eigenvalues[0];
        if min_eigenvalue < -POSITIVITY_TOL {
            return Err(Error::NotPositive { min_eigenvalue });
        }
        Ok(Self(h.into_matrix()))
    }

    /// Hermitian part of `m`, without the spectral check. For results of
    /// trace- and positivity-preserving maps applied to valid states.
    pub(crate) fn hermitized(m: CMatrix) -> Self {
        Self(hermitian_part(&m))
    }

    /// Builds `sum_i p_i |v_i><v_i|` from orthonormal columns of `basis`.
    pub fn from_spectrum(basis: &CMatrix, probs: &[f64]) -> Result<Self> {
        let vals: Vec<Complex64> = probs.iter().map(|&p| Complex64::new(p, 0.0)).collect();
        Self::new(from_spectrum(basis, &vals))
    }

    pub fn from_diagonal(probs: &[f64]) -> Result<Self> {
        let v: Vec<Complex64> = probs.iter().map(|&p| Complex64::new(p, 0.0)).collect();
        Self::new(CMatrix::from_diagonal(&DVector::from_vec(v)))
    }

    /// `|psi><psi|` for a normalized vector.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let v = DVector::from_column_slice(psi);
        Self::new(&v * v.adjoint())
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim) * Complex64::new(1.0 / dim as f64, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn as_hermitian(&self) -> HermitianOperator {
        HermitianOperator(self.0.clone())
    }

    /// `V rho V^dagger`.
    pub fn conjugate_by(&self, v: &UnitaryOperator) -> Self {
        Self::hermitized(v.matrix() * &self.0 * v.matrix().adjoint())
    }

    /// `Tr(rho H)`.
    pub fn expectation(&self, h: &HermitianOperator) -> f64 {
        real_trace_of_product(&self.0, h.matrix())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator(CMatrix);

impl UnitaryOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        check_square(&m)?;
        let deviation = unitarity_deviation(&m);
        if deviation > UNITARITY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self(m))
    }

    pub(crate) fn new_unchecked(m: CMatrix) -> Self {
        Self(m)
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// `self * other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self(&self.0 * &other.0)
    }

    pub fn deviation_from_unitarity(&self) -> f64 {
        unitarity_deviation(&self.0)
    }
}

fn unitarity_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    max_abs_diff(&(m * m.adjoint()), &CMatrix::identity(n, n))
}

/// Ascending eigenvalues with the matching orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: UnitaryOperator,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `U f(Lambda) U^dagger`.
    pub fn apply(&self, f: impl Fn(f64) -> Complex64) -> CMatrix {
        let vals: Vec<Complex64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        from_spectrum(self.eigenvectors.matrix(), &vals)
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.apply(|l| Complex64::new(l, 0.0))
    }

    /// Largest eigenvalue modulus.
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |a, l| a.max(l.abs()))
    }
}

/// Full eigendecomposition of a Hermitian operator, eigenvalues ascending.
///
/// Exactly diagonal inputs bypass the QR iteration and return a permutation
/// basis, so diagonal models stay exactly diagonal downstream.
pub fn eigh(h: &HermitianOperator) -> Result<EigenSystem> {
    let m = h.matrix();
    let n = m.nrows();
    if is_diagonal(m) {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| m[(a, a)].re.total_cmp(&m[(b, b)].re));
        let mut vecs = CMatrix::zeros(n, n);
        let mut vals = Vec::with_capacity(n);
        for (col, &i) in order.iter().enumerate() {
            vecs[(i, col)] = Complex64::new(1.0, 0.0);
            vals.push(m[(i, i)].re);
        }
        return Ok(EigenSystem {
            eigenvalues: vals,
            eigenvectors: UnitaryOperator(vecs),
        });
    }
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0).ok_or(Error::EigenFailed)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vecs.set_column(col, &eig.eigenvectors.column(i));
    }
    Ok(EigenSystem {
        eigenvalues: vals,
        eigenvectors: UnitaryOperator(vecs),
    })
}

/// `exp(c H)` through the eigendecomposition of `H`.
pub fn expm_hermitian_scaled(h: &HermitianOperator, c: Complex64) -> Result<CMatrix> {
    let es = eigh(h)?;
    Ok(es.apply(|l| (c * l).exp()))
}

/// Unitary propagator `exp(-i H dt)`.
pub fn propagator(h: &HermitianOperator, dt: f64) -> Result<UnitaryOperator> {
    Ok(UnitaryOperator(expm_hermitian_scaled(
        h,
        Complex64::new(0.0, -dt),
    )?))
}

/// Thermal state together with its log partition function.
#[derive(Debug, Clone)]
pub struct GibbsState {
    pub state: DensityOperator,
    pub ln_z: f64,
}

impl GibbsState {
    /// Equilibrium free energy `-ln Z / beta`.
    pub fn free_energy(&self, beta: f64) -> f64 {
        -self.ln_z / beta
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!(
            "inverse temperature must be positive and finite, got {beta}"
        )));
    }
    Ok(())
}

/// `exp(-beta H) / Z`, with the spectrum shifted by its minimum before
/// exponentiating.
pub fn gibbs_state(h: &HermitianOperator, beta: f64) -> Result<GibbsState> {
    check_beta(beta)?;
    gibbs_from_eigensystem(&eigh(h)?, beta)
}

pub fn gibbs_from_eigensystem(es: &EigenSystem, beta: f64) -> Result<GibbsState> {
    check_beta(beta)?;
    let e_min = es.eigenvalues[0];
    let weights: Vec<f64> = es
        .eigenvalues
        .iter()
        .map(|&e| (-beta * (e - e_min)).exp())
        .collect();
    let z_shifted: f64 = weights.iter().sum();
    let probs: Vec<Complex64> = weights
        .iter()
        .map(|w| Complex64::new(w / z_shifted, 0.0))
        .collect();
    Ok(GibbsState {
        state: DensityOperator::hermitized(from_spectrum(es.eigenvectors.matrix(), &probs)),
        ln_z: z_shifted.ln() - beta * e_min,
    })
}

/// Haar-distributed unitary from the Ginibre ensemble: QR of a complex
/// Gaussian matrix with the phases of `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> UnitaryOperator {
    assert!(n >= 1, "haar_unitary requires n >= 1");
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let g = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let norm = d.norm();
        let phase = if norm > 0.0 {
            d / norm
        } else {
            Complex64::new(1.0, 0.0)
        };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    UnitaryOperator(q)
}

/// Random Hermitian operator `(G + G^dagger) / 2` with `G` an `n x n` matrix of
/// independent standard complex Gaussians scaled by `scale`.
pub fn random_hermitian<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> HermitianOperator {
    let g = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    });
    HermitianOperator::hermitized(g)
}

/// Random full-rank density operator `G G^dagger / Tr(G G^dagger)` (Ginibre
/// induced measure).
pub fn random_density<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DensityOperator {
    let g = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    });
    let m = &g * g.adjoint();
    let tr = trace(&m);
    DensityOperator::hermitized(m / tr)
}

fn clamp_unit(x: f64) -> f64 {
    if x < CLAMP_TOL && x > -CLAMP_TOL {
        x.max(0.0)
    } else {
        x.clamp(0.0, 1.0)
    }
}

/// `-x ln x` with `0 ln 0 = 0` and the log floor applied.
pub fn entropy_term(x: f64) -> f64 {
    if x <= LOG_FLOOR {
        0.0
    } else {
        -x * x.ln()
    }
}

/// Shannon entropy in nats of a probability vector.
pub fn shannon_entropy(probs: impl IntoIterator<Item = f64>) -> f64 {
    probs.into_iter().map(|p| entropy_term(clamp_unit(p))).sum()
}

/// Spectrum of a density operator clamped to `[0, 1]`.
pub fn clamped_spectrum(rho: &DensityOperator) -> Result<EigenSystem> {
    let mut es = eigh(&rho.as_hermitian())?;
    for l in es.eigenvalues.iter_mut() {
        *l = clamp_unit(*l);
    }
    Ok(es)
}

pub fn von_neumann_entropy(rho: &DensityOperator) -> Result<f64> {
    let es = clamped_spectrum(rho)?;
    Ok(shannon_entropy(es.eigenvalues.iter().copied()))
}

/// Quantum relative entropy `Tr(rho ln rho) - Tr(rho ln sigma)`.
///
/// Returns `f64::INFINITY` when the support of `rho` is not contained in the
/// support of `sigma` (rank tolerance `1e-10`).
pub fn relative_entropy(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    check_same_dim(rho.dim(), sigma.dim())?;
    let a = clamped_spectrum(rho)?;
    let b = clamped_spectrum(sigma)?;
    let neg_entropy: f64 = -shannon_entropy(a.eigenvalues.iter().copied());
    // overlaps[i][j] = |<a_i|b_j>|^2
    let overlap = a.eigenvectors.matrix().adjoint() * b.eigenvectors.matrix();
    let mut cross = 0.0;
    for (j, &q) in b.eigenvalues.iter().enumerate() {
        // weight of rho on the j-th eigenvector of sigma
        let w: f64 = a
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(i, &p)| p * overlap[(i, j)].norm_sqr())
            .sum();
        if q <= RANK_TOL {
            if w > RANK_TOL {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        if w > 0.0 {
            cross += w * q.ln();
        }
    }
    Ok(neg_entropy - cross)
}

fn check_same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            got: b,
        });
    }
    Ok(())
}

/// Uhlmann fidelity `[Tr sqrt(sqrt(rho) sigma sqrt(rho))]^2` in `[0, 1]`.
///
/// When both operators are diagonal in the working basis the Bhattacharyya
/// form `(sum_i sqrt(rho_ii sigma_ii))^2` is used; debug builds check it
/// against the matrix-square-root route.
pub fn fidelity(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    check_same_dim(rho.dim(), sigma.dim())?;
    if is_diagonal(rho.matrix()) && is_diagonal(sigma.matrix()) {
        let fast = fidelity_commuting(rho, sigma);
        debug_assert!(
            (fast - fidelity_general(rho, sigma)?).abs() < 1e-8,
            "diagonal fidelity fast path disagrees with the general route"
        );
        return Ok(fast);
    }
    fidelity_general(rho, sigma)
}

fn fidelity_commuting(rho: &DensityOperator, sigma: &DensityOperator) -> f64 {
    let s: f64 = (0..rho.dim())
        .map(|i| {
            (clamp_unit(rho.matrix()[(i, i)].re) * clamp_unit(sigma.matrix()[(i, i)].re)).sqrt()
        })
        .sum();
    (s * s).clamp(0.0, 1.0)
}

/// Matrix-square-root route, valid for any pair.
pub fn fidelity_general(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    check_same_dim(rho.dim(), sigma.dim())?;
    let a = clamped_spectrum(rho)?;
    let sqrt_rho = a.apply(|l| Complex64::new(l.sqrt(), 0.0));
    let inner = HermitianOperator::hermitized(&sqrt_rho * sigma.matrix() * &sqrt_rho);
    let es = eigh(&inner)?;
    let s: f64 = es.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).sum();
    Ok((s * s).clamp(0.0, 1.0))
}

/// Bures angle `arccos sqrt(F)` in `[0, pi/2]`.
pub fn bures_angle(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    let f = fidelity(rho, sigma)?;
    Ok(f.sqrt().clamp(0.0, 1.0).acos())
}
