//! Dense kernels for small real-symmetric, complex-symmetric and Hermitian
//! positive-definite matrices.
//!
//! Everything here is sized for `m <= 64`. Storage is `nalgebra` dense
//! column-major; all accessors use `(row, col)` semantics.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;

/// Relative Hermiticity tolerance accepted by [`herm_eig`] and [`HermPD::new`].
pub const HERM_TOL: f64 = 1e-13;

/// Default relative positive-definiteness threshold: `min_eig > PD_TOL * max_eig`.
pub const PD_TOL: f64 = 1e-12;

/// Real symmetric matrix. Symmetry is exact: entry `(i, j)` and `(j, i)` are
/// the same `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct RealSym(RMat);

impl RealSym {
    /// Builds `(M + Mᵀ) / 2`.
    pub fn symmetrize(m: RMat) -> Self {
        assert!(m.is_square(), "RealSym requires a square matrix");
        let n = m.nrows();
        let mut out = m;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        debug_assert!(is_exactly_symmetric(&out));
        RealSym(out)
    }

    /// Accepts `m` only if its asymmetry is within `tol` relative to its size,
    /// then symmetrizes away the residual rounding.
    pub fn try_from_matrix(m: RMat, tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        let scale = m.amax().max(f64::MIN_POSITIVE);
        let dev = (&m - m.transpose()).amax() / scale;
        if m.amax() > 0.0 && dev > tol {
            return Err(Error::NonSymmetric { deviation: dev });
        }
        Ok(Self::symmetrize(m))
    }

    /// Row-major construction; errors if the rows are ragged or not symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: bad.len() });
        }
        let m = RMat::from_fn(n, n, |i, j| rows[i][j]);
        Self::try_from_matrix(m, 1e-12)
    }

    pub fn zeros(n: usize) -> Self {
        RealSym(RMat::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        RealSym(RMat::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        RealSym(RMat::from_fn(n, n, |i, j| if i == j { d[i] } else { 0.0 }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &RMat {
        &self.0
    }

    pub fn into_matrix(self) -> RMat {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn scale(&self, s: f64) -> Self {
        RealSym(&self.0 * s)
    }

    pub fn add(&self, other: &RealSym) -> Self {
        RealSym(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &RealSym) -> Self {
        RealSym(&self.0 - &other.0)
    }

    /// Row-major entries.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.0[(i, j)]).collect()).collect()
    }

    pub fn to_complex(&self) -> CMat {
        self.0.map(|v| Complex64::new(v, 0.0))
    }

    /// Symmetric eigendecomposition, eigenvalues ascending.
    pub fn eig(&self) -> SymEig {
        let se = self.0.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
        let values: Vec<f64> = order.iter().map(|&k| se.eigenvalues[k]).collect();
        let vectors = RMat::from_fn(self.dim(), self.dim(), |i, c| se.eigenvectors[(i, order[c])]);
        SymEig { values, vectors }
    }

    pub fn op_norm(&self) -> f64 {
        let e = self.eig();
        e.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}

fn is_exactly_symmetric(m: &RMat) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..i).all(|j| m[(i, j)] == m[(j, i)]))
}

/// Eigendecomposition `S = V diag(w) Vᵀ` of a real symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: RMat,
}

impl SymEig {
    /// `V diag(f(w)) Vᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> RealSym {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (c, w) in self.values.iter().enumerate() {
            let fw = f(*w);
            for r in 0..n {
                scaled[(r, c)] *= fw;
            }
        }
        RealSym::symmetrize(scaled * self.vectors.transpose())
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().expect("empty eigendecomposition")
    }
}

/// Complex symmetric matrix `Z = X + iY`, `Zᵀ = Z`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSym {
    pub re: RealSym,
    pub im: RealSym,
}

impl ComplexSym {
    pub fn new(re: RealSym, im: RealSym) -> Result<Self> {
        if re.dim() != im.dim() {
            return Err(Error::DimensionMismatch { expected: re.dim(), found: im.dim() });
        }
        Ok(ComplexSym { re, im })
    }

    /// Splits a complex matrix and symmetrizes both parts.
    pub fn from_complex(m: &CMat) -> Self {
        ComplexSym {
            re: RealSym::symmetrize(m.map(|z| z.re)),
            im: RealSym::symmetrize(m.map(|z| z.im)),
        }
    }

    pub fn zeros(n: usize) -> Self {
        ComplexSym { re: RealSym::zeros(n), im: RealSym::zeros(n) }
    }

    pub fn scalar_identity(n: usize, z: Complex64) -> Self {
        ComplexSym { re: RealSym::identity(n).scale(z.re), im: RealSym::identity(n).scale(z.im) }
    }

    pub fn dim(&self) -> usize {
        self.re.dim()
    }

    pub fn to_complex(&self) -> CMat {
        let (x, y) = (self.re.matrix(), self.im.matrix());
        CMat::from_fn(self.dim(), self.dim(), |i, j| Complex64::new(x[(i, j)], y[(i, j)]))
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.re.get(i, j), self.im.get(i, j))
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &ComplexSym) -> f64 {
        (self.to_complex() - other.to_complex()).iter().fold(0.0_f64, |a, z| a.max(z.norm()))
    }

    pub fn op_norm(&self) -> f64 {
        op_norm(&self.to_complex())
    }
}

/// Hermitian positive-definite matrix with its eigendecomposition cached.
#[derive(Clone, Debug)]
pub struct HermPD {
    entries: CMat,
    eig: HermEig,
}

impl HermPD {
    pub fn new(m: CMat) -> Result<Self> {
        Self::with_tol(m, PD_TOL)
    }

    pub fn with_tol(m: CMat, pd_tol: f64) -> Result<Self> {
        let eig = herm_eig(&m)?;
        let (lo, hi) = (eig.values[0], *eig.values.last().unwrap());
        if !(hi > 0.0) || lo <= pd_tol * hi {
            return Err(Error::NotPositiveDefinite { min_eig: lo, max_eig: hi });
        }
        Ok(HermPD { entries: hermitize(&m), eig })
    }

    pub fn from_real(s: &RealSym) -> Result<Self> {
        Self::new(s.to_complex())
    }

    pub fn matrix(&self) -> &CMat {
        &self.entries
    }

    pub fn eig(&self) -> &HermEig {
        &self.eig
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn min_eig(&self) -> f64 {
        self.eig.values[0]
    }

    pub fn max_eig(&self) -> f64 {
        *self.eig.values.last().unwrap()
    }

    /// `M^p` through the spectral calculus.
    pub fn power(&self, p: f64) -> CMat {
        self.eig.map(|w| w.powf(p))
    }

    pub fn inverse(&self) -> CMat {
        self.eig.map(|w| 1.0 / w)
    }
}

fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()).map(|z| z * 0.5)
}

/// Eigendecomposition `M = U diag(w) U*`, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermEig {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermEig {
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMat {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (c, w) in self.values.iter().enumerate() {
            let fw = f(*w);
            for r in 0..n {
                scaled[(r, c)] *= fw;
            }
        }
        hermitize(&(scaled * self.vectors.adjoint()))
    }

    pub fn reconstruct(&self) -> CMat {
        self.map(|w| w)
    }
}

/// Hermitian eigendecomposition. Rejects inputs whose anti-Hermitian part
/// exceeds [`HERM_TOL`] relative to the largest entry.
pub fn herm_eig(m: &CMat) -> Result<HermEig> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    let n = m.nrows();
    let scale = m.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    if scale > 0.0 {
        let dev = (m - m.adjoint()).iter().fold(0.0_f64, |a, z| a.max(z.norm())) / scale;
        if dev > HERM_TOL {
            return Err(Error::NonHermitian { deviation: dev });
        }
    }
    let se = hermitize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let values = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let vectors = CMat::from_fn(n, n, |i, c| se.eigenvectors[(i, order[c])]);
    Ok(HermEig { values, vectors })
}

/// Principal square root of a Hermitian positive-definite matrix.
pub fn pd_sqrt(m: &HermPD) -> HermPD {
    let eig = HermEig { values: m.eig.values.iter().map(|w| w.sqrt()).collect(), vectors: m.eig.vectors.clone() };
    HermPD { entries: eig.reconstruct(), eig }
}

/// Outcome of a checked complex-symmetric inversion.
#[derive(Clone, Debug)]
pub struct InverseReport {
    pub inverse: ComplexSym,
    /// 1-norm condition estimate `‖Z‖₁ ‖Z⁻¹‖₁`.
    pub cond: f64,
    /// `max |Z Z⁻¹ - I|`.
    pub residual: f64,
}

/// Inverse of a complex symmetric matrix by LU with partial pivoting,
/// symmetrized afterwards.
pub fn cs_inverse(z: &ComplexSym) -> Result<ComplexSym> {
    cs_inverse_report(z).map(|r| r.inverse)
}

pub fn cs_inverse_report(z: &ComplexSym) -> Result<InverseReport> {
    let zc = z.to_complex();
    let n = z.dim();
    let inv = lu_inverse(&zc).ok_or(Error::Singular { residual: f64::INFINITY })?;
    let cond = norm_one(&zc) * norm_one(&inv);
    let residual =
        (&zc * &inv - CMat::identity(n, n)).iter().fold(0.0_f64, |a, v| a.max(v.norm()));
    if !residual.is_finite() || residual > 1e-11 * cond.max(1.0) {
        return Err(Error::Singular { residual });
    }
    Ok(InverseReport { inverse: ComplexSym::from_complex(&inv), cond, residual })
}

/// Unchecked LU inverse; `None` when a pivot vanishes.
pub fn lu_inverse(m: &CMat) -> Option<CMat> {
    m.clone().lu().try_inverse()
}

fn norm_one(m: &CMat) -> f64 {
    m.column_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

pub fn op_norm_real(m: &RMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Square root of the sum of squared moduli.
pub fn frob_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `tr(M)`.
pub fn trace(m: &CMat) -> Complex64 {
    m.diagonal().iter().sum()
}

pub fn real_to_complex(m: &RMat) -> CMat {
    m.map(|v| Complex64::new(v, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{gaussian_cmat, gaussian_rmat};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn max_abs(m: &CMat) -> f64 {
        m.iter().fold(0.0_f64, |a, z| a.max(z.norm()))
    }

    fn random_hermitian(n: usize, r: &mut ChaCha8Rng) -> CMat {
        let a = gaussian_cmat(n, n, r);
        (&a + a.adjoint()).map(|z| z * 0.5)
    }

    // Roots of det(M - t) for Hermitian M with n <= 3, via the closed forms
    // (quadratic formula, trigonometric Cardano).
    fn char_poly_roots(m: &CMat) -> Vec<f64> {
        let n = m.nrows();
        let mut roots = match n {
            1 => vec![m[(0, 0)].re],
            2 => {
                let (a, d) = (m[(0, 0)].re, m[(1, 1)].re);
                let b2 = m[(0, 1)].norm_sqr();
                let mean = 0.5 * (a + d);
                let r = (0.25 * (a - d) * (a - d) + b2).sqrt();
                vec![mean - r, mean + r]
            }
            3 => {
                let tr = trace(m).re;
                let q = tr / 3.0;
                let shifted = m - CMat::identity(3, 3).map(|z| z * q);
                let p = (frob_norm(&shifted).powi(2) / 6.0).sqrt();
                let b = shifted.map(|z| z / p);
                let half_det = (b.determinant().re / 2.0).clamp(-1.0, 1.0);
                let phi = half_det.acos() / 3.0;
                let tau = 2.0 * std::f64::consts::PI / 3.0;
                vec![q + 2.0 * p * phi.cos(), q + 2.0 * p * (phi + tau).cos(), q + 2.0 * p * (phi + 2.0 * tau).cos()]
            }
            _ => unreachable!(),
        };
        roots.sort_by(f64::total_cmp);
        roots
    }

    #[test]
    fn herm_eig_diagonal_input() {
        let m = real_to_complex(&RMat::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0])));
        let e = herm_eig(&m).unwrap();
        assert_eq!(e.values, vec![1.0, 3.0]);
        for i in 0..2 {
            for j in 0..2 {
                assert!(e.vectors[(i, j)].norm() == 0.0 || (e.vectors[(i, j)].norm() - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn herm_eig_two_site_chain() {
        let m = real_to_complex(&RMat::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]));
        let e = herm_eig(&m).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-15 && (e.values[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn herm_eig_reconstructs_random() {
        let mut r = rng(1);
        let m = random_hermitian(5, &mut r);
        let e = herm_eig(&m).unwrap();
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let err = max_abs(&(e.reconstruct() - &m));
        assert!(err <= 1e-12 * op_norm(&m), "reconstruction error {err}");
        let unit = max_abs(&(e.vectors.adjoint() * &e.vectors - CMat::identity(5, 5)));
        assert!(unit < 1e-12);
    }

    #[test]
    fn herm_eig_matches_characteristic_polynomial() {
        let mut r = rng(2);
        for n in 1..=3 {
            for _ in 0..200 {
                let m = random_hermitian(n, &mut r);
                let e = herm_eig(&m).unwrap();
                for (a, b) in e.values.iter().zip(char_poly_roots(&m)) {
                    assert!((a - b).abs() < 1e-10, "n={n}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn herm_eig_rejects_non_hermitian() {
        let m = real_to_complex(&RMat::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]));
        assert!(matches!(herm_eig(&m), Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn pd_sqrt_examples() {
        let id = HermPD::new(CMat::identity(3, 3)).unwrap();
        assert!(max_abs(&(pd_sqrt(&id).matrix() - CMat::identity(3, 3))) < 1e-15);
        let d = HermPD::from_real(&RealSym::from_diagonal(&[4.0, 9.0])).unwrap();
        let s = pd_sqrt(&d);
        assert!((s.matrix()[(0, 0)].re - 2.0).abs() < 1e-15);
        assert!((s.matrix()[(1, 1)].re - 3.0).abs() < 1e-15);
        assert!(s.matrix()[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn pd_sqrt_squares_back() {
        let mut r = rng(3);
        for trial in 0..1000 {
            let n = 1 + trial % 8;
            let a = gaussian_cmat(n, n, &mut r);
            let m = &a * a.adjoint() + CMat::identity(n, n).map(|z| z * 1e-3);
            let pd = HermPD::new(m.clone()).unwrap();
            let s = pd_sqrt(&pd);
            let err = max_abs(&(s.matrix() * s.matrix() - &m));
            assert!(err <= 1e-11 * op_norm(&m), "n={n} err={err}");
            assert!(s.min_eig() > 0.0);
        }
    }

    #[test]
    fn pd_rejects_indefinite() {
        let m = real_to_complex(&RMat::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1e-3])));
        assert!(matches!(HermPD::new(m), Err(Error::NotPositiveDefinite { .. })));
        let tiny = real_to_complex(&RMat::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1e-14])));
        assert!(HermPD::new(tiny).is_err());
    }

    #[test]
    fn cs_inverse_examples() {
        let z = ComplexSym::scalar_identity(3, Complex64::i());
        let inv = cs_inverse(&z).unwrap();
        assert!(inv.max_abs_diff(&ComplexSym::scalar_identity(3, -Complex64::i())) < 1e-15);
        let s = ComplexSym::scalar_identity(1, Complex64::new(0.0, 2.0));
        let inv = cs_inverse(&s).unwrap();
        assert!((inv.get(0, 0) - Complex64::new(0.0, -0.5)).norm() < 1e-15);
    }

    #[test]
    fn cs_inverse_residual_and_involution() {
        let mut r = rng(4);
        for n in 1..=8 {
            let x = RealSym::symmetrize(gaussian_rmat(n, n, &mut r));
            let a = gaussian_rmat(n, n, &mut r);
            let y = RealSym::symmetrize(&a * a.transpose() + RMat::identity(n, n) * 0.1);
            let z = ComplexSym::new(x, y).unwrap();
            let rep = cs_inverse_report(&z).unwrap();
            assert!(rep.residual <= 1e-11 * rep.cond);
            // exact symmetry of the output
            let ic = rep.inverse.to_complex();
            assert_eq!(ic, ic.transpose());
            let back = cs_inverse(&rep.inverse).unwrap();
            assert!(back.max_abs_diff(&z) <= 1e-10 * z.op_norm().max(1.0));
        }
    }

    #[test]
    fn cs_inverse_singular() {
        let z = ComplexSym::zeros(2);
        assert!(matches!(cs_inverse(&z), Err(Error::Singular { .. })));
    }

    #[test]
    fn norms() {
        let id = CMat::identity(3, 3);
        assert!((op_norm(&id) - 1.0).abs() < 1e-15);
        assert!((frob_norm(&id) - 3f64.sqrt()).abs() < 1e-15);
        let d = real_to_complex(&RMat::from_diagonal(&nalgebra::DVector::from_vec(vec![-2.0, 1.0])));
        assert!((op_norm(&d) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn op_norm_matches_gram_eigenvalue_oracle() {
        let mut r = rng(5);
        for _ in 0..100 {
            let m = gaussian_cmat(4, 4, &mut r);
            let gram = m.adjoint() * &m;
            let top = *herm_eig(&hermitize(&gram)).unwrap().values.last().unwrap();
            let on = op_norm(&m);
            assert!((on - top.sqrt()).abs() < 1e-12 * on);
            assert!(on <= frob_norm(&m) + 1e-14);
        }
    }

    #[test]
    fn real_sym_rejects_asymmetry() {
        let m = RMat::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        assert!(matches!(RealSym::try_from_matrix(m, 1e-12), Err(Error::NonSymmetric { .. })));
        let ok = RealSym::symmetrize(RMat::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]));
        assert_eq!(ok.get(0, 1), 0.75);
        assert_eq!(ok.get(1, 0), 0.75);
    }
}
