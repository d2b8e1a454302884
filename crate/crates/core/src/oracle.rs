//! Dense finite-window Hamiltonians and Green's blocks by direct solves.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matcore::{ComplexSym, RMat};
use crate::model::{OperatorSpec, PotentialSample};
use crate::siegel::{phi_complex, SpectralParameter};

/// Largest `W·m` assembled densely.
pub const MAX_DENSE_SIZE: usize = 8192;

/// `H` restricted to `[n_min, n_max]` with Dirichlet ends, site-major blocks.
#[derive(Clone, Debug)]
pub struct DenseWindowOperator {
    pub n_min: i64,
    pub n_max: i64,
    pub m: usize,
    pub matrix: RMat,
}

impl DenseWindowOperator {
    pub fn width(&self) -> usize {
        (self.n_max - self.n_min + 1) as usize
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }
}

pub fn assemble(spec: &OperatorSpec, q: &PotentialSample, window: (i64, i64)) -> Result<DenseWindowOperator> {
    let (n_min, n_max) = window;
    if n_max < n_min {
        return Err(Error::InvalidParameter(format!("empty window [{n_min}, {n_max}]")));
    }
    let m = spec.m();
    if q.channels() != m {
        return Err(Error::DimensionMismatch { expected: m, found: q.channels() });
    }
    let w = (n_max - n_min + 1) as usize;
    let size = w.saturating_mul(m);
    if size > MAX_DENSE_SIZE {
        return Err(Error::SizeCap { size, cap: MAX_DENSE_SIZE });
    }
    let mut h = RMat::zeros(size, size);
    for k in 0..w {
        let n = n_min + k as i64;
        let block = spec.d().matrix() + q.get(n).matrix();
        h.view_mut((k * m, k * m), (m, m)).copy_from(&block);
        if k + 1 < w {
            for i in 0..m {
                h[(k * m + i, (k + 1) * m + i)] = -1.0;
                h[((k + 1) * m + i, k * m + i)] = -1.0;
            }
        }
    }
    Ok(DenseWindowOperator { n_min, n_max, m, matrix: h })
}

/// The `m×m` block of `(H − λ)⁻¹` at site `n`.
pub fn dense_green_block(op: &DenseWindowOperator, lam: SpectralParameter, n: i64) -> Result<ComplexSym> {
    lam.require_positive()?;
    if n < op.n_min || n > op.n_max {
        return Err(Error::InvalidParameter(format!("site {n} outside window [{}, {}]", op.n_min, op.n_max)));
    }
    let size = op.matrix.nrows();
    let m = op.m;
    let l = lam.lambda();
    let a = DMatrix::from_fn(size, size, |i, j| {
        let v = Complex64::new(op.matrix[(i, j)], 0.0);
        if i == j {
            v - l
        } else {
            v
        }
    });
    let k = (n - op.n_min) as usize;
    let rhs = DMatrix::from_fn(size, m, |i, j| if i == k * m + j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) });
    let sol = a.lu().solve(&rhs).ok_or(Error::Singular { residual: f64::INFINITY })?;
    let block = sol.rows(k * m, m).into_owned();
    Ok(ComplexSym::from_complex(&block))
}

/// Forward half-line block at `n0` on `[n0, n0 + depth]`, Dirichlet beyond.
pub fn half_line_block(spec: &OperatorSpec, q: &PotentialSample, lam: SpectralParameter, n0: i64, depth: usize) -> Result<ComplexSym> {
    let op = assemble(spec, q, (n0, n0 + depth as i64))?;
    dense_green_block(&op, lam, n0)
}

/// Backward half-line block at `n0` on `[n0 − depth, n0]`.
pub fn half_line_block_backward(
    spec: &OperatorSpec,
    q: &PotentialSample,
    lam: SpectralParameter,
    n0: i64,
    depth: usize,
) -> Result<ComplexSym> {
    let op = assemble(spec, q, (n0 - depth as i64, n0))?;
    dense_green_block(&op, lam, n0)
}

/// `Φ_{q_{n0}} ∘ … ∘ Φ_{q_{n0+depth−1}}(−(q_{n0+depth} + D − λ)⁻¹)`.
pub fn nested_phi_dirichlet(spec: &OperatorSpec, q: &PotentialSample, lam: SpectralParameter, n0: i64, depth: usize) -> Result<ComplexSym> {
    lam.require_positive()?;
    let mut z = ComplexSym::zeros(spec.m());
    for k in (0..=depth as i64).rev() {
        z = phi_complex(&z, q.get(n0 + k), lam, spec.d())?;
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::RealSym;
    use crate::model::{strip_dirichlet, DisorderKind, DisorderModel};

    fn lam(x: f64, eps: f64) -> SpectralParameter {
        SpectralParameter::new(x, eps).unwrap()
    }

    #[test]
    fn assemble_examples() {
        let free = OperatorSpec::free(1).unwrap();
        let op = assemble(&free, &PotentialSample::zero(1), (0, 1)).unwrap();
        assert_eq!(op.matrix, RMat::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]));
        let strip = strip_dirichlet(2, 1).unwrap();
        let op = assemble(&strip, &PotentialSample::zero(2), (0, 0)).unwrap();
        assert_eq!(&op.matrix, strip.d().matrix());
        assert!(matches!(assemble(&strip, &PotentialSample::zero(2), (0, 4096)), Err(Error::SizeCap { .. })));
    }

    #[test]
    fn assembled_structure_and_spectrum() {
        let spec = strip_dirichlet(3, 1).unwrap();
        let model = DisorderModel::new(DisorderKind::Uniform, 3, 0.9, 0.0).unwrap();
        let q = model.sample_potential(4, -5, 5).unwrap();
        let op = assemble(&spec, &q, (-7, 7)).unwrap();
        assert_eq!(op.matrix, op.matrix.transpose());
        let mu = spec.channel_energies();
        let (lo, hi) = (-2.0 + mu[0] - 0.9, 2.0 + mu[2] + 0.9);
        for e in op.eigenvalues() {
            assert!(e >= lo - 1e-12 && e <= hi + 1e-12);
        }
        for k in 0..14 {
            let off = op.matrix.view((k * 3, (k + 1) * 3), (3, 3));
            assert_eq!(off.into_owned(), -RMat::identity(3, 3));
        }
    }

    #[test]
    fn free_chain_arcsine_moments() {
        let op = assemble(&OperatorSpec::free(1).unwrap(), &PotentialSample::zero(1), (1, 2000)).unwrap();
        let e = op.eigenvalues();
        let mean = e.iter().sum::<f64>() / e.len() as f64;
        let var = e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / e.len() as f64;
        assert!(mean.abs() < 0.01);
        assert!((var - 2.0).abs() < 0.02);
    }

    #[test]
    fn two_site_block() {
        let spec = OperatorSpec::free(1).unwrap();
        let q = PotentialSample::zero(1);
        let op = assemble(&spec, &q, (0, 1)).unwrap();
        let g = dense_green_block(&op, lam(0.0, 1.0), 0).unwrap();
        assert!((g.get(0, 0) - Complex64::new(0.0, 0.5)).norm() < 1e-14);
        let h = half_line_block(&spec, &q, lam(0.0, 1.0), 0, 1).unwrap();
        assert!((h.get(0, 0) - Complex64::new(0.0, 0.5)).norm() < 1e-14);
    }

    #[test]
    fn single_site_block_is_one_site_resolvent() {
        let spec = strip_dirichlet(2, 1).unwrap();
        let q0 = RealSym::from_rows(&[vec![0.4, 0.1], vec![0.1, -0.2]]).unwrap();
        let q = PotentialSample::from_values(3, vec![q0.clone()]).unwrap();
        let l = lam(0.2, 0.3);
        let h = half_line_block(&spec, &q, l, 3, 0).unwrap();
        // (q + D − λ)⁻¹ by LU, independent of the Φ code path
        let a = (q0.matrix() + spec.d().matrix()).map(|v| Complex64::new(v, 0.0)) - CMat::identity(2, 2) * l.lambda();
        let inv = a.lu().try_inverse().unwrap();
        assert!((h.to_complex() - inv).camax() < 1e-14);
    }

    type CMat = crate::matcore::CMat;

    #[test]
    fn nested_identity_and_symmetry() {
        let spec = strip_dirichlet(2, 1).unwrap();
        let model = DisorderModel::new(DisorderKind::Uniform, 2, 1.0, 0.0).unwrap();
        let q = model.sample_potential(21, 0, 25).unwrap();
        let l = lam(0.3, 0.05);
        for depth in [0, 1, 5, 25] {
            let dense = half_line_block(&spec, &q, l, 0, depth).unwrap();
            let nested = nested_phi_dirichlet(&spec, &q, l, 0, depth).unwrap();
            assert!(dense.max_abs_diff(&nested) < 1e-10, "depth {depth}");
        }
        let op = assemble(&spec, &q, (0, 25)).unwrap();
        let l = lam(0.3, 0.05);
        let size = op.matrix.nrows();
        let full = DMatrix::from_fn(size, size, |i, j| Complex64::new(op.matrix[(i, j)], 0.0) - if i == j { l.lambda() } else { Complex64::new(0.0, 0.0) });
        let inv = full.lu().try_inverse().unwrap();
        assert!((&inv - inv.transpose()).camax() < 1e-11);
    }

    #[test]
    fn im_part_is_positive() {
        let spec = strip_dirichlet(2, 1).unwrap();
        let model = DisorderModel::new(DisorderKind::Rademacher, 2, 1.0, 0.0).unwrap();
        let q = model.sample_potential(2, -10, 10).unwrap();
        let op = assemble(&spec, &q, (-10, 10)).unwrap();
        for n in [-10, 0, 7] {
            let g = dense_green_block(&op, lam(-0.5, 0.1), n).unwrap();
            assert!(g.im.eig().min() > 0.0);
        }
        assert!(dense_green_block(&op, lam(0.0, 0.0), 0).is_err());
    }
}
