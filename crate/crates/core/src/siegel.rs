//! The Siegel half space `SH_m = { X + iY : X, Y real symmetric, Y > 0 }`.
//!
//! Points carry their imaginary-part spectral data so that the `cd` form
//!
//! ```text
//! cd(Z, W) = tr[(Im Z)⁻¹ (Z − W)* (Im W)⁻¹ (Z − W)]
//! ```
//!
//! and the metric `d = cosh⁻¹(1 + cd/2)` are cheap to evaluate. The
//! one-step Green's map `Φ_δ(Z) = −(Z + λ − D − δ)⁻¹`, its free fixed point
//! `Z_λ` and the diagnostics used in the second-moment estimate live here too.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{self, CMat, ComplexSym, HermPD, RMat, RealSym, SymEig, PD_TOL};
use crate::sampling::gaussian_rmat;

/// `λ = x + i·eps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralParameter {
    pub x: f64,
    pub eps: f64,
}

impl SpectralParameter {
    pub fn new(x: f64, eps: f64) -> Result<Self> {
        if !x.is_finite() || !eps.is_finite() || eps < 0.0 {
            return Err(Error::InvalidParameter(format!("spectral parameter {x} + {eps}i")));
        }
        Ok(SpectralParameter { x, eps })
    }

    pub fn lambda(&self) -> Complex64 {
        Complex64::new(self.x, self.eps)
    }

    /// Recursion operations need `Im λ > 0`.
    pub fn require_positive(&self) -> Result<()> {
        if self.eps > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("Im λ must be positive, got {}", self.eps)))
        }
    }
}

/// A point of `SH_m`.
#[derive(Clone, Debug)]
pub struct SiegelPoint {
    z: ComplexSym,
    y_eig: SymEig,
    y_inv: RMat,
    y_inv_sqrt: RMat,
}

impl SiegelPoint {
    /// Validates `Im Z > 0` with the relative threshold [`PD_TOL`].
    pub fn new(z: ComplexSym) -> Result<Self> {
        let y_eig = z.im.eig();
        let (lo, hi) = (y_eig.min(), y_eig.max());
        if !(hi > 0.0) || lo <= PD_TOL * hi || !lo.is_finite() {
            return Err(Error::NotPositiveDefinite { min_eig: lo, max_eig: hi });
        }
        let y_inv = y_eig.map(|w| 1.0 / w).into_matrix();
        let y_inv_sqrt = y_eig.map(|w| 1.0 / w.sqrt()).into_matrix();
        Ok(SiegelPoint { z, y_eig, y_inv, y_inv_sqrt })
    }

    pub fn from_complex(m: &CMat) -> Result<Self> {
        Self::new(ComplexSym::from_complex(m))
    }

    /// `z · I`.
    pub fn scalar(m: usize, z: Complex64) -> Result<Self> {
        Self::new(ComplexSym::scalar_identity(m, z))
    }

    /// `i · I`.
    pub fn i_identity(m: usize) -> Self {
        Self::scalar(m, Complex64::i()).expect("iI is in SH_m")
    }

    pub fn value(&self) -> &ComplexSym {
        &self.z
    }

    pub fn to_complex(&self) -> CMat {
        self.z.to_complex()
    }

    pub fn dim(&self) -> usize {
        self.z.dim()
    }

    pub fn re(&self) -> &RealSym {
        &self.z.re
    }

    pub fn im(&self) -> &RealSym {
        &self.z.im
    }

    pub fn im_eig(&self) -> &SymEig {
        &self.y_eig
    }

    pub fn im_hermpd(&self) -> HermPD {
        HermPD::from_real(&self.z.im).expect("Im part validated at construction")
    }

    pub fn im_inv(&self) -> &RMat {
        &self.y_inv
    }

    pub fn im_inv_sqrt(&self) -> &RMat {
        &self.y_inv_sqrt
    }

    pub fn im_sqrt(&self) -> RMat {
        self.y_eig.map(f64::sqrt).into_matrix()
    }

    pub fn min_im_eig(&self) -> f64 {
        self.y_eig.min()
    }

    pub fn max_im_eig(&self) -> f64 {
        self.y_eig.max()
    }

    pub fn op_norm(&self) -> f64 {
        self.z.op_norm()
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected: a, found: b })
    }
}

fn rc(m: &RMat) -> CMat {
    matcore::real_to_complex(m)
}

/// `cd(Z, W)`, evaluated as `‖(Im W)^{-1/2} (Z − W) (Im Z)^{-1/2}‖_F²`.
pub fn cd(z: &SiegelPoint, w: &SiegelPoint) -> Result<f64> {
    check_dims(z.dim(), w.dim())?;
    let diff = z.to_complex() - w.to_complex();
    let sandwiched = rc(w.im_inv_sqrt()) * diff * rc(z.im_inv_sqrt());
    Ok(sandwiched.iter().map(|v| v.norm_sqr()).sum())
}

/// `cosh⁻¹(1 + cd/2)`, written to stay accurate for tiny `cd`.
pub fn dist_from_cd(cd: f64) -> f64 {
    let h = 0.5 * cd;
    (h + (cd * (1.0 + 0.25 * cd)).sqrt()).ln_1p()
}

pub fn dist(z: &SiegelPoint, w: &SiegelPoint) -> Result<f64> {
    cd(z, w).map(dist_from_cd)
}

/// `Z ↦ −Z⁻¹`.
pub fn mobius_neg_inv(z: &SiegelPoint) -> Result<SiegelPoint> {
    let inv = matcore::cs_inverse(z.value())?;
    SiegelPoint::new(ComplexSym { re: inv.re.scale(-1.0), im: inv.im.scale(-1.0) })
        .map_err(|e| Error::InvariantBreach(format!("-Z^-1 left SH_m: {e}")))
}

/// `Z ↦ Z + S` for real symmetric `S`.
pub fn translate(z: &SiegelPoint, s: &RealSym) -> Result<SiegelPoint> {
    check_dims(z.dim(), s.dim())?;
    SiegelPoint::new(ComplexSym { re: z.re().add(s), im: z.im().clone() })
}

/// `Z ↦ Z + λ` (shifts the imaginary part by `Im λ`).
pub fn shift_lambda(z: &SiegelPoint, lam: SpectralParameter) -> Result<SiegelPoint> {
    let m = z.dim();
    SiegelPoint::new(ComplexSym {
        re: z.re().add(&RealSym::identity(m).scale(lam.x)),
        im: z.im().add(&RealSym::identity(m).scale(lam.eps)),
    })
}

/// `λ·I − D − δ` as a complex matrix.
pub(crate) fn shift_matrix(lam: Complex64, d: &RealSym, delta: &RealSym) -> CMat {
    let m = d.dim();
    CMat::from_fn(m, m, |i, j| {
        let base = Complex64::new(-d.get(i, j) - delta.get(i, j), 0.0);
        if i == j {
            base + lam
        } else {
            base
        }
    })
}

/// `−(Z + λ − D − δ)⁻¹` on an arbitrary complex symmetric `Z` with
/// `Im Z ≥ 0` (for example `Z = 0`, which yields the one-site resolvent).
pub fn phi_complex(z: &ComplexSym, delta: &RealSym, lam: SpectralParameter, d: &RealSym) -> Result<ComplexSym> {
    check_dims(z.dim(), d.dim())?;
    check_dims(z.dim(), delta.dim())?;
    let a = z.to_complex() + shift_matrix(lam.lambda(), d, delta);
    let inv = matcore::lu_inverse(&a).ok_or(Error::Singular { residual: f64::INFINITY })?;
    Ok(ComplexSym::from_complex(&inv.map(|v| -v)))
}

/// `Φ_δ(Z) = −(Z + λ − D − δ)⁻¹`.
pub fn phi(z: &SiegelPoint, delta: &RealSym, lam: SpectralParameter, d: &RealSym) -> Result<SiegelPoint> {
    lam.require_positive()?;
    let out = phi_complex(z.value(), delta, lam, d)?;
    SiegelPoint::new(out).map_err(|e| Error::InvariantBreach(format!("Φ_δ(Z) left SH_m: {e}")))
}

/// The per-channel root of `z² + (λ − μ) z + 1 = 0` in the upper half plane.
///
/// For `Im λ > 0` exactly one root has positive imaginary part (the roots
/// multiply to one and sum to `μ − λ`). For real `λ` the limit root
/// `(μ − x)/2 + i√(1 − ((μ − x)/2)²)` is used, which requires `|x − μ| < 2`.
pub fn channel_root(lam: SpectralParameter, mu: f64) -> Result<Complex64> {
    if lam.eps == 0.0 {
        let h = 0.5 * (mu - lam.x);
        if h.abs() >= 1.0 {
            return Err(Error::OutsideBand { x: lam.x });
        }
        return Ok(Complex64::new(h, (1.0 - h * h).sqrt()));
    }
    let b = lam.lambda() - mu;
    let mut s = (b * b - 4.0).sqrt();
    if (b.conj() * s).re < 0.0 {
        s = -s;
    }
    let big = -(b + s) * 0.5;
    let small = big.inv();
    Ok(if big.im > 0.0 { big } else { small })
}

/// `Z_λ = V diag(z_k) Vᵀ` from the eigendecomposition `D = V diag(μ) Vᵀ`.
pub fn free_fixed_point_from_eig(lam: SpectralParameter, d_eig: &SymEig) -> Result<SiegelPoint> {
    let roots: Vec<Complex64> =
        d_eig.values.iter().map(|&mu| channel_root(lam, mu)).collect::<Result<_>>()?;
    let m = roots.len();
    let v = &d_eig.vectors;
    let zc = CMat::from_fn(m, m, |i, j| (0..m).map(|k| roots[k] * (v[(i, k)] * v[(j, k)])).sum());
    SiegelPoint::from_complex(&zc).map_err(|_| Error::OutsideBand { x: lam.x })
}

/// Free fixed point `Z_λ = Φ₀(Z_λ)`.
pub fn free_fixed_point(lam: SpectralParameter, d: &RealSym) -> Result<SiegelPoint> {
    free_fixed_point_from_eig(lam, &d.eig())
}

/// `W_λ = −(2 Z_λ + λ − D)⁻¹`, the free full-line diagonal Green's block.
pub fn w_lambda(lam: SpectralParameter, d: &RealSym) -> Result<SiegelPoint> {
    let z = free_fixed_point(lam, d)?;
    let twice = ComplexSym { re: z.re().scale(2.0), im: z.im().scale(2.0) };
    let w = phi_complex(&twice, &RealSym::zeros(d.dim()), lam, d)?;
    SiegelPoint::new(w)
}

/// `cd_λ(Z) = cd(Z_λ, Z)`.
pub fn cd_lambda(z: &SiegelPoint, lam: SpectralParameter, d: &RealSym) -> Result<f64> {
    cd(&free_fixed_point(lam, d)?, z)
}

/// Quantities from the one-step second-moment estimate at `(Z, δ, λ)`.
#[derive(Clone, Debug, Serialize)]
pub struct Lemma25Report {
    /// First-order term of `cd_λ(Z − δ) − cd_λ(Z)`.
    pub a: f64,
    /// Second-order term, `tr(Y_λ^{-1/2} δ Y⁻¹ δ Y_λ^{-1/2}) ≥ 0`.
    pub b: f64,
    /// `A = 2 cd a / (cd² + 1)`.
    pub cap_a: f64,
    /// `C = (2a² + 2 cd b + 2b²) / (cd² + 1)`.
    pub cap_c: f64,
    /// `(cd_λ²(Φ_δ(Z)) + 1) / (cd_λ²(Z) + 1)`.
    pub lhs_ratio: f64,
    /// `1 + A + C`.
    pub bound_rhs: f64,
    pub cd: f64,
    pub cd_shifted: f64,
    pub cd_image: f64,
    /// `tr(Y_λ^{1/2} Y⁻¹ Y_λ^{1/2})`.
    pub trace_f: f64,
    /// `‖Y_λ⁻¹‖`.
    pub y_lambda_inv_norm: f64,
    /// `‖δ‖` (operator norm).
    pub delta_norm: f64,
}

impl Lemma25Report {
    /// Smallest `C₀` consistent with this sample: `(lhs − 1 − A) / ‖δ‖²`.
    pub fn measured_c0(&self) -> Option<f64> {
        (self.delta_norm > 0.0).then(|| (self.lhs_ratio - 1.0 - self.cap_a) / (self.delta_norm * self.delta_norm))
    }

    /// `C₀` from the explicit chain, for `‖δ‖ ≤ support_bound`.
    pub fn chain_c0(&self, m: usize, support_bound: f64) -> f64 {
        chain_c0(self.y_lambda_inv_norm, m, support_bound)
    }
}

/// `C₀ = 10κ(1 + m) + 2κ²K²(1 + 4m²)` with `κ = ‖Y_λ⁻¹‖²`.
///
/// Follows from `a² ≤ 4 cd b`, `b ≤ κ‖δ‖²(cd + 2m)`, `cd(cd + 2m) ≤ (1 + m)(cd² + 1)`
/// and `(cd + 2m)² ≤ (1 + 4m²)(cd² + 1)`.
pub fn chain_c0(y_lambda_inv_norm: f64, m: usize, support_bound: f64) -> f64 {
    let kappa = y_lambda_inv_norm * y_lambda_inv_norm;
    let m = m as f64;
    10.0 * kappa * (1.0 + m) + 2.0 * kappa * kappa * support_bound * support_bound * (1.0 + 4.0 * m * m)
}

/// `true` iff `x` lies strictly inside every channel band `(μ_k − 2, μ_k + 2)`.
pub fn in_band_interior(x: f64, d_eig: &SymEig) -> bool {
    d_eig.values.iter().all(|mu| (x - mu).abs() < 2.0)
}

pub fn lemma25_report(z: &SiegelPoint, delta: &RealSym, lam: SpectralParameter, d: &RealSym) -> Result<Lemma25Report> {
    let d_eig = d.eig();
    lemma25_report_with(z, delta, lam, d, &free_fixed_point_from_eig(lam, &d_eig)?, &d_eig)
}

/// As [`lemma25_report`] with `Z_λ` supplied by the caller.
pub fn lemma25_report_with(
    z: &SiegelPoint,
    delta: &RealSym,
    lam: SpectralParameter,
    d: &RealSym,
    z_lambda: &SiegelPoint,
    d_eig: &SymEig,
) -> Result<Lemma25Report> {
    check_dims(z.dim(), delta.dim())?;
    check_dims(z.dim(), d.dim())?;
    if !(lam.eps > 0.0 && lam.eps <= 1.0) {
        return Err(Error::InvalidParameter(format!("Im λ must lie in (0, 1], got {}", lam.eps)));
    }
    if !in_band_interior(lam.x, d_eig) {
        return Err(Error::OutsideBand { x: lam.x });
    }
    let yl_inv_sqrt = rc(z_lambda.im_inv_sqrt());
    let y_inv = rc(z.im_inv());
    let dc = delta.to_complex();
    let diff = z.to_complex() - z_lambda.to_complex();

    let t1 = matcore::trace(&(&yl_inv_sqrt * &dc * &y_inv * &diff * &yl_inv_sqrt));
    let t2 = matcore::trace(&(&yl_inv_sqrt * diff.adjoint() * &y_inv * &dc * &yl_inv_sqrt));
    let a = -(t1 + t2).re;
    let b = matcore::trace(&(&yl_inv_sqrt * &dc * &y_inv * &dc * &yl_inv_sqrt)).re.max(0.0);

    let cdl = cd(z_lambda, z)?;
    let den = cdl * cdl + 1.0;
    let cap_a = 2.0 * cdl * a / den;
    let cap_c = (2.0 * a * a + 2.0 * cdl * b + 2.0 * b * b) / den;

    let shifted = translate(z, &delta.scale(-1.0))?;
    let cd_shifted = cd(z_lambda, &shifted)?;
    let image = phi(z, delta, lam, d)?;
    let cd_image = cd(z_lambda, &image)?;
    let lhs_ratio = (cd_image * cd_image + 1.0) / den;

    let yl_sqrt = rc(&z_lambda.im_sqrt());
    let trace_f = matcore::trace(&(&yl_sqrt * &y_inv * &yl_sqrt)).re;
    let y_lambda_inv_norm = 1.0 / z_lambda.min_im_eig();

    Ok(Lemma25Report {
        a,
        b,
        cap_a,
        cap_c,
        lhs_ratio,
        bound_rhs: 1.0 + cap_a + cap_c,
        cd: cdl,
        cd_shifted,
        cd_image,
        trace_f,
        y_lambda_inv_norm,
        delta_norm: delta.op_norm(),
    })
}

/// Per-point factor `‖Y‖ / (‖Y‖ + eps)` bounding `(Y + eps)⁻¹ ≤ c·Y⁻¹`.
///
/// `cd(Z + λ, W + λ) ≤ c_Z c_W cd(Z, W)`.
pub fn shift_contraction_factor(z: &SiegelPoint, eps: f64) -> f64 {
    let top = z.max_im_eig();
    top / (top + eps)
}

/// Constant `C = max(2, 4m‖Y₀⁻¹‖²)` with
/// `cd(Z₀, δ + Z₁) ≤ C (1 + ‖δ‖²)(cd(Z₀, Z₁) + 1)`.
pub fn translation_bound_constant(z0: &SiegelPoint) -> f64 {
    let kappa = (1.0 / z0.min_im_eig()).powi(2);
    (4.0 * z0.dim() as f64 * kappa).max(2.0)
}

/// Constant `C = 2m ‖Y_λ‖` with `tr(Im Z) ≤ C (cd_λ(Z) + 1)`.
pub fn trace_bound_constant(z_lambda: &SiegelPoint) -> f64 {
    2.0 * z_lambda.dim() as f64 * z_lambda.max_im_eig()
}

/// Random points for property checks: `X = x_scale·sym(G)`,
/// `Y = y_scale²·A·Aᵀ + y_floor·I` with Gaussian `G`, `A`.
#[derive(Clone, Copy, Debug)]
pub struct SiegelSampler {
    pub x_scale: f64,
    pub y_scale: f64,
    pub y_floor: f64,
}

impl Default for SiegelSampler {
    fn default() -> Self {
        SiegelSampler { x_scale: 1.0, y_scale: 1.0, y_floor: 0.1 }
    }
}

impl SiegelSampler {
    pub fn sample<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> SiegelPoint {
        let x = RealSym::symmetrize(gaussian_rmat(m, m, rng) * self.x_scale);
        let a = gaussian_rmat(m, m, rng) * self.y_scale;
        let y = RealSym::symmetrize(&a * a.transpose() + DMatrix::identity(m, m) * self.y_floor);
        SiegelPoint::new(ComplexSym { re: x, im: y }).expect("sampler produces Y ≥ y_floor")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{gaussian_sym, stream_rng};
    use approx::assert_abs_diff_eq;

    fn lam(x: f64, eps: f64) -> SpectralParameter {
        SpectralParameter::new(x, eps).unwrap()
    }

    fn scalar(z: Complex64) -> SiegelPoint {
        SiegelPoint::scalar(1, z).unwrap()
    }

    #[test]
    fn cd_scalar_values() {
        let i = scalar(Complex64::i());
        let two_i = scalar(Complex64::new(0.0, 2.0));
        assert_eq!(cd(&i, &i).unwrap(), 0.0);
        // |i - 2i|² / (1 · 2)
        assert_abs_diff_eq!(cd(&i, &two_i).unwrap(), 0.5, epsilon = 1e-15);
        let a = SiegelPoint::i_identity(2);
        let b = SiegelPoint::scalar(2, Complex64::new(0.0, 2.0)).unwrap();
        assert_abs_diff_eq!(cd(&a, &b).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn dist_scalar_matches_poincare() {
        let i = scalar(Complex64::i());
        let two_i = scalar(Complex64::new(0.0, 2.0));
        assert_eq!(dist(&i, &i).unwrap(), 0.0);
        let d = dist(&i, &two_i).unwrap();
        assert_abs_diff_eq!(d, 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(d, 1.25f64.acosh(), epsilon = 1e-15);
    }

    #[test]
    fn dist_small_cd_is_accurate() {
        let cd = 1e-24;
        assert_abs_diff_eq!(dist_from_cd(cd), 1e-12, epsilon = 1e-24);
    }

    #[test]
    fn dimension_mismatch() {
        let a = SiegelPoint::i_identity(2);
        let b = SiegelPoint::i_identity(3);
        assert!(matches!(cd(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn neg_inverse_examples() {
        let fixed = mobius_neg_inv(&SiegelPoint::i_identity(3)).unwrap();
        assert!(fixed.value().max_abs_diff(SiegelPoint::i_identity(3).value()) < 1e-15);
        let z = mobius_neg_inv(&scalar(Complex64::new(1.0, 1.0))).unwrap();
        assert!((z.value().get(0, 0) - Complex64::new(-0.5, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn isometries_preserve_cd() {
        let mut r = stream_rng(11, 0);
        let s = SiegelSampler::default();
        for m in [1, 2, 4] {
            for _ in 0..50 {
                let (z, w) = (s.sample(m, &mut r), s.sample(m, &mut r));
                let base = cd(&z, &w).unwrap();
                let shift = gaussian_sym(m, 2.0, &mut r);
                let t = cd(&translate(&z, &shift).unwrap(), &translate(&w, &shift).unwrap()).unwrap();
                let n = cd(&mobius_neg_inv(&z).unwrap(), &mobius_neg_inv(&w).unwrap()).unwrap();
                assert!((t - base).abs() <= 1e-9 * base);
                assert!((n - base).abs() <= 1e-9 * base, "{n} vs {base}");
            }
        }
    }

    #[test]
    fn phi_examples() {
        let zero = RealSym::zeros(1);
        let out = phi(&scalar(Complex64::i()), &zero, lam(0.0, 1.0), &zero).unwrap();
        assert!((out.value().get(0, 0) - Complex64::new(0.0, 0.5)).norm() < 1e-15);

        let delta = RealSym::from_diagonal(&[0.5]);
        let out = phi(&scalar(Complex64::i()), &delta, lam(0.3, 0.1), &zero).unwrap();
        let expect = Complex64::new(0.2, 1.1) / 1.25;
        assert!((out.value().get(0, 0) - expect).norm() < 1e-15);
    }

    #[test]
    fn phi_rejects_real_lambda() {
        let zero = RealSym::zeros(1);
        assert!(phi(&scalar(Complex64::i()), &zero, lam(0.0, 0.0), &zero).is_err());
    }

    #[test]
    fn free_fixed_point_examples() {
        let zero = RealSym::zeros(1);
        let z = free_fixed_point(lam(0.0, 0.0), &zero).unwrap();
        assert!((z.value().get(0, 0) - Complex64::i()).norm() < 1e-15);
        let z = free_fixed_point(lam(1.0, 0.0), &zero).unwrap();
        assert!((z.value().get(0, 0) - Complex64::new(-0.5, 0.75f64.sqrt())).norm() < 1e-15);
        // z² + i z + 1 = 0 → z = i(−1 ± √5)/2; upper root
        let z = free_fixed_point(lam(0.0, 1.0), &zero).unwrap();
        assert!((z.value().get(0, 0) - Complex64::new(0.0, (5f64.sqrt() - 1.0) / 2.0)).norm() < 1e-15);
        assert!(matches!(free_fixed_point(lam(2.5, 0.0), &zero), Err(Error::OutsideBand { .. })));
        assert!(matches!(free_fixed_point(lam(2.0, 0.0), &zero), Err(Error::OutsideBand { .. })));
    }

    #[test]
    fn fixed_point_property_random() {
        let mut r = stream_rng(12, 0);
        for m in 1..=6 {
            for k in 0..20 {
                let d = gaussian_sym(m, 1.5, &mut r);
                let l = lam(-3.0 + 0.3 * k as f64, 10f64.powi(-(k % 5) as i32));
                let z = free_fixed_point(l, &d).unwrap();
                let img = phi(&z, &RealSym::zeros(m), l, &d).unwrap();
                assert!(img.value().max_abs_diff(z.value()) < 1e-11);
            }
        }
    }

    #[test]
    fn w_lambda_examples() {
        let zero = RealSym::zeros(1);
        let w = w_lambda(lam(0.0, 0.0), &zero).unwrap();
        assert!((w.value().get(0, 0) - Complex64::new(0.0, 0.5)).norm() < 1e-15);
        let w = w_lambda(lam(1.0, 0.0), &zero).unwrap();
        assert!((w.value().get(0, 0) - Complex64::new(0.0, 1.0 / 3f64.sqrt())).norm() < 1e-15);
    }

    #[test]
    fn cd_lambda_examples() {
        let zero = RealSym::zeros(1);
        let l = lam(0.0, 0.0);
        let zl = free_fixed_point(l, &zero).unwrap();
        assert_eq!(cd_lambda(&zl, l, &zero).unwrap(), 0.0);
        assert_abs_diff_eq!(cd_lambda(&scalar(Complex64::new(0.0, 2.0)), l, &zero).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn cd_lambda_monotone_under_free_map() {
        let mut r = stream_rng(13, 0);
        let s = SiegelSampler::default();
        for m in [1, 2, 3] {
            let d = gaussian_sym(m, 0.3, &mut r);
            for _ in 0..100 {
                let l = lam(r.random_range(-0.5..0.5), r.random_range(0.01..1.0));
                let z = s.sample(m, &mut r);
                let before = cd_lambda(&z, l, &d).unwrap();
                let after = cd_lambda(&phi(&z, &RealSym::zeros(m), l, &d).unwrap(), l, &d).unwrap();
                assert!(after <= before * (1.0 + 1e-9) + 1e-12);
            }
        }
    }

    #[test]
    fn lemma25_zero_delta() {
        let mut r = stream_rng(14, 0);
        let z = SiegelSampler::default().sample(2, &mut r);
        let d = RealSym::from_diagonal(&[0.2, -0.3]);
        let rep = lemma25_report(&z, &RealSym::zeros(2), lam(0.1, 0.5), &d).unwrap();
        assert_eq!(rep.a, 0.0);
        assert_eq!(rep.b, 0.0);
        assert_eq!(rep.cap_a, 0.0);
        assert!(rep.lhs_ratio <= 1.0 + 1e-12);
        assert!(rep.measured_c0().is_none());
    }

    #[test]
    fn lemma25_a_is_linear() {
        let mut r = stream_rng(15, 0);
        let d = RealSym::from_diagonal(&[0.0, 0.5, -0.5]);
        for _ in 0..50 {
            let z = SiegelSampler::default().sample(3, &mut r);
            let delta = gaussian_sym(3, 0.5, &mut r);
            let s: f64 = r.random_range(-3.0..3.0);
            let l = lam(0.2, 0.3);
            let base = lemma25_report(&z, &delta, l, &d).unwrap();
            let scaled = lemma25_report(&z, &delta.scale(s), l, &d).unwrap();
            assert!((scaled.a - s * base.a).abs() <= 1e-10 * (1.0 + base.a.abs() * s.abs()));
            assert!((scaled.b - s * s * base.b).abs() <= 1e-10 * (1.0 + base.b * s * s));
        }
    }

    #[test]
    fn lemma25_inequalities_hold() {
        let mut r = stream_rng(16, 0);
        let d = RealSym::from_diagonal(&[0.1, -0.2]);
        for _ in 0..500 {
            let z = SiegelSampler::default().sample(2, &mut r);
            let delta = gaussian_sym(2, 0.7, &mut r);
            let l = lam(r.random_range(-1.0..1.0), r.random_range(1e-3..1.0));
            let rep = lemma25_report(&z, &delta, l, &d).unwrap();
            let k = rep.delta_norm;
            assert!(rep.cd_image <= rep.cd_shifted * (1.0 + 1e-9) + 1e-12);
            assert!((rep.cd_shifted - (rep.cd + rep.a + rep.b)).abs() <= 1e-9 * (1.0 + rep.cd_shifted));
            assert!(rep.lhs_ratio <= rep.bound_rhs * (1.0 + 1e-9));
            assert!(rep.a * rep.a <= 4.0 * rep.cd * rep.b * (1.0 + 1e-9) + 1e-12);
            assert!(rep.trace_f <= (rep.cd + 4.0) * (1.0 + 1e-9));
            assert!(rep.cap_c <= rep.chain_c0(2, k) * k * k * (1.0 + 1e-9));
        }
    }

    #[test]
    fn lemma25_outside_band() {
        let z = SiegelPoint::i_identity(1);
        let zero = RealSym::zeros(1);
        assert!(matches!(lemma25_report(&z, &zero, lam(2.5, 0.1), &zero), Err(Error::OutsideBand { .. })));
        assert!(lemma25_report(&z, &zero, lam(0.0, 1.5), &zero).is_err());
    }
}
