//! Weakly coupled block operators `H_V = [[H₁, V], [Vᵀ, H₂]]`: contour Riesz
//! projections, graph operators of the perturbed spectral subspaces, and
//! block diagonalization through the polar factor of `1 + Q`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matcore::{self, op_norm_real, CMat, RMat, RealSym};
use crate::par::{self, Execution};
use crate::sampling::gaussian_rmat;

/// Change between successive node doublings accepted as converged.
pub const QUAD_TOL: f64 = 1e-9;
/// Node count at which doubling gives up.
pub const MAX_QUAD_POINTS: usize = 1 << 16;
/// Condition number above which `pᵢPᵢpᵢ` is treated as singular.
pub const GRAPH_COND_CAP: f64 = 1e12;

#[derive(Clone, Debug)]
pub struct BlockOperator {
    pub h1: RealSym,
    pub h2: RealSym,
    /// `dim1 × dim2`.
    pub v: RMat,
}

impl BlockOperator {
    pub fn new(h1: RealSym, h2: RealSym, v: RMat) -> Result<Self> {
        if v.nrows() != h1.dim() {
            return Err(Error::DimensionMismatch { expected: h1.dim(), found: v.nrows() });
        }
        if v.ncols() != h2.dim() {
            return Err(Error::DimensionMismatch { expected: h2.dim(), found: v.ncols() });
        }
        Ok(BlockOperator { h1, h2, v })
    }

    pub fn dim1(&self) -> usize {
        self.h1.dim()
    }

    pub fn dim2(&self) -> usize {
        self.h2.dim()
    }

    fn dim(&self) -> usize {
        self.dim1() + self.dim2()
    }

    /// `H₀ = diag(H₁, H₂)`.
    pub fn h0(&self) -> RealSym {
        let (n1, n) = (self.dim1(), self.dim());
        let mut m = RMat::zeros(n, n);
        m.view_mut((0, 0), (n1, n1)).copy_from(self.h1.matrix());
        m.view_mut((n1, n1), (n - n1, n - n1)).copy_from(self.h2.matrix());
        RealSym::symmetrize(m)
    }

    /// `W = [[0, V], [Vᵀ, 0]]`.
    pub fn w(&self) -> RMat {
        let (n1, n) = (self.dim1(), self.dim());
        let mut m = RMat::zeros(n, n);
        m.view_mut((0, n1), (n1, n - n1)).copy_from(&self.v);
        m.view_mut((n1, 0), (n - n1, n1)).copy_from(&self.v.transpose());
        m
    }

    pub fn h_v(&self) -> RealSym {
        RealSym::symmetrize(self.h0().matrix() + self.w())
    }

    pub fn v_norm(&self) -> f64 {
        op_norm_real(&self.v)
    }

    /// `dist(σ(H₁), σ(H₂))`.
    pub fn gap(&self) -> f64 {
        let (e1, e2) = (self.h1.eig().values, self.h2.eig().values);
        e1.iter().flat_map(|a| e2.iter().map(move |b| (a - b).abs())).fold(f64::INFINITY, f64::min)
    }

    /// Smallest interval holding `σ(H₁)`.
    pub fn h1_span(&self) -> (f64, f64) {
        let e = self.h1.eig();
        (e.min(), e.max())
    }

    pub fn h2_span(&self) -> (f64, f64) {
        let e = self.h2.eig();
        (e.min(), e.max())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ContourShape {
    Circle { center: f64, radius: f64 },
    /// Axis-parallel rectangle `[x0, x1] × [−half_height, half_height]`.
    Rectangle { x0: f64, x1: f64, half_height: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ContourSpec {
    pub shape: ContourShape,
    pub quad_points: usize,
    /// Minimum distance between any eigenvalue and the contour.
    pub gap_tol: f64,
}

impl ContourSpec {
    pub fn circle(center: f64, radius: f64) -> Self {
        ContourSpec { shape: ContourShape::Circle { center, radius }, quad_points: 256, gap_tol: 1e-6 }
    }

    pub fn rectangle(x0: f64, x1: f64, half_height: f64) -> Self {
        ContourSpec { shape: ContourShape::Rectangle { x0, x1, half_height }, quad_points: 256, gap_tol: 1e-6 }
    }

    /// Circle around `[lo, hi]` with clearance `margin` on both ends.
    pub fn enclosing(lo: f64, hi: f64, margin: f64) -> Self {
        Self::circle(0.5 * (lo + hi), 0.5 * (hi - lo) + margin)
    }

    fn distance_to_real(&self, e: f64) -> f64 {
        match self.shape {
            ContourShape::Circle { center, radius } => ((e - center).abs() - radius).abs(),
            ContourShape::Rectangle { x0, x1, half_height } => {
                if e < x0 || e > x1 {
                    (x0 - e).max(e - x1)
                } else {
                    (e - x0).min(x1 - e).min(half_height)
                }
            }
        }
    }

    fn encloses(&self, e: f64) -> bool {
        match self.shape {
            ContourShape::Circle { center, radius } => (e - center).abs() < radius,
            ContourShape::Rectangle { x0, x1, .. } => x0 < e && e < x1,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self.shape {
            ContourShape::Circle { radius, .. } => radius > 0.0,
            ContourShape::Rectangle { x0, x1, half_height } => x1 > x0 && half_height > 0.0,
        };
        if !ok || self.quad_points < 4 {
            return Err(Error::InvalidParameter(format!("degenerate contour {self:?}")));
        }
        Ok(())
    }

    /// Nodes `z_k` and weights `w_k` with `∮ f dz ≈ Σ w_k f(z_k)`.
    fn rule(&self, points: usize) -> Vec<(Complex64, Complex64)> {
        match self.shape {
            ContourShape::Circle { center, radius } => (0..points)
                .map(|k| {
                    let e = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / points as f64);
                    let dz = Complex64::i() * radius * e * (2.0 * std::f64::consts::PI / points as f64);
                    (center + radius * e, dz)
                })
                .collect(),
            ContourShape::Rectangle { x0, x1, half_height } => {
                let per_side = points.div_ceil(4);
                let (x, w) = gauss_legendre(per_side);
                let corners = [
                    Complex64::new(x0, -half_height),
                    Complex64::new(x1, -half_height),
                    Complex64::new(x1, half_height),
                    Complex64::new(x0, half_height),
                ];
                let mut out = Vec::with_capacity(4 * per_side);
                for s in 0..4 {
                    let (a, b) = (corners[s], corners[(s + 1) % 4]);
                    let half = 0.5 * (b - a);
                    for (xi, wi) in x.iter().zip(&w) {
                        out.push((a + half * (1.0 + xi), half * *wi));
                    }
                }
                out
            }
        }
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[derive(Clone, Debug)]
pub struct RieszProjection {
    pub p: RMat,
    pub quad_points: usize,
    /// `‖P_N − P_{N/2}‖` at acceptance.
    pub change: f64,
    /// Largest imaginary part discarded.
    pub imag_residue: f64,
    pub enclosed: usize,
    pub idempotency_residual: f64,
    pub commutator_residual: f64,
}

impl RieszProjection {
    pub fn rank(&self) -> usize {
        self.p.trace().round().max(0.0) as usize
    }
}

fn quadrature(exec: Execution, h: &RealSym, contour: &ContourSpec, points: usize) -> Result<CMat> {
    let n = h.dim();
    let hc = h.to_complex();
    let rule = contour.rule(points);
    let terms = par::try_map_indexed_with(exec, rule.len(), |k| {
        let (z, w) = rule[k];
        let a = CMat::identity(n, n) * z - &hc;
        matcore::lu_inverse(&a).map(|inv| inv * w).ok_or(Error::Singular { residual: f64::INFINITY })
    })?;
    let sum = terms.into_iter().fold(CMat::zeros(n, n), |acc, t| acc + t);
    Ok(sum / Complex64::new(0.0, 2.0 * std::f64::consts::PI))
}

/// `P = (2πi)⁻¹ ∮ (z − H)⁻¹ dz`, doubling nodes until stable.
pub fn riesz_projection(h: &RealSym, contour: &ContourSpec) -> Result<RieszProjection> {
    riesz_projection_with(Execution::default(), h, contour)
}

pub fn riesz_projection_with(exec: Execution, h: &RealSym, contour: &ContourSpec) -> Result<RieszProjection> {
    contour.validate()?;
    let eig = h.eig();
    for &e in &eig.values {
        let margin = contour.distance_to_real(e);
        if margin < contour.gap_tol {
            return Err(Error::EigenvalueOnContour { eigenvalue: e, margin });
        }
    }
    let enclosed = eig.values.iter().filter(|e| contour.encloses(**e)).count();
    let mut points = contour.quad_points;
    let mut prev = quadrature(exec, h, contour, points)?;
    loop {
        let next_points = points * 2;
        let next = quadrature(exec, h, contour, next_points)?;
        let change = (&next - &prev).camax();
        points = next_points;
        if change <= QUAD_TOL {
            let p = next.map(|v| v.re);
            let imag_residue = next.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
            let idempotency_residual = op_norm_real(&(&p * &p - &p));
            let commutator_residual = op_norm_real(&(&p * h.matrix() - h.matrix() * &p));
            return Ok(RieszProjection { p, quad_points: points, change, imag_residue, enclosed, idempotency_residual, commutator_residual });
        }
        if next_points >= MAX_QUAD_POINTS {
            return Err(Error::QuadratureNotConverged { points, change });
        }
        prev = next;
    }
}

#[derive(Clone, Debug)]
pub struct GraphOperators {
    /// `dim2 × dim1`: `Ran P₁ = {(x, Q₁x)}`.
    pub q1: RMat,
    /// `dim1 × dim2`: `Ran P₂ = {(Q₂y, y)}`.
    pub q2: RMat,
    pub cond1: f64,
    pub cond2: f64,
    /// `‖P₁ − orthogonal projector onto graph(Q₁)‖`.
    pub graph_residual: f64,
    /// `‖Q₂ + Q₁ᵀ‖`.
    pub antisymmetry_residual: f64,
}

fn cond_real(m: &RMat) -> f64 {
    let s = m.clone().singular_values();
    let (hi, lo) = (s.max(), s.min());
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

fn graph_projector(q1: &RMat) -> Option<RMat> {
    let n1 = q1.ncols();
    let n = n1 + q1.nrows();
    let mut g = RMat::zeros(n, n1);
    g.view_mut((0, 0), (n1, n1)).fill_with_identity();
    g.view_mut((n1, 0), (n - n1, n1)).copy_from(q1);
    let gram = g.transpose() * &g;
    gram.try_inverse().map(|inv| &g * inv * g.transpose())
}

/// `Q₁ = p₂P₁p₁(p₁P₁p₁)⁻¹` and `Q₂ = p₁P₂(p₂P₂p₂)⁻¹` with `P₂ = 1 − P₁`.
pub fn graph_operators(b: &BlockOperator, p1: &RMat) -> Result<GraphOperators> {
    let (n1, n2) = (b.dim1(), b.dim2());
    let n = n1 + n2;
    if p1.nrows() != n || p1.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: p1.nrows() });
    }
    let (g, vn) = (b.gap(), b.v_norm());
    if vn > g / 8.0 {
        return Err(Error::NotAGraph { reason: format!("‖V‖ = {vn:.3e} exceeds gap/8 = {:.3e}", g / 8.0) });
    }
    let p2 = RMat::identity(n, n) - p1;
    let a11 = p1.view((0, 0), (n1, n1)).into_owned();
    let a22 = p2.view((n1, n1), (n2, n2)).into_owned();
    let (cond1, cond2) = (cond_real(&a11), cond_real(&a22));
    if !(cond1 <= GRAPH_COND_CAP && cond2 <= GRAPH_COND_CAP) {
        return Err(Error::NotAGraph { reason: format!("pᵢPᵢpᵢ ill-conditioned: cond = {cond1:.3e}, {cond2:.3e}") });
    }
    let singular = || Error::NotAGraph { reason: "pᵢPᵢpᵢ singular".into() };
    let q1 = p1.view((n1, 0), (n2, n1)) * a11.try_inverse().ok_or_else(singular)?;
    let q2 = p2.view((0, n1), (n1, n2)) * a22.try_inverse().ok_or_else(singular)?;
    let proj = graph_projector(&q1).ok_or_else(singular)?;
    let graph_residual = op_norm_real(&(p1 - proj));
    let antisymmetry_residual = op_norm_real(&(&q2 + q1.transpose()));
    Ok(GraphOperators { q1, q2, cond1, cond2, graph_residual, antisymmetry_residual })
}

#[derive(Clone, Debug)]
pub struct BlockDiagonalization {
    /// `H₁ + V Q₁`.
    pub a1: RMat,
    /// `H₂ + Vᵀ Q₂`.
    pub a2: RMat,
    /// Orthogonal polar factor of `1 + Q`.
    pub u: RMat,
    /// Diagonal blocks of `Uᵀ H_V U`.
    pub block1: RealSym,
    pub block2: RealSym,
    /// `block₁ − H₁`.
    pub t1: RealSym,
    /// `‖H_V(1 + Q) − (1 + Q)A‖`.
    pub intertwining_residual: f64,
    /// Largest off-diagonal block norm of `Uᵀ H_V U`.
    pub offdiag_residual: f64,
    pub orthogonality_residual: f64,
    /// Largest gap between the sorted spectra of the two blocks and of `H_V`.
    pub eigenvalue_residual: f64,
}

pub fn block_diagonalize(b: &BlockOperator, q1: &RMat, q2: &RMat) -> Result<BlockDiagonalization> {
    let (n1, n2) = (b.dim1(), b.dim2());
    let n = n1 + n2;
    if q1.shape() != (n2, n1) || q2.shape() != (n1, n2) {
        return Err(Error::DimensionMismatch { expected: n1 * n2, found: q1.len() });
    }
    let hv = b.h_v();
    let a1 = b.h1.matrix() + &b.v * q1;
    let a2 = b.h2.matrix() + b.v.transpose() * q2;
    let mut one_q = RMat::identity(n, n);
    one_q.view_mut((0, n1), (n1, n2)).copy_from(q2);
    one_q.view_mut((n1, 0), (n2, n1)).copy_from(q1);
    let mut a = RMat::zeros(n, n);
    a.view_mut((0, 0), (n1, n1)).copy_from(&a1);
    a.view_mut((n1, n1), (n2, n2)).copy_from(&a2);
    let intertwining_residual = op_norm_real(&(hv.matrix() * &one_q - &one_q * &a));

    let gram = RealSym::symmetrize(one_q.transpose() * &one_q).eig();
    if gram.min() <= 0.0 {
        return Err(Error::NotAGraph { reason: "1 + Q is singular".into() });
    }
    let abs_inv = gram.map(|s| 1.0 / s.sqrt());
    let u = &one_q * abs_inv.matrix();
    let orthogonality_residual = op_norm_real(&(u.transpose() * &u - RMat::identity(n, n)));
    let conj = u.transpose() * hv.matrix() * &u;
    let off = op_norm_real(&conj.view((0, n1), (n1, n2)).into_owned())
        .max(op_norm_real(&conj.view((n1, 0), (n2, n1)).into_owned()));
    let block1 = RealSym::symmetrize(conj.view((0, 0), (n1, n1)).into_owned());
    let block2 = RealSym::symmetrize(conj.view((n1, n1), (n2, n2)).into_owned());
    let t1 = block1.sub(&b.h1);

    let mut blocks: Vec<f64> = block1.eig().values.into_iter().chain(block2.eig().values).collect();
    blocks.sort_by(f64::total_cmp);
    let full = hv.eig().values;
    let eigenvalue_residual = blocks.iter().zip(&full).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);

    Ok(BlockDiagonalization {
        a1,
        a2,
        u,
        block1,
        block2,
        t1,
        intertwining_residual,
        offdiag_residual: off,
        orthogonality_residual,
        eigenvalue_residual,
    })
}

/// Replaces `H₁` by `H₁ χ_{[a+ε, b−ε]}(H₁)`.
pub fn denisov_split(b: &BlockOperator, lo: f64, hi: f64, epsilon: f64) -> Result<BlockOperator> {
    if !(epsilon > 0.0 && lo + 2.0 * epsilon < hi) {
        return Err(Error::InvalidParameter(format!("need ε > 0 and a + 2ε < b, got [{lo}, {hi}], ε = {epsilon}")));
    }
    let (glo, ghi) = (lo + 0.5 * epsilon, hi - 0.5 * epsilon);
    if let Some(&e) = b.h2.eig().values.iter().find(|e| glo < **e && **e < ghi) {
        return Err(Error::GapViolation { eigenvalue: e, lo: glo, hi: ghi });
    }
    let (klo, khi) = (lo + epsilon, hi - epsilon);
    let h1 = b.h1.eig().map(|e| if klo <= e && e <= khi { e } else { 0.0 });
    BlockOperator::new(h1, b.h2.clone(), b.v.clone())
}

/// Residual table for one instance, as printed by the CLI.
#[derive(Clone, Debug, Serialize)]
pub struct DemoReport {
    pub dim1: usize,
    pub dim2: usize,
    pub gap: f64,
    pub v_norm: f64,
    pub quad_points: usize,
    pub quad_change: f64,
    pub enclosed: usize,
    pub rank: usize,
    pub idempotency: f64,
    pub commutator: f64,
    pub imag_residue: f64,
    pub complement_commutator: f64,
    pub sum_to_identity: f64,
    pub projection_shift: f64,
    pub perturbation_envelope: f64,
    pub graph_residual: f64,
    pub antisymmetry: f64,
    pub intertwining: f64,
    pub offdiag: f64,
    pub orthogonality: f64,
    pub eigenvalues: f64,
    pub t1_norm: f64,
}

/// Runs the full chain on `b`, with a circle around `σ(H₁)` at clearance `g/2`.
pub fn demo(b: &BlockOperator) -> Result<DemoReport> {
    let g = b.gap();
    let (lo, hi) = b.h1_span();
    let contour = ContourSpec::enclosing(lo, hi, 0.5 * g);
    let hv = b.h_v();
    let p = riesz_projection(&hv, &contour)?;
    let n = hv.dim();
    let (lo2, hi2) = b.h2_span();
    let p2 = riesz_projection(&hv, &ContourSpec::enclosing(lo2, hi2, 0.5 * g))?.p;
    let complement_commutator = op_norm_real(&(&p2 * hv.matrix() - hv.matrix() * &p2));
    let sum_to_identity = op_norm_real(&(&p.p + &p2 - RMat::identity(n, n)));
    let mut p1_0 = RMat::zeros(n, n);
    p1_0.view_mut((0, 0), (b.dim1(), b.dim1())).fill_with_identity();
    let projection_shift = op_norm_real(&(&p.p - &p1_0));
    let graph = graph_operators(b, &p.p)?;
    let bd = block_diagonalize(b, &graph.q1, &graph.q2)?;
    Ok(DemoReport {
        dim1: b.dim1(),
        dim2: b.dim2(),
        gap: g,
        v_norm: b.v_norm(),
        quad_points: p.quad_points,
        quad_change: p.change,
        enclosed: p.enclosed,
        rank: p.rank(),
        idempotency: p.idempotency_residual,
        commutator: p.commutator_residual,
        imag_residue: p.imag_residue,
        complement_commutator,
        sum_to_identity,
        projection_shift,
        perturbation_envelope: 2.0 * b.v_norm() / g,
        graph_residual: graph.graph_residual,
        antisymmetry: graph.antisymmetry_residual,
        intertwining: bd.intertwining_residual,
        offdiag: bd.offdiag_residual,
        orthogonality: bd.orthogonality_residual,
        eigenvalues: bd.eigenvalue_residual,
        t1_norm: bd.t1.op_norm(),
    })
}

fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> RMat {
    gaussian_rmat(n, n, rng).qr().q()
}

/// `σ(H₁) ⊂ [−1, 0]`, `σ(H₂) ⊂ [gap, gap + 1]` (both sets include their
/// endpoints), random eigenbases, and `‖V‖ = v_ratio·gap`.
pub fn random_block_operator<R: Rng + ?Sized>(dim1: usize, dim2: usize, gap: f64, v_ratio: f64, rng: &mut R) -> BlockOperator {
    let spectrum = |n: usize, lo: f64, rng: &mut R| -> Vec<f64> {
        (0..n)
            .map(|k| match k {
                0 => lo,
                1 => lo + 1.0,
                _ => lo + rng.random_range(0.0..1.0),
            })
            .collect()
    };
    let build = |vals: Vec<f64>, rng: &mut R| {
        let o = random_orthogonal(vals.len(), rng);
        RealSym::symmetrize(&o * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vals)) * o.transpose())
    };
    let s1 = spectrum(dim1, -1.0, rng);
    let s2 = spectrum(dim2, gap, rng);
    let h1 = build(s1, rng);
    let h2 = build(s2, rng);
    let mut v = gaussian_rmat(dim1, dim2, rng);
    let vn = op_norm_real(&v);
    if vn > 0.0 {
        v *= v_ratio * gap / vn;
    }
    BlockOperator::new(h1, h2, v).expect("dimensions agree by construction")
}
