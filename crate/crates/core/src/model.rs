//! Operator specification `H = Δ + D + q`, band geometry of the free part,
//! and compactly supported zero-mean disorder with a decay envelope.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matcore::{RMat, RealSym, SymEig};
use crate::sampling::site_rng;

/// Largest channel count accepted for dense storage.
pub const MAX_CHANNELS: usize = 64;

/// The constant matrix `D` of `H = Δ + D + q`, with its spectrum cached.
///
/// The hopping term is `−φ(n−1) − φ(n+1)` (off-diagonal blocks `−I`).
#[derive(Clone, Debug)]
pub struct OperatorSpec {
    d: RealSym,
    d_eig: SymEig,
}

impl OperatorSpec {
    pub fn new(d: RealSym) -> Result<Self> {
        if d.dim() == 0 {
            return Err(Error::InvalidParameter("D must have at least one channel".into()));
        }
        if d.dim() > MAX_CHANNELS {
            return Err(Error::SizeCap { size: d.dim(), cap: MAX_CHANNELS });
        }
        let d_eig = d.eig();
        let recon = d_eig.map(|w| w);
        let err = (recon.matrix() - d.matrix()).amax();
        let scale = d.matrix().amax().max(1.0);
        if err > 1e-12 * scale {
            return Err(Error::InvariantBreach(format!("eigendecomposition of D off by {err:.3e}")));
        }
        Ok(OperatorSpec { d, d_eig })
    }

    /// `D = 0` on `m` channels.
    pub fn free(m: usize) -> Result<Self> {
        Self::new(RealSym::zeros(m))
    }

    pub fn m(&self) -> usize {
        self.d.dim()
    }

    pub fn d(&self) -> &RealSym {
        &self.d
    }

    pub fn d_eig(&self) -> &SymEig {
        &self.d_eig
    }

    /// Eigenvalues `μ₁ ≤ … ≤ μ_m` of `D`.
    pub fn channel_energies(&self) -> &[f64] {
        &self.d_eig.values
    }
}

/// Dirichlet adjacency `(Dψ)(n) = −Σ_{|k−n|=1} ψ(k)` on the cube `{1..L}^d`.
pub fn strip_dirichlet(side: usize, dim: usize) -> Result<OperatorSpec> {
    if side == 0 || dim == 0 {
        return Err(Error::InvalidParameter(format!("strip needs L ≥ 1 and d ≥ 1, got L={side}, d={dim}")));
    }
    let m = (0..dim).try_fold(1usize, |acc, _| acc.checked_mul(side)).filter(|&m| m <= MAX_CHANNELS);
    let Some(m) = m else {
        let size = (side as f64).powi(dim as i32).min(usize::MAX as f64) as usize;
        return Err(Error::SizeCap { size, cap: MAX_CHANNELS });
    };
    let coords = |mut idx: usize| {
        let mut c = vec![0usize; dim];
        for slot in c.iter_mut() {
            *slot = idx % side;
            idx /= side;
        }
        c
    };
    let mut mat = RMat::zeros(m, m);
    for a in 0..m {
        let ca = coords(a);
        for b in 0..m {
            let cb = coords(b);
            let l1: usize = ca.iter().zip(&cb).map(|(x, y)| x.abs_diff(*y)).sum();
            if l1 == 1 {
                mat[(a, b)] = -1.0;
            }
        }
    }
    OperatorSpec::new(RealSym::symmetrize(mat))
}

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.6}, {:.6}]", self.lo, self.hi)
    }
}

/// A maximal interval of constant mode count `m(λ)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BandInterval {
    pub interval: Interval,
    pub count: usize,
    /// Indices `k` (into the ascending eigenvalues of `D`) with `I ⊂ (μ_k − 2, μ_k + 2)`.
    pub channels: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BandReport {
    /// `⋂_k [μ_k − 2, μ_k + 2]`, `None` when empty or a single point.
    pub i_d: Option<Interval>,
    /// `σ(Δ + D) = ⋃_k [μ_k − 2, μ_k + 2]` as sorted disjoint intervals.
    pub sigma_free: Vec<Interval>,
    pub breakpoints: Vec<f64>,
    pub intervals_with_count: Vec<BandInterval>,
    pub channel_energies: Vec<f64>,
}

impl BandReport {
    /// `m(λ) = #{k : |λ − μ_k| < 2}`.
    pub fn mode_count(&self, x: f64) -> usize {
        self.channel_energies.iter().filter(|mu| (x - **mu).abs() < 2.0).count()
    }

    pub fn in_sigma_free(&self, x: f64) -> bool {
        self.sigma_free.iter().any(|i| i.contains(x))
    }

    /// Strict interior of `I_D`.
    pub fn in_interior_of_i_d(&self, x: f64) -> bool {
        self.i_d.is_some_and(|i| i.lo < x && x < i.hi)
    }
}

const BREAK_TOL: f64 = 1e-12;

pub fn band_report(spec: &OperatorSpec) -> BandReport {
    let mu = spec.channel_energies().to_vec();
    let (mu_min, mu_max) = (mu[0], *mu.last().unwrap());
    // a single point (spread exactly 4) counts as empty
    let i_d = (mu_max - mu_min < 4.0 - BREAK_TOL).then(|| Interval::new(mu_max - 2.0, mu_min + 2.0));

    let mut sigma_free: Vec<Interval> = Vec::new();
    for &m in &mu {
        let next = Interval::new(m - 2.0, m + 2.0);
        match sigma_free.last_mut() {
            Some(last) if next.lo <= last.hi => last.hi = last.hi.max(next.hi),
            _ => sigma_free.push(next),
        }
    }

    let mut breakpoints: Vec<f64> = mu.iter().flat_map(|m| [m - 2.0, m + 2.0]).collect();
    breakpoints.sort_by(f64::total_cmp);
    breakpoints.dedup_by(|a, b| (*a - *b).abs() <= BREAK_TOL * (1.0 + b.abs()));

    let mut intervals_with_count = Vec::new();
    for w in breakpoints.windows(2) {
        let iv = Interval::new(w[0], w[1]);
        if iv.len() <= BREAK_TOL {
            continue;
        }
        let mid = 0.5 * (iv.lo + iv.hi);
        let channels: Vec<usize> = (0..mu.len()).filter(|&k| (mid - mu[k]).abs() < 2.0).collect();
        if !channels.is_empty() {
            intervals_with_count.push(BandInterval { interval: iv, count: channels.len(), channels });
        }
    }

    BandReport { i_d, sigma_free, breakpoints, intervals_with_count, channel_energies: mu }
}

/// Distribution family of the scalar (or per-entry) amplitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DisorderKind {
    /// `q_n = c_n s M`, `s = ±1`.
    Rademacher,
    /// `q_n = c_n u M`, `u ~ U(−1, 1)`.
    Uniform,
    /// `q_n = c_n (ξ / t) M`, `ξ ~ N(0, 1)` conditioned on `|ξ| ≤ t`.
    TruncatedGaussian { cutoff: f64 },
    /// `q_n = c_n diag(u_1, …, u_m)` with independent `u_i ~ U(−1, 1)`.
    DiagonalIid,
}

/// Site-dependent amplitude factor in `[0, 1]`.
#[derive(Clone)]
pub enum Envelope {
    /// `(1 + |n|)^{−alpha}`.
    Power { alpha: f64 },
    Custom(Arc<dyn Fn(i64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Envelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Envelope::Power { alpha } => write!(f, "Power {{ alpha: {alpha} }}"),
            Envelope::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Envelope {
    pub fn factor(&self, n: i64) -> f64 {
        match self {
            Envelope::Power { alpha } => (1.0 + n.unsigned_abs() as f64).powf(-alpha),
            Envelope::Custom(f) => f(n).clamp(0.0, 1.0),
        }
    }
}

/// A law for the site potentials `q_n`.
pub trait SiteLaw: Send + Sync {
    fn channels(&self) -> usize;

    /// Draw `q_n` from its own random stream.
    fn sample_site<R: Rng + ?Sized>(&self, n: i64, rng: &mut R) -> RealSym;

    fn sample_seeded(&self, seed: u64, n: i64) -> RealSym {
        self.sample_site(n, &mut site_rng(seed, n))
    }
}

/// Independent, symmetric, compactly supported site laws
/// `‖q_n‖ ≤ c·envelope(n) ≤ c`.
#[derive(Clone, Debug)]
pub struct DisorderModel {
    pub kind: DisorderKind,
    direction: RealSym,
    pub amplitude: f64,
    pub envelope: Envelope,
}

impl DisorderModel {
    /// Direction `M = I`.
    pub fn new(kind: DisorderKind, m: usize, amplitude: f64, alpha: f64) -> Result<Self> {
        Self::with_direction(kind, RealSym::identity(m), amplitude, alpha)
    }

    /// `direction` is rescaled to unit operator norm.
    pub fn with_direction(kind: DisorderKind, direction: RealSym, amplitude: f64, alpha: f64) -> Result<Self> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!("amplitude must be ≥ 0, got {amplitude}")));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("envelope exponent must be ≥ 0, got {alpha}")));
        }
        if let DisorderKind::TruncatedGaussian { cutoff } = kind {
            if !(cutoff > 0.0 && cutoff.is_finite()) {
                return Err(Error::InvalidParameter(format!("gaussian cutoff must be > 0, got {cutoff}")));
            }
        }
        let norm = direction.op_norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidParameter("disorder direction must be nonzero".into()));
        }
        Ok(DisorderModel { kind, direction: direction.scale(1.0 / norm), amplitude, envelope: Envelope::Power { alpha } })
    }

    /// Replaces the power envelope by a per-site factor.
    pub fn with_site_amplitude(mut self, f: impl Fn(i64) -> f64 + Send + Sync + 'static) -> Self {
        self.envelope = Envelope::Custom(Arc::new(f));
        self
    }

    pub fn direction(&self) -> &RealSym {
        &self.direction
    }

    /// `c_n = c · envelope(n)`.
    pub fn site_amplitude(&self, n: i64) -> f64 {
        self.amplitude * self.envelope.factor(n)
    }

    /// Radius `K` of the compact support: `‖q_n‖ ≤ K` for all `n`.
    pub fn support_bound(&self) -> f64 {
        self.amplitude
    }

    /// `E‖q_n‖² / c_n²` for the unit-amplitude law.
    pub fn unit_second_moment(&self) -> f64 {
        match self.kind {
            DisorderKind::Rademacher => 1.0,
            DisorderKind::Uniform => 1.0 / 3.0,
            DisorderKind::TruncatedGaussian { cutoff } => truncated_gaussian_second_moment(cutoff) / (cutoff * cutoff),
            // max_i |u_i| has CDF t^m on [0, 1]
            DisorderKind::DiagonalIid => {
                let m = self.channels() as f64;
                m / (m + 2.0)
            }
        }
    }

    /// Sample `q_n` on `[n_min, n_max]`; site `n` only depends on `(master_seed, n)`.
    pub fn sample_potential(&self, master_seed: u64, n_min: i64, n_max: i64) -> Result<PotentialSample> {
        sample_potential(self, master_seed, n_min, n_max)
    }
}

impl SiteLaw for DisorderModel {
    fn channels(&self) -> usize {
        self.direction.dim()
    }

    fn sample_site<R: Rng + ?Sized>(&self, n: i64, rng: &mut R) -> RealSym {
        let cn = self.site_amplitude(n);
        let m = self.channels();
        if cn == 0.0 {
            return RealSym::zeros(m);
        }
        let scalar = match self.kind {
            DisorderKind::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            DisorderKind::Uniform => rng.random_range(-1.0..1.0),
            DisorderKind::TruncatedGaussian { cutoff } => loop {
                let xi: f64 = rng.sample(StandardNormal);
                if xi.abs() <= cutoff {
                    break xi / cutoff;
                }
            },
            DisorderKind::DiagonalIid => {
                let diag: Vec<f64> = (0..m).map(|_| cn * rng.random_range(-1.0..1.0)).collect();
                return RealSym::from_diagonal(&diag);
            }
        };
        self.direction.scale(cn * scalar)
    }
}

/// `E[ξ² | |ξ| ≤ t]` for standard normal `ξ`, by composite Simpson quadrature.
pub fn truncated_gaussian_second_moment(t: f64) -> f64 {
    let panels = 4000;
    let h = t / panels as f64;
    let density = |x: f64| (-0.5 * x * x).exp();
    let simpson = |f: &dyn Fn(f64) -> f64| {
        let mut s = f(0.0) + f(t);
        for k in 1..panels {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(k as f64 * h);
        }
        s * h / 3.0
    };
    simpson(&|x| x * x * density(x)) / simpson(&density)
}

/// `Σ_{n ∈ [n_min, n_max]} E‖q_n‖²`.
pub fn second_moment_sum(model: &DisorderModel, n_min: i64, n_max: i64) -> f64 {
    let unit = model.unit_second_moment();
    (n_min..=n_max).map(|n| model.site_amplitude(n).powi(2) * unit).sum()
}

/// Per-site second moments `E‖q_n‖²` over a range.
pub fn second_moments(model: &DisorderModel, n_min: i64, n_max: i64) -> Vec<f64> {
    let unit = model.unit_second_moment();
    (n_min..=n_max).map(|n| model.site_amplitude(n).powi(2) * unit).collect()
}

/// A potential realized on `[n_min, n_max]` and zero elsewhere.
#[derive(Clone, Debug)]
pub struct PotentialSample {
    n_min: i64,
    n_max: i64,
    values: Vec<RealSym>,
    zero: RealSym,
}

impl PotentialSample {
    /// `q ≡ 0` on `m` channels.
    pub fn zero(m: usize) -> Self {
        PotentialSample { n_min: 0, n_max: -1, values: Vec::new(), zero: RealSym::zeros(m) }
    }

    /// Explicit values on consecutive sites starting at `n_min`.
    pub fn from_values(n_min: i64, values: Vec<RealSym>) -> Result<Self> {
        let m = values.first().map(RealSym::dim).ok_or_else(|| Error::InvalidParameter("empty potential".into()))?;
        if let Some(bad) = values.iter().find(|v| v.dim() != m) {
            return Err(Error::DimensionMismatch { expected: m, found: bad.dim() });
        }
        let n_max = n_min + values.len() as i64 - 1;
        Ok(PotentialSample { n_min, n_max, values, zero: RealSym::zeros(m) })
    }

    pub fn channels(&self) -> usize {
        self.zero.dim()
    }

    /// `(n_min, n_max)`; empty when `n_max < n_min`.
    pub fn range(&self) -> (i64, i64) {
        (self.n_min, self.n_max)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, n: i64) -> &RealSym {
        if n < self.n_min || n > self.n_max {
            &self.zero
        } else {
            &self.values[(n - self.n_min) as usize]
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &RealSym)> {
        (self.n_min..).zip(self.values.iter())
    }

    /// `q'_n = q_{−n}`.
    pub fn reflected(&self) -> Self {
        if self.is_empty() {
            return self.clone();
        }
        let values = self.values.iter().rev().cloned().collect();
        PotentialSample { n_min: -self.n_max, n_max: -self.n_min, values, zero: self.zero.clone() }
    }
}

pub fn sample_potential<L: SiteLaw>(law: &L, master_seed: u64, n_min: i64, n_max: i64) -> Result<PotentialSample> {
    if n_min > n_max {
        return Err(Error::InvalidParameter(format!("empty range [{n_min}, {n_max}]")));
    }
    let values = (n_min..=n_max).map(|n| law.sample_seeded(master_seed, n)).collect();
    Ok(PotentialSample { n_min, n_max, values, zero: RealSym::zeros(law.channels()) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_eigs(spec: &OperatorSpec) -> Vec<f64> {
        spec.channel_energies().to_vec()
    }

    #[test]
    fn strip_single_site() {
        let s = strip_dirichlet(1, 1).unwrap();
        assert_eq!(s.m(), 1);
        assert_eq!(s.d().get(0, 0), 0.0);
    }

    #[test]
    fn strip_two_sites() {
        let s = strip_dirichlet(2, 1).unwrap();
        assert_eq!(s.d().to_rows(), vec![vec![0.0, -1.0], vec![-1.0, 0.0]]);
        let e = sorted_eigs(&s);
        assert!((e[0] + 1.0).abs() < 1e-14 && (e[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn strip_matches_cosine_formula() {
        for (side, dim) in [(2, 2), (3, 1), (4, 2), (3, 3), (8, 2), (4, 3)] {
            let s = strip_dirichlet(side, dim).unwrap();
            let mut expect = vec![0.0f64];
            for _ in 0..dim {
                expect = expect
                    .iter()
                    .flat_map(|acc| {
                        (1..=side).map(move |k| acc - 2.0 * (std::f64::consts::PI * k as f64 / (side as f64 + 1.0)).cos())
                    })
                    .collect();
            }
            expect.sort_by(f64::total_cmp);
            for (a, b) in sorted_eigs(&s).iter().zip(&expect) {
                assert!((a - b).abs() < 1e-10, "L={side} d={dim}: {a} vs {b}");
            }
        }
        let e = sorted_eigs(&strip_dirichlet(2, 2).unwrap());
        for (a, b) in e.iter().zip([-2.0, 0.0, 0.0, 2.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn strip_size_cap() {
        assert!(matches!(strip_dirichlet(5, 3), Err(Error::SizeCap { .. })));
        assert!(matches!(strip_dirichlet(1 << 20, 4), Err(Error::SizeCap { .. })));
        assert!(strip_dirichlet(4, 3).is_ok());
    }

    #[test]
    fn band_report_strip_l2() {
        let b = band_report(&strip_dirichlet(2, 1).unwrap());
        let i_d = b.i_d.unwrap();
        assert!((i_d.lo + 1.0).abs() < 1e-12 && (i_d.hi - 1.0).abs() < 1e-12);
        assert_eq!(b.sigma_free.len(), 1);
        assert!((b.sigma_free[0].lo + 3.0).abs() < 1e-12 && (b.sigma_free[0].hi - 3.0).abs() < 1e-12);
        let counts: Vec<usize> = b.intervals_with_count.iter().map(|i| i.count).collect();
        assert_eq!(counts, vec![1, 2, 1]);
        assert_eq!(b.intervals_with_count[1].channels, vec![0, 1]);
    }

    #[test]
    fn band_report_strip_empty_i_d() {
        assert!(band_report(&strip_dirichlet(3, 2).unwrap()).i_d.is_none());
        assert!(band_report(&strip_dirichlet(2, 2).unwrap()).i_d.is_none());
        assert!(band_report(&strip_dirichlet(1, 3).unwrap()).i_d.is_some());
    }

    #[test]
    fn band_report_two_separated_channels() {
        let spec = OperatorSpec::new(RealSym::from_diagonal(&[0.0, 10.0])).unwrap();
        let b = band_report(&spec);
        assert!(b.i_d.is_none());
        assert_eq!(b.sigma_free, vec![Interval::new(-2.0, 2.0), Interval::new(8.0, 12.0)]);
        assert_eq!(b.intervals_with_count.len(), 2);
        assert!(b.intervals_with_count.iter().all(|i| i.count == 1));
        assert_eq!(b.intervals_with_count[1].channels, vec![1]);
    }

    #[test]
    fn band_report_invariants_on_random_d() {
        use crate::sampling::{gaussian_sym, stream_rng};
        let mut r = stream_rng(3, 0);
        for trial in 0..200 {
            let m = 1 + trial % 6;
            let spec = OperatorSpec::new(gaussian_sym(m, 1.5, &mut r)).unwrap();
            let b = band_report(&spec);
            let mu = spec.channel_energies();
            assert_eq!(b.i_d.is_some(), mu[m - 1] - mu[0] < 4.0);
            if let Some(i) = b.i_d {
                assert!(mu.iter().all(|u| Interval::new(u - 2.0, u + 2.0).contains_interval(&i)));
            }
            for bi in &b.intervals_with_count {
                let mid = 0.5 * (bi.interval.lo + bi.interval.hi);
                assert_eq!(b.mode_count(mid), bi.count);
                assert!(b.in_sigma_free(mid));
                if b.in_interior_of_i_d(mid) {
                    assert_eq!(bi.count, m);
                }
            }
            // the counted intervals tile sigma_free
            let covered: f64 = b.intervals_with_count.iter().map(|i| i.interval.len()).sum();
            let total: f64 = b.sigma_free.iter().map(|i| i.len()).sum();
            assert!((covered - total).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_amplitude_sample_is_zero() {
        let model = DisorderModel::new(DisorderKind::Uniform, 2, 0.0, 1.0).unwrap();
        let q = model.sample_potential(5, -10, 10).unwrap();
        assert!(q.iter().all(|(_, v)| v.matrix().amax() == 0.0));
        assert_eq!(second_moment_sum(&model, -10, 10), 0.0);
    }

    #[test]
    fn rademacher_envelope_is_exact() {
        let model = DisorderModel::new(DisorderKind::Rademacher, 1, 1.0, 1.0).unwrap();
        let q = model.sample_potential(9, -50, 50).unwrap();
        for (n, v) in q.iter() {
            assert_eq!(v.get(0, 0).abs(), 1.0 / (1.0 + n.unsigned_abs() as f64));
        }
    }

    #[test]
    fn enlarging_range_preserves_sites() {
        for kind in [DisorderKind::Rademacher, DisorderKind::Uniform, DisorderKind::TruncatedGaussian { cutoff: 2.0 }, DisorderKind::DiagonalIid] {
            let model = DisorderModel::new(kind, 3, 0.7, 0.5).unwrap();
            let small = model.sample_potential(77, -5, 5).unwrap();
            let large = model.sample_potential(77, -10, 10).unwrap();
            for n in -5..=5 {
                assert_eq!(small.get(n), large.get(n));
            }
            assert_eq!(small.get(6).matrix().amax(), 0.0);
        }
    }

    #[test]
    fn envelope_bounds_every_kind() {
        let dir = RealSym::from_rows(&[vec![1.0, 0.5], vec![0.5, -2.0]]).unwrap();
        for kind in [DisorderKind::Rademacher, DisorderKind::Uniform, DisorderKind::TruncatedGaussian { cutoff: 1.5 }] {
            let model = DisorderModel::with_direction(kind, dir.clone(), 0.9, 0.75).unwrap();
            assert!((model.direction().op_norm() - 1.0).abs() < 1e-14);
            let q = model.sample_potential(1, -100, 100).unwrap();
            for (n, v) in q.iter() {
                assert!(v.op_norm() <= model.site_amplitude(n) * (1.0 + 1e-12));
                assert!(v.op_norm() <= model.support_bound() * (1.0 + 1e-12));
            }
        }
        let model = DisorderModel::new(DisorderKind::DiagonalIid, 4, 0.9, 0.75).unwrap();
        for (n, v) in model.sample_potential(1, -100, 100).unwrap().iter() {
            assert!(v.op_norm() <= model.site_amplitude(n));
        }
    }

    #[test]
    fn empirical_mean_is_zero() {
        let trials = 10_000u64;
        for kind in [DisorderKind::Rademacher, DisorderKind::Uniform, DisorderKind::TruncatedGaussian { cutoff: 2.0 }, DisorderKind::DiagonalIid] {
            let model = DisorderModel::new(kind, 2, 1.0, 0.0).unwrap();
            let mut sum = RMat::zeros(2, 2);
            for t in 0..trials {
                sum += model.sample_seeded(t, 0).matrix();
            }
            let mean = sum / trials as f64;
            let sd = model.unit_second_moment().sqrt();
            assert!(mean.amax() <= 4.0 * sd / (trials as f64).sqrt(), "{kind:?}: {mean}");
        }
    }

    #[test]
    fn second_moment_closed_forms() {
        let rad = DisorderModel::new(DisorderKind::Rademacher, 1, 1.0, 1.0).unwrap();
        let n = 25;
        let expect: f64 = (-n..=n).map(|k: i64| (1.0 + k.abs() as f64).powi(-2)).sum();
        assert!((second_moment_sum(&rad, -n, n) - expect).abs() < 1e-14);
        let uni = DisorderModel::new(DisorderKind::Uniform, 1, 1.0, 0.0).unwrap();
        assert!((second_moment_sum(&uni, 0, 0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn truncated_gaussian_moment_matches_closed_form() {
        // E[ξ² | |ξ| ≤ t] = 1 − 2tφ(t)/(2Φ(t) − 1), with 2Φ(t) − 1 = erf(t/√2).
        // erf is evaluated by its Taylor series, independent of the Simpson rule.
        fn erf(x: f64) -> f64 {
            let mut term = x;
            let mut sum = x;
            for k in 1..200 {
                term *= -x * x / k as f64;
                sum += term / (2 * k + 1) as f64;
            }
            2.0 / std::f64::consts::PI.sqrt() * sum
        }
        for t in [0.5f64, 1.0, 2.0, 3.0] {
            let phi = (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let closed = 1.0 - 2.0 * t * phi / erf(t / 2f64.sqrt());
            assert!((truncated_gaussian_second_moment(t) - closed).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn diagonal_iid_second_moment_by_sampling() {
        let model = DisorderModel::new(DisorderKind::DiagonalIid, 3, 1.0, 0.0).unwrap();
        let trials = 20_000u64;
        let emp: f64 = (0..trials).map(|t| model.sample_seeded(t, 0).op_norm().powi(2)).sum::<f64>() / trials as f64;
        assert!((emp - 0.6).abs() < 0.01, "{emp}");
    }

    #[test]
    fn custom_envelope_and_reflection() {
        let model = DisorderModel::new(DisorderKind::Rademacher, 1, 2.0, 0.0)
            .unwrap()
            .with_site_amplitude(|n| if n % 2 == 0 { 1.0 } else { 0.0 });
        let q = model.sample_potential(3, -4, 6).unwrap();
        assert_eq!(q.get(1).get(0, 0), 0.0);
        assert_eq!(q.get(2).get(0, 0).abs(), 2.0);
        let r = q.reflected();
        assert_eq!(r.range(), (-6, 4));
        for n in -6..=4 {
            assert_eq!(r.get(n), q.get(-n));
        }
    }

    #[test]
    fn invalid_models() {
        assert!(DisorderModel::new(DisorderKind::Uniform, 1, -1.0, 0.0).is_err());
        assert!(DisorderModel::new(DisorderKind::Uniform, 1, 1.0, -0.5).is_err());
        assert!(DisorderModel::new(DisorderKind::TruncatedGaussian { cutoff: 0.0 }, 1, 1.0, 0.5).is_err());
        let model = DisorderModel::new(DisorderKind::Uniform, 1, 1.0, 0.0).unwrap();
        assert!(model.sample_potential(0, 3, 2).is_err());
    }
}
