//! Half-line and full-line diagonal Green's functions by nested Φ maps.
//!
//! `G⁺_{n0} = Φ_{q_{n0}} ∘ Φ_{q_{n0+1}} ∘ … ∘ Φ_{q_{n0+N}}(seed)` is evaluated
//! innermost-first for two seeds at a time, and the depth `N` is grown until
//! the two runs are within `tol` in the Siegel distance. Sites past the end of
//! the sample carry `q = 0`; their Φ₀ steps act channel-wise in the
//! eigenbasis of `D` and are applied in closed form for the built-in seeds.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matcore::{self, CMat, RealSym};
use crate::model::{OperatorSpec, PotentialSample};
use crate::par::{self, Execution};
use crate::siegel::{self, shift_matrix, SiegelPoint, SpectralParameter};

/// Largest total depth reached through the closed-form tail.
pub const MAX_TAIL_DEPTH: u64 = 1 << 52;

#[derive(Clone, Debug)]
pub enum SeedPoint {
    /// The free fixed point `Z_λ`.
    FreeFixedPoint,
    /// `i·I`.
    IIdentity,
    Custom(SiegelPoint),
}

#[derive(Clone, Debug)]
pub struct EngineConfig {
    pub tol: f64,
    /// Cap on explicitly iterated Φ steps per run.
    pub max_depth: u64,
    /// First depth tried; later depths double it.
    pub depth_step: u64,
    pub seed_points: [SeedPoint; 2],
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            tol: 1e-10,
            max_depth: 1_000_000,
            depth_step: 32,
            seed_points: [SeedPoint::FreeFixedPoint, SeedPoint::IIdentity],
        }
    }
}

impl EngineConfig {
    pub fn with_tol(tol: f64) -> Self {
        EngineConfig { tol, ..Self::default() }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParameter(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.depth_step == 0 || self.max_depth == 0 {
            return Err(Error::InvalidParameter("depth_step and max_depth must be ≥ 1".into()));
        }
        for s in &self.seed_points {
            if let SeedPoint::Custom(p) = s {
                if p.dim() != m {
                    return Err(Error::DimensionMismatch { expected: m, found: p.dim() });
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GreenKind {
    Forward,
    Backward,
    Diagonal,
}

impl GreenKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            GreenKind::Forward => "forward",
            GreenKind::Backward => "backward",
            GreenKind::Diagonal => "diagonal",
        }
    }
}

#[derive(Clone, Debug)]
pub struct GreenResult {
    pub value: SiegelPoint,
    pub site: i64,
    pub kind: GreenKind,
    pub depth_used: u64,
    /// Siegel distance between the two seed runs at termination.
    pub residual: f64,
    /// Per-step contraction measured from the last two schedule depths.
    pub gamma_hat: Option<f64>,
    /// `γ̂/(1−γ̂)·residual`, when `γ̂ < 1`.
    pub error_estimate: Option<f64>,
    /// `(depth, residual)` for every depth tried.
    pub history: Vec<(u64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Debug)]
enum State {
    Scalar(Complex64),
    Dense(CMat),
}

impl State {
    fn to_cmat(&self) -> CMat {
        match self {
            State::Scalar(z) => CMat::from_element(1, 1, *z),
            State::Dense(z) => z.clone(),
        }
    }
}

fn state_dist(a: &State, b: &State) -> Result<f64> {
    match (a, b) {
        (State::Scalar(z), State::Scalar(w)) => {
            if !(z.im > 0.0 && w.im > 0.0) {
                return Err(Error::InvariantBreach(format!("recursion left the upper half plane: {z}, {w}")));
            }
            Ok(siegel::dist_from_cd((z - w).norm_sqr() / (z.im * w.im)))
        }
        _ => {
            let pa = SiegelPoint::from_complex(&a.to_cmat()).map_err(breach)?;
            let pb = SiegelPoint::from_complex(&b.to_cmat()).map_err(breach)?;
            siegel::dist(&pa, &pb)
        }
    }
}

fn breach(e: Error) -> Error {
    Error::InvariantBreach(format!("recursion left SH_m: {e}"))
}

/// `z ↦ −(z + s)⁻¹`.
fn step(z: &State, s: &State) -> Result<State> {
    match (z, s) {
        (State::Scalar(z), State::Scalar(s)) => Ok(State::Scalar(-(z + s).inv())),
        (State::Dense(z), State::Dense(s)) => {
            let inv = matcore::lu_inverse(&(z + s)).ok_or(Error::Singular { residual: f64::INFINITY })?;
            Ok(State::Dense((&inv + inv.transpose()) * Complex64::new(-0.5, 0.0)))
        }
        _ => unreachable!("mixed state representations"),
    }
}

/// Closed-form powers of the free map Φ₀ in the eigenbasis of `D`.
///
/// Per channel `f(z) = −1/(z + λ − μ)` fixes `z₊` (the root in the upper half
/// plane) and `z₋ = 1/z₊`, and `(fⁿ(z) − z₊)/(fⁿ(z) − z₋) = z₊^{2n} (z − z₊)/(z − z₋)`.
struct FreeTail {
    roots: Vec<Complex64>,
    vectors: crate::matcore::RMat,
    fixed: State,
}

impl FreeTail {
    fn new(spec: &OperatorSpec, lam: SpectralParameter) -> Result<Self> {
        let eig = spec.d_eig();
        let roots: Vec<Complex64> = eig.values.iter().map(|&mu| siegel::channel_root(lam, mu)).collect::<Result<_>>()?;
        let vectors = eig.vectors.clone();
        let fixed = Self::assemble(spec.m(), &vectors, &roots);
        Ok(FreeTail { roots, vectors, fixed })
    }

    fn assemble(m: usize, v: &crate::matcore::RMat, diag: &[Complex64]) -> State {
        if m == 1 {
            return State::Scalar(diag[0]);
        }
        let mut out = CMat::from_fn(m, m, |i, j| (0..m).map(|k| diag[k] * (v[(i, k)] * v[(j, k)])).sum());
        out = (&out + out.transpose()) * Complex64::new(0.5, 0.0);
        State::Dense(out)
    }

    /// `Φ₀^{count}(i·I)`.
    fn i_identity_power(&self, count: u64) -> State {
        let i = Complex64::i();
        let w: Vec<Complex64> = self
            .roots
            .iter()
            .map(|&zp| {
                if count == 0 {
                    return i;
                }
                let zm = zp.inv();
                let c = (i - zp) / (i - zm);
                let t = (zp * zp).powf(count as f64) * c;
                (zp - zm * t) / (1.0 - t)
            })
            .collect();
        Self::assemble(self.roots.len(), &self.vectors, &w)
    }
}

/// One half-line evaluation at fixed `(q, λ, n0, direction)`.
struct HalfLine<'a> {
    cfg: &'a EngineConfig,
    m: usize,
    /// `λ − D − q_n` for the explicit sites, ordered outward from `n0`.
    shifts: Vec<State>,
    free_shift: State,
    tail: FreeTail,
    seeds: [State; 2],
}

struct Run {
    values: [State; 2],
    depth: u64,
    residual: f64,
    history: Vec<(u64, f64)>,
}

impl Run {
    fn gamma_hat(&self) -> Option<f64> {
        let pos: Vec<&(u64, f64)> = self.history.iter().filter(|(_, r)| *r > 0.0).collect();
        if pos.len() < 2 {
            return None;
        }
        let (n1, r1) = *pos[pos.len() - 2];
        let (n2, r2) = *pos[pos.len() - 1];
        Some((r2 / r1).powf(1.0 / (n2 - n1) as f64))
    }
}

fn to_state(m: usize, z: CMat) -> State {
    if m == 1 {
        State::Scalar(z[(0, 0)])
    } else {
        State::Dense(z)
    }
}

impl<'a> HalfLine<'a> {
    fn new(
        spec: &OperatorSpec,
        q: &PotentialSample,
        lam: SpectralParameter,
        n0: i64,
        dir: Direction,
        cfg: &'a EngineConfig,
    ) -> Result<Self> {
        lam.require_positive()?;
        cfg.validate(spec.m())?;
        let m = spec.m();
        if q.channels() != m {
            return Err(Error::DimensionMismatch { expected: m, found: q.channels() });
        }
        let (lo, hi) = q.range();
        let explicit_len = if q.is_empty() {
            0
        } else {
            match dir {
                Direction::Forward => (hi - n0 + 1).max(0),
                Direction::Backward => (n0 - lo + 1).max(0),
            }
        };
        let sign = if dir == Direction::Forward { 1 } else { -1 };
        let l = lam.lambda();
        let shifts = (0..explicit_len).map(|k| to_state(m, shift_matrix(l, spec.d(), q.get(n0 + sign * k)))).collect();
        let free_shift = to_state(m, shift_matrix(l, spec.d(), &RealSym::zeros(m)));
        let tail = FreeTail::new(spec, lam)?;
        let seeds = cfg.seed_points.clone().map(|s| match s {
            SeedPoint::FreeFixedPoint => tail.fixed.clone(),
            SeedPoint::IIdentity => to_state(m, CMat::identity(m, m) * Complex64::i()),
            SeedPoint::Custom(p) => to_state(m, p.to_complex()),
        });
        Ok(HalfLine { cfg, m, shifts, free_shift, tail, seeds })
    }

    fn closed_form_tail(&self, which: usize) -> bool {
        !matches!(self.cfg.seed_points[which], SeedPoint::Custom(_))
    }

    /// Explicitly iterated steps needed for depth `n`.
    fn iterated_steps(&self, n: u64) -> u64 {
        let total = n + 1;
        let explicit = total.min(self.shifts.len() as u64);
        if (0..2).all(|w| self.closed_form_tail(w)) {
            explicit
        } else {
            total
        }
    }

    /// `Φ_{n0} ∘ … ∘ Φ_{n0±n}(seed)`.
    fn compose(&self, which: usize, n: u64) -> Result<State> {
        let total = n + 1;
        let explicit = total.min(self.shifts.len() as u64) as usize;
        let tail = total - explicit as u64;
        let mut z = match (&self.cfg.seed_points[which], tail) {
            (_, 0) => self.seeds[which].clone(),
            (SeedPoint::FreeFixedPoint, _) => self.tail.fixed.clone(),
            (SeedPoint::IIdentity, _) => self.tail.i_identity_power(tail),
            (SeedPoint::Custom(_), _) => {
                let mut z = self.seeds[which].clone();
                for _ in 0..tail {
                    z = step(&z, &self.free_shift)?;
                }
                z
            }
        };
        match &mut z {
            State::Scalar(zs) => {
                for s in self.shifts[..explicit].iter().rev() {
                    let State::Scalar(s) = s else { unreachable!() };
                    *zs = -(*zs + s).inv();
                }
            }
            State::Dense(_) => {
                for s in self.shifts[..explicit].iter().rev() {
                    z = step(&z, s)?;
                }
            }
        }
        Ok(z)
    }

    fn run(&self, tol: f64) -> Result<Run> {
        let mut depth = self.cfg.depth_step;
        let mut history = Vec::new();
        loop {
            let a = self.compose(0, depth)?;
            let b = self.compose(1, depth)?;
            let r = state_dist(&a, &b)?;
            history.push((depth, r));
            if r <= tol {
                return Ok(Run { values: [a, b], depth, residual: r, history });
            }
            let next = depth.saturating_mul(2);
            if next > MAX_TAIL_DEPTH || self.iterated_steps(next) > self.cfg.max_depth {
                return Err(Error::NoConvergence { depth: depth as usize, residual: r });
            }
            depth = next;
        }
    }
}

fn finish(m: usize, value: &State, site: i64, kind: GreenKind, run_meta: (u64, f64, Option<f64>, Vec<(u64, f64)>)) -> Result<GreenResult> {
    let (depth_used, residual, gamma_hat, history) = run_meta;
    let v = value.to_cmat();
    debug_assert_eq!(v.nrows(), m);
    let value = SiegelPoint::from_complex(&v).map_err(breach)?;
    let error_estimate = gamma_hat.filter(|g| *g < 1.0).map(|g| g / (1.0 - g) * residual);
    Ok(GreenResult { value, site, kind, depth_used, residual, gamma_hat, error_estimate, history })
}

fn half_line(
    spec: &OperatorSpec,
    q: &PotentialSample,
    lam: SpectralParameter,
    n0: i64,
    dir: Direction,
    cfg: &EngineConfig,
) -> Result<GreenResult> {
    let hl = HalfLine::new(spec, q, lam, n0, dir, cfg)?;
    let run = hl.run(cfg.tol)?;
    let kind = if dir == Direction::Forward { GreenKind::Forward } else { GreenKind::Backward };
    let gamma = run.gamma_hat();
    finish(hl.m, &run.values[0], n0, kind, (run.depth, run.residual, gamma, run.history))
}

/// `G⁺_{n0}`, the diagonal block at `n0` of the resolvent restricted to `[n0, ∞)`.
pub fn forward_green(
    spec: &OperatorSpec,
    q: &PotentialSample,
    lam: SpectralParameter,
    n0: i64,
    cfg: &EngineConfig,
) -> Result<GreenResult> {
    half_line(spec, q, lam, n0, Direction::Forward, cfg)
}

/// `G⁻_{n0}`, restricted to `(−∞, n0]`.
pub fn backward_green(
    spec: &OperatorSpec,
    q: &PotentialSample,
    lam: SpectralParameter,
    n0: i64,
    cfg: &EngineConfig,
) -> Result<GreenResult> {
    half_line(spec, q, lam, n0, Direction::Backward, cfg)
}

/// `G_n = −(G⁺_{n+1} + G⁻_{n−1} + λ − D − q_n)⁻¹`.
pub fn diagonal_green(
    spec: &OperatorSpec,
    q: &PotentialSample,
    lam: SpectralParameter,
    n: i64,
    cfg: &EngineConfig,
) -> Result<GreenResult> {
    let m = spec.m();
    let fwd = HalfLine::new(spec, q, lam, n + 1, Direction::Forward, cfg)?;
    let bwd = HalfLine::new(spec, q, lam, n - 1, Direction::Backward, cfg)?;
    let centre = to_state(m, shift_matrix(lam.lambda(), spec.d(), q.get(n)));
    let combine = |a: &State, b: &State| -> Result<State> {
        let sum = match (a, b) {
            (State::Scalar(a), State::Scalar(b)) => State::Scalar(a + b),
            (State::Dense(a), State::Dense(b)) => State::Dense(a + b),
            _ => unreachable!(),
        };
        step(&sum, &centre)
    };
    let mut half_tol = 0.25 * cfg.tol;
    let mut attempts = 0;
    loop {
        let rf = fwd.run(half_tol)?;
        let rb = bwd.run(half_tol)?;
        let g0 = combine(&rf.values[0], &rb.values[0])?;
        let g1 = combine(&rf.values[1], &rb.values[1])?;
        let residual = state_dist(&g0, &g1)?;
        attempts += 1;
        if residual <= cfg.tol || attempts == 3 {
            if residual > cfg.tol {
                return Err(Error::NoConvergence { depth: rf.depth.max(rb.depth) as usize, residual });
            }
            let gamma = match (rf.gamma_hat(), rb.gamma_hat()) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            };
            let mut history = rf.history.clone();
            history.extend(rb.history.iter().copied());
            return finish(m, &g0, n, GreenKind::Diagonal, (rf.depth.max(rb.depth), residual, gamma, history));
        }
        half_tol *= 0.01;
    }
}

/// `(1/(mπ))·tr Im G_n(x + iε)`.
pub fn local_dos(
    spec: &OperatorSpec,
    q: &PotentialSample,
    x: f64,
    eps: f64,
    n: i64,
    cfg: &EngineConfig,
) -> Result<f64> {
    let lam = SpectralParameter::new(x, eps)?;
    lam.require_positive()?;
    let g = diagonal_green(spec, q, lam, n, cfg)?;
    Ok(dos_from_block(&g.value))
}

pub fn dos_from_block(g: &SiegelPoint) -> f64 {
    let m = g.dim();
    let tr: f64 = (0..m).map(|i| g.im().get(i, i)).sum();
    (tr / (m as f64 * std::f64::consts::PI)).max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DosRow {
    pub x: f64,
    pub eps: f64,
    pub dos: f64,
}

/// One row per `(x, eps)`, `x`-major, in grid order.
pub fn dos_curve(
    spec: &OperatorSpec,
    q: &PotentialSample,
    x_grid: &[f64],
    eps_list: &[f64],
    n: i64,
    cfg: &EngineConfig,
) -> Result<Vec<DosRow>> {
    dos_curve_with(Execution::default(), spec, q, x_grid, eps_list, n, cfg)
}

pub fn dos_curve_with(
    exec: Execution,
    spec: &OperatorSpec,
    q: &PotentialSample,
    x_grid: &[f64],
    eps_list: &[f64],
    n: i64,
    cfg: &EngineConfig,
) -> Result<Vec<DosRow>> {
    let ne = eps_list.len();
    par::try_map_indexed_with(exec, x_grid.len() * ne, |k| {
        let (x, eps) = (x_grid[k / ne], eps_list[k % ne]);
        local_dos(spec, q, x, eps, n, cfg).map(|dos| DosRow { x, eps, dos })
    })
}
