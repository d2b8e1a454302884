//! Seeded Monte Carlo for `E[cd_λ²(G₀⁺)]` over disorder realizations, the
//! product bound it is compared with, and pathwise one-step checks.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::green::{forward_green, EngineConfig};
use crate::matcore::RealSym;
use crate::model::{band_report, second_moments, sample_potential, DisorderModel, Interval, OperatorSpec, SiteLaw};
use crate::par::{self, Execution};
use crate::sampling::{mix_seed, stream_rng};
use crate::siegel::{self, cd, chain_c0, free_fixed_point_from_eig, SiegelSampler, SpectralParameter};

/// Margin kept between `J` and the ends of `I_D`.
pub const J_MARGIN: f64 = 1e-6;

/// Failure fraction above which a run is flagged as invalid.
pub const FAILURE_FLAG_FRACTION: f64 = 0.01;

#[derive(Clone, Debug)]
pub struct Experiment {
    pub spec: OperatorSpec,
    pub model: DisorderModel,
    pub j: Interval,
    pub x_grid: Vec<f64>,
    /// Strictly decreasing, inside `(0, 1]`.
    pub eps_grid: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    /// Sample range; the potential vanishes outside it.
    pub window: (i64, i64),
    /// Site at which `G⁺` is evaluated.
    pub site: i64,
    pub cfg: EngineConfig,
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        let report = band_report(&self.spec);
        let Some(i_d) = report.i_d else {
            return Err(Error::InvalidParameter("I_D is empty for this D".into()));
        };
        if !(self.j.lo <= self.j.hi) || self.j.lo < i_d.lo + J_MARGIN || self.j.hi > i_d.hi - J_MARGIN {
            return Err(Error::InvalidParameter(format!(
                "J = {} must lie inside I_D = {} with margin {J_MARGIN:e}",
                self.j, i_d
            )));
        }
        if let Some(x) = self.x_grid.iter().find(|x| !self.j.contains(**x)) {
            return Err(Error::InvalidParameter(format!("grid energy {x} outside J = {}", self.j)));
        }
        if let Some(e) = self.eps_grid.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return Err(Error::InvalidParameter(format!("eps {e} outside (0, 1]")));
        }
        if self.eps_grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter("eps grid must be strictly decreasing".into()));
        }
        if self.window.1 < self.window.0 {
            return Err(Error::InvalidParameter(format!("empty window [{}, {}]", self.window.0, self.window.1)));
        }
        if self.model.channels() != self.spec.m() {
            return Err(Error::DimensionMismatch { expected: self.spec.m(), found: self.model.channels() });
        }
        self.cfg.validate(self.spec.m())
    }

    fn grid(&self) -> Vec<(f64, f64)> {
        self.x_grid.iter().flat_map(|&x| self.eps_grid.iter().map(move |&e| (x, e))).collect()
    }

    /// Seed of trial `t`.
    pub fn trial_seed(&self, t: usize) -> u64 {
        mix_seed(self.master_seed, t as u64)
    }

    /// Largest chain constant `C₀` over the grid.
    pub fn chain_c0(&self) -> Result<f64> {
        let mut best: f64 = 0.0;
        for (x, eps) in self.grid() {
            let zl = free_fixed_point_from_eig(SpectralParameter::new(x, eps)?, self.spec.d_eig())?;
            best = best.max(chain_c0(1.0 / zl.min_im_eig(), self.spec.m(), self.model.support_bound()));
        }
        Ok(best)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridPoint {
    pub x: f64,
    pub eps: f64,
    pub mean: f64,
    pub variance: f64,
    pub max: f64,
    pub trials: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub x: f64,
    pub eps: f64,
    pub error: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProductBound {
    /// `∏ (1 + C₀ E‖qᵢ‖²)`.
    pub product: f64,
    /// `exp(C₀ Σ E‖qᵢ‖²)`.
    pub exponential: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MCReport {
    pub points: Vec<GridPoint>,
    pub trials_requested: usize,
    pub failures: Vec<TrialFailure>,
    /// Set when failures exceed [`FAILURE_FLAG_FRACTION`] of all evaluations.
    pub flagged: bool,
    pub c0: f64,
    pub product_bound: ProductBound,
    pub sum_second_moments: f64,
    pub x_grid: Vec<f64>,
    pub eps_grid: Vec<f64>,
}

impl MCReport {
    pub fn point(&self, x: f64, eps: f64) -> Option<&GridPoint> {
        self.points.iter().find(|p| p.x == x && p.eps == eps)
    }

    /// Grid maximum of the mean at fixed `eps`.
    pub fn max_mean_at(&self, eps: f64) -> Option<f64> {
        self.points.iter().filter(|p| p.eps == eps && p.trials > 0).map(|p| p.mean).reduce(f64::max)
    }
}

pub fn product_bound(exp: &Experiment, c0: f64) -> Result<ProductBound> {
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(Error::InvalidParameter(format!("C0 must be > 0, got {c0}")));
    }
    let moments = second_moments(&exp.model, exp.window.0, exp.window.1);
    let product = moments.iter().map(|s| 1.0 + c0 * s).product();
    let exponential = (c0 * moments.iter().sum::<f64>()).exp();
    Ok(ProductBound { product, exponential })
}

/// `cd_λ²(G⁺)` at every grid point for one trial.
fn run_trial(exp: &Experiment, grid: &[(f64, f64)], t: usize) -> Result<Vec<std::result::Result<f64, String>>> {
    let q = sample_potential(&exp.model, exp.trial_seed(t), exp.window.0, exp.window.1)?;
    grid.iter()
        .map(|&(x, eps)| {
            let lam = SpectralParameter::new(x, eps)?;
            let zl = free_fixed_point_from_eig(lam, exp.spec.d_eig())?;
            Ok(match forward_green(&exp.spec, &q, lam, exp.site, &exp.cfg) {
                Ok(g) => Ok(cd(&zl, &g.value)?.powi(2)),
                Err(e @ Error::NoConvergence { .. }) => Err(e.to_string()),
                Err(e) => return Err(e),
            })
        })
        .collect()
}

pub fn run(exp: &Experiment) -> Result<MCReport> {
    run_with(Execution::default(), exp)
}

pub fn run_with(exec: Execution, exp: &Experiment) -> Result<MCReport> {
    exp.validate()?;
    let c0 = exp.chain_c0()?;
    run_with_c0(exec, exp, c0)
}

/// As [`run_with`], comparing against the product bound at a caller-chosen `C₀`.
pub fn run_with_c0(exec: Execution, exp: &Experiment, c0: f64) -> Result<MCReport> {
    exp.validate()?;
    let grid = exp.grid();
    let per_trial = par::try_map_indexed_with(exec, exp.trials, |t| run_trial(exp, &grid, t))?;

    let mut failures = Vec::new();
    let mut points = Vec::with_capacity(grid.len());
    for (k, &(x, eps)) in grid.iter().enumerate() {
        let mut vals = Vec::with_capacity(exp.trials);
        let mut failed = 0;
        for (t, row) in per_trial.iter().enumerate() {
            match &row[k] {
                Ok(v) => vals.push(*v),
                Err(e) => {
                    failed += 1;
                    failures.push(TrialFailure { trial: t, x, eps, error: e.clone() });
                }
            }
        }
        let n = vals.len();
        let mean = if n > 0 { vals.iter().sum::<f64>() / n as f64 } else { 0.0 };
        let variance = if n > 1 { vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        let max = vals.iter().copied().fold(0.0, f64::max);
        points.push(GridPoint { x, eps, mean, variance, max, trials: n, failures: failed });
    }
    failures.sort_by_key(|f| f.trial);

    let evaluations = exp.trials * grid.len();
    let flagged = evaluations > 0 && failures.len() as f64 > FAILURE_FLAG_FRACTION * evaluations as f64;
    let sum_second_moments = second_moments(&exp.model, exp.window.0, exp.window.1).iter().sum();
    Ok(MCReport {
        points,
        trials_requested: exp.trials,
        failures,
        flagged,
        c0,
        product_bound: product_bound(exp, c0)?,
        sum_second_moments,
        x_grid: exp.x_grid.clone(),
        eps_grid: exp.eps_grid.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZeroMeanCheck {
    /// `|mean of A(Z, q₀)|` over the trials.
    pub mean_abs: f64,
    pub sd: f64,
    pub trials: usize,
    /// `4·sd/√T`.
    pub bound: f64,
    pub passed: bool,
}

/// Empirical mean of the first-order term `A(Z, q₀)` at a random `Z`, with
/// `D = 0` and `λ = i/2`.
pub fn zero_mean_check<L: SiteLaw>(law: &L, trials: usize, seed: u64) -> Result<ZeroMeanCheck> {
    let m = law.channels();
    let d = RealSym::zeros(m);
    let d_eig = d.eig();
    let lam = SpectralParameter::new(0.0, 0.5)?;
    let zl = free_fixed_point_from_eig(lam, &d_eig)?;
    let z = SiegelSampler::default().sample(m, &mut stream_rng(seed, u64::MAX));
    let vals: Vec<f64> = (0..trials)
        .map(|t| {
            let q = law.sample_seeded(mix_seed(seed, t as u64), 0);
            siegel::lemma25_report_with(&z, &q, lam, &d, &zl, &d_eig).map(|r| r.cap_a)
        })
        .collect::<Result<_>>()?;
    let n = vals.len().max(1) as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let bound = 4.0 * sd / n.sqrt();
    Ok(ZeroMeanCheck { mean_abs: mean.abs(), sd, trials, bound, passed: mean.abs() <= bound })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathwiseReport {
    pub steps: usize,
    /// Steps with `ratio > 1 + A + C₀‖q‖²` (chain `C₀`).
    pub violations: usize,
    /// Steps with `ratio > 1 + A + C` (exact second-order term).
    pub exact_violations: usize,
    pub chain_c0: f64,
    /// Largest `(ratio − 1 − A)/‖q‖²` seen.
    pub measured_c0: f64,
    /// Smallest `(1 + A + C₀‖q‖²) − ratio`.
    pub worst_margin: f64,
}

/// One-step second-moment inequality along recursion paths
/// `Z_k = Φ_{q_k}(Z_{k+1})`, started from `Z_λ` at the end of the window.
pub fn pathwise_check(exp: &Experiment, trials: usize, x: f64, eps: f64, max_steps: usize) -> Result<PathwiseReport> {
    exp.validate()?;
    let lam = SpectralParameter::new(x, eps)?;
    let d = exp.spec.d();
    let d_eig = exp.spec.d_eig();
    let zl = free_fixed_point_from_eig(lam, d_eig)?;
    let c0 = chain_c0(1.0 / zl.min_im_eig(), exp.spec.m(), exp.model.support_bound());
    let (lo, hi) = exp.window;
    let start = hi.min(lo + max_steps as i64);
    let (mut steps, mut violations, mut exact_violations) = (0, 0, 0);
    let mut measured: f64 = 0.0;
    let mut worst = f64::INFINITY;
    for t in 0..trials {
        let q = sample_potential(&exp.model, exp.trial_seed(t), lo, hi)?;
        let mut z = zl.clone();
        for n in (lo..=start).rev() {
            let qn = q.get(n);
            let r = siegel::lemma25_report_with(&z, qn, lam, d, &zl, d_eig)?;
            let bound = 1.0 + r.cap_a + c0 * r.delta_norm.powi(2);
            let slack = 1e-9 * r.lhs_ratio;
            steps += 1;
            if r.lhs_ratio > bound + slack {
                violations += 1;
            }
            if r.lhs_ratio > r.bound_rhs + slack {
                exact_violations += 1;
            }
            worst = worst.min(bound - r.lhs_ratio);
            if let Some(c) = r.measured_c0() {
                measured = measured.max(c);
            }
            z = siegel::phi(&z, qn, lam, d)?;
        }
    }
    Ok(PathwiseReport { steps, violations, exact_violations, chain_c0: c0, measured_c0: measured, worst_margin: worst })
}
