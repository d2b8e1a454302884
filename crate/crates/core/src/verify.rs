//! Randomized property suites. Each sample draws its inputs from its own
//! stream of `(seed, sample index)`, so any failure is reproducible from the
//! seed alone.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::blockdecomp::{self, random_block_operator};
use crate::error::{Error, Result};
use crate::matcore::{ComplexSym, RMat, RealSym};
use crate::model::{DisorderKind, DisorderModel, OperatorSpec};
use crate::oracle::{half_line_block, nested_phi_dirichlet};
use crate::par::{self, Execution};
use crate::sampling::{gaussian_sym, stream_rng};
use crate::siegel::{self, cd, chain_c0, SiegelPoint, SiegelSampler, SpectralParameter};

/// Relative tolerance for every comparison.
pub const REL_TOL: f64 = 1e-9;
/// Tolerance of the exact nested-Φ identity.
pub const ORACLE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Siegel,
    Lemma25,
    AppendixB,
    Oracle,
    Blockdecomp,
    All,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Siegel, Suite::Lemma25, Suite::AppendixB, Suite::Oracle, Suite::Blockdecomp];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Siegel => "siegel",
            Suite::Lemma25 => "lemma25",
            Suite::AppendixB => "appendixB",
            Suite::Oracle => "oracle",
            Suite::Blockdecomp => "blockdecomp",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "siegel" => Ok(Suite::Siegel),
            "lemma25" => Ok(Suite::Lemma25),
            "appendixb" => Ok(Suite::AppendixB),
            "oracle" => Ok(Suite::Oracle),
            "blockdecomp" => Ok(Suite::Blockdecomp),
            "all" => Ok(Suite::All),
            _ => Err(Error::InvalidParameter(format!(
                "unknown suite '{s}' (expected siegel, lemma25, appendixB, oracle, blockdecomp or all)"
            ))),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyOptions {
    pub samples: usize,
    pub seed: u64,
    /// Fixed perturbation used by the lemma25 suite in place of random ones.
    pub delta: Option<RealSym>,
    pub execution: Execution,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyResult {
    pub name: String,
    pub passed: usize,
    pub failed: usize,
    /// Smallest normalized margin seen.
    pub worst_margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub samples: usize,
    pub seed: u64,
    pub properties: Vec<PropertyResult>,
    /// Suite-level measurements (for example the largest measured `C₀`).
    pub measurements: Vec<(String, f64)>,
    /// Inputs of the first failing sample.
    pub counterexample: Option<Value>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(|p| p.failed == 0)
    }

    pub fn property(&self, name: &str) -> Option<&PropertyResult> {
        self.properties.iter().find(|p| p.name == name)
    }
}

/// Checks recorded for one sample.
#[derive(Default)]
struct Sample {
    /// `(name, normalized margin, passed)`.
    checks: Vec<(&'static str, f64, bool)>,
    measurements: Vec<(&'static str, f64)>,
    inputs: Option<Value>,
    error: Option<String>,
}

impl Sample {
    /// `lhs ≤ rhs` up to `REL_TOL` relative to the larger magnitude.
    fn le(&mut self, name: &'static str, lhs: f64, rhs: f64) {
        let scale = 1f64.max(lhs.abs()).max(rhs.abs());
        let margin = if lhs.is_finite() && rhs.is_finite() { (rhs - lhs) / scale } else { f64::NEG_INFINITY };
        self.checks.push((name, margin, margin >= -REL_TOL));
    }

    fn eq(&mut self, name: &'static str, a: f64, b: f64) {
        let scale = 1f64.max(a.abs()).max(b.abs());
        let margin = if a.is_finite() && b.is_finite() { -(a - b).abs() / scale } else { f64::NEG_INFINITY };
        self.checks.push((name, margin, margin >= -REL_TOL));
    }

    /// `v ≤ tol`, absolute; the margin is `(tol − v)/tol`.
    fn small(&mut self, name: &'static str, v: f64, tol: f64) {
        let margin = if v.is_finite() { (tol - v) / tol } else { f64::NEG_INFINITY };
        self.checks.push((name, margin, v <= tol));
    }

    /// `lhs < rhs` with no slack.
    fn lt(&mut self, name: &'static str, lhs: f64, rhs: f64) {
        let scale = 1f64.max(lhs.abs()).max(rhs.abs());
        self.checks.push((name, (rhs - lhs) / scale, lhs < rhs));
    }

    fn failed(&self) -> bool {
        self.error.is_some() || self.checks.iter().any(|c| !c.2)
    }
}

fn rows(m: &RMat) -> Value {
    json!((0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect::<Vec<f64>>()).collect::<Vec<_>>())
}

fn point_json(z: &SiegelPoint) -> Value {
    json!({ "re": rows(z.re().matrix()), "im": rows(z.im().matrix()) })
}

fn lam_json(l: SpectralParameter) -> Value {
    json!({ "x": l.x, "eps": l.eps })
}

/// `D` with spread below 4 and an energy strictly inside every channel band.
fn banded_d(m: usize, rng: &mut ChaCha8Rng) -> (RealSym, f64) {
    loop {
        let d = gaussian_sym(m, 0.4, rng);
        let e = d.eig();
        let (lo, hi) = (e.max() - 2.0, e.min() + 2.0);
        if hi - lo > 0.2 {
            let x = rng.random_range(lo + 0.05..hi - 0.05);
            return (d, x);
        }
    }
}

fn eps_sample(rng: &mut ChaCha8Rng) -> f64 {
    10f64.powf(rng.random_range(-3.0..0.0))
}

fn siegel_sample(k: usize, seed: u64) -> Sample {
    let mut s = Sample::default();
    let mut rng = stream_rng(seed, k as u64);
    let m = 1 + k % 4;
    let sampler = SiegelSampler::default();
    let z = sampler.sample(m, &mut rng);
    let w = sampler.sample(m, &mut rng);
    let d = gaussian_sym(m, 1.0, &mut rng);
    let delta = gaussian_sym(m, 1.0, &mut rng);
    let shift = gaussian_sym(m, 2.0, &mut rng);
    let lam = SpectralParameter { x: rng.random_range(-3.0..3.0), eps: eps_sample(&mut rng) };
    let result = (|| -> Result<()> {
        let c = cd(&z, &w)?;
        s.eq("cd_symmetric", c, cd(&w, &z)?);
        s.le("cd_self_zero", cd(&z, &z)?, 0.0);
        s.le("cd_nonnegative", 0.0, c);
        s.eq("isometry_translation", cd(&siegel::translate(&z, &shift)?, &siegel::translate(&w, &shift)?)?, c);
        s.eq("isometry_inversion", cd(&siegel::mobius_neg_inv(&z)?, &siegel::mobius_neg_inv(&w)?)?, c);
        let pz = siegel::phi(&z, &delta, lam, &d)?;
        let pw = siegel::phi(&w, &delta, lam, &d)?;
        s.le("resolvent_bound", pz.op_norm(), 1.0 / lam.eps);
        s.le("non_expansive", cd(&pz, &pw)?, c);
        let (zl, wl) = (siegel::shift_lambda(&z, lam)?, siegel::shift_lambda(&w, lam)?);
        let factor = siegel::shift_contraction_factor(&z, lam.eps) * siegel::shift_contraction_factor(&w, lam.eps);
        s.le("strict_contraction", cd(&zl, &wl)?, factor * c);
        s.lt("contraction_factor_below_one", factor, 1.0);
        let dz = siegel::dist_from_cd(c);
        if dz > 1e-6 {
            s.lt("phi_dist_ratio_below_one", siegel::dist(&pz, &pw)? / dz, 1.0);
        }
        let ppz = siegel::phi(&pz, &delta, lam, &d)?;
        let arg = pz.op_norm() + lam.lambda().norm() + d.op_norm() + delta.op_norm();
        s.le("two_step_compactness", lam.eps / (arg * arg), ppz.min_im_eig());
        if let Ok(fixed) = siegel::free_fixed_point(lam, &d) {
            let image = siegel::phi(&fixed, &RealSym::zeros(m), lam, &d)?;
            s.small("free_fixed_point", image.value().max_abs_diff(fixed.value()), 1e-10 * (1.0 + fixed.op_norm()));
        }
        Ok(())
    })();
    if let Err(e) = result {
        s.error = Some(e.to_string());
    }
    if s.failed() {
        s.inputs = Some(json!({
            "suite": "siegel", "sample": k, "z": point_json(&z), "w": point_json(&w), "d": rows(d.matrix()),
            "delta": rows(delta.matrix()), "shift": rows(shift.matrix()), "lambda": lam_json(lam),
        }));
    }
    s
}

fn lemma25_sample(k: usize, seed: u64, fixed_delta: Option<&RealSym>) -> Sample {
    let mut s = Sample::default();
    let mut rng = stream_rng(seed, k as u64);
    let m = fixed_delta.map_or(1 + k % 4, RealSym::dim);
    let (d, x) = banded_d(m, &mut rng);
    let lam = SpectralParameter { x, eps: eps_sample(&mut rng) };
    let z = SiegelSampler::default().sample(m, &mut rng);
    let delta = match fixed_delta {
        Some(dl) => dl.clone(),
        None => gaussian_sym(m, rng.random_range(0.01..1.5), &mut rng),
    };
    let result = (|| -> Result<()> {
        let r = siegel::lemma25_report(&z, &delta, lam, &d)?;
        let k_bound = r.delta_norm;
        let c0 = chain_c0(r.y_lambda_inv_norm, m, k_bound);
        s.le("ratio_exact_second_order", r.lhs_ratio, r.bound_rhs);
        s.le("ratio_chain_c0", r.lhs_ratio, 1.0 + r.cap_a + c0 * r.delta_norm.powi(2));
        s.le("cross_term_bound", r.a * r.a, 4.0 * r.cd * r.b);
        s.le("quadratic_term_bound", r.b, r.y_lambda_inv_norm.powi(2) * r.delta_norm.powi(2) * r.trace_f);
        s.le("trace_bound", r.trace_f, r.cd + 2.0 * m as f64);
        s.eq("second_order_expansion", r.cd_shifted, r.cd + r.a + r.b);
        s.le("image_below_shift", r.cd_image, r.cd_shifted);
        if let Some(mc) = r.measured_c0() {
            s.measurements.push(("measured_c0", mc));
            s.le("measured_c0_below_chain", mc, c0);
        }
        Ok(())
    })();
    if let Err(e) = result {
        s.error = Some(e.to_string());
    }
    if s.failed() {
        s.inputs = Some(json!({
            "suite": "lemma25", "sample": k, "z": point_json(&z), "d": rows(d.matrix()),
            "delta": rows(delta.matrix()), "lambda": lam_json(lam),
        }));
    }
    s
}

fn appendix_b_sample(k: usize, seed: u64) -> Sample {
    let mut s = Sample::default();
    let mut rng = stream_rng(seed, k as u64);
    let m = 1 + k % 4;
    let sampler = SiegelSampler::default();
    let (z0, z1, z2) = (sampler.sample(m, &mut rng), sampler.sample(m, &mut rng), sampler.sample(m, &mut rng));
    let delta = gaussian_sym(m, rng.random_range(0.01..3.0), &mut rng);
    let (d, x) = banded_d(m, &mut rng);
    let lam = SpectralParameter { x, eps: eps_sample(&mut rng) };
    let result = (|| -> Result<()> {
        // (a) convexity of cd under averaging
        let twice = SiegelPoint::new(ComplexSym { re: z0.re().scale(2.0), im: z0.im().scale(2.0) })?;
        let sum = SiegelPoint::new(ComplexSym { re: z1.re().add(z2.re()), im: z1.im().add(z2.im()) })?;
        s.le("b_a_midpoint", cd(&twice, &sum)?, 0.5 * (cd(&z0, &z1)? + cd(&z0, &z2)?));

        // (b) translation
        let c01 = cd(&z0, &z1)?;
        let moved = siegel::translate(&z1, &delta)?;
        let lhs = cd(&z0, &moved)?;
        let y0s = crate::matcore::real_to_complex(z0.im_inv_sqrt());
        let dc = delta.to_complex();
        let y1i = crate::matcore::real_to_complex(z1.im_inv());
        let tr = crate::matcore::trace(&(&y0s * &dc * &y1i * &dc * &y0s)).re;
        s.le("b_b_intermediate", lhs, 2.0 * c01 + 2.0 * tr);
        let cb = siegel::translation_bound_constant(&z0);
        s.le("b_b_translation", lhs, cb * (1.0 + delta.op_norm().powi(2)) * (c01 + 1.0));

        // (c) trace bound against the free fixed point
        let zl = siegel::free_fixed_point(lam, &d)?;
        let cdl = cd(&zl, &z0)?;
        let yl_is = crate::matcore::real_to_complex(zl.im_inv_sqrt());
        let y0 = crate::matcore::real_to_complex(z0.im().matrix());
        let sandwiched = crate::matcore::trace(&(&yl_is * &y0 * &yl_is)).re;
        s.le("b_c_intermediate", sandwiched - 2.0 * m as f64, cdl);
        let cc = siegel::trace_bound_constant(&zl);
        let tr_y: f64 = (0..m).map(|i| z0.im().get(i, i)).sum();
        s.le("b_c_trace", tr_y, cc * (cdl + 1.0));
        Ok(())
    })();
    if let Err(e) = result {
        s.error = Some(e.to_string());
    }
    if s.failed() {
        s.inputs = Some(json!({
            "suite": "appendixB", "sample": k, "z0": point_json(&z0), "z1": point_json(&z1), "z2": point_json(&z2),
            "delta": rows(delta.matrix()), "d": rows(d.matrix()), "lambda": lam_json(lam),
        }));
    }
    s
}

fn oracle_sample(k: usize, seed: u64) -> Sample {
    let mut s = Sample::default();
    let mut rng = stream_rng(seed, k as u64);
    let m = 1 + k % 4;
    let depth = rng.random_range(0..=50usize);
    let d = gaussian_sym(m, 1.0, &mut rng);
    let amp = rng.random_range(0.0..2.0);
    let lam = SpectralParameter { x: rng.random_range(-3.0..3.0), eps: 10f64.powf(rng.random_range(-2.0..0.0)) };
    let qseed: u64 = rng.random();
    let result = (|| -> Result<()> {
        let spec = OperatorSpec::new(d.clone())?;
        let model = DisorderModel::new(DisorderKind::Uniform, m, amp, 0.0)?;
        let q = model.sample_potential(qseed, 0, depth as i64)?;
        let dense = half_line_block(&spec, &q, lam, 0, depth)?;
        let nested = nested_phi_dirichlet(&spec, &q, lam, 0, depth)?;
        let scale = 1.0 + dense.op_norm();
        s.small("nested_phi_identity", dense.max_abs_diff(&nested), ORACLE_TOL * scale);
        let dc = dense.to_complex();
        s.small("block_symmetric", (&dc - dc.transpose()).camax(), 1e-11 * scale);
        s.le("im_part_positive", 0.0, dense.im.eig().min());
        Ok(())
    })();
    if let Err(e) = result {
        s.error = Some(e.to_string());
    }
    if s.failed() {
        s.inputs = Some(json!({
            "suite": "oracle", "sample": k, "d": rows(d.matrix()), "depth": depth, "amplitude": amp,
            "potential_seed": qseed, "lambda": lam_json(lam),
        }));
    }
    s
}

fn blockdecomp_sample(k: usize, seed: u64) -> Sample {
    let mut s = Sample::default();
    let mut rng = stream_rng(seed, k as u64);
    let (n1, n2) = (rng.random_range(1..=8usize), rng.random_range(1..=8usize));
    let gap = rng.random_range(0.2..2.0);
    let ratio = rng.random_range(0.0..0.125);
    let b = random_block_operator(n1, n2, gap, ratio, &mut rng);
    match blockdecomp::demo(&b) {
        Ok(r) => {
            s.le("rank_equals_dim1", (r.rank as f64 - n1 as f64).abs(), 0.0);
            s.small("idempotent", r.idempotency, 1e-9);
            s.small("commutes", r.commutator, 1e-9);
            s.small("complement_commutes", r.complement_commutator, 1e-9);
            s.small("projections_sum_to_identity", r.sum_to_identity, 1e-9);
            s.small("projection_real", r.imag_residue, 1e-10);
            s.small("graph", r.graph_residual, 1e-8);
            s.small("q2_is_minus_q1_transpose", r.antisymmetry, 1e-8);
            s.small("intertwining", r.intertwining, 1e-8);
            s.small("offdiagonal", r.offdiag, 1e-8);
            s.small("eigenvalues_preserved", r.eigenvalues, 1e-9);
            s.le("perturbation_envelope", r.projection_shift, r.perturbation_envelope);
        }
        Err(e) => s.error = Some(e.to_string()),
    }
    if s.failed() {
        s.inputs = Some(json!({
            "suite": "blockdecomp", "sample": k, "h1": rows(b.h1.matrix()), "h2": rows(b.h2.matrix()), "v": rows(&b.v),
        }));
    }
    s
}

fn collect(suite: Suite, opts: &VerifyOptions, samples: Vec<Sample>) -> SuiteReport {
    let mut properties: Vec<PropertyResult> = Vec::new();
    let mut measurements: Vec<(String, f64)> = Vec::new();
    let mut counterexample = None;
    let mut errors = PropertyResult { name: "evaluates_without_error".into(), passed: 0, failed: 0, worst_margin: 0.0 };
    for s in &samples {
        for &(name, margin, ok) in &s.checks {
            let entry = match properties.iter_mut().find(|p| p.name == name) {
                Some(p) => p,
                None => {
                    properties.push(PropertyResult { name: name.into(), passed: 0, failed: 0, worst_margin: f64::INFINITY });
                    properties.last_mut().unwrap()
                }
            };
            if !ok {
                entry.failed += 1;
            } else {
                entry.passed += 1;
            }
            entry.worst_margin = entry.worst_margin.min(margin);
        }
        for &(name, v) in &s.measurements {
            match measurements.iter_mut().find(|(n, _)| n == name) {
                Some((_, best)) => *best = best.max(v),
                None => measurements.push((name.into(), v)),
            }
        }
        match &s.error {
            Some(_) => errors.failed += 1,
            None => errors.passed += 1,
        }
        if counterexample.is_none() && s.failed() {
            let mut inputs = s.inputs.clone().unwrap_or(Value::Null);
            if let (Some(e), Value::Object(map)) = (&s.error, &mut inputs) {
                map.insert("error".into(), Value::String(e.clone()));
            }
            counterexample = Some(json!({ "seed": opts.seed, "inputs": inputs }));
        }
    }
    properties.insert(0, errors);
    SuiteReport { suite: suite.name().into(), samples: samples.len(), seed: opts.seed, properties, measurements, counterexample }
}

/// Runs one suite; `Suite::All` is expanded by [`run_suites`].
pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<SuiteReport> {
    if let Some(d) = &opts.delta {
        if suite == Suite::Lemma25 && (d.dim() == 0 || d.dim() > 8) {
            return Err(Error::InvalidParameter(format!("delta must be 1..8 dimensional, got {}", d.dim())));
        }
    }
    let (n, seed) = (opts.samples, opts.seed);
    let fixed = opts.delta.as_ref();
    let samples = match suite {
        Suite::Siegel => par::map_indexed_with(opts.execution, n, |k| siegel_sample(k, seed)),
        Suite::Lemma25 => par::map_indexed_with(opts.execution, n, |k| lemma25_sample(k, seed, fixed)),
        Suite::AppendixB => par::map_indexed_with(opts.execution, n, |k| appendix_b_sample(k, seed)),
        Suite::Oracle => par::map_indexed_with(opts.execution, n, |k| oracle_sample(k, seed)),
        Suite::Blockdecomp => par::map_indexed_with(opts.execution, n, |k| blockdecomp_sample(k, seed)),
        Suite::All => return Err(Error::InvalidParameter("expand 'all' with run_suites".into())),
    };
    Ok(collect(suite, opts, samples))
}

pub fn run_suites(suite: Suite, opts: &VerifyOptions) -> Result<Vec<SuiteReport>> {
    match suite {
        Suite::All => Suite::ALL.iter().map(|s| run_suite(*s, opts)).collect(),
        s => Ok(vec![run_suite(s, opts)?]),
    }
}
