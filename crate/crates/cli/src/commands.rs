use serde::Serialize;
use serde_json::json;

use siegel_green::blockdecomp::{self, BlockOperator, ContourSpec, DemoReport};
use siegel_green::green::{backward_green, diagonal_green, dos_curve_with, forward_green, GreenKind};
use siegel_green::matcore::{RMat, RealSym};
use siegel_green::mc::{self, Experiment};
use siegel_green::model::band_report;
use siegel_green::par::Execution;
use siegel_green::sampling::stream_rng;
use siegel_green::siegel::SpectralParameter;
use siegel_green::verify::{self, Suite, VerifyOptions};

use crate::config::{Format, RunConfig};
use crate::output::{emit, float, json, Csv};
use crate::CliError;

/// Symmetry tolerance for matrices given on the command line.
const INPUT_SYM_TOL: f64 = 1e-12;

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

pub fn bands(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = cfg.operator_spec()?;
    let report = band_report(&spec);
    let text = match cfg.output.format {
        Format::Json => json(&report)?,
        Format::Csv => {
            let i_d = report.i_d.map_or("(empty)".to_string(), |i| i.to_string());
            let sigma: Vec<String> = report.sigma_free.iter().map(|i| i.to_string()).collect();
            let mut s = format!("I_D = {i_d}; sigma = {}\n", sigma.join(" U "));
            for b in &report.intervals_with_count {
                s.push_str(&format!("{}  m = {}\n", b.interval, b.count));
            }
            s
        }
    };
    emit(&cfg.output.path, &text)
}

#[derive(Serialize)]
struct GreenRow {
    n: i64,
    kind: &'static str,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
    depth_used: u64,
    residual: f64,
}

pub fn green(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = cfg.operator_spec()?;
    let q = cfg.potential(&spec)?;
    let engine = cfg.engine(spec.m())?;
    let g = &cfg.green;
    let lam = SpectralParameter::new(g.x, g.eps)?;
    lam.require_positive()?;
    let kind: GreenKind = g.kind.into();
    let m = spec.m();
    let results = siegel_green::par::try_map_indexed_with(Execution::Parallel, g.sites.len(), |k| {
        let n = g.sites[k];
        match kind {
            GreenKind::Forward => forward_green(&spec, &q, lam, n, &engine),
            GreenKind::Backward => backward_green(&spec, &q, lam, n, &engine),
            GreenKind::Diagonal => diagonal_green(&spec, &q, lam, n, &engine),
        }
    })?;
    let text = match cfg.output.format {
        Format::Csv => {
            let mut header = strings(&["n", "kind"]);
            for i in 0..m {
                for j in 0..m {
                    header.push(format!("re_{i}_{j}"));
                    header.push(format!("im_{i}_{j}"));
                }
            }
            let mut csv = Csv::new(&header)?;
            for r in &results {
                let mut row = vec![r.site.to_string(), r.kind.as_str().to_string()];
                for i in 0..m {
                    for j in 0..m {
                        row.push(float(r.value.re().get(i, j)));
                        row.push(float(r.value.im().get(i, j)));
                    }
                }
                csv.row(&row)?;
            }
            csv.finish()?
        }
        Format::Json => {
            let rows: Vec<GreenRow> = results
                .iter()
                .map(|r| GreenRow {
                    n: r.site,
                    kind: r.kind.as_str(),
                    re: r.value.re().to_rows(),
                    im: r.value.im().to_rows(),
                    depth_used: r.depth_used,
                    residual: r.residual,
                })
                .collect();
            json(&json!({ "config": cfg, "results": rows }))?
        }
    };
    emit(&cfg.output.path, &text)
}

pub fn dos(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = cfg.operator_spec()?;
    let q = cfg.potential(&spec)?;
    let engine = cfg.engine(spec.m())?;
    let xs = cfg.dos.x_grid.points();
    let rows = dos_curve_with(Execution::Parallel, &spec, &q, &xs, &cfg.dos.eps, cfg.dos.site, &engine)?;
    let text = match cfg.output.format {
        Format::Csv => {
            let mut csv = Csv::new(&strings(&["x", "eps", "dos"]))?;
            for r in &rows {
                csv.row(&[float(r.x), float(r.eps), float(r.dos)])?;
            }
            csv.finish()?
        }
        Format::Json => json(&json!({ "config": cfg, "results": rows }))?,
    };
    emit(&cfg.output.path, &text)
}

const MC_HEADER: [&str; 7] = ["x", "eps", "mean", "var", "max", "trials", "failures"];

pub fn mc(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = cfg.operator_spec()?;
    let model = cfg.disorder_model(spec.m())?;
    let exp = Experiment {
        cfg: cfg.engine(spec.m())?,
        model,
        j: cfg.j(),
        x_grid: cfg.experiment.x_grid.points(),
        eps_grid: cfg.experiment.eps_grid.clone(),
        trials: cfg.experiment.trials,
        master_seed: cfg.disorder.seed,
        window: cfg.window()?,
        site: cfg.experiment.site,
        spec,
    };
    exp.validate().map_err(|e| CliError::Config(format!("experiment: {e}")))?;
    if exp.trials == 0 {
        eprintln!("warning: experiment.trials = 0, nothing to sample");
        let text = match cfg.output.format {
            Format::Csv => Csv::new(&strings(&MC_HEADER))?.finish()?,
            Format::Json => json(&json!({ "config": cfg, "report": null }))?,
        };
        return emit(&cfg.output.path, &text);
    }
    let report = mc::run_with(Execution::Parallel, &exp)?;
    if report.flagged {
        eprintln!(
            "warning: {} of {} evaluations failed to converge; the run is flagged",
            report.failures.len(),
            exp.trials * report.points.len()
        );
    }
    let text = match cfg.output.format {
        Format::Csv => {
            let mut csv = Csv::new(&strings(&MC_HEADER))?;
            for p in &report.points {
                csv.row(&[
                    float(p.x),
                    float(p.eps),
                    float(p.mean),
                    float(p.variance),
                    float(p.max),
                    p.trials.to_string(),
                    p.failures.to_string(),
                ])?;
            }
            csv.finish()?
        }
        Format::Json => json(&json!({ "config": cfg, "report": report }))?,
    };
    emit(&cfg.output.path, &text)
}

pub fn verify(cfg: &RunConfig, suite: &str, samples: usize, seed: u64, delta: Option<&str>) -> Result<(), CliError> {
    let suite: Suite = suite.parse().map_err(|e: siegel_green::Error| CliError::Config(e.to_string()))?;
    let delta = match delta {
        None => None,
        Some(text) => {
            let rows: Vec<Vec<f64>> =
                serde_json::from_str(text).map_err(|e| CliError::Config(format!("--delta: expected JSON rows: {e}")))?;
            let n = rows.len();
            if n == 0 || rows.iter().any(|r| r.len() != n) {
                return Err(CliError::Config("--delta: expected a non-empty square matrix".into()));
            }
            let mat = RMat::from_fn(n, n, |i, j| rows[i][j]);
            Some(RealSym::try_from_matrix(mat, INPUT_SYM_TOL).map_err(|e| CliError::Config(format!("--delta: {e}")))?)
        }
    };
    let opts = VerifyOptions { samples, seed, delta, execution: Execution::Parallel };
    let reports = verify::run_suites(suite, &opts)?;
    let passed = reports.iter().all(|r| r.passed());
    let text = match cfg.output.format {
        Format::Json => json(&reports)?,
        Format::Csv => {
            let mut s = String::new();
            for r in &reports {
                s.push_str(&format!(
                    "[{}] samples={} seed={} {}\n",
                    r.suite,
                    r.samples,
                    r.seed,
                    if r.passed() { "PASS" } else { "FAIL" }
                ));
                for p in &r.properties {
                    s.push_str(&format!(
                        "  {:<36} passed={:<7} failed={:<5} worst_margin={:.3e}\n",
                        p.name, p.passed, p.failed, p.worst_margin
                    ));
                }
                for (name, v) in &r.measurements {
                    s.push_str(&format!("  {name} = {v:.6e}\n"));
                }
            }
            if let Some(c) = reports.iter().find_map(|r| r.counterexample.as_ref()) {
                s.push_str("counterexample:\n");
                s.push_str(&json(c)?);
            }
            s
        }
    };
    emit(&cfg.output.path, &text)?;
    if passed {
        Ok(())
    } else {
        Err(CliError::VerifyFailed)
    }
}

#[derive(Serialize)]
struct WorkedCase {
    h1: f64,
    h2: f64,
    v: f64,
    mu: f64,
    q1: f64,
    offdiag: f64,
}

/// `H₁ = [0]`, `H₂ = [3]`, `V = [0.3]`.
fn worked_case() -> Result<WorkedCase, CliError> {
    let b = BlockOperator::new(RealSym::from_diagonal(&[0.0]), RealSym::from_diagonal(&[3.0]), RMat::from_element(1, 1, 0.3))?;
    let p = blockdecomp::riesz_projection(&b.h_v(), &ContourSpec::enclosing(0.0, 0.0, 1.5))?;
    let g = blockdecomp::graph_operators(&b, &p.p)?;
    let bd = blockdecomp::block_diagonalize(&b, &g.q1, &g.q2)?;
    Ok(WorkedCase { h1: 0.0, h2: 3.0, v: 0.3, mu: bd.block1.get(0, 0), q1: g.q1[(0, 0)], offdiag: bd.offdiag_residual })
}

pub fn blockdemo(cfg: &RunConfig) -> Result<(), CliError> {
    let c = &cfg.blockdemo;
    if c.dim1 == 0 || c.dim2 == 0 {
        return Err(CliError::Config("blockdemo: dim1 and dim2 must be ≥ 1".into()));
    }
    if !(c.gap > 0.0 && c.gap.is_finite()) {
        return Err(CliError::Config(format!("blockdemo.gap must be > 0, got {}", c.gap)));
    }
    if !(0.0..=0.125).contains(&c.v_ratio) {
        return Err(CliError::Config(format!("blockdemo.v_ratio must lie in [0, 1/8], got {}", c.v_ratio)));
    }
    let instances: Vec<DemoReport> = siegel_green::par::try_map_indexed_with(Execution::Parallel, c.instances, |k| {
        let mut rng = stream_rng(c.seed, k as u64);
        let b = blockdecomp::random_block_operator(c.dim1, c.dim2, c.gap, c.v_ratio, &mut rng);
        blockdecomp::demo(&b)
    })?;
    let worked = worked_case()?;
    emit(&cfg.output.path, &json(&json!({ "instances": instances, "worked_2x2": worked }))?)
}
