//! Run configuration: a TOML file with one table per section, optional
//! `--set key=value` overrides, and validation into library types.

use serde::{Deserialize, Serialize};

use siegel_green::green::{EngineConfig, GreenKind};
use siegel_green::matcore::RealSym;
use siegel_green::model::{strip_dirichlet, DisorderKind, DisorderModel, Interval, OperatorSpec, PotentialSample};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub operator: OperatorSection,
    pub disorder: DisorderSection,
    pub engine: EngineSection,
    pub experiment: ExperimentSection,
    pub green: GreenSection,
    pub dos: DosSection,
    pub blockdemo: BlockdemoSection,
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorSection {
    /// Number of channels. Must agree with `d` or `strip` when either is set.
    pub m: usize,
    /// Rows of an explicit symmetric `D`; empty means `D = 0`.
    pub d: Vec<Vec<f64>>,
    /// Dirichlet Laplacian on a `l^d` box instead of an explicit matrix.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strip: Option<StripSection>,
}

impl Default for OperatorSection {
    fn default() -> Self {
        OperatorSection { m: 1, d: Vec::new(), strip: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StripSection {
    pub l: usize,
    pub d: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindName {
    Rademacher,
    Uniform,
    TruncatedGaussian,
    DiagonalIid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisorderSection {
    pub kind: KindName,
    /// Amplitude: `‖q_n‖ ≤ c (1 + |n|)^(−alpha)`.
    pub c: f64,
    pub alpha: f64,
    pub seed: u64,
    /// Only read for `truncated_gaussian`.
    pub cutoff: f64,
    /// Sites carrying a potential; it vanishes outside.
    pub window: [i64; 2],
}

impl Default for DisorderSection {
    fn default() -> Self {
        DisorderSection { kind: KindName::Rademacher, c: 0.0, alpha: 1.0, seed: 0, cutoff: 3.0, window: [0, 200] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSection {
    pub tol: f64,
    pub max_depth: u64,
    pub depth_step: u64,
}

impl Default for EngineSection {
    fn default() -> Self {
        let e = EngineConfig::default();
        EngineSection { tol: e.tol, max_depth: e.max_depth, depth_step: e.depth_step }
    }
}

/// Either an explicit list or `count` evenly spaced points from `start` to `stop`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Range(RangeSpec),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        match self {
            GridSpec::List(v) => v.clone(),
            GridSpec::Range(r) => match r.count {
                0 => Vec::new(),
                1 => vec![r.start],
                n => (0..n)
                    .map(|k| {
                        // symmetric form keeps endpoints and midpoints exact
                        let t = k as f64 / (n - 1) as f64;
                        r.start * (1.0 - t) + r.stop * t
                    })
                    .collect(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub j: [f64; 2],
    pub x_grid: GridSpec,
    pub eps_grid: Vec<f64>,
    pub trials: usize,
    pub site: i64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            j: [-1.0, 1.0],
            x_grid: GridSpec::Range(RangeSpec { start: -1.0, stop: 1.0, count: 5 }),
            eps_grid: vec![1.0, 0.1, 0.01],
            trials: 100,
            site: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreenKindName {
    Forward,
    Backward,
    Diagonal,
}

impl From<GreenKindName> for GreenKind {
    fn from(k: GreenKindName) -> Self {
        match k {
            GreenKindName::Forward => GreenKind::Forward,
            GreenKindName::Backward => GreenKind::Backward,
            GreenKindName::Diagonal => GreenKind::Diagonal,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreenSection {
    pub kind: GreenKindName,
    pub sites: Vec<i64>,
    pub x: f64,
    pub eps: f64,
}

impl Default for GreenSection {
    fn default() -> Self {
        GreenSection { kind: GreenKindName::Diagonal, sites: vec![0], x: 0.0, eps: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DosSection {
    pub x_grid: GridSpec,
    pub eps: Vec<f64>,
    pub site: i64,
}

impl Default for DosSection {
    fn default() -> Self {
        DosSection { x_grid: GridSpec::Range(RangeSpec { start: -1.9, stop: 1.9, count: 39 }), eps: vec![1e-6], site: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlockdemoSection {
    pub dim1: usize,
    pub dim2: usize,
    pub gap: f64,
    /// `‖V‖ / gap`, at most 1/8.
    pub v_ratio: f64,
    pub seed: u64,
    pub instances: usize,
}

impl Default for BlockdemoSection {
    fn default() -> Self {
        BlockdemoSection { dim1: 4, dim2: 4, gap: 1.0, v_ratio: 0.1, seed: 0, instances: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub format: Format,
    /// Output file; empty writes to stdout.
    pub path: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { format: Format::Csv, path: String::new() }
    }
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parses `text` (the contents of `origin`) and applies `overrides` in order.
pub fn load(text: &str, origin: &str, overrides: &[String]) -> Result<RunConfig, CliError> {
    let parsed: RunConfig = toml::from_str(text).map_err(|e| config_error(format!("{origin}: {e}")))?;
    if overrides.is_empty() {
        return Ok(parsed);
    }
    let mut table: toml::Table = toml::from_str(text).map_err(|e| config_error(format!("{origin}: {e}")))?;
    for ov in overrides {
        apply_override(&mut table, ov)?;
    }
    // reparse the merged document so schema errors still carry a position
    let merged = toml::to_string(&table).map_err(|e| config_error(e.to_string()))?;
    toml::from_str(&merged).map_err(|e| config_error(format!("after --set overrides: {e}")))
}

pub fn apply_override(table: &mut toml::Table, ov: &str) -> Result<(), CliError> {
    let (key, raw) = ov.split_once('=').ok_or_else(|| config_error(format!("--set '{ov}': expected key=value")))?;
    let key = key.trim();
    let path: Vec<&str> = key.split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(config_error(format!("--set '{ov}': malformed key '{key}'")));
    }
    let raw = raw.trim();
    // a TOML literal if it parses as one, a bare string otherwise
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let (last, parents) = path.split_last().unwrap();
    let mut cur = table;
    for p in parents {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| config_error(format!("--set '{ov}': '{p}' is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

pub fn to_toml(cfg: &RunConfig) -> String {
    toml::to_string(cfg).expect("config serializes")
}

impl RunConfig {
    pub fn operator_spec(&self) -> Result<OperatorSpec, CliError> {
        let op = &self.operator;
        if op.strip.is_some() && !op.d.is_empty() {
            return Err(config_error("operator: set either d or strip, not both"));
        }
        let spec = if let Some(s) = op.strip {
            if s.l == 0 || s.d == 0 {
                return Err(config_error("operator.strip: l and d must be ≥ 1"));
            }
            strip_dirichlet(s.l, s.d).map_err(|e| config_error(format!("operator.strip: {e}")))?
        } else if !op.d.is_empty() {
            let d = RealSym::from_rows(&op.d).map_err(|e| config_error(format!("operator.d: {e}")))?;
            OperatorSpec::new(d).map_err(|e| config_error(format!("operator.d: {e}")))?
        } else {
            if op.m == 0 {
                return Err(config_error("operator.m must be ≥ 1"));
            }
            OperatorSpec::free(op.m).map_err(|e| config_error(format!("operator.m: {e}")))?
        };
        if spec.m() != op.m {
            return Err(config_error(format!(
                "operator.m = {} does not match the dimension {} of D; set operator.m = {}",
                op.m,
                spec.m(),
                spec.m()
            )));
        }
        Ok(spec)
    }

    pub fn disorder_model(&self, m: usize) -> Result<DisorderModel, CliError> {
        let d = &self.disorder;
        let kind = match d.kind {
            KindName::Rademacher => DisorderKind::Rademacher,
            KindName::Uniform => DisorderKind::Uniform,
            KindName::TruncatedGaussian => DisorderKind::TruncatedGaussian { cutoff: d.cutoff },
            KindName::DiagonalIid => DisorderKind::DiagonalIid,
        };
        DisorderModel::new(kind, m, d.c, d.alpha).map_err(|e| config_error(format!("disorder: {e}")))
    }

    pub fn window(&self) -> Result<(i64, i64), CliError> {
        let [a, b] = self.disorder.window;
        if b < a {
            return Err(config_error(format!("disorder.window = [{a}, {b}] is empty")));
        }
        Ok((a, b))
    }

    /// The single realization used by `green` and `dos`.
    pub fn potential(&self, spec: &OperatorSpec) -> Result<PotentialSample, CliError> {
        let model = self.disorder_model(spec.m())?;
        let (a, b) = self.window()?;
        Ok(model.sample_potential(self.disorder.seed, a, b)?)
    }

    pub fn engine(&self, m: usize) -> Result<EngineConfig, CliError> {
        let e = &self.engine;
        let cfg = EngineConfig { tol: e.tol, max_depth: e.max_depth, depth_step: e.depth_step, ..EngineConfig::default() };
        cfg.validate(m).map_err(|err| config_error(format!("engine: {err}")))?;
        Ok(cfg)
    }

    pub fn j(&self) -> Interval {
        Interval::new(self.experiment.j[0], self.experiment.j[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        assert_eq!(load("", "t", &[]).unwrap(), RunConfig::default());
    }

    #[test]
    fn print_parse_round_trip() {
        let text = "[operator]\nm = 2\n[operator.strip]\nl = 2\nd = 1\n[experiment]\nx_grid = [0.0, 0.5]\n";
        let a = load(text, "t", &[]).unwrap();
        let printed = to_toml(&a);
        let b = load(&printed, "t", &[]).unwrap();
        assert_eq!(a, b);
        assert_eq!(printed, to_toml(&b));
        let d = to_toml(&RunConfig::default());
        assert_eq!(load(&d, "t", &[]).unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let err = load("[engine]\ntol = 1e-8\nbogus = 3\n", "cfg.toml", &[]).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        assert!(err.contains("bogus"), "{err}");
        let err = load("", "t", &["engine.bogus=1".into()]).unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn overrides() {
        let cfg = load(
            "[experiment]\ntrials = 5\n",
            "t",
            &["experiment.trials=7".into(), "disorder.kind=uniform".into(), "experiment.eps_grid=[0.5, 0.25]".into()],
        )
        .unwrap();
        assert_eq!(cfg.experiment.trials, 7);
        assert_eq!(cfg.disorder.kind, KindName::Uniform);
        assert_eq!(cfg.experiment.eps_grid, vec![0.5, 0.25]);
        assert!(load("", "t", &["experiment.trials".into()]).is_err());
        assert!(load("", "t", &["experiment.trials=many".into()]).is_err());
    }

    #[test]
    fn grid_points() {
        let g = GridSpec::Range(RangeSpec { start: -1.9, stop: 1.9, count: 39 }).points();
        assert_eq!(g.len(), 39);
        assert_eq!(g[19], 0.0);
        assert_eq!((g[0], g[38]), (-1.9, 1.9));
    }

    #[test]
    fn operator_dimension_checks() {
        let mut cfg = RunConfig::default();
        cfg.operator.strip = Some(StripSection { l: 2, d: 1 });
        assert!(cfg.operator_spec().is_err());
        cfg.operator.m = 2;
        assert_eq!(cfg.operator_spec().unwrap().m(), 2);
        cfg.operator.d = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(cfg.operator_spec().is_err());
        cfg.operator.strip = None;
        assert!(cfg.operator_spec().is_ok());
        cfg.operator.d = vec![vec![0.0, 1.0], vec![0.5, 0.0]];
        assert!(cfg.operator_spec().is_err());
    }
}
