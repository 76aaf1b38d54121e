use crate::error::{Error, Result};
use crate::hum::{HumOptions, MIN_REGULARIZATION};
use crate::model::{Coefficient, ControlRegion, Form, Kernel, KernelKind, SpatialGrid, TimeGrid};
use crate::nonlocal::{FixedPointOptions, TwoPhaseOptions};
use crate::pde::{Problem, Stepper};
use crate::verify::DEFAULT_SEED;
use crate::weights::{choose_parameters, ParamOverrides, ParameterReport, WeightSet};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientSpec {
    /// `a(x) = x^alpha`.
    Power { alpha: f64 },
    /// Two-column CSV `x,a` (header optional), relative to the scenario file.
    Table { path: PathBuf, alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(flatten)]
    pub kind: KernelKind,
    #[serde(default)]
    pub support: Option<(f64, f64)>,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self { kind: KernelKind::Zero, support: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Sine {
        #[serde(default = "one_u32")]
        mode: u32,
        #[serde(default = "one_f64")]
        amp: f64,
    },
    Indicator {
        lo: f64,
        hi: f64,
    },
    /// Nodal values, one per grid node.
    Values {
        values: Vec<f64>,
    },
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::Sine { mode: 1, amp: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    Uniform,
    /// Geometric clustering towards the degenerate end.
    Clustered { ratio: f64 },
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Uniform
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub stepper: Stepper,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub regularization: f64,
    pub max_regularization: f64,
    pub fp_tol: f64,
    pub max_fp: usize,
    pub ball_factor: f64,
    /// Length of the free phase as a fraction of the horizon, for `--two-phase`.
    pub switch_fraction: f64,
    /// Pass threshold on the final ratio.
    pub threshold: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let h = HumOptions::default();
        let fp = FixedPointOptions::default();
        Self {
            stepper: h.verify_stepper,
            cg_tol: h.cg_tol,
            cg_max_iter: h.cg_max_iter,
            regularization: MIN_REGULARIZATION,
            max_regularization: h.max_regularization,
            fp_tol: fp.fp_tol,
            max_fp: fp.max_fp,
            ball_factor: fp.ball_factor,
            switch_fraction: TwoPhaseOptions::default().switch_fraction,
            threshold: 1e-2,
        }
    }
}

impl SolverSpec {
    pub fn hum(&self) -> HumOptions {
        HumOptions {
            cg_tol: self.cg_tol,
            cg_max_iter: self.cg_max_iter,
            verify_stepper: self.stepper,
            regularization: self.regularization,
            max_regularization: self.max_regularization,
        }
    }

    pub fn fixed_point(&self) -> FixedPointOptions {
        FixedPointOptions { fp_tol: self.fp_tol, max_fp: self.max_fp, ball_factor: self.ball_factor, hum: self.hum() }
    }

    pub fn two_phase(&self) -> TwoPhaseOptions {
        TwoPhaseOptions { switch_fraction: self.switch_fraction, fixed_point: self.fixed_point() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySpec {
    /// Ensemble size; each check has its own default when absent.
    pub members: Option<usize>,
    pub sweep_points: usize,
    /// Grid doublings for the splitting identity; the scenario grid is the finest.
    pub refinements: usize,
    /// Inner interval of the Caccioppoli check; the middle of the observation set when absent.
    pub inner: Option<(f64, f64)>,
    /// Mode count of the Galerkin comparison.
    pub modes: usize,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self { members: None, sweep_points: 5, refinements: 2, inner: None, modes: 32 }
    }
}

fn one_u32() -> u32 {
    1
}

fn one_f64() -> f64 {
    1.0
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// Complete description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub form: Form,
    pub coefficient: CoefficientSpec,
    #[serde(default)]
    pub kernel: KernelSpec,
    pub omega: (f64, f64),
    #[serde(default)]
    pub omega_tilde: Option<(f64, f64)>,
    #[serde(rename = "T", alias = "horizon", default = "one_f64")]
    pub horizon: f64,
    pub n: usize,
    pub m: usize,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub weights: ParamOverrides,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub verify: VerifySpec,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Directory used to resolve relative paths; not part of the file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Parse failure with the position of the offending input.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

/// 1-based line of the first occurrence of `"key"` in `text`, if any.
pub fn locate_key(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

impl Scenario {
    pub fn parse(text: &str) -> std::result::Result<Self, ParseError> {
        serde_json::from_str(text).map_err(|e| ParseError { line: e.line(), column: e.column(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> std::result::Result<Self, ParseError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ParseError { line: 0, column: 0, message: format!("{}: {e}", path.display()) })?;
        let mut sc = Self::parse(&text)?;
        sc.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(sc)
    }

    pub fn alpha(&self) -> f64 {
        match &self.coefficient {
            CoefficientSpec::Power { alpha } | CoefficientSpec::Table { alpha, .. } => *alpha,
        }
    }

    pub fn coefficient(&self) -> Result<Coefficient> {
        match &self.coefficient {
            CoefficientSpec::Power { alpha } => Ok(Coefficient::power(self.form, *alpha)),
            CoefficientSpec::Table { path, alpha } => {
                let (x, a) = read_table(&self.base_dir.join(path))?;
                Coefficient::tabulated(self.form, x, a, *alpha)
            }
        }
    }

    pub fn spatial_grid(&self) -> Result<SpatialGrid> {
        match self.grid {
            GridSpec::Uniform => SpatialGrid::uniform(self.n),
            GridSpec::Clustered { ratio } => SpatialGrid::clustered(self.n, ratio),
        }
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, self.m)
    }

    pub fn region(&self) -> Result<ControlRegion> {
        let (lo, hi) = self.omega;
        match self.omega_tilde {
            Some((a, b)) => ControlRegion::new(lo, hi, a, b),
            None => ControlRegion::with_default_inner(lo, hi),
        }
    }

    pub fn kernel(&self) -> Kernel {
        let k = Kernel::new(self.kernel.kind.clone());
        match self.kernel.support {
            Some((lo, hi)) => k.restricted(lo, hi),
            None => k,
        }
    }

    pub fn problem(&self) -> Result<Problem> {
        Problem::new(self.coefficient()?, self.spatial_grid()?, self.time_grid()?, self.region()?, self.kernel())
    }

    pub fn weights(&self, pb: &Problem) -> Result<(WeightSet, ParameterReport)> {
        choose_parameters(&pb.coef, &pb.region, &pb.grid, &pb.time, &self.weights)
    }

    pub fn initial(&self, grid: &SpatialGrid) -> Result<Vec<f64>> {
        match &self.initial {
            InitialSpec::Sine { mode, amp } => Ok(grid.sample(|x| amp * (*mode as f64 * PI * x).sin())),
            InitialSpec::Indicator { lo, hi } => Ok(grid.sample(|x| if x > *lo && x < *hi { 1.0 } else { 0.0 })),
            InitialSpec::Values { values } => {
                if values.len() != grid.len() {
                    return Err(Error::ShapeMismatch(format!(
                        "initial datum has {} values, grid has {} nodes",
                        values.len(),
                        grid.len()
                    )));
                }
                Ok(values.clone())
            }
        }
    }
}

fn read_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path).map_err(|e| {
        Error::Config(format!("{}: {e}", path.display()))
    })?;
    let (mut x, mut a) = (Vec::new(), Vec::new());
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let parsed: Option<(f64, f64)> = match (rec.get(0), rec.get(1)) {
            (Some(u), Some(v)) => u.parse().ok().zip(v.parse().ok()),
            _ => None,
        };
        match parsed {
            Some((u, v)) => {
                x.push(u);
                a.push(v);
            }
            None if line == 0 => continue,
            None => return Err(Error::Config(format!("{}: line {}: expected two numbers", path.display(), line + 1))),
        }
    }
    Ok((x, a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let sc = Scenario::parse(r#"{"form": "divergence_weak", "coefficient": {"type": "power", "alpha": 0.5}, "omega": [0.3, 0.8], "n": 16, "m": 8}"#)
            .unwrap();
        assert_eq!(sc.alpha(), 0.5);
        assert_eq!(sc.time_grid().unwrap().horizon(), 1.0);
        assert!(sc.kernel().is_zero());
    }

    #[test]
    fn errors_carry_the_position() {
        let err = Scenario::parse("{\n\n  \"form\": 3\n}").unwrap_err();
        assert_eq!(err.line, 3);
        assert_eq!(locate_key("{\n \"a\": 1,\n \"b\": 2\n}", "b"), Some(3));
        assert_eq!(locate_key("{}", "b"), None);
    }
}
