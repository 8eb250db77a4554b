//! Experiment configuration files.
//!
//! One JSON object per experiment. Keys a mode cannot run without are checked
//! against the raw document first so the error names the missing key; the
//! rest is deserialized with defaults.

use std::path::{Path, PathBuf};

use hlp_core::figures::FigureConfig;
use hlp_core::group::{AlgebraVector, GroupElement, Momentum};
use hlp_core::hybrid::{Branch, BranchPolicy, ExecConfig};
use hlp_core::se2::terminal::{ConstantCost, PoseTarget};
use hlp_core::se2::PlantParams;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SimulatePlant,
    SimulateReduced,
    SimulateReconstructed,
    Solve,
    Fig2,
    Fig3,
}

impl Mode {
    pub const ALL: [&'static str; 6] = [
        "simulate-plant",
        "simulate-reduced",
        "simulate-reconstructed",
        "solve",
        "fig2",
        "fig3",
    ];

    pub fn name(self) -> &'static str {
        Self::ALL[self as usize]
    }

    fn required_keys(self) -> &'static [&'static str] {
        match self {
            Mode::SimulatePlant => &["tf", "initial.x", "initial.y", "initial.theta", "controls.u", "controls.omega"],
            Mode::SimulateReduced => &["tf", "initial.mu_x", "initial.mu_y", "initial.mu_theta", "initial.q"],
            Mode::SimulateReconstructed => &[
                "tf",
                "initial.x",
                "initial.y",
                "initial.theta",
                "initial.mu_theta",
                "initial.c",
                "initial.d",
            ],
            Mode::Solve => &["tf", "initial.x", "initial.y", "initial.theta", "terminal_cost.kind"],
            Mode::Fig2 | Mode::Fig3 => &[],
        }
    }
}

/// Branch policy as written in a config: `"plus"`, `"minus"`, `"all"`, or a
/// sequence such as `"+-+"`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PolicySpec {
    Plus,
    Minus,
    All,
    Sequence(Vec<Branch>),
}

impl TryFrom<String> for PolicySpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        match s.as_str() {
            "plus" => Ok(PolicySpec::Plus),
            "minus" => Ok(PolicySpec::Minus),
            "all" => Ok(PolicySpec::All),
            seq if !seq.is_empty() && seq.chars().all(|c| c == '+' || c == '-') => Ok(PolicySpec::Sequence(
                seq.chars()
                    .map(|c| if c == '+' { Branch::Plus } else { Branch::Minus })
                    .collect(),
            )),
            other => Err(format!(
                "branch_policy must be \"plus\", \"minus\", \"all\" or a +/- sequence, got {other:?}"
            )),
        }
    }
}

impl From<PolicySpec> for String {
    fn from(p: PolicySpec) -> String {
        match p {
            PolicySpec::Plus => "plus".into(),
            PolicySpec::Minus => "minus".into(),
            PolicySpec::All => "all".into(),
            PolicySpec::Sequence(s) => hlp_core::hybrid::branch_path_string(&s),
        }
    }
}

impl PolicySpec {
    /// The executor policy; `None` for the full branch tree.
    pub fn policy(&self) -> Option<BranchPolicy> {
        match self {
            PolicySpec::Plus => Some(BranchPolicy::AlwaysPlus),
            PolicySpec::Minus => Some(BranchPolicy::AlwaysMinus),
            PolicySpec::All => None,
            PolicySpec::Sequence(s) => Some(BranchPolicy::Sequence(s.clone())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpSpec {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsSpec {
    pub theta_star: f64,
    pub jump: JumpSpec,
    pub actuation: hlp_core::se2::Actuation,
}

impl Default for ParamsSpec {
    fn default() -> Self {
        let p = PlantParams::reference();
        Self {
            theta_star: p.theta_star,
            jump: JumpSpec {
                x: p.jump.x,
                y: p.jump.y,
                theta: p.jump.theta,
            },
            actuation: p.actuation,
        }
    }
}

impl ParamsSpec {
    pub fn build(&self) -> Result<PlantParams, CliError> {
        PlantParams::new(
            self.theta_star,
            GroupElement::new(self.jump.x, self.jump.y, self.jump.theta),
            self.actuation,
        )
        .map_err(|e| CliError::Validation(format!("params: {e}")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSpec {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub mu_x: f64,
    pub mu_y: f64,
    pub mu_theta: f64,
    pub q: f64,
    pub c: f64,
    pub d: f64,
}

impl InitialSpec {
    pub fn pose(&self) -> GroupElement {
        GroupElement::new(self.x, self.y, self.theta)
    }

    pub fn momentum(&self) -> Momentum {
        Momentum::new(self.mu_x, self.mu_y, self.mu_theta)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlsSpec {
    pub u: f64,
    pub v: f64,
    pub omega: f64,
}

impl ControlsSpec {
    pub fn algebra(&self) -> AlgebraVector {
        AlgebraVector::new(self.u, self.v, self.omega)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TerminalCostSpec {
    Constant {
        #[serde(default)]
        value: f64,
    },
    Pose {
        x: f64,
        y: f64,
        theta: f64,
        kappa: f64,
    },
}

impl TerminalCostSpec {
    pub fn build(&self) -> std::sync::Arc<dyn hlp_core::se2::TerminalCost + Send + Sync> {
        match *self {
            TerminalCostSpec::Constant { value } => std::sync::Arc::new(ConstantCost { value }),
            TerminalCostSpec::Pose { x, y, theta, kappa } => std::sync::Arc::new(PoseTarget { x, y, theta, kappa }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub tol: f64,
    pub max_iters: usize,
    pub relaxation: f64,
    /// Initial guess of `g(T)`; defaults to the initial pose.
    pub guess: Option<JumpSpec>,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let d = hlp_core::solver::SolveConfig::default();
        Self {
            tol: d.tol,
            max_iters: d.max_iters,
            relaxation: d.relaxation,
            guess: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FigureSpec {
    pub c: f64,
    pub d: f64,
    pub x0: f64,
    pub y0: f64,
    pub theta0: f64,
    pub mu_theta0: f64,
}

impl Default for FigureSpec {
    fn default() -> Self {
        let f = FigureConfig::default();
        Self {
            c: f.c,
            d: f.d,
            x0: f.x0,
            y0: f.y0,
            theta0: f.theta0,
            mu_theta0: f.mu_theta0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub t0: f64,
    #[serde(default)]
    pub tf: Option<f64>,
    #[serde(default)]
    pub params: ParamsSpec,
    #[serde(default)]
    pub exec: Option<ExecConfig>,
    #[serde(default)]
    pub branch_policy: Option<PolicySpec>,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub controls: ControlsSpec,
    #[serde(default)]
    pub terminal_cost: Option<TerminalCostSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub figure: FigureSpec,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn lookup<'a>(doc: &'a Value, dotted: &str) -> Option<&'a Value> {
    dotted.split('.').try_fold(doc, |v, k| v.get(k))
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{name} must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_value(doc: &Value) -> Result<Self, CliError> {
        if !doc.is_object() {
            return Err(CliError::Validation("config must be a JSON object".into()));
        }
        let mode_value = doc
            .get("mode")
            .ok_or_else(|| CliError::Validation("missing required key \"mode\"".into()))?;
        let mode: Mode = serde_json::from_value(mode_value.clone()).map_err(|_| {
            CliError::Validation(format!("unknown mode {mode_value}; expected one of {}", Mode::ALL.join(", ")))
        })?;
        for key in mode.required_keys() {
            if lookup(doc, key).is_none() {
                return Err(CliError::Validation(format!(
                    "missing required key \"{key}\" for mode {}",
                    mode.name()
                )));
            }
        }
        let cfg: ExperimentConfig =
            serde_json::from_value(doc.clone()).map_err(|e| CliError::Validation(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, Value), CliError> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let doc: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: not valid JSON: {e}", path.display())))?;
        Ok((Self::from_value(&doc)?, doc))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let exec = self.exec_config();
        positive("exec.step", exec.step)?;
        positive("exec.event_tol", exec.event_tol)?;
        if exec.max_events == 0 {
            return Err(CliError::Validation("exec.max_events must be positive".into()));
        }
        exec.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        self.params.build()?;
        if let Some(tf) = self.tf {
            if !(tf > self.t0) {
                return Err(CliError::Validation(format!("tf = {tf} must exceed t0 = {}", self.t0)));
            }
        }
        if self.mode == Mode::Solve {
            positive("solver.tol", self.solver.tol)?;
            if self.solver.max_iters == 0 {
                return Err(CliError::Validation("solver.max_iters must be positive".into()));
            }
            if !(self.solver.relaxation > 0.0 && self.solver.relaxation <= 1.0) {
                return Err(CliError::Validation("solver.relaxation must lie in (0, 1]".into()));
            }
            if let Some(TerminalCostSpec::Pose { kappa, .. }) = self.terminal_cost {
                if kappa < 0.0 {
                    return Err(CliError::Validation("terminal_cost.kappa must be non-negative".into()));
                }
            }
            if matches!(self.branch_policy, Some(PolicySpec::All)) {
                return Err(CliError::Validation("branch_policy \"all\" is not supported by solve".into()));
            }
        }
        if self.mode == Mode::SimulateReconstructed && self.initial.c < 0.0 {
            return Err(CliError::Validation("initial.c must be non-negative".into()));
        }
        Ok(())
    }

    /// Executor settings; figure modes default to step 1e-3.
    pub fn exec_config(&self) -> ExecConfig {
        self.exec.unwrap_or(match self.mode {
            Mode::Fig2 | Mode::Fig3 => FigureConfig::default().exec,
            _ => ExecConfig::default(),
        })
    }

    pub fn policy_spec(&self) -> PolicySpec {
        self.branch_policy.clone().unwrap_or(match self.mode {
            Mode::Fig2 | Mode::Fig3 => PolicySpec::All,
            _ => PolicySpec::Plus,
        })
    }

    pub fn figure_config(&self) -> FigureConfig {
        let f = self.figure;
        FigureConfig {
            c: f.c,
            d: f.d,
            x0: f.x0,
            y0: f.y0,
            theta0: f.theta0,
            mu_theta0: f.mu_theta0,
            t0: self.t0,
            tf: self.tf,
            exec: self.exec_config(),
        }
    }
}
