//! JSON scenario files.
//!
//! Every field is named in the README. Unknown fields are rejected, and
//! loading revalidates all parameter bounds, reporting each violation with
//! the path of the offending field.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use synergistic::backstepping::BacksteppingParams;
use synergistic::engine::{Priority, SimConfig};
use synergistic::navigation::{self, NavGains, NavigationWorld};
use synergistic::smoothing::SmoothedParams;
use synergistic::Error as CoreError;

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Hybrid,
    SmoothHybrid,
    NonHybrid,
    Backstepped,
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Hybrid => "hybrid",
            Self::SmoothHybrid => "smooth_hybrid",
            Self::NonHybrid => "non_hybrid",
            Self::Backstepped => "backstepped",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSection {
    pub p_o: [f64; 2],
    pub r_o: f64,
    pub epsilon: f64,
    pub p_d: [f64; 2],
    pub r_s: f64,
    pub varrho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingSection {
    pub gamma_s: f64,
    pub k_eta: f64,
    pub delta_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BacksteppingSection {
    pub gamma_b: f64,
    pub k_b: f64,
    pub delta_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    pub k_p: f64,
    pub k_theta: f64,
    pub gamma_theta: f64,
    pub theta_set: Vec<f64>,
    pub delta: f64,
    #[serde(default)]
    pub smoothing: Option<SmoothingSection>,
    #[serde(default)]
    pub backstepping: Option<BacksteppingSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub p0: [f64; 2],
    #[serde(default)]
    pub theta0: f64,
    /// Defaults to `σ(θ0)`, so the first applied input equals the nominal one.
    #[serde(default)]
    pub eta0: Option<[f64; 2]>,
    /// Defaults to `κ̄(p0, η0)`.
    #[serde(default)]
    pub u0: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorityName {
    #[default]
    Jump,
    Flow,
}

fn default_dt() -> f64 {
    1e-3
}
fn default_t_max() -> f64 {
    200.0
}
fn default_j_max() -> usize {
    10_000
}
fn default_event_tol() -> f64 {
    1e-10
}
fn default_true() -> bool {
    true
}
fn default_stride() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_j_max")]
    pub j_max: usize,
    #[serde(default = "default_event_tol")]
    pub event_tol: f64,
    #[serde(default)]
    pub priority: PriorityName,
    /// Push positions that overshoot into the ε-shell back onto it.
    #[serde(default = "default_true")]
    pub clamp: bool,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            t_max: default_t_max(),
            j_max: default_j_max(),
            event_tol: default_event_tol(),
            priority: PriorityName::default(),
            clamp: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Keep every `stride`-th flow sample in the CSV (segment ends are always kept).
    #[serde(default = "default_stride")]
    pub stride: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            stride: default_stride(),
        }
    }
}

/// A published value to compare against, with its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceValue {
    pub value: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    #[serde(default)]
    pub critical_point_x: Option<ReferenceValue>,
    #[serde(default)]
    pub delta_star: Option<ReferenceValue>,
    #[serde(default)]
    pub c_kappa: Option<ReferenceValue>,
}

/// Raw file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
    pub controller: ControllerKind,
    pub world: WorldSection,
    pub gains: GainsSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub reference: ReferenceSection,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub controller: ControllerKind,
    pub world: NavigationWorld<f64>,
    pub gains: NavGains<f64>,
    pub initial: InitialSection,
    pub sim: SimConfig<f64>,
    pub clamp: bool,
    pub seed: u64,
    pub stride: usize,
    pub reference: ReferenceSection,
}

/// One failed check, located by its field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn core_violation(prefix: &str, err: CoreError) -> Violation {
    let (field, message) = match &err {
        CoreError::GainValidation { param, reason } => (format!("{prefix}.{param}"), reason.clone()),
        CoreError::ParamBoundViolation { param, bound } => (format!("{prefix}.{param}"), bound.clone()),
        _ => (prefix.to_string(), err.to_string()),
    };
    Violation { field, message }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, HarnessError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let fallback = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    parse_config(&text, &fallback)
}

/// Parses and validates `text`; `fallback_name` is used when the file has no name.
pub fn parse_config(text: &str, fallback_name: &str) -> Result<ScenarioConfig, HarnessError> {
    let file: ScenarioFile =
        serde_json::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
    validate(file, fallback_name)
}

pub fn validate(file: ScenarioFile, fallback_name: &str) -> Result<ScenarioConfig, HarnessError> {
    let mut violations = Vec::new();
    let w = &file.world;
    let world = NavigationWorld {
        p_o: w.p_o,
        r_o: w.r_o,
        epsilon: w.epsilon,
        p_d: w.p_d,
        r_s: w.r_s,
        varrho: w.varrho,
    };
    let world_ok = match world.validate() {
        Ok(()) => true,
        Err(e) => {
            violations.push(core_violation("world", e));
            false
        }
    };

    let g = &file.gains;
    let gains = NavGains {
        k_p: g.k_p,
        k_theta: g.k_theta,
        gamma_theta: g.gamma_theta,
        theta_set: g.theta_set.clone(),
        delta: g.delta,
        smoothing: g.smoothing.map(|s| SmoothedParams {
            gamma_s: s.gamma_s,
            k_eta: s.k_eta,
            delta_s: s.delta_s,
        }),
        backstepping: g.backstepping.map(|b| BacksteppingParams {
            gamma_b: b.gamma_b,
            k_b: b.k_b,
            delta_b: b.delta_b,
        }),
    };
    if world_ok {
        let core = NavGains {
            smoothing: None,
            backstepping: None,
            ..gains.clone()
        };
        if let Err(e) = core.validate(&world) {
            violations.push(core_violation("gains", e));
        }
        let c_kappa = navigation::c_kappa_nav(&world, &gains);
        if let Some(s) = &gains.smoothing {
            if let Err(e) = s.validate(gains.delta, c_kappa) {
                violations.push(core_violation("gains.smoothing", e));
            }
        }
        if let Some(b) = &gains.backstepping {
            let gamma_s = gains.smoothing.map_or(f64::NAN, |s| s.gamma_s);
            if let Err(e) = b.validate(gains.delta, gamma_s, c_kappa) {
                violations.push(core_violation("gains.backstepping", e));
            }
        }
        if !world.in_free_space(file.initial.p0) {
            violations.push(Violation {
                field: "initial.p0".into(),
                message: format!(
                    "start is not in the free space (distance to obstacle {} < epsilon {})",
                    world.d_o(file.initial.p0),
                    world.epsilon
                ),
            });
        }
    }
    let needs_smoothing = matches!(file.controller, ControllerKind::SmoothHybrid | ControllerKind::Backstepped);
    if needs_smoothing && gains.smoothing.is_none() {
        violations.push(Violation {
            field: "gains.smoothing".into(),
            message: format!("required by controller {}", file.controller),
        });
    }
    if file.controller == ControllerKind::Backstepped && gains.backstepping.is_none() {
        violations.push(Violation {
            field: "gains.backstepping".into(),
            message: "required by controller backstepped".into(),
        });
    }
    let all_initial = [file.initial.p0[0], file.initial.p0[1], file.initial.theta0];
    if all_initial.iter().any(|v| !v.is_finite()) {
        violations.push(Violation {
            field: "initial".into(),
            message: "values must be finite".into(),
        });
    }

    let sim = SimConfig {
        dt: file.sim.dt,
        t_max: file.sim.t_max,
        j_max: file.sim.j_max,
        event_tol: file.sim.event_tol,
        priority: match file.sim.priority {
            PriorityName::Jump => Priority::JumpPriority,
            PriorityName::Flow => Priority::FlowPriority,
        },
    };
    if let Err(e) = sim.validate() {
        violations.push(core_violation("sim", e));
    }
    if file.output.stride == 0 {
        violations.push(Violation {
            field: "output.stride".into(),
            message: "must be >= 1".into(),
        });
    }

    if !violations.is_empty() {
        return Err(HarnessError::Validation(violations));
    }
    Ok(ScenarioConfig {
        name: file.name.unwrap_or_else(|| fallback_name.to_string()),
        controller: file.controller,
        world,
        gains,
        initial: file.initial,
        sim,
        clamp: file.sim.clamp,
        seed: file.seed,
        stride: file.output.stride,
        reference: file.reference,
    })
}
