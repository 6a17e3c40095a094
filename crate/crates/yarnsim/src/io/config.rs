//! TOML configuration: fabric, scenario, simulation, training. Unknown keys
//! are rejected; parse errors carry the offending line.

use super::IoError;
use crate::estimation::{Optimizer, Scenario, ScenarioKind, TrainConfig};
use crate::fabric::{FabricSpec, WovenPattern, YarnMaterial};
use crate::integrator::WindParams;
use crate::math::V3;
use crate::params::{ModelConsts, ParamBounds, Params};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub fabric: FabricSection,
    pub scenario: ScenarioSection,
    pub sim: SimSection,
    #[serde(default)]
    pub shared: SharedSection,
    #[serde(default)]
    pub consts: ModelConsts,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FabricSection {
    pub rows: usize,
    pub cols: usize,
    pub pattern: WovenPattern,
    pub spacing: f64,
    /// material id per warp column; defaults to all 0
    pub warp: Option<Vec<usize>>,
    /// material id per weft row; defaults to all 1 (or 0 for one material)
    pub weft: Option<Vec<usize>>,
    pub materials: Vec<YarnMaterial>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: ScenarioName,
    #[serde(default)]
    pub pins: Option<Vec<[usize; 2]>>,
    #[serde(default)]
    pub wind: Option<[f64; 3]>,
    #[serde(default = "default_wind_density")]
    pub wind_density: f64,
    #[serde(default = "default_wind_drag")]
    pub wind_drag: f64,
    #[serde(default = "default_settle")]
    pub settle_steps: usize,
    #[serde(default)]
    pub table_height: f64,
    #[serde(default)]
    pub target: Option<[f64; 3]>,
    #[serde(default)]
    pub obstacle_friction: f64,
}

#[derive(Debug, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    HangingWind,
    ThrowToBox,
}

fn default_wind_density() -> f64 {
    2.0
}
fn default_wind_drag() -> f64 {
    0.5
}
fn default_settle() -> usize {
    300
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub h: f64,
    pub steps: usize,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SharedSection {
    pub shear: f64,
    pub mu: f64,
}

impl Default for SharedSection {
    fn default() -> Self {
        SharedSection { shear: 1000.0, mu: 0.5 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub frames: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub optimizer: OptimizerName,
    /// observation-noise σ applied to training frames (0 = exact data)
    pub noise_sigma: f64,
    pub bounds: ParamBounds,
}

#[derive(Debug, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerName {
    Newton,
    FirstOrder,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            frames: 25,
            epochs: 70,
            lr: 0.5,
            seed: 7,
            optimizer: OptimizerName::Newton,
            noise_sigma: 0.0,
            bounds: ParamBounds::default(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSection {
    pub epochs: usize,
    pub lr: f64,
}

impl Default for ControlSection {
    fn default() -> Self {
        ControlSection { epochs: 30, lr: 0.5 }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// write the final frame as a polyline OBJ next to the trajectory
    pub obj: Option<String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<ConfigFile, IoError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| IoError::File { path: path.display().to_string(), source })?;
        toml::from_str(&text).map_err(|e| IoError::Config(format!("{}: {e}", path.display())))
    }

    pub fn fabric_spec(&self) -> Result<FabricSpec, IoError> {
        let f = &self.fabric;
        let n_mats = f.materials.len();
        if n_mats == 0 {
            return Err(IoError::Config("fabric.materials must not be empty".into()));
        }
        let warp = f.warp.clone().unwrap_or_else(|| vec![0; f.cols]);
        let weft = f
            .weft
            .clone()
            .unwrap_or_else(|| vec![if n_mats > 1 { 1 } else { 0 }; f.rows]);
        let spec = FabricSpec {
            rows: f.rows,
            cols: f.cols,
            pattern: f.pattern,
            spacing: f.spacing,
            materials: f.materials.clone(),
            warp_materials: warp,
            weft_materials: weft,
        };
        spec.validate().map_err(|e| IoError::Config(e.to_string()))?;
        Ok(spec)
    }

    pub fn scenario(&self) -> Result<Scenario, IoError> {
        let spec = self.fabric_spec()?;
        let s = &self.scenario;
        let kind = match s.kind {
            ScenarioName::HangingWind => {
                let pins = s
                    .pins
                    .clone()
                    .unwrap_or_else(|| vec![[0, 0], [0, spec.cols - 1]])
                    .into_iter()
                    .map(|p| (p[0], p[1]))
                    .collect::<Vec<_>>();
                for &(i, j) in &pins {
                    if i >= spec.rows || j >= spec.cols {
                        return Err(IoError::Config(format!("pin ({i},{j}) outside the grid")));
                    }
                }
                let wind = s.wind.unwrap_or([0.0, 5.0, 0.0]);
                ScenarioKind::HangingWind {
                    pins,
                    wind: WindParams {
                        velocity: V3(wind),
                        density: s.wind_density,
                        drag: s.wind_drag,
                    },
                }
            }
            ScenarioName::ThrowToBox => {
                let target = s.target.ok_or_else(|| {
                    IoError::Config("scenario.target is required for throw_to_box".into())
                })?;
                ScenarioKind::ThrowToBox {
                    table_height: s.table_height,
                    target: V3(target),
                    obstacle_friction: s.obstacle_friction,
                }
            }
        };
        if !(self.sim.h > 0.0) {
            return Err(IoError::Config(format!("sim.h must be positive, got {}", self.sim.h)));
        }
        Ok(Scenario {
            spec,
            kind,
            h: self.sim.h,
            n_steps: self.sim.steps,
            settle_steps: if s.kind == ScenarioName::HangingWind { s.settle_steps } else { 0 },
        })
    }

    pub fn params(&self) -> Result<Params, IoError> {
        Ok(Params::from_spec(&self.fabric_spec()?, self.shared.shear, self.shared.mu))
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            frames_used: self.train.frames,
            epochs: self.train.epochs,
            lr: self.train.lr,
            bounds: self.train.bounds.clone(),
            seed: self.train.seed,
            optimizer: match self.train.optimizer {
                OptimizerName::Newton => Optimizer::Newton,
                OptimizerName::FirstOrder => Optimizer::FirstOrder,
            },
        }
    }
}
