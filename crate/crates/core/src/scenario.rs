//! Scenario configuration: TOML files layered over named presets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{AssembledOperators, Physics};
use crate::flow::{sample_at_nodes, FlowField, DEFAULT_AMPLITUDE};
use crate::forward::total_mass;
use crate::mesh::{BoundarySpec, Mesh, Side};
use crate::ocp::{CostWeights, OcpProblem};
use crate::optimizer::OptimizeOptions;
use crate::series::TimeGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Testcase1,
    Testcase2,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "testcase1" => Ok(Preset::Testcase1),
            "testcase2" => Ok(Preset::Testcase2),
            _ => Err(Error::validation("preset", format!("unknown preset `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "final")]
    pub final_time: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    pub d_q: f64,
    pub d_s: f64,
    pub s_d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    /// Source segment at `s_d`, homogeneous Dirichlet elsewhere.
    Source,
    Homogeneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    pub kind: BoundaryKind,
    pub side: Side,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    DoubleGyre,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub kind: FlowKind,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    /// Dirichlet values on constrained nodes, zero in the interior.
    Lifted,
    /// `amplitude · exp(−|x − center|² / (2 width²))`, constrained nodes set
    /// to their Dirichlet values.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub q0: DensityKind,
    pub s0: FieldKind,
    pub center: [f64; 2],
    pub width: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Zero,
    Initial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub kind: TargetKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub snapshot_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Seeds a random initial control of amplitude `0.1`; zero control if unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub mesh: MeshConfig,
    pub time: TimeConfig,
    pub physics: PhysicsConfig,
    pub boundary: BoundaryConfig,
    pub flow: FlowConfig,
    pub initial: InitialConfig,
    pub target: TargetConfig,
    pub weights: CostWeights,
    pub optimizer: OptimizeOptions,
    pub output: OutputConfig,
}

impl Scenario {
    /// Desk-scale preset: (8, 8) mesh, 15 steps to `T = 1.5`.
    pub fn preset(preset: Preset) -> Self {
        let base = Scenario {
            name: String::new(),
            seed: None,
            mesh: MeshConfig { nx: 8, ny: 8 },
            time: TimeConfig {
                final_time: 1.5,
                steps: 15,
            },
            physics: PhysicsConfig {
                d_q: 0.01,
                d_s: 0.01,
                s_d: 10.0,
            },
            boundary: BoundaryConfig {
                kind: BoundaryKind::Source,
                side: Side::Left,
                start: 0.25,
                end: 0.75,
            },
            flow: FlowConfig {
                kind: FlowKind::DoubleGyre,
                amplitude: DEFAULT_AMPLITUDE,
            },
            initial: InitialConfig {
                q0: DensityKind::Uniform,
                s0: FieldKind::Lifted,
                center: [0.5, 0.75],
                width: 0.1,
                amplitude: 1.0,
            },
            target: TargetConfig {
                kind: TargetKind::Zero,
            },
            weights: CostWeights::default(),
            optimizer: OptimizeOptions {
                max_iters: 100,
                box_u: Some(1.0),
                ..OptimizeOptions::default()
            },
            output: OutputConfig {
                snapshot_times: vec![0.0, 0.5, 1.0, 1.5],
            },
        };
        match preset {
            Preset::Testcase1 => Scenario {
                name: "testcase1".into(),
                ..base
            },
            Preset::Testcase2 => Scenario {
                name: "testcase2".into(),
                boundary: BoundaryConfig {
                    kind: BoundaryKind::Homogeneous,
                    ..base.boundary
                },
                initial: InitialConfig {
                    s0: FieldKind::Gaussian,
                    ..base.initial
                },
                target: TargetConfig {
                    kind: TargetKind::Initial,
                },
                ..base
            },
        }
    }

    /// Parses `text` on top of a preset. The preset comes from `preset`, else
    /// from a top-level `preset` key, else defaults to `testcase1`.
    pub fn from_toml_str(text: &str, preset: Option<Preset>, origin: &Path) -> Result<Self> {
        let config_err = |message: String| Error::Config {
            path: origin.to_path_buf(),
            message,
        };
        let mut overrides: toml::Table = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        let named = match overrides.remove("preset") {
            Some(toml::Value::String(s)) => Some(s.parse::<Preset>()?),
            Some(_) => return Err(Error::validation("preset", "must be a string")),
            None => None,
        };
        let base = Self::preset(preset.or(named).unwrap_or(Preset::Testcase1));
        let mut table = toml::Table::try_from(&base).map_err(|e| config_err(e.to_string()))?;
        merge(&mut table, overrides);
        let scenario: Scenario = table.try_into().map_err(|e: toml::de::Error| config_err(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Resolved configuration as TOML, loadable by [`load_scenario`].
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidState(format!("cannot serialize scenario: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(key, format!("must be positive, got {v}")))
            }
        };
        if self.mesh.nx == 0 {
            return Err(Error::validation("mesh.nx", "must be >= 1"));
        }
        if self.mesh.ny == 0 {
            return Err(Error::validation("mesh.ny", "must be >= 1"));
        }
        positive("time.final", self.time.final_time)?;
        if self.time.steps == 0 {
            return Err(Error::validation("time.steps", "must be >= 1"));
        }
        positive("physics.d_q", self.physics.d_q)?;
        positive("physics.d_s", self.physics.d_s)?;
        if !self.physics.s_d.is_finite() {
            return Err(Error::validation("physics.s_d", "must be finite"));
        }
        if self.boundary.kind == BoundaryKind::Source {
            BoundarySpec::new(self.boundary.side, self.boundary.start, self.boundary.end)
                .map_err(|e| Error::validation("boundary.start", e.to_string()))?;
        }
        if !self.flow.amplitude.is_finite() {
            return Err(Error::validation("flow.amplitude", "must be finite"));
        }
        positive("initial.width", self.initial.width)?;
        if !self.initial.amplitude.is_finite() {
            return Err(Error::validation("initial.amplitude", "must be finite"));
        }
        self.weights.validate()?;
        self.optimizer.validate()?;
        if let Some(t) = self.output.snapshot_times.iter().find(|t| !(**t >= 0.0 && **t <= self.time.final_time)) {
            return Err(Error::validation(
                "output.snapshot_times",
                format!("time {t} outside [0, {}]", self.time.final_time),
            ));
        }
        Ok(())
    }

    /// Assembles the mesh, operators and initial/target data.
    pub fn build(&self) -> Result<Setup> {
        self.validate()?;
        let raw = Mesh::unit_square(self.mesh.nx, self.mesh.ny)?;
        let (mesh, warning) = match self.boundary.kind {
            BoundaryKind::Source => {
                let spec = BoundarySpec::new(self.boundary.side, self.boundary.start, self.boundary.end)?;
                let t = raw.tag_boundary(&spec);
                (t.mesh, t.warning)
            }
            BoundaryKind::Homogeneous => (raw.tag_homogeneous(), None),
        };
        let flow = match self.flow.kind {
            FlowKind::DoubleGyre => FlowField::DoubleGyre {
                amplitude: self.flow.amplitude,
            },
            FlowKind::Zero => FlowField::Zero,
        };
        let velocity = sample_at_nodes(&mesh, &flow)?;
        let physics = Physics {
            diffusion_q: self.physics.d_q,
            diffusion_s: self.physics.d_s,
            source_value: self.physics.s_d,
        };
        let ops = AssembledOperators::assemble(&mesh, &physics, &velocity)?;
        let grid = TimeGrid::new(self.time.final_time, self.time.steps)?;
        let n = mesh.n_nodes();

        let q0 = match self.initial.q0 {
            DensityKind::Uniform => {
                let m = total_mass(&vec![1.0; n], &ops.mass)?;
                vec![1.0 / m; n]
            }
        };
        let prescribed = ops.dirichlet.prescribed();
        let s0: Vec<f64> = match self.initial.s0 {
            FieldKind::Lifted => prescribed.to_vec(),
            FieldKind::Gaussian => {
                let [cx, cy] = self.initial.center;
                let w2 = 2.0 * self.initial.width * self.initial.width;
                mesh.nodes()
                    .iter()
                    .enumerate()
                    .map(|(i, p)| {
                        if ops.dirichlet.is_constrained(i) {
                            prescribed[i]
                        } else {
                            let r2 = (p[0] - cx).powi(2) + (p[1] - cy).powi(2);
                            self.initial.amplitude * (-r2 / w2).exp()
                        }
                    })
                    .collect()
            }
        };
        let target = match self.target.kind {
            TargetKind::Zero => vec![0.0; n],
            TargetKind::Initial => s0.clone(),
        };
        Ok(Setup {
            mesh,
            velocity,
            ops,
            grid,
            q0,
            s0,
            target,
            warning,
        })
    }
}

fn merge(base: &mut toml::Table, overrides: toml::Table) {
    for (key, value) in overrides {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

/// Reads a scenario file. See [`Scenario::from_toml_str`].
pub fn load_scenario(path: &Path, preset: Option<Preset>) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Scenario::from_toml_str(&text, preset, path)
}

/// Discretized scenario data.
#[derive(Debug, Clone)]
pub struct Setup {
    pub mesh: Mesh,
    pub velocity: Vec<[f64; 2]>,
    pub ops: AssembledOperators,
    pub grid: TimeGrid,
    pub q0: Vec<f64>,
    pub s0: Vec<f64>,
    pub target: Vec<f64>,
    /// Set when the source segment covers no boundary edge.
    pub warning: Option<String>,
}

impl Setup {
    pub fn problem(&self, weights: CostWeights) -> Result<OcpProblem<'_>> {
        OcpProblem::new(
            &self.ops,
            self.grid,
            self.q0.clone(),
            self.s0.clone(),
            self.target.clone(),
            weights,
        )
    }
}
