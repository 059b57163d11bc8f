//! JSON scenario files.
//!
//! Every section and key is optional and falls back to the base case: a
//! 2 km, 10-node road on a 6 kV / 1 MVA base with two 30 kW + 15 kVAr
//! vehicles entering at the source. Unknown keys are rejected.

use std::path::Path;

use electroad::grid::CapacitorBank;
use electroad::road::{
    Compensation, Direction, EvParams, Fleet, RoadSpec, Scenario, VariationSpec,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    pub road_length_km: f64,
    pub num_nodes: usize,
    pub r_ohm_per_km: f64,
    pub x_ohm_per_km: f64,
    pub v_base_kv: f64,
    pub s_base_mva: f64,
    pub slack_v_pu: f64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        let road = RoadSpec::default();
        Self {
            road_length_km: road.length_km,
            num_nodes: road.num_nodes,
            r_ohm_per_km: road.r_ohm_per_km,
            x_ohm_per_km: road.x_ohm_per_km,
            v_base_kv: road.v_base_kv,
            s_base_mva: road.s_base_mva,
            slack_v_pu: road.slack_voltage_pu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvSection {
    pub p_kw: f64,
    pub q_kvar: f64,
}

impl Default for EvSection {
    fn default() -> Self {
        let ev = EvParams::default();
        Self {
            p_kw: ev.p_kw,
            q_kvar: ev.q_kvar,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionName {
    Forward,
    Reverse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetEntry {
    pub size: usize,
    pub direction: DirectionName,
    pub head_start_node: usize,
    #[serde(default = "one")]
    pub spacing_nodes: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankEntry {
    pub bus: usize,
    pub kvar: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompensationSection {
    pub pv_kw: f64,
    pub onboard_capacitor_kvar: f64,
    pub capacitor_banks: Vec<BankEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VariationSection {
    pub fraction: f64,
    pub seed: u64,
    pub samples: usize,
}

impl Default for VariationSection {
    fn default() -> Self {
        let v = VariationSpec::default();
        Self {
            fraction: v.fraction,
            seed: v.seed,
            samples: v.samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub time_steps: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            time_steps: Scenario::default().time_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioFile {
    pub network: NetworkSection,
    pub ev: EvSection,
    pub fleets: Vec<FleetEntry>,
    pub compensation: CompensationSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variation: Option<VariationSection>,
    pub simulation: SimulationSection,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        Self::from_scenario(&Scenario::default())
    }
}

impl ScenarioFile {
    pub fn from_scenario(scn: &Scenario) -> Self {
        Self {
            network: NetworkSection {
                road_length_km: scn.road.length_km,
                num_nodes: scn.road.num_nodes,
                r_ohm_per_km: scn.road.r_ohm_per_km,
                x_ohm_per_km: scn.road.x_ohm_per_km,
                v_base_kv: scn.road.v_base_kv,
                s_base_mva: scn.road.s_base_mva,
                slack_v_pu: scn.road.slack_voltage_pu,
            },
            ev: EvSection {
                p_kw: scn.ev.p_kw,
                q_kvar: scn.ev.q_kvar,
            },
            fleets: scn
                .fleets
                .iter()
                .map(|f| FleetEntry {
                    size: f.size,
                    direction: match f.direction {
                        Direction::Forward => DirectionName::Forward,
                        Direction::Reverse => DirectionName::Reverse,
                    },
                    head_start_node: f.head_start_node,
                    spacing_nodes: f.spacing_nodes,
                })
                .collect(),
            compensation: CompensationSection {
                pv_kw: scn.compensation.pv_kw,
                onboard_capacitor_kvar: scn.compensation.onboard_capacitor_kvar,
                capacitor_banks: scn
                    .compensation
                    .capacitor_banks
                    .iter()
                    .map(|b| BankEntry {
                        bus: b.bus,
                        kvar: b.kvar,
                    })
                    .collect(),
            },
            variation: scn.variation.map(|v| VariationSection {
                fraction: v.fraction,
                seed: v.seed,
                samples: v.samples,
            }),
            simulation: SimulationSection {
                time_steps: scn.time_steps,
            },
        }
    }

    fn check_counts(&self) -> Result<(), CliError> {
        let schema = |path: &str, message: String| CliError::Schema {
            path: path.to_string(),
            message,
        };
        if self.network.num_nodes < 2 {
            return Err(schema(
                "network.num_nodes",
                format!("must be at least 2, got {}", self.network.num_nodes),
            ));
        }
        if self.simulation.time_steps == 0 {
            return Err(schema("simulation.time_steps", "must be at least 1".into()));
        }
        for (i, f) in self.fleets.iter().enumerate() {
            if f.size == 0 {
                return Err(schema(
                    &format!("fleets[{i}].size"),
                    "must be at least 1".into(),
                ));
            }
            if f.head_start_node == 0 {
                return Err(schema(
                    &format!("fleets[{i}].head_start_node"),
                    "nodes are numbered from 1".into(),
                ));
            }
            if f.spacing_nodes == 0 {
                return Err(schema(
                    &format!("fleets[{i}].spacing_nodes"),
                    "must be at least 1".into(),
                ));
            }
        }
        if let Some(v) = &self.variation {
            if v.samples == 0 {
                return Err(schema("variation.samples", "must be at least 1".into()));
            }
        }
        Ok(())
    }

    fn check_units(&self) -> Result<(), CliError> {
        let unit = |key: &str, message: String| CliError::Unit {
            key: key.to_string(),
            message,
        };
        let positive = [
            ("network.road_length_km", self.network.road_length_km),
            ("network.v_base_kv", self.network.v_base_kv),
            ("network.s_base_mva", self.network.s_base_mva),
            ("network.slack_v_pu", self.network.slack_v_pu),
        ];
        for (key, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(unit(key, format!("must be positive, got {value}")));
            }
        }
        let non_negative = [
            ("network.r_ohm_per_km", self.network.r_ohm_per_km),
            ("network.x_ohm_per_km", self.network.x_ohm_per_km),
            ("ev.p_kw", self.ev.p_kw),
            ("compensation.pv_kw", self.compensation.pv_kw),
            (
                "compensation.onboard_capacitor_kvar",
                self.compensation.onboard_capacitor_kvar,
            ),
        ];
        for (key, value) in non_negative {
            if !(value.is_finite() && value >= 0.0) {
                return Err(unit(key, format!("must be non-negative, got {value}")));
            }
        }
        if !self.ev.q_kvar.is_finite() {
            return Err(unit(
                "ev.q_kvar",
                format!("must be finite, got {}", self.ev.q_kvar),
            ));
        }
        if self.network.r_ohm_per_km == 0.0 && self.network.x_ohm_per_km == 0.0 {
            return Err(unit(
                "network.r_ohm_per_km",
                "cable impedance cannot be zero".into(),
            ));
        }
        for (i, b) in self.compensation.capacitor_banks.iter().enumerate() {
            if !b.kvar.is_finite() {
                return Err(unit(
                    &format!("compensation.capacitor_banks[{i}].kvar"),
                    format!("must be finite, got {}", b.kvar),
                ));
            }
        }
        if let Some(v) = &self.variation {
            if !(0.0..=1.0).contains(&v.fraction) {
                return Err(unit(
                    "variation.fraction",
                    format!("must lie in [0, 1], got {}", v.fraction),
                ));
            }
        }
        Ok(())
    }

    /// Checks the file and converts it into a validated scenario.
    pub fn to_scenario(&self) -> Result<Scenario, CliError> {
        self.check_counts()?;
        self.check_units()?;
        let scn = Scenario {
            road: RoadSpec {
                length_km: self.network.road_length_km,
                num_nodes: self.network.num_nodes,
                r_ohm_per_km: self.network.r_ohm_per_km,
                x_ohm_per_km: self.network.x_ohm_per_km,
                v_base_kv: self.network.v_base_kv,
                s_base_mva: self.network.s_base_mva,
                slack_voltage_pu: self.network.slack_v_pu,
            },
            ev: EvParams {
                p_kw: self.ev.p_kw,
                q_kvar: self.ev.q_kvar,
            },
            fleets: self
                .fleets
                .iter()
                .map(|f| Fleet {
                    size: f.size,
                    direction: match f.direction {
                        DirectionName::Forward => Direction::Forward,
                        DirectionName::Reverse => Direction::Reverse,
                    },
                    head_start_node: f.head_start_node,
                    spacing_nodes: f.spacing_nodes,
                })
                .collect(),
            compensation: Compensation {
                pv_kw: self.compensation.pv_kw,
                onboard_capacitor_kvar: self.compensation.onboard_capacitor_kvar,
                capacitor_banks: self
                    .compensation
                    .capacitor_banks
                    .iter()
                    .map(|b| CapacitorBank {
                        bus: b.bus,
                        kvar: b.kvar,
                    })
                    .collect(),
            },
            variation: self.variation.as_ref().map(|v| VariationSpec {
                fraction: v.fraction,
                seed: v.seed,
                samples: v.samples,
            }),
            time_steps: self.simulation.time_steps,
        };
        scn.validate().map_err(CliError::Scenario)?;
        Ok(scn)
    }
}

/// Parses scenario JSON text; errors carry the offending key path.
pub fn parse_scenario_str(text: &str) -> Result<Scenario, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ScenarioFile =
        serde_path_to_error::deserialize(de).map_err(|e| CliError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    file.to_scenario()
}

pub fn parse_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario_str(&text)
}
