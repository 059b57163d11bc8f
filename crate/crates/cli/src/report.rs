//! Machine-readable run summary written next to every command's outputs.

use serde::{Deserialize, Serialize};

use crate::scenario::ScenarioFile;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub solves: usize,
    pub max_iterations: usize,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub count: usize,
    pub feasible: bool,
}

/// Headline numbers; only the ones a command produces are written.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Headline {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_voltage_pu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_voltage_at: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i_max_pu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub swing_bus: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub swing_peak_to_peak_pu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_length_km: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nose_voltage_pu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub merge_gap_pu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_bracket_km: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub road_length_km: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feasibility: Option<Vec<CountRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collapsed: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crossed_at_step: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collapsed_at_step: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discriminant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_high: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_low: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_high_pu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_low_pu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<Convergence>,
    pub headline: Headline,
    /// File names relative to the output directory, including `report.json`.
    pub outputs: Vec<String>,
}

impl RunReport {
    pub fn new(command: &str, scenario: Option<ScenarioFile>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            scenario,
            convergence: None,
            headline: Headline::default(),
            outputs: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("report serializes");
        bytes.push(b'\n');
        bytes
    }
}
