//! Loadability limits of the road: longest feasible road for a fixed fleet
//! and largest fleet for a fixed road.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::powerflow::{SolverConfig, VoltageSolution};
use crate::road::{Fleet, Scenario};

use super::continuation::{trace_family, NoseCurve, TraceOptions};
use super::family::LengthFamily;

/// Bracket width the feasibility bisection refines to, km.
pub const LENGTH_BRACKET_KM: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct CriticalLength {
    /// Nose of the traced curve.
    pub length_km: f64,
    /// Longest length shown feasible and shortest certified infeasible.
    pub bracket: (f64, f64),
    pub curve: NoseCurve,
}

impl CriticalLength {
    pub fn bracket_width(&self) -> f64 {
        self.bracket.1 - self.bracket.0
    }
}

/// Largest start length not exceeding `preferred` that has a flat-start solution.
fn feasible_start(fam: &LengthFamily, preferred: f64) -> Result<f64> {
    let mut len = preferred;
    for _ in 0..40 {
        if fam.solve(len, &SolverConfig::default()).is_ok() {
            return Ok(len);
        }
        len *= 0.5;
    }
    Err(Error::NonConvergence {
        iterations: 0,
        residual: f64::NAN,
    })
}

/// Critical road length with every vehicle at its final position.
pub fn critical_length(scn: &Scenario) -> Result<CriticalLength> {
    let fam = LengthFamily::critical(scn)?;
    critical_length_of(&fam, scn.road.length_km)
}

pub fn critical_length_of(fam: &LengthFamily, preferred_start_km: f64) -> Result<CriticalLength> {
    let start = feasible_start(fam, preferred_start_km)?;
    let curve = trace_family(fam, &TraceOptions::starting_at(start))?;
    let nose = curve.nose.length_km;
    let nose_solution = curve
        .points
        .iter()
        .max_by(|a, b| a.length_km.total_cmp(&b.length_km))
        .map(|p| p.solution.clone())
        .expect("trace yields points");

    // longest feasible length: step back from the nose until something converges
    let mut lo = nose;
    let mut lo_solution: Option<VoltageSolution> = None;
    for k in 0..40 {
        let candidate = nose * (1.0 - 1e-9 * 4f64.powi(k));
        if let Some(sol) = fam.find_solution(candidate, Some(&nose_solution)) {
            lo = candidate;
            lo_solution = Some(sol);
            break;
        }
    }
    let mut lo_solution = lo_solution.ok_or(Error::TraceStall {
        length_km: nose,
        step: 0.0,
    })?;

    // shortest certified-infeasible length above it
    let mut hi = nose * (1.0 + 1e-4) + 1e-4;
    while fam.find_solution(hi, Some(&lo_solution)).is_some() {
        lo = hi;
        hi = lo + (hi - nose).max(LENGTH_BRACKET_KM) * 2.0;
    }
    while hi - lo > LENGTH_BRACKET_KM {
        let mid = 0.5 * (lo + hi);
        match fam.find_solution(mid, Some(&lo_solution)) {
            Some(sol) => {
                lo = mid;
                lo_solution = sol;
            }
            None => hi = mid,
        }
    }
    Ok(CriticalLength {
        length_km: nose,
        bracket: (lo, hi),
        curve,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleCount {
    pub road_length_km: f64,
    pub max_count: usize,
    /// `(count, feasible)` for every count from 1 to the cap.
    pub table: Vec<(usize, bool)>,
}

impl VehicleCount {
    /// Every count below a feasible one is feasible too.
    pub fn is_consistent(&self) -> bool {
        let first_bad = self.table.iter().position(|&(_, ok)| !ok);
        match first_bad {
            None => true,
            Some(k) => self.table[k..].iter().all(|&(_, ok)| !ok),
        }
    }
}

/// One forward fleet of `count` vehicles whose head sits on the last node.
pub fn fleet_at_road_end(scn: &Scenario, count: usize) -> Scenario {
    let spacing = scn.fleets.first().map_or(1, |f| f.spacing_nodes);
    Scenario {
        fleets: vec![Fleet {
            spacing_nodes: spacing,
            ..Fleet::forward(count, scn.road.num_nodes)
        }],
        time_steps: 1,
        variation: None,
        ..scn.clone()
    }
}

pub fn max_vehicle_count(scn: &Scenario, road_length_km: f64, cap: usize) -> Result<VehicleCount> {
    max_vehicle_count_with(scn, road_length_km, cap, Execution::default())
}

/// Evaluates every fleet size from 1 to `cap` at the heaviest position.
pub fn max_vehicle_count_with(
    scn: &Scenario,
    road_length_km: f64,
    cap: usize,
    exec: Execution,
) -> Result<VehicleCount> {
    let room = scn.road.num_nodes.saturating_sub(1);
    if cap == 0 || cap > room {
        return Err(Error::InvalidInput(format!(
            "cap must be between 1 and {room} (one vehicle per non-source node), got {cap}"
        )));
    }
    let base = scn.with_length(road_length_km);
    let families = (1..=cap)
        .map(|m| {
            let s = fleet_at_road_end(&base, m);
            s.validate()?;
            LengthFamily::at_step(&s, 1)
        })
        .collect::<Result<Vec<_>>>()?;
    let feasible = exec.map(cap, |k| {
        families[k].find_solution(road_length_km, None).is_some()
    });
    let table: Vec<(usize, bool)> = (1..=cap).zip(feasible).collect();
    if !table[0].1 {
        return Err(Error::InfeasibleAtOne {
            length_km: road_length_km,
        });
    }
    let max_count = table
        .iter()
        .take_while(|&&(_, ok)| ok)
        .last()
        .map(|&(m, _)| m)
        .unwrap_or(0);
    Ok(VehicleCount {
        road_length_km,
        max_count,
        table,
    })
}
