//! Power flow as a function of road length with a fixed load pattern.
//!
//! Node count is fixed, so every segment impedance scales linearly with the
//! road length `L`. The series part of the admittance matrix therefore
//! scales as `1/L` while shunts stay put.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{build_admittance, AdmittanceMatrix};
use crate::powerflow::{
    computed_power, mismatch, mismatch_jacobian, solve_with_admittance, InjectionVector,
    SolverConfig, VoltageSolution,
};
use crate::road::{snapshot_injections, Scenario};

/// Random restarts used to certify that no operating point exists.
pub const PERTURBED_STARTS: usize = 8;
/// Magnitude range of the random restarts.
pub const PERTURBED_MAGNITUDES: (f64, f64) = (0.3, 1.1);
const PERTURBED_SEED: u64 = 0x00E1_EC7E_D0AD;

#[derive(Debug, Clone)]
pub struct LengthFamily {
    /// Series admittance at 1 km.
    series_per_km: DMatrix<Complex64>,
    shunt: Vec<f64>,
    slack_voltage: f64,
    injections: InjectionVector,
}

impl LengthFamily {
    /// Family for the scenario's loading at time step `t`.
    pub fn at_step(scn: &Scenario, t: usize) -> Result<Self> {
        let injections = snapshot_injections(scn, t, None)?;
        Self::new(scn, injections)
    }

    /// Family for the heaviest one-way loading: the final time step.
    pub fn critical(scn: &Scenario) -> Result<Self> {
        scn.validate()?;
        Self::at_step(scn, scn.time_steps)
    }

    pub fn new(scn: &Scenario, injections: InjectionVector) -> Result<Self> {
        let unit = scn.with_length(1.0).network()?;
        let shunt = unit.shunt_susceptances();
        let mut series = build_admittance(&unit)?.matrix().clone();
        for (i, b) in shunt.iter().enumerate() {
            series[(i, i)] -= Complex64::new(0.0, *b);
        }
        if injections.len() != unit.bus_count() {
            return Err(Error::InvalidInput(
                "injection vector does not match the road".into(),
            ));
        }
        Ok(Self {
            series_per_km: series,
            shunt,
            slack_voltage: unit.slack_voltage(),
            injections,
        })
    }

    pub fn bus_count(&self) -> usize {
        self.shunt.len()
    }

    pub fn slack_voltage(&self) -> f64 {
        self.slack_voltage
    }

    pub fn injections(&self) -> &InjectionVector {
        &self.injections
    }

    pub fn admittance(&self, length_km: f64) -> AdmittanceMatrix {
        let mut y = self.series_per_km.map(|v| v / length_km);
        for (i, b) in self.shunt.iter().enumerate() {
            y[(i, i)] += Complex64::new(0.0, *b);
        }
        AdmittanceMatrix::from_matrix(y)
    }

    pub fn mismatch(&self, v: &VoltageSolution, length_km: f64) -> Vec<f64> {
        mismatch(&self.admittance(length_km), &self.injections, v)
    }

    pub fn jacobian(&self, v: &VoltageSolution, length_km: f64) -> DMatrix<f64> {
        mismatch_jacobian(&self.admittance(length_km), v)
    }

    /// Derivative of the mismatch with respect to road length (km).
    pub fn d_length(&self, v: &VoltageSolution, length_km: f64) -> Vec<f64> {
        let n = self.bus_count();
        let s = computed_power(&self.admittance(length_km), &v.phasors());
        // series flows scale as 1/L; mismatch = spec - computed
        let series: Vec<Complex64> = (0..n)
            .map(|i| {
                let shunt = Complex64::new(0.0, -self.shunt[i] * v.magnitude[i].powi(2));
                (s[i] - shunt) / length_km
            })
            .collect();
        let mut d = Vec::with_capacity(2 * (n - 1));
        d.extend((1..n).map(|i| series[i].re));
        d.extend((1..n).map(|i| series[i].im));
        d
    }

    pub fn solve(&self, length_km: f64, cfg: &SolverConfig) -> Result<VoltageSolution> {
        if !(length_km > 0.0) {
            return Err(Error::InvalidInput(format!(
                "road length must be positive, got {length_km}"
            )));
        }
        solve_with_admittance(
            &self.admittance(length_km),
            self.slack_voltage,
            &self.injections,
            cfg,
        )
    }

    /// Searches for any operating point at `length_km`: the hint (if given),
    /// a flat start, then [`PERTURBED_STARTS`] random starts. `None` is an
    /// operational certificate of infeasibility, not a proof.
    pub fn find_solution(
        &self,
        length_km: f64,
        hint: Option<&VoltageSolution>,
    ) -> Option<VoltageSolution> {
        if let Some(h) = hint {
            if let Ok(sol) = self.solve(length_km, &SolverConfig::warm(h.clone())) {
                return Some(sol);
            }
        }
        if let Ok(sol) = self.solve(length_km, &SolverConfig::default()) {
            return Some(sol);
        }
        let n = self.bus_count();
        let mut rng = ChaCha8Rng::seed_from_u64(PERTURBED_SEED);
        let (lo, hi) = PERTURBED_MAGNITUDES;
        for _ in 0..PERTURBED_STARTS {
            let mut start = VoltageSolution::flat(n, self.slack_voltage);
            for i in 1..n {
                start.magnitude[i] = rng.random_range(lo..=hi);
                start.angle[i] = rng.random_range(-0.5..=0.5);
            }
            if let Ok(sol) = self.solve(length_km, &SolverConfig::warm(start)) {
                return Some(sol);
            }
        }
        None
    }
}
