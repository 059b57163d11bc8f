//! Time-stepped voltage profiles and the quantities read off them.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grid::Network;
use crate::powerflow::{self, SolverConfig, VoltageSolution};
use crate::road::{sample_variation, snapshot_injections, Scenario, VariationSpec};

/// One converged solution per time step; row `t - 1` is step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSeries {
    pub solutions: Vec<VoltageSolution>,
}

impl ProfileSeries {
    pub fn steps(&self) -> usize {
        self.solutions.len()
    }

    pub fn buses(&self) -> usize {
        self.solutions.first().map_or(0, |s| s.len())
    }

    /// Magnitude at step `t` and bus `bus`, both 1-based.
    pub fn voltage(&self, t: usize, bus: usize) -> f64 {
        self.solutions[t - 1].magnitude[bus - 1]
    }

    pub fn profile(&self, t: usize) -> &[f64] {
        &self.solutions[t - 1].magnitude
    }

    pub fn iterations(&self) -> Vec<usize> {
        self.solutions.iter().map(|s| s.iterations).collect()
    }

    pub fn max_residual(&self) -> f64 {
        self.solutions
            .iter()
            .map(|s| s.residual_norm)
            .fold(0.0, f64::max)
    }

    /// `(step, bus, voltage)` of the lowest magnitude; ties keep the earliest.
    pub fn minimum(&self) -> (usize, usize, f64) {
        let mut best = (0, 0, f64::INFINITY);
        for (t, s) in self.solutions.iter().enumerate() {
            for (i, &v) in s.magnitude.iter().enumerate() {
                if v < best.2 {
                    best = (t + 1, i + 1, v);
                }
            }
        }
        best
    }
}

fn solve_step(
    net: &Network,
    scn: &Scenario,
    t: usize,
    variation: Option<(&VariationSpec, usize)>,
) -> Result<VoltageSolution> {
    let draw = variation
        .map(|(spec, sample)| sample_variation(spec, &scn.ev, sample, t, scn.vehicle_count()));
    let inj = snapshot_injections(scn, t, draw.as_deref())?;
    powerflow::solve(net, &inj, &SolverConfig::default()).map_err(|e| Error::StepFailed {
        step: t,
        source: Box::new(e),
    })
}

fn run_steps(
    scn: &Scenario,
    variation: Option<(&VariationSpec, usize)>,
    exec: Execution,
) -> Result<ProfileSeries> {
    scn.validate()?;
    let net = scn.network()?;
    let solutions = exec
        .map(scn.time_steps, |k| solve_step(&net, scn, k + 1, variation))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(ProfileSeries { solutions })
}

/// Solves every step independently from a flat start.
pub fn simulate_profiles(scn: &Scenario) -> Result<ProfileSeries> {
    simulate_profiles_with(scn, Execution::default())
}

pub fn simulate_profiles_with(scn: &Scenario, exec: Execution) -> Result<ProfileSeries> {
    run_steps(scn, None, exec)
}

/// `V_1 - I_max |Z_i|` along the feeder.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundLine {
    pub values: Vec<f64>,
    pub i_max: f64,
    /// Cumulative series impedance magnitude from the source, per bus.
    pub impedance: Vec<f64>,
}

/// The slack-branch current of the heaviest step scaled by the cumulative
/// impedance to each bus.
pub fn lower_bound_line(scn: &Scenario, series: &ProfileSeries) -> Result<LowerBoundLine> {
    let net = scn.network()?;
    let v1 = net.slack_voltage();
    let i_max = series
        .solutions
        .iter()
        .map(|s| powerflow::slack_branch_current(&net, s))
        .fold(0.0, f64::max);
    let mut impedance = vec![0.0];
    let mut cumulative = num_complex::Complex64::new(0.0, 0.0);
    for br in net.branches() {
        cumulative += br.impedance();
        impedance.push(cumulative.norm());
    }
    let values = impedance.iter().map(|z| v1 - i_max * z).collect();
    Ok(LowerBoundLine {
        values,
        i_max,
        impedance,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwingSeries {
    pub bus: usize,
    pub values: Vec<f64>,
}

impl SwingSeries {
    pub fn peak_to_peak(&self) -> f64 {
        let max = self
            .values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let min = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }
}

pub fn swing_series(series: &ProfileSeries, bus: usize) -> Result<SwingSeries> {
    if bus == 0 || bus > series.buses() {
        return Err(Error::InvalidInput(format!(
            "bus {bus} outside 1..={}",
            series.buses()
        )));
    }
    Ok(SwingSeries {
        bus,
        values: series
            .solutions
            .iter()
            .map(|s| s.magnitude[bus - 1])
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub step: usize,
    pub min: Vec<f64>,
    pub mean: Vec<f64>,
    pub max: Vec<f64>,
}

impl Envelope {
    pub fn width(&self, bus: usize) -> f64 {
        self.max[bus - 1] - self.min[bus - 1]
    }
}

/// The first, middle and last step.
pub fn representative_steps(time_steps: usize) -> Vec<usize> {
    let mut steps = vec![1, time_steps.div_ceil(2), time_steps];
    steps.dedup();
    steps
}

/// Per-bus min/mean/max over `samples` independent variation draws, for each
/// requested step.
pub fn monte_carlo_envelope(
    scn: &Scenario,
    samples: usize,
    steps: &[usize],
) -> Result<Vec<Envelope>> {
    monte_carlo_envelope_with(scn, samples, steps, Execution::default())
}

pub fn monte_carlo_envelope_with(
    scn: &Scenario,
    samples: usize,
    steps: &[usize],
    exec: Execution,
) -> Result<Vec<Envelope>> {
    let spec = scn
        .variation
        .ok_or_else(|| Error::InvalidInput("scenario has no variation settings".into()))?;
    if samples == 0 {
        return Err(Error::InvalidInput("need at least one sample".into()));
    }
    scn.validate()?;
    if let Some(&bad) = steps.iter().find(|&&t| t == 0 || t > scn.time_steps) {
        return Err(Error::InvalidInput(format!(
            "step {bad} outside 1..={}",
            scn.time_steps
        )));
    }
    let net = scn.network()?;
    let n = scn.road.num_nodes;

    // (sample, step) pairs are independent solves
    let jobs = samples * steps.len();
    let solved = exec.map(jobs, |job| {
        let (sample, k) = (job / steps.len(), job % steps.len());
        solve_step(&net, scn, steps[k], Some((&spec, sample))).map_err(|e| match e {
            Error::StepFailed { step, source } => Error::SampleFailed {
                sample,
                seed: spec.seed,
                step,
                source,
            },
            other => other,
        })
    });

    let mut envelopes: Vec<Envelope> = steps
        .iter()
        .map(|&step| Envelope {
            step,
            min: vec![f64::INFINITY; n],
            mean: vec![0.0; n],
            max: vec![f64::NEG_INFINITY; n],
        })
        .collect();
    for (job, result) in solved.into_iter().enumerate() {
        let sol = result?;
        let env = &mut envelopes[job % steps.len()];
        for (i, &v) in sol.magnitude.iter().enumerate() {
            env.min[i] = env.min[i].min(v);
            env.max[i] = env.max[i].max(v);
            env.mean[i] += v;
        }
    }
    for env in &mut envelopes {
        for m in &mut env.mean {
            *m /= samples as f64;
        }
        // the running sum can drift past an extreme by an ulp
        for i in 0..n {
            env.mean[i] = env.mean[i].clamp(env.min[i], env.max[i]);
        }
    }
    Ok(envelopes)
}
