//! Quasi-steady-state tracking of a fleet that drives past the critical
//! length and back.
//!
//! The fleet position is the distance of the fleet from the source with the
//! whole fleet at the far end of the energised section, i.e. the road-length
//! parameter of the nose curve. Each step continues from the previous
//! operating point along the solution curve, so branch membership persists:
//! once the fold is passed the state sits on the lower branch and stays
//! there when the fleet returns.

use crate::error::{Error, Result};
use crate::powerflow::{SolverConfig, VoltageSolution};
use crate::road::Scenario;

use super::continuation::{Arc, ArcPoint};
use super::family::LengthFamily;

/// Minimum bus voltage (pu) below which the road is declared collapsed.
pub const COLLAPSE_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct DrivePlan {
    /// Fleet position at each step, km from the source.
    pub positions_km: Vec<f64>,
}

impl DrivePlan {
    pub fn validate(&self) -> Result<()> {
        if self.positions_km.is_empty() {
            return Err(Error::InvalidInput("drive plan has no steps".into()));
        }
        if let Some(bad) = self
            .positions_km
            .iter()
            .find(|p| !(p.is_finite() && **p > 0.0))
        {
            return Err(Error::InvalidInput(format!(
                "plan position {bad} km is not positive"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackState {
    Upper,
    Lower,
    Collapsed,
}

impl TrackState {
    pub fn label(&self) -> &'static str {
        match self {
            TrackState::Upper => "upper",
            TrackState::Lower => "lower",
            TrackState::Collapsed => "collapsed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub position_km: f64,
    /// Zero once collapsed.
    pub min_voltage: f64,
    pub state: TrackState,
    /// Tracked operating point; `None` once collapsed.
    pub solution: Option<VoltageSolution>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseTrajectory {
    pub points: Vec<TrajectoryPoint>,
    /// First step at which the fleet was beyond the nose.
    pub crossed_at: Option<usize>,
    pub collapsed_at: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackOptions {
    pub threshold: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub tolerance: f64,
}

impl Default for TrackOptions {
    fn default() -> Self {
        Self {
            threshold: COLLAPSE_THRESHOLD,
            initial_step: 0.01,
            min_step: 1e-6,
            max_step: 0.02,
            tolerance: 1e-10,
        }
    }
}

/// Arclength step at which a detected fold is accepted.
const FOLD_RESOLUTION: f64 = 1e-4;

enum March {
    Reached(ArcPoint),
    Folded(ArcPoint),
    Collapsed,
}

fn lerp(a: &VoltageSolution, b: &VoltageSolution, w: f64) -> VoltageSolution {
    let mix = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p + w * (q - p)).collect();
    VoltageSolution {
        magnitude: mix(&a.magnitude, &b.magnitude),
        angle: mix(&a.angle, &b.angle),
        iterations: 0,
        residual_norm: f64::NAN,
    }
}

/// Follows the curve from `cur` (tangent already oriented towards the
/// target) until the length reaches `target_s`.
fn march(arc: &Arc<'_>, mut cur: ArcPoint, target_s: f64, opts: &TrackOptions) -> March {
    let dir = (target_s - cur.s).signum();
    let mut h = opts.initial_step;
    loop {
        let Some((next, iterations)) = arc.step(&cur, h) else {
            h *= 0.5;
            if h < opts.min_step {
                return March::Collapsed;
            }
            continue;
        };
        if next.ds() * dir <= 0.0 {
            // the target may still lie between `cur` and the fold
            if h > FOLD_RESOLUTION {
                h *= 0.5;
                continue;
            }
            return March::Folded(next);
        }
        if next.solution.min_voltage() < opts.threshold {
            return March::Collapsed;
        }
        if (target_s - next.s) * dir <= 0.0 {
            let w = (target_s - cur.s) / (next.s - cur.s);
            let guess = lerp(&cur.solution, &next.solution, w);
            let Ok(sol) = arc.land(arc.length(target_s), &guess) else {
                return March::Collapsed;
            };
            if sol.min_voltage() < opts.threshold {
                return March::Collapsed;
            }
            let Some(tangent) = arc.tangent(&sol, target_s, &next.tangent) else {
                return March::Collapsed;
            };
            return March::Reached(ArcPoint {
                solution: sol,
                s: target_s,
                tangent,
            });
        }
        cur = next;
        if iterations <= 3 {
            h = (h * 2.0).min(opts.max_step);
        }
    }
}

pub fn collapse_trajectory(scn: &Scenario, plan: &DrivePlan) -> Result<CollapseTrajectory> {
    collapse_trajectory_with(scn, plan, &TrackOptions::default())
}

pub fn collapse_trajectory_with(
    scn: &Scenario,
    plan: &DrivePlan,
    opts: &TrackOptions,
) -> Result<CollapseTrajectory> {
    plan.validate()?;
    let fam = LengthFamily::critical(scn)?;
    let l_ref = plan.positions_km[0];
    let arc = Arc {
        fam: &fam,
        l_ref,
        tolerance: opts.tolerance,
    };

    let mut points = Vec::with_capacity(plan.positions_km.len());
    let mut crossed_at = None;
    let mut collapsed_at = None;
    let mut label = TrackState::Upper;
    let mut state: Option<ArcPoint> = fam
        .solve(
            l_ref,
            &SolverConfig {
                tolerance: opts.tolerance,
                ..SolverConfig::default()
            },
        )
        .ok()
        .and_then(|sol| arc.start(sol, 1.0));

    for (k, &position_km) in plan.positions_km.iter().enumerate() {
        let step = k + 1;
        let target_s = position_km / l_ref;
        if let Some(cur) = state.take() {
            let dir = target_s - cur.s;
            let next = if dir == 0.0 || (label == TrackState::Lower && dir > 0.0) {
                // no nearby equilibrium further out on the lower branch: hold
                Some(cur)
            } else {
                let oriented = if cur.ds() * dir < 0.0 {
                    cur.reversed()
                } else {
                    cur
                };
                match march(&arc, oriented, target_s, opts) {
                    March::Reached(p) => Some(p),
                    March::Folded(p) => {
                        if label == TrackState::Upper {
                            label = TrackState::Lower;
                            crossed_at = Some(step);
                            Some(p)
                        } else {
                            None
                        }
                    }
                    March::Collapsed => None,
                }
            };
            state = next.filter(|p| p.solution.min_voltage() >= opts.threshold);
        }
        match &state {
            Some(p) => points.push(TrajectoryPoint {
                step,
                position_km,
                min_voltage: p.solution.min_voltage(),
                state: label,
                solution: Some(p.solution.clone()),
            }),
            None => {
                collapsed_at.get_or_insert(step);
                label = TrackState::Collapsed;
                points.push(TrajectoryPoint {
                    step,
                    position_km,
                    min_voltage: 0.0,
                    state: TrackState::Collapsed,
                    solution: None,
                });
            }
        }
    }
    Ok(CollapseTrajectory {
        points,
        crossed_at,
        collapsed_at,
    })
}
