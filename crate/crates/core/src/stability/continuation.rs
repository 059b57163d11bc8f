//! Pseudo-arclength continuation of power flow solutions in road length.
//!
//! The curve lives in `(θ_pq, V_pq, s)` with `s = L / L_ref`. Each step
//! predicts along the unit tangent and corrects with Newton on the
//! bordered system `[F(x, s); t·(z - z_pred)] = 0`, which stays regular
//! through the fold where the plain power flow Jacobian is singular.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::powerflow::{inf_norm, solve_linear, SolverConfig, VoltageSolution, DIVERGENCE_BOUNDS};
use crate::road::Scenario;

use super::family::LengthFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionBranch {
    Upper,
    Lower,
}

impl SolutionBranch {
    pub fn label(&self) -> &'static str {
        match self {
            SolutionBranch::Upper => "upper",
            SolutionBranch::Lower => "lower",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceOptions {
    /// Starting road length; must admit a solution.
    pub start_km: f64,
    /// Give up if the upper branch passes this length without folding.
    pub max_km: f64,
    /// Arclength steps in units of the start length.
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// Mismatch tolerance of the corrector.
    pub tolerance: f64,
    /// Fold refinement stops once the two points straddling the nose differ
    /// by less than this in end-bus voltage.
    pub merge_tolerance: f64,
    /// The lower branch is followed until the end voltage drops below this.
    pub voltage_floor: f64,
    pub max_points: usize,
}

impl TraceOptions {
    pub fn starting_at(start_km: f64) -> Self {
        Self {
            start_km,
            max_km: start_km * 1e3,
            initial_step: 0.01,
            min_step: 1e-4,
            max_step: 0.05,
            tolerance: 1e-10,
            merge_tolerance: 1e-7,
            voltage_floor: 0.05,
            max_points: 20_000,
        }
    }
}

/// A point on the solution curve with its unit tangent.
#[derive(Debug, Clone)]
pub(crate) struct ArcPoint {
    pub solution: VoltageSolution,
    pub s: f64,
    pub tangent: Vec<f64>,
}

impl ArcPoint {
    /// Sign of the length component of the tangent.
    pub fn ds(&self) -> f64 {
        *self.tangent.last().expect("tangent is non-empty")
    }

    fn z(&self) -> Vec<f64> {
        let mut z = self.solution.state();
        z.push(self.s);
        z
    }

    pub fn reversed(&self) -> Self {
        Self {
            tangent: self.tangent.iter().map(|t| -t).collect(),
            ..self.clone()
        }
    }
}

pub(crate) struct Arc<'a> {
    pub fam: &'a LengthFamily,
    pub l_ref: f64,
    pub tolerance: f64,
}

const MAX_CORRECTOR_ITERATIONS: usize = 12;

impl Arc<'_> {
    pub fn length(&self, s: f64) -> f64 {
        s * self.l_ref
    }

    fn bordered(&self, v: &VoltageSolution, s: f64, row: &[f64]) -> DMatrix<f64> {
        let len = self.length(s);
        let jac = self.fam.jacobian(v, len);
        let d = self.fam.d_length(v, len);
        let m = jac.nrows();
        let mut full = DMatrix::zeros(m + 1, m + 1);
        full.view_mut((0, 0), (m, m)).copy_from(&jac);
        for i in 0..m {
            full[(i, m)] = d[i] * self.l_ref;
        }
        for (k, &r) in row.iter().enumerate() {
            full[(m, k)] = r;
        }
        full
    }

    /// Unit tangent oriented so that its projection on `prev` is positive.
    pub fn tangent(&self, v: &VoltageSolution, s: f64, prev: &[f64]) -> Option<Vec<f64>> {
        let m = prev.len();
        let mut rhs = vec![0.0; m];
        rhs[m - 1] = 1.0;
        let t = solve_linear(self.bordered(v, s, prev), &rhs)?;
        let norm = t.iter().map(|x| x * x).sum::<f64>().sqrt();
        Some(t.into_iter().map(|x| x / norm).collect())
    }

    /// Starting point with the tangent pointing towards increasing length.
    pub fn start(&self, solution: VoltageSolution, s: f64) -> Option<ArcPoint> {
        let dim = 2 * (solution.len() - 1) + 1;
        let mut e = vec![0.0; dim];
        e[dim - 1] = 1.0;
        let tangent = self.tangent(&solution, s, &e)?;
        Some(ArcPoint {
            solution,
            s,
            tangent,
        })
    }

    /// One predictor-corrector step of arclength `h`; returns the new point
    /// and the corrector iteration count.
    pub fn step(&self, from: &ArcPoint, h: f64) -> Option<(ArcPoint, usize)> {
        let slack = self.fam.slack_voltage();
        let z0 = from.z();
        let t = &from.tangent;
        let pred: Vec<f64> = z0.iter().zip(t).map(|(z, t)| z + h * t).collect();
        let mut z = pred.clone();
        let dim = z.len();
        let (lo, hi) = DIVERGENCE_BOUNDS;
        let half = (dim - 1) / 2;

        for it in 0..=MAX_CORRECTOR_ITERATIONS {
            let s = z[dim - 1];
            if !(s > 0.0) || z[half..dim - 1].iter().any(|&m| !(m > lo && m < hi)) {
                return None;
            }
            let v = VoltageSolution::from_state(&z[..dim - 1], slack);
            let f = self.fam.mismatch(&v, self.length(s));
            let g: f64 = t
                .iter()
                .zip(z.iter().zip(&pred))
                .map(|(t, (z, p))| t * (z - p))
                .sum();
            let norm = inf_norm(&f);
            if it > 0 && norm <= self.tolerance && g.abs() <= 1e-12 {
                let dist = z
                    .iter()
                    .zip(&pred)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if dist > h.abs() {
                    return None;
                }
                let mut solution = v;
                solution.residual_norm = norm;
                solution.iterations = it;
                let tangent = self.tangent(&solution, s, t)?;
                let turn: f64 = tangent.iter().zip(t).map(|(a, b)| a * b).sum();
                if turn < 0.5 {
                    return None;
                }
                return Some((
                    ArcPoint {
                        solution,
                        s,
                        tangent,
                    },
                    it,
                ));
            }
            if it == MAX_CORRECTOR_ITERATIONS {
                return None;
            }
            let mut rhs: Vec<f64> = f.iter().map(|x| -x).collect();
            rhs.push(-g);
            let dz = solve_linear(self.bordered(&v, s, t), &rhs)?;
            for (zi, d) in z.iter_mut().zip(&dz) {
                *zi += d;
            }
        }
        None
    }

    /// Natural-parameter solve at a fixed length, warm-started from `guess`.
    pub fn land(&self, length_km: f64, guess: &VoltageSolution) -> Result<VoltageSolution> {
        let cfg = SolverConfig {
            tolerance: self.tolerance.max(1e-12),
            ..SolverConfig::warm(guess.clone())
        };
        self.fam.solve(length_km, &cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub length_km: f64,
    pub end_voltage: f64,
    pub branch: SolutionBranch,
    pub solution: VoltageSolution,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NosePoint {
    pub length_km: f64,
    pub voltage: f64,
    /// End-voltage difference between the last upper and first lower point.
    pub merge_gap: f64,
}

/// Voltage versus road length through the fold, upper branch first.
#[derive(Debug, Clone)]
pub struct NoseCurve {
    pub points: Vec<CurvePoint>,
    pub nose: NosePoint,
    family: LengthFamily,
}

impl NoseCurve {
    pub fn upper(&self) -> impl Iterator<Item = &CurvePoint> {
        self.points
            .iter()
            .filter(|p| p.branch == SolutionBranch::Upper)
    }

    pub fn lower(&self) -> impl Iterator<Item = &CurvePoint> {
        self.points
            .iter()
            .filter(|p| p.branch == SolutionBranch::Lower)
    }

    pub fn family(&self) -> &LengthFamily {
        &self.family
    }

    fn nearest<'a>(
        mut points: impl Iterator<Item = &'a CurvePoint>,
        length_km: f64,
    ) -> Option<&'a CurvePoint> {
        let first = points.next()?;
        Some(points.fold(first, |best, p| {
            if (p.length_km - length_km).abs() < (best.length_km - length_km).abs() {
                p
            } else {
                best
            }
        }))
    }

    /// Upper and lower solutions at a length below the nose, each polished
    /// from the nearest traced point of its branch.
    pub fn solutions_at(&self, length_km: f64) -> Result<(VoltageSolution, VoltageSolution)> {
        if !(length_km > 0.0 && length_km < self.nose.length_km) {
            return Err(Error::InvalidInput(format!(
                "{length_km} km is not below the nose at {} km",
                self.nose.length_km
            )));
        }
        let solve_from = |p: Option<&CurvePoint>| -> Result<VoltageSolution> {
            let p = p.ok_or_else(|| Error::InvalidInput("branch has no traced points".into()))?;
            self.family
                .solve(length_km, &SolverConfig::warm(p.solution.clone()))
        };
        let up = solve_from(Self::nearest(self.upper(), length_km))?;
        let low = solve_from(Self::nearest(self.lower(), length_km))?;
        Ok((up, low))
    }
}

fn curve_point(arc: &Arc<'_>, p: &ArcPoint, branch: SolutionBranch) -> CurvePoint {
    CurvePoint {
        length_km: arc.length(p.s),
        end_voltage: p.solution.end_voltage(),
        branch,
        solution: p.solution.clone(),
    }
}

/// Traces the end-voltage versus road-length curve with every vehicle at its
/// final position, through the nose and down the lower branch.
pub fn trace_nose_curve(scn: &Scenario, opts: &TraceOptions) -> Result<NoseCurve> {
    trace_family(&LengthFamily::critical(scn)?, opts)
}

pub fn trace_family(fam: &LengthFamily, opts: &TraceOptions) -> Result<NoseCurve> {
    if !(opts.start_km > 0.0) || !(opts.max_km > opts.start_km) {
        return Err(Error::InvalidInput(format!(
            "trace range ({}, {}) km is not increasing and positive",
            opts.start_km, opts.max_km
        )));
    }
    let arc = Arc {
        fam,
        l_ref: opts.start_km,
        tolerance: opts.tolerance,
    };
    let stall = |s: f64, h: f64| Error::TraceStall {
        length_km: s * opts.start_km,
        step: h,
    };
    let first = arc.land(
        opts.start_km,
        &VoltageSolution::flat(fam.bus_count(), fam.slack_voltage()),
    )?;
    let mut current = arc.start(first, 1.0).ok_or_else(|| stall(1.0, 0.0))?;
    let mut points = vec![curve_point(&arc, &current, SolutionBranch::Upper)];
    let mut h = opts.initial_step;

    // upper branch until the length component of the tangent turns negative
    let (before, after) = loop {
        if points.len() >= opts.max_points {
            return Err(stall(current.s, h));
        }
        match arc.step(&current, h) {
            None => {
                h *= 0.5;
                if h < opts.min_step {
                    return Err(stall(current.s, h));
                }
            }
            Some((next, iterations)) => {
                if next.ds() <= 0.0 {
                    break (current, next);
                }
                if arc.length(next.s) > opts.max_km {
                    return Err(Error::NoFold {
                        max_km: opts.max_km,
                    });
                }
                current = next;
                points.push(curve_point(&arc, &current, SolutionBranch::Upper));
                if iterations <= 3 {
                    h = (h * 2.0).min(opts.max_step);
                }
            }
        }
    };

    // bisect the step length until the two sides of the fold nearly coincide
    let (mut lo, mut hi) = (0.0, h);
    let (mut last_upper, mut first_lower) = (before.clone(), after);
    while (last_upper.solution.end_voltage() - first_lower.solution.end_voltage()).abs()
        > opts.merge_tolerance
    {
        let mid = 0.5 * (lo + hi);
        if mid - lo < 1e-14 {
            return Err(stall(before.s, mid));
        }
        let (p, _) = arc.step(&before, mid).ok_or_else(|| stall(before.s, mid))?;
        if p.ds() > 0.0 {
            lo = mid;
            last_upper = p;
        } else {
            hi = mid;
            first_lower = p;
        }
    }
    if lo > 0.0 {
        points.push(curve_point(&arc, &last_upper, SolutionBranch::Upper));
    }
    let nose_side = if last_upper.s >= first_lower.s {
        &last_upper
    } else {
        &first_lower
    };
    let nose = NosePoint {
        length_km: arc.length(nose_side.s),
        voltage: nose_side.solution.end_voltage(),
        merge_gap: (last_upper.solution.end_voltage() - first_lower.solution.end_voltage()).abs(),
    };

    // lower branch back down to the start length
    current = first_lower;
    points.push(curve_point(&arc, &current, SolutionBranch::Lower));
    let mut h = opts.initial_step.max(h);
    while current.s > 1.0
        && current.solution.end_voltage() > opts.voltage_floor
        && points.len() < opts.max_points
    {
        match arc.step(&current, h) {
            None => {
                h *= 0.5;
                if h < opts.min_step {
                    break;
                }
            }
            Some((next, iterations)) => {
                if next.ds() >= 0.0 {
                    break;
                }
                current = next;
                points.push(curve_point(&arc, &current, SolutionBranch::Lower));
                if iterations <= 3 {
                    h = (h * 2.0).min(opts.max_step);
                }
            }
        }
    }

    Ok(NoseCurve {
        points,
        nose,
        family: fam.clone(),
    })
}
