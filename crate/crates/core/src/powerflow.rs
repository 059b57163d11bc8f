//! Polar Newton-Raphson power flow for a network with one slack bus and
//! PQ buses everywhere else.
//!
//! Sign convention: injections are positive into the network, so a load of
//! `P + jQ` appears as `-P - jQ`. The mismatch is specified minus computed
//! injection, ordered `[ΔP_2..ΔP_n, ΔQ_2..ΔQ_n]`; the unknowns are ordered
//! `[θ_2..θ_n, V_2..V_n]`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{build_admittance, AdmittanceMatrix, Network};

/// Lower and upper magnitude limits an iterate may take before the solve is abandoned.
pub const DIVERGENCE_BOUNDS: (f64, f64) = (1e-4, 10.0);

#[derive(Debug, Clone, PartialEq)]
pub struct InjectionVector {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl InjectionVector {
    pub fn zeros(n: usize) -> Self {
        Self {
            p: vec![0.0; n],
            q: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn complex(&self, i: usize) -> Complex64 {
        Complex64::new(self.p[i], self.q[i])
    }

    /// Sum over PQ buses (the slack entry is excluded).
    pub fn total_pq(&self) -> Complex64 {
        (1..self.len()).map(|i| self.complex(i)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoltageSolution {
    pub magnitude: Vec<f64>,
    pub angle: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
}

impl VoltageSolution {
    pub fn flat(n: usize, slack_voltage: f64) -> Self {
        let mut magnitude = vec![1.0; n];
        magnitude[0] = slack_voltage;
        Self {
            magnitude,
            angle: vec![0.0; n],
            iterations: 0,
            residual_norm: f64::NAN,
        }
    }

    pub fn len(&self) -> usize {
        self.magnitude.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnitude.is_empty()
    }

    pub fn phasors(&self) -> Vec<Complex64> {
        self.magnitude
            .iter()
            .zip(&self.angle)
            .map(|(&m, &a)| Complex64::from_polar(m, a))
            .collect()
    }

    /// Magnitude at the last bus (the far end of the road).
    pub fn end_voltage(&self) -> f64 {
        *self.magnitude.last().expect("non-empty solution")
    }

    pub fn min_voltage(&self) -> f64 {
        self.magnitude.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Unknown vector `[θ_2.., V_2..]`.
    pub fn state(&self) -> Vec<f64> {
        let mut x = self.angle[1..].to_vec();
        x.extend_from_slice(&self.magnitude[1..]);
        x
    }

    pub fn from_state(x: &[f64], slack_voltage: f64) -> Self {
        let m = x.len() / 2;
        let mut angle = vec![0.0];
        angle.extend_from_slice(&x[..m]);
        let mut magnitude = vec![slack_voltage];
        magnitude.extend_from_slice(&x[m..]);
        Self {
            magnitude,
            angle,
            iterations: 0,
            residual_norm: f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    Flat,
    Warm(VoltageSolution),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub start: Start,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 50,
            start: Start::Flat,
        }
    }
}

impl SolverConfig {
    pub fn warm(start: VoltageSolution) -> Self {
        Self {
            start: Start::Warm(start),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput(format!(
                "solver tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Complex power `V ∘ conj(Y V)` drawn from the network at every bus.
pub fn computed_power(y: &AdmittanceMatrix, v: &[Complex64]) -> Vec<Complex64> {
    y.currents(v)
        .into_iter()
        .zip(v)
        .map(|(i, &vi)| vi * i.conj())
        .collect()
}

pub fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Mismatch against a prebuilt admittance matrix.
pub fn mismatch(y: &AdmittanceMatrix, inj: &InjectionVector, v: &VoltageSolution) -> Vec<f64> {
    let n = y.dim();
    let s = computed_power(y, &v.phasors());
    let mut f = Vec::with_capacity(2 * (n - 1));
    f.extend((1..n).map(|i| inj.p[i] - s[i].re));
    f.extend((1..n).map(|i| inj.q[i] - s[i].im));
    f
}

/// Partial derivatives of [`mismatch`] with respect to `[θ_pq, V_pq]`.
pub fn mismatch_jacobian(y: &AdmittanceMatrix, v: &VoltageSolution) -> DMatrix<f64> {
    let n = y.dim();
    let m = n - 1;
    let vc = v.phasors();
    let current = y.currents(&vc);
    let j = Complex64::i();
    let mut jac = DMatrix::zeros(2 * m, 2 * m);
    for i in 1..n {
        for k in 1..n {
            let yv = y.get(i, k) * vc[k];
            let mut ds_da = -j * vc[i] * yv.conj();
            let mut ds_dm = vc[i] * (yv / v.magnitude[k]).conj();
            if i == k {
                ds_da += j * vc[i] * current[i].conj();
                ds_dm += current[i].conj() * vc[i] / v.magnitude[i];
            }
            let (r, c) = (i - 1, k - 1);
            jac[(r, c)] = -ds_da.re;
            jac[(r, c + m)] = -ds_dm.re;
            jac[(r + m, c)] = -ds_da.im;
            jac[(r + m, c + m)] = -ds_dm.im;
        }
    }
    jac
}

pub fn residual(net: &Network, inj: &InjectionVector, v: &VoltageSolution) -> Result<Vec<f64>> {
    check_dims(net.bus_count(), inj, v)?;
    Ok(mismatch(&build_admittance(net)?, inj, v))
}

pub fn jacobian(net: &Network, v: &VoltageSolution) -> Result<DMatrix<f64>> {
    if v.len() != net.bus_count() || v.angle.len() != v.len() {
        return Err(Error::InvalidInput(
            "voltage vector does not match the network".into(),
        ));
    }
    Ok(mismatch_jacobian(&build_admittance(net)?, v))
}

fn check_dims(n: usize, inj: &InjectionVector, v: &VoltageSolution) -> Result<()> {
    if inj.p.len() != n || inj.q.len() != n {
        return Err(Error::InvalidInput(format!(
            "injection vector has {} entries for {n} buses",
            inj.p.len()
        )));
    }
    if v.magnitude.len() != n || v.angle.len() != n {
        return Err(Error::InvalidInput(format!(
            "voltage vector has {} entries for {n} buses",
            v.magnitude.len()
        )));
    }
    Ok(())
}

/// Solves `J dx = rhs`, reporting near-singular pivots as `None`.
pub(crate) fn solve_linear(jac: DMatrix<f64>, rhs: &[f64]) -> Option<Vec<f64>> {
    let lu = jac.lu();
    let u = lu.u();
    let diag: Vec<f64> = u.diagonal().iter().map(|d| d.abs()).collect();
    let largest = diag.iter().copied().fold(0.0, f64::max);
    let smallest = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if !(largest > 0.0) || smallest <= largest * 1e-14 {
        return None;
    }
    let dx = lu.solve(&DVector::from_column_slice(rhs))?;
    dx.iter()
        .all(|d| d.is_finite())
        .then(|| dx.as_slice().to_vec())
}

fn within_bounds(v: &VoltageSolution) -> bool {
    let (lo, hi) = DIVERGENCE_BOUNDS;
    v.magnitude
        .iter()
        .all(|&m| m.is_finite() && m > lo && m < hi)
        && v.angle.iter().all(|a| a.is_finite())
}

fn apply_step(v: &VoltageSolution, dx: &[f64], scale: f64) -> VoltageSolution {
    let m = v.len() - 1;
    let mut next = v.clone();
    for i in 0..m {
        next.angle[i + 1] += scale * dx[i];
        next.magnitude[i + 1] += scale * dx[i + m];
    }
    next
}

/// Newton-Raphson against a prebuilt admittance matrix.
pub fn solve_with_admittance(
    y: &AdmittanceMatrix,
    slack_voltage: f64,
    inj: &InjectionVector,
    cfg: &SolverConfig,
) -> Result<VoltageSolution> {
    cfg.validate()?;
    let n = y.dim();
    let mut v = match &cfg.start {
        Start::Flat => VoltageSolution::flat(n, slack_voltage),
        Start::Warm(w) => {
            let mut w = w.clone();
            w.magnitude[0] = slack_voltage;
            w.angle[0] = 0.0;
            w
        }
    };
    check_dims(n, inj, &v)?;
    if !within_bounds(&v) {
        return Err(Error::NonConvergence {
            iterations: 0,
            residual: f64::NAN,
        });
    }

    let mut f = mismatch(y, inj, &v);
    let mut norm = inf_norm(&f);
    let mut iteration = 0;
    loop {
        if norm <= cfg.tolerance {
            // one refinement step: per-bus mismatches just under the
            // tolerance still add up across buses in the power balance
            if norm > cfg.tolerance * 1e-3 {
                if let Some(dx) = solve_linear(
                    mismatch_jacobian(y, &v),
                    &f.iter().map(|x| -x).collect::<Vec<_>>(),
                ) {
                    let polished = apply_step(&v, &dx, 1.0);
                    let polished_norm = inf_norm(&mismatch(y, inj, &polished));
                    if within_bounds(&polished) && polished_norm < norm {
                        v = polished;
                        norm = polished_norm;
                        iteration += 1;
                    }
                }
            }
            v.iterations = iteration;
            v.residual_norm = norm;
            return Ok(v);
        }
        if iteration == cfg.max_iterations || !norm.is_finite() {
            return Err(Error::NonConvergence {
                iterations: iteration,
                residual: norm,
            });
        }
        iteration += 1;
        let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
        let dx = solve_linear(mismatch_jacobian(y, &v), &rhs)
            .ok_or(Error::SingularJacobian { iteration })?;

        let mut trial = apply_step(&v, &dx, 1.0);
        let mut trial_f = mismatch(y, inj, &trial);
        let mut trial_norm = inf_norm(&trial_f);
        if !(trial_norm <= norm) {
            trial = apply_step(&v, &dx, 0.5);
            trial_f = mismatch(y, inj, &trial);
            trial_norm = inf_norm(&trial_f);
        }
        if !within_bounds(&trial) {
            return Err(Error::NonConvergence {
                iterations: iteration,
                residual: trial_norm,
            });
        }
        v = trial;
        f = trial_f;
        norm = trial_norm;
    }
}

pub fn solve(net: &Network, inj: &InjectionVector, cfg: &SolverConfig) -> Result<VoltageSolution> {
    if inj.len() != net.bus_count() {
        return Err(Error::InvalidInput(format!(
            "injection vector has {} entries for {} buses",
            inj.len(),
            net.bus_count()
        )));
    }
    let y = build_admittance(net)?;
    solve_with_admittance(&y, net.slack_voltage(), inj, cfg)
}

/// Complex power delivered by the slack bus into the network.
pub fn slack_injection(net: &Network, v: &VoltageSolution) -> Result<Complex64> {
    let y = build_admittance(net)?;
    Ok(computed_power(&y, &v.phasors())[0])
}

/// Complex power absorbed by branch series impedances.
pub fn series_losses(net: &Network, v: &VoltageSolution) -> Complex64 {
    let vc = v.phasors();
    net.branches()
        .iter()
        .map(|br| {
            let z = br.impedance();
            let current = (vc[br.from_bus - 1] - vc[br.to_bus - 1]) / z;
            z * current.norm_sqr()
        })
        .sum()
}

/// Complex power absorbed by shunt elements (negative reactive for capacitors).
pub fn shunt_power(net: &Network, v: &VoltageSolution) -> Complex64 {
    net.buses()
        .iter()
        .zip(&v.magnitude)
        .map(|(b, &m)| Complex64::new(0.0, -b.shunt_susceptance * m * m))
        .sum()
}

/// Current magnitude through the branch leaving the slack bus.
pub fn slack_branch_current(net: &Network, v: &VoltageSolution) -> f64 {
    let vc = v.phasors();
    let br = net
        .branches()
        .iter()
        .find(|b| b.from_bus == 1 || b.to_bus == 1)
        .expect("slack bus has a branch");
    ((vc[br.from_bus - 1] - vc[br.to_bus - 1]) / br.impedance()).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Branch, Bus, BusKind, PerUnitBase};
    use approx::assert_relative_eq;

    pub(crate) fn two_bus(r: f64, x: f64) -> Network {
        let buses = vec![
            Bus {
                index: 1,
                kind: BusKind::Slack,
                shunt_susceptance: 0.0,
            },
            Bus {
                index: 2,
                kind: BusKind::Pq,
                shunt_susceptance: 0.0,
            },
        ];
        let br = vec![Branch {
            from_bus: 1,
            to_bus: 2,
            r,
            x,
        }];
        Network::new(buses, br, PerUnitBase::default(), 1.0).unwrap()
    }

    fn load(n: usize, bus: usize, p: f64, q: f64) -> InjectionVector {
        let mut inj = InjectionVector::zeros(n);
        inj.p[bus - 1] = -p;
        inj.q[bus - 1] = -q;
        inj
    }

    /// Larger root of U^2 + (2(PR+QX) - V1^2) U + (P^2+Q^2)(R^2+X^2) = 0, written
    /// out independently of the stability module.
    fn quadratic_high_root(v1: f64, p: f64, q: f64, r: f64, x: f64) -> f64 {
        let b = 2.0 * (p * r + q * x) - v1 * v1;
        let c = (p * p + q * q) * (r * r + x * x);
        (-b + (b * b - 4.0 * c).sqrt()) / 2.0
    }

    #[test]
    fn zero_injection_flat_start() {
        let net = two_bus(0.1, 0.0234);
        let inj = InjectionVector::zeros(2);
        let flat = VoltageSolution::flat(2, 1.0);
        assert!(residual(&net, &inj, &flat)
            .unwrap()
            .iter()
            .all(|&m| m == 0.0));
        let sol = solve(&net, &inj, &SolverConfig::default()).unwrap();
        assert_eq!(sol.iterations, 0);
        assert_eq!(sol.magnitude, vec![1.0, 1.0]);
        assert_eq!(sol.angle, vec![0.0, 0.0]);
    }

    #[test]
    fn two_bus_matches_quadratic() {
        let net = two_bus(0.1, 0.0234);
        let sol = solve(&net, &load(2, 2, 0.1, 0.05), &SolverConfig::default()).unwrap();
        let expected = quadratic_high_root(1.0, 0.1, 0.05, 0.1, 0.0234).sqrt();
        assert!(
            (sol.magnitude[1] - expected).abs() < 1e-8,
            "{} vs {expected}",
            sol.magnitude[1]
        );
        assert!(sol.residual_norm <= 1e-8);
    }

    #[test]
    fn beyond_nose_does_not_converge() {
        let net = two_bus(1.0, 0.234);
        let err = solve(&net, &load(2, 2, 0.5, 0.25), &SolverConfig::default()).unwrap_err();
        assert!(err.is_non_convergence(), "{err:?}");
    }

    #[test]
    fn perturbed_solution_fails_tolerance() {
        let net = two_bus(0.1, 0.0234);
        let inj = load(2, 2, 0.1, 0.05);
        let mut sol = solve(&net, &inj, &SolverConfig::default()).unwrap();
        assert!(inf_norm(&residual(&net, &inj, &sol).unwrap()) <= 1e-8);
        sol.magnitude[1] += 0.01;
        assert!(inf_norm(&residual(&net, &inj, &sol).unwrap()) > 1e-8);
    }

    #[test]
    fn warm_start_finds_lower_branch() {
        let net = two_bus(0.1, 0.0234);
        let inj = load(2, 2, 2.0, 1.0);
        let mut guess = VoltageSolution::flat(2, 1.0);
        guess.magnitude[1] = 0.33;
        guess.angle[1] = -0.17;
        let low = solve(&net, &inj, &SolverConfig::warm(guess)).unwrap();
        let high = solve(&net, &inj, &SolverConfig::default()).unwrap();
        let b = 2.0 * (2.0 * 0.1 + 1.0 * 0.0234) - 1.0;
        let c = (2.0f64.powi(2) + 1.0f64.powi(2)) * (0.1f64.powi(2) + 0.0234f64.powi(2));
        let disc = (b * b - 4.0 * c).sqrt();
        assert!((low.magnitude[1] - ((-b - disc) / 2.0).sqrt()).abs() < 1e-8);
        assert!((high.magnitude[1] - ((-b + disc) / 2.0).sqrt()).abs() < 1e-8);
    }

    #[test]
    fn resistive_branch_decouples_at_flat_start() {
        let net = two_bus(0.1, 0.0);
        let jac = jacobian(&net, &VoltageSolution::flat(2, 1.0)).unwrap();
        // dP/dtheta = -V_i V_k B_ik cos(0) terms vanish with B = 0.
        assert_eq!(jac[(0, 0)], 0.0);
        assert!(jac[(0, 1)] != 0.0);
    }

    #[test]
    fn solver_config_validation() {
        let net = two_bus(0.1, 0.0234);
        let inj = InjectionVector::zeros(2);
        let cfg = SolverConfig {
            tolerance: 0.0,
            ..SolverConfig::default()
        };
        assert!(matches!(
            solve(&net, &inj, &cfg),
            Err(Error::InvalidInput(_))
        ));
        let cfg = SolverConfig {
            max_iterations: 0,
            ..SolverConfig::default()
        };
        assert!(matches!(
            solve(&net, &inj, &cfg),
            Err(Error::InvalidInput(_))
        ));
        assert!(solve(&net, &InjectionVector::zeros(3), &SolverConfig::default()).is_err());
    }

    #[test]
    fn slack_balances_load_and_losses() {
        let net = two_bus(0.1, 0.0234);
        let inj = load(2, 2, 0.1, 0.05);
        let sol = solve(&net, &inj, &SolverConfig::default()).unwrap();
        let supplied = slack_injection(&net, &sol).unwrap();
        let expected = -inj.total_pq() + series_losses(&net, &sol) + shunt_power(&net, &sol);
        assert_relative_eq!(supplied.re, expected.re, epsilon = 1e-8);
        assert_relative_eq!(supplied.im, expected.im, epsilon = 1e-8);
    }
}
