//! Radial feeder model: per-unit bases, buses, branches and the bus
//! admittance matrix.
//!
//! Bus numbers are 1-based (bus 1 is the source). Vectors and matrix rows
//! are 0-based, so bus `i` lives at row `i - 1`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerUnitBase {
    v_base: f64,
    s_base: f64,
    z_base: f64,
}

impl PerUnitBase {
    /// Bases in volts and volt-amperes.
    pub fn new(v_base: f64, s_base: f64) -> Result<Self> {
        if !(v_base.is_finite() && v_base > 0.0) {
            return Err(Error::InvalidInput(format!(
                "v_base must be positive, got {v_base}"
            )));
        }
        if !(s_base.is_finite() && s_base > 0.0) {
            return Err(Error::InvalidInput(format!(
                "s_base must be positive, got {s_base}"
            )));
        }
        Ok(Self {
            v_base,
            s_base,
            z_base: v_base * v_base / s_base,
        })
    }

    pub fn from_kv_mva(v_base_kv: f64, s_base_mva: f64) -> Result<Self> {
        Self::new(v_base_kv * 1e3, s_base_mva * 1e6)
    }

    pub fn v_base(&self) -> f64 {
        self.v_base
    }

    pub fn s_base(&self) -> f64 {
        self.s_base
    }

    pub fn z_base(&self) -> f64 {
        self.z_base
    }

    /// Power in kW (or kVAr) to per-unit.
    pub fn power_to_pu(&self, kilo: f64) -> f64 {
        kilo * 1e3 / self.s_base
    }
}

impl Default for PerUnitBase {
    /// 6 kV, 1 MVA.
    fn default() -> Self {
        Self::new(6e3, 1e6).expect("default bases are valid")
    }
}

pub fn to_per_unit(value_ohms: f64, base: &PerUnitBase) -> f64 {
    value_ohms / base.z_base()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusKind {
    Slack,
    Pq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub index: usize,
    pub kind: BusKind,
    /// Per-unit shunt susceptance (capacitive is positive).
    pub shunt_susceptance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from_bus: usize,
    pub to_bus: usize,
    pub r: f64,
    pub x: f64,
}

impl Branch {
    pub fn impedance(&self) -> Complex64 {
        Complex64::new(self.r, self.x)
    }
}

/// Fixed capacitor bank rated at nominal voltage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacitorBank {
    pub bus: usize,
    pub kvar: f64,
}

/// Physical description of a feeder laid under a road.
#[derive(Debug, Clone, PartialEq)]
pub struct FeederSpec {
    pub length_km: f64,
    pub num_nodes: usize,
    pub r_ohm_per_km: f64,
    pub x_ohm_per_km: f64,
    pub base: PerUnitBase,
    pub slack_voltage: f64,
    pub capacitor_banks: Vec<CapacitorBank>,
}

impl FeederSpec {
    pub fn segment_km(&self) -> f64 {
        self.length_km / (self.num_nodes as f64 - 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    base: PerUnitBase,
    slack_voltage: f64,
}

impl Network {
    pub fn new(
        buses: Vec<Bus>,
        branches: Vec<Branch>,
        base: PerUnitBase,
        slack_voltage: f64,
    ) -> Result<Self> {
        let net = Self {
            buses,
            branches,
            base,
            slack_voltage,
        };
        net.validate()?;
        Ok(net)
    }

    fn validate(&self) -> Result<()> {
        let n = self.buses.len();
        if n < 2 {
            return Err(Error::InvalidNetwork(format!(
                "need at least 2 buses, got {n}"
            )));
        }
        for (pos, bus) in self.buses.iter().enumerate() {
            if bus.index != pos + 1 {
                return Err(Error::InvalidNetwork(format!(
                    "bus indices must be contiguous from 1; found {} at position {}",
                    bus.index,
                    pos + 1
                )));
            }
        }
        let slack_count = self
            .buses
            .iter()
            .filter(|b| b.kind == BusKind::Slack)
            .count();
        if slack_count != 1 {
            return Err(Error::InvalidNetwork(format!(
                "exactly one slack bus required, found {slack_count}"
            )));
        }
        if self.buses[0].kind != BusKind::Slack {
            return Err(Error::InvalidNetwork("bus 1 must be the slack bus".into()));
        }
        if !(self.slack_voltage.is_finite() && self.slack_voltage > 0.0) {
            return Err(Error::InvalidNetwork(format!(
                "slack voltage must be positive, got {}",
                self.slack_voltage
            )));
        }
        if self.branches.len() + 1 != n {
            return Err(Error::InvalidNetwork(format!(
                "a radial network with {n} buses needs {} branches, got {}",
                n - 1,
                self.branches.len()
            )));
        }
        for br in &self.branches {
            if br.from_bus == br.to_bus {
                return Err(Error::InvalidNetwork(format!(
                    "branch loops on bus {}",
                    br.from_bus
                )));
            }
            if br.from_bus == 0 || br.from_bus > n || br.to_bus == 0 || br.to_bus > n {
                return Err(Error::InvalidNetwork(format!(
                    "branch {}-{} references a missing bus",
                    br.from_bus, br.to_bus
                )));
            }
            if !(br.r >= 0.0) || !br.x.is_finite() {
                return Err(Error::InvalidNetwork(format!(
                    "branch {}-{} has invalid impedance {} + j{}",
                    br.from_bus, br.to_bus, br.r, br.x
                )));
            }
        }
        if !self.is_connected() {
            return Err(Error::InvalidNetwork("network is not connected".into()));
        }
        Ok(())
    }

    /// Breadth-first reachability from the slack bus.
    pub fn is_connected(&self) -> bool {
        let n = self.buses.len();
        let mut adjacency = vec![Vec::new(); n];
        for br in &self.branches {
            adjacency[br.from_bus - 1].push(br.to_bus - 1);
            adjacency[br.to_bus - 1].push(br.from_bus - 1);
        }
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &k in &adjacency[i] {
                if !seen[k] {
                    seen[k] = true;
                    queue.push_back(k);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn base(&self) -> &PerUnitBase {
        &self.base
    }

    pub fn slack_voltage(&self) -> f64 {
        self.slack_voltage
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    pub fn shunt_susceptances(&self) -> Vec<f64> {
        self.buses.iter().map(|b| b.shunt_susceptance).collect()
    }

    /// Same topology and shunts with every branch impedance multiplied by `factor`.
    pub fn with_impedance_scale(&self, factor: f64) -> Result<Self> {
        let branches = self
            .branches
            .iter()
            .map(|b| Branch {
                r: b.r * factor,
                x: b.x * factor,
                ..b.clone()
            })
            .collect();
        Network::new(self.buses.clone(), branches, self.base, self.slack_voltage)
    }
}

/// Discretizes a road into `num_nodes` evenly spaced buses joined by equal segments.
pub fn build_network(spec: &FeederSpec) -> Result<Network> {
    if spec.num_nodes < 2 {
        return Err(Error::InvalidNetwork(format!(
            "need at least 2 nodes, got {}",
            spec.num_nodes
        )));
    }
    if !(spec.length_km.is_finite() && spec.length_km > 0.0) {
        return Err(Error::InvalidNetwork(format!(
            "road length must be positive, got {}",
            spec.length_km
        )));
    }
    if !(spec.r_ohm_per_km >= 0.0) || !spec.x_ohm_per_km.is_finite() {
        return Err(Error::InvalidNetwork(
            "cable impedance must be finite with r >= 0".into(),
        ));
    }
    let n = spec.num_nodes;
    let mut buses: Vec<Bus> = (1..=n)
        .map(|index| Bus {
            index,
            kind: if index == 1 {
                BusKind::Slack
            } else {
                BusKind::Pq
            },
            shunt_susceptance: 0.0,
        })
        .collect();
    for bank in &spec.capacitor_banks {
        if bank.bus == 0 || bank.bus > n {
            return Err(Error::InvalidNetwork(format!(
                "capacitor bank at bus {} but the network has buses 1..={n}",
                bank.bus
            )));
        }
        // Constant susceptance: Q = B * V^2 equals the rating at 1 pu.
        buses[bank.bus - 1].shunt_susceptance += spec.base.power_to_pu(bank.kvar);
    }
    let seg = spec.segment_km();
    let r = to_per_unit(spec.r_ohm_per_km * seg, &spec.base);
    let x = to_per_unit(spec.x_ohm_per_km * seg, &spec.base);
    let branches = (1..n)
        .map(|k| Branch {
            from_bus: k,
            to_bus: k + 1,
            r,
            x,
        })
        .collect();
    Network::new(buses, branches, spec.base, spec.slack_voltage)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceMatrix {
    y: DMatrix<Complex64>,
}

impl AdmittanceMatrix {
    pub(crate) fn from_matrix(y: DMatrix<Complex64>) -> Self {
        Self { y }
    }

    pub fn dim(&self) -> usize {
        self.y.nrows()
    }

    /// Entry for 0-based rows `i`, `k`.
    pub fn get(&self, i: usize, k: usize) -> Complex64 {
        self.y[(i, k)]
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.y
    }

    /// Complex current injections `Y v`.
    pub fn currents(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|k| self.y[(i, k)] * v[k]).sum())
            .collect()
    }
}

pub fn build_admittance(net: &Network) -> Result<AdmittanceMatrix> {
    let n = net.bus_count();
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for br in net.branches() {
        let z = br.impedance();
        if z.re == 0.0 && z.im == 0.0 {
            return Err(Error::ZeroImpedanceBranch {
                from: br.from_bus,
                to: br.to_bus,
            });
        }
        let ys = z.inv();
        let (i, k) = (br.from_bus - 1, br.to_bus - 1);
        y[(i, i)] += ys;
        y[(k, k)] += ys;
        y[(i, k)] -= ys;
        y[(k, i)] -= ys;
    }
    for (i, bus) in net.buses().iter().enumerate() {
        y[(i, i)] += Complex64::new(0.0, bus.shunt_susceptance);
    }
    Ok(AdmittanceMatrix { y })
}
