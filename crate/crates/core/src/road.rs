//! Electrified road with moving vehicle fleets.
//!
//! Each time step is a snapshot: every fleet advances one node, the nodes
//! under a vehicle become constant-power loads, and all other PQ buses draw
//! nothing. Vehicles sitting on the source node are fed directly by the
//! source and leave no entry in the injection vector.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{build_network, CapacitorBank, FeederSpec, Network, PerUnitBase};
use crate::powerflow::InjectionVector;

/// Cable and per-unit data for the feeder under the road.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadSpec {
    pub length_km: f64,
    pub num_nodes: usize,
    pub r_ohm_per_km: f64,
    pub x_ohm_per_km: f64,
    pub v_base_kv: f64,
    pub s_base_mva: f64,
    pub slack_voltage_pu: f64,
}

impl Default for RoadSpec {
    /// 2 km road with 10 nodes on a 6 kV cable (0.568 + j0.133 Ω/km), 1 MVA base.
    fn default() -> Self {
        Self {
            length_km: 2.0,
            num_nodes: 10,
            r_ohm_per_km: 0.568,
            x_ohm_per_km: 0.133,
            v_base_kv: 6.0,
            s_base_mva: 1.0,
            slack_voltage_pu: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvParams {
    pub p_kw: f64,
    pub q_kvar: f64,
}

impl Default for EvParams {
    fn default() -> Self {
        Self {
            p_kw: 30.0,
            q_kvar: 15.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Away from the source (node numbers increase).
    Forward,
    /// Towards the source.
    Reverse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fleet {
    pub size: usize,
    pub direction: Direction,
    /// Node occupied by the leading vehicle at the first time step.
    pub head_start_node: usize,
    /// Nodes between consecutive vehicles.
    pub spacing_nodes: usize,
}

impl Fleet {
    pub fn forward(size: usize, head_start_node: usize) -> Self {
        Self {
            size,
            direction: Direction::Forward,
            head_start_node,
            spacing_nodes: 1,
        }
    }

    pub fn reverse(size: usize, head_start_node: usize) -> Self {
        Self {
            direction: Direction::Reverse,
            ..Self::forward(size, head_start_node)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Compensation {
    /// On-board PV output per vehicle, kW.
    pub pv_kw: f64,
    /// On-board capacitor per vehicle, kVAr.
    pub onboard_capacitor_kvar: f64,
    pub capacitor_banks: Vec<CapacitorBank>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationSpec {
    /// Largest deviation as a share of the base vehicle power.
    pub fraction: f64,
    pub seed: u64,
    pub samples: usize,
}

impl Default for VariationSpec {
    fn default() -> Self {
        Self {
            fraction: 0.5,
            seed: 0,
            samples: 200,
        }
    }
}

/// Random power deviation of one vehicle at one step, subtracted from its base demand.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleDeviation {
    pub dp_kw: f64,
    pub dq_kvar: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub road: RoadSpec,
    pub ev: EvParams,
    pub fleets: Vec<Fleet>,
    pub compensation: Compensation,
    pub variation: Option<VariationSpec>,
    pub time_steps: usize,
}

impl Default for Scenario {
    /// Two vehicles starting on nodes 1 and 2 of the default road, nine steps.
    fn default() -> Self {
        Self {
            road: RoadSpec::default(),
            ev: EvParams::default(),
            fleets: vec![Fleet::forward(2, 2)],
            compensation: Compensation::default(),
            variation: None,
            time_steps: 9,
        }
    }
}

impl Scenario {
    pub fn base(&self) -> Result<PerUnitBase> {
        PerUnitBase::from_kv_mva(self.road.v_base_kv, self.road.s_base_mva)
    }

    pub fn feeder(&self) -> Result<FeederSpec> {
        Ok(FeederSpec {
            length_km: self.road.length_km,
            num_nodes: self.road.num_nodes,
            r_ohm_per_km: self.road.r_ohm_per_km,
            x_ohm_per_km: self.road.x_ohm_per_km,
            base: self.base()?,
            slack_voltage: self.road.slack_voltage_pu,
            capacitor_banks: self.compensation.capacitor_banks.clone(),
        })
    }

    pub fn network(&self) -> Result<Network> {
        build_network(&self.feeder()?)
    }

    pub fn with_length(&self, length_km: f64) -> Scenario {
        let mut scn = self.clone();
        scn.road.length_km = length_km;
        scn
    }

    pub fn vehicle_count(&self) -> usize {
        self.fleets.iter().map(|f| f.size).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let feeder = self.feeder()?;
        build_network(&feeder)?;
        if self.time_steps == 0 {
            return Err(Error::InvalidInput("time_steps must be at least 1".into()));
        }
        if !(self.ev.p_kw >= 0.0) || !self.ev.q_kvar.is_finite() {
            return Err(Error::InvalidInput(format!(
                "vehicle demand must be finite with p >= 0, got {} kW / {} kVAr",
                self.ev.p_kw, self.ev.q_kvar
            )));
        }
        if let Some(var) = &self.variation {
            if !(0.0..=1.0).contains(&var.fraction) {
                return Err(Error::InvalidInput(format!(
                    "variation fraction must lie in [0, 1], got {}",
                    var.fraction
                )));
            }
        }
        for (idx, fleet) in self.fleets.iter().enumerate() {
            if fleet.size == 0 {
                return Err(Error::InvalidInput(format!(
                    "fleet {} has no vehicles",
                    idx + 1
                )));
            }
            if fleet.spacing_nodes == 0 {
                return Err(Error::InvalidInput(format!(
                    "fleet {} needs a spacing of at least one node",
                    idx + 1
                )));
            }
            for t in 1..=self.time_steps {
                positions(fleet, idx + 1, t, self.road.num_nodes)?;
            }
        }
        Ok(())
    }
}

fn positions(fleet: &Fleet, fleet_id: usize, t: usize, n: usize) -> Result<Vec<usize>> {
    if t == 0 {
        return Err(Error::InvalidInput("time steps are numbered from 1".into()));
    }
    let offset = t as i64 - 1;
    let (head, trail) = match fleet.direction {
        Direction::Forward => (fleet.head_start_node as i64 + offset, -1),
        Direction::Reverse => (fleet.head_start_node as i64 - offset, 1),
    };
    (0..fleet.size as i64)
        .map(|k| {
            let node = head + trail * k * fleet.spacing_nodes as i64;
            if node < 1 || node > n as i64 {
                Err(Error::PositionOutOfRange {
                    fleet: fleet_id,
                    step: t,
                    node,
                    nodes: n,
                })
            } else {
                Ok(node as usize)
            }
        })
        .collect()
}

/// Nodes occupied by the fleet at step `t` (1-based), head first.
pub fn fleet_positions(fleet: &Fleet, t: usize, n: usize) -> Result<Vec<usize>> {
    positions(fleet, 1, t, n)
}

/// Occupied nodes of every vehicle in the scenario, in fleet order then head first.
pub fn vehicle_nodes(scn: &Scenario, t: usize) -> Result<Vec<usize>> {
    let mut nodes = Vec::with_capacity(scn.vehicle_count());
    for (idx, fleet) in scn.fleets.iter().enumerate() {
        nodes.extend(positions(fleet, idx + 1, t, scn.road.num_nodes)?);
    }
    Ok(nodes)
}

fn stream_seed(seed: u64, sample: usize, step: usize) -> u64 {
    // splitmix64 finalizer over the three coordinates
    let mut z = seed
        ^ (sample as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (step as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent uniform deviations for each vehicle, bounded by
/// `fraction` of the base demand. Deterministic in `(seed, sample, step, vehicle)`.
pub fn sample_variation(
    spec: &VariationSpec,
    ev: &EvParams,
    sample: usize,
    step: usize,
    vehicle_count: usize,
) -> Vec<VehicleDeviation> {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(spec.seed, sample, step));
    (0..vehicle_count)
        .map(|_| {
            let up: f64 = rng.random_range(-1.0..=1.0);
            let uq: f64 = rng.random_range(-1.0..=1.0);
            VehicleDeviation {
                dp_kw: up * spec.fraction * ev.p_kw,
                dq_kvar: uq * spec.fraction * ev.q_kvar.abs(),
            }
        })
        .collect()
}

/// Per-unit injections at step `t`, optionally with one deviation per vehicle.
pub fn snapshot_injections(
    scn: &Scenario,
    t: usize,
    draw: Option<&[VehicleDeviation]>,
) -> Result<InjectionVector> {
    let nodes = vehicle_nodes(scn, t)?;
    if let Some(d) = draw {
        if d.len() != nodes.len() {
            return Err(Error::InvalidInput(format!(
                "{} deviations supplied for {} vehicles",
                d.len(),
                nodes.len()
            )));
        }
    }
    let base = scn.base()?;
    let mut inj = InjectionVector::zeros(scn.road.num_nodes);
    for (v, &node) in nodes.iter().enumerate() {
        if node == 1 {
            continue;
        }
        let dev = draw.map(|d| d[v]).unwrap_or_default();
        let p = scn.ev.p_kw - scn.compensation.pv_kw - dev.dp_kw;
        let q = scn.ev.q_kvar - scn.compensation.onboard_capacitor_kvar - dev.dq_kvar;
        inj.p[node - 1] -= base.power_to_pu(p);
        inj.q[node - 1] -= base.power_to_pu(q);
    }
    Ok(inj)
}
