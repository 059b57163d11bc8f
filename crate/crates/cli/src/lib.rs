//! Command-line front end: reads a scenario file, runs one analysis and
//! writes CSV results plus a `report.json` summary into an output directory.

pub mod error;
pub mod output;
pub mod report;
pub mod scenario;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use electroad::exec::configure_threads;
use electroad::powerflow::VoltageSolution;
use electroad::profile::{
    lower_bound_line, monte_carlo_envelope, simulate_profiles, swing_series, ProfileSeries,
};
use electroad::road::Scenario;
use electroad::stability::{
    collapse_trajectory, critical_length, max_vehicle_count, two_bus_roots, DrivePlan, TwoBusCase,
};
use serde::Deserialize;

pub use error::CliError;
use output::{fmt_num, write_atomic, Table};
use report::{Convergence, CountRow, RunReport};
use scenario::{parse_scenario, ScenarioFile};

pub const THREADS_ENV: &str = "ELECTROAD_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "electroad",
    version,
    about = "Steady-state analysis of electrified roads with moving EV loads"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario JSON; the built-in base case when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Voltage at every bus for every time step.
    Profile {
        #[command(flatten)]
        common: Common,
        /// Add Monte Carlo min/mean/max columns (uses the scenario's variation section).
        #[arg(long)]
        envelope: bool,
        /// Also write the lower-bound line to lower_bound.csv.
        #[arg(long)]
        lower_bound: bool,
    },
    /// Voltage of one bus over time.
    Swing {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bus: usize,
    },
    /// End-bus voltage against road length through the nose.
    CpfLength {
        #[command(flatten)]
        common: Common,
    },
    /// Largest fleet at the far end of a road of the given length.
    CpfCount {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        length_km: f64,
        /// Largest fleet size to try; defaults to one per non-source node.
        #[arg(long)]
        cap: Option<usize>,
    },
    /// Track a fleet driving out past the critical length and back.
    Collapse {
        #[command(flatten)]
        common: Common,
        /// JSON file `{"positions_km": [...]}`.
        #[arg(long)]
        plan: PathBuf,
    },
    /// Closed-form receiving-end voltages of a single line (per-unit inputs).
    TwoBus {
        #[arg(long, allow_negative_numbers = true)]
        p: f64,
        #[arg(long, allow_negative_numbers = true)]
        q: f64,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        x: f64,
        #[arg(long, default_value_t = 1.0)]
        v1: f64,
        /// Optional directory for report.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<Scenario, CliError> {
    match &common.scenario {
        Some(path) => parse_scenario(path),
        None => Ok(Scenario::default()),
    }
}

fn convergence<'a>(solutions: impl IntoIterator<Item = &'a VoltageSolution>) -> Convergence {
    let mut c = Convergence {
        solves: 0,
        max_iterations: 0,
        max_residual: 0.0,
    };
    for s in solutions {
        c.solves += 1;
        c.max_iterations = c.max_iterations.max(s.iterations);
        c.max_residual = c.max_residual.max(s.residual_norm);
    }
    c
}

struct Outputs<'a> {
    dir: &'a Path,
    report: RunReport,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path, command: &str, scn: Option<&Scenario>) -> Self {
        Self {
            dir,
            report: RunReport::new(command, scn.map(ScenarioFile::from_scenario)),
        }
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(self.dir, name, bytes)?;
        self.report.outputs.push(name.to_string());
        Ok(())
    }

    fn finish(mut self) -> Result<RunReport, CliError> {
        self.report.outputs.push("report.json".into());
        write_atomic(self.dir, "report.json", &self.report.to_json())?;
        Ok(self.report)
    }
}

fn profiles(scn: &Scenario) -> Result<ProfileSeries, CliError> {
    simulate_profiles(scn).map_err(CliError::ProfileSolve)
}

fn run_profile(common: &Common, envelope: bool, lower_bound: bool) -> Result<RunReport, CliError> {
    let scn = load(common)?;
    let series = profiles(&scn)?;
    let mut out = Outputs::new(&common.out, "profile", Some(&scn));

    let envelopes = if envelope {
        let spec = scn.variation.unwrap_or_default();
        let with_var = Scenario {
            variation: Some(spec),
            ..scn.clone()
        };
        let steps: Vec<usize> = (1..=scn.time_steps).collect();
        let env = monte_carlo_envelope(&with_var, spec.samples, &steps)
            .map_err(CliError::ProfileSolve)?;
        out.report.headline.envelope_samples = Some(spec.samples);
        Some(env)
    } else {
        None
    };

    let mut header = vec!["time_step", "bus", "voltage_pu"];
    if envelopes.is_some() {
        header.extend(["v_min", "v_mean", "v_max"]);
    }
    let mut table = Table::new(&header);
    for t in 1..=series.steps() {
        for bus in 1..=series.buses() {
            let mut row = vec![
                t.to_string(),
                bus.to_string(),
                fmt_num(series.voltage(t, bus)),
            ];
            if let Some(env) = &envelopes {
                let e = &env[t - 1];
                row.extend([
                    fmt_num(e.min[bus - 1]),
                    fmt_num(e.mean[bus - 1]),
                    fmt_num(e.max[bus - 1]),
                ]);
            }
            table.row(row);
        }
    }
    out.write("profile.csv", &table.into_bytes())?;

    if lower_bound {
        let line = lower_bound_line(&scn, &series).map_err(CliError::Solve)?;
        let mut table = Table::new(&["bus", "bound_pu"]);
        for (i, v) in line.values.iter().enumerate() {
            table.row([(i + 1).to_string(), fmt_num(*v)]);
        }
        out.write("lower_bound.csv", &table.into_bytes())?;
        out.report.headline.i_max_pu = Some(line.i_max);
    }

    let (t, bus, v) = series.minimum();
    out.report.headline.min_voltage_pu = Some(v);
    out.report.headline.min_voltage_at = Some([t, bus]);
    out.report.convergence = Some(convergence(&series.solutions));
    out.finish()
}

fn run_swing(common: &Common, bus: usize) -> Result<RunReport, CliError> {
    let scn = load(common)?;
    if bus == 0 || bus > scn.road.num_nodes {
        return Err(CliError::Usage(format!(
            "--bus must lie in 1..={}",
            scn.road.num_nodes
        )));
    }
    let series = profiles(&scn)?;
    let swing = swing_series(&series, bus).map_err(CliError::Solve)?;
    let mut out = Outputs::new(&common.out, "swing", Some(&scn));
    let mut table = Table::new(&["time_step", "voltage_pu"]);
    for (k, v) in swing.values.iter().enumerate() {
        table.row([(k + 1).to_string(), fmt_num(*v)]);
    }
    out.write("swing.csv", &table.into_bytes())?;
    out.report.headline.swing_bus = Some(bus);
    out.report.headline.swing_peak_to_peak_pu = Some(swing.peak_to_peak());
    out.report.convergence = Some(convergence(&series.solutions));
    out.finish()
}

fn run_cpf_length(common: &Common) -> Result<RunReport, CliError> {
    let scn = load(common)?;
    let crit = critical_length(&scn).map_err(CliError::Solve)?;
    let mut out = Outputs::new(&common.out, "cpf-length", Some(&scn));
    let mut table = Table::new(&["length_km", "voltage_pu", "branch"]);
    for p in &crit.curve.points {
        table.row([
            fmt_num(p.length_km),
            fmt_num(p.end_voltage),
            p.branch.label().to_string(),
        ]);
    }
    out.write("nose_curve.csv", &table.into_bytes())?;
    let h = &mut out.report.headline;
    h.critical_length_km = Some(crit.length_km);
    h.nose_voltage_pu = Some(crit.curve.nose.voltage);
    h.merge_gap_pu = Some(crit.curve.nose.merge_gap);
    h.critical_bracket_km = Some([crit.bracket.0, crit.bracket.1]);
    out.report.convergence = Some(convergence(crit.curve.points.iter().map(|p| &p.solution)));
    out.finish()
}

fn run_cpf_count(
    common: &Common,
    length_km: f64,
    cap: Option<usize>,
) -> Result<RunReport, CliError> {
    let scn = load(common)?;
    if !(length_km.is_finite() && length_km > 0.0) {
        return Err(CliError::Usage(format!(
            "--length-km must be positive, got {length_km}"
        )));
    }
    let room = scn.road.num_nodes - 1;
    let cap = cap.unwrap_or(room);
    if cap == 0 || cap > room {
        return Err(CliError::Usage(format!("--cap must lie in 1..={room}")));
    }
    let count = max_vehicle_count(&scn, length_km, cap).map_err(CliError::Solve)?;
    let mut out = Outputs::new(&common.out, "cpf-count", Some(&scn));
    let h = &mut out.report.headline;
    h.road_length_km = Some(length_km);
    h.max_count = Some(count.max_count);
    h.feasibility = Some(
        count
            .table
            .iter()
            .map(|&(count, feasible)| CountRow { count, feasible })
            .collect(),
    );
    out.finish()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    positions_km: Vec<f64>,
}

pub fn parse_plan(path: &Path) -> Result<DrivePlan, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let file: PlanFile = serde_path_to_error::deserialize(de).map_err(|e| CliError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    let plan = DrivePlan {
        positions_km: file.positions_km,
    };
    plan.validate().map_err(|e| CliError::Unit {
        key: "positions_km".into(),
        message: e.to_string(),
    })?;
    Ok(plan)
}

fn run_collapse(common: &Common, plan_path: &Path) -> Result<RunReport, CliError> {
    let scn = load(common)?;
    let plan = parse_plan(plan_path)?;
    let trip = collapse_trajectory(&scn, &plan).map_err(CliError::Solve)?;
    let mut out = Outputs::new(&common.out, "collapse", Some(&scn));
    let mut table = Table::new(&["step", "position_km", "min_voltage_pu", "branch"]);
    for p in &trip.points {
        table.row([
            p.step.to_string(),
            fmt_num(p.position_km),
            fmt_num(p.min_voltage),
            p.state.label().to_string(),
        ]);
    }
    out.write("collapse.csv", &table.into_bytes())?;
    let h = &mut out.report.headline;
    h.collapsed = Some(trip.collapsed_at.is_some());
    h.crossed_at_step = trip.crossed_at;
    h.collapsed_at_step = trip.collapsed_at;
    out.report.convergence = Some(convergence(
        trip.points.iter().filter_map(|p| p.solution.as_ref()),
    ));
    out.finish()
}

fn run_two_bus(c: TwoBusCase, out_dir: Option<&Path>) -> Result<RunReport, CliError> {
    let finite = [c.v1, c.p, c.q, c.r, c.x].iter().all(|v| v.is_finite());
    if !finite || c.v1 <= 0.0 || c.r < 0.0 || c.x < 0.0 || (c.r == 0.0 && c.x == 0.0) {
        return Err(CliError::Usage(
            "two-bus needs finite inputs, v1 > 0 and a non-zero, non-negative line impedance"
                .into(),
        ));
    }
    let mut report = RunReport::new("two-bus", None);
    report.headline.discriminant = Some(c.discriminant());
    match two_bus_roots(&c) {
        Ok((hi, lo)) => {
            println!("u_high={} u_low={}", fmt_num(hi), fmt_num(lo));
            println!("v_high={} v_low={}", fmt_num(hi.sqrt()), fmt_num(lo.sqrt()));
            report.headline.u_high = Some(hi);
            report.headline.u_low = Some(lo);
            report.headline.v_high_pu = Some(hi.sqrt());
            report.headline.v_low_pu = Some(lo.sqrt());
        }
        Err(e) => println!("NoSolution: {e}"),
    }
    if let Some(dir) = out_dir {
        let out = Outputs { dir, report };
        return out.finish();
    }
    Ok(report)
}

pub fn execute(cli: &Cli) -> Result<RunReport, CliError> {
    match &cli.command {
        Command::Profile {
            common,
            envelope,
            lower_bound,
        } => run_profile(common, *envelope, *lower_bound),
        Command::Swing { common, bus } => run_swing(common, *bus),
        Command::CpfLength { common } => run_cpf_length(common),
        Command::CpfCount {
            common,
            length_km,
            cap,
        } => run_cpf_count(common, *length_km, *cap),
        Command::Collapse { common, plan } => run_collapse(common, plan),
        Command::TwoBus {
            p,
            q,
            r,
            x,
            v1,
            out,
        } => run_two_bus(
            TwoBusCase {
                v1: *v1,
                p: *p,
                q: *q,
                r: *r,
                x: *x,
            },
            out.as_deref(),
        ),
    }
}

fn apply_thread_env() -> Result<(), CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(raw) => {
            let n: usize = raw.trim().parse().map_err(|_| {
                CliError::Usage(format!(
                    "{THREADS_ENV} must be a non-negative integer, got {raw:?}"
                ))
            })?;
            configure_threads(n);
            Ok(())
        }
        Err(_) => Ok(()),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = apply_thread_env().and_then(|_| execute(&cli));
    match result {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
