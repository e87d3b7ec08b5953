//! Command implementations behind the `dualwpt` binary.
//!
//! Exit codes: 0 success or compliant, 1 a check did not pass (plan not
//! compliant, budget infeasible), 2 invalid input, 3 I/O failure.

// Negated comparisons are used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use dualwpt_core::config::{LoadedScenario, PlanConfig, ScenarioConfig, TagBudget, TagBudgetConfig};
use dualwpt_core::error::ConfigError;
use dualwpt_core::harvester::{
    charge_time, harvested_power, max_coldstart_distance, ChargeTime, ChargeWindow, ColdStartRange, EfficiencyChain,
    HarvesterStage, StorageCapacitor,
};
use dualwpt_core::linkbudget::{received_power, Antenna, Beacon, PropagationModel};
use dualwpt_core::regulations::{check_plan, DutySchedule, TransmissionPlan};
use dualwpt_core::sim::{
    self, charge_time_family, distance_grid, replay_measurement_protocol, sweep_charge_time, SweepSetup, SweepValue,
};
use dualwpt_core::tagmodel::{fix_energy, storage_feasible};
use dualwpt_core::units::{dbm_to_watts, Distance, Frequency};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_IO: i32 = 3;

pub mod presets {
    //! Configuration files bundled into the binary.

    pub const ALL: &[(&str, &str)] = &[
        ("single_beacon_5m", include_str!("../presets/single_beacon_5m.scenario")),
        (
            "techtile_measured",
            include_str!("../presets/techtile_measured.scenario"),
        ),
        ("omni_868", include_str!("../presets/omni_868.plan")),
        ("omni_2450", include_str!("../presets/omni_2450.plan")),
        ("boost_2450", include_str!("../presets/boost_2450.plan")),
        ("reference_tag", include_str!("../presets/reference_tag.budget")),
    ];

    pub fn get(name: &str) -> Option<&'static str> {
        ALL.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { path, source } => CliError::Io {
                path: path.into(),
                source,
            },
            other => CliError::Input(other.to_string()),
        }
    }
}

fn input<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Input(format!("{context}: {e}"))
}

#[derive(Debug, Parser)]
#[command(
    name = "dualwpt",
    version,
    about = "Charge-time sweeps, compliance checks, energy budgets and room simulations for RF-powered positioning tags"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form charge time over a distance grid, as CSV.
    Sweep(SweepArgs),
    /// Check a transmission plan against the band regulations.
    Regcheck(RegcheckArgs),
    /// Run the event-driven room simulation.
    Simulate(SimulateArgs),
    /// Storage and per-fix energy budget of a tag.
    Budget(BudgetArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WindowArg {
    Initial,
    Update,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ChainArg {
    Rfid868,
    Ism2g4,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SweepArgs {
    /// Beacon ERP.
    #[arg(long, default_value_t = 27.0)]
    pub erp_dbm: f64,
    #[arg(long, default_value_t = 865.7)]
    pub freq_mhz: f64,
    #[arg(long, value_enum, default_value_t = WindowArg::Update)]
    pub window: WindowArg,
    #[arg(long, default_value_t = 0.5)]
    pub d_min: f64,
    #[arg(long, default_value_t = 8.0)]
    pub d_max: f64,
    #[arg(long, default_value_t = 0.25)]
    pub d_step: f64,
    #[arg(long, value_enum, default_value_t = ChainArg::Rfid868)]
    pub chain: ChainArg,
    /// Output CSV path; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Beacon antenna gain; a half-wave dipole when omitted.
    #[arg(long)]
    pub tx_gain_dbi: Option<f64>,
    #[arg(long, default_value_t = dualwpt_core::units::DIPOLE_GAIN_DBI)]
    pub rx_gain_dbi: f64,
    #[arg(long, default_value_t = 22.0)]
    pub capacitance_uf: f64,
    #[arg(long, default_value_t = 3.10)]
    pub v_chrdy_v: f64,
    #[arg(long, default_value_t = 2.8)]
    pub v_ovdis_v: f64,
    /// Voltage the initial window charges to; defaults to v_chrdy.
    #[arg(long)]
    pub v_initial_target_v: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    pub path_loss_exponent: f64,
    #[arg(long, default_value_t = 0.25)]
    pub ref_distance_m: f64,
    /// ERP of a directional boost beacon. When given, the output is the
    /// four-curve family (omni and boost, initial and update).
    #[arg(long)]
    pub boost_erp_dbm: Option<f64>,
    #[arg(long, default_value_t = 5.0)]
    pub boost_gain_dbi: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportFormat {
    Text,
    Csv,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["plan", "preset"])))]
pub struct RegcheckArgs {
    pub plan: Option<PathBuf>,
    /// Use a bundled plan instead of a file.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub format: ReportFormat,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["scenario", "preset"])))]
pub struct SimulateArgs {
    pub scenario: Option<PathBuf>,
    /// Use a bundled scenario instead of a file.
    #[arg(long)]
    pub preset: Option<String>,
    /// Directory for events.csv, summary.csv and protocol.csv.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["config", "preset"])))]
pub struct BudgetArgs {
    pub config: Option<PathBuf>,
    /// Use a bundled tag configuration instead of a file.
    #[arg(long)]
    pub preset: Option<String>,
}

/// Parse `args` (including the program name) and run the command.
pub fn execute<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    let result = match &cli.command {
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Regcheck(a) => cmd_regcheck(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Budget(a) => cmd_budget(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn stdout_err(e: std::io::Error) -> CliError {
    CliError::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Text of a bundled preset or a file, plus the directory relative paths
/// resolve against.
fn source_text(path: Option<&Path>, preset: Option<&str>) -> Result<(String, Option<PathBuf>), CliError> {
    match (path, preset) {
        (_, Some(name)) => presets::get(name).map(|t| (t.to_string(), None)).ok_or_else(|| {
            let names: Vec<&str> = presets::ALL.iter().map(|(n, _)| *n).collect();
            CliError::Input(format!("unknown preset '{name}' (available: {})", names.join(", ")))
        }),
        (Some(p), None) => {
            let text = std::fs::read_to_string(p).map_err(|source| CliError::Io {
                path: p.to_path_buf(),
                source,
            })?;
            Ok((text, p.parent().map(Path::to_path_buf)))
        }
        (None, None) => Err(CliError::Input("no input given".into())),
    }
}

fn positive(flag: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Input(format!("{flag} must be positive, got {v}")))
    }
}

fn sweep_setup(a: &SweepArgs, erp_dbm: f64, antenna: Antenna) -> Result<SweepSetup, CliError> {
    let chain = match a.chain {
        ChainArg::Rfid868 => EfficiencyChain::rfid_868(),
        ChainArg::Ism2g4 => EfficiencyChain::ism_2g4(),
    };
    let mut capacitor = StorageCapacitor::new(a.capacitance_uf * 1e-6, a.v_chrdy_v, a.v_ovdis_v)
        .map_err(input("--capacitance-uf/--v-chrdy-v/--v-ovdis-v"))?;
    if let Some(v) = a.v_initial_target_v {
        capacitor = capacitor
            .with_initial_target(v)
            .map_err(input("--v-initial-target-v"))?;
    }
    Ok(SweepSetup {
        beacon: Beacon::new(
            1,
            [0.0; 3],
            antenna,
            dbm_to_watts(erp_dbm),
            Frequency::from_mhz(a.freq_mhz).map_err(input("--freq-mhz"))?,
            1,
            DutySchedule::continuous(),
        )
        .map_err(input("--erp-dbm"))?,
        tag_antenna: Antenna::omnidirectional(a.rx_gain_dbi, chain.eta_d()).map_err(input("--rx-gain-dbi"))?,
        stage: HarvesterStage::new(chain),
        capacitor,
        model: PropagationModel::new(a.path_loss_exponent, a.ref_distance_m)
            .map_err(input("--path-loss-exponent/--ref-distance-m"))?,
    })
}

fn cell(v: SweepValue) -> String {
    v.seconds().map(|s| s.to_string()).unwrap_or_default()
}

pub fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    positive("--d-step", a.d_step)?;
    positive("--d-min", a.d_min)?;
    positive("--freq-mhz", a.freq_mhz)?;
    positive("--capacitance-uf", a.capacitance_uf)?;
    if !(a.d_max >= a.d_min) {
        return Err(CliError::Input(format!(
            "--d-max {} is below --d-min {}",
            a.d_max, a.d_min
        )));
    }
    let grid = distance_grid(a.d_min, a.d_max, a.d_step).map_err(input("--d-min/--d-max/--d-step"))?;
    let omni_antenna = match a.tx_gain_dbi {
        Some(g) => Antenna::omnidirectional(g, 1.0),
        None => Antenna::dipole(1.0),
    }
    .map_err(input("--tx-gain-dbi"))?;
    let omni = sweep_setup(a, a.erp_dbm, omni_antenna)?;

    let csv = match a.boost_erp_dbm {
        None => {
            let window = match a.window {
                WindowArg::Initial => ChargeWindow::Initial,
                WindowArg::Update => ChargeWindow::Update,
            };
            let mut csv = String::from("distance_m,charge_time_s,flag\n");
            for row in sweep_charge_time(&omni, &grid, window) {
                csv.push_str(&format!(
                    "{},{},{}\n",
                    row.distance_m,
                    cell(row.value),
                    row.value.flag()
                ));
            }
            csv
        }
        Some(boost_erp) => {
            let patch = Antenna::directional(a.boost_gain_dbi, 90.0, 0.0, 1.0).map_err(input("--boost-gain-dbi"))?;
            let boost = sweep_setup(a, boost_erp, patch)?;
            let mut csv = String::from("distance_m,curve,charge_time_s,flag\n");
            for r in charge_time_family(&omni, &boost, &grid) {
                for (name, v) in [
                    ("omni_initial", r.omni_initial),
                    ("omni_update", r.omni_update),
                    ("dir_initial", r.directional_initial),
                    ("dir_update", r.directional_update),
                ] {
                    csv.push_str(&format!("{},{},{},{}\n", r.distance_m, name, cell(v), v.flag()));
                }
            }
            csv
        }
    };
    match &a.out {
        Some(path) => {
            write_file(path, &csv)?;
            writeln!(out, "wrote {} rows to {}", csv.lines().count() - 1, path.display()).map_err(stdout_err)?;
        }
        None => out.write_all(csv.as_bytes()).map_err(stdout_err)?,
    }
    Ok(EXIT_OK)
}

pub fn cmd_regcheck(a: &RegcheckArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let (text, _) = source_text(a.plan.as_deref(), a.preset.as_deref())?;
    let plan: TransmissionPlan = PlanConfig::from_toml_str(&text)?.to_plan()?;
    let report = check_plan(&plan);
    let rendered = match a.format {
        ReportFormat::Text => report.to_text(),
        ReportFormat::Csv => report.to_csv(),
    };
    out.write_all(rendered.as_bytes()).map_err(stdout_err)?;
    Ok(if report.compliant { EXIT_OK } else { EXIT_CHECK_FAILED })
}

/// Load a scenario from a file or a bundled preset.
pub fn load_scenario(path: Option<&Path>, preset: Option<&str>) -> Result<LoadedScenario, CliError> {
    let (text, base) = source_text(path, preset)?;
    Ok(ScenarioConfig::from_toml_str(&text)?.resolve(base.as_deref())?)
}

pub fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let loaded = load_scenario(a.scenario.as_deref(), a.preset.as_deref())?;
    let result = sim::run(&loaded.scenario).map_err(|e| CliError::Input(e.to_string()))?;
    let mut summary = sim::summary_text(&result);

    let protocol_csv = loaded.protocol.as_ref().map(|req| {
        let mut csv = String::new();
        for (preset, measured) in &req.presets {
            let table = replay_measurement_protocol(&req.protocol, *preset).with_measurements(measured);
            summary.push_str(&format!(
                "protocol {}: {} distances from {} m to {} m, {} repetitions per point\n",
                preset.name(),
                table.rows.len(),
                req.protocol.d_min_m,
                req.protocol.d_max_m,
                table.repetitions
            ));
            let body = table.to_csv();
            let skip = if csv.is_empty() { 0 } else { 1 };
            for line in body.lines().skip(skip) {
                csv.push_str(line);
                csv.push('\n');
            }
        }
        csv
    });

    if let Some(dir) = &a.out_dir {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.clone(),
            source,
        })?;
        write_file(&dir.join("events.csv"), &sim::events_csv(&result))?;
        write_file(&dir.join("summary.csv"), &sim::summary_csv(&result))?;
        let mut written = vec!["events.csv", "summary.csv"];
        if let Some(csv) = &protocol_csv {
            write_file(&dir.join("protocol.csv"), csv)?;
            written.push("protocol.csv");
        }
        summary.push_str(&format!("wrote {} to {}\n", written.join(", "), dir.display()));
    }
    out.write_all(summary.as_bytes()).map_err(stdout_err)?;
    Ok(EXIT_OK)
}

/// Plain-text budget report and whether the tag is feasible.
pub fn budget_report(b: &TagBudget) -> (String, bool) {
    let eta_ldo = b.stage.chain.eta_ldo();
    let f = storage_feasible(&b.capacitor, &b.profile, eta_ldo);
    let mut text = format!(
        "storage {:.1} µJ, fix {:.1} µJ, {}, margin {:.1} µJ\n",
        f.stored_j * 1e6,
        fix_energy(&b.profile) * 1e6,
        if f.feasible { "feasible" } else { "infeasible" },
        f.margin_j * 1e6
    );
    text.push_str(&format!(
        "window {:.2} V to {:.2} V on {:.1} µF; usable after LDO (eta {}) {:.2} µJ; {} rangings of {:.2} µJ\n",
        b.capacitor.v_ovdis(),
        b.capacitor.v_chrdy(),
        b.capacitor.capacitance_f() * 1e6,
        eta_ldo,
        f.usable_j * 1e6,
        b.profile.rangings_per_fix(),
        b.profile.e_tag_j() * 1e6
    ));
    let range = match max_coldstart_distance(&b.beacon, &b.tag_antenna, &b.stage, &b.model) {
        ColdStartRange::Meters(d) => format!("{d:.2} m"),
        ColdStartRange::Unbounded => "unbounded".to_string(),
    };
    text.push_str(&format!(
        "max cold-start distance {} ({:.2} dBm ERP at {} MHz)\n",
        range,
        b.beacon.erp.dbm(),
        b.beacon.frequency.mhz()
    ));
    if let Some(d) = b.distance_m {
        let line = match Distance::from_meters(d)
            .map_err(|e| e.to_string())
            .and_then(|dist| received_power(&b.beacon, &b.tag_antenna, dist, &b.model).map_err(|e| e.to_string()))
        {
            Ok(rx) => {
                let p = harvested_power(rx, &b.stage).power_w;
                let show = |w: ChargeWindow| {
                    let (from, to) = w.bounds(&b.capacitor);
                    match charge_time(&b.capacitor, from, to, p) {
                        Ok(ChargeTime::Seconds(s)) => format!("{s:.2} s"),
                        _ => "never".to_string(),
                    }
                };
                format!(
                    "at {d} m: received {:.2} dBm, harvested {:.3} µW, initial charge {} (0 V to {:.2} V), update {}\n",
                    rx.dbm(),
                    p * 1e6,
                    show(ChargeWindow::Initial),
                    b.capacitor.v_initial_target(),
                    show(ChargeWindow::Update)
                )
            }
            Err(e) => format!("at {d} m: {e}\n"),
        };
        text.push_str(&line);
    }
    (text, f.feasible)
}

pub fn cmd_budget(a: &BudgetArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let (text, base) = source_text(a.config.as_deref(), a.preset.as_deref())?;
    let budget = TagBudgetConfig::from_toml_str(&text)?.resolve(base.as_deref())?;
    let (report, feasible) = budget_report(&budget);
    out.write_all(report.as_bytes()).map_err(stdout_err)?;
    Ok(if feasible { EXIT_OK } else { EXIT_CHECK_FAILED })
}
