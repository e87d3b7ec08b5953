//! Closed-form charge-time sweeps over beacon–tag distance.

use crate::error::SimError;
use crate::harvester::{charge_time, harvested_power, ChargeTime, ChargeWindow, HarvesterStage, StorageCapacitor};
use crate::linkbudget::{received_power, Antenna, Beacon, PropagationModel};
use crate::regulations::DutySchedule;
use crate::units::{dbm_to_watts, Distance, Frequency};

/// One isolated beacon–tag link, evaluated at varying distance.
#[derive(Clone, Debug)]
pub struct SweepSetup {
    pub beacon: Beacon,
    pub tag_antenna: Antenna,
    pub stage: HarvesterStage,
    pub capacitor: StorageCapacitor,
    pub model: PropagationModel,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SweepValue {
    Seconds {
        seconds: f64,
        clipped: bool,
    },
    /// Harvester input below its sensitivity floor.
    Never,
    /// Distance inside the propagation model's reference distance.
    NearField,
}

impl SweepValue {
    pub fn seconds(self) -> Option<f64> {
        match self {
            SweepValue::Seconds { seconds, .. } => Some(seconds),
            _ => None,
        }
    }

    pub fn flag(self) -> &'static str {
        match self {
            SweepValue::Seconds { clipped: false, .. } => "ok",
            SweepValue::Seconds { clipped: true, .. } => "clipped",
            SweepValue::Never => "never",
            SweepValue::NearField => "near_field",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub distance_m: f64,
    pub value: SweepValue,
}

/// Evenly spaced distances from `min` to `max` inclusive. Grid points are
/// computed as `min + i·step` and rounded to the nanometre so that decimal
/// steps print cleanly.
pub fn distance_grid(min_m: f64, max_m: f64, step_m: f64) -> Result<Vec<f64>, SimError> {
    if !(step_m > 0.0 && step_m.is_finite()) {
        return Err(SimError::InvalidScenario(format!(
            "distance step {step_m} m must be positive"
        )));
    }
    if !(min_m > 0.0 && max_m >= min_m && max_m.is_finite()) {
        return Err(SimError::InvalidScenario(format!(
            "distance range [{min_m}, {max_m}] m must be positive and ordered"
        )));
    }
    let count = ((max_m - min_m) / step_m + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| ((min_m + i as f64 * step_m) * 1e9).round() / 1e9)
        .collect())
}

fn evaluate(setup: &SweepSetup, distance_m: f64, window: ChargeWindow) -> SweepValue {
    let Ok(d) = Distance::from_meters(distance_m) else {
        return SweepValue::NearField;
    };
    let Ok(rx) = received_power(&setup.beacon, &setup.tag_antenna, d, &setup.model) else {
        return SweepValue::NearField;
    };
    let h = harvested_power(rx, &setup.stage);
    let (from, to) = window.bounds(&setup.capacitor);
    match charge_time(&setup.capacitor, from, to, h.power_w).expect("window bounds are ordered") {
        ChargeTime::Seconds(seconds) => SweepValue::Seconds {
            seconds,
            clipped: h.clipped,
        },
        ChargeTime::Never => SweepValue::Never,
    }
}

/// Continuous-wave charge time at each distance. Duty schedules on the
/// beacon are ignored here; the event-driven engine accounts for them.
pub fn sweep_charge_time(setup: &SweepSetup, distances_m: &[f64], window: ChargeWindow) -> Vec<SweepRow> {
    distances_m
        .iter()
        .map(|&d| SweepRow {
            distance_m: d,
            value: evaluate(setup, d, window),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FamilyRow {
    pub distance_m: f64,
    pub omni_initial: SweepValue,
    pub omni_update: SweepValue,
    pub directional_initial: SweepValue,
    pub directional_update: SweepValue,
}

/// The four-curve family: omnidirectional and directional beacons, each
/// for the initial and update windows.
pub fn charge_time_family(omni: &SweepSetup, directional: &SweepSetup, distances_m: &[f64]) -> Vec<FamilyRow> {
    distances_m
        .iter()
        .map(|&d| FamilyRow {
            distance_m: d,
            omni_initial: evaluate(omni, d, ChargeWindow::Initial),
            omni_update: evaluate(omni, d, ChargeWindow::Update),
            directional_initial: evaluate(directional, d, ChargeWindow::Initial),
            directional_update: evaluate(directional, d, ChargeWindow::Update),
        })
        .collect()
}

/// The four measurement campaigns of the test-room hardware.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProtocolPreset {
    OmniInitial,
    OmniUpdate,
    DirInitial,
    DirUpdate,
}

impl ProtocolPreset {
    pub const ALL: [ProtocolPreset; 4] = [
        ProtocolPreset::OmniInitial,
        ProtocolPreset::OmniUpdate,
        ProtocolPreset::DirInitial,
        ProtocolPreset::DirUpdate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolPreset::OmniInitial => "omni_initial",
            ProtocolPreset::OmniUpdate => "omni_update",
            ProtocolPreset::DirInitial => "dir_initial",
            ProtocolPreset::DirUpdate => "dir_update",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }

    pub fn window(self) -> ChargeWindow {
        match self {
            ProtocolPreset::OmniInitial | ProtocolPreset::DirInitial => ChargeWindow::Initial,
            ProtocolPreset::OmniUpdate | ProtocolPreset::DirUpdate => ChargeWindow::Update,
        }
    }

    pub fn is_directional(self) -> bool {
        matches!(self, ProtocolPreset::DirInitial | ProtocolPreset::DirUpdate)
    }
}

/// Hardware and grid of the measurement campaign.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementProtocol {
    pub d_min_m: f64,
    pub d_max_m: f64,
    pub d_step_m: f64,
    pub repetitions: u32,
    pub frequency_mhz: f64,
    pub omni_erp_dbm: f64,
    pub directional_erp_dbm: f64,
    pub directional_gain_dbi: f64,
    pub capacitance_f: f64,
}

impl Default for MeasurementProtocol {
    fn default() -> Self {
        MeasurementProtocol {
            d_min_m: 0.5,
            d_max_m: 4.0,
            d_step_m: 0.25,
            repetitions: 25,
            frequency_mhz: 865.7,
            omni_erp_dbm: 27.0,
            // amplifier-limited, below the 33 dBm the beamwidth would allow
            directional_erp_dbm: 31.9,
            directional_gain_dbi: 5.0,
            capacitance_f: 39.7e-6,
        }
    }
}

impl MeasurementProtocol {
    pub fn grid(&self) -> Vec<f64> {
        distance_grid(self.d_min_m, self.d_max_m, self.d_step_m).expect("protocol grid is valid")
    }

    pub fn setup(&self, preset: ProtocolPreset) -> SweepSetup {
        let antenna = if preset.is_directional() {
            Antenna::directional(self.directional_gain_dbi, 90.0, 0.0, 1.0).expect("valid patch")
        } else {
            Antenna::dipole(1.0).expect("valid dipole")
        };
        let erp = if preset.is_directional() {
            self.directional_erp_dbm
        } else {
            self.omni_erp_dbm
        };
        let chain = crate::harvester::EfficiencyChain::rfid_868();
        SweepSetup {
            beacon: Beacon::new(
                1,
                [0.0, 0.0, 1.0],
                antenna,
                dbm_to_watts(erp),
                Frequency::from_mhz(self.frequency_mhz).expect("positive frequency"),
                1,
                DutySchedule::continuous(),
            )
            .expect("positive ERP"),
            tag_antenna: Antenna::dipole(chain.eta_d()).expect("valid dipole"),
            stage: HarvesterStage::new(chain),
            capacitor: StorageCapacitor::new(self.capacitance_f, 3.10, 2.8).expect("valid capacitor"),
            model: PropagationModel::new(2.0, crate::linkbudget::MIN_REFERENCE_DISTANCE_M).expect("valid model"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProtocolRow {
    pub distance_m: f64,
    pub model: SweepValue,
    /// Externally supplied mean of the measured repetitions, if any.
    pub measured_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolTable {
    pub preset: ProtocolPreset,
    pub repetitions: u32,
    pub rows: Vec<ProtocolRow>,
}

impl ProtocolTable {
    /// Attach measured means by matching distances to within 1 mm.
    pub fn with_measurements(mut self, measured: &[(f64, f64)]) -> Self {
        for row in &mut self.rows {
            row.measured_s = measured
                .iter()
                .find(|(d, _)| (d - row.distance_m).abs() < 1e-3)
                .map(|&(_, t)| t);
        }
        self
    }

    /// `preset,distance_m,model_s,measured_s,flag`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("preset,distance_m,model_s,measured_s,flag\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.preset.name(),
                r.distance_m,
                r.model.seconds().map(|s| s.to_string()).unwrap_or_default(),
                r.measured_s.map(|s| s.to_string()).unwrap_or_default(),
                r.model.flag()
            ));
        }
        out
    }
}

/// Model charge times on the measurement campaign's distance grid, shaped
/// for side-by-side comparison with measured means.
pub fn replay_measurement_protocol(protocol: &MeasurementProtocol, preset: ProtocolPreset) -> ProtocolTable {
    let setup = protocol.setup(preset);
    let rows = sweep_charge_time(&setup, &protocol.grid(), preset.window())
        .into_iter()
        .map(|r| ProtocolRow {
            distance_m: r.distance_m,
            model: r.value,
            measured_s: None,
        })
        .collect();
    ProtocolTable {
        preset,
        repetitions: protocol.repetitions,
        rows,
    }
}

/// Parse `distance_m,measured_s` rows (header optional).
pub fn parse_measurements_csv(text: &str) -> Result<Vec<(f64, f64)>, SimError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (n == 0 && line.starts_with("distance_m")) {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match cols.as_slice() {
            [d, t] => d.parse::<f64>().ok().zip(t.parse::<f64>().ok()),
            _ => None,
        };
        match parsed {
            Some(pair) => out.push(pair),
            None => {
                return Err(SimError::InvalidScenario(format!(
                    "measurements line {}: expected distance_m,measured_s",
                    n + 1
                )))
            }
        }
    }
    Ok(out)
}
