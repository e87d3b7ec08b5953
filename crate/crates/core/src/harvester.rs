//! Receive-side energy pipeline: antenna efficiency, RF-to-DC conversion,
//! boost converter and storage capacitor.
//!
//! The chain order is `η_d → η_rf → η_b → η_c` into the capacitor. The LDO
//! efficiency `η_LDO` belongs to the load path and is applied when stored
//! energy is spent, not while charging.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::HarvestError;
use crate::linkbudget::{Antenna, Beacon, PropagationModel};
use crate::units::{dbm_to_watts, wavelength, Power};

/// Default harvester input sensitivity window, dBm.
pub const SENSITIVITY_MIN_DBM: f64 = -19.0;
pub const SENSITIVITY_MAX_DBM: f64 = 10.0;

/// Horizon beyond which a cold-start range is reported as unbounded.
pub const COLDSTART_HORIZON_M: f64 = 10_000.0;

/// Piecewise-linear RF-to-DC efficiency over harvester input power (dBm).
/// Flat beyond the first and last points.
#[derive(Clone, Debug, PartialEq)]
pub struct EfficiencyCurve {
    points: Vec<(f64, f64)>,
}

impl EfficiencyCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, HarvestError> {
        if points.is_empty() {
            return Err(HarvestError::Curve("curve needs at least one point".into()));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(HarvestError::Curve(format!(
                    "input_dbm must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        for &(x, eta) in &points {
            if !x.is_finite() {
                return Err(HarvestError::Curve(format!("input_dbm {x} is not finite")));
            }
            if !(eta > 0.0 && eta < 1.0) {
                return Err(HarvestError::Curve(format!("eta_rf {eta} at {x} dBm outside (0, 1)")));
            }
        }
        Ok(EfficiencyCurve { points })
    }

    pub fn flat(eta: f64) -> Result<Self, HarvestError> {
        Self::new(vec![(-10.0, eta)])
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn at(&self, input_dbm: f64) -> f64 {
        let pts = &self.points;
        let (first, last) = (pts[0], pts[pts.len() - 1]);
        if input_dbm <= first.0 || input_dbm.is_nan() {
            return first.1;
        }
        if input_dbm >= last.0 {
            return last.1;
        }
        let i = pts.partition_point(|&(x, _)| x <= input_dbm);
        let (x0, y0) = pts[i - 1];
        let (x1, y1) = pts[i];
        y0 + (y1 - y0) * (input_dbm - x0) / (x1 - x0)
    }

    pub fn is_non_decreasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].1 >= w[0].1)
    }

    /// Parse `input_dbm,eta_rf` rows. A header row is optional; blank lines
    /// and `#` comments are skipped.
    pub fn from_csv_str(text: &str) -> Result<Self, HarvestError> {
        let mut points = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (a, b) = match (cols.next(), cols.next(), cols.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => {
                    return Err(HarvestError::Curve(format!(
                        "line {}: expected two columns",
                        lineno + 1
                    )))
                }
            };
            if points.is_empty() && a == "input_dbm" && b == "eta_rf" {
                continue;
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| HarvestError::Curve(format!("line {}: '{s}' is not a number", lineno + 1)))
            };
            points.push((parse(a)?, parse(b)?));
        }
        Self::new(points)
    }

    pub fn from_csv_file(path: &Path) -> Result<Self, HarvestError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| HarvestError::Curve(format!("{}: {e}", path.display())))?;
        Self::from_csv_str(&text)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EfficiencyChain {
    eta_d: f64,
    eta_rf: EfficiencyCurve,
    eta_b: f64,
    eta_ldo: f64,
    eta_c: f64,
}

fn check_eta(name: &'static str, value: f64) -> Result<f64, HarvestError> {
    if value > 0.0 && value <= 1.0 {
        Ok(value)
    } else {
        Err(HarvestError::Efficiency { name, value })
    }
}

impl EfficiencyChain {
    pub fn new(
        eta_d: f64,
        eta_rf: EfficiencyCurve,
        eta_b: f64,
        eta_ldo: f64,
        eta_c: f64,
    ) -> Result<Self, HarvestError> {
        Ok(EfficiencyChain {
            eta_d: check_eta("eta_d", eta_d)?,
            eta_rf,
            eta_b: check_eta("eta_b", eta_b)?,
            eta_ldo: check_eta("eta_ldo", eta_ldo)?,
            eta_c: check_eta("eta_c", eta_c)?,
        })
    }

    /// 868 MHz receiver, characterised at -10 dBm.
    pub fn rfid_868() -> Self {
        Self::new(0.7517, EfficiencyCurve::flat(0.3778).unwrap(), 0.7380, 0.7407, 0.99).unwrap()
    }

    /// 2.4 GHz receiver, characterised at -10 dBm.
    pub fn ism_2g4() -> Self {
        Self::new(0.80, EfficiencyCurve::flat(0.1413).unwrap(), 0.7380, 0.7407, 0.99).unwrap()
    }

    pub fn eta_d(&self) -> f64 {
        self.eta_d
    }

    pub fn eta_rf(&self) -> &EfficiencyCurve {
        &self.eta_rf
    }

    pub fn eta_b(&self) -> f64 {
        self.eta_b
    }

    pub fn eta_ldo(&self) -> f64 {
        self.eta_ldo
    }

    pub fn eta_c(&self) -> f64 {
        self.eta_c
    }

    pub fn with_eta_d(mut self, eta: f64) -> Result<Self, HarvestError> {
        self.eta_d = check_eta("eta_d", eta)?;
        Ok(self)
    }

    pub fn with_eta_rf(mut self, curve: EfficiencyCurve) -> Self {
        self.eta_rf = curve;
        self
    }

    pub fn with_eta_b(mut self, eta: f64) -> Result<Self, HarvestError> {
        self.eta_b = check_eta("eta_b", eta)?;
        Ok(self)
    }

    pub fn with_eta_ldo(mut self, eta: f64) -> Result<Self, HarvestError> {
        self.eta_ldo = check_eta("eta_ldo", eta)?;
        Ok(self)
    }

    pub fn with_eta_c(mut self, eta: f64) -> Result<Self, HarvestError> {
        self.eta_c = check_eta("eta_c", eta)?;
        Ok(self)
    }

    /// Received power to capacitor power, `η_d·η_rf·η_b·η_c`, with `η_rf`
    /// evaluated at the given harvester input power.
    pub fn charging_multiplier(&self, input_dbm: f64) -> f64 {
        self.eta_d * self.eta_rf.at(input_dbm) * self.eta_b * self.eta_c
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HarvesterStage {
    pub chain: EfficiencyChain,
    sensitivity_min: Power,
    sensitivity_max: Power,
    /// Channels the stage's matching network is tuned to.
    pub tuned_channels: BTreeSet<u8>,
}

impl HarvesterStage {
    /// A stage with the default sensitivity window, tuned to all four
    /// 868 MHz high-power channels.
    pub fn new(chain: EfficiencyChain) -> Self {
        HarvesterStage {
            chain,
            sensitivity_min: dbm_to_watts(SENSITIVITY_MIN_DBM),
            sensitivity_max: dbm_to_watts(SENSITIVITY_MAX_DBM),
            tuned_channels: (1..=4).collect(),
        }
    }

    pub fn with_sensitivity(mut self, min: Power, max: Power) -> Result<Self, HarvestError> {
        if !(min.watts() < max.watts()) {
            return Err(HarvestError::Stage(format!(
                "sensitivity_min {min} must be below sensitivity_max {max}"
            )));
        }
        self.sensitivity_min = min;
        self.sensitivity_max = max;
        Ok(self)
    }

    pub fn tuned_to<I: IntoIterator<Item = u8>>(mut self, channels: I) -> Self {
        self.tuned_channels = channels.into_iter().collect();
        self
    }

    pub fn sensitivity_min(&self) -> Power {
        self.sensitivity_min
    }

    pub fn sensitivity_max(&self) -> Power {
        self.sensitivity_max
    }

    pub fn hears(&self, channel: u8) -> bool {
        self.tuned_channels.contains(&channel)
    }
}

/// Power delivered into the storage capacitor, with window flags.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Harvest {
    pub power_w: f64,
    /// Input exceeded the sensitivity maximum; power computed at the maximum.
    pub clipped: bool,
    /// Input below the sensitivity minimum; nothing harvested.
    pub below_sensitivity: bool,
}

impl Harvest {
    pub const NONE: Harvest = Harvest {
        power_w: 0.0,
        clipped: false,
        below_sensitivity: false,
    };
}

/// Run received power through one harvester stage. The sensitivity window
/// applies at the harvester input, after the antenna efficiency.
pub fn harvested_power(p_rx: Power, stage: &HarvesterStage) -> Harvest {
    let chain = &stage.chain;
    let p_in = p_rx.watts() * chain.eta_d;
    if p_in < stage.sensitivity_min.watts() || p_in == 0.0 {
        return Harvest {
            power_w: 0.0,
            clipped: false,
            below_sensitivity: p_in < stage.sensitivity_min.watts(),
        };
    }
    let (p_in, clipped) = if p_in > stage.sensitivity_max.watts() {
        (stage.sensitivity_max.watts(), true)
    } else {
        (p_in, false)
    };
    let input_dbm = 10.0 * (p_in * 1e3).log10();
    Harvest {
        power_w: p_in * chain.eta_rf.at(input_dbm) * chain.eta_b * chain.eta_c,
        clipped,
        below_sensitivity: false,
    }
}

/// Sum of per-stage harvested power into one shared capacitor.
pub fn combine_stages(stages: &[HarvesterStage], per_stage_rx: &[Power]) -> Result<Harvest, HarvestError> {
    if stages.len() != per_stage_rx.len() {
        return Err(HarvestError::LengthMismatch {
            stages: stages.len(),
            powers: per_stage_rx.len(),
        });
    }
    Ok(stages
        .iter()
        .zip(per_stage_rx)
        .map(|(stage, &rx)| harvested_power(rx, stage))
        .fold(Harvest::NONE, |acc, h| Harvest {
            power_w: acc.power_w + h.power_w,
            clipped: acc.clipped || h.clipped,
            below_sensitivity: acc.below_sensitivity || h.below_sensitivity,
        }))
}

/// Storage capacitor with its charge-ready / over-discharge window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StorageCapacitor {
    capacitance_f: f64,
    v_chrdy: f64,
    v_ovdis: f64,
    /// Target voltage of the initial (cold) charge. Defaults to `v_chrdy`.
    v_initial_target: f64,
    /// Voltage the capacitor is clamped at while charging.
    v_ceiling: f64,
    pub v_now: f64,
}

impl StorageCapacitor {
    /// `v_ovdis == v_chrdy` is accepted as a degenerate, zero-energy window.
    pub fn new(capacitance_f: f64, v_chrdy: f64, v_ovdis: f64) -> Result<Self, HarvestError> {
        if !(capacitance_f > 0.0 && capacitance_f.is_finite()) {
            return Err(HarvestError::Capacitor(format!(
                "capacitance {capacitance_f} F must be positive"
            )));
        }
        if !(v_ovdis >= 0.0 && v_ovdis <= v_chrdy && v_chrdy.is_finite()) {
            return Err(HarvestError::Capacitor(format!(
                "need 0 <= v_ovdis ({v_ovdis} V) <= v_chrdy ({v_chrdy} V)"
            )));
        }
        Ok(StorageCapacitor {
            capacitance_f,
            v_chrdy,
            v_ovdis,
            v_initial_target: v_chrdy,
            v_ceiling: v_chrdy,
            v_now: 0.0,
        })
    }

    /// 22 µF, 3.10 V / 2.8 V.
    pub fn reference() -> Self {
        Self::new(22e-6, 3.10, 2.8).unwrap()
    }

    /// 39.7 µF capacitor of the measured hardware, same window.
    pub fn measured_setup() -> Self {
        Self::new(39.7e-6, 3.10, 2.8).unwrap()
    }

    pub fn with_initial_target(mut self, v: f64) -> Result<Self, HarvestError> {
        if !(v > 0.0 && v.is_finite()) {
            return Err(HarvestError::Capacitor(format!(
                "initial charge target {v} V must be positive"
            )));
        }
        self.v_initial_target = v;
        Ok(self)
    }

    pub fn with_ceiling(mut self, v: f64) -> Result<Self, HarvestError> {
        if !(v >= self.v_chrdy && v.is_finite()) {
            return Err(HarvestError::Capacitor(format!(
                "ceiling {v} V must be at least v_chrdy {} V",
                self.v_chrdy
            )));
        }
        self.v_ceiling = v;
        Ok(self)
    }

    pub fn with_voltage(mut self, v: f64) -> Result<Self, HarvestError> {
        if !(v >= 0.0 && v <= self.v_ceiling) {
            return Err(HarvestError::Capacitor(format!(
                "voltage {v} V outside [0, {}] V",
                self.v_ceiling
            )));
        }
        self.v_now = v;
        Ok(self)
    }

    pub fn capacitance_f(&self) -> f64 {
        self.capacitance_f
    }

    pub fn v_chrdy(&self) -> f64 {
        self.v_chrdy
    }

    pub fn v_ovdis(&self) -> f64 {
        self.v_ovdis
    }

    pub fn v_initial_target(&self) -> f64 {
        self.v_initial_target
    }

    pub fn v_ceiling(&self) -> f64 {
        self.v_ceiling
    }

    /// Energy currently held, `C·v²/2`.
    pub fn stored_energy_j(&self) -> f64 {
        0.5 * self.capacitance_f * self.v_now * self.v_now
    }

    /// Voltage reached after adding `energy_j` to the current charge,
    /// before clamping.
    pub fn voltage_after(&self, energy_j: f64) -> f64 {
        (self.v_now * self.v_now + 2.0 * energy_j / self.capacitance_f).sqrt()
    }

    /// Usable energy of one discharge window after LDO losses.
    pub fn window_energy_j(&self) -> f64 {
        0.5 * self.capacitance_f * (self.v_chrdy * self.v_chrdy - self.v_ovdis * self.v_ovdis)
    }
}

/// `C·(v_to² − v_from²)/2`.
pub fn storage_energy(cap: &StorageCapacitor, v_from: f64, v_to: f64) -> Result<f64, HarvestError> {
    if !(v_from >= 0.0 && v_to >= v_from) {
        return Err(HarvestError::ReversedWindow {
            from_v: v_from,
            to_v: v_to,
        });
    }
    Ok(0.5 * cap.capacitance_f * (v_to * v_to - v_from * v_from))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChargeTime {
    Seconds(f64),
    /// No harvested power; the capacitor never reaches the target.
    Never,
}

impl ChargeTime {
    pub fn seconds(self) -> Option<f64> {
        match self {
            ChargeTime::Seconds(s) => Some(s),
            ChargeTime::Never => None,
        }
    }
}

/// Which part of the capacitor swing a charge-time figure refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChargeWindow {
    /// 0 V to the initial charge target.
    Initial,
    /// `v_ovdis` to `v_chrdy`.
    Update,
}

impl ChargeWindow {
    pub fn bounds(self, cap: &StorageCapacitor) -> (f64, f64) {
        match self {
            ChargeWindow::Initial => (0.0, cap.v_initial_target),
            ChargeWindow::Update => (cap.v_ovdis, cap.v_chrdy),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ChargeWindow::Initial => "initial",
            ChargeWindow::Update => "update",
        }
    }
}

/// Constant-power charge time between two voltages.
pub fn charge_time(cap: &StorageCapacitor, v_from: f64, v_to: f64, p_harv_w: f64) -> Result<ChargeTime, HarvestError> {
    let energy = storage_energy(cap, v_from, v_to)?;
    if energy == 0.0 {
        return Ok(ChargeTime::Seconds(0.0));
    }
    if !(p_harv_w > 0.0) {
        return Ok(ChargeTime::Never);
    }
    Ok(ChargeTime::Seconds(energy / p_harv_w))
}

/// One piece of a piecewise-constant harvested-power profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerSegment {
    pub power_w: f64,
    pub duration_s: f64,
}

/// Piecewise-constant harvested power. A periodic profile repeats; a
/// one-shot profile is zero after its last segment.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerProfile {
    segments: Vec<PowerSegment>,
    periodic: bool,
}

impl PowerProfile {
    pub fn new(segments: Vec<PowerSegment>, periodic: bool) -> Result<Self, HarvestError> {
        for s in &segments {
            if !(s.power_w >= 0.0) {
                return Err(HarvestError::NegativeSegment(s.power_w));
            }
            if !(s.duration_s >= 0.0 && s.duration_s.is_finite()) {
                return Err(HarvestError::Stage(format!(
                    "segment duration {} s must be non-negative",
                    s.duration_s
                )));
            }
        }
        if periodic && segments.iter().map(|s| s.duration_s).sum::<f64>() <= 0.0 {
            return Err(HarvestError::Stage("periodic profile needs a positive period".into()));
        }
        Ok(PowerProfile { segments, periodic })
    }

    pub fn constant(power_w: f64) -> Result<Self, HarvestError> {
        Self::new(
            vec![PowerSegment {
                power_w,
                duration_s: 1.0,
            }],
            true,
        )
    }

    /// `power_w` while on, nothing while off, repeating.
    pub fn gated(power_w: f64, on_s: f64, off_s: f64) -> Result<Self, HarvestError> {
        Self::new(
            vec![
                PowerSegment {
                    power_w,
                    duration_s: on_s,
                },
                PowerSegment {
                    power_w: 0.0,
                    duration_s: off_s,
                },
            ],
            true,
        )
    }

    /// Walk the profile from t = 0 for `duration_s`, yielding segments
    /// truncated to the horizon. Zero-length segments are skipped.
    fn walk(&self, duration_s: f64) -> Vec<PowerSegment> {
        let mut out = Vec::new();
        let mut t = 0.0;
        if self.segments.is_empty() {
            return out;
        }
        'outer: loop {
            for s in &self.segments {
                if t >= duration_s {
                    break 'outer;
                }
                if s.duration_s == 0.0 {
                    continue;
                }
                let dt = s.duration_s.min(duration_s - t);
                out.push(PowerSegment {
                    power_w: s.power_w,
                    duration_s: dt,
                });
                t += dt;
            }
            if !self.periodic {
                break;
            }
        }
        out
    }
}

/// Per-segment record of an integration run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LedgerEntry {
    pub start_s: f64,
    pub duration_s: f64,
    pub power_w: f64,
    /// Energy offered by the harvester during the segment.
    pub offered_j: f64,
    /// Energy actually stored; lower than offered once the ceiling is hit.
    pub stored_j: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChargeLedger {
    pub entries: Vec<LedgerEntry>,
}

impl ChargeLedger {
    pub fn offered_j(&self) -> f64 {
        self.entries.iter().map(|e| e.offered_j).sum()
    }

    pub fn stored_j(&self) -> f64 {
        self.entries.iter().map(|e| e.stored_j).sum()
    }
}

/// Advance the capacitor through `duration_s` seconds of the profile,
/// clamping at the ceiling voltage.
pub fn integrate_charge(
    cap: &StorageCapacitor,
    profile: &PowerProfile,
    duration_s: f64,
) -> (StorageCapacitor, ChargeLedger) {
    let mut state = *cap;
    let mut entries = Vec::new();
    let mut t = 0.0;
    let ceiling_energy = 0.5 * state.capacitance_f * state.v_ceiling * state.v_ceiling;
    for seg in profile.walk(duration_s) {
        let offered = seg.power_w * seg.duration_s;
        let before = state.stored_energy_j();
        let room = (ceiling_energy - before).max(0.0);
        let stored = offered.min(room);
        state.v_now = if offered > 0.0 && offered >= room {
            state.v_ceiling
        } else {
            state.voltage_after(stored)
        };
        entries.push(LedgerEntry {
            start_s: t,
            duration_s: seg.duration_s,
            power_w: seg.power_w,
            offered_j: offered,
            stored_j: stored,
        });
        t += seg.duration_s;
    }
    (state, ChargeLedger { entries })
}

/// Time at which the capacitor first reaches `v_target` under the profile,
/// searching up to `horizon_s`. Closed-form within each segment.
pub fn time_to_voltage(cap: &StorageCapacitor, profile: &PowerProfile, v_target: f64, horizon_s: f64) -> Option<f64> {
    if cap.v_now >= v_target {
        return Some(0.0);
    }
    let mut state = *cap;
    let mut t = 0.0;
    for seg in profile.walk(horizon_s) {
        let need = storage_energy(&state, state.v_now, v_target).ok()?;
        if seg.power_w > 0.0 && seg.power_w * seg.duration_s >= need {
            return Some(t + need / seg.power_w);
        }
        state.v_now = state.voltage_after(seg.power_w * seg.duration_s);
        t += seg.duration_s;
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ColdStartRange {
    Meters(f64),
    /// Input stays above the sensitivity floor out to the search horizon.
    Unbounded,
}

/// Largest distance at which the harvester input still reaches
/// `sensitivity_min`, by inverting the path-gain formula.
pub fn max_coldstart_distance(
    beacon: &Beacon,
    tag_antenna: &Antenna,
    stage: &HarvesterStage,
    model: &PropagationModel,
) -> ColdStartRange {
    let threshold = stage.sensitivity_min.watts();
    if threshold <= 0.0 {
        return ColdStartRange::Unbounded;
    }
    let d0 = model.reference_distance_m();
    let ratio = wavelength(beacon.frequency) / (4.0 * std::f64::consts::PI * d0);
    // harvester input at the reference distance
    let at_d0 = beacon.eirp().watts()
        * tag_antenna.gain_linear()
        * model.polarization_factor()
        * stage.chain.eta_d
        * ratio
        * ratio;
    let d = d0 * (at_d0 / threshold).powf(1.0 / model.path_loss_exponent());
    if d > COLDSTART_HORIZON_M {
        ColdStartRange::Unbounded
    } else {
        ColdStartRange::Meters(d)
    }
}
