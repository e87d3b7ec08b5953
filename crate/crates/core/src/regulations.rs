//! Transmission rules for the 865–868 MHz and 2.45 GHz RFID bands.
//!
//! Only the clauses relevant to power transfer are encoded: the 868 MHz
//! beamwidth-dependent ERP tiers and presence-sensing interleave, and the
//! two 2.45 GHz EIRP tiers with their beamwidth and duty-cycle conditions.
//! Rule identifiers are stable and appear verbatim in reports.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{HarvestError, RegulationError};
use crate::harvester::{harvested_power, HarvesterStage};
use crate::linkbudget::{free_space_path_gain, Antenna, PropagationModel};
use crate::units::{dbm_to_watts, eirp_to_erp, erp_to_eirp, Distance, Frequency, Power};

/// Relative slack used when comparing against regulatory limits, so that
/// values that are exactly on a limit (e.g. 15 % or 100 ms) pass.
const LIMIT_EPS: f64 = 1e-9;

/// ERP tiers are stated in mW but set in practice as rounded dBm values
/// (500 mW is quoted as 27 dBm, which is 501 mW). Settings within this
/// margin of a tier are accepted.
pub const ERP_TIER_ROUNDING_DB: f64 = 0.02;

pub const RULE_868_CHANNEL: &str = "R868-CHAN";
pub const RULE_868_POWER_OMNI: &str = "R868-PWR-OMNI";
pub const RULE_868_POWER_180: &str = "R868-PWR-180";
pub const RULE_868_POWER_90: &str = "R868-PWR-90";
pub const RULE_868_DUTY: &str = "R868-DUTY";
pub const RULE_868_CW: &str = "R868-CW";
pub const RULE_2450_CHANNEL: &str = "R2450-CHAN";
pub const RULE_2450_POWER: &str = "R2450-PWR";
pub const RULE_2450_INDOOR: &str = "R2450-INDOOR";
pub const RULE_2450_FHSS: &str = "R2450-FHSS";
pub const RULE_2450_DUTY: &str = "R2450-DUTY15";
pub const RULE_2450_BEAMWIDTH: &str = "R2450-BW45";
pub const RULE_2450_SIDELOBE: &str = "R2450-SIDELOBE";
pub const RULE_2450_PROTECTION: &str = "R2450-PROTECT";

/// Every rule identifier this module can emit, with a one-line description.
pub const RULES: &[(&str, &str)] = &[
    (
        RULE_868_CHANNEL,
        "868 MHz: channel must be one of the four high-power channels",
    ),
    (RULE_868_POWER_OMNI, "868 MHz: ERP <= 500 mW for beamwidth > 180 deg"),
    (RULE_868_POWER_180, "868 MHz: ERP <= 1 W for beamwidth <= 180 deg"),
    (RULE_868_POWER_90, "868 MHz: ERP <= 2 W for beamwidth <= 90 deg"),
    (RULE_868_DUTY, "868 MHz presence sensing: ON <= 1 s, OFF >= 100 ms"),
    (RULE_868_CW, "868 MHz: uninterrupted carrier without silent periods"),
    (RULE_2450_CHANNEL, "2.45 GHz: channel must exist in the band"),
    (RULE_2450_POWER, "2.45 GHz: EIRP above the applicable tier"),
    (RULE_2450_INDOOR, "2.45 GHz: EIRP > 27 dBm requires in-building use"),
    (RULE_2450_FHSS, "2.45 GHz: EIRP > 27 dBm requires FHSS"),
    (
        RULE_2450_DUTY,
        "2.45 GHz: EIRP > 27 dBm requires duty <= 15 % over any 200 ms",
    ),
    (RULE_2450_BEAMWIDTH, "2.45 GHz: horizontal beamwidth <= 45 deg"),
    (
        RULE_2450_SIDELOBE,
        "2.45 GHz: sidelobe attenuation >= 15 dB not attested",
    ),
    (RULE_2450_PROTECTION, "2.45 GHz: physical protection not attested"),
];

pub const PRESENCE_MAX_ON_S: f64 = 1.0;
pub const PRESENCE_MIN_OFF_S: f64 = 0.1;
pub const ISM2450_LOW_TIER_EIRP_DBM: f64 = 27.0;
pub const ISM2450_HIGH_TIER_EIRP_DBM: f64 = 36.0;
pub const ISM2450_MAX_DUTY: f64 = 0.15;
pub const ISM2450_DUTY_WINDOW_S: f64 = 0.2;
pub const ISM2450_MAX_BEAMWIDTH_DEG: f64 = 45.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Band {
    /// 865–868 MHz, four high-power channels.
    Rfid868,
    /// 2446–2454 MHz.
    Rfid2450,
}

/// Centre frequencies of the four 868 MHz high-power channels, MHz.
const RFID868_CHANNELS_MHZ: [f64; 4] = [865.7, 866.3, 866.9, 867.5];
const RFID2450_CHANNELS_MHZ: [f64; 1] = [2450.0];

impl Band {
    pub fn name(self) -> &'static str {
        match self {
            Band::Rfid868 => "rfid868",
            Band::Rfid2450 => "rfid2450",
        }
    }

    pub fn edges_mhz(self) -> (f64, f64) {
        match self {
            Band::Rfid868 => (865.0, 868.0),
            Band::Rfid2450 => (2446.0, 2454.0),
        }
    }

    fn channel_table(self) -> &'static [f64] {
        match self {
            Band::Rfid868 => &RFID868_CHANNELS_MHZ,
            Band::Rfid2450 => &RFID2450_CHANNELS_MHZ,
        }
    }

    /// Channel identifiers, numbered from 1.
    pub fn channels(self) -> impl Iterator<Item = u8> {
        1..=self.channel_table().len() as u8
    }

    pub fn channel_frequency(self, channel: u8) -> Result<Frequency, RegulationError> {
        let idx = usize::from(channel)
            .checked_sub(1)
            .filter(|&i| i < self.channel_table().len())
            .ok_or(RegulationError::UnknownChannel {
                band: self.name(),
                channel,
            })?;
        Ok(Frequency::from_mhz(self.channel_table()[idx]).expect("table frequencies are positive"))
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Periodic two-phase transmission: `on_s` of carrier, then `off_s` of
/// silence. Continuous wave has `off_s == 0`. Schedules start ON at t = 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DutySchedule {
    on_s: f64,
    off_s: f64,
}

impl DutySchedule {
    pub fn new(on_s: f64, off_s: f64) -> Result<Self, RegulationError> {
        if !(on_s > 0.0 && on_s.is_finite()) {
            return Err(RegulationError::Schedule(format!(
                "on duration {on_s} s must be positive"
            )));
        }
        if !(off_s >= 0.0 && off_s.is_finite()) {
            return Err(RegulationError::Schedule(format!(
                "off duration {off_s} s must be non-negative"
            )));
        }
        Ok(DutySchedule { on_s, off_s })
    }

    pub fn continuous() -> Self {
        DutySchedule { on_s: 1.0, off_s: 0.0 }
    }

    /// The 868 MHz presence-sensing pattern: 1 s on, 100 ms off.
    pub fn presence_sensing() -> Self {
        DutySchedule {
            on_s: PRESENCE_MAX_ON_S,
            off_s: PRESENCE_MIN_OFF_S,
        }
    }

    pub fn on_s(&self) -> f64 {
        self.on_s
    }

    pub fn off_s(&self) -> f64 {
        self.off_s
    }

    pub fn is_continuous(&self) -> bool {
        self.off_s == 0.0
    }

    pub fn period_s(&self) -> f64 {
        self.on_s + self.off_s
    }

    /// Long-run fraction of time on air.
    pub fn duty_fraction(&self) -> f64 {
        if self.is_continuous() {
            1.0
        } else {
            self.on_s / self.period_s()
        }
    }

    /// Largest on-air fraction over any window of `window_s` seconds in
    /// steady state.
    pub fn worst_window_duty(&self, window_s: f64) -> f64 {
        if self.is_continuous() {
            return 1.0;
        }
        let period = self.period_s();
        let whole = (window_s / period).floor();
        let rest = window_s - whole * period;
        (whole * self.on_s + rest.min(self.on_s)) / window_s
    }

    pub fn is_on_at(&self, t: f64) -> bool {
        self.is_continuous() || t.rem_euclid(self.period_s()) < self.on_s
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PlanPower {
    Erp(Power),
    Eirp(Power),
}

impl PlanPower {
    pub fn eirp(self) -> Power {
        match self {
            PlanPower::Erp(p) if p.watts() > 0.0 => erp_to_eirp(p).unwrap(),
            PlanPower::Eirp(p) => p,
            PlanPower::Erp(_) => Power::ZERO,
        }
    }

    pub fn erp(self) -> Power {
        match self {
            PlanPower::Eirp(p) if p.watts() > 0.0 => eirp_to_erp(p).unwrap(),
            PlanPower::Erp(p) => p,
            PlanPower::Eirp(_) => Power::ZERO,
        }
    }
}

impl fmt::Display for PlanPower {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanPower::Erp(p) => write!(f, "{p} ERP"),
            PlanPower::Eirp(p) => write!(f, "{p} EIRP"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransmissionPlan {
    pub band: Band,
    pub channel: u8,
    pub power: PlanPower,
    pub antenna: Antenna,
    pub duty: DutySchedule,
    pub indoor: bool,
    pub fhss: bool,
    /// Attestation that sidelobes are at least 15 dB down.
    pub sidelobe_attested: bool,
    /// Attestation that the physical protection requirements are met.
    pub protection_attested: bool,
    /// Rule identifiers the operator has explicitly waived.
    pub waived: Vec<String>,
}

impl TransmissionPlan {
    pub fn new(band: Band, channel: u8, power: PlanPower, antenna: Antenna, duty: DutySchedule) -> Self {
        TransmissionPlan {
            band,
            channel,
            power,
            antenna,
            duty,
            indoor: false,
            fhss: false,
            sidelobe_attested: false,
            protection_attested: false,
            waived: Vec::new(),
        }
    }

    pub fn frequency(&self) -> Result<Frequency, RegulationError> {
        self.band.channel_frequency(self.channel)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub rule: &'static str,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplianceReport {
    pub compliant: bool,
    /// Sorted by rule identifier.
    pub violations: Vec<Violation>,
    /// Violations present in the plan but waived by the operator.
    pub waived: Vec<Violation>,
    pub max_allowed: PlanPower,
    pub effective_duty: f64,
}

impl ComplianceReport {
    pub fn rule_ids(&self) -> Vec<&'static str> {
        self.violations.iter().map(|v| v.rule).collect()
    }

    /// Line-oriented text rendering.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("compliant: {}\n", if self.compliant { "yes" } else { "no" }));
        out.push_str(&format!("max_allowed: {}\n", self.max_allowed));
        out.push_str(&format!("effective_duty: {}\n", self.effective_duty));
        for v in &self.violations {
            out.push_str(&format!("violation {}: {}\n", v.rule, v.message));
        }
        for v in &self.waived {
            out.push_str(&format!("waived {}: {}\n", v.rule, v.message));
        }
        out
    }

    /// `rule_id,status,message` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rule_id,status,message\n");
        let rows = self
            .violations
            .iter()
            .map(|v| (v, "violated"))
            .chain(self.waived.iter().map(|v| (v, "waived")));
        for (v, status) in rows {
            out.push_str(&format!("{},{},\"{}\"\n", v.rule, status, v.message.replace('"', "'")));
        }
        out
    }
}

/// Maximum 868 MHz ERP for a given horizontal beamwidth.
pub fn max_erp_868(beamwidth_deg: f64) -> Power {
    if beamwidth_deg <= 90.0 {
        Power::from_watts(2.0).unwrap()
    } else if beamwidth_deg <= 180.0 {
        Power::from_watts(1.0).unwrap()
    } else {
        Power::from_watts(0.5).unwrap()
    }
}

fn tier_rule_868(beamwidth_deg: f64) -> &'static str {
    if beamwidth_deg <= 90.0 {
        RULE_868_POWER_90
    } else if beamwidth_deg <= 180.0 {
        RULE_868_POWER_180
    } else {
        RULE_868_POWER_OMNI
    }
}

fn exceeds(value: f64, limit: f64) -> bool {
    value > limit * (1.0 + LIMIT_EPS)
}

/// Evaluate every applicable rule. Never fails; all findings are in the
/// report.
pub fn check_plan(plan: &TransmissionPlan) -> ComplianceReport {
    let mut found: BTreeMap<&'static str, String> = BTreeMap::new();
    let beamwidth = plan.antenna.horizontal_beamwidth_deg();
    let duty = plan.duty;

    let max_allowed = match plan.band {
        Band::Rfid868 => {
            if plan.band.channel_frequency(plan.channel).is_err() {
                found.insert(
                    RULE_868_CHANNEL,
                    format!("channel {} is not a high-power channel (1-4)", plan.channel),
                );
            }
            let limit = max_erp_868(beamwidth);
            let erp = plan.power.erp();
            if erp.dbm() > limit.dbm() + ERP_TIER_ROUNDING_DB {
                found.insert(
                    tier_rule_868(beamwidth),
                    format!(
                        "ERP {:.2} dBm exceeds {:.2} dBm allowed at {} deg beamwidth",
                        erp.dbm(),
                        limit.dbm(),
                        beamwidth
                    ),
                );
            }
            if duty.is_continuous() {
                found.insert(RULE_868_CW, "continuous carrier without silent periods".to_string());
            } else {
                let mut problems = Vec::new();
                if exceeds(duty.on_s(), PRESENCE_MAX_ON_S) {
                    problems.push(format!("ON {} s exceeds {} s", duty.on_s(), PRESENCE_MAX_ON_S));
                }
                if duty.off_s() < PRESENCE_MIN_OFF_S * (1.0 - LIMIT_EPS) {
                    problems.push(format!(
                        "OFF {} s is shorter than {} s",
                        duty.off_s(),
                        PRESENCE_MIN_OFF_S
                    ));
                }
                if !problems.is_empty() {
                    found.insert(RULE_868_DUTY, problems.join("; "));
                }
            }
            PlanPower::Erp(limit)
        }
        Band::Rfid2450 => {
            if plan.band.channel_frequency(plan.channel).is_err() {
                found.insert(
                    RULE_2450_CHANNEL,
                    format!("channel {} does not exist in the 2.45 GHz band", plan.channel),
                );
            }
            let eirp_dbm = plan.power.eirp().dbm();
            let high_tier_allowed = plan.indoor && plan.fhss;
            let limit_dbm = if high_tier_allowed {
                ISM2450_HIGH_TIER_EIRP_DBM
            } else {
                ISM2450_LOW_TIER_EIRP_DBM
            };
            if eirp_dbm > ISM2450_HIGH_TIER_EIRP_DBM + 1e-9 {
                found.insert(
                    RULE_2450_POWER,
                    format!("EIRP {eirp_dbm:.2} dBm exceeds {ISM2450_HIGH_TIER_EIRP_DBM} dBm"),
                );
            }
            if eirp_dbm > ISM2450_LOW_TIER_EIRP_DBM + 1e-9 {
                if !plan.indoor {
                    found.insert(
                        RULE_2450_INDOOR,
                        format!("EIRP {eirp_dbm:.2} dBm above {ISM2450_LOW_TIER_EIRP_DBM} dBm outside a building"),
                    );
                }
                if !plan.fhss {
                    found.insert(
                        RULE_2450_FHSS,
                        format!("EIRP {eirp_dbm:.2} dBm above {ISM2450_LOW_TIER_EIRP_DBM} dBm without FHSS"),
                    );
                }
                let worst = duty.worst_window_duty(ISM2450_DUTY_WINDOW_S);
                if exceeds(worst, ISM2450_MAX_DUTY) {
                    found.insert(
                        RULE_2450_DUTY,
                        format!(
                            "duty {:.4} over the worst 200 ms window exceeds {}",
                            worst, ISM2450_MAX_DUTY
                        ),
                    );
                }
            }
            if exceeds(beamwidth, ISM2450_MAX_BEAMWIDTH_DEG) {
                found.insert(
                    RULE_2450_BEAMWIDTH,
                    format!("horizontal beamwidth {beamwidth} deg exceeds {ISM2450_MAX_BEAMWIDTH_DEG} deg"),
                );
            }
            if !plan.sidelobe_attested {
                found.insert(RULE_2450_SIDELOBE, "sidelobe attenuation not attested".to_string());
            }
            if !plan.protection_attested {
                found.insert(RULE_2450_PROTECTION, "physical protection not attested".to_string());
            }
            PlanPower::Eirp(dbm_to_watts(limit_dbm))
        }
    };

    let (waived, violations): (Vec<_>, Vec<_>) = found
        .into_iter()
        .map(|(rule, message)| Violation { rule, message })
        .partition(|v| plan.waived.iter().any(|w| w == v.rule));

    ComplianceReport {
        compliant: violations.is_empty(),
        violations,
        waived,
        max_allowed,
        effective_duty: duty.duty_fraction(),
    }
}

/// Peak EIRP scaled by the long-run duty fraction.
pub fn effective_average_eirp(plan: &TransmissionPlan) -> Result<Power, RegulationError> {
    let report = check_plan(plan);
    if !report.compliant {
        return Err(RegulationError::NotCompliant(report.rule_ids().join(",")));
    }
    Ok(plan.power.eirp().scale(report.effective_duty))
}

/// One entry in a band comparison: a plan plus the receiving side it would
/// feed.
#[derive(Clone, Debug)]
pub struct BandCandidate {
    pub label: String,
    pub plan: TransmissionPlan,
    pub rx_antenna: Antenna,
    pub stage: HarvesterStage,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankedCandidate {
    pub label: String,
    pub band: Band,
    pub average_eirp: Power,
    /// Harvested power during transmission, before duty gating.
    pub peak_harvested_w: f64,
    /// Long-run average power into the storage capacitor.
    pub delivered_w: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BandComparison {
    pub reference_distance_m: f64,
    /// Best first.
    pub ranking: Vec<RankedCandidate>,
    /// Candidates left out because their plan is not compliant.
    pub excluded: Vec<(String, Vec<&'static str>)>,
}

/// Rank candidate plans by the average power they deliver into the storage
/// capacitor at a reference link distance (5 m unless overridden).
///
/// The harvester sees the peak received power while the carrier is on, so
/// the chain is evaluated at the peak and then gated by the duty fraction.
/// Ties are broken by average EIRP, then by input order.
pub fn compare_bands(
    candidates: &[BandCandidate],
    reference_distance: Distance,
    model: &PropagationModel,
) -> Result<BandComparison, HarvestError> {
    let mut ranking = Vec::new();
    let mut excluded = Vec::new();
    for cand in candidates {
        let report = check_plan(&cand.plan);
        if !report.compliant {
            excluded.push((cand.label.clone(), report.rule_ids()));
            continue;
        }
        let freq = cand.plan.frequency().expect("compliant plans use a valid channel");
        let path_gain = free_space_path_gain(reference_distance, freq, model)?;
        let peak_rx = cand
            .plan
            .power
            .eirp()
            .scale(cand.rx_antenna.gain_linear() * path_gain * model.polarization_factor());
        let peak = harvested_power(peak_rx, &cand.stage).power_w;
        ranking.push(RankedCandidate {
            label: cand.label.clone(),
            band: cand.plan.band,
            average_eirp: cand.plan.power.eirp().scale(report.effective_duty),
            peak_harvested_w: peak,
            delivered_w: peak * report.effective_duty,
        });
    }
    // stable sort keeps input order on exact ties
    ranking.sort_by(|a, b| {
        b.delivered_w
            .total_cmp(&a.delivered_w)
            .then(b.average_eirp.watts().total_cmp(&a.average_eirp.watts()))
    });
    Ok(BandComparison {
        reference_distance_m: reference_distance.meters(),
        ranking,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harvester::{EfficiencyChain, HarvesterStage};

    fn omni_868(erp_dbm: f64, duty: DutySchedule) -> TransmissionPlan {
        TransmissionPlan::new(
            Band::Rfid868,
            1,
            PlanPower::Erp(dbm_to_watts(erp_dbm)),
            Antenna::dipole(1.0).unwrap(),
            duty,
        )
    }

    fn plan_2450(eirp_dbm: f64, beamwidth: f64, duty: DutySchedule) -> TransmissionPlan {
        let antenna = if beamwidth >= 360.0 {
            Antenna::dipole(1.0).unwrap()
        } else {
            Antenna::directional(12.0, beamwidth, 0.0, 1.0).unwrap()
        };
        let mut plan = TransmissionPlan::new(
            Band::Rfid2450,
            1,
            PlanPower::Eirp(dbm_to_watts(eirp_dbm)),
            antenna,
            duty,
        );
        plan.indoor = true;
        plan.fhss = true;
        plan.sidelobe_attested = true;
        plan.protection_attested = true;
        plan
    }

    #[test]
    fn erp_tiers() {
        assert!((max_erp_868(360.0).dbm() - 26.9897).abs() < 1e-3);
        assert_eq!(max_erp_868(360.0).watts(), 0.5);
        assert_eq!(max_erp_868(90.0).watts(), 2.0);
        assert_eq!(max_erp_868(120.0).watts(), 1.0);
        assert_eq!(max_erp_868(180.0).watts(), 1.0);
        assert_eq!(max_erp_868(181.0).watts(), 0.5);
    }

    #[test]
    fn erp_tiers_monotone() {
        let mut prev = f64::INFINITY;
        for i in 1..=3600 {
            let p = max_erp_868(i as f64 * 0.1).watts();
            assert!(p <= prev);
            prev = p;
        }
    }

    #[test]
    fn omni_868_presence_sensing_is_compliant() {
        let report = check_plan(&omni_868(27.0, DutySchedule::presence_sensing()));
        assert!(report.compliant, "{:?}", report.violations);
        assert!((report.effective_duty - 1.0 / 1.1).abs() < 1e-12);
        assert!((report.effective_duty - 0.909).abs() < 1e-3);
    }

    #[test]
    fn omni_868_cw_flagged_distinctly() {
        let report = check_plan(&omni_868(26.0, DutySchedule::continuous()));
        assert_eq!(report.rule_ids(), vec![RULE_868_CW]);
        let mut plan = omni_868(26.0, DutySchedule::continuous());
        plan.waived.push(RULE_868_CW.to_string());
        let report = check_plan(&plan);
        assert!(report.compliant);
        assert_eq!(report.waived.len(), 1);
    }

    #[test]
    fn omni_868_violations() {
        assert!(check_plan(&omni_868(27.0, DutySchedule::presence_sensing())).compliant);
        let report = check_plan(&omni_868(27.1, DutySchedule::presence_sensing()));
        assert_eq!(report.rule_ids(), vec![RULE_868_POWER_OMNI]);
        let report = check_plan(&omni_868(30.0, DutySchedule::new(1.5, 0.05).unwrap()));
        assert_eq!(report.rule_ids(), vec![RULE_868_DUTY, RULE_868_POWER_OMNI]);
        let mut plan = omni_868(26.0, DutySchedule::presence_sensing());
        plan.channel = 5;
        assert_eq!(check_plan(&plan).rule_ids(), vec![RULE_868_CHANNEL]);
    }

    #[test]
    fn omni_2450_fails_on_beamwidth() {
        let report = check_plan(&plan_2450(27.0, 360.0, DutySchedule::continuous()));
        assert_eq!(report.rule_ids(), vec![RULE_2450_BEAMWIDTH]);
        let report = check_plan(&plan_2450(20.0, 360.0, DutySchedule::continuous()));
        assert_eq!(report.rule_ids(), vec![RULE_2450_BEAMWIDTH]);
    }

    #[test]
    fn high_tier_2450_boundary_duty() {
        let plan = plan_2450(36.0, 40.0, DutySchedule::new(0.03, 0.17).unwrap());
        let report = check_plan(&plan);
        assert!(report.compliant, "{:?}", report.violations);
        assert!((report.max_allowed.eirp().dbm() - 36.0).abs() < 1e-9);

        let plan = plan_2450(36.0, 40.0, DutySchedule::new(0.031, 0.169).unwrap());
        assert_eq!(check_plan(&plan).rule_ids(), vec![RULE_2450_DUTY]);
    }

    #[test]
    fn long_bursts_fail_any_window_duty() {
        // 15 % long-run average but a full 200 ms window of carrier
        let plan = plan_2450(36.0, 40.0, DutySchedule::new(1.5, 8.5).unwrap());
        assert_eq!(check_plan(&plan).rule_ids(), vec![RULE_2450_DUTY]);
    }

    #[test]
    fn high_tier_needs_indoor_fhss_and_attestations() {
        let mut plan = plan_2450(36.0, 40.0, DutySchedule::new(0.03, 0.17).unwrap());
        plan.indoor = false;
        plan.fhss = false;
        plan.sidelobe_attested = false;
        let ids = check_plan(&plan).rule_ids();
        assert_eq!(ids, vec![RULE_2450_FHSS, RULE_2450_INDOOR, RULE_2450_SIDELOBE]);
        let plan = plan_2450(37.0, 40.0, DutySchedule::new(0.03, 0.17).unwrap());
        assert_eq!(check_plan(&plan).rule_ids(), vec![RULE_2450_POWER]);
    }

    #[test]
    fn low_tier_2450_cw_is_allowed_when_narrow() {
        let mut plan = plan_2450(27.0, 40.0, DutySchedule::continuous());
        plan.indoor = false;
        plan.fhss = false;
        assert!(check_plan(&plan).compliant);
    }

    #[test]
    fn worst_window_duty() {
        let d = DutySchedule::new(0.03, 0.17).unwrap();
        assert!((d.worst_window_duty(0.2) - 0.15).abs() < 1e-12);
        let d = DutySchedule::new(0.01, 0.09).unwrap();
        // two full periods in 200 ms
        assert!((d.worst_window_duty(0.2) - 0.1).abs() < 1e-12);
        let d = DutySchedule::new(0.02, 0.13).unwrap();
        // one period (150 ms) + 50 ms partial that can start with 20 ms ON
        assert!((d.worst_window_duty(0.2) - 0.2).abs() < 1e-12);
        assert_eq!(DutySchedule::continuous().worst_window_duty(0.2), 1.0);
    }

    #[test]
    fn schedule_validation() {
        assert!(DutySchedule::new(0.0, 0.1).is_err());
        assert!(DutySchedule::new(1.0, -0.1).is_err());
        let d = DutySchedule::presence_sensing();
        assert!(d.is_on_at(0.0));
        assert!(d.is_on_at(0.999));
        assert!(!d.is_on_at(1.05));
        assert!(d.is_on_at(1.1));
    }

    #[test]
    fn average_eirp_examples() {
        let plan = omni_868(27.0, DutySchedule::presence_sensing());
        let avg = effective_average_eirp(&plan).unwrap();
        // 29.15 dBm EIRP gated by 1/1.1
        assert!((avg.dbm() - 28.736_07).abs() < 1e-4);
        let plan = plan_2450(36.0, 40.0, DutySchedule::new(0.03, 0.17).unwrap());
        let avg = effective_average_eirp(&plan).unwrap();
        assert!((avg.dbm() - 27.760_91).abs() < 1e-4);
        let plan = plan_2450(27.0, 40.0, DutySchedule::continuous());
        assert_eq!(effective_average_eirp(&plan).unwrap(), plan.power.eirp());
        let bad = plan_2450(27.0, 360.0, DutySchedule::continuous());
        assert!(matches!(
            effective_average_eirp(&bad),
            Err(RegulationError::NotCompliant(_))
        ));
    }

    #[test]
    fn channel_table() {
        assert_eq!(Band::Rfid868.channels().count(), 4);
        for ch in Band::Rfid868.channels() {
            let f = Band::Rfid868.channel_frequency(ch).unwrap().mhz();
            let (lo, hi) = Band::Rfid868.edges_mhz();
            assert!(f > lo && f < hi);
        }
        assert!(Band::Rfid868.channel_frequency(0).is_err());
        assert!(Band::Rfid2450.channel_frequency(2).is_err());
    }

    fn candidate(label: &str, plan: TransmissionPlan, chain: EfficiencyChain) -> BandCandidate {
        BandCandidate {
            label: label.to_string(),
            plan,
            rx_antenna: Antenna::dipole(chain.eta_d()).unwrap(),
            stage: HarvesterStage::new(chain),
        }
    }

    #[test]
    fn uhf_band_ranks_first_at_five_meters() {
        let cands = vec![
            candidate(
                "2450-high",
                plan_2450(36.0, 40.0, DutySchedule::new(0.03, 0.17).unwrap()),
                EfficiencyChain::ism_2g4(),
            ),
            candidate(
                "868-omni",
                omni_868(27.0, DutySchedule::presence_sensing()),
                EfficiencyChain::rfid_868(),
            ),
            candidate(
                "2450-omni",
                plan_2450(27.0, 360.0, DutySchedule::continuous()),
                EfficiencyChain::ism_2g4(),
            ),
        ];
        let cmp = compare_bands(
            &cands,
            Distance::from_meters(5.0).unwrap(),
            &PropagationModel::default(),
        )
        .unwrap();
        assert_eq!(cmp.ranking[0].label, "868-omni");
        assert_eq!(cmp.ranking.len(), 2);
        assert_eq!(cmp.excluded, vec![("2450-omni".to_string(), vec![RULE_2450_BEAMWIDTH])]);
        assert!(cmp.ranking[0].delivered_w > 10.0 * cmp.ranking[1].delivered_w);
    }

    #[test]
    fn equal_chains_tie_break_on_average_eirp() {
        // both far below sensitivity, so delivered power is zero for each
        let chain = EfficiencyChain::rfid_868();
        let a = candidate("weak", omni_868(0.0, DutySchedule::presence_sensing()), chain.clone());
        let b = candidate("strong", omni_868(10.0, DutySchedule::presence_sensing()), chain);
        let cmp = compare_bands(
            &[a, b],
            Distance::from_meters(100.0).unwrap(),
            &PropagationModel::default(),
        )
        .unwrap();
        assert_eq!(cmp.ranking[0].delivered_w, 0.0);
        assert_eq!(cmp.ranking[0].label, "strong");
    }
}
