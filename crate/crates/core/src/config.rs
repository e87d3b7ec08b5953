//! TOML documents for scenarios, transmission plans and tag budgets.
//!
//! Every numeric key carries its unit as a suffix (`erp_dbm`,
//! `capacitance_uf`, `duty_on_s`); dimensionless quantities such as
//! efficiencies and counts are bare. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::ConfigError;
use crate::harvester::{EfficiencyChain, EfficiencyCurve, HarvesterStage, StorageCapacitor};
use crate::linkbudget::{Antenna, Beacon, Position, PropagationModel};
use crate::regulations::{Band, DutySchedule, PlanPower, TransmissionPlan};
use crate::sim::{parse_measurements_csv, MeasurementProtocol, ProtocolPreset, Room, Scenario, SchedulerPolicy};
use crate::tagmodel::{Tag, TagEnergyProfile};
use crate::units::{dbm_to_watts, Frequency};

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn resolve(base: Option<&Path>, file: &str) -> PathBuf {
    match base {
        Some(dir) => dir.join(file),
        None => PathBuf::from(file),
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum AntennaKind {
    Dipole,
    Omni,
    Directional,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AntennaConfig {
    pub kind: AntennaKind,
    pub gain_dbi: Option<f64>,
    pub beamwidth_deg: Option<f64>,
    pub boresight_deg: Option<f64>,
    pub radiation_efficiency: Option<f64>,
}

impl AntennaConfig {
    pub fn to_antenna(&self) -> Result<Antenna, ConfigError> {
        let eff = self.radiation_efficiency.unwrap_or(1.0);
        let antenna = match self.kind {
            AntennaKind::Dipole => {
                if self.gain_dbi.is_some() || self.beamwidth_deg.is_some() {
                    return Err(ConfigError::Invalid(
                        "a dipole antenna has fixed gain and no beamwidth".into(),
                    ));
                }
                Antenna::dipole(eff)?
            }
            AntennaKind::Omni => {
                if self.beamwidth_deg.is_some() {
                    return Err(ConfigError::Invalid("an omni antenna has no beamwidth_deg".into()));
                }
                Antenna::omnidirectional(self.gain_dbi.unwrap_or(0.0), eff)?
            }
            AntennaKind::Directional => {
                let gain = self
                    .gain_dbi
                    .ok_or_else(|| ConfigError::Invalid("directional antenna needs gain_dbi".into()))?;
                let bw = self
                    .beamwidth_deg
                    .ok_or_else(|| ConfigError::Invalid("directional antenna needs beamwidth_deg".into()))?;
                Antenna::directional(gain, bw, self.boresight_deg.unwrap_or(0.0), eff)?
            }
        };
        Ok(antenna)
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ChainPreset {
    Rfid868,
    Ism2g4,
}

impl ChainPreset {
    pub fn chain(self) -> EfficiencyChain {
        match self {
            ChainPreset::Rfid868 => EfficiencyChain::rfid_868(),
            ChainPreset::Ism2g4 => EfficiencyChain::ism_2g4(),
        }
    }
}

/// Efficiency chain and harvester window. Individual efficiencies override
/// the preset; `eta_rf_curve_csv` replaces the flat rectifier efficiency
/// with a power-dependent curve.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    #[serde(default = "default_chain")]
    pub chain: ChainPreset,
    pub eta_d: Option<f64>,
    pub eta_rf: Option<f64>,
    pub eta_rf_curve_csv: Option<String>,
    pub eta_b: Option<f64>,
    pub eta_ldo: Option<f64>,
    pub eta_c: Option<f64>,
    pub sensitivity_min_dbm: Option<f64>,
    pub sensitivity_max_dbm: Option<f64>,
    pub channels: Option<Vec<u8>>,
}

fn default_chain() -> ChainPreset {
    ChainPreset::Rfid868
}

impl Default for StageConfig {
    fn default() -> Self {
        StageConfig {
            chain: default_chain(),
            eta_d: None,
            eta_rf: None,
            eta_rf_curve_csv: None,
            eta_b: None,
            eta_ldo: None,
            eta_c: None,
            sensitivity_min_dbm: None,
            sensitivity_max_dbm: None,
            channels: None,
        }
    }
}

impl StageConfig {
    pub fn to_chain(&self, base: Option<&Path>) -> Result<EfficiencyChain, ConfigError> {
        let mut chain = self.chain.chain();
        if let Some(v) = self.eta_d {
            chain = chain.with_eta_d(v)?;
        }
        match (self.eta_rf, &self.eta_rf_curve_csv) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid(
                    "give either eta_rf or eta_rf_curve_csv, not both".into(),
                ))
            }
            (Some(v), None) => chain = chain.with_eta_rf(EfficiencyCurve::flat(v)?),
            (None, Some(file)) => chain = chain.with_eta_rf(EfficiencyCurve::from_csv_file(&resolve(base, file))?),
            (None, None) => {}
        }
        if let Some(v) = self.eta_b {
            chain = chain.with_eta_b(v)?;
        }
        if let Some(v) = self.eta_ldo {
            chain = chain.with_eta_ldo(v)?;
        }
        if let Some(v) = self.eta_c {
            chain = chain.with_eta_c(v)?;
        }
        Ok(chain)
    }

    pub fn to_stage(&self, base: Option<&Path>) -> Result<HarvesterStage, ConfigError> {
        let mut stage = HarvesterStage::new(self.to_chain(base)?);
        if self.sensitivity_min_dbm.is_some() || self.sensitivity_max_dbm.is_some() {
            let min = dbm_to_watts(self.sensitivity_min_dbm.unwrap_or(stage.sensitivity_min().dbm()));
            let max = dbm_to_watts(self.sensitivity_max_dbm.unwrap_or(stage.sensitivity_max().dbm()));
            stage = stage.with_sensitivity(min, max)?;
        }
        if let Some(ch) = &self.channels {
            stage = stage.tuned_to(ch.iter().copied());
        }
        Ok(stage)
    }
}

/// Capacitor and per-fix energy, shared by scenario tags and budgets.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StorageConfig {
    #[serde(default = "default_capacitance")]
    pub capacitance_uf: f64,
    #[serde(default = "default_v_chrdy")]
    pub v_chrdy_v: f64,
    #[serde(default = "default_v_ovdis")]
    pub v_ovdis_v: f64,
    pub v_initial_target_v: Option<f64>,
    pub v_ceiling_v: Option<f64>,
    pub v_initial_v: Option<f64>,
}

fn default_capacitance() -> f64 {
    22.0
}
fn default_v_chrdy() -> f64 {
    3.10
}
fn default_v_ovdis() -> f64 {
    2.8
}

impl Default for StorageConfig {
    fn default() -> Self {
        StorageConfig {
            capacitance_uf: default_capacitance(),
            v_chrdy_v: default_v_chrdy(),
            v_ovdis_v: default_v_ovdis(),
            v_initial_target_v: None,
            v_ceiling_v: None,
            v_initial_v: None,
        }
    }
}

impl StorageConfig {
    pub fn to_capacitor(&self) -> Result<StorageCapacitor, ConfigError> {
        let mut cap = StorageCapacitor::new(self.capacitance_uf * 1e-6, self.v_chrdy_v, self.v_ovdis_v)?;
        if let Some(v) = self.v_ceiling_v {
            cap = cap.with_ceiling(v)?;
        }
        if let Some(v) = self.v_initial_target_v {
            cap = cap.with_initial_target(v)?;
        }
        if let Some(v) = self.v_initial_v {
            cap = cap.with_voltage(v)?;
        }
        Ok(cap)
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    #[serde(default = "default_e_tag")]
    pub e_tag_uj: f64,
    #[serde(default = "default_rangings")]
    pub rangings_per_fix: u32,
}

fn default_e_tag() -> f64 {
    crate::tagmodel::DEFAULT_E_TAG_J * 1e6
}
fn default_rangings() -> u32 {
    crate::tagmodel::DEFAULT_RANGINGS_PER_FIX
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig {
            e_tag_uj: default_e_tag(),
            rangings_per_fix: default_rangings(),
        }
    }
}

impl EnergyConfig {
    pub fn to_profile(&self) -> Result<TagEnergyProfile, ConfigError> {
        Ok(TagEnergyProfile::new(self.e_tag_uj * 1e-6, self.rangings_per_fix)?)
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PropagationConfig {
    #[serde(default = "default_exponent")]
    pub path_loss_exponent: f64,
    #[serde(default = "default_reference")]
    pub reference_distance_m: f64,
    #[serde(default = "default_polarization")]
    pub polarization_factor: f64,
}

fn default_exponent() -> f64 {
    2.0
}
fn default_reference() -> f64 {
    1.0
}
fn default_polarization() -> f64 {
    1.0
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            path_loss_exponent: default_exponent(),
            reference_distance_m: default_reference(),
            polarization_factor: default_polarization(),
        }
    }
}

impl PropagationConfig {
    pub fn to_model(&self) -> Result<PropagationModel, ConfigError> {
        Ok(
            PropagationModel::new(self.path_loss_exponent, self.reference_distance_m)?
                .with_polarization_factor(self.polarization_factor)?,
        )
    }
}

fn duty_from(on: Option<f64>, off: Option<f64>) -> Result<DutySchedule, ConfigError> {
    match (on, off) {
        (None, None) => Ok(DutySchedule::continuous()),
        (Some(on), Some(off)) => Ok(DutySchedule::new(on, off)?),
        _ => Err(ConfigError::Invalid(
            "duty_on_s and duty_off_s must be given together".into(),
        )),
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BeaconConfig {
    pub id: u32,
    pub position_m: Position,
    pub erp_dbm: f64,
    #[serde(default = "default_frequency")]
    pub frequency_mhz: f64,
    #[serde(default = "default_channel")]
    pub channel: u8,
    pub antenna: AntennaConfig,
    pub duty_on_s: Option<f64>,
    pub duty_off_s: Option<f64>,
    #[serde(default)]
    pub steerable: bool,
}

fn default_frequency() -> f64 {
    865.7
}
fn default_channel() -> u8 {
    1
}

impl BeaconConfig {
    pub fn to_beacon(&self) -> Result<Beacon, ConfigError> {
        Ok(Beacon::new(
            self.id,
            self.position_m,
            self.antenna.to_antenna()?,
            dbm_to_watts(self.erp_dbm),
            Frequency::from_mhz(self.frequency_mhz)?,
            self.channel,
            duty_from(self.duty_on_s, self.duty_off_s)?,
        )?
        .steerable(self.steerable))
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TagConfig {
    pub id: u32,
    pub position_m: Position,
    #[serde(default = "default_tag_gain")]
    pub antenna_gain_dbi: f64,
    #[serde(default)]
    pub storage: StorageConfig,
    #[serde(default)]
    pub energy: EnergyConfig,
    /// One or two stages; a single default 868 MHz stage when omitted.
    #[serde(default)]
    pub stage: Vec<StageConfig>,
}

fn default_tag_gain() -> f64 {
    crate::units::DIPOLE_GAIN_DBI
}

impl TagConfig {
    pub fn to_tag(&self, base: Option<&Path>) -> Result<Tag, ConfigError> {
        let stages = if self.stage.is_empty() {
            vec![StageConfig::default().to_stage(base)?]
        } else {
            self.stage
                .iter()
                .map(|s| s.to_stage(base))
                .collect::<Result<Vec<_>, _>>()?
        };
        let eta_d = stages[0].chain.eta_d();
        Ok(Tag::new(
            self.id,
            self.position_m,
            Antenna::omnidirectional(self.antenna_gain_dbi, eta_d)?,
            stages,
            self.storage.to_capacitor()?,
            self.energy.to_profile()?,
        )?)
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RoomConfig {
    pub size_m: [f64; 3],
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    #[default]
    None,
    RoundRobin,
    DeficitFirst,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TargetIntervalConfig {
    pub tag_id: u32,
    pub interval_s: f64,
}

#[derive(Clone, Debug, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct SchedulerConfig {
    #[serde(default)]
    pub policy: PolicyKind,
    pub dwell_s: Option<f64>,
    pub default_target_interval_s: Option<f64>,
    #[serde(default)]
    pub target: Vec<TargetIntervalConfig>,
}

impl SchedulerConfig {
    pub fn to_policy(&self) -> Result<SchedulerPolicy, ConfigError> {
        let dwell_s = self.dwell_s.unwrap_or(1.0);
        let policy = match self.policy {
            PolicyKind::None => SchedulerPolicy::None,
            PolicyKind::RoundRobin => SchedulerPolicy::RoundRobin { dwell_s },
            PolicyKind::DeficitFirst => {
                let default_interval_s = self
                    .default_target_interval_s
                    .ok_or_else(|| ConfigError::Invalid("deficit_first needs default_target_interval_s".into()))?;
                let mut intervals_s = BTreeMap::new();
                for t in &self.target {
                    if intervals_s.insert(t.tag_id, t.interval_s).is_some() {
                        return Err(ConfigError::Invalid(format!(
                            "duplicate target interval for tag {}",
                            t.tag_id
                        )));
                    }
                }
                SchedulerPolicy::DeficitFirst {
                    dwell_s,
                    default_interval_s,
                    intervals_s,
                }
            }
        };
        policy.validate().map_err(ConfigError::Invalid)?;
        Ok(policy)
    }
}

/// Which measurement-campaign tables to emit alongside a simulation.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    #[serde(default = "all_presets")]
    pub presets: Vec<String>,
    pub d_min_m: Option<f64>,
    pub d_max_m: Option<f64>,
    pub d_step_m: Option<f64>,
    pub repetitions: Option<u32>,
    pub capacitance_uf: Option<f64>,
    pub omni_erp_dbm: Option<f64>,
    pub directional_erp_dbm: Option<f64>,
    /// Preset name to a `distance_m,measured_s` file.
    #[serde(default)]
    pub measured_csv: BTreeMap<String, String>,
}

fn all_presets() -> Vec<String> {
    ProtocolPreset::ALL.iter().map(|p| p.name().to_string()).collect()
}

/// A resolved protocol request: the campaign, the presets to replay and any
/// measured means to place next to the model.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolRequest {
    pub protocol: MeasurementProtocol,
    pub presets: Vec<(ProtocolPreset, Vec<(f64, f64)>)>,
}

impl ProtocolConfig {
    pub fn to_request(&self, base: Option<&Path>) -> Result<ProtocolRequest, ConfigError> {
        let mut protocol = MeasurementProtocol::default();
        let overrides = [
            (&mut protocol.d_min_m, self.d_min_m),
            (&mut protocol.d_max_m, self.d_max_m),
            (&mut protocol.d_step_m, self.d_step_m),
            (&mut protocol.omni_erp_dbm, self.omni_erp_dbm),
            (&mut protocol.directional_erp_dbm, self.directional_erp_dbm),
        ];
        for (slot, value) in overrides {
            if let Some(v) = value {
                *slot = v;
            }
        }
        if let Some(c) = self.capacitance_uf {
            protocol.capacitance_f = c * 1e-6;
        }
        if let Some(r) = self.repetitions {
            protocol.repetitions = r;
        }
        crate::sim::distance_grid(protocol.d_min_m, protocol.d_max_m, protocol.d_step_m)?;
        let parse = |name: &str| {
            ProtocolPreset::parse(name).ok_or_else(|| ConfigError::Invalid(format!("unknown protocol preset '{name}'")))
        };
        for name in self.measured_csv.keys() {
            parse(name)?;
        }
        let mut presets = Vec::new();
        for name in &self.presets {
            let preset = parse(name)?;
            let measured = match self.measured_csv.get(name) {
                Some(file) => parse_measurements_csv(&read(&resolve(base, file))?)?,
                None => Vec::new(),
            };
            presets.push((preset, measured));
        }
        Ok(ProtocolRequest { protocol, presets })
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    pub room: Option<RoomConfig>,
    #[serde(default)]
    pub propagation: PropagationConfig,
    #[serde(default)]
    pub scheduler: SchedulerConfig,
    #[serde(default)]
    pub beacon: Vec<BeaconConfig>,
    #[serde(default)]
    pub tag: Vec<TagConfig>,
    pub measurement_protocol: Option<ProtocolConfig>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub protocol: Option<ProtocolRequest>,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Build and validate the scenario. Relative file references resolve
    /// against `base`.
    pub fn resolve(&self, base: Option<&Path>) -> Result<LoadedScenario, ConfigError> {
        let scenario = Scenario {
            room: self
                .room
                .as_ref()
                .map(|r| Room { size_m: r.size_m })
                .unwrap_or_default(),
            beacons: self
                .beacon
                .iter()
                .map(BeaconConfig::to_beacon)
                .collect::<Result<_, _>>()?,
            tags: self.tag.iter().map(|t| t.to_tag(base)).collect::<Result<_, _>>()?,
            propagation: self.propagation.to_model()?,
            scheduler: self.scheduler.to_policy()?,
            duration_s: self.duration_s,
            seed: self.seed,
        };
        scenario.validate()?;
        let protocol = self
            .measurement_protocol
            .as_ref()
            .map(|p| p.to_request(base))
            .transpose()?;
        Ok(LoadedScenario { scenario, protocol })
    }
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario, ConfigError> {
    ScenarioConfig::from_toml_str(&read(path)?)?.resolve(path.parent())
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum BandName {
    Rfid868,
    Ism2450,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    pub band: BandName,
    #[serde(default = "default_channel")]
    pub channel: u8,
    pub erp_dbm: Option<f64>,
    pub eirp_dbm: Option<f64>,
    pub antenna: AntennaConfig,
    pub duty_on_s: Option<f64>,
    pub duty_off_s: Option<f64>,
    #[serde(default)]
    pub indoor: bool,
    #[serde(default)]
    pub fhss: bool,
    #[serde(default)]
    pub sidelobe_attested: bool,
    #[serde(default)]
    pub protection_attested: bool,
    #[serde(default)]
    pub waived: Vec<String>,
}

impl PlanConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_plan(&self) -> Result<TransmissionPlan, ConfigError> {
        let band = match self.band {
            BandName::Rfid868 => Band::Rfid868,
            BandName::Ism2450 => Band::Rfid2450,
        };
        let power = match (self.erp_dbm, self.eirp_dbm) {
            (Some(erp), None) => PlanPower::Erp(dbm_to_watts(erp)),
            (None, Some(eirp)) => PlanPower::Eirp(dbm_to_watts(eirp)),
            _ => {
                return Err(ConfigError::Invalid(
                    "exactly one of erp_dbm or eirp_dbm is required".into(),
                ))
            }
        };
        let mut plan = TransmissionPlan::new(
            band,
            self.channel,
            power,
            self.antenna.to_antenna()?,
            duty_from(self.duty_on_s, self.duty_off_s)?,
        );
        plan.indoor = self.indoor;
        plan.fhss = self.fhss;
        plan.sidelobe_attested = self.sidelobe_attested;
        plan.protection_attested = self.protection_attested;
        plan.waived = self.waived.clone();
        Ok(plan)
    }
}

pub fn load_plan(path: &Path) -> Result<TransmissionPlan, ConfigError> {
    PlanConfig::from_toml_str(&read(path)?)?.to_plan()
}

/// Beacon seen by a budget: only power, frequency and antenna matter.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BudgetBeaconConfig {
    #[serde(default = "default_budget_erp")]
    pub erp_dbm: f64,
    #[serde(default = "default_frequency")]
    pub frequency_mhz: f64,
    pub antenna: Option<AntennaConfig>,
}

fn default_budget_erp() -> f64 {
    27.0
}

impl Default for BudgetBeaconConfig {
    fn default() -> Self {
        BudgetBeaconConfig {
            erp_dbm: default_budget_erp(),
            frequency_mhz: default_frequency(),
            antenna: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct TagBudgetConfig {
    #[serde(default)]
    pub storage: StorageConfig,
    #[serde(default)]
    pub energy: EnergyConfig,
    #[serde(default)]
    pub stage: StageConfig,
    #[serde(default)]
    pub beacon: BudgetBeaconConfig,
    #[serde(default)]
    pub propagation: PropagationConfig,
    pub antenna_gain_dbi: Option<f64>,
    /// Also report initial and update charge times at this distance.
    pub distance_m: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TagBudget {
    pub capacitor: StorageCapacitor,
    pub profile: TagEnergyProfile,
    pub stage: HarvesterStage,
    pub beacon: Beacon,
    pub tag_antenna: Antenna,
    pub model: PropagationModel,
    pub distance_m: Option<f64>,
}

impl TagBudgetConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn resolve(&self, base: Option<&Path>) -> Result<TagBudget, ConfigError> {
        let stage = self.stage.to_stage(base)?;
        let antenna = match &self.beacon.antenna {
            Some(a) => a.to_antenna()?,
            None => Antenna::dipole(1.0)?,
        };
        let beacon = Beacon::new(
            1,
            [0.0; 3],
            antenna,
            dbm_to_watts(self.beacon.erp_dbm),
            Frequency::from_mhz(self.beacon.frequency_mhz)?,
            1,
            DutySchedule::continuous(),
        )?;
        let tag_antenna = Antenna::omnidirectional(
            self.antenna_gain_dbi.unwrap_or(crate::units::DIPOLE_GAIN_DBI),
            stage.chain.eta_d(),
        )?;
        Ok(TagBudget {
            capacitor: self.storage.to_capacitor()?,
            profile: self.energy.to_profile()?,
            stage,
            beacon,
            tag_antenna,
            model: self.propagation.to_model()?,
            distance_m: self.distance_m,
        })
    }
}

pub fn load_tag_budget(path: &Path) -> Result<TagBudget, ConfigError> {
    TagBudgetConfig::from_toml_str(&read(path)?)?.resolve(path.parent())
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG4: &str = r#"
duration_s = 30.0

[[beacon]]
id = 1
position_m = [0.5, 2.0, 1.2]
erp_dbm = 27.0
antenna = { kind = "dipole" }

[[tag]]
id = 1
position_m = [5.5, 2.0, 1.2]
"#;

    #[test]
    fn minimal_scenario_uses_defaults() {
        let loaded = ScenarioConfig::from_toml_str(FIG4).unwrap().resolve(None).unwrap();
        let s = loaded.scenario;
        assert_eq!(s.room, Room::techtile());
        assert_eq!(s.tags[0].capacitor, StorageCapacitor::reference());
        assert_eq!(s.tags[0].stages.len(), 1);
        assert_eq!(s.beacons[0].frequency.mhz(), 865.7);
        assert!(s.beacons[0].duty.is_continuous());
        assert!(loaded.protocol.is_none());
        let r = crate::sim::run(&s).unwrap();
        assert!((r.tags[0].mean_update_s().unwrap() - 2.289_924).abs() < 1e-5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = FIG4.replace("erp_dbm = 27.0", "erp = 27.0");
        assert!(matches!(
            ScenarioConfig::from_toml_str(&bad),
            Err(ConfigError::Parse(_))
        ));
        let bad = format!("{FIG4}\ncapacitance = 22\n");
        assert!(ScenarioConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn empty_tag_list_is_invalid() {
        let text = FIG4.split("[[tag]]").next().unwrap();
        let err = ScenarioConfig::from_toml_str(text).unwrap().resolve(None).unwrap_err();
        assert!(err.to_string().contains("tag list is empty"));
    }

    #[test]
    fn full_scenario_round_trip() {
        let text = r#"
duration_s = 10.0
seed = 7
room = { size_m = [6.0, 5.0, 3.0] }
propagation = { path_loss_exponent = 2.2, reference_distance_m = 0.5 }

[scheduler]
policy = "deficit_first"
dwell_s = 0.5
default_target_interval_s = 4.0
target = [{ tag_id = 2, interval_s = 1.0 }]

[[beacon]]
id = 1
position_m = [0.5, 2.0, 1.0]
erp_dbm = 27.0
antenna = { kind = "dipole" }
duty_on_s = 1.0
duty_off_s = 0.1

[[beacon]]
id = 2
position_m = [0.5, 2.0, 1.0]
erp_dbm = 33.0
channel = 3
steerable = true
antenna = { kind = "directional", gain_dbi = 5.0, beamwidth_deg = 90.0 }

[[tag]]
id = 2
position_m = [3.0, 1.0, 1.0]
storage = { capacitance_uf = 39.7, v_initial_target_v = 2.3 }
energy = { e_tag_uj = 3.0, rangings_per_fix = 5 }
stage = [{ channels = [1, 2] }, { channels = [3, 4], eta_rf = 0.3 }]
"#;
        let s = ScenarioConfig::from_toml_str(text)
            .unwrap()
            .resolve(None)
            .unwrap()
            .scenario;
        assert_eq!(s.room.size_m, [6.0, 5.0, 3.0]);
        assert_eq!(s.propagation.path_loss_exponent(), 2.2);
        assert_eq!(s.beacons[0].duty, DutySchedule::presence_sensing());
        assert!(s.beacons[1].steerable);
        assert_eq!(s.scheduler.target_interval_s(2), Some(1.0));
        assert_eq!(s.scheduler.target_interval_s(9), Some(4.0));
        let t = &s.tags[0];
        assert_eq!(t.capacitor.capacitance_f(), 39.7e-6);
        assert_eq!(t.capacitor.v_initial_target(), 2.3);
        assert_eq!(t.profile.rangings_per_fix(), 5);
        assert_eq!(t.stages[1].chain.eta_rf().at(-10.0), 0.3);
        assert!(t.stages[0].hears(2) && !t.stages[0].hears(3));
    }

    #[test]
    fn deficit_policy_needs_default_interval() {
        let text = format!("{FIG4}\n[scheduler]\npolicy = \"deficit_first\"\n");
        assert!(ScenarioConfig::from_toml_str(&text).unwrap().resolve(None).is_err());
    }

    #[test]
    fn curve_file_resolves_against_base() {
        let dir = std::env::temp_dir().join(format!("dualwpt-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("curve.csv"), "input_dbm,eta_rf\n-20,0.2\n0,0.5\n").unwrap();
        let text = FIG4.replace(
            "position_m = [5.5, 2.0, 1.2]",
            "position_m = [5.5, 2.0, 1.2]\nstage = [{ eta_rf_curve_csv = \"curve.csv\" }]",
        );
        let s = ScenarioConfig::from_toml_str(&text)
            .unwrap()
            .resolve(Some(&dir))
            .unwrap()
            .scenario;
        assert_eq!(s.tags[0].stages[0].chain.eta_rf().at(-10.0), 0.35);
        assert!(ScenarioConfig::from_toml_str(&text).unwrap().resolve(None).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn plan_configs() {
        let plan = PlanConfig::from_toml_str(
            "band = \"ism2450\"\neirp_dbm = 36.0\nantenna = { kind = \"directional\", gain_dbi = 8.0, beamwidth_deg = 40.0 }\nduty_on_s = 0.03\nduty_off_s = 0.17\nindoor = true\nfhss = true\n",
        )
        .unwrap()
        .to_plan()
        .unwrap();
        assert_eq!(plan.band, Band::Rfid2450);
        assert!(plan.indoor && plan.fhss && !plan.sidelobe_attested);
        assert!(
            PlanConfig::from_toml_str("band = \"rfid868\"\nantenna = { kind = \"dipole\" }\n")
                .unwrap()
                .to_plan()
                .is_err()
        );
        assert!(PlanConfig::from_toml_str("band = \"uhf\"\nantenna = { kind = \"dipole\" }\n").is_err());
    }

    #[test]
    fn budget_defaults() {
        let b = TagBudgetConfig::from_toml_str("").unwrap().resolve(None).unwrap();
        assert_eq!(b.capacitor, StorageCapacitor::reference());
        assert_eq!(b.profile, TagEnergyProfile::default());
        assert!((b.beacon.erp.dbm() - 27.0).abs() < 1e-12);
        let b = TagBudgetConfig::from_toml_str("storage = { capacitance_uf = 39.7 }\n")
            .unwrap()
            .resolve(None)
            .unwrap();
        assert_eq!(b.capacitor.capacitance_f(), 39.7e-6);
    }

    #[test]
    fn protocol_section() {
        let text = format!("{FIG4}\n[measurement_protocol]\npresets = [\"omni_update\", \"dir_update\"]\n");
        let p = ScenarioConfig::from_toml_str(&text)
            .unwrap()
            .resolve(None)
            .unwrap()
            .protocol
            .unwrap();
        assert_eq!(p.presets.len(), 2);
        assert_eq!(p.protocol, MeasurementProtocol::default());
        let bad = text.replace("dir_update", "dir_sideways");
        assert!(ScenarioConfig::from_toml_str(&bad).unwrap().resolve(None).is_err());
    }
}
