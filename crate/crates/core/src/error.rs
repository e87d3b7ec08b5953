use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UnitError {
    #[error("power must be a non-negative number of watts, got {0}")]
    NegativePower(f64),
    #[error("zero power has no finite dB representation")]
    ZeroPowerInDb,
    #[error("frequency must be positive and finite, got {0} Hz")]
    NonPositiveFrequency(f64),
    #[error("distance must be positive and finite, got {0} m")]
    NonPositiveDistance(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinkError {
    #[error("distance {distance_m} m is inside the reference distance {reference_m} m (near field)")]
    NearField { distance_m: f64, reference_m: f64 },
    #[error("in_beam is undefined for an omnidirectional antenna")]
    Omnidirectional,
    #[error("invalid antenna: {0}")]
    InvalidAntenna(String),
    #[error("invalid propagation model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Unit(#[from] UnitError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarvestError {
    #[error("voltage window is reversed: {from_v} V -> {to_v} V")]
    ReversedWindow { from_v: f64, to_v: f64 },
    #[error("invalid efficiency {name} = {value}; must lie in (0, 1]")]
    Efficiency { name: &'static str, value: f64 },
    #[error("invalid efficiency curve: {0}")]
    Curve(String),
    #[error("invalid capacitor: {0}")]
    Capacitor(String),
    #[error("invalid harvester stage: {0}")]
    Stage(String),
    #[error("stage count {stages} does not match received-power count {powers}")]
    LengthMismatch { stages: usize, powers: usize },
    #[error("negative power segment {0} W")]
    NegativeSegment(f64),
    #[error(transparent)]
    Link(#[from] LinkError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TagError {
    #[error("not charged: v_now {v_now} V is below v_chrdy {v_chrdy} V")]
    NotCharged { v_now: f64, v_chrdy: f64 },
    #[error("invalid energy profile: {0}")]
    Profile(String),
    #[error("tag {id}: {reason}")]
    InvalidTag { id: u32, reason: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegulationError {
    #[error("plan is not compliant: {0}")]
    NotCompliant(String),
    #[error("invalid duty schedule: {0}")]
    Schedule(String),
    #[error("channel {channel} does not exist in band {band}")]
    UnknownChannel { band: &'static str, channel: u8 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Harvest(#[from] HarvestError),
    #[error(transparent)]
    Tag(#[from] TagError),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Unit(#[from] UnitError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Harvest(#[from] HarvestError),
    #[error(transparent)]
    Tag(#[from] TagError),
    #[error(transparent)]
    Regulation(#[from] RegulationError),
    #[error(transparent)]
    Sim(#[from] SimError),
}
