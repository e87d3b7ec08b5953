//! Antennas, beacons and the Friis free-space receive-power model.

use std::f64::consts::PI;

use crate::error::LinkError;
use crate::regulations::DutySchedule;
use crate::units::{db_to_linear, erp_to_eirp, wavelength, Distance, Frequency, Power};

/// A point in room coordinates, metres.
pub type Position = [f64; 3];

pub fn distance_between(a: Position, b: Position) -> f64 {
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    let dz = b[2] - a[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Horizontal azimuth from `from` to `to` in degrees, measured from +x
/// towards +y, in (-180, 180].
pub fn azimuth_deg(from: Position, to: Position) -> f64 {
    (to[1] - from[1]).atan2(to[0] - from[0]).to_degrees()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Pattern {
    Omnidirectional,
    Directional { boresight_azimuth_deg: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Antenna {
    gain_dbi: f64,
    horizontal_beamwidth_deg: f64,
    pattern: Pattern,
    radiation_efficiency: f64,
}

impl Antenna {
    pub fn omnidirectional(gain_dbi: f64, radiation_efficiency: f64) -> Result<Self, LinkError> {
        check_efficiency(radiation_efficiency)?;
        check_gain(gain_dbi)?;
        Ok(Antenna {
            gain_dbi,
            horizontal_beamwidth_deg: 360.0,
            pattern: Pattern::Omnidirectional,
            radiation_efficiency,
        })
    }

    pub fn directional(
        gain_dbi: f64,
        horizontal_beamwidth_deg: f64,
        boresight_azimuth_deg: f64,
        radiation_efficiency: f64,
    ) -> Result<Self, LinkError> {
        check_efficiency(radiation_efficiency)?;
        check_gain(gain_dbi)?;
        if !(horizontal_beamwidth_deg > 0.0 && horizontal_beamwidth_deg <= 360.0) {
            return Err(LinkError::InvalidAntenna(format!(
                "horizontal beamwidth {horizontal_beamwidth_deg} deg outside (0, 360]"
            )));
        }
        if !boresight_azimuth_deg.is_finite() {
            return Err(LinkError::InvalidAntenna("boresight must be finite".into()));
        }
        Ok(Antenna {
            gain_dbi,
            horizontal_beamwidth_deg,
            pattern: Pattern::Directional { boresight_azimuth_deg },
            radiation_efficiency,
        })
    }

    /// Half-wave dipole, 2.15 dBi.
    pub fn dipole(radiation_efficiency: f64) -> Result<Self, LinkError> {
        Self::omnidirectional(crate::units::DIPOLE_GAIN_DBI, radiation_efficiency)
    }

    pub fn gain_dbi(&self) -> f64 {
        self.gain_dbi
    }

    pub fn gain_linear(&self) -> f64 {
        db_to_linear(self.gain_dbi)
    }

    pub fn horizontal_beamwidth_deg(&self) -> f64 {
        self.horizontal_beamwidth_deg
    }

    pub fn pattern(&self) -> Pattern {
        self.pattern
    }

    pub fn radiation_efficiency(&self) -> f64 {
        self.radiation_efficiency
    }

    pub fn is_omnidirectional(&self) -> bool {
        matches!(self.pattern, Pattern::Omnidirectional)
    }

    /// Re-point a directional antenna. No-op for omnidirectional ones.
    pub fn steer_to(&mut self, azimuth_deg: f64) {
        if let Pattern::Directional { boresight_azimuth_deg } = &mut self.pattern {
            *boresight_azimuth_deg = azimuth_deg;
        }
    }
}

fn check_efficiency(eta: f64) -> Result<(), LinkError> {
    if eta > 0.0 && eta <= 1.0 {
        Ok(())
    } else {
        Err(LinkError::InvalidAntenna(format!(
            "radiation efficiency {eta} outside (0, 1]"
        )))
    }
}

fn check_gain(gain_dbi: f64) -> Result<(), LinkError> {
    if gain_dbi.is_finite() {
        Ok(())
    } else {
        Err(LinkError::InvalidAntenna(format!("gain {gain_dbi} dBi is not finite")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Beacon {
    pub id: u32,
    pub position: Position,
    pub antenna: Antenna,
    pub erp: Power,
    pub frequency: Frequency,
    /// High-power channel identifier the beacon transmits on; harvester
    /// stages only see beacons on channels they are tuned to.
    pub channel: u8,
    pub duty: DutySchedule,
    /// Whether a beam scheduler may re-point this beacon.
    pub steerable: bool,
}

impl Beacon {
    pub fn new(
        id: u32,
        position: Position,
        antenna: Antenna,
        erp: Power,
        frequency: Frequency,
        channel: u8,
        duty: DutySchedule,
    ) -> Result<Self, LinkError> {
        if erp.watts() <= 0.0 {
            return Err(LinkError::InvalidAntenna(format!("beacon {id}: ERP must be positive")));
        }
        Ok(Beacon {
            id,
            position,
            antenna,
            erp,
            frequency,
            channel,
            duty,
            steerable: false,
        })
    }

    pub fn steerable(mut self, steerable: bool) -> Self {
        self.steerable = steerable;
        self
    }

    pub fn eirp(&self) -> Power {
        erp_to_eirp(self.erp).expect("beacon ERP is positive")
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagationModel {
    path_loss_exponent: f64,
    reference_distance_m: f64,
    polarization_factor: f64,
}

/// Smallest reference distance accepted. Below roughly a wavelength the
/// far-field formula is only a rough approximation.
pub const MIN_REFERENCE_DISTANCE_M: f64 = 0.25;

impl Default for PropagationModel {
    fn default() -> Self {
        PropagationModel {
            path_loss_exponent: 2.0,
            reference_distance_m: 1.0,
            polarization_factor: 1.0,
        }
    }
}

impl PropagationModel {
    pub fn new(path_loss_exponent: f64, reference_distance_m: f64) -> Result<Self, LinkError> {
        if !(path_loss_exponent >= 2.0 && path_loss_exponent.is_finite()) {
            return Err(LinkError::InvalidModel(format!(
                "path-loss exponent {path_loss_exponent} must be >= 2"
            )));
        }
        if !(reference_distance_m >= MIN_REFERENCE_DISTANCE_M && reference_distance_m.is_finite()) {
            return Err(LinkError::InvalidModel(format!(
                "reference distance {reference_distance_m} m must be >= {MIN_REFERENCE_DISTANCE_M} m"
            )));
        }
        Ok(PropagationModel {
            path_loss_exponent,
            reference_distance_m,
            polarization_factor: 1.0,
        })
    }

    /// Extra linear loss factor in (0, 1] applied to every link.
    pub fn with_polarization_factor(mut self, factor: f64) -> Result<Self, LinkError> {
        if !(factor > 0.0 && factor <= 1.0) {
            return Err(LinkError::InvalidModel(format!(
                "polarization factor {factor} outside (0, 1]"
            )));
        }
        self.polarization_factor = factor;
        Ok(self)
    }

    pub fn path_loss_exponent(&self) -> f64 {
        self.path_loss_exponent
    }

    pub fn reference_distance_m(&self) -> f64 {
        self.reference_distance_m
    }

    pub fn polarization_factor(&self) -> f64 {
        self.polarization_factor
    }

    /// Path gain at the reference distance, `(λ / 4π d₀)²`.
    fn reference_gain(&self, f: Frequency) -> f64 {
        let ratio = wavelength(f) / (4.0 * PI * self.reference_distance_m);
        ratio * ratio
    }
}

/// Dimensionless free-space power ratio between isotropic antennas.
///
/// For exponent 2 this is `(λ / 4πd)²`; otherwise the reference-distance
/// form `(λ / 4πd₀)² · (d₀ / d)ⁿ`.
pub fn free_space_path_gain(d: Distance, f: Frequency, model: &PropagationModel) -> Result<f64, LinkError> {
    let d0 = model.reference_distance_m;
    if d.meters() < d0 {
        return Err(LinkError::NearField {
            distance_m: d.meters(),
            reference_m: d0,
        });
    }
    if model.path_loss_exponent == 2.0 {
        let ratio = wavelength(f) / (4.0 * PI * d.meters());
        Ok(ratio * ratio)
    } else {
        Ok(model.reference_gain(f) * (d0 / d.meters()).powf(model.path_loss_exponent))
    }
}

/// Power available at the tag antenna terminals.
///
/// Applies the tag antenna gain but not its radiation efficiency; the latter
/// is the first stage of the harvester efficiency chain.
pub fn received_power(
    beacon: &Beacon,
    tag_antenna: &Antenna,
    d: Distance,
    model: &PropagationModel,
) -> Result<Power, LinkError> {
    let path_gain = free_space_path_gain(d, beacon.frequency, model)?;
    Ok(beacon
        .eirp()
        .scale(tag_antenna.gain_linear() * path_gain * model.polarization_factor))
}

/// Whether the tag lies within the beacon's horizontal half-beamwidth.
/// Elevation is ignored. A tag directly above or below the beacon counts as
/// inside the beam.
pub fn in_beam(beacon: &Beacon, tag_position: Position) -> Result<bool, LinkError> {
    let boresight = match beacon.antenna.pattern {
        Pattern::Omnidirectional => return Err(LinkError::Omnidirectional),
        Pattern::Directional { boresight_azimuth_deg } => boresight_azimuth_deg,
    };
    let dx = tag_position[0] - beacon.position[0];
    let dy = tag_position[1] - beacon.position[1];
    if dx == 0.0 && dy == 0.0 {
        return Ok(true);
    }
    let offset = angle_difference_deg(dy.atan2(dx).to_degrees(), boresight);
    Ok(offset <= beacon.antenna.horizontal_beamwidth_deg / 2.0)
}

/// Absolute smallest angle between two azimuths, in [0, 180].
fn angle_difference_deg(a: f64, b: f64) -> f64 {
    let diff = (a - b).rem_euclid(360.0);
    if diff > 180.0 {
        360.0 - diff
    } else {
        diff
    }
}

/// Whether a beacon currently illuminates a tag position: always for
/// omnidirectional antennas, otherwise only inside the beam.
pub fn covers(beacon: &Beacon, tag_position: Position) -> bool {
    match beacon.antenna.pattern {
        Pattern::Omnidirectional => true,
        Pattern::Directional { .. } => in_beam(beacon, tag_position).unwrap_or(false),
    }
}
