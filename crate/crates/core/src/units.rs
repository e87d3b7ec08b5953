//! Unit-safe scalar quantities.
//!
//! Power is stored linearly in watts; dBm is a view computed on demand.
//! Frequencies and distances are strictly positive.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::UnitError;

/// Speed of light in vacuum, m/s (exact SI value).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Gain of a half-wave dipole over an isotropic radiator, dB.
pub const DIPOLE_GAIN_DBI: f64 = 2.15;

/// Convert a dB ratio to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Convert a linear power ratio to dB. Zero maps to `-inf`.
pub fn linear_to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
pub struct Power(f64);

impl Power {
    pub const ZERO: Power = Power(0.0);

    pub fn from_watts(watts: f64) -> Result<Self, UnitError> {
        if watts.is_nan() || watts < 0.0 {
            return Err(UnitError::NegativePower(watts));
        }
        Ok(Power(watts))
    }

    /// Any finite dBm value is valid; `-inf` maps to zero watts.
    pub fn from_dbm(dbm: f64) -> Self {
        dbm_to_watts(dbm)
    }

    pub fn from_milliwatts(mw: f64) -> Result<Self, UnitError> {
        Self::from_watts(mw * 1e-3)
    }

    pub fn watts(self) -> f64 {
        self.0
    }

    pub fn milliwatts(self) -> f64 {
        self.0 * 1e3
    }

    /// dBm view. Returns `-inf` for zero power; use [`Power::try_dbm`] when
    /// a finite value is required.
    pub fn dbm(self) -> f64 {
        10.0 * (self.0 * 1e3).log10()
    }

    pub fn try_dbm(self) -> Result<f64, UnitError> {
        if self.0 > 0.0 {
            Ok(self.dbm())
        } else {
            Err(UnitError::ZeroPowerInDb)
        }
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }

    /// Scale by a dimensionless, non-negative factor.
    pub fn scale(self, factor: f64) -> Self {
        debug_assert!(factor >= 0.0);
        Power(self.0 * factor)
    }

    pub fn plus_db(self, db: f64) -> Self {
        Power(self.0 * db_to_linear(db))
    }
}

impl std::ops::Add for Power {
    type Output = Power;

    fn add(self, rhs: Power) -> Power {
        Power(self.0 + rhs.0)
    }
}

impl std::iter::Sum for Power {
    fn sum<I: Iterator<Item = Power>>(iter: I) -> Power {
        iter.fold(Power::ZERO, |acc, p| acc + p)
    }
}

impl fmt::Display for Power {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 > 0.0 {
            write!(f, "{:.2} dBm", self.dbm())
        } else {
            write!(f, "0 W")
        }
    }
}

/// `10^((p_dbm - 30) / 10)` watts.
pub fn dbm_to_watts(p_dbm: f64) -> Power {
    Power(10f64.powf((p_dbm - 30.0) / 10.0))
}

/// ERP is referenced to a half-wave dipole; EIRP to an isotropic radiator.
pub fn erp_to_eirp(erp: Power) -> Result<Power, UnitError> {
    if erp.watts() <= 0.0 {
        return Err(UnitError::ZeroPowerInDb);
    }
    Ok(erp.plus_db(DIPOLE_GAIN_DBI))
}

pub fn eirp_to_erp(eirp: Power) -> Result<Power, UnitError> {
    if eirp.watts() <= 0.0 {
        return Err(UnitError::ZeroPowerInDb);
    }
    Ok(eirp.plus_db(-DIPOLE_GAIN_DBI))
}

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Frequency(f64);

impl Frequency {
    pub fn from_hz(hz: f64) -> Result<Self, UnitError> {
        if hz.is_finite() && hz > 0.0 {
            Ok(Frequency(hz))
        } else {
            Err(UnitError::NonPositiveFrequency(hz))
        }
    }

    pub fn from_mhz(mhz: f64) -> Result<Self, UnitError> {
        Self::from_hz(mhz * 1e6)
    }

    pub fn hz(self) -> f64 {
        self.0
    }

    pub fn mhz(self) -> f64 {
        self.0 / 1e6
    }
}

impl TryFrom<f64> for Frequency {
    type Error = UnitError;

    fn try_from(hz: f64) -> Result<Self, UnitError> {
        Frequency::from_hz(hz)
    }
}

impl From<Frequency> for f64 {
    fn from(f: Frequency) -> f64 {
        f.0
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} MHz", self.mhz())
    }
}

/// Free-space wavelength `c / f`, metres.
pub fn wavelength(f: Frequency) -> f64 {
    SPEED_OF_LIGHT / f.hz()
}

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Distance(f64);

impl Distance {
    pub fn from_meters(m: f64) -> Result<Self, UnitError> {
        if m.is_finite() && m > 0.0 {
            Ok(Distance(m))
        } else {
            Err(UnitError::NonPositiveDistance(m))
        }
    }

    pub fn meters(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Distance {
    type Error = UnitError;

    fn try_from(m: f64) -> Result<Self, UnitError> {
        Distance::from_meters(m)
    }
}

impl From<Distance> for f64 {
    fn from(d: Distance) -> f64 {
        d.0
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} m", self.0)
    }
}
