//! Energy budget of an energy-neutral positioning tag.

use crate::error::TagError;
use crate::harvester::{storage_energy, HarvesterStage, StorageCapacitor};
use crate::linkbudget::{Antenna, Position};

/// Energy of one ranging measurement at the tag, J.
pub const DEFAULT_E_TAG_J: f64 = 3.15e-6;
/// Rangings needed for one 3D position estimate.
pub const DEFAULT_RANGINGS_PER_FIX: u32 = 4;
/// Acoustic reception window, s.
pub const DEFAULT_RX_WINDOW_S: f64 = 1e-3;

/// Optional breakdown of the per-ranging energy into active power over the
/// reception window plus a turn-on cost.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyDecomposition {
    pub active_power_w: f64,
    pub rx_window_s: f64,
    pub turnon_time_s: Option<f64>,
    pub turnon_energy_j: f64,
}

impl EnergyDecomposition {
    pub fn total_j(&self) -> f64 {
        self.active_power_w * self.rx_window_s + self.turnon_energy_j
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TagEnergyProfile {
    e_tag_j: f64,
    rangings_per_fix: u32,
    decomposition: Option<EnergyDecomposition>,
}

impl Default for TagEnergyProfile {
    fn default() -> Self {
        TagEnergyProfile {
            e_tag_j: DEFAULT_E_TAG_J,
            rangings_per_fix: DEFAULT_RANGINGS_PER_FIX,
            decomposition: None,
        }
    }
}

impl TagEnergyProfile {
    pub fn new(e_tag_j: f64, rangings_per_fix: u32) -> Result<Self, TagError> {
        if !(e_tag_j > 0.0 && e_tag_j.is_finite()) {
            return Err(TagError::Profile(format!("e_tag {e_tag_j} J must be positive")));
        }
        if rangings_per_fix == 0 {
            return Err(TagError::Profile("rangings_per_fix must be at least 1".into()));
        }
        Ok(TagEnergyProfile {
            e_tag_j,
            rangings_per_fix,
            decomposition: None,
        })
    }

    /// Derive the per-ranging energy from its decomposition.
    pub fn from_decomposition(decomposition: EnergyDecomposition, rangings_per_fix: u32) -> Result<Self, TagError> {
        let mut profile = Self::new(decomposition.total_j(), rangings_per_fix)?;
        profile.decomposition = Some(decomposition);
        Ok(profile)
    }

    /// Attach a decomposition as metadata; it must agree with `e_tag`
    /// within 1 %.
    pub fn with_decomposition(mut self, decomposition: EnergyDecomposition) -> Result<Self, TagError> {
        let total = decomposition.total_j();
        if ((total - self.e_tag_j) / self.e_tag_j).abs() > 0.01 {
            return Err(TagError::Profile(format!(
                "decomposition gives {:.4} uJ but e_tag is {:.4} uJ",
                total * 1e6,
                self.e_tag_j * 1e6
            )));
        }
        self.decomposition = Some(decomposition);
        Ok(self)
    }

    pub fn e_tag_j(&self) -> f64 {
        self.e_tag_j
    }

    pub fn rangings_per_fix(&self) -> u32 {
        self.rangings_per_fix
    }

    pub fn decomposition(&self) -> Option<&EnergyDecomposition> {
        self.decomposition.as_ref()
    }
}

/// Energy of one position fix.
pub fn fix_energy(profile: &TagEnergyProfile) -> f64 {
    f64::from(profile.rangings_per_fix) * profile.e_tag_j
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    /// Window energy `C·(v_chrdy² − v_ovdis²)/2`.
    pub stored_j: f64,
    /// Stored energy after LDO losses.
    pub usable_j: f64,
    pub required_j: f64,
    /// `usable − required`; negative when infeasible.
    pub margin_j: f64,
}

/// Whether one charge window holds enough usable energy for a fix.
pub fn storage_feasible(cap: &StorageCapacitor, profile: &TagEnergyProfile, eta_ldo: f64) -> Feasibility {
    let stored = storage_energy(cap, cap.v_ovdis(), cap.v_chrdy()).expect("capacitor window is ordered");
    let usable = stored * eta_ldo;
    let required = fix_energy(profile);
    Feasibility {
        feasible: usable >= required,
        stored_j: stored,
        usable_j: usable,
        required_j: required,
        margin_j: usable - required,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixRecord {
    pub time_s: f64,
    /// Energy drawn from the capacitor by the fix.
    pub energy_j: f64,
}

/// Spend one charge window on a fix: the capacitor drops from at least
/// `v_chrdy` to exactly `v_ovdis`.
pub fn perform_fix(cap: &StorageCapacitor, time_s: f64) -> Result<(StorageCapacitor, FixRecord), TagError> {
    if cap.v_now < cap.v_chrdy() {
        return Err(TagError::NotCharged {
            v_now: cap.v_now,
            v_chrdy: cap.v_chrdy(),
        });
    }
    let mut after = *cap;
    after.v_now = cap.v_ovdis();
    let energy = cap.stored_energy_j() - after.stored_energy_j();
    Ok((
        after,
        FixRecord {
            time_s,
            energy_j: energy,
        },
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tag {
    pub id: u32,
    pub position: Position,
    pub antenna: Antenna,
    /// One or two harvester stages feeding the same capacitor.
    pub stages: Vec<HarvesterStage>,
    pub capacitor: StorageCapacitor,
    pub profile: TagEnergyProfile,
}

impl Tag {
    pub fn new(
        id: u32,
        position: Position,
        antenna: Antenna,
        stages: Vec<HarvesterStage>,
        capacitor: StorageCapacitor,
        profile: TagEnergyProfile,
    ) -> Result<Self, TagError> {
        let tag = Tag {
            id,
            position,
            antenna,
            stages,
            capacitor,
            profile,
        };
        tag.validate()?;
        Ok(tag)
    }

    pub fn validate(&self) -> Result<(), TagError> {
        let invalid = |reason: String| TagError::InvalidTag { id: self.id, reason };
        if !(1..=2).contains(&self.stages.len()) {
            return Err(invalid(format!(
                "needs 1 or 2 harvester stages, has {}",
                self.stages.len()
            )));
        }
        if !(self.capacitor.v_ovdis() < self.capacitor.v_chrdy()) {
            return Err(invalid("v_ovdis must be strictly below v_chrdy".into()));
        }
        if self.position.iter().any(|c| !c.is_finite()) {
            return Err(invalid("position must be finite".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fix_energy_examples() {
        assert!((fix_energy(&TagEnergyProfile::default()) - 12.6e-6).abs() < 1e-15);
        let one = TagEnergyProfile::new(3.15e-6, 1).unwrap();
        assert_eq!(fix_energy(&one), 3.15e-6);
        let five = TagEnergyProfile::new(5e-6, 4).unwrap();
        assert!((fix_energy(&five) - 20e-6).abs() < 1e-18);
        assert!(TagEnergyProfile::new(0.0, 4).is_err());
        assert!(TagEnergyProfile::new(3.15e-6, 0).is_err());
    }

    #[test]
    fn reference_budget_is_feasible() {
        let cap = StorageCapacitor::reference();
        let f = storage_feasible(&cap, &TagEnergyProfile::default(), 0.7407);
        assert!(f.feasible);
        assert!((f.margin_j - 1.8214e-6).abs() < 1e-10);
        let f = storage_feasible(&cap, &TagEnergyProfile::default(), 1.0);
        assert!(f.feasible);
        assert!((f.margin_j - 6.87e-6).abs() < 1e-12);
    }

    #[test]
    fn empty_window_is_infeasible() {
        let cap = StorageCapacitor::new(22e-6, 3.1, 3.1).unwrap();
        let f = storage_feasible(&cap, &TagEnergyProfile::default(), 0.7407);
        assert!(!f.feasible);
        assert!((f.margin_j + 12.6e-6).abs() < 1e-15);
    }

    #[test]
    fn fix_lands_on_ovdis() {
        let cap = StorageCapacitor::reference().with_voltage(3.1).unwrap();
        let (after, rec) = perform_fix(&cap, 4.2).unwrap();
        assert_eq!(after.v_now, 2.8);
        assert_eq!(rec.time_s, 4.2);
        assert!((rec.energy_j - 19.47e-6).abs() < 1e-12);
        assert!(matches!(perform_fix(&after, 4.3), Err(TagError::NotCharged { .. })));

        let low = StorageCapacitor::reference().with_voltage(3.05).unwrap();
        assert!(matches!(perform_fix(&low, 0.0), Err(TagError::NotCharged { .. })));
    }

    #[test]
    fn decomposition_consistency() {
        // 2.15 mW for 1 ms plus 1 uJ turn-on
        let d = EnergyDecomposition {
            active_power_w: 2.15e-3,
            rx_window_s: DEFAULT_RX_WINDOW_S,
            turnon_time_s: Some(0.5e-3),
            turnon_energy_j: 1e-6,
        };
        assert!(TagEnergyProfile::default().with_decomposition(d).is_ok());
        let p = TagEnergyProfile::from_decomposition(d, 4).unwrap();
        assert!((p.e_tag_j() - 3.15e-6).abs() < 1e-15);
        let off = EnergyDecomposition {
            turnon_energy_j: 1.2e-6,
            ..d
        };
        assert!(TagEnergyProfile::default().with_decomposition(off).is_err());
    }

    proptest! {
        #[test]
        fn wider_window_never_loses_feasibility(
            v_ovdis in 1.0f64..3.0, span in 0.0f64..1.0, widen in 0.0f64..0.5, eta in 0.5f64..1.0,
        ) {
            let narrow = StorageCapacitor::new(22e-6, v_ovdis + span, v_ovdis).unwrap();
            let wide_up = StorageCapacitor::new(22e-6, v_ovdis + span + widen, v_ovdis).unwrap();
            let wide_down = StorageCapacitor::new(22e-6, v_ovdis + span, (v_ovdis - widen).max(0.0)).unwrap();
            let p = TagEnergyProfile::default();
            let f = storage_feasible(&narrow, &p, eta);
            if f.feasible {
                prop_assert!(storage_feasible(&wide_up, &p, eta).feasible);
                prop_assert!(storage_feasible(&wide_down, &p, eta).feasible);
            }
        }

        #[test]
        fn charge_fix_cycles_stay_in_window(cycles in 1usize..50, overshoot in 0.0f64..0.2) {
            let mut cap = StorageCapacitor::reference().with_ceiling(3.3).unwrap();
            for i in 0..cycles {
                cap.v_now = (cap.v_chrdy() + overshoot).min(cap.v_ceiling());
                let (after, _) = perform_fix(&cap, i as f64).unwrap();
                prop_assert_eq!(after.v_now, after.v_ovdis());
                cap = after;
                prop_assert!(cap.v_now >= cap.v_ovdis() && cap.v_now <= cap.v_ceiling());
            }
        }
    }
}
