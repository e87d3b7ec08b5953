//! Link-budget, harvesting, regulation and event-driven charging models for
//! RF-powered, battery-free positioning tags.
//!
//! The crate is organised bottom-up: [`units`] provides typed power,
//! frequency and distance quantities; [`linkbudget`] turns a beacon and a
//! distance into received power; [`harvester`] turns received power into
//! stored energy and charge times; [`tagmodel`] decides whether that energy
//! pays for a position fix; [`regulations`] checks transmission plans; and
//! [`sim`] runs whole rooms of beacons and tags. [`config`] maps TOML
//! documents onto these types.

// Negated comparisons are used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod harvester;
pub mod linkbudget;
pub mod regulations;
pub mod sim;
pub mod tagmodel;
pub mod units;

pub use error::{ConfigError, HarvestError, LinkError, RegulationError, SimError, TagError, UnitError};
pub use harvester::{
    charge_time, harvested_power, max_coldstart_distance, storage_energy, ChargeTime, ChargeWindow, ColdStartRange,
    EfficiencyChain, EfficiencyCurve, Harvest, HarvesterStage, StorageCapacitor,
};
pub use linkbudget::{received_power, Antenna, Beacon, Position, PropagationModel};
pub use regulations::{check_plan, Band, ComplianceReport, DutySchedule, PlanPower, TransmissionPlan};
pub use sim::{run, Room, Scenario, SchedulerPolicy, SimResult};
pub use tagmodel::{fix_energy, storage_feasible, Tag, TagEnergyProfile};
pub use units::{Distance, Frequency, Power};
