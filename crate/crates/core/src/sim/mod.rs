//! Event-driven charging simulation of a room with beacons and tags.
//!
//! Harvested power is piecewise constant: it only changes when a beacon
//! toggles its duty schedule, a steerable beam is re-pointed, or a tag
//! spends its charge on a fix. Between those instants the crossing of
//! `v_chrdy` is solved in closed form, so the engine never steps time on a
//! fixed grid.

mod export;
mod scheduler;
mod sweep;

pub use export::{events_csv, summary_csv, summary_text};
pub use scheduler::{next_beam_target, SchedulerPolicy, TagSchedState};
pub use sweep::{
    charge_time_family, distance_grid, parse_measurements_csv, replay_measurement_protocol, sweep_charge_time,
    FamilyRow, MeasurementProtocol, ProtocolPreset, ProtocolRow, ProtocolTable, SweepRow, SweepSetup, SweepValue,
};

use std::collections::BTreeSet;
use std::fmt;

use crate::error::SimError;
use crate::harvester::{harvested_power, StorageCapacitor};
use crate::linkbudget::{azimuth_deg, covers, distance_between, received_power, Beacon, PropagationModel};
use crate::tagmodel::{perform_fix, Tag};
use crate::units::{Distance, Power};

/// Axis-aligned room with one corner at the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Room {
    pub size_m: [f64; 3],
}

impl Room {
    /// 8 × 4 × 2.4 m test room.
    pub fn techtile() -> Self {
        Room {
            size_m: [8.0, 4.0, 2.4],
        }
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        p.iter().zip(self.size_m).all(|(&c, size)| c >= 0.0 && c <= size)
    }

    pub fn center(&self) -> [f64; 3] {
        [self.size_m[0] / 2.0, self.size_m[1] / 2.0, self.size_m[2] / 2.0]
    }
}

impl Default for Room {
    fn default() -> Self {
        Room::techtile()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub room: Room,
    pub beacons: Vec<Beacon>,
    pub tags: Vec<Tag>,
    pub propagation: PropagationModel,
    pub scheduler: SchedulerPolicy,
    pub duration_s: f64,
    /// Reserved; every model in the engine is deterministic.
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        let invalid = |msg: String| Err(SimError::InvalidScenario(msg));
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return invalid(format!("duration {} s must be positive", self.duration_s));
        }
        if self.room.size_m.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return invalid("room dimensions must be positive".into());
        }
        if self.tags.is_empty() {
            return invalid("tag list is empty".into());
        }
        if let Err(e) = self.scheduler.validate() {
            return invalid(e);
        }
        let mut ids = BTreeSet::new();
        for tag in &self.tags {
            tag.validate()?;
            if !ids.insert(tag.id) {
                return invalid(format!("duplicate tag id {}", tag.id));
            }
            if !self.room.contains(tag.position) {
                return invalid(format!("tag {} at {:?} is outside the room", tag.id, tag.position));
            }
            if tag.stages.len() == 2 && !tag.stages[0].tuned_channels.is_disjoint(&tag.stages[1].tuned_channels) {
                return invalid(format!("tag {}: harvester stages share a channel", tag.id));
            }
        }
        let mut ids = BTreeSet::new();
        let mut steerable = 0;
        for b in &self.beacons {
            if !ids.insert(b.id) {
                return invalid(format!("duplicate beacon id {}", b.id));
            }
            if !self.room.contains(b.position) {
                return invalid(format!("beacon {} at {:?} is outside the room", b.id, b.position));
            }
            if b.steerable {
                steerable += 1;
                if b.antenna.is_omnidirectional() {
                    return invalid(format!("beacon {} is steerable but omnidirectional", b.id));
                }
            }
            for tag in &self.tags {
                let d = distance_between(b.position, tag.position);
                if d < self.propagation.reference_distance_m() {
                    return invalid(format!(
                        "tag {} is {d:.3} m from beacon {}, inside the {} m reference distance",
                        tag.id,
                        b.id,
                        self.propagation.reference_distance_m()
                    ));
                }
            }
        }
        if steerable > 1 {
            return invalid("at most one steerable beacon is supported".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    DutyOn,
    DutyOff,
    TagCharged,
    FixPerformed,
    BeamRetarget,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::DutyOn => "duty_on",
            EventKind::DutyOff => "duty_off",
            EventKind::TagCharged => "tag_charged",
            EventKind::FixPerformed => "fix_performed",
            EventKind::BeamRetarget => "beam_retarget",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimEvent {
    pub time_s: f64,
    pub kind: EventKind,
    /// Tag concerned; for `beam_retarget`, the new target.
    pub tag_id: Option<u32>,
    pub beacon_id: Option<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TagResult {
    pub id: u32,
    /// Time of the first fix; `None` if the tag never charged.
    pub initial_charge_s: Option<f64>,
    pub fix_times_s: Vec<f64>,
    pub initial_energy_j: f64,
    pub final_energy_j: f64,
    pub harvested_j: f64,
    pub spent_on_fixes_j: f64,
}

impl TagResult {
    pub fn update_intervals(&self) -> Vec<f64> {
        self.fix_times_s.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn mean_update_s(&self) -> Option<f64> {
        let iv = self.update_intervals();
        (!iv.is_empty()).then(|| iv.iter().sum::<f64>() / iv.len() as f64)
    }

    pub fn min_update_s(&self) -> Option<f64> {
        self.update_intervals().into_iter().reduce(f64::min)
    }

    pub fn max_update_s(&self) -> Option<f64> {
        self.update_intervals().into_iter().reduce(f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeaconResult {
    pub id: u32,
    pub on_time_s: f64,
    /// Total radiated energy, EIRP over transmit antenna gain times on-time.
    pub radiated_energy_j: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimResult {
    pub duration_s: f64,
    pub tags: Vec<TagResult>,
    pub beacons: Vec<BeaconResult>,
    pub events: Vec<SimEvent>,
}

impl SimResult {
    pub fn tag(&self, id: u32) -> Option<&TagResult> {
        self.tags.iter().find(|t| t.id == id)
    }
}

struct BeaconState {
    beacon: Beacon,
    on: bool,
    /// Index of the next on→off or off→on boundary.
    cycle: u64,
    next_toggle_s: f64,
    on_time_s: f64,
}

impl BeaconState {
    fn new(beacon: Beacon) -> Self {
        let next = if beacon.duty.is_continuous() {
            f64::INFINITY
        } else {
            beacon.duty.on_s()
        };
        BeaconState {
            beacon,
            on: true,
            cycle: 0,
            next_toggle_s: next,
            on_time_s: 0.0,
        }
    }

    /// Flip the transmitter and compute the next boundary from the cycle
    /// count, so long runs do not accumulate rounding drift.
    fn toggle(&mut self) {
        let duty = self.beacon.duty;
        if self.on {
            self.on = false;
            self.next_toggle_s = (self.cycle + 1) as f64 * duty.period_s();
        } else {
            self.on = true;
            self.cycle += 1;
            self.next_toggle_s = self.cycle as f64 * duty.period_s() + duty.on_s();
        }
    }
}

struct TagState {
    cap: StorageCapacitor,
    last_fix_s: Option<f64>,
    result: TagResult,
}

/// Run the scenario to completion.
pub fn run(scenario: &Scenario) -> Result<SimResult, SimError> {
    scenario.validate()?;
    let mut engine = Engine::new(scenario)?;
    engine.run();
    Ok(engine.finish())
}

struct Engine<'a> {
    scenario: &'a Scenario,
    now: f64,
    beacons: Vec<BeaconState>,
    tags: Vec<TagState>,
    /// Tag indices in identifier order.
    tag_order: Vec<usize>,
    steerable: Option<usize>,
    target: Option<u32>,
    retarget_count: u64,
    next_retarget_s: f64,
    events: Vec<SimEvent>,
}

impl<'a> Engine<'a> {
    fn new(scenario: &'a Scenario) -> Result<Self, SimError> {
        let beacons: Vec<BeaconState> = scenario.beacons.iter().cloned().map(BeaconState::new).collect();
        let tags = scenario
            .tags
            .iter()
            .map(|t| TagState {
                cap: t.capacitor,
                last_fix_s: None,
                result: TagResult {
                    id: t.id,
                    initial_charge_s: None,
                    fix_times_s: Vec::new(),
                    initial_energy_j: t.capacitor.stored_energy_j(),
                    final_energy_j: 0.0,
                    harvested_j: 0.0,
                    spent_on_fixes_j: 0.0,
                },
            })
            .collect();
        let mut tag_order: Vec<usize> = (0..scenario.tags.len()).collect();
        tag_order.sort_by_key(|&i| scenario.tags[i].id);
        let steerable = beacons.iter().position(|b| b.beacon.steerable);
        let next_retarget_s = match (steerable, scenario.scheduler.dwell_s()) {
            (Some(_), Some(_)) => 0.0,
            _ => f64::INFINITY,
        };
        Ok(Engine {
            scenario,
            now: 0.0,
            beacons,
            tags,
            tag_order,
            steerable,
            target: None,
            retarget_count: 0,
            next_retarget_s,
            events: Vec::new(),
        })
    }

    fn push(&mut self, kind: EventKind, tag_id: Option<u32>, beacon_id: Option<u32>) {
        self.events.push(SimEvent {
            time_s: self.now,
            kind,
            tag_id,
            beacon_id,
        });
    }

    /// Power into each tag's capacitor under the current beacon state.
    fn tag_powers(&self) -> Vec<f64> {
        let model = &self.scenario.propagation;
        self.scenario
            .tags
            .iter()
            .map(|tag| {
                tag.stages
                    .iter()
                    .map(|stage| {
                        let rx: Power = self
                            .beacons
                            .iter()
                            .filter(|b| b.on && stage.hears(b.beacon.channel) && covers(&b.beacon, tag.position))
                            .map(|b| {
                                let d = Distance::from_meters(distance_between(b.beacon.position, tag.position))
                                    .expect("validated distance");
                                received_power(&b.beacon, &tag.antenna, d, model).expect("validated distance")
                            })
                            .sum();
                        harvested_power(rx, stage).power_w
                    })
                    .sum()
            })
            .collect()
    }

    fn run(&mut self) {
        let end = self.scenario.duration_s;
        for i in 0..self.beacons.len() {
            let id = self.beacons[i].beacon.id;
            self.push(EventKind::DutyOn, None, Some(id));
        }
        self.process_boundaries();
        self.process_crossings(&vec![false; self.tags.len()]);

        loop {
            let powers = self.tag_powers();
            let boundary = self
                .beacons
                .iter()
                .map(|b| b.next_toggle_s)
                .fold(self.next_retarget_s.min(end), f64::min);
            let crossings: Vec<f64> = self
                .tags
                .iter()
                .zip(&powers)
                .map(|(t, &p)| {
                    if p > 0.0 {
                        let need = 0.5 * t.cap.capacitance_f() * (t.cap.v_chrdy().powi(2) - t.cap.v_now.powi(2));
                        self.now + need.max(0.0) / p
                    } else {
                        f64::INFINITY
                    }
                })
                .collect();
            let next = crossings.iter().copied().fold(boundary, f64::min);
            if next > end {
                self.advance(end, &powers, &crossings);
                break;
            }
            let crossed = self.advance(next, &powers, &crossings);
            self.process_crossings(&crossed);
            if self.now >= end {
                break;
            }
            self.process_boundaries();
        }
    }

    /// Move every tag and beacon forward to `to`. Returns which tags reach
    /// `v_chrdy` exactly at `to`.
    fn advance(&mut self, to: f64, powers: &[f64], crossings: &[f64]) -> Vec<bool> {
        let dt = to - self.now;
        for b in &mut self.beacons {
            if b.on {
                b.on_time_s += dt;
            }
        }
        let mut crossed = vec![false; self.tags.len()];
        for (i, t) in self.tags.iter_mut().enumerate() {
            let cap = &mut t.cap;
            if crossings[i] <= to {
                cap.v_now = cap.v_chrdy();
                crossed[i] = true;
            } else if powers[i] > 0.0 {
                cap.v_now = cap.voltage_after(powers[i] * dt).min(cap.v_chrdy());
            }
            t.result.harvested_j += powers[i] * dt;
        }
        self.now = to;
        crossed
    }

    fn process_crossings(&mut self, crossed: &[bool]) {
        for k in 0..self.tag_order.len() {
            let i = self.tag_order[k];
            let charged = crossed[i] || self.tags[i].cap.v_now >= self.tags[i].cap.v_chrdy();
            if !charged {
                continue;
            }
            let id = self.scenario.tags[i].id;
            self.push(EventKind::TagCharged, Some(id), None);
            let t = &mut self.tags[i];
            let (cap, record) = perform_fix(&t.cap, self.now).expect("tag is charged");
            t.cap = cap;
            t.last_fix_s = Some(self.now);
            t.result.spent_on_fixes_j += record.energy_j;
            t.result.fix_times_s.push(self.now);
            t.result.initial_charge_s.get_or_insert(self.now);
            self.push(EventKind::FixPerformed, Some(id), None);
        }
    }

    fn process_boundaries(&mut self) {
        for i in 0..self.beacons.len() {
            if self.beacons[i].next_toggle_s == self.now {
                self.beacons[i].toggle();
                let kind = if self.beacons[i].on {
                    EventKind::DutyOn
                } else {
                    EventKind::DutyOff
                };
                let id = self.beacons[i].beacon.id;
                self.push(kind, None, Some(id));
            }
        }
        if self.next_retarget_s == self.now {
            self.retarget();
        }
    }

    fn retarget(&mut self) {
        let dwell = self.scenario.scheduler.dwell_s().expect("active scheduler");
        let states: Vec<TagSchedState> = self
            .scenario
            .tags
            .iter()
            .zip(&self.tags)
            .map(|(tag, st)| TagSchedState {
                id: tag.id,
                last_fix_s: st.last_fix_s,
            })
            .collect();
        let choice = next_beam_target(&self.scenario.scheduler, &states, self.target, self.now);
        self.retarget_count += 1;
        self.next_retarget_s = self.retarget_count as f64 * dwell;
        let (Some(target), Some(bi)) = (choice, self.steerable) else {
            return;
        };
        let tag_pos = self
            .scenario
            .tags
            .iter()
            .find(|t| t.id == target)
            .expect("target is a known tag")
            .position;
        let beacon = &mut self.beacons[bi].beacon;
        beacon.antenna.steer_to(azimuth_deg(beacon.position, tag_pos));
        let beacon_id = beacon.id;
        self.target = Some(target);
        self.push(EventKind::BeamRetarget, Some(target), Some(beacon_id));
    }

    fn finish(self) -> SimResult {
        let mut tags: Vec<TagResult> = self
            .tags
            .into_iter()
            .map(|mut t| {
                t.result.final_energy_j = t.cap.stored_energy_j();
                t.result
            })
            .collect();
        tags.sort_by_key(|t| t.id);
        let beacons = self
            .beacons
            .iter()
            .map(|b| BeaconResult {
                id: b.beacon.id,
                on_time_s: b.on_time_s,
                radiated_energy_j: b.beacon.eirp().watts() / b.beacon.antenna.gain_linear() * b.on_time_s,
            })
            .collect();
        SimResult {
            duration_s: self.scenario.duration_s,
            tags,
            beacons,
            events: self.events,
        }
    }
}
