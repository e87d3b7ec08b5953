//! Fixtures shared by the charging benchmarks.

use dualwpt_core::harvester::{EfficiencyChain, HarvesterStage, StorageCapacitor};
use dualwpt_core::linkbudget::{Antenna, Beacon, PropagationModel};
use dualwpt_core::regulations::DutySchedule;
use dualwpt_core::sim::{Room, Scenario, SchedulerPolicy, SweepSetup};
use dualwpt_core::tagmodel::{Tag, TagEnergyProfile};
use dualwpt_core::units::{dbm_to_watts, Frequency};

fn beacon(id: u32, erp_dbm: f64, antenna: Antenna, channel: u8, duty: DutySchedule) -> Beacon {
    Beacon::new(
        id,
        [0.5, 2.0, 1.2],
        antenna,
        dbm_to_watts(erp_dbm),
        Frequency::from_mhz(865.7).expect("positive frequency"),
        channel,
        duty,
    )
    .expect("positive ERP")
}

/// 27 dBm ERP dipole beacon feeding the default tag.
pub fn omni_sweep_setup() -> SweepSetup {
    let chain = EfficiencyChain::rfid_868();
    SweepSetup {
        beacon: beacon(
            1,
            27.0,
            Antenna::dipole(1.0).expect("dipole"),
            1,
            DutySchedule::continuous(),
        ),
        tag_antenna: Antenna::dipole(chain.eta_d()).expect("dipole"),
        stage: HarvesterStage::new(chain),
        capacitor: StorageCapacitor::reference(),
        model: PropagationModel::new(2.0, 0.25).expect("valid model"),
    }
}

/// A room with a presence-sensing omni beacon, a steerable 33 dBm patch on
/// round-robin and `n_tags` dual-stage tags spread over the floor.
pub fn steered_room(n_tags: u32, duration_s: f64) -> Scenario {
    let tags = (0..n_tags)
        .map(|i| {
            let x = 1.5 + 6.0 * f64::from(i % 5) / 4.0;
            let y = 0.5 + 3.0 * f64::from(i / 5 % 4) / 3.0;
            Tag::new(
                i + 1,
                [x, y, 1.0],
                Antenna::dipole(0.7517).expect("dipole"),
                vec![
                    HarvesterStage::new(EfficiencyChain::rfid_868()).tuned_to([1, 2]),
                    HarvesterStage::new(EfficiencyChain::rfid_868()).tuned_to([3, 4]),
                ],
                StorageCapacitor::reference(),
                TagEnergyProfile::default(),
            )
            .expect("valid tag")
        })
        .collect();
    Scenario {
        room: Room::techtile(),
        beacons: vec![
            beacon(
                1,
                27.0,
                Antenna::dipole(1.0).expect("dipole"),
                1,
                DutySchedule::presence_sensing(),
            ),
            beacon(
                2,
                33.0,
                Antenna::directional(5.0, 60.0, 0.0, 1.0).expect("patch"),
                3,
                DutySchedule::continuous(),
            )
            .steerable(true),
        ],
        tags,
        propagation: PropagationModel::default(),
        scheduler: SchedulerPolicy::RoundRobin { dwell_s: 1.0 },
        duration_s,
        seed: 0,
    }
}
