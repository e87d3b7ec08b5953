use std::collections::BTreeMap;

/// How the steerable boost beacon picks its target tag.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum SchedulerPolicy {
    /// Steerable beacons keep their configured boresight.
    #[default]
    None,
    /// Cycle through tags in identifier order, one dwell each.
    RoundRobin { dwell_s: f64 },
    /// Serve the tag whose time since its last fix is largest relative to
    /// its target update interval.
    DeficitFirst {
        dwell_s: f64,
        default_interval_s: f64,
        intervals_s: BTreeMap<u32, f64>,
    },
}

impl SchedulerPolicy {
    pub fn dwell_s(&self) -> Option<f64> {
        match self {
            SchedulerPolicy::None => None,
            SchedulerPolicy::RoundRobin { dwell_s } | SchedulerPolicy::DeficitFirst { dwell_s, .. } => Some(*dwell_s),
        }
    }

    pub fn target_interval_s(&self, tag_id: u32) -> Option<f64> {
        match self {
            SchedulerPolicy::DeficitFirst {
                default_interval_s,
                intervals_s,
                ..
            } => Some(*intervals_s.get(&tag_id).unwrap_or(default_interval_s)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if let Some(dwell) = self.dwell_s() {
            if !(dwell > 0.0 && dwell.is_finite()) {
                return Err(format!("scheduler dwell {dwell} s must be positive"));
            }
        }
        if let SchedulerPolicy::DeficitFirst {
            default_interval_s,
            intervals_s,
            ..
        } = self
        {
            for (id, &v) in std::iter::once((&0, default_interval_s)).chain(intervals_s.iter()) {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(format!("target update interval {v} s (tag {id}) must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// What the scheduler knows about a tag.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TagSchedState {
    pub id: u32,
    /// `None` until the tag has produced a fix; such a tag has no known
    /// position and cannot be aimed at.
    pub last_fix_s: Option<f64>,
}

/// Choose the next beam target, or `None` when the policy is disabled or
/// no tag has a known position yet.
///
/// `previous` is the last target, used by round-robin to advance.
pub fn next_beam_target(
    policy: &SchedulerPolicy,
    tags: &[TagSchedState],
    previous: Option<u32>,
    now_s: f64,
) -> Option<u32> {
    let mut eligible: Vec<&TagSchedState> = tags.iter().filter(|t| t.last_fix_s.is_some()).collect();
    eligible.sort_by_key(|t| t.id);
    match policy {
        SchedulerPolicy::None => None,
        SchedulerPolicy::RoundRobin { .. } => {
            let next = previous.and_then(|p| eligible.iter().find(|t| t.id > p));
            next.or(eligible.first()).map(|t| t.id)
        }
        SchedulerPolicy::DeficitFirst { .. } => {
            let mut best: Option<(u32, f64)> = None;
            for t in eligible {
                let interval = policy.target_interval_s(t.id).expect("deficit policy");
                let deficit = (now_s - t.last_fix_s.expect("eligible")) / interval;
                // strict comparison keeps the lowest identifier on ties
                if best.is_none_or(|(_, d)| deficit > d) {
                    best = Some((t.id, deficit));
                }
            }
            best.map(|(id, _)| id)
        }
    }
}
