//! CSV and text renderings of simulation results. Floats use Rust's
//! shortest round-trip formatting, so output is byte-stable.

use super::SimResult;

/// `tag_id,event_time_s,event_kind`. Beacon duty events have an empty
/// `tag_id`; retarget events carry the new target.
pub fn events_csv(result: &SimResult) -> String {
    let mut out = String::from("tag_id,event_time_s,event_kind\n");
    for e in &result.events {
        let tag = e.tag_id.map(|id| id.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", tag, e.time_s, e.kind.name()));
    }
    out
}

/// `tag_id,initial_charge_s,mean_update_s,fix_count`. A tag that never
/// charged has `never` as its initial charge; the mean is empty with fewer
/// than two fixes.
pub fn summary_csv(result: &SimResult) -> String {
    let mut out = String::from("tag_id,initial_charge_s,mean_update_s,fix_count\n");
    for t in &result.tags {
        out.push_str(&format!(
            "{},{},{},{}\n",
            t.id,
            t.initial_charge_s
                .map(|s| s.to_string())
                .unwrap_or_else(|| "never".to_string()),
            t.mean_update_s().map(|s| s.to_string()).unwrap_or_default(),
            t.fix_times_s.len()
        ));
    }
    out
}

fn opt_seconds(v: Option<f64>) -> String {
    v.map(|s| format!("{s:.3} s")).unwrap_or_else(|| "n/a".to_string())
}

pub fn summary_text(result: &SimResult) -> String {
    let mut out = format!("simulated {} s\n", result.duration_s);
    for t in &result.tags {
        let initial = t
            .initial_charge_s
            .map(|s| format!("{s:.3} s"))
            .unwrap_or_else(|| "never".to_string());
        out.push_str(&format!(
            "tag {}: initial charge {}, {} fixes, update interval mean {} min {} max {}\n",
            t.id,
            initial,
            t.fix_times_s.len(),
            opt_seconds(t.mean_update_s()),
            opt_seconds(t.min_update_s()),
            opt_seconds(t.max_update_s()),
        ));
    }
    for b in &result.beacons {
        out.push_str(&format!(
            "beacon {}: on for {:.3} s, radiated {:.4} J\n",
            b.id, b.on_time_s, b.radiated_energy_j
        ));
    }
    out
}
