//! Demand traces: CSV ingestion, event binning, and a synthetic spiky
//! generator.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DemandTrace<S> {
    /// Actual demand per slot, slot 1 first.
    pub slots: Vec<S>,
    /// Free-form slot duration label, e.g. `5min`.
    pub slot_length: Option<String>,
}

impl<S: Scalar> DemandTrace<S> {
    pub fn new(slots: Vec<S>) -> Self {
        DemandTrace {
            slots,
            slot_length: None,
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(label) = &self.slot_length {
            let _ = writeln!(out, "# slot_length={label}");
        }
        out.push_str("t,demand\n");
        for (i, d) in self.slots.iter().enumerate() {
            let _ = writeln!(out, "{},{}", i + 1, d);
        }
        out
    }

    /// Parses `t,demand` rows with 1-based, strictly increasing `t`. Missing
    /// slots are filled with zero demand; `#` lines and a `t,demand` header
    /// are skipped.
    pub fn from_csv(text: &str, source: &str) -> Result<Self> {
        let mut slots: Vec<S> = Vec::new();
        let mut slot_length = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                if let Some(("slot_length", v)) =
                    meta.trim().split_once('=').map(|(k, v)| (k.trim(), v))
                {
                    slot_length = Some(v.trim().to_string());
                }
                continue;
            }
            if line.eq_ignore_ascii_case("t,demand") {
                continue;
            }
            let Some((t, d)) = line.split_once(',') else {
                return Err(Error::parse(source, lineno, "expected `t,demand`"));
            };
            let t: usize = t
                .trim()
                .parse()
                .map_err(|_| Error::parse(source, lineno, format!("bad slot index {t:?}")))?;
            let d: S = d
                .trim()
                .parse()
                .map_err(|_| Error::parse(source, lineno, format!("non-numeric demand {d:?}")))?;
            if !(d >= S::zero()) || !d.is_finite() {
                return Err(Error::parse(source, lineno, format!("negative demand {d}")));
            }
            if t <= slots.len() {
                return Err(Error::parse(
                    source,
                    lineno,
                    format!("slot {t} does not increase past {}", slots.len()),
                ));
            }
            slots.resize(t - 1, S::zero());
            slots.push(d);
        }
        Ok(DemandTrace { slots, slot_length })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_csv(&text, &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// A job occupying one VM over `[start, end)` seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub start: f64,
    pub end: f64,
}

impl Event {
    pub fn new(start: f64, end: f64) -> Self {
        Event { start, end }
    }
}

/// Bins jobs into slots of `slot_seconds`; each slot's demand is the peak
/// number of concurrently running jobs inside it. Events must be sorted by
/// start time. A zero-length event counts at its start instant.
pub fn bin_events<S: Scalar>(events: &[Event], slot_seconds: f64) -> Result<DemandTrace<S>> {
    if !(slot_seconds > 0.0) {
        return Err(Error::Validation("slot_seconds > 0 violated".into()));
    }
    if let Some(i) = events.windows(2).position(|w| w[1].start < w[0].start) {
        return Err(Error::Unsorted { index: i + 1 });
    }
    let n = events
        .iter()
        .map(|e| {
            let by_start = (e.start / slot_seconds).floor() as usize + 1;
            let by_end = (e.end / slot_seconds).ceil() as usize;
            by_start.max(by_end)
        })
        .max()
        .unwrap_or(0);
    let slot_of = |time: f64| ((time / slot_seconds).floor() as usize).min(n.saturating_sub(1));

    // Sweep: +1 at start, -1 at end; ends sort before starts at equal times
    // unless the event is instantaneous.
    let mut marks: Vec<(f64, i32, i64)> = Vec::with_capacity(events.len() * 2);
    for e in events {
        if e.end > e.start {
            marks.push((e.start, 1, 1));
            marks.push((e.end, 0, -1));
        } else {
            marks.push((e.start, 1, 1));
            marks.push((e.start, 2, -1));
        }
    }
    marks.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut peak = vec![0i64; n];
    let mut running = 0i64;
    let mut slot = 0usize;
    let mut i = 0;
    while i < marks.len() {
        let time = marks[i].0;
        let s = slot_of(time);
        // Jobs still running carry into every slot entered before `time`.
        while slot < s {
            slot += 1;
            if slot < s || time > slot as f64 * slot_seconds {
                peak[slot] = peak[slot].max(running);
            }
        }
        // All marks at one instant: ends, then starts (the peak), then
        // instantaneous ends.
        while i < marks.len() && marks[i].0 == time {
            let (_, kind, delta) = marks[i];
            if kind == 2 && marks[i - 1].1 != 2 {
                peak[slot] = peak[slot].max(running);
            }
            running += delta;
            i += 1;
        }
        peak[slot] = peak[slot].max(running);
    }
    Ok(DemandTrace::new(
        peak.into_iter().map(|p| S::from_count(p as u64)).collect(),
    ))
}

/// Baseline demand with occasional single-slot spikes. A spike adds
/// `spike_height` scaled by a uniform factor in `[0.5, 1.5)`.
pub fn generate_spiky_trace<S: Scalar>(
    seed: u64,
    len: usize,
    base: S,
    spike_prob: f64,
    spike_height: S,
) -> DemandTrace<S> {
    let mut rng = rng::stream(seed, rng::streams::TRACE);
    let slots = (0..len)
        .map(|_| {
            if rng.gen_bool(spike_prob.clamp(0.0, 1.0)) {
                base + spike_height * S::lit(rng.gen_range(0.5..1.5))
            } else {
                base
            }
        })
        .collect();
    DemandTrace::new(slots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Peak concurrency by checking every candidate instant in each slot.
    fn brute_force_bins(events: &[Event], slot_seconds: f64, n: usize) -> Vec<u64> {
        (0..n)
            .map(|s| {
                let lo = s as f64 * slot_seconds;
                let hi = lo + slot_seconds;
                let mut instants = vec![lo];
                instants.extend(
                    events
                        .iter()
                        .map(|e| e.start)
                        .filter(|&t| t >= lo && t < hi),
                );
                instants
                    .iter()
                    .map(|&at| {
                        events
                            .iter()
                            .filter(|e| {
                                if e.end > e.start {
                                    e.start <= at && at < e.end
                                } else {
                                    e.start == at
                                }
                            })
                            .count() as u64
                    })
                    .max()
                    .unwrap_or(0)
            })
            .collect()
    }

    #[test]
    fn empty_file_is_empty_trace() {
        let t = DemandTrace::<f64>::from_csv("", "e.csv").unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn gaps_fill_with_zero() {
        let t = DemandTrace::<f64>::from_csv("# note\nt,demand\n1,2\n3,7.5\n", "g.csv").unwrap();
        assert_eq!(t.slots, vec![2.0, 0.0, 7.5]);
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        let err = DemandTrace::<f64>::from_csv("1,2\n2,abc\n", "m.csv").unwrap_err();
        assert_eq!(err.to_string(), "m.csv:2: non-numeric demand \"abc\"");
        let err = DemandTrace::<f64>::from_csv("1,2\n3,1\n2,1\n", "m.csv").unwrap_err();
        assert!(err.to_string().starts_with("m.csv:3:"), "{err}");
        let err = DemandTrace::<f64>::from_csv("1,-2\n", "m.csv").unwrap_err();
        assert!(err.to_string().contains("negative"));
        assert!(DemandTrace::<f64>::load("/nonexistent/trace.csv").is_err());
    }

    #[test]
    fn one_event_per_slot_gives_ones() {
        let events: Vec<_> = (0..5)
            .map(|i| Event::new(i as f64 * 300.0 + 10.0, i as f64 * 300.0 + 100.0))
            .collect();
        let t = bin_events::<f64>(&events, 300.0).unwrap();
        assert_eq!(t.slots, vec![1.0; 5]);
    }

    #[test]
    fn overlapping_burst_is_a_spike() {
        let events: Vec<_> = (0..7)
            .map(|i| Event::new(600.0 + i as f64, 700.0))
            .collect();
        let t = bin_events::<f64>(&events, 300.0).unwrap();
        assert_eq!(t.slots, vec![0.0, 0.0, 7.0]);
    }

    #[test]
    fn long_jobs_carry_across_slots() {
        let t =
            bin_events::<f64>(&[Event::new(0.0, 1000.0), Event::new(650.0, 660.0)], 300.0).unwrap();
        assert_eq!(t.slots, vec![1.0, 1.0, 2.0, 1.0]);
    }

    #[test]
    fn unsorted_events_rejected() {
        let err = bin_events::<f64>(&[Event::new(5.0, 6.0), Event::new(1.0, 2.0)], 1.0);
        assert!(matches!(err, Err(Error::Unsorted { index: 1 })));
    }

    #[test]
    fn no_spikes_is_flat() {
        let t = generate_spiky_trace(3, 100, 5.0, 0.0, 20.0);
        assert_eq!(t.slots, vec![5.0; 100]);
    }

    #[test]
    fn spiky_trace_reproducible() {
        let a = generate_spiky_trace(9, 200, 5.0, 0.1, 20.0);
        let b = generate_spiky_trace(9, 200, 5.0, 0.1, 20.0);
        assert_eq!(a, b);
        assert_ne!(a, generate_spiky_trace(10, 200, 5.0, 0.1, 20.0));
    }

    #[test]
    fn spike_frequency_within_binomial_band() {
        let (n, p) = (10_000usize, 0.07);
        let t = generate_spiky_trace(4, n, 10.0, p, 25.0);
        let spikes = t.slots.iter().filter(|&&d| d > 10.0).count() as f64;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((spikes - n as f64 * p).abs() <= 3.0 * sigma, "{spikes}");
    }

    proptest! {
        #[test]
        fn binning_matches_brute_force(
            raw in proptest::collection::vec((0u32..2000, 0u32..400), 0..40),
            slot in 50u32..400,
        ) {
            let mut events: Vec<Event> = raw
                .iter()
                .map(|&(s, len)| Event::new(s as f64, (s + len) as f64))
                .collect();
            events.sort_by(|a, b| a.start.total_cmp(&b.start));
            let t = bin_events::<f64>(&events, slot as f64).unwrap();
            let expected = brute_force_bins(&events, slot as f64, t.len());
            let got: Vec<u64> = t.slots.iter().map(|&d| d as u64).collect();
            prop_assert_eq!(got, expected);
        }

        #[test]
        fn csv_round_trip(slots in proptest::collection::vec(0.0f64..1e6, 0..50)) {
            let trace = DemandTrace::new(slots);
            let back = DemandTrace::<f64>::from_csv(&trace.to_csv(), "rt").unwrap();
            prop_assert_eq!(back, trace);
        }
    }
}
