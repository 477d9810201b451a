//! Wall-clock and memory accounting shared by every pipeline stage.
//!
//! The tracker is the one shared mutable object in a run. It records a
//! phase log, answers affordability queries and hands out deadlines that
//! long-running fits poll between rounds.

use std::fmt::Write as _;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::data::ColumnData;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("time budget exhausted: {elapsed_s:.2}s of {budget_s:.2}s used")]
pub struct BudgetExhausted {
    pub elapsed_s: f64,
    pub budget_s: f64,
}

/// Source of elapsed time; swapped for a manual clock in tests.
pub trait Clock: Send + Sync {
    fn elapsed_s(&self) -> f64;
}

pub struct SystemClock(Instant);

impl SystemClock {
    pub fn start() -> Self {
        SystemClock(Instant::now())
    }
}

impl Clock for SystemClock {
    fn elapsed_s(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// A clock that only moves when told to.
#[derive(Clone, Default)]
pub struct ManualClock(Arc<Mutex<f64>>);

impl ManualClock {
    pub fn set(&self, seconds: f64) {
        *self.0.lock().unwrap() = seconds;
    }

    pub fn advance(&self, seconds: f64) {
        *self.0.lock().unwrap() += seconds;
    }
}

impl Clock for ManualClock {
    fn elapsed_s(&self) -> f64 {
        *self.0.lock().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRecord {
    pub name: String,
    pub start_s: f64,
    pub end_s: Option<f64>,
    pub est_peak_bytes: u64,
}

#[derive(Default)]
struct TrackerState {
    phases: Vec<PhaseRecord>,
    current_bytes: u64,
}

pub struct BudgetTracker {
    clock: Box<dyn Clock>,
    time_budget_s: f64,
    mem_budget_bytes: u64,
    state: Mutex<TrackerState>,
}

impl BudgetTracker {
    /// Starts the wall clock now.
    pub fn new(time_budget_s: f64, mem_budget_bytes: u64) -> Self {
        Self::with_clock(
            time_budget_s,
            mem_budget_bytes,
            Box::new(SystemClock::start()),
        )
    }

    pub fn with_clock(time_budget_s: f64, mem_budget_bytes: u64, clock: Box<dyn Clock>) -> Self {
        BudgetTracker {
            clock,
            time_budget_s,
            mem_budget_bytes,
            state: Mutex::new(TrackerState::default()),
        }
    }

    pub fn time_budget_s(&self) -> f64 {
        self.time_budget_s
    }

    pub fn mem_budget_bytes(&self) -> u64 {
        self.mem_budget_bytes
    }

    pub fn elapsed_s(&self) -> f64 {
        self.clock.elapsed_s()
    }

    pub fn remaining_s(&self) -> f64 {
        self.time_budget_s - self.elapsed_s()
    }

    /// Close the open phase, open `phase`, and report the seconds left.
    pub fn checkpoint(&self, phase: &str) -> Result<f64, BudgetExhausted> {
        let now = self.elapsed_s();
        {
            let mut st = self.state.lock().unwrap();
            let bytes = st.current_bytes;
            if let Some(last) = st.phases.last_mut() {
                if last.end_s.is_none() {
                    last.end_s = Some(now);
                }
            }
            st.phases.push(PhaseRecord {
                name: phase.to_string(),
                start_s: now,
                end_s: None,
                est_peak_bytes: bytes,
            });
        }
        let remaining = self.time_budget_s - now;
        if remaining <= 0.0 {
            return Err(BudgetExhausted {
                elapsed_s: now,
                budget_s: self.time_budget_s,
            });
        }
        Ok(remaining)
    }

    /// Close the open phase without opening another.
    pub fn finish(&self) {
        let now = self.elapsed_s();
        let mut st = self.state.lock().unwrap();
        if let Some(last) = st.phases.last_mut() {
            if last.end_s.is_none() {
                last.end_s = Some(now);
            }
        }
    }

    /// `cost_s <= remaining * (1 - reserve)`.
    pub fn can_afford(&self, cost_s: f64, reserve: f64) -> bool {
        can_afford(self.remaining_s(), cost_s, reserve)
    }

    /// Deadline leaving `reserve` of the remaining time unspent.
    pub fn deadline(&self, reserve: f64) -> Deadline {
        let usable = (self.remaining_s() * (1.0 - reserve)).max(0.0);
        Deadline::after(Duration::from_secs_f64(usable))
    }

    /// Record the current in-memory data size; the open phase keeps its peak.
    pub fn note_memory(&self, bytes: u64) {
        let mut st = self.state.lock().unwrap();
        st.current_bytes = bytes;
        if let Some(last) = st.phases.last_mut() {
            last.est_peak_bytes = last.est_peak_bytes.max(bytes);
        }
    }

    pub fn current_bytes(&self) -> u64 {
        self.state.lock().unwrap().current_bytes
    }

    pub fn headroom_bytes(&self) -> u64 {
        self.mem_budget_bytes.saturating_sub(self.current_bytes())
    }

    pub fn phases(&self) -> Vec<PhaseRecord> {
        self.state.lock().unwrap().phases.clone()
    }

    /// `phase\tstart_s\tend_s\test_peak_bytes` per phase, header first.
    pub fn phase_log_tsv(&self) -> String {
        let mut out = String::from("phase\tstart_s\tend_s\test_peak_bytes\n");
        for p in self.phases() {
            let end = p.end_s.map(|e| format!("{e:.3}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{}\t{:.3}\t{}\t{}",
                p.name, p.start_s, end, p.est_peak_bytes
            );
        }
        out
    }
}

pub fn can_afford(remaining_s: f64, cost_s: f64, reserve: f64) -> bool {
    cost_s <= 0.0 || cost_s <= remaining_s * (1.0 - reserve)
}

/// A point in time after which iterative work should stop.
#[derive(Debug, Clone, Copy)]
pub struct Deadline(Option<Instant>);

impl Deadline {
    pub fn none() -> Self {
        Deadline(None)
    }

    pub fn after(d: Duration) -> Self {
        Deadline(Instant::now().checked_add(d))
    }

    pub fn exhausted(&self) -> bool {
        self.0.is_some_and(|t| Instant::now() >= t)
    }

    pub fn remaining_s(&self) -> f64 {
        match self.0 {
            Some(t) => t.saturating_duration_since(Instant::now()).as_secs_f64(),
            None => f64::INFINITY,
        }
    }

    pub fn earliest(self, other: Deadline) -> Deadline {
        match (self.0, other.0) {
            (Some(a), Some(b)) => Deadline(Some(a.min(b))),
            (a, b) => Deadline(a.or(b)),
        }
    }
}

/// Data-structure arithmetic for the memory footprint of a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryEstimate {
    pub bytes_per_row: f64,
    pub current_bytes: u64,
    pub headroom_bytes: u64,
}

impl MemoryEstimate {
    pub fn for_columns<'a, I>(columns: I, n_rows: usize, mem_budget_bytes: u64) -> Self
    where
        I: IntoIterator<Item = &'a ColumnData>,
    {
        let bytes_per_row: f64 = columns.into_iter().map(ColumnData::bytes_per_row).sum();
        let current_bytes = (bytes_per_row * n_rows as f64).ceil() as u64;
        MemoryEstimate {
            bytes_per_row,
            current_bytes,
            headroom_bytes: mem_budget_bytes.saturating_sub(current_bytes),
        }
    }
}

/// Rows that fit in the headroom when each row transiently needs
/// `multiplier` times its steady-state size.
pub fn max_rows_for_memory(est: &MemoryEstimate, multiplier: f64) -> u64 {
    if est.bytes_per_row <= 0.0 {
        return u64::MAX;
    }
    (est.headroom_bytes as f64 / (est.bytes_per_row * multiplier.max(1.0))).floor() as u64
}

/// How many generated features a stage may keep: fewer for bigger tables.
pub fn feature_budget(n_rows: usize, headroom_bytes: u64) -> usize {
    let by_scale = (2_000_000 / n_rows.max(1)).clamp(8, 64);
    // each kept feature costs 8 bytes per row; keep 3x slack
    let by_memory = (headroom_bytes / (8 * 3 * n_rows.max(1) as u64)) as usize;
    by_scale.min(by_memory.max(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tracker(budget: f64) -> (BudgetTracker, ManualClock) {
        let clock = ManualClock::default();
        (
            BudgetTracker::with_clock(budget, 1 << 30, Box::new(clock.clone())),
            clock,
        )
    }

    #[test]
    fn checkpoint_reports_remaining() {
        let (t, clock) = tracker(300.0);
        clock.set(100.0);
        assert_eq!(t.checkpoint("fe").unwrap(), 200.0);
    }

    #[test]
    fn checkpoint_past_budget_is_exhausted() {
        let (t, clock) = tracker(300.0);
        clock.set(301.0);
        assert!(t.checkpoint("train").is_err());
    }

    #[test]
    fn phase_log_keeps_call_order_and_closes_phases() {
        let (t, clock) = tracker(300.0);
        for (i, name) in ["pre", "merge", "fe", "hpo"].iter().enumerate() {
            clock.set(i as f64);
            t.checkpoint(name).unwrap();
        }
        t.finish();
        let phases = t.phases();
        let names: Vec<_> = phases.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["pre", "merge", "fe", "hpo"]);
        assert_eq!(phases[0].end_s, Some(1.0));
        assert!(phases.iter().all(|p| p.end_s.is_some()));
        assert!(t
            .phase_log_tsv()
            .starts_with("phase\tstart_s\tend_s\test_peak_bytes\npre\t0.000\t1.000"));
    }

    #[test]
    fn affordability() {
        assert!(can_afford(100.0, 50.0, 0.2));
        assert!(!can_afford(100.0, 90.0, 0.2));
        assert!(can_afford(-5.0, 0.0, 0.2));
    }

    #[test]
    fn memory_row_caps() {
        let gb3 = 3 * (1u64 << 30);
        let est = MemoryEstimate {
            bytes_per_row: 100.0,
            current_bytes: 0,
            headroom_bytes: gb3,
        };
        assert_eq!(max_rows_for_memory(&est, 3.0), 10_737_418);
        let half = max_rows_for_memory(&est, 6.0);
        assert_eq!(half, 5_368_709);
        let zero = MemoryEstimate {
            headroom_bytes: 0,
            ..est
        };
        assert_eq!(max_rows_for_memory(&zero, 3.0), 0);
    }

    #[test]
    fn appending_a_column_adds_its_width() {
        let a = ColumnData::from_f64("a", vec![1.0; 1000]);
        let b = ColumnData::from_f64("b", vec![2.0; 1000]);
        let before = MemoryEstimate::for_columns([&a], 1000, 1 << 30);
        let after = MemoryEstimate::for_columns([&a, &b], 1000, 1 << 30);
        assert_eq!(
            after.current_bytes - before.current_bytes,
            (8.125 * 1000.0) as u64
        );
    }

    #[test]
    fn feature_budget_shrinks_with_scale() {
        assert!(feature_budget(40_000, 1 << 33) > feature_budget(400_000, 1 << 33));
        assert_eq!(feature_budget(10, 1 << 33), 64);
    }
}
