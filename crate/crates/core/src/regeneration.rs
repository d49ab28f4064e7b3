//! Renewal structure of the e1-coordinate.
//!
//! With `T(h)` the first time the e1-coordinate exceeds `h` and `D` the first
//! return (at time >= 1) to the starting level, the candidate times are
//! `S_0 = T(0)`, `D_i = S_i + D ∘ θ_{S_i}` and `S_{i+1} = T(r_{D_i})`. The first
//! candidate that never returns to its level is the regeneration time `κ`, and
//! the recursion restarts from each `κ_k` to produce `κ_{k+1}`.
//!
//! On a finite path "never returns" is undecidable. A candidate is confirmed
//! when no return happened by the horizon, at least `confirm_lag` steps
//! elapsed since it, and the path ends strictly above its level. Whatever
//! follows the last confirmed `κ` is the censored tail.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::LatticeVector;

/// Outcome of the search for `D_i` after a candidate `S_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Return {
    At(u64),
    NotByHorizon,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SdPair {
    pub start: u64,
    pub ret: Return,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RegenRecord {
    pub horizon: u64,
    pub confirm_lag: u64,
    /// Every `(S_i, D_i)` pair of every confirmed round, in time order,
    /// ending with the unresolved candidate if there is one.
    pub sd_pairs: Vec<SdPair>,
    pub kappa_times: Vec<u64>,
    /// `X_{κ_k} · e1`.
    pub kappa_levels: Vec<i64>,
    /// `X_horizon · e1`.
    pub end_level: i64,
    pub censored_tail: bool,
}

impl RegenRecord {
    pub fn first_kappa(&self) -> Option<u64> {
        self.kappa_times.first().copied()
    }

    /// Time and e1-displacement after the last confirmed `κ` (or after time 0).
    pub fn trailing_segment(&self) -> (u64, i64) {
        let (t, x) = match (self.kappa_times.last(), self.kappa_levels.last()) {
            (Some(&t), Some(&x)) => (t, x),
            _ => (0, 0),
        };
        (self.horizon - t, self.end_level - x)
    }
}

/// Increment between consecutive regeneration times.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RegenBlock {
    pub dk: u64,
    pub dx1: i64,
    /// The block `[0, κ_1]`, whose law is not the conditioned one.
    pub is_first: bool,
}

fn validate_path(path: &[i64]) -> Result<()> {
    match path.first() {
        None => return Err(Error::InvalidInput("empty e1 path".into())),
        Some(&x0) if x0 != 0 => {
            return Err(Error::InvalidInput(format!(
                "e1 path starts at {x0}, not 0"
            )))
        }
        _ => {}
    }
    for (i, w) in path.windows(2).enumerate() {
        if (w[1] - w[0]).abs() > 1 {
            return Err(Error::InvalidPath {
                index: i + 1,
                from: w[0],
                to: w[1],
            });
        }
    }
    Ok(())
}

fn confirmable(horizon: u64, start: u64, lag: u64, level: i64, end_level: i64) -> bool {
    horizon - start >= lag && end_level > level
}

/// Runs the candidate recursion over a complete e1 path.
pub fn find_regenerations(path: &[i64], confirm_lag: u64) -> Result<RegenRecord> {
    validate_path(path)?;
    let horizon = path.len() - 1;
    let end_level = path[horizon];
    let mut record = RegenRecord {
        horizon: horizon as u64,
        confirm_lag,
        sd_pairs: Vec::new(),
        kappa_times: Vec::new(),
        kappa_levels: Vec::new(),
        end_level,
        censored_tail: false,
    };

    let mut base = 0usize;
    'rounds: loop {
        // T(0) on the path shifted to `base`.
        let mut threshold = path[base];
        let mut from = base + 1;
        loop {
            let Some(s) = (from..=horizon).find(|&t| path[t] > threshold) else {
                break 'rounds;
            };
            match (s + 1..=horizon).find(|&t| path[t] == path[s]) {
                Some(d) => {
                    record.sd_pairs.push(SdPair {
                        start: s as u64,
                        ret: Return::At(d as u64),
                    });
                    // r_{D_i}, the running max of the shifted path.
                    threshold = path[base..=d].iter().copied().max().unwrap_or(threshold);
                    // Nothing before d + 1 exceeds r_{D_i}.
                    from = d + 1;
                }
                None => {
                    record.sd_pairs.push(SdPair {
                        start: s as u64,
                        ret: Return::NotByHorizon,
                    });
                    let confirmed =
                        confirmable(horizon as u64, s as u64, confirm_lag, path[s], end_level);
                    if !confirmed {
                        break 'rounds;
                    }
                    record.kappa_times.push(s as u64);
                    record.kappa_levels.push(path[s]);
                    base = s;
                    continue 'rounds;
                }
            }
        }
    }
    record.censored_tail = record.kappa_times.last().map_or(0, |&k| k as usize) < horizon;
    Ok(record)
}

#[derive(Clone, Debug, Default)]
struct Frame {
    pairs: Vec<SdPair>,
}

/// Streaming version of [`find_regenerations`].
///
/// Every pending candidate (a record level not yet revisited) opens a
/// speculative continuation of the recursion. A return to the level of a
/// pending candidate discards all continuations stacked above it.
#[derive(Clone, Debug)]
pub struct RegenTracker {
    confirm_lag: u64,
    time: u64,
    current: i64,
    running_max: i64,
    started: bool,
    frames: Vec<Frame>,
    /// `(S, X_S·e1)` of the pending candidate of `frames[i]`; one shorter
    /// than `frames`, levels strictly increasing.
    pending: Vec<(u64, i64)>,
}

impl RegenTracker {
    pub fn new(confirm_lag: u64) -> Self {
        Self {
            confirm_lag,
            time: 0,
            current: 0,
            running_max: 0,
            started: false,
            frames: vec![Frame::default()],
            pending: Vec::new(),
        }
    }

    /// Feeds `X_n · e1` for the next time `n`, starting with `n = 0`.
    pub fn observe(&mut self, x1: i64) -> Result<()> {
        if !self.started {
            if x1 != 0 {
                return Err(Error::InvalidInput(format!(
                    "e1 path starts at {x1}, not 0"
                )));
            }
            self.started = true;
            return Ok(());
        }
        if (x1 - self.current).abs() > 1 {
            return Err(Error::InvalidPath {
                index: self.time as usize + 1,
                from: self.current,
                to: x1,
            });
        }
        self.time += 1;
        self.current = x1;
        let t = self.time;

        if let Ok(i) = self.pending.binary_search_by_key(&x1, |&(_, level)| level) {
            let (s, _) = self.pending[i];
            self.pending.truncate(i);
            self.frames.truncate(i + 1);
            self.frames[i].pairs.push(SdPair {
                start: s,
                ret: Return::At(t),
            });
        } else if x1 > self.running_max {
            self.pending.push((t, x1));
            self.frames.push(Frame::default());
        }
        self.running_max = self.running_max.max(x1);
        Ok(())
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    /// Earliest candidate that would be confirmed with the horizon at the
    /// current time.
    pub fn first_confirmed(&self) -> Option<u64> {
        let &(s, level) = self.pending.first()?;
        confirmable(self.time, s, self.confirm_lag, level, self.current).then_some(s)
    }

    /// The record with the horizon at the current time.
    pub fn record(&self) -> RegenRecord {
        let mut record = RegenRecord {
            horizon: self.time,
            confirm_lag: self.confirm_lag,
            sd_pairs: Vec::new(),
            kappa_times: Vec::new(),
            kappa_levels: Vec::new(),
            end_level: self.current,
            censored_tail: false,
        };
        for (i, frame) in self.frames.iter().enumerate() {
            record.sd_pairs.extend_from_slice(&frame.pairs);
            let Some(&(s, level)) = self.pending.get(i) else {
                break;
            };
            record.sd_pairs.push(SdPair {
                start: s,
                ret: Return::NotByHorizon,
            });
            if !confirmable(self.time, s, self.confirm_lag, level, self.current) {
                break;
            }
            record.kappa_times.push(s);
            record.kappa_levels.push(level);
        }
        record.censored_tail = record.kappa_times.last().copied().unwrap_or(0) < self.time;
        record
    }
}

/// Differences between consecutive confirmed regeneration times.
pub fn extract_blocks(record: &RegenRecord) -> Vec<RegenBlock> {
    let mut prev_t = 0u64;
    let mut prev_x = 0i64;
    record
        .kappa_times
        .iter()
        .zip(&record.kappa_levels)
        .enumerate()
        .map(|(i, (&t, &x))| {
            let block = RegenBlock {
                dk: t - prev_t,
                dx1: x - prev_x,
                is_first: i == 0,
            };
            prev_t = t;
            prev_x = x;
            block
        })
        .collect()
}

/// Blocks of one run selected by a stopping rule: the first block, then every
/// later block that starts before `cutoff`. The last selected block is the one
/// ending at the first regeneration time at or after `cutoff`, so the count of
/// selected blocks is a stopping time for the i.i.d. block sequence and ratio
/// estimators over many runs carry no truncation bias. The flag reports whether
/// that closing block was confirmed within the horizon.
pub fn stopped_blocks(blocks: &[RegenBlock], cutoff: u64) -> (&[RegenBlock], bool) {
    let mut start = 0u64;
    for (i, b) in blocks.iter().enumerate() {
        if i > 0 && start >= cutoff {
            return (&blocks[..i], true);
        }
        start += b.dk;
    }
    let complete = !blocks.is_empty() && start >= cutoff;
    (blocks, complete)
}

/// Checks the defining properties of every confirmed regeneration time
/// against the path: strict running-max record, no later return to its level,
/// and well-formed blocks. Returns a description of the first failure.
pub fn verify_record(path: &[i64], record: &RegenRecord) -> std::result::Result<(), String> {
    if record.horizon as usize + 1 != path.len() {
        return Err(format!(
            "horizon {} does not match path length {}",
            record.horizon,
            path.len()
        ));
    }
    if record.kappa_times.len() != record.kappa_levels.len() {
        return Err("kappa times and levels differ in length".into());
    }
    for (&k, &level) in record.kappa_times.iter().zip(&record.kappa_levels) {
        let k = k as usize;
        if k == 0 || k > record.horizon as usize {
            return Err(format!("kappa {k} outside (0, horizon]"));
        }
        if path[k] != level {
            return Err(format!(
                "kappa {k}: stored level {level} but path has {}",
                path[k]
            ));
        }
        let prev_max = path[..k].iter().copied().max().unwrap_or(0);
        if path[k] != prev_max + 1 {
            return Err(format!("kappa {k} is not a strict record"));
        }
        if let Some(s) = (k + 1..path.len()).find(|&s| path[s] == path[k]) {
            return Err(format!("kappa {k}: level revisited at {s}"));
        }
    }
    if record.kappa_times.windows(2).any(|w| w[0] >= w[1]) {
        return Err("kappa times not strictly increasing".into());
    }
    for b in extract_blocks(record) {
        if b.dk < 1 || b.dx1 < 1 || b.dx1.unsigned_abs() > b.dk {
            return Err(format!("malformed block {b:?}"));
        }
    }
    Ok(())
}

/// For every excursion `[S_i, D_i)` that leaves upward (or returns at once),
/// checks that no site visited before `S_i` is entered. Downward excursions sit
/// below a fresh record level and may legitimately revisit old sites.
pub fn check_fresh_excursions(
    positions: &[LatticeVector],
    record: &RegenRecord,
) -> std::result::Result<(), String> {
    use rustc_hash::FxHashSet;
    for pair in &record.sd_pairs {
        let s = pair.start as usize;
        let end = match pair.ret {
            Return::At(d) => d as usize,
            Return::NotByHorizon => positions.len(),
        };
        if s + 1 < positions.len() && positions[s + 1].e1() < positions[s].e1() {
            continue;
        }
        let before: FxHashSet<&LatticeVector> = positions[..s].iter().collect();
        if let Some(i) = (s..end).find(|&i| before.contains(&positions[i])) {
            return Err(format!("excursion from {s} revisits an old site at {i}"));
        }
    }
    Ok(())
}
