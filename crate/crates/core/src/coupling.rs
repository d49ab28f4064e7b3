//! Joint construction of an excited walk `Y` and a simple random walk `Z`
//! from shared randomness, and tan-point counting for the planar walk `W`.
//!
//! At each step an axis `alpha` is drawn uniformly from `1..=d` and `u` uniformly
//! from `[0, 1)`. `Z` moves by `+e_alpha` if `u <= 1/2` and `-e_alpha` otherwise.
//! `Y` copies the move unless it sits on a fresh site and `alpha = 1`, in which
//! case it moves `+e1` iff `u <= p`. `W` records `(Z·e1, Z·e2)` at the times
//! when `alpha` is 1 or 2.

use rand::Rng;
use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::lattice::LatticeVector;
use crate::rng::{uniform, RandomSource};
use crate::walk::{Recording, WalkState};

/// Running per-level maximum of the first coordinate, and the number of tan
/// point indices seen so far.
#[derive(Clone, Debug, Default)]
pub struct TanTracker {
    level_max: FxHashMap<i64, i64>,
    tan_count: u64,
}

impl TanTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Processes the next point of the planar walk and reports whether its
    /// index is a tan point index: its first coordinate strictly exceeds every
    /// earlier one on the same second-coordinate level.
    pub fn observe(&mut self, w: (i64, i64)) -> bool {
        let (x, level) = w;
        let tan = match self.level_max.get_mut(&level) {
            None => {
                self.level_max.insert(level, x);
                true
            }
            Some(max) => {
                let tan = x > *max;
                if tan {
                    *max = x;
                }
                tan
            }
        };
        if tan {
            self.tan_count += 1;
        }
        tan
    }

    /// `N_i` for the points processed so far.
    pub fn tan_count(&self) -> u64 {
        self.tan_count
    }

    pub fn level_max(&self, level: i64) -> Option<i64> {
        self.level_max.get(&level).copied()
    }
}

/// Convenience: tan indices of a whole planar path.
pub fn tan_indices(path: &[(i64, i64)]) -> Vec<usize> {
    let mut tracker = TanTracker::new();
    path.iter()
        .enumerate()
        .filter_map(|(i, &w)| tracker.observe(w).then_some(i))
        .collect()
}

#[derive(Clone, Debug)]
pub struct CoupledState {
    y: WalkState,
    z: LatticeVector,
    w: (i64, i64),
    h_count: u64,
    gap: i64,
    tan: TanTracker,
}

/// What one coupled step did, for invariant checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepReport {
    /// `W` advanced (alpha was 1 or 2).
    pub w_moved: bool,
    /// The new `W` index is a tan point index.
    pub tan: bool,
}

impl CoupledState {
    pub fn new(d: usize) -> Self {
        let mut tan = TanTracker::new();
        // Index 0 is vacuously a tan point index.
        tan.observe((0, 0));
        Self {
            y: WalkState::new(d, Recording::Off),
            z: LatticeVector::origin(d),
            w: (0, 0),
            h_count: 0,
            gap: 0,
            tan,
        }
    }

    pub fn y(&self) -> &WalkState {
        &self.y
    }

    pub fn z(&self) -> &LatticeVector {
        &self.z
    }

    pub fn w(&self) -> (i64, i64) {
        self.w
    }

    /// `|H ∩ [1, n]|`.
    pub fn h_count(&self) -> u64 {
        self.h_count
    }

    /// `Y_n·e1 - Z_n·e1`.
    pub fn gap(&self) -> i64 {
        self.gap
    }

    /// `N` over `W_0, ..., W_{h_count}`.
    pub fn tan_count(&self) -> u64 {
        self.tan.tan_count()
    }

    pub fn time(&self) -> u64 {
        self.y.time()
    }
}

/// Advances the coupled chain with axis `alpha` (1-based) and uniform `u`.
pub fn coupled_step(state: &mut CoupledState, p: f64, alpha: usize, u: f64) -> StepReport {
    let axis = alpha - 1;
    let sign_z = if u <= 0.5 { 1 } else { -1 };
    state.z.shift(axis, sign_z);

    let k = if state.y.at_fresh() && alpha == 1 {
        if u <= p {
            0
        } else {
            1
        }
    } else {
        2 * axis + usize::from(sign_z < 0)
    };
    state.y.advance(k);
    state.gap = state.y.position().e1() - state.z.e1();

    if alpha <= 2 {
        state.h_count += 1;
        state.w = (state.z.e1(), state.z.coord(1));
        let tan = state.tan.observe(state.w);
        StepReport { w_moved: true, tan }
    } else {
        StepReport {
            w_moved: false,
            tan: false,
        }
    }
}

/// Counts of invariant violations observed during a coupled run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Violations {
    /// `Y·e_j != Z·e_j` for some `j >= 2`.
    pub transverse: u64,
    /// Gap decreased or moved by something other than 0 or 2.
    pub gap: u64,
    /// `Z` did not move by exactly `±e_alpha` as dictated by `u`.
    pub z_rule: u64,
    /// A tan point index of `W` landed `Y` on a visited site.
    pub tan_not_fresh: u64,
    /// `J_n(Y) < N`.
    pub fresh_below_tan: u64,
}

impl Violations {
    pub fn total(&self) -> u64 {
        self.transverse + self.gap + self.z_rule + self.tan_not_fresh + self.fresh_below_tan
    }
}

#[derive(Clone, Debug)]
pub struct CoupledRun {
    pub state: CoupledState,
    /// Tan count after each `W` step, `N_0, N_1, ...`, when requested.
    pub tan_sequence: Option<Vec<u64>>,
    pub violations: Violations,
}

/// Runs the coupled chain for `n_steps`, checking every invariant at every
/// step.
pub fn run_coupled(
    p: f64,
    d: usize,
    n_steps: u64,
    source: RandomSource,
    record_tan_sequence: bool,
) -> CoupledRun {
    let mut rng = source.rng();
    let mut state = CoupledState::new(d);
    let mut violations = Violations::default();
    let mut tan_sequence = record_tan_sequence.then(|| vec![state.tan_count()]);

    for _ in 0..n_steps {
        let alpha = rng.gen_range(1..=d);
        let u = uniform(&mut rng);
        let z_before = state.z.clone();
        let gap_before = state.gap;

        let report = coupled_step(&mut state, p, alpha, u);

        let mut expected_z = z_before;
        expected_z.shift(alpha - 1, if u <= 0.5 { 1 } else { -1 });
        if expected_z != state.z {
            violations.z_rule += 1;
        }
        if (1..d).any(|j| state.y.position().coord(j) != state.z.coord(j)) {
            violations.transverse += 1;
        }
        let dg = state.gap - gap_before;
        if dg != 0 && dg != 2 {
            violations.gap += 1;
        }
        if report.tan && !state.y.at_fresh() {
            violations.tan_not_fresh += 1;
        }
        if state.y.fresh_count() < state.tan_count() {
            violations.fresh_below_tan += 1;
        }
        if report.w_moved {
            if let Some(seq) = tan_sequence.as_mut() {
                seq.push(state.tan_count());
            }
        }
    }

    CoupledRun {
        state,
        tan_sequence,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transverse_axis_moves_both() {
        let mut st = CoupledState::new(2);
        coupled_step(&mut st, 0.75, 2, 0.3);
        assert_eq!(st.y().position().coords(), &[0, 1]);
        assert_eq!(st.z().coords(), &[0, 1]);
        assert_eq!(st.gap(), 0);
        assert_eq!(st.h_count(), 1);
    }

    #[test]
    fn excited_step_opens_gap() {
        let mut st = CoupledState::new(2);
        assert!(st.y().at_fresh());
        coupled_step(&mut st, 0.75, 1, 0.6);
        assert_eq!(st.y().position().coords(), &[1, 0]);
        assert_eq!(st.z().coords(), &[-1, 0]);
        assert_eq!(st.gap(), 2);
    }

    #[test]
    fn revisited_site_follows_z() {
        let mut st = CoupledState::new(2);
        coupled_step(&mut st, 0.75, 2, 0.1); // Y, Z to (0,1)
        coupled_step(&mut st, 0.75, 2, 0.9); // back to origin, not fresh
        assert!(!st.y().at_fresh());
        coupled_step(&mut st, 0.75, 1, 0.6);
        assert_eq!(st.y().position().coords(), &[-1, 0]);
        assert_eq!(st.z().coords(), &[-1, 0]);
        assert_eq!(st.gap(), 0);
    }

    #[test]
    fn half_goes_to_plus_branch() {
        let mut st = CoupledState::new(3);
        coupled_step(&mut st, 0.75, 3, 0.5);
        assert_eq!(st.z().coords(), &[0, 0, 1]);
        // alpha = 3 does not move W.
        assert_eq!(st.h_count(), 0);
    }

    #[test]
    fn tan_index_zero_is_vacuous() {
        assert_eq!(tan_indices(&[(5, -3)]), vec![0]);
    }

    #[test]
    fn tan_indices_of_a_square() {
        let path = [(0, 0), (1, 0), (1, 1), (0, 1), (0, 0)];
        assert_eq!(tan_indices(&path), vec![0, 1, 2]);
        let mut tr = TanTracker::new();
        for w in path {
            tr.observe(w);
        }
        assert_eq!(tr.tan_count(), 3);
        assert_eq!(tr.level_max(0), Some(1));
        assert_eq!(tr.level_max(1), Some(1));
    }

    #[test]
    fn step_back_is_not_tan() {
        assert_eq!(tan_indices(&[(0, 0), (-1, 0)]), vec![0]);
    }

    #[test]
    fn coupled_runs_have_no_violations() {
        for (p, d) in [(0.6, 2), (1.0, 2), (0.75, 3), (0.9, 4)] {
            for seed in 0..20 {
                let run = run_coupled(p, d, 5_000, RandomSource::new(seed, 0), true);
                assert_eq!(run.violations.total(), 0, "p={p} d={d} seed={seed}");
                let seq = run.tan_sequence.unwrap();
                assert_eq!(seq.len() as u64, run.state.h_count() + 1);
                assert!(seq.windows(2).all(|w| w[1] >= w[0]));
                assert!(run.state.gap() >= 0 && run.state.gap() % 2 == 0);
            }
        }
    }

    #[test]
    fn w_only_moves_at_h_times() {
        let mut rng = RandomSource::new(3, 0).rng();
        let mut st = CoupledState::new(4);
        for _ in 0..2_000 {
            let alpha = rng.gen_range(1..=4);
            let u = uniform(&mut rng);
            let before = st.w();
            let r = coupled_step(&mut st, 0.8, alpha, u);
            assert_eq!(r.w_moved, alpha <= 2);
            if r.w_moved {
                assert_eq!(st.w(), (st.z().e1(), st.z().coord(1)));
            } else {
                assert_eq!(st.w(), before);
            }
        }
    }

    #[test]
    fn h_increments_have_mean_d_over_two() {
        // I_i - I_{i-1} is geometric with success 2/d: mean d/2, variance
        // (1 - q)/q^2.
        let d = 4usize;
        let q = 2.0 / d as f64;
        let n = 400_000u64;
        let run = run_coupled(0.75, d, n, RandomSource::new(17, 0), false);
        let h = run.state.h_count() as f64;
        let mean_inc = n as f64 / h;
        let se = ((1.0 - q) / (q * q)).sqrt() / h.sqrt();
        assert!((mean_inc - d as f64 / 2.0).abs() < 4.0 * se, "{mean_inc}");
    }
}
