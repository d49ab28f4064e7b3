//! The excited random walk: step laws, single steps and whole runs.
//!
//! On its first visit to a site the walk draws its next step from the excited
//! law `mu`, which pushes towards `+e1`; on later visits it steps uniformly
//! (`nu`). Steps are indexed in the fixed order `(+e1, -e1, +e2, -e2, ...)`.

use rustc_hash::FxHashSet;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::lattice::LatticeVector;
use crate::rng::{uniform, RandomSource, SimRng};
use crate::scalar::Scalar;

/// Bias `p` and dimension `d` together with the two step distributions.
#[derive(Clone, Debug, PartialEq)]
pub struct StepLaw<T> {
    p: T,
    d: usize,
    mu: Vec<T>,
    nu: Vec<T>,
}

/// Builds the step laws for bias `p` in dimension `d`.
///
/// `allow_boundary` admits the symmetric case `p = 1/2`, where both laws are
/// uniform.
pub fn make_step_law<T: Scalar>(p: T, d: usize, allow_boundary: bool) -> Result<StepLaw<T>> {
    let half = T::half();
    if d < 2 {
        return Err(Error::ModelDomain(format!(
            "dimension d = {d} must be at least 2"
        )));
    }
    if p > T::one() {
        return Err(Error::ModelDomain(format!("bias p = {p:?} exceeds 1")));
    }
    let admissible = p > half || (allow_boundary && p == half);
    if !admissible {
        return Err(Error::ModelDomain(format!(
            "bias p = {p:?} must lie in (1/2, 1]"
        )));
    }

    let dd = T::from_count(d);
    let uniform = T::one() / (dd.clone() + dd.clone());
    let mut mu = vec![uniform.clone(); 2 * d];
    mu[0] = p.clone() / dd.clone();
    mu[1] = (T::one() - p.clone()) / dd;
    let nu = vec![uniform; 2 * d];
    Ok(StepLaw { p, d, mu, nu })
}

impl<T: Scalar> StepLaw<T> {
    pub fn new(p: T, d: usize) -> Result<Self> {
        make_step_law(p, d, false)
    }

    pub fn p(&self) -> &T {
        &self.p
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Law used at a freshly visited site.
    pub fn mu(&self) -> &[T] {
        &self.mu
    }

    /// Law used at a previously visited site.
    pub fn nu(&self) -> &[T] {
        &self.nu
    }

    pub fn compile(&self) -> CompiledLaw {
        CompiledLaw {
            d: self.d,
            mu: StepSampler::new(&self.mu),
            nu: StepSampler::new(&self.nu),
        }
    }
}

/// Inverse-CDF sampler over the `2d` unit steps.
#[derive(Clone, Debug)]
pub struct StepSampler {
    cumulative: SmallVec<[f64; 8]>,
}

impl StepSampler {
    pub fn new<T: Scalar>(law: &[T]) -> Self {
        let mut acc = T::zero();
        let mut cumulative: SmallVec<[f64; 8]> = law
            .iter()
            .map(|w| {
                acc = acc.clone() + w.clone();
                acc.to_f64_lossy()
            })
            .collect();
        // Zero-weight steps keep their predecessor's bound and are never selected.
        if let Some(last) = law.iter().rposition(|w| *w > T::zero()) {
            for c in cumulative[last..].iter_mut() {
                *c = 1.0;
            }
        }
        Self { cumulative }
    }

    /// Index of the step whose interval `(c_{k-1}, c_k]` contains `u`
    /// (the first interval also contains 0).
    #[inline]
    pub fn index(&self, u: f64) -> usize {
        let last = self.cumulative.len() - 1;
        self.cumulative.iter().position(|&c| u <= c).unwrap_or(last)
    }
}

/// `f64` samplers for both step laws, ready for the simulation loop.
#[derive(Clone, Debug)]
pub struct CompiledLaw {
    d: usize,
    mu: StepSampler,
    nu: StepSampler,
}

impl CompiledLaw {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn mu(&self) -> &StepSampler {
        &self.mu
    }

    pub fn nu(&self) -> &StepSampler {
        &self.nu
    }
}

/// Samples one unit step from `law` by inverse CDF at `u`.
pub fn sample_step<T: Scalar>(law: &[T], u: f64) -> LatticeVector {
    let d = law.len() / 2;
    LatticeVector::unit(d, StepSampler::new(law).index(u))
}

/// How much history a walk keeps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Recording {
    #[default]
    Off,
    /// The e1-coordinate at every time.
    E1,
    /// The e1-coordinate and the full position at every time.
    Full,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trajectory {
    pub e1: Vec<i64>,
    pub positions: Vec<LatticeVector>,
}

/// State of a single excited walk at time `n`.
#[derive(Clone, Debug)]
pub struct WalkState {
    position: LatticeVector,
    time: u64,
    visited: FxHashSet<LatticeVector>,
    fresh_count: u64,
    running_max: i64,
    at_fresh: bool,
    recording: Recording,
    trajectory: Option<Trajectory>,
}

impl WalkState {
    /// Walk at the origin at time 0.
    pub fn new(d: usize, recording: Recording) -> Self {
        let mut state = Self {
            position: LatticeVector::origin(d),
            time: 0,
            visited: FxHashSet::default(),
            fresh_count: 0,
            running_max: 0,
            at_fresh: true,
            recording,
            trajectory: None,
        };
        state.reset();
        state
    }

    /// Returns to time 0, keeping allocated capacity.
    pub fn reset(&mut self) {
        let d = self.position.dim();
        self.position = LatticeVector::origin(d);
        self.time = 0;
        self.visited.clear();
        self.visited.insert(self.position.clone());
        self.fresh_count = 1;
        self.running_max = 0;
        self.at_fresh = true;
        self.trajectory = match self.recording {
            Recording::Off => None,
            Recording::E1 => Some(Trajectory {
                e1: vec![0],
                positions: Vec::new(),
            }),
            Recording::Full => Some(Trajectory {
                e1: vec![0],
                positions: vec![self.position.clone()],
            }),
        };
    }

    pub fn position(&self) -> &LatticeVector {
        &self.position
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    /// `J_n`, the number of distinct sites visited so far.
    pub fn fresh_count(&self) -> u64 {
        self.fresh_count
    }

    /// `r_n`, the largest e1-coordinate reached so far.
    pub fn running_max(&self) -> i64 {
        self.running_max
    }

    /// Whether the current site was unvisited before the current time.
    pub fn at_fresh(&self) -> bool {
        self.at_fresh
    }

    pub fn has_visited(&self, site: &LatticeVector) -> bool {
        self.visited.contains(site)
    }

    pub fn visited_count(&self) -> usize {
        self.visited.len()
    }

    pub fn trajectory(&self) -> Option<&Trajectory> {
        self.trajectory.as_ref()
    }

    pub fn into_trajectory(self) -> Option<Trajectory> {
        self.trajectory
    }

    /// Moves by the unit step with ordering index `k` and updates the
    /// bookkeeping.
    #[inline]
    pub fn advance(&mut self, k: usize) {
        self.position.apply_step(k);
        self.time += 1;
        self.at_fresh = if self.visited.contains(&self.position) {
            false
        } else {
            self.visited.insert(self.position.clone());
            true
        };
        if self.at_fresh {
            self.fresh_count += 1;
        }
        let x1 = self.position.e1();
        if x1 > self.running_max {
            self.running_max = x1;
        }
        if let Some(traj) = self.trajectory.as_mut() {
            traj.e1.push(x1);
            if self.recording == Recording::Full {
                traj.positions.push(self.position.clone());
            }
        }
    }
}

/// One step of the excited walk: `mu` at a fresh site, `nu` otherwise.
/// Returns the ordering index of the step taken.
#[inline]
pub fn walk_step(state: &mut WalkState, law: &CompiledLaw, rng: &mut SimRng) -> usize {
    let sampler = if state.at_fresh { &law.mu } else { &law.nu };
    let k = sampler.index(uniform(rng));
    state.advance(k);
    k
}

/// Runs `n_steps` steps from the origin using the stream of `source`.
pub fn run_walk<T: Scalar>(
    law: &StepLaw<T>,
    n_steps: u64,
    source: RandomSource,
    recording: Recording,
) -> WalkState {
    let compiled = law.compile();
    let mut state = WalkState::new(law.d(), recording);
    let mut rng = source.rng();
    for _ in 0..n_steps {
        walk_step(&mut state, &compiled, &mut rng);
    }
    state
}
