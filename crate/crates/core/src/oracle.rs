//! Exact small-horizon laws by enumeration.
//!
//! Paths are expanded layer by layer and merged on the key
//! `(position, visited set, current-site freshness, statistic state)`; the next
//! step law depends only on that key, so merging preserves the law. Weights are
//! generic: use [`Exact`](crate::scalar::Exact) for exact rationals or `f64`.

use std::collections::BTreeMap;
use std::fmt;
use std::hash::Hash;

use rustc_hash::FxHashMap;
use serde::Serialize;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::lattice::LatticeVector;
use crate::regeneration::find_regenerations;
use crate::rng::RandomSource;
use crate::scalar::Scalar;
use crate::walk::{walk_step, Recording, StepLaw, WalkState};

/// Largest number of unmerged paths the walk oracle will expand (4^12).
pub const WALK_PATH_BUDGET: u128 = 1 << 24;
/// Largest horizon for the planar tan-point oracle.
pub const TAN_MAX_STEPS: u32 = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Statistic {
    /// `X_n · e1`.
    X1,
    /// `J_n`.
    FreshCount,
    /// `D`, censored when larger than `n`.
    FirstReturn,
    /// `T(0)`, censored when larger than `n`.
    FirstExceed,
    /// First confirmed regeneration time on the `n`-step path.
    KappaConfirmedBy { lag: u64 },
}

impl Statistic {
    pub fn name(&self) -> &'static str {
        match self {
            Statistic::X1 => "x1",
            Statistic::FreshCount => "J",
            Statistic::FirstReturn => "D",
            Statistic::FirstExceed => "T0",
            Statistic::KappaConfirmedBy { .. } => "kappa_confirmed_by",
        }
    }
}

/// A value of a statistic, or "not observed by the horizon".
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Outcome {
    Value(i64),
    Censored,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Value(v) => write!(f, "{v}"),
            Outcome::Censored => f.write_str("censored"),
        }
    }
}

pub type Distribution<T> = BTreeMap<Outcome, T>;

fn check_walk_budget(d: usize, n: u32) -> Result<()> {
    let estimate = (2 * d as u128).checked_pow(n).unwrap_or(u128::MAX);
    if estimate > WALK_PATH_BUDGET {
        return Err(Error::OracleBudget {
            what: format!("d = {d}, n = {n}"),
            estimate,
            limit: WALK_PATH_BUDGET,
        });
    }
    Ok(())
}

type Tag = SmallVec<[i64; 16]>;

#[derive(Clone, PartialEq, Eq, Hash)]
struct Key {
    position: LatticeVector,
    visited: Vec<LatticeVector>,
    at_fresh: bool,
    tag: Tag,
}

fn insert_sorted(visited: &mut Vec<LatticeVector>, site: &LatticeVector) -> bool {
    match visited.binary_search(site) {
        Ok(_) => false,
        Err(i) => {
            visited.insert(i, site.clone());
            true
        }
    }
}

fn update_tag(stat: Statistic, tag: &mut Tag, time: i64, x1: i64) {
    match stat {
        Statistic::X1 | Statistic::FreshCount => {}
        Statistic::FirstReturn => {
            if tag.is_empty() && x1 == 0 {
                tag.push(time);
            }
        }
        Statistic::FirstExceed => {
            if tag.is_empty() && x1 > 0 {
                tag.push(time);
            }
        }
        Statistic::KappaConfirmedBy { .. } => tag.push(x1),
    }
}

fn outcome_of(stat: Statistic, key: &Key) -> Outcome {
    match stat {
        Statistic::X1 => Outcome::Value(key.position.e1()),
        Statistic::FreshCount => Outcome::Value(key.visited.len() as i64),
        Statistic::FirstReturn | Statistic::FirstExceed => key
            .tag
            .first()
            .map_or(Outcome::Censored, |&t| Outcome::Value(t)),
        Statistic::KappaConfirmedBy { lag } => {
            let record = find_regenerations(&key.tag, lag).expect("enumerated paths are valid");
            record
                .first_kappa()
                .map_or(Outcome::Censored, |k| Outcome::Value(k as i64))
        }
    }
}

fn accumulate<K: Eq + Hash, T: Scalar>(map: &mut FxHashMap<K, T>, key: K, w: T) {
    match map.get_mut(&key) {
        Some(acc) => *acc = acc.clone() + w,
        None => {
            map.insert(key, w);
        }
    }
}

/// Exact law of `stat` at horizon `n` under the excited walk.
pub fn exact_distribution<T: Scalar>(
    law: &StepLaw<T>,
    n: u32,
    stat: Statistic,
) -> Result<Distribution<T>> {
    let d = law.d();
    check_walk_budget(d, n)?;
    let origin = LatticeVector::origin(d);
    let mut start_tag = Tag::new();
    if let Statistic::KappaConfirmedBy { .. } = stat {
        start_tag.push(0);
    }
    let mut layer: FxHashMap<Key, T> = FxHashMap::default();
    layer.insert(
        Key {
            position: origin.clone(),
            visited: vec![origin],
            at_fresh: true,
            tag: start_tag,
        },
        T::one(),
    );

    for t in 1..=n {
        let mut next: FxHashMap<Key, T> = FxHashMap::default();
        for (key, w) in &layer {
            let probs = if key.at_fresh { law.mu() } else { law.nu() };
            for (k, q) in probs.iter().enumerate() {
                if *q == T::zero() {
                    continue;
                }
                let mut position = key.position.clone();
                position.apply_step(k);
                let mut visited = key.visited.clone();
                let at_fresh = insert_sorted(&mut visited, &position);
                let mut tag = key.tag.clone();
                update_tag(stat, &mut tag, i64::from(t), position.e1());
                accumulate(
                    &mut next,
                    Key {
                        position,
                        visited,
                        at_fresh,
                        tag,
                    },
                    w.clone() * q.clone(),
                );
            }
        }
        layer = next;
    }

    let mut dist = Distribution::new();
    for (key, w) in layer {
        let o = outcome_of(stat, &key);
        let acc = dist.entry(o).or_insert_with(T::zero);
        *acc = acc.clone() + w;
    }
    Ok(dist)
}

/// Statistic computed directly from a complete path of positions.
fn statistic_of_path(stat: Statistic, path: &[LatticeVector]) -> Outcome {
    let first = |pred: &dyn Fn(i64) -> bool| {
        (1..path.len())
            .find(|&k| pred(path[k].e1()))
            .map_or(Outcome::Censored, |k| Outcome::Value(k as i64))
    };
    match stat {
        Statistic::X1 => Outcome::Value(path.last().map_or(0, |x| x.e1())),
        Statistic::FreshCount => {
            let mut sites = path.to_vec();
            sites.sort();
            sites.dedup();
            Outcome::Value(sites.len() as i64)
        }
        Statistic::FirstReturn => first(&|x| x == 0),
        Statistic::FirstExceed => first(&|x| x > 0),
        Statistic::KappaConfirmedBy { lag } => {
            let e1: Vec<i64> = path.iter().map(|x| x.e1()).collect();
            find_regenerations(&e1, lag)
                .expect("enumerated paths are valid")
                .first_kappa()
                .map_or(Outcome::Censored, |k| Outcome::Value(k as i64))
        }
    }
}

/// Plain depth-first enumeration of every path, without merging.
pub fn exact_distribution_unmerged<T: Scalar>(
    law: &StepLaw<T>,
    n: u32,
    stat: Statistic,
) -> Result<Distribution<T>> {
    fn expand<T: Scalar>(
        law: &StepLaw<T>,
        n: usize,
        stat: Statistic,
        path: &mut Vec<LatticeVector>,
        weight: T,
        out: &mut Distribution<T>,
    ) {
        if path.len() == n + 1 {
            let acc = out
                .entry(statistic_of_path(stat, path))
                .or_insert_with(T::zero);
            *acc = acc.clone() + weight;
            return;
        }
        let here = path.last().expect("path starts at the origin");
        let fresh = !path[..path.len() - 1].contains(here);
        let probs = if fresh { law.mu() } else { law.nu() };
        for (k, q) in probs.iter().enumerate() {
            if *q == T::zero() {
                continue;
            }
            let mut next = path.last().expect("nonempty").clone();
            next.apply_step(k);
            path.push(next);
            expand(law, n, stat, path, weight.clone() * q.clone(), out);
            path.pop();
        }
    }

    check_walk_budget(law.d(), n)?;
    let mut out = Distribution::new();
    let mut path = vec![LatticeVector::origin(law.d())];
    expand(law, n as usize, stat, &mut path, T::one(), &mut out);
    Ok(out)
}

/// Exact law of `stat` for the `Y` component of the coupled chain, by
/// enumerating the axis draws and the three regions `[0, 1/2]`, `(1/2, p]`,
/// `(p, 1)` of the uniform draw. Supports [`Statistic::X1`] and
/// [`Statistic::FreshCount`].
pub fn exact_coupled_y_distribution<T: Scalar>(
    p: T,
    d: usize,
    n: u32,
    stat: Statistic,
) -> Result<Distribution<T>> {
    if !matches!(stat, Statistic::X1 | Statistic::FreshCount) {
        return Err(Error::InvalidInput(format!(
            "coupled oracle supports x1 and J, not {}",
            stat.name()
        )));
    }
    let estimate = (3 * d as u128).checked_pow(n).unwrap_or(u128::MAX);
    if estimate > WALK_PATH_BUDGET {
        return Err(Error::OracleBudget {
            what: format!("coupled chain d = {d}, n = {n}"),
            estimate,
            limit: WALK_PATH_BUDGET,
        });
    }
    let half = T::half();
    // (weight, z moves plus, excited y moves plus)
    let regions = [
        (half.clone(), true, true),
        (p.clone() - half, false, true),
        (T::one() - p, false, false),
    ];
    let axis_weight = T::one() / T::from_count(d);

    #[derive(Clone, PartialEq, Eq, Hash)]
    struct CKey {
        y: LatticeVector,
        visited: Vec<LatticeVector>,
        at_fresh: bool,
        z: LatticeVector,
    }

    let origin = LatticeVector::origin(d);
    let mut layer: FxHashMap<CKey, T> = FxHashMap::default();
    layer.insert(
        CKey {
            y: origin.clone(),
            visited: vec![origin.clone()],
            at_fresh: true,
            z: origin,
        },
        T::one(),
    );
    for _ in 0..n {
        let mut next: FxHashMap<CKey, T> = FxHashMap::default();
        for (key, w) in &layer {
            for alpha in 1..=d {
                for (rw, z_plus, y_plus) in &regions {
                    if *rw == T::zero() {
                        continue;
                    }
                    let mut z = key.z.clone();
                    let z_sign = if *z_plus { 1 } else { -1 };
                    z.shift(alpha - 1, z_sign);
                    let mut y = key.y.clone();
                    if key.at_fresh && alpha == 1 {
                        y.shift(0, if *y_plus { 1 } else { -1 });
                    } else {
                        y.shift(alpha - 1, z_sign);
                    }
                    let mut visited = key.visited.clone();
                    let at_fresh = insert_sorted(&mut visited, &y);
                    accumulate(
                        &mut next,
                        CKey {
                            y,
                            visited,
                            at_fresh,
                            z,
                        },
                        w.clone() * axis_weight.clone() * rw.clone(),
                    );
                }
            }
        }
        layer = next;
    }

    let mut dist = Distribution::new();
    for (key, w) in layer {
        let o = match stat {
            Statistic::X1 => Outcome::Value(key.y.e1()),
            _ => Outcome::Value(key.visited.len() as i64),
        };
        let acc = dist.entry(o).or_insert_with(T::zero);
        *acc = acc.clone() + w;
    }
    Ok(dist)
}

/// Exact law of the tan point count `N_n` of the planar simple random walk.
pub fn exact_tan_distribution<T: Scalar>(n: u32) -> Result<BTreeMap<u64, T>> {
    if n > TAN_MAX_STEPS {
        return Err(Error::OracleBudget {
            what: format!("tan points, n = {n}"),
            estimate: 4u128.pow(n),
            limit: 4u128.pow(TAN_MAX_STEPS),
        });
    }

    #[derive(Clone, PartialEq, Eq, Hash)]
    struct TKey {
        w: (i64, i64),
        /// (level, max first coordinate), sorted by level.
        level_max: Vec<(i64, i64)>,
        tan: u64,
    }

    let mut layer: FxHashMap<TKey, u64> = FxHashMap::default();
    layer.insert(
        TKey {
            w: (0, 0),
            level_max: vec![(0, 0)],
            tan: 1,
        },
        1,
    );
    for _ in 0..n {
        let mut next: FxHashMap<TKey, u64> = FxHashMap::default();
        for (key, &c) in &layer {
            for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let w = (key.w.0 + dx, key.w.1 + dy);
                let mut level_max = key.level_max.clone();
                let tan = match level_max.binary_search_by_key(&w.1, |&(l, _)| l) {
                    Ok(i) => {
                        let is_tan = w.0 > level_max[i].1;
                        if is_tan {
                            level_max[i].1 = w.0;
                        }
                        is_tan
                    }
                    Err(i) => {
                        level_max.insert(i, (w.1, w.0));
                        true
                    }
                };
                *next
                    .entry(TKey {
                        w,
                        level_max,
                        tan: key.tan + u64::from(tan),
                    })
                    .or_insert(0) += c;
            }
        }
        layer = next;
    }

    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for (key, c) in layer {
        *counts.entry(key.tan).or_insert(0) += c;
    }
    let total = T::from_u64(4u64.pow(n)).expect("4^n representable");
    Ok(counts
        .into_iter()
        .map(|(k, c)| {
            (
                k,
                T::from_u64(c).expect("count representable") / total.clone(),
            )
        })
        .collect())
}

/// `E[stat]` over the uncensored values, and the censored mass.
pub fn expectation<T: Scalar>(dist: &Distribution<T>) -> (T, T) {
    let mut mean = T::zero();
    let mut censored = T::zero();
    for (o, w) in dist {
        match o {
            Outcome::Value(v) => {
                mean = mean + T::from_i64(*v).expect("value representable") * w.clone()
            }
            Outcome::Censored => censored = censored + w.clone(),
        }
    }
    (mean, censored)
}

pub fn total_mass<T: Scalar>(dist: &Distribution<T>) -> T {
    dist.values().cloned().fold(T::zero(), |a, b| a + b)
}

/// One Monte Carlo statistic compared against its exact value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub statistic: String,
    pub exact: f64,
    pub estimate: f64,
    pub se: f64,
    pub z: f64,
}

impl Comparison {
    fn new(statistic: &str, exact: f64, samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let estimate = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|x| (x - estimate).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let se = (var / n).sqrt();
        let diff = estimate - exact;
        let z = if se > 0.0 {
            diff / se
        } else if diff.abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        Self {
            statistic: statistic.to_string(),
            exact,
            estimate,
            se,
            z,
        }
    }

    pub fn within(&self, max_abs_z: f64) -> bool {
        self.z.abs() <= max_abs_z
    }
}

/// Monte Carlo versus exact values of `E[X_n·e1]`, `E[J_n]` and `P(D > n)`.
///
/// `mc_law` drives the simulation and `exact_law` the enumeration; they are
/// normally the same law in two scalar types.
pub fn mc_vs_oracle<T: Scalar>(
    exact_law: &StepLaw<T>,
    mc_law: &StepLaw<f64>,
    n: u32,
    runs: u64,
    seed: u64,
) -> Result<Vec<Comparison>> {
    if runs == 0 {
        return Err(Error::InsufficientData(
            "mc_vs_oracle needs at least one run".into(),
        ));
    }
    let x1 = exact_distribution(exact_law, n, Statistic::X1)?;
    let j = exact_distribution(exact_law, n, Statistic::FreshCount)?;
    let dret = exact_distribution(exact_law, n, Statistic::FirstReturn)?;
    let exact_x1 = expectation(&x1).0.to_f64_lossy();
    let exact_j = expectation(&j).0.to_f64_lossy();
    let exact_no_return = expectation(&dret).1.to_f64_lossy();

    let compiled = mc_law.compile();
    let mut state = WalkState::new(mc_law.d(), Recording::Off);
    let mut xs = Vec::with_capacity(runs as usize);
    let mut js = Vec::with_capacity(runs as usize);
    let mut no_return = Vec::with_capacity(runs as usize);
    let source = RandomSource::new(seed, 0);
    for i in 0..runs {
        state.reset();
        let mut rng = source.substream(i).rng();
        let mut returned = false;
        for _ in 0..n {
            walk_step(&mut state, &compiled, &mut rng);
            returned |= state.position().e1() == 0;
        }
        xs.push(state.position().e1() as f64);
        js.push(state.fresh_count() as f64);
        no_return.push(if returned { 0.0 } else { 1.0 });
    }
    Ok(vec![
        Comparison::new("E[X_n.e1]", exact_x1, &xs),
        Comparison::new("E[J_n]", exact_j, &js),
        Comparison::new("P(D>n)", exact_no_return, &no_return),
    ])
}
