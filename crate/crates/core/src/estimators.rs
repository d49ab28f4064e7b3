//! Speed and variance estimators.
//!
//! The direct estimators work on the final e1-coordinates of independent runs.
//! The regeneration estimator works on the `(dk, dx1)` increments between
//! confirmed regeneration times:
//!
//! ```text
//! v      = sum(dx1) / sum(dk)
//! sigma2 = mean((dx1 - v dk)^2) / mean(dk)
//! ```
//!
//! with standard errors from the delta method (influence functions of the
//! ratio of means) or from batch means.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::regeneration::RegenBlock;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    Regeneration,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointEstimate<F> {
    pub value: F,
    pub se: F,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaEstimate<F> {
    pub sigma: F,
    pub sigma_se: F,
    pub sigma2: F,
    pub sigma2_se: F,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SeMethod {
    #[default]
    Delta,
    BatchMeans {
        batches: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct RegenOptions {
    pub include_first: bool,
    pub se: SeMethod,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegenEstimate<F> {
    pub v: PointEstimate<F>,
    pub sigma2: PointEstimate<F>,
    pub n_blocks: usize,
}

/// Speed and variance estimate together with the run metadata.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateSummary<F> {
    pub p: F,
    pub d: usize,
    pub method: Method,
    pub n_runs: usize,
    pub n_steps: u64,
    pub n_blocks: usize,
    pub v_hat: F,
    pub v_se: F,
    pub sigma2_hat: F,
    pub sigma2_se: F,
    /// Fraction of runs without any confirmed regeneration.
    pub censored_fraction: F,
}

impl<F: Real> EstimateSummary<F> {
    pub fn sigma_hat(&self) -> F {
        self.sigma2_hat.sqrt()
    }

    /// Standard error of `sqrt(sigma2)` by the delta method.
    pub fn sigma_se(&self) -> F {
        let sigma = self.sigma_hat();
        if sigma > F::zero() {
            self.sigma2_se / (sigma + sigma)
        } else {
            F::zero()
        }
    }
}

fn f<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("finite value")
}

fn count<F: Real>(n: usize) -> F {
    F::from_usize(n).expect("count fits")
}

fn mean<F: Real>(xs: impl Iterator<Item = F>) -> (F, usize) {
    let mut sum = F::zero();
    let mut n = 0;
    for x in xs {
        sum = sum + x;
        n += 1;
    }
    (sum / count(n.max(1)), n)
}

/// Sample standard deviation (denominator `n - 1`).
fn sample_sd<F: Real>(xs: &[F]) -> F {
    if xs.len() < 2 {
        return F::zero();
    }
    let (m, n) = mean(xs.iter().copied());
    let ss = xs.iter().fold(F::zero(), |acc, &x| acc + (x - m) * (x - m));
    (ss / count(n - 1)).sqrt()
}

/// `v = mean(X_n·e1 / n)` with the standard error of the mean.
pub fn estimate_v_direct<F: Real>(final_x1: &[i64], n_steps: u64) -> Result<PointEstimate<F>> {
    if final_x1.is_empty() {
        return Err(Error::InsufficientData(
            "no runs for the direct speed estimate".into(),
        ));
    }
    if n_steps == 0 {
        return Err(Error::InvalidInput("n_steps must be at least 1".into()));
    }
    // Moments of the raw integers first, so constant inputs give exactly zero spread.
    let n = f::<F>(n_steps as f64);
    let xs: Vec<F> = final_x1.iter().map(|&x| f::<F>(x as f64)).collect();
    let (m, _) = mean(xs.iter().copied());
    let se = sample_sd(&xs) / n / count::<F>(xs.len()).sqrt();
    Ok(PointEstimate { value: m / n, se })
}

/// Standard deviation of `X_n·e1 / sqrt(n)` over runs, not recentred by any
/// reference speed; normal-theory standard error `s / sqrt(2 (N - 1))`.
pub fn estimate_sigma_direct<F: Real>(final_x1: &[i64], n_steps: u64) -> Result<SigmaEstimate<F>> {
    if final_x1.len() < 2 {
        return Err(Error::InsufficientData(
            "at least 2 runs needed for the direct variance estimate".into(),
        ));
    }
    if n_steps == 0 {
        return Err(Error::InvalidInput("n_steps must be at least 1".into()));
    }
    let root_n = f::<F>(n_steps as f64).sqrt();
    let xs: Vec<F> = final_x1.iter().map(|&x| f::<F>(x as f64)).collect();
    let sigma = sample_sd(&xs) / root_n;
    let sigma_se = sigma / (count::<F>(2 * (xs.len() - 1))).sqrt();
    Ok(SigmaEstimate {
        sigma,
        sigma_se,
        sigma2: sigma * sigma,
        sigma2_se: f::<F>(2.0) * sigma * sigma_se,
    })
}

struct BlockMoments<F> {
    a: F,
    b: F,
    aa: F,
    ab: F,
    bb: F,
}

fn moments<F: Real>(blocks: &[(F, F)]) -> BlockMoments<F> {
    let n = count::<F>(blocks.len());
    let mut m = BlockMoments {
        a: F::zero(),
        b: F::zero(),
        aa: F::zero(),
        ab: F::zero(),
        bb: F::zero(),
    };
    for &(a, b) in blocks {
        m.a = m.a + a;
        m.b = m.b + b;
        m.aa = m.aa + a * a;
        m.ab = m.ab + a * b;
        m.bb = m.bb + b * b;
    }
    m.a = m.a / n;
    m.b = m.b / n;
    m.aa = m.aa / n;
    m.ab = m.ab / n;
    m.bb = m.bb / n;
    m
}

/// `(v, sigma2)` from the block moments.
fn point<F: Real>(m: &BlockMoments<F>) -> (F, F) {
    let v = m.a / m.b;
    let two = f::<F>(2.0);
    let q = m.aa - two * v * m.ab + v * v * m.bb;
    (v, q.max(F::zero()) / m.b)
}

fn delta_se<F: Real>(blocks: &[(F, F)], m: &BlockMoments<F>) -> (F, F) {
    let (v, s2) = point(m);
    let two = f::<F>(2.0);
    let q = s2 * m.b;
    let dq_dv = two * (v * m.bb - m.ab);
    // Gradients with respect to (m_a, m_b, m_aa, m_ab, m_bb).
    let gv = [F::one() / m.b, -v / m.b];
    let gs = [
        dq_dv / (m.b * m.b),
        -dq_dv * v / (m.b * m.b) - q / (m.b * m.b),
        F::one() / m.b,
        -two * v / m.b,
        v * v / m.b,
    ];
    let n = count::<F>(blocks.len());
    let (mut var_v, mut var_s) = (F::zero(), F::zero());
    for &(a, b) in blocks {
        let z = [a - m.a, b - m.b, a * a - m.aa, a * b - m.ab, b * b - m.bb];
        let iv = gv[0] * z[0] + gv[1] * z[1];
        let is = gs
            .iter()
            .zip(z.iter())
            .fold(F::zero(), |acc, (&g, &c)| acc + g * c);
        var_v = var_v + iv * iv;
        var_s = var_s + is * is;
    }
    ((var_v / n).sqrt() / n.sqrt(), (var_s / n).sqrt() / n.sqrt())
}

fn batch_se<F: Real>(blocks: &[(F, F)], batches: usize) -> Result<(F, F)> {
    if batches < 2 || batches > blocks.len() {
        return Err(Error::InsufficientData(format!(
            "batch means needs 2 <= batches <= blocks, got {batches} batches for {} blocks",
            blocks.len()
        )));
    }
    let per = blocks.len() / batches;
    let mut vs = Vec::with_capacity(batches);
    let mut ss = Vec::with_capacity(batches);
    for i in 0..batches {
        let end = if i + 1 == batches {
            blocks.len()
        } else {
            (i + 1) * per
        };
        let (v, s) = point(&moments(&blocks[i * per..end]));
        vs.push(v);
        ss.push(s);
    }
    let root = count::<F>(batches).sqrt();
    Ok((sample_sd(&vs) / root, sample_sd(&ss) / root))
}

/// Regeneration-block estimates of `v` and `sigma2`. Blocks flagged
/// `is_first` are skipped unless `options.include_first`.
pub fn estimate_v_sigma_regen<F: Real>(
    blocks: &[RegenBlock],
    options: RegenOptions,
) -> Result<RegenEstimate<F>> {
    let used: Vec<(F, F)> = blocks
        .iter()
        .filter(|b| options.include_first || !b.is_first)
        .map(|b| (f::<F>(b.dx1 as f64), f::<F>(b.dk as f64)))
        .collect();
    if used.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} usable regeneration blocks, need at least 2",
            used.len()
        )));
    }
    let m = moments(&used);
    let (v, s2) = point(&m);
    let (v_se, s2_se) = match options.se {
        SeMethod::Delta => delta_se(&used, &m),
        SeMethod::BatchMeans { batches } => batch_se(&used, batches)?,
    };
    Ok(RegenEstimate {
        v: PointEstimate { value: v, se: v_se },
        sigma2: PointEstimate {
            value: s2,
            se: s2_se,
        },
        n_blocks: used.len(),
    })
}

/// Empirical survival function `P(X >= n)` at a list of thresholds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailCurve<F> {
    pub thresholds: Vec<u64>,
    pub survival: Vec<F>,
    pub total: usize,
}

impl<F: Real> TailCurve<F> {
    /// Binomial standard error at each threshold.
    pub fn standard_errors(&self) -> Vec<F> {
        let n = count::<F>(self.total);
        self.survival
            .iter()
            .map(|&s| (s * (F::one() - s) / n).sqrt())
            .collect()
    }
}

/// Survival curve of `samples`, out of `samples.len()` observations.
pub fn tail_curve<F: Real>(samples: &[u64], thresholds: &[u64]) -> Result<TailCurve<F>> {
    tail_curve_of_total(samples, samples.len(), thresholds)
}

/// Survival curve where `samples` are the finite observations among `total`
/// runs (for instance finite return times `D`, with `P(n <= D < inf)`).
pub fn tail_curve_of_total<F: Real>(
    samples: &[u64],
    total: usize,
    thresholds: &[u64],
) -> Result<TailCurve<F>> {
    if samples.is_empty() || total == 0 {
        return Err(Error::InsufficientData(
            "no samples for the tail curve".into(),
        ));
    }
    if samples.len() > total {
        return Err(Error::InvalidInput(format!(
            "{} samples out of a total of {total}",
            samples.len()
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let n = count::<F>(total);
    let survival = thresholds
        .iter()
        .map(|&t| {
            let below = sorted.partition_point(|&s| s < t);
            count::<F>(sorted.len() - below) / n
        })
        .collect();
    Ok(TailCurve {
        thresholds: thresholds.to_vec(),
        survival,
        total,
    })
}

/// `|a - b| / sqrt(se_a^2 + se_b^2)`.
pub fn combined_z<F: Real>(a: PointEstimate<F>, b: PointEstimate<F>) -> F {
    let se = (a.se * a.se + b.se * b.se).sqrt();
    let diff = (a.value - b.value).abs();
    if se > F::zero() {
        diff / se
    } else if diff == F::zero() {
        F::zero()
    } else {
        F::infinity()
    }
}
