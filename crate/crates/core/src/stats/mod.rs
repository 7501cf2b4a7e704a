//! Paired-comparison statistics over run logs.

pub mod report;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, StudentsT};

use crate::benchmark::Category;

pub use report::{build_report, pair_outcomes, render_json, render_markdown, ReportBundle, ReportInput};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedOutcome {
    pub task_id: String,
    pub category: Category,
    pub baseline_correct: bool,
    pub treatment_correct: bool,
    pub baseline_latency_us: u64,
    pub treatment_latency_us: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Baseline,
    Treatment,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("no outcomes")]
    EmptyInput,
    #[error("need at least two paired latencies")]
    TooFewPairs,
    #[error("latency differences have zero variance")]
    ZeroVariance,
    #[error("arms are not paired: {0}")]
    Unpaired(String),
}

pub fn correct_count(outcomes: &[PairedOutcome], arm: Arm) -> usize {
    outcomes
        .iter()
        .filter(|o| match arm {
            Arm::Baseline => o.baseline_correct,
            Arm::Treatment => o.treatment_correct,
        })
        .count()
}

pub fn tca(outcomes: &[PairedOutcome], arm: Arm) -> Result<f64, StatsError> {
    if outcomes.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    Ok(correct_count(outcomes, arm) as f64 / outcomes.len() as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    /// Both arms correct.
    pub a: u64,
    /// Treatment correct only.
    pub b: u64,
    /// Baseline correct only.
    pub c: u64,
    /// Both wrong.
    pub d: u64,
}

impl ContingencyTable {
    pub fn from_outcomes(outcomes: &[PairedOutcome]) -> Self {
        let mut t = Self::default();
        for o in outcomes {
            match (o.treatment_correct, o.baseline_correct) {
                (true, true) => t.a += 1,
                (true, false) => t.b += 1,
                (false, true) => t.c += 1,
                (false, false) => t.d += 1,
            }
        }
        t
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemar {
    pub b: u64,
    pub c: u64,
    pub p_value: f64,
    /// p as a reduced fraction when it was computed exactly.
    pub exact: Option<(u128, u128)>,
    /// Set when there are no discordant pairs; p is then 1 by definition.
    pub no_discordant_pairs: bool,
}

/// Row `n` of Pascal's triangle, by addition only so nothing overflows for
/// n <= 127.
fn binomial_row(n: u32) -> Vec<u128> {
    let mut row = vec![1u128];
    for _ in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(1);
        next.extend(row.windows(2).map(|w| w[0] + w[1]));
        next.push(1);
        row = next;
    }
    row
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Two-sided exact McNemar test: twice the smaller binomial tail on the
/// discordant pairs, capped at 1.
pub fn mcnemar_exact(b: u64, c: u64) -> McNemar {
    let n = b + c;
    if n == 0 {
        return McNemar { b, c, p_value: 1.0, exact: Some((1, 1)), no_discordant_pairs: true };
    }
    let k = b.min(c);
    if n <= 127 {
        let row = binomial_row(n as u32);
        let tail: u128 = row[..=k as usize].iter().sum();
        let den = 1u128 << n;
        let num = 2 * tail;
        let (num, den) = if num >= den { (1, 1) } else {
            let g = gcd(num, den);
            (num / g, den / g)
        };
        return McNemar { b, c, p_value: num as f64 / den as f64, exact: Some((num, den)), no_discordant_pairs: false };
    }
    let dist = Binomial::new(0.5, n).expect("valid binomial");
    McNemar { b, c, p_value: (2.0 * dist.cdf(k)).min(1.0), exact: None, no_discordant_pairs: false }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub lo_pp: f64,
    pub hi_pp: f64,
    pub level: f64,
    pub resamples: usize,
    pub seed: u64,
}

pub const DEFAULT_RESAMPLES: usize = 10_000;

/// Lower-interpolation percentile: the element at floor(q * (n - 1)).
pub fn percentile_lower<T: Copy>(sorted: &[T], q: f64) -> T {
    sorted[((q * (sorted.len() - 1) as f64).floor() as usize).min(sorted.len() - 1)]
}

/// Paired percentile bootstrap of treatment minus baseline accuracy, in
/// percentage points. Resample `r` draws from its own ChaCha stream `r`
/// under `seed`, so results do not depend on evaluation order.
pub fn bootstrap_ci(outcomes: &[PairedOutcome], resamples: usize, seed: u64, level: f64) -> Result<BootstrapCi, StatsError> {
    if outcomes.is_empty() || resamples == 0 {
        return Err(StatsError::EmptyInput);
    }
    let n = outcomes.len();
    let diffs: Vec<i64> = outcomes.iter().map(|o| i64::from(o.treatment_correct) - i64::from(o.baseline_correct)).collect();
    let mut sums: Vec<i64> = (0..resamples)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            (0..n).map(|_| diffs[rng.random_range(0..n)]).sum()
        })
        .collect();
    sums.sort_unstable();
    let alpha = (1.0 - level) / 2.0;
    let to_pp = |s: i64| 100.0 * s as f64 / n as f64;
    Ok(BootstrapCi {
        lo_pp: to_pp(percentile_lower(&sums, alpha)),
        hi_pp: to_pp(percentile_lower(&sums, 1.0 - alpha)),
        level,
        resamples,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedT {
    pub t: f64,
    pub p_value: f64,
    pub df: u64,
    pub mean_diff: f64,
}

/// Paired t-test on baseline minus treatment.
pub fn paired_t(baseline: &[f64], treatment: &[f64]) -> Result<PairedT, StatsError> {
    if baseline.len() != treatment.len() {
        return Err(StatsError::Unpaired(format!("{} vs {} values", baseline.len(), treatment.len())));
    }
    let n = baseline.len();
    if n < 2 {
        return Err(StatsError::TooFewPairs);
    }
    let d: Vec<f64> = baseline.iter().zip(treatment).map(|(b, t)| b - t).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let t = mean / (var / n as f64).sqrt();
    let df = (n - 1) as f64;
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok(PairedT { t, p_value: p, df: n as u64 - 1, mean_diff: mean })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub n: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub stddev_ms: f64,
}

/// Mean, lower median and sample standard deviation, in milliseconds.
pub fn latency_stats(us: &[u64]) -> LatencyStats {
    if us.is_empty() {
        return LatencyStats::default();
    }
    let ms: Vec<f64> = us.iter().map(|u| *u as f64 / 1000.0).collect();
    let n = ms.len();
    let mean = ms.iter().sum::<f64>() / n as f64;
    let mut sorted = ms.clone();
    sorted.sort_by(f64::total_cmp);
    let stddev = if n > 1 { (ms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
    LatencyStats { n, mean_ms: mean, median_ms: percentile_lower(&sorted, 0.5), stddev_ms: stddev }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(b: bool, t: bool) -> PairedOutcome {
        PairedOutcome {
            task_id: String::new(),
            category: Category::ProductDefect,
            baseline_correct: b,
            treatment_correct: t,
            baseline_latency_us: 0,
            treatment_latency_us: 0,
        }
    }

    #[test]
    fn mcnemar_reference_value() {
        let m = mcnemar_exact(11, 1);
        assert_eq!(m.exact, Some((13, 2048)));
        assert_eq!(format!("{:.3}", m.p_value), "0.006");
        assert_eq!(mcnemar_exact(5, 5).p_value, 1.0);
        assert_eq!(mcnemar_exact(1, 11).exact, m.exact);
        let none = mcnemar_exact(0, 0);
        assert!(none.no_discordant_pairs && none.p_value == 1.0);
    }

    #[test]
    fn mcnemar_large_n_falls_back() {
        let exact = mcnemar_exact(70, 57);
        let approx = mcnemar_exact(71, 57);
        assert!(exact.exact.is_some() && approx.exact.is_none());
        assert!((approx.p_value - exact.p_value).abs() < 0.2);
    }

    #[test]
    fn contingency_and_tca() {
        let o = vec![outcome(true, true), outcome(false, true), outcome(true, false), outcome(false, false)];
        assert_eq!(ContingencyTable::from_outcomes(&o), ContingencyTable { a: 1, b: 1, c: 1, d: 1 });
        assert_eq!(tca(&o, Arm::Treatment).unwrap(), 0.5);
        assert_eq!(tca(&[], Arm::Baseline), Err(StatsError::EmptyInput));
    }

    #[test]
    fn bootstrap_degenerate_is_zero() {
        let o: Vec<_> = (0..20).map(|i| outcome(i % 3 == 0, i % 3 == 0)).collect();
        let ci = bootstrap_ci(&o, 500, 7, 0.95).unwrap();
        assert_eq!((ci.lo_pp, ci.hi_pp), (0.0, 0.0));
    }

    #[test]
    fn percentile_convention() {
        let v = [1, 2, 3, 4];
        assert_eq!(percentile_lower(&v, 0.5), 2);
        assert_eq!(percentile_lower(&v, 0.0), 1);
        assert_eq!(percentile_lower(&v, 1.0), 4);
        let s = latency_stats(&[1000, 3000, 2000, 4000]);
        assert_eq!(s.median_ms, 2.0);
        assert_eq!(s.mean_ms, 2.5);
    }

    #[test]
    fn paired_t_errors_and_sign() {
        assert_eq!(paired_t(&[1.0], &[2.0]), Err(StatsError::TooFewPairs));
        assert_eq!(paired_t(&[1.0, 2.0], &[2.0, 3.0]), Err(StatsError::ZeroVariance));
        let r = paired_t(&[1.0, 2.0, 3.1], &[2.0, 3.0, 4.0]).unwrap();
        assert!(r.t < 0.0 && r.p_value < 0.01);
    }
}
