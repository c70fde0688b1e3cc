//! Small statistics kit: Tukey box statistics, Spearman correlation and a
//! percentile bootstrap for means.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxStats {
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
    pub excluded_undefined: usize,
}

fn median_sorted(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

impl BoxStats {
    /// Box statistics with Tukey hinges. For odd `n` both halves include the
    /// median. Whiskers reach the most extreme points within 1.5 IQR of the
    /// hinges; everything beyond is an outlier. With no defined values every
    /// numeric field is NaN.
    pub fn from_scores(scores: &[Option<f64>]) -> Self {
        let mut xs: Vec<f64> = scores.iter().flatten().copied().collect();
        let excluded_undefined = scores.len() - xs.len();
        if xs.is_empty() {
            return Self {
                n: 0,
                mean: f64::NAN,
                min: f64::NAN,
                q1: f64::NAN,
                median: f64::NAN,
                q3: f64::NAN,
                max: f64::NAN,
                whisker_low: f64::NAN,
                whisker_high: f64::NAN,
                outliers: Vec::new(),
                excluded_undefined,
            };
        }
        xs.sort_by(f64::total_cmp);
        let n = xs.len();
        let half = n.div_ceil(2);
        let q1 = median_sorted(&xs[..half]);
        let q3 = median_sorted(&xs[n - half..]);
        let iqr = q3 - q1;
        let lo_fence = q1 - 1.5 * iqr;
        let hi_fence = q3 + 1.5 * iqr;
        let inside: Vec<f64> = xs.iter().copied().filter(|&x| x >= lo_fence && x <= hi_fence).collect();
        let outliers = xs.iter().copied().filter(|&x| x < lo_fence || x > hi_fence).collect();
        Self {
            n,
            mean: xs.iter().sum::<f64>() / n as f64,
            min: xs[0],
            q1,
            median: median_sorted(&xs),
            q3,
            max: xs[n - 1],
            whisker_low: inside.first().copied().unwrap_or(q1),
            whisker_high: inside.last().copied().unwrap_or(q3),
            outliers,
            excluded_undefined,
        }
    }
}

/// Average ranks (1-based), ties share the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation; `None` when either series is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "series lengths differ");
    if a.len() < 2 {
        return None;
    }
    pearson(&average_ranks(a), &average_ranks(b))
}

/// Percentile bootstrap interval for the mean.
pub fn bootstrap_mean_ci(values: &[f64], resamples: usize, confidence: f64, seed: u64) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = values.len();
    let mut means: Vec<f64> = (0..resamples.max(1))
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - confidence) / 2.0;
    let at = |q: f64| {
        let pos = q * (means.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        means[lo] + (means[hi] - means[lo]) * (pos - lo as f64)
    };
    (at(alpha), at(1.0 - alpha))
}
