//! Small statistics toolkit: mergeable moments, normal CDF, KS distances.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

/// Count, mean and centered second moment; merging is order-insensitive up
/// to rounding (Chan et al. pairwise update).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(self, o: Moments) -> Moments {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        let mean = self.mean + d * o.n as f64 / n as f64;
        let m2 = self.m2 + o.m2 + d * d * (self.n as f64 * o.n as f64) / n as f64;
        Moments { n, mean, m2 }
    }

    pub fn from_slice(xs: &[f64]) -> Moments {
        let mut m = Moments::default();
        xs.iter().for_each(|&x| m.push(x));
        m
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            f64::INFINITY
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// `(estimate - exact) / stderr`; zero spread gives 0 on exact agreement
/// (to `1e-12` relative) and `±inf` otherwise.
pub fn z_score(estimate: f64, stderr: f64, exact: f64) -> f64 {
    let d = estimate - exact;
    if stderr > 0.0 {
        d / stderr
    } else if d.abs() <= 1e-12 * exact.abs().max(1.0) {
        0.0
    } else {
        d.signum() * f64::INFINITY
    }
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `sup_x |F_n(x) - Φ(x / σ)|` for the empirical CDF of `sample`.
pub fn ks_normal(sample: &[f64], sigma: f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in s.iter().enumerate() {
        let f = normal_cdf(x / sigma);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic 1% critical value of the two-sample KS statistic.
pub fn ks_critical_1pct(na: usize, nb: usize) -> f64 {
    let (na, nb) = (na as f64, nb as f64);
    1.628 * ((na + nb) / (na * nb)).sqrt()
}

/// KS distance between a sample and a discrete law given by its CDF.
pub fn ks_discrete<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < s.len() {
        let x = s[i];
        // left limit of both CDFs at x, then their values at x
        let below = i as f64 / n;
        while i < s.len() && s[i] == x {
            i += 1;
        }
        let at = i as f64 / n;
        let f = cdf(x);
        let f_left = cdf(x - x.abs().max(1.0) * 1e-12);
        d = d.max((at - f).abs()).max((below - f_left).abs());
    }
    d
}

pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let mx = Moments::from_slice(x);
    let my = Moments::from_slice(y);
    let cov: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mx.mean) * (b - my.mean))
        .sum::<f64>();
    let denom = (mx.m2 * my.m2).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        cov / denom
    }
}

/// Empirical `q`-quantile (lower order statistic).
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let k = ((q * s.len() as f64).ceil() as usize).clamp(1, s.len());
    s[k - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normal_cdf_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        // statrs' erfc is accurate to about 1e-11
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-10);
        assert!((normal_cdf(-3.0) - 0.0013498980316301).abs() < 1e-12);
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        // one point at 0: F_n jumps 0 -> 1 where Φ = 1/2
        assert!((ks_normal(&[0.0], 1.0) - 0.5).abs() < 1e-15);
        let d = ks_discrete(&[1.0, 1.0, 2.0, 2.0], |x| {
            if x < 1.0 {
                0.0
            } else if x < 2.0 {
                0.5
            } else {
                1.0
            }
        });
        assert!(d < 1e-15);
    }

    #[test]
    fn z_scores() {
        assert_eq!(z_score(3.0, 0.0, 3.0), 0.0);
        assert_eq!(z_score(3.5, 0.0, 3.0), f64::INFINITY);
        assert_eq!(z_score(4.0, 0.5, 3.0), 2.0);
    }

    proptest! {
        #[test]
        fn merge_matches_sequential(xs in prop::collection::vec(-1e3f64..1e3, 0..60), cut in 0usize..60) {
            let cut = cut.min(xs.len());
            let whole = Moments::from_slice(&xs);
            let merged = Moments::from_slice(&xs[..cut]).merge(Moments::from_slice(&xs[cut..]));
            prop_assert_eq!(whole.n, merged.n);
            prop_assert!((whole.mean - merged.mean).abs() < 1e-9);
            prop_assert!((whole.m2 - merged.m2).abs() < 1e-6 * whole.m2.max(1.0));
        }
    }
}
