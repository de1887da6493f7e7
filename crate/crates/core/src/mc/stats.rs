//! Goodness-of-fit statistics and small sample summaries.

use crate::error::{Error, Result};

/// One-sample Kolmogorov-Smirnov sup-distance between the empirical CDF of
/// `samples` and the reference `cdf`.
///
/// The lower comparison queries the reference just below each sample value,
/// so reference laws with atoms at sample points are handled (constant
/// samples against their own point mass give distance 0).
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty);
    }
    let mut xs = samples.to_vec();
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).expect("no NaN samples"));
    let n = xs.len() as f64;
    let mut sup = 0.0f64;
    let mut below = 0usize; // samples strictly below the current group
    let mut i = 0usize;
    while i < xs.len() {
        let v = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == v {
            j += 1;
        }
        let f = cdf(v);
        let f_left = cdf(v - 1e-9 * (1.0 + v.abs()));
        sup = sup.max((j as f64 / n - f).abs());
        sup = sup.max((f_left - below as f64 / n).abs());
        below = j;
        i = j;
    }
    Ok(sup)
}

/// Two-sample Kolmogorov-Smirnov sup-distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty);
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_unstable_by(|u, v| u.partial_cmp(v).expect("no NaN samples"));
    ys.sort_unstable_by(|u, v| u.partial_cmp(v).expect("no NaN samples"));
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup = 0.0f64;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(sup)
}

/// Empirical Laplace transform `mean of e^{-tau * sample}`.
pub fn empirical_laplace(samples: &[f64], tau: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty);
    }
    Ok(samples.iter().map(|&x| (-tau * x).exp()).sum::<f64>() / samples.len() as f64)
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::Empty);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok((mean, (var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use rand::Rng;

    #[test]
    fn ks_trivial_cases() {
        // Constant samples against their own point mass.
        let samples = vec![2.5; 100];
        let d = ks_statistic(&samples, |x| if x < 2.5 { 0.0 } else { 1.0 }).unwrap();
        assert_eq!(d, 0.0);
        assert!(ks_statistic(&[], |_| 0.0).is_err());
        assert_eq!(empirical_laplace(&[1.0, 2.0, 3.0], 0.0).unwrap(), 1.0);
    }

    #[test]
    fn ks_calibration_on_uniforms() {
        // Samples drawn from the reference law: D <= 1.63/sqrt(M) at the 99%
        // level (asymptotic), checked over independent replicas.
        let m = 4000;
        let mut failures = 0;
        for rep in 0..20u64 {
            let mut rng = substream(1234, rep);
            let xs: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
            let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
            if d > 1.63 / (m as f64).sqrt() {
                failures += 1;
            }
        }
        assert!(failures <= 2, "{failures} of 20 replicas exceeded the 99% bound");
    }

    #[test]
    fn two_sample_ks_agrees_with_definition() {
        let a = vec![0.1, 0.4, 0.9];
        let b = vec![0.2, 0.5];
        // Empirical CDFs step at the pooled points; the sup gap is 1/3 ... check.
        let d = ks_two_sample(&a, &b).unwrap();
        assert!((d - 1.0 / 3.0).abs() < 1e-12, "d = {d}");
        let mut rng = substream(5, 0);
        let xs: Vec<f64> = (0..5000).map(|_| rng.gen::<f64>()).collect();
        let ys: Vec<f64> = (0..5000).map(|_| rng.gen::<f64>()).collect();
        let d = ks_two_sample(&xs, &ys).unwrap();
        assert!(d < 0.05, "same-law two-sample KS {d}");
    }
}
