use statrs::distribution::{Beta, ContinuousCDF};

/// Two-sided Clopper-Pearson upper confidence limit for a binomial rate
/// after `x` successes in `n` trials.
pub fn clopper_pearson_upper(x: u128, n: u128, confidence: f64) -> f64 {
    if n == 0 || x >= n {
        return 1.0;
    }
    let half_alpha = (1.0 - confidence) / 2.0;
    let (x, n) = (x as f64, n as f64);
    if x == 0.0 {
        return 1.0 - half_alpha.powf(1.0 / n);
    }
    Beta::new(x + 1.0, n - x).expect("positive shape parameters").inverse_cdf(1.0 - half_alpha)
}
