//! Small statistical helpers for validating samplers against exact tables.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Upper-tail p-value of the chi-square statistic for equal expected counts.
pub fn chi_square_uniform_p(counts: &[u64], expected: f64) -> f64 {
    assert!(counts.len() >= 2 && expected > 0.0);
    let stat: f64 =
        counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    chi_square_p(stat, counts.len() as f64 - 1.0)
}

/// Goodness of fit of observed counts against per-cell expected counts.
/// Cells must be aligned; expected counts should not be tiny.
pub fn chi_square_gof_p(observed: &[u64], expected: &[f64]) -> f64 {
    assert_eq!(observed.len(), expected.len());
    assert!(observed.len() >= 2);
    let mut stat = 0.0;
    for (&o, &e) in observed.iter().zip(expected) {
        assert!(e > 0.0, "expected count must be positive");
        stat += (o as f64 - e).powi(2) / e;
    }
    chi_square_p(stat, observed.len() as f64 - 1.0)
}

fn chi_square_p(stat: f64, df: f64) -> f64 {
    let dist = ChiSquared::new(df).expect("positive degrees of freedom");
    1.0 - dist.cdf(stat)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit_has_high_p() {
        let counts = vec![1000u64; 10];
        assert!(chi_square_uniform_p(&counts, 1000.0) > 0.999);
    }

    #[test]
    fn gross_misfit_has_low_p() {
        let counts = vec![100, 100, 100, 700];
        assert!(chi_square_uniform_p(&counts, 250.0) < 1e-6);
    }

    #[test]
    fn gof_matches_uniform_special_case() {
        let counts = vec![480u64, 520u64];
        let p1 = chi_square_uniform_p(&counts, 500.0);
        let p2 = chi_square_gof_p(&counts, &[500.0, 500.0]);
        assert!((p1 - p2).abs() < 1e-12);
    }
}
