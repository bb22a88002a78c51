//! Small descriptive-statistics helpers shared by the estimators and reports.

/// Mean computed as an offset from the first element, so a constant sample
/// returns that constant exactly.
pub fn mean(xs: &[f64]) -> f64 {
    let Some(&first) = xs.first() else {
        return f64::NAN;
    };
    first + xs.iter().map(|x| x - first).sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator). Zero for fewer than two values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let first = xs[0];
    let m = xs.iter().map(|x| x - first).sum::<f64>() / xs.len() as f64;
    let ss: f64 = xs.iter().map(|x| (x - first - m).powi(2)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Quantile of an ascending-sorted slice using linear interpolation between
/// order statistics (`h = (n - 1) q`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    assert!((0.0..=1.0).contains(&q), "quantile level out of range");
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    if lo == hi || frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Equal-tailed 95% interval: (2.5%, 97.5%) percentiles.
pub fn central_interval(xs: &[f64]) -> (f64, f64) {
    let s = sorted(xs);
    (quantile_sorted(&s, 0.025), quantile_sorted(&s, 0.975))
}
