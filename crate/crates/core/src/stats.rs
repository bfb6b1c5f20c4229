//! Small statistics helpers for reports.

use crate::math;

/// Least-squares line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<Fit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(Fit { slope, intercept: my - slope * mx, r2 })
}

/// Fit of `ln y` against `ln x`; non-positive entries are rejected.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Option<Fit> {
    if x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return None;
    }
    let lx: alloc::vec::Vec<f64> = x.iter().map(|&v| math::ln(v)).collect();
    let ly: alloc::vec::Vec<f64> = y.iter().map(|&v| math::ln(v)).collect();
    linear_fit(&lx, &ly)
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, math::sqrt(var / n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let x = [10.0, 100.0, 1000.0];
        let y: alloc::vec::Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        let f = loglog_fit(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }
}
