//! Ordinary least-squares line fits for slope experiments.

/// Result of fitting `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination. Equals 1 when the fit is exact; defined
    /// as 1 when the data are constant and exactly reproduced.
    pub r_squared: f64,
}

/// Least-squares fit of a straight line through `(xs[i], ys[i])`.
///
/// Panics if the slices differ in length or hold fewer than two points:
/// slope experiments always control their own sweep, so a short input is a
/// programming error rather than a runtime condition.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len(), "fit_line: mismatched lengths");
    assert!(xs.len() >= 2, "fit_line: need at least two points");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    assert!(sxx > 0.0, "fit_line: all abscissae equal");
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    // Residual sum of squares, guarded so that an exact fit of constant data
    // reports R² = 1 instead of 0/0.
    let ss_res = syy - slope * sxy;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        1.0 - (ss_res / syy).max(0.0)
    };
    LineFit {
        slope,
        intercept,
        r_squared,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_recovered() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        let fit = fit_line(&xs, &ys);
        assert!((fit.slope + 0.5).abs() < 1e-14);
        assert!((fit.intercept - 3.0).abs() < 1e-14);
        assert!((fit.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn noisy_line_r_squared_below_one() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [0.1, 0.9, 2.2, 2.8];
        let fit = fit_line(&xs, &ys);
        assert!(fit.slope > 0.8 && fit.slope < 1.2);
        assert!(fit.r_squared > 0.9 && fit.r_squared < 1.0);
    }

    #[test]
    fn constant_data_reports_unit_r_squared() {
        let xs = [1.0, 2.0, 3.0];
        let ys = [7.0, 7.0, 7.0];
        let fit = fit_line(&xs, &ys);
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.r_squared, 1.0);
    }
}
