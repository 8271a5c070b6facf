//! Small statistics used to read sweep results.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    LinearFit {
        slope,
        intercept,
        r_squared,
    }
}

/// Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Piecewise-linear interpolation of `curve` (sorted by x) at `x`; `None`
/// outside its x-range.
fn interpolate(curve: &[(f64, f64)], x: f64) -> Option<f64> {
    let first = curve.first()?;
    let last = curve.last()?;
    if x < first.0 || x > last.0 {
        return None;
    }
    for w in curve.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x >= x0 && x <= x1 {
            if x1 == x0 {
                return Some(y0.max(y1));
            }
            return Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0));
        }
    }
    Some(last.1)
}

fn sorted_curve(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    sorted.dedup_by(|a, b| a.0 == b.0);
    sorted
}

/// Share of `candidate` points `(unfairness, reward)` whose reward is at least
/// the baseline's reward interpolated at the same unfairness. Candidate points
/// outside the baseline's unfairness range are not comparable and are
/// skipped. Returns `(dominated, comparable)`.
pub fn dominance_fraction(candidate: &[(f64, f64)], baseline: &[(f64, f64)]) -> (usize, usize) {
    let curve = sorted_curve(baseline);
    let mut wins = 0;
    let mut comparable = 0;
    for &(u, r) in candidate {
        if let Some(b) = interpolate(&curve, u) {
            comparable += 1;
            if r >= b {
                wins += 1;
            }
        }
    }
    (wins, comparable)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn perfect_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let fit = linear_fit(&xs, &ys);
        assert_abs_diff_eq!(fit.slope, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pearson(&xs, &ys), 1.0, epsilon = 1e-12);
        let neg: Vec<f64> = ys.iter().map(|y| -y).collect();
        assert_abs_diff_eq!(pearson(&xs, &neg), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn r_squared_matches_hand_value() {
        // y = (1, 3, 2, 4): sxy = 4, sxx = 5, syy = 5
        let fit = linear_fit(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]);
        assert_abs_diff_eq!(fit.r_squared, 16.0 / 25.0, epsilon = 1e-12);
    }

    #[test]
    fn dominance_interpolates_baseline() {
        let baseline = [(0.0, 10.0), (10.0, 20.0)];
        let candidate = [(5.0, 15.5), (5.0, 14.0), (2.0, 12.0), (20.0, 100.0)];
        assert_eq!(dominance_fraction(&candidate, &baseline), (2, 3));
    }
}
