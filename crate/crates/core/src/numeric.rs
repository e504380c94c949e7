//! Small numerical helpers shared by the analysis routines.

/// Trapezoidal integral of samples `y` on a uniform grid with spacing `h`.
pub fn trapezoid(y: &[f64], h: f64) -> f64 {
    match y.len() {
        0 | 1 => 0.0,
        n => h * (y.iter().sum::<f64>() - 0.5 * (y[0] + y[n - 1])),
    }
}

/// Trapezoidal integral on an arbitrary grid.
pub fn trapezoid_xy(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Ordinary least-squares line `y = intercept + slope * x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

/// Fits `y = a * exp(-rate * x)` by a line through `ln y`. Non-positive
/// samples are skipped. Returns `(a, rate)`.
pub fn exponential_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let (xs, ls): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(_, v)| **v > 0.0 && v.is_finite())
        .map(|(a, b)| (*a, b.ln()))
        .unzip();
    let (intercept, slope) = linear_fit(&xs, &ls)?;
    Some((intercept.exp(), -slope))
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Golden-section minimisation of a unimodal function on `[a, b]`.
/// Stops when the bracket is narrower than `tol` (absolute). Returns the
/// abscissa, the function value and the iteration count.
pub fn golden_section<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iter: usize,
) -> (f64, f64, usize) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iter = 0;
    while (b - a).abs() > tol && iter < max_iter {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        iter += 1;
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    (x, fx, iter)
}

/// Abscissa where the segment from `(x0, y0)` to `(x1, y1)` reaches `level`.
pub fn crossing(x0: f64, y0: f64, x1: f64, y1: f64, level: f64) -> f64 {
    if y1 == y0 {
        return 0.5 * (x0 + x1);
    }
    x0 + (level - y0) * (x1 - x0) / (y1 - y0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn trapezoid_is_exact_for_lines() {
        let y: Vec<f64> = (0..11).map(|k| 2.0 * k as f64 * 0.1 + 1.0).collect();
        assert_relative_eq!(trapezoid(&y, 0.1), 2.0, epsilon = 1e-12);
        let x: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        assert_relative_eq!(trapezoid_xy(&x, &y), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn exponential_fit_recovers_rate() {
        let x: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let y: Vec<f64> = x.iter().map(|t| 3.0 * (-0.25 * t).exp()).collect();
        let (a, r) = exponential_fit(&x, &y).unwrap();
        assert_relative_eq!(a, 3.0, max_relative = 1e-12);
        assert_relative_eq!(r, 0.25, max_relative = 1e-12);
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, fx, _) = golden_section(|x| (x - 1.3).powi(2) + 2.0, -5.0, 5.0, 1e-10, 200);
        assert_relative_eq!(x, 1.3, epsilon = 1e-6);
        assert_relative_eq!(fx, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }
}
