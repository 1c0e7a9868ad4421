//! Trapezoid rules and linear interpolation shared across the crate.

/// Trapezoid weights for `count` points at uniform spacing `step`.
pub fn trapezoid_weights(count: usize, step: f64) -> Vec<f64> {
    let mut w = vec![step; count];
    if count > 0 {
        w[0] *= 0.5;
        w[count - 1] *= 0.5;
    }
    if count == 1 {
        w[0] = 0.0;
    }
    w
}

/// Trapezoid integral of uniformly spaced samples.
pub fn trapezoid_uniform(values: &[f64], step: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => step * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1])),
    }
}

/// Trapezoid integral over arbitrary sorted abscissas.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    debug_assert_eq!(times.len(), values.len());
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
        .sum()
}

/// Linear interpolation on a uniform grid starting at zero. Points beyond the
/// grid end evaluate to zero; negative points evaluate to the first sample.
pub fn interp_uniform(values: &[f64], step: f64, t: f64) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    let end = step * (n - 1) as f64;
    if t > end * (1.0 + 1e-12) {
        return 0.0;
    }
    if t <= 0.0 {
        return values[0];
    }
    let pos = t / step;
    let i = (pos.floor() as usize).min(n - 1);
    if i + 1 >= n {
        return values[n - 1];
    }
    let frac = pos - i as f64;
    values[i] * (1.0 - frac) + values[i + 1] * frac
}

/// Linear interpolation over sorted abscissas, zero outside the support.
pub fn interp_sorted(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if xs.is_empty() || x < xs[0] || x > xs[xs.len() - 1] {
        return 0.0;
    }
    let j = xs.partition_point(|&v| v < x);
    if j == 0 {
        return ys[0];
    }
    let (x0, x1) = (xs[j - 1], xs[j]);
    if x1 == x0 {
        return ys[j];
    }
    let f = (x - x0) / (x1 - x0);
    ys[j - 1] * (1.0 - f) + ys[j] * f
}
