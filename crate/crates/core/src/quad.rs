//! Gauss–Legendre rules and small numerical helpers.

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            if n == 1 {
                dp = 1.0;
            }
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let (c, s) = ((a + b) / 2.0, (b - a) / 2.0);
    (x.iter().map(|t| c + s * t).collect(), w.iter().map(|v| v * s).collect())
}

/// Least-squares slope of `log y` against `log x` with its 95% interval
/// half-width (Student t). Needs at least two points.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

/// Slope and 95% half-width of an ordinary least-squares line fit.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    if x.len() < 3 {
        return (slope, f64::NAN);
    }
    let resid: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    let se = (resid / (n - 2.0) / sxx).sqrt();
    (slope, student_t95(x.len() - 2) * se)
}

fn student_t95(dof: usize) -> f64 {
    const T: [f64; 10] = [12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228];
    if dof == 0 {
        f64::INFINITY
    } else if dof <= 10 {
        T[dof - 1]
    } else {
        1.96 + 2.4 / dof as f64
    }
}

/// Smooth step: 0 for `t <= 0`, 1 for `t >= 1`, C-infinity in between.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

/// Derivative of [`smooth_step`].
pub fn smooth_step_derivative(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        let da = a / (t * t);
        let db = -b / ((1.0 - t) * (1.0 - t));
        (da * b - a * db) / ((a + b) * (a + b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_polynomials_exactly() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for p in 0..(2 * n) {
                let num: f64 = x.iter().zip(&w).map(|(a, b)| a.powi(p as i32) * b).sum();
                let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p + 1) as f64 };
                assert!((num - exact).abs() < 1e-13, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.75)).collect();
        let (s, ci) = loglog_slope(&x, &y);
        assert!((s + 0.75).abs() < 1e-12);
        assert!(ci.abs() < 1e-10);
    }

    #[test]
    fn smooth_step_derivative_matches_difference() {
        for &t in &[0.2, 0.5, 0.7] {
            let fd = (smooth_step(t + 1e-6) - smooth_step(t - 1e-6)) / 2e-6;
            assert!((fd - smooth_step_derivative(t)).abs() < 1e-6);
        }
    }
}
