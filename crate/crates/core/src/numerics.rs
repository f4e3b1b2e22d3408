//! Small numeric helpers: pairwise summation, trapezoid quadrature and
//! least-squares line fits. Pairwise summation keeps rounding drift at
//! O(log n) so long moment and shift sums stay reproducible and accurate.

/// Pairwise (cascade) sum of a slice. Deterministic for a fixed input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BASE: usize = 32;
    if xs.len() <= BASE {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Pointwise pairwise sum of equally long vectors, reducing along the list
/// axis: `out[k] = sum_i curves[i][k]` with cascade grouping over `i`.
pub fn pairwise_sum_curves(curves: &[Vec<f64>]) -> Vec<f64> {
    match curves.len() {
        0 => Vec::new(),
        1 => curves[0].clone(),
        _ => {
            let mid = curves.len() / 2;
            let a = pairwise_sum_curves(&curves[..mid]);
            let b = pairwise_sum_curves(&curves[mid..]);
            a.iter().zip(b.iter()).map(|(x, y)| x + y).collect()
        }
    }
}

/// Trapezoid quadrature of samples `ys` on the (not necessarily uniform)
/// grid `xs`, using a pairwise reduction of the panel contributions.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    if xs.len() < 2 {
        return 0.0;
    }
    let panels: Vec<f64> = xs
        .windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .collect();
    pairwise_sum(&panels)
}

/// Least-squares line fit `y ~ slope * x + intercept`.
/// Returns `(slope, intercept, r_squared)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mx = pairwise_sum(xs) / n;
    let my = pairwise_sum(ys) / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys.iter()) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return (f64::NAN, my, f64::NAN);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    (slope, intercept, r2)
}
