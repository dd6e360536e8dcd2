//! Small numeric helpers shared across stages. Missing values are `NaN`.

pub fn is_missing(x: f64) -> bool {
    x.is_nan()
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the `n - 1` denominator.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    if is_constant(xs) {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

fn is_constant(xs: &[f64]) -> bool {
    xs.iter().all(|&x| x == xs[0])
}

/// Non-excess kurtosis `m4 / m2^2` (3 for a normal law). `None` for a constant series.
pub fn kurtosis(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 || is_constant(xs) {
        return None;
    }
    let m = mean(xs);
    let (mut m2, mut m4) = (0.0, 0.0);
    for x in xs {
        let d = (x - m) * (x - m);
        m2 += d;
        m4 += d * d;
    }
    let n = xs.len() as f64;
    m2 /= n;
    m4 /= n;
    if m2 <= 0.0 {
        None
    } else {
        Some(m4 / (m2 * m2))
    }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v: Vec<f64> = xs.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Values of `a` and `b` at positions where both are present.
pub fn complete_pairs(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut xa = Vec::with_capacity(a.len());
    let mut xb = Vec::with_capacity(a.len());
    for (&u, &v) in a.iter().zip(b) {
        if !u.is_nan() && !v.is_nan() {
            xa.push(u);
            xb.push(v);
        }
    }
    (xa, xb)
}

/// Pearson correlation over pairwise-complete observations.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (x, y) = complete_pairs(a, b);
    if x.len() < 2 {
        return f64::NAN;
    }
    let mx = mean(&x);
    let my = mean(&y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (u, v) in x.iter().zip(&y) {
        let (du, dv) = (u - mx, v - my);
        sxy += du * dv;
        sxx += du * du;
        syy += dv * dv;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return f64::NAN;
    }
    sxy / (sxx * syy).sqrt()
}

pub fn present(xs: &[f64]) -> Vec<f64> {
    xs.iter().copied().filter(|x| !x.is_nan()).collect()
}

/// Two-sided normal tail probability `P(|Z| >= |z|)`.
pub fn two_sided_normal_p(z: f64) -> f64 {
    statrs::function::erf::erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// Kolmogorov-Smirnov distance between the empirical law of `ps` and U(0, 1).
pub fn ks_uniform(ps: &[f64]) -> f64 {
    let mut v: Vec<f64> = present(ps);
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &p)| {
            let lo = p - i as f64 / n;
            let hi = (i + 1) as f64 / n - p;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}
