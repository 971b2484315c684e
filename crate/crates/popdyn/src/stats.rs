//! Small statistics toolkit for Monte-Carlo oracles.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sample mean, standard deviation and standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub stderr: f64,
}

impl Summary {
    #[must_use]
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { n, mean: f64::NAN, sd: f64::NAN, stderr: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let sd = var.sqrt();
        Self { n, mean, sd, stderr: sd / (n as f64).sqrt() }
    }

    #[must_use]
    pub fn variance(&self) -> f64 {
        self.sd * self.sd
    }

    /// Standard error of the sample variance (normal-free, via fourth moment).
    #[must_use]
    pub fn variance_stderr(xs: &[f64]) -> f64 {
        let s = Self::of(xs);
        let n = xs.len() as f64;
        let m4 = xs.iter().map(|x| (x - s.mean).powi(4)).sum::<f64>() / n;
        ((m4 - s.variance().powi(2)) / n).max(0.0).sqrt()
    }

    /// `|mean - target| <= k * stderr`.
    #[must_use]
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}

/// Frequency and binomial standard error of `hits` among `n`.
#[must_use]
pub fn binomial(hits: usize, n: usize) -> Summary {
    let p = hits as f64 / n as f64;
    let sd = (p * (1.0 - p)).sqrt();
    Summary { n, mean: p, sd, stderr: sd / (n as f64).sqrt() }
}

/// Binomial standard error evaluated at a target probability.
#[must_use]
pub fn binomial_stderr_at(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

#[must_use]
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lam = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    KsResult { statistic: d, p_value: kolmogorov_q(lam) }
}

/// Kolmogorov survival function `Q(λ) = 2 Σ (-1)^{j-1} e^{-2 j² λ²}`.
#[must_use]
pub fn kolmogorov_q(lam: f64) -> f64 {
    if lam < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=200 {
        let term = sign * (-2.0 * (j * j) as f64 * lam * lam).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Chi-square statistic, degrees of freedom and p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn chi_p(stat: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64).map(|c| 1.0 - c.cdf(stat)).unwrap_or(f64::NAN)
}

/// Goodness of fit of observed counts to expected probabilities.
/// Cells with expected count below 5 are pooled into their neighbour.
#[must_use]
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> ChiSquareResult {
    let n: u64 = observed.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&ob, &p) in observed.iter().zip(probs) {
        o += ob as f64;
        e += p * n as f64;
        if e >= 5.0 {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => cells.push((o, e)),
        }
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = cells.len().saturating_sub(1);
    ChiSquareResult { statistic: stat, dof, p_value: chi_p(stat, dof) }
}

/// Homogeneity test of two histograms on the same bins; sparse bins are pooled.
#[must_use]
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> ChiSquareResult {
    let na: f64 = a.iter().sum::<u64>() as f64;
    let nb: f64 = b.iter().sum::<u64>() as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut ca, mut cb) = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        ca += x as f64;
        cb += y as f64;
        if ca + cb >= 10.0 {
            cells.push((ca, cb));
            ca = 0.0;
            cb = 0.0;
        }
    }
    if ca + cb > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += ca;
                last.1 += cb;
            }
            None => cells.push((ca, cb)),
        }
    }
    let n = na + nb;
    let mut stat = 0.0;
    for (x, y) in &cells {
        let tot = x + y;
        let ea = tot * na / n;
        let eb = tot * nb / n;
        if ea > 0.0 {
            stat += (x - ea).powi(2) / ea;
        }
        if eb > 0.0 {
            stat += (y - eb).powi(2) / eb;
        }
    }
    let dof = cells.len().saturating_sub(1);
    ChiSquareResult { statistic: stat, dof, p_value: chi_p(stat, dof) }
}

/// Ordinary (optionally weighted) least squares fit `y = a + b x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
}

#[must_use]
pub fn linear_fit(x: &[f64], y: &[f64], w: Option<&[f64]>) -> LinearFit {
    let n = x.len();
    let ones = vec![1.0; n];
    let w = w.unwrap_or(&ones);
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * dy;
        syy += w[i] * dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = (0..n).map(|i| w[i] * (y[i] - intercept - slope * x[i]).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let dof = (n as f64 - 2.0).max(1.0);
    let slope_stderr = (sse / dof / sxx).sqrt();
    LinearFit { intercept, slope, slope_stderr, r_squared: r2 }
}

/// Histogram of `xs` on `bins` equal cells over `[lo, hi)`; values outside go to the edge cells.
#[must_use]
pub fn histogram(xs: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<u64> {
    let mut h = vec![0u64; bins];
    let w = (hi - lo) / bins as f64;
    for &x in xs {
        let k = ((x - lo) / w).floor();
        let k = if k < 0.0 { 0 } else { (k as usize).min(bins - 1) };
        h[k] += 1;
    }
    h
}
