//! Small Monte Carlo statistics: running moments, two-sample tests and a
//! heteroskedasticity-robust regression.

/// Welford running mean and variance.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn new() -> Welford {
        Welford::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan's parallel combination.
    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * self.n as f64 * other.n as f64 / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn se(&self) -> f64 {
        if self.n == 0 {
            return f64::INFINITY;
        }
        (self.variance() / self.n as f64).sqrt()
    }
}

impl FromIterator<f64> for Welford {
    fn from_iter<I: IntoIterator<Item = f64>>(it: I) -> Welford {
        let mut w = Welford::new();
        it.into_iter().for_each(|x| w.push(x));
        w
    }
}

/// `(mean_a - mean_b) / sqrt(se_a^2 + se_b^2)`; `None` when both samples are
/// degenerate.
pub fn two_sample_z(a: &Welford, b: &Welford) -> Option<f64> {
    let se = (a.se().powi(2) + b.se().powi(2)).sqrt();
    let diff = a.mean() - b.mean();
    if se > 0.0 && se.is_finite() {
        Some(diff / se)
    } else if diff == 0.0 {
        None
    } else {
        Some(diff.signum() * f64::INFINITY)
    }
}

/// `|mean - target| / se`, or `None` for a degenerate sample equal to the target.
pub fn z_against(w: &Welford, target: f64) -> Option<f64> {
    let se = w.se();
    let diff = w.mean() - target;
    if se > 0.0 && se.is_finite() {
        Some(diff / se)
    } else if diff.abs() < 1e-15 {
        None
    } else {
        Some(diff.signum() * f64::INFINITY)
    }
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`, with ties
/// handled exactly.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::NAN;
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (na, nb) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic p-value of a two-sample KS statistic.
pub fn ks_pvalue(d: f64, na: usize, nb: usize) -> f64 {
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let s = ne.sqrt();
    let lambda = (s + 0.12 + 0.11 / s) * d;
    kolmogorov_q(lambda)
}

/// `Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Ordinary least squares of `y` on `[1, x_1, .., x_p]` with HC0 standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct Regression {
    pub coef: Vec<f64>,
    pub se: Vec<f64>,
}

impl Regression {
    /// `coef / se` per coefficient.
    pub fn z(&self) -> Vec<f64> {
        self.coef.iter().zip(&self.se).map(|(c, s)| if *s > 0.0 { c / s } else if *c == 0.0 { 0.0 } else { f64::INFINITY }).collect()
    }
}

fn invert(mut a: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let k = a.len();
    let mut inv: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| (i == j) as u8 as f64).collect()).collect();
    for c in 0..k {
        let p = (c..k).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, p);
        inv.swap(c, p);
        let piv = a[c][c];
        for j in 0..k {
            a[c][j] /= piv;
            inv[c][j] /= piv;
        }
        for r in 0..k {
            if r != c {
                let f = a[r][c];
                if f != 0.0 {
                    for j in 0..k {
                        a[r][j] -= f * a[c][j];
                        inv[r][j] -= f * inv[c][j];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Returns `None` when the design is singular.
pub fn ols_hc0(x: &[Vec<f64>], y: &[f64]) -> Option<Regression> {
    let n = y.len();
    let p = x.first().map_or(0, |r| r.len()) + 1;
    let row = |i: usize| std::iter::once(1.0).chain(x[i].iter().copied());
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for i in 0..n {
        let r: Vec<f64> = row(i).collect();
        for a in 0..p {
            xty[a] += r[a] * y[i];
            for b in 0..p {
                xtx[a][b] += r[a] * r[b];
            }
        }
    }
    let inv = invert(xtx)?;
    let coef: Vec<f64> = (0..p).map(|a| (0..p).map(|b| inv[a][b] * xty[b]).sum()).collect();
    let mut meat = vec![vec![0.0; p]; p];
    for i in 0..n {
        let r: Vec<f64> = row(i).collect();
        let e = y[i] - r.iter().zip(&coef).map(|(u, c)| u * c).sum::<f64>();
        for a in 0..p {
            for b in 0..p {
                meat[a][b] += e * e * r[a] * r[b];
            }
        }
    }
    let mut se = vec![0.0; p];
    for a in 0..p {
        let mut v = 0.0;
        for b in 0..p {
            for c in 0..p {
                v += inv[a][b] * meat[b][c] * inv[c][a];
            }
        }
        se[a] = v.max(0.0).sqrt();
    }
    Some(Regression { coef, se })
}
