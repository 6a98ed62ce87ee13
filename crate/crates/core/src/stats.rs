//! Summary statistics and the significance tests used to judge experiment
//! traces.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Running mean / variance (Welford).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Running {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Running {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample standard deviation (n - 1 denominator); 0 for fewer than two points.
    pub fn std(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).sqrt()
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Ordinary least squares fit `y = intercept + slope * x` with a two-sided
/// t-test on the slope.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_std_err: f64,
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
}

impl LinearFit {
    /// Slope differs from zero at the given confidence (e.g. 0.95).
    pub fn slope_significant(&self, confidence: f64) -> bool {
        self.p_value < 1.0 - confidence
    }
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    if xs.len() != ys.len() {
        return None;
    }
    let groups: Vec<Group> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| Group {
            x,
            n: 1,
            mean: y,
            std: 0.0,
        })
        .collect();
    linear_fit_grouped(&groups)
}

/// Repeated observations at one x, given by their summary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Group {
    pub x: f64,
    pub n: u64,
    pub mean: f64,
    pub std: f64,
}

/// OLS over every individual observation, computed from per-x summaries.
pub fn linear_fit_grouped(groups: &[Group]) -> Option<LinearFit> {
    let n: f64 = groups.iter().map(|g| g.n as f64).sum();
    if n < 3.0 {
        return None;
    }
    let x_bar = groups.iter().map(|g| g.n as f64 * g.x).sum::<f64>() / n;
    let y_bar = groups.iter().map(|g| g.n as f64 * g.mean).sum::<f64>() / n;
    let sxx: f64 = groups
        .iter()
        .map(|g| g.n as f64 * (g.x - x_bar).powi(2))
        .sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = groups
        .iter()
        .map(|g| g.n as f64 * (g.x - x_bar) * (g.mean - y_bar))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;

    let within: f64 = groups
        .iter()
        .map(|g| (g.n.saturating_sub(1)) as f64 * g.std * g.std)
        .sum();
    let sst = within
        + groups
            .iter()
            .map(|g| g.n as f64 * (g.mean - y_bar).powi(2))
            .sum::<f64>();
    let sse = within
        + groups
            .iter()
            .map(|g| g.n as f64 * (g.mean - intercept - slope * g.x).powi(2))
            .sum::<f64>();
    let df = n - 2.0;
    let slope_std_err = (sse / df / sxx).sqrt();
    let r_squared = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
    let (t, p) = if slope_std_err > 0.0 {
        let t = slope / slope_std_err;
        (t, two_sided_p(t, df))
    } else if slope == 0.0 {
        (0.0, 1.0)
    } else {
        (f64::INFINITY.copysign(slope), 0.0)
    };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
        slope_std_err,
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: p,
    })
}

fn two_sided_p(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    2.0 * (1.0 - dist.cdf(t.abs()))
}

/// Welch's t statistic for `mean_a - mean_b` and its one-sided p-value for
/// the alternative `mean_a > mean_b`.
pub fn welch_greater(a: (f64, f64, u64), b: (f64, f64, u64)) -> (f64, f64) {
    let (ma, sa, na) = (a.0, a.1, a.2 as f64);
    let (mb, sb, nb) = (b.0, b.1, b.2 as f64);
    let va = sa * sa / na;
    let vb = sb * sb / nb;
    let se = (va + vb).sqrt();
    if se == 0.0 {
        let p = if ma > mb { 0.0 } else { 1.0 };
        return ((ma - mb).signum() * f64::INFINITY, p);
    }
    let t = (ma - mb) / se;
    let df = (va + vb).powi(2) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (t, 1.0 - dist.cdf(t))
}

pub fn geometric_mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    (xs.iter().map(|x| x.ln()).sum::<f64>() / xs.len() as f64).exp()
}
