//! The round schedule of the peeling loop.
//!
//! With `x_t = (eps_t^2 / (6(k+1) ln n))^(z-1)` the recursions are
//! `eps_(t+1) = eps_t (1 + 7 z^3 x_t)` and `p_(t+1) = p_t (1 - x_t)`, and the
//! loop stops at the first `T` with `p_T <= eps^alpha p / 2`,
//! `alpha = 1 / (9 + 7 z^3)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Params;

/// Steps computed before a schedule is cut off as non-terminating.
pub const DEFAULT_MAX_STEPS: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeelSchedule {
    pub z: usize,
    pub n: usize,
    pub eps: f64,
    pub p: f64,
    pub alpha: f64,
    /// `eps^alpha p / 2`.
    pub threshold: f64,
    pub eps_t: Vec<f64>,
    pub p_t: Vec<f64>,
    /// `x_t` for `t < eps_t.len() - 1`, plus the value at the last index.
    pub x_t: Vec<f64>,
    /// First index with `p_T <= threshold`; `None` if the schedule was cut.
    pub t_stop: Option<usize>,
    /// The last step had `x >= 1`, so `p_T` was clamped to zero.
    pub saturated: bool,
    pub diagnostic: Option<String>,
}

impl PeelSchedule {
    /// Number of peeling rounds, `T` (0 if the schedule was cut).
    pub fn rounds(&self) -> usize {
        self.t_stop.unwrap_or(0)
    }
}

pub fn alpha(z: usize) -> f64 {
    1.0 / (9.0 + 7.0 * (z as f64).powi(3))
}

pub fn x_of(eps_t: f64, k: usize, z: usize, n: usize) -> f64 {
    (eps_t * eps_t / (6.0 * (k as f64 + 1.0) * (n as f64).ln())).powi(z as i32 - 1)
}

pub fn compute_schedule(params: &Params, p: f64, eps: f64) -> Result<PeelSchedule> {
    compute_schedule_with(params, p, eps, DEFAULT_MAX_STEPS)
}

pub fn compute_schedule_with(
    params: &Params,
    p: f64,
    eps: f64,
    max_steps: usize,
) -> Result<PeelSchedule> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidEpsilon { value: eps });
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidProbability { value: p });
    }
    let (k, z, n) = (params.k, params.z, params.n);
    let c = 7.0 * (z as f64).powi(3);
    let a = alpha(z);
    let threshold = 0.5 * eps.powf(a) * p;
    let mut s = PeelSchedule {
        z,
        n,
        eps,
        p,
        alpha: a,
        threshold,
        eps_t: vec![eps],
        p_t: vec![p],
        x_t: vec![x_of(eps, k, z, n)],
        t_stop: None,
        saturated: false,
        diagnostic: None,
    };
    if p <= threshold {
        s.t_stop = Some(0);
        return Ok(s);
    }
    if s.x_t[0] >= 1.0 {
        s.diagnostic = Some(format!(
            "x_0 = {:.4} >= 1: the recursion leaves (0, 1) immediately",
            s.x_t[0]
        ));
        return Ok(s);
    }
    for t in 0..max_steps {
        let (e, pt, x) = (s.eps_t[t], s.p_t[t], s.x_t[t]);
        let e_next = e * (1.0 + c * x);
        let mut p_next = pt * (1.0 - x);
        if x >= 1.0 {
            p_next = 0.0;
            s.saturated = true;
        }
        if !(e_next > e && p_next < pt) {
            s.diagnostic = Some(format!(
                "step {t}: x_t = {x:e} no longer moves eps_t or p_t in floating point"
            ));
            return Ok(s);
        }
        s.eps_t.push(e_next);
        s.p_t.push(p_next);
        s.x_t.push(x_of(e_next, k, z, n));
        if p_next <= threshold {
            s.t_stop = Some(t + 1);
            return Ok(s);
        }
    }
    s.diagnostic = Some(format!("no stop within {max_steps} steps"));
    Ok(s)
}

/// Largest value of `(1 + 7z^3 x)(1 - x)^(7z^3)` over `grid`.
pub fn schedule_product_max(z: usize, grid: &[f64]) -> f64 {
    let c = 7.0 * (z as f64).powi(3);
    grid.iter()
        .map(|&x| (1.0 + c * x) * (1.0 - x).powf(c))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `(1 + 7z^3 x)(1 - x)^(7z^3) <= 1 + 1e-12` on every grid point.
pub fn verify_schedule_inequality(z: usize, grid: &[f64]) -> bool {
    schedule_product_max(z, grid) <= 1.0 + 1e-12
}

/// Uniform grid of `m` points in `[0, 1)`.
pub fn unit_grid(m: usize) -> Vec<f64> {
    (0..m).map(|i| i as f64 / m as f64).collect()
}

/// Check monotonicity and `eps_(t+1)/eps_t <= (p_t/p_(t+1))^(7z^3)` on every
/// computed step; the first failing step is reported.
pub fn check_schedule(s: &PeelSchedule) -> std::result::Result<(), String> {
    let c = 7.0 * (s.z as f64).powi(3);
    for t in 0..s.eps_t.len().saturating_sub(1) {
        let (e0, e1, p0, p1) = (s.eps_t[t], s.eps_t[t + 1], s.p_t[t], s.p_t[t + 1]);
        if e1 <= e0 {
            return Err(format!("eps_t not increasing at t = {t}"));
        }
        if p1 >= p0 {
            return Err(format!("p_t not decreasing at t = {t}"));
        }
        let lhs = e1 / e0;
        let rhs = if p1 == 0.0 {
            f64::INFINITY
        } else {
            (p0 / p1).powf(c)
        };
        if lhs > rhs * (1.0 + 1e-12) {
            return Err(format!("t = {t}: eps ratio {lhs} exceeds {rhs}"));
        }
    }
    if let Some(t) = s.t_stop {
        if s.p_t[t] > s.threshold || s.p_t[..t].iter().any(|&p| p <= s.threshold) {
            return Err(format!(
                "T = {t} is not the first index below the threshold"
            ));
        }
    }
    Ok(())
}
