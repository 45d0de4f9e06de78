//! Admissible performance loss `ζ` and sample thresholds `N∧` for the SPI,
//! SPIBB, two-successor (2s) and beta-based guarantees.
//!
//! Logarithms are natural; `2^|S|` enters as `|S| ln 2` so `|S|` in the
//! hundreds does not overflow.

mod special;

use std::fmt::Write as _;
use std::ops::RangeInclusive;

pub use special::{beta_pdf, inv_reg_inc_beta, ln_gamma, reg_inc_beta, INVERSE_MAX_ITER};

use crate::error::{Error, Result};

/// Relative slack absorbed before rounding up, so that values which are
/// integers up to float round-off do not jump to the next integer.
const CEIL_GUARD: f64 = 1e-12;

fn ceil_count(x: f64) -> u64 {
    (x * (1.0 - CEIL_GUARD)).ceil().max(0.0) as u64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundParams {
    pub n_states: usize,
    pub n_actions: usize,
    pub v_max: f64,
    pub gamma: f64,
    pub delta: f64,
    /// `ρ̃ = ρ(π_b, M̃) - ρ(π_⊙, M̃)`; zero unless known.
    pub rho_tilde: f64,
}

impl BoundParams {
    pub fn new(n_states: usize, n_actions: usize, v_max: f64, gamma: f64, delta: f64) -> Self {
        Self {
            n_states,
            n_actions,
            v_max,
            gamma,
            delta,
            rho_tilde: 0.0,
        }
    }

    pub fn with_rho_tilde(self, rho_tilde: f64) -> Self {
        Self { rho_tilde, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_states == 0 || self.n_actions == 0 {
            return Err(Error::InvalidParameters("state and action counts must be ≥ 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidParameters(format!("gamma {} outside (0, 1)", self.gamma)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameters(format!("delta {} outside (0, 1)", self.delta)));
        }
        if !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return Err(Error::InvalidParameters(format!("v_max {} must be positive", self.v_max)));
        }
        if !self.rho_tilde.is_finite() {
            return Err(Error::InvalidParameters("rho_tilde must be finite".into()));
        }
        Ok(())
    }

    fn s(&self) -> f64 {
        self.n_states as f64
    }

    fn a(&self) -> f64 {
        self.n_actions as f64
    }

    /// `ln(2 |S| |A| 2^|S| / δ)`.
    pub fn log_term_spibb(&self) -> f64 {
        (2.0 * self.s() * self.a() / self.delta).ln() + self.s() * std::f64::consts::LN_2
    }

    /// `ln(8 |S|² |A|² / δ)`.
    pub fn log_term_2s(&self) -> f64 {
        (8.0 * self.s() * self.s() * self.a() * self.a() / self.delta).ln()
    }

    /// Per-pair confidence `δ_T = δ / (|S|² |A|²)`.
    pub fn delta_pair(&self) -> f64 {
        self.delta / (self.s() * self.s() * self.a() * self.a())
    }

    /// Per-state confidence `δ / |S|`.
    pub fn delta_state(&self) -> f64 {
        self.delta / self.s()
    }

    fn horizon(&self) -> f64 {
        1.0 - self.gamma
    }
}

/// Conjugate prior `B(α1, α2)` on a transition probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaPrior {
    pub alpha1: f64,
    pub alpha2: f64,
}

impl BetaPrior {
    pub const UNIFORM: BetaPrior = BetaPrior {
        alpha1: 1.0,
        alpha2: 1.0,
    };

    pub fn new(alpha1: f64, alpha2: f64) -> Result<Self> {
        if alpha1 > 0.0 && alpha2 > 0.0 {
            Ok(Self { alpha1, alpha2 })
        } else {
            Err(Error::Domain(format!("prior parameters must be positive, got ({alpha1}, {alpha2})")))
        }
    }
}

impl Default for BetaPrior {
    fn default() -> Self {
        Self::UNIFORM
    }
}

fn check_n(n_wedge: u64) -> Result<f64> {
    if n_wedge == 0 {
        Err(Error::Domain("n_wedge must be ≥ 1".into()))
    } else {
        Ok(n_wedge as f64)
    }
}

fn check_zeta(zeta: f64) -> Result<()> {
    if zeta > 0.0 && zeta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("zeta must be positive, got {zeta}")))
    }
}

/// `ζ - ρ̃`, required positive.
fn net_zeta(params: &BoundParams, zeta: f64) -> Result<f64> {
    check_zeta(zeta)?;
    let z = zeta - params.rho_tilde;
    if z > 0.0 {
        Ok(z)
    } else {
        Err(Error::Domain(format!("zeta {zeta} does not exceed rho_tilde {}", params.rho_tilde)))
    }
}

/// `ζ^SPI = 2γV/(1-γ) · √(2L/N)` with `L = ln(2|S||A|2^|S|/δ)`.
pub fn zeta_spi(params: &BoundParams, n_wedge: u64) -> Result<f64> {
    params.validate()?;
    let n = check_n(n_wedge)?;
    Ok(2.0 * params.gamma * params.v_max / params.horizon()
        * (2.0 / n * params.log_term_spibb()).sqrt())
}

/// `N∧^SPI = 8V²L / (ζ²(1-γ)²)`, rounded up.
pub fn nmin_spi(params: &BoundParams, zeta: f64) -> Result<u64> {
    params.validate()?;
    check_zeta(zeta)?;
    let h = params.horizon();
    Ok(ceil_count(
        8.0 * params.v_max.powi(2) * params.log_term_spibb() / (zeta * zeta * h * h),
    ))
}

fn zeta_concentration(params: &BoundParams, n_wedge: u64, log_term: f64) -> Result<f64> {
    params.validate()?;
    let n = check_n(n_wedge)?;
    Ok(4.0 * params.v_max / params.horizon() * (2.0 / n * log_term).sqrt() + params.rho_tilde)
}

fn nmin_concentration(params: &BoundParams, zeta: f64, log_term: f64) -> Result<u64> {
    params.validate()?;
    let z = net_zeta(params, zeta)?;
    let h = params.horizon();
    Ok(ceil_count(32.0 * params.v_max.powi(2) * log_term / (z * z * h * h)))
}

/// `ζ^SPIBB = 4V/(1-γ) · √(2L/N) + ρ̃` with `L = ln(2|S||A|2^|S|/δ)`.
pub fn zeta_spibb(params: &BoundParams, n_wedge: u64) -> Result<f64> {
    zeta_concentration(params, n_wedge, params.log_term_spibb())
}

/// `N∧^SPIBB = 32V²L / ((ζ-ρ̃)²(1-γ)²)`, rounded up.
pub fn nmin_spibb(params: &BoundParams, zeta: f64) -> Result<u64> {
    nmin_concentration(params, zeta, params.log_term_spibb())
}

/// `ζ^2s = 4V/(1-γ) · √(2L/N) + ρ̃` with `L = ln(8|S|²|A|²/δ)`.
pub fn zeta_2s(params: &BoundParams, n_wedge: u64) -> Result<f64> {
    zeta_concentration(params, n_wedge, params.log_term_2s())
}

pub fn nmin_2s(params: &BoundParams, zeta: f64) -> Result<u64> {
    nmin_concentration(params, zeta, params.log_term_2s())
}

/// Width `1 - 2 I⁻¹_{δ_T/2}(c, c)` of the central posterior interval, with
/// `c = (n + α1 + α2)/2` (`n/2 + 1` under the uniform prior).
///
/// `n/2` is used as a real number for odd `n` as well.
pub fn interval_width(n: u64, delta_t: f64, prior: Option<BetaPrior>) -> Result<f64> {
    if !(delta_t > 0.0 && delta_t < 1.0) {
        return Err(Error::Domain(format!("delta_t {delta_t} outside (0, 1)")));
    }
    let prior = prior.unwrap_or_default();
    let c = (n as f64 + prior.alpha1 + prior.alpha2) / 2.0;
    Ok(1.0 - 2.0 * inv_reg_inc_beta(delta_t / 2.0, c, c)?)
}

/// `ζ^β = 4V/(1-γ) · width(N, δ_T) + ρ̃` with `δ_T = δ/(|S|²|A|²)`.
pub fn zeta_beta(params: &BoundParams, n_wedge: u64) -> Result<f64> {
    params.validate()?;
    let w = interval_width(n_wedge, params.delta_pair(), None)?;
    Ok(4.0 * params.v_max / params.horizon() * w + params.rho_tilde)
}

/// Least `n` in `range` with `pred(n)`, for `pred` monotone (false then true).
/// Extends the upper end by doubling if `pred` fails there.
fn least_satisfying(
    range: RangeInclusive<u64>,
    mut pred: impl FnMut(u64) -> Result<bool>,
) -> Result<u64> {
    let (mut lo, mut hi) = range.into_inner();
    let mut doublings = 0;
    while !pred(hi)? {
        if doublings == 64 || hi > u64::MAX / 2 {
            return Err(Error::Infeasible("no sample count satisfies the bound".into()));
        }
        lo = hi;
        hi = hi.max(1) * 2;
        doublings += 1;
    }
    if pred(lo)? {
        return Ok(lo);
    }
    // Invariant: pred(lo) false, pred(hi) true.
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Least `N` with `ζ^β(N) ≤ ζ`, searched over `[0, N∧^2s]`.
pub fn nmin_beta(params: &BoundParams, zeta: f64) -> Result<u64> {
    params.validate()?;
    net_zeta(params, zeta)?;
    let hi = nmin_2s(params, zeta)?;
    least_satisfying(0..=hi, |n| Ok(zeta_beta(params, n)? <= zeta))
}

/// `N∧^ks = 32V²/((ζ-ρ̃)²(1-γ)²) · ln(2|S|²|A|² 2^k / ((k-1)δ))`, for chains
/// of `k`-successor states.
pub fn nmin_ksucc(params: &BoundParams, zeta: f64, k: usize) -> Result<u64> {
    if k < 2 {
        return Err(Error::Domain(format!("k must be ≥ 2, got {k}")));
    }
    let (s, a) = (params.s(), params.a());
    let log_term = (2.0 * s * s * a * a / ((k - 1) as f64 * params.delta)).ln()
        + k as f64 * std::f64::consts::LN_2;
    nmin_concentration(params, zeta, log_term)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConversionTarget {
    TwoSuccessor,
    Beta,
}

/// Threshold for `target` that yields the same concentration term as
/// `n_spibb` under the SPIBB bound (`ρ̃` cancels).
pub fn convert_nmin(params: &BoundParams, n_spibb: u64, target: ConversionTarget) -> Result<u64> {
    params.validate()?;
    let n = check_n(n_spibb)?;
    let l_spibb = params.log_term_spibb();
    let n_2s = ceil_count(n * params.log_term_2s() / l_spibb);
    match target {
        ConversionTarget::TwoSuccessor => Ok(n_2s),
        ConversionTarget::Beta => {
            let target_width = (2.0 / n * l_spibb).sqrt();
            let dt = params.delta_pair();
            least_satisfying(0..=n_2s, |m| Ok(interval_width(m, dt, None)? <= target_width))
        }
    }
}

/// One row of the `|S|` sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SweepRow {
    pub states: usize,
    pub n_spi: u64,
    pub n_spibb: u64,
    pub n_2s: u64,
    pub n_beta: u64,
}

/// All four thresholds at fixed `ζ` for `|S|` in `lo..=hi` stepping by `step`.
pub fn sweep_states(
    base: &BoundParams,
    zeta: f64,
    lo: usize,
    hi: usize,
    step: usize,
) -> Result<Vec<SweepRow>> {
    use rayon::prelude::*;
    if lo == 0 || step == 0 || hi < lo {
        return Err(Error::InvalidParameters(format!("bad sweep range {lo}:{hi}:{step}")));
    }
    let states: Vec<usize> = (lo..=hi).step_by(step).collect();
    states
        .into_par_iter()
        .map(|n_states| {
            let p = BoundParams { n_states, ..*base };
            Ok(SweepRow {
                states: n_states,
                n_spi: nmin_spi(&p, zeta)?,
                n_spibb: nmin_spibb(&p, zeta)?,
                n_2s: nmin_2s(&p, zeta)?,
                n_beta: nmin_beta(&p, zeta)?,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("states,n_spi,n_spibb,n_2s,n_beta\n");
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.states, r.n_spi, r.n_spibb, r.n_2s, r.n_beta).unwrap();
    }
    out
}
