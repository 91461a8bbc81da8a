//! Posterior beliefs and the time-1 market-clearing equilibrium.
//!
//! The risky asset pays `x ~ N(mu_x, 1/tau_x)` and the public signal is
//! `s = x + eps`. Low-confidence (L) investors believe the noise precision is
//! `tau_L`, high-confidence (H) investors believe it is `tau_H > tau_L`.
//! Mean-variance investors with risk aversion `a` then demand
//! `y = (mu_hat - R P) tau_hat / a` shares per capita. Supply is one share.
//!
//! Each group's aggregate position (`lambda * y_L` for L, `(1 - lambda) * y_H`
//! for H) may not fall below `-N`. Holdings in [`Equilibrium`] are always
//! stored in that aggregate form.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A violated parameter constraint.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{field} must be finite (got {value})")]
    NonFinite { field: &'static str, value: f64 },
    #[error("{constraint} violated ({detail})")]
    Constraint {
        field: &'static str,
        constraint: &'static str,
        detail: String,
    },
}

impl ParamError {
    /// Name of the offending field.
    pub fn field(&self) -> &'static str {
        match self {
            ParamError::NonFinite { field, .. } | ParamError::Constraint { field, .. } => field,
        }
    }

    fn constraint(field: &'static str, constraint: &'static str, detail: String) -> Self {
        ParamError::Constraint {
            field,
            constraint,
            detail,
        }
    }
}

/// Primitive model parameters.
///
/// `lambda` is the population weight attached to the L group: aggregate L
/// holdings are `lambda * y_L` and aggregate H holdings `(1 - lambda) * y_H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams {
    pub mu_x: f64,
    pub tau_x: f64,
    #[serde(rename = "tau_L")]
    pub tau_l: f64,
    #[serde(rename = "tau_H")]
    pub tau_h: f64,
    pub lambda: f64,
    pub a: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub s: f64,
}

impl MarketParams {
    /// The bullish reference economy used throughout the numerical
    /// experiments: mu_x=1.5, tau_x=1, tau_L=0.5, tau_H=1.5, lambda=0.5,
    /// a=0.5, R=1.05, s=5.
    pub fn baseline() -> Self {
        MarketParams {
            mu_x: 1.5,
            tau_x: 1.0,
            tau_l: 0.5,
            tau_h: 1.5,
            lambda: 0.5,
            a: 0.5,
            r: 1.05,
            s: 5.0,
        }
    }

    /// Returns a copy with a different signal realization.
    pub fn with_signal(self, s: f64) -> Self {
        MarketParams { s, ..self }
    }

    /// Checks every invariant and reports the first violation.
    pub fn validate(self) -> Result<Self, ParamError> {
        let fields = [
            ("mu_x", self.mu_x),
            ("tau_x", self.tau_x),
            ("tau_L", self.tau_l),
            ("tau_H", self.tau_h),
            ("lambda", self.lambda),
            ("a", self.a),
            ("R", self.r),
            ("s", self.s),
        ];
        for (field, value) in fields {
            if !value.is_finite() {
                return Err(ParamError::NonFinite { field, value });
            }
        }
        if self.tau_x <= 0.0 {
            return Err(ParamError::constraint(
                "tau_x",
                "tau_x > 0",
                format!("tau_x = {}", self.tau_x),
            ));
        }
        if self.tau_l <= 0.0 {
            return Err(ParamError::constraint(
                "tau_L",
                "tau_L > 0",
                format!("tau_L = {}", self.tau_l),
            ));
        }
        if self.tau_l >= self.tau_h {
            return Err(ParamError::constraint(
                "tau_L",
                "tau_L < tau_H",
                format!("tau_L = {}, tau_H = {}", self.tau_l, self.tau_h),
            ));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(ParamError::constraint(
                "lambda",
                "lambda in open interval (0,1)",
                format!("lambda = {}", self.lambda),
            ));
        }
        if self.a <= 0.0 {
            return Err(ParamError::constraint(
                "a",
                "a > 0",
                format!("a = {}", self.a),
            ));
        }
        if self.r <= 0.0 {
            return Err(ParamError::constraint(
                "R",
                "R > 0",
                format!("R = {}", self.r),
            ));
        }
        Ok(self)
    }
}

/// Maximum aggregate short position per investor group, in shares.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ShortCap(f64);

impl ShortCap {
    /// A full short-sale ban.
    pub const BAN: ShortCap = ShortCap(0.0);

    pub fn new(n: f64) -> Result<Self, ParamError> {
        if !n.is_finite() {
            return Err(ParamError::NonFinite {
                field: "N",
                value: n,
            });
        }
        if n < 0.0 {
            return Err(ParamError::constraint("N", "N >= 0", format!("N = {n}")));
        }
        Ok(ShortCap(n))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for ShortCap {
    type Error = ParamError;

    fn try_from(n: f64) -> Result<Self, Self::Error> {
        ShortCap::new(n)
    }
}

impl From<ShortCap> for f64 {
    fn from(cap: ShortCap) -> f64 {
        cap.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InvestorType {
    Low,
    High,
}

/// Posterior precision and mean of the payoff for each group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorBeliefs {
    pub tau_hat_l: f64,
    pub tau_hat_h: f64,
    pub mu_hat_l: f64,
    pub mu_hat_h: f64,
}

impl PosteriorBeliefs {
    pub fn precision(&self, ty: InvestorType) -> f64 {
        match ty {
            InvestorType::Low => self.tau_hat_l,
            InvestorType::High => self.tau_hat_h,
        }
    }

    pub fn mean(&self, ty: InvestorType) -> f64 {
        match ty {
            InvestorType::Low => self.mu_hat_l,
            InvestorType::High => self.mu_hat_h,
        }
    }
}

/// Updates the common prior with the public signal under each group's
/// perceived noise precision.
pub fn posterior(p: &MarketParams) -> PosteriorBeliefs {
    let tau_hat_l = p.tau_x + p.tau_l;
    let tau_hat_h = p.tau_x + p.tau_h;
    PosteriorBeliefs {
        tau_hat_l,
        tau_hat_h,
        mu_hat_l: (p.tau_x * p.mu_x + p.tau_l * p.s) / tau_hat_l,
        mu_hat_h: (p.tau_x * p.mu_x + p.tau_h * p.s) / tau_hat_h,
    }
}

/// Per-capita mean-variance demand at `price`, ignoring the short cap.
pub fn unconstrained_demand(
    b: &PosteriorBeliefs,
    ty: InvestorType,
    price: f64,
    a: f64,
    r: f64,
) -> f64 {
    (b.mean(ty) - r * price) * b.precision(ty) / a
}

/// Prices at which one group alone holds `1 + N` shares: `(P_H, P_L)`.
pub fn corner_prices(p: &MarketParams, b: &PosteriorBeliefs, cap: ShortCap) -> (f64, f64) {
    let n = cap.get();
    let p_h = (b.mu_hat_h - p.a * (1.0 + n) / ((1.0 - p.lambda) * b.tau_hat_h)) / p.r;
    let p_l = (b.mu_hat_l - p.a * (1.0 + n) / (p.lambda * b.tau_hat_l)) / p.r;
    (p_h, p_l)
}

/// Signal levels beyond which a group's short constraint binds:
/// `(s_high, s_low)`. Above `s_high` the L group is pinned at `-N`; below
/// `s_low` the H group is.
pub fn corner_thresholds(p: &MarketParams, cap: ShortCap) -> (f64, f64) {
    let n = cap.get();
    let tau_hat_l = p.tau_x + p.tau_l;
    let tau_hat_h = p.tau_x + p.tau_h;
    let spread = (p.tau_h - p.tau_l) * p.tau_x;
    let s_high = p.mu_x
        + p.a * (1.0 + n) * tau_hat_l / ((1.0 - p.lambda) * spread)
        + p.a * n * tau_hat_h / (p.lambda * spread);
    let s_low = p.mu_x
        - p.a * (1.0 + n) * tau_hat_h / (p.lambda * spread)
        - p.a * n * tau_hat_l / ((1.0 - p.lambda) * spread);

    // The signal-space thresholds are the belief-gap conditions rewritten
    // through mu_hat_H - mu_hat_L = tau_x (tau_H - tau_L)(s - mu_x) / (tau_hat_H tau_hat_L).
    debug_assert!({
        let b = posterior(p);
        let gap = b.mu_hat_h - b.mu_hat_l;
        let via_signal = spread * (p.s - p.mu_x) / (tau_hat_h * tau_hat_l);
        (gap - via_signal).abs() <= 1e-9 * (1.0 + gap.abs())
    });

    (s_high, s_low)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// L short constraint binds; H holds `1 + N`.
    CornerH,
    /// H short constraint binds; L holds `1 + N`.
    CornerL,
    Interior,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::CornerH => "CornerH",
            Regime::CornerL => "CornerL",
            Regime::Interior => "Interior",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "CornerH" => Ok(Regime::CornerH),
            "CornerL" => Ok(Regime::CornerL),
            "Interior" => Ok(Regime::Interior),
            other => Err(format!("unknown regime {other:?}")),
        }
    }
}

/// Time-1 clearing outcome. `h_l + h_h = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub regime: Regime,
    pub p1: f64,
    /// Aggregate L holding, `lambda * y_L`.
    pub h_l: f64,
    /// Aggregate H holding, `(1 - lambda) * y_H`.
    pub h_h: f64,
}

impl Equilibrium {
    /// Per-capita holding of one group.
    pub fn per_capita(&self, ty: InvestorType, lambda: f64) -> f64 {
        match ty {
            InvestorType::Low => self.h_l / lambda,
            InvestorType::High => self.h_h / (1.0 - lambda),
        }
    }
}

/// Closed-form equilibrium under the short cap.
///
/// A signal exactly on a threshold is classified as interior; the interior
/// price coincides with the corner price there.
pub fn solve_equilibrium(p: &MarketParams, cap: ShortCap) -> Equilibrium {
    let b = posterior(p);
    let n = cap.get();
    let (s_high, s_low) = corner_thresholds(p, cap);
    let (p_h, p_l) = corner_prices(p, &b, cap);

    if p.s > s_high {
        Equilibrium {
            regime: Regime::CornerH,
            p1: p_h,
            h_l: -n,
            h_h: 1.0 + n,
        }
    } else if p.s < s_low {
        Equilibrium {
            regime: Regime::CornerL,
            p1: p_l,
            h_l: 1.0 + n,
            h_h: -n,
        }
    } else {
        let mass_l = p.lambda * b.tau_hat_l;
        let mass_h = (1.0 - p.lambda) * b.tau_hat_h;
        let p1 = (mass_l * b.mu_hat_l + mass_h * b.mu_hat_h - p.a) / (p.r * (mass_l + mass_h));
        let h_l = p.lambda * unconstrained_demand(&b, InvestorType::Low, p1, p.a, p.r);
        Equilibrium {
            regime: Regime::Interior,
            p1,
            h_l,
            h_h: 1.0 - h_l,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("excess demand does not change sign on [{lo}, {hi}] (values {f_lo}, {f_hi})")]
    Bracket {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
}

/// Clears the market by bisection on aggregate excess demand with each
/// group's demand clipped at `-N`.
///
/// Shares no code path with [`solve_equilibrium`] beyond the posterior and
/// the per-capita demand schedule.
pub fn oracle_equilibrium(p: &MarketParams, cap: ShortCap) -> Result<Equilibrium, OracleError> {
    let b = posterior(p);
    let n = cap.get();
    let (lam, a, r) = (p.lambda, p.a, p.r);
    let agg_l = |price: f64| lam * unconstrained_demand(&b, InvestorType::Low, price, a, r);
    let agg_h =
        |price: f64| (1.0 - lam) * unconstrained_demand(&b, InvestorType::High, price, a, r);
    let excess = |price: f64| agg_l(price).max(-n) + agg_h(price).max(-n) - 1.0;

    let (p_h, p_l) = corner_prices(p, &b, cap);
    let width = a / (lam * b.tau_hat_l).min((1.0 - lam) * b.tau_hat_h) / r;
    let mut lo = p_h.min(p_l) - 10.0 * width;
    let mut hi = (b.mu_hat_l.max(b.mu_hat_h)) / r + 10.0 * width;
    let (f_lo, f_hi) = (excess(lo), excess(hi));
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(OracleError::Bracket { lo, hi, f_lo, f_hi });
    }

    let mut price = 0.5 * (lo + hi);
    for _ in 0..400 {
        price = 0.5 * (lo + hi);
        if price <= lo || price >= hi {
            break;
        }
        let f = excess(price);
        if f == 0.0 {
            break;
        }
        if f > 0.0 {
            lo = price;
        } else {
            hi = price;
        }
    }

    let raw_l = agg_l(price);
    let raw_h = agg_h(price);
    let (regime, h_l) = if raw_l < -n {
        (Regime::CornerH, -n)
    } else if raw_h < -n {
        (Regime::CornerL, 1.0 + n)
    } else {
        (Regime::Interior, raw_l)
    };
    Ok(Equilibrium {
        regime,
        p1: price,
        h_l,
        h_h: 1.0 - h_l,
    })
}
