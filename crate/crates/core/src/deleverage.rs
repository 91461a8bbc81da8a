//! Time-2 deleveraging shock.
//!
//! The H group owes `eta * P1` and must sell into the L group's demand
//! schedule. L investors do not buy until the price falls to `P_s`, the level
//! at which their aggregate demand is back at `-N`; between `P1` and `P_s`
//! the price drops without trade. Below `P* = min(P1, P_s)` every unit L buys
//! is paid at the current price, so proceeds from selling down to `P2` are
//! `(lambda tau_hat_L R / 2a)(P*^2 - P2^2)`. Selling stops at the floor where
//! L holds the whole supply; debt left over at that point is unpaid.
//!
//! The public signal is held fixed throughout settlement.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    posterior, unconstrained_demand, Equilibrium, InvestorType, MarketParams, ParamError,
    PosteriorBeliefs, ShortCap,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SettleError {
    #[error(
        "price floor {floor} is negative; settlement needs a nonnegative floor, reparameterize"
    )]
    NegativeFloor { floor: f64 },
    #[error("time-1 price {p1} is not positive; log-return undefined")]
    NonpositiveP1 { p1: f64 },
    #[error("settled price {p2} is not positive")]
    NonpositiveP2 { p2: f64 },
}

/// Leverage of the H group: debt owed at time 2 is `eta * P1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ShockParams {
    eta: f64,
}

impl ShockParams {
    pub const NONE: ShockParams = ShockParams { eta: 0.0 };

    pub fn new(eta: f64) -> Result<Self, ParamError> {
        if !eta.is_finite() {
            return Err(ParamError::NonFinite {
                field: "eta",
                value: eta,
            });
        }
        if eta < 0.0 {
            return Err(ParamError::Constraint {
                field: "eta",
                constraint: "eta >= 0",
                detail: format!("eta = {eta}"),
            });
        }
        Ok(ShockParams { eta })
    }

    pub fn eta(self) -> f64 {
        self.eta
    }
}

impl TryFrom<f64> for ShockParams {
    type Error = ParamError;

    fn try_from(eta: f64) -> Result<Self, Self::Error> {
        ShockParams::new(eta)
    }
}

impl From<ShockParams> for f64 {
    fn from(s: ShockParams) -> f64 {
        s.eta
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeleverageOutcome {
    pub p_s: f64,
    /// Highest price at which L buying resumes, `min(P1, P_s)`.
    pub p_star: f64,
    /// Free-fall distance `max(P1 - P_s, 0)`.
    pub vacuum_gap: f64,
    pub p2: f64,
    pub proceeds: f64,
    pub unpaid_debt: f64,
    pub floor_clamped: bool,
    /// `ln P2 - ln P1`.
    pub log_return: f64,
}

/// Price at which L's aggregate demand equals `-N`, discounted at `r_used`.
///
/// Pass `p.r` for the ordinary threshold and `1.0` for the zero-rate variant.
pub fn threshold_price(p: &MarketParams, b: &PosteriorBeliefs, cap: ShortCap, r_used: f64) -> f64 {
    (b.mu_hat_l + p.a * cap.get() / (p.lambda * b.tau_hat_l)) / r_used
}

pub fn vacuum_gap(eq: &Equilibrium, p_s: f64) -> f64 {
    (eq.p1 - p_s).max(0.0)
}

/// Price at which L's aggregate demand absorbs the entire supply.
pub fn price_floor(p: &MarketParams, b: &PosteriorBeliefs) -> f64 {
    (b.mu_hat_l - p.a / (p.lambda * b.tau_hat_l)) / p.r
}

/// Settles the shock in closed form.
///
/// Maximum proceeds at the floor are computed before any square root so a
/// debt larger than the L schedule can absorb never produces a negative
/// `P2^2`. If `P*` already sits at or below the floor (H holds no long
/// position to sell), the effective floor is `P*` itself.
pub fn settle_deleverage(
    p: &MarketParams,
    b: &PosteriorBeliefs,
    eq: &Equilibrium,
    cap: ShortCap,
    shock: ShockParams,
) -> Result<DeleverageOutcome, SettleError> {
    let floor = price_floor(p, b);
    if floor < 0.0 {
        return Err(SettleError::NegativeFloor { floor });
    }
    let p1 = eq.p1;
    if p1 <= 0.0 {
        return Err(SettleError::NonpositiveP1 { p1 });
    }

    let p_s = threshold_price(p, b, cap, p.r);
    let p_star = p1.min(p_s);
    let floor = floor.min(p_star);
    let debt = shock.eta() * p1;
    // proceeds = slope * (P*^2 - P2^2)
    let slope = p.lambda * b.tau_hat_l * p.r / (2.0 * p.a);
    let max_proceeds = slope * (p_star * p_star - floor * floor);

    let (p2, proceeds, unpaid_debt, floor_clamped) = if debt == 0.0 {
        (p_star, 0.0, 0.0, false)
    } else if debt <= max_proceeds {
        let p2_sq = (p_star * p_star - 2.0 * p.a * debt / (p.lambda * b.tau_hat_l * p.r))
            .max(floor * floor);
        (p2_sq.sqrt(), debt, 0.0, false)
    } else {
        (floor, max_proceeds, debt - max_proceeds, true)
    };

    if p2 <= 0.0 {
        return Err(SettleError::NonpositiveP2 { p2 });
    }

    Ok(DeleverageOutcome {
        p_s,
        p_star,
        vacuum_gap: (p1 - p_s).max(0.0),
        p2,
        proceeds,
        unpaid_debt,
        floor_clamped,
        log_return: p2.ln() - p1.ln(),
    })
}

const ORACLE_PANELS: usize = 10_000;

/// Settles the shock numerically: the thresholds are found by bisection on
/// L's demand schedule, proceeds by trapezoidal Riemann-Stieltjes
/// quadrature of `P d(lambda y_L)`, and `P2` by bisection on those proceeds.
pub fn oracle_settle(
    p: &MarketParams,
    _b: &PosteriorBeliefs,
    eq: &Equilibrium,
    cap: ShortCap,
    shock: ShockParams,
) -> Result<DeleverageOutcome, SettleError> {
    let beliefs = posterior(p);
    let n = cap.get();
    let holding_l =
        |price: f64| p.lambda * unconstrained_demand(&beliefs, InvestorType::Low, price, p.a, p.r);

    let fair = beliefs.mu_hat_l / p.r;
    let floor = solve_decreasing(&holding_l, 1.0, fair);
    if floor < 0.0 {
        return Err(SettleError::NegativeFloor { floor });
    }
    let p1 = eq.p1;
    if p1 <= 0.0 {
        return Err(SettleError::NonpositiveP1 { p1 });
    }
    let p_s = solve_decreasing(&holding_l, -n, fair);
    let p_star = p1.min(p_s);
    let floor = floor.min(p_star);

    let proceeds_down_to = |price: f64| -> f64 {
        let h = (p_star - price) / ORACLE_PANELS as f64;
        let mut total = 0.0;
        let mut upper = p_star;
        let mut held = holding_l(upper);
        for i in 1..=ORACLE_PANELS {
            let lower = if i == ORACLE_PANELS {
                price
            } else {
                p_star - h * i as f64
            };
            let next = holding_l(lower);
            total += 0.5 * (upper + lower) * (next - held);
            upper = lower;
            held = next;
        }
        total
    };

    let debt = shock.eta() * p1;
    let max_proceeds = proceeds_down_to(floor);
    let target = debt.min(max_proceeds);

    let p2 = if target <= 0.0 {
        p_star
    } else if debt > max_proceeds {
        floor
    } else {
        let (mut lo, mut hi) = (floor, p_star);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if proceeds_down_to(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    if p2 <= 0.0 {
        return Err(SettleError::NonpositiveP2 { p2 });
    }

    Ok(DeleverageOutcome {
        p_s,
        p_star,
        vacuum_gap: (p1 - p_s).max(0.0),
        p2,
        proceeds: target.max(0.0),
        unpaid_debt: debt - target.max(0.0),
        floor_clamped: debt > max_proceeds,
        log_return: p2.ln() - p1.ln(),
    })
}

/// Solves `f(x) = target` for a strictly decreasing `f`, expanding a bracket
/// outward from `start`.
fn solve_decreasing(f: &impl Fn(f64) -> f64, target: f64, start: f64) -> f64 {
    let mut step = 1.0_f64.max(start.abs());
    let (mut lo, mut hi) = (start - step, start + step);
    while f(lo) < target || f(hi) > target {
        step *= 2.0;
        lo = start - step;
        hi = start + step;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
