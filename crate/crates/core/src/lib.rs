//! Market crashes from deleveraging shocks when short sales are capped.
//!
//! Two representative investor groups read the same public signal with
//! different precisions. [`model`] clears the time-1 market under an
//! aggregate short cap, [`deleverage`] settles the forced liquidation of
//! the leveraged group at time 2 (including the no-trade free fall between
//! the time-1 price and the level where the crowded-out group re-enters),
//! [`sweep`] runs leverage/short-cap grids, and [`econometrics`] carries the
//! OLS and local-linear machinery used on cross-sectional return data.
//!
//! Every computation is a pure function of its inputs. Grid and surface
//! evaluation run on rayon when the `parallel` feature is enabled (the
//! default) and fall back to a sequential loop otherwise; both paths produce
//! bit-identical output.

pub mod deleverage;
pub mod econometrics;
pub mod exec;
pub mod format;
mod linalg;
pub mod model;
pub mod sweep;

pub use deleverage::{
    oracle_settle, price_floor, settle_deleverage, threshold_price, vacuum_gap, DeleverageOutcome,
    SettleError, ShockParams,
};
pub use exec::Execution;
pub use model::{
    corner_prices, corner_thresholds, oracle_equilibrium, posterior, solve_equilibrium,
    unconstrained_demand, Equilibrium, InvestorType, MarketParams, OracleError, ParamError,
    PosteriorBeliefs, Regime, ShortCap,
};
pub use sweep::{
    emit_grid, find_gap_closing_n, run_grid, run_grid_with, GapClosing, GridFormat, GridResult,
    Scenario, SweepError,
};
