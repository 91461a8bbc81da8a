//! Leverage / short-cap grids over a fixed economy.
//!
//! Cells are independent: each composes the time-1 equilibrium at its cap
//! with settlement at its leverage. Results are assembled in eta-major order
//! whatever order the cells were evaluated in.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deleverage::{settle_deleverage, threshold_price, SettleError, ShockParams};
use crate::exec::Execution;
use crate::model::{
    corner_prices, corner_thresholds, posterior, solve_equilibrium, MarketParams, ParamError,
    Regime, ShortCap,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error(
        "scenario parse error at byte offset {offset} (line {line}, column {column}): {message}"
    )]
    Parse {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("{grid} must be nonempty, strictly increasing and nonnegative ({detail})")]
    Grid { grid: &'static str, detail: String },
    #[error(
        "signal s = {s} does not exceed the prior mean mu_x = {mu_x}; no bullish corner to close"
    )]
    NotBullish { s: f64, mu_x: f64 },
}

pub const DEFAULT_ETA_POINTS: usize = 41;
pub const DEFAULT_N_POINTS: usize = 61;

/// `count` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| {
                if i + 1 == count {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (count - 1) as f64
                }
            })
            .collect(),
    }
}

fn default_eta_grid() -> Vec<f64> {
    linspace(0.0, 0.4, DEFAULT_ETA_POINTS)
}

fn default_n_grid() -> Vec<f64> {
    linspace(0.0, 0.6, DEFAULT_N_POINTS)
}

/// An experiment: one economy, a leverage grid and a short-cap grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub params: MarketParams,
    #[serde(default = "default_eta_grid")]
    pub eta_grid: Vec<f64>,
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<f64>,
    #[serde(default)]
    pub emit_zero_rate_threshold: bool,
}

impl Scenario {
    /// Baseline economy on the default 41 x 61 grid over
    /// `[0, 0.4] x [0, 0.6]`, with the zero-rate threshold emitted.
    pub fn baseline() -> Self {
        Scenario {
            params: MarketParams::baseline(),
            eta_grid: default_eta_grid(),
            n_grid: default_n_grid(),
            emit_zero_rate_threshold: true,
        }
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, SweepError> {
        serde_json::from_slice(bytes).map_err(|e| json_error(bytes, &e))
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        self.params.validate()?;
        check_grid("eta_grid", &self.eta_grid)?;
        check_grid("n_grid", &self.n_grid)?;
        Ok(())
    }
}

/// Converts a serde_json error position into a byte offset.
pub(crate) fn json_error(bytes: &[u8], e: &serde_json::Error) -> SweepError {
    let (line, column) = (e.line(), e.column());
    let mut offset = 0;
    if line > 0 {
        let mut current = 1;
        for (i, &c) in bytes.iter().enumerate() {
            if current == line {
                offset = i + column.saturating_sub(1);
                break;
            }
            if c == b'\n' {
                current += 1;
            }
        }
        if current < line {
            offset = bytes.len();
        }
    }
    let message = e.to_string();
    let message = match message.find(" at line ") {
        Some(idx) => message[..idx].to_string(),
        None => message,
    };
    SweepError::Parse {
        offset: offset.min(bytes.len()),
        line,
        column,
        message,
    }
}

fn check_grid(grid: &'static str, values: &[f64]) -> Result<(), SweepError> {
    if values.is_empty() {
        return Err(SweepError::Grid {
            grid,
            detail: "empty".into(),
        });
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(SweepError::Grid {
            grid,
            detail: format!("entry {v}"),
        });
    }
    if let Some(w) = values.windows(2).find(|w| w[1] <= w[0]) {
        return Err(SweepError::Grid {
            grid,
            detail: format!("{} followed by {}", w[0], w[1]),
        });
    }
    Ok(())
}

/// Settled quantities of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellValues {
    pub regime: Regime,
    pub p1: f64,
    pub ps: f64,
    pub ps0: Option<f64>,
    pub gap: f64,
    pub p2: f64,
    pub log_return: f64,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub eta: f64,
    pub n: f64,
    pub result: Result<CellValues, CellFailure>,
}

/// A cell whose settlement failed.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub message: String,
    pub error: Option<SettleError>,
}

/// Time-1 prices at one short cap; independent of leverage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalRow {
    #[serde(rename = "N")]
    pub n: f64,
    pub regime: Regime,
    #[serde(rename = "P1")]
    pub p1: f64,
    #[serde(rename = "Ps")]
    pub ps: f64,
    #[serde(rename = "Ps0")]
    pub ps0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    /// Eta-major: cell `(i, j)` sits at `i * n_len + j`.
    pub cells: Vec<GridCell>,
    pub marginals: Vec<MarginalRow>,
}

impl GridResult {
    pub fn n_len(&self) -> usize {
        self.marginals.len()
    }

    pub fn cell(&self, eta_idx: usize, n_idx: usize) -> &GridCell {
        &self.cells[eta_idx * self.n_len() + n_idx]
    }

    pub fn failures(&self) -> impl Iterator<Item = &GridCell> {
        self.cells.iter().filter(|c| c.result.is_err())
    }

    /// Settled cells with the lowest and highest log-return (first in row
    /// order on ties).
    pub fn extrema(&self) -> Option<(&GridCell, &GridCell)> {
        let mut settled = self
            .cells
            .iter()
            .filter_map(|c| c.result.as_ref().ok().map(|v| (c, v.log_return)));
        let (first, r) = settled.next()?;
        let (mut min, mut max) = ((first, r), (first, r));
        for (c, r) in settled {
            if r < min.1 {
                min = (c, r);
            }
            if r > max.1 {
                max = (c, r);
            }
        }
        Some((min.0, max.0))
    }
}

/// Evaluates the scenario with the default execution strategy.
pub fn run_grid(sc: &Scenario) -> Result<GridResult, SweepError> {
    run_grid_with(sc, Execution::default())
}

pub fn run_grid_with(sc: &Scenario, exec: Execution) -> Result<GridResult, SweepError> {
    sc.validate()?;
    let p = &sc.params;
    let beliefs = posterior(p);

    let marginals: Vec<MarginalRow> = exec.map_indexed(sc.n_grid.len(), |j| {
        let cap = ShortCap::new(sc.n_grid[j]).expect("validated grid");
        let eq = solve_equilibrium(p, cap);
        MarginalRow {
            n: cap.get(),
            regime: eq.regime,
            p1: eq.p1,
            ps: threshold_price(p, &beliefs, cap, p.r),
            ps0: sc
                .emit_zero_rate_threshold
                .then(|| threshold_price(p, &beliefs, cap, 1.0)),
        }
    });

    let n_len = sc.n_grid.len();
    let cells = exec.map_indexed(sc.eta_grid.len() * n_len, |idx| {
        let (i, j) = (idx / n_len, idx % n_len);
        let eta = sc.eta_grid[i];
        let m = &marginals[j];
        let cap = ShortCap::new(m.n).expect("validated grid");
        let shock = ShockParams::new(eta).expect("validated grid");
        let eq = solve_equilibrium(p, cap);
        let result = settle_deleverage(p, &beliefs, &eq, cap, shock)
            .map(|out| CellValues {
                regime: eq.regime,
                p1: eq.p1,
                ps: out.p_s,
                ps0: m.ps0,
                gap: out.vacuum_gap,
                p2: out.p2,
                log_return: out.log_return,
                clamped: out.floor_clamped,
            })
            .map_err(|e| CellFailure {
                message: format!("cell (eta={eta}, N={}): {e}", m.n),
                error: Some(e),
            });
        GridCell {
            eta,
            n: m.n,
            result,
        }
    });

    Ok(GridResult { cells, marginals })
}

/// Short cap at which the time-1 price meets the L re-entry threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GapClosing {
    /// The vacuum is open for `N < n` and closed from `n` on.
    At(f64),
    /// The L short constraint does not bind even under a full ban.
    NoVacuum,
}

impl GapClosing {
    /// The closing cap, or `None` when there is no vacuum to close.
    pub fn cap(self) -> Option<f64> {
        match self {
            GapClosing::At(n) => Some(n),
            GapClosing::NoVacuum => None,
        }
    }
}

fn require_bullish(p: &MarketParams) -> Result<(), SweepError> {
    p.validate()?;
    if p.s <= p.mu_x {
        return Err(SweepError::NotBullish {
            s: p.s,
            mu_x: p.mu_x,
        });
    }
    Ok(())
}

/// Solves `s = s_high(N)` for `N`; the threshold is affine in `N`.
pub fn find_gap_closing_n(p: &MarketParams) -> Result<GapClosing, SweepError> {
    require_bullish(p)?;
    let (at_zero, _) = corner_thresholds(p, ShortCap::BAN);
    let (at_one, _) = corner_thresholds(p, ShortCap::new(1.0).expect("positive"));
    let slope = at_one - at_zero;
    let n = (p.s - at_zero) / slope;
    if n <= 0.0 {
        Ok(GapClosing::NoVacuum)
    } else {
        Ok(GapClosing::At(n))
    }
}

/// Same root found by bisection on `P_H(N) - P_s(N)`.
pub fn gap_closing_n_bisection(p: &MarketParams) -> Result<GapClosing, SweepError> {
    require_bullish(p)?;
    let b = posterior(p);
    let gap = |n: f64| {
        let cap = ShortCap::new(n).expect("nonnegative");
        corner_prices(p, &b, cap).0 - threshold_price(p, &b, cap, p.r)
    };
    if gap(0.0) <= 0.0 {
        return Ok(GapClosing::NoVacuum);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while gap(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(GapClosing::At(0.5 * (lo + hi)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridFormat {
    Csv,
    Json,
}

pub const CSV_COLUMNS: [&str; 10] = [
    "eta",
    "N",
    "regime",
    "P1",
    "Ps",
    "Ps0",
    "gap",
    "P2",
    "log_return",
    "clamped",
];

#[derive(Debug, Serialize, Deserialize)]
#[allow(non_snake_case)]
struct CellRecord {
    eta: f64,
    N: f64,
    regime: Option<Regime>,
    P1: Option<f64>,
    Ps: Option<f64>,
    Ps0: Option<f64>,
    gap: Option<f64>,
    P2: Option<f64>,
    log_return: Option<f64>,
    clamped: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GridRecord {
    cells: Vec<CellRecord>,
    marginals: Vec<MarginalRow>,
}

impl From<&GridCell> for CellRecord {
    fn from(c: &GridCell) -> Self {
        match &c.result {
            Ok(v) => CellRecord {
                eta: c.eta,
                N: c.n,
                regime: Some(v.regime),
                P1: Some(v.p1),
                Ps: Some(v.ps),
                Ps0: v.ps0,
                gap: Some(v.gap),
                P2: Some(v.p2),
                log_return: Some(v.log_return),
                clamped: Some(v.clamped),
                error: None,
            },
            Err(f) => CellRecord {
                eta: c.eta,
                N: c.n,
                regime: None,
                P1: None,
                Ps: None,
                Ps0: None,
                gap: None,
                P2: None,
                log_return: None,
                clamped: None,
                error: Some(f.message.clone()),
            },
        }
    }
}

impl CellRecord {
    fn into_cell(self) -> Result<GridCell, String> {
        let result = match self.error {
            Some(message) => Err(CellFailure {
                message,
                error: None,
            }),
            None => {
                let missing =
                    |name: &str| format!("cell (eta={}, N={}): missing {name}", self.eta, self.N);
                Ok(CellValues {
                    regime: self.regime.ok_or_else(|| missing("regime"))?,
                    p1: self.P1.ok_or_else(|| missing("P1"))?,
                    ps: self.Ps.ok_or_else(|| missing("Ps"))?,
                    ps0: self.Ps0,
                    gap: self.gap.ok_or_else(|| missing("gap"))?,
                    p2: self.P2.ok_or_else(|| missing("P2"))?,
                    log_return: self.log_return.ok_or_else(|| missing("log_return"))?,
                    clamped: self.clamped.ok_or_else(|| missing("clamped"))?,
                })
            }
        };
        Ok(GridCell {
            eta: self.eta,
            n: self.N,
            result,
        })
    }
}

/// Serializes the grid. Floats are written in shortest round-trip form.
///
/// CSV carries one row per cell; a failed cell has `regime = failed` and
/// empty numeric fields. JSON carries the cells plus per-N marginals.
pub fn emit_grid(gr: &GridResult, format: GridFormat) -> Vec<u8> {
    match format {
        GridFormat::Csv => emit_csv(gr),
        GridFormat::Json => {
            let record = GridRecord {
                cells: gr.cells.iter().map(CellRecord::from).collect(),
                marginals: gr.marginals.clone(),
            };
            let mut out = serde_json::to_vec_pretty(&record).expect("grid serializes");
            out.push(b'\n');
            out
        }
    }
}

fn emit_csv(gr: &GridResult) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for c in &gr.cells {
        let row: Vec<String> = match &c.result {
            Ok(v) => vec![
                c.eta.to_string(),
                c.n.to_string(),
                v.regime.to_string(),
                v.p1.to_string(),
                v.ps.to_string(),
                v.ps0.map(|x| x.to_string()).unwrap_or_default(),
                v.gap.to_string(),
                v.p2.to_string(),
                v.log_return.to_string(),
                v.clamped.to_string(),
            ],
            Err(_) => {
                let mut row = vec![c.eta.to_string(), c.n.to_string(), "failed".to_string()];
                row.resize(CSV_COLUMNS.len(), String::new());
                row
            }
        };
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Time-1 price curves against the short cap: one row per cap.
pub fn emit_marginals_csv(gr: &GridResult) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["N", "regime", "P1", "Ps", "Ps0"])
        .expect("in-memory write");
    for m in &gr.marginals {
        w.write_record([
            m.n.to_string(),
            m.regime.to_string(),
            m.p1.to_string(),
            m.ps.to_string(),
            m.ps0.map(|x| x.to_string()).unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Parses the JSON form written by [`emit_grid`].
pub fn parse_grid_json(bytes: &[u8]) -> Result<GridResult, String> {
    let record: GridRecord = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
    let cells = record
        .cells
        .into_iter()
        .map(CellRecord::into_cell)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GridResult {
        cells,
        marginals: record.marginals,
    })
}
