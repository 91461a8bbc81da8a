//! `crashsim` command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input (parse, schema, parameter
//! constraints), 3 settlement impossible (negative price floor), 4 sweep
//! finished with failed cells, 5 rank-deficient regression.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use crashsim_core::econometrics::{
    format_table, load_observations, lowess_surface, ols, regression_json, ObservationTable,
    RegressionError, RegressionResult, SmoothSpec,
};
use crashsim_core::format::sig;
use crashsim_core::sweep::{emit_marginals_csv, GridResult};
use crashsim_core::{
    emit_grid, posterior, price_floor, run_grid_with, settle_deleverage, solve_equilibrium,
    Execution, GridFormat, Scenario, SettleError, ShockParams, ShortCap, SweepError,
};
use thiserror::Error;

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn invalid(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        CliError::invalid(e.to_string())
    }
}

impl From<SettleError> for CliError {
    fn from(e: SettleError) -> Self {
        CliError {
            code: 3,
            message: e.to_string(),
        }
    }
}

impl From<RegressionError> for CliError {
    fn from(e: RegressionError) -> Self {
        let code = match e {
            RegressionError::RankDeficient { .. } => 5,
            _ => 2,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "crashsim",
    version,
    about = "Deleveraging crashes under short-sale caps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one (eta, N) point of a scenario's economy.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        eta: f64,
        #[arg(long, allow_negative_numbers = true)]
        cap: f64,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Run the scenario's (eta, N) grid.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Also write per-N time-1 prices (CSV) to this path.
        #[arg(long)]
        marginals: Option<PathBuf>,
        /// Evaluate cells on a single thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Regress log-returns on factor and leverage/short-sale specifications.
    Regress {
        input: PathBuf,
        #[arg(long = "spec", value_enum)]
        specs: Vec<RegressSpec>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Local-linear surface of log-return over leverage and short-sale ratio.
    Smooth {
        input: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        span: f64,
        /// Output nodes as ROWSxCOLS.
        #[arg(long, default_value = "25x25", value_parser = parse_grid)]
        grid: (usize, usize),
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a scenario file without writing anything.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Table,
}

/// Regressor sets, in table-column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegressSpec {
    /// beta, smb, hml
    Factors,
    /// leverage_ratio, short_sale_ratio
    Leverage,
    /// all five regressors
    Full,
}

impl RegressSpec {
    pub fn regressors(self) -> &'static [&'static str] {
        match self {
            RegressSpec::Factors => &["beta", "smb", "hml"],
            RegressSpec::Leverage => &["leverage_ratio", "short_sale_ratio"],
            RegressSpec::Full => &["beta", "smb", "hml", "leverage_ratio", "short_sale_ratio"],
        }
    }

    fn name(self) -> &'static str {
        match self {
            RegressSpec::Factors => "factors",
            RegressSpec::Leverage => "leverage",
            RegressSpec::Full => "full",
        }
    }
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected ROWSxCOLS, got {s:?}"))?;
    let a = a
        .trim()
        .parse()
        .map_err(|_| format!("bad row count in {s:?}"))?;
    let b = b
        .trim()
        .parse()
        .map_err(|_| format!("bad column count in {s:?}"))?;
    Ok((a, b))
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{rendered}");
            }
            return code;
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}

fn execute(cmd: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    match cmd {
        Command::Solve {
            scenario,
            eta,
            cap,
            format,
        } => cmd_solve(&scenario, eta, cap, format, stdout),
        Command::Sweep {
            scenario,
            out,
            format,
            marginals,
            sequential,
        } => {
            let exec = if sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            };
            cmd_sweep(
                &scenario,
                out.as_deref(),
                format,
                marginals.as_deref(),
                exec,
                stdout,
                stderr,
            )
        }
        Command::Regress {
            input,
            specs,
            format,
            out,
        } => cmd_regress(&input, &specs, format, out.as_deref(), stdout),
        Command::Smooth {
            input,
            span,
            grid,
            out,
        } => cmd_smooth(&input, span, grid, out.as_deref(), stdout, stderr),
        Command::Validate { scenario } => {
            let sc = load_scenario(&scenario)?;
            writeln!(
                stdout,
                "ok: {} eta x {} N cells",
                sc.eta_grid.len(),
                sc.n_grid.len()
            )
            .map_err(io_error)?;
            Ok(0)
        }
    }
}

fn io_error(e: std::io::Error) -> CliError {
    CliError::invalid(format!("I/O error: {e}"))
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::invalid(format!("cannot read {}: {e}", path.display())))
}

fn write_output(out: Option<&Path>, bytes: &[u8], stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, bytes)
            .map_err(|e| CliError::invalid(format!("cannot write {}: {e}", path.display()))),
        None => stdout.write_all(bytes).map_err(io_error),
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let bytes = read_file(path)?;
    let sc = Scenario::from_json(&bytes)?;
    sc.validate()?;
    Ok(sc)
}

fn cmd_solve(
    path: &Path,
    eta: f64,
    cap: f64,
    format: Format,
    stdout: &mut dyn Write,
) -> Result<i32, CliError> {
    let sc = load_scenario(path)?;
    let p = sc.params;
    let cap = ShortCap::new(cap).map_err(|e| CliError::invalid(e.to_string()))?;
    let shock = ShockParams::new(eta).map_err(|e| CliError::invalid(e.to_string()))?;
    let b = posterior(&p);
    let eq = solve_equilibrium(&p, cap);
    let out = settle_deleverage(&p, &b, &eq, cap, shock)?;

    let text = match format {
        Format::Json => {
            let v = serde_json::json!({
                "eta": shock.eta(),
                "N": cap.get(),
                "regime": eq.regime.as_str(),
                "P1": eq.p1,
                "h_L": eq.h_l,
                "h_H": eq.h_h,
                "Ps": out.p_s,
                "gap": out.vacuum_gap,
                "P2": out.p2,
                "log_return": out.log_return,
                "proceeds": out.proceeds,
                "unpaid_debt": out.unpaid_debt,
                "clamped": out.floor_clamped,
            });
            format!("{}\n", serde_json::to_string_pretty(&v).expect("json"))
        }
        Format::Table | Format::Csv => {
            let rows = [
                ("eta", sig(shock.eta(), 6)),
                ("N", sig(cap.get(), 6)),
                ("regime", eq.regime.to_string()),
                ("P1", sig(eq.p1, 6)),
                ("h_L", sig(eq.h_l, 6)),
                ("h_H", sig(eq.h_h, 6)),
                ("Ps", sig(out.p_s, 6)),
                ("gap", sig(out.vacuum_gap, 6)),
                ("P2", sig(out.p2, 6)),
                ("log_return", sig(out.log_return, 6)),
                ("proceeds", sig(out.proceeds, 6)),
                ("unpaid_debt", sig(out.unpaid_debt, 6)),
                ("floor_clamped", out.floor_clamped.to_string()),
            ];
            rows.iter().map(|(k, v)| format!("{k:<14}{v}\n")).collect()
        }
    };
    stdout.write_all(text.as_bytes()).map_err(io_error)?;
    Ok(0)
}

/// Human-readable min/max summary of a sweep.
pub fn sweep_summary(gr: &GridResult) -> String {
    let failed = gr.failures().count();
    let mut s = format!("cells: {} ({} failed)\n", gr.cells.len(), failed);
    let Some((min, max)) = gr.extrema() else {
        return s;
    };
    let value = |c: &crashsim_core::sweep::GridCell| {
        c.result.as_ref().map(|v| v.log_return).unwrap_or(f64::NAN)
    };
    let lo = value(min);
    let hi = value(max);
    s.push_str(&format!(
        "min log_return {} at (eta={}, N={})\n",
        sig(lo, 6),
        sig(min.eta, 6),
        sig(min.n, 6)
    ));
    let ties: Vec<_> = gr.cells.iter().filter(|c| value(c) >= hi - 1e-12).collect();
    let range = |f: fn(&&crashsim_core::sweep::GridCell) -> f64| {
        let lo = ties.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = ties.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        if lo == hi {
            sig(lo, 6)
        } else {
            format!("[{}, {}]", sig(lo, 6), sig(hi, 6))
        }
    };
    s.push_str(&format!(
        "max log_return {} at (eta={}, N={})",
        sig(hi, 6),
        range(|c| c.eta),
        range(|c| c.n)
    ));
    s.push_str(&format!(" ({} cells within 1e-12)\n", ties.len()));
    s
}

fn cmd_sweep(
    path: &Path,
    out: Option<&Path>,
    format: Format,
    marginals: Option<&Path>,
    exec: Execution,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, CliError> {
    let sc = load_scenario(path)?;
    let floor = price_floor(&sc.params, &posterior(&sc.params));
    if floor < 0.0 {
        return Err(SettleError::NegativeFloor { floor }.into());
    }
    let grid_format = match format {
        Format::Csv => GridFormat::Csv,
        Format::Json => GridFormat::Json,
        Format::Table => return Err(CliError::invalid("sweep output format must be csv or json")),
    };
    let gr = run_grid_with(&sc, exec)?;
    write_output(out, &emit_grid(&gr, grid_format), stdout)?;
    if let Some(path) = marginals {
        write_output(Some(path), &emit_marginals_csv(&gr), stdout)?;
    }

    let summary = sweep_summary(&gr);
    let sink: &mut dyn Write = if out.is_some() { stdout } else { &mut *stderr };
    sink.write_all(summary.as_bytes()).map_err(io_error)?;

    let failures: Vec<_> = gr.failures().collect();
    if failures.is_empty() {
        return Ok(0);
    }
    for c in failures {
        if let Err(f) = &c.result {
            writeln!(stderr, "failed: {}", f.message).map_err(io_error)?;
        }
    }
    Ok(4)
}

fn load_table(path: &Path) -> Result<ObservationTable, CliError> {
    let bytes = read_file(path)?;
    load_observations(&bytes).map_err(|e| CliError::invalid(e.to_string()))
}

/// Fits the requested specifications (all three when none are given).
pub fn run_regressions(
    table: &ObservationTable,
    specs: &[RegressSpec],
) -> Result<Vec<(RegressSpec, RegressionResult)>, CliError> {
    let specs: Vec<RegressSpec> = if specs.is_empty() {
        vec![
            RegressSpec::Factors,
            RegressSpec::Leverage,
            RegressSpec::Full,
        ]
    } else {
        specs.to_vec()
    };
    let y = table.column("log_return").expect("known column");
    specs
        .into_iter()
        .map(|spec| {
            let columns: Vec<(&str, Vec<f64>)> = spec
                .regressors()
                .iter()
                .map(|&name| (name, table.column(name).expect("known column")))
                .collect();
            let refs: Vec<(&str, &[f64])> =
                columns.iter().map(|(n, c)| (*n, c.as_slice())).collect();
            Ok((spec, ols(&y, &refs, true)?))
        })
        .collect()
}

fn cmd_regress(
    path: &Path,
    specs: &[RegressSpec],
    format: Format,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<i32, CliError> {
    let table = load_table(path)?;
    let fits = run_regressions(&table, specs)?;
    let text = match format {
        Format::Json => {
            let arr: Vec<serde_json::Value> = fits
                .iter()
                .map(|(spec, r)| {
                    let mut v = regression_json(r);
                    v["spec"] = spec.name().into();
                    v
                })
                .collect();
            format!("{}\n", serde_json::to_string_pretty(&arr).expect("json"))
        }
        Format::Table | Format::Csv => {
            let results: Vec<RegressionResult> = fits.into_iter().map(|(_, r)| r).collect();
            format_table(&results)
        }
    };
    write_output(out, text.as_bytes(), stdout)?;
    Ok(0)
}

fn cmd_smooth(
    path: &Path,
    span: f64,
    grid: (usize, usize),
    out: Option<&Path>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, CliError> {
    let table = load_table(path)?;
    let spec = SmoothSpec::new(span, grid).map_err(|e| CliError::invalid(e.to_string()))?;
    let points: Vec<(f64, f64, f64)> = table
        .rows
        .iter()
        .map(|o| (o.leverage_ratio, o.short_sale_ratio, o.log_return))
        .collect();
    if !spec.is_adequate(points.len()) {
        writeln!(
            stderr,
            "warning: span {} keeps {} of {} points per local fit; a local plane needs span*n >= 4",
            span,
            spec.neighbours(points.len()),
            points.len()
        )
        .map_err(io_error)?;
    }
    let fit = lowess_surface(&points, &spec).map_err(|e| CliError::invalid(e.to_string()))?;
    if !fit.degenerate.is_empty() {
        writeln!(
            stderr,
            "warning: DegenerateNeighborhood at {} of {} nodes; reported the weighted mean there",
            fit.degenerate.len(),
            fit.values.len()
        )
        .map_err(io_error)?;
        for (i, j) in &fit.degenerate {
            writeln!(
                stderr,
                "  node ({i}, {j}) at leverage_ratio={}, short_sale_ratio={}",
                fit.x1_nodes[*i], fit.x2_nodes[*j]
            )
            .map_err(io_error)?;
        }
    }

    let mut text = String::from("leverage_ratio,short_sale_ratio,log_return\n");
    for (i, a) in fit.x1_nodes.iter().enumerate() {
        for (j, b) in fit.x2_nodes.iter().enumerate() {
            text.push_str(&format!("{a},{b},{}\n", fit.value(i, j)));
        }
    }
    write_output(out, text.as_bytes(), stdout)?;
    Ok(0)
}
