//! End-to-end acceptance gate: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p crashsim --test acceptance -- --nocapture` to see
//! the report.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crashsim_core::econometrics::{
    format_table, lowess_surface, ols, significance_stars, Coefficient, RegressionResult,
    SmoothSpec, INTERCEPT,
};
use crashsim_core::sweep::linspace;
use crashsim_core::{
    corner_thresholds, find_gap_closing_n, oracle_equilibrium, oracle_settle, posterior,
    price_floor, run_grid, settle_deleverage, solve_equilibrium, threshold_price, GapClosing,
    MarketParams, Regime, Scenario, ShockParams, ShortCap,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cap(n: f64) -> ShortCap {
    ShortCap::new(n).unwrap()
}

fn shock(eta: f64) -> ShockParams {
    ShockParams::new(eta).unwrap()
}

fn baseline_return(eta: f64, n: f64) -> f64 {
    let p = MarketParams::baseline();
    let b = posterior(&p);
    let eq = solve_equilibrium(&p, cap(n));
    settle_deleverage(&p, &b, &eq, cap(n), shock(eta))
        .unwrap()
        .log_return
}

fn c1_extremum() -> Outcome {
    let p = MarketParams::baseline();
    // Warm-up so the timing reflects the computation, not page faults.
    let _ = baseline_return(0.4, 0.0);
    let start = Instant::now();
    let b = posterior(&p);
    let eq = solve_equilibrium(&p, cap(0.0));
    let out = settle_deleverage(&p, &b, &eq, cap(0.0), shock(0.4)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let r = out.log_return;
    ensure((r - -0.32).abs() <= 0.005, || {
        format!("log-return {r} outside -0.32 +/- 0.005")
    })?;
    ensure(elapsed.as_secs_f64() < 1e-3, || {
        format!("settlement took {elapsed:?}")
    })?;
    Ok(format!(
        "log-return {r:.6} at (eta, N) = (0.4, 0) in {elapsed:?}"
    ))
}

fn c2_zero_return() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [0.5, 0.55, 0.6] {
        let r = baseline_return(0.0, n);
        ensure(r.abs() < 1e-12, || format!("log-return {r:e} at N = {n}"))?;
        worst = worst.max(r.abs());
    }
    Ok(format!(
        "max |log-return| {worst:e} at eta = 0, N in {{0.5, 0.55, 0.6}}"
    ))
}

fn c3_gap_closure() -> Outcome {
    let p = MarketParams::baseline();
    let b = posterior(&p);
    let n_star = match find_gap_closing_n(&p).map_err(|e| e.to_string())? {
        GapClosing::At(n) => n,
        GapClosing::NoVacuum => return Err("no vacuum reported".into()),
    };
    ensure((n_star - 0.5).abs() <= 1e-10, || format!("N* = {n_star}"))?;

    let grid = linspace(0.0, 0.6, 601);
    let signs: Vec<i8> = grid
        .iter()
        .map(|&n| {
            let d = solve_equilibrium(&p, cap(n)).p1 - threshold_price(&p, &b, cap(n), p.r);
            if d.abs() < 1e-12 {
                0
            } else if d > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();
    let nonzero: Vec<i8> = signs.iter().copied().filter(|&s| s != 0).collect();
    let changes = nonzero.windows(2).filter(|w| w[0] != w[1]).count();
    ensure(changes == 1, || format!("{changes} sign changes"))?;
    let last_pos = signs.iter().rposition(|&s| s == 1).unwrap();
    let first_nonpos = signs.iter().position(|&s| s != 1).unwrap();
    ensure(last_pos + 1 == first_nonpos, || "signs interleave".into())?;
    let at = grid[first_nonpos];
    ensure((at - n_star).abs() <= 1e-10, || {
        format!("sign leaves + at N = {at}, expected {n_star}")
    })?;
    Ok(format!(
        "N* = {n_star}; single sign change on 601 points at N = {at}"
    ))
}

fn c4_price_curves() -> Outcome {
    let p = MarketParams::baseline();
    let b = posterior(&p);
    let mut checked = 0;
    for count in [51, 501] {
        let grid = linspace(0.0, 0.5, count);
        let p1: Vec<f64> = grid
            .iter()
            .map(|&n| solve_equilibrium(&p, cap(n)).p1)
            .collect();
        let ps: Vec<f64> = grid
            .iter()
            .map(|&n| threshold_price(&p, &b, cap(n), p.r))
            .collect();
        for w in 0..grid.len() - 1 {
            ensure(p1[w + 1] < p1[w], || {
                format!("P1 not decreasing at N = {}", grid[w])
            })?;
            ensure(ps[w + 1] > ps[w], || {
                format!("Ps not increasing at N = {}", grid[w])
            })?;
        }
        for (&n, &s) in grid.iter().zip(&ps) {
            let s0 = threshold_price(&p, &b, cap(n), 1.0);
            ensure(s0 > s, || format!("Ps0 {s0} <= Ps {s} at N = {n}"))?;
        }
        checked += grid.len();
    }
    Ok(format!(
        "monotone P1/Ps and Ps0 > Ps on {checked} points in [0, 0.5]"
    ))
}

fn c5_surface_shape() -> Outcome {
    let sc = Scenario::baseline();
    let start = Instant::now();
    let gr = run_grid(&sc).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(gr.cells.len() == 41 * 61, || {
        format!("{} cells", gr.cells.len())
    })?;
    let r = |i: usize, j: usize| -> Result<f64, String> {
        gr.cell(i, j)
            .result
            .as_ref()
            .map(|v| v.log_return)
            .map_err(|f| f.message.clone())
    };
    for j in 0..61 {
        for i in 0..40 {
            let (a, b) = (r(i, j)?, r(i + 1, j)?);
            ensure(b <= a, || {
                format!("increases in eta at N = {}: {a} -> {b}", sc.n_grid[j])
            })?;
        }
    }
    for i in 0..41 {
        for j in 0..60 {
            let (n0, n1) = (sc.n_grid[j], sc.n_grid[j + 1]);
            let (a, b) = (r(i, j)?, r(i, j + 1)?);
            if n1 < 0.5 {
                ensure(b >= a, || {
                    format!("decreases in N at eta = {}, N = {n0}", sc.eta_grid[i])
                })?;
            }
            if n0 > 0.5 {
                ensure((b - a).abs() < 1e-12, || {
                    format!("varies in N at eta = {}, N = {n0}", sc.eta_grid[i])
                })?;
            }
        }
        let flat = (0..61).filter(|&j| sc.n_grid[j] > 0.5).count();
        ensure(flat == 10, || format!("{flat} cells past N = 0.5"))?;
    }
    ensure(elapsed.as_secs_f64() < 1.0, || {
        format!("sweep took {elapsed:?}")
    })?;
    Ok(format!(
        "41x61 surface monotone/flat as required; sweep {elapsed:?}"
    ))
}

/// Random valid economy; `cap` drawn from `[0, 1]` with a quarter of draws
/// at a full ban.
fn random_params(rng: &mut ChaCha8Rng) -> (MarketParams, ShortCap) {
    let tau_l = rng.gen_range(0.1..2.0);
    let p = MarketParams {
        mu_x: rng.gen_range(-2.0..3.0),
        tau_x: rng.gen_range(0.2..3.0),
        tau_l,
        tau_h: tau_l + rng.gen_range(0.1..3.0),
        lambda: rng.gen_range(0.1..0.9),
        a: rng.gen_range(0.1..2.0),
        r: rng.gen_range(0.9..1.2),
        s: 0.0,
    };
    let n = if rng.gen_bool(0.25) {
        0.0
    } else {
        rng.gen_range(0.0..1.0)
    };
    (p, cap(n))
}

fn c6_equilibrium_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    let mut counts = [0usize; 3];
    let mut worst: f64 = 0.0;
    for draw in 0..1000 {
        let (base, cap) = random_params(&mut rng);
        let (s_high, s_low) = corner_thresholds(&base, cap);
        let w = (s_high - s_low).abs().max(1.0);
        let p = base
            .with_signal(rng.gen_range(s_low - w..s_high + w))
            .validate()
            .unwrap();
        let closed = solve_equilibrium(&p, cap);
        let oracle = oracle_equilibrium(&p, cap).map_err(|e| format!("draw {draw}: {e}"))?;
        let err = (closed.p1 - oracle.p1).abs();
        worst = worst.max(err);
        ensure(err <= 1e-8, || {
            format!(
                "draw {draw}: closed {} vs oracle {} ({p:?}, N = {})",
                closed.p1,
                oracle.p1,
                cap.get()
            )
        })?;
        let expected = if p.s > s_high {
            Regime::CornerH
        } else if p.s < s_low {
            Regime::CornerL
        } else {
            Regime::Interior
        };
        ensure(closed.regime == expected, || {
            format!(
                "draw {draw}: regime {} but thresholds say {expected}",
                closed.regime
            )
        })?;
        counts[match closed.regime {
            Regime::CornerH => 0,
            Regime::CornerL => 1,
            Regime::Interior => 2,
        }] += 1;
    }
    ensure(counts.iter().all(|&c| c >= 100), || {
        format!("regime coverage {counts:?}")
    })?;
    Ok(format!(
        "1000 draws (cornerH {}, cornerL {}, interior {}); max |dP1| {worst:e}",
        counts[0], counts[1], counts[2]
    ))
}

fn c7_settlement_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut worst_accounting: f64 = 0.0;
    let mut clamped = 0;
    let mut compare =
        |p: &MarketParams, cap: ShortCap, eta: f64, label: &str| -> Result<bool, String> {
            let b = posterior(p);
            let eq = solve_equilibrium(p, cap);
            let closed = settle_deleverage(p, &b, &eq, cap, shock(eta))
                .map_err(|e| format!("{label}: {e}"))?;
            let oracle =
                oracle_settle(p, &b, &eq, cap, shock(eta)).map_err(|e| format!("{label}: {e}"))?;
            let err = (closed.p2 - oracle.p2).abs();
            worst = worst.max(err);
            ensure(err <= 1e-6, || {
                format!("{label}: P2 closed {} vs oracle {}", closed.p2, oracle.p2)
            })?;
            ensure(closed.floor_clamped == oracle.floor_clamped, || {
                format!("{label}: clamping disagrees")
            })?;
            let debt = eta * eq.p1;
            let gap = (closed.proceeds + closed.unpaid_debt - debt).abs();
            worst_accounting = worst_accounting.max(gap);
            ensure(gap <= 1e-12, || {
                format!("{label}: accounting off by {gap:e}")
            })?;
            Ok(closed.floor_clamped)
        };

    let sc = Scenario::baseline();
    for &eta in &sc.eta_grid {
        for &n in &sc.n_grid {
            clamped += usize::from(compare(
                &sc.params,
                cap(n),
                eta,
                &format!("grid (eta={eta}, N={n})"),
            )?);
        }
    }
    let grid_clamped = clamped;

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    let mut accepted = 0;
    while accepted < 200 {
        let (base, cap) = random_params(&mut rng);
        let p = base
            .with_signal(rng.gen_range(-3.0..8.0))
            .validate()
            .unwrap();
        let b = posterior(&p);
        if price_floor(&p, &b) < 0.0 || solve_equilibrium(&p, cap).p1 <= 0.0 {
            continue;
        }
        let eta = if accepted % 2 == 0 {
            rng.gen_range(0.0..0.5)
        } else {
            rng.gen_range(0.5..20.0)
        };
        let label = format!("random draw {accepted} ({p:?}, N={}, eta={eta})", cap.get());
        clamped += usize::from(compare(&p, cap, eta, &label)?);
        accepted += 1;
    }
    let random_clamped = clamped - grid_clamped;
    ensure(random_clamped >= 20, || {
        format!("only {random_clamped} floor-clamped random draws")
    })?;
    Ok(format!(
        "{} grid cells + 200 draws ({random_clamped} clamped); max |dP2| {worst:e}, max accounting gap {worst_accounting:e}",
        sc.eta_grid.len() * sc.n_grid.len()
    ))
}

fn c8_regime_continuity() -> Outcome {
    let base = MarketParams::baseline();
    let mut worst: f64 = 0.0;
    for n in [0.0, 0.25, 0.5] {
        let (s_high, _) = corner_thresholds(&base, cap(n));
        let below = solve_equilibrium(&base.with_signal(s_high - 1e-9), cap(n));
        let above = solve_equilibrium(&base.with_signal(s_high + 1e-9), cap(n));
        ensure(
            below.regime == Regime::Interior && above.regime == Regime::CornerH,
            || format!("N = {n}: regimes {} / {}", below.regime, above.regime),
        )?;
        let d = (below.p1 - above.p1).abs();
        worst = worst.max(d);
        ensure(d < 1e-6, || format!("N = {n}: jump {d:e}"))?;
    }
    Ok(format!("max |P1 jump| across s_high +/- 1e-9: {worst:e}"))
}

/// Gaussian elimination with partial pivoting on the augmented system.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut rhs: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let (pivot_rows, rest) = a.split_at_mut(row);
            for (dst, src) in rest[0][col..].iter_mut().zip(&pivot_rows[col][col..]) {
                *dst -= f * src;
            }
            let (pivot_rows, rest) = rhs.split_at_mut(row);
            for (dst, src) in rest[0].iter_mut().zip(&pivot_rows[col]) {
                *dst -= f * src;
            }
        }
    }
    let m = rhs[0].len();
    let mut x = vec![vec![0.0; m]; n];
    for row in (0..n).rev() {
        for k in 0..m {
            let s: f64 = (row + 1..n).map(|j| a[row][j] * x[j][k]).sum();
            x[row][k] = (rhs[row][k] - s) / a[row][row];
        }
    }
    x
}

/// Coefficients and classical standard errors from the normal equations,
/// intercept last.
fn normal_equations(y: &[f64], xs: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = y.len();
    let mut cols: Vec<Vec<f64>> = xs.to_vec();
    cols.push(vec![1.0; n]);
    let p = cols.len();
    let gram: Vec<Vec<f64>> = (0..p)
        .map(|i| {
            (0..p)
                .map(|j| (0..n).map(|r| cols[i][r] * cols[j][r]).sum())
                .collect()
        })
        .collect();
    let mut rhs: Vec<Vec<f64>> = (0..p)
        .map(|i| {
            let mut row = vec![0.0; p + 1];
            row[0] = (0..n).map(|r| cols[i][r] * y[r]).sum();
            row[i + 1] = 1.0;
            row
        })
        .collect();
    rhs = gauss_solve(gram, rhs);
    let beta: Vec<f64> = rhs.iter().map(|r| r[0]).collect();
    let rss: f64 = (0..n)
        .map(|r| {
            let fit: f64 = (0..p).map(|i| beta[i] * cols[i][r]).sum();
            (y[r] - fit).powi(2)
        })
        .sum();
    let sigma2 = rss / (n - p) as f64;
    let se = (0..p).map(|i| (sigma2 * rhs[i][i + 1]).sqrt()).collect();
    (beta, se)
}

fn random_design(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|_| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect()
}

fn named(xs: &[Vec<f64>]) -> (Vec<String>, Vec<&[f64]>) {
    let names = (0..xs.len()).map(|j| format!("x{j}")).collect();
    (names, xs.iter().map(Vec::as_slice).collect())
}

fn fit(y: &[f64], xs: &[Vec<f64>]) -> Result<RegressionResult, String> {
    let (names, cols) = named(xs);
    let regs: Vec<(&str, &[f64])> = names.iter().map(String::as_str).zip(cols).collect();
    ols(y, &regs, true).map_err(|e| e.to_string())
}

fn c9_ols() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0009);

    // Noiseless recovery.
    let truth = [1.25, -0.5, 3.0, 0.75];
    let xs = random_design(&mut rng, 60, 3);
    let y: Vec<f64> = (0..60)
        .map(|r| truth[3] + (0..3).map(|j| truth[j] * xs[j][r]).sum::<f64>())
        .collect();
    let r = fit(&y, &xs)?;
    for (c, t) in r.coefficients.iter().zip(truth) {
        ensure((c.coef - t).abs() <= 1e-10, || {
            format!("{}: {} vs {t}", c.name, c.coef)
        })?;
    }

    // Normal-equations oracle and identities on random noisy problems.
    let mut worst: f64 = 0.0;
    let mut worst_identity: f64 = 0.0;
    for trial in 0..100 {
        let n = rng.gen_range(20..200);
        let k = rng.gen_range(1..6);
        let xs = random_design(&mut rng, n, k);
        let y: Vec<f64> = (0..n)
            .map(|r| {
                rng.gen_range(-1.0..1.0) + (0..k).map(|j| (j as f64 - 1.5) * xs[j][r]).sum::<f64>()
            })
            .collect();
        let r = fit(&y, &xs)?;
        let (beta, se) = normal_equations(&y, &xs);
        for ((c, b), s) in r.coefficients.iter().zip(&beta).zip(&se) {
            let err = (c.coef - b).abs().max((c.se - s).abs());
            worst = worst.max(err);
            ensure(err <= 1e-8, || format!("trial {trial} {}: {err:e}", c.name))?;
        }

        let mut ortho = r.residuals.iter().sum::<f64>().abs();
        for x in &xs {
            ortho = ortho.max(
                r.residuals
                    .iter()
                    .zip(x)
                    .map(|(e, v)| e * v)
                    .sum::<f64>()
                    .abs(),
            );
        }
        let mean = y.iter().sum::<f64>() / n as f64;
        let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
        let rss: f64 = r.residuals.iter().map(|e| e * e).sum();
        let df = (n - k - 1) as f64;
        let r2 = 1.0 - rss / tss;
        let f = (r2 / k as f64) / ((1.0 - r2) / df);
        let adj = 1.0 - (1.0 - r2) * (n - 1) as f64 / df;
        let identity = ortho
            .max((r.r2 - r2).abs())
            .max((r.r2_adj - adj).abs())
            .max((r.f_stat - f).abs() / f.max(1.0));
        worst_identity = worst_identity.max(identity);
        ensure(identity <= 1e-9, || {
            format!("trial {trial}: identity gap {identity:e}")
        })?;
    }

    // Hand-worked fixture.
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    let y = [1.0, 2.0, 2.0, 3.0, 4.0];
    let r = ols(&y, &[("x", &x)], true).map_err(|e| e.to_string())?;
    let slope = r.get("x").unwrap().coef;
    let intercept = r.get(INTERCEPT).unwrap().coef;
    ensure(
        (slope - 0.7).abs() < 1e-12 && (intercept - 0.3).abs() < 1e-12,
        || format!("fixture slope {slope}, intercept {intercept}"),
    )?;

    // Table layout and stars.
    ensure(significance_stars(2.46, 840) == "**", || {
        "2.46 should earn **".into()
    })?;
    ensure(significance_stars(0.93, 840).is_empty(), || {
        "0.93 should earn none".into()
    })?;
    let coef = |name: &str, c: f64, t: f64| Coefficient {
        name: name.into(),
        coef: c,
        se: c / t,
        t,
    };
    let table = format_table(&[RegressionResult {
        coefficients: vec![
            coef("beta", -0.18, -2.99),
            coef("hml", 0.038, 0.93),
            coef("short_sale_ratio", 83.91, 2.46),
            coef(INTERCEPT, -0.054, -1.26),
        ],
        f_stat: 54.8,
        r2: 0.27,
        r2_adj: 0.26,
        n: 846,
        k: 3,
        intercept: true,
        residuals: vec![],
    }]);
    let cell = |label: &str| {
        table
            .lines()
            .find(|l| l.starts_with(label))
            .and_then(|l| l.split(" | ").nth(1))
            .map(|c| c.trim().to_string())
    };
    for (label, want) in [
        ("short sale ratio", "83.91 (2.46)**"),
        ("hml", "0.038 (0.93)"),
        ("beta", "-0.18 (-2.99)***"),
        ("const", "-0.054 (-1.26)"),
        ("F-Statistics", "54.8"),
        ("R2 adjusted", "0.26"),
        ("# of samples", "846"),
    ] {
        ensure(cell(label).as_deref() == Some(want), || {
            format!("row {label:?} = {:?}, want {want:?}", cell(label))
        })?;
    }
    Ok(format!(
        "recovery exact; 100 oracle problems max diff {worst:e}, identities {worst_identity:e}; fixture and table ok"
    ))
}

fn scatter(rng: &mut ChaCha8Rng, n: usize, f: impl Fn(f64, f64) -> f64) -> Vec<(f64, f64, f64)> {
    (0..n)
        .map(|_| {
            let a = rng.gen_range(0.0..0.3);
            let b = rng.gen_range(0.0..2e-3);
            (a, b, f(a, b))
        })
        .collect()
}

fn c10_smoother() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0010);
    let plane = |a: f64, b: f64| -0.3 - 2.9 * a + 84.0 * b;
    let spec = SmoothSpec::new(0.3, (25, 25)).unwrap();

    let pts = scatter(&mut rng, 400, plane);
    let fit = lowess_surface(&pts, &spec).map_err(|e| e.to_string())?;
    let mut worst_plane: f64 = 0.0;
    for (i, &a) in fit.x1_nodes.iter().enumerate() {
        for (j, &b) in fit.x2_nodes.iter().enumerate() {
            worst_plane = worst_plane.max((fit.value(i, j) - plane(a, b)).abs());
        }
    }
    ensure(worst_plane <= 1e-9, || {
        format!("plane error {worst_plane:e}")
    })?;

    let pts = scatter(&mut rng, 400, |_, _| 0.125);
    let fit = lowess_surface(&pts, &spec).map_err(|e| e.to_string())?;
    let worst_const = fit
        .values
        .iter()
        .map(|v| (v - 0.125).abs())
        .fold(0.0, f64::max);
    ensure(worst_const <= 1e-9, || {
        format!("constant error {worst_const:e}")
    })?;

    // Span 1: every node is a global tricube-weighted plane.
    let pts = scatter(&mut rng, 150, |a, b| (8.0 * a).sin() + 300.0 * b * b);
    let spec = SmoothSpec::new(1.0, (6, 7)).unwrap();
    let fit = lowess_surface(&pts, &spec).map_err(|e| e.to_string())?;
    let n = pts.len() as f64;
    let moments = |f: fn(&(f64, f64, f64)) -> f64| {
        let m = pts.iter().map(f).sum::<f64>() / n;
        let sd = (pts.iter().map(|p| (f(p) - m).powi(2)).sum::<f64>() / n).sqrt();
        (m, sd)
    };
    let (m1, s1) = moments(|p| p.0);
    let (m2, s2) = moments(|p| p.1);
    let mut worst_global: f64 = 0.0;
    for (i, &a) in fit.x1_nodes.iter().enumerate() {
        for (j, &b) in fit.x2_nodes.iter().enumerate() {
            let d: Vec<f64> = pts
                .iter()
                .map(|p| (((p.0 - a) / s1).powi(2) + ((p.1 - b) / s2).powi(2)).sqrt())
                .collect();
            let d_max = d.iter().copied().fold(0.0, f64::max);
            let sw: Vec<f64> = d
                .iter()
                .map(|di| (1.0 - (di / d_max).powi(3)).powi(3).sqrt())
                .collect();
            let c0: Vec<f64> = sw.clone();
            let c1: Vec<f64> = sw
                .iter()
                .zip(&pts)
                .map(|(w, p)| w * (p.0 - m1) / s1)
                .collect();
            let c2: Vec<f64> = sw
                .iter()
                .zip(&pts)
                .map(|(w, p)| w * (p.1 - m2) / s2)
                .collect();
            let y: Vec<f64> = sw.iter().zip(&pts).map(|(w, p)| w * p.2).collect();
            let r = ols(&y, &[("c0", &c0), ("c1", &c1), ("c2", &c2)], false)
                .map_err(|e| e.to_string())?;
            let beta: Vec<f64> = r.coefficients.iter().map(|c| c.coef).collect();
            let want = beta[0] + beta[1] * (a - m1) / s1 + beta[2] * (b - m2) / s2;
            worst_global = worst_global.max((fit.value(i, j) - want).abs());
        }
    }
    ensure(worst_global <= 1e-9, || {
        format!("span-1 error {worst_global:e}")
    })?;
    Ok(format!(
        "plane {worst_plane:e}, constant {worst_const:e}, span-1 vs global weighted plane {worst_global:e}"
    ))
}

fn scenario_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/baseline.json")
}

fn sweep_bytes(dir: &Path, name: &str, format: &str, sequential: bool) -> Result<Vec<u8>, String> {
    let out = dir.join(name);
    let scenario = scenario_path();
    let mut args = vec![
        "crashsim".to_string(),
        "sweep".into(),
        "--scenario".into(),
        scenario.display().to_string(),
        "--out".into(),
        out.display().to_string(),
        "--format".into(),
        format.into(),
    ];
    if sequential {
        args.push("--sequential".into());
    }
    let (mut stdout, mut stderr) = (Vec::new(), Vec::new());
    let code = crashsim_cli::run(args, &mut stdout, &mut stderr);
    ensure(code == 0, || {
        format!("sweep exited {code}: {}", String::from_utf8_lossy(&stderr))
    })?;
    std::fs::read(&out).map_err(|e| e.to_string())
}

fn c11_determinism() -> Outcome {
    let sc = Scenario::from_json(&std::fs::read(scenario_path()).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    ensure(sc == Scenario::baseline(), || {
        "shipped scenario differs from baseline".into()
    })?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut sizes = Vec::new();
    for format in ["csv", "json"] {
        let reference = sweep_bytes(dir.path(), &format!("ref.{format}"), format, true)?;
        for run in 0..3 {
            let again = sweep_bytes(dir.path(), &format!("par{run}.{format}"), format, false)?;
            ensure(again == reference, || {
                format!("parallel {format} run {run} differs")
            })?;
        }
        let again = sweep_bytes(dir.path(), &format!("seq.{format}"), format, true)?;
        ensure(again == reference, || {
            format!("sequential {format} rerun differs")
        })?;
        sizes.push(format!("{format} {} bytes", reference.len()));
    }
    Ok(format!(
        "5 runs per format byte-identical ({})",
        sizes.join(", ")
    ))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 11] = [
        ("extremum at (eta, N) = (0.4, 0)", c1_extremum),
        ("zero return once the vacuum closes", c2_zero_return),
        ("gap closes at N = 0.5", c3_gap_closure),
        ("time-1 price curves", c4_price_curves),
        ("log-return surface shape", c5_surface_shape),
        ("equilibrium oracle", c6_equilibrium_oracle),
        ("settlement oracle", c7_settlement_oracle),
        ("regime continuity", c8_regime_continuity),
        ("OLS engine", c9_ols),
        ("local-linear smoother", c10_smoother),
        ("sweep determinism", c11_determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                println!("FAIL {:>2} {name}: {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
