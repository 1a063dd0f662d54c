//! Acceptance run: one PASS/FAIL line per criterion, details indented below.
//!
//! Runs without the libtest harness so the lines always reach stdout. Exits
//! non-zero on any FAIL only when `CSTE_ACCEPTANCE_STRICT=1`.

use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use cste_core::binary::{
    fit_binary, sbk_smooth, scb_binary, select_lambda, BinaryBandOptions, BinaryCsteFit, BinaryFitOptions,
};
use cste_core::curve::CsteCurve;
use cste_core::data::{
    parse_csv, simulate_binary_dgp, simulate_survival_dgp, BinaryDataset, Dataset, Schema, SurvivalDataset,
};
use cste_core::itr::{find_regions, RegionKind, RegionReport};
use cste_core::numkit::stats::{linspace, quantile};
use cste_core::numkit::{bspline_basis, Kernel, KnotVector, Penalty, RngStream};
use cste_core::pipeline::{run_survival, SurvivalRequest};
use cste_core::survival::{fit_curve, fit_local, scb_survival, SurvivalBandOptions, SurvivalFitOptions};

struct Report {
    passed: usize,
    failed: usize,
}

impl Report {
    fn line(&mut self, ok: bool, name: &str, summary: String, details: &[String]) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        println!("{} {name}: {summary}", if ok { "PASS" } else { "FAIL" });
        for d in details {
            println!("     {d}");
        }
    }
}

/// Every curve produced during the run, for the containment property.
#[derive(Default)]
struct Curves {
    checked: usize,
    violations: usize,
}

impl Curves {
    fn add(&mut self, c: &CsteCurve) {
        self.checked += 1;
        if !c.contains_estimate() {
            self.violations += 1;
        }
    }
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

// ---------------------------------------------------------------- criterion 1

/// Logistic regression by IRLS on explicit design rows.
fn irls_logistic(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = rows[0].len();
    let mut beta = vec![0.0; p];
    for _ in 0..100 {
        let mut h = vec![vec![0.0; p]; p];
        let mut g = vec![0.0; p];
        for (r, &yi) in rows.iter().zip(y) {
            let eta: f64 = r.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let mu = 1.0 / (1.0 + (-eta).exp());
            let w = mu * (1.0 - mu);
            for a in 0..p {
                g[a] += (yi - mu) * r[a];
                for b in 0..p {
                    h[a][b] += w * r[a] * r[b];
                }
            }
        }
        let step = solve(h, g);
        beta.iter_mut().zip(&step).for_each(|(b, s)| *b += s);
        if step.iter().map(|s| s.abs()).fold(0.0, f64::max) < 1e-12 {
            break;
        }
    }
    beta
}

fn criterion_1(rep: &mut Report) {
    let n = 5000;
    let mut rng = RngStream::new(2024, 0);
    let mut csv = String::from("Y,Treat,x\n");
    let (mut rows, mut ys) = (vec![], vec![]);
    for _ in 0..n {
        let x = rng.normal();
        let z = f64::from(u8::from(rng.bernoulli(0.5)));
        let eta = -0.3 + 0.4 * x + z * (0.5 + 0.8 * x);
        let y = f64::from(u8::from(rng.bernoulli(1.0 / (1.0 + (-eta).exp()))));
        csv.push_str(&format!("{y},{z},{x}\n"));
        rows.push(vec![1.0, x, z, z * x]);
        ys.push(y);
    }
    let t = Instant::now();
    let schema = Schema::Binary { outcome: "Y".into(), treatment: "Treat".into(), covariates: vec!["x".into()], id: None };
    let data = binary(parse_csv(&csv, &schema).unwrap());
    let result = fit_binary(&data, &BinaryFitOptions::default())
        .and_then(|fit| sbk_smooth(&fit, &data, None, Kernel::Epanechnikov).map(|s| (fit, s)));
    let (fit, smoother) = match result {
        Ok(v) => v,
        Err(e) => return rep.line(false, "criterion 1 (GLM reduction)", format!("fit failed: {e}"), &[]),
    };
    let oracle = irls_logistic(&rows, &ys);
    let line = |u: f64| oracle[2] + oracle[3] * u;
    let u = smoother.index();
    let grid = linspace(quantile(u, 0.05), quantile(u, 0.95), 100);
    // the reduction concerns the fitted spline g1; the kernel refinement is reported alongside
    let sup = grid.iter().map(|&u0| (fit.g1(u0) - line(u0)).abs()).fold(0.0, f64::max);
    let sbk: Vec<f64> = grid.iter().filter_map(|&u0| smoother.g1(u0).ok().map(|g| (g - line(u0)).abs())).collect();
    let sbk_sup = sbk.iter().copied().fold(0.0, f64::max);
    let elapsed = t.elapsed();
    let ok = sup < 0.15 && elapsed < Duration::from_secs(20);
    rep.line(
        ok,
        "criterion 1 (GLM reduction, p=1, lambda=0, n=5000)",
        format!("sup |g1 - g1_irls| = {sup:.4} (tol 0.15) over {} grid points; {:.2?} (limit 20 s)", grid.len(), elapsed),
        &[
            format!("beta1 = {:?}, oracle interaction line {:.4} + {:.4} u", fit.beta1.to_vec(), oracle[2], oracle[3]),
            format!(
                "kernel-refined g1 at the default bandwidth {:.3}: sup distance {sbk_sup:.4} over {} points (not graded)",
                smoother.bandwidth,
                sbk.len()
            ),
        ],
    );
}

// ---------------------------------------------------------------- criterion 2

/// Breslow partial likelihood maximised by Newton's method.
fn cox_oracle(time: &[f64], status: &[u8], cov: &[Vec<f64>]) -> Vec<f64> {
    let n = time.len();
    let p = cov[0].len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| time[a].total_cmp(&time[b]));
    let loglik = |beta: &[f64]| -> (f64, Vec<f64>, Vec<Vec<f64>>) {
        let eta: Vec<f64> = cov.iter().map(|c| c.iter().zip(beta).map(|(a, b)| a * b).sum()).collect();
        let (mut ll, mut g, mut h) = (0.0, vec![0.0; p], vec![vec![0.0; p]; p]);
        let mut i = 0;
        while i < n {
            let t = time[order[i]];
            let mut j = i;
            while j < n && time[order[j]] == t {
                j += 1;
            }
            let events: Vec<usize> = order[i..j].iter().copied().filter(|&k| status[k] == 1).collect();
            if !events.is_empty() {
                let (mut s0, mut s1, mut s2) = (0.0, vec![0.0; p], vec![vec![0.0; p]; p]);
                for &k in &order[i..] {
                    let w = eta[k].exp();
                    s0 += w;
                    for a in 0..p {
                        s1[a] += w * cov[k][a];
                        for b in 0..p {
                            s2[a][b] += w * cov[k][a] * cov[k][b];
                        }
                    }
                }
                let d = events.len() as f64;
                ll -= d * s0.ln();
                for &k in &events {
                    ll += eta[k];
                    for a in 0..p {
                        g[a] += cov[k][a];
                    }
                }
                for a in 0..p {
                    g[a] -= d * s1[a] / s0;
                    for b in 0..p {
                        h[a][b] += d * (s2[a][b] / s0 - s1[a] * s1[b] / (s0 * s0));
                    }
                }
            }
            i = j;
        }
        (ll, g, h)
    };
    let mut beta = vec![0.0; p];
    for _ in 0..200 {
        let (ll, g, h) = loglik(&beta);
        let step = solve(h, g);
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            if loglik(&cand).0 >= ll - 1e-12 {
                beta = cand;
                accepted = true;
                break;
            }
            scale /= 2.0;
        }
        if !accepted || step.iter().map(|s| (scale * s).abs()).fold(0.0, f64::max) < 1e-12 {
            break;
        }
    }
    beta
}

fn single_arm(d: SurvivalDataset) -> SurvivalDataset {
    let csv = Dataset::Survival(d).to_csv();
    let schema = Schema::Survival {
        time: "time".into(),
        status: "status".into(),
        biomarker: "X".into(),
        treatment: None,
        reference: None,
        treatments: Some(vec!["Treat1".into()]),
        id: None,
    };
    match parse_csv(&csv, &schema).unwrap() {
        Dataset::Survival(s) => s,
        Dataset::Binary(_) => unreachable!(),
    }
}

fn criterion_2(rep: &mut Report) {
    let data = single_arm(simulate_survival_dgp(500, 17).unwrap().0);
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut details = vec![];
    for q in [0.25, 0.5, 0.75] {
        let x0 = quantile(&data.x, q);
        let fit = match fit_local(&data, x0, 1e6, Kernel::Epanechnikov) {
            Ok(f) => f,
            Err(e) => return rep.line(false, "criterion 2 (Cox reduction)", format!("local fit failed: {e}"), &[]),
        };
        let cov: Vec<Vec<f64>> = (0..data.n())
            .map(|i| {
                let z = data.z[[i, 0]];
                vec![z, z * (data.x[i] - x0), data.x[i] - x0]
            })
            .collect();
        let oracle = cox_oracle(&data.time, &data.status, &cov);
        let diff = (fit.delta_hat[0] - oracle[0]).abs();
        worst = worst.max(diff);
        details.push(format!("x0 = {x0:.3}: delta = {:.8}, oracle = {:.8}", fit.delta_hat[0], oracle[0]));
    }
    let elapsed = t.elapsed();
    rep.line(
        worst < 1e-3 && elapsed < Duration::from_secs(5),
        "criterion 2 (Cox reduction, K=1, h->inf, n=500)",
        format!("max |delta - oracle| = {worst:.2e} (tol 1e-3); {elapsed:.2?} (limit 5 s)"),
        &details,
    );
}

// ---------------------------------------------------------------- criterion 3

/// Textbook Cox-de Boor recursion, no cleverness.
fn cox_de_boor(i: usize, p: usize, u: f64, t: &[f64]) -> f64 {
    if p == 0 {
        return if t[i] <= u && u < t[i + 1] { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    if t[i + p] > t[i] {
        v += (u - t[i]) / (t[i + p] - t[i]) * cox_de_boor(i, p - 1, u, t);
    }
    if t[i + p + 1] > t[i + 1] {
        v += (t[i + p + 1] - u) / (t[i + p + 1] - t[i + 1]) * cox_de_boor(i + 1, p - 1, u, t);
    }
    v
}

fn criterion_3(rep: &mut Report) {
    let mut rng = RngStream::new(3, 0);
    let (mut worst_sum, mut worst_oracle): (f64, f64) = (0.0, 0.0);
    let mut points = 0;
    for degree in [1usize, 2, 3] {
        let mut interior: Vec<f64> = (0..4).map(|_| -1.0 + 3.0 * rng.uniform()).collect();
        interior.sort_by(f64::total_cmp);
        let knots = KnotVector::new(degree, interior, -1.0, 2.0).unwrap();
        let t = knots.full_knots();
        for _ in 0..1000 {
            let u = -1.0 + 3.0 * rng.uniform();
            let b = bspline_basis(u, &knots).unwrap();
            worst_sum = worst_sum.max((b.iter().sum::<f64>() - 1.0).abs());
            for (i, &bi) in b.iter().enumerate() {
                worst_oracle = worst_oracle.max((bi - cox_de_boor(i, degree, u, &t)).abs());
            }
            points += 1;
        }
    }
    rep.line(
        worst_sum <= 1e-12 && worst_oracle <= 1e-12,
        "criterion 3 (B-spline partition of unity and Cox-de Boor agreement)",
        format!("{points} random points, degrees 1-3: max |sum - 1| = {worst_sum:.1e}, max |B - oracle| = {worst_oracle:.1e} (tol 1e-12)"),
        &[],
    );
}

// ------------------------------------------------------------ criteria 4 and 5

fn binary(d: Dataset) -> BinaryDataset {
    match d {
        Dataset::Binary(b) => b,
        Dataset::Survival(_) => unreachable!(),
    }
}

fn tuning_grid() -> Vec<f64> {
    (1..=10).map(|i| f64::from(i) / 1000.0).collect()
}

fn select(data: &BinaryDataset) -> cste_core::error::Result<BinaryCsteFit> {
    let base = BinaryFitOptions { penalty: Penalty::scad(0.0), ..Default::default() };
    select_lambda(data, &tuning_grid(), &base).map(|p| p.selected_fit().clone())
}

fn nondecreasing(trace: &[f64]) -> bool {
    trace.windows(2).all(|w| w[1] >= w[0] - 1e-9 * (1.0 + w[0].abs()))
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

struct Monotone {
    checked: usize,
    violations: usize,
}

fn criterion_4(rep: &mut Report, mono: &mut Monotone) {
    let t = Instant::now();
    let (mut rmse, mut recovered, mut in_range) = (vec![], 0, 0);
    let mut details = vec![];
    for seed in 1..=20u64 {
        let (data, truth) = simulate_binary_dgp(2000, 20, seed).unwrap();
        let fit = match select(&data) {
            Ok(f) => f,
            Err(e) => {
                details.push(format!("seed {seed}: selection failed: {e}"));
                continue;
            }
        };
        mono.checked += 1;
        if !nondecreasing(&fit.objective_trace) {
            mono.violations += 1;
        }
        let active = &fit.active_set;
        let hits = [0, 1, 2].iter().all(|j| active.contains(j));
        let spurious = active.iter().filter(|&&j| j > 2).count();
        if hits && spurious <= 2 {
            recovered += 1;
        }
        if (0.004..=0.010 + 1e-12).contains(&fit.lambda) {
            in_range += 1;
        }
        let err = sbk_smooth(&fit, &data, None, Kernel::Epanechnikov).map(|s| {
            let u = s.index();
            let grid = linspace(quantile(u, 0.05), quantile(u, 0.95), 100);
            let sq: Vec<f64> = grid.iter().filter_map(|&u0| s.g1(u0).ok().map(|g| (g - truth.g1(u0)).powi(2))).collect();
            (sq.iter().sum::<f64>() / sq.len() as f64).sqrt()
        });
        match err {
            Ok(r) => {
                details.push(format!("seed {seed}: lambda {} active {active:?} rmse {r:.3}", fit.lambda));
                rmse.push(r);
            }
            Err(e) => details.push(format!("seed {seed}: smoothing failed: {e}")),
        }
    }
    let elapsed = t.elapsed();
    let mean_rmse = rmse.iter().sum::<f64>() / rmse.len().max(1) as f64;
    let ok_rmse = rmse.len() == 20 && mean_rmse < 0.35;
    let ok_sel = recovered >= 14;
    let ok_lambda = in_range > 10;
    let ok_time = elapsed < Duration::from_secs(300);
    details.insert(0, format!("median rmse {:.3}; selection recovered in {recovered}/20; lambda in [0.004, 0.010] in {in_range}/20", median(rmse.clone())));
    rep.line(
        ok_rmse && ok_sel && ok_lambda && ok_time,
        "criterion 4 (binary design, 20 seeds, n=2000, p=20)",
        format!(
            "mean rmse {mean_rmse:.3} (<0.35) [{}]; recovery {recovered}/20 (>=14) [{}]; lambda in range {in_range}/20 (>10) [{}]; {elapsed:.1?} (<5 min) [{}]",
            pf(ok_rmse), pf(ok_sel), pf(ok_lambda), pf(ok_time)
        ),
        &details,
    );
}

fn pf(ok: bool) -> &'static str {
    if ok { "ok" } else { "miss" }
}

fn criterion_5(rep: &mut Report, curves: &mut Curves) {
    let t = Instant::now();
    let (mut covered, mut runs) = (0, 0);
    let mut details = vec![];
    for rep_id in 0..50u64 {
        let seed = 1000 + rep_id;
        let (data, truth) = simulate_binary_dgp(2000, 20, seed).unwrap();
        let band = select(&data).and_then(|fit| {
            scb_binary(&fit, &data, &BinaryBandOptions { n_boot: 200, seed, ..Default::default() })
        });
        match band {
            Ok(c) => {
                curves.add(&c);
                runs += 1;
                let misses = (0..c.len()).filter(|&j| {
                    let g = truth.g1(c.grid[j]);
                    g < c.lower[j] || g > c.upper[j]
                }).count();
                if misses == 0 {
                    covered += 1;
                } else {
                    details.push(format!("replication {rep_id}: {misses}/{} grid points uncovered", c.len()));
                }
            }
            Err(e) => details.push(format!("replication {rep_id}: failed: {e}")),
        }
    }
    let elapsed = t.elapsed();
    let coverage = covered as f64 / 50.0;
    rep.line(
        coverage >= 0.85 && elapsed < Duration::from_secs(900),
        "criterion 5 (binary band coverage, 50 replications, n_boot=200)",
        format!("simultaneous coverage {coverage:.2} ({covered}/50, {runs} completed; nominal 0.95, need >= 0.85); {elapsed:.1?} (<15 min)"),
        &details,
    );
}

// ---------------------------------------------------------------- criterion 6

/// Linear-interpolated zero crossings of `v` over `grid`.
fn zero_crossings(grid: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = vec![];
    for j in 1..grid.len() {
        let (a, b) = (v[j - 1], v[j]);
        if (a < 0.0) != (b < 0.0) {
            out.push(grid[j - 1] + (grid[j] - grid[j - 1]) * a / (a - b));
        }
    }
    out
}

fn survival_curve(data: &SurvivalDataset, contrast: Vec<f64>, seed: u64, mono: &mut Monotone) -> Result<(CsteCurve, RegionReport), String> {
    let fit = fit_curve(data, &SurvivalFitOptions { contrast: Some(contrast), ..Default::default() }).map_err(|e| e.to_string())?;
    for lf in &fit.local_fits {
        mono.checked += 1;
        if !nondecreasing(&lf.loglik_trace) {
            mono.violations += 1;
        }
    }
    let c = scb_survival(&fit, &SurvivalBandOptions { n_resample: 1000, seed, ..Default::default() }).map_err(|e| e.to_string())?;
    let r = find_regions(&c);
    Ok((c, r))
}

fn criterion_6(rep: &mut Report, curves: &mut Curves, mono: &mut Monotone) {
    let t = Instant::now();
    let (mut single_hits, mut firsts, mut lasts, mut counts) = (0, vec![], vec![], vec![]);
    let mut details = vec![];
    for seed in 1..=20u64 {
        let (data, _) = simulate_survival_dgp(100, seed).unwrap();
        let mut line = format!("seed {seed}:");
        match survival_curve(&data, vec![1.0, 0.0], seed, mono) {
            Ok((c, _)) => {
                curves.add(&c);
                let xs = zero_crossings(&c.grid, &c.upper);
                if xs.len() == 1 && (0.7..=1.05).contains(&xs[0]) {
                    single_hits += 1;
                }
                line += &format!(" l=(1,0) upper crossings {:?};", rounded(&xs));
            }
            Err(e) => line += &format!(" l=(1,0) failed ({e});"),
        }
        match survival_curve(&data, vec![0.0, 1.0], seed, mono) {
            Ok((c, r)) => {
                curves.add(&c);
                counts.push(r.cutoffs.len() as f64);
                if r.cutoffs.len() >= 2 {
                    firsts.push(r.cutoffs[0]);
                    lasts.push(*r.cutoffs.last().unwrap());
                }
                line += &format!(" l=(0,1) cutoffs {:?}", rounded(&r.cutoffs));
            }
            Err(e) => {
                counts.push(0.0);
                line += &format!(" l=(0,1) failed ({e})");
            }
        }
        details.push(line);
    }
    let elapsed = t.elapsed();
    let (m1, m2, mc) = (median(firsts.clone()), median(lasts.clone()), median(counts));
    let ok_a = single_hits >= 12;
    let ok_b = mc == 2.0 && (m1 - 0.20).abs() <= 0.15 && (m2 - 0.80).abs() <= 0.15;
    let ok_time = elapsed < Duration::from_secs(600);
    rep.line(
        ok_a && ok_b && ok_time,
        "criterion 6 (survival design, 20 seeds, n=100, default bandwidth)",
        format!(
            "l=(1,0) single upper crossing in [0.7, 1.05]: {single_hits}/20 (>=12) [{}]; l=(0,1) median #crossings {mc}, median first {m1:.3} (0.20+-0.15), median last {m2:.3} (0.80+-0.15) over {} seeds [{}]; {elapsed:.1?} [{}]",
            pf(ok_a), firsts.len(), pf(ok_b), pf(ok_time)
        ),
        &details,
    );
}

fn rounded(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1000.0).round() / 1000.0).collect()
}

// ---------------------------------------------------------------- criterion 7

fn criterion_7(rep: &mut Report, curves: &mut Curves) {
    let (data, _) = simulate_survival_dgp(80, 1).unwrap();
    let t = Instant::now();
    let out = run_survival(&data, &SurvivalRequest { contrast: Some(vec![1.0, 0.0]), n_resample: 1000, ..Default::default() });
    let elapsed = t.elapsed();
    match out {
        Ok(o) => {
            curves.add(&o.curve);
            rep.line(
                elapsed < Duration::from_secs(10),
                "criterion 7 (latency: survival fit + band, n=80, 1000 resamples)",
                format!("{elapsed:.2?} (limit 10 s), {} grid points", o.curve.len()),
                &[],
            );
        }
        Err(e) => rep.line(false, "criterion 7 (latency)", format!("fit failed after {elapsed:.2?}: {e}"), &[]),
    }
}

// ------------------------------------------------------------ property suites

fn nested(wide: &CsteCurve, narrow: &CsteCurve) -> bool {
    let mut shared = 0;
    for (j, u) in narrow.grid.iter().enumerate() {
        if let Some(i) = wide.grid.iter().position(|g| g == u) {
            shared += 1;
            if wide.lower[i] > narrow.lower[j] + 1e-12 || wide.upper[i] < narrow.upper[j] - 1e-12 {
                return false;
            }
        }
    }
    shared > 0
}

/// Partition check for one band: regions tile [grid_min, grid_max], interior
/// endpoints are cutoffs, and every grid point lands in the region its band implies.
fn partition_ok(c: &CsteCurve, r: &RegionReport) -> bool {
    let ordered = r.ordered();
    if ordered.is_empty() || ordered[0].1.lo != r.grid_min || ordered.last().unwrap().1.hi != r.grid_max {
        return false;
    }
    for w in ordered.windows(2) {
        let (a, b) = (&w[0].1, &w[1].1);
        if a.hi != b.lo || a.hi_closed == b.lo_closed || !r.cutoffs.contains(&a.hi) {
            return false;
        }
        if w[0].0 == w[1].0 {
            return false;
        }
    }
    for j in 0..c.len() {
        let expected = if c.lower[j] > 0.0 {
            RegionKind::Positive
        } else if c.upper[j] < 0.0 {
            RegionKind::Negative
        } else {
            RegionKind::Indeterminate
        };
        let got = r.classify(c.grid[j]);
        // a grid point sitting exactly on a cutoff belongs to the closed side
        if got != expected && !r.cutoffs.contains(&c.grid[j]) {
            return false;
        }
    }
    true
}

fn fuzzed_band(rng: &mut RngStream) -> CsteCurve {
    let m = 5 + (rng.uniform() * 60.0) as usize;
    let mut grid: Vec<f64> = (0..m).map(|_| -3.0 + 6.0 * rng.uniform()).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let (a, b, c) = (rng.normal(), rng.normal(), rng.normal());
    let estimate: Vec<f64> = grid.iter().map(|&u| a + b * u + c * (2.0 * u).sin()).collect();
    let se: Vec<f64> = grid.iter().map(|_| 0.05 + rng.uniform()).collect();
    let crit = 1.0 + 2.0 * rng.uniform();
    CsteCurve {
        lower: estimate.iter().zip(&se).map(|(e, s)| e - crit * s).collect(),
        upper: estimate.iter().zip(&se).map(|(e, s)| e + crit * s).collect(),
        grid,
        estimate,
        se,
        alpha: 0.05,
        bandwidth: 1.0,
        critical_value: crit,
        replicates: 0,
        seed: 0,
        trimmed: vec![],
    }
}

fn cli_service_identical() -> Result<(), String> {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let data = dir.path().join("sim.csv");
    let cste = env!("CARGO_BIN_EXE_cste");
    let run = |args: &[&str]| -> Result<(), String> {
        let out = Command::new(cste).args(args).output().map_err(|e| e.to_string())?;
        if out.status.success() { Ok(()) } else { Err(String::from_utf8_lossy(&out.stderr).into_owned()) }
    };
    run(&["simulate", "binary", "--n", "800", "--p", "4", "--seed", "21", "--out", data.to_str().unwrap()])?;
    let out_dir = dir.path().join("fit");
    run(&[
        "fit-binary", "--data", data.to_str().unwrap(), "--outcome", "Y", "--treatment", "Treat",
        "--covariates", "X.1,X.2,X.3,X.4", "--lambda", "0.002", "--boot", "300", "--seed", "9",
        "--out", out_dir.to_str().unwrap(),
    ])?;
    let cli_curve = fs::read(out_dir.join("curve.csv")).map_err(|e| e.to_string())?;
    let csv = fs::read_to_string(&data).map_err(|e| e.to_string())?;

    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let served = rt.block_on(async move {
        let app = cste_service::router(cste_service::AppState::new(cste_service::Config::default()));
        let call = |req: Request<Body>| {
            let app = app.clone();
            async move {
                let resp = app.oneshot(req).await.unwrap();
                let status = resp.status();
                (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
            }
        };
        let (_, b) = call(Request::post("/v1/sessions").body(Body::empty()).unwrap()).await;
        let sid = serde_json::from_slice::<Value>(&b).unwrap()["session_id"].as_str().unwrap().to_string();
        let schema = json!({"kind": "binary", "outcome": "Y", "treatment": "Treat", "covariates": ["X.1", "X.2", "X.3", "X.4"]});
        let part = |n: &str, v: &str| format!("--bnd\r\nContent-Disposition: form-data; name=\"{n}\"\r\n\r\n{v}\r\n");
        let body = part("name", "sim") + &part("schema", &schema.to_string()) + &part("file", &csv) + "--bnd--\r\n";
        let (s, _) = call(
            Request::post(format!("/v1/sessions/{sid}/datasets"))
                .header("content-type", "multipart/form-data; boundary=bnd")
                .body(Body::from(body))
                .unwrap(),
        )
        .await;
        assert_eq!(s, StatusCode::OK);
        let params = json!({"dataset": "sim", "lambda": 0.002, "n_boot": 300, "seed": 9});
        let (s, _) = call(
            Request::post(format!("/v1/sessions/{sid}/fits/binary"))
                .header("content-type", "application/json")
                .body(Body::from(params.to_string()))
                .unwrap(),
        )
        .await;
        assert_eq!(s, StatusCode::OK);
        call(Request::get(format!("/v1/sessions/{sid}/curves/sim?format=csv")).body(Body::empty()).unwrap()).await.1
    });
    if served == cli_curve { Ok(()) } else { Err("curve.csv differs between CLI and service".into()) }
}

fn property_suites(rep: &mut Report, curves: &mut Curves, mono: &mut Monotone) {
    let mut details = vec![];
    let mut all_ok = true;

    // alpha monotonicity and seed determinism, both models
    let (bdata, _) = simulate_binary_dgp(800, 5, 2).unwrap();
    let bfit = fit_binary(&bdata, &BinaryFitOptions::with_lambda(0.002)).unwrap();
    mono.checked += 1;
    if !nondecreasing(&bfit.objective_trace) {
        mono.violations += 1;
    }
    let band = |alpha: f64, seed: u64| scb_binary(&bfit, &bdata, &BinaryBandOptions { alpha, n_boot: 300, seed, ..Default::default() }).unwrap();
    let (b05, b20, b05_again, b05_other) = (band(0.05, 4), band(0.20, 4), band(0.05, 4), band(0.05, 5));
    let (sdata, _) = simulate_survival_dgp(150, 6).unwrap();
    let sfit = fit_curve(&sdata, &SurvivalFitOptions { contrast: Some(vec![1.0, 0.0]), bandwidth: Some(0.35), ..Default::default() }).unwrap();
    let sband = |alpha: f64, seed: u64| scb_survival(&sfit, &SurvivalBandOptions { alpha, n_resample: 300, seed }).unwrap();
    let (s05, s20, s05_again, s05_other) = (sband(0.05, 4), sband(0.20, 4), sband(0.05, 4), sband(0.05, 5));
    for c in [&b05, &b20, &b05_again, &b05_other, &s05, &s20, &s05_again, &s05_other] {
        curves.add(c);
    }

    let alpha_ok = nested(&b05, &b20) && nested(&s05, &s20);
    all_ok &= alpha_ok;
    details.push(format!("[{}] alpha monotonicity: 0.05 band contains 0.20 band (binary, survival)", pf(alpha_ok)));

    let det_ok = b05 == b05_again && s05 == s05_again && b05 != b05_other && s05 != s05_other;
    all_ok &= det_ok;
    details.push(format!("[{}] seed determinism: equal seeds give identical bands, different seeds differ (binary, survival)", pf(det_ok)));

    let mut rng = RngStream::new(99, 0);
    let mut bad = 0;
    for _ in 0..1000 {
        let c = fuzzed_band(&mut rng);
        if !partition_ok(&c, &find_regions(&c)) {
            bad += 1;
        }
    }
    all_ok &= bad == 0;
    details.push(format!("[{}] region partition on 1000 fuzzed bands: {bad} violations", pf(bad == 0)));

    let ident = cli_service_identical();
    all_ok &= ident.is_ok();
    details.push(format!("[{}] CLI and service curve.csv byte-identical{}", pf(ident.is_ok()), ident.err().map(|e| format!(": {e}")).unwrap_or_default()));

    let mono_ok = mono.violations == 0;
    all_ok &= mono_ok;
    details.push(format!("[{}] likelihood monotonicity: {} traces checked, {} violations", pf(mono_ok), mono.checked, mono.violations));

    let contain_ok = curves.violations == 0;
    all_ok &= contain_ok;
    details.push(format!("[{}] band containment: {} curves checked, {} violations", pf(contain_ok), curves.checked, curves.violations));

    rep.line(all_ok, "property suites", format!("{} sub-checks", details.len()), &details);
}

fn main() {
    // cargo passes libtest flags such as --nocapture or a filter; a filter
    // that names nothing here means "skip".
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if args.iter().any(|a| !"acceptance".contains(a.as_str())) {
        return;
    }
    let mut rep = Report { passed: 0, failed: 0 };
    let mut curves = Curves::default();
    let mut mono = Monotone { checked: 0, violations: 0 };
    let t = Instant::now();
    // CSTE_ACCEPTANCE_ONLY=1,7,props restricts the run
    let only: Option<Vec<String>> = std::env::var("CSTE_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').map(|s| s.trim().to_string()).collect());
    let run = |key: &str| only.as_ref().is_none_or(|o| o.iter().any(|k| k == key));
    if run("1") {
        criterion_1(&mut rep);
    }
    if run("2") {
        criterion_2(&mut rep);
    }
    if run("3") {
        criterion_3(&mut rep);
    }
    if run("4") {
        criterion_4(&mut rep, &mut mono);
    }
    if run("5") {
        criterion_5(&mut rep, &mut curves);
    }
    if run("6") {
        criterion_6(&mut rep, &mut curves, &mut mono);
    }
    if run("7") {
        criterion_7(&mut rep, &mut curves);
    }
    if run("props") {
        property_suites(&mut rep, &mut curves, &mut mono);
    }
    println!("acceptance: {} passed, {} failed ({:.1?})", rep.passed, rep.failed, t.elapsed());
    if rep.failed > 0 && std::env::var("CSTE_ACCEPTANCE_STRICT").as_deref() == Ok("1") {
        std::process::exit(1);
    }
}
