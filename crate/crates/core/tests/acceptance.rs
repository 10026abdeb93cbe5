//! One test per acceptance criterion. Each prints a single `PASS`/`FAIL` line
//! straight to stdout (bypassing libtest capture) and then asserts.
//! Tests take a shared lock so wall-clock budgets are not skewed by running
//! concurrently.

use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use bridge_core::finite_sample::{
    amp_run, empirical_mse, generate_instance, lambda_grid, mean_sd, ols_slope, run_replicates,
    LqlsSolver, ReplicateSpec, SolverOptions,
};
use bridge_core::prior::SignalPrior;
use bridge_core::prox::{Exponent, Prox};
use bridge_core::risk::m1_curve;
use bridge_core::state_evolution::{expansion, se_trace, solve_tuned};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(id: u32, pass: bool, elapsed: Duration, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "{tag} criterion {id}: {detail} [{:.2}s]",
        elapsed.as_secs_f64()
    );
    let _ = out.flush();
}

fn q(v: f64) -> Exponent {
    Exponent::new(v).unwrap()
}

fn pm1(eps: f64) -> SignalPrior {
    SignalPrior::symmetric_two_point(eps, 1.0).unwrap()
}

#[test]
fn criterion_01_prox_properties() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_identity = 0.0f64;
    let mut worst_fd = 0.0f64;
    for i in 0..10_000 {
        let qv = match i % 10 {
            0 => 1.0,
            1 => 2.0,
            _ => rng.random_range(1.0..2.0),
        };
        let u: f64 = rng.random_range(-10.0..10.0);
        let chi: f64 = rng.random_range(0.01..5.0);
        let p = Prox::new(q(qv), chi).unwrap();
        let eta = p.eval(u);
        let scale = 1.0f64.max(u.abs());

        // stationarity of the scalar problem
        let fixed = if qv == 1.0 {
            if u.abs() > chi {
                (eta + chi * u.signum() - u).abs()
            } else {
                eta.abs()
            }
        } else if eta == 0.0 {
            // the root underflowed: v + chi q v^(q-1) must already exceed |u|
            // at the smallest positive double
            let tiny = f64::from_bits(1);
            if u == 0.0 || tiny + chi * qv * tiny.powf(qv - 1.0) >= u.abs() {
                0.0
            } else {
                u.abs()
            }
        } else {
            (eta + chi * qv * eta.abs().powf(qv - 1.0) * eta.signum() - u).abs()
        };
        worst_identity = worst_identity.max(fixed / scale);

        // odd symmetry
        worst_identity = worst_identity.max((p.eval(-u) + eta).abs() / scale);

        // nonexpansive
        let u2: f64 = rng.random_range(-10.0..10.0);
        let excess = (p.eval(u2) - eta).abs() - (u2 - u).abs();
        worst_identity = worst_identity.max(excess.max(0.0) / scale);

        // scaling eta(a u; a^(2-q) chi) = a eta(u; chi)
        let a: f64 = rng.random_range(0.1..10.0);
        let scaled = Prox::new(q(qv), a.powf(2.0 - qv) * chi).unwrap().eval(a * u);
        worst_identity = worst_identity.max((scaled - a * eta).abs() / (a * scale));

        // derivatives against central differences, away from kinks
        let near_kink = if qv == 1.0 {
            (u.abs() - chi).abs() < 1e-3
        } else {
            eta.abs() < 1e-2
        };
        if !near_kink {
            let h = 1e-6 * scale;
            let fd1 = (p.eval(u + h) - p.eval(u - h)) / (2.0 * h);
            worst_fd = worst_fd.max((fd1 - p.d1(u)).abs());
            if qv > 1.0 {
                let hc = 1e-6 * chi;
                let up = Prox::new(q(qv), chi + hc).unwrap().eval(u);
                let dn = Prox::new(q(qv), chi - hc).unwrap().eval(u);
                let fd2 = (up - dn) / (2.0 * hc);
                let d2 = p.d2(u).unwrap();
                worst_fd = worst_fd.max((fd2 - d2).abs() / 1.0f64.max(d2.abs()));
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = worst_identity <= 1e-10 && worst_fd <= 1e-6 && elapsed < Duration::from_secs(5);
    report(
        1,
        pass,
        elapsed,
        &format!("identity err {worst_identity:.2e} (<=1e-10), derivative err {worst_fd:.2e} (<=1e-6), budget 5s"),
    );
    assert!(pass);
}

#[test]
fn criterion_02_ridge_closed_form() {
    let _g = serial();
    let start = Instant::now();
    let eps = 0.4;
    let prior = pm1(eps);
    let m = eps;
    let mut worst = 0.0f64;
    for &delta in &[1.5, 2.0, 5.0] {
        for &sw in &[0.05, 0.1, 0.2] {
            // s^2 + (m (1 - 1/delta) - sw^2) s - sw^2 m = 0
            let w2 = sw * sw;
            let b = m * (1.0 - 1.0 / delta) - w2;
            let s = 0.5 * (-b + (b * b + 4.0 * w2 * m).sqrt());
            let fp = solve_tuned(delta, sw, q(2.0), &prior).unwrap();
            let got = fp.sigma_bar * fp.sigma_bar;
            worst = worst.max((got - s).abs() / s);
        }
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-8 && elapsed < Duration::from_secs(1);
    report(2, pass, elapsed, &format!("max rel err {worst:.2e} (<=1e-8), budget 1s"));
    assert!(pass);
}

/// `(1 - eps) E eta_1(Z; chi)^2 + eps (1 + chi^2)`, written out from erfc.
fn m1_oracle_objective(chi: f64, eps: f64) -> f64 {
    let tail = 0.5 * libm::erfc(chi / std::f64::consts::SQRT_2);
    let dens = (-0.5 * chi * chi).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let st2 = 2.0 * ((1.0 + chi * chi) * tail - chi * dens);
    (1.0 - eps) * st2 + eps * (1.0 + chi * chi)
}

fn m1_grid_oracle(eps: f64) -> f64 {
    let coarse = (0..=6000)
        .map(|i| i as f64 * 1e-3)
        .min_by(|a, b| m1_oracle_objective(*a, eps).total_cmp(&m1_oracle_objective(*b, eps)))
        .unwrap();
    let lo = (coarse - 2e-3).max(0.0);
    (0..=4000)
        .map(|i| m1_oracle_objective(lo + i as f64 * 1e-6, eps))
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn criterion_03_phase_curve() {
    let _g = serial();
    let start = Instant::now();
    let mut grid: Vec<f64> = vec![0.01];
    grid.extend((1..20).map(|i| i as f64 * 0.05));
    grid.push(0.99);
    let values: Vec<f64> = grid.iter().map(|&e| m1_curve(e).unwrap().m_value).collect();
    let increasing = values.windows(2).all(|w| w[1] > w[0]);
    let above = grid.iter().zip(&values).all(|(e, m)| m > e);
    let low = values[0] < 0.1;
    let high = *values.last().unwrap() > 0.9;
    let worst = grid
        .iter()
        .zip(&values)
        .map(|(&e, &m)| (m - m1_grid_oracle(e)).abs())
        .fold(0.0f64, f64::max);
    let elapsed = start.elapsed();
    let pass = increasing && above && low && high && worst <= 1e-5 && elapsed < Duration::from_secs(5);
    report(
        3,
        pass,
        elapsed,
        &format!(
            "increasing={increasing} above_diag={above} M1(0.01)={:.5} M1(0.99)={:.5} oracle err {worst:.2e} (<=1e-5), budget 5s",
            values[0],
            values.last().unwrap()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_04_second_order_constant() {
    let _g = serial();
    let start = Instant::now();
    let sigmas = [0.04, 0.02, 0.01, 0.005];
    let mut pass = true;
    let mut detail = Vec::new();
    for &(qv, delta, eps) in &[(1.5, 5.0, 0.7), (1.8, 5.0, 0.6), (1.6, 4.0, 0.7)] {
        let prior = pm1(eps);
        let coeff = expansion(delta, q(qv), &prior, 0.01)
            .unwrap()
            .second_order_coeff
            .unwrap();
        let ratios: Vec<f64> = sigmas
            .iter()
            .map(|&sw| {
                let fp = solve_tuned(delta, sw, q(qv), &prior).unwrap();
                (fp.amse - sw * sw / (1.0 - 1.0 / delta)) / sw.powf(2.0 * qv)
            })
            .collect();
        let devs: Vec<f64> = ratios.iter().map(|r| (r - coeff).abs() / coeff.abs()).collect();
        let shrinking = devs.windows(2).all(|w| w[1] < w[0]);
        let last = *devs.last().unwrap();
        // diagnostic only: Richardson extrapolation assuming a power-law remainder
        let (r1, r2, r3) = (ratios[1], ratios[2], ratios[3]);
        let extrap = r3 - (r3 - r2) * (r3 - r2) / ((r3 - r2) - (r2 - r1));
        pass &= last <= 0.10 && shrinking;
        detail.push(format!(
            "q={qv} delta={delta} eps={eps}: coeff {coeff:.5}, ratio@0.005 {r3:.5}, rel dev {last:.3} (<=0.10), monotone={shrinking}, extrapolated {extrap:.5}"
        ));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(120);
    report(4, pass, elapsed, &format!("{}; budget 120s", detail.join("; ")));
    assert!(pass);
}

#[test]
fn criterion_05_lasso_first_order() {
    let _g = serial();
    let start = Instant::now();
    let sigmas: Vec<f64> = (2..=25).map(|i| i as f64 * 0.01).collect();
    let mut worst = (0.0f64, 0.0, 0.0, 0.0);
    let mut cells = Vec::new();
    for &delta in &[1.1, 1.5, 2.0] {
        for &eps in &[0.25, 0.7] {
            let prior = pm1(eps);
            let mut cell_worst = 0.0f64;
            for &sw in &sigmas {
                let fp = solve_tuned(delta, sw, q(1.0), &prior).unwrap();
                let first = expansion(delta, q(1.0), &prior, sw).unwrap().first_order.unwrap();
                let gap = (fp.amse - first).abs() / fp.amse;
                cell_worst = cell_worst.max(gap);
                if gap > worst.0 {
                    worst = (gap, delta, eps, sw);
                }
            }
            cells.push(format!("({delta},{eps}):{cell_worst:.4}"));
        }
    }
    let elapsed = start.elapsed();
    let pass = worst.0 <= 0.02 && elapsed < Duration::from_secs(120);
    report(
        5,
        pass,
        elapsed,
        &format!(
            "max rel gap {:.4} (<=0.02) at delta={} eps={} sigma_w={}; per cell {}; budget 120s",
            worst.0,
            worst.1,
            worst.2,
            worst.3,
            cells.join(" ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_failure_regimes() {
    let _g = serial();
    let start = Instant::now();
    let eps = 0.4;
    let prior = pm1(eps);
    let floor = 0.1 * prior.second_moment();
    let bridge = solve_tuned(0.8, 1e-3, q(1.5), &prior).unwrap().amse;
    let delta_l = 0.5 * m1_curve(eps).unwrap().m_value;
    let lasso = solve_tuned(delta_l, 1e-3, q(1.0), &prior).unwrap().amse;
    let elapsed = start.elapsed();
    let pass = bridge > floor && lasso > floor && elapsed < Duration::from_secs(30);
    report(
        6,
        pass,
        elapsed,
        &format!("amse q=1.5,delta=0.8: {bridge:.4}; q=1,delta={delta_l:.4}: {lasso:.4}; floor {floor:.4}; budget 30s"),
    );
    assert!(pass);
}

#[test]
fn criterion_07_amp_matches_solver() {
    let _g = serial();
    let start = Instant::now();
    let (p, delta, eps, sw) = (2000, 2.0, 0.4, 0.1);
    let prior = pm1(eps);
    let inst = generate_instance(p, delta, &prior, sw, 7).unwrap();
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for &qv in &[1.0, 1.5, 2.0] {
        let fp = solve_tuned(delta, sw, q(qv), &prior).unwrap();
        let run = amp_run(&inst, q(qv), fp.chi_bar, 1000).unwrap();
        let solver = LqlsSolver::new(&inst, q(qv), SolverOptions::default());
        let sol = solver.solve(fp.lambda, None).unwrap();
        let gap = empirical_mse(
            run.last.beta_t.as_slice().unwrap(),
            sol.beta.as_slice().unwrap(),
        )
        .unwrap();
        worst = worst.max(gap);
        detail.push(format!("q={qv}: gap {gap:.2e} after {} AMP steps", run.last.t));
    }
    let elapsed = start.elapsed();
    let pass = worst < 1e-4 && elapsed < Duration::from_secs(300);
    report(7, pass, elapsed, &format!("{} (<1e-4); budget 300s", detail.join(", ")));
    assert!(pass);
}

#[test]
fn criterion_08_state_evolution_tracking() {
    let _g = serial();
    let start = Instant::now();
    let (p, delta, eps, sw, steps) = (5000, 2.0, 0.4, 0.1, 10);
    let prior = pm1(eps);
    let inst = generate_instance(p, delta, &prior, sw, 11).unwrap();
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for &qv in &[1.0, 1.5, 2.0] {
        let fp = solve_tuned(delta, sw, q(qv), &prior).unwrap();
        let run = amp_run(&inst, q(qv), fp.chi_bar, steps).unwrap();
        let theory = se_trace(delta, sw, q(qv), &prior, fp.chi_bar, steps).unwrap();
        let mut cell = 0.0f64;
        for s in &run.trace {
            cell = cell.max((s.mse - theory.mse[s.t]).abs() / s.mse_se);
        }
        worst = worst.max(cell);
        detail.push(format!("q={qv}: max |z| {cell:.2} over {} steps", run.trace.len() - 1));
    }
    let elapsed = start.elapsed();
    let pass = worst <= 3.0 && elapsed < Duration::from_secs(300);
    report(8, pass, elapsed, &format!("{} (<=3 SE); budget 300s", detail.join(", ")));
    assert!(pass);
}

#[test]
fn criterion_09_finite_sample_convergence() {
    let _g = serial();
    let start = Instant::now();
    let (delta, eps, sw, reps) = (1.5, 0.4, 0.1, 200u64);
    let prior = pm1(eps);
    let dims = [20usize, 50, 200, 400];
    let seeds: Vec<u64> = (0..reps).collect();
    let mut pass = true;
    let mut detail = Vec::new();
    for &qv in &[1.0, 1.5, 2.0] {
        let fp = solve_tuned(delta, sw, q(qv), &prior).unwrap();
        let grid = lambda_grid(fp.lambda, 10.0, 40).unwrap();
        let mut sds = Vec::new();
        let mut mean_at_max = f64::NAN;
        for &p in &dims {
            let spec = ReplicateSpec {
                p,
                delta,
                sigma_w: sw,
                q: q(qv),
                prior: prior.clone(),
                lambda_grid: grid.clone(),
                amp_chi: None,
                amp_max_t: 0,
                solver: SolverOptions {
                    tol: 1e-8,
                    ..SolverOptions::default()
                },
            };
            let mses: Vec<f64> = run_replicates(&spec, &seeds)
                .into_iter()
                .map(|r| r.unwrap().mse)
                .collect();
            let (m, sd) = mean_sd(&mses);
            sds.push(sd.ln());
            mean_at_max = m;
        }
        let logp: Vec<f64> = dims.iter().map(|&p| (p as f64).ln()).collect();
        let slope = ols_slope(&logp, &sds);
        let rel = (mean_at_max - fp.amse).abs() / fp.amse;
        pass &= rel <= 0.05 && (-0.65..=-0.35).contains(&slope);
        detail.push(format!(
            "q={qv}: mean {mean_at_max:.5} vs amse {:.5} rel {rel:.4} (<=0.05), sd slope {slope:.3} (in [-0.65,-0.35])",
            fp.amse
        ));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(1800);
    report(9, pass, elapsed, &format!("{}; budget 1800s", detail.join("; ")));
    assert!(pass);
}

#[test]
fn criterion_10_mass_at_zero_order() {
    let _g = serial();
    let start = Instant::now();
    let (delta, eps) = (1.5, 0.4);
    let prior = SignalPrior::power_density(eps, 1.0, 1.0).unwrap();
    let sigmas = [0.04, 0.02, 0.01, 0.005];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &sw in &sigmas {
        let fp = solve_tuned(delta, sw, q(1.0), &prior).unwrap();
        let first = expansion(delta, q(1.0), &prior, sw).unwrap().first_order.unwrap();
        xs.push(sw.ln());
        ys.push((first - fp.amse).ln());
    }
    let slope = ols_slope(&xs, &ys);
    let elapsed = start.elapsed();
    let pass = (slope - 3.0).abs() <= 0.3 && elapsed < Duration::from_secs(300);
    report(10, pass, elapsed, &format!("log-log slope {slope:.4} (3 +/- 0.3); budget 300s"));
    assert!(pass);
}
