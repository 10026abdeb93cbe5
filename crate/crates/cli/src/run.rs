//! Grid expansion and record generation for each experiment kind.

use bridge_core::finite_sample::{
    amp_run, generate_instance, lambda_grid, run_replicate, ReplicateSpec, SolverOptions,
};
use bridge_core::prior::SignalPrior;
use bridge_core::prox::{Exponent, Prox};
use bridge_core::quad::QuadratureRule;
use bridge_core::risk::mq_curve;
use bridge_core::state_evolution::{expansion, se_trace, solve_tuned, SEFixedPoint};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Kind};

pub const STATUS_OK: &str = "OK";

/// One CSV row: cells already formatted, plus its status.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub cells: Vec<String>,
    pub status: String,
}

impl Record {
    pub fn is_ok(&self) -> bool {
        self.status == STATUS_OK
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub kind: Kind,
    /// Column names, excluding the trailing `status`.
    pub columns: Vec<&'static str>,
    pub records: Vec<Record>,
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub quad_order: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            quad_order: bridge_core::quad::DEFAULT_HERMITE_ORDER,
        }
    }
}

/// Shortest round-trip decimal, so reruns are byte-identical.
pub fn fmt(x: f64) -> String {
    format!("{x}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

fn error_status(e: impl std::fmt::Display) -> String {
    format!("ERROR: {e}")
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn exponent(q: f64) -> Exponent {
    Exponent::new(q).expect("validated exponent")
}

/// Deterministic per-replicate seed.
pub fn replicate_seed(base: u64, cell: usize, rep: usize) -> u64 {
    splitmix64(splitmix64(base) ^ ((cell as u64) << 32) ^ rep as u64)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `(q, delta, epsilon, sigma_w)` in sorted order.
fn se_cells(cfg: &ExperimentConfig) -> Vec<(f64, f64, f64, f64)> {
    let mut out = Vec::new();
    for q in sorted(&cfg.grid.q) {
        for d in sorted(&cfg.grid.delta) {
            for e in sorted(&cfg.grid.epsilon) {
                for s in sorted(&cfg.sigma_grid()) {
                    out.push((q, d, e, s));
                }
            }
        }
    }
    out
}

pub fn run(cfg: &ExperimentConfig, opts: RunOptions) -> Table {
    let kind = cfg.kind.expect("validated config");
    match kind {
        Kind::Phase => run_phase(cfg),
        Kind::AmseCurve => run_amse(cfg, opts),
        Kind::ExpansionCheck => run_expansion(cfg),
        Kind::FiniteSample => run_finite_sample(cfg),
        Kind::AmpTrace => run_amp_trace(cfg),
    }
}

fn run_phase(cfg: &ExperimentConfig) -> Table {
    let cells: Vec<(f64, f64)> = sorted(&cfg.grid.q)
        .into_iter()
        .flat_map(|q| sorted(&cfg.grid.epsilon).into_iter().map(move |e| (q, e)))
        .collect();
    let records = cells
        .par_iter()
        .map(|&(q, e)| {
            let mut cells = vec![fmt(q), fmt(e)];
            match mq_curve(e, exponent(q)) {
                Ok(pt) => {
                    cells.extend([fmt(pt.m_value), fmt(pt.chi_star_star)]);
                    Record {
                        cells,
                        status: STATUS_OK.into(),
                    }
                }
                Err(err) => {
                    cells.extend([String::new(), String::new()]);
                    Record {
                        cells,
                        status: error_status(err),
                    }
                }
            }
        })
        .collect();
    Table {
        kind: Kind::Phase,
        columns: vec!["q", "epsilon", "m_value", "chi_star_star"],
        records,
    }
}

/// The noiseless limit: zero risk above the phase transition, not computed
/// below it.
fn noiseless(q: f64, delta: f64, eps: f64) -> Result<(), String> {
    let m = mq_curve(eps, exponent(q)).map_err(|e| e.to_string())?.m_value;
    if delta > m {
        Ok(())
    } else {
        Err("noiseless limit below the phase transition is not computed".into())
    }
}

/// `E (eta(B + sigma Z; theta) - B)^2` by Gauss-Hermite, as an independent
/// check of the adaptive value.
fn amse_by_hermite(fp: &SEFixedPoint, order: usize) -> bridge_core::error::Result<f64> {
    let rule = QuadratureRule::gauss_hermite(order);
    let prox = Prox::new(fp.q, fp.threshold)?;
    let s = fp.sigma_bar;
    fp.prior.expect_bz(
        |b, z| {
            let d = prox.eval(b + s * z) - b;
            d * d
        },
        &rule,
    )
}

fn run_amse(cfg: &ExperimentConfig, opts: RunOptions) -> Table {
    let cells = se_cells(cfg);
    let records = cells
        .par_iter()
        .map(|&(q, d, e, s)| {
            let mut row = vec![fmt(q), fmt(d), fmt(e), fmt(s)];
            let prior = match cfg.prior.build(e) {
                Ok(p) => p,
                Err(err) => return failed(row, 7, err),
            };
            if s == 0.0 {
                return match noiseless(q, d, e) {
                    Ok(()) => {
                        row.extend([
                            fmt(0.0),
                            fmt(0.0),
                            String::new(),
                            String::new(),
                            String::new(),
                            fmt(0.0),
                            fmt(0.0),
                        ]);
                        Record {
                            cells: row,
                            status: STATUS_OK.into(),
                        }
                    }
                    Err(msg) => failed(row, 7, msg),
                };
            }
            let fp = match solve_tuned(d, s, exponent(q), &prior) {
                Ok(fp) => fp,
                Err(err) => return failed(row, 7, err),
            };
            let gh = amse_by_hermite(&fp, opts.quad_order);
            let exp = expansion(d, exponent(q), &prior, s).ok();
            row.extend([
                fmt(fp.amse),
                fmt(fp.sigma_bar),
                fmt(fp.chi_bar),
                fmt(fp.lambda),
                fmt_opt(gh.as_ref().ok().copied()),
                fmt_opt(exp.and_then(|x| x.first_order)),
                fmt_opt(exp.and_then(|x| x.second_order(s))),
            ]);
            let status = if let Err(err) = gh {
                error_status(err)
            } else if !(fp.chi_bar.is_finite() && fp.lambda.is_finite()) {
                "ERROR: optimal threshold is infinite (estimator is identically zero)".into()
            } else {
                STATUS_OK.into()
            };
            Record { cells: row, status }
        })
        .collect();
    Table {
        kind: Kind::AmseCurve,
        columns: vec![
            "q",
            "delta",
            "epsilon",
            "sigma_w",
            "amse",
            "sigma_bar",
            "chi_bar",
            "lambda",
            "amse_gh",
            "first_order",
            "second_order",
        ],
        records,
    }
}

fn failed(mut row: Vec<String>, blanks: usize, err: impl std::fmt::Display) -> Record {
    row.extend(std::iter::repeat_n(String::new(), blanks));
    Record {
        cells: row,
        status: error_status(err),
    }
}

fn rel_gap(amse: f64, approx: Option<f64>) -> Option<f64> {
    approx.map(|a| (amse - a).abs() / amse)
}

fn run_expansion(cfg: &ExperimentConfig) -> Table {
    let cells = se_cells(cfg);
    let records = cells
        .par_iter()
        .map(|&(q, d, e, s)| {
            let mut row = vec![fmt(q), fmt(d), fmt(e), fmt(s)];
            let prior = match cfg.prior.build(e) {
                Ok(p) => p,
                Err(err) => return failed(row, 7, err),
            };
            let probe = if s == 0.0 { 1e-3 } else { s };
            let exp = match expansion(d, exponent(q), &prior, probe) {
                Ok(x) => x,
                Err(err) => return failed(row, 7, err),
            };
            if s == 0.0 {
                return match noiseless(q, d, e) {
                    Ok(()) => {
                        row.extend([
                            exp.regime.to_string(),
                            fmt(0.0),
                            fmt(0.0),
                            fmt(0.0),
                            fmt_opt(exp.second_order_power),
                            String::new(),
                            String::new(),
                        ]);
                        Record {
                            cells: row,
                            status: STATUS_OK.into(),
                        }
                    }
                    Err(msg) => failed(row, 7, msg),
                };
            }
            let fp = match solve_tuned(d, s, exponent(q), &prior) {
                Ok(fp) => fp,
                Err(err) => return failed(row, 7, err),
            };
            let second = exp.second_order(s);
            row.extend([
                exp.regime.to_string(),
                fmt(fp.amse),
                fmt_opt(exp.first_order),
                fmt_opt(second),
                fmt_opt(exp.second_order_power),
                fmt_opt(rel_gap(fp.amse, exp.first_order)),
                fmt_opt(rel_gap(fp.amse, second)),
            ]);
            Record {
                cells: row,
                status: STATUS_OK.into(),
            }
        })
        .collect();
    Table {
        kind: Kind::ExpansionCheck,
        columns: vec![
            "q",
            "delta",
            "epsilon",
            "sigma_w",
            "regime",
            "amse",
            "first_order",
            "second_order",
            "second_order_power",
            "gap_first",
            "gap_second",
        ],
        records,
    }
}

struct SimCell {
    q: f64,
    delta: f64,
    eps: f64,
    sigma_w: f64,
    p: usize,
    prior: Option<SignalPrior>,
    fixed_point: Result<SEFixedPoint, String>,
}

fn sim_cells(cfg: &ExperimentConfig) -> Vec<SimCell> {
    let mut coords = Vec::new();
    for (q, d, e, s) in se_cells(cfg) {
        let mut ps = cfg.grid.p.clone();
        ps.sort_unstable();
        ps.dedup();
        for p in ps {
            coords.push((q, d, e, s, p));
        }
    }
    coords
        .par_iter()
        .map(|&(q, delta, eps, sigma_w, p)| {
            let prior = cfg.prior.build(eps).ok();
            let fixed_point = match &prior {
                Some(pr) => solve_tuned(delta, sigma_w, exponent(q), pr).map_err(|e| e.to_string()),
                None => Err("invalid prior".into()),
            };
            SimCell {
                q,
                delta,
                eps,
                sigma_w,
                p,
                prior,
                fixed_point,
            }
        })
        .collect()
}

fn sim_prefix(c: &SimCell, rep: usize, seed: u64) -> Vec<String> {
    vec![
        fmt(c.q),
        fmt(c.delta),
        fmt(c.eps),
        fmt(c.sigma_w),
        c.p.to_string(),
        rep.to_string(),
        seed.to_string(),
    ]
}

fn run_finite_sample(cfg: &ExperimentConfig) -> Table {
    let cells = sim_cells(cfg);
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.replicates).map(move |r| (c, r)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(ci, rep)| {
            let c = &cells[ci];
            let seed = replicate_seed(cfg.seed, ci, rep);
            let row = sim_prefix(c, rep, seed);
            let fp = match &c.fixed_point {
                Ok(fp) => fp,
                Err(msg) => return failed(row, 5, msg),
            };
            let grid = match lambda_grid(fp.lambda, 10.0, cfg.lambda_points) {
                Ok(g) => g,
                Err(err) => return failed(row, 5, err),
            };
            let spec = ReplicateSpec {
                p: c.p,
                delta: c.delta,
                sigma_w: c.sigma_w,
                q: exponent(c.q),
                prior: c.prior.clone().expect("prior built with fixed point"),
                lambda_grid: grid,
                amp_chi: cfg.amp.then_some(fp.chi_bar),
                amp_max_t: cfg.iterations,
                solver: SolverOptions {
                    tol: cfg.tol,
                    ..SolverOptions::default()
                },
            };
            match run_replicate(&spec, seed) {
                Ok(r) => {
                    let mut row = row;
                    row.extend([
                        fmt(r.lambda_best),
                        fmt(r.mse),
                        r.amp_iters.map(|t| t.to_string()).unwrap_or_default(),
                        fmt_opt(r.amp_gap),
                        fmt(fp.amse),
                    ]);
                    let status = match r.amp_error {
                        Some(e) => error_status(format_args!("AMP: {e}")),
                        None => STATUS_OK.into(),
                    };
                    Record { cells: row, status }
                }
                Err(err) => failed(row, 5, err),
            }
        })
        .collect();
    Table {
        kind: Kind::FiniteSample,
        columns: vec![
            "q",
            "delta",
            "epsilon",
            "sigma_w",
            "p",
            "replicate",
            "seed",
            "lambda_best",
            "mse",
            "amp_iters",
            "amp_gap",
            "amse",
        ],
        records,
    }
}

fn run_amp_trace(cfg: &ExperimentConfig) -> Table {
    let cells = sim_cells(cfg);
    let steps = cfg.iterations;
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.replicates).map(move |r| (c, r)))
        .collect();
    let blocks: Vec<Vec<Record>> = jobs
        .par_iter()
        .map(|&(ci, rep)| {
            let c = &cells[ci];
            let seed = replicate_seed(cfg.seed, ci, rep);
            let with_t = |t: usize| {
                let mut row = sim_prefix(c, rep, seed);
                row.push(t.to_string());
                row
            };
            let all_failed = |msg: String| -> Vec<Record> {
                (0..=steps).map(|t| failed(with_t(t), 6, &msg)).collect()
            };
            let fp = match &c.fixed_point {
                Ok(fp) => fp,
                Err(msg) => return all_failed(msg.clone()),
            };
            let prior = c.prior.as_ref().expect("prior built with fixed point");
            let q = exponent(c.q);
            let theory = match se_trace(c.delta, c.sigma_w, q, prior, fp.chi_bar, steps) {
                Ok(t) => t,
                Err(err) => return all_failed(err.to_string()),
            };
            let run = generate_instance(c.p, c.delta, prior, c.sigma_w, seed)
                .and_then(|inst| amp_run(&inst, q, fp.chi_bar, steps));
            let run = match run {
                Ok(r) => r,
                Err(err) => return all_failed(err.to_string()),
            };
            (0..=steps)
                .map(|t| {
                    let mut row = with_t(t);
                    // a converged run stops early; later rows repeat its final state
                    let s = run.trace[t.min(run.trace.len() - 1)];
                    row.extend([
                        fmt(s.tau * s.tau),
                        fmt(theory.tau2[t]),
                        fmt(s.mse),
                        fmt(s.mse_se),
                        fmt(theory.mse[t]),
                        fmt(s.threshold),
                    ]);
                    Record {
                        cells: row,
                        status: STATUS_OK.into(),
                    }
                })
                .collect()
        })
        .collect();
    Table {
        kind: Kind::AmpTrace,
        columns: vec![
            "q",
            "delta",
            "epsilon",
            "sigma_w",
            "p",
            "replicate",
            "seed",
            "t",
            "tau2",
            "tau2_theory",
            "mse",
            "mse_se",
            "mse_theory",
            "threshold",
        ],
        records: blocks.into_iter().flatten().collect(),
    }
}
