//! Concurrent classification of a grid of initial conditions. Rows run on
//! scoped worker threads with per-row seeds derived from the master seed,
//! return in-memory results, and a single coordinator merges them by index,
//! so the report is byte-identical at any parallelism.

use std::collections::BTreeMap;
use std::thread;

use nalgebra::DVector;
use serde::Serialize;
use slowflow::classify::classify_rate;
use slowflow::integrate::{gradient_flow, polar_track};
use slowflow::{
    ClassifierConfig, CriticalCatalog, IntegratorConfig, Polynomial, RateVerdict,
};

use crate::artifacts::{ArtifactSet, sha256_hex};
use crate::config::PerturbationSection;
use crate::experiments::Context;
use crate::report::termination_str;
use crate::{Failure, cfg_err};

#[derive(Debug, Clone, Serialize)]
struct RowDto {
    index: usize,
    seed: u64,
    initial: Vec<f64>,
    /// "case1" | "case2" | "exponential" | "inconclusive" | "error"
    verdict: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta_star: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_tail_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    termination: Option<&'static str>,
}

impl RowDto {
    fn blank(index: usize, seed: u64, initial: &[f64]) -> Self {
        RowDto {
            index,
            seed,
            initial: initial.to_vec(),
            verdict: "error",
            gamma: None,
            beta: None,
            alpha0: None,
            theta_star: None,
            max_tail_distance: None,
            reason: None,
            error: None,
            termination: None,
        }
    }
}

#[derive(Serialize)]
struct BasinDto {
    theta: Vec<f64>,
    count: usize,
}

#[derive(Serialize)]
struct SweepReport {
    n_rows: usize,
    n_failed: usize,
    /// As configured; the effective worker count is machine-dependent and
    /// must not leak into the report.
    parallelism: Option<usize>,
    verdict_counts: BTreeMap<&'static str, usize>,
    /// Case-1 rows grouped by their limit direction.
    basins: Vec<BasinDto>,
    rows: Vec<RowDto>,
}

/// Per-row seed: a hash of (master seed, row index) so rows are independent
/// of each other and of the worker that picks them up.
fn row_seed(master: u64, index: usize) -> u64 {
    let mut bytes = [0u8; 16];
    bytes[..8].copy_from_slice(&master.to_le_bytes());
    bytes[8..].copy_from_slice(&(index as u64).to_le_bytes());
    let hex = sha256_hex(&bytes);
    u64::from_str_radix(&hex[..16], 16).expect("hex digest")
}

struct SweepEnv<'a> {
    f: &'a Polynomial,
    p: u32,
    f_p: &'a Polynomial,
    catalog: &'a CriticalCatalog,
    icfg: &'a IntegratorConfig,
    ccfg: &'a ClassifierConfig,
    pert: Option<&'a PerturbationSection>,
    master_seed: u64,
}

fn run_row(env: &SweepEnv, index: usize, ic: &[f64]) -> RowDto {
    let seed = row_seed(env.master_seed, index);
    let mut row = RowDto::blank(index, seed, ic);
    let z0 = DVector::from_row_slice(ic);
    let pert = env.pert.map(|ps| ps.build(seed));
    let traj = match gradient_flow(env.f, pert.as_ref(), &z0, env.icfg) {
        Ok(t) => t,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    row.termination = Some(termination_str(traj.termination));
    let polar = match polar_track(&traj, env.p, env.f_p, env.icfg.floor_tol) {
        Ok(p) => p,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    let rate = match classify_rate(&traj, &polar, env.p, env.catalog, env.ccfg) {
        Ok(r) => r,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    match rate.verdict {
        RateVerdict::Exponential { gamma } => {
            row.verdict = "exponential";
            row.gamma = Some(gamma);
        }
        RateVerdict::AlgebraicCase1 {
            beta,
            theta_star,
            alpha0,
        } => {
            row.verdict = "case1";
            row.beta = Some(beta);
            row.alpha0 = Some(alpha0);
            row.theta_star = Some(theta_star.iter().copied().collect());
        }
        RateVerdict::AlgebraicCase2 {
            max_tail_distance, ..
        } => {
            row.verdict = "case2";
            row.max_tail_distance = Some(max_tail_distance);
        }
        RateVerdict::Inconclusive { reason } => {
            row.verdict = "inconclusive";
            row.reason = Some(reason);
        }
    }
    row
}

fn initial_conditions(ctx: &Context, dim: usize) -> Result<Vec<Vec<f64>>, Failure> {
    let sec = ctx
        .run
        .sweep
        .as_ref()
        .ok_or_else(|| Failure::Config("sweep: section required".into()))?;
    let mut ics: Vec<Vec<f64>> = Vec::new();
    if let Some(list) = &sec.initials {
        for (i, ic) in list.iter().enumerate() {
            if ic.len() != dim {
                return Err(Failure::Config(format!(
                    "sweep.initials[{i}]: expected {dim} coordinates, got {}",
                    ic.len()
                )));
            }
            ics.push(ic.clone());
        }
    }
    if let Some(c) = &sec.circle {
        if dim < 2 {
            return Err(Failure::Config(
                "sweep.circle needs at least two variables".into(),
            ));
        }
        if !(c.radius.is_finite() && c.radius > 0.0) {
            return Err(Failure::Config(format!(
                "sweep.circle.radius must be positive, got {}",
                c.radius
            )));
        }
        for k in 0..c.count {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / c.count as f64;
            let mut ic = vec![0.0; dim];
            ic[0] = c.radius * angle.cos();
            ic[1] = c.radius * angle.sin();
            ics.push(ic);
        }
    }
    let limit = sec.limit.unwrap_or(256);
    if ics.len() > limit {
        return Err(Failure::Config(format!(
            "sweep: {} initial conditions exceed the limit {limit}",
            ics.len()
        )));
    }
    Ok(ics)
}

pub fn run(ctx: &Context) -> Result<(), Failure> {
    let f = ctx.run.system.resolve(ctx.config_dir)?;
    let lp = f
        .order_of_integrability(crate::experiments::LEADING_TOL)
        .map_err(cfg_err)?;
    let ics = initial_conditions(ctx, f.dim())?;
    let sec = ctx.run.sweep.as_ref().expect("checked above");
    let icfg = ctx.run.integrator.fold();
    let ccfg = ctx.run.classifier.fold();

    let mut set = ArtifactSet::new(ctx.out_dir);
    if ics.is_empty() {
        let report = SweepReport {
            n_rows: 0,
            n_failed: 0,
            parallelism: sec.parallelism,
            verdict_counts: BTreeMap::new(),
            basins: Vec::new(),
            rows: Vec::new(),
        };
        ctx.say("sweep: empty grid".to_string());
        set.write_json("sweep_report.json", &report)?;
        return ctx.finish(set);
    }

    let catalog = crate::experiments::catalog_for(ctx, &lp.part)?;
    set.mark("catalog");

    let workers = sec
        .parallelism
        .unwrap_or_else(|| thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .clamp(1, ics.len());
    let env = SweepEnv {
        f: &f,
        p: lp.degree,
        f_p: &lp.part,
        catalog: &catalog,
        icfg: &icfg,
        ccfg: &ccfg,
        pert: sec.perturbation.as_ref(),
        master_seed: ctx.run.seed,
    };
    let mut rows: Vec<RowDto> = Vec::with_capacity(ics.len());
    thread::scope(|s| {
        let env = &env;
        let ics = &ics;
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                s.spawn(move || {
                    let mut out = Vec::new();
                    let mut index = w;
                    while index < ics.len() {
                        out.push(run_row(env, index, &ics[index]));
                        index += workers;
                    }
                    out
                })
            })
            .collect();
        for h in handles {
            rows.extend(h.join().expect("sweep worker panicked"));
        }
    });
    rows.sort_by_key(|r| r.index);
    set.mark("rows");

    let mut verdict_counts: BTreeMap<&'static str, usize> = BTreeMap::new();
    for row in &rows {
        *verdict_counts.entry(row.verdict).or_insert(0) += 1;
    }
    // theta_star is always a catalog point, so identical limits have
    // identical bits and the exact formatting is a sound group key
    let mut basin_map: BTreeMap<String, BasinDto> = BTreeMap::new();
    for row in &rows {
        if let Some(theta) = &row.theta_star {
            let key = theta
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(",");
            basin_map
                .entry(key)
                .or_insert_with(|| BasinDto {
                    theta: theta.clone(),
                    count: 0,
                })
                .count += 1;
        }
    }
    let n_failed = rows.iter().filter(|r| r.verdict == "error").count();
    let report = SweepReport {
        n_rows: rows.len(),
        n_failed,
        parallelism: sec.parallelism,
        verdict_counts,
        basins: basin_map.into_values().collect(),
        rows,
    };
    let counts = report
        .verdict_counts
        .iter()
        .map(|(k, v)| format!("{k} {v}"))
        .collect::<Vec<_>>()
        .join(", ");
    ctx.say(format!(
        "sweep: {} row(s) on {workers} worker(s): {counts}",
        report.n_rows
    ));
    set.write_json("sweep_report.json", &report)?;
    ctx.finish(set)
}
