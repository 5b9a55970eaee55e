//! One runner per experiment kind. Each builds its inputs from the config,
//! calls into the library, writes the artifacts, and picks the exit class:
//! bad inputs are config errors, broken runs are numerical, and analyses
//! that cannot decide are inconclusive.

use std::path::Path;

use nalgebra::DVector;
use slowflow::classify::{
    detect_exponential, detect_exponential_series, elliptic_kernel_coords, neutral_mode_residual,
    parabolic_kernel_coords, secant_arclength,
};
use slowflow::integrate::{elliptic_flow, elliptic_slow_flow, gradient_flow, parabolic_flow, polar_track};
use slowflow::reduction::{ModelSystem, reduced_functional};
use slowflow::sphere::{adams_simon_check, find_critical_points, lojasiewicz_fit, predicted_beta};
use slowflow::spectral::{basis_psi, verify_spectral_identities};
use slowflow::{
    AdamsSimonVerdict, CriticalCatalog, EllipticRun, IntegratorConfig, ModeLabel,
    NonlinearPerturbation, PolarSeries, Polynomial, RateReport, ResidualMode, SpectralSystem,
    Termination, Trajectory,
};

use crate::artifacts::ArtifactSet;
use crate::config::RunConfig;
use crate::report::{
    AdamsSimonDto, ArcDto, ClassifyReport, CriticalReport, EllipticReport, FastDecayDto,
    FlowReport, LojasiewiczDto, ManifoldDto, ParabolicReport, PointDto, ReductionDto, ResidualDto,
    SlowManifoldReport, SpectralReportDto, TPowDto, mode_class_str, termination_str,
};
use crate::{Failure, cfg_err, inc_err, num_err};

/// Zero tolerance when extracting the leading homogeneous part; matches the
/// one the integrator uses internally so the CLI and the flows agree on p.
pub(crate) const LEADING_TOL: f64 = 1e-10;

pub struct Context<'a> {
    pub run: &'a RunConfig,
    pub config_dir: &'a Path,
    pub config_hash: &'a str,
    pub out_dir: &'a Path,
    pub quiet: bool,
}

impl Context<'_> {
    pub(crate) fn say(&self, msg: impl std::fmt::Display) {
        if !self.quiet {
            println!("{msg}");
        }
    }

    pub(crate) fn finish(&self, set: ArtifactSet) -> Result<(), Failure> {
        let names = set.finish(self.run.experiment, self.config_hash, self.run.seed)?;
        self.say(format!(
            "wrote {} to {}",
            names.join(", "),
            self.out_dir.display()
        ));
        Ok(())
    }

    fn potential(&self) -> Result<Polynomial, Failure> {
        self.run.system.resolve(self.config_dir)
    }
}

fn leading(f: &Polynomial) -> Result<(u32, Polynomial), Failure> {
    let lp = f.order_of_integrability(LEADING_TOL).map_err(cfg_err)?;
    Ok((lp.degree, lp.part))
}

fn column_block(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

pub fn reduce(ctx: &Context) -> Result<(), Failure> {
    let f = ctx.potential()?;
    let sec = ctx.run.reduce.clone().unwrap_or_default();
    let model = ModelSystem::new(f).map_err(cfg_err)?;
    let mut set = ArtifactSet::new(ctx.out_dir);
    let red = reduced_functional(&model, sec.fit_degree, sec.domain_radius, sec.grid)
        .map_err(num_err)?;
    set.mark("reduce");
    ctx.say(format!(
        "reduce: kernel dim {}, p = {}, fit residual sup {:.3e}",
        model.kernel_dim(),
        red.p,
        red.residual_sup
    ));
    set.write_json(
        "reduction.json",
        &ReductionDto::new(&red, model.kernel_dim(), model.eigenvalues()),
    )?;
    ctx.finish(set)
}

pub fn critical(ctx: &Context) -> Result<(), Failure> {
    let f = ctx.potential()?;
    let sec = ctx.run.critical.clone().unwrap_or_default();
    let (degree, f_p) = match sec.degree {
        Some(d) => {
            let part = f.homogeneous_part(d);
            if part.is_zero() {
                return Err(Failure::Config(format!(
                    "critical.degree: no terms of degree {d}"
                )));
            }
            (d, part)
        }
        None => leading(&f)?,
    };
    let mut set = ArtifactSet::new(ctx.out_dir);
    let catalog = find_critical_points(
        &f_p,
        sec.n_starts.unwrap_or(64),
        ctx.run.seed,
        sec.tol.unwrap_or(1e-10),
    )
    .map_err(num_err)?;
    set.mark("search");
    let verdict = adams_simon_check(&f_p, &catalog, sec.m).map_err(cfg_err)?;
    let witness = match &verdict {
        AdamsSimonVerdict::Positivity { witness, .. }
        | AdamsSimonVerdict::NonNegativityOnly { witness, .. } => Some(witness),
        AdamsSimonVerdict::Fails { .. } => None,
    };
    let loja = match (&sec.lojasiewicz, witness) {
        (Some(l), Some(w)) => Some(LojasiewiczDto::from(
            &lojasiewicz_fit(
                &f_p,
                w,
                l.samples.unwrap_or(256),
                l.radius.unwrap_or(0.05),
                ctx.run.seed,
            )
            .map_err(num_err)?,
        )),
        _ => None,
    };
    ctx.say(format!(
        "critical: {} point(s), {} value(s), {} suspected manifold(s)",
        catalog.points.len(),
        catalog.values.len(),
        catalog.manifolds.len()
    ));
    let report = CriticalReport {
        degree,
        catalog: (&catalog).into(),
        points: catalog.points.iter().map(PointDto::from).collect(),
        manifolds: catalog
            .manifolds
            .iter()
            .map(|m| ManifoldDto {
                cluster_id: m.cluster_id,
                value: m.value,
                start_share: m.start_share,
                angular_spread: m.angular_spread,
                representative: PointDto::from(&m.representative),
            })
            .collect(),
        n_starts: catalog.n_starts,
        n_converged: catalog.n_converged,
        adams_simon: AdamsSimonDto::from(&verdict),
        lojasiewicz: loja,
    };
    set.write_json("critical.json", &report)?;
    ctx.finish(set)
}

struct FlowOutput {
    traj: Trajectory,
    polar: PolarSeries,
    p: u32,
    f_p: Polynomial,
}

fn run_gradient_flow(ctx: &Context, icfg: &IntegratorConfig) -> Result<FlowOutput, Failure> {
    let f = ctx.potential()?;
    let sec = ctx
        .run
        .flow
        .as_ref()
        .ok_or_else(|| Failure::Config("flow: section required".into()))?;
    let (p, f_p) = leading(&f)?;
    let pert = sec.perturbation.as_ref().map(|p| p.build(ctx.run.seed));
    let z0 = DVector::from_row_slice(&sec.initial);
    let traj = gradient_flow(&f, pert.as_ref(), &z0, icfg).map_err(cfg_err)?;
    let polar = polar_track(&traj, p, &f_p, icfg.floor_tol).map_err(num_err)?;
    Ok(FlowOutput { traj, polar, p, f_p })
}

/// t, z_*, r, theta_*, fhat, t_pow_r over the polar prefix of the samples.
fn write_flow_csv(set: &mut ArtifactSet, out: &FlowOutput) -> Result<(), Failure> {
    let dim = out.f_p.dim();
    let mut header = vec!["t".to_string()];
    header.extend(column_block("z", dim));
    header.push("r".to_string());
    header.extend(column_block("theta", dim));
    header.push("fhat".to_string());
    header.push("t_pow_r".to_string());
    let n = out.polar.times.len();
    let rows = (0..n).map(|k| {
        let mut row = Vec::with_capacity(2 * dim + 3);
        row.push(out.polar.times[k]);
        row.extend(out.traj.states[k].iter());
        row.push(out.polar.r[k]);
        row.extend(out.polar.theta[k].iter());
        row.push(out.polar.fhat[k]);
        row.push(out.polar.t_pow_r[k]);
        row
    });
    set.write_csv("trajectory.csv", &header, rows)
}

fn flow_report(out: &FlowOutput, t_end: f64) -> FlowReport {
    let arc = secant_arclength(&out.polar);
    let last = out.polar.times.len().saturating_sub(1);
    FlowReport {
        termination: termination_str(out.traj.termination),
        n_accepted: out.traj.n_accepted,
        n_rejected: out.traj.n_rejected,
        final_time: out.polar.times[last],
        final_state: out.traj.states[last].iter().copied().collect(),
        final_radius: out.polar.r[last],
        final_t_pow_r: out.polar.t_pow_r[last],
        final_fhat: out.polar.fhat[last],
        arc: ArcDto::new(&arc, t_end),
        polar_truncated: out.polar.truncated,
        p: out.p,
    }
}

pub fn flow(ctx: &Context) -> Result<(), Failure> {
    let icfg = ctx.run.integrator.fold();
    let mut set = ArtifactSet::new(ctx.out_dir);
    let out = run_gradient_flow(ctx, &icfg)?;
    set.mark("integrate");
    let report = flow_report(&out, icfg.t_end);
    ctx.say(format!(
        "flow: {} at t = {:.3e}, r = {:.3e}, t_pow_r = {:.6}",
        report.termination, report.final_time, report.final_radius, report.final_t_pow_r
    ));
    write_flow_csv(&mut set, &out)?;
    set.write_json("flow_report.json", &report)?;
    ctx.finish(set)?;
    if matches!(out.traj.termination, Termination::StepFailure) {
        return Err(Failure::Numerical(
            "integration stalled before the horizon".into(),
        ));
    }
    Ok(())
}

pub(crate) fn catalog_for(ctx: &Context, f_p: &Polynomial) -> Result<CriticalCatalog, Failure> {
    let sec = ctx.run.critical.clone().unwrap_or_default();
    find_critical_points(
        f_p,
        sec.n_starts.unwrap_or(64),
        ctx.run.seed,
        sec.tol.unwrap_or(1e-10),
    )
    .map_err(num_err)
}

pub fn classify(ctx: &Context) -> Result<(), Failure> {
    let icfg = ctx.run.integrator.fold();
    let ccfg = ctx.run.classifier.fold();
    let mut set = ArtifactSet::new(ctx.out_dir);
    let out = run_gradient_flow(ctx, &icfg)?;
    set.mark("integrate");
    let catalog = catalog_for(ctx, &out.f_p)?;
    set.mark("catalog");
    let rate = match slowflow::classify::classify_rate(&out.traj, &out.polar, out.p, &catalog, &ccfg)
    {
        Ok(rate) => rate,
        // keep the trajectory for inspection even when classification
        // cannot run at all
        Err(e) => {
            write_flow_csv(&mut set, &out)?;
            ctx.finish(set)?;
            return Err(inc_err(e));
        }
    };
    let arc = secant_arclength(&out.polar);
    let report = ClassifyReport::new(
        &rate,
        ArcDto::new(&arc, icfg.t_end),
        out.traj.termination,
        &catalog,
    );
    ctx.say(describe_verdict(&rate));
    write_flow_csv(&mut set, &out)?;
    set.write_json("report.json", &report)?;
    ctx.finish(set)?;
    match &rate.verdict {
        slowflow::RateVerdict::Inconclusive { reason } => Err(Failure::Inconclusive(reason.clone())),
        _ if matches!(out.traj.termination, Termination::StepFailure) => Err(Failure::Numerical(
            "integration stalled before the horizon".into(),
        )),
        _ => Ok(()),
    }
}

fn describe_verdict(rate: &RateReport) -> String {
    match &rate.verdict {
        slowflow::RateVerdict::Exponential { gamma } => {
            format!("classify: exponential decay, rate {gamma:.6}")
        }
        slowflow::RateVerdict::AlgebraicCase1 {
            beta,
            theta_star,
            alpha0,
        } => format!(
            "classify: Case 1, beta = {beta:.6}, alpha0 = {alpha0:.6}, theta* = {:?}",
            theta_star.iter().copied().collect::<Vec<_>>()
        ),
        slowflow::RateVerdict::AlgebraicCase2 {
            max_tail_distance, ..
        } => format!(
            "classify: Case 2, rescaled radius diverges, tail distance {max_tail_distance:.3e}"
        ),
        slowflow::RateVerdict::Inconclusive { reason } => {
            format!("classify: inconclusive ({reason})")
        }
    }
}

pub fn parabolic(ctx: &Context) -> Result<(), Failure> {
    let f = ctx.potential()?;
    let sec = ctx
        .run
        .parabolic
        .as_ref()
        .ok_or_else(|| Failure::Config("parabolic: section required".into()))?;
    let icfg = ctx.run.integrator.fold();
    let ccfg = ctx.run.classifier.fold();
    let model = ModelSystem::new(f).map_err(cfg_err)?;
    let extra = sec
        .nonlinear
        .clone()
        .map(NonlinearPerturbation::new)
        .transpose()
        .map_err(cfg_err)?;
    let u0 = DVector::from_row_slice(&sec.initial);
    let mut set = ArtifactSet::new(ctx.out_dir);
    let run = parabolic_flow(&model, extra.as_ref(), &u0, &icfg).map_err(cfg_err)?;
    set.mark("integrate");
    let red = reduced_functional(&model, None, None, None).map_err(num_err)?;
    set.mark("reduce");

    let mut note = None;
    let rate = match detect_exponential(&run.trajectory, ccfg.tail_fraction, &ccfg) {
        Ok(fit) => fit,
        Err(e) => {
            note = Some(format!("rate fit unavailable: {e}"));
            None
        }
    };
    let xs = parabolic_kernel_coords(&model, &run).map_err(num_err)?;
    let mags: Vec<f64> = xs.iter().map(|x| x.norm()).collect();
    let exponent = 1.0 / (red.p as f64 - 2.0);
    let neutral = TPowDto::over_last_decade(&run.trajectory.times, &mags, exponent);
    // the limit direction of the kernel coordinates fixes the predicted level
    let (alpha0, beta) = match xs.last().filter(|x| x.norm() > 0.0) {
        Some(x) => {
            let theta = x / x.norm();
            let a = red.f_p.evaluate(theta.as_slice());
            (Some(a), predicted_beta(red.p, a).ok())
        }
        None => (None, None),
    };
    let residual = match neutral_mode_residual(
        &run.trajectory.times,
        &xs,
        &red,
        ResidualMode::Parabolic,
        sec.eps.unwrap_or(0.25),
        &ccfg,
    ) {
        Ok(r) => Some(r),
        Err(e) => {
            note = Some(format!("neutral residual unavailable: {e}"));
            None
        }
    };

    let n_modes = run.mode_coords.first().map(|m| m.len()).unwrap_or(0);
    let mut header = vec!["t".to_string()];
    header.extend(column_block("u", model.dim()));
    header.extend(column_block("mode", n_modes));
    let rows = run.trajectory.times.iter().enumerate().map(|(k, t)| {
        let mut row = vec![*t];
        row.extend(run.trajectory.states[k].iter());
        row.extend(run.mode_coords[k].iter());
        row
    });
    set.write_csv("trajectory.csv", &header, rows)?;
    if let Some(r) = &residual {
        let header: Vec<String> = ["t", "residual", "ratio"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let rows = r
            .times
            .iter()
            .zip(&r.residuals)
            .zip(&r.ratios)
            .map(|((t, res), ratio)| vec![*t, *res, *ratio]);
        set.write_csv("residuals.csv", &header, rows)?;
    }
    let report = ParabolicReport {
        termination: termination_str(run.trajectory.termination),
        reduction: ReductionDto::new(&red, model.kernel_dim(), model.eigenvalues()),
        rate,
        neutral,
        alpha0,
        predicted_beta: beta,
        residual: residual.as_ref().map(ResidualDto::from),
        note,
    };
    match (&report.rate, &report.neutral) {
        (Some(fit), _) => ctx.say(format!("parabolic: exponential rate {:.6}", fit.gamma)),
        (None, Some(tp)) => ctx.say(format!(
            "parabolic: neutral plateau {:.6} (predicted {})",
            tp.window_mean,
            report
                .predicted_beta
                .map(|b| format!("{b:.6}"))
                .unwrap_or_else(|| "n/a".into())
        )),
        _ => ctx.say("parabolic: run finished".to_string()),
    }
    set.write_json("parabolic_report.json", &report)?;
    ctx.finish(set)?;
    if matches!(run.trajectory.termination, Termination::StepFailure) {
        return Err(Failure::Numerical(
            "integration stalled before the horizon".into(),
        ));
    }
    Ok(())
}

pub fn elliptic(ctx: &Context) -> Result<(), Failure> {
    let sec = ctx
        .run
        .elliptic
        .as_ref()
        .ok_or_else(|| Failure::Config("elliptic: section required".into()))?;
    match (&sec.slow, &sec.initial) {
        (Some(_), Some(_)) => Err(Failure::Config(
            "elliptic: give either `slow` or `initial`/`velocity`, not both".into(),
        )),
        (Some(slow), None) => elliptic_slow(ctx, sec.m, &slow.initial),
        (None, Some(initial)) => {
            let velocity = sec.velocity.as_ref().ok_or_else(|| {
                Failure::Config("elliptic: `initial` requires `velocity`".into())
            })?;
            elliptic_direct(ctx, sec, initial, velocity)
        }
        (None, None) => Err(Failure::Config(
            "elliptic: give `slow` or `initial`/`velocity`".into(),
        )),
    }
}

fn elliptic_direct(
    ctx: &Context,
    sec: &crate::config::EllipticSection,
    initial: &[f64],
    velocity: &[f64],
) -> Result<(), Failure> {
    let f = ctx.potential()?;
    let icfg = ctx.run.integrator.fold();
    let ccfg = ctx.run.classifier.fold();
    let model = ModelSystem::new(f).map_err(cfg_err)?;
    let extra = sec
        .nonlinear
        .clone()
        .map(NonlinearPerturbation::new)
        .transpose()
        .map_err(cfg_err)?;
    let u0 = DVector::from_row_slice(initial);
    let v0 = DVector::from_row_slice(velocity);
    let mut set = ArtifactSet::new(ctx.out_dir);
    let run = elliptic_flow(&model, sec.m, &u0, &v0, extra.as_ref(), &icfg).map_err(cfg_err)?;
    set.mark("integrate");

    let mut note = None;
    let gram_rate = match detect_exponential_series(
        &run.trajectory.times,
        &run.gram_norms,
        ccfg.tail_fraction,
        &ccfg,
    ) {
        Ok(fit) => fit,
        Err(e) => {
            note = Some(format!("rate fit unavailable: {e}"));
            None
        }
    };
    let fast_decay = match &gram_rate {
        Some(fit) => match slowflow::classify::fast_decay_case(&run, fit.gamma, &ccfg) {
            Ok(report) => Some(report),
            Err(e) => {
                note = Some(format!("fast-decay identification failed: {e}"));
                None
            }
        },
        None => None,
    };
    // the neutral-mode balance only makes sense when kernel modes exist
    let residual = if model.kernel_dim() > 0 {
        match reduced_functional(&model, None, None, None) {
            Ok(red) => {
                let xs = elliptic_kernel_coords(&run);
                match neutral_mode_residual(
                    &run.trajectory.times,
                    &xs,
                    &red,
                    ResidualMode::Elliptic { m: sec.m },
                    sec.eps.unwrap_or(0.25),
                    &ccfg,
                ) {
                    Ok(r) => Some(ResidualDto::from(&r)),
                    Err(e) => {
                        note = Some(format!("neutral residual unavailable: {e}"));
                        None
                    }
                }
            }
            Err(e) => {
                note = Some(format!("reduction unavailable: {e}"));
                None
            }
        }
    } else {
        None
    };

    write_elliptic_csvs(&mut set, &model, &run)?;
    let report = EllipticReport {
        m: sec.m,
        termination: termination_str(run.trajectory.termination),
        classes: run
            .spectral
            .classes()
            .iter()
            .map(|c| mode_class_str(*c))
            .collect(),
        candidate_rates: run.spectral.candidate_rates(),
        gram_rate,
        fast_decay: fast_decay.as_ref().map(FastDecayDto::from),
        residual,
        note,
    };
    match (&report.fast_decay, &report.gram_rate) {
        (Some(fd), _) => ctx.say(describe_fast_decay(fd)),
        (None, Some(fit)) => ctx.say(format!("elliptic: envelope rate {:.6}", fit.gamma)),
        _ => ctx.say(format!("elliptic: {}", report.termination)),
    }
    set.write_json("elliptic_report.json", &report)?;
    ctx.finish(set)?;
    if matches!(run.trajectory.termination, Termination::StepFailure) {
        return Err(Failure::Numerical(
            "integration stalled before the horizon".into(),
        ));
    }
    Ok(())
}

fn describe_fast_decay(fd: &FastDecayDto) -> String {
    match fd.kind {
        "resonant_growth" => format!(
            "elliptic: resonant mode t e^({:.4} t), coefficient {:.6}",
            fd.rate,
            fd.coefficient.unwrap_or(f64::NAN)
        ),
        "oscillatory" => format!(
            "elliptic: oscillatory decay, rate {:.6}, frequency {:.6}",
            fd.rate,
            fd.frequency.unwrap_or(f64::NAN)
        ),
        _ => format!("elliptic: simple decay, rate {:.6}", fd.rate),
    }
}

/// Coefficient column label for one basis entry.
fn mode_label_column(label: ModeLabel) -> String {
    match label {
        ModeLabel::Rot1(i) => format!("xi_rot1_{i}"),
        ModeLabel::Rot2(i) => format!("xi_rot2_{i}"),
        ModeLabel::Res3(i) => format!("xi_res3_{i}"),
        ModeLabel::Res4(i) => format!("xi_res4_{i}"),
        ModeLabel::Plus(i) => format!("xi_plus_{i}"),
        ModeLabel::Minus(i) => format!("xi_minus_{i}"),
    }
}

fn write_elliptic_csvs(
    set: &mut ArtifactSet,
    model: &ModelSystem,
    run: &EllipticRun,
) -> Result<(), Failure> {
    let n = model.dim();
    let mut header = vec!["t".to_string()];
    header.extend(column_block("u", n));
    header.extend(column_block("w", n));
    header.push("gram_norm".to_string());
    let rows = run.trajectory.times.iter().enumerate().map(|(k, t)| {
        let mut row = vec![*t];
        row.extend(run.trajectory.states[k].iter());
        row.push(run.gram_norms[k]);
        row
    });
    set.write_csv("trajectory.csv", &header, rows)?;

    let Some(first) = run.coefficients.first() else {
        return Ok(());
    };
    let j = first.z.len();
    let mut header = vec!["t".to_string()];
    header.extend(column_block("z", j));
    header.extend(column_block("zbar", j));
    for (label, _) in &first.entries {
        header.push(mode_label_column(*label));
    }
    let rows = run.trajectory.times.iter().enumerate().map(|(k, t)| {
        let c = &run.coefficients[k];
        let mut row = vec![*t];
        row.extend(c.z.iter());
        row.extend(c.zbar.iter());
        row.extend(c.entries.iter().map(|(_, v)| *v));
        row
    });
    set.write_csv("coefficients.csv", &header, rows)
}

fn elliptic_slow(ctx: &Context, m: f64, initial: &[f64]) -> Result<(), Failure> {
    let f = ctx.potential()?;
    let icfg = ctx.run.integrator.fold();
    let ccfg = ctx.run.classifier.fold();
    let model = ModelSystem::new(f).map_err(cfg_err)?;
    let z0 = DVector::from_row_slice(initial);
    let mut set = ArtifactSet::new(ctx.out_dir);
    let run = elliptic_slow_flow(&model, m, &z0, &icfg).map_err(cfg_err)?;
    set.mark("integrate");
    let red = reduced_functional(&model, None, None, None).map_err(num_err)?;
    set.mark("reduce");
    let polar = polar_track(&run.trajectory, red.p, &red.f_p, icfg.floor_tol).map_err(num_err)?;

    let exponent = 1.0 / (red.p as f64 - 2.0);
    let t_pow = TPowDto::over_last_decade(
        &polar.times,
        &polar.r,
        exponent,
    );
    let last = polar.theta.len().saturating_sub(1);
    let theta_star: Vec<f64> = polar.theta[last].iter().copied().collect();
    let alpha0 = red.f_p.evaluate(&theta_star) / m;
    let beta = predicted_beta(red.p, alpha0).ok();
    let consistent = match (&t_pow, beta) {
        (Some(tp), Some(b)) => Some((tp.window_mean - b).abs() <= ccfg.value_tol * b),
        _ => None,
    };

    // t, z_*, u_*, r, theta_*, fhat, t_pow_r over the polar prefix
    let j = model.kernel_dim();
    let n = model.dim();
    let mut header = vec!["t".to_string()];
    header.extend(column_block("z", j));
    header.extend(column_block("u", n));
    header.push("r".to_string());
    header.extend(column_block("theta", j));
    header.push("fhat".to_string());
    header.push("t_pow_r".to_string());
    let rows = (0..polar.times.len()).map(|k| {
        let mut row = vec![polar.times[k]];
        row.extend(run.trajectory.states[k].iter());
        row.extend(run.full_states[k].iter());
        row.push(polar.r[k]);
        row.extend(polar.theta[k].iter());
        row.push(polar.fhat[k]);
        row.push(polar.t_pow_r[k]);
        row
    });
    set.write_csv("trajectory.csv", &header, rows)?;

    let report = SlowManifoldReport {
        m,
        termination: termination_str(run.trajectory.termination),
        reduction: ReductionDto::new(&red, model.kernel_dim(), model.eigenvalues()),
        t_pow,
        theta_star,
        alpha0,
        predicted_beta: beta,
        consistent,
    };
    match &report.t_pow {
        Some(tp) => ctx.say(format!(
            "elliptic slow: rescaled level {:.6}, predicted {}, consistent: {}",
            tp.window_mean,
            report
                .predicted_beta
                .map(|b| format!("{b:.6}"))
                .unwrap_or_else(|| "n/a".into()),
            report
                .consistent
                .map(|c| c.to_string())
                .unwrap_or_else(|| "n/a".into())
        )),
        None => ctx.say(format!("elliptic slow: {}", report.termination)),
    }
    set.write_json("elliptic_report.json", &report)?;
    ctx.finish(set)?;
    if matches!(run.trajectory.termination, Termination::StepFailure) {
        return Err(Failure::Numerical(
            "integration stalled before the horizon".into(),
        ));
    }
    Ok(())
}

pub fn verify_spectral(ctx: &Context) -> Result<(), Failure> {
    let sec = ctx
        .run
        .spectral
        .as_ref()
        .ok_or_else(|| Failure::Config("spectral: section required".into()))?;
    let tol = sec.tol.unwrap_or(1e-12);
    let spec = SpectralSystem::new(sec.m, sec.lambdas.clone()).map_err(cfg_err)?;
    let basis = basis_psi(&spec);
    let mut set = ArtifactSet::new(ctx.out_dir);
    let report = verify_spectral_identities(&spec, &basis, tol).map_err(num_err)?;
    set.mark("verify");
    let passed = report.passed;
    let max_violation = report.max_violation;
    let failures = report.failures.clone();
    let dto = SpectralReportDto {
        m: spec.m(),
        lambdas: spec.lambdas().to_vec(),
        classes: spec.classes().iter().map(|c| mode_class_str(*c)).collect(),
        candidate_rates: spec.candidate_rates(),
        kernel_start: spec.iota(),
        kernel_dim: spec.kernel_dim(),
        identities: report,
    };
    ctx.say(format!(
        "verify-spectral: max violation {max_violation:.3e} against tol {tol:.1e}: {}",
        if passed { "ok" } else { "FAILED" }
    ));
    set.write_json("spectral_report.json", &dto)?;
    ctx.finish(set)?;
    if !passed {
        return Err(Failure::Numerical(format!(
            "spectral identities violated: {}",
            failures.join(", ")
        )));
    }
    Ok(())
}
