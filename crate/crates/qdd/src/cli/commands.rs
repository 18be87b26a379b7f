//! Subcommand bodies. Each validates its inputs before touching the output directory.

use super::audit;
use super::config::{ConfigError, RunConfig};
use super::output::{float, Table, FIELD_HEADER, KERNEL_ERROR_HEADER, LEDGER_HEADER, MATRIX_DIAG_HEADER};
use super::presets::InitialData;
use crate::grid::{self, Mesh};
use crate::kernels::{self, AuxiliaryOptions, HeatKernelParams};
use crate::liouville::{self, Form, LiouvilleControls, LiouvilleParams};
use crate::nlqdd::{self, NlqddControls, NlqddError, TrajectoryRecord};
use crate::qmax::{self, SolveOptions};
use rayon::prelude::*;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("integrator failure: {0}")]
    Integrator(String),
    #[error("acceptance failure: {0}")]
    Acceptance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Io(_) => 1,
            Self::Solver(_) => 2,
            Self::Integrator(_) => 3,
            Self::Acceptance(_) => 4,
        }
    }
}

impl From<NlqddError> for CliError {
    fn from(e: NlqddError) -> Self {
        match e {
            NlqddError::Solver { .. } => Self::Solver(e.to_string()),
            NlqddError::InvalidControls(_) => Self::Config(ConfigError::Invalid(e.to_string())),
            NlqddError::StepUnderflow { .. } | NlqddError::PositivityLoss { .. } => {
                Self::Integrator(e.to_string())
            }
        }
    }
}

fn mesh_of(n: usize) -> Result<Mesh, CliError> {
    Mesh::new(n).map_err(|e| ConfigError::Invalid(e.to_string()).into())
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn nlqdd_controls(cfg: &RunConfig, checkpoints: Vec<f64>) -> NlqddControls {
    NlqddControls {
        tol: cfg.tol.unwrap_or(1e-8),
        checkpoints,
        ..NlqddControls::default()
    }
}

fn write_ledger(path: &Path, rec: &TrajectoryRecord) -> Result<(), CliError> {
    let mut t = Table::create(path, &LEDGER_HEADER)?;
    for i in 0..rec.len() {
        t.row(&[
            float(rec.times[i]),
            float(rec.entropy[i]),
            float(rec.dissipation_integral[i]),
            float(rec.mass[i]),
            float(rec.min_n[i]),
            float(rec.h1_norm[i]),
            rec.newton_iters[i].to_string(),
        ])?;
    }
    Ok(t.finish()?)
}

fn write_fields(path: &Path, rec: &TrajectoryRecord, times: &[f64]) -> Result<(), CliError> {
    let mut t = Table::create(path, &FIELD_HEADER)?;
    let sites = rec.mesh.sites();
    for &time in times {
        let i = rec
            .index_of(time)
            .ok_or_else(|| CliError::Integrator(format!("frame time {time} was not reached")))?;
        for (j, x) in sites.iter().enumerate() {
            t.row(&[
                float(time),
                float(*x),
                float(rec.densities[i][j]),
                float(rec.potentials[i][j]),
                float(rec.nu_plus[i][j]),
            ])?;
        }
    }
    Ok(t.finish()?)
}

pub fn maxwellian_solve(cfg: &RunConfig) -> Result<(), CliError> {
    let mesh = mesh_of(cfg.n_cells)?;
    let n = cfg.initial.density(&mesh)?;
    let opts = SolveOptions {
        tol: cfg.tol,
        ..SolveOptions::default()
    };
    let state = qmax::solve_potential(&n, cfg.hbar, &mesh, &opts).map_err(|e| CliError::Solver(e.to_string()))?;
    prepare_out(&cfg.out)?;
    let mut t = Table::create(&cfg.out.join("field.csv"), &FIELD_HEADER)?;
    for (j, x) in mesh.sites().iter().enumerate() {
        t.row(&[
            float(0.0),
            float(*x),
            float(state.density[j]),
            float(state.potential[j]),
            float(state.nu_plus[j]),
        ])?;
    }
    t.finish()?;
    println!("entropy {}", float(state.entropy));
    println!("iterations {}", state.iterations);
    println!("residual {}", float(state.residual));
    println!("log_partition {}", float(qmax::partition_function(cfg.hbar, &mesh).ln()));
    Ok(())
}

pub fn nlqdd_run(cfg: &RunConfig) -> Result<(), CliError> {
    let mesh = mesh_of(cfg.n_cells)?;
    let n0 = cfg.initial.density(&mesh)?;
    let frames = cfg.frame_times();
    let rec = nlqdd::integrate_nlqdd(&n0, cfg.hbar, &mesh, cfg.t_final, &nlqdd_controls(cfg, frames.clone()))?;
    prepare_out(&cfg.out)?;
    write_ledger(&cfg.out.join("ledger.csv"), &rec)?;
    write_fields(&cfg.out.join("field.csv"), &rec, &frames)?;
    println!(
        "steps {} rejected {} final_entropy {}",
        rec.len() - 1,
        rec.rejected_steps,
        float(*rec.entropy.last().expect("non-empty"))
    );
    Ok(())
}

fn initial_matrix(cfg: &RunConfig, n0: &[f64], mesh: &Mesh) -> Result<liouville::CMatrix, CliError> {
    match cfg.initial {
        InitialData::Equilibrium => {
            liouville::equilibrium_state(cfg.hbar, mesh).map_err(|e| CliError::Solver(e.to_string()))
        }
        _ => Ok(liouville::mixed_state(n0, cfg.theta, mesh)),
    }
}

fn reference_densities(cfg: &RunConfig, n0: &[f64], mesh: &Mesh, times: &[f64]) -> Result<Vec<Vec<f64>>, CliError> {
    let ctl = NlqddControls {
        tol: 1e-10,
        ..nlqdd_controls(cfg, times.to_vec())
    };
    let rec = nlqdd::integrate_nlqdd(n0, cfg.hbar, mesh, cfg.t_final, &ctl)?;
    times
        .iter()
        .map(|&t| {
            rec.density_at(t)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| CliError::Integrator(format!("reference time {t} was not reached")))
        })
        .collect()
}

fn write_gap(path: &Path, mesh: &Mesh, times: &[f64], diag: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<(), CliError> {
    let mut t = Table::create(path, &MATRIX_DIAG_HEADER)?;
    for (i, &time) in times.iter().enumerate() {
        for (j, x) in mesh.sites().iter().enumerate() {
            t.row(&[
                float(time),
                float(*x),
                float(diag[i][j]),
                float(reference[i][j]),
                float((diag[i][j] - reference[i][j]).abs()),
            ])?;
        }
    }
    Ok(t.finish()?)
}

fn liouville_controls(times: &[f64]) -> LiouvilleControls {
    LiouvilleControls {
        output_times: times.to_vec(),
        ..LiouvilleControls::default()
    }
}

pub fn liouville_run(cfg: &RunConfig) -> Result<(), CliError> {
    let mesh = mesh_of(cfg.n_cells)?;
    let n0 = cfg.initial.density(&mesh)?;
    let eps = cfg.epsilon[0];
    let params = LiouvilleParams::new(cfg.hbar, eps, mesh).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let r0 = initial_matrix(cfg, &n0, &mesh)?;
    let frames = cfg.frame_times();
    let traj = liouville::integrate_liouville(&r0, &params, Form::Rescaled, cfg.t_final, &liouville_controls(&frames))
        .map_err(|e| CliError::Integrator(e.to_string()))?;
    let reference = reference_densities(cfg, &n0, &mesh, &frames)?;
    let mut diag = Vec::new();
    for &time in &frames {
        let i = traj
            .index_of(time)
            .ok_or_else(|| CliError::Integrator(format!("frame time {time} was not reached")))?;
        diag.push(qmax::density_of(&traj.states[i], &mesh).map_err(|e| CliError::Integrator(e.to_string()))?);
    }
    prepare_out(&cfg.out)?;
    write_gap(&cfg.out.join("diag.csv"), &mesh, &frames, &diag, &reference)?;
    let mut t = Table::create(&cfg.out.join("ledger.csv"), &LEDGER_HEADER)?;
    for (i, d) in traj.diagnostics.iter().enumerate() {
        let n = qmax::density_of(&traj.states[i], &mesh).map_err(|e| CliError::Integrator(e.to_string()))?;
        let h1 = grid::lp_norm(&grid::forward_difference(&n, &mesh), 2.0, &mesh).expect("p = 2");
        t.row(&[
            float(traj.times[i]),
            float(d.free_energy),
            float(traj.dissipation_integral[i]),
            float(traj.states[i].trace().re),
            float(n.iter().copied().fold(f64::INFINITY, f64::min)),
            float(h1),
            d.newton_iters.to_string(),
        ])?;
    }
    t.finish()?;
    Ok(())
}

/// Gaps below this count as zero when checking monotonicity.
pub const GAP_FLOOR: f64 = 1e-9;

pub fn diffusive_limit(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.epsilon.windows(2).any(|w| w[0] <= w[1]) {
        return Err(ConfigError::Invalid("epsilon list must be strictly descending".into()).into());
    }
    let mesh = mesh_of(cfg.n_cells)?;
    let n0 = cfg.initial.density(&mesh)?;
    let r0 = initial_matrix(cfg, &n0, &mesh)?;
    let frames = cfg.frame_times();
    let reference = reference_densities(cfg, &n0, &mesh, &frames)?;
    let results = liouville::diffusive_limit_gap(
        &cfg.epsilon,
        &r0,
        &frames,
        cfg.hbar,
        &mesh,
        &reference,
        &liouville_controls(&frames),
    );
    prepare_out(&cfg.out)?;
    let mut summary = Table::create(&cfg.out.join("gap_summary.csv"), &["epsilon", "sup_gap", "status"])?;
    let mut sups = Vec::new();
    let mut failures = Vec::new();
    for (eps, res) in cfg.epsilon.iter().zip(&results) {
        match res {
            Ok(g) => {
                write_gap(&cfg.out.join(format!("gap_eps{eps}.csv")), &mesh, &g.times, &g.diagonal, &reference)?;
                summary.row(&[float(*eps), float(g.sup_gap), "ok".into()])?;
                sups.push(g.sup_gap);
            }
            Err(e) => {
                summary.row(&[float(*eps), String::new(), format!("failed: {e}")])?;
                failures.push(format!("epsilon {eps}: {e}"));
            }
        }
    }
    summary.finish()?;
    if !failures.is_empty() {
        return Err(CliError::Integrator(failures.join("; ")));
    }
    let all_small = sups.iter().all(|g| *g <= GAP_FLOOR);
    if !all_small && sups.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CliError::Acceptance(format!("sup-gaps not strictly decreasing: {sups:?}")));
    }
    Ok(())
}

/// One mesh of a refinement study.
#[derive(Debug, Clone)]
pub struct RefinementRun {
    pub n: usize,
    pub record: TrajectoryRecord,
    pub initial_entropy: f64,
    pub h1_max: f64,
    pub entropy_min: f64,
    /// `max_x |(n̂(t+h) − n̂(t−h))/2h − ∂_xF(t)| / max_x |∂_xF(t)|`.
    pub flux_residual: f64,
}

/// Half-width of the centred time difference in the flux identity check.
pub const FLUX_PROBE_STEP: f64 = 1e-3;
/// Spatial probe points shared by all meshes.
pub const PROBE_POINTS: usize = 512;

pub fn refinement_run(
    profile: fn(f64) -> f64,
    n: usize,
    hbar: f64,
    t_final: f64,
    probes: &[f64],
    tol: f64,
) -> Result<RefinementRun, CliError> {
    let mesh = mesh_of(n)?;
    let n0 = grid::cell_average(profile, &mesh).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let t_mid = 0.5 * t_final;
    let mut checkpoints = probes.to_vec();
    checkpoints.extend([t_mid - FLUX_PROBE_STEP, t_mid, t_mid + FLUX_PROBE_STEP]);
    let ctl = NlqddControls {
        tol,
        checkpoints,
        ..NlqddControls::default()
    };
    let record = nlqdd::integrate_nlqdd(&n0, hbar, &mesh, t_final, &ctl)?;
    let at = |t: f64| record.index_of(t).expect("checkpoint reached");
    let (im, i0, ip) = (at(t_mid - FLUX_PROBE_STEP), at(t_mid), at(t_mid + FLUX_PROBE_STEP));
    let flux = {
        let d = grid::forward_difference(&record.potentials[i0], &mesh);
        record.nu_plus[i0].iter().zip(&d).map(|(a, b)| a * b).collect::<Vec<f64>>()
    };
    let (_, f_hat) = grid::hat_and_flux_interpolants(&record.densities[i0], &flux, &mesh)
        .map_err(|e| CliError::Integrator(e.to_string()))?;
    let (n_minus, _) = grid::hat_and_flux_interpolants(&record.densities[im], &flux, &mesh).expect("same mesh");
    let (n_plus, _) = grid::hat_and_flux_interpolants(&record.densities[ip], &flux, &mesh).expect("same mesh");
    let mut resid: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for k in 0..PROBE_POINTS {
        let x = (k as f64 + 0.5) / PROBE_POINTS as f64;
        let dt = (n_plus.eval(x) - n_minus.eval(x)) / (2.0 * FLUX_PROBE_STEP);
        let dx = f_hat.derivative(x);
        resid = resid.max((dt - dx).abs());
        scale = scale.max(dx.abs());
    }
    Ok(RefinementRun {
        n,
        initial_entropy: record.entropy[0],
        h1_max: record.h1_norm.iter().copied().fold(0.0, f64::max),
        entropy_min: record.entropy.iter().copied().fold(f64::INFINITY, f64::min),
        flux_residual: if scale > 0.0 { resid / scale } else { resid },
        record,
    })
}

/// `sup` over the probe times and `PROBE_POINTS` of `|n̂_a − n̂_b|`.
pub fn cauchy_difference(a: &TrajectoryRecord, b: &TrajectoryRecord, probes: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for &t in probes {
        let (Some(na), Some(nb)) = (a.density_at(t), b.density_at(t)) else {
            return f64::NAN;
        };
        let zero_a = vec![0.0; na.len()];
        let zero_b = vec![0.0; nb.len()];
        let (ha, _) = grid::hat_and_flux_interpolants(na, &zero_a, &a.mesh).expect("matching lengths");
        let (hb, _) = grid::hat_and_flux_interpolants(nb, &zero_b, &b.mesh).expect("matching lengths");
        for k in 0..PROBE_POINTS {
            let x = k as f64 / PROBE_POINTS as f64;
            worst = worst.max((ha.eval(x) - hb.eval(x)).abs());
        }
    }
    worst
}

pub fn convergence_study(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ConfigError::Invalid("n_list must be strictly ascending".into()).into());
    }
    let profile = cfg.initial.profile().ok_or_else(|| {
        ConfigError::Invalid("convergence-study needs an analytic initial datum, not a file".into())
    })?;
    let probes = cfg.frame_times();
    let tol = cfg.tol.unwrap_or(1e-8);
    let runs: Vec<Result<RefinementRun, CliError>> = cfg
        .n_list
        .par_iter()
        .map(|&n| refinement_run(profile, n, cfg.hbar, cfg.t_final, &probes, tol))
        .collect();
    let fisher = audit::continuum_fisher(profile, 20_000);
    let entropy_bound = 8.0 * cfg.hbar * cfg.hbar * fisher;
    let floor = qmax::entropy_floor(cfg.hbar);

    prepare_out(&cfg.out)?;
    let mut table = Table::create(
        &cfg.out.join("refinement.csv"),
        &[
            "N",
            "status",
            "cauchy_to_next",
            "h1_max",
            "initial_entropy",
            "initial_entropy_bound",
            "entropy_min",
            "entropy_floor",
            "flux_residual",
        ],
    )?;
    let mut cauchy = Vec::new();
    let mut problems = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        let n = cfg.n_list[i];
        match run {
            Ok(r) => {
                write_ledger(&cfg.out.join(format!("ledger_N{n}.csv")), &r.record)?;
                let next = runs.get(i + 1).and_then(|x| x.as_ref().ok());
                let c = next.map(|b| cauchy_difference(&r.record, &b.record, &probes));
                if let Some(c) = c {
                    cauchy.push(c);
                }
                if r.initial_entropy > entropy_bound {
                    problems.push(format!("N = {n}: initial entropy above bound"));
                }
                if r.entropy_min < floor {
                    problems.push(format!("N = {n}: entropy below floor"));
                }
                table.row(&[
                    n.to_string(),
                    "ok".into(),
                    c.map(float).unwrap_or_default(),
                    float(r.h1_max),
                    float(r.initial_entropy),
                    float(entropy_bound),
                    float(r.entropy_min),
                    float(floor),
                    float(r.flux_residual),
                ])?;
            }
            Err(e) => {
                table.row(&[
                    n.to_string(),
                    format!("failed: {e}"),
                    String::new(),
                    String::new(),
                    String::new(),
                    float(entropy_bound),
                    String::new(),
                    float(floor),
                    String::new(),
                ])?;
                problems.push(format!("N = {n}: {e}"));
            }
        }
    }
    table.finish()?;
    if runs.iter().any(Result::is_err) {
        return Err(CliError::Integrator(problems.join("; ")));
    }
    if cauchy.windows(2).any(|w| w[1] >= w[0]) {
        problems.push(format!("Cauchy differences not decreasing: {cauchy:?}"));
    }
    let h1: Vec<f64> = runs.iter().flatten().map(|r| r.h1_max).collect();
    let (lo, hi) = h1.iter().fold((f64::INFINITY, 0.0_f64), |(l, h), v| (l.min(*v), h.max(*v)));
    if hi > 1.5 * lo {
        problems.push(format!("H1 ledgers spread by more than 1.5: {h1:?}"));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Acceptance(problems.join("; ")))
    }
}

/// Least fitted order the kernel check accepts.
pub const MIN_KERNEL_ORDER: f64 = 0.25;

pub fn kernel_check(cfg: &RunConfig) -> Result<(), CliError> {
    let params = HeatKernelParams::new(cfg.hbar);
    let report = kernels::kernel_error_report(&cfg.n_list, &cfg.kernel_times, &params)
        .map_err(|e| CliError::Solver(e.to_string()))?;
    let static_params = HeatKernelParams::new(cfg.static_hbar);
    let continuum = kernels::continuum_quantum_exponential(
        kernels::cosine_potential,
        cfg.aux_grid,
        &static_params,
        &AuxiliaryOptions::default(),
    )
    .map_err(|e| CliError::Solver(e.to_string()))?;
    let rows = kernels::static_convergence(kernels::cosine_potential, &cfg.n_list, &continuum, &static_params)
        .map_err(|e| CliError::Solver(e.to_string()))?;

    prepare_out(&cfg.out)?;
    let mut t = Table::create(&cfg.out.join("kernel_errors.csv"), &KERNEL_ERROR_HEADER)?;
    for r in &report.rows {
        let order = report.orders.iter().find(|o| o.t == r.t).expect("order per time");
        t.row(&[
            r.n.to_string(),
            float(r.t),
            float(r.pointwise),
            float(r.averaged),
            float(order.pointwise.min(order.averaged)),
        ])?;
    }
    t.finish()?;
    let mut s = Table::create(&cfg.out.join("static_convergence.csv"), &["N", "density_error", "kernel_error"])?;
    for r in &rows {
        s.row(&[r.n.to_string(), float(r.density_error), float(r.kernel_error)])?;
    }
    s.finish()?;

    let mut problems = Vec::new();
    for o in &report.orders {
        println!("t {} order_pointwise {} order_averaged {}", float(o.t), float(o.pointwise), float(o.averaged));
        if !(o.pointwise >= MIN_KERNEL_ORDER && o.averaged >= MIN_KERNEL_ORDER) {
            problems.push(format!("fitted order below {MIN_KERNEL_ORDER} at t = {}", o.t));
        }
    }
    if rows.windows(2).any(|w| w[1].density_error >= w[0].density_error) {
        problems.push("static density errors not decreasing".into());
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Acceptance(problems.join("; ")))
    }
}

pub fn property_audit(cfg: &RunConfig) -> Result<(), CliError> {
    let mut sizes = cfg.audit_sizes.clone();
    if !sizes.contains(&2) {
        sizes.insert(0, 2);
    }
    let results = audit::run_audit(cfg.seed, &sizes, cfg.audit_trials);
    prepare_out(&cfg.out)?;
    let mut t = Table::create(&cfg.out.join("audit.csv"), &["check", "status", "worst", "tolerance", "trials"])?;
    for r in &results {
        let status = if r.passed { "pass" } else { "fail" };
        println!("{status} {} worst {} tolerance {}", r.name, float(r.worst), float(r.tolerance));
        t.row(&[r.name.clone(), status.into(), float(r.worst), float(r.tolerance), r.trials.to_string()])?;
    }
    t.finish()?;
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Acceptance(format!("failed checks: {}", failed.join(", "))))
    }
}
