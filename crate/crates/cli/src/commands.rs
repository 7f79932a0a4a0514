//! The pipelines behind each command and the files they write.

use std::path::{Path, PathBuf};

use semiclassical::alsed::{evolve_leading, propagator_matrix, GreensKernel};
use semiclassical::atom_laser::{self, density_panel, sigma_closed, Panel};
use semiclassical::direct_solver::{log_log_slope, split_step_evolve, DirectRun, SplitStepConfig};
use semiclassical::grid_analysis::{centroid, initial_moments, WaveField};
use semiclassical::hesd::{integrate_hesd, Trajectory};
use semiclassical::Error;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::output::{num, write_table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Engine(#[from] Error),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 0 ok, 2 configuration, 3 validity horizon, 4 focal point, 5 numerical
    /// instability, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Usage(_) => 2,
            Self::Engine(e) => match e {
                Error::Argument(_) => 2,
                Error::ValidityHorizonReached { .. } => 3,
                Error::FocalPoint { .. } => 4,
                Error::BlowUp { .. }
                | Error::Resolution(_)
                | Error::StepSizeUnderflow { .. }
                | Error::Evaluation { .. } => 5,
                Error::ContractViolation(_) | Error::OutOfRange { .. } => 1,
            },
            Self::Io(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Hesd,
    Asymptotic,
    Direct,
    Compare,
    Fig1,
}

/// Files written by a command, plus one-line notes for the terminal.
#[derive(Debug, Default)]
pub struct Summary {
    pub files: Vec<PathBuf>,
    pub notes: Vec<String>,
}

pub fn initial_state(cfg: &RunConfig) -> semiclassical::Result<WaveField> {
    Ok(WaveField::from_gaussian(
        cfg.grid()?,
        cfg.params.hbar,
        cfg.params.initial_tag(),
    ))
}

pub fn moment_trajectory(
    cfg: &RunConfig,
    phi: &WaveField,
    t_final: f64,
) -> semiclassical::Result<Trajectory> {
    let model = atom_laser::build_model(&cfg.params)?;
    integrate_hesd(
        &model,
        &initial_moments(phi)?,
        t_final,
        &cfg.hesd_options(),
        cfg.ode_tol,
    )
}

pub fn leading_kernel(cfg: &RunConfig, traj: Trajectory) -> semiclassical::Result<GreensKernel> {
    let prop = propagator_matrix(&traj, cfg.ode_tol)?;
    GreensKernel::new(traj, prop, cfg.params.hbar)
}

pub fn direct_run(
    cfg: &RunConfig,
    phi: &WaveField,
    t_final: f64,
    stride: usize,
) -> semiclassical::Result<DirectRun> {
    let solver = SplitStepConfig::new(cfg.params, cfg.grid()?, cfg.pde_dt)?.with_stride(stride);
    split_step_evolve(&solver, phi, t_final)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub hbar: f64,
    pub t: f64,
    pub err_sigma: f64,
    pub err_z: f64,
    /// `‖Ψ⁽⁰⁾ − Ψ_direct‖ / ‖Ψ_direct‖`.
    pub err_l2: f64,
}

/// Asymptotic and direct solutions at `cfg.t_final` for the ħ of `cfg`.
pub fn convergence_row(cfg: &RunConfig) -> semiclassical::Result<ConvergenceRow> {
    let t = cfg.t_final;
    let phi = initial_state(cfg)?;
    let kernel = leading_kernel(cfg, moment_trajectory(cfg, &phi, t)?)?;
    let leading = evolve_leading(&kernel, &phi, t)?;
    let run = direct_run(cfg, &phi, t, usize::MAX)?;
    let direct = &run.last().field;
    let state = kernel.trajectory().state_at(t)?;
    Ok(ConvergenceRow {
        hbar: cfg.params.hbar,
        t,
        err_sigma: (direct.norm_sq() - state.base.sigma).abs(),
        err_z: (centroid(direct)? - state.base.z.as_vector()).amax(),
        err_l2: leading.relative_l2_distance(direct)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ConvergenceRow>,
    /// Log-log slope of the relative L² difference in ħ.
    pub slope: Option<f64>,
    /// All differences at the quadrature floor, as in the linear quadratic case.
    pub exact_regime: bool,
}

/// Below this relative difference the asymptotic solution counts as exact.
pub const EXACT_FLOOR: f64 = 1e-6;

pub fn compare(cfg: &RunConfig, hbars: &[f64]) -> Result<Comparison, CliError> {
    if hbars.len() < 3 {
        return Err(CliError::Usage(format!(
            "compare needs at least 3 hbar values, got {}",
            hbars.len()
        )));
    }
    if !(cfg.t_final > 0.0) {
        return Err(CliError::Usage("compare needs t_final > 0".into()));
    }
    let configs = hbars
        .iter()
        .map(|&h| {
            let c = cfg.with_hbar(h);
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<Vec<_>, ConfigError>>()?;
    let rows = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| s.spawn(move || convergence_row(c)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("comparison worker panicked"))
            .collect::<semiclassical::Result<Vec<_>>>()
    })?;
    let errs: Vec<f64> = rows.iter().map(|r| r.err_l2).collect();
    Ok(Comparison {
        slope: log_log_slope(hbars, &errs),
        exact_regime: errs.iter().all(|&e| e < EXACT_FLOOR),
        rows,
    })
}

pub const TRAJECTORY_COLUMNS: [&str; 12] = [
    "t", "sigma", "P", "X", "S", "sigma1", "Z1_p", "Z1_x", "D_pp", "D_px", "D_xx", "status",
];

pub const WAVEFIELD_COLUMNS: [&str; 5] = ["t", "x", "re", "im", "density"];

pub const CONVERGENCE_COLUMNS: [&str; 5] = ["hbar", "t", "err_sigma", "err_Z", "err_L2"];

pub const FIG1_TIMES: [f64; 4] = [0.0, 0.5, 1.0, 1.5];

fn trajectory_rows(traj: &Trajectory, times: &[f64]) -> semiclassical::Result<Vec<Vec<String>>> {
    times
        .iter()
        .filter(|&&t| t <= traj.t_end())
        .map(|&t| {
            let s = traj.state_at(t)?;
            let d = &s.delta2;
            let mut row: Vec<String> = [
                t,
                s.base.sigma,
                s.base.z.p()[0],
                s.base.z.x()[0],
                s.action,
                s.sigma1,
                s.z1[0],
                s.z1[1],
                d[(0, 0)],
                d[(0, 1)],
                d[(1, 1)],
            ]
            .into_iter()
            .map(num)
            .collect();
            row.push("ok".into());
            Ok(row)
        })
        .collect()
}

fn wavefield_rows(t: f64, psi: &WaveField, rows: &mut Vec<Vec<String>>) {
    for (j, v) in psi.samples().iter().enumerate() {
        rows.push(
            [t, psi.grid().x(j), v.re, v.im, v.norm_sqr()]
                .into_iter()
                .map(num)
                .collect(),
        );
    }
}

fn ensure_dir(dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)
}

pub fn run(command: Command, cfg: &RunConfig, hbars: &[f64]) -> Result<Summary, CliError> {
    ensure_dir(&cfg.output_dir)?;
    match command {
        Command::Hesd => cmd_hesd(cfg),
        Command::Asymptotic => cmd_asymptotic(cfg),
        Command::Direct => cmd_direct(cfg),
        Command::Compare => cmd_compare(cfg, hbars),
        Command::Fig1 => cmd_fig1(cfg),
    }
}

fn cmd_hesd(cfg: &RunConfig) -> Result<Summary, CliError> {
    let phi = initial_state(cfg)?;
    let path = cfg.output_dir.join("trajectory.csv");
    let times = cfg.output_times();
    match moment_trajectory(cfg, &phi, cfg.t_final) {
        Ok(traj) => {
            write_table(
                &path,
                &cfg.metadata(),
                &TRAJECTORY_COLUMNS,
                &trajectory_rows(&traj, &times)?,
            )?;
            Ok(Summary {
                files: vec![path],
                notes: vec![format!(
                    "sigma({}) = {}",
                    cfg.t_final,
                    traj.state_at(cfg.t_final)?.base.sigma
                )],
            })
        }
        Err(Error::ValidityHorizonReached { t, partial }) => {
            let mut rows = match &partial {
                Some(traj) => trajectory_rows(traj, &times)?,
                None => Vec::new(),
            };
            let mut marker = vec![num(t)];
            marker.extend(std::iter::repeat_n(
                "nan".to_string(),
                TRAJECTORY_COLUMNS.len() - 2,
            ));
            marker.push("horizon".into());
            rows.push(marker);
            let mut meta = cfg.metadata();
            meta.push(("validity_horizon".into(), num(t)));
            write_table(&path, &meta, &TRAJECTORY_COLUMNS, &rows)?;
            Err(Error::ValidityHorizonReached { t, partial }.into())
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_asymptotic(cfg: &RunConfig) -> Result<Summary, CliError> {
    let phi = initial_state(cfg)?;
    let kernel = leading_kernel(cfg, moment_trajectory(cfg, &phi, cfg.t_final)?)?;
    let mut rows = Vec::new();
    for t in cfg.output_times() {
        wavefield_rows(t, &evolve_leading(&kernel, &phi, t)?, &mut rows);
    }
    let path = cfg.output_dir.join("asymptotic.csv");
    write_table(&path, &cfg.metadata(), &WAVEFIELD_COLUMNS, &rows)?;
    Ok(Summary {
        files: vec![path],
        notes: Vec::new(),
    })
}

fn cmd_direct(cfg: &RunConfig) -> Result<Summary, CliError> {
    let phi = initial_state(cfg)?;
    let run = direct_run(cfg, &phi, cfg.t_final, cfg.snapshot_stride)?;
    let mut rows = Vec::new();
    for snap in &run.snapshots {
        wavefield_rows(snap.t, &snap.field, &mut rows);
    }
    let path = cfg.output_dir.join("direct.csv");
    write_table(&path, &cfg.metadata(), &WAVEFIELD_COLUMNS, &rows)?;
    Ok(Summary {
        files: vec![path],
        notes: vec![format!(
            "norm({}) = {}",
            run.last().t,
            run.last().field.norm_sq()
        )],
    })
}

fn cmd_compare(cfg: &RunConfig, hbars: &[f64]) -> Result<Summary, CliError> {
    let cmp = compare(cfg, hbars)?;
    let mut meta = cfg.metadata();
    let list: Vec<String> = hbars.iter().map(|h| format!("{h:e}")).collect();
    meta.push(("hbar_list".into(), list.join(",")));
    meta.push(("slope".into(), cmp.slope.map_or("nan".into(), num)));
    meta.push((
        "regime".into(),
        if cmp.exact_regime {
            "exact"
        } else {
            "asymptotic"
        }
        .into(),
    ));
    let rows: Vec<Vec<String>> = cmp
        .rows
        .iter()
        .map(|r| {
            [r.hbar, r.t, r.err_sigma, r.err_z, r.err_l2]
                .into_iter()
                .map(num)
                .collect()
        })
        .collect();
    let path = cfg.output_dir.join("convergence.csv");
    write_table(&path, &meta, &CONVERGENCE_COLUMNS, &rows)?;
    let note = match (cmp.exact_regime, cmp.slope) {
        (true, _) => "exact regime: all differences below 1e-6".to_string(),
        (false, Some(s)) => format!("fitted slope {s:.4}"),
        (false, None) => "slope undefined".to_string(),
    };
    Ok(Summary {
        files: vec![path],
        notes: vec![note],
    })
}

/// `x ∈ [−8, 8]` in steps of 0.05.
pub fn fig1_positions() -> Vec<f64> {
    (0..=320).map(|j| -8.0 + 0.05 * j as f64).collect()
}

fn cmd_fig1(cfg: &RunConfig) -> Result<Summary, CliError> {
    let xs = fig1_positions();
    let mut summary = Summary::default();
    let mut totals = Vec::new();
    for panel in Panel::ALL {
        let reference = atom_laser::AtomLaserParams::fig1(panel);
        let panel_cfg = RunConfig {
            params: atom_laser::AtomLaserParams {
                lambda: reference.lambda,
                kappa: reference.kappa,
                ..cfg.params
            },
            ..cfg.clone()
        };
        let p = panel_cfg.params;
        let slices = density_panel(&p, &FIG1_TIMES, &xs, cfg.ode_tol)?;
        let mut rows = Vec::new();
        for s in &slices {
            for (x, d) in s.xs.iter().zip(&s.density) {
                rows.push(vec![num(*x), num(s.t), num(*d)]);
            }
            totals.push(vec![
                panel.label().to_string(),
                num(s.t),
                num(s.total),
                num(sigma_closed(&p, s.t)?),
            ]);
        }
        let path = cfg.output_dir.join(format!("fig1_{}.csv", panel.label()));
        let mut meta = panel_cfg.metadata();
        meta.push(("panel".into(), panel.label().into()));
        write_table(&path, &meta, &["x", "t", "density"], &rows)?;
        summary.files.push(path);
    }
    let path = cfg.output_dir.join("fig1_totals.csv");
    write_table(
        &path,
        &cfg.metadata(),
        &["panel", "t", "total", "sigma_closed"],
        &totals,
    )?;
    summary.files.push(path);
    Ok(summary)
}
