//! Split-step Fourier solver for the full one-dimensional equation
//!
//! ```text
//! iħ∂ₜΨ = [c₁p̂² + ϰc₂(K ∗ |Ψ|²)]Ψ − iħΛ[p̂² − ε + ϰ(K ∗ |Ψ|²)]Ψ,
//! K(d) = exp(−d²/γ²),
//! ```
//!
//! with diagnostics comparing the numerical solution to the norm-rate
//! identity and to the moment trajectory.

use num_complex::Complex64;

use crate::atom_laser::AtomLaserParams;
use crate::error::{Error, Result};
use crate::grid_analysis::{central_moments, centroid, forward, inverse, Grid, WaveField};
use crate::hesd::Trajectory;
use crate::phase_space::PhasePoint;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Norm growth beyond this multiple of `σ₀e^{2|Λε|t}` counts as blow-up.
const BLOW_UP_FACTOR: f64 = 10.0;

/// Periodic convolution `(K ∗ f)(x) = ∫K(x − y)f(y)dy` by FFT.
#[derive(Debug, Clone)]
pub struct Convolution {
    spectrum: Vec<Complex64>,
    dx: f64,
}

impl Convolution {
    /// `kernel` is sampled at the signed minimum-image distances of the grid.
    pub fn new(grid: &Grid, kernel: impl Fn(f64) -> f64) -> Self {
        let n = grid.n;
        let samples: Vec<Complex64> = (0..n)
            .map(|j| {
                let m = if j <= n / 2 {
                    j as f64
                } else {
                    j as f64 - n as f64
                };
                Complex64::new(kernel(m * grid.dx), 0.0)
            })
            .collect();
        Self {
            spectrum: forward(&samples),
            dx: grid.dx,
        }
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let fc: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut spec = forward(&fc);
        spec.iter_mut()
            .zip(&self.spectrum)
            .for_each(|(a, b)| *a *= b);
        inverse(&spec).iter().map(|v| v.re * self.dx).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Half kinetic, full potential with a midpoint density, half kinetic.
    Strang,
    /// Full kinetic then full potential with the density frozen at the start.
    Lie,
}

#[derive(Debug, Clone)]
pub struct SplitStepConfig {
    pub params: AtomLaserParams,
    pub grid: Grid,
    pub dt: f64,
    pub scheme: Scheme,
    /// Keep every `snapshot_stride`-th step; the first and last are always kept.
    pub snapshot_stride: usize,
    kernel: Convolution,
}

impl SplitStepConfig {
    pub fn new(params: AtomLaserParams, grid: Grid, dt: f64) -> Result<Self> {
        params.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Argument(format!("time step {dt}")));
        }
        let g2 = params.gamma * params.gamma;
        let cfg = Self {
            kernel: Convolution::new(&grid, |d| (-d * d / g2).exp()),
            params,
            grid,
            dt,
            scheme: Scheme::Strang,
            snapshot_stride: 1,
        };
        let s = cfg.stability_number();
        if !(s < std::f64::consts::PI) {
            return Err(Error::Argument(format!(
                "dt·p_max²·|c₁ − iħΛ| = {s:.3} exceeds π; reduce dt"
            )));
        }
        Ok(cfg)
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride.max(1);
        self
    }

    /// `dt·p_max²·|c₁ − iħΛ|` with `p_max = ħk_max`.
    pub fn stability_number(&self) -> f64 {
        let p = &self.params;
        let p_max = p.hbar * std::f64::consts::PI / self.grid.dx;
        self.dt * p_max * p_max * Complex64::new(p.c1, -p.hbar * p.lambda).norm()
    }

    pub fn kernel(&self) -> &Convolution {
        &self.kernel
    }

    /// Fourier multiplier of the linear part over `tau`.
    fn linear_multiplier(&self, tau: f64) -> Vec<Complex64> {
        let p = &self.params;
        let h = p.hbar;
        self.grid
            .wavenumbers()
            .iter()
            .map(|&k| {
                let rate = -I * h * p.c1 * k * k + p.lambda * (p.eps - h * h * k * k);
                (rate * tau).exp()
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub field: WaveField,
}

#[derive(Debug, Clone)]
pub struct DirectRun {
    /// Actual step, `t_final / steps`.
    pub dt: f64,
    pub snapshots: Vec<Snapshot>,
}

impl DirectRun {
    pub fn last(&self) -> &Snapshot {
        self.snapshots
            .last()
            .expect("a run keeps its initial state")
    }

    /// Snapshot closest to `t`, provided it lies within half a step.
    pub fn at(&self, t: f64) -> Result<&Snapshot> {
        let best = self
            .snapshots
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .expect("a run keeps its initial state");
        if (best.t - t).abs() > 0.5 * self.dt {
            return Err(Error::Argument(format!("no snapshot at t = {t}")));
        }
        Ok(best)
    }
}

fn density(psi: &[Complex64]) -> Vec<f64> {
    psi.iter().map(|v| v.norm_sqr()).collect()
}

struct Stepper<'a> {
    cfg: &'a SplitStepConfig,
    dt: f64,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
}

impl Stepper<'_> {
    fn kinetic(&self, psi: &mut Vec<Complex64>, mult: &[Complex64]) {
        let mut spec = forward(psi);
        spec.iter_mut().zip(mult).for_each(|(a, b)| *a *= b);
        *psi = inverse(&spec);
    }

    fn potential(&self, psi: &mut [Complex64], midpoint: bool) {
        let p = &self.cfg.params;
        if p.kappa == 0.0 {
            return;
        }
        let rho = density(psi);
        let mut u = self.cfg.kernel.apply(&rho);
        if midpoint {
            // ρ̇ = −2ΛϰUρ over half the step
            let rho_mid: Vec<f64> = rho
                .iter()
                .zip(&u)
                .map(|(r, uu)| r * (-p.lambda * p.kappa * uu * self.dt).exp())
                .collect();
            u = self.cfg.kernel.apply(&rho_mid);
        }
        let coeff = -p.kappa * (I * p.c2 / p.hbar + p.lambda) * self.dt;
        psi.iter_mut()
            .zip(&u)
            .for_each(|(v, uu)| *v *= (coeff * uu).exp());
    }

    fn step(&self, psi: &mut Vec<Complex64>) {
        match self.cfg.scheme {
            Scheme::Strang => {
                self.kinetic(psi, &self.half);
                self.potential(psi, true);
                self.kinetic(psi, &self.half);
            }
            Scheme::Lie => {
                self.kinetic(psi, &self.full);
                self.potential(psi, false);
            }
        }
    }
}

/// Evolve `psi0` to `t_final` in `⌈t_final/dt⌉` equal steps.
pub fn split_step_evolve(
    cfg: &SplitStepConfig,
    psi0: &WaveField,
    t_final: f64,
) -> Result<DirectRun> {
    if psi0.grid() != &cfg.grid {
        return Err(Error::Argument(
            "initial state is not on the solver grid".into(),
        ));
    }
    if (psi0.hbar() - cfg.params.hbar).abs() > 1e-14 * cfg.params.hbar {
        return Err(Error::Argument(
            "initial state carries a different hbar".into(),
        ));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::Argument(format!("final time {t_final}")));
    }
    psi0.check_resolved()?;
    let steps = (t_final / cfg.dt - 1e-9).ceil().max(0.0) as usize;
    let dt = if steps == 0 {
        cfg.dt
    } else {
        t_final / steps as f64
    };
    let stepper = Stepper {
        cfg,
        dt,
        half: cfg.linear_multiplier(0.5 * dt),
        full: cfg.linear_multiplier(dt),
    };
    let sigma0 = psi0.norm_sq();
    let growth = 2.0 * (cfg.params.lambda * cfg.params.eps).abs();
    let mut psi = psi0.samples().to_vec();
    let mut snapshots = vec![Snapshot {
        t: 0.0,
        field: psi0.clone(),
    }];
    for k in 1..=steps {
        stepper.step(&mut psi);
        let t = k as f64 * dt;
        let norm = density(&psi).iter().sum::<f64>() * cfg.grid.dx;
        let bound = BLOW_UP_FACTOR * sigma0 * (growth * t).exp();
        if !(norm <= bound) {
            return Err(Error::BlowUp { t, norm, bound });
        }
        if k % cfg.snapshot_stride == 0 || k == steps {
            let field = psi0.with_samples(psi.clone())?;
            field.check_resolved()?;
            snapshots.push(Snapshot { t, field });
        }
    }
    Ok(DirectRun { dt, snapshots })
}

/// `⟨Ψ|H̆[Ψ]|Ψ⟩ = ⟨p̂²⟩σ − εσ + ϰ∫(K ∗ |Ψ|²)|Ψ|²`, unnormalized.
pub fn dissipative_form(cfg: &SplitStepConfig, psi: &WaveField) -> f64 {
    let p = &cfg.params;
    let n = cfg.grid.n as f64;
    let spec = forward(psi.samples());
    let kinetic: f64 = spec
        .iter()
        .zip(cfg.grid.wavenumbers())
        .map(|(v, k)| v.norm_sqr() * (p.hbar * k).powi(2))
        .sum::<f64>()
        * cfg.grid.dx
        / n;
    let rho = density(psi.samples());
    let u = cfg.kernel.apply(&rho);
    let nonlocal: f64 = rho.iter().zip(&u).map(|(r, uu)| r * uu).sum::<f64>() * cfg.grid.dx;
    kinetic - p.eps * psi.norm_sq() + p.kappa * nonlocal
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormRate {
    pub t: f64,
    pub sigma: f64,
    /// `|σ̇ + 2Λ⟨Ψ|H̆[Ψ]|Ψ⟩|` with σ̇ from a five-point stencil.
    pub residual: f64,
}

/// Residual of the norm-rate identity at every interior snapshot. The
/// snapshots must be equally spaced.
pub fn norm_rate_check(snapshots: &[Snapshot], cfg: &SplitStepConfig) -> Result<Vec<NormRate>> {
    if snapshots.len() < 5 {
        return Err(Error::Argument(format!(
            "norm-rate check needs 5 snapshots, got {}",
            snapshots.len()
        )));
    }
    let h = snapshots[1].t - snapshots[0].t;
    if !(h > 0.0)
        || snapshots
            .windows(2)
            .any(|w| ((w[1].t - w[0].t) - h).abs() > 1e-9 * h.max(1.0))
    {
        return Err(Error::Argument("snapshots are not equally spaced".into()));
    }
    let sigma: Vec<f64> = snapshots.iter().map(|s| s.field.norm_sq()).collect();
    Ok((2..snapshots.len() - 2)
        .map(|i| {
            let rate = (sigma[i - 2] - 8.0 * sigma[i - 1] + 8.0 * sigma[i + 1] - sigma[i + 2])
                / (12.0 * h);
            let form = dissipative_form(cfg, &snapshots[i].field);
            NormRate {
                t: snapshots[i].t,
                sigma: sigma[i],
                residual: (rate + 2.0 * cfg.params.lambda * form).abs(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationRow {
    pub hbar: f64,
    pub t: f64,
    /// `|σ_Ψ − σ(t)|`.
    pub err_sigma: f64,
    /// `max |⟨ẑ⟩_Ψ − Z(t)|` over the components.
    pub err_z: f64,
    /// Central second moment in x divided by ħ.
    pub delta_xx_over_hbar: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationReport {
    pub rows: Vec<ConcentrationRow>,
    /// Fitted exponents of the errors in ħ; `None` when an error vanishes.
    pub sigma_exponent: Option<f64>,
    pub z_exponent: Option<f64>,
}

/// Compare direct runs at several ħ to the ħ-independent trajectory `(σ, Z)`
/// at time `t`.
pub fn concentration_check(
    runs: &[(f64, &DirectRun)],
    traj: &Trajectory,
    t: f64,
) -> Result<ConcentrationReport> {
    let state = traj.state_at(t)?;
    let rows = runs
        .iter()
        .map(|&(hbar, run)| {
            let psi = &run.at(t)?.field;
            let c = centroid(psi)?;
            let err_z = (&c - state.base.z.as_vector()).amax();
            let about = PhasePoint::from_vector(c.clone())?;
            let m = central_moments(psi, &about, 2)?;
            Ok(ConcentrationRow {
                hbar,
                t,
                err_sigma: (psi.norm_sq() - state.base.sigma).abs(),
                err_z,
                delta_xx_over_hbar: m.get(0, 2).unwrap_or(f64::NAN) / hbar,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let hs: Vec<f64> = rows.iter().map(|r| r.hbar).collect();
    let fit = |ys: Vec<f64>| log_log_slope(&hs, &ys);
    Ok(ConcentrationReport {
        sigma_exponent: fit(rows.iter().map(|r| r.err_sigma).collect()),
        z_exponent: fit(rows.iter().map(|r| r.err_z).collect()),
        rows,
    })
}

/// Least-squares slope of `ln y` against `ln x`; `None` with fewer than two
/// points or a non-positive value.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 || xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom_laser::Panel;
    use crate::grid_analysis::GaussianTag;

    fn params(lambda: f64, kappa: f64) -> AtomLaserParams {
        AtomLaserParams {
            lambda,
            kappa,
            ..AtomLaserParams::fig1(Panel::A)
        }
    }

    fn start(p: &AtomLaserParams, grid: Grid) -> WaveField {
        WaveField::from_gaussian(grid, p.hbar, p.initial_tag())
    }

    /// Free spreading of `exp(iΓ₀(x−x₀)²/(2ħ) + ip₀(x−x₀)/ħ)` under `c₁p̂²`.
    fn free_gaussian(p: &AtomLaserParams, tag: &GaussianTag, x: f64, t: f64) -> Complex64 {
        let h = p.hbar;
        let g0 = tag.width;
        let d = 1.0 + 2.0 * p.c1 * t * g0;
        let g = g0 / d;
        let xc = tag.center + 2.0 * p.c1 * tag.momentum * t;
        let y = x - xc;
        let phase = tag.momentum * y + g * y * y / 2.0 + p.c1 * tag.momentum * tag.momentum * t;
        tag.amplitude / d.sqrt() * (I * phase / h).exp()
    }

    #[test]
    fn free_split_step_matches_spreading_gaussian() {
        let p = params(0.0, 0.0).with_momentum(0.3);
        let grid = Grid::centered(32.0, 2048).unwrap();
        let cfg = SplitStepConfig::new(p, grid, 1e-3)
            .unwrap()
            .with_stride(1000);
        let run = split_step_evolve(&cfg, &start(&p, grid), 1.0).unwrap();
        let tag = p.initial_tag();
        let exact = WaveField::from_fn(grid, p.hbar, |x| free_gaussian(&p, &tag, x, 1.0)).unwrap();
        assert!((run.last().t - 1.0).abs() < 1e-12);
        assert!(run.last().field.relative_l2_distance(&exact).unwrap() < 1e-6);
    }

    #[test]
    fn linear_dissipation_is_exact_per_mode() {
        let p = params(2.0, 0.0);
        let grid = Grid::centered(32.0, 1024).unwrap();
        let cfg = SplitStepConfig::new(p, grid, 1e-2).unwrap().with_stride(50);
        let psi0 = start(&p, grid);
        let run = split_step_evolve(&cfg, &psi0, 0.5).unwrap();
        let k = grid.wavenumbers();
        let before = forward(psi0.samples());
        let after = forward(run.last().field.samples());
        let peak = before.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for j in 0..grid.n {
            let rate =
                -I * p.hbar * p.c1 * k[j] * k[j] + p.lambda * (p.eps - (p.hbar * k[j]).powi(2));
            let expect = before[j] * (rate * 0.5).exp();
            assert!((after[j] - expect).norm() < 1e-8 * peak, "mode {j}");
        }
    }

    #[test]
    fn strang_splitting_is_second_order() {
        let p = params(2.0, 0.2).with_momentum(0.4);
        let grid = Grid::centered(32.0, 512).unwrap();
        let psi0 = start(&p, grid);
        let end = |dt: f64| {
            let cfg = SplitStepConfig::new(p, grid, dt)
                .unwrap()
                .with_stride(usize::MAX);
            split_step_evolve(&cfg, &psi0, 0.5)
                .unwrap()
                .last()
                .field
                .clone()
        };
        let (a, b, c) = (end(0.02), end(0.01), end(0.005));
        let ratio = a.l2_distance(&b).unwrap() / b.l2_distance(&c).unwrap();
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn lie_splitting_is_first_order() {
        let p = params(2.0, 0.2).with_momentum(0.4);
        let grid = Grid::centered(32.0, 512).unwrap();
        let psi0 = start(&p, grid);
        let end = |dt: f64| {
            let cfg = SplitStepConfig::new(p, grid, dt)
                .unwrap()
                .with_scheme(Scheme::Lie)
                .with_stride(usize::MAX);
            split_step_evolve(&cfg, &psi0, 0.5)
                .unwrap()
                .last()
                .field
                .clone()
        };
        let (a, b, c) = (end(0.02), end(0.01), end(0.005));
        let ratio = a.l2_distance(&b).unwrap() / b.l2_distance(&c).unwrap();
        assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn fft_convolution_matches_quadrature() {
        let grid = Grid::centered(32.0, 128).unwrap();
        let conv = Convolution::new(&grid, |d| (-d * d).exp());
        let f: Vec<f64> = (0..grid.n)
            .map(|j| {
                let x = grid.x(j);
                (-(x - 1.0).powi(2) / 2.0).exp() * (1.0 + 0.3 * x.sin())
            })
            .collect();
        let fast = conv.apply(&f);
        for i in 0..grid.n {
            let slow: f64 = (0..grid.n)
                .map(|j| (-(grid.x(i) - grid.x(j)).powi(2)).exp() * f[j])
                .sum::<f64>()
                * grid.dx;
            assert!((fast[i] - slow).abs() < 1e-10, "i = {i}");
        }
    }

    #[test]
    fn conservative_run_keeps_the_norm() {
        let p = params(0.0, 0.2);
        let grid = Grid::centered(32.0, 1024).unwrap();
        let cfg = SplitStepConfig::new(p, grid, 1e-3).unwrap().with_stride(10);
        let run = split_step_evolve(&cfg, &start(&p, grid), 0.3).unwrap();
        let rates = norm_rate_check(&run.snapshots, &cfg).unwrap();
        assert!(rates.iter().all(|r| r.residual < 1e-8));
    }

    #[test]
    fn norm_rate_identity_for_the_atom_laser() {
        let p = params(2.0, 0.2);
        let grid = Grid::centered(32.0, 2048).unwrap();
        let cfg = SplitStepConfig::new(p, grid, 1e-3).unwrap();
        let run = split_step_evolve(&cfg, &start(&p, grid), 0.2).unwrap();
        for r in norm_rate_check(&run.snapshots, &cfg).unwrap() {
            assert!(r.residual < 1e-5 * r.sigma, "t = {}: {}", r.t, r.residual);
        }
    }

    #[test]
    fn norm_rate_check_rejects_a_non_solution() {
        let p = params(2.0, 0.2);
        let grid = Grid::centered(32.0, 1024).unwrap();
        let cfg = SplitStepConfig::new(p, grid, 1e-3).unwrap();
        // wandering Gaussians with a fixed norm do not solve the dissipative equation
        let snapshots: Vec<Snapshot> = (0..7)
            .map(|i| {
                let tag = GaussianTag {
                    center: 0.3 * (i as f64).sin(),
                    momentum: (i as f64 * 1.7).cos(),
                    ..p.initial_tag()
                };
                Snapshot {
                    t: 0.01 * i as f64,
                    field: WaveField::from_gaussian(grid, p.hbar, tag),
                }
            })
            .collect();
        let rates = norm_rate_check(&snapshots, &cfg).unwrap();
        assert!(rates.iter().all(|r| r.residual > 0.1), "{rates:?}");
        assert!(norm_rate_check(&snapshots[..4], &cfg).is_err());
    }

    #[test]
    fn unstable_step_is_rejected() {
        let p = params(2.0, 0.2);
        let grid = Grid::centered(32.0, 2048).unwrap();
        assert!(matches!(
            SplitStepConfig::new(p, grid, 0.01),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn runaway_norm_is_a_blow_up() {
        // strong attraction with gain drives the norm far past the linear bound
        let p = AtomLaserParams {
            lambda: 2.0,
            kappa: -20.0,
            ..AtomLaserParams::fig1(Panel::A)
        };
        let grid = Grid::centered(32.0, 1024).unwrap();
        let cfg = SplitStepConfig::new(p, grid, 1e-3)
            .unwrap()
            .with_stride(usize::MAX);
        let err = split_step_evolve(&cfg, &start(&p, grid), 2.0).unwrap_err();
        assert!(matches!(err, Error::BlowUp { .. }), "{err:?}");
    }

    #[test]
    fn slope_fit() {
        let xs = [0.2, 0.1, 0.05];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(0.7)).collect();
        assert!((log_log_slope(&xs, &ys).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(log_log_slope(&xs, &[1.0, 0.0, 1.0]), None);
        assert_eq!(log_log_slope(&xs[..1], &ys[..1]), None);
    }

    #[test]
    fn free_centroid_follows_the_trajectory_exactly() {
        use crate::atom_laser::build_model;
        use crate::grid_analysis::initial_moments;
        use crate::hesd::{integrate_hesd, HesdOptions};
        let base = params(0.0, 0.0).with_momentum(0.5);
        let mut runs = Vec::new();
        let mut traj = None;
        for h in [0.2, 0.1] {
            let p = base.with_hbar(h);
            let grid = Grid::centered(32.0, 2048).unwrap();
            let psi0 = start(&p, grid);
            let cfg = SplitStepConfig::new(p, grid, 1e-3)
                .unwrap()
                .with_stride(100);
            runs.push((h, split_step_evolve(&cfg, &psi0, 1.0).unwrap()));
            let model = build_model(&p).unwrap();
            let init = initial_moments(&psi0).unwrap();
            traj = Some(
                integrate_hesd(&model, &init, 1.0, &HesdOptions::new(0.0, 0.0), 1e-11).unwrap(),
            );
        }
        let refs: Vec<(f64, &DirectRun)> = runs.iter().map(|(h, r)| (*h, r)).collect();
        let report = concentration_check(&refs, traj.as_ref().unwrap(), 1.0).unwrap();
        for row in &report.rows {
            assert!(row.err_z < 1e-8 && row.err_sigma < 1e-10, "{row:?}");
            // free width at t = 1: ζ²(1 + (2c₁t/ζ²)²)/2
            assert!((row.delta_xx_over_hbar - 1.0).abs() < 1e-7, "{row:?}");
        }
    }
}
