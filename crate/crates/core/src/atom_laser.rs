//! Pumped dissipative condensate with a Gaussian nonlocal interaction:
//!
//! ```text
//! V = c₁p²,  W = c₂ e^{−(x−y)²/γ²},  V̆ = −ε + p²,  W̆ = e^{−(x−y)²/γ²}
//! ```
//!
//! with closed forms for the norm, the example-form norm correction, and the
//! leading term started from a centred Gaussian.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::alsed::{continued_sqrt, PropagatorMatrix};
use crate::error::{Error, Result};
use crate::grid_analysis::{GaussianTag, Grid, WaveField};
use crate::hesd::Trajectory;
use crate::ode::{self, Verdict};
use crate::phase_space::{PairHessian, PairSymbol, PointSymbol, SymbolModel};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomLaserParams {
    pub c1: f64,
    pub c2: f64,
    pub eps: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub hbar: f64,
    /// Initial norm N.
    pub n_atoms: f64,
    pub zeta: f64,
    /// Boost and displacement of the initial Gaussian; both zero in the
    /// reference configuration.
    pub p0: f64,
    pub x0: f64,
}

/// Panels of the reference density figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Panel {
    A,
    B,
    C,
}

impl Panel {
    pub const ALL: [Panel; 3] = [Panel::A, Panel::B, Panel::C];

    pub fn label(self) -> &'static str {
        match self {
            Panel::A => "a",
            Panel::B => "b",
            Panel::C => "c",
        }
    }
}

impl AtomLaserParams {
    /// c₁ = ½, c₂ = 1, ε = ½, ħ = 0.2, N = ½, ζ = 1, γ = 1 and the panel's
    /// (Λ, ϰ): (a) (2, 0.2), (b) (2, 0), (c) (0, 0.2).
    pub fn fig1(panel: Panel) -> Self {
        let (lambda, kappa) = match panel {
            Panel::A => (2.0, 0.2),
            Panel::B => (2.0, 0.0),
            Panel::C => (0.0, 0.2),
        };
        Self {
            c1: 0.5,
            c2: 1.0,
            eps: 0.5,
            gamma: 1.0,
            lambda,
            kappa,
            hbar: 0.2,
            n_atoms: 0.5,
            zeta: 1.0,
            p0: 0.0,
            x0: 0.0,
        }
    }

    pub fn with_momentum(mut self, p0: f64) -> Self {
        self.p0 = p0;
        self
    }

    pub fn with_hbar(mut self, hbar: f64) -> Self {
        self.hbar = hbar;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.c1,
            self.c2,
            self.eps,
            self.gamma,
            self.lambda,
            self.kappa,
            self.hbar,
            self.n_atoms,
            self.zeta,
            self.p0,
            self.x0,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("non-finite model parameter".into()));
        }
        for (name, v) in [
            ("gamma", self.gamma),
            ("hbar", self.hbar),
            ("zeta", self.zeta),
            ("N", self.n_atoms),
        ] {
            if v <= 0.0 {
                return Err(Error::Argument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// The initial Gaussian `√(N/(ζ√(πħ))) exp(−x²/(2ħζ²))`, boosted by `p0`
    /// and centred at `x0`.
    pub fn initial_tag(&self) -> GaussianTag {
        GaussianTag {
            center: self.x0,
            momentum: self.p0,
            ..GaussianTag::atom_laser(self.n_atoms, self.zeta, self.hbar)
        }
    }
}

/// `offset + scale·|p|²`.
#[derive(Debug, Clone, Copy)]
pub struct MomentumQuadratic {
    pub offset: f64,
    pub scale: f64,
}

impl PointSymbol for MomentumQuadratic {
    fn value(&self, z: &[f64], _t: f64) -> f64 {
        let n = z.len() / 2;
        self.offset + self.scale * z[..n].iter().map(|p| p * p).sum::<f64>()
    }

    fn gradient(&self, z: &[f64], _t: f64) -> Option<DVector<f64>> {
        let n = z.len() / 2;
        Some(DVector::from_fn(2 * n, |i, _| {
            if i < n {
                2.0 * self.scale * z[i]
            } else {
                0.0
            }
        }))
    }

    fn hessian(&self, z: &[f64], _t: f64) -> Option<DMatrix<f64>> {
        let n = z.len() / 2;
        Some(DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            if i == j && i < n {
                2.0 * self.scale
            } else {
                0.0
            }
        }))
    }
}

/// `amplitude·exp(−|x − y|²/γ²)`, independent of both momenta.
#[derive(Debug, Clone, Copy)]
pub struct GaussianKernel {
    pub amplitude: f64,
    pub gamma: f64,
}

impl GaussianKernel {
    fn parts(&self, z: &[f64], w: &[f64]) -> (usize, Vec<f64>, f64) {
        let n = z.len() / 2;
        let d: Vec<f64> = (0..n).map(|i| z[n + i] - w[n + i]).collect();
        let r2: f64 = d.iter().map(|v| v * v).sum();
        (
            n,
            d,
            self.amplitude * (-r2 / (self.gamma * self.gamma)).exp(),
        )
    }
}

impl PairSymbol for GaussianKernel {
    fn value(&self, z: &[f64], w: &[f64], _t: f64) -> f64 {
        self.parts(z, w).2
    }

    fn gradient(&self, z: &[f64], w: &[f64], _t: f64) -> Option<(DVector<f64>, DVector<f64>)> {
        let (n, d, k) = self.parts(z, w);
        let g2 = self.gamma * self.gamma;
        let gz = DVector::from_fn(
            2 * n,
            |i, _| if i < n { 0.0 } else { -2.0 * d[i - n] * k / g2 },
        );
        let gw = -gz.clone();
        Some((gz, gw))
    }

    fn hessian(&self, z: &[f64], w: &[f64], _t: f64) -> Option<PairHessian> {
        let (n, d, k) = self.parts(z, w);
        let g2 = self.gamma * self.gamma;
        // ∂²/∂xᵢ∂xⱼ of k = k(4dᵢdⱼ/γ⁴ − 2δᵢⱼ/γ²)
        let zz = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            if i < n || j < n {
                return 0.0;
            }
            let (a, b) = (i - n, j - n);
            let delta = if a == b { 1.0 } else { 0.0 };
            k * (4.0 * d[a] * d[b] / (g2 * g2) - 2.0 * delta / g2)
        });
        Some(PairHessian {
            zw: -zz.clone(),
            ww: zz.clone(),
            zz,
        })
    }
}

/// Symbol model with analytic derivatives for all four symbols.
pub fn build_model(p: &AtomLaserParams) -> Result<SymbolModel> {
    p.validate()?;
    SymbolModel::new(
        1,
        Arc::new(MomentumQuadratic {
            offset: 0.0,
            scale: p.c1,
        }),
        Arc::new(MomentumQuadratic {
            offset: -p.eps,
            scale: 1.0,
        }),
        Arc::new(GaussianKernel {
            amplitude: p.c2,
            gamma: p.gamma,
        }),
        Arc::new(GaussianKernel {
            amplitude: 1.0,
            gamma: p.gamma,
        }),
    )
}

fn denominator(p: &AtomLaserParams, t: f64) -> f64 {
    let a = 2.0 * p.lambda * p.eps;
    p.eps + p.n_atoms * p.kappa * (a * t).exp_m1()
}

/// First time at which `σ(t)` leaves `(0, ∞)`, if any.
pub fn horizon(p: &AtomLaserParams) -> Option<f64> {
    let a = 2.0 * p.lambda * p.eps;
    if a == 0.0 || p.kappa == 0.0 {
        return None;
    }
    // ε + Nϰ(e^{at} − 1) = 0
    let e = 1.0 - p.eps / (p.n_atoms * p.kappa);
    if e <= 0.0 {
        return None;
    }
    let t = e.ln() / a;
    (t > 0.0).then_some(t)
}

/// `σ(t) = Nε e^{2Λεt} / (ε + Nϰ(e^{2Λεt} − 1))`.
pub fn sigma_closed(p: &AtomLaserParams, t: f64) -> Result<f64> {
    if let Some(h) = horizon(p) {
        if t >= h {
            return Err(Error::ValidityHorizonReached {
                t: h,
                partial: None,
            });
        }
    }
    let a = 2.0 * p.lambda * p.eps;
    if p.eps == 0.0 {
        // limit ε → 0: σ̇ = −2Λϰσ²
        return Ok(p.n_atoms / (1.0 + 2.0 * p.lambda * p.kappa * p.n_atoms * t));
    }
    Ok(p.n_atoms * p.eps * (a * t).exp() / denominator(p, t))
}

/// Right-hand side of the reduced `σ⁽¹⁾` equation in its example form,
/// `−2Λσα_pp c₁ − 2Λϰσσ⁽¹⁾(1 + c₂)`.
pub fn sigma1_example_rate(p: &AtomLaserParams, sigma: f64, alpha_pp: f64, sigma1: f64) -> f64 {
    -2.0 * p.lambda * sigma * alpha_pp * p.c1
        - 2.0 * p.lambda * p.kappa * sigma * sigma1 * (1.0 + p.c2)
}

/// `σ⁽¹⁾(t) = −2Λc₁ v⁻¹(t) ∫₀ᵗ v σ α_pp dτ` with
/// `v = (ε + Nϰ(e^{2Λετ} − 1))^{1+c₂}`.
pub fn sigma1_quadrature(
    p: &AtomLaserParams,
    t: f64,
    alpha_pp: impl Fn(f64) -> Result<f64>,
) -> Result<f64> {
    if p.lambda == 0.0 || t == 0.0 {
        return Ok(0.0);
    }
    let v = |tau: f64| denominator(p, tau).powf(1.0 + p.c2);
    let integrand = |tau: f64, _: &[f64], dy: &mut [f64]| -> Result<()> {
        dy[0] = v(tau) * sigma_closed(p, tau)? * alpha_pp(tau)?;
        Ok(())
    };
    let opts = ode::Options::with_tol(1e-13);
    let run = ode::integrate(integrand, 0.0, &[0.0], t, &opts, |_| Verdict::Continue)?;
    Ok(-2.0 * p.lambda * p.c1 * run.solution.last()[0] / v(t))
}

/// `H(t) = c₂ϰσ − ħc₂ϰσα_xx/γ² + ħc₂ϰσ⁽¹⁾ + iħΛε − iħΛϰσ` for the centred
/// Gaussian, with σ in closed form and α_xx, σ⁽¹⁾ from `traj`.
pub fn scalar_hamiltonian(p: &AtomLaserParams, traj: &Trajectory, t: f64) -> Result<Complex64> {
    let s = traj.state_at(t)?;
    let sigma = sigma_closed(p, t)?;
    let g2 = p.gamma * p.gamma;
    let h = p.hbar;
    Ok(Complex64::new(
        p.c2 * p.kappa * sigma - h * p.c2 * p.kappa * sigma * s.delta2[(1, 1)] / g2
            + h * p.c2 * p.kappa * s.sigma1,
        h * p.lambda * p.eps - h * p.lambda * p.kappa * sigma,
    ))
}

/// Closed-form leading term on a grid at time `t`.
pub fn psi0_closed_field(
    p: &AtomLaserParams,
    grid: Grid,
    t: f64,
    traj: &Trajectory,
    prop: &PropagatorMatrix,
) -> Result<WaveField> {
    let eval = ClosedForm::new(p, t, traj, prop)?;
    WaveField::from_fn(grid, p.hbar, |x| eval.at(x))
}

/// Closed-form leading term at one point.
pub fn psi0_closed(
    p: &AtomLaserParams,
    x: f64,
    t: f64,
    traj: &Trajectory,
    prop: &PropagatorMatrix,
) -> Result<Complex64> {
    Ok(ClosedForm::new(p, t, traj, prop)?.at(x))
}

struct ClosedForm {
    prefactor: Complex64,
    quad: Complex64,
    hbar: f64,
}

impl ClosedForm {
    fn new(
        p: &AtomLaserParams,
        t: f64,
        traj: &Trajectory,
        prop: &PropagatorMatrix,
    ) -> Result<Self> {
        p.validate()?;
        if p.p0 != 0.0 || p.x0 != 0.0 {
            return Err(Error::Argument(
                "closed form assumes a centred Gaussian at rest".into(),
            ));
        }
        let z2 = p.zeta * p.zeta;
        let h = p.hbar;
        let base = p.n_atoms * p.zeta / (std::f64::consts::PI * h).sqrt();
        if t == 0.0 {
            return Ok(Self {
                prefactor: Complex64::new((base / z2).sqrt(), 0.0),
                quad: I / z2,
                hbar: h,
            });
        }
        let denom = |tau: f64| -> Result<Complex64> {
            let b = prop.blocks(tau)?;
            Ok(b.m4[(0, 0)] * z2 - I * b.m3[(0, 0)])
        };
        let mut root = Complex64::new(p.zeta, 0.0);
        for tau in prop.nodes().into_iter().filter(|&s| s > 0.0 && s < t) {
            root = continued_sqrt(denom(tau)?, root);
        }
        let d = denom(t)?;
        if d.norm() == 0.0 {
            return Err(Error::FocalPoint { t });
        }
        root = continued_sqrt(d, root);

        let rhs = |tau: f64, _: &[f64], dy: &mut [f64]| -> Result<()> {
            let hh = scalar_hamiltonian(p, traj, tau)?;
            dy[0] = hh.re;
            dy[1] = hh.im;
            Ok(())
        };
        let run = ode::integrate(
            rhs,
            0.0,
            &[0.0, 0.0],
            t,
            &ode::Options::with_tol(1e-13),
            |_| Verdict::Continue,
        )?;
        let y = run.solution.last();
        let h_int = Complex64::new(y[0], y[1]);

        let b = prop.blocks(t)?;
        let (m1, m3, m4) = (b.m1[(0, 0)], b.m3[(0, 0)], b.m4[(0, 0)]);
        // −x²/(2ħ)·ratio written as (i/ħ)(quad/2)x²
        let ratio = (z2 * (1.0 - m1 * m4) + I * m1 * m3) / (m3 * (m3 + I * m4 * z2));
        Ok(Self {
            prefactor: base.sqrt() / root * (-I * h_int / h).exp(),
            quad: I * ratio,
            hbar: h,
        })
    }

    fn at(&self, x: f64) -> Complex64 {
        self.prefactor * (I * 0.5 * self.quad * x * x / self.hbar).exp()
    }
}

/// One row block of a density panel.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelSlice {
    pub t: f64,
    pub xs: Vec<f64>,
    pub density: Vec<f64>,
    /// `‖Ψ⁽⁰⁾‖²` integrated on a fine grid.
    pub total: f64,
}

/// Densities `|Ψ⁽⁰⁾(x, t)|²` at `xs` for each time, with the total norm taken
/// on a 2048-point grid of length 32.
pub fn density_panel(
    p: &AtomLaserParams,
    times: &[f64],
    xs: &[f64],
    ode_tol: f64,
) -> Result<Vec<PanelSlice>> {
    use crate::alsed::propagator_matrix;
    use crate::grid_analysis::initial_moments;
    use crate::hesd::{integrate_hesd, HesdOptions};

    let t_max = times.iter().copied().fold(0.0, f64::max);
    let grid = Grid::centered(32.0, 2048)?;
    let phi = WaveField::from_gaussian(grid, p.hbar, p.initial_tag());
    let model = build_model(p)?;
    let traj = integrate_hesd(
        &model,
        &initial_moments(&phi)?,
        t_max,
        &HesdOptions::new(p.lambda, p.kappa),
        ode_tol,
    )?;
    let prop = propagator_matrix(&traj, ode_tol)?;
    times
        .iter()
        .map(|&t| {
            let eval = ClosedForm::new(p, t, &traj, &prop)?;
            let total = WaveField::from_fn(grid, p.hbar, |x| eval.at(x))?.norm_sq();
            Ok(PanelSlice {
                t,
                xs: xs.to_vec(),
                density: xs.iter().map(|&x| eval.at(x).norm_sqr()).collect(),
                total,
            })
        })
        .collect()
}
