//! The associated linear equation with dissipation: its quadratic
//! Hamiltonian along a trajectory, the propagator matrix M(t), the Green's
//! function, and the leading-order evolution of initial states.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid_analysis::{GaussianTag, WaveField};
use crate::hesd::{Hesd2State, LocalSymbols, Trajectory};
use crate::ode::{self, DenseSolution, Verdict};
use crate::phase_space::SymplecticForm;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `H⁽¹⁾ = (ϰ/2)σ Sp[W_ww Δ₂⁽¹⁾] + ϰσ⟨W_w, Z⁽¹⁾⟩ + ϰσ⁽¹⁾W − iΛ(V̆ + ϰσW̆)`.
pub(crate) fn first_order_coefficient(
    local: &LocalSymbols,
    state: &Hesd2State,
    lambda: f64,
    kappa: f64,
) -> Complex64 {
    let sigma = state.base.sigma;
    let w_ww = local.w.hess_ww.as_ref().expect("pair symbol");
    let w_w = local.w.grad_w.as_ref().expect("pair symbol");
    let re = 0.5 * kappa * sigma * w_ww.component_mul(&state.delta2).sum()
        + kappa * sigma * w_w.dot(&state.z1)
        + kappa * state.sigma1 * local.w.value;
    let im = -lambda * (local.v_breve.value + kappa * sigma * local.w_breve.value);
    Complex64::new(re, im)
}

/// Coefficients of the quadratic operator
/// `H + ⟨H_z, Δẑ⟩ + ½⟨Δẑ, H_zz Δẑ⟩` at one instant; `H = H⁽⁰⁾ + ħH⁽¹⁾`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveHamiltonian {
    pub h0: f64,
    pub h1: Complex64,
    pub hz: DVector<f64>,
    pub hzz: DMatrix<f64>,
}

impl EffectiveHamiltonian {
    pub fn scalar(&self, hbar: f64) -> Complex64 {
        self.h0 + self.h1 * hbar
    }
}

/// Sample the effective Hamiltonian along `traj` at time `t`.
pub fn effective_hamiltonian(traj: &Trajectory, t: f64) -> Result<EffectiveHamiltonian> {
    let state = traj.state_at(t)?;
    let opts = traj.options();
    let local = LocalSymbols::at(traj.model(), &state.base.z, t)?;
    let (kappa, sigma) = (opts.kappa, state.base.sigma);
    Ok(EffectiveHamiltonian {
        h0: local.v.value + kappa * sigma * local.w.value,
        h1: first_order_coefficient(&local, &state, opts.lambda, kappa),
        hz: &local.v.grad_z + &local.w.grad_z * (kappa * sigma),
        hzz: local.h_zz(kappa, sigma),
    })
}

/// `H_zz(t)` alone, which is all the linear flows need.
pub fn hessian_along(traj: &Trajectory, t: f64) -> Result<DMatrix<f64>> {
    let state = traj.state_at(t)?;
    let local = LocalSymbols::at(traj.model(), &state.base.z, t)?;
    Ok(local.h_zz(traj.options().kappa, state.base.sigma))
}

/// Solution of `Ṁ = −M H_zz(t) J`, `M(0) = I`, with blocks
/// `M = [[M₁, −M₃], [−M₂, M₄]]`.
#[derive(Debug, Clone)]
pub struct PropagatorMatrix {
    n: usize,
    solution: DenseSolution,
}

/// The four n×n blocks of M at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Blocks {
    pub m1: DMatrix<f64>,
    pub m2: DMatrix<f64>,
    pub m3: DMatrix<f64>,
    pub m4: DMatrix<f64>,
}

impl PropagatorMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t_end(&self) -> f64 {
        self.solution.t_end()
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.solution.nodes()
    }

    pub fn matrix(&self, t: f64) -> Result<DMatrix<f64>> {
        let m = 2 * self.n;
        Ok(DMatrix::from_column_slice(m, m, &self.solution.eval(t)?))
    }

    pub fn blocks(&self, t: f64) -> Result<Blocks> {
        let mat = self.matrix(t)?;
        let n = self.n;
        Ok(Blocks {
            m1: mat.view((0, 0), (n, n)).into_owned(),
            m3: -mat.view((0, n), (n, n)).into_owned(),
            m2: -mat.view((n, 0), (n, n)).into_owned(),
            m4: mat.view((n, n), (n, n)).into_owned(),
        })
    }

    /// `‖M J Mᵀ − J‖_∞` at `t`.
    pub fn symplectic_defect(&self, t: f64) -> Result<f64> {
        let mat = self.matrix(t)?;
        let j = SymplecticForm::new(self.n).matrix();
        Ok((&mat * &j * mat.transpose() - j).amax())
    }

    /// `Mᵀ(t) Δ M(t)`, the transported dispersion matrix.
    pub fn transport(&self, delta0: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
        let mat = self.matrix(t)?;
        Ok(mat.transpose() * delta0 * mat)
    }
}

/// Integrate the propagator matrix along `traj` to its end time.
pub fn propagator_matrix(traj: &Trajectory, tol: f64) -> Result<PropagatorMatrix> {
    let n = traj.n();
    let m = 2 * n;
    let id = DMatrix::<f64>::identity(m, m);
    let t_end = traj.t_end();
    if t_end == 0.0 {
        return Ok(PropagatorMatrix {
            n,
            solution: DenseSolution::instant(0.0, id.as_slice()),
        });
    }
    let j = SymplecticForm::new(n).matrix();
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let mat = DMatrix::from_column_slice(m, m, y);
        let hzz = hessian_along(traj, t)?;
        let rate = -(mat * hzz * &j);
        dy.copy_from_slice(rate.as_slice());
        Ok(())
    };
    let run = ode::integrate(
        rhs,
        0.0,
        id.as_slice(),
        t_end,
        &ode::Options::with_tol(tol),
        |_| Verdict::Continue,
    )?;
    Ok(PropagatorMatrix {
        n,
        solution: run.solution,
    })
}

/// Green's function of the associated linear equation for one trajectory and
/// one value of ħ.
#[derive(Debug, Clone)]
pub struct GreensKernel {
    traj: Trajectory,
    prop: PropagatorMatrix,
    hbar: f64,
    /// `Σ sign eig(−M₃)` just after `t = 0`.
    maslov_count: i32,
    initial_det_sign: f64,
}

impl GreensKernel {
    pub fn new(traj: Trajectory, prop: PropagatorMatrix, hbar: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::Argument(format!("hbar = {hbar}")));
        }
        if prop.n() != traj.n()
            || (prop.t_end() - traj.t_end()).abs() > 1e-12 * traj.t_end().max(1.0)
        {
            return Err(Error::Argument(
                "propagator does not match trajectory".into(),
            ));
        }
        let mut kernel = Self {
            traj,
            prop,
            hbar,
            maslov_count: 0,
            initial_det_sign: 1.0,
        };
        if let Some(&t1) = kernel.prop.nodes().get(1) {
            let m3 = kernel.prop.blocks(t1.min(1e-6))?.m3;
            let sym = -(&m3 + m3.transpose()) * 0.5;
            let eig = sym.symmetric_eigenvalues();
            kernel.maslov_count = eig.iter().map(|e| e.signum() as i32).sum();
            kernel.initial_det_sign = m3.determinant().signum();
        }
        Ok(kernel)
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    pub fn propagator(&self) -> &PropagatorMatrix {
        &self.prop
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// `Θ(t) = S(t) − ħ∫₀ᵗ H⁽¹⁾ dτ`, the complex phase integral.
    pub fn phase_integral(&self, t: f64) -> Result<Complex64> {
        let s = self.traj.state_at(t)?.action;
        Ok(s - self.traj.h1_integral(t)? * self.hbar)
    }

    /// Fails with the first time in `(0, t]` where det M₃ vanishes.
    pub fn check_focal(&self, t: f64) -> Result<()> {
        if t <= 0.0 {
            return Ok(());
        }
        let det = |tau: f64| -> Result<f64> { Ok(self.prop.blocks(tau)?.m3.determinant()) };
        let s0 = self.initial_det_sign;
        let mut prev = 0.0;
        let mut probes: Vec<f64> = self
            .prop
            .nodes()
            .into_iter()
            .filter(|&s| s > 0.0 && s < t)
            .collect();
        probes.push(t);
        for tau in probes {
            let d = det(tau)?;
            if d * s0 <= 0.0 {
                let (mut lo, mut hi) = (prev, tau);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= 0.0 || det(mid)? * s0 > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return Err(Error::FocalPoint { t: hi });
            }
            prev = tau;
        }
        Ok(())
    }

    /// `det(−2πiħM₃)^{−1/2}` with the branch fixed at `t = 0⁺`.
    fn prefactor(&self, m3: &DMatrix<f64>) -> Complex64 {
        let n = m3.nrows() as i32;
        let modulus = ((2.0 * PI * self.hbar).powi(n) * m3.determinant().abs()).sqrt();
        Complex64::from_polar(1.0 / modulus, -0.25 * PI * self.maslov_count as f64)
    }

    /// Kernel value `G(x, y, t)`.
    pub fn green(&self, x: &[f64], y: &[f64], t: f64) -> Result<Complex64> {
        let n = self.traj.n();
        if x.len() != n || y.len() != n {
            return Err(Error::Argument("point dimension mismatch".into()));
        }
        if !(t > 0.0) {
            return Err(Error::Argument(format!("kernel needs t > 0, got {t}")));
        }
        self.check_focal(t)?;
        let parts = self.quadratic_parts(t)?;
        let dx = DVector::from_iterator(n, x.iter().zip(&parts.x_t).map(|(a, b)| a - b));
        let dy = DVector::from_iterator(n, y.iter().zip(&parts.x_0).map(|(a, b)| a - b));
        let expo = parts.theta + parts.p_t.dot(&dx)
            - parts.p_0.dot(&dy)
            - 0.5 * dx.dot(&(&parts.m3inv_m1 * &dx))
            + dx.dot(&(&parts.m3inv * &dy))
            - 0.5 * dy.dot(&(&parts.m4_m3inv * &dy));
        Ok(parts.prefactor * (I * expo / self.hbar).exp())
    }

    fn quadratic_parts(&self, t: f64) -> Result<QuadraticParts> {
        let b = self.prop.blocks(t)?;
        let m3inv = b.m3.clone().try_inverse().ok_or(Error::FocalPoint { t })?;
        let s0 = self.traj.state_at(0.0)?;
        let st = self.traj.state_at(t)?;
        Ok(QuadraticParts {
            theta: self.phase_integral(t)?,
            prefactor: self.prefactor(&b.m3),
            m3inv_m1: &m3inv * &b.m1,
            m4_m3inv: &b.m4 * &m3inv,
            m3inv,
            p_t: DVector::from_column_slice(st.base.z.p()),
            x_t: st.base.z.x().to_vec(),
            p_0: DVector::from_column_slice(s0.base.z.p()),
            x_0: s0.base.z.x().to_vec(),
        })
    }
}

struct QuadraticParts {
    theta: Complex64,
    prefactor: Complex64,
    m3inv: DMatrix<f64>,
    m3inv_m1: DMatrix<f64>,
    m4_m3inv: DMatrix<f64>,
    p_t: DVector<f64>,
    x_t: Vec<f64>,
    p_0: DVector<f64>,
    x_0: Vec<f64>,
}

/// `√z` continued from the previous value rather than the principal branch.
pub(crate) fn continued_sqrt(z: Complex64, prev: Complex64) -> Complex64 {
    let r = z.sqrt();
    if (r - prev).norm() <= (r + prev).norm() {
        r
    } else {
        -r
    }
}

/// Leading-order state `Ψ⁽⁰⁾(x, t) = ∫ G(x, y, t) φ(y) dy` on the grid of `phi`.
///
/// Gaussian-tagged inputs go through the exact Gaussian integral; other states
/// use the trapezoid rule, which requires the kernel phase to be resolved on
/// the grid.
pub fn evolve_leading(kernel: &GreensKernel, phi: &WaveField, t: f64) -> Result<WaveField> {
    if kernel.traj.n() != 1 {
        return Err(Error::Argument("grid evolution is one-dimensional".into()));
    }
    if (phi.hbar() - kernel.hbar).abs() > 1e-14 * kernel.hbar {
        return Err(Error::Argument(format!(
            "state carries hbar = {} but kernel uses {}",
            phi.hbar(),
            kernel.hbar
        )));
    }
    if t == 0.0 {
        return Ok(phi.clone());
    }
    if t < 0.0 {
        return Err(Error::Argument(format!("negative time {t}")));
    }
    kernel.check_focal(t)?;
    match phi.gaussian() {
        Some(tag) => {
            let tag = evolve_gaussian(kernel, tag, t)?;
            Ok(WaveField::from_gaussian(*phi.grid(), phi.hbar(), tag))
        }
        None => evolve_trapezoid(kernel, phi, t),
    }
}

/// Exact image of a Gaussian. With `d = y₀ − X₀`, `c = p₀ − P₀ − Γ₀d` and
/// `D = M₄ − Γ₀M₃` the result is Gaussian in `x − X(t)` with width
/// `(M₁Γ₀ − M₂)/D`; no inverse of M₃ is needed.
pub fn evolve_gaussian(kernel: &GreensKernel, tag: &GaussianTag, t: f64) -> Result<GaussianTag> {
    let hbar = kernel.hbar;
    let s0 = kernel.traj.state_at(0.0)?;
    let st = kernel.traj.state_at(t)?;
    let (p0_traj, x0_traj) = (s0.base.z.p()[0], s0.base.z.x()[0]);
    let (pt, xt) = (st.base.z.p()[0], st.base.z.x()[0]);
    let g0 = tag.width;
    let d = tag.center - x0_traj;
    let c = tag.momentum - p0_traj - g0 * d;

    let mut root = Complex64::new(1.0, 0.0);
    for tau in kernel
        .prop
        .nodes()
        .into_iter()
        .filter(|&s| s > 0.0 && s < t)
    {
        let b = kernel.prop.blocks(tau)?;
        root = continued_sqrt(b.m4[(0, 0)] - g0 * b.m3[(0, 0)], root);
    }
    let b = kernel.prop.blocks(t)?;
    let (m1, m2, m3, m4) = (b.m1[(0, 0)], b.m2[(0, 0)], b.m3[(0, 0)], b.m4[(0, 0)]);
    let dd = m4 - g0 * m3;
    root = continued_sqrt(dd, root);
    let width = (m1 * g0 - m2) / dd;
    let k0 =
        kernel.phase_integral(t)? + c * c * m3 / (2.0 * dd) - tag.momentum * d + g0 * d * d / 2.0;
    let k1 = pt + c / dd;
    if !(width.im > 0.0) {
        return Err(Error::Resolution(format!(
            "evolved width {width} is not decaying"
        )));
    }
    // shift to the real centre where the linear coefficient is real
    let s = -k1.im / width.im;
    let konst = k0 + k1 * s + width * s * s / 2.0;
    Ok(GaussianTag {
        amplitude: tag.amplitude / root * (I * konst / hbar).exp(),
        center: xt + s,
        momentum: (k1 + width * s).re,
        width,
    })
}

fn evolve_trapezoid(kernel: &GreensKernel, phi: &WaveField, t: f64) -> Result<WaveField> {
    let grid = *phi.grid();
    let hbar = kernel.hbar;
    let parts = kernel.quadratic_parts(t)?;
    let a = parts.m3inv[(0, 0)];
    let m4a = parts.m4_m3inv[(0, 0)];
    let (x0t, xtt, p0) = (parts.x_0[0], parts.x_t[0], parts.p_0[0]);
    let peak = phi.samples().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let support: Vec<usize> = (0..grid.n)
        .filter(|&j| phi.samples()[j].norm() > 1e-8 * peak)
        .collect();
    let (Some(&lo), Some(&hi)) = (support.first(), support.last()) else {
        return WaveField::new(grid, hbar, vec![Complex64::new(0.0, 0.0); grid.n]);
    };
    // largest ∂_y of the kernel phase over the support of φ and all outputs
    let mut slope: f64 = 0.0;
    for &x in &[grid.x(0), grid.x(grid.n - 1)] {
        for &y in &[grid.x(lo), grid.x(hi)] {
            let v = (-p0 + a * (x - xtt) - m4a * (y - x0t)) / hbar;
            slope = slope.max(v.abs());
        }
    }
    if slope * grid.dx > 0.5 * PI {
        return Err(Error::Resolution(format!(
            "kernel phase changes by {:.3} rad per cell",
            slope * grid.dx
        )));
    }
    let xs: Vec<f64> = (0..grid.n).map(|j| grid.x(j)).collect();
    let out: Vec<Complex64> = xs
        .iter()
        .map(|&x| {
            let dx = x - xtt;
            let fixed = parts.theta + parts.p_t[0] * dx - 0.5 * parts.m3inv_m1[(0, 0)] * dx * dx;
            let sum: Complex64 = (lo..=hi)
                .map(|j| {
                    let dy = xs[j] - x0t;
                    let e = fixed - p0 * dy + a * dx * dy - 0.5 * m4a * dy * dy;
                    (I * e / hbar).exp() * phi.samples()[j]
                })
                .sum();
            parts.prefactor * sum * grid.dx
        })
        .collect();
    WaveField::new(grid, hbar, out)
}

/// `∫₀ᵗ H(τ, C, ħ) dτ` for one trajectory; the ħ⁰ part by quadrature.
#[derive(Debug, Clone)]
pub struct ScalarPhase {
    h0_integral: DenseSolution,
    traj: Trajectory,
    hbar: f64,
}

impl ScalarPhase {
    pub fn new(traj: &Trajectory, hbar: f64) -> Result<Self> {
        let t_end = traj.t_end();
        let h0_integral = if t_end == 0.0 {
            DenseSolution::instant(0.0, &[0.0])
        } else {
            let rhs = |t: f64, _: &[f64], dy: &mut [f64]| -> Result<()> {
                dy[0] = effective_hamiltonian(traj, t)?.h0;
                Ok(())
            };
            let opts = ode::Options::with_tol(1e-12);
            ode::integrate(rhs, 0.0, &[0.0], t_end, &opts, |_| Verdict::Continue)?.solution
        };
        Ok(Self {
            h0_integral,
            traj: traj.clone(),
            hbar,
        })
    }

    pub fn at(&self, t: f64) -> Result<Complex64> {
        Ok(self.h0_integral.eval(t)?[0] + self.traj.h1_integral(t)? * self.hbar)
    }
}

/// `(H + ⟨H_z, Δẑ⟩ + ½⟨Δẑ, H_zz Δẑ⟩)ψ` with the quadratic form Weyl-ordered,
/// `Δx̂ = x − X(t)` and `Δp̂ = −iħ∂ₓ − P(t)`. The scalar `H` is passed in so
/// that the same quadratic part can carry another set of moment constants.
pub fn apply_alsed_operator(
    traj: &Trajectory,
    t: f64,
    scalar: Complex64,
    psi: &WaveField,
) -> Result<WaveField> {
    if traj.n() != 1 {
        return Err(Error::Argument("grid operators are one-dimensional".into()));
    }
    let eff = effective_hamiltonian(traj, t)?;
    let z = traj.state_at(t)?.base.z;
    let (pc, xc) = (z.p()[0], z.x()[0]);
    let dx = |f: &WaveField| f.map(|x, v| v * (x - xc));
    let dp = |f: &WaveField| -> Result<WaveField> { f.momentum_apply().sub(&f.scaled(pc.into())) };
    let x1 = dx(psi);
    let p1 = dp(psi)?;
    let xx = dx(&x1);
    let pp = dp(&p1)?;
    let xp = dx(&p1);
    let px = dp(&x1)?;
    let h = &eff.hzz;
    let out = (0..psi.grid().n)
        .map(|j| {
            scalar * psi.samples()[j]
                + eff.hz[0] * p1.samples()[j]
                + eff.hz[1] * x1.samples()[j]
                + 0.5 * h[(0, 0)] * pp.samples()[j]
                + 0.5 * h[(1, 1)] * xx.samples()[j]
                + 0.5 * h[(0, 1)] * (xp.samples()[j] + px.samples()[j])
        })
        .collect();
    psi.with_samples(out)
}

/// `‖(−iħ∂ₜ + Ĥ)Ψ‖ / ‖Ψ‖` at `t`, the time derivative from a five-point
/// stencil of width `dt`. `field` gives Ψ at any time; `scalar` the value of H.
pub fn alsed_residual(
    traj: &Trajectory,
    t: f64,
    dt: f64,
    scalar: impl Fn(f64) -> Result<Complex64>,
    field: impl Fn(f64) -> Result<WaveField>,
) -> Result<f64> {
    if !(dt > 0.0) || t - 2.0 * dt < 0.0 {
        return Err(Error::Argument(format!(
            "stencil of width {dt} does not fit at t = {t}"
        )));
    }
    let psi = field(t)?;
    let stencil = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];
    let mut dpsi = vec![Complex64::new(0.0, 0.0); psi.grid().n];
    for (shift, w) in stencil {
        let f = field(t + shift * dt)?;
        for (d, v) in dpsi.iter_mut().zip(f.samples()) {
            *d += v * (w / (12.0 * dt));
        }
    }
    let hpsi = apply_alsed_operator(traj, t, scalar(t)?, &psi)?;
    let hbar = psi.hbar();
    let res: Vec<Complex64> = dpsi
        .iter()
        .zip(hpsi.samples())
        .map(|(d, h)| -I * hbar * d + h)
        .collect();
    Ok(psi.with_samples(res)?.norm() / psi.norm())
}
