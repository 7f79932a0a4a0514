//! Hamilton–Ehrenfest systems with dissipation of first and second order.
//!
//! The first-order system evolves the squared norm σ and the centroid Z; the
//! second-order system adds the scaled dispersion matrix Δ₂⁽¹⁾, the centroid
//! correction Z⁽¹⁾ and the norm correction σ⁽¹⁾. All symbol data is taken at
//! `z = w = Z(t)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::alsed;
use crate::error::{Error, Result};
use crate::ode::{self, DenseSolution, Verdict};
use crate::phase_space::{
    HessianBlock, PhasePoint, Symbol, SymbolDerivatives, SymbolModel, SymplecticForm,
};

/// Zeroth and first moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Hesd1State {
    pub sigma: f64,
    pub z: PhasePoint,
}

/// Full second-order state, including the classical action.
#[derive(Debug, Clone, PartialEq)]
pub struct Hesd2State {
    pub base: Hesd1State,
    /// Δ₂⁽¹⁾ in `(p, x)` ordering.
    pub delta2: DMatrix<f64>,
    pub z1: DVector<f64>,
    pub sigma1: f64,
    pub action: f64,
}

impl Hesd2State {
    /// State with vanishing corrections around `(sigma, z)`.
    pub fn leading(sigma: f64, z: PhasePoint, delta2: DMatrix<f64>) -> Self {
        let m = 2 * z.dim();
        Self {
            base: Hesd1State { sigma, z },
            delta2,
            z1: DVector::zeros(m),
            sigma1: 0.0,
            action: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.base.z.dim()
    }
}

/// How the `σ⁽¹⁾` term proportional to σ⁽¹⁾ itself is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sigma1Form {
    /// `−2Λσ⁽¹⁾H̆`, the first-order expansion of the exact norm balance.
    #[default]
    NormIdentity,
    /// `−2Λσ⁽¹⁾H` with the conservative `H = V + ϰσW`.
    ConservativeWeight,
}

impl Sigma1Form {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "norm_identity" => Some(Self::NormIdentity),
            "conservative" => Some(Self::ConservativeWeight),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::NormIdentity => "norm_identity",
            Self::ConservativeWeight => "conservative",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HesdOptions {
    pub lambda: f64,
    pub kappa: f64,
    pub sigma1_form: Sigma1Form,
    /// Adds `−2Λϰσ² Sp[W̆_zw Δ₂⁽¹⁾]` to the σ⁽¹⁾ rate.
    pub cross_term_correction: bool,
}

impl HesdOptions {
    pub fn new(lambda: f64, kappa: f64) -> Self {
        Self {
            lambda,
            kappa,
            sigma1_form: Sigma1Form::default(),
            cross_term_correction: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hesd1Rate {
    pub sigma: f64,
    pub z: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hesd2Rate {
    pub base: Hesd1Rate,
    pub delta2: DMatrix<f64>,
    pub z1: DVector<f64>,
    pub sigma1: f64,
    pub action: f64,
}

/// The four symbols and their derivatives at `z = w = Z`.
#[derive(Debug, Clone)]
pub(crate) struct LocalSymbols {
    pub v: SymbolDerivatives,
    pub v_breve: SymbolDerivatives,
    pub w: SymbolDerivatives,
    pub w_breve: SymbolDerivatives,
}

impl LocalSymbols {
    pub fn at(model: &SymbolModel, z: &PhasePoint, t: f64) -> Result<Self> {
        Ok(Self {
            v: model.derivatives(Symbol::V, z, None, t)?,
            v_breve: model.derivatives(Symbol::VBreve, z, None, t)?,
            w: model.derivatives(Symbol::W, z, Some(z), t)?,
            w_breve: model.derivatives(Symbol::WBreve, z, Some(z), t)?,
        })
    }

    pub fn h_zz(&self, kappa: f64, sigma: f64) -> DMatrix<f64> {
        &self.v.hess_zz + &self.w.hess_zz * (kappa * sigma)
    }
}

fn hesd1_from(local: &LocalSymbols, state: &Hesd1State, lambda: f64, kappa: f64) -> Hesd1Rate {
    let sigma = state.sigma;
    let form = SymplecticForm::new(state.z.dim());
    let sigma_rate =
        -2.0 * lambda * sigma * (local.v_breve.value + sigma * kappa * local.w_breve.value);
    let grad = &local.v.grad_z + &local.w.grad_z * (kappa * sigma);
    Hesd1Rate {
        sigma: sigma_rate,
        z: form.apply(&grad),
    }
}

fn action_from(local: &LocalSymbols, state: &Hesd1State, z_rate: &DVector<f64>, kappa: f64) -> f64 {
    let n = state.z.dim();
    let p_xdot: f64 = state
        .z
        .p()
        .iter()
        .zip(z_rate.iter().skip(n))
        .map(|(p, xd)| p * xd)
        .sum();
    p_xdot - local.v.value - kappa * state.sigma * local.w.value
}

/// `(σ̇, Ż)` of the first-order system.
pub fn hesd1_rhs(
    model: &SymbolModel,
    state: &Hesd1State,
    t: f64,
    lambda: f64,
    kappa: f64,
) -> Result<Hesd1Rate> {
    let local = LocalSymbols::at(model, &state.z, t)?;
    Ok(hesd1_from(&local, state, lambda, kappa))
}

/// `Ṡ = ⟨P, Ẋ⟩ − V − ϰσW`.
pub fn action_rate(model: &SymbolModel, state: &Hesd1State, t: f64, kappa: f64) -> Result<f64> {
    let local = LocalSymbols::at(model, &state.z, t)?;
    let rate = hesd1_from(&local, state, 0.0, kappa);
    Ok(action_from(&local, state, &rate.z, kappa))
}

fn check_symmetric(delta: &DMatrix<f64>) -> Result<()> {
    let scale = delta.amax().max(1.0);
    let asym = (delta - delta.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::ContractViolation(format!(
            "dispersion matrix asymmetric by {asym:e}"
        )));
    }
    Ok(())
}

fn hesd2_from(
    model: &SymbolModel,
    local: &LocalSymbols,
    state: &Hesd2State,
    t: f64,
    opts: &HesdOptions,
) -> Result<Hesd2Rate> {
    let (lambda, kappa) = (opts.lambda, opts.kappa);
    let z = &state.base.z;
    let sigma = state.base.sigma;
    let sigma1 = state.sigma1;
    let delta = &state.delta2;
    let z1 = &state.z1;
    let form = SymplecticForm::new(z.dim());
    let j = form.matrix();

    let base = hesd1_from(local, &state.base, lambda, kappa);
    let action = action_from(local, &state.base, &base.z, kappa);

    let h_zz = local.h_zz(kappa, sigma);
    let jh = &j * &h_zz;
    let d_delta = &jh * delta - delta * &h_zz * &j;
    let d_delta = (&d_delta + d_delta.transpose()) * 0.5;

    let mut g1 = model.trace_gradient(Symbol::V, HessianBlock::ZZ, z, None, delta, t)?;
    if kappa != 0.0 {
        g1 += model.trace_gradient(Symbol::W, HessianBlock::ZZ, z, Some(z), delta, t)?
            * (kappa * sigma);
    }
    let g2 = if kappa != 0.0 {
        model.trace_gradient(Symbol::W, HessianBlock::WW, z, Some(z), delta, t)?
    } else {
        DVector::zeros(z1.len())
    };

    let w_zw = local.w.hess_zw.as_ref().expect("pair symbol");
    let hb_z = &local.v_breve.grad_z + &local.w_breve.grad_z * (kappa * sigma);
    let d_z1 = &jh * z1 + form.apply(&g1) * 0.5 - delta * &hb_z * (2.0 * lambda)
        + form.apply(&local.w.grad_z) * (kappa * sigma1)
        + &j * (w_zw * z1) * (kappa * sigma)
        + form.apply(&g2) * (0.5 * kappa * sigma);

    let wb_w = local.w_breve.grad_w.as_ref().expect("pair symbol");
    let wb_ww = local.w_breve.hess_ww.as_ref().expect("pair symbol");
    let hb_zz = &local.v_breve.hess_zz + &local.w_breve.hess_zz * (kappa * sigma);
    let hb = local.v_breve.value + kappa * sigma * local.w_breve.value;
    let self_weight = match opts.sigma1_form {
        Sigma1Form::NormIdentity => hb,
        Sigma1Form::ConservativeWeight => local.v.value + kappa * sigma * local.w.value,
    };
    let trace = |a: &DMatrix<f64>| a.component_mul(delta).sum();
    let mut d_sigma1 = -2.0 * lambda * sigma * hb_z.dot(z1)
        - lambda * sigma * trace(&hb_zz)
        - 2.0 * lambda * sigma1 * self_weight
        - 2.0 * lambda * kappa * sigma * sigma * wb_w.dot(z1)
        - lambda * kappa * sigma * sigma * trace(wb_ww)
        - 2.0 * lambda * kappa * sigma * sigma1 * local.w_breve.value;
    if opts.cross_term_correction {
        let wb_zw = local.w_breve.hess_zw.as_ref().expect("pair symbol");
        d_sigma1 -= 2.0 * lambda * kappa * sigma * sigma * trace(wb_zw);
    }

    Ok(Hesd2Rate {
        base,
        delta2: d_delta,
        z1: d_z1,
        sigma1: d_sigma1,
        action,
    })
}

/// Rates of every block of the second-order system.
pub fn hesd2_rhs(
    model: &SymbolModel,
    state: &Hesd2State,
    t: f64,
    opts: &HesdOptions,
) -> Result<Hesd2Rate> {
    check_symmetric(&state.delta2)?;
    let local = LocalSymbols::at(model, &state.base.z, t)?;
    hesd2_from(model, &local, state, t, opts)
}

/// Offsets of the packed integrator state.
#[derive(Debug, Clone, Copy)]
struct Layout {
    n: usize,
}

impl Layout {
    fn m(&self) -> usize {
        2 * self.n
    }
    fn z(&self) -> usize {
        1
    }
    fn action(&self) -> usize {
        1 + self.m()
    }
    fn delta(&self) -> usize {
        2 + self.m()
    }
    fn z1(&self) -> usize {
        self.delta() + self.m() * self.m()
    }
    fn sigma1(&self) -> usize {
        self.z1() + self.m()
    }
    fn h1(&self) -> usize {
        self.sigma1() + 1
    }
    fn dim(&self) -> usize {
        self.h1() + 2
    }

    fn pack(&self, s: &Hesd2State, h1_integral: Complex64) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        y[0] = s.base.sigma;
        y[self.z()..self.z() + self.m()].copy_from_slice(s.base.z.as_slice());
        y[self.action()] = s.action;
        y[self.delta()..self.z1()].copy_from_slice(s.delta2.as_slice());
        y[self.z1()..self.sigma1()].copy_from_slice(s.z1.as_slice());
        y[self.sigma1()] = s.sigma1;
        y[self.h1()] = h1_integral.re;
        y[self.h1() + 1] = h1_integral.im;
        y
    }

    fn unpack(&self, y: &[f64]) -> Result<Hesd2State> {
        let m = self.m();
        let z = PhasePoint::from_vector(DVector::from_column_slice(&y[self.z()..self.z() + m]))?;
        Ok(Hesd2State {
            base: Hesd1State { sigma: y[0], z },
            delta2: DMatrix::from_column_slice(m, m, &y[self.delta()..self.z1()]),
            z1: DVector::from_column_slice(&y[self.z1()..self.sigma1()]),
            sigma1: y[self.sigma1()],
            action: y[self.action()],
        })
    }

    fn pack_rate(&self, r: &Hesd2Rate, h1: Complex64, out: &mut [f64]) {
        out[0] = r.base.sigma;
        out[self.z()..self.z() + self.m()].copy_from_slice(r.base.z.as_slice());
        out[self.action()] = r.action;
        out[self.delta()..self.z1()].copy_from_slice(r.delta2.as_slice());
        out[self.z1()..self.sigma1()].copy_from_slice(r.z1.as_slice());
        out[self.sigma1()] = r.sigma1;
        out[self.h1()] = h1.re;
        out[self.h1() + 1] = h1.im;
    }
}

/// Dense record of the second-order system on `[0, T]`.
///
/// Besides the moments, the record carries `∫₀ᵗ H⁽¹⁾ dτ`, the ħ-independent
/// first-order part of the phase of the associated linear equation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    model: SymbolModel,
    options: HesdOptions,
    layout_n: usize,
    solution: DenseSolution,
}

impl Trajectory {
    fn layout(&self) -> Layout {
        Layout { n: self.layout_n }
    }

    pub fn n(&self) -> usize {
        self.layout_n
    }

    pub fn model(&self) -> &SymbolModel {
        &self.model
    }

    pub fn options(&self) -> &HesdOptions {
        &self.options
    }

    pub fn t_end(&self) -> f64 {
        self.solution.t_end()
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.solution.nodes()
    }

    pub fn state_at(&self, t: f64) -> Result<Hesd2State> {
        let y = self.solution.eval(t)?;
        let mut s = self.layout().unpack(&y)?;
        s.delta2 = (&s.delta2 + s.delta2.transpose()) * 0.5;
        Ok(s)
    }

    /// `∫₀ᵗ H⁽¹⁾(τ) dτ`.
    pub fn h1_integral(&self, t: f64) -> Result<Complex64> {
        let y = self.solution.eval(t)?;
        let k = self.layout().h1();
        Ok(Complex64::new(y[k], y[k + 1]))
    }

    /// Node times with their states.
    pub fn node_states(&self) -> Result<Vec<(f64, Hesd2State)>> {
        let layout = self.layout();
        self.solution
            .node_values()
            .map(|(t, y)| Ok((t, layout.unpack(y)?)))
            .collect()
    }
}

/// σ above this multiple of `max(1, σ(0))` is treated as a blow-up of the
/// norm equation.
const SIGMA_CEILING: f64 = 1e6;

/// Integrate the second-order system together with the action and the
/// first-order phase integral from `t = 0` to `t_final`.
pub fn integrate_hesd(
    model: &SymbolModel,
    init: &Hesd2State,
    t_final: f64,
    opts: &HesdOptions,
    tol: f64,
) -> Result<Trajectory> {
    let n = init.n();
    if n != model.n() {
        return Err(Error::Argument(format!(
            "initial state of dimension {n} for model of dimension {}",
            model.n()
        )));
    }
    if !(init.base.sigma > 0.0 && init.base.sigma.is_finite()) {
        return Err(Error::Argument(format!("initial norm {}", init.base.sigma)));
    }
    if !(tol > 0.0) || !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(Error::Argument(format!("tol {tol}, T {t_final}")));
    }
    check_symmetric(&init.delta2)?;
    let layout = Layout { n };
    let y0 = layout.pack(init, Complex64::new(0.0, 0.0));
    if t_final == 0.0 {
        return Ok(Trajectory {
            model: model.clone(),
            options: *opts,
            layout_n: n,
            solution: DenseSolution::instant(0.0, &y0),
        });
    }

    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let mut s = layout.unpack(y)?;
        s.delta2 = (&s.delta2 + s.delta2.transpose()) * 0.5;
        let local = LocalSymbols::at(model, &s.base.z, t)?;
        let rate = hesd2_from(model, &local, &s, t, opts)?;
        let h1 = alsed::first_order_coefficient(&local, &s, opts.lambda, opts.kappa);
        layout.pack_rate(&rate, h1, dy);
        Ok(())
    };
    let ceiling = SIGMA_CEILING * init.base.sigma.max(1.0);
    let guard = |seg: &ode::Segment| {
        let s1 = seg.y1[0];
        if s1 > 0.0 && s1 < ceiling && s1.is_finite() {
            return Verdict::Continue;
        }
        Verdict::Halt(horizon_estimate(model, &layout, opts, seg))
    };
    let run = ode::integrate(rhs, 0.0, &y0, t_final, &ode::Options::with_tol(tol), guard)?;
    let traj = Trajectory {
        model: model.clone(),
        options: *opts,
        layout_n: n,
        solution: run.solution,
    };
    match run.halted_at {
        None => Ok(traj),
        Some(t) => Err(Error::ValidityHorizonReached {
            t,
            partial: Some(Box::new(traj)),
        }),
    }
}

/// Extrapolated time at which σ leaves `(0, ∞)`: `t + σ/|σ̇|` from the last
/// accepted state, valid both for a simple zero and for a `σ̇ ∝ σ²` pole.
fn horizon_estimate(
    model: &SymbolModel,
    layout: &Layout,
    opts: &HesdOptions,
    seg: &ode::Segment,
) -> f64 {
    let estimate = || -> Result<f64> {
        let s = layout.unpack(&seg.y0)?;
        let rate = hesd1_rhs(model, &s.base, seg.t0, opts.lambda, opts.kappa)?;
        Ok(seg.t0 + s.base.sigma / rate.sigma.abs())
    };
    match estimate() {
        Ok(t) if t.is_finite() => t.clamp(seg.t0, seg.t1()),
        _ => seg.t0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom_laser::{self, AtomLaserParams};
    use std::sync::Arc;

    fn fig1a() -> AtomLaserParams {
        AtomLaserParams::fig1(atom_laser::Panel::A)
    }

    fn gaussian_start(p: &AtomLaserParams) -> Hesd2State {
        let z2 = p.zeta * p.zeta;
        Hesd2State::leading(
            p.n_atoms,
            PhasePoint::origin(1),
            DMatrix::from_row_slice(2, 2, &[0.5 / z2, 0.0, 0.0, 0.5 * z2]),
        )
    }

    #[test]
    fn norm_rate_at_origin() {
        let p = fig1a();
        let model = atom_laser::build_model(&p).unwrap();
        let s = Hesd1State {
            sigma: 0.5,
            z: PhasePoint::origin(1),
        };
        let r = hesd1_rhs(&model, &s, 0.0, p.lambda, p.kappa).unwrap();
        assert!((r.sigma - 0.8).abs() < 1e-14, "{}", r.sigma);
        assert!(r.z.amax() < 1e-12);
        let r0 = hesd1_rhs(&model, &s, 0.0, 0.0, p.kappa).unwrap();
        assert_eq!(r0.sigma, 0.0);
    }

    #[test]
    fn dispersion_block_matches_three_component_system() {
        let p = AtomLaserParams {
            gamma: 1.3,
            ..fig1a()
        };
        let model = atom_laser::build_model(&p).unwrap();
        let (app, apx, axx) = (0.7, -0.2, 1.1);
        let sigma = 0.9;
        let mut s = Hesd2State::leading(
            sigma,
            PhasePoint::origin(1),
            DMatrix::from_row_slice(2, 2, &[app, apx, apx, axx]),
        );
        s.sigma1 = 0.3;
        let r = hesd2_rhs(&model, &s, 0.0, &HesdOptions::new(p.lambda, p.kappa)).unwrap();
        let g = p.c2 * p.kappa * sigma / (p.gamma * p.gamma);
        let expect = [
            4.0 * g * apx,
            2.0 * p.c1 * app + 2.0 * g * axx,
            4.0 * p.c1 * apx,
        ];
        let got = [r.delta2[(0, 0)], r.delta2[(0, 1)], r.delta2[(1, 1)]];
        for (e, g) in expect.iter().zip(got) {
            assert!((e - g).abs() < 1e-9, "{expect:?} vs {got:?}");
        }
        assert!(r.z1.amax() < 1e-9);
    }

    #[test]
    fn free_dispersion_reduction() {
        let p = AtomLaserParams {
            kappa: 0.0,
            lambda: 0.0,
            ..fig1a()
        };
        let model = atom_laser::build_model(&p).unwrap();
        let s = Hesd2State::leading(
            0.5,
            PhasePoint::origin(1),
            DMatrix::from_row_slice(2, 2, &[0.4, 0.1, 0.1, 2.0]),
        );
        let r = hesd2_rhs(&model, &s, 0.0, &HesdOptions::new(0.0, 0.0)).unwrap();
        assert!(r.delta2[(0, 0)].abs() < 1e-12);
        assert!((r.delta2[(0, 1)] - 2.0 * p.c1 * 0.4).abs() < 1e-12);
        assert!((r.delta2[(1, 1)] - 4.0 * p.c1 * 0.1).abs() < 1e-12);
    }

    #[test]
    fn sigma1_rate_forms_at_origin() {
        // γ = 1, α_pp = α_xx = 0.5, σ = 0.5, σ⁽¹⁾ = 0
        let p = fig1a();
        let model = atom_laser::build_model(&p).unwrap();
        let s = gaussian_start(&p);
        let mut opts = HesdOptions::new(p.lambda, p.kappa);
        let r = hesd2_rhs(&model, &s, 0.0, &opts).unwrap();
        assert!((r.sigma1 + 0.8).abs() < 1e-12, "{}", r.sigma1);
        opts.cross_term_correction = true;
        let r = hesd2_rhs(&model, &s, 0.0, &opts).unwrap();
        assert!((r.sigma1 + 1.0).abs() < 1e-9, "{}", r.sigma1);
    }

    #[test]
    fn sigma1_self_weight_depends_on_form() {
        let p = fig1a();
        let model = atom_laser::build_model(&p).unwrap();
        let mut s = gaussian_start(&p);
        s.sigma1 = 1.0;
        s.delta2 = DMatrix::zeros(2, 2);
        let mut opts = HesdOptions::new(p.lambda, p.kappa);
        let exact = hesd2_rhs(&model, &s, 0.0, &opts).unwrap().sigma1;
        let sigma = s.base.sigma;
        let l = p.lambda;
        assert!((exact - (2.0 * l * p.eps - 4.0 * l * p.kappa * sigma)).abs() < 1e-12);
        opts.sigma1_form = Sigma1Form::ConservativeWeight;
        let literal = hesd2_rhs(&model, &s, 0.0, &opts).unwrap().sigma1;
        let h = p.kappa * sigma * p.c2;
        let expect = -2.0 * l * h - 2.0 * l * p.kappa * sigma;
        assert!((literal - expect).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_dispersion_rejected() {
        let p = fig1a();
        let model = atom_laser::build_model(&p).unwrap();
        let mut s = gaussian_start(&p);
        s.delta2[(0, 1)] = 1e-9;
        let err = hesd2_rhs(&model, &s, 0.0, &HesdOptions::new(p.lambda, p.kappa)).unwrap_err();
        assert!(matches!(err, Error::ContractViolation(_)));
    }

    #[test]
    fn sigma_matches_closed_form() {
        let p = fig1a();
        let model = atom_laser::build_model(&p).unwrap();
        let traj = integrate_hesd(
            &model,
            &gaussian_start(&p),
            2.0,
            &HesdOptions::new(p.lambda, p.kappa),
            1e-10,
        )
        .unwrap();
        for k in 0..=20 {
            let t = 0.1 * k as f64;
            let s = traj.state_at(t).unwrap();
            let exact = atom_laser::sigma_closed(&p, t).unwrap();
            assert!(((s.base.sigma - exact) / exact).abs() < 1e-8, "t = {t}");
            assert!(s.base.z.as_vector().amax() < 1e-12);
            assert!(s.z1.amax() < 1e-9);
            assert!((&s.delta2 - s.delta2.transpose()).amax() < 1e-12);
        }
        let s1 = traj.state_at(1.0).unwrap().base.sigma;
        assert!((s1 - 1.62196).abs() < 1e-5);
    }

    #[test]
    fn action_of_fig1a() {
        let p = fig1a();
        let model = atom_laser::build_model(&p).unwrap();
        let traj = integrate_hesd(
            &model,
            &gaussian_start(&p),
            1.0,
            &HesdOptions::new(p.lambda, p.kappa),
            1e-10,
        )
        .unwrap();
        let s = traj.state_at(1.0).unwrap().action;
        // −ϰc₂∫σ with ∫σ = ε/(2Λεϰ)·ln(denominator/ε)
        let exact = -p.kappa
            * p.c2
            * (p.eps / (2.0 * p.lambda * p.eps * p.kappa))
            * ((p.eps + p.n_atoms * p.kappa * ((2.0 * p.lambda * p.eps).exp() - 1.0)) / p.eps).ln();
        assert!((s - exact).abs() < 1e-9, "{s} vs {exact}");
        assert!((s + 0.205806).abs() < 5e-6);
    }

    #[test]
    fn conservative_limit_keeps_norm() {
        let p = AtomLaserParams {
            lambda: 0.0,
            ..fig1a()
        };
        let model = atom_laser::build_model(&p).unwrap();
        let traj = integrate_hesd(
            &model,
            &gaussian_start(&p),
            1.5,
            &HesdOptions::new(0.0, p.kappa),
            1e-10,
        )
        .unwrap();
        for (_, s) in traj.node_states().unwrap() {
            assert_eq!(s.base.sigma, p.n_atoms);
            assert_eq!(s.sigma1, 0.0);
        }
    }

    #[test]
    fn free_particle_action_rate() {
        let (c1, p0) = (0.5, 0.8);
        let model = SymbolModel::new(
            1,
            Arc::new(crate::phase_space::PointFn::new(move |z, _| {
                c1 * z[0] * z[0]
            })),
            Arc::new(crate::phase_space::PointFn::new(|_, _| 0.0)),
            Arc::new(crate::phase_space::PairFn::zero()),
            Arc::new(crate::phase_space::PairFn::zero()),
        )
        .unwrap();
        let s = Hesd1State {
            sigma: 1.0,
            z: PhasePoint::new(&[p0], &[0.3]).unwrap(),
        };
        let r = action_rate(&model, &s, 0.0, 0.0).unwrap();
        assert!((r - c1 * p0 * p0).abs() < 1e-9);
    }

    #[test]
    fn horizon_reported_with_partial_record() {
        // ε < 0, Λ > 0, Nϰ < ε: σ(t) has a pole
        let p = AtomLaserParams {
            eps: -0.5,
            kappa: -2.0,
            ..fig1a()
        };
        let model = atom_laser::build_model(&p).unwrap();
        let horizon = atom_laser::horizon(&p).expect("horizon exists");
        let err = integrate_hesd(
            &model,
            &gaussian_start(&p),
            5.0,
            &HesdOptions::new(p.lambda, p.kappa),
            1e-10,
        )
        .unwrap_err();
        match err {
            Error::ValidityHorizonReached { t, partial } => {
                assert!((t - horizon).abs() < 1e-6 * horizon, "{t} vs {horizon}");
                let partial = partial.unwrap();
                assert!(partial.t_end() < horizon);
                assert!(partial.t_end() > 0.99 * horizon);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn halving_tolerance_reduces_error() {
        let p = fig1a();
        let model = atom_laser::build_model(&p).unwrap();
        let exact = atom_laser::sigma_closed(&p, 2.0).unwrap();
        let errs: Vec<f64> = [1e-5, 1e-6, 1e-7, 1e-8]
            .iter()
            .map(|&tol| {
                let traj = integrate_hesd(
                    &model,
                    &gaussian_start(&p),
                    2.0,
                    &HesdOptions::new(p.lambda, p.kappa),
                    tol,
                )
                .unwrap();
                (traj.state_at(2.0).unwrap().base.sigma - exact).abs()
            })
            .collect();
        for w in errs.windows(2) {
            assert!(w[1] < w[0], "{errs:?}");
        }
        assert!(errs[3] < 1e-2 * errs[0], "{errs:?}");
    }
}
