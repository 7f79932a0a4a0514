//! First-order symmetry operators of the associated linear equation.
//!
//! A solution of `ȧ = J H_zz(t) a` defines `â(t) = (2ħ)^{−1/2}⟨a(t), JΔẑ⟩`,
//! which maps solutions to solutions; vectors normalized by `{a*, a} = 2i`
//! give ladder pairs with `[â, â⁺] = 1`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::alsed::{evolve_leading, hessian_along, GreensKernel, ScalarPhase};
use crate::error::{Error, Result};
use crate::grid_analysis::{initial_moments, GaussianTag, WaveField};
use crate::hesd::{integrate_hesd, Hesd2State, Trajectory};
use crate::ode::{self, DenseSolution, Verdict};
use crate::phase_space::SymplecticForm;

const TWO_I: Complex64 = Complex64::new(0.0, 2.0);

/// `{a, b} = ⟨a, Jb⟩`, bilinear; callers conjugate explicitly.
pub fn skew_product(a: &[Complex64], b: &[Complex64]) -> Result<Complex64> {
    if a.len() != b.len() || !a.len().is_multiple_of(2) {
        return Err(Error::Argument(format!(
            "skew product of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() / 2;
    Ok((0..n).map(|k| a[n + k] * b[k] - a[k] * b[n + k]).sum())
}

fn conj(a: &[Complex64]) -> Vec<Complex64> {
    a.iter().map(|v| v.conj()).collect()
}

/// Time-dependent complex vector solving `ȧ = J H_zz(t) a`, stored as the
/// real and imaginary parts side by side.
#[derive(Debug, Clone)]
pub struct SymmetryVector {
    dim: usize,
    solution: DenseSolution,
}

impl SymmetryVector {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t_end(&self) -> f64 {
        self.solution.t_end()
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.solution.nodes()
    }

    pub fn at(&self, t: f64) -> Result<Vec<Complex64>> {
        let y = self.solution.eval(t)?;
        let (re, im) = y.split_at(self.dim);
        Ok(re
            .iter()
            .zip(im)
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect())
    }

    /// The complex conjugate solution, which solves the same real equation.
    pub fn conjugate(&self) -> Self {
        let mut solution = self.solution.clone();
        solution.apply_linear(|y| y[self.dim..].iter_mut().for_each(|v| *v = -*v));
        Self {
            dim: self.dim,
            solution,
        }
    }
}

/// Integrate the symmetry vector equation along `traj` from `a0` at `t = 0`.
pub fn integrate_symmetry_vector(
    traj: &Trajectory,
    a0: &[Complex64],
    tol: f64,
) -> Result<SymmetryVector> {
    let dim = 2 * traj.n();
    if a0.len() != dim {
        return Err(Error::Argument(format!(
            "symmetry vector of length {} for phase space of dimension {dim}",
            a0.len()
        )));
    }
    if a0.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Argument("non-finite initial symmetry vector".into()));
    }
    let y0: Vec<f64> = a0
        .iter()
        .map(|v| v.re)
        .chain(a0.iter().map(|v| v.im))
        .collect();
    let t_end = traj.t_end();
    if t_end == 0.0 {
        return Ok(SymmetryVector {
            dim,
            solution: DenseSolution::instant(0.0, &y0),
        });
    }
    let j = SymplecticForm::new(traj.n()).matrix();
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let gen = &j * hessian_along(traj, t)?;
        let parts = DMatrix::from_column_slice(dim, 2, y);
        dy.copy_from_slice((gen * parts).as_slice());
        Ok(())
    };
    let run = ode::integrate(rhs, 0.0, &y0, t_end, &ode::Options::with_tol(tol), |_| {
        Verdict::Continue
    })?;
    Ok(SymmetryVector {
        dim,
        solution: run.solution,
    })
}

/// Rescale `a0` so that `{a0*, a0} = 2i`. Vectors with `Im{a0*, a0} ≤ 0`
/// belong to raising operators and are rejected.
pub fn normalize_lowering(a0: &[Complex64]) -> Result<Vec<Complex64>> {
    let s = skew_product(&conj(a0), a0)?;
    if !(s.im > 0.0) {
        return Err(Error::Argument(format!(
            "{{a*, a}} = {s} has no positive imaginary part"
        )));
    }
    let scale = (2.0 / s.im).sqrt();
    Ok(a0.iter().map(|v| v * scale).collect())
}

/// Lowering vector of the Gaussian `tag`: `Δp̂φ = ΓΔx̂φ` gives `a_p = Γ a_x`.
pub fn vacuum_vector(tag: &GaussianTag) -> Vec<Complex64> {
    let ax = 1.0 / tag.width.im.sqrt();
    vec![tag.width * ax, Complex64::new(ax, 0.0)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderKind {
    Lowering,
    Raising,
}

/// A normalized lowering vector and the check value `{a*, a}` at `t = 0`.
#[derive(Debug, Clone)]
pub struct LadderPair {
    pub vector: SymmetryVector,
    pub normalization: Complex64,
}

impl LadderPair {
    /// Normalizes `a0` once at `t = 0` and integrates it along `traj`.
    pub fn new(traj: &Trajectory, a0: &[Complex64], tol: f64) -> Result<Self> {
        let a0 = normalize_lowering(a0)?;
        let normalization = skew_product(&conj(&a0), &a0)?;
        Ok(Self {
            vector: integrate_symmetry_vector(traj, &a0, tol)?,
            normalization,
        })
    }

    /// `{a*(t), a(t)} − 2i`.
    pub fn defect(&self, t: f64) -> Result<Complex64> {
        let a = self.vector.at(t)?;
        Ok(skew_product(&conj(&a), &a)? - TWO_I)
    }
}

/// `(2ħ)^{−1/2}⟨c, JΔẑ⟩ψ` with `c = a(t)` for lowering and `a*(t)` for
/// raising; the momentum deviation acts spectrally.
pub fn apply_ladder(
    a: &SymmetryVector,
    t: f64,
    psi: &WaveField,
    traj: &Trajectory,
    kind: LadderKind,
) -> Result<WaveField> {
    if traj.n() != 1 || a.dim() != 2 {
        return Err(Error::Argument(
            "grid ladder operators are one-dimensional".into(),
        ));
    }
    psi.check_resolved()?;
    let mut c = a.at(t)?;
    if kind == LadderKind::Raising {
        c = conj(&c);
    }
    let z = traj.state_at(t)?.base.z;
    let (pc, xc) = (z.p()[0], z.x()[0]);
    let hbar = psi.hbar();
    let dp = psi.momentum_apply();
    let scale = 1.0 / (2.0 * hbar).sqrt();
    let out = (0..psi.grid().n)
        .map(|j| {
            let v = psi.samples()[j];
            let x = psi.grid().x(j);
            (c[1] * (dp.samples()[j] - v * pc) - c[0] * v * (x - xc)) * scale
        })
        .collect();
    let out = psi.with_samples(out)?;
    // an annihilated state leaves only roundoff, whose tails mean nothing
    if out.norm_sq() > 1e-12 * psi.norm_sq() {
        out.check_resolved()?;
    }
    Ok(out)
}

/// New asymptotic solution `Ψ̃⁽⁰⁾ = exp(−(i/ħ)∫H(τ, C[ψ̃])dτ) â(t)ψ(t)` built
/// from `Ψ⁽⁰⁾ = U(t)φ`. The moment constants `C[ψ̃]` come from `â(0)φ`, so the
/// relation between `Ψ̃⁽⁰⁾` and `Ψ⁽⁰⁾` is nonlinear.
#[derive(Debug, Clone)]
pub struct Regeneration<'a> {
    kernel: &'a GreensKernel,
    vector: SymmetryVector,
    kind: LadderKind,
    phi: WaveField,
    moments: Hesd2State,
    new_trajectory: Trajectory,
    old_phase: ScalarPhase,
    new_phase: ScalarPhase,
}

impl<'a> Regeneration<'a> {
    pub fn new(
        kernel: &'a GreensKernel,
        vector: &SymmetryVector,
        kind: LadderKind,
        phi: &WaveField,
        tol: f64,
    ) -> Result<Self> {
        let traj = kernel.trajectory();
        let seed = apply_ladder(vector, 0.0, phi, traj, kind)?;
        let moments = initial_moments(&seed)?;
        let new_trajectory =
            integrate_hesd(traj.model(), &moments, traj.t_end(), traj.options(), tol)?;
        Ok(Self {
            kernel,
            vector: vector.clone(),
            kind,
            phi: phi.clone(),
            old_phase: ScalarPhase::new(traj, kernel.hbar())?,
            new_phase: ScalarPhase::new(&new_trajectory, kernel.hbar())?,
            moments,
            new_trajectory,
        })
    }

    /// `C[ψ̃]` at `t = 0`.
    pub fn moments(&self) -> &Hesd2State {
        &self.moments
    }

    /// Moment trajectory generated by `C[ψ̃]`.
    pub fn trajectory(&self) -> &Trajectory {
        &self.new_trajectory
    }

    /// `H(t, C[ψ̃], ħ)`.
    pub fn scalar_hamiltonian(&self, t: f64) -> Result<Complex64> {
        Ok(
            crate::alsed::effective_hamiltonian(&self.new_trajectory, t)?
                .scalar(self.kernel.hbar()),
        )
    }

    pub fn at(&self, t: f64) -> Result<WaveField> {
        let psi = evolve_leading(self.kernel, &self.phi, t)?;
        let lifted = apply_ladder(&self.vector, t, &psi, self.kernel.trajectory(), self.kind)?;
        let shift = self.new_phase.at(t)? - self.old_phase.at(t)?;
        let factor = (-Complex64::i() * shift / self.kernel.hbar()).exp();
        Ok(lifted.scaled(factor))
    }
}

/// One-shot form of [`Regeneration`].
pub fn regenerate_solution(
    kernel: &GreensKernel,
    vector: &SymmetryVector,
    kind: LadderKind,
    phi: &WaveField,
    t: f64,
    tol: f64,
) -> Result<WaveField> {
    Regeneration::new(kernel, vector, kind, phi, tol)?.at(t)
}
