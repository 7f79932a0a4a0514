//! Wavefunctions sampled on a uniform periodic grid, with trapezoid
//! quadrature in position space and spectral momentum action.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::hesd::Hesd2State;
use crate::phase_space::PhasePoint;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Fraction of the domain (at each end) and of the wavenumber band treated as
/// the tail in resolution checks.
pub const TAIL_FRACTION: f64 = 0.05;
/// Largest admissible tail energy relative to the total.
pub const TAIL_TOLERANCE: f64 = 1e-8;

/// Uniform grid `x_j = x0 + j·dx`, `j = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x0: f64,
    pub dx: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(x0: f64, dx: f64, n: usize) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::Argument(format!(
                "grid needs a power of two ≥ 16 points, got {n}"
            )));
        }
        if !(dx > 0.0 && dx.is_finite() && x0.is_finite()) {
            return Err(Error::Argument(format!("grid spacing {dx}, origin {x0}")));
        }
        Ok(Self { x0, dx, n })
    }

    /// `n` points covering `[−L/2, L/2)`.
    pub fn centered(length: f64, n: usize) -> Result<Self> {
        Self::new(-0.5 * length, length / n as f64, n)
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.dx
    }

    pub fn length(&self) -> f64 {
        self.n as f64 * self.dx
    }

    /// FFT-ordered angular wavenumbers.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n as i64;
        let base = 2.0 * std::f64::consts::PI / self.length();
        (0..n)
            .map(|j| base * if j < n / 2 { j } else { j - n } as f64)
            .collect()
    }
}

/// `A·exp{(i/ħ)[p₀(x − x₀) + (Γ/2)(x − x₀)²]}` with `Im Γ > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTag {
    pub amplitude: Complex64,
    pub center: f64,
    pub momentum: f64,
    pub width: Complex64,
}

impl GaussianTag {
    /// `√(N/(ζ√(πħ))) exp(−x²/(2ħζ²))`, optionally boosted and displaced.
    pub fn atom_laser(n_atoms: f64, zeta: f64, hbar: f64) -> Self {
        Self {
            amplitude: Complex64::new(
                (n_atoms / (zeta * (std::f64::consts::PI * hbar).sqrt())).sqrt(),
                0.0,
            ),
            center: 0.0,
            momentum: 0.0,
            width: I / (zeta * zeta),
        }
    }

    pub fn eval(&self, x: f64, hbar: f64) -> Complex64 {
        let d = x - self.center;
        self.amplitude * (I * (self.momentum * d + 0.5 * self.width * d * d) / hbar).exp()
    }

    /// `∫|ψ|² dx` in closed form.
    pub fn norm_sq(&self, hbar: f64) -> f64 {
        self.amplitude.norm_sqr() * (std::f64::consts::PI * hbar / self.width.im).sqrt()
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn fft_plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Unnormalised forward transform.
pub fn forward(data: &[Complex64]) -> Vec<Complex64> {
    let mut buf = data.to_vec();
    fft_plan(buf.len(), false).process(&mut buf);
    buf
}

/// Inverse transform including the `1/n` factor.
pub fn inverse(data: &[Complex64]) -> Vec<Complex64> {
    let n = data.len();
    let mut buf = data.to_vec();
    fft_plan(n, true).process(&mut buf);
    let s = 1.0 / n as f64;
    buf.iter_mut().for_each(|v| *v *= s);
    buf
}

/// Complex samples of a wavefunction on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    grid: Grid,
    hbar: f64,
    samples: Vec<Complex64>,
    gaussian: Option<GaussianTag>,
}

impl WaveField {
    pub fn new(grid: Grid, hbar: f64, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.n {
            return Err(Error::Argument(format!(
                "{} samples for a {}-point grid",
                samples.len(),
                grid.n
            )));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::Argument(format!("hbar = {hbar}")));
        }
        Ok(Self {
            grid,
            hbar,
            samples,
            gaussian: None,
        })
    }

    pub fn from_fn(grid: Grid, hbar: f64, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        Self::new(grid, hbar, (0..grid.n).map(|j| f(grid.x(j))).collect())
    }

    /// Samples of an exact Gaussian, tagged so that evolution can use the
    /// closed-form integral.
    pub fn from_gaussian(grid: Grid, hbar: f64, tag: GaussianTag) -> Self {
        Self {
            grid,
            hbar,
            samples: (0..grid.n).map(|j| tag.eval(grid.x(j), hbar)).collect(),
            gaussian: Some(tag),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn gaussian(&self) -> Option<&GaussianTag> {
        self.gaussian.as_ref()
    }

    pub fn clear_gaussian(&mut self) {
        self.gaussian = None;
    }

    pub fn map(&self, f: impl Fn(f64, Complex64) -> Complex64) -> Self {
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(j, &v)| f(self.grid.x(j), v))
            .collect();
        Self {
            grid: self.grid,
            hbar: self.hbar,
            samples,
            gaussian: None,
        }
    }

    /// Same grid and ħ, new samples.
    pub fn with_samples(&self, samples: Vec<Complex64>) -> Result<Self> {
        Self::new(self.grid, self.hbar, samples)
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        self.map(|_, v| v * s)
    }

    pub fn norm_sq(&self) -> f64 {
        self.samples.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `‖ψ‖²` evaluated from the momentum-space samples.
    pub fn norm_sq_spectral(&self) -> f64 {
        forward(&self.samples)
            .iter()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            * self.grid.dx
            / self.grid.n as f64
    }

    fn same_grid(&self, other: &Self) -> Result<()> {
        let g = (&self.grid, &other.grid);
        let same = g.0.n == g.1.n
            && (g.0.dx - g.1.dx).abs() <= 1e-14 * g.0.dx
            && (g.0.x0 - g.1.x0).abs() <= 1e-12 * g.0.x0.abs().max(1.0);
        if !same {
            return Err(Error::Argument(
                "wave fields live on different grids".into(),
            ));
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        let s = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a - b)
            .collect();
        self.with_samples(s)
    }

    pub fn l2_distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.norm())
    }

    /// `‖self − reference‖ / ‖reference‖`.
    pub fn relative_l2_distance(&self, reference: &Self) -> Result<f64> {
        Ok(self.l2_distance(reference)? / reference.norm())
    }

    /// `ψ ↦ (−iħ∂ₓ)ψ` spectrally.
    pub fn momentum_apply(&self) -> Self {
        let k = self.grid.wavenumbers();
        let mut spec = forward(&self.samples);
        spec.iter_mut()
            .zip(&k)
            .for_each(|(v, &kk)| *v *= self.hbar * kk);
        Self {
            grid: self.grid,
            hbar: self.hbar,
            samples: inverse(&spec),
            gaussian: None,
        }
    }

    /// Energy fractions in the outer position band and the top wavenumber band.
    pub fn tail_fractions(&self) -> (f64, f64) {
        let n = self.grid.n;
        let band = ((n as f64 * TAIL_FRACTION).ceil() as usize).max(1);
        let total: f64 = self.samples.iter().map(|v| v.norm_sqr()).sum();
        let edge: f64 = self.samples[..band]
            .iter()
            .chain(&self.samples[n - band..])
            .map(|v| v.norm_sqr())
            .sum();
        let spec = forward(&self.samples);
        let spec_total: f64 = spec.iter().map(|v| v.norm_sqr()).sum();
        let kmax = (n / 2) as f64;
        let cut = (1.0 - TAIL_FRACTION) * kmax;
        let high: f64 = spec
            .iter()
            .enumerate()
            .filter(|(j, _)| {
                let m = if *j < n / 2 {
                    *j as f64
                } else {
                    (n - *j) as f64
                };
                m > cut
            })
            .map(|(_, v)| v.norm_sqr())
            .sum();
        if total == 0.0 {
            return (0.0, 0.0);
        }
        (edge / total, high / spec_total)
    }

    /// Fails when either tail holds more than [`TAIL_TOLERANCE`] of the energy.
    pub fn check_resolved(&self) -> Result<()> {
        let (edge, high) = self.tail_fractions();
        if edge > TAIL_TOLERANCE {
            return Err(Error::Resolution(format!(
                "{edge:e} of the energy sits in the outer domain band"
            )));
        }
        if high > TAIL_TOLERANCE {
            return Err(Error::Resolution(format!(
                "{high:e} of the energy sits in the top wavenumber band"
            )));
        }
        Ok(())
    }
}

/// `∫ a*(x) b(x) dx`.
pub fn inner_product(a: &WaveField, b: &WaveField) -> Result<Complex64> {
    a.same_grid(b)?;
    Ok(a.samples
        .iter()
        .zip(&b.samples)
        .map(|(u, v)| u.conj() * v)
        .sum::<Complex64>()
        * a.grid.dx)
}

/// Observables available to [`expectation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    One,
    X,
    P,
    XX,
    PP,
    /// `½(x̂p̂ + p̂x̂)`.
    XP,
}

/// Normalised expectation `⟨ψ|Â|ψ⟩ / ‖ψ‖²`.
pub fn expectation(psi: &WaveField, which: Observable) -> Result<f64> {
    psi.check_resolved()?;
    let origin = PhasePoint::origin(1);
    let (a, b) = match which {
        Observable::One => return Ok(1.0),
        Observable::X => (0, 1),
        Observable::P => (1, 0),
        Observable::XX => (0, 2),
        Observable::PP => (2, 0),
        Observable::XP => (1, 1),
    };
    weyl_moment(psi, &origin, a, b)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `⟨Weyl(Δp̂ᵃ Δx̂ᵇ)⟩ / ‖ψ‖²` about `(p_c, x_c)`, using
/// `Weyl(pᵃxᵇ) = 2⁻ᵇ Σₖ C(b,k) xᵏ pᵃ xᵇ⁻ᵏ`.
fn weyl_moment(psi: &WaveField, about: &PhasePoint, a: usize, b: usize) -> Result<f64> {
    let (pc, xc) = (about.p()[0], about.x()[0]);
    let sigma = psi.norm_sq();
    if sigma == 0.0 {
        return Err(Error::Argument("moments of the zero field".into()));
    }
    let shift_pow = |f: &WaveField, k: usize| f.map(|x, v| v * (x - xc).powi(k as i32));
    let mut total = 0.0;
    for k in 0..=b {
        let mut g = shift_pow(psi, b - k);
        for _ in 0..a {
            let pg = g.momentum_apply();
            g = pg.sub(&g.scaled(Complex64::new(pc, 0.0)))?;
        }
        let left = shift_pow(psi, k);
        total += binomial(b, k) * inner_product(&left, &g)?.re;
    }
    Ok(total / 2f64.powi(b as i32) / sigma)
}

/// Central moments `Δ⁽ᵅ⁾` about `z`, keyed by `(p order, x order)` with
/// `1 ≤ p + x ≤ max_order`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pub entries: BTreeMap<(usize, usize), f64>,
}

impl MomentTable {
    pub fn get(&self, p_order: usize, x_order: usize) -> Option<f64> {
        self.entries.get(&(p_order, x_order)).copied()
    }
}

pub fn central_moments(psi: &WaveField, z: &PhasePoint, max_order: usize) -> Result<MomentTable> {
    if max_order > 4 {
        return Err(Error::Argument(format!("moment order {max_order} above 4")));
    }
    if z.dim() != 1 {
        return Err(Error::Argument("grid moments are one-dimensional".into()));
    }
    psi.check_resolved()?;
    let mut entries = BTreeMap::new();
    for order in 1..=max_order {
        for a in 0..=order {
            entries.insert((a, order - a), weyl_moment(psi, z, a, order - a)?);
        }
    }
    Ok(MomentTable { entries })
}

/// Moment data `C[φ]` of an initial state: the norm, the centroid, and the
/// central second moments scaled by 1/ħ; all corrections start at zero.
pub fn initial_moments(psi: &WaveField) -> Result<Hesd2State> {
    psi.check_resolved()?;
    let origin = PhasePoint::origin(1);
    let p = weyl_moment(psi, &origin, 1, 0)?;
    let x = weyl_moment(psi, &origin, 0, 1)?;
    let z = PhasePoint::new(&[p], &[x])?;
    let m = central_moments(psi, &z, 2)?;
    let h = psi.hbar;
    let (pp, px, xx) = (
        m.get(2, 0).unwrap(),
        m.get(1, 1).unwrap(),
        m.get(0, 2).unwrap(),
    );
    let delta = DMatrix::from_row_slice(2, 2, &[pp / h, px / h, px / h, xx / h]);
    Ok(Hesd2State::leading(psi.norm_sq(), z, delta))
}

/// Centroid `(⟨p̂⟩, ⟨x̂⟩)` as a vector.
pub fn centroid(psi: &WaveField) -> Result<DVector<f64>> {
    let origin = PhasePoint::origin(1);
    Ok(DVector::from_vec(vec![
        weyl_moment(psi, &origin, 1, 0)?,
        weyl_moment(psi, &origin, 0, 1)?,
    ]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gaussian(n_atoms: f64, zeta: f64, hbar: f64) -> WaveField {
        WaveField::from_gaussian(
            Grid::centered(32.0, 2048).unwrap(),
            hbar,
            GaussianTag::atom_laser(n_atoms, zeta, hbar),
        )
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::centered(10.0, 100).is_err());
        assert!(Grid::centered(10.0, 8).is_err());
        assert!(Grid::centered(-1.0, 64).is_err());
        let k = Grid::centered(2.0 * std::f64::consts::PI, 16)
            .unwrap()
            .wavenumbers();
        assert_eq!(k[1], 1.0);
        assert_eq!(k[15], -1.0);
        assert_eq!(k[8], -8.0);
    }

    #[test]
    fn gaussian_norm() {
        let phi = gaussian(0.5, 1.0, 0.2);
        let n = inner_product(&phi, &phi).unwrap();
        assert!((n.re - 0.5).abs() < 1e-8 && n.im.abs() < 1e-15);
        let tag = phi.gaussian().unwrap();
        assert!((tag.norm_sq(0.2) - 0.5).abs() < 1e-14);
        let peak = phi.samples()[1024].norm_sqr();
        assert!((peak - 0.63078).abs() < 1e-5, "{peak}");
    }

    #[test]
    fn parity_orthogonality() {
        let grid = Grid::centered(32.0, 1024).unwrap();
        let even = WaveField::from_fn(grid, 0.2, |x| Complex64::new((-x * x).exp(), 0.0)).unwrap();
        let odd =
            WaveField::from_fn(grid, 0.2, |x| Complex64::new(x * (-x * x).exp(), 0.0)).unwrap();
        assert!(inner_product(&even, &odd).unwrap().norm() < 1e-10);
    }

    #[test]
    fn gaussian_expectations() {
        let phi = gaussian(0.5, 1.0, 0.2);
        assert_eq!(expectation(&phi, Observable::One).unwrap(), 1.0);
        assert!(expectation(&phi, Observable::X).unwrap().abs() < 1e-12);
        assert!(expectation(&phi, Observable::P).unwrap().abs() < 1e-12);
        assert!((expectation(&phi, Observable::XX).unwrap() - 0.1).abs() < 1e-10);
        assert!((expectation(&phi, Observable::PP).unwrap() - 0.1).abs() < 1e-10);
        assert!(expectation(&phi, Observable::XP).unwrap().abs() < 1e-12);
    }

    #[test]
    fn central_moments_of_gaussian() {
        let (zeta, hbar) = (1.3, 0.2);
        let phi = gaussian(0.5, zeta, hbar);
        let m = central_moments(&phi, &PhasePoint::origin(1), 4).unwrap();
        assert!(m.get(0, 1).unwrap().abs() < 1e-12);
        assert!((m.get(0, 2).unwrap() - hbar * zeta * zeta / 2.0).abs() < 1e-10);
        assert!((m.get(2, 0).unwrap() - hbar / (2.0 * zeta * zeta)).abs() < 1e-10);
        // fourth moment ⟨x⁴⟩ = 3 Var²
        let v = hbar * zeta * zeta / 2.0;
        assert!((m.get(0, 4).unwrap() - 3.0 * v * v).abs() < 1e-10);
        let m2 =
            central_moments(&gaussian(0.5, zeta, hbar / 2.0), &PhasePoint::origin(1), 2).unwrap();
        let ratio = m.get(0, 2).unwrap() / m2.get(0, 2).unwrap();
        assert!((ratio - 2.0).abs() < 1e-6);
    }

    #[test]
    fn chirped_gaussian_cross_moment() {
        // Γ = β + i/ζ² gives Var(x) = ħζ²/2 and sym(xp) = β Var(x)
        let hbar = 0.1;
        let beta = 0.7;
        let tag = GaussianTag {
            amplitude: Complex64::new(1.0, 0.0),
            center: 0.0,
            momentum: 0.0,
            width: Complex64::new(beta, 1.0),
        };
        let phi = WaveField::from_gaussian(Grid::centered(32.0, 2048).unwrap(), hbar, tag);
        let xp = expectation(&phi, Observable::XP).unwrap();
        assert!((xp - beta * hbar / 2.0).abs() < 1e-10, "{xp}");
    }

    #[test]
    fn initial_moments_of_wide_gaussian() {
        let phi = gaussian(0.5, 2.0, 0.2);
        let s = initial_moments(&phi).unwrap();
        assert!((s.base.sigma - 0.5).abs() < 1e-10);
        assert!(s.base.z.as_vector().amax() < 1e-12);
        assert!((s.delta2[(0, 0)] - 0.125).abs() < 1e-9);
        assert!((s.delta2[(1, 1)] - 2.0).abs() < 1e-9);
        assert!(s.delta2[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn phase_ramp_shifts_momentum() {
        let p0 = 0.8;
        let phi = gaussian(0.5, 1.0, 0.2).map(|x, v| v * (I * p0 * x / 0.2).exp());
        let s = initial_moments(&phi).unwrap();
        assert!((s.base.z.p()[0] - p0).abs() < 1e-10);
        assert!(s.base.z.x()[0].abs() < 1e-12);
    }

    #[test]
    fn unresolved_state_is_rejected() {
        let grid = Grid::centered(4.0, 64).unwrap();
        let wide =
            WaveField::from_fn(grid, 0.2, |x| Complex64::new((-x * x / 4.0).exp(), 0.0)).unwrap();
        assert!(matches!(
            expectation(&wide, Observable::X),
            Err(Error::Resolution(_))
        ));
        let grid = Grid::centered(32.0, 64).unwrap();
        let sharp =
            WaveField::from_fn(grid, 0.2, |x| Complex64::new((-x * x * 400.0).exp(), 0.0)).unwrap();
        assert!(matches!(sharp.check_resolved(), Err(Error::Resolution(_))));
    }

    #[test]
    fn refinement_leaves_moments_unchanged() {
        let tag = GaussianTag {
            momentum: 0.4,
            center: 0.3,
            ..GaussianTag::atom_laser(0.5, 1.0, 0.2)
        };
        let coarse = WaveField::from_gaussian(Grid::centered(32.0, 1024).unwrap(), 0.2, tag);
        let fine = WaveField::from_gaussian(Grid::centered(32.0, 2048).unwrap(), 0.2, tag);
        let a = initial_moments(&coarse).unwrap();
        let b = initial_moments(&fine).unwrap();
        assert!((a.base.sigma - b.base.sigma).abs() < 1e-10);
        assert!((a.base.z.as_vector() - b.base.z.as_vector()).amax() < 1e-10);
        assert!((&a.delta2 - &b.delta2).amax() * 0.2 < 1e-10);
    }

    #[test]
    fn class_scaling_of_second_moments() {
        let ratios: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&h| {
                let m = central_moments(&gaussian(0.5, 1.0, h), &PhasePoint::origin(1), 2).unwrap();
                m.get(0, 2).unwrap() / h
            })
            .collect();
        for r in &ratios {
            assert!((r / ratios[0] - 1.0).abs() < 0.1);
        }
    }

    proptest! {
        #[test]
        fn parseval_and_conjugate_symmetry(
            a in 0.3f64..2.0, b in -1.0f64..1.0, c in -2.0f64..2.0, d in 0.3f64..1.5
        ) {
            let grid = Grid::centered(32.0, 512).unwrap();
            let f = WaveField::from_fn(grid, 0.2, |x| (I * b * x - a * (x - 0.5).powi(2)).exp()).unwrap();
            let g = WaveField::from_fn(grid, 0.2, |x| Complex64::new(x, c).scale((-d * x * x).exp())).unwrap();
            prop_assert!((f.norm_sq() - f.norm_sq_spectral()).abs() < 1e-10 * f.norm_sq());
            let fg = inner_product(&f, &g).unwrap();
            let gf = inner_product(&g, &f).unwrap();
            prop_assert!((fg - gf.conj()).norm() < 1e-12);
        }
    }
}
