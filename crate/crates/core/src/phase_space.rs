//! Phase-space points, the symplectic form, and derivative evaluation of Weyl
//! symbols.
//!
//! Phase points are flat vectors ordered `(p₁…pₙ, x₁…xₙ)`; every gradient and
//! Hessian block in the crate follows this ordering.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A point `z = (p, x)` of the 2n-dimensional phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    coords: DVector<f64>,
}

impl PhasePoint {
    pub fn new(p: &[f64], x: &[f64]) -> Result<Self> {
        if p.len() != x.len() || p.is_empty() {
            return Err(Error::Argument(format!(
                "momentum and position must have equal nonzero length (got {} and {})",
                p.len(),
                x.len()
            )));
        }
        let coords = DVector::from_iterator(2 * p.len(), p.iter().chain(x).copied());
        Self::from_vector(coords)
    }

    pub fn from_vector(coords: DVector<f64>) -> Result<Self> {
        if coords.is_empty() || !coords.len().is_multiple_of(2) {
            return Err(Error::Argument(format!(
                "phase point needs even nonzero length, got {}",
                coords.len()
            )));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::Argument(format!("non-finite phase coordinate {i}")));
        }
        Ok(Self { coords })
    }

    pub fn origin(n: usize) -> Self {
        Self {
            coords: DVector::zeros(2 * n),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len() / 2
    }

    pub fn p(&self) -> &[f64] {
        &self.coords.as_slice()[..self.dim()]
    }

    pub fn x(&self) -> &[f64] {
        &self.coords.as_slice()[self.dim()..]
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn as_slice(&self) -> &[f64] {
        self.coords.as_slice()
    }
}

/// The canonical symplectic matrix `J = [[0, −I], [I, 0]]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymplecticForm {
    pub n: usize,
}

impl SymplecticForm {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut j = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            j[(i, n + i)] = -1.0;
            j[(n + i, i)] = 1.0;
        }
        j
    }

    /// `J v` without forming the matrix.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(2 * n, |i, _| if i < n { -v[n + i] } else { v[i - n] })
    }

    /// `⟨a, J b⟩`.
    pub fn pairing(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.dot(&self.apply(b))
    }
}

/// A real-valued one-point Weyl symbol `A(z, t)`.
///
/// Analytic derivatives are optional; the model falls back to central finite
/// differences when they return `None`.
pub trait PointSymbol: Send + Sync {
    fn value(&self, z: &[f64], t: f64) -> f64;

    fn gradient(&self, _z: &[f64], _t: f64) -> Option<DVector<f64>> {
        None
    }

    fn hessian(&self, _z: &[f64], _t: f64) -> Option<DMatrix<f64>> {
        None
    }
}

/// Second-derivative blocks of a two-point symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct PairHessian {
    pub zz: DMatrix<f64>,
    /// `∂²W/∂z_k∂w_j`, rows indexed by z.
    pub zw: DMatrix<f64>,
    pub ww: DMatrix<f64>,
}

/// A real-valued two-point Weyl symbol `W(z, w, t)`.
///
/// `W(z, w) = W(w, z)` is not assumed.
pub trait PairSymbol: Send + Sync {
    fn value(&self, z: &[f64], w: &[f64], t: f64) -> f64;

    /// `(∂W/∂z, ∂W/∂w)`.
    fn gradient(&self, _z: &[f64], _w: &[f64], _t: f64) -> Option<(DVector<f64>, DVector<f64>)> {
        None
    }

    fn hessian(&self, _z: &[f64], _w: &[f64], _t: f64) -> Option<PairHessian> {
        None
    }
}

type PointValueFn = dyn Fn(&[f64], f64) -> f64 + Send + Sync;
type PointGradFn = dyn Fn(&[f64], f64) -> DVector<f64> + Send + Sync;
type PointHessFn = dyn Fn(&[f64], f64) -> DMatrix<f64> + Send + Sync;

/// Closure-backed [`PointSymbol`].
#[derive(Clone)]
pub struct PointFn {
    value: Arc<PointValueFn>,
    gradient: Option<Arc<PointGradFn>>,
    hessian: Option<Arc<PointHessFn>>,
}

impl PointFn {
    pub fn new(f: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(f),
            gradient: None,
            hessian: None,
        }
    }

    pub fn with_gradient(
        mut self,
        g: impl Fn(&[f64], f64) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    pub fn with_hessian(
        mut self,
        h: impl Fn(&[f64], f64) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.hessian = Some(Arc::new(h));
        self
    }
}

impl fmt::Debug for PointFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PointFn")
            .field("analytic_gradient", &self.gradient.is_some())
            .field("analytic_hessian", &self.hessian.is_some())
            .finish()
    }
}

impl PointSymbol for PointFn {
    fn value(&self, z: &[f64], t: f64) -> f64 {
        (self.value)(z, t)
    }

    fn gradient(&self, z: &[f64], t: f64) -> Option<DVector<f64>> {
        self.gradient.as_ref().map(|g| g(z, t))
    }

    fn hessian(&self, z: &[f64], t: f64) -> Option<DMatrix<f64>> {
        self.hessian.as_ref().map(|h| h(z, t))
    }
}

type PairValueFn = dyn Fn(&[f64], &[f64], f64) -> f64 + Send + Sync;

/// Closure-backed [`PairSymbol`] with finite-difference derivatives only.
#[derive(Clone)]
pub struct PairFn {
    value: Arc<PairValueFn>,
}

impl PairFn {
    pub fn new(f: impl Fn(&[f64], &[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { value: Arc::new(f) }
    }

    /// The symbol that vanishes identically.
    pub fn zero() -> Self {
        Self::new(|_, _, _| 0.0)
    }
}

impl fmt::Debug for PairFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PairFn")
    }
}

impl PairSymbol for PairFn {
    fn value(&self, z: &[f64], w: &[f64], t: f64) -> f64 {
        (self.value)(z, w, t)
    }
}

/// Selects one of the four symbols of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    V,
    VBreve,
    W,
    WBreve,
}

impl Symbol {
    pub fn name(self) -> &'static str {
        match self {
            Symbol::V => "V",
            Symbol::VBreve => "V_breve",
            Symbol::W => "W",
            Symbol::WBreve => "W_breve",
        }
    }

    pub fn is_pair(self) -> bool {
        matches!(self, Symbol::W | Symbol::WBreve)
    }
}

/// Value and derivative blocks of a symbol at one evaluation point.
///
/// For one-point symbols the `w` fields are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolDerivatives {
    pub value: f64,
    pub grad_z: DVector<f64>,
    pub grad_w: Option<DVector<f64>>,
    pub hess_zz: DMatrix<f64>,
    pub hess_zw: Option<DMatrix<f64>>,
    pub hess_ww: Option<DMatrix<f64>>,
}

/// The four symbols `V, V̆, W, W̆` of the model equation.
#[derive(Clone)]
pub struct SymbolModel {
    n: usize,
    v: Arc<dyn PointSymbol>,
    v_breve: Arc<dyn PointSymbol>,
    w: Arc<dyn PairSymbol>,
    w_breve: Arc<dyn PairSymbol>,
    h_fd: f64,
}

impl fmt::Debug for SymbolModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymbolModel")
            .field("n", &self.n)
            .field("h_fd", &self.h_fd)
            .finish_non_exhaustive()
    }
}

pub const DEFAULT_FD_STEP: f64 = 1e-5;

impl SymbolModel {
    pub fn new(
        n: usize,
        v: Arc<dyn PointSymbol>,
        v_breve: Arc<dyn PointSymbol>,
        w: Arc<dyn PairSymbol>,
        w_breve: Arc<dyn PairSymbol>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Argument("phase-space dimension must be ≥ 1".into()));
        }
        Ok(Self {
            n,
            v,
            v_breve,
            w,
            w_breve,
            h_fd: DEFAULT_FD_STEP,
        })
    }

    pub fn with_fd_step(mut self, h_fd: f64) -> Result<Self> {
        if !(h_fd > 0.0 && h_fd.is_finite()) {
            return Err(Error::Argument(format!("finite-difference step {h_fd}")));
        }
        self.h_fd = h_fd;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn fd_step(&self) -> f64 {
        self.h_fd
    }

    pub fn point_symbol(&self, which: Symbol) -> Option<&dyn PointSymbol> {
        match which {
            Symbol::V => Some(self.v.as_ref()),
            Symbol::VBreve => Some(self.v_breve.as_ref()),
            _ => None,
        }
    }

    pub fn pair_symbol(&self, which: Symbol) -> Option<&dyn PairSymbol> {
        match which {
            Symbol::W => Some(self.w.as_ref()),
            Symbol::WBreve => Some(self.w_breve.as_ref()),
            _ => None,
        }
    }

    fn check_point(&self, z: &PhasePoint) -> Result<()> {
        if z.dim() != self.n {
            return Err(Error::Argument(format!(
                "phase point of dimension {} for model of dimension {}",
                z.dim(),
                self.n
            )));
        }
        Ok(())
    }

    /// Value, gradients and Hessian blocks of `which` at `z` (and `w` for the
    /// two-point symbols).
    pub fn derivatives(
        &self,
        which: Symbol,
        z: &PhasePoint,
        w: Option<&PhasePoint>,
        t: f64,
    ) -> Result<SymbolDerivatives> {
        self.check_point(z)?;
        let name = which.name();
        match (self.point_symbol(which), self.pair_symbol(which)) {
            (Some(sym), _) => {
                let d = point_derivatives(sym, z.as_slice(), t, self.h_fd);
                check_finite(name, "value", std::slice::from_ref(&d.0))?;
                check_finite(name, "gradient", d.1.as_slice())?;
                check_finite(name, "Hessian", d.2.as_slice())?;
                Ok(SymbolDerivatives {
                    value: d.0,
                    grad_z: d.1,
                    grad_w: None,
                    hess_zz: d.2,
                    hess_zw: None,
                    hess_ww: None,
                })
            }
            (None, Some(sym)) => {
                let w = w.ok_or_else(|| {
                    Error::Argument(format!("two-point symbol {name} needs a second point"))
                })?;
                self.check_point(w)?;
                let d = pair_derivatives(sym, z.as_slice(), w.as_slice(), t, self.h_fd);
                check_finite(name, "value", std::slice::from_ref(&d.value))?;
                check_finite(name, "gradient", d.grad_z.as_slice())?;
                check_finite(name, "gradient", d.grad_w.as_slice())?;
                check_finite(name, "Hessian", d.hess.zz.as_slice())?;
                check_finite(name, "Hessian", d.hess.zw.as_slice())?;
                check_finite(name, "Hessian", d.hess.ww.as_slice())?;
                Ok(SymbolDerivatives {
                    value: d.value,
                    grad_z: d.grad_z,
                    grad_w: Some(d.grad_w),
                    hess_zz: d.hess.zz,
                    hess_zw: Some(d.hess.zw),
                    hess_ww: Some(d.hess.ww),
                })
            }
            (None, None) => unreachable!(),
        }
    }

    /// `∂/∂z Sp[A_zz(z) Δ]` for a one-point symbol, or `∂/∂z Sp[B(z, w) Δ]`
    /// with `B` the `zz` or `ww` Hessian block of a two-point symbol at fixed `w`.
    pub fn trace_gradient(
        &self,
        which: Symbol,
        block: HessianBlock,
        z: &PhasePoint,
        w: Option<&PhasePoint>,
        delta: &DMatrix<f64>,
        t: f64,
    ) -> Result<DVector<f64>> {
        self.check_point(z)?;
        let m = 2 * self.n;
        let name = which.name();
        let wv = match (which.is_pair(), w) {
            (true, Some(w)) => Some(w.as_slice().to_vec()),
            (true, None) => {
                return Err(Error::Argument(format!(
                    "two-point symbol {name} needs a second point"
                )))
            }
            (false, _) => None,
        };
        let trace_at = |zc: &[f64]| -> f64 {
            let hess = match (self.point_symbol(which), self.pair_symbol(which)) {
                (Some(s), _) => point_hessian(s, zc, t, self.h_fd),
                (_, Some(s)) => {
                    let h = pair_hessian(s, zc, wv.as_deref().unwrap(), t, self.h_fd);
                    match block {
                        HessianBlock::ZZ => h.zz,
                        HessianBlock::WW => h.ww,
                    }
                }
                _ => unreachable!(),
            };
            hess.component_mul(delta).sum()
        };
        let analytic = match (self.point_symbol(which), self.pair_symbol(which)) {
            (Some(s), _) => s.hessian(z.as_slice(), t).is_some(),
            (_, Some(s)) => s.hessian(z.as_slice(), wv.as_deref().unwrap(), t).is_some(),
            _ => false,
        };
        // Differencing a finite-difference Hessian needs a coarser outer step.
        let base = if analytic { self.h_fd } else { 1e-3 };
        let zc = z.as_slice();
        let mut g = DVector::zeros(m);
        let mut buf = zc.to_vec();
        for k in 0..m {
            let h = base * zc[k].abs().max(1.0);
            buf[k] = zc[k] + h;
            let fp = trace_at(&buf);
            buf[k] = zc[k] - h;
            let fm = trace_at(&buf);
            buf[k] = zc[k];
            g[k] = (fp - fm) / (2.0 * h);
        }
        check_finite(name, "third derivative", g.as_slice())?;
        Ok(g)
    }
}

/// Which Hessian block of a two-point symbol enters [`SymbolModel::trace_gradient`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessianBlock {
    ZZ,
    WW,
}

fn check_finite(symbol: &'static str, quantity: &'static str, vals: &[f64]) -> Result<()> {
    match vals.iter().position(|v| !v.is_finite()) {
        Some(coordinate) => Err(Error::Evaluation {
            symbol,
            quantity,
            coordinate,
        }),
        None => Ok(()),
    }
}

fn step(h_fd: f64, c: f64) -> f64 {
    h_fd * c.abs().max(1.0)
}

fn fd_gradient(f: impl Fn(&[f64]) -> f64, z: &[f64], h_fd: f64) -> DVector<f64> {
    let mut buf = z.to_vec();
    DVector::from_fn(z.len(), |k, _| {
        let h = step(h_fd, z[k]);
        buf[k] = z[k] + h;
        let fp = f(&buf);
        buf[k] = z[k] - h;
        let fm = f(&buf);
        buf[k] = z[k];
        (fp - fm) / (2.0 * h)
    })
}

const HESSIAN_STEP_FLOOR: f64 = 1e-4;

/// Hessian by central differences of function values. Second differences lose
/// about ε/h² to cancellation, so the step never drops below 1e-4.
fn fd_hessian_values(f: impl Fn(&[f64]) -> f64, z: &[f64], h_fd: f64) -> DMatrix<f64> {
    let m = z.len();
    let mut out = DMatrix::zeros(m, m);
    let mut buf = z.to_vec();
    let f0 = f(z);
    let h_fd = h_fd.max(HESSIAN_STEP_FLOOR);
    for i in 0..m {
        let hi = step(h_fd, z[i]);
        buf[i] = z[i] + hi;
        let fp = f(&buf);
        buf[i] = z[i] - hi;
        let fm = f(&buf);
        buf[i] = z[i];
        out[(i, i)] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in 0..i {
            let hj = step(h_fd, z[j]);
            let mut eval = |si: f64, sj: f64| {
                buf[i] = z[i] + si * hi;
                buf[j] = z[j] + sj * hj;
                let v = f(&buf);
                buf[i] = z[i];
                buf[j] = z[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                / (4.0 * hi * hj);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

fn fd_hessian_gradient(g: impl Fn(&[f64]) -> DVector<f64>, z: &[f64], h_fd: f64) -> DMatrix<f64> {
    let m = z.len();
    let mut out = DMatrix::zeros(m, m);
    let mut buf = z.to_vec();
    for k in 0..m {
        let h = step(h_fd, z[k]);
        buf[k] = z[k] + h;
        let gp = g(&buf);
        buf[k] = z[k] - h;
        let gm = g(&buf);
        buf[k] = z[k];
        out.set_column(k, &((gp - gm) / (2.0 * h)));
    }
    (&out + out.transpose()) * 0.5
}

fn point_hessian(sym: &dyn PointSymbol, z: &[f64], t: f64, h_fd: f64) -> DMatrix<f64> {
    if let Some(h) = sym.hessian(z, t) {
        return h;
    }
    if sym.gradient(z, t).is_some() {
        fd_hessian_gradient(|zz| sym.gradient(zz, t).unwrap(), z, h_fd)
    } else {
        fd_hessian_values(|zz| sym.value(zz, t), z, h_fd)
    }
}

fn point_derivatives(
    sym: &dyn PointSymbol,
    z: &[f64],
    t: f64,
    h_fd: f64,
) -> (f64, DVector<f64>, DMatrix<f64>) {
    let value = sym.value(z, t);
    let grad = sym
        .gradient(z, t)
        .unwrap_or_else(|| fd_gradient(|zz| sym.value(zz, t), z, h_fd));
    let hess = point_hessian(sym, z, t, h_fd);
    (value, grad, hess)
}

struct PairDerivs {
    value: f64,
    grad_z: DVector<f64>,
    grad_w: DVector<f64>,
    hess: PairHessian,
}

fn split_joint(z: &[f64], w: &[f64]) -> Vec<f64> {
    z.iter().chain(w).copied().collect()
}

fn split_hessian(full: &DMatrix<f64>, m: usize) -> PairHessian {
    PairHessian {
        zz: full.view((0, 0), (m, m)).into_owned(),
        zw: full.view((0, m), (m, m)).into_owned(),
        ww: full.view((m, m), (m, m)).into_owned(),
    }
}

fn pair_hessian(sym: &dyn PairSymbol, z: &[f64], w: &[f64], t: f64, h_fd: f64) -> PairHessian {
    if let Some(h) = sym.hessian(z, w, t) {
        return h;
    }
    let m = z.len();
    let joint = split_joint(z, w);
    let full = if sym.gradient(z, w, t).is_some() {
        fd_hessian_gradient(
            |zw| {
                let (gz, gw) = sym.gradient(&zw[..m], &zw[m..], t).unwrap();
                DVector::from_iterator(2 * m, gz.iter().chain(gw.iter()).copied())
            },
            &joint,
            h_fd,
        )
    } else {
        fd_hessian_values(|zw| sym.value(&zw[..m], &zw[m..], t), &joint, h_fd)
    };
    split_hessian(&full, m)
}

fn pair_derivatives(sym: &dyn PairSymbol, z: &[f64], w: &[f64], t: f64, h_fd: f64) -> PairDerivs {
    let m = z.len();
    let value = sym.value(z, w, t);
    let (grad_z, grad_w) = sym.gradient(z, w, t).unwrap_or_else(|| {
        let g = fd_gradient(
            |zw| sym.value(&zw[..m], &zw[m..], t),
            &split_joint(z, w),
            h_fd,
        );
        (g.rows(0, m).into_owned(), g.rows(m, m).into_owned())
    });
    PairDerivs {
        value,
        grad_z,
        grad_w,
        hess: pair_hessian(sym, z, w, t, h_fd),
    }
}

/// Gradient of a one-point symbol, analytic when available.
pub fn gradient_of(sym: &dyn PointSymbol, z: &PhasePoint, t: f64, h_fd: f64) -> DVector<f64> {
    sym.gradient(z.as_slice(), t)
        .unwrap_or_else(|| fd_gradient(|zz| sym.value(zz, t), z.as_slice(), h_fd))
}

/// Poisson bracket `{A, B} = ⟨A_z, J B_z⟩ = Σᵢ (∂A/∂xᵢ ∂B/∂pᵢ − ∂B/∂xᵢ ∂A/∂pᵢ)`.
pub fn poisson_bracket(
    a: &dyn PointSymbol,
    b: &dyn PointSymbol,
    z: &PhasePoint,
    t: f64,
    h_fd: f64,
) -> Result<f64> {
    let ga = gradient_of(a, z, t, h_fd);
    check_finite("A", "gradient", ga.as_slice())?;
    let gb = gradient_of(b, z, t, h_fd);
    check_finite("B", "gradient", gb.as_slice())?;
    Ok(SymplecticForm::new(z.dim()).pairing(&ga, &gb))
}
