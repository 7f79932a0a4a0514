//! Dormand–Prince 5(4) integrator with the 4th-order continuous extension.
//!
//! Every moment system and linear flow in this crate is driven through
//! [`integrate`]. Accepted steps are kept as [`Segment`]s so the solution can be
//! evaluated anywhere on the integration span.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest step accepted before giving up with [`Error::StepSizeUnderflow`].
    pub h_min: f64,
    pub max_steps: usize,
    /// First trial step; chosen heuristically when `None`.
    pub h_start: Option<f64>,
}

impl Options {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            h_min: 1e-14,
            max_steps: 1_000_000,
            h_start: None,
        }
    }
}

impl Default for Options {
    fn default() -> Self {
        Self::with_tol(1e-10)
    }
}

/// One accepted step together with its interpolation coefficients.
#[derive(Debug, Clone)]
pub struct Segment {
    pub t0: f64,
    pub h: f64,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    r2: Vec<f64>,
    r3: Vec<f64>,
    r4: Vec<f64>,
    r5: Vec<f64>,
}

impl Segment {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        if t == self.t0 {
            out.copy_from_slice(&self.y0);
            return;
        }
        if t == self.t1() {
            out.copy_from_slice(&self.y1);
            return;
        }
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        for i in 0..out.len() {
            out[i] = self.y0[i]
                + s * (self.r2[i] + s1 * (self.r3[i] + s * (self.r4[i] + s1 * self.r5[i])));
        }
    }
}

/// Piecewise dense solution over `[t_start, t_end]`.
#[derive(Debug, Clone)]
pub struct DenseSolution {
    dim: usize,
    t_start: f64,
    y_start: Vec<f64>,
    segments: Vec<Segment>,
}

impl DenseSolution {
    /// A solution supported on the single instant `t0`.
    pub fn instant(t0: f64, y0: &[f64]) -> Self {
        Self {
            dim: y0.len(),
            t_start: t0,
            y_start: y0.to_vec(),
            segments: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.segments.last().map_or(self.t_start, Segment::t1)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Step nodes, starting with `t_start`.
    pub fn nodes(&self) -> Vec<f64> {
        std::iter::once(self.t_start)
            .chain(self.segments.iter().map(Segment::t1))
            .collect()
    }

    pub fn node_values(&self) -> impl Iterator<Item = (f64, &[f64])> {
        std::iter::once((self.t_start, self.y_start.as_slice()))
            .chain(self.segments.iter().map(|s| (s.t1(), s.y1.as_slice())))
    }

    pub fn last(&self) -> &[f64] {
        self.segments.last().map_or(&self.y_start, |s| &s.y1)
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let (start, end) = (self.t_start, self.t_end());
        if !(t >= start && t <= end) {
            return Err(Error::OutOfRange { t, start, end });
        }
        if self.segments.is_empty() || t == start {
            out.copy_from_slice(&self.y_start);
            return Ok(());
        }
        let idx = self
            .segments
            .partition_point(|s| s.t1() < t)
            .min(self.segments.len() - 1);
        self.segments[idx].eval_into(t, out);
        Ok(())
    }

    /// Apply a linear map to every stored vector; the interpolant is linear in
    /// them, so the result is the dense solution of the mapped system.
    pub fn apply_linear(&mut self, f: impl Fn(&mut [f64])) {
        f(&mut self.y_start);
        for s in &mut self.segments {
            for v in [
                &mut s.y0, &mut s.y1, &mut s.r2, &mut s.r3, &mut s.r4, &mut s.r5,
            ] {
                f(v);
            }
        }
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }
}

/// Decision returned by the per-step guard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    Continue,
    /// Stop before committing the offered segment; the payload is the time the
    /// guard attributes the stop to.
    Halt(f64),
}

/// Outcome of an integration run.
#[derive(Debug, Clone)]
pub struct Run {
    pub solution: DenseSolution,
    pub halted_at: Option<f64>,
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], opts: &Options) -> f64 {
    let n = err.len() as f64;
    let s: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = opts.atol + opts.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

/// Integrate `y' = f(t, y)` from `t0` to `t_end` (which must exceed `t0`).
///
/// `guard` sees every candidate segment before it is committed and can halt
/// the run; the halted segment is not stored.
pub fn integrate<F, G>(
    mut rhs: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &Options,
    mut guard: G,
) -> Result<Run>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    G: FnMut(&Segment) -> Verdict,
{
    if !(t_end > t0) {
        return Err(Error::Argument(format!(
            "integration end {t_end} must exceed start {t0}"
        )));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("non-finite initial state".into()));
    }
    let dim = y0.len();
    let mut sol = DenseSolution {
        dim,
        t_start: t0,
        y_start: y0.to_vec(),
        segments: Vec::new(),
    };

    let mut k: Vec<Vec<f64>> = (0..7).map(|_| vec![0.0; dim]).collect();
    let mut ytmp = vec![0.0; dim];
    let mut y1 = vec![0.0; dim];
    let mut err = vec![0.0; dim];

    let mut t = t0;
    let mut y = y0.to_vec();
    rhs(t, &y, &mut k[0])?;

    // Initial step from the Hairer–Wanner heuristic.
    let span = t_end - t0;
    let d0 = error_norm(&y, &y, &y, opts).max(1e-300) * (dim as f64).sqrt();
    let d1 = error_norm(&k[0], &y, &y, opts).max(1e-300) * (dim as f64).sqrt();
    let mut h = match opts.h_start {
        Some(h) => h,
        None if d0 < 1e-5 || d1 < 1e-5 => 1e-6,
        None => 0.01 * d0 / d1,
    };
    h = h.min(span).max(opts.h_min * 10.0);

    let mut reject = false;
    for _ in 0..opts.max_steps {
        if t >= t_end {
            break;
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }

        let (k0, rest) = k.split_first_mut().unwrap();
        let [k1, k2, k3, k4, k5, k6] = rest else {
            unreachable!()
        };
        for i in 0..dim {
            ytmp[i] = y[i] + h * A21 * k0[i];
        }
        rhs(t + C2 * h, &ytmp, k1)?;
        for i in 0..dim {
            ytmp[i] = y[i] + h * (A31 * k0[i] + A32 * k1[i]);
        }
        rhs(t + C3 * h, &ytmp, k2)?;
        for i in 0..dim {
            ytmp[i] = y[i] + h * (A41 * k0[i] + A42 * k1[i] + A43 * k2[i]);
        }
        rhs(t + C4 * h, &ytmp, k3)?;
        for i in 0..dim {
            ytmp[i] = y[i] + h * (A51 * k0[i] + A52 * k1[i] + A53 * k2[i] + A54 * k3[i]);
        }
        rhs(t + C5 * h, &ytmp, k4)?;
        for i in 0..dim {
            ytmp[i] =
                y[i] + h * (A61 * k0[i] + A62 * k1[i] + A63 * k2[i] + A64 * k3[i] + A65 * k4[i]);
        }
        rhs(t + h, &ytmp, k5)?;
        for i in 0..dim {
            y1[i] =
                y[i] + h * (A71 * k0[i] + A73 * k2[i] + A74 * k3[i] + A75 * k4[i] + A76 * k5[i]);
        }
        rhs(t + h, &y1, k6)?;
        for i in 0..dim {
            err[i] =
                h * (E1 * k0[i] + E3 * k2[i] + E4 * k3[i] + E5 * k4[i] + E6 * k5[i] + E7 * k6[i]);
        }

        let mut e = error_norm(&err, &y, &y1, opts);
        if !e.is_finite() || y1.iter().any(|v| !v.is_finite()) {
            e = f64::INFINITY;
        }

        if e <= 1.0 {
            let mut r2 = vec![0.0; dim];
            let mut r3 = vec![0.0; dim];
            let mut r4 = vec![0.0; dim];
            let mut r5 = vec![0.0; dim];
            for i in 0..dim {
                let dy = y1[i] - y[i];
                let bspl = h * k0[i] - dy;
                r2[i] = dy;
                r3[i] = bspl;
                r4[i] = dy - h * k6[i] - bspl;
                r5[i] = h
                    * (D1 * k0[i] + D3 * k2[i] + D4 * k3[i] + D5 * k4[i] + D6 * k5[i] + D7 * k6[i]);
            }
            let seg = Segment {
                t0: t,
                h,
                y0: y.clone(),
                y1: y1.clone(),
                r2,
                r3,
                r4,
                r5,
            };
            if let Verdict::Halt(th) = guard(&seg) {
                return Ok(Run {
                    solution: sol,
                    halted_at: Some(th),
                });
            }
            sol.segments.push(seg);
            t = if last { t_end } else { t + h };
            y.copy_from_slice(&y1);
            k.swap(0, 6);

            let mut fac = 0.9 * e.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 10.0);
            if reject {
                fac = fac.min(1.0);
            }
            reject = false;
            h *= fac;
        } else {
            reject = true;
            let fac = if e.is_finite() {
                (0.9 * e.powf(-0.2)).max(0.2)
            } else {
                0.25
            };
            h *= fac;
            if h < opts.h_min {
                return Err(Error::StepSizeUnderflow { t, h });
            }
        }
    }
    if t < t_end {
        return Err(Error::StepSizeUnderflow { t, h });
    }
    Ok(Run {
        solution: sol,
        halted_at: None,
    })
}
