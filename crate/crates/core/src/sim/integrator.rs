//! Fixed-step implicit trapezoidal rule for semi-explicit DAEs, solved by a
//! chord Newton iteration on the simultaneous differential and algebraic
//! residual.

use nalgebra::{DMatrix, DVector, LU};

use super::dae::Dae;

/// Jacobian refreshes allowed within one Newton solve.
const MAX_REFACTORS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepFailure {
    /// Newton iterations did not converge even with a fresh Jacobian.
    Diverged { residual: f64 },
    /// The iteration matrix could not be factored.
    Singular,
    /// A non-finite value appeared in the residual.
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct Trapezoid {
    pub h: f64,
    /// Convergence threshold on the infinity norm of the Newton update,
    /// relative to the largest state magnitude (at least 1).
    pub tol: f64,
    pub max_iter: usize,
    lu: Option<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    scratch: Scratch,
    pub stats: Stats,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub steps: u64,
    pub iterations: u64,
    pub factorizations: u64,
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    f0: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    x0: Vec<f64>,
}

impl Trapezoid {
    pub fn new(h: f64) -> Self {
        Trapezoid {
            h,
            tol: 1e-11,
            max_iter: 12,
            lu: None,
            scratch: Scratch::default(),
            stats: Stats::default(),
        }
    }

    /// Drop the cached factorization, e.g. after the model structure changes.
    pub fn invalidate(&mut self) {
        self.lu = None;
    }

    /// Advance `(x, y)` by one step of size `h`.
    pub fn step<D: Dae + ?Sized>(&mut self, dae: &mut D, x: &mut [f64], y: &mut [f64]) -> Result<(), StepFailure> {
        let (nx, ny) = (dae.n_diff(), dae.n_alg());
        debug_assert_eq!(x.len(), nx);
        debug_assert_eq!(y.len(), ny);
        let s = &mut self.scratch;
        s.f0.resize(nx, 0.0);
        s.f.resize(nx, 0.0);
        s.g.resize(ny, 0.0);
        s.x0.clear();
        s.x0.extend_from_slice(x);
        dae.eval(x, y, &mut s.f0, &mut s.g);
        if !s.f0.iter().chain(&s.g).all(|v| v.is_finite()) {
            return Err(StepFailure::NonFinite);
        }

        let y0 = y.to_vec();
        let mut fresh = false;
        if self.lu.is_none() {
            self.factor(&*dae, x, y)?;
            fresh = true;
        }
        loop {
            match self.iterate(&*dae, x, y) {
                Ok(()) => {
                    if dae.project(x, y) {
                        self.lu = None;
                    }
                    self.stats.steps += 1;
                    return Ok(());
                }
                Err(e) if fresh => return Err(e),
                Err(_) => {
                    x.copy_from_slice(&self.scratch.x0);
                    y.copy_from_slice(&y0);
                    self.factor(&*dae, x, y)?;
                    fresh = true;
                }
            }
        }
    }

    fn residual<D: Dae + ?Sized>(&mut self, dae: &D, x: &[f64], y: &[f64], out: &mut DVector<f64>) -> bool {
        let s = &mut self.scratch;
        dae.eval(x, y, &mut s.f, &mut s.g);
        let nx = x.len();
        let half = 0.5 * self.h;
        for i in 0..nx {
            out[i] = x[i] - s.x0[i] - half * (s.f[i] + s.f0[i]);
        }
        for (k, g) in s.g.iter().enumerate() {
            out[nx + k] = *g;
        }
        out.iter().all(|v| v.is_finite())
    }

    fn iterate<D: Dae + ?Sized>(&mut self, dae: &D, x: &mut [f64], y: &mut [f64]) -> Result<(), StepFailure> {
        let nx = x.len();
        let n = nx + y.len();
        let mut r = DVector::zeros(n);
        let mut prev = f64::INFINITY;
        let scale = x.iter().chain(y.iter()).fold(1.0_f64, |m, v| m.max(v.abs()));
        let tol = self.tol * scale;
        let mut refactors = 0;
        let mut since_factor = 0;
        loop {
            self.stats.iterations += 1;
            since_factor += 1;
            if !self.residual(dae, x, y, &mut r) {
                return Err(StepFailure::NonFinite);
            }
            let lu = self.lu.as_ref().expect("factored before iterating");
            if !lu.solve_mut(&mut r) {
                return Err(StepFailure::Singular);
            }
            for i in 0..nx {
                x[i] -= r[i];
            }
            for (k, yk) in y.iter_mut().enumerate() {
                *yk -= r[nx + k];
            }
            let norm = r.amax();
            if !norm.is_finite() {
                return Err(StepFailure::NonFinite);
            }
            if norm < tol {
                return Ok(());
            }
            // Chord iterations converge linearly; on a poor rate refresh the
            // Jacobian at the current iterate.
            if norm > 0.5 * prev || since_factor >= self.max_iter {
                if refactors >= MAX_REFACTORS {
                    return Err(StepFailure::Diverged { residual: norm });
                }
                self.factor(dae, x, y)?;
                refactors += 1;
                since_factor = 0;
                prev = f64::INFINITY;
                continue;
            }
            prev = norm;
        }
    }

    /// Factor the iteration matrix at `(x, y)` by forward differences.
    fn factor<D: Dae + ?Sized>(&mut self, dae: &D, x: &[f64], y: &[f64]) -> Result<(), StepFailure> {
        let (nx, ny) = (x.len(), y.len());
        let n = nx + ny;
        let mut jac = DMatrix::zeros(n, n);
        let mut f = vec![0.0; nx];
        let mut g = vec![0.0; ny];
        let mut f1 = vec![0.0; nx];
        let mut g1 = vec![0.0; ny];
        dae.eval(x, y, &mut f, &mut g);
        let mut xp = x.to_vec();
        let mut yp = y.to_vec();
        let half = 0.5 * self.h;
        for j in 0..n {
            let base = if j < nx { x[j] } else { y[j - nx] };
            let eps = 1e-7 * base.abs().max(1.0);
            if j < nx {
                xp[j] = base + eps;
            } else {
                yp[j - nx] = base + eps;
            }
            dae.eval(&xp, &yp, &mut f1, &mut g1);
            for i in 0..nx {
                let dfi = (f1[i] - f[i]) / eps;
                jac[(i, j)] = if i == j { 1.0 } else { 0.0 } - half * dfi;
            }
            for k in 0..ny {
                jac[(nx + k, j)] = (g1[k] - g[k]) / eps;
            }
            if j < nx {
                xp[j] = base;
            } else {
                yp[j - nx] = base;
            }
        }
        if !jac.iter().all(|v| v.is_finite()) {
            return Err(StepFailure::NonFinite);
        }
        self.stats.factorizations += 1;
        let lu = jac.lu();
        if !lu.is_invertible() {
            self.lu = None;
            return Err(StepFailure::Singular);
        }
        self.lu = Some(lu);
        Ok(())
    }
}
