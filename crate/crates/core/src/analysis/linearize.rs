use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sim::Dae;

/// Default finite-difference perturbation, pu.
pub const DEFAULT_PERTURBATION: f64 = 1e-6;

/// Residual above which a point is not accepted as an equilibrium.
pub const EQUILIBRIUM_TOLERANCE: f64 = 1e-8;

/// Jacobian blocks of a DAE at one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianBlocks {
    pub fx: DMatrix<f64>,
    pub fy: DMatrix<f64>,
    pub gx: DMatrix<f64>,
    pub gy: DMatrix<f64>,
}

/// Central-difference Jacobian blocks of `dae` at `(x, y)`.
pub fn jacobian_blocks<D: Dae + ?Sized>(dae: &D, x: &[f64], y: &[f64], eps: f64) -> Result<JacobianBlocks> {
    let (nx, ny) = (dae.n_diff(), dae.n_alg());
    if x.len() != nx {
        return Err(Error::Shape { what: "differential state".into(), expected: nx, actual: x.len() });
    }
    if y.len() != ny {
        return Err(Error::Shape { what: "algebraic state".into(), expected: ny, actual: y.len() });
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Contract(format!("perturbation must be positive, got {eps}")));
    }
    let mut blocks = JacobianBlocks {
        fx: DMatrix::zeros(nx, nx),
        fy: DMatrix::zeros(nx, ny),
        gx: DMatrix::zeros(ny, nx),
        gy: DMatrix::zeros(ny, ny),
    };
    let (mut fp, mut fm) = (vec![0.0; nx], vec![0.0; nx]);
    let (mut gp, mut gm) = (vec![0.0; ny], vec![0.0; ny]);
    let mut xp = x.to_vec();
    let mut yp = y.to_vec();
    for j in 0..nx + ny {
        let slot = if j < nx { &mut xp[j] } else { &mut yp[j - nx] };
        let base = *slot;
        *slot = base + eps;
        dae.eval(&xp, &yp, &mut fp, &mut gp);
        let slot = if j < nx { &mut xp[j] } else { &mut yp[j - nx] };
        *slot = base - eps;
        dae.eval(&xp, &yp, &mut fm, &mut gm);
        let slot = if j < nx { &mut xp[j] } else { &mut yp[j - nx] };
        *slot = base;
        for i in 0..nx {
            let d = (fp[i] - fm[i]) / (2.0 * eps);
            if j < nx {
                blocks.fx[(i, j)] = d;
            } else {
                blocks.fy[(i, j - nx)] = d;
            }
        }
        for i in 0..ny {
            let d = (gp[i] - gm[i]) / (2.0 * eps);
            if j < nx {
                blocks.gx[(i, j)] = d;
            } else {
                blocks.gy[(i, j - nx)] = d;
            }
        }
    }
    Ok(blocks)
}

/// Largest absolute entry of the right-hand side at `(x, y)`.
pub fn residual<D: Dae + ?Sized>(dae: &D, x: &[f64], y: &[f64]) -> f64 {
    let mut f = vec![0.0; dae.n_diff()];
    let mut g = vec![0.0; dae.n_alg()];
    dae.eval(x, y, &mut f, &mut g);
    f.iter().chain(&g).fold(0.0, |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) })
}

/// State matrix of the differential states with the algebraic variables
/// eliminated: `fx - fy * gy^-1 * gx`.
pub fn linearize<D: Dae + ?Sized>(dae: &D, x: &[f64], y: &[f64], eps: f64) -> Result<DMatrix<f64>> {
    let r = residual(dae, x, y);
    if !(r < EQUILIBRIUM_TOLERANCE) {
        return Err(Error::Contract(format!("operating point is not an equilibrium (residual {r:.3e})")));
    }
    let b = jacobian_blocks(dae, x, y, eps)?;
    if b.gy.nrows() == 0 {
        return Ok(b.fx);
    }
    let lu = b.gy.lu();
    let scale = lu.u().diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let pivot = lu.u().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(pivot > 1e-12 * scale.max(1.0)) {
        return Err(Error::Analysis("algebraic Jacobian is singular".into()));
    }
    let elim = lu
        .solve(&b.gx)
        .ok_or_else(|| Error::Analysis("algebraic Jacobian is singular".into()))?;
    Ok(b.fx - b.fy * elim)
}
