/// Semi-explicit DAE `x' = f(x, y)`, `0 = g(x, y)`.
pub trait Dae {
    fn n_diff(&self) -> usize;
    fn n_alg(&self) -> usize;

    /// Evaluate `f` and `g` together; implementations overwrite both slices.
    fn eval(&self, x: &[f64], y: &[f64], f: &mut [f64], g: &mut [f64]);

    /// Called after every accepted step: project differential states back onto
    /// hard limits and update any discrete limiter modes, which stay fixed
    /// during the next step. Returns true if a mode changed.
    fn project(&mut self, _x: &mut [f64], _y: &[f64]) -> bool {
        false
    }
}
