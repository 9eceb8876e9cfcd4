use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const FD_STEP: f64 = 1e-5;

/// Magnitude below which errors are judged on an absolute scale; central
/// differences carry roundoff near `1e-10` for O(1) function values.
pub const FD_SCALE_FLOOR: f64 = 1e-4;

/// Compare the reverse-mode gradient of a scalar function against central
/// finite differences at `point`. Returns
/// `max_i |analytic_i - numeric_i| / max(|analytic_i|, |numeric_i|, FD_SCALE_FLOOR)`.
pub fn finite_diff_check<F>(f: F, point: &Tensor) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let x = tape.param(point.clone());
    let y = f(&mut tape, x)?;
    tape.backward(y)?;
    let analytic = tape.grad(x).expect("leaf requires grad").clone();

    let eval = |p: Tensor| -> Result<f64> {
        let mut t = Tape::new();
        let x = t.constant(p);
        let y = f(&mut t, x)?;
        let v = t.value(y);
        if v.numel() != 1 {
            return Err(Error::Contract("finite_diff_check needs a scalar function".into()));
        }
        Ok(v.item())
    };

    let mut worst = 0.0f64;
    for i in 0..point.numel() {
        let mut plus = point.clone();
        plus.data_mut()[i] += FD_STEP;
        let mut minus = point.clone();
        minus.data_mut()[i] -= FD_STEP;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * FD_STEP);
        let a = analytic.data()[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FD_SCALE_FLOOR);
        worst = worst.max(err);
    }
    Ok(worst)
}
