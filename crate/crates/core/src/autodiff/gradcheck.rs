//! Central finite-difference verification of tape gradients, run in `f64`.

use super::{Matrix, Tape, Var};
use crate::error::{Error, Result};

/// Denominator floor of the relative error, so coordinates whose true
/// gradient is ~0 are judged on absolute error instead.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(input, flat coordinate)` where the maximum occurred.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
    /// Coordinates whose ±h evaluations switched a ReLU branch.
    pub skipped_kinks: usize,
    pub tol: f64,
    pub passed: bool,
}

/// Finite-difference gradient plus a per-coordinate kink-crossing mask.
#[derive(Debug, Clone)]
pub struct NumericGradient {
    pub grads: Vec<Matrix<f64>>,
    pub crosses_kink: Vec<Vec<bool>>,
}

fn evaluate<F>(f: &F, inputs: &[Matrix<f64>]) -> Result<(f64, Option<Vec<bool>>)>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    tape.track_kinks();
    let vars: Vec<Var> = inputs.iter().map(|m| tape.param(m.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let value = tape.value(out);
    if value.shape() != (1, 1) {
        return Err(Error::shape("grad_check", format!("loss shape {:?}", value.shape())));
    }
    let v = value.item();
    if !v.is_finite() {
        return Err(Error::Numeric(format!("loss evaluated to {v}")));
    }
    Ok((v, tape.kink_signature().map(<[bool]>::to_vec)))
}

/// Loss value and tape gradients with respect to every input.
pub fn analytic_gradient<F>(f: &F, inputs: &[Matrix<f64>]) -> Result<(f64, Vec<Matrix<f64>>)>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|m| tape.param(m.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let loss = tape.value(out).item();
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("loss evaluated to {loss}")));
    }
    let mut grads = tape.backward(out)?;
    let result = vars
        .iter()
        .zip(inputs)
        .map(|(&v, m)| grads.take(v).unwrap_or_else(|| Matrix::zeros(m.rows(), m.cols())))
        .collect();
    Ok((loss, result))
}

pub fn numeric_gradient<F>(f: &F, inputs: &[Matrix<f64>], h: f64) -> Result<NumericGradient>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let (_, base_sig) = evaluate(f, inputs)?;
    let mut work: Vec<Matrix<f64>> = inputs.to_vec();
    let mut grads = Vec::with_capacity(inputs.len());
    let mut crosses = Vec::with_capacity(inputs.len());
    for i in 0..inputs.len() {
        let mut g = Matrix::zeros(inputs[i].rows(), inputs[i].cols());
        let mut mask = vec![false; inputs[i].len()];
        for c in 0..inputs[i].len() {
            let orig = work[i].as_slice()[c];
            work[i].as_mut_slice()[c] = orig + h;
            let (fp, sp) = evaluate(f, &work)?;
            work[i].as_mut_slice()[c] = orig - h;
            let (fm, sm) = evaluate(f, &work)?;
            work[i].as_mut_slice()[c] = orig;
            g.as_mut_slice()[c] = (fp - fm) / (2.0 * h);
            mask[c] = sp != base_sig || sm != base_sig;
        }
        grads.push(g);
        crosses.push(mask);
    }
    Ok(NumericGradient {
        grads,
        crosses_kink: crosses,
    })
}

/// Compares gradients coordinate-wise, ignoring kink-crossing coordinates.
pub fn compare_gradients(analytic: &[Matrix<f64>], numeric: &NumericGradient, tol: f64) -> GradCheckReport {
    let mut max_rel = 0.0f64;
    let mut worst = None;
    let mut checked = 0;
    let mut skipped = 0;
    for (i, (a, n)) in analytic.iter().zip(&numeric.grads).enumerate() {
        for (c, (&av, &nv)) in a.as_slice().iter().zip(n.as_slice()).enumerate() {
            if numeric.crosses_kink[i][c] {
                skipped += 1;
                continue;
            }
            checked += 1;
            let denom = av.abs().max(nv.abs()).max(REL_ERROR_FLOOR);
            let rel = (av - nv).abs() / denom;
            if rel > max_rel || rel.is_nan() {
                max_rel = rel;
                worst = Some((i, c));
            }
        }
    }
    GradCheckReport {
        max_rel_error: max_rel,
        worst,
        checked,
        skipped_kinks: skipped,
        tol,
        passed: max_rel < tol,
    }
}

/// Checks the tape gradient of the scalar built by `f` against central
/// differences with step `h`.
pub fn grad_check<F>(f: F, inputs: &[Matrix<f64>], h: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let (_, analytic) = analytic_gradient(&f, inputs)?;
    let numeric = numeric_gradient(&f, inputs, h)?;
    Ok(compare_gradients(&analytic, &numeric, tol))
}
