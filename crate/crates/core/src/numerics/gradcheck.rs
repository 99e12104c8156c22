//! Finite-difference gradient checking.
//!
//! The checker re-evaluates the scalar objective on a fresh tape for every
//! perturbed input element, so it exercises only the forward pass and is
//! independent of the reverse-mode code it validates.

use crate::numerics::tape::{NodeId, Tape};
use crate::numerics::tensor::Tensor;

/// Worst element found by a gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_input: usize,
    pub worst_element: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

/// Relative error with an absolute floor: strict for O(1) gradients,
/// absolute below magnitude one so exact zeros do not divide by zero.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / f64::max(1.0, f64::max(a.abs(), b.abs()))
}

/// Compare reverse-mode gradients of `build` against central differences
/// for every element of every input. `build` must return a scalar node.
pub fn gradient_check<F>(build: F, inputs: &[Tensor], step: f64) -> GradCheckReport
where
    F: Fn(&mut Tape, &[NodeId]) -> NodeId,
{
    let eval = |tensors: &[Tensor]| -> f64 {
        let mut tape = Tape::new();
        let ids: Vec<NodeId> = tensors.iter().map(|t| tape.constant(t.clone())).collect();
        let out = build(&mut tape, &ids);
        tape.value(out).scalar_value()
    };

    // analytic gradients
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = build(&mut tape, &ids);
    let grads = tape.backward(out).expect("scalar output required");

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_input: 0,
        worst_element: 0,
        analytic: 0.0,
        numeric: 0.0,
    };

    let mut work: Vec<Tensor> = inputs.to_vec();
    for (pi, input) in inputs.iter().enumerate() {
        let g = grads.wrt_or_zero(ids[pi], input.shape());
        for e in 0..input.len() {
            let orig = work[pi].data()[e];
            work[pi].data_mut()[e] = orig + step;
            let up = eval(&work);
            work[pi].data_mut()[e] = orig - step;
            let down = eval(&work);
            work[pi].data_mut()[e] = orig;
            let fd = (up - down) / (2.0 * step);
            let err = rel_err(g.data()[e], fd);
            if err > report.max_rel_err {
                report = GradCheckReport {
                    max_rel_err: err,
                    worst_input: pi,
                    worst_element: e,
                    analytic: g.data()[e],
                    numeric: fd,
                };
            }
        }
    }
    report
}
