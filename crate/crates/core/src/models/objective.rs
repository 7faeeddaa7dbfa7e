//! Negative-sampling logistic loss and its exact gradients.

use super::tables::{Gradients, Matrix, Table};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Result of scoring one input vector against a target and its negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct NsOutcome {
    pub loss: f64,
    /// d loss / d input.
    pub input_grad: Vec<f64>,
    /// d loss / d output row, one entry per touched row (merged).
    pub output_grads: Gradients,
}

/// `loss = -ln σ(v·o_target) - Σ ln σ(-v·o_neg)` with gradients for `v` and
/// every output row it touched.
pub fn ns_loss_and_grads(input: &[f64], target: u32, negatives: &[u32], out: &Matrix, out_table: Table) -> NsOutcome {
    let mut input_grad = vec![0.0; input.len()];
    let mut output_grads = Gradients::new();
    let loss = accumulate(input, target, negatives, out, out_table, &mut output_grads, &mut input_grad);
    NsOutcome {
        loss,
        input_grad,
        output_grads,
    }
}

/// Adds the gradients of one negative-sampling prediction into `grads`
/// (output rows) and `input_grad`, and returns the loss.
pub(crate) fn accumulate(
    input: &[f64],
    target: u32,
    negatives: &[u32],
    out: &Matrix,
    out_table: Table,
    grads: &mut Gradients,
    input_grad: &mut [f64],
) -> f64 {
    debug_assert_eq!(input.len(), out.cols());
    let width = out.cols();
    let mut loss = 0.0;
    let mut row = vec![0.0; width];

    let score = out.dot_row(target as usize, input);
    loss += softplus(-score);
    let coef = sigmoid(score) - 1.0;
    out.read_row_into(target as usize, &mut row);
    for (g, o) in input_grad.iter_mut().zip(&row) {
        *g += coef * o;
    }
    grads.add(out_table, target, input, coef);

    for &neg in negatives {
        let score = out.dot_row(neg as usize, input);
        loss += softplus(score);
        let coef = sigmoid(score);
        out.read_row_into(neg as usize, &mut row);
        for (g, o) in input_grad.iter_mut().zip(&row) {
            *g += coef * o;
        }
        grads.add(out_table, neg, input, coef);
    }
    loss
}
