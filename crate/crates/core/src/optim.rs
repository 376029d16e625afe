//! AdaGrad with double-precision accumulators and sparse row updates.

use crate::real::Real;

pub const ADAGRAD_EPSILON: f64 = 1e-10;

/// One AdaGrad update: `G += g²`, `θ -= lr·g / (√G + ε)`.
pub fn adagrad_step<T: Real>(params: &mut [T], grads: &[T], accumulator: &mut [f64], lr: f64) {
    debug_assert_eq!(params.len(), grads.len());
    debug_assert_eq!(params.len(), accumulator.len());
    for ((p, &g), acc) in params.iter_mut().zip(grads).zip(accumulator.iter_mut()) {
        let g = g.as_f64();
        *acc += g * g;
        *p -= T::lit(lr * g / (acc.sqrt() + ADAGRAD_EPSILON));
    }
}

/// Accumulator state for a parameter table made of fixed-width rows.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaGrad {
    learning_rate: f64,
    row_width: usize,
    accumulator: Vec<f64>,
}

impl AdaGrad {
    pub fn new(learning_rate: f64, num_rows: usize, row_width: usize) -> Self {
        Self {
            learning_rate,
            row_width,
            accumulator: vec![0.0; num_rows * row_width],
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn accumulator(&self) -> &[f64] {
        &self.accumulator
    }

    /// Updates a single row of `table` in place.
    pub fn step_row<T: Real>(&mut self, table: &mut [T], row: usize, grads: &[T]) {
        let span = row * self.row_width..(row + 1) * self.row_width;
        adagrad_step(
            &mut table[span.clone()],
            grads,
            &mut self.accumulator[span],
            self.learning_rate,
        );
    }
}
