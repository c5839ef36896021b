//! Thin wrappers over `rustfft` with a per-thread plan cache.
//!
//! Convention used everywhere in the crate: the forward transform is
//! unnormalized, the inverse divides by the transform length.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub fn forward(buf: &mut [Complex64]) {
    if buf.len() <= 1 {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

pub fn inverse(buf: &mut [Complex64]) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n));
    plan.process(buf);
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Transform every contiguous row of a row-major `rows x cols` array.
pub fn forward_rows(data: &mut [Complex64], cols: usize) {
    for row in data.chunks_exact_mut(cols) {
        forward(row);
    }
}

pub fn inverse_rows(data: &mut [Complex64], cols: usize) {
    for row in data.chunks_exact_mut(cols) {
        inverse(row);
    }
}

/// Transform every column of a row-major `rows x cols` array.
pub fn forward_cols(data: &mut [Complex64], rows: usize, cols: usize) {
    by_columns(data, rows, cols, forward);
}

pub fn inverse_cols(data: &mut [Complex64], rows: usize, cols: usize) {
    by_columns(data, rows, cols, inverse);
}

fn by_columns(data: &mut [Complex64], rows: usize, cols: usize, op: fn(&mut [Complex64])) {
    let mut col = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            col[r] = data[r * cols + c];
        }
        op(&mut col);
        for r in 0..rows {
            data[r * cols + c] = col[r];
        }
    }
}

pub fn forward_2d(data: &mut [Complex64], rows: usize, cols: usize) {
    forward_rows(data, cols);
    forward_cols(data, rows, cols);
}

pub fn inverse_2d(data: &mut [Complex64], rows: usize, cols: usize) {
    inverse_rows(data, cols);
    inverse_cols(data, rows, cols);
}

/// Signed mode number of FFT slot `i` for a transform of length `n`.
pub fn signed_mode(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_dimensional_round_trip() {
        let rows = 8;
        let cols = 16;
        let orig: Vec<Complex64> = (0..rows * cols)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut buf = orig.clone();
        forward_2d(&mut buf, rows, cols);
        inverse_2d(&mut buf, rows, cols);
        for (a, b) in orig.iter().zip(&buf) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn signed_modes() {
        let m: Vec<i64> = (0..8).map(|i| signed_mode(i, 8)).collect();
        assert_eq!(m, vec![0, 1, 2, 3, -4, -3, -2, -1]);
    }
}
