//! Row-major dense matrices and the handful of products the network needs.

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn fill(&mut self, v: T) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn cast<U: Scalar>(&self) -> Mat<U> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|v| U::from_f64(v.to_f64().unwrap_or(f64::NAN)).unwrap_or(U::nan()))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `out = x · wᵀ + bias` for a batch `x` (`B × in`) and weight `w` (`out × in`).
pub fn affine<T: Scalar>(x: &Mat<T>, w: &Mat<T>, bias: &Mat<T>, out: &mut Mat<T>) {
    debug_assert_eq!(x.cols, w.cols);
    debug_assert_eq!(bias.data.len(), w.rows);
    *out = Mat::zeros(x.rows, w.rows);
    for r in 0..x.rows {
        out.row_mut(r).copy_from_slice(&bias.data);
    }
    // x (B×in) · wᵀ (in×out)
    T::gemm(
        x.rows,
        x.cols,
        w.rows,
        T::one(),
        &x.data,
        x.cols as isize,
        1,
        &w.data,
        1,
        w.cols as isize,
        T::one(),
        &mut out.data,
        out.cols as isize,
        1,
    );
}

/// `out += alpha · x · wᵀ` with `x` (`B × in`) and `w` (`out × in`).
pub fn add_xwt<T: Scalar>(x: &Mat<T>, w: &Mat<T>, alpha: T, out: &mut Mat<T>) {
    debug_assert_eq!(x.cols, w.cols);
    debug_assert_eq!((out.rows, out.cols), (x.rows, w.rows));
    T::gemm(
        x.rows,
        x.cols,
        w.rows,
        alpha,
        &x.data,
        x.cols as isize,
        1,
        &w.data,
        1,
        w.cols as isize,
        T::one(),
        &mut out.data,
        out.cols as isize,
        1,
    );
}

/// `out += dy · w` with `dy` (`B × out`) and `w` (`out × in`); backprop to inputs.
pub fn add_dy_w<T: Scalar>(dy: &Mat<T>, w: &Mat<T>, out: &mut Mat<T>) {
    debug_assert_eq!(dy.cols, w.rows);
    debug_assert_eq!((out.rows, out.cols), (dy.rows, w.cols));
    T::gemm(
        dy.rows,
        dy.cols,
        w.cols,
        T::one(),
        &dy.data,
        dy.cols as isize,
        1,
        &w.data,
        w.cols as isize,
        1,
        T::one(),
        &mut out.data,
        out.cols as isize,
        1,
    );
}

/// `gw += dyᵀ · x` with `dy` (`B × out`) and `x` (`B × in`); weight gradient.
pub fn add_dyt_x<T: Scalar>(dy: &Mat<T>, x: &Mat<T>, gw: &mut Mat<T>) {
    debug_assert_eq!(dy.rows, x.rows);
    debug_assert_eq!((gw.rows, gw.cols), (dy.cols, x.cols));
    T::gemm(
        dy.cols,
        dy.rows,
        x.cols,
        T::one(),
        &dy.data,
        1,
        dy.cols as isize,
        &x.data,
        x.cols as isize,
        1,
        T::one(),
        &mut gw.data,
        gw.cols as isize,
        1,
    );
}

/// Column sums of `dy` accumulated into a bias gradient.
pub fn add_col_sums<T: Scalar>(dy: &Mat<T>, gb: &mut Mat<T>) {
    debug_assert_eq!(dy.cols, gb.data.len());
    for r in 0..dy.rows {
        for (g, v) in gb.data.iter_mut().zip(dy.row(r)) {
            *g += *v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Mat<f64>, b_t: &Mat<f64>) -> Mat<f64> {
        let mut out = Mat::zeros(a.rows, b_t.rows);
        for i in 0..a.rows {
            for j in 0..b_t.rows {
                out.data[i * b_t.rows + j] = (0..a.cols).map(|k| a.at(i, k) * b_t.at(j, k)).sum();
            }
        }
        out
    }

    fn seq(rows: usize, cols: usize, s: f64) -> Mat<f64> {
        Mat::from_vec(rows, cols, (0..rows * cols).map(|i| ((i as f64) * s).sin()).collect())
    }

    #[test]
    fn products_match_naive_loops() {
        let x = seq(3, 4, 0.7);
        let w = seq(5, 4, 1.3);
        let bias = Mat::zeros(1, 5);
        let mut out = Mat::zeros(0, 0);
        affine(&x, &w, &bias, &mut out);
        let expect = naive(&x, &w);
        for (a, b) in out.data.iter().zip(&expect.data) {
            assert!((a - b).abs() < 1e-12);
        }

        let dy = seq(3, 5, 0.4);
        let mut dx = Mat::zeros(3, 4);
        add_dy_w(&dy, &w, &mut dx);
        let mut gw = Mat::zeros(5, 4);
        add_dyt_x(&dy, &x, &mut gw);
        for i in 0..3 {
            for k in 0..4 {
                let e: f64 = (0..5).map(|j| dy.at(i, j) * w.at(j, k)).sum();
                assert!((dx.at(i, k) - e).abs() < 1e-12);
            }
        }
        for j in 0..5 {
            for k in 0..4 {
                let e: f64 = (0..3).map(|i| dy.at(i, j) * x.at(i, k)).sum();
                assert!((gw.at(j, k) - e).abs() < 1e-12);
            }
        }
    }
}
