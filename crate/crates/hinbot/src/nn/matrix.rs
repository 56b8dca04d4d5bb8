use super::NnError;

/// Dense row-major matrix of `f64`.
///
/// Invariant: `rows * cols == data.len()`. Constructors that accept outside
/// data reject NaN/Inf; internal arithmetic trusts its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Build from row-major data, rejecting shape/length disagreement and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NnError> {
        if data.len() != rows * cols {
            return Err(NnError::ShapeMismatch {
                op: "Matrix::from_vec",
                expected: format!("{} values for {}x{}", rows * cols, rows, cols),
                got: format!("{}", data.len()),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(NnError::NonFinite {
                op: "Matrix::from_vec",
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Column vector helper used for biases and small fixtures.
    pub fn column(data: Vec<f64>) -> Result<Self, NnError> {
        let rows = data.len();
        Matrix::from_vec(rows, 1, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn same_shape(&self, other: &Matrix) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub fn shape_string(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        assert!(self.same_shape(other), "add_assign shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    pub fn mul_assign(&mut self, other: &Matrix) {
        assert!(self.same_shape(other), "mul_assign shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a *= *b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// Sum of squared entries; the L2 regularizer accumulates this per tensor.
    pub fn sum_of_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Horizontal concatenation `[self | other]`; row counts must match.
    pub fn hcat(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "hcat row counts");
        let mut out = Matrix::zeros(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            out.row_mut(i)[..self.cols].copy_from_slice(self.row(i));
            out.row_mut(i)[self.cols..].copy_from_slice(other.row(i));
        }
        out
    }

    /// Copy of the column block `[start, start + width)`.
    pub fn block_cols(&self, start: usize, width: usize) -> Matrix {
        assert!(start + width <= self.cols, "block_cols range");
        let mut out = Matrix::zeros(self.rows, width);
        for i in 0..self.rows {
            out.row_mut(i).copy_from_slice(&self.row(i)[start..start + width]);
        }
        out
    }

    /// `self * other`, (m x k) * (k x n).
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul inner dims");
        let mut out = Matrix::zeros(self.rows, other.cols);
        self.gemm_into(false, other, false, 1.0, 0.0, &mut out);
        out
    }

    /// `self * other^T`, (m x k) * (n x k)^T.
    pub fn matmul_nt(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "matmul_nt inner dims");
        let mut out = Matrix::zeros(self.rows, other.rows);
        self.gemm_into(false, other, true, 1.0, 0.0, &mut out);
        out
    }

    /// `self^T * other`, (k x m)^T * (k x n).
    pub fn matmul_tn(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "matmul_tn inner dims");
        let mut out = Matrix::zeros(self.cols, other.cols);
        self.gemm_into(true, other, false, 1.0, 0.0, &mut out);
        out
    }

    /// `into += self^T * other`; gradient accumulation form.
    pub fn matmul_tn_acc(&self, other: &Matrix, into: &mut Matrix) {
        assert_eq!(self.rows, other.rows, "matmul_tn_acc inner dims");
        assert!(
            into.rows == self.cols && into.cols == other.cols,
            "matmul_tn_acc output shape"
        );
        self.gemm_into(true, other, false, 1.0, 1.0, into);
    }

    /// `into += self * other`.
    pub fn matmul_acc(&self, other: &Matrix, into: &mut Matrix) {
        assert_eq!(self.cols, other.rows, "matmul_acc inner dims");
        assert!(
            into.rows == self.rows && into.cols == other.cols,
            "matmul_acc output shape"
        );
        self.gemm_into(false, other, false, 1.0, 1.0, into);
    }

    fn gemm_into(&self, ta: bool, other: &Matrix, tb: bool, alpha: f64, beta: f64, out: &mut Matrix) {
        let (m, k) = if ta {
            (self.cols, self.rows)
        } else {
            (self.rows, self.cols)
        };
        let n = if tb { other.rows } else { other.cols };
        let (rsa, csa) = if ta {
            (1, self.cols as isize)
        } else {
            (self.cols as isize, 1)
        };
        let (rsb, csb) = if tb {
            (1, other.cols as isize)
        } else {
            (other.cols as isize, 1)
        };
        // Strides encode the transposes; matrixmultiply does the blocking.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                alpha,
                self.data.as_ptr(),
                rsa,
                csa,
                other.data.as_ptr(),
                rsb,
                csb,
                beta,
                out.data.as_mut_ptr(),
                out.cols as isize,
                1,
            );
        }
    }
}
