//! Dense complex kernels shared by the simulation modules.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>` (column-major). Products go
//! through `matrixmultiply::zgemm`; nalgebra only dispatches real scalars to
//! an optimized GEMM.

use matrixmultiply::CGemmOption;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// How an operand enters a product.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Plain,
    Adjoint,
}

/// `c = alpha * op(a) * op(b) + beta * c`.
pub fn gemm(
    alpha: Complex64,
    a: &CMatrix,
    op_a: Op,
    b: &CMatrix,
    op_b: Op,
    beta: Complex64,
    c: &mut CMatrix,
) {
    let (m, k) = match op_a {
        Op::Plain => (a.nrows(), a.ncols()),
        Op::Adjoint => (a.ncols(), a.nrows()),
    };
    let (kb, n) = match op_b {
        Op::Plain => (b.nrows(), b.ncols()),
        Op::Adjoint => (b.ncols(), b.nrows()),
    };
    assert_eq!(k, kb, "inner dimensions differ");
    assert_eq!((c.nrows(), c.ncols()), (m, n), "output shape mismatch");
    if m == 0 || n == 0 {
        return;
    }
    // matrixmultiply has no conjugating option: adjoints go through a
    // conjugated copy read with swapped strides.
    let a_conj;
    let a = match op_a {
        Op::Plain => a,
        Op::Adjoint => {
            a_conj = a.conjugate();
            &a_conj
        }
    };
    let b_conj;
    let b = match op_b {
        Op::Plain => b,
        Op::Adjoint => {
            b_conj = b.conjugate();
            &b_conj
        }
    };
    let (rsa, csa) = strides(a, op_a);
    let (rsb, csb) = strides(b, op_b);
    let rsc = 1isize;
    let csc = c.nrows() as isize;
    // SAFETY: Complex64 is repr(C) {re, im}, layout-identical to [f64; 2];
    // strides describe the column-major storage of each matrix and the
    // shapes were checked above.
    unsafe {
        matrixmultiply::zgemm(
            CGemmOption::Standard,
            CGemmOption::Standard,
            m,
            k,
            n,
            [alpha.re, alpha.im],
            a.as_ptr() as *const [f64; 2],
            rsa,
            csa,
            b.as_ptr() as *const [f64; 2],
            rsb,
            csb,
            [beta.re, beta.im],
            c.as_mut_ptr() as *mut [f64; 2],
            rsc,
            csc,
        );
    }
}

fn strides(m: &CMatrix, op: Op) -> (isize, isize) {
    let ld = m.nrows() as isize;
    match op {
        Op::Plain => (1, ld),
        Op::Adjoint => (ld, 1),
    }
}

pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut c = CMatrix::zeros(a.nrows(), b.ncols());
    gemm(ONE, a, Op::Plain, b, Op::Plain, ZERO, &mut c);
    c
}

/// `u * rho * u†`, reusing `scratch` for the intermediate product.
pub fn conjugate_into(u: &CMatrix, rho: &CMatrix, scratch: &mut CMatrix, out: &mut CMatrix) {
    gemm(ONE, u, Op::Plain, rho, Op::Plain, ZERO, scratch);
    gemm(ONE, scratch, Op::Plain, u, Op::Adjoint, ZERO, out);
}

pub fn conjugate(u: &CMatrix, rho: &CMatrix) -> CMatrix {
    let mut scratch = CMatrix::zeros(u.nrows(), rho.ncols());
    let mut out = CMatrix::zeros(u.nrows(), u.nrows());
    conjugate_into(u, rho, &mut scratch, &mut out);
    out
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// Symmetrize in place: `m <- (m + m†)/2`.
pub fn hermitize(m: &mut CMatrix) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
        m[(j, j)] = Complex64::new(m[(j, j)].re, 0.0);
    }
}

/// Pairwise (cascade) summation; the result depends only on the order of
/// `values`, never on how work was scheduled.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Sample mean and standard error of the mean (zero for a single value).
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(values) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn pairwise_sum_matrices(values: &[CMatrix]) -> Option<CMatrix> {
    match values.len() {
        0 => None,
        1 => Some(values[0].clone()),
        n => {
            let mid = n / 2;
            let left = pairwise_sum_matrices(&values[..mid])?;
            let right = pairwise_sum_matrices(&values[mid..])?;
            Some(left + right)
        }
    }
}
