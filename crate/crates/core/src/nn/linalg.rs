//! Strided matrix views over slices and a checked wrapper around the
//! `matrixmultiply` kernels.

use num_traits::Float;
use std::fmt::Debug;

/// Scalar type the network can be instantiated with.
pub trait Real: Float + Default + Debug + Send + Sync + 'static {
    /// # Safety
    /// Pointers and strides must describe valid, non-aliasing `m x k`,
    /// `k x n` and `m x n` matrices.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    fn from_f64(v: f64) -> Self;

    fn as_f64(self) -> f64;
}

macro_rules! impl_real {
    ($ty:ty, $kernel:path) => {
        impl Real for $ty {
            unsafe fn gemm_raw(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: *const Self,
                rsa: isize,
                csa: isize,
                b: *const Self,
                rsb: isize,
                csb: isize,
                beta: Self,
                c: *mut Self,
                rsc: isize,
                csc: isize,
            ) {
                $kernel(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
            }

            fn from_f64(v: f64) -> Self {
                v as $ty
            }

            fn as_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm);
impl_real!(f64, matrixmultiply::dgemm);

/// Read-only `rows x cols` view; element `(i, j)` is `data[i * rs + j * cs]`.
#[derive(Clone, Copy)]
pub(crate) struct View<'a, T> {
    pub data: &'a [T],
    pub rows: usize,
    pub cols: usize,
    pub rs: usize,
    pub cs: usize,
}

impl<'a, T> View<'a, T> {
    pub fn new(data: &'a [T], rows: usize, cols: usize, rs: usize, cs: usize) -> Self {
        let v = Self { data, rows, cols, rs, cs };
        assert!(v.span() <= data.len(), "view exceeds its slice");
        v
    }

    /// Contiguous row-major view.
    pub fn rows(data: &'a [T], rows: usize, cols: usize) -> Self {
        Self::new(data, rows, cols, cols, 1)
    }

    /// Transpose of a contiguous row-major `cols x rows` matrix.
    pub fn transposed(data: &'a [T], rows: usize, cols: usize) -> Self {
        Self::new(data, rows, cols, 1, rows)
    }

    /// Transposed view of the same data.
    pub fn t(self) -> Self {
        Self { data: self.data, rows: self.cols, cols: self.rows, rs: self.cs, cs: self.rs }
    }

    /// Row-major copy, gathered in cache-sized tiles.
    fn to_row_major(&self) -> Vec<T>
    where
        T: Copy + Default,
    {
        const TILE: usize = 32;
        let mut out = vec![T::default(); self.rows * self.cols];
        for i0 in (0..self.rows).step_by(TILE) {
            for j0 in (0..self.cols).step_by(TILE) {
                for j in j0..(j0 + TILE).min(self.cols) {
                    for i in i0..(i0 + TILE).min(self.rows) {
                        out[i * self.cols + j] = self.data[i * self.rs + j * self.cs];
                    }
                }
            }
        }
        out
    }

    fn span(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            0
        } else {
            (self.rows - 1) * self.rs + (self.cols - 1) * self.cs + 1
        }
    }
}

/// `c = alpha * a * b + beta * c`, where `c` is `a.rows x b.cols` with row
/// stride `rsc` and unit column stride. Rows of `c` must not overlap
/// (`rsc >= b.cols`). With `beta == 0` the prior contents of `c` are ignored.
pub(crate) fn gemm<T: Real>(alpha: T, a: View<'_, T>, b: View<'_, T>, beta: T, c: &mut [T], rsc: usize) {
    assert_eq!(a.cols, b.rows, "inner dimensions differ");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    if m == 0 || n == 0 {
        return;
    }
    assert!(rsc >= n, "output rows overlap");
    assert!((m - 1) * rsc + n <= c.len(), "output exceeds its slice");
    if k == 0 {
        for i in 0..m {
            for v in &mut c[i * rsc..i * rsc + n] {
                *v = if beta == T::zero() { T::zero() } else { *v * beta };
            }
        }
        return;
    }
    // The kernels run markedly faster with the short side as `m` and with a
    // row-major right operand, so tall products are computed as
    // `c^T = b^T a^T`, and a right operand without unit column stride is
    // first copied into row-major order.
    let swap = m > n;
    let (m2, n2, a2, b2, rsc2, csc2) = if swap {
        (n, m, b.t(), a.t(), 1, rsc)
    } else {
        (m, n, a, b, rsc, 1)
    };
    let packed;
    let b2 = if b2.cs == 1 {
        b2
    } else {
        packed = b2.to_row_major();
        View::rows(&packed, k, n2)
    };
    // SAFETY: spans were bounds-checked above and in `View::new`; `c` is a
    // unique borrow with non-overlapping rows, so it cannot alias `a` or `b`.
    unsafe {
        T::gemm_raw(
            m2,
            k,
            n2,
            alpha,
            a2.data.as_ptr(),
            a2.rs as isize,
            a2.cs as isize,
            b2.data.as_ptr(),
            b2.rs as isize,
            b2.cs as isize,
            beta,
            c.as_mut_ptr(),
            rsc2 as isize,
            csc2 as isize,
        )
    }
}
