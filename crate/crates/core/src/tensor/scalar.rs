use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Element type of a [`Tensor`](super::Tensor).
///
/// `f32` is the training precision; `f64` is used for gradient checks. The
/// `f64` GEMM is a plain row-by-row loop so results are reproducible against
/// naive reference loops; `f32` goes through a blocked kernel.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Width in bits (32 or 64).
    const BITS: u32;

    /// `c = a·b` (or `c += a·b` when `accumulate`), with explicit strides so
    /// transposed operands need no copy. `a` is `m×k`, `b` is `k×n`, `c` is
    /// `m×n`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        a_strides: (usize, usize),
        b: &[Self],
        b_strides: (usize, usize),
        c: &mut [Self],
        accumulate: bool,
    );

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite conversion")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

fn check_extent(len: usize, rows: usize, cols: usize, (rs, cs): (usize, usize)) {
    if rows > 0 && cols > 0 {
        assert!((rows - 1) * rs + (cols - 1) * cs < len, "gemm operand out of bounds");
    }
}

impl Scalar for f32 {
    const BITS: u32 = 32;

    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[f32],
        a_strides: (usize, usize),
        b: &[f32],
        b_strides: (usize, usize),
        c: &mut [f32],
        accumulate: bool,
    ) {
        assert!(c.len() >= m * n);
        check_extent(a.len(), m, k, a_strides);
        check_extent(b.len(), k, n, b_strides);
        if m == 0 || n == 0 {
            return;
        }
        if k == 0 {
            if !accumulate {
                c[..m * n].fill(0.0);
            }
            return;
        }
        let beta = if accumulate { 1.0 } else { 0.0 };
        // SAFETY: extents were checked above; c is row-major m×n.
        unsafe {
            matrixmultiply::sgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr(),
                a_strides.0 as isize,
                a_strides.1 as isize,
                b.as_ptr(),
                b_strides.0 as isize,
                b_strides.1 as isize,
                beta,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
}

impl Scalar for f64 {
    const BITS: u32 = 64;

    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[f64],
        (ars, acs): (usize, usize),
        b: &[f64],
        (brs, bcs): (usize, usize),
        c: &mut [f64],
        accumulate: bool,
    ) {
        assert!(c.len() >= m * n);
        if !accumulate {
            c[..m * n].fill(0.0);
        }
        // i-p-j order: every c[i][j] is summed over p ascending, matching a
        // textbook triple loop bit for bit.
        for i in 0..m {
            let row = &mut c[i * n..(i + 1) * n];
            for p in 0..k {
                let aip = a[i * ars + p * acs];
                let boff = p * brs;
                if bcs == 1 {
                    let brow = &b[boff..boff + n];
                    for (cj, &bj) in row.iter_mut().zip(brow) {
                        *cj += aip * bj;
                    }
                } else {
                    for (j, cj) in row.iter_mut().enumerate() {
                        *cj += aip * b[boff + j * bcs];
                    }
                }
            }
        }
    }
}
