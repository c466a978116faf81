//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};

use nalgebra::{DMatrix, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point field the solvers are generic over: `f32` or `f64`.
///
/// Arithmetic and elementary functions come from [`RealField`]; the
/// num-traits conversions move constants and reported values in and out.
/// The symmetric eigensolver is dispatched per type because it is the one
/// kernel not taken from nalgebra (see [`Real::eigh`]).
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal or tolerance into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 is representable")
    }

    /// Converts a count into this scalar type.
    #[inline]
    fn from_count(k: usize) -> Self {
        <Self as FromPrimitive>::from_usize(k).expect("usize is representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric
    /// matrix, reading only its lower triangle.
    ///
    /// Backed by faer: nalgebra's implicit QR iteration occasionally stops
    /// with reconstruction errors far above round-off on matrices with
    /// large clusters of tiny eigenvalues, which is exactly what iterates
    /// near the boundary of a PSD constraint look like.
    fn eigh(m: &DMatrix<Self>) -> (Vec<Self>, DMatrix<Self>);

    /// Relative tolerance floor: `max(tol, 16 * machine epsilon)`, so that
    /// tolerances tuned for `f64` stay meaningful in `f32`.
    #[inline]
    fn tol(tol: f64) -> Self {
        let eps = Self::default_epsilon() * Self::lit(16.0);
        let t = Self::lit(tol);
        if t > eps {
            t
        } else {
            eps
        }
    }
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            fn eigh(m: &DMatrix<$t>) -> (Vec<$t>, DMatrix<$t>) {
                let n = m.nrows();
                let f = faer::Mat::<$t>::from_fn(n, n, |i, j| m[(i, j)]);
                let e = f.selfadjoint_eigendecomposition(faer::Side::Lower);
                let s = e.s().column_vector();
                let u = e.u();
                let values = (0..n).map(|i| s.read(i)).collect();
                (values, DMatrix::from_fn(n, n, |i, j| u.read(i, j)))
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_floor_tracks_precision() {
        assert_eq!(<f64 as Real>::tol(1e-12), 1e-12);
        assert!(<f32 as Real>::tol(1e-12) > 1e-7);
        assert_eq!(<f64 as Real>::lit(0.5), 0.5);
        assert_eq!(<f32 as Real>::from_count(3), 3.0);
    }
}
