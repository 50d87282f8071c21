//! Small shared linear-algebra helpers.

use nalgebra::{DMatrix, DVector};

/// Orthonormal basis of the 2-dimensional orthogonal complement of the span
/// of `basis` in n-space, computed from the SVD of the complement projector.
/// `basis` must hold n-2 orthonormal vectors (may be empty for n = 2).
pub(crate) fn orthogonal_complement_plane(
    n: usize,
    basis: &[DVector<f64>],
) -> (DVector<f64>, DVector<f64>) {
    let mut proj = DMatrix::<f64>::identity(n, n);
    for a in basis {
        proj -= a * a.transpose();
    }
    let svd = proj.svd(true, false);
    let u = svd.u.as_ref().unwrap();
    (u.column(0).into_owned(), u.column(1).into_owned())
}

/// Counterclockwise angular gap from `a` to `b`, in [0, 2*pi).
pub(crate) fn ccw_gap(a: f64, b: f64) -> f64 {
    (b - a).rem_euclid(std::f64::consts::TAU)
}
