//! Cross ratios of ordered 4-tuples: extended-real scalars, concurrent lines
//! in the plane, and hyperplane pencils in n-space, together with the
//! six-value reordering orbit.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

/// Tolerance for identifying two lines: |sin(angle)| below this means "same line".
pub const LINE_TOL: f64 = 1e-9;
/// Deduplication tolerance for orbit value sets.
pub const ORBIT_TOL: f64 = 1e-9;

/// A real number extended with a single point at infinity.
///
/// Infinity is a tagged value rather than `f64::INFINITY`, so the limit
/// formulas for the cross ratio are explicit and NaN never propagates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ProjectiveScalar {
    Finite(f64),
    Infinity,
}

impl ProjectiveScalar {
    pub fn finite(v: f64) -> Self {
        assert!(v.is_finite(), "ProjectiveScalar::finite requires a finite real");
        ProjectiveScalar::Finite(v)
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ProjectiveScalar::Infinity)
    }

    pub fn as_finite(&self) -> Option<f64> {
        match self {
            ProjectiveScalar::Finite(v) => Some(*v),
            ProjectiveScalar::Infinity => None,
        }
    }

    fn coincides(&self, other: &Self, tol: f64) -> bool {
        match (self, other) {
            (ProjectiveScalar::Infinity, ProjectiveScalar::Infinity) => true,
            (ProjectiveScalar::Finite(a), ProjectiveScalar::Finite(b)) => (a - b).abs() <= tol,
            _ => false,
        }
    }
}

impl From<f64> for ProjectiveScalar {
    fn from(v: f64) -> Self {
        ProjectiveScalar::finite(v)
    }
}

impl std::fmt::Display for ProjectiveScalar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProjectiveScalar::Finite(v) => write!(f, "{v}"),
            ProjectiveScalar::Infinity => write!(f, "inf"),
        }
    }
}

/// Cross ratio ((z1-z4)(z3-z2)) / ((z1-z2)(z3-z4)) of four pairwise distinct
/// extended reals, at most one of which may be infinite.
pub fn cross_ratio(
    z1: ProjectiveScalar,
    z2: ProjectiveScalar,
    z3: ProjectiveScalar,
    z4: ProjectiveScalar,
) -> Result<ProjectiveScalar> {
    cross_ratio_with_tol(z1, z2, z3, z4, 0.0)
}

/// Same as [`cross_ratio`] with a caller-supplied coincidence tolerance.
pub fn cross_ratio_with_tol(
    z1: ProjectiveScalar,
    z2: ProjectiveScalar,
    z3: ProjectiveScalar,
    z4: ProjectiveScalar,
    tol: f64,
) -> Result<ProjectiveScalar> {
    let zs = [z1, z2, z3, z4];
    for i in 0..4 {
        for j in (i + 1)..4 {
            if zs[i].coincides(&zs[j], tol) {
                return Err(Error::DuplicatePoint(format!(
                    "arguments {} and {} coincide ({})",
                    i + 1,
                    j + 1,
                    zs[i]
                )));
            }
        }
    }
    use ProjectiveScalar::*;
    let value = match (z1, z2, z3, z4) {
        (Finite(a), Finite(b), Finite(c), Finite(d)) => {
            let num = (a - d) * (c - b);
            let den = (a - b) * (c - d);
            return Ok(ratio(num, den));
        }
        (Infinity, Finite(b), Finite(c), Finite(d)) => ratio(c - b, c - d),
        (Finite(a), Infinity, Finite(c), Finite(d)) => ratio(a - d, c - d),
        (Finite(a), Finite(b), Infinity, Finite(d)) => ratio(a - d, a - b),
        (Finite(a), Finite(b), Finite(c), Infinity) => ratio(c - b, a - b),
        _ => unreachable!("more than one infinity rejected by coincidence check"),
    };
    Ok(value)
}

fn ratio(num: f64, den: f64) -> ProjectiveScalar {
    if den == 0.0 {
        ProjectiveScalar::Infinity
    } else {
        ProjectiveScalar::Finite(num / den)
    }
}

/// The set of cross ratio values obtained under all 24 reorderings of the
/// underlying 4-tuple: the orbit of the S3 action generated by
/// `l -> 1/l` and `l -> 1 - l`. At most 6 values, sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossRatioOrbit {
    values: Vec<f64>,
    representative: f64,
}

impl CrossRatioOrbit {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn representative(&self) -> f64 {
        self.representative
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Orbit of a single cross ratio value under reordering.
pub fn orbit(lambda: f64) -> Result<CrossRatioOrbit> {
    if !lambda.is_finite() || lambda.abs() < 1e-12 || (lambda - 1.0).abs() < 1e-12 {
        return Err(Error::DegenerateCrossRatio(lambda));
    }
    let mut values = vec![
        lambda,
        1.0 / lambda,
        1.0 - lambda,
        1.0 / (1.0 - lambda),
        (lambda - 1.0) / lambda,
        lambda / (lambda - 1.0),
    ];
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values.dedup_by(|a, b| (*a - *b).abs() <= ORBIT_TOL);
    Ok(CrossRatioOrbit {
        values,
        representative: lambda,
    })
}

/// Hausdorff distance between the two sorted orbit value sets; 0 iff equal.
pub fn orbit_distance(a: &CrossRatioOrbit, b: &CrossRatioOrbit) -> f64 {
    let one_sided = |xs: &[f64], ys: &[f64]| {
        xs.iter()
            .map(|x| {
                ys.iter()
                    .map(|y| (x - y).abs())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0_f64, f64::max)
    };
    one_sided(&a.values, &b.values).max(one_sided(&b.values, &a.values))
}

/// Four ordered distinct lines through a common point in the plane, each
/// stored as a nonzero direction vector (identified up to sign and scale).
#[derive(Debug, Clone)]
pub struct LinePencil2D {
    directions: [Vector2<f64>; 4],
}

impl LinePencil2D {
    pub fn new(directions: [Vector2<f64>; 4]) -> Result<Self> {
        for (i, d) in directions.iter().enumerate() {
            if d.norm() == 0.0 {
                return Err(Error::InvalidPencil(format!("direction {i} is zero")));
            }
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                if lines_parallel(&directions[i], &directions[j]) {
                    return Err(Error::DuplicatePoint(format!(
                        "lines {} and {} are parallel",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(LinePencil2D { directions })
    }

    pub fn from_slopes(slopes: [ProjectiveScalar; 4]) -> Result<Self> {
        let dirs = slopes.map(|s| match s {
            ProjectiveScalar::Finite(a) => Vector2::new(1.0, a),
            ProjectiveScalar::Infinity => Vector2::new(0.0, 1.0),
        });
        LinePencil2D::new(dirs)
    }

    pub fn directions(&self) -> &[Vector2<f64>; 4] {
        &self.directions
    }
}

pub(crate) fn lines_parallel(a: &Vector2<f64>, b: &Vector2<f64>) -> bool {
    let cross = a.x * b.y - a.y * b.x;
    (cross / (a.norm() * b.norm())).abs() < LINE_TOL
}

/// Cross ratio of four concurrent lines in the plane.
///
/// Rotates the pencil so no line is vertical, reads off the slopes `a_i` of
/// `y = a_i x` and evaluates the scalar cross ratio. An equivalent direct
/// evaluation in homogeneous coordinates handles vertical lines without
/// rotation; see [`line_cross_ratio_homogeneous`], used to cross-check.
pub fn line_cross_ratio(pencil: &LinePencil2D) -> Result<f64> {
    let angles: Vec<f64> = pencil
        .directions
        .iter()
        .map(|d| d.y.atan2(d.x))
        .collect();
    // Five candidate rotations; at most four can put some line near vertical.
    let candidates = [
        0.0,
        std::f64::consts::PI / 7.0,
        2.0 * std::f64::consts::PI / 7.0,
        3.0 * std::f64::consts::PI / 7.0,
        4.0 * std::f64::consts::PI / 7.0,
    ];
    let phi = candidates
        .iter()
        .copied()
        .max_by(|&p, &q| {
            let margin = |r: f64| {
                angles
                    .iter()
                    .map(|a| (a + r).cos().abs())
                    .fold(f64::INFINITY, f64::min)
            };
            margin(p).partial_cmp(&margin(q)).unwrap()
        })
        .unwrap();
    let slopes: Vec<f64> = angles.iter().map(|a| (a + phi).tan()).collect();
    let value = cross_ratio(
        slopes[0].into(),
        slopes[1].into(),
        slopes[2].into(),
        slopes[3].into(),
    )?;
    match value {
        ProjectiveScalar::Finite(v) => Ok(v),
        ProjectiveScalar::Infinity => Err(Error::DuplicatePoint(
            "cross ratio is infinite; two lines coincide".into(),
        )),
    }
}

/// Direct homogeneous evaluation of the line cross ratio via 2D wedge
/// products: R = (d1^d4)(d3^d2) / ((d1^d2)(d3^d4)).
pub fn line_cross_ratio_homogeneous(pencil: &LinePencil2D) -> Result<f64> {
    let d = &pencil.directions;
    let wedge = |a: &Vector2<f64>, b: &Vector2<f64>| a.x * b.y - a.y * b.x;
    let num = wedge(&d[0], &d[3]) * wedge(&d[2], &d[1]);
    let den = wedge(&d[0], &d[1]) * wedge(&d[2], &d[3]);
    if den == 0.0 {
        return Err(Error::DuplicatePoint("two lines coincide".into()));
    }
    Ok(num / den)
}

/// Four ordered hyperplanes in n-space sharing a common codimension-2 axis.
#[derive(Debug, Clone)]
pub struct HyperplanePencil {
    ambient_dim: usize,
    axis: Vec<DVector<f64>>,
    normals: [DVector<f64>; 4],
}

impl HyperplanePencil {
    /// `axis` is an orthonormal basis of the codimension-2 subspace (n-2
    /// vectors, empty when n = 2); `normals` are unit normals of the four
    /// hyperplanes, each containing the axis.
    pub fn new(
        ambient_dim: usize,
        axis: Vec<DVector<f64>>,
        normals: [DVector<f64>; 4],
    ) -> Result<Self> {
        let n = ambient_dim;
        if n < 2 {
            return Err(Error::InvalidPencil("ambient dimension must be >= 2".into()));
        }
        if axis.len() != n - 2 {
            return Err(Error::InvalidPencil(format!(
                "axis must have {} basis vectors, got {}",
                n - 2,
                axis.len()
            )));
        }
        for (i, a) in axis.iter().enumerate() {
            if a.len() != n {
                return Err(Error::InvalidPencil(format!("axis vector {i} has wrong length")));
            }
            if (a.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidPencil(format!("axis vector {i} is not unit")));
            }
            for (j, b) in axis.iter().enumerate().skip(i + 1) {
                if a.dot(b).abs() > 1e-9 {
                    return Err(Error::InvalidPencil(format!(
                        "axis vectors {i} and {j} are not orthogonal"
                    )));
                }
            }
        }
        let mut unit_normals = Vec::with_capacity(4);
        for (i, m) in normals.iter().enumerate() {
            if m.len() != n {
                return Err(Error::InvalidPencil(format!("normal {i} has wrong length")));
            }
            let norm = m.norm();
            if norm < 1e-12 {
                return Err(Error::InvalidPencil(format!("normal {i} is zero")));
            }
            let u = m / norm;
            for (j, a) in axis.iter().enumerate() {
                if u.dot(a).abs() > 1e-9 {
                    return Err(Error::InvalidPencil(format!(
                        "hyperplane {i} does not contain axis vector {j}"
                    )));
                }
            }
            unit_normals.push(u);
        }
        let normals: [DVector<f64>; 4] = unit_normals.try_into().unwrap();
        let pencil = HyperplanePencil {
            ambient_dim: n,
            axis,
            normals,
        };
        // Distinctness: traces in the axis-orthogonal plane must be pairwise
        // non-parallel.
        let plane = pencil.orthogonal_plane();
        let dirs = pencil.trace_directions(&plane)?;
        for i in 0..4 {
            for j in (i + 1)..4 {
                if lines_parallel(&dirs[i], &dirs[j]) {
                    return Err(Error::DuplicatePoint(format!(
                        "hyperplanes {} and {} coincide",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(pencil)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn axis(&self) -> &[DVector<f64>] {
        &self.axis
    }

    pub fn normals(&self) -> &[DVector<f64>; 4] {
        &self.normals
    }

    /// Image of the pencil under an invertible linear map A. Hyperplane
    /// normals transform by the inverse transpose; the axis basis is
    /// re-orthonormalized from the mapped axis vectors.
    pub fn transformed(&self, a: &DMatrix<f64>) -> Result<Self> {
        let n = self.ambient_dim;
        assert_eq!(a.nrows(), n);
        assert_eq!(a.ncols(), n);
        let a_inv = a
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidPencil("linear map is singular".into()))?;
        let a_inv_t = a_inv.transpose();
        let new_normals = self.normals.clone().map(|m| {
            let v = &a_inv_t * m;
            let norm = v.norm();
            v / norm
        });
        // Gram-Schmidt on the mapped axis.
        let mut new_axis: Vec<DVector<f64>> = Vec::with_capacity(n - 2);
        for v in &self.axis {
            let mut w = a * v;
            for b in &new_axis {
                let c = w.dot(b);
                w -= b * c;
            }
            let norm = w.norm();
            if norm < 1e-12 {
                return Err(Error::InvalidPencil("mapped axis is degenerate".into()));
            }
            new_axis.push(w / norm);
        }
        HyperplanePencil::new(n, new_axis, new_normals)
    }

    /// Orthonormal basis of the orthogonal complement of the axis, via SVD of
    /// the projector onto the complement.
    pub fn orthogonal_plane(&self) -> (DVector<f64>, DVector<f64>) {
        let n = self.ambient_dim;
        let mut proj = DMatrix::<f64>::identity(n, n);
        for a in &self.axis {
            proj -= a * a.transpose();
        }
        let svd = proj.svd(true, false);
        let u = svd.u.as_ref().unwrap();
        // Projector has exactly two unit singular values; svd sorts descending.
        (u.column(0).into_owned(), u.column(1).into_owned())
    }

    /// Trace lines of the four hyperplanes in the plane spanned by the given
    /// basis, expressed in plane coordinates.
    fn trace_directions(&self, plane: &(DVector<f64>, DVector<f64>)) -> Result<[Vector2<f64>; 4]> {
        let (p1, p2) = plane;
        let mut dirs = [Vector2::zeros(); 4];
        for (i, m) in self.normals.iter().enumerate() {
            let d = Vector2::new(-m.dot(p2), m.dot(p1));
            if d.norm() < 1e-12 {
                return Err(Error::InvalidPencil(format!(
                    "hyperplane {i} contains the reduction plane"
                )));
            }
            dirs[i] = d;
        }
        Ok(dirs)
    }
}

/// Cross ratio of a hyperplane pencil, computed by intersecting the
/// hyperplanes with a plane transverse to the axis (default: the orthogonal
/// complement of the axis). The value is independent of the plane choice.
pub fn hyperplane_cross_ratio(
    pencil: &HyperplanePencil,
    transverse_plane: Option<(&DVector<f64>, &DVector<f64>)>,
) -> Result<f64> {
    let plane = match transverse_plane {
        None => pencil.orthogonal_plane(),
        Some((q1, q2)) => {
            let n = pencil.ambient_dim;
            if q1.len() != n || q2.len() != n {
                return Err(Error::NotTransverse);
            }
            // axis basis + plane vectors must span n-space
            let mut cols: Vec<DVector<f64>> = pencil.axis.clone();
            cols.push(q1.clone());
            cols.push(q2.clone());
            let mat = DMatrix::from_columns(&cols);
            let svd = mat.svd(false, false);
            let min_sv = svd
                .singular_values
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            if svd.singular_values.len() < n || min_sv <= 1e-9 {
                return Err(Error::NotTransverse);
            }
            (q1.clone(), q2.clone())
        }
    };
    let dirs = pencil.trace_directions(&plane)?;
    let line_pencil = LinePencil2D::new(dirs)?;
    line_cross_ratio(&line_pencil)
}
