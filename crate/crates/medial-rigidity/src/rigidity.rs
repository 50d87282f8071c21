//! Rigidity obstructions at branch points: the four-sheet cross-ratio
//! invariant, the generic three-sheet triple cross-ratio map built from the
//! radial vectors, obstruction comparison between configurations, linear
//! distortion at degenerate branch points, and rank certification of the
//! local uniqueness of angles.

use crate::branch::{AngleTriple, BranchConfig2D};
use crate::error::{Error, Result};
use crate::projective::{
    cross_ratio, hyperplane_cross_ratio, orbit, orbit_distance, CrossRatioOrbit,
    HyperplanePencil, ProjectiveScalar,
};
use nalgebra::{Matrix2, Matrix3x2, Vector2};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::f64::consts::{PI, TAU};

/// The cross-ratio orbit of four limiting tangent hyperplanes meeting along a
/// codimension-2 branching stratum.
#[derive(Debug, Clone)]
pub struct FourSheetInvariant {
    pub orbit: CrossRatioOrbit,
}

/// Orbit of the hyperplane cross ratio of the four sheet tangents; invariant
/// under any invertible linear map of the ambient space.
pub fn chi_four_sheet(pencil: &HyperplanePencil) -> Result<FourSheetInvariant> {
    let value = hyperplane_cross_ratio(pencil, None)?;
    Ok(FourSheetInvariant {
        orbit: orbit(value)?,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct FourSheetComparison {
    pub obstructed: bool,
    pub distance: f64,
}

/// Compares the four-sheet invariants of two pencils. Distinct orbits certify
/// that no diffeomorphism mapping sheets to sheets can exist.
pub fn compare_four_sheet(
    pencil_a: &HyperplanePencil,
    pencil_b: &HyperplanePencil,
    tol: f64,
) -> Result<FourSheetComparison> {
    let a = chi_four_sheet(pencil_a)?;
    let b = chi_four_sheet(pencil_b)?;
    let distance = orbit_distance(&a.orbit, &b.orbit);
    Ok(FourSheetComparison {
        obstructed: distance >= tol,
        distance,
    })
}

fn safe_tan(theta: f64) -> ProjectiveScalar {
    if theta.cos().abs() < 1e-12 {
        ProjectiveScalar::Infinity
    } else {
        ProjectiveScalar::Finite(theta.tan())
    }
}

fn neg(s: ProjectiveScalar) -> ProjectiveScalar {
    match s {
        ProjectiveScalar::Finite(v) => ProjectiveScalar::Finite(-v),
        ProjectiveScalar::Infinity => ProjectiveScalar::Infinity,
    }
}

/// Slope 4-tuple of the radial pencil for sector index j in 1..=3: the three
/// sheet tangent lines and the line spanned by radial vector U_j, with line
/// L_j rotated onto the x-axis. A tangent of a right angle yields the
/// infinity scalar.
pub fn radial_pencil_slopes(theta: &AngleTriple, j: usize) -> Result<[ProjectiveScalar; 4]> {
    assert!((1..=3).contains(&j), "sector index must be 1, 2 or 3");
    let t = theta.angles();
    let b = [safe_tan(t[0]), safe_tan(t[1]), safe_tan(t[2])];
    let tuple = match j {
        1 => [ProjectiveScalar::Finite(0.0), neg(b[0]), b[2], b[1]],
        2 => [ProjectiveScalar::Finite(0.0), neg(b[1]), b[0], b[2]],
        3 => [ProjectiveScalar::Finite(0.0), neg(b[2]), b[1], b[0]],
        _ => unreachable!(),
    };
    for i in 0..4 {
        for k in (i + 1)..4 {
            let coincide = match (tuple[i], tuple[k]) {
                (ProjectiveScalar::Finite(x), ProjectiveScalar::Finite(y)) => {
                    (x - y).abs() < 1e-10
                }
                (ProjectiveScalar::Infinity, ProjectiveScalar::Infinity) => true,
                _ => false,
            };
            if coincide {
                return Err(Error::DegenerateTriple(format!(
                    "slope entries {i} and {k} of sector {j} coincide"
                )));
            }
        }
    }
    Ok(tuple)
}

/// The ordered triple of radial-pencil cross ratios together with their
/// six-value orbits.
#[derive(Debug, Clone)]
pub struct TripleCrossRatio {
    pub lambdas: [f64; 3],
    pub orbits: [CrossRatioOrbit; 3],
}

/// Triple cross-ratio map of an allowable angle triple.
///
/// The first component is the cross ratio of the sector-2 tuple, then
/// sector 3, then sector 1 (this fixed order differs from the tuple
/// listing order; it is the convention the tests pin down).
pub fn triple_cross_ratio(theta: &AngleTriple) -> Result<TripleCrossRatio> {
    let sector_order = [2usize, 3, 1];
    let mut lambdas = [0.0; 3];
    let mut orbits: Vec<CrossRatioOrbit> = Vec::with_capacity(3);
    for (out, &j) in sector_order.iter().enumerate() {
        let tuple = radial_pencil_slopes(theta, j)?;
        let value = cross_ratio(tuple[0], tuple[1], tuple[2], tuple[3])?;
        let lambda = value.as_finite().ok_or_else(|| {
            Error::DegenerateTriple(format!("sector {j} cross ratio is infinite"))
        })?;
        lambdas[out] = lambda;
        orbits.push(orbit(lambda)?);
    }
    let orbits: [CrossRatioOrbit; 3] = orbits.try_into().unwrap();
    Ok(TripleCrossRatio { lambdas, orbits })
}

#[derive(Debug, Clone)]
pub struct YBranchComparison {
    pub matched: bool,
    /// Max orbit distance over the three sectors, minimized over relabelings.
    pub obstruction: f64,
    /// Cyclic shift (and reflection flag) achieving the minimum.
    pub best_shift: usize,
    pub best_reflected: bool,
}

/// Tests whether two Y-branch configurations can correspond under a
/// diffeomorphism preserving sheets and radial lines: some relabeling of the
/// sheets must match all three cross-ratio orbits. Cyclic relabelings only by
/// default; `include_reflections` extends the search to reversed orderings.
pub fn compare_y_branch(
    theta_a: &AngleTriple,
    theta_b: &AngleTriple,
    tol: f64,
    include_reflections: bool,
) -> Result<YBranchComparison> {
    let triple_a = triple_cross_ratio(theta_a)?;
    let mut best = (f64::INFINITY, 0usize, false);
    for reflected in [false, true] {
        if reflected && !include_reflections {
            break;
        }
        let base = if reflected {
            theta_b.reversed()
        } else {
            *theta_b
        };
        for shift in 0..3 {
            let triple_b = triple_cross_ratio(&base.rotated(shift))?;
            let worst = (0..3)
                .map(|j| orbit_distance(&triple_a.orbits[j], &triple_b.orbits[j]))
                .fold(0.0_f64, f64::max);
            if worst < best.0 {
                best = (worst, shift, reflected);
            }
        }
    }
    Ok(YBranchComparison {
        matched: best.0 <= tol,
        obstruction: best.0,
        best_shift: best.1,
        best_reflected: best.2,
    })
}

/// Result of pushing one branch configuration onto another through the linear
/// map determined by two pinned tangent directions.
#[derive(Debug, Clone)]
pub struct DistortionReport {
    /// Pinned curves plus non-pinned curves whose image aligns with its
    /// target direction to within 1e-9.
    pub matched_curves: usize,
    /// Indices of the non-pinned curves, in configuration order.
    pub curve_indices: Vec<usize>,
    /// Images of the non-pinned source tangent directions.
    pub image_tangents: Vec<Vector2<f64>>,
    /// Angle between each image direction and its target direction, in [0, pi].
    pub angle_errors: Vec<f64>,
}

/// Angle in [0, pi] between two nonzero plane vectors.
pub fn vector_angle(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let cross = a.x * b.y - a.y * b.x;
    let dot = a.dot(b);
    cross.abs().atan2(dot)
}

/// Constructs the linear map sending the two pinned source tangent directions
/// to the corresponding target directions (unit scales), applies it to the
/// remaining source tangents and reports how far each image direction turns
/// away from its intended target direction.
pub fn linear_distortion_analysis(
    source: &BranchConfig2D,
    target: &BranchConfig2D,
    pinned: [usize; 2],
) -> Result<DistortionReport> {
    let k = source.sheet_count();
    if target.sheet_count() != k {
        return Err(Error::BasisMismatch(format!(
            "sheet counts differ: {k} vs {}",
            target.sheet_count()
        )));
    }
    let s = [source.tangent_dirs()[pinned[0]], source.tangent_dirs()[pinned[1]]];
    let t = [target.tangent_dirs()[pinned[0]], target.tangent_dirs()[pinned[1]]];
    let s_mat = Matrix2::from_columns(&s);
    let t_mat = Matrix2::from_columns(&t);
    if s_mat.determinant().abs() < 1e-12 || t_mat.determinant().abs() < 1e-12 {
        return Err(Error::PinnedDegenerate);
    }
    let map = t_mat * s_mat.try_inverse().ok_or(Error::PinnedDegenerate)?;
    let mut curve_indices = Vec::new();
    let mut image_tangents = Vec::new();
    let mut angle_errors = Vec::new();
    for i in 0..k {
        if pinned.contains(&i) {
            continue;
        }
        let image = map * source.tangent_dirs()[i];
        let err = vector_angle(&image, &target.tangent_dirs()[i]);
        curve_indices.push(i);
        image_tangents.push(image);
        angle_errors.push(err);
    }
    let matched_curves = 2 + angle_errors.iter().filter(|&&e| e < 1e-9).count();
    Ok(DistortionReport {
        matched_curves,
        curve_indices,
        image_tangents,
        angle_errors,
    })
}

/// The projective transformation of the plane's line pencil determined by
/// three source/target line pairs: returns a 2x2 matrix M with
/// M s_i parallel to t_i for i = 0, 1, 2 (unique up to overall scale).
pub fn projective_line_map(
    source: [Vector2<f64>; 3],
    target: [Vector2<f64>; 3],
) -> Result<Matrix2<f64>> {
    // Write s3 = a s1 + b s2 and t3 = c t1 + d t2; then M = [t1 t2] *
    // diag(c/a, d/b) * [s1 s2]^{-1} sends s3 onto t3.
    let s_mat = Matrix2::from_columns(&[source[0], source[1]]);
    let t_mat = Matrix2::from_columns(&[target[0], target[1]]);
    let s_inv = s_mat.try_inverse().ok_or(Error::PinnedDegenerate)?;
    let ab = s_inv * source[2];
    let cd = t_mat.try_inverse().ok_or(Error::PinnedDegenerate)? * target[2];
    if ab.x.abs() < 1e-12 || ab.y.abs() < 1e-12 {
        return Err(Error::PinnedDegenerate);
    }
    let scales = Matrix2::new(cd.x / ab.x, 0.0, 0.0, cd.y / ab.y);
    Ok(t_mat * scales * s_inv)
}

/// Rank certificate for the triple cross-ratio map at an allowable triple.
#[derive(Debug, Clone)]
pub struct RankCertificate {
    pub theta: AngleTriple,
    /// Jacobian of (theta_1, theta_2) -> (ln|lambda_1|, ln|lambda_2|, ln|lambda_3|)
    /// restricted to the allowable surface theta_3 = 2*pi - theta_1 - theta_2.
    pub jacobian: Matrix3x2<f64>,
    /// Singular values, descending.
    pub singular_values: [f64; 2],
    pub rank2: bool,
}

fn on_excluded_locus(theta: &AngleTriple, tol: f64) -> bool {
    let t = theta.angles();
    t.iter().any(|&x| (x - PI / 2.0).abs() < tol)
        || (t[0] - t[1]).abs() < tol
        || (t[1] - t[2]).abs() < tol
        || (t[0] - t[2]).abs() < tol
}

fn log_triple(theta1: f64, theta2: f64) -> Result<[f64; 3]> {
    let theta = AngleTriple::with_tolerance([theta1, theta2, TAU - theta1 - theta2], 1e-6)?;
    let triple = triple_cross_ratio(&theta)?;
    Ok(triple.lambdas.map(|l| l.abs().ln()))
}

/// Central-difference Jacobian of the log-triple map on the allowable
/// surface, with a rank-2 test separating finite-difference noise from
/// genuine rank deficiency.
pub fn triple_map_jacobian(theta: &AngleTriple, step: f64) -> Result<RankCertificate> {
    if on_excluded_locus(theta, 1e-9) {
        return Err(Error::ExcludedLocus);
    }
    let t = theta.angles();
    let mut jac = Matrix3x2::<f64>::zeros();
    for col in 0..2 {
        let mut plus = [t[0], t[1]];
        let mut minus = [t[0], t[1]];
        plus[col] += step;
        minus[col] -= step;
        let fp = log_triple(plus[0], plus[1])?;
        let fm = log_triple(minus[0], minus[1])?;
        for row in 0..3 {
            jac[(row, col)] = (fp[row] - fm[row]) / (2.0 * step);
        }
    }
    let svd = jac.svd(false, false);
    let s1 = svd.singular_values[0].max(svd.singular_values[1]);
    let s2 = svd.singular_values[0].min(svd.singular_values[1]);
    Ok(RankCertificate {
        theta: *theta,
        jacobian: jac,
        singular_values: [s1, s2],
        rank2: s2 > 1e-6 * s1 && s2 > 1e-8,
    })
}

/// Default finite-difference step for [`triple_map_jacobian`].
pub const DEFAULT_JACOBIAN_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy)]
pub struct UniquenessProbe {
    pub injective: bool,
    /// Minimum ratio of value-space distance to parameter distance over the
    /// sampled neighbors; +infinity when no samples were drawn.
    pub min_separation: f64,
    pub samples: usize,
}

/// Samples allowable triples within `radius` of `theta` (Euclidean distance
/// inside the sum-constraint plane) and checks that none maps to the same
/// lambda triple. Sampling is deterministic in `seed`.
pub fn local_uniqueness_probe(
    theta: &AngleTriple,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<UniquenessProbe> {
    let base = triple_cross_ratio(theta)?.lambdas;
    let t = theta.angles();
    // Orthonormal basis of the plane of zero-sum perturbations.
    let v1 = [1.0 / 2.0_f64.sqrt(), -1.0 / 2.0_f64.sqrt(), 0.0];
    let v2 = [
        1.0 / 6.0_f64.sqrt(),
        1.0 / 6.0_f64.sqrt(),
        -2.0 / 6.0_f64.sqrt(),
    ];
    let mut rng = StdRng::seed_from_u64(seed);
    let mut injective = true;
    let mut min_separation = f64::INFINITY;
    let mut drawn = 0usize;
    let mut attempts = 0usize;
    while drawn < samples && attempts < samples * 50 {
        attempts += 1;
        let (a, b) = loop {
            let a: f64 = rng.random_range(-radius..radius);
            let b: f64 = rng.random_range(-radius..radius);
            let d = (a * a + b * b).sqrt();
            if d > 1e-12 && d <= radius {
                break (a, b);
            }
        };
        let candidate = [
            t[0] + a * v1[0] + b * v2[0],
            t[1] + a * v1[1] + b * v2[1],
            t[2] + a * v1[2] + b * v2[2],
        ];
        let Ok(neighbor) = AngleTriple::with_tolerance(candidate, 1e-9) else {
            continue;
        };
        let Ok(triple) = triple_cross_ratio(&neighbor) else {
            continue;
        };
        drawn += 1;
        let value_dist = (0..3)
            .map(|i| (triple.lambdas[i] - base[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        let param_dist = (a * a + b * b).sqrt();
        if value_dist < 1e-10 {
            injective = false;
        }
        min_separation = min_separation.min(value_dist / param_dist);
    }
    Ok(UniquenessProbe {
        injective,
        min_separation,
        samples: drawn,
    })
}

#[derive(Debug, Clone)]
pub struct CollisionScan {
    pub pairs: usize,
    /// Smallest lambda-triple distance observed between well-separated
    /// parameter pairs. Experimental output for the global uniqueness
    /// conjecture; nothing is asserted about it.
    pub min_lambda_distance: f64,
    pub closest_pair: ([f64; 3], [f64; 3]),
}

/// Random search for distant allowable triples with near-equal ordered lambda
/// triples.
pub fn collision_scan(pairs: usize, min_param_distance: f64, seed: u64) -> CollisionScan {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut sample = || loop {
        let t1 = rng.random_range(0.05..PI - 0.05);
        let t2 = rng.random_range(0.05..PI - 0.05);
        let t3 = TAU - t1 - t2;
        if t3 <= 0.05 || t3 >= PI - 0.05 {
            continue;
        }
        let Ok(theta) = AngleTriple::new([t1, t2, t3]) else {
            continue;
        };
        if let Ok(triple) = triple_cross_ratio(&theta) {
            return (theta, triple.lambdas);
        }
    };
    let mut best = (f64::INFINITY, ([0.0; 3], [0.0; 3]));
    let mut count = 0usize;
    while count < pairs {
        let (ta, la) = sample();
        let (tb, lb) = sample();
        let param_dist = ta
            .angles()
            .iter()
            .zip(tb.angles().iter())
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        if param_dist < min_param_distance {
            continue;
        }
        count += 1;
        let value_dist = la
            .iter()
            .zip(lb.iter())
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        if value_dist < best.0 {
            best = (value_dist, (ta.angles(), tb.angles()));
        }
    }
    CollisionScan {
        pairs,
        min_lambda_distance: best.0,
        closest_pair: best.1,
    }
}
