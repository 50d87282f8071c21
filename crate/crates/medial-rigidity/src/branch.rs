//! Angle relations among tangent lines and radial vectors at Y-branch
//! (3-sheet) and X-branch (4-sheet) points, and the reduction of
//! n-dimensional branching strata to a 2D transverse-plane configuration.

use crate::error::{Error, Result};
use crate::util::{ccw_gap, orthogonal_complement_plane};
use nalgebra::{DVector, Vector2};
use std::f64::consts::{PI, TAU};

/// Default tolerance on the angle-sum constraint.
pub const SUM_TOL: f64 = 1e-12;

fn check_angles(theta: &[f64], sum_tol: f64) -> Result<()> {
    for (i, &t) in theta.iter().enumerate() {
        if !(t > 0.0 && t < PI) {
            return Err(Error::OutOfRange { index: i, value: t });
        }
    }
    let sum: f64 = theta.iter().sum();
    if (sum - TAU).abs() > sum_tol {
        return Err(Error::NotAllowable { sum });
    }
    Ok(())
}

/// Allowable angle triple: three angles in (0, pi) summing to 2*pi.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleTriple {
    theta: [f64; 3],
}

impl AngleTriple {
    pub fn new(theta: [f64; 3]) -> Result<Self> {
        Self::with_tolerance(theta, SUM_TOL)
    }

    /// Relaxed sum tolerance, for angles ingested from low-precision sources.
    pub fn with_tolerance(theta: [f64; 3], sum_tol: f64) -> Result<Self> {
        check_angles(&theta, sum_tol)?;
        Ok(AngleTriple { theta })
    }

    pub fn angles(&self) -> [f64; 3] {
        self.theta
    }

    /// Cyclic rotation by `shift` positions.
    pub fn rotated(&self, shift: usize) -> AngleTriple {
        let t = self.theta;
        AngleTriple {
            theta: [t[shift % 3], t[(shift + 1) % 3], t[(shift + 2) % 3]],
        }
    }

    /// Reversed sheet order.
    pub fn reversed(&self) -> AngleTriple {
        let t = self.theta;
        AngleTriple {
            theta: [t[2], t[1], t[0]],
        }
    }
}

/// Four angles in (0, pi) summing to 2*pi.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleQuad {
    theta: [f64; 4],
}

impl AngleQuad {
    pub fn new(theta: [f64; 4]) -> Result<Self> {
        Self::with_tolerance(theta, SUM_TOL)
    }

    pub fn with_tolerance(theta: [f64; 4], sum_tol: f64) -> Result<Self> {
        check_angles(&theta, sum_tol)?;
        Ok(AngleQuad { theta })
    }

    pub fn angles(&self) -> [f64; 4] {
        self.theta
    }
}

/// Radial angles at a generic Y-branch point: alpha_i = pi - theta_i.
///
/// The returned alphas solve the linear system theta_1 = alpha_2 + alpha_3,
/// theta_2 = alpha_3 + alpha_1, theta_3 = alpha_1 + alpha_2.
pub fn solve_y_branch_angles(theta: &AngleTriple) -> [f64; 3] {
    theta.angles().map(|t| PI - t)
}

#[derive(Debug, Clone, Copy)]
pub struct XBranchCheck {
    pub compatible: bool,
    pub residual: f64,
}

/// Necessary condition for a four-sheet Blum configuration:
/// theta_1 + theta_3 = theta_2 + theta_4.
pub fn check_x_branch_compatibility(theta: &AngleQuad) -> XBranchCheck {
    let t = theta.angles();
    let residual = (t[0] + t[2] - t[1] - t[3]).abs();
    XBranchCheck {
        compatible: residual < 1e-9,
        residual,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BetaFamily {
    pub beta: [f64; 4],
    /// All beta_i strictly inside their sector bounds (0, theta_i).
    pub admissible: bool,
}

/// The one-parameter family of radial angles at a compatible X-branch:
/// beta = (theta_4, theta_1 - theta_4, theta_3, 0) + t(-1, 1, -1, 1).
pub fn x_branch_beta_family(theta: &AngleQuad, t: f64) -> Result<BetaFamily> {
    let check = check_x_branch_compatibility(theta);
    if !check.compatible {
        return Err(Error::Incompatible {
            residual: check.residual,
        });
    }
    let th = theta.angles();
    let beta = [th[3] - t, th[0] - th[3] + t, th[2] - t, t];
    let admissible = beta
        .iter()
        .zip(th.iter())
        .all(|(&b, &bound)| b > 0.0 && b < bound);
    Ok(BetaFamily { beta, admissible })
}

/// A planar branch-point configuration: k ordered tangent ray directions
/// (counterclockwise), the successive gap angles, and optionally one radial
/// unit vector per sector (radial i lies between rays i and i+1).
#[derive(Debug, Clone)]
pub struct BranchConfig2D {
    tangent_dirs: Vec<Vector2<f64>>,
    radial_dirs: Vec<Vector2<f64>>,
    angles: Vec<f64>,
}

impl BranchConfig2D {
    /// Builds a configuration from raw directions. Tangent rays are
    /// canonicalized counterclockwise (the cyclic order starts at the input
    /// ray closest to the original first entry); radial vectors, when given,
    /// are matched to their sectors.
    pub fn new(tangent_dirs: Vec<Vector2<f64>>, radial_dirs: Vec<Vector2<f64>>) -> Result<Self> {
        let k = tangent_dirs.len();
        if !(3..=4).contains(&k) {
            return Err(Error::DegenerateSheet(format!(
                "expected 3 or 4 tangent directions, got {k}"
            )));
        }
        if !radial_dirs.is_empty() && radial_dirs.len() != k {
            return Err(Error::BasisMismatch(format!(
                "{} radial vectors for {} tangent rays",
                radial_dirs.len(),
                k
            )));
        }
        let mut rays: Vec<Vector2<f64>> = Vec::with_capacity(k);
        for (i, d) in tangent_dirs.iter().enumerate() {
            let norm = d.norm();
            if norm < 1e-12 {
                return Err(Error::DegenerateSheet(format!("tangent direction {i} is zero")));
            }
            rays.push(d / norm);
        }
        let first_angle = rays[0].y.atan2(rays[0].x);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| {
            let ka = ccw_gap(first_angle, rays[a].y.atan2(rays[a].x));
            let kb = ccw_gap(first_angle, rays[b].y.atan2(rays[b].x));
            ka.partial_cmp(&kb).unwrap()
        });
        let rays: Vec<Vector2<f64>> = order.iter().map(|&i| rays[i]).collect();
        let ray_angles: Vec<f64> = rays.iter().map(|d| d.y.atan2(d.x)).collect();
        let mut angles = Vec::with_capacity(k);
        for i in 0..k {
            let gap = ccw_gap(ray_angles[i], ray_angles[(i + 1) % k]);
            if gap < 1e-9 {
                return Err(Error::DegenerateSheet(format!(
                    "tangent rays {i} and {} coincide",
                    (i + 1) % k
                )));
            }
            angles.push(gap);
        }
        let mut sector_radials = vec![None; k];
        for (j, r) in radial_dirs.iter().enumerate() {
            let norm = r.norm();
            if norm < 1e-12 {
                return Err(Error::DegenerateSheet(format!("radial vector {j} is zero")));
            }
            let u = r / norm;
            let a = u.y.atan2(u.x);
            let mut placed = false;
            for i in 0..k {
                let off = ccw_gap(ray_angles[i], a);
                if off > 1e-9 && off < angles[i] - 1e-9 {
                    if sector_radials[i].is_some() {
                        return Err(Error::DegenerateSheet(format!(
                            "two radial vectors fall in sector {i}"
                        )));
                    }
                    sector_radials[i] = Some(u);
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(Error::DegenerateSheet(format!(
                    "radial vector {j} does not lie strictly inside any sector"
                )));
            }
        }
        let radial_dirs = if radial_dirs.is_empty() {
            Vec::new()
        } else {
            sector_radials.into_iter().map(|r| r.unwrap()).collect()
        };
        Ok(BranchConfig2D {
            tangent_dirs: rays,
            radial_dirs,
            angles,
        })
    }

    /// Exact Y-branch configuration realizing the Blum equal-angle property
    /// for the given allowable triple, with ray 1 on the positive x-axis.
    pub fn from_y_angles(theta: &AngleTriple) -> Self {
        let t = theta.angles();
        let ray_angles = [0.0, t[0], t[0] + t[1]];
        // Equal-angle offset within sector i is pi - theta_{i+1}.
        let tangent_dirs: Vec<Vector2<f64>> =
            ray_angles.iter().map(|&a| Vector2::new(a.cos(), a.sin())).collect();
        let radial_dirs: Vec<Vector2<f64>> = (0..3)
            .map(|i| {
                let a = ray_angles[i] + (PI - t[(i + 1) % 3]);
                Vector2::new(a.cos(), a.sin())
            })
            .collect();
        BranchConfig2D::new(tangent_dirs, radial_dirs).expect("allowable triple yields valid config")
    }

    /// X-branch configuration from a compatible quad and family parameter t.
    /// Requires an admissible t (all radial vectors interior to their sectors).
    pub fn from_x_angles(theta: &AngleQuad, t: f64) -> Result<Self> {
        let family = x_branch_beta_family(theta, t)?;
        if !family.admissible {
            return Err(Error::DegenerateSheet(format!(
                "family parameter t = {t} puts a radial vector outside its sector"
            )));
        }
        let th = theta.angles();
        let ray_angles = [0.0, th[0], th[0] + th[1], th[0] + th[1] + th[2]];
        let tangent_dirs: Vec<Vector2<f64>> =
            ray_angles.iter().map(|&a| Vector2::new(a.cos(), a.sin())).collect();
        // beta_i is the angle from ray i to the radial vector on its ccw side.
        let radial_dirs: Vec<Vector2<f64>> = (0..4)
            .map(|i| {
                let a = ray_angles[i] + family.beta[i];
                Vector2::new(a.cos(), a.sin())
            })
            .collect();
        BranchConfig2D::new(tangent_dirs, radial_dirs)
    }

    pub fn sheet_count(&self) -> usize {
        self.tangent_dirs.len()
    }

    pub fn tangent_dirs(&self) -> &[Vector2<f64>] {
        &self.tangent_dirs
    }

    pub fn radial_dirs(&self) -> &[Vector2<f64>] {
        &self.radial_dirs
    }

    /// Successive counterclockwise gaps between consecutive tangent rays.
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// The gap angles as an allowable triple (3-sheet configurations only).
    pub fn angle_triple(&self) -> Result<AngleTriple> {
        if self.angles.len() != 3 {
            return Err(Error::BasisMismatch(format!(
                "{}-sheet configuration has no angle triple",
                self.angles.len()
            )));
        }
        AngleTriple::with_tolerance([self.angles[0], self.angles[1], self.angles[2]], 1e-9)
    }

    pub fn angle_quad(&self) -> Result<AngleQuad> {
        if self.angles.len() != 4 {
            return Err(Error::BasisMismatch(format!(
                "{}-sheet configuration has no angle quad",
                self.angles.len()
            )));
        }
        AngleQuad::with_tolerance([self.angles[0], self.angles[1], self.angles[2], self.angles[3]], 1e-9)
    }

    /// Rotates one radial vector in place (test and perturbation support).
    pub fn perturb_radial(&mut self, sector: usize, delta: f64) {
        let r = self.radial_dirs[sector];
        let a = r.y.atan2(r.x) + delta;
        self.radial_dirs[sector] = Vector2::new(a.cos(), a.sin());
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BlumCheck {
    pub ok: bool,
    pub max_violation: f64,
}

/// Worst violation of the Blum equal-angle property: at each tangent ray the
/// angles to the radial vectors on each side must agree.
pub fn validate_blum_config(config: &BranchConfig2D, tol: f64) -> Result<BlumCheck> {
    let k = config.sheet_count();
    if config.radial_dirs.len() != k {
        return Err(Error::BasisMismatch(
            "configuration has no radial vectors to validate".into(),
        ));
    }
    let ray_angles: Vec<f64> = config
        .tangent_dirs
        .iter()
        .map(|d| d.y.atan2(d.x))
        .collect();
    let radial_angles: Vec<f64> = config
        .radial_dirs
        .iter()
        .map(|d| d.y.atan2(d.x))
        .collect();
    let mut max_violation = 0.0_f64;
    for i in 0..k {
        let prev = (i + k - 1) % k;
        let before = ccw_gap(radial_angles[prev], ray_angles[i]);
        let after = ccw_gap(ray_angles[i], radial_angles[i]);
        max_violation = max_violation.max((before - after).abs());
    }
    Ok(BlumCheck {
        ok: max_violation < tol,
        max_violation,
    })
}

/// Tangent and radial data at a point of a codimension-2 branching stratum in
/// n-space: an orthonormal basis of the stratum tangent, the limiting sheet
/// tangent hyperplanes (unit normals, each containing the stratum tangent),
/// and the radial vectors.
#[derive(Debug, Clone)]
pub struct StratumPointData {
    ambient_dim: usize,
    stratum_tangent: Vec<DVector<f64>>,
    sheet_normals: Vec<DVector<f64>>,
    radial_vectors: Vec<DVector<f64>>,
}

impl StratumPointData {
    pub fn new(
        ambient_dim: usize,
        stratum_tangent: Vec<DVector<f64>>,
        sheet_normals: Vec<DVector<f64>>,
        radial_vectors: Vec<DVector<f64>>,
    ) -> Result<Self> {
        let n = ambient_dim;
        if stratum_tangent.len() != n - 2 {
            return Err(Error::DegenerateSheet(format!(
                "stratum tangent must have {} basis vectors",
                n - 2
            )));
        }
        for (i, a) in stratum_tangent.iter().enumerate() {
            if (a.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::DegenerateSheet(format!(
                    "stratum basis vector {i} is not unit"
                )));
            }
            for (j, b) in stratum_tangent.iter().enumerate().skip(i + 1) {
                if a.dot(b).abs() > 1e-9 {
                    return Err(Error::DegenerateSheet(format!(
                        "stratum basis vectors {i} and {j} are not orthogonal"
                    )));
                }
            }
        }
        let k = sheet_normals.len();
        if !(3..=4).contains(&k) {
            return Err(Error::DegenerateSheet(format!("expected 3 or 4 sheets, got {k}")));
        }
        if radial_vectors.len() != k {
            return Err(Error::BasisMismatch(format!(
                "{} radial vectors for {k} sheets",
                radial_vectors.len()
            )));
        }
        for (i, m) in sheet_normals.iter().enumerate() {
            for (j, a) in stratum_tangent.iter().enumerate() {
                if m.dot(a).abs() > 1e-9 * m.norm() {
                    return Err(Error::DegenerateSheet(format!(
                        "sheet {i} tangent does not contain stratum basis vector {j}"
                    )));
                }
            }
        }
        Ok(StratumPointData {
            ambient_dim,
            stratum_tangent,
            sheet_normals,
            radial_vectors,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }
}

/// Reduces an n-dimensional branching configuration to the plane orthogonal
/// to the stratum tangent: sheet tangents project to trace lines, radial
/// vectors to their normalized plane components. The trace-line orientations
/// are fixed by requiring that rays and radial vectors alternate around the
/// circle (each sector between consecutive rays holds exactly one radial).
pub fn reduce_to_transverse_plane(data: &StratumPointData) -> Result<BranchConfig2D> {
    let n = data.ambient_dim;
    let (p1, p2) = orthogonal_complement_plane(n, &data.stratum_tangent);
    let k = data.sheet_normals.len();
    let mut trace_dirs: Vec<Vector2<f64>> = Vec::with_capacity(k);
    for (i, m) in data.sheet_normals.iter().enumerate() {
        let d = Vector2::new(-m.dot(&p2), m.dot(&p1));
        if d.norm() < 1e-9 * m.norm() {
            return Err(Error::DegenerateSheet(format!(
                "sheet {i} projects to a zero trace (sheet tangent equals stratum tangent)"
            )));
        }
        trace_dirs.push(d.normalize());
    }
    let mut radial_dirs: Vec<Vector2<f64>> = Vec::with_capacity(k);
    for (j, u) in data.radial_vectors.iter().enumerate() {
        let d = Vector2::new(u.dot(&p1), u.dot(&p2));
        if d.norm() < 1e-9 {
            return Err(Error::DegenerateSheet(format!(
                "radial vector {j} has no component transverse to the stratum"
            )));
        }
        radial_dirs.push(d.normalize());
    }
    // Each trace line is known only up to sign; pick the orientation choice
    // for which rays and radials strictly alternate, breaking ties by the
    // smallest equal-angle violation.
    let mut best: Option<(f64, BranchConfig2D)> = None;
    for mask in 0..(1u32 << k) {
        let rays: Vec<Vector2<f64>> = trace_dirs
            .iter()
            .enumerate()
            .map(|(i, d)| if mask & (1 << i) != 0 { -d } else { *d })
            .collect();
        let Ok(config) = BranchConfig2D::new(rays, radial_dirs.clone()) else {
            continue;
        };
        let Ok(check) = validate_blum_config(&config, f64::INFINITY) else {
            continue;
        };
        if best
            .as_ref()
            .map(|(v, _)| check.max_violation < *v)
            .unwrap_or(true)
        {
            best = Some((check.max_violation, config));
        }
    }
    best.map(|(_, c)| c).ok_or_else(|| {
        Error::DegenerateSheet("no orientation of sheet traces interleaves with the radial vectors".into())
    })
}
