use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use medial_rigidity::branch::{
    check_x_branch_compatibility, solve_y_branch_angles, x_branch_beta_family, AngleQuad,
    AngleTriple, BranchConfig2D,
};
use medial_rigidity::extract::{extract_medial_2d, BoundarySample};
use medial_rigidity::graph::{branch_config_from_graph, parse_medial_graph, serialize_medial_graph, VertexKind};
use medial_rigidity::poly::PolyMap;
use medial_rigidity::projective::{
    cross_ratio_with_tol, hyperplane_cross_ratio, line_cross_ratio, orbit, orbit_distance,
    HyperplanePencil, LinePencil2D, ProjectiveScalar,
};
use medial_rigidity::rigidity::{
    compare_y_branch, linear_distortion_analysis, local_uniqueness_probe, triple_cross_ratio,
    triple_map_jacobian,
};
use medial_rigidity::shape_op::{check_diffeo_compatibility, scale_sigma, DiffeoPatch, MedialSheetPatch};
use medial_rigidity::svg::{render_config, render_graph};
use nalgebra::{DVector, Vector2};
use std::f64::consts::PI;
use std::fs;
use std::process::ExitCode;

/// Angle-sum tolerance for command-line angle inputs, loose enough for
/// truncated decimal values.
const CLI_SUM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Machine,
}

#[derive(Parser)]
#[command(
    name = "medial",
    about = "Projective rigidity analysis of planar medial axes",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Numeric tolerance for comparisons
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Finite-difference step
    #[arg(long, global = true, default_value_t = 1e-5)]
    step: f64,
    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    format: Format,
    /// Write the report (or SVG/graph) to a file instead of stdout
    #[arg(long, global = true)]
    out: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Cross ratio of four scalars ("inf" allowed), line slopes, or a
    /// hyperplane pencil file
    CrossRatio(CrossRatioArgs),
    /// Six-value orbit of a cross ratio
    Orbit { lambda: f64 },
    /// Boundary tangent angles of a Y-branch from its sheet angles
    YAngles { theta: Vec<f64> },
    /// Compatibility of a four-sheet angle quadruple
    XCheck {
        theta: Vec<f64>,
        /// Evaluate the one-parameter family of boundary angles at this t
        #[arg(long)]
        t: Option<f64>,
    },
    /// Triple cross ratio of a Y-branch angle triple, with orbits
    Triple { theta: Vec<f64> },
    /// Compare two medial graphs at their branch vertices for obstructions
    Compare {
        file_a: String,
        file_b: String,
        /// Also allow orientation-reversing sheet relabelings
        #[arg(long)]
        reflections: bool,
    },
    /// Rank certificate of the triple cross-ratio map
    Rank {
        theta: Vec<f64>,
        /// Scan an N x N grid over the allowable region instead
        #[arg(long)]
        scan: Option<usize>,
        /// Sampling radius for the local uniqueness probe
        #[arg(long, default_value_t = 0.05)]
        probe_radius: f64,
        /// Sample count for the local uniqueness probe (0 disables)
        #[arg(long, default_value_t = 0)]
        probe_samples: usize,
    },
    /// Linear distortion between two planar branch configurations
    Distort {
        source: String,
        target: String,
        /// Indices of the two pinned curves
        #[arg(long, num_args = 2, default_values_t = [0usize, 1usize])]
        pin: Vec<usize>,
    },
    /// Second-order compatibility of a diffeomorphism between two patches
    ShapeCheck {
        /// Patch 1 parameterization (polynomial map JSON)
        #[arg(long)]
        map1: String,
        /// Patch 1 radial field (polynomial map JSON)
        #[arg(long)]
        radial1: String,
        /// Diffeomorphism (polynomial map JSON)
        #[arg(long)]
        phi: String,
        /// Patch 2 parameterization
        #[arg(long)]
        map2: String,
        /// Patch 2 radial field
        #[arg(long)]
        radial2: String,
        /// Evaluation point, comma-separated parameter coordinates
        #[arg(long)]
        at: String,
        /// Residual tolerance (defaults to 1e-4, the finite-difference tier)
        #[arg(long, default_value_t = 1e-4)]
        residual_tol: f64,
    },
    /// Extract an approximate medial graph from a sampled boundary
    Extract {
        boundary: String,
        #[arg(long, default_value_t = 0.1)]
        prune: f64,
    },
    /// Render a medial graph or branch configuration to SVG
    Render { input: String },
}

#[derive(Args)]
struct CrossRatioArgs {
    /// Four scalars (or "inf"); interpreted as line slopes with --slopes
    values: Vec<String>,
    /// Treat the four values as slopes of concurrent lines
    #[arg(long)]
    slopes: bool,
    /// Hyperplane pencil JSON file: {"ambient_dim", "axis", "normals"}
    #[arg(long)]
    pencil: Option<String>,
}

struct Report {
    format: Format,
    lines: Vec<String>,
}

impl Report {
    fn new(format: Format) -> Self {
        Report {
            format,
            lines: Vec::new(),
        }
    }

    fn both(&mut self, key: &str, value: impl std::fmt::Display) {
        match self.format {
            Format::Human => self.lines.push(format!("{key}: {value}")),
            Format::Machine => self.lines.push(format!("{key}={value}")),
        }
    }

    fn angle(&mut self, key: &str, value: f64) {
        match self.format {
            Format::Human => self
                .lines
                .push(format!("{key}: {value} rad ({:.4} deg)", value.to_degrees())),
            Format::Machine => self.lines.push(format!("{key}={value}")),
        }
    }

    fn emit(self, out: &Option<String>) -> Result<()> {
        let text = self.lines.join("\n") + "\n";
        match out {
            Some(path) => fs::write(path, text)?,
            None => print!("{text}"),
        }
        Ok(())
    }
}

fn parse_scalar(s: &str) -> Result<ProjectiveScalar> {
    if s.eq_ignore_ascii_case("inf") || s == "∞" {
        return Ok(ProjectiveScalar::Infinity);
    }
    Ok(ProjectiveScalar::finite(
        s.parse::<f64>().with_context(|| format!("bad number {s:?}"))?,
    ))
}

fn angle_triple(values: &[f64]) -> Result<AngleTriple> {
    if values.len() != 3 {
        bail!("expected 3 angles, got {}", values.len());
    }
    Ok(AngleTriple::with_tolerance(
        [values[0], values[1], values[2]],
        CLI_SUM_TOL,
    )?)
}

#[derive(serde::Deserialize)]
struct PencilDoc {
    ambient_dim: usize,
    #[serde(default)]
    axis: Vec<Vec<f64>>,
    normals: Vec<Vec<f64>>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct ConfigDoc {
    tangent_dirs: Vec<[f64; 2]>,
    #[serde(default)]
    radial_dirs: Vec<[f64; 2]>,
}

fn load_config(path: &str) -> Result<BranchConfig2D> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
    // either a branch-configuration document or a medial graph
    if let Ok(doc) = serde_json::from_str::<ConfigDoc>(&text) {
        let tangents = doc
            .tangent_dirs
            .iter()
            .map(|p| Vector2::new(p[0], p[1]))
            .collect();
        let radials = doc
            .radial_dirs
            .iter()
            .map(|p| Vector2::new(p[0], p[1]))
            .collect();
        return Ok(BranchConfig2D::new(tangents, radials)?);
    }
    let graph = parse_medial_graph(&text)?;
    let branch = graph
        .vertices
        .iter()
        .find(|v| v.kind == VertexKind::Branch)
        .ok_or_else(|| anyhow!("{path}: no branch vertex"))?;
    Ok(branch_config_from_graph(&graph, branch.id)?)
}

fn load_poly(path: &str) -> Result<PolyMap> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
    Ok(PolyMap::from_json(&text)?)
}

fn run(cli: Cli) -> Result<u8> {
    let mut report = Report::new(cli.format);
    let mut exit = 0u8;
    match cli.command {
        Command::CrossRatio(args) => {
            let lambda = if let Some(path) = &args.pencil {
                let text = fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
                let doc: PencilDoc = serde_json::from_str(&text)?;
                let axis = doc.axis.into_iter().map(DVector::from_vec).collect();
                let normals: Vec<DVector<f64>> =
                    doc.normals.into_iter().map(DVector::from_vec).collect();
                let normals: [DVector<f64>; 4] = normals
                    .try_into()
                    .map_err(|_| anyhow!("pencil needs exactly 4 normals"))?;
                let pencil = HyperplanePencil::new(doc.ambient_dim, axis, normals)?;
                hyperplane_cross_ratio(&pencil, None)?
            } else {
                if args.values.len() != 4 {
                    bail!("expected 4 values, got {}", args.values.len());
                }
                let z: Vec<ProjectiveScalar> = args
                    .values
                    .iter()
                    .map(|s| parse_scalar(s))
                    .collect::<Result<_>>()?;
                if args.slopes {
                    let pencil = LinePencil2D::from_slopes([z[0], z[1], z[2], z[3]])?;
                    line_cross_ratio(&pencil)?
                } else {
                    cross_ratio_with_tol(z[0], z[1], z[2], z[3], cli.tol)?
                        .as_finite()
                        .ok_or_else(|| anyhow!("cross ratio is infinite"))?
                }
            };
            report.both("lambda", lambda);
        }
        Command::Orbit { lambda } => {
            let orb = orbit(lambda)?;
            report.both("representative", orb.representative());
            report.both("size", orb.len());
            for (i, v) in orb.values().iter().enumerate() {
                report.both(&format!("value{i}"), v);
            }
        }
        Command::YAngles { theta } => {
            let theta = angle_triple(&theta)?;
            let alpha = solve_y_branch_angles(&theta);
            for (i, a) in alpha.iter().enumerate() {
                report.angle(&format!("alpha{}", i + 1), *a);
            }
        }
        Command::XCheck { theta, t } => {
            if theta.len() != 4 {
                bail!("expected 4 angles, got {}", theta.len());
            }
            let quad =
                AngleQuad::with_tolerance([theta[0], theta[1], theta[2], theta[3]], CLI_SUM_TOL)?;
            let check = check_x_branch_compatibility(&quad);
            report.both("compatible", check.compatible);
            report.both("residual", check.residual);
            if let Some(t) = t {
                let family = x_branch_beta_family(&quad, t)?;
                for (i, b) in family.beta.iter().enumerate() {
                    report.angle(&format!("beta{}", i + 1), *b);
                }
                report.both("admissible", family.admissible);
            }
            if !check.compatible {
                exit = 2;
            }
        }
        Command::Triple { theta } => {
            let theta = angle_triple(&theta)?;
            let triple = triple_cross_ratio(&theta)?;
            for (i, l) in triple.lambdas.iter().enumerate() {
                report.both(&format!("lambda{}", i + 1), l);
            }
            for (i, orb) in triple.orbits.iter().enumerate() {
                let joined = orb
                    .values()
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(if cli.format == Format::Machine { "," } else { ", " });
                report.both(&format!("orbit{}", i + 1), joined);
            }
        }
        Command::Compare {
            file_a,
            file_b,
            reflections,
        } => {
            let a = load_config(&file_a)?;
            let b = load_config(&file_b)?;
            if a.sheet_count() != b.sheet_count() {
                bail!(
                    "sheet counts differ: {} vs {}",
                    a.sheet_count(),
                    b.sheet_count()
                );
            }
            match a.sheet_count() {
                3 => {
                    let cmp = compare_y_branch(
                        &a.angle_triple()?,
                        &b.angle_triple()?,
                        cli.tol,
                        reflections,
                    )?;
                    report.both("matched", cmp.matched);
                    report.both("obstruction", cmp.obstruction);
                    report.both("best_shift", cmp.best_shift);
                    report.both("best_reflected", cmp.best_reflected);
                    if !cmp.matched {
                        exit = 2;
                    }
                }
                4 => {
                    let pencil = |c: &BranchConfig2D| -> Result<f64> {
                        let d = c.tangent_dirs();
                        Ok(line_cross_ratio(&LinePencil2D::new([
                            d[0], d[1], d[2], d[3],
                        ])?)?)
                    };
                    let orbit_a = orbit(pencil(&a)?)?;
                    let orbit_b = orbit(pencil(&b)?)?;
                    let distance = orbit_distance(&orbit_a, &orbit_b);
                    report.both("matched", distance < cli.tol);
                    report.both("distance", distance);
                    if distance >= cli.tol {
                        exit = 2;
                    }
                }
                k => bail!("cannot compare configurations with {k} sheets"),
            }
        }
        Command::Rank {
            theta,
            scan,
            probe_radius,
            probe_samples,
        } => {
            if let Some(n) = scan {
                let mut rank2 = 0usize;
                let mut total = 0usize;
                for i in 1..n {
                    for j in 1..n {
                        let t1 = PI * i as f64 / n as f64;
                        let t2 = PI * j as f64 / n as f64;
                        let t3 = 2.0 * PI - t1 - t2;
                        if t3 <= 0.0 || t3 >= PI {
                            continue;
                        }
                        let Ok(t) = AngleTriple::with_tolerance([t1, t2, t3], 1e-9) else {
                            continue;
                        };
                        if let Ok(cert) = triple_map_jacobian(&t, cli.step) {
                            total += 1;
                            if cert.rank2 {
                                rank2 += 1;
                            } else {
                                report.both(
                                    &format!("rank_deficient_{total}"),
                                    format!("{t1},{t2},{t3}"),
                                );
                            }
                        }
                    }
                }
                report.both("grid", n);
                report.both("evaluated", total);
                report.both("rank2", rank2);
            } else {
                let theta = angle_triple(&theta)?;
                let cert = triple_map_jacobian(&theta, cli.step)?;
                report.both("sigma1", cert.singular_values[0]);
                report.both("sigma2", cert.singular_values[1]);
                report.both("rank2", cert.rank2);
                if probe_samples > 0 {
                    let probe =
                        local_uniqueness_probe(&theta, probe_radius, probe_samples, 0)?;
                    report.both("probe_injective", probe.injective);
                    report.both("probe_min_separation", probe.min_separation);
                    report.both("probe_samples", probe.samples);
                }
            }
        }
        Command::Distort {
            source,
            target,
            pin,
        } => {
            let src = load_config(&source)?;
            let tgt = load_config(&target)?;
            let analysis = linear_distortion_analysis(&src, &tgt, [pin[0], pin[1]])?;
            report.both("matched_curves", analysis.matched_curves);
            for ((idx, img), err) in analysis
                .curve_indices
                .iter()
                .zip(analysis.image_tangents.iter())
                .zip(analysis.angle_errors.iter())
            {
                report.both(&format!("image{idx}"), format!("{},{}", img.x, img.y));
                report.angle(&format!("angle_error{idx}"), *err);
            }
            if analysis.angle_errors.iter().any(|e| *e > cli.tol) {
                exit = 2;
            }
        }
        Command::ShapeCheck {
            map1,
            radial1,
            phi,
            map2,
            radial2,
            at,
            residual_tol,
        } => {
            let patch1 =
                MedialSheetPatch::new(Box::new(load_poly(&map1)?), Box::new(load_poly(&radial1)?))?;
            let patch2 =
                MedialSheetPatch::new(Box::new(load_poly(&map2)?), Box::new(load_poly(&radial2)?))?;
            let phi = DiffeoPatch::new(Box::new(load_poly(&phi)?))?;
            let u: Vec<f64> = at
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|e| anyhow!("bad --at: {e}")))
                .collect::<Result<_>>()?;
            let u = DVector::from_vec(u);
            let basis: Vec<DVector<f64>> = {
                let jac = patch1.tangent_jacobian(&u);
                (0..jac.ncols()).map(|c| jac.column(c).into_owned()).collect()
            };
            let sigma = scale_sigma(&patch1, &phi, &patch2, &u)?;
            let check = check_diffeo_compatibility(&patch1, &phi, &patch2, &u, &basis, residual_tol)?;
            report.both("sigma", sigma);
            report.both("residual", check.residual);
            report.both("pass", check.pass);
            if !check.pass {
                exit = 2;
            }
        }
        Command::Extract { boundary, prune } => {
            let text =
                fs::read_to_string(&boundary).with_context(|| format!("reading {boundary}"))?;
            let sample = BoundarySample::from_json(&text)?;
            let graph = extract_medial_2d(&sample, prune)?;
            let json = serialize_medial_graph(&graph)?;
            match &cli.out {
                Some(path) => fs::write(path, json)?,
                None => println!("{json}"),
            }
            return Ok(0);
        }
        Command::Render { input } => {
            let text = fs::read_to_string(&input).with_context(|| format!("reading {input}"))?;
            let svg = if let Ok(graph) = parse_medial_graph(&text) {
                render_graph(&graph)?
            } else {
                let config = load_config(&input)?;
                render_config(&config)
            };
            match &cli.out {
                Some(path) => fs::write(path, svg)?,
                None => print!("{svg}"),
            }
            return Ok(0);
        }
    }
    report.emit(&cli.out)?;
    Ok(exit)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            eprintln!("error: {}", e.to_string().lines().next().unwrap_or("usage"));
            return ExitCode::from(1);
        }
        Err(e) => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
