//! Deterministic SVG rendering of branch configurations and medial graphs.

use crate::branch::BranchConfig2D;
use crate::graph::{MedialGraph, VertexKind};
use crate::Result;
use std::fmt::Write as _;

const SCALE: f64 = 100.0;
const TANGENT_LEN: f64 = 1.4;
const ARC_RADIUS: f64 = 0.45;

fn fmt(v: f64) -> String {
    // normalize negative zero for byte stability
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{:.4}", v * SCALE)
}

/// Renders a branch configuration: tangent rays as solid lines, radial
/// vectors as arrows, and labeled angle arcs between consecutive rays.
pub fn render_config(config: &BranchConfig2D) -> String {
    let mut s = String::new();
    s.push_str("<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"-160 -160 320 320\">\n");
    s.push_str("<g stroke=\"black\" fill=\"none\">\n");
    for dir in config.tangent_dirs() {
        let _ = writeln!(
            s,
            "<line x1=\"0\" y1=\"0\" x2=\"{}\" y2=\"{}\" stroke-width=\"2\"/>",
            fmt(dir.x * TANGENT_LEN),
            fmt(-dir.y * TANGENT_LEN)
        );
    }
    for dir in config.radial_dirs() {
        let tip = *dir;
        let left = tip - (tip * 0.12) + nalgebra::Vector2::new(-tip.y, tip.x) * 0.05;
        let right = tip - (tip * 0.12) - nalgebra::Vector2::new(-tip.y, tip.x) * 0.05;
        let _ = writeln!(
            s,
            "<path class=\"radial\" d=\"M0 0 L{} {}\" stroke-dasharray=\"6 3\"/>",
            fmt(tip.x),
            fmt(-tip.y)
        );
        let _ = writeln!(
            s,
            "<polygon class=\"arrow\" points=\"{},{} {},{} {},{}\" fill=\"black\"/>",
            fmt(tip.x),
            fmt(-tip.y),
            fmt(left.x),
            fmt(-left.y),
            fmt(right.x),
            fmt(-right.y)
        );
    }
    let k = config.sheet_count();
    let dirs = config.tangent_dirs();
    for i in 0..k {
        let a0 = dirs[i].y.atan2(dirs[i].x);
        let gap = config.angles()[i];
        let start = nalgebra::Vector2::new(a0.cos(), a0.sin()) * ARC_RADIUS;
        let end =
            nalgebra::Vector2::new((a0 + gap).cos(), (a0 + gap).sin()) * ARC_RADIUS;
        let large = if gap > std::f64::consts::PI { 1 } else { 0 };
        let _ = writeln!(
            s,
            "<path class=\"arc\" d=\"M{} {} A{} {} 0 {} 0 {} {}\" stroke-width=\"1\"/>",
            fmt(start.x),
            fmt(-start.y),
            fmt(ARC_RADIUS),
            fmt(ARC_RADIUS),
            large,
            fmt(end.x),
            fmt(-end.y)
        );
        let mid = a0 + gap / 2.0;
        let label = nalgebra::Vector2::new(mid.cos(), mid.sin()) * (ARC_RADIUS + 0.18);
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"black\" stroke=\"none\" text-anchor=\"middle\">{:.4}</text>",
            fmt(label.x),
            fmt(-label.y),
            gap
        );
    }
    s.push_str("</g>\n</svg>\n");
    s
}

/// Renders a planar medial graph: curves as polylines, branch vertices as
/// filled circles, edge vertices as open circles.
pub fn render_graph(graph: &MedialGraph) -> Result<String> {
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    let mut consider = |p: &[f64]| {
        for i in 0..2 {
            min[i] = min[i].min(p[i]);
            max[i] = max[i].max(p[i]);
        }
    };
    for v in &graph.vertices {
        consider(&v.position);
    }
    for c in &graph.curves {
        for node in &c.polyline {
            consider(&graph.node_position(node)?);
        }
    }
    let pad = 0.2 * ((max[0] - min[0]).max(max[1] - min[1]).max(1.0));
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{:.4} {:.4} {:.4} {:.4}\">",
        (min[0] - pad) * SCALE,
        (-max[1] - pad) * SCALE,
        (max[0] - min[0] + 2.0 * pad) * SCALE,
        (max[1] - min[1] + 2.0 * pad) * SCALE
    );
    s.push_str("<g stroke=\"black\" fill=\"none\">\n");
    for c in &graph.curves {
        let mut d = String::new();
        for (i, node) in c.polyline.iter().enumerate() {
            let p = graph.node_position(node)?;
            let _ = write!(
                d,
                "{}{} {}",
                if i == 0 { "M" } else { " L" },
                fmt(p[0]),
                fmt(-p[1])
            );
        }
        let _ = writeln!(s, "<path class=\"curve\" d=\"{d}\" stroke-width=\"2\"/>");
    }
    for v in &graph.vertices {
        let fill = match v.kind {
            VertexKind::Branch => "black",
            _ => "white",
        };
        let _ = writeln!(
            s,
            "<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{fill}\"/>",
            fmt(v.position[0]),
            fmt(-v.position[1])
        );
    }
    s.push_str("</g>\n</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branch::{AngleQuad, AngleTriple};
    use crate::extract::{extract_medial_2d, sample_polygon, BoundarySample};
    use nalgebra::Vector2;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn y_config_counts() {
        let theta = AngleTriple::new([TAU / 3.0, 5.0 * PI / 9.0, 7.0 * PI / 9.0]).unwrap();
        let svg = render_config(&BranchConfig2D::from_y_angles(&theta));
        assert_eq!(svg.matches("<line").count(), 3);
        assert_eq!(svg.matches("class=\"arrow\"").count(), 3);
        assert_eq!(svg.matches("<text").count(), 3);
        assert!(svg.contains("2.0944"));
    }

    use crate::branch::BranchConfig2D;

    #[test]
    fn x_config_counts() {
        let theta = AngleQuad::new([PI / 2.0; 4]).unwrap();
        let config = BranchConfig2D::from_x_angles(&theta, PI / 4.0).unwrap();
        let svg = render_config(&config);
        assert_eq!(svg.matches("<line").count(), 4);
        assert_eq!(svg.matches("class=\"arrow\"").count(), 4);
    }

    #[test]
    fn rendering_is_byte_stable() {
        let theta = AngleTriple::new([TAU / 3.0, 5.0 * PI / 9.0, 7.0 * PI / 9.0]).unwrap();
        let config = BranchConfig2D::from_y_angles(&theta);
        assert_eq!(render_config(&config), render_config(&config));

        let corners = [
            Vector2::new(-2.0, -1.0),
            Vector2::new(2.0, -1.0),
            Vector2::new(2.0, 1.0),
            Vector2::new(-2.0, 1.0),
        ];
        let boundary = BoundarySample::new(sample_polygon(&corners, 200)).unwrap();
        let graph = extract_medial_2d(&boundary, 0.1).unwrap();
        assert_eq!(render_graph(&graph).unwrap(), render_graph(&graph).unwrap());
        assert!(render_graph(&graph).unwrap().contains("<circle"));
    }
}
