//! Approximate 2D medial-axis extraction from a sampled boundary: Delaunay
//! circumcenters as Voronoi-skeleton vertices, interior filtering, spike
//! pruning by foot-point separation, chain assembly, and vertex
//! classification.

use crate::error::{Error, Result};
use crate::graph::{Curve, MedialGraph, PolyNode, Vertex, VertexKind};
use nalgebra::Vector2;
use std::collections::HashMap;

/// An ordered, closed, simple boundary polyline (counterclockwise).
#[derive(Debug, Clone)]
pub struct BoundarySample {
    points: Vec<Vector2<f64>>,
}

fn segments_intersect(
    a: Vector2<f64>,
    b: Vector2<f64>,
    c: Vector2<f64>,
    d: Vector2<f64>,
) -> bool {
    let orient = |p: Vector2<f64>, q: Vector2<f64>, r: Vector2<f64>| {
        (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x)
    };
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

impl BoundarySample {
    /// Validates the sample: at least 16 points, simple, and normalizes the
    /// orientation to counterclockwise.
    pub fn new(mut points: Vec<Vector2<f64>>) -> Result<Self> {
        if points.len() < 16 {
            return Err(Error::TooFewPoints(points.len()));
        }
        let n = points.len();
        let signed_area: f64 = (0..n)
            .map(|i| {
                let p = points[i];
                let q = points[(i + 1) % n];
                p.x * q.y - q.x * p.y
            })
            .sum();
        if signed_area < 0.0 {
            points.reverse();
        }
        for i in 0..n {
            for j in (i + 1)..n {
                // skip segments sharing an endpoint
                if j == i || (j + 1) % n == i || (i + 1) % n == j {
                    continue;
                }
                if segments_intersect(
                    points[i],
                    points[(i + 1) % n],
                    points[j],
                    points[(j + 1) % n],
                ) {
                    return Err(Error::NotSimple);
                }
            }
        }
        Ok(BoundarySample { points })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(serde::Deserialize)]
        struct Doc {
            points: Vec<[f64; 2]>,
        }
        let doc: Doc =
            serde_json::from_str(text).map_err(|e| Error::SchemaError(e.to_string()))?;
        BoundarySample::new(doc.points.iter().map(|p| Vector2::new(p[0], p[1])).collect())
    }

    pub fn points(&self) -> &[Vector2<f64>] {
        &self.points
    }

    fn contains(&self, p: Vector2<f64>) -> bool {
        // even-odd ray casting
        let n = self.points.len();
        let mut inside = false;
        for i in 0..n {
            let a = self.points[i];
            let b = self.points[(i + 1) % n];
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

/// Samples a closed polygon's boundary at `count` points, uniformly by arc
/// length.
pub fn sample_polygon(corners: &[Vector2<f64>], count: usize) -> Vec<Vector2<f64>> {
    let n = corners.len();
    let lengths: Vec<f64> = (0..n)
        .map(|i| (corners[(i + 1) % n] - corners[i]).norm())
        .collect();
    let total: f64 = lengths.iter().sum();
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let mut s = total * k as f64 / count as f64;
        let mut i = 0;
        while s > lengths[i] {
            s -= lengths[i];
            i = (i + 1) % n;
        }
        let dir = (corners[(i + 1) % n] - corners[i]) / lengths[i];
        out.push(corners[i] + dir * s);
    }
    out
}

/// Samples an axis-aligned ellipse boundary at `count` points by parameter.
pub fn sample_ellipse(a: f64, b: f64, count: usize) -> Vec<Vector2<f64>> {
    (0..count)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / count as f64;
            Vector2::new(a * t.cos(), b * t.sin())
        })
        .collect()
}

struct SkeletonNode {
    center: Vector2<f64>,
    radius: f64,
    feet: [usize; 3],
}

fn circumcircle(
    a: Vector2<f64>,
    b: Vector2<f64>,
    c: Vector2<f64>,
) -> Option<(Vector2<f64>, f64)> {
    let d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
    if d.abs() < 1e-14 {
        return None;
    }
    let a2 = a.norm_squared();
    let b2 = b.norm_squared();
    let c2 = c.norm_squared();
    let ux = (a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d;
    let uy = (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d;
    let center = Vector2::new(ux, uy);
    Some((center, (center - a).norm()))
}

/// Extracts an approximate Blum medial axis of the sampled region as a
/// medial graph: Voronoi vertices (Delaunay circumcenters) interior to the
/// polygon, with spike branches pruned where the foot-point separation drops
/// below `prune_ratio` times the local radius.
pub fn extract_medial_2d(boundary: &BoundarySample, prune_ratio: f64) -> Result<MedialGraph> {
    if !(0.0..1.0).contains(&prune_ratio) {
        return Err(Error::SchemaError(format!(
            "prune_ratio {prune_ratio} outside [0, 1)"
        )));
    }
    let pts = boundary.points();
    let del_points: Vec<delaunator::Point> = pts
        .iter()
        .map(|p| delaunator::Point { x: p.x, y: p.y })
        .collect();
    let tri = delaunator::triangulate(&del_points);
    let n_tri = tri.triangles.len() / 3;

    // interior circumcenters become skeleton node candidates
    let mut nodes: Vec<Option<SkeletonNode>> = Vec::with_capacity(n_tri);
    for t in 0..n_tri {
        let feet = [
            tri.triangles[3 * t],
            tri.triangles[3 * t + 1],
            tri.triangles[3 * t + 2],
        ];
        let node = circumcircle(pts[feet[0]], pts[feet[1]], pts[feet[2]])
            .filter(|(c, _)| boundary.contains(*c))
            .map(|(center, radius)| SkeletonNode {
                center,
                radius,
                feet,
            });
        nodes.push(node);
    }

    // adjacency through shared Delaunay edges
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n_tri];
    for e in 0..tri.halfedges.len() {
        let o = tri.halfedges[e];
        if o == delaunator::EMPTY || o < e {
            continue;
        }
        let (t1, t2) = (e / 3, o / 3);
        if nodes[t1].is_some() && nodes[t2].is_some() {
            adj[t1].push(t2);
            adj[t2].push(t1);
        }
    }

    // spurious node: all its foot points lie on one small boundary patch
    let spurious = |node: &SkeletonNode| {
        let f = node.feet.map(|i| pts[i]);
        let max_sep = (f[0] - f[1])
            .norm()
            .max((f[1] - f[2]).norm())
            .max((f[0] - f[2]).norm());
        max_sep < prune_ratio * node.radius
    };

    // iteratively trim spurious leaves so spike branches disappear from the
    // tip inward without disconnecting the skeleton
    let mut alive: Vec<bool> = nodes.iter().map(|n| n.is_some()).collect();
    let mut degree: Vec<usize> = (0..n_tri)
        .map(|t| adj[t].iter().filter(|&&u| alive[u]).count())
        .collect();
    let mut queue: Vec<usize> = (0..n_tri)
        .filter(|&t| alive[t] && degree[t] <= 1 && spurious(nodes[t].as_ref().unwrap()))
        .collect();
    while let Some(t) = queue.pop() {
        if !alive[t] {
            continue;
        }
        alive[t] = false;
        for &u in &adj[t] {
            if alive[u] {
                degree[u] -= 1;
                if degree[u] <= 1 && spurious(nodes[u].as_ref().unwrap()) {
                    queue.push(u);
                }
            }
        }
    }

    let kept: Vec<usize> = (0..n_tri).filter(|&t| alive[t]).collect();
    if kept.is_empty() {
        // fully pruned (e.g. a circle): keep the deepest node as a point
        // skeleton
        let best = (0..n_tri)
            .filter(|&t| nodes[t].is_some())
            .max_by(|&a, &b| {
                nodes[a]
                    .as_ref()
                    .unwrap()
                    .radius
                    .total_cmp(&nodes[b].as_ref().unwrap().radius)
            })
            .ok_or(Error::TooFewPoints(pts.len()))?;
        let node = nodes[best].as_ref().unwrap();
        return Ok(MedialGraph {
            ambient_dim: 2,
            vertices: vec![Vertex {
                id: 0,
                position: vec![node.center.x, node.center.y],
                kind: VertexKind::Edge,
            }],
            curves: vec![],
        });
    }

    let live_degree = |t: usize| adj[t].iter().filter(|&&u| alive[u]).count();

    // radial vectors: directions from the center to foot-point clusters
    let radials = |t: usize| -> Vec<Vec<f64>> {
        let node = nodes[t].as_ref().unwrap();
        let feet: Vec<Vector2<f64>> = node.feet.iter().map(|&i| pts[i]).collect();
        let merge_dist = 0.3 * node.radius;
        let mut clusters: Vec<Vec<Vector2<f64>>> = Vec::new();
        for f in feet {
            match clusters
                .iter_mut()
                .find(|c| c.iter().any(|g| (*g - f).norm() < merge_dist))
            {
                Some(c) => c.push(f),
                None => clusters.push(vec![f]),
            }
        }
        clusters
            .iter()
            .map(|c| {
                let mean = c.iter().sum::<Vector2<f64>>() / c.len() as f64;
                let dir = (mean - node.center).normalize() * node.radius;
                vec![dir.x, dir.y]
            })
            .collect()
    };

    // endpoints (degree != 2) become graph vertices
    let mut vertex_id: HashMap<usize, usize> = HashMap::new();
    let mut vertices = Vec::new();
    for &t in &kept {
        let d = live_degree(t);
        if d == 2 {
            continue;
        }
        let id = vertices.len();
        vertex_id.insert(t, id);
        let node = nodes[t].as_ref().unwrap();
        vertices.push(Vertex {
            id,
            position: vec![node.center.x, node.center.y],
            kind: if d >= 3 {
                VertexKind::Branch
            } else {
                VertexKind::Edge
            },
        });
    }
    // isolated pair or single chain without endpoints: promote one node
    if vertices.is_empty() {
        let t = kept[0];
        vertex_id.insert(t, 0);
        let node = nodes[t].as_ref().unwrap();
        vertices.push(Vertex {
            id: 0,
            position: vec![node.center.x, node.center.y],
            kind: VertexKind::Edge,
        });
    }

    // assemble curves by walking chains between endpoint vertices
    let mut curves = Vec::new();
    let mut visited_edge: HashMap<(usize, usize), ()> = HashMap::new();
    let mut starts: Vec<usize> = vertex_id.keys().cloned().collect();
    starts.sort();
    for &start in &starts {
        let mut neighbors: Vec<usize> =
            adj[start].iter().cloned().filter(|&u| alive[u]).collect();
        neighbors.sort();
        for &next in &neighbors {
            if visited_edge.contains_key(&(start.min(next), start.max(next))) {
                continue;
            }
            let mut chain = vec![start, next];
            visited_edge.insert((start.min(next), start.max(next)), ());
            let mut prev = start;
            let mut cur = next;
            while live_degree(cur) == 2 && !vertex_id.contains_key(&cur) {
                let step = adj[cur]
                    .iter()
                    .cloned()
                    .find(|&u| alive[u] && u != prev)
                    .unwrap();
                visited_edge.insert((cur.min(step), cur.max(step)), ());
                prev = cur;
                cur = step;
                chain.push(cur);
            }
            let polyline: Vec<PolyNode> = chain
                .iter()
                .map(|&t| match vertex_id.get(&t) {
                    Some(&id) => PolyNode::Id(id),
                    None => {
                        let node = nodes[t].as_ref().unwrap();
                        PolyNode::Point(vec![node.center.x, node.center.y])
                    }
                })
                .collect();
            curves.push(Curve {
                id: curves.len(),
                polyline,
                radii: chain
                    .iter()
                    .map(|&t| nodes[t].as_ref().unwrap().radius)
                    .collect(),
                radial_vectors: chain.iter().map(|&t| radials(t)).collect(),
            });
        }
    }

    Ok(MedialGraph {
        ambient_dim: 2,
        vertices,
        curves,
    })
}
