use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::process::{Command, Output};

fn medial(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_medial"))
        .args(args)
        .output()
        .expect("failed to launch binary")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn machine_map(out: &Output) -> HashMap<String, String> {
    stdout(out)
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn write_y_graph(path: &Path, theta: [f64; 3]) {
    use medial_rigidity::branch::{AngleTriple, BranchConfig2D};
    use medial_rigidity::graph::{serialize_medial_graph, synthetic_branch_graph};
    let theta = AngleTriple::new(theta).unwrap();
    let graph = synthetic_branch_graph(&BranchConfig2D::from_y_angles(&theta));
    std::fs::write(path, serialize_medial_graph(&graph).unwrap()).unwrap();
}

#[test]
fn triple_example_matches_table() {
    let out = medial(&[
        "triple",
        "2.0943951",
        "1.7453293",
        "2.4434610",
        "--format",
        "machine",
    ]);
    assert!(out.status.success());
    let map = machine_map(&out);
    // inputs are truncated to 7 decimals; the map is smooth, so the values
    // land within ~1e-6 of the exact table
    let expected = [-1.226681596, -3.411474126, 1.742227197];
    for (i, e) in expected.iter().enumerate() {
        let got: f64 = map[&format!("lambda{}", i + 1)].parse().unwrap();
        assert!((got - e).abs() < 1e-5, "lambda{} = {got}, want {e}", i + 1);
    }
    assert_eq!(map["orbit1"].split(',').count(), 6);
}

#[test]
fn machine_output_is_byte_stable() {
    let args = [
        "triple",
        "2.0943951023931953",
        "1.7453292519943295",
        "2.443460952792061",
        "--format",
        "machine",
    ];
    assert_eq!(stdout(&medial(&args)), stdout(&medial(&args)));
}

#[test]
fn x_check_example() {
    let out = medial(&[
        "x-check",
        "1.5707963",
        "1.5707963",
        "1.5707963",
        "1.5707963",
        "--t",
        "0.7853982",
        "--format",
        "machine",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let map = machine_map(&out);
    assert_eq!(map["compatible"], "true");
    for i in 1..=4 {
        let b: f64 = map[&format!("beta{i}")].parse().unwrap();
        assert!((b - PI / 4.0).abs() < 1e-6);
    }
}

#[test]
fn incompatible_x_check_exits_2() {
    let a = 5.0 * PI / 9.0;
    let out = medial(&[
        "x-check",
        &a.to_string(),
        &a.to_string(),
        &a.to_string(),
        &(TAU - 3.0 * a).to_string(),
        "--format",
        "machine",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let map = machine_map(&out);
    let residual: f64 = map["residual"].parse().unwrap();
    assert!((residual - 2.0 * PI / 9.0).abs() < 1e-9);
}

#[test]
fn compare_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let c = dir.path().join("c.json");
    write_y_graph(&a, [TAU / 3.0, 5.0 * PI / 9.0, 7.0 * PI / 9.0]);
    write_y_graph(&b, [TAU / 3.0, 11.0 * PI / 18.0, 13.0 * PI / 18.0]);
    write_y_graph(&c, [5.0 * PI / 9.0, 7.0 * PI / 9.0, TAU / 3.0]);
    let distinct = medial(&[
        "compare",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        "--format",
        "machine",
    ]);
    assert_eq!(distinct.status.code(), Some(2));
    let map = machine_map(&distinct);
    assert!(map["obstruction"].parse::<f64>().unwrap() > 0.0);
    let rotated = medial(&["compare", a.to_str().unwrap(), c.to_str().unwrap()]);
    assert_eq!(rotated.status.code(), Some(0));
}

#[test]
fn extract_produces_valid_graph() {
    let dir = tempfile::tempdir().unwrap();
    let boundary = dir.path().join("rect.json");
    let corners = [
        nalgebra::Vector2::new(-2.0, -1.0),
        nalgebra::Vector2::new(2.0, -1.0),
        nalgebra::Vector2::new(2.0, 1.0),
        nalgebra::Vector2::new(-2.0, 1.0),
    ];
    let pts: Vec<[f64; 2]> = medial_rigidity::extract::sample_polygon(&corners, 400)
        .iter()
        .map(|p| [p.x, p.y])
        .collect();
    std::fs::write(
        &boundary,
        serde_json::to_string(&serde_json::json!({ "points": pts })).unwrap(),
    )
    .unwrap();
    let graph_path = dir.path().join("graph.json");
    let out = medial(&[
        "extract",
        boundary.to_str().unwrap(),
        "--out",
        graph_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&graph_path).unwrap();
    let graph = medial_rigidity::graph::parse_medial_graph(&text).unwrap();
    let branches = graph
        .vertices
        .iter()
        .filter(|v| v.kind == medial_rigidity::graph::VertexKind::Branch)
        .count();
    assert_eq!(branches, 2);

    // round-trip: parse(serialize(parse(doc))) equals parse(doc)
    let again = medial_rigidity::graph::parse_medial_graph(
        &medial_rigidity::graph::serialize_medial_graph(&graph).unwrap(),
    )
    .unwrap();
    assert_eq!(
        medial_rigidity::graph::serialize_medial_graph(&again).unwrap(),
        medial_rigidity::graph::serialize_medial_graph(&graph).unwrap()
    );
}

#[test]
fn render_config_structure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write_y_graph(&cfg, [TAU / 3.0, 5.0 * PI / 9.0, 7.0 * PI / 9.0]);
    let svg_path = dir.path().join("out.svg");
    let out = medial(&[
        "render",
        cfg.to_str().unwrap(),
        "--out",
        svg_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert!(svg.starts_with("<svg"));
    // same input twice: byte-identical output
    let svg_path2 = dir.path().join("out2.svg");
    medial(&[
        "render",
        cfg.to_str().unwrap(),
        "--out",
        svg_path2.to_str().unwrap(),
    ]);
    assert_eq!(svg, std::fs::read_to_string(&svg_path2).unwrap());
}

#[test]
fn distort_reports_large_turn() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src.json");
    let tgt = dir.path().join("tgt.json");
    std::fs::write(
        &src,
        r#"{"tangent_dirs": [[1,0],[0,1],[0,-1]], "radial_dirs": []}"#,
    )
    .unwrap();
    let alpha = PI / 3.0;
    std::fs::write(
        &tgt,
        serde_json::to_string(&serde_json::json!({
            "tangent_dirs": [
                [1.0, 0.0],
                [alpha.cos(), alpha.sin()],
                [-(-alpha).cos(), -(-alpha).sin()],
            ],
            "radial_dirs": [],
        }))
        .unwrap(),
    )
    .unwrap();
    let out = medial(&[
        "distort",
        src.to_str().unwrap(),
        tgt.to_str().unwrap(),
        "--format",
        "machine",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stdout(&out));
    let map = machine_map(&out);
    let err: f64 = map["angle_error2"].parse().unwrap();
    assert!((err - 2.0 * PI / 3.0).abs() < 1e-9, "angle error {err}");
}

fn write_poly(path: &Path, coords: &[&[(f64, &[u32])]]) {
    let coordinates: Vec<Vec<serde_json::Value>> = coords
        .iter()
        .map(|terms| {
            terms
                .iter()
                .map(|(c, p)| serde_json::json!({"coeff": c, "powers": p}))
                .collect()
        })
        .collect();
    std::fs::write(
        path,
        serde_json::to_string(&serde_json::json!({
            "dom_dim": coords.iter().flat_map(|t| t.iter()).next().map(|(_, p)| p.len()).unwrap_or(1),
            "coordinates": coordinates,
        }))
        .unwrap(),
    )
    .unwrap();
}

#[test]
fn shape_check_quadratic_shear() {
    let dir = tempfile::tempdir().unwrap();
    let eps = 0.01;
    let map1 = dir.path().join("map1.json");
    let radial1 = dir.path().join("radial1.json");
    let phi = dir.path().join("phi.json");
    let map2 = dir.path().join("map2.json");
    let radial2 = dir.path().join("radial2.json");
    // strip: u -> (u, 0), U = (0, 1)
    write_poly(&map1, &[&[(1.0, &[1])], &[(0.0, &[0])]]);
    write_poly(&radial1, &[&[(0.0, &[0])], &[(1.0, &[0])]]);
    // phi(x, y) = (x + eps y^2, y)
    write_poly(
        &phi,
        &[&[(1.0, &[1, 0]), (eps, &[0, 2])], &[(1.0, &[0, 1])]],
    );
    // image: axis unchanged, U' = (eps, 1)
    write_poly(&map2, &[&[(1.0, &[1])], &[(0.0, &[0])]]);
    write_poly(&radial2, &[&[(eps, &[0])], &[(1.0, &[0])]]);
    let out = medial(&[
        "shape-check",
        "--map1",
        map1.to_str().unwrap(),
        "--radial1",
        radial1.to_str().unwrap(),
        "--phi",
        phi.to_str().unwrap(),
        "--map2",
        map2.to_str().unwrap(),
        "--radial2",
        radial2.to_str().unwrap(),
        "--at",
        "0.25",
        "--format",
        "machine",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}{}",
        stdout(&out),
        String::from_utf8_lossy(&out.stderr)
    );
    let map = machine_map(&out);
    assert_eq!(map["pass"], "true");
    assert!(map["residual"].parse::<f64>().unwrap() < 1e-4);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(medial(&["triple", "1.0", "2.0"]).status.code(), Some(1));
    assert_eq!(medial(&["orbit", "0.0"]).status.code(), Some(1));
    assert_eq!(medial(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(
        medial(&["compare", "/nonexistent/a.json", "/nonexistent/b.json"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn cli_matches_library_exactly() {
    // the CLI performs no arithmetic of its own
    use medial_rigidity::branch::AngleTriple;
    use medial_rigidity::rigidity::triple_cross_ratio;
    let theta = [TAU / 3.0, 5.0 * PI / 9.0, 7.0 * PI / 9.0];
    let out = medial(&[
        "triple",
        &theta[0].to_string(),
        &theta[1].to_string(),
        &theta[2].to_string(),
        "--format",
        "machine",
    ]);
    let map = machine_map(&out);
    let lib = triple_cross_ratio(&AngleTriple::new(theta).unwrap()).unwrap();
    for i in 0..3 {
        assert_eq!(map[&format!("lambda{}", i + 1)], lib.lambdas[i].to_string());
    }
}
