use cggm_wasm::{compare_methods, fit_heatmap, path_summary};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn heatmap_has_square_matrices() {
    let v = parse(&fit_heatmap("3,3,4", 200, 1, 0.2).unwrap());
    assert_eq!(v["p"], 10);
    for key in ["truth", "estimate"] {
        let rows = v[key].as_array().unwrap();
        assert_eq!(rows.len(), 10);
        assert!(rows.iter().all(|r| r.as_array().unwrap().len() == 10));
    }
    assert_eq!(v["labels"].as_array().unwrap().len(), 10);
    let ri = v["rand_index"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&ri));
}

#[test]
fn heatmap_is_deterministic() {
    assert_eq!(fit_heatmap("3,3,4", 150, 9, 0.5).unwrap(), fit_heatmap("3,3,4", 150, 9, 0.5).unwrap());
}

#[test]
fn path_ends_in_one_cluster() {
    let v = parse(&path_summary("3,3,4", 200, 2, 0.01, 100.0, 10).unwrap());
    let pts = v.as_array().unwrap();
    assert_eq!(pts.len(), 10);
    assert_eq!(pts.last().unwrap()["num_clusters"], 1);
}

#[test]
fn comparison_lists_four_methods() {
    let v = parse(&compare_methods("4,4,6", 200, 3).unwrap());
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|m| m["method"].as_str().unwrap()).collect();
    assert_eq!(names, ["clustered GGM", "k-means", "HC Euclidean Ward", "HC correlation Ward"]);
}

#[test]
fn bad_input_is_reported() {
    assert!(fit_heatmap("3,x", 100, 1, 0.1).unwrap_err().contains("x"));
    assert!(fit_heatmap("1,1", 100, 1, 0.1).is_err());
    assert!(fit_heatmap("40,40", 100, 1, 0.1).is_err());
    assert!(path_summary("3,3,4", 100, 1, 0.0, 1.0, 5).is_err());
}
