//! Browser demo: simulate a clustered precision matrix, fit it, and compare
//! the recovered clusters against simple baselines. Every export takes plain
//! numbers/strings and returns a JSON string.

use cggm::admm::{fit, AdmmConfig};
use cggm::baselines::{correlation_dissimilarity, euclidean_dissimilarity, kmeans_cluster, ward_cluster};
use cggm::cluster::{
    extract_clusters, lambda_grid, lambda_path_targeting, lambda_path_with, rand_index, select_by_k,
    Spacing, DEFAULT_FUSION_TOL,
};
use cggm::fusion::{build_fusion_structure, FusionStructure, WeightScheme};
use cggm::preprocess::{center_columns, empirical_covariance, Dataset};
use cggm::synthetic::{rng_from_seed, simulate, GroundTruth};
use cggm::SymMatrix;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Anything bigger makes the page sluggish.
const MAX_P: usize = 60;

struct Problem {
    truth: GroundTruth,
    centered: Dataset,
    sigma: SymMatrix,
    fusion: FusionStructure,
}

fn parse_sizes(sizes: &str) -> Result<Vec<usize>, String> {
    let out: Vec<usize> = sizes
        .split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|_| format!("bad cluster size `{}`", s.trim())))
        .collect::<Result<_, _>>()?;
    let p: usize = out.iter().sum();
    if out.is_empty() || out.contains(&0) {
        return Err("cluster sizes must be positive".into());
    }
    if !(3..=MAX_P).contains(&p) {
        return Err(format!("total size must lie in 3..={MAX_P}, got {p}"));
    }
    Ok(out)
}

fn problem(sizes: &str, n: u32, seed: u32) -> Result<Problem, String> {
    let sizes = parse_sizes(sizes)?;
    if n < 2 {
        return Err("need at least 2 samples".into());
    }
    let (truth, data) = simulate(&sizes, n as usize, &mut rng_from_seed(seed as u64)).map_err(|e| e.to_string())?;
    let centered = center_columns(&data);
    let sigma = empirical_covariance(&centered).map_err(|e| e.to_string())?;
    let fusion = build_fusion_structure(
        sigma.dim(),
        &WeightScheme::ProfileKnn { sigma_hat: &sigma, neighbors: 5, phi: 0.5 },
    )
    .map_err(|e| e.to_string())?;
    Ok(Problem { truth, centered, sigma, fusion })
}

fn json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Heatmap {
    p: usize,
    lambda: f64,
    converged: bool,
    iterations: usize,
    num_clusters: usize,
    rand_index: f64,
    true_labels: Vec<usize>,
    labels: Vec<usize>,
    truth: Vec<Vec<f64>>,
    estimate: Vec<Vec<f64>>,
}

/// Fits one `lambda` and returns the true and estimated precision matrices.
pub fn fit_heatmap(sizes: &str, n: u32, seed: u32, lambda: f64) -> Result<String, String> {
    let pr = problem(sizes, n, seed)?;
    let res = fit(&pr.sigma, &pr.fusion, &AdmmConfig::default().with_lambda(lambda), None).map_err(|e| e.to_string())?;
    let part = extract_clusters(&res.psi_hat, pr.sigma.dim(), &pr.fusion, DEFAULT_FUSION_TOL).map_err(|e| e.to_string())?;
    json(&Heatmap {
        p: pr.sigma.dim(),
        lambda,
        converged: res.converged,
        iterations: res.iterations,
        num_clusters: part.k(),
        rand_index: rand_index(&part, &pr.truth.membership).map_err(|e| e.to_string())?,
        true_labels: pr.truth.membership.labels().to_vec(),
        labels: part.labels().to_vec(),
        truth: pr.truth.precision.to_rows(),
        estimate: res.theta_hat.to_rows(),
    })
}

#[derive(Serialize)]
struct PathEntry {
    lambda: f64,
    num_clusters: usize,
    rand_index: f64,
    converged: bool,
}

/// Cluster count and Rand index along a log grid.
pub fn path_summary(sizes: &str, n: u32, seed: u32, lambda_min: f64, lambda_max: f64, count: u32) -> Result<String, String> {
    let pr = problem(sizes, n, seed)?;
    let grid = lambda_grid(lambda_min, lambda_max, count.clamp(1, 60) as usize, Spacing::Log).map_err(|e| e.to_string())?;
    let path = lambda_path_with(&pr.sigma, &pr.fusion, &grid, &AdmmConfig::default(), DEFAULT_FUSION_TOL, |_| {})
        .map_err(|e| e.to_string())?;
    let entries: Vec<PathEntry> = path
        .iter()
        .map(|pt| PathEntry {
            lambda: pt.lambda,
            num_clusters: pt.num_clusters,
            rand_index: rand_index(&pt.partition, &pr.truth.membership).unwrap_or(f64::NAN),
            converged: pt.converged,
        })
        .collect();
    json(&entries)
}

#[derive(Serialize)]
struct MethodScore {
    method: &'static str,
    rand_index: f64,
}

/// Rand index of the clustered GGM (path targeting the true cluster count)
/// next to k-means and the two Ward baselines.
pub fn compare_methods(sizes: &str, n: u32, seed: u32) -> Result<String, String> {
    let pr = problem(sizes, n, seed)?;
    let k = pr.truth.k;
    let truth = &pr.truth.membership;
    let err = |e: cggm::CggmError| e.to_string();
    let grid = lambda_grid(0.05, 50.0, 20, Spacing::Log).map_err(err)?;
    let path = lambda_path_targeting(&pr.sigma, &pr.fusion, &grid, &AdmmConfig::default(), DEFAULT_FUSION_TOL, k, |_| {})
        .map_err(err)?;
    let ggm = &select_by_k(&path, k).ok_or("empty path")?.partition;
    let scores = vec![
        MethodScore { method: "clustered GGM", rand_index: rand_index(ggm, truth).map_err(err)? },
        MethodScore {
            method: "k-means",
            rand_index: rand_index(&kmeans_cluster(&pr.centered, k, &mut rng_from_seed(seed as u64), 10).map_err(err)?, truth)
                .map_err(err)?,
        },
        MethodScore {
            method: "HC Euclidean Ward",
            rand_index: rand_index(&ward_cluster(&euclidean_dissimilarity(&pr.centered), k).map_err(err)?, truth).map_err(err)?,
        },
        MethodScore {
            method: "HC correlation Ward",
            rand_index: rand_index(
                &ward_cluster(&correlation_dissimilarity(&pr.centered).map_err(err)?, k).map_err(err)?,
                truth,
            )
            .map_err(err)?,
        },
    ];
    json(&scores)
}

#[wasm_bindgen(js_name = fitHeatmap)]
pub fn fit_heatmap_js(sizes: &str, n: u32, seed: u32, lambda: f64) -> Result<String, JsValue> {
    fit_heatmap(sizes, n, seed, lambda).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = pathSummary)]
pub fn path_summary_js(sizes: &str, n: u32, seed: u32, lambda_min: f64, lambda_max: f64, count: u32) -> Result<String, JsValue> {
    path_summary(sizes, n, seed, lambda_min, lambda_max, count).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = compareMethods)]
pub fn compare_methods_js(sizes: &str, n: u32, seed: u32) -> Result<String, JsValue> {
    compare_methods(sizes, n, seed).map_err(|e| JsValue::from_str(&e))
}
