use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use cggm::admm::fit as admm_fit;
use cggm::baselines::{correlation_dissimilarity, euclidean_dissimilarity, kmeans_cluster, ward_cluster};
use cggm::cluster::{
    extract_clusters, lambda_path_targeting, lambda_path_with, rand_index, select_by_k, Partition,
    PathPoint, PathRecord,
};
use cggm::fusion::{build_fusion_structure, FusionStructure, WeightScheme};
use cggm::preprocess::{center_columns, empirical_covariance, run_pipeline, Dataset};
use cggm::synthetic::{rng_from_seed, simulate as draw};
use cggm::SymMatrix;

use crate::files::{self, LabelsFile, TruthFile};
use crate::{
    CliError, EvaluateArgs, FitArgs, Method, PathArgs, PreprocessArgs, SimulateArgs, SolverArgs,
    WeightsArg,
};

/// Worker cap from `CGGM_THREADS`, else the machine's parallelism.
fn worker_count() -> usize {
    std::env::var("CGGM_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Maps `f` over `items` on up to [`worker_count`] threads, preserving order.
fn parallel_map<T: Sync, R: Send>(items: &[T], f: impl Fn(usize, &T) -> R + Sync) -> Vec<R> {
    let workers = worker_count().min(items.len()).max(1);
    if workers == 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(i, &items[i]);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every slot is filled"))
        .collect()
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let sizes = match (&args.sizes, args.scenario) {
        (Some(s), _) => s.clone(),
        (None, Some(sc)) => sc.sizes(),
        (None, None) => return Err(CliError::Usage("give --scenario or --sizes".into())),
    };
    let n = match (args.n, args.scenario) {
        (Some(n), _) => n,
        (None, Some(sc)) => sc.n(),
        (None, None) => return Err(CliError::Usage("give --scenario or --n".into())),
    };
    let total: usize = sizes.iter().sum();
    if let Some(p) = args.p {
        if p != total {
            return Err(CliError::Usage(format!(
                "--p {p} does not match --sizes summing to {total}"
            )));
        }
    }
    if n < 2 {
        return Err(CliError::Usage(format!("--n must be at least 2, got {n}")));
    }
    if args.replicates == 0 {
        return Err(CliError::Usage("--replicates must be positive".into()));
    }
    let reps: Vec<usize> = (0..args.replicates).collect();
    let results = parallel_map(&reps, |_, &r| -> Result<(u64, PathBuf), CliError> {
        let seed = args.seed.wrapping_add(r as u64);
        let dir = if args.replicates == 1 {
            args.out.clone()
        } else {
            args.out.join(format!("rep-{:02}", r + 1))
        };
        let (truth, data) = draw(&sizes, n, &mut rng_from_seed(seed))?;
        files::write_matrix(&dir.join("data.csv"), data.values())?;
        files::write_matrix(&dir.join("precision.csv"), truth.precision.as_matrix())?;
        files::write_json(
            &dir.join("truth.json"),
            &TruthFile {
                labels: truth.membership.labels().to_vec(),
                sizes: truth.sizes.clone(),
                b: truth.block_matrix.clone(),
                seed,
            },
        )?;
        Ok((seed, dir))
    });
    for r in results {
        let (seed, dir) = r?;
        println!("seed {seed} -> {}", dir.display());
    }
    Ok(())
}

pub fn preprocess(args: &PreprocessArgs) -> Result<(), CliError> {
    let (header, data) = files::read_dataset(&args.input)?;
    let out = run_pipeline(&data, &args.steps)?;
    let path = args.out.join("processed.csv");
    files::write_dataset(&path, &header, &out)?;
    println!("{} x {} -> {}", out.n(), out.p(), path.display());
    Ok(())
}

/// Centered data and its empirical covariance.
fn load_problem(input: &Path) -> Result<(Dataset, SymMatrix), CliError> {
    let (_, data) = files::read_dataset(input)?;
    if data.p() < 3 {
        return Err(CliError::Usage(format!(
            "{}: the fusion penalty needs at least 3 variables, got {}",
            input.display(),
            data.p()
        )));
    }
    let centered = center_columns(&data);
    let sigma = empirical_covariance(&centered)?;
    Ok((centered, sigma))
}

fn build_fusion(
    args: &SolverArgs,
    centered: &Dataset,
    sigma: &SymMatrix,
) -> Result<FusionStructure, CliError> {
    let p = centered.p();
    let fusion = match &args.weights {
        WeightsArg::Uniform => build_fusion_structure(p, &WeightScheme::Uniform)?,
        WeightsArg::GaussianKnn => build_fusion_structure(
            p,
            &WeightScheme::GaussianKnn {
                data: centered.values(),
                neighbors: args.knn,
                phi: args.phi,
            },
        )?,
        WeightsArg::ProfileKnn => build_fusion_structure(
            p,
            &WeightScheme::ProfileKnn {
                sigma_hat: sigma,
                neighbors: args.knn,
                phi: args.phi,
            },
        )?,
        WeightsArg::File(path) => FusionStructure::from_weights_file(path, p).map_err(|e| match e {
            cggm::CggmError::Io(source) => CliError::Io {
                path: path.clone(),
                source,
            },
            cggm::CggmError::Parse { .. } | cggm::CggmError::Csv(_) => CliError::Parse {
                path: path.clone(),
                source: e,
            },
            other => CliError::Core(other),
        })?,
    };
    Ok(fusion)
}

pub fn fit(args: &FitArgs) -> Result<(), CliError> {
    let config = args.solver.config(args.lambda)?;
    let (centered, sigma) = load_problem(&args.input)?;
    let fusion = build_fusion(&args.solver, &centered, &sigma)?;
    let res = admm_fit(&sigma, &fusion, &config, None)?;
    let partition = extract_clusters(&res.psi_hat, fusion.p(), &fusion, args.solver.fusion_tol)?;

    files::write_matrix(&args.out.join("theta.csv"), res.theta_hat.as_matrix())?;
    files::write_atomic(&args.out.join("residuals.csv"), res.residual_trace_csv().as_bytes())?;
    files::write_json(
        &args.out.join("labels.json"),
        &LabelsFile {
            labels: partition.labels().to_vec(),
            num_clusters: partition.k(),
            lambda: args.lambda,
            converged: res.converged,
        },
    )?;
    println!(
        "lambda {} iterations {} converged {} clusters {}",
        args.lambda,
        res.iterations,
        res.converged,
        partition.k()
    );
    if !res.converged {
        return Err(CliError::NotConverged(format!(
            "no convergence within {} outer iterations; results written to {}",
            config.outer_max_iters,
            args.out.display()
        )));
    }
    Ok(())
}

fn labels_of(pt: &PathPoint) -> LabelsFile {
    LabelsFile {
        labels: pt.partition.labels().to_vec(),
        num_clusters: pt.num_clusters,
        lambda: pt.lambda,
        converged: pt.converged,
    }
}

pub fn path(args: &PathArgs) -> Result<(), CliError> {
    let config = args.solver.config(0.0)?;
    let grid = args.grid.values().map_err(|e| CliError::Usage(e.to_string()))?;
    let (centered, sigma) = load_problem(&args.input)?;
    let fusion = build_fusion(&args.solver, &centered, &sigma)?;
    let report = |pt: &PathPoint| {
        eprintln!(
            "lambda {:.6} clusters {} iterations {}{}",
            pt.lambda,
            pt.num_clusters,
            pt.iterations,
            if pt.converged { "" } else { " (not converged)" }
        );
    };
    let tol = args.solver.fusion_tol;
    let points = match args.select_k {
        Some(k) => lambda_path_targeting(&sigma, &fusion, &grid, &config, tol, k, report)?,
        None => lambda_path_with(&sigma, &fusion, &grid, &config, tol, report)?,
    };
    let records: Vec<PathRecord> = points.iter().map(PathRecord::from).collect();
    files::write_json(&args.out.join("path.json"), &records)?;

    let unconverged = points.iter().filter(|p| !p.converged).count();
    if unconverged > 0 {
        eprintln!("warning: {unconverged} of {} path points did not converge", points.len());
    }
    if let Some(k) = args.select_k {
        let chosen = select_by_k(&points, k).expect("path is non-empty");
        if chosen.num_clusters != k {
            eprintln!(
                "warning: no path point has exactly {k} clusters; closest has {}",
                chosen.num_clusters
            );
        }
        files::write_json(&args.out.join("selected.json"), &labels_of(chosen))?;
        println!("selected lambda {} with {} clusters", chosen.lambda, chosen.num_clusters);
    }
    println!("{} path points -> {}", points.len(), args.out.join("path.json").display());
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct Score {
    method: String,
    replicate: String,
    rand_index: f64,
}

#[derive(Debug, Clone, Serialize)]
struct Summary {
    method: String,
    replicates: usize,
    mean: f64,
    /// Sample standard deviation; 0 for a single replicate.
    sd: f64,
}

#[derive(Debug, Serialize)]
struct Report {
    scores: Vec<Score>,
    summary: Vec<Summary>,
}

fn truth_partition(path: &Path) -> Result<Partition, CliError> {
    let truth: TruthFile = files::read_json(path)?;
    Partition::try_from(truth.labels).map_err(|source| CliError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

fn score_method(
    method: Method,
    args: &EvaluateArgs,
    data_path: &Path,
    truth: &Partition,
    replicate: usize,
) -> Result<f64, CliError> {
    let (centered, sigma) = load_problem(data_path)?;
    if centered.p() != truth.p() {
        return Err(CliError::Core(cggm::CggmError::ShapeMismatch(format!(
            "{} has {} variables but the truth labels {}",
            data_path.display(),
            centered.p(),
            truth.p()
        ))));
    }
    let k = truth.k();
    let partition = match method {
        Method::Cggm => {
            let config = args.solver.config(0.0)?;
            let grid = args.grid.values().map_err(|e| CliError::Usage(e.to_string()))?;
            let fusion = build_fusion(&args.solver, &centered, &sigma)?;
            let points = lambda_path_targeting(&sigma, &fusion, &grid, &config, args.solver.fusion_tol, k, |_| {})?;
            select_by_k(&points, k).expect("path is non-empty").partition.clone()
        }
        Method::Kmeans => {
            let mut rng = rng_from_seed(args.seed.wrapping_add(replicate as u64));
            kmeans_cluster(&centered, k, &mut rng, args.restarts.max(1))?
        }
        Method::HcEuclidean => ward_cluster(&euclidean_dissimilarity(&centered), k)?,
        Method::HcCorr => ward_cluster(&correlation_dissimilarity(&centered)?, k)?,
    };
    Ok(rand_index(&partition, truth)?)
}

fn summarize(scores: &[Score]) -> Vec<Summary> {
    let mut methods: Vec<&str> = Vec::new();
    for s in scores {
        if !methods.contains(&s.method.as_str()) {
            methods.push(&s.method);
        }
    }
    methods
        .into_iter()
        .map(|m| {
            let vals: Vec<f64> = scores.iter().filter(|s| s.method == m).map(|s| s.rand_index).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let sd = if vals.len() > 1 {
                (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            Summary {
                method: m.to_string(),
                replicates: vals.len(),
                mean,
                sd,
            }
        })
        .collect()
}

pub fn evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let scores: Vec<Score> = if let Some(labels_path) = &args.labels {
        let truth_path = args.truth.as_ref().expect("clap enforces --truth");
        let truth = truth_partition(truth_path)?;
        let labels: LabelsFile = files::read_json(labels_path)?;
        let estimate = Partition::try_from(labels.labels).map_err(|source| CliError::Parse {
            path: labels_path.clone(),
            source,
        })?;
        vec![Score {
            method: "labels".into(),
            replicate: labels_path.display().to_string(),
            rand_index: rand_index(&estimate, &truth)?,
        }]
    } else {
        let mut reps: Vec<(String, PathBuf, PathBuf)> = args
            .replicates
            .iter()
            .map(|d| (d.display().to_string(), d.join("data.csv"), d.join("truth.json")))
            .collect();
        if let Some(input) = &args.input {
            let truth = args.truth.clone().expect("clap enforces --truth");
            reps.push((input.display().to_string(), input.clone(), truth));
        }
        if reps.is_empty() {
            return Err(CliError::Usage(
                "give replicate directories, --input with --truth, or --labels with --truth".into(),
            ));
        }
        let per_rep = parallel_map(&reps, |r, (name, data, truth)| -> Result<Vec<Score>, CliError> {
            let truth = truth_partition(truth)?;
            args.method
                .iter()
                .map(|&m| {
                    Ok(Score {
                        method: m.name().into(),
                        replicate: name.clone(),
                        rand_index: score_method(m, args, data, &truth, r)?,
                    })
                })
                .collect()
        });
        let mut all = Vec::new();
        for r in per_rep {
            all.extend(r?);
        }
        all
    };

    for s in &scores {
        println!("{}\t{}\t{:.4}", s.method, s.replicate, s.rand_index);
    }
    let summary = summarize(&scores);
    for s in &summary {
        println!("{}\tmean {:.4}\tsd {:.4}\t(n={})", s.method, s.mean, s.sd, s.replicates);
    }
    if let Some(out) = &args.out {
        files::write_json(&out.join("evaluate.json"), &Report { scores, summary })?;
    }
    Ok(())
}
