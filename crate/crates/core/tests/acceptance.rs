//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tuple_bubbles::bench::{exact_execute, generate_workload, q_error, run_benchmark, BenchConfig, WorkloadSpec};
use tuple_bubbles::catalog::Database;
use tuple_bubbles::estimator::{
    combination_weights, combine_estimates, estimate_result, Estimate, EstimatorOptions, JoinEstimation,
    APPEARANCE_THRESHOLD,
};
use tuple_bubbles::inference::{selectivity, variable_elimination, InferenceMethod, Region};
use tuple_bubbles::model::{directory_bytes, BubbleModel, BuildConfig};
use tuple_bubbles::network::{chow_liu_structure, ModelParams};
use tuple_bubbles::partitioner::PartitionConfig;
use tuple_bubbles::sql::{parse_and_bind, Aggregate};
use tuple_bubbles::synth;

use common::*;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let db = synth::to_database(&synth::orders_customers()).map_err(|e| e.to_string())?;
    let config = BuildConfig {
        partition: PartitionConfig {
            theta: 3,
            k: 2,
            join_mode: true,
        },
        params: ModelParams::exact(64),
    };
    let model = BubbleModel::build(&db, &config).map_err(|e| e.to_string())?;
    let sql = "SELECT COUNT(*) FROM Orders o, Customer c \
               WHERE o.c_key = c.c_key AND c.name = 'C4' AND o.date >= '01.03.2022'";
    let query = parse_and_bind(sql, &model.catalog).map_err(|e| e.to_string())?;
    let truth = exact_execute(&query, &db).map_err(|e| e.to_string())?;
    let joined = estimate_result(&model, &query, &EstimatorOptions::default()).map_err(|e| e.to_string())?;
    let uniform = estimate_result(
        &model,
        &query,
        &EstimatorOptions {
            join_estimation: JoinEstimation::Uniformity,
            ..EstimatorOptions::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let detail = format!(
        "truth {truth:?}, join bubbles {:?}, uniformity {:?}, {elapsed:?}",
        joined.value, uniform.value
    );
    check(
        truth == Some(2.0)
            && joined.value == Some(2.0)
            && q_error(truth, joined.value) == 1.0
            && uniform.value.is_some_and(|v| (v - 1.0).abs() < 1e-9)
            && elapsed < Duration::from_secs(1),
        detail,
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    for seed in 0..100 {
        let net = random_network(1000 + seed, 4, 6);
        for round in 0..6 {
            let ev = random_evidence(&mut rng, &net, round % 2 == 1);
            let conditions = conditions_for(&ev);
            let targets = std::iter::once(None).chain((0..net.nodes.len()).map(Some));
            for target in targets {
                let (per_class, total) = enumerate_joint(&net, target, &ev);
                let dist = variable_elimination(&net, target, &conditions).map_err(|e| e.to_string())?;
                worst = worst.max((dist.mass - total).abs());
                if target.is_some() {
                    for (a, b) in dist.entries.iter().zip(&per_class) {
                        worst = worst.max((a - b).abs());
                    }
                }
                checks += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-9 && elapsed < Duration::from_secs(10),
        format!("{checks} queries, max abs error {worst:.2e}, {elapsed:?}"),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
        let width = rng.gen_range(2..=6);
        let n_rows = rng.gen_range(40..300);
        let rows = random_rows(&mut rng, width, 5, n_rows);
        let table = int_table("M", &rows);
        let tree = chow_liu_structure(&table);
        let mi = |i: usize, j: usize| oracle_mi(table.column(i), table.column(j));
        let learned: f64 = tree.edges().iter().map(|&(p, c)| mi(p, c)).sum();
        let best = all_spanning_trees(width)
            .iter()
            .map(|t| t.iter().map(|&(a, b)| mi(a, b)).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max((best - learned).abs());
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-9 && elapsed < Duration::from_secs(30),
        format!("50 tables, max gap to best spanning tree {worst:.2e}, {elapsed:?}"),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut cases = 0;
    let mut seed = 0;
    let mut worst_large: f64 = 0.0;
    let mut within_small = 0;
    while cases < 50 {
        seed += 1;
        let net = random_network(4000 + seed, 4, 6);
        let mut regions: Vec<(usize, Region)> = Vec::new();
        for n in 0..net.nodes.len() {
            if rng.gen_bool(0.6) {
                let card = net.domain(n).classes() as u32;
                let lo = rng.gen_range(0..card);
                regions.push((
                    n,
                    Region::Interval {
                        lo,
                        hi: rng.gen_range(lo..card),
                    },
                ));
            }
        }
        if regions.is_empty() {
            continue;
        }
        let conditions = region_conditions(&regions);
        let exact = selectivity(&net, &conditions, InferenceMethod::VariableElimination).map_err(|e| e.to_string())?;
        if exact < 0.01 {
            continue;
        }
        cases += 1;
        let ps = |samples| {
            selectivity(
                &net,
                &conditions,
                InferenceMethod::ProgressiveSampling { samples, seed },
            )
            .map(|p| (p - exact).abs() / exact)
            .map_err(|e| e.to_string())
        };
        worst_large = worst_large.max(ps(100_000)?);
        if ps(1000)? <= 0.15 {
            within_small += 1;
        }
    }
    let elapsed = start.elapsed();
    check(
        worst_large <= 0.02 && within_small * 10 >= cases * 9 && elapsed < Duration::from_secs(120),
        format!(
            "{cases} cases, S=100000 max rel error {:.3}%, S=1000 within 15% in {within_small}/{cases}, {elapsed:?}",
            worst_large * 100.0
        ),
    )
}

/// COUNT queries touching one attribute or one parent-child pair of the
/// learned tree of a single-bubble model.
fn exactness_queries(model: &BubbleModel, db: &Database) -> Vec<String> {
    let net = &model.bubbles[0].network;
    let table = db.table("T").unwrap();
    let short = |node: usize| net.nodes[node].name.trim_start_matches("T.").to_string();
    let values = |attr: &str| -> Vec<String> {
        let dict = table.dictionary(table.schema().position(attr).unwrap());
        (0..dict.len() as u32).map(|c| dict.decode(c).to_string()).collect()
    };
    let mut out = Vec::new();
    for node in 0..net.nodes.len() {
        let a = short(node);
        for v in values(&a) {
            out.push(format!("SELECT COUNT(*) FROM T WHERE {a} = {v}"));
            out.push(format!("SELECT COUNT(*) FROM T WHERE {a} <= {v}"));
        }
    }
    for (p, c) in net.edges() {
        let (a, b) = (short(p), short(c));
        let (va, vb) = (values(&a), values(&b));
        for (i, x) in va.iter().enumerate() {
            let y = &vb[i % vb.len()];
            out.push(format!("SELECT COUNT(*) FROM T WHERE {a} = {x} AND {b} = {y}"));
            out.push(format!("SELECT COUNT(*) FROM T WHERE {a} >= {x} AND {b} <= {y}"));
        }
    }
    out
}

fn exactness_model(db: &Database, theta: usize) -> BubbleModel {
    let config = BuildConfig {
        partition: PartitionConfig {
            theta,
            k: 3,
            join_mode: false,
        },
        params: ModelParams::exact(64),
    };
    BubbleModel::build(db, &config).unwrap()
}

fn worst_q_error(model: &BubbleModel, db: &Database, queries: &[String]) -> std::result::Result<f64, String> {
    let mut worst: f64 = 1.0;
    for sql in queries {
        let q = parse_and_bind(sql, &model.catalog).map_err(|e| format!("{sql}: {e}"))?;
        let truth = exact_execute(&q, db).map_err(|e| e.to_string())?;
        let est = estimate_result(model, &q, &EstimatorOptions::default()).map_err(|e| format!("{sql}: {e}"))?;
        worst = worst.max(q_error(truth, est.value));
    }
    Ok(worst)
}

fn criterion_5() -> Outcome {
    let db = synth::to_database(&synth::tree_table(10_000, 5)).map_err(|e| e.to_string())?;
    let model = exactness_model(&db, 500_000);
    let queries = exactness_queries(&model, &db);
    let worst = worst_q_error(&model, &db, &queries)?;
    check(
        (worst - 1.0).abs() <= 1e-6,
        format!("{} queries, worst q-error {worst:.9}", queries.len()),
    )
}

fn criterion_6() -> Outcome {
    let db = synth::to_database(&synth::tree_table(10_000, 5)).map_err(|e| e.to_string())?;
    let single = exactness_model(&db, 500_000);
    let queries = exactness_queries(&single, &db);
    let split = exactness_model(&db, 1000);
    let parts = split.relation_bubbles("T").len();
    let worst = worst_q_error(&split, &db, &queries)?;
    check(
        parts == 3 && (worst - 1.0).abs() <= 1e-6,
        format!("{parts} bubbles, {} queries, worst q-error {worst:.9}", queries.len()),
    )
}

fn criterion_7() -> Outcome {
    let mut wins = 0;
    let mut lines = Vec::new();
    for seed in 1..=3 {
        let db = synth::to_database(&synth::correlated_orders(5000, 60_000, seed)).map_err(|e| e.to_string())?;
        let tb = BubbleModel::build(&db, &BuildConfig::default()).map_err(|e| e.to_string())?;
        let tbj = BubbleModel::build(
            &db,
            &BuildConfig {
                partition: PartitionConfig {
                    join_mode: true,
                    ..PartitionConfig::default()
                },
                ..BuildConfig::default()
            },
        )
        .map_err(|e| e.to_string())?;
        let workload = generate_workload(
            &db,
            &WorkloadSpec {
                queries: 100,
                joins: 1..=1,
                predicates: 1..=3,
                aggregates: vec![Aggregate::Count, Aggregate::Sum],
                seed,
            },
        )
        .map_err(|e| e.to_string())?;
        let configs = [
            BenchConfig {
                name: "TB".into(),
                model: &tb,
                options: EstimatorOptions {
                    use_join_bubbles: false,
                    ..EstimatorOptions::default()
                },
                model_bytes: 0,
            },
            BenchConfig {
                name: "TB_J".into(),
                model: &tbj,
                options: EstimatorOptions::default(),
                model_bytes: 0,
            },
        ];
        let report = run_benchmark(&db, &workload, &configs).map_err(|e| e.to_string())?;
        let (a, b) = (report.summary("TB").unwrap(), report.summary("TB_J").unwrap());
        let (ma, mb) = (a.mean.unwrap_or(f64::INFINITY), b.mean.unwrap_or(f64::INFINITY));
        if mb < ma && b.failed <= a.failed {
            wins += 1;
        }
        lines.push(format!(
            "seed {seed}: TB mean {ma:.4} ({} inf), TB_J mean {mb:.4} ({} inf)",
            a.failed, b.failed
        ));
    }
    check(wins >= 2, format!("{wins}/3 seeds; {}", lines.join("; ")))
}

fn criterion_8() -> Outcome {
    let relations = synth::correlated_orders(20_000, 1_000_000, 8);
    let csv = synth::csv_bytes(&relations);
    let db = synth::to_database(&relations).map_err(|e| e.to_string())?;
    let model = BubbleModel::build(&db, &BuildConfig::default()).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    model.save(dir.path()).map_err(|e| e.to_string())?;
    let bytes = directory_bytes(dir.path()).map_err(|e| e.to_string())?;
    let workload = generate_workload(
        &db,
        &WorkloadSpec {
            queries: 50,
            seed: 8,
            ..WorkloadSpec::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let options = EstimatorOptions {
        method: InferenceMethod::ProgressiveSampling { samples: 1000, seed: 8 },
        ..EstimatorOptions::default()
    };
    let mut total = Duration::ZERO;
    for sql in &workload {
        let q = parse_and_bind(sql, &model.catalog).map_err(|e| e.to_string())?;
        total += estimate_result(&model, &q, &options)
            .map_err(|e| e.to_string())?
            .latency;
    }
    let mean = total / workload.len() as u32;
    let ratio = bytes as f64 / csv as f64;
    check(
        ratio < 0.01 && mean < Duration::from_millis(50),
        format!(
            "model {bytes} B / csv {csv} B = {:.3}%, mean PS latency {:.3} ms",
            ratio * 100.0,
            mean.as_secs_f64() * 1e3
        ),
    )
}

fn criterion_9() -> Outcome {
    let est = |value: f64, count: f64| Estimate {
        value: Some(value),
        relevant: count >= APPEARANCE_THRESHOLD,
        count,
    };
    let estimates = [est(10.0, 1.0), est(20.0, 3.0), est(99.0, 0.2)];
    let value = combine_estimates(&estimates, Aggregate::Avg).map_err(|e| e.to_string())?;
    let weights = combination_weights(&estimates, Aggregate::Avg);
    let sum: f64 = weights.iter().sum();
    check(
        value == Some(17.5) && (sum - 1.0).abs() <= 1e-9 && weights[2] == 0.0,
        format!("AVG {value:?}, weights {weights:?}"),
    )
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn criterion_10() -> Outcome {
    let tbq = env!("CARGO_BIN_EXE_tbq");
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = synth::write_dataset(
        &synth::correlated_orders(400, 4000, 10),
        work.path(),
        &[("join_mode", "true".into()), ("seed", "10".into())],
    )
    .map_err(|e| e.to_string())?;
    let run = |tag: &str| -> std::result::Result<(Vec<(String, Vec<u8>)>, Vec<(String, Vec<u8>)>), String> {
        let model = work.path().join(format!("model-{tag}"));
        let out = work.path().join(format!("bench-{tag}"));
        let status = Command::new(tbq)
            .args(["build", "--config"])
            .arg(&config)
            .arg("--model")
            .arg(&model)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        let status = Command::new(tbq)
            .args(["bench", "--config"])
            .arg(&config)
            .arg("--model")
            .arg(format!("tbj={}", model.display()))
            .args(["--methods", "ve,ps,uniformity", "--queries", "40", "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        let reports = snapshot(&out)
            .into_iter()
            .filter(|(name, _)| name != "timing.csv")
            .collect();
        Ok((snapshot(&model), reports))
    };
    let (model_a, report_a) = run("a")?;
    let (model_b, report_b) = run("b")?;
    check(
        !model_a.is_empty() && model_a == model_b && report_a == report_b,
        format!(
            "{} model files, {} report files compared",
            model_a.len(),
            report_a.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("worked example: join bubbles give 2, uniformity gives 1", criterion_1),
        ("variable elimination matches full-joint enumeration", criterion_2),
        ("Chow-Liu tree has maximum MI sum", criterion_3),
        ("progressive sampling converges to VE", criterion_4),
        ("exact CPTs answer one-attribute and edge queries exactly", criterion_5),
        ("partition additivity with k=3 and sigma=ALL", criterion_6),
        ("join bubbles beat per-table chaining on correlated data", criterion_7),
        ("model under 1% of CSV bytes, PS under 50 ms", criterion_8),
        ("AVG combination weights", criterion_9),
        ("build and bench are deterministic", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2}: {name} ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {:>2}: {name} ({detail})", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
