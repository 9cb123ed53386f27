//! Benchmarks per-table bubbles against FK-join bubbles on correlated data,
//! with exact answers from the raw tables as the reference.

use tuple_bubbles::bench::{generate_workload, run_benchmark, BenchConfig, WorkloadSpec};
use tuple_bubbles::estimator::{EstimatorOptions, JoinEstimation};
use tuple_bubbles::inference::InferenceMethod;
use tuple_bubbles::model::{BubbleModel, BuildConfig};
use tuple_bubbles::partitioner::PartitionConfig;
use tuple_bubbles::sql::Aggregate;
use tuple_bubbles::synth;

fn main() -> tuple_bubbles::Result<()> {
    let relations = synth::correlated_orders(2000, 50_000, 11);
    let db = synth::to_database(&relations)?;
    let tb = BubbleModel::build(&db, &BuildConfig::default())?;
    let tbj = BubbleModel::build(
        &db,
        &BuildConfig {
            partition: PartitionConfig {
                join_mode: true,
                ..PartitionConfig::default()
            },
            ..BuildConfig::default()
        },
    )?;

    let workload = generate_workload(
        &db,
        &WorkloadSpec {
            queries: 100,
            joins: 1..=1,
            aggregates: vec![Aggregate::Count, Aggregate::Sum, Aggregate::Avg],
            seed: 11,
            ..WorkloadSpec::default()
        },
    )?;
    let ps = InferenceMethod::ProgressiveSampling {
        samples: 1000,
        seed: 11,
    };
    let chain = EstimatorOptions {
        use_join_bubbles: false,
        ..EstimatorOptions::default()
    };
    let configs = [
        BenchConfig {
            name: "TB/uniformity".into(),
            model: &tb,
            options: EstimatorOptions {
                join_estimation: JoinEstimation::Uniformity,
                ..chain
            },
            model_bytes: 0,
        },
        BenchConfig {
            name: "TB/ve".into(),
            model: &tb,
            options: chain,
            model_bytes: 0,
        },
        BenchConfig {
            name: "TB_J/ve".into(),
            model: &tbj,
            options: EstimatorOptions::default(),
            model_bytes: 0,
        },
        BenchConfig {
            name: "TB_J/ps".into(),
            model: &tbj,
            options: EstimatorOptions {
                method: ps,
                ..EstimatorOptions::default()
            },
            model_bytes: 0,
        },
    ];
    let report = run_benchmark(&db, &workload, &configs)?;
    println!(
        "{} queries over {} CSV bytes\n",
        workload.len(),
        synth::csv_bytes(&relations)
    );
    print!("{report}");
    Ok(())
}
