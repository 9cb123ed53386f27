//! The two-table customer/orders example: a COUNT over an FK join answered
//! with a join bubble, with per-table chaining, and under join uniformity.

use tuple_bubbles::bench::exact_execute;
use tuple_bubbles::estimator::{estimate_result, EstimatorOptions, JoinEstimation};
use tuple_bubbles::model::{BubbleModel, BuildConfig};
use tuple_bubbles::network::ModelParams;
use tuple_bubbles::partitioner::PartitionConfig;
use tuple_bubbles::sql::parse_and_bind;
use tuple_bubbles::synth;

fn main() -> tuple_bubbles::Result<()> {
    let db = synth::to_database(&synth::orders_customers())?;
    let config = BuildConfig {
        partition: PartitionConfig::new(3, 2, true)?,
        params: ModelParams::exact(64),
    };
    let model = BubbleModel::build(&db, &config)?;
    for b in &model.bubbles {
        println!("bubble {:<22} {} rows", b.id, b.rows);
    }

    let sql = "SELECT COUNT(*) FROM Orders o, Customer c \
               WHERE o.c_key = c.c_key AND c.name = 'C4' AND o.date >= '01.03.2022'";
    let query = parse_and_bind(sql, &model.catalog)?;
    println!("\n{sql}\nexact: {:?}\n", exact_execute(&query, &db)?);

    let setups = [
        ("join bubbles", EstimatorOptions::default()),
        (
            "per-table chain",
            EstimatorOptions {
                use_join_bubbles: false,
                ..EstimatorOptions::default()
            },
        ),
        (
            "join uniformity",
            EstimatorOptions {
                join_estimation: JoinEstimation::Uniformity,
                ..EstimatorOptions::default()
            },
        ),
    ];
    for (name, options) in setups {
        println!("== {name}\n{}", estimate_result(&model, &query, &options)?);
    }
    Ok(())
}
