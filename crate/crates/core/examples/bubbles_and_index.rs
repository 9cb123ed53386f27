//! Splits a relation into tuple bubbles, builds FK-join bubbles and probes
//! the per-bubble attribute index that guides bubble selection.

use tuple_bubbles::catalog::{parse_date, Key};
use tuple_bubbles::inference::Region;
use tuple_bubbles::partitioner::{build_bubble_index, create_bubbles, create_join_bubbles, PartitionConfig};
use tuple_bubbles::synth;

fn main() -> tuple_bubbles::Result<()> {
    let db = synth::to_database(&synth::correlated_orders(200, 3000, 5))?;
    let config = PartitionConfig::new(1000, 3, true)?;

    let mut bubbles = create_bubbles(&db, &config)?;
    bubbles.extend(create_join_bubbles(&db, &config)?);
    let dates = db.catalog().dictionary("Orders", "date")?.clone();
    let early = Region::Interval {
        lo: 0,
        hi: dates.upper_bound(Key::Num(parse_date("31.03.2020").expect("date") as f64)) - 1,
    };

    for b in &bubbles {
        let index = build_bubble_index(b);
        let date = index.attributes.get("Orders.date").and_then(Option::as_ref);
        println!(
            "{:<22} rows {:>5}  date codes {:>10}  may hold Q1 2020 orders: {}",
            b.id,
            b.n_rows(),
            date.map_or("-".to_string(), |d| format!("{}..{}", d.min, d.max)),
            index.may_match("Orders.date", &early)
        );
    }
    Ok(())
}
