//! Parses, prints and binds queries, and shows how unsupported or malformed
//! input is reported.

use tuple_bubbles::sql::{parse, parse_and_bind};
use tuple_bubbles::synth;

fn main() -> tuple_bubbles::Result<()> {
    let db = synth::to_database(&synth::orders_customers())?;
    let catalog = db.catalog();

    let sql = "select avg(o.price) from Orders o, Customer c \
               where o.c_key = c.c_key and o.price between 12 and 35 and o.price < 30 and c.name = 'C4'";
    let query = parse(sql)?;
    println!("canonical: {query}");
    let bound = parse_and_bind(sql, &catalog)?;
    println!("target: {:?}", bound.target);
    for j in &bound.joins {
        println!("join: {} = {}", j.referencing, j.referenced);
    }
    for p in &bound.predicates {
        println!("region on {}: {:?}", p.attribute, p.region);
    }

    for bad in [
        "SELECT SUM(price FROM Orders",
        "SELECT COUNT(*) FROM Orders GROUP BY c_key",
        "SELECT COUNT(*) FROM Orders o, Customer c WHERE o.o_key = c.c_key",
        "SELECT MAX(price) FROM Orders WHERE price = 'ten'",
    ] {
        let err = parse_and_bind(bad, &catalog).expect_err("rejected");
        println!("{bad}\n  -> {err}");
    }
    Ok(())
}
