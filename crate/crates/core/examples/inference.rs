//! Exact variable elimination against progressive sampling on one network,
//! for a range predicate and a per-value distribution.

use std::collections::BTreeMap;

use tuple_bubbles::inference::{infer, selectivity, Conditions, InferenceMethod, Region};
use tuple_bubbles::network::{learn_table_network, ModelParams, ValueClass};
use tuple_bubbles::synth;

fn main() -> tuple_bubbles::Result<()> {
    let db = synth::to_database(&synth::tree_table(20_000, 3))?;
    let table = db.table("T")?;
    let net = learn_table_network("T#0", table, BTreeMap::new(), &ModelParams::default());

    let a = net.require("a")?;
    let e = net.require("e")?;
    let mut conditions = Conditions::new();
    conditions.restrict_region(a, &Region::Interval { lo: 0, hi: 2 });

    let ve = selectivity(&net, &conditions, InferenceMethod::VariableElimination)?;
    println!("P(a in first three values) by VE: {ve:.6}");
    for samples in [100, 1000, 10_000, 100_000] {
        let ps = selectivity(
            &net,
            &conditions,
            InferenceMethod::ProgressiveSampling { samples, seed: 1 },
        )?;
        println!(
            "  PS with {samples:>6} samples: {ps:.6} (rel. error {:.3}%)",
            100.0 * (ps - ve).abs() / ve
        );
    }

    let dist = infer(&net, Some(e), &conditions, InferenceMethod::VariableElimination)?;
    let dict = table.dictionary(table.schema().position("e").expect("column e"));
    println!("P(e = v and condition):");
    for (i, p) in dist.entries.iter().enumerate() {
        if *p > 0.0 {
            let label = match dist.class(i) {
                ValueClass::Code(c) => dict.decode(c).to_string(),
                ValueClass::Range(b) => format!("{}..{}", dict.decode(b.min), dict.decode(b.max)),
            };
            println!("  {label}: {p:.4}");
        }
    }
    Ok(())
}
