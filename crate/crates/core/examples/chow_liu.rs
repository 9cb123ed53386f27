//! Learns a Chow-Liu tree over a table with a known dependency structure and
//! prints the pairwise mutual information behind it.

use tuple_bubbles::network::{chow_liu_structure, entropy, mutual_information};
use tuple_bubbles::synth;

fn main() -> tuple_bubbles::Result<()> {
    let db = synth::to_database(&synth::tree_table(5000, 7))?;
    let table = db.table("T")?;
    let names: Vec<&str> = table.schema().attributes.iter().map(|a| a.name.as_str()).collect();

    println!("entropy:");
    for (i, n) in names.iter().enumerate() {
        println!("  {n}: {:.4}", entropy(table.column(i)));
    }
    println!("mutual information:");
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            let mi = mutual_information(table.column(i), table.column(j));
            println!("  {}-{}: {mi:.4}", names[i], names[j]);
        }
    }

    let tree = chow_liu_structure(table);
    println!("tree rooted at {}:", names[tree.root]);
    for (p, c) in tree.edges() {
        println!("  {} -> {}", names[p], names[c]);
    }
    Ok(())
}
