//! Metrics for hand-entered confusion matrices, and file and cost reductions.
//!
//! $ cargo run --example eval_table4
//! CodeQL  P=0.75 R=0.97 F1=0.85
//! ...

use pkgsentry::evalharness::{compare_runs, metrics, ConfusionMatrix, RunTotals};
use pkgsentry::money::Money;

fn main() {
    for (name, cm) in [
        ("CodeQL", ConfusionMatrix::new(2117, 2254, 684, 60)),
        ("GPT-3", ConfusionMatrix::new(2128, 2740, 195, 52)),
        ("GPT-4", ConfusionMatrix::new(2089, 2932, 3, 90)),
    ] {
        println!("{name:<7} {}", metrics(&cm));
    }

    let totals = |files, gpt4: &str| RunTotals {
        manifest_digest: None,
        files_analyzed: files,
        costs: [("gpt-4".to_string(), Money::from_dollars(gpt4).unwrap())].into(),
    };
    let r = compare_runs(&totals(18_754, "2013.84"), &totals(4_146, "482.46")).unwrap();
    println!("files {} -> {}: {}", r.files.before, r.files.after, r.files.percent());
    let c = &r.costs["gpt-4"];
    println!("gpt-4 {} -> {}: {}", c.before, c.after, c.percent());
}
