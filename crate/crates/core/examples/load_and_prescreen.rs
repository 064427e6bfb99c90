//! Load a package directory or tarball and list the static-rule hits per file.
//!
//! $ cargo run --example load_and_prescreen
//! $ cargo run --example load_and_prescreen -- path/to/pkg.tgz

use std::path::PathBuf;

use pkgsentry::corpus::load_package;
use pkgsentry::prescreen::{categories, scan_package, RuleSet};

fn main() {
    let path = std::env::args_os().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/golden/corporate-delegate-packages")
    });
    let pkg = load_package(&path).expect("package loads");
    println!("{} ({} files, {} bytes)", pkg.id(), pkg.files.len(), pkg.total_size_bytes);

    let rules = RuleSet::builtin();
    let flagged = scan_package(&pkg, &rules);
    for file in &pkg.files {
        let Some(findings) = flagged.get(&file.path) else {
            println!("  {}: clean", file.path);
            continue;
        };
        let cats: Vec<&str> = categories(findings).into_iter().map(|c| c.as_str()).collect();
        println!("  {}: {}", file.path, cats.join(", "));
        for f in findings {
            println!("    {:>3}  {:<8} {}", f.line, f.rule_id, f.excerpt);
        }
    }
}
