//! Parse the kinds of output models actually return.
//!
//! $ cargo run --example parse_sloppy_report

use pkgsentry::reportjson::{band_of, parse_report, Scale};

const SAMPLES: [&str; 5] = [
    "Here is my report:\n```json\n{\"purpose\": \"logs\", \"malware\": 0.1, \"securityRisk\": 0.2, \"confidence\": 0.9, \"obfuscated\": 0}\n```",
    "[\n\"purpose\": \"Sends env to a server\",\n\"malware\": 0.9,\n\"securityRisk\": 1.4,\n]",
    "{\"purpose\": \"Purpose of this source code\", \"malware\": 0, \"confidence\": 0.2}",
    "{\"purpose\": \"x\", \"sources\": \"y\", \"sinks\": \"z\", \"flows\": \"w\", \"anomalies\": \"none\", \"analysis\": \"cut off mid",
    "I can't help with that.",
];

fn main() {
    for raw in SAMPLES {
        println!("--- {:?}", raw.chars().take(48).collect::<String>());
        match parse_report(raw) {
            Ok(r) => {
                let band = band_of(r.malware, Scale::Malware).unwrap();
                println!("malware {} ({}), risk {}", r.malware, band.label, r.security_risk);
                for v in &r.violations {
                    println!("  repair {:?}: {}", v.kind, v.detail);
                }
            }
            Err(e) => println!("error: {e}"),
        }
    }
}
