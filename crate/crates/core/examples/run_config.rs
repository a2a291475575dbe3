//! Driving a sweep from a TOML configuration, as the `mimo-ee` binary does.
//!
//! ```bash
//! cargo run --release -p mimo-ee --example run_config
//! ```
//! The same run from the command line:
//! ```bash
//! cargo run --release -p mimo-ee -- --config sweep.toml --out results
//! ```

use mimo_ee::cli::{parse_config, run, single_report};

const CONFIG: &str = r#"
games = ["mf_power", "sic_power"]
K = [2, 6]
n_rx = [4]
trials = 40
seed = 99

[system]
p_max_dbw = -25.0

[output]
formats = ["csv"]
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = parse_config(CONFIG)?;
    config.output.dir = std::env::temp_dir().join("mimo-ee-run-config");
    let outcome = run(&config)?;
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    print!(
        "{}",
        std::fs::read_to_string(config.output.dir.join("summary.csv"))?
    );

    config.k_values = vec![3];
    let report = single_report(&config)?;
    for g in &report.games {
        let powers: Vec<String> = g
            .users
            .iter()
            .map(|u| format!("{:.1}", u.power_dbw))
            .collect();
        println!(
            "{}: nash {}, powers dBW [{}]",
            g.game,
            g.verify_nash,
            powers.join(", ")
        );
    }

    let err = parse_config("trials = -1").unwrap_err();
    println!("\nrejected config: {err}");
    Ok(())
}
