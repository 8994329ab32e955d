//! Runs the model suite on the synthetic benchmark and prints the RMSE table.
//!
//! cargo run --release -p rentyield --example benchmark

use std::time::Instant;

use rentyield::evaluation::{default_suite_models, run_model_suite, suite_table, RunOptions};
use rentyield::regression::fit_rows;
use rentyield::synth::{generate, SynthConfig};
use rentyield::{features::encode, ModelSpec};

fn main() {
    let data = generate(&SynthConfig::default());
    for spec in ModelSpec::ALL {
        let fit = fit_rows(&encode(&data, spec).unwrap()).unwrap();
        println!("OLS {spec}: R2 {:.4} (n = {})", fit.r_squared, fit.n_observations);
    }
    let start = Instant::now();
    let cells = run_model_suite(&data, &default_suite_models(), &ModelSpec::ALL, &RunOptions::default());
    let reports: Vec<_> = cells.into_iter().map(|c| c.report).collect();
    print!("{}", suite_table(&reports));
    for r in &reports {
        println!("{} {} {:.0} ms", r.label, r.spec, r.runtime_ms);
    }
    println!("suite took {:.1} s", start.elapsed().as_secs_f64());
}
