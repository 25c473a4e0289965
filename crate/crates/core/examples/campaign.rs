//! Run a small campaign from a config file and write its artifacts.
//!
//! ```sh
//! cargo run --release --example campaign -- configs/small.cfg /tmp/small
//! ```

use moblo::harness::{emit, recompute_metrics, run_campaign, ExperimentConfig};

fn main() -> moblo::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/small.cfg").into());
    let mut config = ExperimentConfig::load(&path)?;
    if let Some(out) = args.next() {
        config.output.dir = out.into();
    } else {
        config.output.dir = std::env::temp_dir().join("moblo_small");
    }

    let result = run_campaign(&config, None)?;
    emit(&result, &config.output.dir)?;
    println!("{} runs in {:.1} s", result.runs.len(), result.wall_time.as_secs_f64());
    for (method, summary) in &result.methods {
        let show = |k: &str| summary.aggregate.get(k).map_or("-".to_string(), |s| format!("{:.3} ± {:.3}", s.mean, s.std));
        println!("{method:<10} purity {}  gd {}  dp {}  iters {}", show("purity"), show("gd"), show("dp"), show("iters"));
    }

    let again = recompute_metrics(&config.output.dir, None)?;
    let same = result.methods.iter().all(|(m, s)| {
        s.instances.iter().zip(&again[m]).all(|(a, b)| a.report == b.report)
    });
    println!("metrics recomputed from files match: {same}");
    println!("artifacts in {}", config.output.dir.display());
    Ok(())
}
