//! Runs the desk learning comparison and prints both summaries.
//!
//! Knobs come from the environment: STEPS, WARMUP, BATCH, LR, AUGMENT=0|1.

use depthscout_baselines::experiment::{run, ExperimentConfig};

fn env<T: std::str::FromStr>(k: &str, d: T) -> T {
    std::env::var(k).ok().and_then(|v| v.parse().ok()).unwrap_or(d)
}

fn main() {
    let mut cfg = ExperimentConfig::default();
    let t = &mut cfg.train;
    t.total_steps = env("STEPS", t.total_steps);
    t.warmup_steps = env("WARMUP", t.warmup_steps);
    t.batch_size = env("BATCH", t.batch_size);
    t.lr = env("LR", t.lr);
    t.augment.enabled = env("AUGMENT", t.augment.enabled as u8) == 1;
    let t = std::time::Instant::now();
    let r = run(&cfg, |s, l| {
        if s % 25 == 0 {
            eprintln!("step {s:5} loss {l:.4} t {:.0}s", t.elapsed().as_secs_f64());
        }
    })
    .unwrap();
    println!("train {:.0}s final loss {:.4}", r.train_seconds, r.final_loss);
    println!("pix2vox {:?}", r.network_summary());
    println!("mean    {:?}", r.mean_summary());
    for l in &r.network.aggregates.per_label {
        let m = r.mean_model.aggregates.per_label.iter().find(|m| m.label == l.label).unwrap();
        let d = |s: &depthscout_core::metrics::MetricStats, a: &str, b: &str| {
            (s.doe[a].mean.unwrap_or(f64::NAN) + s.doe[b].mean.unwrap_or(f64::NAN)) / 2.0
        };
        let found = r.network.rows.iter().filter(|row| row.label == l.label && row.doe.is_some()).count();
        println!(
            "{:16} dice {:.3} vs {:.3}  LR {:6.1} vs {:6.1}  SI {:6.1} vs {:6.1}  found {found}",
            l.label,
            l.stats.dice.mean.unwrap_or(0.0),
            m.stats.dice.mean.unwrap_or(0.0),
            d(&l.stats, "left", "right"),
            d(&m.stats, "left", "right"),
            d(&l.stats, "inferior", "superior"),
            d(&m.stats, "inferior", "superior"),
        );
    }
}
