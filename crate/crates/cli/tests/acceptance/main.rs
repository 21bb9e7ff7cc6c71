//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Numeric arguments select criteria, e.g. `-- 1 2 10`.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

#[path = "../common/mod.rs"]
mod common;
mod kernels;
mod learning;
mod pipeline;

struct Criterion {
    id: u8,
    what: &'static str,
    budget_s: Option<f64>,
    check: fn() -> Check,
}

const CRITERIA: [Criterion; 10] = [
    Criterion { id: 1, what: "depth renderer equals the scan oracle bitwise on 1000 masks", budget_s: Some(10.0), check: kernels::depth_oracle },
    Criterion { id: 2, what: "openings are idempotent and anti-extensive on 500 inputs each", budget_s: Some(10.0), check: kernels::openings },
    Criterion { id: 3, what: "every layer and the loss pass finite-difference checks on 20 shapes", budget_s: Some(60.0), check: learning::gradients },
    Criterion { id: 4, what: "forward shapes equal the config on 200 networks; conversion depth formula", budget_s: None, check: learning::shapes },
    Criterion { id: 5, what: "learning-rate schedule: warmup peak, linear ramp, vanishing end", budget_s: None, check: learning::schedule },
    Criterion { id: 6, what: "Dice and ASSD equal brute force on 500 pairs; DOE zero and covariant", budget_s: Some(30.0), check: kernels::metrics },
    Criterion { id: 7, what: "mean model: one sample is reproduced, predictions ignore the input", budget_s: None, check: learning::mean_model },
    Criterion { id: 8, what: "Pix2Vox beats the mean model on held-out phantoms (Dice +0.10, DOE LR and SI)", budget_s: Some(1800.0), check: learning::experiment },
    Criterion { id: 9, what: "true projections combine to the exact box on 500 masks", budget_s: None, check: kernels::projections },
    Criterion { id: 10, what: "CLI pipeline twice with one seed gives byte-identical outputs", budget_s: None, check: pipeline::determinism },
];

fn main() -> ExitCode {
    let selected: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in CRITERIA.iter().filter(|c| selected.is_empty() || selected.contains(&c.id)) {
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(c.check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        let outcome = match (outcome, c.budget_s) {
            (Ok(_), Some(b)) if secs > b => Err(format!("took {secs:.1} s, budget {b} s")),
            (o, _) => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(e) => ("FAIL", e),
        };
        failed += outcome.is_err() as usize;
        println!("{tag} criterion {:2}: {} [{secs:.1} s] {detail}", c.id, c.what);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
