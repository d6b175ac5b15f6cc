//! Shared plumbing for the acceptance target: outcome lines and timing.

use std::time::Instant;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

/// Run one criterion, print its line, return whether it passed. A runtime
/// budget (seconds) turns an otherwise passing criterion into a failure.
pub fn run(id: u32, name: &str, budget: Option<f64>, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let mut o = f();
    let secs = t.elapsed().as_secs_f64();
    if let Some(b) = budget {
        if secs > b {
            o.pass = false;
            o.detail.push_str(&format!("; runtime {secs:.1}s exceeds {b:.0}s"));
        }
    }
    println!(
        "criterion {id:>2} {} {name}: {} [{secs:.1}s]",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    );
    o.pass
}

/// Largest and smallest entries.
pub fn spread(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}
