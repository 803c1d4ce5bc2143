//! Component ablation on blob tasks: median final harmonic accuracy over
//! seeds for the full method and for variants with parts switched off.
//!
//! `cargo run --release --example ablation -- [seeds]`

use fscil::config::{LossKind, RunConfig};
use fscil::data::{synth_blobs, SynthConfig};
use fscil::experiment::run_in_memory;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

type Variant = (&'static str, fn(&mut RunConfig));

fn no_aug(c: &mut RunConfig) {
    c.flags.class_aug = false;
    c.flags.two_view = false;
}

fn no_proj(c: &mut RunConfig) {
    no_aug(c);
    c.flags.projection = false;
}

fn main() -> fscil::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);

    let variants: [Variant; 5] = [
        ("full", |_| {}),
        ("unbalanced", |c| c.flags.balance = false),
        ("angular + projection", no_aug),
        ("angular", no_proj),
        ("cross-entropy", |c| {
            no_proj(c);
            c.flags.loss = LossKind::Ce;
        }),
    ];

    println!("{:<22} {:>10} {:>10}", "variant", "harmonic", "average");
    for (name, tweak) in variants {
        let mut harmonic = Vec::new();
        let mut average = Vec::new();
        for seed in 0..seeds {
            let data = synth_blobs(&SynthConfig { classes: 18, dim: 16, per_class: 200, spread: 1.0, seed })?;
            let mut cfg = RunConfig::new("blobs");
            cfg.seed = seed;
            tweak(&mut cfg);
            let report = run_in_memory(&cfg, &data)?.report;
            harmonic.push(report.final_harmonic().unwrap_or(0.0));
            average.push(report.sessions.last().map_or(0.0, |s| s.average));
        }
        println!("{name:<22} {:>9.1}% {:>9.1}%", 100.0 * median(harmonic), 100.0 * median(average));
    }
    Ok(())
}
