//! A full few-shot incremental run on blobs: splits, base training,
//! per-session evaluation and the metrics report.

use fscil::config::RunConfig;
use fscil::data::{synth_blobs, SynthConfig};
use fscil::experiment::run_in_memory;

fn main() -> fscil::Result<()> {
    let data = synth_blobs(&SynthConfig { classes: 18, dim: 16, per_class: 200, spread: 1.0, seed: 0 })?;
    let cfg = RunConfig::new("blobs");
    let out = run_in_memory(&cfg, &data)?;

    for s in &out.splits {
        println!(
            "session {}: new classes {:?}, {} train, {} test",
            s.index,
            s.classes,
            s.train.len(),
            s.test.len()
        );
    }
    println!();
    print!("{}", out.report.to_csv());
    println!();
    print!("{}", out.report.sessions.last().expect("sessions").confusion.to_csv());
    Ok(())
}
