//! Balanced base prototypes: each base class keeps only its `k` most
//! central exemplars, matching the shot count of incremental classes.

use fscil::config::RunConfig;
use fscil::data::{synth_blobs, SynthConfig};
use fscil::model::train_base;
use fscil::prototype::{add_incremental_prototypes, build_base_prototypes, build_full_prototypes, ncm_classify};

fn main() -> fscil::Result<()> {
    let data = synth_blobs(&SynthConfig { classes: 6, dim: 16, per_class: 80, spread: 1.0, seed: 9 })?;
    let (base, novel): (Vec<_>, Vec<_>) = data.into_iter().partition(|s| s.label < 4);

    let mut run = RunConfig::new("blobs");
    run.train.epochs = 6;
    let backbone = train_base(&base, &run.train_config(16))?.params.into_backbone();

    let balanced = build_base_prototypes(&backbone, &base, 5)?;
    let full = build_full_prototypes(&backbone, &base)?;
    for (class, p) in balanced.iter() {
        let ids: Vec<String> = p.sources.iter().map(u64::to_string).collect();
        println!("class {class}: {} exemplars [{}]", p.shots, ids.join(", "));
    }

    let shots: Vec<_> = novel.iter().filter(|s| s.id % 80 < 5).cloned().collect();
    let queries: Vec<_> = novel.iter().filter(|s| s.id % 80 >= 5).collect();
    for (name, store) in [("balanced", balanced), ("full", full)] {
        let store = add_incremental_prototypes(store, &backbone, &shots)?;
        let mut right = 0;
        for q in &queries {
            if ncm_classify(&store, &backbone.extract_feature(&q.payload)?)? == q.label {
                right += 1;
            }
        }
        println!("{name:>8} base prototypes: novel-class accuracy {right}/{}", queries.len());
    }
    Ok(())
}
