//! Train a backbone on the base classes of a blob dataset, then save and
//! reload it as a checkpoint.

use fscil::checkpoint;
use fscil::config::RunConfig;
use fscil::data::{synth_blobs, SynthConfig};
use fscil::math::cosine_similarity;
use fscil::model::train_base;

fn main() -> fscil::Result<()> {
    let data = synth_blobs(&SynthConfig { classes: 6, dim: 16, per_class: 120, spread: 1.0, seed: 5 })?;
    let mut run = RunConfig::new("blobs");
    run.train.epochs = 8;
    let cfg = run.train_config(16);

    let trained = train_base(&data, &cfg)?;
    for (epoch, loss) in trained.epoch_losses.iter().enumerate() {
        println!("epoch {epoch:>2}  loss {loss:.4}");
    }
    println!("{} parameters", trained.params.parameter_count());

    let f = |i: usize| trained.params.extract_feature(&data[i].payload);
    let same = cosine_similarity(&f(0)?, &f(1)?)?;
    let other = cosine_similarity(&f(0)?, &f(120)?)?;
    println!("feature cosine, same class {same:.3}, different class {other:.3}");

    let path = std::env::temp_dir().join("fscil_example_checkpoint.bin");
    checkpoint::save(&trained.params, &path)?;
    let back = checkpoint::load(&path)?;
    println!("checkpoint round trip at {}: identical = {}", path.display(), back == trained.params);
    std::fs::remove_file(&path).ok();
    Ok(())
}
