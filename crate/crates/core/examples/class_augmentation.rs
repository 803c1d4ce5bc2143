//! Class augmentation: the pair label space and a mixed training batch.

use fscil::augment::{build_augmented_label_space, mix_pair, sample_class_augmented_batch};
use fscil::data::{synth_blobs, SynthConfig};
use fscil::{Payload, Rng};

fn main() -> fscil::Result<()> {
    for classes in [5, 10, 60] {
        let space = build_augmented_label_space(classes);
        println!(
            "{classes} classes -> {} synthetic labels, {} total",
            space.synthetic_count(),
            space.total()
        );
    }

    let space = build_augmented_label_space(5);
    let label = space.encode(1, 3).expect("valid pair");
    println!("pair (1, 3) -> label {label} -> {:?}", space.decode(label));

    let mixed = mix_pair(&Payload::Vector(vec![1.0, 0.0]), &Payload::Vector(vec![0.0, 1.0]), 0.4)?;
    println!("mix of e0 and e1 at lambda 0.4: {:?}", mixed.values());

    let data = synth_blobs(&SynthConfig { classes: 5, dim: 4, per_class: 20, spread: 0.5, seed: 3 })?;
    let batch = sample_class_augmented_batch(&data, &space, 8, 0.5, &mut Rng::new(7))?;
    for s in &batch {
        let kind = match space.decode(s.label) {
            Some((i, j)) if s.label >= space.original_classes() => format!("mix of {i} and {j}"),
            _ => "original".to_string(),
        };
        println!("id {:>20} label {:>2} ({kind})", s.id, s.label);
    }
    Ok(())
}
