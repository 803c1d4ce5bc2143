//! Dataset files: a synthetic CSV and a manifest of binary image tensors,
//! both loaded back through the same entry point.

use fscil::data::{encode_image, load_dataset, write_synth, DatasetFormat, SynthConfig};
use fscil::Image;

fn main() -> fscil::Result<()> {
    let dir = std::env::temp_dir().join("fscil_example_datasets");
    std::fs::create_dir_all(&dir).expect("create temp dir");

    let csv = write_synth(&SynthConfig { classes: 3, dim: 4, per_class: 5, spread: 0.3, seed: 1 }, &dir.join("blobs.csv"))?;
    let samples = load_dataset(&csv, DatasetFormat::Csv)?;
    println!("{}: {} samples, first {:?}", csv.display(), samples.len(), samples[0].payload.values());

    let mut manifest = String::from("id,label,path\n");
    for i in 0..4u8 {
        let img = Image { width: 2, height: 2, channels: 1, data: vec![f64::from(i) / 3.0; 4] };
        let name = format!("img{i}.fsim");
        std::fs::write(dir.join(&name), encode_image(&img)).expect("write image");
        manifest.push_str(&format!("{i},{},{name}\n", i % 2));
    }
    let manifest_path = dir.join("images.csv");
    std::fs::write(&manifest_path, manifest).expect("write manifest");
    let images = load_dataset(&manifest_path, DatasetFormat::Images)?;
    for s in &images {
        println!("image {} label {} -> {}", s.id, s.label, s.payload.describe());
    }

    std::fs::write(dir.join("img3.fsim"), b"FSIM\x02\x00").expect("write");
    match load_dataset(&manifest_path, DatasetFormat::Images) {
        Err(e) => println!("truncated tensor: [{}] {e}", e.code()),
        Ok(_) => unreachable!(),
    }
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}
