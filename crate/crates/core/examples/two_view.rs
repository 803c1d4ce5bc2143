//! Two stochastic views of a vector sample and of a small image.

use fscil::augment::{two_view, ImageViews, VectorViews, ViewTransformSpec};
use fscil::{Image, Payload, Rng};

fn main() -> fscil::Result<()> {
    let mut rng = Rng::new(11);

    let x = Payload::Vector(vec![1.0, -0.5, 0.25, 2.0, 0.0, -1.5]);
    let spec = ViewTransformSpec::Vector(VectorViews { noise_sigma: 0.05, mask_prob: 0.2 });
    let (a, b) = two_view(&x, &spec, &mut rng)?;
    println!("vector view a: {:.3?}", a.values());
    println!("vector view b: {:.3?}", b.values());

    let (w, h) = (6, 4);
    let data = (0..3 * w * h).map(|i| (i % 7) as f64 / 6.0).collect();
    let img = Payload::Image(Image { width: w, height: h, channels: 3, data });
    let (a, _) = two_view(&img, &ViewTransformSpec::Image(ImageViews::default()), &mut rng)?;
    if let Payload::Image(view) = &a {
        println!("image view keeps shape {}x{}x{}", view.width, view.height, view.channels);
        for y in 0..h {
            let row: Vec<String> = (0..w).map(|x| format!("{:.2}", view.at(0, y, x))).collect();
            println!("  {}", row.join(" "));
        }
    }

    match two_view(&x, &ViewTransformSpec::Image(ImageViews::default()), &mut rng) {
        Err(e) => println!("image views on a vector: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
