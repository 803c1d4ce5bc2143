//! Angular-margin loss on a single embedding: how the margin raises the
//! loss of a correctly classified sample, and the gradient on each cosine.

use fscil::loss::{angular_penalty_grad, angular_penalty_loss, ce_cosine_loss, cosine_logits, LossConfig};

fn main() -> fscil::Result<()> {
    let weights = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
    let feature = [0.9, 0.35, -0.2];
    let logits = cosine_logits(&feature, &weights)?;
    println!("cosines: {:?}", logits.as_slice());
    println!("plain cosine cross-entropy: {:.6}", ce_cosine_loss(&logits, 0)?);

    for margin in [0.0, 0.2, 0.4] {
        let cfg = LossConfig { scale: 30.0, margin };
        let loss = angular_penalty_loss(&logits, 0, &cfg)?;
        let grad = angular_penalty_grad(&logits, 0, &cfg)?;
        println!("s=30 m={margin:.1}: loss {loss:.6}, dL/dcos {grad:.4?}");
    }
    Ok(())
}
