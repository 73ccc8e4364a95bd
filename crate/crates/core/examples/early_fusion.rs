//! Early vision-language fusion on a toy feature map.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rmot::fusion::{early_fuse, early_fuse_with, sinusoidal_pos, sinusoidal_pos_2d, FusionInput, FusionOptions, Matrix};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (h, w, words, d) = (3, 4, 5, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut random = |r: usize, c: usize, s: f64| Matrix::from_fn(r, c, |_, _| rng.random_range(-s..s));

    let input = FusionInput {
        visual: random(h * w, d, 1.0),
        linguistic: random(words, d, 1.0),
        pos_visual: sinusoidal_pos_2d(h, w, d)?,
        pos_linguistic: sinusoidal_pos(words, d)?,
        w_q: random(d, d, 0.3),
        w_k: random(d, d, 0.3),
        w_v: random(d, d, 0.3),
    };
    let fused = early_fuse(&input)?;
    println!("fused {}x{}, mean change {:.4}", fused.nrows(), fused.ncols(), (&fused - &input.visual).abs().mean());

    let softmax = early_fuse_with(&input, &FusionOptions { softmax: true, ..Default::default() })?;
    println!("softmax attention, per-pixel sums over words: {:?}", softmax.attention.column_sum().iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>());

    let mut silent = input.clone();
    silent.linguistic = Matrix::zeros(words, d);
    println!("no words leaves the visual map unchanged: {}", early_fuse(&silent)? == silent.visual);
    Ok(())
}
