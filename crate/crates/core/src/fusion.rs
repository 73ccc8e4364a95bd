//! Early cross-modal fusion on dense matrices.
//!
//! Visual tokens `I` (`HW x d`) attend to word features `S` (`L x d`):
//!
//! ```text
//! Q = (I + P_v) Wq^T      K = (S + P_l) Wk^T      V = S Wv^T
//! out = (Q K^T / sqrt(d)) V + I
//! ```
//!
//! Rows are tokens, and a projection `W` maps a row `x` to `W x`, hence the
//! transposes. The attention weights are used unnormalized; a softmax over
//! words is available through [`FusionOptions::softmax`] but is not the
//! canonical form.

use nalgebra::DMatrix;

use crate::error::FusionError;

pub type Matrix = DMatrix<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct FusionInput {
    /// Flattened visual features, `HW x d`.
    pub visual: Matrix,
    /// Word features, `L x d`.
    pub linguistic: Matrix,
    pub pos_visual: Matrix,
    pub pos_linguistic: Matrix,
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FusionOptions {
    /// Row biases added after each projection.
    pub bias_q: Option<Vec<f64>>,
    pub bias_k: Option<Vec<f64>>,
    pub bias_v: Option<Vec<f64>>,
    /// Softmax-normalize the attention rows over words (non-canonical).
    pub softmax: bool,
}

impl FusionInput {
    pub fn dim(&self) -> usize {
        self.visual.ncols()
    }

    fn validate(&self, opts: &FusionOptions) -> Result<(), FusionError> {
        let d = self.dim();
        let (hw, l) = (self.visual.nrows(), self.linguistic.nrows());
        if d == 0 {
            return Err(FusionError::Dimension("feature width d must be positive".into()));
        }
        let expect = |name: &str, m: &Matrix, r: usize, c: usize| {
            if m.shape() == (r, c) {
                Ok(())
            } else {
                Err(FusionError::Dimension(format!(
                    "{name} is {}x{}, expected {r}x{c}",
                    m.nrows(),
                    m.ncols()
                )))
            }
        };
        expect("linguistic", &self.linguistic, l, d)?;
        expect("pos_visual", &self.pos_visual, hw, d)?;
        expect("pos_linguistic", &self.pos_linguistic, l, d)?;
        expect("w_q", &self.w_q, d, d)?;
        expect("w_k", &self.w_k, d, d)?;
        expect("w_v", &self.w_v, d, d)?;
        for (name, b) in [("bias_q", &opts.bias_q), ("bias_k", &opts.bias_k), ("bias_v", &opts.bias_v)] {
            if let Some(b) = b {
                if b.len() != d {
                    return Err(FusionError::Dimension(format!("{name} has {} entries, expected {d}", b.len())));
                }
            }
        }
        Ok(())
    }
}

fn project(x: &Matrix, w: &Matrix, bias: &Option<Vec<f64>>) -> Matrix {
    let mut y = x * w.transpose();
    if let Some(b) = bias {
        for mut row in y.row_iter_mut() {
            for (v, bj) in row.iter_mut().zip(b) {
                *v += bj;
            }
        }
    }
    y
}

fn softmax_rows(a: &mut Matrix) {
    for mut row in a.row_iter_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// Intermediate products of a forward pass.
#[derive(Debug, Clone)]
pub struct FusionTrace {
    pub q: Matrix,
    pub k: Matrix,
    pub v: Matrix,
    /// Attention weights `Q K^T / sqrt(d)` (softmaxed if requested), `HW x L`.
    pub attention: Matrix,
    pub fused: Matrix,
}

/// Fused features, same shape as `input.visual`.
pub fn early_fuse(input: &FusionInput) -> Result<Matrix, FusionError> {
    Ok(early_fuse_with(input, &FusionOptions::default())?.fused)
}

pub fn early_fuse_with(input: &FusionInput, opts: &FusionOptions) -> Result<FusionTrace, FusionError> {
    input.validate(opts)?;
    let scale = (input.dim() as f64).sqrt();
    let q = project(&(&input.visual + &input.pos_visual), &input.w_q, &opts.bias_q);
    let k = project(&(&input.linguistic + &input.pos_linguistic), &input.w_k, &opts.bias_k);
    let v = project(&input.linguistic, &input.w_v, &opts.bias_v);
    let mut attention = &q * k.transpose() / scale;
    if opts.softmax {
        softmax_rows(&mut attention);
    }
    let fused = &attention * &v + &input.visual;
    Ok(FusionTrace { q, k, v, attention, fused })
}

/// Gradients of a scalar loss through the canonical (bias-free, no softmax)
/// fusion, given the upstream gradient `dL/d out`.
#[derive(Debug, Clone)]
pub struct FusionGrads {
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
    pub visual: Matrix,
    pub linguistic: Matrix,
}

pub fn early_fuse_backward(input: &FusionInput, upstream: &Matrix) -> Result<FusionGrads, FusionError> {
    let t = early_fuse_with(input, &FusionOptions::default())?;
    if upstream.shape() != input.visual.shape() {
        return Err(FusionError::Dimension("upstream gradient must match output shape".into()));
    }
    let scale = (input.dim() as f64).sqrt();
    let xq = &input.visual + &input.pos_visual;
    let xk = &input.linguistic + &input.pos_linguistic;

    let d_attn = upstream * t.v.transpose();
    let d_v = t.attention.transpose() * upstream;
    let d_q = &d_attn * &t.k / scale;
    let d_k = d_attn.transpose() * &t.q / scale;

    Ok(FusionGrads {
        w_q: d_q.transpose() * &xq,
        w_k: d_k.transpose() * &xk,
        w_v: d_v.transpose() * &input.linguistic,
        visual: upstream + &d_q * &input.w_q,
        linguistic: &d_k * &input.w_k + &d_v * &input.w_v,
    })
}

fn sinusoid_1d(positions: usize, d: usize) -> Matrix {
    Matrix::from_fn(positions, d, |pos, c| {
        let i = (c / 2) as f64;
        let angle = pos as f64 / 10000f64.powf(2.0 * i / d as f64);
        if c % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

/// Sinusoidal embedding for a 1-D sequence: channel `2i` holds
/// `sin(pos / 10000^(2i/d))`, channel `2i+1` the matching cosine.
pub fn sinusoidal_pos(len: usize, d: usize) -> Result<Matrix, FusionError> {
    if d == 0 || !d.is_multiple_of(2) {
        return Err(FusionError::Width("a positive even number", d));
    }
    Ok(sinusoid_1d(len, d))
}

/// 2-D embedding for an `h x w` grid flattened row-major: the first `d/2`
/// channels encode the row, the rest the column.
pub fn sinusoidal_pos_2d(h: usize, w: usize, d: usize) -> Result<Matrix, FusionError> {
    if d == 0 || !d.is_multiple_of(4) {
        return Err(FusionError::Width("a positive multiple of 4", d));
    }
    let half = d / 2;
    let rows = sinusoid_1d(h, half);
    let cols = sinusoid_1d(w, half);
    Ok(Matrix::from_fn(h * w, d, |t, c| {
        let (y, x) = (t / w, t % w);
        if c < half {
            rows[(y, c)]
        } else {
            cols[(x, c - half)]
        }
    }))
}

/// Central-difference gradient of `f` at `x`.
pub fn numeric_grad(
    f: impl Fn(&Matrix) -> f64,
    x: &Matrix,
    step: f64,
) -> Result<Matrix, FusionError> {
    let mut probe = x.clone();
    let mut grad = Matrix::zeros(x.nrows(), x.ncols());
    for idx in 0..x.len() {
        let orig = probe[idx];
        probe[idx] = orig + step;
        let up = f(&probe);
        probe[idx] = orig - step;
        let down = f(&probe);
        probe[idx] = orig;
        if !(up.is_finite() && down.is_finite()) {
            return Err(FusionError::NonFinite);
        }
        grad[idx] = (up - down) / (2.0 * step);
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_input(seed: u64, hw: usize, l: usize, d: usize) -> FusionInput {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FusionInput {
            visual: random(&mut rng, hw, d),
            linguistic: random(&mut rng, l, d),
            pos_visual: random(&mut rng, hw, d),
            pos_linguistic: random(&mut rng, l, d),
            w_q: random(&mut rng, d, d),
            w_k: random(&mut rng, d, d),
            w_v: random(&mut rng, d, d),
        }
    }

    #[test]
    fn hand_case_d1() {
        let one = |v: f64| Matrix::from_element(1, 1, v);
        let input = FusionInput {
            visual: one(2.0),
            linguistic: one(3.0),
            pos_visual: one(0.0),
            pos_linguistic: one(0.0),
            w_q: one(1.0),
            w_k: one(1.0),
            w_v: one(1.0),
        };
        assert_eq!(early_fuse(&input).unwrap()[(0, 0)], 20.0);
    }

    #[test]
    fn zero_language_is_identity() {
        let mut input = random_input(3, 6, 4, 8);
        input.linguistic.fill(0.0);
        assert_eq!(early_fuse(&input).unwrap(), input.visual);
    }

    #[test]
    fn shape_errors() {
        let mut input = random_input(1, 4, 3, 8);
        input.w_k = Matrix::zeros(8, 7);
        assert!(matches!(early_fuse(&input), Err(FusionError::Dimension(_))));
        let mut input = random_input(1, 4, 3, 8);
        input.pos_visual = Matrix::zeros(3, 8);
        assert!(early_fuse(&input).is_err());
        let input = random_input(1, 4, 3, 8);
        let opts = FusionOptions { bias_q: Some(vec![0.0; 3]), ..Default::default() };
        assert!(early_fuse_with(&input, &opts).is_err());
    }

    #[test]
    fn value_projection_is_linear() {
        let input = random_input(5, 4, 3, 8);
        let base = early_fuse(&input).unwrap() - &input.visual;
        let mut scaled = input.clone();
        scaled.w_v *= 3.0;
        let attn = early_fuse(&scaled).unwrap() - &scaled.visual;
        assert!((attn - base * 3.0).amax() < 1e-12);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let input = random_input(9, 5, 4, 8);
        let t = early_fuse_with(&input, &FusionOptions { softmax: true, ..Default::default() }).unwrap();
        for row in t.attention.row_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn biases_shift_projections() {
        let input = random_input(2, 3, 2, 4);
        let opts = FusionOptions { bias_v: Some(vec![1.0, 0.0, -1.0, 0.5]), ..Default::default() };
        let t = early_fuse_with(&input, &opts).unwrap();
        let plain = early_fuse_with(&input, &FusionOptions::default()).unwrap();
        assert!(((&t.v - &plain.v).row(0)[0] - 1.0).abs() < 1e-15);
        assert!(((&t.v - &plain.v).row(1)[3] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn positions() {
        let p = sinusoidal_pos(5, 6).unwrap();
        assert_eq!(p.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(p, sinusoidal_pos(5, 6).unwrap());
        assert!(p.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert_ne!(p.row(1), p.row(2));
        assert!(sinusoidal_pos(4, 5).is_err());
        assert!(sinusoidal_pos(4, 0).is_err());
        let p2 = sinusoidal_pos_2d(2, 3, 8).unwrap();
        assert_eq!(p2.shape(), (6, 8));
        assert!(sinusoidal_pos_2d(2, 3, 6).is_err());
        for a in 0..6 {
            for b in a + 1..6 {
                assert_ne!(p2.row(a), p2.row(b));
            }
        }
    }

    #[test]
    fn numeric_grad_basics() {
        let x = Matrix::from_row_slice(2, 2, &[0.5, -1.0, 2.0, 3.0]);
        let g = numeric_grad(|m| m.sum(), &x, 1e-5).unwrap();
        assert!((g - Matrix::from_element(2, 2, 1.0)).amax() < 1e-9);
        let g = numeric_grad(|m| 0.5 * m.norm_squared(), &x, 1e-5).unwrap();
        assert!((g - &x).amax() < 1e-6);
        assert_eq!(
            numeric_grad(|m| if m[(0, 0)] > 0.5 { f64::NAN } else { 0.0 }, &x, 1e-5),
            Err(FusionError::NonFinite)
        );
    }

    #[test]
    fn backward_matches_finite_differences() {
        let input = random_input(11, 4, 3, 6);
        let ones = Matrix::from_element(4, 6, 1.0);
        let g = early_fuse_backward(&input, &ones).unwrap();
        let total = |inp: &FusionInput| early_fuse(inp).unwrap().sum();
        let rel = |a: &Matrix, b: &Matrix| (a - b).amax() / b.amax().max(1e-12);

        let fd = numeric_grad(|w| total(&FusionInput { w_q: w.clone(), ..input.clone() }), &input.w_q, 1e-5).unwrap();
        assert!(rel(&g.w_q, &fd) < 1e-4);
        let fd = numeric_grad(|w| total(&FusionInput { w_k: w.clone(), ..input.clone() }), &input.w_k, 1e-5).unwrap();
        assert!(rel(&g.w_k, &fd) < 1e-4);
        let fd = numeric_grad(|w| total(&FusionInput { w_v: w.clone(), ..input.clone() }), &input.w_v, 1e-5).unwrap();
        assert!(rel(&g.w_v, &fd) < 1e-4);
        let fd = numeric_grad(|x| total(&FusionInput { visual: x.clone(), ..input.clone() }), &input.visual, 1e-5).unwrap();
        assert!(rel(&g.visual, &fd) < 1e-4);
        let fd = numeric_grad(|s| total(&FusionInput { linguistic: s.clone(), ..input.clone() }), &input.linguistic, 1e-5).unwrap();
        assert!(rel(&g.linguistic, &fd) < 1e-4);
    }
}
