use rand::Rng;
use serde::{Deserialize, Serialize};

/// `y = W2 relu(W1 x + b1) + b2`, weights stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedForward {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Intermediate values of one forward call, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct FfTrace {
    /// Input after dropout.
    pub input: Vec<f64>,
    /// Inverted-dropout multipliers (`0` or `1/(1-p)`), if dropout was applied.
    pub mask: Option<Vec<f64>>,
    pub pre: Vec<f64>,
    pub act: Vec<f64>,
    pub out: Vec<f64>,
}

fn glorot<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, fan_out: usize) -> Vec<f64> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..fan_in * fan_out)
        .map(|_| rng.gen_range(-bound..bound))
        .collect()
}

fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    b.iter()
        .enumerate()
        .map(|(r, &bias)| {
            let row = &w[r * n_in..(r + 1) * n_in];
            bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

impl FeedForward {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        FeedForward {
            input,
            hidden,
            output,
            w1: vec![0.0; hidden * input],
            b1: vec![0.0; hidden],
            w2: vec![0.0; output * hidden],
            b2: vec![0.0; output],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(rng: &mut R, input: usize, hidden: usize, output: usize) -> Self {
        let w1 = glorot(rng, input, hidden);
        let w2 = glorot(rng, hidden, output);
        FeedForward {
            input,
            hidden,
            output,
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: vec![0.0; output],
        }
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn tensors(&self) -> [(&'static str, &Vec<f64>); 4] {
        [
            ("w1", &self.w1),
            ("b1", &self.b1),
            ("w2", &self.w2),
            ("b2", &self.b2),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.trace(x, None).out
    }

    pub fn trace(&self, x: &[f64], mask: Option<Vec<f64>>) -> FfTrace {
        debug_assert_eq!(x.len(), self.input);
        let input: Vec<f64> = match &mask {
            Some(m) => x.iter().zip(m).map(|(a, b)| a * b).collect(),
            None => x.to_vec(),
        };
        let pre = affine(&self.w1, &self.b1, &input);
        let act: Vec<f64> = pre.iter().map(|&z| z.max(0.0)).collect();
        let out = affine(&self.w2, &self.b2, &act);
        FfTrace {
            input,
            mask,
            pre,
            act,
            out,
        }
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient with
    /// respect to the (pre-dropout) input.
    #[allow(clippy::needless_range_loop)]
    pub fn backward(&self, trace: &FfTrace, d_out: &[f64], grad: &mut FeedForward) -> Vec<f64> {
        let (n_in, n_h) = (self.input, self.hidden);
        let mut d_act = vec![0.0; n_h];
        for (o, &g) in d_out.iter().enumerate() {
            grad.b2[o] += g;
            let w_row = &self.w2[o * n_h..(o + 1) * n_h];
            let g_row = &mut grad.w2[o * n_h..(o + 1) * n_h];
            for k in 0..n_h {
                g_row[k] += g * trace.act[k];
                d_act[k] += g * w_row[k];
            }
        }
        let mut d_in = vec![0.0; n_in];
        for k in 0..n_h {
            if trace.pre[k] <= 0.0 {
                continue;
            }
            let g = d_act[k];
            grad.b1[k] += g;
            let w_row = &self.w1[k * n_in..(k + 1) * n_in];
            let g_row = &mut grad.w1[k * n_in..(k + 1) * n_in];
            for i in 0..n_in {
                g_row[i] += g * trace.input[i];
                d_in[i] += g * w_row[i];
            }
        }
        if let Some(mask) = &trace.mask {
            for (d, m) in d_in.iter_mut().zip(mask) {
                *d *= m;
            }
        }
        d_in
    }
}
