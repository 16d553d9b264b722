//! From-scratch feedforward networks.
//!
//! Hidden layers compute `Linear -> (layer norm) -> activation`; the output
//! layer is linear only, so values are unbounded in both directions. Forward
//! passes can retain a full trace (pre-activations, normalized features,
//! post-activation values), which is what the analytic backward pass and the
//! activation-statistics diagnostics consume. All arithmetic is f64.

use ndarray::{Array1, Array2, Zip};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

pub mod adam;
pub mod checkpoint;
pub mod grad;

pub use adam::{adam_step, adam_step_in_place, soft_update, soft_update_in_place, AdamState};
pub use grad::mlp_grad;

/// Elementwise nonlinearity applied after each hidden layer.
///
/// `None` keeps the layer purely affine; it exists for the
/// linear-extrapolation studies, not for regular training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Activation {
    Relu,
    Gelu,
    Sigmoid,
    Silu,
    None,
}

const GELU_COEF: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_CUBIC: f64 = 0.044_715;

impl Activation {
    pub const ALL: [Activation; 5] = [
        Activation::Relu,
        Activation::Gelu,
        Activation::Sigmoid,
        Activation::Silu,
        Activation::None,
    ];

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            // tanh form of GELU; its derivative below is exact for this form.
            Activation::Gelu => {
                let u = GELU_COEF * (x + GELU_CUBIC * x * x * x);
                0.5 * x * (1.0 + u.tanh())
            }
            Activation::Sigmoid => sigmoid(x),
            Activation::Silu => x * sigmoid(x),
            Activation::None => x,
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            // subgradient 0 at the kink
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Gelu => {
                let u = GELU_COEF * (x + GELU_CUBIC * x * x * x);
                let t = u.tanh();
                let du = GELU_COEF * (1.0 + 3.0 * GELU_CUBIC * x * x);
                0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Silu => {
                let s = sigmoid(x);
                s * (1.0 + x * (1.0 - s))
            }
            Activation::None => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Gelu => "gelu",
            Activation::Sigmoid => "sigmoid",
            Activation::Silu => "silu",
            Activation::None => "none",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "gelu" => Ok(Activation::Gelu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "silu" => Ok(Activation::Silu),
            "none" => Ok(Activation::None),
            other => Err(Error::InvalidArgument(format!(
                "unknown activation `{other}` (expected relu|gelu|sigmoid|silu|none)"
            ))),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Architecture description: dimensions, nonlinearity, normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
    pub use_ln: bool,
    pub ln_eps: f64,
}

impl MlpSpec {
    pub fn new(
        input_dim: usize,
        hidden_dims: Vec<usize>,
        output_dim: usize,
        activation: Activation,
        use_ln: bool,
    ) -> Result<Self> {
        let spec = MlpSpec {
            input_dim,
            hidden_dims,
            output_dim,
            activation,
            use_ln,
            ln_eps: 1e-5,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_ln_eps(mut self, ln_eps: f64) -> Result<Self> {
        self.ln_eps = ln_eps;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::InvalidArgument(
                "input_dim and output_dim must be >= 1".into(),
            ));
        }
        if self.hidden_dims.is_empty() {
            return Err(Error::InvalidArgument("hidden_dims must be non-empty".into()));
        }
        if self.hidden_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument("hidden dims must be >= 1".into()));
        }
        if !(self.ln_eps > 0.0) || !self.ln_eps.is_finite() {
            return Err(Error::InvalidArgument("ln_eps must be a positive real".into()));
        }
        Ok(())
    }

    /// (fan_in, fan_out) for every layer, output layer last.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut fan_in = self.input_dim;
        for &h in &self.hidden_dims {
            dims.push((fan_in, h));
            fan_in = h;
        }
        dims.push((fan_in, self.output_dim));
        dims
    }

    pub fn n_layers(&self) -> usize {
        self.hidden_dims.len() + 1
    }
}

/// Learnable rescale/shift of a normalized feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LnAffine {
    pub scale: Array1<f64>,
    pub shift: Array1<f64>,
}

/// One affine layer; `ln` is present on hidden layers iff the spec asks for
/// normalization and is always absent on the output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// weight matrix, `[out, in]`
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub ln: Option<LnAffine>,
}

/// All parameters of one network, shape-tied to its spec. Also used as the
/// container for gradients and optimizer moments, which share this shape.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub spec: MlpSpec,
    pub layers: Vec<Layer>,
}

impl MlpParams {
    /// All tensors zero; LN affine (when present) also zero. Gradient /
    /// moment container.
    pub fn zeros_like(spec: &MlpSpec) -> MlpParams {
        let n_hidden = spec.hidden_dims.len();
        let layers = spec
            .layer_dims()
            .iter()
            .enumerate()
            .map(|(i, &(fan_in, fan_out))| Layer {
                w: Array2::zeros((fan_out, fan_in)),
                b: Array1::zeros(fan_out),
                ln: (spec.use_ln && i < n_hidden).then(|| LnAffine {
                    scale: Array1::zeros(fan_out),
                    shift: Array1::zeros(fan_out),
                }),
            })
            .collect();
        MlpParams {
            spec: spec.clone(),
            layers,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| {
                l.w.len()
                    + l.b.len()
                    + l.ln.as_ref().map_or(0, |ln| ln.scale.len() + ln.shift.len())
            })
            .sum()
    }

    /// Canonical flat order: per layer w (row-major), b, then LN scale and
    /// shift when present.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.w.iter().copied());
            out.extend(l.b.iter().copied());
            if let Some(ln) = &l.ln {
                out.extend(ln.scale.iter().copied());
                out.extend(ln.shift.iter().copied());
            }
        }
        out
    }

    pub fn from_flat(spec: &MlpSpec, flat: &[f64]) -> Result<MlpParams> {
        let mut params = MlpParams::zeros_like(spec);
        if flat.len() != params.param_count() {
            return Err(Error::ShapeMismatch {
                context: "from_flat",
                expected: params.param_count().to_string(),
                got: flat.len().to_string(),
            });
        }
        let mut it = flat.iter().copied();
        for l in &mut params.layers {
            for v in l.w.iter_mut() {
                *v = it.next().unwrap();
            }
            for v in l.b.iter_mut() {
                *v = it.next().unwrap();
            }
            if let Some(ln) = &mut l.ln {
                for v in ln.scale.iter_mut() {
                    *v = it.next().unwrap();
                }
                for v in ln.shift.iter_mut() {
                    *v = it.next().unwrap();
                }
            }
        }
        Ok(params)
    }

    /// Elementwise `self[i] = f(self[i], other[i])` over every tensor pair.
    pub fn zip_apply(&mut self, other: &MlpParams, mut f: impl FnMut(&mut f64, f64)) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            Zip::from(&mut a.w).and(&b.w).for_each(|x, &y| f(x, y));
            Zip::from(&mut a.b).and(&b.b).for_each(|x, &y| f(x, y));
            if let (Some(la), Some(lb)) = (a.ln.as_mut(), b.ln.as_ref()) {
                Zip::from(&mut la.scale).and(&lb.scale).for_each(|x, &y| f(x, y));
                Zip::from(&mut la.shift).and(&lb.shift).for_each(|x, &y| f(x, y));
            }
        }
    }
}

/// Initialize weights from a fan-in-scaled uniform: every weight is drawn
/// from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` in row-major order, biases are
/// zero, and LN affine parameters start at identity (scale 1, shift 0).
/// Deterministic for a given seed.
pub fn mlp_init(spec: &MlpSpec, seed: u64) -> MlpParams {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n_hidden = spec.hidden_dims.len();
    let layers = spec
        .layer_dims()
        .iter()
        .enumerate()
        .map(|(i, &(fan_in, fan_out))| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut w = Vec::with_capacity(fan_out * fan_in);
            for _ in 0..fan_out * fan_in {
                w.push(rng.random_range(-bound..bound));
            }
            Layer {
                w: Array2::from_shape_vec((fan_out, fan_in), w).expect("dims agree"),
                b: Array1::zeros(fan_out),
                ln: (spec.use_ln && i < n_hidden).then(|| LnAffine {
                    scale: Array1::ones(fan_out),
                    shift: Array1::zeros(fan_out),
                }),
            }
        })
        .collect();
    MlpParams {
        spec: spec.clone(),
        layers,
    }
}

/// `(h - mean(h)) / sqrt(var(h) + eps) * scale + shift`, with mean and the
/// biased variance taken over the elements of `h`.
pub fn layer_norm(h: &Array1<f64>, scale: &Array1<f64>, shift: &Array1<f64>, eps: f64) -> Array1<f64> {
    let d = h.len();
    let mean = h.sum() / d as f64;
    let var = h.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / d as f64;
    let inv_sigma = 1.0 / (var + eps).sqrt();
    let mut out = Array1::zeros(d);
    for j in 0..d {
        out[j] = (h[j] - mean) * inv_sigma * scale[j] + shift[j];
    }
    out
}

/// Row-wise layer norm over a batch. Returns (xhat, inv_sigma, post_affine).
fn layer_norm_rows(z: &Array2<f64>, ln: &LnAffine, eps: f64) -> (Array2<f64>, Array1<f64>, Array2<f64>) {
    let (b, d) = z.dim();
    let mut xhat = Array2::zeros((b, d));
    let mut inv_sigma = Array1::zeros(b);
    let mut out = Array2::zeros((b, d));
    for i in 0..b {
        let row = z.row(i);
        let mean = row.sum() / d as f64;
        let var = row.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / d as f64;
        let is = 1.0 / (var + eps).sqrt();
        inv_sigma[i] = is;
        for j in 0..d {
            let xh = (row[j] - mean) * is;
            xhat[(i, j)] = xh;
            out[(i, j)] = xh * ln.scale[j] + ln.shift[j];
        }
    }
    (xhat, inv_sigma, out)
}

/// Per-hidden-layer intermediate values for one batched forward pass.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    /// input to the layer, `[batch, in]`
    pub input: Array2<f64>,
    /// pre-normalization linear output `W x + b`
    pub pre_act: Array2<f64>,
    /// normalized features before the affine, present iff LN is on
    pub ln_xhat: Option<Array2<f64>>,
    /// per-row `1 / sqrt(var + eps)`, present iff LN is on
    pub ln_inv_sigma: Option<Array1<f64>>,
    /// activation input (post-LN affine when LN is on, else `pre_act`)
    pub act_input: Array2<f64>,
    /// post-activation layer output
    pub output: Array2<f64>,
}

/// Everything retained from a forward pass: enough for exact analytic
/// gradients and for activation statistics.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub hidden: Vec<LayerTrace>,
    pub output: Array2<f64>,
}

/// Batched forward pass; rows of `x` are samples.
pub fn mlp_forward_batch(
    params: &MlpParams,
    x: &Array2<f64>,
    want_trace: bool,
) -> Result<(Array2<f64>, Option<ForwardTrace>)> {
    let spec = &params.spec;
    if x.ncols() != spec.input_dim {
        return Err(Error::ShapeMismatch {
            context: "mlp_forward input",
            expected: spec.input_dim.to_string(),
            got: x.ncols().to_string(),
        });
    }
    let n_hidden = spec.hidden_dims.len();
    let mut hidden_traces = Vec::new();
    let mut h = x.clone();
    for (i, layer) in params.layers.iter().enumerate().take(n_hidden) {
        let mut z = h.dot(&layer.w.t());
        z += &layer.b;
        let (ln_xhat, ln_inv_sigma, act_input) = match &layer.ln {
            Some(ln) => {
                let (xhat, inv_sigma, affine) = layer_norm_rows(&z, ln, spec.ln_eps);
                (Some(xhat), Some(inv_sigma), affine)
            }
            None => (None, None, z.clone()),
        };
        let out = act_input.mapv(|v| spec.activation.apply(v));
        if want_trace {
            hidden_traces.push(LayerTrace {
                input: h,
                pre_act: z,
                ln_xhat,
                ln_inv_sigma,
                act_input: act_input.clone(),
                output: out.clone(),
            });
        }
        h = out;
        let _ = i;
    }
    let out_layer = params.layers.last().expect("at least one layer");
    let mut y = h.dot(&out_layer.w.t());
    y += &out_layer.b;
    let trace = want_trace.then(|| {
        // output-layer input is the last hidden output, already stored
        ForwardTrace {
            hidden: hidden_traces,
            output: y.clone(),
        }
    });
    Ok((y, trace))
}

/// Single-sample forward pass.
pub fn mlp_forward(
    params: &MlpParams,
    x: &Array1<f64>,
    want_trace: bool,
) -> Result<(Array1<f64>, Option<ForwardTrace>)> {
    let x2 = x
        .clone()
        .into_shape_with_order((1, x.len()))
        .map_err(|_| Error::InvalidArgument("reshape failed".into()))?;
    let (y, trace) = mlp_forward_batch(params, &x2, want_trace)?;
    Ok((y.row(0).to_owned(), trace))
}

/// Scalar-output convenience used all over the critics.
pub fn mlp_forward_scalar(params: &MlpParams, x: &Array1<f64>) -> Result<f64> {
    let (y, _) = mlp_forward(params, x, false)?;
    Ok(y[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(hidden: Vec<usize>, use_ln: bool, act: Activation) -> MlpSpec {
        MlpSpec::new(2, hidden, 1, act, use_ln).unwrap()
    }

    #[test]
    fn init_shapes_follow_spec() {
        let s = MlpSpec::new(3, vec![256, 256], 1, Activation::Relu, true).unwrap();
        let p = mlp_init(&s, 0);
        assert_eq!(p.layers[0].w.dim(), (256, 3));
        assert_eq!(p.layers[1].w.dim(), (256, 256));
        assert_eq!(p.layers[2].w.dim(), (1, 256));
        assert!(p.layers[0].ln.is_some());
        assert!(p.layers[2].ln.is_none(), "output layer is never normalized");
        assert!(p.layers[0].ln.as_ref().unwrap().scale.iter().all(|&v| v == 1.0));
        assert!(p.layers[0].b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let s = spec(vec![8, 8], true, Activation::Relu);
        let a = mlp_init(&s, 0);
        let b = mlp_init(&s, 0);
        let c = mlp_init(&s, 1);
        assert_eq!(a, b);
        assert_ne!(a.layers[0].w, c.layers[0].w);
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let s = spec(vec![16], false, Activation::Relu);
        let p = mlp_init(&s, 3);
        let bound0 = 1.0 / (2.0f64).sqrt();
        assert!(p.layers[0].w.iter().all(|&v| v.abs() < bound0));
        let bound1 = 1.0 / (16.0f64).sqrt();
        assert!(p.layers[1].w.iter().all(|&v| v.abs() < bound1));
    }

    #[test]
    fn layer_norm_constant_input_collapses_to_shift() {
        let h = Array1::from_vec(vec![1.0, 1.0, 1.0]);
        let one = Array1::ones(3);
        let zero = Array1::zeros(3);
        let out = layer_norm(&h, &one, &zero, 1e-5);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn layer_norm_two_point_identity() {
        let h = Array1::from_vec(vec![-1.0, 1.0]);
        let one = Array1::ones(2);
        let zero = Array1::zeros(2);
        let out = layer_norm(&h, &one, &zero, 1e-15);
        assert!((out[0] + 1.0).abs() < 1e-7);
        assert!((out[1] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn layer_norm_matches_elementwise_formula() {
        // independent arithmetic for h = [0, 2, 4], scale 1, shift 1
        let h = [0.0f64, 2.0, 4.0];
        let mean = h.iter().sum::<f64>() / 3.0;
        let var = h.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / 3.0;
        let eps = 1e-5;
        let expected: Vec<f64> = h.iter().map(|&x| (x - mean) / (var + eps).sqrt() + 1.0).collect();

        let out = layer_norm(
            &Array1::from_vec(h.to_vec()),
            &Array1::ones(3),
            &Array1::from_vec(vec![1.0, 1.0, 1.0]),
            eps,
        );
        for j in 0..3 {
            assert!((out[j] - expected[j]).abs() < 1e-12);
        }
        // pre-affine output is zero-mean unit-variance
        let pre: Vec<f64> = out.iter().map(|v| v - 1.0).collect();
        let m: f64 = pre.iter().sum::<f64>() / 3.0;
        let v: f64 = pre.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 3.0;
        assert!(m.abs() < 1e-9);
        assert!((v - 1.0).abs() < 1e-4); // eps shrinks variance slightly
    }

    #[test]
    fn forward_zero_params_gives_zero() {
        let s = spec(vec![4, 4], true, Activation::Relu);
        let p = MlpParams::zeros_like(&s);
        let (y, _) = mlp_forward(&p, &Array1::from_vec(vec![0.3, -0.7]), false).unwrap();
        assert_eq!(y[0], 0.0);
    }

    #[test]
    fn forward_relu_clamps_single_unit() {
        let s = MlpSpec::new(1, vec![1], 1, Activation::Relu, false).unwrap();
        let mut p = MlpParams::zeros_like(&s);
        p.layers[0].w[(0, 0)] = 1.0;
        p.layers[1].w[(0, 0)] = 1.0;
        let (y, _) = mlp_forward(&p, &Array1::from_vec(vec![-3.0]), false).unwrap();
        assert_eq!(y[0], 0.0);
        let (y, _) = mlp_forward(&p, &Array1::from_vec(vec![2.0]), false).unwrap();
        assert_eq!(y[0], 2.0);
    }

    #[test]
    fn forward_matches_hand_computed_two_unit_net() {
        // 1 input -> 2 hidden (relu, no LN) -> 1 output, all values set by hand
        let s = MlpSpec::new(1, vec![2], 1, Activation::Relu, false).unwrap();
        let mut p = MlpParams::zeros_like(&s);
        p.layers[0].w[(0, 0)] = 0.5;
        p.layers[0].w[(1, 0)] = -1.25;
        p.layers[0].b[0] = 0.1;
        p.layers[0].b[1] = 0.2;
        p.layers[1].w[(0, 0)] = 2.0;
        p.layers[1].w[(0, 1)] = -3.0;
        p.layers[1].b[0] = 0.05;
        let x: f64 = 0.8;
        // independent evaluation of the same arithmetic
        let h0 = (0.5 * x + 0.1).max(0.0);
        let h1 = (-1.25 * x + 0.2).max(0.0);
        let expected = 2.0 * h0 - 3.0 * h1 + 0.05;
        let (y, _) = mlp_forward(&p, &Array1::from_vec(vec![x]), false).unwrap();
        assert!((y[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn forward_dim_mismatch_is_an_error() {
        let s = spec(vec![4], false, Activation::Relu);
        let p = mlp_init(&s, 0);
        let err = mlp_forward(&p, &Array1::from_vec(vec![1.0, 2.0, 3.0]), false);
        assert!(matches!(err, Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn batch_forward_agrees_with_single_sample() {
        let s = spec(vec![5, 3], true, Activation::Silu);
        let p = mlp_init(&s, 11);
        let xs = Array2::from_shape_vec((4, 2), vec![0.1, -0.2, 1.4, 0.0, -0.9, 0.5, 0.3, 0.3]).unwrap();
        let (batch_y, _) = mlp_forward_batch(&p, &xs, false).unwrap();
        for i in 0..4 {
            let (y, _) = mlp_forward(&p, &xs.row(i).to_owned(), false).unwrap();
            assert_eq!(y[0], batch_y[(i, 0)]);
        }
    }

    #[test]
    fn trace_retains_per_layer_values() {
        let s = spec(vec![4, 4], true, Activation::Relu);
        let p = mlp_init(&s, 5);
        let x = Array2::from_shape_vec((2, 2), vec![0.1, 0.9, -0.4, 0.2]).unwrap();
        let (_, trace) = mlp_forward_batch(&p, &x, true).unwrap();
        let trace = trace.unwrap();
        assert_eq!(trace.hidden.len(), 2);
        assert!(trace.hidden[0].ln_xhat.is_some());
        assert_eq!(trace.hidden[0].output.dim(), (2, 4));
    }

    #[test]
    fn flatten_round_trips() {
        let s = spec(vec![3, 4], true, Activation::Gelu);
        let p = mlp_init(&s, 9);
        let flat = p.flatten();
        assert_eq!(flat.len(), p.param_count());
        let q = MlpParams::from_flat(&s, &flat).unwrap();
        assert_eq!(p, q);
    }
}
