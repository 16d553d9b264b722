//! Adam and target-network soft updates.

use ndarray::{Array, Dimension, Zip};

use super::{MlpParams, MlpSpec};

/// Optimizer state; moment accumulators share the parameter shape.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: MlpParams,
    pub v: MlpParams,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr: f64,
}

impl AdamState {
    pub fn new(spec: &MlpSpec, lr: f64) -> AdamState {
        AdamState {
            m: MlpParams::zeros_like(spec),
            v: MlpParams::zeros_like(spec),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr,
        }
    }
}

fn adam_tensor<D: Dimension>(
    p: &mut Array<f64, D>,
    g: &Array<f64, D>,
    m: &mut Array<f64, D>,
    v: &mut Array<f64, D>,
    lr_t: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) {
    Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        *p -= lr_t * *m / (v.sqrt() + eps);
    });
}

/// One bias-corrected Adam step, in place.
///
/// m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;
/// p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
pub fn adam_step_in_place(params: &mut MlpParams, grads: &MlpParams, state: &mut AdamState) {
    state.t += 1;
    let bc1 = 1.0 - state.beta1.powi(state.t as i32);
    let bc2 = 1.0 - state.beta2.powi(state.t as i32);
    // fold both bias corrections into the step size:
    // lr * m_hat / (sqrt(v_hat) + eps) = (lr sqrt(bc2)/bc1) * m / (sqrt(v) + eps sqrt(bc2))
    let lr_t = state.lr * bc2.sqrt() / bc1;
    let eps_t = state.eps * bc2.sqrt();
    for i in 0..params.layers.len() {
        let pl = &mut params.layers[i];
        let gl = &grads.layers[i];
        let ml = &mut state.m.layers[i];
        let vl = &mut state.v.layers[i];
        adam_tensor(&mut pl.w, &gl.w, &mut ml.w, &mut vl.w, lr_t, state.beta1, state.beta2, eps_t);
        adam_tensor(&mut pl.b, &gl.b, &mut ml.b, &mut vl.b, lr_t, state.beta1, state.beta2, eps_t);
        if let (Some(pln), Some(gln)) = (pl.ln.as_mut(), gl.ln.as_ref()) {
            let mln = ml.ln.as_mut().expect("moment shape");
            let vln = vl.ln.as_mut().expect("moment shape");
            adam_tensor(&mut pln.scale, &gln.scale, &mut mln.scale, &mut vln.scale, lr_t, state.beta1, state.beta2, eps_t);
            adam_tensor(&mut pln.shift, &gln.shift, &mut mln.shift, &mut vln.shift, lr_t, state.beta1, state.beta2, eps_t);
        }
    }
}

/// Pure-function form of the update.
pub fn adam_step(params: &MlpParams, grads: &MlpParams, state: &AdamState) -> (MlpParams, AdamState) {
    let mut p = params.clone();
    let mut s = state.clone();
    adam_step_in_place(&mut p, grads, &mut s);
    (p, s)
}

/// target' = tau * online + (1 - tau) * target, elementwise.
pub fn soft_update_in_place(target: &mut MlpParams, online: &MlpParams, tau: f64) {
    target.zip_apply(online, |t, o| *t = tau * o + (1.0 - tau) * *t);
}

pub fn soft_update(target: &MlpParams, online: &MlpParams, tau: f64) -> MlpParams {
    let mut t = target.clone();
    soft_update_in_place(&mut t, online, tau);
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{mlp_init, Activation, MlpSpec};

    fn small_spec() -> MlpSpec {
        MlpSpec::new(2, vec![3], 1, Activation::Relu, true).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let spec = small_spec();
        let p = mlp_init(&spec, 0);
        let g = MlpParams::zeros_like(&spec);
        let st = AdamState::new(&spec, 3e-4);
        let (p2, st2) = adam_step(&p, &g, &st);
        assert_eq!(p, p2);
        assert_eq!(st2.t, 1);
    }

    #[test]
    fn scalar_first_step_magnitude_is_lr() {
        // single parameter, g = 1, t = 1: m_hat = 1, v_hat = 1, so the step is
        // lr / (1 + eps) up to the eps placement
        let spec = MlpSpec::new(1, vec![1], 1, Activation::None, false).unwrap();
        let p = MlpParams::zeros_like(&spec);
        let mut g = MlpParams::zeros_like(&spec);
        g.layers[0].w[(0, 0)] = 1.0;
        let st = AdamState::new(&spec, 3e-4);
        let (p2, _) = adam_step(&p, &g, &st);
        let delta = -p2.layers[0].w[(0, 0)];
        let expected = 3e-4 / (1.0 + 1e-8);
        assert!((delta - expected).abs() < 1e-12, "delta {delta}");
        assert!((delta - 3e-4).abs() < 1e-10);
    }

    #[test]
    fn repeated_identical_calls_are_identical() {
        let spec = small_spec();
        let p = mlp_init(&spec, 1);
        let mut g = MlpParams::zeros_like(&spec);
        g.layers[0].w[(0, 0)] = 0.5;
        g.layers[1].w[(0, 2)] = -0.25;
        let st = AdamState::new(&spec, 1e-3);
        let (a, sa) = adam_step(&p, &g, &st);
        let (b, sb) = adam_step(&p, &g, &st);
        assert_eq!(a, b);
        assert_eq!(sa.t, sb.t);
        assert_eq!(sa.m, sb.m);
        assert_eq!(sa.v, sb.v);
    }

    #[test]
    fn adam_preserves_shapes() {
        let spec = MlpSpec::new(3, vec![4, 5], 2, Activation::Silu, true).unwrap();
        let p = mlp_init(&spec, 2);
        let g = mlp_init(&spec, 3);
        let st = AdamState::new(&spec, 1e-3);
        let (p2, _) = adam_step(&p, &g, &st);
        assert_eq!(p2.param_count(), p.param_count());
        for (a, b) in p2.layers.iter().zip(&p.layers) {
            assert_eq!(a.w.dim(), b.w.dim());
            assert_eq!(a.b.dim(), b.b.dim());
        }
    }

    #[test]
    fn soft_update_endpoints() {
        let spec = small_spec();
        let target = mlp_init(&spec, 0);
        let online = mlp_init(&spec, 1);
        let same = soft_update(&target, &online, 0.0);
        assert_eq!(same, target);
        let swapped = soft_update(&target, &online, 1.0);
        assert_eq!(swapped, online);
    }

    #[test]
    fn soft_update_midpoint() {
        let spec = MlpSpec::new(1, vec![2], 1, Activation::None, false).unwrap();
        let target = MlpParams::zeros_like(&spec);
        let mut online = MlpParams::zeros_like(&spec);
        online.zip_apply(&online.clone(), |x, _| *x = 2.0);
        let mid = soft_update(&target, &online, 0.5);
        assert!(mid.flatten().iter().all(|&v| v == 1.0));
    }
}
