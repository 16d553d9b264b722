//! Analytic backward pass through Linear / layer norm / activation.

use ndarray::{Array2, Axis};

use super::{mlp_forward_batch, ForwardTrace, MlpParams};
use crate::error::{Error, Result};

/// Backward pass for the scalar `sum_b <gout_b, f(x_b)>` (no batch
/// averaging). Returns parameter gradients in an `MlpParams`-shaped
/// container plus the gradient with respect to each input row.
pub(crate) fn backward_sum(
    params: &MlpParams,
    trace: &ForwardTrace,
    gout: &Array2<f64>,
) -> (MlpParams, Array2<f64>) {
    let spec = &params.spec;
    let n_hidden = spec.hidden_dims.len();
    let mut grads = MlpParams::zeros_like(spec);

    // output layer: y = H W^T + b
    let last_hidden = &trace.hidden[n_hidden - 1].output;
    let out_layer = &params.layers[n_hidden];
    grads.layers[n_hidden].w = gout.t().dot(last_hidden);
    grads.layers[n_hidden].b = gout.sum_axis(Axis(0));
    // gradient flowing into the last hidden output
    let mut g = gout.dot(&out_layer.w);

    for i in (0..n_hidden).rev() {
        let lt = &trace.hidden[i];
        let layer = &params.layers[i];

        // through the activation
        let mut d_act = g;
        d_act.zip_mut_with(&lt.act_input, |gv, &z| *gv *= spec.activation.derivative(z));

        // through layer norm when present
        let d_z = match (&layer.ln, &lt.ln_xhat, &lt.ln_inv_sigma) {
            (Some(ln), Some(xhat), Some(inv_sigma)) => {
                // d scale_j = sum_b d_act[b,j] * xhat[b,j]; d shift_j = sum_b d_act[b,j]
                let g_ln = grads.layers[i].ln.as_mut().expect("ln grads allocated");
                g_ln.scale = (&d_act * xhat).sum_axis(Axis(0));
                g_ln.shift = d_act.sum_axis(Axis(0));

                // ghat = d_act * scale (broadcast over rows)
                let mut ghat = d_act;
                ghat *= &ln.scale;

                let (b, d) = ghat.dim();
                let dim = d as f64;
                let mut dz = Array2::zeros((b, d));
                for r in 0..b {
                    let gr = ghat.row(r);
                    let xr = xhat.row(r);
                    let m1 = gr.sum() / dim;
                    let m2 = gr.iter().zip(xr.iter()).map(|(a, b)| a * b).sum::<f64>() / dim;
                    let is = inv_sigma[r];
                    for c in 0..d {
                        dz[(r, c)] = is * (gr[c] - m1 - xr[c] * m2);
                    }
                }
                dz
            }
            _ => d_act,
        };

        grads.layers[i].w = d_z.t().dot(&lt.input);
        grads.layers[i].b = d_z.sum_axis(Axis(0));
        g = d_z.dot(&layer.w);
    }

    (grads, g)
}

/// Gradient of `mean_b <gout_b, f(x_b)>` with respect to every parameter,
/// plus the gradient with respect to each input row of the same scalar.
/// The caller supplies the per-sample output gradients; losses live upstream.
pub fn mlp_grad(
    params: &MlpParams,
    inputs: &Array2<f64>,
    gout: &Array2<f64>,
) -> Result<(MlpParams, Array2<f64>)> {
    if gout.nrows() != inputs.nrows() || gout.ncols() != params.spec.output_dim {
        return Err(Error::ShapeMismatch {
            context: "mlp_grad output grads",
            expected: format!("[{}, {}]", inputs.nrows(), params.spec.output_dim),
            got: format!("[{}, {}]", gout.nrows(), gout.ncols()),
        });
    }
    let (_, trace) = mlp_forward_batch(params, inputs, true)?;
    let trace = trace.expect("trace requested");
    let (mut grads, mut dinput) = backward_sum(params, &trace, gout);
    let inv_b = 1.0 / inputs.nrows() as f64;
    scale_params(&mut grads, inv_b);
    dinput *= inv_b;
    Ok((grads, dinput))
}

pub(crate) fn scale_params(p: &mut MlpParams, c: f64) {
    for l in &mut p.layers {
        l.w *= c;
        l.b *= c;
        if let Some(ln) = &mut l.ln {
            ln.scale *= c;
            ln.shift *= c;
        }
    }
}

/// `a += c * b`, over every tensor.
pub(crate) fn axpy_params(a: &mut MlpParams, c: f64, b: &MlpParams) {
    a.zip_apply(b, |x, y| *x += c * y);
}
