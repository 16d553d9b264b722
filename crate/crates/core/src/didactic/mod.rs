//! Regression studies on cone-shaped targets.
//!
//! A scalar target `y = c * ||x - center||` is defined only on one or two
//! discs inside the unit square; everything else in [-1, 1]^2 is the
//! out-of-hull region whose predictions the studies track. Fits run plain
//! minibatch MSE, optionally with the same far-region squared penalty the
//! trainer uses (target value 0, the regression analog of `Q_min`).

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{self, adam_step_in_place, grad, mlp_forward_batch, AdamState, Activation, MlpParams, MlpSpec};
use crate::pars::sample_infeasible;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeKind {
    /// one disc of the given radius centered at the origin
    Cone,
    /// two disjoint discs of radius 0.3 centered at (-0.5, 0) and (0.5, 0)
    TwoCone,
}

impl ConeKind {
    pub fn name(self) -> &'static str {
        match self {
            ConeKind::Cone => "cone",
            ConeKind::TwoCone => "two_cone",
        }
    }
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cone" => Ok(ConeKind::Cone),
            "two_cone" => Ok(ConeKind::TwoCone),
            other => Err(Error::InvalidArgument(format!(
                "unknown dataset kind `{other}` (expected cone|two_cone)"
            ))),
        }
    }
}

pub const TWO_CONE_CENTERS: [[f64; 2]; 2] = [[-0.5, 0.0], [0.5, 0.0]];
pub const TWO_CONE_RADIUS: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTask {
    pub kind: ConeKind,
    pub c_reward: f64,
    /// data radius of the single-cone disc
    pub radius: f64,
    pub samples: usize,
    /// half-width of the evaluation grid (1 for the unit square, 5 for the
    /// wide view)
    pub extent: f64,
    pub use_ln: bool,
    pub activation: Activation,
    /// far-region squared penalty toward 0
    pub pa: bool,
    pub pa_alpha: f64,
    /// penalty region multiplier: samples land in [-2m, -m) u [m, 2m)
    pub pa_guard: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for RegressionTask {
    fn default() -> Self {
        RegressionTask {
            kind: ConeKind::Cone,
            c_reward: 1.0,
            radius: 0.5,
            samples: 2048,
            extent: 1.0,
            use_ln: true,
            activation: Activation::Relu,
            pa: false,
            pa_alpha: 1.0,
            pa_guard: 5.0,
            batch_size: 256,
            learning_rate: 1e-3,
        }
    }
}

impl RegressionTask {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_reward > 0.0) || !(self.radius > 0.0) || !(self.extent > 0.0) {
            return Err(Error::InvalidArgument(
                "c_reward, radius, and extent must be positive".into(),
            ));
        }
        if self.samples == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("samples and batch_size must be >= 1".into()));
        }
        if self.pa && !(self.pa_guard >= 1.0 && self.pa_alpha >= 0.0) {
            return Err(Error::InvalidArgument("pa_guard must be >= 1 and pa_alpha >= 0".into()));
        }
        Ok(())
    }

    /// Closed-form target, defined only on the data region.
    pub fn target(&self, x: [f64; 2]) -> Option<f64> {
        match self.kind {
            ConeKind::Cone => {
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                (r <= self.radius).then(|| self.c_reward * r)
            }
            ConeKind::TwoCone => TWO_CONE_CENTERS.iter().find_map(|c| {
                let r = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).sqrt();
                (r <= TWO_CONE_RADIUS).then(|| self.c_reward * r)
            }),
        }
    }

    /// True iff x lies in the data region (the preimage of the target).
    pub fn in_data_region(&self, x: [f64; 2]) -> bool {
        self.target(x).is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPoint {
    pub x: [f64; 2],
    pub y: f64,
}

fn sample_disc(center: [f64; 2], radius: f64, rng: &mut rand_chacha::ChaCha12Rng) -> [f64; 2] {
    // rejection from the bounding square keeps the density exactly uniform
    loop {
        let x = rng.random_range(-radius..radius);
        let y = rng.random_range(-radius..radius);
        if x * x + y * y <= radius * radius {
            return [center[0] + x, center[1] + y];
        }
    }
}

/// Uniform samples in the disc with exact targets.
pub fn make_cone_dataset(task: &RegressionTask, seed: u64) -> Result<Vec<LabeledPoint>> {
    task.validate()?;
    let mut r = rng::stream(seed, "cone_data");
    let mut out = Vec::with_capacity(task.samples);
    for _ in 0..task.samples {
        let x = sample_disc([0.0, 0.0], task.radius, &mut r);
        out.push(LabeledPoint {
            x,
            y: task.c_reward * (x[0] * x[0] + x[1] * x[1]).sqrt(),
        });
    }
    Ok(out)
}

/// Uniform samples over two disjoint discs (alternating), exact targets.
pub fn make_two_cone_dataset(task: &RegressionTask, seed: u64) -> Result<Vec<LabeledPoint>> {
    task.validate()?;
    let mut r = rng::stream(seed, "two_cone_data");
    let mut out = Vec::with_capacity(task.samples);
    for i in 0..task.samples {
        let center = TWO_CONE_CENTERS[i % 2];
        let x = sample_disc(center, TWO_CONE_RADIUS, &mut r);
        let d = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)).sqrt();
        out.push(LabeledPoint {
            x,
            y: task.c_reward * d,
        });
    }
    Ok(out)
}

pub fn make_dataset(task: &RegressionTask, seed: u64) -> Result<Vec<LabeledPoint>> {
    match task.kind {
        ConeKind::Cone => make_cone_dataset(task, seed),
        ConeKind::TwoCone => make_two_cone_dataset(task, seed),
    }
}

/// Minibatch MSE fit with Adam; adds the far-region penalty when the task
/// asks for it. Deterministic per seed.
pub fn fit_regressor(task: &RegressionTask, spec: &MlpSpec, steps: usize, seed: u64) -> Result<MlpParams> {
    task.validate()?;
    if spec.input_dim != 2 || spec.output_dim != 1 {
        return Err(Error::ShapeMismatch {
            context: "regressor spec",
            expected: "2 -> 1".into(),
            got: format!("{} -> {}", spec.input_dim, spec.output_dim),
        });
    }
    let data = make_dataset(task, seed)?;
    let mut params = nn::mlp_init(spec, rng::derive_seed(seed, "fit_init", 0));
    let mut opt = AdamState::new(spec, task.learning_rate);
    let mut rng_batch = rng::stream(seed, "fit_batch");
    let mut rng_pa = rng::stream(seed, "fit_pa");
    let b = task.batch_size.min(data.len());

    // divergence guard mirrors the trainer: the target never exceeds
    // c_reward, so runaway predictions signal a broken fit
    let guard = 1e3 * task.c_reward;

    for step in 0..steps {
        let mut x = Array2::zeros((b, 2));
        let mut y = Array1::zeros(b);
        for row in 0..b {
            let p = data[rng_batch.random_range(0..data.len())];
            x[(row, 0)] = p.x[0];
            x[(row, 1)] = p.x[1];
            y[row] = p.y;
        }
        let (pred, trace) = mlp_forward_batch(&params, &x, true)?;
        let trace = trace.expect("trace requested");
        let mut gout = Array2::zeros((b, 1));
        let mut mean_abs = 0.0;
        for row in 0..b {
            gout[(row, 0)] = 2.0 * (pred[(row, 0)] - y[row]) / b as f64;
            mean_abs += pred[(row, 0)].abs();
        }
        mean_abs /= b as f64;
        if mean_abs > guard {
            return Err(Error::Divergence {
                step,
                mean_abs_q: mean_abs,
                threshold: guard,
            });
        }
        let (mut grads, _) = grad::backward_sum(&params, &trace, &gout);

        if task.pa && task.pa_alpha > 0.0 {
            let x_pa = sample_infeasible(2, task.pa_guard, b, &mut rng_pa);
            let (pred_pa, trace_pa) = mlp_forward_batch(&params, &x_pa, true)?;
            let trace_pa = trace_pa.expect("trace requested");
            let mut gout_pa = Array2::zeros((b, 1));
            for row in 0..b {
                gout_pa[(row, 0)] = 2.0 * task.pa_alpha * pred_pa[(row, 0)] / b as f64;
            }
            let (pa_grads, _) = grad::backward_sum(&params, &trace_pa, &gout_pa);
            grad::axpy_params(&mut grads, 1.0, &pa_grads);
        }
        adam_step_in_place(&mut params, &grads, &mut opt);
    }
    Ok(params)
}

/// Mean squared training error of a fit on its own dataset.
pub fn training_mse(params: &MlpParams, data: &[LabeledPoint]) -> Result<f64> {
    let mut x = Array2::zeros((data.len(), 2));
    for (r, p) in data.iter().enumerate() {
        x[(r, 0)] = p.x[0];
        x[(r, 1)] = p.x[1];
    }
    let (pred, _) = mlp_forward_batch(params, &x, false)?;
    let mse = data
        .iter()
        .enumerate()
        .map(|(r, p)| (pred[(r, 0)] - p.y).powi(2))
        .sum::<f64>()
        / data.len() as f64;
    Ok(mse)
}

/// Scale-normalized prediction statistics over the unit square, partitioned
/// by the exact data-region test: everything in [-1, 1]^2 outside the data
/// region counts as the out-of-hull region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionStats {
    pub max_id: f64,
    pub mean_id: f64,
    pub max_ood_out: f64,
    pub mean_ood_out: f64,
}

pub fn region_stats(params: &MlpParams, task: &RegressionTask, grid_res: usize) -> Result<RegionStats> {
    if grid_res < 2 {
        return Err(Error::InvalidArgument("grid resolution must be >= 2".into()));
    }
    let (points, values) = grid_predictions(params, 1.0, grid_res)?;
    let mut id = (f64::NEG_INFINITY, 0.0, 0usize);
    let mut ood = (f64::NEG_INFINITY, 0.0, 0usize);
    for (p, &v) in points.iter().zip(&values) {
        let v_norm = v / task.c_reward;
        if task.in_data_region([p[0], p[1]]) {
            id.0 = id.0.max(v_norm);
            id.1 += v_norm;
            id.2 += 1;
        } else {
            ood.0 = ood.0.max(v_norm);
            ood.1 += v_norm;
            ood.2 += 1;
        }
    }
    Ok(RegionStats {
        max_id: id.0,
        mean_id: id.1 / id.2 as f64,
        max_ood_out: ood.0,
        mean_ood_out: ood.1 / ood.2 as f64,
    })
}

/// Predictions on a square grid of the given half-width; points run
/// row-major from (-extent, -extent), x fastest.
pub fn grid_predictions(params: &MlpParams, extent: f64, res: usize) -> Result<(Vec<[f64; 2]>, Vec<f64>)> {
    let mut points = Vec::with_capacity(res * res);
    for iy in 0..res {
        for ix in 0..res {
            let x = -extent + 2.0 * extent * ix as f64 / (res - 1) as f64;
            let y = -extent + 2.0 * extent * iy as f64 / (res - 1) as f64;
            points.push([x, y]);
        }
    }
    let mut xs = Array2::zeros((points.len(), 2));
    for (r, p) in points.iter().enumerate() {
        xs[(r, 0)] = p[0];
        xs[(r, 1)] = p[1];
    }
    let (pred, _) = mlp_forward_batch(params, &xs, false)?;
    Ok((points, pred.column(0).to_vec()))
}

/// One fit and one set of region statistics per requested activation,
/// everything else (data, seed, steps) shared.
pub fn activation_sweep(
    task: &RegressionTask,
    spec: &MlpSpec,
    activations: &[Activation],
    steps: usize,
    seed: u64,
    grid_res: usize,
) -> Result<BTreeMap<Activation, RegionStats>> {
    let mut out = BTreeMap::new();
    for &act in activations {
        let mut task_a = task.clone();
        task_a.activation = act;
        let mut spec_a = spec.clone();
        spec_a.activation = act;
        let params = fit_regressor(&task_a, &spec_a, steps, seed)?;
        out.insert(act, region_stats(&params, &task_a, grid_res)?);
    }
    Ok(out)
}
