//! Training loop for the refiner: straight-path interpolation, the
//! squared-error velocity objective, and a deterministic Adam optimizer.

use crate::model::{condition_channel, occupancy_tensor, ModelConfig, RefinerModel, VelocityField};
use crate::FlowError;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use simvox_core::voxel::{downsample, VoxelGrid};

/// One training sample: fine target `x0` (+-1 occupancy), Gaussian noise,
/// time, the upsampled coarse channel, and the image embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSample {
    pub x0: Vec<f64>,
    pub noise: Vec<f64>,
    pub t: f64,
    pub condition: Vec<f64>,
    pub image_cond: Vec<f64>,
}

impl FlowSample {
    fn check(&self) -> Result<(), FlowError> {
        if self.noise.len() != self.x0.len() {
            return Err(FlowError::ShapeMismatch {
                expected: self.x0.len(),
                got: self.noise.len(),
            });
        }
        if self.condition.len() != self.x0.len() {
            return Err(FlowError::ShapeMismatch {
                expected: self.x0.len(),
                got: self.condition.len(),
            });
        }
        if !(0.0..=1.0).contains(&self.t) {
            return Err(FlowError::BadTime(self.t));
        }
        Ok(())
    }
}

/// Straight-path interpolation `x_t = (1 - t) x0 + t noise`.
pub fn interpolate(x0: &[f64], noise: &[f64], t: f64) -> Result<Vec<f64>, FlowError> {
    if x0.len() != noise.len() {
        return Err(FlowError::ShapeMismatch {
            expected: x0.len(),
            got: noise.len(),
        });
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(FlowError::BadTime(t));
    }
    Ok(x0
        .iter()
        .zip(noise)
        .map(|(&a, &e)| (1.0 - t) * a + t * e)
        .collect())
}

/// Mean squared error between the field's output and the straight-path
/// velocity `noise - x0`, averaged over batch elements and cells. Zero iff
/// the field reproduces the target exactly on the whole batch.
pub fn flow_loss(field: &impl VelocityField, batch: &[FlowSample]) -> Result<f64, FlowError> {
    if batch.is_empty() {
        return Err(FlowError::EmptyBatch);
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for sample in batch {
        sample.check()?;
        let xt = interpolate(&sample.x0, &sample.noise, sample.t)?;
        let out = field.velocity(&xt, sample.t, &sample.condition, &sample.image_cond);
        if out.len() != sample.x0.len() {
            return Err(FlowError::ShapeMismatch {
                expected: sample.x0.len(),
                got: out.len(),
            });
        }
        for ((&o, &e), &a) in out.iter().zip(&sample.noise).zip(&sample.x0) {
            let diff = o - (e - a);
            total += diff * diff;
        }
        count += sample.x0.len();
    }
    Ok(total / count as f64)
}

/// Loss plus the analytic gradient with respect to every model parameter.
pub fn loss_and_grad(
    model: &RefinerModel,
    batch: &[FlowSample],
) -> Result<(f64, Vec<f64>), FlowError> {
    if batch.is_empty() {
        return Err(FlowError::EmptyBatch);
    }
    let mut grad = vec![0.0; model.param_count()];
    let mut total = 0.0;
    let mut count = 0usize;
    for sample in batch {
        sample.check()?;
        model.check_shapes(&sample.x0, &sample.condition, &sample.image_cond)?;
        count += sample.x0.len();
    }
    let scale = 2.0 / count as f64;
    for sample in batch {
        let xt = interpolate(&sample.x0, &sample.noise, sample.t)?;
        let trace = model.forward_trace(&xt, sample.t, &sample.condition, &sample.image_cond);
        let mut dout = vec![0.0; sample.x0.len()];
        for (v, ((&o, &e), &a)) in trace
            .output
            .iter()
            .zip(&sample.noise)
            .zip(&sample.x0)
            .enumerate()
        {
            let diff = o - (e - a);
            total += diff * diff;
            dout[v] = scale * diff;
        }
        model.backward(
            &xt,
            sample.t,
            &sample.condition,
            &sample.image_cond,
            &trace,
            &dout,
            &mut grad,
        );
    }
    Ok((total / count as f64, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub fine_resolution: u32,
    pub coarse_resolution: u32,
    pub hidden: usize,
    pub time_features: usize,
    pub image_cond_dim: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Allowed fraction of coarse cells missing from the downsampled fine
    /// grid before a pair counts as inconsistent.
    pub consistency_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            fine_resolution: 32,
            coarse_resolution: 16,
            hidden: 8,
            time_features: 8,
            image_cond_dim: 0,
            steps: 1500,
            learning_rate: 5e-3,
            seed: 0,
            consistency_tol: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            fine_resolution: self.fine_resolution,
            coarse_resolution: self.coarse_resolution,
            hidden: self.hidden,
            time_features: self.time_features,
            image_cond_dim: self.image_cond_dim,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub model: RefinerModel,
    /// Training loss per step, starting at step 0.
    pub loss_curve: Vec<f64>,
}

/// Train on (coarse, fine) grid pairs. Bitwise deterministic for a fixed
/// seed: single-threaded, fixed reduction order, ChaCha-seeded noise.
///
/// Each pair must be consistent: the coarse grid is (within
/// `consistency_tol`) a subset of the downsampled fine grid.
pub fn train(
    dataset: &[(VoxelGrid, VoxelGrid)],
    config: &TrainConfig,
) -> Result<TrainResult, FlowError> {
    if dataset.is_empty() {
        return Err(FlowError::EmptyDataset);
    }
    if config.fine_resolution % config.coarse_resolution != 0 {
        return Err(FlowError::NonDivisibleResolutions {
            fine: config.fine_resolution,
            coarse: config.coarse_resolution,
        });
    }
    let factor = config.fine_resolution / config.coarse_resolution;
    let mut pairs = Vec::with_capacity(dataset.len());
    for (index, (coarse, fine)) in dataset.iter().enumerate() {
        if fine.resolution() != config.fine_resolution {
            return Err(FlowError::PairResolution {
                index,
                expected: config.fine_resolution,
                got: fine.resolution(),
            });
        }
        if coarse.resolution() != config.coarse_resolution {
            return Err(FlowError::PairResolution {
                index,
                expected: config.coarse_resolution,
                got: coarse.resolution(),
            });
        }
        let ds = downsample(fine, factor)?;
        let missing = coarse.indices().filter(|&i| !ds.contains_index(i)).count();
        let fraction = if coarse.is_empty() {
            0.0
        } else {
            missing as f64 / coarse.len() as f64
        };
        if fraction > config.consistency_tol {
            return Err(FlowError::InconsistentPair {
                index,
                fraction,
                tolerance: config.consistency_tol,
            });
        }
        pairs.push((
            occupancy_tensor(fine),
            condition_channel(coarse, config.fine_resolution)?,
        ));
    }

    let mut model = RefinerModel::zeroed(config.model_config());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    init_weights(&mut model, &mut rng);

    let image_cond = vec![0.0; config.image_cond_dim];
    let mut adam = Adam::new(model.param_count(), config.learning_rate);
    let mut loss_curve = Vec::with_capacity(config.steps);
    for _ in 0..config.steps {
        let batch: Vec<FlowSample> = pairs
            .iter()
            .map(|(x0, cond)| {
                let t: f64 = rng.gen();
                let noise: Vec<f64> =
                    (0..x0.len()).map(|_| rng.sample(StandardNormal)).collect();
                FlowSample {
                    x0: x0.clone(),
                    noise,
                    t,
                    condition: cond.clone(),
                    image_cond: image_cond.clone(),
                }
            })
            .collect();
        let (loss, grad) = loss_and_grad(&model, &batch)?;
        adam.step(&mut model.params, &grad);
        loss_curve.push(loss);
    }
    Ok(TrainResult { model, loss_curve })
}

/// Gaussian fan-in init for the convolution trunks; the output layer and
/// the time/image projections start at zero so the field is exactly zero at
/// step 0.
fn init_weights(model: &mut RefinerModel, rng: &mut ChaCha8Rng) {
    let layout = model.layout();
    let h = model.config.hidden;
    let normal = |rng: &mut ChaCha8Rng, std: f64| -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        z * std
    };
    let trunk_std = 1.0 / ((4 * 27) as f64).sqrt();
    for i in layout.trunk_w..layout.trunk_b {
        model.params[i] = normal(rng, trunk_std);
    }
    let control_std = 1.0 / (27f64).sqrt();
    for i in layout.control_w..layout.time_w {
        model.params[i] = normal(rng, control_std);
    }
    let mix_std = 1.0 / ((h * 27) as f64).sqrt();
    for i in layout.mix_w..layout.mix_b {
        model.params[i] = normal(rng, mix_std);
    }
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let b1c = 1.0 - self.beta1.powi(self.step as i32);
        let b2c = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mhat = self.m[i] / b1c;
            let vhat = self.v[i] / b2c;
            params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

/// CSV with columns `step,loss`.
pub fn loss_curve_csv(curve: &[f64]) -> String {
    let mut out = String::from("step,loss\n");
    for (i, l) in curve.iter().enumerate() {
        out.push_str(&format!("{i},{l:.9}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    struct OracleField {
        resolution: u32,
        target: Vec<f64>,
    }

    impl VelocityField for OracleField {
        fn fine_resolution(&self) -> u32 {
            self.resolution
        }
        fn velocity(&self, _x: &[f64], _t: f64, _cond: &[f64], _c: &[f64]) -> Vec<f64> {
            self.target.clone()
        }
    }

    fn sample_of(x0: Vec<f64>, noise: Vec<f64>, t: f64) -> FlowSample {
        let n = x0.len();
        FlowSample {
            x0,
            noise,
            t,
            condition: vec![-1.0; n],
            image_cond: vec![],
        }
    }

    #[test]
    fn interpolate_endpoints_and_midpoint() {
        let x0 = vec![0.0, 1.0, -1.0];
        let eps = vec![1.0, 1.0, 1.0];
        assert_eq!(interpolate(&x0, &eps, 0.0).unwrap(), x0);
        assert_eq!(interpolate(&x0, &eps, 1.0).unwrap(), eps);
        let mid = interpolate(&[0.0; 3], &[1.0; 3], 0.5).unwrap();
        assert_eq!(mid, vec![0.5; 3]);
    }

    #[test]
    fn interpolate_is_affine_in_t() {
        // dyadic inputs keep every product exact in f64
        let x0 = vec![0.25, -0.75, 0.5];
        let eps = vec![1.5, 0.25, -2.0];
        let (t1, t2) = (0.25, 0.75);
        let a = interpolate(&x0, &eps, t1).unwrap();
        let b = interpolate(&x0, &eps, t2).unwrap();
        let mid = interpolate(&x0, &eps, (t1 + t2) / 2.0).unwrap();
        for i in 0..3 {
            assert_eq!(mid[i], (a[i] + b[i]) / 2.0);
        }
    }

    #[test]
    fn interpolate_rejects_bad_inputs() {
        assert!(matches!(
            interpolate(&[0.0], &[0.0, 0.0], 0.5),
            Err(FlowError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            interpolate(&[0.0], &[0.0], 1.5),
            Err(FlowError::BadTime(_))
        ));
    }

    #[test]
    fn oracle_field_has_zero_loss() {
        let x0 = vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let noise = vec![0.3, -0.2, 1.7, 0.4, -0.6, 0.9, -1.3, 0.05];
        let target: Vec<f64> = noise.iter().zip(&x0).map(|(e, a)| e - a).collect();
        let field = OracleField {
            resolution: 2,
            target,
        };
        let batch = vec![sample_of(x0, noise, 0.3)];
        assert_eq!(flow_loss(&field, &batch).unwrap(), 0.0);
    }

    #[test]
    fn zero_field_loss_approximates_noise_variance() {
        // x0 = 0, unit-variance noise, zero model output:
        // E[(0 - eps)^2] = 1, Monte-Carlo tolerance 5% at 10^4 draws
        let n = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let noise: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let field = OracleField {
            resolution: 1,
            target: vec![0.0; n],
        };
        // treat the whole vector as one flat sample
        let batch = vec![FlowSample {
            x0: vec![0.0; n],
            noise,
            t: 0.5,
            condition: vec![-1.0; n],
            image_cond: vec![],
        }];
        let loss = flow_loss(&field, &batch).unwrap();
        assert!((loss - 1.0).abs() < 0.05, "loss {loss}");
    }

    #[test]
    fn empty_batch_rejected() {
        let field = OracleField {
            resolution: 2,
            target: vec![],
        };
        assert!(matches!(
            flow_loss(&field, &[]),
            Err(FlowError::EmptyBatch)
        ));
    }

    #[test]
    fn train_rejects_empty_and_inconsistent() {
        let cfg = TrainConfig {
            fine_resolution: 4,
            coarse_resolution: 2,
            hidden: 2,
            time_features: 2,
            steps: 1,
            ..TrainConfig::default()
        };
        assert!(matches!(train(&[], &cfg), Err(FlowError::EmptyDataset)));

        // coarse claims a corner the fine grid never touches
        let fine = VoxelGrid::from_cells(4, [(0, 0, 0)]).unwrap();
        let coarse = VoxelGrid::from_cells(2, [(1, 1, 1)]).unwrap();
        match train(&[(coarse, fine)], &cfg) {
            Err(FlowError::InconsistentPair { index: 0, .. }) => {}
            other => panic!("expected inconsistency, got {other:?}"),
        }
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let fine = VoxelGrid::from_cells(4, [(0, 0, 0), (1, 0, 0), (1, 1, 0)]).unwrap();
        let coarse = downsample(&fine, 2).unwrap();
        let cfg = TrainConfig {
            fine_resolution: 4,
            coarse_resolution: 2,
            hidden: 2,
            time_features: 2,
            steps: 5,
            seed: 9,
            ..TrainConfig::default()
        };
        let a = train(&[(coarse.clone(), fine.clone())], &cfg).unwrap();
        let b = train(&[(coarse, fine)], &cfg).unwrap();
        assert_eq!(a.loss_curve, b.loss_curve);
        assert_eq!(a.model.params, b.model.params);
    }

    #[test]
    fn partial_config_json_takes_defaults() {
        let cfg: TrainConfig =
            serde_json::from_str(r#"{"fine_resolution": 16, "coarse_resolution": 8}"#).unwrap();
        assert_eq!(cfg.fine_resolution, 16);
        assert_eq!(cfg.steps, TrainConfig::default().steps);
        assert_eq!(cfg.image_cond_dim, 0);
    }

    #[test]
    fn loss_curve_csv_format() {
        let csv = loss_curve_csv(&[2.0, 1.0]);
        assert!(csv.starts_with("step,loss\n0,2.000000000\n1,1.000000000\n"));
    }
}
