//! The velocity network: two 3x3x3 convolution layers with tanh mixing over
//! the voxel lattice, shared weights everywhere, plus
//!
//! - three coordinate channels so the net can express position-dependent
//!   structure despite weight sharing,
//! - an additive control branch convolving the coarse-occupancy channel into
//!   the first layer's pre-activation,
//! - sinusoidal time features and the optional image embedding added per
//!   hidden channel.
//!
//! Everything is f64 and hand-differentiated; `loss_and_grad` in the
//! training module exercises the backward pass and a finite-difference test
//! pins it down.

use crate::FlowError;
use serde::{Deserialize, Serialize};
use simvox_core::voxel::VoxelGrid;

/// Anything that can serve as the velocity field during sampling: the
/// trained model, or an oracle field in tests.
pub trait VelocityField {
    fn fine_resolution(&self) -> u32;
    /// Velocity at state `x` and time `t` under conditioning `cond`
    /// (upsampled coarse channel) and image embedding `c`.
    fn velocity(&self, x: &[f64], t: f64, cond: &[f64], c: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub fine_resolution: u32,
    pub coarse_resolution: u32,
    /// Hidden channels per convolution layer.
    pub hidden: usize,
    /// Sinusoidal time features (even).
    pub time_features: usize,
    /// Length of the image-condition embedding; zero disables it.
    pub image_cond_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            fine_resolution: 32,
            coarse_resolution: 16,
            hidden: 8,
            time_features: 8,
            image_cond_dim: 0,
        }
    }
}

const KERNEL: usize = 27;
const TRUNK_CHANNELS: usize = 4; // x_t plus three coordinate channels

/// Offsets of the flattened parameter vector, in storage order.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ParamLayout {
    pub trunk_w: usize,   // [hidden][4][27]
    pub trunk_b: usize,   // [hidden]
    pub control_w: usize, // [hidden][27]
    pub time_w: usize,    // [hidden][time_features]
    pub time_gate: usize, // [hidden][time_features]
    pub image_w: usize,   // [hidden][image_cond_dim]
    pub mix_w: usize,     // [hidden][hidden][27]
    pub mix_b: usize,     // [hidden]
    pub out_w: usize,     // [hidden]
    pub out_b: usize,     // [1]
    pub total: usize,
}

impl ParamLayout {
    pub fn of(cfg: &ModelConfig) -> Self {
        let h = cfg.hidden;
        let trunk_w = 0;
        let trunk_b = trunk_w + h * TRUNK_CHANNELS * KERNEL;
        let control_w = trunk_b + h;
        let time_w = control_w + h * KERNEL;
        let time_gate = time_w + h * cfg.time_features;
        let image_w = time_gate + h * cfg.time_features;
        let mix_w = image_w + h * cfg.image_cond_dim;
        let mix_b = mix_w + h * h * KERNEL;
        let out_w = mix_b + h;
        let out_b = out_w + h;
        ParamLayout {
            trunk_w,
            trunk_b,
            control_w,
            time_w,
            time_gate,
            image_w,
            mix_w,
            mix_b,
            out_w,
            out_b,
            total: out_b + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinerModel {
    pub config: ModelConfig,
    /// Flattened parameters in [`ParamLayout`] order.
    pub params: Vec<f64>,
}

/// Intermediate activations kept for the backward pass. `hidden1` is the
/// first tanh output before the time gate, `gated1` after it.
pub(crate) struct ForwardTrace {
    pub hidden1: Vec<Vec<f64>>,
    pub gated1: Vec<Vec<f64>>,
    pub hidden2: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl RefinerModel {
    pub fn zeroed(config: ModelConfig) -> Self {
        let layout = ParamLayout::of(&config);
        RefinerModel {
            config,
            params: vec![0.0; layout.total],
        }
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub(crate) fn layout(&self) -> ParamLayout {
        ParamLayout::of(&self.config)
    }

    pub fn cell_count(&self) -> usize {
        let r = self.config.fine_resolution as usize;
        r * r * r
    }

    /// Sinusoidal time features: `sin(2^k pi t), cos(2^k pi t)` pairs.
    pub fn time_embedding(&self, t: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.config.time_features);
        for k in 0..self.config.time_features / 2 {
            let w = std::f64::consts::PI * (1 << k) as f64;
            out.push((w * t).sin());
            out.push((w * t).cos());
        }
        out.resize(self.config.time_features, 0.0);
        out
    }

    /// Cell-center coordinate channels in `[0,1]`, x-fastest order.
    pub(crate) fn coord_channels(&self) -> [Vec<f64>; 3] {
        let r = self.config.fine_resolution as usize;
        let rf = r as f64;
        let n = r * r * r;
        let mut cx = vec![0.0; n];
        let mut cy = vec![0.0; n];
        let mut cz = vec![0.0; n];
        let mut v = 0;
        for z in 0..r {
            for y in 0..r {
                for x in 0..r {
                    cx[v] = (x as f64 + 0.5) / rf;
                    cy[v] = (y as f64 + 0.5) / rf;
                    cz[v] = (z as f64 + 0.5) / rf;
                    v += 1;
                }
            }
        }
        [cx, cy, cz]
    }

    pub(crate) fn check_shapes(&self, x: &[f64], cond: &[f64], c: &[f64]) -> Result<(), FlowError> {
        let n = self.cell_count();
        if x.len() != n {
            return Err(FlowError::ShapeMismatch { expected: n, got: x.len() });
        }
        if cond.len() != n {
            return Err(FlowError::ShapeMismatch { expected: n, got: cond.len() });
        }
        if c.len() != self.config.image_cond_dim {
            return Err(FlowError::ImageCondLength {
                expected: self.config.image_cond_dim,
                got: c.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn forward_trace(&self, x: &[f64], t: f64, cond: &[f64], c: &[f64]) -> ForwardTrace {
        let cfg = &self.config;
        let layout = self.layout();
        let r = cfg.fine_resolution as usize;
        let n = r * r * r;
        let h = cfg.hidden;
        let temb = self.time_embedding(t);
        let coords = self.coord_channels();

        let trunk_in: [&[f64]; TRUNK_CHANNELS] = [x, &coords[0], &coords[1], &coords[2]];
        let mut pre1: Vec<Vec<f64>> = vec![vec![0.0; n]; h];
        for (co, pre) in pre1.iter_mut().enumerate() {
            let w = &self.params[layout.trunk_w + co * TRUNK_CHANNELS * KERNEL..];
            for (ci, input) in trunk_in.iter().enumerate() {
                conv3_accumulate(input, &w[ci * KERNEL..ci * KERNEL + KERNEL], r, pre);
            }
            let wc = &self.params
                [layout.control_w + co * KERNEL..layout.control_w + (co + 1) * KERNEL];
            conv3_accumulate(cond, wc, r, pre);
            let mut bias = self.params[layout.trunk_b + co];
            for (e, &f) in temb.iter().enumerate() {
                bias += self.params[layout.time_w + co * cfg.time_features + e] * f;
            }
            for (j, &cj) in c.iter().enumerate() {
                bias += self.params[layout.image_w + co * cfg.image_cond_dim + j] * cj;
            }
            for v in pre.iter_mut() {
                *v = (*v + bias).tanh();
            }
        }
        let hidden1 = pre1;

        // multiplicative time gate: g1 = h1 * (1 + TG . temb), so the field
        // can carry time-dependent gain (the straight-path target needs it)
        let mut gated1 = hidden1.clone();
        for (co, channel) in gated1.iter_mut().enumerate() {
            let mut gate = 1.0;
            for (e, &f) in temb.iter().enumerate() {
                gate += self.params[layout.time_gate + co * cfg.time_features + e] * f;
            }
            for v in channel.iter_mut() {
                *v *= gate;
            }
        }

        let mut hidden2: Vec<Vec<f64>> = vec![vec![0.0; n]; h];
        for (co, out) in hidden2.iter_mut().enumerate() {
            let w = &self.params[layout.mix_w + co * h * KERNEL..];
            for (ci, input) in gated1.iter().enumerate() {
                conv3_accumulate(input, &w[ci * KERNEL..ci * KERNEL + KERNEL], r, out);
            }
            let bias = self.params[layout.mix_b + co];
            for v in out.iter_mut() {
                *v = (*v + bias).tanh();
            }
        }

        let mut output = vec![self.params[layout.out_b]; n];
        for (g, channel) in hidden2.iter().enumerate() {
            let w = self.params[layout.out_w + g];
            for (o, &hv) in output.iter_mut().zip(channel) {
                *o += w * hv;
            }
        }
        ForwardTrace {
            hidden1,
            gated1,
            hidden2,
            output,
        }
    }

    /// Accumulate parameter gradients for one sample given `d loss / d out`.
    pub(crate) fn backward(
        &self,
        x: &[f64],
        t: f64,
        cond: &[f64],
        c: &[f64],
        trace: &ForwardTrace,
        dout: &[f64],
        grad: &mut [f64],
    ) {
        let cfg = &self.config;
        let layout = self.layout();
        let r = cfg.fine_resolution as usize;
        let n = r * r * r;
        let h = cfg.hidden;
        let temb = self.time_embedding(t);
        let coords = self.coord_channels();
        let trunk_in: [&[f64]; TRUNK_CHANNELS] = [x, &coords[0], &coords[1], &coords[2]];

        // output layer
        grad[layout.out_b] += dout.iter().sum::<f64>();
        let mut dh2: Vec<Vec<f64>> = vec![vec![0.0; n]; h];
        for g in 0..h {
            let mut dw = 0.0;
            let wo = self.params[layout.out_w + g];
            for v in 0..n {
                dw += dout[v] * trace.hidden2[g][v];
                dh2[g][v] = wo * dout[v];
            }
            grad[layout.out_w + g] += dw;
        }

        // through tanh of layer 2
        for g in 0..h {
            for v in 0..n {
                let y = trace.hidden2[g][v];
                dh2[g][v] *= 1.0 - y * y;
            }
        }

        // mixing conv: weight grads and grads into the gated activations
        let mut dgated1: Vec<Vec<f64>> = vec![vec![0.0; n]; h];
        for g in 0..h {
            grad[layout.mix_b + g] += dh2[g].iter().sum::<f64>();
            for ci in 0..h {
                let wbase = layout.mix_w + (g * h + ci) * KERNEL;
                conv3_weight_grad(&trace.gated1[ci], &dh2[g], r, &mut grad[wbase..wbase + KERNEL]);
                conv3_input_grad(
                    &self.params[wbase..wbase + KERNEL],
                    &dh2[g],
                    r,
                    &mut dgated1[ci],
                );
            }
        }

        // through the time gate, then through tanh of layer 1
        let mut dh1 = dgated1;
        for channel in 0..h {
            let mut gate = 1.0;
            for (e, &f) in temb.iter().enumerate() {
                gate += self.params[layout.time_gate + channel * cfg.time_features + e] * f;
            }
            let mut dgate_sum = 0.0;
            for v in 0..n {
                dgate_sum += dh1[channel][v] * trace.hidden1[channel][v];
            }
            for (e, &f) in temb.iter().enumerate() {
                grad[layout.time_gate + channel * cfg.time_features + e] += dgate_sum * f;
            }
            for v in 0..n {
                let y = trace.hidden1[channel][v];
                dh1[channel][v] *= gate * (1.0 - y * y);
            }
        }

        for co in 0..h {
            let dsum: f64 = dh1[co].iter().sum();
            grad[layout.trunk_b + co] += dsum;
            for (e, &f) in temb.iter().enumerate() {
                grad[layout.time_w + co * cfg.time_features + e] += dsum * f;
            }
            for (j, &cj) in c.iter().enumerate() {
                grad[layout.image_w + co * cfg.image_cond_dim + j] += dsum * cj;
            }
            for (ci, input) in trunk_in.iter().enumerate() {
                let wbase = layout.trunk_w + (co * TRUNK_CHANNELS + ci) * KERNEL;
                conv3_weight_grad(input, &dh1[co], r, &mut grad[wbase..wbase + KERNEL]);
            }
            let wbase = layout.control_w + co * KERNEL;
            conv3_weight_grad(cond, &dh1[co], r, &mut grad[wbase..wbase + KERNEL]);
        }
    }
}

impl VelocityField for RefinerModel {
    fn fine_resolution(&self) -> u32 {
        self.config.fine_resolution
    }

    fn velocity(&self, x: &[f64], t: f64, cond: &[f64], c: &[f64]) -> Vec<f64> {
        self.forward_trace(x, t, cond, c).output
    }
}

/// `out[v] += sum_offsets w[o] * input[v + o]` with zero padding, 3^3 kernel.
fn conv3_accumulate(input: &[f64], w: &[f64], r: usize, out: &mut [f64]) {
    let ri = r as isize;
    for dz in -1..=1isize {
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                let wk = w[((dz + 1) * 9 + (dy + 1) * 3 + (dx + 1)) as usize];
                if wk == 0.0 {
                    continue;
                }
                for z in 0..ri {
                    let sz = z + dz;
                    if sz < 0 || sz >= ri {
                        continue;
                    }
                    for y in 0..ri {
                        let sy = y + dy;
                        if sy < 0 || sy >= ri {
                            continue;
                        }
                        let x0 = (-dx).max(0);
                        let x1 = (ri - dx).min(ri);
                        let out_row = (z * ri + y) * ri;
                        let in_row = (sz * ri + sy) * ri + dx;
                        for x in x0..x1 {
                            out[(out_row + x) as usize] += wk * input[(in_row + x) as usize];
                        }
                    }
                }
            }
        }
    }
}

/// `dw[o] += sum_v dout[v] * input[v + o]`.
fn conv3_weight_grad(input: &[f64], dout: &[f64], r: usize, dw: &mut [f64]) {
    let ri = r as isize;
    for dz in -1..=1isize {
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                let mut acc = 0.0;
                for z in 0..ri {
                    let sz = z + dz;
                    if sz < 0 || sz >= ri {
                        continue;
                    }
                    for y in 0..ri {
                        let sy = y + dy;
                        if sy < 0 || sy >= ri {
                            continue;
                        }
                        let x0 = (-dx).max(0);
                        let x1 = (ri - dx).min(ri);
                        let out_row = (z * ri + y) * ri;
                        let in_row = (sz * ri + sy) * ri + dx;
                        for x in x0..x1 {
                            acc += dout[(out_row + x) as usize] * input[(in_row + x) as usize];
                        }
                    }
                }
                dw[((dz + 1) * 9 + (dy + 1) * 3 + (dx + 1)) as usize] += acc;
            }
        }
    }
}

/// `dinput[u] += sum_offsets w[o] * dout[u - o]` (transposed convolution).
fn conv3_input_grad(w: &[f64], dout: &[f64], r: usize, dinput: &mut [f64]) {
    let ri = r as isize;
    for dz in -1..=1isize {
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                let wk = w[((dz + 1) * 9 + (dy + 1) * 3 + (dx + 1)) as usize];
                if wk == 0.0 {
                    continue;
                }
                // dinput[v + o] += w[o] * dout[v]
                for z in 0..ri {
                    let sz = z + dz;
                    if sz < 0 || sz >= ri {
                        continue;
                    }
                    for y in 0..ri {
                        let sy = y + dy;
                        if sy < 0 || sy >= ri {
                            continue;
                        }
                        let x0 = (-dx).max(0);
                        let x1 = (ri - dx).min(ri);
                        let out_row = (z * ri + y) * ri;
                        let in_row = (sz * ri + sy) * ri + dx;
                        for x in x0..x1 {
                            dinput[(in_row + x) as usize] += wk * dout[(out_row + x) as usize];
                        }
                    }
                }
            }
        }
    }
}

/// Upsample a coarse occupancy grid to the fine lattice as a +-1 channel.
pub fn condition_channel(coarse: &VoxelGrid, fine_resolution: u32) -> Result<Vec<f64>, FlowError> {
    let cr = coarse.resolution();
    if fine_resolution % cr != 0 {
        return Err(FlowError::NonDivisibleResolutions {
            fine: fine_resolution,
            coarse: cr,
        });
    }
    let factor = fine_resolution / cr;
    let r = fine_resolution as usize;
    let mut out = vec![-1.0; r * r * r];
    let mut v = 0;
    for z in 0..fine_resolution {
        for y in 0..fine_resolution {
            for x in 0..fine_resolution {
                if coarse.contains((x / factor, y / factor, z / factor)) {
                    out[v] = 1.0;
                }
                v += 1;
            }
        }
    }
    Ok(out)
}

/// Fine occupancy as a +-1 tensor in x-fastest order.
pub fn occupancy_tensor(grid: &VoxelGrid) -> Vec<f64> {
    let r = grid.resolution() as usize;
    let mut out = vec![-1.0; r * r * r];
    for i in grid.indices() {
        out[i as usize] = 1.0;
    }
    out
}

/// Threshold a real-valued tensor at zero back into an occupancy grid.
pub fn tensor_to_grid(values: &[f64], resolution: u32) -> Result<VoxelGrid, FlowError> {
    let n = (resolution as usize).pow(3);
    if values.len() != n {
        return Err(FlowError::ShapeMismatch {
            expected: n,
            got: values.len(),
        });
    }
    Ok(VoxelGrid::from_indices(
        resolution,
        values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(i, _)| i as u32),
    )?)
}
