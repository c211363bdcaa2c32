//! Squared-error loss, classic momentum SGD and the training loop.

use std::io::{Cursor, Read};
use std::path::Path;
use std::time::Instant;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, backward, forward, NetworkParams, NetworkSpec};
use crate::real::Real;
use crate::tensor::{ensure_same_shape, Tensor};

/// How the squared error is normalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossNorm {
    /// Divide by the number of elements; learning rates do not depend on patch size.
    #[default]
    Mean,
    /// Raw `‖f − F‖²`.
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Learning rate of layers `1..L−1`.
    pub lr_body: f64,
    /// Learning rate of the projection layer `L`.
    pub lr_last: f64,
    pub momentum: f64,
    /// Factor applied to both learning rates every `decay_period` epochs.
    pub decay: f64,
    pub decay_period: usize,
    pub seed: u64,
    pub loss: LossNorm,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            batch_size: 64,
            lr_body: 0.05,
            lr_last: 0.005,
            momentum: 0.95,
            decay: 0.5,
            decay_period: 60,
            seed: 0,
            loss: LossNorm::Mean,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if !(self.lr_body > 0.0 && self.lr_last > 0.0) || !self.lr_body.is_finite() || !self.lr_last.is_finite() {
            return bad(format!(
                "learning rates must be positive, got {} / {}",
                self.lr_body, self.lr_last
            ));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad(format!("decay factor must be in (0, 1], got {}", self.decay));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.decay_period == 0 {
            return bad("epochs, batch_size and decay_period must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerClass {
    /// Layers under the skip connection.
    Body,
    /// The projection layer.
    Last,
}

/// Step-decayed learning rate: `base · decay^⌊epoch / decay_period⌋`.
pub fn lr_at_epoch(config: &TrainConfig, epoch: usize, class: LayerClass) -> Result<f64> {
    if epoch >= config.epochs {
        return Err(Error::Config(format!(
            "epoch {epoch} out of range for a {}-epoch schedule",
            config.epochs
        )));
    }
    let base = match class {
        LayerClass::Body => config.lr_body,
        LayerClass::Last => config.lr_last,
    };
    let steps = (epoch / config.decay_period) as i32;
    Ok(base * config.decay.powi(steps))
}

/// Squared error between prediction and target, and its gradient w.r.t. the prediction.
pub fn loss_and_grad<T: Real>(pred: &Tensor<T>, target: &Tensor<T>, norm: LossNorm) -> Result<(f64, Tensor<T>)> {
    ensure_same_shape("loss", target.shape(), pred.shape())?;
    let count = pred.len().max(1) as f64;
    let scale = match norm {
        LossNorm::Mean => 1.0 / count,
        LossNorm::Sum => 1.0,
    };
    let mut sum = 0.0f64;
    let two_scale = T::from_f64_lossy(2.0 * scale);
    let mut grad = Tensor::zeros(pred.shape());
    for ((g, &p), &t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let d = p - t;
        let d64 = d.as_f64();
        sum += d64 * d64;
        *g = two_scale * d;
    }
    Ok((sum * scale, grad))
}

/// Momentum buffers, one per parameter tensor, plus the update counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T = f32> {
    pub velocity: NetworkParams<T>,
    pub step: u64,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(spec: &NetworkSpec) -> Result<Self> {
        Ok(OptimizerState {
            velocity: NetworkParams::zeros(spec)?,
            step: 0,
        })
    }
}

/// `v ← μ·v − ε·g; θ ← θ + v`, with `ε = lr_last` for the final layer and
/// `lr_body` everywhere else.
pub fn momentum_step<T: Real>(
    params: &mut NetworkParams<T>,
    state: &mut OptimizerState<T>,
    grads: &NetworkParams<T>,
    lr_body: f64,
    lr_last: f64,
    momentum: f64,
) -> Result<()> {
    let n = params.layers.len();
    if state.velocity.layers.len() != n || grads.layers.len() != n {
        return Err(Error::Config("parameter, velocity and gradient layer counts differ".into()));
    }
    for (i, ((p, v), g)) in params
        .layers
        .iter_mut()
        .zip(&mut state.velocity.layers)
        .zip(&grads.layers)
        .enumerate()
    {
        let shape = p.weights().shape();
        ensure_same_shape("momentum_step", shape, v.weights().shape())?;
        ensure_same_shape("momentum_step", shape, g.weights().shape())?;
        let lr = T::from_f64_lossy(if i + 1 == n { lr_last } else { lr_body });
        let mu = T::from_f64_lossy(momentum);
        update(p.weights_mut().data_mut(), v.weights_mut().data_mut(), g.weights().data(), lr, mu);
        update(p.bias_mut(), v.bias_mut(), g.bias(), lr, mu);
    }
    state.step += 1;
    Ok(())
}

fn update<T: Real>(theta: &mut [T], velocity: &mut [T], grad: &[T], lr: T, mu: T) {
    for ((t, v), &g) in theta.iter_mut().zip(velocity.iter_mut()).zip(grad) {
        *v = mu * *v - lr * g;
        *t += *v;
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub lr_body: f64,
    pub lr_last: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    /// Tab-separated records. Wall time is optional because it is the only
    /// field that differs between otherwise identical runs.
    pub fn to_tsv(&self, with_time: bool) -> String {
        let mut out = String::from("epoch\tmean_loss\tlr_body\tlr_last");
        if with_time {
            out.push_str("\twall_seconds");
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.to_line(with_time));
            out.push('\n');
        }
        out
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mean_loss).collect()
    }
}

impl EpochRecord {
    pub fn to_line(&self, with_time: bool) -> String {
        // {:e} prints the shortest representation that round-trips.
        let mut line = format!("{}\t{:e}\t{:e}\t{:e}", self.epoch, self.mean_loss, self.lr_body, self.lr_last);
        if with_time {
            line.push_str(&format!("\t{:.3}", self.wall_seconds));
        }
        line
    }
}

/// A training pair: network input `G` (1 × S+1 × h × w) and target (1 × S × h × w).
pub type Sample<T> = (Tensor<T>, Tensor<T>);

/// Training loop state. Resuming from a saved [`Trainer`] at epoch `k`
/// replays exactly what an uninterrupted run does from `k` on: the sample
/// order of each epoch is derived from `(seed, epoch)` only.
pub struct Trainer<T = f32> {
    pub spec: NetworkSpec,
    pub config: TrainConfig,
    pub params: NetworkParams<T>,
    pub state: OptimizerState<T>,
    /// Index of the next epoch to run.
    pub epoch: usize,
    pub log: TrainLog,
}

impl<T: Real> Trainer<T> {
    pub fn new(spec: NetworkSpec, config: TrainConfig, params: NetworkParams<T>) -> Result<Self> {
        config.validate()?;
        params.check_spec(&spec)?;
        let state = OptimizerState::new(&spec)?;
        Ok(Trainer {
            spec,
            config,
            params,
            state,
            epoch: 0,
            log: TrainLog::default(),
        })
    }

    pub fn is_finished(&self) -> bool {
        self.epoch >= self.config.epochs
    }

    fn check_data(&self, data: &[Sample<T>]) -> Result<usize> {
        let first = data
            .first()
            .ok_or_else(|| Error::Config("training set is empty".into()))?;
        let (gs, ts) = (first.0.shape(), first.1.shape());
        if gs.n != 1 || gs.c != self.spec.input_channels() || ts != gs.with_channels(self.spec.bands) {
            return Err(Error::Config(format!(
                "training pairs must be 1x{}xHxW inputs with 1x{}xHxW targets, got {gs} and {ts}",
                self.spec.input_channels(),
                self.spec.bands
            )));
        }
        for (g, t) in data {
            ensure_same_shape("training input", gs, g.shape())?;
            ensure_same_shape("training target", ts, t.shape())?;
        }
        let batches = data.len() / self.config.batch_size;
        if batches == 0 {
            return Err(Error::Config(format!(
                "{} training pairs cannot fill one batch of {}",
                data.len(),
                self.config.batch_size
            )));
        }
        Ok(batches)
    }

    /// Runs one epoch; the trailing incomplete batch is dropped.
    pub fn run_epoch(&mut self, data: &[Sample<T>]) -> Result<EpochRecord> {
        let batches = self.check_data(data)?;
        let epoch = self.epoch;
        let started = Instant::now();
        let lr_body = lr_at_epoch(&self.config, epoch, LayerClass::Body)?;
        let lr_last = lr_at_epoch(&self.config, epoch, LayerClass::Last)?;

        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);

        let mut total = 0.0;
        for (b, chunk) in order.chunks_exact(self.config.batch_size).enumerate() {
            let inputs: Vec<_> = chunk.iter().map(|&i| &data[i].0).collect();
            let targets: Vec<_> = chunk.iter().map(|&i| &data[i].1).collect();
            let g = Tensor::stack(&inputs)?;
            let f = Tensor::stack(&targets)?;

            let (pred, cache) = forward(&self.params, &self.spec, &g)?;
            let (loss, grad) = loss_and_grad(&pred, &f, self.config.loss)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, batch: b, loss });
            }
            let grads = backward(&self.params, &self.spec, &cache, &grad)?;
            momentum_step(&mut self.params, &mut self.state, &grads, lr_body, lr_last, self.config.momentum)?;
            total += loss;
        }

        let record = EpochRecord {
            epoch,
            mean_loss: total / batches as f64,
            lr_body,
            lr_last,
            wall_seconds: started.elapsed().as_secs_f64(),
        };
        self.log.records.push(record.clone());
        self.epoch += 1;
        Ok(record)
    }

    /// Runs the remaining epochs, calling `on_epoch` after each one.
    pub fn run(&mut self, data: &[Sample<T>], mut on_epoch: impl FnMut(&Self, &EpochRecord) -> Result<()>) -> Result<()> {
        while !self.is_finished() {
            let record = self.run_epoch(data)?;
            on_epoch(self, &record)?;
        }
        Ok(())
    }

    /// Serialises parameters, momentum buffers and progress.
    ///
    /// ```text
    /// magic "DRPS" | u32 version 1 | u64 next epoch | u64 step
    /// u64 length + parameter checkpoint | u64 length + velocity checkpoint
    /// ```
    pub fn save_state(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |e| Error::io(path, e);
        let mut buf = Vec::new();
        buf.extend_from_slice(STATE_MAGIC);
        buf.write_u32::<LittleEndian>(1).map_err(io)?;
        buf.write_u64::<LittleEndian>(self.epoch as u64).map_err(io)?;
        buf.write_u64::<LittleEndian>(self.state.step).map_err(io)?;
        for p in [&self.params, &self.state.velocity] {
            let mut part = Vec::new();
            model::write_checkpoint(p, &self.spec, &mut part).map_err(io)?;
            buf.write_u64::<LittleEndian>(part.len() as u64).map_err(io)?;
            buf.extend_from_slice(&part);
        }
        std::fs::write(path, buf).map_err(io)
    }

    /// Restores a trainer written by [`Trainer::save_state`]. The log starts
    /// empty; callers that need the earlier records keep them separately.
    pub fn load_state(path: impl AsRef<Path>, config: TrainConfig) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let fmt = |reason: String| Error::format(path, reason);
        let mut cur = Cursor::new(&bytes[..]);
        let mut magic = [0u8; 4];
        cur.read_exact(&mut magic).map_err(|_| fmt("truncated magic".into()))?;
        if &magic != STATE_MAGIC {
            return Err(fmt("not a training state file".into()));
        }
        let version = cur.read_u32::<LittleEndian>().map_err(|_| fmt("truncated header".into()))?;
        if version != 1 {
            return Err(fmt(format!("unsupported state version {version}")));
        }
        let epoch = cur.read_u64::<LittleEndian>().map_err(|_| fmt("truncated header".into()))? as usize;
        let step = cur.read_u64::<LittleEndian>().map_err(|_| fmt("truncated header".into()))?;
        let mut parts = Vec::with_capacity(2);
        for _ in 0..2 {
            let len = cur.read_u64::<LittleEndian>().map_err(|_| fmt("truncated section".into()))? as usize;
            let start = cur.position() as usize;
            let section = bytes
                .get(start..start.saturating_add(len))
                .ok_or_else(|| fmt("truncated section".into()))?;
            parts.push(model::read_checkpoint::<T>(section).map_err(fmt)?);
            cur.set_position((start + len) as u64);
        }
        let (velocity, _) = parts.pop().expect("two sections");
        let (params, spec) = parts.pop().expect("two sections");
        velocity.check_spec(&spec)?;
        let mut trainer = Trainer::new(spec, config, params)?;
        trainer.state = OptimizerState { velocity, step };
        trainer.epoch = epoch;
        Ok(trainer)
    }
}

const STATE_MAGIC: &[u8; 4] = b"DRPS";

/// Trains `params` for `config.epochs` epochs.
pub fn train<T: Real>(
    params: NetworkParams<T>,
    spec: &NetworkSpec,
    config: &TrainConfig,
    data: &[Sample<T>],
) -> Result<(NetworkParams<T>, TrainLog)> {
    let mut trainer = Trainer::new(spec.clone(), config.clone(), params)?;
    trainer.run(data, |_, _| Ok(()))?;
    Ok((trainer.params, trainer.log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_network;
    use crate::tensor::{ConvKernel, Shape};

    fn scalar(v: f64) -> Tensor<f64> {
        Tensor::from_vec(Shape::new(1, 1, 1, 1), vec![v]).unwrap()
    }

    #[test]
    fn loss_scalar_case() {
        let (loss, grad) = loss_and_grad(&scalar(3.0), &scalar(1.0), LossNorm::Mean).unwrap();
        assert_eq!(loss, 4.0);
        assert_eq!(grad.data(), &[4.0]);
        let (loss, grad) = loss_and_grad(&scalar(1.0), &scalar(1.0), LossNorm::Sum).unwrap();
        assert_eq!((loss, grad.data()[0]), (0.0, 0.0));
    }

    #[test]
    fn loss_sum_vs_mean() {
        let p = Tensor::<f64>::from_vec(Shape::new(1, 1, 1, 4), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let t = Tensor::zeros(p.shape());
        let (sum, gs) = loss_and_grad(&p, &t, LossNorm::Sum).unwrap();
        let (mean, gm) = loss_and_grad(&p, &t, LossNorm::Mean).unwrap();
        assert_eq!(sum, 30.0);
        assert_eq!(mean, 7.5);
        assert_eq!(gs.data(), &[2.0, 4.0, 6.0, 8.0]);
        assert_eq!(gm.data(), &[0.5, 1.0, 1.5, 2.0]);
        assert!(loss_and_grad(&p, &scalar(0.0), LossNorm::Mean).is_err());
    }

    #[test]
    fn schedule_values() {
        let c = TrainConfig::default();
        assert_eq!(lr_at_epoch(&c, 0, LayerClass::Body).unwrap(), 0.05);
        assert_eq!(lr_at_epoch(&c, 59, LayerClass::Body).unwrap(), 0.05);
        assert_eq!(lr_at_epoch(&c, 60, LayerClass::Body).unwrap(), 0.025);
        assert_eq!(lr_at_epoch(&c, 299, LayerClass::Last).unwrap(), 3.125e-4);
        assert!(lr_at_epoch(&c, 300, LayerClass::Body).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { momentum: 1.0, ..Default::default() },
            TrainConfig { momentum: -0.1, ..Default::default() },
            TrainConfig { lr_body: 0.0, ..Default::default() },
            TrainConfig { decay: 0.0, ..Default::default() },
            TrainConfig { decay: 1.5, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    fn one_param_net(theta: f64) -> (NetworkSpec, NetworkParams<f64>) {
        let spec = NetworkSpec::uniform(2, 1, 1, 1);
        let mut params = NetworkParams::zeros(&spec).unwrap();
        params.layers[0] = ConvKernel::new(Tensor::full(Shape::new(2, 2, 1, 1), theta), vec![theta; 2]).unwrap();
        params.layers[1] = ConvKernel::new(Tensor::full(Shape::new(1, 2, 1, 1), theta), vec![theta]).unwrap();
        (spec, params)
    }

    #[test]
    fn zero_momentum_is_plain_gradient_descent() {
        let (spec, mut params) = one_param_net(1.0);
        let mut state = OptimizerState::new(&spec).unwrap();
        let mut grads = params.clone();
        for (i, v) in grads.layers.iter_mut().enumerate() {
            v.weights_mut().data_mut().iter_mut().for_each(|w| *w = 0.3 + i as f64);
        }
        let expected: Vec<f64> = params
            .flatten()
            .iter()
            .zip(grads.flatten())
            .enumerate()
            .map(|(i, (&p, g))| p - if i >= 6 { 0.01 } else { 0.1 } * g)
            .collect();
        momentum_step(&mut params, &mut state, &grads, 0.1, 0.01, 0.0).unwrap();
        assert_eq!(params.flatten(), expected);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn constant_gradient_two_steps() {
        let (spec, mut params) = one_param_net(0.0);
        let mut state = OptimizerState::new(&spec).unwrap();
        let mut grads = params.clone();
        grads.layers.iter_mut().for_each(|k| {
            k.weights_mut().data_mut().fill(1.0);
            k.bias_mut().fill(1.0);
        });
        let (mu, eps, g) = (0.95, 0.05, 1.0);
        momentum_step(&mut params, &mut state, &grads, eps, eps, mu).unwrap();
        assert_eq!(state.velocity.layers[0].bias()[0], -eps * g);
        momentum_step(&mut params, &mut state, &grads, eps, eps, mu).unwrap();
        let v2 = state.velocity.layers[0].bias()[0];
        assert!((v2 - (-eps * g * (1.0 + mu))).abs() < 1e-15);
        let total = params.layers[0].bias()[0];
        assert!((total - (-eps * g * (1.0 + (1.0 + mu)))).abs() < 1e-15);
    }

    #[test]
    fn velocity_decays_geometrically_without_gradient() {
        let (spec, mut params) = one_param_net(0.0);
        let mut state = OptimizerState::new(&spec).unwrap();
        state.velocity.layers[1].bias_mut()[0] = 1.0;
        let zero = NetworkParams::zeros(&spec).unwrap();
        let mu = 0.9;
        let mut prev = 0.0;
        for k in 1..=6 {
            momentum_step(&mut params, &mut state, &zero, 0.1, 0.1, mu).unwrap();
            let now = params.layers[1].bias()[0];
            assert!(((now - prev) - mu.powi(k)).abs() < 1e-12);
            prev = now;
        }
    }

    #[test]
    fn rejects_mismatched_state() {
        let (spec, mut params) = one_param_net(0.0);
        let other = NetworkSpec::uniform(3, 1, 1, 1);
        let mut state = OptimizerState::new(&other).unwrap();
        let grads = NetworkParams::zeros(&spec).unwrap();
        assert!(momentum_step(&mut params, &mut state, &grads, 0.1, 0.1, 0.9).is_err());
    }

    fn toy_data(count: usize) -> (NetworkSpec, Vec<Sample<f32>>) {
        let spec = NetworkSpec::uniform(3, 2, 4, 3);
        let data = (0..count)
            .map(|i| {
                let g = Tensor::from_fn(Shape::new(1, 3, 6, 6), |_, c, y, x| ((c + y * 2 + x + i) % 5) as f32 * 0.2);
                let t = Tensor::from_fn(Shape::new(1, 2, 6, 6), |_, c, y, x| ((c + y + x * 2 + i) % 4) as f32 * 0.25);
                (g, t)
            })
            .collect();
        (spec, data)
    }

    #[test]
    fn training_is_deterministic_and_drops_partial_batches() {
        let (spec, data) = toy_data(5);
        let config = TrainConfig {
            epochs: 4,
            batch_size: 2,
            lr_body: 0.01,
            lr_last: 0.01,
            momentum: 0.9,
            decay_period: 2,
            seed: 3,
            ..Default::default()
        };
        let p0: NetworkParams<f32> = init_network(&spec, 1).unwrap();
        let (a, log_a) = train(p0.clone(), &spec, &config, &data).unwrap();
        let (b, log_b) = train(p0, &spec, &config, &data).unwrap();
        assert_eq!(a, b);
        assert_eq!(log_a.to_tsv(false), log_b.to_tsv(false));
        assert_eq!(log_a.records.len(), 4);
        assert_eq!(log_a.records[2].lr_body, 0.005);
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let (spec, data) = toy_data(4);
        let config = TrainConfig {
            epochs: 6,
            batch_size: 2,
            lr_body: 0.02,
            lr_last: 0.02,
            seed: 8,
            decay_period: 3,
            ..Default::default()
        };
        let p0: NetworkParams<f32> = init_network(&spec, 2).unwrap();
        let (full, full_log) = train(p0.clone(), &spec, &config, &data).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.bin");
        let mut t = Trainer::new(spec.clone(), config.clone(), p0).unwrap();
        for _ in 0..3 {
            t.run_epoch(&data).unwrap();
        }
        t.save_state(&path).unwrap();
        drop(t);
        let mut resumed = Trainer::<f32>::load_state(&path, config).unwrap();
        assert_eq!(resumed.epoch, 3);
        resumed.run(&data, |_, _| Ok(())).unwrap();
        assert_eq!(resumed.params, full);
        assert_eq!(resumed.log.losses(), full_log.losses()[3..]);
    }

    #[test]
    fn divergence_is_reported() {
        let (spec, data) = toy_data(2);
        let config = TrainConfig {
            epochs: 50,
            batch_size: 1,
            lr_body: 1e4,
            lr_last: 1e4,
            ..Default::default()
        };
        let p0: NetworkParams<f32> = init_network(&spec, 2).unwrap();
        match train(p0, &spec, &config, &data) {
            Err(Error::Diverged { epoch, .. }) => assert!(epoch < 50),
            other => panic!("expected divergence, got {:?}", other.map(|(_, l)| l)),
        }
    }

    #[test]
    fn batch_larger_than_dataset_is_an_error() {
        let (spec, data) = toy_data(3);
        let p0: NetworkParams<f32> = init_network(&spec, 2).unwrap();
        let config = TrainConfig { batch_size: 4, ..Default::default() };
        assert!(matches!(train(p0, &spec, &config, &data), Err(Error::Config(_))));
    }
}
