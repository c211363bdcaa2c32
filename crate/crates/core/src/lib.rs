//! Deep residual network for multispectral pan-sharpening, built from
//! scratch: tensors and convolution, the two-stage residual model, momentum
//! SGD training, bicubic resampling with reduced-resolution simulation, and
//! the Q / ERGAS / SAM / SCC quality indices.

pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod real;
pub mod resample;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use metrics::{evaluate_all, MetricsReport};
pub use model::{backward, forward, init_network, predict, ForwardCache, NetworkParams, NetworkSpec};
pub use optim::{lr_at_epoch, loss_and_grad, momentum_step, train, LayerClass, LossNorm, OptimizerState, TrainConfig, TrainLog, Trainer};
pub use real::Real;
pub use resample::{bicubic_downsample, bicubic_upsample, build_input, extract_patches, wald_simulate, ScenePair};
pub use tensor::{add, conv2d_backward, conv2d_forward, relu_backward, relu_forward, ConvGrads, ConvKernel, Shape, Tensor};
