//! Dense and recurrent network substrate with exact reverse-mode gradients.

pub mod dist;
pub mod finite_diff;
pub mod lstm;
pub mod mlp;
pub mod optim;
pub mod param;

pub use finite_diff::{finite_diff_grad, relative_error};
pub use lstm::{lstm_scan_reversed, Lstm, LstmGradients, LstmSpec, LstmTrace, LstmWeights};
pub use mlp::{mlp_forward, mlp_grad, Activation, DenseLayer, Gradients, Mlp, MlpCache, MlpSpec, MlpWeights};
pub use optim::{Adam, Optimizer, OptimizerKind, Sgd};
pub use param::{clip_grad_norm, l2_norm, ParamVector};
