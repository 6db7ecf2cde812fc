//! Point annotation probability maps for dense object counting.
//!
//! * [`kernel`]: generalized Gaussian kernels, hand-designed target maps
//!   and the per-pixel L2 loss.
//! * [`cost`], [`ot`], [`loss`]: the GGD-L2 transport cost, a log-domain
//!   Sinkhorn solver with an exact small-instance oracle, and the combined
//!   transport plus similarity-count objective with its gradient.
//! * [`metrics`]: MAE/MSE, GAME and point localization matching.
//! * [`noise`], [`fit`]: annotation displacement, a free-map fitting
//!   surrogate for training, and the robustness sweep combining both.

pub mod cli;
pub mod cost;
pub mod error;
pub mod fit;
pub mod io;
pub mod kernel;
pub mod loss;
pub mod metrics;
pub mod noise;
pub mod ot;
pub mod types;

pub use cost::{build_cost_matrix, cost, CostFamily, CostMatrix, CostSpec};
pub use error::{PapmError, Result};
pub use fit::{fit_map, FitConfig, FitInit, FitLoss, FitResult};
pub use io::{read_field, read_map, read_points, write_field, write_map, write_points, MapFormat};
pub use kernel::{generate_hd_papm, kernel_value, l2_loss, KernelSpec, Normalization};
pub use loss::{al_papm_loss, similarity_count_loss, AlPapmLoss, GradientRoute, LossBreakdown};
pub use metrics::{game, localize_and_match, mae_mse, EvalRecord, Localization};
pub use noise::{perturb, robustness_sweep, PerturbMode, PerturbSpec, SweepConfig, SweepMetric};
pub use ot::{
    exact_ot, normalize_measures, ot_gradient, sinkhorn, transport_cost_gradient, EpsilonRule, SinkhornConfig,
    TransportSolution,
};
pub use types::{Field, GgdParams, GridMap, Point, PointSet, Shape};
