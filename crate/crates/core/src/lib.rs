//! Model-order-reduction toolkit built around randomized sub-sampling of
//! Hankel matrices, with snapshot POD and balanced POD baselines, PDE
//! benchmark generators, and error/cost reporting.

pub mod error;
pub mod hankel;
pub mod modal;
pub mod numerics;
pub mod pod;
pub mod problems;
pub mod report;
pub mod sampling;
pub mod snapshots;
pub mod textmat;

pub use error::{Error, Result};
pub use hankel::{apply_selection, build_hankel, HankelMatrix, Selection};
pub use modal::{
    hausdorff_distance, match_eigenvalues, realify, rom_simulate, Excitation, ModalRom,
    RomSource, RomTrajectory,
};
pub use numerics::{eig, solve_linear, svd, EigResult, SvdResult, C64, DEFAULT_RANK_TOL};
pub use pod::{
    biorthogonalize, bpod, eigenrecon_auto, eigenrecon_cross, rpod, rpod_repeated, snapshot_pod,
    BpodRom, ConsistencyReport, PodBasis,
};
pub use problems::{
    build_channel, build_duffing_fpk, build_pollutant, build_synthetic, ChannelConfig,
    DuffingFpkConfig, GridSpec2D, PollutantConfig, Scheme, SyntheticConfig,
};
pub use report::{
    compare_eigenvalues, compare_outputs, cost_report, CostReport, ErrorSeries, ExcitationSpec,
    PipelineDims, ReducedModel,
};
pub use sampling::{
    combined_failure, draw_selection, min_columns, rank_failure_bound, BoundInputs, SamplingPlan,
};
pub use snapshots::{
    simulate_impulse, state_reconstruction, LtiSystem, SnapshotEnsemble, SnapshotKind,
};
