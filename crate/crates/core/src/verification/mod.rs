//! Manufactured solutions, error norms, displacement post-processing, rate
//! tables and the experiment drivers.

pub mod errors;
pub mod experiments;
pub mod loaded;
pub mod manufactured;
pub mod postprocess;
pub mod rates;

pub use errors::{relative_error_on_fine, FieldErrors};
pub use experiments::{
    run_convergence_experiment, run_locking_experiment, run_single, temporal_order_study, ConvergenceConfig, DtRule, ExperimentError,
    LockingConfig, LockingRow, LockingTable, SingleRun, TemporalStudy,
};
pub use loaded::LoadProblem;
pub use manufactured::ManufacturedCase;
pub use postprocess::postprocess_displacement;
pub use rates::{convergence_rate, RateError, RateRow, RateTable};
