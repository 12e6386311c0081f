//! Simulation, Lyapunov checks and dwell-time certificates for nonlinear
//! time-delay systems whose impulses depend on the delayed state.

pub mod certificates;
pub mod error;
pub mod history;
pub mod integrator;
pub mod linalg;
pub mod lyapunov;
pub mod model;
pub mod scenarios;
pub mod verifier;

pub use certificates::{certify, AdmissibleSet, CertificateInputs, CertificateReport, Theorem};
pub use error::{Error, Result};
pub use history::{History, JumpRecord, Segment};
pub use integrator::{
    refine_check, simulate, simulate_with, ConvergenceTable, JumpEvent, SimulationOptions,
    Trajectory,
};
pub use linalg::Matrix;
pub use lyapunov::{
    gain, JumpReport, LyapunovPair, TheoremMode, Tolerance, VValue, ViolationReport,
};
pub use model::{
    DwellClass, ImpulseSchedule, ImpulsiveSystem, InputSignal, ScheduleReport, StateView,
};
pub use verifier::{
    check_envelope, fit_envelope, run_ensemble, zero_input_convergence, EnsembleSpec, EnvelopeSpec,
    RunProfile,
};
