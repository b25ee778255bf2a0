//! Szegedy quantum walks under percolation decoherence.
//!
//! Generic over the real scalar type (`f32` or `f64`); the aliases at the
//! bottom fix the scalar to `f64`, which is what the command-line tool uses.

pub mod detection;
pub mod error;
pub mod graph;
pub mod hitting;
pub mod linalg;
pub mod percolation;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod spectral;
pub mod walk;

pub use detection::{
    exact_mean_p1, exact_mean_p1_enumerated, reference_control_probabilities, removal_invariance_probe,
    run_detection_campaign, run_detection_trial, DetectionReport, DetectionTrialResult, GuaranteeKind, InvarianceProbe,
};
pub use error::{Error, Result};
pub use graph::{
    apply_marking, build_transition_matrix, generate_graph, submatrix_pm, Graph, GraphFamily, MarkedSet,
    TransitionMatrix,
};
pub use hitting::{
    classical_hitting_time, coherent_f_curve, coherent_qht, decoherent_f_curve, decoherent_qht, decoherent_qht_with,
    g_term_decomposition, GTermReport, HittingMode, HittingSummary, HittingTimeReport, TStar,
};
pub use percolation::{
    build_averaged_operator_exact, build_averaged_operator_mc, verify_ensemble_average, AveragedOperator, OperatorMode,
    PercolationModel, Variant,
};
pub use scalar::Real;
pub use spectral::{spectral_data, split_initial_state, BoundReport, EigenGroup, InitialStateSplit, SpectralData};
pub use walk::{build_walk_operator, evolve, initial_state, WalkOperator, WalkState};

pub type TransitionMatrixF64 = TransitionMatrix<f64>;
pub type WalkStateF64 = WalkState<f64>;
pub type WalkOperatorF64 = WalkOperator<f64>;
pub type SpectralDataF64 = SpectralData<f64>;
pub type BoundReportF64 = BoundReport<f64>;
pub type PercolationModelF64 = PercolationModel<f64>;
pub type AveragedOperatorF64 = AveragedOperator<f64>;
pub type HittingTimeReportF64 = HittingTimeReport<f64>;
pub type GTermReportF64 = GTermReport<f64>;
