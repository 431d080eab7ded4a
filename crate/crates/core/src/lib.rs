//! Power-delivery-network impedance modeling and anomaly detection.
//!
//! Boards are described as RLC netlists, solved into port impedance
//! matrices over frequency, embedded as log-magnitude curves, and compared
//! with discrete Frechet distances. Golden-model thresholding and FD-KNN
//! classification sit on top, together with seeded Monte-Carlo campaigns
//! and Touchstone I/O.

pub mod boards;
pub mod campaign;
pub mod detector;
pub mod frechet;
pub mod linalg;
pub mod netlist;
pub mod report;
pub mod seed;
pub mod solver;
pub mod sparams;
pub mod touchstone;
pub mod toy;

pub use num_complex::Complex64;

pub use boards::{decap_chain_board, make_decap_chain_board, DecapChainParams, ATTINY85_RLC, SOT23_RLC};
pub use detector::{
    accuracy, best_accuracy, detect, fd_knn, fit_golden, roc, DetectError, DetectionReport, GoldenModel,
    LabeledBoard, LabeledLibrary, RocCurve, Statistic, Verdict,
};
pub use frechet::{
    embed_profile, fd_prime, frechet, frechet_with_coupling, CouplingPath, EmbeddedBoard, FdConfig, FrechetError,
    Norm, ProfileCurve,
};
pub use linalg::CMatrix;
pub use netlist::{
    AnomalyKind, AnomalySpec, BranchKind, CapacitorSpec, Diagnostic, DiagnosticKind, NetlistError, PdnNetlist,
    PortSpec, RlcBranch, ToleranceModel, GROUND,
};
pub use solver::{branch_admittance, solve_at_frequency, solve_z, BoardSignature, FrequencyGrid, Provenance, SolveError};
pub use sparams::{s_to_z, shunt_through_z21, z_to_s, ConversionError, SParamSweep};
pub use toy::{toy_z11, toy_z13, ToyNetwork};
pub use campaign::{
    run_campaign, run_knn_campaign, run_placement_grid, run_port_ablation, run_sensitivity_sweep, run_tolerance_sweep,
    AccuracyGrid, CampaignConfig, CampaignError, CampaignOutcome,
};
pub use touchstone::{parse_touchstone, write_touchstone, TouchstoneDocument, TouchstoneError, TouchstoneOptions};
