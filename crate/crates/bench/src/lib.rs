//! Fixtures shared by the benchmarks.

use pdnpulse_core::{
    embed_profile, make_decap_chain_board, solve_z, AnomalySpec, BoardSignature, FrequencyGrid, PdnNetlist,
    ProfileCurve, ToleranceModel, ATTINY85_RLC,
};

/// Decap chain board, optionally carrying the chip anomaly at position 3.
pub fn board(with_chip: bool) -> PdnNetlist {
    let net = make_decap_chain_board(false);
    if with_chip {
        let (r, l, c) = ATTINY85_RLC;
        net.apply_anomaly(&AnomalySpec::chip_at("chip", "n3", r, l, c)).expect("n3 exists")
    } else {
        net
    }
}

/// Solved variation instance of [`board`] on a log grid with `points` points.
pub fn signature(with_chip: bool, points: usize, trial: u64) -> BoardSignature {
    let grid = FrequencyGrid::log(3e5, 3e9, points).expect("valid grid");
    let net = board(with_chip).sample_variation(&ToleranceModel::gaussian(0.1, 7), trial);
    solve_z(&net, &grid).expect("board solves")
}

/// Self-impedance profile at port 1 of a variation instance.
pub fn profile(with_chip: bool, points: usize, trial: u64) -> ProfileCurve {
    embed_profile(&signature(with_chip, points, trial), 1, 1).expect("port 1 exists")
}
