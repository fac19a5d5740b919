//! SFN downlink link-level simulation: OFDM numerology, phase noise,
//! PTRS layouts, the slot simulator, and the SINR-to-throughput mapping.

pub mod numerology;
pub mod phase_noise;
pub mod ptrs;
pub mod slot;
pub mod throughput;

pub use numerology::{NumerologyError, OfdmNumerology};
pub use phase_noise::{phase_noise_trace, PhaseNoiseTrace, PnMask};
pub use ptrs::{PtrsKind, PtrsLayout, PTRS_SUBCARRIERS};
pub use slot::{
    estimate_cpe, estimate_ici, precompensate, sfn_ofdm_slot, Compensation, Grid, IciEstimate,
    RrhSignal, SlotParams, SlotResult,
};
pub use throughput::{
    bler, effective_sinr_db, slot_throughput_bits, transport_block_bits, LinkCalibration, Mcs,
    McsError, OVERHEAD_FACTOR,
};
