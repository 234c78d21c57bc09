//! Virtual spectrum analyzer.

pub mod traces;
pub mod welch;

pub use traces::{
    assemble_trace_set, combine_correlations, combine_into, normalize_to_snl,
    CorrelationTraceSet, Normalization, TraceInputs,
};
pub use welch::{welch_psd, PsdEstimate, WelchAccumulator, Window};

/// Bins averaged for a design-frequency readout.
pub const READOUT_BINS: usize = 3;
