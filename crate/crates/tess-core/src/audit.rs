//! Counters that observe what the engine actually does at run time, used to
//! cross-check the analytical cost model against live executions.

use crate::traces::TraceState;

/// Running count of multiply-accumulates spent producing learning signals.
/// Forward-pass and readout projections are not counted here.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MacCounter {
    pub lsg_macs: u64,
}

impl MacCounter {
    pub fn new() -> MacCounter {
        MacCounter::default()
    }

    pub fn add(&mut self, macs: u64) {
        self.lsg_macs += macs;
    }

    pub fn reset(&mut self) {
        self.lsg_macs = 0;
    }
}

/// Scalars held by one layer's trace state.
pub fn trace_scalars_per_layer(state: &TraceState) -> usize {
    state.scalar_count()
}

/// Scalars held by all trace states of a network, measured on the live
/// allocations rather than predicted from the architecture.
pub fn trace_scalars(states: &[TraceState]) -> usize {
    states.iter().map(TraceState::scalar_count).sum()
}
