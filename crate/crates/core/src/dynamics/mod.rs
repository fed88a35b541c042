//! Event-driven flow Ψ^t of the two-species hard-sphere system.

mod contact;
mod flow;
mod sample;

pub use contact::{next_event, time_to_contact, ContactKind, EventPrediction};
pub use flow::{advance, write_event_log, CollisionRecord, FlowOptions, FlowResult, PathologyKind, PathologyRecord};
pub use sample::{
    estimate_partition_function, mean_free_time, mean_relative_speeds, pathology_rate, sample_configuration,
    PartitionEstimate, PathologyStats, SampledConfiguration, SimBox, DEFAULT_ACCEPTANCE_FLOOR,
};
