//! Human-intent prediction from activity narrations, grounded in a semantic
//! map, and a discrete-time simulator for disturbance-aware room coverage.
//!
//! The pipeline is: an [`activity`] program drives the simulated human; the
//! [`narrator`] turns completed actions into text; a [`scorer`] backend
//! assigns token probabilities to every map label as a completion of
//! narration + binding sequence; the [`reasoner`] turns those into item and
//! partition relevancy; a [`policy`] picks the robot's next partition; and
//! [`sim`] runs it all against the human trace and measures disturbance and
//! coverage.

pub mod activity;
pub mod error;
pub mod map;
pub mod narrator;
pub mod policy;
pub mod reasoner;
pub mod scorer;
pub mod sim;

pub use activity::{
    bind_items, parse_program, simulate_human, ActivityProgram, AtomicAction, Binding, CompletedAction, DurationTable,
    ItemRef, OccupancyTrace,
};
pub use error::{Error, Result};
pub use map::{
    assign_items_to_partitions, label_multiplicities, load_map, overlap_volume, BoundingBox, Item, Partition, Room,
    SemanticMap,
};
pub use narrator::{narrate, Narration, ObservationHistory, Template, TemplateRegistry};
pub use policy::{select_next_partition, PolicyKind};
pub use reasoner::{aggregate_partitions, build_completion_set, compute_relevancy, PromptSpec, RelevancyScores};
pub use scorer::{make_backend, score_completions, Backend, BackendContext, CompletionScore};
pub use sim::{offline_oracle, run_batch, run_once, BatchSummary, RunMetrics, SimConfig};
