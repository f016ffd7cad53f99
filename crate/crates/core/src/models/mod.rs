//! The three networks: the shared patch encoder, the per-task
//! classification heads used while training it, and the image-level CNN that
//! consumes compressed images.

pub mod encoder;
pub mod graph;
pub mod grid;
pub mod head;
pub mod init;
pub mod task;
pub mod wsi;

pub use encoder::EncoderSpec;
pub use graph::{apply_stats, Graph};
pub use grid::{pad_grid, stack_grids, EmbeddingGrid};
pub use head::{multitask_loss, BnBatching, HeadConfig, HeadSpec, TaskBatch};
pub use task::Task;
pub use wsi::{Objective, WsiCnnSpec};

/// Parameters that are running statistics rather than trainable weights.
pub fn is_buffer(name: &str) -> bool {
    name.ends_with(".running_mean") || name.ends_with(".running_var")
}

/// Parameters that carry the L2 penalty of the image-level network.
pub fn is_weight(name: &str) -> bool {
    [".kernel", ".depth", ".point", ".weight"]
        .iter()
        .any(|s| name.ends_with(s))
}
