//! Deterministic synthetic stand-ins for the patch-classification tasks,
//! large images with image-level labels, and survival cohorts. Everything is
//! a pure function of the seed (xoshiro256++ streams, see [`crate::rng`]).

pub mod files;
pub mod motif;
pub mod patches;
pub mod survival;
pub mod wsi;

pub use files::{read_patch_task, read_wsi_labels, write_patch_task, write_wsi_labels, WsiLabelRow};
pub use motif::{MotifSpec, Texture};
pub use patches::gen_patch_tasks;
pub use survival::gen_survival;
pub use wsi::{coverage_recount, gen_mini_wsi, render_mini_wsi, MiniWsi, MiniWsiLabel, WsiGenConfig};
