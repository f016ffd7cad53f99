//! Optimization: Adam, the plateau learning-rate schedule, patch
//! augmentation, and the two training loops (multitask patch-level and
//! image-level).

pub mod adam;
pub mod augment;
pub mod data;
pub mod history;
pub mod image_level;
pub mod multitask;
pub mod plateau;

pub use adam::{Adam, AdamConfig};
pub use augment::AugmentPolicy;
pub use data::{PatchSet, PatchTaskData};
pub use history::{EpochRecord, History};
pub use image_level::{predict, train_image_level, ImageTrainConfig, Targets, TrainedImageModel};
pub use multitask::{evaluate_accuracy, init_multitask, train_multitask, MultitaskConfig};
pub use plateau::{Direction, PlateauAction, PlateauConfig, PlateauSchedule};
