//! Reverse-mode multilayer perceptrons and the generator / discriminator
//! wrappers built on them.

mod checkpoint;
mod mlp;
mod nets;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use mlp::{Mlp, OutputActivation, Tape};
pub use nets::{
    encode_step, Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, StepBatch, StepEncoding,
    StepGroup, ZMode,
};
