pub mod audio;
pub mod codec;
pub mod label_space;
pub mod metrics;
pub mod nn;
pub mod par;
pub mod pipeline;
pub mod text;
pub mod zoo;
