pub mod autodiff;
pub mod datapipe;
pub mod kvfile;
pub mod metrics;
pub mod nets;
pub mod synth;
pub mod trainer;
