//! Configuration schema, built-in presets, and result serialization.

pub mod config;
pub mod emit;
pub mod presets;

pub use config::{load_model, load_model_str, model_hash, save_model, ClassicalSection, LoadedConfig};
pub use emit::{
    emit_affine, emit_classical_trace, emit_huggett, emit_simpath, RunManifest,
};
pub use presets::{available_presets, load_preset, preset_toml};
