//! Spatial scene synthesis: event bank, placements, encoding, rooms.

pub mod ambisonics;
pub mod annotation;
pub mod array;
pub mod bank;
pub mod delay;
pub mod direction;
pub mod room;
pub mod spec;
pub mod synth;

pub use ambisonics::{encode_foa, sh_gains, FOA_CHANNELS};
pub use annotation::{read_annotations, write_annotations};
pub use array::{simulate_circular_array, ArraySpec};
pub use bank::{BankConfig, Clip, EventBank, Split};
pub use direction::{CartesianDoa, Direction, SPEED_OF_SOUND};
pub use room::{calibrated_reflection, image_source_rir, RirOptions, RoomSpec};
pub use spec::{sample_scene_spec, DirectionGrid, EventInstance, SceneConstraints, SceneSpec, ScheduledEvent};
pub use synth::{mix_ambiance, synthesize_scene, AmbianceFit, SceneAudio};
