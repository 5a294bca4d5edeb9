//! Multi-person continuous activity recognition from FMCW radar micro-Doppler.
//!
//! The crate covers the whole processing chain:
//!
//! ```text
//! scene -> raw cube -> beamform (0, +30, -30) -> range map -> slow-time signal
//!       -> spectrogram -> envelopes -> STA/LTA events -> cropped images -> CNN
//! ```
//!
//! [`scene`] synthesises radar data, [`beamform`] and [`tfproc`] form the
//! micro-Doppler images, [`segment`] cuts them into single-activity events,
//! [`nnet`] classifies them and [`pipeline`] runs everything end to end.

pub mod activity;
pub mod beamform;
pub mod error;
pub mod nnet;
pub mod pipeline;
pub mod radar;
pub mod scene;
pub mod segment;
pub mod tensor;
pub mod tfproc;

pub use activity::ActivityClass;
pub use error::{Error, Result};
pub use radar::RadarParams;
