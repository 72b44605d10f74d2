//! Order statistics of a stochastic structural response, estimated by brute
//! force through a spectral simulator or through Gaussian process surrogates
//! that predict response-distribution parameters.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`). The `*64`
//! aliases below are the concrete types the pipeline and CLI use.

// `!(x > 0)` style guards reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distfit;
pub mod error;
pub mod eval;
pub mod gp;
pub mod manifest;
pub mod orderstats;
pub mod seed;
pub mod simulator;
pub mod surrogate;
pub mod weather;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::float::TotalOrder;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub use error::{Error, ErrorKind, Result};

/// Floating point scalar used throughout the crate.
pub trait Real:
    Float
    + FloatConst
    + TotalOrder
    + FromPrimitive
    + ToPrimitive
    + rustfft::FftNum
    + Default
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` constant into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    #[inline]
    fn from_len(n: usize) -> Self {
        Self::lit(n as f64)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub use distfit::{DistFamily, FitResult, TrainingRow, TrainingTable};
pub use gp::{GpModel, KernelParams, PredictiveMoments};
pub use orderstats::{QoiConfig, QoiResult, TopK};
pub use simulator::{SimConfig, SimOutput, Simulator, Spectrum, ThrustCurve, TransferFunction};
pub use surrogate::{GeneratedOutput, SamplingMode, SurrogateModel};
pub use weather::{InputBox, WeatherRecord};

pub type WeatherRecord64 = WeatherRecord<f64>;
pub type InputBox64 = InputBox<f64>;
pub type SimConfig64 = SimConfig<f64>;
pub type SimOutput64 = SimOutput<f64>;
pub type Simulator64 = Simulator<f64>;
pub type FitResult64 = FitResult<f64>;
pub type TrainingRow64 = TrainingRow<f64>;
pub type TrainingTable64 = TrainingTable<f64>;
pub type GpModel64 = GpModel<f64>;
pub type GpModel32 = GpModel<f32>;
pub type SurrogateModel64 = SurrogateModel<f64>;
pub type GeneratedOutput64 = GeneratedOutput<f64>;
pub type TopK64 = TopK<f64>;
pub type QoiResult64 = QoiResult<f64>;
