//! Fixtures shared by the benchmarks.

use ssalt_core::model::sample;
use ssalt_core::{ModelParams, SsaltSample, StressProfile};

pub fn profile() -> StressProfile {
    StressProfile::new(0.5, 1.0, 2.0, 3.0, 5.0).expect("valid profile")
}

pub fn truth() -> ModelParams {
    ModelParams::new(2.0, -0.8, 5.5).expect("valid parameters")
}

pub fn fixture(n: usize) -> SsaltSample {
    sample(&truth(), &profile(), n, 42)
}
