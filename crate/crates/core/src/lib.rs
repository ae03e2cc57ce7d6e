//! Voltage-fluctuation test signals and a software flickermeter.
//!
//! - [`signal`]: clipped-cosine carriers, modulating waveforms, AM model, THD
//! - [`frontend`]: FIR band limiting and decimation
//! - [`flicker`]: blocks 1 to 5 of the IEC flickermeter and Pst
//! - [`sweep`]: stage I / stage II experiment plans, results, plots
//! - [`conformance`]: built-in self checks

pub mod conformance;
pub mod error;
pub mod flicker;
pub mod frontend;
pub mod signal;
pub mod sweep;

pub use error::{Error, Result};
pub use flicker::{measure_pst, FlickermeterConfig, FlickermeterState, PstReading, PST_FLOOR};
pub use frontend::{apply_fir, decimate, design_lowpass_fir, ChainConfig, FirDecimator, FirFilter};
pub use signal::{
    modulate, synthesize_carrier, synthesize_modulating, thd, CarrierSpec, ModulatingSpec, Shape, SignalBuffer,
};
