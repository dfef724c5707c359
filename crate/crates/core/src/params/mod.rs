//! Units, physical constants and device configuration.

mod config;
pub mod units;

pub use config::{
    load_config, CavityConfig, ConfigError, DeviceConfig, FormFactorModel, HopfieldConvention, LedgerEntry,
    LoadedConfig, Provenance, GAAS_EPSILON_HIGH_FREQUENCY, GAAS_EPSILON_STATIC,
};
