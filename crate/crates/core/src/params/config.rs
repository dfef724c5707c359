use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::units;

/// Static dielectric constant of GaAs (default for `epsilon_r`).
pub const GAAS_EPSILON_STATIC: f64 = 12.9;
/// High-frequency dielectric constant of GaAs.
pub const GAAS_EPSILON_HIGH_FREQUENCY: f64 = 10.9;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormFactorModel {
    Constant(f64),
    InfiniteWell,
}

/// How the nominal Hopfield coefficient of the pump and signal modes is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HopfieldConvention {
    /// The coefficient is the amplitude |β|; the matter weight is its square.
    Amplitude,
    /// The coefficient is already the matter weight |β|².
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityConfig {
    pub effective_index: f64,
    /// Confinement wave vector, nm⁻¹.
    pub q_z0: f64,
}

impl Default for CavityConfig {
    fn default() -> Self {
        Self { effective_index: 3.3, q_z0: 1.75e-3 }
    }
}

/// Material and device parameters. Values are stored in boundary units:
/// densities in cm⁻², energies in meV, rates in ps⁻¹, lengths in nm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub electron_density: f64,
    pub total_electrons: u64,
    pub omega12: f64,
    pub rabi_splitting: f64,
    #[serde(rename = "omega_LO")]
    pub omega_lo: f64,
    #[serde(rename = "phonon_Q")]
    pub phonon_q: f64,
    pub well_width: f64,
    pub form_factor_model: FormFactorModel,
    pub epsilon_r: f64,
    pub gamma_loss: f64,
    pub gamma_loss_pump: f64,
    pub absorption: f64,
    pub effective_mass: f64,
    pub spin_degeneracy: u32,
    pub hopfield_beta: f64,
    pub hopfield_convention: HopfieldConvention,
    pub lorentzian_detuning: bool,
    pub occupation_cap: f64,
    pub cavity: CavityConfig,
}

impl DeviceConfig {
    /// GaAs preset.
    pub fn gaas() -> Self {
        Self {
            electron_density: 1.0e12,
            total_electrons: 2000,
            omega12: 150.0,
            // ω_LO/√3: pump and signal then both carry |β|² = 1/4 at exact phonon resonance
            rabi_splitting: 20.8,
            omega_lo: 36.0,
            phonon_q: 100.0,
            well_width: units::derive_well_width(150.0, 0.067),
            form_factor_model: FormFactorModel::Constant(0.1),
            epsilon_r: GAAS_EPSILON_STATIC,
            gamma_loss: 5.0,
            gamma_loss_pump: 5.0,
            absorption: 0.4,
            effective_mass: 0.067,
            spin_degeneracy: 2,
            hopfield_beta: 0.5,
            hopfield_convention: HopfieldConvention::Amplitude,
            lorentzian_detuning: false,
            occupation_cap: 0.5,
            cavity: CavityConfig::default(),
        }
    }

    /// Electron density in nm⁻².
    pub fn n_s(&self) -> f64 {
        units::density_from_cm2(self.electron_density)
    }

    /// Sample surface S = N / n_s in nm².
    pub fn surface(&self) -> f64 {
        self.total_electrons as f64 / self.n_s()
    }

    /// Ω_R, half the Rabi splitting.
    pub fn rabi_half(&self) -> f64 {
        0.5 * self.rabi_splitting
    }

    /// Γ_LO = ω_LO / Q expressed as a rate (ps⁻¹).
    pub fn gamma_lo_rate(&self) -> f64 {
        self.omega_lo / units::HBAR / self.phonon_q
    }

    /// Γ_LO expressed as an energy width (meV).
    pub fn gamma_lo_energy(&self) -> f64 {
        self.omega_lo / self.phonon_q
    }

    /// Target matter weight |β|² of the pump and signal modes.
    pub fn hopfield_target(&self) -> f64 {
        match self.hopfield_convention {
            HopfieldConvention::Amplitude => self.hopfield_beta * self.hopfield_beta,
            HopfieldConvention::Squared => self.hopfield_beta,
        }
    }

    pub fn fermi_wavevector(&self) -> f64 {
        units::fermi_wavevector(self.n_s(), self.spin_degeneracy)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn positive(key: &'static str, x: f64) -> Result<(), ConfigError> {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(invalid(key, format!("must be finite and > 0, got {x}")))
            }
        }
        positive("electron_density", self.electron_density)?;
        positive("omega12", self.omega12)?;
        positive("rabi_splitting", self.rabi_splitting)?;
        positive("omega_LO", self.omega_lo)?;
        positive("well_width", self.well_width)?;
        positive("epsilon_r", self.epsilon_r)?;
        positive("gamma_loss", self.gamma_loss)?;
        positive("gamma_loss_pump", self.gamma_loss_pump)?;
        positive("effective_mass", self.effective_mass)?;
        positive("cavity.effective_index", self.cavity.effective_index)?;
        positive("cavity.q_z0", self.cavity.q_z0)?;
        if self.total_electrons < 2 {
            return Err(invalid("total_electrons", "need at least 2 electrons"));
        }
        if !(self.phonon_q.is_finite() && self.phonon_q >= 1.0) {
            return Err(invalid("phonon_Q", format!("must be >= 1, got {}", self.phonon_q)));
        }
        if !(self.absorption > 0.0 && self.absorption <= 1.0) {
            return Err(invalid("absorption", format!("must lie in (0, 1], got {}", self.absorption)));
        }
        if self.spin_degeneracy == 0 {
            return Err(invalid("spin_degeneracy", "must be >= 1"));
        }
        if let FormFactorModel::Constant(f0) = self.form_factor_model {
            positive("form_factor_model", f0)?;
        }
        if !(self.hopfield_beta > 0.0 && self.hopfield_beta < 1.0) {
            return Err(invalid("hopfield_beta", "must lie in (0, 1)"));
        }
        if !(self.occupation_cap > 0.0 && self.occupation_cap <= 1.0) {
            return Err(invalid("occupation_cap", "must lie in (0, 1]"));
        }
        let k12 = self.omega12 * self.cavity.effective_index / units::HBAR_C;
        if self.cavity.q_z0 >= k12 {
            return Err(invalid("cavity.q_z0", format!("cavity cutoff exceeds omega12: need q_z0 < {k12:.4e} nm^-1")));
        }
        Ok(())
    }

    /// Canonical text form; reparses to an identical config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical text form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self::gaas()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    User,
    Default,
    Derived,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::User => "user",
            Provenance::Default => "default",
            Provenance::Derived => "derived",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerEntry {
    pub key: String,
    pub value: String,
    pub provenance: Provenance,
}

/// A validated config together with the provenance of each key.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: DeviceConfig,
    pub provenance: Vec<(String, Provenance)>,
}

impl LoadedConfig {
    pub fn defaulted_keys(&self) -> Vec<&str> {
        self.provenance.iter().filter(|(_, p)| *p != Provenance::User).map(|(k, _)| k.as_str()).collect()
    }

    pub fn provenance_of(&self, key: &str) -> Option<Provenance> {
        self.provenance.iter().find(|(k, _)| k == key).map(|(_, p)| *p)
    }

    /// Every resolved value with where it came from.
    pub fn ledger(&self) -> Vec<LedgerEntry> {
        let table: toml::Table = toml::from_str(&self.config.to_toml()).expect("round trip");
        let mut out = Vec::new();
        for (key, value) in flatten(&table) {
            let provenance = self.provenance_of(&key).unwrap_or(Provenance::Default);
            out.push(LedgerEntry { key, value: value.to_string(), provenance });
        }
        out
    }
}

fn flatten(table: &toml::Table) -> Vec<(String, toml::Value)> {
    let mut out = Vec::new();
    for (k, v) in table {
        match v {
            toml::Value::Table(sub) if k == "cavity" => {
                for (sk, sv) in sub {
                    out.push((format!("{k}.{sk}"), sv.clone()));
                }
            }
            _ => out.push((k.clone(), v.clone())),
        }
    }
    out
}

const TOP_KEYS: &[&str] = &[
    "electron_density",
    "total_electrons",
    "omega12",
    "rabi_splitting",
    "omega_LO",
    "phonon_Q",
    "well_width",
    "form_factor_model",
    "epsilon_r",
    "gamma_loss",
    "gamma_loss_pump",
    "absorption",
    "effective_mass",
    "spin_degeneracy",
    "hopfield_beta",
    "hopfield_convention",
    "lorentzian_detuning",
    "occupation_cap",
    "cavity",
];
const CAVITY_KEYS: &[&str] = &["effective_index", "q_z0"];

/// Parses key-value config text, fills GaAs defaults and validates.
///
/// An empty source yields the full GaAs preset. `well_width`, when absent,
/// is derived from `omega12` and `effective_mass`.
pub fn load_config(source: &str) -> Result<LoadedConfig, ConfigError> {
    let user: toml::Table = toml::from_str(source).map_err(|e| ConfigError::Parse(e.to_string()))?;
    for key in user.keys() {
        if !TOP_KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey(key.clone()));
        }
    }
    let user_cavity = match user.get("cavity") {
        Some(toml::Value::Table(t)) => {
            for key in t.keys() {
                if !CAVITY_KEYS.contains(&key.as_str()) {
                    return Err(ConfigError::UnknownKey(format!("cavity.{key}")));
                }
            }
            Some(t.clone())
        }
        Some(_) => return Err(ConfigError::Parse("`cavity` must be a table".into())),
        None => None,
    };

    let mut merged: toml::Table = toml::from_str(&DeviceConfig::gaas().to_toml()).expect("preset round trip");
    let mut provenance = Vec::new();
    for &key in TOP_KEYS.iter().filter(|k| **k != "cavity") {
        if let Some(v) = user.get(key) {
            merged.insert(key.to_string(), v.clone());
            provenance.push((key.to_string(), Provenance::User));
        } else if key == "well_width" {
            provenance.push((key.to_string(), Provenance::Derived));
        } else {
            provenance.push((key.to_string(), Provenance::Default));
        }
    }
    let mut cavity = match merged.get("cavity") {
        Some(toml::Value::Table(t)) => t.clone(),
        _ => unreachable!("preset has a cavity table"),
    };
    for &key in CAVITY_KEYS {
        let full = format!("cavity.{key}");
        match user_cavity.as_ref().and_then(|t| t.get(key)) {
            Some(v) => {
                cavity.insert(key.to_string(), v.clone());
                provenance.push((full, Provenance::User));
            }
            None => provenance.push((full, Provenance::Default)),
        }
    }
    merged.insert("cavity".into(), toml::Value::Table(cavity));

    let mut config: DeviceConfig = merged.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    if !user.contains_key("well_width") {
        if !(config.omega12 > 0.0 && config.effective_mass > 0.0) {
            config.validate()?;
        }
        config.well_width = units::derive_well_width(config.omega12, config.effective_mass);
    }
    config.validate()?;
    Ok(LoadedConfig { config, provenance })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_source_is_gaas_preset() {
        let loaded = load_config("").unwrap();
        assert_eq!(loaded.config, DeviceConfig::gaas());
        assert!(loaded.defaulted_keys().contains(&"omega12"));
        assert_eq!(loaded.provenance_of("well_width"), Some(Provenance::Derived));
    }

    #[test]
    fn explicit_gaas_values_validate() {
        let src = r#"
            electron_density = 1e12
            omega12 = 150.0
            omega_LO = 36.0
            phonon_Q = 100.0
            gamma_loss = 5.0
            gamma_loss_pump = 5.0
            absorption = 0.4
            form_factor_model = { constant = 0.1 }
            effective_mass = 0.067
        "#;
        let loaded = load_config(src).unwrap();
        assert_eq!(loaded.config, DeviceConfig::gaas());
        assert_eq!(loaded.provenance_of("omega12"), Some(Provenance::User));
        assert_eq!(loaded.provenance_of("rabi_splitting"), Some(Provenance::Default));
    }

    #[test]
    fn absorption_out_of_range() {
        let err = load_config("absorption = 1.5").unwrap_err();
        assert!(err.to_string().contains("absorption"), "{err}");
    }

    #[test]
    fn bad_inputs_name_the_key() {
        let err = load_config("omega12 = -3.0").unwrap_err();
        assert!(err.to_string().contains("omega12"), "{err}");
        let err = load_config("total_electrons = 1").unwrap_err();
        assert!(err.to_string().contains("total_electrons"), "{err}");
        let err = load_config("phonon_Q = 0.5").unwrap_err();
        assert!(err.to_string().contains("phonon_Q"), "{err}");
        assert!(matches!(load_config("colour = 3"), Err(ConfigError::UnknownKey(k)) if k == "colour"));
        assert!(matches!(
            load_config("[cavity]\nmirror = 1"),
            Err(ConfigError::UnknownKey(k)) if k == "cavity.mirror"
        ));
        assert!(matches!(load_config("omega12 = = 3"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn infinite_well_model_parses() {
        let loaded = load_config("form_factor_model = \"infinite_well\"\nwell_width = 8.0").unwrap();
        assert_eq!(loaded.config.form_factor_model, FormFactorModel::InfiniteWell);
        assert_eq!(loaded.config.well_width, 8.0);
        assert_eq!(loaded.provenance_of("well_width"), Some(Provenance::User));
    }

    #[test]
    fn serialized_config_reparses_identically() {
        let loaded = load_config("omega12 = 120.0\n[cavity]\nq_z0 = 1.5e-3").unwrap();
        let again = load_config(&loaded.config.to_toml()).unwrap();
        assert_eq!(loaded.config, again.config);
        assert_eq!(loaded.config.hash(), again.config.hash());
    }

    #[test]
    fn ledger_lists_every_key() {
        let loaded = load_config("gamma_loss = 7.0").unwrap();
        let ledger = loaded.ledger();
        assert_eq!(ledger.len(), TOP_KEYS.len() - 1 + CAVITY_KEYS.len());
        let gl = ledger.iter().find(|e| e.key == "gamma_loss").unwrap();
        assert_eq!(gl.provenance, Provenance::User);
        assert_eq!(gl.value, "7.0");
    }

    #[test]
    fn hopfield_target_follows_convention() {
        let mut c = DeviceConfig::gaas();
        assert!((c.hopfield_target() - 0.25).abs() < 1e-15);
        c.hopfield_convention = HopfieldConvention::Squared;
        assert!((c.hopfield_target() - 0.5).abs() < 1e-15);
    }
}
