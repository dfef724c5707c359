use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use isbpol::params::ConfigError;

mod commands;
mod config;
mod output;
mod sweep;

use commands::{
    BosonicityArgs, CorrelatorArgs, DispersionArgs, DynamicsArgs, OracleCheckArgs, RateArgs, ThresholdArgs,
};

const LONG_ABOUT: &str = "\
Intersubband polariton toolkit: dispersion, composite-boson correlators,
bosonicity-corrected phonon scattering rates, lasing threshold and rate-equation
dynamics.

Every output starts with `#`-prefixed provenance lines (tool version, command,
config source, SHA-256 of the resolved config, defaulted keys, overrides, then
command metadata) followed by a single CSV header row. With --format json the
same content is one object {provenance, metadata, records} or, for
`threshold`, {provenance, metadata, result}.

Sweeps are written VAR=MIN:MAX:POINTS[:linear|log] with VAR one of m_density
(cm^-2), n, q (units of q_res), N, detuning (meV), rabi_splitting (meV).

Units: densities cm^-2, energies meV, rates ps^-1, times ps, intensities W/cm^2.

Environment: ISBPOL_CACHE_LIMIT caps the number of memoized correlator keys.

Exit codes: 0 success (below threshold for `threshold --intensity`), 1 above
threshold, 2 usage error, 3 config error, 4 numerical failure.";

#[derive(Debug, Parser)]
#[command(name = "isbpol", version, about = "Intersubband polariton scattering toolkit", long_about = LONG_ABOUT)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Polariton branches over q/q_res: q/q_res, ω_LP, ω_UP, |α_LP|², |β_LP|², |α_UP|², |β_UP|²
    Dispersion(DispersionArgs),
    /// One correlator K(n,m,s,r) or a table of them: n, m, s, r, N, value, mode
    Correlator(CorrelatorArgs),
    /// Recurrence against the operator-algebra oracle: n, m, s, r, N, recurrence, oracle, pass
    OracleCheck(OracleCheckArgs),
    /// Bosonicity factor B: N, m/N, m, n, B, relative error, photon limit; ζ fit in the header
    BosonicitySweep(BosonicityArgs),
    /// Scattering rate Γ_sc with its factor decomposition
    RateSweep(RateArgs),
    /// Threshold pump density and intensity with the full parameter ledger
    Threshold(ThresholdArgs),
    /// Rate-equation trajectory: t, m, n; regime in the header
    Dynamics(DynamicsArgs),
}

/// Bad arguments that clap itself cannot detect.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|e| e.is::<UsageError>()) {
        2
    } else if err.chain().any(|e| e.is::<ConfigError>()) {
        3
    } else {
        4
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Dispersion(a) => commands::dispersion(a),
        Command::Correlator(a) => commands::correlator(a),
        Command::OracleCheck(a) => commands::oracle_check(a),
        Command::BosonicitySweep(a) => commands::bosonicity_sweep(a),
        Command::RateSweep(a) => commands::rate_sweep(a),
        Command::Threshold(a) => commands::threshold(a),
        Command::Dynamics(a) => commands::dynamics(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
