use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use isbpol::cbalg::valid_keys;
use isbpol::dynamics::{self, RateEquationState, RateModel};
use isbpol::oracle::Oracle;
use isbpol::params::units;
use isbpol::polariton::default_geometry;
use isbpol::rates::{bosonicity, default_zeta_grid, zeta_fit, HopfieldWeights, ZETA_RESIDUAL_THRESHOLD};
use isbpol::{
    BigRational, CorrelatorKey, CorrelatorScalar, Correlators, DeviceConfig, Dispersion, ExactCorrelators,
    FloatCorrelators, LogF64, RateCalculator, ScatteringGeometry,
};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{cache_budget, resolve, Resolved};
use crate::output::{Body, Cell, Format, Report};
use crate::sweep::{SweepSpec, SweepVariable};
use crate::UsageError;

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Device config file of `key = value` lines; the GaAs preset when omitted
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output file; stdout when omitted
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Override one config key, e.g. `--set epsilon_r=10.9` (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl Common {
    fn resolve(&self) -> Result<Resolved> {
        Ok(resolve(self.config.as_deref(), &self.set)?)
    }

    fn emit(&self, report: &Report) -> Result<()> {
        report.emit(self.format, self.out.as_deref())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Rational,
    Float,
}

fn sweep(raw: Option<&str>, default: &str, resolved: &Resolved) -> Result<SweepSpec, UsageError> {
    SweepSpec::parse(raw.unwrap_or(default), resolved.overrides.clone())
}

fn calculator(config: &DeviceConfig, geometry: ScatteringGeometry, budget: usize) -> Result<RateCalculator> {
    let corr = Arc::new(Correlators::with_budget(config.total_electrons, budget));
    Ok(RateCalculator::with_correlators(config.clone(), geometry, corr)?)
}

fn with_electrons(config: &DeviceConfig, n: f64) -> Result<DeviceConfig> {
    if n.fract() != 0.0 || n < 2.0 {
        return Err(UsageError(format!("N must be an integer >= 2, got {n}")).into());
    }
    let mut c = config.clone();
    c.total_electrons = n as u64;
    Ok(c)
}

// dispersion

#[derive(Debug, Args)]
pub struct DispersionArgs {
    #[command(flatten)]
    pub common: Common,
    /// Wave-vector grid in units of q_res
    #[arg(long, value_name = "SPEC")]
    pub sweep: Option<String>,
}

pub fn dispersion(args: &DispersionArgs) -> Result<u8> {
    let resolved = args.common.resolve()?;
    let spec = sweep(args.sweep.as_deref(), "q=0:2:201", &resolved)?;
    spec.require("dispersion", &[SweepVariable::Q])?;
    let disp = Dispersion::from_config(resolved.config());
    let q_res = disp.q_res();
    let rows = spec
        .values()
        .into_iter()
        .map(|x| {
            let (lp, up) = disp.diagonalize(x * q_res);
            vec![
                Cell::from(x),
                lp.energy.into(),
                up.energy.into(),
                lp.photon_weight().into(),
                lp.matter_weight().into(),
                up.photon_weight().into(),
                up.matter_weight().into(),
            ]
        })
        .collect();
    let columns =
        vec!["q_over_q_res", "omega_lp_mev", "omega_up_mev", "alpha_lp_sq", "beta_lp_sq", "alpha_up_sq", "beta_up_sq"];
    let mut report = Report::new("dispersion", &resolved, Body::Table { columns, rows });
    report.meta("sweep", spec.describe()).meta("q_res_nm_inv", q_res);
    args.common.emit(&report)?;
    Ok(0)
}

// correlator

#[derive(Debug, Args)]
pub struct CorrelatorArgs {
    #[command(flatten)]
    pub common: Common,
    /// Single key `n,m,s,r`; a table of every valid key is printed otherwise
    #[arg(long, value_name = "N,M,S,R")]
    pub key: Option<String>,
    /// Largest n + m in the table
    #[arg(long, default_value_t = 4)]
    pub max_total: i64,
    /// Electron number; `total_electrons` from the config when omitted
    #[arg(long = "electrons", value_name = "N")]
    pub electrons: Option<u64>,
    #[arg(long, value_enum, default_value_t = Mode::Rational)]
    pub mode: Mode,
}

fn parse_key(raw: &str) -> Result<CorrelatorKey, UsageError> {
    let parts: Vec<i64> = raw
        .split(',')
        .map(|p| p.trim().parse::<i64>())
        .collect::<Result<_, _>>()
        .map_err(|_| UsageError(format!("key `{raw}` is not four comma-separated integers")))?;
    match parts[..] {
        [n, m, s, r] if n >= 0 && m >= 0 && s >= -1 && r >= -1 => Ok(CorrelatorKey::new(n, m, s, r)),
        _ => Err(UsageError(format!("key `{raw}` needs n, m >= 0 and s, r >= -1"))),
    }
}

fn correlator_rows<S: CorrelatorScalar>(
    corr: &Correlators<S>,
    keys: &[CorrelatorKey],
    show: impl Fn(&S) -> Cell,
) -> Result<Vec<Vec<Cell>>> {
    keys.iter()
        .map(|&k| {
            let v = corr.k_key(k).with_context(|| format!("evaluating {k}"))?;
            Ok(vec![
                k.n.into(),
                k.m.into(),
                k.s.into(),
                k.r.into(),
                corr.n_electrons().into(),
                show(&v),
                S::MODE.to_string().into(),
            ])
        })
        .collect()
}

pub fn correlator(args: &CorrelatorArgs) -> Result<u8> {
    let resolved = args.common.resolve()?;
    let n_el = args.electrons.unwrap_or(resolved.config().total_electrons);
    if n_el == 0 {
        return Err(UsageError("N must be positive".into()).into());
    }
    let keys: Vec<CorrelatorKey> = match &args.key {
        Some(raw) => vec![parse_key(raw)?],
        None if args.max_total < 1 => return Err(UsageError("--max-total must be >= 1".into()).into()),
        None => (1..=args.max_total).flat_map(valid_keys).collect(),
    };
    let budget = cache_budget()?;
    let rows = match args.mode {
        Mode::Rational => correlator_rows(&ExactCorrelators::with_budget(n_el, budget), &keys, |v: &BigRational| {
            v.to_string().into()
        })?,
        Mode::Float => {
            correlator_rows(&FloatCorrelators::with_budget(n_el, budget), &keys, |v: &LogF64| v.to_f64().into())?
        }
    };
    let columns = vec!["n", "m", "s", "r", "N", "value", "mode"];
    args.common.emit(&Report::new("correlator", &resolved, Body::Table { columns, rows }))?;
    Ok(0)
}

// oracle-check

#[derive(Debug, Args)]
pub struct OracleCheckArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 6)]
    pub max_total: i64,
    /// Electron numbers to check, comma separated
    #[arg(long, value_delimiter = ',', default_value = "2,5,10,100")]
    pub electrons: Vec<u64>,
}

pub fn oracle_check(args: &OracleCheckArgs) -> Result<u8> {
    let resolved = args.common.resolve()?;
    if args.max_total < 1 || args.electrons.contains(&0) {
        return Err(UsageError("--max-total and every N must be >= 1".into()).into());
    }
    let oracle = Oracle::default();
    let keys: Vec<CorrelatorKey> = (1..=args.max_total).flat_map(valid_keys).collect();
    let mut rows = Vec::new();
    let mut failures = 0u64;
    for &n_el in &args.electrons {
        let corr = ExactCorrelators::with_budget(n_el, cache_budget()?);
        let checked: Vec<(CorrelatorKey, BigRational, BigRational)> = keys
            .par_iter()
            .map(|&k| -> Result<_> {
                let got = corr.k_key(k).with_context(|| format!("recurrence {k}"))?;
                let want = oracle.k(k, n_el).with_context(|| format!("oracle {k}"))?;
                Ok((k, got, want))
            })
            .collect::<Result<_>>()?;
        for (k, got, want) in checked {
            let pass = got == want;
            failures += u64::from(!pass);
            rows.push(vec![
                k.n.into(),
                k.m.into(),
                k.s.into(),
                k.r.into(),
                n_el.into(),
                got.to_string().into(),
                want.to_string().into(),
                Cell::from(pass),
            ]);
        }
    }
    let checked = rows.len();
    let columns = vec!["n", "m", "s", "r", "N", "recurrence", "oracle", "pass"];
    let mut report = Report::new("oracle-check", &resolved, Body::Table { columns, rows });
    report.meta("checked", checked).meta("mismatches", failures);
    args.common.emit(&report)?;
    if failures > 0 {
        anyhow::bail!("{failures} of {checked} correlators disagree with the oracle");
    }
    Ok(0)
}

// bosonicity-sweep

#[derive(Debug, Args)]
pub struct BosonicityArgs {
    #[command(flatten)]
    pub common: Common,
    /// Swept variable: m_density (cm⁻²), n or N
    #[arg(long, value_name = "SPEC")]
    pub sweep: Option<String>,
    /// Signal occupation when it is not swept
    #[arg(long, default_value_t = 0)]
    pub n: u64,
    /// m/N held fixed in `n` and `N` sweeps
    #[arg(long, default_value_t = 0.1)]
    pub m_over_n: f64,
    /// Signal matter weight |β|²; taken from the default pump/signal geometry when omitted
    #[arg(long)]
    pub signal_matter: Option<f64>,
    /// Pump matter weight |β′|²
    #[arg(long)]
    pub pump_matter: Option<f64>,
    #[arg(long, value_enum, default_value_t = Mode::Float)]
    pub mode: Mode,
    /// Grid size of the ζ fit
    #[arg(long, default_value_t = 20)]
    pub zeta_points: u64,
}

struct BPoint {
    n_el: u64,
    m: u64,
    n: u64,
}

fn bosonicity_rows<S: CorrelatorScalar + Send + Sync>(
    points: &[BPoint],
    weights: &HopfieldWeights<S>,
    budget: usize,
    base: &Correlators<S>,
) -> Result<Vec<Vec<Cell>>> {
    points
        .par_iter()
        .map(|p| {
            let local;
            let corr = if p.n_el == base.n_electrons() {
                base
            } else {
                local = Correlators::with_budget(p.n_el, budget);
                &local
            };
            let b = bosonicity(corr, p.m, p.n, weights)
                .with_context(|| format!("B at m = {}, n = {}, N = {}", p.m, p.n, p.n_el))?;
            Ok(vec![
                p.n_el.into(),
                Cell::from(p.m as f64 / p.n_el as f64),
                p.m.into(),
                p.n.into(),
                b.b.into(),
                b.rel_error.into(),
                b.photon_limit.into(),
            ])
        })
        .collect()
}

fn zeta_meta<S: CorrelatorScalar + Send + Sync>(
    corr: &Correlators<S>,
    weights: &HopfieldWeights<S>,
    points: u64,
) -> Vec<(&'static str, serde_json::Value)> {
    match zeta_fit(corr, weights, &default_zeta_grid(corr.n_electrons(), points), ZETA_RESIDUAL_THRESHOLD) {
        Ok(fit) => vec![
            ("zeta", json!(fit.zeta)),
            ("zeta_max_residual", json!(fit.max_residual)),
            ("zeta_points", json!(fit.points.len())),
        ],
        Err(e) => vec![("zeta", json!(format!("unavailable: {e}")))],
    }
}

fn weight_arg(name: &str, v: Option<f64>, fallback: f64) -> Result<f64, UsageError> {
    let w = v.unwrap_or(fallback);
    if (0.0..=1.0).contains(&w) {
        Ok(w)
    } else {
        Err(UsageError(format!("--{name} must lie in [0, 1], got {w}")))
    }
}

pub fn bosonicity_sweep(args: &BosonicityArgs) -> Result<u8> {
    let resolved = args.common.resolve()?;
    let cfg = resolved.config();
    let big_n = cfg.total_electrons;
    let default = format!("m_density={}:{}:50", cfg.electron_density / big_n as f64, 0.25 * cfg.electron_density);
    let spec = sweep(args.sweep.as_deref(), &default, &resolved)?;
    spec.require("bosonicity-sweep", &[SweepVariable::MDensity, SweepVariable::N, SweepVariable::Electrons])?;
    if !(args.m_over_n > 0.0 && args.m_over_n <= 1.0) {
        return Err(UsageError(format!("--m-over-n must lie in (0, 1], got {}", args.m_over_n)).into());
    }

    let (signal, pump) = match (args.signal_matter, args.pump_matter) {
        (Some(s), Some(p)) => (s, p),
        (s, p) => {
            let g = default_geometry::<f64>(cfg)?;
            (s.unwrap_or(g.signal.matter_weight()), p.unwrap_or(g.pump.matter_weight()))
        }
    };
    let signal = weight_arg("signal-matter", Some(signal), signal)?;
    let pump = weight_arg("pump-matter", Some(pump), pump)?;

    let occupation = |frac: f64, n_el: u64| ((frac * n_el as f64).round() as u64).max(1);
    let points: Vec<BPoint> = spec
        .values()
        .into_iter()
        .map(|v| -> Result<BPoint> {
            Ok(match spec.variable {
                SweepVariable::MDensity => {
                    let m = (units::density_from_cm2(v) * cfg.surface()).round().max(1.0) as u64;
                    BPoint { n_el: big_n, m, n: args.n }
                }
                SweepVariable::N => {
                    if v.fract() != 0.0 || v < 0.0 {
                        return Err(UsageError(format!("n must be a non-negative integer, got {v}")).into());
                    }
                    BPoint { n_el: big_n, m: occupation(args.m_over_n, big_n), n: v as u64 }
                }
                _ => {
                    let n_el = with_electrons(cfg, v)?.total_electrons;
                    BPoint { n_el, m: occupation(args.m_over_n, n_el), n: args.n }
                }
            })
        })
        .collect::<Result<_>>()?;

    let budget = cache_budget()?;
    let fit_zeta = spec.variable != SweepVariable::Electrons;
    let (rows, zeta) = match args.mode {
        Mode::Float => {
            let w = HopfieldWeights::<LogF64>::from_real(signal, pump);
            let base = FloatCorrelators::with_budget(big_n, budget);
            let rows = bosonicity_rows(&points, &w, budget, &base)?;
            (rows, if fit_zeta { zeta_meta(&base, &w, args.zeta_points) } else { Vec::new() })
        }
        Mode::Rational => {
            let exact = |x: f64| BigRational::from_float(x).expect("finite weight");
            let w = HopfieldWeights::new(exact(signal), exact(pump));
            let base = ExactCorrelators::with_budget(big_n, budget);
            let rows = bosonicity_rows(&points, &w, budget, &base)?;
            (rows, if fit_zeta { zeta_meta(&base, &w, args.zeta_points) } else { Vec::new() })
        }
    };
    let columns = vec!["N", "m_over_n", "m", "n", "b", "rel_error", "photon_limit"];
    let mut report = Report::new("bosonicity-sweep", &resolved, Body::Table { columns, rows });
    report.meta("sweep", spec.describe()).meta("signal_matter", signal).meta("pump_matter", pump);
    for (k, v) in zeta {
        report.meta(k, v);
    }
    args.common.emit(&report)?;
    Ok(0)
}

// rate-sweep

#[derive(Debug, Args)]
pub struct RateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Swept variable: m_density (cm⁻²), n, N, detuning (meV) or rabi_splitting (meV)
    #[arg(long, value_name = "SPEC")]
    pub sweep: Option<String>,
    /// Signal occupation when it is not swept
    #[arg(long, default_value_t = 0.0)]
    pub n: f64,
    /// Pump density m/S in cm⁻² when it is not swept
    #[arg(long, default_value_t = 1.0e11)]
    pub m_density: f64,
}

pub fn rate_sweep(args: &RateArgs) -> Result<u8> {
    let resolved = args.common.resolve()?;
    let cfg = resolved.config();
    let default =
        format!("m_density={}:{}:50", cfg.electron_density / cfg.total_electrons as f64, 0.25 * cfg.electron_density);
    let spec = sweep(args.sweep.as_deref(), &default, &resolved)?;
    spec.require(
        "rate-sweep",
        &[
            SweepVariable::MDensity,
            SweepVariable::N,
            SweepVariable::Electrons,
            SweepVariable::Detuning,
            SweepVariable::RabiSplitting,
        ],
    )?;
    if spec.variable == SweepVariable::Detuning && !cfg.lorentzian_detuning {
        return Err(UsageError("a detuning sweep needs lorentzian_detuning = true".into()).into());
    }
    if !(args.n >= 0.0 && args.m_density > 0.0) {
        return Err(UsageError("--n must be >= 0 and --m-density > 0".into()).into());
    }
    let budget = cache_budget()?;
    let base_geometry = default_geometry::<f64>(cfg)?;
    let shared = calculator(cfg, base_geometry, budget)?;

    let rows: Vec<Vec<Cell>> = spec
        .values()
        .into_par_iter()
        .map(|v| -> Result<Vec<Cell>> {
            let (density, n) = match spec.variable {
                SweepVariable::MDensity => (v, args.n),
                SweepVariable::N => (args.m_density, v),
                _ => (args.m_density, args.n),
            };
            let owned;
            let calc = match spec.variable {
                SweepVariable::Electrons => {
                    let c = with_electrons(cfg, v)?;
                    owned = calculator(&c, default_geometry(&c)?, budget)?;
                    &owned
                }
                SweepVariable::RabiSplitting => {
                    let mut c = cfg.clone();
                    c.rabi_splitting = v;
                    c.validate()?;
                    owned = calculator(&c, default_geometry(&c)?, budget)?;
                    &owned
                }
                SweepVariable::Detuning => {
                    let mut g = base_geometry;
                    g.detuning = v;
                    owned = calculator(cfg, g, budget)?;
                    &owned
                }
                _ => &shared,
            };
            let m = units::density_from_cm2(density) * calc.surface();
            let r = calc
                .scattering_rate_continuous(m, n)
                .with_context(|| format!("Γ_sc at m/S = {density} cm⁻², n = {n}"))?;
            let f = r.factors;
            Ok(vec![
                r.pump_density_cm2().into(),
                m.into(),
                n.into(),
                r.gamma_sc.into(),
                f.stimulation.into(),
                f.bosonicity.into(),
                f.signal_matter.into(),
                f.pump_matter.into(),
                f.pump_density.into(),
                f.phonon_quality.into(),
                f.coupling.into(),
                f.detuning.into(),
                r.detuning_energy.into(),
                calc.config().total_electrons.into(),
                calc.config().rabi_splitting.into(),
            ])
        })
        .collect::<Result<_>>()?;
    let columns = vec![
        "m_density_cm2",
        "m",
        "n",
        "gamma_sc_ps_inv",
        "stimulation",
        "bosonicity",
        "signal_matter",
        "pump_matter",
        "pump_density_nm2",
        "phonon_quality",
        "coupling_nm2_ps_inv",
        "detuning_factor",
        "detuning_mev",
        "N",
        "rabi_splitting_mev",
    ];
    let mut report = Report::new("rate-sweep", &resolved, Body::Table { columns, rows });
    report.meta("sweep", spec.describe()).meta("gamma_loss_ps_inv", cfg.gamma_loss);
    args.common.emit(&report)?;
    Ok(0)
}

// threshold

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[command(flatten)]
    pub common: Common,
    /// Pump intensity in W/cm²; the exit code is 1 when it is at or above threshold
    #[arg(long)]
    pub intensity: Option<f64>,
}

pub fn threshold(args: &ThresholdArgs) -> Result<u8> {
    let resolved = args.common.resolve()?;
    let cfg = resolved.config();
    let calc = calculator(cfg, default_geometry(cfg)?, cache_budget()?)?;
    let result = dynamics::threshold(&calc, resolved.loaded.ledger())?;
    let mut doc = serde_json::to_value(&result)?;
    let mut code = 0;
    if let Some(i) = args.intensity {
        if !(i >= 0.0 && i.is_finite()) {
            return Err(UsageError(format!("--intensity must be finite and >= 0, got {i}")).into());
        }
        let above = i >= result.i_thr_w_cm2;
        code = u8::from(above);
        doc["query"] = json!({ "intensity_w_cm2": i, "above_threshold": above });
    }
    args.common.emit(&Report::new("threshold", &resolved, Body::Document(doc)))?;
    Ok(code)
}

// dynamics

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    /// Full B_m^n at the current occupations
    Exact,
    /// (1 + n) Γ_sc(m, 0)
    FinalState,
}

#[derive(Debug, Args)]
pub struct DynamicsArgs {
    #[command(flatten)]
    pub common: Common,
    /// Pump intensity in W/cm²
    #[arg(long)]
    pub intensity: f64,
    /// End time in ps
    #[arg(long, default_value_t = 50.0)]
    pub t_end: f64,
    #[arg(long, value_enum, default_value_t = ModelArg::Exact)]
    pub model: ModelArg,
    /// Initial pump occupation
    #[arg(long, default_value_t = 0.0)]
    pub m0: f64,
    /// Initial signal occupation
    #[arg(long, default_value_t = 0.0)]
    pub n0: f64,
}

pub fn dynamics(args: &DynamicsArgs) -> Result<u8> {
    let resolved = args.common.resolve()?;
    if !(args.intensity >= 0.0 && args.t_end > 0.0 && args.m0 >= 0.0 && args.n0 >= 0.0) {
        return Err(UsageError("--intensity, --m0 and --n0 must be >= 0 and --t-end > 0".into()).into());
    }
    let cfg = resolved.config();
    let calc = calculator(cfg, default_geometry(cfg)?, cache_budget()?)?;
    let model = match args.model {
        ModelArg::Exact => RateModel::Exact,
        ModelArg::FinalState => RateModel::FinalStateApprox,
    };
    let initial = RateEquationState { t: 0.0, m: args.m0, n: args.n0 };
    let traj = dynamics::integrate(&calc, initial, args.intensity, args.t_end, model, dynamics::default_ode_options())?;
    let steady = dynamics::steady_state(&calc, args.intensity)?;
    let rows = traj.samples.iter().map(|s| vec![Cell::from(s.t), s.m.into(), s.n.into()]).collect();
    let mut report = Report::new("dynamics", &resolved, Body::Table { columns: vec!["t_ps", "m", "n"], rows });
    report
        .meta("regime", serde_json::to_value(traj.regime)?)
        .meta("model", serde_json::to_value(traj.model)?)
        .meta("intensity_w_cm2", args.intensity)
        .meta("steady_state", serde_json::to_value(steady)?)
        .meta("accepted_steps", traj.accepted)
        .meta("rejected_steps", traj.rejected);
    args.common.emit(&report)?;
    Ok(0)
}
