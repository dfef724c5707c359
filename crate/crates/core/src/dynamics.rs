//! Pump/signal rate equations without pump depletion:
//!
//! ```text
//! dn/dt = Γ_sc(m, n) − Γ_loss n
//! dm/dt = A I S/(ħω_pump) − Γ′_loss m
//! ```
//!
//! with their steady state, trajectories and the stimulation threshold
//! Γ_sc(m_thr, 0) = Γ_loss.

use std::cell::RefCell;

use serde::Serialize;
use thiserror::Error;

use crate::numerics::{bisect, dopri5, NumericsError, OdeOptions};
use crate::params::{units, LedgerEntry};
use crate::rates::{RateCalculator, RatesError};
use crate::scalar::Real;

/// Published threshold pump density, cm⁻².
pub const REFERENCE_THRESHOLD_DENSITY: f64 = 1.1e11;
/// Published threshold pump intensity, W/cm².
pub const REFERENCE_THRESHOLD_INTENSITY: f64 = 3.5e4;
/// m/N at which the electronic transition is inverted.
pub const INVERSION_FILLING: f64 = 0.5;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Rates(#[from] RatesError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(
        "Γ_sc never reaches Γ_loss = {gamma_loss} ps⁻¹ below the occupation cap (max {max_rate} ps⁻¹ at m = {at_m})"
    )]
    BracketFailure { gamma_loss: f64, max_rate: f64, at_m: f64 },
    #[error("negative pump intensity {0}")]
    NegativeIntensity(f64),
    #[error("integration end time must be positive, got {0}")]
    BadEndTime(f64),
}

/// How Γ_sc(m, n) enters the signal equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    /// Full B_m^n at the current (m, n).
    Exact,
    /// (1 + n) Γ_sc(m, 0), valid for n ≪ m.
    FinalStateApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateEquationState<T> {
    pub t: T,
    pub m: T,
    pub n: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum SteadyState<T> {
    Below {
        m: T,
        n: T,
        gamma0: T,
    },
    /// No finite steady state: stimulated gain exceeds the loss.
    AboveThreshold {
        m: T,
        gamma0: T,
    },
}

impl<T: Copy> SteadyState<T> {
    pub fn is_above(&self) -> bool {
        matches!(self, SteadyState::AboveThreshold { .. })
    }

    pub fn pump(&self) -> T {
        match *self {
            SteadyState::Below { m, .. } | SteadyState::AboveThreshold { m, .. } => m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Below threshold; the trajectory relaxes to the steady state.
    Bounded,
    /// Above threshold; n grew until t_end.
    Growing,
    /// Above threshold; n grew until m + n reached the occupation cap.
    Runaway,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory<T> {
    pub samples: Vec<RateEquationState<T>>,
    pub regime: Regime,
    pub model: RateModel,
    pub accepted: usize,
    pub rejected: usize,
}

impl<T: Copy> Trajectory<T> {
    pub fn last(&self) -> RateEquationState<T> {
        *self.samples.last().expect("trajectory has the initial sample")
    }
}

/// Pump occupation generation rate A I S/(ħω_pump) in ps⁻¹ for `intensity` in W/cm².
pub fn pump_generation<T: Real>(calc: &RateCalculator<T>, intensity: T) -> T {
    let cfg = calc.config();
    T::lit(cfg.absorption) * units::intensity_from_w_cm2(intensity) * calc.surface() / calc.geometry().pump.energy
}

/// m* = A I S/(ħω_pump Γ′_loss).
pub fn pump_steady_state<T: Real>(calc: &RateCalculator<T>, intensity: T) -> T {
    pump_generation(calc, intensity) / T::lit(calc.config().gamma_loss_pump)
}

/// Steady state under Γ_sc(m, n) ≃ (1 + n) Γ_sc(m, 0).
pub fn steady_state<T: Real>(calc: &RateCalculator<T>, intensity: T) -> Result<SteadyState<T>, DynamicsError> {
    if intensity < T::zero() {
        return Err(DynamicsError::NegativeIntensity(intensity.as_f64()));
    }
    let m = pump_steady_state(calc, intensity);
    let gamma0 = calc.scattering_rate_continuous(m, T::zero())?.gamma_sc;
    let loss = T::lit(calc.config().gamma_loss);
    Ok(if gamma0 < loss {
        SteadyState::Below { m, n: gamma0 / (loss - gamma0), gamma0 }
    } else {
        SteadyState::AboveThreshold { m, gamma0 }
    })
}

/// Integration options with relative tolerance 1e-8.
pub fn default_ode_options<T: Real>() -> OdeOptions<T> {
    OdeOptions {
        rtol: T::lit(1e-8),
        atol: T::lit(1e-14),
        initial_step: T::lit(1e-3),
        min_step: T::lit(1e-12),
        max_step: T::lit(1.0),
    }
}

/// Adaptive Dormand–Prince solution of the rate equations.
///
/// Steps that would make m or n negative are rejected. Above threshold
/// the run stops once m + n reaches 95% of the occupation cap.
pub fn integrate<T: Real>(
    calc: &RateCalculator<T>,
    initial: RateEquationState<T>,
    intensity: T,
    t_end: T,
    model: RateModel,
    opts: OdeOptions<T>,
) -> Result<Trajectory<T>, DynamicsError> {
    if intensity < T::zero() {
        return Err(DynamicsError::NegativeIntensity(intensity.as_f64()));
    }
    if t_end <= initial.t || t_end.is_nan() {
        return Err(DynamicsError::BadEndTime(t_end.as_f64()));
    }
    let generation = pump_generation(calc, intensity);
    let loss = T::lit(calc.config().gamma_loss);
    let loss_pump = T::lit(calc.config().gamma_loss_pump);
    let stop_at = T::lit(0.95) * calc.occupation_limit();
    let failure: RefCell<Option<RatesError>> = RefCell::new(None);

    let rate = |m: T, n: T| -> T {
        let r = match model {
            RateModel::Exact => calc.scattering_rate_continuous(m, n).map(|r| r.gamma_sc),
            RateModel::FinalStateApprox => {
                calc.scattering_rate_continuous(m, T::zero()).map(|r| (T::one() + n) * r.gamma_sc)
            }
        };
        r.unwrap_or_else(|e| {
            failure.borrow_mut().get_or_insert(e);
            T::nan()
        })
    };
    let rhs = |_t: T, y: &[T; 2]| {
        let (m, n) = (y[0], y[1]);
        [generation - loss_pump * m, rate(m, n) - loss * n]
    };
    let mut stopped = false;
    let run = dopri5(
        rhs,
        initial.t,
        [initial.m, initial.n],
        t_end,
        opts,
        |y| y[0] >= T::zero() && y[1] >= T::zero() && y[0] + y[1] <= stop_at / T::lit(0.95),
        |_, y| {
            stopped = y[0] + y[1] >= stop_at;
            stopped
        },
    );
    if let Some(e) = failure.into_inner() {
        return Err(e.into());
    }
    let run = run?;
    let regime = if stopped {
        Regime::Runaway
    } else if steady_state(calc, intensity)?.is_above() {
        Regime::Growing
    } else {
        Regime::Bounded
    };
    Ok(Trajectory {
        samples: run.samples.into_iter().map(|(t, y)| RateEquationState { t, m: y[0], n: y[1] }).collect(),
        regime,
        model,
        accepted: run.accepted,
        rejected: run.rejected,
    })
}

/// Published threshold values and the ratios of the computed ones to them.
#[derive(Debug, Clone, Serialize)]
pub struct ReferenceComparison {
    pub m_thr_density_cm2: f64,
    pub i_thr_w_cm2: f64,
    pub density_ratio: f64,
    pub intensity_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdResult {
    /// Pump occupation at threshold.
    pub m_thr: f64,
    pub m_thr_density_cm2: f64,
    pub m_thr_over_n: f64,
    pub i_thr_w_cm2: f64,
    /// |Γ_sc(m_thr, 0) − Γ_loss| / Γ_loss
    pub residual: f64,
    pub rate_at_threshold: f64,
    pub gamma_loss: f64,
    pub bosonicity_at_threshold: f64,
    pub pump_q: f64,
    pub pump_energy: f64,
    pub pump_matter: f64,
    pub signal_q: f64,
    pub signal_energy: f64,
    pub signal_matter: f64,
    pub sigma: f64,
    pub form_factor: f64,
    pub form_factor_zero_limit: Option<f64>,
    /// 4e²L F/(εħ), nm²·ps⁻¹.
    pub coupling_prefactor: f64,
    /// (m_thr/N) / 0.5: threshold relative to electronic inversion.
    pub inversion_ratio: f64,
    pub reference: ReferenceComparison,
    pub ledger: Vec<LedgerEntry>,
}

/// I_thr = Γ′_loss ħω_pump m/(A S) in W/cm², for `m_density` in cm⁻².
pub fn threshold_intensity(gamma_loss_pump: f64, pump_energy: f64, absorption: f64, m_density_cm2: f64) -> f64 {
    let density = units::density_from_cm2(m_density_cm2);
    units::intensity_to_w_cm2(gamma_loss_pump * pump_energy * density / absorption)
}

/// Solves Γ_sc(m, 0) = Γ_loss for the smallest such m below the cap.
pub fn threshold<T: Real>(
    calc: &RateCalculator<T>,
    ledger: Vec<LedgerEntry>,
) -> Result<ThresholdResult, DynamicsError> {
    let cfg = calc.config();
    let loss = T::lit(cfg.gamma_loss);
    let rate = |m: T| calc.scattering_rate_continuous(m, T::zero()).map(|r| r.gamma_sc);
    let limit = calc.occupation_limit().floor().to_u64().unwrap_or(0);

    let mut upper = None;
    let mut best = (T::zero(), T::zero());
    for k in 1..=limit {
        let m = T::from_u64(k).unwrap();
        let g = rate(m)?;
        if g > best.0 {
            best = (g, m);
        }
        if g >= loss {
            upper = Some(m);
            break;
        }
    }
    let Some(hi) = upper else {
        return Err(DynamicsError::BracketFailure {
            gamma_loss: cfg.gamma_loss,
            max_rate: best.0.as_f64(),
            at_m: best.1.as_f64(),
        });
    };
    let failure: RefCell<Option<RatesError>> = RefCell::new(None);
    let m_thr = bisect(
        |m| {
            rate(m).map(|g| g / loss - T::one()).unwrap_or_else(|e| {
                failure.borrow_mut().get_or_insert(e);
                T::nan()
            })
        },
        hi - T::one(),
        hi,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e.into());
    }
    let at = calc.scattering_rate_continuous(m_thr, T::zero())?;
    let residual = ((at.gamma_sc - loss) / loss).abs().as_f64();

    let geom = calc.geometry();
    let density_cm2 = at.pump_density_cm2().as_f64();
    let i_thr = threshold_intensity(cfg.gamma_loss_pump, geom.pump.energy.as_f64(), cfg.absorption, density_cm2);
    let m_over_n = m_thr.as_f64() / cfg.total_electrons as f64;
    let ff = calc.form_factor();
    Ok(ThresholdResult {
        m_thr: m_thr.as_f64(),
        m_thr_density_cm2: density_cm2,
        m_thr_over_n: m_over_n,
        i_thr_w_cm2: i_thr,
        residual,
        rate_at_threshold: at.gamma_sc.as_f64(),
        gamma_loss: cfg.gamma_loss,
        bosonicity_at_threshold: at.factors.bosonicity.as_f64(),
        pump_q: geom.pump.q.as_f64(),
        pump_energy: geom.pump.energy.as_f64(),
        pump_matter: geom.pump.matter_weight().as_f64(),
        signal_q: geom.signal.q.as_f64(),
        signal_energy: geom.signal.energy.as_f64(),
        signal_matter: geom.signal.matter_weight().as_f64(),
        sigma: ff.sigma.as_f64(),
        form_factor: ff.value.as_f64(),
        form_factor_zero_limit: ff.zero_limit.map(|v| v.as_f64()),
        coupling_prefactor: calc.coupling_prefactor().as_f64(),
        inversion_ratio: m_over_n / INVERSION_FILLING,
        reference: ReferenceComparison {
            m_thr_density_cm2: REFERENCE_THRESHOLD_DENSITY,
            i_thr_w_cm2: REFERENCE_THRESHOLD_INTENSITY,
            density_ratio: density_cm2 / REFERENCE_THRESHOLD_DENSITY,
            intensity_ratio: i_thr / REFERENCE_THRESHOLD_INTENSITY,
        },
        ledger,
    })
}

/// Intensity (W/cm²) whose steady-state pump occupation is `m`.
pub fn intensity_for_pump<T: Real>(calc: &RateCalculator<T>, m: T) -> T {
    m / pump_steady_state(calc, T::one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::DeviceConfig;
    use crate::polariton::default_geometry;

    fn calculator(config: DeviceConfig) -> RateCalculator<f64> {
        let geometry = default_geometry(&config).unwrap();
        RateCalculator::new(config, geometry).unwrap()
    }

    #[test]
    fn dark_steady_state() {
        let calc = calculator(DeviceConfig::gaas());
        assert_eq!(steady_state(&calc, 0.0).unwrap(), SteadyState::Below { m: 0.0, n: 0.0, gamma0: 0.0 });
        assert!(steady_state(&calc, -1.0).is_err());
    }

    #[test]
    fn half_loss_gives_unit_signal() {
        let calc = calculator(DeviceConfig::gaas());
        let loss = calc.config().gamma_loss;
        // find the pump occupation where Γ₀ = Γ_loss/2
        let m = bisect(|m| calc.scattering_rate_continuous(m, 0.0).unwrap().gamma_sc - 0.5 * loss, 0.0, 500.0).unwrap();
        let i = intensity_for_pump(&calc, m);
        match steady_state(&calc, i).unwrap() {
            SteadyState::Below { n, .. } => assert!((n - 1.0).abs() < 1e-9, "{n}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn threshold_residual_and_intensity() {
        let calc = calculator(DeviceConfig::gaas());
        let thr = threshold(&calc, Vec::new()).unwrap();
        assert!(thr.residual <= 1e-10, "{}", thr.residual);
        let i = intensity_for_pump(&calc, thr.m_thr);
        assert!(((i - thr.i_thr_w_cm2) / i).abs() < 1e-12);
        assert!(steady_state(&calc, 1.01 * thr.i_thr_w_cm2).unwrap().is_above());
        assert!(!steady_state(&calc, 0.99 * thr.i_thr_w_cm2).unwrap().is_above());
    }

    #[test]
    fn closed_form_intensity() {
        let i = threshold_intensity(5.0, 160.0, 0.4, 1.1e11);
        assert!((i - 3.5e4).abs() / 3.5e4 < 0.1, "{i}");
    }

    #[test]
    fn doubling_loss_doubles_threshold_in_bosonic_limit() {
        let mut cfg = DeviceConfig::gaas();
        cfg.total_electrons = 200_000;
        cfg.gamma_loss = 0.05;
        let low = threshold(&calculator(cfg.clone()), Vec::new()).unwrap();
        cfg.gamma_loss = 0.1;
        let high = threshold(&calculator(cfg), Vec::new()).unwrap();
        assert!(low.bosonicity_at_threshold > 0.999);
        let ratio = high.m_thr / low.m_thr;
        assert!((ratio - 2.0).abs() < 0.04, "{ratio}");
    }

    #[test]
    fn pure_decay() {
        let calc = calculator(DeviceConfig::gaas());
        let n0 = 3.0;
        let init = RateEquationState { t: 0.0, m: 0.0, n: n0 };
        let traj = integrate(&calc, init, 0.0, 2.0, RateModel::Exact, default_ode_options()).unwrap();
        let g = calc.config().gamma_loss;
        for s in &traj.samples {
            let want = n0 * (-g * s.t).exp();
            assert!(((s.n - want) / want).abs() < 1e-6, "t={} {} vs {want}", s.t, s.n);
        }
        assert_eq!(traj.regime, Regime::Bounded);
    }

    #[test]
    fn relaxes_to_steady_state() {
        let calc = calculator(DeviceConfig::gaas());
        let thr = threshold(&calc, Vec::new()).unwrap();
        let i = 0.6 * thr.i_thr_w_cm2;
        let SteadyState::Below { m, n, .. } = steady_state(&calc, i).unwrap() else { panic!() };
        let init = RateEquationState { t: 0.0, m: 0.0, n: 0.0 };
        let traj = integrate(&calc, init, i, 40.0, RateModel::FinalStateApprox, default_ode_options()).unwrap();
        let last = traj.last();
        assert!(((last.n - n) / n).abs() < 1e-3);
        assert!(((last.m - m) / m).abs() < 1e-6);
        assert!(traj.samples.iter().all(|s| s.m >= 0.0 && s.n >= 0.0));
    }

    #[test]
    fn above_threshold_runs_away() {
        let calc = calculator(DeviceConfig::gaas());
        let thr = threshold(&calc, Vec::new()).unwrap();
        let init = RateEquationState { t: 0.0, m: thr.m_thr * 1.2, n: 1.0 };
        let traj =
            integrate(&calc, init, 1.2 * thr.i_thr_w_cm2, 2000.0, RateModel::FinalStateApprox, default_ode_options())
                .unwrap();
        assert_eq!(traj.regime, Regime::Runaway);
        assert!(traj.last().t < 2000.0);
    }
}
