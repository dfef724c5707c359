//! Normalized phonon-emission matrix element, bosonicity factor B_m^n,
//! its linear-regime slope ζ, the envelope form factor and the resulting
//! stimulated scattering rate.
//!
//! The Fröhlich coupling difference (C₂₂ − C₁₁) is never evaluated: it
//! cancels in B, and its physical magnitude only enters through the
//! packaged prefactor 4e²L F/(εħ) of the rate.

use std::sync::Arc;

use dashmap::DashMap;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cbalg::{CbError, CorrelatorScalar, Correlators, LogFloat, NumericMode};
use crate::numerics::{integrate, NumericsError};
use crate::params::{units, DeviceConfig, FormFactorModel};
use crate::polariton::ScatteringGeometry;
use crate::scalar::Real;

/// Largest (m+n)/N accepted by default.
pub const DEFAULT_OCCUPATION_CAP: f64 = 0.5;
/// Upper end of the window where B is linear in (m+n)/N.
pub const LINEAR_WINDOW: f64 = 0.1;
/// Largest tolerated |B − (1 − ζx)| in a ζ fit.
pub const ZETA_RESIDUAL_THRESHOLD: f64 = 0.01;

#[derive(Debug, Error)]
pub enum RatesError {
    #[error(transparent)]
    Correlator(#[from] CbError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("pump occupation m must be at least 1")]
    EmptyPump,
    #[error("occupation m+n = {total} exceeds the cap {cap}·N (N = {n_electrons})")]
    CapExceeded { total: f64, cap: f64, n_electrons: u64 },
    #[error("B = {b} at m = {m}, n = {n} lies outside (0, 1]; retry in rational mode")]
    OutOfRange { b: f64, m: u64, n: u64 },
    #[error("ζ fit point (m+n)/N = {0} lies outside the linear window")]
    OutsideLinearWindow(f64),
    #[error("ζ fit residual {residual:e} exceeds {threshold:e}")]
    ResidualTooLarge { residual: f64, threshold: f64, zeta: f64 },
    #[error("ζ fit needs at least one point with m+n > 0")]
    EmptyGrid,
    #[error("non-finite value in float mode at m = {m}, n = {n}; retry in rational mode")]
    Overflow { m: u64, n: u64 },
}

/// Matter weights |β|² of the signal and pump modes, plus their photon
/// complements |α|² = 1 − |β|².
#[derive(Debug, Clone, PartialEq)]
pub struct HopfieldWeights<S> {
    pub signal_matter: S,
    pub pump_matter: S,
    pub signal_photon: S,
    pub pump_photon: S,
}

impl<S: CorrelatorScalar> HopfieldWeights<S> {
    pub fn new(signal_matter: S, pump_matter: S) -> Self {
        Self {
            signal_photon: S::one() - signal_matter.clone(),
            pump_photon: S::one() - pump_matter.clone(),
            signal_matter,
            pump_matter,
        }
    }

    /// Exchanges the roles of pump and signal.
    pub fn swapped(&self) -> Self {
        Self::new(self.pump_matter.clone(), self.signal_matter.clone())
    }

    pub fn has_photon_limit(&self) -> bool {
        self.signal_matter.is_zero() || self.pump_matter.is_zero()
    }
}

impl<T: Real> HopfieldWeights<LogFloat<T>> {
    pub fn from_real(signal_matter: T, pump_matter: T) -> Self {
        Self::new(LogFloat::from_real(signal_matter), LogFloat::from_real(pump_matter))
    }

    pub fn from_geometry(geometry: &ScatteringGeometry<T>) -> Self {
        Self::from_real(geometry.signal.matter_weight(), geometry.pump.matter_weight())
    }
}

/// x^0, x^1, …, x^k.
fn powers<S: CorrelatorScalar>(x: &S, k: u64) -> Vec<S> {
    let mut out = Vec::with_capacity(k as usize + 1);
    out.push(S::one());
    for i in 0..k as usize {
        out.push(out[i].clone() * x.clone());
    }
    out
}

/// Σ_{l≤n, h≤m−1} C(n,l) C(m−1,h) α^{2l} β^{2(n−l)} α′^{2h} β′^{2(m−1−h)} f^{n−l}_{m−h}
fn exchange_sum<S: CorrelatorScalar>(
    corr: &Correlators<S>,
    m: u64,
    n: u64,
    w: &HopfieldWeights<S>,
) -> Result<S, CbError> {
    let (a, b) = (powers(&w.signal_photon, n), powers(&w.signal_matter, n));
    let (ap, bp) = (powers(&w.pump_photon, m - 1), powers(&w.pump_matter, m - 1));
    let (cn, cm) = (S::binomial_row(n), S::binomial_row(m - 1));
    let mut total = S::zero();
    for l in 0..=n {
        let outer = cn[l as usize].clone() * a[l as usize].clone() * b[(n - l) as usize].clone();
        if outer.is_zero() {
            continue;
        }
        for h in 0..m {
            let inner = cm[h as usize].clone() * ap[h as usize].clone() * bp[(m - 1 - h) as usize].clone();
            if inner.is_zero() {
                continue;
            }
            total = total + outer.clone() * inner * corr.f(m - h, n - l)?;
        }
    }
    Ok(total)
}

/// Σ_{l≤n, h≤m} C(n,l) C(m,h) α^{2l} β^{2(n−l)} α′^{2h} β′^{2(m−h)} K(n−l, m−h, n−l, m−h−1)
fn norm_sum<S: CorrelatorScalar>(corr: &Correlators<S>, n: u64, m: u64, w: &HopfieldWeights<S>) -> Result<S, CbError> {
    let (a, b) = (powers(&w.signal_photon, n), powers(&w.signal_matter, n));
    let (ap, bp) = (powers(&w.pump_photon, m), powers(&w.pump_matter, m));
    let (cn, cm) = (S::binomial_row(n), S::binomial_row(m));
    let mut total = S::zero();
    for l in 0..=n {
        let outer = cn[l as usize].clone() * a[l as usize].clone() * b[(n - l) as usize].clone();
        if outer.is_zero() {
            continue;
        }
        for h in 0..=m {
            let inner = cm[h as usize].clone() * ap[h as usize].clone() * bp[(m - h) as usize].clone();
            if inner.is_zero() {
                continue;
            }
            total = total + outer.clone() * inner * corr.norm(n - l, m - h)?;
        }
    }
    Ok(total)
}

fn check_occupation(m: u64, n: u64, n_electrons: u64, cap: f64) -> Result<(), RatesError> {
    if m == 0 {
        return Err(RatesError::EmptyPump);
    }
    let total = (m + n) as f64;
    if total > cap * n_electrons as f64 {
        return Err(RatesError::CapExceeded { total, cap, n_electrons });
    }
    Ok(())
}

/// |V_m^n|² / |C₂₂ − C₁₁|²: the squared matrix element of one pump→signal
/// phonon emission between normalized Fock states, with every factorial
/// kept as written.
pub fn matrix_element_sq_normalized<S: CorrelatorScalar>(
    corr: &Correlators<S>,
    m: u64,
    n: u64,
    w: &HopfieldWeights<S>,
) -> Result<S, RatesError> {
    check_occupation(m, n, corr.n_electrons(), DEFAULT_OCCUPATION_CAP)?;
    let sf = exchange_sum(corr, m, n, w)?;
    // ((n+1)! m!)² / (n! m! · (n+1)! (m−1)!)
    let fact = S::factorial_ratio(&[n + 1, m, n + 1, m], &[n, m, n + 1, m - 1]);
    let numerator = fact * w.signal_matter.clone() * w.pump_matter.clone() * sf.clone() * sf;
    let denominator = norm_sum(corr, n, m, w)? * norm_sum(corr, n + 1, m - 1, w)?;
    Ok(numerator / denominator)
}

#[derive(Debug, Clone, Serialize)]
pub struct BosonicityResult<S> {
    #[serde(skip)]
    pub value: S,
    pub b: f64,
    pub m: u64,
    pub n: u64,
    pub n_electrons: u64,
    pub signal_matter: f64,
    pub pump_matter: f64,
    pub mode: NumericMode,
    pub rel_error: f64,
    /// A mode had zero matter weight and B was set to its elementary-boson value.
    pub photon_limit: bool,
}

impl<S> BosonicityResult<S> {
    pub fn in_range(&self) -> bool {
        self.b > 0.0 && self.b <= 1.0 + 1e-12
    }

    pub fn check(self) -> Result<Self, RatesError> {
        if self.in_range() {
            Ok(self)
        } else {
            Err(RatesError::OutOfRange { b: self.b, m: self.m, n: self.n })
        }
    }
}

/// B_m^n with the default occupation cap.
pub fn bosonicity<S: CorrelatorScalar>(
    corr: &Correlators<S>,
    m: u64,
    n: u64,
    w: &HopfieldWeights<S>,
) -> Result<BosonicityResult<S>, RatesError> {
    bosonicity_capped(corr, m, n, w, DEFAULT_OCCUPATION_CAP)
}

/// B_m^n = |V|² / ((n+1) m |ββ′|² |C₂₂ − C₁₁|²), evaluated in the reduced
/// form S_f² / (S_N(n,m) S_N(n+1,m−1)) so that the photon limit is regular.
pub fn bosonicity_capped<S: CorrelatorScalar>(
    corr: &Correlators<S>,
    m: u64,
    n: u64,
    w: &HopfieldWeights<S>,
    cap: f64,
) -> Result<BosonicityResult<S>, RatesError> {
    check_occupation(m, n, corr.n_electrons(), cap)?;
    let photon_limit = w.has_photon_limit();
    let value = if photon_limit {
        S::one()
    } else {
        let sf = exchange_sum(corr, m, n, w)?;
        (sf.clone() * sf) / (norm_sum(corr, n, m, w)? * norm_sum(corr, n + 1, m - 1, w)?)
    };
    if !value.is_finite() {
        return Err(RatesError::Overflow { m, n });
    }
    Ok(BosonicityResult {
        b: value.to_f64(),
        rel_error: value.rel_error(),
        value,
        m,
        n,
        n_electrons: corr.n_electrons(),
        signal_matter: w.signal_matter.to_f64(),
        pump_matter: w.pump_matter.to_f64(),
        mode: S::MODE,
        photon_limit,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ZetaFit {
    pub zeta: f64,
    /// max |B − (1 − ζ(m+n)/N)| over the grid.
    pub max_residual: f64,
    pub n_electrons: u64,
    /// ((m+n)/N, B) pairs in grid order.
    pub points: Vec<(f64, f64)>,
}

/// About `points` occupations m = k·step (n = 0) spanning the linear window.
pub fn default_zeta_grid(n_electrons: u64, points: u64) -> Vec<(u64, u64)> {
    let top = ((LINEAR_WINDOW * n_electrons as f64).floor() as u64).max(1);
    let step = (top / points.max(1)).max(1);
    (1..=top / step).map(|k| (k * step, 0)).collect()
}

/// Least-squares slope of 1 − B against (m+n)/N through the origin.
pub fn zeta_fit<S: CorrelatorScalar>(
    corr: &Correlators<S>,
    w: &HopfieldWeights<S>,
    grid: &[(u64, u64)],
    residual_threshold: f64,
) -> Result<ZetaFit, RatesError> {
    let big_n = corr.n_electrons() as f64;
    for &(m, n) in grid {
        let x = (m + n) as f64 / big_n;
        if x > LINEAR_WINDOW + 1e-12 {
            return Err(RatesError::OutsideLinearWindow(x));
        }
    }
    let points: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&(m, n)| bosonicity(corr, m, n, w).map(|r| ((m + n) as f64 / big_n, r.b)))
        .collect::<Result<_, _>>()?;
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    if sxx == 0.0 {
        return Err(RatesError::EmptyGrid);
    }
    let sxy: f64 = points.iter().map(|(x, b)| x * (1.0 - b)).sum();
    let zeta = sxy / sxx;
    let max_residual = points.iter().map(|(x, b)| (b - (1.0 - zeta * x)).abs()).fold(0.0, f64::max);
    if max_residual > residual_threshold {
        return Err(RatesError::ResidualTooLarge { residual: max_residual, threshold: residual_threshold, zeta });
    }
    Ok(ZetaFit { zeta, max_residual, n_electrons: corr.n_electrons(), points })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FormFactor<T> {
    pub sigma: T,
    pub value: T,
    /// σ → 0 value of the infinite-well model, reported next to the value used.
    pub zero_limit: Option<T>,
}

/// |φ₂|² − |φ₁|² for the infinite well, x in units of the well width.
fn density_difference<T: Real>(x: T) -> T {
    let two_pi = T::lit(2.0) * T::PI();
    (two_pi * x).cos() - (T::lit(2.0) * two_pi * x).cos()
}

/// (1 − e^{−σu})/σ, equal to u at σ = 0.
fn screened_distance<T: Real>(sigma: T, u: T) -> T {
    if sigma == T::zero() {
        u
    } else {
        -(-sigma * u).exp_m1() / sigma
    }
}

/// F(σ) = (π/σ) ∬ Δρ(x) Δρ(x′) e^{−σ|x−x′|} dx dx′ over the unit well.
///
/// Since ∫Δρ = 0 this equals −π ∬ Δρ Δρ′ (1 − e^{−σ|x−x′|})/σ, which is
/// what is integrated.
pub fn infinite_well_form_factor<T: Real>(sigma: T) -> Result<T, NumericsError> {
    let tol = T::lit(1e-12);
    let mut inner_err = None;
    let outer = integrate(
        |x| {
            let inner =
                integrate(|xp| density_difference(xp) * screened_distance(sigma, x - xp), T::zero(), x, tol, tol);
            match inner {
                Ok(v) => density_difference(x) * v,
                Err(e) => {
                    inner_err.get_or_insert(e);
                    T::zero()
                }
            }
        },
        T::zero(),
        T::one(),
        tol,
        tol,
    )?;
    if let Some(e) = inner_err {
        return Err(e);
    }
    // symmetric integrand: twice the x′ < x half
    Ok(-T::lit(2.0) * T::PI() * outer)
}

pub fn form_factor<T: Real>(sigma: T, model: FormFactorModel) -> Result<FormFactor<T>, RatesError> {
    assert!(sigma >= T::zero(), "σ must be non-negative");
    Ok(match model {
        FormFactorModel::Constant(f0) => FormFactor { sigma, value: T::lit(f0), zero_limit: None },
        FormFactorModel::InfiniteWell => FormFactor {
            sigma,
            value: infinite_well_form_factor(sigma)?,
            zero_limit: Some(infinite_well_form_factor(T::zero())?),
        },
    })
}

/// The factors whose product is Γ_sc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFactors<T> {
    /// n + 1
    pub stimulation: T,
    pub bosonicity: T,
    /// |β|² of the signal mode.
    pub signal_matter: T,
    /// |β′|² of the pump mode.
    pub pump_matter: T,
    /// m/S in nm⁻².
    pub pump_density: T,
    /// ω_LO/Γ_LO
    pub phonon_quality: T,
    /// 4e²L F/(εħ) in nm²·ps⁻¹.
    pub coupling: T,
    /// Lorentzian Λ(δ); 1 when disabled.
    pub detuning: T,
}

impl<T: Real> RateFactors<T> {
    pub fn product(&self) -> T {
        self.stimulation
            * self.bosonicity
            * self.signal_matter
            * self.pump_matter
            * self.pump_density
            * self.phonon_quality
            * self.coupling
            * self.detuning
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateResult<T> {
    /// Γ_sc in ps⁻¹.
    pub gamma_sc: T,
    pub m: T,
    pub n: T,
    pub factors: RateFactors<T>,
    pub sigma: T,
    pub detuning_energy: T,
    pub photon_limit: bool,
}

impl<T: Real> RateResult<T> {
    /// m/S in cm⁻².
    pub fn pump_density_cm2(&self) -> T {
        units::density_to_cm2(self.factors.pump_density)
    }
}

/// Scattering rates for one device and one pump/signal geometry.
///
/// B values are cached per integer (m, n); non-integer occupations use
/// bilinear interpolation with B(0, n) = 1.
pub struct RateCalculator<T: Real> {
    config: DeviceConfig,
    geometry: ScatteringGeometry<T>,
    correlators: Arc<Correlators<LogFloat<T>>>,
    weights: HopfieldWeights<LogFloat<T>>,
    form_factor: FormFactor<T>,
    cache: DashMap<(u64, u64), (T, bool)>,
}

impl<T: Real> RateCalculator<T> {
    pub fn new(config: DeviceConfig, geometry: ScatteringGeometry<T>) -> Result<Self, RatesError> {
        let corr = Arc::new(Correlators::new(config.total_electrons));
        Self::with_correlators(config, geometry, corr)
    }

    pub fn with_correlators(
        config: DeviceConfig,
        geometry: ScatteringGeometry<T>,
        correlators: Arc<Correlators<LogFloat<T>>>,
    ) -> Result<Self, RatesError> {
        assert_eq!(correlators.n_electrons(), config.total_electrons, "correlator cache built for another N");
        let sigma = T::lit(config.well_width) * geometry.momentum_transfer;
        let form_factor = form_factor(sigma, config.form_factor_model)?;
        Ok(Self {
            weights: HopfieldWeights::from_geometry(&geometry),
            config,
            geometry,
            correlators,
            form_factor,
            cache: DashMap::new(),
        })
    }

    pub fn config(&self) -> &DeviceConfig {
        &self.config
    }

    pub fn geometry(&self) -> &ScatteringGeometry<T> {
        &self.geometry
    }

    pub fn correlators(&self) -> &Arc<Correlators<LogFloat<T>>> {
        &self.correlators
    }

    pub fn form_factor(&self) -> &FormFactor<T> {
        &self.form_factor
    }

    /// S = N/n_s in nm².
    pub fn surface(&self) -> T {
        T::lit(self.config.surface())
    }

    /// Largest m + n allowed.
    pub fn occupation_limit(&self) -> T {
        T::lit(self.config.occupation_cap * self.config.total_electrons as f64)
    }

    /// 4e²L F/(εħ) in nm²·ps⁻¹.
    pub fn coupling_prefactor(&self) -> T {
        T::lit(4.0 * units::COULOMB * self.config.well_width / (self.config.epsilon_r * units::HBAR))
            * self.form_factor.value
    }

    pub fn detuning_factor(&self) -> T {
        if !self.config.lorentzian_detuning {
            return T::one();
        }
        let g = T::lit(self.config.gamma_lo_energy());
        let d = self.geometry.detuning;
        g * g / (d * d + g * g)
    }

    /// B_m^n at integer occupations (B(0, n) = 1).
    pub fn bosonicity(&self, m: u64, n: u64) -> Result<(T, bool), RatesError> {
        if m == 0 {
            return Ok((T::one(), false));
        }
        if let Some(v) = self.cache.get(&(m, n)) {
            return Ok(*v);
        }
        let r = bosonicity_capped(&self.correlators, m, n, &self.weights, self.config.occupation_cap)?.check()?;
        let v = (r.value.to_real(), r.photon_limit);
        self.cache.insert((m, n), v);
        Ok(v)
    }

    /// B at real occupations by bilinear interpolation.
    pub fn bosonicity_interpolated(&self, m: T, n: T) -> Result<(T, bool), RatesError> {
        let total = m + n;
        if total > self.occupation_limit() {
            return Err(RatesError::CapExceeded {
                total: total.as_f64(),
                cap: self.config.occupation_cap,
                n_electrons: self.config.total_electrons,
            });
        }
        let (m0, n0) = (m.floor(), n.floor());
        let (fm, fn_) = (m - m0, n - n0);
        let (mi, ni) = (m0.to_u64().unwrap_or(0), n0.to_u64().unwrap_or(0));
        let corner = |dm: u64, dn: u64, w: T| -> Result<(T, bool), RatesError> {
            if w == T::zero() {
                return Ok((T::zero(), false));
            }
            let (b, p) = self.bosonicity(mi + dm, ni + dn)?;
            Ok((w * b, p))
        };
        let one = T::one();
        let parts = [
            corner(0, 0, (one - fm) * (one - fn_))?,
            corner(1, 0, fm * (one - fn_))?,
            corner(0, 1, (one - fm) * fn_)?,
            corner(1, 1, fm * fn_)?,
        ];
        let b = parts.iter().fold(T::zero(), |s, p| s + p.0);
        Ok((b, parts.iter().any(|p| p.1)))
    }

    fn assemble(&self, m: T, n: T, b: T, photon_limit: bool) -> RateResult<T> {
        let factors = RateFactors {
            stimulation: n + T::one(),
            bosonicity: b,
            signal_matter: self.geometry.signal.matter_weight(),
            pump_matter: self.geometry.pump.matter_weight(),
            pump_density: m / self.surface(),
            phonon_quality: T::lit(self.config.phonon_q),
            coupling: self.coupling_prefactor(),
            detuning: self.detuning_factor(),
        };
        RateResult {
            gamma_sc: factors.product(),
            m,
            n,
            factors,
            sigma: self.form_factor.sigma,
            detuning_energy: self.geometry.detuning,
            photon_limit,
        }
    }

    /// Γ_sc^{m,n} at integer occupations.
    pub fn scattering_rate(&self, m: u64, n: u64) -> Result<RateResult<T>, RatesError> {
        let (b, p) = self.bosonicity(m, n)?;
        let to_t = |k: u64| T::from_u64(k).expect("occupation fits");
        Ok(self.assemble(to_t(m), to_t(n), b, p))
    }

    /// Γ_sc at real occupations, B interpolated.
    pub fn scattering_rate_continuous(&self, m: T, n: T) -> Result<RateResult<T>, RatesError> {
        let (b, p) = self.bosonicity_interpolated(m, n)?;
        Ok(self.assemble(m, n, b, p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::Oracle;
    use crate::{BigRational, CorrelatorKey, ExactCorrelators, FloatCorrelators};
    use num_bigint::BigInt;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    fn w_f(b2s: f64, b2p: f64) -> HopfieldWeights<crate::LogF64> {
        HopfieldWeights::from_real(b2s, b2p)
    }

    #[test]
    fn single_pump_polariton_is_bosonic() {
        for n_el in [2u64, 7, 100] {
            let corr = ExactCorrelators::new(n_el);
            let w = HopfieldWeights::new(q(1, 3), q(2, 5));
            assert_eq!(bosonicity(&corr, 1, 0, &w).unwrap().value, q(1, 1));
            let v = matrix_element_sq_normalized(&corr, 1, 0, &w).unwrap();
            assert_eq!(v, q(1, 3) * q(2, 5));
        }
    }

    #[test]
    fn literal_and_reduced_routes_agree() {
        let corr = ExactCorrelators::new(10);
        for (bs, bp) in [(q(1, 2), q(1, 2)), (q(1, 4), q(3, 4)), (q(1, 1), q(1, 1))] {
            let w = HopfieldWeights::new(bs.clone(), bp.clone());
            for m in 1..=3u64 {
                for n in 0..=2u64 {
                    let lit = matrix_element_sq_normalized(&corr, m, n, &w).unwrap();
                    let b = bosonicity(&corr, m, n, &w).unwrap().value;
                    let scale = BigRational::from_integer(BigInt::from((n + 1) * m)) * bs.clone() * bp.clone();
                    assert_eq!(lit, b * scale, "m={m} n={n}");
                }
            }
        }
    }

    #[test]
    fn photon_pump_kills_matrix_element() {
        let corr = ExactCorrelators::new(10);
        let w = HopfieldWeights::new(q(1, 2), q(0, 1));
        assert_eq!(matrix_element_sq_normalized(&corr, 2, 1, &w).unwrap(), q(0, 1));
        let r = bosonicity(&corr, 2, 1, &w).unwrap();
        assert!(r.photon_limit);
        assert_eq!(r.b, 1.0);
    }

    /// Every correlator in the m = 2, n = 0, pure-matter element taken
    /// from brute-force normal ordering.
    #[test]
    fn matter_m2_matches_oracle() {
        let n_el = 5u64;
        let o = Oracle::default();
        let k = |n, m, s, r| o.k(CorrelatorKey::new(n, m, s, r), n_el).unwrap();
        // β = β′ = 1: only l = n, h = 0 survive
        let f = |sub: i64, sup: i64| {
            let mut v = k(sub - 1, sup + 1, sub - 1, sup);
            if sup > 0 {
                v += q(sup, sub) * k(sub - 1, sup + 1, sub, sup - 1);
            }
            v
        };
        let sf = f(2, 0);
        let norm_nm = k(0, 2, 0, 1);
        let norm_shift = k(1, 1, 1, 0);
        // ((1)! 2!)² / (0! 2! · 1! 1!) = 2
        let want = q(2, 1) * sf.clone() * sf / (norm_nm * norm_shift);
        let corr = ExactCorrelators::new(n_el);
        let w = HopfieldWeights::new(q(1, 1), q(1, 1));
        assert_eq!(matrix_element_sq_normalized(&corr, 2, 0, &w).unwrap(), want);
    }

    #[test]
    fn pure_photon_is_exactly_bosonic() {
        let corr = FloatCorrelators::new(200);
        let w = w_f(0.0, 0.0);
        for (m, n) in [(1, 0), (5, 0), (20, 3), (40, 10)] {
            assert_eq!(bosonicity(&corr, m, n, &w).unwrap().b, 1.0);
        }
    }

    #[test]
    fn matter_bosonicity_near_one_minus_density() {
        let corr = FloatCorrelators::new(2000);
        let b = bosonicity(&corr, 200, 0, &w_f(1.0, 1.0)).unwrap().b;
        assert!((b - 0.9).abs() < 0.01, "{b}");
    }

    #[test]
    fn float_tracks_rational() {
        let exact = ExactCorrelators::new(40);
        let float = FloatCorrelators::new(40);
        let we = HopfieldWeights::new(q(1, 4), q(3, 5));
        let wf = w_f(0.25, 0.6);
        for (m, n) in [(1, 0), (3, 2), (8, 0), (6, 5)] {
            let e = bosonicity(&exact, m, n, &we).unwrap().b;
            let f = bosonicity(&float, m, n, &wf).unwrap();
            assert!(((f.b - e) / e).abs() < 1e-10, "m={m} n={n}");
            assert!(f.rel_error < 1e-10);
        }
    }

    #[test]
    fn mixed_mode_zeta_regression() {
        // frozen from the first evaluation at N = 2000
        let corr = FloatCorrelators::new(2000);
        let fit = zeta_fit(&corr, &w_f(0.5, 0.5), &default_zeta_grid(2000, 50), ZETA_RESIDUAL_THRESHOLD).unwrap();
        assert!((fit.zeta - 1.195).abs() < 2e-3, "{}", fit.zeta);
    }

    #[test]
    fn zeta_grid_stays_in_window() {
        let g = default_zeta_grid(2000, 50);
        assert_eq!(g.len(), 50);
        assert_eq!(g.last(), Some(&(200, 0)));
        let corr = FloatCorrelators::new(100);
        assert!(matches!(zeta_fit(&corr, &w_f(1.0, 1.0), &[(20, 0)], 0.01), Err(RatesError::OutsideLinearWindow(_))));
    }

    #[test]
    fn cap_is_enforced() {
        let corr = FloatCorrelators::new(100);
        assert!(matches!(bosonicity(&corr, 40, 11, &w_f(0.5, 0.5)), Err(RatesError::CapExceeded { .. })));
        assert!(matches!(bosonicity(&corr, 0, 1, &w_f(0.5, 0.5)), Err(RatesError::EmptyPump)));
    }

    /// Midpoint rule on the full square, kink included.
    fn form_factor_grid(sigma: f64, cells: usize) -> f64 {
        let h = 1.0 / cells as f64;
        let mut acc = 0.0;
        for i in 0..cells {
            let x = (i as f64 + 0.5) * h;
            let dx = density_difference(x);
            for j in 0..cells {
                let y = (j as f64 + 0.5) * h;
                acc += dx * density_difference(y) * screened_distance(sigma, (x - y).abs());
            }
        }
        -std::f64::consts::PI * acc * h * h
    }

    #[test]
    fn infinite_well_form_factor_values() {
        let f0 = infinite_well_form_factor(0.0f64).unwrap();
        assert!((f0 - 0.099472).abs() < 1e-5, "{f0}");
        for sigma in [0.0, 0.5, 2.0, 5.0] {
            let quad = infinite_well_form_factor(sigma).unwrap();
            let grid = form_factor_grid(sigma, 600);
            assert!((quad - grid).abs() < 1e-5, "σ={sigma}: {quad} vs {grid}");
        }
        let tiny = infinite_well_form_factor(1e-6f64).unwrap();
        assert!(((tiny - f0) / f0).abs() < 1e-6);
    }

    #[test]
    fn infinite_well_form_factor_decays() {
        let mut prev = f64::INFINITY;
        for i in 0..=20 {
            let v = infinite_well_form_factor(0.25 * i as f64).unwrap();
            assert!(v <= prev + 1e-14 && v > 0.0);
            prev = v;
        }
    }

    #[test]
    fn constant_form_factor() {
        let f = form_factor(3.0f64, FormFactorModel::Constant(0.1)).unwrap();
        assert_eq!(f.value, 0.1);
        assert!(f.zero_limit.is_none());
        let f = form_factor(0.0f64, FormFactorModel::InfiniteWell).unwrap();
        assert_eq!(Some(f.value), f.zero_limit);
    }

    fn calculator() -> RateCalculator<f64> {
        let config = DeviceConfig::gaas();
        let geometry = crate::polariton::default_geometry(&config).unwrap();
        RateCalculator::new(config, geometry).unwrap()
    }

    #[test]
    fn rate_structure() {
        let calc = calculator();
        let r0 = calc.scattering_rate(100, 0).unwrap();
        assert!(((r0.factors.product() - r0.gamma_sc) / r0.gamma_sc).abs() < 1e-12);
        for n in [1u64, 5, 20] {
            let rn = calc.scattering_rate(100, n).unwrap();
            let want = (n + 1) as f64 * rn.factors.bosonicity / r0.factors.bosonicity;
            assert!((rn.gamma_sc / r0.gamma_sc - want).abs() < 1e-12 * want);
        }
        assert_eq!(calc.scattering_rate(0, 0).unwrap().gamma_sc, 0.0);
    }

    #[test]
    fn interpolation_hits_integer_points() {
        let calc = calculator();
        let exact = calc.scattering_rate(37, 2).unwrap().gamma_sc;
        let interp = calc.scattering_rate_continuous(37.0, 2.0).unwrap().gamma_sc;
        assert_eq!(exact, interp);
        let mid = calc.bosonicity_interpolated(37.5, 0.0).unwrap().0;
        let (a, b) = (calc.bosonicity(37, 0).unwrap().0, calc.bosonicity(38, 0).unwrap().0);
        assert!((mid - 0.5 * (a + b)).abs() < 1e-15);
    }

    #[test]
    fn lorentzian_is_unity_on_resonance() {
        let mut config = DeviceConfig::gaas();
        config.lorentzian_detuning = true;
        let mut geometry = crate::polariton::default_geometry::<f64>(&config).unwrap();
        let calc = RateCalculator::new(config.clone(), geometry).unwrap();
        assert!((calc.detuning_factor() - 1.0).abs() < 1e-12);
        geometry.detuning = config.gamma_lo_energy();
        let calc = RateCalculator::new(config, geometry).unwrap();
        assert!((calc.detuning_factor() - 0.5).abs() < 1e-12);
    }
}
