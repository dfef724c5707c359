//! Lower/upper intersubband polariton branches and the kinematics of
//! LO-phonon-assisted scattering between them.
//!
//! The light–matter problem at each in-plane wave vector is the real
//! symmetric 2×2 matrix `[[ω_c(q), Ω_R], [Ω_R, ω₁₂]]`. Hopfield amplitudes
//! follow the convention α_LP > 0, β_UP > 0, which makes them continuous
//! in `q`. Wave vectors are signed scalars along a collinear cut; the
//! dispersion only depends on `|q|`.

use serde::Serialize;
use thiserror::Error;

use crate::numerics::{bisect, expand_bracket, NumericsError};
use crate::params::{units, DeviceConfig};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolaritonError {
    #[error("Hopfield target {0} outside the open interval (0, 1)")]
    TargetOutOfRange(f64),
    #[error("no {branch:?} wave vector with |beta|^2 = {target} {detail}")]
    NoSolution { branch: Branch, target: f64, detail: String },
    #[error("phonon emission kinematically forbidden on the whole pump grid")]
    Forbidden,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Branch {
    #[serde(rename = "LP")]
    Lower,
    #[serde(rename = "UP")]
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResonanceSide {
    Below,
    At,
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolaritonMode<T> {
    pub branch: Branch,
    pub q: T,
    pub energy: T,
    /// Photon amplitude.
    pub alpha: T,
    /// Matter amplitude.
    pub beta: T,
}

impl<T: Real> PolaritonMode<T> {
    pub fn photon_weight(&self) -> T {
        self.alpha * self.alpha
    }

    pub fn matter_weight(&self) -> T {
        self.beta * self.beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScatteringGeometry<T> {
    pub pump: PolaritonMode<T>,
    pub signal: PolaritonMode<T>,
    pub momentum_transfer: T,
    /// ω_pump − ω_signal − ω_LO.
    pub detuning: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HopfieldSolution<T> {
    pub q: T,
    pub side: ResonanceSide,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairScan<T> {
    pub pairs: Vec<ScatteringGeometry<T>>,
    /// Pump wave vectors for which no signal mode conserves energy.
    pub forbidden: Vec<T>,
}

/// Cavity dispersion plus constant light–matter coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dispersion<T> {
    pub omega12: T,
    /// Ω_R = χ√N, half the splitting at resonance.
    pub rabi_half: T,
    /// ħc / n_eff, meV·nm.
    pub photon_slope: T,
    pub q_z0: T,
}

impl<T: Real> Dispersion<T> {
    pub fn new(omega12: T, rabi_half: T, effective_index: T, q_z0: T) -> Self {
        Self { omega12, rabi_half, photon_slope: T::lit(units::HBAR_C) / effective_index, q_z0 }
    }

    pub fn from_config(config: &DeviceConfig) -> Self {
        Self::new(
            T::lit(config.omega12),
            T::lit(config.rabi_half()),
            T::lit(config.cavity.effective_index),
            T::lit(config.cavity.q_z0),
        )
    }

    pub fn with_rabi_half(mut self, rabi_half: T) -> Self {
        self.rabi_half = rabi_half;
        self
    }

    /// Wave vector where the bare cavity crosses ω₁₂.
    pub fn q_res(&self) -> T {
        let k = self.omega12 / self.photon_slope;
        (k * k - self.q_z0 * self.q_z0).max(T::zero()).sqrt()
    }

    /// ħω_c(q) = (ħc/n_eff)·sqrt(q_z0² + q²).
    pub fn cavity(&self, q: T) -> T {
        self.photon_slope * self.q_z0.hypot(q)
    }

    fn mix(&self, omega_c: T) -> (T, T, T) {
        // returns (ω_LP, ω_UP, |β_LP|²)
        let half = T::lit(0.5);
        let delta = omega_c - self.omega12;
        let coupling = T::lit(2.0) * self.rabi_half;
        let w = delta.hypot(coupling);
        let (minority, shift) = if w == T::zero() {
            (half, T::zero())
        } else {
            let s = w + delta.abs();
            (coupling * coupling / (T::lit(2.0) * w * s), coupling * coupling * half / s)
        };
        // level repulsion added to the upper bare level and removed from the lower
        let (low, high) = if delta > T::zero() { (self.omega12, omega_c) } else { (omega_c, self.omega12) };
        let beta_lp2 = if delta > T::zero() { T::one() - minority } else { minority };
        (low - shift, high + shift, beta_lp2)
    }

    /// Both polariton modes at `q`.
    pub fn diagonalize(&self, q: T) -> (PolaritonMode<T>, PolaritonMode<T>) {
        let (w_lp, w_up, beta_lp2) = self.mix(self.cavity(q));
        let s = beta_lp2.sqrt();
        let c = (T::one() - beta_lp2).sqrt();
        let lp = PolaritonMode { branch: Branch::Lower, q, energy: w_lp, alpha: c, beta: -s };
        let up = PolaritonMode { branch: Branch::Upper, q, energy: w_up, alpha: s, beta: c };
        (lp, up)
    }

    pub fn mode(&self, branch: Branch, q: T) -> PolaritonMode<T> {
        let (lp, up) = self.diagonalize(q);
        match branch {
            Branch::Lower => lp,
            Branch::Upper => up,
        }
    }

    pub fn energy(&self, branch: Branch, q: T) -> T {
        self.mode(branch, q).energy
    }

    pub fn matter_weight(&self, branch: Branch, q: T) -> T {
        self.mode(branch, q).matter_weight()
    }

    pub fn side(&self, q: T) -> ResonanceSide {
        let q_res = self.q_res();
        let aq = q.abs();
        let tol = T::lit(1e-12) * q_res.max(T::epsilon());
        if (aq - q_res).abs() <= tol {
            ResonanceSide::At
        } else if aq < q_res {
            ResonanceSide::Below
        } else {
            ResonanceSide::Above
        }
    }

    /// Non-negative wave vector where the branch carries matter weight `target`.
    ///
    /// The matter weight is monotone in `|q|` on each branch, so at most one
    /// solution exists; a `side` hint that disagrees with it is an error.
    pub fn find_q_for_hopfield(
        &self,
        branch: Branch,
        target: T,
        side: Option<ResonanceSide>,
    ) -> Result<HopfieldSolution<T>, PolaritonError> {
        let target_f = target.as_f64();
        if !(target > T::zero() && target < T::one()) {
            return Err(PolaritonError::TargetOutOfRange(target_f));
        }
        let g = |q: T| self.matter_weight(branch, q) - target;
        let g0 = g(T::zero());
        if g0 == T::zero() {
            return self.check_side(branch, target_f, T::zero(), side);
        }
        let start = self.q_res().max(self.q_z0);
        let hi = expand_bracket(g, T::zero(), start, 200).ok_or_else(|| PolaritonError::NoSolution {
            branch,
            target: target_f,
            detail: format!("(weight at q = 0 is {:.6})", (g0 + target).as_f64()),
        })?;
        let q = bisect(g, T::zero(), hi)?;
        self.check_side(branch, target_f, q, side)
    }

    fn check_side(
        &self,
        branch: Branch,
        target: f64,
        q: T,
        hint: Option<ResonanceSide>,
    ) -> Result<HopfieldSolution<T>, PolaritonError> {
        let side = self.side(q);
        match hint {
            Some(h) if h != side && side != ResonanceSide::At => Err(PolaritonError::NoSolution {
                branch,
                target,
                detail: format!("on the {h:?} side of q_res (the solution lies {side:?})"),
            }),
            _ => Ok(HopfieldSolution { q, side }),
        }
    }

    /// Signal magnitude |q| with ω_signal(|q|) = `energy`, if any.
    fn solve_energy(&self, branch: Branch, energy: T) -> Result<Option<T>, PolaritonError> {
        let g = |q: T| self.energy(branch, q) - energy;
        let g0 = g(T::zero());
        if g0 > T::zero() {
            return Ok(None);
        }
        if g0 == T::zero() {
            return Ok(Some(T::zero()));
        }
        let start = self.q_res().max(self.q_z0);
        match expand_bracket(g, T::zero(), start, 200) {
            Some(hi) => Ok(Some(bisect(g, T::zero(), hi)?)),
            None => Ok(None),
        }
    }

    pub fn geometry(&self, pump: PolaritonMode<T>, signal: PolaritonMode<T>, omega_lo: T) -> ScatteringGeometry<T> {
        ScatteringGeometry {
            pump,
            signal,
            momentum_transfer: (signal.q - pump.q).abs(),
            detuning: pump.energy - signal.energy - omega_lo,
        }
    }

    /// For every pump wave vector, the collinear signal modes (both signs)
    /// reached by emitting one LO phonon.
    pub fn find_phonon_resonant_pairs(
        &self,
        omega_lo: T,
        pump_branch: Branch,
        signal_branch: Branch,
        pump_grid: &[T],
    ) -> Result<PairScan<T>, PolaritonError> {
        let mut scan = PairScan { pairs: Vec::new(), forbidden: Vec::new() };
        for &qp in pump_grid {
            let pump = self.mode(pump_branch, qp);
            match self.solve_energy(signal_branch, pump.energy - omega_lo)? {
                None => scan.forbidden.push(qp),
                Some(qa) => {
                    let sign = if qp < T::zero() { -T::one() } else { T::one() };
                    let near = self.mode(signal_branch, sign * qa);
                    scan.pairs.push(self.geometry(pump, near, omega_lo));
                    if qa > T::zero() {
                        let far = self.mode(signal_branch, -sign * qa);
                        scan.pairs.push(self.geometry(pump, far, omega_lo));
                    }
                }
            }
        }
        if scan.pairs.is_empty() {
            return Err(PolaritonError::Forbidden);
        }
        Ok(scan)
    }
}

/// The default pump/signal pair: UP pump at the configured Hopfield weight,
/// LP signal one LO phonon below it on the same side of the cut.
pub fn default_geometry<T: Real>(config: &DeviceConfig) -> Result<ScatteringGeometry<T>, PolaritonError> {
    let disp = Dispersion::<T>::from_config(config);
    let target = T::lit(config.hopfield_target());
    let pump_q = disp.find_q_for_hopfield(Branch::Upper, target, None)?.q;
    let scan = disp.find_phonon_resonant_pairs(T::lit(config.omega_lo), Branch::Upper, Branch::Lower, &[pump_q])?;
    Ok(scan.pairs[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resonant(omega_c: f64, rabi_half: f64) -> Dispersion<f64> {
        // q_z0 chosen so that ω_c(0) = omega_c
        Dispersion { omega12: 150.0, rabi_half, photon_slope: 1.0e5, q_z0: omega_c / 1.0e5 }
    }

    /// Jacobi rotation eigen-solver for a symmetric 2×2 matrix.
    fn jacobi_2x2(a: f64, b: f64, d: f64) -> (f64, f64, [f64; 2]) {
        let theta = 0.5 * (2.0 * b).atan2(a - d);
        let (s, c) = theta.sin_cos();
        let l1 = c * c * a + 2.0 * s * c * b + s * s * d;
        let l2 = s * s * a - 2.0 * s * c * b + c * c * d;
        if l1 < l2 {
            (l1, l2, [c, s])
        } else {
            (l2, l1, [-s, c])
        }
    }

    #[test]
    fn resonance_gives_equal_mixing() {
        let d = resonant(150.0, 7.0);
        let (lp, up) = d.diagonalize(0.0);
        assert!((lp.energy - 143.0).abs() < 1e-12);
        assert!((up.energy - 157.0).abs() < 1e-12);
        for m in [lp, up] {
            assert!((m.photon_weight() - 0.5).abs() < 1e-14);
            assert!((m.matter_weight() - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn decoupled_limit() {
        let d = resonant(140.0, 0.0);
        let (lp, up) = d.diagonalize(0.0);
        assert_eq!(lp.alpha, 1.0);
        assert_eq!(lp.beta.abs(), 0.0);
        assert_eq!(up.beta, 1.0);
        assert_eq!(lp.energy, 140.0);
        assert_eq!(up.energy, 150.0);
    }

    #[test]
    fn detuned_matches_generic_eigensolver() {
        let d = resonant(164.0, 7.0);
        let (lp, up) = d.diagonalize(0.0);
        let root2 = 2f64.sqrt();
        assert!((lp.energy - (157.0 - 7.0 * root2)).abs() < 1e-12);
        assert!((up.energy - (157.0 + 7.0 * root2)).abs() < 1e-12);
        let (l1, l2, v) = jacobi_2x2(164.0, 7.0, 150.0);
        assert!((l1 - lp.energy).abs() < 1e-11 && (l2 - up.energy).abs() < 1e-11);
        assert!((v[1] * v[1] - lp.matter_weight()).abs() < 1e-12);
        // |β_LP|² = cos²θ with tan 2θ = 2Ω_R/(ω_c − ω₁₂)
        let theta = 0.5 * (14.0f64 / 14.0).atan();
        assert!((theta.cos().powi(2) - lp.matter_weight()).abs() < 1e-12);
    }

    #[test]
    fn sign_convention() {
        let d = Dispersion::<f64>::from_config(&DeviceConfig::gaas());
        for i in 0..50 {
            let (lp, up) = d.diagonalize(i as f64 * 1e-4);
            assert!(lp.alpha > 0.0 && up.beta > 0.0 && lp.beta <= 0.0 && up.alpha >= 0.0);
        }
    }

    #[test]
    fn cavity_calibration() {
        let d = Dispersion::<f64>::from_config(&DeviceConfig::gaas());
        let qr = d.q_res();
        assert!((d.cavity(qr) - 150.0).abs() < 1e-10);
        assert!((d.cavity(0.0) - d.photon_slope * d.q_z0).abs() < 1e-12);
        assert!(d.cavity(2.0 * qr) > d.cavity(qr));
    }

    #[test]
    fn hopfield_half_is_resonance() {
        let d = Dispersion::<f64>::from_config(&DeviceConfig::gaas());
        for b in [Branch::Lower, Branch::Upper] {
            let s = d.find_q_for_hopfield(b, 0.5, None).unwrap();
            assert!(((s.q - d.q_res()) / d.q_res()).abs() < 1e-9, "{b:?}");
        }
    }

    #[test]
    fn hopfield_quarter_matches_closed_form() {
        let cfg = DeviceConfig::gaas();
        let d = Dispersion::<f64>::from_config(&cfg);
        let s = d.find_q_for_hopfield(Branch::Lower, 0.25, Some(ResonanceSide::Below)).unwrap();
        assert_eq!(s.side, ResonanceSide::Below);
        // closed form: 2w − 1 = Δ/W  ⇒  Δ = 2Ω x / sqrt(1 − x²)
        let x: f64 = 2.0 * 0.25 - 1.0;
        let delta = 2.0 * d.rabi_half * x / (1.0 - x * x).sqrt();
        let k = (150.0 + delta) / d.photon_slope;
        let q = (k * k - d.q_z0 * d.q_z0).sqrt();
        assert!(((s.q - q) / q).abs() < 1e-9);
        assert!((d.matter_weight(Branch::Lower, s.q) - 0.25).abs() < 1e-10);
        // photon-like LP lives below resonance only
        assert!(matches!(
            d.find_q_for_hopfield(Branch::Lower, 0.25, Some(ResonanceSide::Above)),
            Err(PolaritonError::NoSolution { .. })
        ));
    }

    #[test]
    fn hopfield_target_bounds() {
        let d = Dispersion::<f64>::from_config(&DeviceConfig::gaas());
        assert!(matches!(d.find_q_for_hopfield(Branch::Upper, 1.0, None), Err(PolaritonError::TargetOutOfRange(_))));
        assert!(matches!(d.find_q_for_hopfield(Branch::Upper, 0.0, None), Err(PolaritonError::TargetOutOfRange(_))));
        // LP at q = 0 is already more matter-like than 1e-6
        assert!(matches!(d.find_q_for_hopfield(Branch::Lower, 1e-6, None), Err(PolaritonError::NoSolution { .. })));
    }

    #[test]
    fn resonant_pairs_for_gaas() {
        let mut cfg = DeviceConfig::gaas();
        cfg.rabi_splitting = 14.0;
        let d = Dispersion::<f64>::from_config(&cfg);
        let qp = d.find_q_for_hopfield(Branch::Upper, 0.5, None).unwrap().q;
        let scan = d.find_phonon_resonant_pairs(36.0, Branch::Upper, Branch::Lower, &[qp]).unwrap();
        assert_eq!(scan.pairs.len(), 2);
        for g in &scan.pairs {
            assert!(g.detuning.abs() < 1e-8 * 36.0);
            assert!((g.pump.energy - g.signal.energy - 36.0).abs() < 1e-8 * 36.0);
        }
        assert!(scan.pairs[0].momentum_transfer < scan.pairs[1].momentum_transfer);
    }

    #[test]
    fn large_phonon_energy_is_forbidden() {
        let d = Dispersion::<f64>::from_config(&DeviceConfig::gaas());
        let grid: Vec<f64> = (0..20).map(|i| i as f64 * 1e-4).collect();
        let top = grid.iter().map(|&q| d.energy(Branch::Upper, q)).fold(0.0, f64::max);
        let bottom = d.energy(Branch::Lower, 0.0);
        let r = d.find_phonon_resonant_pairs(top - bottom + 1.0, Branch::Upper, Branch::Lower, &grid);
        assert_eq!(r, Err(PolaritonError::Forbidden));
    }

    #[test]
    fn default_geometry_has_quarter_weights() {
        let g = default_geometry::<f64>(&DeviceConfig::gaas()).unwrap();
        assert!((g.pump.matter_weight() - 0.25).abs() < 1e-10);
        assert!((g.signal.matter_weight() - 0.25).abs() < 2e-3);
        assert!(g.detuning.abs() < 1e-8 * 36.0);
        assert!(g.pump.q > 0.0 && g.signal.q > 0.0);
    }
}
