//! Internal unit system: energies in meV, times in ps, lengths in nm.
//!
//! Areal densities are carried in nm⁻² and intensities in meV·ps⁻¹·nm⁻²;
//! cm⁻² and W/cm² only appear at I/O boundaries.

use crate::scalar::Real;

/// ħ in meV·ps.
pub const HBAR: f64 = 0.658_211_956_947_236;
/// ħc in meV·nm.
pub const HBAR_C: f64 = 197_326.980_4;
/// e²/(4πε₀) in meV·nm.
pub const COULOMB: f64 = 1_439.964_547_8;
/// ħ²/(2mₑ) in meV·nm².
pub const HBAR2_OVER_2ME: f64 = 38.099_821_2;
/// One meV in joules.
pub const MEV_IN_JOULE: f64 = 1.602_176_634e-22;

const NM2_PER_CM2: f64 = 1.0e14;
const PS_PER_S: f64 = 1.0e12;

/// cm⁻² → nm⁻².
pub fn density_from_cm2<T: Real>(x: T) -> T {
    x / T::lit(NM2_PER_CM2)
}

/// nm⁻² → cm⁻².
pub fn density_to_cm2<T: Real>(x: T) -> T {
    x * T::lit(NM2_PER_CM2)
}

fn intensity_factor() -> f64 {
    // W/cm² = J s⁻¹ cm⁻² → meV ps⁻¹ nm⁻²
    1.0 / (MEV_IN_JOULE * PS_PER_S * NM2_PER_CM2)
}

/// W/cm² → meV·ps⁻¹·nm⁻².
pub fn intensity_from_w_cm2<T: Real>(x: T) -> T {
    x * T::lit(intensity_factor())
}

/// meV·ps⁻¹·nm⁻² → W/cm².
pub fn intensity_to_w_cm2<T: Real>(x: T) -> T {
    x / T::lit(intensity_factor())
}

/// Width of an infinite-barrier well whose 1→2 level spacing is `omega12`.
///
/// Inverts E₂ − E₁ = 3ħ²π²/(2m*L²). `effective_mass` is in units of mₑ.
pub fn derive_well_width<T: Real>(omega12: T, effective_mass: T) -> T {
    assert!(omega12 > T::zero(), "omega12 must be positive");
    assert!(effective_mass > T::zero(), "effective mass must be positive");
    let three = T::lit(3.0);
    T::PI() * (three * T::lit(HBAR2_OVER_2ME) / (effective_mass * omega12)).sqrt()
}

/// Level spacing E₂ − E₁ of an infinite well of width `width` (nm).
pub fn infinite_well_spacing<T: Real>(width: T, effective_mass: T) -> T {
    let pi2 = T::PI() * T::PI();
    T::lit(3.0) * T::lit(HBAR2_OVER_2ME) * pi2 / (effective_mass * width * width)
}

/// k_F = sqrt(4π n_s / g_s), with `n_s` in nm⁻².
pub fn fermi_wavevector<T: Real>(n_s: T, spin_degeneracy: u32) -> T {
    assert!(n_s > T::zero(), "density must be positive");
    let g = T::from_u32(spin_degeneracy.max(1)).unwrap();
    (T::lit(4.0) * T::PI() * n_s / g).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    /// Plain bisection on the level-spacing equation; independent of the closed form.
    fn well_width_by_bisection(omega12: f64, mass: f64) -> f64 {
        let spacing = |l: f64| 3.0 * HBAR2_OVER_2ME * std::f64::consts::PI.powi(2) / (mass * l * l);
        let (mut lo, mut hi) = (0.1, 1000.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if spacing(mid) > omega12 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn gaas_well_width() {
        let l = derive_well_width(150.0, 0.067);
        assert!(rel(l, well_width_by_bisection(150.0, 0.067)) < 1e-10);
        // hand evaluation: π·sqrt(3·38.0998/(0.067·150)) nm
        assert!((l - 10.59).abs() < 0.01, "{l}");
        assert!(rel(infinite_well_spacing(l, 0.067), 150.0) < 1e-10);
    }

    #[test]
    fn well_width_scaling() {
        let l = derive_well_width(150.0, 0.067);
        assert!(rel(derive_well_width(600.0, 0.067), 0.5 * l) < 1e-12);
        assert!(rel(derive_well_width(150.0, 0.268), 0.5 * l) < 1e-12);
    }

    #[test]
    fn fermi_wavevector_values() {
        let ns = density_from_cm2(1.0e12);
        let kf = fermi_wavevector(ns, 2);
        assert!(rel(kf, (2.0 * std::f64::consts::PI * 0.01).sqrt()) < 1e-12);
        assert!((kf - 0.2507).abs() < 1e-3);
        assert!(rel(fermi_wavevector(ns, 1), 2f64.sqrt() * kf) < 1e-12);
        assert!(rel(fermi_wavevector(4.0 * ns, 2), 2.0 * kf) < 1e-12);
    }

    #[test]
    fn boundary_conversions_round_trip() {
        for &x in &[1.0e-3, 1.0, 3.5e4, 1.1e11, 1.0e12] {
            assert!(rel(density_to_cm2(density_from_cm2(x)), x) < 1e-12);
            assert!(rel(intensity_to_w_cm2(intensity_from_w_cm2(x)), x) < 1e-12);
        }
        // 1 W/cm² = 6.2415e-5 meV ps⁻¹ nm⁻²
        assert!(rel(intensity_from_w_cm2(1.0), 6.241_509_074e-5) < 1e-9);
    }
}
