use std::f64::consts::{PI, SQRT_2};

use errorfunctions::ComplexErrorFunctions;
use num_complex::Complex64;

use super::DopplerModel;
use crate::atomic::{LambdaSystem, VaporState};
use crate::constants::PhysicalConstants;
use crate::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Relative floor on the squared susceptibility denominator.
const DEGENERACY_FLOOR: f64 = 1e-28;

/// Susceptibility of stationary atoms with equal one- and two-photon
/// detuning, written out in real and imaginary parts:
///
/// ```text
/// chi = P [ 4D (W^2 - 4D^2 - gd^2) + i (8 D^2 g31 + 2 gd (W^2 + g31 gd)) ]
///         / |W^2 + (g31 + 2iD)(gd + 2iD)|^2
/// ```
///
/// with `P = |mu31|^2 rho / (eps0 hbar)` and `D = 2 pi delta_hz`.
pub fn susceptibility(
    delta_hz: f64,
    omega_c: f64,
    system: &LambdaSystem,
    vapor: &VaporState,
    k: &PhysicalConstants,
) -> Result<Complex64> {
    if !(omega_c >= 0.0) {
        return Err(Error::domain("omega_c", omega_c, ">= 0 rad/s"));
    }
    let p = system.prefactor(vapor.effective_density(), k);
    let d = 2.0 * PI * delta_hz;
    let (g31, gd) = (system.gamma31, system.gamma_d);
    let w2 = omega_c * omega_c;
    let den = (Complex64::new(w2, 0.0) + Complex64::new(g31, 2.0 * d) * Complex64::new(gd, 2.0 * d))
        .norm_sqr();
    let scale = w2 + g31 * g31 + 4.0 * d * d;
    if !(den > DEGENERACY_FLOOR * scale * scale) {
        return Err(Error::Degenerate { delta_hz });
    }
    let re = 4.0 * d * (w2 - 4.0 * d * d - gd * gd) / den;
    let im = (8.0 * d * d * g31 + 2.0 * gd * (w2 + g31 * gd)) / den;
    Ok(Complex64::new(p * re, p * im))
}

/// Precomputed lambda-system response for one medium.
///
/// Evaluates the susceptibility with separate one-photon and two-photon
/// detunings and its exact Maxwell-Boltzmann average. The susceptibility is a
/// rational function of the one-photon detuning, so the average over a
/// Gaussian Doppler shift reduces to Faddeeva functions at its poles.
#[derive(Debug, Clone, Copy)]
pub struct LambdaResponse {
    /// `|mu31|^2 rho / (eps0 hbar)` (rad/s).
    pub prefactor: f64,
    pub gamma31: f64,
    pub gamma_d: f64,
    /// Angular Doppler standard deviation `2 pi nu0 sigma_v / c0` (rad/s).
    pub doppler_sigma: f64,
}

impl LambdaResponse {
    pub fn new(system: &LambdaSystem, vapor: &VaporState, k: &PhysicalConstants) -> Self {
        Self {
            prefactor: system.prefactor(vapor.effective_density(), k),
            gamma31: system.gamma31,
            gamma_d: system.gamma_d,
            doppler_sigma: 2.0 * PI * vapor.doppler_sigma_hz(system, k),
        }
    }

    /// Stationary-atom susceptibility with one-photon detuning `one` and
    /// two-photon detuning `two` (both rad/s):
    /// `chi = 2i P a / (W^2 + (g31 - 2i one) a)`, `a = gd - 2i two`.
    pub fn chi(&self, one: f64, two: f64, omega_c: f64) -> Complex64 {
        let a = Complex64::new(self.gamma_d, -2.0 * two);
        let w2 = omega_c * omega_c;
        if w2 == 0.0 {
            return 2.0 * I * self.prefactor / Complex64::new(self.gamma31, -2.0 * one);
        }
        let den = w2 + Complex64::new(self.gamma31, -2.0 * one) * a;
        2.0 * I * self.prefactor * a / den
    }

    /// Doppler-averaged susceptibility at signal detuning `delta` (rad/s).
    pub fn doppler_averaged(&self, delta: f64, omega_c: f64, model: DopplerModel) -> Complex64 {
        if self.prefactor == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if self.doppler_sigma == 0.0 {
            return self.chi(delta, delta, omega_c);
        }
        match model {
            DopplerModel::CoPropagating => self.averaged_co_propagating(delta, omega_c),
            DopplerModel::FullShift => self.averaged_full_shift(delta, omega_c),
        }
    }

    /// `E_u[1 / (x - u - pole)]` for `u ~ N(0, sigma^2)` and `Im pole < 0`.
    fn mean_inverse(&self, x: f64, pole: Complex64) -> Complex64 {
        let s = SQRT_2 * self.doppler_sigma;
        let z = (x - pole) / s;
        -I * PI.sqrt() * z.w() / s
    }

    /// `E_u[1 / (x - u - pole)^2]`.
    fn mean_inverse_sq(&self, x: f64, pole: Complex64) -> Complex64 {
        let s = SQRT_2 * self.doppler_sigma;
        let z = (x - pole) / s;
        let dw = -2.0 * z * z.w() + 2.0 * I / PI.sqrt();
        I * PI.sqrt() * dw / (s * s)
    }

    fn averaged_co_propagating(&self, delta: f64, omega_c: f64) -> Complex64 {
        let a = Complex64::new(self.gamma_d, -2.0 * delta);
        let w2 = omega_c * omega_c;
        if w2 > 0.0 && a.norm() == 0.0 {
            // Exact two-photon resonance without ground-state dephasing.
            return Complex64::new(0.0, 0.0);
        }
        // chi = -P / (one - pole), pole = (W^2 + g31 a) / (2 i a)
        let pole = if w2 == 0.0 {
            Complex64::new(0.0, -0.5 * self.gamma31)
        } else {
            (w2 + self.gamma31 * a) / (2.0 * I * a)
        };
        -self.prefactor * self.mean_inverse(delta, pole)
    }

    fn averaged_full_shift(&self, delta: f64, omega_c: f64) -> Complex64 {
        let (g31, gd) = (self.gamma31, self.gamma_d);
        let w2 = omega_c * omega_c;
        if w2 == 0.0 {
            let pole = Complex64::new(0.0, -0.5 * g31);
            return -self.prefactor * self.mean_inverse(delta, pole);
        }
        // W^2 + (g31 - 2iD)(gd - 2iD) = -4 (D - p1)(D - p2)
        let sum = g31 + gd;
        let disc = Complex64::new(4.0 * w2 - (g31 - gd) * (g31 - gd), 0.0).sqrt();
        let p1 = (disc - I * sum) / 4.0;
        let p2 = (-disc - I * sum) / 4.0;
        let p = self.prefactor;
        if (p1 - p2).norm() < 1e-7 * (sum + omega_c) {
            // Double pole: chi = -P/(D-q) - P (q + i gd/2) / (D-q)^2
            let q = 0.5 * (p1 + p2);
            return -p * self.mean_inverse(delta, q)
                - p * (q + 0.5 * I * gd) * self.mean_inverse_sq(delta, q);
        }
        // chi = P (4D + 2i gd) / (-4 (D - p1)(D - p2)) = sum_k R_k / (D - p_k)
        let r1 = p * (4.0 * p1 + 2.0 * I * gd) / (-4.0 * (p1 - p2));
        let r2 = p * (4.0 * p2 + 2.0 * I * gd) / (-4.0 * (p2 - p1));
        r1 * self.mean_inverse(delta, p1) + r2 * self.mean_inverse(delta, p2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(scale: f64) -> (LambdaSystem, VaporState, PhysicalConstants) {
        let k = PhysicalConstants::default();
        let v = VaporState::at_temperature(347.15, scale, &k).unwrap();
        (LambdaSystem::default(), v, k)
    }

    /// Two-level absorption written independently: Lorentzian of angular
    /// FWHM gamma31 with area pi P.
    fn two_level_im(delta_hz: f64, p: f64, g31: f64) -> f64 {
        let d = 2.0 * PI * delta_hz;
        2.0 * p * g31 / (g31 * g31 + 4.0 * d * d)
    }

    /// Brute-force Maxwell-Boltzmann average on a dense trapezoid grid.
    fn brute_average(f: impl Fn(f64) -> Complex64, sigma: f64, step: f64) -> Complex64 {
        let half = 9.0 * sigma;
        let n = (2.0 * half / step).ceil() as usize;
        let h = 2.0 * half / n as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..=n {
            let u = -half + i as f64 * h;
            let g = (-0.5 * u * u / (sigma * sigma)).exp() / (2.0 * PI).sqrt() / sigma;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += w * h * g * f(u);
        }
        acc
    }

    #[test]
    fn perfect_transparency_at_resonance_without_dephasing() {
        let (mut s, v, k) = setup(1.0);
        s.gamma_d = 0.0;
        let chi = susceptibility(0.0, 2.0 * PI * 100e6, &s, &v, &k).unwrap();
        assert_eq!(chi, Complex64::new(0.0, 0.0));
        let r = LambdaResponse::new(&s, &v, &k);
        assert_eq!(
            r.doppler_averaged(0.0, 2.0 * PI * 100e6, DopplerModel::CoPropagating),
            Complex64::new(0.0, 0.0)
        );
    }

    #[test]
    fn two_level_limit_matches_lorentzian() {
        let (mut s, v, k) = setup(1.0);
        s.gamma_d = 1e-9;
        let p = s.prefactor(v.effective_density(), &k);
        for delta in [-3e7, -1.2e6, -1e3, 5e5, 2.2e6, 1e8] {
            let chi = susceptibility(delta, 0.0, &s, &v, &k).unwrap();
            let oracle = two_level_im(delta, p, s.gamma31);
            assert!(((chi.im - oracle) / oracle).abs() < 1e-10, "{delta}");
        }
    }

    #[test]
    fn absorption_symmetric_without_control() {
        let (mut s, v, k) = setup(1.0);
        s.gamma_d = 0.0;
        for delta in [1e5, 3e6, 4e7] {
            let a = susceptibility(delta, 0.0, &s, &v, &k).unwrap();
            let b = susceptibility(-delta, 0.0, &s, &v, &k).unwrap();
            assert!((a.im - b.im).abs() <= 1e-15 * a.im.abs());
        }
    }

    #[test]
    fn degenerate_denominator_is_reported() {
        let (mut s, v, k) = setup(1.0);
        s.gamma_d = 0.0;
        assert!(matches!(
            susceptibility(0.0, 0.0, &s, &v, &k),
            Err(Error::Degenerate { .. })
        ));
    }

    #[test]
    fn general_form_reduces_to_equal_detuning_form() {
        let (s, v, k) = setup(0.3);
        let r = LambdaResponse::new(&s, &v, &k);
        for (delta, om) in [(0.0, 1e9), (1e6, 2e8), (-7e7, 1.4e9), (3e8, 0.0)] {
            let a = susceptibility(delta, om, &s, &v, &k).unwrap();
            let d = 2.0 * PI * delta;
            let b = r.chi(d, d, om);
            assert!((a - b).norm() <= 1e-12 * a.norm().max(1e-30), "{delta} {om}: {a} {b}");
        }
    }

    #[test]
    fn imaginary_part_non_negative() {
        let (s, v, k) = setup(1.0);
        for i in 0..200 {
            let delta = -2e9 + 2e7 * i as f64;
            for om in [0.0, 1e8, 1.5e9] {
                let chi = susceptibility(delta, om, &s, &v, &k).unwrap();
                assert!(chi.im >= 0.0);
            }
        }
    }

    #[test]
    fn exact_average_matches_brute_force() {
        let (s, v, k) = setup(0.2);
        let r = LambdaResponse::new(&s, &v, &k);
        let sigma = r.doppler_sigma;
        for &(delta_hz, om) in &[(0.0, 0.0), (5e7, 0.0), (0.0, 2.0 * PI * 116e6), (3e7, 2.0 * PI * 232e6), (-9e7, 2.0 * PI * 60e6)] {
            let d = 2.0 * PI * delta_hz;
            let exact_cp = r.doppler_averaged(d, om, DopplerModel::CoPropagating);
            let brute_cp = brute_average(|u| r.chi(d - u, d, om), sigma, 2.0 * PI * 0.02e6);
            assert!(
                (exact_cp - brute_cp).norm() < 1e-6 * brute_cp.norm().max(1e-6 * r.prefactor / sigma),
                "cp {delta_hz}: {exact_cp} vs {brute_cp}"
            );
            let exact_fs = r.doppler_averaged(d, om, DopplerModel::FullShift);
            let brute_fs = brute_average(|u| r.chi(d - u, d - u, om), sigma, 2.0 * PI * 0.02e6);
            assert!(
                (exact_fs - brute_fs).norm() < 1e-6 * brute_fs.norm(),
                "fs {delta_hz}: {exact_fs} vs {brute_fs}"
            );
        }
    }

    #[test]
    fn full_shift_double_pole_is_continuous() {
        let (s, v, k) = setup(0.2);
        let r = LambdaResponse::new(&s, &v, &k);
        let critical = 0.5 * (s.gamma31 - s.gamma_d);
        let d = 2.0 * PI * 1e6;
        let at = r.doppler_averaged(d, critical, DopplerModel::FullShift);
        let near = r.doppler_averaged(d, critical * (1.0 + 1e-4), DopplerModel::FullShift);
        assert!((at - near).norm() < 1e-3 * at.norm(), "{at} vs {near}");
    }
}
