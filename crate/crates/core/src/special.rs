//! Scalar special functions shared by the analytic formulas: the decay
//! kernel `phi`, the chiral transmission coefficient, the error function of
//! a complex argument, the Gaussian time integral, and the iterated kernel
//! polynomials `K_j`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Largest `|z|` accepted by [`erf`]. All formulas in this crate stay well
/// inside; beyond it the scaled-complement evaluation would need extra care.
pub const ERF_SAFE_RANGE: f64 = 8.0;

/// Detuning/decay pair entering the kernel `phi(t) = e^{i delta t} e^{-gamma_eff t} - 1`.
///
/// `gamma_eff` is the full linewidth for plane waves and `gamma - v_g kappa`
/// for Lorentzian packets. `gamma_eff < 0` is accepted (broadband packets);
/// the kernel then grows with `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiKernel {
    pub delta: f64,
    pub gamma_eff: f64,
}

impl PhiKernel {
    pub fn new(delta: f64, gamma_eff: f64) -> Self {
        Self { delta, gamma_eff }
    }

    /// `phi(t) = e^{(i delta - gamma_eff) t} - 1`, exact zero at `t = 0`.
    #[inline]
    pub fn phi(&self, t: f64) -> C64 {
        phi(self, t)
    }

    /// Transmission coefficient paired with this kernel.
    pub fn transmission(&self) -> Result<C64> {
        transmission(self.delta, self.gamma_eff)
    }
}

/// Kernel `phi(t)`. Evaluated in expm1 form so that the `O(t)` behaviour
/// near `t = 0` survives cancellation.
#[inline]
pub fn phi(kernel: &PhiKernel, t: f64) -> C64 {
    let a = -kernel.gamma_eff * t;
    let b = kernel.delta * t;
    // e^{a+ib} - 1 = expm1(a) cos b - 2 sin^2(b/2) + i e^a sin b
    let half = (0.5 * b).sin();
    C64::new(a.exp_m1() * b.cos() - 2.0 * half * half, a.exp() * b.sin())
}

/// Single-photon chiral transmission coefficient
/// `t_k = (delta - i gamma_eff) / (delta + i gamma_eff)`; unimodular for real
/// arguments.
pub fn transmission(delta: f64, gamma_eff: f64) -> Result<C64> {
    if delta == 0.0 && gamma_eff == 0.0 {
        return Err(Error::DegenerateCoefficient);
    }
    Ok(C64::new(delta, -gamma_eff) / C64::new(delta, gamma_eff))
}

// ---------------------------------------------------------------------------
// Complex error function
// ---------------------------------------------------------------------------

const WEIDEMAN_N: usize = 64;

/// Rational-series coefficients `a_1 .. a_N` for the Faddeeva function
/// (Weideman, SIAM J. Numer. Anal. 31, 1994). Computed once by a direct
/// cosine transform of the sampled weight; N = 64 gives ~1e-14 on the
/// closed upper half-plane.
fn weideman_coeffs() -> &'static (f64, Vec<f64>) {
    static COEFFS: OnceLock<(f64, Vec<f64>)> = OnceLock::new();
    COEFFS.get_or_init(|| {
        let n = WEIDEMAN_N;
        let m = 2 * n as i64;
        let big_l = (n as f64 / std::f64::consts::SQRT_2).sqrt();
        // Sample f(theta) = (L^2 + t^2) e^{-t^2}, t = L tan(theta/2), on
        // theta_k = k pi / M, k = -M+1 .. M-1 (f vanishes at theta = -pi),
        // and take a_j = (1/2M) sum_k f(theta_k) cos(j theta_k).
        let mut a = vec![0.0_f64; n];
        for (j, aj) in a.iter_mut().enumerate() {
            let freq = (j + 1) as f64;
            let mut acc = 0.0;
            for k in (-m + 1)..m {
                let theta = k as f64 * PI / m as f64;
                let t = big_l * (0.5 * theta).tan();
                let f = (big_l * big_l + t * t) * (-t * t).exp();
                acc += f * (freq * theta).cos();
            }
            *aj = acc / (2.0 * m as f64);
        }
        (big_l, a)
    })
}

/// Faddeeva function `w(z) = e^{-z^2} erfc(-iz)` for `Im z >= 0`:
/// `w = 2 P(Z) / (L - iz)^2 + (1/sqrt(pi)) / (L - iz)` with
/// `Z = (L + iz)/(L - iz)` and `P(Z) = sum_{n=1}^{N} a_n Z^{n-1}`.
pub fn faddeeva_upper(z: C64) -> C64 {
    debug_assert!(z.im >= -1e-300);
    let (big_l, a) = weideman_coeffs();
    let l = C64::new(*big_l, 0.0);
    let iz = C64::new(-z.im, z.re);
    let denom = l - iz;
    let zz = (l + iz) / denom;
    let mut p = C64::new(0.0, 0.0);
    for &ak in a.iter().rev() {
        p = p * zz + ak;
    }
    p * 2.0 / (denom * denom) + C64::new(1.0 / PI.sqrt(), 0.0) / denom
}

fn erf_series(z: C64) -> C64 {
    // Maclaurin series; used only for |z| <= 3 where cancellation stays
    // below ~1e-13.
    let z2 = z * z;
    let mut term = z;
    let mut sum = z;
    for n in 1..=96 {
        term *= -z2 / n as f64;
        let add = term / (2 * n + 1) as f64;
        sum += add;
        if add.norm() < 1e-18 * sum.norm().max(1e-300) {
            break;
        }
    }
    sum * 2.0 / PI.sqrt()
}

/// Error function of a complex argument.
///
/// Series for `|z| <= 3`, Faddeeva complement `erf(z) = 1 - e^{-z^2} w(iz)`
/// beyond; the two branches agree to ~1e-13 at the seam. Arguments outside
/// [`ERF_SAFE_RANGE`] are rejected.
pub fn erf(z: C64) -> Result<C64> {
    let r = z.norm();
    if !r.is_finite() || r > ERF_SAFE_RANGE {
        return Err(Error::RangeExceeded(r, ERF_SAFE_RANGE));
    }
    if r <= 3.0 {
        return Ok(erf_series(z));
    }
    // Reflect to Re z >= 0 so that iz lies in the upper half-plane.
    let (zr, sign) = if z.re < 0.0 { (-z, -1.0) } else { (z, 1.0) };
    let w = faddeeva_upper(C64::new(-zr.im, zr.re));
    let e = (-zr * zr).exp();
    Ok((C64::new(1.0, 0.0) - e * w) * sign)
}

// ---------------------------------------------------------------------------
// Gaussian time integral
// ---------------------------------------------------------------------------

/// Closed form of `I(T) = \int_0^T e^{-a tau^2} e^{i (delta + i gamma - i q) tau} dtau`
/// with `a = v_g^2 / (2 d^2)` and drift `q = v_g^2 t_ret / d^2`, i.e. the
/// building block of the Gaussian-packet amplitude. `t_ret` is the retarded
/// time attached to the chain step being integrated.
///
/// Uses `erf` on the shifted argument; endpoint terms are evaluated in the
/// scaled-complement form when the plain difference would cancel.
pub fn gaussian_time_integral(
    t_ret: f64,
    upper: f64,
    delta: f64,
    gamma: f64,
    v_g: f64,
    d: f64,
) -> Result<C64> {
    if d <= 0.0 {
        return Err(Error::NonPositiveRate("d"));
    }
    if upper == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    let a = v_g * v_g / (2.0 * d * d);
    // b from e^{-a tau^2 - b tau}: b = -i(delta + i gamma) - v_g^2 t_ret / d^2.
    let b = C64::new(gamma - v_g * v_g * t_ret / (d * d), -delta);
    // Peak exponent of |integrand| over [0, upper]; beyond ~e^690 the
    // integral cannot be represented.
    let exponent = |tau: f64| -a * tau * tau - b.re * tau;
    let tau_star = (-b.re / (2.0 * a)).clamp(0.0, upper);
    let peak = exponent(upper).max(exponent(tau_star));
    if peak > 690.0 {
        return Err(Error::RangeExceeded(peak, 690.0));
    }
    let sa = a.sqrt();
    let prefac = 0.5 * (PI / a).sqrt();
    // I = prefac e^{b^2/4a} [erf(z(T)) - erf(z(0))], z(tau) = sa tau + b/(2 sa),
    // with b^2/4a = z(0)^2 and b^2/4a - z(tau)^2 = -a tau^2 - b tau.
    let z0 = b / (2.0 * sa);
    let z1 = sa * upper + z0;
    // Scaled complement e^{b^2/4a} e^{-z^2} w(+-iz) = e^{-a tau^2 - b tau} w(+-iz),
    // free of the overflowing prefactor.
    let scaled = |tau: f64, z: C64, positive_side: bool| -> C64 {
        let tail = (C64::new(-a * tau * tau, 0.0) - b * tau).exp();
        if positive_side {
            tail * faddeeva_upper(C64::new(-z.im, z.re))
        } else {
            tail * faddeeva_upper(C64::new(z.im, -z.re))
        }
    };
    // Re z1 >= Re z0 always (sa upper >= 0).
    let value = if z0.re > 4.0 {
        // both endpoints deep on the positive side: erf = 1 - complement and
        // the leading terms cancel exactly
        prefac * (scaled(0.0, z0, true) - scaled(upper, z1, true))
    } else if z1.re < -4.0 {
        prefac * (scaled(upper, z1, false) - scaled(0.0, z0, false))
    } else {
        // at least one endpoint in the central band: e^{b^2/4a} = e^{z0^2}
        // with |Re z0| <= 4 on that side, so the prefactor is tame
        let e_arg = (b * b / (4.0 * a)).exp();
        let endpoint = |tau: f64, z: C64| -> Result<C64> {
            if z.re > 4.0 {
                Ok(e_arg - scaled(tau, z, true))
            } else if z.re < -4.0 {
                Ok(-e_arg + scaled(tau, z, false))
            } else {
                Ok(e_arg * erf(z)?)
            }
        };
        prefac * (endpoint(upper, z1)? - endpoint(0.0, z0)?)
    };
    Ok(value)
}

// ---------------------------------------------------------------------------
// Iterated kernel polynomials
// ---------------------------------------------------------------------------

/// `K_j(x) = x^{2j+1} / (2j+1)!`, the closed form of the nested integral
/// `K_j(x) = \int_0^x (x - x') K_{j-1}(x') dx'` with `K_0(x) = x`.
pub fn k_cal(j: u32, x: f64) -> f64 {
    let mut v = x;
    for m in 1..=j {
        v *= x * x / ((2 * m) as f64 * (2 * m + 1) as f64);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_complex;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn phi_vanishes_at_zero() {
        let k = PhiKernel::new(1.7, 0.4);
        assert_eq!(phi(&k, 0.0), c(0.0, 0.0));
    }

    #[test]
    fn phi_known_values() {
        let k = PhiKernel::new(0.0, 1.0);
        let v = phi(&k, std::f64::consts::LN_2);
        assert!((v - c(-0.5, 0.0)).norm() < 1e-15);
        let v = phi(&k, 1e3);
        assert!((v - c(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn phi_small_t_linear() {
        // expm1 form keeps the O(t) leading behaviour; the quadratic term
        // bounds the deviation.
        let k = PhiKernel::new(2.0, 1.0);
        let t = 1e-12;
        let lin = c(-k.gamma_eff, k.delta) * t;
        let v = phi(&k, t);
        assert!((v - lin).norm() < 2.0 * lin.norm_sqr());
        assert!((v - lin).norm() > 0.0 || v == lin);
    }

    #[test]
    fn phi_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let k = PhiKernel::new(rng.gen_range(-5.0..5.0), rng.gen_range(0.0..3.0));
            let t = rng.gen_range(0.0..20.0);
            assert!(phi(&k, t).norm() <= 1.0 + (-k.gamma_eff * t).exp() + 1e-12);
        }
    }

    #[test]
    fn transmission_values() {
        assert!((transmission(0.0, 1.0).unwrap() - c(-1.0, 0.0)).norm() < 1e-15);
        assert!((transmission(1e9, 1.0).unwrap() - c(1.0, 0.0)).norm() < 3e-9);
        assert!((transmission(1.0, 1.0).unwrap() - c(0.0, -1.0)).norm() < 1e-15);
        assert_eq!(transmission(0.0, 0.0), Err(Error::DegenerateCoefficient));
    }

    #[test]
    fn transmission_unimodular() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let t_k = transmission(rng.gen_range(-50.0..50.0), rng.gen_range(1e-3..10.0)).unwrap();
            assert!((t_k.norm() - 1.0).abs() < 1e-14);
        }
    }

    /// Quadrature oracle for erf along the ray 0 -> z.
    fn erf_quad(z: C64) -> C64 {
        let v = integrate_complex(|s| (-(z * s) * (z * s)).exp(), 0.0, 1.0, 1e-13, 1e-13).unwrap();
        v * z * 2.0 / PI.sqrt()
    }

    #[test]
    fn erf_zero_and_odd() {
        assert_eq!(erf(c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let z = c(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let a = erf(z).unwrap();
            let b = erf(-z).unwrap();
            assert!((a + b).norm() < 1e-13 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn erf_one_matches_quadrature() {
        let v = erf(c(1.0, 0.0)).unwrap();
        let q = erf_quad(c(1.0, 0.0));
        assert!((v - q).norm() < 1e-12);
        assert!((v.re - 0.8427007929497149).abs() < 1e-13);
    }

    #[test]
    fn erf_grid_against_quadrature() {
        // Moderate-modulus grid where the function value is O(1): absolute
        // 1e-10 demanded by the contract.
        for &x in &[-3.9_f64, -2.0, -0.3, 0.0, 0.7, 1.9, 3.4] {
            for &y in &[-2.0_f64, -0.9, 0.0, 0.4, 1.6] {
                let z = c(x, y);
                let v = erf(z).unwrap();
                let q = erf_quad(z);
                assert!(
                    (v - q).norm() < 1e-10,
                    "erf({z}) = {v}, quad = {q}"
                );
            }
        }
    }

    #[test]
    fn erf_branch_seam_agreement() {
        // Both evaluation branches must agree to 1e-12 on the crossover ring.
        for k in 0..48 {
            let th = k as f64 * PI / 24.0;
            let z = c(3.0 * th.cos(), 3.0 * th.sin());
            let series = erf_series(z);
            let (zr, sign) = if z.re < 0.0 { (-z, -1.0) } else { (z, 1.0) };
            let w = faddeeva_upper(c(-zr.im, zr.re));
            let compl = (c(1.0, 0.0) - (-zr * zr).exp() * w) * sign;
            assert!(
                (series - compl).norm() < 1e-12 * (1.0 + series.norm()),
                "seam mismatch at {z}: {series} vs {compl}"
            );
        }
    }

    #[test]
    fn erf_range_guard() {
        assert!(matches!(erf(c(9.0, 0.0)), Err(Error::RangeExceeded(_, _))));
        assert!(erf(c(6.0, 6.0)).is_err());
        assert!(erf(c(5.0, 5.0)).is_ok());
    }

    #[test]
    fn gaussian_integral_zero_upper() {
        let v = gaussian_time_integral(0.3, 0.0, 0.5, 1.0, 1.0, 2.0).unwrap();
        assert_eq!(v, c(0.0, 0.0));
    }

    #[test]
    fn gaussian_integral_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..60 {
            let d = rng.gen_range(0.7..4.0);
            let t_ret = rng.gen_range(0.0..3.0);
            let upper = rng.gen_range(0.0..3.0);
            let delta = rng.gen_range(-2.0..2.0);
            let closed = gaussian_time_integral(t_ret, upper, delta, 1.0, 1.0, d).unwrap();
            let a = 1.0 / (2.0 * d * d);
            let b = c(-t_ret / (d * d), 0.0) - c(0.0, 1.0) * c(delta, 1.0);
            let quad = integrate_complex(
                |tau| (-a * tau * tau - b.re * tau).exp() * c(0.0, -b.im * tau).exp(),
                0.0,
                upper,
                1e-12,
                1e-12,
            )
            .unwrap();
            assert!(
                (closed - quad).norm() < 1e-8,
                "closed={closed} quad={quad} d={d} t_ret={t_ret} upper={upper} delta={delta}"
            );
        }
    }

    #[test]
    fn gaussian_integral_plane_wave_limit() {
        // d -> infinity collapses onto -i (e^{i(delta + i gamma) t} - 1) / (delta + i gamma).
        let (delta, gamma, t) = (0.7, 1.0, 1.3);
        let v = gaussian_time_integral(0.9, t, delta, gamma, 1.0, 1e6).unwrap();
        let dg = c(delta, gamma);
        let plane = -c(0.0, 1.0) * ((c(0.0, 1.0) * dg * t).exp() - 1.0) / dg;
        assert!((v - plane).norm() < 1e-9, "{v} vs {plane}");
    }

    #[test]
    fn k_cal_values() {
        assert_eq!(k_cal(0, 1.7), 1.7);
        assert!((k_cal(1, 1.0) - 1.0 / 6.0).abs() < 1e-16);
        assert!((k_cal(3, 2.0) - 128.0 / 5040.0).abs() < 1e-16);
    }

    #[test]
    fn k_cal_second_derivative_recurrence() {
        // d^2 K_j / dx^2 = K_{j-1}, central differences.
        for j in 1..=4u32 {
            for &x in &[0.5, 1.0, 2.0] {
                let h = 1e-4;
                let dd = (k_cal(j, x + h) - 2.0 * k_cal(j, x) + k_cal(j, x - h)) / (h * h);
                let target = k_cal(j - 1, x);
                assert!((dd - target).abs() < 1e-5 * target.abs().max(1e-3));
            }
        }
    }
}
