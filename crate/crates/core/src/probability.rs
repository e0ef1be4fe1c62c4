//! Excitation probabilities: closed forms for one and two photons,
//! deterministic quadrature up to three photons, importance-sampled Monte
//! Carlo for any photon number, asymptotic regime formulas, the Rabi power
//! series, coherent-state averaging, and the semiclassical reference map.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bracket::bracket_value_sorted;
use crate::error::{Error, Result};
use crate::model::{validate, Method, ProbabilityCurve, SystemParams, Validated, WavepacketSpec};
use crate::quad::{integrate, integrate_complex};
use crate::special::erf;
use crate::wavefunction::gaussian_bracket_orders;

/// Monte Carlo settings. Results are deterministic for fixed
/// `(seed, n_workers)` and independent of the physical thread count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct McConfig {
    pub n_samples: u64,
    pub seed: u64,
    pub n_workers: u32,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_samples: 100_000,
            seed: 1,
            n_workers: 8,
        }
    }
}

fn require_lorentzian(cfg: &Validated) -> Result<f64> {
    match cfg.packet {
        WavepacketSpec::Lorentzian { kappa } => Ok(kappa),
        WavepacketSpec::PlaneWave => Err(Error::PlaneWaveProbability),
        WavepacketSpec::Gaussian { .. } => Err(Error::InvalidInput(
            "operation requires a Lorentzian packet".into(),
        )),
    }
}

/// Single-photon excitation probability,
/// `p1 = 2 (v_g kappa) gamma e^{-2 v_g kappa t} |phi(t)|^2 / (delta^2 + gamma_eff^2)`.
pub fn p1_closed(t: f64, cfg: &Validated) -> Result<f64> {
    let kappa = require_lorentzian(cfg)?;
    if cfg.params.n_photons != 1 {
        return Err(Error::InvalidInput("p1_closed needs N = 1".into()));
    }
    if t <= 0.0 {
        return Ok(0.0);
    }
    let vgk = cfg.params.v_g * kappa;
    let gamma = cfg.params.gamma;
    let denom = cfg.delta * cfg.delta + cfg.gamma_eff * cfg.gamma_eff;
    Ok(2.0 * vgk * gamma * (-2.0 * vgk * t).exp() * cfg.kernel().phi(t).norm_sqr() / denom)
}

/// The three contributions to the two-photon probability: the
/// interference-free part (`2 p1`), the cross term, and the two-chain term.
pub fn p2_closed_terms(t: f64, cfg: &Validated, quad_tol: f64) -> Result<(f64, f64, f64)> {
    let kappa = require_lorentzian(cfg)?;
    if cfg.params.n_photons != 2 {
        return Err(Error::InvalidInput("p2_closed needs N = 2".into()));
    }
    if t <= 0.0 {
        return Ok((0.0, 0.0, 0.0));
    }
    let (v_g, gamma) = (cfg.params.v_g, cfg.params.gamma);
    let vgk = v_g * kappa;
    let kernel = cfg.kernel();
    let u = C64::new(1.0, 0.0) - cfg.t_k;
    let pref = 4.0 * vgk * gamma * (-2.0 * vgk * t).exp()
        / (cfg.delta * cfg.delta + cfg.gamma_eff * cfg.gamma_eff);
    let phi_t = kernel.phi(t);
    let front = v_g * t;
    let inner_tol = (quad_tol / pref.max(1e-300)).min(1e-10);
    let cross = integrate_complex(
        |x| {
            C64::new((-2.0 * kappa * (front - x)).exp(), 0.0)
                * kernel.phi(x / v_g)
                * kernel.phi(t - x / v_g)
        },
        0.0,
        front,
        inner_tol,
        1e-12,
    )?;
    let chain = integrate(
        |x| {
            (-2.0 * kappa * (front - x)).exp()
                * kernel.phi(x / v_g).norm_sqr()
                * kernel.phi(t - x / v_g).norm_sqr()
        },
        0.0,
        front,
        inner_tol,
        1e-12,
    )?;
    let t_a = pref * phi_t.norm_sqr();
    let t_b = pref * 2.0 * (phi_t.conj() * u * kappa * cross).re;
    let t_c = pref * u.norm_sqr() * kappa * chain;
    Ok((t_a, t_b, t_c))
}

/// Two-photon excitation probability (closed form with one-dimensional
/// quadrature over the inter-photon coordinate).
pub fn p2_closed(t: f64, cfg: &Validated, quad_tol: f64) -> Result<f64> {
    let (a, b, c) = p2_closed_terms(t, cfg, quad_tol)?;
    Ok(a + b + c)
}

/// Bracket value for a given set of active coordinates of a Lorentzian
/// configuration.
fn lorentzian_bracket(cfg: &Validated, ys: &[f64], t: f64) -> C64 {
    let kernel = cfg.kernel();
    let u = C64::new(1.0, 0.0) - cfg.t_k;
    let mut buf = Vec::with_capacity(ys.len());
    bracket_value_sorted(ys, t, &kernel, u, cfg.params.v_g, &mut buf)
}

/// Deterministic quadrature of `\int |e|^2` for up to three photons,
/// Lorentzian or Gaussian packets. Tails where the bracket is constant are
/// integrated analytically; the active region `[0, v_g t]` numerically.
pub fn p_quadrature(t: f64, cfg: &Validated, quad_tol: f64) -> Result<f64> {
    let n = cfg.params.n_photons;
    if n > 3 {
        return Err(Error::InvalidInput(
            "p_quadrature supports N <= 3; use p_monte_carlo".into(),
        ));
    }
    if t <= 0.0 {
        return Ok(0.0);
    }
    match cfg.packet {
        WavepacketSpec::PlaneWave => Err(Error::PlaneWaveProbability),
        WavepacketSpec::Lorentzian { kappa } => {
            let (v_g, gamma) = (cfg.params.v_g, cfg.params.gamma);
            let vgk = v_g * kappa;
            let front = v_g * t;
            // |A_kappa|^2 e^{-2 v_g kappa t}, with one kappa eaten per
            // outside-weight integral 1/(2 kappa) pair below.
            let a2 = 2.0 * n as f64 * v_g * gamma * kappa.powi(n as i32)
                / (cfg.delta * cfg.delta + cfg.gamma_eff * cfg.gamma_eff);
            let pref = a2 * (-2.0 * vgk * t).exp();
            let w_out = (1.0 + (-2.0 * kappa * front).exp()) / (2.0 * kappa);
            let weight = |x: f64| (-2.0 * kappa * (front - x)).exp();
            let phi_sq = cfg.kernel().phi(t).norm_sqr();
            let tol = (quad_tol / pref.max(1e-300)).min(1e-10);
            match n {
                1 => Ok(pref * phi_sq),
                2 => {
                    let active = integrate(
                        |x| weight(x) * lorentzian_bracket(cfg, &[x], t).norm_sqr(),
                        0.0,
                        front,
                        tol,
                        1e-11,
                    )?;
                    Ok(pref * (w_out * phi_sq + active))
                }
                3 => {
                    let one = integrate(
                        |x| weight(x) * lorentzian_bracket(cfg, &[x], t).norm_sqr(),
                        0.0,
                        front,
                        tol,
                        1e-11,
                    )?;
                    let two = integrate(
                        |x2| {
                            weight(x2)
                                * integrate(
                                    |x1| {
                                        weight(x1)
                                            * lorentzian_bracket(cfg, &[x1, x2], t).norm_sqr()
                                    },
                                    0.0,
                                    x2,
                                    tol * 0.1,
                                    1e-9,
                                )
                                .unwrap_or(f64::NAN)
                        },
                        0.0,
                        front,
                        tol,
                        1e-9,
                    )?;
                    if !two.is_finite() {
                        return Err(Error::QuadratureNotConverged {
                            err: f64::INFINITY,
                            tol: quad_tol,
                        });
                    }
                    Ok(pref * (w_out * w_out * phi_sq + 2.0 * w_out * one + 2.0 * two))
                }
                _ => unreachable!(),
            }
        }
        WavepacketSpec::Gaussian { d } => {
            let v_g = cfg.params.v_g;
            let front = v_g * t;
            let norm = (std::f64::consts::PI * d * d).powf(n as f64 / 2.0);
            let pref = n as f64 * cfg.coupling_v * cfg.coupling_v / norm
                * (-v_g * v_g * t * t / (d * d)).exp();
            let bracket = |ys: &[f64]| -> f64 {
                gaussian_bracket_orders(cfg, ys, t, d)
                    .map(|o| o.into_iter().sum::<C64>().norm_sqr())
                    .unwrap_or(f64::NAN)
            };
            let weight = |x: f64| (-(x - front) * (x - front) / (d * d)).exp();
            // Per-coordinate mass outside the active window, where the
            // bracket does not depend on that coordinate:
            // int_{x<0} + int_{x>front} = (d sqrt(pi)/2)(erfc(front/d) + 1).
            let erfc_front = if front / d > 6.0 {
                0.0
            } else {
                1.0 - erf(C64::new(front / d, 0.0))?.re
            };
            let w_out = 0.5 * d * std::f64::consts::PI.sqrt() * (1.0 + erfc_front);
            let b0 = bracket(&[]);
            let tol = (quad_tol / pref.max(1e-300)).min(1e-10);
            let p = match n {
                1 => pref * b0,
                2 => {
                    let active = integrate(|x| weight(x) * bracket(&[x]), 0.0, front, tol, 1e-11)?;
                    pref * (w_out * b0 + active)
                }
                3 => {
                    let one = integrate(|x| weight(x) * bracket(&[x]), 0.0, front, tol, 1e-10)?;
                    let two = integrate(
                        |x2| {
                            weight(x2)
                                * integrate(
                                    |x1| weight(x1) * bracket(&[x1, x2]),
                                    0.0,
                                    x2,
                                    tol * 0.1,
                                    1e-9,
                                )
                                .unwrap_or(f64::NAN)
                        },
                        0.0,
                        front,
                        tol,
                        1e-9,
                    )?;
                    pref * (w_out * w_out * b0 + 2.0 * w_out * one + 2.0 * two)
                }
                _ => unreachable!(),
            };
            if !p.is_finite() {
                return Err(Error::QuadratureNotConverged {
                    err: f64::INFINITY,
                    tol: quad_tol,
                });
            }
            Ok(p)
        }
    }
}

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    #[inline]
    fn add(&mut self, v: f64) {
        let y = v - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Importance-sampled Monte Carlo estimate of `p_N(t)` for Lorentzian
/// packets. Each coordinate is drawn from the exact envelope density
/// `q(x) = kappa e^{-2 kappa |x - v_g t|}`, leaving the bounded `|bracket|^2`
/// as the integrand:
///
/// ```text
/// p = [2 N (v_g kappa) gamma e^{-2 v_g kappa t} / (delta^2 + gamma_eff^2)] E[|B|^2]
/// ```
pub fn p_monte_carlo(t_grid: &[f64], cfg: &Validated, mc: &McConfig) -> Result<ProbabilityCurve> {
    let kappa = require_lorentzian(cfg)?;
    if mc.n_samples < 1 || mc.n_workers < 1 {
        return Err(Error::InvalidInput("need n_samples >= 1 and n_workers >= 1".into()));
    }
    for w in t_grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidInput("times must be strictly increasing".into()));
        }
    }
    let n = cfg.params.n_photons;
    let n_coords = (n - 1) as usize;
    let (v_g, gamma) = (cfg.params.v_g, cfg.params.gamma);
    let vgk = v_g * kappa;
    let kernel = cfg.kernel();
    let u = C64::new(1.0, 0.0) - cfg.t_k;
    let scale_b = 1.0 / (2.0 * kappa);
    let workers = mc.n_workers as u64;

    struct Partial {
        sum: f64,
        sum_sq: f64,
        count: u64,
    }

    let tasks: Vec<(usize, u64)> = (0..t_grid.len())
        .flat_map(|ti| (0..workers).map(move |w| (ti, w)))
        .collect();
    let partials: Vec<Partial> = tasks
        .par_iter()
        .map(|&(ti, w)| {
            let t = t_grid[ti];
            let front = v_g * t;
            let base = mc.n_samples / workers;
            let count = base + u64::from(w < mc.n_samples % workers);
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(
                mc.seed ^ splitmix64(ti as u64) ^ splitmix64(w.wrapping_mul(0x51AF_3B1C)),
            ));
            let mut ys: Vec<f64> = Vec::with_capacity(n_coords);
            let mut buf: Vec<C64> = Vec::with_capacity(n_coords);
            let mut s1 = Kahan::default();
            let mut s2 = Kahan::default();
            if t <= 0.0 {
                return Partial { sum: 0.0, sum_sq: 0.0, count };
            }
            for _ in 0..count {
                ys.clear();
                for _ in 0..n_coords {
                    let uu: f64 = rng.gen();
                    let x = if uu < 0.5 {
                        front + scale_b * (2.0 * uu).ln()
                    } else {
                        front - scale_b * (2.0 * (1.0 - uu)).ln()
                    };
                    if x > 0.0 && x < front {
                        ys.push(x);
                    }
                }
                ys.sort_by(f64::total_cmp);
                let b = bracket_value_sorted(&ys, t, &kernel, u, v_g, &mut buf).norm_sqr();
                s1.add(b);
                s2.add(b * b);
            }
            Partial { sum: s1.sum, sum_sq: s2.sum, count }
        })
        .collect();

    let mut values = Vec::with_capacity(t_grid.len());
    let mut errors = Vec::with_capacity(t_grid.len());
    for ti in 0..t_grid.len() {
        let t = t_grid[ti];
        if t <= 0.0 {
            values.push(0.0);
            errors.push(0.0);
            continue;
        }
        let mut s1 = Kahan::default();
        let mut s2 = Kahan::default();
        let mut m = 0u64;
        for (k, p) in partials.iter().enumerate() {
            if tasks[k].0 == ti {
                s1.add(p.sum);
                s2.add(p.sum_sq);
                m += p.count;
            }
        }
        let mf = m as f64;
        let mean = s1.sum / mf;
        let coeff = 2.0 * n as f64 * vgk * gamma * (-2.0 * vgk * t).exp()
            / (cfg.delta * cfg.delta + cfg.gamma_eff * cfg.gamma_eff);
        if n == 1 {
            // zero-dimensional integral: the estimator is exact
            values.push(coeff * kernel.phi(t).norm_sqr());
            errors.push(0.0);
            continue;
        }
        let var = ((s2.sum - mf * mean * mean) / (mf - 1.0)).max(0.0);
        values.push(coeff * mean);
        errors.push(coeff * (var / mf).sqrt());
    }
    Ok(ProbabilityCurve::new(t_grid.to_vec(), values, errors, Method::MonteCarlo))
}

/// Asymptotic regime tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    WeakField,
    LargeDetuning,
    StrongPumping,
    None,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::WeakField => "WeakField",
            Regime::LargeDetuning => "LargeDetuning",
            Regime::StrongPumping => "StrongPumping",
            Regime::None => "None",
        };
        f.write_str(s)
    }
}

/// Regime classification with the ratios that justify it.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub n_vgk_over_gamma: f64,
    pub delta_over_gamma: f64,
    pub gamma_t_max: f64,
    pub g_over_gamma: f64,
}

/// Thresholds are artifact conventions: weak field below
/// `N v_g kappa = 0.01 gamma` and `gamma t < 0.1`; dispersive beyond
/// `|delta| = 20 gamma`; strong pumping beyond `g = 10 gamma`.
pub fn classify_regime(params: &SystemParams, kappa: f64, t_max: f64) -> RegimeReport {
    let gamma = params.gamma;
    let vgk = params.v_g * kappa;
    let n_vgk = params.n_photons as f64 * vgk / gamma;
    let delta = params.delta() / gamma;
    let g = rabi_frequency(params, kappa).g / gamma;
    let regime = if delta.abs() > 20.0 {
        Regime::LargeDetuning
    } else if g > 10.0 {
        Regime::StrongPumping
    } else if n_vgk < 0.01 && gamma * t_max < 0.1 {
        Regime::WeakField
    } else {
        Regime::None
    };
    RegimeReport {
        regime,
        n_vgk_over_gamma: n_vgk,
        delta_over_gamma: delta,
        gamma_t_max: gamma * t_max,
        g_over_gamma: g,
    }
}

/// Closed asymptotic forms for the three regimes.
pub fn asymptotic_probability(
    regime: Regime,
    t: f64,
    params: &SystemParams,
    kappa: f64,
) -> Result<f64> {
    let vgk = params.v_g * kappa;
    let n = params.n_photons as f64;
    let gamma = params.gamma;
    let delta = params.delta();
    match regime {
        Regime::WeakField => Ok(2.0 * n * vgk * gamma * t * t),
        Regime::LargeDetuning => {
            Ok(8.0 * n * vgk * gamma / (delta * delta) * (0.5 * delta * t).sin().powi(2))
        }
        Regime::StrongPumping => {
            let g = (2.0 * n * vgk * gamma).sqrt();
            Ok((g * t).sin().powi(2))
        }
        Regime::None => Err(Error::InvalidInput("no asymptotic form for regime None".into())),
    }
}

/// Series coefficient `chi_n = 2^{2n+1} / (2n+2)!`.
pub fn chi_coefficient(n: u32) -> f64 {
    let mut v = 1.0; // chi_0 = 2/2! = 1
    for m in 1..=n {
        v *= 4.0 / ((2 * m + 1) as f64 * (2 * m + 2) as f64);
    }
    v
}

/// Partial sum `sum_{n=0}^{n_terms} (-1)^n chi_n (g t)^{2(n+1)}`; converges
/// to `sin^2(gt)`.
pub fn rabi_series(gt: f64, n_terms: u32) -> f64 {
    let x = gt * gt;
    let mut term = x;
    let mut acc = x;
    for n in 0..n_terms {
        term *= -4.0 * x / ((2 * n + 3) as f64 * (2 * n + 4) as f64);
        acc += term;
    }
    acc
}

/// Vacuum and N-photon Rabi frequencies for a Lorentzian drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RabiMap {
    /// `g0 = sqrt(2 v_g kappa gamma)`.
    pub g0: f64,
    /// `g = g0 sqrt(N)`.
    pub g: f64,
    /// Rabi angular frequency, equal to `g`.
    pub omega_r: f64,
}

impl RabiMap {
    /// Accumulated pulse area `g t`.
    pub fn pulse_area(&self, t: f64) -> f64 {
        self.g * t
    }
}

pub fn rabi_frequency(params: &SystemParams, kappa: f64) -> RabiMap {
    let g0 = (2.0 * params.v_g * kappa * params.gamma).sqrt();
    let g = g0 * (params.n_photons as f64).sqrt();
    RabiMap { g0, g, omega_r: g }
}

/// Semiclassical Rabi formula
/// `4 g^2/(delta^2 + 4 g^2) sin^2(sqrt((delta/2)^2 + g^2) t)`.
pub fn semiclassical_probability(g: f64, delta: f64, t: f64) -> f64 {
    let freq = (0.25 * delta * delta + g * g).sqrt();
    4.0 * g * g / (delta * delta + 4.0 * g * g) * (freq * t).sin().powi(2)
}

fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    if n <= 20 {
        let mut v = 1.0f64;
        for k in 2..=n {
            v *= k as f64;
        }
        return v.ln();
    }
    let x = n as f64;
    let x2 = x * x;
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + 1.0 / (12.0 * x)
        - 1.0 / (360.0 * x * x2)
        + 1.0 / (1260.0 * x2 * x2 * x)
}

fn poisson_pmf(n: u64, mean: f64) -> f64 {
    (n as f64 * mean.ln() - mean - ln_factorial(n)).exp()
}

/// Per-manifold probability source inside [`coherent_average`].
#[derive(Debug, Clone, Copy)]
pub enum ManifoldMethod {
    /// Exact for n <= 3 (closed form / quadrature), `sin^2(g0 sqrt(n) t)`
    /// beyond.
    Auto,
    /// Exact for n <= 3, Monte Carlo with these settings beyond.
    ForceExact(McConfig),
}

/// Poisson-weighted average over photon-number manifolds for an initial
/// coherent state with mean photon number `alpha_sq`. The sum is truncated
/// at `mean +- truncation sqrt(mean)` (never below n = 1; the vacuum term
/// contributes exactly zero) and the surviving weights are renormalized.
/// Returns the curve and the discarded tail mass.
pub fn coherent_average(
    alpha_sq: f64,
    t_grid: &[f64],
    params: &SystemParams,
    kappa: f64,
    truncation: f64,
    method: ManifoldMethod,
) -> Result<(ProbabilityCurve, f64)> {
    if !(alpha_sq > 0.0) {
        return Err(Error::InvalidInput("alpha_sq must be > 0".into()));
    }
    let sigma = alpha_sq.sqrt();
    let lo = ((alpha_sq - truncation * sigma).floor().max(1.0)) as u64;
    let hi = ((alpha_sq + truncation * sigma).ceil().max(lo as f64)) as u64;
    let mut weights = Vec::with_capacity((hi - lo + 1) as usize);
    let mut kept_mass = poisson_pmf(0, alpha_sq); // vacuum contributes exactly zero
    for n in lo..=hi {
        let w = poisson_pmf(n, alpha_sq);
        kept_mass += w;
        weights.push(w);
    }
    let tail = (1.0 - kept_mass).max(0.0);
    if tail > 1e-6 {
        return Err(Error::TruncationTooSevere(tail));
    }
    for w in &mut weights {
        *w /= kept_mass;
    }
    let g0 = (2.0 * params.v_g * kappa * params.gamma).sqrt();
    let mut values = vec![0.0; t_grid.len()];
    for (idx, n) in (lo..=hi).enumerate() {
        let w = weights[idx];
        if w < 1e-18 {
            continue;
        }
        if n <= 3 {
            let mut p = *params;
            p.n_photons = n as u32;
            let cfg = validate(&p, &WavepacketSpec::lorentzian(kappa))?;
            for (vi, &t) in t_grid.iter().enumerate() {
                let pn = match n {
                    1 => p1_closed(t, &cfg)?,
                    2 => p2_closed(t, &cfg, 1e-9)?,
                    _ => p_quadrature(t, &cfg, 1e-8)?,
                };
                values[vi] += w * pn;
            }
        } else {
            match method {
                ManifoldMethod::Auto => {
                    let arg = g0 * (n as f64).sqrt();
                    for (vi, &t) in t_grid.iter().enumerate() {
                        values[vi] += w * (arg * t).sin().powi(2);
                    }
                }
                ManifoldMethod::ForceExact(mc) => {
                    let mut p = *params;
                    p.n_photons = n as u32;
                    let cfg = validate(&p, &WavepacketSpec::lorentzian(kappa))?;
                    let curve = p_monte_carlo(t_grid, &cfg, &mc)?;
                    for (vi, v) in curve.values.iter().enumerate() {
                        values[vi] += w * v;
                    }
                }
            }
        }
    }
    let curve = ProbabilityCurve::new(
        t_grid.to_vec(),
        values,
        vec![0.0; t_grid.len()],
        Method::CoherentAverage,
    );
    Ok((curve, tail))
}
