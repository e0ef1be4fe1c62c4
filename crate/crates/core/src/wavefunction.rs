//! Excited-manifold amplitudes `e(x_1..x_{N-1}; t)` for plane-wave,
//! Lorentzian, and Gaussian inputs: prefactor x phase x envelope x bracket.

use num_complex::Complex64 as C64;

use crate::bracket::{bracket_fast, BracketInput, ENUMERATION_CAP};
use crate::error::{Error, Result};
use crate::model::{PhotonConfiguration, Validated, WavepacketSpec};
use crate::special::gaussian_time_integral;

/// Overall amplitude prefactor (`A_0` for plane waves, `A_kappa` for
/// Lorentzian packets).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudePrefactor {
    pub value: C64,
}

/// `A_0 = -sqrt(N) i V / ((2 pi)^{N/2} (delta + i gamma))`.
pub fn prefactor_plane(cfg: &Validated) -> AmplitudePrefactor {
    let n = cfg.params.n_photons;
    let denom = C64::new(cfg.delta, cfg.params.gamma);
    let norm = (2.0 * std::f64::consts::PI).powf(n as f64 / 2.0);
    AmplitudePrefactor {
        value: C64::new(0.0, -(n as f64).sqrt() * cfg.coupling_v / norm) / denom,
    }
}

/// `A_kappa = -sqrt(N) i V kappa^{N/2} / (delta + i (gamma - v_g kappa))`.
pub fn prefactor_lorentzian(cfg: &Validated, kappa: f64) -> AmplitudePrefactor {
    let n = cfg.params.n_photons;
    let denom = C64::new(cfg.delta, cfg.params.gamma - cfg.params.v_g * kappa);
    AmplitudePrefactor {
        value: C64::new(0.0, -(n as f64).sqrt() * cfg.coupling_v * kappa.powf(n as f64 / 2.0))
            / denom,
    }
}

fn carrier_phase(cfg: &Validated, config: &PhotonConfiguration) -> C64 {
    let k = cfg.params.wavenumber();
    let omega_k = cfg.params.omega_k;
    let mut angle = -cfg.delta * config.t;
    for &x in &config.coords {
        angle += k * x - omega_k * config.t;
    }
    C64::new(0.0, angle).exp()
}

/// Plane-wave amplitude (Fock state of a single mode `k`). Exposed for
/// regime studies; its modulus squared is not normalizable.
pub fn evaluate_plane(config: &PhotonConfiguration, cfg: &Validated) -> Result<C64> {
    config.check(&cfg.params)?;
    if config.t < 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    let kernel = crate::special::PhiKernel::new(cfg.delta, cfg.params.gamma);
    let input = BracketInput::new(config.coords.clone(), config.t, kernel, cfg.params.v_g)?;
    let (bracket, _) = bracket_fast(&input);
    Ok(prefactor_plane(cfg).value * carrier_phase(cfg, config) * bracket)
}

/// Lorentzian-packet amplitude.
pub fn evaluate_lorentzian(config: &PhotonConfiguration, cfg: &Validated) -> Result<C64> {
    let kappa = match cfg.packet {
        WavepacketSpec::Lorentzian { kappa } => kappa,
        _ => return Err(Error::InvalidInput("configuration is not Lorentzian".into())),
    };
    config.check(&cfg.params)?;
    if config.t < 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    let input = BracketInput::new(config.coords.clone(), config.t, cfg.kernel(), cfg.params.v_g)?;
    let (bracket, _) = bracket_fast(&input);
    Ok(lorentzian_common(cfg, config, kappa) * bracket)
}

fn lorentzian_common(cfg: &Validated, config: &PhotonConfiguration, kappa: f64) -> C64 {
    let v_g = cfg.params.v_g;
    let mut envelope = -v_g * kappa * config.t;
    for &x in &config.coords {
        envelope -= kappa * (x - v_g * config.t).abs();
    }
    prefactor_lorentzian(cfg, kappa).value * carrier_phase(cfg, config) * envelope.exp()
}

/// Gaussian-packet amplitude via subset enumeration over the active
/// coordinates (the retarded-time dependence of the time integrals breaks
/// the recursion that accelerates the other two cases).
pub fn evaluate_gaussian(config: &PhotonConfiguration, cfg: &Validated) -> Result<C64> {
    Ok(gaussian_order_terms(config, cfg)?.into_iter().sum())
}

fn gaussian_order_terms(config: &PhotonConfiguration, cfg: &Validated) -> Result<Vec<C64>> {
    let d = match cfg.packet {
        WavepacketSpec::Gaussian { d } => d,
        _ => return Err(Error::InvalidInput("configuration is not Gaussian".into())),
    };
    config.check(&cfg.params)?;
    let n_coords = config.coords.len();
    if n_coords > ENUMERATION_CAP {
        return Err(Error::EnumerationCapExceeded {
            n: n_coords,
            cap: ENUMERATION_CAP,
        });
    }
    let mut terms = vec![C64::new(0.0, 0.0); n_coords + 1];
    if config.t < 0.0 {
        return Ok(terms);
    }
    let v_g = cfg.params.v_g;
    let t = config.t;
    // Common factor: prefactor, carrier phase, and the Gaussian weight
    // shared by every scattering order.
    let norm = (std::f64::consts::PI * d * d).powf(n_coords as f64 + 1.0).sqrt().sqrt();
    let mut log_w = -v_g * v_g * t * t / (2.0 * d * d);
    for &x in &config.coords {
        let r = x - v_g * t;
        log_w -= r * r / (2.0 * d * d);
    }
    let common = (cfg.params.n_photons as f64).sqrt() * cfg.coupling_v / norm
        * log_w.exp()
        * carrier_phase(cfg, config);

    let mut ys: Vec<f64> = config
        .coords
        .iter()
        .copied()
        .filter(|&x| x > 0.0 && x < v_g * t)
        .collect();
    ys.sort_by(f64::total_cmp);
    let orders = gaussian_bracket_orders(cfg, &ys, t, d)?;
    for (term, order) in terms.iter_mut().zip(orders) {
        *term = common * order;
    }
    Ok(terms)
}

/// Per-order bracket of the Gaussian amplitude over the sorted active
/// coordinates `ys` (strictly inside `(0, v_g t)`): subset sums of chained
/// Gaussian time integrals with coupling factor `(-V^2/v_g)^j`.
pub(crate) fn gaussian_bracket_orders(
    cfg: &Validated,
    ys: &[f64],
    t: f64,
    d: f64,
) -> Result<Vec<C64>> {
    let (v_g, gamma, delta) = (cfg.params.v_g, cfg.params.gamma, cfg.delta);
    let time_integral = |t_ret: f64, upper: f64| -> Result<C64> {
        gaussian_time_integral(t_ret, upper, delta, gamma, v_g, d)
    };
    let n = ys.len();
    let mut terms = vec![C64::new(0.0, 0.0); n + 1];
    terms[0] = time_integral(t, t)?;
    let coupling = -cfg.coupling_v * cfg.coupling_v / v_g;
    // Ascending subsets are the surviving orderings of the permutation sum.
    for mask in 1u32..(1 << n) {
        let j = mask.count_ones() as usize;
        let mut prod = C64::new(1.0, 0.0);
        let mut prev = 0.0;
        for (m, &y) in ys.iter().enumerate() {
            if mask & (1 << m) == 0 {
                continue;
            }
            // chain step integral with retarded drift t - prev / v_g
            prod *= time_integral(t - prev / v_g, (y - prev) / v_g)?;
            prev = y;
        }
        let t_j = t - prev / v_g;
        prod *= time_integral(t_j, t_j)?;
        terms[j] += coupling.powi(j as i32) * prod;
    }
    Ok(terms)
}

/// Dispatch on the packet shape.
pub fn evaluate(config: &PhotonConfiguration, cfg: &Validated) -> Result<C64> {
    match cfg.packet {
        WavepacketSpec::PlaneWave => evaluate_plane(config, cfg),
        WavepacketSpec::Lorentzian { .. } => evaluate_lorentzian(config, cfg),
        WavepacketSpec::Gaussian { .. } => evaluate_gaussian(config, cfg),
    }
}

/// Amplitudes `K^(0) .. K^(N-1)` of the scattering orders; their sum is the
/// full amplitude.
pub fn order_decomposition(config: &PhotonConfiguration, cfg: &Validated) -> Result<Vec<C64>> {
    match cfg.packet {
        WavepacketSpec::Gaussian { .. } => gaussian_order_terms(config, cfg),
        WavepacketSpec::PlaneWave => {
            config.check(&cfg.params)?;
            if config.t < 0.0 {
                return Ok(vec![C64::new(0.0, 0.0); config.coords.len() + 1]);
            }
            let kernel = crate::special::PhiKernel::new(cfg.delta, cfg.params.gamma);
            let input =
                BracketInput::new(config.coords.clone(), config.t, kernel, cfg.params.v_g)?;
            let (_, dec) = bracket_fast(&input);
            let common = prefactor_plane(cfg).value * carrier_phase(cfg, config);
            Ok(dec.terms.into_iter().map(|k| common * k).collect())
        }
        WavepacketSpec::Lorentzian { kappa } => {
            config.check(&cfg.params)?;
            if config.t < 0.0 {
                return Ok(vec![C64::new(0.0, 0.0); config.coords.len() + 1]);
            }
            let input =
                BracketInput::new(config.coords.clone(), config.t, cfg.kernel(), cfg.params.v_g)?;
            let (_, dec) = bracket_fast(&input);
            let common = lorentzian_common(cfg, config, kappa);
            Ok(dec.terms.into_iter().map(|k| common * k).collect())
        }
    }
}
