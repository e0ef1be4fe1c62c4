//! Domain types and parameter validation.
//!
//! Conventions: natural units are `gamma = 1`, `v_g = 1`, but every formula
//! keeps the explicit parameters so dimensionless outputs are invariant under
//! the unit rescaling `(gamma, omega, omega_k, v_g kappa, 1/t) -> lambda * (...)`,
//! `(x, 1/kappa, d) -> (...) / lambda` (at fixed `v_g`).

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};
use crate::special::PhiKernel;

/// Physical constants of the emitter/waveguide model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Decay rate into the chiral channel (inverse time).
    pub gamma: f64,
    /// Atomic transition frequency (inverse time).
    pub omega: f64,
    /// Carrier frequency `omega_k = v_g * k` (inverse time).
    pub omega_k: f64,
    /// Group velocity (length / time).
    pub v_g: f64,
    /// Photon number N >= 1.
    pub n_photons: u32,
}

impl SystemParams {
    /// Resonant parameters in natural units with a given detuning.
    pub fn natural(delta: f64, n_photons: u32) -> Self {
        // omega is arbitrary for the dynamics (only the detuning enters);
        // pick a nonzero carrier so phase factors are exercised.
        let omega = 10.0;
        Self {
            gamma: 1.0,
            omega,
            omega_k: omega + delta,
            v_g: 1.0,
            n_photons,
        }
    }

    /// Detuning `delta = omega_k - omega`.
    #[inline]
    pub fn delta(&self) -> f64 {
        self.omega_k - self.omega
    }

    /// Coupling `V = sqrt(2 v_g gamma)` from `gamma = V^2 / (2 v_g)`.
    #[inline]
    pub fn coupling_v(&self) -> f64 {
        (2.0 * self.v_g * self.gamma).sqrt()
    }

    /// Carrier wavenumber `k = omega_k / v_g`.
    #[inline]
    pub fn wavenumber(&self) -> f64 {
        self.omega_k / self.v_g
    }
}

/// Shape of the incident N-photon wave packet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum WavepacketSpec {
    /// Monochromatic plane wave; amplitudes only, probabilities rejected.
    PlaneWave,
    /// Lorentzian line of width `kappa` (inverse length).
    Lorentzian { kappa: f64 },
    /// Gaussian envelope of width `d` (length).
    Gaussian { d: f64 },
}

impl WavepacketSpec {
    pub fn lorentzian(kappa: f64) -> Self {
        Self::Lorentzian { kappa }
    }

    pub fn gaussian(d: f64) -> Self {
        Self::Gaussian { d }
    }

    /// Effective decay `gamma_eff` entering `phi`: `gamma` for plane waves,
    /// `gamma - v_g kappa` for Lorentzian packets, `gamma` for Gaussian
    /// packets (their kernel is built from the Gaussian time integral, not
    /// from `phi`).
    pub fn gamma_eff(&self, params: &SystemParams) -> f64 {
        match self {
            WavepacketSpec::Lorentzian { kappa } => params.gamma - params.v_g * kappa,
            _ => params.gamma,
        }
    }
}

/// One point in the (N-1)-photon coordinate space of the excited manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonConfiguration {
    pub coords: Vec<f64>,
    pub t: f64,
}

impl PhotonConfiguration {
    pub fn new(coords: Vec<f64>, t: f64) -> Self {
        Self { coords, t }
    }

    /// Check the coordinate count against `n_photons - 1`.
    pub fn check(&self, params: &SystemParams) -> Result<()> {
        let want = params.n_photons as usize - 1;
        if self.coords.len() != want {
            return Err(Error::InvalidInput(format!(
                "configuration has {} coordinates, expected {}",
                self.coords.len(),
                want
            )));
        }
        Ok(())
    }
}

/// Validated configuration with derived quantities precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct Validated {
    pub params: SystemParams,
    pub packet: WavepacketSpec,
    /// Coupling `V`.
    pub coupling_v: f64,
    /// Detuning `omega_k - omega`.
    pub delta: f64,
    /// Effective decay for the packet's kernel.
    pub gamma_eff: f64,
    /// Transmission coefficient at (`delta`, `gamma_eff`).
    pub t_k: C64,
    pub warnings: Vec<Warning>,
}

impl Validated {
    pub fn kernel(&self) -> PhiKernel {
        PhiKernel::new(self.delta, self.gamma_eff)
    }
}

/// Validate parameters and packet, precomputing `V`, `delta`, `gamma_eff`
/// and the transmission coefficient.
pub fn validate(params: &SystemParams, packet: &WavepacketSpec) -> Result<Validated> {
    if !(params.gamma > 0.0) {
        return Err(Error::NonPositiveRate("gamma"));
    }
    if !(params.v_g > 0.0) {
        return Err(Error::NonPositiveRate("v_g"));
    }
    if params.n_photons < 1 {
        return Err(Error::InvalidInput("n_photons must be >= 1".into()));
    }
    let mut warnings = Vec::new();
    match packet {
        WavepacketSpec::Lorentzian { kappa } => {
            if !(*kappa > 0.0) {
                return Err(Error::NonPositiveRate("kappa"));
            }
            if params.v_g * kappa > params.gamma {
                warnings.push(Warning::WidthExceedsLinewidth);
            }
        }
        WavepacketSpec::Gaussian { d } => {
            if !(*d > 0.0) {
                return Err(Error::NonPositiveRate("d"));
            }
        }
        WavepacketSpec::PlaneWave => {}
    }
    let delta = params.delta();
    let gamma_eff = packet.gamma_eff(params);
    let t_k = crate::special::transmission(delta, gamma_eff)?;
    Ok(Validated {
        params: *params,
        packet: *packet,
        coupling_v: params.coupling_v(),
        delta,
        gamma_eff,
        t_k,
        warnings,
    })
}

/// How a probability curve was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Quadrature,
    MonteCarlo,
    Oracle,
    Asymptotic,
    CoherentAverage,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::ClosedForm => "closed",
            Method::Quadrature => "quadrature",
            Method::MonteCarlo => "mc",
            Method::Oracle => "oracle",
            Method::Asymptotic => "asymptotic",
            Method::CoherentAverage => "coherent",
        };
        f.write_str(s)
    }
}

/// Sampled excitation probability with per-point statistical errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub method: Method,
}

impl ProbabilityCurve {
    pub fn new(times: Vec<f64>, values: Vec<f64>, std_errors: Vec<f64>, method: Method) -> Self {
        Self {
            times,
            values,
            std_errors,
            method,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Enforce the curve invariants: matching lengths, strictly increasing
    /// times, and `0 <= p <= 1 + 3 sigma`.
    pub fn check(&self) -> Result<()> {
        if self.values.len() != self.times.len() || self.std_errors.len() != self.times.len() {
            return Err(Error::InvalidInput("curve column lengths differ".into()));
        }
        for w in self.times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidInput("times must be strictly increasing".into()));
            }
        }
        for (&p, &s) in self.values.iter().zip(&self.std_errors) {
            if !(p >= -3.0 * s - 1e-12) || !(p <= 1.0 + 3.0 * s + 1e-12) {
                return Err(Error::InvalidInput(format!(
                    "probability {p} outside [0, 1 + 3 sigma] with sigma = {s}"
                )));
            }
        }
        Ok(())
    }
}

/// Uniform time grid in units of the inverse decay rate.
pub fn time_grid(start: f64, stop: f64, points: usize) -> Result<Vec<f64>> {
    if points == 0 {
        return Err(Error::InvalidInput("time grid needs at least one point".into()));
    }
    if points == 1 {
        return Ok(vec![start]);
    }
    if !(stop > start) {
        return Err(Error::InvalidInput("time grid needs stop > start".into()));
    }
    let h = (stop - start) / (points - 1) as f64;
    Ok((0..points).map(|i| start + h * i as f64).collect())
}
