//! Independent ground truth: a discrete-momentum-mode truncation of the
//! chiral Hamiltonian propagated in the number-conserving sector.
//!
//! The Hilbert space splits into (atom ground) x (N photons) and
//! (atom excited) x (N-1 photons); both blocks are enumerated as bosonic
//! multisets over the mode grid. Couplings are `g_m = V sqrt(w_m / 2 pi)`
//! with `w_m` the quadrature weight of mode `m`, so the discrete model is a
//! quadrature of the continuum interaction. None of the analytic machinery
//! (kernels, brackets, closed forms) enters here.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Method, ProbabilityCurve, SystemParams, WavepacketSpec};

/// Required spectral coverage of the packet by the mode window.
pub const COVERAGE_REQUIRED: f64 = 0.999;

/// Momentum-space quadrature grid: nodes `k` with cell widths `weights`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeGrid {
    pub k: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ModeGrid {
    /// Uniform grid of `m` cells of width `dk` centered on `center`.
    pub fn uniform(center: f64, m: usize, dk: f64) -> Self {
        let lo = center - 0.5 * m as f64 * dk;
        let k = (0..m).map(|i| lo + (i as f64 + 0.5) * dk).collect();
        ModeGrid {
            k,
            weights: vec![dk; m],
        }
    }

    /// Two-zone grid: a fine zone resolving the packet around the carrier,
    /// embedded in a coarse window wide enough for the emission line. The
    /// window is symmetric about the carrier so detuning-mirror symmetry is
    /// exact on the grid.
    pub fn two_zone(
        k_center: f64,
        packet_width: f64,
        fine_halfwidths: f64,
        fine_per_width: u32,
        line_halfwidth: f64,
        coarse_dk: f64,
    ) -> Self {
        let fine_dk = packet_width / fine_per_width as f64;
        let fine_half = fine_halfwidths * packet_width;
        let half = (line_halfwidth).max(fine_half);
        let mut k = Vec::new();
        let mut weights = Vec::new();
        let mut fill = |lo: f64, hi: f64, dk: f64| {
            if hi <= lo {
                return;
            }
            let n = ((hi - lo) / dk).ceil().max(1.0) as usize;
            let w = (hi - lo) / n as f64;
            for i in 0..n {
                k.push(lo + (i as f64 + 0.5) * w);
                weights.push(w);
            }
        };
        fill(k_center - half, k_center - fine_half, coarse_dk);
        fill(k_center - fine_half.min(half), k_center + fine_half.min(half), fine_dk);
        fill(k_center + fine_half, k_center + half, coarse_dk);
        ModeGrid { k, weights }
    }

    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    pub fn dk_max(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }
}

/// Sparse number-conserving Hamiltonian in the rotating frame of the
/// carrier, with basis bookkeeping.
#[derive(Debug, Clone)]
pub struct DiscreteModel {
    pub params: SystemParams,
    pub packet: WavepacketSpec,
    pub grid: ModeGrid,
    pub dim_ground: usize,
    pub dim_excited: usize,
    /// Mode couplings `g_m`.
    pub couplings: Vec<f64>,
    /// Diagonal energies, ground block then excited block.
    diag: Vec<f64>,
    /// CSR-like rows over ground states: (excited index, matrix element).
    ground_offsets: Vec<usize>,
    ground_entries: Vec<(u32, f64)>,
    /// Transposed rows over excited states: (ground index, matrix element).
    excited_offsets: Vec<usize>,
    excited_entries: Vec<(u32, f64)>,
    /// Gershgorin bound on the spectral radius.
    pub h_norm_bound: f64,
    /// Recurrence horizon `2 pi / (v_g dk_max)` of the coarsest cells.
    pub wrap_time: f64,
    /// Fraction of the packet's spectral weight inside the window.
    pub coverage: f64,
}

fn multiset_rank(ms: &[u32]) -> usize {
    match *ms {
        [] => 0,
        [i] => i as usize,
        [i, j] => (j as usize * (j as usize + 1)) / 2 + i as usize,
        [i, j, k] => {
            let (i, j, k) = (i as usize, j as usize, k as usize);
            (k + 2) * (k + 1) * k / 6 + (j + 1) * j / 2 + i
        }
        _ => unreachable!("photon number capped at 3"),
    }
}

fn multiset_dim(m: usize, n: u32) -> usize {
    match n {
        0 => 1,
        1 => m,
        2 => m * (m + 1) / 2,
        3 => m * (m + 1) * (m + 2) / 6,
        _ => unreachable!(),
    }
}

fn for_each_multiset(m: usize, n: u32, mut f: impl FnMut(&[u32])) {
    match n {
        0 => f(&[]),
        1 => (0..m as u32).for_each(|i| f(&[i])),
        2 => {
            for j in 0..m as u32 {
                for i in 0..=j {
                    f(&[i, j]);
                }
            }
        }
        3 => {
            for k in 0..m as u32 {
                for j in 0..=k {
                    for i in 0..=j {
                        f(&[i, j, k]);
                    }
                }
            }
        }
        _ => unreachable!(),
    }
}

/// Continuum-normalized spectral amplitude of the packet at offset `q` from
/// the carrier.
fn spectral_amplitude(packet: &WavepacketSpec, q: f64) -> Result<f64> {
    match packet {
        WavepacketSpec::Lorentzian { kappa } => {
            Ok((2.0 * kappa.powi(3) / std::f64::consts::PI).sqrt() / (kappa * kappa + q * q))
        }
        WavepacketSpec::Gaussian { d } => {
            Ok((d * d / std::f64::consts::PI).powf(0.25) * (-0.5 * d * d * q * q).exp())
        }
        WavepacketSpec::PlaneWave => Err(Error::InvalidInput(
            "plane waves have no normalizable spectral amplitude".into(),
        )),
    }
}

/// Build a model on an explicit uniform grid of `m_modes` cells of width
/// `dk`, centered on the carrier.
pub fn build(
    params: &SystemParams,
    packet: &WavepacketSpec,
    m_modes: usize,
    dk: f64,
) -> Result<DiscreteModel> {
    build_with_grid(params, packet, ModeGrid::uniform(params.wavenumber(), m_modes, dk))
}

/// Default two-zone grid per photon number: the packet zone spans 40 packet
/// widths at the given refinement, the line window 20 linewidths.
pub fn default_grid(params: &SystemParams, packet: &WavepacketSpec, refine: u32) -> Result<ModeGrid> {
    let (width, fine_halfwidths) = match packet {
        WavepacketSpec::Lorentzian { kappa } => (*kappa, 40.0),
        WavepacketSpec::Gaussian { d } => (1.0 / d, 6.0),
        WavepacketSpec::PlaneWave => {
            return Err(Error::InvalidInput("plane waves have no oracle packet".into()))
        }
    };
    let gamma_k = params.gamma / params.v_g;
    let line_half = params.delta().abs() / params.v_g + 20.0 * gamma_k;
    Ok(ModeGrid::two_zone(
        params.wavenumber(),
        width,
        fine_halfwidths,
        12 * refine,
        line_half,
        gamma_k / (8.0 * refine as f64),
    ))
}

pub fn build_with_grid(
    params: &SystemParams,
    packet: &WavepacketSpec,
    grid: ModeGrid,
) -> Result<DiscreteModel> {
    let m = grid.len();
    let n = params.n_photons;
    if m < 16 {
        return Err(Error::DimensionGuard(format!("need at least 16 modes, got {m}")));
    }
    if n > 3 {
        return Err(Error::DimensionGuard(format!("oracle supports N <= 3, got {n}")));
    }
    let dim_ground = multiset_dim(m, n);
    let dim_excited = multiset_dim(m, n - 1);
    if dim_ground + dim_excited > 6_000_000 {
        return Err(Error::DimensionGuard(format!(
            "sector dimension {} too large",
            dim_ground + dim_excited
        )));
    }
    // Window coverage of the packet's spectral weight.
    let k0 = params.wavenumber();
    let mut coverage = 0.0;
    for (&k, &w) in grid.k.iter().zip(&grid.weights) {
        coverage += spectral_amplitude(packet, k - k0)?.powi(2) * w;
    }
    if coverage < COVERAGE_REQUIRED {
        return Err(Error::WindowCoverage {
            coverage,
            required: COVERAGE_REQUIRED,
        });
    }

    let v = params.coupling_v();
    let couplings: Vec<f64> = grid
        .weights
        .iter()
        .map(|&w| v * (w / (2.0 * std::f64::consts::PI)).sqrt())
        .collect();
    let omega_rel: Vec<f64> = grid.k.iter().map(|&k| params.v_g * k - params.omega_k).collect();
    let delta = params.delta();

    let mut diag = vec![0.0f64; dim_ground + dim_excited];
    for_each_multiset(m, n, |ms| {
        let idx = multiset_rank(ms);
        diag[idx] = ms.iter().map(|&i| omega_rel[i as usize]).sum();
    });
    for_each_multiset(m, n - 1, |ms| {
        let idx = multiset_rank(ms);
        diag[dim_ground + idx] = ms.iter().map(|&i| omega_rel[i as usize]).sum::<f64>() - delta;
    });

    // Ground rows: remove one photon from each distinct occupied mode.
    let mut ground_offsets = Vec::with_capacity(dim_ground + 1);
    let mut ground_entries: Vec<(u32, f64)> = Vec::with_capacity(dim_ground * n as usize);
    ground_offsets.push(0);
    let mut reduced = Vec::with_capacity(n as usize);
    for_each_multiset(m, n, |ms| {
        let mut prev: Option<u32> = None;
        for (pos, &mode) in ms.iter().enumerate() {
            if prev == Some(mode) {
                continue;
            }
            prev = Some(mode);
            let mult = ms.iter().filter(|&&x| x == mode).count() as f64;
            reduced.clear();
            reduced.extend_from_slice(ms);
            reduced.remove(pos);
            let val = couplings[mode as usize] * mult.sqrt();
            ground_entries.push((multiset_rank(&reduced) as u32, val));
        }
        ground_offsets.push(ground_entries.len());
    });

    // Transpose into excited rows by counting sort.
    let mut counts = vec![0usize; dim_excited + 1];
    for &(ei, _) in &ground_entries {
        counts[ei as usize + 1] += 1;
    }
    for i in 0..dim_excited {
        counts[i + 1] += counts[i];
    }
    let mut excited_entries = vec![(0u32, 0.0f64); ground_entries.len()];
    let mut cursor = counts.clone();
    for gi in 0..dim_ground {
        for &(ei, val) in &ground_entries[ground_offsets[gi]..ground_offsets[gi + 1]] {
            excited_entries[cursor[ei as usize]] = (gi as u32, val);
            cursor[ei as usize] += 1;
        }
    }
    let excited_offsets = counts;

    // Gershgorin bound.
    let mut h_norm: f64 = 0.0;
    for gi in 0..dim_ground {
        let row: f64 = ground_entries[ground_offsets[gi]..ground_offsets[gi + 1]]
            .iter()
            .map(|&(_, v)| v.abs())
            .sum();
        h_norm = h_norm.max(diag[gi].abs() + row);
    }
    for ei in 0..dim_excited {
        let row: f64 = excited_entries[excited_offsets[ei]..excited_offsets[ei + 1]]
            .iter()
            .map(|&(_, v)| v.abs())
            .sum();
        h_norm = h_norm.max(diag[dim_ground + ei].abs() + row);
    }

    let wrap_time = 2.0 * std::f64::consts::PI / (params.v_g * grid.dk_max());
    Ok(DiscreteModel {
        params: *params,
        packet: *packet,
        grid,
        dim_ground,
        dim_excited,
        couplings,
        diag,
        ground_offsets,
        ground_entries,
        excited_offsets,
        excited_entries,
        h_norm_bound: h_norm,
        wrap_time,
        coverage,
    })
}

impl DiscreteModel {
    pub fn dim(&self) -> usize {
        self.dim_ground + self.dim_excited
    }

    /// Apply `-i H`.
    fn rhs(&self, x: &[C64], y: &mut [C64]) {
        let (xg, xe) = x.split_at(self.dim_ground);
        let (yg, ye) = y.split_at_mut(self.dim_ground);
        let serial = self.dim() < 20_000;
        let gi_row = |gi: usize, yv: &mut C64| {
            let mut acc = C64::new(self.diag[gi], 0.0) * xg[gi];
            for &(ei, val) in &self.ground_entries[self.ground_offsets[gi]..self.ground_offsets[gi + 1]] {
                acc += val * xe[ei as usize];
            }
            *yv = C64::new(acc.im, -acc.re); // multiply by -i
        };
        let ei_row = |ei: usize, yv: &mut C64| {
            let mut acc = C64::new(self.diag[self.dim_ground + ei], 0.0) * xe[ei];
            for &(gi, val) in &self.excited_entries[self.excited_offsets[ei]..self.excited_offsets[ei + 1]] {
                acc += val * xg[gi as usize];
            }
            *yv = C64::new(acc.im, -acc.re);
        };
        if serial {
            yg.iter_mut().enumerate().for_each(|(gi, yv)| gi_row(gi, yv));
            ye.iter_mut().enumerate().for_each(|(ei, yv)| ei_row(ei, yv));
        } else {
            yg.par_iter_mut().enumerate().for_each(|(gi, yv)| gi_row(gi, yv));
            ye.par_iter_mut().enumerate().for_each(|(ei, yv)| ei_row(ei, yv));
        }
    }

    /// Dense Hamiltonian for small models (tests and diagnostics).
    pub fn dense_hamiltonian(&self) -> Result<Vec<Vec<C64>>> {
        let dim = self.dim();
        if dim > 5000 {
            return Err(Error::DimensionGuard(format!("dense dump of dim {dim} refused")));
        }
        let mut h = vec![vec![C64::new(0.0, 0.0); dim]; dim];
        for (i, row) in h.iter_mut().enumerate() {
            row[i] = C64::new(self.diag[i], 0.0);
        }
        for gi in 0..self.dim_ground {
            for &(ei, val) in &self.ground_entries[self.ground_offsets[gi]..self.ground_offsets[gi + 1]] {
                h[gi][self.dim_ground + ei as usize] += val;
                h[self.dim_ground + ei as usize][gi] += val;
            }
        }
        Ok(h)
    }

    /// Total excitation number expectation (photons plus atomic excitation),
    /// computed from the occupations.
    pub fn excitation_expectation(&self, state: &[C64]) -> f64 {
        let m = self.grid.len();
        let n = self.params.n_photons;
        let mut acc = 0.0;
        let mut idx = 0usize;
        for_each_multiset(m, n, |ms| {
            acc += ms.len() as f64 * state[idx].norm_sqr();
            idx += 1;
        });
        let mut eidx = self.dim_ground;
        for_each_multiset(m, n - 1, |ms| {
            acc += (ms.len() as f64 + 1.0) * state[eidx].norm_sqr();
            eidx += 1;
        });
        acc
    }
}

/// N-photon Fock state of the discretized packet mode.
#[derive(Debug, Clone)]
pub struct InitialState {
    /// Per-mode amplitudes of the packet mode (after discrete
    /// renormalization).
    pub beta: Vec<f64>,
    /// Full state vector over ground + excited blocks.
    pub state: Vec<C64>,
}

/// Construct `(b^dag)^N / sqrt(N!) |0>` with
/// `b^dag = sum_m beta_m c_m^dag`.
pub fn initial_state(model: &DiscreteModel) -> Result<InitialState> {
    let m = model.grid.len();
    let n = model.params.n_photons;
    let k0 = model.params.wavenumber();
    let mut beta: Vec<f64> = model
        .grid
        .k
        .iter()
        .zip(&model.grid.weights)
        .map(|(&k, &w)| spectral_amplitude(&model.packet, k - k0).map(|a| a * w.sqrt()))
        .collect::<Result<_>>()?;
    let norm: f64 = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
    for b in &mut beta {
        *b /= norm;
    }
    let mut state = vec![C64::new(0.0, 0.0); model.dim()];
    let mut idx = 0usize;
    let mut total = 0.0f64;
    for_each_multiset(m, n, |ms| {
        // sqrt(N! / prod n_m!) prod beta^{n_m}
        let mut amp = 1.0f64;
        for &mode in ms {
            amp *= beta[mode as usize];
        }
        state[idx] = C64::new(amp * (multinomial(ms, n) as f64).sqrt(), 0.0);
        idx += 1;
    });
    for s in &state {
        total += s.norm_sqr();
    }
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidInput(format!(
            "initial state norm deviates: {total}"
        )));
    }
    Ok(InitialState { beta, state })
}

fn factorial(n: u64) -> u64 {
    (1..=n).product::<u64>().max(1)
}

fn multinomial(ms: &[u32], n: u32) -> u64 {
    let mut denom = 1u64;
    let mut run = 1u64;
    for w in ms.windows(2) {
        if w[0] == w[1] {
            run += 1;
            denom *= run;
        } else {
            run = 1;
        }
    }
    factorial(n as u64) / denom
}

/// Propagation diagnostics alongside the excitation curve.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub curve: ProbabilityCurve,
    pub max_norm_drift: f64,
    pub max_excitation_drift: f64,
    pub n_steps: usize,
}

/// Fixed-step RK4 propagation of the Schroedinger equation, recording the
/// excited-manifold population at the grid times. `step_tol` bounds
/// `h * ||H||` (Gershgorin estimate); 0.012 keeps the norm drift of a
/// `gamma t <= 5` run below 1e-9.
pub fn propagate(
    model: &DiscreteModel,
    initial: &InitialState,
    t_grid: &[f64],
    step_tol: f64,
) -> Result<Propagation> {
    let t_max = t_grid.last().copied().unwrap_or(0.0);
    if t_max >= model.wrap_time {
        return Err(Error::WrapTimeExceeded {
            t_max,
            wrap: model.wrap_time,
        });
    }
    for w in t_grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidInput("times must be strictly increasing".into()));
        }
    }
    let dim = model.dim();
    let h_max = step_tol / model.h_norm_bound.max(1e-300);
    let mut state = initial.state.clone();
    let mut k1 = vec![C64::new(0.0, 0.0); dim];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    let expected_excitation = model.params.n_photons as f64;
    let mut cur_t = 0.0;
    let mut values = Vec::with_capacity(t_grid.len());
    let mut max_drift = 0.0f64;
    let mut max_exc_drift = 0.0f64;
    let mut n_steps = 0usize;
    for &t in t_grid {
        if t < 0.0 {
            return Err(Error::InvalidInput("oracle times must be >= 0".into()));
        }
        let span = t - cur_t;
        if span > 0.0 {
            let steps = (span / h_max).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for _ in 0..steps {
                model.rhs(&state, &mut k1);
                axpy(&mut tmp, &state, &k1, 0.5 * h);
                model.rhs(&tmp, &mut k2);
                axpy(&mut tmp, &state, &k2, 0.5 * h);
                model.rhs(&tmp, &mut k3);
                axpy(&mut tmp, &state, &k3, h);
                model.rhs(&tmp, &mut k4);
                for i in 0..dim {
                    state[i] += h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
                }
                n_steps += 1;
            }
            cur_t = t;
        }
        let norm_sq: f64 = state.iter().map(|c| c.norm_sqr()).sum();
        let drift = (norm_sq.sqrt() - 1.0).abs();
        max_drift = max_drift.max(drift);
        if drift > 1e-9 {
            return Err(Error::NormDrift(drift));
        }
        let exc = model.excitation_expectation(&state);
        max_exc_drift = max_exc_drift.max((exc - expected_excitation * norm_sq).abs());
        let p: f64 = state[model.dim_ground..].iter().map(|c| c.norm_sqr()).sum();
        values.push(p.min(1.0));
    }
    let curve = ProbabilityCurve::new(
        t_grid.to_vec(),
        values,
        vec![0.0; t_grid.len()],
        Method::Oracle,
    );
    Ok(Propagation {
        curve,
        max_norm_drift: max_drift,
        max_excitation_drift: max_exc_drift,
        n_steps,
    })
}

fn axpy(out: &mut [C64], base: &[C64], inc: &[C64], h: f64) {
    for ((o, &b), &i) in out.iter_mut().zip(base).zip(inc) {
        *o = b + h * i;
    }
}

/// Convenience driver: default grid, initial state, propagation.
pub fn run(
    params: &SystemParams,
    packet: &WavepacketSpec,
    t_grid: &[f64],
    refine: u32,
    step_tol: f64,
) -> Result<Propagation> {
    let grid = default_grid(params, packet, refine)?;
    let model = build_with_grid(params, packet, grid)?;
    let init = initial_state(&model)?;
    propagate(&model, &init, t_grid, step_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{time_grid, validate};
    use crate::probability::p1_closed;

    #[test]
    fn dimensions_match_stars_and_bars() {
        let params = SystemParams::natural(0.0, 1);
        let packet = WavepacketSpec::gaussian(2.0);
        let m1 = build(&params, &packet, 64, 0.2).unwrap();
        assert_eq!(m1.dim(), 65);
        let mut p2 = params;
        p2.n_photons = 2;
        let m2 = build(&p2, &packet, 64, 0.2).unwrap();
        assert_eq!(m2.dim_ground, 2080);
        assert_eq!(m2.dim_excited, 64);
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        let mut params = SystemParams::natural(0.7, 2);
        params.n_photons = 2;
        let packet = WavepacketSpec::gaussian(2.0);
        let model = build(&params, &packet, 24, 0.45).unwrap();
        let h = model.dense_hamiltonian().unwrap();
        let dim = model.dim();
        let mut max_dev = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                max_dev = max_dev.max((h[i][j] - h[j][i].conj()).norm());
            }
        }
        assert!(max_dev < 1e-14);
    }

    #[test]
    fn decoupled_sectors_stay_empty() {
        // V = 0 (gamma -> 0 limit taken literally): the excited manifold
        // never populates.
        let mut params = SystemParams::natural(0.0, 1);
        params.gamma = 0.0;
        let packet = WavepacketSpec::gaussian(2.0);
        let grid = ModeGrid::uniform(params.wavenumber(), 64, 0.2);
        let model = build_with_grid(&params, &packet, grid).unwrap();
        let init = initial_state(&model).unwrap();
        let prop = propagate(&model, &init, &[0.0, 1.0, 3.0], 0.012).unwrap();
        for v in prop.curve.values {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn initial_state_normalized() {
        for n in 1..=3u32 {
            let mut params = SystemParams::natural(0.0, n);
            params.n_photons = n;
            let packet = WavepacketSpec::gaussian(1.5);
            let model = build(&params, &packet, 32, 0.5).unwrap();
            let init = initial_state(&model).unwrap();
            let norm: f64 = init.state.iter().map(|c| c.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn single_photon_matches_closed_form() {
        let params = SystemParams::natural(0.0, 1);
        let packet = WavepacketSpec::lorentzian(0.2);
        let grid = time_grid(0.0, 5.0, 26).unwrap();
        let prop = run(&params, &packet, &grid, 1, 0.012).unwrap();
        let cfg = validate(&params, &packet).unwrap();
        let mut max_dev = 0.0f64;
        for (i, &t) in grid.iter().enumerate() {
            let dev = (prop.curve.values[i] - p1_closed(t, &cfg).unwrap()).abs();
            max_dev = max_dev.max(dev);
        }
        assert!(max_dev < 1e-3, "max deviation {max_dev}");
        assert!(prop.max_norm_drift < 1e-9);
        assert!(prop.max_excitation_drift < 1e-10);
    }

    #[test]
    fn detuning_mirror_symmetry() {
        let packet = WavepacketSpec::lorentzian(0.3);
        let grid = time_grid(0.0, 3.0, 7).unwrap();
        let plus = run(&SystemParams::natural(1.0, 1), &packet, &grid, 1, 0.012).unwrap();
        let minus = run(&SystemParams::natural(-1.0, 1), &packet, &grid, 1, 0.012).unwrap();
        for (a, b) in plus.curve.values.iter().zip(&minus.curve.values) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn wrap_time_guard() {
        let params = SystemParams::natural(0.0, 1);
        let packet = WavepacketSpec::gaussian(0.5);
        // coarse ring with a short horizon
        let grid = ModeGrid::uniform(params.wavenumber(), 64, 0.85);
        let model = build_with_grid(&params, &packet, grid).unwrap();
        let init = initial_state(&model).unwrap();
        let r = propagate(&model, &init, &[0.0, model.wrap_time + 1.0], 0.012);
        assert!(matches!(r, Err(Error::WrapTimeExceeded { .. })));
    }

    #[test]
    #[ignore = "grid refinement probe, run manually"]
    fn probe_refinement_ladder() {
        let params = SystemParams::natural(0.0, 1);
        for &kappa in &[0.05f64, 0.2, 0.85] {
            let packet = WavepacketSpec::lorentzian(kappa);
            let cfg = validate(&params, &packet).unwrap();
            let grid = time_grid(0.0, 5.0, 26).unwrap();
            for (fine_hw, line_hw_gammas, ppw, ppg) in [
                (40.0, 20.0, 12u32, 8.0),
                (40.0, 60.0, 12, 8.0),
                (120.0, 60.0, 12, 8.0),
                (120.0, 180.0, 12, 8.0),
                (120.0, 180.0, 24, 16.0),
                (300.0, 400.0, 12, 8.0),
            ] {
                let mg = ModeGrid::two_zone(
                    params.wavenumber(),
                    kappa,
                    fine_hw,
                    ppw,
                    line_hw_gammas,
                    1.0 / ppg,
                );
                let model = build_with_grid(&params, &packet, mg).unwrap();
                let init = initial_state(&model).unwrap();
                let prop = propagate(&model, &init, &grid, 0.012).unwrap();
                let mut max_dev = 0.0f64;
                for (i, &t) in grid.iter().enumerate() {
                    max_dev =
                        max_dev.max((prop.curve.values[i] - p1_closed(t, &cfg).unwrap()).abs());
                }
                println!(
                    "kappa={kappa} fine_hw={fine_hw} line_hw={line_hw_gammas} ppw={ppw} ppg={ppg}: modes={} dev={max_dev:.3e}",
                    model.grid.len(),
                );
            }
        }
    }

    #[test]
    fn window_coverage_guard() {
        let params = SystemParams::natural(0.0, 1);
        // narrow window cannot hold a broad packet
        let packet = WavepacketSpec::lorentzian(5.0);
        let r = build(&params, &packet, 16, 0.05);
        assert!(matches!(r, Err(Error::WindowCoverage { .. })));
    }

    #[test]
    fn dimension_guards() {
        let mut params = SystemParams::natural(0.0, 4);
        params.n_photons = 4;
        let packet = WavepacketSpec::lorentzian(0.2);
        assert!(matches!(
            build(&params, &packet, 64, 0.2),
            Err(Error::DimensionGuard(_))
        ));
        params.n_photons = 1;
        assert!(matches!(
            build(&params, &packet, 8, 1.0),
            Err(Error::DimensionGuard(_))
        ));
    }
}
