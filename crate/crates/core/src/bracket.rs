//! The permutation-sum factor ("bracket") of the excited-manifold amplitude.
//!
//! The bracket is
//!
//! ```text
//! B = phi(t) + sum_{j=1}^{n} (1 - t_k)^j
//!       sum_{ordered j-tuples} phi(t^(j)) Theta(t^(j))
//!           prod_m phi(x^(m)/v_g) Theta(x^(m))
//! ```
//!
//! where the step constraints force `0 < x_{l0} < x_{l1} < ... < t v_g`, so
//! for tie-free coordinates exactly one ordering of each subset survives.
//! [`bracket_reference`] performs the literal tuple sum (ground truth, capped
//! at 10 coordinates); [`bracket_fast`] exploits the ordering reduction with
//! an O(n^2) recursion over the sorted positive coordinates.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::special::PhiKernel;

/// Default coordinate cap for the factorial reference path.
pub const ENUMERATION_CAP: usize = 10;

/// Inputs of a bracket evaluation. `kernel` and `t_k` must be built from the
/// same `(delta, gamma_eff)` pair; [`BracketInput::new`] guarantees that.
#[derive(Debug, Clone)]
pub struct BracketInput {
    pub coords: Vec<f64>,
    pub t: f64,
    pub kernel: PhiKernel,
    pub t_k: C64,
    pub v_g: f64,
}

impl BracketInput {
    pub fn new(coords: Vec<f64>, t: f64, kernel: PhiKernel, v_g: f64) -> Result<Self> {
        let t_k = kernel.transmission()?;
        Ok(Self {
            coords,
            t,
            kernel,
            t_k,
            v_g,
        })
    }
}

/// Per-order split of a bracket value; `terms[l]` is the l-th scattering
/// order, and the terms sum to the full bracket.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderDecomposition {
    pub terms: Vec<C64>,
}

impl OrderDecomposition {
    pub fn sum(&self) -> C64 {
        self.terms.iter().sum()
    }
}

/// Number of ordered j-tuples from `n_photons - 1` items:
/// `P(N-1, j) = (N-1)! / (N-1-j)!`.
pub fn count_permutations(n_photons: u32, order: u32) -> Result<u128> {
    if n_photons < 1 || order > n_photons - 1 {
        return Err(Error::InvalidInput(format!(
            "order {order} outside 0..={} for N = {n_photons}",
            n_photons.saturating_sub(1)
        )));
    }
    let n = (n_photons - 1) as u128;
    let mut acc: u128 = 1;
    for i in 0..order as u128 {
        acc = acc
            .checked_mul(n - i)
            .ok_or(Error::InvalidInput("permutation count overflow".into()))?;
    }
    Ok(acc)
}

#[inline]
fn theta(x: f64) -> bool {
    // Theta(0) := 1; ties are measure-zero under integration and phi(0) = 0
    // kills them anyway, so this only pins determinism.
    x >= 0.0
}

/// Literal nested sum over all ordered tuples, keeping every Theta factor
/// (including the redundant intermediate retarded-time gates).
pub fn bracket_reference(input: &BracketInput) -> Result<(C64, OrderDecomposition)> {
    let n = input.coords.len();
    if n > ENUMERATION_CAP {
        return Err(Error::EnumerationCapExceeded {
            n,
            cap: ENUMERATION_CAP,
        });
    }
    let u = C64::new(1.0, 0.0) - input.t_k;
    let mut terms = vec![C64::new(0.0, 0.0); n + 1];
    terms[0] = input.kernel.phi(input.t);

    // Depth-first walk over tuples of distinct indices. A Theta factor of
    // zero annihilates the tuple and every extension of it, so those
    // subtrees are skipped; this is exact, not an approximation.
    fn walk(
        input: &BracketInput,
        u: C64,
        used: u32,
        prev_x: f64,
        depth: usize,
        prod: C64,
        u_pow: C64,
        terms: &mut [C64],
    ) {
        for (i, &x) in input.coords.iter().enumerate() {
            if used & (1 << i) != 0 {
                continue;
            }
            let step = x - prev_x;
            if !theta(step) {
                continue;
            }
            let t_ret = input.t - x / input.v_g;
            if !theta(t_ret) {
                continue;
            }
            let prod_new = prod * input.kernel.phi(step / input.v_g);
            let u_new = u_pow * u;
            terms[depth + 1] += u_new * prod_new * input.kernel.phi(t_ret);
            walk(input, u, used | (1 << i), x, depth + 1, prod_new, u_new, terms);
        }
    }
    walk(
        input,
        u,
        0,
        0.0,
        0,
        C64::new(1.0, 0.0),
        C64::new(1.0, 0.0),
        &mut terms,
    );
    let dec = OrderDecomposition { terms };
    Ok((dec.sum(), dec))
}

/// Sorted strictly-positive coordinates below the light front `v_g t`; only
/// these can contribute beyond the zeroth order.
fn active_sorted(coords: &[f64], t: f64, v_g: f64) -> Vec<f64> {
    let mut ys: Vec<f64> = coords
        .iter()
        .copied()
        .filter(|&x| x > 0.0 && x < v_g * t)
        .collect();
    ys.sort_by(f64::total_cmp);
    ys
}

/// O(n^2) evaluation over pre-sorted active coordinates; used by the Monte
/// Carlo hot path. `g_buf` is caller-provided scratch.
pub(crate) fn bracket_value_sorted(
    ys: &[f64],
    t: f64,
    kernel: &PhiKernel,
    u: C64,
    v_g: f64,
    g_buf: &mut Vec<C64>,
) -> C64 {
    g_buf.clear();
    let mut value = kernel.phi(t);
    for &y in ys {
        let mut g = kernel.phi(y / v_g);
        for (&gl, &yl) in g_buf.iter().zip(ys) {
            g += gl * kernel.phi((y - yl) / v_g);
        }
        g *= u;
        value += g * kernel.phi(t - y / v_g);
        g_buf.push(g);
    }
    value
}

/// Fast bracket with per-order decomposition. The recursion tracks
/// coefficients of powers of `(1 - t_k)` so every order falls out of one
/// pass.
pub fn bracket_fast(input: &BracketInput) -> (C64, OrderDecomposition) {
    let n_coords = input.coords.len();
    let ys = active_sorted(&input.coords, input.t, input.v_g);
    let n = ys.len();
    let u = C64::new(1.0, 0.0) - input.t_k;
    // chain[i][l-1]: sum over ascending chains of length l ending at ys[i]
    // of the product of step kernels.
    let mut chain: Vec<Vec<C64>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut ci = vec![C64::new(0.0, 0.0); n];
        ci[0] = input.kernel.phi(ys[i] / input.v_g);
        for l in 0..i {
            let step = input.kernel.phi((ys[i] - ys[l]) / input.v_g);
            for (order, &c) in chain[l].iter().enumerate().take(i) {
                ci[order + 1] += c * step;
            }
        }
        chain.push(ci);
    }
    let mut terms = vec![C64::new(0.0, 0.0); n_coords + 1];
    terms[0] = input.kernel.phi(input.t);
    let mut u_pow = C64::new(1.0, 0.0);
    for order in 1..=n {
        u_pow *= u;
        let mut acc = C64::new(0.0, 0.0);
        for (i, ci) in chain.iter().enumerate() {
            acc += ci[order - 1] * input.kernel.phi(input.t - ys[i] / input.v_g);
        }
        terms[order] = u_pow * acc;
    }
    let dec = OrderDecomposition { terms };
    (dec.sum(), dec)
}

/// Value-only fast bracket.
pub fn bracket_fast_value(input: &BracketInput) -> C64 {
    let ys = active_sorted(&input.coords, input.t, input.v_g);
    let u = C64::new(1.0, 0.0) - input.t_k;
    let mut buf = Vec::with_capacity(ys.len());
    bracket_value_sorted(&ys, input.t, &input.kernel, u, input.v_g, &mut buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn input(coords: Vec<f64>, t: f64, delta: f64, gamma_eff: f64) -> BracketInput {
        BracketInput::new(coords, t, PhiKernel::new(delta, gamma_eff), 1.0).unwrap()
    }

    #[test]
    fn permutation_counts() {
        assert_eq!(count_permutations(4, 0).unwrap(), 1);
        assert_eq!(count_permutations(4, 2).unwrap(), 6);
        assert_eq!(count_permutations(4, 3).unwrap(), 6);
        assert!(count_permutations(4, 4).is_err());
        // Large inputs stay exact or fail loudly.
        assert_eq!(count_permutations(21, 20).unwrap(), 2_432_902_008_176_640_000);
        assert!(count_permutations(60, 50).is_err());
    }

    #[test]
    fn all_negative_coords_reduce_to_phi() {
        let inp = input(vec![-1.0, -3.5, -0.2], 2.0, 0.3, 1.0);
        let (v, dec) = bracket_reference(&inp).unwrap();
        let phi_t = inp.kernel.phi(2.0);
        assert!((v - phi_t).norm() < 1e-15);
        assert!((dec.terms[0] - phi_t).norm() < 1e-15);
        for term in &dec.terms[1..] {
            assert_eq!(*term, C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn two_photon_closed_form() {
        // Single coordinate between atom and light front.
        let (x, t) = (0.7, 2.0);
        let inp = input(vec![x], t, 0.4, 0.9);
        let k = &inp.kernel;
        let u = C64::new(1.0, 0.0) - inp.t_k;
        let expect = k.phi(t) + u * k.phi(x) * k.phi(t - x);
        let (v, _) = bracket_reference(&inp).unwrap();
        assert!((v - expect).norm() < 1e-15);
        let (vf, _) = bracket_fast(&inp);
        assert!((vf - expect).norm() < 1e-15);
    }

    #[test]
    fn three_photon_single_surviving_ordering() {
        // 0 < x1 < x2 < t: only the ascending ordering contributes at j = 2;
        // hand expansion of both tuples confirms the reverse one is killed.
        let (x1, x2, t) = (0.5, 1.1, 3.0);
        let inp = input(vec![x1, x2], t, 0.0, 1.0);
        let k = &inp.kernel;
        let u = C64::new(1.0, 0.0) - inp.t_k;
        let j1 = u * (k.phi(x1) * k.phi(t - x1) + k.phi(x2) * k.phi(t - x2));
        let j2_ascending = u * u * k.phi(x1) * k.phi(x2 - x1) * k.phi(t - x2);
        // reverse ordering (x2 then x1) carries Theta(x1 - x2) = 0
        let expect = k.phi(t) + j1 + j2_ascending;
        let (v, dec) = bracket_reference(&inp).unwrap();
        assert!((v - expect).norm() < 1e-15);
        assert!((dec.terms[2] - j2_ascending).norm() < 1e-15);
    }

    #[test]
    fn fast_matches_reference_randomly() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..2000 {
            let n = rng.gen_range(1..=6usize);
            let coords: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..6.0)).collect();
            let t = rng.gen_range(0.0..5.0);
            let delta = rng.gen_range(-2.0..2.0);
            let gamma_eff = rng.gen_range(0.05..1.5);
            let inp = input(coords, t, delta, gamma_eff);
            let (vr, dr) = bracket_reference(&inp).unwrap();
            let (vf, df) = bracket_fast(&inp);
            let scale = vr.norm().max(1.0);
            assert!((vr - vf).norm() < 1e-12 * scale, "{vr} vs {vf}");
            for (a, b) in dr.terms.iter().zip(df.terms.iter()) {
                assert!((a - b).norm() < 1e-12 * scale);
            }
            assert!((bracket_fast_value(&inp) - vf).norm() < 1e-14 * scale);
        }
    }

    #[test]
    fn permutation_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let coords = vec![0.3, -1.0, 2.2, 0.9];
        let inp = input(coords.clone(), 4.0, 0.7, 0.8);
        let (v0, _) = bracket_fast(&inp);
        for _ in 0..10 {
            let mut shuffled = coords.clone();
            shuffled.shuffle(&mut rng);
            let inp2 = input(shuffled, 4.0, 0.7, 0.8);
            let (v, _) = bracket_fast(&inp2);
            assert!((v - v0).norm() < 1e-13);
        }
    }

    #[test]
    fn order_count_matches_positive_coords() {
        let inp = input(vec![0.5, -1.0, 1.5, -2.0], 10.0, 0.2, 1.0);
        let (_, dec) = bracket_fast(&inp);
        // two strictly positive coordinates: orders above 2 vanish
        for term in &dec.terms[3..] {
            assert_eq!(*term, C64::new(0.0, 0.0));
        }
        assert!(dec.terms[1].norm() > 0.0);
        assert!(dec.terms[2].norm() > 0.0);
    }

    #[test]
    fn markovian_limit_uncorrelated_projectiles() {
        // Widely separated positive coordinates: bracket / phi(t) -> t_k^l.
        for &delta in &[0.0, 1.0] {
            for l in 1..=3usize {
                let coords: Vec<f64> = (0..l).map(|i| 40.0 * (i + 1) as f64).collect();
                let t = 40.0 * (l + 1) as f64 + 40.0;
                let inp = input(coords, t, delta, 1.0);
                let (v, _) = bracket_fast(&inp);
                let ratio = v / inp.kernel.phi(t);
                let target = inp.t_k.powu(l as u32);
                assert!(
                    (ratio - target).norm() < 1e-3 * target.norm(),
                    "l={l} delta={delta}: {ratio} vs {target}"
                );
            }
        }
    }

    #[test]
    fn clustered_limit_exact_ratio() {
        // Tightly clustered positive coordinates far past the atom. The
        // exact limit of bracket / phi(t) is 1 - l (1 - t_k): the l
        // single-photon channels add coherently while every multi-step chain
        // dies with the vanishing gaps. (Only l = 1 lands on t_k itself.)
        for &delta in &[0.0, 1.0] {
            for l in 1..=3usize {
                let coords: Vec<f64> = (0..l).map(|i| 40.0 + 1e-3 * i as f64 / l as f64).collect();
                let t = 120.0;
                let inp = input(coords, t, delta, 1.0);
                let (v, _) = bracket_fast(&inp);
                let ratio = v / inp.kernel.phi(t);
                let u = C64::new(1.0, 0.0) - inp.t_k;
                let exact = C64::new(1.0, 0.0) - u * l as f64;
                assert!(
                    (ratio - exact).norm() < 1e-2 * exact.norm(),
                    "l={l} delta={delta}: {ratio} vs {exact}"
                );
                if l == 1 {
                    assert!((ratio - inp.t_k).norm() < 1e-2);
                }
            }
        }
    }

    #[test]
    fn enumeration_cap() {
        let inp = input(vec![0.1; 11], 1.0, 0.0, 1.0);
        assert!(matches!(
            bracket_reference(&inp),
            Err(Error::EnumerationCapExceeded { n: 11, cap: 10 })
        ));
    }

    #[test]
    fn large_n_fast_path_is_finite() {
        let coords: Vec<f64> = (0..60).map(|i| 0.1 + 0.05 * i as f64).collect();
        let t = 10.0;
        let inp = input(coords, t, 0.0, 1.0);
        let start = std::time::Instant::now();
        let v = bracket_fast_value(&inp);
        assert!(v.norm().is_finite());
        assert!(start.elapsed().as_millis() < 100);
    }
}
