//! Exact g2(0) from an explicit two-mode density matrix.
//!
//! The heralded photon is created in the mode `a' = sqrt(K) a + sqrt(1-K) b`,
//! where `a` carries the coherent state and `b` is an orthogonal temporal mode.
//! Detectors see the total number `N = n_a + n_b`, so
//! `g2 = <:N^2:> / <N>^2` with no weak-field truncation of the series.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::{check_k, SourceParams};
use crate::error::{invalid, Error, Result};
use crate::fock::{
    coherent_state, mix, DensityMatrix, FockVector, HilbertSpace, Mode, DEFAULT_N_MAX,
    TRUNCATION_TOLERANCE,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialStateSpec {
    pub params: SourceParams,
    pub k: f64,
    pub n_max: usize,
}

impl PartialStateSpec {
    pub fn new(params: SourceParams, k: f64) -> Result<Self> {
        Self::with_cutoff(params, k, DEFAULT_N_MAX)
    }

    pub fn with_cutoff(params: SourceParams, k: f64, n_max: usize) -> Result<Self> {
        check_k(k)?;
        HilbertSpace::new(2, n_max)?;
        Ok(PartialStateSpec { params, k, n_max })
    }

    /// Weak-field comparison point: `eta` fixed, `|alpha|^2 = r * eta`.
    pub fn at_ratio(eta: f64, r: f64, k: f64) -> Result<Self> {
        Self::new(SourceParams::from_ratio(eta, r)?, k)
    }

    pub fn space(&self) -> HilbertSpace {
        HilbertSpace::new(2, self.n_max).expect("validated on construction")
    }
}

/// Unitary change of the (a, b) mode basis: `a^dagger -> u[0][0] a^dagger + u[1][0] b^dagger`
/// and `b^dagger -> u[0][1] a^dagger + u[1][1] b^dagger`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeBasis {
    u: [[Complex64; 2]; 2],
}

impl ModeBasis {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        ModeBasis {
            u: [[one, zero], [zero, one]],
        }
    }

    pub fn new(u: [[Complex64; 2]; 2]) -> Result<Self> {
        // columns must be orthonormal
        let col = |j: usize| [u[0][j], u[1][j]];
        let dot = |x: [Complex64; 2], y: [Complex64; 2]| x[0].conj() * y[0] + x[1].conj() * y[1];
        let defect = (dot(col(0), col(0)) - 1.0).norm()
            + (dot(col(1), col(1)) - 1.0).norm()
            + dot(col(0), col(1)).norm();
        if defect > 1e-12 {
            return Err(invalid("basis", format!("matrix is not unitary (defect {defect:e})")));
        }
        Ok(ModeBasis { u })
    }

    /// Beamsplitter-type rotation with mixing angle `theta` and phase `phi`.
    pub fn rotation(theta: f64, phi: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let e = Complex64::from_polar(1.0, phi);
        ModeBasis {
            u: [
                [Complex64::new(c, 0.0), -e.conj() * s],
                [e * s, Complex64::new(c, 0.0)],
            ],
        }
    }
}

fn check_dropped(dropped: f64, n_max: usize) -> Result<()> {
    if dropped > TRUNCATION_TOLERANCE {
        Err(Error::CutoffTooSmall {
            n_max,
            detail: format!("photon creation dropped weight {dropped:e}"),
        })
    } else {
        Ok(())
    }
}

/// Mixed state `(1-eta)|alpha><alpha| + eta |psi><psi|` with
/// `|psi> ∝ a'^dagger |alpha>`.
pub fn build_mixed_state(spec: &PartialStateSpec) -> Result<DensityMatrix> {
    build_mixed_state_in_basis(spec, &ModeBasis::identity())
}

/// [`build_mixed_state`] with both physical modes re-expressed in a rotated basis.
pub fn build_mixed_state_in_basis(spec: &PartialStateSpec, basis: &ModeBasis) -> Result<DensityMatrix> {
    let one_mode = HilbertSpace::new(1, spec.n_max)?;
    let alpha = spec.params.alpha_sq().sqrt();
    let u = basis.u;
    let coh_a = coherent_state(one_mode, Mode::A, u[0][0] * alpha)?;
    let coh_b = coherent_state(one_mode, Mode::A, u[1][0] * alpha)?;
    let coherent = coh_a.state.tensor(&coh_b.state)?;

    let sk = spec.k.sqrt();
    let sk_perp = (1.0 - spec.k).sqrt();
    let amp_a = u[0][0] * sk + u[0][1] * sk_perp;
    let amp_b = u[1][0] * sk + u[1][1] * sk_perp;
    let raised_a = coherent.create(Mode::A)?;
    let raised_b = coherent.create(Mode::B)?;
    // Cauchy-Schwarz bound on the weight lost from the superposition
    let dropped = (amp_a.norm() * raised_a.dropped_weight.sqrt()
        + amp_b.norm() * raised_b.dropped_weight.sqrt())
    .powi(2);
    check_dropped(dropped, spec.n_max)?;
    let photon = raised_a.state.scale(amp_a).add(&raised_b.state.scale(amp_b))?;

    let eta = spec.params.eta();
    mix(&[(1.0 - eta, coherent.into()), (eta, photon.into())])
}

/// `<:N^2:>` and `<N>` for `N` the total photon number over all modes.
pub fn total_number_moments(rho: &DensityMatrix) -> Result<(f64, f64)> {
    let modes = rho.space().mode_count();
    let mut mean = 0.0;
    let mut pairs = 0.0;
    let powers = |entries: &[(usize, (usize, usize))]| {
        let mut p = vec![(0, 0); modes];
        for &(m, pq) in entries {
            p[m] = pq;
        }
        p
    };
    for m in 0..modes {
        mean += rho.normally_ordered_moment(&powers(&[(m, (1, 1))]))?.re;
        pairs += rho.normally_ordered_moment(&powers(&[(m, (2, 2))]))?.re;
        for n in (m + 1)..modes {
            pairs += 2.0 * rho.normally_ordered_moment(&powers(&[(m, (1, 1)), (n, (1, 1))]))?.re;
        }
    }
    Ok((pairs, mean))
}

/// `<:N^2:> / <N>^2` of an arbitrary state.
pub fn g2_of_state(rho: &DensityMatrix) -> Result<f64> {
    let (pairs, mean) = total_number_moments(rho)?;
    if mean <= 0.0 {
        return Err(Error::UndefinedEstimate("state has no photons".into()));
    }
    Ok(pairs / (mean * mean))
}

pub fn g2_oracle(spec: &PartialStateSpec) -> Result<f64> {
    g2_of_state(&build_mixed_state(spec)?)
}

/// Two-photon count `<psi|:N^2:|psi>` of `|psi> = a^dagger a'^dagger |0>`, built
/// from unit-norm single-photon modes and evaluated without renormalizing, so
/// the overlap enhancement shows up as `2(1+K)`.
pub fn bunching_coefficient(k: f64) -> Result<f64> {
    check_k(k)?;
    let space = HilbertSpace::new(2, 2)?;
    let vac = FockVector::vacuum(space);
    let heralded = vac
        .create(Mode::A)?
        .state
        .scale(Complex64::new(k.sqrt(), 0.0))
        .add(&vac.create(Mode::B)?.state.scale(Complex64::new((1.0 - k).sqrt(), 0.0)))?;
    let raised = heralded.create(Mode::A)?;
    check_dropped(raised.dropped_weight, space.n_max())?;
    let psi = raised.state;
    let weight = psi.norm_sqr();
    let rho = DensityMatrix::from_pure(&psi)?;
    let (pairs, _) = total_number_moments(&rho)?;
    Ok(pairs * weight)
}

/// `p(n) = Tr(rho Pi_n)` over total photon number `n = 0..=2 n_max`.
pub fn photon_number_distribution(spec: &PartialStateSpec) -> Result<Vec<f64>> {
    let p = build_mixed_state(spec)?.total_number_distribution();
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::CutoffTooSmall {
            n_max: spec.n_max,
            detail: format!("number distribution sums to {total}"),
        });
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{g2_distinguishable, g2_weakfield_k1};
    use approx::assert_relative_eq;

    fn spec(eta: f64, a2: f64, k: f64) -> PartialStateSpec {
        PartialStateSpec::new(SourceParams::new(eta, a2).unwrap(), k).unwrap()
    }

    fn poisson(mean: f64, n: i32) -> f64 {
        (-mean).exp() * mean.powi(n) / (1..=n).map(|k| k as f64).product::<f64>()
    }

    #[test]
    fn pure_single_photon_at_k1() {
        let rho = build_mixed_state(&spec(1.0, 0.0, 1.0)).unwrap();
        let idx = rho.space().index_of(&[1, 0]).unwrap();
        assert_relative_eq!(rho.elements()[(idx, idx)].re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(rho.trace().re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn two_photon_weight_inside_mixed_state() {
        // eta = 1, tiny alpha: <:N^2:> (1 + K a2) / a2 -> 2(1+K)
        let a2 = 1e-6;
        for (k, expected) in [(0.0, 2.0), (1.0, 4.0)] {
            let rho = build_mixed_state(&spec(1.0, a2, k)).unwrap();
            let (pairs, _) = total_number_moments(&rho).unwrap();
            assert_relative_eq!(pairs * (1.0 + k * a2) / a2, expected, max_relative = 1e-5);
        }
    }

    #[test]
    fn bunching_coefficient_examples() {
        assert_relative_eq!(bunching_coefficient(0.0).unwrap(), 2.0, epsilon = 1e-12);
        assert_relative_eq!(bunching_coefficient(1.0).unwrap(), 4.0, epsilon = 1e-12);
        assert_relative_eq!(bunching_coefficient(0.5).unwrap(), 3.0, epsilon = 1e-12);
        assert!(bunching_coefficient(1.5).is_err());
    }

    #[test]
    fn oracle_examples() {
        let g = g2_oracle(&spec(1e-3, 1e-3, 0.0)).unwrap();
        assert!((g - 0.75).abs() < 2e-3, "g = {g}");
        let g = g2_oracle(&spec(1e-3, 1e-3, 1.0)).unwrap();
        assert!((g - 1.25).abs() < 4e-3, "g = {g}");
        let g = g2_oracle(&spec(1e-3, 0.5e-3, 1.0)).unwrap();
        assert!((g - 1.0).abs() < 2e-3, "g = {g}");
    }

    #[test]
    fn oracle_is_exact_for_distinguishable_photons() {
        // the K = 0 state is a product state, for which the distinguishable
        // formula holds at any source strength
        for (eta, a2) in [(0.3, 0.2), (1.0, 0.05), (0.01, 0.4)] {
            let r = a2 / eta;
            let s = PartialStateSpec::with_cutoff(SourceParams::new(eta, a2).unwrap(), 0.0, 12).unwrap();
            let g = g2_oracle(&s).unwrap();
            assert_relative_eq!(g, g2_distinguishable(r).unwrap(), max_relative = 1e-8);
        }
    }

    #[test]
    fn oracle_matches_weak_field_limit() {
        let g = g2_oracle(&spec(1e-7, 1e-7, 1.0)).unwrap();
        assert_relative_eq!(g, g2_weakfield_k1(1.0).unwrap(), max_relative = 1e-6);
    }

    #[test]
    fn vacuum_has_no_g2() {
        assert!(matches!(
            g2_oracle(&spec(0.0, 0.0, 0.5)),
            Err(Error::UndefinedEstimate(_))
        ));
    }

    #[test]
    fn number_distribution_examples() {
        for k in [0.0, 0.3, 1.0] {
            let p = photon_number_distribution(&spec(1.0, 0.0, k)).unwrap();
            assert_relative_eq!(p[1], 1.0, epsilon = 1e-15);
            assert!(p.iter().enumerate().all(|(n, &x)| n == 1 || x.abs() < 1e-15));
        }
        let p = photon_number_distribution(&spec(0.0, 0.01, 0.5)).unwrap();
        assert!((p[1] / p[0] - 0.01).abs() < 1e-8);
    }

    #[test]
    fn heralded_two_photon_weight_doubles() {
        // heralded component alone: p2(K=1)/p2(K=0) = 2/(1 + a2)
        let a2 = 1e-3;
        let p1 = photon_number_distribution(&spec(1.0, a2, 1.0)).unwrap();
        let p0 = photon_number_distribution(&spec(1.0, a2, 0.0)).unwrap();
        assert!((p1[2] / p0[2] - 2.0).abs() < 1e-2);
        assert_relative_eq!(p1[2] / p0[2], 2.0 / (1.0 + a2), max_relative = 1e-9);
    }

    #[test]
    fn two_photon_ratio_in_the_mixture() {
        // r = 1, eta = a2 = 1e-3: coherent pairs dilute the doubling.
        // Independent count of the n = 2 weight of each branch:
        //   coherent branch  P(2)
        //   K = 0 branch     P(1)            (|alpha> x |1>_b)
        //   K = 1 branch     2 P(1) / (1+a2) (a^dagger|alpha>, renormalized)
        let (eta, a2) = (1e-3, 1e-3);
        let p2_k0 = (1.0 - eta) * poisson(a2, 2) + eta * poisson(a2, 1);
        let p2_k1 = (1.0 - eta) * poisson(a2, 2) + eta * 2.0 * poisson(a2, 1) / (1.0 + a2);
        let d1 = photon_number_distribution(&spec(eta, a2, 1.0)).unwrap();
        let d0 = photon_number_distribution(&spec(eta, a2, 0.0)).unwrap();
        assert_relative_eq!(d1[2] / d0[2], p2_k1 / p2_k0, max_relative = 1e-9);
        assert!((d1[2] / d0[2] - 5.0 / 3.0).abs() < 1e-2);
    }

    #[test]
    fn distribution_mean_matches_sources() {
        let s = spec(0.02, 0.03, 0.7);
        let p = photon_number_distribution(&s).unwrap();
        let mean: f64 = p.iter().enumerate().map(|(n, x)| n as f64 * x).sum();
        // <N> = (1-eta) a2 + eta <alpha|a' (N+1)... |alpha> worked out by
        // commuting N through a'^dagger: (1 + a2 + 2K a2 + K a2^2) / (1 + K a2)
        let (eta, a2, k) = (0.02, 0.03, 0.7);
        let expected = (1.0 - eta) * a2 + eta * (1.0 + a2 + 2.0 * k * a2 + k * a2 * a2) / (1.0 + k * a2);
        assert_relative_eq!(mean, expected, max_relative = 1e-10);
        assert!((mean - (eta + a2)).abs() < 1e-3);
    }

    #[test]
    fn pair_moment_matches_distribution() {
        let s = spec(0.05, 0.04, 0.6);
        let rho = build_mixed_state(&s).unwrap();
        let (pairs, _) = total_number_moments(&rho).unwrap();
        let p = rho.total_number_distribution();
        let from_p: f64 = p.iter().enumerate().map(|(n, x)| (n * n.saturating_sub(1)) as f64 * x).sum();
        assert_relative_eq!(pairs, from_p, max_relative = 1e-12);
    }

    #[test]
    fn cutoff_errors_propagate() {
        let s = PartialStateSpec::with_cutoff(SourceParams::new(0.5, 0.7).unwrap(), 1.0, 2).unwrap();
        assert!(matches!(g2_oracle(&s), Err(Error::CutoffTooSmall { .. })));
    }

    #[test]
    fn basis_rotation_must_be_unitary() {
        let two = Complex64::new(2.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        assert!(ModeBasis::new([[two, zero], [zero, two]]).is_err());
        let r = ModeBasis::rotation(0.4, 1.1);
        assert!(ModeBasis::new(r.u).is_ok());
    }
}
