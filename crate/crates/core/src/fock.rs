//! Dense truncated Fock space for up to three bosonic modes.
//!
//! Basis states are indexed mixed-radix with mode 0 as the least significant
//! digit, so `|n0, n1, n2>` lives at `n0 + (n_max+1)*n1 + (n_max+1)^2*n2`.
//! Ladder operators act by index arithmetic on the amplitude vector; nothing
//! stores an operator matrix.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const DEFAULT_N_MAX: usize = 6;
pub const MAX_MODES: usize = 3;
/// Largest discarded probability weight accepted from a truncation.
pub const TRUNCATION_TOLERANCE: f64 = 1e-9;

/// One bosonic mode of a [`HilbertSpace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mode(usize);

impl Mode {
    /// The mode shared with the coherent state.
    pub const A: Mode = Mode(0);
    /// The temporal mode orthogonal to `A`.
    pub const B: Mode = Mode(1);
    /// Herald (idler) mode.
    pub const IDLER: Mode = Mode(2);

    pub const fn new(index: usize) -> Self {
        Mode(index)
    }

    pub const fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HilbertSpace {
    mode_count: usize,
    n_max: usize,
}

impl HilbertSpace {
    pub fn new(mode_count: usize, n_max: usize) -> Result<Self> {
        if mode_count == 0 || mode_count > MAX_MODES {
            return Err(invalid(
                "mode_count",
                format!("must be in 1..={MAX_MODES}, got {mode_count}"),
            ));
        }
        if n_max < 2 {
            return Err(invalid("n_max", format!("must be at least 2, got {n_max}")));
        }
        Ok(HilbertSpace { mode_count, n_max })
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dimension(&self) -> usize {
        (self.n_max + 1).pow(self.mode_count as u32)
    }

    /// Largest total photon number representable in this space.
    pub fn max_total(&self) -> usize {
        self.n_max * self.mode_count
    }

    fn stride(&self, mode: Mode) -> usize {
        (self.n_max + 1).pow(mode.0 as u32)
    }

    pub fn check_mode(&self, mode: Mode) -> Result<()> {
        if mode.0 < self.mode_count {
            Ok(())
        } else {
            Err(Error::ModeOutOfRange {
                mode: mode.0,
                mode_count: self.mode_count,
            })
        }
    }

    /// Basis index of an occupation pattern; missing trailing modes are vacuum.
    pub fn index_of(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() > self.mode_count {
            return Err(Error::ModeOutOfRange {
                mode: occupations.len() - 1,
                mode_count: self.mode_count,
            });
        }
        let mut index = 0;
        for (m, &n) in occupations.iter().enumerate() {
            if n > self.n_max {
                return Err(Error::CutoffTooSmall {
                    n_max: self.n_max,
                    detail: format!("occupation {n} requested in mode {m}"),
                });
            }
            index += n * self.stride(Mode(m));
        }
        Ok(index)
    }

    /// Occupation of `mode` in basis state `index`.
    pub fn occupation(&self, index: usize, mode: Mode) -> usize {
        (index / self.stride(mode)) % (self.n_max + 1)
    }

    pub fn occupations(&self, index: usize) -> Vec<usize> {
        (0..self.mode_count)
            .map(|m| self.occupation(index, Mode(m)))
            .collect()
    }

    pub fn total_photons(&self, index: usize) -> usize {
        (0..self.mode_count)
            .map(|m| self.occupation(index, Mode(m)))
            .sum()
    }

    fn same_as(&self, other: &HilbertSpace) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }
}

/// `sqrt(n! / k!)` for `k <= n`.
fn sqrt_falling(n: usize, k: usize) -> f64 {
    ((k + 1)..=n).map(|j| j as f64).product::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    space: HilbertSpace,
    amplitudes: DVector<Complex64>,
}

/// Result of a raising operation: the unnormalized image and the squared norm
/// that fell off the cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct Raised {
    pub state: FockVector,
    pub dropped_weight: f64,
}

impl FockVector {
    pub fn zeros(space: HilbertSpace) -> Self {
        FockVector {
            space,
            amplitudes: DVector::zeros(space.dimension()),
        }
    }

    pub fn vacuum(space: HilbertSpace) -> Self {
        let mut v = Self::zeros(space);
        v.amplitudes[0] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn number_state(space: HilbertSpace, occupations: &[usize]) -> Result<Self> {
        let mut v = Self::zeros(space);
        v.amplitudes[space.index_of(occupations)?] = Complex64::new(1.0, 0.0);
        Ok(v)
    }

    pub fn from_amplitudes(space: HilbertSpace, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != space.dimension() {
            return Err(invalid(
                "amplitudes",
                format!(
                    "length {} does not match dimension {}",
                    amplitudes.len(),
                    space.dimension()
                ),
            ));
        }
        Ok(FockVector {
            space,
            amplitudes: DVector::from_vec(amplitudes),
        })
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, occupations: &[usize]) -> Result<Complex64> {
        Ok(self.amplitudes[self.space.index_of(occupations)?])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&self) -> Result<Self> {
        let n2 = self.norm_sqr();
        if n2 <= 0.0 || !n2.is_finite() {
            return Err(Error::ZeroNorm);
        }
        Ok(self.scale(Complex64::new(1.0 / n2.sqrt(), 0.0)))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        FockVector {
            space: self.space,
            amplitudes: &self.amplitudes * factor,
        }
    }

    pub fn add(&self, other: &FockVector) -> Result<Self> {
        self.space.same_as(&other.space)?;
        Ok(FockVector {
            space: self.space,
            amplitudes: &self.amplitudes + &other.amplitudes,
        })
    }

    pub fn sub(&self, other: &FockVector) -> Result<Self> {
        self.space.same_as(&other.space)?;
        Ok(FockVector {
            space: self.space,
            amplitudes: &self.amplitudes - &other.amplitudes,
        })
    }

    /// `<self|other>`
    pub fn inner(&self, other: &FockVector) -> Result<Complex64> {
        self.space.same_as(&other.space)?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Applies `a_mode^dagger`. Amplitude pushed above the cutoff is dropped
    /// and its squared norm reported.
    pub fn create(&self, mode: Mode) -> Result<Raised> {
        self.space.check_mode(mode)?;
        let stride = self.space.stride(mode);
        let n_max = self.space.n_max;
        let mut out = DVector::zeros(self.space.dimension());
        let mut dropped = 0.0;
        for (i, &amp) in self.amplitudes.iter().enumerate() {
            if amp == Complex64::new(0.0, 0.0) {
                continue;
            }
            let n = self.space.occupation(i, mode);
            let raised = amp * ((n + 1) as f64).sqrt();
            if n == n_max {
                dropped += raised.norm_sqr();
            } else {
                out[i + stride] += raised;
            }
        }
        Ok(Raised {
            state: FockVector {
                space: self.space,
                amplitudes: out,
            },
            dropped_weight: dropped,
        })
    }

    /// Applies `a_mode`.
    pub fn annihilate(&self, mode: Mode) -> Result<Self> {
        self.space.check_mode(mode)?;
        let stride = self.space.stride(mode);
        let mut out = DVector::zeros(self.space.dimension());
        for (i, &amp) in self.amplitudes.iter().enumerate() {
            let n = self.space.occupation(i, mode);
            if n > 0 {
                out[i - stride] += amp * (n as f64).sqrt();
            }
        }
        Ok(FockVector {
            space: self.space,
            amplitudes: out,
        })
    }

    /// Product state `self ⊗ other`; `other`'s modes are appended after ours.
    pub fn tensor(&self, other: &FockVector) -> Result<Self> {
        let space = tensor_space(&self.space, &other.space)?;
        let mut out = DVector::zeros(space.dimension());
        let shift = self.space.dimension();
        for (j, &b) in other.amplitudes.iter().enumerate() {
            for (i, &a) in self.amplitudes.iter().enumerate() {
                out[i + shift * j] = a * b;
            }
        }
        Ok(FockVector {
            space,
            amplitudes: out,
        })
    }
}

fn tensor_space(left: &HilbertSpace, right: &HilbertSpace) -> Result<HilbertSpace> {
    if left.n_max != right.n_max {
        return Err(Error::SpaceMismatch);
    }
    HilbertSpace::new(left.mode_count + right.mode_count, left.n_max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherentState {
    pub state: FockVector,
    /// Poisson weight beyond the cutoff, `1 - sum_{n<=n_max} e^{-|a|^2} |a|^{2n}/n!`.
    pub truncation_weight: f64,
}

/// Poisson tail probability `P(N > n_max)` for mean `mean`, summed directly
/// so tiny tails are not lost to cancellation.
pub fn poisson_tail(mean: f64, n_max: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let mut term = (-mean).exp();
    for n in 1..=n_max {
        term *= mean / n as f64;
    }
    let mut tail = 0.0;
    let mut n = n_max + 1;
    loop {
        term *= mean / n as f64;
        tail += term;
        if term < tail * 1e-17 || term == 0.0 {
            break;
        }
        n += 1;
    }
    tail
}

/// Coherent state `|alpha>` in `mode`, all other modes in vacuum, renormalized
/// on the truncated space.
pub fn coherent_state(space: HilbertSpace, mode: Mode, alpha: Complex64) -> Result<CoherentState> {
    space.check_mode(mode)?;
    let mean = alpha.norm_sqr();
    let n_max = space.n_max();
    if mean > n_max as f64 / 4.0 {
        return Err(Error::CutoffTooSmall {
            n_max,
            detail: format!("|alpha|^2 = {mean} exceeds n_max/4"),
        });
    }
    let truncation_weight = poisson_tail(mean, n_max);
    if truncation_weight > TRUNCATION_TOLERANCE {
        return Err(Error::CutoffTooSmall {
            n_max,
            detail: format!("coherent-state truncation weight {truncation_weight:e}"),
        });
    }
    let mut v = FockVector::zeros(space);
    let stride = space.stride(mode);
    let mut amp = Complex64::new((-mean / 2.0).exp(), 0.0);
    for n in 0..=n_max {
        if n > 0 {
            amp = amp * alpha / (n as f64).sqrt();
        }
        v.amplitudes[n * stride] = amp;
    }
    Ok(CoherentState {
        state: v.normalize()?,
        truncation_weight,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    space: HilbertSpace,
    elements: DMatrix<Complex64>,
}

/// One term of a convex mixture.
#[derive(Debug, Clone)]
pub enum Component {
    Pure(FockVector),
    Mixed(DensityMatrix),
}

impl From<FockVector> for Component {
    fn from(v: FockVector) -> Self {
        Component::Pure(v)
    }
}

impl From<DensityMatrix> for Component {
    fn from(rho: DensityMatrix) -> Self {
        Component::Mixed(rho)
    }
}

impl Component {
    fn space(&self) -> HilbertSpace {
        match self {
            Component::Pure(v) => v.space,
            Component::Mixed(rho) => rho.space,
        }
    }
}

/// Convex combination of states, each normalized first; the result has unit trace.
pub fn mix(components: &[(f64, Component)]) -> Result<DensityMatrix> {
    let Some((_, first)) = components.first() else {
        return Err(Error::ZeroWeights);
    };
    let space = first.space();
    let mut total = 0.0;
    for (w, c) in components {
        if !(w.is_finite() && *w >= 0.0) {
            return Err(invalid("weight", format!("must be finite and >= 0, got {w}")));
        }
        space.same_as(&c.space())?;
        total += w;
    }
    if total <= 0.0 {
        return Err(Error::ZeroWeights);
    }
    let dim = space.dimension();
    let mut elements = DMatrix::zeros(dim, dim);
    for (w, c) in components {
        if *w == 0.0 {
            continue;
        }
        let rho = match c {
            Component::Pure(v) => DensityMatrix::from_pure(v)?,
            Component::Mixed(m) => m.normalize()?,
        };
        elements += rho.elements * Complex64::new(w / total, 0.0);
    }
    Ok(DensityMatrix { space, elements })
}

impl DensityMatrix {
    /// `|v><v| / <v|v>`
    pub fn from_pure(v: &FockVector) -> Result<Self> {
        let v = v.normalize()?;
        Ok(DensityMatrix {
            space: v.space,
            elements: &v.amplitudes * v.amplitudes.adjoint(),
        })
    }

    pub fn from_elements(space: HilbertSpace, elements: DMatrix<Complex64>) -> Result<Self> {
        let dim = space.dimension();
        if elements.nrows() != dim || elements.ncols() != dim {
            return Err(invalid("elements", format!("expected a {dim}x{dim} matrix")));
        }
        Ok(DensityMatrix { space, elements })
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn elements(&self) -> &DMatrix<Complex64> {
        &self.elements
    }

    pub fn trace(&self) -> Complex64 {
        self.elements.trace()
    }

    pub fn normalize(&self) -> Result<Self> {
        let tr = self.trace().re;
        if tr <= 0.0 || !tr.is_finite() {
            return Err(Error::ZeroNorm);
        }
        Ok(DensityMatrix {
            space: self.space,
            elements: &self.elements / Complex64::new(tr, 0.0),
        })
    }

    /// Largest `|rho - rho^dagger|` element.
    pub fn hermiticity_defect(&self) -> f64 {
        let diff = &self.elements - self.elements.adjoint();
        diff.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.elements + self.elements.adjoint()) * Complex64::new(0.5, 0.0);
        SymmetricEigen::new(herm).eigenvalues.iter().copied().collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<Self> {
        let space = tensor_space(&self.space, &other.space)?;
        // mode 0 is least significant, so our factor is the inner Kronecker index
        let out = other.elements.kronecker(&self.elements);
        Ok(DensityMatrix { space, elements: out })
    }

    /// `Tr(rho * prod_m (a_m^dagger)^{c_m} (a_m)^{d_m})` with `powers[m] = (c_m, d_m)`.
    /// Modes past the end of `powers` get `(0, 0)`.
    pub fn normally_ordered_moment(&self, powers: &[(usize, usize)]) -> Result<Complex64> {
        let space = self.space;
        if powers.len() > space.mode_count {
            return Err(Error::ModeOutOfRange {
                mode: powers.len() - 1,
                mode_count: space.mode_count,
            });
        }
        for &(c, d) in powers {
            if c > space.n_max || d > space.n_max {
                return Err(Error::CutoffTooSmall {
                    n_max: space.n_max,
                    detail: format!("moment power ({c}, {d}) exceeds the cutoff"),
                });
            }
        }
        let mut acc = Complex64::new(0.0, 0.0);
        'basis: for k in 0..space.dimension() {
            // O|k> = coef |target>
            let mut coef = 1.0;
            let mut target = k;
            for (m, &(c, d)) in powers.iter().enumerate() {
                let mode = Mode(m);
                let n = space.occupation(k, mode);
                if n < d || n - d + c > space.n_max {
                    continue 'basis;
                }
                let lowered = n - d;
                coef *= sqrt_falling(n, lowered) * sqrt_falling(lowered + c, lowered);
                target = target - n * space.stride(mode) + (lowered + c) * space.stride(mode);
            }
            acc += self.elements[(k, target)] * coef;
        }
        Ok(acc)
    }

    /// Probability of each total photon number `0..=max_total`.
    pub fn total_number_distribution(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.space.max_total() + 1];
        for k in 0..self.space.dimension() {
            p[self.space.total_photons(k)] += self.elements[(k, k)].re;
        }
        p
    }
}
