//! Closed-form g2(0) of a heralded single photon mixed with a weak coherent
//! state, and the Gaussian delay dependence of the indistinguishability.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Peak indistinguishability measured from triple coincidences.
pub const MEASURED_K: f64 = 0.86;
pub const MEASURED_K_UNCERTAINTY: f64 = 0.02;
/// Gaussian width of K(tau), femtoseconds.
pub const MEASURED_TAU0_FS: f64 = 425.1;
pub const MEASURED_TAU0_UNCERTAINTY_FS: f64 = 11.6;

/// Mean photon numbers of the two sources.
///
/// `eta` is the mean photon number of the heralded single-photon state and
/// `alpha_sq` that of the coherent state; `eta = 0` is accepted so the
/// coherent-only and vacuum limits can be built, but then the mixing ratio is
/// undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    eta: f64,
    alpha_sq: f64,
}

impl SourceParams {
    pub fn new(eta: f64, alpha_sq: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(invalid("eta", format!("must lie in [0, 1], got {eta}")));
        }
        if !(alpha_sq >= 0.0 && alpha_sq.is_finite()) {
            return Err(invalid("alpha_sq", format!("must be finite and >= 0, got {alpha_sq}")));
        }
        Ok(SourceParams { eta, alpha_sq })
    }

    /// Sources with `alpha_sq = ratio * eta`.
    pub fn from_ratio(eta: f64, ratio: f64) -> Result<Self> {
        if !(ratio >= 0.0 && ratio.is_finite()) {
            return Err(invalid("r", format!("must be finite and >= 0, got {ratio}")));
        }
        Self::new(eta, ratio * eta)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn alpha_sq(&self) -> f64 {
        self.alpha_sq
    }

    /// Mixing ratio `r = |alpha|^2 / eta`; `None` when `eta == 0`.
    pub fn ratio(&self) -> Option<f64> {
        (self.eta > 0.0).then(|| self.alpha_sq / self.eta)
    }
}

/// Gaussian K(tau) = K exp(-((tau - center)/tau0)^2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayModel {
    k_peak: f64,
    tau0_fs: f64,
    center_fs: f64,
}

impl DelayModel {
    pub fn new(k_peak: f64, tau0_fs: f64) -> Result<Self> {
        Self::with_center(k_peak, tau0_fs, 0.0)
    }

    pub fn with_center(k_peak: f64, tau0_fs: f64, center_fs: f64) -> Result<Self> {
        check_k(k_peak)?;
        if !(tau0_fs > 0.0 && tau0_fs.is_finite()) {
            return Err(invalid("tau0", format!("must be finite and > 0, got {tau0_fs}")));
        }
        if !center_fs.is_finite() {
            return Err(invalid("center", "must be finite"));
        }
        Ok(DelayModel {
            k_peak,
            tau0_fs,
            center_fs,
        })
    }

    /// The measured source: K = 0.86, tau0 = 425.1 fs.
    pub fn measured() -> Self {
        DelayModel {
            k_peak: MEASURED_K,
            tau0_fs: MEASURED_TAU0_FS,
            center_fs: 0.0,
        }
    }

    pub fn k_peak(&self) -> f64 {
        self.k_peak
    }

    pub fn tau0_fs(&self) -> f64 {
        self.tau0_fs
    }

    pub fn center_fs(&self) -> f64 {
        self.center_fs
    }

    pub fn k_at(&self, tau_fs: f64) -> f64 {
        let x = (tau_fs - self.center_fs) / self.tau0_fs;
        self.k_peak * (-x * x).exp()
    }
}

pub(crate) fn check_k(k: f64) -> Result<()> {
    if (0.0..=1.0).contains(&k) {
        Ok(())
    } else {
        Err(invalid("k", format!("must lie in [0, 1], got {k}")))
    }
}

fn check_ratio(r: f64) -> Result<()> {
    if r >= 0.0 {
        Ok(())
    } else {
        Err(invalid("r", format!("must be >= 0, got {r}")))
    }
}

pub fn k_of_delay(model: &DelayModel, tau_fs: f64) -> f64 {
    model.k_at(tau_fs)
}

/// g2(0) of the fully distinguishable mixture, (r^2 + 2r)/(1 + r)^2.
pub fn g2_distinguishable(r: f64) -> Result<f64> {
    check_ratio(r)?;
    if r.is_infinite() {
        return Ok(1.0);
    }
    Ok((r * r + 2.0 * r) / ((1.0 + r) * (1.0 + r)))
}

/// Exact g2(0) of the fully indistinguishable (photon-added coherent) mixture.
pub fn g2_indistinguishable_full(params: &SourceParams) -> Result<f64> {
    let eta = params.eta();
    let a2 = params.alpha_sq();
    let a4 = a2 * a2;
    let a6 = a4 * a2;
    let num = (a4 + 4.0 * eta * a2 + 4.0 * eta * a4 + eta * a6) * (1.0 + eta * a2);
    let mean = eta + a2 + 2.0 * eta * a2 + eta * a4;
    if mean == 0.0 {
        return Err(Error::UndefinedEstimate("both sources are empty".into()));
    }
    Ok(num / (mean * mean))
}

/// Weak-field g2(0) at K = 1, (r^2 + 4r)/(1 + r)^2.
pub fn g2_weakfield_k1(r: f64) -> Result<f64> {
    check_ratio(r)?;
    if r.is_infinite() {
        return Ok(1.0);
    }
    Ok((r * r + 4.0 * r) / ((1.0 + r) * (1.0 + r)))
}

/// Weak-field g2(0) at partial indistinguishability, (r^2 + 2(1+K)r)/(1 + r)^2.
pub fn g2_partial(r: f64, k: f64) -> Result<f64> {
    check_ratio(r)?;
    check_k(k)?;
    if r.is_infinite() {
        return Ok(1.0);
    }
    Ok((r * r + 2.0 * (1.0 + k) * r) / ((1.0 + r) * (1.0 + r)))
}

/// g2(0) keeping the `1 - eta` vacuum weight of the heralded state:
/// [(1-eta) r^2 + 2(1+K) r] / [(1-eta) r + 1]^2.
pub fn g2_full_eta(r: f64, k: f64, eta: f64) -> Result<f64> {
    check_ratio(r)?;
    check_k(k)?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(invalid("eta", format!("must lie in [0, 1], got {eta}")));
    }
    let keep = 1.0 - eta;
    if r.is_infinite() {
        return Ok(if keep > 0.0 { 1.0 / keep } else { f64::INFINITY });
    }
    let den = keep * r + 1.0;
    Ok((keep * r * r + 2.0 * (1.0 + k) * r) / (den * den))
}

/// Where g2(0) of the weak-field model crosses 1 as r grows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Crossing {
    At(f64),
    /// K = 0: the mixture stays antibunched for every r.
    NoCrossing,
}

/// Solves g2_partial(r, K) = 1, giving r = 1/(2K).
pub fn transition_boundary(k: f64) -> Result<Crossing> {
    check_k(k)?;
    if k == 0.0 {
        Ok(Crossing::NoCrossing)
    } else {
        Ok(Crossing::At(0.5 / k))
    }
}
