//! Specular reflectivity of a slab model by the Parratt recursion, with
//! Névot–Croce damping of every interface.

use std::f64::consts::PI;

use num_complex::Complex64;
use statrs::function::erf::erf;

use crate::data::{DataError, SlabModel};

/// SLDs are stored in 10⁻⁶ Å⁻²; the kernel works in Å⁻².
pub const SLD_UNIT: f64 = 1e-6;

/// Momentum-transfer grid in Å⁻¹: strictly increasing and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct QGrid(Vec<f64>);

impl QGrid {
    pub fn new(q: Vec<f64>) -> Result<Self, DataError> {
        if q.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(DataError::InvalidModel("q values must be finite and > 0".into()));
        }
        if q.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DataError::InvalidModel("q values must be strictly increasing".into()));
        }
        Ok(Self(q))
    }

    /// `n` points evenly spaced on `[lo, hi]`.
    pub fn linspace(lo: f64, hi: f64, n: usize) -> Result<Self, DataError> {
        let step = if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 };
        Self::new((0..n).map(|i| lo + step * i as f64).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Critical edge `4√(π Δρ)` for an SLD step `delta_sld` (10⁻⁶ Å⁻²).
pub fn critical_q(delta_sld: f64) -> f64 {
    4.0 * (PI * delta_sld * SLD_UNIT).sqrt()
}

/// Perpendicular wavevector in a medium, on the principal branch with a
/// non-negative imaginary part.
fn kz(q: f64, sld: f64, fronting_sld: f64) -> Complex64 {
    let k0 = 0.5 * q;
    let k2 = Complex64::new(k0 * k0 - 4.0 * PI * (sld - fronting_sld) * SLD_UNIT, 0.0);
    let k = k2.sqrt();
    if k.im < 0.0 {
        -k
    } else {
        k
    }
}

/// Model reflectivity `scale·|r(q)|² + background` for each q.
pub fn compute_reflectivity(model: &SlabModel, q: &QGrid) -> Result<Vec<f64>, DataError> {
    model.validate()?;
    Ok(q.values().iter().map(|&qv| reflectivity_at(model, qv)).collect())
}

/// Unchecked single-point evaluation; the caller guarantees a valid model.
pub(crate) fn reflectivity_at(model: &SlabModel, q: f64) -> f64 {
    let rho0 = model.fronting.sld;
    let n = model.layers.len();
    let medium = |j: usize| {
        if j == 0 {
            &model.fronting
        } else if j <= n {
            &model.layers[j - 1]
        } else {
            &model.backing
        }
    };
    // Recursion from the backing upward; `amp` is the reflection amplitude
    // at the top of medium j+1.
    let mut k_below = kz(q, model.backing.sld, rho0);
    let mut amp = Complex64::new(0.0, 0.0);
    for j in (0..=n).rev() {
        let upper = medium(j);
        let lower = medium(j + 1);
        let k_above = kz(q, upper.sld, rho0);
        let sigma = lower.roughness;
        let mut fresnel = (k_above - k_below) / (k_above + k_below);
        if sigma > 0.0 {
            fresnel *= (-2.0 * k_above * k_below * sigma * sigma).exp();
        }
        let phase = if j < n {
            (Complex64::new(0.0, 2.0) * k_below * lower.thickness).exp()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let carried = amp * phase;
        amp = (fresnel + carried) / (1.0 + fresnel * carried);
        k_below = k_above;
    }
    model.scale * amp.norm_sqr() + model.background
}

/// `n` evenly spaced depths covering the whole stack plus four roughness
/// widths (at least 10 Å) either side.
pub fn profile_depths(model: &SlabModel, n: usize) -> Vec<f64> {
    let total: f64 = model.layers.iter().map(|l| l.thickness).sum();
    let rough = model
        .layers
        .iter()
        .chain(std::iter::once(&model.backing))
        .map(|l| l.roughness)
        .fold(0.0, f64::max);
    let pad = (4.0 * rough).max(10.0);
    let (lo, hi) = (-pad, total + pad);
    let n = n.max(2);
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Error-function-broadened SLD profile (10⁻⁶ Å⁻²) at depths `z` (Å).
///
/// The top of the first layer sits at z = 0 and depth increases into the
/// backing. A zero-roughness interface is a step that takes the lower
/// medium's value at the interface itself.
pub fn sld_profile(model: &SlabModel, z: &[f64]) -> Vec<f64> {
    let mut interfaces = Vec::with_capacity(model.layers.len() + 1);
    let mut depth = 0.0;
    let mut above = model.fronting.sld;
    for layer in model.layers.iter().chain(std::iter::once(&model.backing)) {
        interfaces.push((depth, layer.sld - above, layer.roughness));
        depth += layer.thickness;
        above = layer.sld;
    }
    z.iter()
        .map(|&zv| {
            interfaces.iter().fold(model.fronting.sld, |acc, &(zi, step, sigma)| {
                let frac = if sigma > 0.0 {
                    0.5 * (1.0 + erf((zv - zi) / (sigma * std::f64::consts::SQRT_2)))
                } else if zv >= zi {
                    1.0
                } else {
                    0.0
                };
                acc + step * frac
            })
        })
        .collect()
}
