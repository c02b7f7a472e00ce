//! Sampled spectra and the discrete sharpening operator `s ↦ s - k s''`.

use crate::error::{Error, Result};
use crate::lorentzian::max_safe_weight;

/// A signal sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
    dx: f64,
    origin: f64,
}

impl Spectrum {
    pub fn new(values: Vec<f64>, dx: f64, origin: f64) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::TooShort(values.len()));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::domain(format!("grid spacing must be positive, got {dx}")));
        }
        if !origin.is_finite() {
            return Err(Error::domain("grid origin must be finite"));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("sample {bad} is not finite")));
        }
        Ok(Self { values, dx, origin })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Axis coordinate of sample `i`.
    pub fn axis(&self, i: usize) -> f64 {
        self.origin + self.dx * i as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.values)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }
}

/// A detected local maximum and its measured half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakEstimate {
    pub index: usize,
    pub height: f64,
    pub hwhm_samples: f64,
    pub hwhm_axis: f64,
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Second difference of raw samples on spacing `dx`. Interior points use the
/// three-point central stencil; the two boundary samples use the second-order
/// one-sided stencil `(2s0 - 5s1 + 4s2 - s3)/dx²`. With exactly three samples
/// the single central value is used everywhere.
pub fn second_difference_values(values: &[f64], dx: f64) -> Vec<f64> {
    let p = values.len();
    let inv = 1.0 / (dx * dx);
    let mut out = vec![0.0; p];
    for i in 1..p - 1 {
        out[i] = (values[i - 1] - 2.0 * values[i] + values[i + 1]) * inv;
    }
    if p == 3 {
        out[0] = out[1];
        out[2] = out[1];
    } else {
        out[0] = (2.0 * values[0] - 5.0 * values[1] + 4.0 * values[2] - values[3]) * inv;
        out[p - 1] =
            (2.0 * values[p - 1] - 5.0 * values[p - 2] + 4.0 * values[p - 3] - values[p - 4]) * inv;
    }
    out
}

pub fn second_difference(s: &Spectrum) -> Spectrum {
    Spectrum {
        values: second_difference_values(&s.values, s.dx),
        dx: s.dx,
        origin: s.origin,
    }
}

/// Applies `v - k v''` in place on raw samples and returns how many samples
/// were clamped at zero.
pub(crate) fn sharpen_in_place(values: &mut [f64], dx: f64, k: f64, clamp_negative: bool) -> usize {
    if k == 0.0 {
        return 0;
    }
    let d2 = second_difference_values(values, dx);
    let mut clamped = 0;
    for (v, d) in values.iter_mut().zip(d2) {
        *v -= k * d;
        if clamp_negative && *v < 0.0 {
            *v = 0.0;
            clamped += 1;
        }
    }
    clamped
}

/// Weighted sharpening `s - k s''`.
///
/// `k` is in squared axis units; the second difference is already divided by
/// `dx²`, so results do not depend on the sampling density.
pub fn sharpen(s: &Spectrum, k: f64, clamp_negative: bool) -> Result<Spectrum> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::domain(format!("sharpening weight must be nonnegative, got {k}")));
    }
    let mut values = s.values.clone();
    sharpen_in_place(&mut values, s.dx, k, clamp_negative);
    Ok(Spectrum { values, dx: s.dx, origin: s.origin })
}

/// Finds the narrowest peak among local maxima above `prominence * max(s)`.
///
/// Half-maximum crossings are located by linear interpolation between the
/// bracketing samples. Peaks whose half-maximum crossing runs off either end
/// of the spectrum are skipped. Widths are floored at one sample.
pub fn estimate_min_hwhm(s: &Spectrum, prominence: f64) -> Result<PeakEstimate> {
    if !(prominence > 0.0 && prominence < 1.0) {
        return Err(Error::domain(format!("prominence must lie in (0, 1), got {prominence}")));
    }
    let v = &s.values;
    let threshold = prominence * s.max();
    if !(threshold > 0.0) {
        return Err(Error::PeakNotFound { threshold });
    }
    let p = v.len();
    let mut best: Option<PeakEstimate> = None;
    for i in 1..p - 1 {
        if !(v[i] > threshold && v[i] > v[i - 1] && v[i] >= v[i + 1]) {
            continue;
        }
        let half = 0.5 * v[i];

        let mut l = i;
        while l > 0 && v[l] > half {
            l -= 1;
        }
        if v[l] > half {
            continue;
        }
        let left = l as f64 + (half - v[l]) / (v[l + 1] - v[l]);

        let mut r = i;
        while r < p - 1 && v[r] > half {
            r += 1;
        }
        if v[r] > half {
            continue;
        }
        let right = (r - 1) as f64 + (v[r - 1] - half) / (v[r - 1] - v[r]);

        let hwhm_samples = (0.5 * (right - left)).max(1.0);
        let est = PeakEstimate {
            index: i,
            height: v[i],
            hwhm_samples,
            hwhm_axis: hwhm_samples * s.dx,
        };
        if best.is_none_or(|b| est.hwhm_axis < b.hwhm_axis) {
            best = Some(est);
        }
    }
    best.ok_or(Error::PeakNotFound { threshold })
}

/// `fraction · 8w²/9`.
pub fn suggest_weight(w_estimate: f64, fraction: f64) -> Result<f64> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::domain(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    Ok(fraction * max_safe_weight(w_estimate)?)
}
