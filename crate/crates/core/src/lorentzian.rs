//! Closed-form Lorentzian peak algebra.
//!
//! A Lorentzian line `L(x) = w²h / ((x - x0)² + w²)` with half width at half
//! maximum `w`. Subtracting a weighted second derivative, `D_k = L - k L''`,
//! narrows and heightens the peak. `D_k` stays nonnegative everywhere exactly
//! when `k <= 8w²/9`, at which point the peak height is amplified by `25/9`.
//!
//! All closed forms are written for a peak centred at zero and translated.

use crate::error::{Error, Result};

/// Half-width of the verification grid, in units of the peak's HWHM.
pub const GRID_HALF_SPAN_HWHM: f64 = 20.0;
/// Number of samples on the verification grid.
pub const GRID_POINTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzPeak {
    center: f64,
    hwhm: f64,
    height: f64,
}

impl LorentzPeak {
    pub fn new(center: f64, hwhm: f64, height: f64) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::domain(format!("peak center must be finite, got {center}")));
        }
        if !(hwhm > 0.0 && hwhm.is_finite()) {
            return Err(Error::domain(format!("peak hwhm must be positive, got {hwhm}")));
        }
        if !(height > 0.0 && height.is_finite()) {
            return Err(Error::domain(format!("peak height must be positive, got {height}")));
        }
        Ok(Self { center, hwhm, height })
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn hwhm(&self) -> f64 {
        self.hwhm
    }

    /// Full width at half maximum, `2w`.
    pub fn fwhm(&self) -> f64 {
        2.0 * self.hwhm
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn eval(&self, x: f64) -> f64 {
        let u = x - self.center;
        let w2 = self.hwhm * self.hwhm;
        w2 * self.height / (u * u + w2)
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let u = x - self.center;
        let w2 = self.hwhm * self.hwhm;
        let q = u * u + w2;
        2.0 * w2 * self.height * (3.0 * u * u - w2) / (q * q * q)
    }

    /// `L(x) - k L''(x)` in the expanded single-fraction form.
    pub fn sharpened(&self, k: f64, x: f64) -> f64 {
        let u = x - self.center;
        let u2 = u * u;
        let w2 = self.hwhm * self.hwhm;
        let q = u2 + w2;
        let numerator = u2 * u2 + 2.0 * (w2 - 3.0 * k) * u2 + w2 * w2 + 2.0 * k * w2;
        w2 * self.height * numerator / (q * q * q)
    }

    /// The quartic `u⁴ + 2(w²-3k)u² + w⁴ + 2kw²` that fixes the sign of
    /// `D_k` at offset `u` from the center.
    pub fn sharpened_numerator(&self, k: f64, x: f64) -> f64 {
        let w2 = self.hwhm * self.hwhm;
        let u2 = (x - self.center) * (x - self.center);
        u2 * u2 + 2.0 * (w2 - 3.0 * k) * u2 + w2 * w2 + 2.0 * k * w2
    }

    /// Offset `√(3k - w²)` where the sign-fixing numerator is smallest;
    /// present for `k > w²/3`. Nonnegativity of `D_k` is decided here.
    pub fn numerator_min_offset(&self, k: f64) -> Option<f64> {
        let d = 3.0 * k - self.hwhm * self.hwhm;
        (d > 0.0).then(|| d.sqrt())
    }

    /// Offset of the side minimum of `D_k` itself, present for `k > 2w²/3`:
    /// `u² = 6k - w² - 2√(3k(3k - 2w²))`. Below that weight the profile
    /// decreases monotonically away from the center.
    pub fn sharpened_min_offset(&self, k: f64) -> Option<f64> {
        let w2 = self.hwhm * self.hwhm;
        let disc = 3.0 * k * (3.0 * k - 2.0 * w2);
        (k > 2.0 * w2 / 3.0).then(|| (6.0 * k - w2 - 2.0 * disc.sqrt()).sqrt())
    }

    /// Minimum of `D_k` over the symmetric verification grid
    /// `[x0 - 20w, x0 + 20w]` with [`GRID_POINTS`] samples.
    ///
    /// Returns `(argmin, min)`.
    pub fn sharpened_grid_min(&self, k: f64) -> (f64, f64) {
        let half = GRID_HALF_SPAN_HWHM * self.hwhm;
        let step = 2.0 * half / (GRID_POINTS - 1) as f64;
        (0..GRID_POINTS)
            .map(|i| {
                let x = self.center - half + step * i as f64;
                (x, self.sharpened(k, x))
            })
            .fold((self.center, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
    }

    /// Grid spacing used by [`sharpened_grid_min`](Self::sharpened_grid_min).
    pub fn grid_step(&self) -> f64 {
        2.0 * GRID_HALF_SPAN_HWHM * self.hwhm / (GRID_POINTS - 1) as f64
    }
}

/// A sharpening weight tied to the reference half-width it was derived from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharpenWeight {
    k: f64,
    w_ref: f64,
}

impl SharpenWeight {
    /// Checked constructor: requires `0 < k <= 8 w_ref² / 9`.
    pub fn new(k: f64, w_ref: f64) -> Result<Self> {
        let limit = max_safe_weight(w_ref)?;
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::domain(format!("sharpening weight must be positive, got {k}")));
        }
        if k > limit {
            return Err(Error::domain(format!(
                "weight {k} exceeds the nonnegativity bound {limit} for hwhm {w_ref}"
            )));
        }
        Ok(Self { k, w_ref })
    }

    /// Skips the upper bound check. Used by experiments that deliberately
    /// sweep past the bound.
    pub fn new_unchecked(k: f64, w_ref: f64) -> Self {
        Self { k, w_ref }
    }

    /// The largest weight that keeps a Lorentzian of half-width `w_ref`
    /// nonnegative.
    pub fn optimal(w_ref: f64) -> Result<Self> {
        Ok(Self { k: max_safe_weight(w_ref)?, w_ref })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn w_ref(&self) -> f64 {
        self.w_ref
    }

    pub fn is_safe(&self) -> bool {
        self.k <= 8.0 / 9.0 * self.w_ref * self.w_ref
    }

    pub fn factor(&self) -> f64 {
        1.0 + 2.0 * self.k / (self.w_ref * self.w_ref)
    }
}

/// `8w²/9`, the tight upper bound on the sharpening weight.
pub fn max_safe_weight(w: f64) -> Result<f64> {
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::domain(format!("half-width must be positive, got {w}")));
    }
    Ok(8.0 * w * w / 9.0)
}

/// Peak height amplification `1 + 2k/w²`.
pub fn sharpening_factor(w: f64, k: f64) -> Result<f64> {
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::domain(format!("half-width must be positive, got {w}")));
    }
    if !(k >= 0.0) {
        return Err(Error::domain(format!("weight must be nonnegative, got {k}")));
    }
    Ok(1.0 + 2.0 * k / (w * w))
}
