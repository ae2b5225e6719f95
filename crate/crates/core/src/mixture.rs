//! Distribution function of a finite mixture of normals plus a point mass at
//! zero, and its jump-aware quantiles.

use std::collections::BTreeMap;

use crate::math::normal_cdf;

/// Absolute tolerance of the quantile bisection.
pub const QUANTILE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalComponent {
    pub weight: f64,
    pub mean: f64,
    pub scale: f64,
}

/// `H(t) = jump * 1[t >= 0] + sum_j w_j * Phi((t - m_j) / s_j)`, weights
/// normalized to total one.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureCdf {
    jump_at_zero: f64,
    components: Vec<NormalComponent>,
}

/// Collects weighted components, merging exact duplicates. A component with
/// zero scale is a point mass at zero and goes into the jump.
#[derive(Debug, Default)]
pub struct MixtureBuilder {
    jump: f64,
    total: f64,
    merged: BTreeMap<(u64, u64), f64>,
}

impl MixtureBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, weight: f64, mean: f64, scale: f64) {
        self.total += weight;
        if scale == 0.0 {
            self.jump += weight;
        } else {
            // -0.0 and 0.0 should merge
            let mean = if mean == 0.0 { 0.0 } else { mean };
            *self
                .merged
                .entry((mean.to_bits(), scale.to_bits()))
                .or_insert(0.0) += weight;
        }
    }

    pub fn build(self) -> MixtureCdf {
        let total = self.total;
        let components = self
            .merged
            .into_iter()
            .map(|((m, s), w)| NormalComponent {
                weight: w / total,
                mean: f64::from_bits(m),
                scale: f64::from_bits(s),
            })
            .collect();
        MixtureCdf {
            jump_at_zero: self.jump / total,
            components,
        }
    }
}

impl MixtureCdf {
    pub fn jump_at_zero(&self) -> f64 {
        self.jump_at_zero
    }

    pub fn components(&self) -> &[NormalComponent] {
        &self.components
    }

    /// The mixture without the point mass, evaluated at `t`.
    pub fn continuous_part(&self, t: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * normal_cdf((t - c.mean) / c.scale))
            .sum()
    }

    /// Right-continuous distribution function.
    pub fn cdf(&self, t: f64) -> f64 {
        let step = if t >= 0.0 { self.jump_at_zero } else { 0.0 };
        (self.continuous_part(t) + step).min(1.0)
    }

    /// Left limit `H(t-)`.
    pub fn cdf_left(&self, t: f64) -> f64 {
        let step = if t > 0.0 { self.jump_at_zero } else { 0.0 };
        (self.continuous_part(t) + step).min(1.0)
    }

    pub fn mean(&self) -> f64 {
        self.components.iter().map(|c| c.weight * c.mean).sum()
    }

    /// `inf{t : H(t) >= q}` for `q` in (0, 1).
    ///
    /// The jump at zero is resolved exactly; elsewhere `H` is continuous and
    /// monotone, so bisection on a bracket is globally safe.
    pub fn quantile(&self, q: f64) -> f64 {
        assert!(q > 0.0 && q < 1.0, "quantile level must lie in (0, 1), got {q}");
        let below_zero = self.continuous_part(0.0);
        let at_zero = below_zero + self.jump_at_zero;
        if self.jump_at_zero > 0.0 && below_zero < q && q <= at_zero {
            return 0.0;
        }
        let (mut lo, mut hi) = self.bracket();
        if below_zero >= q {
            hi = hi.min(0.0);
            while self.cdf(lo) >= q {
                lo -= (hi - lo).max(1.0);
            }
        } else {
            lo = lo.max(0.0);
            while self.cdf(hi) < q {
                hi += (hi - lo).max(1.0);
            }
        }
        // cdf(lo) < q <= cdf(hi)
        while hi - lo > QUANTILE_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) >= q {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// `[min mean - 10 max scale, max mean + 10 max scale]`, widened to contain zero.
    fn bracket(&self) -> (f64, f64) {
        let max_scale = self
            .components
            .iter()
            .map(|c| c.scale)
            .fold(0.0, f64::max);
        let (min_mean, max_mean) = self
            .components
            .iter()
            .fold((0.0f64, 0.0f64), |(lo, hi), c| (lo.min(c.mean), hi.max(c.mean)));
        (min_mean - 10.0 * max_scale, max_mean + 10.0 * max_scale)
    }
}
