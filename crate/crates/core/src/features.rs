//! Per-vertex scalar fields, statistical edge thresholding and display
//! normalisation.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("field has no finite values")]
    EmptyField,
    #[error("sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("power exponent must be positive, got {0}")]
    NonPositiveExponent(f64),
    #[error("unknown {kind} '{value}'")]
    UnknownName { kind: &'static str, value: String },
}

/// Field quantity computed per vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantity {
    /// Spherical volume invariant.
    Svi,
    /// Mean curvature from the volume invariant.
    Mean,
    /// Gauss curvature `κ1 κ2` from the covariance eigenvalues.
    Gauss,
    K1,
    K2,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::Svi => "svi",
            Quantity::Mean => "mean",
            Quantity::Gauss => "gauss",
            Quantity::K1 => "k1",
            Quantity::K2 => "k2",
        }
    }

    /// Whether the quantity needs the moment integrals.
    pub fn needs_moments(self) -> bool {
        matches!(self, Quantity::Gauss | Quantity::K1 | Quantity::K2)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Quantity {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "svi" => Quantity::Svi,
            "mean" => Quantity::Mean,
            "gauss" => Quantity::Gauss,
            "k1" => Quantity::K1,
            "k2" => Quantity::K2,
            _ => {
                return Err(FeatureError::UnknownName {
                    kind: "quantity",
                    value: s.to_string(),
                })
            }
        })
    }
}

/// Diagnostics attached to one vertex of a field.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VertexFlags {
    /// The closed-form `Γ` did not apply and the numeric fallback was used.
    pub bizarre: bool,
    /// The ball region reached a mesh boundary edge (surface not closed).
    pub boundary: bool,
    /// No value could be computed; the stored value is NaN.
    pub failed: bool,
}

impl VertexFlags {
    pub fn any(&self) -> bool {
        self.bizarre || self.boundary || self.failed
    }

    /// `|`-separated marker names, empty when no flag is set.
    pub fn to_text(&self) -> String {
        let mut parts = Vec::new();
        if self.bizarre {
            parts.push("bizarre");
        }
        if self.boundary {
            parts.push("boundary");
        }
        if self.failed {
            parts.push("failed");
        }
        parts.join("|")
    }

    pub fn from_text(s: &str) -> Result<Self, FeatureError> {
        let mut flags = VertexFlags::default();
        for part in s.split('|').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "bizarre" => flags.bizarre = true,
                "boundary" => flags.boundary = true,
                "failed" => flags.failed = true,
                other => {
                    return Err(FeatureError::UnknownName {
                        kind: "flag",
                        value: other.to_string(),
                    })
                }
            }
        }
        Ok(flags)
    }
}

/// One value and one set of flags per mesh vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub radius: f64,
    pub quantity: Quantity,
    pub values: Vec<f64>,
    pub flags: Vec<VertexFlags>,
}

impl ScalarField {
    pub fn new(radius: f64, quantity: Quantity, values: Vec<f64>) -> Self {
        let flags = vec![VertexFlags::default(); values.len()];
        ScalarField {
            radius,
            quantity,
            values,
            flags,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Direction {
    /// Mark values below `mean - sigma std`.
    #[default]
    Below,
    /// Mark values above `mean + sigma std`.
    Above,
}

impl FromStr for Direction {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "below" => Ok(Direction::Below),
            "above" => Ok(Direction::Above),
            _ => Err(FeatureError::UnknownName {
                kind: "direction",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdOptions {
    pub sigma: f64,
    pub direction: Direction,
    /// Leave flagged vertices out of the statistics and the mask.
    pub exclude_flagged: bool,
    /// Fields with `std <= constant_tolerance * max|v|` count as constant and
    /// get an empty mask. Discretisation noise on a smooth closed surface
    /// stays below this.
    pub constant_tolerance: f64,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        ThresholdOptions {
            sigma: 1.0,
            direction: Direction::Below,
            exclude_flagged: false,
            constant_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMask {
    pub mask: Vec<bool>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub threshold: f64,
    /// The field was constant, so the mask is empty.
    pub constant_field: bool,
}

impl EdgeMask {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Marks vertices whose value is more than `sigma` standard deviations below
/// (or above) the mean. Non-finite values never take part.
pub fn threshold_edges(field: &ScalarField, opts: &ThresholdOptions) -> Result<EdgeMask, FeatureError> {
    if !(opts.sigma > 0.0) {
        return Err(FeatureError::NonPositiveSigma(opts.sigma));
    }
    let used = |i: usize| field.values[i].is_finite() && !(opts.exclude_flagged && field.flags[i].any());
    let sample: Vec<f64> = (0..field.len()).filter(|&i| used(i)).map(|i| field.values[i]).collect();
    if sample.is_empty() {
        return Err(FeatureError::EmptyField);
    }
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let std = (sample.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = sample.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let constant_field = std == 0.0 || std <= opts.constant_tolerance * scale;
    let threshold = match opts.direction {
        Direction::Below => mean - opts.sigma * std,
        Direction::Above => mean + opts.sigma * std,
    };
    let mask = (0..field.len())
        .map(|i| {
            !constant_field
                && used(i)
                && match opts.direction {
                    Direction::Below => field.values[i] < threshold,
                    Direction::Above => field.values[i] > threshold,
                }
        })
        .collect();
    Ok(EdgeMask {
        mask,
        mean,
        std,
        threshold,
        constant_field,
    })
}

/// Min-max rescaling to `[0, 1]` followed by `v ↦ v^p`. Negative inputs are
/// clamped to zero first; the second return value counts them. A degenerate
/// range maps every value to 0; non-finite values map to 0.
pub fn power_normalize(field: &ScalarField, p: f64) -> Result<(ScalarField, usize), FeatureError> {
    if !(p > 0.0) {
        return Err(FeatureError::NonPositiveExponent(p));
    }
    let clamped = field.values.iter().filter(|&&v| v < 0.0).count();
    let finite = || field.values.iter().copied().filter(|v| v.is_finite()).map(|v| v.max(0.0));
    let lo = finite().fold(f64::INFINITY, f64::min);
    let hi = finite().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let out = field.map(|v| {
        if !v.is_finite() || !(range > 0.0) {
            0.0
        } else {
            ((v.max(0.0) - lo) / range).clamp(0.0, 1.0).powf(p)
        }
    });
    Ok((out, clamped))
}
