//! Univariate loss families l(v) with first/second derivatives and their
//! worst-case smoothness constants.
//!
//! All families are margin-form: the multivariate loss of observation i is
//! `f_i(x) = l(y_i, w_i' x)`, so every derivative of `f_i` is determined by
//! the scalar margin. The reported constants bound `|l''|` (by `L`) and the
//! Lipschitz modulus of `l''` (by `L_hat`) over all of R, not just the
//! feasible range; problem-level constants are `L * M^2` and `L_hat * M^3`.

use core::fmt;
use core::str::FromStr;

use crate::math;
use crate::UnknownName;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum LossFamily {
    /// l(v) = (y - v)^2 / 2, real labels.
    Quadratic,
    /// l(v) = ln(1 + exp(-y v)), labels in {-1, +1}.
    Logistic,
    /// l(v) = (y - sigmoid(v))^2, labels in {0, 1}. Non-convex.
    SigmoidSquared,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvalidLabel {
    pub family: LossFamily,
    pub label: f64,
}

impl fmt::Display for InvalidLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "label {} is not valid for the {} loss",
            self.label,
            self.family.name()
        )
    }
}

#[cfg(feature = "std")]
impl std::error::Error for InvalidLabel {}

/// Numerically stable 1 / (1 + exp(-z)).
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + math::exp(-z))
    } else {
        let e = math::exp(z);
        e / (1.0 + e)
    }
}

/// ln(1 + exp(t)) without overflow for large t.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + math::ln_1p(math::exp(-t))
    } else {
        math::ln_1p(math::exp(t))
    }
}

impl LossFamily {
    pub fn name(self) -> &'static str {
        match self {
            LossFamily::Quadratic => "quadratic",
            LossFamily::Logistic => "logistic",
            LossFamily::SigmoidSquared => "sigmoid-sq",
        }
    }

    pub fn is_convex(self) -> bool {
        !matches!(self, LossFamily::SigmoidSquared)
    }

    pub fn check_label(self, y: f64) -> Result<(), InvalidLabel> {
        let ok = match self {
            LossFamily::Quadratic => y.is_finite(),
            LossFamily::Logistic => y == 1.0 || y == -1.0,
            LossFamily::SigmoidSquared => y == 0.0 || y == 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(InvalidLabel { family: self, label: y })
        }
    }

    /// l(v); finite for every finite margin.
    pub fn value(self, y: f64, v: f64) -> f64 {
        match self {
            LossFamily::Quadratic => {
                let r = y - v;
                0.5 * r * r
            }
            LossFamily::Logistic => softplus(-y * v),
            LossFamily::SigmoidSquared => {
                let r = y - sigmoid(v);
                r * r
            }
        }
    }

    /// l'(v).
    pub fn d1(self, y: f64, v: f64) -> f64 {
        match self {
            LossFamily::Quadratic => v - y,
            LossFamily::Logistic => -y * sigmoid(-y * v),
            LossFamily::SigmoidSquared => {
                let s = sigmoid(v);
                let s1 = s * (1.0 - s);
                -2.0 * s1 * (y - s)
            }
        }
    }

    /// l''(v).
    pub fn d2(self, y: f64, v: f64) -> f64 {
        match self {
            LossFamily::Quadratic => 1.0,
            LossFamily::Logistic => {
                let s = sigmoid(y * v);
                y * y * s * (1.0 - s)
            }
            LossFamily::SigmoidSquared => {
                let s = sigmoid(v);
                let s1 = s * (1.0 - s);
                let s2 = s1 * (1.0 - 2.0 * s);
                2.0 * s1 * s1 - 2.0 * s2 * (y - s)
            }
        }
    }

    /// l'(v) - l''(v) * v, the per-observation intercept of the affine
    /// gradient model. Closed form per family: for the quadratic loss this is
    /// the constant -y, which keeps no-op Taylor refreshes exact in floating
    /// point.
    pub fn taylor_intercept(self, y: f64, v: f64) -> f64 {
        match self {
            LossFamily::Quadratic => -y,
            _ => self.d1(y, v) - self.d2(y, v) * v,
        }
    }

    /// Univariate (L, L_hat): sup |l''| and the Lipschitz modulus of l''.
    ///
    /// These are not yet scaled by the feature bound; the problem-level
    /// constants are `L * M^2` and `L_hat * M^3`.
    pub fn lipschitz_constants(self) -> (f64, f64) {
        const SQRT3: f64 = 1.732_050_807_568_877_2;
        match self {
            LossFamily::Quadratic => (1.0, 0.0),
            LossFamily::Logistic => (0.25, 1.0 / (6.0 * SQRT3)),
            LossFamily::SigmoidSquared => (
                0.125 + 1.0 / (3.0 * SQRT3),
                1.0 / (4.0 * SQRT3) + 1.0 / 12.0,
            ),
        }
    }
}

impl fmt::Display for LossFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossFamily {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quadratic" => Ok(LossFamily::Quadratic),
            "logistic" => Ok(LossFamily::Logistic),
            "sigmoid-sq" => Ok(LossFamily::SigmoidSquared),
            _ => Err(UnknownName {
                what: "loss family",
                expected: "quadratic|logistic|sigmoid-sq",
            }),
        }
    }
}
