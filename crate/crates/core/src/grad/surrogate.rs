use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurrogateKind {
    Boxcar,
    FastSigmoid,
}

/// Stand-in derivative of the unit step Θ(v) (Θ(0) = 1).
///
/// `Boxcar` passes gradient 1/width where |v| ≤ width/2; `FastSigmoid`
/// passes 1/(1 + slope·|v|)². Each also defines a relaxed forward whose
/// exact derivative is that surrogate, used to check gradients against
/// finite differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateSpec {
    pub kind: SurrogateKind,
    /// Boxcar width or fast-sigmoid slope.
    pub parameter: f64,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        SurrogateSpec {
            kind: SurrogateKind::Boxcar,
            parameter: 1.0,
        }
    }
}

impl SurrogateSpec {
    pub fn boxcar(width: f64) -> Result<Self> {
        let s = SurrogateSpec {
            kind: SurrogateKind::Boxcar,
            parameter: width,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn fast_sigmoid(slope: f64) -> Result<Self> {
        let s = SurrogateSpec {
            kind: SurrogateKind::FastSigmoid,
            parameter: slope,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.parameter.is_finite() || self.parameter <= 0.0 {
            return Err(invalid(format!(
                "surrogate parameter must be > 0, got {}",
                self.parameter
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn step(v: f64) -> f64 {
        if v >= 0.0 {
            1.0
        } else {
            0.0
        }
    }

    #[inline]
    pub fn derivative(&self, v: f64) -> f64 {
        match self.kind {
            SurrogateKind::Boxcar => {
                if v.abs() <= self.parameter / 2.0 {
                    1.0 / self.parameter
                } else {
                    0.0
                }
            }
            SurrogateKind::FastSigmoid => {
                let d = 1.0 + self.parameter * v.abs();
                1.0 / (d * d)
            }
        }
    }

    /// Smooth stand-in for Θ whose derivative is [`Self::derivative`].
    #[inline]
    pub fn relaxed(&self, v: f64) -> f64 {
        match self.kind {
            SurrogateKind::Boxcar => (v / self.parameter + 0.5).clamp(0.0, 1.0),
            SurrogateKind::FastSigmoid => 0.5 + v / (1.0 + self.parameter * v.abs()),
        }
    }
}
