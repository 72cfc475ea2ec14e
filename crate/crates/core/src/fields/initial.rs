use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Grid, GridKind, ScalarField, Support};

/// Named closed-form conformal factors `u0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum InitialForm {
    Constant { value: f64 },
    /// `log(2 / (1 - |x|^2))`, curvature -1, singular on the unit circle.
    HyperbolicDisk,
    /// `log(2a / (a^2 - |x|^2))` for `a > 1`: curvature -1 and incomplete on the unit disk.
    ScaledHyperbolic { a: f64 },
    /// `v0 = scale * 4 / (1 + |x|^2)^2`; the round sphere when `scale = 1`.
    Sphere {
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

/// Gaussian bump `amplitude * exp(-|x - center|^2 / width^2)` added to `u0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub amplitude: f64,
    pub width: f64,
    pub center: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    #[serde(flatten)]
    pub form: InitialForm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bump: Option<Bump>,
}

impl From<InitialForm> for InitialData {
    fn from(form: InitialForm) -> Self {
        Self { form, bump: None }
    }
}

impl fmt::Display for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.form {
            InitialForm::Constant { value } => write!(f, "constant {value}")?,
            InitialForm::HyperbolicDisk => write!(f, "hyperbolic-disk")?,
            InitialForm::ScaledHyperbolic { a } => write!(f, "scaled-hyperbolic {a}")?,
            InitialForm::Sphere { scale } if scale == 1.0 => write!(f, "sphere")?,
            InitialForm::Sphere { scale } => write!(f, "sphere x{scale}")?,
        }
        if let Some(b) = self.bump {
            write!(f, " + bump {}/{}", b.amplitude, b.width)?;
        }
        Ok(())
    }
}

impl InitialData {
    pub fn validate(&self) -> Result<()> {
        match self.form {
            InitialForm::Constant { value } if !value.is_finite() => {
                return Err(Error::Config("constant initial data must be finite".into()))
            }
            InitialForm::ScaledHyperbolic { a } if !(a > 1.0 && a.is_finite()) => {
                return Err(Error::Config(format!("scaled-hyperbolic needs a > 1, got {a}")))
            }
            InitialForm::Sphere { scale } if !(scale > 0.0 && scale.is_finite()) => {
                return Err(Error::Config(format!("sphere scale must be positive, got {scale}")))
            }
            _ => {}
        }
        if let Some(b) = self.bump {
            if !(b.width > 0.0 && b.amplitude.is_finite() && b.center.iter().all(|c| c.is_finite())) {
                return Err(Error::Config("bump needs finite amplitude and positive width".into()));
            }
        }
        Ok(())
    }

    /// Radius at which the closed form blows up, if any.
    pub fn singular_radius(&self) -> Option<f64> {
        match self.form {
            InitialForm::HyperbolicDisk => Some(1.0),
            InitialForm::ScaledHyperbolic { a } => Some(a),
            _ => None,
        }
    }

    /// Whether the data depend on `|x|` only.
    pub fn is_radial(&self) -> bool {
        self.bump.map_or(true, |b| b.center == [0.0, 0.0])
    }

    pub fn u_at(&self, x: f64, y: f64) -> Result<f64> {
        let r2 = x * x + y * y;
        let base = match self.form {
            InitialForm::Constant { value } => value,
            InitialForm::HyperbolicDisk => {
                if r2 >= 1.0 {
                    return Err(self.singular(r2));
                }
                (2.0 / (1.0 - r2)).ln()
            }
            InitialForm::ScaledHyperbolic { a } => {
                if r2 >= a * a {
                    return Err(self.singular(r2));
                }
                (2.0 * a / (a * a - r2)).ln()
            }
            InitialForm::Sphere { scale } => 0.5 * scale.ln() + 2f64.ln() - r2.ln_1p(),
        };
        let bump = self.bump.map_or(0.0, |b| {
            let d2 = (x - b.center[0]).powi(2) + (y - b.center[1]).powi(2);
            b.amplitude * (-d2 / (b.width * b.width)).exp()
        });
        Ok(base + bump)
    }

    pub fn v_at(&self, x: f64, y: f64) -> Result<f64> {
        Ok((2.0 * self.u_at(x, y)?).exp())
    }

    fn singular(&self, r2: f64) -> Error {
        Error::Singular {
            expr: self.to_string(),
            radius: r2.sqrt(),
        }
    }
}

/// Samples `u0` at every active node.
pub fn evaluate(expr: &InitialData, grid: &Arc<Grid>) -> Result<ScalarField> {
    expr.validate()?;
    if grid.kind() == GridKind::Radial1d && !expr.is_radial() {
        return Err(Error::Config(
            "an off-centre bump cannot be represented on a radial grid".into(),
        ));
    }
    let values = grid
        .active_nodes()
        .iter()
        .map(|n| expr.u_at(n.x, n.y))
        .collect::<Result<Vec<_>>>()?;
    ScalarField::new(grid.clone(), Support::Active, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::build_grid;

    fn radial(r: f64, h: f64) -> Arc<Grid> {
        Arc::new(build_grid(GridKind::Radial1d, r, h).unwrap())
    }

    #[test]
    fn closed_forms_at_sample_points() {
        let hyp = InitialData::from(InitialForm::HyperbolicDisk);
        assert!((hyp.u_at(0.0, 0.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        let sph = InitialData::from(InitialForm::Sphere { scale: 1.0 });
        assert!((sph.v_at(1.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        let c = InitialData::from(InitialForm::Constant { value: 0.0 });
        let f = evaluate(&c, &radial(1.0, 0.1)).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hyperbolic_on_unit_disk_is_singular() {
        let hyp = InitialData::from(InitialForm::HyperbolicDisk);
        let err = evaluate(&hyp, &radial(1.0, 0.125)).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
        assert!(evaluate(&hyp, &radial(0.875, 0.125 / 4.0)).is_ok());
    }

    #[test]
    fn restriction_commutes_with_evaluation() {
        let e = InitialData {
            form: InitialForm::ScaledHyperbolic { a: 1.2 },
            bump: Some(Bump {
                amplitude: 0.3,
                width: 0.2,
                center: [0.0, 0.0],
            }),
        };
        let coarse = evaluate(&e, &radial(0.75, 0.05)).unwrap();
        let fine = evaluate(&e, &radial(0.75, 0.025)).unwrap();
        for (i, v) in coarse.values().iter().enumerate() {
            assert_eq!(*v, fine.values()[2 * i]);
        }
    }

    #[test]
    fn off_centre_bump_needs_cartesian() {
        let e = InitialData {
            form: InitialForm::Constant { value: 0.0 },
            bump: Some(Bump {
                amplitude: 0.3,
                width: 0.2,
                center: [0.1, 0.0],
            }),
        };
        assert!(evaluate(&e, &radial(0.75, 0.05)).is_err());
        let g = Arc::new(build_grid(GridKind::CartesianMaskedDisk, 0.75, 0.05).unwrap());
        assert!(evaluate(&e, &g).is_ok());
    }
}
