use std::sync::Arc;

use crate::error::{Error, Result};

use super::Grid;

/// Which nodes a field carries values for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    /// Interior and boundary nodes.
    Active,
    /// Interior nodes only (curvature, pressure and other stencil outputs).
    Interior,
}

/// Finite real values on the non-exterior nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<Grid>,
    support: Support,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, support: Support, values: Vec<f64>) -> Result<Self> {
        let want = match support {
            Support::Active => grid.n_active(),
            Support::Interior => grid.n_interior(),
        };
        if values.len() != want {
            return Err(Error::GridMismatch(format!(
                "field has {} values, grid expects {want}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite value {} at node {i}",
                values[i]
            )));
        }
        Ok(Self {
            grid,
            support,
            values,
        })
    }

    pub fn constant(grid: Arc<Grid>, support: Support, c: f64) -> Result<Self> {
        let n = match support {
            Support::Active => grid.n_active(),
            Support::Interior => grid.n_interior(),
        };
        Self::new(grid, support, vec![c; n])
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn interior(&self) -> &[f64] {
        &self.values[..self.grid.n_interior()]
    }

    /// Boundary values; empty for interior-supported fields.
    pub fn boundary(&self) -> &[f64] {
        match self.support {
            Support::Active => &self.values[self.grid.n_interior()..],
            Support::Interior => &[],
        }
    }

    /// Pointwise map, keeping grid and support.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.grid.clone(),
            self.support,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> Result<f64> {
        if !Arc::ptr_eq(&self.grid, &other.grid) && *self.grid != *other.grid {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        let n = self.values.len().min(other.values.len());
        Ok(self.values[..n]
            .iter()
            .zip(&other.values[..n])
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{build_grid, GridKind};

    #[test]
    fn rejects_nan_and_wrong_length() {
        let g = Arc::new(build_grid(GridKind::Radial1d, 1.0, 0.1).unwrap());
        assert!(ScalarField::new(g.clone(), Support::Active, vec![0.0; 3]).is_err());
        let mut v = vec![0.0; g.n_active()];
        v[2] = f64::NAN;
        assert!(ScalarField::new(g.clone(), Support::Active, v).is_err());
        let f = ScalarField::constant(g.clone(), Support::Interior, 2.0).unwrap();
        assert_eq!(f.values().len(), 10);
        assert!(f.boundary().is_empty());
    }
}
