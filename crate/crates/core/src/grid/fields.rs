//! Value containers for nodal data: scalars and symmetric 2-tensors.

use crate::error::CoreError;
use crate::sym2::Sym2;
use serde::{Deserialize, Serialize};

/// Real values on the interior nodes of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    /// Wraps nodal values, rejecting non-finite entries.
    pub fn new(values: Vec<f64>) -> Result<ScalarField, CoreError> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::InvalidInput(format!(
                "non-finite value at node {i}"
            )));
        }
        Ok(ScalarField { values })
    }

    pub fn constant(c: f64, n: usize) -> ScalarField {
        ScalarField {
            values: vec![c; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// self + s * rhs, elementwise.
    pub fn axpy(&self, s: f64, rhs: &ScalarField) -> ScalarField {
        ScalarField {
            values: self
                .values
                .iter()
                .zip(&rhs.values)
                .map(|(a, b)| a + s * b)
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        ScalarField {
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }
}

/// Chart components of a symmetric 2-tensor per interior node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymTensorField {
    pub t11: Vec<f64>,
    pub t12: Vec<f64>,
    pub t22: Vec<f64>,
}

impl SymTensorField {
    pub fn zeros(n: usize) -> SymTensorField {
        SymTensorField {
            t11: vec![0.0; n],
            t12: vec![0.0; n],
            t22: vec![0.0; n],
        }
    }

    pub fn from_components(
        t11: Vec<f64>,
        t12: Vec<f64>,
        t22: Vec<f64>,
    ) -> Result<SymTensorField, CoreError> {
        if t11.len() != t12.len() || t11.len() != t22.len() {
            return Err(CoreError::FieldLength {
                got: t12.len().max(t22.len()),
                expected: t11.len(),
            });
        }
        Ok(SymTensorField { t11, t12, t22 })
    }

    pub fn len(&self) -> usize {
        self.t11.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t11.is_empty()
    }

    pub fn at(&self, i: usize) -> Sym2 {
        Sym2::new(self.t11[i], self.t12[i], self.t22[i])
    }

    pub fn set(&mut self, i: usize, t: Sym2) {
        self.t11[i] = t.xx;
        self.t12[i] = t.xy;
        self.t22[i] = t.yy;
    }

    pub fn scale(&self, s: f64) -> SymTensorField {
        SymTensorField {
            t11: self.t11.iter().map(|v| v * s).collect(),
            t12: self.t12.iter().map(|v| v * s).collect(),
            t22: self.t22.iter().map(|v| v * s).collect(),
        }
    }

    /// Largest |component| over all nodes.
    pub fn max_abs(&self) -> f64 {
        let m = |v: &Vec<f64>| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        m(&self.t11).max(m(&self.t12)).max(m(&self.t22))
    }
}
