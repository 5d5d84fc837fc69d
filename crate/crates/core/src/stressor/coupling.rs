use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{StressorError, FORMAT_VERSION};
use crate::weather::StandardizedTable;

/// Linear response of every feature to a unit change of the key stressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingCoefficients {
    pub version: u32,
    pub key_stressor: String,
    pub feature_ids: Vec<String>,
    /// Feature units per m/s; direction features are in sine units per m/s.
    pub coefficients: Vec<f64>,
    pub sine_encoded: Vec<bool>,
    /// Number of retained principal components.
    pub retained: usize,
    /// All eigenvalues of the correlation matrix, descending.
    pub eigenvalues: Vec<f64>,
}

impl CouplingCoefficients {
    pub fn get(&self, id: &str) -> Option<f64> {
        self.feature_ids.iter().position(|f| f == id).map(|j| self.coefficients[j])
    }

    pub fn validate(&self) -> Result<(), StressorError> {
        if self.version != FORMAT_VERSION {
            return Err(StressorError::Version(self.version));
        }
        let p = self.feature_ids.len();
        if self.coefficients.len() != p || self.sine_encoded.len() != p {
            return Err(StressorError::Dimension("one coefficient per feature".into()));
        }
        if self.retained == 0 {
            return Err(StressorError::InvalidArgument("at least one component is retained".into()));
        }
        match self.get(&self.key_stressor) {
            Some(c) if c == 1.0 => Ok(()),
            Some(c) => Err(StressorError::InvalidArgument(format!("key stressor coefficient {c} is not 1"))),
            None => Err(StressorError::UnknownKeyStressor(self.key_stressor.clone())),
        }
    }

    pub fn to_json(&self) -> Result<String, StressorError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, StressorError> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }
}

/// Correlation-matrix PCA of the standardized table.
///
/// Components with eigenvalue above 1 are kept (at least one). Each kept
/// eigenvector is oriented so its key-stressor loading is positive, the loadings
/// are combined as `w = Σ λ_i V_i`, mapped back to original units with the
/// column standard deviations, and scaled so the key stressor's slope is 1.
pub fn pca_feature_coupling(std: &StandardizedTable, key_stressor: &str) -> Result<CouplingCoefficients, StressorError> {
    let key = std
        .index_of(key_stressor)
        .ok_or_else(|| StressorError::UnknownKeyStressor(key_stressor.to_string()))?;
    let h = std.rows();
    if h < 2 {
        return Err(StressorError::InvalidArgument(format!("need at least 2 rows, got {h}")));
    }
    let x = &std.values;
    let corr: DMatrix<f64> = (x.transpose() * x) / (h - 1) as f64;
    let eig = SymmetricEigen::new(corr);
    let p = std.cols();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let retained = eigenvalues.iter().filter(|&&l| l > 1.0).count().max(1);

    let mut w = vec![0.0; p];
    for &i in order.iter().take(retained) {
        let v = eig.eigenvectors.column(i);
        let sign = if v[key] != 0.0 {
            v[key].signum()
        } else {
            // no key loading: orient by the largest entry so the sum is well defined
            let big = (0..p).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap();
            v[big].signum()
        };
        for j in 0..p {
            w[j] += eig.eigenvalues[i] * sign * v[j];
        }
    }
    if w[key].abs() < 1e-9 {
        return Err(StressorError::DegenerateKeyLoading(w[key]));
    }
    let denom = w[key] * std.stds[key];
    let mut coefficients: Vec<f64> = (0..p).map(|j| w[j] * std.stds[j] / denom).collect();
    coefficients[key] = 1.0;

    Ok(CouplingCoefficients {
        version: FORMAT_VERSION,
        key_stressor: key_stressor.to_string(),
        feature_ids: std.feature_ids.clone(),
        coefficients,
        sine_encoded: std.sine_encoded.clone(),
        retained,
        eigenvalues,
    })
}
