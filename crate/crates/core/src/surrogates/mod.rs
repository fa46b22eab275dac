//! Surrogate model families: Gaussian process, radial basis function,
//! polynomial response surface and k-nearest neighbors.

pub mod data;
pub mod gp;
pub mod knn;
pub mod prs;
pub mod rbf;

pub use data::TrainingSet;
pub use gp::{fit_gp, GpConfig, GpModel};
pub use knn::{fit_knn, KnnModel};
pub use prs::{fit_prs, PrsModel};
pub use rbf::{fit_rbf, RbfModel};

/// Point prediction in original objective units.
pub trait Surrogate {
    fn predict_value(&self, x: &[f64]) -> f64;
}

impl Surrogate for GpModel {
    fn predict_value(&self, x: &[f64]) -> f64 {
        self.predict_mean(x)
    }
}

impl Surrogate for RbfModel {
    fn predict_value(&self, x: &[f64]) -> f64 {
        self.predict(x)
    }
}

impl Surrogate for PrsModel {
    fn predict_value(&self, x: &[f64]) -> f64 {
        self.predict(x)
    }
}

impl Surrogate for KnnModel {
    fn predict_value(&self, x: &[f64]) -> f64 {
        self.predict(x)
    }
}
