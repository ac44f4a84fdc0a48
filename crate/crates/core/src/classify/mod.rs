//! Nearest-neighbour and random-forest classifiers with accuracy scoring.

mod forest;
mod metrics;
mod nn;

pub use forest::{rf_classify, ForestParams, RandomForest};
pub use metrics::{evaluate, Metrics};
pub use nn::nn_classify;

use crate::cube_io::FeatureMatrix;
use crate::error::{IapError, Result};

fn check_training(x: &FeatureMatrix, y: &[u32]) -> Result<()> {
    if x.rows() == 0 {
        return Err(IapError::invalid("training set is empty"));
    }
    if x.rows() != y.len() {
        return Err(IapError::dims(format!(
            "{} training rows but {} labels",
            x.rows(),
            y.len()
        )));
    }
    Ok(())
}

fn check_query(train: &FeatureMatrix, query: &FeatureMatrix) -> Result<()> {
    if train.cols() != query.cols() {
        return Err(IapError::dims(format!(
            "training features have width {}, query has {}",
            train.cols(),
            query.cols()
        )));
    }
    Ok(())
}
