//! Datasets, statistical queries and their empirical statistics.
//!
//! Leave-one-out means and variances are derived from the full-sample values
//! in O(n) total:
//!
//! ```text
//! mean_{-i}       = (n * mean - x_i) / (n - 1)
//! var - var_{-i}  = ((n / (n - 1)) * (x_i - mean)^2 - var) / (n - 1)
//! ```
//!
//! [`leave_one_out_stats`] recomputes a single pair directly on the reduced
//! dataset and is kept as the reference path for those identities.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Ordered sample of `n >= 2` opaque records.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<R> {
    records: Vec<R>,
}

impl<R> Dataset<R> {
    pub fn new(records: Vec<R>) -> Result<Self> {
        if records.len() < 2 {
            return Err(Error::TooFewRecords {
                n: records.len(),
                min: 2,
            });
        }
        Ok(Self { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[R] {
        &self.records
    }

    /// Records with index `i` removed, order preserved.
    ///
    /// The result may hold a single record, so it is returned as a plain
    /// vector rather than a `Dataset`.
    pub fn without(&self, i: usize) -> Result<Vec<R>>
    where
        R: Clone,
    {
        if i >= self.records.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.records.len(),
            });
        }
        let mut out = Vec::with_capacity(self.records.len() - 1);
        out.extend_from_slice(&self.records[..i]);
        out.extend_from_slice(&self.records[i + 1..]);
        Ok(out)
    }
}

/// A map from records into `[0, 1]`.
///
/// The range is not enforced by the trait; [`evaluate_query_stats`] rejects
/// any out-of-range or non-finite value.
pub trait StatisticalQuery<R>: Send + Sync {
    fn id(&self) -> String;
    fn eval(&self, record: &R) -> f64;
}

/// Closure-backed query.
pub struct FnQuery<R> {
    id: String,
    f: Arc<dyn Fn(&R) -> f64 + Send + Sync>,
}

impl<R> FnQuery<R> {
    pub fn new(id: impl Into<String>, f: impl Fn(&R) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            id: id.into(),
            f: Arc::new(f),
        }
    }

    pub fn constant(c: f64) -> Self
    where
        R: 'static,
    {
        Self::new(format!("const({c})"), move |_| c)
    }
}

impl<R> Clone for FnQuery<R> {
    fn clone(&self) -> Self {
        Self {
            id: self.id.clone(),
            f: Arc::clone(&self.f),
        }
    }
}

impl<R> fmt::Debug for FnQuery<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnQuery").field("id", &self.id).finish()
    }
}

impl<R> StatisticalQuery<R> for FnQuery<R> {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn eval(&self, record: &R) -> f64 {
        (self.f)(record)
    }
}

/// Empirical mean and (divisor-n) variance of a query, plus every
/// leave-one-out pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryStats {
    pub mean: f64,
    pub variance: f64,
    pub loo_means: Vec<f64>,
    pub loo_variances: Vec<f64>,
}

impl QueryStats {
    pub fn n(&self) -> usize {
        self.loo_means.len()
    }

    /// Builds the statistics from already-evaluated query values.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::TooFewRecords { n, min: 2 });
        }
        let (mean, variance) = mean_variance(values);
        let nf = n as f64;
        let m1 = nf - 1.0;
        let inflate = nf / m1;
        let mut loo_means = Vec::with_capacity(n);
        let mut loo_variances = Vec::with_capacity(n);
        for &x in values {
            let dev = x - mean;
            // mean - mean_{-i} = dev / (n - 1)
            loo_means.push(mean - dev / m1);
            let var_drop = (inflate * dev * dev - variance) / m1;
            loo_variances.push((variance - var_drop).max(0.0));
        }
        Ok(Self {
            mean,
            variance,
            loo_means,
            loo_variances,
        })
    }
}

/// Two-pass mean and population variance.
pub fn mean_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, variance)
}

/// Evaluates `query` on every record, checking the `[0, 1]` range.
pub fn query_values<R, Q>(records: &[R], query: &Q) -> Result<Vec<f64>>
where
    Q: StatisticalQuery<R> + ?Sized,
{
    records
        .iter()
        .enumerate()
        .map(|(index, r)| {
            let value = query.eval(r);
            if (0.0..=1.0).contains(&value) {
                Ok(value)
            } else {
                Err(Error::QueryRange {
                    query: query.id(),
                    index,
                    value,
                })
            }
        })
        .collect()
}

pub fn evaluate_query_stats<R, Q>(dataset: &Dataset<R>, query: &Q) -> Result<QueryStats>
where
    Q: StatisticalQuery<R> + ?Sized,
{
    let values = query_values(dataset.records(), query)?;
    QueryStats::from_values(&values)
}

/// Mean and variance of `query` on the dataset with record `i` removed,
/// by direct recomputation.
pub fn leave_one_out_stats<R, Q>(dataset: &Dataset<R>, query: &Q, i: usize) -> Result<(f64, f64)>
where
    R: Clone,
    Q: StatisticalQuery<R> + ?Sized,
{
    let reduced = dataset.without(i)?;
    let values = query_values(&reduced, query)?;
    Ok(mean_variance(&values))
}

/// Error of an answer in units of `max(tau * sd, tau^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledError {
    pub raw_error: f64,
    pub scale: f64,
    pub scaled: f64,
}

impl ScaledError {
    pub fn new(raw_error: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(param("scale", scale, "must be positive"));
        }
        Ok(Self {
            raw_error,
            scale,
            scaled: raw_error.abs() / scale,
        })
    }
}

pub fn scaled_error(answer: f64, true_mean: f64, true_sd: f64, tau: f64) -> Result<ScaledError> {
    if !(tau > 0.0) {
        return Err(param("tau", tau, "must be positive"));
    }
    if !(true_sd >= 0.0) {
        return Err(param("true_sd", true_sd, "must be nonnegative"));
    }
    ScaledError::new(answer - true_mean, (tau * true_sd).max(tau * tau))
}
