//! Finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, NodeId};
use super::params::{Grads, ParamId, ParamStore};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    pub tolerance: f64,
    /// Check at most this many entries per parameter (sampled), `None` = all.
    pub max_entries_per_param: Option<usize>,
    /// Denominator floor of the relative error; below it the comparison is
    /// effectively absolute.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-5,
            tolerance: 1e-4,
            max_entries_per_param: Some(12),
            floor: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EntryCheck {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub entries: Vec<EntryCheck>,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }

    pub fn worst(&self) -> Option<&EntryCheck> {
        self.entries
            .iter()
            .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }
}

/// Evaluates `loss` on an evaluation graph (dropout off) and returns the
/// loss value with its analytic parameter gradients.
pub fn analytic_grads<F>(store: &ParamStore, loss: &F) -> Result<(f64, Grads)>
where
    F: Fn(&mut Graph) -> NodeId,
{
    let mut g = Graph::new(store);
    let root = loss(&mut g);
    let value = g.scalar(root);
    if !value.is_finite() {
        return Err(Error::Numeric(format!("loss is not finite: {value}")));
    }
    Ok((value, g.backward(root)))
}

fn loss_value<F>(store: &ParamStore, loss: &F) -> Result<f64>
where
    F: Fn(&mut Graph) -> NodeId,
{
    let mut g = Graph::new(store);
    let root = loss(&mut g);
    let v = g.scalar(root);
    if !v.is_finite() {
        return Err(Error::Numeric(format!("perturbed loss is not finite: {v}")));
    }
    Ok(v)
}

/// Compares supplied analytic gradients against central differences.
pub fn compare_with_numeric<F>(
    store: &mut ParamStore,
    params: &[ParamId],
    loss: &F,
    analytic: &Grads,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph) -> NodeId,
{
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut entries = Vec::new();
    for &pid in params {
        let len = store.get(pid).value.len();
        let indices: Vec<usize> = match opts.max_entries_per_param {
            Some(k) if k < len => {
                let mut v = sample(&mut rng, len, k).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..len).collect(),
        };
        let dense = analytic.dense(pid, len);
        for idx in indices {
            let orig = store.get(pid).value.data()[idx];
            store.get_mut(pid).value.data_mut()[idx] = orig + opts.step;
            let plus = loss_value(store, loss);
            store.get_mut(pid).value.data_mut()[idx] = orig - opts.step;
            let minus = loss_value(store, loss);
            store.get_mut(pid).value.data_mut()[idx] = orig;
            let numeric = (plus? - minus?) / (2.0 * opts.step);
            let a = dense[idx];
            let denom = a.abs().max(numeric.abs()).max(opts.floor);
            entries.push(EntryCheck {
                param: store.get(pid).name.clone(),
                index: idx,
                analytic: a,
                numeric,
                rel_error: (a - numeric).abs() / denom,
            });
        }
    }
    let max_rel_error = entries.iter().map(|e| e.rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        entries,
        max_rel_error,
        tolerance: opts.tolerance,
    })
}

/// Full check: analytic gradients from one backward pass versus central
/// differences, for every listed parameter.
pub fn grad_check<F>(
    store: &mut ParamStore,
    params: &[ParamId],
    loss: F,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph) -> NodeId,
{
    let (_, grads) = analytic_grads(store, &loss)?;
    compare_with_numeric(store, params, &loss, &grads, opts)
}
