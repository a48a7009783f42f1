//! Finite-difference gradient checking.

use rand::Rng;

use crate::params::{ParamId, ParamStore};
use crate::Result;

/// Step used for central differences.
pub const FD_EPSILON: f64 = 1e-4;

/// `|a − b| / max(1e-8, |a| + |b|)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
}

/// Central difference of `loss` with respect to one scalar of one parameter.
pub fn finite_difference(
    store: &ParamStore,
    id: ParamId,
    index: usize,
    eps: f64,
    loss: &impl Fn(&ParamStore) -> Result<f64>,
) -> Result<f64> {
    let mut probe = store.clone();
    let base = probe.value(id).data()[index];
    probe.value_mut(id).data_mut()[index] = base + eps;
    let plus = loss(&probe)?;
    probe.value_mut(id).data_mut()[index] = base - eps;
    let minus = loss(&probe)?;
    Ok((plus - minus) / (2.0 * eps))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    /// Parameter name, flat index, analytic and numeric gradient of the worst entry.
    pub worst: Option<(String, usize, f64, f64)>,
}

/// Compares `analytic` gradients against central differences on `samples`
/// scalars drawn uniformly over all parameter entries (all of them when the
/// store is smaller than `samples`).
pub fn gradcheck(
    store: &ParamStore,
    analytic: &[Vec<f64>],
    samples: usize,
    rng: &mut impl Rng,
    loss: impl Fn(&ParamStore) -> Result<f64>,
) -> Result<GradcheckReport> {
    let mut slots: Vec<(ParamId, usize)> = Vec::new();
    let total = store.num_values();
    if total <= samples {
        for (id, p) in store.iter() {
            slots.extend((0..p.value.len()).map(|i| (id, i)));
        }
    } else {
        let sizes: Vec<(ParamId, usize)> = store.iter().map(|(id, p)| (id, p.value.len())).collect();
        for _ in 0..samples {
            let mut flat = rng.random_range(0..total);
            for &(id, n) in &sizes {
                if flat < n {
                    slots.push((id, flat));
                    break;
                }
                flat -= n;
            }
        }
    }
    let mut report = GradcheckReport {
        checked: 0,
        max_rel_err: 0.0,
        worst: None,
    };
    for (id, i) in slots {
        let numeric = finite_difference(store, id, i, FD_EPSILON, &loss)?;
        let a = analytic[id.0][i];
        let e = rel_err(a, numeric);
        report.checked += 1;
        if e > report.max_rel_err || report.worst.is_none() {
            report.max_rel_err = report.max_rel_err.max(e);
            if e >= report.max_rel_err {
                report.worst = Some((store.get(id).name.clone(), i, a, numeric));
            }
        }
    }
    Ok(report)
}
