//! Nonlinear least-squares baseline.
//!
//! Fits `theta` by minimizing the squared mismatch between measured
//! steady-state samples and the model-predicted steady-state response at a
//! candidate `theta`, with Levenberg-Marquardt on a forward-difference
//! Jacobian. Each cost evaluation re-solves the steady-state equations, so
//! this is the expensive, local-minimum-prone method the two-stage
//! algorithm is compared against.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // f64 intrinsics need the trait only in no_std builds
use num_traits::Float;

use crate::error::{Error, Result};
use crate::generator::InputGenerator;
use crate::metrics;
use crate::model::NdsModel;
use crate::simulate::{solve_sylvester, SampleDataset};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlsOptions {
    pub max_iterations: usize,
    /// Relative cost-decrease tolerance.
    pub cost_tol: f64,
    /// Step-size tolerance relative to `1 + |theta|`.
    pub step_tol: f64,
    /// Forward-difference step `fd_step_rel * (1 + |theta_i|)`.
    pub fd_step_rel: f64,
    /// Cost assigned to candidates where the model cannot be simulated
    /// (ill-posed or colliding); such steps are rejected.
    pub penalty_cost: f64,
}

impl Default for NlsOptions {
    fn default() -> Self {
        NlsOptions {
            max_iterations: 100,
            cost_tol: 1e-12,
            step_tol: 1e-10,
            fd_step_rel: 1e-6,
            penalty_cost: 1e30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlsResult {
    pub theta: DVector<f64>,
    pub iterations: usize,
    /// Final sum of squared residuals.
    pub final_cost: f64,
    /// Relative parameter error after each accepted step (starting with the
    /// initial guess); empty when no truth was supplied.
    pub error_trajectory: Vec<f64>,
}

struct SteadyObservations {
    /// Per record: (output offset, length, generator state at t, measurement).
    entries: Vec<(usize, usize, DVector<f64>, DVector<f64>)>,
    residual_len: usize,
}

fn collect_observations(
    dataset: &SampleDataset,
    nds: &NdsModel,
    gen: &InputGenerator,
) -> Result<SteadyObservations> {
    let steady = dataset.steady_records();
    if steady.is_empty() {
        return Err(Error::InsufficientData);
    }
    let layout = nds.output_layout();
    let mut entries = Vec::with_capacity(steady.len());
    let mut residual_len = 0;
    for rec in steady {
        let (off, len) = layout.slice(rec.subsystem);
        entries.push((off, len, gen.state_at(rec.t), rec.y.clone()));
        residual_len += len;
    }
    Ok(SteadyObservations {
        entries,
        residual_len,
    })
}

/// Steady-state prediction residuals at a candidate theta, or `None` when
/// the candidate cannot be simulated.
fn residuals(
    obs: &SteadyObservations,
    template: &NdsModel,
    gen: &InputGenerator,
    theta: &DVector<f64>,
) -> Option<DVector<f64>> {
    let candidate = template.with_theta(theta).ok()?;
    let sol = solve_sylvester(&candidate, gen).ok()?;
    let mut r = DVector::zeros(obs.residual_len);
    let mut at = 0;
    for (off, len, xi_t, y) in &obs.entries {
        let pred = &sol.yss * xi_t;
        for i in 0..*len {
            r[at + i] = y[i] - pred[off + i];
        }
        at += len;
    }
    Some(r)
}

/// Levenberg-Marquardt fit of the interconnection parameters against the
/// steady-state samples of `dataset`.
///
/// `theta_true`, when given, is only used to record the per-iteration
/// relative error trajectory.
pub fn nls_baseline(
    dataset: &SampleDataset,
    template: &NdsModel,
    gen: &InputGenerator,
    theta_init: &DVector<f64>,
    theta_true: Option<&DVector<f64>>,
    opts: &NlsOptions,
) -> Result<NlsResult> {
    if theta_init.len() != template.topology.n_params() {
        return Err(Error::dim(
            None,
            alloc::format!(
                "theta_init has {} entries for {} parameters",
                theta_init.len(),
                template.topology.n_params()
            ),
        ));
    }
    let obs = collect_observations(dataset, template, gen)?;
    let p = theta_init.len();

    let cost_of = |r: &DVector<f64>| r.norm_squared();
    let track = |traj: &mut Vec<f64>, theta: &DVector<f64>| {
        if let Some(truth) = theta_true {
            if let Ok(e) = metrics::relative_error(theta, truth) {
                traj.push(e.value);
            }
        }
    };

    let mut theta = theta_init.clone();
    let mut r = residuals(&obs, template, gen, &theta)
        .ok_or_else(|| Error::Numerical("initial theta cannot be simulated".into()))?;
    let mut cost = cost_of(&r);
    let mut trajectory = Vec::new();
    track(&mut trajectory, &theta);

    let mut lambda = 1e-3;
    let mut iterations = 0;
    for _ in 0..opts.max_iterations {
        iterations += 1;
        // forward-difference Jacobian, falling back to backward differences
        // when the forward probe is infeasible
        let mut jac = DMatrix::zeros(r.len(), p);
        for i in 0..p {
            let h = opts.fd_step_rel * (1.0 + theta[i].abs());
            let mut shifted = theta.clone();
            shifted[i] += h;
            let (r_shift, signed_h) = match residuals(&obs, template, gen, &shifted) {
                Some(v) => (v, h),
                None => {
                    shifted[i] = theta[i] - h;
                    match residuals(&obs, template, gen, &shifted) {
                        Some(v) => (v, -h),
                        None => {
                            return Err(Error::Numerical(
                                "cannot evaluate Jacobian near current theta".into(),
                            ))
                        }
                    }
                }
            };
            jac.set_column(i, &((&r_shift - &r) / signed_h));
        }
        let grad = jac.transpose() * &r;
        let hessian = jac.transpose() * &jac;

        let mut accepted = false;
        for _ in 0..25 {
            let mut damped = hessian.clone();
            for i in 0..p {
                let d = hessian[(i, i)].max(1e-12);
                damped[(i, i)] += lambda * d;
            }
            let step = match damped.lu().solve(&(-&grad)) {
                Some(s) => s,
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let candidate = &theta + &step;
            let (cand_r, cand_cost) = match residuals(&obs, template, gen, &candidate) {
                Some(v) => {
                    let c = cost_of(&v);
                    (Some(v), c)
                }
                None => (None, opts.penalty_cost),
            };
            if cand_cost < cost {
                let prev_cost = cost;
                theta = candidate;
                r = cand_r.expect("accepted step simulated");
                cost = cand_cost;
                lambda = (lambda / 10.0).max(1e-14);
                track(&mut trajectory, &theta);
                accepted = true;
                let small_decrease = (prev_cost - cost) <= opts.cost_tol * prev_cost.max(1e-30);
                let small_step = step.norm() <= opts.step_tol * (1.0 + theta.norm());
                if small_decrease || small_step {
                    return Ok(NlsResult {
                        theta,
                        iterations,
                        final_cost: cost,
                        error_trajectory: trajectory,
                    });
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e14 {
                break;
            }
        }
        if !accepted {
            break; // stuck: damping exhausted without a downhill step
        }
    }

    Ok(NlsResult {
        theta,
        iterations,
        final_cost: cost,
        error_trajectory: trajectory,
    })
}
