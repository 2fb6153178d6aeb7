//! Monte Carlo statistical behavior of the estimators: shrinking errors with
//! more data, and no systematic bias.

mod common;

use common::*;
use nalgebra::DVector;
use ndsid_core::chain::{build_chain, ChainSpec};
use ndsid_core::generator::{analyze_generator, coefficients};
use ndsid_core::model::check_regularity;
use ndsid_core::simulate::{make_schedule, measure, MeasurePath, ScheduleSpec, SampleDataset};
use ndsid_core::stage1::{estimate_batch, oracle_eta};
use ndsid_core::stage2::run_stage2;

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Noisy steady-state dataset with at least `count` records, trimmed to
/// exactly `count`, all past the settling bound.
fn steady_dataset(
    model: &ndsid_core::model::NdsModel,
    gen: &ndsid_core::generator::InputGenerator,
    t_settle: f64,
    count: usize,
    noise_std: f64,
    seed: u64,
) -> SampleDataset {
    let subs = measured_subsystems(model);
    let n_subs = subs.len().max(1);
    // mean gap 2.55 s over all subsystems, with head room
    let t_end = t_settle + 2.55 * (count as f64) / (n_subs as f64) * 1.3 + 30.0;
    let spec = ScheduleSpec::uniform(subs, t_settle, t_end, 0.1, 5.0);
    let sched = make_schedule(&spec, seed).unwrap();
    assert!(
        sched.len() >= count,
        "window produced {} < {count} samples",
        sched.len()
    );
    let x0 = DVector::zeros(model.dims().m_x);
    let mut ds = measure(
        model,
        gen,
        &x0,
        &sched[..count],
        noise_std,
        seed.wrapping_add(1),
        t_settle,
        MeasurePath::SteadyOnly,
    )
    .unwrap();
    ds.records.truncate(count);
    ds
}

#[test]
fn stage1_is_mean_square_consistent() {
    let model = coupled_pair(0.3);
    let gen = sec5_generator();
    let t_bar = check_regularity(&model, None).settling_bound.unwrap();
    let spec = analyze_generator(&gen).unwrap();
    let coeff = coefficients(&gen, &spec);
    let oracle = oracle_eta(&model, &spec).unwrap();
    let noise_std = 0.3f64.sqrt();

    let counts = [250usize, 1000, 4000];
    let trials = 100;
    let mut medians = Vec::new();
    for (ci, &count) in counts.iter().enumerate() {
        let mut sq_errors: Vec<f64> = Vec::with_capacity(trials);
        for trial in 0..trials {
            let seed = 10_000 + (ci * trials + trial) as u64;
            let ds = steady_dataset(&model, &gen, t_bar, count, noise_std, seed);
            let est = estimate_batch(&ds, &spec, &coeff, model.output_layout()).unwrap();
            sq_errors.push((&est.eta_hat.values - &oracle.values).norm_squared());
        }
        medians.push(median(&mut sq_errors));
    }
    assert!(
        medians[0] > medians[1] && medians[1] > medians[2],
        "median squared errors must shrink: {medians:?}"
    );
}

#[test]
fn stage1_is_unbiased() {
    let model = coupled_pair(0.3);
    let gen = sec5_generator();
    let t_bar = check_regularity(&model, None).settling_bound.unwrap();
    let spec = analyze_generator(&gen).unwrap();
    let coeff = coefficients(&gen, &spec);
    let oracle = oracle_eta(&model, &spec).unwrap();
    let noise_std = 0.3f64.sqrt();

    let trials = 200;
    let count = 2000;
    let dim = oracle.values.len();
    let mut sum = DVector::<f64>::zeros(dim);
    let mut sum_sq = DVector::<f64>::zeros(dim);
    for trial in 0..trials {
        let seed = 77_000 + trial as u64;
        let ds = steady_dataset(&model, &gen, t_bar, count, noise_std, seed);
        let est = estimate_batch(&ds, &spec, &coeff, model.output_layout()).unwrap();
        for i in 0..dim {
            sum[i] += est.eta_hat.values[i];
            sum_sq[i] += est.eta_hat.values[i] * est.eta_hat.values[i];
        }
    }
    for i in 0..dim {
        let mean = sum[i] / trials as f64;
        let var = (sum_sq[i] / trials as f64 - mean * mean).max(0.0);
        let se = (var / trials as f64).sqrt();
        let dev = (mean - oracle.values[i]).abs();
        assert!(
            dev <= 3.0 * se + 1e-12,
            "component {i}: deviation {dev} exceeds 3 SE = {}",
            3.0 * se
        );
    }
}

#[test]
fn two_stage_errors_shrink_with_sample_count() {
    // small chain, moderate noise: medians of both stage errors must fall
    let sys = build_chain(&ChainSpec::new(6, 19)).unwrap();
    let model = sys.assemble().unwrap();
    let gen = sec5_generator();
    let t_bar = check_regularity(&model, None).settling_bound.unwrap();
    let spec = analyze_generator(&gen).unwrap();
    let coeff = coefficients(&gen, &spec);
    let oracle = oracle_eta(&model, &spec).unwrap();
    let noise_std = 0.3f64.sqrt();

    let counts = [500usize, 2000, 8000];
    let trials = 30;
    let mut eta_medians = Vec::new();
    let mut theta_medians = Vec::new();
    for (ci, &count) in counts.iter().enumerate() {
        let mut e_eta: Vec<f64> = Vec::new();
        let mut e_theta: Vec<f64> = Vec::new();
        for trial in 0..trials {
            let seed = 400_000 + (ci * trials + trial) as u64;
            let ds = steady_dataset(&model, &gen, t_bar, count, noise_std, seed);
            let est = estimate_batch(&ds, &spec, &coeff, model.output_layout()).unwrap();
            let report = run_stage2(&model, &gen, &spec, &est.eta_hat, None).unwrap();
            e_eta.push(
                ndsid_core::metrics::relative_error(&est.eta_hat.values, &oracle.values)
                    .unwrap()
                    .value,
            );
            e_theta.push(
                ndsid_core::metrics::relative_error(&report.theta_hat, &sys.theta_true)
                    .unwrap()
                    .value,
            );
        }
        eta_medians.push(median(&mut e_eta));
        theta_medians.push(median(&mut e_theta));
    }
    assert!(
        eta_medians[0] > eta_medians[1] && eta_medians[1] > eta_medians[2],
        "eta medians {eta_medians:?}"
    );
    assert!(
        theta_medians[0] > theta_medians[1] && theta_medians[1] > theta_medians[2],
        "theta medians {theta_medians:?}"
    );
}
