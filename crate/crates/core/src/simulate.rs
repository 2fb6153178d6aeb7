//! Exact response computation and irregular-sampling data synthesis.
//!
//! The steady-state layer solves the coupled pair
//! `E_bar X = Z`, `A_theta X + [B_xu; D_zu] Pi = Z Xi` by Kronecker
//! vectorization; the transient layer eliminates the internal signals and
//! propagates the augmented (plant + generator) system with a matrix
//! exponential evaluated at each requested timestamp, so non-uniform grids
//! accumulate no stepping error.

use alloc::string::ToString;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
#[allow(unused_imports)] // f64 intrinsics need the trait only in no_std builds
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::generator::{self, GeneratorSpectrum, InputGenerator, SteadyCoefficients};
use crate::linalg;
use crate::model::NdsModel;

/// Solution of the steady-state equations, with `Z` stored as `E_bar X`.
#[derive(Debug, Clone, PartialEq)]
pub struct SylvesterSolution {
    /// `(m_x + m_z) x m_xi`.
    pub x: DMatrix<f64>,
    /// `E_bar X`, same shape.
    pub z: DMatrix<f64>,
    /// Steady-state response matrix `C_theta X + D_yu Pi`, `m_y x m_xi`.
    pub yss: DMatrix<f64>,
    m_x: usize,
    m_z: usize,
    /// Modal cross-check table; absent when the generator is not in modal
    /// form or an interpolation point collides with the pencil spectrum.
    modal: Option<ModalTable>,
}

#[derive(Debug, Clone, PartialEq)]
struct ModalTable {
    spectrum: GeneratorSpectrum,
    coeffs: SteadyCoefficients,
    eta_r: Vec<DVector<f64>>,
    eta_c: Vec<DVector<Complex64>>,
}

impl SylvesterSolution {
    /// Rows of `X` belonging to the differential states.
    pub fn x_top(&self) -> DMatrix<f64> {
        self.x.rows(0, self.m_x).into_owned()
    }

    /// Rows of `X` belonging to the internal outputs.
    pub fn x_btm(&self) -> DMatrix<f64> {
        self.x.rows(self.m_x, self.m_z).into_owned()
    }
}

/// Solves the steady-state equations for the given model/generator pair.
///
/// The Kronecker system `(I ⊗ A_theta − Xi^T ⊗ E_bar) vec(X) = −vec(B Pi)`
/// is solved densely; a singular or badly inconsistent system is reported as
/// an eigenvalue collision together with the nearest offending pair.
pub fn solve_sylvester(nds: &NdsModel, gen: &InputGenerator) -> Result<SylvesterSolution> {
    let d = nds.dims();
    let m_xi = gen.n_states();
    if gen.n_inputs() != d.m_u {
        return Err(Error::dim(
            None,
            alloc::format!(
                "generator drives {} inputs but the model has {}",
                gen.n_inputs(),
                d.m_u
            ),
        ));
    }
    let n = d.m_x + d.m_z;
    let rhs_mat = -(&nds.b_stack * &gen.pi_matrix);
    let rhs = DVector::from_column_slice(rhs_mat.as_slice());

    let kron = DMatrix::identity(m_xi, m_xi).kronecker(&nds.a_theta)
        - gen.xi_matrix.transpose().kronecker(&nds.e_bar);
    let solved = kron.lu().solve(&rhs);

    let x_vec = match solved {
        Some(x) => x,
        None => return Err(collision_error(nds, gen)),
    };
    let x = DMatrix::from_column_slice(n, m_xi, x_vec.as_slice());

    // Residual guard: near-collisions pass the LU but not this.
    let residual = (&nds.a_theta * &x + &nds.b_stack * &gen.pi_matrix
        - &nds.e_bar * &x * &gen.xi_matrix)
        .norm();
    let scale = nds.a_theta.norm() * x.norm()
        + nds.b_stack.norm() * gen.pi_matrix.norm()
        + nds.e_bar.norm() * x.norm() * gen.xi_matrix.norm();
    if residual > 1e-8 * scale.max(f64::MIN_POSITIVE) {
        return Err(collision_error(nds, gen));
    }

    let z = &nds.e_bar * &x;
    let yss = &nds.c_theta * &x + &nds.d_yu * &gen.pi_matrix;

    let modal = build_modal_table(nds, gen);
    Ok(SylvesterSolution {
        x,
        z,
        yss,
        m_x: d.m_x,
        m_z: d.m_z,
        modal,
    })
}

fn build_modal_table(nds: &NdsModel, gen: &InputGenerator) -> Option<ModalTable> {
    let spectrum = generator::analyze_generator(gen).ok()?;
    let coeffs = generator::coefficients(gen, &spectrum);
    let mut eta_r = Vec::with_capacity(spectrum.m_r());
    for (lambda, dir) in spectrum.lambda_r.iter().zip(&spectrum.pi_r) {
        let h = nds.transfer_eval(Complex64::new(*lambda, 0.0)).ok()?;
        let dir_c = dir.map(|x| Complex64::new(x, 0.0));
        eta_r.push((h * dir_c).map(|z| z.re));
    }
    let mut eta_c = Vec::with_capacity(spectrum.m_c());
    for (lambda, dir) in spectrum.lambda_c.iter().zip(&spectrum.pi_c) {
        let h = nds.transfer_eval(*lambda).ok()?;
        eta_c.push(h * dir);
    }
    Some(ModalTable {
        spectrum,
        coeffs,
        eta_r,
        eta_c,
    })
}

fn collision_error(nds: &NdsModel, gen: &InputGenerator) -> Error {
    let xi_eigs = gen.xi_matrix.complex_eigenvalues();
    // A singular A_theta puts zero in the pencil spectrum.
    let pencil = nds
        .finite_pencil_eigenvalues()
        .unwrap_or_else(|| alloc::vec![Complex64::new(0.0, 0.0)]);
    let mut best: Option<(Complex64, Complex64, f64)> = None;
    for xe in xi_eigs.iter() {
        for pe in &pencil {
            let gap = (xe - pe).norm();
            if best.map_or(true, |(_, _, g)| gap < g) {
                best = Some((*xe, *pe, gap));
            }
        }
    }
    match best {
        Some((generator_eigenvalue, pencil_eigenvalue, gap)) => Error::EigenvalueCollision {
            generator_eigenvalue,
            pencil_eigenvalue,
            gap,
        },
        None => Error::Numerical("singular Sylvester system".to_string()),
    }
}

/// `y_s(t) = Yss expm(Xi t) xi(0)`.
///
/// Debug builds cross-check the result against the modal interpolation sum
/// whenever the modal table is available.
pub fn steady_state_response(
    sol: &SylvesterSolution,
    gen: &InputGenerator,
    t: f64,
) -> DVector<f64> {
    let y = &sol.yss * gen.state_at(t);
    #[cfg(debug_assertions)]
    if let Some(table) = &sol.modal {
        let modal = modal_sum(table, t);
        let scale = y.norm().max(modal.norm()).max(1.0);
        // both routes lose ~eps * |lambda| * t to trig/squaring conditioning
        let lam_max = gen.xi_matrix.norm();
        let tol = (1e-9f64).max(1e-15 * lam_max * t.abs());
        debug_assert!(
            (&y - &modal).norm() <= tol * scale,
            "steady-state dual-path mismatch at t = {t}: |diff| = {}",
            (&y - &modal).norm()
        );
    }
    y
}

#[cfg(debug_assertions)]
fn modal_sum(table: &ModalTable, t: f64) -> DVector<f64> {
    let m_y = table
        .eta_r
        .first()
        .map(|v| v.len())
        .or_else(|| table.eta_c.first().map(|v| v.len()))
        .unwrap_or(0);
    let mut y = DVector::zeros(m_y);
    for ((lambda, alpha), eta) in table
        .spectrum
        .lambda_r
        .iter()
        .zip(&table.coeffs.alpha)
        .zip(&table.eta_r)
    {
        y += eta * (alpha * (lambda * t).exp());
    }
    for ((lambda, (mu, nu)), eta) in table
        .spectrum
        .lambda_c
        .iter()
        .zip(table.coeffs.mu.iter().zip(&table.coeffs.nu))
        .zip(&table.eta_c)
    {
        let beta_conj = Complex64::new(*mu, -*nu);
        let w = beta_conj * (lambda * t).exp();
        for i in 0..m_y {
            y[i] += (w * eta[i]).re;
        }
    }
    y
}

/// Ordinary state-space realization with the internal signals eliminated.
#[derive(Debug, Clone, PartialEq)]
pub struct EliminatedRealization {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

/// Eliminates `z` and inverts `E`, turning the descriptor model into
/// `x' = A x + B u, y = C x + D u`.
///
/// Fails with [`Error::UnsupportedDescriptorSimulation`] when `E` is
/// singular and [`Error::WellPosedness`] when `I - D_zv Phi` is.
pub fn eliminated_realization(nds: &NdsModel) -> Result<EliminatedRealization> {
    let d = nds.dims();
    let phi = nds.phi();

    let mut iw = -(&nds.d_zv * &phi);
    for i in 0..d.m_z {
        iw[(i, i)] += 1.0;
    }
    let iw_lu = iw.lu();
    if d.m_z > 0 && !iw_lu.is_invertible() {
        return Err(Error::WellPosedness);
    }
    // W C_zx and W D_zu with W = (I - D_zv Phi)^{-1}
    let wc = if d.m_z > 0 {
        iw_lu.solve(&nds.c_zx).ok_or(Error::WellPosedness)?
    } else {
        DMatrix::zeros(0, d.m_x)
    };
    let wd = if d.m_z > 0 {
        iw_lu.solve(&nds.d_zu).ok_or(Error::WellPosedness)?
    } else {
        DMatrix::zeros(0, d.m_u)
    };

    let e_lu = nds.e.clone().lu();
    if d.m_x > 0 && !e_lu.is_invertible() {
        return Err(Error::UnsupportedDescriptorSimulation);
    }
    let phi_wc = &phi * &wc;
    let phi_wd = &phi * &wd;
    let a_cl = &nds.a_xx + &nds.b_xv * &phi_wc;
    let b_cl = &nds.b_xu + &nds.b_xv * &phi_wd;
    let a = e_lu
        .solve(&a_cl)
        .ok_or(Error::UnsupportedDescriptorSimulation)?;
    let b = e_lu
        .solve(&b_cl)
        .ok_or(Error::UnsupportedDescriptorSimulation)?;
    let c = &nds.c_yx + &nds.d_yv * &phi_wc;
    let d_mat = &nds.d_yu + &nds.d_yv * &phi_wd;
    Ok(EliminatedRealization { a, b, c, d: d_mat })
}

/// Exact transient+steady simulator: plant and generator are stacked into one
/// autonomous system whose exponential is evaluated per timestamp.
#[derive(Debug, Clone)]
pub struct ResponseSimulator {
    augmented: DMatrix<f64>,
    c: DMatrix<f64>,
    d_pi: DMatrix<f64>,
    m_x: usize,
}

impl ResponseSimulator {
    pub fn new(nds: &NdsModel, gen: &InputGenerator) -> Result<Self> {
        let d = nds.dims();
        if gen.n_inputs() != d.m_u {
            return Err(Error::dim(
                None,
                alloc::format!(
                    "generator drives {} inputs but the model has {}",
                    gen.n_inputs(),
                    d.m_u
                ),
            ));
        }
        let real = eliminated_realization(nds)?;
        let m_xi = gen.n_states();
        let n = d.m_x + m_xi;
        let mut augmented = DMatrix::zeros(n, n);
        augmented
            .view_mut((0, 0), (d.m_x, d.m_x))
            .copy_from(&real.a);
        augmented
            .view_mut((0, d.m_x), (d.m_x, m_xi))
            .copy_from(&(&real.b * &gen.pi_matrix));
        augmented
            .view_mut((d.m_x, d.m_x), (m_xi, m_xi))
            .copy_from(&gen.xi_matrix);
        Ok(ResponseSimulator {
            augmented,
            c: real.c,
            d_pi: &real.d * &gen.pi_matrix,
            m_x: d.m_x,
        })
    }

    /// Noise-free output at time `t` from plant state `x0` and generator
    /// state `xi0`.
    pub fn output_at(&self, x0: &DVector<f64>, xi0: &DVector<f64>, t: f64) -> DVector<f64> {
        let mut w0 = DVector::zeros(self.augmented.nrows());
        w0.rows_mut(0, self.m_x).copy_from(x0);
        w0.rows_mut(self.m_x, xi0.len()).copy_from(xi0);
        let w = linalg::expm(&(&self.augmented * t)) * w0;
        let x = w.rows(0, self.m_x).into_owned();
        let xi = w.rows(self.m_x, w.len() - self.m_x).into_owned();
        &self.c * x + &self.d_pi * xi
    }
}

/// Full (transient + steady-state) response at a single time.
pub fn full_response(
    nds: &NdsModel,
    gen: &InputGenerator,
    x0: &DVector<f64>,
    t: f64,
) -> Result<DVector<f64>> {
    let sim = ResponseSimulator::new(nds, gen)?;
    Ok(sim.output_at(x0, &gen.xi0, t))
}

/// Sampling window for one subsystem's independent timeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsystemWindow {
    pub subsystem: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub interval_min: f64,
    pub interval_max: f64,
}

/// Per-subsystem sampling windows; each subsystem draws its own interval
/// sequence, so timelines are mutually unaligned.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleSpec {
    pub windows: Vec<SubsystemWindow>,
}

impl ScheduleSpec {
    /// Same window applied independently to each listed subsystem.
    pub fn uniform(
        subsystems: impl IntoIterator<Item = usize>,
        t_start: f64,
        t_end: f64,
        interval_min: f64,
        interval_max: f64,
    ) -> Self {
        ScheduleSpec {
            windows: subsystems
                .into_iter()
                .map(|subsystem| SubsystemWindow {
                    subsystem,
                    t_start,
                    t_end,
                    interval_min,
                    interval_max,
                })
                .collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.windows.is_empty() {
            return Err(Error::InvalidSchedule("no subsystems to sample".into()));
        }
        for w in &self.windows {
            if !(w.interval_min > 0.0) {
                return Err(Error::InvalidSchedule(alloc::format!(
                    "subsystem {}: interval_min must be positive",
                    w.subsystem
                )));
            }
            if w.interval_max < w.interval_min {
                return Err(Error::InvalidSchedule(alloc::format!(
                    "subsystem {}: interval_max < interval_min",
                    w.subsystem
                )));
            }
            if !(w.t_end > w.t_start) || w.t_start < 0.0 {
                return Err(Error::InvalidSchedule(alloc::format!(
                    "subsystem {}: empty or negative window [{}, {}]",
                    w.subsystem,
                    w.t_start,
                    w.t_end
                )));
            }
        }
        Ok(())
    }
}

/// Draws the merged, time-sorted sampling schedule.
///
/// Each subsystem advances by independent `U[interval_min, interval_max]`
/// steps on its own RNG stream, so the result is deterministic in `seed` and
/// unaffected by the other subsystems in the spec.
pub fn make_schedule(spec: &ScheduleSpec, seed: u64) -> Result<Vec<(usize, f64)>> {
    spec.validate()?;
    let mut out: Vec<(usize, f64)> = Vec::new();
    for w in &spec.windows {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(w.subsystem as u64);
        let mut t = w.t_start + rng.random_range(w.interval_min..=w.interval_max);
        while t <= w.t_end {
            out.push((w.subsystem, t));
            t += rng.random_range(w.interval_min..=w.interval_max);
        }
    }
    out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    if out.is_empty() {
        return Err(Error::InvalidSchedule(
            "window shorter than the minimum sampling interval".into(),
        ));
    }
    Ok(out)
}

/// One measured output vector of one subsystem.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub subsystem: usize,
    pub t: f64,
    pub y: DVector<f64>,
}

/// Timestamped measurement set with the metadata Stage 1 needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDataset {
    /// Sorted by time (ties broken by subsystem index).
    pub records: Vec<SampleRecord>,
    pub noise_variance: f64,
    pub t_settle: f64,
    pub rng_seed: u64,
    /// `||y_t(t_settle)||` when the transient path was available.
    pub transient_bound: Option<f64>,
}

impl SampleDataset {
    /// Index of the first steady-state record (`t >= t_settle`).
    pub fn first_steady_index(&self) -> Option<usize> {
        self.records.iter().position(|r| r.t >= self.t_settle)
    }

    pub fn steady_records(&self) -> &[SampleRecord] {
        match self.first_steady_index() {
            Some(i) => &self.records[i..],
            None => &[],
        }
    }
}

/// How [`measure`] produces the noise-free output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurePath {
    /// Exact transient + steady state; needs invertible `E`.
    Full,
    /// Steady-state response only; valid for samples at `t >= t_settle`,
    /// which is all Stage 1 consumes. The fallback for singular `E`.
    SteadyOnly,
}

/// Samples the model response on `schedule` and adds iid Gaussian noise of
/// standard deviation `noise_std` per scalar channel.
///
/// Noise streams are split per subsystem, so a record's noise depends only
/// on (seed, subsystem, position in that subsystem's timeline).
#[allow(clippy::too_many_arguments)]
pub fn measure(
    nds: &NdsModel,
    gen: &InputGenerator,
    x0: &DVector<f64>,
    schedule: &[(usize, f64)],
    noise_std: f64,
    seed: u64,
    t_settle: f64,
    path: MeasurePath,
) -> Result<SampleDataset> {
    let d = nds.dims();
    if x0.len() != d.m_x {
        return Err(Error::dim(
            None,
            alloc::format!("x0 has length {}, expected {}", x0.len(), d.m_x),
        ));
    }
    let layout = nds.output_layout().clone();
    for &(k, t) in schedule {
        if k >= layout.n_subsystems() {
            return Err(Error::InvalidSchedule(alloc::format!(
                "subsystem index {k} out of range"
            )));
        }
        if t < 0.0 {
            return Err(Error::InvalidSchedule("negative sample time".into()));
        }
    }

    enum Synth {
        Full(ResponseSimulator),
        Steady(SylvesterSolution),
    }
    let synth = match path {
        MeasurePath::Full => Synth::Full(ResponseSimulator::new(nds, gen)?),
        MeasurePath::SteadyOnly => {
            if let Some(&(_, t)) = schedule.iter().find(|&&(_, t)| t < t_settle) {
                return Err(Error::InvalidSchedule(alloc::format!(
                    "steady-only synthesis cannot produce the sample at t = {t} < t_settle = \
                     {t_settle}"
                )));
            }
            Synth::Steady(solve_sylvester(nds, gen)?)
        }
    };

    let transient_bound = match &synth {
        Synth::Full(sim) => solve_sylvester(nds, gen).ok().map(|sol| {
            let yt =
                sim.output_at(x0, &gen.xi0, t_settle) - steady_state_response(&sol, gen, t_settle);
            yt.norm()
        }),
        Synth::Steady(_) => None,
    };

    // Per-subsystem noise streams, consumed in per-subsystem time order.
    let mut per_sub: Vec<Vec<f64>> = alloc::vec![Vec::new(); layout.n_subsystems()];
    for &(k, t) in schedule {
        per_sub[k].push(t);
    }
    for times in &mut per_sub {
        times.sort_by(|a, b| a.total_cmp(b));
    }

    let mut records = Vec::with_capacity(schedule.len());
    for (k, times) in per_sub.iter().enumerate() {
        let (off, len) = layout.slice(k);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        for &t in times {
            let y_full = match &synth {
                Synth::Full(sim) => sim.output_at(x0, &gen.xi0, t),
                Synth::Steady(sol) => steady_state_response(sol, gen, t),
            };
            let mut y = y_full.rows(off, len).into_owned();
            if noise_std > 0.0 {
                for v in y.iter_mut() {
                    let n: f64 = rng.sample(rand_distr::StandardNormal);
                    *v += noise_std * n;
                }
            }
            records.push(SampleRecord { subsystem: k, t, y });
        }
    }
    records.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.subsystem.cmp(&b.subsystem)));

    Ok(SampleDataset {
        records,
        noise_variance: noise_std * noise_std,
        t_settle,
        rng_seed: seed,
        transient_bound,
    })
}
