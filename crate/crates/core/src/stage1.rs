//! Stage 1: estimating the right tangential interpolation vector from
//! asynchronous steady-state samples.
//!
//! Every sample `y_k(t)` of any subsystem contributes the linear constraint
//! `y_k(t) = S_k (psi(t)^T ⊗ I_{m_y}) eta_bar + noise`, so measurements taken
//! on unaligned, non-uniform, sub-Nyquist timelines all fuse into one least
//! squares problem for the shared vector `eta_bar`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
#[allow(unused_imports)] // f64 intrinsics need the trait only in no_std builds
use num_traits::Float;

use crate::error::{Error, Result};
use crate::generator::{self, GeneratorSpectrum, SteadyCoefficients};
use crate::linalg;
use crate::model::{NdsModel, SignalLayout};
use crate::simulate::{SampleDataset, SampleRecord};

/// The stacked real interpolation vector
/// `col{eta_r_i; [Re eta_c_i; Im eta_c_i]}`, blockwise per mode, each block
/// of length `m_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationVector {
    pub values: DVector<f64>,
    pub m_r: usize,
    pub m_c: usize,
    pub m_y: usize,
}

impl InterpolationVector {
    pub fn zero(spectrum: &GeneratorSpectrum, m_y: usize) -> Self {
        InterpolationVector {
            values: DVector::zeros(spectrum.regressor_len() * m_y),
            m_r: spectrum.m_r(),
            m_c: spectrum.m_c(),
            m_y,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }

    /// Interpolation at the `i`-th real eigenvalue.
    pub fn eta_r(&self, i: usize) -> DVector<f64> {
        self.values.rows(i * self.m_y, self.m_y).into_owned()
    }

    /// Interpolation at the `i`-th complex eigenvalue (the stored `omega > 0`
    /// representative).
    pub fn eta_c(&self, i: usize) -> DVector<Complex64> {
        let base = (self.m_r + 2 * i) * self.m_y;
        let re = self.values.rows(base, self.m_y);
        let im = self.values.rows(base + self.m_y, self.m_y);
        DVector::from_fn(self.m_y, |r, _| Complex64::new(re[r], im[r]))
    }
}

/// `S_k (psi(t)^T ⊗ I_{m_y})` — the regressor block of one sample.
///
/// Row `r` of the result weights output channel `off_k + r`; the column
/// block for mode `j` is `psi_j(t) * I` restricted to that channel.
pub fn regressor_row(
    spectrum: &GeneratorSpectrum,
    coeffs: &SteadyCoefficients,
    sample: &SampleRecord,
    layout: &SignalLayout,
) -> DMatrix<f64> {
    let psi = generator::psi(spectrum, coeffs, sample.t);
    let (off, len) = layout.slice(sample.subsystem);
    let m_y = layout.total();
    let mut out = DMatrix::zeros(len, psi.len() * m_y);
    for (j, &w) in psi.iter().enumerate() {
        for r in 0..len {
            out[(r, j * m_y + off + r)] = w;
        }
    }
    out
}

/// Batch least-squares estimate of the interpolation vector.
#[derive(Debug, Clone)]
pub struct BatchEstimate {
    pub eta_hat: InterpolationVector,
    pub rank_ok: bool,
    pub residual_norm: f64,
    pub condition_number: f64,
    /// Steady-state samples actually used.
    pub rows_used: usize,
}

/// Stacks the regressors of all steady-state samples (`t >= t_settle`) and
/// solves for `eta_bar` with a rank-revealing factorization.
///
/// `rank_ok` uses the cutoff `1e-10 * sigma_max`; a rank-deficient stack
/// still returns its minimum-norm estimate, flagged, so the caller decides.
pub fn estimate_batch(
    dataset: &SampleDataset,
    spectrum: &GeneratorSpectrum,
    coeffs: &SteadyCoefficients,
    layout: &SignalLayout,
) -> Result<BatchEstimate> {
    let steady = dataset.steady_records();
    if steady.is_empty() {
        return Err(Error::InsufficientData);
    }
    let dim = spectrum.regressor_len() * layout.total();
    let total_rows: usize = steady.iter().map(|r| r.y.len()).sum();
    let mut gamma = DMatrix::zeros(total_rows, dim);
    let mut rhs = DVector::zeros(total_rows);
    let mut row = 0;
    for rec in steady {
        let block = regressor_row(spectrum, coeffs, rec, layout);
        gamma
            .view_mut((row, 0), (block.nrows(), dim))
            .copy_from(&block);
        rhs.rows_mut(row, rec.y.len()).copy_from(&rec.y);
        row += block.nrows();
    }

    let sigma_max = gamma
        .clone()
        .try_svd(false, false, f64::EPSILON, 0)
        .map(|s| s.singular_values.max())
        .unwrap_or(0.0);
    let solved = linalg::lstsq(&gamma, &rhs, Some(1e-10 * sigma_max))?;
    Ok(BatchEstimate {
        eta_hat: InterpolationVector {
            values: solved.solution,
            m_r: spectrum.m_r(),
            m_c: spectrum.m_c(),
            m_y: layout.total(),
        },
        rank_ok: solved.rank_ok,
        residual_norm: solved.residual,
        condition_number: solved.condition,
        rows_used: steady.len(),
    })
}

/// Recursive least-squares state for online interpolation updates.
#[derive(Debug, Clone, PartialEq)]
pub struct RlsState {
    pub estimate: DVector<f64>,
    /// Covariance-like matrix, kept symmetric by construction.
    pub p: DMatrix<f64>,
    /// Samples processed.
    pub k: usize,
}

impl RlsState {
    /// `estimate = 0`, `P = p0_scale * I`. Large `p0_scale` (default 1e8)
    /// recovers the batch estimate in the limit.
    pub fn new(dim: usize, p0_scale: f64) -> Self {
        RlsState {
            estimate: DVector::zeros(dim),
            p: DMatrix::identity(dim, dim) * p0_scale,
            k: 0,
        }
    }

    /// Processes one steady-state sample:
    /// `K = P G^T (G P G^T + I)^{-1}`, `est += K (y - G est)`,
    /// `P = (I - K G) P`, then `P` is re-symmetrized.
    pub fn update(
        &mut self,
        sample: &SampleRecord,
        spectrum: &GeneratorSpectrum,
        coeffs: &SteadyCoefficients,
        layout: &SignalLayout,
        t_settle: f64,
    ) -> Result<()> {
        if sample.t < t_settle {
            return Err(Error::PreSettlingSample {
                t: sample.t,
                t_settle,
            });
        }
        let g = regressor_row(spectrum, coeffs, sample, layout);
        let rows = g.nrows();
        if rows == 0 {
            return Ok(());
        }
        let pg_t = &self.p * g.transpose();
        let mut s = &g * &pg_t;
        for i in 0..rows {
            s[(i, i)] += 1.0;
        }
        let s_inv = s
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular RLS innovation matrix".into()))?;
        let gain = pg_t * s_inv;
        let innovation = &sample.y - &g * &self.estimate;
        self.estimate += &gain * innovation;
        self.p -= &gain * &g * &self.p;
        // keep P symmetric against round-off drift
        let pt = self.p.transpose();
        self.p = (&self.p + pt) * 0.5;
        self.k += 1;
        Ok(())
    }

    pub fn interpolation(
        &self,
        spectrum: &GeneratorSpectrum,
        layout: &SignalLayout,
    ) -> InterpolationVector {
        InterpolationVector {
            values: self.estimate.clone(),
            m_r: spectrum.m_r(),
            m_c: spectrum.m_c(),
            m_y: layout.total(),
        }
    }
}

/// Ground-truth interpolation vector via direct transfer evaluations
/// `eta = H(lambda) pi` at the generator's eigenvalues.
pub fn oracle_eta(nds: &NdsModel, spectrum: &GeneratorSpectrum) -> Result<InterpolationVector> {
    let m_y = nds.dims().m_y;
    let mut values = DVector::zeros(spectrum.regressor_len() * m_y);
    for (i, (lambda, dir)) in spectrum.lambda_r.iter().zip(&spectrum.pi_r).enumerate() {
        let h = nds.transfer_eval(Complex64::new(*lambda, 0.0))?;
        let eta = h * dir.map(|x| Complex64::new(x, 0.0));
        for r in 0..m_y {
            debug_assert!(eta[r].im.abs() <= 1e-10 * (1.0 + eta[r].re.abs()));
            values[i * m_y + r] = eta[r].re;
        }
    }
    for (i, (lambda, dir)) in spectrum.lambda_c.iter().zip(&spectrum.pi_c).enumerate() {
        let h = nds.transfer_eval(*lambda)?;
        let eta = h * dir;
        let base = (spectrum.m_r() + 2 * i) * m_y;
        for r in 0..m_y {
            values[base + r] = eta[r].re;
            values[base + m_y + r] = eta[r].im;
        }
    }
    Ok(InterpolationVector {
        values,
        m_r: spectrum.m_r(),
        m_c: spectrum.m_c(),
        m_y,
    })
}
