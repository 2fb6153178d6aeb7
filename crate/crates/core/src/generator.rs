//! The autonomous input generator and its modal decomposition.
//!
//! The generator `xi' = Xi xi, u = Pi xi` excites the network; its
//! eigenvalues are the interpolation points and the columns of `Pi T` the
//! tangential directions. The state matrix must be given in real modal
//! coordinates: each coordinate is either a scalar real mode `lambda` or one
//! half of an adjacent 2x2 rotation block `[[sigma, omega], [-omega, sigma]]`.
//! In those coordinates the initial state directly carries the modal
//! amplitudes (`alpha_i` for real modes, `(mu_i, nu_i)` for complex pairs),
//! which is what makes the regressor construction below possible.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
#[allow(unused_imports)] // f64 intrinsics need the trait only in no_std builds
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg;

/// The input-generation system `xi' = Xi xi, u = Pi xi` with initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct InputGenerator {
    pub xi_matrix: DMatrix<f64>,
    pub pi_matrix: DMatrix<f64>,
    pub xi0: DVector<f64>,
}

impl InputGenerator {
    pub fn new(
        xi_matrix: DMatrix<f64>,
        pi_matrix: DMatrix<f64>,
        xi0: DVector<f64>,
    ) -> Result<Self> {
        if xi_matrix.nrows() != xi_matrix.ncols() {
            return Err(Error::dim(None, "Xi must be square"));
        }
        if pi_matrix.ncols() != xi_matrix.nrows() {
            return Err(Error::dim(
                None,
                format!(
                    "Pi has {} columns for a {}-state generator",
                    pi_matrix.ncols(),
                    xi_matrix.nrows()
                ),
            ));
        }
        if xi0.len() != xi_matrix.nrows() {
            return Err(Error::dim(
                None,
                format!(
                    "xi0 has length {} for a {}-state generator",
                    xi0.len(),
                    xi_matrix.nrows()
                ),
            ));
        }
        Ok(InputGenerator {
            xi_matrix,
            pi_matrix,
            xi0,
        })
    }

    pub fn n_states(&self) -> usize {
        self.xi_matrix.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.pi_matrix.nrows()
    }

    /// `u(t) = Pi expm(Xi t) xi(0)`.
    pub fn input_u(&self, t: f64) -> DVector<f64> {
        &self.pi_matrix * self.state_at(t)
    }

    /// `xi(t) = expm(Xi t) xi(0)`.
    pub fn state_at(&self, t: f64) -> DVector<f64> {
        linalg::expm(&(&self.xi_matrix * t)) * &self.xi0
    }
}

/// One mode of the generator in original coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    Real {
        coord: usize,
        lambda: f64,
    },
    /// `sigma +- j omega` (omega > 0) on coordinates `(coord_mu, coord_nu)`
    /// oriented so the block reads `[[sigma, omega], [-omega, sigma]]`.
    Complex {
        coord_mu: usize,
        coord_nu: usize,
        sigma: f64,
        omega: f64,
    },
}

/// Canonically ordered eigenstructure: real modes first (ascending), then
/// complex pairs (ascending omega, then sigma), with the `omega > 0`
/// representative stored for each pair.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpectrum {
    pub lambda_r: Vec<f64>,
    pub lambda_c: Vec<Complex64>,
    /// Tangential directions for real modes (columns of `Pi T`).
    pub pi_r: Vec<DVector<f64>>,
    /// Tangential directions for complex pairs (the conjugate is implicit).
    pub pi_c: Vec<DVector<Complex64>>,
    /// Transform with `Xi = T Lambda T^{-1}`, `Lambda` the canonical diagonal.
    pub t: DMatrix<Complex64>,
    pub t_inv: DMatrix<Complex64>,
    /// `ordering[c]` = original coordinate carried by canonical coordinate `c`.
    pub ordering: Vec<usize>,
}

impl GeneratorSpectrum {
    pub fn m_r(&self) -> usize {
        self.lambda_r.len()
    }

    pub fn m_c(&self) -> usize {
        self.lambda_c.len()
    }

    pub fn m_xi(&self) -> usize {
        self.m_r() + 2 * self.m_c()
    }

    /// Number of regressor entries per output channel, `m_r + 2 m_c`.
    pub fn regressor_len(&self) -> usize {
        self.m_xi()
    }

    /// Canonical diagonal `Lambda` (reals, then each pair as `lambda, conj`).
    pub fn lambda_diag(&self) -> DVector<Complex64> {
        let mut d = DVector::zeros(self.m_xi());
        for (i, &l) in self.lambda_r.iter().enumerate() {
            d[i] = Complex64::new(l, 0.0);
        }
        for (i, &l) in self.lambda_c.iter().enumerate() {
            d[self.m_r() + 2 * i] = l;
            d[self.m_r() + 2 * i + 1] = l.conj();
        }
        d
    }
}

/// Modal amplitudes carried by `xi(0)`: `alpha_i` for real modes and
/// `(mu_i, nu_i)` with amplitude/phase form for complex pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyCoefficients {
    pub alpha: Vec<f64>,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    /// `atan2(nu_i, mu_i)`.
    pub phase: Vec<f64>,
    /// `sqrt(mu_i^2 + nu_i^2)`.
    pub amplitude: Vec<f64>,
}

impl SteadyCoefficients {
    /// True when every mode is excited: all `alpha_i` nonzero and no
    /// `(mu_i, nu_i)` pair simultaneously zero.
    pub fn all_modes_excited(&self) -> bool {
        self.alpha.iter().all(|&a| a != 0.0) && self.amplitude.iter().all(|&a| a != 0.0)
    }
}

/// Decomposes `Xi` into its real modal structure and canonical ordering.
///
/// Fails when `Xi` is not (numerically) in real modal form or when two
/// eigenvalues are closer than `1e-8 * ||Xi||`.
pub fn analyze_generator(gen: &InputGenerator) -> Result<GeneratorSpectrum> {
    let xi = &gen.xi_matrix;
    let n = xi.nrows();
    let scale = xi.norm();
    let off_tol = 1e-10 * scale.max(1.0);

    // Scan for 1x1 real modes and adjacent 2x2 rotation blocks.
    let mut modes: Vec<Mode> = Vec::new();
    let mut i = 0;
    while i < n {
        let pair_coupled =
            i + 1 < n && (xi[(i, i + 1)].abs() > off_tol || xi[(i + 1, i)].abs() > off_tol);
        if pair_coupled {
            let sigma = 0.5 * (xi[(i, i)] + xi[(i + 1, i + 1)]);
            let omega_signed = 0.5 * (xi[(i, i + 1)] - xi[(i + 1, i)]);
            let block_ok = (xi[(i, i)] - xi[(i + 1, i + 1)]).abs() <= off_tol
                && (xi[(i, i + 1)] + xi[(i + 1, i)]).abs() <= off_tol
                && omega_signed.abs() > off_tol;
            if !block_ok {
                return Err(Error::AssumptionViolation(format!(
                    "Xi is not in real modal form at coordinates {i},{} \
                     (expected a [[sigma, omega], [-omega, sigma]] block)",
                    i + 1
                )));
            }
            // Orient so the stored block has omega > 0.
            let (coord_mu, coord_nu, omega) = if omega_signed > 0.0 {
                (i, i + 1, omega_signed)
            } else {
                (i + 1, i, -omega_signed)
            };
            check_row_col_clear(xi, &[i, i + 1], off_tol)?;
            modes.push(Mode::Complex {
                coord_mu,
                coord_nu,
                sigma,
                omega,
            });
            i += 2;
        } else {
            check_row_col_clear(xi, &[i], off_tol)?;
            modes.push(Mode::Real {
                coord: i,
                lambda: xi[(i, i)],
            });
            i += 1;
        }
    }

    // Canonical order: reals ascending, then pairs by (omega, sigma).
    let mut reals: Vec<(usize, f64)> = Vec::new();
    let mut pairs: Vec<(usize, usize, f64, f64)> = Vec::new();
    for m in &modes {
        match *m {
            Mode::Real { coord, lambda } => reals.push((coord, lambda)),
            Mode::Complex {
                coord_mu,
                coord_nu,
                sigma,
                omega,
            } => pairs.push((coord_mu, coord_nu, sigma, omega)),
        }
    }
    reals.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite eigenvalues"));
    pairs.sort_by(|a, b| {
        (a.3, a.2)
            .partial_cmp(&(b.3, b.2))
            .expect("finite eigenvalues")
    });

    check_distinct(&reals, &pairs, scale)?;

    let m_r = reals.len();
    let mut ordering = Vec::with_capacity(n);
    let mut t = DMatrix::<Complex64>::zeros(n, n);
    let mut t_inv = DMatrix::<Complex64>::zeros(n, n);
    let one = Complex64::new(1.0, 0.0);
    let j = Complex64::new(0.0, 1.0);

    for (c, &(coord, _)) in reals.iter().enumerate() {
        ordering.push(coord);
        t[(coord, c)] = one;
        t_inv[(c, coord)] = one;
    }
    for (k, &(coord_mu, coord_nu, _, _)) in pairs.iter().enumerate() {
        ordering.push(coord_mu);
        ordering.push(coord_nu);
        let c = m_r + 2 * k;
        // columns (c, c+1) carry the pair (lambda, conj lambda)
        t[(coord_mu, c)] = one;
        t[(coord_mu, c + 1)] = one;
        t[(coord_nu, c)] = j;
        t[(coord_nu, c + 1)] = -j;
        t_inv[(c, coord_mu)] = 0.5 * one;
        t_inv[(c, coord_nu)] = -0.5 * j;
        t_inv[(c + 1, coord_mu)] = 0.5 * one;
        t_inv[(c + 1, coord_nu)] = 0.5 * j;
    }

    let pi_c64 = gen.pi_matrix.map(|x| Complex64::new(x, 0.0));
    let pi_t = &pi_c64 * &t;
    let pi_r = (0..m_r)
        .map(|c| pi_t.column(c).map(|z| z.re))
        .collect::<Vec<_>>();
    let pi_c = (0..pairs.len())
        .map(|k| pi_t.column(m_r + 2 * k).into_owned())
        .collect::<Vec<_>>();

    Ok(GeneratorSpectrum {
        lambda_r: reals.iter().map(|&(_, l)| l).collect(),
        lambda_c: pairs
            .iter()
            .map(|&(_, _, s, w)| Complex64::new(s, w))
            .collect(),
        pi_r,
        pi_c,
        t,
        t_inv,
        ordering,
    })
}

fn check_row_col_clear(xi: &DMatrix<f64>, coords: &[usize], tol: f64) -> Result<()> {
    let n = xi.nrows();
    for &c in coords {
        for k in 0..n {
            if coords.contains(&k) {
                continue;
            }
            if xi[(c, k)].abs() > tol || xi[(k, c)].abs() > tol {
                return Err(Error::AssumptionViolation(format!(
                    "Xi is not in real modal form: coupling between coordinates {c} and {k}"
                )));
            }
        }
    }
    Ok(())
}

fn check_distinct(
    reals: &[(usize, f64)],
    pairs: &[(usize, usize, f64, f64)],
    scale: f64,
) -> Result<()> {
    let tol = 1e-8 * scale.max(f64::MIN_POSITIVE);
    let mut eigs: Vec<Complex64> = Vec::new();
    for &(_, l) in reals {
        eigs.push(Complex64::new(l, 0.0));
    }
    for &(_, _, s, w) in pairs {
        eigs.push(Complex64::new(s, w));
        eigs.push(Complex64::new(s, -w));
    }
    for a in 0..eigs.len() {
        for b in (a + 1)..eigs.len() {
            let gap = (eigs[a] - eigs[b]).norm();
            if gap < tol {
                return Err(Error::AssumptionViolation(format!(
                    "eigenvalues {} and {} are not distinct (gap {gap:.3e})",
                    eigs[a], eigs[b]
                )));
            }
        }
    }
    Ok(())
}

/// Reads the modal amplitudes out of `xi(0)` through the canonical ordering.
pub fn coefficients(gen: &InputGenerator, spectrum: &GeneratorSpectrum) -> SteadyCoefficients {
    let m_r = spectrum.m_r();
    let alpha: Vec<f64> = (0..m_r).map(|c| gen.xi0[spectrum.ordering[c]]).collect();
    let mut mu = Vec::with_capacity(spectrum.m_c());
    let mut nu = Vec::with_capacity(spectrum.m_c());
    for k in 0..spectrum.m_c() {
        mu.push(gen.xi0[spectrum.ordering[m_r + 2 * k]]);
        nu.push(gen.xi0[spectrum.ordering[m_r + 2 * k + 1]]);
    }
    let phase = mu
        .iter()
        .zip(&nu)
        .map(|(&m, &n)| f64::atan2(n, m))
        .collect();
    let amplitude = mu.iter().zip(&nu).map(|(&m, &n)| m.hypot(n)).collect();
    SteadyCoefficients {
        alpha,
        mu,
        nu,
        phase,
        amplitude,
    }
}

/// Rebuilds `xi(0)` from modal amplitudes; exact inverse of [`coefficients`].
pub fn coefficients_to_xi0(
    spectrum: &GeneratorSpectrum,
    coeffs: &SteadyCoefficients,
) -> DVector<f64> {
    let mut xi0 = DVector::zeros(spectrum.m_xi());
    for (c, &a) in coeffs.alpha.iter().enumerate() {
        xi0[spectrum.ordering[c]] = a;
    }
    let m_r = spectrum.m_r();
    for k in 0..spectrum.m_c() {
        xi0[spectrum.ordering[m_r + 2 * k]] = coeffs.mu[k];
        xi0[spectrum.ordering[m_r + 2 * k + 1]] = coeffs.nu[k];
    }
    xi0
}

/// The time-varying regressor `psi(t)`, length `m_r + 2 m_c`.
///
/// Real modes contribute `alpha_i e^{lambda_i t}`; each complex pair
/// contributes `[A_i cos(omega_i t - phi_i) e^{sigma_i t},
/// -A_i sin(omega_i t - phi_i) e^{sigma_i t}]` with `phi_i = atan2(nu, mu)`.
/// The minus sign in front of `phi_i` is what makes
/// `psi(t) . [Re eta; Im eta]` reproduce `Re{conj(beta) e^{lambda t} eta}`
/// (check at t = 0: the weights are exactly `[mu, nu]`).
pub fn psi(spectrum: &GeneratorSpectrum, coeffs: &SteadyCoefficients, t: f64) -> DVector<f64> {
    let mut out = DVector::zeros(spectrum.regressor_len());
    for (i, (&l, &a)) in spectrum.lambda_r.iter().zip(&coeffs.alpha).enumerate() {
        out[i] = a * (l * t).exp();
    }
    let m_r = spectrum.m_r();
    for (k, lc) in spectrum.lambda_c.iter().enumerate() {
        let amp = coeffs.amplitude[k];
        let phi = coeffs.phase[k];
        let growth = (lc.re * t).exp();
        let angle = lc.im * t - phi;
        out[m_r + 2 * k] = amp * angle.cos() * growth;
        out[m_r + 2 * k + 1] = -amp * angle.sin() * growth;
    }
    out
}
