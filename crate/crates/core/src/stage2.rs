//! Stage 2: recovering the interconnection parameters from the estimated
//! interpolations.
//!
//! The steady-state equations couple the unknown matrix `X` and the unknown
//! `theta` bilinearly through `Phi(theta) X_btm`. Left-multiplying each
//! equation by an orthonormal basis of the left null space of its parameter
//! coefficient matrix (`M`, `N`, or `Q`) annihilates every `theta_i` term
//! while keeping the known `Phi_0` part, leaving a linear system for `X`.
//! With `X` estimated, the same equations become linear in `theta`.
//!
//! All vectorizations are column-major, matching
//! `vec(A B C) = (C^T ⊗ A) vec(B)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
#[allow(unused_imports)] // f64 intrinsics need the trait only in no_std builds
use num_traits::Float;

use crate::error::{Error, Result};
use crate::generator::{GeneratorSpectrum, InputGenerator};
use crate::linalg;
use crate::model::NdsModel;
use crate::simulate;
use crate::stage1::InterpolationVector;

/// Parameter coefficient matrices and the left null-space bases that
/// annihilate them.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSet {
    /// `[B_xv Phi_1, ..., B_xv Phi_m]`, `m_x x (m_theta m_z)`.
    pub m: DMatrix<f64>,
    /// `[D_zv Phi_1, ..., D_zv Phi_m]`, `m_z x (m_theta m_z)`.
    pub n: DMatrix<f64>,
    /// `[D_yv Phi_1, ..., D_yv Phi_m]`, `m_y x (m_theta m_z)`.
    pub q: DMatrix<f64>,
    /// Orthonormal columns with `u_m2^T m = 0`; `m_x - rank_m` of them.
    pub u_m2: DMatrix<f64>,
    pub u_n2: DMatrix<f64>,
    pub u_q2: DMatrix<f64>,
    pub rank_m: usize,
    pub rank_n: usize,
    pub rank_q: usize,
    pub tolerance_m: f64,
    pub tolerance_n: f64,
    pub tolerance_q: f64,
}

/// Assembles `M`, `N`, `Q` and their left null spaces by SVD.
///
/// `rank_tol` overrides the default `max(rows, cols) * eps * sigma_max`
/// cutoff. A zero coefficient matrix gets the identity as its null basis.
pub fn build_projections(nds: &NdsModel, rank_tol: Option<f64>) -> Result<ProjectionSet> {
    let m_theta = nds.topology.n_params();
    let d = nds.dims();
    let stack = |factor: &DMatrix<f64>, rows: usize| -> DMatrix<f64> {
        let mut out = DMatrix::zeros(rows, m_theta * d.m_z);
        for (i, phi_i) in nds.topology.basis.iter().enumerate() {
            let block = factor * phi_i;
            out.view_mut((0, i * d.m_z), (rows, d.m_z)).copy_from(&block);
        }
        out
    };
    let m = stack(&nds.b_xv, d.m_x);
    let n = stack(&nds.d_zv, d.m_z);
    let q = stack(&nds.d_yv, d.m_y);

    let (u_m2, rank_m) = linalg::left_null_space(&m, rank_tol)?;
    let (u_n2, rank_n) = linalg::left_null_space(&n, rank_tol)?;
    let (u_q2, rank_q) = linalg::left_null_space(&q, rank_tol)?;
    let tol = |mat: &DMatrix<f64>| {
        rank_tol.unwrap_or_else(|| {
            let smax = mat
                .clone()
                .try_svd(false, false, f64::EPSILON, 0)
                .map(|s| if s.singular_values.is_empty() { 0.0 } else { s.singular_values.max() })
                .unwrap_or(0.0);
            linalg::default_rank_tol(mat.nrows(), mat.ncols(), smax)
        })
    };
    Ok(ProjectionSet {
        tolerance_m: tol(&m),
        tolerance_n: tol(&n),
        tolerance_q: tol(&q),
        m,
        n,
        q,
        u_m2,
        u_n2,
        u_q2,
        rank_m,
        rank_n,
        rank_q,
    })
}

/// Rebuilds the steady-state response matrix `[R C] T^{-1}` from an
/// interpolation vector. Returns the real part and the largest imaginary
/// residue (which is round-off for a correctly ordered spectrum).
pub fn yss_from_eta(
    eta: &InterpolationVector,
    spectrum: &GeneratorSpectrum,
) -> (DMatrix<f64>, f64) {
    let m_y = eta.m_y;
    let m_xi = spectrum.m_xi();
    let mut rc = DMatrix::<Complex64>::zeros(m_y, m_xi);
    for i in 0..spectrum.m_r() {
        let col = eta.eta_r(i);
        for r in 0..m_y {
            rc[(r, i)] = Complex64::new(col[r], 0.0);
        }
    }
    for i in 0..spectrum.m_c() {
        let col = eta.eta_c(i);
        let base = spectrum.m_r() + 2 * i;
        for r in 0..m_y {
            rc[(r, base)] = col[r];
            rc[(r, base + 1)] = col[r].conj();
        }
    }
    let yss_c = rc * &spectrum.t_inv;
    let mut residue = 0.0f64;
    for v in yss_c.iter() {
        residue = residue.max(v.im.abs());
    }
    (yss_c.map(|z| z.re), residue)
}

/// The projected linear system `Gamma vec([X_top; X_btm]) = gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct XSystem {
    pub coeffs: DMatrix<f64>,
    pub rhs: DVector<f64>,
    m_x: usize,
    m_z: usize,
    m_xi: usize,
}

/// Assembles the six projected Kronecker blocks and the right-hand side.
///
/// The system depends on `Phi_0` and the fixed subsystem matrices only —
/// never on `theta` (that is the point of the projection).
pub fn build_x_system(
    nds: &NdsModel,
    gen: &InputGenerator,
    proj: &ProjectionSet,
    yss_hat: &DMatrix<f64>,
) -> XSystem {
    let d = nds.dims();
    let m_xi = gen.n_states();
    let eye_xi = DMatrix::<f64>::identity(m_xi, m_xi);
    let phi0 = &nds.topology.phi0;

    let um_a = proj.u_m2.transpose() * &nds.a_xx;
    let um_e = proj.u_m2.transpose() * &nds.e;
    let um_bphi0 = proj.u_m2.transpose() * &nds.b_xv * phi0;
    let un_c = proj.u_n2.transpose() * &nds.c_zx;
    let mut dzphi0_minus_i = &nds.d_zv * phi0;
    for i in 0..d.m_z {
        dzphi0_minus_i[(i, i)] -= 1.0;
    }
    let un_d = proj.u_n2.transpose() * dzphi0_minus_i;
    let uq_c = proj.u_q2.transpose() * &nds.c_yx;
    let uq_dphi0 = proj.u_q2.transpose() * &nds.d_yv * phi0;

    let g11 = eye_xi.kronecker(&um_a) - gen.xi_matrix.transpose().kronecker(&um_e);
    let g12 = eye_xi.kronecker(&um_bphi0);
    let g21 = eye_xi.kronecker(&un_c);
    let g22 = eye_xi.kronecker(&un_d);
    let g31 = eye_xi.kronecker(&uq_c);
    let g32 = eye_xi.kronecker(&uq_dphi0);

    let rows_m = g11.nrows();
    let rows_n = g21.nrows();
    let rows_q = g31.nrows();
    let cols_top = g11.ncols();
    let cols_btm = g12.ncols();
    let mut coeffs = DMatrix::zeros(rows_m + rows_n + rows_q, cols_top + cols_btm);
    coeffs.view_mut((0, 0), (rows_m, cols_top)).copy_from(&g11);
    coeffs
        .view_mut((0, cols_top), (rows_m, cols_btm))
        .copy_from(&g12);
    coeffs
        .view_mut((rows_m, 0), (rows_n, cols_top))
        .copy_from(&g21);
    coeffs
        .view_mut((rows_m, cols_top), (rows_n, cols_btm))
        .copy_from(&g22);
    coeffs
        .view_mut((rows_m + rows_n, 0), (rows_q, cols_top))
        .copy_from(&g31);
    coeffs
        .view_mut((rows_m + rows_n, cols_top), (rows_q, cols_btm))
        .copy_from(&g32);

    let r1 = -(proj.u_m2.transpose() * &nds.b_xu * &gen.pi_matrix);
    let r2 = -(proj.u_n2.transpose() * &nds.d_zu * &gen.pi_matrix);
    let r3 = proj.u_q2.transpose() * (yss_hat - &nds.d_yu * &gen.pi_matrix);
    let mut rhs = DVector::zeros(rows_m + rows_n + rows_q);
    rhs.rows_mut(0, rows_m)
        .copy_from(&DVector::from_column_slice(r1.as_slice()));
    rhs.rows_mut(rows_m, rows_n)
        .copy_from(&DVector::from_column_slice(r2.as_slice()));
    rhs.rows_mut(rows_m + rows_n, rows_q)
        .copy_from(&DVector::from_column_slice(r3.as_slice()));

    XSystem {
        coeffs,
        rhs,
        m_x: d.m_x,
        m_z: d.m_z,
        m_xi,
    }
}

/// Least-squares estimate of the intermediate matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct XEstimate {
    pub x_top: DMatrix<f64>,
    pub x_btm: DMatrix<f64>,
    pub rank_ok: bool,
    pub condition: f64,
    pub residual: f64,
}

/// Solves the projected system and reshapes column-major into the two
/// partitions.
pub fn estimate_x(sys: &XSystem) -> Result<XEstimate> {
    let solved = linalg::lstsq(&sys.coeffs, &sys.rhs, None)?;
    let split = sys.m_x * sys.m_xi;
    let x_top = DMatrix::from_column_slice(
        sys.m_x,
        sys.m_xi,
        &solved.solution.as_slice()[..split],
    );
    let x_btm = DMatrix::from_column_slice(
        sys.m_z,
        sys.m_xi,
        &solved.solution.as_slice()[split..],
    );
    Ok(XEstimate {
        x_top,
        x_btm,
        rank_ok: solved.rank_ok,
        condition: solved.condition,
        residual: solved.residual,
    })
}

/// The linear system `Psi theta = kappa` built at a fixed `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSystem {
    pub psi: DMatrix<f64>,
    pub kappa: DVector<f64>,
}

/// Stacks the three vectorized governing equations, columns indexed by the
/// basis matrices `Phi_i`.
pub fn build_theta_system(
    nds: &NdsModel,
    gen: &InputGenerator,
    x_top: &DMatrix<f64>,
    x_btm: &DMatrix<f64>,
    yss_hat: &DMatrix<f64>,
) -> ThetaSystem {
    let d = nds.dims();
    let m_xi = gen.n_states();
    let m_theta = nds.topology.n_params();
    let phi0 = &nds.topology.phi0;
    let rows1 = d.m_x * m_xi;
    let rows2 = d.m_z * m_xi;
    let rows3 = d.m_y * m_xi;
    let mut psi = DMatrix::zeros(rows1 + rows2 + rows3, m_theta);
    for (i, phi_i) in nds.topology.basis.iter().enumerate() {
        let phix = phi_i * x_btm;
        let c1 = &nds.b_xv * &phix;
        let c2 = &nds.d_zv * &phix;
        let c3 = &nds.d_yv * &phix;
        psi.view_mut((0, i), (rows1, 1))
            .copy_from(&DMatrix::from_column_slice(rows1, 1, c1.as_slice()));
        psi.view_mut((rows1, i), (rows2, 1))
            .copy_from(&DMatrix::from_column_slice(rows2, 1, c2.as_slice()));
        psi.view_mut((rows1 + rows2, i), (rows3, 1))
            .copy_from(&DMatrix::from_column_slice(rows3, 1, c3.as_slice()));
    }

    let phi0_x = phi0 * x_btm;
    let k1 = &nds.e * x_top * &gen.xi_matrix
        - &nds.a_xx * x_top
        - &nds.b_xv * &phi0_x
        - &nds.b_xu * &gen.pi_matrix;
    let k2 = x_btm - &nds.c_zx * x_top - &nds.d_zv * &phi0_x - &nds.d_zu * &gen.pi_matrix;
    let k3 = yss_hat - &nds.c_yx * x_top - &nds.d_yv * &phi0_x - &nds.d_yu * &gen.pi_matrix;
    let mut kappa = DVector::zeros(rows1 + rows2 + rows3);
    kappa
        .rows_mut(0, rows1)
        .copy_from(&DVector::from_column_slice(k1.as_slice()));
    kappa
        .rows_mut(rows1, rows2)
        .copy_from(&DVector::from_column_slice(k2.as_slice()));
    kappa
        .rows_mut(rows1 + rows2, rows3)
        .copy_from(&DVector::from_column_slice(k3.as_slice()));

    ThetaSystem { psi, kappa }
}

/// Least-squares estimate of the parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaEstimate {
    pub theta_hat: DVector<f64>,
    pub rank_ok: bool,
    pub condition: f64,
    pub residual: f64,
}

pub fn estimate_theta(sys: &ThetaSystem) -> Result<ThetaEstimate> {
    let solved = linalg::lstsq(&sys.psi, &sys.kappa, None)?;
    Ok(ThetaEstimate {
        theta_hat: solved.solution,
        rank_ok: solved.rank_ok,
        condition: solved.condition,
        residual: solved.residual,
    })
}

/// Everything the second stage produces, with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage2Report {
    pub yss_hat: DMatrix<f64>,
    /// Imaginary residue truncated when rebuilding `Yss`; values above
    /// 1e-8 indicate a spectrum/ordering problem upstream.
    pub yss_imag_residue: f64,
    pub yss_residue_warning: bool,
    pub x_top: DMatrix<f64>,
    pub x_btm: DMatrix<f64>,
    pub theta_hat: DVector<f64>,
    pub gamma_rank_ok: bool,
    pub gamma_cond: f64,
    pub gamma_residual: f64,
    pub psi_rank_ok: bool,
    pub psi_cond: f64,
    pub psi_residual: f64,
}

/// Runs the full second stage from an estimated interpolation vector.
pub fn run_stage2(
    nds: &NdsModel,
    gen: &InputGenerator,
    spectrum: &GeneratorSpectrum,
    eta_hat: &InterpolationVector,
    rank_tol: Option<f64>,
) -> Result<Stage2Report> {
    let (yss_hat, residue) = yss_from_eta(eta_hat, spectrum);
    let proj = build_projections(nds, rank_tol)?;
    let xsys = build_x_system(nds, gen, &proj, &yss_hat);
    let xest = estimate_x(&xsys)?;
    let tsys = build_theta_system(nds, gen, &xest.x_top, &xest.x_btm, &yss_hat);
    let test = estimate_theta(&tsys)?;
    Ok(Stage2Report {
        yss_imag_residue: residue,
        yss_residue_warning: residue > 1e-8,
        yss_hat,
        x_top: xest.x_top,
        x_btm: xest.x_btm,
        theta_hat: test.theta_hat,
        gamma_rank_ok: xest.rank_ok,
        gamma_cond: xest.condition,
        gamma_residual: xest.residual,
        psi_rank_ok: test.rank_ok,
        psi_cond: test.condition,
        psi_residual: test.residual,
    })
}

/// Design-time identifiability diagnostics computed at the true parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiabilityReport {
    /// All generator modes excited by `xi(0)`.
    pub stage1_pe_hint: bool,
    pub gamma_rank_ok: bool,
    pub gamma_cond: f64,
    /// `Psi(X_true)` full column rank.
    pub psi_rank_at_truth: bool,
    pub psi_cond: f64,
}

impl IdentifiabilityReport {
    pub fn all_ok(&self) -> bool {
        self.stage1_pe_hint && self.gamma_rank_ok && self.psi_rank_at_truth
    }
}

/// Checks the rank conditions of both stages using the exact steady-state
/// solution at the stored (true) theta.
pub fn identifiability_report(
    nds: &NdsModel,
    gen: &InputGenerator,
) -> Result<IdentifiabilityReport> {
    let spectrum = crate::generator::analyze_generator(gen)?;
    let coeffs = crate::generator::coefficients(gen, &spectrum);
    let sol = simulate::solve_sylvester(nds, gen)?;
    let proj = build_projections(nds, None)?;
    let xsys = build_x_system(nds, gen, &proj, &sol.yss);
    let x_solved = linalg::lstsq(&xsys.coeffs, &xsys.rhs, None)?;
    let tsys = build_theta_system(nds, gen, &sol.x_top(), &sol.x_btm(), &sol.yss);
    let sigma = tsys
        .psi
        .clone()
        .try_svd(false, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let smax = if sigma.singular_values.is_empty() {
        0.0
    } else {
        sigma.singular_values.max()
    };
    let smin = if sigma.singular_values.is_empty() {
        0.0
    } else {
        sigma.singular_values.min()
    };
    let tol = linalg::default_rank_tol(tsys.psi.nrows(), tsys.psi.ncols(), smax);
    let rank = sigma.singular_values.iter().filter(|&&s| s > tol).count();
    Ok(IdentifiabilityReport {
        stage1_pe_hint: coeffs.all_modes_excited(),
        gamma_rank_ok: x_solved.rank_ok,
        gamma_cond: x_solved.condition,
        psi_rank_at_truth: rank == tsys.psi.ncols(),
        psi_cond: if smin > 0.0 { smax / smin } else { f64::INFINITY },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::tests::sec5_generator;
    use crate::generator::analyze_generator;
    use crate::model::tests::coupled_pair;
    use crate::stage1::oracle_eta;
    use approx::assert_relative_eq;

    fn setup() -> (
        crate::model::NdsModel,
        InputGenerator,
        GeneratorSpectrum,
    ) {
        let m = coupled_pair(0.3);
        let gen = sec5_generator();
        let spec = analyze_generator(&gen).unwrap();
        (m, gen, spec)
    }

    #[test]
    fn projection_annihilates_every_basis_term() {
        let (m, ..) = setup();
        let proj = build_projections(&m, None).unwrap();
        for phi_i in &m.topology.basis {
            assert!((proj.u_m2.transpose() * &m.b_xv * phi_i).norm() < 1e-10);
            assert!((proj.u_n2.transpose() * &m.d_zv * phi_i).norm() < 1e-10);
            assert!((proj.u_q2.transpose() * &m.d_yv * phi_i).norm() < 1e-10);
        }
        // orthonormality
        let eye = DMatrix::identity(proj.u_m2.ncols(), proj.u_m2.ncols());
        assert_relative_eq!(proj.u_m2.transpose() * &proj.u_m2, eye, epsilon = 1e-12);
    }

    #[test]
    fn zero_coefficient_matrices_get_identity_bases() {
        // coupled_pair has D_zv = 0 and D_yv = 0
        let (m, ..) = setup();
        let proj = build_projections(&m, None).unwrap();
        let d = m.dims();
        assert_eq!(proj.rank_n, 0);
        assert_eq!(proj.u_n2, DMatrix::identity(d.m_z, d.m_z));
        assert_eq!(proj.rank_q, 0);
        assert_eq!(proj.u_q2, DMatrix::identity(d.m_y, d.m_y));
    }

    #[test]
    fn yss_roundtrip_through_eta() {
        let (m, gen, spec) = setup();
        let sol = simulate::solve_sylvester(&m, &gen).unwrap();
        let eta = oracle_eta(&m, &spec).unwrap();
        let (yss_hat, residue) = yss_from_eta(&eta, &spec);
        assert!(residue < 1e-10);
        assert_relative_eq!(yss_hat, sol.yss, max_relative = 1e-9);
    }

    #[test]
    fn yss_from_zero_eta_is_zero() {
        let (_, _, spec) = setup();
        let eta = InterpolationVector::zero(&spec, 2);
        let (yss, residue) = yss_from_eta(&eta, &spec);
        assert_eq!(yss, DMatrix::zeros(2, 2));
        assert_eq!(residue, 0.0);
    }

    #[test]
    fn yss_single_real_mode_is_the_eta_column() {
        let gen = InputGenerator::new(
            DMatrix::from_element(1, 1, -0.5),
            DMatrix::identity(1, 1),
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        let spec = analyze_generator(&gen).unwrap();
        let eta = InterpolationVector {
            values: DVector::from_row_slice(&[3.25, -1.5]),
            m_r: 1,
            m_c: 0,
            m_y: 2,
        };
        let (yss, _) = yss_from_eta(&eta, &spec);
        assert_eq!(yss, DMatrix::from_column_slice(2, 1, &[3.25, -1.5]));
    }

    #[test]
    fn true_x_satisfies_projected_system() {
        let (m, gen, spec) = setup();
        let sol = simulate::solve_sylvester(&m, &gen).unwrap();
        let eta = oracle_eta(&m, &spec).unwrap();
        let (yss_hat, _) = yss_from_eta(&eta, &spec);
        let proj = build_projections(&m, None).unwrap();
        let sys = build_x_system(&m, &gen, &proj, &yss_hat);
        // stacked as [vec(X_top); vec(X_btm)], not vec of the full matrix
        let x_top = sol.x_top();
        let x_btm = sol.x_btm();
        let mut x_vec = DVector::zeros(x_top.len() + x_btm.len());
        x_vec
            .rows_mut(0, x_top.len())
            .copy_from(&DVector::from_column_slice(x_top.as_slice()));
        x_vec
            .rows_mut(x_top.len(), x_btm.len())
            .copy_from(&DVector::from_column_slice(x_btm.as_slice()));
        let res = (&sys.coeffs * x_vec - &sys.rhs).norm();
        assert!(
            res <= 1e-9 * sys.rhs.norm().max(1e-30),
            "residual {res} vs |rhs| {}",
            sys.rhs.norm()
        );
    }

    #[test]
    fn gamma_never_depends_on_theta() {
        let (m, gen, spec) = setup();
        let sol = simulate::solve_sylvester(&m, &gen).unwrap();
        let eta = oracle_eta(&m, &spec).unwrap();
        let (yss_hat, _) = yss_from_eta(&eta, &spec);
        let proj = build_projections(&m, None).unwrap();
        let sys_a = build_x_system(&m, &gen, &proj, &yss_hat);

        let other = m.with_theta(&DVector::from_row_slice(&[0.71])).unwrap();
        let proj_b = build_projections(&other, None).unwrap();
        // Yss kept from the ORIGINAL theta on purpose
        let sys_b = build_x_system(&other, &gen, &proj_b, &yss_hat);
        assert_relative_eq!(sys_a.coeffs, sys_b.coeffs, epsilon = 1e-14);
        assert_relative_eq!(sys_a.rhs, sys_b.rhs, epsilon = 1e-14);
        let _ = sol;
    }

    #[test]
    fn x_system_shape_audit() {
        let (m, gen, ..) = setup();
        let proj = build_projections(&m, None).unwrap();
        let sys = build_x_system(&m, &gen, &proj, &DMatrix::zeros(2, 2));
        let d = m.dims();
        let m_xi = gen.n_states();
        assert_eq!(sys.coeffs.ncols(), m_xi * (d.m_x + d.m_z));
        let expected_rows = m_xi
            * ((d.m_x - proj.rank_m) + (d.m_z - proj.rank_n) + (d.m_y - proj.rank_q));
        assert_eq!(sys.coeffs.nrows(), expected_rows);
    }

    #[test]
    fn exact_yss_recovers_true_x_and_theta() {
        let (m, gen, spec) = setup();
        let sol = simulate::solve_sylvester(&m, &gen).unwrap();
        let eta = oracle_eta(&m, &spec).unwrap();
        let report = run_stage2(&m, &gen, &spec, &eta, None).unwrap();
        assert!(report.gamma_rank_ok, "Gamma must be full rank here");
        assert!(report.psi_rank_ok);
        assert!(!report.yss_residue_warning);
        assert_relative_eq!(report.x_top, sol.x_top(), max_relative = 1e-8, epsilon = 1e-10);
        assert_relative_eq!(report.x_btm, sol.x_btm(), max_relative = 1e-8, epsilon = 1e-10);
        assert_relative_eq!(
            report.theta_hat[0],
            m.topology.theta[0],
            max_relative = 1e-6
        );
    }

    #[test]
    fn theta_system_holds_at_truth() {
        let (m, gen, _) = setup();
        let sol = simulate::solve_sylvester(&m, &gen).unwrap();
        let tsys = build_theta_system(&m, &gen, &sol.x_top(), &sol.x_btm(), &sol.yss);
        let res = (&tsys.psi * &m.topology.theta - &tsys.kappa).norm();
        assert!(res <= 1e-9 * tsys.kappa.norm().max(1e-30));
    }

    #[test]
    fn synthetic_kappa_recovers_exactly() {
        let (m, gen, _) = setup();
        let sol = simulate::solve_sylvester(&m, &gen).unwrap();
        let mut tsys = build_theta_system(&m, &gen, &sol.x_top(), &sol.x_btm(), &sol.yss);
        let theta0 = DVector::from_row_slice(&[0.42]);
        tsys.kappa = &tsys.psi * &theta0;
        let est = estimate_theta(&tsys).unwrap();
        assert_relative_eq!(est.theta_hat, theta0, max_relative = 1e-12);
        assert!(est.rank_ok);
    }

    #[test]
    fn all_zero_basis_is_flagged_unidentifiable() {
        let (m, gen, _) = setup();
        let mut degenerate = m.clone();
        degenerate.topology.basis = alloc::vec![DMatrix::zeros(2, 2)];
        let sol = simulate::solve_sylvester(&m, &gen).unwrap();
        let tsys = build_theta_system(&degenerate, &gen, &sol.x_top(), &sol.x_btm(), &sol.yss);
        assert_eq!(tsys.psi, DMatrix::zeros(tsys.psi.nrows(), 1));
        let est = estimate_theta(&tsys).unwrap();
        assert!(!est.rank_ok);

        let rep = identifiability_report(&degenerate, &gen).unwrap();
        assert!(!rep.psi_rank_at_truth);
    }

    #[test]
    fn identifiability_on_good_model() {
        let (m, gen, _) = setup();
        let rep = identifiability_report(&m, &gen).unwrap();
        assert!(rep.stage1_pe_hint);
        assert!(rep.gamma_rank_ok);
        assert!(rep.psi_rank_at_truth);
        assert!(rep.all_ok());
        assert!(rep.gamma_cond.is_finite());
        assert!(rep.psi_cond.is_finite());
    }

    #[test]
    fn dead_mode_in_xi0_breaks_pe_hint() {
        let (m, mut gen, _) = setup();
        gen.xi0 = DVector::zeros(2);
        let rep = identifiability_report(&m, &gen).unwrap();
        assert!(!rep.stage1_pe_hint);
    }

    #[test]
    fn error_scales_linearly_in_yss_perturbation() {
        let (m, gen, spec) = setup();
        let eta = oracle_eta(&m, &spec).unwrap();
        let theta_true = m.topology.theta.clone();
        // fixed perturbation direction
        let delta = DMatrix::from_row_slice(2, 2, &[0.3, -0.9, 0.55, 0.2]);
        let mut errs = alloc::vec::Vec::new();
        let scales = [1e-4, 1e-3, 1e-2];
        for &eps in &scales {
            let (yss, _) = yss_from_eta(&eta, &spec);
            let yss_pert = yss + &delta * eps;
            let proj = build_projections(&m, None).unwrap();
            let sys = build_x_system(&m, &gen, &proj, &yss_pert);
            let xest = estimate_x(&sys).unwrap();
            let tsys = build_theta_system(&m, &gen, &xest.x_top, &xest.x_btm, &yss_pert);
            let test = estimate_theta(&tsys).unwrap();
            errs.push((&test.theta_hat - &theta_true).norm());
        }
        // log-log slope over the three points
        let slope = ((errs[2] / errs[0]).ln()) / ((scales[2] / scales[0]).ln());
        assert!(
            (slope - 1.0).abs() <= 0.1,
            "slope {slope}, errors {errs:?}"
        );
    }
}
