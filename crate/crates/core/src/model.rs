//! Descriptor subsystems, the affine interconnection, and the assembled
//! network model.
//!
//! A subsystem couples a (possibly singular) descriptor state equation with
//! internal ports `v`/`z` exchanged over the interconnection
//! `v = Phi(theta) z` and external ports `u`/`y`. Stacking all subsystems
//! block-diagonally and closing the interconnection gives the pencil form
//!
//! ```text
//! E_bar [x; z]' = A_theta [x; z] + [B_xu; D_zu] u
//! y = C_theta [x; z] + D_yu u
//! ```
//!
//! with `E_bar = diag(E, 0)`.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
#[allow(unused_imports)] // f64 intrinsics need the trait only in no_std builds
use num_traits::Float;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::linalg;

/// One node of the network in descriptor form.
///
/// Signal dimensions are carried by the matrix shapes; any of them may be
/// zero (a subsystem without external input, output, or internal ports).
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSubsystem {
    pub e: DMatrix<f64>,
    pub a_xx: DMatrix<f64>,
    pub b_xv: DMatrix<f64>,
    pub b_xu: DMatrix<f64>,
    pub c_zx: DMatrix<f64>,
    pub d_zv: DMatrix<f64>,
    pub d_zu: DMatrix<f64>,
    pub c_yx: DMatrix<f64>,
    pub d_yv: DMatrix<f64>,
    pub d_yu: DMatrix<f64>,
}

/// Signal dimensions of one subsystem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubsystemDims {
    pub m_x: usize,
    pub m_v: usize,
    pub m_u: usize,
    pub m_z: usize,
    pub m_y: usize,
}

impl DescriptorSubsystem {
    pub fn dims(&self) -> SubsystemDims {
        SubsystemDims {
            m_x: self.e.nrows(),
            m_v: self.b_xv.ncols(),
            m_u: self.b_xu.ncols(),
            m_z: self.c_zx.nrows(),
            m_y: self.c_yx.nrows(),
        }
    }

    /// Checks that all nine blocks agree with the dimensions implied by `E`,
    /// `B_xv`, `B_xu`, `C_zx`, `C_yx`.
    pub fn validate(&self, index: usize) -> Result<()> {
        let d = self.dims();
        if self.e.nrows() != self.e.ncols() {
            return Err(Error::dim(index, "E must be square"));
        }
        let checks: [(&str, usize, usize, usize, usize); 9] = [
            ("A_xx", self.a_xx.nrows(), self.a_xx.ncols(), d.m_x, d.m_x),
            ("B_xv", self.b_xv.nrows(), self.b_xv.ncols(), d.m_x, d.m_v),
            ("B_xu", self.b_xu.nrows(), self.b_xu.ncols(), d.m_x, d.m_u),
            ("C_zx", self.c_zx.nrows(), self.c_zx.ncols(), d.m_z, d.m_x),
            ("D_zv", self.d_zv.nrows(), self.d_zv.ncols(), d.m_z, d.m_v),
            ("D_zu", self.d_zu.nrows(), self.d_zu.ncols(), d.m_z, d.m_u),
            ("C_yx", self.c_yx.nrows(), self.c_yx.ncols(), d.m_y, d.m_x),
            ("D_yv", self.d_yv.nrows(), self.d_yv.ncols(), d.m_y, d.m_v),
            ("D_yu", self.d_yu.nrows(), self.d_yu.ncols(), d.m_y, d.m_u),
        ];
        for (name, r, c, er, ec) in checks {
            if (r, c) != (er, ec) {
                return Err(Error::dim(
                    index,
                    format!("{name} is {r}x{c}, expected {er}x{ec}"),
                ));
            }
        }
        Ok(())
    }
}

/// The affine interconnection `Phi(theta) = Phi_0 + sum_i theta_i Phi_i`
/// together with the admissible parameter box.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub phi0: DMatrix<f64>,
    pub basis: Vec<DMatrix<f64>>,
    pub theta: DVector<f64>,
    /// Closed per-parameter intervals (lo, hi); may be empty (unbounded).
    pub bounds: Vec<(f64, f64)>,
}

impl Topology {
    /// A topology without unknown parameters.
    pub fn fixed(phi0: DMatrix<f64>) -> Self {
        Topology {
            phi0,
            basis: Vec::new(),
            theta: DVector::zeros(0),
            bounds: Vec::new(),
        }
    }

    pub fn n_params(&self) -> usize {
        self.basis.len()
    }

    pub fn validate(&self) -> Result<()> {
        let shape = self.phi0.shape();
        for (i, b) in self.basis.iter().enumerate() {
            if b.shape() != shape {
                return Err(Error::dim(
                    None,
                    format!(
                        "basis matrix {i} is {}x{}, expected {}x{}",
                        b.nrows(),
                        b.ncols(),
                        shape.0,
                        shape.1
                    ),
                ));
            }
        }
        if self.theta.len() != self.basis.len() {
            return Err(Error::dim(
                None,
                format!(
                    "theta has {} entries for {} basis matrices",
                    self.theta.len(),
                    self.basis.len()
                ),
            ));
        }
        if !self.bounds.is_empty() && self.bounds.len() != self.basis.len() {
            return Err(Error::dim(
                None,
                format!(
                    "{} bounds for {} parameters",
                    self.bounds.len(),
                    self.basis.len()
                ),
            ));
        }
        Ok(())
    }

    /// `Phi_0 + sum_i theta_i Phi_i`.
    pub fn phi_of_theta(&self, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        if theta.len() != self.basis.len() {
            return Err(Error::dim(
                None,
                format!(
                    "theta has length {}, expected {}",
                    theta.len(),
                    self.basis.len()
                ),
            ));
        }
        let mut phi = self.phi0.clone();
        for (coeff, basis) in theta.iter().zip(&self.basis) {
            phi += basis * *coeff;
        }
        Ok(phi)
    }

    /// Phi evaluated at the stored parameter vector.
    pub fn phi(&self) -> DMatrix<f64> {
        self.phi_of_theta(&self.theta).expect("stored theta length")
    }
}

/// Row layout of a stacked signal: which slice belongs to which subsystem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalLayout {
    offsets: Vec<usize>,
    sizes: Vec<usize>,
    total: usize,
}

impl SignalLayout {
    fn from_sizes(sizes: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &s in &sizes {
            offsets.push(acc);
            acc += s;
        }
        SignalLayout {
            offsets,
            sizes,
            total: acc,
        }
    }

    pub fn n_subsystems(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// (offset, size) of subsystem `k`'s slice.
    pub fn slice(&self, k: usize) -> (usize, usize) {
        (self.offsets[k], self.sizes[k])
    }

    /// Selection matrix `S_k` picking subsystem `k`'s rows out of the stack.
    pub fn selection(&self, k: usize) -> DMatrix<f64> {
        let (off, len) = self.slice(k);
        let mut s = DMatrix::zeros(len, self.total);
        for i in 0..len {
            s[(i, off + i)] = 1.0;
        }
        s
    }
}

/// Aggregate dimensions of the assembled network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NdsDims {
    pub m_x: usize,
    pub m_v: usize,
    pub m_z: usize,
    pub m_u: usize,
    pub m_y: usize,
    pub n_subsystems: usize,
}

/// The assembled network: block-diagonal stacks, the interconnection, and
/// the derived pencil matrices at the stored parameter vector.
///
/// Immutable after construction; rebuilding at another parameter vector goes
/// through [`NdsModel::with_theta`].
#[derive(Debug, Clone, PartialEq)]
pub struct NdsModel {
    pub e: DMatrix<f64>,
    pub a_xx: DMatrix<f64>,
    pub b_xv: DMatrix<f64>,
    pub b_xu: DMatrix<f64>,
    pub c_zx: DMatrix<f64>,
    pub d_zv: DMatrix<f64>,
    pub d_zu: DMatrix<f64>,
    pub c_yx: DMatrix<f64>,
    pub d_yv: DMatrix<f64>,
    pub d_yu: DMatrix<f64>,
    pub topology: Topology,
    /// `diag(E, 0)`, square of side `m_x + m_z`.
    pub e_bar: DMatrix<f64>,
    /// `[[A_xx, B_xv Phi], [C_zx, D_zv Phi - I]]` at the stored theta.
    pub a_theta: DMatrix<f64>,
    /// `[C_yx, D_yv Phi]` at the stored theta.
    pub c_theta: DMatrix<f64>,
    /// `[B_xu; D_zu]`.
    pub b_stack: DMatrix<f64>,
    dims: NdsDims,
    output_layout: SignalLayout,
    state_layout: SignalLayout,
}

impl NdsModel {
    pub fn dims(&self) -> NdsDims {
        self.dims
    }

    /// Per-subsystem layout of the stacked output `y`.
    pub fn output_layout(&self) -> &SignalLayout {
        &self.output_layout
    }

    /// Per-subsystem layout of the stacked state `x`.
    pub fn state_layout(&self) -> &SignalLayout {
        &self.state_layout
    }

    /// Phi at the stored theta.
    pub fn phi(&self) -> DMatrix<f64> {
        self.topology.phi()
    }

    /// Rebuilds the derived pencil blocks at a different parameter vector.
    pub fn with_theta(&self, theta: &DVector<f64>) -> Result<NdsModel> {
        let mut out = self.clone();
        let phi = self.topology.phi_of_theta(theta)?;
        out.topology.theta = theta.clone();
        let (a_theta, c_theta) = derived_at_phi(self, &phi);
        out.a_theta = a_theta;
        out.c_theta = c_theta;
        Ok(out)
    }

    /// `H(s) = C_theta (s E_bar - A_theta)^{-1} [B_xu; D_zu] + D_yu`.
    pub fn transfer_eval(&self, s: Complex64) -> Result<DMatrix<Complex64>> {
        let n = self.a_theta.nrows();
        let pencil = DMatrix::from_fn(n, n, |i, j| {
            Complex64::new(self.e_bar[(i, j)], 0.0) * s - self.a_theta[(i, j)]
        });
        let b = self.b_stack.map(|x| Complex64::new(x, 0.0));
        let sol = linalg::solve_complex(pencil, &b, s)?;
        let c = self.c_theta.map(|x| Complex64::new(x, 0.0));
        let d = self.d_yu.map(|x| Complex64::new(x, 0.0));
        Ok(c * sol + d)
    }

    /// Finite generalized eigenvalues of `(E_bar, A_theta)`.
    ///
    /// Computed as reciprocals of the nonzero eigenvalues of
    /// `A_theta^{-1} E_bar`; `None` when `A_theta` is singular (zero is then
    /// a generalized eigenvalue).
    pub fn finite_pencil_eigenvalues(&self) -> Option<Vec<Complex64>> {
        let n = self.a_theta.nrows();
        if n == 0 {
            return Some(Vec::new());
        }
        let lu = self.a_theta.clone().lu();
        let w = lu.solve(&self.e_bar)?;
        let scale = w.norm();
        let eigs = w.complex_eigenvalues();
        let cutoff = 1e-12 * scale.max(1.0);
        Some(
            eigs.iter()
                .filter(|mu| mu.norm() > cutoff)
                .map(|mu| mu.inv())
                .collect(),
        )
    }
}

fn derived_at_phi(model: &NdsModel, phi: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = model.dims;
    let bphi = &model.b_xv * phi;
    let dz_phi = &model.d_zv * phi;
    let dy_phi = &model.d_yv * phi;
    let n = d.m_x + d.m_z;
    let mut a_theta = DMatrix::zeros(n, n);
    a_theta
        .view_mut((0, 0), (d.m_x, d.m_x))
        .copy_from(&model.a_xx);
    a_theta.view_mut((0, d.m_x), (d.m_x, d.m_z)).copy_from(&bphi);
    a_theta
        .view_mut((d.m_x, 0), (d.m_z, d.m_x))
        .copy_from(&model.c_zx);
    let mut lower_right = dz_phi;
    for i in 0..d.m_z {
        lower_right[(i, i)] -= 1.0;
    }
    a_theta
        .view_mut((d.m_x, d.m_x), (d.m_z, d.m_z))
        .copy_from(&lower_right);

    let mut c_theta = DMatrix::zeros(d.m_y, n);
    c_theta
        .view_mut((0, 0), (d.m_y, d.m_x))
        .copy_from(&model.c_yx);
    c_theta
        .view_mut((0, d.m_x), (d.m_y, d.m_z))
        .copy_from(&dy_phi);
    (a_theta, c_theta)
}

fn block_diag<I: Iterator<Item = DMatrix<f64>>>(blocks: I) -> DMatrix<f64> {
    let blocks: Vec<DMatrix<f64>> = blocks.collect();
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(&b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Stacks the subsystems block-diagonally, validates shapes against the
/// interconnection, and computes the pencil at the stored theta.
pub fn assemble_nds(subsystems: &[DescriptorSubsystem], topology: Topology) -> Result<NdsModel> {
    topology.validate()?;
    for (i, sub) in subsystems.iter().enumerate() {
        sub.validate(i)?;
    }
    let m_v: usize = subsystems.iter().map(|s| s.dims().m_v).sum();
    let m_z: usize = subsystems.iter().map(|s| s.dims().m_z).sum();
    if m_v != topology.phi0.nrows() || m_z != topology.phi0.ncols() {
        return Err(Error::dim(
            None,
            format!(
                "Phi is {}x{} but subsystems stack to m_v = {m_v}, m_z = {m_z}",
                topology.phi0.nrows(),
                topology.phi0.ncols()
            ),
        ));
    }

    let dims = NdsDims {
        m_x: subsystems.iter().map(|s| s.dims().m_x).sum(),
        m_v,
        m_z,
        m_u: subsystems.iter().map(|s| s.dims().m_u).sum(),
        m_y: subsystems.iter().map(|s| s.dims().m_y).sum(),
        n_subsystems: subsystems.len(),
    };
    let output_layout =
        SignalLayout::from_sizes(subsystems.iter().map(|s| s.dims().m_y).collect());
    let state_layout =
        SignalLayout::from_sizes(subsystems.iter().map(|s| s.dims().m_x).collect());

    let e = block_diag(subsystems.iter().map(|s| s.e.clone()));
    let mut e_bar = DMatrix::zeros(dims.m_x + dims.m_z, dims.m_x + dims.m_z);
    e_bar.view_mut((0, 0), (dims.m_x, dims.m_x)).copy_from(&e);

    let b_xu = block_diag(subsystems.iter().map(|s| s.b_xu.clone()));
    let d_zu = block_diag(subsystems.iter().map(|s| s.d_zu.clone()));
    let mut b_stack = DMatrix::zeros(dims.m_x + dims.m_z, dims.m_u);
    b_stack
        .view_mut((0, 0), (dims.m_x, dims.m_u))
        .copy_from(&b_xu);
    b_stack
        .view_mut((dims.m_x, 0), (dims.m_z, dims.m_u))
        .copy_from(&d_zu);

    let mut model = NdsModel {
        e,
        a_xx: block_diag(subsystems.iter().map(|s| s.a_xx.clone())),
        b_xv: block_diag(subsystems.iter().map(|s| s.b_xv.clone())),
        b_xu,
        c_zx: block_diag(subsystems.iter().map(|s| s.c_zx.clone())),
        d_zv: block_diag(subsystems.iter().map(|s| s.d_zv.clone())),
        d_zu,
        c_yx: block_diag(subsystems.iter().map(|s| s.c_yx.clone())),
        d_yv: block_diag(subsystems.iter().map(|s| s.d_yv.clone())),
        d_yu: block_diag(subsystems.iter().map(|s| s.d_yu.clone())),
        topology,
        e_bar,
        a_theta: DMatrix::zeros(0, 0),
        c_theta: DMatrix::zeros(0, 0),
        b_stack,
        dims,
        output_layout,
        state_layout,
    };
    let phi = model.topology.phi();
    let (a_theta, c_theta) = derived_at_phi(&model, &phi);
    model.a_theta = a_theta;
    model.c_theta = c_theta;
    Ok(model)
}

/// Well-posedness, pencil regularity, and stability diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub wellposed: bool,
    pub regular_pencil: bool,
    pub stable: bool,
    /// Time for the slowest mode to decay to `settle_fraction`; present only
    /// when stable.
    pub settling_bound: Option<f64>,
    pub finite_eigenvalues: Vec<Complex64>,
}

/// Diagnostic sweep: well-posedness of the interconnection, probabilistic
/// pencil regularity (determinant at 5 pseudo-random points), and
/// generalized-eigenvalue stability.
///
/// `settle_fraction` sets the decay level defining the settling bound
/// (1e-3 when `None`). A user-supplied settling bound, when available,
/// should override the computed one.
pub fn check_regularity(nds: &NdsModel, settle_fraction: Option<f64>) -> RegularityReport {
    let fraction = settle_fraction.unwrap_or(1e-3);
    let d = nds.dims();

    // well-posedness: I - D_zv Phi invertible
    let phi = nds.phi();
    let mut w = -(&nds.d_zv * &phi);
    for i in 0..d.m_z {
        w[(i, i)] += 1.0;
    }
    let wellposed = d.m_z == 0 || invertible(&w);

    // regularity: det(s E_bar - A_theta) at pseudo-random complex points
    let n = d.m_x + d.m_z;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(0x9d57e11);
    let mut regular = false;
    for _ in 0..5 {
        let s = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let pencil = DMatrix::from_fn(n, n, |i, j| {
            Complex64::new(nds.e_bar[(i, j)], 0.0) * s - nds.a_theta[(i, j)]
        });
        if !det_relatively_zero(&pencil) {
            regular = true;
            break;
        }
    }

    let (stable, settling_bound, eigs) = match nds.finite_pencil_eigenvalues() {
        Some(eigs) => {
            let stable = regular && eigs.iter().all(|l| l.re < 0.0);
            let bound = if stable {
                eigs.iter()
                    .map(|l| -fraction.ln() / l.re.abs())
                    .fold(None, |acc: Option<f64>, b| Some(acc.map_or(b, |a| a.max(b))))
            } else {
                None
            };
            (stable, bound, eigs)
        }
        // A_theta singular: zero is a generalized eigenvalue.
        None => (false, None, Vec::new()),
    };

    RegularityReport {
        wellposed,
        regular_pencil: regular,
        stable,
        settling_bound,
        finite_eigenvalues: eigs,
    }
}

fn invertible(m: &DMatrix<f64>) -> bool {
    match m.clone().try_svd(false, false, f64::EPSILON, 0) {
        Some(svd) => {
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            smax > 0.0 && smin > 1e-12 * smax
        }
        None => false,
    }
}

/// `|det|` measured against the Hadamard bound (product of row norms).
fn det_relatively_zero(m: &DMatrix<Complex64>) -> bool {
    let n = m.nrows();
    if n == 0 {
        return false;
    }
    let mut log_bound = 0.0f64;
    for i in 0..n {
        let rn = m.row(i).norm();
        if rn == 0.0 {
            return true;
        }
        log_bound += rn.ln();
    }
    let det = m.clone().lu().determinant();
    if det.norm() == 0.0 {
        return true;
    }
    det.norm().ln() - log_bound < (1e-12f64).ln()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn scalar_subsystem() -> DescriptorSubsystem {
        // E = 1, x' = -x + u, y = x; no internal ports
        DescriptorSubsystem {
            e: DMatrix::from_element(1, 1, 1.0),
            a_xx: DMatrix::from_element(1, 1, -1.0),
            b_xv: DMatrix::zeros(1, 0),
            b_xu: DMatrix::from_element(1, 1, 1.0),
            c_zx: DMatrix::zeros(0, 1),
            d_zv: DMatrix::zeros(0, 0),
            d_zu: DMatrix::zeros(0, 1),
            c_yx: DMatrix::from_element(1, 1, 1.0),
            d_yv: DMatrix::zeros(1, 0),
            d_yu: DMatrix::zeros(1, 1),
        }
    }

    pub(crate) fn scalar_model() -> NdsModel {
        assemble_nds(&[scalar_subsystem()], Topology::fixed(DMatrix::zeros(0, 0))).unwrap()
    }

    /// Two-node model with genuine internal coupling:
    /// x_i' = -x_i + v_i + u_i, z_i = x_i, y_i = x_i, cross coupling theta.
    pub(crate) fn coupled_pair(theta: f64) -> NdsModel {
        let node = || DescriptorSubsystem {
            e: DMatrix::identity(1, 1),
            a_xx: DMatrix::from_element(1, 1, -1.0),
            b_xv: DMatrix::identity(1, 1),
            b_xu: DMatrix::from_element(1, 1, 1.0),
            c_zx: DMatrix::identity(1, 1),
            d_zv: DMatrix::zeros(1, 1),
            d_zu: DMatrix::zeros(1, 1),
            c_yx: DMatrix::identity(1, 1),
            d_yv: DMatrix::zeros(1, 1),
            d_yu: DMatrix::zeros(1, 1),
        };
        let topo = Topology {
            phi0: DMatrix::zeros(2, 2),
            basis: alloc::vec![DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])],
            theta: DVector::from_row_slice(&[theta]),
            bounds: alloc::vec![(-0.9, 0.9)],
        };
        assemble_nds(&[node(), node()], topo).unwrap()
    }

    #[test]
    fn scalar_assembly() {
        let m = scalar_model();
        assert_eq!(m.a_theta, DMatrix::from_element(1, 1, -1.0));
        assert_eq!(m.e_bar, DMatrix::from_element(1, 1, 1.0));
        assert_eq!(m.c_theta, DMatrix::from_element(1, 1, 1.0));
        assert_eq!(m.dims().m_y, 1);
    }

    #[test]
    fn phi_of_theta_basics() {
        let topo = Topology {
            phi0: DMatrix::zeros(1, 1),
            basis: alloc::vec![DMatrix::from_element(1, 1, 1.0)],
            theta: DVector::from_row_slice(&[2.5]),
            bounds: alloc::vec![(-10.0, 10.0)],
        };
        assert_eq!(topo.phi()[(0, 0)], 2.5);
        assert_eq!(
            topo.phi_of_theta(&DVector::zeros(1)).unwrap(),
            DMatrix::zeros(1, 1)
        );
        assert!(matches!(
            topo.phi_of_theta(&DVector::zeros(2)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn affine_dependence_on_theta() {
        let a = coupled_pair(0.2);
        let b = coupled_pair(0.6);
        let mid = coupled_pair(0.4);
        let avg = (&a.a_theta + &b.a_theta) * 0.5;
        assert_relative_eq!(mid.a_theta, avg, epsilon = 1e-15);
        // A_xx block untouched by theta
        assert_eq!(
            a.a_theta.view((0, 0), (2, 2)).clone_owned(),
            b.a_theta.view((0, 0), (2, 2)).clone_owned()
        );
    }

    #[test]
    fn shape_mismatch_names_subsystem() {
        let mut bad = scalar_subsystem();
        bad.a_xx = DMatrix::zeros(2, 2);
        let err = assemble_nds(
            &[scalar_subsystem(), bad],
            Topology::fixed(DMatrix::zeros(0, 0)),
        )
        .unwrap_err();
        match err {
            Error::Dimension { subsystem, .. } => assert_eq!(subsystem, Some(1)),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn transfer_scalar_static_gain() {
        let m = scalar_model();
        let h0 = m.transfer_eval(Complex64::new(0.0, 0.0)).unwrap();
        assert_relative_eq!(h0[(0, 0)].re, 1.0, max_relative = 1e-14);
        let hj = m.transfer_eval(Complex64::new(0.0, 1.0)).unwrap();
        // H(j) = 1/(1+j)
        assert_relative_eq!(
            hj[(0, 0)].norm(),
            core::f64::consts::FRAC_1_SQRT_2,
            max_relative = 1e-14
        );
        assert_relative_eq!(hj[(0, 0)].re, 0.5, max_relative = 1e-13);
        assert_relative_eq!(hj[(0, 0)].im, -0.5, max_relative = 1e-13);
    }

    #[test]
    fn transfer_conjugate_symmetry() {
        let m = coupled_pair(0.3);
        let s = Complex64::new(0.1, 0.7);
        let h = m.transfer_eval(s).unwrap();
        let hc = m.transfer_eval(s.conj()).unwrap();
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                assert_relative_eq!(hc[(i, j)].re, h[(i, j)].re, max_relative = 1e-12);
                assert_relative_eq!(hc[(i, j)].im, -h[(i, j)].im, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn transfer_at_pencil_eigenvalue_errors() {
        let m = scalar_model();
        let err = m.transfer_eval(Complex64::new(-1.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::SingularPencil { .. }));
    }

    #[test]
    fn regularity_of_scalar_model() {
        let m = scalar_model();
        let rep = check_regularity(&m, None);
        assert!(rep.wellposed && rep.regular_pencil && rep.stable);
        let expected = 1000f64.ln(); // eigenvalue at -1, fraction 1e-3
        assert_relative_eq!(rep.settling_bound.unwrap(), expected, max_relative = 1e-9);
        assert_eq!(rep.finite_eigenvalues.len(), 1);
        assert_relative_eq!(rep.finite_eigenvalues[0].re, -1.0, max_relative = 1e-10);
    }

    #[test]
    fn illposed_when_dzv_phi_is_identity() {
        // single node with an algebraic loop: z = x + v, v = z
        let node = DescriptorSubsystem {
            e: DMatrix::identity(1, 1),
            a_xx: DMatrix::from_element(1, 1, -1.0),
            b_xv: DMatrix::identity(1, 1),
            b_xu: DMatrix::zeros(1, 0),
            c_zx: DMatrix::identity(1, 1),
            d_zv: DMatrix::identity(1, 1),
            d_zu: DMatrix::zeros(1, 0),
            c_yx: DMatrix::identity(1, 1),
            d_yv: DMatrix::zeros(1, 1),
            d_yu: DMatrix::zeros(1, 0),
        };
        let m = assemble_nds(&[node], Topology::fixed(DMatrix::identity(1, 1))).unwrap();
        let rep = check_regularity(&m, None);
        assert!(!rep.wellposed);
    }

    #[test]
    fn selection_matrix_skips_zero_width_outputs() {
        // three nodes, middle one unmeasured
        let mut middle = scalar_subsystem();
        middle.c_yx = DMatrix::zeros(0, 1);
        middle.d_yv = DMatrix::zeros(0, 0);
        middle.d_yu = DMatrix::zeros(0, 1);
        let m = assemble_nds(
            &[scalar_subsystem(), middle, scalar_subsystem()],
            Topology::fixed(DMatrix::zeros(0, 0)),
        )
        .unwrap();
        assert_eq!(m.dims().m_y, 2);
        let layout = m.output_layout();
        assert_eq!(layout.slice(0), (0, 1));
        assert_eq!(layout.slice(1), (1, 0));
        assert_eq!(layout.slice(2), (1, 1));
        let s2 = layout.selection(2);
        assert_eq!(s2, DMatrix::from_row_slice(1, 2, &[0.0, 1.0]));
    }
}
