//! Spring-mass-damper benchmark: `n` carts in series, driven at both ends,
//! positions of the end carts measured.
//!
//! Each cart is one subsystem with state `[p_i; q_i]` and descriptor matrix
//! `diag(1, m_i)`. Interaction forces enter as internal inputs; every cart
//! publishes its position and velocity as internal outputs, so the
//! interconnection matrix carries all spring/damper coefficients. One
//! coupling `(k_m, mu_m)` is declared unknown and becomes `theta`; everything
//! else, including the optional wall anchors, lives in `Phi_0`.
//!
//! With only 2 of `2n` ports actuated/measured, the open-loop transfer
//! blocks `G_yv` and `G_zu` are far from full rank, which is precisely the
//! regime where rank-based identification methods fail.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::model::{assemble_nds, DescriptorSubsystem, NdsModel, Topology};

/// Benchmark chain description.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub n_carts: usize,
    pub mass_range: (f64, f64),
    pub spring_range: (f64, f64),
    pub damper_range: (f64, f64),
    /// 1-based index of the unknown coupling, connecting carts `m` and
    /// `m+1`. `None` picks the middle one.
    pub unknown_coupling: Option<usize>,
    /// Anchor carts 1 and n to ground with known spring/damper pairs; keeps
    /// the free-free rigid-body mode out of the model.
    pub wall_anchoring: bool,
    /// Split interaction forces into elastic and viscous components
    /// (`m_v = 2n`); `false` merges them into one net force per cart
    /// (`m_v = n`).
    pub split_forces: bool,
    pub seed: u64,
}

impl ChainSpec {
    /// Benchmark defaults: masses U[1, 1.5], springs U[0.5, 2.0], dampers
    /// U[0.1, 0.5], anchored, split forces, middle coupling unknown.
    pub fn new(n_carts: usize, seed: u64) -> Self {
        ChainSpec {
            n_carts,
            mass_range: (1.0, 1.5),
            spring_range: (0.5, 2.0),
            damper_range: (0.1, 0.5),
            unknown_coupling: None,
            wall_anchoring: true,
            split_forces: true,
            seed,
        }
    }

    pub fn unknown_index(&self) -> usize {
        self.unknown_coupling
            .unwrap_or_else(|| (self.n_carts).div_ceil(2))
    }

    fn validate(&self) -> Result<()> {
        if self.n_carts < 2 {
            return Err(Error::InvalidSpec("need at least 2 carts".into()));
        }
        let m = self.unknown_index();
        if m < 1 || m > self.n_carts - 1 {
            return Err(Error::InvalidSpec(format!(
                "unknown coupling {m} out of range 1..={}",
                self.n_carts - 1
            )));
        }
        for (name, (lo, hi)) in [
            ("mass", self.mass_range),
            ("spring", self.spring_range),
            ("damper", self.damper_range),
        ] {
            if !(lo > 0.0 && hi >= lo) {
                return Err(Error::InvalidSpec(format!(
                    "{name} range ({lo}, {hi}) must be positive and ordered"
                )));
            }
        }
        Ok(())
    }
}

/// Wall anchors for carts 1 and n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallAnchors {
    pub spring_left: f64,
    pub damper_left: f64,
    pub spring_right: f64,
    pub damper_right: f64,
}

/// Drawn physical parameters of one chain instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainParams {
    pub masses: Vec<f64>,
    /// `n - 1` inter-cart springs; entry `unknown_index - 1` is the true
    /// value of `theta_1`.
    pub springs: Vec<f64>,
    pub dampers: Vec<f64>,
    pub walls: Option<WallAnchors>,
}

/// A built chain: subsystems plus topology, with the truth recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSystem {
    pub subsystems: Vec<DescriptorSubsystem>,
    pub topology: Topology,
    pub theta_true: DVector<f64>,
    pub params: ChainParams,
    pub spec: ChainSpec,
}

impl ChainSystem {
    pub fn assemble(&self) -> Result<NdsModel> {
        assemble_nds(&self.subsystems, self.topology.clone())
    }
}

/// Draws masses, springs, dampers (and wall anchors) from the spec ranges.
pub fn draw_params(spec: &ChainSpec) -> Result<ChainParams> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let n = spec.n_carts;
    let draw = |rng: &mut ChaCha12Rng, (lo, hi): (f64, f64)| {
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..hi)
        }
    };
    let masses = (0..n).map(|_| draw(&mut rng, spec.mass_range)).collect();
    let springs = (0..n - 1)
        .map(|_| draw(&mut rng, spec.spring_range))
        .collect();
    let dampers = (0..n - 1)
        .map(|_| draw(&mut rng, spec.damper_range))
        .collect();
    let walls = spec.wall_anchoring.then(|| WallAnchors {
        spring_left: draw(&mut rng, spec.spring_range),
        damper_left: draw(&mut rng, spec.damper_range),
        spring_right: draw(&mut rng, spec.spring_range),
        damper_right: draw(&mut rng, spec.damper_range),
    });
    Ok(ChainParams {
        masses,
        springs,
        dampers,
        walls,
    })
}

/// Builds the chain from explicit physical parameters.
pub fn build_from_params(spec: &ChainSpec, params: &ChainParams) -> Result<ChainSystem> {
    spec.validate()?;
    let n = spec.n_carts;
    if params.masses.len() != n || params.springs.len() != n - 1 || params.dampers.len() != n - 1
    {
        return Err(Error::InvalidSpec(
            "parameter vectors do not match n_carts".into(),
        ));
    }
    if spec.wall_anchoring != params.walls.is_some() {
        return Err(Error::InvalidSpec(
            "wall anchoring flag disagrees with parameters".into(),
        ));
    }
    let m_unknown = spec.unknown_index(); // 1-based coupling index

    let force_width = if spec.split_forces { 2 } else { 1 };
    let subsystems: Vec<DescriptorSubsystem> = (0..n)
        .map(|i| {
            let driven = i == 0 || i == n - 1;
            let m_u = usize::from(driven);
            let m_y = usize::from(driven);
            let mut b_xv = DMatrix::zeros(2, force_width);
            for c in 0..force_width {
                b_xv[(1, c)] = 1.0; // forces act on the momentum equation
            }
            let mut b_xu = DMatrix::zeros(2, m_u);
            if driven {
                b_xu[(1, 0)] = 1.0;
            }
            let mut c_yx = DMatrix::zeros(m_y, 2);
            if driven {
                c_yx[(0, 0)] = 1.0; // measure position
            }
            DescriptorSubsystem {
                e: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, params.masses[i]]),
                a_xx: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
                b_xv,
                b_xu,
                c_zx: DMatrix::identity(2, 2),
                d_zv: DMatrix::zeros(2, force_width),
                d_zu: DMatrix::zeros(2, m_u),
                c_yx,
                d_yv: DMatrix::zeros(m_y, force_width),
                d_yu: DMatrix::zeros(m_y, m_u),
            }
        })
        .collect();

    let m_v = force_width * n;
    let m_z = 2 * n;
    // z layout: p_i -> 2i, q_i -> 2i + 1 (0-based cart index)
    let p_col = |cart: usize| 2 * cart;
    let q_col = |cart: usize| 2 * cart + 1;
    // v layout: elastic row then viscous row per cart when split, one net
    // force row otherwise
    let el_row = |cart: usize| force_width * cart;
    let vi_row = |cart: usize| force_width * cart + force_width - 1;

    let mut phi0 = DMatrix::zeros(m_v, m_z);
    let add_coupling = |phi: &mut DMatrix<f64>, j: usize, k: f64, mu: f64| {
        // coupling j (0-based) joins carts j and j+1
        let (a, b) = (j, j + 1);
        phi[(el_row(a), p_col(b))] += k;
        phi[(el_row(a), p_col(a))] -= k;
        phi[(el_row(b), p_col(a))] += k;
        phi[(el_row(b), p_col(b))] -= k;
        phi[(vi_row(a), q_col(b))] += mu;
        phi[(vi_row(a), q_col(a))] -= mu;
        phi[(vi_row(b), q_col(a))] += mu;
        phi[(vi_row(b), q_col(b))] -= mu;
    };
    for j in 0..n - 1 {
        if j + 1 == m_unknown {
            continue; // carried by the basis matrices
        }
        add_coupling(&mut phi0, j, params.springs[j], params.dampers[j]);
    }
    if let Some(w) = &params.walls {
        phi0[(el_row(0), p_col(0))] -= w.spring_left;
        phi0[(vi_row(0), q_col(0))] -= w.damper_left;
        phi0[(el_row(n - 1), p_col(n - 1))] -= w.spring_right;
        phi0[(vi_row(n - 1), q_col(n - 1))] -= w.damper_right;
    }

    // unit incidence patterns of the unknown coupling
    let j = m_unknown - 1;
    let (a, b) = (j, j + 1);
    let mut phi_spring = DMatrix::zeros(m_v, m_z);
    phi_spring[(el_row(a), p_col(b))] = 1.0;
    phi_spring[(el_row(a), p_col(a))] = -1.0;
    phi_spring[(el_row(b), p_col(a))] = 1.0;
    phi_spring[(el_row(b), p_col(b))] = -1.0;
    let mut phi_damper = DMatrix::zeros(m_v, m_z);
    phi_damper[(vi_row(a), q_col(b))] = 1.0;
    phi_damper[(vi_row(a), q_col(a))] = -1.0;
    phi_damper[(vi_row(b), q_col(a))] = 1.0;
    phi_damper[(vi_row(b), q_col(b))] = -1.0;

    let theta_true = DVector::from_row_slice(&[params.springs[j], params.dampers[j]]);
    let topology = Topology {
        phi0,
        basis: alloc::vec![phi_spring, phi_damper],
        theta: theta_true.clone(),
        bounds: alloc::vec![spec.spring_range, spec.damper_range],
    };

    Ok(ChainSystem {
        subsystems,
        topology,
        theta_true,
        params: params.clone(),
        spec: spec.clone(),
    })
}

/// Draws a random instance and builds it.
pub fn build_chain(spec: &ChainSpec) -> Result<ChainSystem> {
    let params = draw_params(spec)?;
    build_from_params(spec, &params)
}

/// Open-loop (interconnection removed) transfer `G_yv(s) = C_yx (sE -
/// A_xx)^{-1} B_xv + D_yv`, the block whose rank the earlier full-rank
/// methods need.
pub fn open_loop_yv(
    nds: &NdsModel,
    s: num_complex::Complex64,
) -> Result<DMatrix<num_complex::Complex64>> {
    let n = nds.e.nrows();
    let pencil = DMatrix::from_fn(n, n, |i, j| {
        num_complex::Complex64::new(nds.e[(i, j)], 0.0) * s - nds.a_xx[(i, j)]
    });
    let b = nds.b_xv.map(|x| num_complex::Complex64::new(x, 0.0));
    let sol = crate::linalg::solve_complex(pencil, &b, s)?;
    Ok(nds.c_yx.map(|x| num_complex::Complex64::new(x, 0.0)) * sol
        + nds.d_yv.map(|x| num_complex::Complex64::new(x, 0.0)))
}

/// Open-loop transfer `G_zu(s) = C_zx (sE - A_xx)^{-1} B_xu + D_zu`.
pub fn open_loop_zu(
    nds: &NdsModel,
    s: num_complex::Complex64,
) -> Result<DMatrix<num_complex::Complex64>> {
    let n = nds.e.nrows();
    let pencil = DMatrix::from_fn(n, n, |i, j| {
        num_complex::Complex64::new(nds.e[(i, j)], 0.0) * s - nds.a_xx[(i, j)]
    });
    let b = nds.b_xu.map(|x| num_complex::Complex64::new(x, 0.0));
    let sol = crate::linalg::solve_complex(pencil, &b, s)?;
    Ok(nds.c_zx.map(|x| num_complex::Complex64::new(x, 0.0)) * sol
        + nds.d_zu.map(|x| num_complex::Complex64::new(x, 0.0)))
}

/// Numerical rank of a complex matrix at `max(m, n) * eps * sigma_max`.
pub fn complex_rank(m: &DMatrix<num_complex::Complex64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    match m.clone().try_svd(false, false, f64::EPSILON, 0) {
        Some(svd) => {
            let smax = svd.singular_values.max();
            let tol = crate::linalg::default_rank_tol(m.nrows(), m.ncols(), smax);
            svd.singular_values.iter().filter(|&&x| x > tol).count()
        }
        None => 0,
    }
}
