#![allow(dead_code)] // each test binary uses its own subset

//! Shared builders for the integration suites: small hand models, random
//! well-posed dense networks, and oscillatory generators.

use nalgebra::{DMatrix, DVector};
use ndsid_core::generator::InputGenerator;
use ndsid_core::model::{assemble_nds, check_regularity, DescriptorSubsystem, NdsModel, Topology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// The oscillatory generator of the benchmark study: one 0.32 rad/s pair,
/// both modes excited.
pub fn sec5_generator() -> InputGenerator {
    InputGenerator::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 0.32, -0.32, 0.0]),
        DMatrix::from_row_slice(2, 2, &[1.5, 2.0, 2.0, 1.0]),
        DVector::from_row_slice(&[1.0, 1.0]),
    )
    .unwrap()
}

/// Two coupled first-order nodes with one unknown symmetric coupling.
pub fn coupled_pair(theta: f64) -> NdsModel {
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
        basis: vec![DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])],
        theta: DVector::from_row_slice(&[theta]),
        bounds: vec![(-0.9, 0.9)],
    };
    assemble_nds(&[node(), node()], topo).unwrap()
}

/// A random dense multi-node network that passes all regularity checks.
///
/// Subsystem dimensions vary (including nodes without inputs or outputs),
/// every node has internal ports, and the interconnection carries one
/// random basis matrix with a nonzero parameter.
pub fn random_dense_model(seed: u64, n_nodes: usize) -> NdsModel {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for attempt in 0..200 {
        let _ = attempt;
        let mut subs = Vec::new();
        let mut m_v_total = 0;
        let mut m_z_total = 0;
        for i in 0..n_nodes {
            let m_x = rng.random_range(1..=3usize);
            let m_v = rng.random_range(1..=2usize);
            let m_z = rng.random_range(1..=2usize);
            // keep at least one driven and one measured node
            let m_u = if i == 0 {
                1
            } else {
                rng.random_range(0..=1usize)
            };
            let m_y = if i == n_nodes - 1 {
                1
            } else {
                rng.random_range(0..=1usize)
            };
            m_v_total += m_v;
            m_z_total += m_z;
            fn rm(rng: &mut ChaCha12Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
                DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0) * scale)
            }
            let mut a_xx = rm(&mut rng, m_x, m_x, 1.0);
            // push the diagonal left for local stability
            for k in 0..m_x {
                a_xx[(k, k)] -= 1.5 + a_xx.norm();
            }
            let e = DMatrix::identity(m_x, m_x) * rng.random_range(0.5..2.0);
            subs.push(DescriptorSubsystem {
                e,
                a_xx,
                b_xv: rm(&mut rng, m_x, m_v, 0.5),
                b_xu: rm(&mut rng, m_x, m_u, 1.0),
                c_zx: rm(&mut rng, m_z, m_x, 1.0),
                d_zv: rm(&mut rng, m_z, m_v, 0.1),
                d_zu: rm(&mut rng, m_z, m_u, 0.3),
                c_yx: rm(&mut rng, m_y, m_x, 1.0),
                d_yv: rm(&mut rng, m_y, m_v, 0.1),
                d_yu: rm(&mut rng, m_y, m_u, 0.2),
            });
        }
        let phi0 = DMatrix::from_fn(m_v_total, m_z_total, |_, _| rng.random_range(-0.3..0.3));
        let basis = DMatrix::from_fn(m_v_total, m_z_total, |_, _| rng.random_range(-0.5..0.5));
        let theta = DVector::from_row_slice(&[rng.random_range(0.2..0.8)]);
        let topo = Topology {
            phi0,
            basis: vec![basis],
            theta,
            bounds: vec![(-2.0, 2.0)],
        };
        let Ok(model) = assemble_nds(&subs, topo) else {
            continue;
        };
        let rep = check_regularity(&model, None);
        if rep.wellposed && rep.regular_pencil && rep.stable {
            return model;
        }
    }
    panic!("no well-posed random model found for seed {seed}");
}

/// Oscillatory generator sized to the model: distinct pure rotations plus an
/// optional constant mode, with all modes excited.
pub fn random_oscillatory_generator(
    seed: u64,
    m_u: usize,
    n_pairs: usize,
    constant_mode: bool,
) -> InputGenerator {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x5eed);
    let m_xi = 2 * n_pairs + usize::from(constant_mode);
    let mut xi = DMatrix::zeros(m_xi, m_xi);
    let mut at = 0;
    if constant_mode {
        at = 1; // lambda = 0 occupies the first coordinate
    }
    for k in 0..n_pairs {
        let omega = 0.25 + 0.45 * k as f64 + rng.random_range(0.0..0.2);
        xi[(at, at + 1)] = omega;
        xi[(at + 1, at)] = -omega;
        at += 2;
    }
    let pi = DMatrix::from_fn(m_u, m_xi, |_, _| {
        let v: f64 = rng.random_range(0.4..2.0);
        if rng.random_bool(0.5) {
            v
        } else {
            -v
        }
    });
    let xi0 = DVector::from_fn(m_xi, |_, _| {
        let v: f64 = rng.random_range(0.5..1.5);
        if rng.random_bool(0.5) {
            v
        } else {
            -v
        }
    });
    InputGenerator::new(xi, pi, xi0).unwrap()
}

/// Subsystem indices that actually own output channels.
pub fn measured_subsystems(model: &NdsModel) -> Vec<usize> {
    (0..model.output_layout().n_subsystems())
        .filter(|&k| model.output_layout().slice(k).1 > 0)
        .collect()
}
