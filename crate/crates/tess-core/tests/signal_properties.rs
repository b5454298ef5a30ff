//! Structural properties of the signal projections and the per-layer signal.

mod common;

use rand::seq::SliceRandom;
use rand::Rng;

use common::seeded_rng;
use tess_core::audit::MacCounter;
use tess_core::learning::accumulate_dense_update;
use tess_core::lsg::{build_basis, learning_signal, softmax, BasisKind, Target, TaskKind};
use tess_core::tensor::{matvec, matvec_transpose};
use tess_core::traces::TraceParams;
use tess_core::Tensor;

fn off_diagonal_overlap(classes: usize, width: usize) -> f64 {
    let b = build_basis(BasisKind::SquareWave, classes, width).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..classes {
        for j in (i + 1)..classes {
            let dot: f64 = b.row(i).iter().zip(b.row(j)).map(|(a, c)| a * c).sum();
            worst = worst.max(dot.abs() / width as f64);
        }
    }
    worst
}

#[test]
fn wide_basis_rows_are_nearly_orthogonal_exhaustive() {
    let worst = off_diagonal_overlap(10, 1024);
    assert!(worst <= 0.5, "max off-diagonal overlap {worst}");
    assert!((worst - 0.3359375).abs() < 1e-15);
}

#[test]
fn basis_overlap_bound_holds_across_widths() {
    for classes in 2..=10 {
        for width in (4 * classes)..=160 {
            let worst = off_diagonal_overlap(classes, width);
            assert!(worst <= 0.5, "classes={classes} width={width} overlap={worst}");
        }
    }
}

#[test]
fn basis_entries_are_sign_only() {
    for (classes, width) in [(2, 8), (3, 12), (10, 40), (10, 1024)] {
        let b = build_basis(BasisKind::SquareWave, classes, width).unwrap();
        assert!(b.rows().data().iter().all(|&v| v == 1.0 || v == -1.0));
    }
}

/// The signal as composed from its public pieces: project, compare, project
/// back.
fn composed_signal(rows: &Tensor, spikes: &Tensor, label: usize) -> Tensor {
    let mut err = softmax(&matvec(rows, spikes).unwrap());
    err.data_mut()[label] -= 1.0;
    matvec_transpose(rows, &err).unwrap()
}

#[test]
fn signal_equals_its_composition_and_permutes_with_the_layer() {
    let classes = 4;
    let width = 16;
    let mut rng = seeded_rng(31);
    let basis = build_basis(BasisKind::SquareWave, classes, width).unwrap();
    for _ in 0..20 {
        let spikes = Tensor::vector(
            (0..width).map(|_| (rng.gen::<f64>() < 0.5) as u8 as f64).collect(),
        )
        .unwrap();
        let label = rng.gen_range(0..classes);
        let mut counter = MacCounter::new();
        let m = learning_signal(
            &basis,
            &spikes,
            &Target::Class(label),
            TaskKind::Classification,
            &mut counter,
        )
        .unwrap();
        let composed = composed_signal(basis.rows(), &spikes, label);
        assert_eq!(m.data(), composed.data());

        let mut perm: Vec<usize> = (0..width).collect();
        perm.shuffle(&mut rng);
        let mut rows_p = Tensor::zeros(&[classes, width]);
        for c in 0..classes {
            for j in 0..width {
                rows_p.data_mut()[c * width + perm[j]] = basis.row(c)[j];
            }
        }
        let mut spikes_p = Tensor::zeros(&[width]);
        for j in 0..width {
            spikes_p.data_mut()[perm[j]] = spikes.data()[j];
        }
        let m_p = composed_signal(&rows_p, &spikes_p, label);
        for j in 0..width {
            assert_eq!(m_p.data()[perm[j]], m.data()[j]);
        }
    }
}

#[test]
fn negated_error_negates_the_accumulated_update_exactly() {
    let classes = 3;
    let width = 12;
    let basis = build_basis(BasisKind::SquareWave, classes, width).unwrap();
    let spikes = Tensor::zeros(&[width]);
    let d = Tensor::vector(vec![0.7, -0.3, 1.1]).unwrap();
    let neg_d = d.map(|v| -v);
    let mut counter = MacCounter::new();
    let m_plus = learning_signal(
        &basis,
        &spikes,
        &Target::Values(&d),
        TaskKind::Regression,
        &mut counter,
    )
    .unwrap();
    let m_minus = learning_signal(
        &basis,
        &spikes,
        &Target::Values(&neg_d),
        TaskKind::Regression,
        &mut counter,
    )
    .unwrap();
    for (a, b) in m_plus.data().iter().zip(m_minus.data()) {
        assert_eq!(*a, -*b);
    }

    let p = TraceParams::default();
    let psi_now = Tensor::vector((0..width).map(|j| 0.1 + 0.01 * j as f64).collect()).unwrap();
    let q = Tensor::vector((0..6).map(|j| 0.3 * j as f64).collect()).unwrap();
    let h = Tensor::vector((0..width).map(|j| 0.02 * j as f64).collect()).unwrap();
    let x = Tensor::vector(vec![1.0, 0.0, 1.0, 1.0, 0.0, 1.0]).unwrap();
    let mut acc_plus = Tensor::zeros(&[width, 6]);
    let mut acc_minus = Tensor::zeros(&[width, 6]);
    accumulate_dense_update(&mut acc_plus, &m_plus, &psi_now, &q, Some(&h), &x, &p).unwrap();
    accumulate_dense_update(&mut acc_minus, &m_minus, &psi_now, &q, Some(&h), &x, &p).unwrap();
    for (a, b) in acc_plus.data().iter().zip(acc_minus.data()) {
        assert_eq!(*a, -*b);
    }
}

#[test]
fn exactly_met_regression_target_silences_the_signal() {
    let classes = 3;
    let width = 12;
    let basis = build_basis(BasisKind::SquareWave, classes, width).unwrap();
    let spikes =
        Tensor::vector((0..width).map(|j| (j % 3 == 0) as u8 as f64).collect()).unwrap();
    let fit = matvec(basis.rows(), &spikes).unwrap();
    let mut counter = MacCounter::new();
    let m = learning_signal(
        &basis,
        &spikes,
        &Target::Values(&fit),
        TaskKind::Regression,
        &mut counter,
    )
    .unwrap();
    assert!(m.data().iter().all(|&v| v == 0.0));
}

#[test]
fn softmax_normalizes_and_identity_head_error_sums_to_zero() {
    let mut rng = seeded_rng(57);
    for _ in 0..50 {
        let n = rng.gen_range(2..=12);
        let z =
            Tensor::vector((0..n).map(|_| rng.gen_range(-30.0..30.0)).collect()).unwrap();
        let s = softmax(&z);
        let sum: f64 = s.data().iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
        assert!(s.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    let basis = build_basis(BasisKind::Identity, 5, 5).unwrap();
    for label in 0..5 {
        let spikes = Tensor::vector(vec![1.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        let mut counter = MacCounter::new();
        let m = learning_signal(
            &basis,
            &spikes,
            &Target::Class(label),
            TaskKind::Classification,
            &mut counter,
        )
        .unwrap();
        let sum: f64 = m.data().iter().sum();
        assert!(sum.abs() < 1e-12);
        assert!(m.data()[label] < 0.0);
    }
}
