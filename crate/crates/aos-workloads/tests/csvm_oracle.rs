//! Cascade correctness against the direct solver: after feedback
//! convergence the cascade's training-point classifications agree with a
//! single SMO run over the full dataset.

use aos_workloads::csvm::{
    cascade_train_local, generate_csvm_dataset, partition_blocks, train_smo, SmoParams,
};

fn agreement(dataset_seed: u64, n: usize, block: usize) -> (f64, bool) {
    let (points, labels) = generate_csvm_dataset(n, 2, dataset_seed);
    let params = SmoParams::default();

    let blocks = partition_blocks(&points, &labels, block, 2).unwrap();
    let outcome = cascade_train_local(&blocks, &params, 5).unwrap();
    let direct = train_smo(&points, &labels, &params).unwrap();

    let cascade_pred = outcome.model.classify(&points).unwrap();
    let direct_pred = direct.classify(&points).unwrap();
    let agree = cascade_pred
        .iter()
        .zip(&direct_pred)
        .filter(|(a, b)| a == b)
        .count();
    (agree as f64 / n as f64, outcome.converged)
}

#[test]
fn four_block_cascade_agrees_with_direct_smo() {
    let (agree, _) = agreement(21, 512, 128);
    assert!(agree >= 0.99, "agreement {agree}");
}

#[test]
fn eight_block_cascade_agrees_with_direct_smo() {
    let (agree, _) = agreement(22, 512, 64);
    assert!(agree >= 0.99, "agreement {agree}");
}

#[test]
fn feedback_reduces_violations() {
    let (points, labels) = generate_csvm_dataset(512, 2, 23);
    let params = SmoParams::default();
    let blocks = partition_blocks(&points, &labels, 64, 2).unwrap();
    let outcome = cascade_train_local(&blocks, &params, 5).unwrap();
    // The violation count never increases from the first to the last pass.
    let first = *outcome.violation_history.first().unwrap();
    let last = *outcome.violation_history.last().unwrap();
    assert!(
        last <= first,
        "violations grew: {:?}",
        outcome.violation_history
    );
    if outcome.converged {
        assert_eq!(last, 0);
    }
}

#[test]
fn cascade_classification_agrees_on_held_out_points() {
    let (points, labels) = generate_csvm_dataset(512, 2, 24);
    let params = SmoParams::default();
    let blocks = partition_blocks(&points, &labels, 128, 2).unwrap();
    let outcome = cascade_train_local(&blocks, &params, 5).unwrap();
    let direct = train_smo(&points, &labels, &params).unwrap();

    let (held_out, _) = generate_csvm_dataset(400, 2, 999);
    let a = outcome.model.classify(&held_out).unwrap();
    let b = direct.classify(&held_out).unwrap();
    let agree = a.iter().zip(&b).filter(|(x, y)| x == y).count() as f64 / 400.0;
    assert!(agree >= 0.99, "held-out agreement {agree}");
}
