use acam_core::harness::{
    constant_mean_mae, evaluate, train, Dataset, EvalMode, ModelSpec, Similarity, SyntheticTaskSpec,
};
use acam_core::HardwareModel;

#[test]
fn both_arms_beat_constant_mean() {
    let data = Dataset::generate(&SyntheticTaskSpec::default()).unwrap();
    let floor = constant_mean_mae(&data);
    for similarity in [Similarity::AcamSoft, Similarity::Sdp] {
        let out = train(
            &ModelSpec {
                similarity,
                ..Default::default()
            },
            &data,
        )
        .unwrap();
        let mae = evaluate(&out.model, &data, EvalMode::Soft, &HardwareModel::default())
            .unwrap()
            .mae;
        assert!(
            mae < floor,
            "{similarity:?}: {mae} vs constant-mean {floor}"
        );
        assert_eq!(out.curve.last().unwrap().val_mae, mae);
    }
}

#[test]
fn repeated_training_is_bit_identical() {
    let task = SyntheticTaskSpec {
        n_train: 24,
        n_val: 8,
        seq_len: 16,
        ..Default::default()
    };
    let data = Dataset::generate(&task).unwrap();
    let spec = ModelSpec {
        epochs: 4,
        ..Default::default()
    };
    let a = train(&spec, &data).unwrap();
    let b = train(&spec, &data).unwrap();
    let bits = |c: &[acam_core::harness::EpochLog]| {
        c.iter()
            .map(|e| (e.train_mae.to_bits(), e.val_mae.to_bits()))
            .collect::<Vec<_>>()
    };
    assert_eq!(bits(&a.curve), bits(&b.curve));
    assert_eq!(a.model, b.model);
}

#[test]
fn hard_evaluation_charges_every_sequence() {
    let task = SyntheticTaskSpec {
        n_train: 8,
        n_val: 3,
        seq_len: 10,
        ..Default::default()
    };
    let data = Dataset::generate(&task).unwrap();
    let out = train(
        &ModelSpec {
            epochs: 1,
            ..Default::default()
        },
        &data,
    )
    .unwrap();
    let report = evaluate(
        &out.model,
        &data,
        EvalMode::HardQuantized,
        &HardwareModel::default(),
    )
    .unwrap();
    let ledger = report.ledger.unwrap();
    assert_eq!(ledger.row_writes, 3 * 10);
    assert_eq!(ledger.searches, 3 * 10);
    assert!((ledger.total_latency_s - 30.0 * (20e-9 + 6e-9)).abs() < 1e-15);
}
