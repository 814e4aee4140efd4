use acam_core::cell::DeviceConstants;
use acam_core::metrics::expected_search_energy_per_cell;
use acam_core::variation::run_confusion;
use acam_core::{LevelSet, Macro, MacroConfig, VariationSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn confusion(sigma_cmp: f64, trials: u32) -> acam_core::ConfusionMatrix {
    let spec = VariationSpec {
        sigma_cmp,
        sigma_write: 0.0,
        sigma_read: 0.0,
        seed: 3,
    };
    let k = DeviceConstants::default();
    run_confusion(
        &spec,
        &k,
        &LevelSet::default(),
        trials,
        k.match_threshold_current,
    )
    .unwrap()
}

#[test]
fn off_diagonal_mass_grows_with_sigma() {
    let masses: Vec<u64> = [0.0, 1e-3, 5e-3, 10e-3, 25e-3]
        .iter()
        .map(|&s| confusion(s, 200).off_diagonal_mass())
        .collect();
    assert_eq!(masses[0], 0);
    for pair in masses.windows(2) {
        assert!(pair[0] <= pair[1], "{masses:?}");
    }
    assert!(masses[4] > 0, "{masses:?}");
}

#[test]
fn default_sigma_keeps_eight_levels() {
    let cm = confusion(VariationSpec::default().sigma_cmp, 200);
    for (i, &d) in cm.diagonal().iter().enumerate() {
        assert!(d as f64 >= 0.9 * 200.0, "level {i}: {d}/200");
    }
    assert_eq!(cm.distinguishable_levels(0.9), 8);
    assert_eq!(cm.effective_bits(), 3);
}

#[test]
fn confusion_independent_of_thread_count() {
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| confusion(10e-3, 300))
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn mean_search_energy_converges() {
    let (n, m, searches) = (16, 64, 100);
    let levels = LevelSet::default();
    let v = levels.voltages();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut mac = Macro::new(MacroConfig::new(n, m)).unwrap();
    let keys: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m).map(|_| v[rng.random_range(0..v.len())]).collect())
        .collect();
    mac.write_matrix(&keys).unwrap();
    let before = mac.ledger().clone();
    let r = vec![levels.v_range_default(); m];
    for _ in 0..searches {
        let q: Vec<f64> = (0..m).map(|_| v[rng.random_range(0..v.len())]).collect();
        mac.search(&q, &r).unwrap();
    }
    let delta = mac.ledger().delta_since(&before);
    let pairs = (n * m * searches) as f64;
    assert!(pairs >= 1e5);
    let measured = delta.total_energy() / pairs;
    let expected = expected_search_energy_per_cell(8, &DeviceConstants::default()).unwrap();
    assert!(
        (measured / expected - 1.0).abs() < 0.01,
        "{measured:e} vs {expected:e}"
    );
}
