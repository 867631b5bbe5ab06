//! Properties of the segmentation scores and the aggregate table.

use std::collections::BTreeMap;

use dot_core::geometry::{build_grid, sample_phantom, DomainSpec, VoxelGrid};
use dot_core::metrics::{
    aggregate, evaluate_sample, read_per_sample_csv, segment, tpr, write_per_sample_csv,
    PerSampleRecord, MULTIPLIER_BINS,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid() -> (DomainSpec, VoxelGrid) {
    let spec = DomainSpec::default();
    let grid = build_grid(&spec, 0.25).unwrap();
    (spec, grid)
}

fn erode(grid: &VoxelGrid, mask: &[bool]) -> Vec<bool> {
    (0..grid.len())
        .map(|j| mask[j] && grid.neighbors4(j).count() == 4 && grid.neighbors4(j).all(|k| mask[k]))
        .collect()
}

/// Noisy map: the true phantom plus uniform noise of the given amplitude.
fn noisy_map(spec: &DomainSpec, truth: &[f64], amp: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    truth
        .iter()
        .map(|&v| v + amp * spec.mu_a0 * rng.random_range(-1.0..1.0))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn erosion_never_raises_tpr(phantom_seed in 0u64..1000, noise_seed in any::<u64>(), amp in 0.0f64..3.0) {
        let (spec, grid) = grid();
        let truth = sample_phantom(&spec, &grid, phantom_seed).unwrap();
        let threshold = 1.5 * spec.mu_a0;
        let map = noisy_map(&spec, &truth.mu_a, amp, noise_seed);
        let seg = segment(&map, &grid, threshold).unwrap();
        let eroded_mask = erode(&grid, &seg.mask());
        let eroded_map: Vec<f64> = eroded_mask.iter().map(|&m| if m { 2.0 * threshold } else { 0.0 }).collect();
        let eroded = segment(&eroded_map, &grid, threshold).unwrap();
        prop_assert!(tpr(&eroded, &truth).unwrap() <= tpr(&seg, &truth).unwrap());
    }

    #[test]
    fn raising_the_threshold_only_removes_pixels(phantom_seed in 0u64..1000, noise_seed in any::<u64>(),
                                                 lo in 1.05f64..3.0, step in 0.0f64..2.0) {
        let (spec, grid) = grid();
        let truth = sample_phantom(&spec, &grid, phantom_seed).unwrap();
        let map = noisy_map(&spec, &truth.mu_a, 1.5, noise_seed);
        let low = segment(&map, &grid, lo * spec.mu_a0).unwrap();
        let high = segment(&map, &grid, (lo + step) * spec.mu_a0).unwrap();
        for (h, l) in high.labels.iter().zip(&low.labels) {
            prop_assert!(*h == 0 || *l != 0);
        }
        // Every high component sits inside a single low component.
        for c in &high.components {
            let owner = low.labels[c.voxels[0]];
            prop_assert!(c.voxels.iter().all(|&j| low.labels[j] == owner));
        }
        prop_assert!(tpr(&high, &truth).unwrap() <= tpr(&low, &truth).unwrap());
    }

    #[test]
    fn clamped_reconstruction_has_bounded_acr(phantom_seed in 0u64..1000, noise_seed in any::<u64>(), amp in 0.0f64..6.0) {
        let (spec, grid) = grid();
        let truth = sample_phantom(&spec, &grid, phantom_seed).unwrap();
        let (lo, hi) = (spec.mu_a0, 5.0 * spec.mu_a0);
        let map: Vec<f64> = noisy_map(&spec, &truth.mu_a, amp, noise_seed)
            .into_iter()
            .map(|v| v.clamp(lo, hi))
            .collect();
        let eval = evaluate_sample(&map, &grid, &truth, 1.5 * spec.mu_a0).unwrap();
        prop_assert!((0.0..=1.0).contains(&eval.tpr));
        for r in eval.regions {
            if let Some(a) = r.acr {
                prop_assert!(a >= lo && a <= hi, "{a}");
            }
        }
    }
}

#[test]
fn aggregation_matches_an_independent_pass() {
    let (spec, grid) = grid();
    let methods = ["lsvd".to_string(), "bregman".to_string()];
    let noise = [0.0, 0.03];
    let mut records = Vec::new();
    for sample in 0..25 {
        let truth = sample_phantom(&spec, &grid, 500 + sample as u64).unwrap();
        for (m, method) in methods.iter().enumerate() {
            for (k, &p) in noise.iter().enumerate() {
                let amp = 0.5 + 2.0 * p / 0.03 + m as f64;
                let map = noisy_map(&spec, &truth.mu_a, amp, (sample * 10 + m * 3 + k) as u64);
                let eval = evaluate_sample(&map, &grid, &truth, 1.5 * spec.mu_a0).unwrap();
                records.extend(PerSampleRecord::from_eval(sample, method, p, &eval));
            }
        }
    }
    // Go through the CSV so the oracle sees exactly what is on disk.
    let mut csv = Vec::new();
    write_per_sample_csv(&records, &mut csv).unwrap();
    let text = String::from_utf8(csv.clone()).unwrap();
    let parsed = read_per_sample_csv(csv.as_slice()).unwrap();
    let report = aggregate(&parsed, &methods, &noise).unwrap();
    assert_eq!(report.rows.len(), methods.len() * noise.len());

    // Independent pass straight over the CSV text: first sums, then squared
    // deviations.
    let mut header = None;
    let mut acr: BTreeMap<(String, u64, String), Vec<f64>> = BTreeMap::new();
    let mut tprs: BTreeMap<(String, u64), BTreeMap<String, f64>> = BTreeMap::new();
    for line in text.lines() {
        let cols: Vec<&str> = line.split(',').collect();
        let Some(h) = &header else {
            header = Some(cols.iter().map(|s| s.to_string()).collect::<Vec<_>>());
            continue;
        };
        let get = |name: &str| cols[h.iter().position(|c| c == name).unwrap()];
        let key = (
            get("method").to_string(),
            get("noise").parse::<f64>().unwrap().to_bits(),
        );
        tprs.entry(key.clone())
            .or_default()
            .insert(get("sample_id").to_string(), get("tpr").parse().unwrap());
        if !get("acr").is_empty() {
            acr.entry((key.0, key.1, get("bin").to_string()))
                .or_default()
                .push(get("acr").parse().unwrap());
        }
    }
    let two_pass = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
        (mean, var.sqrt())
    };
    for row in &report.rows {
        let key = (row.method.clone(), row.noise.to_bits());
        let t: Vec<f64> = tprs[&key].values().copied().collect();
        let (mean, std) = two_pass(&t);
        assert!((row.tpr_mean - mean).abs() < 1e-12 && (row.tpr_std - std).abs() < 1e-12);
        assert_eq!(row.n_samples, 25);
        for (b, &bin) in MULTIPLIER_BINS.iter().enumerate() {
            match acr.get(&(key.0.clone(), key.1, bin.to_string())) {
                Some(v) => {
                    let stats = row.acr[b].unwrap();
                    let (mean, std) = two_pass(v);
                    assert_eq!(stats.count, v.len());
                    assert!((stats.mean - mean).abs() < 1e-15 && (stats.std - std).abs() < 1e-15);
                }
                None => assert!(row.acr[b].is_none()),
            }
        }
    }
}
