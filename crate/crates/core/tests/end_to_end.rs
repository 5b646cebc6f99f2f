use sparse_recovery::combinatorial::{
    certify_disjunct, for_each_subset, kautz_singleton, random_list_disjunct, read_design, write_design,
};
use sparse_recovery::design::{IdentificationDesign, NoisePolicy};
use sparse_recovery::heavy_hitters::{HhConfig, HhSketch};
use sparse_recovery::pipelines::{ExactPipeline, ListPipeline, PipelineParams};

/// With a certified disjunct stage, exact recovery holds for every support of size ≤ k.
#[test]
fn exact_pipeline_recovers_every_small_support() {
    let (k, n) = (2u64, 32u64);
    let list = ListPipeline::build(k, n, 5, &PipelineParams::default()).unwrap();
    let p = ExactPipeline::with_disjunct(list, kautz_singleton(k, n).unwrap()).unwrap();
    assert!(certify_disjunct(&p.disjunct, k));
    let mut checked = 0;
    for size in 0..=k as usize {
        for_each_subset(n as usize, size, |s| {
            let support: Vec<u64> = s.iter().map(|&i| i as u64).collect();
            assert_eq!(p.decode_exact(&p.measure(&support).unwrap()).unwrap(), support);
            checked += 1;
            true
        });
    }
    assert_eq!(checked, 1 + 32 + 496);
}

#[test]
fn design_files_decode_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("list.bin");
    let d = random_list_disjunct(2, 64, 12, 9).unwrap();
    write_design(&d, &path).unwrap();
    let back = read_design(&path).unwrap();
    assert_eq!(back.columns(), d.columns());
    let y = d.measure(&[3, 40]).unwrap();
    assert_eq!(back.naive_decode(&y).unwrap(), d.naive_decode(&y).unwrap());
}

/// Thresholding a heavy-hitters sketch of a 0/1 vector reproduces the group-testing
/// outcome of the same identification design.
#[test]
fn sketch_threshold_matches_group_testing_outcome() {
    let (k, n, seed) = (4u64, 1024u64, 17u64);
    let mut sk = HhSketch::new(k, n, seed, HhConfig { estimates: false, ..HhConfig::default() }).unwrap();
    let support = [5u64, 300, 301, 999];
    for &i in &support {
        sk.update(i, 1.0).unwrap();
    }
    let list = sk.query();
    let d: &IdentificationDesign = sk.design();
    let outcome = d.measure(&support).unwrap();
    let from_tests = d.identify(&outcome).unwrap();
    assert!(support.iter().all(|i| list.contains(i)));
    assert!(list.iter().all(|i| from_tests.contains(i)));
    // Noise never removes a defective from the identification list.
    let noisy = d.inject_noise(&outcome, &NoisePolicy::uniform(2 * k as usize, 0, 3)).unwrap();
    let noisy_list = d.identify(&noisy).unwrap();
    assert!(support.iter().all(|i| noisy_list.contains(i)));
}
