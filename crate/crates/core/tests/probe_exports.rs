use std::collections::HashMap;

use sociallab::probe::{
    self, canonical_template, parse_voxel_csv, run_probe, voxel_diagram, RegionAverages, Scripted, TemplateKind,
    P_MAX, VOXEL_HEADER,
};
use sociallab::{Execution, FeatureFlags, Policy, PolicyArch};

fn bits_of(rows: &[[f64; 8]]) -> Vec<u64> {
    rows.iter().flatten().map(|x| x.to_bits()).collect()
}

#[test]
fn template_encoding_bytes() {
    // Hand-encoded N = 4 template: own 0000, best 1111, second 1010, third 0011.
    // Columns: bits, payoff / 100, self, rank, neighbor frequency.
    let t = canonical_template(4).unwrap();
    let third = 1.0 / 3.0;
    let bi = t.observation(TemplateKind::Bi, [40, 90, 60, 10], FeatureFlags::PIRF).unwrap();
    let want_bi = [
        [0.0, 0.0, 0.0, 0.0, 0.4, 1.0, 2.0 / 3.0, 0.0],
        [1.0, 1.0, 1.0, 1.0, 0.9, 0.0, 0.0, third],
        [1.0, 0.0, 1.0, 0.0, 0.6, 0.0, third, third],
        [0.0, 0.0, 1.0, 1.0, 0.1, 0.0, 1.0, third],
    ];
    let got: Vec<u64> = bi.data().iter().map(|x| x.to_bits()).collect();
    assert_eq!(got, bits_of(&want_bi));

    let cf = t.observation(TemplateKind::Cf, [40, 90, 30, 30], FeatureFlags::PIRF).unwrap();
    let want_cf = [
        [0.0, 0.0, 0.0, 0.0, 0.4, 1.0, third, 0.0],
        [1.0, 1.0, 1.0, 1.0, 0.9, 0.0, 0.0, third],
        [1.0, 0.0, 1.0, 0.0, 0.3, 0.0, 2.0 / 3.0, 2.0 / 3.0],
        [1.0, 0.0, 1.0, 0.0, 0.3, 0.0, 2.0 / 3.0, 2.0 / 3.0],
    ];
    let got: Vec<u64> = cf.data().iter().map(|x| x.to_bits()).collect();
    assert_eq!(got, bits_of(&want_cf));

    // Dropping features removes trailing columns only.
    let pi = t.observation(TemplateKind::Bi, [40, 90, 60, 10], FeatureFlags::PI).unwrap();
    for r in 0..4 {
        assert_eq!(pi.row(r), &want_bi[r][..6]);
    }
}

#[test]
fn cf_template_duplicates_the_majority() {
    let t = canonical_template(15).unwrap();
    let (_, nb) = t.observed(TemplateKind::Cf, [50, 80, 20, 20]);
    assert_eq!(nb[1], nb[2]);
    assert_eq!(nb[0].0, t.best);
    assert_eq!(nb[1].0, t.second);
}

#[test]
fn export_files_follow_schema() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_probe(&Scripted::UniformRandom, 15, 50, 20, Execution::Parallel).unwrap();
    let mut names = report.export(dir.path()).unwrap();
    names.sort();
    assert_eq!(
        names,
        ["output_bi.csv", "output_cf.csv", "probe_meta.json", "regions.json", "voxels.csv"]
    );

    let voxels = std::fs::read_to_string(dir.path().join("voxels.csv")).unwrap();
    assert_eq!(voxels.lines().next().unwrap(), VOXEL_HEADER);
    // Six levels at stride 20: C(6 + 2, 3) ordered triples.
    assert_eq!(voxels.lines().count() - 1, 56);
    let parsed = parse_voxel_csv(&voxels).unwrap();
    assert_eq!(parsed.len(), report.voxels.len());
    for ((coords, rgba), v) in parsed.iter().zip(&report.voxels) {
        assert_eq!(*coords, [v.p3, v.p2, v.p1]);
        assert_eq!(*rgba, v.color);
    }

    let bi = std::fs::read_to_string(dir.path().join("output_bi.csv")).unwrap();
    let header: Vec<&str> = bi.lines().next().unwrap().split(',').collect();
    assert_eq!(&header[..3], ["p1", "p2", "p3"]);
    assert_eq!(header.len(), 3 + 15);
    assert_eq!(header[3], "bit_0");
    assert_eq!(bi.lines().count() - 1, 176_851);
    let cf = std::fs::read_to_string(dir.path().join("output_cf.csv")).unwrap();
    assert_eq!(cf.lines().count() - 1, 5_050);

    let regions: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("regions.json")).unwrap()).unwrap();
    let obj = regions.as_object().unwrap();
    assert_eq!(obj.len(), 4);
    assert!(obj.values().all(|v| v.is_number()));
    let back: RegionAverages = serde_json::from_value(regions).unwrap();
    assert_eq!(back, report.regions);

    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("probe_meta.json")).unwrap()).unwrap();
    assert_eq!(meta["schema_version"], 1);
    assert_eq!(meta["stride"], 20);
    assert_eq!(meta["p_max"], P_MAX);
}

#[test]
fn voxel_grid_sizes() {
    let t = canonical_template(15).unwrap();
    let pts = voxel_diagram(&Scripted::KeepSelf, &t, 50, 5, P_MAX, Execution::Parallel).unwrap();
    assert_eq!(pts.len(), 21 * 22 * 23 / 6);
    let pts = voxel_diagram(&Scripted::KeepSelf, &t, 50, 100, P_MAX, Execution::Parallel).unwrap();
    assert_eq!(pts.len(), 4);
}

#[test]
fn copy_best_oracle_is_vivid_blue_above_own_payoff() {
    let t = canonical_template(15).unwrap();
    let pts = voxel_diagram(&Scripted::BestImitatorAnalytic, &t, 50, 10, P_MAX, Execution::Sequential).unwrap();
    let mut above = 0;
    // Ties between the two best neighbors are averaged, so only a unique best counts.
    for p in pts.iter().filter(|p| p.p1 > 50 && p.p1 > p.p2) {
        above += 1;
        assert_eq!(p.color[2], 1.0);
        assert!((p.color[3] - 0.3).abs() < 1e-12);
    }
    assert!(above > 0);
}

#[test]
fn network_probe_is_deterministic_across_modes() {
    let arch = PolicyArch {
        embed: 8,
        heads: 2,
        hidden: 8,
        actor_output_scale: 1.0,
    };
    let policy = Policy::new(10, FeatureFlags::PIRF, arch, 4).unwrap();
    let a = run_probe(&policy, 10, 30, 25, Execution::Parallel).unwrap();
    let b = run_probe(&policy, 10, 30, 25, Execution::Sequential).unwrap();
    assert_eq!(probe::voxel_csv(&a.voxels), probe::voxel_csv(&b.voxels));
    assert_eq!(a.bi.to_csv(), b.bi.to_csv());
    assert_eq!(a.regions, b.regions);
    // Every BI row is a valid ordering of payoffs.
    let mut seen = HashMap::new();
    for &[p1, p2, p3] in &a.bi.inputs {
        assert!(p1 >= p2 && p2 >= p3 && p1 <= P_MAX);
        *seen.entry(p1).or_insert(0) += 1;
    }
    assert_eq!(seen.len(), 101);
}
