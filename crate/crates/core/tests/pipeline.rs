use std::fs;
use std::path::Path;

use longirad::case::{CaseRecord, DatasetLayout, Modality, RanoLabel, Timepoint};
use longirad::fusion::{
    deep_columns, handcrafted_columns, load_deep_features, write_deep_features, DeepFeatureTable, FeatureConfig,
};
use longirad::mask::{volume_mm3, whole_tumor, CompartmentMapping};
use longirad::nifti::read_volume;
use longirad::phantom::{gen_cohort, PhantomSpec};
use longirad::pipeline::{build_templates, export_rois, extract_cohort, partition_available, DeepInput};
use longirad::roi::{read_patch, PATCH_SIZE};

fn spec() -> PhantomSpec {
    PhantomSpec {
        dims: [40; 3],
        seed: 21,
        ..Default::default()
    }
}

fn cohort(root: &Path) -> Vec<CaseRecord> {
    gen_cohort(&spec(), 4, 2, root).unwrap()
}

#[test]
fn phantom_files_reload_with_their_geometry_and_regimes() {
    let tmp = tempfile::tempdir().unwrap();
    let records = cohort(tmp.path());
    assert_eq!(records.len(), 8);
    let layout = DatasetLayout::new(tmp.path());
    assert_eq!(layout.read_cases().unwrap(), records);
    let s = spec();
    let cm = CompartmentMapping::default();
    for r in &records {
        let key = r.key();
        for m in Modality::ALL {
            let v = read_volume(layout.modality_path(&key.patient_id, &key.baseline_session, m).unwrap()).unwrap();
            assert_eq!(v.geometry.dims, s.dims);
            assert_eq!(v.geometry.spacing, s.spacing);
        }
        let cp = layout.load_case(r).unwrap();
        let b = volume_mm3(&whole_tumor(&cp.baseline.labels, &cm));
        let f = volume_mm3(&whole_tumor(&cp.followup.labels, &cm));
        let change = f / b - 1.0;
        let label = r.label.unwrap();
        let [lo, hi] = if label == RanoLabel::CR {
            s.cr_residual
        } else {
            s.regime(label)
        };
        assert!((lo..=hi).contains(&change), "{key}: {label} change {change}");
    }
}

fn deep_for(records: &[CaseRecord], dim: usize) -> DeepFeatureTable {
    let mut t = DeepFeatureTable::new(dim);
    for (i, r) in records.iter().enumerate() {
        for m in Modality::ALL {
            for tp in Timepoint::ALL {
                let v = (0..dim).map(|k| (i * 100 + m.index() * 10 + k) as f64 * 0.5).collect();
                t.insert(r.key(), m, tp, v).unwrap();
            }
        }
    }
    t
}

#[test]
fn cohort_extraction_with_and_without_deep_features() {
    let tmp = tempfile::tempdir().unwrap();
    let records = cohort(tmp.path());
    let layout = DatasetLayout::new(tmp.path());
    let templates = build_templates(&layout, &records).unwrap();
    let cfg = FeatureConfig::default();

    let plain = extract_cohort(&layout, &records, &templates, &cfg, None).unwrap();
    assert_eq!(plain.table.columns, handcrafted_columns());
    assert_eq!(plain.table.columns.len(), 4263);
    assert_eq!(plain.table.rows.len(), 8);
    assert!(plain.failures.is_empty() && plain.skipped.is_empty());
    assert!(plain.table.rows.iter().all(|r| r.values.iter().all(|x| x.is_finite())));
    let again = extract_cohort(&layout, &records, &templates, &cfg, None).unwrap();
    assert_eq!(plain.table, again.table);

    // Deep block through the interchange file, with one case left out.
    let dim = 3;
    let mut deep = deep_for(&records, dim);
    let dropped = records[0].key();
    deep.rows.retain(|(k, _, _), _| *k != dropped);
    let path = tmp.path().join("deep.csv");
    write_deep_features(&deep, &path).unwrap();
    let deep = load_deep_features(&path).unwrap();
    assert_eq!(deep.len(), 7 * 8);

    let lenient = extract_cohort(
        &layout,
        &records,
        &templates,
        &cfg,
        Some(DeepInput {
            table: &deep,
            strict: false,
        }),
    )
    .unwrap();
    let mut cols = handcrafted_columns();
    cols.extend(deep_columns(dim));
    assert_eq!(lenient.table.columns, cols);
    for row in &lenient.table.rows {
        let flag = *row.values.last().unwrap();
        let hand = plain.table.rows.iter().find(|p| p.key == row.key).unwrap();
        assert_eq!(&row.values[..4263], &hand.values[..]);
        if row.key == dropped {
            assert_eq!(flag, 1.0);
            assert!(row.values[4263..4263 + 8 * dim].iter().all(|&x| x == 0.0));
        } else {
            assert_eq!(flag, 0.0);
            let idx = records.iter().position(|r| r.key() == row.key).unwrap();
            assert_eq!(row.values[4263], (idx * 100) as f64 * 0.5);
        }
    }

    let strict = extract_cohort(
        &layout,
        &records,
        &templates,
        &cfg,
        Some(DeepInput {
            table: &deep,
            strict: true,
        }),
    )
    .unwrap();
    assert_eq!(strict.table.rows.len(), 7);
    assert_eq!(strict.failures.len(), 1);
    assert_eq!(strict.failures[0].key, dropped);
}

#[test]
fn deep_reader_rejects_malformed_files() {
    let tmp = tempfile::tempdir().unwrap();
    let head = "patient_id,baseline_session,followup_session,modality,timepoint,f_0,f_1\n";
    for (name, body) in [
        ("nan", "P000,week-000,week-010,t1,baseline,1,NaN\n"),
        ("text", "P000,week-000,week-010,t1,baseline,1,x\n"),
        ("short", "P000,week-000,week-010,t1,baseline,1\n"),
        ("modality", "P000,week-000,week-010,dwi,baseline,1,2\n"),
        (
            "dup",
            "P000,week-000,week-010,t1,baseline,1,2\nP000,week-000,week-010,t1,baseline,3,4\n",
        ),
    ] {
        let p = tmp.path().join(name);
        fs::write(&p, format!("{head}{body}")).unwrap();
        assert!(load_deep_features(&p).is_err(), "{name}");
    }
    let p = tmp.path().join("header");
    fs::write(
        &p,
        "patient_id,baseline_session,followup_session,modality,timepoint,f_1\n",
    )
    .unwrap();
    assert!(load_deep_features(&p).is_err());
}

#[test]
fn missing_inputs_are_skipped_and_rois_cover_every_case() {
    let tmp = tempfile::tempdir().unwrap();
    let records = cohort(tmp.path());
    let layout = DatasetLayout::new(tmp.path());
    let gone = records[3].key();
    fs::remove_file(
        layout
            .modality_path(&gone.patient_id, &gone.followup_session, Modality::Flair)
            .unwrap(),
    )
    .unwrap();

    let (ok, skipped) = partition_available(&layout, &records);
    assert_eq!(ok.len(), 7);
    assert_eq!(skipped.len(), 1);
    assert_eq!(skipped[0].case_id, gone.case_id());

    let templates = build_templates(&layout, &ok).unwrap();
    let out = extract_cohort(&layout, &records, &templates, &FeatureConfig::default(), None).unwrap();
    assert_eq!(out.table.rows.len(), 7);
    assert_eq!(out.skipped, skipped);

    let roi_dir = tmp.path().join("roi");
    let rois = export_rois(&layout, &records, &templates, &CompartmentMapping::default(), &roi_dir).unwrap();
    assert!(rois.failures.is_empty());
    assert_eq!(rois.manifest.cases.len(), 7);
    assert_eq!(rois.manifest.skipped, skipped);
    for c in &rois.manifest.cases {
        assert_eq!(c.patches.len(), 8);
        for p in &c.patches {
            let data = read_patch(roi_dir.join(&p.path)).unwrap();
            assert_eq!(data.len(), PATCH_SIZE * PATCH_SIZE);
            assert!(data.iter().all(|x| x.is_finite()));
        }
    }
}
