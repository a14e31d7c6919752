use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use longirad::case::read_case_list;
use longirad::nifti::{read_labelmap, write_labelmap};
use longirad::roi::RoiManifest;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_longirad"))
        .current_dir(dir)
        .args(args)
        .env("LONGIRAD_LOG", "warn")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

#[test]
fn bad_configs_and_usage_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for (name, text) in [
        ("unknown.toml", "dataset_root = \"d\"\noutput_dir = \"o\"\ncolour = 3\n"),
        ("syntax.toml", "dataset_root = \n"),
        (
            "phantom.toml",
            "dataset_root = \"d\"\noutput_dir = \"o\"\n[phantom]\nn_patients = 4\nsize = 9\n",
        ),
        (
            "rounds.toml",
            "dataset_root = \"d\"\noutput_dir = \"o\"\n[train]\nn_rounds = 0\n",
        ),
    ] {
        fs::write(d.join(name), text).unwrap();
        let o = run(d, &["--config", name, "folds"]);
        assert_eq!(code(&o), 2, "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(code(&run(d, &["folds"])), 2, "missing --config");
    assert_eq!(code(&run(d, &["--config", "unknown.toml", "bogus-command"])), 2);
    // A valid config pointing at a missing dataset is a configuration problem too.
    fs::write(d.join("ok.toml"), "dataset_root = \"nowhere\"\noutput_dir = \"o\"\n").unwrap();
    assert_eq!(code(&run(d, &["--config", "ok.toml", "extract"])), 2);
}

#[test]
fn every_log_line_is_json() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("c.toml"), "dataset_root = \"nowhere\"\noutput_dir = \"o\"\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_longirad"))
        .current_dir(d)
        .args(["--config", "c.toml", "extract"])
        .env("LONGIRAD_LOG", "info")
        .output()
        .unwrap();
    let stderr = String::from_utf8_lossy(&o.stderr);
    let logs: Vec<&str> = stderr.lines().filter(|l| l.starts_with('{')).collect();
    assert!(!logs.is_empty(), "{stderr}");
    for l in logs {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        assert!(
            v["level"].is_string() && v["msg"].is_string() && v["ts_ms"].is_u64(),
            "{l}"
        );
    }
}

fn write_table(path: &Path, cols: [&str; 2], rows: &[(String, &str, f64, f64)]) {
    let mut w = csv::Writer::from_path(path).unwrap();
    w.write_record([
        "patient_id",
        "baseline_session",
        "followup_session",
        "label",
        cols[0],
        cols[1],
    ])
    .unwrap();
    for (p, label, a, b) in rows {
        w.write_record([
            p.as_str(),
            "week-000",
            "week-010",
            label,
            &a.to_string(),
            &b.to_string(),
        ])
        .unwrap();
    }
    w.flush().unwrap();
}

#[test]
fn predict_recovers_separable_labels_with_reordered_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::create_dir_all(d.join("data")).unwrap();
    fs::create_dir_all(d.join("out")).unwrap();
    fs::write(
        d.join("c.toml"),
        "dataset_root = \"data\"\noutput_dir = \"out\"\n[train]\nn_rounds = 10\n",
    )
    .unwrap();
    let labels = ["CR", "PR", "SD", "PD"];
    let rows: Vec<(String, &str, f64, f64)> = (0..40)
        .map(|i| {
            (
                format!("P{i:03}"),
                labels[i / 10],
                (i / 10) as f64 * 5.0 + (i % 10) as f64 * 0.1,
                1.0,
            )
        })
        .collect();
    write_table(&d.join("out/features.csv"), ["signal", "constant"], &rows);
    let o = run(d, &["--config", "c.toml", "train"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    // Same rows, columns swapped and labels blanked.
    let swapped: Vec<(String, &str, f64, f64)> = rows.iter().map(|(p, _, a, b)| (p.clone(), "", *b, *a)).collect();
    write_table(&d.join("query.csv"), ["constant", "signal"], &swapped);
    let o = run(
        d,
        &[
            "--config",
            "c.toml",
            "predict",
            "--table",
            "query.csv",
            "--output",
            "pred.csv",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(d.join("pred.csv")).unwrap();
    let got: Vec<String> = r.records().map(|rec| rec.unwrap()[3].to_string()).collect();
    let want: Vec<String> = rows.iter().map(|(_, l, _, _)| l.to_string()).collect();
    assert_eq!(got, want);

    // A table without the model's columns is a data error.
    write_table(&d.join("bad.csv"), ["x", "y"], &swapped);
    let o = run(
        d,
        &[
            "--config", "c.toml", "predict", "--table", "bad.csv", "--output", "p2.csv",
        ],
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn roi_exports_eight_patches_and_lists_empty_cases() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(
        d.join("c.toml"),
        "dataset_root = \"data\"\noutput_dir = \"out\"\nseed = 3\n[phantom]\nn_patients = 1\ncases_per_patient = 2\ndims = [40, 40, 40]\n",
    )
    .unwrap();
    let o = run(d, &["--config", "c.toml", "phantom"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let records = read_case_list(d.join("data/cases.csv")).unwrap();
    assert_eq!(records.len(), 2);
    let emptied = &records[1];
    for s in [&emptied.baseline_session, &emptied.followup_session] {
        let p = d.join("data").join(&emptied.patient_id).join(s).join("seg.nii.gz");
        let mut lm = read_labelmap(&p).unwrap();
        lm.labels.iter_mut().for_each(|l| *l = 0);
        write_labelmap(&lm, &p).unwrap();
    }

    let o = run(d, &["--config", "c.toml", "roi"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = RoiManifest::read(d.join("out/roi/manifest.json")).unwrap();
    assert_eq!(m.cases.len(), 1);
    assert_eq!(m.cases[0].key(), records[0].key());
    assert_eq!(m.cases[0].patches.len(), 8);
    for p in &m.cases[0].patches {
        let bytes = fs::metadata(d.join("out/roi").join(&p.path)).unwrap().len();
        assert_eq!(bytes, 128 * 128 * 4);
    }
    assert_eq!(m.skipped.len(), 1);
    assert_eq!(m.skipped[0].case_id, emptied.key().case_id());
}
