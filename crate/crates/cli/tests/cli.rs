use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

use trackkit::moio::{self, PipelineConfig};
use trackkit::pipeline::run_sequence;
use trackkit::pipeline::SequenceInput;

fn trackkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trackkit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = trackkit(args);
    assert!(
        out.status.success(),
        "trackkit {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn noiseless_simulate_track_eval_reports_perfect_scores() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    let tracks = tmp.path().join("tracks");
    ok(&["simulate", "--out", p(&data), "--sequences", "2", "--noiseless", "--seed", "7"]);
    let seqs = [data.join("SIM-0007"), data.join("SIM-0008")];
    ok(&["track", p(&seqs[0]), p(&seqs[1]), "--out", p(&tracks), "--postprocess"]);
    let report = ok(&["eval", p(&seqs[0]), p(&seqs[1]), "--tracks", p(&tracks), "--out", p(&tmp.path().join("eval"))]);
    let combined = report.lines().find(|l| l.starts_with("COMBINED")).unwrap();
    let cols: Vec<&str> = combined.split_whitespace().collect();
    // COMBINED mAP50 MOTA IDF1 HOTA DetA AssA IDSW FP FN IDs
    assert_eq!(&cols[2..6], &["100.000", "100.000", "100.000", "100.000"], "{report}");
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("eval/eval.json")).unwrap()).unwrap();
    assert_eq!(json["combined"]["hota"], 1.0);
    assert!(tmp.path().join("eval/manifest.json").exists());
}

#[test]
fn staged_run_matches_fused_pipeline_bit_for_bit() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    ok(&["simulate", "--out", p(&data), "--seed", "3", "--length", "120"]);
    let seq = data.join("SIM-0003");

    let staged = tmp.path().join("staged");
    ok(&["track", p(&seq), "--out", p(&staged)]);
    let post = tmp.path().join("post/SIM-0003.txt");
    ok(&["postprocess", p(&staged.join("SIM-0003.txt")), "--sequence", p(&seq), "--out", p(&post)]);

    let fused = tmp.path().join("fused");
    ok(&["track", p(&seq), "--out", p(&fused), "--postprocess"]);

    let staged_bytes = fs::read(&post).unwrap();
    assert!(!staged_bytes.is_empty());
    assert_eq!(staged_bytes, fs::read(fused.join("SIM-0003.txt")).unwrap());

    // and both equal the in-process pipeline on the same files
    let input = SequenceInput {
        meta: moio::parse_seqinfo(&fs::read_to_string(seq.join("seqinfo.ini")).unwrap()).unwrap(),
        dets: moio::parse_detections(&fs::read_to_string(seq.join("det/det.txt")).unwrap()).unwrap().frames,
        warps: None,
        height_samples: None,
    };
    let in_process = moio::write_tracks(&run_sequence(&input, &PipelineConfig::default()).unwrap());
    assert_eq!(in_process.as_bytes(), staged_bytes.as_slice());

    // evaluation of either route gives identical reports
    let eval = |dir: &Path| ok(&["eval", p(&seq), "--tracks", p(dir)]);
    fs::copy(&post, staged.join("SIM-0003.txt")).unwrap();
    assert_eq!(eval(&staged), eval(&fused));
}

#[test]
fn overrides_beat_config_file_and_land_in_manifest() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    ok(&["simulate", "--out", p(&data), "--noiseless", "--length", "40"]);
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "tracker.track_buffer = 50\ntracker.nsa = true\n").unwrap();
    let out = tmp.path().join("out");
    ok(&["track", p(&data.join("SIM-0000")), "--out", p(&out), "--config", p(&cfg), "--set", "tracker.track_buffer=60"]);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let c = &manifest["config"];
    assert_eq!(c["tracker.track_buffer"]["value"], "60");
    assert_eq!(c["tracker.track_buffer"]["source"], "override");
    assert_eq!(c["tracker.nsa"]["source"], "file");
    assert_eq!(c["tracker.high_thresh"]["value"], "0.6");
    assert_eq!(c["tracker.high_thresh"]["source"], "default");
    assert_eq!(manifest["inputs"].as_object().unwrap().len(), 2);
}

#[test]
fn ensemble_of_identical_files_reproduces_them() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    ok(&["simulate", "--out", p(&data), "--noiseless", "--length", "30", "--no-clip"]);
    let det = data.join("SIM-0000/det/det.txt");
    let fused = tmp.path().join("fused.txt");
    // a tight gate so that only the duplicated boxes cluster
    ok(&["ensemble", p(&det), p(&det), "--out", p(&fused), "--set", "ensemble.iou_thresh=0.95"]);
    let a = moio::parse_detections(&fs::read_to_string(&det).unwrap()).unwrap();
    let b = moio::parse_detections(&fs::read_to_string(&fused).unwrap()).unwrap();
    assert_eq!(a.len(), b.len());
    for (f, boxes) in &a.frames {
        for d in boxes {
            assert!(b.frames[f].iter().any(|e| trackkit::iou(d, e) > 0.999), "frame {f}");
        }
    }
}

#[test]
fn search_with_subprocess_objective_finds_the_peak() {
    let tmp = TempDir::new().unwrap();
    let script = "import sys; x = float(sys.argv[1]); print('log line'); print(-(x - 0.3) ** 2)";
    let out = ok(&[
        "search",
        "--set",
        "search.rounds=3",
        "--out",
        p(tmp.path()),
        "--",
        "python3",
        "-c",
        script,
    ]);
    let best: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("best params ["))
        .and_then(|l| l.trim_end_matches(']').parse().ok())
        .unwrap();
    assert!((best - 0.3).abs() < 0.1, "{out}");
    assert!(tmp.path().join("search.json").exists());
}

#[test]
fn ablate_interpolation_row_not_below_baseline() {
    let out = ok(&["ablate", "--simulate", "2"]);
    let hota: Vec<f64> = out
        .lines()
        .skip(1)
        .map(|l| {
            let cols: Vec<&str> = l.split_whitespace().collect();
            cols[cols.len() - 5].parse().unwrap()
        })
        .collect();
    assert_eq!(hota.len(), 5, "{out}");
    assert!(hota[1] >= hota[0], "{out}");
}

#[test]
fn exit_codes() {
    assert_eq!(trackkit(&["--help"]).status.code(), Some(0));
    assert_eq!(trackkit(&["defaults"]).status.code(), Some(0));
    assert_eq!(trackkit(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(trackkit(&["track"]).status.code(), Some(1));
    assert_eq!(trackkit(&["defaults", "--set", "nonsense"]).status.code(), Some(1));
    assert_eq!(trackkit(&["defaults", "--set", "tracker.unknown=1"]).status.code(), Some(1));
    assert_eq!(trackkit(&["defaults", "--set", "tracker.high_thresh=abc"]).status.code(), Some(1));

    let tmp = TempDir::new().unwrap();
    let missing = trackkit(&["track", p(&tmp.path().join("nope")), "--out", p(tmp.path())]);
    assert_eq!(missing.status.code(), Some(2));

    // malformed detection file: the error names the file and line
    let seq = tmp.path().join("bad");
    fs::create_dir_all(seq.join("det")).unwrap();
    fs::write(seq.join("seqinfo.ini"), "name=bad\nimWidth=100\nimHeight=100\nframeRate=30\nseqLength=3\n").unwrap();
    fs::write(seq.join("det/det.txt"), "1,-1,1,1,10,10,0.9\nnot,a,row\n").unwrap();
    let bad = trackkit(&["track", p(&seq), "--out", p(tmp.path())]);
    assert_eq!(bad.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&bad.stderr);
    assert!(msg.contains("det.txt") && msg.contains("line 2"), "{msg}");

    // a non-finite objective score is a numerical failure
    let nan = trackkit(&["search", "--", "sh", "-c", "echo nan"]);
    assert_eq!(nan.status.code(), Some(3), "{}", String::from_utf8_lossy(&nan.stderr));
}
