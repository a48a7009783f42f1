//! End-to-end runs of the `beat` binary. Stdout of each case is compared with
//! `tests/golden/<case>.out`; set `UPDATE_GOLDEN=1` to rewrite the goldens.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use beat_core::motion::{beat_skeleton, parse_bvh, write_bvh, write_wav, AudioTrack, MotionClip};

const EXE: &str = env!("CARGO_BIN_EXE_beat");

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

/// Scratch directory holding a copy of every fixture, so commands can use
/// relative paths and printed paths stay machine independent.
fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(manifest_dir().join("tests/fixtures")).unwrap() {
        let p = entry.unwrap().path();
        std::fs::copy(&p, dir.path().join(p.file_name().unwrap())).unwrap();
    }
    dir
}

fn beat(dir: &Path, args: &[&str]) -> Output {
    Command::new(EXE)
        .args(args)
        .current_dir(dir)
        .env_remove("BEATKIT_CONFIG")
        .env("RUST_LOG", "off")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn check_golden(name: &str, actual: &str) {
    let path = manifest_dir().join("tests/golden").join(format!("{name}.out"));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, want, "golden {name} differs");
}

/// Runs `args` twice, checks the exit code, byte-identical output and the
/// golden transcript (exit code, stdout, stderr).
fn golden(name: &str, args: &[&str], code: i32) {
    let dir = workspace();
    let first = beat(dir.path(), args);
    assert_eq!(first.status.code(), Some(code), "{name}: {}", stderr(&first));
    let second = beat(dir.path(), args);
    assert_eq!(first.stdout, second.stdout, "{name} is not deterministic");
    assert_eq!(first.stderr, second.stderr, "{name} is not deterministic");
    let transcript = format!(
        "$ beat {}\nexit {code}\n--- stdout\n{}--- stderr\n{}",
        args.join(" "),
        stdout(&first),
        stderr(&first)
    );
    check_golden(name, &transcript);
}

fn beat_clip(frames: usize, phase: f64) -> MotionClip {
    let skeleton = beat_skeleton();
    let probe = MotionClip::zeros(skeleton.clone(), 30.0, 1).unwrap();
    let channels = probe.num_channels();
    let data = (0..frames)
        .flat_map(|t| {
            (0..channels).map(move |c| match c {
                0..=2 => [0.0, 95.0, 0.0][c],
                _ => 8.0 * (0.15 * t as f64 + 0.37 * c as f64 + phase).sin(),
            })
        })
        .collect();
    MotionClip::from_flat(skeleton, 30.0, data).unwrap()
}

fn tone(rate: u32, seconds: f64) -> Vec<u8> {
    let n = (rate as f64 * seconds) as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / rate as f64;
            let burst = if (t * 2.0).fract() < 0.1 { 0.8 } else { 0.05 };
            burst * (2.0 * std::f64::consts::PI * 220.0 * t).sin()
        })
        .collect();
    write_wav(&AudioTrack::mono(rate, samples).unwrap())
}

#[test]
fn fgd_of_identical_features_is_zero() {
    golden("fgd_identical", &["eval", "fgd", "--real", "feats_a.csv", "--gen", "feats_a.csv"], 0);
    let dir = workspace();
    let o = beat(dir.path(), &["eval", "fgd", "--real", "feats_a.csv", "--gen", "feats_a.csv"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["value"].as_f64(), Some(0.0));
}

#[test]
fn fgd_of_shifted_features() {
    golden("fgd_shifted", &["eval", "fgd", "--real", "feats_a.csv", "--gen", "feats_b.csv"], 0);
}

#[test]
fn fgd_dimension_mismatch_exits_3() {
    golden("fgd_mismatch", &["eval", "fgd", "--real", "feats_a.csv", "--gen", "feats_2d.csv"], 3);
}

#[test]
fn beatalign_of_identical_beats_is_one() {
    golden(
        "beatalign_identical",
        &["eval", "beatalign", "--gesture", "beats_a.csv", "--audio", "beats_a.csv"],
        0,
    );
    let dir = workspace();
    let o = beat(dir.path(), &["eval", "beatalign", "--gesture", "beats_a.csv", "--audio", "beats_a.csv"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["value"].as_f64(), Some(1.0));
}

#[test]
fn beatalign_of_offset_beats() {
    golden(
        "beatalign_offset",
        &["eval", "beatalign", "--gesture", "beats_a.csv", "--audio", "beats_b.csv", "--sigma", "0.1"],
        0,
    );
}

#[test]
fn srgr_of_perfect_prediction_is_one() {
    golden("srgr_perfect", &["eval", "srgr", "--truth", "arm.bvh", "--pred", "arm.bvh"], 0);
}

#[test]
fn srgr_of_shifted_prediction() {
    golden("srgr_shifted", &["eval", "srgr", "--truth", "arm.bvh", "--pred", "arm_shifted.bvh"], 0);
}

#[test]
fn srgr_with_mismatched_clip_sets_exits_3() {
    golden("srgr_mismatch", &["eval", "srgr", "--truth", "arm.bvh", "arm.bvh", "--pred", "arm.bvh"], 3);
}

#[test]
fn srgr_with_relevance_weights() {
    let dir = workspace();
    let mut csv = String::from("frame,time,score\n");
    for i in 0..8 {
        csv.push_str(&format!("{i},0,{}\n", if i < 3 { 0.0 } else { 1.0 }));
    }
    std::fs::write(dir.path().join("w.csv"), csv).unwrap();
    let o = beat(dir.path(), &["eval", "srgr", "--truth", "arm.bvh", "--pred", "arm_shifted.bvh", "--lambda", "w.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    // The shifted root only differs in frames 0..3, which carry zero weight.
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["value"].as_f64(), Some(1.0));
    check_golden("srgr_weighted", &stdout(&o));
}

#[test]
fn l1_diversity_report() {
    golden("l1div", &["eval", "l1div", "--clips", "arm.bvh", "arm_shifted.bvh"], 0);
}

#[test]
fn agreement_table_from_counts() {
    golden("stats_agreement", &["stats", "--agreement", "counts.csv"], 0);
    let dir = workspace();
    let out = stdout(&beat(dir.path(), &["stats", "--agreement", "counts.csv"]));
    let avg: f64 = out
        .lines()
        .find(|l| l.starts_with("avg_with_zero"))
        .and_then(|l| l.rsplit(',').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((avg - 0.95).abs() <= 0.01, "{avg}");
}

#[test]
fn empty_annotation_gives_zero_histogram() {
    golden("stats_empty", &["stats", "--annotation", "empty.txt", "--textgrid", "empty.TextGrid"], 0);
}

#[test]
fn annotation_stats_and_tables() {
    golden(
        "stats_clip",
        &["stats", "--annotation", "clip.txt", "--textgrid", "clip.TextGrid", "--out-dir", "stats"],
        0,
    );
    let dir = workspace();
    let o = beat(
        dir.path(),
        &["stats", "--annotation", "clip.txt", "--textgrid", "clip.TextGrid", "--out-dir", "stats"],
    );
    assert!(stdout(&o).contains("low_score_fraction 0.650\n"));
    let per_word = std::fs::read_to_string(dir.path().join("stats/per_word.csv")).unwrap();
    check_golden("stats_clip_per_word", &per_word);
    let scores = std::fs::read_to_string(dir.path().join("stats/clip.scores.csv")).unwrap();
    assert_eq!(scores.lines().count(), 61);
}

#[test]
fn stats_with_unpaired_inputs_exits_3() {
    golden(
        "stats_mismatch",
        &["stats", "--annotation", "clip.txt", "empty.txt", "--textgrid", "clip.TextGrid"],
        3,
    );
}

#[test]
fn convert_fk_writes_positions() {
    golden("convert_fk", &["convert", "--in", "arm.bvh", "--fk", "--out", "arm.csv"], 0);
    let dir = workspace();
    beat(dir.path(), &["convert", "--in", "arm.bvh", "--fk", "--out", "arm.csv"]);
    let csv = std::fs::read_to_string(dir.path().join("arm.csv")).unwrap();
    check_golden("convert_fk_csv", &csv);
}

#[test]
fn convert_resamples_bvh() {
    golden("convert_resample", &["convert", "--in", "arm.bvh", "--fps", "15", "--out", "arm15.bvh"], 0);
    let dir = workspace();
    beat(dir.path(), &["convert", "--in", "arm.bvh", "--fps", "15", "--out", "arm15.bvh"]);
    let clip = parse_bvh(&std::fs::read_to_string(dir.path().join("arm15.bvh")).unwrap()).unwrap();
    assert_eq!(clip.num_frames(), 4);
}

#[test]
fn convert_reports_parse_line() {
    let dir = workspace();
    let o = beat(dir.path(), &["convert", "--in", "broken.bvh", "--out", "x.bvh"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("broken.bvh: line 11:"), "{}", stderr(&o));
    assert!(!dir.path().join("x.bvh").exists());
}

#[test]
fn convert_resamples_audio() {
    let dir = workspace();
    std::fs::write(dir.path().join("tone.wav"), tone(16000, 1.0)).unwrap();
    let o = beat(dir.path(), &["convert", "--in", "tone.wav", "--sample-rate", "8000", "--out", "tone8k.wav"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    check_golden("convert_audio", &stdout(&o));
}

#[test]
fn motion_and_audio_beats() {
    golden("beats_bvh", &["beats", "--bvh", "arm.bvh", "--joints", "all"], 0);
    let dir = workspace();
    std::fs::write(dir.path().join("tone.wav"), tone(16000, 2.0)).unwrap();
    let o = beat(dir.path(), &["beats", "--audio", "tone.wav", "--out", "tone_beats.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("tone_beats.csv")).unwrap();
    check_golden("beats_audio", &csv);
    // The same extraction feeds beat alignment directly.
    let o = beat(dir.path(), &["eval", "beatalign", "--gesture", "tone_beats.csv", "--audio", "tone.wav"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["value"].as_f64(), Some(1.0));
}

#[test]
fn usage_errors_exit_2() {
    let dir = workspace();
    assert_eq!(beat(dir.path(), &["eval", "psnr"]).status.code(), Some(2));
    assert_eq!(beat(dir.path(), &["beats"]).status.code(), Some(2));
    assert_eq!(beat(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn missing_input_exits_1() {
    let dir = workspace();
    let o = beat(dir.path(), &["eval", "l1div", "--clips", "nope.bvh", "arm.bvh"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.bvh"));
}

#[test]
fn config_file_and_environment() {
    let dir = workspace();
    std::fs::write(dir.path().join("run.toml"), "[metrics]\nbeat_sigma = 0.3\n").unwrap();
    let args = ["eval", "beatalign", "--gesture", "beats_a.csv", "--audio", "beats_b.csv"];
    let from_flag = beat(dir.path(), &[&["--config", "run.toml"][..], &args].concat());
    let from_env = Command::new(EXE)
        .args(args)
        .current_dir(dir.path())
        .env("BEATKIT_CONFIG", "run.toml")
        .output()
        .unwrap();
    assert_eq!(from_flag.stdout, from_env.stdout);
    assert!(stdout(&from_flag).contains("\"sigma\": 0.300000"));
    // Flags win over the file.
    let o = beat(dir.path(), &[&["--config", "run.toml"][..], &args, &["--sigma", "0.1"]].concat());
    assert!(stdout(&o).contains("\"sigma\": 0.100000"));

    std::fs::write(dir.path().join("bad.toml"), "[metrics]\nsigma = 0.3\n").unwrap();
    let o = beat(dir.path(), &[&["--config", "bad.toml"][..], &args].concat());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn camn_gradcheck_passes() {
    golden("camn_gradcheck", &["camn", "gradcheck", "--toy"], 0);
}

#[test]
fn camn_train_is_reproducible() {
    let dir = workspace();
    let args = ["camn", "train", "--toy", "--steps", "4", "--clips", "3", "--frames", "32", "--seed", "3"];
    let a = beat(dir.path(), &[&args[..], &["--out", "a"]].concat());
    let b = beat(dir.path(), &[&args[..], &["--out", "b"]].concat());
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(b.status.code(), Some(0), "{}", stderr(&b));
    for f in ["manifest.json", "losses.csv", "checkpoint.json"] {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(x == y, "{f} differs between identical runs");
    }
    let losses = std::fs::read_to_string(dir.path().join("a/losses.csv")).unwrap();
    assert_eq!(losses.lines().count(), 5);
    check_golden("camn_train", &stdout(&a).replace("wrote a", "wrote <dir>"));

    // A checkpoint reloads into the recorded config.
    let o = beat(
        dir.path(),
        &["camn", "forward", "--toy", "--clips", "3", "--frames", "32", "--seed", "3", "--checkpoint", "a/checkpoint.json"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn camn_nan_loss_exits_4() {
    let dir = workspace();
    std::fs::write(dir.path().join("hot.toml"), "[camn]\nlr = 1e200\n").unwrap();
    let o = beat(
        dir.path(),
        &["--config", "hot.toml", "camn", "train", "--toy", "--steps", "3", "--clips", "2", "--frames", "24"],
    );
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn camn_synthesize_keeps_seed_frames() {
    let dir = workspace();
    let seed = beat_clip(20, 0.0);
    std::fs::write(dir.path().join("seed.bvh"), write_bvh(&seed)).unwrap();
    let args = ["camn", "synthesize", "--toy", "--seed-pose", "seed.bvh", "--len", "120"];
    let o = beat(dir.path(), &[&args[..], &["--out", "gen.bvh"]].concat());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let gen = parse_bvh(&std::fs::read_to_string(dir.path().join("gen.bvh")).unwrap()).unwrap();
    let seed = parse_bvh(&std::fs::read_to_string(dir.path().join("seed.bvh")).unwrap()).unwrap();
    assert_eq!(gen.num_frames(), 120);
    assert_eq!(gen.num_channels(), 231);
    for t in 0..8 {
        assert_eq!(gen.frame(t), seed.frame(t), "frame {t}");
    }
    assert_ne!(gen.frame(8), seed.frame(8));
    let again = beat(dir.path(), &[&args[..], &["--out", "gen2.bvh"]].concat());
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(
        std::fs::read(dir.path().join("gen.bvh")).unwrap(),
        std::fs::read(dir.path().join("gen2.bvh")).unwrap()
    );
}

#[test]
fn camn_synthesize_rejects_short_or_foreign_seed() {
    let dir = workspace();
    std::fs::write(dir.path().join("short.bvh"), write_bvh(&beat_clip(5, 0.0))).unwrap();
    let o = beat(dir.path(), &["camn", "synthesize", "--toy", "--seed-pose", "short.bvh", "--len", "20", "--out", "g.bvh"]);
    assert_eq!(o.status.code(), Some(3));
    let o = beat(dir.path(), &["camn", "synthesize", "--toy", "--seed-pose", "arm.bvh", "--len", "20", "--out", "g.bvh"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn camn_trains_on_a_data_directory() {
    let dir = workspace();
    let data = dir.path().join("data");
    std::fs::create_dir(&data).unwrap();
    for (i, stem) in ["1_a_0_1_1", "2_b_0_1_1"].iter().enumerate() {
        let clip = beat_clip(48, i as f64);
        std::fs::write(data.join(format!("{stem}.bvh")), write_bvh(&clip)).unwrap();
        std::fs::write(data.join(format!("{stem}.wav")), tone(16000, 1.6)).unwrap();
        std::fs::copy(dir.path().join("clip.TextGrid"), data.join(format!("{stem}.TextGrid"))).unwrap();
    }
    let o = beat(
        dir.path(),
        &["camn", "train", "--toy", "--data", "data", "--crop", "24", "--steps", "2", "--out", "run"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("clips 4\n"), "{}", stdout(&o));
}

#[test]
fn camn_ablation_lists_every_variant() {
    let dir = workspace();
    let o = beat(
        dir.path(),
        &["camn", "ablate", "--toy", "--steps", "2", "--clips", "2", "--frames", "24", "--drop", "text", "--drop", "semantic"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let names: Vec<&str> = out.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["full", "-text", "-semantic"]);
}
