//! The `agflow` binary end to end: generation, training, resume,
//! evaluation, gradient checking, benchmarking, visualisation and exit
//! codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_agflow");

fn agflow(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn agflow")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn ok(args: &[&str]) -> String {
    let o = agflow(args);
    assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(path: &Path, text: &str) -> PathBuf {
    fs::write(path, text).unwrap();
    path.to_path_buf()
}

const TINY_MODEL: &str = "feature_channels = 8\nchannels = 8\nnodes = 4\niters = 2\nradius = 1\nlevels = 2\nattention_reduction = 2\n";

fn gen_dataset(dir: &Path, name: &str, extra: &str) -> PathBuf {
    let cfg = write(&dir.join(format!("{name}.gen")), &format!("pairs = 3\nheight = 16\nwidth = 16\n{extra}"));
    let out = dir.join(name);
    ok(&["gen", "--config", s(&cfg), "--seed", "5", "--out", s(&out)]);
    out
}

fn train_config(dir: &Path, data: &Path, extra: &str) -> PathBuf {
    train_config_steps(dir, data, 6, extra)
}

fn train_config_steps(dir: &Path, data: &Path, steps: usize, extra: &str) -> PathBuf {
    write(
        &dir.join("train.txt"),
        &format!("{TINY_MODEL}data = {}\nsteps = {steps}\nlog_every = 2\ncheckpoint_every = 3\nlr = 1e-3\n{extra}", s(data)),
    )
}

#[test]
fn gen_is_deterministic_and_writes_one_line_per_pair() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen_dataset(dir.path(), "a", "");
    let b = gen_dataset(dir.path(), "b", "");
    let manifest = fs::read_to_string(a.join("manifest.tsv")).unwrap();
    assert_eq!(manifest.lines().count(), 3);
    assert_eq!(manifest, fs::read_to_string(b.join("manifest.tsv")).unwrap());
    for line in manifest.lines() {
        let flo = line.split('\t').nth(3).unwrap();
        assert_eq!(fs::read(a.join(flo)).unwrap(), fs::read(b.join(flo)).unwrap());
    }
    assert!(a.join("gen_config.txt").exists());
}

#[test]
fn zero_motion_dataset_has_zero_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let d = gen_dataset(dir.path(), "z", "motion = translate:0:0\n");
    let ds = agflow::data::Dataset::open(&d).unwrap();
    for sample in ds.load_all().unwrap() {
        let zero = agflow::data::FlowField::zeros(16, 16);
        assert_eq!(agflow::data::epe(&zero, &sample.flow).unwrap(), 0.0);
        assert_eq!(sample.image1, sample.image2);
    }
}

#[test]
fn train_eval_resume_and_config_echo() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_dataset(dir.path(), "d", "");
    let cfg = train_config(dir.path(), &data, "");
    let run1 = dir.path().join("run1");
    let stdout = ok(&["train", "--config", s(&cfg), "--out", s(&run1)]);
    assert!(stdout.starts_with("metric\tinitial\tfinal\n"), "{stdout}");

    // Log: one `step loss epe` line per log interval, finite positive loss.
    let log = fs::read_to_string(run1.join("train_log.tsv")).unwrap();
    let rows: Vec<Vec<&str>> = log.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 6 / 2);
    assert!(rows.iter().all(|r| r.len() == 3));
    let loss0: f64 = rows[0][1].parse().unwrap();
    assert!(loss0.is_finite() && loss0 > 0.0);
    for f in ["step_000003.agfw", "final.agfw", "config.txt", "summary.tsv"] {
        assert!(run1.join(f).exists(), "{f} missing");
    }

    // Re-running from the echoed configuration reproduces the run.
    let run2 = dir.path().join("run2");
    ok(&["train", "--config", s(&run1.join("config.txt")), "--out", s(&run2)]);
    assert_eq!(fs::read(run1.join("final.agfw")).unwrap(), fs::read(run2.join("final.agfw")).unwrap());
    assert_eq!(log, fs::read_to_string(run2.join("train_log.tsv")).unwrap());

    // Resuming from the step-3 checkpoint reproduces the remaining steps.
    let run3 = dir.path().join("run3");
    let resume = train_config(dir.path(), &data, &format!("resume = {}\n", s(&run1.join("step_000003.agfw"))));
    ok(&["train", "--config", s(&resume), "--out", s(&run3)]);
    assert_eq!(fs::read(run1.join("final.agfw")).unwrap(), fs::read(run3.join("final.agfw")).unwrap());
    let tail: Vec<&str> = log.lines().filter(|l| l.split('\t').next().unwrap().parse::<usize>().unwrap() >= 3).collect();
    assert_eq!(fs::read_to_string(run3.join("train_log.tsv")).unwrap().lines().collect::<Vec<_>>(), tail);

    // Evaluation prints and writes the documented table.
    let ev = dir.path().join("eval");
    let ck = format!("checkpoint = {}\n", s(&run1.join("final.agfw")));
    let ecfg = train_config(dir.path(), &data, &ck);
    let table = ok(&["eval", "--config", s(&ecfg), "--out", s(&ev), "--threads", "2"]);
    assert_eq!(table, fs::read_to_string(ev.join("eval.tsv")).unwrap());
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "pair_id\tepe\tf1_all\tpixels");
    assert_eq!(lines.len(), 1 + 3 + 1);
    let all: Vec<&str> = lines[4].split('\t').collect();
    assert_eq!(all[0], "ALL");
    assert!(all[1].parse::<f64>().unwrap().is_finite());
    // Aggregate pixels are the valid pixels summed over pairs.
    let per_pair: usize = lines[1..4].iter().map(|l| l.split('\t').nth(3).unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(all[3].parse::<usize>().unwrap(), per_pair);
    assert!(per_pair > 0 && per_pair <= 3 * 16 * 16);

    // A checkpoint from a different architecture is a shape error naming
    // the parameter.
    let wide = write(&dir.path().join("wide.txt"), &fs::read_to_string(&ecfg).unwrap().replace("channels = 8\n", "channels = 12\n"));
    let o = agflow(&["eval", "--config", s(&wide), "--out", s(&ev)]);
    assert_eq!(code(&o), 5, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("weight"));
}

#[test]
fn untrained_model_evaluates_to_finite_epe() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_dataset(dir.path(), "d", "");
    let cfg = train_config_steps(dir.path(), &data, 0, "");
    let run = dir.path().join("run");
    ok(&["train", "--config", s(&cfg), "--out", s(&run)]);
    let ecfg = write(
        &dir.path().join("eval.txt"),
        &format!("{TINY_MODEL}data = {}\ncheckpoint = {}\n", s(&data), s(&run.join("final.agfw"))),
    );
    let table = ok(&["eval", "--config", s(&ecfg), "--out", s(&run)]);
    let epe: f64 = table.lines().last().unwrap().split('\t').nth(1).unwrap().parse().unwrap();
    assert!(epe.is_finite() && epe > 0.0);
}

#[test]
fn gradcheck_reports_every_case_within_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["gradcheck", "--out", s(dir.path())]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "case\tmax_rel_err\ttolerance\tstatus");
    assert!(lines.len() > 40);
    assert!(lines[1..].iter().all(|l| l.ends_with("\tok")));
    assert!(lines.iter().any(|l| l.starts_with("model_micro")));
    assert_eq!(out, fs::read_to_string(dir.path().join("gradcheck.tsv")).unwrap());
}

#[test]
fn bench_orders_variants_by_parameter_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir.path().join("b.txt"), &format!("{TINY_MODEL}bench_height = 16\nbench_width = 16\n"));
    let out = ok(&["bench", "--config", s(&cfg), "--out", s(dir.path())]);
    let total = |g: &str| -> u64 {
        out.lines()
            .find(|l| l.starts_with(&format!("{g}\tparams\ttotal\t")))
            .unwrap_or_else(|| panic!("no {g} total in\n{out}"))
            .rsplit('\t')
            .next()
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(total("base") < total("sgr") && total("sgr") < total("agr"));
    assert!(out.lines().any(|l| l.starts_with("agr\tlatency_ms_median\t")));
    assert!(dir.path().join("bench.tsv").exists());

    let single = ok(&["bench", "--config", s(&cfg), "--out", s(dir.path()), "--graph", "sgr"]);
    assert!(single.lines().skip(1).all(|l| l.starts_with("sgr\t")));

    let few = write(&dir.path().join("few.txt"), "bench_runs = 5\n");
    assert_eq!(code(&agflow(&["bench", "--config", s(&few)])), 2);
}

#[test]
fn viz_renders_zero_field_white_and_rejects_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let flo = dir.path().join("zero.flo");
    agflow::data::write_flo(&agflow::data::FlowField::zeros(4, 5), &flo).unwrap();
    let ppm = dir.path().join("zero.ppm");
    ok(&["viz", s(&flo), "--out", s(&ppm)]);
    let img = agflow::data::read_ppm(&ppm).unwrap();
    assert_eq!((img.height, img.width), (4, 5));
    assert!(img.data.iter().all(|&v| v == 1.0));

    let mut bytes = fs::read(&flo).unwrap();
    bytes[0] = b'X';
    let bad = dir.path().join("bad.flo");
    fs::write(&bad, bytes).unwrap();
    let o = agflow(&["viz", s(&bad)]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("byte 0"));
    assert_eq!(code(&agflow(&["viz", s(&dir.path().join("missing.flo"))])), 3);
}

#[test]
fn configuration_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(&dir.path().join("u.txt"), "stepz = 3\n");
    let o = agflow(&["train", "--config", s(&unknown)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("stepz"));
    assert_eq!(code(&agflow(&["train", "--graph", "huge"])), 2);
    assert_eq!(code(&agflow(&["train", "--precision", "16"])), 2);
    assert_eq!(code(&agflow(&["frobnicate"])), 2);
    let small = write(&dir.path().join("g.txt"), "height = 4\n");
    assert_eq!(code(&agflow(&["gen", "--config", s(&small), "--out", s(&dir.path().join("g"))])), 2);
    // Training on a directory without a manifest is an I/O failure.
    let empty = write(&dir.path().join("e.txt"), &format!("data = {}\n", s(&dir.path().join("nowhere"))));
    assert_eq!(code(&agflow(&["train", "--config", s(&empty), "--out", s(&dir.path().join("r"))])), 3);
}
