use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use d3rqn::agent::Environment;
use d3rqn::envsim::{StartSet, StepOutcome};
use d3rqn_harness::eval::{run_campaign, Policy};
use d3rqn_harness::report::Table;
use d3rqn_harness::{cmd_eval, cmd_report, cmd_train, RunConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_d3rqn"))
}

fn small_config(dir: &Path, extra: &str) -> RunConfig {
    let mut cfg = RunConfig::parse_str(&format!(
        "total_steps = 4000\nagent.start_episodes = 10\nlog.step_every = 10\nlog.checkpoint_every = 1000\n\
         net.encoder = 16:relu\nnet.lstm_width = 8\nenv.step_cap = 200\n{extra}"
    ))
    .unwrap();
    cfg.out_dir = dir.to_path_buf();
    cfg
}

fn rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn zero_learning_smoke_run_writes_one_row_per_episode() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "agent.lr = 0\nmax_episodes = 50\ntotal_steps = 1000000\n");
    let summary = cmd_train(&cfg).unwrap();
    assert_eq!(summary.episodes, 50);
    assert_eq!(rows(&tmp.path().join("metrics.csv")), 50);
    let header = fs::read_to_string(tmp.path().join("metrics.csv")).unwrap();
    assert!(header.starts_with("episode,steps,cum_reward,mean_reward,epsilon,loss_ma,wall_ms\n"));
    assert!(summary.final_checkpoint.exists());
}

/// Constant-length episodes: collides at step `k` unless `k` exceeds the cap.
struct Stub {
    k: usize,
    cap: usize,
    t: usize,
}

impl Environment for Stub {
    fn obs_len(&self) -> usize {
        1
    }
    fn start_count(&self, _: StartSet) -> usize {
        10
    }
    fn reset_with<R: rand::Rng>(&mut self, _: usize, _: StartSet, _: &mut R) -> d3rqn::Result<Vec<f64>> {
        self.t = 0;
        Ok(vec![0.0])
    }
    fn step(&mut self, _: usize) -> d3rqn::Result<StepOutcome> {
        self.t += 1;
        let terminal = self.t == self.k;
        Ok(StepOutcome {
            obs: vec![0.0],
            reward: if terminal { 0.0 } else { 0.6 },
            terminal,
            truncated: !terminal && self.t >= self.cap,
        })
    }
}

#[test]
fn stub_campaigns_give_closed_form_tables() {
    let crash = run_campaign(|| Ok(Stub { k: 17, cap: 100, t: 0 }), &Policy::Random, StartSet::Train, 30, 1).unwrap();
    assert_eq!(crash.episodes.len(), 300);
    assert_eq!((crash.overall.average, crash.overall.std, crash.overall.cfr), (17.0, 0.0, 0.0));
    assert_eq!(crash.histogram, [300, 0, 16 * 300, 0]);
    assert_eq!(crash.histogram.iter().sum::<usize>(), crash.total_steps);

    let survive = run_campaign(|| Ok(Stub { k: usize::MAX, cap: 40, t: 0 }), &Policy::Random, StartSet::Test, 3, 1).unwrap();
    assert_eq!((survive.overall.cfr, survive.overall.min), (100.0, 40));
}

fn trained_run(dir: &Path) -> PathBuf {
    cmd_train(&small_config(dir, "")).unwrap().final_checkpoint
}

#[test]
fn eval_writes_protocol_rows_and_leaves_checkpoint_alone() {
    let tmp = tempfile::tempdir().unwrap();
    let ckpt = trained_run(tmp.path());
    let before = fs::read(&ckpt).unwrap();
    let out = cmd_eval(&ckpt, StartSet::Train, 30, false, None).unwrap();
    assert_eq!(rows(&out.csv), 300);
    assert_eq!(fs::read(&ckpt).unwrap(), before);

    // Histogram equals a direct count over the CSV columns.
    let table = Table::read(&out.csv).unwrap();
    for k in 0..4 {
        let direct: f64 = table.column(&format!("bin_{k}")).unwrap().iter().sum();
        assert_eq!(direct as usize, out.report.histogram[k]);
    }
    let lengths: f64 = table.column("length").unwrap().iter().sum();
    assert_eq!(lengths as usize, out.report.histogram.iter().sum::<usize>());
    assert!((0.0..=100.0).contains(&out.report.overall.cfr));

    let files = cmd_report(&[tmp.path().to_path_buf()], &tmp.path().join("report")).unwrap();
    let mut hist = csv::Reader::from_path(files.histogram_csv.unwrap()).unwrap();
    for (k, rec) in hist.records().enumerate() {
        let count: f64 = rec.unwrap()[2].parse().unwrap();
        assert_eq!(count as usize, out.report.histogram[k]);
    }
}

#[test]
fn report_overlays_runs_without_touching_them() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    cmd_train(&small_config(&a, "strategy.kind = vdbe\n")).unwrap();
    cmd_train(&small_config(&b, "strategy.kind = bmc\n")).unwrap();
    let snapshot = |d: &Path| fs::read(d.join("metrics.csv")).unwrap();
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    let out = tmp.path().join("fig");
    let files = cmd_report(&[a.clone(), b.clone()], &out).unwrap();
    assert_eq!(files.figures.len(), 3);
    let eps = fs::read_to_string(out.join("epsilon.svg")).unwrap();
    assert!(eps.contains("vdbe (a)") && eps.contains("bmc (b)"));
    assert_eq!(eps.matches("<path").count(), 2);
    assert_eq!((snapshot(&a), snapshot(&b)), (sa, sb));
}

#[test]
fn report_names_file_with_missing_column() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    fs::create_dir_all(&run).unwrap();
    fs::write(run.join("metrics.csv"), "episode,steps\n0,3\n").unwrap();
    let err = cmd_report(&[run], &tmp.path().join("out")).unwrap_err().to_string();
    assert!(err.contains("metrics.csv") && err.contains("cum_reward"), "{err}");
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.conf");
    fs::write(&bad, "agent.n_err = 12\nagent.trace_len = 10\n").unwrap();
    let out = bin().args(["train", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_err"));

    let typo = tmp.path().join("typo.conf");
    fs::write(&typo, "seed = 1\nagent.gama = 0.9\n").unwrap();
    let out = bin().args(["train", "--config"]).arg(&typo).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let out = bin().args(["eval", "--checkpoint"]).arg(tmp.path().join("missing.ckpt")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let ok = tmp.path().join("ok.conf");
    fs::write(&ok, "total_steps = 300\nagent.start_episodes = 2\nnet.encoder = 8:relu\nnet.lstm_width = 4\n").unwrap();
    let run = tmp.path().join("run");
    let out = bin()
        .args(["train", "--config"])
        .arg(&ok)
        .args(["--seed", "3", "--out"])
        .arg(&run)
        .env("APP_AGENT__BATCH", "4")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let saved = fs::read_to_string(run.join("config.txt")).unwrap();
    assert!(saved.contains("agent.batch = 4\n") && saved.contains("seed = 3\n"));
    let out = bin().args(["eval", "--trials", "2", "--mode", "test", "--checkpoint"]).arg(run.join("final.ckpt")).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("CFR"));
}

#[test]
fn eval_rejects_checkpoint_that_does_not_match_config() {
    let tmp = tempfile::tempdir().unwrap();
    let ckpt = trained_run(tmp.path());
    let cfg = fs::read_to_string(tmp.path().join("config.txt")).unwrap();
    fs::write(tmp.path().join("config.txt"), cfg.replace("net.lstm_width = 8", "net.lstm_width = 9")).unwrap();
    let err = cmd_eval(&ckpt, StartSet::Test, 1, false, None).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn divergence_exits_with_runtime_code_and_keeps_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = tmp.path().join("diverge.conf");
    fs::write(
        &conf,
        "total_steps = 5000\nagent.start_episodes = 5\nagent.lr = 1e300\nlog.checkpoint_every = 20\n\
         net.encoder = 8:relu\nnet.lstm_width = 4\n",
    )
    .unwrap();
    let run = tmp.path().join("run");
    let out = bin().args(["train", "--config"]).arg(&conf).arg("--out").arg(&run).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-finite"));
    let kept = fs::read_dir(&run).unwrap().filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("checkpoint_")).count();
    assert!(kept >= 1);
    assert!(!run.join("final.ckpt").exists());
}
