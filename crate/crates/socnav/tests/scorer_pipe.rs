use std::path::{Path, PathBuf};

use socnav::runner::make_env;
use socnav::scorer::{load_scorer, ProcessScorer};
use socnav_core::config::RewardKind;
use socnav_core::error::{EnvError, ScorerError};
use socnav_core::reward::SocialScorer;
use socnav_core::scenario::generate;
use socnav_core::{preset, Action};

fn script(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn process(path: &Path) -> String {
    format!("process:sh {}", path.display())
}

#[test]
fn constant_scorer_feeds_the_reward() {
    let tmp = tempfile::tempdir().unwrap();
    let s = script(
        tmp.path(),
        "half.sh",
        "echo socnav-scorer/1\nwhile read line; do echo 0.5; done\n",
    );
    let mut cfg = preset(1).unwrap();
    cfg.reward.function = RewardKind::Sngnn;
    cfg.reward.scorer = process(&s);
    let mut env = make_env(cfg, None).unwrap();
    env.reset(1).unwrap();
    let out = env.step(&Action::Discrete { index: 0 }).unwrap();
    assert_eq!(out.info.sngnn_reward, Some(-0.5));
    assert_eq!(out.reward, out.info.distance_reward - 0.5);
}

#[test]
fn requests_are_state_records() {
    let tmp = tempfile::tempdir().unwrap();
    let log = tmp.path().join("requests.ndjson");
    let body = format!(
        "echo socnav-scorer/1\nwhile read line; do echo \"$line\" >> {}; echo 1; done\n",
        log.display()
    );
    let s = script(tmp.path(), "tee.sh", &body);
    let world = generate(&preset(2).unwrap()).unwrap();
    let mut scorer = ProcessScorer::spawn(&format!("sh {}", s.display())).unwrap();
    assert_eq!(scorer.score(&world).unwrap(), 1.0);
    assert_eq!(scorer.score(&world).unwrap(), 1.0);
    drop(scorer);
    let text = std::fs::read_to_string(&log).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let socnav::LogLine::State { state } = serde_json::from_str(lines[0]).unwrap() else {
        panic!()
    };
    assert!(state.same_state(&world));
}

#[test]
fn out_of_range_score_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let s = script(
        tmp.path(),
        "high.sh",
        "echo socnav-scorer/1\nwhile read line; do echo 1.2; done\n",
    );
    let world = generate(&preset(1).unwrap()).unwrap();
    let mut scorer = load_scorer(&process(&s), None).unwrap();
    assert_eq!(scorer.score(&world), Err(ScorerError::OutOfRange(1.2)));
}

#[test]
fn bad_banner_fails_the_handshake() {
    let tmp = tempfile::tempdir().unwrap();
    let s = script(tmp.path(), "rude.sh", "echo hello\n");
    assert!(matches!(
        load_scorer(&process(&s), None),
        Err(ScorerError::Handshake(_))
    ));
    let silent = script(tmp.path(), "silent.sh", "exit 0\n");
    assert!(matches!(
        load_scorer(&process(&silent), None),
        Err(ScorerError::Handshake(_))
    ));
}

#[test]
fn dying_scorer_aborts_the_step() {
    let tmp = tempfile::tempdir().unwrap();
    let s = script(
        tmp.path(),
        "once.sh",
        "echo socnav-scorer/1\nread line\necho 0.9\n",
    );
    let mut cfg = preset(1).unwrap();
    cfg.reward.function = RewardKind::Sngnn;
    cfg.reward.scorer = process(&s);
    let mut env = make_env(cfg, None).unwrap();
    env.reset(1).unwrap();
    env.step(&Action::Discrete { index: 0 }).unwrap();
    let err = env.step(&Action::Discrete { index: 0 }).unwrap_err();
    assert!(
        matches!(err, EnvError::Scorer(ScorerError::Failed(_))),
        "{err}"
    );
}

#[test]
fn garbage_reply_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let s = script(
        tmp.path(),
        "words.sh",
        "echo socnav-scorer/1\nwhile read line; do echo fine; done\n",
    );
    let world = generate(&preset(1).unwrap()).unwrap();
    let mut scorer = load_scorer(&process(&s), None).unwrap();
    assert!(matches!(scorer.score(&world), Err(ScorerError::Failed(_))));
}

#[test]
fn file_scorer_reads_its_shape() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("wide.toml"), "sigma_side = 2.0\n").unwrap();
    let world = generate(&preset(2).unwrap()).unwrap();
    let mut wide = load_scorer("file:wide.toml", Some(tmp.path())).unwrap();
    let mut base = load_scorer("surrogate", None).unwrap();
    assert!(wide.score(&world).unwrap() <= base.score(&world).unwrap());
    std::fs::write(tmp.path().join("typo.toml"), "sigma_sid = 2.0\n").unwrap();
    assert!(matches!(
        load_scorer("file:typo.toml", Some(tmp.path())),
        Err(ScorerError::Handshake(_))
    ));
}
