use std::process::Command;

use omlcae::harness::{ConfigOverrides, ExperimentConfig, Profile};

fn omlcae() -> Command {
    Command::new(env!("CARGO_BIN_EXE_omlcae"))
}

#[test]
fn qpsk_with_odd_bits_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = omlcae()
        .args(["run", "--bits", "3", "--channel-uses", "2", "--methods", "qpsk_mle", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("qpsk"), "stderr: {err}");
    assert!(!dir.path().join("metrics.csv").exists());
}

#[test]
fn empty_config_is_paper_profile() {
    let cfg = ConfigOverrides::from_toml_str("").unwrap().resolve().unwrap();
    assert_eq!(cfg, ExperimentConfig::for_profile(Profile::Paper));
    assert_eq!(cfg.meta.outer_iters, 6000);
    assert_eq!(cfg.meta.finetune_iters, 1000);
    assert_eq!(cfg.n_sequences, 300);
}

#[test]
fn unknown_config_key_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "sequences_typo = 3\n").unwrap();
    let out = omlcae().args(["run", "--config"]).arg(&path).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("sequences_typo"));
}

#[test]
fn gradcheck_and_channel_stats_run() {
    let g = omlcae().args(["gradcheck"]).output().unwrap();
    assert!(g.status.success(), "{}", String::from_utf8_lossy(&g.stderr));
    let c = omlcae().args(["channel-stats", "--rho", "0.9", "--steps", "2000"]).output().unwrap();
    assert!(c.status.success());
    assert!(!c.stdout.is_empty());
}

#[test]
fn efficiency_subcommand_writes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let header = "method,snr_db,shots,sequence,ser,seed\n";
    let mut oml = String::from(header);
    let mut cae = String::from(header);
    for shots in 1..=4 {
        for seq in 1..=3 {
            oml.push_str(&format!("oml_cae,5.0,{shots},{seq},{},0\n", 0.2 / shots as f64));
            cae.push_str(&format!("cae,5.0,{shots},{seq},{},0\n", 0.4 / shots as f64));
        }
    }
    let (o, c, e) = (dir.path().join("o.csv"), dir.path().join("c.csv"), dir.path().join("e.csv"));
    std::fs::write(&o, oml).unwrap();
    std::fs::write(&c, cae).unwrap();
    let out = omlcae()
        .args(["efficiency", "--warmup", "1", "--oml"])
        .arg(&o)
        .arg("--cae")
        .arg(&c)
        .arg("--out")
        .arg(&e)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&e).unwrap();
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn readme_config_example_parses() {
    let readme = include_str!("../../../README.md");
    let start = readme.find("```toml\n").expect("toml block") + 8;
    let len = readme[start..].find("```").unwrap();
    let cfg = ConfigOverrides::from_toml_str(&readme[start..start + len])
        .unwrap()
        .resolve()
        .unwrap();
    assert_eq!(cfg.profile, Profile::Desk);
    assert_eq!(cfg.snr_db, vec![5.0, 10.0]);
    assert!(cfg.meta.second_order);
    assert!(!cfg.meta.continue_schedule);
}
