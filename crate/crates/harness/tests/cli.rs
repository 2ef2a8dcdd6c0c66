use std::fs;
use std::process::Command;

fn ltm(out: &std::path::Path) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ltm"));
    cmd.env("LTM_OUT", out);
    cmd
}

#[test]
fn end_to_end_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    fs::write(
        &config,
        r#"
train_size = 256
[train]
batch_size = 32
min_iterations = 20
patience = 1
validation_size = 64
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let cell = [
        "--config", config.to_str().unwrap(), "--method", "plurality", "--model", "mallows:0.5", "--voters", "6",
        "--candidates", "3", "--info", "plurality-scores", "--labeling", "satisficing", "--hidden", "8,4x4", "--seed", "7",
        "--workers", "1",
    ];
    for step in ["gen", "train", "eval", "baseline", "report"] {
        let status = ltm(&out).arg(step).args(cell).output().unwrap();
        assert!(status.status.success(), "{step}: {}", String::from_utf8_lossy(&status.stderr));
        if step == "eval" {
            let text = String::from_utf8(status.stdout).unwrap();
            let mut lines = text.lines();
            assert_eq!(
                lines.next().unwrap(),
                "method,model,n,m,info,labeling,hidden_config,seed,mean_profitability,sem,samples,flag"
            );
            assert_eq!(lines.count(), 2);
        }
    }
    assert!(out.join("manifest.json").exists());
    assert!(out.join("report/summary.csv").exists());
    assert_eq!(fs::read_dir(out.join("nets")).unwrap().count(), 2);

    let shown = ltm(&out).args(["show-config", "--voters", "9"]).output().unwrap();
    assert!(String::from_utf8(shown.stdout).unwrap().contains("voters = [9]"));
}

#[test]
fn failures_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = ltm(dir.path()).args(["gen", "--candidates", "7"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(7));
    let empty = ltm(&dir.path().join("nothing")).arg("report").output().unwrap();
    assert_eq!(empty.status.code(), Some(10));
    let missing = ltm(dir.path())
        .args(["train", "--method", "borda", "--model", "uniform", "--voters", "5", "--candidates", "3", "--info", "margin-matrix", "--hidden", "4"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(8));
}
