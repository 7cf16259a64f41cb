use std::process::Command;

fn dbgcomplete(args: &[&str]) -> (Option<i32>, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_dbgcomplete")).args(args).output().unwrap();
    (out.status.code(), String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn help_exits_zero() {
    assert_eq!(dbgcomplete(&["--help"]).0, Some(0));
}

#[test]
fn unknown_subcommand_is_usage_error() {
    assert_eq!(dbgcomplete(&["frobnicate"]).0, Some(1));
}

#[test]
fn missing_config_file_is_config_error() {
    let (code, err) = dbgcomplete(&["campaign", "--config", "/nonexistent/campaign.toml"]);
    assert_eq!(code, Some(1), "{err}");
    assert!(err.starts_with("error:"));
}

#[test]
fn bad_filter_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().to_str().unwrap();
    let (code, _) = dbgcomplete(&["report", "--store", store, "--filter", "colour=blue"]);
    assert_eq!(code, Some(1));
}

#[test]
fn metrics_on_empty_store_reports_missing_stage() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = dbgcomplete(&["metrics", "--store", dir.path().to_str().unwrap()]);
    assert_eq!(code, Some(1), "{err}");
}
