use std::path::Path;
use std::process::{Command, Output};

use sicfet_core::card::ModelCard;
use sicfet_core::cli::{EXIT_INPUT, EXIT_OK, EXIT_OUTPUT, EXIT_STAGE_ABORT};

fn sicfet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sicfet")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Linear and mid-voltage points only: nothing lands in the high-power region.
const LOW_POWER_CSV: &str = "vgs_V,vds_V,id_A,tcase_K,pulsed,source_tag
10,0.05,0.2,300,1,t
15,0.05,0.3,300,1,t
20,0.05,0.32,300,1,t
10,5,3.0,300,1,t
20,5,20.0,300,1,t
";

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&sicfet(&["--help"])), EXIT_OK);
    assert_eq!(code(&sicfet(&["--version"])), EXIT_OK);
}

#[test]
fn missing_config_is_an_input_error() {
    let out = sicfet(&["--config", "/nonexistent/run.toml", "export"]);
    assert_eq!(code(&out), EXIT_INPUT);
    assert!(String::from_utf8_lossy(&out.stderr).contains("run.toml"));
}

#[test]
fn unknown_flag_and_format_are_input_errors() {
    assert_eq!(code(&sicfet(&["export", "--format", "yaml"])), EXIT_INPUT);
    assert_eq!(code(&sicfet(&["export", "--bogus"])), EXIT_INPUT);
    assert_eq!(code(&sicfet(&["--preset", "nope", "export"])), EXIT_INPUT);
}

#[test]
fn unwritable_output_is_an_output_error() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("missing_dir").join("card.txt");
    assert_eq!(code(&sicfet(&["export", "--output", s(&target)])), EXIT_OUTPUT);
}

#[test]
fn export_round_trips_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let flat = sicfet(&["export"]);
    assert_eq!(code(&flat), EXIT_OK);
    let card = ModelCard::parse_flat(&String::from_utf8(flat.stdout).unwrap()).unwrap();
    let toml_path = dir.path().join("card.toml");
    assert_eq!(code(&sicfet(&["export", "--format", "toml", "--output", s(&toml_path)])), EXIT_OK);
    let back = ModelCard::parse(&std::fs::read_to_string(&toml_path).unwrap()).unwrap();
    assert_eq!(card.params, back.params);
}

#[test]
fn sweep_writes_csv_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[sweep]\nkind = \"transfer\"\naxis = \"vgs\"\nstart = 0.0\nstop = 20.0\npoints = 11\nfixed_bias = [1.0, 10.0]\n",
    )
    .unwrap();
    let out = sicfet(&["--config", s(&cfg), "--threads", "1", "sweep"]);
    assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("label,x_V,y,converged,tj_K"));
    assert_eq!(text.lines().count(), 1 + 22);
    // no [sweep] section
    std::fs::write(&cfg, "").unwrap();
    assert_eq!(code(&sicfet(&["--config", s(&cfg), "sweep"])), EXIT_INPUT);
}

#[test]
fn empty_stage_region_aborts_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("low.csv");
    std::fs::write(&data, LOW_POWER_CSV).unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[fit]\nschedule = [\"quick\", \"stage3\"]\n[fit.quick]\nfree_params = [\"vfb0\"]\nregion = \"linear_lowV\"\nweighting = \"log_current\"\nmax_iter = 5\n",
    )
    .unwrap();
    let card = dir.path().join("fit.toml");
    let out = sicfet(&["--config", s(&cfg), "fit", "--data", s(&data), "--output", s(&card)]);
    assert_eq!(code(&out), EXIT_STAGE_ABORT, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(card.exists());
    let report = std::fs::read_to_string(dir.path().join("fit.report.txt")).unwrap();
    assert!(report.contains("quick"));

    let v = sicfet(&["validate", "--card", s(&card), "--data", s(&data)]);
    assert_eq!(code(&v), EXIT_OK);
    let text = String::from_utf8(v.stdout).unwrap();
    assert!(text.contains("high_power: rms n/a (0 points)"), "{text}");
    assert!(sicfet_core::cli::parse_overall_rms(&text).is_some());
}

#[test]
fn malformed_data_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    std::fs::write(&data, "vgs,vds\n1,2\n").unwrap();
    let out = sicfet(&["validate", "--data", s(&data)]);
    assert_eq!(code(&out), EXIT_INPUT);
    let card = dir.path().join("c.toml");
    assert_eq!(code(&sicfet(&["fit", "--data", s(&data), "--output", s(&card)])), EXIT_INPUT);
}
