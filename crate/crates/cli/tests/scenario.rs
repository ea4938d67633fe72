use std::path::Path;

use posdesign_cli::experiments::Setup;
use posdesign_cli::scenario::DESK_SCALE_SUBCARRIERS;
use posdesign_cli::{CliError, Preset, ScenarioFile};

fn config_message(r: Result<ScenarioFile, CliError>) -> String {
    match r {
        Err(CliError::Config(msg)) => msg,
        other => panic!("expected a configuration error, got {other:?}"),
    }
}

fn preset_json(p: Preset) -> serde_json::Value {
    serde_json::to_value(p.scenario()).unwrap()
}

#[test]
fn empty_file_lists_required_fields() {
    let msg = config_message(ScenarioFile::from_json("  \n"));
    for field in ["fc_hz", "num_subcarriers", "sigma_clk_m", "incidence_grid_per_axis"] {
        assert!(msg.contains(field), "{msg}");
    }
}

#[test]
fn missing_fields_are_named() {
    let mut v = preset_json(Preset::Table1Scen1);
    let obj = v.as_object_mut().unwrap();
    obj.remove("n_tx");
    obj.remove("noise_figure_db");
    let msg = config_message(ScenarioFile::from_json(&v.to_string()));
    assert!(msg.contains("n_tx") && msg.contains("noise_figure_db"), "{msg}");
    assert!(!msg.contains("fc_hz"), "{msg}");
}

#[test]
fn unknown_fields_are_rejected() {
    let mut v = preset_json(Preset::Table1Scen2);
    v.as_object_mut().unwrap().insert("carrier_ghz".into(), 28.into());
    let msg = config_message(ScenarioFile::from_json(&v.to_string()));
    assert!(msg.contains("carrier_ghz"), "{msg}");
}

#[test]
fn syntax_errors_report_the_position() {
    let msg = config_message(ScenarioFile::from_json("{\n  \"fc_hz\": 28e9,\n  \"n_tx\": ,\n}"));
    assert!(msg.contains("line 3"), "{msg}");
}

#[test]
fn type_errors_name_the_field() {
    let mut v = preset_json(Preset::Table1Scen1);
    v["n_rx"] = "sixteen".into();
    let msg = config_message(ScenarioFile::from_json(&v.to_string()));
    assert!(msg.contains("line") && msg.contains("column"), "{msg}");
}

#[test]
fn inconsistent_values_are_rejected() {
    let mut f = Preset::Table1Scen1.scenario();
    f.n_rf = 8;
    assert!(matches!(f.validate(), Err(CliError::Config(_))));
    let mut f = Preset::Table1Scen1.scenario();
    f.sigma_clk_m = 0.0;
    assert!(matches!(f.validate(), Err(CliError::Config(_))));
    let mut f = Preset::Table1Scen1.scenario();
    f.nlos_reflection.push(0.2);
    assert!(matches!(f.validate(), Err(CliError::Config(_))));
}

#[test]
fn shipped_scenario_files_equal_the_presets() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    for p in [Preset::Table1Scen1, Preset::Table1Scen2] {
        let f = ScenarioFile::load(&dir.join(format!("{}.json", p.label()))).unwrap();
        assert_eq!(f, p.scenario());
    }
}

#[test]
fn preset_noise_power_and_grid_sizes() {
    let f = Preset::Table1Scen1.scenario();
    assert_eq!(f.num_subcarriers, 1024);
    let sigma2 = f.ofdm(1).noise_variance();
    assert!((sigma2 - 3.087e-9).abs() < 1e-3 * 3.087e-9, "{sigma2}");
    assert!((f.per_beam_power_mw() - 100.0).abs() < 1e-9);
    assert_eq!(Setup::new(&f, 7).unwrap().grid.len(), 36);
    assert_eq!(Setup::new(&Preset::Table1Scen2.scenario(), 7).unwrap().grid.len(), 16);
}

#[test]
fn desk_scale_recomputes_noise_for_fewer_subcarriers() {
    let full = Preset::Table1Scen1.scenario();
    let desk = full.desk_scaled();
    assert_eq!(desk.num_subcarriers, DESK_SCALE_SUBCARRIERS);
    let ratio = full.ofdm(1).noise_variance() / desk.ofdm(1).noise_variance();
    assert!((ratio - 1024.0 / 64.0).abs() < 1e-9);
}

#[test]
fn total_power_follows_the_active_beam_count() {
    let f = Preset::Table1Scen1.scenario();
    let cfg = f.ofdm(16);
    assert!((cfg.total_power_mw - 1600.0).abs() < 1e-9);
    assert!((cfg.trace_budget() - 1600.0 / 1024.0).abs() < 1e-12);
}

#[test]
fn gain_phases_come_from_the_seed_unless_given() {
    let mut f = Preset::Table1Scen2.scenario();
    let a = f.scenario(1).gain_phases;
    assert_eq!(a, f.scenario(1).gain_phases);
    assert_ne!(a, f.scenario(2).gain_phases);
    f.gain_phases_rad = Some(vec![0.25, -1.0]);
    assert_eq!(f.scenario(1).gain_phases, vec![0.25, -1.0]);
}
