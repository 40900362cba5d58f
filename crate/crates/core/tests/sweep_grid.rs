use qbm_core::coefficients::QuadraticLmeCoefficients;
use qbm_core::sweep::{
    config_hash, emit, parse_csv, preset, run_sweep, run_sweep_with, threshold_scan, to_csv, to_json, AxisRange, CellOutcome,
    CoefficientSource, EmitFormat, GValues, Mode, Quantity, SweepConfig, ThresholdOptions, ThresholdOutcome,
};

fn linear(q: Quantity, n: usize) -> SweepConfig {
    SweepConfig::new(Mode::Linear, q, 0.8, AxisRange::log(0.05, 4.0, n), AxisRange::log(2.0, 20.0, n))
}

#[test]
fn fifty_by_fifty_csv_has_one_row_per_cell() {
    let grid = run_sweep(&linear(Quantity::Theta, 50)).unwrap();
    assert_eq!(grid.cells.len(), 2500);
    assert_eq!(grid.error_count(), 0);
    let csv = to_csv(&grid);
    assert_eq!(csv.lines().count(), 2501);
    let width = csv.lines().next().unwrap().split(',').count();
    assert!(csv.lines().all(|l| l.split(',').count() == width));
}

#[test]
fn theta_pattern_on_linear_grid() {
    let grid = run_sweep(&linear(Quantity::Theta, 50)).unwrap();
    let f = grid.field(0, Quantity::Theta);
    let (top, last) = (f.len() - 1, f[0].len() - 1);
    // major axis along the diagonal at high cutoff and temperature
    let high = f[top][last].unwrap();
    assert!((0.5..0.65).contains(&high), "{high}");
    // and close to the position axis at low cutoff
    let low = f[top][0].unwrap();
    assert!(low > 0.9, "{low}");
}

#[test]
fn eccentricity_shrinks_toward_high_temperature_corner() {
    let grid = run_sweep(&linear(Quantity::Eta, 50)).unwrap();
    let f = grid.field(0, Quantity::Eta);
    let (top, last) = (f.len() - 1, f[0].len() - 1);
    let corner = f[top][last].unwrap();
    let cold = f[0][last].unwrap();
    assert!(corner < 0.2 && cold > 0.8, "{corner} {cold}");
    // the least eccentric cells are all warm
    let (mut best, mut at) = (f64::INFINITY, 0);
    for (i, row) in f.iter().enumerate() {
        for v in row {
            if v.unwrap() < best {
                (best, at) = (v.unwrap(), i);
            }
        }
    }
    assert!(grid.axes.tau[at] > 1.0, "{}", grid.axes.tau[at]);
}

#[test]
fn quadratic_eccentricity_falls_with_temperature() {
    let cfg = SweepConfig::new(Mode::Quadratic, Quantity::Eta, 0.1, AxisRange::log(0.5, 10.0, 6), AxisRange::log(4.0, 100.0, 6));
    let grid = run_sweep(&cfg).unwrap();
    assert_eq!(grid.error_count(), 0);
    let f = grid.field(0, Quantity::Eta);
    for j in 0..f[0].len() {
        for i in 1..f.len() {
            assert!(f[i][j].unwrap() < f[i - 1][j].unwrap());
        }
    }
    assert!(f[f.len() - 1][f[0].len() - 1].unwrap() < 0.05);
}

#[test]
fn runs_are_byte_identical() {
    let cfg = linear(Quantity::Chi, 12);
    let (a, b) = (run_sweep(&cfg).unwrap(), run_sweep(&cfg).unwrap());
    assert_eq!(to_csv(&a), to_csv(&b));
    assert_eq!(to_json(&a), to_json(&b));
    assert_eq!(a.metadata.config_hash, b.metadata.config_hash);
    assert_eq!(a.metadata.config_hash, config_hash(&cfg));
    let mut other = cfg.clone();
    other.g = GValues::One(0.7);
    assert_ne!(config_hash(&other), a.metadata.config_hash);
}

#[test]
fn single_cell_round_trips_through_csv() {
    let cfg = SweepConfig::new(Mode::Linear, Quantity::Theta, 0.5, AxisRange::single(1.0), AxisRange::single(10.0));
    let grid = run_sweep(&cfg).unwrap();
    let back = parse_csv(&to_csv(&grid)).unwrap();
    assert_eq!(back, grid.cells);
}

#[test]
fn emitted_files_parse_back() {
    let dir = tempfile::tempdir().unwrap();
    let grid = run_sweep(&linear(Quantity::Dl2, 5)).unwrap();
    let paths = emit(&grid, &dir.path().join("out/dl2.csv"), EmitFormat::Csv).unwrap();
    let back = parse_csv(&std::fs::read_to_string(&paths.data).unwrap()).unwrap();
    assert_eq!(back, grid.cells);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&paths.meta).unwrap()).unwrap();
    assert_eq!(meta["config_hash"], grid.metadata.config_hash);
    assert_eq!(meta["cell_count"], 25);
}

#[test]
fn missing_table_entries_become_error_cells() {
    let table = r#"{"g_ref":0.1,"entries":[{"lam":16,"tau":4,"d_xx":0.05,"d_xp":0.01,"d_pp":0.001,"c_xp":0.04,"c_pp":0.002}]}"#;
    let src = CoefficientSource::from_json(table).unwrap();
    let cfg = SweepConfig::new(Mode::Quadratic, Quantity::Eta, 0.1, AxisRange::log(2.0, 4.0, 2), AxisRange::single(16.0));
    let grid = run_sweep_with(&cfg, &src).unwrap();
    assert_eq!(grid.error_count(), 1);
    match &grid.cells[0].outcome {
        CellOutcome::Error(e) => assert_eq!(e.reason, "coefficients-missing"),
        other => panic!("{other:?}"),
    }
    assert!(!grid.cells[1].is_error());
    let csv = to_csv(&grid);
    assert!(csv.lines().nth(1).unwrap().ends_with(",coefficients-missing"));
}

#[test]
fn named_presets_are_valid() {
    for name in ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9"] {
        let cfg = preset(name).unwrap();
        cfg.validate().unwrap();
    }
    assert!(preset("fig10").is_none());
}

#[test]
fn threshold_is_stable_under_tolerance_halving() {
    let src = CoefficientSource::Surrogate;
    let mut opts = ThresholdOptions::default();
    let coarse = threshold_scan(&src, 16.0, 4.0, (0.05, 4.0), &opts).unwrap();
    opts.tolerances.ode *= 0.5;
    let fine = threshold_scan(&src, 16.0, 4.0, (0.05, 4.0), &opts).unwrap();
    let (a, b) = (coarse.outcome.midpoint().unwrap(), fine.outcome.midpoint().unwrap());
    assert!((a - b).abs() < 0.01, "{a} {b}");
    assert!(matches!(coarse.outcome, ThresholdOutcome::Interval { converged_below: true, .. }));
}

#[test]
fn dissipation_free_coefficients_give_no_threshold() {
    let src = CoefficientSource::Lme(QuadraticLmeCoefficients::default());
    let mut opts = ThresholdOptions::default();
    opts.tolerances.closure_t_max = Some(40.0);
    let r = threshold_scan(&src, 16.0, 4.0, (0.05, 4.0), &opts).unwrap();
    assert!(matches!(r.outcome, ThresholdOutcome::Uniform { .. }));
    assert_eq!(r.outcome.midpoint(), None);
}
