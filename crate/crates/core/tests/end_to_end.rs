use imfuse_core::io::{grid_function_to_string, read_contour};
use imfuse_core::stats::ks_statistic_sorted;
use imfuse_core::{
    alpha_cut, check_validity, coverage_experiment, fuse, mc_calibrator, necessity, possibility,
    simulate_study_set, Calibrator, CalibratorChoice, Claim, CustomRule, FusionRule, GridFunction, StudySpec,
    ValidityPipeline,
};

fn max_rule(k: usize) -> FusionRule {
    FusionRule::custom(CustomRule::nondecreasing("max", k, |u| u.iter().copied().fold(0.0, f64::max))).unwrap()
}

#[test]
fn custom_rule_gets_a_monte_carlo_calibrator() {
    // the max of k uniforms has CDF x^k
    let Calibrator::Empirical(emp) = mc_calibrator(&max_rule(3), 3, 200_000, 11).unwrap() else {
        panic!("expected an empirical calibrator");
    };
    let d = ks_statistic_sorted(emp.sample(), |x| x.clamp(0.0, 1.0).powi(3));
    assert!(d < 0.005, "{d}");

    let pipeline = ValidityPipeline::new(max_rule(3)).with_calibrator(CalibratorChoice::MonteCarlo {
        samples: 200_000,
        seed: 12,
    });
    let report = check_validity(&pipeline, 3, 50_000, &[0.05, 0.25], 13).unwrap();
    assert!(report.all_pass(), "{report:?}");
    assert!(report.ks_uniform < 0.01, "{}", report.ks_uniform);
}

#[test]
fn simulated_studies_fuse_save_and_measure() {
    let spec = StudySpec::default();
    let grid = spec.common_grid().unwrap();
    let studies = simulate_study_set(&spec, &grid, 21).unwrap();
    for rule in [FusionRule::Min, FusionRule::Product, FusionRule::Mean] {
        let (out, cal) = fuse(&rule, CalibratorChoice::Closed, &studies.contours, Some(&studies.fusion_grid), true, 0)
            .unwrap();
        assert!(cal.is_closed_form());
        let contour = out.contour.unwrap();
        assert_eq!(contour.max_value(), 1.0);

        let reread = read_contour(grid_function_to_string(&contour).as_bytes()).unwrap();
        assert_eq!(reread.grid().len(), contour.grid().len());
        for (a, b) in reread.values().iter().zip(contour.values()) {
            // 12 significant digits
            assert!((a - b).abs() <= 5e-12 * b.abs(), "{a} vs {b}");
        }

        let cut = alpha_cut(&contour, 0.05).unwrap();
        assert_eq!(cut.len(), 1, "{rule}");
        let claim = Claim::interval(cut[0].lo, cut[0].hi).unwrap();
        assert_eq!(possibility(&contour, &claim).unwrap(), 1.0);
        // outside the 0.05-cut the contour is at most 0.05
        let nec = necessity(&contour, &claim).unwrap();
        assert!(nec >= 0.95 - 1e-9, "{rule}: {nec}");
    }
}

#[test]
fn fused_cuts_cover_at_the_nominal_rate() {
    let spec = StudySpec::default();
    for rule in [FusionRule::Min, FusionRule::Product, FusionRule::Mean] {
        let report = coverage_experiment(&spec, &rule, 1_000, 0.1, 31).unwrap();
        assert!(report.coverage >= report.coverage_bound, "{report:?}");
        assert!(report.pooled_oracle_coverage >= report.coverage_bound, "{report:?}");
        assert!(report.pooled_oracle_width < report.mean_width, "{report:?}");
    }
}
