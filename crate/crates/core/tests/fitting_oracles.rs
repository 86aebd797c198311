//! Oracle tests for synthetic data generation and parameter recovery. The
//! generators double as the fit oracles: a fit must hand back what the
//! generator put in, to near machine precision without noise and
//! statistically with it. Measured reference constants are asserted at the
//! published precision.

use gamow_core::fitting::{
    compare_width_lifetime, export_decay_counts, export_lineshape, fit_decay_rate, fit_lineshape,
    generate_decay_counts, generate_lineshape, import_decay_counts, import_lineshape,
    FittingError,
};
use gamow_core::spectral::ResonanceLine;
use gamow_core::units::HBAR_EV_S;

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

#[test]
fn lineshape_generator_matches_the_closed_form() {
    let line = ResonanceLine::new(1.0, 0.05).unwrap();
    let hw = 0.025;
    let energies = vec![1.0 - hw, 1.0, 1.0 + hw, 1.3];
    let s = generate_lineshape(&line, &energies, 2.0, 0.0, 7).unwrap();

    let peak = 2.0 / (hw * hw);
    assert!((s.cross_sections[1] - peak).abs() < 1e-12 * peak);
    // half maximum sits one half-width off the center
    assert!((s.cross_sections[0] - 0.5 * peak).abs() < 1e-12 * peak);
    assert!((s.cross_sections[2] - 0.5 * peak).abs() < 1e-12 * peak);
    let wing = 2.0 / (0.3 * 0.3 + hw * hw);
    assert!((s.cross_sections[3] - wing).abs() < 1e-12 * wing);

    let again = generate_lineshape(&line, &energies, 2.0, 0.0, 7).unwrap();
    assert_eq!(s.cross_sections, again.cross_sections);

    assert!(matches!(
        generate_lineshape(&line, &energies, 2.0, -0.1, 7),
        Err(FittingError::NegativeNoise { .. })
    ));
}

#[test]
fn lineshape_noise_is_seeded_and_clipped() {
    let line = ResonanceLine::new(1.0, 0.05).unwrap();
    let energies = grid(0.5, 1.5, 200);
    let a = generate_lineshape(&line, &energies, 1.0, 30.0, 42).unwrap();
    let b = generate_lineshape(&line, &energies, 1.0, 30.0, 42).unwrap();
    let c = generate_lineshape(&line, &energies, 1.0, 30.0, 43).unwrap();
    assert_eq!(a.cross_sections, b.cross_sections);
    assert_ne!(a.cross_sections, c.cross_sections);
    assert!(a.cross_sections.iter().all(|y| *y >= 0.0));
    // sigma is huge compared to the wings, so clipping must actually occur
    assert!(a.cross_sections.iter().any(|y| *y == 0.0));

    // the noise really has the requested scale: compare against the
    // noise-free curve (loose 4-sigma-of-the-variance bounds)
    let clean = generate_lineshape(&line, &energies, 1.0, 0.0, 42).unwrap();
    let sigma = 2.0;
    let noisy = generate_lineshape(&line, &energies, 1.0, sigma, 9).unwrap();
    let keep: Vec<f64> = noisy
        .cross_sections
        .iter()
        .zip(&clean.cross_sections)
        .filter(|(y, m)| **m > 10.0 * sigma && **y > 0.0)
        .map(|(y, m)| y - m)
        .collect();
    assert!(keep.len() > 30);
    let rms = (keep.iter().map(|d| d * d).sum::<f64>() / keep.len() as f64).sqrt();
    assert!(
        (0.6 * sigma..1.4 * sigma).contains(&rms),
        "noise rms {rms} vs sigma {sigma}"
    );
}

#[test]
fn noise_free_fit_recovers_the_generator_inputs() {
    let line = ResonanceLine::new(1.0, 0.05).unwrap();
    let energies = grid(0.6, 1.4, 161);
    let sample = generate_lineshape(&line, &energies, 3.0, 0.0, 1).unwrap();
    let fit = fit_lineshape(&sample).unwrap();
    assert!((fit.e_r - 1.0).abs() < 1e-8, "e_r = {}", fit.e_r);
    assert!(
        (fit.gamma - 0.05).abs() < 1e-6 * 0.05,
        "gamma = {}",
        fit.gamma
    );
    assert!((fit.scale - 3.0).abs() < 1e-6 * 3.0, "scale = {}", fit.scale);
}

#[test]
fn fit_guards_reject_degenerate_samples() {
    let line = ResonanceLine::new(1.0, 0.05).unwrap();

    // off-peak window: cross sections decrease monotonically
    let wing = generate_lineshape(&line, &grid(1.25, 1.5, 40), 1.0, 0.0, 1).unwrap();
    assert!(matches!(fit_lineshape(&wing), Err(FittingError::NoPeak)));

    let tiny = generate_lineshape(&line, &grid(0.9, 1.1, 4), 1.0, 0.0, 1).unwrap();
    assert!(matches!(
        fit_lineshape(&tiny),
        Err(FittingError::TooFewSamples { .. })
    ));
}

#[test]
fn noisy_lineshape_fits_average_out() {
    let line = ResonanceLine::new(1.0, 0.05).unwrap();
    let energies = grid(0.6, 1.4, 161);
    let peak = 1.0 / (0.025 * 0.025);
    let sigma = 0.01 * peak;

    let mut gammas = Vec::new();
    for seed in 0..100u64 {
        let sample = generate_lineshape(&line, &energies, 1.0, sigma, seed).unwrap();
        let fit = fit_lineshape(&sample).unwrap();
        assert!(
            (fit.gamma - 0.05).abs() < 0.05 * 0.05,
            "seed {seed}: gamma {} strays",
            fit.gamma
        );
        assert!(fit.gamma_err > 0.0 && fit.gamma_err < 0.05 * 0.05);
        gammas.push(fit.gamma);
    }
    let mean = gammas.iter().sum::<f64>() / gammas.len() as f64;
    assert!(
        (mean - 0.05).abs() < 0.01 * 0.05,
        "seed-averaged gamma {mean}"
    );
}

#[test]
fn decay_count_expectations_are_exact_bin_integrals() {
    let line = ResonanceLine::new(1.0, 0.1).unwrap();
    let tau = 10.0;
    let counts = generate_decay_counts(&line, &[0.0, tau], 1_000_000, 0, false).unwrap();
    // 1e6 (1 - 1/e) rounds to 632121
    assert_eq!(counts.counts, vec![632_121]);

    // a fine partition reaching far out recovers the initial population
    let edges: Vec<f64> = (0..=600).map(|k| k as f64).collect();
    let total: u64 = generate_decay_counts(&line, &edges, 1_000_000, 0, false)
        .unwrap()
        .counts
        .iter()
        .sum();
    let expect = 1e6 * (1.0 - (-60.0f64).exp());
    assert!(
        (total as f64 - expect).abs() <= 300.0,
        "total {total} vs {expect}"
    );

    let a = generate_decay_counts(&line, &edges, 1000, 5, true).unwrap();
    let b = generate_decay_counts(&line, &edges, 1000, 5, true).unwrap();
    let c = generate_decay_counts(&line, &edges, 1000, 6, true).unwrap();
    assert_eq!(a.counts, b.counts);
    assert_ne!(a.counts, c.counts);

    assert!(matches!(
        generate_decay_counts(&line, &[1.0, 0.5], 10, 0, false),
        Err(FittingError::BadBinEdges { .. })
    ));
    assert!(matches!(
        generate_decay_counts(&line, &[-1.0, 0.5], 10, 0, false),
        Err(FittingError::BadBinEdges { .. })
    ));
    assert!(matches!(
        generate_decay_counts(&line, &[0.5], 10, 0, false),
        Err(FittingError::BadBinEdges { .. })
    ));
}

#[test]
fn deterministic_counts_pin_the_rate_to_eight_digits() {
    let line = ResonanceLine::new(1.0, 0.1).unwrap();
    let edges = grid(0.0, 50.0, 21);
    // enormous population so integer rounding cannot bias the shape
    let counts = generate_decay_counts(&line, &edges, 1_000_000_000_000, 0, false).unwrap();
    let fit = fit_decay_rate(&counts).unwrap();
    assert!(
        (fit.gamma_r - 0.1).abs() < 1e-8 * 0.1,
        "gamma_r = {}",
        fit.gamma_r
    );
    assert!(fit.gamma_r_err > 0.0);
}

#[test]
fn rate_fit_ignores_normalization() {
    let line = ResonanceLine::new(1.0, 0.1).unwrap();
    let edges = grid(0.0, 50.0, 21);
    let counts = generate_decay_counts(&line, &edges, 1_000_000, 0, false).unwrap();
    let scaled = gamow_core::fitting::DecayCounts {
        bin_edges: counts.bin_edges.clone(),
        counts: counts.counts.iter().map(|c| c * 7).collect(),
        n_initial: counts.n_initial * 7,
    };
    let a = fit_decay_rate(&counts).unwrap();
    let b = fit_decay_rate(&scaled).unwrap();
    assert_eq!(a.gamma_r, b.gamma_r, "shape-only estimator");
}

#[test]
fn rate_fit_guards() {
    let line = ResonanceLine::new(1.0, 0.1).unwrap();
    let two_bins = generate_decay_counts(&line, &[0.0, 5.0, 10.0], 1000, 0, false).unwrap();
    assert!(matches!(
        fit_decay_rate(&two_bins),
        Err(FittingError::TooFewBins { .. })
    ));

    let empty = gamow_core::fitting::DecayCounts {
        bin_edges: vec![0.0, 1.0, 2.0, 3.0],
        counts: vec![0, 0, 0],
        n_initial: 0,
    };
    assert!(matches!(
        fit_decay_rate(&empty),
        Err(FittingError::AllBinsEmpty)
    ));

    // three bins but only two carry counts
    let sparse = gamow_core::fitting::DecayCounts {
        bin_edges: vec![0.0, 1.0, 2.0, 3.0],
        counts: vec![50, 20, 0],
        n_initial: 70,
    };
    assert!(matches!(
        fit_decay_rate(&sparse),
        Err(FittingError::TooFewBins { .. })
    ));
}

#[test]
fn poisson_counts_recover_the_rate_statistically() {
    let line = ResonanceLine::new(1.0, 0.1).unwrap();
    let edges = grid(0.0, 50.0, 21);
    let mut rates = Vec::new();
    for seed in 0..100u64 {
        let counts = generate_decay_counts(&line, &edges, 1_000_000, seed, true).unwrap();
        let fit = fit_decay_rate(&counts).unwrap();
        assert!(
            (fit.gamma_r - 0.1).abs() < 0.01 * 0.1,
            "seed {seed}: {}",
            fit.gamma_r
        );
        rates.push(fit.gamma_r);
    }
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    assert!((mean - 0.1).abs() < 1e-3 * 0.1, "seed-averaged {mean}");
}

#[test]
fn width_lifetime_report_reproduces_measured_constants() {
    // sodium 3p linewidth in eV; hbar/Gamma must land on the published ns
    let na = compare_width_lifetime(4.0538e-8, 0.0091e-8, 4.0538e-8, 0.0091e-8).unwrap();
    assert!(
        (na.tau_fit_seconds * 1e9 - 16.237).abs() < 1e-3,
        "tau = {} ns",
        na.tau_fit_seconds * 1e9
    );
    assert_eq!(na.ratio, 1.0);
    assert_eq!(na.tau_fit_seconds, HBAR_EV_S / 4.0538e-8);

    // iron-57 first excited state: width vs direct lifetime, agreement
    // within ten percent
    let gamma_r_fe = HBAR_EV_S / 1.4e-7;
    let fe = compare_width_lifetime(4.7e-9, 0.0, gamma_r_fe, 0.0).unwrap();
    assert!((fe.ratio - 1.0).abs() < 0.10, "ratio = {}", fe.ratio);

    // propagated uncertainty: ratio err combines both relative errors
    let rel = (na.gamma_fit_err / na.gamma_fit).hypot(na.gamma_r_fit_err / na.gamma_r_fit);
    assert!((na.ratio_err - na.ratio * rel).abs() < 1e-15);

    assert!(matches!(
        compare_width_lifetime(-1.0, 0.0, 1.0, 0.0),
        Err(FittingError::NonPositiveWidth { .. })
    ));
    assert!(matches!(
        compare_width_lifetime(1.0, 0.0, 0.0, 0.0),
        Err(FittingError::NonPositiveWidth { .. })
    ));
}

#[test]
fn delimited_text_round_trips() {
    let line = ResonanceLine::new(1.0, 0.05).unwrap();
    let sample = generate_lineshape(&line, &grid(0.8, 1.2, 31), 1.0, 0.3, 3).unwrap();
    let text = export_lineshape(&sample);
    let back = import_lineshape(&text).unwrap();
    assert_eq!(sample.energies, back.energies);
    assert_eq!(sample.cross_sections, back.cross_sections);

    let counts = generate_decay_counts(&line, &grid(0.0, 40.0, 9), 100_000, 1, true).unwrap();
    let text = export_decay_counts(&counts);
    let back = import_decay_counts(&text).unwrap();
    assert_eq!(counts.bin_edges, back.bin_edges);
    assert_eq!(counts.counts, back.counts);

    let tolerated = "# comment line\n\n0.5,1.25\n0.75,2.5\n";
    let s = import_lineshape(tolerated).unwrap();
    assert_eq!(s.energies, vec![0.5, 0.75]);
    assert_eq!(s.cross_sections, vec![1.25, 2.5]);

    let err = import_lineshape("0.5,1.0\nnot,numbers\n");
    match err {
        Err(FittingError::BadRecord { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected BadRecord, got {other:?}"),
    }
    // gap between consecutive bins is data corruption, not formatting
    let err = import_decay_counts("0.0,1.0,5\n2.0,3.0,4\n");
    assert!(matches!(err, Err(FittingError::BadRecord { .. })));
}
