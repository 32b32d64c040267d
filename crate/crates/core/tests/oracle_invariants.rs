use g2mix::analytic::{g2_full_eta, g2_partial, SourceParams};
use g2mix::oracle::{
    build_mixed_state, build_mixed_state_in_basis, g2_of_state, g2_oracle, photon_number_distribution, ModeBasis, PartialStateSpec,
    total_number_moments,
};

const RATIOS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 10.0];
const KS: [f64; 5] = [0.0, 0.25, 0.5, 0.86, 1.0];

#[test]
fn weak_field_grid() {
    let eta = 1e-3;
    for r in RATIOS {
        for k in KS {
            let spec = PartialStateSpec::at_ratio(eta, r, k).unwrap();
            let d = (g2_oracle(&spec).unwrap() - g2_partial(r, k).unwrap()).abs();
            assert!(d <= 5.0 * eta.max(r * eta), "r={r} K={k}: {d}");
        }
    }
}

#[test]
fn larger_eta_tracks_full_formula() {
    let eta = 0.05;
    for a2 in [0.005, 0.02, 0.05, 0.1] {
        for k in KS {
            let spec = PartialStateSpec::with_cutoff(SourceParams::new(eta, a2).unwrap(), k, 8).unwrap();
            let r = a2 / eta;
            let d = (g2_oracle(&spec).unwrap() - g2_full_eta(r, k, eta).unwrap()).abs();
            assert!(d <= 5.0 * a2, "a2={a2} K={k}: {d}");
        }
    }
}

#[test]
fn nondecreasing_in_k() {
    for (eta, a2) in [(1e-3, 1e-3), (0.05, 0.02), (0.5, 0.1), (1.0, 0.01)] {
        let params = SourceParams::new(eta, a2).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=50 {
            let k = i as f64 / 50.0;
            let g = g2_oracle(&PartialStateSpec::with_cutoff(params, k, 8).unwrap()).unwrap();
            assert!(g >= prev - 1e-10, "eta={eta} a2={a2} K={k}: {g} < {prev}");
            prev = g;
        }
    }
}

#[test]
fn mode_basis_does_not_matter() {
    for (eta, a2, k) in [(1e-3, 1e-3, 0.86), (0.3, 0.05, 0.5), (1.0, 0.02, 0.0), (0.7, 0.1, 1.0)] {
        // rotated frames spread the tail over both modes, so leave headroom
        let spec = PartialStateSpec::with_cutoff(SourceParams::new(eta, a2).unwrap(), k, 12).unwrap();
        let reference = g2_oracle(&spec).unwrap();
        for (theta, phi) in [(0.3, 0.0), (1.1, 0.7), (std::f64::consts::FRAC_PI_2, 2.0), (2.5, -1.3)] {
            let rho = build_mixed_state_in_basis(&spec, &ModeBasis::rotation(theta, phi)).unwrap();
            let g = g2_of_state(&rho).unwrap();
            assert!((g - reference).abs() <= 1e-10, "theta={theta} phi={phi}: {g} vs {reference}");
        }
    }
}

#[test]
fn distributions_normalised_and_mean_preserved() {
    for r in RATIOS {
        for k in KS {
            let spec = PartialStateSpec::with_cutoff(SourceParams::from_ratio(1e-2, r).unwrap(), k, 8).unwrap();
            let p = photon_number_distribution(&spec).unwrap();
            let total: f64 = p.iter().sum();
            assert!((total - 1.0).abs() <= 1e-10);
            assert!(p.iter().all(|x| *x >= -1e-15));
            let mean: f64 = p.iter().enumerate().map(|(n, x)| n as f64 * x).sum();
            let (_, expected) = total_number_moments(&build_mixed_state(&spec).unwrap()).unwrap();
            assert!((mean - expected).abs() <= 1e-12, "r={r} K={k}: {mean} vs {expected}");
        }
    }
}
