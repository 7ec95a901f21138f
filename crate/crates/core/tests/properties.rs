//! Property tests for the structural invariants of the library.

use chaoslab::entropy::{
    ckp_check, fluctuation_term, l1_distance, relative_entropy, subadditivity_check, DEFAULT_SYMMETRY_TOL,
};
use chaoslab::harness::{fit_rate, summarize, Row, RowStatus};
use chaoslab::model::{mollify_kernel, CoefficientSet, InitialDensity, KernelSpec};
use chaoslab::sde::{
    empirical_density, make_bundle, read_trajectory_binary, simulate_particles, write_trajectory_binary, CommonPath,
    DensityMethod, TimeGrid,
};
use chaoslab::seed::{stream_seed, Stream};
use chaoslab::spde::{marginal, solve_linear_fpk, tensorize, DensityField, Grid, TabulatedDrift};
use proptest::prelude::*;

fn line(cells: usize) -> Grid {
    Grid::line(-4.0, 4.0, cells).unwrap()
}

fn field(values: Vec<f64>) -> DensityField {
    DensityField::new(line(values.len()), values).unwrap()
}

fn positive_values(cells: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-3..10.0_f64, cells)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn relative_entropy_is_nonnegative_and_ckp_holds((f, g) in (positive_values(64), positive_values(64))) {
        let (f, g) = (field(f), field(g));
        let h = relative_entropy(&f, &g).unwrap();
        prop_assert!(h.value >= 0.0);
        let ckp = ckp_check(&f, &g).unwrap();
        prop_assert!(ckp.margin >= -1e-8, "{ckp:?}");
    }

    #[test]
    fn entropy_vanishes_exactly_on_equal_shapes(f in positive_values(64), scale in 0.1..10.0_f64) {
        let a = field(f.clone());
        let b = field(f.iter().map(|v| v * scale).collect());
        prop_assert!(relative_entropy(&a, &b).unwrap().value <= 1e-12);
    }

    #[test]
    fn l1_distance_is_a_symmetric_metric((f, g, h) in (positive_values(32), positive_values(32), positive_values(32))) {
        let (f, g, h) = (field(f), field(g), field(h));
        let fg = l1_distance(&f, &g).unwrap();
        prop_assert_eq!(fg, l1_distance(&g, &f).unwrap());
        prop_assert!(fg <= l1_distance(&f, &h).unwrap() + l1_distance(&h, &g).unwrap() + 1e-12);
    }

    #[test]
    fn subadditivity_holds_for_symmetric_pairs(raw in positive_values(24 * 24), g in positive_values(24)) {
        let n = 24;
        let sym: Vec<f64> = (0..n * n).map(|c| 0.5 * (raw[c] + raw[(c % n) * n + c / n])).collect();
        let grid = Grid::new(2, -4.0, 4.0, n).unwrap();
        let f2 = DensityField::new(grid, sym).unwrap();
        let r = subadditivity_check(&f2, &field(g), DEFAULT_SYMMETRY_TOL).unwrap();
        prop_assert!(r.margin >= -1e-6, "{r:?}");
    }

    #[test]
    fn tensor_marginals_recover_the_factor(f in positive_values(32)) {
        let f = field(f);
        let f2 = tensorize(&f, 2).unwrap();
        for which in [1, 2] {
            let m = marginal(&f2, which).unwrap();
            let scale = f.mass();
            for (a, b) in m.values().iter().zip(f.values()) {
                prop_assert!((a - b * scale).abs() <= 1e-12 * (1.0 + b * scale));
            }
        }
    }

    #[test]
    fn fluctuation_is_translation_covariant(
        seed in any::<u64>(),
        mean in -1.0..1.0_f64,
        shift_cells in -40i32..40,
    ) {
        let grid = Grid::line(-8.0, 8.0, 512).unwrap();
        let k = KernelSpec::odd_bump(0.5, 1.0).unwrap();
        let mut rng = chaoslab::seed::rng(seed);
        let positions: Vec<f64> =
            (0..64).map(|_| InitialDensity::gaussian(1, mean, 0.5).unwrap().sample(&mut rng)[0]).collect();
        let rho = InitialDensity::gaussian(1, mean, 0.5).unwrap().discretize(&grid).unwrap();
        let s = shift_cells as f64 * grid.h();
        let moved: Vec<f64> = positions.iter().map(|x| x + s).collect();
        let rho_moved = InitialDensity::gaussian(1, mean + s, 0.5).unwrap().discretize(&grid).unwrap();
        let a = fluctuation_term(&positions, 1, &k, &rho, 1.0).unwrap();
        let b = fluctuation_term(&moved, 1, &k, &rho_moved, 1.0).unwrap();
        prop_assert!((a.value - b.value).abs() <= 1e-6 * (1.0 + a.value), "{a:?} vs {b:?}");
    }

    #[test]
    fn empirical_density_accounts_for_every_point(
        points in prop::collection::vec(-6.0..6.0_f64, 1..200),
        kde in any::<bool>(),
    ) {
        let grid = line(128);
        let method = if kde { DensityMethod::Kde { bandwidth: Some(0.2) } } else { DensityMethod::Histogram };
        let e = empirical_density(&points, 1, &grid, method).unwrap();
        prop_assert!(e.field.min() >= 0.0);
        let inside = (e.total - e.outside) as f64 / e.total as f64;
        prop_assert!(e.field.mass() <= inside + 1e-9);
        if !kde {
            prop_assert!((e.field.mass() - inside).abs() <= 1e-12);
        }
    }
}

fn row(n: usize, rep: usize, value: Option<f64>) -> Row {
    Row {
        n,
        rep,
        seed: rep as u64,
        fingerprint: format!("w{rep}"),
        config_hash: "cfg".into(),
        sup_l1_sq: value,
        sup_time: value.map(|_| 0.5),
        final_l1: value,
        outside_fraction: value.map(|_| 0.0),
        entropy_t: value,
        ckp_margin_t: value,
        fluctuation_t: value,
        fluctuation_se: value,
        picard_iterations: Some(4),
        status: if value.is_some() { RowStatus::Ok } else { RowStatus::Failed },
        error: if value.is_some() { String::new() } else { "failed".into() },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn aggregation_ignores_replicate_order(
        values in prop::collection::vec(prop::option::weighted(0.9, 1e-4..1.0_f64), 12),
        order in Just((0..12usize).collect::<Vec<_>>()).prop_shuffle(),
    ) {
        let particles = [64, 128, 256];
        let rows: Vec<Row> = values.iter().enumerate().map(|(i, v)| row(particles[i % 3], i / 3, *v)).collect();
        let shuffled: Vec<Row> = order.iter().map(|&i| rows[i].clone()).collect();
        let a = summarize("cfg", &particles, &rows);
        let b = summarize("cfg", &particles, &shuffled);
        prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn exact_power_laws_are_recovered(c in 0.01..100.0_f64, p in -2.0..-0.1_f64) {
        let points: Vec<(f64, f64)> = [64.0, 128.0, 256.0, 512.0].iter().map(|&n: &f64| (n, c * n.powf(p))).collect();
        let fit = fit_rate(&points).unwrap();
        prop_assert!((fit.slope - p).abs() <= 1e-9);
        prop_assert!((fit.intercept - c.ln()).abs() <= 1e-8);
    }

    #[test]
    fn stream_seeds_are_distinct_per_index(master in any::<u64>(), i in 0..1000u64, j in 0..1000u64) {
        prop_assume!(i != j);
        for kind in [Stream::Common, Stream::Idiosyncratic, Stream::Initial, Stream::Study] {
            prop_assert_ne!(stream_seed(master, kind, i), stream_seed(master, kind, j));
            prop_assert_eq!(stream_seed(master, kind, i), stream_seed(master, kind, i));
        }
    }

    #[test]
    fn mollification_is_linear(a in 0.1..2.0_f64, b in 0.1..2.0_f64, z in -2.0..2.0_f64) {
        let k1 = KernelSpec::step(a, 0.7).unwrap();
        let k2 = KernelSpec::odd_bump(b, 1.3).unwrap();
        let eps = 0.25;
        let sum = mollify_kernel(&KernelSpec::sum(&k1, &k2).unwrap(), eps).unwrap();
        let parts = mollify_kernel(&k1, eps).unwrap().eval1(z) + mollify_kernel(&k2, eps).unwrap().eval1(z);
        prop_assert!((sum.eval1(z) - parts).abs() <= 1e-8, "{} vs {parts}", sum.eval1(z));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn solver_conserves_mass_and_positivity(seed in any::<u64>(), amp in 0.0..4.0_f64, freq in 0.05..1.0_f64) {
        let grid = Grid::line(-8.0, 8.0, 128).unwrap();
        let time = TimeGrid::new(0.25, 100).unwrap();
        let coeffs = CoefficientSet::constant_isotropic(1, 1.0, 1.0).unwrap();
        let rho0 = InitialDensity::gaussian(1, 0.0, 0.5).unwrap().discretize(&grid).unwrap();
        let faces = (0..100).map(|j| (0..=128).map(|p| amp * ((p + 3 * j) as f64 * freq).sin()).collect()).collect();
        let w = CommonPath::generate(time, 1, seed).unwrap();
        let sol = solve_linear_fpk(&TabulatedDrift { faces }, &coeffs, &rho0, &w, time).unwrap();
        let d = &sol.diagnostics;
        prop_assert!(d.min.iter().all(|m| *m >= 0.0));
        prop_assert!(d.unaccounted_mass_drift() <= 1e-12);
        prop_assert!(d.mass.iter().all(|m| (m - 1.0).abs() <= 1e-10));
    }

    #[test]
    fn particle_runs_are_deterministic_and_round_trip(seed in any::<u64>(), n in 2usize..16) {
        let time = TimeGrid::new(0.1, 10).unwrap();
        let k = KernelSpec::odd_bump(0.5, 1.0).unwrap();
        let coeffs = CoefficientSet::constant_isotropic(1, 1.0, 1.0).unwrap();
        let rho0 = InitialDensity::gaussian(1, 0.0, 1.0).unwrap();
        let run = || {
            let bundle = make_bundle(time, n, (1, 1), seed).unwrap();
            simulate_particles(&k, &coeffs, &rho0, &bundle, time).unwrap()
        };
        let a = run();
        prop_assert_eq!(&a, &run());
        let mut buf = Vec::new();
        write_trajectory_binary(&a, &mut buf).unwrap();
        prop_assert_eq!(read_trajectory_binary(&buf[..]).unwrap(), a);
    }
}
