use proptest::prelude::*;
use unidec::decomp::build_family;
use unidec::ensemble::{random_band_limited, random_localized, Support};
use unidec::estimates::*;
use unidec::propagator::evolve_trajectory;
use unidec::{make_grid, Error, Grid, C64};

fn default_grid() -> Grid {
    make_grid(2, 128, 3, 4.0, 64, &[1, -1]).unwrap()
}

fn small_grid() -> Grid {
    make_grid(2, 64, 2, 2.0, 16, &[1, -1]).unwrap()
}

fn brackets(ks: &[i64]) -> Vec<f64> {
    ks.iter().map(|&k| 1.0 + k as f64).collect()
}

#[test]
fn fit_recovers_power_laws() {
    let xs = [1.0, 2.0, 4.0, 8.0, 16.0];
    let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.sqrt()).collect();
    let f = fit_scaling(&xs, &ys).unwrap();
    assert!((f.slope - 0.5).abs() < 1e-12);
    assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
    assert!(f.stderr < 1e-12);
    let flat = fit_scaling(&xs, &[2.0; 5]).unwrap();
    assert!(flat.slope.abs() < 1e-12);
}

#[test]
fn fit_rejects_bad_input() {
    assert!(matches!(fit_scaling(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]), Err(Error::Invalid(_))));
    assert!(fit_scaling(&[1.0, 2.0, 2.0, 3.0], &[1.0; 4]).is_err());
    assert!(fit_scaling(&[1.0, 2.0, 3.0, 4.0], &[1.0, 0.0, 1.0, 1.0]).is_err());
}

#[test]
fn ids_parse_back() {
    for id in EstimateId::ALL {
        assert_eq!(id.name().parse::<EstimateId>().unwrap(), id);
        assert_eq!(id.name().to_lowercase().parse::<EstimateId>().unwrap(), id);
    }
    assert!("GSE4".parse::<EstimateId>().is_err());
}

#[test]
fn parameter_ranges() {
    let p = EstimateParams::default();
    let spec = |id, p| EstimateSpec::new(id, p);
    assert!(spec(EstimateId::Max, p).validate(2).is_ok());
    assert!(spec(EstimateId::Max, EstimateParams { q: 2.0, ..p }).validate(2).is_err());
    assert!(spec(EstimateId::Max, EstimateParams { q: 2.0, ..p }).validate(3).is_ok());
    assert!(spec(EstimateId::Int1, p).validate(2).is_err());
    assert!(spec(EstimateId::Int1, EstimateParams { axis: 1, ..p }).validate(2).is_ok());
    assert!(spec(EstimateId::Stri, EstimateParams { gamma: 3.0, ..p }).validate(2).is_err());
    assert!(spec(EstimateId::Int2, EstimateParams { sigma: 0.5, variant: 1, ..p }).validate(2).is_err());
    assert!(spec(EstimateId::Int2, EstimateParams { sigma: 0.5, ..p }).validate(2).is_ok());
    assert!(spec(EstimateId::Stsm, EstimateParams { variant: 11, ..p }).validate(2).is_err());
    assert!(spec(EstimateId::Max, EstimateParams { axis: 2, ..p }).validate(2).is_err());
}

#[test]
fn growth_labels() {
    let p = EstimateParams::default();
    assert_eq!(EstimateSpec::new(EstimateId::Max, p).growth_label(), "<k_1>^0.25");
    assert_eq!(EstimateSpec::new(EstimateId::Gse1, p).growth_label(), "1");
    let s = EstimateSpec::new(EstimateId::Kmax1, EstimateParams { axis: 1, ..p });
    assert!((s.power(&[-3, 1]) - 4f64.powf(1.25)).abs() < 1e-12);
}

#[test]
fn every_entry_runs() {
    let g = small_grid();
    let fam = build_family(&g, 6).unwrap();
    // the angular and k_max entries only see boxes with |k| > 4
    let ens = Ensemble { samples: 2, ball: 6, terms: 2, ..Ensemble::default() };
    for id in EstimateId::ALL {
        for v in 0..id.variants() {
            let mut p = EstimateParams { variant: v, ..EstimateParams::default() };
            if id == EstimateId::Int1 {
                p.axis = 1;
            }
            let spec = EstimateSpec::new(id, p).with_boxes(vec![vec![1, 1], vec![2, 0]]);
            let rep = run_estimate(&spec, &fam, &ens).unwrap_or_else(|e| panic!("{id} variant {v}: {e}"));
            assert!(rep.max_ratio.is_finite(), "{id} variant {v}");
            assert!(rep.samples.iter().all(|s| s.lhs >= 0.0 && s.rhs > 0.0));
            if id.box_localized() {
                assert_eq!(rep.per_box.len(), 2);
            }
        }
    }
}

#[test]
fn boxes_must_lie_in_family() {
    let g = small_grid();
    let fam = build_family(&g, 4).unwrap();
    let spec = EstimateSpec::new(EstimateId::Max, EstimateParams::default()).with_boxes(vec![vec![5, 0]]);
    assert!(run_estimate(&spec, &fam, &Ensemble::default()).is_err());
    let spec = EstimateSpec::new(EstimateId::Max, EstimateParams::default());
    assert!(run_estimate(&spec, &fam, &Ensemble::default()).is_err());
}

#[test]
fn runs_are_deterministic() {
    let g = small_grid();
    let fam = build_family(&g, 4).unwrap();
    let ens = Ensemble { samples: 3, ..Ensemble::default() };
    let spec = EstimateSpec::new(EstimateId::Gse2, EstimateParams::default());
    let a = run_estimate(&spec, &fam, &ens).unwrap();
    let b = run_estimate(&spec, &fam, &ens).unwrap();
    assert_eq!(a, b);
}

#[test]
fn smoothing_ratios_survive_refinement() {
    let g = default_grid();
    let fine = refine_grid(&g).unwrap();
    assert_eq!(fine.points(), &[256, 256]);
    assert_eq!(fine.nt(), 128);
    assert!((fine.dt() - g.dt()).abs() < 0.01 * g.dt());
    let fc = build_family(&g, 6).unwrap();
    let ff = build_family(&fine, 6).unwrap();
    let ens = Ensemble { samples: 2, ..Ensemble::default() };
    for id in [EstimateId::Gse1, EstimateId::Gse2, EstimateId::Gse3] {
        let r = refinement_factor(&EstimateSpec::new(id, EstimateParams::default()), &ens, &fc, &ff).unwrap();
        assert!(r.factor < 2.0, "{id}: {}", r.factor);
    }
}

#[test]
fn maximal_norm_dual_route() {
    // lab grid wide enough that the packet never wraps for |t| ≤ 1
    let lab = make_grid(2, 256, 3, 1.0, 256, &[1, -1]).unwrap();
    let fam = build_family(&lab, 12).unwrap();
    for seed in [3, 7] {
        let v = random_localized(&lab, &Support::Cube(vec![0, 0]), 1.5, seed).unwrap();
        let envelope = fam.apply_box(&[0, 0], &v).unwrap();
        for k in [[0i64, 0], [8, 0], [8, 3]] {
            let direct = maximal_norm_lab(&modulate(&v, &k).unwrap(), &fam, &k, 0, 4.0).unwrap();
            let moving = maximal_norm_moving(&envelope, &k, 0, 4.0).unwrap();
            assert!((direct - moving).abs() < 0.02 * moving, "{k:?}: {direct} vs {moving}");
        }
    }
}

#[test]
fn maximal_norm_grows_like_quarter_power() {
    let env = default_grid();
    let fam = build_family(&env, 4).unwrap();
    let ks = [8i64, 16, 32, 64];
    let ys: Vec<f64> = ks
        .iter()
        .map(|&k| {
            (0..3)
                .map(|s| {
                    let v = random_localized(&env, &Support::Cube(vec![0, 0]), 1.5, 100 + s).unwrap();
                    let b = fam.apply_box(&[0, 0], &v).unwrap();
                    maximal_norm_moving(&b, &[k, 0], 0, 4.0).unwrap() / b.l2()
                })
                .sum::<f64>()
                / 3.0
        })
        .collect();
    let fit = fit_scaling(&brackets(&ks), &ys).unwrap();
    assert!((fit.slope - 0.25).abs() < 0.1, "{fit:?}");
}

#[test]
fn maximal_norm_ignores_transverse_frequency() {
    let lab = make_grid(2, 256, 3, 1.0, 256, &[1, -1]).unwrap();
    let fam = build_family(&lab, 12).unwrap();
    let v = random_localized(&lab, &Support::Cube(vec![0, 0]), 1.5, 11).unwrap();
    let base = maximal_norm_lab(&modulate(&v, &[8, 0]).unwrap(), &fam, &[8, 0], 0, 4.0).unwrap();
    for k2 in [-4, 2, 5] {
        let k = [8, k2];
        let other = maximal_norm_lab(&modulate(&v, &k).unwrap(), &fam, &k, 0, 4.0).unwrap();
        assert!((other - base).abs() < 0.02 * base, "k2 = {k2}: {other} vs {base}");
    }
}

#[test]
fn witness_attains_the_exponent() {
    let w = Grid::with_points(&[2048, 64], 5, 1.0, 4, &[1, -1]).unwrap();
    let ks = [8i64, 16, 32, 64];
    let lbs: Vec<f64> = ks.iter().map(|&k| sharpness_witness(k, 4.0, &w).unwrap().lower_bound).collect();
    let fit = fit_scaling(&ks.iter().map(|&k| k as f64).collect::<Vec<_>>(), &lbs).unwrap();
    assert!((fit.slope - 1.0).abs() < 0.2, "{fit:?}");
    let ratio = lbs[2] / lbs[0];
    assert!((2.8..=5.7).contains(&ratio), "{ratio}");
    // the bound sits below the full norm computed in the moving frame
    let env = default_grid();
    for (&k, &lb) in ks.iter().zip(&lbs) {
        assert!(witness_norm(k, 4.0, &env).unwrap() >= lb);
    }
}

#[test]
fn witness_rejects_small_setups() {
    let w = Grid::with_points(&[2048, 64], 5, 1.0, 4, &[1, -1]).unwrap();
    assert!(sharpness_witness(4, 4.0, &w).is_err());
    assert!(sharpness_witness(8, f64::INFINITY, &w).is_err());
    let short = make_grid(2, 64, 2, 1.0, 4, &[1, -1]).unwrap();
    assert!(sharpness_witness(16, 4.0, &short).is_err());
}

#[test]
fn discrete_derivative_scales_like_sigma() {
    let g = Grid::with_points(&[512, 512], 2, 1.0, 8, &[1, -1]).unwrap();
    let fam = build_family(&g, 60).unwrap();
    let ks = [8i64, 16, 24, 32, 48];
    for sigma in [0.5, 1.0] {
        let ys: Vec<f64> = ks
            .iter()
            .map(|&k| {
                (0..3)
                    .map(|s| {
                        let v = random_localized(&g, &Support::Cube(vec![k, 0]), 2.0, s).unwrap();
                        let u = evolve_trajectory(&v).unwrap();
                        discrete_derivative_ratio(&u, &fam, &[k, 0], 0, sigma, 4.0, 2.0).unwrap()
                    })
                    .sum::<f64>()
                    / 3.0
            })
            .collect();
        let fit = fit_scaling(&brackets(&ks), &ys).unwrap();
        assert!((fit.slope - sigma).abs() < 0.1, "σ = {sigma}: {fit:?}");
    }
}

#[test]
fn nikolskii_constant_is_uniform() {
    let g = make_grid(2, 256, 2, 1.0, 4, &[1, -1]).unwrap();
    let cs: Vec<f64> =
        [[0i64, 0], [8, 0], [16, 16]].iter().map(|k| nikolskii_constant(&g, k, 2.0, 4.0, 50, 1).unwrap()).collect();
    let (lo, hi) = cs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
    assert!(hi / lo <= 1.5, "{cs:?}");
}

#[test]
fn modulation_is_a_phase() {
    let g = make_grid(2, 64, 2, 1.0, 4, &[1, -1]).unwrap();
    let f = random_band_limited(&g, &Support::Cube(vec![0, 0]), 5).unwrap();
    let k = [3i64, -2];
    let shifted = modulate(&f, &k).unwrap().into_physical();
    let p = f.to_physical();
    let mut idx = [0usize; 2];
    let by_hand: Vec<C64> = p
        .data()
        .iter()
        .enumerate()
        .map(|(q, z)| {
            g.unravel(q, &mut idx);
            let phase = k[0] as f64 * g.x(0, idx[0]) + k[1] as f64 * g.x(1, idx[1]);
            z * C64::from_polar(1.0, phase)
        })
        .collect();
    let err = shifted.data().iter().zip(&by_hand).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err < 1e-12 * p.max_abs().max(1.0), "{err}");
    for (p_, q_) in [(2.0, 4.0), (1.0, 3.0)] {
        let a = nikolskii_ratio(&f, p_, q_).unwrap();
        let b = nikolskii_ratio(&shifted, p_, q_).unwrap();
        assert!((a - b).abs() < 1e-10 * a);
    }
    assert!(nikolskii_ratio(&f, 4.0, 2.0).is_err());
    assert!(matches!(modulate(&f, &[20, 0]), Err(Error::Nyquist(_))));
}

#[test]
fn orthogonality_outside_support_radius() {
    let rep = orth_check(2, 2, 3, 10_000, 3, 2024).unwrap();
    assert_eq!(rep.coarse_radius, 7);
    assert_eq!(rep.sharp_radius, 4);
    assert!(rep.beyond_coarse > 100, "{}", rep.beyond_coarse);
    assert!(rep.coarse_failures.is_empty());
    assert!(rep.sharp_failures.is_empty());
    assert_eq!(rep.max_nonzero_distance, 3);
}

#[test]
fn orth_sparse_matches_fft() {
    let g = make_grid(2, 128, 2, 1.0, 4, &[1, -1]).unwrap();
    let fam = build_family(&g, 12).unwrap();
    let tuple = OrthTuple { factors: vec![vec![1, 0], vec![-2, 3], vec![0, -1]], k: vec![-1, 2], seed: 77 };
    let (sparse, fft) = orth_fft_crosscheck(&fam, &tuple).unwrap();
    assert!(sparse > 0.0);
    assert!((sparse - fft).abs() < 1e-10 * sparse, "{sparse} vs {fft}");
    let far = OrthTuple { k: vec![3, 2], ..tuple.clone() };
    assert_eq!(far.distance(), 4);
    let (sparse, fft) = orth_fft_crosscheck(&fam, &far).unwrap();
    assert_eq!(sparse, 0.0);
    assert!(fft < 1e-12, "{fft}");
}

#[test]
fn orth_rejects_unsupported_setups() {
    assert!(orth_check(4, 2, 3, 1, 3, 0).is_err());
    assert!(orth_check(2, 2, 0, 1, 3, 0).is_err());
    let g = make_grid(2, 32, 2, 1.0, 4, &[1, -1]).unwrap();
    let fam = build_family(&g, 1).unwrap();
    let tuple = OrthTuple { factors: vec![vec![3, 0], vec![3, 0], vec![0, 0]], k: vec![6, 0], seed: 1 };
    assert!(orth_fft_crosscheck(&fam, &tuple).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fit_slope_matches_exponent(e in -2.0f64..2.0, c in 0.1f64..10.0) {
        let xs = [2.0, 3.0, 5.0, 9.0, 17.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| c * x.powf(e)).collect();
        let f = fit_scaling(&xs, &ys).unwrap();
        prop_assert!((f.slope - e).abs() < 1e-10);
    }

    #[test]
    fn modulation_round_trips(seed in 0u64..1000, a in -4i64..=4, b in -4i64..=4) {
        let g = make_grid(2, 64, 2, 1.0, 4, &[1, -1]).unwrap();
        let f = random_band_limited(&g, &Support::Cube(vec![0, 0]), seed).unwrap();
        let there = modulate(&f, &[a, b]).unwrap();
        prop_assert!((there.l2() - f.l2()).abs() < 1e-12 * f.l2());
        let back = modulate(&there, &[-a, -b]).unwrap();
        let fh = f.to_frequency();
        let err = back.data().iter().zip(fh.data()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        prop_assert!(err == 0.0);
    }

    #[test]
    fn far_products_vanish(seed in 0u64..10_000, a in -3i64..=3, b in -3i64..=3, c in -3i64..=3, d in -3i64..=3, off in 4i64..9) {
        let factors = vec![vec![a, b], vec![c, d], vec![b, a]];
        let sum = [a + c + b, b + d + a];
        let t = OrthTuple { factors, k: vec![sum[0] + off, sum[1]], seed };
        prop_assert!(t.distance() >= 4);
        let g = make_grid(2, 128, 2, 1.0, 4, &[1, -1]).unwrap();
        let fam = build_family(&g, 12).unwrap();
        if (sum[0] + off).abs() <= 12 {
            let (sparse, fft) = orth_fft_crosscheck(&fam, &t).unwrap();
            prop_assert_eq!(sparse, 0.0);
            prop_assert!(fft < 1e-12);
        }
    }

    #[test]
    fn witness_grid_independent_of_transverse_size(k in 8i64..24) {
        let a = Grid::with_points(&[1024, 16], 5, 1.0, 4, &[1, -1]).unwrap();
        let b = Grid::with_points(&[1024, 32], 5, 1.0, 4, &[1, -1]).unwrap();
        let wa = sharpness_witness(k, 4.0, &a).unwrap();
        let wb = sharpness_witness(k, 4.0, &b).unwrap();
        prop_assert!((wa.lower_bound - wb.lower_bound).abs() < 1e-12 * wa.lower_bound);
    }
}
