use proptest::prelude::*;
use unidec::decomp::{apply_angular, bernstein_apply, build_family, eta, Angular};
use unidec::ensemble::{complex_normal, random_band_limited, random_localized, rng, Support};
use unidec::propagator::free_evolve;
use unidec::{make_grid, Error, Field, Kind, Rep, C64};

fn wide_grid() -> unidec::Grid {
    make_grid(2, 256, 3, 1.0, 4, &[1, 1]).unwrap()
}

/// Random coefficients on the closed unit cube `|ξ − k|∞ ≤ 1/2`.
fn cube_field(g: &unidec::Grid, k: &[i64], seed: u64) -> Field {
    let mut r = rng(seed);
    let mut idx = [0usize; 2];
    let data = (0..g.len())
        .map(|p| {
            g.unravel(p, &mut idx);
            let inside = (0..2).all(|a| (g.xi(a, idx[a]) - k[a] as f64).abs() <= 0.5);
            if inside {
                complex_normal(&mut r)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    Field::from_vec(g, Kind::Spatial, Rep::Frequency, data).unwrap()
}

#[test]
fn default_family_partitions_unity() {
    let g = make_grid(2, 128, 3, 4.0, 64, &[1, 1]).unwrap();
    let fam = build_family(&g, 6).unwrap();
    assert!(fam.partition_residual(5.0) < 1e-10);
    assert!(fam.partition_residual(6.0) < 1e-10);
    assert!(matches!(build_family(&g, 7), Err(Error::Nyquist(_))));
}

#[test]
fn uncovered_edge_is_reported() {
    let g = make_grid(2, 128, 3, 4.0, 64, &[1, 1]).unwrap();
    let fam = build_family(&g, 3).unwrap();
    let r = fam.partition_residual(4.0);
    assert!((r - 1.0).abs() < 1e-12, "{r}");
}

#[test]
fn one_dimensional_family() {
    let g = make_grid(1, 64, 3, 1.0, 4, &[1]).unwrap();
    let fam = build_family(&g, 2).unwrap();
    assert!(fam.partition_residual(1.0) < 1e-10);
}

#[test]
fn lower_bound_on_unit_cubes() {
    let g = make_grid(2, 128, 3, 4.0, 64, &[1, 1]).unwrap();
    let fam = build_family(&g, 6).unwrap();
    for k in fam.indices() {
        let xi: Vec<f64> = k.iter().map(|&c| c as f64).collect();
        assert_eq!(fam.sigma(&k, &xi), 1.0);
    }
    let c = fam.cube_floor();
    assert!((c - 0.25).abs() < 1e-12, "measured c = {c}");
}

#[test]
fn support_of_shifted_box() {
    let g = wide_grid();
    let fam = build_family(&g, 12).unwrap();
    let mut idx = [0usize; 2];
    let sym = fam.symbol(&[8, 0]).unwrap();
    for (p, &s) in sym.iter().enumerate() {
        g.unravel(p, &mut idx);
        let d = (g.xi(0, idx[0]) - 8.0).hypot(g.xi(1, idx[1]));
        if d > 2f64.sqrt() {
            assert_eq!(s, 0.0);
        }
    }
}

#[test]
fn translation_structure_is_exact() {
    let g = wide_grid();
    let fam = build_family(&g, 12).unwrap();
    let s0 = fam.symbol(&[0, 0]).unwrap();
    let k = [5i64, -3];
    let sk = fam.symbol(&k).unwrap();
    let mut idx = [0usize; 2];
    for (p, &v) in sk.iter().enumerate() {
        g.unravel(p, &mut idx);
        let m0 = g.freq_index(0, idx[0]) - 8 * k[0];
        let m1 = g.freq_index(1, idx[1]) - 8 * k[1];
        let shifted = match (g.index_of_freq(0, m0), g.index_of_freq(1, m1)) {
            (Some(a), Some(b)) => s0[a * 256 + b],
            _ => 0.0,
        };
        assert_eq!(v, shifted);
    }
}

#[test]
fn distant_box_kills_cube_data() {
    let g = wide_grid();
    let fam = build_family(&g, 12).unwrap();
    let f = cube_field(&g, &[2, 1], 4);
    for k in [[5i64, 1], [2, -2], [-1, 4], [5, 5]] {
        let b = fam.apply_box(&k, &f).unwrap();
        assert_eq!(b.max_abs(), 0.0, "k = {k:?}");
    }
    assert!(fam.apply_box(&[2, 1], &f).unwrap().l2() > 0.0);
    assert!(matches!(fam.apply_box(&[13, 0], &f), Err(Error::Invalid(_))));
}

#[test]
fn boxes_sum_to_identity() {
    let g = make_grid(2, 128, 3, 4.0, 64, &[1, -1]).unwrap();
    let fam = build_family(&g, 6).unwrap();
    let f = random_localized(&g, &Support::Ball(5), 3.0, 11).unwrap().to_physical();
    let mut acc = Field::zeros(&g, Kind::Spatial);
    for k in fam.indices() {
        acc = acc.add(&fam.apply_box(&k, &f).unwrap()).unwrap();
    }
    assert!(acc.rel_diff(&f).unwrap() < 1e-10);
}

#[test]
fn boxes_commute_with_free_flow() {
    let g = make_grid(2, 128, 3, 4.0, 64, &[1, -1]).unwrap();
    let fam = build_family(&g, 6).unwrap();
    let f = random_band_limited(&g, &Support::Ball(4), 2).unwrap().to_physical();
    for k in [[0i64, 0], [3, -2], [4, 4]] {
        let b = fam.apply_box(&k, &f).unwrap();
        for t in [-3.0, 0.7, 4.0] {
            let lhs = fam.apply_box(&k, &free_evolve(&f, t)).unwrap();
            let rhs = free_evolve(&b, t);
            assert!(lhs.sub(&rhs).unwrap().l2() < 1e-12);
            assert!((lhs.l2() - b.l2()).abs() < 1e-12);
        }
    }
}

#[test]
fn almost_orthogonality() {
    let g = make_grid(2, 128, 3, 4.0, 64, &[1, 1]).unwrap();
    let fam = build_family(&g, 6).unwrap();
    let f = random_band_limited(&g, &Support::Ball(6), 3).unwrap();
    for k in fam.indices() {
        let bk = fam.apply_box(&k, &f).unwrap();
        for kp in [[k[0] + 3, k[1]], [k[0], k[1] - 3], [k[0] + 2, k[1] + 2]] {
            if !fam.contains(&kp) {
                continue;
            }
            assert!(fam.apply_box(&kp, &bk).unwrap().l2() < 1e-13);
        }
    }
}

#[test]
fn angular_projectors() {
    let g = make_grid(2, 128, 3, 4.0, 64, &[1, 1]).unwrap();
    let f = random_band_limited(&g, &Support::Ball(6), 8).unwrap().to_physical();
    let p1 = apply_angular(Angular::P1, &f).unwrap();
    let p2 = apply_angular(Angular::P2, &f).unwrap();
    assert!(p1.add(&p2).unwrap().rel_diff(&f).unwrap() < 1e-12);

    let steep = f.to_frequency().multiplier(|xi| {
        let keep = xi[0] != 0.0 && xi[1].abs() >= 5.0 * xi[0].abs();
        C64::new(f64::from(u8::from(keep)), 0.0)
    });
    assert!(steep.l2() > 0.0);
    assert_eq!(apply_angular(Angular::P1, &steep).unwrap().max_abs(), 0.0);

    let flat = f.to_frequency().multiplier(|xi| C64::new(f64::from(u8::from(xi[1].abs() <= xi[0].abs())), 0.0));
    assert!(flat.l2() > 0.0);
    assert_eq!(apply_angular(Angular::P2, &flat).unwrap().max_abs(), 0.0);

    let line = make_grid(1, 64, 3, 1.0, 4, &[1]).unwrap();
    assert!(apply_angular(Angular::P1, &Field::zeros(&line, Kind::Spatial)).is_err());
}

#[test]
fn multiplier_ratios() {
    let g = wide_grid();
    let fam = build_family(&g, 12).unwrap();
    let f = random_band_limited(&g, &Support::Cube(vec![3, 3]), 6).unwrap();
    let (_, r) = bernstein_apply(|_| 1.0, &f, 4.0).unwrap();
    assert!((r - 1.0).abs() < 1e-12);
    let sym = |xi: &[f64]| fam.sigma(&[3, 3], xi) * 0.5;
    let (_, r2) = bernstein_apply(sym, &f, 2.0).unwrap();
    assert!(r2 <= 0.5 + 1e-10);

    // the constant for σ_k is the same wherever the box sits
    let worst = |k: [i64; 2]| {
        (0..50u64)
            .map(|s| {
                let f = random_band_limited(&g, &Support::Cube(k.to_vec()), 1000 + s).unwrap();
                bernstein_apply(|xi| fam.sigma(&k, xi), &f, 4.0).unwrap().1
            })
            .fold(0.0, f64::max)
    };
    let c: Vec<f64> = [[0, 0], [8, 0], [10, 10]].into_iter().map(worst).collect();
    let spread = c.iter().cloned().fold(0.0, f64::max) / c.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread < 1.5, "{c:?}");
}

proptest! {
    #[test]
    fn eta_translates_sum_to_one(s in -20.0f64..20.0) {
        let total: f64 = (-25..=25).map(|k| eta(s - k as f64)).sum();
        prop_assert!((total - 1.0).abs() < 1e-14);
        prop_assert!((0.0..=1.0).contains(&eta(s)));
    }

    #[test]
    fn box_is_linear(seed in any::<u64>(), a in -2.0f64..2.0) {
        let g = make_grid(2, 32, 2, 1.0, 4, &[1, 1]).unwrap();
        let fam = build_family(&g, 2).unwrap();
        let f = random_band_limited(&g, &Support::Ball(2), seed).unwrap();
        let h = random_band_limited(&g, &Support::Ball(2), seed ^ 1).unwrap();
        let c = C64::new(a, 0.5);
        let lhs = fam.apply_box(&[1, -1], &f.axpy(c, &h).unwrap()).unwrap();
        let rhs = fam.apply_box(&[1, -1], &f).unwrap().axpy(c, &fam.apply_box(&[1, -1], &h).unwrap()).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().l2() < 1e-13);
    }
}
