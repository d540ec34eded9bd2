use proptest::prelude::*;
use unidec::decomp::{apply_angular, build_family, Angular};
use unidec::ensemble::{random_band_limited, random_forcing, random_localized, Support};
use unidec::propagator::{
    derivative, duhamel, evolve_trajectory, free_evolve, partial_antiderivative, partial_riesz, ZeroPlane,
};
use unidec::{make_grid, Error, Field, Grid, Kind, Rep, C64};

fn grid(eps: [i8; 2]) -> Grid {
    make_grid(2, 128, 3, 4.0, 64, &eps).unwrap()
}

#[test]
fn free_flow_basics() {
    for eps in [[1, 1], [1, -1]] {
        let g = grid(eps);
        let f = random_localized(&g, &Support::Ball(5), 3.0, 1).unwrap().to_physical();
        assert!(free_evolve(&f, 0.0).rel_diff(&f).unwrap() < 1e-13);
        for t in [-3.7, 0.3, 2.5] {
            assert!((free_evolve(&f, t).l2() - 1.0).abs() < 1e-12);
        }
        let back = free_evolve(&free_evolve(&f, 1.0), -1.0);
        assert!(back.rel_diff(&f).unwrap() < 1e-12);
        let two = free_evolve(&free_evolve(&f, 0.4), 1.1);
        assert!(two.rel_diff(&free_evolve(&f, 1.5)).unwrap() < 1e-12);
    }
}

#[test]
fn trajectory_slices() {
    for eps in [[1, 1], [1, -1]] {
        let g = grid(eps);
        let f = random_band_limited(&g, &Support::Ball(6), 2).unwrap().to_physical();
        let u = evolve_trajectory(&f).unwrap();
        assert!(u.is_physical());
        let z = g.zero_index().unwrap();
        assert!(u.at(z).rel_diff(&f).unwrap() < 1e-13);
        for m in 0..g.nt() {
            assert!((u.l2_slice(m) - 1.0).abs() < 1e-12);
        }
        assert!(u.at(5).rel_diff(&free_evolve(&f, g.time(5))).unwrap() < 1e-12);
    }
}

#[test]
fn duhamel_of_zero_and_zero_time() {
    let g = grid([1, 1]);
    let z = duhamel(&Field::zeros(&g, Kind::SpaceTime)).unwrap();
    assert_eq!(z.max_abs(), 0.0);
    let f = random_forcing(&g, &Support::Ball(4), 2.0, 0.7, 2.0, 3, 9).unwrap();
    let a = duhamel(&f).unwrap();
    assert_eq!(a.at(32).max_abs(), 0.0);
    assert!(a.l2() > 0.0);
    let odd = make_grid(2, 16, 2, 1.0, 5, &[1, 1]).unwrap();
    assert!(matches!(duhamel(&Field::zeros(&odd, Kind::SpaceTime)), Err(Error::Invalid(_))));
}

/// `f(τ) = e^{iβτ} S(τ) g` has `𝒜f(t) = S(t) g (e^{iβt} − 1)/(iβ)`; for
/// `β = 0` the integrand is constant in the interaction picture.
fn duhamel_error(nt: usize, beta: f64) -> f64 {
    let g = make_grid(2, 64, 2, 4.0, nt, &[1, -1]).unwrap();
    let g0 = random_band_limited(&g, &Support::Ball(4), 17).unwrap();
    let traj = evolve_trajectory(&g0).unwrap();
    let mut f = traj.clone();
    for m in 0..nt {
        let ph = C64::from_polar(1.0, beta * g.time(m));
        f.slice_mut(m).iter_mut().for_each(|z| *z *= ph);
    }
    let a = duhamel(&f).unwrap();
    let mut worst: f64 = 0.0;
    for m in 0..nt {
        let t = g.time(m);
        let factor = if beta == 0.0 {
            C64::new(t, 0.0)
        } else {
            (C64::from_polar(1.0, beta * t) - 1.0) / C64::new(0.0, beta)
        };
        let exact = traj.at(m).scale(factor);
        worst = worst.max(a.at(m).sub(&exact).unwrap().l2());
    }
    worst
}

#[test]
fn duhamel_exact_for_interaction_constant_forcing() {
    assert!(duhamel_error(64, 0.0) < 1e-12);
}

#[test]
fn duhamel_second_order() {
    let e1 = duhamel_error(64, 1.0);
    let e2 = duhamel_error(128, 1.0);
    let ratio = e1 / e2;
    assert!((3.2..=4.8).contains(&ratio), "ratio {ratio}");
}

#[test]
fn riesz_potentials() {
    let g = make_grid(2, 256, 3, 1.0, 4, &[1, 1]).unwrap();
    let fam = build_family(&g, 12).unwrap();
    let f = random_band_limited(&g, &Support::Cube(vec![8, 3]), 5).unwrap();
    let id = partial_riesz(&f, 0, 0.0, ZeroPlane::Reject).unwrap();
    assert!(id.field.rel_diff(&f).unwrap() < 1e-15);
    let half = partial_riesz(&f, 0, 0.5, ZeroPlane::Reject).unwrap().field;
    let twice = partial_riesz(&half, 0, 0.5, ZeroPlane::Reject).unwrap().field;
    let one = partial_riesz(&f, 0, 1.0, ZeroPlane::Reject).unwrap().field;
    assert!(twice.rel_diff(&one).unwrap() < 1e-12);

    let b = fam.apply_box(&[8, 0], &random_band_limited(&g, &Support::Ball(10), 6).unwrap()).unwrap();
    let d = partial_riesz(&b, 0, 1.0, ZeroPlane::Reject).unwrap().field;
    let ratio = d.l2() / b.l2();
    assert!((7.0..=10.0).contains(&ratio), "{ratio}");
}

#[test]
fn antiderivative_conventions() {
    let g = make_grid(2, 128, 3, 4.0, 8, &[1, 1]).unwrap();
    let f = random_band_limited(&g, &Support::Cube(vec![4, 2]), 1).unwrap();
    let a = partial_antiderivative(&f, 0, ZeroPlane::Reject).unwrap();
    assert!(!a.flagged);
    assert!(derivative(&a.field, 0).rel_diff(&f).unwrap() < 1e-12);

    let c = Field::from_vec(&g, Kind::Spatial, Rep::Physical, vec![C64::new(1.0, 0.0); g.len()]).unwrap();
    assert!(partial_antiderivative(&c, 0, ZeroPlane::Reject).is_err());
    let z = partial_antiderivative(&c, 0, ZeroPlane::Zero).unwrap();
    assert!(z.flagged);
    assert!(z.field.max_abs() < 1e-14);
    assert!(partial_riesz(&c, 1, -0.5, ZeroPlane::Reject).is_err());

    // ξ₂/ξ₁ on a box with |k₁| > 4 never touches ξ₁ = 0
    let fam = build_family(&g, 6).unwrap();
    let h = random_band_limited(&g, &Support::Ball(6), 2).unwrap();
    let b = fam.apply_box(&[5, -3], &h).unwrap();
    let r = partial_antiderivative(&derivative(&b, 1), 0, ZeroPlane::Reject).unwrap();
    assert!(!r.flagged);
    assert!(r.field.l2().is_finite() && r.field.l2() > 0.0);
}

#[test]
fn flow_commutes_with_multipliers() {
    let g = grid([1, -1]);
    let fam = build_family(&g, 6).unwrap();
    let f = random_localized(&g, &Support::Ball(6), 2.0, 3).unwrap().to_physical();
    let t = 1.3;
    let lhs = fam.apply_box(&[2, -1], &free_evolve(&f, t)).unwrap();
    let rhs = free_evolve(&fam.apply_box(&[2, -1], &f).unwrap(), t);
    assert!(lhs.sub(&rhs).unwrap().l2() < 1e-12);
    let lhs = apply_angular(Angular::P1, &free_evolve(&f, t)).unwrap();
    let rhs = free_evolve(&apply_angular(Angular::P1, &f).unwrap(), t);
    assert!(lhs.sub(&rhs).unwrap().l2() < 1e-12);
    let lhs = partial_riesz(&free_evolve(&f, t), 1, 0.5, ZeroPlane::Zero).unwrap().field;
    let rhs = free_evolve(&partial_riesz(&f, 1, 0.5, ZeroPlane::Zero).unwrap().field, t);
    assert!(lhs.sub(&rhs).unwrap().l2() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn duhamel_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let g = make_grid(2, 32, 2, 2.0, 16, &[1, -1]).unwrap();
        let f = random_forcing(&g, &Support::Ball(3), 2.0, 0.5, 1.0, 2, seed).unwrap();
        let h = random_forcing(&g, &Support::Ball(3), 2.0, 0.5, 1.0, 2, seed ^ 7).unwrap();
        let mix = f.scale(C64::new(a, 0.0)).axpy(C64::new(0.0, b), &h).unwrap();
        let lhs = duhamel(&mix).unwrap();
        let rhs = duhamel(&f).unwrap().scale(C64::new(a, 0.0)).axpy(C64::new(0.0, b), &duhamel(&h).unwrap()).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().l2() <= 1e-12 * (1.0 + rhs.l2()));
    }

    #[test]
    fn free_flow_is_unitary(seed in any::<u64>(), t in -4.0f64..4.0) {
        let g = make_grid(2, 32, 2, 4.0, 4, &[1, -1]).unwrap();
        let f = random_band_limited(&g, &Support::Ball(3), seed).unwrap().to_physical();
        prop_assert!((free_evolve(&f, t).l2() - 1.0).abs() < 1e-12);
    }
}
