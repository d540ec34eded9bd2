//! Acceptance run: one PASS/FAIL line per criterion on the desk-scale grid
//! (n = 2, N = 128, Nt = 64) unless a criterion needs its own geometry.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::Rng;
use unidec::christ_kiselev::*;
use unidec::decomp::{apply_angular, build_family, Angular};
use unidec::ensemble::{complex_normal, random_band_limited, random_forcing, random_localized, rng, Support};
use unidec::estimates::*;
use unidec::norms::MixedNormSpec;
use unidec::propagator::{duhamel, evolve_trajectory, free_evolve};
use unidec::solver::*;
use unidec::{make_grid, Field, Grid, Kind, C64};

type Outcome = (bool, String);

fn default_grid() -> Grid {
    make_grid(2, 128, 3, 4.0, 64, &[1, -1]).unwrap()
}

fn brackets(ks: &[i64]) -> Vec<f64> {
    ks.iter().map(|&k| 1.0 + k.abs() as f64).collect()
}

fn partition_of_unity() -> Outcome {
    let g = default_grid();
    let fam = build_family(&g, 6).unwrap();
    let dev = fam.partition_residual(6.0);
    (dev < 1e-10, format!("max |Σσ_k − 1| = {dev:.2e}"))
}

fn exact_algebra() -> Outcome {
    let g = default_grid();
    let small = make_grid(2, 32, 2, 2.0, 16, &[1, -1]).unwrap();
    let mut worst = [0.0f64; 6];
    for seed in 0..100u64 {
        let f = random_band_limited(&g, &Support::Ball(6), seed).unwrap().to_physical();
        let fhat = f.forward().unwrap();
        worst[0] = worst[0].max((fhat.l2() - f.l2()).abs() / f.l2());
        let t = 0.37 * seed as f64 % 4.0 - 2.0;
        worst[1] = worst[1].max((free_evolve(&f, t).l2() - f.l2()).abs() / f.l2());
        let two = free_evolve(&free_evolve(&f, t), 0.9);
        worst[2] = worst[2].max(two.rel_diff(&free_evolve(&f, t + 0.9)).unwrap());
        let p = apply_angular(Angular::P1, &f).unwrap().add(&apply_angular(Angular::P2, &f).unwrap()).unwrap();
        worst[3] = worst[3].max(p.rel_diff(&f).unwrap());

        let a = random_forcing(&small, &Support::Ball(3), 2.0, 0.5, 1.0, 2, seed).unwrap();
        let b = random_forcing(&small, &Support::Ball(3), 2.0, 0.5, 1.0, 2, seed ^ 0xabc).unwrap();
        let (ca, cb) = (C64::new(1.3, -0.2), C64::new(-0.4, 2.0));
        let lhs = duhamel(&a.scale(ca).axpy(cb, &b).unwrap()).unwrap();
        let rhs = duhamel(&a).unwrap().scale(ca).axpy(cb, &duhamel(&b).unwrap()).unwrap();
        worst[4] = worst[4].max(lhs.sub(&rhs).unwrap().l2() / rhs.l2());
        let z = small.zero_index().unwrap();
        worst[5] = worst[5].max(duhamel(&a).unwrap().at(z).max_abs());
    }
    let ok = worst.iter().all(|&w| w <= 1e-12);
    (
        ok,
        format!(
            "Plancherel {:.1e}, unitarity {:.1e}, group law {:.1e}, P1+P2 {:.1e}, A linear {:.1e}, (Af)(0) {:.1e}",
            worst[0], worst[1], worst[2], worst[3], worst[4], worst[5]
        ),
    )
}

/// `f(τ) = e^{iβτ} S(τ)g`, whose Duhamel integral is `S(t)g (e^{iβt} − 1)/(iβ)`.
fn duhamel_error(nt: usize) -> f64 {
    let beta = 1.0;
    let g = make_grid(2, 128, 3, 4.0, nt, &[1, -1]).unwrap();
    let g0 = random_band_limited(&g, &Support::Ball(4), 17).unwrap();
    let traj = evolve_trajectory(&g0).unwrap();
    let mut f = traj.clone();
    for m in 0..nt {
        let ph = C64::from_polar(1.0, beta * g.time(m));
        f.slice_mut(m).iter_mut().for_each(|z| *z *= ph);
    }
    let a = duhamel(&f).unwrap();
    (0..nt)
        .map(|m| {
            let t = g.time(m);
            let factor = (C64::from_polar(1.0, beta * t) - 1.0) / C64::new(0.0, beta);
            a.at(m).sub(&traj.at(m).scale(factor)).unwrap().l2()
        })
        .fold(0.0, f64::max)
}

fn duhamel_order() -> Outcome {
    let ratio = duhamel_error(64) / duhamel_error(128);
    ((3.2..=4.8).contains(&ratio), format!("error ratio under Δt halving {ratio:.3}"))
}

fn maximal_slope() -> Outcome {
    let g = default_grid();
    let fam = build_family(&g, 4).unwrap();
    let sweep = maximal_scaling(&fam, &[8, 16, 32, 64], 4.0, 3, 100).unwrap();
    let s = sweep.fit.slope;
    ((s - 0.25).abs() <= 0.1, format!("slope {s:.3} over k₁ = 8..64"))
}

fn sharpness() -> Outcome {
    let w = Grid::with_points(&[2048, 64], 5, 1.0, 4, &[1, -1]).unwrap();
    let ks = [8i64, 16, 32, 64];
    let lbs: Vec<f64> = ks.iter().map(|&k| sharpness_witness(k, 4.0, &w).unwrap().lower_bound).collect();
    let fit = fit_scaling(&ks.iter().map(|&k| k as f64).collect::<Vec<_>>(), &lbs).unwrap();
    ((fit.slope - 1.0).abs() <= 0.2, format!("witness slope {:.3}", fit.slope))
}

fn smoothing_refinement() -> Outcome {
    let g = default_grid();
    let fine = refine_grid(&g).unwrap();
    let fc = build_family(&g, 6).unwrap();
    let ff = build_family(&fine, 6).unwrap();
    let ens = Ensemble { samples: 50, ..Ensemble::default() };
    let mut ok = true;
    let mut parts = Vec::new();
    let specs = [
        EstimateSpec::new(EstimateId::Gse1, EstimateParams::default()),
        EstimateSpec::new(EstimateId::Gse2, EstimateParams::default()),
        EstimateSpec::new(EstimateId::Gse3, EstimateParams::default()),
        EstimateSpec::new(EstimateId::Sm1, EstimateParams::default()).with_boxes(vec![vec![0, 0], vec![3, 0], vec![2, -2]]),
    ];
    for spec in &specs {
        let r = refinement_factor(spec, &ens, &fc, &ff).unwrap();
        ok &= r.factor < 2.0;
        parts.push(format!("{} ×{:.3}", spec.id, r.factor));
    }
    (ok, parts.join(", "))
}

fn discrete_derivative() -> Outcome {
    let g = Grid::with_points(&[512, 512], 2, 1.0, 8, &[1, -1]).unwrap();
    let fam = build_family(&g, 60).unwrap();
    let ks = [8i64, 16, 24, 32, 48];
    let mut ok = true;
    let mut parts = Vec::new();
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
        ok &= (fit.slope - sigma).abs() <= 0.1;
        parts.push(format!("σ = {sigma}: slope {:.3}", fit.slope));
    }
    (ok, parts.join(", "))
}

fn nikolskii() -> Outcome {
    let g = make_grid(2, 256, 2, 1.0, 4, &[1, -1]).unwrap();
    let cs: Vec<f64> =
        [[0i64, 0], [8, 0], [16, 16]].iter().map(|k| nikolskii_constant(&g, k, 2.0, 4.0, 50, 1).unwrap()).collect();
    let (lo, hi) = cs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
    (hi / lo <= 1.5, format!("constants {cs:.4?}, spread ×{:.3}", hi / lo))
}

fn orthogonality() -> Outcome {
    let rep = orth_check(2, 2, 3, 10_000, 3, 2024).unwrap();
    let fails = rep.coarse_failures.len() + rep.sharp_failures.len();
    (
        fails == 0,
        format!(
            "{fails} failures over {} tuples ({} beyond the derived radius {}, {} beyond the lattice radius {})",
            rep.tuples, rep.beyond_coarse, rep.coarse_radius, rep.beyond_sharp, rep.sharp_radius
        ),
    )
}

fn dnls1(delta: f64, tol: f64, max_iter: usize) -> SolverConfig {
    let nl = NonlinearitySpec::dnls1(&[C64::new(1.0, 0.0); 2], &[3, 3]).unwrap();
    let mut cfg = SolverConfig::new(nl, delta, NormChoice::X);
    cfg.tol = tol;
    cfg.max_iter = max_iter;
    cfg
}

fn solver_datum(g: &Grid, fam: &unidec::decomp::DecompFamily, delta: f64) -> Field {
    scaled_datum(g, fam, &Support::Ball(2), 2.0, 0, delta, NormChoice::X.datum_s()).unwrap()
}

fn contraction() -> Outcome {
    let g = default_grid();
    let fam = build_family(&g, 6).unwrap();
    let cfg = dnls1(1e-3, 1e-20, 8);
    let (_, d) = picard_solve(&solver_datum(&g, &fam, 1e-3), &cfg, &fam).unwrap();
    let max_ratio = d.ratios.iter().copied().fold(0.0, f64::max);
    let mut ok = !d.ratios.is_empty() && max_ratio < 0.5 && d.residual < 1e-6 && d.iterations <= 8;

    let deltas = [1e-3, 10f64.powf(-2.75), 10f64.powf(-2.5), 10f64.powf(-2.25)];
    let first: Vec<f64> = deltas
        .iter()
        .map(|&delta| {
            let (_, d) = picard_solve(&solver_datum(&g, &fam, delta), &dnls1(delta, 1e-300, 2), &fam).unwrap();
            d.ratios[0]
        })
        .collect();
    let fit = fit_scaling(&deltas, &first).unwrap();
    ok &= (fit.slope - 3.0).abs() <= 0.5;
    (
        ok,
        format!(
            "max ratio {max_ratio:.2e}, residual {:.2e} after {} iterates, δ-scan slope {:.3}",
            d.residual, d.iterations, fit.slope
        ),
    )
}

fn scattering() -> Outcome {
    let g = default_grid();
    let fam = build_family(&g, 6).unwrap();
    let mut cs = Vec::new();
    let mut decreasing = true;
    let mut cauchy = Vec::new();
    for delta in [1e-3, 10f64.powf(-2.5)] {
        let (_, d) = solve_and_scatter(&solver_datum(&g, &fam, delta), &dnls1(delta, 1e-20, 8), &fam).unwrap();
        let s = d.scattering.unwrap();
        cs.push(s.plus_norm.max(s.minus_norm) / delta);
        decreasing &= s.cauchy_plus[0] < s.cauchy_plus[1] && s.cauchy_minus[0] < s.cauchy_minus[1];
        cauchy.push(s.cauchy_plus);
    }
    let spread = cs[0].max(cs[1]) / cs[0].min(cs[1]);
    (
        spread <= 2.0 && decreasing,
        format!(
            "C = {:.4} / {:.4} (×{spread:.3}), Cauchy differences {:.2e} < {:.2e}",
            cs[0], cs[1], cauchy[0][0], cauchy[0][1]
        ),
    )
}

/// Gaussian bumps on random spatial profiles, the same continuum field for
/// every `Nt`.
fn bumps(g: &Grid, seed: u64) -> Field {
    let mut r = rng(seed);
    let terms: Vec<(f64, Vec<C64>)> =
        (0..3).map(|_| (r.gen_range(-1.2..1.2), (0..g.len()).map(|_| complex_normal(&mut r)).collect())).collect();
    let mut f = Field::zeros(g, Kind::SpaceTime);
    for m in 0..g.nt() {
        let t = g.time(m);
        for (c, prof) in &terms {
            let phi = (-(t - c).powi(2) / 0.18).exp();
            f.slice_mut(m).iter_mut().zip(prof).for_each(|(z, a)| *z += phi * a);
        }
    }
    f
}

fn max_a2_ratio(nt: usize) -> f64 {
    let g = make_grid(2, 16, 2, 2.0, nt, &[1, -1]).unwrap();
    let mut r = rng(17);
    let q = Exponents::new(4.0, 2.0, 2.0, 0).unwrap();
    (0..100u64)
        .map(|s| {
            let lf = LevelFunction::new(&bumps(&g, 100 + s), q).unwrap();
            let (a, b): (f64, f64) = (r.gen(), r.gen());
            let (a, b) = (a.min(b), a.max(b).max(a.min(b) + 1e-6));
            lemma_a2_ratio(&lf, a, b).unwrap()
        })
        .fold(0.0, f64::max)
}

fn whitney_suite() -> Outcome {
    let rep = whitney_report(10, &whitney_decompose(10).unwrap());
    let mut ok = rep.all_hold();
    let area = |d| whitney_report(d, &whitney_decompose(d).unwrap()).uncovered_area;
    let mut halving = true;
    for d in 1..=16u32 {
        let (a, b) = (area(d), area(d + 1));
        ok &= a <= (1.0 - d as f64).exp2();
        halving &= d < 2 || (0.5..=0.625).contains(&(b / a));
    }
    ok &= halving;

    let (coarse, fine) = (max_a2_ratio(64), max_a2_ratio(128));
    ok &= coarse <= 4.0 && fine <= 4.0 && (fine / coarse - 1.0).abs() < 0.5;

    let g = make_grid(2, 8, 2, 2.0, 4096, &[1, -1]).unwrap();
    let mut f = bumps(&g, 12);
    let mut r = rng(12 ^ 0x5eed);
    let base: Vec<C64> = (0..g.len()).map(|_| complex_normal(&mut r)).collect();
    for m in 0..g.nt() {
        let w = 0.5 + 0.2 * g.time(m).sin();
        f.slice_mut(m).iter_mut().zip(&base).for_each(|(z, b)| *z += w * b);
    }
    let op = DiscreteKernelOperator::from_fn(&g, |t, s| {
        C64::new((t - s).cos(), 0.5 * (t + s).sin()) * (-(t - s).powi(2)).exp()
    });
    let q = Exponents::new(2.0, 2.0, 2.0, 0).unwrap();
    let target = MixedNormSpec::Anisotropic { axis: 0, p_axis: 4.0, p_rest: 4.0, p_time: 4.0 };
    let d8 = restriction_via_whitney(&op, &f, q, target, 8).unwrap().defect;
    let d12 = restriction_via_whitney(&op, &f, q, target, 12).unwrap().defect;
    ok &= d8 / d12 >= 8.0;
    (
        ok,
        format!(
            "depth 10: {} pairs, partners ≤ {}; A.2 max ratio {coarse:.3} / {fine:.3}; defect ×{:.1} from depth 8 to 12",
            rep.pairs,
            rep.max_partners,
            d8 / d12
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("partition of unity", partition_of_unity),
        ("exact algebra", exact_algebra),
        ("Duhamel order", duhamel_order),
        ("maximal-function scaling", maximal_slope),
        ("sharpness witness", sharpness),
        ("smoothing under refinement", smoothing_refinement),
        ("discrete-derivative scaling", discrete_derivative),
        ("Nikolskii uniformity", nikolskii),
        ("orthogonality", orthogonality),
        ("contraction", contraction),
        ("scattering smallness", scattering),
        ("Whitney suite", whitney_suite),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(o) => o,
            Err(e) => {
                let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                (false, format!("panicked: {}", msg.unwrap_or_default()))
            }
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
