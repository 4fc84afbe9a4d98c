//! The acceptance gate: twelve property-based criteria run at desk scale,
//! one test each, with a single PASS line per criterion on success. Oracles
//! are exact counts, closed forms, or self-convergence — never recorded
//! outputs of the code under test.

use gp_lab::counterexample::{ratio_experiment, BumpZeta};
use gp_lab::density::{
    collision, duhamel_residual, hk_alpha_norm, rescale_density, required_time_samples,
    spacetime_norm, CollisionSign, DuhamelVariant, FourierDensityMatrix, Lattice,
    RescaleDirection,
};
use gp_lab::expsum::{divisor_count, l4_plancherel, lp_time_norm, required_samples, ExpSumSpec};
use gp_lab::fit::fit_line;
use gp_lab::multiplier::{dyadic_bound_report, endpoint_slice_sum};
use gp_lab::nls::{self, SpectralField};
use gp_lab::torus::{jp_bracket, q_bilinear, q_form, QuadraticForm};
use gp_lab::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PI: f64 = std::f64::consts::PI;

fn stretched2() -> QuadraticForm {
    QuadraticForm::new(&[1.0, std::f64::consts::SQRT_2]).unwrap()
}

fn stretched3() -> QuadraticForm {
    QuadraticForm::new(&[1.0, std::f64::consts::SQRT_2, 3.0f64.sqrt()]).unwrap()
}

/// Random sparse Hermitian order-2 matrix with entries in the cutoff box.
fn random_hermitian(rng: &mut ChaCha8Rng, d: usize, cutoff: i64, pairs: usize) -> FourierDensityMatrix {
    let mut entries = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let key: Vec<i64> = (0..4 * d).map(|_| rng.gen_range(-cutoff..=cutoff)).collect();
        let amp = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        entries.push((key, amp));
    }
    let g = FourierDensityMatrix::from_entries(2, d, cutoff, Lattice::Classical, entries).unwrap();
    let herm = g
        .add_scaled(&g.adjoint(), Complex64::new(1.0, 0.0))
        .unwrap()
        .scale(Complex64::new(0.5, 0.0));
    herm
}

#[test]
fn criterion_01_l4_quadrature_equals_divisor_oracle() {
    let full = (0.0, 2.0 * PI);
    let mut worst = 0.0f64;
    for &b in &[0i64, -7, 1_000_000] {
        for n in 1..=64u64 {
            let spec = ExpSumSpec::new(b, n, 1.0, full).unwrap();
            let s = required_samples(&spec, 4.0).unwrap();
            let quad = lp_time_norm(&spec, 4.0, s).unwrap();
            let exact = l4_plancherel(b, n).unwrap();
            let rel = (quad - exact).abs() / exact;
            assert!(rel <= 1e-6, "b={b} N={n}: rel err {rel:.3e}");
            worst = worst.max(rel);
        }
    }
    println!("acceptance 01 L4 quadrature vs divisor oracle: PASS — max rel err {worst:.3e}");
}

#[test]
fn criterion_02_growth_exponents() {
    let full = (0.0, 2.0 * PI);
    let ns = [16u64, 32, 64, 128, 256];
    let slope_for = |p: f64| -> f64 {
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for &n in &ns {
            let spec = ExpSumSpec::new(0, n, 1.0, full).unwrap();
            let s = required_samples(&spec, p).unwrap();
            ys.push(lp_time_norm(&spec, p, s).unwrap().ln());
            xs.push((n as f64).ln());
        }
        fit_line(&xs, &ys).slope
    };
    let s4 = slope_for(4.0);
    assert!(s4 > 1.5 && s4 <= 2.2, "L4 slope {s4}");
    let s6 = slope_for(6.0);
    assert!(s6 <= 4.2, "L6 slope {s6}");
    println!("acceptance 02 growth exponents: PASS — L4 slope {s4:.3}, L6 slope {s6:.3}");
}

#[test]
fn criterion_03_divisor_uniqueness() {
    for &n in &[8u64, 16] {
        let b = (10 * n * n + 1) as i64;
        let mut max_count = 0;
        for m1 in b..b + n as i64 {
            for m2 in b..b + n as i64 {
                if m1 == m2 {
                    continue;
                }
                let l = m1 * m1 - m2 * m2;
                let c = divisor_count(l, b, n);
                max_count = max_count.max(c);
            }
        }
        assert_eq!(max_count, 1, "N={n}");
    }
    println!("acceptance 03 divisor uniqueness at far offsets: PASS — max multiplicity 1");
}

#[test]
fn criterion_04_dyadic_counting_bound() {
    let form = stretched2();
    let mut rng = ChaCha8Rng::seed_from_u64(0xD1AD);
    let eps = 0.5;
    let mut max4 = 0.0f64;
    let mut max6 = 0.0f64;
    for sample in 0..20 {
        // The extremal configurations pair one big shell with two small
        // ones and need |p| ~ 2^{j_max}. Four deterministic axis-aligned
        // anchors place that configuration inside cap 4 (|p| = 12) and at
        // cap 6 (|p| = 48); for axis-aligned p the surviving small-shell
        // windows around p do not depend on |p|, so the anchor pairs carry
        // identical extremal counts and the max is genuinely stable. The
        // other sixteen samples are stratified in |p| with window-aligned
        // or fully random τ.
        let (p, tau): (Vec<i64>, f64) = if sample < 8 {
            let p = match sample % 4 {
                0 => vec![12, 0],
                1 => vec![48, 0],
                2 => vec![0, 12],
                _ => vec![0, 48],
            };
            let axis = if sample % 4 < 2 { 0 } else { 1 };
            let q = q_form(&form, &p).unwrap();
            // First alignment: pairs with 2Q(n,m) = 0 (n = p, m ⊥ p).
            // Second: both m and n one ring off p, 2Q(n,m) = 2Q(p) − 2θ².
            let tau = if sample < 4 {
                -q + 0.4
            } else {
                q - 2.0 * form.theta_sq()[axis] + 0.4
            };
            (p, tau)
        } else {
            let target = [10.0, 14.0, 20.0, 28.0, 40.0, 56.0][sample % 6];
            let p: Vec<i64> = loop {
                let cand: Vec<i64> = (0..2).map(|_| rng.gen_range(-64i64..=64)).collect();
                let norm = (cand.iter().map(|&x| x * x).sum::<i64>() as f64).sqrt();
                if norm <= 64.0 && norm >= 0.8 * target && norm <= 1.2 * target {
                    break cand;
                }
            };
            let tau = if sample % 5 < 4 {
                let m_star: Vec<i64> = (0..2).map(|_| rng.gen_range(-3i64..=3)).collect();
                -q_form(&form, &p).unwrap()
                    + 2.0 * q_bilinear(&form, &p, &m_star).unwrap()
                    + rng.gen_range(0.0..0.8)
            } else {
                rng.gen_range(-40.0..40.0)
            };
            (p, tau)
        };
        for (cap, best) in [(4u32, &mut max4), (6u32, &mut max6)] {
            let report = dyadic_bound_report(tau, &p, &form, cap, eps).unwrap();
            for rec in &report {
                if rec.count > 0 {
                    assert!(rec.ratio.is_finite());
                    *best = best.max(rec.ratio);
                }
            }
        }
    }
    assert!(max4 > 0.0, "no populated triple at cap 4");
    // Records at cap 4 are a subset of those at cap 6, so the max can only
    // grow; stability means it does not grow past a factor 2.
    assert!(max6 >= max4 && max6 <= 2.0 * max4, "max4={max4} max6={max6}");
    println!(
        "acceptance 04 dyadic counting bound: PASS — max ratio {max4:.3} (cap 4) → {max6:.3} (cap 6)"
    );
}

#[test]
fn criterion_05_form_equivalence() {
    // Summand-level equality of the two multiplier representations under
    // (m, n) ↦ (m+n, p−n): windows agree algebraically and the bracket
    // arguments coincide as integer vectors.
    let forms = [stretched2(), QuadraticForm::new(&[2.0, 3.0]).unwrap()];
    let mut rng = ChaCha8Rng::seed_from_u64(0x0F0E);
    for trial in 0..1000 {
        let form = &forms[trial % 2];
        let tau: f64 = rng.gen_range(-30.0..30.0);
        let alpha: f64 = rng.gen_range(0.3..1.5);
        let draw = |rng: &mut ChaCha8Rng| -> Vec<i64> {
            (0..2).map(|_| rng.gen_range(-20i64..=20)).collect()
        };
        let (p, m, n) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
        let pnm: Vec<i64> = (0..2).map(|a| p[a] - n[a] - m[a]).collect();
        let w_orig = tau + q_form(form, &pnm).unwrap() + q_form(form, &n).unwrap()
            - q_form(form, &m).unwrap();
        let weight_orig = jp_bracket(&p).powf(2.0 * alpha)
            / (jp_bracket(&pnm).powf(2.0 * alpha)
                * jp_bracket(&n).powf(2.0 * alpha)
                * jp_bracket(&m).powf(2.0 * alpha));
        // Change of variables.
        let mm: Vec<i64> = (0..2).map(|a| m[a] + n[a]).collect();
        let nn: Vec<i64> = (0..2).map(|a| p[a] - n[a]).collect();
        let mut q2 = 0.0;
        for a in 0..2 {
            q2 += form.theta_sq()[a] * (nn[a] * mm[a]) as f64;
        }
        let w_pol = tau + q_form(form, &p).unwrap() - 2.0 * q2;
        let mmp: Vec<i64> = (0..2).map(|a| mm[a] - p[a]).collect();
        let nnp: Vec<i64> = (0..2).map(|a| nn[a] - p[a]).collect();
        let pnm2: Vec<i64> = (0..2).map(|a| p[a] - nn[a] - mm[a]).collect();
        // The three denominators are the originals up to sign.
        assert_eq!(mmp, pnm.iter().map(|x| -x).collect::<Vec<_>>());
        assert_eq!(nnp, n.iter().map(|x| -x).collect::<Vec<_>>());
        assert_eq!(pnm2, m.iter().map(|x| -x).collect::<Vec<_>>());
        let weight_pol = jp_bracket(&p).powf(2.0 * alpha)
            / (jp_bracket(&mmp).powf(2.0 * alpha)
                * jp_bracket(&nnp).powf(2.0 * alpha)
                * jp_bracket(&pnm2).powf(2.0 * alpha));
        let scale = 1.0
            + tau.abs()
            + q_form(form, &p).unwrap().abs()
            + q_form(form, &m).unwrap().abs()
            + q_form(form, &n).unwrap().abs();
        assert!(
            (w_orig - w_pol).abs() <= 1e-12 * scale,
            "windows differ: {w_orig} vs {w_pol}"
        );
        let wrel = (weight_orig - weight_pol).abs() / weight_orig.abs();
        assert!(wrel <= 1e-12, "weights differ by {wrel:.3e}");
    }
    println!("acceptance 05 form equivalence: PASS — 1000 tuples, windows and weights ≤ 1e-12");
}

#[test]
fn criterion_06_endpoint_divergence() {
    let mut report = String::new();
    for (form, d, e_max) in [(stretched2(), 2usize, 14u32), (stretched3(), 3, 9)] {
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for e in 4..=e_max {
            let kappa = 1i64 << e;
            let m = kappa * kappa;
            let v = endpoint_slice_sum(kappa, &form, m, d).unwrap();
            xs.push((kappa as f64).ln());
            ys.push(v);
        }
        let fit = fit_line(&xs, &ys);
        assert!(fit.slope > 0.0, "{d}D slope {}", fit.slope);
        assert!(fit.r_squared >= 0.99, "{d}D R² {}", fit.r_squared);
        report.push_str(&format!(
            "{d}D slope {:.3} R² {:.5}; ",
            fit.slope, fit.r_squared
        ));
    }
    println!("acceptance 06 endpoint divergence vs ln κ: PASS — {report}");
}

#[test]
fn criterion_07_sharpness_ratio() {
    let mut report = String::new();
    for (form, d, alpha, e_max) in [(stretched2(), 2usize, 0.5, 12u32), (stretched3(), 3, 1.0, 9)]
    {
        let kappas: Vec<i64> = (4..=e_max).map(|e| 1i64 << e).collect();
        let out = ratio_experiment(&kappas, alpha, 0.05, &form, d).unwrap();
        assert!(out.fit.slope > 0.0, "{d}D slope {}", out.fit.slope);
        assert!(out.fit.r_squared >= 0.95, "{d}D R² {}", out.fit.r_squared);
        let bm: Vec<f64> = out.rows.iter().map(|r| r.b_minus_part).collect();
        let (lo, hi) = bm
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        assert!(hi / lo - 1.0 < 0.10, "{d}D B⁻ spread {lo}..{hi}");
        report.push_str(&format!(
            "{d}D slope {:.4} R² {:.4} B⁻ spread {:.2e}; ",
            out.fit.slope,
            out.fit.r_squared,
            hi / lo - 1.0
        ));
    }
    println!("acceptance 07 sharpness ratio √(ln κ): PASS — {report}");
}

#[test]
fn criterion_08_boundedness_witness() {
    let t_end = 0.05;
    let mut report = String::new();
    for (form, d, alpha, cutoff, seed) in [
        (stretched2(), 2usize, 0.6, 256i64, 0xB0B0u64),
        (stretched3(), 3, 1.1, 32, 0xB0B1),
    ] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ratios = Vec::with_capacity(100);
        for _ in 0..100 {
            let g = random_hermitian(&mut rng, d, cutoff, 20);
            let data = hk_alpha_norm(&g, alpha);
            assert!(data > 0.0);
            let g = g.scale(Complex64::new(1.0 / data, 0.0));
            let samples = required_time_samples(&g, 1, &form, t_end).unwrap();
            let st = spacetime_norm(&g, 1, alpha, &form, t_end, samples).unwrap();
            ratios.push(st / hk_alpha_norm(&g, alpha));
        }
        let mut sorted = ratios.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = 0.5 * (sorted[49] + sorted[50]);
        let max = sorted[99];
        assert!(max <= 10.0 * median, "{d}D max {max} median {median}");
        report.push_str(&format!("{d}D max/median {:.2}; ", max / median));
    }
    println!("acceptance 08 spacetime boundedness witness: PASS — {report}");
}

#[test]
fn criterion_09_nls_plane_wave() {
    let form = stretched2();
    let (xi, a, b0) = (vec![3i64, -2], 0.7, 1.0);
    let field = SpectralField::from_modes(&form, 64, b0, &[(xi.clone(), Complex64::new(a, 0.0))])
        .unwrap();
    let traj = nls::evolve(&field, 1.0, 1e-3, 100).unwrap();
    let m0 = nls::mass(&field);
    for (_, state) in &traj {
        assert!((nls::mass(state) - m0).abs() <= 1e-10);
    }
    let (t, last) = traj.last().unwrap();
    let rate = q_form(&form, &xi).unwrap() + b0 * a * a;
    let exact = a * Complex64::new(0.0, -rate * t).exp();
    let mut err = (last.coeff(&xi) - exact).norm_sqr();
    for (key, amp) in last.modes() {
        if key != xi {
            err += amp.norm_sqr();
        }
    }
    let err = err.sqrt();
    assert!(err <= 1e-5, "plane-wave terminal error {err:.3e}");
    // Order on genuinely multi-mode data (the scheme is exact on one mode).
    let multi = SpectralField::from_modes(
        &form,
        64,
        b0,
        &[
            (vec![1, 0], Complex64::new(0.35, 0.0)),
            (vec![-2, 1], Complex64::new(0.0, 0.2)),
            (vec![0, -1], Complex64::new(0.15, -0.1)),
        ],
    )
    .unwrap();
    let terminal = |dt: f64| -> SpectralField {
        nls::evolve(&multi, 0.5, dt, usize::MAX).unwrap().pop().unwrap().1
    };
    let u1 = terminal(4e-3);
    let u2 = terminal(2e-3);
    let u4 = terminal(1e-3);
    let e1 = u1.l2_distance(&u2).unwrap();
    let e2 = u2.l2_distance(&u4).unwrap();
    let order = (e1 / e2).log2();
    assert!((1.8..=2.2).contains(&order), "observed order {order}");
    println!(
        "acceptance 09 NLS plane wave: PASS — terminal err {err:.2e}, order {order:.3}"
    );
}

#[test]
fn criterion_10_hierarchy_residual() {
    let form = stretched2();
    let modes = [
        (vec![1i64, 0], Complex64::new(0.45, 0.0)),
        (vec![0i64, 1], Complex64::new(0.0, 0.3)),
    ];
    let t_end = 0.12;
    let residual_at = |b0: f64, dt: f64, variant: DuhamelVariant| -> f64 {
        let field = SpectralField::from_modes(&form, 32, b0, &modes).unwrap();
        let traj = nls::factorized_trajectory(&field, t_end, dt, 2, 2).unwrap();
        duhamel_residual(&traj, b0, &form, 0.6, 0.5, variant).unwrap()
    };
    let coarse = residual_at(1.0, 6e-3, DuhamelVariant::Retarded);
    let fine = residual_at(1.0, 3e-3, DuhamelVariant::Retarded);
    let order = (coarse / fine).log2();
    assert!(coarse > 0.0 && fine > 0.0);
    assert!((1.8..=2.2).contains(&order), "observed order {order}");
    for variant in [DuhamelVariant::Retarded, DuhamelVariant::Verbatim] {
        let lin = residual_at(0.0, 6e-3, variant);
        assert!(lin <= 1e-10, "b0 = 0 residual {lin:.3e}");
    }
    println!(
        "acceptance 10 hierarchy residual: PASS — order {order:.3}, linear residual ≤ 1e-10"
    );
}

#[test]
fn criterion_11_rescaling_correspondence() {
    let forms = [QuadraticForm::new(&[2.0, 3.0]).unwrap(), stretched2()];
    let mut rng = ChaCha8Rng::seed_from_u64(0x5CA1E);
    for form in &forms {
        let lambda: f64 = form.thetas().iter().product::<f64>().powi(-2);
        for _ in 0..100 {
            let g = random_hermitian(&mut rng, 2, 16, 12);
            // Coefficientwise commutation with the exact amplitude factor.
            let lhs = collision(
                &rescale_density(&g, form, RescaleDirection::ToGeneral).unwrap(),
                1,
                CollisionSign::Full,
            )
            .unwrap();
            let rhs = rescale_density(&collision(&g, 1, CollisionSign::Full).unwrap(), form, RescaleDirection::ToGeneral)
                .unwrap()
                .scale(Complex64::new(lambda, 0.0));
            assert!(lhs.max_abs_diff(&rhs) < 1e-12);
            // Round trip restores the classical-lattice matrix.
            let back = rescale_density(
                &rescale_density(&g, form, RescaleDirection::ToGeneral).unwrap(),
                form,
                RescaleDirection::ToClassical,
            )
            .unwrap();
            assert!(back.max_abs_diff(&g) < 1e-12);
        }
    }
    println!("acceptance 11 rescaling correspondence: PASS — 2×100 matrices ≤ 1e-12");
}

#[test]
fn criterion_12_appendix_bump() {
    let delta = 0.05;
    let zeta = BumpZeta::new(delta).unwrap();
    // Support is exactly [−δ, δ].
    assert!(zeta.eval(0.0) > 0.0);
    assert!(zeta.eval(0.9 * delta) > 0.0);
    for &t in &[delta + 1e-12, 1.5 * delta, 2.0 * delta, 10.0] {
        assert_eq!(zeta.eval(t), 0.0);
        assert_eq!(zeta.eval(-t), 0.0);
    }
    // Transform: nonnegative everywhere sampled, ≥ 1 on [−1, 1].
    let mut min_wide = f64::INFINITY;
    for i in 0..=2000 {
        let xi = -50.0 + 100.0 * i as f64 / 2000.0;
        min_wide = min_wide.min(zeta.hat(xi));
    }
    assert!(min_wide >= -1e-9, "min ζ̂ = {min_wide:.3e}");
    let mut min_core = f64::INFINITY;
    for i in 0..=200 {
        let xi = -1.0 + 2.0 * i as f64 / 200.0;
        min_core = min_core.min(zeta.hat(xi));
    }
    assert!(min_core >= 1.0, "min ζ̂ on [−1,1] = {min_core}");
    println!(
        "acceptance 12 appendix bump: PASS — supp = [−δ,δ], min ζ̂ {min_wide:.1e}, core min {min_core:.3}"
    );
}
