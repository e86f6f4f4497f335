use proptest::prelude::*;

use siet::experiments::fit_slope;
use siet::funcspace::{
    bump_function, lq_norm, sample_regular, GridFunction, RealFunction, SmoothnessClass, DEFAULT_GRID_SIZE,
};
use siet::reconstruct::{local_poly_fit, lower_envelope, spline_fit, spline_interpolate, KernelSpec};

fn class(lambda: u32, k: f64) -> SmoothnessClass {
    SmoothnessClass::new(lambda, k).unwrap()
}

/// A random `k`-Lipschitz function: a walk on the dense grid whose slope
/// changes at a handful of breakpoints.
fn lipschitz_walk(k: f64, offset: f64, slopes: &[f64]) -> GridFunction {
    let n = DEFAULT_GRID_SIZE;
    let h = 1.0 / (n - 1) as f64;
    let mut v = Vec::with_capacity(n);
    let mut y = offset;
    for j in 0..n {
        v.push(y);
        let piece = (j * slopes.len()) / n;
        y += k * slopes[piece] * h;
    }
    GridFunction::new(v).unwrap()
}

#[test]
fn trapezoid_norm_of_identity() {
    let f = GridFunction::from_fn(1001, |x: f64| x).unwrap();
    assert!((lq_norm(&f, 1.0).unwrap() - 0.5).abs() <= 1e-6);
}

#[test]
fn cone_gap_shrinks_like_one_over_m() {
    let cls = class(1, 1.0);
    let beta = GridFunction::from_fn(DEFAULT_GRID_SIZE, |x: f64| 0.08 * (6.0 * x).sin()).unwrap();
    let ms = [9, 17, 33, 65, 129, 257];
    let gaps: Vec<Option<f64>> = ms
        .iter()
        .map(|&m| {
            let env = lower_envelope(&sample_regular(&beta, m, 0.0, 0).unwrap(), &cls).unwrap();
            let gap = env.upper.zip_with(&env.lower, |u, l| u - l).unwrap();
            Some(lq_norm(&gap, f64::INFINITY).unwrap())
        })
        .collect();
    let s = fit_slope(&ms, &gaps).unwrap().slope;
    assert!((s + 1.0).abs() <= 0.1, "slope {s}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn norms_increase_with_q(vals in prop::collection::vec(-3.0f64..3.0, 2..200)) {
        let f = GridFunction::new(vals).unwrap();
        let (a, b, c) = (lq_norm(&f, 1.0).unwrap(), lq_norm(&f, 2.0).unwrap(), lq_norm(&f, f64::INFINITY).unwrap());
        prop_assert!(a <= b + 1e-12 && b <= c + 1e-12, "{a} {b} {c}");
    }

    #[test]
    fn noiseless_interpolants_reproduce_samples(
        m in 4usize..80,
        lambda in 1u32..4,
        amp in 0.05f64..0.33,
        phase in 0.0f64..1.0,
    ) {
        let cls = class(lambda, 1.0);
        let beta = GridFunction::from_fn(DEFAULT_GRID_SIZE, move |x: f64| amp * (3.0 * x + phase).cos()).unwrap();
        let s = sample_regular(&beta, m, 0.0, 0).unwrap();
        // Exact evaluation: the dense-grid copies interpolate linearly
        // between nodes, and the samples need not sit on nodes.
        let sp = spline_fit(&s, &cls).unwrap();
        for (x, t) in s.xs().iter().zip(s.values()) {
            prop_assert!((sp.eval(*x) - t).abs() <= 1e-10);
        }
        let env = lower_envelope(&s, &cls).unwrap();
        if env.exact {
            for (x, t) in s.xs().iter().zip(s.values()) {
                prop_assert!((env.lower_exact().eval(*x) - t).abs() <= 1e-12);
                prop_assert!((env.upper_exact().eval(*x) - t).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn bumps_are_nonnegative(m in 2usize..300, lambda in 1u32..4, scale in 0.05f64..1.0) {
        let (f, _) = bump_function(m, &class(lambda, 1.0), scale).unwrap();
        prop_assert!(f.min() >= -1e-12);
    }

    #[test]
    fn sampling_is_deterministic(m in 2usize..500, sigma in 0.0f64..1.0, seed in any::<u64>()) {
        let f = GridFunction::from_fn(DEFAULT_GRID_SIZE, |x: f64| x * x).unwrap();
        let a = sample_regular(&f, m, sigma, seed).unwrap();
        let b = sample_regular(&f, m, sigma, seed).unwrap();
        prop_assert_eq!(a.values(), b.values());
        prop_assert_eq!(a.to_csv(), b.to_csv());
    }

    /// Any member of the class sharing the samples lies between the cones.
    #[test]
    fn lipschitz_members_lie_inside_the_envelope(
        m in 2usize..70,
        k in 0.2f64..3.0,
        offset in -1.0f64..1.0,
        slopes in prop::collection::vec(-1.0f64..1.0, 1..12),
    ) {
        let g = lipschitz_walk(k, offset, &slopes);
        let env = lower_envelope(&sample_regular(&g, m, 0.0, 0).unwrap(), &class(1, k)).unwrap();
        for (j, &v) in g.values().iter().enumerate() {
            prop_assert!(env.lower.values()[j] <= v + 1e-12);
            prop_assert!(v <= env.upper.values()[j] + 1e-12);
        }
    }

    /// The cones against a direct evaluation over every sample.
    #[test]
    fn cones_match_brute_force(m in 2usize..40, vals in prop::collection::vec(-0.5f64..0.5, 40)) {
        let k = 1.0;
        let cls = class(1, k);
        let xs: Vec<f64> = (0..m).map(|i| i as f64 / (m - 1) as f64).collect();
        // Knot values of a 1-Lipschitz broken line so the samples are admissible.
        let mut ts = vec![0.0; m];
        for i in 1..m {
            ts[i] = ts[i - 1] + vals[i % vals.len()] * (xs[i] - xs[i - 1]);
        }
        let g = GridFunction::from_fn(DEFAULT_GRID_SIZE, |x: f64| {
            let i = ((x * (m - 1) as f64).floor() as usize).min(m - 2);
            let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
            ts[i] + t * (ts[i + 1] - ts[i])
        }).unwrap();
        let s = sample_regular(&g, m, 0.0, 0).unwrap();
        let env = lower_envelope(&s, &cls).unwrap();
        let ts = s.values();
        for (j, x) in env.lower.nodes().enumerate() {
            let lo = xs.iter().zip(ts).map(|(xi, t)| t - k * (x - xi).abs()).fold(f64::NEG_INFINITY, f64::max);
            let hi = xs.iter().zip(ts).map(|(xi, t)| t + k * (x - xi).abs()).fold(f64::INFINITY, f64::min);
            prop_assert!((env.lower.values()[j] - lo).abs() <= 1e-9);
            prop_assert!((env.upper.values()[j] - hi).abs() <= 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Reflecting the samples reflects every reconstruction.
    #[test]
    fn reconstructions_commute_with_reflection(
        m in 8usize..60,
        lambda in 1u32..4,
        phase in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let cls = class(lambda, 1.0);
        let beta = GridFunction::from_fn(DEFAULT_GRID_SIZE, move |x: f64| 0.1 * (5.0 * x + phase).sin() + 0.05 * x).unwrap();
        let s = sample_regular(&beta, m, 0.0, 0).unwrap();
        let close = |a: &GridFunction, b: &GridFunction| {
            a.reflect().values().iter().zip(b.values()).all(|(x, y)| (x - y).abs() <= 1e-9)
        };
        prop_assert!(close(&spline_interpolate(&s, &cls).unwrap(), &spline_interpolate(&s.reflect(), &cls).unwrap()));
        let (e, er) = (lower_envelope(&s, &cls).unwrap(), lower_envelope(&s.reflect(), &cls).unwrap());
        prop_assert!(close(&e.lower, &er.lower) && close(&e.upper, &er.upper));
        if m >= 2 * (lambda as usize + 1) {
            let noisy = sample_regular(&beta, m, 0.05, seed).unwrap();
            let kern = KernelSpec::default();
            prop_assert!(close(
                &local_poly_fit(&noisy, &cls, &kern).unwrap(),
                &local_poly_fit(&noisy.reflect(), &cls, &kern).unwrap(),
            ));
        }
    }
}
