use freejump::algebra::{k_inverse, k_transform, lp_integral, norm_l1, pairing};
use freejump::configuration::FiniteConfiguration;
use freejump::family::Family;
use freejump::grid::{GridSpec, Window};
use freejump::io::{family_from_json, family_to_json, FamilyRecord};
use freejump::moment::{
    correlation_from_density, density_from_correlation, MomentCertificate, SubsetFunction, WindowDensity,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn window(m: usize, h: f64) -> Window {
    let grid = GridSpec::new(1, m.max(2), h).unwrap();
    Window::new(grid, (0..m).collect()).unwrap()
}

fn random_density(rng: &mut ChaCha8Rng, w: Window) -> WindowDensity {
    let raw: Vec<f64> = (0..1usize << w.len()).map(|_| rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    WindowDensity::new(w, raw.iter().map(|x| x / total).collect()).unwrap()
}

fn config_of(w: &Window, mask: usize) -> FiniteConfiguration {
    let sites = w.sites();
    FiniteConfiguration::new((0..sites.len()).filter(|i| mask >> i & 1 == 1).map(|i| sites[i]).collect()).unwrap()
}

/// `G(eta)` from a subset table, as a family with zero diagonal.
fn family_from_subsets(w: &Window, order: usize, values: &[f64]) -> Family {
    Family::from_fn(w.clone(), order, |_, tuple| {
        let mut mask = 0usize;
        for &i in tuple {
            if mask >> i & 1 == 1 {
                return 0.0;
            }
            mask |= 1 << i;
        }
        values[mask]
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn norm_l1_decreases_in_theta(seed in any::<u64>(), t1 in -2.0f64..2.0, t2 in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = GridSpec::new(1, 5, 0.6).unwrap();
        let v = Family::random_symmetric(Window::full(grid), 3, -1.0, 1.0, false, &mut rng).unwrap();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(norm_l1(&v, hi) <= norm_l1(&v, lo) * (1.0 + 1e-15));
    }

    #[test]
    fn norm_l1_additive_on_nonnegative(seed in any::<u64>(), theta in -1.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = GridSpec::new(2, 3, 0.5).unwrap();
        let u = Family::random_symmetric(Window::full(grid), 3, 0.0, 1.0, false, &mut rng).unwrap();
        let v = Family::random_symmetric(Window::full(grid), 3, 0.0, 2.0, false, &mut rng).unwrap();
        let mut sum = u.clone();
        sum.add_scaled(1.0, &v).unwrap();
        let lhs = norm_l1(&sum, theta);
        let rhs = norm_l1(&u, theta) + norm_l1(&v, theta);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
    }

    #[test]
    fn k_inverse_undoes_k_transform(seed in any::<u64>(), mask in 0usize..64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Window::new(GridSpec::new(1, 10, 1.0).unwrap(), vec![1, 2, 4, 6, 7, 9]).unwrap();
        let g = Family::random_symmetric(w.clone(), 3, -1.0, 1.0, false, &mut rng).unwrap();
        let eta = config_of(&w, mask);
        prop_assume!(eta.len() <= 5);
        let back = k_inverse(&eta, |xi| k_transform(&g, xi).ok()).unwrap();
        let want = if eta.len() <= 3 { g.value_at_sites(eta.points()) } else { 0.0 };
        prop_assert!((back - want).abs() <= 1e-12);
    }

    #[test]
    fn pairing_equals_expectation_of_k_transform(seed in any::<u64>(), m in 1usize..=8, h in 0.3f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = window(m, h);
        let mu = random_density(&mut rng, w.clone());
        let order = m.min(4);
        let k = correlation_from_density(&mu, order).unwrap();
        let g = Family::random_symmetric(w.clone(), order, -1.0, 1.0, true, &mut rng).unwrap();
        let lhs = pairing(&g, &k).unwrap();
        let rhs: f64 = mu
            .weights()
            .iter()
            .enumerate()
            .map(|(mask, p)| p * k_transform(&g, &config_of(&w, mask)).unwrap())
            .sum();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn pairing_nonnegative_on_positive_cone(seed in any::<u64>(), m in 1usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = window(m, 1.0);
        // G = K^{-1} F with F >= 0, so K G >= 0 on the window.
        let f: Vec<f64> = (0..1usize << m).map(|_| rng.random::<f64>()).collect();
        let mut g_sub = f.clone();
        for mask in 0..1usize << m {
            g_sub[mask] = (0..1usize << m)
                .filter(|xi| xi & !mask == 0)
                .map(|xi| if (mask ^ xi).count_ones() % 2 == 0 { f[xi] } else { -f[xi] })
                .sum();
        }
        let g = family_from_subsets(&w, m, &g_sub);
        for mask in 0..1usize << m {
            prop_assert!(k_transform(&g, &config_of(&w, mask)).unwrap() >= -1e-12);
        }
        let mu = random_density(&mut rng, w.clone());
        let k = correlation_from_density(&mu, m).unwrap();
        prop_assert!(pairing(&g, &k).unwrap() >= -1e-12);
    }

    #[test]
    fn density_correlation_round_trip(seed in any::<u64>(), m in 0usize..=10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = random_density(&mut rng, window(m, 1.0));
        match density_from_correlation(&mu.correlation_subsets()).unwrap() {
            MomentCertificate::Certified(back) => {
                for (a, b) in back.weights().iter().zip(mu.weights()) {
                    prop_assert!((a - b).abs() <= 1e-12);
                }
                prop_assert!((back.total_mass() - 1.0).abs() <= 1e-12);
            }
            MomentCertificate::Rejected(r) => prop_assert!(false, "rejected: {:?}", r.violations),
        }
    }

    /// `int (sum_{xi in eta} f(xi)) g(eta) = int int f(xi) g(eta u xi)` over a window.
    #[test]
    fn convolution_identity_of_lebesgue_poisson_measure(seed in any::<u64>(), m in 1usize..=6, h in 0.2f64..1.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = window(m, h);
        let subsets = 1usize << m;
        let f: Vec<f64> = (0..subsets).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..subsets).map(|_| rng.random_range(-1.0..1.0)).collect();
        let weight = |mask: usize| h.powi(mask.count_ones() as i32);

        let ff = family_from_subsets(&w, m, &f);
        let mut lhs_values = vec![0.0; subsets];
        for (mask, slot) in lhs_values.iter_mut().enumerate() {
            *slot = k_transform(&ff, &config_of(&w, mask)).unwrap() * g[mask];
        }
        let lhs = lp_integral(&family_from_subsets(&w, m, &lhs_values), 0.0).unwrap();

        let mut rhs = 0.0;
        for xi in 0..subsets {
            for eta in 0..subsets {
                if xi & eta == 0 {
                    rhs += weight(xi) * weight(eta) * f[xi] * g[xi | eta];
                }
            }
        }
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
    }

    #[test]
    fn family_json_round_trip_is_lossless(seed in any::<u64>(), bits in prop::collection::vec(any::<u64>(), 16)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = GridSpec::new(2, 2, 0.3).unwrap();
        let mut f = Family::random_symmetric(Window::full(grid), 2, -1e6, 1e6, false, &mut rng).unwrap();
        // Arbitrary finite bit patterns, including subnormals.
        for (v, b) in f.component_mut(2).iter_mut().zip(bits) {
            let x = f64::from_bits(b);
            *v = if x.is_finite() { x } else { 0.0 };
        }
        let text = family_to_json(&f).unwrap();
        let back = family_from_json(&text).unwrap();
        for n in 0..=2 {
            let same = back.component(n).iter().zip(f.component(n)).all(|(a, b)| a.to_bits() == b.to_bits());
            prop_assert!(same);
        }
        let record: FamilyRecord = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(record.window, vec![0, 1, 2, 3]);
    }
}

#[test]
fn certified_weights_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for m in [3, 7, 12] {
        let k = SubsetFunction::from_fn(window(m, 1.0), |eta| 0.3f64.powi(eta.len() as i32)).unwrap();
        let MomentCertificate::Certified(mu) = density_from_correlation(&k).unwrap() else {
            panic!("product family rejected");
        };
        assert!((mu.total_mass() - 1.0).abs() < 1e-12);
        let idx = rng.random_range(0..1usize << m);
        let want = 0.3f64.powi(idx.count_ones() as i32) * 0.7f64.powi((m - idx.count_ones() as usize) as i32);
        assert!((mu.weights()[idx] - want).abs() < 1e-12);
    }
}
