use evorl_core::rng;
use evorl_core::stats::*;
use proptest::prelude::*;

fn normal_sample(seed: u64, n: usize, shift: f64) -> Vec<f64> {
    let mut r = rng::stream(&[seed]);
    (0..n).map(|_| shift + rng::gaussian(&mut r)).collect()
}

#[test]
fn one_two_three_against_four_five_six() {
    let t = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
    assert_eq!(t.u, 0.0);
    assert!(t.exact);
    // Both extreme splits out of C(6, 3) = 20 arrangements.
    assert!((t.p_value - 2.0 / 20.0).abs() < 1e-12);
}

#[test]
fn null_p_values_are_uniform() {
    let trials = 1000;
    let mut p: Vec<f64> = (0..trials as u64)
        .map(|t| {
            let a = normal_sample(rng::derive(&[t, 1]), 30, 0.0);
            let b = normal_sample(rng::derive(&[t, 2]), 30, 0.0);
            wilcoxon_rank_sum(&a, &b).unwrap().p_value
        })
        .collect();
    p.sort_by(f64::total_cmp);
    // Kolmogorov-Smirnov distance to U(0, 1).
    let d = p
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let (lo, hi) = (i as f64 / trials as f64, (i + 1) as f64 / trials as f64);
            (x - lo).abs().max((hi - x).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value for n = 1000 is 1.63 / √1000.
    let critical = 1.63 / (trials as f64).sqrt();
    assert!(d < critical, "KS distance {d} over {critical}");
}

#[test]
fn shifted_samples_are_detected() {
    let a = normal_sample(11, 30, 0.0);
    let b = normal_sample(12, 30, 1.5);
    assert!(wilcoxon_rank_sum(&a, &b).unwrap().p_value < 1e-4);
}

#[test]
fn bootstrap_width_matches_the_normal_formula() {
    let seeds = 40;
    let mean_width: f64 = (0..seeds)
        .map(|s| {
            let x = normal_sample(100 + s, 100, 0.0);
            let mut r = rng::stream(&[s, 7]);
            let (lo, hi) = bootstrap_ci(&x, 0.90, 2000, &mut r).unwrap();
            hi - lo
        })
        .sum::<f64>()
        / seeds as f64;
    let expect = 2.0 * 1.645 / 10.0;
    assert!(
        (mean_width / expect - 1.0).abs() < 0.2,
        "{mean_width} vs {expect}"
    );
}

#[test]
fn bootstrap_is_deterministic_in_its_rng() {
    let x = normal_sample(5, 50, 2.0);
    let a = bootstrap_ci(&x, 0.9, 500, &mut rng::stream(&[9])).unwrap();
    let b = bootstrap_ci(&x, 0.9, 500, &mut rng::stream(&[9])).unwrap();
    assert_eq!(a, b);
    let c = bootstrap_ci(&[3.5; 8], 0.9, 500, &mut rng::stream(&[9])).unwrap();
    assert_eq!(c, (3.5, 3.5));
    assert!(bootstrap_ci(&[], 0.9, 10, &mut rng::stream(&[9])).is_err());
}

#[test]
fn compare_examples() {
    let same = [1.0, 4.0, 2.0, 8.0];
    let c = compare(&same, &same).unwrap();
    assert_eq!(c.a, c.b);
    assert_eq!(c.test.p_value, 1.0);

    let one_to_nine: Vec<f64> = (1..=9).map(f64::from).collect();
    let b = BoxStats::new(&one_to_nine).unwrap();
    assert_eq!((b.q1, b.median, b.q3), (3.0, 5.0, 7.0));

    let c = compare(&[2.0], &[5.0]).unwrap();
    for s in [c.a, c.b] {
        assert_eq!(s.min, s.max);
        assert_eq!(s.q1, s.q3);
        assert_eq!(s.whisker_low, s.whisker_high);
    }
    // Two splits of two values, both as extreme as the observed one.
    assert!(c.test.exact);
    assert_eq!(c.test.p_value, 1.0);
}

#[test]
fn heatmap_two_cell_mix() {
    let mut h = Heatmap::new(2, 1, [0.0, 0.0], [1.0, 1.0]).unwrap();
    for _ in 0..3 {
        h.add([0.25, 0.5]);
    }
    h.add([0.75, 0.5]);
    let expect = -(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
    assert!((h.entropy() - expect).abs() < 1e-12);
    assert!((h.entropy() - 0.5623).abs() < 1e-4);
}

proptest! {
    #[test]
    fn heatmap_occupancy_is_a_distribution(
        points in prop::collection::vec((-0.5f64..1.5, -0.5f64..1.5), 1..300),
        cols in 1usize..12,
        rows in 1usize..12,
    ) {
        let mut h = Heatmap::new(cols, rows, [0.0, 0.0], [1.0, 1.0]).unwrap();
        for (x, y) in &points {
            h.add([*x, *y]);
        }
        let occ = h.occupancy();
        prop_assert!((occ.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let e = h.entropy();
        prop_assert!(e >= 0.0 && e <= ((cols * rows) as f64).ln() + 1e-12);
    }

    #[test]
    fn rank_sum_p_is_a_probability_and_symmetric(
        a in prop::collection::vec(-5i32..5, 1..10),
        b in prop::collection::vec(-5i32..5, 1..10),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let ab = wilcoxon_rank_sum(&a, &b).unwrap();
        let ba = wilcoxon_rank_sum(&b, &a).unwrap();
        prop_assert!(ab.p_value > 0.0 && ab.p_value <= 1.0);
        prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
        prop_assert!((ab.u + ba.u - (a.len() * b.len()) as f64).abs() < 1e-9);
    }

    #[test]
    fn box_stats_are_ordered(xs in prop::collection::vec(-1e3f64..1e3, 1..50)) {
        let b = BoxStats::new(&xs).unwrap();
        prop_assert!(b.min <= b.q1 && b.q1 <= b.median && b.median <= b.q3 && b.q3 <= b.max);
        // Whiskers are data points, so with a gap beyond a quartile they may
        // sit inside the box.
        prop_assert!(b.min <= b.whisker_low && b.whisker_low <= b.whisker_high && b.whisker_high <= b.max);
        prop_assert!(xs.contains(&b.whisker_low) && xs.contains(&b.whisker_high));
        let reach = 1.5 * b.iqr();
        prop_assert!(b.whisker_low >= b.q1 - reach && b.whisker_high <= b.q3 + reach);
    }

    #[test]
    fn bootstrap_interval_contains_the_mean(xs in prop::collection::vec(-10f64..10.0, 1..40), seed in any::<u64>()) {
        let (lo, hi) = bootstrap_ci(&xs, 0.9, 300, &mut rng::stream(&[seed])).unwrap();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        prop_assert!(lo <= m + 1e-9 && m <= hi + 1e-9);
    }
}
