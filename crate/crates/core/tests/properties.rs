use approx::assert_abs_diff_eq;
use cloudprice_core::bounds::{
    fixed_prob_bound, h_corner_min, h_eval, h_value, rho, rho_unbounded,
};
use cloudprice_core::offline::{expected_lp, JobClass};
use cloudprice_core::optimize::{best_single_from_multi, optimize_flat, optimize_multi};
use cloudprice_core::{CorrelatedClassList, JobMix, SearchConfig, SearchMethod, ValueDistribution};
use proptest::prelude::*;

fn law() -> impl Strategy<Value = ValueDistribution> {
    prop::collection::btree_map(0u32..400, 1u32..20, 1..=6).prop_map(|atoms| {
        let total: u32 = atoms.values().sum();
        let pairs: Vec<(f64, f64)> = atoms
            .iter()
            .map(|(&v, &w)| (f64::from(v) / 100.0, f64::from(w) / f64::from(total)))
            .collect();
        ValueDistribution::discrete(&pairs).unwrap()
    })
}

fn mix(max_n: usize, max_len: u32) -> impl Strategy<Value = JobMix> {
    (1..=max_n)
        .prop_flat_map(move |n| {
            (
                prop::collection::vec(1..=max_len, n),
                prop::collection::vec(0.02f64..1.0, n),
                0.05f64..=1.0,
            )
        })
        .prop_map(|(mut lengths, raw, total)| {
            lengths.sort_unstable();
            let sum: f64 = raw.iter().sum();
            JobMix::new(lengths, raw.iter().map(|x| x / sum * total).collect()).unwrap()
        })
}

fn atoms_of(d: &ValueDistribution) -> Vec<(f64, f64)> {
    match d {
        ValueDistribution::Discrete(x) => x.atoms().collect(),
        _ => unreachable!(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn law_identities(d in law(), p in -0.5f64..4.5) {
        let atoms = atoms_of(&d);
        let below: f64 = atoms.iter().filter(|a| a.0 < p).map(|a| a.1).sum();
        let lower_part: f64 = atoms.iter().filter(|a| a.0 < p).map(|a| a.0 * a.1).sum();
        let mean: f64 = atoms.iter().map(|a| a.0 * a.1).sum();
        prop_assert!((d.cdf_strict(p) - below).abs() < 1e-12);
        prop_assert!((d.cdf_strict(p) + d.tail_prob(p) - 1.0).abs() < 1e-12);
        prop_assert!((d.partial_expectation(p) + lower_part - mean).abs() < 1e-12);
        prop_assert!((d.mean() - mean).abs() < 1e-12);
        prop_assert!(d.partial_expectation(p + 0.01) <= d.partial_expectation(p) + 1e-15);
        prop_assert!(d.cdf_strict(p + 0.01) >= d.cdf_strict(p));
        prop_assert_eq!(d.tail_prob(d.reject_price()), 0.0);
    }

    #[test]
    fn continuous_law_identities(lo in 0.0f64..2.0, w in 0.1f64..3.0, p in -1.0f64..6.0) {
        let d = ValueDistribution::uniform(lo, lo + w).unwrap();
        let q = ((p - lo) / w).clamp(0.0, 1.0);
        prop_assert!((d.cdf_strict(p) - q).abs() < 1e-12);
        // E[v 1{v >= p}] = (hi^2 - max(p,lo)^2) / (2w)
        let x = p.clamp(lo, lo + w);
        let pe = ((lo + w).powi(2) - x * x) / (2.0 * w);
        prop_assert!((d.partial_expectation(p) - pe).abs() < 1e-12);
        let u = q;
        prop_assert!((d.quantile(u) - (lo + u * w)).abs() < 1e-12);
    }

    #[test]
    fn corner_search_matches_full_cube(m in mix(7, 12)) {
        let n = m.len();
        let best = h_corner_min(&m).unwrap();
        let mut full = f64::INFINITY;
        for mask in 0u32..(1 << n) {
            let b: Vec<f64> = (0..n).map(|k| f64::from((mask >> k) & 1)).collect();
            full = full.min(h_eval(&m, &b).unwrap());
        }
        prop_assert!((best.value - full).abs() < 1e-12, "{} vs {}", best.value, full);
        let w = best.witness.unwrap();
        if n >= 2 {
            prop_assert_eq!(w[0], 0.0);
            prop_assert_eq!(w[n - 1], 1.0);
        }
        prop_assert!(best.value >= 0.5 - 1e-12);
        prop_assert!(best.value <= 1.0 + 1e-12);
    }

    #[test]
    fn interior_points_are_not_below_corners(
        m in mix(6, 12),
        seeds in prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 6), 20),
    ) {
        let best = h_corner_min(&m).unwrap().value;
        for s in seeds {
            let v = h_eval(&m, &s[..m.len()]).unwrap();
            prop_assert!(v >= best - 1e-12, "interior {v} below corner {best}");
        }
    }

    #[test]
    fn two_length_corner_is_rho(a in 1u32..20, gap in 1u32..30, r1 in 0.01f64..0.99, frac in 0.01f64..=1.0) {
        let b = a + gap;
        let r2 = (1.0 - r1) * frac;
        let m = JobMix::new(vec![a, b], vec![r1, r2]).unwrap();
        let c = h_corner_min(&m).unwrap().value;
        let exact = rho(a, b, r1, r2).unwrap();
        prop_assert!((c - exact).abs() < 1e-12);
        let fixed = fixed_prob_bound(r1).value;
        prop_assert!(exact >= fixed - 1e-12);
        prop_assert!(fixed >= 0.5);
    }

    #[test]
    fn long_second_length_limit(a in 1u32..10, r1 in 0.05f64..0.95, frac in 0.05f64..=1.0) {
        let r2 = (1.0 - r1) * frac;
        let lim = rho_unbounded(a, r1).unwrap();
        // approach from above at rate a / (b r2)
        for b in [1_000_000u32, 1_000_000_000] {
            let gap = rho(a, b, r1, r2).unwrap() - lim;
            let rate = f64::from(a) / (f64::from(b) * r2);
            prop_assert!(gap >= -1e-12 && gap <= rate + 1e-12, "b = {b}: gap {gap}, rate {rate}");
        }
        let far = rho(a, 1_000_000_000, r1, r2).unwrap();
        prop_assert!((far - lim).abs() < 1e-4, "{far} vs {lim}");
    }

    #[test]
    fn lp_matches_dual(
        raw in prop::collection::vec((0.01f64..1.0, 1u32..10, 0.0f64..5.0), 1..=6),
        total in 0.05f64..=1.0,
    ) {
        let sum: f64 = raw.iter().map(|c| c.0).sum();
        let classes: Vec<JobClass> = raw
            .iter()
            .map(|&(p, length, value)| JobClass { prob: p / sum * total, length, value })
            .collect();
        let list = CorrelatedClassList::new(classes.clone()).unwrap();
        let sol = expected_lp(&list);
        // dual: min_y y + sum r_j a_j (v_j - y)^+ over y in {0, v_j}
        let dual = std::iter::once(0.0)
            .chain(classes.iter().map(|c| c.value))
            .map(|y| {
                y + classes
                    .iter()
                    .map(|c| c.prob * f64::from(c.length) * (c.value - y).max(0.0))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        prop_assert!((sol.opt - dual).abs() < 1e-9, "primal {} dual {}", sol.opt, dual);
        let used: f64 = sol.x.iter().zip(&classes).map(|(x, c)| x * f64::from(c.length)).sum();
        prop_assert!(used <= 1.0 + 1e-12);
        for (x, c) in sol.x.iter().zip(&classes) {
            prop_assert!(*x >= 0.0 && *x <= c.prob + 1e-15);
        }
    }

    #[test]
    fn lp_perturbations_do_not_improve(
        raw in prop::collection::vec((0.01f64..1.0, 1u32..10, 0.0f64..5.0), 2..=6),
        moves in prop::collection::vec((0usize..6, 0usize..6, 0.0f64..0.2), 30),
    ) {
        let sum: f64 = raw.iter().map(|c| c.0).sum();
        let classes: Vec<JobClass> = raw
            .iter()
            .map(|&(p, length, value)| JobClass { prob: p / sum, length, value })
            .collect();
        let list = CorrelatedClassList::new(classes.clone()).unwrap();
        let sol = expected_lp(&list);
        let n = classes.len();
        for (i, j, step) in moves {
            let (i, j) = (i % n, j % n);
            if i == j {
                continue;
            }
            // move capacity from class i to class j, staying feasible
            let mut x = sol.x.clone();
            let (ai, aj) = (f64::from(classes[i].length), f64::from(classes[j].length));
            let cap = (x[i] * ai).min(step).min((classes[j].prob - x[j]) * aj);
            if cap <= 0.0 {
                continue;
            }
            x[i] -= cap / ai;
            x[j] += cap / aj;
            let value: f64 = x.iter().zip(&classes).map(|(x, c)| x * f64::from(c.length) * c.value).sum();
            prop_assert!(value <= sol.opt + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn coordinate_ascent_reaches_exhaustive_optimum(m in mix(3, 8), d in law(), lambda in 0.0f64..=1.0) {
        let cfg = SearchConfig::default();
        let ex = optimize_multi(&m, &d, lambda, &cfg).unwrap();
        let ca = optimize_multi(&m, &d, lambda, &SearchConfig { force_coordinate_ascent: true, ..cfg.clone() }).unwrap();
        if m.len() > 1 {
            prop_assert_eq!(ex.method, SearchMethod::Exhaustive);
            prop_assert_eq!(ca.method, SearchMethod::CoordinateAscent);
        }
        prop_assert!((ex.objective_value - ca.objective_value).abs() < 1e-9,
            "exhaustive {} vs ascent {}", ex.objective_value, ca.objective_value);
        let flat = optimize_flat(&m, &d, lambda, &cfg).unwrap();
        prop_assert!(ex.objective_value >= flat.objective_value - 1e-12);
        let single = best_single_from_multi(&m, &d, &ex.schedule.prices(), lambda).unwrap();
        prop_assert!(single.ratio >= 0.5 - 1e-12 && single.ratio <= 1.0 + 1e-12);
        prop_assert!(single.flat_value <= flat.objective_value + 1e-12);
    }
}

#[test]
fn h_exact_over_rationals() {
    use num_rational::Ratio;
    let third = Ratio::new(1i64, 3);
    let one = Ratio::from_integer(1);
    let zero = Ratio::from_integer(0);
    let v = h_value(&[2, 3, 6], &[third; 3], &[zero, one, one]);
    assert_eq!(v, Ratio::new(44, 49));
    let v = h_value(&[2, 3, 8], &[third; 3], &[zero, zero, one]);
    assert_eq!(v, Ratio::new(78, 89));
    let a = h_value(&[2, 3, 7], &[third; 3], &[zero, zero, one]);
    let b = h_value(&[2, 3, 7], &[third; 3], &[zero, one, one]);
    assert_eq!(a, Ratio::new(8, 9));
    assert_eq!(b, Ratio::new(8, 9));
}

#[test]
fn uniform_flat_optimum_refines_past_grid() {
    let m = JobMix::new(vec![1, 2], vec![0.5, 0.5]).unwrap();
    let u = ValueDistribution::uniform(0.0, 1.0).unwrap();
    let r = optimize_flat(&m, &u, 0.0, &SearchConfig { grid_points: 17, ..Default::default() }).unwrap();
    assert_abs_diff_eq!(r.schedule.prices()[0], 3.0 - 6f64.sqrt(), epsilon = 1e-6);
    assert_abs_diff_eq!(r.objective_value, 15.0 - 6.0 * 6f64.sqrt(), epsilon = 1e-12);
}
