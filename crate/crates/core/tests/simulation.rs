use cloudprice_core::bounds::fleet_bound;
use cloudprice_core::offline::{
    expected_lp, fleet_half_opt_prices, half_opt_price, offline_dp_oracle, sample_trace, JobClass,
};
use cloudprice_core::optimize::optimize_fleet;
use cloudprice_core::sim::{seeded_streams, simulate};
use cloudprice_core::{
    CorrelatedClassList, Fleet, FleetMode, FleetScheme, JobMix, PriceSchedule, SearchConfig,
    SimConfig, SimModel, ValueDistribution,
};
use rand::Rng;

fn classes() -> CorrelatedClassList {
    CorrelatedClassList::new(vec![
        JobClass { prob: 0.3, length: 1, value: 0.4 },
        JobClass { prob: 0.2, length: 3, value: 1.0 },
        JobClass { prob: 0.1, length: 5, value: 2.5 },
    ])
    .unwrap()
}

#[test]
fn acceptance_counts_are_binomial() {
    let mix = JobMix::new(vec![1, 2, 4], vec![0.3, 0.2, 0.2]).unwrap();
    let d = ValueDistribution::discrete(&[(0.1, 0.4), (0.5, 0.35), (0.9, 0.25)]).unwrap();
    let prices = vec![0.1, 0.5, 0.9];
    let r = simulate(
        SimModel::Single { mix: &mix, dist: &d },
        &PriceSchedule::PerLength(prices.clone()),
        &SimConfig::new(200_000, 6, 5),
    )
    .unwrap();
    for k in 0..3 {
        let n = r.offer_counts[k] as f64;
        let q = d.tail_prob(prices[k]);
        let phat = r.accept_counts[k] as f64 / n;
        let sd = (q * (1.0 - q) / n).sqrt();
        assert!((phat - q).abs() <= 4.0 * sd, "class {k}: {phat} vs {q}");
    }
}

#[test]
fn stream_draws_pass_chi_square() {
    const BINS: usize = 16;
    const DRAWS: usize = 160_000;
    // 99.9% quantile of chi-square with 15 degrees of freedom
    const CRIT: f64 = 37.70;
    let mut streams = seeded_streams(11, 6);
    let draws: Vec<Vec<f64>> = streams
        .iter_mut()
        .map(|rng| (0..DRAWS).map(|_| rng.random::<f64>()).collect())
        .collect();
    let expected = (DRAWS / BINS) as f64;
    for d in &draws {
        let mut counts = [0usize; BINS];
        for &u in d {
            counts[(u * BINS as f64) as usize] += 1;
        }
        let chi: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi < CRIT, "marginal chi-square {chi}");
    }
    // pairs of streams: 4x4 joint table of aligned draws
    for i in 0..draws.len() {
        for j in i + 1..draws.len() {
            let mut counts = [0usize; 16];
            for (u, v) in draws[i].iter().zip(&draws[j]) {
                counts[(u * 4.0) as usize * 4 + (v * 4.0) as usize] += 1;
            }
            let chi: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
            assert!(chi < CRIT, "streams {i},{j}: joint chi-square {chi}");
        }
    }
}

#[test]
fn half_opt_price_keeps_half_of_opt() {
    let c = classes();
    let opt = expected_lp(&c).opt;
    let p = half_opt_price(&c);
    let r = simulate(SimModel::Correlated(&c), &PriceSchedule::Flat(p), &SimConfig::new(300_000, 10, 3))
        .unwrap();
    assert!(r.welfare.mean >= 0.5 * opt - 3.0 * r.welfare.se, "{} vs {}", r.welfare.mean, opt);
    let exact = SimModel::Correlated(&c).closed_form(&PriceSchedule::Flat(p)).unwrap();
    assert!(r.welfare.covers(exact.welfare_per_step, 4.0));

    let horizon = 100_000;
    let mut rng = seeded_streams(4, 1).pop().unwrap();
    let trace = sample_trace(&c, horizon, &mut rng);
    let dp = offline_dp_oracle(&trace, horizon);
    assert!(dp <= opt * 1.02, "dp {dp} vs opt {opt}");
    assert!(dp >= exact.welfare_per_step * 0.98, "dp {dp} vs online {}", exact.welfare_per_step);
}

#[test]
fn fleet_half_opt_welfare_matches_simulation() {
    let servers = vec![
        classes(),
        CorrelatedClassList::new(vec![
            JobClass { prob: 0.5, length: 2, value: 0.8 },
            JobClass { prob: 0.2, length: 4, value: 0.3 },
        ])
        .unwrap(),
    ];
    let h = fleet_half_opt_prices(&servers).unwrap();
    let r = simulate(
        SimModel::CorrelatedFleet(&servers),
        &PriceSchedule::Flat(h.price),
        &SimConfig::new(300_000, 10, 8),
    )
    .unwrap();
    assert!(r.welfare.covers(h.welfare[h.server], 4.0), "{:?} vs {}", r.welfare, h.welfare[h.server]);
}

#[test]
fn fleet_sim_matches_closed_form_and_bound() {
    let d = ValueDistribution::discrete(&[(0.2, 0.5), (0.6, 0.3), (1.4, 0.2)]).unwrap();
    let fleet = Fleet::new(
        vec![
            JobMix::new(vec![1, 3], vec![0.3, 0.3]).unwrap(),
            JobMix::new(vec![2, 6], vec![0.5, 0.1]).unwrap(),
            JobMix::single(5, 0.6).unwrap(),
        ],
        FleetMode::EqualR,
    )
    .unwrap();
    let cfg = SearchConfig::default();
    let flat = optimize_fleet(&fleet, &d, 1.0, FleetScheme::Flat, &cfg).unwrap();
    let per = optimize_fleet(&fleet, &d, 1.0, FleetScheme::PerServer, &cfg).unwrap();
    let sim_cfg = SimConfig::new(300_000, 10, 21);
    let model = SimModel::Fleet { fleet: &fleet, dist: &d };
    let a = simulate(model, &flat.schedule, &sim_cfg).unwrap();
    let b = simulate(model, &per.schedule, &sim_cfg).unwrap();
    assert!(a.welfare.covers(flat.objective_value, 4.0));
    assert!(b.welfare.covers(per.objective_value, 4.0));
    let bound = fleet_bound(&fleet).unwrap().value;
    let slack = 3.0 * (a.welfare.se + b.welfare.se);
    assert!(a.welfare.mean + slack >= bound * b.welfare.mean);
}
