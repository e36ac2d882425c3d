mod common;

use airnet::config::RunConfig;
use airnet::congestion::{DirectionHistogram, Grid, HotMode, Side, grid_entropy, score_grids, select_hot_grids};
use airnet::network::Horizon;
use airnet::queue::{DemandProfile, QueueParams, arrival_weights, init_state, run_profile, step_epoch};
use airnet::route_mining::{dbscan, euclidean};
use airnet::scenario::{apply_enroute_scale, apply_runway_addition};
use airnet::simulation::{FnWaits, LegMove, SimOptions, simulate_day, simulate_day_with, update_demand};
use proptest::prelude::*;

const SIDES: [Side; 4] = [Side::N, Side::E, Side::S, Side::W];

fn grid(t: f64, r: usize, e: f64) -> Grid {
    Grid { index: (0, 0), south: 0.0, west: 0.0, north: 1.0, east: 1.0, traffic_load: t, route_count: r, entropy: e, score: 0.0 }
}

fn ranking(gs: &[Grid]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..gs.len()).collect();
    idx.sort_by(|&a, &b| gs[b].score.total_cmp(&gs[a].score).then(a.cmp(&b)));
    idx
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn epochs_conserve_probability(k in 1u32..=4, mu in 1.0f64..15.0, n in 2usize..60, rates in prop::collection::vec(0.0f64..2.0, 1..6)) {
        let p = QueueParams::new(k, mu, n).unwrap();
        let d = DemandProfile::new(rates.iter().map(|r| r * mu).collect(), 15.0, 0.0).unwrap();
        let mut s = init_state(n, 0.0);
        while s.t < d.t_end() {
            s = step_epoch(&s, &p, &d).unwrap();
            prop_assert!((s.p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(s.p.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn arrival_weights_sum_to_one(rho in 0.0f64..3.0, k in 1u32..=4, n in 1usize..80) {
        // truncated at n; the remaining tail is folded into state N later
        let a = arrival_weights(rho, k, n).unwrap();
        let sum: f64 = a.iter().sum();
        prop_assert!(sum <= 1.0 + 1e-12);
        prop_assert!(a.len() == n + 1 || (sum - 1.0).abs() <= 1e-9);
        prop_assert!(a.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn stationary_wait_falls_with_capacity(k in 1u32..=4, mu in 2.0f64..12.0, rho in 0.05f64..0.9) {
        let d = DemandProfile::new(vec![rho * mu; 40], 15.0, 0.0).unwrap();
        let lo = run_profile(&QueueParams::new(k, mu, 80).unwrap(), &d).unwrap();
        let hi = run_profile(&QueueParams::new(k, 1.25 * mu, 80).unwrap(), &d).unwrap();
        prop_assert!(hi.curve.wait_at(d.t_end()) <= lo.curve.wait_at(d.t_end()) + 1e-9);
    }

    #[test]
    fn demand_moves_conserve_mass(seed in 0u64..10_000, moves in prop::collection::vec((0usize..2, 0.0f64..1440.0, 0.0f64..1500.0), 0..30)) {
        let h = Horizon::new(0.0, 15.0, 96).unwrap();
        let mut profiles = vec![h.zeros(), h.zeros()];
        let mut ms = Vec::new();
        for (i, &(node, from, to)) in moves.iter().enumerate() {
            let w = 0.25 + (seed % 4) as f64 * 0.25;
            let slot = profiles[node].index_clamped(from);
            profiles[node].rates[slot] += w;
            ms.push(LegMove { flight: i, leg: 0, node, weight: w, from, to });
        }
        let before: Vec<f64> = profiles.iter().map(|p| p.total()).collect();
        update_demand(&mut profiles, &ms, 0);
        for (p, b) in profiles.iter().zip(before) {
            prop_assert!((p.total() - b).abs() <= 1e-9);
            prop_assert!(p.rates.iter().all(|&r| r >= 0.0));
        }
    }

    #[test]
    fn entropy_is_bounded(loads in prop::collection::vec(0.0f64..100.0, 16)) {
        let mut h = DirectionHistogram::default();
        let mut used = 0;
        for (i, &l) in loads.iter().enumerate() {
            let (a, b) = (SIDES[i / 4], SIDES[i % 4]);
            if l > 0.0 {
                h.loads.insert((a, b), l);
                used += 1;
            }
        }
        let e = grid_entropy(&h);
        prop_assert!(e >= 0.0);
        prop_assert!(e <= (used.max(1) as f64).log2() + 1e-12);
    }

    #[test]
    fn score_ranking_survives_rescaling(raw in prop::collection::vec((0.0f64..100.0, 0usize..9, 0.0f64..4.0), 2..20), f in 0.01f64..100.0, which in 0usize..3) {
        let base: Vec<Grid> = raw.iter().map(|&(t, r, e)| grid(t, r, e)).collect();
        let mut a = base.clone();
        score_grids(&mut a, [1.0, 1.0, 2.0]);
        let mut b: Vec<Grid> = base
            .iter()
            .map(|g| match which {
                0 => Grid { traffic_load: g.traffic_load * f, ..g.clone() },
                _ => Grid { entropy: g.entropy * f, ..g.clone() },
            })
            .collect();
        score_grids(&mut b, [1.0, 1.0, 2.0]);
        prop_assert_eq!(ranking(&a), ranking(&b));
    }

    #[test]
    fn raising_threshold_never_adds(raw in prop::collection::vec((0.0f64..100.0, 0usize..9, 0.0f64..4.0), 1..20), lo in 0.0f64..1.0, step in 0.0f64..0.5) {
        let mut gs: Vec<Grid> = raw.iter().map(|&(t, r, e)| grid(t, r, e)).collect();
        score_grids(&mut gs, [1.0, 1.0, 2.0]);
        let a = select_hot_grids(&gs, HotMode::Threshold(lo), [1.0, 1.0, 2.0]);
        let b = select_hot_grids(&gs, HotMode::Threshold(lo + step), [1.0, 1.0, 2.0]);
        prop_assert!(b.len() <= a.len());
    }

    #[test]
    fn dbscan_labels_are_consistent(pts in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 1..25), eps in 0.3f64..4.0, minpt in 1usize..6) {
        let v: Vec<Vec<f64>> = pts.iter().map(|&(x, y)| vec![x, y]).collect();
        let lab = dbscan(&v, eps, minpt, euclidean);
        prop_assert_eq!(lab.labels.len(), v.len());
        for i in 0..v.len() {
            let nb: Vec<usize> = (0..v.len()).filter(|&j| euclidean(&v[i], &v[j]) <= eps).collect();
            if nb.len() >= minpt {
                // core points are never noise and share a label with core neighbours
                prop_assert!(lab.labels[i].is_some());
                for &j in &nb {
                    let core_j = (0..v.len()).filter(|&q| euclidean(&v[j], &v[q]) <= eps).count() >= minpt;
                    if core_j {
                        prop_assert_eq!(lab.labels[i], lab.labels[j]);
                    }
                }
            }
        }
        // cluster ids are dense from 0
        let c = lab.cluster_count();
        prop_assert!((0..c).all(|id| lab.labels.contains(&Some(id))));
    }

    #[test]
    fn runway_additions_commute(n1 in 1u32..5, n2 in 1u32..5) {
        let net = common::tiny_network();
        let ab = apply_runway_addition(&apply_runway_addition(&net, "AAA", n1).unwrap(), "BBB", n2).unwrap();
        let ba = apply_runway_addition(&apply_runway_addition(&net, "BBB", n2).unwrap(), "AAA", n1).unwrap();
        prop_assert_eq!(ab, ba);
    }

    #[test]
    fn enroute_scales_compose(a in 0.2f64..5.0, b in 0.2f64..5.0) {
        let net = common::tiny_network();
        let twice = apply_enroute_scale(&apply_enroute_scale(&net, None, a).unwrap(), Some("E1"), b).unwrap();
        let once = apply_enroute_scale(&net, None, a * b).unwrap();
        prop_assert!((twice.points[0].params.mu - once.points[0].params.mu).abs() <= 1e-12 * once.points[0].params.mu);
    }

    #[test]
    fn config_hash_ignores_line_order(pairs in prop::collection::btree_map("[a-z_]{1,8}", "[a-z0-9.:]{1,6}", 1..8)) {
        let lines: Vec<String> = pairs.iter().map(|(k, v)| format!("{k} = {v}")).collect();
        let fwd = RunConfig::parse(&lines.join("\n")).unwrap();
        let rev: Vec<String> = lines.iter().rev().cloned().collect();
        let bwd = RunConfig::parse(&rev.join("\n")).unwrap();
        prop_assert_eq!(fwd.hash(), bwd.hash());
    }

    #[test]
    fn horizon_slots_are_half_open(m in 1usize..200, dt in 1.0f64..60.0, x in 0.0f64..1.0) {
        let h = Horizon::new(0.0, dt, m).unwrap();
        prop_assert_eq!(h.slot(h.end()), None);
        prop_assert_eq!(h.slot(-1e-9), None);
        let t = x * h.end();
        let s = h.slot(t).unwrap();
        prop_assert!((s as f64) * dt <= t + 1e-9 && s < m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn simulation_never_moves_operations_earlier(seed in 0u64..100_000) {
        let net = common::tiny_network();
        let its = common::random_itineraries(seed, 20);
        let out = simulate_day(&net, &its, &SimOptions::default()).unwrap();
        for l in out.events.iter().flat_map(|e| &e.legs) {
            prop_assert!(l.delay >= 0.0 && l.wait >= 0.0 && l.processed);
        }
    }

    #[test]
    fn deterministic_waits_match_rescheduler(seed in 0u64..100_000) {
        let net = common::tiny_network();
        let its = common::random_itineraries(seed, 20);
        let opts = SimOptions::default();
        let got = simulate_day_with(&net, &its, &opts, &mut FnWaits(common::step_wait)).unwrap();
        let want = common::reschedule(&net, &its, &opts.buffers, common::step_wait);
        for (e, w) in got.events.iter().zip(&want) {
            let times: Vec<(f64, f64)> = e.legs.iter().map(|l| (l.adjusted(), l.wait)).collect();
            let expect: Vec<(f64, f64)> = w.iter().map(|o| (o.adjusted, o.wait)).collect();
            prop_assert_eq!(times, expect);
        }
    }
}
