use petgraph::unionfind::UnionFind;
use proptest::prelude::*;

use streetperc::experiments::{fit_logistic, logistic, pole_capacity, Direction};
use streetperc::experiments::{SweepParam, SweepSpec};
use streetperc::geometry::{build_street_system, sample_poisson_points, segments_intersect};
use streetperc::io::{PhaseSpec, RealizationDump, RunConfig};
use streetperc::percolation::{
    boundary_streets, build_open_graph, detect_crossing, estimate_connection_probability, realize,
    simulate_realization, Realization,
};
use streetperc::placement::InterferenceScope;
use streetperc::propagation::{gilbert_street_open, sinr, street_open_bruteforce, SinrField};
use streetperc::{NetworkParams, Point, StreetSystem, Window};

fn small_window() -> Window {
    Window::new(400.0).unwrap()
}

fn scope() -> impl Strategy<Value = InterferenceScope> {
    prop_oneof![
        Just(InterferenceScope::Street),
        Just(InterferenceScope::CommonStreets)
    ]
}

prop_compose! {
    fn model()(
        u in 0.0..8.0f64,
        theta in 0.0..0.05f64,
        tau in 0.3..3.0f64,
        kappa in 10.0..200.0f64,
        beta in 1.5..4.0f64,
        p in 0.6..=1.0f64,
        interference in scope(),
    ) -> NetworkParams {
        NetworkParams {
            theta,
            threshold: tau,
            kappa,
            beta,
            relay_probability: p,
            interference,
            ..NetworkParams::default().with_users_per_street(u)
        }
    }
}

fn draw(params: &NetworkParams, seed: u64) -> Realization {
    realize(params, &small_window(), seed, 0).unwrap()
}

/// Streets sharing a crossroads with `street`, itself included.
fn neighbourhood(system: &StreetSystem, street: usize) -> Vec<usize> {
    let s = system.street(street);
    let mut out: Vec<usize> = system
        .incident(s.v1)
        .iter()
        .chain(system.incident(s.v2))
        .copied()
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn noise_only_verdicts_follow_the_disk_rule(params in model(), seed in any::<u64>()) {
        let params = NetworkParams { theta: 0.0, ..params };
        let radius = params.derive().unwrap().gilbert_radius;
        let r = draw(&params, seed);
        for v in &r.outcome.verdicts {
            prop_assert_eq!(
                v.is_open(),
                gilbert_street_open(v.street_id, &r.deployment, &r.system, radius)
            );
        }
    }

    #[test]
    fn open_streets_are_confirmed_by_subset_search(params in model(), seed in any::<u64>()) {
        let r = draw(&params, seed);
        for v in &r.outcome.verdicts {
            if r.deployment.users_on(v.street_id).len() > 10 {
                continue;
            }
            let any = street_open_bruteforce(v.street_id, &r.deployment, &r.system, &params).unwrap();
            // the direct link and the full chain are both subsets
            prop_assert!(!v.is_open() || any);
        }
    }

    #[test]
    fn subset_search_agrees_without_interference(params in model(), seed in any::<u64>()) {
        let params = NetworkParams { theta: 0.0, ..params };
        let r = draw(&params, seed);
        for v in &r.outcome.verdicts {
            if r.deployment.users_on(v.street_id).len() > 10 {
                continue;
            }
            let any = street_open_bruteforce(v.street_id, &r.deployment, &r.system, &params).unwrap();
            prop_assert_eq!(v.is_open(), any);
        }
    }

    #[test]
    fn no_context_decodes_more_than_the_pole_capacity(
        params in model(),
        theta in 0.05..1.0f64,
        seed in any::<u64>(),
    ) {
        let params = NetworkParams { theta, ..params };
        let cap = pole_capacity(theta, params.threshold);
        let r = draw(&params, seed);
        let field = SinrField::new(&r.system, &r.deployment, &params);
        for rx in 0..r.deployment.nodes().len() {
            match params.interference {
                InterferenceScope::Street => {
                    for &s in r.deployment.streets_of(&r.system, rx) {
                        prop_assert!(field.decodable_on(s, rx) as f64 <= cap);
                    }
                }
                InterferenceScope::CommonStreets => {
                    prop_assert!(field.decodable_count(rx) as f64 <= cap);
                }
            }
        }
    }

    #[test]
    fn an_extra_user_only_affects_nearby_streets(
        params in model(),
        seed in any::<u64>(),
        pick in any::<prop::sample::Index>(),
        at in 0.0..1.0f64,
    ) {
        let r = draw(&params, seed);
        prop_assume!(!r.system.is_empty());
        let street = pick.index(r.system.streets().len());
        let offset = at * r.system.street(street).length;
        let more = r.deployment.with_extra_user(&r.system, street, offset).unwrap();
        let before = SinrField::new(&r.system, &r.deployment, &params).verdicts();
        let after = SinrField::new(&r.system, &more, &params).verdicts();
        let near = neighbourhood(&r.system, street);
        for (b, a) in before.iter().zip(&after) {
            if b != a {
                prop_assert!(near.contains(&b.street_id));
                if params.interference == InterferenceScope::Street {
                    prop_assert_eq!(b.street_id, street);
                }
            }
        }
    }

    #[test]
    fn rescaling_changes_sinr(c in 1.1..5.0f64, kappa in 1.0..200.0f64, theta in 0.0..0.05f64) {
        let params = NetworkParams { kappa, theta, ..Default::default() };
        let at = |scale: f64| {
            let system = StreetSystem::from_parts(
                vec![Point::new(0.0, 0.0), Point::new(120.0 * scale, 0.0)],
                &[(0, 1)],
            )
            .unwrap();
            let d = streetperc::Deployment::new(
                &system,
                vec![true, true],
                vec![vec![30.0 * scale, 70.0 * scale]],
            )
            .unwrap();
            sinr(0, 2, &d, &system, &params).unwrap()
        };
        prop_assert!(at(1.0) != at(c));
    }

    #[test]
    fn components_match_union_find(seed in any::<u64>(), density in 0.0..1.0f64) {
        let r = draw(&NetworkParams::default(), seed);
        let n = r.system.streets().len();
        let open: Vec<bool> = (0..n)
            .map(|s| (streetperc::seed::mix64(seed ^ s as u64) as f64 / u64::MAX as f64) < density)
            .collect();
        let graph = build_open_graph(&r.system, &open);
        let mut uf = UnionFind::<usize>::new(n);
        for v in 0..r.system.vertices().len() {
            let inc: Vec<usize> = r.system.incident(v).iter().copied().filter(|&s| open[s]).collect();
            for w in inc.windows(2) {
                uf.union(w[0], w[1]);
            }
        }
        for a in 0..n {
            prop_assert_eq!(graph.labels[a].is_some(), open[a]);
            for b in 0..n {
                if open[a] && open[b] {
                    prop_assert_eq!(graph.labels[a] == graph.labels[b], uf.equiv(a, b));
                }
            }
        }
        prop_assert_eq!(graph.sizes.iter().sum::<usize>(), open.iter().filter(|&&o| o).count());
    }

    #[test]
    fn opening_streets_never_removes_a_crossing(
        seed in any::<u64>(),
        u in 0.0..6.0f64,
        extra in 0.0..0.5f64,
    ) {
        let params = NetworkParams::default().with_users_per_street(u);
        let w = small_window();
        let r = realize(&params, &w, seed, 0).unwrap();
        let base: Vec<bool> = r.outcome.verdicts.iter().map(|v| v.is_open()).collect();
        let superset: Vec<bool> = base
            .iter()
            .enumerate()
            .map(|(s, &o)| o || (streetperc::seed::mix64(seed ^ !(s as u64)) as f64 / u64::MAX as f64) < extra)
            .collect();
        let boundary = boundary_streets(&r.system, &w);
        let a = detect_crossing(&build_open_graph(&r.system, &base), &boundary);
        let b = detect_crossing(&build_open_graph(&r.system, &superset), &boundary);
        prop_assert!(!a.vertical || b.vertical);
        prop_assert!(!a.horizontal || b.horizontal);
        prop_assert_eq!(a, r.outcome.crossing);
    }

    #[test]
    fn boundary_sets_agree_with_segment_tests(seed in any::<u64>()) {
        let w = small_window();
        let r = draw(&NetworkParams::default(), seed);
        let boundary = boundary_streets(&r.system, &w);
        let [north, east, south, west] = w.inner().sides();
        for (side, listed) in [
            (north, &boundary.north),
            (east, &boundary.east),
            (south, &boundary.south),
            (west, &boundary.west),
        ] {
            for s in r.system.streets() {
                let (a, b) = r.system.endpoints(s.id);
                prop_assert_eq!(listed.contains(&s.id), segments_intersect(&a, &b, &side.0, &side.1));
            }
        }
    }

    #[test]
    fn every_street_meets_the_inner_window(seed in any::<u64>()) {
        let w = small_window();
        let r = draw(&NetworkParams::default(), seed);
        for s in r.system.streets() {
            let (a, b) = r.system.endpoints(s.id);
            prop_assert!(w.inner().intersects_segment(&a, &b));
            prop_assert!((a.distance(&b) - s.length).abs() < 1e-9 * s.length.max(1.0));
        }
        for offsets in r.deployment.users() {
            prop_assert!(offsets.windows(2).all(|o| o[0] <= o[1]));
        }
        for (s, offsets) in r.deployment.users().iter().enumerate() {
            let len = r.system.street(s).length;
            prop_assert!(offsets.iter().all(|&o| (0.0..=len).contains(&o)));
        }
    }

    #[test]
    fn street_systems_scale_with_their_seeds(seed in any::<u64>(), c in 0.25..4.0f64) {
        let w = small_window();
        let intensity = NetworkParams::default().street_intensity;
        let points = sample_poisson_points(intensity, &w, seed).unwrap();
        let base = build_street_system(&points, &w).unwrap();
        let scaled_points: Vec<Point> = points.iter().map(|p| p.scaled(c)).collect();
        let scaled_window = Window::new(w.inner_side() * c).unwrap();
        let scaled = build_street_system(&scaled_points, &scaled_window).unwrap();
        prop_assert_eq!(base.streets().len(), scaled.streets().len());
        prop_assert_eq!(base.vertices().len(), scaled.vertices().len());
        let total = |s: &StreetSystem| s.streets().iter().map(|s| s.length).sum::<f64>();
        prop_assert!((total(&scaled) / (c * total(&base)) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn critical_values_follow_affine_regridding(
        a in 0.5..4.0f64,
        mu in -5.0..5.0f64,
        scale in 0.1..10.0f64,
        shift in -100.0..100.0f64,
    ) {
        let xs: Vec<f64> = (0..21).map(|i| mu - 3.0 + 0.3 * i as f64).collect();
        let data: Vec<(f64, f64)> = xs.iter().map(|&x| (x, logistic(a * (x - mu)))).collect();
        let moved: Vec<(f64, f64)> = data.iter().map(|&(x, t)| (scale * x + shift, t)).collect();
        let f = fit_logistic(&data, 1000, Direction::Rising).unwrap();
        let g = fit_logistic(&moved, 1000, Direction::Rising).unwrap();
        let back = (g.mu_star - shift) / scale;
        prop_assert!((back - f.mu_star).abs() <= 1e-9 * f.mu_star.abs().max(1.0));
    }

    #[test]
    fn configs_survive_a_toml_round_trip(
        seed in 0..i64::MAX as u64,
        reps in 1..10_000usize,
        side in 1.0..1e5f64,
        params in model(),
        u in prop::option::of(0.0..10.0f64),
        steps in 1..100usize,
        thetas in prop::collection::vec(0.0..0.05f64, 0..5),
        dump in any::<bool>(),
    ) {
        let config = RunConfig {
            seed,
            replications: reps,
            window_side: side,
            out: "results/run".into(),
            dump_realizations: dump,
            users_per_street: u,
            params,
            sweep: Some(SweepSpec { param: SweepParam::Theta, from: 0.0, to: 0.02, steps }),
            phase: Some(PhaseSpec { thetas, ..Default::default() }),
        };
        let text = config.to_toml_string().unwrap();
        prop_assert_eq!(RunConfig::from_toml_str(&text).unwrap(), config);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn realizations_are_reproducible(params in model(), seed in any::<u64>(), rep in 0..1000u64) {
        let w = small_window();
        let a = realize(&params, &w, seed, rep).unwrap();
        let b = realize(&params, &w, seed, rep).unwrap();
        let dump = |r: &Realization| serde_json::to_string(&RealizationDump::new(r, &params, &w)).unwrap();
        prop_assert_eq!(dump(&a), dump(&b));
        prop_assert_eq!(&a.outcome, &simulate_realization(&params, &w, seed, rep).unwrap());
    }

    #[test]
    fn estimates_match_a_sequential_count(seed in any::<u64>(), u in 0.0..6.0f64) {
        let params = NetworkParams::default().with_users_per_street(u);
        let w = small_window();
        let est = estimate_connection_probability(&params, &w, 12, seed).unwrap();
        let count = (0..12)
            .filter(|&rep| simulate_realization(&params, &w, seed, rep).unwrap().percolates())
            .count();
        prop_assert_eq!(est.successes, count);
    }
}
