//! Cross-module invariants, checked against brute-force oracles.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use sass_core::geom::{Cell, Grid};
use sass_core::gut::{GutNode, Matrix, PayoffFn};
use sass_core::learning::{adapt_loop, prune, OutcomePosterior, CellKey};
use sass_core::metrics::{metrics_from_trace, Metrics};
use sass_core::mission::run;
use sass_core::negotiation::{auction, run_negotiation, OpKind};
use sass_core::rne::{js_divergence, kl_divergence, trust_matrix};
use sass_core::scenario::{AgentSpec, Mode, Scenario, TaskSpec};
use sass_core::trace::{EventKind, Spawned};
use sass_core::world::{AgentState, MessageBus, World, WorldConfig};

fn optimum(u: &[Vec<i64>]) -> i64 {
    fn go(u: &[Vec<i64>], a: usize, used: &mut [bool]) -> i64 {
        if a == u.len() {
            return 0;
        }
        let mut best = go(u, a + 1, used);
        for t in 0..used.len() {
            if !used[t] {
                used[t] = true;
                best = best.max(u[a][t] + go(u, a + 1, used));
                used[t] = false;
            }
        }
        best
    }
    go(u, 0, &mut vec![false; u[0].len()])
}

fn utilities() -> impl Strategy<Value = Vec<Vec<i64>>> {
    (1usize..=5, 1usize..=5).prop_flat_map(|(a, t)| prop::collection::vec(prop::collection::vec(0i64..30, t), a))
}

fn distribution(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}

fn bus_world(agents: usize, delay: u64, loss: f64, seed: u64) -> World {
    let mut w = World::new(Grid::new(8, 8), WorldConfig::default(), MessageBus::new(delay, loss), seed);
    for i in 0..agents {
        w.add_agent(AgentState::new(i as u32, Cell::new(i as i32, 0), 100.0)).unwrap();
    }
    w
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn auction_is_conflict_free_bounded_and_half_optimal(u in utilities()) {
        let agents: Vec<u32> = (0..u.len() as u32).collect();
        let items: Vec<u32> = (0..u[0].len() as u32).collect();
        let out = auction(&agents, &items, |a, t| u[a as usize][t as usize] as f64);
        prop_assert!(out.assignment.is_one_to_one());
        prop_assert!(out.rounds as usize <= agents.len().min(items.len()) + 1);
        let got: i64 = out.assignment.map.iter().map(|(&t, &a)| u[a as usize][t as usize]).sum();
        prop_assert!(2 * got >= optimum(&u));
    }

    #[test]
    fn bus_protocol_matches_bounds(u in utilities(), delay in 0u64..3) {
        let mut w = bus_world(u.len(), delay, 0.0, 1);
        let items: Vec<u32> = (0..u[0].len() as u32).collect();
        let out = run_negotiation(&mut w, 0, OpKind::Selection, &items, &|a, t| u[a as usize][t as usize] as f64, 10).unwrap();
        prop_assert!(out.finished);
        prop_assert!(out.assignment.is_one_to_one());
        prop_assert!(out.rounds as usize <= u.len().min(items.len()) + 1);
        let got: i64 = out.assignment.map.iter().map(|(&t, &a)| u[a as usize][t as usize]).sum();
        prop_assert!(2 * got >= optimum(&u));
    }

    #[test]
    fn lossy_bus_never_double_awards(u in utilities(), seed in 0u64..1000, loss in 0.0f64..0.3) {
        let mut w = bus_world(u.len(), 1, loss, seed);
        let items: Vec<u32> = (0..u[0].len() as u32).collect();
        let out = run_negotiation(&mut w, 0, OpKind::Selection, &items, &|a, t| u[a as usize][t as usize] as f64, 10).unwrap();
        prop_assert!(out.assignment.is_one_to_one());
        let mut awarded: BTreeMap<(u32, u32, u32, u32), u32> = BTreeMap::new();
        for e in &w.events {
            if let EventKind::Award { session, item, .. } = e.event {
                *awarded.entry((session.initiator, session.tick as u32, session.counter, item)).or_insert(0) += 1;
            }
        }
        prop_assert!(awarded.values().all(|&n| n == 1));
    }

    #[test]
    fn divergences_are_bounded((p, q) in (2usize..6).prop_flat_map(|n| (distribution(n), distribution(n)))) {
        prop_assert!(kl_divergence(&p, &q) >= -1e-12);
        let js = js_divergence(&p, &q);
        prop_assert!((-1e-12..=std::f64::consts::LN_2 + 1e-12).contains(&js));
        prop_assert_eq!(js, js_divergence(&q, &p));
    }

    #[test]
    fn trust_matrix_is_symmetric_with_unit_diagonal(ds in prop::collection::vec(distribution(5), 1..6)) {
        let agents: Vec<(u32, Vec<f64>)> = ds.into_iter().enumerate().map(|(i, d)| (i as u32, d)).collect();
        let tm = trust_matrix(&agents);
        for i in 0..tm.len() {
            prop_assert_eq!(tm.get(i, i), 1.0);
            for j in 0..tm.len() {
                prop_assert_eq!(tm.get(i, j), tm.get(j, i));
                prop_assert!((0.0..=1.0).contains(&tm.get(i, j)));
            }
        }
    }

    #[test]
    fn prune_never_grows_and_zero_is_identity(vals in prop::collection::vec(-5.0f64..5.0, 4), eps in 0.0f64..1.0) {
        let m = Matrix::from_rows(&[[vals[0], vals[1]], [vals[2], vals[3]]]).unwrap();
        let leaf = |i: usize| GutNode::leaf(&format!("c{i}"), 1, &["a", "b"], &["x", "y"], PayoffFn::constant(Matrix::filled(2, 2, 0.0)));
        let root = GutNode::leaf("root", 0, &["a", "b"], &["x", "y"], PayoffFn::constant(m))
            .with_child(0, 0, leaf(0)).with_child(0, 1, leaf(1)).with_child(1, 0, leaf(2)).with_child(1, 1, leaf(3));
        let state = BTreeMap::new();
        prop_assert!(prune(&root, &state, eps).unwrap().node_count() <= root.node_count());
        prop_assert_eq!(prune(&root, &state, 0.0).unwrap(), root);
    }

    #[test]
    fn posterior_means_stay_inside_unit_interval(obs in prop::collection::vec(any::<bool>(), 0..200)) {
        let k = CellKey::new("n", 0, 0);
        let mut post = OutcomePosterior::new();
        let mut last = post.get(&k);
        for o in obs {
            post.update(k.clone(), o);
            let now = post.get(&k);
            prop_assert!(now.alpha >= last.alpha && now.beta >= last.beta);
            prop_assert!(post.mean(&k) > 0.0 && post.mean(&k) < 1.0);
            last = now;
        }
    }
}

fn random_usar(seed: u64) -> Scenario {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut s = Scenario::new("r", Mode::Usar, 7, 7, 80);
    s.capabilities.insert("rescue".into());
    let mut used = BTreeSet::new();
    let mut cell = |rng: &mut rand_chacha::ChaCha8Rng| loop {
        let c = Cell::new(rng.gen_range(0..7), rng.gen_range(0..7));
        if used.insert(c) {
            return c;
        }
    };
    for id in 0..rng.gen_range(1..=4) {
        let skills = BTreeMap::from([("rescue".to_string(), rng.gen_range(0.0..1.0))]);
        let pos = cell(&mut rng);
        s.agents.push(AgentSpec { id, pos, energy: 60.0, max_energy: 60.0, move_period: rng.gen_range(1..=2), skills });
    }
    for id in 0..rng.gen_range(0..=4) {
        let requires = BTreeMap::from([("rescue".to_string(), rng.gen_range(0.0..0.8))]);
        let pos = cell(&mut rng);
        s.tasks.push(TaskSpec { id, pos, reward: 10.0, deadline: Some(rng.gen_range(10..60)), requires });
    }
    s.world.omission_prob = 0.1;
    s.bus.loss_prob = rng.gen_range(0.0..0.2);
    s
}

#[test]
fn random_usar_runs_keep_world_invariants() {
    for seed in 0..40 {
        let s = random_usar(seed);
        let r = run(&s, seed).unwrap();
        assert_eq!(metrics_from_trace(&r.trace), r.metrics);
        assert_eq!(run(&s, seed).unwrap().trace, r.trace, "seed {seed} is not deterministic");

        let mut pos: BTreeMap<u32, Cell> = BTreeMap::new();
        let mut assigned = BTreeSet::new();
        let mut last_tick = 0;
        for e in &r.trace.events {
            assert!(e.tick >= last_tick);
            last_tick = e.tick;
            match e.event {
                EventKind::Spawn(Spawned::Agent { id, pos: p, .. }) => {
                    pos.insert(id, p);
                }
                EventKind::Move { agent, from, to, energy, .. } => {
                    assert_eq!(pos[&agent], from);
                    assert!(from.manhattan(to) == 1 && energy >= 0.0);
                    pos.insert(agent, to);
                    let cells: BTreeSet<Cell> = pos.values().copied().collect();
                    assert_eq!(cells.len(), pos.len(), "seed {seed}: two agents share a cell at tick {}", e.tick);
                }
                EventKind::Assign { task, agent } => {
                    assigned.insert((task, agent));
                }
                EventKind::Rescue { task, agent, .. } => assert!(assigned.contains(&(task, agent))),
                _ => {}
            }
        }
        if let Metrics::Usar(m) = r.metrics {
            assert!(m.victims_rescued <= m.victims_total);
        }
    }
}

#[test]
fn learning_curve_is_deterministic_and_counts_grow() {
    let leaf = GutNode::leaf("root", 0, &["a", "b"], &["x", "y"], PayoffFn::constant(Matrix::filled(2, 2, 0.0)));
    let mut s = Scenario::new("e", Mode::Explore, 8, 5, 40);
    s.agents = vec![AgentSpec { id: 0, pos: Cell::new(0, 2), energy: 50.0, max_energy: 50.0, move_period: 1, skills: BTreeMap::new() }];
    s.adversaries = vec![sass_core::scenario::AdversarySpec { id: 0, pos: Cell::new(3, 2) }];
    s.gut = Some(sass_core::scenario::GutSpec { root: leaf, hidden: BTreeMap::new(), default_hidden: 0.6, win_value: 1.0, loss_value: -1.0 });
    s.explore = Some(sass_core::scenario::ExploreConfig {
        goal: Cell::new(6, 2),
        radius: 1.0,
        shape: sass_core::atomic::Shape::RegularPolygon,
        encounter_radius: 1,
    });
    let a = adapt_loop(&s, 12, 5).unwrap();
    assert_eq!(a, adapt_loop(&s, 12, 5).unwrap());
    assert!(adapt_loop(&s, 0, 5).unwrap().curve.is_empty());
    let draws: u64 = a.posterior.cells.values().map(|c| c.alpha + c.beta - 2).sum();
    assert_eq!(draws, 12, "one draw per episode on a one-level tree");
}
