use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use harl_core::baselines::{form_platoons, BaselineConfig, FcfsController, StopLineInterlock};
use harl_core::control::{run_episode, Controller};
use harl_core::harl::compose_action;
use harl_core::reservation::{reassignment_pass, ReservationConfig, ReservationRequest, Status};
use harl_core::sim::events::EventKind;
use harl_core::sim::VehicleLimits;
use harl_core::{build_intersection, Controls, IntersectionSpec, VehicleId, VehicleKind, World, WorldConfig, Zone};

fn intersection() -> Arc<harl_core::Intersection> {
    Arc::new(build_intersection(&IntersectionSpec::default()).unwrap())
}

fn request() -> impl Strategy<Value = (Vec<(usize, f64)>, f64, f64, bool, bool)> {
    (
        proptest::collection::btree_map(0usize..6, -3.0f64..50.0, 1..4),
        prop_oneof![1 => 0.0f64..0.1, 9 => 0.1f64..15.0],
        3.0f64..6.0,
        any::<bool>(),
        prop::bool::weighted(0.9),
    )
        .prop_map(|(claims, v, l, prev, part)| {
            let mut c: Vec<(usize, f64)> = claims.into_iter().collect();
            c.sort_by(|a, b| a.1.total_cmp(&b.1));
            (c, v, l, prev, part)
        })
}

fn requests(raw: Vec<(Vec<(usize, f64)>, f64, f64, bool, bool)>) -> Vec<ReservationRequest> {
    raw.into_iter()
        .enumerate()
        .map(|(i, (claims, speed, length, prev, participating))| ReservationRequest {
            id: VehicleId(i as u64 + 1),
            priority: claims.last().unwrap().1,
            claims,
            speed,
            length,
            previously_assigned: prev,
            participating,
        })
        .collect()
}

fn cells(r: &ReservationRequest, cfg: &ReservationConfig) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for &(p, d) in &r.claims {
        let (s, e) = (d / r.speed, (d + r.length) / r.speed);
        for b in 0..cfg.horizon_bins {
            if s < (b + 1) as f64 * cfg.bin_duration && e > b as f64 * cfg.bin_duration {
                out.insert((p, b));
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn assigned_vehicles_never_share_cells(raw in proptest::collection::vec(request(), 1..12)) {
        let cfg = ReservationConfig::default();
        let reqs = requests(raw);
        let pass = reassignment_pass(6, &cfg, &reqs);
        let assigned: Vec<_> = reqs.iter().filter(|r| pass.statuses[&r.id].status == Status::Assigned).collect();
        for (i, a) in assigned.iter().enumerate() {
            for b in &assigned[i + 1..] {
                prop_assert!(cells(a, &cfg).is_disjoint(&cells(b, &cfg)));
            }
        }
        for (p, b, _) in pass.table.occupied() {
            prop_assert!(p < 6 && b < cfg.horizon_bins);
        }
    }

    #[test]
    fn reassignment_is_idempotent(raw in proptest::collection::vec(request(), 1..12)) {
        let cfg = ReservationConfig::default();
        let reqs = requests(raw);
        let a = reassignment_pass(6, &cfg, &reqs);
        let b = reassignment_pass(6, &cfg, &reqs);
        prop_assert_eq!(a.statuses, b.statuses);
        prop_assert_eq!(a.table, b.table);
        prop_assert_eq!(a.lc, b.lc);
    }

    #[test]
    fn composed_action_stays_in_envelope(
        a_up in 0.0f64..=2.0,
        a_low in -0.55f64..=0.4,
        v in 0.0f64..=15.0,
        hold in any::<bool>(),
        lower_steps in 1u32..6,
        multiplier in 1u32..6,
    ) {
        let lim = VehicleLimits::default();
        let dv = compose_action(a_up, a_low, multiplier, lower_steps, v, hold, &lim, 0.2);
        prop_assert!((-1.0..=0.5).contains(&dv));
        prop_assert!((0.0..=15.0 + 1e-12).contains(&(v + dv)));
        if hold {
            prop_assert_eq!(dv, 0.0);
        }
    }

    #[test]
    fn platoons_partition_the_queue(
        raw in proptest::collection::vec((0usize..3, 0.0f64..4.0), 0..40),
        gap in 0.5f64..4.0,
        max in 1usize..10,
    ) {
        let mut t = 0.0;
        let queue: Vec<(VehicleId, usize, f64)> = raw
            .iter()
            .enumerate()
            .map(|(i, &(c, dt))| {
                t += dt;
                (VehicleId(i as u64), c, t)
            })
            .collect();
        let groups = form_platoons(&queue, gap, max);
        let flat: Vec<VehicleId> = groups.iter().flat_map(|g| g.members.clone()).collect();
        prop_assert_eq!(flat, queue.iter().map(|q| q.0).collect::<Vec<_>>());
        let by_id: BTreeMap<VehicleId, (usize, f64)> = queue.iter().map(|&(id, c, a)| (id, (c, a))).collect();
        for g in &groups {
            prop_assert!(!g.members.is_empty() && g.members.len() <= max);
            for w in g.members.windows(2) {
                let (c0, a0) = by_id[&w[0]];
                let (c1, a1) = by_id[&w[1]];
                prop_assert_eq!(c0, g.connection);
                prop_assert_eq!(c1, g.connection);
                prop_assert!(a1 - a0 <= gap);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn geometry_invariants_hold_across_specs(width in 3.0f64..3.8, margin in 1.0f64..4.0) {
        let spec = IntersectionSpec { lane_width: width, inner_box_half_extent: 2.0 * width + margin, ..IntersectionSpec::default() };
        let ix = build_intersection(&spec).unwrap();
        let again = build_intersection(&spec).unwrap();
        for a in 0..ix.connections.len() {
            let c = &ix.connections[a];
            prop_assert_eq!(&c.conflicts, &again.connections[a].conflicts);
            for &(_, d) in &c.conflicts {
                prop_assert!(d >= 0.0 && d <= c.length());
            }
            for b in 0..ix.connections.len() {
                let mut ab = ix.shared_points(a, b).to_vec();
                let mut ba = ix.shared_points(b, a).to_vec();
                ab.sort_unstable();
                ba.sort_unstable();
                prop_assert_eq!(ab, ba);
            }
        }
    }

    /// Random clamped commands to every CAV: speeds stay within bounds and
    /// nobody moves backward.
    #[test]
    fn vehicles_never_reverse_or_exceed_limits(seed in any::<u64>(), flow in 200.0f64..900.0, hv in 0.0f64..1.0) {
        let mut w = World::new(intersection(), WorldConfig { seed, flow_rate: flow, hv_fraction: hv, ..WorldConfig::default() });
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut last: BTreeMap<VehicleId, f64> = BTreeMap::new();
        for _ in 0..600 {
            let mut c = Controls::default();
            let lim = w.config().limits.clone();
            for v in w.vehicles().iter().filter(|v| v.kind == VehicleKind::Cav) {
                c.dv.insert(v.id, lim.clamp_dv(rng.random_range(-2.0..=1.0), v.v, 0.2));
            }
            w.step(&c);
            for v in w.vehicles() {
                prop_assert!((0.0..=15.0).contains(&v.v), "{:?} speed {}", v.id, v.v);
                if let Some(&s0) = last.get(&v.id) {
                    prop_assert!(v.s >= s0);
                }
                last.insert(v.id, v.s);
            }
        }
        prop_assert!(w.audit().clean());
    }

    /// Among vehicles whose connections conflict, FCFS grants in arrival
    /// order. Forced grants (a vehicle found past its line) are excluded.
    #[test]
    fn fcfs_grants_follow_arrival_order(seed in any::<u64>(), flow in 300.0f64..900.0, hv in 0.0f64..0.8) {
        let ix = intersection();
        let mut w = World::new(ix.clone(), WorldConfig { seed, flow_rate: flow, hv_fraction: hv, ..WorldConfig::default() });
        let mut ctl = FcfsController::vtl(&w, &BaselineConfig::default());
        let log = run_episode(&mut w, &mut ctl, 240.0).unwrap();
        let interlock = StopLineInterlock::new(&ix, w.config().limits.width);

        let mut connection = BTreeMap::new();
        let mut arrival = BTreeMap::new();
        let mut granted = BTreeMap::new();
        let mut forced = BTreeSet::new();
        for e in &log.events {
            match &e.kind {
                EventKind::Spawn { vehicle, connection: c, .. } => {
                    connection.insert(*vehicle, *c);
                }
                EventKind::Zone { vehicle, zone: Zone::OptimizationArea } => {
                    arrival.entry(*vehicle).or_insert(e.time);
                }
                EventKind::Control { vehicle: Some(v), action, .. } if action == "grant" => {
                    granted.entry(*v).or_insert(e.step);
                }
                EventKind::Control { vehicle: Some(v), action, .. } if action == "forced_grant" => {
                    forced.insert(*v);
                }
                _ => {}
            }
        }
        let ids: Vec<VehicleId> = granted.keys().copied().filter(|v| !forced.contains(v) && arrival.contains_key(v)).collect();
        prop_assert!(ids.len() > 10);
        for &a in &ids {
            for &b in &ids {
                if interlock.conflicts(connection[&a], connection[&b]) && (arrival[&a], a) < (arrival[&b], b) {
                    prop_assert!(granted[&a] <= granted[&b], "{:?} arrived first but was granted after {:?}", a, b);
                }
            }
        }
    }

    #[test]
    fn platoons_never_exceed_eight(seed in any::<u64>(), flow in 600.0f64..1200.0) {
        let mut w = World::new(intersection(), WorldConfig { seed, flow_rate: flow, hv_fraction: 0.0, ..WorldConfig::default() });
        let mut ctl = FcfsController::platoon(&w, &BaselineConfig::default());
        let mut largest = 0;
        for _ in 0..1500 {
            largest = ctl.head_groups(&w).iter().map(|g| g.members.len()).max().unwrap_or(0).max(largest);
            prop_assert!(largest <= 8);
            let c = ctl.control(&w).unwrap();
            let ev = w.step(&c);
            ctl.observe(&w, &ev).unwrap();
        }
    }
}
