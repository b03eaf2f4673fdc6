use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use gg_core::scorer::StubBackend;
use gg_core::sim::{run_traced, Scenario};
use gg_core::{
    bind_items, build_completion_set, load_map, parse_program, simulate_human, DurationTable, OccupancyTrace,
    PolicyKind, SemanticMap, SimConfig,
};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn map(env: &str) -> SemanticMap {
    load_map(fixtures().join(format!("{env}.map.json"))).unwrap()
}

fn trace(map: &SemanticMap, program: &str, horizon: u32) -> OccupancyTrace {
    let text = std::fs::read_to_string(fixtures().join(format!("{program}.txt"))).unwrap();
    let program = parse_program(program, &text, &DurationTable::default()).unwrap();
    let binding = bind_items(&program, map, 0).unwrap();
    simulate_human(&program, &binding, map, horizon).unwrap()
}

#[test]
fn fixture_sizes() {
    for (env, labels, items) in [("env0", 115, 443), ("env1", 98, 357), ("env2", 100, 324)] {
        let m = map(env);
        assert_eq!(m.n_rooms(), 3, "{env}");
        assert_eq!(m.items().len(), items, "{env}");
        assert_eq!(build_completion_set(&m).len(), labels, "{env}");
        let distinct: BTreeSet<&str> = m.items().iter().map(|i| i.label.as_str()).collect();
        assert_eq!(distinct.len(), labels);
    }
}

#[test]
fn every_program_runs_in_every_environment() {
    for env in ["env0", "env1", "env2"] {
        let m = map(env);
        for prog in ["prog_a", "prog_b", "prog_c", "prog_linger"] {
            let t = trace(&m, prog, 500);
            assert_eq!(t.rooms.len(), 501);
            assert!(t.log.windows(2).all(|w| w[0].time < w[1].time), "{env}/{prog}");
            assert!(t.rooms.iter().all(|&r| r < 3));
        }
    }
}

/// Recomputes disturbance and coverage from the robot's per-step rooms,
/// stepping slot by slot.
fn walk(robot: &[usize], human: &[usize], room_time: usize) -> (u32, Option<u32>) {
    let mut d = 0;
    let mut per_room = [0usize; 3];
    let mut covered_at = None;
    for (slot, chunk) in robot.chunks(room_time).enumerate() {
        let room = chunk[0];
        assert!(chunk.iter().all(|&r| r == room), "robot moved inside slot {slot}");
        for (k, _) in chunk.iter().enumerate() {
            let t = slot * room_time + k;
            if human[t] == room {
                d += 1;
            }
            per_room[room] += 1;
            if covered_at.is_none() && per_room.iter().all(|&x| x >= room_time) {
                covered_at = Some(t as u32 + 1);
            }
        }
    }
    (d, covered_at)
}

#[test]
fn metrics_agree_with_an_independent_walk() {
    let m = map("env1");
    let t = trace(&m, "prog_c", 300);
    let backend = StubBackend::constant(0.5);
    let scenario = Scenario::new(&m, &t, &backend);
    for room_time in [7, 25, 60] {
        let cfg = SimConfig {
            room_time,
            horizon: 300,
            master_seed: 17,
        };
        for policy in PolicyKind::ALL {
            for restart in 0..25 {
                let run = run_traced(&scenario, policy, &cfg, restart).unwrap();
                assert_eq!(run.robot_rooms.len(), 300);
                let (d, tc) = walk(&run.robot_rooms, &t.rooms, room_time as usize);
                assert_eq!(run.metrics.d_t, d);
                assert_eq!(run.metrics.t_c, tc);
                assert_eq!(run.metrics.failed, tc.is_none());
                assert_eq!(run.metrics.start_room, run.robot_rooms[0]);
                // one decision per slot boundary inside the horizon
                assert_eq!(run.decisions.len(), (299 / room_time) as usize);
            }
        }
    }
}
