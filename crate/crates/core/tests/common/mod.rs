#![allow(dead_code)]

use pdnpulse_core::{PdnNetlist, ProfileCurve, RlcBranch, GROUND};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.random_range(lo.log10()..hi.log10()))
}

/// Lossy series R-L-C or resistor branch with physical-range values.
pub fn random_branch(rng: &mut ChaCha8Rng, id: String, a: &str, b: &str) -> RlcBranch {
    match rng.random_range(0..4) {
        0 => RlcBranch::resistor(id, a, b, log_uniform(rng, 1e-2, 1e2)),
        1 => RlcBranch::series_rlc(id, a, b, log_uniform(rng, 1e-3, 1.0), log_uniform(rng, 1e-11, 1e-8), 0.0),
        _ => RlcBranch::series_rlc(
            id,
            a,
            b,
            log_uniform(rng, 1e-3, 1.0),
            log_uniform(rng, 1e-11, 1e-8),
            log_uniform(rng, 1e-11, 1e-5),
        ),
    }
}

/// Random connected lossy network on `nodes` internal nodes: a spanning
/// tree rooted at ground plus a few extra branches.
pub fn random_network(seed: u64, nodes: usize) -> PdnNetlist {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut n = PdnNetlist::new(format!("random-{seed}"));
    let names: Vec<String> = (0..nodes).map(|i| format!("m{i}")).collect();
    for name in &names {
        n.add_node(name.clone());
    }
    for (i, name) in names.iter().enumerate() {
        let parent = if i == 0 {
            GROUND.to_string()
        } else {
            let p = rng.random_range(0..=i);
            if p == i { GROUND.to_string() } else { names[p].clone() }
        };
        let b = random_branch(&mut rng, format!("t{i}"), name, &parent);
        n.branches.push(b);
    }
    for k in 0..rng.random_range(1..=nodes) {
        let a = rng.random_range(0..nodes);
        let other = rng.random_range(0..=nodes);
        let b = if other == nodes || other == a { GROUND.to_string() } else { names[other].clone() };
        let br = random_branch(&mut rng, format!("x{k}"), &names[a], &b);
        n.branches.push(br);
    }
    n
}

/// Two-port shunt-through fixture: port 1 on a network node, port 2 on a
/// dead-end probe node reached through one series element.
pub fn shunt_through_netlist(seed: u64) -> PdnNetlist {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let nodes = rng.random_range(1..=5);
    let mut n = random_network(seed, nodes);
    n.add_node("probe");
    n.branches.push(RlcBranch::series_rlc(
        "probe-lead",
        "m0",
        "probe",
        log_uniform(&mut rng, 1e-3, 1.0),
        log_uniform(&mut rng, 1e-12, 1e-9),
        0.0,
    ));
    n.add_port("m0", 50.0);
    n.add_port("probe", 50.0);
    n
}

/// Random multi-port network with ports on distinct internal nodes.
pub fn random_ported_network(seed: u64, nodes: usize, ports: usize) -> PdnNetlist {
    let mut n = random_network(seed, nodes);
    for i in 0..ports.min(nodes) {
        n.add_port(format!("m{i}"), 50.0);
    }
    n
}

/// Frechet distance by enumerating every monotone coupling.
pub fn brute_force_frechet(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    fn d2(p: [f64; 2], q: [f64; 2]) -> f64 {
        let (du, dv) = (p[0] - q[0], p[1] - q[1]);
        du * du + dv * dv
    }
    fn walk(a: &[[f64; 2]], b: &[[f64; 2]], i: usize, j: usize, worst: f64, best: &mut f64) {
        let worst = worst.max(d2(a[i], b[j]));
        if i + 1 == a.len() && j + 1 == b.len() {
            *best = best.min(worst);
            return;
        }
        if i + 1 < a.len() {
            walk(a, b, i + 1, j, worst, best);
        }
        if j + 1 < b.len() {
            walk(a, b, i, j + 1, worst, best);
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(a, b, i + 1, j + 1, worst, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(a, b, 0, 0, f64::NEG_INFINITY, &mut best);
    best.sqrt()
}

pub fn curve(points: Vec<[f64; 2]>) -> ProfileCurve {
    ProfileCurve::new(points)
}
