//! Acceptance suite: one PASS/FAIL line per criterion, with the measured
//! value and runtime against its budget. Exits non-zero if any line fails.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use common::{brute_force_frechet, curve, shunt_through_netlist};
use pdnpulse_core::campaign::CampaignOutcome;
use pdnpulse_core::sparams::z_to_s;
use pdnpulse_core::touchstone::{DataFormat, FreqUnit, ParamKind};
use pdnpulse_core::{
    frechet, parse_touchstone, run_campaign, s_to_z, shunt_through_z21, solve_at_frequency, solve_z, toy_z11, toy_z13,
    write_touchstone, CMatrix, CampaignConfig, Complex64, FrequencyGrid, Provenance, ToyNetwork, TouchstoneDocument,
    TouchstoneOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn config(name: &str) -> CampaignConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    CampaignConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

fn toy_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mut element = || {
            let re = rng.random_range(0.0..10.0);
            let im = rng.random_range(-10.0..10.0);
            Complex64::new(re, im)
        };
        let t = ToyNetwork { za: element(), zb: element(), zc: element(), zd: element(), ze: element() };
        let f = 10f64.powf(rng.random_range(5.0..9.0));
        let z = solve_at_frequency(&t.to_netlist(f), f).expect("toy network solves");
        worst = worst.max(rel(z[(0, 0)], toy_z11(&t).unwrap())).max(rel(z[(0, 2)], toy_z13(&t).unwrap()));
    }
    Outcome { pass: worst <= 1e-9, detail: format!("max rel err {worst:.2e} over 100 element sets (tol 1e-9)") }
}

fn shunt_through_closure() -> Outcome {
    let grid = FrequencyGrid::default_pdn();
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let sig = solve_z(&shunt_through_netlist(seed), &grid).expect("fixture solves");
        let s = z_to_s(&sig).expect("fixture converts");
        for (zm, sm) in sig.z.iter().zip(&s.s) {
            let z21 = shunt_through_z21(sm[(1, 0)], zm[(0, 0)], zm[(1, 1)], 50.0).unwrap();
            worst = worst.max(rel(z21, zm[(1, 0)]));
        }
    }
    Outcome { pass: worst <= 1e-6, detail: format!("max rel err {worst:.2e} over 50 netlists x 1024 points (tol 1e-6)") }
}

fn frechet_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    for i in 0..1000 {
        let (na, nb) = (rng.random_range(1..=8), rng.random_range(1..=8));
        // every other pair shares an increasing abscissa like embedded profiles
        let shared = i % 2 == 0;
        let nb = if shared { na } else { nb };
        let mut pts = |n: usize| -> Vec<[f64; 2]> {
            (0..n)
                .map(|k| {
                    let u = if shared { k as f64 / n.max(2) as f64 } else { rng.random_range(-2.0..2.0) };
                    [u, rng.random_range(-3.0..3.0)]
                })
                .collect()
        };
        let (a, b) = (pts(na), pts(nb));
        if frechet(&curve(a.clone()), &curve(b.clone())).unwrap() != brute_force_frechet(&a, &b) {
            mismatches += 1;
        }
    }
    Outcome { pass: mismatches == 0, detail: format!("{mismatches} of 1000 pairs differ from enumeration") }
}

fn roundtrips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_sz: f64 = 0.0;
    for seed in 0..100 {
        let nodes = rng.random_range(1..7);
        let ports = rng.random_range(1..5);
        let sig = solve_z(&common::random_ported_network(seed, nodes, ports), &FrequencyGrid::log(3e5, 3e9, 64).unwrap())
            .expect("random network solves");
        let back = s_to_z(&z_to_s(&sig).unwrap(), Provenance::Simulated).unwrap();
        for (a, b) in back.z.iter().zip(&sig.z) {
            let scale = b.max_abs();
            for x in 0..b.dim() {
                for y in 0..b.dim() {
                    let err = (a[(x, y)] - b[(x, y)]).norm() / b[(x, y)].norm().max(scale * 1e-6);
                    worst_sz = worst_sz.max(err);
                }
            }
        }
    }
    let mut worst_ts: f64 = 0.0;
    for unit in [FreqUnit::Hz, FreqUnit::KHz, FreqUnit::MHz, FreqUnit::GHz] {
        for format in [DataFormat::Ri, DataFormat::Ma, DataFormat::Db] {
            for kind in [ParamKind::S, ParamKind::Z] {
                for _ in 0..10 {
                    let n = rng.random_range(1..=5);
                    let mut f = 0.0;
                    let freqs: Vec<f64> = (0..rng.random_range(1..8))
                        .map(|_| {
                            f += 10f64.powf(rng.random_range(3.0..9.0));
                            f
                        })
                        .collect();
                    let data: Vec<CMatrix> = freqs
                        .iter()
                        .map(|_| {
                            let v = (0..n * n)
                                .map(|_| {
                                    let m = 10f64.powf(rng.random_range(-6.0..4.0));
                                    Complex64::from_polar(m, rng.random_range(-3.1..3.1))
                                })
                                .collect();
                            CMatrix::from_row_major(n, v)
                        })
                        .collect();
                    let doc = TouchstoneDocument {
                        options: TouchstoneOptions { unit, kind, format, reference: 50.0 },
                        n_ports: n,
                        freqs,
                        data,
                        comments: vec![],
                    };
                    let back = parse_touchstone(&write_touchstone(&doc), n).expect("written document parses");
                    for (fa, fb) in back.freqs.iter().zip(&doc.freqs) {
                        worst_ts = worst_ts.max((fa - fb).abs() / fb);
                    }
                    for (a, b) in back.data.iter().zip(&doc.data) {
                        for x in 0..n {
                            for y in 0..n {
                                worst_ts = worst_ts.max(rel(a[(x, y)], b[(x, y)]));
                            }
                        }
                    }
                }
            }
        }
    }
    Outcome {
        pass: worst_sz <= 1e-9 && worst_ts <= 1e-9,
        detail: format!("S<->Z max rel err {worst_sz:.2e}, Touchstone max rel err {worst_ts:.2e} (tol 1e-9)"),
    }
}

fn arms(outcome: &CampaignOutcome) -> &[pdnpulse_core::campaign::ArmResult] {
    match outcome {
        CampaignOutcome::Arms { arms } => arms,
        _ => panic!("expected an arm sweep"),
    }
}

fn tolerance_roc(tables: &mut Vec<(String, String)>) -> Outcome {
    let outcome = run_campaign(&config("tolerance.toml")).expect("tolerance campaign runs");
    *tables = outcome.tables();
    let auc = |t: f64| arms(&outcome).iter().find(|a| a.tolerance == t).expect("arm present").roc.auc;
    let (a10, a20, a50) = (auc(0.1), auc(0.2), auc(0.5));
    Outcome {
        pass: a10 >= 0.99 && a20 >= 0.99 && a50 < a20 && a50 > 0.5,
        detail: format!("auc t=0.10 {a10:.4}, t=0.20 {a20:.4}, t=0.50 {a50:.4}"),
    }
}

fn sensitivity() -> Outcome {
    let outcome = run_campaign(&config("sensitivity.toml")).expect("sensitivity campaign runs");
    let mut pass = true;
    let mut parts = Vec::new();
    for a in arms(&outcome) {
        let need = match a.arm.as_str() {
            "reference" => 0.0,
            "sot23" => 0.95,
            _ => 0.9,
        };
        pass &= a.roc.auc >= need;
        parts.push(format!("{} {:.4}", a.arm, a.roc.auc));
    }
    Outcome { pass, detail: format!("auc {}", parts.join(", ")) }
}

fn placement() -> Outcome {
    let outcome = run_campaign(&config("placement.toml")).expect("placement campaign runs");
    let CampaignOutcome::Placement { grids } = outcome else { panic!("expected placement grids") };
    let six = grids.iter().find(|g| !g.doubled).expect("6-capacitor grid");
    let twelve = grids.iter().find(|g| g.doubled).expect("12-capacitor grid");
    let a = six.anomaly_index;
    let worst_self = (1..=6).filter(|&x| x != a).map(|x| six.cell(x, x)).fold(0.0, f64::max);
    let mut worst_straddle: f64 = 1.0;
    for x in 1..a {
        for y in a + 1..=6 {
            worst_straddle = worst_straddle.min(six.cell(x, y));
        }
    }
    Outcome {
        pass: worst_self <= 0.6 && worst_straddle >= 0.8 && twelve.mean() <= six.mean(),
        detail: format!(
            "max off-anomaly self {worst_self:.4}, min straddling transfer {worst_straddle:.4}, mean 6-cap {:.4} vs 12-cap {:.4}",
            six.mean(),
            twelve.mean()
        ),
    }
}

fn port_ablation() -> Outcome {
    let outcome = run_campaign(&config("port_ablation.toml")).expect("ablation campaign runs");
    let CampaignOutcome::PortAblation { rows } = outcome else { panic!("expected ablation rows") };
    let all = rows.iter().max_by_key(|r| r.ports.len()).expect("rows").best_accuracy;
    let singles: Vec<f64> = rows.iter().filter(|r| r.ports.len() == 1).map(|r| r.best_accuracy).collect();
    let max_single = singles.iter().copied().fold(0.0, f64::max);
    let min_single = singles.iter().copied().fold(1.0, f64::min);
    Outcome {
        pass: all >= max_single && max_single > min_single,
        detail: format!("all ports {all:.4}, single ports {min_single:.4}..{max_single:.4}"),
    }
}

fn determinism(first: &[(String, String)]) -> Outcome {
    let again = run_campaign(&config("tolerance.toml")).expect("tolerance campaign reruns").tables();
    let same = again == first;
    let bytes: usize = first.iter().map(|t| t.1.len()).sum();
    Outcome {
        pass: same && !first.is_empty(),
        detail: format!("{} tables, {bytes} bytes, identical on rerun: {same}", first.len()),
    }
}

fn knn() -> Outcome {
    let outcome = run_campaign(&config("knn.toml")).expect("knn campaign runs");
    let CampaignOutcome::Knn { result } = outcome else { panic!("expected knn result") };
    Outcome {
        pass: result.accuracy >= 0.99,
        detail: format!("accuracy {:.4} ({} of {})", result.accuracy, result.correct, result.trials),
    }
}

fn main() {
    let mut tables = Vec::new();
    let mut all = true;
    let mut run = |id: u32, name: &str, budget: Option<Duration>, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let out = f();
        let took = start.elapsed();
        let in_budget = budget.is_none_or(|b| took <= b);
        let pass = out.pass && in_budget;
        all &= pass;
        let budget_text = budget.map(|b| format!(" / {} s", b.as_secs())).unwrap_or_default();
        println!(
            "{} [{id:>2}] {name}: {} ({:.2} s{budget_text})",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64()
        );
    };
    let secs = |s| Some(Duration::from_secs(s));
    run(1, "analytic oracle", secs(5), &mut toy_oracle);
    run(2, "shunt-through closure", secs(30), &mut shunt_through_closure);
    run(3, "frechet oracle", secs(10), &mut frechet_oracle);
    run(4, "S<->Z and Touchstone roundtrips", secs(30), &mut roundtrips);
    run(5, "tolerance ROC", secs(300), &mut || tolerance_roc(&mut tables));
    run(6, "sensitivity scaling", secs(600), &mut sensitivity);
    run(7, "placement grid", secs(600), &mut placement);
    run(8, "port ablation", secs(300), &mut port_ablation);
    run(9, "determinism", None, &mut || determinism(&tables));
    run(10, "knn classification", secs(600), &mut knn);
    if !all {
        std::process::exit(1);
    }
}
