//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use common::{brute_maxweight, scenario_path};
use gecs_core::capacity::CapacityRegion;
use gecs_core::cli::{sweep, SweepRow};
use gecs_core::lpf::{check_sigma_pair, lpf};
use gecs_core::netmodel::{ConflictNetwork, Graph, InterferenceModel};
use gecs_core::ratepower::LinkRadio;
use gecs_core::scenario::Model;
use gecs_core::schedulers::{gecs_decide, gmw_decide, maxweight_decide, PolicyKind, PowerDecision, SchedulerInput, TieBreaker};
use gecs_core::sim::{power_compliance, run, stability_verdict_with, step, QueueState, Stability};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_secs as f64, || {
        format!("took {:.1}s, limit {limit_secs}s", elapsed.as_secs_f64())
    })
}

fn load(name: &str) -> Result<Model, String> {
    Model::load(&scenario_path(name)).map_err(|e| e.to_string())
}

fn six_cycle_net() -> ConflictNetwork {
    ConflictNetwork::from_graph(&Graph::cycle(6), &InterferenceModel::OneHop).unwrap()
}

fn pooling_factor() -> Outcome {
    let start = Instant::now();
    let r = lpf(&six_cycle_net()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let w = &r.witness;
    ensure((r.sigma_star - 2.0 / 3.0).abs() < 1e-7, || format!("sigma* = {}", r.sigma_star))?;
    ensure(r.subgraphs.len() == 63, || format!("{} subgraphs", r.subgraphs.len()))?;
    let dominated = w.mu.iter().zip(&w.nu).all(|(m, v)| 2.0 / 3.0 * m >= v - 1e-9);
    ensure(dominated, || format!("witness mu {:?} nu {:?}", w.mu, w.nu))?;
    let holds = check_sigma_pair(&six_cycle_net(), &w.subset, &w.mu_weights, &w.nu_weights, 2.0 / 3.0)
        .map_err(|e| e.to_string())?;
    ensure(holds, || "check_sigma_pair rejected the witness".into())?;
    within(elapsed, 10)?;
    Ok(format!("sigma* = {:.9}, 63 subgraph LPs in {:.2}s", r.sigma_star, elapsed.as_secs_f64()))
}

fn golden_gecs() -> Outcome {
    let net = six_cycle_net();
    let radios = vec![LinkRadio::new(vec![0.0, 1.0], vec![0.0, 1.0], 0.5).unwrap(); 6];
    let q = [2.0, 3.0, 8.0, 5.0, 2.0, 10.0];
    let u = [1.0, 4.0, 7.0, 5.0, 3.0, 12.0];
    let input = SchedulerInput::new(&q, &u, &net, &radios).map_err(|e| e.to_string())?;
    let seeds = 256;
    for seed in 0..seeds {
        let d = gecs_decide(&input, &mut TieBreaker::seeded(seed));
        ensure(d.rate == [1.0, 0.0, 1.0, 0.0, 0.0, 0.0], || format!("seed {seed}: r = {:?}", d.rate))?;
    }
    let d = gecs_decide(&input, &mut TieBreaker::Lexicographic);
    ensure(d.rate == [1.0, 0.0, 1.0, 0.0, 0.0, 0.0], || format!("lexicographic: r = {:?}", d.rate))?;
    Ok(format!("r = [1,0,1,0,0,0] for {seeds} seeds and lexicographic ties"))
}

fn threshold_scaling() -> Outcome {
    let model = load("sixcycle.toml")?;
    let region = model.region().map_err(|e| e.to_string())?;
    let direction = match &model.load_base {
        gecs_core::scenario::LoadBase::Direction(d) => d.clone(),
        other => return Err(format!("scenario load base is {other:?}, expected a direction")),
    };
    let rho_star = region.boundary_scale(&direction).map_err(|e| e.to_string())?.rho;
    let sigma = lpf(&model.net).map_err(|e| e.to_string())?.sigma_star;
    let unit: Vec<f64> = direction.iter().map(|d| d * rho_star).collect();
    let horizon = 1_000_000;
    let p_avg = model.p_avg();
    let inner = 0.95 * sigma;

    let mut notes = Vec::new();
    for seed in [1, 2, 3] {
        let s = model
            .scenario(&unit, PolicyKind::Gecs, inner, seed, horizon)
            .map_err(|e| e.to_string())?;
        let m = run(&s).map_err(|e| e.to_string())?;
        let v = stability_verdict_with(&m, model.window, model.thresholds).map_err(|e| e.to_string())?;
        let pc = power_compliance(&m, &p_avg, 0.01);
        ensure(v.verdict == Stability::Stable, || {
            format!("load {inner:.4} seed {seed}: {} (slope {:.4})", v.verdict.name(), v.normalized_slope)
        })?;
        ensure(pc.all_ok(), || format!("load {inner:.4} seed {seed}: power {:?}", m.avg_power))?;
        notes.push(format!("{:.4}", v.normalized_slope));
    }
    let outer = 1.05;
    let mut outer_notes = Vec::new();
    for seed in [1, 2, 3] {
        let s = model
            .scenario(&unit, PolicyKind::Gecs, outer, seed, horizon)
            .map_err(|e| e.to_string())?;
        let m = run(&s).map_err(|e| e.to_string())?;
        let v = stability_verdict_with(&m, model.window, model.thresholds).map_err(|e| e.to_string())?;
        ensure(v.verdict == Stability::Unstable, || {
            format!("load {outer} seed {seed}: {} (slope {:.4})", v.verdict.name(), v.normalized_slope)
        })?;
        outer_notes.push(format!("{:.3}", v.normalized_slope));
    }
    Ok(format!(
        "rho* = {rho_star:.4}; stable and compliant at {inner:.4} (slopes {}), unstable at {outer} (slopes {})",
        notes.join(", "),
        outer_notes.join(", ")
    ))
}

/// Every labelled conflict graph on `n` links.
fn all_conflict_graphs(n: usize) -> Vec<Vec<Vec<bool>>> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    (0u32..(1 << pairs.len()))
        .map(|mask| {
            let mut m = vec![vec![false; n]; n];
            for (i, &(a, b)) in pairs.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    m[a][b] = true;
                    m[b][a] = true;
                }
            }
            m
        })
        .collect()
}

fn optimality_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let graphs: Vec<Vec<Vec<bool>>> = all_conflict_graphs(2).into_iter().chain(all_conflict_graphs(3)).collect();
    let per_graph = 120;
    let mut cases = 0;
    for m in &graphs {
        let n = m.len();
        let net = ConflictNetwork::from_conflict_sets(
            (0..n).map(|i| (0..n).filter(|&j| m[i][j]).collect()).collect(),
        )
        .unwrap();
        for _ in 0..per_graph {
            let mut levels = Vec::new();
            let mut rates = Vec::new();
            for _ in 0..n {
                let k = rng.random_range(2..=3);
                let (mut p, mut r) = (vec![0.0], vec![0.0]);
                for _ in 1..k {
                    p.push(p.last().unwrap() + f64::from(rng.random_range(1..=5)));
                    r.push(r.last().unwrap() + f64::from(rng.random_range(1..=4)));
                }
                levels.push(p);
                rates.push(r);
            }
            let radios: Vec<LinkRadio> = (0..n)
                .map(|l| LinkRadio::new(levels[l].clone(), rates[l].clone(), 1.0).unwrap())
                .collect();
            let q: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..=20))).collect();
            let u: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..=20))).collect();

            let (best, power) = brute_maxweight(m, &levels, &rates, &q, &u);
            let input = SchedulerInput::new(&q, &u, &net, &radios).map_err(|e| e.to_string())?;
            let mw = maxweight_decide(&input).map_err(|e| e.to_string())?;
            let case = || format!("graph {m:?} levels {levels:?} rates {rates:?} q {q:?} u {u:?}");
            ensure(mw.power == power, || format!("maxweight {:?} vs oracle {power:?}; {}", mw.power, case()))?;
            ensure(mw.objective(&q, &u) == best, || format!("maxweight value {} vs {best}; {}", mw.objective(&q, &u), case()))?;
            let seed = rng.random();
            for (name, d) in [
                ("gecs", gecs_decide(&input, &mut TieBreaker::seeded(seed))),
                ("gmw", gmw_decide(&input, &mut TieBreaker::seeded(seed))),
            ] {
                ensure(d.objective(&q, &u) <= best, || format!("{name} beats the optimum; {}", case()))?;
            }
            cases += 1;
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, 30)?;
    Ok(format!("{cases} cases over {} networks in {:.2}s", graphs.len(), elapsed.as_secs_f64()))
}

fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let d: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        if d.iter().any(|&x| x > 1e-3) {
            return d;
        }
    }
}

fn capacity_properties() -> Outcome {
    let start = Instant::now();
    let model = load("sixcycle.toml")?;
    let region = model.region().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..100 {
        let d = random_direction(&mut rng, 6);
        let rho = region.boundary_scale(&d).map_err(|e| e.to_string())?.rho;
        for (f, inside) in [(0.25, true), (0.5, true), (0.9, true), (0.999, true), (1.001, false), (1.1, false), (2.0, false)] {
            let lambda: Vec<f64> = d.iter().map(|x| x * rho * f).collect();
            let got = region.membership(&lambda).map_err(|e| e.to_string())?.is_inside();
            ensure(got == inside, || format!("direction {i} {d:?}: factor {f} inside = {got}"))?;
        }
    }

    for i in 0..20 {
        let link = rng.random_range(0..6);
        let radio = &model.radios[link];
        let extra = loop {
            let p = (rng.random_range(0.1..16.0f64) * 100.0).round() / 100.0;
            if radio.level_index(p).is_err() {
                break p;
            }
        };
        let mut radios = model.radios.clone();
        radios[link] = radio.with_level(&model.curves[link], extra).map_err(|e| e.to_string())?;
        let grown = CapacityRegion::new(&model.net, &radios).map_err(|e| e.to_string())?;
        let d = random_direction(&mut rng, 6);
        let before = region.boundary_scale(&d).map_err(|e| e.to_string())?.rho;
        let after = grown.boundary_scale(&d).map_err(|e| e.to_string())?.rho;
        ensure(after >= before - 1e-9, || format!("augmentation {i}: level {extra} on link {link} shrank {before} to {after}"))?;
        let lambda: Vec<f64> = d.iter().map(|x| x * before).collect();
        ensure(grown.membership(&lambda).map_err(|e| e.to_string())?.is_inside(), || {
            format!("augmentation {i}: old boundary point left the region")
        })?;
    }

    let single = load("single_link.toml")?;
    for (p_avg, inside) in [(0.75, true), (0.5, false)] {
        let r = &single.radios[0];
        let radio = LinkRadio::new(r.levels().to_vec(), r.rates().to_vec(), p_avg).map_err(|e| e.to_string())?;
        let got = CapacityRegion::new(&single.net, &[radio])
            .and_then(|reg| reg.membership(&[1.0]))
            .map_err(|e| e.to_string())?
            .is_inside();
        ensure(got == inside, || format!("single link, budget {p_avg}: inside = {got}"))?;
    }
    let elapsed = start.elapsed();
    within(elapsed, 60)?;
    Ok(format!(
        "100 directions monotone, 20 augmentations non-shrinking, single link inside/outside as expected ({:.2}s)",
        elapsed.as_secs_f64()
    ))
}

fn power_contrast() -> Outcome {
    let model = load("single_link.toml")?;
    let unit = model.unit_load_means().map_err(|e| e.to_string())?;
    let horizon = 100_000;
    let run_policy = |p| {
        let s = model.scenario(&unit, p, 1.0, 1, horizon).map_err(|e| e.to_string())?;
        run(&s).map_err(|e| e.to_string())
    };
    let gms = run_policy(PolicyKind::Gms)?;
    ensure((gms.avg_power[0] - 1.0).abs() < 1e-3, || format!("gms avg power {}", gms.avg_power[0]))?;
    ensure(!power_compliance(&gms, &model.p_avg(), 0.01).all_ok(), || "gms reported compliant".into())?;

    let gecs = run_policy(PolicyKind::Gecs)?;
    ensure(power_compliance(&gecs, &model.p_avg(), 0.01).all_ok(), || {
        format!("gecs avg power {}", gecs.avg_power[0])
    })?;
    let v = stability_verdict_with(&gecs, model.window, model.thresholds).map_err(|e| e.to_string())?;
    ensure(v.verdict == Stability::Stable, || format!("gecs verdict {}", v.verdict.name()))?;
    let served = gecs.total_served[0] / horizon as f64;
    ensure((served - 1.0).abs() < 1e-3, || format!("gecs throughput {served}"))?;
    Ok(format!(
        "gms avg power {:.4} (budget 0.75), gecs avg power {:.4}, throughput {served:.4}, stable",
        gms.avg_power[0], gecs.avg_power[0]
    ))
}

fn policy_ordering() -> Outcome {
    let model = load("sixcycle.toml")?;
    ensure(model.seeds.len() >= 5, || format!("{} seeds configured", model.seeds.len()))?;
    let rows = sweep(&model, &[PolicyKind::Gecs, PolicyKind::Gmw], model.horizon, None).map_err(|e| e.to_string())?;
    let at = |rho: f64| rows.iter().filter(move |r: &&SweepRow| r.rho == rho);
    let stable: Vec<f64> = model
        .loads
        .iter()
        .copied()
        .filter(|&rho| at(rho).all(|r| r.verdict == Some(Stability::Stable)))
        .collect();
    ensure(stable.len() >= 2, || format!("only {} stable load points", stable.len()))?;
    let mean = |rho: f64, p: PolicyKind| {
        let v: Vec<f64> = at(rho).filter(|r| r.policy == p).map(|r| r.avg_sum_q).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let mut detail = Vec::new();
    let mut ok = true;
    for &rho in &stable[stable.len() - 2..] {
        let (g, m) = (mean(rho, PolicyKind::Gecs), mean(rho, PolicyKind::Gmw));
        ok &= g < m;
        detail.push(format!("load {rho}: gecs {g:.2} vs gmw {m:.2}"));
    }
    let detail = format!("{} ({} seeds, T = {})", detail.join("; "), model.seeds.len(), model.horizon);
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn simulator_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in 0..50 {
        let n = rng.random_range(1..=4);
        let q: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..=10))).collect();
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..6.0)).collect();
        // Half the cases force both clamps.
        let clamp = case % 2 == 0;
        let rate: Vec<f64> = (0..n)
            .map(|l| if clamp { q[l] + f64::from(rng.random_range(1..=3)) } else { f64::from(rng.random_range(0..=3)) })
            .collect();
        let p_avg: Vec<f64> = (0..n)
            .map(|l| if clamp { u[l] + rng.random_range(0.1..2.0) } else { rng.random_range(0.1..3.0) })
            .collect();
        let power: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..=7))).collect();
        let arrivals: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..=4))).collect();
        let next = step(&QueueState { q: q.clone(), u: u.clone() }, &PowerDecision { power: power.clone(), rate: rate.clone() }, &arrivals, &p_avg);
        for l in 0..n {
            let q_hand = if q[l] > rate[l] { q[l] - rate[l] } else { 0.0 } + arrivals[l];
            let u_hand = if u[l] > p_avg[l] { u[l] - p_avg[l] } else { 0.0 } + power[l];
            ensure(next.q[l] == q_hand && next.u[l] == u_hand, || {
                format!("case {case} link {l}: got ({}, {}), expected ({q_hand}, {u_hand})", next.q[l], next.u[l])
            })?;
        }
    }

    let dir = std::env::temp_dir().join(format!("gecs-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let scenario = scenario_path("sixcycle.toml");
    let invoke = |tag: &str| -> Result<(Vec<u8>, Vec<u8>), String> {
        let trace = dir.join(format!("trace-{tag}.csv"));
        let out = Command::new(env!("CARGO_BIN_EXE_gecs"))
            .args(["simulate", scenario.to_str().unwrap(), "--policy", "gecs", "--rho", "0.8", "--seed", "11"])
            .args(["--horizon", "20000", "--trace", trace.to_str().unwrap()])
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
        Ok((out.stdout, std::fs::read(&trace).map_err(|e| e.to_string())?))
    };
    let a = invoke("a")?;
    let b = invoke("b")?;
    let _ = std::fs::remove_dir_all(&dir);
    ensure(a == b, || "two invocations differ".into())?;
    Ok(format!("50 single-slot cases exact; two processes agree on {} trace bytes", a.1.len()))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 8] = [
        (1, "six-cycle pooling factor is 2/3 with a witness", pooling_factor),
        (2, "golden GECS decision is seed independent", golden_gecs),
        (3, "GECS stable inside the pooled region, unstable beyond it", threshold_scaling),
        (4, "maxweight matches exhaustive search; greedy never beats it", optimality_oracle),
        (5, "capacity region monotone, grows with levels, single-link budgets", capacity_properties),
        (6, "GECS meets the power budget where fixed-power GMS overspends", power_contrast),
        (7, "GECS backlog below GMW at the top two stable loads", policy_ordering),
        (8, "step equations exact and runs bit-deterministic across processes", simulator_contract),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n} PASS [{secs:.1}s] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} FAIL [{secs:.1}s] {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
