//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fails.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;
use serde_json::Value;

use fpt_exact::baselines::coupled_pair;
use fpt_exact::bm_fpt::{inverse_gaussian_cdf, sample_fpt_constant, sample_fpt_linear};
use fpt_exact::cli::{parse_config, run_experiment};
use fpt_exact::exact::{self, bridge_step, choose_split_count, iteration_bound_linear, thinning_pass, BridgeState};
use fpt_exact::numerics::normal_cdf;
use fpt_exact::parallel::map_streams;
use fpt_exact::problems::{example1, example2};
use fpt_exact::stats::{ks_one_sample, ks_two_sample, SummaryStats};

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: String) -> Outcome {
    Outcome { ok, detail }
}

/// Count of places where `xs` goes down.
fn inversions(xs: &[f64]) -> usize {
    xs.windows(2).filter(|w| w[1] < w[0]).count()
}

/// Count of places where `xs` goes up.
fn rises(xs: &[f64]) -> usize {
    xs.windows(2).filter(|w| w[1] > w[0]).count()
}

fn run_cli(text: &str, dir: &Path, workers: usize) -> Value {
    let cfg = parse_config(text).expect("config");
    run_experiment(&cfg, dir, workers).expect("run");
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn proposal_samplers() -> Outcome {
    let n = 100_000;
    let b = 1.0;
    let xs: Vec<f64> = map_streams(n, 101, 0, |_, r| Ok(sample_fpt_constant(b, r)?.time)).unwrap();
    let c = ks_one_sample(&xs, |t| 2.0 * normal_cdf(-b / t.sqrt())).unwrap();
    let (a, bl) = (-1.0, 1.0);
    let ys: Vec<f64> = map_streams(n, 102, 0, |_, r| Ok(sample_fpt_linear(a, bl, r)?.time)).unwrap();
    let l = ks_one_sample(&ys, |t| inverse_gaussian_cdf(-bl / a, bl * bl, t)).unwrap();
    outcome(
        c.p_value > 0.01 && l.p_value > 0.01,
        format!("constant p={:.3}, linear p={:.3}", c.p_value, l.p_value),
    )
}

fn example1_agreement(dir: &Path) -> Outcome {
    let s = run_cli(r#"{"experiment":"benchmark","n":10000,"seed":1}"#, dir, 0);
    let rows = s["comparison"].as_array().unwrap();
    let pvals = |m: &str| -> Vec<f64> {
        rows.iter()
            .filter(|r| r["method"] == m)
            .map(|r| r["ks_p"].as_f64().unwrap())
            .collect()
    };
    let (e, i) = (pvals("euler"), pvals("improved_euler"));
    let fine = *i.last().unwrap();
    let coarse = i[0].max(e[0]);
    let ok = fine > 1e-3 && coarse < 1e-6 && inversions(&e) <= 1 && inversions(&i) <= 1;
    outcome(
        ok,
        format!(
            "improved p(2^-10)={fine:.4}, max p(2^-4)={coarse:.2e}, inversions euler={} improved={}",
            inversions(&e),
            inversions(&i)
        ),
    )
}

fn acceptance_rate_identity() -> Outcome {
    let (k, a, b, x0) = (1.6f64, -1.0, 0.5, 0.0);
    let p = example1(k, a, b, x0, None).unwrap();
    let props: Vec<f64> = map_streams(10_000, 301, 0, |_, r| Ok(exact::sample(&p, r)?.proposals as f64)).unwrap();
    let s = SummaryStats::from_sample(&props).unwrap();
    let anti = |x: f64| k * x - x.cos();
    let target = (anti(b) - anti(x0)).exp();
    let bound = iteration_bound_linear(a, b, 6.48).unwrap();
    let ok = (s.mean - target).abs() <= 3.0 * s.std_error() && s.mean <= bound && (bound - 3.928).abs() < 1e-3;
    outcome(
        ok,
        format!("mean proposals {:.4} +- {:.4} vs {target:.4}, bound {bound:.4}", s.mean, s.std_error()),
    )
}

fn example2_moments(dir: &Path) -> Outcome {
    let s = run_cli(r#"{"experiment":"example2","n":5000,"seed":4,"epsilon":0.0625}"#, dir, 0);
    let exact_mean = s["stats"]["mean"].as_f64().unwrap();
    let exact_var = s["stats"]["variance"].as_f64().unwrap();
    let exact_times: Vec<f64> = fs::read_to_string(dir.join("samples.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let p = example2(1.6, 1.0, 1.0, 0.0, None, None).unwrap();
    let grid: Vec<f64> = map_streams(5000, 402, 0, |_, r| {
        Ok(coupled_pair(&p.sde, &p.threshold, 2f64.powi(-10), 20.0, r)?.1)
    })
    .unwrap()
    .iter()
    .filter(|d| d.finite)
    .map(|d| d.time)
    .collect();
    let g = SummaryStats::from_sample(&grid).unwrap();
    let ks = ks_two_sample(&exact_times, &grid).unwrap();
    let ok = (exact_mean - 0.45055).abs() <= 0.035
        && (0.20..=0.46).contains(&exact_var)
        && (g.mean - 0.43931).abs() <= 0.03
        && ks.p_value > 0.01;
    outcome(
        ok,
        format!(
            "exact mean {exact_mean:.4} var {exact_var:.4}; improved Euler mean {:.4}; KS p={:.3}",
            g.mean, ks.p_value
        ),
    )
}

fn bias_structure(dir: &Path) -> Outcome {
    let s = run_cli(r#"{"experiment":"benchmark","n":1000000,"seed":2}"#, dir, 0);
    let rows = s["comparison"].as_array().unwrap();
    let bias = |m: &str| -> Vec<f64> {
        rows.iter()
            .filter(|r| r["method"] == m)
            .map(|r| r["bias1"].as_f64().unwrap())
            .collect()
    };
    let (e, i) = (bias("euler"), bias("improved_euler"));
    let positive = e.iter().chain(&i).all(|&b| b > 0.0);
    let dec = rises(&e) <= 1 && rises(&i) <= 1;
    let p = example1(1.6, -1.0, 0.5, 0.0, None).unwrap();
    let coupled = map_streams(20_000, 502, 0, |_, r| coupled_pair(&p.sde, &p.threshold, 2f64.powi(-6), 20.0, r)).unwrap();
    let ordered = coupled.iter().all(|(e, i)| i.time <= e.time);
    outcome(
        positive && dec && ordered,
        format!(
            "euler bias {:.5}..{:.5}, improved {:.5}..{:.5}, coupled order {ordered}",
            e[0],
            e[e.len() - 1],
            i[0],
            i[i.len() - 1]
        ),
    )
}

fn splitting() -> Outcome {
    let p = example1(1.6, -1.0, 0.5, 0.0, None).unwrap();
    let draw = |k: usize, seed| -> Vec<f64> {
        map_streams(10_000, seed, 0, |_, r| Ok(exact::sample_exact_split(&p, k, r)?.time)).unwrap()
    };
    let (s1, s2, s4) = (draw(1, 601), draw(2, 602), draw(4, 604));
    let pmin = [(&s1, &s2), (&s1, &s4), (&s2, &s4)]
        .iter()
        .map(|(a, b)| ks_two_sample(a, b).unwrap().p_value)
        .fold(1.0, f64::min);
    let far = example1(1.6, -1.0, 5.0, 0.0, None).unwrap();
    let k = choose_split_count(-1.0, 5.0, 6.48).unwrap();
    let mean_props = |k: usize, n: usize, seed| -> f64 {
        let v = map_streams(n, seed, 0, |_, r| Ok(exact::sample_exact_split(&far, k, r)?.proposals as f64)).unwrap();
        v.iter().sum::<f64>() / n as f64
    };
    let (m1, mk) = (mean_props(1, 500, 611), mean_props(k, 10_000, 612));
    let cap = k as f64 * std::f64::consts::E;
    outcome(
        pmin > 0.01 && mk < m1 && mk <= cap,
        format!("min pairwise p={pmin:.3}; far case k={k}: {mk:.2} proposals vs {m1:.1} unsplit, cap {cap:.2}"),
    )
}

fn thinning_law() -> Outcome {
    let n = 100_000;
    let t_end = 1.5;
    let kappa = 2.0;
    let check = |g: &(dyn Fn(f64) -> f64 + Sync), integral: f64, seed| -> (bool, f64, f64) {
        let hits = map_streams(n, seed, 0, |_, r| Ok(thinning_pass(g, kappa, t_end, r))).unwrap();
        let p_hat = hits.iter().filter(|&&h| h).count() as f64 / n as f64;
        let target = (-integral).exp();
        let se = (target * (1.0 - target) / n as f64).sqrt();
        ((p_hat - target).abs() <= 3.0 * se, p_hat, target)
    };
    let (ok_c, pc, tc) = check(&|_| 0.8, 0.8 * t_end, 701);
    let (ok_l, pl, tl) = check(&|t| 1.2 * t, 0.6 * t_end * t_end, 702);
    outcome(ok_c && ok_l, format!("constant {pc:.4} vs {tc:.4}, linear {pl:.4} vs {tl:.4}"))
}

fn bridge_moments() -> Outcome {
    let n = 100_000;
    let (tau, e0, e1, l0) = (2.0, 0.5, 1.2, 0.7);
    let xs: Vec<f64> = map_streams(n, 801, 0, |_, r| {
        let g = [r.sample(rand_distr::StandardNormal), 0.0, 0.0];
        let s = BridgeState { l: [l0, 0.0, 0.0], e0, e1, rejected: false };
        Ok(bridge_step(s, tau, g)?.l[0])
    })
    .unwrap();
    let s = SummaryStats::from_sample(&xs).unwrap();
    // A Brownian bridge from l0 at e0 to 0 at tau, read at e1.
    let mean = l0 + (0.0 - l0) * (e1 - e0) / (tau - e0);
    let var = (e1 - e0) * (tau - e1) / (tau - e0);
    let var_se = var * (2.0 / (n as f64 - 1.0)).sqrt();
    let ok = (s.mean - mean).abs() <= 3.0 * s.std_error() && (s.variance - var).abs() <= 3.0 * var_se;
    outcome(ok, format!("mean {:.4} vs {mean:.4}, variance {:.4} vs {var:.4}", s.mean, s.variance))
}

fn neuron(dir: &Path) -> Outcome {
    let s = run_cli(r#"{"experiment":"neuron","currents":[0,10,20],"trials":20,"horizon":2,"seed":9}"#, dir, 0);
    let cs = s["currents"].as_array().unwrap();
    let counts: Vec<f64> = cs.iter().map(|c| c["mean_count"].as_f64().unwrap()).collect();
    let cv0 = cs[0]["isi_cv"].as_f64();
    let cv20 = cs[2]["isi_cv"].as_f64();
    let jump = cs.iter().map(|c| c["max_jump_error"].as_f64().unwrap()).fold(0.0, f64::max);
    let increasing = counts.windows(2).all(|w| w[1] > w[0]);
    let cv_ok = matches!((cv0, cv20), (Some(a), Some(b)) if a > b);
    outcome(
        increasing && cv_ok && jump <= 1e-12,
        format!("mean counts {counts:?}, ISI CV I=0 {cv0:?} vs I=20 {cv20:?}, max jump error {jump:.1e}"),
    )
}

fn determinism(dir: &Path) -> Outcome {
    let configs = [
        r#"{"experiment":"example1","n":2000,"seed":10}"#,
        r#"{"experiment":"example1","n":2000,"seed":10,"method":"improved_euler","delta":0.001}"#,
        r#"{"experiment":"example2","n":1000,"seed":10}"#,
        r#"{"experiment":"benchmark","n":2000,"seed":10}"#,
        r#"{"experiment":"neuron","currents":[0,20],"trials":5,"seed":10}"#,
        r#"{"experiment":"sample","n":1000,"seed":10,"drift":{"kind":"sine","K":2},"threshold":{"kind":"exponential","a":1,"b":0.5}}"#,
    ];
    let mut differing = Vec::new();
    for (j, text) in configs.iter().enumerate() {
        let cfg = parse_config(text).unwrap();
        let (d1, d8) = (dir.join(format!("{j}-w1")), dir.join(format!("{j}-w8")));
        let a = run_experiment(&cfg, &d1, 1).unwrap();
        run_experiment(&cfg, &d8, 8).unwrap();
        for f in &a.files {
            let name = f.file_name().unwrap();
            if fs::read(d1.join(name)).unwrap() != fs::read(d8.join(name)).unwrap() {
                differing.push(format!("{}:{}", cfg.name(), name.to_string_lossy()));
            }
        }
    }
    outcome(differing.is_empty(), format!("{} configs compared, differing files {differing:?}", configs.len()))
}

fn main() {
    // `cargo test` passes harness flags such as `--nocapture`; none apply here.
    let tmp = tempfile::tempdir().unwrap();
    let sub = |name: &str| tmp.path().join(name);
    type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let criteria: Vec<(u32, &str, Duration, Check)> = vec![
        (1, "proposal sampler exactness", Duration::from_secs(20), Box::new(proposal_samplers)),
        (2, "example 1 vs grid schemes", Duration::from_secs(300), Box::new(|| example1_agreement(&sub("c2")))),
        (3, "acceptance-rate identity", Duration::from_secs(60), Box::new(acceptance_rate_identity)),
        (4, "example 2 moments", Duration::from_secs(600), Box::new(|| example2_moments(&sub("c4")))),
        (5, "bias structure", Duration::from_secs(300), Box::new(|| bias_structure(&sub("c5")))),
        (6, "space splitting", Duration::from_secs(300), Box::new(splitting)),
        (7, "thinning law", Duration::from_secs(30), Box::new(thinning_law)),
        (8, "bridge moments", Duration::from_secs(30), Box::new(bridge_moments)),
        (9, "neuron spike trains", Duration::from_secs(600), Box::new(|| neuron(&sub("c9")))),
        (10, "determinism across workers", Duration::from_secs(120), Box::new(|| determinism(&sub("c10")))),
    ];
    let mut failed = 0;
    for (id, name, limit, check) in &criteria {
        let start = Instant::now();
        let o = check();
        let took = start.elapsed();
        let ok = o.ok && took < *limit;
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {name}: {} ({}; {:.1}s of {}s)",
            if ok { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
