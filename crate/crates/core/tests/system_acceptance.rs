//! Acceptance criteria 1-11. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;
use ursst::beamforming::{adjacent_grouping, build_weights, gain_unchecked, BeamformerKind};
use ursst::bounds::{chernoff_lower_bound, DEFAULT_TOL};
use ursst::experiments::{
    estimate_outage, hardening_sweep, power_vs_m, power_vs_pdec, recycling_ratio, ExperimentConfig, Runner,
};
use ursst::fading::{evolve_into, sample_initial_channel, AgingParams};
use ursst::gain_stats::{chernoff_objective, gain_moments, log_chernoff_objective, optimal_t, GainDistribution};
use ursst::power::{ThresholdModel, linear_to_db};
use ursst::rng::SeededRng;

use BeamformerKind::{
    GstbcSuperimposed as GsSup, GstbcTimeOrthogonal as GsTo, SuperimposedMf as Sup, TimeOrthogonalMf as To,
    TimeOrthogonalMfRecycling as Rec,
};

const CHUNK: usize = 4096;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn aging(v: f64) -> AgingParams {
    AgingParams::from_kinematics(v, 3.5e9, 5e-4).unwrap()
}

fn runner() -> Runner {
    Runner::new(std::thread::available_parallelism().map_or(1, |n| n.get()), CHUNK).unwrap()
}

fn config(schemes: &[BeamformerKind], m: usize, v: f64, trials: u64, draws: usize, extra: &str) -> ExperimentConfig {
    let schemes: Vec<String> = schemes.iter().map(|s| format!("\"{s}\"")).collect();
    ExperimentConfig::from_json(&format!(
        r#"{{
            "schemes": [{}],
            "m_tx": {m}, "n_rx": 4, "k_groups": 1,
            "velocity_mps": {v:?}, "carrier_hz": 3.5e9, "lag_s": 5e-4,
            "p_per": 1e-5, "p_dec": 8e-6,
            "trials": {trials}, "channel_draws": {draws}, "seed": 2024,
            "output_path": "acceptance.csv"{extra}
        }}"#,
        schemes.join(", ")
    ))
    .unwrap()
}

fn c1_mgf_identity() -> Outcome {
    let params = aging(15.0);
    let mut rng = SeededRng::new(101);
    let h0 = sample_initial_channel(10, 4, &mut rng).unwrap();
    let w = build_weights(Sup, &h0, None).unwrap();
    let dist = gain_moments(&h0, &w, &params).unwrap();
    let ts = [0.1, 1.0, 10.0];
    let mut sums = [0.0; 3];
    let draws = 100_000;
    let mut h = h0.clone();
    for _ in 0..draws {
        evolve_into(&h0, &params, &mut rng, &mut h);
        let g = gain_unchecked(&h, &w);
        for (s, t) in sums.iter_mut().zip(ts) {
            *s += (-t * g).exp();
        }
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for (s, t) in sums.iter().zip(ts) {
        let exact = log_chernoff_objective(t, 0.0, &dist).exp();
        let rel = (s / draws as f64 / exact - 1.0).abs();
        pass &= rel <= 0.02;
        parts.push(format!("t={t}: rel err {rel:.3e}"));
    }
    outcome(pass, parts.join(", "))
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a) > 1e-13 * (a.abs() + b.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

fn c2_analytic_t() -> Outcome {
    let mut rng = SeededRng::new(202);
    let (mut worst_rel, mut worst_slope) = (0.0_f64, 0.0_f64);
    for _ in 0..100 {
        let nc = 0.5 + 100.0 * (rng.normal().abs());
        let d = 1 + rng.uniform_index(16);
        let s = 0.02 + 0.9 * (rng.normal().abs() / 4.0).min(1.0);
        let dist = GainDistribution::new(nc, d, s.min(1.0)).unwrap();
        let b = dist.mean * (0.05 + 0.9 * (rng.uniform_index(1000) as f64 / 1000.0));
        let t_star = optimal_t(b, &dist).unwrap();
        let obj = |t: f64| log_chernoff_objective(t, b, &dist);
        // ln f is convex in t: expand until the minimum is bracketed.
        let mut hi = 1.0;
        while obj(2.0 * hi) < obj(hi) {
            hi *= 2.0;
        }
        let t_num = golden_min(obj, 0.0, 2.0 * hi);
        worst_rel = worst_rel.max((t_num / t_star - 1.0).abs());
        let h = 1e-5 * t_star;
        let f = |t: f64| chernoff_objective(t, b, &dist).unwrap();
        let slope = (f(t_star + h) - f(t_star - h)) / (2.0 * h);
        worst_slope = worst_slope.max(slope.abs());
    }
    outcome(
        worst_rel <= 1e-6 && worst_slope <= 1e-8,
        format!("max rel |t_num/t* - 1| = {worst_rel:.2e}, max |df/dt| at t* = {worst_slope:.2e}"),
    )
}

fn c3_moments() -> Outcome {
    let draws = 1_000_000u64;
    let r = runner();
    let mut pass = true;
    let mut worst = 0.0_f64;
    let mut parts = Vec::new();
    for v in [5.0, 15.0] {
        let params = aging(v);
        let cases: [(usize, usize, &[BeamformerKind]); 3] = [(100, 1, &[Sup]), (40, 1, &[To, Rec]), (30, 8, &[GsSup, GsTo])];
        for (i, (m, k, kinds)) in cases.into_iter().enumerate() {
            let mut rng = SeededRng::derive(303, (v as u64) << 8 | i as u64);
            let h0 = sample_initial_channel(m, 4, &mut rng).unwrap();
            let plan = adjacent_grouping(m, k, &mut rng).unwrap();
            let ws: Vec<_> = kinds.iter().map(|&kd| build_weights(kd, &h0, Some(&plan)).unwrap()).collect();
            let sums = r
                .fold_chunks(
                    &rng,
                    draws,
                    vec![0.0; ws.len()],
                    |range, rng| {
                        let mut h = h0.clone();
                        let mut out = vec![0.0; ws.len()];
                        for _ in range {
                            evolve_into(&h0, &params, rng, &mut h);
                            for (o, w) in out.iter_mut().zip(&ws) {
                                *o += gain_unchecked(&h, w);
                            }
                        }
                        Ok(out)
                    },
                    |acc, part| acc.iter_mut().zip(part).for_each(|(a, p)| *a += p),
                )
                .unwrap();
            for (w, s) in ws.iter().zip(sums) {
                let exact = gain_moments(&h0, w, &params).unwrap().mean;
                let rel = (s / draws as f64 / exact - 1.0).abs();
                worst = worst.max(rel);
                pass &= rel <= 0.01;
                parts.push(format!("{}@v{v}:{rel:.1e}", w.kind));
            }
        }
    }
    outcome(pass, format!("max rel err {worst:.2e} [{}]", parts.join(" ")))
}

fn c4_outage() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [1e-3, 1e-4] {
        let extra = format!(r#", "p_out": {p:e}, "bounds": ["chernoff", "polynomial"]"#);
        let cfg = config(&[To, Sup], 10, 15.0, 1_000_000, 1, &extra);
        for row in estimate_outage(&cfg, &runner()).unwrap() {
            let ok = match row.bound {
                ursst::bounds::BoundKind::Chernoff => row.within_binomial_slack(),
                _ => row.p_hat >= 0.999,
            };
            pass &= ok;
            parts.push(format!("{}/{}@{p:e}: p_hat={:.3e}", row.scheme, row.bound.name(), row.p_hat));
        }
    }
    outcome(pass, parts.join(", "))
}

fn c5_orderings() -> Outcome {
    let params = aging(15.0);
    let mut rng = SeededRng::new(505);
    let (mut cor3, mut mono) = (0, 0);
    for _ in 0..100 {
        let h0 = sample_initial_channel(100, 4, &mut rng).unwrap();
        let b = |kind| {
            let w = build_weights(kind, &h0, None).unwrap();
            chernoff_lower_bound(&gain_moments(&h0, &w, &params).unwrap(), 2e-6, DEFAULT_TOL).unwrap().value
        };
        cor3 += usize::from(b(To) >= b(Sup));
        let h0 = sample_initial_channel(32, 4, &mut rng).unwrap();
        let vals: Vec<f64> = [1, 2, 4, 8]
            .into_iter()
            .map(|k| {
                let plan = adjacent_grouping(32, k, &mut rng).unwrap();
                let w = build_weights(GsTo, &h0, Some(&plan)).unwrap();
                chernoff_lower_bound(&gain_moments(&h0, &w, &params).unwrap(), 2e-6, DEFAULT_TOL).unwrap().value
            })
            .collect();
        mono += usize::from(vals.windows(2).all(|p| p[1] > p[0]));
    }
    outcome(
        cor3 == 100 && mono == 100,
        format!("time-orthogonal >= superimposed on {cor3}/100, increasing in K on {mono}/100"),
    )
}

fn c6_hardening() -> Outcome {
    let cfg = config(&[To, Sup], 500, 15.0, 1, 100, r#", "m_grid": [20, 50, 100, 200, 500]"#);
    let rows = hardening_sweep(&cfg, &runner()).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in [To, Sup] {
        let gaps: Vec<f64> = rows.iter().filter(|r| r.scheme == kind).map(|r| r.rel_gap).collect();
        let last = *gaps.last().unwrap();
        let mono = gaps.windows(2).all(|w| w[1] < w[0]);
        pass &= last <= 0.05 && mono;
        let g: Vec<String> = gaps.iter().map(|g| format!("{g:.3}")).collect();
        parts.push(format!("{kind}: gaps [{}], M=500 {} 5%, monotone {mono}", g.join(" "), if last <= 0.05 { "<=" } else { ">" }));
    }
    outcome(pass, parts.join("; "))
}

fn c7_power_pdec() -> Outcome {
    let grid = [1e-6, 2e-6, 3e-6, 4e-6, 5e-6, 6e-6, 7e-6, 8e-6, 9e-6, 9.9e-6];
    let g: Vec<String> = grid.iter().map(|p| format!("{p:e}")).collect();
    let cfg = config(&[Sup, To], 100, 15.0, 1, 1000, &format!(r#", "p_dec_grid": [{}]"#, g.join(", ")));
    let model = ThresholdModel::normal_approximation(128, 0.5).unwrap();
    let rows = power_vs_pdec(&cfg, &model, &runner()).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in [Sup, To] {
        let ys: Vec<f64> = rows.iter().filter(|r| r.scheme == kind).map(|r| r.avg_gamma_db).collect();
        let (i, min) = ys.iter().cloned().enumerate().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        let interior = ys[0] > min && ys[ys.len() - 1] > min;
        let near = i.abs_diff(7) <= 1;
        pass &= interior && near;
        parts.push(format!("{kind}: argmin p_dec={:e} ({min:.3} dB), interior {interior}", grid[i]));
    }
    outcome(pass, parts.join("; "))
}

fn c8_separation() -> Outcome {
    let model = ThresholdModel::normal_approximation(128, 0.5).unwrap();
    let target = linear_to_db(4.0);
    let mut pass = true;
    let mut parts = Vec::new();
    for v in [5.0, 15.0] {
        let cfg = config(&[Sup, To], 500, v, 1, 1000, r#", "m_grid": [20, 500]"#);
        let rows = power_vs_m(&cfg, &model, &runner()).unwrap();
        let get = |m: usize, k: BeamformerKind| rows.iter().find(|r| r.m_tx == m && r.scheme == k).unwrap();
        let gap = get(500, Sup).avg_gamma_db - get(500, To).avg_gamma_db;
        let gap_ok = (gap - target).abs() <= 0.3;
        pass &= gap_ok;
        parts.push(format!("v={v}: gap@500 {gap:.2} dB ({})", if gap_ok { "ok" } else { "off" }));
        for kind in [Sup, To] {
            let drop = get(20, kind).avg_gamma_norm_db - get(500, kind).avg_gamma_norm_db;
            let ok = if v > 10.0 { drop >= 2.0 } else { (drop - 0.3).abs() <= 0.2 };
            pass &= ok;
            parts.push(format!("{kind} drop {drop:.2} dB ({})", if ok { "ok" } else { "off" }));
        }
    }
    outcome(pass, parts.join(", "))
}

fn c9_recycling() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut excess_40 = Vec::new();
    for v in [5.0, 15.0] {
        let cfg = config(&[To], 40, v, 1_000_000, 2000, r#", "m_grid": [10, 40, 70]"#);
        for r in recycling_ratio(&cfg, &runner()).unwrap() {
            let rel = (r.asnr_ratio_mc / r.rho_closed - 1.0).abs();
            let above = r.bound_mean_ratio >= r.rho_closed;
            pass &= rel <= 0.01 && above;
            if r.m_tx == 40 {
                excess_40.push(r.bound_mean_ratio - r.rho_closed);
            }
            parts.push(format!(
                "v={v} M={}: rho {:.4} mc {:.4} bound {:.4}",
                r.m_tx, r.rho_closed, r.asnr_ratio_mc, r.bound_mean_ratio
            ));
        }
    }
    let larger = excess_40[1] > excess_40[0];
    pass &= larger;
    parts.push(format!("excess@40 v15 {:.4} > v5 {:.4}: {larger}", excess_40[1], excess_40[0]));
    outcome(pass, parts.join(", "))
}

fn c10_gstbc() -> Outcome {
    let model = ThresholdModel::normal_approximation(128, 0.5).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (v, want) in [(5.0, 2.5), (15.0, 3.3)] {
        let cfg = config(&[Sup, GsSup], 30, v, 1, 1000, r#", "k_grid": [8], "m_grid": [30, 50, 70, 100]"#);
        let rows = power_vs_m(&cfg, &model, &runner()).unwrap();
        let gains: Vec<f64> = [30, 50, 70, 100]
            .into_iter()
            .map(|m| {
                let p = |k| rows.iter().find(|r| r.m_tx == m && r.scheme == k).unwrap().avg_gamma_db;
                p(Sup) - p(GsSup)
            })
            .collect();
        let at30 = (gains[0] - want).abs() <= 0.5;
        let shrinks = gains.windows(2).all(|w| w[1] < w[0]);
        pass &= at30 && shrinks;
        let g: Vec<String> = gains.iter().map(|g| format!("{g:.2}")).collect();
        parts.push(format!("v={v}: improvement [{}] dB over M=30..100 (target {want}+-0.5)", g.join(" ")));
    }
    outcome(pass, parts.join("; "))
}

fn c11_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_ursst");
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("c.json");
    std::fs::write(
        &cfg_path,
        r#"{
            "schemes": ["superimposed_mf", "time_orthogonal_mf", "gstbc_superimposed"],
            "m_tx": 16, "n_rx": 4, "k_groups": 4,
            "velocity_mps": 15.0, "carrier_hz": 3.5e9, "lag_s": 5e-4,
            "p_per": 1e-5, "p_dec": 8e-6, "p_out": 1e-3,
            "trials": 5000, "channel_draws": 300, "seed": 11,
            "output_path": "run.csv", "chunk_size": 64,
            "m_grid": [8, 16], "k_grid": [2, 4], "p_dec_grid": [2e-6, 8e-6]
        }"#,
    )
    .unwrap();
    let run = |exp: &str, workers: &str, out: &Path| -> Vec<u8> {
        let o = Command::new(bin)
            .args([exp, "--config", cfg_path.to_str().unwrap(), "--seed", "5", "--workers", workers, "--out-dir"])
            .arg(out)
            .output()
            .unwrap();
        assert!(o.status.success(), "{exp}: {}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out.join("run.csv")).unwrap()
    };
    let exps = ["outage", "pdf", "hardening", "power-pdec", "power-m", "recycling", "bounds-compare"];
    let mut same = 0;
    for exp in exps {
        let a = run(exp, "1", &dir.path().join(format!("{exp}-1a")));
        let b = run(exp, "1", &dir.path().join(format!("{exp}-1b")));
        let c = run(exp, "2", &dir.path().join(format!("{exp}-2")));
        let d = run(exp, "3", &dir.path().join(format!("{exp}-3")));
        same += usize::from(a == b && a == c && a == d && !a.is_empty());
    }
    outcome(same == exps.len(), format!("{same}/{} experiments byte-identical across reruns and 1/2/3 workers", exps.len()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("1 MGF identity", c1_mgf_identity),
        ("2 analytic t*", c2_analytic_t),
        ("3 gain means", c3_moments),
        ("4 outage guarantee", c4_outage),
        ("5 bound orderings", c5_orderings),
        ("6 hardening", c6_hardening),
        ("7 power vs p_dec", c7_power_pdec),
        ("8 scheme separation", c8_separation),
        ("9 recycling ratio", c9_recycling),
        ("10 G-STBC gains", c10_gstbc),
        ("11 determinism", c11_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, f) in criteria {
        let id = name.split(' ').next().unwrap();
        if !filter.is_empty() && !filter.iter().any(|x| x == id) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let tag = if result.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!result.pass);
        println!("criterion {name}: {tag} ({:.1}s) {}", start.elapsed().as_secs_f64(), result.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
