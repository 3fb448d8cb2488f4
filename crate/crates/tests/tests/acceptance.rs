//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fail.

use std::time::{Duration, Instant};

use vne_core::diagnostics::{self, DEFAULT_PROBES, DEFAULT_REFINE_STEPS};
use vne_core::entropy;
use vne_core::optimize::{self, Mode, OptimizeConfig};
use vne_core::trainer::{self, Regime, TrainConfig, SSL_ALPHA2};
use vne_core::verify;
use vne_core::RepresentationMatrix;

struct Check {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Check {
    Check {
        pass,
        detail: detail.into(),
    }
}

fn timed(
    id: usize,
    name: &str,
    limit: Option<Duration>,
    f: impl FnOnce() -> Check,
) -> bool {
    let start = Instant::now();
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f));
    let elapsed = start.elapsed();
    let (mut pass, mut detail) = match result {
        Ok(c) => (c.pass, c.detail),
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        }
    };
    let time = match limit {
        Some(l) => {
            if elapsed > l {
                pass = false;
                detail.push_str("; too slow");
            }
            format!("{:.2}s / limit {:.0}s", elapsed.as_secs_f64(), l.as_secs_f64())
        }
        None => format!("{:.2}s", elapsed.as_secs_f64()),
    };
    println!(
        "{} [{id:>2}] {name}: {detail} ({time})",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn entropy_bounds() -> Check {
    let out = verify::verify_entropy_bounds(1000, 1).unwrap();
    let violations = out.details.iter().filter(|d| d.violation > 1e-9).count();
    check(
        out.trials == 1000 && violations == 0,
        format!("{} trials, {violations} violations, worst {:.2e} (tol 1e-9)", out.trials, out.worst_violation),
    )
}

fn path_equivalence() -> Check {
    let out = verify::verify_path_equivalence(500, 2).unwrap();
    check(
        out.trials == 500 && out.worst_violation < 1e-9,
        format!("{} trials, worst {:.2e} (tol 1e-9)", out.trials, out.worst_violation),
    )
}

fn gradient() -> Check {
    let out = verify::verify_gradient(200, 3).unwrap();
    let repeated = out.details.iter().filter(|d| d.label.contains("fold eigenvalue")).count();
    check(
        out.trials == 200 && repeated > 0 && out.worst_violation < 1e-5,
        format!(
            "{} trials ({repeated} with repeated eigenvalues), max rel err {:.2e} (tol 1e-5)",
            out.trials, out.worst_violation
        ),
    )
}

fn rank_bound() -> Check {
    let out = verify::verify_rank_bound(500, 4).unwrap();
    let (fixtures, sweep): (Vec<_>, Vec<_>) = out.details.iter().partition(|d| d.label.starts_with("equality"));
    let sweep_worst = sweep.iter().map(|d| d.violation).fold(0.0, f64::max);
    let gap_worst = fixtures.iter().map(|d| d.violation).fold(0.0, f64::max);
    check(
        sweep.len() == 500 && !fixtures.is_empty() && sweep_worst <= 1e-9 && gap_worst < 1e-9,
        format!(
            "500 trials worst {sweep_worst:.2e}; {} equality fixtures max gap {gap_worst:.2e} (tol 1e-9)",
            fixtures.len()
        ),
    )
}

fn isotropy_endpoint(n: usize, d: usize) -> Check {
    let traj = optimize::optimize_vne(&OptimizeConfig {
        n,
        d,
        mode: Mode::Maximize,
        steps: 2000,
        ..Default::default()
    })
    .unwrap();
    let residual = optimize::gram_identity_residual(&traj.final_h);
    let s = traj.final_entropy.entropy;
    let target = (n as f64).ln() - 1e-4;
    check(
        residual < 1e-3 && s >= target,
        format!(
            "n={n} d={d}: ||ZZ^T - I||_F = {residual:.2e} (< 1e-3), S = {s:.6} (>= ln n - 1e-4 = {target:.6}), {} steps",
            traj.steps_taken
        ),
    )
}

fn decorrelation() -> Check {
    let run = verify::decorrelate(&verify::band_covariance(16), 200, 0.5 / 16.0).unwrap();
    check(
        run.initial_tc > 0.1 && run.final_tc < 1e-6,
        format!("d=16 total correlation {:.4} -> {:.2e} (> 0.1 -> < 1e-6)", run.initial_tc, run.final_tc),
    )
}

fn supervised_direction() -> Check {
    let mut lines = Vec::new();
    let mut run = |regime: Regime, alpha: f64| {
        let start = Instant::now();
        let r = trainer::train_supervised(&TrainConfig::supervised(regime, alpha)).unwrap();
        let t = start.elapsed().as_secs_f64();
        lines.push(t);
        (r.final_entropy, t)
    };
    let (vanilla, t0) = run(Regime::Vanilla, 0.0);
    let (plus, t1) = run(Regime::VnePlus, 0.01);
    let (minus, t2) = run(Regime::VneMinus, 0.01);
    let slow = lines.iter().any(|&t| t > 60.0);
    check(
        plus >= vanilla + 0.1 && minus <= vanilla - 0.1 && !slow,
        format!(
            "entropy vanilla {vanilla:.4}, VNE+ {plus:.4} ({:+.4}), VNE- {minus:.4} ({:+.4}); runs {t0:.1}s/{t1:.1}s/{t2:.1}s (each < 60s)",
            plus - vanilla,
            minus - vanilla
        ),
    )
}

fn ssl_collapse() -> Check {
    let start = Instant::now();
    let inv = trainer::train_ssl(&TrainConfig::ssl(1.0, 0.0)).unwrap();
    let t_inv = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let cfg = TrainConfig::ssl(1.0, SSL_ALPHA2);
    let ivne = trainer::train_ssl(&cfg).unwrap();
    let t_ivne = start.elapsed().as_secs_f64();
    let floor = 0.8 * cfg.batch_size.min(*cfg.hidden_dims.last().unwrap()) as f64;
    let inv_rank = inv.diagnostics.rank_surrogate;
    let ivne_rank = ivne.diagnostics.rank_surrogate;
    let align = ivne.final_alignment.unwrap();
    check(
        inv_rank <= 2
            && inv.final_entropy < 0.2
            && ivne_rank as f64 >= floor
            && align > 0.9
            && t_inv < 120.0
            && t_ivne < 120.0,
        format!(
            "invariance-only rank {inv_rank} (<= 2), S {:.4} (< 0.2); I-VNE+ rank {ivne_rank} (>= {floor}), alignment {align:.4} (> 0.9), S {:.4}; runs {t_inv:.1}s/{t_ivne:.1}s (each < 120s)",
            inv.final_entropy, ivne.final_entropy
        ),
    )
}

fn isotropy_diagnostic() -> Check {
    let mut parts = Vec::new();
    let mut pass = true;
    for (n, d) in [(8, 32), (16, 64)] {
        let traj = optimize::optimize_vne(&OptimizeConfig {
            n,
            d,
            mode: Mode::Maximize,
            steps: 2000,
            ..Default::default()
        })
        .unwrap();
        let iso = diagnostics::isotropy_profile(&traj.final_h, DEFAULT_PROBES, DEFAULT_REFINE_STEPS, 0).unwrap();
        pass &= iso.mean() > 0.95;
        parts.push(format!("endpoint {n}x{d} mean {:.4} (> 0.95)", iso.mean()));
    }
    let mut row = vec![0.0; 32];
    row[0] = 1.0;
    let collapsed = RepresentationMatrix::from_rows(&vec![row; 16])
        .and_then(|h| h.normalize_rows())
        .unwrap();
    let iso = diagnostics::isotropy_profile(&collapsed, DEFAULT_PROBES, DEFAULT_REFINE_STEPS, 0).unwrap();
    pass &= iso.min() < 0.5;
    parts.push(format!("collapsed min {:.4} (< 0.5)", iso.min()));
    check(pass, parts.join("; "))
}

fn scale_and_identity() -> Check {
    let h = RepresentationMatrix::gaussian(12, 20, 5);
    let base = entropy::vne_of(&h).unwrap().entropy;
    let worst = [1e-3, 1.0, 1e3]
        .iter()
        .map(|&k| (entropy::vne_of(&h.scaled(k).unwrap()).unwrap().entropy - base).abs())
        .fold(0.0, f64::max);

    let small = |regime: Regime| {
        let mut cfg = TrainConfig::supervised(regime, 0.0);
        cfg.epochs = 3;
        cfg.dataset.samples_per_class = 32;
        cfg.batch_size = 64;
        trainer::train(&cfg).unwrap().model
    };
    let disabled = small(Regime::Vanilla);
    let bits = |m: &trainer::Mlp| {
        m.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()).map(|x| x.to_bits()))
            .collect::<Vec<_>>()
    };
    let reference = bits(&disabled);
    let identical = [Regime::VnePlus, Regime::VneMinus, Regime::Frobenius]
        .iter()
        .all(|&r| bits(&small(r)) == reference);
    check(
        worst <= 1e-12 && identical,
        format!(
            "max |S(kH) - S(H)| = {worst:.2e} (<= 1e-12); alpha=0 weights bit-identical to regularizer-free path: {identical}"
        ),
    )
}

fn bench_format() -> Check {
    let run = || {
        let sizes = vne_cli::parse_sizes("256,128,64", 64).unwrap();
        let rows: Vec<_> = sizes
            .iter()
            .map(|&(n, d)| vne_cli::bench_size(n, d, 3, 0).unwrap())
            .collect();
        vne_cli::format_bench_table(&rows)
    };
    let (a, b) = (run(), run());
    let skeleton = |s: &str| {
        s.lines()
            .map(|l| {
                l.split_whitespace()
                    .map(|w| if w.trim_end_matches('%').parse::<f64>().is_ok() { "#" } else { w })
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect::<Vec<_>>()
    };
    let lines: Vec<&str> = a.lines().collect();
    let shape_ok = lines.len() == 6
        && lines[0] == "Computational overhead of VNE"
        && lines[1].split_whitespace().skip(2).collect::<Vec<_>>() == ["256", "128", "64"]
        && lines[2].split_whitespace().skip(2).collect::<Vec<_>>() == ["64", "64", "64"]
        && lines[3].contains("On VNE")
        && lines[4].trim_start().starts_with("Total")
        && lines[5].starts_with("Overhead")
        && lines[5].matches('%').count() == 3;
    let stable = skeleton(&a) == skeleton(&b) && lines[1..3] == b.lines().collect::<Vec<_>>()[1..3];
    check(
        shape_ok && stable,
        format!("table rows/columns as expected: {shape_ok}; layout identical across runs: {stable}"),
    )
}

fn main() {
    std::panic::set_hook(Box::new(|_| {}));
    let results = [
        timed(1, "entropy bounds", secs(5), entropy_bounds),
        timed(2, "Gram path equivalence", secs(10), path_equivalence),
        timed(3, "analytic gradient vs finite differences", secs(20), gradient),
        timed(4, "log rank bound", secs(10), rank_bound),
        timed(5, "orthonormal endpoint, 8x32", secs(10), || isotropy_endpoint(8, 32)),
        timed(5, "orthonormal endpoint, 16x64", secs(10), || isotropy_endpoint(16, 64)),
        timed(6, "decorrelation at fixed variances", secs(10), decorrelation),
        timed(7, "supervised entropy direction", None, supervised_direction),
        timed(8, "SSL collapse prevention", None, ssl_collapse),
        timed(9, "isotropy diagnostic", secs(5), isotropy_diagnostic),
        timed(10, "scale invariance and alpha=0 identity", secs(5), scale_and_identity),
        timed(11, "bench table format", None, bench_format),
    ];
    let failed = results.iter().filter(|&&p| !p).count();
    println!("{} of {} checks passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
