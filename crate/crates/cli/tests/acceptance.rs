//! Acceptance suite. Prints one line per criterion and exits nonzero if any
//! criterion fails. Runs for several minutes in an optimized build.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shaped_polar::channels::ChannelKind;
use shaped_polar::constellation::{tv_distance, Constellation, Scheme, ShapedDistribution};
use shaped_polar::construction::{design_distribution, size_and_build, ConstructionConfig};
use shaped_polar::construction::{zb_parameter, DiscreteJoint};
use shaped_polar::harness::{run_frames, security_gap, GapConfig, SimConfig};
use shaped_polar::mlc::{shaping_encode, CodeStructure, ShapingRule};
use shaped_polar::polar::{decision_penalty, polar_transform, scl_decode, DecodeInput};
use shaped_polar::secrecy::{
    gaussian_secrecy_capacity, mutual_information, optimize_delta_refined, secrecy_rate,
    SecrecyOperatingPoint,
};

type Outcome = (bool, String);

fn ask(q: usize) -> Constellation {
    Constellation::new(q, Scheme::Ask).unwrap()
}

fn paper_config(shaped: bool) -> ConstructionConfig {
    let mut cfg = ConstructionConfig::new(1024, 8, 13.0, 4.27, 1e-3, 0.2);
    cfg.kappa_d = 1.1;
    cfg.forced_k = Some(400);
    cfg.shaped = shaped;
    cfg
}

fn paper_code(shaped: bool) -> CodeStructure {
    size_and_build(&paper_config(shaped)).unwrap().structure
}

fn secrecy_dominance() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut gain8 = 0.0;
    for q in [2, 4, 8, 16] {
        let c = ask(q);
        for b in (0..=24).step_by(2) {
            let b = b as f64;
            let curve =
                optimize_delta_refined(&c, &SecrecyOperatingPoint::new(b, b - 3.0), 0.01, 0.001)
                    .unwrap();
            let diff = curve.best_point().rs - curve.uniform_point().rs;
            worst = worst.min(diff);
        }
        if q == 8 {
            let curve =
                optimize_delta_refined(&c, &SecrecyOperatingPoint::new(13.0, 10.0), 0.01, 0.001)
                    .unwrap();
            gain8 = curve.best_point().rs - curve.uniform_point().rs;
        }
    }
    (
        worst >= -1e-6 && gain8 >= 0.01,
        format!("min Rs(opt)-Rs(unif) {worst:.2e}, 8-ASK gain at 13 dB {gain8:.4}"),
    )
}

fn gaussian_gap() -> Outcome {
    let c = ask(64);
    let mut worst: f64 = f64::NEG_INFINITY;
    for b in 5..=15 {
        let op = SecrecyOperatingPoint::new(b as f64, b as f64 - 3.0);
        let rs = optimize_delta_refined(&c, &op, 0.005, 0.0005)
            .unwrap()
            .best_point()
            .rs;
        worst = worst.max(gaussian_secrecy_capacity(&op, 1) - rs);
    }
    (worst <= 0.05, format!("max C_G - Rs {worst:.4}"))
}

fn high_snr_collapse() -> Outcome {
    let d = ShapedDistribution::uniform(&ask(4), 1.0).unwrap();
    let rs = secrecy_rate(&d, &SecrecyOperatingPoint::new(40.0, 37.0)).unwrap();
    (rs <= 0.05, format!("Rs {rs:.2e}"))
}

fn penalty(llrs: &[f64], x: &[u8]) -> f64 {
    llrs.iter()
        .zip(x)
        .map(|(l, b)| decision_penalty(*l, *b))
        .sum()
}

fn scl_matches_map() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut agree = 0;
    for _ in 0..200 {
        let llrs: Vec<f64> = (0..8).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let known: Vec<Option<u8>> = (0..8)
            .map(|_| rng.gen_bool(0.5).then(|| rng.gen_range(0..2u8)))
            .collect();
        let free: Vec<usize> = (0..8).filter(|&i| known[i].is_none()).collect();
        let out = scl_decode(&DecodeInput {
            channel_llrs: llrs.clone(),
            prior_llrs: None,
            known_positions: known.clone(),
            list_size: 1 << free.len(),
            crc_enabled: false,
        })
        .unwrap();
        let mut best = (f64::INFINITY, Vec::new());
        for mask in 0..(1usize << free.len()) {
            let mut u: Vec<u8> = known.iter().map(|k| k.unwrap_or(0)).collect();
            for (j, &i) in free.iter().enumerate() {
                u[i] = ((mask >> j) & 1) as u8;
            }
            let m = penalty(&llrs, &polar_transform(&u).unwrap());
            if m < best.0 {
                best = (m, u);
            }
        }
        agree += usize::from(out.u_hat == best.1);
    }
    (agree == 200, format!("{agree}/200 agree"))
}

fn simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// `Z(U_i | U^{i-1}, S^n, Y^n)` for every `i` by full enumeration.
fn polarized_zb(n: usize, pxs: &[Vec<f64>], w: &[Vec<f64>], ny: usize) -> Vec<f64> {
    let ns = pxs[0].len();
    let per = 2 * ns * ny;
    let mut tables: Vec<HashMap<(usize, usize, usize), [f64; 2]>> = vec![HashMap::new(); n];
    for idx in 0..per.pow(n as u32) {
        let mut rest = idx;
        let mut x = vec![0u8; n];
        let (mut sk, mut yk, mut prob) = (0, 0, 1.0);
        for xk in x.iter_mut() {
            let c = rest % per;
            rest /= per;
            let (xb, s, y) = (c / (ns * ny), (c / ny) % ns, c % ny);
            *xk = xb as u8;
            sk = sk * ns + s;
            yk = yk * ny + y;
            prob *= pxs[xb][s] * w[xb * ns + s][y];
        }
        if prob == 0.0 {
            continue;
        }
        let u = polar_transform(&x).unwrap();
        for i in 0..n {
            let prefix = u[..i].iter().fold(0, |a, b| 2 * a + *b as usize);
            tables[i].entry((prefix, sk, yk)).or_insert([0.0; 2])[u[i] as usize] += prob;
        }
    }
    tables
        .into_iter()
        .map(|t| {
            let mut keys: Vec<_> = t.keys().copied().collect();
            keys.sort();
            zb_parameter(&DiscreteJoint::from_weights(keys.iter().map(|k| t[k]).collect()).unwrap())
        })
        .collect()
}

fn zb_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut cond_bad = 0;
    let mut worst_cond: f64 = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let (nv, nw) = (rng.gen_range(1..6), rng.gen_range(1..6));
        let p = simplex(&mut rng, 2 * nv * nw);
        let full: Vec<[f64; 2]> = (0..nv * nw).map(|k| [p[2 * k], p[2 * k + 1]]).collect();
        let coarse: Vec<[f64; 2]> = (0..nv)
            .map(|v| {
                (0..nw).fold([0.0, 0.0], |a, w| {
                    [a[0] + full[v * nw + w][0], a[1] + full[v * nw + w][1]]
                })
            })
            .collect();
        let d = zb_parameter(&DiscreteJoint::from_weights(full).unwrap())
            - zb_parameter(&DiscreteJoint::from_weights(coarse).unwrap());
        worst_cond = worst_cond.max(d);
        cond_bad += usize::from(d > 1e-12);
    }
    let mut lemma_bad = 0;
    let mut worst_lemma: f64 = f64::NEG_INFINITY;
    for trial in 0..1000 {
        let n = if trial % 4 == 0 { 4 } else { 2 };
        let (ns, ny, nz) = (2, 3, 2);
        let flat = simplex(&mut rng, 2 * ns);
        let pxs = vec![flat[..ns].to_vec(), flat[ns..].to_vec()];
        let wb: Vec<Vec<f64>> = (0..2 * ns).map(|_| simplex(&mut rng, ny)).collect();
        let deg: Vec<Vec<f64>> = (0..ny).map(|_| simplex(&mut rng, nz)).collect();
        let we: Vec<Vec<f64>> = wb
            .iter()
            .map(|row| {
                (0..nz)
                    .map(|z| (0..ny).map(|y| row[y] * deg[y][z]).sum())
                    .collect()
            })
            .collect();
        let zb = polarized_zb(n, &pxs, &wb, ny);
        let ze = polarized_zb(n, &pxs, &we, nz);
        for (b, e) in zb.iter().zip(&ze) {
            worst_lemma = worst_lemma.max(b - e);
            lemma_bad += usize::from(b - e > 1e-12);
        }
    }
    (
        cond_bad == 0 && lemma_bad == 0,
        format!(
            "conditioning violations {cond_bad} (max excess {worst_cond:.1e}), \
             degraded-Eve violations {lemma_bad} (max excess {worst_lemma:.1e})"
        ),
    )
}

fn polarization_fractions() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (b, g) in [(8.0, 8.0), (10.0, 5.0)] {
        let mut cfg = ConstructionConfig::new(1024, 4, b, g, 1e-3, 0.2);
        cfg.kappa_d = 1.15;
        let (dist, _) = design_distribution(&cfg).unwrap();
        let built = size_and_build(&cfg).unwrap();
        let cs = &built.structure;
        let n = cs.n() as f64;
        let rs = mutual_information(&dist, b).unwrap() - mutual_information(&dist, b - g).unwrap();
        let shortfall = 2.0 - dist.entropy();
        let a_err = (cs.k() as f64 / n - rs).abs();
        let d_err = (cs.d() as f64 / n - shortfall).abs();
        ok &= a_err <= 0.15 && d_err <= 0.15 * cfg.kappa_d;
        parts.push(format!(
            "{b}/{g} dB: |A|/N {:.3} vs Rs {rs:.3}, |D|/N {:.3} vs q-H {shortfall:.3}",
            cs.k() as f64 / n,
            cs.d() as f64 / n
        ));
    }
    (ok, parts.join("; "))
}

fn shaping_fidelity(cs: &CodeStructure) -> Outcome {
    let order = cs.constellation().order();
    let target = cs.target_dist().pmf().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut sum = 0.0;
    let mut pooled = vec![0.0; order];
    for _ in 0..100 {
        let payload: Vec<u8> = (0..cs.payload_len())
            .map(|_| rng.gen_range(0..2u8))
            .collect();
        let frame = shaping_encode(cs, &payload, ShapingRule::Argmax, 16, &mut rng).unwrap();
        let pmf = frame.empirical_pmf(order);
        sum += tv_distance(&pmf, &target);
        for (a, b) in pooled.iter_mut().zip(&pmf) {
            *a += b / 100.0;
        }
    }
    let mean = sum / 100.0;
    (
        mean <= 0.05,
        format!(
            "mean per-frame TV {mean:.4}, pooled TV {:.4}",
            tv_distance(&pooled, &target)
        ),
    )
}

fn reliability_and_security(cs: &CodeStructure, leakage: f64) -> (Outcome, Outcome) {
    let sim = SimConfig {
        frames: 1000,
        seed: 8,
        ..SimConfig::default()
    };
    let (bob, eve) = run_frames(cs, &sim, Some(13.0), Some(13.0 - 4.27)).unwrap();
    (
        (
            bob.fer() <= 1e-2,
            format!(
                "Bob FER {:.4} ({} of {} frames)",
                bob.fer(),
                bob.frame_errors,
                bob.frames
            ),
        ),
        (
            eve.ber() >= 0.45 && leakage <= 0.25,
            format!("Eve BER {:.4}, leakage {leakage:.4}", eve.ber()),
        ),
    )
}

fn gap_sim(le: usize, ld: usize, channel: ChannelKind) -> SimConfig {
    SimConfig {
        frames: 300,
        list_encode: le,
        list_decode: ld,
        channel,
        seed: 10,
        ..SimConfig::default()
    }
}

fn security_gap_ordering(shaped: &CodeStructure, uniform: &CodeStructure) -> Outcome {
    let gap = GapConfig {
        p_e_max_b: 1e-3,
        l_k_max_e: 0.2,
        bob_range: (9.0, 17.0),
        eve_range: (0.0, 13.0),
        resolution_db: 0.1,
    };
    let sg = |cs: &CodeStructure, l: usize| {
        security_gap(cs, &gap, &gap_sim(l, l, ChannelKind::Awgn))
            .unwrap()
            .s_g_db
    };
    let s16 = sg(shaped, 16);
    let u16 = sg(uniform, 16);
    let s8 = sg(shaped, 8);
    let s4 = sg(shaped, 4);
    let reference = [(s16, 3.90), (u16, 4.54), (s8, 3.99), (s4, 4.19)];
    let within = reference
        .iter()
        .filter(|(v, r)| (v - r).abs() <= 0.75)
        .count();
    (
        s16 < u16 && s16 <= s8 && s8 <= s4,
        format!(
            "S_g shaped L16 {s16:.2}, uniform L16 {u16:.2}, shaped L8 {s8:.2}, shaped L4 {s4:.2} dB; \
             {within}/4 within 0.75 dB of 3.90/4.54/3.99/4.19"
        ),
    )
}

fn leakage_vs_length() -> Outcome {
    let mut shaped = Vec::new();
    let mut uniform = Vec::new();
    for n in [256, 512, 1024] {
        for (flag, out) in [(true, &mut shaped), (false, &mut uniform)] {
            let mut cfg = paper_config(flag);
            cfg.n = n;
            cfg.forced_k = Some(400 * n / 1024);
            out.push(size_and_build(&cfg).unwrap().leakage);
        }
    }
    let ok =
        shaped.windows(2).all(|w| w[1] <= w[0]) && shaped.iter().zip(&uniform).all(|(s, u)| s <= u);
    (
        ok,
        format!("N 256/512/1024: shaped {shaped:.3?}, uniform {uniform:.3?}"),
    )
}

fn rayleigh_gap() -> Outcome {
    let gap = GapConfig {
        p_e_max_b: 1e-3,
        l_k_max_e: 0.2,
        bob_range: (12.0, 36.0),
        eve_range: (-5.0, 22.0),
        resolution_db: 0.1,
    };
    let mut sg = Vec::new();
    for shaped in [true, false] {
        let mut cfg = ConstructionConfig::new(1024, 8, 22.0, 10.0, 1e-3, 0.2);
        cfg.kappa_d = 1.1;
        cfg.forced_k = Some(400);
        cfg.shaped = shaped;
        cfg.channel = ChannelKind::Rayleigh;
        let cs = size_and_build(&cfg).unwrap().structure;
        sg.push(
            security_gap(&cs, &gap, &gap_sim(16, 16, ChannelKind::Rayleigh))
                .unwrap()
                .s_g_db,
        );
    }
    (
        sg[0] <= sg[1],
        format!(
            "S_g shaped {:.2} dB, uniform {:.2} dB, gain {:.2} dB",
            sg[0],
            sg[1],
            sg[1] - sg[0]
        ),
    )
}

fn run_cli(dir: &Path, cmd: &str, config: &Path, out: &str) -> Vec<u8> {
    let out = dir.join(out);
    let status = Command::new(env!("CARGO_BIN_EXE_shaped-polar"))
        .args([cmd, "--config"])
        .arg(config)
        .args(["--seed", "11", "--out"])
        .arg(&out)
        .env("RUST_LOG", "error")
        .stdout(std::process::Stdio::null())
        .status()
        .unwrap();
    assert!(status.success(), "{cmd} failed");
    std::fs::read(&out).unwrap()
}

fn cli_determinism() -> Outcome {
    let configs = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let dir = std::env::temp_dir().join(format!("shaped-polar-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut differing = Vec::new();
    for (cmd, file) in [
        ("optimize-distribution", "optimize.json"),
        ("construct", "construct.json"),
        ("simulate", "simulate.json"),
        ("security-gap", "security_gap.json"),
        ("rate-equivocation", "rate_equivocation.json"),
        ("max-k", "max_k.json"),
    ] {
        let cfg = configs.join(file);
        let a = run_cli(&dir, cmd, &cfg, "a.csv");
        let b = run_cli(&dir, cmd, &cfg, "b.csv");
        if a != b || a.is_empty() {
            differing.push(cmd);
        }
    }
    std::fs::remove_dir_all(&dir).ok();
    (
        differing.is_empty(),
        format!("6 commands, differing: {differing:?}"),
    )
}

fn report(n: usize, started: Instant, (pass, detail): Outcome, failed: &mut usize) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!(
        "criterion {n:>2}: {verdict} {detail} [{:.0}s]",
        started.elapsed().as_secs_f64()
    );
    *failed += usize::from(!pass);
}

fn main() -> ExitCode {
    let mut failed = 0;
    macro_rules! check {
        ($n:expr, $e:expr) => {{
            let t = Instant::now();
            let outcome = $e;
            report($n, t, outcome, &mut failed);
        }};
    }
    check!(1, secrecy_dominance());
    check!(2, gaussian_gap());
    check!(3, high_snr_collapse());
    check!(4, scl_matches_map());
    check!(5, zb_suites());
    check!(6, polarization_fractions());
    let shaped = size_and_build(&paper_config(true)).unwrap();
    check!(7, shaping_fidelity(&shaped.structure));
    let t = Instant::now();
    let (c8, c9) = reliability_and_security(&shaped.structure, shaped.leakage);
    report(8, t, c8, &mut failed);
    report(9, t, c9, &mut failed);
    check!(
        10,
        security_gap_ordering(&shaped.structure, &paper_code(false))
    );
    check!(11, leakage_vs_length());
    check!(12, rayleigh_gap());
    check!(13, cli_determinism());
    println!("{} of 13 criteria passed", 13 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
