use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use shaped_polar::constellation::{Constellation, Scheme, ShapedDistribution};
use shaped_polar::construction::{size_and_build, ConstructionConfig};
use shaped_polar::harness::{
    ber_campaign, max_k_search, rate_equivocation_curve, run_frames, security_gap, GapConfig,
    MaxKConfig, SimConfig,
};
use shaped_polar::mlc::CodeStructure;
use shaped_polar::secrecy::{
    gaussian_secrecy_capacity, optimize_delta_refined, secrecy_rate, SecrecyOperatingPoint,
};
use shaped_polar::Error;

/// Shaped multilevel polar codes for the Gaussian and Rayleigh wiretap channels.
#[derive(Parser)]
#[command(name = "shaped-polar", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides every seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
    /// Write long-format `series,x,y` rows instead of the table.
    #[arg(long)]
    plot_data: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Secrecy-rate traversal over the scaling factor.
    OptimizeDistribution(Common),
    /// Builds a code structure; the CSV holds per-position statistics.
    Construct {
        #[command(flatten)]
        common: Common,
        /// Structure JSON (defaults to the CSV path with a .json extension).
        #[arg(long)]
        structure: Option<PathBuf>,
    },
    /// BER campaign at Bob and Eve.
    Simulate(Common),
    /// Security gap by bisection on Bob's BER and Eve's leakage.
    SecurityGap(Common),
    /// Rate-equivocation pairs for structures of several sizes.
    RateEquivocation(Common),
    /// Largest message length per order and SNR.
    MaxK(Common),
}

#[derive(Serialize)]
struct PlotRow {
    series: String,
    x: f64,
    y: f64,
}

fn plot(series: impl Into<String>, x: f64, y: f64) -> PlotRow {
    PlotRow {
        series: series.into(),
        x,
        y,
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_config<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit<T: Serialize>(
    common: &Common,
    table: &[T],
    long: impl FnOnce() -> Vec<PlotRow>,
) -> anyhow::Result<()> {
    if common.plot_data {
        write_csv(&common.out, &long())
    } else {
        write_csv(&common.out, table)
    }
}

/// Either a construction to run or a saved structure.
#[derive(Deserialize)]
struct CodeSource {
    construction: Option<ConstructionConfig>,
    structure: Option<PathBuf>,
}

impl CodeSource {
    fn load(&self, base: &Path, seed: Option<u64>) -> anyhow::Result<CodeStructure> {
        match (&self.construction, &self.structure) {
            (Some(cfg), None) => {
                let mut cfg = cfg.clone();
                if let Some(s) = seed {
                    cfg.seed = s;
                }
                let built = size_and_build(&cfg)?;
                for w in &built.warnings {
                    warn!("{w}");
                }
                Ok(built.structure)
            }
            (None, Some(p)) => {
                let p = base.parent().unwrap_or(Path::new(".")).join(p);
                let text =
                    fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                Ok(CodeStructure::from_json(&text)?)
            }
            _ => bail!("give exactly one of \"construction\" and \"structure\""),
        }
    }
}

fn seeded(mut sim: SimConfig, seed: Option<u64>) -> SimConfig {
    if let Some(s) = seed {
        sim.seed = s;
    }
    sim
}

fn default_scheme() -> Scheme {
    Scheme::Ask
}
fn default_power() -> f64 {
    1.0
}
fn default_step() -> f64 {
    0.01
}
fn default_fine() -> f64 {
    0.001
}

#[derive(Deserialize)]
struct OptimizeConfig {
    #[serde(rename = "Q")]
    order: usize,
    #[serde(default = "default_scheme")]
    scheme: Scheme,
    /// Single operating point.
    snr_b_db: Option<f64>,
    snr_e_db: Option<f64>,
    /// Sweep of Bob SNRs at a fixed gap.
    sweep_snr_b_db: Option<Vec<f64>>,
    gap_db: Option<f64>,
    #[serde(default = "default_power")]
    power: f64,
    #[serde(default = "default_step")]
    step: f64,
    #[serde(default = "default_fine")]
    fine_step: f64,
}

#[derive(Serialize)]
struct CurveRow {
    delta: f64,
    nu: f64,
    mi_bob: f64,
    mi_eve: f64,
    rs: f64,
    best: bool,
}

#[derive(Serialize)]
struct SweepRow {
    #[serde(rename = "Q")]
    order: usize,
    snr_b_db: f64,
    snr_e_db: f64,
    delta: f64,
    rs_shaped: f64,
    rs_uniform: f64,
    c_gauss: f64,
}

fn optimize_distribution(common: &Common) -> anyhow::Result<()> {
    let cfg: OptimizeConfig = read_config(&common.config)?;
    let c = Constellation::new(cfg.order, cfg.scheme)?;
    let op = |b: f64, e: f64| SecrecyOperatingPoint {
        snr_b_db: b,
        snr_e_db: e,
        power: cfg.power,
    };
    if let (Some(bs), Some(gap)) = (&cfg.sweep_snr_b_db, cfg.gap_db) {
        let uniform = ShapedDistribution::uniform(&c, cfg.power)?;
        let mut rows = Vec::with_capacity(bs.len());
        for &b in bs {
            let p = op(b, b - gap);
            let best = optimize_delta_refined(&c, &p, cfg.step, cfg.fine_step)?.best_point();
            rows.push(SweepRow {
                order: cfg.order,
                snr_b_db: b,
                snr_e_db: b - gap,
                delta: best.delta,
                rs_shaped: best.rs,
                rs_uniform: secrecy_rate(&uniform, &p)?,
                c_gauss: gaussian_secrecy_capacity(&p, c.dimensions()),
            });
        }
        return emit(common, &rows, || {
            rows.iter()
                .flat_map(|r| {
                    [
                        plot("rs_shaped", r.snr_b_db, r.rs_shaped),
                        plot("rs_uniform", r.snr_b_db, r.rs_uniform),
                        plot("c_gauss", r.snr_b_db, r.c_gauss),
                    ]
                })
                .collect()
        });
    }
    let (Some(b), Some(e)) = (cfg.snr_b_db, cfg.snr_e_db) else {
        bail!("give snr_b_db and snr_e_db, or sweep_snr_b_db and gap_db");
    };
    let curve = optimize_delta_refined(&c, &op(b, e), cfg.step, cfg.fine_step)?;
    let best = curve.best_point();
    info!("best delta {} with Rs {} bits", best.delta, best.rs);
    let rows: Vec<CurveRow> = curve
        .points
        .iter()
        .enumerate()
        .map(|(k, p)| CurveRow {
            delta: p.delta,
            nu: p.nu,
            mi_bob: p.mi_bob,
            mi_eve: p.mi_eve,
            rs: p.rs,
            best: k == curve.best,
        })
        .collect();
    emit(common, &rows, || {
        rows.iter()
            .flat_map(|r| {
                [
                    plot("rs", r.delta, r.rs),
                    plot("mi_bob", r.delta, r.mi_bob),
                    plot("mi_eve", r.delta, r.mi_eve),
                ]
            })
            .collect()
    })
}

#[derive(Deserialize)]
struct ConstructFile {
    #[serde(flatten)]
    construction: ConstructionConfig,
    /// Frames of the optional reliability check at the design SNR.
    #[serde(default)]
    validation_frames: usize,
    #[serde(default)]
    sim: SimConfig,
}

#[derive(Serialize)]
struct Summary {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "R")]
    r: usize,
    #[serde(rename = "D")]
    d: usize,
    #[serde(rename = "F")]
    f: usize,
    leakage: f64,
    union_bound: f64,
    validation_fer: Option<f64>,
    warnings: Vec<String>,
}

fn construct(common: &Common, structure: Option<&Path>) -> anyhow::Result<()> {
    let mut file: ConstructFile = read_config(&common.config)?;
    if let Some(s) = common.seed {
        file.construction.seed = s;
    }
    let built = size_and_build(&file.construction)?;
    for w in &built.warnings {
        warn!("{w}");
    }
    let cs = &built.structure;
    let validation_fer = if file.validation_frames > 0 {
        let mut sim = seeded(file.sim.clone(), common.seed);
        sim.frames = file.validation_frames;
        sim.channel = file.construction.channel;
        let (bob, _) = run_frames(cs, &sim, Some(file.construction.d_snr_b_db), None)?;
        Some(bob.fer())
    } else {
        None
    };
    let json_path = structure.map_or_else(|| common.out.with_extension("json"), Path::to_path_buf);
    fs::write(&json_path, cs.to_json()?)
        .with_context(|| format!("writing {}", json_path.display()))?;
    let summary = Summary {
        k: cs.k(),
        r: cs.r(),
        d: cs.d(),
        f: cs.f(),
        leakage: built.leakage,
        union_bound: built.union_bound,
        validation_fer,
        warnings: built.warnings.clone(),
    };
    println!("{}", serde_json::to_string(&summary)?);
    let rows = built.stats.rows();
    let n = built.stats.n as f64;
    emit(common, &rows, || {
        rows.iter()
            .flat_map(|r| {
                let x = r.l as f64 * n + r.i as f64;
                [
                    plot("h_source", x, r.h_source),
                    plot("eps_bob", x, r.eps_bob),
                    plot("eps_eve", x, r.eps_eve),
                    plot("cap_eve", x, r.cap_eve),
                ]
            })
            .collect()
    })
}

#[derive(Deserialize)]
struct SimulateFile {
    #[serde(flatten)]
    code: CodeSource,
    /// Explicit `(snr_b, snr_e)` pairs.
    #[serde(default)]
    points: Vec<(f64, f64)>,
    /// Or a fixed Bob SNR with several gaps.
    snr_b_db: Option<f64>,
    #[serde(default)]
    gaps_db: Vec<f64>,
    #[serde(default)]
    sim: SimConfig,
}

fn simulate(common: &Common) -> anyhow::Result<()> {
    let file: SimulateFile = read_config(&common.config)?;
    let cs = file.code.load(&common.config, common.seed)?;
    let mut points = file.points.clone();
    if let Some(b) = file.snr_b_db {
        points.extend(file.gaps_db.iter().map(|g| (b, b - g)));
    }
    if points.is_empty() {
        bail!("no SNR points given");
    }
    let rows = ber_campaign(&cs, &points, &seeded(file.sim, common.seed))?;
    emit(common, &rows, || {
        rows.iter()
            .flat_map(|r| {
                let x = r.snr_b_db - r.snr_e_db;
                [
                    plot("p_e_b", x, r.p_e_b),
                    plot("fer_b", x, r.fer_b),
                    plot("p_e_e", x, r.p_e_e),
                    plot("l_k_e", x, r.l_k_e),
                ]
            })
            .collect()
    })
}

#[derive(Deserialize)]
struct GapFile {
    #[serde(flatten)]
    code: CodeSource,
    gap: GapConfig,
    #[serde(default)]
    sim: SimConfig,
    /// `(L_e, L_d)` pairs; defaults to the simulation list sizes.
    #[serde(default)]
    lists: Vec<(usize, usize)>,
}

#[derive(Serialize)]
struct GapRow {
    list_encode: usize,
    list_decode: usize,
    snr_b_min_db: f64,
    snr_e_max_db: f64,
    s_g_db: f64,
}

fn gap(common: &Common) -> anyhow::Result<()> {
    let file: GapFile = read_config(&common.config)?;
    let cs = file.code.load(&common.config, common.seed)?;
    let sim = seeded(file.sim, common.seed);
    let lists = if file.lists.is_empty() {
        vec![(sim.list_encode, sim.list_decode)]
    } else {
        file.lists.clone()
    };
    let mut rows = Vec::with_capacity(lists.len());
    for (le, ld) in lists {
        let s = SimConfig {
            list_encode: le,
            list_decode: ld,
            ..sim.clone()
        };
        let g = security_gap(&cs, &file.gap, &s)?;
        rows.push(GapRow {
            list_encode: le,
            list_decode: ld,
            snr_b_min_db: g.snr_b_min_db,
            snr_e_max_db: g.snr_e_max_db,
            s_g_db: g.s_g_db,
        });
    }
    emit(common, &rows, || {
        rows.iter()
            .map(|r| {
                plot(
                    format!("L{}-{}", r.list_encode, r.list_decode),
                    r.snr_b_min_db,
                    r.s_g_db,
                )
            })
            .collect()
    })
}

#[derive(Deserialize)]
struct RateFile {
    construction: ConstructionConfig,
    sizes: Vec<(usize, usize)>,
}

#[derive(Serialize)]
struct RateRow {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "K")]
    k: usize,
    r_t: f64,
    l_k_e: f64,
    r_e_bar: f64,
    r_e: f64,
    i_xy: f64,
    i_xz: f64,
    r_s: f64,
}

fn rate_equivocation(common: &Common) -> anyhow::Result<()> {
    let mut file: RateFile = read_config(&common.config)?;
    if let Some(s) = common.seed {
        file.construction.seed = s;
    }
    let (points, b) = rate_equivocation_curve(&file.construction, &file.sizes)?;
    let rows: Vec<RateRow> = points
        .iter()
        .map(|p| RateRow {
            n: p.n,
            k: p.k,
            r_t: p.r_t,
            l_k_e: p.l_k_e,
            r_e_bar: p.r_e_bar,
            r_e: p.r_e,
            i_xy: b.i_xy,
            i_xz: b.i_xz,
            r_s: b.r_s,
        })
        .collect();
    emit(common, &rows, || {
        rows.iter()
            .flat_map(|r| {
                [
                    plot(format!("r_e_bar/N{}", r.n), r.r_t, r.r_e_bar),
                    plot(format!("l_k_e/N{}", r.n), r.r_t, r.l_k_e),
                ]
            })
            .collect()
    })
}

#[derive(Deserialize)]
struct MaxKFile {
    #[serde(flatten)]
    search: MaxKConfig,
    #[serde(default)]
    sim: SimConfig,
}

fn max_k(common: &Common) -> anyhow::Result<()> {
    let file: MaxKFile = read_config(&common.config)?;
    let rows = max_k_search(&file.search, &seeded(file.sim, common.seed))?;
    emit(common, &rows, || {
        rows.iter()
            .map(|r| {
                let kind = if r.shaped { "shaped" } else { "uniform" };
                plot(format!("Q{}-{kind}", r.order), r.snr_b_db, r.max_k as f64)
            })
            .collect()
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::OptimizeDistribution(c) => optimize_distribution(c),
        Command::Construct { common, structure } => construct(common, structure.as_deref()),
        Command::Simulate(c) => simulate(c),
        Command::SecurityGap(c) => gap(c),
        Command::RateEquivocation(c) => rate_equivocation(c),
        Command::MaxK(c) => max_k(c),
    }
}

/// Exit status for infeasible or unreachable targets.
const INFEASIBLE: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::Infeasible { .. } | Error::ThresholdUnreachable { .. }) => {
                    ExitCode::from(INFEASIBLE)
                }
                _ => ExitCode::FAILURE,
            }
        }
    }
}
