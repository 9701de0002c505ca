//! Subcommand arguments and runners shared by `nukesctl` and `hsic`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use nukes_core::gmsa::{GaborBank, GaborConfig};
use nukes_core::gradcore::CheckOptions;
use nukes_core::hsicube::{
    default_srf, degrade, load_cube, load_srf_csv, null_component, range_component, save_cube, save_srf_csv,
    synth_scene, RgbImage, SceneSpec, SrfOperator,
};
use nukes_core::metrics::{error_map, BandSelect, MetricReport, SamMode};
use nukes_core::nukes::{basis_count, bspline_basis_matrix, uniform_knots, NcpgConfig};
use nukes_core::nukesformer::{count_params, GeneratorConfig, NukesFormer, Role};

use crate::ablate::{ablation_csv, median_psnr, run_ablation, Variant};
use crate::checkpoint::{load_for_inference, save_checkpoint};
use crate::config::{Precision, TrainConfig};
use crate::gradsuite::{registry, run_cases, select, suite_options};
use crate::manifest::{config_hash, RunManifest};
use crate::train::{loss_csv, reconstruct, train};
use crate::{HarnessError, Result};

/// How a command ended when it did not hit an error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    CheckFailed,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

pub fn exit_code(r: &Result<Status>) -> i32 {
    match r {
        Ok(Status::Ok) => EXIT_OK,
        Ok(Status::CheckFailed) => EXIT_CHECK,
        Err(_) => EXIT_DATA,
    }
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got `{s}`"))?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad width in `{s}`"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad height in `{s}`"))?;
    if w == 0 || h == 0 {
        return Err(format!("empty size `{s}`"));
    }
    Ok((w, h))
}

fn parse_sam_mode(s: &str) -> std::result::Result<SamMode, String> {
    match s {
        "band" => Ok(SamMode::Band),
        "pixel" => Ok(SamMode::Pixel),
        _ => Err(format!("expected `band` or `pixel`, got `{s}`")),
    }
}

fn parse_precision(s: &str) -> std::result::Result<Precision, String> {
    match s {
        "f64" => Ok(Precision::F64),
        "f32" => Ok(Precision::F32),
        _ => Err(format!("expected `f64` or `f32`, got `{s}`")),
    }
}

fn srf_for(path: Option<&Path>, bands: usize) -> Result<SrfOperator> {
    let srf = match path {
        Some(p) => load_srf_csv(p)?,
        None => default_srf(bands)?,
    };
    if srf.bands() != bands {
        return Err(HarnessError::ConfigInvalid(format!(
            "SRF has {} bands, cube has {bands}",
            srf.bands()
        )));
    }
    Ok(srf)
}

/// Writes to `path`, or stdout for `-`.
fn write_text(path: &Path, text: &str) -> Result<()> {
    if path.as_os_str() == "-" {
        let mut out = std::io::stdout().lock();
        return out.write_all(text.as_bytes()).map_err(|e| HarnessError::io(path, e));
    }
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 31)]
    pub bands: usize,
    /// Spatial size as WxH.
    #[arg(long, value_parser = parse_size, default_value = "32x32")]
    pub size: (usize, usize),
    #[arg(long, default_value_t = 4)]
    pub endmembers: usize,
    /// Blur scale of the abundance fields, in pixels.
    #[arg(long, default_value_t = 3.0)]
    pub smoothness: f64,
    #[arg(short = 'o', long = "out")]
    pub out: PathBuf,
    /// Also write the RGB rendering of the scene (a 3-band cube).
    #[arg(long)]
    pub rgb: Option<PathBuf>,
    /// SRF used for `--rgb`; defaults to the built-in curves.
    #[arg(long)]
    pub srf: Option<PathBuf>,
    /// Write the SRF in use as CSV.
    #[arg(long)]
    pub srf_out: Option<PathBuf>,
}

pub fn cmd_synth(a: &SynthArgs) -> Result<Status> {
    let spec = SceneSpec {
        seed: a.seed,
        n_endmembers: a.endmembers,
        spatial_smoothness: a.smoothness,
        bands: a.bands,
        width: a.size.0,
        height: a.size.1,
    };
    let cube = synth_scene(&spec)?;
    save_cube(&cube, &a.out)?;
    if a.rgb.is_some() || a.srf_out.is_some() {
        let srf = srf_for(a.srf.as_deref(), a.bands)?;
        if let Some(p) = &a.rgb {
            save_cube(&degrade(&cube, &srf, false, 0)?.to_cube(), p)?;
        }
        if let Some(p) = &a.srf_out {
            save_srf_csv(&srf, p)?;
        }
    }
    eprintln!("wrote {} ({}x{}x{})", a.out.display(), a.size.0, a.size.1, a.bands);
    Ok(Status::Ok)
}

// ---------------------------------------------------------------- rnd

#[derive(Debug, Args)]
pub struct RndArgs {
    /// 3-row CSV; defaults to the built-in curves.
    #[arg(long)]
    pub srf: Option<PathBuf>,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub range: PathBuf,
    #[arg(long)]
    pub null: PathBuf,
}

pub fn cmd_rnd(a: &RndArgs) -> Result<Status> {
    let cube = load_cube(&a.input)?;
    let srf = srf_for(a.srf.as_deref(), cube.bands())?;
    let r = range_component(&cube, &srf)?;
    let n = null_component(&cube, &srf)?;
    save_cube(&r, &a.range)?;
    save_cube(&n, &a.null)?;
    let recon = r
        .data()
        .iter()
        .zip(n.data())
        .zip(cube.data())
        .map(|((a, b), c)| (a + b - c).abs())
        .fold(0.0, f64::max);
    eprintln!("max |range + null - input| = {recon:.3e}");
    Ok(Status::Ok)
}

// ---------------------------------------------------------------- train

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON config; every field is optional.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for losses.csv, ckpt/ and run.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_precision)]
    pub precision: Option<Precision>,
    /// Use the full stage layout {1,2,4,2,1}.
    #[arg(long)]
    pub full: bool,
    /// Print averaged losses every N steps (0 = quiet).
    #[arg(long, default_value_t = 50)]
    pub log_every: usize,
}

pub fn load_config(path: Option<&Path>) -> Result<TrainConfig> {
    match path {
        Some(p) => TrainConfig::load(p),
        None => Ok(TrainConfig::default()),
    }
}

/// Trains and writes `losses.csv`, `ckpt/` and `run.json` under `out`.
pub fn run_training(cfg: TrainConfig, out: &Path, log_every: usize) -> Result<RunManifest> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let weights = cfg.losses.clone();
    let mut acc = 0.0;
    let outcome = train(cfg.clone(), |step, p| {
        acc += p.total(&weights);
        if log_every > 0 && step % log_every == 0 {
            eprintln!("step {step:>5}  mean total {:.4}", acc / log_every as f64);
            acc = 0.0;
        }
    })?;
    let csv_path = out.join("losses.csv");
    fs::write(&csv_path, loss_csv(&outcome.losses, &cfg)).map_err(|e| HarnessError::io(&csv_path, e))?;
    save_checkpoint(&out.join("ckpt"), &outcome.model.config, &outcome.params)?;
    let manifest = RunManifest {
        input_hash: config_hash(&cfg),
        loss_csv: "losses.csv".into(),
        checkpoint: "ckpt".into(),
        params_train: count_params(&outcome.model, Role::Train),
        params_infer: count_params(&outcome.model, Role::Infer),
        init_report: outcome.init_val,
        final_report: outcome.final_val,
        config: cfg,
    };
    manifest.write(&out.join("run.json"))?;
    Ok(manifest)
}

fn fmt_psnr(v: Option<f64>) -> String {
    v.map_or("inf".into(), |p| format!("{p:.2}"))
}

pub fn cmd_train(a: &TrainArgs) -> Result<Status> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(s) = a.steps {
        cfg.steps = s;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(p) = a.precision {
        cfg.precision = p;
    }
    if a.full {
        cfg.generator.stage_blocks = GeneratorConfig::full().stage_blocks;
    }
    let t = Instant::now();
    let m = run_training(cfg, &a.out, a.log_every)?;
    println!(
        "trained {} steps in {:.1}s: val PSNR {} -> {} dB, SAM {:.2} -> {:.2} deg",
        m.config.steps,
        t.elapsed().as_secs_f64(),
        fmt_psnr(m.init_report.psnr_db),
        fmt_psnr(m.final_report.psnr_db),
        m.init_report.sam_deg,
        m.final_report.sam_deg
    );
    println!("params: train {}, infer {}", m.params_train, m.params_infer);
    Ok(Status::Ok)
}

// ---------------------------------------------------------------- infer

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// RGB input stored as a 3-band cube.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_infer(a: &InferArgs) -> Result<Status> {
    let loaded = load_for_inference(&a.ckpt)?;
    let model = NukesFormer::new(loaded.model.clone())?;
    let rgb = RgbImage::from_cube(&load_cube(&a.input)?)?;
    let hsi = reconstruct(&model, &loaded.params, rgb.to_tensor())?;
    save_cube(&hsi, &a.out)?;
    eprintln!(
        "loaded groups [{}] from [{}]; wrote {}x{}x{}",
        loaded.groups.join(", "),
        loaded.files_read.join(", "),
        hsi.width(),
        hsi.height(),
        hsi.bands()
    );
    Ok(Status::Ok)
}

// ---------------------------------------------------------------- metrics

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub rec: PathBuf,
    #[arg(long)]
    pub json: PathBuf,
    #[arg(long, value_parser = parse_sam_mode, default_value = "band")]
    pub sam_mode: SamMode,
    /// Per-pixel RMSE map as binary PGM.
    #[arg(long)]
    pub errmap: Option<PathBuf>,
    /// Restrict the error map to one band.
    #[arg(long)]
    pub errmap_band: Option<usize>,
}

pub fn cmd_metrics(a: &MetricsArgs) -> Result<Status> {
    let x = load_cube(&a.reference)?;
    let y = load_cube(&a.rec)?;
    let report = MetricReport::compute(&x, &y, a.sam_mode)?;
    fs::write(&a.json, report.to_json()).map_err(|e| HarnessError::io(&a.json, e))?;
    if let Some(p) = &a.errmap {
        let sel = a.errmap_band.map_or(BandSelect::All, BandSelect::One);
        error_map(&x, &y, sel, p)?;
    }
    println!(
        "RMSE {:.6}  MRAE {:.6}  PSNR {} dB  SSIM {:.6}  SAM {:.4} deg",
        report.rmse,
        report.mrae,
        fmt_psnr(report.psnr_db),
        report.ssim_mean,
        report.sam_deg
    );
    Ok(Status::Ok)
}

// ---------------------------------------------------------------- gradcheck

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Only cases whose name starts with this.
    #[arg(long, default_value = "")]
    pub filter: String,
    /// List the registered cases and exit.
    #[arg(long)]
    pub list: bool,
    /// Sampled coordinates per input tensor (0 = all).
    #[arg(long)]
    pub max_coords: Option<usize>,
}

pub fn cmd_gradcheck(a: &GradcheckArgs) -> Result<Status> {
    if a.list {
        for c in registry() {
            println!("{:<9} {}", c.kind.to_string(), c.name);
        }
        return Ok(Status::Ok);
    }
    let cases = select(&a.filter);
    if cases.is_empty() {
        return Err(HarnessError::ConfigInvalid(format!("no case matches `{}`", a.filter)));
    }
    let mut opts: CheckOptions = suite_options();
    if let Some(k) = a.max_coords {
        opts.max_coords = (k > 0).then_some(k);
    }
    let t = Instant::now();
    let rep = run_cases(&cases, &opts);
    for l in rep.lines() {
        println!("{l}");
    }
    let failed = rep.failures().len();
    println!(
        "{}/{} cases passed (registry {}), worst rel err {:.3e}, tol {:.0e}, {:.1}s",
        rep.results.len() - failed,
        rep.results.len(),
        registry().len(),
        rep.worst(),
        rep.tol,
        t.elapsed().as_secs_f64()
    );
    Ok(if failed == 0 { Status::Ok } else { Status::CheckFailed })
}

// ---------------------------------------------------------------- ablate

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated: base, no-nukes, no-gmsa, no-dcpm-g, no-dcpm-s.
    #[arg(long, value_delimiter = ',', default_value = "base,no-nukes,no-gmsa,no-dcpm-g,no-dcpm-s")]
    pub variants: Vec<Variant>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Comparison CSV.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
    /// Exit with the check-failure code unless the base median PSNR is at
    /// least every variant's.
    #[arg(long)]
    pub check: bool,
}

pub fn cmd_ablate(a: &AblateArgs) -> Result<Status> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(s) = a.steps {
        cfg.steps = s;
    }
    cfg.validate()?;
    let rows = run_ablation(&cfg, &a.variants, &a.seeds, |r| {
        eprintln!("{:<10} seed {:<3} PSNR {:.3} dB", r.variant.name(), r.seed, r.psnr());
    })?;
    write_text(&a.out, &ablation_csv(&rows))?;
    let base = median_psnr(&rows, Variant::Base);
    let mut ok = true;
    for &v in &a.variants {
        let m = median_psnr(&rows, v).unwrap_or(f64::NAN);
        eprintln!("median {:<10} {m:.3} dB", v.name());
        if let Some(b) = base {
            ok &= v == Variant::Base || b >= m;
        }
    }
    Ok(if a.check && (!ok || base.is_none()) { Status::CheckFailed } else { Status::Ok })
}

// ---------------------------------------------------------------- gabor-bank

#[derive(Debug, Args)]
pub struct GaborArgs {
    /// CSV destination (`-` for stdout).
    #[arg(long)]
    pub dump: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub kernels: usize,
    #[arg(long, default_value_t = 7)]
    pub size: usize,
    #[arg(long, default_value_t = 2.0)]
    pub sigma: f64,
    /// Per-kernel frequencies (default all 1).
    #[arg(long, value_delimiter = ',')]
    pub freqs: Vec<f64>,
    /// Per-kernel orientations in radians (default evenly spread).
    #[arg(long, value_delimiter = ',')]
    pub thetas: Vec<f64>,
    #[arg(long)]
    pub alt_form: bool,
}

/// One CSV row per kernel row: `kernel,freq,theta,row,c0..c{k-1}`.
pub fn gabor_csv(bank: &GaborBank) -> Result<String> {
    let k = bank.config.size;
    let mut s = String::from("kernel,freq,theta,row");
    for c in 0..k {
        s.push_str(&format!(",c{c}"));
    }
    s.push('\n');
    for (j, kern) in bank.kernels()?.iter().enumerate() {
        for r in 0..k {
            s.push_str(&format!("{j},{},{},{r}", bank.freqs[j], bank.theta[j]));
            for v in &kern[r * k..(r + 1) * k] {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
    }
    Ok(s)
}

pub fn cmd_gabor(a: &GaborArgs) -> Result<Status> {
    let config = GaborConfig { kernels: a.kernels, size: a.size, sigma: a.sigma, alt_form: a.alt_form };
    let mut bank = GaborBank::evenly_spaced(config);
    if !a.freqs.is_empty() {
        bank.freqs = a.freqs.clone();
    }
    if !a.thetas.is_empty() {
        bank.theta = a.thetas.clone();
    }
    write_text(&a.dump, &gabor_csv(&bank)?)?;
    Ok(Status::Ok)
}

// ---------------------------------------------------------------- spline

#[derive(Debug, Args)]
pub struct SplineArgs {
    /// CSV destination (`-` for stdout).
    #[arg(long)]
    pub eval: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    /// Interior knots of the default uniform clamped vector.
    #[arg(long, default_value_t = 8)]
    pub interior: usize,
    #[arg(long, default_value_t = 4.0)]
    pub radius: f64,
    /// Explicit full knot vector; overrides `--interior`/`--radius`.
    #[arg(long, value_delimiter = ',')]
    pub knots: Vec<f64>,
    #[arg(long, default_value_t = 201)]
    pub samples: usize,
}

/// `x,B0..B{n-1},sum` over `samples` evenly spaced points of the domain.
pub fn spline_csv(degree: usize, knots: &[f64], samples: usize) -> Result<String> {
    if samples < 2 {
        return Err(HarnessError::ConfigInvalid("need at least 2 samples".into()));
    }
    let n = basis_count(degree, knots);
    let (lo, hi) = (knots[degree], knots[knots.len() - 1 - degree]);
    let xs: Vec<f64> = (0..samples)
        .map(|i| lo + (hi - lo) * i as f64 / (samples - 1) as f64)
        .collect();
    let rows = bspline_basis_matrix(degree, &xs, knots)?;
    let mut s = String::from("x");
    for i in 0..n {
        s.push_str(&format!(",B{i}"));
    }
    s.push_str(",sum\n");
    for (x, row) in xs.iter().zip(&rows) {
        let dense = row.dense(n);
        s.push_str(&format!("{x}"));
        for v in &dense {
            s.push_str(&format!(",{v}"));
        }
        s.push_str(&format!(",{}\n", dense.iter().sum::<f64>()));
    }
    Ok(s)
}

pub fn cmd_spline(a: &SplineArgs) -> Result<Status> {
    let knots = if a.knots.is_empty() {
        let cfg = NcpgConfig { degree: a.degree, interior_knots: a.interior, radius: a.radius };
        cfg.validate()?;
        uniform_knots(&cfg)
    } else {
        a.knots.clone()
    };
    write_text(&a.eval, &spline_csv(a.degree, &knots, a.samples)?)?;
    Ok(Status::Ok)
}

// ---------------------------------------------------------------- front ends

#[derive(Debug, Parser)]
#[command(name = "nukesctl", version, about = "RGB-to-hyperspectral reconstruction toolkit")]
pub struct Nukesctl {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a linear-mixture scene.
    Synth(SynthArgs),
    /// Split a cube into SRF range and null components.
    Rnd(RndArgs),
    /// Train on synthetic unpaired data.
    Train(TrainArgs),
    /// Reconstruct a hyperspectral cube from RGB with a checkpoint.
    Infer(InferArgs),
    /// Compare a reconstruction with a reference.
    Metrics(MetricsArgs),
    /// Finite-difference checks of every registered gradient.
    Gradcheck(GradcheckArgs),
    /// Train model variants and compare validation PSNR.
    Ablate(AblateArgs),
    /// Dump a Gabor kernel bank.
    GaborBank(GaborArgs),
    /// Dump B-spline basis values.
    Spline(SplineArgs),
}

impl Command {
    pub fn run(&self) -> Result<Status> {
        match self {
            Command::Synth(a) => cmd_synth(a),
            Command::Rnd(a) => cmd_rnd(a),
            Command::Train(a) => cmd_train(a),
            Command::Infer(a) => cmd_infer(a),
            Command::Metrics(a) => cmd_metrics(a),
            Command::Gradcheck(a) => cmd_gradcheck(a),
            Command::Ablate(a) => cmd_ablate(a),
            Command::GaborBank(a) => cmd_gabor(a),
            Command::Spline(a) => cmd_spline(a),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hsic", version, about = "Hyperspectral cube utilities")]
pub struct Hsic {
    #[command(subcommand)]
    pub command: HsicCommand,
}

#[derive(Debug, Subcommand)]
pub enum HsicCommand {
    /// Synthesize a linear-mixture scene.
    Synth(SynthArgs),
    /// Split a cube into SRF range and null components.
    Rnd(RndArgs),
}

impl HsicCommand {
    pub fn run(&self) -> Result<Status> {
        match self {
            HsicCommand::Synth(a) => cmd_synth(a),
            HsicCommand::Rnd(a) => cmd_rnd(a),
        }
    }
}

/// Parses `args`, validates `NUKES_THREADS`, runs the command and returns
/// the process exit code.
pub fn main_with<P: Parser>(args: impl IntoIterator<Item = String>, run: impl FnOnce(&P) -> Result<Status>) -> i32 {
    let parsed = match P::try_parse_from(args) {
        Ok(p) => p,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(msg) = crate::thread_cap() {
        eprintln!("error: {msg}");
        return EXIT_USAGE;
    }
    let r = run(&parsed);
    if let Err(e) = &r {
        eprintln!("error: {e}");
    }
    exit_code(&r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_parse() {
        assert_eq!(parse_size("32x16"), Ok((32, 16)));
        assert!(parse_size("32").is_err());
        assert!(parse_size("0x4").is_err());
    }

    #[test]
    fn spline_rows_sum_to_one() {
        let cfg = NcpgConfig::default();
        let csv = spline_csv(3, &uniform_knots(&cfg), 11).unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 12);
        assert!(lines[0].starts_with("x,B0,"));
        for l in &lines[1..] {
            let sum: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
            assert!((sum - 1.0).abs() < 1e-12, "{l}");
        }
    }

    #[test]
    fn gabor_dump_has_one_row_per_kernel_row() {
        let bank = GaborBank::evenly_spaced(GaborConfig { kernels: 2, size: 5, ..GaborConfig::default() });
        let csv = gabor_csv(&bank).unwrap();
        assert_eq!(csv.lines().count(), 1 + 2 * 5);
        assert_eq!(csv.lines().nth(1).unwrap().split(',').count(), 4 + 5);
    }

    #[test]
    fn usage_errors_exit_one() {
        let args = ["nukesctl", "metrics", "--ref"].map(String::from);
        assert_eq!(main_with::<Nukesctl>(args, |p| p.command.run()), EXIT_USAGE);
    }
}
