//! Command-line front end.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::curvelet::{default_scales, CurveletSystem};
use crate::error::{Error, Result};
use crate::experiments::{self, ExperimentConfig, NoiseSpec, Phantom};
use crate::geometry::{AngularRange, Image};
use crate::io;
use crate::radon::{fbp, radon, FbpFilter, RadonGeometry};
use crate::solver::{reconstruct, ForwardOperator, SolverConfig};
use crate::visibility::{dimension_profile, extract_range, invisible_indices};

#[derive(Debug, Parser)]
#[command(name = "limtomo", version, about = "Curvelet sparse regularization for limited-angle tomography")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Project an image into a sinogram.
    Radon,
    /// Reconstruct an image from a sinogram.
    Reconstruct,
    /// Classify curvelet indices for an angular range.
    Visibility,
    /// Regenerate the data behind a figure or table.
    Reproduce {
        #[arg(value_enum)]
        id: Figure,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig5,
    Fig7,
    Fig8,
    Fig9,
    Fig10,
    Table1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Csr,
    Acsr,
    Fbp,
}

#[derive(Debug, Default, Args)]
pub struct Options {
    /// angular range as CENTER:HALFWIDTH in degrees
    #[arg(long, global = true, value_name = "CENTER:HALFWIDTH")]
    pub range_deg: Option<String>,
    /// file of projection angles in degrees
    #[arg(long, global = true, value_name = "FILE")]
    pub angles: Option<PathBuf>,
    /// angle increment for --range-deg, degrees
    #[arg(long, global = true)]
    pub step_deg: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub method: Option<Method>,
    #[arg(long, global = true)]
    pub iters: Option<usize>,
    /// noise level as a fraction of the data range
    #[arg(long, global = true)]
    pub noise: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// number of curvelet scales
    #[arg(long, global = true)]
    pub scales: Option<usize>,
    /// image side length in pixels
    #[arg(long, global = true)]
    pub size: Option<usize>,
    /// synthetic phantom used when no --in is given
    #[arg(long, global = true)]
    pub phantom: Option<String>,
    /// FBP filter: ram-lak, shepp-logan or hann
    #[arg(long, global = true)]
    pub filter: Option<String>,
    #[arg(long = "in", global = true, value_name = "PATH")]
    pub input: Option<PathBuf>,
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// key=value file mirroring the flags; flags win
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

/// Flags merged over an optional config file.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: HashMap<String, String>,
}

impl RunConfig {
    pub fn resolve(opts: &Options) -> Result<Self> {
        let mut values = HashMap::new();
        if let Some(p) = &opts.config {
            let text = fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            for (k, v) in io::parse_config(&text)? {
                values.insert(k.replace('_', "-"), v);
            }
        }
        let flags: [(&str, Option<String>); 13] = [
            ("range-deg", opts.range_deg.clone()),
            ("angles", opts.angles.as_ref().map(|p| p.display().to_string())),
            ("step-deg", opts.step_deg.map(|v| v.to_string())),
            ("method", opts.method.map(|m| format!("{m:?}").to_lowercase())),
            ("iters", opts.iters.map(|v| v.to_string())),
            ("noise", opts.noise.map(|v| v.to_string())),
            ("seed", opts.seed.map(|v| v.to_string())),
            ("scales", opts.scales.map(|v| v.to_string())),
            ("size", opts.size.map(|v| v.to_string())),
            ("phantom", opts.phantom.clone()),
            ("filter", opts.filter.clone()),
            ("in", opts.input.as_ref().map(|p| p.display().to_string())),
            ("out", opts.out.as_ref().map(|p| p.display().to_string())),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                values.insert(k.to_string(), v);
            }
        }
        Ok(RunConfig { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|_| Error::Parse(format!("invalid value '{v}' for {key}"))))
            .transpose()
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }

    fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.path("out").unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    fn method(&self) -> Result<Method> {
        match self.get("method") {
            None => Ok(Method::Acsr),
            Some(m) => Method::from_str(m, true).map_err(|_| Error::Argument(format!("unknown method '{m}'"))),
        }
    }

    /// Projection angles in degrees from `angles` or `range-deg`.
    pub fn angles_deg(&self) -> Result<Option<Vec<f64>>> {
        if let Some(p) = self.path("angles") {
            let text = fs::read_to_string(&p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            return parse_angle_list(&text).map(Some);
        }
        let Some(spec) = self.get("range-deg") else {
            return Ok(None);
        };
        let step = self.parse::<f64>("step-deg")?.unwrap_or(1.0);
        let range = parse_range(spec)?;
        let (c, h) = (range.center.to_degrees(), range.half_width.to_degrees());
        if !(step > 0.0) {
            return Err(Error::Argument(format!("angle step must be positive, got {step}")));
        }
        // a full half turn must not repeat its first line
        let end = if 2.0 * h >= 180.0 { c + 90.0 - step } else { c + h };
        let start = if 2.0 * h >= 180.0 { c - 90.0 } else { c - h };
        let n = ((end - start) / step + 1e-9).floor() as usize;
        Ok(Some((0..=n).map(|i| start + i as f64 * step).collect()))
    }
}

/// `CENTER:HALFWIDTH` in degrees.
pub fn parse_range(spec: &str) -> Result<AngularRange> {
    let (c, h) = spec
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("range '{spec}' is not CENTER:HALFWIDTH")))?;
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("range '{spec}' is not numeric")));
    AngularRange::from_degrees(num(c)?, num(h)?)
}

/// Degrees separated by whitespace or commas; `#` starts a comment.
pub fn parse_angle_list(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            out.push(tok.parse::<f64>().map_err(|_| Error::Parse(format!("bad angle '{tok}'")))?);
        }
    }
    if out.is_empty() {
        return Err(Error::Argument("angle file holds no angles".into()));
    }
    Ok(out)
}

/// Square image side whose detector has `offset_count` bins.
pub fn side_for_detector(offset_count: usize) -> Option<usize> {
    let guess = (offset_count as f64 / std::f64::consts::SQRT_2).round() as usize;
    (guess.saturating_sub(2)..=guess + 2)
        .find(|&n| n > 0 && RadonGeometry::for_image(vec![0.0], n, n, 1.0).is_ok_and(|g| g.offset_count == offset_count))
}

/// Exit code for an error: 1 numerical failure, 2 usage or input problem.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Unstable { .. } | Error::State(_) | Error::Geometry(_) => 1,
        _ => 2,
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = RunConfig::resolve(&cli.opts)?;
    match &cli.command {
        Command::Radon => cmd_radon(&cfg),
        Command::Reconstruct => cmd_reconstruct(&cfg),
        Command::Visibility => cmd_visibility(&cfg),
        Command::Reproduce { id } => cmd_reproduce(*id, &cfg),
    }
}

fn input_image(cfg: &RunConfig) -> Result<Image> {
    match (cfg.path("in"), cfg.get("phantom")) {
        (Some(p), _) => {
            if !p.exists() {
                return Err(Error::Argument(format!("input '{}' does not exist", p.display())));
            }
            io::read_image(&p)
        }
        (None, Some(kind)) => experiments::make_phantom(&kind.parse::<Phantom>()?, cfg.parse("size")?.unwrap_or(256)),
        (None, None) => Err(Error::Argument("radon needs --in PATH or --phantom KIND".into())),
    }
}

fn cmd_radon(cfg: &RunConfig) -> Result<()> {
    let f = input_image(cfg)?;
    let angles = cfg.angles_deg()?.unwrap_or_else(|| (0..180).map(f64::from).collect());
    let geom = RadonGeometry::from_degrees(&angles, f.width, f.height)?;
    let mut g = radon(&f, &geom)?;
    let noise = cfg.parse::<f64>("noise")?.unwrap_or(0.0);
    let mut sigma = 0.0;
    if noise > 0.0 {
        let spec = NoiseSpec { level: noise, seed: cfg.parse("seed")?.unwrap_or(42) };
        (g, sigma) = experiments::add_noise(&g, &spec)?;
    }
    let dir = cfg.out_dir()?;
    io::write_sinogram(&dir.join("sinogram.csv"), &g)?;
    io::write_sinogram_pgm(&dir.join("sinogram.pgm"), &g)?;
    io::write_json(
        &dir.join("manifest.json"),
        &json!({"command": "radon", "width": f.width, "height": f.height, "angles_deg": angles,
                "offset_count": geom.offset_count, "offset_spacing": geom.offset_spacing,
                "noise_level": noise, "sigma_true": sigma, "seed": cfg.get("seed")}),
    )?;
    println!("wrote {} angles x {} offsets to {}", angles.len(), geom.offset_count, dir.display());
    Ok(())
}

fn cmd_reconstruct(cfg: &RunConfig) -> Result<()> {
    let path = cfg.path("in").ok_or_else(|| Error::Argument("reconstruct needs --in SINOGRAM".into()))?;
    if !path.exists() {
        return Err(Error::Argument(format!("input '{}' does not exist", path.display())));
    }
    let g = io::read_sinogram(&path)?;
    let geom = RadonGeometry::of_sinogram(&g)?;
    let size = match cfg.parse::<usize>("size")? {
        Some(n) => n,
        None => side_for_detector(geom.offset_count)
            .ok_or_else(|| Error::Argument("cannot infer the image size; pass --size".into()))?,
    };
    let method = cfg.method()?;
    let dir = cfg.out_dir()?;
    let start = Instant::now();
    let mut manifest = json!({"command": "reconstruct", "input": path.display().to_string(), "size": size,
                              "method": format!("{method:?}").to_lowercase(), "angles": g.angles.len()});
    let image = match method {
        Method::Fbp => {
            let filter = match cfg.get("filter") {
                Some(k) => FbpFilter::new(k.parse()?, 1.0)?,
                None => FbpFilter::default(),
            };
            fbp(&g, size, size, 1.0, &filter)?
        }
        Method::Csr | Method::Acsr => {
            let scales = cfg.parse::<usize>("scales")?.unwrap_or_else(|| default_scales(size, size));
            let system = Arc::new(CurveletSystem::build(size, size, scales)?);
            let part = match method {
                Method::Acsr => Some(invisible_indices(&system, &extract_range(&g.angles)?)?),
                _ => None,
            };
            let (visible, full) = match &part {
                Some(p) => (p.visible_count(), p.full_dim()),
                None => (system.num_coefficients(), system.num_coefficients()),
            };
            let op = ForwardOperator::new(system, geom, part)?;
            let t = Instant::now();
            op.operator_norm()?;
            let norm_ms = t.elapsed().as_secs_f64() * 1e3;
            let solver = SolverConfig { max_iter: cfg.parse("iters")?.unwrap_or(100), ..Default::default() };
            let rec = reconstruct(&op, &g, &solver)?;
            fs::write(dir.join("trace.csv"), io::trace_csv(&rec.trace))?;
            fs::write(dir.join("coeffs.bin"), io::coeffs_to_bytes(&rec.coeffs))?;
            manifest["scales"] = json!(scales);
            manifest["full_dim"] = json!(full);
            manifest["reduced_dim"] = json!(visible);
            manifest["invisible"] = json!(full - visible);
            manifest["iterations"] = json!(rec.iterations);
            manifest["norm_ms"] = json!(norm_ms);
            manifest["solve_ms"] = json!(rec.wall_ms);
            rec.image
        }
    };
    io::write_pgm(&dir.join("image.pgm"), &image)?;
    fs::write(dir.join("image.csv"), io::image_to_grid_csv(&image))?;
    manifest["wall_ms"] = json!(start.elapsed().as_secs_f64() * 1e3);
    io::write_json(&dir.join("manifest.json"), &manifest)?;
    println!("reconstructed {size}x{size} image into {}", dir.display());
    Ok(())
}

fn cmd_visibility(cfg: &RunConfig) -> Result<()> {
    let range = match (cfg.get("angles"), cfg.get("range-deg")) {
        (Some(_), _) => extract_range(&cfg.angles_deg()?.unwrap().iter().map(|a| a.to_radians()).collect::<Vec<_>>())?,
        (None, Some(r)) => parse_range(r)?,
        (None, None) => return Err(Error::Argument("visibility needs --range-deg or --angles".into())),
    };
    let size = cfg.parse::<usize>("size")?.unwrap_or(256);
    let scales = cfg.parse::<usize>("scales")?.unwrap_or_else(|| default_scales(size, size));
    let system = CurveletSystem::build(size, size, scales)?;
    let part = invisible_indices(&system, &range)?;
    let thetas: Vec<f64> = (1..=18).map(|i| 10.0 * i as f64).collect();
    let profile = dimension_profile(&system, &thetas)?;
    let dir = cfg.out_dir()?;
    fs::write(dir.join("partition.csv"), io::partition_csv(&part))?;
    fs::write(dir.join("dimension_profile.csv"), io::profile_csv(&profile))?;
    io::write_json(
        &dir.join("manifest.json"),
        &json!({"command": "visibility", "size": size, "scales": scales,
                "center_deg": range.center.to_degrees(), "half_width_deg": range.half_width.to_degrees(),
                "full_dim": part.full_dim(), "visible": part.visible_count(), "invisible": part.invisible_count(),
                "invisible_orientations": part.invisible_orientations()}),
    )?;
    println!(
        "{} of {} coefficients invisible ({} orientations)",
        part.invisible_count(),
        part.full_dim(),
        part.invisible_orientations().len()
    );
    Ok(())
}

fn experiment_config(cfg: &RunConfig, dir: &Path) -> Result<ExperimentConfig> {
    let mut e = ExperimentConfig { out_dir: dir.to_path_buf(), ..Default::default() };
    if let Some(v) = cfg.parse("size")? {
        e.size = v;
    }
    if let Some(v) = cfg.parse("scales")? {
        e.num_scales = v;
    }
    if let Some(v) = cfg.parse("iters")? {
        e.iters = v;
    }
    if let Some(v) = cfg.parse("noise")? {
        e.noise = v;
    }
    if let Some(v) = cfg.parse("seed")? {
        e.seed = v;
    }
    if let Some(p) = cfg.get("phantom") {
        e.phantoms = vec![p.parse()?];
    }
    e.input = cfg.path("in");
    Ok(e)
}

struct Check {
    name: String,
    pass: bool,
    detail: String,
}

fn num(v: &serde_json::Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn checks_for(id: Figure, m: &serde_json::Value) -> Vec<Check> {
    let r = &m["results"];
    let mut out = Vec::new();
    match id {
        Figure::Fig5 => {
            for (range, expect) in r["ranges"].as_array().into_iter().flatten().zip([vec![3, 4], vec![4]]) {
                let got: Vec<i64> = range["invisible"].as_array().into_iter().flatten().map(|x| x["member"].as_i64().unwrap_or(0)).collect();
                let expect: Vec<i64> = expect.into_iter().collect();
                out.push(Check {
                    name: format!("invisible set at phi={}", num(&range["phi_deg"])),
                    pass: got == expect,
                    detail: format!("{got:?} (expected {expect:?})"),
                });
            }
        }
        Figure::Fig7 => {
            out.push(Check { name: "reduced dim nondecreasing".into(), pass: r["monotone"] == json!(true), detail: String::new() });
            let steps: Vec<f64> = r["step_thetas_deg"].as_array().into_iter().flatten().map(num).collect();
            let width = num(&r["finest_window_deg"]);
            let spaced = steps.windows(2).all(|w| ((w[1] - w[0]) / width - ((w[1] - w[0]) / width).round()).abs() < 0.05);
            out.push(Check { name: "steps on finest window grid".into(), pass: spaced, detail: format!("{steps:?}") });
        }
        Figure::Fig8 => {
            for row in r["rows"].as_array().into_iter().flatten() {
                let (t, ratio) = (num(&row[0]), num(&row[3]));
                if t <= 120.0 {
                    out.push(Check { name: format!("acsr faster at {t}"), pass: ratio < 1.0, detail: format!("ratio {ratio:.3}") });
                }
                if t == 35.0 {
                    out.push(Check { name: "ratio <= 0.8 at 35".into(), pass: ratio <= 0.8, detail: format!("ratio {ratio:.3}") });
                }
            }
        }
        Figure::Fig9 => {
            let rows: Vec<(f64, f64)> = r["rows"].as_array().into_iter().flatten().map(|x| (num(&x["theta_deg"]), num(&x["mse_csr"]))).collect();
            for &(t, v) in &rows {
                if let Some(&(_, prev)) = rows.iter().find(|(p, _)| (p - (t - 30.0)).abs() < 1e-9) {
                    out.push(Check { name: format!("mse at {t} <= mse at {}", t - 30.0), pass: v <= prev, detail: format!("{v:.3e} vs {prev:.3e}") });
                }
            }
        }
        Figure::Fig10 => {
            for x in r["rows"].as_array().into_iter().flatten() {
                let v = num(&x["relative_mse"]);
                out.push(Check { name: format!("relative mse at {}", num(&x["theta_deg"])), pass: v <= 1e-4, detail: format!("{v:.3e}") });
            }
        }
        Figure::Table1 => {
            for x in r["rows"].as_array().into_iter().flatten() {
                let (c, a, f) = (num(&x["psnr_csr"]), num(&x["psnr_acsr"]), num(&x["psnr_fbp"]));
                let tag = format!("{} {}", x["phantom"].as_str().unwrap_or("?"), num(&x["theta_deg"]));
                out.push(Check { name: format!("{tag}: csr ~ acsr"), pass: (c - a).abs() <= 0.5, detail: format!("{c:.2} / {a:.2}") });
                out.push(Check { name: format!("{tag}: beats fbp by 2 dB"), pass: c.min(a) >= f + 2.0, detail: format!("{:.2} vs {f:.2}", c.min(a)) });
            }
        }
    }
    out
}

fn cmd_reproduce(id: Figure, cfg: &RunConfig) -> Result<()> {
    let dir = cfg.out_dir()?;
    let mut e = experiment_config(cfg, &dir)?;
    let name = match id {
        Figure::Fig5 => "visibility-demo",
        Figure::Fig7 => {
            e.thetas = Some((1..=180).map(f64::from).collect());
            "dimension-profile"
        }
        Figure::Fig8 => {
            let mut t: Vec<f64> = (1..=18).map(|i| 10.0 * i as f64).collect();
            t.push(35.0);
            t.sort_by(f64::total_cmp);
            e.thetas = Some(t);
            "timing-sweep"
        }
        Figure::Fig9 | Figure::Fig10 => {
            e.thetas = Some((1..=6).map(|i| 30.0 * i as f64).collect());
            if cfg.get("phantom").is_none() {
                e.phantoms = vec![Phantom::SheppLogan];
            }
            "quality-sweep"
        }
        Figure::Table1 => {
            e.thetas = Some(vec![35.0, 160.0]);
            "quality-sweep"
        }
    };
    let manifest = experiments::run_experiment(name, &e)?;
    let checks = checks_for(id, &manifest);
    for c in &checks {
        println!("{} {} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    io::write_json(
        &dir.join("summary.json"),
        &json!({"figure": format!("{id:?}").to_lowercase(), "experiment": name,
                "checks": checks.iter().map(|c| json!({"name": c.name, "pass": c.pass, "detail": c.detail})).collect::<Vec<_>>()}),
    )?;
    Ok(())
}
