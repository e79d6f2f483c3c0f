//! Phantoms, noise, quality metrics and the scripted reconstruction studies.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::json;

use crate::curvelet::{default_scales, max_scales, CoeffSet, CurveletSystem};
use crate::error::{Error, Result};
use crate::geometry::{orientation_angle, orientation_spacing, AngularRange, CurveletIndex, Image, Sinogram};
use crate::io;
use crate::radon::{fbp, radon, FbpFilter, RadonGeometry};
use crate::solver::{reconstruct, ForwardOperator, Reconstruction, SolverConfig};
use crate::visibility::{dimension_profile, extract_range, invisible_indices, restrict};

#[derive(Debug, Clone, PartialEq)]
pub enum Phantom {
    SheppLogan,
    RadialPattern { spokes: usize },
    CurveletCombo,
    Disk { radius: f64 },
}

impl FromStr for Phantom {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shepp-logan" => Ok(Phantom::SheppLogan),
            "radial-pattern" => Ok(Phantom::RadialPattern { spokes: 16 }),
            "curvelet-combo" => Ok(Phantom::CurveletCombo),
            "disk" => Ok(Phantom::Disk { radius: 0.5 }),
            _ => Err(Error::Argument(format!("unknown phantom '{s}'"))),
        }
    }
}

impl Phantom {
    pub fn name(&self) -> &'static str {
        match self {
            Phantom::SheppLogan => "shepp-logan",
            Phantom::RadialPattern { .. } => "radial-pattern",
            Phantom::CurveletCombo => "curvelet-combo",
            Phantom::Disk { .. } => "disk",
        }
    }
}

/// `(A, a, b, x0, y0, phi_deg)` of the original head phantom.
pub const SHEPP_LOGAN: [[f64; 6]; 10] = [
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.98, 0.6624, 0.8740, 0.0, -0.0184, 0.0],
    [-0.02, 0.1100, 0.3100, 0.22, 0.0, -18.0],
    [-0.02, 0.1600, 0.4100, -0.22, 0.0, 18.0],
    [0.01, 0.2100, 0.2500, 0.0, 0.35, 0.0],
    [0.01, 0.0460, 0.0460, 0.0, 0.1, 0.0],
    [0.01, 0.0460, 0.0460, 0.0, -0.1, 0.0],
    [0.01, 0.0460, 0.0230, -0.08, -0.605, 0.0],
    [0.01, 0.0230, 0.0230, 0.0, -0.606, 0.0],
    [0.01, 0.0230, 0.0460, 0.06, -0.605, 0.0],
];

fn render(size: usize, value: impl Fn(f64, f64) -> f64) -> Image {
    let mut f = Image::zeros(size, size);
    for r in 0..size {
        let y = f.y_at(r);
        for c in 0..size {
            f.pixels[r * size + c] = value(f.x_at(c), y);
        }
    }
    f
}

pub fn shepp_logan(size: usize) -> Image {
    render(size, |x, y| {
        SHEPP_LOGAN
            .iter()
            .filter(|e| {
                let (ph, dx, dy) = (e[5].to_radians(), x - e[3], y - e[4]);
                let u = dx * ph.cos() + dy * ph.sin();
                let v = -dx * ph.sin() + dy * ph.cos();
                (u / e[1]).powi(2) + (v / e[2]).powi(2) <= 1.0
            })
            .map(|e| e[0])
            .sum()
    })
}

/// System used for the curvelet-combo phantom at `size`.
pub fn combo_system(size: usize) -> Result<CurveletSystem> {
    if size < 32 || max_scales(size, size) < 5 {
        return Err(Error::Config(format!("curvelet-combo needs scale 4, unavailable at {size}x{size}")));
    }
    CurveletSystem::build(size, size, default_scales(size, size).max(5).min(max_scales(size, size)))
}

pub const COMBO_SCALE: i32 = 4;
pub const COMBO_DEGREES: [f64; 4] = [0.0, 20.0, 60.0, 90.0];

/// Indices at scale 4 whose orientations are nearest to 0, 20, 60, 90 deg.
pub fn combo_indices() -> Vec<CurveletIndex> {
    let step = orientation_spacing(COMBO_SCALE).to_degrees();
    COMBO_DEGREES
        .iter()
        .map(|d| CurveletIndex::new(COMBO_SCALE, (d / step).round() as i32, (0, 0)))
        .collect()
}

pub fn make_phantom(kind: &Phantom, size: usize) -> Result<Image> {
    if size < 64 {
        return Err(Error::Argument(format!("phantoms need at least 64x64 pixels, got {size}")));
    }
    Ok(match kind {
        Phantom::SheppLogan => shepp_logan(size),
        Phantom::Disk { radius } => render(size, |x, y| if x * x + y * y <= radius * radius { 1.0 } else { 0.0 }),
        Phantom::RadialPattern { spokes } => {
            let n = *spokes as f64;
            render(size, |x, y| {
                let r = x.hypot(y);
                if r <= 0.8 && (n * y.atan2(x)).sin() >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            })
        }
        Phantom::CurveletCombo => {
            let sys = combo_system(size)?;
            let mut c = CoeffSet::zeros(&sys);
            for idx in combo_indices() {
                c.data[sys.flat_index(&idx)?] = 1.0;
            }
            sys.synthesis(&c)?
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// fraction of the data's dynamic range
    pub level: f64,
    pub seed: u64,
}

/// Adds white Gaussian noise with `sigma = level * (max y - min y)`.
pub fn add_noise(y: &Sinogram, spec: &NoiseSpec) -> Result<(Sinogram, f64)> {
    if !(spec.level >= 0.0) {
        return Err(Error::Argument(format!("noise level must be nonnegative, got {}", spec.level)));
    }
    let lo = y.samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = y.samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sigma = spec.level * (hi - lo);
    let mut out = y.clone();
    if sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::Argument(e.to_string()))?;
        out.samples.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    }
    Ok((out, sigma))
}

/// `(1/N) sum |a - b|^2`.
pub fn mse(a: &CoeffSet, b: &CoeffSet) -> Result<f64> {
    if !a.same_layout(b) {
        return Err(Error::Dimension("coefficient sets come from different systems".into()));
    }
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64)
}

pub const PSNR_CAP: f64 = 99.0;

fn normalized(f: &Image) -> Result<Vec<f64>> {
    let lo = f.pixels.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = f.pixels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::Argument("cannot normalize a constant image".into()));
    }
    Ok(f.pixels.iter().map(|v| (v - lo) / (hi - lo)).collect())
}

/// PSNR of min-max normalized images, capped at [`PSNR_CAP`].
pub fn psnr(reference: &Image, rec: &Image) -> Result<f64> {
    if !reference.same_shape(rec) {
        return Err(Error::Dimension("images differ in shape".into()));
    }
    let (a, b) = (normalized(reference)?, normalized(rec)?);
    let m = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64;
    Ok(if m == 0.0 { PSNR_CAP } else { (10.0 * (1.0 / m).log10()).min(PSNR_CAP) })
}

/// Angles `0, 1, ..., theta` degrees, capped below a half turn.
pub fn span_geometry(theta_deg: f64, size: usize) -> Result<RadonGeometry> {
    if !(theta_deg > 0.0 && theta_deg <= 180.0) {
        return Err(Error::Argument(format!("angular range {theta_deg} deg outside (0, 180]")));
    }
    RadonGeometry::degree_sweep(0.0, theta_deg.min(179.0), 1.0, size, size)
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub size: usize,
    pub num_scales: usize,
    pub iters: usize,
    pub noise: f64,
    pub seed: u64,
    pub thetas: Option<Vec<f64>>,
    pub phantoms: Vec<Phantom>,
    pub input: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            size: 256,
            num_scales: 6,
            iters: 100,
            noise: 0.02,
            seed: 42,
            thetas: None,
            phantoms: vec![Phantom::SheppLogan, Phantom::RadialPattern { spokes: 16 }],
            input: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// One acquisition reconstructed by CSR, A-CSR and FBP.
#[derive(Debug)]
pub struct Comparison {
    pub theta_deg: f64,
    pub truth: Image,
    pub truth_coeffs: CoeffSet,
    pub data: Sinogram,
    pub sigma_true: f64,
    pub csr: Reconstruction,
    pub acsr: Reconstruction,
    pub fbp: Image,
    pub full_dim: usize,
    pub reduced_dim: usize,
    pub csr_norm_ms: f64,
    pub acsr_norm_ms: f64,
}

impl Comparison {
    pub fn psnr_csr(&self) -> Result<f64> {
        psnr(&self.truth, &self.csr.image)
    }
    pub fn psnr_acsr(&self) -> Result<f64> {
        psnr(&self.truth, &self.acsr.image)
    }
    pub fn psnr_fbp(&self) -> Result<f64> {
        psnr(&self.truth, &self.fbp)
    }
    /// Mean squared difference of the CSR and A-CSR coefficients.
    pub fn relative_mse(&self) -> Result<f64> {
        mse(&self.csr.coeffs, &self.acsr.coeffs)
    }
    /// `||c_csr - c_acsr||^2 / ||c_csr||^2`.
    pub fn normalized_gap(&self) -> f64 {
        let d: f64 = self.csr.coeffs.data.iter().zip(&self.acsr.coeffs.data).map(|(a, b)| (a - b).powi(2)).sum();
        d / self.csr.coeffs.norm().powi(2).max(f64::MIN_POSITIVE)
    }
}

/// Simulates `[0, theta]` data for `truth` and reconstructs it three ways.
pub fn compare_methods(system: &Arc<CurveletSystem>, truth: &Image, theta_deg: f64, noise: NoiseSpec, iters: usize) -> Result<Comparison> {
    let size = truth.width;
    let geom = span_geometry(theta_deg, size)?;
    let (data, sigma_true) = add_noise(&radon(truth, &geom)?, &noise)?;
    let cfg = SolverConfig { max_iter: iters, ..Default::default() };

    let full = ForwardOperator::new(system.clone(), geom.clone(), None)?;
    let t = Instant::now();
    full.operator_norm()?;
    let csr_norm_ms = t.elapsed().as_secs_f64() * 1e3;
    let csr = reconstruct(&full, &data, &cfg)?;

    let range = extract_range(&geom.angles)?;
    let part = invisible_indices(system, &range)?;
    let (full_dim, reduced_dim) = (part.full_dim(), part.visible_count());
    let reduced = ForwardOperator::new(system.clone(), geom, Some(part))?;
    let t = Instant::now();
    reduced.operator_norm()?;
    let acsr_norm_ms = t.elapsed().as_secs_f64() * 1e3;
    let acsr = reconstruct(&reduced, &data, &cfg)?;

    let fbp_img = fbp(&data, size, size, 1.0, &FbpFilter::default())?;
    Ok(Comparison {
        theta_deg,
        truth: truth.clone(),
        truth_coeffs: system.analysis(truth)?,
        data,
        sigma_true,
        csr,
        acsr,
        fbp: fbp_img,
        full_dim,
        reduced_dim,
        csr_norm_ms,
        acsr_norm_ms,
    })
}

fn write(dir: &Path, name: &str, text: &str) -> Result<String> {
    fs::write(dir.join(name), text)?;
    Ok(name.to_string())
}

fn load_truth(cfg: &ExperimentConfig, kind: &Phantom) -> Result<Image> {
    match &cfg.input {
        Some(p) => io::read_image(p),
        None => make_phantom(kind, cfg.size),
    }
}

fn system_for(cfg: &ExperimentConfig, w: usize, h: usize) -> Result<Arc<CurveletSystem>> {
    Ok(Arc::new(CurveletSystem::build(w, h, cfg.num_scales)?))
}

/// Runs a named study, writing its artifacts and `manifest.json` into
/// `cfg.out_dir`. Returns the manifest.
pub fn run_experiment(name: &str, cfg: &ExperimentConfig) -> Result<serde_json::Value> {
    fs::create_dir_all(&cfg.out_dir)?;
    let dir = cfg.out_dir.as_path();
    let start = Instant::now();
    let mut files = Vec::new();
    let results = match name {
        "visibility-demo" => {
            let sys = combo_system(cfg.size)?;
            let f = make_phantom(&Phantom::CurveletCombo, cfg.size)?;
            io::write_pgm(&dir.join("phantom.pgm"), &f)?;
            files.push("phantom.pgm".to_string());
            let coeffs = sys.analysis(&f)?;
            let mut per_range = Vec::new();
            for phi in [35.0, 80.0] {
                let range = AngularRange::from_degrees(0.0, phi)?;
                let part = invisible_indices(&sys, &range)?;
                let geom = RadonGeometry::degree_sweep(-phi, phi, 1.0, cfg.size, cfg.size)?;
                let g = radon(&f, &geom)?;
                let visible = sys.synthesis(&restrict(&coeffs, &part)?)?;
                let tag = format!("{phi:.0}");
                io::write_sinogram(&dir.join(format!("sinogram_{tag}.csv")), &g)?;
                io::write_sinogram_pgm(&dir.join(format!("sinogram_{tag}.pgm")), &g)?;
                io::write_pgm(&dir.join(format!("inversion_{tag}.pgm")), &visible)?;
                files.push(write(dir, &format!("partition_{tag}.csv"), &io::partition_csv(&part))?);
                files.extend([format!("sinogram_{tag}.csv"), format!("sinogram_{tag}.pgm"), format!("inversion_{tag}.pgm")]);
                let invisible: Vec<_> = combo_indices()
                    .iter()
                    .zip(COMBO_DEGREES)
                    .enumerate()
                    .filter(|(_, (idx, _))| !part.is_visible(idx))
                    .map(|(i, (idx, d))| json!({"member": i + 1, "target_deg": d, "l": idx.l,
                        "theta_deg": orientation_angle(idx.j, idx.l).unwrap().to_degrees()}))
                    .collect();
                per_range.push(json!({"phi_deg": phi, "invisible": invisible}));
            }
            json!({"ranges": per_range})
        }
        "dimension-profile" => {
            let sys = system_for(cfg, cfg.size, cfg.size)?;
            let thetas = cfg.thetas.clone().unwrap_or_else(|| (1..=180).map(f64::from).collect());
            let prof = dimension_profile(&sys, &thetas)?;
            files.push(write(dir, "dimension_profile.csv", &io::profile_csv(&prof))?);
            let monotone = prof.windows(2).all(|w| w[0].2 <= w[1].2);
            let steps: Vec<f64> = prof.windows(2).filter(|w| w[0].2 != w[1].2).map(|w| w[1].0).collect();
            json!({"full_dim": sys.num_coefficients(), "monotone": monotone, "step_thetas_deg": steps,
                   "finest_window_deg": orientation_spacing(sys.finest_scale()).to_degrees()})
        }
        "timing-sweep" => {
            let thetas = cfg.thetas.clone().unwrap_or_else(|| (1..=18).map(|i| 10.0 * i as f64).collect());
            let truth = load_truth(cfg, &Phantom::SheppLogan)?;
            let sys = system_for(cfg, truth.width, truth.height)?;
            let mut rows = Vec::new();
            for &t in &thetas {
                let c = compare_methods(&sys, &truth, t, NoiseSpec { level: cfg.noise, seed: cfg.seed }, cfg.iters)?;
                rows.push(vec![t, c.csr.wall_ms, c.acsr.wall_ms, c.acsr.wall_ms / c.csr.wall_ms, c.full_dim as f64, c.reduced_dim as f64]);
            }
            files.push(write(dir, "timing.csv", &io::table_csv(&["theta_deg", "csr_ms", "acsr_ms", "ratio", "full_dim", "reduced_dim"], &rows))?);
            json!({"rows": rows})
        }
        "quality-sweep" => {
            let thetas = cfg.thetas.clone().unwrap_or_else(|| vec![35.0, 160.0]);
            let mut table = Vec::new();
            let mut summary = Vec::new();
            let kinds: Vec<Phantom> = if cfg.input.is_some() { vec![Phantom::SheppLogan] } else { cfg.phantoms.clone() };
            for (pi, kind) in kinds.iter().enumerate() {
                let truth = load_truth(cfg, kind)?;
                let label = if cfg.input.is_some() { "input".to_string() } else { kind.name().to_string() };
                let sys = system_for(cfg, truth.width, truth.height)?;
                for &t in &thetas {
                    let c = compare_methods(&sys, &truth, t, NoiseSpec { level: cfg.noise, seed: cfg.seed }, cfg.iters)?;
                    let (pc, pa, pf) = (c.psnr_csr()?, c.psnr_acsr()?, c.psnr_fbp()?);
                    let mse_csr = mse(&c.truth_coeffs, &c.csr.coeffs)?;
                    let mse_acsr = mse(&c.truth_coeffs, &c.acsr.coeffs)?;
                    let rel = c.relative_mse()?;
                    let tag = format!("{label}_{t:.0}");
                    for (m, img) in [("csr", &c.csr.image), ("acsr", &c.acsr.image), ("fbp", &c.fbp)] {
                        io::write_pgm(&dir.join(format!("{tag}_{m}.pgm")), img)?;
                        files.push(format!("{tag}_{m}.pgm"));
                    }
                    files.push(write(dir, &format!("{tag}_csr_trace.csv"), &io::trace_csv(&c.csr.trace))?);
                    files.push(write(dir, &format!("{tag}_acsr_trace.csv"), &io::trace_csv(&c.acsr.trace))?);
                    table.push(vec![pi as f64, t, pc, pa, pf, mse_csr, mse_acsr, rel, c.csr.wall_ms, c.acsr.wall_ms]);
                    summary.push(json!({"phantom": label, "theta_deg": t, "psnr_csr": pc, "psnr_acsr": pa, "psnr_fbp": pf,
                        "mse_csr": mse_csr, "mse_acsr": mse_acsr, "relative_mse": rel, "normalized_gap": c.normalized_gap(),
                        "sigma_true": c.sigma_true, "full_dim": c.full_dim, "reduced_dim": c.reduced_dim,
                        "csr_ms": c.csr.wall_ms, "acsr_ms": c.acsr.wall_ms}));
                }
            }
            files.push(write(
                dir,
                "quality.csv",
                &io::table_csv(
                    &["phantom_index", "theta_deg", "psnr_csr", "psnr_acsr", "psnr_fbp", "mse_csr", "mse_acsr", "relative_mse", "csr_ms", "acsr_ms"],
                    &table,
                ),
            )?);
            json!({"phantoms": kinds.iter().map(|k| k.name()).collect::<Vec<_>>(), "rows": summary})
        }
        other => return Err(Error::Argument(format!("unknown experiment '{other}'"))),
    };
    let manifest = json!({
        "experiment": name,
        "size": cfg.size,
        "num_scales": cfg.num_scales,
        "iterations": cfg.iters,
        "noise_level": cfg.noise,
        "noise_convention": "sigma = level * (max(y) - min(y))",
        "seed": cfg.seed,
        "thetas_deg": cfg.thetas,
        "input": cfg.input.as_ref().map(|p| p.display().to_string()),
        "files": files,
        "results": results,
        "wall_ms": start.elapsed().as_secs_f64() * 1e3,
    });
    io::write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}
