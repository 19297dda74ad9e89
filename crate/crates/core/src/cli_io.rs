//! Configuration files, run manifests and the subcommand drivers behind the
//! `helicore` binary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::diagnostics::{
    circulation, filament_distance, gradient_trend, rescaled_profile, scaling_sweep, support_metrics,
    DEFAULT_WINDOW,
};
use crate::elliptic::{green_probe, EllipticOperator, PolarGrid, ScalarField};
use crate::error::{Error, Result};
use crate::evolution::{default_dt, evolve, rotating_state, stream_solve, touches_boundary, EvolutionState, EvolveOptions};
use crate::geometry::ProblemConfig;
use crate::reconstruct::{
    check_structure, default_band, default_fd_step, sample_cloud, write_samples_csv, HelicalLift,
};
use crate::selftest;
use crate::variational::{maximize, MaximizeOptions, MaximizerState, ProfileParams};

pub const REQUIRED_KEYS: [&str; 8] = ["h", "kappa", "r_star", "R", "eps", "a", "b", "Lambda"];
pub const OPTIONAL_KEYS: [&str; 8] = [
    "n_r",
    "n_theta",
    "tol_elliptic",
    "tol_fix",
    "tol_mass",
    "max_iters",
    "dt_safety",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Numerics {
    pub n_r: usize,
    pub n_theta: usize,
    pub tol_elliptic: f64,
    pub tol_fix: f64,
    pub tol_mass: f64,
    pub max_iters: usize,
    pub dt_safety: f64,
    pub seed: u64,
}

impl Default for Numerics {
    fn default() -> Self {
        let m = MaximizeOptions::default();
        Numerics {
            n_r: 256,
            n_theta: 256,
            tol_elliptic: m.tol_elliptic,
            tol_fix: m.tol_fix,
            tol_mass: m.tol_mass,
            max_iters: m.max_iters,
            dt_safety: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub numerics: Numerics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub alpha: f64,
    pub alpha_bar: f64,
    pub a1: f64,
    pub b1: f64,
    pub cap: f64,
}

impl RunConfig {
    pub fn grid(&self) -> Result<PolarGrid> {
        PolarGrid::new(self.numerics.n_r, self.numerics.n_theta, self.problem.big_r)
    }

    pub fn maximize_options(&self) -> MaximizeOptions {
        MaximizeOptions {
            tol_fix: self.numerics.tol_fix,
            tol_mass: self.numerics.tol_mass,
            tol_elliptic: self.numerics.tol_elliptic,
            max_iters: self.numerics.max_iters,
            ..Default::default()
        }
    }

    pub fn derived(&self) -> Derived {
        let p = &self.problem;
        Derived {
            alpha: p.alpha(),
            alpha_bar: p.alpha_bar(),
            a1: p.a1(),
            b1: p.b1(),
            cap: p.cap(),
        }
    }

    /// The config in the file format accepted by [`parse_config_str`].
    pub fn to_text(&self) -> String {
        let p = &self.problem;
        let n = &self.numerics;
        let f = |v: f64| format!("{v:?}");
        [
            ("h", f(p.h)),
            ("kappa", f(p.kappa)),
            ("r_star", f(p.r_star)),
            ("R", f(p.big_r)),
            ("eps", f(p.eps)),
            ("a", f(p.a)),
            ("b", f(p.b)),
            ("Lambda", f(p.lambda)),
            ("n_r", n.n_r.to_string()),
            ("n_theta", n.n_theta.to_string()),
            ("tol_elliptic", f(n.tol_elliptic)),
            ("tol_fix", f(n.tol_fix)),
            ("tol_mass", f(n.tol_mass)),
            ("max_iters", n.max_iters.to_string()),
            ("dt_safety", f(n.dt_safety)),
            ("seed", n.seed.to_string()),
        ]
        .iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, path)
}

/// Parse `key = value` lines; `#` starts a comment.
pub fn parse_config_str(text: &str, origin: &Path) -> Result<RunConfig> {
    let mut kv: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(origin, format!("line {}: expected 'key = value'", ln + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !REQUIRED_KEYS.contains(&k) && !OPTIONAL_KEYS.contains(&k) {
            return Err(Error::parse(origin, format!("line {}: unknown key '{k}'", ln + 1)));
        }
        if kv.insert(k.to_string(), (ln + 1, v.to_string())).is_some() {
            return Err(Error::parse(origin, format!("line {}: duplicate key '{k}'", ln + 1)));
        }
    }
    let float = |k: &str| -> Result<Option<f64>> {
        kv.get(k)
            .map(|(ln, v)| {
                v.parse::<f64>()
                    .map_err(|e| Error::parse(origin, format!("line {ln}: {k}: {e}")))
            })
            .transpose()
    };
    let int = |k: &str| -> Result<Option<u64>> {
        kv.get(k)
            .map(|(ln, v)| {
                v.parse::<u64>()
                    .map_err(|e| Error::parse(origin, format!("line {ln}: {k}: {e}")))
            })
            .transpose()
    };
    let need = |k: &str| -> Result<f64> {
        float(k)?.ok_or_else(|| Error::parse(origin, format!("missing required key '{k}'")))
    };
    let problem = ProblemConfig::new(
        need("h")?,
        need("kappa")?,
        need("r_star")?,
        need("R")?,
        need("eps")?,
        need("a")?,
        need("b")?,
        need("Lambda")?,
    )?;
    let d = Numerics::default();
    let numerics = Numerics {
        n_r: int("n_r")?.map(|v| v as usize).unwrap_or(d.n_r),
        n_theta: int("n_theta")?.map(|v| v as usize).unwrap_or(d.n_theta),
        tol_elliptic: float("tol_elliptic")?.unwrap_or(d.tol_elliptic),
        tol_fix: float("tol_fix")?.unwrap_or(d.tol_fix),
        tol_mass: float("tol_mass")?.unwrap_or(d.tol_mass),
        max_iters: int("max_iters")?.map(|v| v as usize).unwrap_or(d.max_iters),
        dt_safety: float("dt_safety")?.unwrap_or(d.dt_safety),
        seed: int("seed")?.unwrap_or(d.seed),
    };
    for (k, v) in [
        ("tol_elliptic", numerics.tol_elliptic),
        ("tol_fix", numerics.tol_fix),
        ("tol_mass", numerics.tol_mass),
        ("dt_safety", numerics.dt_safety),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Config(format!("{k} must be positive, got {v}")));
        }
    }
    if numerics.max_iters == 0 {
        return Err(Error::Config("max_iters must be at least 1".into()));
    }
    let cfg = RunConfig { problem, numerics };
    cfg.grid()?;
    Ok(cfg)
}

struct Digits17;

impl serde_json::ser::Formatter for Digits17 {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, w: &mut W, v: f64) -> std::io::Result<()> {
        write!(w, "{v:.16e}")
    }

    fn write_f32<W: ?Sized + std::io::Write>(&mut self, w: &mut W, v: f32) -> std::io::Result<()> {
        write!(w, "{:.16e}", v as f64)
    }
}

/// JSON with every float printed to 17 significant digits. Non-finite
/// values become `null`.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: Option<RunConfig>,
    pub derived: Option<Derived>,
    pub stages: Vec<StageTiming>,
    pub files: Vec<FileEntry>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// Collects the outputs of one run under `out_dir`.
pub struct RunRecorder {
    out_dir: PathBuf,
    manifest: RunManifest,
}

impl RunRecorder {
    pub fn new(out_dir: &Path, command: &str, config: Option<RunConfig>) -> Result<Self> {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        Ok(RunRecorder {
            out_dir: out_dir.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                derived: config.map(|c| c.derived()),
                config,
                stages: Vec::new(),
                files: Vec::new(),
            },
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    /// Run `f` as a named stage; errors are prefixed with the stage name.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f(self).map_err(|e| Error::Stage {
            stage: name.to_string(),
            source: Box::new(e),
        });
        self.manifest.stages.push(StageTiming {
            stage: name.to_string(),
            seconds: t.elapsed().as_secs_f64(),
        });
        out
    }

    fn record(&mut self, name: &str) -> Result<()> {
        let path = self.out_dir.join(name);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let entry = FileEntry {
            path: name.to_string(),
            bytes: bytes.len(),
            sha256: sha256_hex(&bytes),
        };
        match self.manifest.files.iter_mut().find(|f| f.path == name) {
            Some(f) => *f = entry,
            None => self.manifest.files.push(entry),
        }
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.record(name)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let s = to_json(value)?;
        self.write_text(name, &s)
    }

    pub fn write_field(&mut self, name: &str, f: &ScalarField, h: f64) -> Result<()> {
        f.write_csv(&self.out_dir.join(name), h)?;
        self.record(name)
    }

    pub fn write_samples(&mut self, name: &str, lift: &HelicalLift, cloud: &[[f64; 3]]) -> Result<()> {
        let samples = cloud
            .iter()
            .map(|&x| lift.sample(x))
            .collect::<Result<Vec<_>>>()?;
        write_samples_csv(&self.out_dir.join(name), &samples)?;
        self.record(name)
    }

    pub fn finish(mut self) -> Result<RunManifest> {
        let path = self.out_dir.join(MANIFEST_NAME);
        self.manifest.files.sort_by(|a, b| a.path.cmp(&b.path));
        let s = to_json(&self.manifest)?;
        std::fs::write(&path, s).map_err(|e| Error::io(&path, e))?;
        Ok(self.manifest)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Evolve,
    Reconstruct,
    Scaling,
    GreenProbe,
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Evolve => "evolve",
            Command::Reconstruct => "reconstruct",
            Command::Scaling => "scaling",
            Command::GreenProbe => "green-probe",
            Command::Selftest => "selftest",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: Option<RunConfig>,
    pub out_dir: PathBuf,
    /// Directory written by an earlier `solve`.
    pub snapshot: Option<PathBuf>,
    pub eps_list: Option<Vec<f64>>,
    /// Evolution end time; defaults to a quarter turn, `0.25 / alpha_bar`.
    pub t_end: Option<f64>,
    pub checkpoint_every: Option<usize>,
    pub samples: Option<usize>,
    /// Write per-row field snapshots in `scaling`.
    pub row_fields: bool,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    /// False when a check-type command found violations.
    pub success: bool,
    pub lines: Vec<String>,
}

pub fn parse_eps_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad eps value '{t}': {e}")))
        })
        .collect()
}

fn need_config(opts: &RunOptions) -> Result<RunConfig> {
    opts.config
        .ok_or_else(|| Error::Config("this command needs --config".into()))
}

pub const STATE_V: &str = "state_v.csv";
pub const STATE_W: &str = "state_w.csv";

fn solve_stage(rec: &mut RunRecorder, cfg: &RunConfig) -> Result<(EllipticOperator, MaximizerState, EvolutionState)> {
    let p = &cfg.problem;
    let op = rec.stage("assemble", |_| EllipticOperator::assemble(cfg.grid()?, p.h))?;
    let m = rec.stage("maximize", |_| maximize(p, &op, None, &cfg.maximize_options()))?;
    let state = rec.stage("rotating-state", |_| {
        rotating_state(&m, &ProfileParams::from_config(p), &op, cfg.numerics.tol_elliptic)
    })?;
    Ok((op, m, state))
}

fn load_state(dir: &Path, cfg: &RunConfig, op: &EllipticOperator) -> Result<EvolutionState> {
    let (v, hv) = ScalarField::read_csv(&dir.join(STATE_V))?;
    let (w, hw) = ScalarField::read_csv(&dir.join(STATE_W))?;
    v.same_shape(&w)?;
    if v.grid != op.grid {
        return Err(Error::Shape {
            expected: format!("{:?}", op.grid),
            found: format!("{:?}", v.grid),
        });
    }
    for h in [hv, hw] {
        if (h - cfg.problem.h).abs() > 1e-12 * cfg.problem.h {
            return Err(Error::Config(format!(
                "snapshot pitch {h} differs from config pitch {}",
                cfg.problem.h
            )));
        }
    }
    let phi = stream_solve(&v, &w, op, cfg.numerics.tol_elliptic)?;
    Ok(EvolutionState { t: 0.0, v, w, phi })
}

fn state_for(rec: &mut RunRecorder, cfg: &RunConfig, opts: &RunOptions) -> Result<(EllipticOperator, EvolutionState)> {
    match &opts.snapshot {
        Some(dir) => {
            let op = rec.stage("assemble", |_| EllipticOperator::assemble(cfg.grid()?, cfg.problem.h))?;
            let s = rec.stage("load-snapshot", |_| load_state(dir, cfg, &op))?;
            Ok((op, s))
        }
        None => {
            let (op, _, s) = solve_stage(rec, cfg)?;
            Ok((op, s))
        }
    }
}

fn cmd_solve(rec: &mut RunRecorder, cfg: &RunConfig) -> Result<Vec<String>> {
    let (_, m, state) = solve_stage(rec, cfg)?;
    let p = &cfg.problem;
    rec.stage("write", |rec| {
        rec.write_field("zeta.csv", &m.zeta, p.h)?;
        rec.write_field("psi.csv", &m.psi, p.h)?;
        rec.write_field("phi.csv", &m.phi, p.h)?;
        rec.write_field(STATE_V, &state.v, p.h)?;
        rec.write_field(STATE_W, &state.w, p.h)?;
        rec.write_json("maximizer.json", &m.summary())
    })?;
    let metrics = rec.stage("metrics", |rec| {
        let s = support_metrics(&m.zeta, p.cap())?;
        let rescaled = rescaled_profile(&m.zeta, p, DEFAULT_WINDOW, 96, 128).ok();
        let taus = [0.0, 1.0, 2.0];
        let value = json!({
            "support": s,
            "circulation": circulation(&m, p),
            "swirl_max": state.v.max(),
            "gradient_trend": gradient_trend(&m.psi, p.eps),
            "rescaled": rescaled.as_ref().map(|r| json!({
                "center": r.center,
                "window": r.window,
                "mass": r.mass,
                "target_mass": r.target_mass,
                "asymmetry": r.asymmetry,
                "sup": r.sup,
            })),
            "filament_distance": filament_distance(&m.zeta, p, &taus),
        });
        rec.write_json("metrics.json", &value)?;
        Ok(s)
    })?;
    Ok(vec![format!(
        "energy {:.10} mu {:.10} after {} iterations ({:?}); centre ({:.5}, {:.5}), diameter {:.5}",
        m.energy, m.mu, m.iterations, m.stop, metrics.center[0], metrics.center[1], metrics.diameter
    )])
}

fn cmd_evolve(rec: &mut RunRecorder, cfg: &RunConfig, opts: &RunOptions) -> Result<Vec<String>> {
    let (op, s0) = state_for(rec, cfg, opts)?;
    let t_end = opts.t_end.unwrap_or(0.25 / cfg.problem.alpha_bar());
    let every = opts.checkpoint_every.unwrap_or(100);
    let dt = default_dt(&s0.phi, cfg.numerics.dt_safety);
    let traj = rec.stage("evolve", |_| {
        Ok(evolve(&s0, t_end, dt, &op, &EvolveOptions::default(), every))
    })?;
    let h = cfg.problem.h;
    rec.stage("write", |rec| {
        let mut stamps = Vec::new();
        for (k, c) in traj.checkpoints.iter().enumerate() {
            rec.write_field(&format!("checkpoint_{k:04}_v.csv"), &c.v, h)?;
            rec.write_field(&format!("checkpoint_{k:04}_w.csv"), &c.w, h)?;
            stamps.push(c.t);
        }
        rec.write_json(
            "trajectory.json",
            &json!({
                "dt": dt,
                "t_end": t_end,
                "checkpoint_times": stamps,
                "touches_boundary": touches_boundary(&traj.last, 0.0),
                "failure": traj.failure.as_ref().map(|e| e.to_string()),
                "rows": traj.rows,
            }),
        )
    })?;
    if let Some(e) = traj.failure {
        return Err(Error::Stage {
            stage: "evolve".into(),
            source: Box::new(e),
        });
    }
    let first = traj.rows[0];
    let last = *traj.rows.last().expect("trajectory has rows");
    Ok(vec![format!(
        "{} steps to t = {:.6}; int v {:.10} -> {:.10}, centroid angle {:.5} -> {:.5}",
        traj.rows.len() - 1,
        last.t,
        first.int_v,
        last.int_v,
        first.centroid_angle,
        last.centroid_angle
    )])
}

fn cmd_reconstruct(rec: &mut RunRecorder, cfg: &RunConfig, opts: &RunOptions) -> Result<Vec<String>> {
    let (_, s) = state_for(rec, cfg, opts)?;
    let h = cfg.problem.h;
    let g = s.v.grid;
    let lift = HelicalLift::from_state(&s, h)?;
    let n = opts.samples.unwrap_or(10_000);
    let focus = crate::evolution::centroid(&s.v).map(|c| (c, (0.3f64).min(g.big_r / 2.0)));
    let cloud = sample_cloud(&g, h, n, cfg.numerics.seed, 2.0 * g.dr(), focus);
    rec.stage("lift", |rec| rec.write_samples("samples.csv", &lift, &cloud))?;
    let report = rec.stage("check-structure", |rec| {
        let r = check_structure(&lift, &cloud, default_fd_step(&g), default_band(&g));
        rec.write_json("structure.json", &r)?;
        Ok(r)
    })?;
    Ok(vec![format!(
        "{} samples, {} checked: div {:.3e}, vorticity components {:.3e}, symmetry {:.3e}",
        report.samples, report.checked, report.max_divergence, report.max_vorticity_components, report.max_helical_symmetry
    )])
}

fn cmd_scaling(rec: &mut RunRecorder, cfg: &RunConfig, opts: &RunOptions) -> Result<Vec<String>> {
    let eps = opts.eps_list.clone().unwrap_or_else(|| selftest::SWEEP_EPS.to_vec());
    let g = cfg.grid()?;
    let report = rec.stage("sweep", |_| scaling_sweep(&eps, &cfg.problem, g, &cfg.maximize_options()))?;
    rec.stage("write", |rec| {
        rec.write_json("scaling.json", &report)?;
        if opts.row_fields {
            for row in report.rows.iter().filter(|r| r.error.is_none()) {
                let c = cfg.problem.with_eps(row.eps)?;
                let op = EllipticOperator::assemble(g, c.h)?;
                let m = maximize(&c, &op, None, &cfg.maximize_options())?;
                rec.write_field(&format!("zeta_eps_{}.csv", row.eps), &m.zeta, c.h)?;
            }
        }
        Ok(())
    })?;
    let mut lines: Vec<String> = report
        .rows
        .iter()
        .map(|r| match &r.error {
            Some(e) => format!("eps {}: failed: {e}", r.eps),
            None => format!(
                "eps {}: energy {:.8} mu {:.8} diameter {:.5} centre offset {:.5} ({:?}, {} iterations)",
                r.eps,
                r.energy,
                r.mu,
                r.metrics.map(|m| m.diameter).unwrap_or(f64::NAN),
                r.center_offset,
                r.stop,
                r.iterations
            ),
        })
        .collect();
    lines.push(format!(
        "slopes: energy {:.5} (target {:.5}), mu {:.5} (floor {:.5}), log diameter {:.4}",
        report.energy_fit.map(|f| f.slope).unwrap_or(f64::NAN),
        report.energy_slope_target,
        report.mu_fit.map(|f| f.slope).unwrap_or(f64::NAN),
        report.mu_slope_floor,
        report.diameter_fit.map(|f| f.slope).unwrap_or(f64::NAN)
    ));
    Ok(lines)
}

fn cmd_green_probe(rec: &mut RunRecorder, cfg: &RunConfig) -> Result<Vec<String>> {
    let p = &cfg.problem;
    let g = cfg.grid()?;
    let op = rec.stage("assemble", |_| EllipticOperator::assemble(g, p.h))?;
    let source = [p.r_star, 0.0];
    let d0 = 2.0 * g.dr();
    let d1 = p.big_r / 4.0;
    let probes: Vec<[f64; 2]> = (0..12)
        .map(|k| {
            let d = d0 * (d1 / d0).powf(k as f64 / 11.0);
            let a = 0.9 * k as f64;
            [source[0] + d * a.cos(), source[1] + d * a.sin()]
        })
        .filter(|y| y[0].hypot(y[1]) < p.big_r)
        .collect();
    let rep = rec.stage("probe", |rec| {
        let r = green_probe(&op, source, &probes, cfg.numerics.tol_elliptic)?;
        rec.write_json("green.json", &r)?;
        Ok(r)
    })?;
    let (lo, hi) = rep
        .samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s.regular), b.max(s.regular)));
    Ok(vec![format!(
        "{} probes around ({:.4}, {:.4}): regular part in [{lo:.5}, {hi:.5}]",
        rep.samples.len(),
        rep.source[0],
        rep.source[1]
    )])
}

fn cmd_selftest(rec: &mut RunRecorder) -> Result<(Vec<String>, bool)> {
    let reports = rec.stage("criteria", |_| Ok(selftest::run_all()))?;
    rec.write_json("selftest.json", &reports)?;
    let ok = reports.iter().all(|r| r.pass);
    Ok((reports.iter().map(|r| r.line()).collect(), ok))
}

/// Run one subcommand, writing its outputs and `manifest.json` under
/// `opts.out_dir`.
pub fn run(cmd: Command, opts: &RunOptions) -> Result<RunOutcome> {
    let config = match cmd {
        Command::Selftest => opts.config,
        _ => Some(need_config(opts)?),
    };
    let mut rec = RunRecorder::new(&opts.out_dir, cmd.name(), config)?;
    if let Some(c) = config {
        rec.write_text("config.txt", &c.to_text())?;
    }
    let (lines, success) = match (cmd, config) {
        (Command::Selftest, _) => cmd_selftest(&mut rec)?,
        (Command::Solve, Some(c)) => (cmd_solve(&mut rec, &c)?, true),
        (Command::Evolve, Some(c)) => (cmd_evolve(&mut rec, &c, opts)?, true),
        (Command::Reconstruct, Some(c)) => (cmd_reconstruct(&mut rec, &c, opts)?, true),
        (Command::Scaling, Some(c)) => (cmd_scaling(&mut rec, &c, opts)?, true),
        (Command::GreenProbe, Some(c)) => (cmd_green_probe(&mut rec, &c)?, true),
        (_, None) => unreachable!("config checked above"),
    };
    let manifest = rec.finish()?;
    Ok(RunOutcome {
        manifest,
        success,
        lines,
    })
}
