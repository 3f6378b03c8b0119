//! `eaton`: lattice checks, band prediction, ray tracing and the acceptance
//! battery from the command line.
//!
//! Exit codes: 0 success, 1 domain error (or a negative answer from
//! `admissible` / a failed `verify`), 2 usage or configuration error.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use eaton_core::analysis::{self, BandReport};
use eaton_core::lattice::{self, Lattice2, Vec2};
use eaton_core::predictor::{self, BandPrediction};
use eaton_core::raytrace::{
    self, Direction, EventKind, Model, RaytraceError, Scene, SceneConfig, TraceOptions, Trajectory,
    DEFAULT_TOL_SINGULAR,
};
use eaton_core::sl2::{GenWord, TorusPoint, SL2Z};
use eaton_core::verify::{self, Suite, VerifyConfig};

const DEFAULT_SEED: u64 = 20240601;

const WORD_HELP: &str = "Word in the generators: L = h+ = [[1,1],[0,1]], R = h- = [[1,0],[1,1]]; \
exponents with ^, e.g. \"R^3 L\" (rightmost letter acts first)";

#[derive(Debug, Parser)]
#[command(name = "eaton", version, about = "Vertical light rays in periodic Eaton lens arrays and their slit model")]
struct Cli {
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, global = true, value_name = "JSON")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output files; stdout when absent.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "TOL")]
    tol_singular: Option<f64>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Flat,
    Eaton,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Model {
        match m {
            ModelArg::Flat => Model::Flat,
            ModelArg::Eaton => Model::Eaton,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DirArg {
    Up,
    Down,
}

impl From<DirArg> for Direction {
    fn from(d: DirArg) -> Direction {
        match d {
            DirArg::Up => Direction::Up,
            DirArg::Down => Direction::Down,
        }
    }
}

#[derive(Debug, clap::Args, Default)]
struct SceneArgs {
    /// `square`, `hexagonal`, `example54`, a JSON file or inline `{"basis": [[..],[..]]}`.
    #[arg(long, value_parser = parse_lattice)]
    lattice: Option<Lattice2>,
    /// Lens radius / slit half-length; decimal or rational such as `1/3`.
    #[arg(long = "R", value_parser = parse_radius)]
    r: Option<f64>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
}

#[derive(Debug, clap::Args, Default)]
struct OrbitArgs {
    /// Start point `x,y`.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    start: Option<Vec2>,
    #[arg(long, value_enum)]
    dir: Option<DirArg>,
    #[arg(long, value_parser = parse_positive)]
    t_max: Option<f64>,
    #[arg(long, value_parser = parse_positive)]
    sample_dt: Option<f64>,
}

#[derive(Debug, clap::Args, Default)]
struct PredictArgs {
    /// Torus point fixed by the map, e.g. `1/3,0`.
    #[arg(long, value_parser = parse_torus_point, allow_hyphen_values = true)]
    u: Option<TorusPoint>,
    #[arg(long, help = WORD_HELP, allow_hyphen_values = true)]
    word: Option<String>,
    /// Matrix `a,b,c,d` or `[[a,b],[c,d]]` instead of a word.
    #[arg(long, value_parser = parse_matrix, allow_hyphen_values = true)]
    matrix: Option<SL2Z>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// R-admissibility, shortest vector and slit disjointness of a lattice.
    Admissible {
        #[command(flatten)]
        scene: SceneArgs,
    },
    /// Lagrange-reduced basis and, given R, the positive basis with its Euclid steps.
    ReduceBasis {
        #[command(flatten)]
        scene: SceneArgs,
    },
    /// Band direction for the lattice built from a pseudo-Anosov fixed point.
    Predict {
        #[command(flatten)]
        predict: PredictArgs,
        /// Lens radius; decimal or rational.
        #[arg(long = "R", value_parser = parse_radius)]
        r: Option<f64>,
    },
    /// Traces one vertical ray and writes the trajectory.
    Trace {
        #[command(flatten)]
        scene: SceneArgs,
        #[command(flatten)]
        orbit: OrbitArgs,
        /// Prediction whose band edges are drawn in SVG output.
        #[command(flatten)]
        predict: PredictArgs,
    },
    /// Band width and bounded functional of one orbit in a given direction.
    BandReport {
        #[command(flatten)]
        scene: SceneArgs,
        #[command(flatten)]
        orbit: OrbitArgs,
        /// Band direction `x,y`; defaults to the prediction from --u/--word.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        direction: Option<Vec2>,
        #[command(flatten)]
        predict: PredictArgs,
    },
    /// Log-log growth exponent of the tile displacement over random orbits.
    Deviation {
        #[command(flatten)]
        scene: SceneArgs,
        #[command(flatten)]
        orbit: OrbitArgs,
        #[arg(long)]
        orbits: Option<usize>,
    },
    /// Sup distance between matched flat and round orbits.
    Compare {
        #[command(flatten)]
        scene: SceneArgs,
        #[command(flatten)]
        orbit: OrbitArgs,
    },
    /// Runs acceptance criteria and prints PASS/FAIL per criterion.
    Verify {
        #[arg(long, default_value = "all", value_parser = clap::builder::PossibleValuesParser::new(Suite::NAMES))]
        suite: String,
        /// Reduced experiment sizes with unchanged thresholds.
        #[arg(long)]
        quick: bool,
    },
}

/// Optional file configuration, merged under the command-line flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    lattice: Option<LatticeSpec>,
    #[serde(rename = "R")]
    r: Option<f64>,
    model: Option<Model>,
    tol_singular: Option<f64>,
    start: Option<Vec2>,
    dir: Option<Direction>,
    t_max: Option<f64>,
    sample_dt: Option<f64>,
    orbits: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    format: Option<Format>,
    u: Option<String>,
    word: Option<String>,
    direction: Option<Vec2>,
    verify: Option<VerifyConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum LatticeSpec {
    Name(String),
    Basis(Lattice2),
}

/// Usage errors exit with 2, domain errors with 1.
#[derive(Debug)]
enum CliError {
    Usage(String),
    Domain(String),
}

impl CliError {
    fn usage(msg: impl std::fmt::Display) -> Self {
        CliError::Usage(msg.to_string())
    }

    fn domain(msg: impl std::fmt::Display) -> Self {
        CliError::Domain(msg.to_string())
    }
}

impl From<RaytraceError> for CliError {
    fn from(e: RaytraceError) -> Self {
        match e {
            RaytraceError::NonPositiveRadius(_) | RaytraceError::InvalidConfig(_) => CliError::usage(e),
            other => CliError::domain(other),
        }
    }
}

impl From<analysis::AnalysisError> for CliError {
    fn from(e: analysis::AnalysisError) -> Self {
        match e {
            analysis::AnalysisError::Raytrace(r) => r.into(),
            other => CliError::domain(other),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn parse_lattice(s: &str) -> Result<Lattice2, String> {
    match s {
        "square" => Ok(Lattice2::square()),
        "hexagonal" => Ok(Lattice2::hexagonal()),
        "example54" => Ok(Lattice2::example54()),
        _ if s.trim_start().starts_with('{') => serde_json::from_str(s).map_err(|e| e.to_string()),
        _ => {
            let text = fs::read_to_string(s).map_err(|e| format!("{s}: {e}"))?;
            serde_json::from_str(&text).map_err(|e| format!("{s}: {e}"))
        }
    }
}

fn parse_real(s: &str) -> Result<f64, String> {
    let v = match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|e| format!("{s}: {e}"))?;
            let q: f64 = q.trim().parse().map_err(|e| format!("{s}: {e}"))?;
            p / q
        }
        None => s.trim().parse().map_err(|e| format!("{s}: {e}"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s} is not a finite number"))
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v = parse_real(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{s} must be positive"))
    }
}

fn parse_radius(s: &str) -> Result<f64, String> {
    parse_positive(s).map_err(|e| format!("R: {e}"))
}

fn parse_point(s: &str) -> Result<Vec2, String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected x,y, got {s}"))?;
    Ok(Vec2::new(parse_real(x)?, parse_real(y)?))
}

fn parse_torus_point(s: &str) -> Result<TorusPoint, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_matrix(s: &str) -> Result<SL2Z, String> {
    let nums: Vec<i64> = s
        .split(|c: char| !(c.is_ascii_digit() || c == '-'))
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<i64>().map_err(|e| format!("{t}: {e}")))
        .collect::<Result<_, _>>()?;
    match nums[..] {
        [a, b, c, d] => SL2Z::new(a, b, c, d).map_err(|e| e.to_string()),
        _ => Err(format!("expected four integers, got {s}")),
    }
}

struct Ctx {
    file: RunConfig,
    seed: u64,
    out: Option<PathBuf>,
    tol_singular: Option<f64>,
    format: Option<Format>,
}

impl Ctx {
    fn load(cli: &Cli) -> CliResult<Ctx> {
        let file = match &cli.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        let seed = cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
        let out = cli.out.clone().or_else(|| file.out.clone());
        let tol_singular = cli.tol_singular.or(file.tol_singular);
        if let Some(t) = tol_singular {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(CliError::usage(format!("--tol-singular must be a finite non-negative number, got {t}")));
            }
        }
        let format = cli.format.or(file.format);
        Ok(Ctx { file, seed, out, tol_singular, format })
    }

    fn lattice(&self, arg: &Option<Lattice2>) -> CliResult<Lattice2> {
        if let Some(l) = arg {
            return Ok(*l);
        }
        match &self.file.lattice {
            Some(LatticeSpec::Basis(l)) => Ok(*l),
            Some(LatticeSpec::Name(n)) => parse_lattice(n).map_err(CliError::usage),
            None => Err(CliError::usage("missing --lattice")),
        }
    }

    fn radius(&self, arg: Option<f64>) -> CliResult<f64> {
        let r = arg.or(self.file.r).ok_or_else(|| CliError::usage("missing --R"))?;
        if r > 0.0 && r.is_finite() {
            Ok(r)
        } else {
            Err(CliError::usage(format!("R must be positive, got {r}")))
        }
    }

    fn scene_config(&self, s: &SceneArgs) -> CliResult<SceneConfig> {
        let model = s.model.map(Model::from).or(self.file.model).unwrap_or(Model::Flat);
        let mut cfg = SceneConfig::new(self.lattice(&s.lattice)?, self.radius(s.r)?, model);
        cfg.tol_singular = self.tol_singular.unwrap_or(DEFAULT_TOL_SINGULAR);
        Ok(cfg)
    }

    fn scene(&self, s: &SceneArgs) -> CliResult<Scene> {
        Ok(Scene::new(self.scene_config(s)?)?)
    }

    fn positive(&self, name: &str, arg: Option<f64>, file: Option<f64>, default: f64) -> CliResult<f64> {
        let v = arg.or(file).unwrap_or(default);
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(CliError::usage(format!("{name} must be positive, got {v}")))
        }
    }

    fn orbit(&self, o: &OrbitArgs, default_t: f64) -> CliResult<(Option<Vec2>, Direction, f64, f64)> {
        let t_max = self.positive("t_max", o.t_max, self.file.t_max, default_t)?;
        let sample_dt = self.positive("sample_dt", o.sample_dt, self.file.sample_dt, (t_max / 1000.0).max(1e-3))?;
        let dir = o.dir.map(Direction::from).or(self.file.dir).unwrap_or(Direction::Up);
        Ok((o.start.or(self.file.start), dir, t_max, sample_dt))
    }

    fn prediction(&self, p: &PredictArgs, r: f64) -> CliResult<Option<BandPrediction>> {
        let u = match (p.u, &self.file.u) {
            (Some(u), _) => Some(u),
            (None, Some(s)) => Some(parse_torus_point(s).map_err(CliError::usage)?),
            (None, None) => None,
        };
        let word = p.word.clone().or_else(|| self.file.word.clone());
        let h = match (p.matrix, word) {
            (Some(m), _) => Some(m),
            (None, Some(w)) => {
                let w: GenWord = w.parse().map_err(|e| CliError::usage(format!("--word: {e}")))?;
                Some(w.product().map_err(CliError::domain)?)
            }
            (None, None) => None,
        };
        match (u, h) {
            (Some(u), Some(h)) => predictor::predict_band_periodic(&u, &h, r).map(Some).map_err(CliError::domain),
            (None, None) => Ok(None),
            _ => Err(CliError::usage("a prediction needs both --u and --word (or --matrix)")),
        }
    }

    fn only_json(&self, command: &str) -> CliResult<()> {
        match self.format {
            None | Some(Format::Json) => Ok(()),
            Some(f) => Err(CliError::usage(format!("{command} only writes json, not {f:?}"))),
        }
    }

    /// Writes `name` into the output directory, or prints it.
    fn emit(&self, name: &str, body: &str) -> CliResult<()> {
        match &self.out {
            Some(dir) => {
                fs::create_dir_all(dir).map_err(|e| CliError::domain(format!("{}: {e}", dir.display())))?;
                let path = dir.join(name);
                fs::write(&path, body).map_err(|e| CliError::domain(format!("{}: {e}", path.display())))?;
                eprintln!("wrote {}", path.display());
                Ok(())
            }
            None => {
                println!("{}", body.trim_end());
                Ok(())
            }
        }
    }

    fn emit_json(&self, name: &str, value: &serde_json::Value) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).map_err(CliError::domain)?;
        self.emit(name, &text)
    }
}

fn to_value<T: Serialize>(v: &T) -> CliResult<serde_json::Value> {
    serde_json::to_value(v).map_err(CliError::domain)
}

fn cmd_admissible(ctx: &Ctx, s: &SceneArgs) -> CliResult<ExitCode> {
    ctx.only_json("admissible")?;
    let l = ctx.lattice(&s.lattice)?;
    let r = ctx.radius(s.r)?;
    let admissible = lattice::is_admissible(&l, r).map_err(CliError::domain)?;
    let disjoint = lattice::slits_disjoint(&l, r).map_err(CliError::domain)?;
    let v = lattice::shortest_vector(&l);
    ctx.emit_json(
        "admissible.json",
        &json!({
            "seed": ctx.seed,
            "lattice": l,
            "R": r,
            "admissible": admissible,
            "shortest_vector": v,
            "shortest_length": v.norm(),
            "slits_disjoint": disjoint,
        }),
    )?;
    Ok(if admissible { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_reduce_basis(ctx: &Ctx, s: &SceneArgs) -> CliResult<ExitCode> {
    ctx.only_json("reduce-basis")?;
    let l = ctx.lattice(&s.lattice)?;
    let reduced = lattice::gauss_reduce(&l).map_err(CliError::domain)?;
    let mut out = json!({ "seed": ctx.seed, "lattice": l, "reduced": reduced });
    if let Some(r) = s.r.or(ctx.file.r) {
        let r = ctx.radius(Some(r))?;
        let run = lattice::positive_basis_run(&l, r).map_err(CliError::domain)?;
        out["R"] = json!(r);
        out["positive_basis"] = to_value(&run.basis)?;
        out["euclid_steps"] = to_value(&run.steps.iter().map(|&(a, b)| [a, b]).collect::<Vec<_>>())?;
    }
    ctx.emit_json("reduce-basis.json", &out)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_predict(ctx: &Ctx, p: &PredictArgs, r: Option<f64>) -> CliResult<ExitCode> {
    ctx.only_json("predict")?;
    let r = ctx.radius(r)?;
    let pred = ctx.prediction(p, r)?.ok_or_else(|| CliError::usage("predict needs --u and --word (or --matrix)"))?;
    let mut v = to_value(&pred)?;
    v["seed"] = json!(ctx.seed);
    v["R"] = json!(r);
    ctx.emit_json("prediction.json", &v)?;
    Ok(ExitCode::SUCCESS)
}

fn default_start(scene: &Scene) -> Vec2 {
    // an irrational offset, clear of slit centers and lens disks
    let b = scene.basis();
    b.gamma_plus * 0.2071067811865476 + b.gamma_minus * 0.4142135623730951
}

fn cmd_trace(ctx: &Ctx, s: &SceneArgs, o: &OrbitArgs, p: &PredictArgs) -> CliResult<ExitCode> {
    let scene = ctx.scene(s)?;
    let (start, dir, t_max, sample_dt) = ctx.orbit(o, 1e3)?;
    let start = start.unwrap_or_else(|| default_start(&scene));
    let prediction = ctx.prediction(p, scene.radius())?;
    let t = raytrace::trace(&scene, start, dir, TraceOptions::new(t_max, sample_dt))?;
    match ctx.format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut v = to_value(&t)?;
            v["seed"] = json!(ctx.seed);
            ctx.emit_json("trajectory.json", &v)?;
        }
        Format::Csv => {
            let mut buf = Vec::new();
            t.write_csv(&mut buf).map_err(CliError::domain)?;
            ctx.emit("trajectory.csv", &String::from_utf8_lossy(&buf))?;
        }
        Format::Svg => ctx.emit("trajectory.svg", &svg(&scene, &t, prediction.as_ref().map(|p| p.direction)))?,
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_band_report(
    ctx: &Ctx,
    s: &SceneArgs,
    o: &OrbitArgs,
    direction: Option<Vec2>,
    p: &PredictArgs,
) -> CliResult<ExitCode> {
    let scene = ctx.scene(s)?;
    let (start, dir, t_max, sample_dt) = ctx.orbit(o, 1e4)?;
    let start = start.unwrap_or_else(|| default_start(&scene));
    let direction = match direction.or(ctx.file.direction) {
        Some(d) => d,
        None => {
            ctx.prediction(p, scene.radius())?
                .ok_or_else(|| CliError::usage("band-report needs --direction or --u/--word"))?
                .direction
        }
    };
    let t = raytrace::trace(&scene, start, dir, TraceOptions::new(t_max, sample_dt).without_events())?;
    let report: BandReport = analysis::band_report(&t, direction)?;
    match ctx.format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut v = to_value(&report)?;
            v["seed"] = json!(ctx.seed);
            ctx.emit_json("band-report.json", &v)?;
        }
        Format::Csv => {
            let mut text = String::from("time,along\n");
            for (time, along) in &report.along_displacement_series {
                let _ = writeln!(text, "{time},{along}");
            }
            ctx.emit("band-report.csv", &text)?;
        }
        Format::Svg => return Err(CliError::usage("band-report writes json or csv")),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_deviation(ctx: &Ctx, s: &SceneArgs, o: &OrbitArgs, orbits: Option<usize>) -> CliResult<ExitCode> {
    use rand::SeedableRng;
    use rayon::prelude::*;
    ctx.only_json("deviation")?;
    let scene = ctx.scene(s)?;
    let (start, dir, t_max, sample_dt) = ctx.orbit(o, 1e5)?;
    let sample_dt = o.sample_dt.or(ctx.file.sample_dt).unwrap_or(sample_dt.max(1.0));
    let n = orbits.or(ctx.file.orbits).unwrap_or(20);
    if n == 0 {
        return Err(CliError::usage("--orbits must be at least 1"));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(ctx.seed);
    let starts: Vec<Vec2> = match start {
        Some(p) if n == 1 => vec![p],
        _ => (0..n).map(|_| analysis::random_point_in_tile(&mut rng, scene.basis())).collect(),
    };
    let fits: Vec<_> = starts
        .par_iter()
        .map(|&p| -> CliResult<_> {
            let t = raytrace::trace(&scene, p, dir, TraceOptions::new(t_max, sample_dt).without_events())?;
            Ok((p, analysis::deviation_exponent(&t)))
        })
        .collect::<CliResult<_>>()?;
    let mut slopes: Vec<f64> = fits.iter().filter_map(|(_, f)| f.as_ref().ok().map(|f| f.slope)).collect();
    slopes.sort_by(f64::total_cmp);
    let median = (!slopes.is_empty()).then(|| {
        let k = slopes.len();
        if k % 2 == 1 {
            slopes[k / 2]
        } else {
            0.5 * (slopes[k / 2 - 1] + slopes[k / 2])
        }
    });
    let orbits: Vec<_> = fits
        .iter()
        .map(|(p, f)| match f {
            Ok(f) => json!({ "start": p, "slope": f.slope, "r_squared": f.r_squared, "fit": f }),
            Err(e) => json!({ "start": p, "error": e.to_string() }),
        })
        .collect();
    ctx.emit_json(
        "deviation.json",
        &json!({ "seed": ctx.seed, "t_max": t_max, "median_slope": median, "orbits": orbits }),
    )?;
    Ok(if median.is_some() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_compare(ctx: &Ctx, s: &SceneArgs, o: &OrbitArgs) -> CliResult<ExitCode> {
    ctx.only_json("compare")?;
    let cfg = ctx.scene_config(s)?;
    let flat = SceneConfig { model: Model::Flat, ..cfg };
    let round = SceneConfig { model: Model::Eaton, ..cfg };
    let (start, _, t_max, _) = ctx.orbit(o, 1e3)?;
    let start = match start {
        Some(p) => p,
        None => default_start(&Scene::new(flat)?),
    };
    let d = analysis::compare_models(&flat, &round, start, t_max)?;
    ctx.emit_json(
        "compare.json",
        &json!({
            "seed": ctx.seed,
            "lattice": cfg.lattice,
            "R": cfg.radius,
            "start": start,
            "t_max": t_max,
            "sup_distance": d,
            "bound": 2.0 * cfg.radius,
            "within_bound": d <= 2.0 * cfg.radius,
        }),
    )?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(ctx: &Ctx, suite: &str, quick: bool) -> CliResult<ExitCode> {
    let suite = Suite::parse(suite).ok_or_else(|| CliError::usage(format!("unknown suite {suite}")))?;
    let mut cfg = match (&ctx.file.verify, quick) {
        (Some(v), false) => *v,
        (_, true) => VerifyConfig::quick(),
        (None, false) => VerifyConfig::default(),
    };
    cfg.seed = ctx.seed;
    println!("seed {}", cfg.seed);
    let results = verify::run_suite(suite, &cfg);
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| r.status.is_failure()).count();
    println!("{}", if failed == 0 { "PASS" } else { "FAIL" });
    if let Some(dir) = &ctx.out {
        let v = json!({ "seed": cfg.seed, "config": cfg, "results": results });
        let path = dir.join("verify.json");
        fs::create_dir_all(dir).map_err(|e| CliError::domain(format!("{}: {e}", dir.display())))?;
        fs::write(&path, serde_json::to_string_pretty(&v).map_err(CliError::domain)?)
            .map_err(|e| CliError::domain(format!("{}: {e}", path.display())))?;
    }
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

const SVG_SIZE: f64 = 800.0;
const SVG_MAX_OBSTACLES: f64 = 20_000.0;

/// Orbit drawn from its events, obstacles in the bounding box, and band
/// edges at the measured width when a direction is given.
fn svg(scene: &Scene, t: &Trajectory, band: Option<Vec2>) -> String {
    let r = scene.radius();
    let b = scene.basis();
    let mut pts: Vec<Vec2> = vec![t.start.pos, t.end.pos];
    pts.extend(t.events.iter().map(|e| e.position));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in &pts {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    let pad = 2.0 * r + 0.5;
    let (x0, x1, y0, y1) = (x0 - pad, x1 + pad, y0 - pad, y1 + pad);
    let scale = SVG_SIZE / (x1 - x0).max(y1 - y0);
    let px = |p: Vec2| ((p.x - x0) * scale, (y1 - p.y) * scale);
    let stroke = 1.0f64.max(SVG_SIZE / 800.0);

    let mut s = String::new();
    let (w, h) = ((x1 - x0) * scale, (y1 - y0) * scale);
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.1}" height="{h:.1}" viewBox="0 0 {w:.1} {h:.1}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let search = lattice::PointEnumerator::new(&b.lattice());
    if search.estimate(x0, x1, y0, y1) <= SVG_MAX_OBSTACLES {
        let _ = writeln!(s, r##"<g id="obstacles" stroke="#555" fill="none" stroke-width="{stroke}">"##);
        search.for_each_in_box(x0, x1, y0, y1, |_, c| {
            let (cx, cy) = px(c);
            match scene.model() {
                Model::Flat => {
                    let _ = writeln!(s, r#"<line x1="{:.2}" y1="{cy:.2}" x2="{:.2}" y2="{cy:.2}"/>"#, cx - r * scale, cx + r * scale);
                }
                Model::Eaton => {
                    let _ = writeln!(s, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{:.2}"/>"#, r * scale);
                }
            }
        });
        let _ = writeln!(s, "</g>");
    }

    if let Some(d) = band.and_then(Vec2::normalized) {
        let offsets = t.samples.iter().map(|p| d.wedge(p.pos - t.start.pos));
        let (lo, hi) = offsets.fold((0.0f64, 0.0f64), |(lo, hi), o| (lo.min(o), hi.max(o)));
        let normal = Vec2::new(-d.y, d.x);
        let span = (x1 - x0).hypot(y1 - y0);
        let _ = writeln!(s, r##"<g id="band" stroke="#c33" stroke-dasharray="6 4" stroke-width="{stroke}">"##);
        for off in [lo, hi] {
            let c = t.start.pos + normal * off;
            let (ax, ay) = px(c - d * span);
            let (bx, by) = px(c + d * span);
            let _ = writeln!(s, r#"<line x1="{ax:.2}" y1="{ay:.2}" x2="{bx:.2}" y2="{by:.2}"/>"#);
        }
        let _ = writeln!(s, "</g>");
    }

    let mut path = String::new();
    let (sx, sy) = px(t.start.pos);
    let _ = write!(path, "M{sx:.2} {sy:.2}");
    for e in &t.events {
        let (ex, ey) = px(e.position);
        match e.kind {
            EventKind::LensExit => {
                let _ = write!(path, " M{ex:.2} {ey:.2}");
            }
            EventKind::SlitHit => {
                let c = b.point(e.lattice_point);
                let (rx, ry) = px(Vec2::new(2.0 * c.x - e.position.x, e.position.y));
                let _ = write!(path, " L{ex:.2} {ey:.2} M{rx:.2} {ry:.2}");
            }
            _ => {
                let _ = write!(path, " L{ex:.2} {ey:.2}");
            }
        }
    }
    let (ex, ey) = px(t.end.pos);
    let _ = write!(path, " L{ex:.2} {ey:.2}");
    let _ = writeln!(s, r##"<path id="orbit" d="{path}" stroke="#14c" fill="none" stroke-width="{stroke}"/>"##);
    let _ = writeln!(s, "</svg>");
    s
}

fn run(cli: &Cli) -> CliResult<ExitCode> {
    let ctx = Ctx::load(cli)?;
    match &cli.command {
        Command::Admissible { scene } => cmd_admissible(&ctx, scene),
        Command::ReduceBasis { scene } => cmd_reduce_basis(&ctx, scene),
        Command::Predict { predict, r } => cmd_predict(&ctx, predict, *r),
        Command::Trace { scene, orbit, predict } => cmd_trace(&ctx, scene, orbit, predict),
        Command::BandReport { scene, orbit, direction, predict } => {
            cmd_band_report(&ctx, scene, orbit, *direction, predict)
        }
        Command::Deviation { scene, orbit, orbits } => cmd_deviation(&ctx, scene, orbit, *orbits),
        Command::Compare { scene, orbit } => cmd_compare(&ctx, scene, orbit),
        Command::Verify { suite, quick } => cmd_verify(&ctx, suite, *quick),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parsers() {
        assert!((parse_real("1/3").unwrap() - 1.0 / 3.0).abs() < 1e-16);
        assert!(parse_radius("0").is_err());
        assert!(parse_radius("-1").is_err());
        assert_eq!(parse_point("0.1,-2").unwrap(), Vec2::new(0.1, -2.0));
        assert_eq!(parse_matrix("[[1,1],[3,4]]").unwrap(), SL2Z { a: 1, b: 1, c: 3, d: 4 });
        assert!(parse_matrix("1,2,3,4").is_err());
        assert_eq!(parse_lattice("square").unwrap(), Lattice2::square());
        assert_eq!(parse_lattice(r#"{"basis": [[1,0],[0,1]]}"#).unwrap(), Lattice2::square());
        assert!(parse_lattice("nope.json").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
