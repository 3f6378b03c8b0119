//! Event-driven tracing of vertical rays in the slit plane `F(Lambda, R)`
//! and in the round Eaton array `L(Lambda, R)`.
//!
//! Flat model: a ray hitting the interior of a slit is rotated by `pi` about
//! the slit center. Round model: a ray entering a lens at horizontal offset
//! `dx` from its center leaves at offset `-dx` on the same horizontal chord
//! and runs back; a ray through the center turns back there. Time is the
//! vertical distance travelled outside the lenses.
//!
//! The tracer keeps the ray as a tile index of the centered-parallelogram
//! tiling plus a bounded offset inside that tile, so long runs do not lose
//! precision to large absolute coordinates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{
    self, tile_index, Lattice2, LatticeError, PointEnumerator, PositiveBasis, TileIndex, Vec2,
};

pub const DEFAULT_TOL_SINGULAR: f64 = 1e-10;
pub const DEFAULT_MAX_DOUBLINGS: u32 = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RaytraceError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("invalid scene: {0}")]
    InvalidConfig(String),
    #[error("no slit or lens within vertical distance {searched} of {from}")]
    NoHitWithinCap { from: Vec2, searched: f64 },
    #[error("start point {0} lies inside a lens")]
    StartInsideLens(Vec2),
    #[error("event {0:?} cannot be applied here")]
    WrongEvent(EventKind),
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
}

pub type Result<T> = std::result::Result<T, RaytraceError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Flat,
    Eaton,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Direction::Up => 1.0,
            Direction::Down => -1.0,
        }
    }

    #[inline]
    pub fn reversed(self) -> Direction {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
        }
    }
}

/// Which of the two copies of the slit plane the ray is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sheet {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sheet {
    pub fn toggled(self) -> Sheet {
        match self {
            Sheet::Plus => Sheet::Minus,
            Sheet::Minus => Sheet::Plus,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sheet::Plus => '+',
            Sheet::Minus => '-',
        }
    }
}

fn default_tol() -> f64 {
    DEFAULT_TOL_SINGULAR
}

fn default_doublings() -> u32 {
    DEFAULT_MAX_DOUBLINGS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub lattice: Lattice2,
    #[serde(rename = "R")]
    pub radius: f64,
    pub model: Model,
    #[serde(default = "default_tol")]
    pub tol_singular: f64,
    /// Event search starts with a window of height `4/(2R)` and doubles it at
    /// most this many times.
    #[serde(default = "default_doublings")]
    pub max_window_doublings: u32,
}

impl SceneConfig {
    pub fn new(lattice: Lattice2, radius: f64, model: Model) -> Self {
        SceneConfig {
            lattice,
            radius,
            model,
            tol_singular: DEFAULT_TOL_SINGULAR,
            max_window_doublings: DEFAULT_MAX_DOUBLINGS,
        }
    }

    pub fn with_model(mut self, model: Model) -> Self {
        self.model = model;
        self
    }
}

/// A validated scene with its positive basis and point search prepared.
#[derive(Debug, Clone)]
pub struct Scene {
    config: SceneConfig,
    basis: PositiveBasis,
    search: PointEnumerator,
}

impl Scene {
    pub fn new(config: SceneConfig) -> Result<Self> {
        let r = config.radius;
        if !(r > 0.0 && r.is_finite()) {
            return Err(RaytraceError::NonPositiveRadius(r));
        }
        if !(config.tol_singular >= 0.0 && config.tol_singular < r) {
            return Err(RaytraceError::InvalidConfig(format!(
                "tol_singular = {} must lie in [0, R)",
                config.tol_singular
            )));
        }
        match config.model {
            Model::Flat if !lattice::slits_disjoint(&config.lattice, r)? => {
                return Err(RaytraceError::InvalidConfig(format!("slits of length {} overlap", 2.0 * r)))
            }
            Model::Eaton if !lattice::is_admissible(&config.lattice, r)? => {
                return Err(RaytraceError::InvalidConfig(format!("lattice is not {r}-admissible")))
            }
            _ => {}
        }
        let basis = lattice::positive_basis(&config.lattice, r)?;
        let search = PointEnumerator::new(&basis.lattice());
        Ok(Scene { config, basis, search })
    }

    pub fn config(&self) -> &SceneConfig {
        &self.config
    }

    pub fn basis(&self) -> &PositiveBasis {
        &self.basis
    }

    pub fn radius(&self) -> f64 {
        self.config.radius
    }

    pub fn model(&self) -> Model {
        self.config.model
    }

    /// The same lattice and radius under the other model, if valid.
    pub fn with_model(&self, model: Model) -> Result<Scene> {
        Scene::new(self.config.with_model(model))
    }

    fn initial_window(&self) -> f64 {
        4.0 / (2.0 * self.config.radius)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayState {
    pub pos: Vec2,
    pub dir: Direction,
    pub time: f64,
    pub tile: TileIndex,
    pub sheet: Sheet,
}

impl RayState {
    pub fn new(pos: Vec2, dir: Direction, basis: &PositiveBasis) -> Self {
        RayState { pos, dir, time: 0.0, tile: tile_index(pos, basis).0, sheet: Sheet::Plus }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    SlitHit,
    LensEntry,
    LensExit,
    CenterTurnback,
    SingularEndpoint,
}

/// `lattice_point` is in coordinates of the scene's positive basis. Lens
/// entry and exit share a time stamp since internal transit is not timed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub position: Vec2,
    pub lattice_point: TileIndex,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub time: f64,
    pub pos: Vec2,
    pub tile: TileIndex,
    pub sheet: Sheet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub config: SceneConfig,
    pub basis: PositiveBasis,
    pub start: RayState,
    pub end: RayState,
    pub events: Vec<Event>,
    pub samples: Vec<Sample>,
    /// Set when the orbit passed through a slit endpoint or grazed a lens.
    pub singular: bool,
    pub singular_count: usize,
    pub interactions: usize,
}

impl Trajectory {
    pub fn t_max(&self) -> f64 {
        self.end.time
    }

    /// Writes `time,x,y,tile1,tile2,sheet` rows with a header line.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,x,y,tile1,tile2,sheet")?;
        for s in &self.samples {
            writeln!(w, "{},{},{},{},{},{}", s.time, s.pos.x, s.pos.y, s.tile.m1, s.tile.m2, s.sheet.symbol())?;
        }
        w.flush()
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string(self)
    }

    /// Samples with `time <= t`.
    pub fn samples_until(&self, t: f64) -> &[Sample] {
        let n = self.samples.partition_point(|s| s.time <= t);
        &self.samples[..n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    pub t_max: f64,
    pub sample_dt: f64,
    pub record_events: bool,
}

impl TraceOptions {
    pub fn new(t_max: f64, sample_dt: f64) -> Self {
        TraceOptions { t_max, sample_dt, record_events: true }
    }

    pub fn without_events(mut self) -> Self {
        self.record_events = false;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum HitKind {
    Slit,
    Lens,
    Center,
    Singular,
}

#[derive(Debug, Clone, Copy)]
struct Hit {
    kind: HitKind,
    /// Tile-relative lattice point.
    point: TileIndex,
    center: Vec2,
    /// Vertical distance to the interaction point.
    dist: f64,
    /// Half chord `sqrt(R^2 - dx^2)` for lens hits, zero otherwise.
    half_chord: f64,
}

/// Ray stored as a tile plus an offset from that tile's center.
#[derive(Debug, Clone, Copy)]
struct Cursor {
    frame: TileIndex,
    local: Vec2,
    dir: Direction,
    time: f64,
    sheet: Sheet,
    last: Option<TileIndex>,
}

impl Cursor {
    fn from_state(s: &RayState, basis: &PositiveBasis) -> Self {
        Cursor {
            frame: s.tile,
            local: s.pos - basis.point(s.tile),
            dir: s.dir,
            time: s.time,
            sheet: s.sheet,
            last: None,
        }
    }

    fn retile(&mut self, basis: &PositiveBasis) {
        let (dm, _) = tile_index(self.local, basis);
        if dm != TileIndex::ORIGIN {
            self.frame = self.frame + dm;
            self.local -= basis.point(dm);
        }
    }

    fn absolute(&self, basis: &PositiveBasis, local: Vec2) -> Vec2 {
        basis.point(self.frame) + local
    }

    fn state(&self, basis: &PositiveBasis) -> RayState {
        let (dm, _) = tile_index(self.local, basis);
        RayState {
            pos: self.absolute(basis, self.local),
            dir: self.dir,
            time: self.time,
            tile: self.frame + dm,
            sheet: self.sheet,
        }
    }
}

impl Scene {
    /// Nearest interaction ahead of `from`, within vertical distance
    /// `horizon` when that is finite; `Ok(None)` if there is none. An infinite
    /// horizon searches until the window cap and then fails.
    fn find_hit(&self, from: Vec2, dir: Direction, horizon: f64, exclude: Option<TileIndex>) -> Result<Option<Hit>> {
        let r = self.config.radius;
        let tol = self.config.tol_singular;
        let sign = dir.sign();
        let reach = match self.config.model {
            Model::Flat => 0.0,
            Model::Eaton => r,
        };
        let mut window = self.initial_window();
        let mut doublings = 0u32;
        loop {
            let span = if horizon.is_finite() { window.min(horizon + reach) } else { window };
            let (ymin, ymax) = if sign > 0.0 { (from.y, from.y + span) } else { (from.y - span, from.y) };
            let mut best: Option<Hit> = None;
            self.search.for_each_in_box(from.x - r - tol, from.x + r + tol, ymin, ymax, |(i, j), q| {
                let (m1, m2) = self.search.input_coordinates(i, j);
                let point = TileIndex::new(m1, m2);
                if Some(point) == exclude {
                    return;
                }
                let dy = sign * (q.y - from.y);
                if dy <= 0.0 {
                    return;
                }
                let dx = (q.x - from.x).abs();
                if dx >= r + tol {
                    return;
                }
                let hit = if dx > r - tol {
                    Hit { kind: HitKind::Singular, point, center: q, dist: dy, half_chord: 0.0 }
                } else {
                    match self.config.model {
                        Model::Flat => Hit { kind: HitKind::Slit, point, center: q, dist: dy, half_chord: 0.0 },
                        Model::Eaton => {
                            let s = (r * r - dx * dx).sqrt();
                            let kind = if dx < tol { HitKind::Center } else { HitKind::Lens };
                            Hit { kind, point, center: q, dist: dy - s, half_chord: s }
                        }
                    }
                };
                let better = match &best {
                    None => true,
                    Some(b) => {
                        hit.dist < b.dist
                            || (hit.dist == b.dist && (hit.point.m1, hit.point.m2) < (b.point.m1, b.point.m2))
                    }
                };
                if better {
                    best = Some(hit);
                }
            });
            let covered = span - reach;
            if let Some(b) = best {
                if b.dist <= covered {
                    return Ok(Some(b));
                }
            }
            if horizon.is_finite() && span >= horizon + reach {
                return Ok(None);
            }
            if doublings >= self.config.max_window_doublings {
                return Err(RaytraceError::NoHitWithinCap { from, searched: covered });
            }
            doublings += 1;
            window *= 2.0;
        }
    }

    fn hit_event(&self, c: &Cursor, hit: &Hit) -> Event {
        let sign = c.dir.sign();
        let (kind, local) = match hit.kind {
            HitKind::Slit => (EventKind::SlitHit, Vec2::new(c.local.x, hit.center.y)),
            HitKind::Singular => (EventKind::SingularEndpoint, Vec2::new(c.local.x, hit.center.y)),
            HitKind::Lens => (EventKind::LensEntry, Vec2::new(c.local.x, hit.center.y - sign * hit.half_chord)),
            HitKind::Center => (EventKind::CenterTurnback, Vec2::new(c.local.x, hit.center.y - sign * hit.half_chord)),
        };
        Event {
            kind,
            position: c.absolute(&self.basis, local),
            lattice_point: c.frame + hit.point,
            time: c.time + hit.dist,
        }
    }

    /// Moves the cursor to the interaction and applies it. Returns the exit
    /// event for lens transits.
    fn apply_hit(&self, c: &mut Cursor, hit: &Hit) -> Option<Event> {
        let sign = c.dir.sign();
        c.time += hit.dist;
        let mut exit = None;
        match hit.kind {
            HitKind::Singular => {
                c.local.y = hit.center.y;
            }
            HitKind::Slit => {
                c.local = Vec2::new(2.0 * hit.center.x - c.local.x, hit.center.y);
                c.dir = c.dir.reversed();
                c.sheet = c.sheet.toggled();
            }
            HitKind::Center => {
                c.local.y = hit.center.y - sign * hit.half_chord;
                c.dir = c.dir.reversed();
                c.sheet = c.sheet.toggled();
            }
            HitKind::Lens => {
                c.local = Vec2::new(2.0 * hit.center.x - c.local.x, hit.center.y - sign * hit.half_chord);
                c.dir = c.dir.reversed();
                c.sheet = c.sheet.toggled();
                exit = Some(Event {
                    kind: EventKind::LensExit,
                    position: c.absolute(&self.basis, c.local),
                    lattice_point: c.frame + hit.point,
                    time: c.time,
                });
            }
        }
        c.last = Some(c.frame + hit.point);
        c.retile(&self.basis);
        exit
    }

    /// Validates a start point. In the round model a start inside a disk is
    /// accepted only on the outgoing half of the chord, as if the ray had
    /// just crossed that lens; the lens is returned so the search skips it.
    fn check_start(&self, pos: Vec2, dir: Direction) -> Result<Option<TileIndex>> {
        if !pos.is_finite() {
            return Err(LatticeError::NonFinite.into());
        }
        if self.config.model == Model::Flat {
            return Ok(None);
        }
        let r = self.config.radius;
        let mut inside = None;
        self.search.for_each_in_box(pos.x - r, pos.x + r, pos.y - r, pos.y + r, |(i, j), q| {
            if (q - pos).norm() < r - self.config.tol_singular {
                let (m1, m2) = self.search.input_coordinates(i, j);
                inside = Some((TileIndex::new(m1, m2), q));
            }
        });
        match inside {
            None => Ok(None),
            Some((point, q)) if dir.sign() * (pos.y - q.y) >= 0.0 => Ok(Some(point)),
            Some(_) => Err(RaytraceError::StartInsideLens(pos)),
        }
    }

    fn next_event_of_kind(&self, s: &RayState, model: Model) -> Result<Event> {
        if self.config.model != model {
            return Err(RaytraceError::InvalidConfig(format!("scene model is {:?}", self.config.model)));
        }
        let exclude = self.check_start(s.pos, s.dir)?;
        let c = Cursor::from_state(s, &self.basis);
        let hit = self
            .find_hit(c.local, c.dir, f64::INFINITY, exclude.map(|p| p - c.frame))?
            .expect("infinite horizon never returns None");
        Ok(self.hit_event(&c, &hit))
    }
}

/// First slit hit (or slit-endpoint passage) ahead of a ray in the flat model.
pub fn next_flat_event(s: &RayState, scene: &Scene) -> Result<Event> {
    scene.next_event_of_kind(s, Model::Flat)
}

/// Rotation by `pi` about the slit center; the sheet flips.
pub fn reflect_flat(s: &RayState, e: &Event, basis: &PositiveBasis) -> Result<RayState> {
    if e.kind != EventKind::SlitHit {
        return Err(RaytraceError::WrongEvent(e.kind));
    }
    let center = basis.point(e.lattice_point);
    let pos = Vec2::new(2.0 * center.x - e.position.x, e.position.y);
    Ok(RayState {
        pos,
        dir: s.dir.reversed(),
        time: e.time,
        tile: tile_index(pos, basis).0,
        sheet: s.sheet.toggled(),
    })
}

/// Lens entry (or center turnback, or grazing passage) ahead of a ray in
/// the round model.
pub fn next_eaton_event(s: &RayState, scene: &Scene) -> Result<Event> {
    scene.next_event_of_kind(s, Model::Eaton)
}

/// State after the lens, and the exit event for a transit along a chord.
pub fn reflect_eaton(s: &RayState, e: &Event, basis: &PositiveBasis) -> Result<(RayState, Option<Event>)> {
    match e.kind {
        EventKind::LensEntry => {
            let center = basis.point(e.lattice_point);
            let pos = Vec2::new(2.0 * center.x - e.position.x, e.position.y);
            let state = RayState {
                pos,
                dir: s.dir.reversed(),
                time: e.time,
                tile: tile_index(pos, basis).0,
                sheet: s.sheet.toggled(),
            };
            let exit = Event { kind: EventKind::LensExit, position: pos, lattice_point: e.lattice_point, time: e.time };
            Ok((state, Some(exit)))
        }
        EventKind::CenterTurnback => Ok((
            RayState {
                pos: e.position,
                dir: s.dir.reversed(),
                time: e.time,
                tile: tile_index(e.position, basis).0,
                sheet: s.sheet.toggled(),
            },
            None,
        )),
        other => Err(RaytraceError::WrongEvent(other)),
    }
}

/// Follows a vertical ray until it has travelled `options.t_max`.
///
/// Samples are taken at every multiple of `sample_dt` and at `t_max`.
/// Passing through a slit endpoint (or grazing a lens) continues straight
/// and sets the `singular` flag.
pub fn trace(scene: &Scene, start: Vec2, dir: Direction, options: TraceOptions) -> Result<Trajectory> {
    trace_from(scene, RayState::new(start, dir, &scene.basis), options)
}

pub fn trace_from(scene: &Scene, start: RayState, options: TraceOptions) -> Result<Trajectory> {
    let TraceOptions { t_max, sample_dt, record_events } = options;
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(RaytraceError::InvalidConfig(format!("t_max = {t_max}")));
    }
    if !(sample_dt > 0.0 && sample_dt.is_finite()) {
        return Err(RaytraceError::InvalidConfig(format!("sample_dt = {sample_dt}")));
    }
    let exclude = scene.check_start(start.pos, start.dir)?;
    let basis = &scene.basis;
    let mut c = Cursor::from_state(&start, basis);
    c.last = exclude;
    c.retile(basis);
    let t0 = start.time;
    let t_end = t0 + t_max;
    let mut events = Vec::new();
    let mut samples = Vec::new();
    let mut next_sample = 0u64;
    let mut singular_count = 0usize;
    let mut interactions = 0usize;

    let emit_until = |c: &Cursor, upto: f64, samples: &mut Vec<Sample>, next_sample: &mut u64| {
        loop {
            let ts = t0 + *next_sample as f64 * sample_dt;
            if ts > upto || ts > t_end {
                break;
            }
            let local = Vec2::new(c.local.x, c.local.y + c.dir.sign() * (ts - c.time));
            let (dm, _) = tile_index(local, basis);
            samples.push(Sample { time: ts, pos: c.absolute(basis, local), tile: c.frame + dm, sheet: c.sheet });
            *next_sample += 1;
        }
    };

    loop {
        let remaining = t_end - c.time;
        if remaining <= 0.0 {
            break;
        }
        let hit = scene.find_hit(c.local, c.dir, remaining, c.last.map(|p| p - c.frame))?;
        match hit {
            Some(h) if h.dist <= remaining => {
                emit_until(&c, c.time + h.dist, &mut samples, &mut next_sample);
                let event = scene.hit_event(&c, &h);
                if h.kind == HitKind::Singular {
                    singular_count += 1;
                } else {
                    interactions += 1;
                }
                let exit = scene.apply_hit(&mut c, &h);
                if record_events {
                    events.push(event);
                    events.extend(exit);
                }
            }
            _ => {
                emit_until(&c, t_end, &mut samples, &mut next_sample);
                c.local.y += c.dir.sign() * remaining;
                c.time = t_end;
                c.retile(basis);
            }
        }
    }
    let end = c.state(basis);
    if samples.last().is_none_or(|s| s.time < end.time) {
        samples.push(Sample { time: end.time, pos: end.pos, tile: end.tile, sheet: end.sheet });
    }
    Ok(Trajectory {
        config: scene.config,
        basis: *basis,
        start,
        end,
        events,
        samples,
        singular: singular_count > 0,
        singular_count,
        interactions,
    })
}

/// Refractive index of an Eaton lens of radius `big_r` at distance `r`
/// from its center: `sqrt(2R/r - 1)` inside, `1` outside.
pub fn refractive_index(r: f64, big_r: f64) -> Result<f64> {
    if !(big_r > 0.0) {
        return Err(RaytraceError::NonPositiveRadius(big_r));
    }
    if !(r > 0.0) {
        return Err(RaytraceError::NonPositiveRadius(r));
    }
    if r >= big_r {
        Ok(1.0)
    } else {
        Ok((2.0 * big_r / r - 1.0).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_scene(model: Model) -> Scene {
        Scene::new(SceneConfig::new(Lattice2::square(), 0.25, model)).unwrap()
    }

    fn state(scene: &Scene, x: f64, y: f64, dir: Direction) -> RayState {
        RayState::new(Vec2::new(x, y), dir, scene.basis())
    }

    fn close(a: Vec2, b: Vec2) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn flat_next_event_on_square_lattice() {
        let scene = square_scene(Model::Flat);
        let e = next_flat_event(&state(&scene, 0.1, 0.05, Direction::Up), &scene).unwrap();
        assert_eq!(e.kind, EventKind::SlitHit);
        assert_eq!(e.lattice_point, TileIndex::new(0, 1));
        assert!(close(e.position, Vec2::new(0.1, 1.0)));
        assert!((e.time - 0.95).abs() < 1e-12);
    }

    #[test]
    fn flat_ray_between_columns_never_hits() {
        let scene = square_scene(Model::Flat);
        let err = next_flat_event(&state(&scene, 0.5, 0.05, Direction::Up), &scene).unwrap_err();
        assert!(matches!(err, RaytraceError::NoHitWithinCap { .. }));
    }

    #[test]
    fn ray_at_slit_endpoint_is_singular() {
        let scene = square_scene(Model::Flat);
        let e = next_flat_event(&state(&scene, 0.25, 0.05, Direction::Up), &scene).unwrap();
        assert_eq!(e.kind, EventKind::SingularEndpoint);
        let t = trace(&scene, Vec2::new(0.25, 0.05), Direction::Up, TraceOptions::new(3.0, 1.0)).unwrap();
        assert!(t.singular);
        assert_eq!(t.singular_count, 3);
        assert!(close(t.end.pos, Vec2::new(0.25, 3.05)));
    }

    #[test]
    fn flat_reflection_rules() {
        let scene = square_scene(Model::Flat);
        let s = state(&scene, 0.1, 0.05, Direction::Up);
        let e = next_flat_event(&s, &scene).unwrap();
        let r = reflect_flat(&s, &e, scene.basis()).unwrap();
        assert!(close(r.pos, Vec2::new(-0.1, 1.0)));
        assert_eq!(r.dir, Direction::Down);
        assert_eq!(r.sheet, Sheet::Minus);
        // twice through the same slit restores the offset
        let back = reflect_flat(&r, &Event { position: r.pos, ..e }, scene.basis()).unwrap();
        assert!(close(back.pos, Vec2::new(0.1, 1.0)));
        assert_eq!(back.sheet, Sheet::Plus);
        // center hit is a fixed point
        let s0 = state(&scene, 0.0, 0.05, Direction::Up);
        let e0 = next_flat_event(&s0, &scene).unwrap();
        let r0 = reflect_flat(&s0, &e0, scene.basis()).unwrap();
        assert!(close(r0.pos, e0.position));
        assert_eq!(r0.dir, Direction::Down);
    }

    #[test]
    fn eaton_chord_geometry() {
        let scene = square_scene(Model::Eaton);
        let s = state(&scene, 0.1, 0.05, Direction::Up);
        let e = next_eaton_event(&s, &scene).unwrap();
        let y = 1.0 - 0.0525f64.sqrt();
        assert_eq!(e.kind, EventKind::LensEntry);
        assert!(close(e.position, Vec2::new(0.1, y)));
        let (r, exit) = reflect_eaton(&s, &e, scene.basis()).unwrap();
        let exit = exit.unwrap();
        assert!(close(exit.position, Vec2::new(-0.1, y)));
        assert_eq!(r.dir, Direction::Down);
        let s0 = state(&scene, 0.0, 0.05, Direction::Up);
        let e0 = next_eaton_event(&s0, &scene).unwrap();
        assert_eq!(e0.kind, EventKind::CenterTurnback);
        assert!(close(e0.position, Vec2::new(0.0, 0.75)));
        let (r0, none) = reflect_eaton(&s0, &e0, scene.basis()).unwrap();
        assert!(none.is_none());
        assert!(close(r0.pos, e0.position));
    }

    #[test]
    fn wrong_model_or_event_is_rejected() {
        let flat = square_scene(Model::Flat);
        let s = state(&flat, 0.1, 0.05, Direction::Up);
        assert!(next_eaton_event(&s, &flat).is_err());
        let e = next_flat_event(&s, &flat).unwrap();
        assert!(reflect_eaton(&s, &e, flat.basis()).is_err());
    }

    #[test]
    fn square_bounce_cycle() {
        let scene = square_scene(Model::Flat);
        let t = trace(&scene, Vec2::new(0.1, 0.05), Direction::Up, TraceOptions::new(10.0, 0.5)).unwrap();
        assert!(!t.singular);
        assert!(t.events.len() >= 9);
        for (k, e) in t.events.iter().enumerate() {
            assert_eq!(e.kind, EventKind::SlitHit);
            let (y, x) = if k % 2 == 0 { (1.0, 0.1) } else { (0.0, -0.1) };
            assert!(close(e.position, Vec2::new(x, y)), "{k}: {:?}", e.position);
        }
        assert!(t.samples.iter().all(|s| s.tile == TileIndex::ORIGIN || s.tile == TileIndex::new(0, 1)));
        assert_eq!(t.end.tile.m1, 0);
    }

    #[test]
    fn zero_time_trace_is_just_the_start() {
        let scene = square_scene(Model::Flat);
        let t = trace(&scene, Vec2::new(0.1, 0.05), Direction::Up, TraceOptions::new(0.0, 1.0)).unwrap();
        assert!(t.events.is_empty());
        assert_eq!(t.samples.len(), 1);
        assert_eq!(t.end.pos, Vec2::new(0.1, 0.05));
    }

    #[test]
    fn start_inside_a_lens_is_rejected() {
        let scene = square_scene(Model::Eaton);
        let err = trace(&scene, Vec2::new(0.05, -0.05), Direction::Up, TraceOptions::new(1.0, 1.0)).unwrap_err();
        assert!(matches!(err, RaytraceError::StartInsideLens(_)));
        // on the outgoing half of the chord the lens is already behind the ray
        let t = trace(&scene, Vec2::new(0.05, 0.05), Direction::Up, TraceOptions::new(1.0, 1.0)).unwrap();
        assert_eq!(t.events[0].lattice_point, TileIndex::new(0, 1));
    }

    #[test]
    fn scene_validation() {
        assert!(Scene::new(SceneConfig::new(Lattice2::square(), 0.6, Model::Flat)).is_err());
        assert!(Scene::new(SceneConfig::new(Lattice2::square(), 0.45, Model::Flat)).is_ok());
        assert!(Scene::new(SceneConfig::new(Lattice2::square(), 0.55, Model::Eaton)).is_err());
        assert!(matches!(
            Scene::new(SceneConfig::new(Lattice2::square(), -1.0, Model::Flat)),
            Err(RaytraceError::NonPositiveRadius(_))
        ));
    }

    #[test]
    fn refractive_index_profile() {
        assert_eq!(refractive_index(0.3, 0.3).unwrap(), 1.0);
        assert_eq!(refractive_index(0.5, 0.3).unwrap(), 1.0);
        assert!((refractive_index(0.15, 0.3).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert!(refractive_index(0.3e-6, 0.3).unwrap() > 1000.0);
        assert!(matches!(refractive_index(0.0, 0.3), Err(RaytraceError::NonPositiveRadius(_))));
    }

    #[test]
    fn trace_is_deterministic() {
        let scene = Scene::new(SceneConfig::new(Lattice2::example54(), 1.0 / 3.0, Model::Flat)).unwrap();
        let opts = TraceOptions::new(2000.0, 10.0);
        let a = trace(&scene, Vec2::new(0.123, 0.2), Direction::Up, opts).unwrap();
        let b = trace(&scene, Vec2::new(0.123, 0.2), Direction::Up, opts).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn exports() {
        let scene = square_scene(Model::Flat);
        let t = trace(&scene, Vec2::new(0.1, 0.05), Direction::Up, TraceOptions::new(2.0, 1.0)).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "time,x,y,tile1,tile2,sheet");
        assert_eq!(lines[1], "0,0.1,0.05,0,0,+");
        assert_eq!(lines.len(), 4);
        let back: Trajectory = serde_json::from_str(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);
    }
}
