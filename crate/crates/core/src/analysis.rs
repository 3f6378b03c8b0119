//! Empirical checks on traced orbits: the bounded homology functional, band
//! width, deviation growth and the flat/round orbit comparison.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{self, Lattice2, LatticeError, PositiveBasis, TileIndex, Vec2};
use crate::raytrace::{
    self, Direction, EventKind, RaytraceError, Sample, Scene, SceneConfig, TraceOptions, Trajectory,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("functional coefficients are both zero")]
    ZeroCoefficients,
    #[error("degenerate band direction {0}")]
    DegenerateDirection(Vec2),
    #[error("insufficient data for a deviation fit: {0}")]
    InsufficientData(String),
    #[error("event {index} differs between models: flat hits {flat:?}, round hits {round:?}")]
    EventMismatch { index: usize, flat: TileIndex, round: TileIndex },
    #[error("scenes differ in {0}")]
    SceneMismatch(&'static str),
    #[error(transparent)]
    Raytrace(#[from] RaytraceError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

/// Unit functional `(a, b)` vanishing on the tile displacement `m` with
/// `m_1 gamma_+ + m_2 gamma_- = d`.
pub fn functional_for_direction(basis: &PositiveBasis, direction: Vec2) -> Result<[f64; 2]> {
    let (alpha, beta) = basis.coefficients(direction);
    let n = alpha.hypot(beta);
    if !(n > 0.0 && n.is_finite()) {
        return Err(AnalysisError::DegenerateDirection(direction));
    }
    Ok([beta / n, -alpha / n])
}

/// Plane direction along which the functional `(a, b)` vanishes.
pub fn direction_for_functional(basis: &PositiveBasis, coeffs: [f64; 2]) -> Result<Vec2> {
    let [a, b] = coeffs;
    if a == 0.0 && b == 0.0 {
        return Err(AnalysisError::ZeroCoefficients);
    }
    let d = basis.gamma_plus * (-b) + basis.gamma_minus * a;
    d.line_direction().ok_or(AnalysisError::DegenerateDirection(d))
}

fn displacement(s: &Sample, start: TileIndex) -> (f64, f64) {
    let d = s.tile - start;
    (d.m1 as f64, d.m2 as f64)
}

fn functional_over(samples: &[Sample], start: TileIndex, coeffs: [f64; 2]) -> Result<Vec<(f64, f64)>> {
    let [a, b] = coeffs;
    if a == 0.0 && b == 0.0 {
        return Err(AnalysisError::ZeroCoefficients);
    }
    Ok(samples
        .iter()
        .map(|s| {
            let (m1, m2) = displacement(s, start);
            (s.time, a * m1 + b * m2)
        })
        .collect())
}

/// `a dm_1 + b dm_2` at every sample, with `dm` the tile displacement from
/// the starting tile.
pub fn bounded_functional_series(t: &Trajectory, coeffs: [f64; 2]) -> Result<Vec<(f64, f64)>> {
    functional_over(&t.samples, t.start.tile, coeffs)
}

/// Largest `|a dm_1 + b dm_2|` over samples with `time <= t_end`.
pub fn functional_sup(t: &Trajectory, coeffs: [f64; 2], t_end: f64) -> Result<f64> {
    Ok(functional_over(t.samples_until(t_end), t.start.tile, coeffs)?
        .into_iter()
        .fold(0.0, |m, (_, v)| m.max(v.abs())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandReport {
    pub direction_used: Vec2,
    pub functional: [f64; 2],
    pub max_functional_dev: f64,
    pub transverse_width: f64,
    pub along_displacement_series: Vec<(f64, f64)>,
    pub singular_flags: usize,
}

/// Band statistics of the whole trajectory in the given direction.
pub fn band_report(t: &Trajectory, direction: Vec2) -> Result<BandReport> {
    band_report_until(t, direction, f64::INFINITY)
}

/// As [`band_report`], restricted to samples with `time <= t_end`.
pub fn band_report_until(t: &Trajectory, direction: Vec2, t_end: f64) -> Result<BandReport> {
    let dir = direction.normalized().ok_or(AnalysisError::DegenerateDirection(direction))?;
    let functional = functional_for_direction(&t.basis, dir)?;
    let samples = t.samples_until(t_end);
    let dev = functional_over(samples, t.start.tile, functional)?;
    let max_functional_dev = dev.iter().fold(0.0f64, |m, &(_, v)| m.max(v.abs()));
    let mut transverse_width = 0.0f64;
    let along_displacement_series = samples
        .iter()
        .map(|s| {
            let d = s.pos - t.start.pos;
            transverse_width = transverse_width.max(dir.wedge(d).abs());
            (s.time, dir.dot(d))
        })
        .collect();
    Ok(BandReport {
        direction_used: dir,
        functional,
        max_functional_dev,
        transverse_width,
        along_displacement_series,
        singular_flags: t.singular_count,
    })
}

/// Largest distance of the orbit from the line through its start, up to `t_end`.
pub fn transverse_width(t: &Trajectory, direction: Vec2, t_end: f64) -> Result<f64> {
    let dir = direction.normalized().ok_or(AnalysisError::DegenerateDirection(direction))?;
    Ok(t.samples_until(t_end)
        .iter()
        .fold(0.0f64, |m, s| m.max(dir.wedge(s.pos - t.start.pos).abs())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviationFit {
    pub times: Vec<f64>,
    pub displacements: Vec<f64>,
    pub slope: f64,
    pub r_squared: f64,
}

/// Grid points per decade of the deviation fit.
pub const DEVIATION_GRID_PER_DECADE: usize = 10;

/// Log-log least-squares slope of `|dm(t)|` on a geometric time grid.
pub fn deviation_exponent(t: &Trajectory) -> Result<DeviationFit> {
    deviation_fit(&t.samples, t.start.tile)
}

/// Fit over raw samples; times must be increasing and span three decades
/// above the first positive sample time. Only the last four decades enter
/// the fit, so short-time lattice effects do not bias the slope.
pub fn deviation_fit(samples: &[Sample], start: TileIndex) -> Result<DeviationFit> {
    let t_lo = samples
        .iter()
        .map(|s| s.time)
        .find(|&t| t > 0.0)
        .map(|t| t.max(1.0))
        .ok_or_else(|| AnalysisError::InsufficientData("no sample after time zero".into()))?;
    let t_hi = samples.last().map_or(0.0, |s| s.time);
    let t_lo = t_lo.max(t_hi * 1e-4);
    if t_hi < t_lo * (1e3 - 1e-9) {
        return Err(AnalysisError::InsufficientData(format!("samples span [{t_lo}, {t_hi}], need three decades")));
    }
    let ratio = 10f64.powf(1.0 / DEVIATION_GRID_PER_DECADE as f64);
    let mut times = Vec::new();
    let mut displacements = Vec::new();
    let mut g = t_lo;
    while g <= t_hi * (1.0 + 1e-12) {
        let k = samples.partition_point(|s| s.time <= g);
        if k > 0 {
            let (m1, m2) = displacement(&samples[k - 1], start);
            let norm = m1.hypot(m2);
            if norm > 0.0 {
                times.push(g);
                displacements.push(norm);
            }
        }
        g *= ratio;
    }
    if times.len() < 3 {
        return Err(AnalysisError::InsufficientData(format!(
            "only {} grid times with nonzero displacement",
            times.len()
        )));
    }
    let xs: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = displacements.iter().map(|d| d.ln()).collect();
    let (slope, r_squared) = least_squares(&xs, &ys);
    Ok(DeviationFit { times, displacements, slope, r_squared })
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, r2)
}

fn segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sq();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let s = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * s)).norm()
}

/// Flat interaction: incoming leg end and outgoing leg start.
struct FlatHit {
    point: TileIndex,
    hit: Vec2,
    out: Vec2,
}

/// Sup distance between matched interactions of the flat and round orbits.
///
/// Interactions are matched by index. At each one the round entry point is
/// measured against the flat incoming leg, the round exit point against the
/// flat outgoing leg, and the round exit against the flat incoming leg at the
/// same height (the `2|dx|` chord jump).
pub fn compare_models(cfg_flat: &SceneConfig, cfg_eaton: &SceneConfig, start: Vec2, t_max: f64) -> Result<f64> {
    if cfg_flat.lattice != cfg_eaton.lattice {
        return Err(AnalysisError::SceneMismatch("lattice"));
    }
    if cfg_flat.radius != cfg_eaton.radius {
        return Err(AnalysisError::SceneMismatch("radius"));
    }
    let flat = Scene::new(SceneConfig { model: raytrace::Model::Flat, ..*cfg_flat })?;
    let round = Scene::new(SceneConfig { model: raytrace::Model::Eaton, ..*cfg_eaton })?;
    compare_scenes(&flat, &round, start, t_max)
}

pub fn compare_scenes(flat: &Scene, round: &Scene, start: Vec2, t_max: f64) -> Result<f64> {
    let dt = t_max.max(1.0);
    let tf = raytrace::trace(flat, start, Direction::Up, TraceOptions::new(t_max, dt))?;
    let tr = raytrace::trace(round, start, Direction::Up, TraceOptions::new(t_max, dt))?;

    let basis = flat.basis();
    let flat_hits: Vec<FlatHit> = tf
        .events
        .iter()
        .filter(|e| e.kind == EventKind::SlitHit)
        .map(|e| {
            let c = basis.point(e.lattice_point);
            FlatHit { point: e.lattice_point, hit: e.position, out: Vec2::new(2.0 * c.x - e.position.x, c.y) }
        })
        .collect();
    // (lattice point, entry, exit)
    let mut round_hits = Vec::new();
    let mut it = tr.events.iter().peekable();
    while let Some(e) = it.next() {
        match e.kind {
            EventKind::LensEntry => {
                let exit = it.next_if(|x| x.kind == EventKind::LensExit).map_or(e.position, |x| x.position);
                round_hits.push((e.lattice_point, e.position, exit));
            }
            EventKind::CenterTurnback => round_hits.push((e.lattice_point, e.position, e.position)),
            _ => {}
        }
    }

    let n = flat_hits.len().min(round_hits.len());
    let mut sup = 0.0f64;
    for k in 0..n {
        let f = &flat_hits[k];
        let (point, entry, exit) = round_hits[k];
        if f.point != point {
            return Err(AnalysisError::EventMismatch { index: k, flat: f.point, round: point });
        }
        let leg_start = if k == 0 { start } else { flat_hits[k - 1].out };
        let leg_end = flat_hits.get(k + 1).map_or(tf.end.pos, |h| h.hit);
        let d_entry = segment_distance(entry, leg_start, f.hit);
        let d_exit = segment_distance(exit, f.out, leg_end);
        let d_jump = (exit - Vec2::new(f.hit.x, exit.y)).norm();
        sup = sup.max(d_entry).max(d_exit).max(d_jump);
    }
    Ok(sup)
}

/// Random unimodular lattice `rot(phi) [[a, b], [0, 1/a]]` with
/// `log a` uniform on `[-ln 2, ln 2]`; rejected until it is `r`-admissible.
pub fn random_admissible_lattice<G: Rng + ?Sized>(rng: &mut G, r: f64) -> Result<Lattice2> {
    for _ in 0..10_000 {
        let a = rng.gen_range(-std::f64::consts::LN_2..std::f64::consts::LN_2).exp();
        let b = rng.gen_range(0.0..a);
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        let l = Lattice2::new(Vec2::new(a, 0.0).rotated(phi), Vec2::new(b, 1.0 / a).rotated(phi))?;
        if lattice::is_admissible(&l, r)? && lattice::slits_disjoint(&l, r)? {
            return Ok(l);
        }
    }
    Err(LatticeError::InvalidRadius(r).into())
}

/// Uniform point of the centered fundamental parallelogram.
pub fn random_point_in_tile<G: Rng + ?Sized>(rng: &mut G, basis: &PositiveBasis) -> Vec2 {
    let s: f64 = rng.gen_range(-0.5..0.5);
    let t: f64 = rng.gen_range(-0.5..0.5);
    basis.gamma_plus * s + basis.gamma_minus * t
}

/// Uniform point of the fundamental parallelogram outside every open disk.
pub fn random_point_outside_lenses<G: Rng + ?Sized>(rng: &mut G, basis: &PositiveBasis, r: f64) -> Vec2 {
    loop {
        let p = random_point_in_tile(rng, basis);
        let (m, _) = lattice::tile_index(p, basis);
        let local = p - basis.point(m);
        // Disks of neighbouring tiles can reach into this one.
        let clear = (-1..=1).all(|i| {
            (-1..=1).all(|j| (local - basis.point(TileIndex::new(i, j))).norm() >= r * (1.0 + 1e-9))
        });
        if clear {
            return p;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raytrace::{Model, Sheet};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bounce() -> Trajectory {
        let scene = Scene::new(SceneConfig::new(Lattice2::square(), 0.25, Model::Flat)).unwrap();
        raytrace::trace(&scene, Vec2::new(0.1, 0.05), Direction::Up, TraceOptions::new(50.0, 0.25)).unwrap()
    }

    #[test]
    fn functional_vanishes_while_the_tile_is_fixed() {
        let scene = Scene::new(SceneConfig::new(Lattice2::square(), 0.25, Model::Flat)).unwrap();
        let t = raytrace::trace(&scene, Vec2::new(0.1, 0.05), Direction::Up, TraceOptions::new(0.4, 0.01)).unwrap();
        assert!(t.samples.iter().all(|s| s.tile == TileIndex::ORIGIN));
        assert!(bounded_functional_series(&t, [0.3, -2.0]).unwrap().iter().all(|&(_, v)| v == 0.0));
    }

    #[test]
    fn bounce_orbit_functional_takes_two_values() {
        // the cycle crosses the tile boundary at y = 1/2 and comes back
        let t = bounce();
        for coeffs in [[1.0, 0.0], [0.3, -2.0]] {
            let series = bounded_functional_series(&t, coeffs).unwrap();
            assert!(series.iter().all(|&(_, v)| v == 0.0 || v == coeffs[1]));
            assert_eq!(series.last().unwrap().1, 0.0);
        }
        assert_eq!(bounded_functional_series(&t, [0.0, 0.0]), Err(AnalysisError::ZeroCoefficients));
    }

    #[test]
    fn bounce_orbit_band_report() {
        let t = bounce();
        for angle in [0.0, 0.7, 1.5] {
            let rep = band_report(&t, Vec2::new(1.0, 0.0).rotated(angle)).unwrap();
            assert!(rep.transverse_width <= 1.0);
            assert!(rep.max_functional_dev <= 1.0);
            assert!(rep.along_displacement_series.windows(2).all(|w| w[0].0 < w[1].0));
        }
        assert!(band_report(&t, Vec2::ZERO).is_err());
    }

    #[test]
    fn bounce_orbit_has_no_deviation() {
        assert!(matches!(deviation_exponent(&bounce()), Err(AnalysisError::InsufficientData(_))));
    }

    #[test]
    fn linear_drift_has_unit_exponent() {
        let samples: Vec<Sample> = (1..=100_000)
            .map(|k| {
                let t = k as f64 * 0.5;
                Sample { time: t, pos: Vec2::ZERO, tile: TileIndex::new(t.floor() as i64, 0), sheet: Sheet::Plus }
            })
            .collect();
        let fit = deviation_fit(&samples, TileIndex::ORIGIN).unwrap();
        assert!((fit.slope - 1.0).abs() < 0.02, "{}", fit.slope);
        assert!(fit.r_squared > 0.99);
        assert!(deviation_fit(&samples[..1000], TileIndex::ORIGIN).is_err());
    }

    #[test]
    fn functional_and_direction_are_dual() {
        let b = lattice::positive_basis(&Lattice2::example54(), 1.0 / 3.0).unwrap();
        let d = Vec2::new(-0.3, 1.0).normalized().unwrap();
        let f = functional_for_direction(&b, d).unwrap();
        assert!((f[0].hypot(f[1]) - 1.0).abs() < 1e-12);
        let back = direction_for_functional(&b, f).unwrap();
        assert!(back.wedge(d).abs() < 1e-12);
        // vanishes on the tile displacement of d
        let (a1, a2) = b.coefficients(d);
        assert!((f[0] * a1 + f[1] * a2).abs() < 1e-12);
    }

    #[test]
    fn square_comparison_matches_hand_value() {
        let flat = SceneConfig::new(Lattice2::square(), 0.25, Model::Flat);
        let round = flat.with_model(Model::Eaton);
        let d = compare_models(&flat, &round, Vec2::new(0.1, 0.05), 20.0).unwrap();
        assert!((d - 0.2).abs() < 1e-12, "{d}");
        let axis = compare_models(&flat, &round, Vec2::new(0.0, 0.5), 20.0).unwrap();
        assert!(axis < 1e-12, "{axis}");
    }

    #[test]
    fn comparison_rejects_different_scenes() {
        let flat = SceneConfig::new(Lattice2::square(), 0.25, Model::Flat);
        let round = SceneConfig::new(Lattice2::square(), 0.2, Model::Eaton);
        assert_eq!(
            compare_models(&flat, &round, Vec2::new(0.1, 0.05), 5.0),
            Err(AnalysisError::SceneMismatch("radius"))
        );
    }

    #[test]
    fn random_lattices_are_admissible() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let l = random_admissible_lattice(&mut rng, 0.3).unwrap();
            assert!((l.det() - 1.0).abs() < 1e-9);
            assert!(lattice::is_admissible(&l, 0.3).unwrap());
            let b = lattice::positive_basis(&l, 0.3).unwrap();
            let p = random_point_outside_lenses(&mut rng, &b, 0.3);
            assert_eq!(lattice::tile_index(p, &b).0, TileIndex::ORIGIN);
        }
    }
}
