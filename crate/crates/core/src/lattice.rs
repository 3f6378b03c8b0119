//! Planar lattice algebra: Lagrange reduction, admissibility tests, the
//! positive-basis Euclidean algorithm and the centered-parallelogram tiling.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `|det| = 1` for unimodular bases.
pub const TAU_DET: f64 = 1e-9;

/// Default cap on the number of points `enumerate_in_box` will produce.
pub const DEFAULT_BOX_CAP: f64 = 1e7;

const MAX_EUCLID_STEPS: usize = 100_000;

/// Positional tolerance scaled by the magnitude of the coordinate involved.
#[inline]
pub fn tau_pos(coordinate: f64) -> f64 {
    1e-9 * (1.0 + coordinate.abs())
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("non-finite coordinate in input")]
    NonFinite,
    #[error("degenerate basis: |det| = {0:e}")]
    DegenerateBasis(f64),
    #[error("basis is not unimodular: det = {0}")]
    NotUnimodular(f64),
    #[error("radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("slits of length 2R = {0} are not pairwise disjoint")]
    NotDisjoint(f64),
    #[error("positive-basis search did not converge after {0} steps")]
    NoConvergence(usize),
    #[error("box [{xmin}, {xmax}] x [{ymin}, {ymax}] is empty or inverted")]
    InvalidBox { xmin: f64, xmax: f64, ymin: f64, ymax: f64 },
    #[error("box would contain about {estimate:.0} points, cap is {cap:.0}")]
    BoxTooLarge { estimate: f64, cap: f64 },
    #[error("({0}, {1}) is not a positive basis")]
    NotPositive(Vec2, Vec2),
}

pub type Result<T> = std::result::Result<T, LatticeError>;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn try_new(x: f64, y: f64) -> Result<Self> {
        if x.is_finite() && y.is_finite() {
            Ok(Vec2 { x, y })
        } else {
            Err(LatticeError::NonFinite)
        }
    }

    #[inline]
    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// The wedge product `self.x * other.y - self.y * other.x`.
    #[inline]
    pub fn wedge(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Unit vector along `self`, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    /// Unit vector spanning the same line, with `y > 0`, or `x > 0` when `y == 0`.
    pub fn line_direction(self) -> Option<Vec2> {
        let u = self.normalized()?;
        if u.y < 0.0 || (u.y == 0.0 && u.x < 0.0) {
            Some(-u)
        } else {
            Some(u)
        }
    }

    /// Counter-clockwise rotation by `angle` radians.
    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl TryFrom<[f64; 2]> for Vec2 {
    type Error = LatticeError;
    fn try_from(v: [f64; 2]) -> Result<Self> {
        Vec2::try_new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

/// A unimodular planar lattice given by an ordered basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice2 {
    b1: Vec2,
    b2: Vec2,
}

impl Lattice2 {
    pub fn new(b1: Vec2, b2: Vec2) -> Result<Self> {
        if !b1.is_finite() || !b2.is_finite() {
            return Err(LatticeError::NonFinite);
        }
        let det = b1.wedge(b2);
        if det.abs() < TAU_DET {
            return Err(LatticeError::DegenerateBasis(det.abs()));
        }
        if (det.abs() - 1.0).abs() > TAU_DET {
            return Err(LatticeError::NotUnimodular(det));
        }
        Ok(Lattice2 { b1, b2 })
    }

    /// `Z^2`.
    pub fn square() -> Self {
        Lattice2 { b1: Vec2::new(1.0, 0.0), b2: Vec2::new(0.0, 1.0) }
    }

    /// The unimodular hexagonal lattice, one basis vector horizontal.
    pub fn hexagonal() -> Self {
        let side = (2.0 / 3f64.sqrt()).sqrt();
        Lattice2 {
            b1: Vec2::new(side, 0.0),
            b2: Vec2::new(0.5 * side, 0.5 * 3f64.sqrt() * side),
        }
    }

    /// `(1,0)Z + ((3+sqrt 21)/6, 1)Z`, the lattice whose vertical rays are
    /// confined to bands of slope `-(sqrt 21 + 3 sqrt 5)/4` at `R = 1/3`.
    pub fn example54() -> Self {
        Lattice2 {
            b1: Vec2::new(1.0, 0.0),
            b2: Vec2::new((3.0 + 21f64.sqrt()) / 6.0, 1.0),
        }
    }

    #[inline]
    pub fn b1(&self) -> Vec2 {
        self.b1
    }

    #[inline]
    pub fn b2(&self) -> Vec2 {
        self.b2
    }

    pub fn det(&self) -> f64 {
        self.b1.wedge(self.b2)
    }

    #[inline]
    pub fn point(&self, m: i64, n: i64) -> Vec2 {
        self.b1 * m as f64 + self.b2 * n as f64
    }

    /// Real coordinates of `x` in this basis.
    pub fn coordinates(&self, x: Vec2) -> (f64, f64) {
        let det = self.det();
        (x.wedge(self.b2) / det, self.b1.wedge(x) / det)
    }

    /// Integer coordinates of `x` if it is a lattice point within `tol`.
    pub fn integer_coordinates(&self, x: Vec2, tol: f64) -> Option<(i64, i64)> {
        let (c1, c2) = self.coordinates(x);
        let (m, n) = (c1.round(), c2.round());
        ((c1 - m).abs() <= tol && (c2 - n).abs() <= tol).then_some((m as i64, n as i64))
    }

    /// True when both lattices contain the same points.
    pub fn same_lattice(&self, other: &Lattice2, tol: f64) -> bool {
        self.integer_coordinates(other.b1, tol).is_some()
            && self.integer_coordinates(other.b2, tol).is_some()
            && other.integer_coordinates(self.b1, tol).is_some()
            && other.integer_coordinates(self.b2, tol).is_some()
    }
}

impl<'de> Deserialize<'de> for Lattice2 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            basis: [Vec2; 2],
        }
        let raw = Raw::deserialize(d)?;
        Lattice2::new(raw.basis[0], raw.basis[1]).map_err(serde::de::Error::custom)
    }
}

/// JSON form `{"basis": [[b1x,b1y],[b2x,b2y]]}`.
impl Serialize for Lattice2 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Raw {
            basis: [Vec2; 2],
        }
        Raw { basis: [self.b1, self.b2] }.serialize(s)
    }
}

/// Lagrange-reduced basis together with the integer matrix expressing it
/// in the input basis: `reduced.b1 = u[0][0] b1 + u[0][1] b2`, likewise row 1.
fn gauss_reduce_tracked(l: &Lattice2) -> (Lattice2, [[i64; 2]; 2]) {
    let (mut a, mut b) = (l.b1, l.b2);
    let mut ua = [1i64, 0];
    let mut ub = [0i64, 1];
    if a.norm_sq() > b.norm_sq() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut ua, &mut ub);
    }
    loop {
        let mu = (a.dot(b) / a.norm_sq()).round();
        if mu != 0.0 {
            b -= a * mu;
            let k = mu as i64;
            ub = [ub[0] - k * ua[0], ub[1] - k * ua[1]];
        }
        if b.norm_sq() < a.norm_sq() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut ua, &mut ub);
        } else {
            break;
        }
    }
    (Lattice2 { b1: a, b2: b }, [ua, ub])
}

/// Lagrange-Gauss reduction: `|b1| <= |b2| <= |b1 +- b2|`, `b1` a shortest vector.
pub fn gauss_reduce(l: &Lattice2) -> Result<Lattice2> {
    let det = l.det().abs();
    if det < TAU_DET {
        return Err(LatticeError::DegenerateBasis(det));
    }
    Ok(gauss_reduce_tracked(l).0)
}

pub fn shortest_vector(l: &Lattice2) -> Vec2 {
    gauss_reduce_tracked(l).0.b1
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(LatticeError::InvalidRadius(r))
    }
}

/// Disks of radius `r` at the lattice points are pairwise disjoint.
pub fn is_admissible(l: &Lattice2, r: f64) -> Result<bool> {
    check_radius(r)?;
    let d = 2.0 * r;
    Ok(shortest_vector(l).norm() > d + tau_pos(d))
}

/// Shortest nonzero horizontal lattice vector of length below `max_len`,
/// returned with positive `x`.
pub fn shortest_horizontal_vector(l: &Lattice2, max_len: f64) -> Option<Vec2> {
    let tol = TAU_DET;
    let e = PointEnumerator::new(l);
    let mut best: Option<Vec2> = None;
    e.for_each_in_box(tol, max_len, -tol, tol, |_, p| {
        if p.x > tol && best.is_none_or(|b| p.x < b.x) {
            best = Some(p);
        }
    });
    best
}

/// Open horizontal slits of length `2r` centered at the lattice points are
/// pairwise disjoint.
pub fn slits_disjoint(l: &Lattice2, r: f64) -> Result<bool> {
    check_radius(r)?;
    let d = 2.0 * r;
    Ok(match shortest_horizontal_vector(l, d) {
        Some(v) => v.x >= d - tau_pos(d),
        None => true,
    })
}

/// A basis with `gamma_plus` in `{x > 0, y >= 0}` and `gamma_minus` in
/// `{x <= 0, y > 0}`, hence `det(gamma_plus, gamma_minus) = +1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositiveBasis {
    pub gamma_plus: Vec2,
    pub gamma_minus: Vec2,
}

#[inline]
fn in_upper_right(v: Vec2) -> bool {
    v.x > 0.0 && v.y >= 0.0
}

#[inline]
fn in_upper_left(v: Vec2) -> bool {
    v.x <= 0.0 && v.y > 0.0
}

impl PositiveBasis {
    pub fn new(gamma_plus: Vec2, gamma_minus: Vec2) -> Result<Self> {
        if !gamma_plus.is_finite() || !gamma_minus.is_finite() {
            return Err(LatticeError::NonFinite);
        }
        if !in_upper_right(gamma_plus) || !in_upper_left(gamma_minus) {
            return Err(LatticeError::NotPositive(gamma_plus, gamma_minus));
        }
        let det = gamma_plus.wedge(gamma_minus);
        if (det - 1.0).abs() > TAU_DET {
            return Err(LatticeError::NotUnimodular(det));
        }
        Ok(PositiveBasis { gamma_plus, gamma_minus })
    }

    pub fn lattice(&self) -> Lattice2 {
        Lattice2 { b1: self.gamma_plus, b2: self.gamma_minus }
    }

    #[inline]
    pub fn point(&self, m: TileIndex) -> Vec2 {
        self.gamma_plus * m.m1 as f64 + self.gamma_minus * m.m2 as f64
    }

    /// Coefficients `(c1, c2)` with `x = c1 gamma_plus + c2 gamma_minus`.
    #[inline]
    pub fn coefficients(&self, x: Vec2) -> (f64, f64) {
        // det = 1
        (x.wedge(self.gamma_minus), self.gamma_plus.wedge(x))
    }

    /// Largest second coordinate; the slit `[-R,R] x {0}` lies inside the
    /// centered parallelogram iff `R < 1 / (2 * max_height)`.
    pub fn max_height(&self) -> f64 {
        self.gamma_plus.y.max(self.gamma_minus.y)
    }
}

/// Integer coordinates of a tile of the centered-parallelogram tiling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct TileIndex {
    pub m1: i64,
    pub m2: i64,
}

impl TileIndex {
    pub const ORIGIN: TileIndex = TileIndex { m1: 0, m2: 0 };

    pub const fn new(m1: i64, m2: i64) -> Self {
        TileIndex { m1, m2 }
    }
}

impl Add for TileIndex {
    type Output = TileIndex;
    fn add(self, o: TileIndex) -> TileIndex {
        TileIndex::new(self.m1 + o.m1, self.m2 + o.m2)
    }
}

impl Sub for TileIndex {
    type Output = TileIndex;
    fn sub(self, o: TileIndex) -> TileIndex {
        TileIndex::new(self.m1 - o.m1, self.m2 - o.m2)
    }
}

fn split_half_open(c: f64) -> (i64, f64) {
    let m = (c + 0.5).floor();
    let mut y = c - m;
    let mut m = m as i64;
    if y >= 0.5 - tau_pos(c) {
        m += 1;
        y -= 1.0;
    }
    (m, y)
}

/// Decomposes `x = (m1 + y1) gamma_plus + (m2 + y2) gamma_minus` with
/// `y1, y2` in `[-1/2, 1/2)`.
pub fn tile_index(x: Vec2, b: &PositiveBasis) -> (TileIndex, Vec2) {
    let (c1, c2) = b.coefficients(x);
    let (m1, y1) = split_half_open(c1);
    let (m2, y2) = split_half_open(c2);
    (TileIndex::new(m1, m2), Vec2::new(y1, y2))
}

/// Result of the Euclidean iteration, with every intermediate basis.
#[derive(Debug, Clone)]
pub struct EuclidRun {
    pub basis: PositiveBasis,
    pub steps: Vec<(Vec2, Vec2)>,
}

fn initial_positive_pair(l: &Lattice2) -> Option<(Vec2, Vec2)> {
    let reduced = gauss_reduce_tracked(l).0;
    let (r1, r2) = (reduced.b1, reduced.b2);
    let variants = [
        (r1, r2),
        (r1, -r2),
        (-r1, r2),
        (-r1, -r2),
        (r2, r1),
        (r2, -r1),
        (-r2, r1),
        (-r2, -r1),
    ];
    let accept = |a: Vec2, b: Vec2| {
        in_upper_right(a) && in_upper_left(b) && (a.wedge(b) - 1.0).abs() <= TAU_DET
    };
    let mut candidates: Vec<(Vec2, Vec2)> =
        variants.iter().copied().filter(|&(a, b)| accept(a, b)).collect();
    // Fix one reduced vector in its quadrant and shear the partner along it
    // into the other quadrant; this needs unbounded shears on skewed lattices.
    for &(v, w) in &variants {
        if (v.wedge(w) - 1.0).abs() > TAU_DET {
            continue;
        }
        if in_upper_right(v) {
            let k = (w.x / v.x).ceil();
            let b = w - v * k;
            if accept(v, b) {
                candidates.push((v, b));
            }
        }
        if in_upper_left(w) && w.x < 0.0 {
            let k = (v.x / -w.x).ceil() - 1.0;
            let a = v + w * k;
            if accept(a, w) {
                candidates.push((a, w));
            }
        }
    }
    // Small unimodular changes of basis.
    const K: i64 = 3;
    for m1 in -K..=K {
        for n1 in -K..=K {
            for m2 in -K..=K {
                for n2 in -K..=K {
                    if m1 * n2 - n1 * m2 != 1 {
                        continue;
                    }
                    let a = r1 * m1 as f64 + r2 * n1 as f64;
                    let b = r1 * m2 as f64 + r2 * n2 as f64;
                    if accept(a, b) {
                        candidates.push((a, b));
                    }
                }
            }
        }
    }
    // lowest total height, then shortest
    let key = |p: &(Vec2, Vec2)| (p.0.y + p.1.y, p.0.norm() + p.1.norm());
    candidates.into_iter().min_by(|p, q| {
        let (kp, kq) = (key(p), key(q));
        kp.0.total_cmp(&kq.0).then(kp.1.total_cmp(&kq.1))
    })
}

/// Positive basis with `0 <= gamma_plus.y, gamma_minus.y < 1/(2r)`, found by
/// the subtractive Euclidean iteration started from a positive basis derived
/// from the reduced basis. All intermediate bases are recorded.
pub fn positive_basis_run(l: &Lattice2, r: f64) -> Result<EuclidRun> {
    if !slits_disjoint(l, r)? {
        return Err(LatticeError::NotDisjoint(2.0 * r));
    }
    let bound = 1.0 / (2.0 * r);
    let (mut a, mut b) = initial_positive_pair(l).ok_or(LatticeError::NoConvergence(0))?;
    let mut steps = vec![(a, b)];
    let mut iterations = 0usize;
    while !(a.y < bound && b.y < bound) {
        if iterations >= MAX_EUCLID_STEPS {
            return Err(LatticeError::NoConvergence(iterations));
        }
        iterations += 1;
        if a.y >= b.y {
            // a - k b stays in {x > 0, y >= 0} for k <= a.y / b.y.
            let k_max = (a.y / b.y).floor().max(1.0);
            let k_needed = if b.y < bound { ((a.y - bound) / b.y).floor() + 1.0 } else { k_max };
            a -= b * k_needed.clamp(1.0, k_max);
            if a.y < 0.0 {
                a.y = 0.0;
            }
        } else if a.y > 0.0 {
            // b - k a stays in {x <= 0, y > 0} for k < b.y / a.y.
            let k_max = ((b.y / a.y).ceil() - 1.0).max(1.0);
            let k_needed = if a.y < bound { ((b.y - bound) / a.y).floor() + 1.0 } else { k_max };
            b -= a * k_needed.clamp(1.0, k_max);
        } else {
            // horizontal gamma_plus of length exactly 2r: slits touch
            return Err(LatticeError::NoConvergence(iterations));
        }
        steps.push((a, b));
    }
    let basis = PositiveBasis::new(a, b)?;
    Ok(EuclidRun { basis, steps })
}

pub fn positive_basis(l: &Lattice2, r: f64) -> Result<PositiveBasis> {
    positive_basis_run(l, r).map(|run| run.basis)
}

/// Box enumeration over a Lagrange-reduced basis.
///
/// Integer coordinates are reported in the reduced basis; `input_coordinates`
/// maps them back to the basis the enumerator was built from.
#[derive(Debug, Clone)]
pub struct PointEnumerator {
    reduced: Lattice2,
    /// Rows of the inverse of the column matrix `[r1 r2]`.
    inv: [[f64; 2]; 2],
    /// `to_input[k]` = coordinates of reduced vector `k` in the input basis.
    to_input: [[i64; 2]; 2],
}

impl PointEnumerator {
    pub fn new(l: &Lattice2) -> Self {
        let (reduced, u) = gauss_reduce_tracked(l);
        let (r1, r2) = (reduced.b1, reduced.b2);
        let det = r1.wedge(r2);
        let inv = [[r2.y / det, -r2.x / det], [-r1.y / det, r1.x / det]];
        PointEnumerator { reduced, inv, to_input: u }
    }

    pub fn reduced(&self) -> &Lattice2 {
        &self.reduced
    }

    #[inline]
    pub fn input_coordinates(&self, i: i64, j: i64) -> (i64, i64) {
        (
            i * self.to_input[0][0] + j * self.to_input[1][0],
            i * self.to_input[0][1] + j * self.to_input[1][1],
        )
    }

    fn coefficient_range(&self, row: usize, xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> (f64, f64) {
        let [p, q] = self.inv[row];
        let lo = p * if p >= 0.0 { xmin } else { xmax } + q * if q >= 0.0 { ymin } else { ymax };
        let hi = p * if p >= 0.0 { xmax } else { xmin } + q * if q >= 0.0 { ymax } else { ymin };
        (lo, hi)
    }

    /// Upper estimate of the number of points in the box.
    pub fn estimate(&self, xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> f64 {
        let (w, h) = (xmax - xmin, ymax - ymin);
        w * h + 2.0 * (w + h) / self.reduced.b1.norm() + 4.0
    }

    /// Visits every lattice point of the closed box. The outer loop runs over
    /// whichever reduced coordinate has the shorter range across the box.
    pub fn for_each_in_box<F: FnMut((i64, i64), Vec2)>(
        &self,
        xmin: f64,
        xmax: f64,
        ymin: f64,
        ymax: f64,
        mut f: F,
    ) {
        let slack = 1e-9;
        let (lo0, hi0) = self.coefficient_range(0, xmin, xmax, ymin, ymax);
        let (lo1, hi1) = self.coefficient_range(1, xmin, xmax, ymin, ymax);
        let (outer, (olo, ohi), (ilo, ihi)) = if hi0 - lo0 <= hi1 - lo1 {
            (0usize, (lo0, hi0), (lo1, hi1))
        } else {
            (1usize, (lo1, hi1), (lo0, hi0))
        };
        let (ov, iv) = if outer == 0 {
            (self.reduced.b1, self.reduced.b2)
        } else {
            (self.reduced.b2, self.reduced.b1)
        };
        let start = (olo - slack).ceil() as i64;
        let end = (ohi + slack).floor() as i64;
        for o in start..=end {
            let base = ov * o as f64;
            let (mut lo, mut hi) = (ilo, ihi);
            for (b, v, vmin, vmax) in [(base.x, iv.x, xmin, xmax), (base.y, iv.y, ymin, ymax)] {
                if v.abs() > 1e-300 {
                    let (s, t) = ((vmin - b) / v, (vmax - b) / v);
                    lo = lo.max(s.min(t));
                    hi = hi.min(s.max(t));
                }
            }
            if lo > hi + 2.0 * slack {
                continue;
            }
            let jstart = (lo - slack).ceil() as i64;
            let jend = (hi + slack).floor() as i64;
            for i in jstart..=jend {
                let p = base + iv * i as f64;
                if p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax {
                    let coords = if outer == 0 { (o, i) } else { (i, o) };
                    f(coords, p);
                }
            }
        }
    }
}

/// All lattice points in the closed box `[xmin, xmax] x [ymin, ymax]`, with
/// integer coordinates in the Lagrange-reduced basis of `l`.
pub fn enumerate_in_box(
    l: &Lattice2,
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
) -> Result<Vec<((i64, i64), Vec2)>> {
    enumerate_in_box_capped(l, xmin, xmax, ymin, ymax, DEFAULT_BOX_CAP)
}

pub fn enumerate_in_box_capped(
    l: &Lattice2,
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
    cap: f64,
) -> Result<Vec<((i64, i64), Vec2)>> {
    let finite = [xmin, xmax, ymin, ymax].iter().all(|v| v.is_finite());
    if !finite || xmin >= xmax || ymin >= ymax {
        return Err(LatticeError::InvalidBox { xmin, xmax, ymin, ymax });
    }
    let e = PointEnumerator::new(l);
    let estimate = e.estimate(xmin, xmax, ymin, ymax);
    if estimate > cap {
        return Err(LatticeError::BoxTooLarge { estimate, cap });
    }
    let mut out = Vec::new();
    e.for_each_in_box(xmin, xmax, ymin, ymax, |c, p| out.push((c, p)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_shortest(l: &Lattice2, k: i64) -> f64 {
        let mut best = f64::INFINITY;
        for m in -k..=k {
            for n in -k..=k {
                if (m, n) != (0, 0) {
                    best = best.min(l.point(m, n).norm());
                }
            }
        }
        best
    }

    fn brute_box(l: &Lattice2, k: i64, xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Vec<(i64, i64)> {
        let mut pts = Vec::new();
        for m in -k..=k {
            for n in -k..=k {
                let p = l.point(m, n);
                if p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax {
                    pts.push((m, n));
                }
            }
        }
        pts.sort();
        pts
    }

    fn c54() -> f64 {
        (3.0 + 21f64.sqrt()) / 6.0
    }

    #[test]
    fn reduce_sheared_square() {
        let l = Lattice2::new(Vec2::new(1.0, 0.0), Vec2::new(5.0, 1.0)).unwrap();
        let r = gauss_reduce(&l).unwrap();
        assert_eq!(r.b1().norm(), 1.0);
        assert_eq!(r.b2().norm(), 1.0);
        assert_eq!(r.b1().dot(r.b2()), 0.0);
        assert!(r.same_lattice(&Lattice2::square(), 1e-12));
    }

    #[test]
    fn reduce_keeps_reduced_basis() {
        let r = gauss_reduce(&Lattice2::square()).unwrap();
        assert_eq!(r, Lattice2::square());
    }

    #[test]
    fn reduce_matches_brute_force_shortest_vector() {
        let l = Lattice2::new(Vec2::new(2.0, 1.0), Vec2::new(3.0, 2.0)).unwrap();
        let r = gauss_reduce(&l).unwrap();
        let brute = brute_shortest(&l, 10);
        assert!((r.b1().norm() - brute).abs() < 1e-12);
        assert!(r.b1().norm() <= r.b2().norm());
        assert!(r.b2().norm() <= (r.b1() + r.b2()).norm() + 1e-12);
        assert!(r.b2().norm() <= (r.b1() - r.b2()).norm() + 1e-12);
        assert!(r.same_lattice(&l, 1e-9));
    }

    #[test]
    fn non_unimodular_basis_is_rejected() {
        let err = Lattice2::new(Vec2::new(3.0, 2.0), Vec2::new(-1.0, 1.0)).unwrap_err();
        assert!(matches!(err, LatticeError::NotUnimodular(d) if (d - 5.0).abs() < 1e-12));
        let err = Lattice2::new(Vec2::new(1.0, 1.0), Vec2::new(2.0, 2.0)).unwrap_err();
        assert!(matches!(err, LatticeError::DegenerateBasis(_)));
        assert_eq!(
            Lattice2::new(Vec2::new(f64::NAN, 0.0), Vec2::new(0.0, 1.0)),
            Err(LatticeError::NonFinite)
        );
    }

    #[test]
    fn admissibility_examples() {
        assert!(is_admissible(&Lattice2::square(), 0.25).unwrap());
        let threshold = 1.0 / (2.0 * 3f64.sqrt()).sqrt();
        assert!(!is_admissible(&Lattice2::hexagonal(), threshold).unwrap());
        assert!(is_admissible(&Lattice2::hexagonal(), 0.53).unwrap());
        assert!(!is_admissible(&Lattice2::hexagonal(), 0.54).unwrap());
        // brute-force minimum over |m|,|n| <= 10 is 1 > 2/3
        let l = Lattice2::example54();
        assert!(brute_shortest(&l, 10) > 2.0 / 3.0);
        assert!(is_admissible(&l, 1.0 / 3.0).unwrap());
        assert!(is_admissible(&l, 0.0).is_err());
    }

    #[test]
    fn slit_disjointness_examples() {
        assert!(slits_disjoint(&Lattice2::square(), 0.4).unwrap());
        assert!(!slits_disjoint(&Lattice2::square(), 0.6).unwrap());
        assert!(slits_disjoint(&Lattice2::example54(), 1.0 / 3.0).unwrap());
        // sheared: horizontal sublattice still (1,0)Z
        let l = Lattice2::new(Vec2::new(1.0, 0.0), Vec2::new(0.3, 1.0)).unwrap();
        assert!(!slits_disjoint(&l, 0.51).unwrap());
        assert!(slits_disjoint(&l, 0.49).unwrap());
        // no horizontal vector at all: every R works
        let s2 = 2f64.sqrt();
        let l = Lattice2::new(Vec2::new(1.0, s2 - 1.0), Vec2::new(0.0, 1.0)).unwrap();
        assert!(slits_disjoint(&l, 3.0).unwrap());
    }

    #[test]
    fn positive_basis_of_square_lattice() {
        let b = positive_basis(&Lattice2::square(), 0.25).unwrap();
        assert_eq!(b.gamma_plus, Vec2::new(1.0, 0.0));
        assert_eq!(b.gamma_minus, Vec2::new(0.0, 1.0));
    }

    #[test]
    fn positive_basis_of_example_lattice() {
        let l = Lattice2::example54();
        let b = positive_basis(&l, 1.0 / 3.0).unwrap();
        assert!(in_upper_right(b.gamma_plus) && in_upper_left(b.gamma_minus));
        assert!((b.gamma_plus.wedge(b.gamma_minus) - 1.0).abs() < 1e-12);
        assert!(b.gamma_plus.y < 1.5 && b.gamma_minus.y < 1.5);
        assert!(b.lattice().same_lattice(&l, 1e-9));
        assert_eq!(b.gamma_plus, Vec2::new(1.0, 0.0));
        assert!((b.gamma_minus.x - (c54() - 2.0)).abs() < 1e-12, "{b:?}");
        assert_eq!(b.gamma_minus.y, 1.0);
    }

    #[test]
    fn positive_basis_requires_disjoint_slits() {
        let err = positive_basis(&Lattice2::square(), 0.6).unwrap_err();
        assert!(matches!(err, LatticeError::NotDisjoint(_)));
    }

    #[test]
    fn positive_basis_for_tall_thin_slits() {
        // nearly horizontal short vector, small R: many Euclid steps needed
        let t = 0.001f64;
        let l = Lattice2::new(Vec2::new(1.0, t), Vec2::new(0.0, 1.0)).unwrap();
        let run = positive_basis_run(&l, 0.45).unwrap();
        let b = run.basis;
        assert!(b.max_height() < 1.0 / 0.9);
        assert!(b.lattice().same_lattice(&l, 1e-9));
        for w in run.steps.windows(2) {
            let (s0, s1) = (w[0].0.y + w[0].1.y, w[1].0.y + w[1].1.y);
            assert!(s1 < s0);
        }
    }

    #[test]
    fn tile_index_examples() {
        let b = positive_basis(&Lattice2::example54(), 1.0 / 3.0).unwrap();
        let (m, y) = tile_index(Vec2::ZERO, &b);
        assert_eq!(m, TileIndex::ORIGIN);
        assert_eq!(y, Vec2::ZERO);
        let (m, y) = tile_index(b.gamma_plus + b.gamma_minus, &b);
        assert_eq!(m, TileIndex::new(1, 1));
        assert!(y.norm() < 1e-12);
        let sq = positive_basis(&Lattice2::square(), 0.25).unwrap();
        let (m, y) = tile_index(Vec2::new(0.5, 0.0), &sq);
        assert_eq!(m, TileIndex::new(1, 0));
        assert_eq!(y, Vec2::new(-0.5, 0.0));
        let (m, y) = tile_index(Vec2::new(-0.5, -0.5), &sq);
        assert_eq!(m, TileIndex::new(0, 0));
        assert_eq!(y, Vec2::new(-0.5, -0.5));
    }

    #[test]
    fn box_enumeration_examples() {
        let sq = Lattice2::square();
        let pts = enumerate_in_box(&sq, -0.5, 0.5, -0.5, 0.5).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].1, Vec2::ZERO);
        assert_eq!(enumerate_in_box(&sq, 0.0, 2.0, 0.0, 1.0).unwrap().len(), 6);
        assert!(matches!(
            enumerate_in_box(&sq, 1.0, 0.0, 0.0, 1.0),
            Err(LatticeError::InvalidBox { .. })
        ));
        assert!(matches!(
            enumerate_in_box_capped(&sq, 0.0, 100.0, 0.0, 100.0, 1000.0),
            Err(LatticeError::BoxTooLarge { .. })
        ));
    }

    #[test]
    fn box_enumeration_reports_coordinates_back_in_input_basis() {
        let l = Lattice2::new(Vec2::new(1.0, 0.0), Vec2::new(5.3, 1.0)).unwrap();
        let e = PointEnumerator::new(&l);
        let mut seen = Vec::new();
        e.for_each_in_box(-3.0, 3.0, -3.0, 3.0, |(i, j), p| {
            let (m, n) = e.input_coordinates(i, j);
            assert!((l.point(m, n) - p).norm() < 1e-9);
            seen.push((m, n));
        });
        seen.sort();
        assert_eq!(seen, brute_box(&l, 40, -3.0, 3.0, -3.0, 3.0));
    }
}
