//! Exact `SL(2,Z)` arithmetic: generator words in `h+ = [[1,1],[0,1]]` and
//! `h- = [[1,0],[1,1]]`, the action on rational points of the torus, and the
//! induced action on the anti-invariant homology of the two-sheeted slit torus.

use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Sl2Error {
    #[error("integer overflow in exact matrix arithmetic")]
    Overflow,
    #[error("determinant is {0}, expected 1")]
    NotUnimodular(i128),
    #[error("torus point {0} is one of the four excluded 2-torsion points")]
    ExcludedPoint(String),
    #[error("matrix with trace {0} is not hyperbolic")]
    NotHyperbolic(f64),
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("cannot parse {input:?}: {reason}")]
    Parse { input: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Sl2Error>;

/// Integer 2x2 matrix of determinant one, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[[i64; 2]; 2]", into = "[[i64; 2]; 2]")]
pub struct SL2Z {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl SL2Z {
    pub const IDENTITY: SL2Z = SL2Z { a: 1, b: 0, c: 0, d: 1 };
    pub const H_PLUS: SL2Z = SL2Z { a: 1, b: 1, c: 0, d: 1 };
    pub const H_MINUS: SL2Z = SL2Z { a: 1, b: 0, c: 1, d: 1 };

    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Result<Self> {
        let det = a as i128 * d as i128 - b as i128 * c as i128;
        if det != 1 {
            return Err(Sl2Error::NotUnimodular(det));
        }
        Ok(SL2Z { a, b, c, d })
    }

    pub fn mul(&self, o: &SL2Z) -> Result<SL2Z> {
        let dot = |x: i64, y: i64, z: i64, w: i64| -> Result<i64> {
            x.checked_mul(y)
                .and_then(|p| z.checked_mul(w).and_then(|q| p.checked_add(q)))
                .ok_or(Sl2Error::Overflow)
        };
        Ok(SL2Z {
            a: dot(self.a, o.a, self.b, o.c)?,
            b: dot(self.a, o.b, self.b, o.d)?,
            c: dot(self.c, o.a, self.d, o.c)?,
            d: dot(self.c, o.b, self.d, o.d)?,
        })
    }

    /// Adjugate; exact since the determinant is one.
    pub fn inverse(&self) -> Result<SL2Z> {
        Ok(SL2Z {
            a: self.d,
            b: self.b.checked_neg().ok_or(Sl2Error::Overflow)?,
            c: self.c.checked_neg().ok_or(Sl2Error::Overflow)?,
            d: self.a,
        })
    }

    pub fn neg(&self) -> Result<SL2Z> {
        let n = |v: i64| v.checked_neg().ok_or(Sl2Error::Overflow);
        Ok(SL2Z { a: n(self.a)?, b: n(self.b)?, c: n(self.c)?, d: n(self.d)? })
    }

    /// `self^n` for any integer `n`.
    pub fn pow(&self, n: i64) -> Result<SL2Z> {
        let base = if n < 0 { self.inverse()? } else { *self };
        let mut e = n.unsigned_abs();
        let mut acc = SL2Z::IDENTITY;
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&sq)?;
            }
            e >>= 1;
            if e > 0 {
                sq = sq.mul(&sq)?;
            }
        }
        Ok(acc)
    }

    pub fn trace(&self) -> i128 {
        self.a as i128 + self.d as i128
    }

    pub fn is_hyperbolic(&self) -> bool {
        self.trace().abs() > 2
    }

    pub fn to_real(&self) -> Mat2 {
        Mat2::new(self.a as f64, self.b as f64, self.c as f64, self.d as f64)
    }
}

impl TryFrom<[[i64; 2]; 2]> for SL2Z {
    type Error = Sl2Error;
    fn try_from(m: [[i64; 2]; 2]) -> Result<Self> {
        SL2Z::new(m[0][0], m[0][1], m[1][0], m[1][1])
    }
}

impl From<SL2Z> for [[i64; 2]; 2] {
    fn from(g: SL2Z) -> Self {
        [[g.a, g.b], [g.c, g.d]]
    }
}

impl fmt::Display for SL2Z {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{},{}],[{},{}]]", self.a, self.b, self.c, self.d)
    }
}

/// Class of an `SL2Z` matrix modulo `+-1`, stored with its first nonzero
/// entry positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "[[i64; 2]; 2]", try_from = "[[i64; 2]; 2]")]
pub struct PSL2Z {
    rep: SL2Z,
}

impl PSL2Z {
    pub fn new(g: SL2Z) -> Result<Self> {
        let first = [g.a, g.b, g.c, g.d].into_iter().find(|&v| v != 0).unwrap_or(1);
        let rep = if first < 0 { g.neg()? } else { g };
        Ok(PSL2Z { rep })
    }

    pub fn rep(&self) -> SL2Z {
        self.rep
    }

    pub fn identity() -> Self {
        PSL2Z { rep: SL2Z::IDENTITY }
    }

    pub fn mul(&self, o: &PSL2Z) -> Result<PSL2Z> {
        PSL2Z::new(self.rep.mul(&o.rep)?)
    }

    pub fn inverse(&self) -> Result<PSL2Z> {
        PSL2Z::new(self.rep.inverse()?)
    }
}

impl TryFrom<[[i64; 2]; 2]> for PSL2Z {
    type Error = Sl2Error;
    fn try_from(m: [[i64; 2]; 2]) -> Result<Self> {
        PSL2Z::new(SL2Z::try_from(m)?)
    }
}

impl From<PSL2Z> for [[i64; 2]; 2] {
    fn from(g: PSL2Z) -> Self {
        g.rep.into()
    }
}

impl fmt::Display for PSL2Z {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "±{}", self.rep)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Generator {
    /// `[[1,1],[0,1]]`, written `L`.
    HPlus,
    /// `[[1,0],[1,1]]`, written `R`.
    HMinus,
}

impl Generator {
    pub fn matrix(self) -> SL2Z {
        match self {
            Generator::HPlus => SL2Z::H_PLUS,
            Generator::HMinus => SL2Z::H_MINUS,
        }
    }

    fn symbol(self) -> char {
        match self {
            Generator::HPlus => 'L',
            Generator::HMinus => 'R',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Letter {
    pub generator: Generator,
    pub exponent: i64,
}

/// Word in `h+`, `h-` with nonzero exponents and no two adjacent letters on
/// the same generator. The product is read left to right as matrices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GenWord {
    letters: Vec<Letter>,
}

impl GenWord {
    pub fn empty() -> Self {
        GenWord::default()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Appends `generator^exponent`, merging with the last letter.
    pub fn push(&mut self, generator: Generator, exponent: i64) {
        if exponent == 0 {
            return;
        }
        if let Some(last) = self.letters.last_mut() {
            if last.generator == generator {
                last.exponent += exponent;
                if last.exponent == 0 {
                    self.letters.pop();
                }
                return;
            }
        }
        self.letters.push(Letter { generator, exponent });
    }

    pub fn product(&self) -> Result<SL2Z> {
        self.letters.iter().try_fold(SL2Z::IDENTITY, |acc, l| {
            acc.mul(&l.generator.matrix().pow(l.exponent)?)
        })
    }

    /// Total number of generator steps, `sum |exponent|`.
    pub fn length(&self) -> u64 {
        self.letters.iter().map(|l| l.exponent.unsigned_abs()).sum()
    }
}

impl fmt::Display for GenWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "I");
        }
        for (k, l) in self.letters.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "{}", l.generator.symbol())?;
            if l.exponent != 1 {
                write!(f, "^{}", l.exponent)?;
            }
        }
        Ok(())
    }
}

/// Parses words like `"R^3 L"`, `"L^-2 R"` or `"RRRL"`; `L` is `h+`, `R` is
/// `h-`, `I` or the empty string is the identity.
impl FromStr for GenWord {
    type Err = Sl2Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = |reason: &str| Sl2Error::Parse { input: s.to_string(), reason: reason.to_string() };
        let mut word = GenWord::empty();
        let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace() && *c != '*').collect();
        let mut k = 0;
        while k < chars.len() {
            let generator = match chars[k] {
                'L' | 'l' => Generator::HPlus,
                'R' | 'r' => Generator::HMinus,
                'I' => {
                    k += 1;
                    continue;
                }
                other => return Err(err(&format!("unexpected character {other:?}"))),
            };
            k += 1;
            let mut exponent = 1i64;
            if k < chars.len() && chars[k] == '^' {
                k += 1;
                let start = k;
                if k < chars.len() && (chars[k] == '-' || chars[k] == '+') {
                    k += 1;
                }
                while k < chars.len() && chars[k].is_ascii_digit() {
                    k += 1;
                }
                let digits: String = chars[start..k].iter().collect();
                exponent = digits.parse().map_err(|_| err("bad exponent"))?;
            }
            word.push(generator, exponent);
        }
        Ok(word)
    }
}

/// Writes `g` as a word in `h+-`: returns `(w, s)` with `product(w) = s * g`.
///
/// Euclidean reduction on the first column `(a, c)`: left multiplication by
/// `(h-)^-k` replaces `c` by `c - k a`, by `(h+)^-k` replaces `a` by
/// `a - k c`. When `|a| = |c|` the entry `c` is reduced.
pub fn decompose_word(g: &SL2Z) -> Result<(GenWord, i64)> {
    let mut m = *g;
    // Steps X_1, X_2, ... with X_n^-1 ... X_1^-1 g = m.
    let mut steps: Vec<(Generator, i64)> = Vec::new();
    while m.c != 0 {
        if m.a == 0 {
            // c = +-1; bring a to 1
            let k = -m.c;
            m = Generator::HPlus.matrix().pow(-k)?.mul(&m)?;
            steps.push((Generator::HPlus, k));
        } else if m.c.abs() >= m.a.abs() {
            let k = m.c / m.a;
            m = Generator::HMinus.matrix().pow(-k)?.mul(&m)?;
            steps.push((Generator::HMinus, k));
        } else {
            let k = m.a / m.c;
            m = Generator::HPlus.matrix().pow(-k)?.mul(&m)?;
            steps.push((Generator::HPlus, k));
        }
    }
    // m = s [[1, b'], [0, 1]] with s = m.a = +-1
    let sign = m.a;
    debug_assert!(sign == 1 || sign == -1);
    let tail = m.b.checked_mul(sign).ok_or(Sl2Error::Overflow)?;
    let mut word = GenWord::empty();
    for (generator, k) in steps {
        word.push(generator, k);
    }
    word.push(Generator::HPlus, tail);
    Ok((word, sign))
}

/// A rational point of `[-1/2, 1/2)^2` other than the four 2-torsion points,
/// stored over a common denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TorusPoint {
    nx: i64,
    ny: i64,
    den: i64,
}

fn reduce_half_open(n: i64, den: i64) -> i64 {
    let r = n.rem_euclid(den);
    if 2 * (r as i128) >= den as i128 {
        r - den
    } else {
        r
    }
}

impl TorusPoint {
    /// `(px/qx, py/qy)` reduced modulo `Z^2` into `[-1/2, 1/2)^2`.
    pub fn new(px: i64, qx: i64, py: i64, qy: i64) -> Result<Self> {
        if qx == 0 || qy == 0 {
            return Err(Sl2Error::ZeroDenominator);
        }
        let norm = |p: i64, q: i64| -> Result<(i64, i64)> {
            let g = p.gcd(&q);
            let (mut p, mut q) = (p / g, q / g);
            if q < 0 {
                p = p.checked_neg().ok_or(Sl2Error::Overflow)?;
                q = q.checked_neg().ok_or(Sl2Error::Overflow)?;
            }
            Ok((p, q))
        };
        let (px, qx) = norm(px, qx)?;
        let (py, qy) = norm(py, qy)?;
        let den = qx.lcm(&qy);
        let nx = px.checked_mul(den / qx).ok_or(Sl2Error::Overflow)?;
        let ny = py.checked_mul(den / qy).ok_or(Sl2Error::Overflow)?;
        TorusPoint::from_parts(nx, ny, den)
    }

    fn from_parts(nx: i64, ny: i64, den: i64) -> Result<Self> {
        let (nx, ny) = (reduce_half_open(nx, den), reduce_half_open(ny, den));
        let g = nx.gcd(&ny).gcd(&den);
        let p = TorusPoint { nx: nx / g, ny: ny / g, den: den / g };
        if p.is_two_torsion() {
            return Err(Sl2Error::ExcludedPoint(p.to_string()));
        }
        Ok(p)
    }

    fn is_two_torsion(&self) -> bool {
        let half = |n: i64| n == 0 || 2 * (n as i128) == -(self.den as i128);
        half(self.nx) && half(self.ny)
    }

    /// `x` as a reduced fraction `(p, q)`, `q > 0`.
    pub fn x(&self) -> (i64, i64) {
        let g = self.nx.gcd(&self.den);
        (self.nx / g, self.den / g)
    }

    pub fn y(&self) -> (i64, i64) {
        let g = self.ny.gcd(&self.den);
        (self.ny / g, self.den / g)
    }

    pub fn denominator(&self) -> i64 {
        self.den
    }

    pub fn to_vec2(&self) -> Vec2 {
        Vec2::new(self.nx as f64 / self.den as f64, self.ny as f64 / self.den as f64)
    }

    /// Membership in `{-1/2 <= x + y < 1/2}`.
    pub fn in_region_s(&self) -> bool {
        let twice = 2 * (self.nx as i128 + self.ny as i128);
        let den = self.den as i128;
        -den <= twice && twice < den
    }
}

impl fmt::Display for TorusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let frac = |(p, q): (i64, i64)| if q == 1 { p.to_string() } else { format!("{p}/{q}") };
        write!(f, "{},{}", frac(self.x()), frac(self.y()))
    }
}

fn parse_rational(s: &str) -> std::result::Result<(i64, i64), String> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: i64 = p.trim().parse().map_err(|e| format!("{e}"))?;
        let q: i64 = q.trim().parse().map_err(|e| format!("{e}"))?;
        return Ok((p, q));
    }
    if let Ok(n) = s.parse::<i64>() {
        return Ok((n, 1));
    }
    // finite decimal such as 0.25
    let (int, frac) = s.split_once('.').ok_or_else(|| "not a rational number".to_string())?;
    if frac.len() > 15 || !frac.chars().all(|c| c.is_ascii_digit()) {
        return Err("not a rational number".to_string());
    }
    let q = 10i64.pow(frac.len() as u32);
    let negative = int.trim_start().starts_with('-');
    let ip: i64 = if int.trim() == "-" || int.trim().is_empty() { 0 } else { int.trim().parse().map_err(|e| format!("{e}"))? };
    let fp: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|e| format!("{e}"))? };
    let p = ip.abs() * q + fp;
    Ok((if negative { -p } else { p }, q))
}

/// Parses `"x,y"` with each coordinate an integer, `p/q` or a finite decimal.
impl FromStr for TorusPoint {
    type Err = Sl2Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = |reason: String| Sl2Error::Parse { input: s.to_string(), reason };
        let (xs, ys) = s.split_once(',').ok_or_else(|| err("expected \"x,y\"".into()))?;
        let (px, qx) = parse_rational(xs).map_err(err)?;
        let (py, qy) = parse_rational(ys).map_err(err)?;
        TorusPoint::new(px, qx, py, qy)
    }
}

impl Serialize for TorusPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TorusPoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Image of `u` under the toral automorphism `g`, reduced to `[-1/2, 1/2)^2`.
pub fn torus_act(g: &SL2Z, u: &TorusPoint) -> Result<TorusPoint> {
    let comb = |p: i64, q: i64| -> Result<i64> {
        let v = p as i128 * u.nx as i128 + q as i128 * u.ny as i128;
        let r = v.rem_euclid(u.den as i128);
        i64::try_from(r).map_err(|_| Sl2Error::Overflow)
    };
    TorusPoint::from_parts(comb(g.a, g.b)?, comb(g.c, g.d)?, u.den)
}

/// `(h)_*(u)` for a single generator step `h = gen^(+-1)`.
fn step_action(generator: Generator, forward: bool, u: &TorusPoint) -> Result<SL2Z> {
    let h = generator.matrix();
    if forward {
        if u.in_region_s() {
            Ok(h)
        } else {
            h.inverse()
        }
    } else {
        // (h^-1)_*(u) = [h_*(h^-1 u)]^-1
        let back = torus_act(&h.inverse()?, u)?;
        step_action(generator, true, &back)?.inverse()
    }
}

/// Matrix of the homology map induced by `g: M(u) -> M(gu)` in the
/// canonical bases, as a `PSL(2,Z)` class.
///
/// Evaluated along the normal-form word of `g` with the cocycle rule
/// `(g1 g2)_*(u) = (g1)_*(g2 u) (g2)_*(u)`.
pub fn induced_action(g: &SL2Z, u: &TorusPoint) -> Result<PSL2Z> {
    let (word, sign) = decompose_word(g)?;
    let along_word = induced_action_of_word(&word, u)?;
    if sign == 1 {
        return Ok(along_word);
    }
    // The word evaluates -g; -I = S^2 maps -gu back to gu and its own
    // action need not be trivial.
    let minus_g_u = torus_act(&word.product()?, u)?;
    induced_action_of_word(&minus_identity_word(), &minus_g_u)?.mul(&along_word)
}

/// `S S` with `S = h+ (h-)^-1 h+`, a word whose product is exactly `-I`.
fn minus_identity_word() -> GenWord {
    let mut w = GenWord::empty();
    for _ in 0..2 {
        w.push(Generator::HPlus, 1);
        w.push(Generator::HMinus, -1);
        w.push(Generator::HPlus, 1);
    }
    w
}

/// As `induced_action`, for an explicit word (the rightmost letter acts first).
pub fn induced_action_of_word(word: &GenWord, u: &TorusPoint) -> Result<PSL2Z> {
    let mut acc = SL2Z::IDENTITY;
    let mut point = *u;
    for letter in word.letters().iter().rev() {
        let forward = letter.exponent > 0;
        let step = if forward { letter.generator.matrix() } else { letter.generator.matrix().inverse()? };
        for _ in 0..letter.exponent.unsigned_abs() {
            acc = step_action(letter.generator, forward, &point)?.mul(&acc)?;
            point = torus_act(&step, &point)?;
        }
    }
    PSL2Z::new(acc)
}

/// Real 2x2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]")]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    /// Matrix with columns `c1`, `c2`.
    pub fn from_columns(c1: Vec2, c2: Vec2) -> Self {
        Mat2::new(c1.x, c2.x, c1.y, c2.y)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn apply(&self, v: Vec2) -> Vec2 {
        Vec2::new(self.a * v.x + self.b * v.y, self.c * v.x + self.d * v.y)
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let det = self.det();
        (det != 0.0 && det.is_finite())
            .then(|| Mat2::new(self.d / det, -self.b / det, -self.c / det, self.a / det))
    }

    pub fn is_hyperbolic(&self) -> bool {
        self.trace().abs() > 2.0
    }

    pub fn column(&self, k: usize) -> Vec2 {
        match k {
            0 => Vec2::new(self.a, self.c),
            _ => Vec2::new(self.b, self.d),
        }
    }
}

impl From<[[f64; 2]; 2]> for Mat2 {
    fn from(m: [[f64; 2]; 2]) -> Self {
        Mat2::new(m[0][0], m[0][1], m[1][0], m[1][1])
    }
}

impl From<Mat2> for [[f64; 2]; 2] {
    fn from(m: Mat2) -> Self {
        [[m.a, m.b], [m.c, m.d]]
    }
}

/// Unit eigenvector for the eigenvalue of modulus below one of a hyperbolic
/// determinant-one matrix, oriented with positive second component (positive
/// first component if the second vanishes). Returns the eigenvalue too.
pub fn contracting_eigendirection(m: &Mat2) -> Result<(Vec2, f64)> {
    let t = m.trace();
    if !m.is_hyperbolic() {
        return Err(Sl2Error::NotHyperbolic(t));
    }
    let disc = (t * t - 4.0 * m.det()).max(0.0).sqrt();
    let big = 0.5 * (t + t.signum() * disc);
    let lambda = m.det() / big;
    let v1 = Vec2::new(m.b, lambda - m.a);
    let v2 = Vec2::new(lambda - m.d, m.c);
    let v = if v1.norm_sq() >= v2.norm_sq() { v1 } else { v2 };
    let dir = v.line_direction().ok_or(Sl2Error::NotHyperbolic(t))?;
    Ok((dir, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(a: i64, b: i64, c: i64, d: i64) -> SL2Z {
        SL2Z::new(a, b, c, d).unwrap()
    }

    fn tp(s: &str) -> TorusPoint {
        s.parse().unwrap()
    }

    #[test]
    fn example_matrix_product() {
        let h = SL2Z::H_MINUS.pow(3).unwrap().mul(&SL2Z::H_PLUS).unwrap();
        assert_eq!(h, m(1, 1, 3, 4));
        assert_eq!(SL2Z::IDENTITY.inverse().unwrap(), SL2Z::IDENTITY);
        assert_eq!(h.mul(&h.inverse().unwrap()).unwrap(), SL2Z::IDENTITY);
    }

    #[test]
    fn determinant_and_overflow_are_checked() {
        assert_eq!(SL2Z::new(2, 0, 0, 1), Err(Sl2Error::NotUnimodular(2)));
        let big = m(1, i64::MAX / 2, 0, 1);
        assert_eq!(big.pow(4), Err(Sl2Error::Overflow));
    }

    #[test]
    fn decompose_examples() {
        let (w, s) = decompose_word(&m(1, 1, 3, 4)).unwrap();
        assert_eq!(s, 1);
        assert_eq!(w.to_string(), "R^3 L");
        let (w, s) = decompose_word(&SL2Z::IDENTITY).unwrap();
        assert!(w.is_empty());
        assert_eq!(s, 1);
        let (w, s) = decompose_word(&m(2, 1, 1, 1)).unwrap();
        assert_eq!(s, 1);
        assert_eq!(w.to_string(), "L R");
        assert_eq!(w.product().unwrap(), m(2, 1, 1, 1));
        let minus = m(-1, 0, 0, -1);
        let (w, s) = decompose_word(&minus).unwrap();
        assert_eq!(s, -1);
        assert!(w.is_empty());
        let g = m(0, -1, 1, 0);
        let (w, s) = decompose_word(&g).unwrap();
        let expect = if s == 1 { g } else { g.neg().unwrap() };
        assert_eq!(w.product().unwrap(), expect);
    }

    #[test]
    fn word_parsing_and_display() {
        let w: GenWord = "R^3 L".parse().unwrap();
        assert_eq!(w.product().unwrap(), m(1, 1, 3, 4));
        let w2: GenWord = "RRRL".parse().unwrap();
        assert_eq!(w, w2);
        let w3: GenWord = "L^-2 R^1".parse().unwrap();
        assert_eq!(w3.to_string(), "L^-2 R");
        assert!("X".parse::<GenWord>().is_err());
        assert!("R^".parse::<GenWord>().is_err());
        let cancelled: GenWord = "L L^-1".parse().unwrap();
        assert!(cancelled.is_empty());
    }

    #[test]
    fn torus_points() {
        let u = tp("1/3,0");
        assert_eq!(u.x(), (1, 3));
        assert_eq!(u.y(), (0, 1));
        assert_eq!(tp("2/3,1").to_string(), "-1/3,0");
        assert_eq!(tp("1/2,1/3").to_string(), "-1/2,1/3");
        assert!(matches!("0,0".parse::<TorusPoint>(), Err(Sl2Error::ExcludedPoint(_))));
        assert!(matches!("1/2,1/2".parse::<TorusPoint>(), Err(Sl2Error::ExcludedPoint(_))));
        assert!(matches!("-1/2,0".parse::<TorusPoint>(), Err(Sl2Error::ExcludedPoint(_))));
        assert!(matches!("0,1/2".parse::<TorusPoint>(), Err(Sl2Error::ExcludedPoint(_))));
        assert!(matches!("1/0,1".parse::<TorusPoint>(), Err(Sl2Error::ZeroDenominator)));
        assert_eq!(tp("0.25,-0.5").to_string(), "1/4,-1/2");
        assert!("abc".parse::<TorusPoint>().is_err());
    }

    #[test]
    fn torus_action_examples() {
        let h = m(1, 1, 3, 4);
        let u = tp("1/3,0");
        assert_eq!(torus_act(&h, &u).unwrap(), u);
        assert_eq!(torus_act(&SL2Z::IDENTITY, &tp("1/5,2/5")).unwrap(), tp("1/5,2/5"));
        assert_eq!(torus_act(&SL2Z::H_MINUS, &tp("1/3,1/3")).unwrap(), tp("1/3,-1/3"));
    }

    #[test]
    fn region_s_is_half_open() {
        assert!(!tp("1/4,1/4").in_region_s());
        assert!(tp("-1/4,-1/4").in_region_s());
        assert!(tp("1/3,0").in_region_s());
        assert!(!tp("1/3,1/3").in_region_s());
    }

    #[test]
    fn induced_action_example() {
        let h = m(1, 1, 3, 4);
        let got = induced_action(&h, &tp("1/3,0")).unwrap();
        assert_eq!(got, PSL2Z::new(m(1, 1, 1, 2)).unwrap());
        assert_eq!(induced_action(&SL2Z::IDENTITY, &tp("1/7,3/7")).unwrap(), PSL2Z::identity());
    }

    #[test]
    fn induced_action_base_case() {
        for s in ["1/3,0", "1/5,-2/5", "-1/2,1/3", "2/7,-3/7"] {
            let u = tp(s);
            for g in [SL2Z::H_PLUS, SL2Z::H_MINUS] {
                let expect = if u.in_region_s() { g } else { g.inverse().unwrap() };
                assert_eq!(induced_action(&g, &u).unwrap(), PSL2Z::new(expect).unwrap(), "{s}");
            }
        }
        // x + y = 2/3 lies outside S
        let u = tp("1/3,1/3");
        assert_eq!(
            induced_action(&SL2Z::H_PLUS, &u).unwrap(),
            PSL2Z::new(SL2Z::H_PLUS.inverse().unwrap()).unwrap()
        );
    }

    #[test]
    fn induced_action_does_not_depend_on_the_word() {
        let u = tp("1/3,0");
        let normal: GenWord = "R^3 L".parse().unwrap();
        // S = h+ (h-)^-1 h+ = [[0,1],[-1,0]] has S^2 = -1, S^4 = 1
        let g = normal.product().unwrap();
        let twice: GenWord = "R^3 L L R^-1 L L R^-1 L".parse().unwrap();
        assert_eq!(twice.product().unwrap(), g.neg().unwrap());
        let four: GenWord = "R^3 L L R^-1 L L R^-1 L L R^-1 L L R^-1 L".parse().unwrap();
        assert_eq!(four.product().unwrap(), g);
        let expect = induced_action_of_word(&normal, &u).unwrap();
        assert_eq!(induced_action_of_word(&twice, &u).unwrap(), expect);
        assert_eq!(induced_action_of_word(&four, &u).unwrap(), expect);
        let detour: GenWord = "R^3 L^2 R^5 R^-5 L^-1".parse().unwrap();
        assert_eq!(induced_action_of_word(&detour, &u).unwrap(), induced_action(&g, &u).unwrap());
    }

    #[test]
    fn hyperbolicity() {
        assert!(m(1, 1, 3, 4).is_hyperbolic());
        assert!(!SL2Z::IDENTITY.is_hyperbolic());
        assert!(!SL2Z::H_PLUS.is_hyperbolic());
        assert!(m(-3, -1, 1, 0).is_hyperbolic());
    }

    #[test]
    fn eigendirection_examples() {
        let (v, lambda) = contracting_eigendirection(&m(1, 1, 3, 4).to_real()).unwrap();
        let c = (3.0 + 21f64.sqrt()) / 6.0;
        let expect = Vec2::new(-c, 1.0).line_direction().unwrap();
        assert!((v - expect).norm() < 1e-14);
        assert!((lambda - (5.0 - 21f64.sqrt()) / 2.0).abs() < 1e-15);

        let (v, _) = contracting_eigendirection(&m(1, 1, 1, 2).to_real()).unwrap();
        let expect = Vec2::new(-(1.0 + 5f64.sqrt()) / 2.0, 1.0).line_direction().unwrap();
        assert!((v - expect).norm() < 1e-14);

        let (v, lambda) = contracting_eigendirection(&Mat2::new(2.0, 0.0, 0.0, 0.5)).unwrap();
        assert_eq!(v, Vec2::new(0.0, 1.0));
        assert_eq!(lambda, 0.5);

        assert!(matches!(
            contracting_eigendirection(&Mat2::IDENTITY),
            Err(Sl2Error::NotHyperbolic(_))
        ));
        // negative trace
        let g = m(-1, -1, -3, -4).to_real();
        let (v, lambda) = contracting_eigendirection(&g).unwrap();
        assert!(lambda.abs() < 1.0 && lambda < 0.0);
        assert!((g.apply(v) - v * lambda).norm() < 1e-12);
    }

    #[test]
    fn json_forms() {
        let g = m(1, 1, 3, 4);
        assert_eq!(serde_json::to_string(&g).unwrap(), "[[1,1],[3,4]]");
        assert!(serde_json::from_str::<SL2Z>("[[1,2],[3,4]]").is_err());
        let p = PSL2Z::new(m(-1, -1, -1, -2)).unwrap();
        assert_eq!(serde_json::to_string(&p).unwrap(), "[[1,1],[1,2]]");
        let u = tp("1/3,0");
        assert_eq!(serde_json::to_string(&u).unwrap(), "\"1/3,0\"");
    }
}
