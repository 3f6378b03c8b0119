//! Dictionary between slit lattices `(Lambda, gamma_+, gamma_-)` and slit tori
//! `(u, theta)`, and band-direction prediction for periodic examples.
//!
//! A positive basis with the slit inside its centered parallelogram is sent by
//! the unique `g` with `g(gamma_+) = (1,0)`, `g(gamma_-) = (0,1)` to the pair
//! `u = g(R,0)`, `theta = g(0,1)/|g(0,1)|`. The inverse map `eta` sends `u` to
//! `(R,0)` and `theta` to `(0, (u ^ theta)/R)`.
//!
//! For a hyperbolic `h` fixing `u` whose induced homology action `h_*(u)` is
//! hyperbolic too, vertical rays in `F(eta Z^2, R)` stay in bands along
//! `eta theta_s`, where `theta` is the contracting eigendirection of `h` and
//! `theta_s` the contracting eigendirection of `h_*(u)`. The same line comes
//! out of `<gamma_2, xi> gamma_+ - <gamma_1, xi> gamma_-` for the class
//! `xi = theta_1 gamma_1 + theta_2 gamma_2` using `<gamma_1, gamma_2> = 2`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{self, Lattice2, LatticeError, PositiveBasis, Vec2, TAU_DET};
use crate::sl2::{self, Mat2, Sl2Error, TorusPoint, PSL2Z, SL2Z};

/// `|dx|` below which a band direction is reported as vertical.
pub const VERTICAL_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Sl2(#[from] Sl2Error),
    #[error("degenerate slit-torus datum: {0}")]
    DegenerateDatum(String),
    #[error("slit [-R,R] x {{0}} is not inside the centered parallelogram (max height {height}, R = {r})")]
    SlitOutsideTile { height: f64, r: f64 },
    #[error("{matrix} does not fix u = {u} on the torus (image {image})")]
    NotFixed { matrix: SL2Z, u: TorusPoint, image: TorusPoint },
    #[error("{which} = {matrix} is not hyperbolic")]
    NotHyperbolic { which: &'static str, matrix: SL2Z },
    #[error("homology class coefficients are zero")]
    ZeroClass,
}

pub type Result<T> = std::result::Result<T, PredictError>;

/// Marked point `u` of the slit torus and the direction `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlitTorusDatum {
    pub u: Vec2,
    pub theta_dir: Vec2,
}

impl SlitTorusDatum {
    /// Requires `u` in the open square `(-1/2,1/2)^2` minus the origin,
    /// `theta` of unit length and `u ^ theta > 0`.
    pub fn new(u: Vec2, theta_dir: Vec2) -> Result<Self> {
        if !u.is_finite() || !theta_dir.is_finite() {
            return Err(PredictError::DegenerateDatum("non-finite input".into()));
        }
        let inside = |c: f64| c > -0.5 && c < 0.5;
        if !inside(u.x) || !inside(u.y) || u == Vec2::ZERO {
            return Err(PredictError::DegenerateDatum(format!("u = {u} outside (-1/2,1/2)^2 minus 0")));
        }
        if (theta_dir.norm() - 1.0).abs() > 1e-9 {
            return Err(PredictError::DegenerateDatum(format!("theta = {theta_dir} is not a unit vector")));
        }
        if !(u.wedge(theta_dir) > 0.0) {
            return Err(PredictError::DegenerateDatum(format!(
                "u ^ theta = {} must be positive",
                u.wedge(theta_dir)
            )));
        }
        Ok(SlitTorusDatum { u, theta_dir })
    }

    pub fn wedge(&self) -> f64 {
        self.u.wedge(self.theta_dir)
    }
}

fn reduce_half_open(c: f64) -> f64 {
    c - (c + 0.5).floor()
}

/// `(u, theta)` for a positive basis whose parallelogram contains the slit.
pub fn lattice_to_torus(b: &PositiveBasis, r: f64) -> Result<SlitTorusDatum> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(LatticeError::InvalidRadius(r).into());
    }
    if !(b.max_height() < 1.0 / (2.0 * r)) {
        return Err(PredictError::SlitOutsideTile { height: b.max_height(), r });
    }
    let m = Mat2::from_columns(b.gamma_plus, b.gamma_minus);
    let det = m.det();
    if det.abs() < TAU_DET {
        return Err(LatticeError::DegenerateBasis(det.abs()).into());
    }
    let g = m.inverse().ok_or(LatticeError::DegenerateBasis(det.abs()))?;
    let raw = g.apply(Vec2::new(r, 0.0));
    let u = Vec2::new(reduce_half_open(raw.x), reduce_half_open(raw.y));
    let theta = g
        .apply(Vec2::new(0.0, 1.0))
        .normalized()
        .ok_or_else(|| PredictError::DegenerateDatum("g(0,1) = 0".into()))?;
    SlitTorusDatum::new(u, theta)
}

/// `eta` with `eta u = (R,0)`, `eta theta = (0, (u ^ theta)/R)`, and the
/// basis `gamma_+ = eta(1,0)`, `gamma_- = eta(0,1)` of `Lambda_{u,theta}`.
///
/// The basis need not lie in the positive quadrants; it is returned as an
/// ordered `Lattice2`.
pub fn torus_to_lattice(d: &SlitTorusDatum, r: f64) -> Result<(Lattice2, Mat2)> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(LatticeError::InvalidRadius(r).into());
    }
    let w = d.wedge();
    if !(w.abs() > 1e-15) {
        return Err(PredictError::DegenerateDatum("u is parallel to theta".into()));
    }
    let (u, t) = (d.u, d.theta_dir);
    let eta = Mat2::new(r * t.y / w, -r * t.x / w, -u.y / r, u.x / r);
    let lattice = Lattice2::new(eta.column(0), eta.column(1))?;
    Ok((lattice, eta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    PeriodicTheorem,
    Empirical,
}

/// `dy/dx` of a line direction, or vertical.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slope {
    Finite(f64),
    Vertical,
}

impl Slope {
    pub fn of(direction: Vec2) -> Slope {
        if direction.x.abs() < VERTICAL_EPS {
            Slope::Vertical
        } else {
            Slope::Finite(direction.y / direction.x)
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Slope::Finite(s) => Some(*s),
            Slope::Vertical => None,
        }
    }
}

impl fmt::Display for Slope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slope::Finite(s) => write!(f, "{s}"),
            Slope::Vertical => write!(f, "vertical"),
        }
    }
}

impl Serialize for Slope {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Slope::Finite(v) => s.serialize_f64(*v),
            Slope::Vertical => s.serialize_str("vertical"),
        }
    }
}

impl<'de> Deserialize<'de> for Slope {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Slope::Finite(v)),
            Raw::Text(t) if t == "vertical" => Ok(Slope::Vertical),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("bad slope {t:?}"))),
        }
    }
}

/// Predicted band direction with the homology data that certifies it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandPrediction {
    pub direction: Vec2,
    pub slope: Slope,
    /// `(theta_1, theta_2)` of the class `theta_1 gamma_1 + theta_2 gamma_2`.
    #[serde(rename = "xi")]
    pub xi_coeffs: [f64; 2],
    /// `(a, b) = (theta_2, -theta_1)`; `a m_1 + b m_2` stays bounded along orbits.
    #[serde(rename = "functional")]
    pub bounded_functional: [f64; 2],
    pub lattice: Lattice2,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub induced: Option<PSL2Z>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Mat2>,
}

/// The line `-2 (theta_1 gamma_+ + theta_2 gamma_-)`, unit length, sign-normalized.
pub fn band_direction_from_class(gamma_plus: Vec2, gamma_minus: Vec2, xi: [f64; 2]) -> Result<Vec2> {
    if xi == [0.0, 0.0] || !xi.iter().all(|c| c.is_finite()) {
        return Err(PredictError::ZeroClass);
    }
    let v = (gamma_plus * xi[0] + gamma_minus * xi[1]) * -2.0;
    v.line_direction().ok_or(PredictError::ZeroClass)
}

/// Band direction for the periodic case: `u` fixed by hyperbolic `h` with
/// hyperbolic induced action.
pub fn predict_band_periodic(u: &TorusPoint, h: &SL2Z, r: f64) -> Result<BandPrediction> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(LatticeError::InvalidRadius(r).into());
    }
    if !h.is_hyperbolic() {
        return Err(PredictError::NotHyperbolic { which: "h", matrix: *h });
    }
    let image = sl2::torus_act(h, u)?;
    if image != *u {
        return Err(PredictError::NotFixed { matrix: *h, u: *u, image });
    }
    let induced = sl2::induced_action(h, u)?;
    if !induced.rep().is_hyperbolic() {
        return Err(PredictError::NotHyperbolic { which: "h_*(u)", matrix: induced.rep() });
    }

    let uv = u.to_vec2();
    let (mut vartheta, _) = sl2::contracting_eigendirection(&h.to_real())?;
    if uv.wedge(vartheta) < 0.0 {
        vartheta = -vartheta;
    }
    let datum = SlitTorusDatum::new(uv, vartheta)?;
    let (lattice, eta) = torus_to_lattice(&datum, r)?;
    if !lattice::slits_disjoint(&lattice, r)? {
        return Err(LatticeError::NotDisjoint(2.0 * r).into());
    }

    let (theta, _) = sl2::contracting_eigendirection(&induced.rep().to_real())?;
    let xi = [theta.x, theta.y];
    let direction = band_direction_from_class(lattice.b1(), lattice.b2(), xi)?;
    Ok(BandPrediction {
        direction,
        slope: Slope::of(direction),
        xi_coeffs: xi,
        bounded_functional: [theta.y, -theta.x],
        lattice,
        method: Method::PeriodicTheorem,
        induced: Some(induced),
        eta: Some(eta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{positive_basis, tile_index};

    fn c54() -> f64 {
        (3.0 + 21f64.sqrt()) / 6.0
    }

    fn example() -> BandPrediction {
        let u: TorusPoint = "1/3,0".parse().unwrap();
        predict_band_periodic(&u, &SL2Z::new(1, 1, 3, 4).unwrap(), 1.0 / 3.0).unwrap()
    }

    #[test]
    fn square_basis_gives_identity_datum() {
        let b = PositiveBasis::new(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)).unwrap();
        let d = lattice_to_torus(&b, 1.0 / 3.0).unwrap();
        assert!((d.u - Vec2::new(1.0 / 3.0, 0.0)).norm() < 1e-15);
        assert_eq!(d.theta_dir, Vec2::new(0.0, 1.0));
        let d = SlitTorusDatum::new(Vec2::new(0.2, 0.0), Vec2::new(0.0, 1.0)).unwrap();
        let (_, eta) = torus_to_lattice(&d, 0.2).unwrap();
        assert!((eta.a - 1.0).abs() < 1e-15 && eta.b.abs() < 1e-15);
        assert!(eta.c.abs() < 1e-15 && (eta.d - 1.0).abs() < 1e-15);
    }

    #[test]
    fn example_eta_matrix() {
        let theta = Vec2::new(-c54(), 1.0).normalized().unwrap();
        let d = SlitTorusDatum::new(Vec2::new(1.0 / 3.0, 0.0), theta).unwrap();
        let (l, eta) = torus_to_lattice(&d, 1.0 / 3.0).unwrap();
        assert!((eta.a - 1.0).abs() < 1e-14);
        assert!((eta.b - c54()).abs() < 1e-14);
        assert!(eta.c.abs() < 1e-14);
        assert!((eta.d - 1.0).abs() < 1e-14);
        assert!(l.same_lattice(&Lattice2::example54(), 1e-9));
    }

    #[test]
    fn example_lattice_datum_via_positive_basis() {
        let r = 1.0 / 3.0;
        let b = positive_basis(&Lattice2::example54(), r).unwrap();
        let d = lattice_to_torus(&b, r).unwrap();
        assert!((d.u - Vec2::new(1.0 / 3.0, 0.0)).norm() < 1e-12);
        // gamma_- = (c-2, 1) gives theta along (2-c, 1)
        let expect = Vec2::new(2.0 - c54(), 1.0).normalized().unwrap();
        assert!((d.theta_dir - expect).norm() < 1e-12);
        let (l, _) = torus_to_lattice(&d, r).unwrap();
        assert!((l.b1() - b.gamma_plus).norm() < 1e-12);
        assert!((l.b2() - b.gamma_minus).norm() < 1e-12);
    }

    #[test]
    fn degenerate_data_are_rejected() {
        assert!(SlitTorusDatum::new(Vec2::new(0.2, 0.0), Vec2::new(1.0, 0.0)).is_err());
        assert!(SlitTorusDatum::new(Vec2::new(0.5, 0.1), Vec2::new(0.0, 1.0)).is_err());
        assert!(SlitTorusDatum::new(Vec2::ZERO, Vec2::new(0.0, 1.0)).is_err());
        assert!(SlitTorusDatum::new(Vec2::new(0.2, 0.0), Vec2::new(0.0, -1.0)).is_err());
        let b = PositiveBasis::new(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)).unwrap();
        assert!(matches!(lattice_to_torus(&b, 0.6), Err(PredictError::SlitOutsideTile { .. })));
    }

    #[test]
    fn example_prediction() {
        let p = example();
        let expected_slope = -(21f64.sqrt() + 3.0 * 5f64.sqrt()) / 4.0;
        assert!((p.slope.value().unwrap() - expected_slope).abs() < 1e-12);
        let expect = Vec2::new((21f64.sqrt() - 3.0 * 5f64.sqrt()) / 6.0, 1.0).line_direction().unwrap();
        assert!((p.direction - expect).norm() < 1e-12);
        assert_eq!(p.induced.unwrap(), PSL2Z::new(SL2Z::new(1, 1, 1, 2).unwrap()).unwrap());
        assert_eq!(p.method, Method::PeriodicTheorem);
        assert!(p.lattice.same_lattice(&Lattice2::example54(), 1e-9));
        // functional vanishes on the class direction
        let [a, b] = p.bounded_functional;
        assert!((a * p.xi_coeffs[0] + b * p.xi_coeffs[1]).abs() < 1e-15);
    }

    #[test]
    fn two_routes_to_the_band_direction_agree() {
        let p = example();
        let eta = p.eta.unwrap();
        let theta = Vec2::new(p.xi_coeffs[0], p.xi_coeffs[1]);
        let via_eta = eta.apply(theta).line_direction().unwrap();
        let via_class = band_direction_from_class(p.lattice.b1(), p.lattice.b2(), p.xi_coeffs).unwrap();
        assert!((via_eta - via_class).norm() < 1e-12);
        let scaled = band_direction_from_class(p.lattice.b1(), p.lattice.b2(), [-3.5 * theta.x, -3.5 * theta.y]).unwrap();
        assert!((scaled - via_class).norm() < 1e-12);
    }

    #[test]
    fn class_formula_examples() {
        let d = band_direction_from_class(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), [1.0, 0.0]).unwrap();
        assert_eq!(d, Vec2::new(1.0, 0.0));
        assert_eq!(
            band_direction_from_class(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), [0.0, 0.0]),
            Err(PredictError::ZeroClass)
        );
    }

    #[test]
    fn failures_of_the_periodic_hypotheses() {
        let u: TorusPoint = "1/3,0".parse().unwrap();
        assert!(matches!(
            predict_band_periodic(&u, &SL2Z::IDENTITY, 1.0 / 3.0),
            Err(PredictError::NotHyperbolic { which: "h", .. })
        ));
        assert!(matches!(
            predict_band_periodic(&u, &SL2Z::H_PLUS, 1.0 / 3.0),
            Err(PredictError::NotHyperbolic { .. })
        ));
        // [[2,1],[1,1]] moves (1/3,0) to (2/3,1/3) = (-1/3,1/3)
        assert!(matches!(
            predict_band_periodic(&u, &SL2Z::new(2, 1, 1, 1).unwrap(), 1.0 / 3.0),
            Err(PredictError::NotFixed { .. })
        ));
    }

    #[test]
    fn prediction_is_invariant_under_powers() {
        let u: TorusPoint = "1/3,0".parse().unwrap();
        let h = SL2Z::new(1, 1, 3, 4).unwrap();
        let p1 = example();
        for n in 2..=3 {
            let pn = predict_band_periodic(&u, &h.pow(n).unwrap(), 1.0 / 3.0).unwrap();
            assert!((pn.direction - p1.direction).norm() < 1e-9, "n = {n}");
        }
    }

    #[test]
    fn prediction_is_invariant_under_choice_of_positive_basis() {
        // Two positive bases of the example lattice with the slit inside the
        // parallelogram. Each gives its own (u_B, theta_B); the conjugated
        // matrix A h A^-1, with A = g_B eta integral, fixes u_B.
        let r = 1.0 / 3.0;
        let base = example();
        let eta = base.eta.unwrap();
        let h = SL2Z::new(1, 1, 3, 4).unwrap();
        let u: TorusPoint = "1/3,0".parse().unwrap();
        let c = c54();
        let bases = [
            PositiveBasis::new(Vec2::new(1.0, 0.0), Vec2::new(c - 2.0, 1.0)).unwrap(),
            PositiveBasis::new(Vec2::new(c - 1.0, 1.0), Vec2::new(c - 2.0, 1.0)).unwrap(),
        ];
        for b in bases {
            let g = Mat2::from_columns(b.gamma_plus, b.gamma_minus).inverse().unwrap();
            let a_real = g.mul(&eta);
            let round = |v: f64| {
                assert!((v - v.round()).abs() < 1e-9);
                v.round() as i64
            };
            let a = SL2Z::new(round(a_real.a), round(a_real.b), round(a_real.c), round(a_real.d)).unwrap();
            let h_b = a.mul(&h).unwrap().mul(&a.inverse().unwrap()).unwrap();
            let u_b = sl2::torus_act(&a, &u).unwrap();
            let d = lattice_to_torus(&b, r).unwrap();
            assert!((d.u - u_b.to_vec2()).norm() < 1e-12);
            let p = predict_band_periodic(&u_b, &h_b, r).unwrap();
            assert!(p.lattice.same_lattice(&Lattice2::example54(), 1e-9));
            assert!((p.direction - base.direction).norm() < 1e-9, "{b:?}");
        }
        // tiles of the trajectory basis are consistent with the reported lattice
        let pb = positive_basis(&base.lattice, r).unwrap();
        let (m, _) = tile_index(base.lattice.b2(), &pb);
        assert!(m != crate::lattice::TileIndex::ORIGIN);
    }

    #[test]
    fn prediction_json_schema() {
        let p = example();
        let v = serde_json::to_value(&p).unwrap();
        for key in ["direction", "slope", "xi", "functional", "lattice", "method"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["method"], "periodic-theorem");
        assert_eq!(v["induced"], serde_json::json!([[1, 1], [1, 2]]));
        assert!(v["lattice"]["basis"].is_array());
        let back: BandPrediction = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
        let vertical = serde_json::to_value(Slope::Vertical).unwrap();
        assert_eq!(vertical, "vertical");
        assert_eq!(serde_json::from_value::<Slope>(vertical).unwrap(), Slope::Vertical);
    }
}
