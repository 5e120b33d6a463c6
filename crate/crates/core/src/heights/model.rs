//! The three symmetric-space models and their points.

use std::collections::HashMap;
use std::fmt;

use num_complex::Complex64;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};

use crate::cusp::{Cusp, GroupElement};
use crate::error::{Result, SpineError};
use crate::field::{field_spec, FieldSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    /// Upper half-plane, `SL2(Z)`.
    ModularH2,
    /// Upper half-space, `SL2(O)` for imaginary quadratic `O`.
    BianchiH3,
    /// Product of two upper half-planes, `SL2(O)` for real quadratic `O`.
    HilbertH2xH2,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::ModularH2 => "h2",
            ModelKind::BianchiH3 => "bianchi",
            ModelKind::HilbertH2xH2 => "hilbert",
        }
    }

    pub fn from_name(s: &str) -> Result<ModelKind> {
        match s {
            "h2" | "modular" => Ok(ModelKind::ModularH2),
            "bianchi" | "h3" => Ok(ModelKind::BianchiH3),
            "hilbert" | "hxh" => Ok(ModelKind::HilbertH2xH2),
            _ => Err(SpineError::Parse(format!("unknown model '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub kind: ModelKind,
    pub field: FieldSpec,
}

impl Model {
    pub fn new(kind: ModelKind, d: i64) -> Result<Model> {
        let field = field_spec(d)?.clone();
        let ok = match kind {
            ModelKind::ModularH2 => d == 0,
            ModelKind::BianchiH3 => d < 0,
            ModelKind::HilbertH2xH2 => d > 0,
        };
        if !ok {
            return Err(SpineError::ModelMismatch(d));
        }
        Ok(Model { kind, field })
    }

    pub fn modular() -> Model {
        Model::new(ModelKind::ModularH2, 0).expect("Q")
    }

    pub fn bianchi(d: i64) -> Result<Model> {
        Model::new(ModelKind::BianchiH3, d)
    }

    pub fn hilbert(d: i64) -> Result<Model> {
        Model::new(ModelKind::HilbertH2xH2, d)
    }

    pub fn d(&self) -> i64 {
        self.field.d
    }

    /// Real dimension of the symmetric space.
    pub fn dim(&self) -> usize {
        match self.kind {
            ModelKind::ModularH2 => 2,
            ModelKind::BianchiH3 => 3,
            ModelKind::HilbertH2xH2 => 4,
        }
    }

    /// Restricted weight count `N` of the flow form.
    pub fn weight_count(&self) -> usize {
        match self.kind {
            ModelKind::HilbertH2xH2 => 2,
            _ => 1,
        }
    }

    /// `|grad f| / f`, constant on the whole space.
    pub fn grad_norm_ratio(&self) -> f64 {
        match self.kind {
            ModelKind::HilbertH2xH2 => std::f64::consts::FRAC_1_SQRT_2,
            _ => 1.0,
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(D={})", self.kind.name(), self.d())
    }
}

/// A point of the symmetric space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelPoint {
    H2 { x: f64, y: f64 },
    H3 { z: Complex64, t: f64 },
    HH { x1: f64, y1: f64, x2: f64, y2: f64 },
}

impl ModelPoint {
    pub fn h2(x: f64, y: f64) -> ModelPoint {
        ModelPoint::H2 { x, y }
    }

    pub fn h3(re: f64, im: f64, t: f64) -> ModelPoint {
        ModelPoint::H3 {
            z: Complex64::new(re, im),
            t,
        }
    }

    pub fn hh(x1: f64, y1: f64, x2: f64, y2: f64) -> ModelPoint {
        ModelPoint::HH { x1, y1, x2, y2 }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelPoint::H2 { .. } => ModelKind::ModularH2,
            ModelPoint::H3 { .. } => ModelKind::BianchiH3,
            ModelPoint::HH { .. } => ModelKind::HilbertH2xH2,
        }
    }

    /// Flat coordinates: `[x, y]`, `[re, im, t]`, `[x1, y1, x2, y2]`.
    pub fn coords(&self) -> Vec<f64> {
        match *self {
            ModelPoint::H2 { x, y } => vec![x, y],
            ModelPoint::H3 { z, t } => vec![z.re, z.im, t],
            ModelPoint::HH { x1, y1, x2, y2 } => vec![x1, y1, x2, y2],
        }
    }

    pub fn from_coords(kind: ModelKind, c: &[f64]) -> Result<ModelPoint> {
        let p = match (kind, c.len()) {
            (ModelKind::ModularH2, 2) => ModelPoint::h2(c[0], c[1]),
            (ModelKind::BianchiH3, 3) => ModelPoint::h3(c[0], c[1], c[2]),
            (ModelKind::HilbertH2xH2, 4) => ModelPoint::hh(c[0], c[1], c[2], c[3]),
            _ => {
                return Err(SpineError::InvalidPoint(format!(
                    "{} coordinates for model {}",
                    c.len(),
                    kind.name()
                )))
            }
        };
        p.validate()?;
        Ok(p)
    }

    /// Parses comma-separated coordinates.
    pub fn parse(kind: ModelKind, s: &str) -> Result<ModelPoint> {
        let c: std::result::Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse::<f64>()).collect();
        let c = c.map_err(|_| SpineError::Parse(format!("bad point '{s}'")))?;
        ModelPoint::from_coords(kind, &c)
    }

    /// Indices of the height coordinates.
    pub fn height_axes(kind: ModelKind) -> &'static [usize] {
        match kind {
            ModelKind::ModularH2 => &[1],
            ModelKind::BianchiH3 => &[2],
            ModelKind::HilbertH2xH2 => &[1, 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.coords();
        if c.iter().any(|v| !v.is_finite()) {
            return Err(SpineError::InvalidPoint("non-finite coordinate".into()));
        }
        for &i in ModelPoint::height_axes(self.kind()) {
            if c[i] <= 0.0 {
                return Err(SpineError::InvalidPoint(format!("height coordinate {} <= 0", c[i])));
            }
        }
        Ok(())
    }

    /// Scale factors `s_i` such that `e_i / s_i` is orthonormal for the
    /// invariant metric at this point (so `g_ii = 1/s_i^2`).
    pub fn metric_scales(&self) -> Vec<f64> {
        match *self {
            ModelPoint::H2 { y, .. } => vec![y, y],
            ModelPoint::H3 { t, .. } => vec![t, t, t],
            ModelPoint::HH { y1, y2, .. } => vec![y1, y1, y2, y2],
        }
    }

    /// Riemannian inner product of two tangent vectors at this point.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.metric_scales()
            .iter()
            .zip(u.iter().zip(v))
            .map(|(s, (a, b))| a * b / (s * s))
            .sum()
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        self.inner(u, u).sqrt()
    }

    /// Distance in the invariant metric (product metric on `H x H`).
    pub fn hyp_dist(&self, other: &ModelPoint) -> f64 {
        let half_plane = |x: f64, y: f64, u: f64, v: f64| {
            let c = ((x - u).powi(2) + (y - v).powi(2)).sqrt() / (2.0 * (y * v).sqrt());
            2.0 * c.asinh()
        };
        match (*self, *other) {
            (ModelPoint::H2 { x, y }, ModelPoint::H2 { x: u, y: v }) => half_plane(x, y, u, v),
            (ModelPoint::H3 { z, t }, ModelPoint::H3 { z: w, t: s }) => {
                let c = ((z - w).norm_sqr() + (t - s).powi(2)).sqrt() / (2.0 * (t * s).sqrt());
                2.0 * c.asinh()
            }
            (ModelPoint::HH { x1, y1, x2, y2 }, ModelPoint::HH { x1: u1, y1: v1, x2: u2, y2: v2 }) => {
                half_plane(x1, y1, u1, v1).hypot(half_plane(x2, y2, u2, v2))
            }
            _ => f64::INFINITY,
        }
    }

    /// Moves along a tangent vector given in the orthonormal frame.
    pub fn offset(&self, v: &[f64], h: f64) -> Option<ModelPoint> {
        let c: Vec<f64> = self
            .coords()
            .iter()
            .zip(self.metric_scales())
            .zip(v)
            .map(|((x, s), d)| x + h * d * s)
            .collect();
        ModelPoint::from_coords(self.kind(), &c).ok()
    }

    /// Coordinate distance, for comparisons between nearby points.
    pub fn coord_dist(&self, other: &ModelPoint) -> f64 {
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

impl Serialize for ModelPoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let c = self.coords();
        let mut seq = s.serialize_seq(Some(c.len()))?;
        for v in c {
            seq.serialize_element(&v)?;
        }
        seq.end()
    }
}

/// Positive scale per cusp class. Every supported field has a single class;
/// `overrides` attach synthetic per-cusp scales for parameter experiments.
#[derive(Clone, Debug, PartialEq)]
pub struct HeightParams {
    pub scale: f64,
    pub overrides: HashMap<Cusp, f64>,
}

impl Default for HeightParams {
    fn default() -> Self {
        HeightParams::uniform(1.0)
    }
}

impl HeightParams {
    pub fn uniform(scale: f64) -> HeightParams {
        assert!(scale > 0.0, "scales must be positive");
        HeightParams {
            scale,
            overrides: HashMap::new(),
        }
    }

    pub fn with_override(mut self, c: Cusp, scale: f64) -> HeightParams {
        assert!(scale > 0.0, "scales must be positive");
        self.overrides.insert(c, scale);
        self
    }

    pub fn lambda(&self, c: &Cusp) -> f64 {
        if self.overrides.is_empty() {
            return self.scale;
        }
        self.overrides.get(c).copied().unwrap_or(self.scale)
    }

    pub fn max_lambda(&self) -> f64 {
        self.overrides.values().fold(self.scale, |m, &v| m.max(v))
    }
}

/// Embedded matrices of a group element, one per real/complex embedding.
#[derive(Clone, Copy, Debug)]
pub struct EmbeddedMatrix(pub [[Complex64; 4]; 2]);

impl EmbeddedMatrix {
    pub fn new(g: &GroupElement) -> EmbeddedMatrix {
        EmbeddedMatrix([g.embed(1), g.embed(2)])
    }
}

fn mobius_real(m: &[Complex64; 4], x: f64, y: f64) -> (f64, f64) {
    let z = Complex64::new(x, y);
    let w = (m[0] * z + m[1]) / (m[2] * z + m[3]);
    (w.re, w.im)
}

/// Isometric action of an embedded matrix on a point.
pub fn act_embedded(m: &EmbeddedMatrix, z: &ModelPoint) -> ModelPoint {
    match *z {
        ModelPoint::H2 { x, y } => {
            let (x, y) = mobius_real(&m.0[0], x, y);
            ModelPoint::H2 { x, y }
        }
        ModelPoint::H3 { z, t } => {
            let [a, b, c, d] = m.0[0];
            let czd = c * z + d;
            let den = czd.norm_sqr() + c.norm_sqr() * t * t;
            let nz = ((a * z + b) * czd.conj() + a * c.conj() * t * t) / den;
            ModelPoint::H3 { z: nz, t: t / den }
        }
        ModelPoint::HH { x1, y1, x2, y2 } => {
            let (x1, y1) = mobius_real(&m.0[0], x1, y1);
            let (x2, y2) = mobius_real(&m.0[1], x2, y2);
            ModelPoint::HH { x1, y1, x2, y2 }
        }
    }
}
