//! Cells of the spine: discovery by retraction and local exploration,
//! orbit classification, incidence, coverage checks, tables and export.
//!
//! A cell is the locus where exactly a given (literal) set of cusps is
//! maximal. Grid samples are retracted onto the spine and the resulting
//! tie sets are closed up by walking: one representative per orbit gets
//! its boundary traced and its star explored.

mod orbit;
mod walk;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use orbit::{canonical_form, symmetry_type, OrbitLabel, MAX_LABEL_ORDER};
pub use walk::{locate_crossing, Crossing};

use crate::cusp::Cusp;
use crate::error::{Result, SpineError};
use crate::heights::{HeightParams, Model, ModelKind, ModelPoint};
use crate::spine::{retract_map, solve_tie, tie_locus_dim, TieSet};
use walk::Ctx;

/// Upper bound on cells created while closing up a complex.
pub const MAX_CELLS: usize = 4000;
/// Vertex cap for a single boundary search.
const MAX_FACE_VERTICES: usize = 64;

/// Axis-aligned box of model coordinates; an axis with `lo == hi` is held
/// fixed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn new(kind: ModelKind, lo: Vec<f64>, hi: Vec<f64>) -> Result<Region> {
        let n = ModelPoint::from_coords(kind, &lo)?.coords().len();
        ModelPoint::from_coords(kind, &hi)?;
        if hi.len() != n || lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(SpineError::PreconditionViolated("region bounds are not ordered".into()));
        }
        Ok(Region { lo, hi })
    }

    /// Start region over a fundamental domain of the translations.
    pub fn default_for(model: &Model) -> Region {
        match model.kind {
            ModelKind::ModularH2 => Region {
                lo: vec![-0.5, 2.0],
                hi: vec![0.5, 2.0],
            },
            ModelKind::BianchiH3 => Region {
                lo: vec![0.0, 0.0, 2.0],
                hi: vec![0.5, 0.5, 2.0],
            },
            ModelKind::HilbertH2xH2 => Region {
                lo: vec![-0.5, 1.0, -0.5, 1.0],
                hi: vec![0.5, 1.0, 0.5, 1.0],
            },
        }
    }

    /// Parses `lo1,hi1,lo2,hi2,...`.
    pub fn parse(kind: ModelKind, s: &str) -> Result<Region> {
        let v: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| SpineError::Parse(format!("region '{s}': {e}"))))
            .collect::<Result<_>>()?;
        if v.len() % 2 != 0 {
            return Err(SpineError::Parse(format!("region '{s}' needs lo,hi pairs")));
        }
        let lo = v.iter().step_by(2).cloned().collect();
        let hi = v.iter().skip(1).step_by(2).cloned().collect();
        Region::new(kind, lo, hi)
    }

    fn axis(&self, i: usize, grid: usize) -> Vec<f64> {
        let (a, b) = (self.lo[i], self.hi[i]);
        if a == b {
            vec![a]
        } else if grid == 1 {
            vec![0.5 * (a + b)]
        } else {
            (0..grid).map(|k| a + (b - a) * k as f64 / (grid - 1) as f64).collect()
        }
    }

    /// Grid points in lexicographic order.
    pub fn grid(&self, kind: ModelKind, grid: usize) -> Vec<ModelPoint> {
        let axes: Vec<Vec<f64>> = (0..self.lo.len()).map(|i| self.axis(i, grid)).collect();
        let mut out = vec![Vec::new()];
        for ax in &axes {
            out = out
                .into_iter()
                .flat_map(|p: Vec<f64>| {
                    ax.iter().map(move |x| {
                        let mut q = p.clone();
                        q.push(*x);
                        q
                    })
                })
                .collect();
        }
        out.iter().filter_map(|c| ModelPoint::from_coords(kind, c).ok()).collect()
    }

    pub fn random_point(&self, kind: ModelKind, rng: &mut impl Rng) -> ModelPoint {
        let c: Vec<f64> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| if a == b { *a } else { rng.gen_range(*a..*b) })
            .collect();
        ModelPoint::from_coords(kind, &c).expect("region lies in the model")
    }
}

#[derive(Clone, Debug)]
pub struct Cell {
    pub id: usize,
    pub tie: TieSet,
    pub dim: usize,
    pub orbit: OrbitLabel,
    pub boundary_ids: Vec<usize>,
    pub coboundary_ids: Vec<usize>,
    /// False when a hyperbolic element of the group preserves the tie set.
    pub compact: bool,
    /// Boundary traced and star explored.
    pub explored: bool,
    /// Polyline or polygon approximating the cell.
    pub outline: Vec<ModelPoint>,
}

#[derive(Clone, Debug)]
pub struct SpineComplex {
    pub model: Model,
    pub params: HeightParams,
    pub tolerance: f64,
    pub region: Region,
    pub cells: Vec<Cell>,
    pub incidence_built: bool,
    /// Samples or walks that could not be resolved.
    pub failures: Vec<String>,
}

impl SpineComplex {
    pub fn empty(model: &Model, params: &HeightParams, region: Region, tol: f64) -> SpineComplex {
        SpineComplex {
            model: model.clone(),
            params: params.clone(),
            tolerance: tol,
            region,
            cells: Vec::new(),
            incidence_built: false,
            failures: Vec::new(),
        }
    }

    /// Number of cells per orbit label.
    pub fn orbit_summary(&self) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for c in &self.cells {
            *m.entry(c.orbit.key()).or_insert(0) += 1;
        }
        m
    }

    /// Distinct orbit labels, ordered by tie order then label.
    pub fn orbits(&self) -> Vec<OrbitLabel> {
        let mut v: Vec<OrbitLabel> = self.cells.iter().map(|c| c.orbit.clone()).collect();
        v.sort_by(|a, b| a.order().cmp(&b.order()).then_with(|| a.canonical_cusps.cmp(&b.canonical_cusps)));
        v.dedup();
        v
    }

    pub fn orbits_of_dim(&self, dim: usize) -> Vec<OrbitLabel> {
        let mut v: Vec<OrbitLabel> = self.cells.iter().filter(|c| c.dim == dim).map(|c| c.orbit.clone()).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn find(&self, cusps: &[Cusp]) -> Option<&Cell> {
        let mut k = cusps.to_vec();
        k.sort();
        self.cells.iter().find(|c| c.tie.cusps == k)
    }

    /// The explored cell of an orbit, or failing that its first cell.
    pub fn representative(&self, label: &OrbitLabel) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.explored && c.orbit == *label)
            .or_else(|| self.cells.iter().find(|c| c.orbit == *label))
    }

    /// Adds a cell for the tie set unless one with the same cusps exists.
    fn insert(&mut self, ts: TieSet) -> Option<usize> {
        if let Some(i) = self.cells.iter().position(|c| c.tie.cusps == ts.cusps) {
            return Some(i);
        }
        if ts.order() < 2 {
            return None;
        }
        let dim = match tie_locus_dim(&self.model, &self.params, &ts) {
            Ok(d) => d,
            Err(e) => {
                self.failures.push(format!("{:?}: {e}", ts.cusp_strings()));
                return None;
            }
        };
        let orbit = match classify_orbit(&self.model, &ts) {
            Ok(o) => o,
            Err(e) => {
                self.failures.push(format!("{:?}: {e}", ts.cusp_strings()));
                return None;
            }
        };
        let compact = !walk::has_unit_direction(&ts.cusps);
        self.cells.push(Cell {
            id: self.cells.len(),
            tie: ts,
            dim,
            orbit,
            boundary_ids: Vec::new(),
            coboundary_ids: Vec::new(),
            compact,
            explored: false,
            outline: Vec::new(),
        });
        Some(self.cells.len() - 1)
    }

    /// Sorts cells by (dimension descending, orbit, witness) and renumbers.
    fn assign_ids(&mut self) {
        let mut order: Vec<usize> = (0..self.cells.len()).collect();
        let key = |c: &Cell| c.tie.witness.coords();
        order.sort_by(|&a, &b| {
            let (ca, cb) = (&self.cells[a], &self.cells[b]);
            cb.dim
                .cmp(&ca.dim)
                .then_with(|| ca.orbit.cmp(&cb.orbit))
                .then_with(|| {
                    key(ca)
                        .iter()
                        .zip(key(cb).iter())
                        .map(|(x, y)| x.total_cmp(y))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
        });
        let mut new_id = vec![0; order.len()];
        for (k, &i) in order.iter().enumerate() {
            new_id[self.cells[i].id] = k;
        }
        let mut cells: Vec<Cell> = order.iter().map(|&i| self.cells[i].clone()).collect();
        for c in &mut cells {
            c.id = new_id[c.id];
            for b in c.boundary_ids.iter_mut().chain(c.coboundary_ids.iter_mut()) {
                *b = new_id[*b];
            }
            c.boundary_ids.sort();
            c.coboundary_ids.sort();
        }
        self.cells = cells;
    }

    fn ctx(&self) -> Ctx<'_> {
        Ctx {
            model: &self.model,
            params: &self.params,
            tol: self.tolerance,
        }
    }

    /// Traces boundaries of one cell per orbit and explores stars of the
    /// representatives and of every vertex, until nothing new appears.
    fn close_up(&mut self) {
        let mut explored: HashSet<OrbitLabel> = self.cells.iter().filter(|c| c.explored).map(|c| c.orbit.clone()).collect();
        let mut i = 0;
        while i < self.cells.len() && self.cells.len() < MAX_CELLS {
            let cell = self.cells[i].clone();
            let rep = !cell.explored && !explored.contains(&cell.orbit);
            if rep {
                explored.insert(cell.orbit.clone());
                self.cells[i].explored = true;
            }
            let mut found: Vec<TieSet> = Vec::new();
            let mut outline: Vec<ModelPoint> = Vec::new();
            if rep || cell.dim == 0 {
                found.extend(walk::star(&self.ctx(), &cell.tie));
            }
            if rep && cell.dim == 1 && cell.compact {
                let walks = walk::edge_walks(&self.ctx(), &cell.tie);
                for (k, w) in walks.into_iter().enumerate() {
                    if k == 0 {
                        outline.extend(w.path.iter().rev());
                    } else {
                        outline.extend(w.path.iter().skip(1));
                    }
                    match w.end {
                        Some(v) => found.push(v),
                        None => self.failures.push(format!("edge {:?}: walk did not end", cell.tie.cusp_strings())),
                    }
                }
            }
            if rep && cell.dim == 2 && cell.compact {
                let fb = walk::face_boundary(&self.ctx(), &cell.tie, MAX_FACE_VERTICES);
                if fb.vertices.is_empty() {
                    self.failures.push(format!("face {:?}: no boundary found", cell.tie.cusp_strings()));
                }
                outline = face_outline(&fb);
                found.extend(fb.vertices.iter().cloned());
                for (e, _, path) in fb.edges {
                    if let Some(j) = self.insert(e) {
                        if self.cells[j].outline.is_empty() {
                            self.cells[j].outline = path;
                        }
                    }
                }
            }
            if rep && (cell.dim >= 3 || (cell.dim == 2 && !cell.compact)) {
                found.extend(walk::probe(&self.ctx(), &cell.tie));
            }
            if !outline.is_empty() {
                self.cells[i].outline = outline;
            }
            for t in found {
                self.insert(t);
            }
            i += 1;
        }
        if self.cells.len() >= MAX_CELLS {
            self.failures.push(format!("cell cap {MAX_CELLS} reached"));
        }
    }
}

/// Chains the edge paths of a traced face into one closed outline.
fn face_outline(fb: &walk::FaceBoundary) -> Vec<ModelPoint> {
    let mut used = vec![false; fb.edges.len()];
    let mut out: Vec<ModelPoint> = Vec::new();
    let Some(first) = fb.edges.iter().position(|e| e.1.len() == 2) else {
        return out;
    };
    let mut cur = first;
    let mut forward = true;
    loop {
        used[cur] = true;
        let (_, ends, path) = &fb.edges[cur];
        if forward {
            out.extend(path.iter());
        } else {
            out.extend(path.iter().rev());
        }
        let at = if forward { ends[1] } else { ends[0] };
        let next = fb
            .edges
            .iter()
            .enumerate()
            .find(|(k, e)| !used[*k] && e.1.len() == 2 && (e.1[0] == at || e.1[1] == at));
        match next {
            Some((k, e)) => {
                forward = e.1[0] == at;
                cur = k;
            }
            None => break,
        }
    }
    out
}

/// Orbit label of a tie set.
pub fn classify_orbit(model: &Model, ts: &TieSet) -> Result<OrbitLabel> {
    if let Some(c) = ts.cusps.iter().find(|c| c.d() != model.d()) {
        return Err(SpineError::FieldMismatch(c.d(), model.d()));
    }
    canonical_form(&ts.cusps)
}

/// Retracts every grid sample onto the spine, refines the distinct active
/// sets and closes them up by walking.
pub fn discover_cells(
    model: &Model,
    params: &HeightParams,
    region: &Region,
    grid: usize,
    tol: f64,
) -> Result<SpineComplex> {
    if grid == 0 {
        return Err(SpineError::PreconditionViolated("grid must be positive".into()));
    }
    if region.lo.len() != model.dim() {
        return Err(SpineError::PreconditionViolated("region dimension does not match the model".into()));
    }
    let samples = region.grid(model.kind, grid);
    let retracted: Vec<Result<TieSet>> = samples
        .par_iter()
        .map(|z| {
            let r = retract_map(model, params, z, 1.0, tol)?;
            if r.active.order() < 2 {
                return Err(SpineError::CertificateViolated("retraction ended off the spine".into()));
            }
            solve_tie(model, params, &r.active.cusps, &r.active.witness, tol.max(1e-9))
        })
        .collect();
    let mut cx = SpineComplex::empty(model, params, region.clone(), tol);
    let mut seen: HashSet<Vec<Cusp>> = HashSet::new();
    for (z, r) in samples.iter().zip(retracted) {
        match r {
            Ok(ts) => {
                if seen.insert(ts.cusps.clone()) {
                    cx.insert(ts);
                }
            }
            Err(e) => cx.failures.push(format!("sample {:?}: {e}", z.coords())),
        }
    }
    cx.close_up();
    cx.assign_ids();
    Ok(cx)
}

/// Builds the complex generated by the given tie sets: their orbits, the
/// boundaries of one cell per orbit and the stars of all vertices met.
pub fn explore_from(model: &Model, params: &HeightParams, seeds: &[TieSet], tol: f64) -> SpineComplex {
    let mut cx = SpineComplex::empty(model, params, Region::default_for(model), tol);
    for s in seeds {
        cx.insert(s.clone());
    }
    cx.close_up();
    cx.assign_ids();
    cx
}

/// Fills boundary and coboundary lists: `b` bounds `a` when the tie set of
/// `b` strictly contains that of `a` and the locus of `a` can be entered
/// from the witness of `b`.
pub fn build_incidence(complex: &SpineComplex, tol: f64) -> SpineComplex {
    let mut cx = complex.clone();
    cx.tolerance = tol;
    let ctx = cx.ctx();
    let pairs: Vec<(usize, usize)> = cx
        .cells
        .par_iter()
        .enumerate()
        .flat_map_iter(|(a, ca)| {
            let ctx = &ctx;
            cx.cells.iter().enumerate().filter_map(move |(b, cb)| {
                let sub = cb.tie.order() > ca.tie.order()
                    && cb.dim < ca.dim
                    && ca.tie.cusps.iter().all(|c| cb.tie.contains(c));
                (sub && walk::in_closure(ctx, &ca.tie.cusps, &cb.tie)).then_some((a, b))
            })
        })
        .collect();
    let mut cells = cx.cells.clone();
    for c in &mut cells {
        c.boundary_ids.clear();
        c.coboundary_ids.clear();
    }
    for (a, b) in pairs {
        let (ia, ib) = (cells[a].id, cells[b].id);
        cells[a].boundary_ids.push(ib);
        cells[b].coboundary_ids.push(ia);
    }
    for c in &mut cells {
        c.boundary_ids.sort();
        c.coboundary_ids.sort();
    }
    cx.cells = cells;
    cx.incidence_built = true;
    cx
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverReport {
    pub samples: usize,
    pub matched: usize,
    pub fraction: f64,
    /// Labels met by samples but missing from the complex.
    pub unmatched_labels: Vec<String>,
    pub failures: usize,
}

/// Retracts random points of the complex's region and checks that each
/// lands in an orbit the complex knows about.
pub fn verify_cover(model: &Model, params: &HeightParams, complex: &SpineComplex, n_samples: usize, seed: u64) -> CoverReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<ModelPoint> = (0..n_samples).map(|_| complex.region.random_point(model.kind, &mut rng)).collect();
    let known: HashSet<OrbitLabel> = complex.cells.iter().map(|c| c.orbit.clone()).collect();
    let labels: Vec<Option<OrbitLabel>> = points
        .par_iter()
        .map(|z| {
            let r = retract_map(model, params, z, 1.0, complex.tolerance).ok()?;
            classify_orbit(model, &r.active).ok()
        })
        .collect();
    let mut matched = 0;
    let mut failures = 0;
    let mut unmatched = Vec::new();
    for l in labels {
        match l {
            Some(l) if known.contains(&l) => matched += 1,
            Some(l) => unmatched.push(l.key()),
            None => failures += 1,
        }
    }
    unmatched.sort();
    unmatched.dedup();
    CoverReport {
        samples: n_samples,
        matched,
        fraction: if n_samples == 0 { 1.0 } else { matched as f64 / n_samples as f64 },
        unmatched_labels: unmatched,
        failures,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableEntry {
    /// Same tie order.
    Star,
    Count(usize),
    /// Infinitely many modulo the stabilizer of a non-compact column cell.
    Infinite,
}

impl fmt::Display for TableEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableEntry::Star => write!(f, "*"),
            TableEntry::Count(n) => write!(f, "{n}"),
            TableEntry::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for TableEntry {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Incidence counts between orbit types. Below the diagonal (row order
/// larger): row cells in the boundary of one column cell. Above: row cells
/// having one column cell in their boundary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IncidenceTable {
    pub labels: Vec<String>,
    pub orders: Vec<usize>,
    pub entries: Vec<Vec<TableEntry>>,
}

impl IncidenceTable {
    pub fn get(&self, row: &OrbitLabel, col: &OrbitLabel) -> Option<TableEntry> {
        let r = self.labels.iter().position(|l| *l == row.key())?;
        let c = self.labels.iter().position(|l| *l == col.key())?;
        Some(self.entries[r][c])
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (i, l) in self.labels.iter().enumerate() {
            s.push_str(&format!("T{i} = {l}\n"));
        }
        s.push_str("row\\col");
        for i in 0..self.labels.len() {
            s.push_str(&format!("\tT{i}"));
        }
        s.push('\n');
        for (i, row) in self.entries.iter().enumerate() {
            s.push_str(&format!("T{i}"));
            for e in row {
                s.push_str(&format!("\t{e}"));
            }
            s.push('\n');
        }
        s
    }
}

pub fn incidence_table(complex: &SpineComplex) -> Result<IncidenceTable> {
    if !complex.incidence_built {
        return Err(SpineError::IncidenceMissing(complex.cells.first().map_or(0, |c| c.id)));
    }
    let labels = complex.orbits();
    let by_id: HashMap<usize, &Cell> = complex.cells.iter().map(|c| (c.id, c)).collect();
    let count = |ids: &[usize], label: &OrbitLabel| ids.iter().filter(|i| by_id[*i].orbit == *label).count();
    let mut entries = Vec::new();
    for row in &labels {
        let mut line = Vec::new();
        for col in &labels {
            let rep = complex.representative(col).expect("label comes from a cell");
            let e = if row.order() == col.order() {
                TableEntry::Star
            } else if row.order() > col.order() {
                if rep.compact {
                    TableEntry::Count(count(&rep.boundary_ids, row))
                } else {
                    let any = complex.cells.iter().filter(|c| c.orbit == *col).any(|c| count(&c.boundary_ids, row) > 0);
                    if any {
                        TableEntry::Infinite
                    } else {
                        TableEntry::Count(0)
                    }
                }
            } else {
                TableEntry::Count(count(&rep.coboundary_ids, row))
            };
            line.push(e);
        }
        entries.push(line);
    }
    Ok(IncidenceTable {
        labels: labels.iter().map(|l| l.key()).collect(),
        orders: labels.iter().map(|l| l.order()).collect(),
        entries,
    })
}

/// The incidence table with orbits merged into symmetry types (see
/// [`symmetry_type`]). Counts of merged row orbits are added up; each
/// column uses its first orbit.
pub fn type_table(table: &IncidenceTable, d: i64) -> Result<IncidenceTable> {
    let mut types: Vec<OrbitLabel> = Vec::new();
    let mut type_of: Vec<usize> = Vec::new();
    for l in &table.labels {
        let cusps = parse_label(l, d)?;
        let t = symmetry_type(&cusps)?;
        let k = match types.iter().position(|u| *u == t) {
            Some(k) => k,
            None => {
                types.push(t);
                types.len() - 1
            }
        };
        type_of.push(k);
    }
    let mut order: Vec<usize> = (0..types.len()).collect();
    order.sort_by(|&a, &b| {
        types[a]
            .order()
            .cmp(&types[b].order())
            .then_with(|| types[a].canonical_cusps.cmp(&types[b].canonical_cusps))
    });
    let mut entries = Vec::new();
    for &rt in &order {
        let mut line = Vec::new();
        for &ct in &order {
            let col = type_of.iter().position(|&t| t == ct).expect("type has an orbit");
            let mut acc = TableEntry::Count(0);
            for (r, _) in type_of.iter().enumerate().filter(|(_, t)| **t == rt) {
                acc = match (acc, table.entries[r][col]) {
                    (TableEntry::Star, _) | (_, TableEntry::Star) => TableEntry::Star,
                    (TableEntry::Infinite, _) | (_, TableEntry::Infinite) => TableEntry::Infinite,
                    (TableEntry::Count(a), TableEntry::Count(b)) => TableEntry::Count(a + b),
                };
            }
            line.push(acc);
        }
        entries.push(line);
    }
    Ok(IncidenceTable {
        labels: order.iter().map(|&k| types[k].key()).collect(),
        orders: order.iter().map(|&k| types[k].order()).collect(),
        entries,
    })
}

/// Cusps of a rendered label `{a, b, ...}`.
pub fn parse_label(s: &str, d: i64) -> Result<Vec<Cusp>> {
    let inner = s
        .trim()
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| SpineError::Parse(format!("label '{s}'")))?;
    inner.split(", ").map(|c| Cusp::parse(c, d)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Off,
}

impl FromStr for ExportFormat {
    type Err = SpineError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ExportFormat::Json),
            "off" => Ok(ExportFormat::Off),
            _ => Err(SpineError::Parse(format!("unknown format '{s}'"))),
        }
    }
}

#[derive(Serialize)]
struct ModelDescriptor {
    kind: &'static str,
    #[serde(rename = "D")]
    d: i64,
}

#[derive(Serialize)]
struct CellRecord<'a> {
    id: usize,
    cusps: Vec<String>,
    dim: usize,
    witness: Vec<f64>,
    height: f64,
    orbit: &'a OrbitLabel,
    boundary: &'a [usize],
}

#[derive(Serialize)]
struct ComplexRecord<'a> {
    model: ModelDescriptor,
    tolerance: f64,
    cells: Vec<CellRecord<'a>>,
}

/// JSON document describing the complex, newline-terminated.
pub fn complex_json(complex: &SpineComplex) -> String {
    let rec = ComplexRecord {
        model: ModelDescriptor {
            kind: complex.model.kind.name(),
            d: complex.model.d(),
        },
        tolerance: complex.tolerance,
        cells: complex
            .cells
            .iter()
            .map(|c| CellRecord {
                id: c.id,
                cusps: c.tie.cusp_strings(),
                dim: c.dim,
                witness: c.tie.witness.coords(),
                height: c.tie.height,
                orbit: &c.orbit,
                boundary: &c.boundary_ids,
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&rec).expect("serializable");
    s.push('\n');
    s
}

/// Three coordinates for drawing a point of the model.
fn project(z: &ModelPoint) -> [f64; 3] {
    match *z {
        ModelPoint::H2 { x, y } => [x, y, 0.0],
        ModelPoint::H3 { z, t } => [z.re, z.im, t],
        ModelPoint::HH { x1, y1, x2, y2 } => [x1, x2, 0.5 * (y1 / y2).ln()],
    }
}

fn subsample(path: &[ModelPoint], max_points: usize) -> Vec<ModelPoint> {
    if path.len() <= max_points.max(2) {
        return path.to_vec();
    }
    let n = max_points.max(2);
    (0..n).map(|k| path[k * (path.len() - 1) / (n - 1)]).collect()
}

/// OFF text: edges as degenerate two-vertex faces, traced 2-cells as
/// polygons, at most `resolution` points per outline.
pub fn complex_off(complex: &SpineComplex, resolution: usize) -> String {
    let mut verts: Vec<[f64; 3]> = Vec::new();
    let mut faces: Vec<Vec<usize>> = Vec::new();
    for c in &complex.cells {
        match c.dim {
            0 => verts.push(project(&c.tie.witness)),
            1 | 2 if c.outline.len() >= 2 => {
                let pts = subsample(&c.outline, resolution);
                let base = verts.len();
                verts.extend(pts.iter().map(project));
                if c.dim == 1 {
                    for k in 0..pts.len() - 1 {
                        faces.push(vec![base + k, base + k + 1]);
                    }
                } else {
                    faces.push((base..base + pts.len()).collect());
                }
            }
            _ => {}
        }
    }
    let mut s = format!("OFF\n{} {} 0\n", verts.len(), faces.len());
    for v in &verts {
        s.push_str(&format!("{} {} {}\n", v[0], v[1], v[2]));
    }
    for f in &faces {
        let idx: Vec<String> = f.iter().map(|i| i.to_string()).collect();
        s.push_str(&format!("{} {}\n", f.len(), idx.join(" ")));
    }
    s
}

pub fn export_complex(complex: &SpineComplex, format: ExportFormat, path: &Path) -> Result<()> {
    export_complex_with(complex, format, path, 64)
}

pub fn export_complex_with(complex: &SpineComplex, format: ExportFormat, path: &Path, resolution: usize) -> Result<()> {
    let text = match format {
        ExportFormat::Json => complex_json(complex),
        ExportFormat::Off => complex_off(complex, resolution),
    };
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}
