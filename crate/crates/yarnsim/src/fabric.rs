//! Woven-fabric discretization: crossing nodes, segments, DoF indexing,
//! woven patterns, and rest-state construction.
//!
//! Grid convention: node (i, j) sits at row i (weft index) and column j
//! (warp index), node id = i·cols + j. Warp yarns run along columns
//! (increasing i, Eulerian coordinate u = i·L at rest); weft yarns run
//! along rows (increasing j, Eulerian coordinate v = j·L at rest).
//! Interior nodes carry 5 DoFs (x, y, z, u, v); boundary nodes carry 3.

use crate::math::Vec3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FabricError {
    #[error("grid must be at least 3x3, got {rows}x{cols}")]
    TooSmall { rows: usize, cols: usize },
    #[error("inter-yarn spacing must be positive, got {0}")]
    NonPositiveSpacing(f64),
    #[error("material index {id} out of range ({count} materials)")]
    BadMaterial { id: usize, count: usize },
    #[error("material {id}: {field} must be positive, got {value}")]
    NonPositiveMaterial { id: usize, field: &'static str, value: f64 },
    #[error("{list} must have {expected} entries, got {got}")]
    BadYarnAssignment { list: &'static str, expected: usize, got: usize },
    #[error("interpolation coordinate {u} outside segment range [{lo}, {hi}]")]
    OutOfSegment { u: f64, lo: f64, hi: f64 },
}

/// Physical properties of one yarn type.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct YarnMaterial {
    /// linear density ρ (kg/m)
    pub density: f64,
    /// stretch modulus Y (N/m scale, enters forces as Y·π·R²)
    pub stretch: f64,
    /// bending modulus B
    pub bend: f64,
    /// yarn radius R (m)
    pub radius: f64,
}

impl YarnMaterial {
    fn validate(&self, id: usize) -> Result<(), FabricError> {
        let checks = [
            ("density", self.density),
            ("stretch", self.stretch),
            ("bend", self.bend),
            ("radius", self.radius),
        ];
        for (field, value) in checks {
            if !(value > 0.0) {
                return Err(FabricError::NonPositiveMaterial { id, field, value });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WovenPattern {
    Plain,
    Satin,
    Twill,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OverUnder {
    WarpOver,
    WeftOver,
}

impl WovenPattern {
    /// Which yarn lies on top where warp column `warp_j` crosses weft row
    /// `weft_i`. Plain alternates with (i+j) parity; twill is 2/2 with a
    /// diagonal offset; satin is 5-harness (4/1) with shift 2.
    pub fn over_under(self, warp_j: usize, weft_i: usize) -> OverUnder {
        let (i, j) = (weft_i as i64, warp_j as i64);
        let warp_on_top = match self {
            WovenPattern::Plain => (i + j) % 2 == 0,
            WovenPattern::Twill => (j - i).rem_euclid(4) < 2,
            WovenPattern::Satin => (j - 2 * i).rem_euclid(5) == 0,
        };
        if warp_on_top {
            OverUnder::WarpOver
        } else {
            OverUnder::WeftOver
        }
    }
}

/// Everything needed to build a cloth: grid size, pattern, yarn materials
/// and per-yarn assignment, rest spacing.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FabricSpec {
    pub rows: usize,
    pub cols: usize,
    pub pattern: WovenPattern,
    /// rest inter-yarn spacing L (m)
    pub spacing: f64,
    pub materials: Vec<YarnMaterial>,
    /// material id per warp column (len = cols)
    pub warp_materials: Vec<usize>,
    /// material id per weft row (len = rows)
    pub weft_materials: Vec<usize>,
}

impl FabricSpec {
    /// Uniform hybrid cloth: all warps of material 0, all wefts of material 1.
    pub fn hybrid(rows: usize, cols: usize, pattern: WovenPattern, spacing: f64, warp: YarnMaterial, weft: YarnMaterial) -> Self {
        FabricSpec {
            rows,
            cols,
            pattern,
            spacing,
            materials: vec![warp, weft],
            warp_materials: vec![0; cols],
            weft_materials: vec![1; rows],
        }
    }

    pub fn validate(&self) -> Result<(), FabricError> {
        if self.rows < 3 || self.cols < 3 {
            return Err(FabricError::TooSmall { rows: self.rows, cols: self.cols });
        }
        if !(self.spacing > 0.0) {
            return Err(FabricError::NonPositiveSpacing(self.spacing));
        }
        if self.warp_materials.len() != self.cols {
            return Err(FabricError::BadYarnAssignment {
                list: "warp_materials",
                expected: self.cols,
                got: self.warp_materials.len(),
            });
        }
        if self.weft_materials.len() != self.rows {
            return Err(FabricError::BadYarnAssignment {
                list: "weft_materials",
                expected: self.rows,
                got: self.weft_materials.len(),
            });
        }
        for (id, m) in self.materials.iter().enumerate() {
            m.validate(id)?;
        }
        for &id in self.warp_materials.iter().chain(self.weft_materials.iter()) {
            if id >= self.materials.len() {
                return Err(FabricError::BadMaterial { id, count: self.materials.len() });
            }
        }
        Ok(())
    }
}

/// Mapping from nodes to global DoF indices.
#[derive(Clone, Debug)]
pub struct DofLayout {
    pub rows: usize,
    pub cols: usize,
    /// starting index of each node's Lagrangian block
    base: Vec<u32>,
    /// (u, v) DoF indices for interior nodes
    eulerian: Vec<Option<(u32, u32)>>,
    /// total dimension l = 3·r·c + 2·(r−2)·(c−2)
    pub len: usize,
}

impl DofLayout {
    pub fn new(rows: usize, cols: usize) -> Self {
        let n = rows * cols;
        let mut base = Vec::with_capacity(n);
        let mut eulerian = Vec::with_capacity(n);
        let mut next = 0u32;
        for i in 0..rows {
            for j in 0..cols {
                base.push(next);
                next += 3;
                let interior = i > 0 && i + 1 < rows && j > 0 && j + 1 < cols;
                if interior {
                    eulerian.push(Some((next, next + 1)));
                    next += 2;
                } else {
                    eulerian.push(None);
                }
            }
        }
        DofLayout { rows, cols, base, eulerian, len: next as usize }
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        i * self.cols + j
    }

    #[inline]
    pub fn lagrangian(&self, node: usize) -> usize {
        self.base[node] as usize
    }

    /// Global index of the node's u DoF (None for boundary nodes).
    #[inline]
    pub fn u_dof(&self, node: usize) -> Option<usize> {
        self.eulerian[node].map(|(u, _)| u as usize)
    }

    #[inline]
    pub fn v_dof(&self, node: usize) -> Option<usize> {
        self.eulerian[node].map(|(_, v)| v as usize)
    }

    #[inline]
    pub fn is_interior(&self, node: usize) -> bool {
        self.eulerian[node].is_some()
    }

    pub fn node_count(&self) -> usize {
        self.base.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum YarnDir {
    Warp,
    Weft,
}

/// Span of yarn between two adjacent crossing nodes, oriented along
/// increasing Eulerian coordinate.
#[derive(Clone, Copy, Debug)]
pub struct Segment {
    pub n0: usize,
    pub n1: usize,
    pub dir: YarnDir,
    pub material: usize,
    /// minimum Eulerian separation for the yarn-collision penalty
    pub penalty_distance: f64,
}

/// Three consecutive nodes on one yarn: (prev, mid, next). Bending acts at
/// the shared node `mid`.
#[derive(Clone, Copy, Debug)]
pub struct Triple {
    pub prev: usize,
    pub mid: usize,
    pub next: usize,
    pub dir: YarnDir,
    pub material: usize,
}

/// Interior crossing node with its four yarn neighbors.
#[derive(Clone, Copy, Debug)]
pub struct Crossing {
    pub node: usize,
    pub warp_prev: usize,
    pub warp_next: usize,
    pub weft_prev: usize,
    pub weft_next: usize,
    pub warp_material: usize,
    pub weft_material: usize,
    /// +1 if the weft lies on top at this crossing, −1 otherwise; orients
    /// the contact normal from warp toward weft.
    pub orientation: f64,
    /// index into the per-crossing arrays (contact force storage)
    pub slot: usize,
    pub penalty_d_warp: [f64; 2],
    pub penalty_d_weft: [f64; 2],
}

/// Wind triangle (three node ids, consistently wound).
#[derive(Clone, Copy, Debug)]
pub struct Face(pub usize, pub usize, pub usize);

/// Immutable cloth description: spec, DoF layout, rest Eulerian coordinates
/// and precomputed element lists. Safe to share across threads.
#[derive(Clone, Debug)]
pub struct Fabric {
    pub spec: FabricSpec,
    pub layout: DofLayout,
    /// rest (u, v) per node; doubles as the frozen coordinates of boundary nodes
    pub rest_eulerian: Vec<(f64, f64)>,
    pub segments: Vec<Segment>,
    pub triples: Vec<Triple>,
    pub crossings: Vec<Crossing>,
    pub faces: Vec<Face>,
}

/// Dynamic state: generalized coordinates and velocities plus friction
/// anchor positions per node.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    /// friction anchors (ū, v̄) per node
    pub anchors: Vec<(f64, f64)>,
    pub time: f64,
}

impl Fabric {
    /// Position of a node (reads the Lagrangian block).
    #[inline]
    pub fn pos(&self, q: &[f64], node: usize) -> Vec3 {
        let b = self.layout.lagrangian(node);
        crate::math::V3([q[b], q[b + 1], q[b + 2]])
    }

    /// Eulerian u of a node: live DoF for interior nodes, rest constant for
    /// boundary nodes.
    #[inline]
    pub fn u_of(&self, q: &[f64], node: usize) -> f64 {
        match self.layout.u_dof(node) {
            Some(d) => q[d],
            None => self.rest_eulerian[node].0,
        }
    }

    #[inline]
    pub fn v_of(&self, q: &[f64], node: usize) -> f64 {
        match self.layout.v_dof(node) {
            Some(d) => q[d],
            None => self.rest_eulerian[node].1,
        }
    }

    /// Eulerian coordinate of `node` along the segment's own yarn direction.
    #[inline]
    pub fn eul_along(&self, q: &[f64], node: usize, dir: YarnDir) -> f64 {
        match dir {
            YarnDir::Warp => self.u_of(q, node),
            YarnDir::Weft => self.v_of(q, node),
        }
    }

    /// Eulerian DoF index along a direction (None when fixed).
    #[inline]
    pub fn eul_dof_along(&self, node: usize, dir: YarnDir) -> Option<usize> {
        match dir {
            YarnDir::Warp => self.layout.u_dof(node),
            YarnDir::Weft => self.layout.v_dof(node),
        }
    }

    pub fn segment_du(&self, q: &[f64], seg: &Segment) -> f64 {
        self.eul_along(q, seg.n1, seg.dir) - self.eul_along(q, seg.n0, seg.dir)
    }

    /// Smallest Eulerian gap over all segments; must stay positive.
    pub fn min_du(&self, q: &[f64]) -> f64 {
        self.segments
            .iter()
            .map(|s| self.segment_du(q, s))
            .fold(f64::INFINITY, f64::min)
    }

    /// Linear interpolation along a segment at Eulerian coordinate `u`.
    pub fn interpolate_point(&self, state: &State, seg: &Segment, u: f64) -> Result<Vec3, FabricError> {
        let u0 = self.eul_along(&state.q, seg.n0, seg.dir);
        let u1 = self.eul_along(&state.q, seg.n1, seg.dir);
        if u < u0 || u > u1 {
            return Err(FabricError::OutOfSegment { u, lo: u0, hi: u1 });
        }
        let x0 = self.pos(&state.q, seg.n0);
        let x1 = self.pos(&state.q, seg.n1);
        let du = u1 - u0;
        Ok(x0.scale((u1 - u) / du) + x1.scale((u - u0) / du))
    }

    /// Corner node ids (used for pinning and control forces).
    pub fn corners(&self) -> [usize; 4] {
        let (r, c) = (self.layout.rows, self.layout.cols);
        [
            self.layout.node(0, 0),
            self.layout.node(0, c - 1),
            self.layout.node(r - 1, 0),
            self.layout.node(r - 1, c - 1),
        ]
    }

    pub fn center_of_mass(&self, q: &[f64]) -> Vec3 {
        let n = self.layout.node_count();
        let mut acc = crate::math::V3([0.0, 0.0, 0.0]);
        for node in 0..n {
            acc = acc + self.pos(q, node);
        }
        acc.scale(1.0 / n as f64)
    }
}

/// Build the fabric description and its flat rest state.
///
/// Nodes are laid out on a regular grid with spacing L in the plane spanned
/// by `ex` (weft direction) and `ey` (warp direction) starting at `origin`.
pub fn build_fabric_oriented(
    spec: &FabricSpec,
    origin: Vec3,
    ex: Vec3,
    ey: Vec3,
) -> Result<(Fabric, State), FabricError> {
    spec.validate()?;
    let (r, c) = (spec.rows, spec.cols);
    let layout = DofLayout::new(r, c);
    let el = spec.spacing;

    let mut rest_eulerian = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            rest_eulerian.push((i as f64 * el, j as f64 * el));
        }
    }

    let penalty_d = |mid: OverUnder, other: OverUnder, radius: f64| -> f64 {
        if mid != other {
            2.0 * radius
        } else {
            4.0 * radius
        }
    };

    let mut segments = Vec::new();
    // warp segments run along columns
    for j in 0..c {
        let mat = spec.warp_materials[j];
        let radius = spec.materials[mat].radius;
        for i in 0..r - 1 {
            let o0 = spec.pattern.over_under(j, i);
            let o1 = spec.pattern.over_under(j, i + 1);
            segments.push(Segment {
                n0: layout.node(i, j),
                n1: layout.node(i + 1, j),
                dir: YarnDir::Warp,
                material: mat,
                penalty_distance: penalty_d(o0, o1, radius),
            });
        }
    }
    // weft segments run along rows
    for i in 0..r {
        let mat = spec.weft_materials[i];
        let radius = spec.materials[mat].radius;
        for j in 0..c - 1 {
            let o0 = spec.pattern.over_under(j, i);
            let o1 = spec.pattern.over_under(j + 1, i);
            segments.push(Segment {
                n0: layout.node(i, j),
                n1: layout.node(i, j + 1),
                dir: YarnDir::Weft,
                material: mat,
                penalty_distance: penalty_d(o0, o1, radius),
            });
        }
    }

    let mut triples = Vec::new();
    for j in 0..c {
        let mat = spec.warp_materials[j];
        for i in 1..r - 1 {
            triples.push(Triple {
                prev: layout.node(i - 1, j),
                mid: layout.node(i, j),
                next: layout.node(i + 1, j),
                dir: YarnDir::Warp,
                material: mat,
            });
        }
    }
    for i in 0..r {
        let mat = spec.weft_materials[i];
        for j in 1..c - 1 {
            triples.push(Triple {
                prev: layout.node(i, j - 1),
                mid: layout.node(i, j),
                next: layout.node(i, j + 1),
                dir: YarnDir::Weft,
                material: mat,
            });
        }
    }

    let mut crossings = Vec::new();
    let mut slot = 0;
    for i in 1..r - 1 {
        for j in 1..c - 1 {
            let warp_mat = spec.warp_materials[j];
            let weft_mat = spec.weft_materials[i];
            let rw = spec.materials[warp_mat].radius;
            let re = spec.materials[weft_mat].radius;
            let here = spec.pattern.over_under(j, i);
            let orientation = match here {
                OverUnder::WeftOver => 1.0,
                OverUnder::WarpOver => -1.0,
            };
            crossings.push(Crossing {
                node: layout.node(i, j),
                warp_prev: layout.node(i - 1, j),
                warp_next: layout.node(i + 1, j),
                weft_prev: layout.node(i, j - 1),
                weft_next: layout.node(i, j + 1),
                warp_material: warp_mat,
                weft_material: weft_mat,
                orientation,
                slot,
                penalty_d_warp: [
                    penalty_d(spec.pattern.over_under(j, i - 1), here, rw),
                    penalty_d(here, spec.pattern.over_under(j, i + 1), rw),
                ],
                penalty_d_weft: [
                    penalty_d(spec.pattern.over_under(j - 1, i), here, re),
                    penalty_d(here, spec.pattern.over_under(j + 1, i), re),
                ],
            });
            slot += 1;
        }
    }

    let mut faces = Vec::new();
    for i in 0..r - 1 {
        for j in 0..c - 1 {
            let a = layout.node(i, j);
            let b = layout.node(i + 1, j);
            let d = layout.node(i + 1, j + 1);
            let e = layout.node(i, j + 1);
            faces.push(Face(a, b, d));
            faces.push(Face(a, d, e));
        }
    }

    let mut q = vec![0.0; layout.len];
    for i in 0..r {
        for j in 0..c {
            let node = layout.node(i, j);
            let p = origin + ey.scale(i as f64 * el) + ex.scale(j as f64 * el);
            let b = layout.lagrangian(node);
            q[b] = p.0[0];
            q[b + 1] = p.0[1];
            q[b + 2] = p.0[2];
            if let (Some(u), Some(v)) = (layout.u_dof(node), layout.v_dof(node)) {
                q[u] = rest_eulerian[node].0;
                q[v] = rest_eulerian[node].1;
            }
        }
    }
    let anchors = rest_eulerian.clone();
    let state = State { qdot: vec![0.0; layout.len], q, anchors, time: 0.0 };
    let fabric = Fabric {
        spec: spec.clone(),
        layout,
        rest_eulerian,
        segments,
        triples,
        crossings,
        faces,
    };
    Ok((fabric, state))
}

/// Build with the default orientation: weft along +x, warp along +y, flat in
/// the z = 0 plane.
pub fn build_fabric(spec: &FabricSpec) -> Result<(Fabric, State), FabricError> {
    build_fabric_oriented(
        spec,
        crate::math::V3([0.0, 0.0, 0.0]),
        crate::math::V3([1.0, 0.0, 0.0]),
        crate::math::V3([0.0, 1.0, 0.0]),
    )
}
