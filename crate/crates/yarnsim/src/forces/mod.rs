//! Force models and system assembly.
//!
//! Each force lives in its own kernel, written generically over the scalar
//! type: the forward pass assembles f64 forces and Jacobians into the
//! implicit-Euler system, the adjoint re-runs the same kernels with dual
//! numbers. Assembly iterates elements in a fixed order and is
//! single-threaded, so results are bitwise reproducible.

pub mod angle;
pub mod bend;
pub mod collision;
pub mod control;
pub mod crossing;
pub mod friction;
pub mod gravity;
pub mod mass;
pub mod normal;
pub mod shear;
pub mod stretch;
pub mod wind;

use crate::fabric::{Crossing, Fabric, Face, Segment, State, Triple};
use crate::math::{Vec3, V3};
use crate::params::{ModelConsts, Params};
use crate::solver::BandMatrix;
use control::ControlForces;
use crossing::{CrossingConsts, CrossingInputs, CROSS_N};
use friction::FrictionConsts;
use normal::{prepare_normal, NormalPrep};
use shear::ShearConsts;
use thiserror::Error;
pub use wind::WindParams;

#[derive(Debug, Error)]
pub enum AssembleError {
    #[error("degenerate segment {n0}-{n1}: Eulerian gap {du:.3e}")]
    DegenerateSegment { n0: usize, n1: usize, du: f64 },
    #[error("coincident nodes {n0}-{n1}: spatial length {len:.3e}")]
    CoincidentNodes { n0: usize, n1: usize, len: f64 },
    #[error("shear at node {node}: {source}")]
    Shear { node: usize, source: shear::ShearAngleError },
    #[error("contact stencil at node {node}: {source}")]
    Stencil { node: usize, source: normal::DegenerateStencil },
    #[error("zero-area wind face ({0}, {1}, {2})")]
    ZeroAreaFace(usize, usize, usize),
}

/// Enables individual force models; the mass matrix itself is always
/// assembled, `inertia` gates only the quadratic-velocity force terms.
#[derive(Clone, Copy, Debug)]
pub struct ForceToggles {
    pub inertia: bool,
    pub stretch: bool,
    pub bend: bool,
    pub shear: bool,
    pub friction: bool,
    pub collision: bool,
    pub gravity: bool,
    pub wind: bool,
}

impl Default for ForceToggles {
    fn default() -> Self {
        ForceToggles {
            inertia: true,
            stretch: true,
            bend: true,
            shear: true,
            friction: true,
            collision: true,
            gravity: true,
            wind: true,
        }
    }
}

impl ForceToggles {
    pub fn conservative_only() -> Self {
        ForceToggles { friction: false, wind: false, ..Default::default() }
    }
}

/// External influences on a rollout.
#[derive(Clone, Debug)]
pub struct Externals {
    pub gravity: Vec3,
    pub wind: Option<WindParams>,
    pub control: Option<ControlForces>,
    pub toggles: ForceToggles,
}

impl Default for Externals {
    fn default() -> Self {
        Externals {
            gravity: V3([0.0, 0.0, -9.8]),
            wind: None,
            control: None,
            toggles: ForceToggles::default(),
        }
    }
}

pub struct AssemblyOut {
    pub a: BandMatrix,
    pub b: Vec<f64>,
    pub force: Vec<f64>,
    pub kinetic: f64,
    pub potential: f64,
    /// contact force per crossing (slot order)
    pub fn_values: Vec<f64>,
    pub min_du: f64,
}

// ---- local gather helpers (shared with the adjoint sweep) ----

pub(crate) fn seg_map(fab: &Fabric, seg: &Segment) -> [Option<usize>; 8] {
    let l0 = fab.layout.lagrangian(seg.n0);
    let l1 = fab.layout.lagrangian(seg.n1);
    [
        Some(l0),
        Some(l0 + 1),
        Some(l0 + 2),
        Some(l1),
        Some(l1 + 1),
        Some(l1 + 2),
        fab.eul_dof_along(seg.n0, seg.dir),
        fab.eul_dof_along(seg.n1, seg.dir),
    ]
}

pub(crate) fn seg_locals(fab: &Fabric, state: &State, seg: &Segment) -> ([f64; 8], [f64; 8]) {
    let map = seg_map(fab, seg);
    let mut q = [0.0; 8];
    let mut v = [0.0; 8];
    for (k, m) in map.iter().enumerate() {
        if let Some(d) = m {
            q[k] = state.q[*d];
            v[k] = state.qdot[*d];
        }
    }
    // fixed boundary Eulerian coordinates
    if map[6].is_none() {
        q[6] = fab.eul_along(&state.q, seg.n0, seg.dir);
    }
    if map[7].is_none() {
        q[7] = fab.eul_along(&state.q, seg.n1, seg.dir);
    }
    (q, v)
}

pub(crate) fn triple_map(fab: &Fabric, t: &Triple) -> [Option<usize>; 11] {
    let lp = fab.layout.lagrangian(t.prev);
    let lm = fab.layout.lagrangian(t.mid);
    let ln = fab.layout.lagrangian(t.next);
    [
        Some(lp),
        Some(lp + 1),
        Some(lp + 2),
        Some(lm),
        Some(lm + 1),
        Some(lm + 2),
        Some(ln),
        Some(ln + 1),
        Some(ln + 2),
        fab.eul_dof_along(t.prev, t.dir),
        fab.eul_dof_along(t.next, t.dir),
    ]
}

pub(crate) fn triple_locals(fab: &Fabric, state: &State, t: &Triple) -> [f64; 11] {
    let map = triple_map(fab, t);
    let mut q = [0.0; 11];
    for (k, m) in map.iter().enumerate() {
        if let Some(d) = m {
            q[k] = state.q[*d];
        }
    }
    if map[9].is_none() {
        q[9] = fab.eul_along(&state.q, t.prev, t.dir);
    }
    if map[10].is_none() {
        q[10] = fab.eul_along(&state.q, t.next, t.dir);
    }
    q
}

pub(crate) fn crossing_map(fab: &Fabric, cr: &Crossing) -> [Option<usize>; CROSS_N] {
    let nodes = [cr.node, cr.warp_prev, cr.warp_next, cr.weft_prev, cr.weft_next];
    let mut map = [None; CROSS_N];
    for (i, &n) in nodes.iter().enumerate() {
        let l = fab.layout.lagrangian(n);
        map[3 * i] = Some(l);
        map[3 * i + 1] = Some(l + 1);
        map[3 * i + 2] = Some(l + 2);
    }
    map[15] = fab.layout.u_dof(cr.node);
    map[16] = fab.layout.v_dof(cr.node);
    map[17] = fab.layout.u_dof(cr.warp_prev);
    map[18] = fab.layout.u_dof(cr.warp_next);
    map[19] = fab.layout.v_dof(cr.weft_prev);
    map[20] = fab.layout.v_dof(cr.weft_next);
    map
}

pub(crate) fn crossing_locals(fab: &Fabric, state: &State, cr: &Crossing) -> [f64; CROSS_N] {
    let mut q = [0.0; CROSS_N];
    let map = crossing_map(fab, cr);
    for (k, m) in map.iter().enumerate() {
        if let Some(d) = m {
            q[k] = state.q[*d];
        }
    }
    q[15] = fab.u_of(&state.q, cr.node);
    q[16] = fab.v_of(&state.q, cr.node);
    q[17] = fab.u_of(&state.q, cr.warp_prev);
    q[18] = fab.u_of(&state.q, cr.warp_next);
    q[19] = fab.v_of(&state.q, cr.weft_prev);
    q[20] = fab.v_of(&state.q, cr.weft_next);
    q
}

pub(crate) fn crossing_inputs_f64(
    fab: &Fabric,
    state: &State,
    cr: &Crossing,
    params: &Params,
) -> CrossingInputs<f64> {
    let q = crossing_locals(fab, state, cr);
    let (udot0, vdot0) = {
        let u = fab.layout.u_dof(cr.node).map(|d| state.qdot[d]).unwrap_or(0.0);
        let v = fab.layout.v_dof(cr.node).map(|d| state.qdot[d]).unwrap_or(0.0);
        (u, v)
    };
    CrossingInputs {
        x: [
            V3([q[0], q[1], q[2]]),
            V3([q[3], q[4], q[5]]),
            V3([q[6], q[7], q[8]]),
            V3([q[9], q[10], q[11]]),
            V3([q[12], q[13], q[14]]),
        ],
        u0: q[15],
        v0: q[16],
        u_wp: q[17],
        u_wn: q[18],
        v_vp: q[19],
        v_vn: q[20],
        udot0,
        vdot0,
        anchor_u: state.anchors[cr.node].0,
        anchor_v: state.anchors[cr.node].1,
        y_warp: params.stretches[cr.warp_material],
        b_warp: params.bends[cr.warp_material],
        rho_warp: params.densities[cr.warp_material],
        y_weft: params.stretches[cr.weft_material],
        b_weft: params.bends[cr.weft_material],
        rho_weft: params.densities[cr.weft_material],
        shear_s: params.shear_modulus,
        mu: params.friction_mu,
    }
}

/// Orientation reference for the contact normal: pattern sign times the
/// cross product of the warp and weft chords through the node.
pub(crate) fn crossing_reference(fab: &Fabric, state: &State, cr: &Crossing) -> Vec3 {
    let e_warp = fab.pos(&state.q, cr.warp_next) - fab.pos(&state.q, cr.warp_prev);
    let e_weft = fab.pos(&state.q, cr.weft_next) - fab.pos(&state.q, cr.weft_prev);
    e_warp.cross(e_weft).scale(cr.orientation)
}

pub(crate) fn crossing_prep(
    fab: &Fabric,
    state: &State,
    cr: &Crossing,
) -> Result<NormalPrep, AssembleError> {
    let pts = [
        fab.pos(&state.q, cr.node),
        fab.pos(&state.q, cr.warp_prev),
        fab.pos(&state.q, cr.warp_next),
        fab.pos(&state.q, cr.weft_prev),
        fab.pos(&state.q, cr.weft_next),
    ];
    prepare_normal(&pts, crossing_reference(fab, state, cr))
        .map_err(|source| AssembleError::Stencil { node: cr.node, source })
}

pub(crate) fn crossing_consts(
    fab: &Fabric,
    cr: &Crossing,
    params: &Params,
    mc: &ModelConsts,
    gravity: Vec3,
    toggles: &ForceToggles,
    prep: NormalPrep,
) -> CrossingConsts {
    let r_warp = params.radii[cr.warp_material];
    let r_weft = params.radii[cr.weft_material];
    let r_mean = 0.5 * (r_warp + r_weft);
    CrossingConsts {
        r_warp,
        r_weft,
        gravity,
        spacing: fab.spec.spacing,
        k_c: mc.k_c,
        d_warp: cr.penalty_d_warp,
        d_weft: cr.penalty_d_weft,
        friction: FrictionConsts { k_f: mc.k_f, d_f: mc.d_f, p: mc.p },
        shear: ShearConsts::new(fab.spec.spacing, r_mean, mc.lock_exp, mc.sigma),
        prep,
        enable_shear: toggles.shear,
        enable_friction: toggles.friction,
        enable_collision_in_fu: toggles.collision,
        enable_gravity_in_fu: toggles.gravity,
    }
}

pub(crate) fn face_map(fab: &Fabric, face: &Face) -> [usize; 9] {
    let a = fab.layout.lagrangian(face.0);
    let b = fab.layout.lagrangian(face.1);
    let c = fab.layout.lagrangian(face.2);
    [a, a + 1, a + 2, b, b + 1, b + 2, c, c + 1, c + 2]
}

/// Largest |i−j| over the coupled DoF pairs of any element.
pub fn system_bandwidth(fab: &Fabric) -> usize {
    let mut bw = 0usize;
    let mut update = |dofs: &[usize]| {
        let lo = dofs.iter().copied().min().unwrap();
        let hi = dofs.iter().copied().max().unwrap();
        bw = bw.max(hi - lo);
    };
    for seg in &fab.segments {
        let dofs: Vec<usize> = seg_map(fab, seg).iter().flatten().copied().collect();
        update(&dofs);
    }
    for t in &fab.triples {
        let dofs: Vec<usize> = triple_map(fab, t).iter().flatten().copied().collect();
        update(&dofs);
    }
    for cr in &fab.crossings {
        let dofs: Vec<usize> = crossing_map(fab, cr).iter().flatten().copied().collect();
        update(&dofs);
    }
    for f in &fab.faces {
        update(&face_map(fab, f));
    }
    bw
}

struct Sink<'a> {
    a: &'a mut BandMatrix,
    b: &'a mut [f64],
    force: &'a mut [f64],
    h: f64,
}

impl Sink<'_> {
    /// One element's contribution: the residual convention is
    /// A = M − h²·Jq − h·Jv and b = h·(F − Jv·q̇) + M·q̇.
    fn element<const N: usize>(
        &mut self,
        map: &[Option<usize>; N],
        v_loc: &[f64; N],
        f: Option<&[f64; N]>,
        jq: Option<&[[f64; N]; N]>,
        jv: Option<&[[f64; N]; N]>,
        mass: Option<&[[f64; N]; N]>,
    ) {
        let h = self.h;
        if let Some(f) = f {
            for (i, m) in map.iter().enumerate() {
                if let Some(gi) = m {
                    self.force[*gi] += f[i];
                    self.b[*gi] += h * f[i];
                }
            }
        }
        for (i, mi) in map.iter().enumerate() {
            let Some(gi) = *mi else { continue };
            for (j, mj) in map.iter().enumerate() {
                match mj {
                    Some(gj) => {
                        let mut acc = 0.0;
                        if let Some(m) = mass {
                            acc += m[i][j];
                            self.b[gi] += m[i][j] * v_loc[j];
                        }
                        if let Some(jq) = jq {
                            acc -= h * h * jq[i][j];
                        }
                        if let Some(jv) = jv {
                            acc -= h * jv[i][j];
                            self.b[gi] -= h * jv[i][j] * v_loc[j];
                        }
                        if acc != 0.0 {
                            self.a.add(gi, *gj, acc);
                        }
                    }
                    None => {
                        // fixed coordinate: no column, but the b-side mass
                        // term still sees its (zero) velocity — nothing to do
                    }
                }
            }
        }
    }
}

/// Assemble the implicit-Euler system at the current state.
pub fn assemble(
    fab: &Fabric,
    state: &State,
    params: &Params,
    mc: &ModelConsts,
    ext: &Externals,
    h: f64,
    frame: usize,
) -> Result<AssemblyOut, AssembleError> {
    let l = fab.layout.len;
    let bw = system_bandwidth(fab);
    let mut a = BandMatrix::zeros(l, bw, bw);
    let mut b = vec![0.0; l];
    let mut force = vec![0.0; l];
    let mut kinetic = 0.0;
    let mut potential = 0.0;
    let mut min_du = f64::INFINITY;
    let t = &ext.toggles;

    {
        let mut sink = Sink { a: &mut a, b: &mut b, force: &mut force, h };

        for seg in &fab.segments {
            let (q, v) = seg_locals(fab, state, seg);
            let du = q[7] - q[6];
            min_du = min_du.min(du);
            if du <= 1e-9 * fab.spec.spacing {
                return Err(AssembleError::DegenerateSegment { n0: seg.n0, n1: seg.n1, du });
            }
            let x0 = V3([q[0], q[1], q[2]]);
            let x1 = V3([q[3], q[4], q[5]]);
            let map = seg_map(fab, seg);
            let rho = params.densities[seg.material];

            // mass + quadratic-velocity forces
            let out = mass::seg_inertia_kernel(
                x0,
                x1,
                q[6],
                q[7],
                V3([v[0], v[1], v[2]]),
                V3([v[3], v[4], v[5]]),
                v[6],
                v[7],
                rho,
            );
            kinetic += out.kinetic;
            if t.inertia {
                sink.element(&map, &v, Some(&out.force), Some(&out.jq), Some(&out.jv), Some(&out.mass));
            } else {
                sink.element(&map, &v, None, None, None, Some(&out.mass));
            }

            if t.stretch {
                let len = (x1 - x0).norm();
                if len <= 1e-12 {
                    return Err(AssembleError::CoincidentNodes { n0: seg.n0, n1: seg.n1, len });
                }
                let stiff = params.stretches[seg.material]
                    * std::f64::consts::PI
                    * params.radii[seg.material].powi(2);
                let out = stretch::stretch_kernel(x0, x1, q[6], q[7], stiff);
                potential += out.energy;
                sink.element(&map, &v, Some(&out.force), Some(&out.jq), None, None);
            }
            if t.gravity {
                let out = gravity::gravity_kernel(x0, x1, q[6], q[7], rho, ext.gravity);
                potential += out.energy;
                sink.element(&map, &v, Some(&out.force), Some(&out.jq), None, None);
            }
            if t.collision {
                let out = collision::collision_kernel(
                    q[6],
                    q[7],
                    mc.k_c * fab.spec.spacing,
                    seg.penalty_distance,
                );
                potential += out.energy;
                let map2 = [map[6], map[7]];
                let v2 = [v[6], v[7]];
                sink.element(&map2, &v2, Some(&out.force), Some(&out.jq), None, None);
            }
        }

        if t.bend {
            for tr in &fab.triples {
                let q = triple_locals(fab, state, tr);
                let bend_c = params.bends[tr.material]
                    * std::f64::consts::PI
                    * params.radii[tr.material].powi(2);
                let out = bend::bend_kernel(
                    V3([q[0], q[1], q[2]]),
                    V3([q[3], q[4], q[5]]),
                    V3([q[6], q[7], q[8]]),
                    q[9],
                    q[10],
                    bend_c,
                );
                potential += out.energy;
                let map = triple_map(fab, tr);
                let v = [0.0; 11];
                sink.element(&map, &v, Some(&out.force), Some(&out.jq), None, None);
            }
        }
    }

    let mut fn_values = vec![0.0; fab.crossings.len()];
    if t.shear || t.friction {
        for cr in &fab.crossings {
            let prep = crossing_prep(fab, state, cr)?;
            let cc = crossing_consts(fab, cr, params, mc, ext.gravity, t, prep);
            let inp = crossing_inputs_f64(fab, state, cr, params);
            let out = crossing::crossing_kernel(&inp, &cc)
                .map_err(|source| AssembleError::Shear { node: cr.node, source })?;
            fn_values[cr.slot] = out.f_n;
            potential += out.shear_energy;
            let map = crossing_map(fab, cr);
            let mut sink = Sink { a: &mut a, b: &mut b, force: &mut force, h };
            // no velocity-dependent b correction needed beyond friction's
            // damping entries, handled explicitly below
            let v = [0.0; CROSS_N];
            sink.element(&map, &v, Some(&out.force), Some(&out.jq), None, None);
            if t.friction {
                // jv diag entries at (u0,u0), (v0,v0)
                if let Some(du) = map[15] {
                    a.add(du, du, -h * out.jv_u);
                    b[du] -= h * out.jv_u * state.qdot[du];
                }
                if let Some(dv) = map[16] {
                    a.add(dv, dv, -h * out.jv_v);
                    b[dv] -= h * out.jv_v * state.qdot[dv];
                }
            }
        }
    } else {
        // contact forces still wanted for anchors/diagnostics when shear and
        // friction are both off? keep zeros: nothing consumes them then.
    }

    if t.wind {
        if let Some(wp) = &ext.wind {
            let mut sink = Sink { a: &mut a, b: &mut b, force: &mut force, h };
            for face in &fab.faces {
                let x0 = fab.pos(&state.q, face.0);
                let x1 = fab.pos(&state.q, face.1);
                let x2 = fab.pos(&state.q, face.2);
                if (x1 - x0).cross(x2 - x0).norm() < 1e-16 {
                    return Err(AssembleError::ZeroAreaFace(face.0, face.1, face.2));
                }
                let vel = |n: usize| {
                    let l = fab.layout.lagrangian(n);
                    V3([state.qdot[l], state.qdot[l + 1], state.qdot[l + 2]])
                };
                let out = wind::wind_kernel(x0, x1, x2, vel(face.0), vel(face.1), vel(face.2), wp);
                let fm = face_map(fab, face);
                let map: [Option<usize>; 9] = std::array::from_fn(|k| Some(fm[k]));
                let mut v = [0.0; 9];
                for (k, d) in fm.iter().enumerate() {
                    v[k] = state.qdot[*d];
                }
                sink.element(&map, &v, Some(&out.force), None, Some(&out.jv), None);
            }
        }
    }

    if let Some(cf) = &ext.control {
        if cf.active(frame) {
            for (c, node) in fab.corners().into_iter().enumerate() {
                let f = cf.force(frame, c);
                let l0 = fab.layout.lagrangian(node);
                for k in 0..3 {
                    force[l0 + k] += f.0[k];
                    b[l0 + k] += h * f.0[k];
                }
            }
        }
    }

    Ok(AssemblyOut { a, b, force, kinetic, potential, fn_values, min_du })
}

/// Contact normal at an interior crossing (least-squares plane fit,
/// oriented from warp toward weft).
pub fn contact_normal(fab: &Fabric, state: &State, cr: &Crossing) -> Result<Vec3, AssembleError> {
    let prep = crossing_prep(fab, state, cr)?;
    let pts = [
        fab.pos(&state.q, cr.node),
        fab.pos(&state.q, cr.warp_prev),
        fab.pos(&state.q, cr.warp_next),
        fab.pos(&state.q, cr.weft_prev),
        fab.pos(&state.q, cr.weft_next),
    ];
    Ok(plane_normal_f64(&pts, &prep))
}

fn plane_normal_f64(pts: &[Vec3; 5], prep: &NormalPrep) -> Vec3 {
    normal::plane_normal(pts, prep)
}

/// Contact force F_n at an interior crossing of the current state.
pub fn contact_force(
    fab: &Fabric,
    state: &State,
    cr: &Crossing,
    params: &Params,
    mc: &ModelConsts,
    gravity: Vec3,
) -> Result<f64, AssembleError> {
    let prep = crossing_prep(fab, state, cr)?;
    let toggles = ForceToggles::default();
    let cc = crossing_consts(fab, cr, params, mc, gravity, &toggles, prep);
    let inp = crossing_inputs_f64(fab, state, cr, params);
    let out = crossing::crossing_kernel(&inp, &cc)
        .map_err(|source| AssembleError::Shear { node: cr.node, source })?;
    Ok(out.f_n)
}
