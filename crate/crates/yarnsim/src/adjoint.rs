//! Reverse-mode differentiation through the rollout.
//!
//! Each implicit-Euler step solves A·q̇₊ = b; writing the step as the
//! residual r = M·Δq̇ − h·(F + J_q·Δq + J_v·Δq̇) = 0 with Δq = h·q̇₊ and
//! Δq̇ = q̇₊ − q̇ₜ makes A = ∂r/∂q̇₊ exactly the assembled system matrix.
//! The sweep solves Aᵀλ = dL/dq̇₊ with the retained factorization, then
//! accumulates dL/dz −= λᵀ·∂r/∂z for every input z (previous state,
//! physical parameters, control forces) by re-running the force kernels
//! with dual numbers, one seeded direction at a time. Because the kernels
//! also emit the Jacobian entries that were assembled into A, the dual
//! parts capture the full dependence of both b and A on the inputs — no
//! hand-derived force Hessians.
//!
//! Friction anchors and obstacle projections are stop-gradient boundaries:
//! the sweep reads the recorded anchors and treats projected states as
//! pass-through.

use crate::fabric::{Fabric, State};
use crate::forces::crossing::{crossing_kernel, CrossingInputs, CROSS_N};
use crate::forces::{self, bend, collision, gravity, mass, stretch, wind, Externals};
use crate::integrator::{apply_pins, Constraints, SimOptions, StepError, StepTape, TapeEntry};
use crate::math::{Dual, Real, V3};
use crate::params::{ModelConsts, ParamKey, Params};
use crate::solver::BandLu;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GradError {
    #[error(transparent)]
    Step(#[from] StepError),
    #[error("non-finite gradient at step {step}")]
    NonFinite { step: usize },
    #[error("trajectory has {got} post-initial frames, loss needs {need}")]
    FrameMismatch { got: usize, need: usize },
}

/// Loss over a trajectory plus its gradient with respect to each frame's
/// generalized positions.
pub trait TrajectoryLoss {
    fn loss(&self, fab: &Fabric, traj: &[State]) -> Result<f64, GradError>;
    /// Adds dL/dq of frame `t` (1-based trajectory index) into `out`.
    fn add_grad_q(&self, fab: &Fabric, traj: &[State], t: usize, out: &mut [f64]);
}

/// Mean squared error (1/NT)·Σₙₜ‖qₙₜ − q̂ₙₜ‖² against a reference
/// trajectory; optionally over Lagrangian coordinates only.
pub struct MseLoss {
    /// reference generalized positions for frames 1..=T
    pub target: Vec<Vec<f64>>,
    pub lagrangian_only: bool,
}

impl MseLoss {
    fn weight(&self, fab: &Fabric) -> f64 {
        let n = fab.layout.node_count() as f64;
        let t = self.target.len() as f64;
        1.0 / (n * t)
    }
}

/// True for DoFs that participate in a Lagrangian-only loss.
fn is_lagrangian_dof(fab: &Fabric, dof: usize) -> bool {
    // Eulerian DoFs are the trailing 2 entries of interior nodes' 5-blocks;
    // walk the layout once instead of per-dof searches.
    for node in 0..fab.layout.node_count() {
        if let Some(u) = fab.layout.u_dof(node) {
            if dof == u || dof == u + 1 {
                return false;
            }
        }
    }
    true
}

impl TrajectoryLoss for MseLoss {
    fn loss(&self, fab: &Fabric, traj: &[State]) -> Result<f64, GradError> {
        if traj.len() < self.target.len() + 1 {
            return Err(GradError::FrameMismatch { got: traj.len() - 1, need: self.target.len() });
        }
        let w = self.weight(fab);
        let mut acc = 0.0;
        for (t, gt) in self.target.iter().enumerate() {
            let q = &traj[t + 1].q;
            for d in 0..q.len() {
                if !self.lagrangian_only || is_lagrangian_dof(fab, d) {
                    let diff = q[d] - gt[d];
                    acc += diff * diff;
                }
            }
        }
        Ok(w * acc)
    }

    fn add_grad_q(&self, fab: &Fabric, traj: &[State], t: usize, out: &mut [f64]) {
        if t == 0 || t > self.target.len() {
            return;
        }
        let w = self.weight(fab);
        let gt = &self.target[t - 1];
        let q = &traj[t].q;
        for d in 0..q.len() {
            if !self.lagrangian_only || is_lagrangian_dof(fab, d) {
                out[d] += 2.0 * w * (q[d] - gt[d]);
            }
        }
    }
}

/// Gradients of the loss with respect to every learnable input.
#[derive(Clone, Debug, Default)]
pub struct GradBundle {
    /// one entry per key of the parameter set, in key order
    pub params: Vec<f64>,
    /// flat (frame, corner, component) control-force gradient
    pub control: Option<Vec<f64>>,
}

/// dL/db = A⁻ᵀ·(dL/dq̇₊); the dL/dA contraction is applied on the fly as
/// −(dL/db)ᵢ·q̇ⱼ against structural nonzeros, never materialized.
pub fn solve_adjoint(factor: &BandLu, ghat: &[f64]) -> Vec<f64> {
    factor.solve_transpose(ghat)
}

struct Sweep<'a> {
    gq: &'a mut [f64],
    gv: &'a mut [f64],
    params: &'a mut [f64],
    keys: &'a [ParamKey],
    /// dL/d(anchor) per node, accumulated for the previous step
    ganchor: &'a mut [(f64, f64)],
}

impl Sweep<'_> {
    fn param_slot(&self, key: ParamKey) -> Option<usize> {
        self.keys.iter().position(|&k| k == key)
    }
}

#[derive(Clone, Copy)]
enum Dir {
    Q(usize),
    V(usize),
    Param(ParamKey),
    /// friction anchor of the crossing's own node (0 = u side, 1 = v side)
    Anchor(usize),
}

fn seed_const<const N: usize>(base: &[f64; N]) -> [Dual; N] {
    std::array::from_fn(|k| Dual::constant(base[k]))
}

/// λᵀ·(dual part of r_loc)
fn contract<const N: usize>(lam: &[f64; N], r: &[Dual; N]) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        acc += lam[i] * r[i].d;
    }
    acc
}

fn route<const N: usize>(
    sweep: &mut Sweep<'_>,
    map: &[Option<usize>; N],
    node: usize,
    dir: Dir,
    c: f64,
) {
    match dir {
        Dir::Q(i) => {
            if let Some(g) = map[i] {
                sweep.gq[g] -= c;
            }
        }
        Dir::V(i) => {
            if let Some(g) = map[i] {
                sweep.gv[g] -= c;
            }
        }
        Dir::Param(key) => {
            if let Some(slot) = sweep.param_slot(key) {
                sweep.params[slot] -= c;
            }
        }
        Dir::Anchor(axis) => {
            if axis == 0 {
                sweep.ganchor[node].0 -= c;
            } else {
                sweep.ganchor[node].1 -= c;
            }
        }
    }
}

fn gather<const N: usize>(src: &[f64], map: &[Option<usize>; N]) -> [f64; N] {
    let mut out = [0.0; N];
    for (k, m) in map.iter().enumerate() {
        if let Some(d) = m {
            out[k] = src[*d];
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn backward_segments(
    fab: &Fabric,
    st: &State,
    params: &Params,
    mc: &ModelConsts,
    ext: &Externals,
    h: f64,
    lambda: &[f64],
    dq: &[f64],
    dqd: &[f64],
    sweep: &mut Sweep<'_>,
) {
    let t = &ext.toggles;
    for seg in &fab.segments {
        let map = forces::seg_map(fab, seg);
        let lam = gather(lambda, &map);
        if lam.iter().all(|&x| x == 0.0) {
            continue;
        }
        let (q, v) = forces::seg_locals(fab, st, seg);
        let dq_loc = gather(dq, &map);
        let dqd_loc = gather(dqd, &map);
        let rho = params.densities[seg.material];
        let y = params.stretches[seg.material];
        let stiff_coeff = std::f64::consts::PI * params.radii[seg.material].powi(2);
        let kc_l = mc.k_c * fab.spec.spacing;

        let mut dirs: Vec<Dir> = Vec::with_capacity(20);
        for i in 0..8 {
            if map[i].is_some() {
                dirs.push(Dir::Q(i));
                dirs.push(Dir::V(i));
            }
        }
        dirs.push(Dir::Param(ParamKey::Density(seg.material)));
        if t.stretch {
            dirs.push(Dir::Param(ParamKey::Stretch(seg.material)));
        }

        for dir in dirs {
            let mut qd = seed_const(&q);
            let mut vd = seed_const(&v);
            let dq_d = seed_const(&dq_loc);
            let mut dqd_d = seed_const(&dqd_loc);
            let mut rho_d = Dual::constant(rho);
            let mut y_d = Dual::constant(y);
            match dir {
                Dir::Q(i) => qd[i].d = 1.0,
                Dir::V(i) => {
                    vd[i].d = 1.0;
                    dqd_d[i].d = -1.0;
                }
                Dir::Param(ParamKey::Density(_)) => rho_d.d = 1.0,
                Dir::Param(ParamKey::Stretch(_)) => y_d.d = 1.0,
                Dir::Param(_) => {}
                Dir::Anchor(_) => unreachable!(),
            }
            let x0 = V3([qd[0], qd[1], qd[2]]);
            let x1 = V3([qd[3], qd[4], qd[5]]);
            let mut r = [Dual::constant(0.0); 8];

            let out = mass::seg_inertia_kernel(
                x0,
                x1,
                qd[6],
                qd[7],
                V3([vd[0], vd[1], vd[2]]),
                V3([vd[3], vd[4], vd[5]]),
                vd[6],
                vd[7],
                rho_d,
            );
            for i in 0..8 {
                for j in 0..8 {
                    r[i] += out.mass[i][j] * dqd_d[j];
                }
            }
            if t.inertia {
                for i in 0..8 {
                    let mut acc = out.force[i];
                    for j in 0..8 {
                        acc += out.jq[i][j] * dq_d[j] + out.jv[i][j] * dqd_d[j];
                    }
                    r[i] -= acc.scale(h);
                }
            }
            if t.stretch {
                let sout = stretch::stretch_kernel(x0, x1, qd[6], qd[7], y_d.scale(stiff_coeff));
                for i in 0..8 {
                    let mut acc = sout.force[i];
                    for j in 0..8 {
                        acc += sout.jq[i][j] * dq_d[j];
                    }
                    r[i] -= acc.scale(h);
                }
            }
            if t.gravity {
                let gout = gravity::gravity_kernel(
                    x0,
                    x1,
                    qd[6],
                    qd[7],
                    rho_d,
                    V3::from_f64(ext.gravity.0),
                );
                for i in 0..8 {
                    let mut acc = gout.force[i];
                    for j in 0..8 {
                        acc += gout.jq[i][j] * dq_d[j];
                    }
                    r[i] -= acc.scale(h);
                }
            }
            if t.collision {
                let cout = collision::collision_kernel(
                    qd[6],
                    qd[7],
                    Dual::constant(kc_l),
                    Dual::constant(seg.penalty_distance),
                );
                for (li, i) in [(0usize, 6usize), (1, 7)] {
                    let mut acc = cout.force[li];
                    for (lj, j) in [(0usize, 6usize), (1, 7)] {
                        acc += cout.jq[li][lj] * dq_d[j];
                    }
                    r[i] -= acc.scale(h);
                }
            }
            route(sweep, &map, 0, dir, contract(&lam, &r));
        }
    }
}

fn backward_bends(
    fab: &Fabric,
    st: &State,
    params: &Params,
    h: f64,
    lambda: &[f64],
    dq: &[f64],
    sweep: &mut Sweep<'_>,
) {
    for tr in &fab.triples {
        let map = forces::triple_map(fab, tr);
        let lam = gather(lambda, &map);
        if lam.iter().all(|&x| x == 0.0) {
            continue;
        }
        let q = forces::triple_locals(fab, st, tr);
        let dq_loc = gather(dq, &map);
        let bcoef = std::f64::consts::PI * params.radii[tr.material].powi(2);
        let b_val = params.bends[tr.material];

        let mut dirs: Vec<Dir> = Vec::with_capacity(12);
        for i in 0..11 {
            if map[i].is_some() {
                dirs.push(Dir::Q(i));
            }
        }
        dirs.push(Dir::Param(ParamKey::Bend(tr.material)));

        for dir in dirs {
            let mut qd = seed_const(&q);
            let dq_d = seed_const(&dq_loc);
            let mut b_d = Dual::constant(b_val);
            match dir {
                Dir::Q(i) => qd[i].d = 1.0,
                Dir::Param(_) => b_d.d = 1.0,
                Dir::V(_) | Dir::Anchor(_) => unreachable!(),
            }
            let out = bend::bend_kernel(
                V3([qd[0], qd[1], qd[2]]),
                V3([qd[3], qd[4], qd[5]]),
                V3([qd[6], qd[7], qd[8]]),
                qd[9],
                qd[10],
                b_d.scale(bcoef),
            );
            let mut r = [Dual::constant(0.0); 11];
            for i in 0..11 {
                let mut acc = out.force[i];
                for j in 0..11 {
                    acc += out.jq[i][j] * dq_d[j];
                }
                r[i] -= acc.scale(h);
            }
            route(sweep, &map, 0, dir, contract(&lam, &r));
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn backward_crossings(
    fab: &Fabric,
    st: &State,
    params: &Params,
    mc: &ModelConsts,
    ext: &Externals,
    h: f64,
    lambda: &[f64],
    dq: &[f64],
    dqd: &[f64],
    fn_sens: &[f64],
    sweep: &mut Sweep<'_>,
) -> Result<(), StepError> {
    let t = &ext.toggles;
    if !(t.shear || t.friction) {
        return Ok(());
    }
    for cr in &fab.crossings {
        let map = forces::crossing_map(fab, cr);
        let lam = gather(lambda, &map);
        let fsens = fn_sens[cr.slot];
        if lam.iter().all(|&x| x == 0.0) && fsens == 0.0 {
            continue;
        }
        let prep = forces::crossing_prep(fab, st, cr)
            .map_err(|source| StepError::Assemble { time: st.time, source })?;
        let cc = forces::crossing_consts(fab, cr, params, mc, ext.gravity, t, prep);
        let base = forces::crossing_inputs_f64(fab, st, cr, params);
        let q = forces::crossing_locals(fab, st, cr);
        let dq_loc = gather(dq, &map);
        let dqd_loc = gather(dqd, &map);

        let mut dirs: Vec<Dir> = Vec::with_capacity(32);
        for i in 0..CROSS_N {
            if map[i].is_some() {
                dirs.push(Dir::Q(i));
            }
        }
        if t.friction {
            dirs.push(Dir::V(15));
            dirs.push(Dir::V(16));
            dirs.push(Dir::Anchor(0));
            dirs.push(Dir::Anchor(1));
        }
        dirs.push(Dir::Param(ParamKey::Stretch(cr.warp_material)));
        dirs.push(Dir::Param(ParamKey::Bend(cr.warp_material)));
        dirs.push(Dir::Param(ParamKey::Density(cr.warp_material)));
        if cr.weft_material != cr.warp_material {
            dirs.push(Dir::Param(ParamKey::Stretch(cr.weft_material)));
            dirs.push(Dir::Param(ParamKey::Bend(cr.weft_material)));
            dirs.push(Dir::Param(ParamKey::Density(cr.weft_material)));
        }
        if t.shear {
            dirs.push(Dir::Param(ParamKey::Shear));
        }
        if t.friction {
            dirs.push(Dir::Param(ParamKey::Mu));
        }

        for dir in dirs {
            let mut qd = seed_const(&q);
            let dq_d = seed_const(&dq_loc);
            let mut dqd_d = seed_const(&dqd_loc);
            let mut udot = Dual::constant(base.udot0);
            let mut vdot = Dual::constant(base.vdot0);
            let mut anchor_u = Dual::constant(base.anchor_u);
            let mut anchor_v = Dual::constant(base.anchor_v);
            let mut y_w = Dual::constant(base.y_warp);
            let mut b_w = Dual::constant(base.b_warp);
            let mut rho_w = Dual::constant(base.rho_warp);
            let mut y_v = Dual::constant(base.y_weft);
            let mut b_v = Dual::constant(base.b_weft);
            let mut rho_v = Dual::constant(base.rho_weft);
            let mut s_d = Dual::constant(base.shear_s);
            let mut mu_d = Dual::constant(base.mu);
            match dir {
                Dir::Q(i) => qd[i].d = 1.0,
                Dir::V(15) => {
                    udot.d = 1.0;
                    dqd_d[15].d = -1.0;
                }
                Dir::V(16) => {
                    vdot.d = 1.0;
                    dqd_d[16].d = -1.0;
                }
                Dir::V(_) => unreachable!(),
                Dir::Anchor(0) => anchor_u.d = 1.0,
                Dir::Anchor(_) => anchor_v.d = 1.0,
                Dir::Param(key) => match key {
                    ParamKey::Stretch(m) => {
                        if m == cr.warp_material {
                            y_w.d = 1.0;
                        }
                        if m == cr.weft_material {
                            y_v.d = 1.0;
                        }
                    }
                    ParamKey::Bend(m) => {
                        if m == cr.warp_material {
                            b_w.d = 1.0;
                        }
                        if m == cr.weft_material {
                            b_v.d = 1.0;
                        }
                    }
                    ParamKey::Density(m) => {
                        if m == cr.warp_material {
                            rho_w.d = 1.0;
                        }
                        if m == cr.weft_material {
                            rho_v.d = 1.0;
                        }
                    }
                    ParamKey::Shear => s_d.d = 1.0,
                    ParamKey::Mu => mu_d.d = 1.0,
                },
            }
            let inp = CrossingInputs::<Dual> {
                x: [
                    V3([qd[0], qd[1], qd[2]]),
                    V3([qd[3], qd[4], qd[5]]),
                    V3([qd[6], qd[7], qd[8]]),
                    V3([qd[9], qd[10], qd[11]]),
                    V3([qd[12], qd[13], qd[14]]),
                ],
                u0: qd[15],
                v0: qd[16],
                u_wp: qd[17],
                u_wn: qd[18],
                v_vp: qd[19],
                v_vn: qd[20],
                udot0: udot,
                vdot0: vdot,
                anchor_u,
                anchor_v,
                y_warp: y_w,
                b_warp: b_w,
                rho_warp: rho_w,
                y_weft: y_v,
                b_weft: b_v,
                rho_weft: rho_v,
                shear_s: s_d,
                mu: mu_d,
            };
            let out = crossing_kernel(&inp, &cc).map_err(|source| StepError::Assemble {
                time: st.time,
                source: forces::AssembleError::Shear { node: cr.node, source },
            })?;
            let mut r = [Dual::constant(0.0); CROSS_N];
            for i in 0..CROSS_N {
                let mut acc = out.force[i];
                for j in 0..CROSS_N {
                    acc += out.jq[i][j] * dq_d[j];
                }
                r[i] -= acc.scale(h);
            }
            // friction damping entries (diagonal J_v)
            r[15] -= (out.jv_u * dqd_d[15]).scale(h);
            r[16] -= (out.jv_v * dqd_d[16]).scale(h);
            // dL/dz = −λᵀ∂r/∂z + (dL/dF_n)·∂F_n/∂z; the second term carries
            // the anchor-drag rule's dependence on this step's contact force
            let c = contract(&lam, &r) - fsens * out.f_n.d;
            route(sweep, &map, cr.node, dir, c);
        }
    }
    Ok(())
}

fn backward_wind(
    fab: &Fabric,
    st: &State,
    ext: &Externals,
    h: f64,
    lambda: &[f64],
    dqd: &[f64],
    sweep: &mut Sweep<'_>,
) {
    let Some(wp) = &ext.wind else { return };
    if !ext.toggles.wind {
        return;
    }
    for face in &fab.faces {
        let fm = forces::face_map(fab, face);
        let map: [Option<usize>; 9] = std::array::from_fn(|k| Some(fm[k]));
        let lam = gather(lambda, &map);
        if lam.iter().all(|&x| x == 0.0) {
            continue;
        }
        let mut q = [0.0; 9];
        let mut v = [0.0; 9];
        for (k, d) in fm.iter().enumerate() {
            q[k] = st.q[*d];
            v[k] = st.qdot[*d];
        }
        let dqd_loc = gather(dqd, &map);
        for dir_kind in 0..2 {
            for i in 0..9 {
                let mut qq = seed_const(&q);
                let mut vv = seed_const(&v);
                let mut dd = seed_const(&dqd_loc);
                if dir_kind == 0 {
                    qq[i].d = 1.0;
                } else {
                    vv[i].d = 1.0;
                    dd[i].d = -1.0;
                }
                let out = wind::wind_kernel(
                    V3([qq[0], qq[1], qq[2]]),
                    V3([qq[3], qq[4], qq[5]]),
                    V3([qq[6], qq[7], qq[8]]),
                    V3([vv[0], vv[1], vv[2]]),
                    V3([vv[3], vv[4], vv[5]]),
                    V3([vv[6], vv[7], vv[8]]),
                    wp,
                );
                let mut r = [Dual::constant(0.0); 9];
                for a in 0..9 {
                    let mut acc = out.force[a];
                    for b in 0..9 {
                        acc += out.jv[a][b] * dd[b];
                    }
                    r[a] -= acc.scale(h);
                }
                let dir = if dir_kind == 0 { Dir::Q(i) } else { Dir::V(i) };
                route(sweep, &map, 0, dir, contract(&lam, &r));
            }
        }
    }
}

/// One step of the reverse sweep. `gq`/`gv` enter as dL/d(state after the
/// step) and leave as dL/d(state before it); parameter and control-force
/// gradients accumulate in place.
#[allow(clippy::too_many_arguments)]
pub fn backprop_step(
    fab: &Fabric,
    entry: &TapeEntry,
    q_next: &[f64],
    params: &Params,
    mc: &ModelConsts,
    ext: &Externals,
    cons: &Constraints,
    opts: &SimOptions,
    gq: &mut Vec<f64>,
    gv: &mut Vec<f64>,
    ganchor: &mut Vec<(f64, f64)>,
    param_grads: &mut [f64],
    keys: &[ParamKey],
    mut control_grads: Option<&mut [f64]>,
) -> Result<(), StepError> {
    let l = fab.layout.len;
    let h = opts.h;
    let st = State {
        q: entry.q.clone(),
        qdot: entry.qdot.clone(),
        anchors: entry.anchors.clone(),
        time: entry.time,
    };

    // Adjoint of the smooth anchor-drag update that closed this step:
    // ā' = u₊ − s·tanh((u₊ − ā)/s) with s = μ·F_n/k_f. dL/dā' flows into
    // dL/du₊, dL/dā (previous step's anchor), and the slip-distance paths
    // (μ directly, F_n back into this step's crossing element).
    let mut fn_sens = vec![0.0; fab.crossings.len()];
    let mut ganchor_prev = ganchor.clone();
    if ext.toggles.friction {
        let mu = params.friction_mu;
        let mu_slot = keys.iter().position(|&k| k == ParamKey::Mu);
        for cr in &fab.crossings {
            let f_n = entry.fn_values[cr.slot];
            let slip = mu * f_n / mc.k_f;
            let (ga_u, ga_v) = ganchor[cr.node];
            let u_next = fab.u_of(q_next, cr.node);
            let v_next = fab.v_of(q_next, cr.node);
            let (au, av) = entry.anchors[cr.node];
            let mut sens = 0.0;
            let mut pass = [0.0; 2];
            for (axis, (g, coord, anchor, dof)) in [
                (ga_u, u_next, au, fab.layout.u_dof(cr.node)),
                (ga_v, v_next, av, fab.layout.v_dof(cr.node)),
            ]
            .into_iter()
            .enumerate()
            {
                if g == 0.0 {
                    continue;
                }
                if slip <= 0.0 {
                    // ā' = u₊ exactly
                    if let Some(d) = dof {
                        gq[d] += g;
                    }
                    continue;
                }
                let x = (coord - anchor) / slip;
                let t = x.tanh();
                let sech2 = 1.0 - t * t;
                if let Some(d) = dof {
                    gq[d] += g * (1.0 - sech2);
                }
                pass[axis] = g * sech2;
                // ∂ā'/∂s = x·sech² − tanh
                let dslip = g * (x * sech2 - t);
                if let Some(slot) = mu_slot {
                    param_grads[slot] += dslip * f_n / mc.k_f;
                }
                sens += dslip * mu / mc.k_f;
            }
            ganchor_prev[cr.node] = (pass[0], pass[1]);
            fn_sens[cr.slot] = sens;
        }
    }

    // dL/dq̇₊ = gv + h·gq (velocity feeds both the solve and the position update)
    let mut ghat = vec![0.0; l];
    for i in 0..l {
        ghat[i] = gv[i] + h * gq[i];
    }

    let pinned = cons.pinned_dofs(fab);
    let mut lambda = match &entry.factor {
        Some(f) => solve_adjoint(f, &ghat),
        None => {
            let out = forces::assemble(fab, &st, params, mc, ext, h, entry.frame)
                .map_err(|source| StepError::Assemble { time: entry.time, source })?;
            let mut a = out.a;
            let mut b = out.b;
            apply_pins(&mut a, &mut b, &pinned);
            let f = a
                .factor()
                .map_err(|source| StepError::Solve { time: entry.time, source })?;
            solve_adjoint(&f, &ghat)
        }
    };
    for &d in &pinned {
        lambda[d] = 0.0;
    }

    // Δq = h·q̇₊, Δq̇ = q̇₊ − q̇ₜ
    let dq: Vec<f64> = entry.qdot_next.iter().map(|&x| h * x).collect();
    let dqd: Vec<f64> =
        entry.qdot_next.iter().zip(&entry.qdot).map(|(a, b)| a - b).collect();

    // position pass-through: q₊ = qₜ + h·q̇₊ ⇒ dL/dqₜ starts at gq
    let mut gq_new = gq.clone();
    let mut gv_new = vec![0.0; l];
    {
        let mut sweep = Sweep {
            gq: &mut gq_new,
            gv: &mut gv_new,
            params: param_grads,
            keys,
            ganchor: &mut ganchor_prev,
        };
        backward_segments(fab, &st, params, mc, ext, h, &lambda, &dq, &dqd, &mut sweep);
        if ext.toggles.bend {
            backward_bends(fab, &st, params, h, &lambda, &dq, &mut sweep);
        }
        backward_crossings(
            fab, &st, params, mc, ext, h, &lambda, &dq, &dqd, &fn_sens, &mut sweep,
        )?;
        backward_wind(fab, &st, ext, h, &lambda, &dqd, &mut sweep);
    }

    // control forces enter b linearly: r = −h·F_ctrl ⇒ dL/dF = +h·λ
    if let (Some(cg), Some(cf)) = (control_grads.as_deref_mut(), ext.control.as_ref()) {
        if cf.active(entry.frame) {
            for (c, node) in fab.corners().into_iter().enumerate() {
                let l0 = fab.layout.lagrangian(node);
                for k in 0..3 {
                    cg[entry.frame * 12 + c * 3 + k] += h * lambda[l0 + k];
                }
            }
        }
    }

    *gq = gq_new;
    *gv = gv_new;
    *ganchor = ganchor_prev;
    Ok(())
}

/// Full-rollout reverse sweep: loss value and gradients for the configured
/// parameter keys (and control forces when requested).
#[allow(clippy::too_many_arguments)]
pub fn gradient(
    fab: &Fabric,
    params: &Params,
    mc: &ModelConsts,
    ext: &Externals,
    cons: &Constraints,
    opts: &SimOptions,
    tape: &StepTape,
    traj: &[State],
    loss: &dyn TrajectoryLoss,
    keys: &[ParamKey],
    want_control: bool,
) -> Result<(f64, GradBundle), GradError> {
    let l = fab.layout.len;
    let steps = tape.entries.len();
    let loss_value = loss.loss(fab, traj)?;

    let mut gq = vec![0.0; l];
    let mut gv = vec![0.0; l];
    let mut ganchor = vec![(0.0, 0.0); fab.layout.node_count()];
    let mut param_grads = vec![0.0; keys.len()];
    let mut control_grads = if want_control {
        Some(vec![0.0; ext.control.as_ref().map(|c| c.as_flat().len()).unwrap_or(0)])
    } else {
        None
    };

    loss.add_grad_q(fab, traj, steps, &mut gq);
    for k in (0..steps).rev() {
        backprop_step(
            fab,
            &tape.entries[k],
            &traj[k + 1].q,
            params,
            mc,
            ext,
            cons,
            opts,
            &mut gq,
            &mut gv,
            &mut ganchor,
            &mut param_grads,
            keys,
            control_grads.as_deref_mut(),
        )?;
        if !param_grads.iter().all(|g| g.is_finite()) {
            return Err(GradError::NonFinite { step: k });
        }
        if k >= 1 {
            loss.add_grad_q(fab, traj, k, &mut gq);
        }
    }

    Ok((loss_value, GradBundle { params: param_grads, control: control_grads }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::BandMatrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn adjoint_solve_identity() {
        let mut a = BandMatrix::zeros(5, 1, 1);
        for i in 0..5 {
            a.set(i, i, 1.0);
        }
        let f = a.factor().unwrap();
        let g = vec![1.0, -2.0, 0.5, 3.0, 0.0];
        assert_eq!(solve_adjoint(&f, &g), g);
    }

    #[test]
    fn adjoint_matches_fd_on_small_system() {
        // dL/db and the dL/dA contraction against finite differences of
        // L = cᵀ·A⁻¹·b on a random banded 4×4 system
        let mut rng = ChaCha8Rng::seed_from_u64(107);
        let n = 4;
        let mut a = BandMatrix::zeros(n, 2, 2);
        for i in 0..n {
            for j in 0..n {
                if j <= i + 2 && i <= j + 2 {
                    a.add(i, j, rng.gen_range(-1.0..1.0));
                }
            }
            let d = a.get(i, i);
            a.set(i, i, d + 3.0);
        }
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = a.factor().unwrap();
        let x = f.solve(&b);
        let lam = solve_adjoint(&f, &c);
        for i in 0..n {
            let h = 1e-6;
            let lp: f64 = {
                let mut bp = b.clone();
                bp[i] += h;
                c.iter().zip(f.solve(&bp)).map(|(ci, xi)| ci * xi).sum()
            };
            let lm: f64 = {
                let mut bm = b.clone();
                bm[i] -= h;
                c.iter().zip(f.solve(&bm)).map(|(ci, xi)| ci * xi).sum()
            };
            let fd = (lp - lm) / (2.0 * h);
            assert!((lam[i] - fd).abs() < 1e-7 * fd.abs().max(1.0), "{} vs {fd}", lam[i]);
        }
        // dL/dA[i][j] = −λ_i·q̇_j
        for i in 0..n {
            for j in 0..n {
                if j > i + 2 || i > j + 2 {
                    continue;
                }
                let h = 1e-6;
                let lp: f64 = {
                    let mut ap = a.clone();
                    ap.add(i, j, h);
                    c.iter()
                        .zip(ap.factor().unwrap().solve(&b))
                        .map(|(ci, xi)| ci * xi)
                        .sum()
                };
                let lm: f64 = {
                    let mut am = a.clone();
                    am.add(i, j, -h);
                    c.iter()
                        .zip(am.factor().unwrap().solve(&b))
                        .map(|(ci, xi)| ci * xi)
                        .sum()
                };
                let fd = (lp - lm) / (2.0 * h);
                let analytic = -lam[i] * x[j];
                assert!(
                    (analytic - fd).abs() < 1e-6 * fd.abs().max(1.0),
                    "dL/dA[{i}][{j}] = {analytic} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn zero_upstream_gradient_stays_zero() {
        // linearity: λ = 0 ⇒ every accumulated gradient is 0
        let mat = crate::fabric::YarnMaterial {
            density: 0.002,
            stretch: 500_000.0,
            bend: 0.00014,
            radius: 0.001,
        };
        let spec = crate::fabric::FabricSpec::hybrid(
            4,
            4,
            crate::fabric::WovenPattern::Plain,
            0.01,
            mat,
            mat,
        );
        let (fab, st) = crate::fabric::build_fabric(&spec).unwrap();
        let params = Params::from_spec(&spec, 1000.0, 0.5);
        let mc = ModelConsts::default();
        let ext = Externals::default();
        let cons = Constraints::default();
        let opts = SimOptions { record_tape: true, ..Default::default() };
        let (traj, tape) =
            crate::integrator::simulate(&fab, &st, &params, &mc, &ext, &cons, &opts, 3).unwrap();
        struct ZeroLoss;
        impl TrajectoryLoss for ZeroLoss {
            fn loss(&self, _: &Fabric, _: &[State]) -> Result<f64, GradError> {
                Ok(0.0)
            }
            fn add_grad_q(&self, _: &Fabric, _: &[State], _: usize, _: &mut [f64]) {}
        }
        let keys = ParamKey::standard_set(2);
        let (_, g) = gradient(
            &fab, &params, &mc, &ext, &cons, &opts, &tape, &traj, &ZeroLoss, &keys, false,
        )
        .unwrap();
        assert!(g.params.iter().all(|&x| x == 0.0));
    }
}
