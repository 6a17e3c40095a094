//! Implicit-Euler time stepping: assemble A·q̇_{t+1} = b, solve, advance,
//! apply constraints, record the step tape for reverse-mode replay.

use crate::fabric::{Fabric, State};
use crate::forces::{assemble, AssembleError};
use crate::math::Vec3;
use crate::params::{ModelConsts, Params};
use crate::solver::{bicgstab, BandLu, BandMatrix, SolveError};
use thiserror::Error;

pub use crate::forces::{Externals, ForceToggles, WindParams};

#[derive(Debug, Error)]
pub enum StepError {
    #[error("assembly failed at t={time:.4}s: {source}")]
    Assemble { time: f64, source: AssembleError },
    #[error("linear solve failed at t={time:.4}s: {source}")]
    Solve { time: f64, source: SolveError },
    #[error("Eulerian monotonicity violated at t={time:.4}s: segment {n0}-{n1} gap {du:.3e}")]
    Monotonicity { time: f64, n0: usize, n1: usize, du: f64 },
    #[error("non-finite state at t={time:.4}s (dof {dof})")]
    NonFinite { time: f64, dof: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    /// banded LU, factorization retained for adjoint transpose solves
    Direct,
    /// BiCGStab with Jacobi scaling (forward-only fallback)
    Iterative,
}

#[derive(Clone, Debug)]
pub enum Obstacle {
    Plane { point: Vec3, normal: Vec3 },
    Sphere { center: Vec3, radius: f64 },
}

#[derive(Clone, Debug, Default)]
pub struct Constraints {
    /// nodes whose Lagrangian DoFs are held fixed (Eulerian left free)
    pub pinned_nodes: Vec<usize>,
    pub obstacles: Vec<Obstacle>,
    /// tangential velocity scale on contact is (1 − friction)
    pub obstacle_friction: f64,
}

impl Constraints {
    pub fn pinned_dofs(&self, fab: &Fabric) -> Vec<usize> {
        let mut dofs = Vec::with_capacity(3 * self.pinned_nodes.len());
        for &n in &self.pinned_nodes {
            let l = fab.layout.lagrangian(n);
            dofs.extend([l, l + 1, l + 2]);
        }
        dofs
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SimOptions {
    pub h: f64,
    pub residual_tol: f64,
    pub solver: SolverKind,
    pub record_tape: bool,
    /// keep the LU factor in the tape (traded against memory; the adjoint
    /// re-factorizes deterministically when absent)
    pub retain_factors: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            h: 1e-3,
            residual_tol: 1e-9,
            solver: SolverKind::Direct,
            record_tape: false,
            retain_factors: true,
        }
    }
}

/// Everything needed to replay one step bitwise and run its adjoint.
#[derive(Clone, Debug)]
pub struct TapeEntry {
    /// state at the beginning of the step
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    pub anchors: Vec<(f64, f64)>,
    pub time: f64,
    pub frame: usize,
    /// solution of the linear system
    pub qdot_next: Vec<f64>,
    pub b: Vec<f64>,
    pub fn_values: Vec<f64>,
    pub factor: Option<BandLu>,
    pub kinetic: f64,
    pub potential: f64,
    pub residual: f64,
    pub min_du: f64,
}

#[derive(Clone, Debug, Default)]
pub struct StepTape {
    pub entries: Vec<TapeEntry>,
}

/// Row replacement for pinned DoFs: identity row, zero rhs.
pub fn apply_pins(a: &mut BandMatrix, b: &mut [f64], pinned: &[usize]) {
    for &d in pinned {
        a.set_identity_row(d);
        b[d] = 0.0;
    }
}

fn solve_system(
    a: &BandMatrix,
    b: &[f64],
    opts: &SimOptions,
    time: f64,
) -> Result<(Vec<f64>, Option<BandLu>, f64), StepError> {
    let map_err = |source| StepError::Solve { time, source };
    let (mut x, factor) = match opts.solver {
        SolverKind::Direct => {
            let lu = a.factor().map_err(map_err)?;
            (lu.solve(b), Some(lu))
        }
        SolverKind::Iterative => {
            let diag: Vec<f64> = (0..a.n).map(|i| a.get(i, i)).collect();
            let x = bicgstab(&|v| a.matvec(v), &diag, b, opts.residual_tol * 1e-3, 10 * a.n)
                .map_err(map_err)?;
            (x, None)
        }
    };
    let bnorm = crate::solver::norm2(b).max(1e-300);
    let mut residual = rel_residual(a, &x, b, bnorm);
    if residual > opts.residual_tol {
        // one round of iterative refinement
        if let Some(lu) = &factor {
            let r: Vec<f64> = a
                .matvec(&x)
                .iter()
                .zip(b)
                .map(|(ax, bi)| bi - ax)
                .collect();
            let dx = lu.solve(&r);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
            residual = rel_residual(a, &x, b, bnorm);
        }
        if residual > opts.residual_tol {
            return Err(StepError::Solve {
                time,
                source: SolveError::ResidualTooLarge { residual, tol: opts.residual_tol },
            });
        }
    }
    Ok((x, factor, residual))
}

fn rel_residual(a: &BandMatrix, x: &[f64], b: &[f64], bnorm: f64) -> f64 {
    let ax = a.matvec(x);
    let mut acc = 0.0;
    for i in 0..b.len() {
        let d = ax[i] - b[i];
        acc += d * d;
    }
    acc.sqrt() / bnorm
}

/// Advance one implicit-Euler step. Returns the tape entry describing it.
#[allow(clippy::too_many_arguments)]
pub fn step(
    fab: &Fabric,
    state: &mut State,
    params: &Params,
    mc: &ModelConsts,
    ext: &Externals,
    cons: &Constraints,
    opts: &SimOptions,
    frame: usize,
) -> Result<TapeEntry, StepError> {
    let time = state.time;
    let out = assemble(fab, state, params, mc, ext, opts.h, frame)
        .map_err(|source| StepError::Assemble { time, source })?;
    let mut a = out.a;
    let mut b = out.b;
    let pinned = cons.pinned_dofs(fab);
    apply_pins(&mut a, &mut b, &pinned);

    let (mut qdot_next, factor, residual) = solve_system(&a, &b, opts, time)?;
    for &d in &pinned {
        qdot_next[d] = 0.0;
    }

    let entry = TapeEntry {
        q: state.q.clone(),
        qdot: state.qdot.clone(),
        anchors: state.anchors.clone(),
        time,
        frame,
        qdot_next: qdot_next.clone(),
        b,
        fn_values: out.fn_values.clone(),
        factor: if opts.retain_factors { factor } else { None },
        kinetic: out.kinetic,
        potential: out.potential,
        residual,
        min_du: out.min_du,
    };

    // advance
    for (i, qi) in state.q.iter_mut().enumerate() {
        *qi += opts.h * qdot_next[i];
        if !qi.is_finite() {
            return Err(StepError::NonFinite { time, dof: i });
        }
    }
    state.qdot = qdot_next;
    state.time += opts.h;

    project_obstacles(fab, state, cons);

    // Eulerian monotonicity must survive the step
    for seg in &fab.segments {
        let du = fab.segment_du(&state.q, seg);
        if du <= 0.0 {
            return Err(StepError::Monotonicity {
                time: state.time,
                n0: seg.n0,
                n1: seg.n1,
                du,
            });
        }
    }

    // anchor drag, outside the differentiated graph
    if ext.toggles.friction {
        for cr in &fab.crossings {
            let f_n = out.fn_values[cr.slot];
            let (au, av) = state.anchors[cr.node];
            let u = fab.u_of(&state.q, cr.node);
            let v = fab.v_of(&state.q, cr.node);
            state.anchors[cr.node] = (
                crate::forces::friction::updated_anchor(au, u, params.friction_mu, f_n, mc.k_f),
                crate::forces::friction::updated_anchor(av, v, params.friction_mu, f_n, mc.k_f),
            );
        }
    }

    Ok(entry)
}

/// Project penetrating nodes onto obstacle surfaces: position to the
/// surface, inward normal velocity removed, tangential velocity scaled by
/// (1 − obstacle_friction). Deterministic node order. Not differentiated.
pub fn project_obstacles(fab: &Fabric, state: &mut State, cons: &Constraints) {
    if cons.obstacles.is_empty() {
        return;
    }
    let tangential_scale = (1.0 - cons.obstacle_friction).clamp(0.0, 1.0);
    for node in 0..fab.layout.node_count() {
        let l = fab.layout.lagrangian(node);
        for obs in &cons.obstacles {
            let (normal, depth) = match obs {
                Obstacle::Plane { point, normal } => {
                    let d = (state.q[l] - point.0[0]) * normal.0[0]
                        + (state.q[l + 1] - point.0[1]) * normal.0[1]
                        + (state.q[l + 2] - point.0[2]) * normal.0[2];
                    (*normal, -d)
                }
                Obstacle::Sphere { center, radius } => {
                    let dx = [
                        state.q[l] - center.0[0],
                        state.q[l + 1] - center.0[1],
                        state.q[l + 2] - center.0[2],
                    ];
                    let dist = (dx[0] * dx[0] + dx[1] * dx[1] + dx[2] * dx[2]).sqrt();
                    if dist >= *radius || dist < 1e-300 {
                        continue;
                    }
                    let n = crate::math::V3([dx[0] / dist, dx[1] / dist, dx[2] / dist]);
                    (n, radius - dist)
                }
            };
            if depth <= 0.0 {
                continue;
            }
            for k in 0..3 {
                state.q[l + k] += depth * normal.0[k];
            }
            let mut vn = state.qdot[l] * normal.0[0]
                + state.qdot[l + 1] * normal.0[1]
                + state.qdot[l + 2] * normal.0[2];
            if vn < 0.0 {
                for k in 0..3 {
                    state.qdot[l + k] -= vn * normal.0[k];
                }
                vn = 0.0;
            }
            for k in 0..3 {
                let v = state.qdot[l + k];
                let vn_comp = vn * normal.0[k];
                state.qdot[l + k] = vn_comp + tangential_scale * (v - vn_comp);
            }
        }
    }
}

/// Forward rollout: n_steps implicit-Euler steps from `state`, returning
/// the trajectory (n_steps + 1 states including the initial one) and,
/// when requested, the tape for the reverse sweep.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    fab: &Fabric,
    initial: &State,
    params: &Params,
    mc: &ModelConsts,
    ext: &Externals,
    cons: &Constraints,
    opts: &SimOptions,
    n_steps: usize,
) -> Result<(Vec<State>, StepTape), StepError> {
    let mut state = initial.clone();
    let mut traj = Vec::with_capacity(n_steps + 1);
    traj.push(state.clone());
    let mut tape = StepTape::default();
    for k in 0..n_steps {
        let entry = step(fab, &mut state, params, mc, ext, cons, opts, k)?;
        if opts.record_tape {
            tape.entries.push(entry);
        }
        traj.push(state.clone());
    }
    Ok((traj, tape))
}

/// Re-solve the linear system recorded in a tape entry and confirm it
/// reproduces the stored solution (bitwise when the factor was retained).
#[allow(clippy::too_many_arguments)]
pub fn replay_entry(
    fab: &Fabric,
    entry: &TapeEntry,
    params: &Params,
    mc: &ModelConsts,
    ext: &Externals,
    cons: &Constraints,
    opts: &SimOptions,
) -> Result<Vec<f64>, StepError> {
    let state = State {
        q: entry.q.clone(),
        qdot: entry.qdot.clone(),
        anchors: entry.anchors.clone(),
        time: entry.time,
    };
    let out = assemble(fab, &state, params, mc, ext, opts.h, entry.frame)
        .map_err(|source| StepError::Assemble { time: entry.time, source })?;
    let mut a = out.a;
    let mut b = out.b;
    let pinned = cons.pinned_dofs(fab);
    apply_pins(&mut a, &mut b, &pinned);
    let mut x = match &entry.factor {
        Some(lu) => lu.solve(&b),
        None => {
            let (x, _, _) = solve_system(&a, &b, opts, entry.time)?;
            x
        }
    };
    for &d in &pinned {
        x[d] = 0.0;
    }
    Ok(x)
}
