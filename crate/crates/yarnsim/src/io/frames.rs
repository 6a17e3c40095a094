//! Trajectory frame files.
//!
//! Versioned text format, one record per node per frame:
//!
//! ```text
//! # yarnsim frames v1
//! frame,node,x,y,z,u,v,vx,vy,vz,vu,vv
//! 0,0,0e0,...
//! ```
//!
//! Coordinates are written with 17 significant digits so values round-trip
//! bit-exactly; u,v (and their rates) are empty for boundary nodes. The
//! velocity columns make the recorded initial state complete — estimation
//! replays rollouts from frame 0, which generally has nonzero velocities.
//! Files without velocity columns, or with empty u,v everywhere (sheet-level
//! exports), load with zeros there and are flagged Lagrangian-only.

use super::IoError;
use crate::estimation::GroundTruth;
use crate::fabric::{Fabric, State};
use std::fmt::Write as _;
use std::path::Path;

pub const HEADER_VERSION: &str = "# yarnsim frames v1";
const COLUMNS_FULL: &str = "frame,node,x,y,z,u,v,vx,vy,vz,vu,vv";

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serialize a trajectory (all states, frame 0 first).
pub fn to_string(fab: &Fabric, traj: &[State]) -> String {
    let mut out = String::new();
    out.push_str(HEADER_VERSION);
    out.push('\n');
    out.push_str(COLUMNS_FULL);
    out.push('\n');
    for (f, st) in traj.iter().enumerate() {
        for node in 0..fab.layout.node_count() {
            let l = fab.layout.lagrangian(node);
            let _ = write!(
                out,
                "{f},{node},{},{},{}",
                fmt_f64(st.q[l]),
                fmt_f64(st.q[l + 1]),
                fmt_f64(st.q[l + 2])
            );
            match (fab.layout.u_dof(node), fab.layout.v_dof(node)) {
                (Some(u), Some(v)) => {
                    let _ = write!(
                        out,
                        ",{},{},{},{},{},{},{}",
                        fmt_f64(st.q[u]),
                        fmt_f64(st.q[v]),
                        fmt_f64(st.qdot[l]),
                        fmt_f64(st.qdot[l + 1]),
                        fmt_f64(st.qdot[l + 2]),
                        fmt_f64(st.qdot[u]),
                        fmt_f64(st.qdot[v])
                    );
                }
                _ => {
                    let _ = write!(
                        out,
                        ",,,{},{},{},,",
                        fmt_f64(st.qdot[l]),
                        fmt_f64(st.qdot[l + 1]),
                        fmt_f64(st.qdot[l + 2])
                    );
                }
            }
            out.push('\n');
        }
    }
    out
}

pub fn write(path: &Path, fab: &Fabric, traj: &[State]) -> Result<(), IoError> {
    super::write_atomic(path, &to_string(fab, traj))
}

#[derive(Debug)]
pub struct LoadedFrames {
    pub ground_truth: GroundTruth,
    /// true when the file carried no Eulerian coordinates (sheet-level data)
    pub lagrangian_only: bool,
    pub frame_count: usize,
}

/// Parse a frame file against a fabric layout. Frame 0 becomes the initial
/// state (anchors reset to its Eulerian coordinates); frames 1.. become the
/// observation targets.
pub fn parse(fab: &Fabric, text: &str, path: &str) -> Result<LoadedFrames, IoError> {
    let err = |line: usize, message: String| IoError::Frames {
        path: path.to_string(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let (_, version) = lines
        .next()
        .ok_or_else(|| err(1, "empty file".into()))?;
    if !version.starts_with("# yarnsim frames") {
        return Err(err(1, format!("missing version header, got {version:?}")));
    }
    let (_, columns) = lines.next().ok_or_else(|| err(2, "missing column header".into()))?;
    let cols: Vec<&str> = columns.split(',').collect();
    let idx = |name: &str| cols.iter().position(|c| *c == name);
    let (ix, iy, iz) = match (idx("x"), idx("y"), idx("z")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(err(2, "x,y,z columns are required".into())),
    };
    let ifr = idx("frame").ok_or_else(|| err(2, "frame column is required".into()))?;
    let ind = idx("node").ok_or_else(|| err(2, "node column is required".into()))?;
    let iu = idx("u");
    let iv = idx("v");
    let ivel: Option<[usize; 3]> = match (idx("vx"), idx("vy"), idx("vz")) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        _ => None,
    };
    let ivu = idx("vu");
    let ivv = idx("vv");

    let n_nodes = fab.layout.node_count();
    let mut frames: Vec<Vec<f64>> = Vec::new();
    let mut vels: Vec<Vec<f64>> = Vec::new();
    let mut seen: Vec<usize> = Vec::new();
    let mut any_eulerian = false;

    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let get = |i: usize| -> Result<&str, IoError> {
            fields.get(i).copied().ok_or_else(|| err(lineno + 1, format!("missing column {i}")))
        };
        let parse_f = |s: &str, lineno: usize| -> Result<f64, IoError> {
            s.parse::<f64>().map_err(|e| err(lineno + 1, format!("bad number {s:?}: {e}")))
        };
        let frame: usize = get(ifr)?
            .parse()
            .map_err(|e| err(lineno + 1, format!("bad frame index: {e}")))?;
        let node: usize = get(ind)?
            .parse()
            .map_err(|e| err(lineno + 1, format!("bad node index: {e}")))?;
        if node >= n_nodes {
            return Err(err(lineno + 1, format!("node {node} outside layout ({n_nodes})")));
        }
        while frames.len() <= frame {
            if frames.len() != seen.len() {
                return Err(err(lineno + 1, "frames must be consecutive from 0".into()));
            }
            frames.push(vec![0.0; fab.layout.len]);
            vels.push(vec![0.0; fab.layout.len]);
            seen.push(0);
        }
        if frame + 1 != frames.len() {
            return Err(err(lineno + 1, "frames must be consecutive from 0".into()));
        }
        let q = &mut frames[frame];
        let l = fab.layout.lagrangian(node);
        q[l] = parse_f(get(ix)?, lineno)?;
        q[l + 1] = parse_f(get(iy)?, lineno)?;
        q[l + 2] = parse_f(get(iz)?, lineno)?;
        if let (Some(ud), Some(vd)) = (fab.layout.u_dof(node), fab.layout.v_dof(node)) {
            let mut got_u = false;
            if let Some(i) = iu {
                let s = get(i)?;
                if !s.is_empty() {
                    q[ud] = parse_f(s, lineno)?;
                    got_u = true;
                    any_eulerian = true;
                }
            }
            if let Some(i) = iv {
                let s = get(i)?;
                if !s.is_empty() {
                    q[vd] = parse_f(s, lineno)?;
                }
            }
            if !got_u {
                // sheet-level data: keep rest coordinates
                q[ud] = fab.rest_eulerian[node].0;
                q[vd] = fab.rest_eulerian[node].1;
            }
            if let Some(i) = ivu {
                let s = get(i)?;
                if !s.is_empty() {
                    vels[frame][ud] = parse_f(s, lineno)?;
                }
            }
            if let Some(i) = ivv {
                let s = get(i)?;
                if !s.is_empty() {
                    vels[frame][vd] = parse_f(s, lineno)?;
                }
            }
        }
        if let Some([a, b, c]) = ivel {
            for (k, col) in [a, b, c].into_iter().enumerate() {
                let s = get(col)?;
                if !s.is_empty() {
                    vels[frame][l + k] = parse_f(s, lineno)?;
                }
            }
        }
        seen[frame] += 1;
    }
    if frames.is_empty() {
        return Err(err(3, "no records".into()));
    }
    for (f, &count) in seen.iter().enumerate() {
        if count != n_nodes {
            return Err(err(0, format!("frame {f} has {count} records, expected {n_nodes}")));
        }
    }

    let q0 = frames[0].clone();
    let anchors = (0..n_nodes)
        .map(|node| (fab.u_of(&q0, node), fab.v_of(&q0, node)))
        .collect();
    let initial = State { q: q0, qdot: vels[0].clone(), anchors, time: 0.0 };
    let frame_count = frames.len();
    Ok(LoadedFrames {
        ground_truth: GroundTruth { initial, frames: frames[1..].to_vec() },
        lagrangian_only: !any_eulerian,
        frame_count,
    })
}

pub fn load(path: &Path, fab: &Fabric) -> Result<LoadedFrames, IoError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| IoError::File { path: path.display().to_string(), source })?;
    parse(fab, &text, &path.display().to_string())
}
