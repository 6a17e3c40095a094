//! Yarn centerline export: Wavefront OBJ with one polyline per yarn.

use crate::fabric::{Fabric, State};
use std::fmt::Write as _;

/// One `v` record per node (r·c vertices), then r + c `l` polylines: every
/// warp column and every weft row.
pub fn centerlines(fab: &Fabric, state: &State) -> String {
    let (r, c) = (fab.layout.rows, fab.layout.cols);
    let mut out = String::new();
    for node in 0..fab.layout.node_count() {
        let p = fab.pos(&state.q, node);
        let _ = writeln!(out, "v {} {} {}", p.0[0], p.0[1], p.0[2]);
    }
    // OBJ indices are 1-based
    for j in 0..c {
        let ids: Vec<String> =
            (0..r).map(|i| (fab.layout.node(i, j) + 1).to_string()).collect();
        let _ = writeln!(out, "l {}", ids.join(" "));
    }
    for i in 0..r {
        let ids: Vec<String> =
            (0..c).map(|j| (fab.layout.node(i, j) + 1).to_string()).collect();
        let _ = writeln!(out, "l {}", ids.join(" "));
    }
    out
}
