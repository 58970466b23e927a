//! Spatial index for meets of many disk supports.
//!
//! `φ_{ξ,λ}(x) = λ|x - ⟨x,ξ⟩ξ| - ⟨x,ξ⟩` is negative only inside the cap of
//! angular radius `atan(1/λ)` around `ξ`. In a meet that also contains a
//! constant `c ≤ 0`, a disk child can only realize (or tie with) the minimum
//! inside a slightly inflated version of that cap, so only those children need
//! to be visited.

use std::collections::HashMap;

use super::{Node, ScalarField};

const MIN_INDEXED: usize = 16;
const MAX_DIM: usize = 4;

type CellKey = [i64; MAX_DIM];

pub(crate) struct CapIndex {
    dim: usize,
    cell: f64,
    /// Children visited at every point.
    always: Vec<usize>,
    cells: HashMap<CellKey, Vec<usize>>,
}

fn cap_chord(lambda: f64) -> f64 {
    let angle = (1.0 / lambda).atan();
    (2.0 * (angle / 2.0).sin()) * (1.0 + 1e-6) + 1e-9
}

impl CapIndex {
    pub(crate) fn for_meet(dim: usize, children: &[ScalarField]) -> Option<CapIndex> {
        if dim > MAX_DIM {
            return None;
        }
        let mut always = Vec::new();
        let mut disks = Vec::new();
        let mut has_nonpositive_const = false;
        for (i, c) in children.iter().enumerate() {
            match c.node() {
                Node::DiskSupport { xi, lambda } => disks.push((i, xi.as_slice(), cap_chord(*lambda))),
                Node::Const(v) => {
                    has_nonpositive_const |= *v <= 0.0;
                    always.push(i);
                }
                _ => always.push(i),
            }
        }
        if !has_nonpositive_const || disks.len() < MIN_INDEXED {
            return None;
        }
        let radius = disks.iter().map(|d| d.2).fold(0.0, f64::max);
        let cell = 2.0 * radius;
        let mut cells: HashMap<CellKey, Vec<usize>> = HashMap::new();
        for (i, xi, r) in disks {
            let lo: Vec<i64> = xi.iter().map(|c| ((c - r) / cell).floor() as i64).collect();
            let hi: Vec<i64> = xi.iter().map(|c| ((c + r) / cell).floor() as i64).collect();
            let mut key = [0i64; MAX_DIM];
            insert_box(&mut cells, &lo, &hi, 0, &mut key, i);
        }
        Some(CapIndex {
            dim,
            cell,
            always,
            cells,
        })
    }

    pub(crate) fn candidates(&self, x: &[f64]) -> Vec<usize> {
        let mut key = [0i64; MAX_DIM];
        for (k, c) in key.iter_mut().zip(x.iter().take(self.dim)) {
            *k = (c / self.cell).floor() as i64;
        }
        let mut out = self.always.clone();
        if let Some(found) = self.cells.get(&key) {
            out.extend_from_slice(found);
            out.sort_unstable();
        }
        out
    }
}

fn insert_box(
    cells: &mut HashMap<CellKey, Vec<usize>>,
    lo: &[i64],
    hi: &[i64],
    axis: usize,
    key: &mut CellKey,
    child: usize,
) {
    if axis == lo.len() {
        cells.entry(*key).or_default().push(child);
        return;
    }
    for k in lo[axis]..=hi[axis] {
        key[axis] = k;
        insert_box(cells, lo, hi, axis + 1, key, child);
    }
}
