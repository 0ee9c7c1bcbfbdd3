//! Zero-level curves of a sampled scalar field by marching squares.
//!
//! Crossings are placed on cell edges by linear interpolation and joined
//! into polylines through the edges they share. Nodes holding NaN are
//! invalid and every cell touching one is skipped.

use std::collections::HashMap;

/// A grid edge: `Horizontal(i, j)` joins nodes (i, j) and (i+1, j),
/// `Vertical(i, j)` joins (i, j) and (i, j+1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridEdge {
    Horizontal(usize, usize),
    Vertical(usize, usize),
}

impl GridEdge {
    /// The two node indices (i, j) at the ends of the edge.
    pub fn nodes(&self) -> [(usize, usize); 2] {
        match *self {
            GridEdge::Horizontal(i, j) => [(i, j), (i + 1, j)],
            GridEdge::Vertical(i, j) => [(i, j), (i, j + 1)],
        }
    }
}

/// A polyline vertex together with the grid edge it was interpolated on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub point: [f64; 2],
    pub edge: GridEdge,
}

/// Sampled field on a uniform-index grid with arbitrary node coordinates.
pub struct Field<'a> {
    pub nx: usize,
    pub ny: usize,
    /// Row-major, x varying fastest.
    pub values: &'a [f64],
    pub xs: &'a [f64],
    pub ys: &'a [f64],
}

impl Field<'_> {
    fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    fn crossing(&self, edge: GridEdge) -> [f64; 2] {
        let [(i0, j0), (i1, j1)] = edge.nodes();
        let f0 = self.value(i0, j0);
        let f1 = self.value(i1, j1);
        let t = if f0 == f1 { 0.5 } else { f0 / (f0 - f1) };
        let x = self.xs[i0] + t * (self.xs[i1] - self.xs[i0]);
        let y = self.ys[j0] + t * (self.ys[j1] - self.ys[j0]);
        [x, y]
    }
}

/// Extracts all zero-level polylines of `field`.
pub fn zero_level_polylines(field: &Field<'_>) -> Vec<Vec<Crossing>> {
    assert_eq!(field.values.len(), field.nx * field.ny);
    let mut segments: Vec<[GridEdge; 2]> = Vec::new();

    for j in 0..field.ny.saturating_sub(1) {
        for i in 0..field.nx.saturating_sub(1) {
            let corners = [
                field.value(i, j),
                field.value(i + 1, j),
                field.value(i + 1, j + 1),
                field.value(i, j + 1),
            ];
            if corners.iter().any(|v| v.is_nan()) {
                continue;
            }
            let positive = corners.map(|v| v > 0.0);
            let bottom = GridEdge::Horizontal(i, j);
            let right = GridEdge::Vertical(i + 1, j);
            let top = GridEdge::Horizontal(i, j + 1);
            let left = GridEdge::Vertical(i, j);

            let mut cut = Vec::with_capacity(4);
            if positive[0] != positive[1] {
                cut.push(bottom);
            }
            if positive[1] != positive[2] {
                cut.push(right);
            }
            if positive[2] != positive[3] {
                cut.push(top);
            }
            if positive[3] != positive[0] {
                cut.push(left);
            }
            match cut.len() {
                0 => {}
                2 => segments.push([cut[0], cut[1]]),
                4 => {
                    // Saddle: the cell centre decides which diagonal connects.
                    let centre = 0.25 * corners.iter().sum::<f64>();
                    if (centre > 0.0) == positive[0] {
                        segments.push([bottom, right]);
                        segments.push([top, left]);
                    } else {
                        segments.push([bottom, left]);
                        segments.push([top, right]);
                    }
                }
                _ => unreachable!("a square has an even number of sign changes"),
            }
        }
    }

    join_segments(field, &segments)
}

fn join_segments(field: &Field<'_>, segments: &[[GridEdge; 2]]) -> Vec<Vec<Crossing>> {
    let mut by_edge: HashMap<GridEdge, Vec<usize>> = HashMap::new();
    for (k, seg) in segments.iter().enumerate() {
        for e in seg {
            by_edge.entry(*e).or_default().push(k);
        }
    }
    let mut used = vec![false; segments.len()];
    let mut polylines = Vec::new();

    let walk = |start_seg: usize, start_edge: GridEdge, used: &mut Vec<bool>| {
        let mut line = vec![Crossing {
            point: field.crossing(start_edge),
            edge: start_edge,
        }];
        let mut seg = start_seg;
        let mut from = start_edge;
        loop {
            used[seg] = true;
            let [e0, e1] = segments[seg];
            let to = if e0 == from { e1 } else { e0 };
            line.push(Crossing {
                point: field.crossing(to),
                edge: to,
            });
            let next = by_edge[&to].iter().copied().find(|&k| !used[k]);
            match next {
                Some(k) => {
                    seg = k;
                    from = to;
                }
                None => break,
            }
        }
        line
    };

    // Open chains start at an edge used by one segment only.
    for k in 0..segments.len() {
        if used[k] {
            continue;
        }
        for e in segments[k] {
            if by_edge[&e].len() == 1 && !used[k] {
                polylines.push(walk(k, e, &mut used));
            }
        }
    }
    // Whatever is left forms closed loops.
    for k in 0..segments.len() {
        if !used[k] {
            let e = segments[k][0];
            polylines.push(walk(k, e, &mut used));
        }
    }
    polylines
}
