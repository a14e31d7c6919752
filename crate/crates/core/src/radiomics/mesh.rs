//! Marching cubes and marching squares on binary masks at iso-level 0.5.
//!
//! The cube case table is generated at startup from a face rule: on each
//! cube face, walking the corners counter-clockwise as seen from outside,
//! every inside run of corners is cut off by its own segment (diagonal
//! inside corners stay separate). Neighboring cubes see the same face
//! segments with opposite direction, so the resulting surface is watertight
//! and consistently oriented. Vertices sit on edge midpoints.

use std::sync::OnceLock;

use crate::mask::BinaryMask;

/// Cube corner `c` sits at `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
fn corner_pos(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

/// The 12 cube edges as (base corner, axis).
fn cube_edges() -> Vec<(usize, usize)> {
    let mut e = Vec::with_capacity(12);
    for c in 0..8 {
        for axis in 0..3 {
            if c & (1 << axis) == 0 {
                e.push((c, axis));
            }
        }
    }
    e
}

fn edge_id(edges: &[(usize, usize)], a: usize, b: usize) -> usize {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let axis = (hi ^ lo).trailing_zeros() as usize;
    edges.iter().position(|&e| e == (lo, axis)).expect("cube edge")
}

/// Corner cycles of the six faces, counter-clockwise seen from outside.
fn faces() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(6);
    for a in 0..3 {
        let (u, v) = ((a + 1) % 3, (a + 2) % 3);
        for side in 0..2 {
            let base = side << a;
            let at = |du: usize, dv: usize| base | (du << u) | (dv << v);
            out.push(if side == 1 {
                [at(0, 0), at(1, 0), at(1, 1), at(0, 1)]
            } else {
                [at(0, 0), at(0, 1), at(1, 1), at(1, 0)]
            });
        }
    }
    out
}

/// Directed segments on one polygon boundary: for each inside run, from the
/// entry crossing before it to the exit crossing after it.
fn boundary_segments(cycle: &[usize], inside: impl Fn(usize) -> bool) -> Vec<(usize, usize)> {
    let n = cycle.len();
    // (position, is_exit) of each crossing, in walk order.
    let crossings: Vec<(usize, bool)> = (0..n)
        .filter(|&i| inside(cycle[i]) != inside(cycle[(i + 1) % n]))
        .map(|i| (i, inside(cycle[i])))
        .collect();
    let m = crossings.len();
    let mut segs = Vec::new();
    for k in 0..m {
        if crossings[k].1 {
            let entry = crossings[(k + m - 1) % m];
            debug_assert!(!entry.1);
            segs.push((entry.0, crossings[k].0));
        }
    }
    segs
}

/// Loops of cube-edge ids for every corner configuration.
pub struct CaseTable {
    pub edges: Vec<(usize, usize)>,
    pub loops: Vec<Vec<Vec<u8>>>,
}

fn build_table() -> CaseTable {
    let edges = cube_edges();
    let faces = faces();
    let mut loops = Vec::with_capacity(256);
    for config in 0..256usize {
        let inside = |c: usize| config & (1 << c) != 0;
        let mut next = [usize::MAX; 12];
        for f in &faces {
            for (from, to) in boundary_segments(f, inside) {
                let e_from = edge_id(&edges, f[from], f[(from + 1) % 4]);
                let e_to = edge_id(&edges, f[to], f[(to + 1) % 4]);
                debug_assert_eq!(next[e_from], usize::MAX);
                next[e_from] = e_to;
            }
        }
        let mut seen = [false; 12];
        let mut cfg_loops = Vec::new();
        for start in 0..12 {
            if next[start] == usize::MAX || seen[start] {
                continue;
            }
            let mut lp = Vec::new();
            let mut e = start;
            while !seen[e] {
                seen[e] = true;
                lp.push(e as u8);
                e = next[e];
            }
            debug_assert_eq!(e, start);
            cfg_loops.push(lp);
        }
        loops.push(cfg_loops);
    }
    CaseTable { edges, loops }
}

pub fn case_table() -> &'static CaseTable {
    static TABLE: OnceLock<CaseTable> = OnceLock::new();
    TABLE.get_or_init(build_table)
}

/// Triangle mesh with vertices in physical coordinates (linear part of the
/// affine only; translation does not affect any shape feature).
#[derive(Debug, Clone, Default)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

impl Mesh {
    /// Signed enclosed volume; positive for outward-facing triangles.
    pub fn signed_volume(&self) -> f64 {
        let c = self.vertices.first().copied().unwrap_or([0.0; 3]);
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, d] = t.map(|i| sub(self.vertices[i as usize], c));
                dot(a, cross(b, d))
            })
            .sum::<f64>()
            / 6.0
    }

    pub fn volume(&self) -> f64 {
        self.signed_volume().abs()
    }

    pub fn area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, d] = t.map(|i| self.vertices[i as usize]);
                norm(cross(sub(b, a), sub(d, a))) / 2.0
            })
            .sum()
    }

    pub fn max_diameter(&self) -> f64 {
        max_pairwise_distance(&self.vertices)
    }
}

pub fn max_pairwise_distance(points: &[[f64; 3]]) -> f64 {
    let mut best = 0.0f64;
    for (i, &p) in points.iter().enumerate() {
        for &q in &points[i + 1..] {
            let d = sub(p, q);
            best = best.max(dot(d, d));
        }
    }
    best.sqrt()
}

/// Marching cubes over the mask's bounding box padded by one background layer.
pub fn marching_cubes(mask: &BinaryMask) -> Mesh {
    let Some((lo, hi)) = mask.bounding_box() else {
        return Mesh::default();
    };
    let table = case_table();
    let affine = mask.geometry().affine;
    // Padded grid of sample points covering [lo-1, hi+1].
    let pd = [hi[0] - lo[0] + 3, hi[1] - lo[1] + 3, hi[2] - lo[2] + 3];
    let pidx = |x: usize, y: usize, z: usize| x + pd[0] * (y + pd[1] * z);
    let mut grid = vec![false; pd[0] * pd[1] * pd[2]];
    for z in 1..pd[2] - 1 {
        for y in 1..pd[1] - 1 {
            for x in 1..pd[0] - 1 {
                grid[pidx(x, y, z)] = mask.at(lo[0] + x - 1, lo[1] + y - 1, lo[2] + z - 1);
            }
        }
    }

    let mut vertex_of = vec![u32::MAX; grid.len() * 3];
    let mut mesh = Mesh::default();
    let mut lp_vertices: Vec<u32> = Vec::with_capacity(12);
    for z in 0..pd[2] - 1 {
        for y in 0..pd[1] - 1 {
            for x in 0..pd[0] - 1 {
                let mut config = 0usize;
                for c in 0..8 {
                    let [dx, dy, dz] = corner_pos(c);
                    if grid[pidx(x + dx, y + dy, z + dz)] {
                        config |= 1 << c;
                    }
                }
                if config == 0 || config == 255 {
                    continue;
                }
                for lp in &table.loops[config] {
                    lp_vertices.clear();
                    for &e in lp {
                        let (c, axis) = table.edges[e as usize];
                        let [dx, dy, dz] = corner_pos(c);
                        let (gx, gy, gz) = (x + dx, y + dy, z + dz);
                        let key = pidx(gx, gy, gz) * 3 + axis;
                        if vertex_of[key] == u32::MAX {
                            let mut p = [
                                (gx + lo[0]) as f64 - 1.0,
                                (gy + lo[1]) as f64 - 1.0,
                                (gz + lo[2]) as f64 - 1.0,
                            ];
                            p[axis] += 0.5;
                            vertex_of[key] = mesh.vertices.len() as u32;
                            mesh.vertices.push(affine.apply_linear(p));
                        }
                        lp_vertices.push(vertex_of[key]);
                    }
                    triangulate_loop(&mut mesh, &lp_vertices);
                }
            }
        }
    }
    mesh
}

/// Triangles are fanned around the loop's centroid for loops longer than
/// three, so no triangle edge lies across a cube face.
fn triangulate_loop(mesh: &mut Mesh, lp: &[u32]) {
    if lp.len() == 3 {
        mesh.triangles.push([lp[0], lp[1], lp[2]]);
        return;
    }
    let mut c = [0.0; 3];
    for &i in lp {
        let v = mesh.vertices[i as usize];
        for k in 0..3 {
            c[k] += v[k] / lp.len() as f64;
        }
    }
    let ci = mesh.vertices.len() as u32;
    mesh.vertices.push(c);
    for k in 0..lp.len() {
        mesh.triangles.push([ci, lp[k], lp[(k + 1) % lp.len()]]);
    }
}

/// Directed contour segments of a 2D binary image (x fastest), in pixel
/// index coordinates. Square corners are walked counter-clockwise.
pub fn marching_squares(bits: &[bool], nx: usize, ny: usize) -> Vec<([f64; 2], [f64; 2])> {
    let at = |x: isize, y: isize| -> bool {
        x >= 0 && y >= 0 && (x as usize) < nx && (y as usize) < ny && bits[x as usize + nx * y as usize]
    };
    const CORNERS: [[isize; 2]; 4] = [[0, 0], [1, 0], [1, 1], [0, 1]];
    let mut segs = Vec::new();
    for y in -1..ny as isize {
        for x in -1..nx as isize {
            let inside = |c: usize| at(x + CORNERS[c][0], y + CORNERS[c][1]);
            let mid = |i: usize| {
                let a = CORNERS[i];
                let b = CORNERS[(i + 1) % 4];
                [
                    x as f64 + (a[0] + b[0]) as f64 / 2.0,
                    y as f64 + (a[1] + b[1]) as f64 / 2.0,
                ]
            };
            // Reversed so that contours run counter-clockwise around inside pixels.
            for (from, to) in boundary_segments(&[0, 1, 2, 3], inside) {
                segs.push((mid(to), mid(from)));
            }
        }
    }
    segs
}
