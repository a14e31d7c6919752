//! Mesh- and PCA-based shape descriptors in 3D and on a single axial slice.

use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen};

use crate::mask::BinaryMask;

use super::mesh::{cross, marching_cubes, marching_squares, max_pairwise_distance};

pub const NAMES_3D: [&str; 14] = [
    "voxel_volume",
    "mesh_volume",
    "surface_area",
    "surface_volume_ratio",
    "sphericity",
    "compactness1",
    "compactness2",
    "spherical_disproportion",
    "maximum_3d_diameter",
    "major_axis_length",
    "minor_axis_length",
    "least_axis_length",
    "elongation",
    "flatness",
];

pub const NAMES_2D: [&str; 10] = [
    "mesh_surface",
    "pixel_surface",
    "perimeter",
    "perimeter_surface_ratio",
    "circularity",
    "spherical_disproportion",
    "maximum_diameter",
    "major_axis_length",
    "minor_axis_length",
    "elongation",
];

/// Ratio with a 0 sentinel for a vanishing denominator; sets `degenerate`.
fn ratio(num: f64, den: f64, degenerate: &mut bool) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        *degenerate = true;
        0.0
    }
}

/// Eigenvalues (descending) of the population covariance of points.
fn pca_eigenvalues(points: &[[f64; 3]]) -> [f64; 3] {
    let n = points.len() as f64;
    let mut mean = [0.0; 3];
    for p in points {
        for k in 0..3 {
            mean[k] += p[k] / n;
        }
    }
    let mut cov = Matrix3::<f64>::zeros();
    for p in points {
        let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
        for r in 0..3 {
            for c in 0..3 {
                cov[(r, c)] += d[r] * d[c] / n;
            }
        }
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(cov)
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0))
        .collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    // Round-off below the leading eigenvalue's precision is treated as zero.
    let floor = ev[0] * 1e-12;
    std::array::from_fn(|k| if ev[k] <= floor { 0.0 } else { ev[k] })
}

/// 14 3D shape values for a non-empty mask, plus the degenerate flag.
pub fn shape3d(mask: &BinaryMask) -> ([f64; 14], bool) {
    let g = mask.geometry();
    let mut deg = false;
    let voxel_volume = mask.count() as f64 * g.voxel_volume();
    let mesh = marching_cubes(mask);
    let v = mesh.volume();
    let a = mesh.area();
    let sphericity = ratio(PI.cbrt() * (6.0 * v).powf(2.0 / 3.0), a, &mut deg);
    let centers: Vec<[f64; 3]> = mask
        .indices()
        .map(|i| {
            let [x, y, z] = g.coords(i);
            g.affine.apply_linear([x as f64, y as f64, z as f64])
        })
        .collect();
    let [l1, l2, l3] = pca_eigenvalues(&centers);
    (
        [
            voxel_volume,
            v,
            a,
            ratio(a, v, &mut deg),
            sphericity,
            ratio(v, PI.sqrt() * a.powf(1.5), &mut deg),
            ratio(36.0 * PI * v * v, a * a * a, &mut deg),
            ratio(a, (36.0 * PI * v * v).cbrt(), &mut deg),
            mesh.max_diameter(),
            4.0 * l1.sqrt(),
            4.0 * l2.sqrt(),
            4.0 * l3.sqrt(),
            ratio(l2, l1, &mut deg).sqrt(),
            ratio(l3, l1, &mut deg).sqrt(),
        ],
        deg,
    )
}

/// 10 2D shape values for axial slice `z` of a mask with pixels on it.
pub fn shape2d(mask: &BinaryMask, z: usize) -> ([f64; 10], bool) {
    let g = mask.geometry();
    let [nx, ny, _] = g.dims;
    let bits: Vec<bool> = (0..nx * ny).map(|i| mask.at(i % nx, i / nx, z)).collect();
    let count = bits.iter().filter(|&&b| b).count();
    let to_phys = |p: [f64; 2]| g.affine.apply_linear([p[0], p[1], 0.0]);
    let pixel_area = {
        let c = |k: usize| g.affine.apply_linear(std::array::from_fn(|j| (j == k) as u8 as f64));
        let n = cross(c(0), c(1));
        (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt()
    };

    let segs = marching_squares(&bits, nx, ny);
    // Shoelace in pixel coordinates scaled by the in-plane area element.
    let area = (segs.iter().map(|(a, b)| a[0] * b[1] - b[0] * a[1]).sum::<f64>() / 2.0).abs() * pixel_area;
    let mut perimeter = 0.0;
    let mut verts: Vec<[f64; 3]> = Vec::with_capacity(segs.len());
    for (a, b) in &segs {
        let (pa, pb) = (to_phys(*a), to_phys(*b));
        perimeter += ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2) + (pa[2] - pb[2]).powi(2)).sqrt();
        verts.push(pa);
    }
    let centers: Vec<[f64; 3]> = (0..nx * ny)
        .filter(|&i| bits[i])
        .map(|i| to_phys([(i % nx) as f64, (i / nx) as f64]))
        .collect();
    let [l1, l2, _] = pca_eigenvalues(&centers);
    let mut deg = false;
    let circularity = ratio(2.0 * (PI * area).sqrt(), perimeter, &mut deg);
    (
        [
            area,
            count as f64 * pixel_area,
            perimeter,
            ratio(perimeter, area, &mut deg),
            circularity,
            ratio(1.0, circularity, &mut deg),
            max_pairwise_distance(&verts),
            4.0 * l1.sqrt(),
            4.0 * l2.sqrt(),
            ratio(l2, l1, &mut deg).sqrt(),
        ],
        deg,
    )
}
