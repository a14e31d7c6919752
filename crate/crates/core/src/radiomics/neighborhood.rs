use serde::{Deserialize, Serialize};

/// Whether texture is computed on the full 3D grid or in the axial plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dim {
    #[serde(rename = "2D")]
    Two,
    #[serde(rename = "3D")]
    Three,
}

/// The 13 unique 3D directions (one of each ± pair), as (dx, dy, dz).
pub const DIRECTIONS_3D: [[isize; 3]; 13] = [
    [1, 0, 0],
    [-1, 1, 0],
    [0, 1, 0],
    [1, 1, 0],
    [-1, -1, 1],
    [0, -1, 1],
    [1, -1, 1],
    [-1, 0, 1],
    [0, 0, 1],
    [1, 0, 1],
    [-1, 1, 1],
    [0, 1, 1],
    [1, 1, 1],
];

/// The 4 unique in-plane directions.
pub const DIRECTIONS_2D: [[isize; 3]; 4] = [[1, 0, 0], [-1, 1, 0], [0, 1, 0], [1, 1, 0]];

impl Dim {
    pub fn directions(self) -> &'static [[isize; 3]] {
        match self {
            Dim::Two => &DIRECTIONS_2D,
            Dim::Three => &DIRECTIONS_3D,
        }
    }

    /// Full neighborhood: both signs of every unique direction.
    pub fn neighbors(self) -> Vec<[isize; 3]> {
        self.directions()
            .iter()
            .flat_map(|d| [*d, [-d[0], -d[1], -d[2]]])
            .collect()
    }

    pub fn token(self) -> &'static str {
        match self {
            Dim::Two => "2d",
            Dim::Three => "3d",
        }
    }
}

/// `-Σ p log2 p` over positive entries.
pub(crate) fn entropy(p: impl IntoIterator<Item = f64>) -> f64 {
    0.0 - p.into_iter().filter(|&x| x > 0.0).map(|x| x * x.log2()).sum::<f64>()
}
