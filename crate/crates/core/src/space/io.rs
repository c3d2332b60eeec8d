//! JSON space files.
//!
//! ```json
//! {"n": 3, "dist": [[0,1,2],[1,0,1],[2,1,0]], "mass": [1,1,1], "base": 0}
//! {"n": 3, "dist": {"points": [[0,0],[1,0],[0,1]], "metric": "euclidean"}, "mass": [...], "base": 0}
//! {"n": 4, "dist": {"points": [[0],[1.57],[3.14],[4.71]], "metric": "circle", "radius": 1}, ...}
//! ```
//! For the circle metric each point is a one-element angle (radians) and the
//! distance is arc length on a circle of the given radius (default 1).
//! Saving always writes the matrix form, which round-trips bit for bit.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::FinitePmmSpace;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum PointMetric {
    Euclidean,
    Circle,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum DistField {
    Matrix(Vec<Vec<f64>>),
    Points {
        points: Vec<Vec<f64>>,
        metric: PointMetric,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
    },
}

/// On-disk representation of a space.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpaceFile {
    pub n: usize,
    pub dist: DistField,
    pub mass: Vec<f64>,
    pub base: usize,
}

impl SpaceFile {
    pub fn into_space(self) -> Result<FinitePmmSpace> {
        if self.mass.len() != self.n {
            return invalid(format!("n = {} but {} masses given", self.n, self.mass.len()));
        }
        let space = match self.dist {
            DistField::Matrix(rows) => FinitePmmSpace::from_rows(&rows, self.mass, self.base)?,
            DistField::Points { points, metric: PointMetric::Euclidean, .. } => {
                FinitePmmSpace::from_points(&points, self.mass, self.base)?
            }
            DistField::Points { points, metric: PointMetric::Circle, radius } => {
                let r = radius.unwrap_or(1.0);
                if points.iter().any(|p| p.len() != 1) {
                    return invalid("circle points must be single angles");
                }
                let n = points.len();
                // upper triangle, mirrored, so the matrix is exactly symmetric
                let dist = DMatrix::from_fn(n, n, |i, j| {
                    let (a, b) = if i < j { (i, j) } else { (j, i) };
                    let t = (points[b][0] - points[a][0]).rem_euclid(2.0 * PI);
                    r * t.min(2.0 * PI - t)
                });
                FinitePmmSpace::new(dist, self.mass, self.base)?
            }
        };
        if space.n() != self.n {
            return invalid(format!("n = {} but the distance data has {} points", self.n, space.n()));
        }
        Ok(space)
    }

    pub fn from_space(space: &FinitePmmSpace) -> Self {
        let n = space.n();
        let rows = (0..n).map(|i| (0..n).map(|j| space.d(i, j)).collect()).collect();
        Self { n, dist: DistField::Matrix(rows), mass: space.mass().to_vec(), base: space.base() }
    }
}

pub fn space_from_json(text: &str) -> Result<FinitePmmSpace> {
    serde_json::from_str::<SpaceFile>(text)?.into_space()
}

pub fn space_to_json(space: &FinitePmmSpace) -> Result<String> {
    Ok(serde_json::to_string(&SpaceFile::from_space(space))?)
}

pub fn load_space(path: impl AsRef<Path>) -> Result<FinitePmmSpace> {
    space_from_json(&std::fs::read_to_string(path)?)
}

pub fn save_space(space: &FinitePmmSpace, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, space_to_json(space)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matrix_round_trip_is_bit_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.random_range(1..9);
            let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
            let mass = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
            let s = FinitePmmSpace::from_points(&pts, mass, 0).unwrap();
            let text = space_to_json(&s).unwrap();
            let back = space_from_json(&text).unwrap();
            for (x, y) in s.dist().iter().zip(back.dist().iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
            for (x, y) in s.mass().iter().zip(back.mass()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
            assert_eq!(space_to_json(&back).unwrap(), text);
        }
    }

    #[test]
    fn coordinate_forms() {
        let e = space_from_json(
            r#"{"n":2,"dist":{"points":[[0,0],[3,4]],"metric":"euclidean"},"mass":[1,1],"base":1}"#,
        )
        .unwrap();
        assert_eq!(e.d(0, 1), 5.0);
        assert_eq!(e.base(), 1);

        let c = space_from_json(
            r#"{"n":2,"dist":{"points":[[0.1],[6.0]],"metric":"circle","radius":2},"mass":[1,1],"base":0}"#,
        )
        .unwrap();
        let expect = 2.0 * (2.0 * PI - 5.9);
        assert!((c.d(0, 1) - expect).abs() < 1e-12);
    }

    #[test]
    fn circle_angles_give_an_exactly_symmetric_metric() {
        let c = space_from_json(
            r#"{"n":4,"dist":{"points":[[0],[1.5707963],[3.1415926],[4.712389]],"metric":"circle"},"mass":[1,1,1,1],"base":0}"#,
        )
        .unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(c.d(i, j).to_bits(), c.d(j, i).to_bits());
            }
        }
        assert!(crate::space::validate(&c).is_valid());
    }

    #[test]
    fn inconsistent_files_are_rejected() {
        assert!(space_from_json(r#"{"n":3,"dist":[[0,1],[1,0]],"mass":[1,1],"base":0}"#).is_err());
        assert!(space_from_json(r#"{"n":2,"dist":[[0,1],[1,0]],"mass":[1,1],"base":2}"#).is_err());
    }
}
