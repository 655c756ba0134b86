#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use zener_vem::mesh::{BoundarySplit, PolygonalMesh};
use zener_vem::Point;

/// Star-shaped counter-clockwise polygon with 3–8 vertices, random scale
/// and position.
pub fn random_polygon(seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = std::f64::consts::TAU;
    loop {
        let n = rng.random_range(3..=8);
        let mut ang: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..tau)).collect();
        ang.sort_by(f64::total_cmp);
        let ok = (0..n).all(|i| {
            let next = if i + 1 < n { ang[i + 1] } else { ang[0] + tau };
            (0.25..std::f64::consts::PI - 0.1).contains(&(next - ang[i]))
        });
        if !ok {
            continue;
        }
        let scale = 10f64.powf(rng.random_range(-1.5..0.3));
        let shift = Point::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        return ang
            .iter()
            .map(|&a| shift + Point::new(a.cos(), a.sin()) * (scale * rng.random_range(0.4..1.0)))
            .collect();
    }
}

pub fn one_cell_mesh(pts: Vec<Point>) -> PolygonalMesh {
    let n = pts.len();
    PolygonalMesh::from_cells(pts, vec![(0..n).collect()], BoundarySplit::AllDirichlet).unwrap()
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
