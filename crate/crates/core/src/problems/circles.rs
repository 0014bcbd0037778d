//! Sum-of-radii fitness for circle packings in the unit square.
//!
//! Given centers only, the best radii solve the linear program
//! `max sum r_i` with `0 <= r_i <= wall_i` and `r_i + r_j <= |c_i - c_j|`.

use super::lp;

/// Distances below this count as coincident centers.
const COINCIDENT: f64 = 1e-12;

/// Optimal radii for fixed centers. Centers outside the square get zero wall
/// distance, so their radii are forced to zero.
pub fn optimal_radii(centers: &[[f64; 2]]) -> Vec<f64> {
    let n = centers.len();
    if n == 0 {
        return Vec::new();
    }
    let mut rows = Vec::with_capacity(n + n * (n - 1) / 2);
    let mut rhs = Vec::with_capacity(rows.capacity());
    for (i, c) in centers.iter().enumerate() {
        let wall = c[0].min(1.0 - c[0]).min(c[1]).min(1.0 - c[1]).max(0.0);
        let mut row = vec![0.0; n];
        row[i] = 1.0;
        rows.push(row);
        rhs.push(wall);
    }
    for i in 0..n {
        for j in i + 1..n {
            let d = ((centers[i][0] - centers[j][0]).powi(2) + (centers[i][1] - centers[j][1]).powi(2)).sqrt();
            let d = if d < COINCIDENT { 0.0 } else { d };
            let mut row = vec![0.0; n];
            row[i] = 1.0;
            row[j] = 1.0;
            rows.push(row);
            rhs.push(d);
        }
    }
    let c = vec![1.0; n];
    // b >= 0 and the feasible region is bounded by the wall rows, so the
    // solver cannot fail here.
    lp::maximize(&c, &rows, &rhs)
        .expect("radii LP is bounded and origin-feasible")
        .x
}

pub fn circle_packing_fitness(centers: &[[f64; 2]]) -> f64 {
    optimal_radii(centers).iter().sum()
}

/// Reinterprets a flat coordinate vector `[x0, y0, x1, y1, ...]` as centers.
pub fn centers_from_flat(x: &[f64]) -> Vec<[f64; 2]> {
    x.chunks_exact(2).map(|c| [c[0], c[1]]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn square_symmetries(p: [f64; 2]) -> [[f64; 2]; 8] {
        let [x, y] = p;
        [
            [x, y],
            [1.0 - x, y],
            [x, 1.0 - y],
            [1.0 - x, 1.0 - y],
            [y, x],
            [1.0 - y, x],
            [y, 1.0 - x],
            [1.0 - y, 1.0 - x],
        ]
    }

    #[test]
    fn single_circle() {
        assert!((circle_packing_fitness(&[[0.5, 0.5]]) - 0.5).abs() < 1e-12);
        assert!((circle_packing_fitness(&[[0.2, 0.5]]) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn two_circles_match_closed_form() {
        // For two centers the LP optimum is min(d, w1 + w2).
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let c: Vec<[f64; 2]> = (0..2).map(|_| [rng.gen(), rng.gen()]).collect();
            let w = |p: [f64; 2]| p[0].min(1.0 - p[0]).min(p[1]).min(1.0 - p[1]);
            let d = ((c[0][0] - c[1][0]).powi(2) + (c[0][1] - c[1][1]).powi(2)).sqrt();
            let expected = d.min(w(c[0]) + w(c[1]));
            assert!((circle_packing_fitness(&c) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn coincident_centers_have_zero_radii() {
        let r = optimal_radii(&[[0.3, 0.3], [0.3, 0.3], [0.8, 0.8]]);
        assert_eq!(r[0], 0.0);
        assert_eq!(r[1], 0.0);
        assert!((r[2] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn invariant_under_square_symmetries_and_permutation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let n = rng.gen_range(2..7);
            let c: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen(), rng.gen()]).collect();
            let base = circle_packing_fitness(&c);
            for s in 0..8 {
                let mapped: Vec<[f64; 2]> = c.iter().map(|&p| square_symmetries(p)[s]).collect();
                assert!((circle_packing_fitness(&mapped) - base).abs() < 1e-9);
            }
            let mut perm = c.clone();
            perm.reverse();
            perm.rotate_left(1);
            assert!((circle_packing_fitness(&perm) - base).abs() < 1e-9);
        }
    }

    #[test]
    fn lp_dominates_random_feasible_radii() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let n = rng.gen_range(2..6);
            let c: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen(), rng.gen()]).collect();
            let best = circle_packing_fitness(&c);
            // Random direction scaled to the largest feasible multiple.
            let dir: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let mut scale = f64::INFINITY;
            for i in 0..n {
                let w = c[i][0].min(1.0 - c[i][0]).min(c[i][1]).min(1.0 - c[i][1]);
                scale = scale.min(w / dir[i]);
                for j in i + 1..n {
                    let d = ((c[i][0] - c[j][0]).powi(2) + (c[i][1] - c[j][1]).powi(2)).sqrt();
                    scale = scale.min(d / (dir[i] + dir[j]));
                }
            }
            let feasible: f64 = dir.iter().map(|v| v * scale).sum();
            assert!(best >= feasible - 1e-12);
        }
    }

    #[test]
    fn outside_centers_get_zero_radius() {
        let r = optimal_radii(&[[1.2, 0.5], [0.5, 0.5]]);
        assert_eq!(r[0], 0.0);
    }
}
