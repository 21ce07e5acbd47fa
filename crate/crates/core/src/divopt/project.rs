//! Euclidean projections onto the floored simplex and onto distortion balls.

use crate::prob::DistortionMeasure;

/// Projection onto `{x : x_i >= floor, sum x = 1}` by the sorting method.
pub fn project_to_simplex(y: &[f64], floor: f64) -> Vec<f64> {
    let k = y.len();
    let mass = 1.0 - k as f64 * floor;
    let v: Vec<f64> = y.iter().map(|&yi| yi - floor).collect();
    let mut u = v.clone();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumulative += uj;
        let t = (cumulative - mass) / (j as f64 + 1.0);
        if uj - t > 0.0 {
            theta = t;
        }
    }
    let mut x: Vec<f64> = v.iter().map(|&vi| (vi - theta).max(0.0) + floor).collect();
    fix_sum(&mut x, floor);
    x
}

/// Projection onto `{q on the simplex : q >= floor, d(center, q) <= radius}`.
///
/// For a multiplier `beta` on the distortion constraint and `nu` on the
/// sum constraint the minimizer is separable per coordinate; `nu` is found
/// by bisection on the sum and `beta` by bisection on the constraint.
pub fn project_to_ball(
    y: &[f64],
    center: &[f64],
    radius: f64,
    measure: DistortionMeasure,
    floor: f64,
) -> Vec<f64> {
    let plain = project_to_simplex(y, floor);
    if measure.evaluate(center, &plain) <= radius {
        return plain;
    }
    let feasible = |q: &[f64]| measure.evaluate(center, q) <= radius;

    let mut beta_hi = 1e-3;
    let mut q_hi = penalized(y, center, beta_hi, measure, floor);
    while !feasible(&q_hi) {
        beta_hi *= 4.0;
        q_hi = penalized(y, center, beta_hi, measure, floor);
        if beta_hi > 1e30 {
            // The center itself is the limit point of the penalized path.
            return center.to_vec();
        }
    }
    let mut beta_lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (beta_lo + beta_hi);
        if mid <= beta_lo || mid >= beta_hi {
            break;
        }
        let q = penalized(y, center, mid, measure, floor);
        if feasible(&q) {
            beta_hi = mid;
            q_hi = q;
        } else {
            beta_lo = mid;
        }
        if beta_hi - beta_lo <= 1e-15 * beta_hi {
            break;
        }
    }
    q_hi
}

/// Minimizer of `0.5 |q - y|^2 + beta * d(center, q)` over the floored simplex.
fn penalized(y: &[f64], center: &[f64], beta: f64, measure: DistortionMeasure, floor: f64) -> Vec<f64> {
    let coord = |nu: f64, j: usize| -> f64 {
        let z = y[j] - nu;
        let c = center[j];
        let q = match measure {
            DistortionMeasure::TvL1 => {
                let d = z - c;
                c + d.signum() * (d.abs() - beta).max(0.0)
            }
            DistortionMeasure::Kl => {
                // Positive root of q^2 - z q - beta c = 0, in a cancellation-free form.
                let disc = (z * z + 4.0 * beta * c).sqrt();
                if z >= 0.0 {
                    0.5 * (z + disc)
                } else {
                    2.0 * beta * c / (disc - z)
                }
            }
        };
        q.max(floor)
    };
    let total = |nu: f64| -> f64 { (0..y.len()).map(|j| coord(nu, j)).sum() };

    let mut lo = -1.0;
    while total(lo) < 1.0 {
        lo = 2.0 * lo - 1.0;
    }
    let mut hi = 1.0;
    while total(hi) > 1.0 {
        hi = 2.0 * hi + 1.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let nu = 0.5 * (lo + hi);
    let mut q: Vec<f64> = (0..y.len()).map(|j| coord(nu, j)).collect();
    fix_sum(&mut q, floor);
    q
}

/// Moves the residual `1 - sum(q)` onto the largest entry.
fn fix_sum(q: &mut [f64], floor: f64) {
    let residual = 1.0 - q.iter().sum::<f64>();
    if residual != 0.0 {
        let imax = (0..q.len()).fold(0, |best, i| if q[i] > q[best] { i } else { best });
        q[imax] = (q[imax] + residual).max(floor);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::tv_l1;
    use proptest::prelude::*;

    fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    }

    #[test]
    fn simplex_projection_basics() {
        assert_eq!(project_to_simplex(&[0.2, 0.8], 0.0), vec![0.2, 0.8]);
        let p = project_to_simplex(&[1.0, 1.0], 0.0);
        assert!((p[0] - 0.5).abs() < 1e-15);
        let p = project_to_simplex(&[2.0, -1.0, 0.0], 1e-3);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(p.iter().all(|&v| v >= 1e-3));
        assert!((p[0] - (1.0 - 2e-3)).abs() < 1e-12);
    }

    #[test]
    fn tv_ball_projection_on_two_symbols() {
        // Interval [0.475, 0.525] on the first coordinate.
        let q = project_to_ball(&[0.3, 0.7], &[0.5, 0.5], 0.05, DistortionMeasure::TvL1, 1e-9);
        assert!((q[0] - 0.475).abs() < 1e-12, "{q:?}");
        let q = project_to_ball(&[0.49, 0.51], &[0.5, 0.5], 0.05, DistortionMeasure::TvL1, 1e-9);
        assert!((q[0] - 0.49).abs() < 1e-15);
    }

    fn simplex_point(k: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.05f64..1.0, k).prop_map(|w| {
            let s: f64 = w.iter().sum();
            w.into_iter().map(|v| v / s).collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        /// The projection is feasible and no random feasible point is closer.
        #[test]
        fn ball_projection_is_nearest_feasible_point(
            center in simplex_point(3),
            y in prop::collection::vec(-0.5f64..1.5, 3),
            radius in 0.01f64..0.4,
            kl in any::<bool>(),
            probes in prop::collection::vec(simplex_point(3), 50),
        ) {
            let measure = if kl { DistortionMeasure::Kl } else { DistortionMeasure::TvL1 };
            let q = project_to_ball(&y, &center, radius, measure, 1e-9);
            prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(q.iter().all(|&v| v >= 1e-9));
            prop_assert!(measure.evaluate(&center, &q) <= radius + 1e-9);
            let dq = sq_dist(&q, &y);
            for probe in probes {
                // Pull the probe into the ball along the segment towards the center.
                let mut t = 1.0;
                let mut p = probe.clone();
                while measure.evaluate(&center, &p) > radius {
                    t *= 0.5;
                    p = probe.iter().zip(&center).map(|(a, c)| c + t * (a - c)).collect();
                }
                prop_assert!(sq_dist(&p, &y) >= dq - 1e-9);
            }
        }

        #[test]
        fn tv_projection_inside_ball_is_identity(center in simplex_point(4), w in simplex_point(4), t in 0.0f64..1.0) {
            let y: Vec<f64> = center.iter().zip(&w).map(|(c, v)| c + t * (v - c)).collect();
            let radius = tv_l1(&center, &y) + 1e-6;
            let q = project_to_ball(&y, &center, radius, DistortionMeasure::TvL1, 1e-12);
            prop_assert!(sq_dist(&q, &y) < 1e-20);
        }
    }
}
