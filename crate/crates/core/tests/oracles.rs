//! Solvers against exhaustive grids.

use seqadv::divopt::grid::{channel_grid2, grid_oracle_min, grid_oracle_pair_min, simplex_grid};
use seqadv::divopt::{
    min_divergence_to_ball, pairwise_min_bhattacharyya, pairwise_min_divergence, ChannelSet, DistortionBall, SolverOptions,
};
use seqadv::equilibrium::{compute_b_star, solve_aware_equilibrium, solve_nonaware_adversary, GameSpec, NonAwareBounds};
use seqadv::prob::{apply_channel, bhattacharyya, kl_divergence, Channel, Distribution, DistortionMeasure};

const FLOOR: f64 = 1e-9;

fn dist(p: &[f64]) -> Distribution {
    Distribution::new(p.to_vec()).unwrap()
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(&a, &b)| if a == 0.0 { 0.0 } else { a * (a / b).ln() }).sum()
}

fn ball(p: &[f64], r: f64, m: DistortionMeasure) -> DistortionBall {
    DistortionBall::new(dist(p), r, m, FLOOR).unwrap()
}

/// Pattern search on free parameters: an 11-point-per-axis grid around `x`
/// that recenters on improvement and halves otherwise, down to 1e-7. `objective` returns `None` off the feasible set.
fn refine(mut x: Vec<f64>, mut half: f64, objective: impl Fn(&[f64]) -> Option<f64>) -> f64 {
    let mut best = objective(&x).expect("start is feasible");
    let dims = x.len();
    while half > 1e-7 {
        let step = half / 5.0;
        let center = x.clone();
        let mut idx = vec![0usize; dims];
        let mut y = vec![0.0; dims];
        loop {
            for d in 0..dims {
                y[d] = center[d] - half + idx[d] as f64 * step;
            }
            if let Some(v) = objective(&y) {
                if v < best {
                    best = v;
                    x.copy_from_slice(&y);
                }
            }
            let mut d = 0;
            while d < dims && {
                idx[d] += 1;
                idx[d] == 11
            } {
                idx[d] = 0;
                d += 1;
            }
            if d == dims {
                break;
            }
        }
        if x == center {
            half /= 2.0;
        }
    }
    best
}

/// Completes free coordinates to a point of the floored simplex.
fn complete(free: &[f64]) -> Option<Vec<f64>> {
    let last = 1.0 - free.iter().sum::<f64>();
    let mut q = free.to_vec();
    q.push(last);
    q.iter().all(|&v| v >= FLOOR).then_some(q)
}

fn ball_points(b: &DistortionBall, step: f64) -> Vec<Vec<f64>> {
    simplex_grid(b.dim(), step).unwrap().into_iter().filter(|q| q.iter().all(|&v| v >= FLOOR) && b.contains(q)).collect()
}

#[test]
fn ball_minimum_matches_grid() {
    let opts = SolverOptions::default();
    let cases = [
        (vec![0.2, 0.3, 0.5], 0.1, DistortionMeasure::TvL1, vec![0.6, 0.3, 0.1]),
        (vec![0.2, 0.3, 0.5], 0.02, DistortionMeasure::Kl, vec![0.6, 0.3, 0.1]),
        (vec![0.7, 0.2, 0.1], 0.3, DistortionMeasure::TvL1, vec![0.1, 0.1, 0.8]),
        (vec![0.4, 0.4, 0.2], 0.05, DistortionMeasure::Kl, vec![0.2, 0.2, 0.6]),
    ];
    for (p, r, m, qhat) in cases {
        let b = ball(&p, r, m);
        let solved = min_divergence_to_ball(&dist(&qhat), &b, &opts).unwrap();
        let grid = grid_oracle_min(&ball_points(&b, 2e-3), |q| kl(&qhat, q)).unwrap();
        assert!(solved.value <= grid.value + 1e-9, "{m:?} {} > {}", solved.value, grid.value);
        let free = grid.point[..2].to_vec();
        let fine = refine(free, 2e-3, |x| complete(x).filter(|q| b.contains(q)).map(|q| kl(&qhat, &q)));
        assert!(solved.value <= fine + 1e-9 && fine - solved.value < 1e-6, "{m:?} {} vs {fine}", solved.value);
        assert!(b.contains(solved.argmin.probs()));
    }
}

/// Boundary point of a ball over three symbols in the direction at angle
/// `theta` within the simplex plane, found by bisection.
fn boundary_point(b: &DistortionBall, theta: f64) -> Vec<f64> {
    let (s2, s6) = (2f64.sqrt(), 6f64.sqrt());
    let u = [theta.cos() / s2 + theta.sin() / s6, -theta.cos() / s2 + theta.sin() / s6, -2.0 * theta.sin() / s6];
    let c = b.center().probs();
    let at = |t: f64| -> Vec<f64> { (0..3).map(|x| c[x] + t * u[x]).collect() };
    let mut hi = (0..3).filter(|&x| u[x] < 0.0).map(|x| (c[x] - FLOOR) / -u[x]).fold(f64::INFINITY, f64::min);
    if b.contains(&at(hi)) {
        return at(hi);
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if b.contains(&at(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(lo)
}

/// `min f(a, b)` with `a` and `b` on the boundaries of two separated balls:
/// a 360 x 360 angle grid, then a zoom on the best angles.
fn boundary_pair_min(bi: &DistortionBall, bj: &DistortionBall, f: impl Fn(&[f64], &[f64]) -> f64) -> f64 {
    let angles: Vec<f64> = (0..360).map(|k| k as f64 * std::f64::consts::TAU / 360.0).collect();
    let (ri, rj): (Vec<_>, Vec<_>) =
        (angles.iter().map(|&t| boundary_point(bi, t)).collect(), angles.iter().map(|&t| boundary_point(bj, t)).collect());
    let mut best = (f64::INFINITY, 0, 0);
    for (x, a) in ri.iter().enumerate() {
        for (y, b) in rj.iter().enumerate() {
            let v = f(a, b);
            if v < best.0 {
                best = (v, x, y);
            }
        }
    }
    refine(vec![angles[best.1], angles[best.2]], 0.02, |t| Some(f(&boundary_point(bi, t[0]), &boundary_point(bj, t[1]))))
}

#[test]
fn pair_minimum_matches_grid() {
    let opts = SolverOptions::default();
    let bh = |a: &[f64], b: &[f64]| -a.iter().zip(b).map(|(x, y)| (x * y).sqrt()).sum::<f64>().ln();
    for m in [DistortionMeasure::TvL1, DistortionMeasure::Kl] {
        let r = if m == DistortionMeasure::TvL1 { 0.1 } else { 0.01 };
        let bi = ball(&[0.5, 0.3, 0.2], r, m);
        let bj = ball(&[0.2, 0.3, 0.5], r, m);
        let (pi, pj) = (ball_points(&bi, 4e-3), ball_points(&bj, 4e-3));

        let grid = grid_oracle_pair_min(&pi, &pj, |a, b| kl(a, b)).unwrap().unwrap();
        let solved = pairwise_min_divergence(&bi, &bj, &opts).unwrap();
        assert!(solved.value <= grid.value + 1e-9, "{m:?}");
        assert!(bi.contains(solved.q_i.probs()) && bj.contains(solved.q_j.probs()));
        let fine = boundary_pair_min(&bi, &bj, kl);
        assert!(solved.value <= fine + 1e-9 && fine - solved.value < 1e-6, "{m:?} {} vs {fine}", solved.value);

        let grid_b = grid_oracle_pair_min(&pi, &pj, |a, b| bh(a, b)).unwrap().unwrap();
        let solved_b = pairwise_min_bhattacharyya(&bi, &bj, &opts).unwrap();
        assert!(solved_b.value <= grid_b.value + 1e-9, "{m:?}");
        let fine = boundary_pair_min(&bi, &bj, bh);
        assert!(solved_b.value <= fine + 1e-9 && fine - solved_b.value < 1e-6, "{m:?} {} vs {fine}", solved_b.value);
    }
}

#[test]
fn bernoulli_b_star_matches_interval_grid() {
    let spec = GameSpec::new(vec![dist(&[0.38, 0.62]), dist(&[0.5, 0.5])], 0.05, DistortionMeasure::TvL1, vec![1.0, 1.0], FLOOR).unwrap();
    let b = compute_b_star(&spec, &SolverOptions::default()).unwrap();
    let grid = |c: f64| (0..=500).map(|i| c - 0.025 + i as f64 * 1e-4).collect::<Vec<_>>();
    let (g0, g1) = (grid(0.38), grid(0.5));
    let oracle = g0
        .iter()
        .flat_map(|&x| g1.iter().map(move |&y| bhattacharyya(&dist(&[x, 1.0 - x]), &dist(&[y, 1.0 - y])).unwrap()))
        .fold(f64::INFINITY, f64::min);
    assert!(b > 0.0);
    assert!((b - oracle).abs() < 1e-9, "{b} vs {oracle}");
}

#[test]
fn three_hypothesis_equilibrium_structure() {
    let opts = SolverOptions::default();
    let spec = GameSpec::new(
        vec![dist(&[0.6, 0.3, 0.1]), dist(&[0.2, 0.5, 0.3]), dist(&[0.1, 0.2, 0.7])],
        0.05,
        DistortionMeasure::TvL1,
        vec![1.0, 2.0, 0.5],
        FLOOR,
    )
    .unwrap();
    let sol = solve_aware_equilibrium(&spec, &opts).unwrap();
    let mut payoff = 0.0;
    for i in 0..3 {
        let per_pair =
            (0..3).filter(|&j| j != i).map(|j| pairwise_min_divergence(&spec.balls()[i], &spec.balls()[j], &opts).unwrap().value);
        let e = per_pair.fold(f64::INFINITY, f64::min);
        assert!((sol.exponents[i] - e).abs() < 1e-8, "{i}: {} vs {e}", sol.exponents[i]);
        for j in (0..3).filter(|&j| j != i) {
            let inner = min_divergence_to_ball(&sol.q_star[i], &spec.balls()[j], &opts).unwrap().value;
            assert!((sol.divergence_matrix[i][j] - inner).abs() < 1e-8);
        }
        let out = apply_channel(&spec.hypotheses()[i], &sol.witnesses[i]).unwrap();
        assert!(out.max_abs_diff(&sol.q_star[i]) < 1e-12);
        assert!(spec.balls()[i].contains(out.probs()));
        payoff += spec.weights()[i] * e;
    }
    assert!((sol.payoff - payoff).abs() < 1e-8);
}

#[test]
fn common_channel_minimum_matches_channel_grid() {
    let (p0, p1) = (dist(&[0.38, 0.62]), dist(&[0.5, 0.5]));
    let set = ChannelSet::common(p0.clone(), p1.clone(), 0.05, DistortionMeasure::TvL1, FLOOR).unwrap();
    let qhat = dist(&[0.44, 0.56]);
    let solved = set.min_max_divergence(&qhat, &SolverOptions::default()).unwrap();
    let eval = |a: &Channel| kl_divergence(&qhat, &apply_channel(&p0, a).unwrap()).max(kl_divergence(&qhat, &apply_channel(&p1, a).unwrap()));
    let grid = grid_oracle_min(&channel_grid2(1e-3).unwrap().filter(|a| set.contains(a)).collect::<Vec<_>>(), eval).unwrap();
    assert!(set.contains(&solved.channel));
    assert!(solved.value <= grid.value + 1e-9, "{} > {}", solved.value, grid.value);
    let start = vec![grid.point.get(0, 0), grid.point.get(1, 1)];
    let fine = refine(start, 1e-3, |x| {
        let a = Channel::new(2, vec![x[0], 1.0 - x[0], 1.0 - x[1], x[1]]).ok()?;
        set.contains(&a).then(|| eval(&a))
    });
    assert!(solved.value <= fine + 1e-9 && fine - solved.value < 1e-7, "{} vs {fine}", solved.value);
}

#[test]
fn nonaware_search_beats_channel_grid() {
    let opts = SolverOptions::default();
    let (p0, p1) = (dist(&[0.38, 0.62]), dist(&[0.5, 0.5]));
    let set = ChannelSet::common(p0.clone(), p1.clone(), 0.05, DistortionMeasure::TvL1, FLOOR).unwrap();
    let found = solve_nonaware_adversary(&p0, &p1, 0.05, DistortionMeasure::TvL1, 1.0, FLOOR, &opts).unwrap();
    let mut best = f64::INFINITY;
    for a in channel_grid2(0.02).unwrap().filter(|a| set.contains(a)) {
        best = best.min(NonAwareBounds::evaluate(&set, &a, 1.0, &opts).unwrap().achievable);
    }
    assert!(set.contains(&found.channel));
    assert!(found.achievable <= best + 1e-6, "{} > {best}", found.achievable);
}
