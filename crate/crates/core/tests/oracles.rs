//! Independent oracles for the planner, conflict resolution, utility
//! learning and the ANOVA machinery.

use std::collections::VecDeque;

use pigchase_core::astar::a_star;
use pigchase_core::cognitive::{resolve_conflict, update_utility, ModelBuffers, Production};
use pigchase_core::game::{Cell, TileGrid, TileKind};
use pigchase_core::stats::dist::f_sf;
use pigchase_core::stats::two_way_anova_labels;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

fn bfs(grid: &TileGrid, start: Cell, goals: &[Cell], occupied: &[Cell]) -> Option<usize> {
    let mut dist = vec![vec![usize::MAX; grid.cols()]; grid.rows()];
    let mut queue = VecDeque::from([start]);
    dist[start.row][start.col] = 0;
    while let Some(c) = queue.pop_front() {
        if goals.contains(&c) {
            return Some(dist[c.row][c.col]);
        }
        for (dr, dc) in [(-1i64, 0i64), (0, 1), (1, 0), (0, -1)] {
            let (r, k) = (c.row as i64 + dr, c.col as i64 + dc);
            if r < 0 || k < 0 || r >= grid.rows() as i64 || k >= grid.cols() as i64 {
                continue;
            }
            let n = Cell::new(r as usize, k as usize);
            let free = matches!(grid.get(n), Some(TileKind::Passable | TileKind::Exit)) && !occupied.contains(&n);
            if free && dist[n.row][n.col] == usize::MAX {
                dist[n.row][n.col] = dist[c.row][c.col] + 1;
                queue.push_back(n);
            }
        }
    }
    None
}

fn random_grid(rng: &mut ChaCha8Rng) -> TileGrid {
    let mut grid = TileGrid::filled(9, 9, TileKind::Passable);
    let density = rng.random_range(0.1..0.45);
    for r in 0..9 {
        for c in 0..9 {
            if rng.random_bool(density) {
                grid.set(Cell::new(r, c), TileKind::Blocked);
            } else if rng.random_bool(0.05) {
                grid.set(Cell::new(r, c), TileKind::Exit);
            }
        }
    }
    grid
}

fn random_cell(rng: &mut ChaCha8Rng) -> Cell {
    Cell::new(rng.random_range(0..9), rng.random_range(0..9))
}

#[test]
fn a_star_matches_bfs_on_random_layouts() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut unreachable = 0;
    for _ in 0..100 {
        let grid = random_grid(&mut rng);
        let start = random_cell(&mut rng);
        let goals: Vec<Cell> = (0..rng.random_range(1..4)).map(|_| random_cell(&mut rng)).collect();
        let occupied: Vec<Cell> = (0..rng.random_range(0..3)).map(|_| random_cell(&mut rng)).collect();
        let got = a_star(&grid, start, &goals, &occupied);
        let want = bfs(&grid, start, &goals, &occupied);
        assert_eq!(got.as_ref().map(Vec::len), want, "start {start:?} goals {goals:?}");
        if let Some(path) = got {
            let mut prev = start;
            for c in &path {
                assert_eq!(prev.manhattan(*c), 1);
                assert!(grid.is_walkable(*c) && !occupied.contains(c));
                prev = *c;
            }
            if let Some(last) = path.last() {
                assert!(goals.contains(last));
            }
        } else {
            unreachable += 1;
        }
    }
    assert!(unreachable > 0, "the sample should include unreachable cases");
}

fn any(_: &ModelBuffers) -> bool {
    true
}

/// `P(U1 + e1 > U2 + e2)` for independent logistic noise of scale `s`.
fn choice_closed_form(du: f64, s: f64) -> f64 {
    let z = du / s;
    let ez = z.exp();
    ez * (ez - z - 1.0) / (ez - 1.0).powi(2)
}

fn choice_quadrature(du: f64, s: f64) -> f64 {
    let pdf = |x: f64| {
        let e = (-x / s).exp();
        e / (s * (1.0 + e).powi(2))
    };
    let cdf = |x: f64| 1.0 / (1.0 + (-x / s).exp());
    let (lo, hi, steps) = (-40.0 * s, 40.0 * s, 200_000);
    let h = (hi - lo) / f64::from(steps);
    (0..=steps)
        .map(|i| {
            let x = lo + h * f64::from(i);
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            w * pdf(x) * cdf(x + du)
        })
        .sum::<f64>()
        * h
}

#[test]
fn noisy_choice_matches_logistic_difference_oracle() {
    let closed = choice_closed_form(1.0, 0.25);
    assert!((closed - 0.9426).abs() < 1e-4, "{closed}");
    assert!((closed - choice_quadrature(1.0, 0.25)).abs() < 1e-6);

    let high = Production::new("high", any, 2.0);
    let low = Production::new("low", any, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = 100_000;
    let wins = (0..n).filter(|_| resolve_conflict(&[&high, &low], 0.25, &mut rng).unwrap() == 0).count();
    let p = wins as f64 / f64::from(n);
    assert!((p - closed).abs() < 0.02 * closed, "{p} vs {closed}");
}

#[test]
fn utility_closed_form() {
    let mut p = Production::new("p", any, 0.0);
    let (alpha, r) = (0.2, 10.0);
    for n in 1..=50 {
        let u = update_utility(&mut p, r, alpha).unwrap();
        let exact = r * (1.0 - (1.0f64 - alpha).powi(n));
        assert!((u - exact).abs() < 1e-9);
        match n {
            1 => assert!((u - 2.0).abs() < 1e-12),
            2 => assert!((u - 3.6).abs() < 1e-12),
            5 => assert!((u - 6.7232).abs() < 1e-12),
            _ => {}
        }
    }
}

/// Upper-tail F values from an independent high-precision implementation.
#[allow(clippy::excessive_precision)]
pub const F_TAIL_REFERENCE: [(f64, f64, f64, f64); 5] = [
    (6.85, 2.0, 914.0, 0.001_114_700_216_083_538_1),
    (1.0, 6.0, 20.0, 0.452_397_694_685_631_08),
    (3.5, 3.0, 10.0, 0.057_510_063_402_259_198),
    (0.2, 20.0, 5.0, 0.996_069_580_075_607_3),
    (12.0, 1.0, 40.0, 0.001_282_820_778_030_230_9),
];

#[test]
fn f_tail_matches_reference_values() {
    for (f, d1, d2, p) in F_TAIL_REFERENCE {
        assert!((f_sf(f, d1, d2) - p).abs() < 1e-10, "F({d1},{d2}) at {f}");
        let oracle = FisherSnedecor::new(d1, d2).unwrap().sf(f);
        assert!((f_sf(f, d1, d2) - oracle).abs() < 1e-8);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let (f, d1, d2) =
            (rng.random_range(0.01..20.0), rng.random_range(1..30) as f64, rng.random_range(2..500) as f64);
        let oracle = FisherSnedecor::new(d1, d2).unwrap().sf(f);
        assert!((f_sf(f, d1, d2) - oracle).abs() < 1e-8, "F({d1},{d2}) at {f}");
    }
}

/// Balanced 2×2 with four replicates per cell: returns (y, a, b).
fn balanced(effect_a: f64, effect_b: f64, interaction: f64) -> (Vec<f64>, Vec<&'static str>, Vec<&'static str>) {
    let noise = [0.3, -0.1, -0.4, 0.2];
    let (mut y, mut a, mut b) = (vec![], vec![], vec![]);
    for (i, la) in ["a0", "a1"].iter().enumerate() {
        for (j, lb) in ["b0", "b1"].iter().enumerate() {
            for e in noise {
                let (sa, sb) = (if i == 0 { -1.0 } else { 1.0 }, if j == 0 { -1.0 } else { 1.0 });
                y.push(10.0 + effect_a * sa + effect_b * sb + interaction * sa * sb + e);
                a.push(*la);
                b.push(*lb);
            }
        }
    }
    (y, a, b)
}

/// Textbook balanced-design sums of squares from cell and marginal means.
fn hand_ss(y: &[f64], a: &[&str], b: &[&str]) -> (f64, f64, f64, f64) {
    let mean = |f: &dyn Fn(usize) -> bool| {
        let v: Vec<f64> = (0..y.len()).filter(|&i| f(i)).map(|i| y[i]).collect();
        (v.iter().sum::<f64>() / v.len() as f64, v.len() as f64)
    };
    let (grand, _) = mean(&|_| true);
    let mut ss_a = 0.0;
    let mut ss_b = 0.0;
    let mut ss_cells = 0.0;
    for la in ["a0", "a1"] {
        let (m, n) = mean(&|i| a[i] == la);
        ss_a += n * (m - grand).powi(2);
    }
    for lb in ["b0", "b1"] {
        let (m, n) = mean(&|i| b[i] == lb);
        ss_b += n * (m - grand).powi(2);
    }
    let mut ss_res = 0.0;
    for la in ["a0", "a1"] {
        for lb in ["b0", "b1"] {
            let (m, n) = mean(&|i| a[i] == la && b[i] == lb);
            ss_cells += n * (m - grand).powi(2);
            ss_res += (0..y.len()).filter(|&i| a[i] == la && b[i] == lb).map(|i| (y[i] - m).powi(2)).sum::<f64>();
        }
    }
    (ss_a, ss_b, ss_cells - ss_a - ss_b, ss_res)
}

#[test]
fn balanced_anova_matches_hand_computation() {
    for (ea, eb, eab) in [(3.0, 0.0, 0.0), (1.0, 2.0, 0.5), (0.0, 0.0, 0.0)] {
        let (y, a, b) = balanced(ea, eb, eab);
        let t = two_way_anova_labels(&y, &a, &b, ("A", "B")).unwrap();
        let (ss_a, ss_b, ss_ab, ss_res) = hand_ss(&y, &a, &b);
        let df_res = (y.len() - 4) as f64;
        for (e, ss) in t.effects.iter().zip([ss_a, ss_b, ss_ab]) {
            assert!((e.ss - ss).abs() < 1e-6, "{} {} vs {ss}", e.name, e.ss);
            assert_eq!(e.df, 1);
            assert!((e.f - ss / (ss_res / df_res)).abs() < 1e-6);
        }
        assert!((t.residual_ss - ss_res).abs() < 1e-6);
        assert_eq!(t.residual_df, 12);
        let sum: f64 = t.effects.iter().map(|e| e.ss).sum::<f64>() + t.residual_ss;
        assert!((sum - t.total_ss).abs() < 1e-9);
    }
    let (y, a, b) = balanced(3.0, 0.0, 0.0);
    let t = two_way_anova_labels(&y, &a, &b, ("A", "B")).unwrap();
    assert!(t.effects[1].ss < 1e-9 && t.effects[2].ss < 1e-9);
    assert!(t.effects[0].f > 100.0 && t.effects[0].p < 1e-6);
}
