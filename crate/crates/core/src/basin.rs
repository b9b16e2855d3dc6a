//! Grid approximation of regions of attraction under gradient play.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::dynamics::{simulate_deterministic, LearningConfig, Status};
use crate::error::{Error, Result};
use crate::game::{Game, JointPoint};

pub const DEFAULT_MATCH_RADIUS: f64 = 0.1;
pub const DEFAULT_CELL_ITERS: usize = 10_000;

/// Evenly spaced nodes `lo, …, hi` (both ends included); a single node sits
/// at the midpoint. Each node is the center of one grid cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count == 0 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument {
                arg: "axis",
                reason: format!("need lo < hi and count >= 1, got ({lo}, {hi}, {count})"),
            });
        }
        Ok(GridAxis { lo, hi, count })
    }

    pub fn spacing(&self) -> f64 {
        if self.count > 1 {
            (self.hi - self.lo) / (self.count - 1) as f64
        } else {
            self.hi - self.lo
        }
    }

    pub fn node(&self, i: usize) -> f64 {
        if self.count == 1 {
            0.5 * (self.lo + self.hi)
        } else if i + 1 == self.count {
            self.hi
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.node(i)).collect()
    }
}

fn cell_count(axes: &[GridAxis]) -> usize {
    axes.iter().map(|a| a.count).product()
}

/// Cell centers in row-major order (last axis varies fastest).
pub fn cell_centers(axes: &[GridAxis]) -> Vec<Vec<f64>> {
    let total = cell_count(axes);
    (0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; axes.len()];
            for (a, axis) in axes.iter().enumerate().rev() {
                p[a] = axis.node(idx % axis.count);
                idx /= axis.count;
            }
            p
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Label {
    Equilibrium(usize),
    None,
    Diverged,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Equilibrium(i) => write!(f, "{i}"),
            Label::None => write!(f, "NONE"),
            Label::Diverged => write!(f, "DIVERGED"),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Label::Equilibrium(i) => s.serialize_u64(*i as u64),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BasinGrid {
    pub axes: Vec<GridAxis>,
    pub labels: Vec<Label>,
    pub equilibria: Vec<JointPoint>,
    pub match_radius: f64,
    pub rates: Vec<f64>,
    #[serde(skip)]
    pub final_points: Vec<Vec<f64>>,
}

impl BasinGrid {
    pub fn centers(&self) -> Vec<Vec<f64>> {
        cell_centers(&self.axes)
    }

    /// Label at multi-index `idx` (one entry per axis).
    pub fn label_at(&self, idx: &[usize]) -> Label {
        let mut flat = 0;
        for (axis, &i) in self.axes.iter().zip(idx) {
            flat = flat * axis.count + i;
        }
        self.labels[flat]
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

/// Label each grid cell by the equilibrium that gradient play from the cell
/// center reaches (within `match_radius`, angular distance on periodic games).
pub fn map_basins(
    game: &Game,
    axes: &[GridAxis],
    equilibria: &[JointPoint],
    match_radius: f64,
    cfg: &LearningConfig,
) -> Result<BasinGrid> {
    if axes.len() != game.dim() {
        return Err(Error::Dimension {
            expected: game.dim(),
            got: axes.len(),
        });
    }
    if !(match_radius > 0.0) {
        return Err(Error::InvalidArgument {
            arg: "match_radius",
            reason: format!("must be positive, got {match_radius}"),
        });
    }
    for (i, a) in equilibria.iter().enumerate() {
        if a.len() != game.dim() {
            return Err(Error::Dimension {
                expected: game.dim(),
                got: a.len(),
            });
        }
        for b in &equilibria[i + 1..] {
            if game.distance(a.as_slice(), b.as_slice()) <= 2.0 * match_radius {
                return Err(Error::InvalidArgument {
                    arg: "equilibria",
                    reason: "equilibria closer than twice the match radius".into(),
                });
            }
        }
    }
    let rates = match &cfg.rates {
        crate::dynamics::Rates::Constant(v) => v.clone(),
        _ => {
            return Err(Error::InvalidArgument {
                arg: "rates",
                reason: "basin mapping uses constant rates".into(),
            })
        }
    };
    // only the final iterate matters per cell
    let mut cell_cfg = cfg.clone();
    cell_cfg.target = None;
    cell_cfg.stride = Some(cfg.max_iters.max(1));

    let results: Vec<(Label, Vec<f64>)> = cell_centers(axes)
        .into_par_iter()
        .map(|c| {
            let x0 = match JointPoint::new(c.clone()) {
                Ok(p) => p,
                Err(_) => return (Label::None, c),
            };
            match simulate_deterministic(game, &x0, &cell_cfg) {
                Ok(t) if t.status == Status::Diverged => {
                    (Label::Diverged, t.final_point().as_slice().to_vec())
                }
                Ok(t) => {
                    let fin = t.final_point().as_slice().to_vec();
                    (classify_final(game, &fin, equilibria, match_radius), fin)
                }
                Err(_) => (Label::None, c),
            }
        })
        .collect();
    let (labels, final_points) = results.into_iter().unzip();
    Ok(BasinGrid {
        axes: axes.to_vec(),
        labels,
        equilibria: equilibria.to_vec(),
        match_radius,
        rates,
        final_points,
    })
}

fn classify_final(game: &Game, x: &[f64], equilibria: &[JointPoint], radius: f64) -> Label {
    equilibria
        .iter()
        .enumerate()
        .map(|(i, e)| (i, game.distance(x, e.as_slice())))
        .filter(|(_, d)| *d <= radius)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map_or(Label::None, |(i, _)| Label::Equilibrium(i))
}

/// Per-player cell masks of the zero sets `ω_i = 0` on a 2-D grid.
#[derive(Clone, Debug, Serialize)]
pub struct ZeroLineMasks {
    pub axes: Vec<GridAxis>,
    /// `masks[i][cell]`, row-major like [`BasinGrid::labels`].
    pub masks: Vec<Vec<bool>>,
}

impl ZeroLineMasks {
    pub fn intersection(&self) -> Vec<bool> {
        (0..self.masks[0].len())
            .map(|c| self.masks.iter().all(|m| m[c]))
            .collect()
    }

    /// 8-connected components of the intersection mask, as lists of cells.
    pub fn intersection_components(&self) -> Vec<Vec<usize>> {
        let inter = self.intersection();
        let (n0, n1) = (self.axes[0].count, self.axes[1].count);
        let mut seen = vec![false; inter.len()];
        let mut comps = Vec::new();
        for start in 0..inter.len() {
            if !inter[start] || seen[start] {
                continue;
            }
            let mut comp = Vec::new();
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(c) = stack.pop() {
                comp.push(c);
                let (i, j) = ((c / n1) as isize, (c % n1) as isize);
                for di in -1..=1 {
                    for dj in -1..=1 {
                        let (a, b) = (i + di, j + dj);
                        if a < 0 || b < 0 || a >= n0 as isize || b >= n1 as isize {
                            continue;
                        }
                        let nb = a as usize * n1 + b as usize;
                        if inter[nb] && !seen[nb] {
                            seen[nb] = true;
                            stack.push(nb);
                        }
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    /// Cell index containing point `p`.
    pub fn cell_of(&self, p: &[f64]) -> usize {
        let idx: Vec<usize> = self
            .axes
            .iter()
            .zip(p)
            .map(|(a, &v)| {
                let i = ((v - a.lo) / a.spacing()).round();
                i.clamp(0.0, (a.count - 1) as f64) as usize
            })
            .collect();
        idx[0] * self.axes[1].count + idx[1]
    }
}

/// Mark cells where `ω_i` changes sign across the cell, judged from its values
/// at the four cell corners. Corner values with `|ω_i| ≤ tol` count as zero.
pub fn zero_lines(game: &Game, axes: &[GridAxis], tol: f64) -> Result<ZeroLineMasks> {
    if game.num_players() != 2 || game.dim() != 2 || axes.len() != 2 {
        return Err(Error::InvalidArgument {
            arg: "game",
            reason: "zero lines need a two-player game with scalar actions and a 2-D grid".into(),
        });
    }
    let (a0, a1) = (axes[0], axes[1]);
    let (h0, h1) = (a0.spacing(), a1.spacing());
    let corners0: Vec<f64> = (0..=a0.count).map(|i| a0.node(0) - 0.5 * h0 + i as f64 * h0).collect();
    let corners1: Vec<f64> = (0..=a1.count).map(|j| a1.node(0) - 0.5 * h1 + j as f64 * h1).collect();
    let m1 = corners1.len();
    let values: Vec<Vec<f64>> = (0..corners0.len() * m1)
        .into_par_iter()
        .map(|c| game.game_form_slice(&[corners0[c / m1], corners1[c % m1]]))
        .collect::<Result<_>>()?;
    let sign = |v: f64| {
        if v > tol {
            1
        } else if v < -tol {
            -1
        } else {
            0
        }
    };
    let masks = (0..2)
        .map(|p| {
            (0..a0.count * a1.count)
                .map(|cell| {
                    let (i, j) = (cell / a1.count, cell % a1.count);
                    let s = [
                        sign(values[i * m1 + j][p]),
                        sign(values[i * m1 + j + 1][p]),
                        sign(values[(i + 1) * m1 + j][p]),
                        sign(values[(i + 1) * m1 + j + 1][p]),
                    ];
                    s.contains(&0) || (s.contains(&1) && s.contains(&-1))
                })
                .collect()
        })
        .collect();
    Ok(ZeroLineMasks {
        axes: axes.to_vec(),
        masks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decoupled() -> Game {
        Game::builder(vec![1, 1])
            .cost(0, |x| x[0] * x[0])
            .cost(1, |x| x[1] * x[1])
            .gradient(0, |x| vec![2.0 * x[0]])
            .gradient(1, |x| vec![2.0 * x[1]])
            .build()
            .unwrap()
    }

    #[test]
    fn axis_nodes_include_endpoints() {
        let a = GridAxis::new(-1.0, 1.0, 5).unwrap();
        assert_eq!(a.nodes(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(GridAxis::new(0.0, 2.0, 1).unwrap().nodes(), vec![1.0]);
        assert!(GridAxis::new(1.0, 1.0, 3).is_err());
    }

    #[test]
    fn global_contraction_labels_everything() {
        let g = decoupled();
        let axes = [GridAxis::new(-2.0, 2.0, 5).unwrap(), GridAxis::new(-2.0, 2.0, 5).unwrap()];
        let eq = [g.point(vec![0.0, 0.0]).unwrap()];
        let cfg = LearningConfig::constant(vec![0.2, 0.2], 1e-9, 10_000);
        let grid = map_basins(&g, &axes, &eq, 0.1, &cfg).unwrap();
        assert_eq!(grid.labels.len(), 25);
        assert!(grid.labels.iter().all(|&l| l == Label::Equilibrium(0)));
    }

    #[test]
    fn close_equilibria_rejected() {
        let g = decoupled();
        let axes = [GridAxis::new(-1.0, 1.0, 3).unwrap(), GridAxis::new(-1.0, 1.0, 3).unwrap()];
        let eq = [g.point(vec![0.0, 0.0]).unwrap(), g.point(vec![0.1, 0.0]).unwrap()];
        let cfg = LearningConfig::constant(vec![0.2, 0.2], 1e-9, 100);
        assert!(map_basins(&g, &axes, &eq, 0.1, &cfg).is_err());
    }

    #[test]
    fn unstable_rate_labels_diverged() {
        let g = decoupled();
        let axes = [GridAxis::new(0.5, 1.0, 2).unwrap(), GridAxis::new(0.5, 1.0, 2).unwrap()];
        let eq = [g.point(vec![0.0, 0.0]).unwrap()];
        let cfg = LearningConfig::constant(vec![1.5, 1.5], 1e-9, 10_000);
        let grid = map_basins(&g, &axes, &eq, 0.1, &cfg).unwrap();
        assert!(grid.labels.iter().all(|&l| l == Label::Diverged));
    }

    #[test]
    fn decoupled_zero_lines_are_axes() {
        let g = decoupled();
        let axes = [GridAxis::new(-1.0, 1.0, 5).unwrap(), GridAxis::new(-1.0, 1.0, 5).unwrap()];
        let z = zero_lines(&g, &axes, 1e-12).unwrap();
        for cell in 0..25 {
            let (i, j) = (cell / 5, cell % 5);
            assert_eq!(z.masks[0][cell], i == 2, "cell {cell}");
            assert_eq!(z.masks[1][cell], j == 2, "cell {cell}");
        }
        assert_eq!(z.intersection_components(), vec![vec![12]]);
    }

    #[test]
    fn bilinear_player_one_mask_is_x_axis() {
        let g = Game::builder(vec![1, 1])
            .cost(0, |x| x[0] * x[1])
            .cost(1, |x| -x[0] * x[1])
            .build()
            .unwrap();
        let axes = [GridAxis::new(-1.0, 1.0, 5).unwrap(), GridAxis::new(-1.0, 1.0, 5).unwrap()];
        let z = zero_lines(&g, &axes, 1e-9).unwrap();
        for cell in 0..25 {
            assert_eq!(z.masks[0][cell], cell % 5 == 2);
        }
    }
}
