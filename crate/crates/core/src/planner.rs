//! Shortest paths on the partially known navigation map.
//!
//! Unknown cells are treated as traversable (optimistic replanning), occupied
//! cells block. Path costs are kept as exact `(straight, diagonal)` move counts
//! so equal-cost comparisons are exact.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::world::{CellCoord, GridWorld, Occupancy};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NavCell {
    Unknown,
    Free,
    Occupied,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NavMap {
    width: usize,
    height: usize,
    cell_size: f64,
    cells: Vec<NavCell>,
}

impl NavMap {
    pub fn unknown(width: usize, height: usize, cell_size: f64) -> Self {
        Self {
            width,
            height,
            cell_size,
            cells: vec![NavCell::Unknown; width * height],
        }
    }

    pub fn from_cells(width: usize, height: usize, cell_size: f64, cells: Vec<NavCell>) -> Result<Self> {
        if cells.len() != width * height {
            return Err(Error::InvalidArgument("nav map cell count does not match dimensions".into()));
        }
        Ok(Self {
            width,
            height,
            cell_size,
            cells,
        })
    }

    /// A fully known map of the world's ground truth.
    pub fn from_world(world: &GridWorld) -> Self {
        let mut map = Self::unknown(world.width(), world.height(), world.cell_size());
        for r in 0..world.height() {
            for c in 0..world.width() {
                let cell = CellCoord::new(r, c);
                map.set(cell, match world.occupancy(cell) {
                    Occupancy::Free => NavCell::Free,
                    Occupancy::Occupied => NavCell::Occupied,
                });
            }
        }
        map
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn cells(&self) -> &[NavCell] {
        &self.cells
    }

    pub fn get(&self, c: CellCoord) -> NavCell {
        self.cells[c.row * self.width + c.col]
    }

    pub fn set(&mut self, c: CellCoord, v: NavCell) {
        self.cells[c.row * self.width + c.col] = v;
    }

    pub fn in_bounds(&self, c: CellCoord) -> bool {
        c.row < self.height && c.col < self.width
    }

    pub fn same_shape(&self, other: &NavMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn count(&self, kind: NavCell) -> usize {
        self.cells.iter().filter(|c| **c == kind).count()
    }

    fn passable(&self, r: isize, c: isize) -> bool {
        r >= 0
            && c >= 0
            && (r as usize) < self.height
            && (c as usize) < self.width
            && self.cells[r as usize * self.width + c as usize] != NavCell::Occupied
    }

    /// 8-connected moves out of `c`; diagonals may not cut an occupied corner.
    pub fn neighbours(&self, c: CellCoord) -> impl Iterator<Item = (CellCoord, PathCost)> + '_ {
        const MOVES: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];
        let (r, col) = (c.row as isize, c.col as isize);
        MOVES.iter().filter_map(move |&(dr, dc)| {
            let (nr, nc) = (r + dr, col + dc);
            if !self.passable(nr, nc) {
                return None;
            }
            let diagonal = dr != 0 && dc != 0;
            if diagonal && !(self.passable(r + dr, col) && self.passable(r, col + dc)) {
                return None;
            }
            let cost = if diagonal { PathCost::DIAGONAL } else { PathCost::STRAIGHT };
            Some((CellCoord::new(nr as usize, nc as usize), cost))
        })
    }

    fn check(&self, c: CellCoord) -> Result<()> {
        if self.in_bounds(c) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("cell {c} outside {}x{} map", self.height, self.width)))
        }
    }

    /// Single-source costs to every cell.
    pub fn distance_field(&self, from: CellCoord) -> Result<DistanceField> {
        self.check(from)?;
        Ok(self.search(from, |_| PathCost::ZERO, |_, _, _| false))
    }

    /// Best-first search from `from` ordered by cost plus the consistent
    /// heuristic `h`. `visit(cell, key, cost)` sees every settled cell before
    /// it is expanded and ends the search by returning `true`. Cells that
    /// were never settled hold upper bounds or `None`.
    fn search(
        &self,
        from: CellCoord,
        h: impl Fn(CellCoord) -> PathCost,
        mut visit: impl FnMut(CellCoord, PathCost, PathCost) -> bool,
    ) -> DistanceField {
        let mut cost: Vec<Option<PathCost>> = vec![None; self.cells.len()];
        let mut heap = BinaryHeap::new();
        let idx = |c: CellCoord| c.row * self.width + c.col;
        cost[idx(from)] = Some(PathCost::ZERO);
        heap.push(Entry {
            key: h(from),
            cost: PathCost::ZERO,
            cell: from,
        });
        while let Some(Entry { key, cost: d, cell }) = heap.pop() {
            if cost[idx(cell)].is_some_and(|best| best < d) {
                continue;
            }
            if visit(cell, key, d) {
                break;
            }
            for (next, step) in self.neighbours(cell) {
                let nd = d + step;
                let slot = &mut cost[idx(next)];
                if slot.is_none_or(|old| nd < old) {
                    *slot = Some(nd);
                    heap.push(Entry {
                        key: nd + h(next),
                        cost: nd,
                        cell: next,
                    });
                }
            }
        }
        DistanceField {
            width: self.width,
            cell_size: self.cell_size,
            cost,
        }
    }

    /// Path lengths (m) from `from` to each of `targets`; the search stops as
    /// soon as every target is settled.
    pub fn distances_to(&self, from: CellCoord, targets: &[CellCoord]) -> Result<Vec<Option<f64>>> {
        self.check(from)?;
        for t in targets {
            self.check(*t)?;
        }
        let mut remaining: Vec<CellCoord> = targets.to_vec();
        remaining.sort();
        remaining.dedup();
        let field = self.search(from, |_| PathCost::ZERO, |c, _, _| {
            if let Ok(k) = remaining.binary_search(&c) {
                remaining.remove(k);
            }
            remaining.is_empty()
        });
        Ok(targets.iter().map(|t| field.meters(*t)).collect())
    }

    /// Cost (m) of the cheapest path, or `None` when unreachable.
    pub fn shortest_distance(&self, from: CellCoord, to: CellCoord) -> Result<Option<f64>> {
        Ok(self.distances_to(from, &[to])?[0])
    }

    /// First cell of a shortest path from `from` to `to`. Equal-cost
    /// candidates are resolved by the smallest `(row, col)`. `None` when
    /// already at the goal or the goal is unreachable (an occupied goal
    /// counts as unreachable).
    pub fn next_step(&self, from: CellCoord, to: CellCoord) -> Result<Option<CellCoord>> {
        self.check(from)?;
        self.check(to)?;
        if self.get(to) == NavCell::Occupied {
            return Ok(None);
        }
        // A* from the goal toward `from` with the octile heuristic. After
        // `from` is settled the search continues through every key equal to
        // its cost, which settles all neighbours lying on a shortest path.
        let octile = |c: CellCoord| {
            let dr = c.row.abs_diff(from.row) as u32;
            let dc = c.col.abs_diff(from.col) as u32;
            PathCost {
                straight: dr.max(dc) - dr.min(dc),
                diagonal: dr.min(dc),
            }
        };
        let mut bound: Option<PathCost> = None;
        let field = self.search(to, octile, |cell, key, d| {
            if bound.is_some_and(|b| key > b) {
                return true;
            }
            if cell == from {
                bound = Some(d);
            }
            false
        });
        Ok(field.descend(self, from))
    }
}

/// Exact path cost as counts of straight and diagonal moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PathCost {
    pub straight: u32,
    pub diagonal: u32,
}

impl PathCost {
    pub const ZERO: PathCost = PathCost { straight: 0, diagonal: 0 };
    pub const STRAIGHT: PathCost = PathCost { straight: 1, diagonal: 0 };
    pub const DIAGONAL: PathCost = PathCost { straight: 0, diagonal: 1 };

    /// Cost in cell units.
    pub fn cells(&self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * std::f64::consts::SQRT_2
    }

    pub fn meters(&self, cell_size: f64) -> f64 {
        self.cells() * cell_size
    }
}

impl std::ops::Add for PathCost {
    type Output = PathCost;
    fn add(self, rhs: PathCost) -> PathCost {
        PathCost {
            straight: self.straight + rhs.straight,
            diagonal: self.diagonal + rhs.diagonal,
        }
    }
}

impl PartialOrd for PathCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PathCost {
    // a + b*sqrt(2) is distinct for distinct integer pairs, so comparing the
    // float values only ties on identical pairs.
    fn cmp(&self, other: &Self) -> Ordering {
        if self == other {
            return Ordering::Equal;
        }
        self.cells().total_cmp(&other.cells())
    }
}

#[derive(Debug, PartialEq, Eq)]
struct Entry {
    key: PathCost,
    cost: PathCost,
    cell: CellCoord,
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.key.cmp(&self.key).then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
pub struct DistanceField {
    width: usize,
    cell_size: f64,
    cost: Vec<Option<PathCost>>,
}

impl DistanceField {
    pub fn cost(&self, c: CellCoord) -> Option<PathCost> {
        self.cost[c.row * self.width + c.col]
    }

    pub fn meters(&self, c: CellCoord) -> Option<f64> {
        self.cost(c).map(|p| p.meters(self.cell_size))
    }

    /// Best neighbour of `from` when this field was grown from the goal.
    pub fn descend(&self, map: &NavMap, from: CellCoord) -> Option<CellCoord> {
        let here = self.cost(from)?;
        if here == PathCost::ZERO {
            return None;
        }
        map.neighbours(from)
            .filter(|(next, step)| self.cost(*next).is_some_and(|d| d + *step == here))
            .map(|(next, _)| next)
            .min()
    }
}
