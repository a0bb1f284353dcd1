use std::collections::{HashMap, VecDeque};
use std::sync::RwLock;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::domain::{Family, StateId, TreeEnv};
use crate::error::{Error, Result};
use crate::rng::{partial_shuffle, pick, RngStream};

use super::check_goal_rewards;

/// Grid cell as (column, row).
pub type Cell = (usize, usize);

/// Give up on a spec after this many rejected wall layouts.
pub const MAX_LAYOUT_ATTEMPTS: usize = 10_000;

// Order in which neighbours are revealed: up a row, down a row, right, left.
const MOVES: [(isize, isize); 4] = [(0, 1), (0, -1), (1, 0), (-1, 0)];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NavSpec {
    pub width: usize,
    pub height: usize,
    pub wall_density: f64,
    pub goal_rewards: Vec<f64>,
    pub max_path_len: usize,
    pub seed: u64,
    #[serde(default)]
    pub start: Cell,
}

impl NavSpec {
    pub fn new(
        width: usize,
        height: usize,
        wall_density: f64,
        num_goals: usize,
        max_path_len: usize,
        seed: u64,
    ) -> Result<Self> {
        Ok(Self {
            width,
            height,
            wall_density,
            goal_rewards: super::default_goal_rewards(num_goals)?,
            max_path_len,
            seed,
            start: (0, 0),
        })
    }

    pub fn num_walls(&self) -> usize {
        (self.wall_density * (self.width * self.height) as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Param("grid must be at least 1x1".into()));
        }
        if !(0.0..1.0).contains(&self.wall_density) {
            return Err(Error::Param("wall density must lie in [0, 1)".into()));
        }
        if self.max_path_len == 0 {
            return Err(Error::Param("maximum path length must be positive".into()));
        }
        if self.start.0 >= self.width || self.start.1 >= self.height {
            return Err(Error::Param("start cell outside the grid".into()));
        }
        check_goal_rewards(&self.goal_rewards)?;
        let needed = self.num_walls() + self.goal_rewards.len() + 1;
        if needed > self.width * self.height {
            return Err(Error::Param(format!(
                "{needed} cells needed for start, walls and goals but the grid has {}",
                self.width * self.height
            )));
        }
        Ok(())
    }
}

/// A concrete maze: walls and goal cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NavLayout {
    pub width: usize,
    pub height: usize,
    pub start: Cell,
    pub walls: Vec<Cell>,
    pub goals: Vec<(Cell, f64)>,
}

impl NavLayout {
    fn idx(&self, c: Cell) -> usize {
        c.1 * self.width + c.0
    }

    /// Shortest number of moves from the start to every cell, never passing
    /// through walls or through goal cells (a goal ends the path).
    pub fn distances(&self) -> Vec<Option<usize>> {
        let n = self.width * self.height;
        let mut blocked = vec![false; n];
        for &w in &self.walls {
            blocked[self.idx(w)] = true;
        }
        let mut is_goal = vec![false; n];
        for &(g, _) in &self.goals {
            is_goal[self.idx(g)] = true;
        }
        let mut dist = vec![None; n];
        dist[self.idx(self.start)] = Some(0);
        let mut queue = VecDeque::from([self.start]);
        while let Some(c) = queue.pop_front() {
            let d = dist[self.idx(c)].unwrap();
            if is_goal[self.idx(c)] {
                continue;
            }
            for next in neighbours(self.width, self.height, c) {
                let j = self.idx(next);
                if !blocked[j] && dist[j].is_none() {
                    dist[j] = Some(d + 1);
                    queue.push_back(next);
                }
            }
        }
        dist
    }
}

fn neighbours(width: usize, height: usize, c: Cell) -> impl Iterator<Item = Cell> {
    MOVES.iter().filter_map(move |&(dx, dy)| {
        let x = c.0 as isize + dx;
        let y = c.1 as isize + dy;
        (x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height)
            .then_some((x as usize, y as usize))
    })
}

pub fn cell_name(c: Cell) -> String {
    format!("x{}y{}", c.0, c.1)
}

#[derive(Clone, Debug)]
struct NavNode {
    parent: Option<StateId>,
    cell: Cell,
    len: usize,
    children: Option<Vec<StateId>>,
}

/// Navigation as a tree over paths. A state is a walk from the start; its
/// children extend it by one move. Walks may revisit cells, stop at the
/// first goal they enter, and have at most `max_path_len` moves.
///
/// The path tree is huge, so nodes are created on first request. Ids are
/// assigned in that order; names are canonical.
pub struct NavTree {
    layout: NavLayout,
    max_len: usize,
    wall: Vec<bool>,
    goal: Vec<Option<f64>>,
    best: f64,
    truth_len: usize,
    arena: RwLock<Vec<NavNode>>,
}

impl Clone for NavTree {
    fn clone(&self) -> Self {
        Self {
            layout: self.layout.clone(),
            max_len: self.max_len,
            wall: self.wall.clone(),
            goal: self.goal.clone(),
            best: self.best,
            truth_len: self.truth_len,
            arena: RwLock::new(self.arena.read().unwrap().clone()),
        }
    }
}

impl std::fmt::Debug for NavTree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NavTree")
            .field("layout", &self.layout)
            .field("max_len", &self.max_len)
            .finish()
    }
}

impl NavTree {
    pub fn from_layout(layout: NavLayout, max_path_len: usize) -> Result<Self> {
        let n = layout.width * layout.height;
        let mut wall = vec![false; n];
        let mut goal = vec![None; n];
        let in_grid = |c: Cell| c.0 < layout.width && c.1 < layout.height;
        if !in_grid(layout.start) {
            return Err(Error::Param("start outside the grid".into()));
        }
        for &w in &layout.walls {
            if !in_grid(w) || w == layout.start {
                return Err(Error::Param(format!("bad wall cell {w:?}")));
            }
            wall[layout.idx(w)] = true;
        }
        for &(g, r) in &layout.goals {
            if !in_grid(g) || g == layout.start || wall[layout.idx(g)] || goal[layout.idx(g)].is_some() {
                return Err(Error::Param(format!("bad goal cell {g:?}")));
            }
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::Param("goal rewards must lie in (0, 1]".into()));
            }
            goal[layout.idx(g)] = Some(r);
        }
        let best = layout.goals.iter().map(|g| g.1).fold(0.0, f64::max);
        let dist = layout.distances();
        let truth_len = layout
            .goals
            .iter()
            .filter(|g| g.1 == best)
            .filter_map(|g| dist[layout.idx(g.0)])
            .min()
            .unwrap_or(0);
        let root = NavNode {
            parent: None,
            cell: layout.start,
            len: 0,
            children: None,
        };
        Ok(Self {
            layout,
            max_len: max_path_len,
            wall,
            goal,
            best,
            truth_len,
            arena: RwLock::new(vec![root]),
        })
    }

    pub fn layout(&self) -> &NavLayout {
        &self.layout
    }

    pub fn max_path_len(&self) -> usize {
        self.max_len
    }

    pub fn cell(&self, s: StateId) -> Cell {
        self.arena.read().unwrap()[s.index()].cell
    }

    /// Number of path states materialized so far.
    pub fn materialized(&self) -> usize {
        self.arena.read().unwrap().len()
    }

    fn cell_reward(&self, c: Cell) -> f64 {
        self.goal[self.layout.idx(c)].unwrap_or(0.0)
    }

    fn moves(&self, c: Cell, len: usize) -> Vec<Cell> {
        if len >= self.max_len || self.goal[self.layout.idx(c)].is_some() {
            return Vec::new();
        }
        neighbours(self.layout.width, self.layout.height, c)
            .filter(|&m| !self.wall[self.layout.idx(m)])
            .collect()
    }

    fn node(&self, s: StateId) -> NavNode {
        self.arena.read().unwrap()[s.index()].clone()
    }

    fn value_dp(&self, c: Cell, len: usize, memo: &mut HashMap<(Cell, usize), f64>) -> f64 {
        if let Some(&v) = memo.get(&(c, len)) {
            return v;
        }
        let moves = self.moves(c, len);
        let v = if moves.is_empty() {
            self.cell_reward(c)
        } else {
            moves
                .iter()
                .map(|&m| self.value_dp(m, len + 1, memo))
                .sum::<f64>()
                / moves.len() as f64
        };
        memo.insert((c, len), v);
        v
    }
}

impl TreeEnv for NavTree {
    fn family(&self) -> Family {
        Family::Nav
    }

    fn root(&self) -> StateId {
        StateId(0)
    }

    fn children(&self, s: StateId) -> Vec<StateId> {
        if let Some(kids) = &self.arena.read().unwrap()[s.index()].children {
            return kids.clone();
        }
        let mut arena = self.arena.write().unwrap();
        if let Some(kids) = &arena[s.index()].children {
            return kids.clone();
        }
        let (cell, len) = (arena[s.index()].cell, arena[s.index()].len);
        let mut kids = Vec::new();
        for m in self.moves(cell, len) {
            let id = StateId(arena.len() as u32);
            arena.push(NavNode {
                parent: Some(s),
                cell: m,
                len: len + 1,
                children: None,
            });
            kids.push(id);
        }
        arena[s.index()].children = Some(kids.clone());
        kids
    }

    fn parent(&self, s: StateId) -> Option<StateId> {
        self.node(s).parent
    }

    fn depth(&self, s: StateId) -> usize {
        self.node(s).len
    }

    fn reward(&self, s: StateId) -> f64 {
        self.cell_reward(self.node(s).cell)
    }

    fn best_reward(&self) -> f64 {
        self.best
    }

    fn truth_path_len(&self) -> usize {
        self.truth_len
    }

    fn segment(&self, s: StateId) -> String {
        cell_name(self.node(s).cell)
    }

    fn is_leaf(&self, s: StateId) -> bool {
        let n = self.node(s);
        self.moves(n.cell, n.len).is_empty()
    }

    fn sample_rollout(&self, s: StateId, rng: &mut dyn RngCore) -> f64 {
        let n = self.node(s);
        let (mut cell, mut len) = (n.cell, n.len);
        loop {
            let moves = self.moves(cell, len);
            if moves.is_empty() {
                return self.cell_reward(cell);
            }
            cell = moves[pick(rng, moves.len())];
            len += 1;
        }
    }

    fn true_value(&self, s: StateId) -> f64 {
        let n = self.node(s);
        self.value_dp(n.cell, n.len, &mut HashMap::new())
    }
}

/// Places `round(density * w * h)` walls and the goals uniformly at random
/// on cells other than the start, rejecting layouts where some goal cannot
/// be reached within the path-length cap.
pub fn generate_nav(spec: &NavSpec) -> Result<NavTree> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let n_walls = spec.num_walls();
    let k = spec.goal_rewards.len();
    let cells: Vec<Cell> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&c| c != spec.start)
        .collect();
    let mut rng = RngStream::new(spec.seed, "nav/layout");
    for _ in 0..MAX_LAYOUT_ATTEMPTS {
        let mut pool = cells.clone();
        partial_shuffle(&mut rng, &mut pool, n_walls + k);
        let layout = NavLayout {
            width: w,
            height: h,
            start: spec.start,
            walls: pool[..n_walls].to_vec(),
            goals: pool[n_walls..n_walls + k]
                .iter()
                .copied()
                .zip(spec.goal_rewards.iter().copied())
                .collect(),
        };
        let dist = layout.distances();
        let reachable = layout
            .goals
            .iter()
            .all(|g| matches!(dist[layout.idx(g.0)], Some(d) if d <= spec.max_path_len));
        if reachable {
            return NavTree::from_layout(layout, spec.max_path_len);
        }
    }
    Err(Error::Generation(format!(
        "no layout with reachable goals after {MAX_LAYOUT_ATTEMPTS} attempts"
    )))
}
