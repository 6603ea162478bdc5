//! Lookahead tree: node storage, transition caching across time steps,
//! solved labels, undiscounted value backup and root action selection.
//!
//! Nodes live in an arena. A child is always stored after its parent, so a
//! single reverse sweep over the arena visits children before parents.

use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

use crate::mdp::{ActionId, Observation, StateToken};

pub type NodeId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LookaheadError {
    #[error("root has no expanded children")]
    NoChildren,
    #[error("root has no child under action {0}")]
    MissingChild(ActionId),
    #[error("admission at depth {depth} exceeds horizon {horizon}")]
    DepthOverflow { depth: usize, horizon: usize },
    #[error("revisited edge produced a different successor state")]
    NonDeterministic,
    #[error("action {0} outside the action set")]
    InvalidAction(ActionId),
}

#[derive(Debug, Clone)]
pub struct Node {
    pub state: StateToken,
    pub obs: Observation,
    /// Actions from the current root.
    pub depth: usize,
    /// Reward on the edge from the parent.
    pub reward_in: f64,
    pub terminal: bool,
    pub solved: bool,
    /// Inherited from a previous time step's tree.
    pub cached: bool,
    /// Outcome of the novelty test at admission. Root and cached nodes are
    /// always novel.
    pub novel: bool,
    pub parent: Option<NodeId>,
    pub action_in: Option<ActionId>,
    children: Vec<Option<NodeId>>,
}

impl Node {
    pub fn child(&self, action: ActionId) -> Option<NodeId> {
        self.children.get(action.0).copied().flatten()
    }

    pub fn children(&self) -> impl Iterator<Item = (ActionId, NodeId)> + '_ {
        self.children
            .iter()
            .enumerate()
            .filter_map(|(a, c)| c.map(|c| (ActionId(a), c)))
    }

    pub fn is_leaf(&self) -> bool {
        self.children.iter().all(Option::is_none)
    }
}

/// Values produced by [`LookaheadTree::backup`].
#[derive(Debug, Clone, PartialEq)]
pub struct BackupResult {
    /// `V(n)` indexed by node id.
    pub values: Vec<f64>,
    /// `Q(root, a)` for each action; `None` where the root has no child.
    pub q: Vec<Option<f64>>,
}

impl BackupResult {
    /// Actions attaining the maximal root Q value.
    pub fn argmax_actions(&self) -> Vec<ActionId> {
        let best = self
            .q
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        self.q
            .iter()
            .enumerate()
            .filter(|(_, q)| **q == Some(best))
            .map(|(a, _)| ActionId(a))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct LookaheadTree {
    nodes: Vec<Node>,
    num_actions: usize,
    horizon: usize,
}

pub const ROOT: NodeId = 0;

impl LookaheadTree {
    pub fn new(
        state: StateToken,
        obs: Observation,
        terminal: bool,
        num_actions: usize,
        horizon: usize,
    ) -> Self {
        let root = Node {
            state,
            obs,
            depth: 0,
            reward_in: 0.0,
            terminal,
            solved: terminal,
            cached: false,
            novel: true,
            parent: None,
            action_in: None,
            children: vec![None; num_actions],
        };
        Self {
            nodes: vec![root],
            num_actions,
            horizon,
        }
    }

    pub fn root(&self) -> &Node {
        &self.nodes[ROOT]
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut Node {
        &mut self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn has_solved_label(&self) -> bool {
        self.root().solved
    }

    /// Actions leading from the root to `id`.
    pub fn path_to(&self, mut id: NodeId) -> Vec<ActionId> {
        let mut path = Vec::with_capacity(self.nodes[id].depth);
        while let (Some(p), Some(a)) = (self.nodes[id].parent, self.nodes[id].action_in) {
            path.push(a);
            id = p;
        }
        path.reverse();
        path
    }

    /// Admits the transition `(parent, action) -> child`. Revisiting an
    /// existing edge returns the existing node unchanged.
    #[allow(clippy::too_many_arguments)]
    pub fn update_lookahead(
        &mut self,
        parent: NodeId,
        action: ActionId,
        child_state: StateToken,
        reward: f64,
        terminal: bool,
        obs: Observation,
    ) -> Result<NodeId, LookaheadError> {
        if action.0 >= self.num_actions {
            return Err(LookaheadError::InvalidAction(action));
        }
        if let Some(existing) = self.nodes[parent].child(action) {
            if self.nodes[existing].state != child_state {
                return Err(LookaheadError::NonDeterministic);
            }
            return Ok(existing);
        }
        let depth = self.nodes[parent].depth + 1;
        if depth > self.horizon {
            return Err(LookaheadError::DepthOverflow {
                depth,
                horizon: self.horizon,
            });
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            state: child_state,
            obs,
            depth,
            reward_in: reward,
            terminal,
            solved: false,
            cached: false,
            novel: true,
            parent: Some(parent),
            action_in: Some(action),
            children: vec![None; self.num_actions],
        });
        self.nodes[parent].children[action.0] = Some(id);
        Ok(id)
    }

    fn all_children_solved(&self, id: NodeId) -> bool {
        self.nodes[id]
            .children
            .iter()
            .all(|c| c.is_some_and(|c| self.nodes[c].solved))
    }

    /// Marks `id` solved and propagates the label toward the root while every
    /// action of the parent leads to a solved child.
    pub fn update_solved_labels(&mut self, id: NodeId) {
        self.nodes[id].solved = true;
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            if self.nodes[p].solved || !self.all_children_solved(p) {
                break;
            }
            self.nodes[p].solved = true;
            cur = p;
        }
    }

    /// Undiscounted backup. Leaves take `termination_cost(obs)` unless
    /// terminal, in which case they are worth 0.
    pub fn backup<F>(&self, mut termination_cost: F) -> BackupResult
    where
        F: FnMut(&Observation) -> f64,
    {
        let mut values = vec![0.0; self.nodes.len()];
        for id in (0..self.nodes.len()).rev() {
            let node = &self.nodes[id];
            values[id] = if node.is_leaf() {
                if node.terminal {
                    0.0
                } else {
                    termination_cost(&node.obs)
                }
            } else {
                node.children()
                    .map(|(_, c)| self.nodes[c].reward_in + values[c])
                    .fold(f64::NEG_INFINITY, f64::max)
            };
        }
        let q = self.nodes[ROOT]
            .children
            .iter()
            .map(|c| c.map(|c| self.nodes[c].reward_in + values[c]))
            .collect();
        BackupResult { values, q }
    }

    /// Argmax of `Q(root, a)` over expanded actions, ties broken uniformly.
    pub fn select_root_action<F, R>(
        &self,
        termination_cost: F,
        rng: &mut R,
    ) -> Result<ActionId, LookaheadError>
    where
        F: FnMut(&Observation) -> f64,
        R: Rng + ?Sized,
    {
        if self.root().is_leaf() {
            return Err(LookaheadError::NoChildren);
        }
        let best = self.backup(termination_cost).argmax_actions();
        Ok(best[rng.random_range(0..best.len())])
    }

    /// Re-roots the tree at the child reached by `action`. The retained
    /// subtree is marked cached, depths are rebased, and solved labels are
    /// recomputed from terminal nodes only.
    pub fn advance_root(self, action: ActionId) -> Result<LookaheadTree, LookaheadError> {
        let new_root = self.nodes[ROOT]
            .child(action)
            .ok_or(LookaheadError::MissingChild(action))?;
        let base = self.nodes[new_root].depth;
        let mut old = self.nodes.into_iter().map(Some).collect::<Vec<_>>();
        let mut nodes: Vec<Node> = Vec::new();
        // (old id, new parent id); breadth-first keeps parents before children.
        let mut queue = std::collections::VecDeque::from([(new_root, None::<NodeId>)]);
        while let Some((old_id, parent)) = queue.pop_front() {
            let mut node = old[old_id].take().expect("tree node visited twice");
            let new_id = nodes.len();
            let old_children = std::mem::replace(&mut node.children, vec![None; self.num_actions]);
            node.depth -= base;
            node.cached = true;
            node.novel = true;
            node.solved = node.terminal;
            node.parent = parent;
            if parent.is_none() {
                node.action_in = None;
                node.reward_in = 0.0;
            }
            if let (Some(p), Some(a)) = (parent, node.action_in) {
                nodes[p].children[a.0] = Some(new_id);
            }
            nodes.push(node);
            for c in old_children.into_iter().flatten() {
                queue.push_back((c, Some(new_id)));
            }
        }
        let mut tree = LookaheadTree {
            nodes,
            num_actions: self.num_actions,
            horizon: self.horizon,
        };
        for id in (0..tree.nodes.len()).rev() {
            if !tree.nodes[id].solved && !tree.nodes[id].is_leaf() && tree.all_children_solved(id) {
                tree.nodes[id].solved = true;
            }
        }
        Ok(tree)
    }

    /// One line per node: `path depth reward flags`, where flags are
    /// `T`erminal, `S`olved, `C`ached and `P`runed.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut stack = vec![ROOT];
        while let Some(id) = stack.pop() {
            let n = &self.nodes[id];
            let path = self
                .path_to(id)
                .iter()
                .map(|a| a.to_string())
                .collect::<Vec<_>>()
                .join(".");
            let mut flags = String::new();
            for (on, c) in [
                (n.terminal, 'T'),
                (n.solved, 'S'),
                (n.cached, 'C'),
                (!n.novel, 'P'),
            ] {
                flags.push(if on { c } else { '-' });
            }
            let path = if path.is_empty() { "root".to_string() } else { path };
            let _ = writeln!(out, "{path} {} {} {flags}", n.depth, n.reward_in);
            let mut kids: Vec<_> = n.children().map(|(_, c)| c).collect();
            kids.reverse();
            stack.extend(kids);
        }
        out
    }
}
