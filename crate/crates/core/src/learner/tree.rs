use std::collections::HashMap;
use std::sync::Arc;

use super::acrl::{Mode, Planner};
use super::planning::{argmax, value_iteration, FiniteMdp, ValueTables};
use crate::error::{Error, Result};
use crate::model::{
    distance, Action, CompetitiveSpec, Environment, EpisodeRecord, ModelSequence, Observation, Policy, State,
    Transition,
};
use crate::safety::{ActionSet, SafeSet, SafetyLedger, SensitivityTable};

/// Largest tree level [`HistoryTree::build`] will expand.
pub const MAX_LEVEL_NODES: usize = 1 << 20;

/// An environment whose randomness is a choice among finitely many
/// deterministic branches. The action grid is [`Environment::action_grid`].
pub trait BranchingEnv: Environment {
    fn n_branches(&self) -> usize;

    /// `P(branch)` at `round`; sums to one.
    fn branch_probabilities(&self, round: usize) -> Vec<f64>;

    /// Dynamics along a fixed branch.
    fn branch_transition(&self, round: usize, state: &[f64], action: &[f64], branch: usize) -> Transition;
}

fn key_of(history: &[State], state: &[f64], actions: &[Action]) -> Vec<u64> {
    history
        .iter()
        .flat_map(|s| s.iter())
        .chain(state.iter())
        .chain(actions.iter().flat_map(|a| a.iter()))
        .map(|v| v.to_bits())
        .collect()
}

/// Where ML action `a` leads from a node: one `(reward, child)` per branch.
#[derive(Debug, Clone)]
struct Edge {
    outcomes: Vec<(f64, usize)>,
}

#[derive(Debug, Clone, Default)]
struct Level {
    keys: HashMap<Vec<u64>, usize>,
    /// `edges[node * n_actions + a]`.
    edges: Vec<Edge>,
    n_nodes: usize,
}

struct Pending {
    history: Vec<State>,
    state: State,
    actions: Vec<Action>,
    ledger: SafetyLedger,
}

/// Exact augmented MDP of a [`BranchingEnv`]: one node per distinct history
/// `(x_1..x_h, a_1..a_{h-1})`, which determines the ledger state exactly as
/// long as costs depend on the branch only through the next state.
///
/// ML actions range over the environment's grid and are projected with the
/// production [`SafeSet`] when shielded.
#[derive(Debug, Clone)]
pub struct HistoryTree {
    horizon: usize,
    actions: Vec<Action>,
    n_branches: usize,
    levels: Vec<Level>,
}

impl HistoryTree {
    pub fn build<E, P>(env: &E, prior: &P, spec: CompetitiveSpec, shielded: bool) -> Result<Self>
    where
        E: BranchingEnv + ?Sized,
        P: Policy + ?Sized,
    {
        let params = env.params();
        let horizon = params.horizon;
        let actions = env.action_grid().map(<[Action]>::to_vec).unwrap_or_default();
        let n_a = actions.len();
        let n_b = env.n_branches();
        if n_a == 0 || n_b == 0 {
            return Err(Error::config("branching environment needs actions and branches"));
        }
        let table = Arc::new(SensitivityTable::from_params(params));
        let action_set = ActionSet::Finite(actions.clone());
        let ctx = env.context(0, 1);
        let root = Pending {
            history: Vec::new(),
            state: env.initial_state(&ModelSequence::new(0, 0)),
            actions: Vec::new(),
            ledger: SafetyLedger::new(spec, table, params.min_cost),
        };
        let mut levels = Vec::with_capacity(horizon);
        let mut frontier = vec![root];
        let mut first = Level::default();
        first.keys.insert(key_of(&[], &frontier[0].state, &[]), 0);
        first.n_nodes = 1;
        levels.push(first);
        for h in 1..=horizon {
            let last = h == horizon;
            let mut next_level = Level::default();
            let mut next_frontier = Vec::new();
            let mut edges = Vec::with_capacity(frontier.len() * n_a);
            for node in &frontier {
                let obs = Observation {
                    round: h,
                    state: &node.state,
                    history: &node.history,
                    past_actions: &node.actions,
                    context: &ctx,
                    prev_action: node.actions.last().map(|a| a.as_slice()),
                    budget: None,
                };
                let prior_action = prior.act(&obs);
                let safe = SafeSet::new(prior_action.clone(), node.ledger.allowed(), node.ledger.weight());
                for ml in &actions {
                    let exec = if shielded {
                        safe.project(ml, &action_set)
                    } else {
                        ml.clone()
                    };
                    let dev = distance(&exec, &prior_action);
                    let mut outcomes = Vec::with_capacity(n_b);
                    for branch in 0..n_b {
                        let t = env.branch_transition(h, &node.state, &exec, branch);
                        if last {
                            outcomes.push((t.reward, usize::MAX));
                            continue;
                        }
                        let mut hist = node.history.clone();
                        hist.push(node.state.clone());
                        let mut acts = node.actions.clone();
                        acts.push(exec.clone());
                        let key = key_of(&hist, &t.next_state, &acts);
                        let child = match next_level.keys.get(&key) {
                            Some(&c) => c,
                            None => {
                                let mut ledger = node.ledger.clone();
                                if shielded {
                                    ledger.close_round(t.cost, dev)?;
                                } else {
                                    ledger.close_round(t.cost, dev.min(ledger.radius()))?;
                                }
                                let c = next_frontier.len();
                                if c >= MAX_LEVEL_NODES {
                                    return Err(Error::Refused(format!(
                                        "history tree level {} exceeds {MAX_LEVEL_NODES} nodes",
                                        h + 1
                                    )));
                                }
                                next_level.keys.insert(key, c);
                                next_frontier.push(Pending {
                                    history: hist,
                                    state: t.next_state.clone(),
                                    actions: acts,
                                    ledger,
                                });
                                c
                            }
                        };
                        outcomes.push((t.reward, child));
                    }
                    edges.push(Edge { outcomes });
                }
            }
            levels[h - 1].edges = edges;
            if !last {
                next_level.n_nodes = next_frontier.len();
                levels.push(next_level);
                frontier = next_frontier;
            }
        }
        Ok(HistoryTree {
            horizon,
            actions,
            n_branches: n_b,
            levels,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn n_branches(&self) -> usize {
        self.n_branches
    }

    pub fn n_nodes(&self, round: usize) -> usize {
        self.levels[round - 1].n_nodes
    }

    /// Node of round `round` reached by a history, if any.
    pub fn node(&self, round: usize, history: &[State], state: &[f64], actions: &[Action]) -> Option<usize> {
        self.levels
            .get(round - 1)?
            .keys
            .get(&key_of(history, state, actions))
            .copied()
    }

    /// `(reward, child)` per branch for ML action `a` at `node`.
    pub fn outcomes(&self, round: usize, node: usize, a: usize) -> &[(f64, usize)] {
        &self.levels[round - 1].edges[node * self.actions.len() + a].outcomes
    }

    /// The MDP seen under branch probabilities `probs[h-1]`.
    pub fn mdp<'a>(&'a self, probs: &'a [Vec<f64>]) -> TreeMdp<'a> {
        TreeMdp { tree: self, probs }
    }

    /// Exact value at the root of the policy picking ML action `choose(round, node)`.
    pub fn policy_value(&self, probs: &[Vec<f64>], choose: impl Fn(usize, usize) -> usize) -> f64 {
        let mut next: Vec<f64> = Vec::new();
        for h in (1..=self.horizon).rev() {
            let cur: Vec<f64> = (0..self.n_nodes(h))
                .map(|n| {
                    let a = choose(h, n);
                    self.outcomes(h, n, a)
                        .iter()
                        .zip(&probs[h - 1])
                        .map(|(&(r, c), p)| p * (r + if h == self.horizon { 0.0 } else { next[c] }))
                        .sum()
                })
                .collect();
            next = cur;
        }
        next[0]
    }
}

/// [`HistoryTree`] with branch probabilities attached.
pub struct TreeMdp<'a> {
    tree: &'a HistoryTree,
    probs: &'a [Vec<f64>],
}

impl FiniteMdp for TreeMdp<'_> {
    fn horizon(&self) -> usize {
        self.tree.horizon
    }

    fn n_states(&self, round: usize) -> usize {
        self.tree.n_nodes(round)
    }

    fn n_actions(&self) -> usize {
        self.tree.actions.len()
    }

    fn outcomes(&self, round: usize, state: usize, action: usize, emit: &mut dyn FnMut(f64, f64, &[(usize, f64)])) {
        for (&(r, child), &p) in self
            .tree
            .outcomes(round, state, action)
            .iter()
            .zip(&self.probs[round - 1])
        {
            emit(p, r, &[(child, 1.0)]);
        }
    }
}

/// Greedy policy over [`HistoryTree`] nodes.
#[derive(Debug, Clone)]
pub struct TreeGreedy {
    tree: Arc<HistoryTree>,
    tables: Arc<ValueTables>,
}

impl TreeGreedy {
    pub fn new(tree: Arc<HistoryTree>, tables: Arc<ValueTables>) -> Self {
        TreeGreedy { tree, tables }
    }

    pub fn choice(&self, round: usize, node: usize) -> usize {
        argmax(self.tables.round(round).row(node))
    }
}

impl Policy for TreeGreedy {
    fn act(&self, obs: &Observation<'_>) -> Action {
        match self.tree.node(obs.round, obs.history, obs.state, obs.past_actions) {
            Some(n) => self.tree.actions[self.choice(obs.round, n)].clone(),
            None => self.tree.actions[0].clone(),
        }
    }
}

/// [`Planner`] over a [`HistoryTree`] shared by every candidate model.
pub struct TreePlanner {
    tree: Arc<HistoryTree>,
    /// `probs[g][h-1]`.
    probs: Vec<Vec<Vec<f64>>>,
    mode: Mode,
}

impl TreePlanner {
    pub fn new<E, P>(candidates: &[E], prior: &P, spec: CompetitiveSpec, mode: Mode) -> Result<Self>
    where
        E: BranchingEnv,
        P: Policy + ?Sized,
    {
        if mode == Mode::Lagrangian {
            return Err(Error::config("the history tree planner has no Lagrangian mode"));
        }
        let first = candidates.first().ok_or_else(|| Error::config("empty model class"))?;
        let tree = HistoryTree::build(first, prior, spec, mode == Mode::Acd)?;
        let h = first.params().horizon;
        let probs = candidates
            .iter()
            .map(|c| (1..=h).map(|r| c.branch_probabilities(r)).collect())
            .collect();
        Ok(TreePlanner {
            tree: Arc::new(tree),
            probs,
            mode,
        })
    }

    pub fn tree(&self) -> &Arc<HistoryTree> {
        &self.tree
    }

    pub fn probabilities(&self, model: usize) -> &[Vec<f64>] {
        &self.probs[model]
    }
}

impl Planner for TreePlanner {
    type Policy = TreeGreedy;

    fn n_models(&self) -> usize {
        self.probs.len()
    }

    fn mode(&self) -> Mode {
        self.mode
    }

    fn plan(&self, model: usize, _dual: f64) -> Result<ValueTables> {
        value_iteration(&self.tree.mdp(&self.probs[model]))
    }

    fn initial_value(&self, tables: &ValueTables, _seq: &ModelSequence) -> f64 {
        tables.v(1, 0)
    }

    fn policy(&self, _model: usize, tables: Arc<ValueTables>) -> TreeGreedy {
        TreeGreedy::new(self.tree.clone(), tables)
    }

    fn regression(&self, _model: usize, tables: &ValueTables, rec: &EpisodeRecord) -> Vec<(f64, Vec<f64>)> {
        let mut out = Vec::new();
        let mut history: Vec<State> = Vec::new();
        let mut actions: Vec<Action> = Vec::new();
        for (i, r) in rec.rounds.iter().enumerate() {
            let h = r.round;
            if h >= self.tree.horizon {
                break;
            }
            let (Some(node), Some(a)) = (
                self.tree.node(h, &history, &r.state, &actions),
                self.tree.actions.iter().position(|x| x == &r.proposed),
            ) else {
                break;
            };
            let next = &rec.rounds[i + 1];
            history.push(r.state.clone());
            actions.push(r.action.clone());
            let Some(reached) = self.tree.node(h + 1, &history, &next.state, &actions) else {
                break;
            };
            let children = self.tree.outcomes(h, node, a);
            let preds = self
                .probs
                .iter()
                .map(|p| {
                    children
                        .iter()
                        .zip(&p[h - 1])
                        .map(|(&(_, c), w)| w * tables.v(h + 1, c))
                        .sum()
                })
                .collect();
            out.push((tables.v(h + 1, reached), preds));
        }
        out
    }
}
