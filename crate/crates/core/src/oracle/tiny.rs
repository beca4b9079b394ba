use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use crate::envs::ModelClass;
use crate::error::{Error, Result};
use crate::learner::BranchingEnv;
use crate::model::{
    component, Action, BoxBounds, EnvParams, Environment, Lipschitz, ModelSequence, Observation, Perturbation, Policy,
    RoundContext, RoundDraws, State, Transition, Vector, DRAWS_PER_ROUND,
};

pub const MAX_STATES: usize = 12;
pub const MAX_ACTIONS: usize = 6;
pub const MAX_MAPS: usize = 4;
pub const MAX_MODELS: usize = 4;
pub const MAX_HORIZON: usize = 5;

/// Slack for the enumerated certificate checks.
const CERT_SLACK: f64 = 1e-12;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TinyFile {
    name: String,
    horizon: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    start: f64,
    cost: Vec<Vec<f64>>,
    reward: Vec<Vec<f64>>,
    prior: Vec<f64>,
    maps: Vec<Vec<Vec<f64>>>,
    models: Vec<Vec<String>>,
    true_model: usize,
    lipschitz: Lipschitz,
    perturbation: Vec<f64>,
    min_cost: Option<f64>,
    #[serde(default)]
    unshielded: bool,
    #[serde(default)]
    specs: Vec<[f64; 2]>,
}

/// A validated enumerable instance: scalar states and actions on finite
/// grids, deterministic cost and reward tables, and a small family of
/// deterministic transition maps mixed by rational probabilities.
///
/// Indices: `cost[x][a]`, `maps[k][x][a]` (a state index), `models[g][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyMdp {
    pub name: String,
    pub horizon: usize,
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    pub start: usize,
    pub cost: Vec<Vec<f64>>,
    pub reward: Vec<Vec<f64>>,
    /// Prior action index per state.
    pub prior: Vec<usize>,
    pub maps: Vec<Vec<Vec<usize>>>,
    pub models: Vec<Vec<f64>>,
    pub true_model: usize,
    pub lipschitz: Lipschitz,
    pub perturbation: Vec<f64>,
    pub min_cost: f64,
    /// Fault injection: run ACD without its projection.
    pub unshielded: bool,
    /// `(λ, b)` pairs the verifier checks.
    pub specs: Vec<[f64; 2]>,
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Parses `"p/q"`, an integer or a finite decimal into a reduced fraction.
pub fn parse_rational(s: &str) -> Result<(i128, i128)> {
    let bad = || Error::validation(format!("not a rational probability: {s:?}"));
    let s = s.trim();
    let (num, den) = if let Some((n, d)) = s.split_once('/') {
        (
            n.trim().parse::<i128>().map_err(|_| bad())?,
            d.trim().parse::<i128>().map_err(|_| bad())?,
        )
    } else if let Some((i, f)) = s.split_once('.') {
        if f.len() > 12 || !f.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let den = 10i128.pow(f.len() as u32);
        let whole = if i.is_empty() {
            0
        } else {
            i.parse::<i128>().map_err(|_| bad())?
        };
        let frac = if f.is_empty() {
            0
        } else {
            f.parse::<i128>().map_err(|_| bad())?
        };
        (whole * den + frac, den)
    } else {
        (s.parse::<i128>().map_err(|_| bad())?, 1)
    };
    if den <= 0 || num < 0 {
        return Err(bad());
    }
    let g = gcd(num, den).max(1);
    Ok((num / g, den / g))
}

fn index_of(values: &[f64], v: f64, what: &str) -> Result<usize> {
    values
        .iter()
        .position(|&x| (x - v).abs() <= 1e-12)
        .ok_or_else(|| Error::validation(format!("{what} {v} is not on the grid")))
}

fn nearest(values: &[f64], v: f64) -> usize {
    let mut best = 0;
    for (i, x) in values.iter().enumerate() {
        if (x - v).abs() < (values[best] - v).abs() {
            best = i;
        }
    }
    best
}

impl TinyMdp {
    pub fn from_toml(text: &str) -> Result<Self> {
        let f: TinyFile = toml::from_str(text).map_err(|e| Error::config(format!("tiny fixture: {e}")))?;
        Self::from_file(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn from_file(f: TinyFile) -> Result<Self> {
        let (ns, na, nk, ng) = (f.states.len(), f.actions.len(), f.maps.len(), f.models.len());
        if ns == 0 || na == 0 || nk == 0 || ng == 0 || f.horizon == 0 {
            return Err(Error::validation(
                "tiny fixture needs states, actions, maps, models and a horizon",
            ));
        }
        if ns > MAX_STATES || na > MAX_ACTIONS || nk > MAX_MAPS || ng > MAX_MODELS || f.horizon > MAX_HORIZON {
            return Err(Error::Refused(format!(
                "tiny fixture {} exceeds the size limits ({ns} states, {na} actions, {nk} maps, {ng} models, H = {})",
                f.name, f.horizon
            )));
        }
        for (what, v) in [("states", &f.states), ("actions", &f.actions)] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::validation(format!("{what} must be finite")));
            }
            for i in 0..v.len() {
                if v[..i].iter().any(|y| (y - v[i]).abs() <= 1e-12) {
                    return Err(Error::validation(format!("duplicate value {} in {what}", v[i])));
                }
            }
        }
        let table_shape = |t: &Vec<Vec<f64>>, what: &str| -> Result<()> {
            if t.len() != ns || t.iter().any(|r| r.len() != na || r.iter().any(|x| !x.is_finite())) {
                return Err(Error::validation(format!("{what} must be a finite {ns}x{na} table")));
            }
            Ok(())
        };
        table_shape(&f.cost, "cost")?;
        table_shape(&f.reward, "reward")?;
        let mut maps = Vec::with_capacity(nk);
        for (k, m) in f.maps.iter().enumerate() {
            table_shape(m, &format!("map {k}"))?;
            maps.push(
                m.iter()
                    .map(|row| {
                        row.iter()
                            .map(|&x| index_of(&f.states, x, "map target"))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        if f.prior.len() != ns {
            return Err(Error::validation(format!("prior needs {ns} entries")));
        }
        let prior = f
            .prior
            .iter()
            .map(|&a| index_of(&f.actions, a, "prior action"))
            .collect::<Result<Vec<_>>>()?;
        let mut models = Vec::with_capacity(ng);
        for (g, m) in f.models.iter().enumerate() {
            if m.len() != nk {
                return Err(Error::validation(format!("model {g} needs {nk} probabilities")));
            }
            let fr = m.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>>>()?;
            let (mut n, mut d) = (0i128, 1i128);
            for (p, q) in &fr {
                n = n * q + p * d;
                d *= q;
                let g = gcd(n, d).max(1);
                n /= g;
                d /= g;
            }
            if n != d {
                return Err(Error::validation(format!(
                    "model {g} probabilities sum to {n}/{d}, not 1"
                )));
            }
            models.push(fr.iter().map(|(p, q)| *p as f64 / *q as f64).collect());
        }
        if f.true_model >= ng {
            return Err(Error::validation(format!("true_model {} out of range", f.true_model)));
        }
        let smallest = f.cost.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
        let min_cost = f.min_cost.unwrap_or(smallest.max(0.0));
        if !(min_cost >= 0.0) || smallest < min_cost {
            return Err(Error::validation(format!(
                "costs must be >= min_cost {min_cost} >= 0; smallest is {smallest}"
            )));
        }
        for spec in &f.specs {
            if !(spec[0] >= 0.0 && spec[1] >= 0.0) {
                return Err(Error::validation(format!("spec {spec:?} must be nonnegative")));
            }
        }
        let mdp = TinyMdp {
            start: index_of(&f.states, f.start, "start")?,
            name: f.name,
            horizon: f.horizon,
            states: f.states,
            actions: f.actions,
            cost: f.cost,
            reward: f.reward,
            prior,
            maps,
            models,
            true_model: f.true_model,
            lipschitz: f.lipschitz,
            perturbation: f.perturbation,
            min_cost,
            unshielded: f.unshielded,
            specs: f.specs,
        };
        mdp.params().validate()?;
        mdp.check_certificates()?;
        Ok(mdp)
    }

    pub fn params(&self) -> EnvParams {
        let lo = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        EnvParams {
            horizon: self.horizon,
            state_bounds: BoxBounds::interval(lo(&self.states), hi(&self.states)).expect("finite grid"),
            action_bounds: BoxBounds::interval(lo(&self.actions), hi(&self.actions)).expect("finite grid"),
            lipschitz: self.lipschitz,
            min_cost: self.min_cost,
            perturbation: Perturbation::Table {
                values: self.perturbation.clone(),
            },
        }
    }

    /// Enumerated check of the declared Lipschitz constants and the
    /// perturbation function of the prior's closed loop.
    fn check_certificates(&self) -> Result<()> {
        let l = &self.lipschitz;
        let (ns, na) = (self.states.len(), self.actions.len());
        let fail = |what: String| Err(Error::validation(format!("fixture {}: {what}", self.name)));
        for x in 0..ns {
            for y in 0..ns {
                let dx = (self.states[x] - self.states[y]).abs();
                let dp = (self.actions[self.prior[x]] - self.actions[self.prior[y]]).abs();
                if dp > l.prior * dx + CERT_SLACK {
                    return fail(format!("prior is not {}-Lipschitz at states {x}, {y}", l.prior));
                }
                for a in 0..na {
                    for b in 0..na {
                        let gap = dx + (self.actions[a] - self.actions[b]).abs();
                        if (self.cost[x][a] - self.cost[y][b]).abs() > l.cost * gap + CERT_SLACK {
                            return fail(format!("cost is not {}-Lipschitz at ({x},{a}), ({y},{b})", l.cost));
                        }
                        for (k, m) in self.maps.iter().enumerate() {
                            let df = (self.states[m[x][a]] - self.states[m[y][b]]).abs();
                            if df > l.transition * gap + CERT_SLACK {
                                return fail(format!(
                                    "map {k} is not {}-Lipschitz at ({x},{a}), ({y},{b})",
                                    l.transition
                                ));
                            }
                        }
                    }
                }
            }
        }
        // Closed loop under the prior: |x_k − y_k| ≤ p(k)|x_0 − y_0| along every map sequence.
        let nk = self.maps.len();
        for x in 0..ns {
            for y in 0..x {
                let d0 = (self.states[x] - self.states[y]).abs();
                let mut frontier = vec![(x, y)];
                for k in 1..self.horizon {
                    let mut next = Vec::with_capacity(frontier.len() * nk);
                    for &(u, v) in &frontier {
                        for m in &self.maps {
                            let (u2, v2) = (m[u][self.prior[u]], m[v][self.prior[v]]);
                            if (self.states[u2] - self.states[v2]).abs() > self.perturbation[k] * d0 + CERT_SLACK {
                                return fail(format!(
                                    "perturbation p({k}) = {} too small from states {x}, {y}",
                                    self.perturbation[k]
                                ));
                            }
                            next.push((u2, v2));
                        }
                    }
                    next.sort_unstable();
                    next.dedup();
                    frontier = next;
                }
            }
        }
        Ok(())
    }

    pub fn state_index(&self, x: f64) -> usize {
        nearest(&self.states, x)
    }

    pub fn action_index(&self, a: f64) -> usize {
        nearest(&self.actions, a)
    }

    /// Branch picked by uniform `u` under model `g`.
    pub fn select_branch(&self, g: usize, u: f64) -> usize {
        let probs = &self.models[g];
        let mut cum = 0.0;
        let mut last = 0;
        for (k, p) in probs.iter().enumerate() {
            if *p <= 0.0 {
                continue;
            }
            cum += p;
            last = k;
            if u < cum {
                return k;
            }
        }
        last
    }

    /// A uniform that selects `branch` under model `g`: the midpoint of its interval.
    pub fn branch_uniform(&self, g: usize, branch: usize) -> Option<f64> {
        let probs = &self.models[g];
        if probs[branch] <= 0.0 {
            return None;
        }
        let lo: f64 = probs[..branch].iter().filter(|p| **p > 0.0).sum();
        Some(lo + 0.5 * probs[branch])
    }

    /// Branches with positive probability under model `g`.
    pub fn support(&self, g: usize) -> Vec<usize> {
        (0..self.maps.len()).filter(|&k| self.models[g][k] > 0.0).collect()
    }
}

/// A [`TinyMdp`] run as an [`Environment`] under one of its models.
#[derive(Debug, Clone)]
pub struct TinyEnv {
    mdp: Arc<TinyMdp>,
    model: usize,
    params: EnvParams,
    grid: Vec<Action>,
}

impl TinyEnv {
    /// Runs under the fixture's true model.
    pub fn new(mdp: Arc<TinyMdp>) -> Self {
        let model = mdp.true_model;
        Self::with_model(mdp, model)
    }

    pub fn with_model(mdp: Arc<TinyMdp>, model: usize) -> Self {
        let params = mdp.params();
        let grid = mdp.actions.iter().map(|&a| Vector::scalar(a)).collect();
        TinyEnv {
            mdp,
            model,
            params,
            grid,
        }
    }

    pub fn mdp(&self) -> &Arc<TinyMdp> {
        &self.mdp
    }

    pub fn model(&self) -> usize {
        self.model
    }

    /// Scripted sequence following `branches[h-1]` at round `h`; `None` if a
    /// branch has zero probability under this model.
    pub fn scripted(&self, branches: &[usize]) -> Option<ModelSequence> {
        let mut rounds = vec![[0.5; DRAWS_PER_ROUND]];
        for &k in branches {
            let mut d = [0.5; DRAWS_PER_ROUND];
            d[component::DYNAMICS_A] = self.mdp.branch_uniform(self.model, k)?;
            rounds.push(d);
        }
        Some(ModelSequence::scripted(rounds, 0))
    }

    pub fn prior(&self) -> TinyPrior {
        TinyPrior { mdp: self.mdp.clone() }
    }
}

impl Environment for TinyEnv {
    fn name(&self) -> &str {
        &self.mdp.name
    }

    fn params(&self) -> &EnvParams {
        &self.params
    }

    fn action_grid(&self) -> Option<&[Action]> {
        Some(&self.grid)
    }

    fn context(&self, _window: usize, _round: usize) -> RoundContext {
        RoundContext::new(&[])
    }

    fn initial_state(&self, _seq: &ModelSequence) -> State {
        Vector::scalar(self.mdp.states[self.mdp.start])
    }

    fn transition(
        &self,
        round: usize,
        _ctx: &RoundContext,
        state: &[f64],
        action: &[f64],
        _prev_action: Option<&[f64]>,
        draws: &RoundDraws,
    ) -> Transition {
        let k = self.mdp.select_branch(self.model, draws.get(component::DYNAMICS_A));
        self.branch_transition(round, state, action, k)
    }
}

impl BranchingEnv for TinyEnv {
    fn n_branches(&self) -> usize {
        self.mdp.maps.len()
    }

    fn branch_probabilities(&self, _round: usize) -> Vec<f64> {
        self.mdp.models[self.model].clone()
    }

    fn branch_transition(&self, _round: usize, state: &[f64], action: &[f64], branch: usize) -> Transition {
        let x = self.mdp.state_index(state[0]);
        let a = self.mdp.action_index(action[0]);
        Transition {
            next_state: Vector::scalar(self.mdp.states[self.mdp.maps[branch][x][a]]),
            cost: self.mdp.cost[x][a],
            reward: self.mdp.reward[x][a],
        }
    }
}

impl ModelClass for TinyEnv {
    fn candidates(&self) -> Result<Vec<Self>> {
        Ok((0..self.mdp.models.len())
            .map(|g| TinyEnv::with_model(self.mdp.clone(), g))
            .collect())
    }
}

/// The fixture's prior table as a [`Policy`].
#[derive(Debug, Clone)]
pub struct TinyPrior {
    mdp: Arc<TinyMdp>,
}

impl Policy for TinyPrior {
    fn act(&self, obs: &Observation<'_>) -> Action {
        let x = self.mdp.state_index(obs.state[0]);
        Vector::scalar(self.mdp.actions[self.mdp.prior[x]])
    }
}

/// Loads every `*.toml` fixture in `dir`, sorted by file name.
pub fn load_fixtures(dir: &Path) -> Result<Vec<TinyMdp>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    paths.sort();
    paths.iter().map(|p| TinyMdp::load(p)).collect()
}
