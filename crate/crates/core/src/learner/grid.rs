use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::acrl::{Mode, Planner};
use super::planning::{argmax, value_iteration, FiniteMdp, ValueTables};
use crate::error::{Error, Result};
use crate::model::{
    Action, CompetitiveSpec, Environment, EpisodeRecord, ModelSequence, Observation, Policy, RoundContext, RoundDraws,
    Vector,
};
use crate::safety::{ActionSet, SafeSet, SensitivityTable};

/// Grid resolution of the aggregated augmented state `(x, D/Γ, h)` and of
/// the ML action search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n_x: usize,
    pub n_d: usize,
    pub n_a: usize,
    /// Fixed draws per backup.
    pub quadrature: usize,
    /// Draws per model prediction when fitting.
    pub fit_quadrature: usize,
    pub seed: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_x: 32,
            n_d: 16,
            n_a: 16,
            quadrature: 8,
            fit_quadrature: 32,
            seed: 0x5eed,
        }
    }
}

/// Concrete grid points.
///
/// States are interpolated linearly between `n_x` uniform points. The budget
/// enters as the safe-ball radius `r = D_h / Γ_{h,h}` on `n_d` points
/// `r_k = r_max (k/(n_d−1))²`, denser near zero, and is always rounded down
/// so the planner never assumes more room than it has.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLayout {
    pub x_lo: f64,
    pub x_hi: f64,
    pub n_x: usize,
    pub radii: Vec<f64>,
    pub actions: Vec<f64>,
}

impl GridLayout {
    pub fn new(cfg: &GridConfig, x_lo: f64, x_hi: f64, a_lo: f64, a_hi: f64, shielded: bool) -> Result<Self> {
        if cfg.n_x < 2 || cfg.n_a == 0 || cfg.n_d == 0 || cfg.quadrature == 0 || cfg.fit_quadrature == 0 {
            return Err(Error::config(
                "grid needs n_x >= 2 and positive n_d, n_a, quadrature, fit_quadrature",
            ));
        }
        let r_max = a_hi - a_lo;
        let radii = if shielded && cfg.n_d > 1 {
            (0..cfg.n_d)
                .map(|k| r_max * (k as f64 / (cfg.n_d - 1) as f64).powi(2))
                .collect()
        } else {
            vec![0.0]
        };
        let actions = if cfg.n_a == 1 {
            vec![a_lo]
        } else {
            (0..cfg.n_a)
                .map(|k| a_lo + (a_hi - a_lo) * k as f64 / (cfg.n_a - 1) as f64)
                .collect()
        };
        Ok(GridLayout {
            x_lo,
            x_hi,
            n_x: cfg.n_x,
            radii,
            actions,
        })
    }

    pub fn n_r(&self) -> usize {
        self.radii.len()
    }

    pub fn n_states(&self) -> usize {
        self.n_x * self.n_r()
    }

    pub fn x_at(&self, i: usize) -> f64 {
        self.x_lo + (self.x_hi - self.x_lo) * i as f64 / (self.n_x - 1) as f64
    }

    /// Neighbouring grid indices and the weight of the upper one.
    pub fn x_weights(&self, x: f64) -> (usize, usize, f64) {
        let t = ((x - self.x_lo) / (self.x_hi - self.x_lo)).clamp(0.0, 1.0) * (self.n_x - 1) as f64;
        let i = (t.floor() as usize).min(self.n_x - 2);
        (i, i + 1, t - i as f64)
    }

    /// Largest grid radius not above `r`.
    pub fn radius_index(&self, r: f64) -> usize {
        self.radii.partition_point(|&g| g <= r).saturating_sub(1)
    }

    pub fn index(&self, xi: usize, ri: usize) -> usize {
        xi * self.n_r() + ri
    }

    /// Interpolation weights of `(x, r)` over state indices.
    pub fn mix(&self, x: f64, r: f64) -> [(usize, f64); 2] {
        let (i0, i1, w) = self.x_weights(x);
        let ri = self.radius_index(r);
        [(self.index(i0, ri), 1.0 - w), (self.index(i1, ri), w)]
    }
}

/// Model-based planner over the aggregated augmented state for a scalar
/// environment and a finite family of candidate dynamics.
pub struct GridPlanner<E, P> {
    models: Vec<E>,
    prior: P,
    spec: CompetitiveSpec,
    table: Arc<SensitivityTable>,
    layout: Arc<GridLayout>,
    nominal: Vec<RoundContext>,
    quadrature: Vec<RoundDraws>,
    fit_quadrature: Vec<RoundDraws>,
    actions: ActionSet,
    mode: Mode,
    min_cost: f64,
    horizon: usize,
}

impl<E: Environment, P: Policy> GridPlanner<E, P> {
    /// `nominal[h-1]` is the exogenous context assumed at round `h` while planning.
    pub fn new(
        models: Vec<E>,
        prior: P,
        spec: CompetitiveSpec,
        grid: &GridConfig,
        nominal: Vec<RoundContext>,
        mode: Mode,
    ) -> Result<Self> {
        let first = models.first().ok_or_else(|| Error::config("empty model class"))?;
        let params = first.params().clone();
        if params.state_dim() != 1 || params.action_dim() != 1 {
            return Err(Error::config("the grid planner handles scalar states and actions only"));
        }
        if nominal.len() != params.horizon {
            return Err(Error::config("nominal profile length differs from the horizon"));
        }
        let layout = GridLayout::new(
            grid,
            params.state_bounds.lo[0],
            params.state_bounds.hi[0],
            params.action_bounds.lo[0],
            params.action_bounds.hi[0],
            mode == Mode::Acd,
        )?;
        Ok(GridPlanner {
            table: Arc::new(SensitivityTable::from_params(&params)),
            horizon: params.horizon,
            actions: ActionSet::Box(params.action_bounds.clone()),
            min_cost: params.min_cost,
            models,
            prior,
            spec,
            layout: Arc::new(layout),
            nominal,
            quadrature: RoundDraws::quadrature(grid.seed, grid.quadrature),
            fit_quadrature: RoundDraws::quadrature(grid.seed ^ 0xf17, grid.fit_quadrature),
            mode,
        })
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    pub fn models(&self) -> &[E] {
        &self.models
    }

    fn prior_action(&self, round: usize, x: f64, ctx: &RoundContext) -> f64 {
        let state = [x];
        self.prior.act(&Observation {
            round,
            state: &state,
            history: &[],
            past_actions: &[],
            context: ctx,
            prev_action: None,
            budget: None,
        })[0]
    }

    fn radius_of(&self, round: usize, allowed: Option<f64>) -> f64 {
        match (self.mode, allowed) {
            (Mode::Acd, Some(d)) => {
                let g = self.table.diagonal(round);
                if g > 0.0 {
                    d / g
                } else {
                    f64::INFINITY
                }
            }
            _ => 0.0,
        }
    }
}

struct GridMdp<'a, E, P> {
    planner: &'a GridPlanner<E, P>,
    model: &'a E,
    dual: f64,
}

impl<E: Environment, P: Policy> FiniteMdp for GridMdp<'_, E, P> {
    fn horizon(&self) -> usize {
        self.planner.horizon
    }

    fn n_states(&self, _round: usize) -> usize {
        self.planner.layout.n_states()
    }

    fn n_actions(&self) -> usize {
        self.planner.layout.actions.len()
    }

    fn outcomes(&self, h: usize, s: usize, a: usize, emit: &mut dyn FnMut(f64, f64, &[(usize, f64)])) {
        let pl = self.planner;
        let lay = &pl.layout;
        let (xi, ri) = (s / lay.n_r(), s % lay.n_r());
        let x = lay.x_at(xi);
        let ctx = &pl.nominal[h - 1];
        let proposed = lay.actions[a];
        let (action, next_radius) = match pl.mode {
            Mode::Acd => {
                let gamma = pl.table.diagonal(h);
                let allowed = lay.radii[ri] * gamma;
                let prior = pl.prior_action(h, x, ctx);
                let safe = SafeSet::new(Vector::scalar(prior), allowed, gamma);
                let act = safe.project(&[proposed], &pl.actions)[0];
                let next = if h < pl.horizon {
                    // First branch of the budget update only.
                    let d_next = allowed + pl.spec.increment(pl.min_cost) - gamma * (act - prior).abs();
                    let g_next = pl.table.diagonal(h + 1);
                    if g_next > 0.0 {
                        d_next.max(0.0) / g_next
                    } else {
                        f64::INFINITY
                    }
                } else {
                    0.0
                };
                (act, next)
            }
            Mode::Unconstrained | Mode::Lagrangian => (proposed, 0.0),
        };
        let p = 1.0 / pl.quadrature.len() as f64;
        for draws in &pl.quadrature {
            let t = self.model.transition(h, ctx, &[x], &[action], None, draws);
            let reward = if pl.mode == Mode::Lagrangian {
                t.reward - self.dual * t.cost
            } else {
                t.reward
            };
            let mix = lay.mix(t.next_state[0], next_radius);
            emit(p, reward, &mix);
        }
    }
}

impl<E: Environment, P: Policy> Planner for GridPlanner<E, P> {
    type Policy = GreedyGridPolicy;

    fn n_models(&self) -> usize {
        self.models.len()
    }

    fn mode(&self) -> Mode {
        self.mode
    }

    fn plan(&self, model: usize, dual: f64) -> Result<ValueTables> {
        value_iteration(&GridMdp {
            planner: self,
            model: &self.models[model],
            dual,
        })
    }

    fn initial_value(&self, tables: &ValueTables, seq: &ModelSequence) -> f64 {
        let x = self.models[0].initial_state(seq)[0];
        let r = self.radius_of(1, Some(self.spec.increment(self.min_cost)));
        tables.v_mix(1, &self.layout.mix(x, r))
    }

    fn policy(&self, _model: usize, tables: Arc<ValueTables>) -> GreedyGridPolicy {
        GreedyGridPolicy {
            tables,
            layout: self.layout.clone(),
            shielded: self.mode == Mode::Acd,
        }
    }

    fn regression(&self, _model: usize, tables: &ValueTables, rec: &EpisodeRecord) -> Vec<(f64, Vec<f64>)> {
        let window = rec.sequence.window;
        let mut out = Vec::with_capacity(rec.rounds.len());
        for pair in rec.rounds.windows(2) {
            let (now, next) = (&pair[0], &pair[1]);
            let h = now.round;
            let r_next = self.radius_of(h + 1, next.allowed);
            let target = tables.v_mix(h + 1, &self.layout.mix(next.state[0], r_next));
            let preds = self
                .models
                .iter()
                .map(|g| {
                    let ctx = g.context(window, h);
                    let n = self.fit_quadrature.len() as f64;
                    self.fit_quadrature
                        .iter()
                        .map(|d| {
                            let t = g.transition(h, &ctx, &now.state, &now.action, None, d);
                            tables.v_mix(h + 1, &self.layout.mix(t.next_state[0], r_next))
                        })
                        .sum::<f64>()
                        / n
                })
                .collect();
            out.push((target, preds));
        }
        out
    }
}

/// `π̃(s) = argmax_ã Q̃_h(s, ã)` read off grid tables.
#[derive(Debug, Clone)]
pub struct GreedyGridPolicy {
    tables: Arc<ValueTables>,
    layout: Arc<GridLayout>,
    shielded: bool,
}

impl GreedyGridPolicy {
    pub fn tables(&self) -> &ValueTables {
        &self.tables
    }

    /// Interpolated `Q̃_h(s, ·)` at a continuous state and radius.
    pub fn q_row(&self, round: usize, x: f64, radius: f64) -> Vec<f64> {
        let t = self.tables.round(round);
        let mix = self.layout.mix(x, radius);
        (0..t.n_actions)
            .map(|a| mix.iter().map(|&(s, w)| w * t.q(s, a)).sum())
            .collect()
    }
}

impl Policy for GreedyGridPolicy {
    fn act(&self, obs: &Observation<'_>) -> Action {
        let radius = if self.shielded {
            obs.budget.map_or(0.0, |b| b.radius)
        } else {
            0.0
        };
        let row = self.q_row(obs.round, obs.state[0], radius);
        Vector::scalar(self.layout.actions[argmax(&row)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_indexing() {
        let l = GridLayout::new(&GridConfig::default(), 0.0, 10.0, 0.0, 8.0, true).unwrap();
        assert_eq!(l.n_states(), 32 * 16);
        assert_eq!(l.radii[0], 0.0);
        assert_eq!(*l.radii.last().unwrap(), 8.0);
        assert_eq!(l.radius_index(0.001), 0);
        assert_eq!(l.radius_index(100.0), 15);
        assert_eq!(l.radius_index(l.radii[3]), 3);
        let (i0, i1, w) = l.x_weights(10.0);
        assert_eq!((i0, i1), (30, 31));
        assert!((w - 1.0).abs() < 1e-12);
        let flat = GridLayout::new(&GridConfig::default(), 0.0, 10.0, 0.0, 8.0, false).unwrap();
        assert_eq!(flat.n_r(), 1);
    }
}
