use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::{Error, Result};

const STOCHASTIC_TOL: f64 = 1e-12;

/// Finite MDP with transition tensor `P(s' | s, a)` stored as `[s][a][s']`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    transitions: Vec<f64>,
    initial: Vec<f64>,
    terminal: Vec<bool>,
}

fn check_distribution(what: &str, p: &[f64]) -> Result<()> {
    if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Domain(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::Domain(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

fn random_simplex<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    // strictly positive entries; normalized exponentials
    let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

impl TabularMdp {
    pub fn new(n_states: usize, n_actions: usize, transitions: Vec<f64>, initial: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Shape("a tabular MDP needs at least one state and one action".into()));
        }
        if transitions.len() != n_states * n_actions * n_states || initial.len() != n_states {
            return Err(Error::Shape(format!(
                "{n_states} states x {n_actions} actions need {} transition entries and {n_states} initial entries",
                n_states * n_actions * n_states
            )));
        }
        for s in 0..n_states {
            for a in 0..n_actions {
                let base = (s * n_actions + a) * n_states;
                check_distribution(&format!("P(.|{s},{a})"), &transitions[base..base + n_states])?;
            }
        }
        check_distribution("p0", &initial)?;
        Ok(Self { n_states, n_actions, transitions, initial, terminal: vec![false; n_states] })
    }

    pub fn with_terminal_states(mut self, terminal: &[usize]) -> Result<Self> {
        for &s in terminal {
            if s >= self.n_states {
                return Err(Error::Shape(format!("terminal state {s} out of range")));
            }
            self.terminal[s] = true;
        }
        Ok(self)
    }

    /// Every transition probability and `p0` entry strictly positive, so any
    /// policy induces an irreducible aperiodic chain.
    pub fn random_ergodic<R: Rng + ?Sized>(n_states: usize, n_actions: usize, rng: &mut R) -> Self {
        let mut transitions = Vec::with_capacity(n_states * n_actions * n_states);
        for _ in 0..n_states * n_actions {
            transitions.extend(random_simplex(n_states, rng));
        }
        let initial = random_simplex(n_states, rng);
        Self::new(n_states, n_actions, transitions, initial).expect("random simplex rows are stochastic")
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn has_terminal_states(&self) -> bool {
        self.terminal.iter().any(|&t| t)
    }

    pub fn p(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transitions[(s * self.n_actions + a) * self.n_states + next]
    }

    pub fn index(&self, s: usize, a: usize) -> usize {
        s * self.n_actions + a
    }

    /// Residual of the feasibility constraint
    /// `sum_a d(s,a) = (1-g) p0(s) + g sum_{s',a'} P(s|s',a') d(s',a')`, max over `s`.
    pub fn flow_residual(&self, d: &[f64], gamma: f64) -> f64 {
        (0..self.n_states)
            .map(|s| {
                let lhs: f64 = (0..self.n_actions).map(|a| d[self.index(s, a)]).sum();
                let inflow: f64 = (0..self.n_states)
                    .flat_map(|sp| (0..self.n_actions).map(move |ap| (sp, ap)))
                    .map(|(sp, ap)| self.p(sp, ap, s) * d[self.index(sp, ap)])
                    .sum();
                (lhs - (1.0 - gamma) * self.initial[s] - gamma * inflow).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Residual of the state-action form
    /// `d(s',a') = (1-g) d0(s',a') + g pi(a'|s') sum_{s,a} P(s'|s,a) d(s,a)`, max over pairs.
    pub fn stationarity_residual(&self, d: &[f64], policy: &TabularPolicy, gamma: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for sp in 0..self.n_states {
            let inflow: f64 = (0..self.n_states)
                .flat_map(|s| (0..self.n_actions).map(move |a| (s, a)))
                .map(|(s, a)| self.p(s, a, sp) * d[self.index(s, a)])
                .sum();
            for ap in 0..self.n_actions {
                let pi = policy.prob(sp, ap);
                let rhs = (1.0 - gamma) * self.initial[sp] * pi + gamma * pi * inflow;
                worst = worst.max((d[self.index(sp, ap)] - rhs).abs());
            }
        }
        worst
    }

    /// `P_pi[(s,a), (s',a')] = P(s'|s,a) pi(a'|s')`.
    pub fn state_action_transition(&self, policy: &TabularPolicy) -> DMatrix<f64> {
        let n = self.n_states * self.n_actions;
        DMatrix::from_fn(n, n, |i, j| {
            let (s, a) = (i / self.n_actions, i % self.n_actions);
            let (sp, ap) = (j / self.n_actions, j % self.n_actions);
            self.p(s, a, sp) * policy.prob(sp, ap)
        })
    }

    /// `d0(s,a) = p0(s) pi(a|s)`.
    pub fn initial_state_action(&self, policy: &TabularPolicy) -> Vec<f64> {
        (0..self.n_states)
            .flat_map(|s| (0..self.n_actions).map(move |a| (s, a)))
            .map(|(s, a)| self.initial[s] * policy.prob(s, a))
            .collect()
    }
}

/// Row-stochastic `pi(a|s)` stored as `[s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_states * n_actions {
            return Err(Error::Shape(format!("policy table needs {} entries", n_states * n_actions)));
        }
        for s in 0..n_states {
            check_distribution(&format!("pi(.|{s})"), &probs[s * n_actions..(s + 1) * n_actions])?;
        }
        Ok(Self { n_states, n_actions, probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, probs: vec![1.0 / n_actions as f64; n_states * n_actions] }
    }

    pub fn random<R: Rng + ?Sized>(n_states: usize, n_actions: usize, rng: &mut R) -> Self {
        let probs = (0..n_states).flat_map(|_| random_simplex(n_actions, rng)).collect();
        Self { n_states, n_actions, probs }
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
}

/// Discounted state-action occupancy `d = (1-g) (I - g P_pi^T)^{-1} d0`.
pub fn tabular_occupancy(mdp: &TabularMdp, policy: &TabularPolicy, gamma: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Precondition(format!("gamma must lie in [0, 1), got {gamma}")));
    }
    if policy.n_states != mdp.n_states || policy.n_actions != mdp.n_actions {
        return Err(Error::Shape("policy table does not match the MDP".into()));
    }
    let n = mdp.n_states * mdp.n_actions;
    let system = DMatrix::identity(n, n) - mdp.state_action_transition(policy).transpose() * gamma;
    let rhs = DVector::from_vec(mdp.initial_state_action(policy)) * (1.0 - gamma);
    let d = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("occupancy system is singular".into()))?;
    Ok(d.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_state_single_action() {
        let mdp = TabularMdp::new(1, 1, vec![1.0], vec![1.0]).unwrap();
        let d = tabular_occupancy(&mdp, &TabularPolicy::uniform(1, 1), 0.9).unwrap();
        assert!((d[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_zero_gives_initial_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mdp = TabularMdp::random_ergodic(4, 3, &mut rng);
        let pi = TabularPolicy::random(4, 3, &mut rng);
        let d = tabular_occupancy(&mdp, &pi, 0.0).unwrap();
        for (x, y) in d.iter().zip(mdp.initial_state_action(&pi)) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn gamma_one_is_rejected() {
        let mdp = TabularMdp::new(1, 1, vec![1.0], vec![1.0]).unwrap();
        assert!(tabular_occupancy(&mdp, &TabularPolicy::uniform(1, 1), 1.0).is_err());
    }

    #[test]
    fn non_stochastic_rows_rejected() {
        assert!(TabularMdp::new(2, 1, vec![0.5, 0.4, 0.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(TabularMdp::new(1, 1, vec![1.0], vec![0.9]).is_err());
        assert!(TabularPolicy::new(1, 2, vec![0.3, 0.3]).is_err());
    }
}
