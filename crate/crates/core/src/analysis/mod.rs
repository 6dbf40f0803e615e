//! Exact checks of the identities behind the method: the telescoping
//! change of variables, its finite-horizon bias, the KL mixture bound, EMD
//! duality, the Donsker-Varadhan representation, and mini-batch bias of
//! `log E exp`.

mod lp;
mod suite;

pub use suite::{run_suite, SuiteOptions, SuiteReport, SuiteRow, SUITE_ROWS};

use crate::envs::{tabular_occupancy, TabularMdp, TabularPolicy};
use crate::{Error, Result};

const PROB_TOL: f64 = 1e-12;

/// Probability vector over a finite support, optionally with coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    probs: Vec<f64>,
    coords: Option<Vec<Vec<f64>>>,
}

impl DiscreteDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Empty("distribution has no support".into()));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Domain("probabilities must be finite and non-negative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::Domain(format!("probabilities sum to {total}")));
        }
        Ok(Self { probs, coords: None })
    }

    pub fn with_coords(probs: Vec<f64>, coords: Vec<Vec<f64>>) -> Result<Self> {
        if coords.len() != probs.len() {
            return Err(Error::Shape(format!("{} probabilities but {} points", probs.len(), coords.len())));
        }
        Ok(Self { coords: Some(coords), ..Self::new(probs)? })
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Domain("weights must have a positive sum".into()));
        }
        Self::new(w.iter().map(|v| v / total).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// `(1 - alpha) self + alpha other`.
    pub fn mix(&self, other: &Self, alpha: f64) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::Shape("mixing distributions over different supports".into()));
        }
        let probs: Vec<f64> = self.probs.iter().zip(&other.probs).map(|(p, r)| (1.0 - alpha) * p + alpha * r).collect();
        let total: f64 = probs.iter().sum();
        Ok(Self { probs: probs.iter().map(|p| p / total).collect(), coords: self.coords.clone() })
    }

    /// Euclidean distances between the support points.
    pub fn euclidean_cost(&self) -> Result<Vec<Vec<f64>>> {
        let pts = self.coords.as_ref().ok_or_else(|| Error::Precondition("support has no coordinates".into()))?;
        Ok(pts
            .iter()
            .map(|x| pts.iter().map(|y| x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()).collect())
            .collect())
    }
}

/// A real value per state-action pair, indexed like [`TabularMdp::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFunction {
    values: Vec<f64>,
    n_actions: usize,
}

impl FeatureFunction {
    pub fn from_fn(n_states: usize, n_actions: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let values = (0..n_states).flat_map(|s| (0..n_actions).map(move |a| (s, a))).map(|(s, a)| f(s, a)).collect();
        Self { values, n_actions }
    }

    pub fn constant(n_states: usize, n_actions: usize, c: f64) -> Self {
        Self::from_fn(n_states, n_actions, |_, _| c)
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn check(&self, mdp: &TabularMdp) -> Result<()> {
        if self.values.len() != mdp.n_states() * mdp.n_actions() || self.n_actions != mdp.n_actions() {
            return Err(Error::Shape("feature table does not match the MDP".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("feature values must be finite".into()));
        }
        Ok(())
    }
}

/// `mu(pi, f) = E_{(s,a) ~ d} [f(s, a)]` for a state-action distribution `d`.
pub fn feature_expectation(d: &[f64], f: &FeatureFunction) -> f64 {
    d.iter().zip(&f.values).map(|(p, v)| p * v).sum()
}

/// `E_{s' ~ P(.|s,a), a' ~ pi(.|s')} f(s', a')`.
fn next_expectation(mdp: &TabularMdp, pi: &TabularPolicy, f: &FeatureFunction, s: usize, a: usize) -> f64 {
    (0..mdp.n_states())
        .map(|sp| mdp.p(s, a, sp) * (0..mdp.n_actions()).map(|ap| pi.prob(sp, ap) * f.get(sp, ap)).sum::<f64>())
        .sum()
}

/// `E_{s ~ marginal, a ~ pi} f(s, a)`.
fn marginal_expectation(marginal: &[f64], pi: &TabularPolicy, f: &FeatureFunction) -> f64 {
    marginal
        .iter()
        .enumerate()
        .map(|(s, p)| p * (0..f.n_actions).map(|a| pi.prob(s, a) * f.get(s, a)).sum::<f64>())
        .sum()
}

/// `E_d[f - gamma_boot E f(s', a')] - (1 - gamma) E_{d0}[f]` with `d` the exact
/// occupancy at `gamma`. The telescoping identity makes this zero when
/// `gamma_boot == gamma`; a different `gamma_boot` breaks it on purpose.
pub fn telescoping_residual_with(
    mdp: &TabularMdp,
    pi: &TabularPolicy,
    f: &FeatureFunction,
    gamma: f64,
    gamma_boot: f64,
) -> Result<f64> {
    if mdp.has_terminal_states() {
        return Err(Error::Precondition(
            "telescoping needs a chain without terminal states; use finite_horizon_bias".into(),
        ));
    }
    f.check(mdp)?;
    let d = tabular_occupancy(mdp, pi, gamma)?;
    let mut lhs = 0.0;
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            lhs += d[mdp.index(s, a)] * (f.get(s, a) - gamma_boot * next_expectation(mdp, pi, f, s, a));
        }
    }
    Ok(lhs - (1.0 - gamma) * marginal_expectation(mdp.initial(), pi, f))
}

pub fn telescoping_residual(mdp: &TabularMdp, pi: &TabularPolicy, f: &FeatureFunction, gamma: f64) -> Result<f64> {
    telescoping_residual_with(mdp, pi, f, gamma, gamma)
}

/// Both sides of the truncated identity
/// `sum_{t<T} (1-g) g^t E_{p_t}[f - g E f'] = (1-g) E_{p_0}[f] - (1-g) g^T E_{p_T}[f]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteHorizonReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `(1 - gamma) gamma^T E_{p_T, pi}[f]`
    pub bias: f64,
    pub gap: f64,
}

/// Propagates state marginals `p_t` exactly for `horizon` steps.
pub fn finite_horizon_bias(
    mdp: &TabularMdp,
    pi: &TabularPolicy,
    f: &FeatureFunction,
    gamma: f64,
    horizon: usize,
) -> Result<FiniteHorizonReport> {
    if horizon == 0 {
        return Err(Error::Precondition("horizon must be at least 1".into()));
    }
    f.check(mdp)?;
    let n = mdp.n_states();
    let mut p = mdp.initial().to_vec();
    let mut lhs = 0.0;
    let mut weight = 1.0 - gamma;
    for _ in 0..horizon {
        let mut step = 0.0;
        for (s, &ps) in p.iter().enumerate() {
            for a in 0..mdp.n_actions() {
                step += ps * pi.prob(s, a) * (f.get(s, a) - gamma * next_expectation(mdp, pi, f, s, a));
            }
        }
        lhs += weight * step;
        weight *= gamma;
        let mut next = vec![0.0; n];
        for (s, &ps) in p.iter().enumerate() {
            for a in 0..mdp.n_actions() {
                let w = ps * pi.prob(s, a);
                for (sp, slot) in next.iter_mut().enumerate() {
                    *slot += w * mdp.p(s, a, sp);
                }
            }
        }
        p = next;
    }
    let bias = (1.0 - gamma) * gamma.powi(horizon as i32) * marginal_expectation(&p, pi, f);
    let rhs = (1.0 - gamma) * marginal_expectation(mdp.initial(), pi, f) - bias;
    Ok(FiniteHorizonReport { lhs, rhs, bias, gap: (lhs - rhs).abs() })
}

/// `D_KL(p || q)`; errors where `p > 0` but `q = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape("KL between different supports".into()));
    }
    let mut total = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Err(Error::Domain(format!("support violation at point {i}: p > 0 but q = 0")));
            }
            total += pi * (pi / qi).ln();
        }
    }
    Ok(total)
}

/// `(D_KL((1-a)p + a r || (1-a)q + a r), (1-a) D_KL(p || q))`.
pub fn kl_convexity_check(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    r: &DiscreteDistribution,
    alpha: f64,
) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Precondition(format!("alpha = {alpha} outside [0, 1]")));
    }
    let bound = (1.0 - alpha) * kl_divergence(&p.probs, &q.probs)?;
    let mixed = kl_divergence(&p.mix(r, alpha)?.probs, &q.mix(r, alpha)?.probs)?;
    Ok((mixed, bound))
}

fn check_cost(p: &DiscreteDistribution, q: &DiscreteDistribution, cost: &[Vec<f64>]) -> Result<()> {
    if cost.len() != p.len() || cost.iter().any(|row| row.len() != q.len()) {
        return Err(Error::Shape(format!("cost must be {} x {}", p.len(), q.len())));
    }
    if cost.iter().flatten().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(Error::Domain("cost entries must be finite and non-negative".into()));
    }
    Ok(())
}

/// Optimal transport cost `min_T sum T_ij c_ij` with marginals `p` and `q`.
pub fn emd_primal(p: &DiscreteDistribution, q: &DiscreteDistribution, cost: &[Vec<f64>]) -> Result<f64> {
    check_cost(p, q, cost)?;
    let (n, m) = (p.len(), q.len());
    let mut a = Vec::with_capacity(n + m);
    for i in 0..n {
        a.push((0..n * m).map(|k| if k / m == i { 1.0 } else { 0.0 }).collect());
    }
    for j in 0..m {
        a.push((0..n * m).map(|k| if k % m == j { 1.0 } else { 0.0 }).collect());
    }
    let b: Vec<f64> = p.probs.iter().chain(&q.probs).copied().collect();
    let c: Vec<f64> = cost.iter().flatten().copied().collect();
    Ok(lp::solve_standard(&a, &b, &c)?.objective)
}

/// `max_f sum_i f_i (p_i - q_i)` subject to `|f_i - f_j| <= c_ij`, with the
/// witness shifted so its minimum is zero.
pub fn emd_dual(p: &DiscreteDistribution, q: &DiscreteDistribution, cost: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
    check_cost(p, q, cost)?;
    let n = p.len();
    if q.len() != n {
        return Err(Error::Shape("the dual needs both distributions on one support".into()));
    }
    if p.probs.iter().zip(&q.probs).all(|(a, b)| (a - b).abs() <= PROB_TOL) {
        // every feasible f is optimal; report the constant one
        return Ok((0.0, vec![0.0; n]));
    }
    // f = u - v; one slack per ordered pair
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).collect();
    let vars = 2 * n + pairs.len();
    let mut a = Vec::with_capacity(pairs.len());
    let mut b = Vec::with_capacity(pairs.len());
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let mut row = vec![0.0; vars];
        row[i] += 1.0;
        row[n + i] -= 1.0;
        row[j] -= 1.0;
        row[n + j] += 1.0;
        row[2 * n + k] = 1.0;
        a.push(row);
        b.push(cost[i][j]);
    }
    let mut c = vec![0.0; vars];
    for i in 0..n {
        let w = p.probs[i] - q.probs[i];
        c[i] = -w;
        c[n + i] = w;
    }
    let sol = lp::solve_standard(&a, &b, &c)?;
    let mut f: Vec<f64> = (0..n).map(|i| sol.x[i] - sol.x[n + i]).collect();
    let lo = f.iter().cloned().fold(f64::INFINITY, f64::min);
    for v in f.iter_mut() {
        *v -= lo;
    }
    let value = f.iter().zip(p.probs.iter().zip(&q.probs)).map(|(fi, (pi, qi))| fi * (pi - qi)).sum();
    Ok((value, f))
}

/// Exact mini-batch bias of `L(theta) = -log E_x[exp(theta x)]`, `x` uniform on `{0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinibatchBias {
    pub full_gradient: f64,
    pub expected_minibatch_gradient: f64,
    pub bias: f64,
}

pub const MAX_ENUMERATED_BATCH: usize = 12;

fn enumerate_batches(m: usize, grad: impl Fn(usize) -> f64) -> Result<f64> {
    if m == 0 || m > MAX_ENUMERATED_BATCH {
        return Err(Error::Precondition(format!("batch size {m} outside 1..={MAX_ENUMERATED_BATCH}")));
    }
    let total: f64 = (0u32..1 << m).map(|bits| grad(bits.count_ones() as usize)).sum();
    Ok(total / (1u64 << m) as f64)
}

/// Enumerates all `2^m` equally likely batches.
pub fn minibatch_bias(theta: f64, m: usize) -> Result<MinibatchBias> {
    let e = theta.exp();
    let full_gradient = -e / (1.0 + e);
    // batch with k ones: L_B = -log((k e + m - k) / m)
    let expected = enumerate_batches(m, |k| -(k as f64) * e / (k as f64 * e + (m - k) as f64))?;
    Ok(MinibatchBias { full_gradient, expected_minibatch_gradient: expected, bias: expected - full_gradient })
}

/// The same enumeration for the linear loss `-E[theta x]`, which has no bias.
pub fn minibatch_bias_linear(theta: f64, m: usize) -> Result<MinibatchBias> {
    let _ = theta;
    let expected = enumerate_batches(m, |k| -(k as f64) / m as f64)?;
    Ok(MinibatchBias { full_gradient: -0.5, expected_minibatch_gradient: expected, bias: expected + 0.5 })
}

/// `-log E_q[exp x] + E_p[x]`; entries of `x` may be `-inf` where `p = 0`.
pub fn dv_objective(p: &DiscreteDistribution, q: &DiscreteDistribution, x: &[f64]) -> Result<f64> {
    if p.len() != q.len() || x.len() != p.len() {
        return Err(Error::Shape("DV objective needs matching supports".into()));
    }
    let mx = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lme = mx + q.probs.iter().zip(x).map(|(qi, xi)| qi * (xi - mx).exp()).sum::<f64>().ln();
    let ep: f64 = p.probs.iter().zip(x).filter(|(pi, _)| **pi > 0.0).map(|(pi, xi)| pi * xi).sum();
    Ok(ep - lme)
}

/// `x*_i = log(p_i / q_i)` (and `-inf` where `p_i = 0`).
pub fn dv_maximizer(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<Vec<f64>> {
    p.probs
        .iter()
        .zip(&q.probs)
        .enumerate()
        .map(|(i, (&pi, &qi))| match (pi > 0.0, qi > 0.0) {
            (true, false) => Err(Error::Domain(format!("support violation at point {i}: p > 0 but q = 0"))),
            (true, true) => Ok((pi / qi).ln()),
            (false, _) => Ok(f64::NEG_INFINITY),
        })
        .collect()
}

/// `(D_KL(p || q), DV objective at the closed-form maximizer)`.
pub fn dv_representation_check(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<(f64, f64)> {
    let kl = kl_divergence(&p.probs, &q.probs)?;
    let x = dv_maximizer(p, q)?;
    Ok((kl, dv_objective(p, q, &x)?))
}
