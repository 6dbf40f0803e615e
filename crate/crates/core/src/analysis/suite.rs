use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::*;

/// Row names in report order.
pub const SUITE_ROWS: [&str; 6] =
    ["telescoping", "finite_horizon", "kl_convexity", "emd_duality", "minibatch_bias", "dv_representation"];

#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    /// Run only the named row.
    pub only: Option<String>,
    pub seed: u64,
    /// Negative control: bootstrap the telescoping check with a wrong discount.
    pub corrupt_gamma: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteRow {
    pub name: String,
    pub passed: bool,
    pub instances: usize,
    /// Worst error against the row's tolerance.
    pub worst: f64,
    pub tolerance: f64,
    pub seconds: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub rows: Vec<SuiteRow>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn row(&self, name: &str) -> Option<&SuiteRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Fixed-width pass/fail table.
    pub fn table(&self) -> String {
        let mut out = format!("{:<18} {:<6} {:>9} {:>12} {:>9} {:>8}  detail\n", "property", "result", "instances", "worst", "tol", "secs");
        for r in &self.rows {
            out.push_str(&format!(
                "{:<18} {:<6} {:>9} {:>12.3e} {:>9.0e} {:>8.3}  {}\n",
                r.name,
                if r.passed { "PASS" } else { "FAIL" },
                r.instances,
                r.worst,
                r.tolerance,
                r.seconds,
                r.detail
            ));
        }
        out
    }
}

pub fn run_suite(opts: &SuiteOptions) -> Result<SuiteReport> {
    if let Some(name) = &opts.only {
        if !SUITE_ROWS.contains(&name.as_str()) {
            return Err(Error::Precondition(format!("unknown property '{name}'; expected one of {}", SUITE_ROWS.join(", "))));
        }
    }
    let mut rows = Vec::new();
    for (i, &name) in SUITE_ROWS.iter().enumerate() {
        if opts.only.as_deref().is_some_and(|o| o != name) {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(i as u64);
        let start = Instant::now();
        let mut row = match name {
            "telescoping" => telescoping_row(&mut rng, opts.corrupt_gamma)?,
            "finite_horizon" => finite_horizon_row(&mut rng)?,
            "kl_convexity" => kl_row(&mut rng)?,
            "emd_duality" => emd_row(&mut rng)?,
            "minibatch_bias" => minibatch_row()?,
            _ => dv_row(&mut rng)?,
        };
        row.seconds = start.elapsed().as_secs_f64();
        rows.push(row);
    }
    Ok(SuiteReport { rows })
}

fn row(name: &str, instances: usize, worst: f64, tolerance: f64, passed: bool, detail: String) -> SuiteRow {
    SuiteRow { name: name.into(), passed, instances, worst, tolerance, seconds: 0.0, detail }
}

fn simplex<R: Rng>(n: usize, rng: &mut R) -> DiscreteDistribution {
    let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-3).collect();
    DiscreteDistribution::from_weights(&w).expect("positive weights")
}

fn random_feature<R: Rng>(mdp: &TabularMdp, rng: &mut R) -> FeatureFunction {
    let vals: Vec<f64> = (0..mdp.n_states() * mdp.n_actions()).map(|_| rng.random_range(-1.0..=1.0)).collect();
    FeatureFunction::from_fn(mdp.n_states(), mdp.n_actions(), |s, a| vals[s * mdp.n_actions() + a])
}

fn telescoping_row<R: Rng>(rng: &mut R, corrupt: bool) -> Result<SuiteRow> {
    const N: usize = 100;
    const TOL: f64 = 1e-10;
    let mut worst = 0.0f64;
    for _ in 0..N {
        let ns = rng.random_range(2..=6);
        let na = rng.random_range(1..=3);
        let mdp = TabularMdp::random_ergodic(ns, na, rng);
        let pi = TabularPolicy::random(ns, na, rng);
        let f = random_feature(&mdp, rng);
        let gamma = rng.random_range(0.5..0.99);
        let boot = if corrupt { gamma * 0.9 } else { gamma };
        worst = worst.max(telescoping_residual_with(&mdp, &pi, &f, gamma, boot)?.abs());
    }
    let detail = if corrupt { "discount misapplied on purpose".to_string() } else { "random ergodic MDPs, up to 6 states".to_string() };
    Ok(row("telescoping", N, worst, TOL, worst < TOL, detail))
}

fn finite_horizon_row<R: Rng>(rng: &mut R) -> Result<SuiteRow> {
    const N: usize = 100;
    const TOL: f64 = 1e-10;
    let mut worst = 0.0f64;
    for _ in 0..N {
        let mdp = TabularMdp::random_ergodic(5, rng.random_range(1..=3), rng);
        let pi = TabularPolicy::random(5, mdp.n_actions(), rng);
        let f = random_feature(&mdp, rng);
        let r = finite_horizon_bias(&mdp, &pi, &f, rng.random_range(0.5..0.99), rng.random_range(1..=20))?;
        worst = worst.max(r.gap);
    }
    Ok(row("finite_horizon", N, worst, TOL, worst < TOL, "5-state chains, horizons 1..=20".into()))
}

fn kl_row<R: Rng>(rng: &mut R) -> Result<SuiteRow> {
    const N: usize = 1000;
    const TOL: f64 = 1e-12;
    let mut worst = f64::NEG_INFINITY;
    let mut strict = 0;
    for _ in 0..N {
        let (p, q, r) = (simplex(8, rng), simplex(8, rng), simplex(8, rng));
        let alpha = rng.random_range(0.0..1.0);
        let (mixed, bound) = kl_convexity_check(&p, &q, &r, alpha)?;
        worst = worst.max(mixed - bound);
        if mixed < bound {
            strict += 1;
        }
    }
    let passed = worst <= TOL;
    Ok(row("kl_convexity", N, worst.max(0.0), TOL, passed, format!("strict in {strict}/{N}")))
}

fn emd_row<R: Rng>(rng: &mut R) -> Result<SuiteRow> {
    const N: usize = 50;
    const TOL: f64 = 1e-6;
    let mut worst = 0.0f64;
    let mut lipschitz = 0.0f64;
    for _ in 0..N {
        let n = rng.random_range(2..=8);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let p = DiscreteDistribution::with_coords(simplex(n, rng).probs().to_vec(), pts.clone())?;
        let q = DiscreteDistribution::with_coords(simplex(n, rng).probs().to_vec(), pts)?;
        let cost = p.euclidean_cost()?;
        let primal = emd_primal(&p, &q, &cost)?;
        let (dual, f) = emd_dual(&p, &q, &cost)?;
        worst = worst.max((primal - dual).abs());
        for i in 0..n {
            for j in 0..n {
                lipschitz = lipschitz.max((f[i] - f[j]).abs() - cost[i][j]);
            }
        }
    }
    let passed = worst < TOL && lipschitz < TOL;
    Ok(row("emd_duality", N, worst, TOL, passed, format!("max Lipschitz excess {:.1e}", lipschitz.max(0.0))))
}

fn minibatch_row() -> Result<SuiteRow> {
    const TOL: f64 = 1e-9;
    let e = 1f64.exp();
    let r = minibatch_bias(1.0, 1)?;
    let err = (r.bias - (e / (1.0 + e) - 0.5)).abs();
    let biases = [1, 2, 4, 8].map(|m| minibatch_bias(1.0, m).map(|b| b.bias));
    let biases = biases.into_iter().collect::<Result<Vec<_>>>()?;
    let decreasing = biases.windows(2).all(|w| w[1] < w[0]);
    let mut linear = 0.0f64;
    for m in 1..=MAX_ENUMERATED_BATCH {
        linear = linear.max(minibatch_bias_linear(1.0, m)?.bias.abs());
    }
    let passed = err < TOL && decreasing && linear < TOL;
    let detail = format!(
        "bias {:.5} at m=1; m=1,2,4,8: {}; linear control {:.1e}",
        r.bias,
        biases.iter().map(|b| format!("{b:.5}")).collect::<Vec<_>>().join(" > "),
        linear
    );
    Ok(row("minibatch_bias", 1 + biases.len() + MAX_ENUMERATED_BATCH, err, TOL, passed, detail))
}

fn dv_row<R: Rng>(rng: &mut R) -> Result<SuiteRow> {
    const N: usize = 100;
    const TOL: f64 = 1e-8;
    let mut worst = 0.0f64;
    let mut lower_violation = f64::NEG_INFINITY;
    for _ in 0..N {
        let (p, q) = (simplex(6, rng), simplex(6, rng));
        let (kl, dv) = dv_representation_check(&p, &q)?;
        worst = worst.max((kl - dv).abs());
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
        lower_violation = lower_violation.max(dv_objective(&p, &q, &x)? - kl);
    }
    let passed = worst < TOL && lower_violation <= 1e-12;
    Ok(row("dv_representation", N, worst, TOL, passed, format!("random x below KL by at least {:.1e}", -lower_violation)))
}
