use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ContinuousEnv, Controller};
use crate::{Error, Result};

/// Stored actions stay this far inside the open action box so their
/// log-density under a squashed policy is finite.
pub const DEMO_ACTION_LIMIT: f64 = 1.0 - 1e-6;

/// One `(s, a, s', e)` tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub s_next: Vec<f64>,
    pub e: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: usize,
    pub transitions: Vec<Transition>,
    /// The episode hit the horizon without reaching a terminal condition.
    pub truncated: bool,
}

impl Trajectory {
    pub fn initial_state(&self) -> &[f64] {
        &self.transitions[0].s
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// One line of a demonstration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoRecord {
    pub traj: usize,
    pub t: usize,
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub s_next: Vec<f64>,
    pub e: u8,
}

/// Rolls out `expert` plus Gaussian action noise for `n_trajectories` full episodes.
///
/// Episode `i` draws from its own stream of a generator seeded by `seed`.
pub fn generate_demos(
    env: &mut dyn ContinuousEnv,
    expert: &dyn Controller,
    n_trajectories: usize,
    noise_scale: f64,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    if n_trajectories == 0 {
        return Err(Error::Empty("n_trajectories must be at least 1".into()));
    }
    let noise = Normal::new(0.0, noise_scale.max(0.0))
        .map_err(|e| Error::InvalidConfig(format!("noise scale {noise_scale}: {e}")))?;
    let mut out = Vec::with_capacity(n_trajectories);
    for id in 0..n_trajectories {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id as u64);
        let mut s = env.reset(&mut rng);
        let mut transitions = Vec::new();
        loop {
            let a: Vec<f64> = expert
                .control(&s)
                .into_iter()
                .map(|u| {
                    let n = if noise_scale > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                    (u + n).clamp(-DEMO_ACTION_LIMIT, DEMO_ACTION_LIMIT)
                })
                .collect();
            let step = env.step(&a)?;
            let done = step.done;
            let truncated = step.truncated;
            transitions.push(Transition { s, a, s_next: step.next_state.clone(), e: done });
            s = step.next_state;
            if done {
                out.push(Trajectory { id, transitions, truncated });
                break;
            }
        }
    }
    Ok(out)
}

/// Writes one JSON record per transition, ordered by `(traj, t)`.
pub fn write_demos<W: Write>(mut w: W, trajectories: &[Trajectory]) -> Result<()> {
    for traj in trajectories {
        for (t, tr) in traj.transitions.iter().enumerate() {
            let rec = DemoRecord {
                traj: traj.id,
                t,
                s: tr.s.clone(),
                a: tr.a.clone(),
                s_next: tr.s_next.clone(),
                e: tr.e as u8,
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parses a demonstration file, checking record order and the state chain.
pub fn read_demos<R: BufRead>(r: R) -> Result<Vec<Trajectory>> {
    let mut out: Vec<Trajectory> = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DemoRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Domain(format!("demo line {}: {e}", lineno + 1)))?;
        if rec.e > 1 {
            return Err(Error::Domain(format!("demo line {}: e must be 0 or 1", lineno + 1)));
        }
        let tr = Transition { s: rec.s, a: rec.a, s_next: rec.s_next, e: rec.e == 1 };
        match out.last_mut() {
            Some(last) if last.id == rec.traj => {
                if rec.t != last.transitions.len() {
                    return Err(Error::Domain(format!(
                        "demo line {}: trajectory {} expects t={} but found t={}",
                        lineno + 1,
                        rec.traj,
                        last.transitions.len(),
                        rec.t
                    )));
                }
                let prev = last.transitions.last().expect("non-empty trajectory");
                if prev.e || prev.s_next != tr.s {
                    return Err(Error::Domain(format!(
                        "demo line {}: transition does not continue trajectory {}",
                        lineno + 1,
                        rec.traj
                    )));
                }
                last.transitions.push(tr);
            }
            _ => {
                if rec.t != 0 || out.iter().any(|t| t.id == rec.traj) {
                    return Err(Error::Domain(format!(
                        "demo line {}: records must be ordered by (traj, t)",
                        lineno + 1
                    )));
                }
                out.push(Trajectory { id: rec.traj, transitions: vec![tr], truncated: false });
            }
        }
    }
    Ok(out)
}
