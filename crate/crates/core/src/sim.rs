//! Exact hybrid simulation. Between firings the state follows the closed-form
//! transition matrix, so there is no integration error to control.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::cycle::StateVec;
use crate::error::{invalid, Result};
use crate::matfun::expm_at;
use crate::model::{IgoModel, INPUT_B};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpulseEvent {
    pub n: usize,
    pub t: f64,
    pub x_pre: StateVec,
    pub x_post: StateVec,
    pub lambda: f64,
    /// Time to the next firing, `Φ(z_n)`.
    pub interval: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub x: StateVec,
}

fn fire(model: &IgoModel, n: usize, t: f64, x: StateVec) -> Result<ImpulseEvent> {
    let z = x.x3;
    let lambda = model.hill.f_mod(z)?;
    let interval = model.hill.phi(z)?;
    let x_post = StateVec::new(x.x1 + lambda * INPUT_B[0], x.x2, x.x3);
    Ok(ImpulseEvent { n, t, x_pre: x, x_post, lambda, interval })
}

fn check_start(x0: &StateVec) -> Result<()> {
    if !(x0.is_finite() && x0.is_positive()) {
        return Err(invalid("x0", format!("initial state must be positive, got {x0:?}")));
    }
    Ok(())
}

/// `n_steps` firings starting from the pre-jump state `x0` at `t = 0`.
pub fn simulate_impulses(model: &IgoModel, x0: &StateVec, n_steps: usize) -> Result<Vec<ImpulseEvent>> {
    check_start(x0)?;
    let mut events = Vec::with_capacity(n_steps);
    let (mut t, mut x) = (0.0, *x0);
    for n in 0..n_steps {
        let ev = fire(model, n, t, x)?;
        let e = expm_at(&model.plant, ev.interval)?;
        x = e.mul_vec(ev.x_post.to_array()).into();
        t += ev.interval;
        events.push(ev);
    }
    Ok(events)
}

/// Samples on the grid `k·dt` up to `t_end`, plus both one-sided limits at
/// every firing time.
pub fn dense_trajectory(model: &IgoModel, x0: &StateVec, t_end: f64, dt: f64) -> Result<Vec<TrajectorySample>> {
    check_start(x0)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", format!("must be positive, got {dt}")));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(invalid("t_end", format!("must be positive, got {t_end}")));
    }
    let mut out = Vec::new();
    let (mut t_n, mut x) = (0.0, *x0);
    let mut k: u64 = 1;
    for n in 0.. {
        let ev = fire(model, n, t_n, x)?;
        out.push(TrajectorySample { t: t_n, x: ev.x_pre });
        out.push(TrajectorySample { t: t_n, x: ev.x_post });
        let post = ev.x_post.to_array();
        let t_next = t_n + ev.interval;
        loop {
            let t = k as f64 * dt;
            if t >= t_next || t > t_end {
                break;
            }
            if t > t_n {
                let e = expm_at(&model.plant, t - t_n)?;
                out.push(TrajectorySample { t, x: e.mul_vec(post).into() });
            }
            k += 1;
        }
        if t_next > t_end {
            break;
        }
        x = expm_at(&model.plant, ev.interval)?.mul_vec(post).into();
        t_n = t_next;
    }
    Ok(out)
}

pub fn weight_sequence(events: &[ImpulseEvent]) -> Vec<(usize, f64)> {
    events.iter().map(|e| (e.n, e.lambda)).collect()
}

/// Upper bound on `max_i x_i(t)` over the whole trajectory from `x0`.
///
/// Uses `V = wᵀx` with `w3 = 1`, `w2 = g2/(a2 - α)`, `w1 = g1 w2/(a1 - α)`
/// and `α` half the slowest rate, so that `V` decays at least like `e^{-αt}`
/// between firings. Firings are at least `k1` apart and add at most
/// `(k3 + k4) w1`, giving `V ≤ V(0) + (k3 + k4) w1 / (1 - e^{-α k1})`.
pub fn trajectory_bound(model: &IgoModel, x0: &StateVec) -> f64 {
    let p = &model.plant;
    let alpha = 0.5 * p.min_rate();
    let w3 = 1.0;
    let w2 = p.g2() / (p.a2() - alpha);
    let w1 = p.g1() * w2 / (p.a1() - alpha);
    let v0 = w1 * x0.x1 + w2 * x0.x2 + w3 * x0.x3;
    let (k1, _) = model.hill.period_bounds();
    let (_, f2) = model.hill.weight_bounds();
    let v_max = v0 + f2 * w1 / -(-alpha * k1).exp_m1();
    v_max / w1.min(w2).min(w3)
}

// Debug formatting of f64 is the shortest round-trip form and switches to
// exponent notation for very small or large magnitudes.
pub fn write_trajectory_csv<W: Write>(mut w: W, samples: &[TrajectorySample]) -> io::Result<()> {
    writeln!(w, "t,x1,x2,x3")?;
    for s in samples {
        writeln!(w, "{:?},{:?},{:?},{:?}", s.t, s.x.x1, s.x.x2, s.x.x3)?;
    }
    Ok(())
}

pub fn write_events_csv<W: Write>(mut w: W, events: &[ImpulseEvent]) -> io::Result<()> {
    writeln!(w, "n,t_n,lambda_n,T_n,x1_pre,x2_pre,x3_pre")?;
    for e in events {
        writeln!(
            w,
            "{},{:?},{:?},{:?},{:?},{:?},{:?}",
            e.n, e.t, e.lambda, e.interval, e.x_pre.x1, e.x_pre.x2, e.x_pre.x3
        )?;
    }
    Ok(())
}
