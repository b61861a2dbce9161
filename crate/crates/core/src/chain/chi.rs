use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::chain::entropy::relative_entropy_rate;
use crate::chain::histogram::{PairFunctionals, PairHistogram};
use crate::error::{invalid, Error, Result};
use crate::math::{exp, ln, powf};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiOptions {
    /// Rounds of marginal balancing for the tilted kernel.
    pub balance_rounds: usize,
    /// Lazy power-iteration steps per round.
    pub steps_per_round: usize,
    /// Stop balancing once the marginal gap (total variation) is below this.
    pub tol: f64,
    pub bisection_steps: usize,
    pub beta_max: f64,
}

impl Default for ChiOptions {
    fn default() -> ChiOptions {
        ChiOptions { balance_rounds: 100, steps_per_round: 20, tol: 1e-12, bisection_steps: 60, beta_max: 1e6 }
    }
}

/// A feasible pair measure and its objective `I(Q) / <M, Q>`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiSolution {
    pub value: f64,
    pub beta: f64,
    pub entropy: f64,
    pub mean_m: f64,
    /// `<M F, Q> / <M, Q>` achieved by `q`.
    pub ratio: f64,
    /// The same ratio for the untilted reference kernel.
    pub reference_ratio: f64,
    pub marginal_gap: f64,
    pub q: PairHistogram,
}

struct Row {
    /// (target state, reference probability, M F, M)
    edges: Vec<(usize, f64, f64, f64)>,
}

struct Problem {
    ids: Vec<u32>,
    rows: Vec<Row>,
    start: Vec<f64>,
}

/// Reference kernel restricted to its largest closed set of states: targets
/// without outgoing transitions are pruned repeatedly.
fn problem(p_ref: &PairHistogram, fun: &PairFunctionals) -> Result<Problem> {
    let kernel = p_ref.kernel();
    let left = p_ref.marginal_left();
    let mut alive: BTreeMap<u32, bool> = left.keys().map(|&a| (a, true)).collect();
    loop {
        let mut changed = false;
        for (&a, live) in alive.clone().iter() {
            if !live {
                continue;
            }
            let any = kernel.range((a, 0)..=(a, u32::MAX)).any(|(&(_, b), _)| alive.get(&b) == Some(&true));
            if !any {
                alive.insert(a, false);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let ids: Vec<u32> = alive.iter().filter(|(_, l)| **l).map(|(a, _)| *a).collect();
    if ids.is_empty() {
        return Err(Error::Empty("reference kernel has no closed set"));
    }
    let pos: BTreeMap<u32, usize> = ids.iter().enumerate().map(|(i, a)| (*a, i)).collect();
    let rows = ids
        .iter()
        .map(|&a| Row {
            edges: kernel
                .range((a, 0)..=(a, u32::MAX))
                .filter_map(|(&(_, b), &p)| {
                    let (m, f) = fun.get(&(a, b));
                    pos.get(&b).map(|&j| (j, p, m * f, m))
                })
                .collect(),
        })
        .collect();
    let mut start: Vec<f64> = ids.iter().map(|a| left[a]).collect();
    let s: f64 = start.iter().sum();
    start.iter_mut().for_each(|v| *v /= s);
    Ok(Problem { ids, rows, start })
}

struct Tilted {
    pi: Vec<f64>,
    kernel: Vec<Vec<f64>>,
    gap: f64,
}

fn tilt(pb: &Problem, beta: f64, opts: &ChiOptions) -> Tilted {
    let kernel: Vec<Vec<f64>> = pb
        .rows
        .iter()
        .map(|r| {
            let lo = r.edges.iter().map(|e| e.2).fold(f64::INFINITY, f64::min);
            let w: Vec<f64> = r.edges.iter().map(|e| e.1 * exp(-beta * (e.2 - lo))).collect();
            let z: f64 = w.iter().sum();
            w.into_iter().map(|v| v / z).collect()
        })
        .collect();
    let k = pb.ids.len();
    let mut pi = pb.start.clone();
    let mut next = vec![0.0; k];
    let mut gap = f64::INFINITY;
    for _ in 0..opts.balance_rounds {
        for _ in 0..opts.steps_per_round {
            step(pb, &kernel, &pi, &mut next);
            // lazy step: same invariant law, no periodicity
            for (p, n) in pi.iter_mut().zip(&next) {
                *p = 0.5 * (*p + n);
            }
        }
        step(pb, &kernel, &pi, &mut next);
        gap = 0.5 * pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum::<f64>();
        if gap < opts.tol {
            break;
        }
    }
    Tilted { pi, kernel, gap }
}

fn step(pb: &Problem, kernel: &[Vec<f64>], pi: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (i, r) in pb.rows.iter().enumerate() {
        for (e, p) in r.edges.iter().zip(&kernel[i]) {
            out[e.0] += pi[i] * p;
        }
    }
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= s);
}

struct Evaluation {
    ratio: f64,
    entropy: f64,
    mean_m: f64,
    gap: f64,
    tilted: Tilted,
}

fn evaluate(pb: &Problem, beta: f64, opts: &ChiOptions) -> Evaluation {
    let t = tilt(pb, beta, opts);
    let (mut mf, mut m, mut ent) = (0.0, 0.0, 0.0);
    for (i, r) in pb.rows.iter().enumerate() {
        for (e, p) in r.edges.iter().zip(&t.kernel[i]) {
            let q = t.pi[i] * p;
            if q > 0.0 {
                mf += q * e.2;
                m += q * e.3;
                ent += q * ln(p / e.1);
            }
        }
    }
    let ratio = if m > 0.0 { mf / m } else { 0.0 };
    Evaluation { ratio, entropy: ent.max(0.0), mean_m: m, gap: t.gap, tilted: t }
}

fn solution(pb: &Problem, p_ref: &PairHistogram, beta: f64, ev: Evaluation, reference_ratio: f64) -> ChiSolution {
    let mut q = PairHistogram::new(p_ref.bins);
    for (i, r) in pb.rows.iter().enumerate() {
        for (e, p) in r.edges.iter().zip(&ev.tilted.kernel[i]) {
            q.add((pb.ids[i], pb.ids[e.0]), ev.tilted.pi[i] * p);
        }
    }
    let value = if ev.mean_m > 0.0 { ev.entropy / ev.mean_m } else { f64::INFINITY };
    ChiSolution {
        value,
        beta,
        entropy: ev.entropy,
        mean_m: ev.mean_m,
        ratio: ev.ratio,
        reference_ratio,
        marginal_gap: ev.gap,
        q,
    }
}

/// Upper bound on the discretized variational rate for `tau / T <= p`.
///
/// The reference kernel is tilted by `exp(-beta M F)`; its invariant law gives
/// a pair measure with equal marginals. The smallest `beta` meeting the ratio
/// constraint is found by bisection, and a fixed geometric `beta` grid is
/// scanned as well; the best feasible objective is returned.
pub fn chi_p_bound(p: f64, p_ref: &PairHistogram, functionals: &PairFunctionals, opts: ChiOptions) -> Result<ChiSolution> {
    if !(p > 0.0) {
        return Err(invalid("p", "must be positive"));
    }
    let pb = problem(p_ref, functionals)?;
    let base = evaluate(&pb, 0.0, &opts);
    let reference_ratio = base.ratio;
    if base.ratio <= p {
        return Ok(solution(&pb, p_ref, 0.0, base, reference_ratio));
    }
    let mut hi = 1.0;
    let mut hi_eval = evaluate(&pb, hi, &opts);
    while hi_eval.ratio > p {
        hi *= 2.0;
        if hi > opts.beta_max {
            return Err(Error::Infeasible);
        }
        hi_eval = evaluate(&pb, hi, &opts);
    }
    let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
    for _ in 0..opts.bisection_steps {
        let mid = 0.5 * (lo + hi);
        let e = evaluate(&pb, mid, &opts);
        if e.ratio <= p {
            hi = mid;
            hi_eval = e;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-10 * hi {
            break;
        }
    }
    let mut best = (hi, hi_eval);
    let mut k = 0;
    loop {
        let beta = 1e-3 * powf(2.0, 0.5 * k as f64);
        if beta > opts.beta_max.min(64.0 * best.0.max(1.0)) {
            break;
        }
        k += 1;
        if beta <= best.0 * 0.5 {
            continue;
        }
        let e = evaluate(&pb, beta, &opts);
        let cand = e.entropy / e.mean_m;
        if e.ratio <= p && cand < best.1.entropy / best.1.mean_m {
            best = (beta, e);
        }
    }
    Ok(solution(&pb, p_ref, best.0, best.1, reference_ratio))
}

/// Re-checks a solution from scratch: equal marginals within `tol`, support
/// inside the reference kernel, ratio constraint, and the objective.
pub fn verify_chi_solution(
    sol: &ChiSolution,
    p: f64,
    p_ref: &PairHistogram,
    functionals: &PairFunctionals,
    tol: f64,
) -> Result<()> {
    let q = &sol.q;
    if PairHistogram::marginal_distance(&q.marginal_left(), &q.marginal_right()) > tol {
        return Err(Error::Infeasible);
    }
    if q.weights.keys().any(|k| !p_ref.weights.contains_key(k)) {
        return Err(Error::Infeasible);
    }
    let (mut mf, mut m) = (0.0, 0.0);
    for (k, w) in &q.weights {
        let (mk, fk) = functionals.get(k);
        mf += w / q.total * mk * fk;
        m += w / q.total * mk;
    }
    if !(m > 0.0) || mf / m > p + tol {
        return Err(Error::Infeasible);
    }
    let rate = relative_entropy_rate(q, p_ref)?;
    if rate.infinite || (rate.value / m - sol.value).abs() > tol.max(1e-9) * (1.0 + sol.value) {
        return Err(Error::Infeasible);
    }
    Ok(())
}
