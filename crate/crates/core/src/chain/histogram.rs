use alloc::collections::BTreeMap;

use crate::chain::arrival::{m1, ArrivalChain, ChainState};
use crate::chain::f_diamond;
use crate::error::{invalid, Result};
use crate::geometry::{Domain, Point};
use crate::limit::Landscape;
use crate::math::floor;
use crate::mobility::VelocityLaw;

/// Index of a (from, to) pair of reduced states.
pub type BinPair = (u32, u32);

/// Reduced feature map of a chain state:
/// `(|x1 - c|, |x2 - c|, |x1 - x2|, v1, v2)`, each binned uniformly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureBins {
    pub center: Point,
    pub radius_max: f64,
    pub dist_max: f64,
    pub v_minus: f64,
    pub v_plus: f64,
    pub counts: [usize; 5],
}

impl FeatureBins {
    pub const DEFAULT_COUNTS: [usize; 5] = [6, 6, 6, 3, 3];

    pub fn for_domain(domain: &Domain, velocities: &VelocityLaw, counts: [usize; 5]) -> Result<FeatureBins> {
        if counts.contains(&0) {
            return Err(invalid("bins", "every feature needs at least one bin"));
        }
        Ok(FeatureBins {
            center: domain.center(),
            radius_max: domain.center_radius(),
            dist_max: domain.diameter(),
            v_minus: velocities.v_minus,
            v_plus: velocities.v_plus,
            counts,
        })
    }

    pub fn state_count(&self) -> usize {
        self.counts.iter().product()
    }

    fn bin(value: f64, lo: f64, hi: f64, n: usize) -> usize {
        if !(hi > lo) {
            return 0;
        }
        let k = floor((value - lo) / (hi - lo) * n as f64);
        (k.max(0.0) as usize).min(n - 1)
    }

    pub fn index(&self, z: &ChainState) -> u32 {
        let [a, b] = &z.walkers;
        let f = [
            (a.position.dist(&self.center), 0.0, self.radius_max),
            (b.position.dist(&self.center), 0.0, self.radius_max),
            (a.position.dist(&b.position), 0.0, self.dist_max),
            (a.velocity, self.v_minus, self.v_plus),
            (b.velocity, self.v_minus, self.v_plus),
        ];
        let mut idx = 0;
        for ((v, lo, hi), n) in f.into_iter().zip(self.counts) {
            idx = idx * n + FeatureBins::bin(v, lo, hi, n);
        }
        idx as u32
    }
}

/// Weighted occupation measure of consecutive reduced-state pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PairHistogram {
    pub bins: FeatureBins,
    pub weights: BTreeMap<BinPair, f64>,
    pub total: f64,
}

impl PairHistogram {
    pub fn new(bins: FeatureBins) -> PairHistogram {
        PairHistogram { bins, weights: BTreeMap::new(), total: 0.0 }
    }

    pub fn add(&mut self, pair: BinPair, weight: f64) {
        if weight > 0.0 {
            *self.weights.entry(pair).or_insert(0.0) += weight;
            self.total += weight;
        }
    }

    pub fn merge(&mut self, other: &PairHistogram) {
        for (k, w) in &other.weights {
            self.add(*k, *w);
        }
    }

    pub fn marginal_left(&self) -> BTreeMap<u32, f64> {
        let mut m = BTreeMap::new();
        for ((a, _), w) in &self.weights {
            *m.entry(*a).or_insert(0.0) += w;
        }
        m
    }

    pub fn marginal_right(&self) -> BTreeMap<u32, f64> {
        let mut m = BTreeMap::new();
        for ((_, b), w) in &self.weights {
            *m.entry(*b).or_insert(0.0) += w;
        }
        m
    }

    /// Conditional frequencies `P(a, b) = w(a, b) / w(a, .)`.
    pub fn kernel(&self) -> BTreeMap<BinPair, f64> {
        let left = self.marginal_left();
        self.weights.iter().map(|(&(a, b), w)| ((a, b), w / left[&a])).collect()
    }

    /// Total-variation distance between two normalized marginals.
    pub fn marginal_distance(a: &BTreeMap<u32, f64>, b: &BTreeMap<u32, f64>) -> f64 {
        let ta: f64 = a.values().sum();
        let tb: f64 = b.values().sum();
        let mut keys: alloc::vec::Vec<u32> = a.keys().chain(b.keys()).copied().collect();
        keys.sort_unstable();
        keys.dedup();
        0.5 * keys
            .iter()
            .map(|k| (a.get(k).copied().unwrap_or(0.0) / ta - b.get(k).copied().unwrap_or(0.0) / tb).abs())
            .sum::<f64>()
    }
}

/// Histogram of `(Z_{j-1}, Z_j)`, one unit per transition.
pub fn empirical_pair_measure(chain: &ArrivalChain, bins: &FeatureBins) -> Result<PairHistogram> {
    if chain.states.len() < 2 {
        return Err(invalid("chain", "need at least two states"));
    }
    let mut h = PairHistogram::new(*bins);
    for (a, b) in chain.transitions() {
        h.add((bins.index(a), bins.index(b)), 1.0);
    }
    Ok(h)
}

/// Mean gap duration `M` and `M`-weighted mean integrand `F` per bin pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairFunctionals {
    pub values: BTreeMap<BinPair, (f64, f64)>,
}

impl PairFunctionals {
    pub fn get(&self, pair: &BinPair) -> (f64, f64) {
        self.values.get(pair).copied().unwrap_or((0.0, 0.0))
    }
}

pub fn pair_functionals(
    chains: &[ArrivalChain],
    bins: &FeatureBins,
    landscape: &Landscape<'_>,
    quad_n: usize,
) -> Result<PairFunctionals> {
    let mut acc: BTreeMap<BinPair, (f64, f64, f64)> = BTreeMap::new();
    for c in chains {
        for (a, b) in c.transitions() {
            let m = m1(a, b);
            let f = f_diamond(a, b, landscape, quad_n)?;
            let e = acc.entry((bins.index(a), bins.index(b))).or_insert((0.0, 0.0, 0.0));
            e.0 += 1.0;
            e.1 += m;
            e.2 += m * f;
        }
    }
    let values = acc
        .into_iter()
        .map(|(k, (n, sm, smf))| (k, (sm / n, if sm > 0.0 { smf / sm } else { 0.0 })))
        .collect();
    Ok(PairFunctionals { values })
}
