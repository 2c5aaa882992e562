//! Corruption strategies acting on outcome records.
//!
//! Every attack takes a corruption fraction `gamma` and never changes more
//! than `floor(gamma * n)` entries of a record of length `n`, counting
//! corruptions already present on the record.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::Distribution;

use crate::error::{Error, Result};
use crate::measure::{OutcomeDistribution, UniformPovmSample, UniformPovmSampler};

/// `floor(gamma * n)`, with a small guard so that e.g. `0.29 * 100` gives 29.
pub fn corruption_budget(gamma: f64, n: usize) -> usize {
    if gamma <= 0.0 {
        return 0;
    }
    ((gamma * n as f64) + 1e-9).floor().min(n as f64) as usize
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!(
            "corruption fraction {gamma} must lie in [0, 1]"
        )));
    }
    Ok(())
}

/// A sequence of outcomes with per-index corruption flags.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeRecord<T> {
    entries: Vec<T>,
    corrupted: Vec<bool>,
    budget_used: usize,
}

impl<T: Clone + PartialEq> OutcomeRecord<T> {
    /// A clean record.
    pub fn new(entries: Vec<T>) -> Self {
        let n = entries.len();
        OutcomeRecord {
            entries,
            corrupted: vec![false; n],
            budget_used: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<T> {
        self.entries
    }

    pub fn corrupted_flags(&self) -> &[bool] {
        &self.corrupted
    }

    pub fn budget_used(&self) -> usize {
        self.budget_used
    }

    /// Number of positions where the entries differ.
    pub fn hamming_distance(&self, other: &OutcomeRecord<T>) -> usize {
        self.entries
            .iter()
            .zip(&other.entries)
            .filter(|(a, b)| a != b)
            .count()
            + self.len().abs_diff(other.len())
    }

    fn set(&mut self, i: usize, value: T) {
        self.entries[i] = value;
        if !self.corrupted[i] {
            self.corrupted[i] = true;
            self.budget_used += 1;
        }
    }

    fn remaining_budget(&self, gamma: f64) -> usize {
        corruption_budget(gamma, self.len()).saturating_sub(self.budget_used)
    }

    fn unflagged(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.corrupted[i]).collect()
    }

    /// Checks that `self` differs from `original` in at most `floor(gamma n)`
    /// places and that the flag count matches `budget_used`.
    pub fn audit(&self, original: &OutcomeRecord<T>, gamma: f64) -> Result<()> {
        let budget = corruption_budget(gamma, self.len());
        let changed = self.hamming_distance(original);
        let flagged = self.corrupted.iter().filter(|&&f| f).count();
        if flagged != self.budget_used {
            return Err(Error::ContractViolation(format!(
                "{flagged} flags set but budget_used = {}",
                self.budget_used
            )));
        }
        if changed > budget || self.budget_used > budget {
            return Err(Error::BudgetExceeded {
                used: changed.max(self.budget_used),
                budget,
            });
        }
        Ok(())
    }
}

/// Replaces `floor(gamma n)` uniformly chosen entries by `payload`.
///
/// Only entries not already flagged are eligible, and the budget counts
/// earlier corruptions.
pub fn replace_attack<T: Clone + PartialEq, R: Rng + ?Sized>(
    rec: &OutcomeRecord<T>,
    gamma: f64,
    payload: &T,
    rng: &mut R,
) -> Result<OutcomeRecord<T>> {
    check_gamma(gamma)?;
    let mut out = rec.clone();
    let budget = out.remaining_budget(gamma);
    if budget == 0 {
        return Ok(out);
    }
    let free = out.unflagged();
    let take = budget.min(free.len());
    let mut chosen: Vec<usize> = sample_indices(rng, free.len(), take)
        .into_iter()
        .map(|k| free[k])
        .collect();
    chosen.sort_unstable();
    for i in chosen {
        out.set(i, payload.clone());
    }
    Ok(out)
}

/// Replaces `floor(gamma n)` uniformly chosen uniform-POVM outcomes by fresh
/// draws from `D(sigma)`.
pub fn state_swap_attack<R: Rng + ?Sized>(
    rec: &OutcomeRecord<UniformPovmSample>,
    gamma: f64,
    sigma: &UniformPovmSampler,
    rng: &mut R,
) -> Result<OutcomeRecord<UniformPovmSample>> {
    check_gamma(gamma)?;
    if let Some(first) = rec.entries().first() {
        if first.dim() != sigma.dim() {
            return Err(Error::DimensionMismatch {
                expected: first.dim(),
                got: sigma.dim(),
            });
        }
    }
    let mut out = rec.clone();
    let budget = out.remaining_budget(gamma);
    let free = out.unflagged();
    let take = budget.min(free.len());
    let mut chosen: Vec<usize> = sample_indices(rng, free.len(), take)
        .into_iter()
        .map(|k| free[k])
        .collect();
    chosen.sort_unstable();
    for i in chosen {
        let v = sigma.sample(rng);
        out.set(i, v);
    }
    Ok(out)
}

/// Per-index source and target outcome laws for a coupling attack.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingPlan {
    sources: Vec<OutcomeDistribution>,
    targets: Vec<OutcomeDistribution>,
    tv_per_index: Vec<f64>,
}

impl CouplingPlan {
    pub fn new(
        sources: Vec<OutcomeDistribution>,
        targets: Vec<OutcomeDistribution>,
    ) -> Result<Self> {
        if sources.len() != targets.len() {
            return Err(Error::LengthMismatch {
                what: "coupling targets",
                expected: sources.len(),
                got: targets.len(),
            });
        }
        let tv_per_index = sources
            .iter()
            .zip(&targets)
            .map(|(p, q)| p.tv_distance(q))
            .collect::<Result<Vec<_>>>()?;
        Ok(CouplingPlan {
            sources,
            targets,
            tv_per_index,
        })
    }

    /// The same `(p, q)` pair at each of `n` indices.
    pub fn repeated(p: &OutcomeDistribution, q: &OutcomeDistribution, n: usize) -> Result<Self> {
        Self::new(vec![p.clone(); n], vec![q.clone(); n])
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn source(&self, i: usize) -> &OutcomeDistribution {
        &self.sources[i]
    }

    pub fn target(&self, i: usize) -> &OutcomeDistribution {
        &self.targets[i]
    }

    pub fn tv_per_index(&self) -> &[f64] {
        &self.tv_per_index
    }

    pub fn mean_tv(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.tv_per_index.iter().sum::<f64>() / self.len() as f64
    }
}

/// Maximal coupling step: given `X = x ~ p`, returns `Y ~ q` with
/// `P[Y != X] = TV(p, q)`.
///
/// Keeps `x` with probability `min(p(x), q(x)) / p(x)`; otherwise draws from the
/// normalized excess `(q - min(p, q)) / TV`.
pub fn maximal_couple<R: Rng + ?Sized>(
    p: &OutcomeDistribution,
    q: &OutcomeDistribution,
    x: usize,
    rng: &mut R,
) -> Result<usize> {
    let tv = p.tv_distance(q)?;
    if x >= p.len() {
        return Err(Error::LabelOutOfRange {
            label: x,
            size: p.len(),
        });
    }
    let px = p.prob(x);
    if px <= 0.0 {
        return Err(Error::InconsistentOutcome { label: x });
    }
    let keep = (q.prob(x).min(px) / px).min(1.0);
    if keep >= 1.0 || rng.random::<f64>() < keep {
        return Ok(x);
    }
    let excess: Vec<f64> = p
        .probs()
        .iter()
        .zip(q.probs())
        .map(|(a, b)| (b - a).max(0.0))
        .collect();
    if tv <= 0.0 || excess.iter().all(|&e| e <= 0.0) {
        return Ok(x);
    }
    let w = rand::distr::weighted::WeightedIndex::new(&excess)
        .map_err(|e| Error::InvalidDistribution(e.to_string()))?;
    Ok(w.sample(rng))
}

/// What the coupling adversary does when the budget would be exceeded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CapMode {
    /// Apply changes in index order and stop once the budget is spent.
    #[default]
    Prefix,
    /// Apply every proposed change if they fit in the budget, otherwise none.
    AllOrNothing,
}

/// Coupling attack result with bookkeeping on whether the cap bound.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingOutcome {
    pub record: OutcomeRecord<usize>,
    /// Changes the maximal couplings asked for (over indices that were drawn).
    pub proposed_changes: usize,
    /// Whether the budget stopped the adversary.
    pub capped: bool,
}

/// Moves each outcome towards the plan's target law with a maximal coupling,
/// in index order, capped at `floor(gamma n)` changes.
pub fn coupling_attack<R: Rng + ?Sized>(
    rec: &OutcomeRecord<usize>,
    plan: &CouplingPlan,
    gamma: f64,
    rng: &mut R,
) -> Result<OutcomeRecord<usize>> {
    coupling_attack_detailed(rec, plan, gamma, CapMode::Prefix, rng).map(|o| o.record)
}

pub fn coupling_attack_detailed<R: Rng + ?Sized>(
    rec: &OutcomeRecord<usize>,
    plan: &CouplingPlan,
    gamma: f64,
    mode: CapMode,
    rng: &mut R,
) -> Result<CouplingOutcome> {
    check_gamma(gamma)?;
    if plan.len() != rec.len() {
        return Err(Error::LengthMismatch {
            what: "coupling plan",
            expected: rec.len(),
            got: plan.len(),
        });
    }
    let budget = rec.remaining_budget(gamma);
    let mut out = rec.clone();
    match mode {
        CapMode::Prefix => {
            let mut used = 0usize;
            let mut proposed = 0usize;
            let mut capped = false;
            for i in 0..rec.len() {
                if plan.tv_per_index[i] == 0.0 {
                    continue;
                }
                let x = rec.entries[i];
                let y = maximal_couple(plan.source(i), plan.target(i), x, rng)?;
                if y == x {
                    continue;
                }
                proposed += 1;
                if used == budget {
                    capped = true;
                    break;
                }
                out.set(i, y);
                used += 1;
            }
            Ok(CouplingOutcome {
                record: out,
                proposed_changes: proposed,
                capped,
            })
        }
        CapMode::AllOrNothing => {
            let mut changes = Vec::new();
            for i in 0..rec.len() {
                if plan.tv_per_index[i] == 0.0 {
                    continue;
                }
                let x = rec.entries[i];
                let y = maximal_couple(plan.source(i), plan.target(i), x, rng)?;
                if y != x {
                    changes.push((i, y));
                }
            }
            let proposed = changes.len();
            let capped = proposed > budget;
            if !capped {
                for (i, y) in changes {
                    out.set(i, y);
                }
            }
            Ok(CouplingOutcome {
                record: out,
                proposed_changes: proposed,
                capped,
            })
        }
    }
}

/// Simulates SPAM noise by corruption: each outcome is coupled to its noisy
/// law, with a budget of `gamma = 2 gamma_spam`.
///
/// Every per-index TV in `plan` must be at most `gamma / 2`. The cap then
/// binds with probability at most `exp(-2 gamma_spam^2 n)`.
pub fn spam_attack<R: Rng + ?Sized>(
    rec: &OutcomeRecord<usize>,
    plan: &CouplingPlan,
    gamma: f64,
    rng: &mut R,
) -> Result<CouplingOutcome> {
    check_gamma(gamma)?;
    let limit = gamma / 2.0;
    if let Some((i, tv)) = plan
        .tv_per_index()
        .iter()
        .enumerate()
        .find(|(_, &tv)| tv > limit + 1e-12)
    {
        return Err(Error::ContractViolation(format!(
            "index {i} has TV {tv} above gamma/2 = {limit}"
        )));
    }
    coupling_attack_detailed(rec, plan, gamma, CapMode::Prefix, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::PureState;
    use crate::measure::sample_outcomes;
    use crate::rng::seeded;

    fn labels(n: usize) -> OutcomeRecord<usize> {
        OutcomeRecord::new((0..n).map(|i| i % 3).collect())
    }

    #[test]
    fn budget_floor() {
        assert_eq!(corruption_budget(0.05, 1000), 50);
        assert_eq!(corruption_budget(0.29, 100), 29);
        assert_eq!(corruption_budget(0.0, 100), 0);
        assert_eq!(corruption_budget(0.999, 10), 9);
    }

    #[test]
    fn replace_zero_gamma_is_identity() {
        let rec = labels(50);
        let out = replace_attack(&rec, 0.0, &7, &mut seeded(1)).unwrap();
        assert_eq!(out, rec);
    }

    #[test]
    fn replace_full_gamma_overwrites_everything() {
        let zero = PureState::basis(2, 0).unwrap();
        let one = PureState::basis(2, 1).unwrap();
        let rec = OutcomeRecord::new(vec![one; 20]);
        let out = replace_attack(&rec, 1.0, &zero, &mut seeded(2)).unwrap();
        assert!(out.entries().iter().all(|v| *v == zero));
        assert_eq!(out.budget_used(), 20);
    }

    #[test]
    fn replace_sets_exact_flag_count() {
        let rec = labels(1000);
        let out = replace_attack(&rec, 0.05, &9, &mut seeded(3)).unwrap();
        assert_eq!(out.corrupted_flags().iter().filter(|&&f| f).count(), 50);
        assert_eq!(out.budget_used(), 50);
        out.audit(&rec, 0.05).unwrap();
        for i in 0..rec.len() {
            if !out.corrupted_flags()[i] {
                assert_eq!(out.entries()[i], rec.entries()[i]);
            }
        }
        // A second attack with the same gamma has nothing left to spend.
        let again = replace_attack(&out, 0.05, &9, &mut seeded(4)).unwrap();
        assert_eq!(again, out);
    }

    #[test]
    fn replace_rejects_bad_gamma() {
        assert!(replace_attack(&labels(5), 1.5, &0, &mut seeded(1)).is_err());
    }

    #[test]
    fn coupling_identity_and_swap() {
        let p = OutcomeDistribution::new(vec![0.3, 0.7]).unwrap();
        let mut rng = seeded(5);
        for x in [0, 1] {
            assert_eq!(maximal_couple(&p, &p, x, &mut rng).unwrap(), x);
        }
        let a = OutcomeDistribution::new(vec![1.0, 0.0]).unwrap();
        let b = OutcomeDistribution::new(vec![0.0, 1.0]).unwrap();
        for _ in 0..20 {
            assert_eq!(maximal_couple(&a, &b, 0, &mut rng).unwrap(), 1);
        }
        assert!(matches!(
            maximal_couple(&a, &b, 1, &mut rng),
            Err(Error::InconsistentOutcome { label: 1 })
        ));
    }

    #[test]
    fn coupling_with_equal_laws_changes_nothing() {
        let p = OutcomeDistribution::uniform(3).unwrap();
        let rec = labels(300);
        let plan = CouplingPlan::repeated(&p, &p, 300).unwrap();
        let out = coupling_attack(&rec, &plan, 0.5, &mut seeded(6)).unwrap();
        assert_eq!(out, rec);
        assert_eq!(out.budget_used(), 0);
    }

    #[test]
    fn coupling_rejects_length_mismatch() {
        let p = OutcomeDistribution::uniform(3).unwrap();
        let plan = CouplingPlan::repeated(&p, &p, 10).unwrap();
        assert!(coupling_attack(&labels(11), &plan, 0.1, &mut seeded(1)).is_err());
    }

    #[test]
    fn all_or_nothing_respects_budget() {
        let p = OutcomeDistribution::new(vec![1.0, 0.0]).unwrap();
        let q = OutcomeDistribution::new(vec![0.0, 1.0]).unwrap();
        let rec = OutcomeRecord::new(vec![0usize; 100]);
        let plan = CouplingPlan::repeated(&p, &q, 100).unwrap();
        let none =
            coupling_attack_detailed(&rec, &plan, 0.5, CapMode::AllOrNothing, &mut seeded(1))
                .unwrap();
        assert!(none.capped);
        assert_eq!(none.record, rec);
        let all = coupling_attack_detailed(&rec, &plan, 1.0, CapMode::AllOrNothing, &mut seeded(1))
            .unwrap();
        assert!(!all.capped);
        assert!(all.record.entries().iter().all(|&y| y == 1));
        let prefix =
            coupling_attack_detailed(&rec, &plan, 0.5, CapMode::Prefix, &mut seeded(1)).unwrap();
        assert!(prefix.capped);
        assert_eq!(prefix.record.budget_used(), 50);
        assert!(prefix.record.entries()[..50].iter().all(|&y| y == 1));
        assert!(prefix.record.entries()[50..].iter().all(|&y| y == 0));
    }

    #[test]
    fn spam_contract() {
        let p = OutcomeDistribution::new(vec![0.5, 0.5]).unwrap();
        let q = OutcomeDistribution::new(vec![0.7, 0.3]).unwrap();
        let mut rng = seeded(9);
        let rec = OutcomeRecord::new(sample_outcomes(&p, 200, &mut rng));
        let plan = CouplingPlan::repeated(&p, &q, 200).unwrap();
        assert!(matches!(
            spam_attack(&rec, &plan, 0.1, &mut rng),
            Err(Error::ContractViolation(_))
        ));
        let same = CouplingPlan::repeated(&p, &p, 200).unwrap();
        let out = spam_attack(&rec, &same, 0.0, &mut rng).unwrap();
        assert_eq!(out.record, rec);
    }
}
