//! Exact two-level minimization (Quine-McCluskey with Petrick's method).
//!
//! Assignments listed in neither `ones` nor `zeros` are don't-cares. Primes
//! are generated by merge passes seeded from the ones: each pass frees one
//! more variable of every cube that still excludes all zeros, so only primes
//! covering at least one required minterm are produced. The cover is a
//! minimum-cardinality selection of primes; ties go to fewer literals and
//! then to the lexicographically smallest implicant list.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::time::Instant;

use log::warn;
use thiserror::Error;

/// Largest variable count accepted by [`minimize`].
pub const MAX_VARIABLES: usize = 24;
/// Above this many candidate primes the cover step falls back to greedy.
pub const EXACT_COVER_LIMIT: usize = 64;

/// Full assignment; bit `v` is the value of variable `v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Minterm(pub u32);

impl Minterm {
    /// Parses a bit string where character `i` is variable `i`.
    pub fn parse(bits: &str) -> Option<Minterm> {
        if bits.len() > 32 {
            return None;
        }
        bits.chars().enumerate().try_fold(0u32, |acc, (i, c)| match c {
            '0' => Some(acc),
            '1' => Some(acc | 1 << i),
            _ => None,
        })
        .map(Minterm)
    }

    pub fn to_bit_string(self, n_vars: usize) -> String {
        (0..n_vars).map(|v| if self.0 >> v & 1 == 1 { '1' } else { '0' }).collect()
    }
}

/// Product term. Variables outside `care` are free; `values & !care == 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Implicant {
    pub care: u32,
    pub values: u32,
}

impl Implicant {
    pub fn minterm(m: Minterm, n_vars: usize) -> Self {
        let care = full_mask(n_vars);
        Implicant { care, values: m.0 & care }
    }

    pub fn contains(&self, m: Minterm) -> bool {
        (m.0 ^ self.values) & self.care == 0
    }

    pub fn literal_count(&self) -> u32 {
        self.care.count_ones()
    }

    /// `(variable, polarity)` pairs in ascending variable order.
    pub fn literals(&self) -> impl Iterator<Item = (usize, bool)> + '_ {
        (0..32usize)
            .filter(move |v| self.care >> v & 1 == 1)
            .map(move |v| (v, self.values >> v & 1 == 1))
    }

    fn free(self, v: usize) -> Self {
        Implicant {
            care: self.care & !(1 << v),
            values: self.values & !(1 << v),
        }
    }

    /// Variable-by-variable order: positive literal < negative literal < absent.
    pub fn cmp_lex(&self, other: &Self, n_vars: usize) -> Ordering {
        let code = |i: &Implicant, v: usize| -> u8 {
            if i.care >> v & 1 == 0 {
                2
            } else if i.values >> v & 1 == 1 {
                0
            } else {
                1
            }
        };
        (0..n_vars)
            .map(|v| code(self, v).cmp(&code(other, v)))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }
}

impl fmt::Display for Implicant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.care == 0 {
            return f.write_str("1");
        }
        for (i, (v, pos)) in self.literals().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            if !pos {
                f.write_str("!")?;
            }
            write!(f, "x{v}")?;
        }
        Ok(())
    }
}

fn full_mask(n_vars: usize) -> u32 {
    if n_vars >= 32 {
        u32::MAX
    } else {
        (1u32 << n_vars) - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AbortReason {
    Timeout,
    CubeBudget,
}

impl fmt::Display for AbortReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbortReason::Timeout => f.write_str("timeout"),
            AbortReason::CubeBudget => f.write_str("cube budget exhausted"),
        }
    }
}

/// Work done before a minimization stopped or finished.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Progress {
    pub passes: usize,
    pub cubes: usize,
    pub primes: usize,
}

#[derive(Debug, Error)]
pub enum MinimizeError {
    #[error("minterms appear in both ones and zeros: {offenders:?}")]
    Conflict { offenders: Vec<u32> },
    #[error(
        "{variables} Boolean variables exceed the minimizer limit of {limit}; \
         use relevancy filtering (withrf) to shrink the problem"
    )]
    TooManyVariables { variables: usize, limit: usize },
    #[error("minterm {minterm} does not fit in {variables} variables")]
    OutOfRange { minterm: u32, variables: usize },
    #[error(
        "minimization aborted ({reason}) after {} merge passes: {} cubes generated, {} prime implicants found",
        progress.passes, progress.cubes, progress.primes
    )]
    Aborted { reason: AbortReason, progress: Progress },
}

/// Resource limits checked during merge passes and cover search.
#[derive(Clone, Copy, Debug)]
pub struct Budget {
    pub deadline: Option<Instant>,
    pub max_cubes: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            deadline: None,
            max_cubes: 20_000_000,
        }
    }
}

impl Budget {
    pub fn with_deadline(deadline: Instant) -> Self {
        Budget {
            deadline: Some(deadline),
            ..Budget::default()
        }
    }

    fn expired(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Minimization {
    /// Cover in lexicographic implicant order.
    pub implicants: Vec<Implicant>,
    /// `false` when the greedy fallback chose the cover.
    pub exact: bool,
    pub progress: Progress,
}

/// Minimizes without a deadline.
pub fn minimize(ones: &[Minterm], zeros: &[Minterm], n_vars: usize) -> Result<Vec<Implicant>, MinimizeError> {
    minimize_with(ones, zeros, n_vars, &Budget::default()).map(|m| m.implicants)
}

pub fn minimize_with(
    ones: &[Minterm],
    zeros: &[Minterm],
    n_vars: usize,
    budget: &Budget,
) -> Result<Minimization, MinimizeError> {
    if n_vars > MAX_VARIABLES {
        return Err(MinimizeError::TooManyVariables {
            variables: n_vars,
            limit: MAX_VARIABLES,
        });
    }
    let mask = full_mask(n_vars);
    for m in ones.iter().chain(zeros) {
        if m.0 & !mask != 0 {
            return Err(MinimizeError::OutOfRange {
                minterm: m.0,
                variables: n_vars,
            });
        }
    }
    let mut ones: Vec<u32> = ones.iter().map(|m| m.0).collect();
    ones.sort_unstable();
    ones.dedup();
    let mut zeros: Vec<u32> = zeros.iter().map(|m| m.0).collect();
    zeros.sort_unstable();
    zeros.dedup();
    let offenders: Vec<u32> = ones.iter().copied().filter(|m| zeros.binary_search(m).is_ok()).collect();
    if !offenders.is_empty() {
        return Err(MinimizeError::Conflict { offenders });
    }
    if ones.is_empty() {
        return Ok(Minimization {
            implicants: Vec::new(),
            exact: true,
            progress: Progress::default(),
        });
    }

    let mut progress = Progress::default();
    let mut primes = prime_implicants(&ones, &zeros, n_vars, budget, &mut progress)?;
    primes.sort_by(|a, b| a.cmp_lex(b, n_vars));
    progress.primes = primes.len();

    let (implicants, exact) = select_cover(&ones, &primes, n_vars, budget, progress)?;
    debug_assert!(ones
        .iter()
        .all(|&m| implicants.iter().any(|i| i.contains(Minterm(m)))));
    debug_assert!(zeros
        .iter()
        .all(|&m| !implicants.iter().any(|i| i.contains(Minterm(m)))));
    Ok(Minimization {
        implicants,
        exact,
        progress,
    })
}

fn excludes_zeros(cube: &Implicant, zeros: &[u32]) -> bool {
    zeros.iter().all(|&z| (z ^ cube.values) & cube.care != 0)
}

fn prime_implicants(
    ones: &[u32],
    zeros: &[u32],
    n_vars: usize,
    budget: &Budget,
    progress: &mut Progress,
) -> Result<Vec<Implicant>, MinimizeError> {
    let mut current: Vec<Implicant> = ones.iter().map(|&m| Implicant::minterm(Minterm(m), n_vars)).collect();
    progress.cubes = current.len();
    let mut primes = Vec::new();
    while !current.is_empty() {
        if budget.expired() {
            return Err(abort(AbortReason::Timeout, progress, primes.len()));
        }
        let mut next: HashSet<Implicant> = HashSet::new();
        let mut rejected: HashSet<Implicant> = HashSet::new();
        for (k, cube) in current.iter().enumerate() {
            if k % 4096 == 4095 && budget.expired() {
                return Err(abort(AbortReason::Timeout, progress, primes.len()));
            }
            let mut is_prime = true;
            let mut care = cube.care;
            while care != 0 {
                let v = care.trailing_zeros() as usize;
                care &= care - 1;
                let grown = cube.free(v);
                if next.contains(&grown) {
                    is_prime = false;
                } else if !rejected.contains(&grown) {
                    if excludes_zeros(&grown, zeros) {
                        is_prime = false;
                        next.insert(grown);
                    } else {
                        rejected.insert(grown);
                    }
                }
            }
            if is_prime {
                primes.push(*cube);
            }
        }
        progress.passes += 1;
        progress.cubes += next.len();
        if progress.cubes > budget.max_cubes {
            return Err(abort(AbortReason::CubeBudget, progress, primes.len()));
        }
        current = next.into_iter().collect();
    }
    Ok(primes)
}

fn abort(reason: AbortReason, progress: &Progress, primes: usize) -> MinimizeError {
    MinimizeError::Aborted {
        reason,
        progress: Progress {
            primes,
            ..*progress
        },
    }
}

fn total_literals(set: &[Implicant]) -> u32 {
    set.iter().map(Implicant::literal_count).sum()
}

fn cmp_covers(a: &[Implicant], b: &[Implicant], n_vars: usize) -> Ordering {
    a.len()
        .cmp(&b.len())
        .then_with(|| total_literals(a).cmp(&total_literals(b)))
        .then_with(|| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.cmp_lex(y, n_vars))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

/// `primes` must already be in lexicographic order.
fn select_cover(
    ones: &[u32],
    primes: &[Implicant],
    n_vars: usize,
    budget: &Budget,
    progress: Progress,
) -> Result<(Vec<Implicant>, bool), MinimizeError> {
    let covering: Vec<Vec<usize>> = ones
        .iter()
        .map(|&m| (0..primes.len()).filter(|&p| primes[p].contains(Minterm(m))).collect())
        .collect();

    let mut chosen: Vec<bool> = vec![false; primes.len()];
    for c in &covering {
        if c.len() == 1 {
            chosen[c[0]] = true;
        }
    }
    let remaining: Vec<&Vec<usize>> = covering
        .iter()
        .filter(|c| !c.iter().any(|&p| chosen[p]))
        .collect();

    let mut exact = true;
    if !remaining.is_empty() {
        let mut candidates: Vec<usize> = remaining.iter().flat_map(|c| c.iter().copied()).collect();
        candidates.sort_unstable();
        candidates.dedup();
        let picked = if candidates.len() <= EXACT_COVER_LIMIT {
            petrick(&remaining, &candidates, primes, n_vars, budget, progress)?
        } else {
            warn!(
                "{} candidate primes exceed the exact cover limit of {EXACT_COVER_LIMIT}; \
                 using a greedy cover that may not be minimum",
                candidates.len()
            );
            exact = false;
            greedy(&remaining, primes, n_vars)
        };
        for p in picked {
            chosen[p] = true;
        }
    }
    let cover = primes
        .iter()
        .zip(&chosen)
        .filter(|(_, &c)| c)
        .map(|(p, _)| *p)
        .collect();
    Ok((cover, exact))
}

/// Expands the product of sums over the uncovered minterms, keeping only
/// absorption-minimal terms no larger than a greedy upper bound.
fn petrick(
    remaining: &[&Vec<usize>],
    candidates: &[usize],
    primes: &[Implicant],
    n_vars: usize,
    budget: &Budget,
    progress: Progress,
) -> Result<Vec<usize>, MinimizeError> {
    let slot: HashMap<usize, usize> = candidates.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let mut clauses: Vec<u64> = remaining
        .iter()
        .map(|c| c.iter().fold(0u64, |acc, p| acc | 1 << slot[p]))
        .collect();
    clauses.sort_unstable_by_key(|c| (c.count_ones(), *c));
    clauses.dedup();

    let bound = greedy(remaining, primes, n_vars).len() as u32;
    let mut terms: Vec<u64> = vec![0];
    for (k, &clause) in clauses.iter().enumerate() {
        if k % 8 == 7 && budget.expired() {
            return Err(abort(AbortReason::Timeout, &progress, progress.primes));
        }
        let mut next: Vec<u64> = Vec::with_capacity(terms.len() * 2);
        for &t in &terms {
            if t & clause != 0 {
                next.push(t);
                continue;
            }
            let mut bits = clause;
            while bits != 0 {
                let b = bits & bits.wrapping_neg();
                bits &= bits - 1;
                let grown = t | b;
                if grown.count_ones() <= bound {
                    next.push(grown);
                }
            }
        }
        next.sort_unstable_by_key(|t| (t.count_ones(), *t));
        next.dedup();
        let mut kept: Vec<u64> = Vec::with_capacity(next.len());
        for t in next {
            if !kept.iter().any(|&k| k & !t == 0) {
                kept.push(t);
            }
        }
        terms = kept;
    }

    let to_set = |t: u64| -> Vec<Implicant> {
        (0..candidates.len())
            .filter(|i| t >> i & 1 == 1)
            .map(|i| primes[candidates[i]])
            .collect()
    };
    let best = terms
        .into_iter()
        .min_by(|&a, &b| cmp_covers(&to_set(a), &to_set(b), n_vars))
        .expect("a cover exists because every one is covered by some prime");
    Ok((0..candidates.len())
        .filter(|i| best >> i & 1 == 1)
        .map(|i| candidates[i])
        .collect())
}

fn greedy(remaining: &[&Vec<usize>], primes: &[Implicant], n_vars: usize) -> Vec<usize> {
    let mut uncovered: Vec<&Vec<usize>> = remaining.to_vec();
    let mut picked = Vec::new();
    while !uncovered.is_empty() {
        let mut gain: HashMap<usize, usize> = HashMap::new();
        for c in &uncovered {
            for &p in c.iter() {
                *gain.entry(p).or_default() += 1;
            }
        }
        let best = gain
            .into_iter()
            .max_by(|&(pa, ga), &(pb, gb)| {
                ga.cmp(&gb)
                    .then_with(|| primes[pb].literal_count().cmp(&primes[pa].literal_count()))
                    .then_with(|| primes[pb].cmp_lex(&primes[pa], n_vars))
            })
            .map(|(p, _)| p)
            .expect("uncovered minterms have candidate primes");
        picked.push(best);
        uncovered.retain(|c| !c.contains(&best));
    }
    picked
}

/// Evaluates a DNF on an assignment.
pub fn eval_dnf(implicants: &[Implicant], m: Minterm) -> bool {
    implicants.iter().any(|i| i.contains(m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mt(bits: &[&str]) -> Vec<Minterm> {
        bits.iter().map(|b| Minterm::parse(b).unwrap()).collect()
    }

    #[test]
    fn and_function() {
        let r = minimize(&mt(&["11"]), &mt(&["00", "01", "10"]), 2).unwrap();
        assert_eq!(r, vec![Implicant { care: 0b11, values: 0b11 }]);
        assert_eq!(r[0].to_string(), "x0 & x1");
    }

    #[test]
    fn or_function() {
        let r = minimize(&mt(&["01", "10", "11"]), &mt(&["00"]), 2).unwrap();
        let text: Vec<String> = r.iter().map(|i| i.to_string()).collect();
        assert_eq!(text, vec!["x0", "x1"]);
    }

    #[test]
    fn tautology_and_empty() {
        let r = minimize(&mt(&["101"]), &[], 3).unwrap();
        assert_eq!(r, vec![Implicant { care: 0, values: 0 }]);
        assert!(minimize(&[], &mt(&["000"]), 3).unwrap().is_empty());
    }

    #[test]
    fn conflict_lists_offenders() {
        let err = minimize(&mt(&["10", "11"]), &mt(&["11"]), 2).unwrap_err();
        match err {
            MinimizeError::Conflict { offenders } => assert_eq!(offenders, vec![0b11]),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn guardrail() {
        let err = minimize(&[Minterm(0)], &[], MAX_VARIABLES + 1).unwrap_err();
        assert!(matches!(err, MinimizeError::TooManyVariables { variables: 25, .. }));
        assert!(err.to_string().contains("withrf"));
    }

    #[test]
    fn out_of_range_minterm() {
        assert!(matches!(
            minimize(&[Minterm(4)], &[], 2),
            Err(MinimizeError::OutOfRange { .. })
        ));
    }

    #[test]
    fn expired_deadline_aborts() {
        let budget = Budget::with_deadline(Instant::now());
        let err = minimize_with(&[Minterm(0)], &[Minterm(1)], 4, &budget).unwrap_err();
        assert!(matches!(err, MinimizeError::Aborted { reason: AbortReason::Timeout, .. }));
    }

    #[test]
    fn cube_budget_aborts() {
        let budget = Budget {
            deadline: None,
            max_cubes: 3,
        };
        let err = minimize_with(&[Minterm(0)], &[Minterm(0xff)], 8, &budget).unwrap_err();
        assert!(matches!(err, MinimizeError::Aborted { reason: AbortReason::CubeBudget, .. }));
    }

    #[test]
    fn xor_needs_full_terms() {
        let r = minimize(&mt(&["10", "01"]), &mt(&["00", "11"]), 2).unwrap();
        let text: Vec<String> = r.iter().map(|i| i.to_string()).collect();
        assert_eq!(text, vec!["x0 & !x1", "!x0 & x1"]);
    }

    #[test]
    fn cyclic_cover_is_minimum() {
        // Classic cyclic core: f = sum m(0,1,2,5,6,7) over 3 variables.
        let ones: Vec<Minterm> = [0u32, 1, 2, 5, 6, 7].iter().map(|&m| Minterm(m)).collect();
        let zeros: Vec<Minterm> = [3u32, 4].iter().map(|&m| Minterm(m)).collect();
        let r = minimize(&ones, &zeros, 3).unwrap();
        assert_eq!(r.len(), 3);
        for m in 0..8 {
            let want = ones.contains(&Minterm(m));
            assert_eq!(eval_dnf(&r, Minterm(m)), want, "minterm {m}");
        }
    }

    #[test]
    fn deterministic_order() {
        let ones = mt(&["1100", "0011", "1111"]);
        let zeros = mt(&["0000", "1000", "0100", "0010", "0001"]);
        let a = minimize(&ones, &zeros, 4).unwrap();
        let b = minimize(&ones.iter().rev().copied().collect::<Vec<_>>(), &zeros, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bit_string_round_trip() {
        let m = Minterm::parse("0110").unwrap();
        assert_eq!(m.0, 0b0110);
        assert_eq!(m.to_bit_string(4), "0110");
        assert!(Minterm::parse("01x").is_none());
    }
}
