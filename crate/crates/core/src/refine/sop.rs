//! Two-level minimization of a partial boolean function: prime implicants
//! of the on-set plus don't-cares, then a cover of the on-set.

use std::collections::{BTreeSet, HashSet};

/// Inputs above this use greedy expansion instead of full prime generation.
const FULL_PRIMES_MAX: usize = 12;
pub const MAX_INPUTS: usize = 16;

/// Product term: inputs whose bit is set in `care` must equal `value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cube {
    pub care: u32,
    pub value: u32,
}

impl Cube {
    pub fn covers(&self, m: u32) -> bool {
        (m ^ self.value) & self.care == 0
    }

    pub fn literals(&self) -> u32 {
        self.care.count_ones()
    }
}

/// Cover of `on` that excludes every minterm in `off`; everything else is
/// a don't-care. `None` if `inputs` exceeds [`MAX_INPUTS`] or the sets
/// overlap.
pub fn minimize(inputs: usize, on: &[u32], off: &[u32]) -> Option<Vec<Cube>> {
    if inputs > MAX_INPUTS {
        return None;
    }
    let on: BTreeSet<u32> = on.iter().copied().collect();
    let off: HashSet<u32> = off.iter().copied().collect();
    if on.iter().any(|m| off.contains(m)) {
        return None;
    }
    if on.is_empty() {
        return Some(Vec::new());
    }
    let full = if inputs == 32 {
        u32::MAX
    } else {
        (1u32 << inputs) - 1
    };
    let primes = if inputs <= FULL_PRIMES_MAX {
        all_primes(inputs, &off)
    } else {
        on.iter()
            .map(|m| expand(*m, full, inputs, &off))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    };
    Some(cover(&on, primes))
}

fn all_primes(inputs: usize, off: &HashSet<u32>) -> Vec<Cube> {
    let full = (1u32 << inputs) - 1;
    let mut level: HashSet<Cube> = (0..=full)
        .filter(|m| !off.contains(m))
        .map(|m| Cube {
            care: full,
            value: m,
        })
        .collect();
    let mut primes = Vec::new();
    while !level.is_empty() {
        let mut next = HashSet::new();
        let mut merged = HashSet::new();
        for c in &level {
            for b in 0..inputs {
                let bit = 1u32 << b;
                if c.care & bit == 0 || c.value & bit != 0 {
                    continue;
                }
                let twin = Cube {
                    care: c.care,
                    value: c.value | bit,
                };
                if level.contains(&twin) {
                    next.insert(Cube {
                        care: c.care & !bit,
                        value: c.value,
                    });
                    merged.insert(*c);
                    merged.insert(twin);
                }
            }
        }
        primes.extend(level.iter().filter(|c| !merged.contains(c)).copied());
        level = next;
    }
    primes.sort();
    primes
}

/// Drop literals of minterm `m` one at a time, low bit first, while the
/// cube stays clear of the off-set.
fn expand(m: u32, full: u32, inputs: usize, off: &HashSet<u32>) -> Cube {
    let mut c = Cube {
        care: full,
        value: m,
    };
    let off: Vec<u32> = off.iter().copied().collect();
    for b in 0..inputs {
        let bit = 1u32 << b;
        let wider = Cube {
            care: c.care & !bit,
            value: c.value & !bit,
        };
        if !off.iter().any(|x| wider.covers(*x)) {
            c = wider;
        }
    }
    c
}

/// Essential primes first, then greedily the prime covering most remaining
/// minterms (fewer literals, then cube order, break ties).
fn cover(on: &BTreeSet<u32>, primes: Vec<Cube>) -> Vec<Cube> {
    let useful: Vec<Cube> = primes
        .into_iter()
        .filter(|p| on.iter().any(|m| p.covers(*m)))
        .collect();
    let mut chosen: BTreeSet<Cube> = BTreeSet::new();
    for m in on {
        let mut it = useful.iter().filter(|p| p.covers(*m));
        if let (Some(p), None) = (it.next(), it.next()) {
            chosen.insert(*p);
        }
    }
    let mut left: BTreeSet<u32> = on
        .iter()
        .copied()
        .filter(|m| !chosen.iter().any(|p| p.covers(*m)))
        .collect();
    while !left.is_empty() {
        let best = useful
            .iter()
            .filter(|p| !chosen.contains(p))
            .map(|p| (left.iter().filter(|m| p.covers(**m)).count(), p))
            .max_by(|(na, a), (nb, b)| {
                na.cmp(nb)
                    .then(b.literals().cmp(&a.literals()))
                    .then(b.cmp(a))
            })
            .map(|(_, p)| *p)
            .expect("every on-set minterm is covered by some prime");
        left.retain(|m| !best.covers(*m));
        chosen.insert(best);
    }
    let mut out: Vec<Cube> = chosen.into_iter().collect();
    out.sort_by(|a, b| {
        a.literals()
            .cmp(&b.literals())
            .then(b.care.cmp(&a.care))
            .then(a.value.cmp(&b.value))
    });
    out
}
