//! Finite preorders, upper-bound sets and the multiplicity principle check.
//!
//! A preorder `(E, <=)` satisfies the multiplicity principle when there are
//! disjoint `A, B` with
//!
//! * (i) the same set of upper bounds,
//! * (ii) some `a` in `A` with no upper bound in `B`,
//! * (iii) some `b` in `B` with no upper bound in `A`.
//!
//! [`mp_verify`] checks exactly this sufficient condition. Finite truncations
//! of increasing families always contain their own maximum, which then sits
//! in the family's upper-bound set and breaks (i); the weaker
//! [`truncated_family_mp_diagnostic`] reports what can still be checked.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::evaluate::{strictly_increasing, ComparisonVerdict, EvalReport, Outcome};

/// Reflexive, transitively closed relation over named elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinitePreorder {
    elements: Vec<String>,
    index: HashMap<String, usize>,
    // leq[i][j] iff elements[i] <= elements[j]
    leq: Vec<Vec<bool>>,
}

impl FinitePreorder {
    /// Reflexive-transitive closure of `pairs`, each read as `lhs <= rhs`.
    pub fn build<S, T, U>(elements: &[S], pairs: &[(T, U)]) -> Result<Self>
    where
        S: AsRef<str>,
        T: AsRef<str>,
        U: AsRef<str>,
    {
        let mut index = HashMap::with_capacity(elements.len());
        for (i, e) in elements.iter().enumerate() {
            let e = e.as_ref();
            if e.is_empty() || e.chars().any(char::is_whitespace) {
                return param(format!(
                    "element identifier {e:?} must be nonempty without whitespace"
                ));
            }
            if index.insert(e.to_string(), i).is_some() {
                return param(format!("duplicate element {e}"));
            }
        }
        let n = elements.len();
        let mut leq = vec![vec![false; n]; n];
        for (i, row) in leq.iter_mut().enumerate() {
            row[i] = true;
        }
        for (lhs, rhs) in pairs {
            let i = lookup(&index, lhs.as_ref())?;
            let j = lookup(&index, rhs.as_ref())?;
            leq[i][j] = true;
        }
        // Warshall
        for k in 0..n {
            for i in 0..n {
                if leq[i][k] {
                    let row_k = leq[k].clone();
                    for (cell, reach) in leq[i].iter_mut().zip(row_k) {
                        *cell |= reach;
                    }
                }
            }
        }
        Ok(Self {
            elements: elements.iter().map(|e| e.as_ref().to_string()).collect(),
            index,
            leq,
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[String] {
        &self.elements
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        lookup(&self.index, id)
    }

    pub fn leq_idx(&self, i: usize, j: usize) -> bool {
        self.leq[i][j]
    }

    pub fn leq(&self, lhs: &str, rhs: &str) -> Result<bool> {
        Ok(self.leq[self.index_of(lhs)?][self.index_of(rhs)?])
    }

    /// All related pairs `(i, j)` with `i != j`, in index order.
    pub fn strict_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && self.leq[i][j])
            .collect()
    }

    fn resolve<S: AsRef<str>>(&self, ids: &[S]) -> Result<BTreeSet<usize>> {
        ids.iter().map(|id| self.index_of(id.as_ref())).collect()
    }

    fn names(&self, set: impl IntoIterator<Item = usize>) -> Vec<String> {
        set.into_iter().map(|i| self.elements[i].clone()).collect()
    }

    /// `{x : a <= x for all a in set}`; the empty set is bounded by everything.
    pub fn upper_bounds_idx(&self, set: &BTreeSet<usize>) -> BTreeSet<usize> {
        (0..self.len())
            .filter(|&x| set.iter().all(|&a| self.leq[a][x]))
            .collect()
    }

    pub fn upper_bounds<S: AsRef<str>>(&self, set: &[S]) -> Result<Vec<String>> {
        let set = self.resolve(set)?;
        Ok(self.names(self.upper_bounds_idx(&set)))
    }

    /// Plain-text edge list: identifiers on the first line, then one
    /// `lhs <= rhs` line per strict pair of the closure.
    pub fn to_edge_list(&self) -> String {
        let mut out = self.elements.join(" ");
        out.push('\n');
        for (i, j) in self.strict_pairs() {
            out.push_str(&format!("{} <= {}\n", self.elements[i], self.elements[j]));
        }
        out
    }

    /// Parses [`FinitePreorder::to_edge_list`] output. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .enumerate()
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let Some((_, header)) = lines.next() else {
            return Err(Error::Parse("edge list is empty".into()));
        };
        let elements: Vec<&str> = header.split_whitespace().collect();
        let mut pairs = Vec::new();
        for (lineno, line) in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.as_slice() {
                [lhs, "<=", rhs] => pairs.push((*lhs, *rhs)),
                _ => {
                    return Err(Error::Parse(format!(
                        "line {}: expected `<id> <= <id>`, got {line:?}",
                        lineno + 1
                    )))
                }
            }
        }
        Self::build(&elements, &pairs)
    }
}

fn lookup(index: &HashMap<String, usize>, id: &str) -> Result<usize> {
    index
        .get(id)
        .copied()
        .ok_or_else(|| Error::Parameter(format!("unknown element {id}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MpCondition {
    #[serde(rename = "disjointness")]
    Disjoint,
    #[serde(rename = "condition_i")]
    SameUpperBounds,
    #[serde(rename = "condition_ii")]
    AWitness,
    #[serde(rename = "condition_iii")]
    BWitness,
}

impl fmt::Display for MpCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MpCondition::Disjoint => "disjointness of A and B",
            MpCondition::SameUpperBounds => "(i) A and B have the same upper bounds",
            MpCondition::AWitness => "(ii) some a in A has no upper bound in B",
            MpCondition::BWitness => "(iii) some b in B has no upper bound in A",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MpResult {
    pub holds: bool,
    pub disjoint: bool,
    pub cond_upper_bounds_equal: bool,
    pub cond_a_witness: Option<String>,
    pub cond_b_witness: Option<String>,
    pub upper_bounds_a: Vec<String>,
    pub upper_bounds_b: Vec<String>,
    pub failing_condition: Option<MpCondition>,
    pub failing_detail: Option<String>,
}

fn resolve_nonempty<S: AsRef<str>>(
    p: &FinitePreorder,
    set: &[S],
    name: &str,
) -> Result<BTreeSet<usize>> {
    if set.is_empty() {
        return param(format!("subset {name} must not be empty"));
    }
    p.resolve(set)
}

// First element of `from` whose upper bounds avoid `other`.
fn free_element(
    p: &FinitePreorder,
    from: &BTreeSet<usize>,
    other: &BTreeSet<usize>,
) -> Option<usize> {
    from.iter()
        .copied()
        .find(|&x| other.iter().all(|&y| !p.leq[x][y]))
}

/// Checks the sufficient condition for the multiplicity principle on `A, B`.
pub fn mp_verify<S: AsRef<str>, T: AsRef<str>>(
    p: &FinitePreorder,
    a: &[S],
    b: &[T],
) -> Result<MpResult> {
    let a = resolve_nonempty(p, a, "A")?;
    let b = resolve_nonempty(p, b, "B")?;
    Ok(verify_idx(p, &a, &b))
}

fn verify_idx(p: &FinitePreorder, a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> MpResult {
    let shared: Vec<usize> = a.intersection(b).copied().collect();
    let ub_a = p.upper_bounds_idx(a);
    let ub_b = p.upper_bounds_idx(b);
    let wa = free_element(p, a, b);
    let wb = free_element(p, b, a);

    let failure = if !shared.is_empty() {
        Some((
            MpCondition::Disjoint,
            format!("A and B share {:?}", p.names(shared.iter().copied())),
        ))
    } else if ub_a != ub_b {
        Some((
            MpCondition::SameUpperBounds,
            format!(
                "upper bounds of A {:?} differ from upper bounds of B {:?}",
                p.names(ub_a.iter().copied()),
                p.names(ub_b.iter().copied())
            ),
        ))
    } else if wa.is_none() {
        Some((
            MpCondition::AWitness,
            "every element of A has an upper bound in B".to_string(),
        ))
    } else if wb.is_none() {
        Some((
            MpCondition::BWitness,
            "every element of B has an upper bound in A".to_string(),
        ))
    } else {
        None
    };

    MpResult {
        holds: failure.is_none(),
        disjoint: shared.is_empty(),
        cond_upper_bounds_equal: ub_a == ub_b,
        cond_a_witness: wa.map(|i| p.elements[i].clone()),
        cond_b_witness: wb.map(|i| p.elements[i].clone()),
        upper_bounds_a: p.names(ub_a),
        upper_bounds_b: p.names(ub_b),
        failing_condition: failure.as_ref().map(|f| f.0),
        failing_detail: failure.map(|f| f.1),
    }
}

pub const MP_SEARCH_MAX_ELEMENTS: usize = 64;
pub const MP_SEARCH_MAX_SUBSET: usize = 4;

fn subsets_up_to(n: usize, k: usize) -> Vec<u64> {
    fn rec(start: usize, n: usize, left: usize, acc: u64, out: &mut Vec<u64>) {
        for i in start..n {
            let next = acc | (1u64 << i);
            out.push(next);
            if left > 1 {
                rec(i + 1, n, left - 1, next, out);
            }
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, 0, &mut out);
    out
}

fn mask_to_vec(mask: u64) -> Vec<usize> {
    (0..64).filter(|i| mask >> i & 1 == 1).collect()
}

/// All disjoint `(A, B)` with `|A|, |B| <= max_subset_size` satisfying
/// [`mp_verify`], each unordered pair listed once with `A` lexicographically
/// before `B`.
pub fn mp_search(
    p: &FinitePreorder,
    max_subset_size: usize,
) -> Result<Vec<(Vec<String>, Vec<String>)>> {
    let n = p.len();
    if n > MP_SEARCH_MAX_ELEMENTS {
        return param(format!(
            "mp_search supports at most {MP_SEARCH_MAX_ELEMENTS} elements, got {n}"
        ));
    }
    if max_subset_size == 0 || max_subset_size > MP_SEARCH_MAX_SUBSET {
        return param(format!(
            "max_subset_size must lie in 1..={MP_SEARCH_MAX_SUBSET}, got {max_subset_size}"
        ));
    }
    // up[i]: elements above i
    let up: Vec<u64> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| p.leq[i][j])
                .fold(0u64, |m, j| m | 1 << j)
        })
        .collect();
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };

    let mut groups: HashMap<u64, Vec<u64>> = HashMap::new();
    for set in subsets_up_to(n, max_subset_size) {
        let ub = mask_to_vec(set).iter().fold(all, |m, &i| m & up[i]);
        groups.entry(ub).or_default().push(set);
    }

    // Some x in `from` whose up-set misses `other`.
    let has_free = |from: u64, other: u64| mask_to_vec(from).iter().any(|&x| up[x] & other == 0);

    let mut found = Vec::new();
    for members in groups.values() {
        for (i, &sa) in members.iter().enumerate() {
            for &sb in &members[i + 1..] {
                if sa & sb == 0 && has_free(sa, sb) && has_free(sb, sa) {
                    let (va, vb) = (mask_to_vec(sa), mask_to_vec(sb));
                    found.push(if va < vb { (va, vb) } else { (vb, va) });
                }
            }
        }
    }
    found.sort();
    Ok(found
        .into_iter()
        .map(|(a, b)| (p.names(a), p.names(b)))
        .collect())
}

/// Preorder induced by pairwise comparison verdicts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalPreorder {
    pub preorder: FinitePreorder,
    /// Pairs whose comparison stayed undecided and contributed no edge.
    pub undecided: Vec<(String, String)>,
}

/// Builds the preorder over `elements` from `verdicts`, adding `x <= oracle`
/// for every element. Every unordered pair of non-oracle elements must be
/// covered by some verdict.
pub fn build_empirical<S: AsRef<str>>(
    elements: &[S],
    verdicts: &[ComparisonVerdict],
    oracle_id: &str,
) -> Result<EmpiricalPreorder> {
    let ids: Vec<&str> = elements.iter().map(|e| e.as_ref()).collect();
    if !ids.contains(&oracle_id) {
        return param(format!("oracle {oracle_id} is not among the elements"));
    }
    let mut covered: BTreeSet<(&str, &str)> = BTreeSet::new();
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut undecided = Vec::new();
    for v in verdicts {
        for id in [&v.left, &v.right] {
            if !ids.contains(&id.as_str()) {
                return param(format!("verdict mentions unknown element {id}"));
            }
        }
        let key = if v.left <= v.right {
            (v.left.as_str(), v.right.as_str())
        } else {
            (v.right.as_str(), v.left.as_str())
        };
        covered.insert(key);
        match v.outcome {
            Outcome::LeftBelow => pairs.push((v.left.clone(), v.right.clone())),
            Outcome::RightBelow => pairs.push((v.right.clone(), v.left.clone())),
            Outcome::Equivalent => {
                pairs.push((v.left.clone(), v.right.clone()));
                pairs.push((v.right.clone(), v.left.clone()));
            }
            Outcome::Incomparable => {}
            Outcome::Undecided => undecided.push((v.left.clone(), v.right.clone())),
        }
    }
    for (i, x) in ids.iter().enumerate() {
        for y in &ids[i + 1..] {
            if *x == oracle_id || *y == oracle_id {
                continue;
            }
            let key = if x <= y { (*x, *y) } else { (*y, *x) };
            if !covered.contains(&key) {
                return param(format!("no comparison verdict for pair ({x}, {y})"));
            }
        }
    }
    for x in &ids {
        pairs.push((x.to_string(), oracle_id.to_string()));
    }
    Ok(EmpiricalPreorder {
        preorder: FinitePreorder::build(&ids, &pairs)?,
        undecided,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticVerdict {
    /// All finite checks agree with the multiplicity principle holding for the
    /// untruncated families.
    ConsistentWithMpInTheLimit,
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TruncationDiagnostic {
    pub external_upper_bounds_a: Vec<String>,
    pub external_upper_bounds_b: Vec<String>,
    /// (a) both families have the same upper bounds outside themselves.
    pub external_bounds_equal: bool,
    /// (b) the top of each family has no upper bound in the other family.
    pub no_cross_upper_bounds: bool,
    /// (c) detection grows with the family index, CI-separated.
    pub growth_a: bool,
    pub growth_b: bool,
    pub verdict: DiagnosticVerdict,
}

/// Finite-truncation check for two increasing families `a` and `b` (listed
/// in increasing order), with `external` the remaining elements and
/// `growth_*` the detection curves of each family.
pub fn truncated_family_mp_diagnostic<S: AsRef<str>, T: AsRef<str>, U: AsRef<str>>(
    p: &FinitePreorder,
    a: &[S],
    b: &[T],
    external: &[U],
    growth_a: &[EvalReport],
    growth_b: &[EvalReport],
) -> Result<TruncationDiagnostic> {
    let set_a = resolve_nonempty(p, a, "A")?;
    let set_b = resolve_nonempty(p, b, "B")?;
    if !set_a.is_disjoint(&set_b) {
        return param("families A and B must be disjoint");
    }
    let ext = p.resolve(external)?;
    let rest: BTreeSet<usize> = (0..p.len())
        .filter(|i| !set_a.contains(i) && !set_b.contains(i))
        .collect();
    if ext != rest {
        return param("external must be exactly the elements outside A and B");
    }

    let ext_a: BTreeSet<usize> = p
        .upper_bounds_idx(&set_a)
        .intersection(&ext)
        .copied()
        .collect();
    let ext_b: BTreeSet<usize> = p
        .upper_bounds_idx(&set_b)
        .intersection(&ext)
        .copied()
        .collect();

    let top_a = p.index_of(a[a.len() - 1].as_ref())?;
    let top_b = p.index_of(b[b.len() - 1].as_ref())?;
    let no_cross =
        set_b.iter().all(|&y| !p.leq[top_a][y]) && set_a.iter().all(|&x| !p.leq[top_b][x]);

    let growth_a_ok = !growth_a.is_empty() && strictly_increasing(growth_a);
    let growth_b_ok = !growth_b.is_empty() && strictly_increasing(growth_b);
    let all = ext_a == ext_b && no_cross && growth_a_ok && growth_b_ok;
    Ok(TruncationDiagnostic {
        external_bounds_equal: ext_a == ext_b,
        external_upper_bounds_a: p.names(ext_a),
        external_upper_bounds_b: p.names(ext_b),
        no_cross_upper_bounds: no_cross,
        growth_a: growth_a_ok,
        growth_b: growth_b_ok,
        verdict: if all {
            DiagnosticVerdict::ConsistentWithMpInTheLimit
        } else {
            DiagnosticVerdict::Inconsistent
        },
    })
}
