//! Brute-force oracle over non-crossing set partitions: moments and free
//! cumulants of quadratic forms in semicircular/circular systems, computed
//! by explicit enumeration so they can certify the analytic layer.
//!
//! Everything here is deliberately exponential with hard size guards; the
//! oracle exists only to out-trust the system under test on small instances.

use crate::freelimits::CoefficientMatrix;
use crate::{Error, Result};

/// Ground-set elements are 1-based; blocks are sorted, listed by minimum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetPartition {
    pub n: usize,
    pub blocks: Vec<Vec<usize>>,
}

impl SetPartition {
    pub fn new(n: usize, mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n + 1];
        for b in &mut blocks {
            b.sort_unstable();
            if b.is_empty() {
                return Err(Error::InvalidPlan {
                    field: "partition".into(),
                    msg: "empty block".into(),
                });
            }
            for &e in b.iter() {
                if e == 0 || e > n || seen[e] {
                    return Err(Error::InvalidPlan {
                        field: "partition".into(),
                        msg: format!("element {e} out of range or repeated"),
                    });
                }
                seen[e] = true;
            }
        }
        if seen[1..].iter().any(|&s| !s) {
            return Err(Error::InvalidPlan {
                field: "partition".into(),
                msg: "blocks do not cover [n]".into(),
            });
        }
        blocks.sort_by_key(|b| b[0]);
        Ok(Self { n, blocks })
    }

    /// True iff some two blocks interleave: a < b < c < d with a,c in one
    /// block and b,d in another.
    pub fn is_crossing(&self) -> bool {
        for (x, bx) in self.blocks.iter().enumerate() {
            for by in &self.blocks[x + 1..] {
                if blocks_cross(bx, by) {
                    return true;
                }
            }
        }
        false
    }
}

/// Detects the interleaving pattern ABAB (or BABA) in the merge of two
/// sorted blocks; linear automaton scan.
fn blocks_cross(a: &[usize], b: &[usize]) -> bool {
    let mut merged: Vec<(usize, bool)> = a
        .iter()
        .map(|&e| (e, false))
        .chain(b.iter().map(|&e| (e, true)))
        .collect();
    merged.sort_unstable();
    // count label alternations; >= 3 alternations means ABAB as subsequence
    let mut alternations = 0;
    let mut last = merged[0].1;
    for &(_, lab) in &merged[1..] {
        if lab != last {
            alternations += 1;
            last = lab;
        }
    }
    alternations >= 3
}

pub fn catalan(n: usize) -> usize {
    let mut c: u128 = 1;
    for i in 0..n as u128 {
        c = c * 2 * (2 * i + 1) / (i + 2);
    }
    c as usize
}

/// All non-crossing partitions of [n], n ≤ 12; count = Catalan(n).
///
/// Generation uses the interval decomposition: the block of the minimum
/// element splits the rest into gaps that are partitioned independently,
/// which produces exactly the non-crossing partitions.
pub fn enumerate_nc(n: usize) -> Result<Vec<SetPartition>> {
    if n == 0 || n > 12 {
        return Err(Error::SizeGuard {
            what: "enumerate_nc ground set",
            limit: 12,
            got: n,
        });
    }
    let elements: Vec<usize> = (1..=n).collect();
    let parts = nc_rec(&elements);
    Ok(parts
        .into_iter()
        .map(|blocks| SetPartition { n, blocks })
        .collect())
}

fn nc_rec(elements: &[usize]) -> Vec<Vec<Vec<usize>>> {
    if elements.is_empty() {
        return vec![vec![]];
    }
    let m = elements.len();
    let mut out = Vec::new();
    // choose the block of elements[0] as a subset of the rest via bitmask
    for mask in 0..(1u32 << (m - 1)) {
        let mut block = vec![elements[0]];
        let mut gaps: Vec<Vec<usize>> = Vec::new();
        let mut current_gap: Vec<usize> = Vec::new();
        for (bit, &e) in elements[1..].iter().enumerate() {
            if mask & (1 << bit) != 0 {
                block.push(e);
                gaps.push(std::mem::take(&mut current_gap));
            } else {
                current_gap.push(e);
            }
        }
        gaps.push(current_gap);
        // partition each gap independently and take the cross product
        let mut combos: Vec<Vec<Vec<usize>>> = vec![vec![block]];
        for gap in &gaps {
            if gap.is_empty() {
                continue;
            }
            let subs = nc_rec(gap);
            let mut next = Vec::with_capacity(combos.len() * subs.len());
            for c in &combos {
                for s in &subs {
                    let mut merged = c.clone();
                    merged.extend(s.iter().cloned());
                    next.push(merged);
                }
            }
            combos = next;
        }
        out.extend(combos);
    }
    for blocks in &mut out {
        blocks.sort_by_key(|b| b[0]);
    }
    out
}

/// All non-crossing pair partitions of [n] (n even, ≤ 16);
/// count = Catalan(n/2).
pub fn enumerate_nc2(n: usize) -> Result<Vec<SetPartition>> {
    if n % 2 != 0 {
        return Err(Error::InvalidPlan {
            field: "n".into(),
            msg: format!("pairings need even n, got {n}"),
        });
    }
    if n == 0 || n > 16 {
        return Err(Error::SizeGuard {
            what: "enumerate_nc2 ground set",
            limit: 16,
            got: n,
        });
    }
    let elements: Vec<usize> = (1..=n).collect();
    Ok(nc2_rec(&elements)
        .into_iter()
        .map(|mut blocks| {
            blocks.sort_by_key(|b| b[0]);
            SetPartition { n, blocks }
        })
        .collect())
}

fn nc2_rec(elements: &[usize]) -> Vec<Vec<Vec<usize>>> {
    if elements.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    // pair the first element with one at odd distance; inside and outside
    // segments pair independently (anything else would cross)
    for j in (1..elements.len()).step_by(2) {
        let pair = vec![elements[0], elements[j]];
        let inside = nc2_rec(&elements[1..j]);
        let outside = nc2_rec(&elements[j + 1..]);
        for i in &inside {
            for o in &outside {
                let mut blocks = vec![pair.clone()];
                blocks.extend(i.iter().cloned());
                blocks.extend(o.iter().cloned());
                out.push(blocks);
            }
        }
    }
    out
}

/// One symbol of a *-word.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Letter {
    /// family index in [0, k)
    pub index: usize,
    pub starred: bool,
    pub kind: LetterKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LetterKind {
    Semicircular,
    Circular,
}

impl Letter {
    pub fn semicircular(index: usize) -> Self {
        Self {
            index,
            starred: false,
            kind: LetterKind::Semicircular,
        }
    }

    pub fn circular(index: usize, starred: bool) -> Self {
        Self {
            index,
            starred,
            kind: LetterKind::Circular,
        }
    }
}

/// Second-order free cumulant of two letters: δ_{i,j} for semicircular
/// pairs, δ_{i,j}·[stars differ] for circular pairs, 0 across kinds.
fn pair_covariance(a: Letter, b: Letter) -> f64 {
    if a.kind != b.kind || a.index != b.index {
        return 0.0;
    }
    match a.kind {
        LetterKind::Semicircular => 1.0,
        LetterKind::Circular => {
            if a.starred != b.starred {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// φ(word) = Σ over non-crossing pairings of the product of pair
/// covariances; 0 for odd length. Length ≤ 16.
pub fn word_moment(word: &[Letter]) -> Result<f64> {
    if word.len() > 16 {
        return Err(Error::SizeGuard {
            what: "word length",
            limit: 16,
            got: word.len(),
        });
    }
    if word.is_empty() {
        return Ok(1.0);
    }
    if word.len() % 2 != 0 {
        return Ok(0.0);
    }
    let pairings = enumerate_nc2(word.len())?;
    let mut total = 0.0;
    for p in &pairings {
        let mut prod = 1.0;
        for block in &p.blocks {
            prod *= pair_covariance(word[block[0] - 1], word[block[1] - 1]);
            if prod == 0.0 {
                break;
            }
        }
        total += prod;
    }
    Ok(total)
}

fn quadratic_guard(a: &CoefficientMatrix, r: usize) -> Result<()> {
    if r == 0 || r > 6 {
        return Err(Error::SizeGuard {
            what: "quadratic form moment order",
            limit: 6,
            got: r,
        });
    }
    if a.k() > 4 {
        return Err(Error::SizeGuard {
            what: "quadratic form coefficient dimension",
            limit: 4,
            got: a.k(),
        });
    }
    Ok(())
}

/// Letter at 1-based position `pos` of the expanded word x_A^r, where
/// x_A = Σ a_{ij} s_i s_j (semicircular) or Σ a_{ij} c_i* c_j (circular):
/// odd positions carry the row index (starred for circular), even positions
/// the column index.
fn position_letter(kind: LetterKind, pos: usize, index: usize) -> Letter {
    match kind {
        LetterKind::Semicircular => Letter::semicircular(index),
        LetterKind::Circular => Letter::circular(index, pos % 2 == 1),
    }
}

/// Sum over index assignments compatible with one pairing: each pair forces
/// its two positions to share an index, leaving r free indices; the
/// coefficient product Π_m a_{x(2m−1), x(2m)} is summed over all k^r
/// assignments. Returns 0 if any pair's letters cannot covary.
fn pairing_contribution(
    a: &CoefficientMatrix,
    r: usize,
    kind: LetterKind,
    pairing: &SetPartition,
) -> num_complex::Complex64 {
    use num_complex::Complex64;
    let k = a.k();
    let m = a.matrix().mat();
    // pair id for each position (1-based)
    let mut pair_of = vec![0usize; 2 * r + 1];
    for (pid, b) in pairing.blocks.iter().enumerate() {
        // the covariance pattern must be realizable at all: same kind is
        // given, stars must differ for circular letters
        let la = position_letter(kind, b[0], 0);
        let lb = position_letter(kind, b[1], 0);
        if pair_covariance(la, lb) == 0.0 {
            return Complex64::ZERO;
        }
        pair_of[b[0]] = pid;
        pair_of[b[1]] = pid;
    }
    let mut total = Complex64::ZERO;
    let combos = k.pow(r as u32);
    let mut assign = vec![0usize; r];
    for code in 0..combos {
        let mut c = code;
        for slot in assign.iter_mut() {
            *slot = c % k;
            c /= k;
        }
        let mut prod = Complex64::new(1.0, 0.0);
        for fac in 0..r {
            let row = assign[pair_of[2 * fac + 1]];
            let col = assign[pair_of[2 * fac + 2]];
            prod *= m[(row, col)];
            if prod == Complex64::ZERO {
                break;
            }
        }
        total += prod;
    }
    total
}

/// φ((s_A)^r) or φ((c_A)^r) by summing the constrained coefficient sums
/// over all non-crossing pairings of the 2r letter positions.
/// Guards: r ≤ 6, k ≤ 4.
pub fn quadratic_form_moment(a: &CoefficientMatrix, r: usize, kind: LetterKind) -> Result<f64> {
    quadratic_guard(a, r)?;
    let mut total = num_complex::Complex64::ZERO;
    for p in &enumerate_nc2(2 * r)? {
        total += pairing_contribution(a, r, kind, p);
    }
    debug_assert!(total.im.abs() < 1e-9 * (1.0 + total.re.abs()));
    Ok(total.re)
}

/// Whether π joined with the interval partition of consecutive groups of
/// `group` elements connects everything: π ∨ σ = 1̂, via union-find.
pub fn joins_to_full(partition: &SetPartition, group: usize) -> bool {
    let n = partition.n;
    let mut parent: Vec<usize> = (0..=n).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    let union = |parent: &mut Vec<usize>, a: usize, b: usize| {
        let (ra, rb) = (find(parent, a), find(parent, b));
        parent[ra] = rb;
    };
    for b in &partition.blocks {
        for w in b.windows(2) {
            union(&mut parent, w[0], w[1]);
        }
    }
    for start in (1..=n).step_by(group) {
        for e in start..start + group - 1 {
            union(&mut parent, e, e + 1);
        }
    }
    let root = find(&mut parent, 1);
    (2..=n).all(|e| find(&mut parent, e) == root)
}

/// Free cumulant κ_r of the quadratic form via the partition expansion:
/// sum over NC₂(2r) pairings that join the r interval pairs into one block.
/// Must equal Tr[A^r].
pub fn quadratic_form_cumulant(a: &CoefficientMatrix, r: usize, kind: LetterKind) -> Result<f64> {
    quadratic_guard(a, r)?;
    let mut total = num_complex::Complex64::ZERO;
    for p in enumerate_nc2(2 * r)?
        .iter()
        .filter(|p| joins_to_full(p, 2))
    {
        total += pairing_contribution(a, r, kind, p);
    }
    debug_assert!(total.im.abs() < 1e-9 * (1.0 + total.re.abs()));
    Ok(total.re)
}

/// Free cumulants κ₁..κ_m from moments m₁..m_m (m ≤ 8) by the triangular
/// Möbius recursion: m_n = Σ_{π ∈ NC(n)} Π_B κ_{|B|}.
pub fn cumulant_from_moments(moments: &[f64]) -> Result<Vec<f64>> {
    if moments.len() > 8 {
        return Err(Error::SizeGuard {
            what: "moment sequence length",
            limit: 8,
            got: moments.len(),
        });
    }
    let mut kappa: Vec<f64> = Vec::with_capacity(moments.len());
    for (n0, &m) in moments.iter().enumerate() {
        let n = n0 + 1;
        // subtract every non-maximal partition's cumulant product
        let mut rest = 0.0;
        for p in enumerate_nc(n)? {
            if p.blocks.len() == 1 {
                continue;
            }
            let mut prod = 1.0;
            for b in &p.blocks {
                prod *= kappa[b.len() - 1];
            }
            rest += prod;
        }
        kappa.push(m - rest);
    }
    Ok(kappa)
}
