//! Linking attacks over a complete phenotype × genotype likelihood grid.
//!
//! Identification ranks every genotype for one phenotype. Matching picks the
//! bijection between the two sets with the largest total log-likelihood, i.e.
//! the maximum-weight perfect matching of the complete bipartite graph.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::genome::{GenotypeDatabase, PhenotypeDatabase, PhenotypeProfile};
use crate::model::{log_likelihood, TraitModel};

/// Largest instance `brute_force_matching` will enumerate.
pub const BRUTE_FORCE_MAX: usize = 10;

/// Row-major `|P| × |G|` log-likelihood grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodMatrix {
    rows: usize,
    cols: usize,
    scores: Vec<f64>,
    row_ids: Vec<String>,
    col_ids: Vec<String>,
}

impl LikelihoodMatrix {
    /// Matrix with synthetic ids `p0..`, `g0..`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::domain("ragged likelihood matrix"));
        }
        let row_ids = (0..n).map(|i| format!("p{i}")).collect();
        let col_ids = (0..m).map(|j| format!("g{j}")).collect();
        LikelihoodMatrix::new(rows.into_iter().flatten().collect(), row_ids, col_ids)
    }

    pub fn new(scores: Vec<f64>, row_ids: Vec<String>, col_ids: Vec<String>) -> Result<Self> {
        if scores.len() != row_ids.len() * col_ids.len() {
            return Err(Error::domain("matrix size does not match its ids"));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::domain("likelihood matrix has a non-finite entry"));
        }
        Ok(LikelihoodMatrix {
            rows: row_ids.len(),
            cols: col_ids.len(),
            scores,
            row_ids,
            col_ids,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.scores[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.scores[row * self.cols..(row + 1) * self.cols]
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn col_ids(&self) -> &[String] {
        &self.col_ids
    }

    /// Sum of entries along `row -> mapping[row]`, accumulated in row order.
    pub fn total(&self, mapping: &[usize]) -> f64 {
        mapping
            .iter()
            .enumerate()
            .map(|(i, &j)| self.get(i, j))
            .sum()
    }

    fn max_abs(&self) -> f64 {
        self.scores.iter().fold(0.0, |m, s| m.max(s.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub id: String,
    pub score: f64,
}

/// Genotypes best-first; equal scores ordered by ascending id.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedCandidates(pub Vec<Candidate>);

impl RankedCandidates {
    pub fn best(&self) -> &Candidate {
        &self.0[0]
    }

    pub fn top(&self, k: usize) -> &[Candidate] {
        &self.0[..k.min(self.0.len())]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.0.iter().position(|c| c.id == id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Row `i` is paired with column `mapping[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub mapping: Vec<usize>,
    pub total: f64,
}

fn check_model_inputs(model: &TraitModel, gdb: &GenotypeDatabase) -> Result<()> {
    model.check_genotypes(gdb)?;
    if model.association_count() == 0 {
        return Err(Error::domain("model has no usable associations"));
    }
    Ok(())
}

pub fn build_likelihood_matrix(
    model: &TraitModel,
    pdb: &PhenotypeDatabase,
    gdb: &GenotypeDatabase,
) -> Result<LikelihoodMatrix> {
    if pdb.is_empty() || gdb.is_empty() {
        return Err(Error::domain(
            "cannot build a likelihood matrix from an empty database",
        ));
    }
    model.check_phenotypes(pdb)?;
    check_model_inputs(model, gdb)?;
    let scores: Vec<f64> = pdb
        .records()
        .par_iter()
        .flat_map_iter(|p| {
            gdb.records()
                .iter()
                .map(move |g| log_likelihood(model, &p.profile, &g.genotype))
        })
        .collect();
    LikelihoodMatrix::new(
        scores,
        pdb.ids().map(str::to_string).collect(),
        gdb.ids().map(str::to_string).collect(),
    )
}

fn rank_desc(a: &Candidate, b: &Candidate) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id))
}

/// Ranks every genotype by the likelihood of having produced `p`.
pub fn identification_attack(
    model: &TraitModel,
    p: &PhenotypeProfile,
    gdb: &GenotypeDatabase,
) -> Result<RankedCandidates> {
    if gdb.is_empty() {
        return Err(Error::domain("genotype database is empty"));
    }
    check_model_inputs(model, gdb)?;
    if p.len() != model.traits().len() {
        return Err(Error::domain(
            "phenotype profile does not match the model's traits",
        ));
    }
    let mut ranked: Vec<Candidate> = gdb
        .records()
        .iter()
        .map(|g| Candidate {
            id: g.id.clone(),
            score: log_likelihood(model, p, &g.genotype),
        })
        .collect();
    ranked.sort_by(rank_desc);
    Ok(RankedCandidates(ranked))
}

/// Ranks the columns of one matrix row, using the matrix column ids.
pub fn rank_row(matrix: &LikelihoodMatrix, row: usize) -> RankedCandidates {
    let mut ranked: Vec<Candidate> = matrix
        .row(row)
        .iter()
        .zip(matrix.col_ids())
        .map(|(&score, id)| Candidate {
            id: id.clone(),
            score,
        })
        .collect();
    ranked.sort_by(rank_desc);
    RankedCandidates(ranked)
}

/// Maximum-weight perfect matching of a square matrix.
///
/// Solved as a min-cost assignment on negated weights with the O(n³)
/// shortest-augmenting-path Hungarian method. Among optimal permutations the
/// lexicographically smallest one is returned: the final dual potentials mark
/// which edges are tight, and every optimal matching uses tight edges only.
pub fn matching_attack(matrix: &LikelihoodMatrix) -> Result<Assignment> {
    let n = matrix.rows();
    if n != matrix.cols() {
        return Err(Error::domain(format!(
            "matching needs a square matrix, got {}x{}",
            matrix.rows(),
            matrix.cols()
        )));
    }
    if n == 0 {
        return Err(Error::domain("matching needs at least one row"));
    }
    let cost = |i: usize, j: usize| -matrix.get(i, j);
    let (mut col_of, u, v) = hungarian(n, cost);
    let hungarian_total = matrix.total(&col_of);

    let tol = 1e-10 * (1.0 + matrix.max_abs());
    let tight = |i: usize, j: usize| cost(i, j) - u[i] - v[j] <= tol;
    lexicographic_refine(n, &mut col_of, tight);
    let total = matrix.total(&col_of);
    if total + tol * (n as f64) < hungarian_total {
        // rounding made a slack edge look tight; keep the certified optimum
        let (col_of, _, _) = hungarian(n, cost);
        return Ok(Assignment {
            total: matrix.total(&col_of),
            mapping: col_of,
        });
    }
    Ok(Assignment {
        mapping: col_of,
        total,
    })
}

/// Returns `(column of each row, row potentials, column potentials)` for a
/// minimum-cost assignment; potentials satisfy `cost(i,j) >= u[i] + v[j]`.
fn hungarian(n: usize, cost: impl Fn(usize, usize) -> f64) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    const NONE: usize = usize::MAX;
    // column index n is the virtual start column
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![NONE; n + 1];
    let mut way = vec![n; n + 1];

    for i in 0..n {
        row_of[n] = i;
        let mut j0 = n;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = n;
            for j in 0..n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    if row_of[j] != NONE {
                        u[row_of[j]] += delta;
                    }
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == NONE {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == n {
                break;
            }
        }
        row_of[n] = NONE;
    }

    let mut col_of = vec![0; n];
    for j in 0..n {
        col_of[row_of[j]] = j;
    }
    v.truncate(n);
    (col_of, u, v)
}

/// Rewrites a perfect matching on the tight subgraph into the
/// lexicographically smallest perfect matching of that subgraph.
fn lexicographic_refine(n: usize, col_of: &mut [usize], tight: impl Fn(usize, usize) -> bool) {
    let mut row_of = vec![0; n];
    for (i, &j) in col_of.iter().enumerate() {
        row_of[j] = i;
    }
    for i in 0..n {
        for j in 0..col_of[i] {
            // rows before i are settled and keep their columns
            if row_of[j] < i || !tight(i, j) {
                continue;
            }
            if let Some(path) = alternating_path(n, i, j, col_of, &row_of, &tight) {
                // path holds (row, new column) moves
                for &(r, c) in &path {
                    col_of[r] = c;
                    row_of[c] = r;
                }
                break;
            }
        }
    }
}

/// Looks for a way to give column `target` to row `i`: the displaced rows
/// (all after `i`) shift along tight edges until one takes `i`'s old column.
fn alternating_path(
    n: usize,
    i: usize,
    target: usize,
    col_of: &[usize],
    row_of: &[usize],
    tight: &impl Fn(usize, usize) -> bool,
) -> Option<Vec<(usize, usize)>> {
    let freed = col_of[i];
    let start = row_of[target];
    // parent[c] = column whose row moved onto c
    let mut parent = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    seen[target] = true;
    let mut queue = std::collections::VecDeque::from([target]);
    while let Some(c) = queue.pop_front() {
        let r = row_of[c];
        for c2 in 0..n {
            if seen[c2] || !tight(r, c2) {
                continue;
            }
            if c2 != freed && row_of[c2] <= i {
                continue;
            }
            seen[c2] = true;
            parent[c2] = c;
            if c2 == freed {
                let mut moves = vec![(i, target)];
                let mut cur = freed;
                while cur != target {
                    let from = parent[cur];
                    moves.push((row_of[from], cur));
                    cur = from;
                }
                debug_assert!(moves.iter().any(|&(r, _)| r == start));
                return Some(moves);
            }
            queue.push_back(c2);
        }
    }
    None
}

/// Exhaustive search over all `n!` permutations in lexicographic order,
/// keeping the first one with the largest total.
pub fn brute_force_matching(matrix: &LikelihoodMatrix) -> Result<Assignment> {
    let n = matrix.rows();
    if n != matrix.cols() {
        return Err(Error::domain("matching needs a square matrix"));
    }
    if n == 0 {
        return Err(Error::domain("matching needs at least one row"));
    }
    if n > BRUTE_FORCE_MAX {
        return Err(Error::Guard(format!(
            "brute-force matching limited to n <= {BRUTE_FORCE_MAX}, got {n}"
        )));
    }
    let tol = 1e-12 * (1.0 + matrix.max_abs() * n as f64);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_total = matrix.total(&perm);
    while next_permutation(&mut perm) {
        let t = matrix.total(&perm);
        if t > best_total + tol {
            best_total = t;
            best.copy_from_slice(&perm);
        }
    }
    Ok(Assignment {
        mapping: best,
        total: best_total,
    })
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}
