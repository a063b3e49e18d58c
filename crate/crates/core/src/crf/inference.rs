//! Log-space forward-backward and Viterbi over a two-label chain.

use super::{CrfError, LABELS};
use crate::corpus::TokenLabel;

/// Log clique potentials of one sentence: `initial[s]` scores the first
/// label (coming from the BOS state) and `steps[i][p][s]` scores moving
/// from label `p` at position `i` to label `s` at position `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTable {
    initial: Option<[f64; LABELS]>,
    steps: Vec<[[f64; LABELS]; LABELS]>,
}

impl PotentialTable {
    pub fn new(initial: [f64; LABELS], steps: Vec<[[f64; LABELS]; LABELS]>) -> Self {
        PotentialTable { initial: Some(initial), steps }
    }

    pub fn empty() -> Self {
        PotentialTable { initial: None, steps: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.initial.map_or(0, |_| self.steps.len() + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.initial.is_none()
    }

    /// `log φ_i(prev, cur)`; `prev` is ignored (BOS) at position 0.
    pub fn log_phi(&self, i: usize, prev: TokenLabel, cur: TokenLabel) -> f64 {
        if i == 0 {
            self.initial.expect("non-empty table")[cur.index()]
        } else {
            self.steps[i - 1][prev.index()][cur.index()]
        }
    }

    pub fn initial(&self) -> Option<&[f64; LABELS]> {
        self.initial.as_ref()
    }

    pub fn steps(&self) -> &[[[f64; LABELS]; LABELS]] {
        &self.steps
    }

    /// Adds `c` to every log-potential at position `i`.
    pub fn shift_position(&mut self, i: usize, c: f64) {
        if i == 0 {
            if let Some(init) = self.initial.as_mut() {
                init.iter_mut().for_each(|v| *v += c);
            }
        } else {
            self.steps[i - 1].iter_mut().flatten().for_each(|v| *v += c);
        }
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `alpha[i][s]`: log-sum of all prefixes ending in label `s` at `i`.
pub fn forward(table: &PotentialTable) -> Vec<[f64; LABELS]> {
    let Some(initial) = table.initial else { return Vec::new() };
    let mut alpha = Vec::with_capacity(table.len());
    alpha.push(initial);
    for step in &table.steps {
        let prev = alpha.last().expect("seeded");
        let mut next = [0.0; LABELS];
        for (s, out) in next.iter_mut().enumerate() {
            *out = log_sum_exp(&[prev[0] + step[0][s], prev[1] + step[1][s]]);
        }
        alpha.push(next);
    }
    alpha
}

/// `beta[i][s]`: log-sum of all suffixes after position `i` given label `s`.
pub fn backward(table: &PotentialTable) -> Vec<[f64; LABELS]> {
    let n = table.len();
    let mut beta = vec![[0.0; LABELS]; n];
    for i in (0..n.saturating_sub(1)).rev() {
        let step = &table.steps[i];
        for p in 0..LABELS {
            beta[i][p] = log_sum_exp(&[step[p][0] + beta[i + 1][0], step[p][1] + beta[i + 1][1]]);
        }
    }
    beta
}

/// `log Z`, the log-sum over every label sequence of its summed
/// log-potentials. The empty table has `log Z = 0`.
pub fn log_partition(table: &PotentialTable) -> f64 {
    forward(table).last().map_or(0.0, |a| log_sum_exp(a))
}

/// Unnormalized log score of a labelling.
pub fn sequence_score(table: &PotentialTable, labels: &[TokenLabel]) -> Result<f64, CrfError> {
    if labels.len() != table.len() {
        return Err(CrfError::LengthMismatch { expected: table.len(), got: labels.len() });
    }
    let mut score = 0.0;
    for (i, &cur) in labels.iter().enumerate() {
        let prev = if i == 0 { cur } else { labels[i - 1] };
        score += table.log_phi(i, prev, cur);
    }
    Ok(score)
}

pub fn sequence_log_prob(table: &PotentialTable, labels: &[TokenLabel]) -> Result<f64, CrfError> {
    Ok(sequence_score(table, labels)? - log_partition(table))
}

/// Highest-scoring labelling. Among equally good labellings the one with
/// `O` at the earliest position where they differ wins.
///
/// Best suffix scores are computed right to left, then labels are chosen
/// left to right, which makes the tie rule exact rather than dependent on
/// back-pointer order.
pub fn viterbi(table: &PotentialTable) -> Vec<TokenLabel> {
    let n = table.len();
    if n == 0 {
        return Vec::new();
    }
    let mut best = vec![[0.0; LABELS]; n];
    for i in (0..n - 1).rev() {
        let step = &table.steps[i];
        for p in 0..LABELS {
            best[i][p] = (0..LABELS).map(|s| step[p][s] + best[i + 1][s]).fold(f64::NEG_INFINITY, f64::max);
        }
    }
    let pick = |scores: [f64; LABELS]| {
        let (t, o) = (scores[TokenLabel::T.index()], scores[TokenLabel::O.index()]);
        if t > o {
            TokenLabel::T
        } else {
            TokenLabel::O
        }
    };
    let initial = table.initial.expect("non-empty");
    let mut labels = Vec::with_capacity(n);
    labels.push(pick([initial[0] + best[0][0], initial[1] + best[0][1]]));
    for i in 1..n {
        let p = labels[i - 1].index();
        let step = &table.steps[i - 1];
        labels.push(pick([step[p][0] + best[i][0], step[p][1] + best[i][1]]));
    }
    labels
}

/// Posterior marginals from forward-backward.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    /// `nodes[i][s] = P(s_i = s)`.
    pub nodes: Vec<[f64; LABELS]>,
    /// `edges[i][p][s] = P(s_i = p, s_{i+1} = s)`.
    pub edges: Vec<[[f64; LABELS]; LABELS]>,
    pub log_z: f64,
}

/// Node and edge marginals. Each position is normalized by its own
/// log-sum rather than the global `log_z`: the two agree exactly in real
/// arithmetic, but on long chains `log_z` is large enough that its rounding
/// error would push probabilities past 1.
pub fn marginals(table: &PotentialTable) -> Marginals {
    let alpha = forward(table);
    let beta = backward(table);
    let log_z = alpha.last().map_or(0.0, |a| log_sum_exp(a));
    let nodes = alpha
        .iter()
        .zip(&beta)
        .map(|(a, b)| {
            let joint = [a[0] + b[0], a[1] + b[1]];
            let norm = log_sum_exp(&joint);
            joint.map(|v| (v - norm).exp())
        })
        .collect();
    let edges = table
        .steps
        .iter()
        .enumerate()
        .map(|(i, step)| {
            let mut e = [[0.0; LABELS]; LABELS];
            for p in 0..LABELS {
                for s in 0..LABELS {
                    e[p][s] = alpha[i][p] + step[p][s] + beta[i + 1][s];
                }
            }
            let norm = log_sum_exp(&[e[0][0], e[0][1], e[1][0], e[1][1]]);
            e.map(|row| row.map(|v| (v - norm).exp()))
        })
        .collect();
    Marginals { nodes, edges, log_z }
}
