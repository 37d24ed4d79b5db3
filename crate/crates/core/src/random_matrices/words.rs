//! Normalised traces of words in a matrix tuple.
//!
//! A word is reduced first (unitary letters cancel against their adjoints),
//! rotated cyclically to the cheapest split, and evaluated as
//! `Tr(P S)` with `P`, `S` the prefix and suffix products. Products are
//! cached, so a table of all short words costs only a handful of dense
//! matrix multiplications.

use num_complex::Complex64;
use std::collections::HashMap;

use super::{Entries, MatrixSample};
use crate::error::{Error, Result};
use crate::free_moments::{Letter, Word};

pub struct WordEvaluator<'a> {
    letters: &'a [MatrixSample],
    cache: HashMap<Vec<Letter>, Entries>,
}

impl<'a> WordEvaluator<'a> {
    pub fn new(letters: &'a [MatrixSample]) -> Result<Self> {
        if let Some(first) = letters.first() {
            if letters.iter().any(|s| s.dim() != first.dim()) {
                return Err(Error::invalid("all matrices in a tuple must have the same size"));
            }
        }
        Ok(WordEvaluator { letters, cache: HashMap::new() })
    }

    fn is_unitary(&self, l: Letter) -> bool {
        self.letters[l.index - 1].kind().is_unitary()
    }

    /// Star flags dropped on self-adjoint letters, then free cancellation
    /// of unitary letters, cyclically.
    fn normalise(&self, w: &Word) -> Vec<Letter> {
        let mut stack: Vec<Letter> = Vec::with_capacity(w.degree());
        for &l in w.letters() {
            let l = if self.is_unitary(l) { l } else { Letter::new(l.index) };
            match stack.last() {
                Some(&prev) if self.is_unitary(l) && prev == l.adjoint() => {
                    stack.pop();
                }
                _ => stack.push(l),
            }
        }
        while stack.len() >= 2 && self.is_unitary(stack[0]) && stack[0] == stack[stack.len() - 1].adjoint() {
            stack.remove(0);
            stack.pop();
        }
        stack
    }

    fn letter(&mut self, l: Letter) -> Entries {
        let base = self.letters[l.index - 1].entries();
        if !l.star {
            return base.clone();
        }
        if let Some(e) = self.cache.get(&vec![l]) {
            return e.clone();
        }
        let adj = base.adjoint();
        self.cache.insert(vec![l], adj.clone());
        adj
    }

    fn is_dense(&self, l: Letter) -> bool {
        !self.letters[l.index - 1].is_diagonal()
    }

    /// Dense-times-dense multiplications needed to build `seq` given the
    /// current cache.
    fn cost(&self, seq: &[Letter]) -> usize {
        if seq.len() < 2 || self.cache.contains_key(seq) {
            return 0;
        }
        let head = &seq[..seq.len() - 1];
        let head_dense = head.iter().any(|l| self.is_dense(*l));
        self.cost(head) + usize::from(head_dense && self.is_dense(seq[seq.len() - 1]))
    }

    fn product(&mut self, seq: &[Letter]) -> Entries {
        if seq.len() == 1 {
            return self.letter(seq[0]);
        }
        if let Some(e) = self.cache.get(seq) {
            return e.clone();
        }
        let head = self.product(&seq[..seq.len() - 1]);
        let last = self.letter(seq[seq.len() - 1]);
        let p = head.mul(&last);
        self.cache.insert(seq.to_vec(), p.clone());
        p
    }

    /// `(1/N) Tr w(A_1, ..., A_n)`.
    pub fn trace(&mut self, w: &Word) -> Result<Complex64> {
        if w.max_index() > self.letters.len() {
            return Err(Error::invalid(format!(
                "word {w} uses letter {} but only {} matrices are bound",
                w.max_index(),
                self.letters.len()
            )));
        }
        let seq = self.normalise(w);
        if seq.is_empty() {
            return Ok(Complex64::new(1.0, 0.0));
        }
        let n = self.letters[0].dim() as f64;
        if seq.len() == 1 {
            return Ok(self.letter(seq[0]).trace() / n);
        }
        let m = seq.len();
        let split = m.div_ceil(2);
        let best = (0..m)
            .min_by_key(|&r| {
                let mut rot = seq.clone();
                rot.rotate_left(r);
                (self.cost(&rot[..split]) + self.cost(&rot[split..]), r)
            })
            .unwrap_or(0);
        let mut rot = seq;
        rot.rotate_left(best);
        let p = self.product(&rot[..split]);
        let s = self.product(&rot[split..]);
        Ok(p.trace_of_product(&s) / n)
    }
}

/// `(1/N) Tr` of the word evaluated on the tuple.
pub fn word_trace(samples: &[MatrixSample], w: &Word) -> Result<Complex64> {
    WordEvaluator::new(samples)?.trace(w)
}
