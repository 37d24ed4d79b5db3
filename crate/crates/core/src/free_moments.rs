//! Moments of free products.
//!
//! Two engines are kept side by side: a general centering recursion over
//! arbitrary marginals, and the free Wick formula for semicircular systems.
//! They check each other in the tests.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use crate::equilibrium::{solve_equilibrium, BConfig};
use crate::error::{Error, Result};
use crate::measures::GridMeasure;
use crate::potentials::Potential;
use crate::random_matrices::{is_zero_circle, EnsembleSpec, TupleSampler, WordEvaluator};

pub const DEFAULT_DEGREE_CAP: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Letter {
    /// 1-based variable index.
    pub index: usize,
    pub star: bool,
}

impl Letter {
    pub fn new(index: usize) -> Self {
        Letter { index, star: false }
    }

    pub fn starred(index: usize) -> Self {
        Letter { index, star: true }
    }

    pub fn adjoint(self) -> Self {
        Letter { index: self.index, star: !self.star }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest variable index used (0 for the empty word).
    pub fn max_index(&self) -> usize {
        self.0.iter().map(|l| l.index).max().unwrap_or(0)
    }

    /// `w*`: reversed with every star flag toggled.
    pub fn adjoint(&self) -> Word {
        Word(self.0.iter().rev().map(|l| l.adjoint()).collect())
    }

    /// Same word with star flags dropped.
    pub fn unstarred(&self) -> Word {
        Word(self.0.iter().map(|l| Letter::new(l.index)).collect())
    }

    pub fn rotated(&self, k: usize) -> Word {
        let mut v = self.0.clone();
        if !v.is_empty() {
            let k = k % v.len();
            v.rotate_left(k);
        }
        Word(v)
    }

    /// Free-group reduction: cancel adjacent `g g*` and `g* g`.
    pub fn reduced(&self) -> Word {
        let mut stack: Vec<Letter> = Vec::with_capacity(self.0.len());
        for &l in &self.0 {
            if stack.last() == Some(&l.adjoint()) {
                stack.pop();
            } else {
                stack.push(l);
            }
        }
        Word(stack)
    }

    /// Reduced and cyclically reduced (trace-equivalent for unitaries).
    pub fn cyclically_reduced(&self) -> Word {
        let mut v = self.reduced().0;
        while v.len() >= 2 && v[0] == v[v.len() - 1].adjoint() {
            v.remove(0);
            v.pop();
        }
        Word(v)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            self.0.iter().map(|l| if l.star { format!("{}*", l.index) } else { l.index.to_string() }).collect();
        write!(f, "{}", parts.join(" "))
    }
}

impl FromStr for Word {
    type Err = Error;

    /// Parses `"1 2* 1"`; an optional leading `X`, `x`, `g` or `U` per token
    /// is accepted.
    fn from_str(s: &str) -> Result<Self> {
        let mut letters = Vec::new();
        for tok in s.split_whitespace() {
            let t = tok.trim_start_matches(['X', 'x', 'g', 'U']);
            let (digits, star) = match t.strip_suffix('*') {
                Some(d) => (d, true),
                None => (t, false),
            };
            let index: usize = digits.parse().map_err(|_| Error::Parse(format!("bad letter {tok:?}")))?;
            if index == 0 {
                return Err(Error::Parse("letter indices start at 1".into()));
            }
            letters.push(Letter { index, star });
        }
        Ok(Word(letters))
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alphabet {
    SelfAdjoint,
    Unitary,
}

/// All words of degree `<= max_degree` over `n` letters, empty word first,
/// then by degree and lexicographically.
pub fn all_words(alphabet: Alphabet, n: usize, max_degree: usize) -> Vec<Word> {
    let symbols: Vec<Letter> = (1..=n)
        .flat_map(|i| match alphabet {
            Alphabet::SelfAdjoint => vec![Letter::new(i)],
            Alphabet::Unitary => vec![Letter::new(i), Letter::starred(i)],
        })
        .collect();
    let mut out = vec![Word::empty()];
    let mut layer = vec![Word::empty()];
    for _ in 0..max_degree {
        let mut next = Vec::with_capacity(layer.len() * symbols.len());
        for w in &layer {
            for s in &symbols {
                let mut v = w.0.clone();
                v.push(*s);
                next.push(Word(v));
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Table of (possibly estimated) moments keyed by word strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub alphabet: Alphabet,
    pub n: usize,
    pub max_degree: usize,
    pub values: BTreeMap<Word, Complex64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub errors: Option<BTreeMap<Word, f64>>,
}

impl MomentTable {
    /// Tabulates `f` over every word up to `max_degree`.
    pub fn tabulate<F>(alphabet: Alphabet, n: usize, max_degree: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(&Word) -> Result<Complex64>,
    {
        let mut values = BTreeMap::new();
        for w in all_words(alphabet, n, max_degree) {
            let v = if w.is_empty() { Complex64::new(1.0, 0.0) } else { f(&w)? };
            values.insert(w, v);
        }
        Ok(MomentTable { alphabet, n, max_degree, values, errors: None })
    }

    pub fn get(&self, w: &Word) -> Option<Complex64> {
        self.values.get(w).copied()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Moment sequence of one free variable: `m(k)` for `k >= 0`, with
/// `m(-k) = conj m(k)` for unitaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    pub alphabet: Alphabet,
    moments: Vec<Complex64>,
}

impl Marginal {
    pub fn from_moments(alphabet: Alphabet, moments: Vec<Complex64>) -> Result<Self> {
        if moments.is_empty() {
            return Err(Error::invalid("a marginal needs at least its zeroth moment"));
        }
        Ok(Marginal { alphabet, moments })
    }

    /// Standard semicircle, `m(2k) = Catalan(k)`.
    pub fn semicircle(cap: usize) -> Self {
        Marginal::semicircle_with(0.0, 1.0, cap)
    }

    /// Semicircle with the given mean and variance.
    pub fn semicircle_with(mean: f64, variance: f64, cap: usize) -> Self {
        let s = variance.sqrt();
        let standard: Vec<f64> =
            (0..=cap).map(|k| if k % 2 == 1 { 0.0 } else { catalan(k / 2) * s.powi(k as i32) }).collect();
        // Binomial shift by the mean.
        let moments = (0..=cap)
            .map(|k| {
                let v: f64 = (0..=k).map(|j| binomial(k, j) * mean.powi((k - j) as i32) * standard[j]).sum();
                Complex64::new(v, 0.0)
            })
            .collect();
        Marginal { alphabet: Alphabet::SelfAdjoint, moments }
    }

    /// Haar unitary, `m(k) = [k == 0]`.
    pub fn haar(cap: usize) -> Self {
        let mut moments = vec![Complex64::new(0.0, 0.0); cap + 1];
        moments[0] = Complex64::new(1.0, 0.0);
        Marginal { alphabet: Alphabet::Unitary, moments }
    }

    /// Cell-averaged moments of a grid measure (interval: self-adjoint,
    /// circle: unitary).
    pub fn from_measure(mu: &GridMeasure, cap: usize) -> Result<Self> {
        let alphabet = if mu.carrier().is_circle() { Alphabet::Unitary } else { Alphabet::SelfAdjoint };
        let moments = (0..=cap).map(|k| mu.moment_capped(k, cap)).collect::<Result<Vec<_>>>()?;
        Ok(Marginal { alphabet, moments })
    }

    pub fn moment(&self, k: i64) -> Result<Complex64> {
        let a = k.unsigned_abs() as usize;
        let v = *self.moments.get(a).ok_or(Error::DegreeCap { requested: a, cap: self.moments.len() - 1 })?;
        Ok(if k < 0 { v.conj() } else { v })
    }
}

fn catalan(k: usize) -> f64 {
    binomial(2 * k, k) / (k + 1) as f64
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Laurent polynomial in one variable.
type Poly = BTreeMap<i64, Complex64>;

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (i, x) in a {
        for (j, y) in b {
            *out.entry(i + j).or_default() += x * y;
        }
    }
    out
}

#[derive(Clone)]
struct Factor {
    index: usize,
    poly: Poly,
}

/// Free product state evaluated on a word.
///
/// Consecutive letters of the same variable are merged into one factor;
/// each factor is split into its centred part plus its mean, and the
/// freeness rule kills every product of centred factors with alternating
/// variables.
pub fn free_product_moment(marginals: &[Marginal], w: &Word) -> Result<Complex64> {
    free_product_moment_capped(marginals, w, DEFAULT_DEGREE_CAP)
}

pub fn free_product_moment_capped(marginals: &[Marginal], w: &Word, cap: usize) -> Result<Complex64> {
    if w.degree() > cap {
        return Err(Error::DegreeCap { requested: w.degree(), cap });
    }
    if w.max_index() > marginals.len() {
        return Err(Error::invalid(format!(
            "word {w} uses letter {} beyond {} marginals",
            w.max_index(),
            marginals.len()
        )));
    }
    let mut factors: Vec<Factor> = Vec::new();
    for l in w.letters() {
        let m = &marginals[l.index - 1];
        let exp = match m.alphabet {
            Alphabet::Unitary if l.star => -1,
            _ => 1,
        };
        match factors.last_mut() {
            Some(f) if f.index == l.index => {
                let shifted: Poly = f.poly.iter().map(|(k, c)| (k + exp, *c)).collect();
                f.poly = shifted;
            }
            _ => factors.push(Factor { index: l.index, poly: Poly::from([(exp, Complex64::new(1.0, 0.0))]) }),
        }
    }
    let mut memo = HashMap::new();
    alternating_state(marginals, &factors, &mut memo)
}

fn mean(marginals: &[Marginal], f: &Factor) -> Result<Complex64> {
    let m = &marginals[f.index - 1];
    let mut s = Complex64::new(0.0, 0.0);
    for (k, c) in &f.poly {
        s += c * m.moment(*k)?;
    }
    Ok(s)
}

fn factors_key(factors: &[Factor]) -> String {
    let mut s = String::new();
    for f in factors {
        s.push_str(&format!("{}:", f.index));
        for (k, c) in &f.poly {
            s.push_str(&format!("{k}={:e},{:e};", c.re, c.im));
        }
        s.push('|');
    }
    s
}

/// `tau(f_1 ... f_r)` with adjacent factors in different variables.
fn alternating_state(
    marginals: &[Marginal],
    factors: &[Factor],
    memo: &mut HashMap<String, Complex64>,
) -> Result<Complex64> {
    match factors.len() {
        0 => return Ok(Complex64::new(1.0, 0.0)),
        1 => return mean(marginals, &factors[0]),
        _ => {}
    }
    let key = factors_key(factors);
    if let Some(v) = memo.get(&key) {
        return Ok(*v);
    }
    let r = factors.len();
    let means: Vec<Complex64> = factors.iter().map(|f| mean(marginals, f)).collect::<Result<_>>()?;
    let centred: Vec<Factor> = factors
        .iter()
        .zip(&means)
        .map(|(f, m)| {
            let mut p = f.poly.clone();
            *p.entry(0).or_default() -= m;
            Factor { index: f.index, poly: p }
        })
        .collect();
    // Sum over the set S of positions that contribute their mean; S empty
    // vanishes by freeness.
    let mut total = Complex64::new(0.0, 0.0);
    for mask in 1u32..(1 << r) {
        let mut coeff = Complex64::new(1.0, 0.0);
        let mut rest: Vec<Factor> = Vec::new();
        for j in 0..r {
            if mask & (1 << j) != 0 {
                coeff *= means[j];
            } else {
                match rest.last_mut() {
                    Some(prev) if prev.index == centred[j].index => {
                        prev.poly = poly_mul(&prev.poly, &centred[j].poly);
                    }
                    _ => rest.push(centred[j].clone()),
                }
            }
        }
        if coeff == Complex64::new(0.0, 0.0) {
            continue;
        }
        total += coeff * alternating_state(marginals, &rest, memo)?;
    }
    memo.insert(key, total);
    Ok(total)
}

/// Free Wick formula: the number of non-crossing pair partitions of the
/// word that only pair equal letters.
pub fn semicircular_moment(w: &Word) -> f64 {
    let idx: Vec<usize> = w.letters().iter().map(|l| l.index).collect();
    let m = idx.len();
    if m % 2 == 1 {
        return 0.0;
    }
    // count[i][j] = pairings of idx[i..j].
    let mut count = vec![vec![0.0f64; m + 1]; m + 1];
    for (i, row) in count.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for len in (2..=m).step_by(2) {
        for i in 0..=(m - len) {
            let j = i + len;
            let mut c = 0.0;
            let mut k = i + 1;
            while k < j {
                if idx[i] == idx[k] {
                    c += count[i + 1][k] * count[k + 1][j];
                }
                k += 2;
            }
            count[i][j] = c;
        }
    }
    count[0][m]
}

/// Free Haar unitaries: 1 on words reducing to the identity, else 0.
pub fn haar_free_moment(w: &Word) -> Complex64 {
    if w.reduced().is_empty() {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// One row of an asymptotic-freeness comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreenessRow {
    pub word: Word,
    pub sampled: Complex64,
    /// Standard error of `sampled`.
    pub sigma: f64,
    pub free: Complex64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreenessReport {
    pub dim: usize,
    pub samples: usize,
    pub max_degree: usize,
    pub rows: Vec<FreenessRow>,
}

impl FreenessReport {
    /// Row with the largest gap.
    pub fn worst(&self) -> Option<&FreenessRow> {
        self.rows.iter().max_by(|a, b| a.gap.total_cmp(&b.gap))
    }

    pub fn max_gap(&self) -> f64 {
        self.worst().map_or(0.0, |r| r.gap)
    }
}

/// Limiting marginal of one letter of the ensemble: semicircle for
/// quadratics, Haar for `Q = 0` on the circle, else the equilibrium measure.
pub fn limit_marginal(q: &Potential, cap: usize) -> Result<Marginal> {
    if let Some((a, b, _)) = q.as_quadratic() {
        return Ok(Marginal::semicircle_with(-b / (2.0 * a), 1.0 / (2.0 * a), cap));
    }
    if is_zero_circle(q) {
        return Ok(Marginal::haar(cap));
    }
    let cfg = BConfig::default();
    Marginal::from_measure(&solve_equilibrium(q, cfg.radius, cfg.grid)?, cap)
}

/// Compares sampled normalised traces of every word up to degree `m`
/// against the free product of the limiting marginals.
pub fn asymptotic_freeness_report(spec: &EnsembleSpec, m: usize, count: usize) -> Result<FreenessReport> {
    if m > DEFAULT_DEGREE_CAP {
        return Err(Error::DegreeCap { requested: m, cap: DEFAULT_DEGREE_CAP });
    }
    if count < 2 {
        return Err(Error::invalid("at least two samples are needed for an error estimate"));
    }
    let alphabet = if spec.kind.is_unitary() { Alphabet::Unitary } else { Alphabet::SelfAdjoint };
    let words: Vec<Word> =
        all_words(alphabet, spec.potentials.len(), m).into_iter().filter(|w| !w.is_empty()).collect();
    let marginals = spec.potentials.iter().map(|q| limit_marginal(q, m)).collect::<Result<Vec<_>>>()?;

    let sampler = TupleSampler::new(spec, count)?;
    let traces = sampler.map(|_, tuple| {
        let mut eval = WordEvaluator::new(&tuple)?;
        words.iter().map(|w| eval.trace(w)).collect::<Result<Vec<_>>>()
    })?;

    let k = count as f64;
    let mut rows = Vec::with_capacity(words.len());
    for (j, w) in words.into_iter().enumerate() {
        let mean = traces.iter().map(|t| t[j]).sum::<Complex64>() / k;
        let var = traces.iter().map(|t| (t[j] - mean).norm_sqr()).sum::<f64>() / (k - 1.0);
        let free = free_product_moment_capped(&marginals, &w, m)?;
        rows.push(FreenessRow { gap: (mean - free).norm(), sampled: mean, sigma: (var / k).sqrt(), free, word: w });
    }
    Ok(FreenessReport { dim: spec.dim, samples: count, max_degree: m, rows })
}
