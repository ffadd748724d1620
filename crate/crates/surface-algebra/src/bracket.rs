//! The double bracket, the uniderivations and the two triple brackets.
//!
//! Everything is computed on letters first. A letter bracket comes from the
//! local table at shared punctures, or from the inverse rules, and is then
//! spread over words by the two Leibniz rules.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{q, Alg, Cyclic, Element, Letter, Lin, Tensor2, Tensor3, Word, Q};
use crate::surface::{End, EndKind};

pub type Raw2 = Lin<(Word, Word)>;

/// Where an edge-end meets a decoration curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EndIncidence {
    pub edge: usize,
    pub kind: EndKind,
    pub puncture: usize,
    pub position: usize,
}

/// Output shape of a local case, in terms of the two arcs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    /// α₂α₁ ⊗ 1
    SecondFirstOne,
    /// α₂ ⊗ α₁
    SecondFirst,
    /// α₁ ⊗ α₂
    FirstSecond,
    /// 1 ⊗ α₁α₂
    OneFirstSecond,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LocalCase {
    pub kind1: EndKind,
    pub kind2: EndKind,
    pub first_left: bool,
    /// Coefficient is `sign / 2`.
    pub sign: i8,
    pub shape: Shape,
}

use EndKind::{Head, Tail};

/// The eight local cases. The first four are the defining ones; the
/// other four follow from skew-symmetry and are re-derived in the tests.
pub const LOCAL_TABLE: [LocalCase; 8] = [
    LocalCase { kind1: Head, kind2: Tail, first_left: true, sign: -1, shape: Shape::SecondFirstOne },
    LocalCase { kind1: Tail, kind2: Tail, first_left: true, sign: 1, shape: Shape::SecondFirst },
    LocalCase { kind1: Head, kind2: Head, first_left: true, sign: 1, shape: Shape::FirstSecond },
    LocalCase { kind1: Tail, kind2: Head, first_left: true, sign: -1, shape: Shape::OneFirstSecond },
    LocalCase { kind1: Head, kind2: Tail, first_left: false, sign: 1, shape: Shape::SecondFirstOne },
    LocalCase { kind1: Tail, kind2: Tail, first_left: false, sign: -1, shape: Shape::SecondFirst },
    LocalCase { kind1: Head, kind2: Head, first_left: false, sign: -1, shape: Shape::FirstSecond },
    LocalCase { kind1: Tail, kind2: Head, first_left: false, sign: 1, shape: Shape::OneFirstSecond },
];

pub fn local_case(kind1: EndKind, kind2: EndKind, first_left: bool) -> LocalCase {
    *LOCAL_TABLE.iter().find(|c| c.kind1 == kind1 && c.kind2 == kind2 && c.first_left == first_left).unwrap()
}

/// Instantiate a local case with concrete words for the two arcs.
pub fn instantiate(case: LocalCase, a1: &Word, a2: &Word) -> Raw2 {
    let c = q(case.sign as i64, 2);
    let key = match case.shape {
        Shape::SecondFirstOne => (a2.mul(a1), Word::one()),
        Shape::SecondFirst => (a2.clone(), a1.clone()),
        Shape::FirstSecond => (a1.clone(), a2.clone()),
        Shape::OneFirstSecond => (Word::one(), a1.mul(a2)),
    };
    Lin::single(key, c)
}

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum BracketError {
    #[error("edge-ends are at different punctures")]
    DifferentPunctures,
    #[error("coincident fan positions: self-bracket convention applies")]
    Coincident,
    #[error("unknown puncture `{0}`")]
    UnknownPuncture(String),
    #[error("operands live in different algebras")]
    Mismatch,
}

pub fn local_pair_bracket(c1: EndIncidence, c2: EndIncidence, a1: &Word, a2: &Word) -> Result<Raw2, BracketError> {
    if c1.puncture != c2.puncture {
        return Err(BracketError::DifferentPunctures);
    }
    if c1.position == c2.position {
        return Err(BracketError::Coincident);
    }
    Ok(instantiate(local_case(c1.kind, c2.kind, c1.position < c2.position), a1, a2))
}

fn add_mapped(out: &mut Raw2, t: &Raw2, scale: &Q, f: impl Fn(&Word, &Word) -> (Word, Word)) {
    for ((a, b), c) in &t.0 {
        out.add_term(f(a, b), c * scale);
    }
}

/// Letter-level bracket with a cache, over one algebra.
pub struct BracketEngine {
    pub alg: Alg,
    cache: RefCell<HashMap<(Letter, Letter), Rc<Raw2>>>,
    ends: Vec<[EndIncidence; 2]>,
}

impl BracketEngine {
    pub fn new(alg: &Alg) -> BracketEngine {
        let s = &alg.surface;
        let ends = (0..s.edges.len())
            .map(|e| {
                let inc = |kind| {
                    let end = End { edge: e, kind };
                    EndIncidence {
                        edge: e,
                        kind,
                        puncture: s.end_puncture(end),
                        position: s.fan_position(end).expect("edge-end missing from fan"),
                    }
                };
                [inc(Tail), inc(Head)]
            })
            .collect();
        BracketEngine { alg: alg.clone(), cache: RefCell::new(HashMap::new()), ends }
    }

    fn formal(&self, gen: u32) -> Option<&Element> {
        self.alg.formal_index(gen).map(|i| &self.alg.formal[i].base)
    }

    /// ⟨⟨g, h⟩⟩ for two edges, from the local table.
    fn edge_pair(&self, g: usize, h: usize) -> Raw2 {
        let mut out = Raw2::new();
        let wg = Word::letter(Letter::new(g, 1));
        let wh = Word::letter(Letter::new(h, 1));
        for c1 in self.ends[g] {
            for c2 in self.ends[h] {
                if c1.puncture == c2.puncture && c1.position != c2.position {
                    out.add_lin(&local_pair_bracket(c1, c2, &wg, &wh).unwrap());
                }
            }
        }
        out
    }

    /// Bracket of two letters, inverse rules included.
    pub fn letters(&self, g: Letter, h: Letter) -> Rc<Raw2> {
        if let Some(r) = self.cache.borrow().get(&(g, h)) {
            return r.clone();
        }
        let minus = -Q::one();
        let r = if h.exp < 0 {
            // ⟨⟨a, h⁻¹⟩⟩ = −(h⁻¹ ⊗ 1)⟨⟨a, h⟩⟩(1 ⊗ h⁻¹)
            let base = self.letters(g, h.inv());
            let hi = Word::letter(h);
            let mut out = Raw2::new();
            add_mapped(&mut out, &base, &minus, |x, y| (hi.mul(x), y.mul(&hi)));
            out
        } else if g.exp < 0 {
            // ⟨⟨g⁻¹, c⟩⟩ = −(1 ⊗ g⁻¹)⟨⟨g, c⟩⟩(g⁻¹ ⊗ 1)
            let base = self.letters(g.inv(), h);
            let gi = Word::letter(g);
            let mut out = Raw2::new();
            add_mapped(&mut out, &base, &minus, |x, y| (x.mul(&gi), gi.mul(y)));
            out
        } else if let Some(b) = self.formal(g.gen) {
            // g = B⁻¹ for a formal symbol
            let base = self.lin_word(&b.terms, &Word::letter(h));
            let y = Word::letter(g);
            let mut out = Raw2::new();
            add_mapped(&mut out, &base, &minus, |x, z| (x.mul(&y), y.mul(z)));
            out
        } else if let Some(b) = self.formal(h.gen) {
            let base = self.word_lin(&Word::letter(g), &b.terms);
            let y = Word::letter(h);
            let mut out = Raw2::new();
            add_mapped(&mut out, &base, &minus, |x, z| (y.mul(x), z.mul(&y)));
            out
        } else {
            self.edge_pair(g.gen as usize, h.gen as usize)
        };
        let r = Rc::new(r);
        self.cache.borrow_mut().insert((g, h), r.clone());
        r
    }

    /// ⟨⟨u, v⟩⟩ for words, before normal-forming.
    pub fn words(&self, u: &Word, v: &Word) -> Raw2 {
        let mut out = Raw2::new();
        for (i, &a) in u.0.iter().enumerate() {
            let ul = Word(u.0[..i].to_vec());
            let ur = Word(u.0[i + 1..].to_vec());
            for (j, &b) in v.0.iter().enumerate() {
                let lb = self.letters(a, b);
                if lb.is_zero() {
                    continue;
                }
                let vl = Word(v.0[..j].to_vec());
                let vr = Word(v.0[j + 1..].to_vec());
                for ((x, y), c) in &lb.0 {
                    out.add_term((Word::mul3(&vl, x, &ur), Word::mul3(&ul, y, &vr)), c.clone());
                }
            }
        }
        out
    }

    fn lin_word(&self, x: &Lin<Word>, v: &Word) -> Raw2 {
        let mut out = Raw2::new();
        for (u, c) in &x.0 {
            out.add_scaled(&self.words(u, v), c);
        }
        out
    }

    fn word_lin(&self, u: &Word, y: &Lin<Word>) -> Raw2 {
        let mut out = Raw2::new();
        for (v, c) in &y.0 {
            out.add_scaled(&self.words(u, v), c);
        }
        out
    }

    pub fn lin(&self, x: &Lin<Word>, y: &Lin<Word>) -> Raw2 {
        let mut out = Raw2::new();
        for (u, cu) in &x.0 {
            for (v, cv) in &y.0 {
                out.add_scaled(&self.words(u, v), &(cu * cv));
            }
        }
        out
    }

    /// Normal-form a raw tensor slot by slot.
    pub fn normalize(&self, raw: &Raw2) -> Tensor2 {
        let mut t = Tensor2::zero(&self.alg);
        for ((a, b), c) in &raw.0 {
            let ra = self.alg.reduce_lin(1, &a.0);
            let rb = self.alg.reduce_lin(1, &b.0);
            for (wa, ca) in &ra.0 {
                for (wb, cb) in &rb.0 {
                    t.terms.add_term((wa.clone(), wb.clone()), c * ca * cb);
                }
            }
        }
        t
    }

    pub fn bracket(&self, x: &Element, y: &Element) -> Tensor2 {
        self.normalize(&self.lin(&x.terms, &y.terms))
    }

    /// ∂_p of a letter.
    fn d_letter(&self, p: usize, l: Letter) -> Raw2 {
        let minus = -Q::one();
        let w = Word::letter(l);
        if l.exp < 0 {
            let base = self.d_letter(p, l.inv());
            let mut out = Raw2::new();
            add_mapped(&mut out, &base, &minus, |x, y| (w.mul(x), y.mul(&w)));
            return out;
        }
        if let Some(b) = self.formal(l.gen) {
            let base = self.d_lin(p, &b.terms);
            let mut out = Raw2::new();
            add_mapped(&mut out, &base, &minus, |x, y| (w.mul(x), y.mul(&w)));
            return out;
        }
        let [t, h] = self.ends[l.gen as usize];
        let mut out = Raw2::new();
        if t.puncture == p {
            out.add_term((w.clone(), Word::one()), Q::one());
        }
        if h.puncture == p {
            out.add_term((Word::one(), w.clone()), minus);
        }
        out
    }

    /// ∂_p of a raw linear combination, as an outer derivation.
    pub fn d_lin(&self, p: usize, x: &Lin<Word>) -> Raw2 {
        let mut out = Raw2::new();
        for (u, c) in &x.0 {
            for (i, &l) in u.0.iter().enumerate() {
                let left = Word(u.0[..i].to_vec());
                let right = Word(u.0[i + 1..].to_vec());
                for ((a, b), k) in &self.d_letter(p, l).0 {
                    out.add_term((left.mul(a), b.mul(&right)), c * k);
                }
            }
        }
        out
    }

    pub fn uniderivation(&self, p: usize, x: &Element) -> Tensor2 {
        self.normalize(&self.d_lin(p, &x.terms))
    }

    pub fn total_uniderivation(&self, x: &Element) -> Tensor2 {
        let mut raw = Raw2::new();
        for p in 0..self.alg.surface.punctures.len() {
            raw.add_lin(&self.d_lin(p, &x.terms));
        }
        self.normalize(&raw)
    }

    /// (⟨⟨·,·⟩⟩ ⊗ Id)(Id ⊗ ⟨⟨·,·⟩⟩)(a ⊗ b ⊗ c)
    fn inner_outer(&self, a: &Element, b: &Element, c: &Element) -> Tensor3 {
        let bc = self.bracket(b, c);
        let mut out = Tensor3::zero(&self.alg);
        for ((x, y), k) in &bc.terms.0 {
            let ax = self.normalize(&self.lin(&a.terms, &Lin::single(x.clone(), Q::one())));
            for ((u, v), m) in &ax.terms.0 {
                out.terms.add_term((u.clone(), v.clone(), y.clone()), k * m);
            }
        }
        out
    }

    /// Σₖ τᵏ ∘ (⟨⟨·,·⟩⟩ ⊗ Id) ∘ (Id ⊗ ⟨⟨·,·⟩⟩) ∘ τ⁻ᵏ
    pub fn triple(&self, a: &Element, b: &Element, c: &Element) -> Tensor3 {
        let k0 = self.inner_outer(a, b, c);
        let k1 = self.inner_outer(c, a, b).tau();
        let k2 = self.inner_outer(b, c, a).tau().tau();
        &(&k0 + &k1) + &k2
    }

    /// The triple bracket of ∂, one puncture at a time:
    /// Σ_p ¼ ∂_p(c)′∂_p(a)″ ⊗ ∂_p(a)′∂_p(b)″ ⊗ ∂_p(b)′∂_p(c)″.
    pub fn triple_from_derivation(&self, a: &Element, b: &Element, c: &Element) -> Tensor3 {
        let mut out = Tensor3::zero(&self.alg);
        for p in 0..self.alg.surface.punctures.len() {
            let (da, db, dc) = (self.uniderivation(p, a), self.uniderivation(p, b), self.uniderivation(p, c));
            quarter_product(&mut out, &dc, &da, &db);
        }
        out
    }

    /// The same quarter-product with the single total derivation and the
    /// slot order ∂(a)′∂(b)″ ⊗ ∂(b)′∂(c)″ ⊗ ∂(c)′∂(a)″. Kept for comparison.
    pub fn triple_from_total_derivation_printed(&self, a: &Element, b: &Element, c: &Element) -> Tensor3 {
        let mut out = Tensor3::zero(&self.alg);
        let (da, db, dc) = (self.total_uniderivation(a), self.total_uniderivation(b), self.total_uniderivation(c));
        quarter_product(&mut out, &da, &db, &dc);
        out
    }

    /// ⟨[a], [b]⟩ = [μ⟨⟨a, b⟩⟩].
    pub fn lie(&self, a: &Cyclic, b: &Cyclic) -> Cyclic {
        self.bracket(&a.lift(), &b.lift()).mu().abelianize()
    }
}

/// Adds ¼ x′y″ ⊗ y′z″ ⊗ z′x″ summed over the Sweedler terms.
fn quarter_product(out: &mut Tensor3, x: &Tensor2, y: &Tensor2, z: &Tensor2) {
    let quarter = q(1, 4);
    for ((x1, x2), cx) in &x.terms.0 {
        for ((y1, y2), cy) in &y.terms.0 {
            let s1 = x1.mul(y2);
            let cxy = cx * cy;
            for ((z1, z2), cz) in &z.terms.0 {
                out.terms.add_term((s1.clone(), y1.mul(z2), z1.mul(x2)), &cxy * cz * &quarter);
            }
        }
    }
}

fn check(x: &Element, y: &Element) -> Result<(), BracketError> {
    if std::sync::Arc::ptr_eq(&x.alg, &y.alg) {
        Ok(())
    } else {
        Err(BracketError::Mismatch)
    }
}

pub fn double_bracket(x: &Element, y: &Element) -> Result<Tensor2, BracketError> {
    check(x, y)?;
    Ok(BracketEngine::new(&x.alg).bracket(x, y))
}

pub fn generator_bracket(alg: &Alg, g: Letter, h: Letter) -> Tensor2 {
    let e = BracketEngine::new(alg);
    e.normalize(&e.letters(g, h))
}

pub fn uniderivation(p: &str, x: &Element) -> Result<Tensor2, BracketError> {
    let pi = x.alg.surface.puncture_index(p).map_err(|_| BracketError::UnknownPuncture(p.into()))?;
    Ok(BracketEngine::new(&x.alg).uniderivation(pi, x))
}

pub fn triple_bracket(a: &Element, b: &Element, c: &Element) -> Result<Tensor3, BracketError> {
    check(a, b)?;
    check(a, c)?;
    Ok(BracketEngine::new(&a.alg).triple(a, b, c))
}

pub fn triple_from_derivation(a: &Element, b: &Element, c: &Element) -> Result<Tensor3, BracketError> {
    check(a, b)?;
    check(a, c)?;
    Ok(BracketEngine::new(&a.alg).triple_from_derivation(a, b, c))
}

pub fn lie_bracket_cyclic(a: &Cyclic, b: &Cyclic) -> Result<Cyclic, BracketError> {
    if !std::sync::Arc::ptr_eq(&a.alg, &b.alg) {
        return Err(BracketError::Mismatch);
    }
    Ok(BracketEngine::new(&a.alg).lie(a, b))
}

/// Outcome of comparing the two triple brackets.
#[derive(Clone, Debug)]
pub struct QuasiReport {
    pub surface: String,
    pub letter_triples: usize,
    pub word_triples: usize,
    pub failures: Vec<(String, String, String)>,
}

impl QuasiReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for QuasiReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "quasi-Poisson check on {}", self.surface)?;
        writeln!(
            f,
            "triples checked: {} ({} letter, {} word), failures: {}",
            self.letter_triples + self.word_triples,
            self.letter_triples,
            self.word_triples,
            self.failures.len()
        )?;
        writeln!(f, "verdict: {}", if self.passed() { "pass" } else { "fail" })?;
        writeln!(f, "#machine")?;
        for (t, l, r) in &self.failures {
            writeln!(f, "failure\t{t}\t{l}\t{r}")?;
        }
        Ok(())
    }
}

/// Compare both triple brackets on every ordered triple of edge letters,
/// plus `word_samples` random triples of two-letter words.
pub fn quasi_poisson_check(alg: &Alg, word_samples: usize, seed: u64) -> QuasiReport {
    let e = BracketEngine::new(alg);
    let ne = alg.num_edges();
    let gens: Vec<Element> = (0..ne).map(|i| alg.edge(i)).collect();
    let names: Vec<String> = (0..ne).map(|i| alg.gen_name(i as u32).to_string()).collect();
    let mut failures = Vec::new();
    let mut test = |label: String, a: &Element, b: &Element, c: &Element| {
        let l = e.triple(a, b, c);
        let r = e.triple_from_derivation(a, b, c);
        if l != r {
            failures.push((label, l.to_string(), r.to_string()));
        }
    };
    for i in 0..ne {
        for j in 0..ne {
            for k in 0..ne {
                test(format!("{} {} {}", names[i], names[j], names[k]), &gens[i], &gens[j], &gens[k]);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let word = |rng: &mut ChaCha8Rng| {
        let letters: Vec<Letter> =
            (0..2).map(|_| Letter::new(rng.gen_range(0..ne), if rng.gen_bool(0.5) { 1 } else { -1 })).collect();
        alg.reduce(1, &letters)
    };
    for _ in 0..word_samples {
        let (a, b, c) = (word(&mut rng), word(&mut rng), word(&mut rng));
        test(format!("{a} | {b} | {c}"), &a, &b, &c);
    }
    QuasiReport {
        surface: alg.surface.name.clone(),
        letter_triples: ne * ne * ne,
        word_triples: word_samples,
        failures,
    }
}
