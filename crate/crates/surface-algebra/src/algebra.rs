//! Exact arithmetic in the surface algebra: signed words in the edges,
//! normal forms by eliminating one edge per face, tensor powers and the
//! cyclic space.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::surface::{MarkedSurface, SurfaceSymmetry};

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// A generator raised to the power ±1. Generators are edges of the surface,
/// followed by any formal inverse symbols of an extended algebra.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub gen: u32,
    pub exp: i8,
}

impl Letter {
    pub fn new(gen: usize, exp: i8) -> Letter {
        Letter { gen: gen as u32, exp }
    }

    pub fn inv(self) -> Letter {
        Letter { gen: self.gen, exp: -self.exp }
    }
}

/// A freely reduced word. The leftmost letter is applied last.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn one() -> Word {
        Word(Vec::new())
    }

    pub fn letter(l: Letter) -> Word {
        Word(vec![l])
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|l| l.inv()).collect())
    }

    /// Product of two reduced words, cancelling at the junction.
    pub fn mul(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        let mut k = 0;
        while k < other.0.len() && v.last() == Some(&other.0[k].inv()) {
            v.pop();
            k += 1;
        }
        v.extend_from_slice(&other.0[k..]);
        Word(v)
    }

    pub fn mul3(a: &Word, b: &Word, c: &Word) -> Word {
        a.mul(b).mul(c)
    }

    pub fn free_reduce(letters: impl IntoIterator<Item = Letter>) -> Word {
        let mut v: Vec<Letter> = Vec::new();
        for l in letters {
            if v.last() == Some(&l.inv()) {
                v.pop();
            } else {
                v.push(l);
            }
        }
        Word(v)
    }

    /// Cyclically reduced representative at its minimal rotation.
    pub fn cyclic_canonical(&self) -> Word {
        let mut s: &[Letter] = &self.0;
        while s.len() >= 2 && s[0] == s[s.len() - 1].inv() {
            s = &s[1..s.len() - 1];
        }
        (0..s.len().max(1)).map(|r| Word(s[r..].iter().chain(&s[..r]).copied().collect())).min().unwrap_or_default()
    }
}

/// Finite ℚ-linear combination with no zero coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lin<K: Ord>(pub BTreeMap<K, Q>);

impl<K: Ord> Default for Lin<K> {
    fn default() -> Self {
        Lin(BTreeMap::new())
    }
}

impl<K: Ord + Clone> Lin<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(k: K, c: Q) -> Self {
        let mut l = Self::new();
        l.add_term(k, c);
        l
    }

    pub fn add_term(&mut self, k: K, c: Q) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.0.entry(k) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add_scaled(&mut self, other: &Lin<K>, c: &Q) {
        for (k, v) in &other.0 {
            self.add_term(k.clone(), v * c);
        }
    }

    pub fn add_lin(&mut self, other: &Lin<K>) {
        for (k, v) in &other.0 {
            self.add_term(k.clone(), v.clone());
        }
    }

    pub fn scaled(&self, c: &Q) -> Lin<K> {
        let mut out = Lin::new();
        out.add_scaled(self, c);
        out
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn map_keys<K2: Ord + Clone>(&self, mut f: impl FnMut(&K) -> K2) -> Lin<K2> {
        let mut out = Lin::new();
        for (k, v) in &self.0 {
            out.add_term(f(k), v.clone());
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Twist {
    Twisted,
    Untwisted,
}

impl Twist {
    /// The value of δ in the algebra.
    pub fn delta(self) -> i32 {
        match self {
            Twist::Twisted => -1,
            Twist::Untwisted => 1,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("shelling stuck; unprocessed faces: {0:?}")]
    ShellingStuck(Vec<String>),
    #[error("free rank {0} < 2: the center would be larger than Q")]
    RankTooSmall(usize),
    #[error("operands live in different algebras")]
    Mismatch,
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("parse error at `{at}`: {msg}")]
    Parse { at: String, msg: String },
}

/// Which edges survive and how the others are written in them.
#[derive(Clone, Debug)]
pub struct ReductionSystem {
    pub survivors: Vec<usize>,
    /// For each eliminated edge, its sign and word in survivors.
    pub definitions: Vec<Option<(i32, Word)>>,
    /// (face, eliminated edge) in elimination order.
    pub order: Vec<(usize, usize)>,
}

impl ReductionSystem {
    pub fn build(s: &MarkedSurface, twist: Twist) -> Result<ReductionSystem, AlgebraError> {
        let ne = s.edges.len();
        let mut processed = vec![false; s.faces.len()];
        let mut order = Vec::new();
        let mut raw: Vec<Option<(i32, Vec<Letter>)>> = vec![None; ne];
        let occurrences = |e: usize, f: usize| s.faces[f].word.iter().filter(|x| x.edge == e).count();
        while processed.iter().any(|p| !p) {
            let mut pick = None;
            'faces: for fi in (0..s.faces.len()).filter(|&f| !processed[f]) {
                for se in &s.faces[fi].word {
                    let e = se.edge;
                    let elsewhere = (0..s.faces.len()).any(|g| g != fi && !processed[g] && occurrences(e, g) > 0);
                    if occurrences(e, fi) == 1 && !elsewhere {
                        pick = Some((fi, e));
                        break 'faces;
                    }
                }
            }
            let Some((fi, e)) = pick else {
                let stuck = (0..s.faces.len()).filter(|&f| !processed[f]).map(|f| s.faces[f].id.clone()).collect();
                return Err(AlgebraError::ShellingStuck(stuck));
            };
            // Written word L e^ε R equals δ^(1+#reversed) as a product of plain letters.
            let word = &s.faces[fi].word;
            let reversed = word.iter().filter(|x| !x.forward).count() as u32;
            let sign = twist.delta().pow(1 + reversed);
            let k = word.iter().position(|x| x.edge == e).unwrap();
            let as_letter = |x: &crate::surface::SignedEdge| Letter::new(x.edge, if x.forward { 1 } else { -1 });
            let left: Vec<Letter> = word[..k].iter().map(as_letter).collect();
            let right: Vec<Letter> = word[k + 1..].iter().map(as_letter).collect();
            // e^ε = sign · L⁻¹ R⁻¹
            let mut rhs: Vec<Letter> = left.iter().rev().map(|l| l.inv()).collect();
            rhs.extend(right.iter().rev().map(|l| l.inv()));
            if !word[k].forward {
                rhs = rhs.iter().rev().map(|l| l.inv()).collect();
            }
            raw[e] = Some((sign, rhs));
            processed[fi] = true;
            order.push((fi, e));
        }
        let survivors: Vec<usize> = (0..ne).filter(|&e| raw[e].is_none()).collect();
        if survivors.len() < 2 {
            return Err(AlgebraError::RankTooSmall(survivors.len()));
        }
        // Later eliminations never mention earlier ones, so expand backwards.
        let mut definitions: Vec<Option<(i32, Word)>> = vec![None; ne];
        for &(_, e) in order.iter().rev() {
            let (mut sign, letters) = raw[e].clone().unwrap();
            let mut out = Vec::new();
            for l in letters {
                match &definitions[l.gen as usize] {
                    None => out.push(l),
                    Some((s2, w)) => {
                        sign *= s2;
                        if l.exp > 0 {
                            out.extend_from_slice(&w.0);
                        } else {
                            out.extend(w.inverse().0);
                        }
                    }
                }
            }
            definitions[e] = Some((sign, Word::free_reduce(out)));
        }
        Ok(ReductionSystem { survivors, definitions, order })
    }

    pub fn rank(&self) -> usize {
        self.survivors.len()
    }
}

/// A formal inverse Y of an element B, with Y⁻¹ rewritten to B.
#[derive(Clone, Debug)]
pub struct FormalInverse {
    pub name: String,
    pub base: Element,
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

pub struct SurfaceAlgebra {
    id: u64,
    pub surface: Arc<MarkedSurface>,
    pub twist: Twist,
    pub reduction: ReductionSystem,
    /// Formal inverse symbols; letter `edges.len() + i` is symbol `i`.
    pub formal: Vec<FormalInverse>,
    pub parent: Option<Alg>,
}

pub type Alg = Arc<SurfaceAlgebra>;

impl fmt::Debug for SurfaceAlgebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SurfaceAlgebra({} #{}, {:?}, {} formal)", self.surface.name, self.id, self.twist, self.formal.len())
    }
}

impl SurfaceAlgebra {
    pub fn new(surface: MarkedSurface, twist: Twist) -> Result<Alg, AlgebraError> {
        Self::from_arc(Arc::new(surface), twist)
    }

    pub fn from_arc(surface: Arc<MarkedSurface>, twist: Twist) -> Result<Alg, AlgebraError> {
        let reduction = ReductionSystem::build(&surface, twist)?;
        Ok(Arc::new(SurfaceAlgebra {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            surface,
            twist,
            reduction,
            formal: Vec::new(),
            parent: None,
        }))
    }

    /// Extend `base` by formal inverses of the given elements of `base`.
    pub fn with_formal_inverses(base: &Alg, symbols: Vec<(String, Element)>) -> Alg {
        let formal = symbols
            .into_iter()
            .map(|(name, b)| {
                assert!(Arc::ptr_eq(&b.alg, base), "formal inverse over a foreign algebra");
                FormalInverse { name, base: b }
            })
            .collect();
        Arc::new(SurfaceAlgebra {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            surface: base.surface.clone(),
            twist: base.twist,
            reduction: base.reduction.clone(),
            formal,
            parent: Some(base.clone()),
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn num_edges(&self) -> usize {
        self.surface.edges.len()
    }

    pub fn num_gens(&self) -> usize {
        self.num_edges() + self.formal.len()
    }

    pub fn formal_index(&self, gen: u32) -> Option<usize> {
        (gen as usize).checked_sub(self.num_edges()).filter(|&i| i < self.formal.len())
    }

    pub fn gen_name(&self, gen: u32) -> &str {
        match self.formal_index(gen) {
            Some(i) => &self.formal[i].name,
            None => &self.surface.edges[gen as usize].id,
        }
    }

    pub fn gen_index(&self, name: &str) -> Result<usize, AlgebraError> {
        if let Some(i) = self.surface.edges.iter().position(|e| e.id == name) {
            return Ok(i);
        }
        self.formal
            .iter()
            .position(|f| f.name == name)
            .map(|i| i + self.num_edges())
            .ok_or_else(|| AlgebraError::UnknownGenerator(name.into()))
    }

    pub fn delta(&self) -> i32 {
        self.twist.delta()
    }

    /// Normal form of sign · letters.
    pub fn reduce_lin(&self, sign: i32, letters: &[Letter]) -> Lin<Word> {
        let mut sign = sign;
        let mut out: Vec<Letter> = Vec::with_capacity(letters.len());
        let push = |v: &mut Vec<Letter>, l: Letter| {
            if v.last() == Some(&l.inv()) {
                v.pop();
            } else {
                v.push(l);
            }
        };
        for &l in letters {
            match self.reduction.definitions.get(l.gen as usize).and_then(|d| d.as_ref()) {
                Some((s, w)) => {
                    sign *= s;
                    if l.exp > 0 {
                        for &x in &w.0 {
                            push(&mut out, x);
                        }
                    } else {
                        for x in w.inverse().0 {
                            push(&mut out, x);
                        }
                    }
                }
                None => push(&mut out, l),
            }
        }
        let coeff = Q::from_integer(BigInt::from(sign));
        if self.formal.is_empty() || !out.iter().any(|l| l.exp < 0 && self.formal_index(l.gen).is_some()) {
            return Lin::single(Word(out), coeff);
        }
        // Expand Y⁻¹ = B.
        let mut acc: Lin<Word> = Lin::single(Word::one(), coeff);
        for l in out {
            let factor: Lin<Word> = match self.formal_index(l.gen) {
                Some(i) if l.exp < 0 => self.formal[i].base.terms.clone(),
                _ => Lin::single(Word::letter(l), Q::one()),
            };
            acc = lin_mul(&acc, &factor);
        }
        acc
    }

    pub fn reduce(self: &Alg, sign: i32, letters: &[Letter]) -> Element {
        Element { alg: self.clone(), terms: self.reduce_lin(sign, letters) }
    }

    /// Normal form of an arbitrary linear combination of raw words.
    pub fn reduce_all(self: &Alg, raw: &Lin<Word>) -> Element {
        let mut terms = Lin::new();
        for (w, c) in &raw.0 {
            terms.add_scaled(&self.reduce_lin(1, &w.0), c);
        }
        Element { alg: self.clone(), terms }
    }

    pub fn zero(self: &Alg) -> Element {
        Element { alg: self.clone(), terms: Lin::new() }
    }

    pub fn one(self: &Alg) -> Element {
        self.scalar(Q::one())
    }

    pub fn scalar(self: &Alg, c: Q) -> Element {
        Element { alg: self.clone(), terms: Lin::single(Word::one(), c) }
    }

    /// A generator by name, in normal form.
    pub fn gen(self: &Alg, name: &str) -> Result<Element, AlgebraError> {
        let g = self.gen_index(name)?;
        Ok(self.reduce(1, &[Letter::new(g, 1)]))
    }

    pub fn edge(self: &Alg, e: usize) -> Element {
        self.reduce(1, &[Letter::new(e, 1)])
    }

    /// The unreduced face word as raw letters with its δ-sign.
    /// Per puncture: tails minus heads over the edge letters of `w`,
    /// counted with exponent. Face words have zero balance, so this is
    /// well defined on the algebra. Formal letters are skipped.
    pub fn endpoint_balance(&self, w: &Word) -> Vec<i32> {
        let mut v = vec![0; self.surface.punctures.len()];
        for l in w.0.iter().filter(|l| (l.gen as usize) < self.num_edges()) {
            let e = &self.surface.edges[l.gen as usize];
            v[e.tail] += l.exp as i32;
            v[e.head] -= l.exp as i32;
        }
        v
    }

    pub fn face_word_raw(&self, face: usize) -> (i32, Vec<Letter>) {
        let mut sign = 1;
        let letters = self.surface.faces[face]
            .word
            .iter()
            .map(|s| {
                if s.forward {
                    Letter::new(s.edge, 1)
                } else {
                    sign *= self.delta();
                    Letter::new(s.edge, -1)
                }
            })
            .collect();
        (sign, letters)
    }

    pub fn format_word(&self, w: &Word) -> String {
        if w.is_one() {
            return "1".into();
        }
        w.0.iter().map(|l| format!("{}^{}", self.gen_name(l.gen), l.exp)).collect::<Vec<_>>().join(" ")
    }

    pub fn parse_element(self: &Alg, text: &str) -> Result<Element, AlgebraError> {
        let lin = parse_terms(self, text, 1)?;
        let mut terms = Lin::new();
        for (ws, c) in lin {
            terms.add_scaled(&self.reduce_lin(1, &ws[0].0), &c);
        }
        Ok(Element { alg: self.clone(), terms })
    }

    pub fn parse_tensor2(self: &Alg, text: &str) -> Result<Tensor2, AlgebraError> {
        let lin = parse_terms(self, text, 2)?;
        let mut out = Tensor2::zero(self);
        for (ws, c) in lin {
            let a = self.reduce_lin(1, &ws[0].0);
            let b = self.reduce_lin(1, &ws[1].0);
            for (wa, ca) in &a.0 {
                for (wb, cb) in &b.0 {
                    out.terms.add_term((wa.clone(), wb.clone()), &c * ca * cb);
                }
            }
        }
        Ok(out)
    }
}

pub fn lin_mul(a: &Lin<Word>, b: &Lin<Word>) -> Lin<Word> {
    let mut out = Lin::new();
    for (wa, ca) in &a.0 {
        for (wb, cb) in &b.0 {
            out.add_term(wa.mul(wb), ca * cb);
        }
    }
    out
}

fn same(a: &Alg, b: &Alg) -> Result<(), AlgebraError> {
    if Arc::ptr_eq(a, b) {
        Ok(())
    } else {
        Err(AlgebraError::Mismatch)
    }
}

fn format_coeff(c: &Q) -> String {
    format!("{}/{}", c.numer(), c.denom())
}

/// An element of the surface algebra in normal form.
#[derive(Clone, Debug)]
pub struct Element {
    pub alg: Alg,
    pub terms: Lin<Word>,
}

impl PartialEq for Element {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.alg, &other.alg) && self.terms == other.terms
    }
}

impl Element {
    pub fn from_word(alg: &Alg, w: Word, c: Q) -> Element {
        Element { alg: alg.clone(), terms: Lin::single(w, c) }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_zero()
    }

    pub fn try_add(&self, o: &Element) -> Result<Element, AlgebraError> {
        same(&self.alg, &o.alg)?;
        let mut t = self.terms.clone();
        t.add_lin(&o.terms);
        Ok(Element { alg: self.alg.clone(), terms: t })
    }

    pub fn try_mul(&self, o: &Element) -> Result<Element, AlgebraError> {
        same(&self.alg, &o.alg)?;
        Ok(Element { alg: self.alg.clone(), terms: lin_mul(&self.terms, &o.terms) })
    }

    pub fn scale(&self, c: &Q) -> Element {
        Element { alg: self.alg.clone(), terms: self.terms.scaled(c) }
    }

    pub fn try_equals(&self, o: &Element) -> Result<bool, AlgebraError> {
        same(&self.alg, &o.alg)?;
        Ok(self.terms == o.terms)
    }

    /// The group-inverse of a single signed word.
    pub fn inverse_monomial(&self) -> Option<Element> {
        if self.terms.len() != 1 {
            return None;
        }
        let (w, c) = self.terms.0.iter().next().unwrap();
        if !(c.abs().is_one()) {
            return None;
        }
        Some(Element::from_word(&self.alg, w.inverse(), c.clone()))
    }

    pub fn abelianize(&self) -> Cyclic {
        Cyclic { alg: self.alg.clone(), terms: self.terms.map_keys(|w| w.cyclic_canonical()) }
    }

    /// Largest word length among the terms.
    pub fn degree(&self) -> usize {
        self.terms.0.keys().map(Word::len).max().unwrap_or(0)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut items: Vec<(String, &Q)> = self.terms.0.iter().map(|(w, c)| (self.alg.format_word(w), c)).collect();
        items.sort();
        write_sum(f, items.into_iter().map(|(w, c)| format!("{} * {}", format_coeff(c), w)))
    }
}

fn write_sum(f: &mut fmt::Formatter<'_>, items: impl Iterator<Item = String>) -> fmt::Result {
    let items: Vec<String> = items.collect();
    if items.is_empty() {
        f.write_str("0")
    } else {
        f.write_str(&items.join(" + "))
    }
}

macro_rules! element_ops {
    ($t:ident) => {
        impl std::ops::Add for &$t {
            type Output = $t;
            fn add(self, o: &$t) -> $t {
                assert!(Arc::ptr_eq(&self.alg, &o.alg), "algebra mismatch");
                let mut terms = self.terms.clone();
                terms.add_lin(&o.terms);
                $t { alg: self.alg.clone(), terms }
            }
        }
        impl std::ops::Sub for &$t {
            type Output = $t;
            fn sub(self, o: &$t) -> $t {
                self + &(-o)
            }
        }
        impl std::ops::Neg for &$t {
            type Output = $t;
            fn neg(self) -> $t {
                $t { alg: self.alg.clone(), terms: self.terms.scaled(&-Q::one()) }
            }
        }
    };
}

element_ops!(Element);
element_ops!(Tensor2);
element_ops!(Tensor3);

impl std::ops::Mul for &Element {
    type Output = Element;
    fn mul(self, o: &Element) -> Element {
        self.try_mul(o).expect("algebra mismatch")
    }
}

/// Element of A ⊗ A.
#[derive(Clone, Debug)]
pub struct Tensor2 {
    pub alg: Alg,
    pub terms: Lin<(Word, Word)>,
}

impl PartialEq for Tensor2 {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.alg, &other.alg) && self.terms == other.terms
    }
}

impl Tensor2 {
    pub fn zero(alg: &Alg) -> Tensor2 {
        Tensor2 { alg: alg.clone(), terms: Lin::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_zero()
    }

    pub fn from_elements(a: &Element, b: &Element) -> Tensor2 {
        let mut t = Tensor2::zero(&a.alg);
        for (wa, ca) in &a.terms.0 {
            for (wb, cb) in &b.terms.0 {
                t.terms.add_term((wa.clone(), wb.clone()), ca * cb);
            }
        }
        t
    }

    pub fn scale(&self, c: &Q) -> Tensor2 {
        Tensor2 { alg: self.alg.clone(), terms: self.terms.scaled(c) }
    }

    /// τ₂(x ⊗ y) = y ⊗ x.
    pub fn tau(&self) -> Tensor2 {
        Tensor2 { alg: self.alg.clone(), terms: self.terms.map_keys(|(a, b)| (b.clone(), a.clone())) }
    }

    /// μ(x ⊗ y) = xy.
    pub fn mu(&self) -> Element {
        Element { alg: self.alg.clone(), terms: self.terms.map_keys(|(a, b)| a.mul(b)) }
    }

    /// Outer bimodule action: (l ⊗ 1) · t · (1 ⊗ r).
    pub fn outer(&self, l: &Element, r: &Element) -> Tensor2 {
        let mut out = Tensor2::zero(&self.alg);
        for ((a, b), c) in &self.terms.0 {
            for (wl, cl) in &l.terms.0 {
                for (wr, cr) in &r.terms.0 {
                    out.terms.add_term((wl.mul(a), b.mul(wr)), c * cl * cr);
                }
            }
        }
        out
    }

    /// Inner bimodule action: l * (a ⊗ b) * r = a r ⊗ l b.
    pub fn inner(&self, l: &Element, r: &Element) -> Tensor2 {
        let mut out = Tensor2::zero(&self.alg);
        for ((a, b), c) in &self.terms.0 {
            for (wl, cl) in &l.terms.0 {
                for (wr, cr) in &r.terms.0 {
                    out.terms.add_term((a.mul(wr), wl.mul(b)), c * cl * cr);
                }
            }
        }
        out
    }

    pub fn try_equals(&self, o: &Tensor2) -> Result<bool, AlgebraError> {
        same(&self.alg, &o.alg)?;
        Ok(self.terms == o.terms)
    }

    pub fn components(&self) -> impl Iterator<Item = (&Word, &Word, &Q)> {
        self.terms.0.iter().map(|((a, b), c)| (a, b, c))
    }
}

impl fmt::Display for Tensor2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut items: Vec<((String, String), &Q)> =
            self.terms.0.iter().map(|((a, b), c)| ((self.alg.format_word(a), self.alg.format_word(b)), c)).collect();
        items.sort();
        write_sum(f, items.into_iter().map(|((a, b), c)| format!("{} * ({}) (x) ({})", format_coeff(c), a, b)))
    }
}

/// Element of A ⊗ A ⊗ A.
#[derive(Clone, Debug)]
pub struct Tensor3 {
    pub alg: Alg,
    pub terms: Lin<(Word, Word, Word)>,
}

impl PartialEq for Tensor3 {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.alg, &other.alg) && self.terms == other.terms
    }
}

impl Tensor3 {
    pub fn zero(alg: &Alg) -> Tensor3 {
        Tensor3 { alg: alg.clone(), terms: Lin::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_zero()
    }

    pub fn from_elements(a: &Element, b: &Element, c: &Element) -> Tensor3 {
        let mut t = Tensor3::zero(&a.alg);
        for (wa, ca) in &a.terms.0 {
            for (wb, cb) in &b.terms.0 {
                for (wc, cc) in &c.terms.0 {
                    t.terms.add_term((wa.clone(), wb.clone(), wc.clone()), ca * cb * cc);
                }
            }
        }
        t
    }

    pub fn scale(&self, c: &Q) -> Tensor3 {
        Tensor3 { alg: self.alg.clone(), terms: self.terms.scaled(c) }
    }

    /// τ₃(x₁ ⊗ x₂ ⊗ x₃) = x₂ ⊗ x₃ ⊗ x₁.
    pub fn tau(&self) -> Tensor3 {
        Tensor3 { alg: self.alg.clone(), terms: self.terms.map_keys(|(a, b, c)| (b.clone(), c.clone(), a.clone())) }
    }

    pub fn try_equals(&self, o: &Tensor3) -> Result<bool, AlgebraError> {
        same(&self.alg, &o.alg)?;
        Ok(self.terms == o.terms)
    }
}

impl fmt::Display for Tensor3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fw = |w: &Word| self.alg.format_word(w);
        let mut items: Vec<((String, String, String), &Q)> =
            self.terms.0.iter().map(|((a, b, c), k)| ((fw(a), fw(b), fw(c)), k)).collect();
        items.sort();
        write_sum(
            f,
            items.into_iter().map(|((a, b, c), k)| format!("{} * ({}) (x) ({}) (x) ({})", format_coeff(k), a, b, c)),
        )
    }
}

/// Linear combination of cyclic classes, keyed by canonical words.
#[derive(Clone, Debug)]
pub struct Cyclic {
    pub alg: Alg,
    pub terms: Lin<Word>,
}

impl PartialEq for Cyclic {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.alg, &other.alg) && self.terms == other.terms
    }
}

element_ops!(Cyclic);

impl Cyclic {
    pub fn is_zero(&self) -> bool {
        self.terms.is_zero()
    }

    /// The representative element (canonical words read as elements).
    pub fn lift(&self) -> Element {
        Element { alg: self.alg.clone(), terms: self.terms.clone() }
    }
}

impl fmt::Display for Cyclic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut items: Vec<(String, &Q)> = self.terms.0.iter().map(|(w, c)| (self.alg.format_word(w), c)).collect();
        items.sort();
        write_sum(f, items.into_iter().map(|(w, c)| format!("{} * [{}]", format_coeff(c), w)))
    }
}

/// A random element: up to `max_terms` words of up to `max_len` edge
/// letters, with small nonzero integer coefficients, in normal form.
pub fn random_element(alg: &Alg, rng: &mut impl rand::Rng, max_len: usize, max_terms: usize) -> Element {
    let mut raw = Lin::new();
    for _ in 0..rng.gen_range(1..=max_terms) {
        let letters: Vec<Letter> = (0..rng.gen_range(0..=max_len))
            .map(|_| Letter::new(rng.gen_range(0..alg.num_edges()), if rng.gen_bool(0.5) { 1 } else { -1 }))
            .collect();
        let c = [-3, -2, -1, 1, 2, 3][rng.gen_range(0..6)];
        raw.add_scaled(&alg.reduce_lin(1, &letters), &Q::from_integer(c.into()));
    }
    Element { alg: alg.clone(), terms: raw }
}

/// A random combination of closed walks. Each word is a loop of composable
/// arcs (rightmost letter first) that returns to the puncture it left, so
/// its cyclic class is a genuine free loop on the surface.
pub fn random_loop_element(alg: &Alg, rng: &mut impl rand::Rng, max_len: usize, max_terms: usize) -> Element {
    let s = &alg.surface;
    let ends = |l: Letter| {
        let e = &s.edges[l.gen as usize];
        if l.exp > 0 {
            (e.tail, e.head)
        } else {
            (e.head, e.tail)
        }
    };
    let letters: Vec<Letter> = (0..alg.num_edges()).flat_map(|g| [Letter::new(g, 1), Letter::new(g, -1)]).collect();
    let mut raw = Lin::new();
    for _ in 0..rng.gen_range(1..=max_terms) {
        let walk = loop {
            let start = rng.gen_range(0..s.punctures.len());
            let mut at = start;
            let mut w = Vec::new();
            for _ in 0..rng.gen_range(1..=max_len.max(1)) {
                let next: Vec<Letter> = letters.iter().copied().filter(|&l| ends(l).0 == at).collect();
                let l = next[rng.gen_range(0..next.len())];
                w.insert(0, l);
                at = ends(l).1;
            }
            if at == start {
                break w;
            }
        };
        let c = [-3, -2, -1, 1, 2, 3][rng.gen_range(0..6)];
        raw.add_scaled(&alg.reduce_lin(1, &walk), &Q::from_integer(c.into()));
    }
    Element { alg: alg.clone(), terms: raw }
}

/// Relabel every generator by a surface symmetry, then normal-form in the
/// target algebra.
pub fn apply_symmetry(f: &SurfaceSymmetry, target: &Alg, x: &Element) -> Result<Element, AlgebraError> {
    if *x.alg.surface != *f.source || *target.surface != *f.target || !x.alg.formal.is_empty() {
        return Err(AlgebraError::Mismatch);
    }
    let delta = target.delta();
    let mut terms = Lin::new();
    for (w, c) in &x.terms.0 {
        let mut sign = 1;
        let letters: Vec<Letter> =
            w.0.iter()
                .map(|l| {
                    let img = f.edges[l.gen as usize];
                    if img.forward {
                        Letter::new(img.edge, l.exp)
                    } else {
                        sign *= delta;
                        Letter::new(img.edge, -l.exp)
                    }
                })
                .collect();
        terms.add_scaled(&target.reduce_lin(sign, &letters), c);
    }
    Ok(Element { alg: target.clone(), terms })
}

// ---------------------------------------------------------------------------
// Literal grammar shared by the CLI and golden tests.
//
//   sum     := '0' | ['-'] term (('+' | '-') term)*
//   term    := [coeff ['*']] body
//   body    := product | '(' product ')' ('(x)' '(' product ')')*
//   product := '1' | factor+
//   factor  := ident ['^' ['-'] int]

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigInt),
    Ident(String),
    Slash,
    Star,
    Plus,
    Minus,
    Caret,
    LParen,
    RParen,
    Otimes,
}

fn tokenize(text: &str) -> Result<Vec<Tok>, AlgebraError> {
    let cs: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    let err = |i: usize, msg: &str| AlgebraError::Parse { at: cs[i..].iter().collect(), msg: msg.into() };
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let s = i;
            while i < cs.len() && cs[i].is_ascii_digit() {
                i += 1;
            }
            let n: String = cs[s..i].iter().collect();
            out.push(Tok::Num(n.parse().unwrap()));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let s = i;
            while i < cs.len() && (cs[i].is_ascii_alphanumeric() || matches!(cs[i], '_' | '.' | '\'')) {
                i += 1;
            }
            out.push(Tok::Ident(cs[s..i].iter().collect()));
        } else if cs[i..].starts_with(&['(', 'x', ')']) {
            out.push(Tok::Otimes);
            i += 3;
        } else {
            out.push(match c {
                '/' => Tok::Slash,
                '*' => Tok::Star,
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '^' => Tok::Caret,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => return Err(err(i, "unexpected character")),
            });
            i += 1;
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    alg: &'a SurfaceAlgebra,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn err<T>(&self, msg: &str) -> Result<T, AlgebraError> {
        let at =
            self.toks[self.pos.min(self.toks.len())..].iter().map(|t| format!("{t:?}")).collect::<Vec<_>>().join(" ");
        Err(AlgebraError::Parse { at, msg: msg.into() })
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn int(&mut self) -> Result<BigInt, AlgebraError> {
        match self.peek() {
            Some(Tok::Num(n)) => {
                let n = n.clone();
                self.pos += 1;
                Ok(n)
            }
            _ => self.err("expected an integer"),
        }
    }

    fn product(&mut self) -> Result<Word, AlgebraError> {
        if let Some(Tok::Num(n)) = self.peek() {
            if n.is_one() {
                self.pos += 1;
                return Ok(Word::one());
            }
        }
        let mut letters = Vec::new();
        while let Some(Tok::Ident(name)) = self.peek() {
            let name = name.clone();
            let g = self.alg.gen_index(&name)?;
            self.pos += 1;
            let mut exp = BigInt::one();
            if self.eat(&Tok::Caret) {
                let neg = self.eat(&Tok::Minus);
                exp = self.int()?;
                if neg {
                    exp = -exp;
                }
            }
            let k: i64 = exp
                .try_into()
                .map_err(|_| AlgebraError::Parse { at: name.clone(), msg: "exponent too large".into() })?;
            let l = Letter::new(g, if k < 0 { -1 } else { 1 });
            for _ in 0..k.unsigned_abs() {
                letters.push(l);
            }
        }
        if letters.is_empty() {
            return self.err("expected a word");
        }
        // Raw letters: do not free-reduce here, eliminated edges must still
        // pass through the reduction system.
        Ok(Word(letters))
    }

    fn term(&mut self, slots: usize) -> Result<(Vec<Word>, Q), AlgebraError> {
        let mut coeff = Q::one();
        if let Some(Tok::Num(_)) = self.peek() {
            let save = self.pos;
            let n = self.int()?;
            let d = if self.eat(&Tok::Slash) { self.int()? } else { BigInt::one() };
            if d.is_zero() {
                return self.err("zero denominator");
            }
            coeff = Q::new(n, d);
            let starred = self.eat(&Tok::Star);
            let more = matches!(self.peek(), Some(Tok::Ident(_)) | Some(Tok::LParen) | Some(Tok::Num(_)));
            if !starred && !more {
                if slots == 1 {
                    return Ok((vec![Word::one()], coeff));
                }
                self.pos = save;
                return self.err("tensor term needs slots");
            }
        }
        if slots == 1 && !matches!(self.peek(), Some(Tok::LParen)) {
            return Ok((vec![self.product()?], coeff));
        }
        let mut words = Vec::new();
        for k in 0..slots {
            if k > 0 && !self.eat(&Tok::Otimes) {
                return self.err("expected (x)");
            }
            if !self.eat(&Tok::LParen) {
                return self.err("expected (");
            }
            words.push(self.product()?);
            if !self.eat(&Tok::RParen) {
                return self.err("expected )");
            }
        }
        Ok((words, coeff))
    }

    fn sum(&mut self, slots: usize) -> Result<Vec<(Vec<Word>, Q)>, AlgebraError> {
        let mut out = Vec::new();
        if self.toks.len() == 1 && self.toks[0] == Tok::Num(BigInt::zero()) {
            return Ok(out);
        }
        let mut neg = self.eat(&Tok::Minus);
        loop {
            let (w, c) = self.term(slots)?;
            out.push((w, if neg { -c } else { c }));
            if self.eat(&Tok::Plus) {
                neg = self.eat(&Tok::Minus);
            } else if self.eat(&Tok::Minus) {
                neg = true;
            } else {
                break;
            }
        }
        if self.pos != self.toks.len() {
            return self.err("trailing input");
        }
        Ok(out)
    }
}

fn parse_terms(alg: &SurfaceAlgebra, text: &str, slots: usize) -> Result<Vec<(Vec<Word>, Q)>, AlgebraError> {
    let toks = tokenize(text)?;
    if toks.is_empty() {
        return Err(AlgebraError::Parse { at: String::new(), msg: "empty input".into() });
    }
    Parser { toks, pos: 0, alg }.sum(slots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::fixtures;

    fn disk3(t: Twist) -> Alg {
        SurfaceAlgebra::new(fixtures::disk3(), t).unwrap()
    }

    #[test]
    fn disk3_eliminates_a3() {
        let a = disk3(Twist::Twisted);
        let a3 = a.gen_index("a3").unwrap();
        assert_eq!(a.reduction.rank(), 2);
        assert_eq!(a.gen("a3").unwrap().to_string(), "-1/1 * a1^-1 a2^-1");
        assert!(a.reduction.definitions[a3].is_some());
        let u = disk3(Twist::Untwisted);
        assert_eq!(u.gen("a3").unwrap().to_string(), "1/1 * a1^-1 a2^-1");
    }

    #[test]
    fn face_words_reduce_to_delta() {
        for s in fixtures::all() {
            for twist in [Twist::Twisted, Twist::Untwisted] {
                let a = SurfaceAlgebra::new(s.clone(), twist).unwrap();
                assert_eq!(a.reduction.rank(), s.edges.len() - s.faces.len());
                for f in 0..s.faces.len() {
                    let (sign, letters) = a.face_word_raw(f);
                    assert_eq!(a.reduce(sign, &letters), a.scalar(Q::from_integer(a.delta().into())), "{}", s.name);
                }
            }
        }
    }

    #[test]
    fn disk_rank_is_punctures_minus_one() {
        for s in [fixtures::disk3(), fixtures::disk4(), fixtures::disk5()] {
            let n = s.punctures.len();
            let a = SurfaceAlgebra::new(s, Twist::Twisted).unwrap();
            assert_eq!(a.reduction.rank(), n - 1);
        }
    }

    #[test]
    fn reversal_carries_delta() {
        let a = disk3(Twist::Twisted);
        let x = a.reduce(a.delta(), &[Letter::new(0, -1)]);
        assert_eq!(x.to_string(), "-1/1 * a1^-1");
    }

    #[test]
    fn free_reduction_and_products() {
        let a = disk3(Twist::Twisted);
        let x = a.parse_element("a1 a1^-1").unwrap();
        assert_eq!(x, a.one());
        let lhs = &a.parse_element("a2 a1").unwrap() * &a.parse_element("a1^-1").unwrap();
        assert_eq!(lhs, a.gen("a2").unwrap());
        assert_eq!(a.parse_element("a3 a2 a1").unwrap(), a.scalar(q(-1, 1)));
    }

    #[test]
    fn serialization_round_trips() {
        let a = disk3(Twist::Twisted);
        let x = a.parse_element("1/2 * a1 a2^-1 - 3 a2 + 1").unwrap();
        let s = x.to_string();
        assert_eq!(s, "1/1 * 1 + 1/2 * a1^1 a2^-1 + -3/1 * a2^1");
        assert_eq!(a.parse_element(&s).unwrap(), x);
        let t = a.parse_tensor2("-1/2 * (a2 a1) (x) (1) + 1/4 * (1) (x) (a1^-1)").unwrap();
        assert_eq!(a.parse_tensor2(&t.to_string()).unwrap(), t);
        assert_eq!(a.parse_element("0").unwrap(), a.zero());
        assert!(a.parse_element("a9").is_err());
    }

    #[test]
    fn tau_and_mu() {
        let a = disk3(Twist::Twisted);
        let t = a.parse_tensor2("(a1) (x) (a2)").unwrap();
        assert_eq!(t.tau(), a.parse_tensor2("(a2) (x) (a1)").unwrap());
        assert_eq!(t.tau().tau(), t);
        assert_eq!(t.mu(), a.parse_element("a1 a2").unwrap());
        let g = a.gen("a1").unwrap();
        let inv = g.inverse_monomial().unwrap();
        assert_eq!(Tensor2::from_elements(&g, &inv).mu(), a.one());
        let t3 = Tensor3::from_elements(&g, &a.one(), &inv);
        assert_eq!(t3.tau().tau().tau(), t3);
        assert_ne!(t3.tau(), t3);
    }

    #[test]
    fn abelianization() {
        let a = disk3(Twist::Twisted);
        let ab = a.parse_element("a1 a2").unwrap();
        let ba = a.parse_element("a2 a1").unwrap();
        assert_eq!(ab.abelianize(), ba.abelianize());
        let conj = a.parse_element("a2 a1 a1 a2^-1").unwrap();
        assert_eq!(conj.abelianize(), a.parse_element("a1 a1").unwrap().abelianize());
        assert_eq!(a.one().abelianize().to_string(), "1/1 * [1]");
    }

    #[test]
    fn mismatch_is_an_error() {
        let a = disk3(Twist::Twisted);
        let b = disk3(Twist::Twisted);
        assert_eq!(a.one().try_mul(&b.one()), Err(AlgebraError::Mismatch));
    }

    #[test]
    fn stuck_shelling_is_reported() {
        // Two faces sharing all three edges: every edge is in both faces.
        let txt = "surface s\npuncture a b c\nedge x a b\nedge y b c\nedge z c a\nface F +z +y +x\nface G -x -y -z\nfan a: z.h x.t\nfan b: x.h y.t\nfan c: y.h z.t\n";
        let s = MarkedSurface::parse(txt).unwrap();
        assert!(matches!(SurfaceAlgebra::new(s, Twist::Twisted), Err(AlgebraError::ShellingStuck(_))));
    }

    #[test]
    fn symmetry_relabels() {
        let s = Arc::new(fixtures::disk3());
        let a = SurfaceAlgebra::from_arc(s.clone(), Twist::Twisted).unwrap();
        let rot = SurfaceSymmetry::search(s.clone(), s.clone(), vec![1, 2, 0]).unwrap();
        let a1 = a.gen("a1").unwrap();
        assert_eq!(apply_symmetry(&rot, &a, &a1).unwrap(), a.gen("a2").unwrap());
        let w = a.parse_element("a2 a1").unwrap();
        assert_eq!(apply_symmetry(&rot, &a, &w).unwrap(), a.parse_element("a3 a2").unwrap());
        let id = SurfaceSymmetry::identity(s);
        assert_eq!(apply_symmetry(&id, &a, &w).unwrap(), w);
    }
}
