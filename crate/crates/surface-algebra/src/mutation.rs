//! Flips of the base triangulation as maps between cover algebras.
//!
//! Flipping the diagonal 1–3 of a quadrilateral to 2–4 replaces the double
//! cover Σ by a cover Σ′ with the same boundary lifts. The pushforward F₊
//! sends each arc of Σ′ to an element of 𝒜(Σ): arcs away from the flipped
//! region go to themselves, and the new diagonal lifts go to sums of the two
//! paths that run around the branch points,
//!
//! ```text
//! F₊(a24) = a23 a13⁻¹ a14 + a21 a31⁻¹ a34
//! ```
//!
//! Here a_ij is the arc from the first-sheet lift of corner j to the
//! second-sheet lift of corner i. The image of a42 comes from the deck
//! involution. Inverses of these binomials are adjoined as formal symbols,
//! so the target is 𝒜(Σ) extended by Y₂₄ = F₊(a24)⁻¹ and Y₄₂ = F₊(a42)⁻¹.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use num_traits::One;

use crate::algebra::{Alg, AlgebraError, Element, Letter, Lin, SurfaceAlgebra, Tensor2, Twist, Word, Q};
use crate::bracket::{BracketEngine, Raw2};
use crate::covering::{build_covering, deck_involution, CoveringData, CoveringError, EdgeOrigin};
use crate::repcheck::{identity_oracle, OracleVerdict, RepError, Sides};
use crate::surface::{MarkedSurface, Quadrilateral, SurfaceError};

#[derive(Debug, thiserror::Error)]
pub enum MutationError {
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Covering(#[from] CoveringError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Rep(#[from] RepError),
    #[error("the quadrilateral has a repeated corner")]
    RepeatedCorner,
    #[error("the covers do not share their boundary lifts: {0}")]
    Unmatched(String),
    #[error("element is not over the flipped cover")]
    Foreign,
}

/// Which cover an arc label refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Side {
    /// Σ, the cover of the triangulation before the flip.
    Old,
    /// Σ′, the cover after the flip.
    New,
}

/// The flip of one diagonal on a double cover.
#[derive(Clone, Debug)]
pub struct FlipMove {
    pub old: CoveringData,
    pub new: CoveringData,
    pub quad: Quadrilateral,
    /// 𝒜(Σ′), the source of F₊.
    pub source: Alg,
    /// 𝒜(Σ) without formal symbols.
    pub target_base: Alg,
    /// 𝒜(Σ) with Y₂₄ and Y₄₂ adjoined.
    pub target: Alg,
    /// Arc labels such as `a24` and the cover edge they name.
    pub labels: BTreeMap<String, (Side, usize)>,
    /// Image of each Σ′ edge letter, over the target's generators.
    images: Vec<Lin<Word>>,
    /// Image of each inverse Σ′ edge letter.
    inverse_images: Vec<Lin<Word>>,
}

fn lift_between(c: &CoveringData, base_edge: usize, from: usize, to: usize) -> Option<usize> {
    let tail = (0..c.puncture_proj.len()).find(|&x| c.puncture_proj[x] == from && c.sheet[x] == 1)?;
    let head = (0..c.puncture_proj.len()).find(|&x| c.puncture_proj[x] == to && c.sheet[x] == 2)?;
    c.lifts(base_edge).into_iter().find(|&e| c.sigma.edges[e].tail == tail && c.sigma.edges[e].head == head)
}

/// Match every lift in `from` to a lift in `to` over the same base edge with
/// the same endpoints, after possibly swapping all sheets. Edges listed in
/// `skip` are left unmatched.
fn match_lifts(from: &CoveringData, to: &CoveringData, skip: &[usize]) -> Result<Vec<Option<usize>>, MutationError> {
    let np = from.puncture_proj.len();
    let sheet_of = |c: &CoveringData, p: usize, s: usize| (0..np).find(|&x| c.puncture_proj[x] == p && c.sheet[x] == s);
    'swap: for swap in [false, true] {
        let pmap: Vec<usize> = (0..np)
            .map(|x| {
                let s = if swap { 3 - from.sheet[x] } else { from.sheet[x] };
                sheet_of(to, from.puncture_proj[x], s).expect("double cover fibres have two sheets")
            })
            .collect();
        let mut out = vec![None; from.sigma.edges.len()];
        for (e, origin) in from.edge_origin.iter().enumerate() {
            let EdgeOrigin::Lift { base, .. } = *origin else {
                return Err(MutationError::Unmatched("interior arcs only occur for n ≥ 3".into()));
            };
            if skip.contains(&base) {
                continue;
            }
            let ed = &from.sigma.edges[e];
            let (t, h) = (pmap[ed.tail], pmap[ed.head]);
            match to.lifts(base).into_iter().find(|&f| to.sigma.edges[f].tail == t && to.sigma.edges[f].head == h) {
                Some(f) => out[e] = Some(f),
                None => continue 'swap,
            }
        }
        return Ok(out);
    }
    Err(MutationError::Unmatched("no sheet identification carries lifts to lifts".into()))
}

fn word(letters: &[Letter]) -> Word {
    Word(letters.to_vec())
}

/// θ₊ on a raw combination: each letter goes to the inverse of its deck
/// image, order reverses, reversed images pick up δ.
fn theta_raw(c: &CoveringData, delta: i32, x: &Lin<Word>) -> Result<Lin<Word>, MutationError> {
    let deck = deck_involution(c)?;
    let mut out = Lin::new();
    for (w, coeff) in &x.0 {
        let mut sign = 1;
        let mut letters = Vec::with_capacity(w.len());
        for l in w.0.iter().rev() {
            let img = deck.edges[l.gen as usize];
            let m = if img.forward {
                Letter::new(img.edge, -1)
            } else {
                sign *= delta;
                Letter::new(img.edge, 1)
            };
            letters.push(if l.exp > 0 { m } else { m.inv() });
        }
        out.add_term(Word(letters), coeff * Q::from_integer(sign.into()));
    }
    Ok(out)
}

/// Deliberately wrong substitutions, used as negative controls.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Perturbation {
    /// Keep only the first path in F₊(a24).
    DropTerm,
    /// Send a12 to a21 and back.
    SwapArcs,
}

/// Build the flip of `diagonal` on the double cover `c`.
pub fn flip_pushforward(c: &CoveringData, diagonal: usize, twist: Twist) -> Result<FlipMove, MutationError> {
    FlipMove::build(c, diagonal, twist, None)
}

impl FlipMove {
    fn build(
        c: &CoveringData,
        diagonal: usize,
        twist: Twist,
        wrong: Option<Perturbation>,
    ) -> Result<FlipMove, MutationError> {
        if c.n != 2 {
            return Err(CoveringError::NotDouble(c.n).into());
        }
        let base = &c.base;
        let quad = base.flip_quadrilateral(diagonal)?;
        let corners = quad.corners;
        if corners.iter().collect::<BTreeSet<_>>().len() != 4 {
            return Err(MutationError::RepeatedCorner);
        }
        let flipped = base.flip_triangulation(diagonal)?;
        let new = build_covering(&flipped, 2)?;
        let target_base = SurfaceAlgebra::from_arc(c.sigma.clone(), twist)?;
        let source = SurfaceAlgebra::from_arc(new.sigma.clone(), twist)?;
        let delta = target_base.delta();

        // Base edges of the sides, by unordered corner labels.
        let side = |i: usize, j: usize| -> usize {
            match (i.min(j), i.max(j)) {
                (1, 2) => quad.u.edge,
                (2, 3) => quad.v.edge,
                (3, 4) => quad.x.edge,
                (1, 4) => quad.y.edge,
                _ => diagonal,
            }
        };
        let mut labels = BTreeMap::new();
        let pairs = [(1, 2), (2, 3), (3, 4), (1, 4), (1, 3)];
        for (i, j) in pairs.iter().flat_map(|&(i, j)| [(i, j), (j, i)]) {
            let e = lift_between(c, side(i, j), corners[j - 1], corners[i - 1])
                .ok_or_else(|| MutationError::Unmatched(format!("no lift a{i}{j} in the old cover")))?;
            labels.insert(format!("a{i}{j}"), (Side::Old, e));
        }
        for (i, j) in [(2, 4), (4, 2)] {
            let e = lift_between(&new, diagonal, corners[j - 1], corners[i - 1])
                .ok_or_else(|| MutationError::Unmatched(format!("no lift a{i}{j} in the new cover")))?;
            labels.insert(format!("a{i}{j}"), (Side::New, e));
        }
        let old = |name: &str| Letter::new(labels[name].1, 1);

        let mut f24 = Lin::new();
        f24.add_term(word(&[old("a23"), old("a13").inv(), old("a14")]), Q::one());
        if wrong != Some(Perturbation::DropTerm) {
            f24.add_term(word(&[old("a21"), old("a31").inv(), old("a34")]), Q::one());
        }
        // θ′(a24) = δ·a42 when the deck map reverses it, so F₊(a42) = δ·θ(F₊(a24)).
        let deck_new = deck_involution(&new)?;
        let (a24, a42) = (labels["a24"].1, labels["a42"].1);
        let img = deck_new.edges[a24];
        if img.edge != a42 || img.forward {
            return Err(MutationError::Unmatched("deck map does not exchange a24 and a42".into()));
        }
        let f42 = theta_raw(c, delta, &f24)?.scaled(&Q::from_integer(delta.into()));

        let b24 = target_base.reduce_all(&f24);
        let b42 = target_base.reduce_all(&f42);
        let target = SurfaceAlgebra::with_formal_inverses(&target_base, vec![("Y24".into(), b24), ("Y42".into(), b42)]);
        let ne = target_base.num_edges();

        let matched = match_lifts(&new, c, &[diagonal])?;
        let mut images = Vec::new();
        let mut inverse_images = Vec::new();
        for (e, m) in matched.iter().enumerate() {
            let (img, inv) = if e == a24 {
                (f24.clone(), Lin::single(Word::letter(Letter::new(ne, 1)), Q::one()))
            } else if e == a42 {
                (f42.clone(), Lin::single(Word::letter(Letter::new(ne + 1, 1)), Q::one()))
            } else {
                let f = m.ok_or_else(|| MutationError::Unmatched(format!("edge {}", new.sigma.edges[e].id)))?;
                let l = Letter::new(f, 1);
                (Lin::single(Word::letter(l), Q::one()), Lin::single(Word::letter(l.inv()), Q::one()))
            };
            images.push(img);
            inverse_images.push(inv);
        }
        if wrong == Some(Perturbation::SwapArcs) {
            let (x, y) = (old("a12"), old("a21"));
            for (img, inv) in images.iter_mut().zip(inverse_images.iter_mut()) {
                let one = |l: Letter| Lin::single(Word::letter(l), Q::one());
                if *img == one(x) {
                    (*img, *inv) = (one(y), one(y.inv()));
                } else if *img == one(y) {
                    (*img, *inv) = (one(x), one(x.inv()));
                }
            }
        }
        Ok(FlipMove { old: c.clone(), new, quad, source, target_base, target, labels, images, inverse_images })
    }

    /// The same flip with a deliberate error in the substitution.
    pub fn perturbed(&self, how: Perturbation) -> Result<FlipMove, MutationError> {
        FlipMove::build(&self.old, self.quad.diagonal, self.source.twist, Some(how))
    }

    pub fn label(&self, name: &str) -> Option<(Side, usize)> {
        self.labels.get(name).copied()
    }

    /// An arc of Σ′ as a raw word. The old diagonal lifts are not arcs of
    /// Σ′; they are the paths a31 = a34 a24⁻¹ a21 and a13 = a12 a42⁻¹ a43.
    pub fn source_word(&self, name: &str) -> Option<Word> {
        match name {
            "a31" => Some(self.path(&[("a34", 1), ("a24", -1), ("a21", 1)])),
            "a13" => Some(self.path(&[("a12", 1), ("a42", -1), ("a43", 1)])),
            _ => {
                let (side, e) = self.label(name)?;
                let e = match side {
                    Side::New => e,
                    Side::Old => self.old_to_new(e)?,
                };
                Some(Word::letter(Letter::new(e, 1)))
            }
        }
    }

    fn path(&self, parts: &[(&str, i8)]) -> Word {
        Word(parts.iter().map(|&(n, x)| Letter::new(self.source_word(n).unwrap().0[0].gen as usize, x)).collect())
    }

    fn old_to_new(&self, e: usize) -> Option<usize> {
        (0..self.images.len()).find(|&f| self.images[f] == Lin::single(Word::letter(Letter::new(e, 1)), Q::one()))
    }

    /// An arc of Σ′, by label or by cover edge name, as an element of 𝒜(Σ′).
    pub fn source_element(&self, name: &str) -> Result<Element, MutationError> {
        match self.source_word(name) {
            Some(w) => Ok(self.source.reduce(1, &w.0)),
            None => Ok(self.source.gen(name)?),
        }
    }

    /// Letterwise substitution of a raw Σ′ combination, unreduced.
    pub fn substitute(&self, x: &Lin<Word>) -> Lin<Word> {
        let mut out = Lin::new();
        for (w, c) in &x.0 {
            let mut acc = Lin::single(Word::one(), c.clone());
            for l in &w.0 {
                let img = if l.exp > 0 { &self.images[l.gen as usize] } else { &self.inverse_images[l.gen as usize] };
                acc = crate::algebra::lin_mul(&acc, img);
            }
            out.add_lin(&acc);
        }
        out
    }

    /// F₊ of an element of 𝒜(Σ′), reduced in the extended target.
    pub fn apply(&self, x: &Element) -> Result<Element, MutationError> {
        if x.alg.id() != self.source.id() {
            return Err(MutationError::Foreign);
        }
        Ok(self.target.reduce_all(&self.substitute(&x.terms)))
    }

    /// F₊ ⊗ F₊ on a raw tensor over Σ′ letters.
    pub fn apply_raw2(&self, t: &Raw2) -> Tensor2 {
        let mut out = Tensor2::zero(&self.target);
        for ((a, b), c) in &t.0 {
            let fa = self.target.reduce_all(&self.substitute(&Lin::single(a.clone(), Q::one())));
            let fb = self.target.reduce_all(&self.substitute(&Lin::single(b.clone(), Q::one())));
            for (wa, ca) in &fa.terms.0 {
                for (wb, cb) in &fb.terms.0 {
                    out.terms.add_term((wa.clone(), wb.clone()), c * ca * cb);
                }
            }
        }
        out
    }

    pub fn apply2(&self, t: &Tensor2) -> Result<Tensor2, MutationError> {
        if t.alg.id() != self.source.id() {
            return Err(MutationError::Foreign);
        }
        Ok(self.apply_raw2(&t.terms))
    }

    fn mentions_formal(&self, x: &Lin<Word>) -> bool {
        x.0.keys().flat_map(|w| &w.0).any(|l| self.target.formal_index(l.gen).is_some())
    }

    /// Both sides of F₊⟨⟨x, y⟩⟩ = ⟨⟨F₊x, F₊y⟩⟩ for raw Σ′ combinations.
    pub fn equivariance_sides(&self, x: &Lin<Word>, y: &Lin<Word>) -> (Tensor2, Tensor2) {
        let src = BracketEngine::new(&self.source);
        let lhs = self.apply_raw2(&src.lin(x, y));
        let tgt = BracketEngine::new(&self.target);
        let rhs = tgt.normalize(&tgt.lin(&self.substitute(x), &self.substitute(y)));
        (lhs, rhs)
    }

    /// Exact comparison, available when no formal inverse shows up.
    pub fn equivariance_symbolic(&self, x: &Lin<Word>, y: &Lin<Word>) -> SymbolicVerdict {
        let (fx, fy) = (self.substitute(x), self.substitute(y));
        if self.mentions_formal(&fx) || self.mentions_formal(&fy) {
            return SymbolicVerdict::Deferred;
        }
        let src = BracketEngine::new(&self.source);
        let raw = src.lin(x, y);
        let pushed: Raw2 = {
            let mut out = Raw2::new();
            for ((a, b), c) in &raw.0 {
                let fa = self.substitute(&Lin::single(a.clone(), Q::one()));
                let fb = self.substitute(&Lin::single(b.clone(), Q::one()));
                if self.mentions_formal(&fa) || self.mentions_formal(&fb) {
                    return SymbolicVerdict::Deferred;
                }
                for (wa, ca) in &fa.0 {
                    for (wb, cb) in &fb.0 {
                        out.add_term((wa.clone(), wb.clone()), c * ca * cb);
                    }
                }
            }
            out
        };
        let tgt = BracketEngine::new(&self.target);
        let lhs = tgt.normalize(&pushed);
        let rhs = tgt.normalize(&tgt.lin(&fx, &fy));
        if lhs == rhs {
            SymbolicVerdict::Pass
        } else {
            SymbolicVerdict::Fail { lhs: lhs.to_string(), rhs: rhs.to_string() }
        }
    }

    /// Random exact evaluation of both sides in Mat_N ⊗ Mat_N.
    pub fn equivariance_numeric(
        &self,
        x: &Lin<Word>,
        y: &Lin<Word>,
        sizes: &[usize],
        samples: usize,
        seed: u64,
    ) -> Result<OracleVerdict, MutationError> {
        let (lhs, rhs) = self.equivariance_sides(x, y);
        Ok(identity_oracle(&Sides::Tensors(lhs, rhs), sizes, samples, seed)?)
    }

    /// Flip back and compose: every arc of the twice-flipped cover should
    /// return to the matching arc of Σ. Returns one verdict per arc.
    pub fn round_trip(
        &self,
        sizes: &[usize],
        samples: usize,
        seed: u64,
    ) -> Result<Vec<(String, OracleVerdict)>, MutationError> {
        let back = FlipMove::build(&self.new, self.quad.diagonal, self.source.twist, None)?;
        let matched = match_lifts(&back.new, &self.old, &[])?;
        let mut out = Vec::new();
        for (e, m) in matched.iter().enumerate() {
            let m = m.ok_or_else(|| MutationError::Unmatched(back.new.sigma.edges[e].id.clone()))?;
            // back's images live over Σ′ letters plus back's own formal symbols.
            let g = &back.images[e];
            if back.mentions_formal(g) {
                return Err(MutationError::Unmatched("backward image uses a formal inverse".into()));
            }
            let lhs = self.target.reduce_all(&self.substitute(g));
            let rhs = self.target.reduce(1, &[Letter::new(m, 1)]);
            let v = identity_oracle(&Sides::Elements(lhs, rhs), sizes, samples, seed)?;
            out.push((self.old.sigma.edges[m].id.clone(), v));
        }
        Ok(out)
    }

    /// The substitution table by label, images printed over Σ's edge names.
    pub fn table(&self) -> Vec<(String, String)> {
        let mut rows = Vec::new();
        for name in ["a24", "a42", "a31", "a13"] {
            let w = self.source_word(name).unwrap();
            let img = self.target.reduce_all(&self.substitute(&Lin::single(w, Q::one())));
            rows.push((name.to_string(), img.to_string()));
        }
        rows
    }
}

impl fmt::Display for FlipMove {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = &self.old.base;
        let names: Vec<&str> = self.quad.corners.iter().map(|&p| b.punctures[p].as_str()).collect();
        writeln!(f, "flip of {} in {}", b.edges[self.quad.diagonal].id, b.name)?;
        writeln!(f, "corners 1..4: {}", names.join(" "))?;
        for (label, (side, e)) in &self.labels {
            let s = match side {
                Side::Old => &self.old.sigma,
                Side::New => &self.new.sigma,
            };
            writeln!(f, "  {label} = {}", s.edges[*e].id)?;
        }
        writeln!(f, "Y24 = inverse of F(a24), Y42 = inverse of F(a42)")?;
        for (name, img) in self.table() {
            writeln!(f, "F({name}) = {img}")?;
        }
        writeln!(f, "note: flips are realized on the double cover only")?;
        writeln!(f, "#machine")?;
        for (name, img) in self.table() {
            writeln!(f, "image\t{name}\t{img}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SymbolicVerdict {
    Pass,
    Fail {
        lhs: String,
        rhs: String,
    },
    /// A formal inverse appeared; use the numeric checker instead.
    Deferred,
}

/// One triangulation reached by flips.
#[derive(Clone, Debug)]
pub struct ExchangeNode {
    /// Sorted internal edges as corner-name pairs.
    pub key: String,
    pub surface: Arc<MarkedSurface>,
    /// Generator names of the n-fold cover, in canonical form.
    pub generators: Vec<String>,
    pub face_relations: usize,
}

#[derive(Clone, Debug)]
pub struct ExchangeEdge {
    pub from: usize,
    pub to: usize,
    /// The flipped diagonal, named in `from`.
    pub diagonal: String,
    /// F₊ images by label, present for double covers.
    pub substitution: Option<Vec<(String, String)>>,
}

#[derive(Clone, Debug)]
pub struct ExchangeGraph {
    pub n: usize,
    pub depth: usize,
    pub nodes: Vec<ExchangeNode>,
    pub edges: Vec<ExchangeEdge>,
    pub generators: BTreeSet<String>,
}

impl ExchangeGraph {
    pub fn mutation_relations(&self) -> usize {
        self.edges.iter().filter_map(|e| e.substitution.as_ref()).map(Vec::len).sum()
    }

    pub fn face_relations(&self) -> usize {
        self.nodes.iter().map(|n| n.face_relations).sum()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.from == v || e.to == v).count()
    }
}

impl fmt::Display for ExchangeGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "exchange graph, n = {}, depth {}", self.n, self.depth)?;
        writeln!(f, "nodes: {}", self.nodes.len())?;
        writeln!(f, "mutation edges: {}", self.edges.len())?;
        writeln!(f, "generators in the union: {}", self.generators.len())?;
        writeln!(f, "face relations: {}", self.face_relations())?;
        writeln!(f, "mutation relations: {}", self.mutation_relations())?;
        if self.n != 2 {
            writeln!(f, "note: substitution maps are only built for double covers")?;
        }
        writeln!(f, "#machine")?;
        for (i, n) in self.nodes.iter().enumerate() {
            writeln!(f, "node\t{i}\t{}\t{}", n.key, n.generators.len())?;
        }
        for e in &self.edges {
            writeln!(f, "edge\t{}\t{}\t{}", e.from, e.to, e.diagonal)?;
        }
        Ok(())
    }
}

fn triangulation_key(s: &MarkedSurface) -> String {
    let mut pairs: Vec<String> = (0..s.edges.len())
        .filter(|&e| s.is_internal(e))
        .map(|e| {
            let (a, b) = (&s.punctures[s.edges[e].tail], &s.punctures[s.edges[e].head]);
            if a <= b {
                format!("{a}-{b}")
            } else {
                format!("{b}-{a}")
            }
        })
        .collect();
    pairs.sort();
    pairs.join(",")
}

/// Cover arcs named by their endpoints, `a[head<-tail]`, so that one arc
/// keeps its name in every triangulation containing it. Parallel arcs get
/// a `#k` suffix in edge order.
fn canonical_generators(c: &CoveringData) -> Vec<String> {
    let s = &c.sigma;
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut out: Vec<String> = s
        .edges
        .iter()
        .map(|e| {
            let name = format!("a[{}<-{}]", s.punctures[e.head], s.punctures[e.tail]);
            let k = seen.entry(name.clone()).or_insert(0);
            *k += 1;
            if *k == 1 {
                name
            } else {
                format!("{name}#{k}")
            }
        })
        .collect();
    out.sort();
    out
}

/// Breadth-first search over triangulations joined by flips, up to `depth`
/// flips from `base`. Triangulations are identified by their internal edges
/// as corner pairs, which is faithful for polygons.
pub fn exchange_explore(
    base: &MarkedSurface,
    n: usize,
    depth: usize,
    twist: Twist,
) -> Result<ExchangeGraph, MutationError> {
    let mut g = ExchangeGraph { n, depth, nodes: Vec::new(), edges: Vec::new(), generators: BTreeSet::new() };
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    let mut add = |g: &mut ExchangeGraph, s: MarkedSurface| -> Result<(usize, bool), MutationError> {
        let key = triangulation_key(&s);
        if let Some(&i) = index.get(&key) {
            return Ok((i, false));
        }
        let c = build_covering(&s, n)?;
        let generators = canonical_generators(&c);
        g.generators.extend(generators.iter().cloned());
        let i = g.nodes.len();
        g.nodes.push(ExchangeNode {
            key: key.clone(),
            surface: Arc::new(s),
            generators,
            face_relations: c.sigma.faces.len(),
        });
        index.insert(key, i);
        Ok((i, true))
    };
    let (root, _) = add(&mut g, base.clone())?;
    queue.push_back((root, 0));
    let mut done: BTreeSet<(usize, usize)> = BTreeSet::new();
    while let Some((v, d)) = queue.pop_front() {
        if d == depth {
            continue;
        }
        let s = g.nodes[v].surface.clone();
        for e in (0..s.edges.len()).filter(|&e| s.is_internal(e)) {
            let Ok(t) = s.flip_triangulation(e) else { continue };
            let (w, fresh) = add(&mut g, t)?;
            if fresh {
                queue.push_back((w, d + 1));
            }
            if !done.insert((v.min(w), v.max(w))) {
                continue;
            }
            let substitution = if n == 2 {
                let c = build_covering(&s, 2)?;
                Some(flip_pushforward(&c, e, twist)?.table())
            } else {
                None
            };
            g.edges.push(ExchangeEdge { from: v, to: w, diagonal: s.edges[e].id.clone(), substitution });
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::fixtures;

    fn disk4_move(t: Twist) -> FlipMove {
        let c = build_covering(&fixtures::disk4(), 2).unwrap();
        let d = c.base.edge_index("d13").unwrap();
        flip_pushforward(&c, d, t).unwrap()
    }

    fn raw(m: &FlipMove, name: &str) -> Lin<Word> {
        Lin::single(m.source_word(name).unwrap(), Q::one())
    }

    #[test]
    fn labels_follow_the_corner_rule() {
        let m = disk4_move(Twist::Twisted);
        assert_eq!(m.quad.corners.map(|p| m.old.base.punctures[p].clone()), ["1", "2", "3", "4"].map(String::from));
        let name = |l: &str| {
            let (side, e) = m.label(l).unwrap();
            let s = if side == Side::Old { &m.old.sigma } else { &m.new.sigma };
            s.edges[e].id.clone()
        };
        assert_eq!(name("a31"), "d13_1");
        assert_eq!(name("a13"), "d13_2");
        assert_eq!(name("a21"), "b12_1");
        assert_eq!(name("a14"), "b41_1");
        for (l, (side, e)) in &m.labels {
            let s = if *side == Side::Old { &m.old.sigma } else { &m.new.sigma };
            let (i, j) = (&l[1..2], &l[2..3]);
            assert_eq!(s.punctures[s.edges[*e].tail], format!("{j}_1"));
            assert_eq!(s.punctures[s.edges[*e].head], format!("{i}_2"));
        }
    }

    #[test]
    fn displayed_images() {
        for t in [Twist::Twisted, Twist::Untwisted] {
            let m = disk4_move(t);
            let p = |s: &str| m.target.parse_element(s).unwrap();
            let f24 = m.apply(&m.source_element("a24").unwrap()).unwrap();
            assert_eq!(f24, p("b23_2 d13_2^-1 b41_1 + b12_1 d13_1^-1 b34_2"), "{t:?}");
            // The text rule for a42 with ′ and ″ exchanged, as produced by θ.
            let f42 = m.apply(&m.source_element("a42").unwrap()).unwrap();
            assert_eq!(f42, p("b34_1 d13_2^-1 b12_2 + b41_2 d13_1^-1 b23_1"), "{t:?}");
            let f31 = m.target.reduce_all(&m.substitute(&raw(&m, "a31")));
            assert_eq!(f31, p("b34_2 Y24 b12_1"));
            let f13 = m.target.reduce_all(&m.substitute(&raw(&m, "a13")));
            assert_eq!(f13, p("b12_2 Y42 b34_1"));
        }
    }

    #[test]
    fn identity_off_the_quadrilateral_and_homomorphism() {
        let c = build_covering(&fixtures::disk5(), 2).unwrap();
        let d = c.base.edge_index("d13").unwrap();
        let m = flip_pushforward(&c, d, Twist::Twisted).unwrap();
        let touched: BTreeSet<usize> = m.labels.values().filter(|(s, _)| *s == Side::New).map(|x| x.1).collect();
        for e in 0..m.source.num_edges() {
            if touched.contains(&e) {
                continue;
            }
            let img = &m.images[e];
            let w = img.0.keys().next().unwrap();
            assert_eq!(img.len(), 1);
            assert_eq!(m.old.sigma.edges[w.0[0].gen as usize].id, m.new.sigma.edges[e].id);
        }
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(2);
        for _ in 0..10 {
            let x = crate::algebra::random_element(&m.source, &mut rng, 3, 2);
            let y = crate::algebra::random_element(&m.source, &mut rng, 3, 2);
            let lhs = m.apply(&(&x * &y)).unwrap();
            let rhs = &m.apply(&x).unwrap() * &m.apply(&y).unwrap();
            assert_eq!(lhs, rhs);
        }
        assert_eq!(m.apply(&m.source.one()).unwrap(), m.target.one());
    }

    #[test]
    fn symbolic_equivariance_on_generator_pairs() {
        for t in [Twist::Twisted, Twist::Untwisted] {
            let m = disk4_move(t);
            let ne = m.source.num_edges();
            let mut passed = 0;
            for i in 0..ne {
                for j in 0..ne {
                    let x = Lin::single(Word::letter(Letter::new(i, 1)), Q::one());
                    let y = Lin::single(Word::letter(Letter::new(j, 1)), Q::one());
                    match m.equivariance_symbolic(&x, &y) {
                        SymbolicVerdict::Pass => passed += 1,
                        v => panic!("{t:?} {} {}: {v:?}", m.new.sigma.edges[i].id, m.new.sigma.edges[j].id),
                    }
                }
            }
            assert_eq!(passed, ne * ne);
        }
    }

    #[test]
    fn old_diagonal_is_deferred() {
        let m = disk4_move(Twist::Twisted);
        assert_eq!(m.equivariance_symbolic(&raw(&m, "a31"), &raw(&m, "a24")), SymbolicVerdict::Deferred);
    }

    #[test]
    fn numeric_equivariance_and_negative_control() {
        let m = disk4_move(Twist::Twisted);
        for (x, y) in [("a31", "a24"), ("a13", "a42"), ("a31", "a13"), ("a13", "a24")] {
            let v = m.equivariance_numeric(&raw(&m, x), &raw(&m, y), &[5], 2, 7).unwrap();
            assert!(v.passed(), "{x} {y}: {v}");
        }
        let bad = m.perturbed(Perturbation::SwapArcs).unwrap();
        let v = bad.equivariance_numeric(&raw(&bad, "a24"), &raw(&bad, "a12"), &[5], 5, 7).unwrap();
        assert_eq!(v.checked, 1, "the control should fail on its first sample");
        assert!(!v.passed());
        let one = Lin::single(Word::one(), Q::one());
        assert!(m.equivariance_numeric(&one, &one, &[3], 1, 0).unwrap().passed());
    }

    #[test]
    fn round_trip_returns_every_arc() {
        for t in [Twist::Twisted, Twist::Untwisted] {
            let m = disk4_move(t);
            let rt = m.round_trip(&[1, 2, 3], 3, 1).unwrap();
            assert_eq!(rt.len(), 10);
            for (name, v) in rt {
                assert!(v.passed(), "{t:?} {name}: {v}");
            }
        }
    }

    #[test]
    fn dropped_term_is_caught_by_the_round_trip_only() {
        let m = disk4_move(Twist::Twisted);
        let bad = m.perturbed(Perturbation::DropTerm).unwrap();
        // A single path is still a groupoid map, so the bracket cannot tell.
        for (x, y) in [("a24", "a24"), ("a24", "a42"), ("a31", "a24"), ("a24", "a12")] {
            assert!(bad.equivariance_numeric(&raw(&bad, x), &raw(&bad, y), &[3], 2, 7).unwrap().passed());
        }
        let failing: Vec<String> = bad
            .round_trip(&[5, 7], 5, 1)
            .unwrap()
            .into_iter()
            .filter(|(_, v)| !v.passed())
            .inspect(|(_, v)| assert_eq!(v.checked, 1))
            .map(|(n, _)| n)
            .collect();
        assert_eq!(failing, ["d13_2", "d13_1"]);
    }

    #[test]
    fn faces_of_the_new_cover_map_to_delta() {
        for t in [Twist::Twisted, Twist::Untwisted] {
            let m = disk4_move(t);
            for f in 0..m.source.surface.faces.len() {
                let (sign, letters) = m.source.face_word_raw(f);
                let img = m.substitute(&Lin::single(Word(letters), Q::from_integer(sign.into())));
                let lhs = m.target.reduce_all(&img);
                let rhs = m.target.scalar(Q::from_integer(m.source.delta().into()));
                assert!(identity_oracle(&Sides::Elements(lhs, rhs), &[1, 2, 3], 3, 1).unwrap().passed());
            }
        }
    }

    #[test]
    fn exchange_graphs() {
        let g0 = exchange_explore(&fixtures::disk4(), 2, 0, Twist::Twisted).unwrap();
        assert_eq!((g0.nodes.len(), g0.edges.len()), (1, 0));
        let g1 = exchange_explore(&fixtures::disk4(), 2, 1, Twist::Twisted).unwrap();
        assert_eq!((g1.nodes.len(), g1.edges.len()), (2, 1));
        let g5 = exchange_explore(&fixtures::disk5(), 2, 10, Twist::Twisted).unwrap();
        assert_eq!((g5.nodes.len(), g5.edges.len()), (5, 5));
        assert!((0..5).all(|v| g5.degree(v) == 2));
        let sizes: BTreeSet<usize> = g5.nodes.iter().map(|n| n.generators.len()).collect();
        assert_eq!(sizes.len(), 1);
    }
}
