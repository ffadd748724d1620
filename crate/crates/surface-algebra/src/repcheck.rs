//! Exact-rational matrix representations of surface algebras.
//!
//! A [`MatrixRep`] sends every surviving generator to a random invertible
//! integer matrix and δ to −Id (or +Id when untwisted). Eliminated edges
//! get the value of their defining word, so face relations hold by
//! construction. Everything is `BigRational`; no floating point.
//!
//! The second half of the module works in an ambient matrix algebra with
//! an anti-involution σ and tests membership in the groups and Lie
//! algebras cut out by σ(g)ᵗΩg = Ω.

use std::fmt;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{Alg, Element, Letter, Tensor2, Word, Q};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum RepError {
    #[error("algebra mismatch")]
    Mismatch,
    #[error("matrix shape mismatch: {0}")]
    Shape(String),
    #[error("matrix is singular")]
    Singular,
    #[error("no invertible sample found after {0} tries")]
    Exhausted(usize),
    #[error("word is not composable at letter {0}")]
    NotComposable(usize),
    #[error("empty path has no endpoints")]
    EmptyPath,
}

/// A square matrix over ℚ, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mat {
    n: usize,
    data: Vec<Q>,
}

impl Mat {
    pub fn zero(n: usize) -> Mat {
        Mat { n, data: vec![Q::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Mat {
        Mat::scalar(n, Q::one())
    }

    pub fn scalar(n: usize, c: Q) -> Mat {
        let mut m = Mat::zero(n);
        for i in 0..n {
            m.data[i * n + i] = c.clone();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Q>>) -> Result<Mat, RepError> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(RepError::Shape("rows must form a square".into()));
        }
        Ok(Mat { n, data: rows.into_iter().flatten().collect() })
    }

    pub fn from_ints(rows: &[&[i64]]) -> Mat {
        Mat::from_rows(rows.iter().map(|r| r.iter().map(|&x| Q::from_integer(x.into())).collect()).collect())
            .expect("square integer rows")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &Q {
        &self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Q) {
        self.data[i * self.n + j] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn add(&self, o: &Mat) -> Mat {
        assert_eq!(self.n, o.n, "dimension mismatch");
        Mat { n: self.n, data: self.data.iter().zip(&o.data).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, o: &Mat) -> Mat {
        self.add(&o.scale(&-Q::one()))
    }

    pub fn scale(&self, c: &Q) -> Mat {
        Mat { n: self.n, data: self.data.iter().map(|a| a * c).collect() }
    }

    pub fn mul(&self, o: &Mat) -> Mat {
        assert_eq!(self.n, o.n, "dimension mismatch");
        let n = self.n;
        let mut out = Mat::zero(n);
        for i in 0..n {
            for k in 0..n {
                let a = &self.data[i * n + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = &o.data[k * n + j];
                    if !b.is_zero() {
                        out.data[i * n + j] += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let n = self.n;
        let mut out = Mat::zero(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].clone();
            }
        }
        out
    }

    /// Gauss–Jordan inverse.
    pub fn inverse(&self) -> Result<Mat, RepError> {
        let n = self.n;
        let mut a = self.clone();
        let mut inv = Mat::identity(n);
        for col in 0..n {
            let pivot = (col..n).find(|&r| !a.get(r, col).is_zero()).ok_or(RepError::Singular)?;
            if pivot != col {
                for j in 0..n {
                    a.data.swap(pivot * n + j, col * n + j);
                    inv.data.swap(pivot * n + j, col * n + j);
                }
            }
            let p = a.get(col, col).recip();
            for j in 0..n {
                a.data[col * n + j] *= &p;
                inv.data[col * n + j] *= &p;
            }
            for r in (0..n).filter(|&r| r != col) {
                let f = a.get(r, col).clone();
                if f.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let (x, y) = (a.data[col * n + j].clone(), inv.data[col * n + j].clone());
                    a.data[r * n + j] -= &f * x;
                    inv.data[r * n + j] -= &f * y;
                }
            }
        }
        Ok(inv)
    }

    pub fn is_invertible(&self) -> bool {
        self.inverse().is_ok()
    }

    /// Kronecker product, the matrix of `self ⊗ o` on the tensor-square space.
    pub fn kron(&self, o: &Mat) -> Mat {
        let (n, m) = (self.n, o.n);
        let mut out = Mat::zero(n * m);
        for i in 0..n {
            for j in 0..n {
                let a = self.get(i, j);
                if a.is_zero() {
                    continue;
                }
                for k in 0..m {
                    for l in 0..m {
                        out.data[(i * m + k) * (n * m) + j * m + l] = a * o.get(k, l);
                    }
                }
            }
        }
        out
    }

    /// Assemble a 2×2 block matrix from four k×k blocks.
    pub fn blocks(b: [[&Mat; 2]; 2]) -> Result<Mat, RepError> {
        let k = b[0][0].n;
        if b.iter().flatten().any(|m| m.n != k) {
            return Err(RepError::Shape("blocks must share one dimension".into()));
        }
        let mut out = Mat::zero(2 * k);
        for (bi, row) in b.iter().enumerate() {
            for (bj, m) in row.iter().enumerate() {
                for i in 0..k {
                    for j in 0..k {
                        out.set(bi * k + i, bj * k + j, m.get(i, j).clone());
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn block(&self, bi: usize, bj: usize) -> Mat {
        let k = self.n / 2;
        let mut out = Mat::zero(k);
        for i in 0..k {
            for j in 0..k {
                out.set(i, j, self.get(bi * k + i, bj * k + j).clone());
            }
        }
        out
    }

    /// A matrix with integer entries in [−bound, bound].
    pub fn random(n: usize, bound: i64, rng: &mut impl Rng) -> Mat {
        Mat { n, data: (0..n * n).map(|_| Q::from_integer(rng.gen_range(-bound..=bound).into())).collect() }
    }
}

/// Row-major with `p/q` entries: rows separated by `;`.
impl fmt::Display for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.n {
                if j > 0 {
                    write!(f, " ")?;
                }
                let x = self.get(i, j);
                write!(f, "{}/{}", x.numer(), x.denom())?;
            }
        }
        Ok(())
    }
}

const ENTRY_BOUND: i64 = 9;
const MAX_TRIES: usize = 100;

/// Values of the algebra's generators in Mat_N(ℚ).
#[derive(Clone, Debug)]
pub struct MatrixRep {
    pub alg: Alg,
    pub dim: usize,
    pub seed: u64,
    /// Indexed by generator, formal symbols included.
    images: Vec<Mat>,
    inverses: Vec<Mat>,
}

/// A random representation. Surviving edges get random invertible
/// integer matrices; eliminated edges get their defining words; a formal
/// inverse Y of B gets ρ(B)⁻¹. If some ρ(B) is singular the whole sample
/// is redrawn.
pub fn random_rep(alg: &Alg, dim: usize, seed: u64) -> Result<MatrixRep, RepError> {
    assert!(dim >= 1, "dimension must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    'sample: for _ in 0..MAX_TRIES {
        let ne = alg.num_edges();
        let mut images = vec![Mat::zero(dim); alg.num_gens()];
        let mut inverses = images.clone();
        for &e in &alg.reduction.survivors {
            let (m, mi) = loop {
                let m = Mat::random(dim, ENTRY_BOUND, &mut rng);
                if let Ok(mi) = m.inverse() {
                    break (m, mi);
                }
            };
            images[e] = m;
            inverses[e] = mi;
        }
        let mut rep = MatrixRep { alg: alg.clone(), dim, seed, images, inverses };
        for e in 0..ne {
            if let Some((sign, w)) = &alg.reduction.definitions[e] {
                let m = rep.word(w).scale(&Q::from_integer((*sign).into()));
                rep.inverses[e] = m.inverse().expect("product of invertibles");
                rep.images[e] = m;
            }
        }
        for (i, f) in alg.formal.iter().enumerate() {
            let sub = MatrixRep {
                alg: f.base.alg.clone(),
                dim,
                seed,
                images: rep.images[..ne].to_vec(),
                inverses: rep.inverses[..ne].to_vec(),
            };
            let b = sub.evaluate(&f.base)?;
            let Ok(y) = b.inverse() else { continue 'sample };
            rep.images[ne + i] = y;
            rep.inverses[ne + i] = b;
        }
        return Ok(rep);
    }
    Err(RepError::Exhausted(MAX_TRIES))
}

impl MatrixRep {
    pub fn letter(&self, l: Letter) -> &Mat {
        if l.exp > 0 {
            &self.images[l.gen as usize]
        } else {
            &self.inverses[l.gen as usize]
        }
    }

    /// Product of the letters of `w`, read left to right.
    pub fn word(&self, w: &Word) -> Mat {
        let mut acc = Mat::identity(self.dim);
        for &l in &w.0 {
            acc = acc.mul(self.letter(l));
        }
        acc
    }

    pub fn generator(&self, name: &str) -> Option<&Mat> {
        self.alg.gen_index(name).ok().map(|g| &self.images[g])
    }

    pub fn evaluate(&self, x: &Element) -> Result<Mat, RepError> {
        if x.alg.id() != self.alg.id() {
            return Err(RepError::Mismatch);
        }
        let mut acc = Mat::zero(self.dim);
        for (w, c) in &x.terms.0 {
            acc = acc.add(&self.word(w).scale(c));
        }
        Ok(acc)
    }

    pub fn evaluate_tensor2(&self, t: &Tensor2) -> Result<Mat, RepError> {
        if t.alg.id() != self.alg.id() {
            return Err(RepError::Mismatch);
        }
        let mut acc = Mat::zero(self.dim * self.dim);
        for (a, b, c) in t.components() {
            acc = acc.add(&self.word(a).kron(&self.word(b)).scale(c));
        }
        Ok(acc)
    }

    /// Value of face `f`'s word, δ-sign included. Should be δ·Id.
    pub fn face_value(&self, f: usize) -> Mat {
        let (sign, letters) = self.alg.face_word_raw(f);
        self.word(&Word(letters)).scale(&Q::from_integer(sign.into()))
    }
}

/// Two sides of a claimed identity.
#[derive(Clone, Debug)]
pub enum Sides {
    Elements(Element, Element),
    Tensors(Tensor2, Tensor2),
}

impl Sides {
    fn alg(&self) -> &Alg {
        match self {
            Sides::Elements(a, _) => &a.alg,
            Sides::Tensors(a, _) => &a.alg,
        }
    }

    fn agree(&self, r: &MatrixRep) -> Result<bool, RepError> {
        Ok(match self {
            Sides::Elements(a, b) => r.evaluate(a)? == r.evaluate(b)?,
            Sides::Tensors(a, b) => r.evaluate_tensor2(a)? == r.evaluate_tensor2(b)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleVerdict {
    pub sizes: Vec<usize>,
    pub samples: usize,
    pub seed: u64,
    pub checked: usize,
    /// (size, sample seed) of the first disagreement.
    pub counterexample: Option<(usize, u64)>,
}

impl OracleVerdict {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

impl fmt::Display for OracleVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sizes: Vec<String> = self.sizes.iter().map(|s| s.to_string()).collect();
        writeln!(f, "sizes: {}", sizes.join(","))?;
        writeln!(f, "samples per size: {}", self.samples)?;
        writeln!(f, "evaluations: {}", self.checked)?;
        match self.counterexample {
            None => writeln!(f, "verdict: pass")?,
            Some((n, s)) => writeln!(f, "verdict: fail (size {n}, sample seed {s})")?,
        }
        writeln!(f, "#machine")?;
        writeln!(f, "seed\t{}", self.seed)?;
        if let Some((n, s)) = self.counterexample {
            writeln!(f, "counterexample\t{n}\t{s}")?;
        }
        Ok(())
    }
}

/// Per-sample seed, so any failing sample can be replayed alone.
pub fn sample_seed(seed: u64, size: usize, i: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(((size as u64) << 32) | i as u64)
}

/// Compare both sides under random representations. Exact per sample, so a
/// pass is evidence and a fail is a proof of inequality.
pub fn identity_oracle(sides: &Sides, sizes: &[usize], samples: usize, seed: u64) -> Result<OracleVerdict, RepError> {
    let mut v = OracleVerdict { sizes: sizes.to_vec(), samples, seed, checked: 0, counterexample: None };
    for &n in sizes {
        for i in 0..samples {
            let s = sample_seed(seed, n, i);
            let r = random_rep(sides.alg(), n, s)?;
            v.checked += 1;
            if !sides.agree(&r)? {
                v.counterexample = Some((n, s));
                return Ok(v);
            }
        }
    }
    Ok(v)
}

/// A nonzero vector s_p per puncture, rank one.
#[derive(Clone, Debug)]
pub struct DecorationData {
    pub sections: Vec<Q>,
}

/// a_γ = s_q⁻¹ ρ(γ) s_p for a path γ from p to q in a rank-one
/// representation. The rightmost letter is traversed first, so that
/// a_{γ₂γ₁} = a_{γ₂} a_{γ₁}. Returns (p, q, a_γ).
pub fn holonomy_function(d: &DecorationData, r: &MatrixRep, gamma: &Word) -> Result<(usize, usize, Q), RepError> {
    if r.dim != 1 {
        return Err(RepError::Shape(format!("holonomy needs a rank-one representation, got {}", r.dim)));
    }
    let s = &r.alg.surface;
    let ends = |l: Letter| {
        let e = &s.edges[l.gen as usize];
        if l.exp > 0 {
            (e.tail, e.head)
        } else {
            (e.head, e.tail)
        }
    };
    let letters = &gamma.0;
    if letters.is_empty() {
        return Err(RepError::EmptyPath);
    }
    if let Some(l) = letters.iter().find(|l| r.alg.formal_index(l.gen).is_some()) {
        return Err(RepError::NotComposable(letters.iter().position(|x| x == l).unwrap()));
    }
    for i in 0..letters.len() - 1 {
        if ends(letters[i + 1]).1 != ends(letters[i]).0 {
            return Err(RepError::NotComposable(i));
        }
    }
    let p = ends(*letters.last().unwrap()).0;
    let q = ends(letters[0]).1;
    let value = r.word(gamma).get(0, 0).clone();
    Ok((p, q, &value * &d.sections[p] / &d.sections[q]))
}

/// The anti-involution on the ambient algebra Mat_k(ℚ).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sigma {
    Transpose,
    /// σ(a) = J⁻¹ aᵀ J for an invertible J that is symmetric or antisymmetric.
    Congruence(Mat),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Omega {
    /// [[0,1],[−1,0]]
    Symplectic,
    /// [[0,1],[1,0]]
    Split,
}

impl Omega {
    fn lower(self) -> i64 {
        match self {
            Omega::Symplectic => -1,
            Omega::Split => 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct InvolutiveContext {
    pub k: usize,
    pub sigma: Sigma,
    j_inv: Option<Mat>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Membership {
    /// Sp₂ or 𝔰𝔭₂ (Ω antisymmetric).
    pub symplectic: bool,
    /// O(1,1) or 𝔬(1,1) (Ω symmetric).
    pub orthogonal: bool,
}

impl Membership {
    pub fn neither(self) -> bool {
        !self.symplectic && !self.orthogonal
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormRecord {
    pub isotropic: bool,
    pub pairing: Mat,
    pub normalized: bool,
}

impl InvolutiveContext {
    pub fn transpose(k: usize) -> InvolutiveContext {
        InvolutiveContext { k, sigma: Sigma::Transpose, j_inv: None }
    }

    pub fn congruence(j: Mat) -> Result<InvolutiveContext, RepError> {
        let jt = j.transpose();
        if jt != j && jt != j.scale(&-Q::one()) {
            return Err(RepError::Shape("J must be symmetric or antisymmetric".into()));
        }
        let j_inv = j.inverse()?;
        Ok(InvolutiveContext { k: j.dim(), sigma: Sigma::Congruence(j), j_inv: Some(j_inv) })
    }

    fn check(&self, a: &Mat, k: usize) -> Result<(), RepError> {
        if a.dim() != k {
            return Err(RepError::Shape(format!("expected dimension {k}, got {}", a.dim())));
        }
        Ok(())
    }

    pub fn sigma(&self, a: &Mat) -> Mat {
        match (&self.sigma, &self.j_inv) {
            (Sigma::Congruence(j), Some(ji)) => ji.mul(&a.transpose()).mul(j),
            _ => a.transpose(),
        }
    }

    /// Is σ(a) = a?
    pub fn is_symmetric(&self, a: &Mat) -> bool {
        self.sigma(a) == *a
    }

    pub fn is_antisymmetric(&self, a: &Mat) -> bool {
        self.sigma(a) == a.scale(&-Q::one())
    }

    pub fn is_unitary(&self, a: &Mat) -> Result<bool, RepError> {
        self.check(a, self.k)?;
        Ok(self.sigma(a).mul(a) == Mat::identity(self.k))
    }

    /// σ(g)ᵗ on a 2×2 block matrix: σ on each block, blocks transposed.
    pub fn sigma_t(&self, g: &Mat) -> Mat {
        let b = |i, j| self.sigma(&g.block(j, i));
        let (b00, b01, b10, b11) = (b(0, 0), b(0, 1), b(1, 0), b(1, 1));
        Mat::blocks([[&b00, &b01], [&b10, &b11]]).unwrap()
    }

    pub fn omega(&self, o: Omega) -> Mat {
        let z = Mat::zero(self.k);
        let id = Mat::identity(self.k);
        let low = Mat::scalar(self.k, Q::from_integer(o.lower().into()));
        Mat::blocks([[&z, &id], [&low, &z]]).unwrap()
    }

    /// σ(g)ᵗΩg − Ω.
    pub fn group_defect(&self, g: &Mat, o: Omega) -> Result<Mat, RepError> {
        self.check(g, 2 * self.k)?;
        let om = self.omega(o);
        Ok(self.sigma_t(g).mul(&om).mul(g).sub(&om))
    }

    /// σ(ξ)ᵗΩ + Ωξ.
    pub fn lie_defect(&self, xi: &Mat, o: Omega) -> Result<Mat, RepError> {
        self.check(xi, 2 * self.k)?;
        let om = self.omega(o);
        Ok(self.sigma_t(xi).mul(&om).add(&om.mul(xi)))
    }

    pub fn group_membership(&self, g: &Mat) -> Result<Membership, RepError> {
        Ok(Membership {
            symplectic: self.group_defect(g, Omega::Symplectic)?.is_zero(),
            orthogonal: self.group_defect(g, Omega::Split)?.is_zero(),
        })
    }

    pub fn lie_membership(&self, xi: &Mat) -> Result<Membership, RepError> {
        Ok(Membership {
            symplectic: self.lie_defect(xi, Omega::Symplectic)?.is_zero(),
            orthogonal: self.lie_defect(xi, Omega::Split)?.is_zero(),
        })
    }

    /// The block description: ξ = [[x, z], [y, −σ(x)]] with y, z in A^σ
    /// (symplectic) or in A^{−σ} (orthogonal).
    pub fn lie_block_pattern(&self, xi: &Mat) -> Result<Membership, RepError> {
        self.check(xi, 2 * self.k)?;
        let (x, z, y, w) = (xi.block(0, 0), xi.block(0, 1), xi.block(1, 0), xi.block(1, 1));
        let diag = w == self.sigma(&x).scale(&-Q::one());
        Ok(Membership {
            symplectic: diag && self.is_symmetric(&y) && self.is_symmetric(&z),
            orthogonal: diag && self.is_antisymmetric(&y) && self.is_antisymmetric(&z),
        })
    }

    /// First-order group test on g·(1 + εξ) with ε² = 0. The ε⁰ part is
    /// g's own defect; the ε¹ part must vanish as well.
    pub fn linearized_membership(&self, g: &Mat, xi: &Mat, o: Omega) -> Result<bool, RepError> {
        self.check(g, 2 * self.k)?;
        self.check(xi, 2 * self.k)?;
        let h = Dual { re: g.clone(), eps: g.mul(xi) };
        let ht = Dual { re: self.sigma_t(&h.re), eps: self.sigma_t(&h.eps) };
        let om = Dual { re: self.omega(o), eps: Mat::zero(2 * self.k) };
        let d = ht.mul(&om).mul(&h);
        Ok(d.re == om.re && d.eps.is_zero())
    }

    /// ω(x, y) = σ(x)ᵗ Ω y for column vectors of length two over the ambient algebra.
    pub fn pairing(&self, x: &[Mat; 2], y: &[Mat; 2], o: Omega) -> Result<Mat, RepError> {
        for m in x.iter().chain(y) {
            self.check(m, self.k)?;
        }
        let low = Q::from_integer(o.lower().into());
        Ok(self.sigma(&x[0]).mul(&y[1]).add(&self.sigma(&x[1]).mul(&y[0]).scale(&low)))
    }

    pub fn form_checks(&self, x: &[Mat; 2], y: &[Mat; 2], o: Omega) -> Result<FormRecord, RepError> {
        let isotropic = self.pairing(x, x, o)?.is_zero();
        let pairing = self.pairing(x, y, o)?;
        let normalized = isotropic && pairing == Mat::identity(self.k);
        Ok(FormRecord { isotropic, pairing, normalized })
    }
}

/// Matrices over ℚ[ε]/(ε²).
struct Dual {
    re: Mat,
    eps: Mat,
}

impl Dual {
    fn mul(&self, o: &Dual) -> Dual {
        Dual { re: self.re.mul(&o.re), eps: self.re.mul(&o.eps).add(&self.eps.mul(&o.re)) }
    }
}

/// A random σ-symmetric (sign 1) or σ-antisymmetric (sign −1) matrix.
pub fn random_graded(ctx: &InvolutiveContext, sign: i64, rng: &mut impl Rng) -> Mat {
    let a = Mat::random(ctx.k, ENTRY_BOUND, rng);
    a.add(&ctx.sigma(&a).scale(&Q::from_integer(sign.into())))
}
