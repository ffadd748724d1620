//! Combinatorial marked surfaces: punctures, edges, faces and fan orders.
//!
//! A face word is written in composition order, so `face T +a3 +a2 +a1`
//! traverses `a1` first. Fans list edge-ends in the order they cross the
//! decoration curve of their puncture.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::sync::Arc;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EndKind {
    Tail,
    Head,
}

impl EndKind {
    fn suffix(self) -> &'static str {
        match self {
            EndKind::Tail => "t",
            EndKind::Head => "h",
        }
    }
}

/// One end of an edge, as it appears in a fan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct End {
    pub edge: usize,
    pub kind: EndKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub id: String,
    pub tail: usize,
    pub head: usize,
}

/// An edge traversed forwards (`+e`) or backwards (`-e`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SignedEdge {
    pub edge: usize,
    pub forward: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Face {
    pub id: String,
    /// Boundary word as written, leftmost factor applied last.
    pub word: Vec<SignedEdge>,
}

impl Face {
    /// The boundary in the order it is traversed.
    pub fn traversal(&self) -> impl Iterator<Item = SignedEdge> + '_ {
        self.word.iter().rev().copied()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkedSurface {
    pub name: String,
    pub punctures: Vec<String>,
    pub edges: Vec<Edge>,
    pub faces: Vec<Face>,
    /// Indexed by puncture.
    pub fans: Vec<Vec<End>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SurfaceError {
    #[error("line {line}: syntax error: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: undeclared {kind} `{id}`")]
    Undeclared { line: usize, kind: &'static str, id: String },
    #[error("line {line}: duplicate {kind} `{id}`")]
    Duplicate { line: usize, kind: &'static str, id: String },
    #[error("unknown {kind} `{id}`")]
    Unknown { kind: &'static str, id: String },
    #[error("flip: {0}")]
    Flip(String),
    #[error("symmetry: {0}")]
    Symmetry(String),
}

fn valid_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'' || c == '.')
}

fn valid_edge_ident(s: &str) -> bool {
    valid_ident(s) && s.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_')
}

impl MarkedSurface {
    pub fn parse(text: &str) -> Result<MarkedSurface, SurfaceError> {
        let mut name = None;
        let mut punctures: Vec<String> = Vec::new();
        let mut pindex: HashMap<String, usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut eindex: HashMap<String, usize> = HashMap::new();
        let mut faces: Vec<Face> = Vec::new();
        let mut fids: HashSet<String> = HashSet::new();
        let mut fans: BTreeMap<usize, Vec<End>> = BTreeMap::new();

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let syntax = |msg: &str| SurfaceError::Syntax { line, msg: msg.to_string() };
            let mut toks = content.split_whitespace();
            let kw = toks.next().unwrap();
            let rest: Vec<&str> = toks.collect();
            match kw {
                "surface" => {
                    if name.is_some() {
                        return Err(syntax("second `surface` line"));
                    }
                    if rest.len() != 1 || !valid_ident(rest[0]) {
                        return Err(syntax("expected `surface <name>`"));
                    }
                    name = Some(rest[0].to_string());
                }
                "puncture" => {
                    if rest.is_empty() {
                        return Err(syntax("expected at least one puncture id"));
                    }
                    for id in rest {
                        if !valid_ident(id) {
                            return Err(syntax(&format!("bad puncture id `{id}`")));
                        }
                        if pindex.contains_key(id) {
                            return Err(SurfaceError::Duplicate { line, kind: "puncture", id: id.into() });
                        }
                        pindex.insert(id.to_string(), punctures.len());
                        punctures.push(id.to_string());
                    }
                }
                "edge" => {
                    if rest.len() != 3 {
                        return Err(syntax("expected `edge <id> <tail> <head>`"));
                    }
                    if !valid_edge_ident(rest[0]) {
                        return Err(syntax(&format!("bad edge id `{}`", rest[0])));
                    }
                    if eindex.contains_key(rest[0]) {
                        return Err(SurfaceError::Duplicate { line, kind: "edge", id: rest[0].into() });
                    }
                    let look = |id: &str| {
                        pindex.get(id).copied().ok_or(SurfaceError::Undeclared {
                            line,
                            kind: "puncture",
                            id: id.into(),
                        })
                    };
                    let (tail, head) = (look(rest[1])?, look(rest[2])?);
                    eindex.insert(rest[0].to_string(), edges.len());
                    edges.push(Edge { id: rest[0].to_string(), tail, head });
                }
                "face" => {
                    if rest.len() < 2 {
                        return Err(syntax("expected `face <id> <signed-edge> ...`"));
                    }
                    if !valid_ident(rest[0]) {
                        return Err(syntax(&format!("bad face id `{}`", rest[0])));
                    }
                    if !fids.insert(rest[0].to_string()) {
                        return Err(SurfaceError::Duplicate { line, kind: "face", id: rest[0].into() });
                    }
                    let mut word = Vec::new();
                    for tok in &rest[1..] {
                        let (forward, id) = match tok.split_at(1) {
                            ("+", id) => (true, id),
                            ("-", id) => (false, id),
                            _ => return Err(syntax(&format!("signed edge `{tok}` needs + or -"))),
                        };
                        let edge =
                            *eindex.get(id).ok_or(SurfaceError::Undeclared { line, kind: "edge", id: id.into() })?;
                        word.push(SignedEdge { edge, forward });
                    }
                    faces.push(Face { id: rest[0].to_string(), word });
                }
                "fan" => {
                    let (p, ends): (&str, &[&str]) = match rest.first() {
                        Some(t) if t.len() > 1 && t.ends_with(':') => (&t[..t.len() - 1], &rest[1..]),
                        Some(t) if rest.get(1) == Some(&":") => (t, &rest[2..]),
                        _ => return Err(syntax("expected `fan <puncture>: <end> ...`")),
                    };
                    let pi = *pindex.get(p).ok_or(SurfaceError::Undeclared { line, kind: "puncture", id: p.into() })?;
                    if fans.contains_key(&pi) {
                        return Err(SurfaceError::Duplicate { line, kind: "fan", id: p.into() });
                    }
                    let mut list = Vec::new();
                    for tok in ends {
                        let (id, kind) = match tok.rsplit_once('.') {
                            Some((id, "t")) => (id, EndKind::Tail),
                            Some((id, "h")) => (id, EndKind::Head),
                            _ => return Err(syntax(&format!("edge end `{tok}` must end in .t or .h"))),
                        };
                        let edge =
                            *eindex.get(id).ok_or(SurfaceError::Undeclared { line, kind: "edge", id: id.into() })?;
                        list.push(End { edge, kind });
                    }
                    fans.insert(pi, list);
                }
                other => return Err(syntax(&format!("unknown keyword `{other}`"))),
            }
        }
        let name = name.ok_or(SurfaceError::Syntax { line: 1, msg: "missing `surface` line".into() })?;
        let fans = (0..punctures.len()).map(|p| fans.remove(&p).unwrap_or_default()).collect();
        Ok(MarkedSurface { name, punctures, edges, faces, fans })
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        writeln!(out, "surface {}", self.name).unwrap();
        writeln!(out, "puncture {}", self.punctures.join(" ")).unwrap();
        for e in &self.edges {
            writeln!(out, "edge {} {} {}", e.id, self.punctures[e.tail], self.punctures[e.head]).unwrap();
        }
        for f in &self.faces {
            write!(out, "face {}", f.id).unwrap();
            for s in &f.word {
                let sign = if s.forward { '+' } else { '-' };
                write!(out, " {sign}{}", self.edges[s.edge].id).unwrap();
            }
            out.push('\n');
        }
        for (p, fan) in self.fans.iter().enumerate() {
            write!(out, "fan {}:", self.punctures[p]).unwrap();
            for end in fan {
                write!(out, " {}.{}", self.edges[end.edge].id, end.kind.suffix()).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn puncture_index(&self, id: &str) -> Result<usize, SurfaceError> {
        self.punctures
            .iter()
            .position(|p| p == id)
            .ok_or_else(|| SurfaceError::Unknown { kind: "puncture", id: id.into() })
    }

    pub fn edge_index(&self, id: &str) -> Result<usize, SurfaceError> {
        self.edges.iter().position(|e| e.id == id).ok_or_else(|| SurfaceError::Unknown { kind: "edge", id: id.into() })
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.punctures.len() as i64 - self.edges.len() as i64 + self.faces.len() as i64
    }

    /// Puncture where an edge-end sits.
    pub fn end_puncture(&self, end: End) -> usize {
        let e = &self.edges[end.edge];
        match end.kind {
            EndKind::Tail => e.tail,
            EndKind::Head => e.head,
        }
    }

    /// Position of an edge-end in its fan.
    pub fn fan_position(&self, end: End) -> Option<usize> {
        self.fans[self.end_puncture(end)].iter().position(|&x| x == end)
    }

    /// Start and end puncture of a signed traversal.
    pub fn signed_endpoints(&self, s: SignedEdge) -> (usize, usize) {
        let e = &self.edges[s.edge];
        if s.forward {
            (e.tail, e.head)
        } else {
            (e.head, e.tail)
        }
    }

    /// The edge-ends a signed traversal leaves from and arrives at.
    pub fn signed_ends(&self, s: SignedEdge) -> (End, End) {
        let t = End { edge: s.edge, kind: EndKind::Tail };
        let h = End { edge: s.edge, kind: EndKind::Head };
        if s.forward {
            (t, h)
        } else {
            (h, t)
        }
    }

    /// Number of occurrences of each edge across all face words.
    pub fn edge_multiplicities(&self) -> Vec<usize> {
        let mut m = vec![0; self.edges.len()];
        for f in &self.faces {
            for s in &f.word {
                m[s.edge] += 1;
            }
        }
        m
    }

    pub fn is_internal(&self, edge: usize) -> bool {
        self.edge_multiplicities()[edge] == 2
    }

    /// Corners of every face as (arriving end, leaving end) pairs.
    pub fn corners(&self) -> Vec<(usize, End, End)> {
        let mut out = Vec::new();
        for (fi, f) in self.faces.iter().enumerate() {
            let t: Vec<SignedEdge> = f.traversal().collect();
            for k in 0..t.len() {
                let arriving = self.signed_ends(t[k]).1;
                let leaving = self.signed_ends(t[(k + 1) % t.len()]).0;
                out.push((fi, arriving, leaving));
            }
        }
        out
    }

    /// Fans forced by the corner structure: at every face corner the
    /// leaving end sits immediately before the arriving end.
    pub fn derive_fans(&self) -> Result<Vec<Vec<End>>, String> {
        let mut next: HashMap<End, End> = HashMap::new();
        let mut has_prev: HashSet<End> = HashSet::new();
        for (_, a, l) in self.corners() {
            if next.insert(l, a).is_some() || !has_prev.insert(a) {
                return Err(format!("edge end {} used by two corners", self.end_label(l)));
            }
        }
        let mut fans = vec![Vec::new(); self.punctures.len()];
        for ei in 0..self.edges.len() {
            for kind in [EndKind::Tail, EndKind::Head] {
                let start = End { edge: ei, kind };
                if has_prev.contains(&start) {
                    continue;
                }
                let p = self.end_puncture(start);
                if !fans[p].is_empty() {
                    return Err(format!("puncture {} has more than one corner chain", self.punctures[p]));
                }
                let mut cur = start;
                fans[p].push(cur);
                while let Some(&n) = next.get(&cur) {
                    cur = n;
                    fans[p].push(cur);
                }
            }
        }
        let total: usize = fans.iter().map(Vec::len).sum();
        if total != 2 * self.edges.len() {
            return Err("corner chains are cyclic somewhere (internal puncture?)".into());
        }
        Ok(fans)
    }

    pub fn end_label(&self, end: End) -> String {
        format!("{}.{}", self.edges[end.edge].id, end.kind.suffix())
    }

    pub fn validate(&self) -> ValidationReport {
        let mut rep = ValidationReport::default();
        // fan coverage
        let mut seen: HashMap<End, usize> = HashMap::new();
        for (p, fan) in self.fans.iter().enumerate() {
            for &end in fan {
                *seen.entry(end).or_default() += 1;
                if self.end_puncture(end) != p {
                    rep.fail(
                        "fan coverage",
                        format!("{} listed in the fan of {}", self.end_label(end), self.punctures[p]),
                    );
                }
            }
        }
        for ei in 0..self.edges.len() {
            for kind in [EndKind::Tail, EndKind::Head] {
                let end = End { edge: ei, kind };
                match seen.get(&end).copied().unwrap_or(0) {
                    1 => {}
                    0 => rep.fail("fan coverage", format!("{} missing from its fan", self.end_label(end))),
                    k => rep.fail("fan coverage", format!("{} appears {k} times", self.end_label(end))),
                }
            }
        }
        // face incidence and orientation
        let mut signs: Vec<Vec<bool>> = vec![Vec::new(); self.edges.len()];
        for f in &self.faces {
            for s in &f.word {
                signs[s.edge].push(s.forward);
            }
        }
        for (ei, sg) in signs.iter().enumerate() {
            let id = &self.edges[ei].id;
            match sg.len() {
                1 => {}
                2 if sg[0] != sg[1] => {}
                2 => rep.fail("face orientation", format!("edge {id} traversed twice in the same direction")),
                k => rep.fail("face incidence", format!("edge {id} occurs {k} times in face words")),
            }
        }
        // composability
        for f in &self.faces {
            let t: Vec<SignedEdge> = f.traversal().collect();
            for k in 0..t.len() {
                let (_, end) = self.signed_endpoints(t[k]);
                let (start, _) = self.signed_endpoints(t[(k + 1) % t.len()]);
                if end != start {
                    rep.fail(
                        "face composability",
                        format!(
                            "face {}: {} does not continue into {}",
                            f.id,
                            self.edges[t[k].edge].id,
                            self.edges[t[(k + 1) % t.len()].edge].id
                        ),
                    );
                }
            }
        }
        let chi = self.euler_characteristic();
        if self.faces.is_empty() {
            rep.fail("faces", "surface has no faces".into());
        }
        if chi > 1 {
            rep.fail("euler characteristic", format!("chi = {chi} > 1 (closed surface)"));
        }
        if chi == 1 && self.punctures.len() <= 2 {
            rep.fail("degenerate", format!("disk with {} punctures is excluded", self.punctures.len()));
        }
        // bigon-like pairs
        let mut pairs: HashMap<(usize, usize), Vec<&str>> = HashMap::new();
        for e in &self.edges {
            let key = (e.tail.min(e.head), e.tail.max(e.head));
            pairs.entry(key).or_default().push(&e.id);
        }
        let mut flagged: Vec<String> = pairs.values().filter(|v| v.len() > 1).map(|v| v.join(",")).collect();
        flagged.sort();
        for f in flagged {
            rep.warnings.push(format!("fan-order-sensitive: edges {f} share both endpoints"));
        }
        rep
    }

    /// The quadrilateral around an internal diagonal, with its corners
    /// named as in the flip picture: the diagonal runs from corner 1 to
    /// corner 3, and the new one will join 2 and 4.
    pub fn flip_quadrilateral(&self, diag: usize) -> Result<Quadrilateral, SurfaceError> {
        let err = |m: String| Err(SurfaceError::Flip(m));
        let did = &self.edges[diag].id;
        let holders: Vec<(usize, usize)> = self
            .faces
            .iter()
            .enumerate()
            .flat_map(|(fi, f)| f.word.iter().enumerate().filter(|(_, s)| s.edge == diag).map(move |(k, _)| (fi, k)))
            .collect();
        if holders.len() != 2 {
            return err(format!("edge {did} is not internal"));
        }
        let f1 = holders.iter().find(|&&(fi, k)| self.faces[fi].word[k].forward).unwrap().0;
        let f2 = holders.iter().find(|&&(fi, k)| !self.faces[fi].word[k].forward).unwrap().0;
        if f1 == f2 {
            return err(format!("edge {did} bounds the same face twice"));
        }
        if self.faces[f1].word.len() != 3 || self.faces[f2].word.len() != 3 {
            return err(format!("faces next to {did} are not triangles"));
        }
        // traversal of f1 starting at +d: d (a->c), x (c->b), y (b->a)
        let rot = |fi: usize| -> Vec<SignedEdge> {
            let t: Vec<SignedEdge> = self.faces[fi].traversal().collect();
            let k = t.iter().position(|s| s.edge == diag).unwrap();
            (0..3).map(|i| t[(k + i) % 3]).collect()
        };
        let (t1, t2) = (rot(f1), rot(f2));
        let (x, y, u, v) = (t1[1], t1[2], t2[1], t2[2]);
        if [x.edge, y.edge].iter().any(|e| *e == u.edge || *e == v.edge) {
            return err(format!("quadrilateral around {did} is degenerate"));
        }
        let b = self.signed_endpoints(x).1;
        let e = self.signed_endpoints(u).1;
        let a = self.edges[diag].tail;
        let c = self.edges[diag].head;
        Ok(Quadrilateral { diagonal: diag, f1, f2, x, y, u, v, corners: [a, e, c, b] })
    }

    /// Replace an internal diagonal by the other diagonal of its quadrilateral.
    pub fn flip_triangulation(&self, diag: usize) -> Result<MarkedSurface, SurfaceError> {
        let err = |m: String| Err(SurfaceError::Flip(m));
        let Quadrilateral { f1, f2, x, y, u, v, corners: [_, e, _, b], .. } = self.flip_quadrilateral(diag)?;

        let mut out = self.clone();
        let new_id = format!("d_{}_{}", self.punctures[e], self.punctures[b]);
        if self.edges.iter().any(|ed| ed.id == new_id) {
            return err(format!("new diagonal name {new_id} already in use"));
        }
        out.edges[diag] = Edge { id: new_id, tail: e, head: b };
        let g = SignedEdge { edge: diag, forward: true };
        let gr = SignedEdge { edge: diag, forward: false };
        // written order is reversed traversal
        out.faces[f1].word = vec![g, u, y];
        out.faces[f2].word = vec![v, gr, x];

        for fan in out.fans.iter_mut() {
            fan.retain(|end| end.edge != diag);
        }
        let insert = |fans: &mut Vec<Vec<End>>, p: usize, a: End, c: End, new: End| -> Result<(), SurfaceError> {
            let fan = &mut fans[p];
            let i = fan.iter().position(|&z| z == a);
            let j = fan.iter().position(|&z| z == c);
            match (i, j) {
                (Some(i), Some(j)) if i.abs_diff(j) == 1 => {
                    fan.insert(i.max(j), new);
                    Ok(())
                }
                _ => Err(SurfaceError::Flip("quadrilateral corner ends are not adjacent in the fan".into())),
            }
        };
        let x_end_at_b = self.signed_ends(x).1;
        let y_end_at_b = self.signed_ends(y).0;
        let u_end_at_e = self.signed_ends(u).1;
        let v_end_at_e = self.signed_ends(v).0;
        insert(&mut out.fans, b, x_end_at_b, y_end_at_b, End { edge: diag, kind: EndKind::Head })?;
        insert(&mut out.fans, e, u_end_at_e, v_end_at_e, End { edge: diag, kind: EndKind::Tail })?;
        Ok(out)
    }
}

impl fmt::Display for MarkedSurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub failures: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    fn fail(&mut self, code: &str, msg: String) {
        self.failures.push((code.to_string(), msg));
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn has(&self, code: &str) -> bool {
        self.failures.iter().any(|(c, _)| c == code)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            writeln!(f, "validation: pass")?;
        } else {
            writeln!(f, "validation: fail ({} violations)", self.failures.len())?;
        }
        for (c, m) in &self.failures {
            writeln!(f, "  {c}: {m}")?;
        }
        for w in &self.warnings {
            writeln!(f, "  warning: {w}")?;
        }
        Ok(())
    }
}

/// The two triangles around a diagonal. Traversing `f1` from the
/// diagonal meets `x` then `y`; traversing `f2` from it meets `u` then `v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Quadrilateral {
    pub diagonal: usize,
    pub f1: usize,
    pub f2: usize,
    pub x: SignedEdge,
    pub y: SignedEdge,
    pub u: SignedEdge,
    pub v: SignedEdge,
    /// Punctures at corners 1, 2, 3, 4.
    pub corners: [usize; 4],
}

/// A combinatorial diffeomorphism between two marked surfaces.
#[derive(Clone, Debug)]
pub struct SurfaceSymmetry {
    pub source: Arc<MarkedSurface>,
    pub target: Arc<MarkedSurface>,
    pub punctures: Vec<usize>,
    /// Image edge and whether the reference orientation is kept.
    pub edges: Vec<SignedEdge>,
    pub faces: Vec<usize>,
}

impl SurfaceSymmetry {
    pub fn identity(s: Arc<MarkedSurface>) -> SurfaceSymmetry {
        SurfaceSymmetry {
            punctures: (0..s.punctures.len()).collect(),
            edges: (0..s.edges.len()).map(|edge| SignedEdge { edge, forward: true }).collect(),
            faces: (0..s.faces.len()).collect(),
            target: s.clone(),
            source: s,
        }
    }

    /// Find the symmetry with the given puncture map, matching edges by
    /// their endpoints and faces by their words. Ambiguous edge matches are
    /// resolved by backtracking against the face and fan checks.
    pub fn search(
        source: Arc<MarkedSurface>,
        target: Arc<MarkedSurface>,
        punctures: Vec<usize>,
    ) -> Result<SurfaceSymmetry, SurfaceError> {
        let ne = source.edges.len();
        if ne != target.edges.len()
            || source.faces.len() != target.faces.len()
            || punctures.len() != source.punctures.len()
        {
            return Err(SurfaceError::Symmetry("cell counts differ".into()));
        }
        let mut options: Vec<Vec<SignedEdge>> = Vec::new();
        for e in &source.edges {
            let (t, h) = (punctures[e.tail], punctures[e.head]);
            let mut o = Vec::new();
            for (ti, te) in target.edges.iter().enumerate() {
                if te.tail == t && te.head == h {
                    o.push(SignedEdge { edge: ti, forward: true });
                }
                if te.tail == h && te.head == t && t != h {
                    o.push(SignedEdge { edge: ti, forward: false });
                }
                if te.tail == h && te.head == t && t == h {
                    o.push(SignedEdge { edge: ti, forward: false });
                }
            }
            options.push(o);
        }
        let mut chosen = Vec::with_capacity(ne);
        let mut used = vec![false; ne];
        fn go(
            k: usize,
            options: &[Vec<SignedEdge>],
            chosen: &mut Vec<SignedEdge>,
            used: &mut [bool],
            build: &dyn Fn(&[SignedEdge]) -> Option<SurfaceSymmetry>,
        ) -> Option<SurfaceSymmetry> {
            if k == options.len() {
                return build(chosen);
            }
            for &o in &options[k] {
                if used[o.edge] {
                    continue;
                }
                used[o.edge] = true;
                chosen.push(o);
                if let Some(s) = go(k + 1, options, chosen, used, build) {
                    return Some(s);
                }
                chosen.pop();
                used[o.edge] = false;
            }
            None
        }
        let build = |edges: &[SignedEdge]| -> Option<SurfaceSymmetry> {
            let mut faces = Vec::new();
            for f in &source.faces {
                let img = map_word(&f.word, edges);
                let fi = target.faces.iter().position(|g| cyclic_equal(&g.word, &img))?;
                faces.push(fi);
            }
            let s = SurfaceSymmetry {
                source: source.clone(),
                target: target.clone(),
                punctures: punctures.clone(),
                edges: edges.to_vec(),
                faces,
            };
            s.check().ok().map(|_| s)
        };
        go(0, &options, &mut chosen, &mut used, &build)
            .ok_or_else(|| SurfaceError::Symmetry("no symmetry with this puncture map".into()))
    }

    /// Verify incidence, face words and fan orders are preserved.
    pub fn check(&self) -> Result<(), SurfaceError> {
        let (s, t) = (&*self.source, &*self.target);
        let bad = |m: String| Err(SurfaceError::Symmetry(m));
        let mut hit = vec![false; t.edges.len()];
        for (ei, e) in s.edges.iter().enumerate() {
            let img = self.edges[ei];
            if hit[img.edge] {
                return bad("edge map is not injective".into());
            }
            hit[img.edge] = true;
            let (a, b) = t.signed_endpoints(img);
            if a != self.punctures[e.tail] || b != self.punctures[e.head] {
                return bad(format!("edge {} changes incidence", e.id));
            }
        }
        for (fi, f) in s.faces.iter().enumerate() {
            if !cyclic_equal(&t.faces[self.faces[fi]].word, &map_word(&f.word, &self.edges)) {
                return bad(format!("face {} is not carried to a face", f.id));
            }
        }
        for (p, fan) in s.fans.iter().enumerate() {
            let img: Vec<End> = fan.iter().map(|&end| self.map_end(end)).collect();
            if img != t.fans[self.punctures[p]] {
                return bad(format!("fan of {} is not preserved", s.punctures[p]));
            }
        }
        Ok(())
    }

    pub fn map_end(&self, end: End) -> End {
        let img = self.edges[end.edge];
        let kind = match (end.kind, img.forward) {
            (k, true) => k,
            (EndKind::Tail, false) => EndKind::Head,
            (EndKind::Head, false) => EndKind::Tail,
        };
        End { edge: img.edge, kind }
    }
}

fn map_word(word: &[SignedEdge], edges: &[SignedEdge]) -> Vec<SignedEdge> {
    word.iter()
        .map(|s| {
            let img = edges[s.edge];
            SignedEdge { edge: img.edge, forward: img.forward == s.forward }
        })
        .collect()
}

fn cyclic_equal(a: &[SignedEdge], b: &[SignedEdge]) -> bool {
    a.len() == b.len() && (0..a.len().max(1)).any(|r| (0..a.len()).all(|i| a[(i + r) % a.len()] == b[i]))
}

/// Bundled fixture surfaces.
pub mod fixtures {
    use super::MarkedSurface;

    pub const DISK3: &str = include_str!("../fixtures/disk3.surf");
    pub const DISK4: &str = include_str!("../fixtures/disk4.surf");
    pub const DISK5: &str = include_str!("../fixtures/disk5.surf");
    pub const ANNULUS11: &str = include_str!("../fixtures/annulus11.surf");
    pub const THREE_ARCS: &str = include_str!("../fixtures/three_arcs.surf");

    pub fn disk3() -> MarkedSurface {
        MarkedSurface::parse(DISK3).unwrap()
    }
    pub fn disk4() -> MarkedSurface {
        MarkedSurface::parse(DISK4).unwrap()
    }
    pub fn disk5() -> MarkedSurface {
        MarkedSurface::parse(DISK5).unwrap()
    }
    pub fn annulus11() -> MarkedSurface {
        MarkedSurface::parse(ANNULUS11).unwrap()
    }
    pub fn three_arcs() -> MarkedSurface {
        MarkedSurface::parse(THREE_ARCS).unwrap()
    }

    /// The four surfaces the verification suites run over.
    pub fn all() -> Vec<MarkedSurface> {
        vec![disk3(), disk4(), disk5(), annulus11()]
    }
}
