//! The n-sheeted ramified covering Σ → S built from an ideal triangulation.
//!
//! Each triangle carries a lattice of white and black points. Zigzag paths
//! through them bound cells, and each cell carries one lifted marked point.
//! Σ is recorded as a [`MarkedSurface`] whose edges are the arcs dual to the
//! simple segments. For n = 2 the small triangles of each base face are
//! merged into a single hexagon.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_traits::One;

use crate::algebra::{Alg, Element, Letter, Lin, Tensor2, Word, Q};
use crate::surface::{Edge, Face, MarkedSurface, SignedEdge, SurfaceSymmetry};

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum CoveringError {
    #[error("face `{0}` is not a triangle")]
    NonTriangular(String),
    #[error("face `{0}` uses one edge twice")]
    SelfFolded(String),
    #[error("the base surface has an internal puncture or broken corners: {0}")]
    InternalPuncture(String),
    #[error("sheet count {0} is below 2")]
    TooFewSheets(usize),
    #[error("this operation needs a double cover, got n = {0}")]
    NotDouble(usize),
    #[error("inconsistent gluing: {0}")]
    Inconsistent(String),
}

/// Barycentric lattice point (weights of the three corners).
pub type Point = [i32; 3];

/// A vertex of the white/black graph of one triangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    White(usize),
    Black(usize),
}

/// One zigzag path and the index in 0..3 of the corner inside its cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Zigzag {
    pub nodes: Vec<Node>,
    pub corner: usize,
}

/// The white/black graph and zigzags inside one triangle.
#[derive(Clone, Debug)]
pub struct Scaffold {
    pub m: i32,
    /// Lower-left corner of each white's down-triangle.
    pub whites: Vec<Point>,
    pub blacks: Vec<Point>,
    /// Black neighbours of each white, counter-clockwise.
    pub white_nbrs: Vec<[usize; 3]>,
    /// White neighbours of each black, counter-clockwise.
    pub black_nbrs: Vec<Vec<usize>>,
    pub zigzags: Vec<Zigzag>,
    /// Which zigzag runs along each directed segment.
    pub traversal: HashMap<(Node, Node), usize>,
}

impl Scaffold {
    pub fn new(n: usize) -> Scaffold {
        let m = n as i32 + 1;
        let mut blacks = Vec::new();
        let mut bindex = HashMap::new();
        for i in 0..=m {
            for j in 0..=(m - i) {
                let p = [i, j, m - i - j];
                if p.iter().filter(|&&c| c == 0).count() < 2 {
                    bindex.insert(p, blacks.len());
                    blacks.push(p);
                }
            }
        }
        let mut whites = Vec::new();
        for i in 0..=(m - 2) {
            for j in 0..=(m - 2 - i) {
                whites.push([i, j, m - 2 - i - j]);
            }
        }
        let white_nbrs: Vec<[usize; 3]> = whites
            .iter()
            .map(|&[i, j, k]| [[i, j + 1, k + 1], [i + 1, j, k + 1], [i + 1, j + 1, k]].map(|p| bindex[&p]))
            .collect();
        let widx: HashMap<Point, usize> = whites.iter().enumerate().map(|(w, &p)| (p, w)).collect();
        // Seen from a black, the white that uses it as neighbour k lies at
        // angle 90 + 120 (k + 1) degrees, counting k from zero.
        let black_nbrs: Vec<Vec<usize>> = blacks
            .iter()
            .map(|&[i, j, k]| {
                [[i - 1, j - 1, k], [i, j - 1, k - 1], [i - 1, j, k - 1]]
                    .iter()
                    .filter_map(|p| widx.get(p).copied())
                    .collect()
            })
            .collect();
        let mut sc =
            Scaffold { m, whites, blacks, white_nbrs, black_nbrs, zigzags: Vec::new(), traversal: HashMap::new() };
        let starts: Vec<usize> = {
            let mut v: Vec<usize> = (0..sc.blacks.len()).filter(|&b| sc.is_edge_black(b)).collect();
            v.sort_by_key(|&b| sc.perimeter(b));
            v
        };
        for s in starts {
            let z = sc.walk(s);
            let id = sc.zigzags.len();
            for w in z.nodes.windows(2) {
                sc.traversal.insert((w[0], w[1]), id);
            }
            sc.zigzags.push(z);
        }
        sc
    }

    pub fn is_edge_black(&self, b: usize) -> bool {
        self.blacks[b].contains(&0)
    }

    pub fn interior_blacks(&self) -> usize {
        (0..self.blacks.len()).filter(|&b| !self.is_edge_black(b)).count()
    }

    pub fn edge_blacks(&self) -> usize {
        (0..self.blacks.len()).filter(|&b| self.is_edge_black(b)).count()
    }

    /// Position along the boundary, counter-clockwise from corner 0.
    fn perimeter(&self, b: usize) -> i32 {
        let [i, j, k] = self.blacks[b];
        if k == 0 {
            j
        } else if i == 0 {
            self.m + k
        } else {
            2 * self.m + i
        }
    }

    /// Side (0: corner 0 to 1, 1: 1 to 2, 2: 2 to 0) and distance from the
    /// side's first corner.
    pub fn side_of(&self, b: usize) -> (usize, i32) {
        let p = self.perimeter(b);
        ((p / self.m) as usize, p % self.m)
    }

    fn walk(&self, start: usize) -> Zigzag {
        let first = self.black_nbrs[start][0];
        let mut nodes = vec![Node::Black(start), Node::White(first)];
        loop {
            let (prev, cur) = (nodes[nodes.len() - 2], nodes[nodes.len() - 1]);
            match (prev, cur) {
                (Node::Black(b), Node::White(w)) => {
                    // Turn right: the next neighbour counter-clockwise.
                    let k = self.white_nbrs[w].iter().position(|&x| x == b).unwrap();
                    nodes.push(Node::Black(self.white_nbrs[w][(k + 1) % 3]));
                }
                (Node::White(w), Node::Black(b)) => {
                    if self.is_edge_black(b) {
                        break;
                    }
                    // Turn left: the next neighbour clockwise.
                    let k = self.black_nbrs[b].iter().position(|&x| x == w).unwrap();
                    nodes.push(Node::White(self.black_nbrs[b][(k + 2) % 3]));
                }
                _ => unreachable!("graph is bipartite"),
            }
        }
        let (Node::Black(s), Node::Black(e)) = (nodes[0], nodes[nodes.len() - 1]) else { unreachable!() };
        // The cell lies to the right, so its boundary runs clockwise along
        // the triangle from the end back to the start.
        let (ps, pe) = (self.perimeter(s), self.perimeter(e));
        let span = (pe - ps).rem_euclid(3 * self.m);
        let corners: Vec<usize> =
            (0..3).filter(|c| (c * self.m - ps).rem_euclid(3 * self.m) < span).map(|c| c as usize).collect();
        assert_eq!(corners.len(), 1, "a cell must contain exactly one corner");
        Zigzag { nodes, corner: corners[0] }
    }

    fn first_last(&self, z: usize) -> (usize, usize) {
        let nodes = &self.zigzags[z].nodes;
        match (nodes[0], nodes[nodes.len() - 1]) {
            (Node::Black(s), Node::Black(e)) => (s, e),
            _ => unreachable!(),
        }
    }

    /// Zigzags that end and start at an edge black.
    pub fn at_edge_black(&self, b: usize) -> (usize, usize) {
        let ending = (0..self.zigzags.len()).find(|&z| self.first_last(z).1 == b).unwrap();
        let starting = (0..self.zigzags.len()).find(|&z| self.first_last(z).0 == b).unwrap();
        (ending, starting)
    }
}

/// Where a cover edge comes from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EdgeOrigin {
    /// The k-th lift (1-based, sheet of its base tail) of a base edge.
    Lift { base: usize, sheet: usize },
    /// An arc inside the lift of one triangle.
    Interior { face: usize },
}

/// The covering and everything recorded while building it.
#[derive(Clone, Debug)]
pub struct CoveringData {
    pub base: Arc<MarkedSurface>,
    pub n: usize,
    pub sigma: Arc<MarkedSurface>,
    pub scaffold: Scaffold,
    /// Cover puncture to base puncture.
    pub puncture_proj: Vec<usize>,
    /// Sheet (1-based) of each cover puncture.
    pub sheet: Vec<usize>,
    pub edge_origin: Vec<EdgeOrigin>,
    /// Interior black points: (base face, lattice point).
    pub ramification: Vec<(usize, Point)>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let p = self.0[x];
        if p == x {
            return x;
        }
        let r = self.find(p);
        self.0[x] = r;
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Provisional arc: endpoints are cell ids until punctures are known.
struct Arc0 {
    from_cell: usize,
    to_cell: usize,
    origin: EdgeOrigin,
    name: String,
}

pub fn build_covering(base: &MarkedSurface, n: usize) -> Result<CoveringData, CoveringError> {
    if n < 2 {
        return Err(CoveringError::TooFewSheets(n));
    }
    base.derive_fans().map_err(CoveringError::InternalPuncture)?;
    for f in &base.faces {
        if f.word.len() != 3 {
            return Err(CoveringError::NonTriangular(f.id.clone()));
        }
        let mut es: Vec<usize> = f.word.iter().map(|s| s.edge).collect();
        es.sort();
        es.dedup();
        if es.len() != 3 {
            return Err(CoveringError::SelfFolded(f.id.clone()));
        }
    }
    let sc = Scaffold::new(n);
    let nz = sc.zigzags.len();
    let nt = base.faces.len();
    let cell = |t: usize, z: usize| t * nz + z;
    let sides: Vec<Vec<SignedEdge>> = base.faces.iter().map(|f| f.traversal().collect()).collect();
    let corner_puncture = |t: usize, c: usize| base.signed_endpoints(sides[t][c]).0;

    // Edge blacks of every triangle, keyed by base edge and distance from
    // its tail. Each slot holds (triangle, ending zigzag, starting zigzag).
    type Slot = (usize, usize, usize);
    let mut edge_slots: BTreeMap<(usize, i32), Vec<Slot>> = BTreeMap::new();
    for (t, face_sides) in sides.iter().enumerate() {
        for b in (0..sc.blacks.len()).filter(|&b| sc.is_edge_black(b)) {
            let (side, d) = sc.side_of(b);
            let s = face_sides[side];
            let from_tail = if s.forward { d } else { sc.m - d };
            let (ending, starting) = sc.at_edge_black(b);
            edge_slots.entry((s.edge, from_tail)).or_default().push((t, ending, starting));
        }
    }

    let mut uf = UnionFind((0..nt * nz).collect());
    for slots in edge_slots.values() {
        if let [(t1, e1, s1), (t2, e2, s2)] = slots[..] {
            for (a, b) in [(cell(t1, e1), cell(t2, s2)), (cell(t1, s1), cell(t2, e2))] {
                let pa = corner_puncture(a / nz, sc.zigzags[a % nz].corner);
                let pb = corner_puncture(b / nz, sc.zigzags[b % nz].corner);
                if pa != pb {
                    return Err(CoveringError::Inconsistent(format!(
                        "continued cells project to {} and {}",
                        base.punctures[pa], base.punctures[pb]
                    )));
                }
                uf.union(a, b);
            }
        }
    }

    // Cover punctures in order of first appearance.
    let mut class_of: HashMap<usize, usize> = HashMap::new();
    let mut puncture_proj = Vec::new();
    for c in 0..nt * nz {
        let r = uf.find(c);
        if let std::collections::hash_map::Entry::Vacant(slot) = class_of.entry(r) {
            slot.insert(puncture_proj.len());
            puncture_proj.push(corner_puncture(c / nz, sc.zigzags[c % nz].corner));
        }
    }
    let mut cell_puncture: Vec<usize> = (0..nt * nz).map(|c| class_of[&uf.find(c)]).collect();
    for p in 0..base.punctures.len() {
        let k = puncture_proj.iter().filter(|&&x| x == p).count();
        if k != n {
            return Err(CoveringError::Inconsistent(format!("puncture {} has {k} lifts", base.punctures[p])));
        }
    }

    // Arcs: one lift per edge black slot, one interior arc per segment at an
    // interior black.
    let mut arcs: Vec<Arc0> = Vec::new();
    let mut slot_arc: HashMap<(usize, i32), usize> = HashMap::new();
    for (&(e, d), slots) in &edge_slots {
        let (t, ending, starting) = slots[0];
        // The ending zigzag's cell holds the side's first corner.
        let side_fwd = sides[t].iter().find(|s| s.edge == e).unwrap().forward;
        let (a, b) = (cell(t, ending), cell(t, starting));
        let (from_cell, to_cell) = if side_fwd { (a, b) } else { (b, a) };
        slot_arc.insert((e, d), arcs.len());
        arcs.push(Arc0 { from_cell, to_cell, origin: EdgeOrigin::Lift { base: e, sheet: 0 }, name: String::new() });
    }
    let mut seg_arc: HashMap<(usize, usize, usize), usize> = HashMap::new();
    for t in 0..nt {
        let mut k = 0;
        for b in (0..sc.blacks.len()).filter(|&b| !sc.is_edge_black(b)) {
            for &w in &sc.black_nbrs[b] {
                let z1 = sc.traversal[&(Node::White(w), Node::Black(b))];
                let z2 = sc.traversal[&(Node::Black(b), Node::White(w))];
                seg_arc.insert((t, w, b), arcs.len());
                k += 1;
                arcs.push(Arc0 {
                    from_cell: cell(t, z1),
                    to_cell: cell(t, z2),
                    origin: EdgeOrigin::Interior { face: t },
                    name: format!("{}_x{k}", base.faces[t].id),
                });
            }
        }
    }

    // Faces as traversal cycles of (arc, forward).
    let mut faces: Vec<(String, Vec<(usize, bool)>)> = Vec::new();
    for t in 0..nt {
        let fid = &base.faces[t].id;
        for (wi, nb) in sc.white_nbrs.iter().enumerate() {
            let cyc = nb
                .iter()
                .map(|&b| {
                    if sc.is_edge_black(b) {
                        let (side, d) = sc.side_of(b);
                        let s = sides[t][side];
                        let from_tail = if s.forward { d } else { sc.m - d };
                        (slot_arc[&(s.edge, from_tail)], s.forward)
                    } else {
                        (seg_arc[&(t, wi, b)], true)
                    }
                })
                .collect();
            faces.push((format!("{fid}_w{}", wi + 1), cyc));
        }
        let mut bi = 0;
        for b in (0..sc.blacks.len()).filter(|&b| !sc.is_edge_black(b)) {
            bi += 1;
            let nb = &sc.black_nbrs[b];
            let cyc = [0, 2, 1].iter().map(|&i| (seg_arc[&(t, nb[i], b)], false)).collect();
            faces.push((format!("{fid}_b{bi}"), cyc));
        }
    }

    if n == 2 {
        let interior: Vec<usize> =
            (0..arcs.len()).filter(|&a| matches!(arcs[a].origin, EdgeOrigin::Interior { .. })).collect();
        for a in interior {
            merge_along(&mut faces, a)?;
        }
        for (t, f) in faces.iter_mut().enumerate() {
            f.0 = base.faces[t].id.clone();
        }
    }

    // Sheets.
    let np = puncture_proj.len();
    let mut sheet = vec![0usize; np];
    if n == 2 {
        // Two-colour the puncture graph of the lifts; the first puncture
        // found gets colour 1.
        let mut adj = vec![Vec::new(); np];
        for a in arcs.iter().filter(|a| matches!(a.origin, EdgeOrigin::Lift { .. })) {
            let (x, y) = (cell_puncture[a.from_cell], cell_puncture[a.to_cell]);
            adj[x].push(y);
            adj[y].push(x);
        }
        for s in 0..np {
            if sheet[s] != 0 {
                continue;
            }
            sheet[s] = 1;
            let mut queue = std::collections::VecDeque::from([s]);
            while let Some(x) = queue.pop_front() {
                for &y in &adj[x] {
                    if sheet[y] == 0 {
                        sheet[y] = 3 - sheet[x];
                        queue.push_back(y);
                    } else if sheet[y] == sheet[x] {
                        return Err(CoveringError::Inconsistent("double cover is not bipartite".into()));
                    }
                }
            }
        }
        for p in 0..base.punctures.len() {
            let mut s: Vec<usize> = (0..np).filter(|&x| puncture_proj[x] == p).map(|x| sheet[x]).collect();
            s.sort();
            if s != [1, 2] {
                return Err(CoveringError::Inconsistent(format!("fiber of {} is one-coloured", base.punctures[p])));
            }
        }
    } else {
        let mut seen = vec![0usize; base.punctures.len()];
        for x in 0..np {
            seen[puncture_proj[x]] += 1;
            sheet[x] = seen[puncture_proj[x]];
        }
    }
    // Renumber punctures by (base puncture, sheet).
    let mut order: Vec<usize> = (0..np).collect();
    order.sort_by_key(|&x| (puncture_proj[x], sheet[x]));
    let mut renum = vec![0; np];
    for (new, &old) in order.iter().enumerate() {
        renum[old] = new;
    }
    for c in cell_puncture.iter_mut() {
        *c = renum[*c];
    }
    let puncture_proj: Vec<usize> = order.iter().map(|&x| puncture_proj[x]).collect();
    let sheet: Vec<usize> = order.iter().map(|&x| sheet[x]).collect();

    // Lift names and orientation; keep only arcs that survive.
    let mut flip = vec![false; arcs.len()];
    for (i, a) in arcs.iter_mut().enumerate() {
        if let EdgeOrigin::Lift { base: e, .. } = a.origin {
            let k = sheet[cell_puncture[a.from_cell]];
            a.origin = EdgeOrigin::Lift { base: e, sheet: k };
            a.name = format!("{}_{k}", base.edges[e].id);
            if n == 2 && sheet[cell_puncture[a.from_cell]] == 2 {
                flip[i] = true;
            }
        }
    }
    let keep: Vec<usize> =
        (0..arcs.len()).filter(|&a| n != 2 || matches!(arcs[a].origin, EdgeOrigin::Lift { .. })).collect();
    let mut keep_sorted = keep.clone();
    keep_sorted.sort_by_key(|&a| match arcs[a].origin {
        EdgeOrigin::Lift { base: e, sheet } => (0, e, sheet, a),
        EdgeOrigin::Interior { face } => (1, face, 0, a),
    });
    let new_index: HashMap<usize, usize> = keep_sorted.iter().enumerate().map(|(i, &a)| (a, i)).collect();
    let punctures: Vec<String> =
        (0..np).map(|x| format!("{}_{}", base.punctures[puncture_proj[x]], sheet[x])).collect();
    let edges: Vec<Edge> = keep_sorted
        .iter()
        .map(|&a| {
            let (mut t, mut h) = (cell_puncture[arcs[a].from_cell], cell_puncture[arcs[a].to_cell]);
            if flip[a] {
                std::mem::swap(&mut t, &mut h);
            }
            Edge { id: arcs[a].name.clone(), tail: t, head: h }
        })
        .collect();
    let edge_origin: Vec<EdgeOrigin> = keep_sorted.iter().map(|&a| arcs[a].origin.clone()).collect();
    let faces: Vec<Face> = faces
        .into_iter()
        .map(|(id, cyc)| {
            let mut word: Vec<SignedEdge> =
                cyc.iter().map(|&(a, fwd)| SignedEdge { edge: new_index[&a], forward: fwd != flip[a] }).collect();
            word.reverse();
            Face { id, word }
        })
        .collect();
    let mut sigma =
        MarkedSurface { name: format!("{}_cover{n}", base.name), punctures, edges, faces, fans: Vec::new() };
    sigma.fans = sigma.derive_fans().map_err(CoveringError::Inconsistent)?;
    let report = sigma.validate();
    if !report.passed() {
        return Err(CoveringError::Inconsistent(report.to_string()));
    }
    let ramification =
        (0..nt).flat_map(|t| sc.blacks.iter().filter(|p| !p.contains(&0)).map(move |&p| (t, p))).collect();
    Ok(CoveringData {
        base: Arc::new(base.clone()),
        n,
        sigma: Arc::new(sigma),
        scaffold: sc,
        puncture_proj,
        sheet,
        edge_origin,
        ramification,
    })
}

/// Merge the two faces on either side of `arc` into one.
fn merge_along(faces: &mut Vec<(String, Vec<(usize, bool)>)>, arc: usize) -> Result<(), CoveringError> {
    let hits: Vec<(usize, usize)> = faces
        .iter()
        .enumerate()
        .flat_map(|(fi, f)| f.1.iter().enumerate().filter(|(_, x)| x.0 == arc).map(move |(k, _)| (fi, k)))
        .collect();
    let [(f, i), (g, j)] = hits[..] else {
        return Err(CoveringError::Inconsistent(format!("arc {arc} is not on two face sides")));
    };
    if f == g {
        return Err(CoveringError::Inconsistent(format!("arc {arc} borders one face twice")));
    }
    let (a, b) = (&faces[f].1, &faces[g].1);
    let merged: Vec<(usize, bool)> =
        a[i + 1..].iter().chain(&a[..i]).chain(&b[j + 1..]).chain(&b[..j]).copied().collect();
    let name = faces[f].0.clone();
    let (lo, hi) = (f.min(g), f.max(g));
    faces.remove(hi);
    faces[lo] = (name, merged);
    Ok(())
}

impl CoveringData {
    pub fn euler_check(&self) -> (i64, i64) {
        let lhs = self.sigma.euler_characteristic();
        let rhs = self.n as i64 * self.base.euler_characteristic() - self.ramification.len() as i64;
        (lhs, rhs)
    }

    /// Cover edges lifting a base edge, in sheet order.
    pub fn lifts(&self, base_edge: usize) -> Vec<usize> {
        let mut v: Vec<(usize, usize)> = self
            .edge_origin
            .iter()
            .enumerate()
            .filter_map(|(i, o)| match o {
                EdgeOrigin::Lift { base, sheet } if *base == base_edge => Some((*sheet, i)),
                _ => None,
            })
            .collect();
        v.sort();
        v.into_iter().map(|x| x.1).collect()
    }

    pub fn fiber(&self, p: usize) -> Vec<usize> {
        (0..self.puncture_proj.len()).filter(|&x| self.puncture_proj[x] == p).collect()
    }

    /// The sidecar mapping file.
    pub fn sidecar(&self) -> String {
        let mut s = String::new();
        for e in 0..self.base.edges.len() {
            let names: Vec<&str> = self.lifts(e).iter().map(|&i| self.sigma.edges[i].id.as_str()).collect();
            s += &format!("lift {} -> {}\n", self.base.edges[e].id, names.join(" "));
        }
        for p in 0..self.base.punctures.len() {
            let names: Vec<&str> = self.fiber(p).iter().map(|&i| self.sigma.punctures[i].as_str()).collect();
            s += &format!("fiber {} -> {}\n", self.base.punctures[p], names.join(" "));
        }
        s += &format!("ram {}\n", self.ramification.len());
        s
    }
}

impl fmt::Display for CoveringData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sc = &self.scaffold;
        let (lhs, rhs) = self.euler_check();
        writeln!(f, "covering of {} with n = {}", self.base.name, self.n)?;
        writeln!(
            f,
            "per triangle: {} white, {} interior black, {} edge black ({} per edge), {} zigzags",
            sc.whites.len(),
            sc.interior_blacks(),
            sc.edge_blacks(),
            sc.edge_blacks() / 3,
            sc.zigzags.len()
        )?;
        writeln!(
            f,
            "cover: {} punctures, {} edges, {} faces",
            self.sigma.punctures.len(),
            self.sigma.edges.len(),
            self.sigma.faces.len()
        )?;
        writeln!(f, "euler characteristic: {lhs}, expected n*chi(S) - ram = {rhs}")?;
        writeln!(f, "verdict: {}", if lhs == rhs { "pass" } else { "fail" })?;
        writeln!(f, "#machine")?;
        writeln!(f, "white\t{}", sc.whites.len())?;
        writeln!(f, "interior_black\t{}", sc.interior_blacks())?;
        writeln!(f, "edge_black\t{}", sc.edge_blacks())?;
        writeln!(f, "zigzags\t{}", sc.zigzags.len())?;
        writeln!(f, "chi\t{lhs}\t{rhs}")?;
        write!(f, "{}", self.sidecar())
    }
}

/// The sheet swap of a double cover.
pub fn deck_involution(c: &CoveringData) -> Result<SurfaceSymmetry, CoveringError> {
    if c.n != 2 {
        return Err(CoveringError::NotDouble(c.n));
    }
    let map: Vec<usize> = (0..c.puncture_proj.len())
        .map(|x| (0..c.puncture_proj.len()).find(|&y| y != x && c.puncture_proj[y] == c.puncture_proj[x]).unwrap())
        .collect();
    SurfaceSymmetry::search(c.sigma.clone(), c.sigma.clone(), map)
        .map_err(|e| CoveringError::Inconsistent(e.to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// θ±(γ) = ±(θ∘γ)⁻¹ on generators, extended linearly and
/// anti-multiplicatively.
#[derive(Clone, Debug)]
pub struct Theta {
    pub alg: Alg,
    pub sign: Sign,
    /// Image of each edge letter with exponent +1.
    images: Vec<(i32, Letter)>,
}

impl Theta {
    pub fn new(c: &CoveringData, alg: &Alg, sign: Sign) -> Result<Theta, CoveringError> {
        if !Arc::ptr_eq(&alg.surface, &c.sigma) && *alg.surface != *c.sigma {
            return Err(CoveringError::Inconsistent("algebra is not over the cover".into()));
        }
        let deck = deck_involution(c)?;
        let s = if sign == Sign::Plus { 1 } else { -1 };
        let images = deck
            .edges
            .iter()
            .map(|img| {
                // θ∘g is g' or δ g'⁻¹; inverting gives g'⁻¹ or δ g'.
                if img.forward {
                    (s, Letter::new(img.edge, -1))
                } else {
                    (s * alg.delta(), Letter::new(img.edge, 1))
                }
            })
            .collect();
        Ok(Theta { alg: alg.clone(), sign, images })
    }

    fn word(&self, w: &Word) -> (i32, Vec<Letter>) {
        let mut sign = 1;
        let mut out = Vec::with_capacity(w.len());
        for l in w.0.iter().rev() {
            let (s, img) = self.images[l.gen as usize];
            sign *= s;
            out.push(if l.exp > 0 { img } else { img.inv() });
        }
        (sign, out)
    }

    fn lin(&self, x: &Lin<Word>) -> Lin<Word> {
        let mut out = Lin::new();
        for (w, c) in &x.0 {
            let (s, letters) = self.word(w);
            out.add_scaled(&self.alg.reduce_lin(s, &letters), c);
        }
        out
    }

    pub fn apply(&self, x: &Element) -> Element {
        Element { alg: self.alg.clone(), terms: self.lin(&x.terms) }
    }

    /// θ(x ⊗ y) = θ(y) ⊗ θ(x).
    pub fn apply2(&self, t: &Tensor2) -> Tensor2 {
        let mut out = Tensor2::zero(&self.alg);
        for ((x, y), c) in &t.terms.0 {
            let tx = self.lin(&Lin::single(x.clone(), Q::one()));
            let ty = self.lin(&Lin::single(y.clone(), Q::one()));
            for (wy, cy) in &ty.0 {
                for (wx, cx) in &tx.0 {
                    out.terms.add_term((wy.clone(), wx.clone()), c * cx * cy);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{SurfaceAlgebra, Twist};
    use crate::surface::fixtures;

    #[test]
    fn scaffold_counts() {
        for n in 2..=5 {
            let sc = Scaffold::new(n);
            assert_eq!(sc.whites.len(), n * (n + 1) / 2);
            assert_eq!(sc.interior_blacks(), n * (n - 1) / 2);
            assert_eq!(sc.edge_blacks(), 3 * n);
            assert_eq!(sc.zigzags.len(), 3 * n);
            // every segment is run once in each direction
            let segments: usize = sc.white_nbrs.len() * 3;
            assert_eq!(sc.traversal.len(), 2 * segments);
            for c in 0..3 {
                assert_eq!(sc.zigzags.iter().filter(|z| z.corner == c).count(), n);
            }
        }
    }

    #[test]
    fn riemann_hurwitz_on_fixtures() {
        for s in [fixtures::disk3(), fixtures::disk4(), fixtures::disk5(), fixtures::annulus11()] {
            for n in 2..=4 {
                let c = build_covering(&s, n).unwrap_or_else(|e| panic!("{} n={n}: {e}", s.name));
                let (l, r) = c.euler_check();
                assert_eq!(l, r, "{} n={n}", s.name);
                assert_eq!(c.sigma.punctures.len(), n * s.punctures.len());
            }
        }
    }

    #[test]
    fn disk4_double_cover_shape() {
        let c = build_covering(&fixtures::disk4(), 2).unwrap();
        assert_eq!(c.sigma.punctures.len(), 8);
        assert_eq!(c.sigma.edges.len(), 10);
        assert_eq!(c.sigma.faces.len(), 2);
        assert!(c.sigma.faces.iter().all(|f| f.word.len() == 6));
        assert_eq!(c.euler_check(), (0, 0));
        // every edge runs from a first-sheet to a second-sheet puncture
        for e in &c.sigma.edges {
            assert_eq!((c.sheet[e.tail], c.sheet[e.head]), (1, 2), "{}", e.id);
        }
        assert!(c.sidecar().contains("ram 2\n"));
    }

    #[test]
    fn deck_involution_squares_to_identity() {
        let c = build_covering(&fixtures::disk4(), 2).unwrap();
        let d = deck_involution(&c).unwrap();
        d.check().unwrap();
        for (e, img) in d.edges.iter().enumerate() {
            assert_eq!(d.edges[img.edge].edge, e);
            assert_eq!(c.edge_origin[img.edge], EdgeOrigin::Lift { base: base_of(&c, e), sheet: 3 - sheet_of(&c, e) });
        }
        assert!(deck_involution(&build_covering(&fixtures::disk3(), 3).unwrap()).is_err());
    }

    fn base_of(c: &CoveringData, e: usize) -> usize {
        match c.edge_origin[e] {
            EdgeOrigin::Lift { base, .. } => base,
            _ => unreachable!(),
        }
    }

    fn sheet_of(c: &CoveringData, e: usize) -> usize {
        match c.edge_origin[e] {
            EdgeOrigin::Lift { sheet, .. } => sheet,
            _ => unreachable!(),
        }
    }

    #[test]
    fn theta_is_an_anti_involution() {
        let c = build_covering(&fixtures::disk4(), 2).unwrap();
        let a = SurfaceAlgebra::from_arc(c.sigma.clone(), Twist::Twisted).unwrap();
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for sign in [Sign::Plus, Sign::Minus] {
            let th = Theta::new(&c, &a, sign).unwrap();
            for f in 0..c.sigma.faces.len() {
                let (s, letters) = a.face_word_raw(f);
                // s·W = δ, and θ± fixes scalars
                let img = th.word(&Word(letters));
                assert_eq!(a.reduce(img.0 * s, &img.1), a.scalar(Q::from_integer(a.delta().into())), "face {f}");
            }
            for _ in 0..20 {
                let x = crate::algebra::random_element(&a, &mut rng, 4, 3);
                let y = crate::algebra::random_element(&a, &mut rng, 4, 3);
                assert_eq!(th.apply(&th.apply(&x)), x);
                assert_eq!(th.apply(&(&x * &y)), &th.apply(&y) * &th.apply(&x));
            }
        }
    }

    #[test]
    fn remark_pair_with_drawn_and_text_labels() {
        let c = build_covering(&fixtures::disk4(), 2).unwrap();
        let a = SurfaceAlgebra::from_arc(c.sigma.clone(), Twist::Twisted).unwrap();
        let g = |n: &str| a.gen(n).unwrap();
        // drawn labels: a14 = 1'->4'', a41 = 4'->1''
        let (a14, a41, a43) = (g("b41_2"), g("b41_1"), g("b34_1"));
        let br = |x: &Element, y: &Element| crate::bracket::double_bracket(x, y).unwrap();
        assert_eq!(br(&a14, &a43), Tensor2::from_elements(&a14, &a43).scale(&crate::algebra::q(1, 2)));
        assert!(br(&a41, &a43).is_zero());
        // text rule a_ij = j'->i'': the two roles swap
        let (t14, t41) = (g("b41_1"), g("b41_2"));
        assert!(br(&t14, &a43).is_zero());
        assert_eq!(br(&t41, &a43), Tensor2::from_elements(&t41, &a43).scale(&crate::algebra::q(1, 2)));
    }

    #[test]
    fn theta_equivariance_law() {
        let c = build_covering(&fixtures::disk4(), 2).unwrap();
        let a = SurfaceAlgebra::from_arc(c.sigma.clone(), Twist::Twisted).unwrap();
        let e = crate::bracket::BracketEngine::new(&a);
        for sign in [Sign::Plus, Sign::Minus] {
            let th = Theta::new(&c, &a, sign).unwrap();
            let mut swapped_law = 0;
            for i in 0..a.num_edges() {
                for j in 0..a.num_edges() {
                    let (x, y) = (a.edge(i), a.edge(j));
                    let lhs = e.bracket(&th.apply(&x), &th.apply(&y));
                    assert_eq!(lhs, th.apply2(&e.bracket(&x, &y)));
                    swapped_law += usize::from(lhs == th.apply2(&e.bracket(&y, &x)));
                }
            }
            assert!(swapped_law < a.num_edges() * a.num_edges());
        }
    }
}
