//! One line per acceptance criterion, `PASS` or `FAIL`, with the time taken
//! against its budget. Exits non-zero when any criterion is red.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use surface_algebra::algebra::{
    q, random_element, random_loop_element, Alg, Letter, Lin, SurfaceAlgebra, Tensor2, Tensor3, Twist, Word, Q,
};
use surface_algebra::bracket::{
    generator_bracket, instantiate, local_case, quasi_poisson_check, triple_bracket, triple_from_derivation,
    BracketEngine, LOCAL_TABLE,
};
use surface_algebra::covering::{build_covering, Scaffold, Sign, Theta};
use surface_algebra::mutation::{flip_pushforward, FlipMove, Perturbation, SymbolicVerdict};
use surface_algebra::repcheck::{
    holonomy_function, random_graded, random_rep, DecorationData, InvolutiveContext, Mat, Membership,
};
use surface_algebra::surface::{fixtures, EndKind, MarkedSurface};

type Check = Result<String, String>;
type Criterion = (&'static str, u64, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn alg(s: MarkedSurface, t: Twist) -> Alg {
    SurfaceAlgebra::new(s, t).expect("fixture algebra")
}

fn letter(e: usize) -> Word {
    Word::letter(Letter::new(e, 1))
}

fn one() -> Q {
    q(1, 1)
}

fn local_table() -> Check {
    use EndKind::{Head, Tail};
    let (a1, a2) = (letter(0), letter(1));
    let expected = [
        (Head, Tail, (a2.mul(&a1), Word::one()), q(-1, 2)),
        (Tail, Tail, (a2.clone(), a1.clone()), q(1, 2)),
        (Head, Head, (a1.clone(), a2.clone()), q(1, 2)),
        (Tail, Head, (Word::one(), a1.mul(&a2)), q(-1, 2)),
    ];
    for (k1, k2, key, c) in expected {
        let got = instantiate(local_case(k1, k2, true), &a1, &a2);
        ensure(got == Lin::single(key, c), || format!("case {k1:?}/{k2:?} gave {got:?}"))?;
    }
    let mut derived = 0;
    for case in LOCAL_TABLE.iter().filter(|c| !c.first_left) {
        let left = local_case(case.kind2, case.kind1, true);
        let want = instantiate(left, &a2, &a1).map_keys(|(x, y)| (y.clone(), x.clone())).scaled(&-one());
        ensure(instantiate(*case, &a1, &a2) == want, || format!("derived case {case:?} breaks skew symmetry"))?;
        derived += 1;
    }
    // The table drives real brackets: disk-3 realizes one case and its inverse rule.
    let d3 = alg(fixtures::disk3(), Twist::Twisted);
    let (g1, g2) = (d3.gen_index("a1").unwrap(), d3.gen_index("a2").unwrap());
    let plain = generator_bracket(&d3, Letter::new(g1, 1), Letter::new(g2, 1));
    ensure(plain == d3.parse_tensor2("1/2 * (a2 a1) (x) (1)").unwrap(), || format!("disk3 a1,a2 gave {plain}"))?;
    Ok(format!("4 defining cases exact, {derived} derived cases skew"))
}

fn three_arcs_triple() -> Check {
    let a = alg(fixtures::three_arcs(), Twist::Twisted);
    let g = |n: &str| a.gen(n).unwrap();
    let (a1, a2, a3) = (g("a1"), g("a2"), g("a3"));
    let t = triple_bracket(&a1, &a2, &a3).map_err(|e| e.to_string())?;
    let d = triple_from_derivation(&a1, &a2, &a3).map_err(|e| e.to_string())?;
    let printed = Tensor3::from_elements(&a.one(), &(&a2 * &a3), &a1).scale(&q(1, 4));
    ensure(t == d, || format!("the two triples differ: {t} vs {d}"))?;
    ensure(t == printed, || format!("both sides equal {t}, not the expected 1/4 (1 (x) a2 a3 (x) a1); see notes"))?;
    Ok("both sides equal 1/4 (1 (x) a2a3 (x) a1)".into())
}

fn quasi_poisson() -> Check {
    let mut total = 0;
    for s in fixtures::all() {
        let name = s.name.clone();
        for t in [Twist::Twisted, Twist::Untwisted] {
            let a = alg(s.clone(), t);
            let r = quasi_poisson_check(&a, 20, 3);
            ensure(r.passed(), || format!("{name} {t:?}: {r}"))?;
            if name == "disk3" {
                ensure(r.letter_triples == 27, || format!("disk3 has {} letter triples", r.letter_triples))?;
            }
            total += r.letter_triples + r.word_triples;
        }
    }
    Ok(format!("{total} triples over disk3, disk4, disk5, annulus11 in both twists, 0 failures"))
}

fn descent() -> Check {
    let mut checked = 0;
    for s in fixtures::all().into_iter().chain([fixtures::three_arcs()]) {
        for t in [Twist::Twisted, Twist::Untwisted] {
            let a = alg(s.clone(), t);
            let e = BracketEngine::new(&a);
            for f in 0..s.faces.len() {
                let (sign, letters) = a.face_word_raw(f);
                let w = Lin::single(Word(letters), Q::from_integer(sign.into()));
                for g in 0..a.num_edges() {
                    for exp in [1, -1] {
                        let x = Lin::single(Word::letter(Letter::new(g, exp)), one());
                        let (l, r) = (e.normalize(&e.lin(&x, &w)), e.normalize(&e.lin(&w, &x)));
                        ensure(l.is_zero() && r.is_zero(), || format!("{} face {f} generator {g}: {l} / {r}", s.name))?;
                        checked += 2;
                    }
                }
            }
        }
    }
    Ok(format!("{checked} brackets with face words normal-form to 0"))
}

fn skew_and_leibniz() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for s in fixtures::all() {
        let a = alg(s, Twist::Twisted);
        let e = BracketEngine::new(&a);
        for i in 0..100 {
            let [x, b, c] = [0; 3].map(|_| random_element(&a, &mut rng, 4, 3));
            let fail = |what: &str| format!("{} sample {i}: {what}", a.surface.name);
            ensure(e.bracket(&x, &b) == -&e.bracket(&b, &x).tau(), || fail("skew symmetry"))?;
            let outer = &e.bracket(&x, &b).outer(&a.one(), &c) + &e.bracket(&x, &c).outer(&b, &a.one());
            ensure(e.bracket(&x, &(&b * &c)) == outer, || fail("outer Leibniz"))?;
            let inner = &e.bracket(&b, &x).inner(&a.one(), &c) + &e.bracket(&c, &x).inner(&b, &a.one());
            ensure(e.bracket(&(&b * &c), &x) == inner, || fail("inner Leibniz"))?;
        }
    }
    Ok("100 random triples per fixture, words of length <= 4, <= 3 terms".into())
}

fn cyclic_lie() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for s in fixtures::all() {
        let a = alg(s, Twist::Twisted);
        let e = BracketEngine::new(&a);
        for i in 0..50 {
            let [x, y] = [0; 2].map(|_| random_element(&a, &mut rng, 4, 3).abelianize());
            ensure(e.lie(&x, &y) == -&e.lie(&y, &x), || format!("{} antisymmetry, sample {i}", a.surface.name))?;
            let [x, y, z] = [0; 3].map(|_| random_loop_element(&a, &mut rng, 5, 2).abelianize());
            let j = &(&e.lie(&x, &e.lie(&y, &z)) + &e.lie(&y, &e.lie(&z, &x))) + &e.lie(&z, &e.lie(&x, &y));
            ensure(j.is_zero(), || format!("{} Jacobi, sample {i}: {j}", a.surface.name))?;
        }
    }
    Ok("antisymmetry on 50 arbitrary pairs and Jacobi on 50 closed-loop triples per fixture".into())
}

fn covering_counts() -> Check {
    for n in [2, 3] {
        let sc = Scaffold::new(n);
        let got = (sc.whites.len(), sc.interior_blacks(), sc.edge_blacks(), sc.zigzags.len());
        ensure(got == (n * (n + 1) / 2, n * (n - 1) / 2, 3 * n, 3 * n), || format!("n={n}: {got:?}"))?;
        for side in 0..3 {
            let per_side = (0..sc.blacks.len()).filter(|&b| sc.is_edge_black(b) && sc.side_of(b).0 == side).count();
            ensure(per_side == n, || format!("n={n}: side {side} has {per_side} edge blacks"))?;
        }
        let c = build_covering(&fixtures::disk3(), n).map_err(|e| e.to_string())?;
        ensure(c.scaffold.whites.len() == n * (n + 1) / 2, || "scaffold of the built cover differs".into())?;
    }
    for s in [fixtures::disk3(), fixtures::disk4(), fixtures::disk5()] {
        let chi = |m: &MarkedSurface| m.punctures.len() as i64 - m.edges.len() as i64 + m.faces.len() as i64;
        for n in [2, 3] {
            let c = build_covering(&s, n).map_err(|e| e.to_string())?;
            let n = n as i64;
            let want = n * chi(&s) - s.faces.len() as i64 * n * (n - 1) / 2;
            ensure(chi(&c.sigma) == want, || format!("{} n={n}: chi {} vs {want}", s.name, chi(&c.sigma)))?;
        }
    }
    Ok("scaffold counts at n = 2, 3; Riemann-Hurwitz on disk3, disk4, disk5".into())
}

fn flip_equivariance() -> Check {
    let d4 = fixtures::disk4();
    let diagonal = d4.edge_index("d13").map_err(|e| e.to_string())?;
    let m = flip_pushforward(&build_covering(&d4, 2).unwrap(), diagonal, Twist::Twisted).map_err(|e| e.to_string())?;
    let ne = m.source.num_edges();
    let one_word = |w: Word| Lin::single(w, one());
    let (mut pass, mut deferred) = (0, 0);
    for i in 0..ne {
        for j in 0..ne {
            match m.equivariance_symbolic(&one_word(letter(i)), &one_word(letter(j))) {
                SymbolicVerdict::Pass => pass += 1,
                SymbolicVerdict::Deferred => deferred += 1,
                SymbolicVerdict::Fail { lhs, rhs } => return Err(format!("generators {i},{j}: {lhs} vs {rhs}")),
            }
        }
    }
    let raw = |mv: &FlipMove, n: &str| one_word(mv.source_word(n).unwrap());
    let labels: Vec<String> = m.labels.keys().cloned().collect();
    let mut numeric = 0;
    for x in ["a31", "a13"] {
        for y in &labels {
            let v = m.equivariance_numeric(&raw(&m, x), &raw(&m, y), &[5, 7], 5, 8).map_err(|e| e.to_string())?;
            ensure(v.passed(), || format!("numeric {x},{y}: {v}"))?;
            numeric += 1;
        }
    }
    let bad = m.perturbed(Perturbation::SwapArcs).map_err(|e| e.to_string())?;
    let v = bad.equivariance_numeric(&raw(&bad, "a24"), &raw(&bad, "a12"), &[5, 7], 5, 8).map_err(|e| e.to_string())?;
    ensure(!v.passed(), || "the corrupted flip passed".into())?;
    Ok(format!(
        "{pass} generator pairs symbolic ({deferred} deferred), {numeric} a31/a13 pairs at N = 5,7 x 5 samples, corrupted flip caught"
    ))
}

fn remark_counterexample() -> Check {
    let c = build_covering(&fixtures::disk4(), 2).map_err(|e| e.to_string())?;
    let a = SurfaceAlgebra::from_arc(c.sigma.clone(), Twist::Twisted).map_err(|e| e.to_string())?;
    let g = |n: &str| a.gen(n).unwrap();
    // Drawn labels: a14 runs 1' to 4'', a41 runs 4' to 1'', a43 runs 3' to 4''.
    let (a14, a41, a43) = (g("b41_2"), g("b41_1"), g("b34_1"));
    let e = BracketEngine::new(&a);
    let first = e.bracket(&a14, &a43);
    ensure(first == Tensor2::from_elements(&a14, &a43).scale(&q(1, 2)), || format!("<<a14,a43>> = {first}"))?;
    let second = e.bracket(&a41, &a43);
    ensure(second.is_zero(), || format!("<<a41,a43>> = {second}"))?;
    Ok("<<a14,a43>> = 1/2 a14 (x) a43 and <<a41,a43>> = 0".into())
}

fn theta_checks() -> Check {
    let c = build_covering(&fixtures::disk4(), 2).map_err(|e| e.to_string())?;
    let a = SurfaceAlgebra::from_arc(c.sigma.clone(), Twist::Twisted).map_err(|e| e.to_string())?;
    let e = BracketEngine::new(&a);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for sign in [Sign::Plus, Sign::Minus] {
        let th = Theta::new(&c, &a, sign).map_err(|e| e.to_string())?;
        for _ in 0..30 {
            let (x, y) = (random_element(&a, &mut rng, 4, 3), random_element(&a, &mut rng, 4, 3));
            let k = &x.scale(&q(3, 7)) + &y;
            ensure(th.apply(&th.apply(&x)) == x, || format!("{sign:?}: theta squared is not the identity"))?;
            ensure(th.apply(&(&x * &y)) == &th.apply(&y) * &th.apply(&x), || {
                format!("{sign:?}: not anti-multiplicative")
            })?;
            ensure(th.apply(&k) == &th.apply(&x).scale(&q(3, 7)) + &th.apply(&y), || format!("{sign:?}: not linear"))?;
        }
        for i in 0..a.num_edges() {
            for j in 0..a.num_edges() {
                let (x, y) = (a.edge(i), a.edge(j));
                let lhs = e.bracket(&th.apply(&x), &th.apply(&y));
                ensure(lhs == th.apply2(&e.bracket(&x, &y)), || format!("{sign:?}: law fails on edges {i},{j}"))?;
            }
        }
    }
    Ok("theta+ and theta- are linear anti-involutions; the law holds on all 100 generator pairs".into())
}

fn representations() -> Check {
    for s in fixtures::all() {
        for (t, d) in [(Twist::Twisted, -1), (Twist::Untwisted, 1)] {
            let a = alg(s.clone(), t);
            for n in 1..=3 {
                for seed in 0..3 {
                    let r = random_rep(&a, n, seed).map_err(|e| e.to_string())?;
                    for f in 0..s.faces.len() {
                        let v = r.face_value(f);
                        ensure(v == Mat::scalar(n, Q::from_integer(d.into())), || {
                            format!("{} face {f} N={n}: {v}", s.name)
                        })?;
                    }
                }
            }
        }
    }

    // Holonomy multiplicativity over composable pairs of short paths.
    let mut pairs = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for s in fixtures::all() {
        let a = alg(s.clone(), Twist::Untwisted);
        let r = random_rep(&a, 1, 6).map_err(|e| e.to_string())?;
        let deco = DecorationData { sections: (1..=s.punctures.len() as i64).map(|k| q(k + 1, 1)).collect() };
        let ends = |l: Letter| {
            let e = &s.edges[l.gen as usize];
            if l.exp > 0 {
                (e.tail, e.head)
            } else {
                (e.head, e.tail)
            }
        };
        let all: Vec<Letter> = (0..s.edges.len()).flat_map(|g| [Letter::new(g, 1), Letter::new(g, -1)]).collect();
        for _ in 0..40 {
            let first = all[rand::Rng::gen_range(&mut rng, 0..all.len())];
            let follow: Vec<Letter> =
                all.iter().copied().filter(|&l| ends(l).0 == ends(first).1 && l != first.inv()).collect();
            let Some(&second) = follow.get(rand::Rng::gen_range(&mut rng, 0..follow.len().max(1))) else { continue };
            let (g1, g2) = (Word(vec![first]), Word(vec![second]));
            let (_, _, h1) = holonomy_function(&deco, &r, &g1).map_err(|e| e.to_string())?;
            let (_, _, h2) = holonomy_function(&deco, &r, &g2).map_err(|e| e.to_string())?;
            let (_, _, h21) = holonomy_function(&deco, &r, &g2.mul(&g1)).map_err(|e| e.to_string())?;
            ensure(h21 == &h2 * &h1, || format!("{}: holonomy of {second:?} after {first:?}", s.name))?;
            pairs += 1;
        }
    }
    ensure(pairs >= 50, || format!("only {pairs} composable pairs"))?;

    // Block patterns: y, z with sigma-parity +1 or -1 in the off-diagonal corners.
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let contexts = [
        InvolutiveContext::transpose(2),
        InvolutiveContext::congruence(Mat::from_ints(&[&[0, 1], &[-1, 0]])).map_err(|e| e.to_string())?,
    ];
    for ctx in &contexts {
        let z = Mat::zero(2);
        let plus = random_graded(ctx, 1, &mut rng);
        let minus = loop {
            let m = random_graded(ctx, -1, &mut rng);
            if !m.is_zero() {
                break m;
            }
        };
        let cases = [
            (Mat::blocks([[&z, &plus], [&z, &z]]).unwrap(), Membership { symplectic: true, orthogonal: false }),
            (Mat::blocks([[&z, &z], [&plus, &z]]).unwrap(), Membership { symplectic: true, orthogonal: false }),
            (Mat::blocks([[&z, &minus], [&z, &z]]).unwrap(), Membership { symplectic: false, orthogonal: true }),
            (Mat::blocks([[&z, &z], [&minus, &z]]).unwrap(), Membership { symplectic: false, orthogonal: true }),
        ];
        for (xi, want) in cases {
            let got = ctx.lie_membership(&xi).map_err(|e| e.to_string())?;
            ensure(got == want, || format!("Lie block pattern misclassified: {got:?} vs {want:?}"))?;
        }
        let inv = loop {
            let u = Mat::random(2, 9, &mut rng);
            if u.is_invertible() {
                break u;
            }
        };
        let g = Mat::blocks([[&inv, &z], [&z, &ctx.sigma(&inv).inverse().unwrap()]]).unwrap();
        ensure(ctx.group_membership(&g).map_err(|e| e.to_string())?.symplectic, || {
            "block-diagonal group element rejected".into()
        })?;
        let id = Mat::identity(2);
        let shear = Mat::blocks([[&id, &plus], [&z, &id]]).unwrap();
        ensure(ctx.group_membership(&shear).map_err(|e| e.to_string())?.symplectic, || {
            "unipotent element rejected".into()
        })?;
    }
    Ok(format!("face words at -I/+I for N = 1,2,3; {pairs} composable holonomy pairs; block patterns classified"))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fx = |n: &str| -> String {
        let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "surface-algebra", "fixtures", n].iter().collect();
        p.to_string_lossy().into_owned()
    };
    let (d3, d4, f3) = (fx("disk3.surf"), fx("disk4.surf"), fx("three_arcs.surf"));
    let out = dir.path().join("cover.surf").to_string_lossy().into_owned();
    let runs: Vec<Vec<&str>> = vec![
        vec!["validate", &d4],
        vec!["bracket", &d3, "a1", "a2"],
        vec!["triple", &f3, "a1", "a2", "a3"],
        vec!["quasi", &d4, "--seed", "5"],
        vec!["lie", &d4, "b12 b23", "b34"],
        vec!["cover", &d3, "--n", "3", "--out", &out],
        vec!["flip", &d4, "d13"],
        vec!["equivariance", &d4, "d13", "--sizes", "3", "--samples", "2", "--seed", "9"],
        vec!["evaluate", &d4, "b12 b23 - 1/2 * d13", "--sizes", "3", "--seed", "4"],
        vec!["explore", &d4, "--depth", "2"],
    ];
    let mut count = 0;
    for args in runs {
        let go = || {
            let o = sbr::run(std::iter::once("sbr").chain(args.iter().copied()));
            let files = std::fs::read(&out).ok().zip(std::fs::read(format!("{out}.sidecar")).ok());
            (o.code, o.report, files)
        };
        let (first, second) = (go(), go());
        ensure(first.0 != 2, || format!("{args:?} exited with an input error: {}", first.1))?;
        ensure(first.1.contains("#machine"), || format!("{args:?} has no #machine section"))?;
        ensure(first == second, || format!("{args:?} differs between runs"))?;
        count += 1;
    }
    Ok(format!("{count} CLI invocations, each byte-identical across two runs"))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("local table fidelity", 1, local_table),
        ("three-arc triple bracket", 1, three_arcs_triple),
        ("quasi-Poisson suite", 60, quasi_poisson),
        ("descent to the quotient", 10, descent),
        ("skew symmetry and Leibniz rules", 60, skew_and_leibniz),
        ("cyclic Lie structure", 120, cyclic_lie),
        ("covering counts", 5, covering_counts),
        ("flip equivariance", 120, flip_equivariance),
        ("label remark counterexample", 1, remark_counterexample),
        ("theta anti-involutions", 30, theta_checks),
        ("representation layer", 30, representations),
        ("CLI determinism", 600, determinism),
    ];
    let mut red = 0;
    for (i, (name, budget, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let result = match result {
            Ok(d) if took > Duration::from_secs(budget) => Err(format!("over budget: {d}")),
            r => r,
        };
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        red += usize::from(result.is_err());
        println!("{tag} {:>2} {name} [{:.2}s / {budget}s]: {detail}", i + 1, took.as_secs_f64());
    }
    println!("acceptance: {} of 12 criteria pass", 12 - red);
    if red > 0 {
        std::process::exit(1);
    }
}
