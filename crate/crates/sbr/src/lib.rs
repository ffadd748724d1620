//! The `sbr` command line, as a library so tests can drive it in-process.
//!
//! Every verb writes a plain-text report that ends in a `#machine` section
//! of tab-separated records. Exit status: 0 on success or pass, 1 when a
//! check found a counterexample, 2 on usage or input errors.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use surface_algebra::algebra::{Alg, Letter, Lin, SurfaceAlgebra, Twist, Word, Q};
use surface_algebra::bracket::{quasi_poisson_check, BracketEngine};
use surface_algebra::covering::build_covering;
use surface_algebra::mutation::{exchange_explore, flip_pushforward, FlipMove, Perturbation, SymbolicVerdict};
use surface_algebra::repcheck::random_rep;
use surface_algebra::surface::MarkedSurface;

#[derive(Parser, Debug)]
#[command(name = "sbr", version, about = "Double brackets on surface algebras, exactly")]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
    /// Twisted (δ = −1) or untwisted (δ = 1) algebra.
    #[arg(long, global = true, value_enum, default_value_t = OnOff::On)]
    pub twist: OnOff,
    /// Sheets of the covering.
    #[arg(long, global = true, default_value_t = 2)]
    pub n: usize,
    /// Flip distance bound for `explore`.
    #[arg(long, global = true, default_value_t = 3)]
    pub depth: usize,
    /// Matrix sizes for numeric checks.
    #[arg(long, global = true, value_delimiter = ',', default_values_t = vec![5, 7])]
    pub sizes: Vec<usize>,
    /// Samples per size for numeric checks; random word triples for `quasi`.
    #[arg(long, global = true, default_value_t = 5)]
    pub samples: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the main output (the cover for `cover`, else the report).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Subcommand, Debug)]
pub enum Verb {
    /// Check a surface file.
    Validate { surface: PathBuf },
    /// ⟨⟨x, y⟩⟩ of two elements.
    Bracket { surface: PathBuf, x: String, y: String },
    /// Both triple brackets of three elements.
    Triple { surface: PathBuf, a: String, b: String, c: String },
    /// The quasi-Poisson suite over all letter triples.
    Quasi { surface: PathBuf },
    /// The induced bracket of two cyclic classes.
    Lie { surface: PathBuf, x: String, y: String },
    /// Build the n-sheeted covering.
    Cover { surface: PathBuf },
    /// Flip a diagonal on the double cover and print the substitution.
    Flip { surface: PathBuf, diagonal: String },
    /// Equivariance of a flip, with negative controls.
    Equivariance { surface: PathBuf, diagonal: String },
    /// Evaluate an element under a random matrix representation.
    Evaluate { surface: PathBuf, element: String },
    /// Explore the exchange graph by flips.
    Explore { surface: PathBuf },
}

/// Outcome of one invocation.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub report: String,
}

struct Fail(i32, String);

fn input<E: std::fmt::Display>(e: E) -> Fail {
    Fail(2, format!("error: {e}"))
}

fn load(path: &Path) -> Result<MarkedSurface, Fail> {
    let text = fs::read_to_string(path).map_err(|e| Fail(2, format!("error: {}: {e}", path.display())))?;
    MarkedSurface::parse(&text).map_err(|e| Fail(2, format!("error: {}: {e}", path.display())))
}

fn twist(c: &Cli) -> Twist {
    match c.twist {
        OnOff::On => Twist::Twisted,
        OnOff::Off => Twist::Untwisted,
    }
}

fn algebra(c: &Cli, path: &Path) -> Result<Alg, Fail> {
    SurfaceAlgebra::new(load(path)?, twist(c)).map_err(input)
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "fail"
    }
}

fn flip_move(c: &Cli, path: &Path, diagonal: &str) -> Result<FlipMove, Fail> {
    let s = load(path)?;
    let d = s.edge_index(diagonal).map_err(input)?;
    let cover = build_covering(&s, 2).map_err(input)?;
    flip_pushforward(&cover, d, twist(c)).map_err(input)
}

fn execute(c: &Cli) -> Result<(i32, String), Fail> {
    let mut r = String::new();
    let code = match &c.verb {
        Verb::Validate { surface } => {
            let s = load(surface)?;
            let v = s.validate();
            write!(r, "{v}").unwrap();
            writeln!(r, "#machine").unwrap();
            for (code, msg) in &v.failures {
                writeln!(r, "violation\t{code}\t{msg}").unwrap();
            }
            i32::from(!v.passed())
        }
        Verb::Bracket { surface, x, y } => {
            let alg = algebra(c, surface)?;
            let (x, y) = (alg.parse_element(x).map_err(input)?, alg.parse_element(y).map_err(input)?);
            let t = BracketEngine::new(&alg).bracket(&x, &y);
            writeln!(r, "{t}").unwrap();
            writeln!(r, "#machine\nbracket\t{t}").unwrap();
            0
        }
        Verb::Triple { surface, a, b, c: cc } => {
            let alg = algebra(c, surface)?;
            let p = |s: &str| alg.parse_element(s).map_err(input);
            let (a, b, cc) = (p(a)?, p(b)?, p(cc)?);
            let e = BracketEngine::new(&alg);
            let (t, d) = (e.triple(&a, &b, &cc), e.triple_from_derivation(&a, &b, &cc));
            writeln!(r, "triple bracket:        {t}").unwrap();
            writeln!(r, "from the uniderivation: {d}").unwrap();
            writeln!(r, "verdict: {}", verdict(t == d)).unwrap();
            writeln!(r, "#machine\ntriple\t{t}\nderivation\t{d}").unwrap();
            i32::from(t != d)
        }
        Verb::Quasi { surface } => {
            let alg = algebra(c, surface)?;
            let q = quasi_poisson_check(&alg, c.samples, c.seed);
            write!(r, "{q}").unwrap();
            i32::from(!q.passed())
        }
        Verb::Lie { surface, x, y } => {
            let alg = algebra(c, surface)?;
            let (x, y) = (alg.parse_element(x).map_err(input)?, alg.parse_element(y).map_err(input)?);
            let l = BracketEngine::new(&alg).lie(&x.abelianize(), &y.abelianize());
            writeln!(r, "{l}").unwrap();
            writeln!(r, "#machine\nlie\t{l}").unwrap();
            0
        }
        Verb::Cover { surface } => {
            let s = load(surface)?;
            let cover = build_covering(&s, c.n).map_err(input)?;
            write!(r, "{cover}").unwrap();
            if let Some(out) = &c.out {
                let side = PathBuf::from(format!("{}.sidecar", out.display()));
                fs::write(out, cover.sigma.serialize()).map_err(input)?;
                fs::write(&side, cover.sidecar()).map_err(input)?;
            } else {
                writeln!(r, "#surface").unwrap();
                write!(r, "{}", cover.sigma.serialize()).unwrap();
            }
            let (l, rh) = cover.euler_check();
            i32::from(l != rh)
        }
        Verb::Flip { surface, diagonal } => {
            let m = flip_move(c, surface, diagonal)?;
            write!(r, "{m}").unwrap();
            0
        }
        Verb::Equivariance { surface, diagonal } => equivariance(c, surface, diagonal, &mut r)?,
        Verb::Evaluate { surface, element } => {
            let alg = algebra(c, surface)?;
            let x = alg.parse_element(element).map_err(input)?;
            let n = c.sizes.first().copied().unwrap_or(2);
            let rep = random_rep(&alg, n, c.seed).map_err(input)?;
            let m = rep.evaluate(&x).map_err(input)?;
            let faces: Vec<bool> = (0..alg.surface.faces.len())
                .map(|f| {
                    rep.face_value(f) == surface_algebra::repcheck::Mat::scalar(n, Q::from_integer(alg.delta().into()))
                })
                .collect();
            let ok = faces.iter().all(|&b| b);
            writeln!(r, "N = {n}, seed {}", c.seed).unwrap();
            for g in 0..alg.num_edges() {
                writeln!(r, "  {} = {}", alg.gen_name(g as u32), rep.letter(Letter::new(g, 1))).unwrap();
            }
            writeln!(r, "value: {m}").unwrap();
            writeln!(r, "face words at delta: {}", verdict(ok)).unwrap();
            writeln!(r, "#machine\nvalue\t{m}").unwrap();
            i32::from(!ok)
        }
        Verb::Explore { surface } => {
            let s = load(surface)?;
            let g = exchange_explore(&s, c.n, c.depth, twist(c)).map_err(input)?;
            write!(r, "{g}").unwrap();
            0
        }
    };
    Ok((code, r))
}

fn equivariance(c: &Cli, surface: &Path, diagonal: &str, r: &mut String) -> Result<i32, Fail> {
    let m = flip_move(c, surface, diagonal)?;
    let ne = m.source.num_edges();
    let letter = |e: usize| Lin::single(Word::letter(Letter::new(e, 1)), Q::from_integer(1.into()));
    let (mut pass, mut deferred) = (0, 0);
    let mut failures = Vec::new();
    for i in 0..ne {
        for j in 0..ne {
            match m.equivariance_symbolic(&letter(i), &letter(j)) {
                SymbolicVerdict::Pass => pass += 1,
                SymbolicVerdict::Deferred => deferred += 1,
                SymbolicVerdict::Fail { .. } => {
                    failures.push(format!("{}\t{}", m.source.gen_name(i as u32), m.source.gen_name(j as u32)))
                }
            }
        }
    }
    writeln!(r, "symbolic: {pass} generator pairs equal, {deferred} deferred, {} unequal", failures.len()).unwrap();
    let raw = |mv: &FlipMove, n: &str| Lin::single(mv.source_word(n).unwrap(), Q::from_integer(1.into()));
    let mut numeric_ok = true;
    let mut lines = Vec::new();
    for (x, y) in [("a31", "a24"), ("a13", "a42"), ("a31", "a13"), ("a13", "a31")] {
        let v = m.equivariance_numeric(&raw(&m, x), &raw(&m, y), &c.sizes, c.samples, c.seed).map_err(input)?;
        numeric_ok &= v.passed();
        writeln!(r, "numeric {x} {y}: {} ({} exact evaluations)", verdict(v.passed()), v.checked).unwrap();
        lines.push(format!("numeric\t{x}\t{y}\t{}\t{}", verdict(v.passed()), v.checked));
    }
    let swap = m.perturbed(Perturbation::SwapArcs).map_err(input)?;
    let v = swap
        .equivariance_numeric(&raw(&swap, "a24"), &raw(&swap, "a12"), &c.sizes, c.samples, c.seed)
        .map_err(input)?;
    let control_ok = !v.passed();
    writeln!(
        r,
        "control (a12 and a21 swapped): {} after {} evaluation(s)",
        if control_ok { "caught" } else { "missed" },
        v.checked
    )
    .unwrap();
    let drop = m.perturbed(Perturbation::DropTerm).map_err(input)?;
    let rt = drop.round_trip(&c.sizes, c.samples, c.seed).map_err(input)?;
    let drop_caught = rt.iter().any(|(_, v)| !v.passed());
    writeln!(r, "control (one path dropped, round trip): {}", if drop_caught { "caught" } else { "missed" }).unwrap();
    writeln!(r, "numeric checks are exact per sample and probabilistic overall").unwrap();
    let ok = failures.is_empty() && numeric_ok && control_ok && drop_caught;
    writeln!(r, "verdict: {}", verdict(ok)).unwrap();
    writeln!(r, "#machine").unwrap();
    writeln!(r, "sizes\t{}", c.sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")).unwrap();
    writeln!(r, "samples\t{}\nseed\t{}", c.samples, c.seed).unwrap();
    writeln!(r, "symbolic\t{pass}\t{deferred}\t{}", failures.len()).unwrap();
    for f in &failures {
        writeln!(r, "unequal\t{f}").unwrap();
    }
    for l in lines {
        writeln!(r, "{l}").unwrap();
    }
    writeln!(r, "control\tswap\t{}\ncontrol\tdrop\t{}", control_ok, drop_caught).unwrap();
    Ok(i32::from(!ok))
}

/// Parse `args` (program name first) and run.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            return Outcome { code, report: e.to_string() };
        }
    };
    if cli.n < 2 && matches!(cli.verb, Verb::Cover { .. } | Verb::Explore { .. }) {
        return Outcome { code: 2, report: "error: --n must be at least 2".into() };
    }
    if cli.sizes.is_empty() || cli.sizes.contains(&0) {
        return Outcome { code: 2, report: "error: --sizes must list positive dimensions".into() };
    }
    match execute(&cli) {
        Ok((code, report)) => {
            let writes_report = !matches!(cli.verb, Verb::Cover { .. });
            if let (true, Some(out)) = (writes_report, &cli.out) {
                if let Err(e) = fs::write(out, &report) {
                    return Outcome { code: 2, report: format!("error: {}: {e}", out.display()) };
                }
            }
            Outcome { code, report }
        }
        Err(Fail(code, report)) => Outcome { code, report },
    }
}
