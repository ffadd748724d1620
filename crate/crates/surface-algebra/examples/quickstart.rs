//! Load the square, bracket two sides, and check the quasi-Poisson identity.
//!
//! Run with `cargo run -p surface-algebra --example quickstart`.

use surface_algebra::algebra::{SurfaceAlgebra, Twist};
use surface_algebra::bracket::{quasi_poisson_check, BracketEngine};
use surface_algebra::covering::build_covering;
use surface_algebra::surface::fixtures;

fn main() {
    let square = fixtures::disk4();
    let a = SurfaceAlgebra::new(square.clone(), Twist::Twisted).expect("the square is valid");
    let engine = BracketEngine::new(&a);

    let x = a.parse_element("b12").unwrap();
    let y = a.parse_element("b23 b34").unwrap();
    println!("<<b12, b23 b34>> = {}", engine.bracket(&x, &y));

    let report = quasi_poisson_check(&a, 10, 0);
    print!("{report}");

    let cover = build_covering(&square, 2).expect("double cover");
    let (chi, expected) = cover.euler_check();
    println!("double cover: {} edges, euler characteristic {chi} (expected {expected})", cover.sigma.edges.len());
}
