//! Fixtures shared by the benchmarks.

use calderon_core::atoms::make_atom;
use calderon_core::{Atom, Cube, DomainBox, ExponentFunction, GridFunction};

/// A smooth bump on `[−L, L]^n`.
pub fn bump(n: usize, half_width: f64, points: usize) -> GridFunction {
    let domain = DomainBox::new(n, half_width, points).expect("valid grid");
    GridFunction::from_fn(domain, |x| (-x.iter().map(|v| v * v).sum::<f64>()).exp())
}

/// One atom of degree `2m − 1` centred at the origin.
pub fn atom(n: usize, points: usize, m: u32) -> Atom {
    let domain = DomainBox::new(n, 2.0, points).expect("valid grid");
    let p = ExponentFunction::constant(1.0).expect("valid exponent");
    let cube = Cube::new(&vec![0.0; n], 1.0).expect("valid cube");
    make_atom(domain, &cube, 2.0, 2 * m - 1, &p, 0).expect("atom")
}
