// quick end-to-end smoke of compare_mt1 on (A^1, x)
use twistedhp::dgcat::poly::{PolynomialAlgebraPresentation, SparsePoly};
use twistedhp::hkr::{compare_mt1, CompareParams};
use twistedhp::linalg::rat;

fn main() {
    let pres = PolynomialAlgebraPresentation {
        var_names: vec!["x".into(), "y".into()],
        weights: vec![1, 1],
        potentials: vec![SparsePoly::monomial(vec![1, 1], rat(1))],
        declared_weights: vec![None],
    };
    let t0 = std::time::Instant::now();
    let rep = compare_mt1(&pres, &CompareParams { t_max: 2, w_max: 4, emit_matrices: false }).unwrap();
    println!("verdict: {}", rep.verdict);
    println!("dims match: {}", rep.dims_match);
    println!("intertwiner found: {}", rep.intertwiner.is_found());
    println!("weyl h ok {} / d ok {}", rep.weyl_hochschild.all_ok, rep.weyl_derham.all_ok);
    for r in &rep.hochschild.rows {
        if r.even + r.odd > 0 || r.stable {
            println!("  w={} T={} -> ({}, {}) stable={}", r.weight, r.level, r.even, r.odd, r.stable);
        }
    }
    println!("elapsed {:?}", t0.elapsed());
}
