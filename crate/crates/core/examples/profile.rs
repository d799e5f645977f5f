// stage timing for the plane instance with f = xy
use std::time::Instant;
use twistedhp::dgcat::poly::{PolynomialAlgebraPresentation, SparsePoly};
use twistedhp::dgcat::Grade;
use twistedhp::hochschild::adapter::GradedChainOps;
use twistedhp::hochschild::PolyChains;
use twistedhp::lambdamod::tower::plan_tower;
use twistedhp::lambdamod::ModuleOps;
use twistedhp::linalg::rat;
use twistedhp::linalg::reduction::FoldedReduction;

fn main() {
    let pres = PolynomialAlgebraPresentation {
        var_names: vec!["x".into(), "y".into()],
        weights: vec![1, 1],
        potentials: vec![SparsePoly::monomial(vec![1, 1], rat(1))],
        declared_weights: vec![None],
    };
    let tws: Vec<Grade> = vec![vec![1, 1]];
    let plan = plan_tower(&tws, 2, 2, -4, 4, &|g| g.iter().all(|&x| x >= 0));
    println!("families: {}  weights: {}", plan.families.len(), plan.weights.len());
    let vmax = plan.weights.iter().map(|g| g.iter().sum::<i64>()).max().unwrap();
    println!("vmax total: {vmax}");
    let t0 = Instant::now();
    let ca = PolyChains::new(pres.clone(), vmax + 4);
    let ops = GradedChainOps::new(ca, plan.weights.iter().cloned());
    println!("chain enumeration: {:?}", t0.elapsed());
    let mut per_weight: std::collections::BTreeMap<Grade, Vec<(i64, usize)>> = Default::default();
    for key in ops.component_keys() {
        per_weight.entry(key.weight.clone()).or_default().push((key.degree, ops.dim(&key)));
    }
    let mut weights: Vec<&Grade> = plan.weights.iter().collect();
    weights.sort_by_key(|g| g.iter().sum::<i64>());
    for w in weights {
        let degs = per_weight.get(w).cloned().unwrap_or_default();
        let dim: usize = degs.iter().map(|x| x.1).sum();
        if dim < 2000 { continue; }
        let t = Instant::now();
        // build the folded d+beta0 matrix by hand (same as the engine)
        let mut layout = Vec::new();
        for &(deg, d) in &degs { for i in 0..d { layout.push((deg, i)); } }
        let pos: std::collections::HashMap<(i64, usize), usize> =
            layout.iter().enumerate().map(|(p, &x)| (x, p)).collect();
        let parity: Vec<u8> = layout.iter().map(|&(d, _)| d.rem_euclid(2) as u8).collect();
        let mut mat = twistedhp::linalg::SparseMatrix::zero(dim, dim);
        for (p, &(deg, idx)) in layout.iter().enumerate() {
            let key = twistedhp::lambdamod::CompKey::new(w.clone(), deg);
            for op in [twistedhp::lambdamod::Op::D, twistedhp::lambdamod::Op::Beta(0)] {
                for (ti, c) in ops.apply(op, &key, idx) {
                    mat.add_to(pos[&(deg + op.degree_shift(), ti)], p, c);
                }
            }
        }
        let build = t.elapsed();
        let t = Instant::now();
        let red = FoldedReduction::reduce(dim, &parity, &mat);
        println!("weight {:?} dim {} nnz {}: build {:?} reduce {:?} kept {}",
                 w, dim, mat.nnz(), build, t.elapsed(), red.kept.len());
    }
}
