//! Instance generators for tests and benchmarks.

use rand::Rng;

use crate::cnf::CnfFormula;
use crate::lit::Var;

/// Uniform random k-CNF: each clause picks `k` distinct variables with random signs.
pub fn random_kcnf<R: Rng>(rng: &mut R, num_vars: usize, num_clauses: usize, k: usize) -> CnfFormula {
    assert!(k <= num_vars);
    let mut f = CnfFormula::new();
    let vars = f.new_vars(num_vars);
    for _ in 0..num_clauses {
        let picked = rand::seq::index::sample(rng, num_vars, k);
        let clause: Vec<_> = picked.iter().map(|i| vars[i].lit(rng.gen())).collect();
        f.add_clause(&clause).expect("variables allocated above");
    }
    f
}

/// `pigeons` pigeons into `holes` holes; unsatisfiable iff pigeons > holes.
pub fn pigeonhole(pigeons: usize, holes: usize) -> CnfFormula {
    let mut f = CnfFormula::new();
    let x: Vec<Vec<Var>> = (0..pigeons).map(|_| f.new_vars(holes)).collect();
    for row in &x {
        let c: Vec<_> = row.iter().map(|v| v.pos()).collect();
        f.add_clause(&c).unwrap();
    }
    for h in 0..holes {
        for p in 0..pigeons {
            for q in p + 1..pigeons {
                f.add_clause(&[x[p][h].neg(), x[q][h].neg()]).unwrap();
            }
        }
    }
    f
}
