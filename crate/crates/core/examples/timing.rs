use carnot_hardy::sharp::{find_problem, probe, rayleigh};
use std::time::Instant;

fn main() {
    // single-eval timings first
    for (id, params) in [("hardy_r3", [0.1f64, 18.0]), ("hardy_h2", [0.1, 9.0])] {
        let p = find_problem(id).unwrap();
        let t = Instant::now();
        let (q, err) = rayleigh(&p, &params, p.final_nodes).unwrap();
        println!("{id} final q={q:.5}±{err:.1e} [{:?}]", t.elapsed());
    }
    for id in ["hardy_r3", "weighted_hardy_r3", "critical_hardy_r3", "hardy_h2"] {
        let p = find_problem(id).unwrap();
        let t = Instant::now();
        let r = probe(&p, 60).unwrap();
        println!(
            "{:>18}: best {:.5} target {:.4} ratio {:.4} at {:?} (err {:.2e}, floor {}) [{:?}]",
            r.problem_id, r.best_quotient, r.target, r.best_quotient / r.target,
            r.best_params, r.total_err, r.above_floor, t.elapsed()
        );
    }
}
