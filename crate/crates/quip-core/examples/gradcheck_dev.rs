use quip_core::diva;

fn main() {
    let t0 = std::time::Instant::now();
    let groups = diva::standard_gradcheck(7).unwrap();
    for g in &groups {
        let worst = g.checks.iter().map(|c| c.max_rel_err).fold(0.0f64, f64::max);
        println!("group {}: {} params, worst rel err {:.3e}", g.label, g.checks.len(), worst);
        for c in &g.checks {
            println!("  {:<28} {:.3e}  (analytic {:+.4e} vs fd {:+.4e})", c.name, c.max_rel_err, c.analytic, c.numeric);
        }
    }
    println!("elapsed: {:.2?}", t0.elapsed());
}
