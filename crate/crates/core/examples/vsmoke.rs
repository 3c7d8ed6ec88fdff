use stochastic_euler::verify::{run_criterion, Tolerances};
fn main() {
    let tol = Tolerances::default();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let ids: Vec<usize> = if args.is_empty() {
        vec![1, 2, 3]
    } else {
        args.iter().map(|a| a.parse().unwrap()).collect()
    };
    for id in ids {
        let t = std::time::Instant::now();
        match run_criterion(id, &tol, false) {
            Ok(rep) => println!("{} ({:?})", rep.line(), t.elapsed()),
            Err(e) => println!("criterion {id} ERROR: {e}"),
        }
    }
}
