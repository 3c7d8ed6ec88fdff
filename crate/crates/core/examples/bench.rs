use std::time::Instant;
use stochastic_euler::field::VectorField;
use stochastic_euler::flow::{self, FlowMap, SampledField};
use stochastic_euler::grid::Grid;
use stochastic_euler::interp::InterpScheme;
use stochastic_euler::noise::{self, NoiseModel, WienerPath};
use stochastic_euler::scenario;

fn main() {
    let g = Grid::new(32).unwrap();
    let f = scenario::abc_field(g, 1.0, 1.0, 1.0);

    let t0 = Instant::now();
    for _ in 0..100 {
        let spec = stochastic_euler::ops::curl(&f).unwrap(); // 3 fft (cached) + ~6 ifft
        std::hint::black_box(&spec);
    }
    println!("curl x100 (≈9 transforms each): {:?}", t0.elapsed());

    let t0 = Instant::now();
    let mut sf = SampledField::new(f.clone(), InterpScheme::Tricubic);
    let _ = sf.eval([0.1, 0.2, 0.3]);
    println!("SampledField build+first eval: {:?}", t0.elapsed());

    let t0 = Instant::now();
    let mut acc = 0.0;
    for i in 0..32768 {
        let p = [i as f64 * 0.001, i as f64 * 0.002, i as f64 * 0.003];
        let (v, _) = sf.eval(p);
        acc += v[0];
    }
    println!("32768 12-comp evals: {:?} (acc {acc:.3})", t0.elapsed());

    let phi = FlowMap::translation(g, [0.3, 0.1, 0.2], InterpScheme::Tricubic);
    let t0 = Instant::now();
    for _ in 0..10 {
        let p = flow::pullback_field(&phi, &f).unwrap();
        std::hint::black_box(&p);
    }
    println!("pullback x10: {:?}", t0.elapsed());

    // one full kunita-like sample
    let c = [0.0, 0.0, 0.6];
    let sigma = VectorField::from_fn(g, |_| c);
    let model = NoiseModel::from_fields(vec![sigma], vec![1.0], InterpScheme::Tricubic).unwrap();
    let v = scenario::random_band_limited(g, 2, 1.0, 55).unwrap();
    let t0 = Instant::now();
    let steps = 6;
    let dt = 0.01 / steps as f64;
    let path = WienerPath::generate(1, dt, steps, 1);
    let id = FlowMap::identity(g, InterpScheme::Tricubic);
    let phi = noise::noise_flow_slices(&model, &path, 0, steps, 1, &id).unwrap();
    println!("  noise flow ({steps} steps): {:?}", t0.elapsed());
    let t1 = Instant::now();
    let mut u_tilde = Vec::new();
    for phi_i in &phi {
        u_tilde.push(SampledField::new(flow::pullback_field(phi_i, &f).unwrap(), InterpScheme::Tricubic));
    }
    println!("  pullbacks: {:?}", t1.elapsed());
    let t1 = Instant::now();
    let refs: Vec<&SampledField> = u_tilde.iter().collect();
    let y = flow::integrate_drift_flow(&refs, dt).unwrap();
    println!("  drift flow: {:?}", t1.elapsed());
    let t1 = Instant::now();
    let x = FlowMap::compose(phi.last().unwrap(), y.last().unwrap()).unwrap();
    let w = flow::pullback_field(&x, &v).unwrap();
    std::hint::black_box(&w);
    println!("  compose+pullback: {:?}", t1.elapsed());
    println!("one kunita sample total: {:?}", t0.elapsed());

    sf = SampledField::new(scenario::taylor_green(g, 1.0), InterpScheme::Tricubic);
    let _ = sf.eval([0.0,0.0,0.0]);
}
