use std::time::Instant;

use semcom::adapt::{normalized_scalar_model, AdaptConfig, Controller, FadingProcess};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let t_slots: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(100_000);
    let v: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(100.0);
    let model = normalized_scalar_model();
    let fading = FadingProcess::RayleighIid { mean_gain: 1.0 };
    let t0 = Instant::now();
    for d_max in [0.015, 0.025, 0.06] {
        let config = AdaptConfig {
            d_max,
            v,
            ..AdaptConfig::default()
        };
        let controller = Controller::new(&model, config).unwrap();
        let trace = controller.simulate(t_slots, &fading, 11);
        println!(
            "d_max {:>6.3}: power {:.5} W  energy {:.6} J  nmse {:.5}  delay {:.5}  qa/T {:.2e}  qd/T {:.2e}  warn {}",
            d_max,
            trace.avg_power,
            trace.avg_energy,
            trace.avg_nmse,
            trace.avg_delay,
            trace.final_state.q_acc / t_slots as f64,
            trace.final_state.q_delay / t_slots as f64,
            trace.feasibility_warning
        );
    }
    println!("elapsed {:.1}s", t0.elapsed().as_secs_f64());
    // V sweep at the middle target.
    for v in [1.0, 10.0, 100.0] {
        let config = AdaptConfig {
            v,
            ..AdaptConfig::default()
        };
        let controller = Controller::new(&model, config).unwrap();
        let trace = controller.simulate(t_slots, &fading, 11);
        println!(
            "V {:>5}: power {:.5} W nmse {:.5} delay {:.5} qa/T {:.2e} qd/T {:.2e}",
            v, trace.avg_power, trace.avg_nmse, trace.avg_delay,
            trace.final_state.q_acc / t_slots as f64,
            trace.final_state.q_delay / t_slots as f64,
        );
    }
}
