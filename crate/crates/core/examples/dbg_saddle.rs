use sfqo_core::qspec::*;
fn main() {
    let mut p = SynthParams::baseline();
    p.n_shots = 40_000;
    p.signal_fraction = 0.6;
    p.noise = 0.02;
    p.energy_jitter = 0.0;
    let (shots, truth) = synthesize_shots(&p, 12).unwrap();
    let h = absorption_histogram(&shots, 0.2).unwrap();
    let fit = fit_gaussian_comb(&h, 1.9, p.n_teeth).unwrap();
    println!("widths {:?}", fit.widths);
    println!("amps {:?}", fit.amplitudes);
    // true background per bin (labels)
    let reference_level = shots.iter().map(|s| s.i_out).fold(f64::NEG_INFINITY, f64::max);
    let mut bg_p = vec![0.0; h.probability.len()];
    for s in shots.iter().filter(|s| !truth.labels[s.id as usize]) {
        let v = reference_level - s.i_out;
        let idx = ((v / 0.2).floor() as usize).min(bg_p.len() - 1);
        bg_p[idx] += 1.0 / shots.len() as f64;
    }
    for k in (40..75).step_by(2) {
        println!("x={:.1} raw={:.4} model={:.4} true_bg={:.4}", h.bin_centers[k], h.probability[k], fit.model[k], bg_p[k]);
    }
}
