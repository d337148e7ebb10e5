// scratch diagnostics for the garnet track (removed before release)
use dpi_core::mdp::{evaluate_exact, exact_value_iteration, garnet_generate, TabularPolicy};
use dpi_core::tabular::{conservative_update, csoaa_fit};

fn main() {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(0);
    let s_n = 1000;
    let a_n = 5;
    let mdp = garnet_generate(seed, s_n, a_n, 2).unwrap();
    let (_, greedy) = exact_value_iteration(&mdp, 1e-10).unwrap();
    let opt = evaluate_exact(&mdp, &greedy).unwrap();
    let uniform = TabularPolicy::uniform(s_n, a_n);
    let start = evaluate_exact(&mdp, &uniform).unwrap();
    println!("J* = {:.4}   J(uniform) = {:.4}   1.1 J* = {:.4}", opt.j, start.j, 1.1 * opt.j);

    // Skyline: classifier trained on the OPTIMAL advantage at every state
    // (infinite data, exact advantages) - the ceiling of the policy class.
    let states: Vec<usize> = (0..s_n).collect();
    let cost_vectors: Vec<Vec<f64>> = (0..s_n)
        .map(|s| (0..a_n).map(|a| opt.adv[s * a_n + a]).collect())
        .collect();
    let clf = csoaa_fit(s_n, &states, &cost_vectors, 1e-8).unwrap();
    let skyline_pol = conservative_update(&uniform, &clf, 1.0).unwrap();
    let skyline = evaluate_exact(&mdp, &skyline_pol).unwrap();
    let mut agree = 0usize;
    for s in 0..s_n {
        let pred = clf.predict(s).unwrap();
        if greedy.prob(s, pred) == 1.0 {
            agree += 1;
        }
    }
    println!(
        "skyline classifier: J = {:.4}  ({}/1000 actions match optimal)",
        skyline.j, agree
    );

    // Skyline of repeated exact CPI with the ideal classifier: iterate
    // mixture updates against exact advantages (no sampling, no model error)
    let mut pi = uniform.clone();
    for it in 0..60 {
        let eval = evaluate_exact(&mdp, &pi).unwrap();
        let cost_vectors: Vec<Vec<f64>> = (0..s_n)
            .map(|s| (0..a_n).map(|a| eval.adv[s * a_n + a]).collect())
            .collect();
        let clf = csoaa_fit(s_n, &states, &cost_vectors, 1e-8).unwrap();
        pi = conservative_update(&pi, &clf, 0.5).unwrap();
        if it % 10 == 9 {
            let j = evaluate_exact(&mdp, &pi).unwrap().j;
            println!("ideal CPI-like iteration {it}: J = {j:.4}");
        }
    }
}
