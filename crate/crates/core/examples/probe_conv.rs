use uvhw_core::eia_contract::EiaContract;
use uvhw_core::mc_benchmark::price_european_mc;
use uvhw_core::term_structure::{CurveSpec, HwParams};
use uvhw_core::uvhw_engine::ModelParams;

fn main() {
    let base = EiaContract::preset("kw_table3").unwrap();
    let mk = |rho: f64| ModelParams {
        s0: 100.0,
        sigma_min: 0.20,
        sigma_max: 0.30,
        sigma_fixed: Some(0.25),
        eta: 0.0,
        hw: HwParams { kappa: 0.2, omega: 0.03, rho },
        curve: CurveSpec::preset("ecb_2024_09_02").unwrap(),
    };
    println!("paper MC rows C16: 1.2094 1.2046 1.2000 | C20: 1.2679 1.2624 1.2572");
    for gamma in [0.9f64, 0.0, 1.0] {
        let mut c = base.clone();
        c.mcv_fraction = gamma;
        let px: Vec<String> = [-0.3f64, 0.0, 0.3]
            .iter()
            .map(|&r| {
                let e = price_european_mc(&c, &mk(r), 0.25, 400_000, 99).unwrap();
                format!("{:.4}", e.price)
            })
            .collect();
        println!("gamma={gamma:.1}  C16: {}", px.join("  "));
    }
    let mut c20 = base.clone();
    c20.local_cap = 0.20;
    let px: Vec<String> = [-0.3f64, 0.0, 0.3]
        .iter()
        .map(|&r| {
            let e = price_european_mc(&c20, &mk(r), 0.25, 400_000, 99).unwrap();
            format!("{:.4}", e.price)
        })
        .collect();
    println!("gamma=0.9 C20: {}", px.join("  "));
}
