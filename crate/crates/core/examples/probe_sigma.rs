use uvhw_core::term_structure::{CurveSpec, HwParams};
use uvhw_core::uvhw_engine::{price_european, LatticeConfig, ModelParams, Objective};

fn main() {
    let mut model = ModelParams {
        s0: 100.0,
        sigma_min: 0.15,
        sigma_max: 0.25,
        sigma_fixed: None,
        eta: 0.0,
        hw: HwParams { kappa: 0.2, omega: 0.03, rho: 0.0 },
        curve: CurveSpec::preset("ecb_2024_09_02").unwrap(),
    };
    model.hw.rho = 0.0;
    let payoff = move |s: f64| (s - 100.0f64).max(0.0);
    for ns in [4usize, 8, 16, 32] {
        let c = LatticeConfig { n_local_steps: 16, mesh_refine: ns, z_points: 1, sigma_points: 5 };
        let lo = price_european(&model, &payoff, 1.0, &c, Objective::LongMin).unwrap();
        let hi = price_european(&model, &payoff, 1.0, &c, Objective::ShortMax).unwrap();
        println!(
            "N_S={ns:2}  long interior {:.5}  short interior {:.5}  lo {:.5} hi {:.5}",
            lo.sigma_interior_fraction.unwrap(),
            hi.sigma_interior_fraction.unwrap(),
            lo.price, hi.price
        );
    }
}
