use uvhw_core::eia_contract::EiaContract;
use uvhw_core::eia_pricer::{price_eia, Mode};
use uvhw_core::mc_benchmark::price_european_mc;
use uvhw_core::term_structure::{CurveSpec, HwParams};
use uvhw_core::uvhw_engine::{LatticeConfig, ModelParams, Objective};

fn main() {
    let c = EiaContract::preset("kw_table3").unwrap();
    let model = ModelParams {
        s0: 100.0,
        sigma_min: 0.20,
        sigma_max: 0.30,
        sigma_fixed: Some(0.25),
        eta: 0.0,
        hw: HwParams { kappa: 0.2, omega: 0.03, rho: -0.3 },
        curve: CurveSpec::preset("ecb_2024_09_02").unwrap(),
    };
    let est = price_european_mc(&c, &model, 0.25, 1_000_000, 2024).unwrap();
    println!("MC  rho=-0.3: {:.4} +- {:.4}   (paper MC 1.2094)", est.price, est.ci95_halfwidth);
    for nl in [16usize, 32] {
        let cf = LatticeConfig { n_local_steps: nl, mesh_refine: 4, z_points: 4, sigma_points: 2 };
        let bs = price_eia(&c, &model, &cf, Mode::European, Objective::FixedSigma(0.25)).unwrap();
        println!("tree N_L={nl}: {:.4}   (paper {})", bs.price, if nl==16 {"1.2107"} else {"1.2098"});
    }
    // finer z/mesh probe at N_L=16
    for (ns, nz) in [(8usize, 8usize), (8, 16), (16, 32)] {
        let cf = LatticeConfig { n_local_steps: 16, mesh_refine: ns, z_points: nz, sigma_points: 2 };
        let bs = price_eia(&c, &model, &cf, Mode::European, Objective::FixedSigma(0.25)).unwrap();
        println!("tree N_L=16 N_S={ns} N_Z={nz}: {:.4}", bs.price);
    }
}
