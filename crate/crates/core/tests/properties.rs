mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use patchgrowth::digdid::{did_construct, dig_scan, DidCase, Feasibility, ScanOptions};
use patchgrowth::limits::{lambda_m_to_inf_formula, sigma_chi};
use patchgrowth::matrix::is_metzler;
use patchgrowth::modelfile::{parse_model, to_toml, ModelMetadata};
use patchgrowth::monodromy::{growth_rate, trajectory_lyapunov};
use patchgrowth::sweep::{sweep, GridAxis, SweepGrid};
use patchgrowth::{bind, ModelParameters, PatchModel};

use common::random_model;

fn model_from(seed: u64) -> PatchModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 + (seed % 3) as usize;
    let k = 1 + ((seed / 3) % 4) as usize;
    random_model(&mut rng, n, k)
}

fn lambda(model: &PatchModel, m: f64, t: f64) -> f64 {
    growth_rate(model, &ModelParameters::new(m, t).unwrap()).unwrap().lambda
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn growth_rate_between_sigma_and_chi(seed in any::<u64>(), lm in -2.0f64..2.5, lt in -2.0f64..2.0) {
        let model = model_from(seed);
        let (m, t) = (10f64.powf(lm), 10f64.powf(lt));
        let (sigma, chi) = sigma_chi(&model).unwrap();
        let l = lambda(&model, m, t);
        prop_assert!(sigma - 1e-9 <= l && l <= chi + 1e-9, "σ={sigma} Λ={l} χ={chi}");
    }

    #[test]
    fn bound_path_keeps_growth_on_column_sums(seed in any::<u64>(), m in 0.0f64..10.0, tau in 0.0f64..1.0) {
        let model = model_from(seed);
        let a = bind(&model, &ModelParameters::new(m, 1.0).unwrap());
        let at = a.eval(tau);
        prop_assert!(is_metzler(&at));
        let r = model.growth_rates_at(tau);
        for (s, r) in at.column_sums().iter().zip(&r) {
            prop_assert!((s - r).abs() < 1e-12 * (1.0 + m));
        }
    }

    #[test]
    fn growth_shift_moves_lambda(seed in any::<u64>(), c in -3.0f64..3.0, m in 0.05f64..5.0, t in 0.1f64..10.0) {
        let model = model_from(seed);
        let shifted = model.with_growth_shift(c);
        let d = lambda(&shifted, m, t) - lambda(&model, m, t);
        prop_assert!((d - c).abs() < 1e-9, "shift {c} moved Λ by {d}");
    }

    #[test]
    fn model_file_round_trip(seed in any::<u64>()) {
        let model = model_from(seed);
        let text = to_toml(&model, &ModelMetadata::default()).unwrap();
        prop_assert_eq!(parse_model(&text).unwrap().model, model);
    }

    #[test]
    fn did_construction_invariants(seed in any::<u64>(), eps in 1e-4f64..0.1) {
        let growth = model_from(seed).growth().clone();
        let c = did_construct(&growth, eps).unwrap();
        let n = growth.n();
        let mig = c.model.migration();
        for k in 0..mig.len() {
            let l = mig.segment(k).as_constant().unwrap();
            prop_assert!(is_metzler(l));
            prop_assert!(l.column_sums().iter().all(|s| s.abs() < 1e-12));
        }
        for p in &c.partition.pieces {
            // the target patch has the lowest rate on its piece
            let tau = 0.5 * (p.start.value() + p.end);
            let r = growth.eval(tau).diagonal_entries();
            let low = r.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert!(r[p.index] <= low + 1e-12);
            let l = mig.eval(tau);
            for j in (0..n).filter(|&j| j != p.index) {
                prop_assert!(l.get(p.index, j) >= 1.0);
            }
        }
        prop_assert!(c.model.satisfies_h2());
        let (sigma, _) = sigma_chi(&c.model).unwrap();
        let limit = lambda_m_to_inf_formula(&c.model).unwrap();
        match c.case {
            DidCase::AllMinimal => {
                prop_assert_eq!(c.epsilon_correction, 0.0);
                prop_assert!((limit - sigma).abs() < 1e-9, "limit {limit} σ {sigma}");
            }
            DidCase::Padded { ref never_minimal } => {
                prop_assert!(!never_minimal.is_empty());
                prop_assert!(limit >= sigma - 1e-9);
                prop_assert!((limit - sigma).abs() <= 2.0 * eps * (n as f64) * 2.0 + 1e-9);
            }
        }
    }

    #[test]
    fn dig_impossible_without_a_positive_patch(seed in any::<u64>()) {
        let model = model_from(seed);
        let (_, chi) = sigma_chi(&model).unwrap();
        let model = model.with_growth_shift(-chi - 0.01);
        let r = dig_scan(&model, &SweepGrid::default_log(), &ScanOptions::default()).unwrap();
        prop_assert_eq!(r.feasibility, Feasibility::Impossible);
        prop_assert_eq!(r.evaluated, 0);
        prop_assert!(r.witness.is_none());
    }
}

#[test]
fn dig_witnesses_confirmed_by_trajectories() {
    let grid = SweepGrid::new(GridAxis::log(0.05, 5.0, 4).unwrap(), GridAxis::log(0.5, 20.0, 4).unwrap()).unwrap();
    let mut found = 0;
    for seed in 0..40u64 {
        let model = model_from(seed);
        let r = dig_scan(&model, &grid, &ScanOptions::default()).unwrap();
        let Some(w) = r.witness else { continue };
        assert!(w.lambda > 0.0);
        let p = ModelParameters::new(w.m, w.t).unwrap();
        let est = trajectory_lyapunov(&model, &p, &vec![1.0; model.n()], 400).unwrap();
        assert!((est.shared - w.lambda).abs() < 1e-4, "seed {seed}: {} vs {}", est.shared, w.lambda);
        found += 1;
    }
    assert!(found >= 5, "only {found} witnesses");
}

#[test]
fn sweep_independent_of_thread_count() {
    let model = model_from(7);
    let grid = SweepGrid::new("0,0.1,1,10".parse().unwrap(), "log:0.1:100:4".parse().unwrap()).unwrap();
    let a = sweep(&model, &grid, Some(1)).unwrap();
    let b = sweep(&model, &grid, Some(3)).unwrap();
    assert_eq!(a, b);
    let (sigma, chi) = sigma_chi(&model).unwrap();
    assert!(a.iter().all(|r| sigma - 1e-9 <= r.lambda && r.lambda <= chi + 1e-9));
}
