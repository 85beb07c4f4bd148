//! Growth rates against values frozen from an independent 40-digit
//! product-of-exponentials computation (mpmath `expm` and `eig`).

use patchgrowth::catalog::{find, Bindings};
use patchgrowth::monodromy::growth_rate;
use patchgrowth::{Breakpoint, ModelParameters, PatchModel, SquareMatrix};

fn lambda(model: &PatchModel, m: f64, t: f64) -> f64 {
    growth_rate(model, &ModelParameters::new(m, t).unwrap()).unwrap().lambda
}

fn entry(name: &str, params: &[(&str, f64)]) -> PatchModel {
    let e = find(name).unwrap();
    let mut b = Bindings::new();
    for (k, v) in params {
        b.set(k, *v);
    }
    e.model(&e.bind(&b).unwrap()).unwrap()
}

fn assert_close(what: &str, got: f64, want: f64) {
    let tol = 1e-10 * (1.0 + want.abs());
    assert!((got - want).abs() <= tol, "{what}: got {got:.17} want {want:.17}");
}

#[test]
fn two_patch_models() {
    let worst = entry("two-patch-worst", &[]);
    let best = entry("two-patch-best", &[]);
    let cases = [
        (1.0, 200.0, 0.494_506_938_556_659_45, 1.486_459_748_994_488_8),
        (1000.0, 1.0, -1.493_989_975_931_788, 1.494_009_976_067_789_5),
        (0.5, 2.0, 0.333_429_018_243_475_04, 0.371_442_821_284_598_2),
        (3.0, 0.7, 0.016_942_714_853_962_559, 0.255_080_139_784_388),
    ];
    for (m, t, w, b) in cases {
        assert_close(&format!("worst m={m} T={t}"), lambda(&worst, m, t), w);
        assert_close(&format!("best m={m} T={t}"), lambda(&best, m, t), b);
    }
}

#[test]
fn three_patch_bb_symmetric() {
    let t_witness = 56.234_132_519_034_91;
    let cases = [
        (-1.0, 1000.0, 1.0, -0.287_627_440_954_065_85),
        (-1.0, 1.0, 10.0, -0.100_362_989_799_244_02),
        (-1.0, 0.01, t_witness, -0.049_503_467_314_086_04),
        (-0.8, 1000.0, 1.0, -0.162_681_874_295_312_9),
        (-0.8, 1.0, 10.0, 0.001_139_982_376_432_823),
        (-0.8, 0.01, t_witness, 0.050_496_544_944_420_298),
    ];
    for (b, m, t, want) in cases {
        let model = entry("three-patch-bb-symmetric", &[("a", 1.0), ("b", b)]);
        assert_close(&format!("b={b} m={m} T={t}"), lambda(&model, m, t), want);
    }
}

#[test]
fn three_patch_ab_symmetric() {
    let model = entry("three-patch-ab-symmetric", &[]);
    assert_close("m=1 T=200", lambda(&model, 1.0, 200.0), 0.398_617_750_810_496_3);
    assert_close("m=1 T=100", lambda(&model, 1.0, 100.0), 0.383_021_939_247_897_5);
    assert_close("m=2 T=5", lambda(&model, 2.0, 5.0), -0.121_935_827_965_071_67);
}

#[test]
fn irregular_breakpoint_model() {
    let l1 = SquareMatrix::from_rows(&[vec![-1.5, 0.2, 0.0], vec![1.5, -0.2, 0.7], vec![0.0, 0.0, -0.7]]).unwrap();
    let l2 = SquareMatrix::from_rows(&[vec![-0.3, 0.0, 1.2], vec![0.0, -0.6, 0.8], vec![0.3, 0.6, -2.0]]).unwrap();
    let model = PatchModel::piecewise_constant(
        vec![Breakpoint::zero(), Breakpoint::Float(0.37)],
        vec![vec![0.4, -1.3, 0.9], vec![-0.8, 1.1, -0.2]],
        vec![l1, l2],
    )
    .unwrap();
    assert_close("m=0.3 T=0.5", lambda(&model, 0.3, 0.5), 0.163_909_533_609_099_62);
    assert_close("m=1 T=4", lambda(&model, 1.0, 4.0), 0.199_756_633_549_082_01);
    assert_close("m=5 T=20", lambda(&model, 5.0, 20.0), -0.360_153_888_604_712_25);
}
