use circle_displace::ifm::{isi_sequence, FiringModel};
use circle_displace::measures::{fortet_mourier, EmpiricalMeasure};
use circle_displace::orbits::{default_burn_in, iterate_point, rotation_number, Direction};

fn isi_distribution(i: f64, n: usize) -> EmpiricalMeasure {
    let model = FiringModel::perfect_integrator(i, 0.5, 0.0, 1.0).unwrap();
    let lift = model.firing_lift().unwrap();
    let t0 = iterate_point(&lift, 0.0, default_burn_in(n), Direction::Forward).unwrap();
    let isi = isi_sequence(&model, t0, n).unwrap();
    EmpiricalMeasure::uniform(&isi.values).unwrap()
}

#[test]
fn isi_distributions_approach_along_a_family() {
    // the mean interval of a perfect integrator is 1/I, so this rate is irrational
    let i0 = (1.0 + 5f64.sqrt()) / 2.0;
    let lift = FiringModel::perfect_integrator(i0, 0.5, 0.0, 1.0)
        .unwrap()
        .firing_lift()
        .unwrap();
    let est = rotation_number(&lift, 0.0, 100_000).unwrap();
    assert!(!est.is_rational(), "base point should not be mode-locked: {est:?}");

    let n = 50_000;
    let base = isi_distribution(i0, n);
    let d: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&h| fortet_mourier(&isi_distribution(i0 + h, n), &base).unwrap())
        .collect();
    assert!(d.windows(2).all(|w| w[1] <= w[0]), "{d:?}");
    assert!(d[2] < 1e-3, "{d:?}");
}
