use approx::assert_abs_diff_eq;
use photon_recon::states::parse_distribution;
use photon_recon::*;
use proptest::prelude::*;

fn check_simplex(d: &PhotonDistribution) -> Result<(), TestCaseError> {
    prop_assert!(d.probs().iter().all(|p| *p >= 0.0 && p.is_finite()));
    prop_assert!(d.tail_mass() >= 0.0);
    let total: f64 = d.probs().iter().sum::<f64>() + d.tail_mass();
    prop_assert!((total - 1.0).abs() <= 1e-12, "total {total}");
    Ok(())
}

proptest! {
    #[test]
    fn benchmark_states_are_on_the_simplex(mean in 0.0f64..=5.0, n_max in 10usize..=50) {
        check_simplex(&coherent_distribution(mean, n_max).unwrap())?;
        let sq = squeezed_vacuum_distribution(mean, n_max).unwrap();
        check_simplex(&sq)?;
        prop_assert!(sq.probs().iter().skip(1).step_by(2).all(|p| *p == 0.0));
    }

    #[test]
    fn raising_the_cutoff_only_appends(mean in 0.0f64..=5.0, n_max in 10usize..=49) {
        for kind in [StateKind::Coherent, StateKind::SqueezedVacuum] {
            let lo = kind.distribution(mean, n_max).unwrap();
            let hi = kind.distribution(mean, n_max + 1).unwrap();
            prop_assert_eq!(lo.probs(), &hi.probs()[..=n_max]);
            prop_assert!(hi.tail_mass() <= lo.tail_mass());
        }
    }
}

#[test]
fn benchmark_values() {
    let c = coherent_distribution(1.0, 20).unwrap();
    let e_inv = (-1.0f64).exp();
    assert_abs_diff_eq!(c.probs()[0], e_inv, epsilon = 1e-15);
    assert_abs_diff_eq!(c.probs()[1], e_inv, epsilon = 1e-15);
    assert!(c.tail_mass() < 1e-18);
    assert_abs_diff_eq!(mean_photon_number(&c), 1.0, epsilon = 1e-10);

    let s = squeezed_vacuum_distribution(1.0, 20).unwrap();
    assert_abs_diff_eq!(s.probs()[0], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
    assert_abs_diff_eq!(s.probs()[2], 0.25 * std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
    assert_eq!(s.probs()[1], 0.0);
    assert_eq!(s.probs()[3], 0.0);
    assert_abs_diff_eq!(
        photon_recon::states::squeezing_parameter(1.0).unwrap(),
        (1.0 + 2f64.sqrt()).ln(),
        epsilon = 1e-15
    );
}

#[test]
fn vacuum_limits() {
    for kind in [StateKind::Coherent, StateKind::SqueezedVacuum] {
        let d = kind.distribution(0.0, 5).unwrap();
        assert_eq!(d.probs(), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(d.tail_mass(), 0.0);
        assert_eq!(mean_photon_number(&d), 0.0);
    }
}

#[test]
fn negative_mean_is_a_domain_error() {
    assert!(matches!(coherent_distribution(-0.1, 5), Err(Error::Domain(_))));
    assert!(matches!(squeezed_vacuum_distribution(-1.0, 5), Err(Error::Domain(_))));
}

#[test]
fn distribution_files() {
    assert_eq!(parse_distribution("1.0\n").unwrap().probs(), &[1.0]);
    assert_eq!(parse_distribution("0.5\n0.5\n").unwrap().probs(), &[0.5, 0.5]);
    assert!(matches!(parse_distribution("0.3\n0.3\n0.3\n"), Err(Error::Validation(_))));
    assert!(matches!(parse_distribution("# only a comment\n"), Err(Error::Validation(_))));
    assert!(matches!(parse_distribution("0.5\n-0.1\n0.6\n"), Err(Error::Validation(_))));
    assert!(matches!(parse_distribution("0.5\nabc\n"), Err(Error::Parse { line: 2, .. })));

    let nudged = parse_distribution("0.5000001\n0.5\n").unwrap();
    assert_abs_diff_eq!(nudged.probs().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
}

#[test]
fn distribution_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("truth.txt");
    let d = coherent_distribution(1.0, 20).unwrap();
    d.write_file(&path).unwrap();
    let back = distribution_from_file(&path).unwrap();
    assert_eq!(back.probs(), d.probs());
}
