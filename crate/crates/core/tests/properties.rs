//! Property tests for the structural invariants: metric axioms, estimator
//! determinism and tolerance monotonicity, pseudometric family structure,
//! subsequence consistency, profile scale covariance, and embeddability
//! implications. Case counts are kept small because several properties run
//! real geometry sampling per case.

use proptest::prelude::*;

use pretangent::chart::{Chart, Subspace};
use pretangent::gallery::{embeddability_check, run_scenario, EmbedTarget, ScenarioParams};
use pretangent::limits::{estimate_limit, IndexSchedule, LimitStatus, Tolerances};
use pretangent::pretangent::{
    build_family, embed_subsequence, metric_identification, mutual_stability, PretangentQuotient,
    DEFAULT_ZERO_TOL,
};
use pretangent::sequences::{IndexSelector, NormalizingSequence, PointSequence};
use pretangent::space::{MetricSpace, Point};
use pretangent::tangency::{epsilon, epsilon_profile, ProfileParams, TangencyKind};

fn e2() -> MetricSpace {
    MetricSpace::euclidean(2).unwrap()
}

/// Quotient literal with the given class distance matrix, for feeding the
/// embeddability checks directly.
fn quotient_from_rho(rho: Vec<Vec<f64>>, base_class: usize) -> PretangentQuotient {
    let k = rho.len();
    PretangentQuotient {
        classes: (0..k).map(|i| vec![i]).collect(),
        representative: (0..k).collect(),
        class_of: (0..k).collect(),
        base_class,
        rho,
        zero_eps: 1e-9,
        max_spread: 0.0,
    }
}

fn dist_matrix(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = points.len();
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    points[i]
                        .iter()
                        .zip(&points[j])
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Euclidean distances: symmetry and identity exact, triangle within
    /// one rounding step.
    #[test]
    fn euclidean_metric_axioms(
        xs in prop::collection::vec(-50.0f64..50.0, 3),
        ys in prop::collection::vec(-50.0f64..50.0, 3),
        zs in prop::collection::vec(-50.0f64..50.0, 3),
    ) {
        let space = MetricSpace::euclidean(3).unwrap();
        let (x, y, z) = (Point::coords(xs), Point::coords(ys), Point::coords(zs));
        let d = |a: &Point, b: &Point| space.dist(a, b).unwrap();
        prop_assert_eq!(d(&x, &y).to_bits(), d(&y, &x).to_bits());
        prop_assert_eq!(d(&x, &x), 0.0);
        let slack = 1e-12 * (1.0 + d(&x, &y) + d(&y, &z));
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + slack);
    }

    /// A finite matrix built from actual point distances is accepted and
    /// validates cleanly.
    #[test]
    fn finite_space_from_point_cloud_validates(
        points in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 2), 2..7),
        seed in 0u64..1000,
    ) {
        let space = MetricSpace::finite(dist_matrix(&points)).unwrap();
        let report = pretangent::space::validate_metric(&space, 64, seed).unwrap();
        prop_assert!(report.pass, "{report:?}");
    }

    /// The limit estimator is a pure function of its inputs, and loosening
    /// both tolerances never destroys a converged verdict or moves the
    /// value.
    #[test]
    fn estimate_limit_deterministic_and_tolerance_monotone(
        c in -5.0f64..5.0,
        amp in 0.0f64..0.5,
        loosen in 1.0f64..100.0,
    ) {
        let samples: Vec<f64> = (1..=24)
            .map(|j| c + amp * 0.5f64.powi(j))
            .collect();
        let tight = estimate_limit(&samples, 1e-6, 1e-9).unwrap();
        let again = estimate_limit(&samples, 1e-6, 1e-9).unwrap();
        prop_assert_eq!(
            serde_json::to_string(&tight).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
        let loose = estimate_limit(&samples, 1e-6 * loosen, 1e-9 * loosen).unwrap();
        if tight.status == LimitStatus::Converged {
            prop_assert_eq!(loose.status, LimitStatus::Converged);
            let (a, b) = (tight.value.unwrap(), loose.value.unwrap());
            prop_assert!((a - b).abs() <= 1e-6 * loosen * (1.0 + a.abs()));
        }
    }

    /// d-tilde is symmetric in its two sequences.
    #[test]
    fn mutual_stability_is_symmetric(
        c1 in 0.2f64..3.0,
        c2 in 0.2f64..3.0,
        angle in 0.0f64..std::f64::consts::TAU,
    ) {
        let space = e2();
        let x = PointSequence::radial_power(vec![0.0, 0.0], vec![1.0, 0.0], c1, 1.0);
        let y = PointSequence::radial_power(
            vec![0.0, 0.0],
            vec![angle.cos(), angle.sin()],
            c2,
            1.0,
        );
        let norm = NormalizingSequence::power(1.0, 1.0);
        let schedule = IndexSchedule::default();
        let tol = Tolerances::default();
        let xy = mutual_stability(&space, &x, &y, &norm, &schedule, tol).unwrap();
        let yx = mutual_stability(&space, &y, &x, &norm, &schedule, tol).unwrap();
        prop_assert_eq!(xy.value.unwrap().to_bits(), yx.value.unwrap().to_bits());
    }

    /// Families of power-law sequences stay pseudometric, and the thinned
    /// sub-schedule reproduces every limit within the summed error bounds.
    #[test]
    fn family_limits_survive_index_thinning(
        coeffs in prop::collection::vec(0.2f64..3.0, 2..5),
        step in 2usize..4,
    ) {
        let space = e2();
        let base = Point::coords([0.0, 0.0]);
        let members: Vec<PointSequence> = coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let angle = i as f64;
                PointSequence::radial_power(
                    vec![0.0, 0.0],
                    vec![angle.cos(), angle.sin()],
                    c,
                    1.0,
                )
                .with_label(format!("m{i}"))
            })
            .collect();
        let (family, rejected) = build_family(
            &space,
            &base,
            &members,
            &NormalizingSequence::power(1.0, 1.0),
            &IndexSchedule::default(),
            Tolerances::default(),
        )
        .unwrap();
        prop_assert!(rejected.is_empty());

        let m = family.len();
        let scale = family.max_value().max(1e-12);
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let gap = family.value(i, k) - family.value(i, j) - family.value(j, k);
                    prop_assert!(gap <= 1e-6 * scale);
                }
            }
        }

        let selector = IndexSelector::from_fn(
            format!("stride{step}"),
            move |n| n * step as u64,
        );
        let report = embed_subsequence(&family, &selector).unwrap();
        prop_assert!(report.distances_preserved, "{report:?}");
        prop_assert!(report.class_map_consistent, "{report:?}");
    }

    /// Quotient representatives are interchangeable: the spread behind any
    /// class distance stays below twice the zero threshold.
    #[test]
    fn quotient_representative_independence(
        c in 0.3f64..2.0,
        wiggle in 0.0f64..1e-6,
    ) {
        let space = e2();
        let base = Point::coords([0.0, 0.0]);
        let members = [
            PointSequence::radial_power(vec![0.0, 0.0], vec![1.0, 0.0], c, 1.0)
                .with_label("m"),
            PointSequence::radial_power(vec![0.0, 0.0], vec![1.0, 0.0], c + wiggle, 1.0)
                .with_label("m-twin"),
            PointSequence::radial_power(vec![0.0, 0.0], vec![0.0, 1.0], 2.0 * c, 1.0)
                .with_label("far"),
        ];
        let (family, _) = build_family(
            &space,
            &base,
            &members,
            &NormalizingSequence::power(1.0, 1.0),
            &IndexSchedule::default(),
            Tolerances::default(),
        )
        .unwrap();
        let quotient = metric_identification(&family, None).unwrap();
        prop_assert!(
            quotient.max_spread <= 2.0 * DEFAULT_ZERO_TOL * family.max_value() + 1e-12,
            "spread {}",
            quotient.max_spread
        );
    }

    /// Scale covariance: lines through the origin are invariant under
    /// dilation, so the directed deviation at radius lambda * t is lambda
    /// times the deviation at t, up to sampling noise.
    #[test]
    fn epsilon_scales_linearly_on_cones(
        t in 0.02f64..0.2,
        lambda in 0.5f64..4.0,
        seed in 0u64..100,
    ) {
        let space = e2();
        let axis = Subspace::from_chart(
            space.clone(),
            Chart::line(vec![0.0, 0.0], vec![1.0, 0.0], 4.0).unwrap(),
        )
        .unwrap();
        let s = 1.0 / std::f64::consts::SQRT_2;
        let diagonal = Subspace::from_chart(
            space,
            Chart::line(vec![0.0, 0.0], vec![s, s], 4.0).unwrap(),
        )
        .unwrap();
        let a = Point::coords([0.0, 0.0]);
        let small = epsilon(&a, t, &diagonal, &axis, 0.05, 96, 512, seed).unwrap();
        let large = epsilon(&a, lambda * t, &diagonal, &axis, 0.05, 96, 512, seed + 1).unwrap();
        prop_assert!(!small.empty && !large.empty);
        let ratio = large.value / (lambda * small.value);
        prop_assert!((ratio - 1.0).abs() <= 0.05, "ratio {ratio}");
    }

    /// A subspace never strays from itself: the directed deviation of a
    /// chart against the same chart object is numerical noise.
    #[test]
    fn epsilon_vanishes_against_itself(
        angle in 0.0f64..std::f64::consts::TAU,
        t in 0.02f64..0.3,
        seed in 0u64..100,
    ) {
        let space = e2();
        let line = Subspace::from_chart(
            space,
            Chart::line(vec![0.0, 0.0], vec![angle.cos(), angle.sin()], 2.0).unwrap(),
        )
        .unwrap();
        let a = Point::coords([0.0, 0.0]);
        let d = epsilon(&a, t, &line, &line, 0.05, 48, 256, seed).unwrap();
        prop_assert!(d.value <= 1e-2 * t * t + 1e-12, "value {}", d.value);
    }

    /// Line embeddability implies plane embeddability.
    #[test]
    fn line_embeddable_implies_plane_embeddable(
        coords in prop::collection::vec(-5.0f64..5.0, 2..7),
    ) {
        let points: Vec<Vec<f64>> = coords.iter().map(|&x| vec![x]).collect();
        let quotient = quotient_from_rho(dist_matrix(&points), 0);
        let line = embeddability_check(&quotient, EmbedTarget::Line).unwrap();
        let plane = embeddability_check(&quotient, EmbedTarget::Plane).unwrap();
        prop_assert!(line.embeddable, "{line:?}");
        prop_assert!(plane.embeddable, "{plane:?}");
    }

    /// Planar point sets are plane-embeddable regardless of line
    /// embeddability.
    #[test]
    fn planar_quotients_are_plane_embeddable(
        points in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 3..7),
    ) {
        let quotient = quotient_from_rho(dist_matrix(&points), 0);
        let plane = embeddability_check(&quotient, EmbedTarget::Plane).unwrap();
        prop_assert!(plane.embeddable, "{plane:?}");
    }
}

/// Profile determinism at the API level: equal parameters, equal profiles.
#[test]
fn profiles_are_deterministic_per_seed() {
    let space = e2();
    let y = Subspace::from_chart(space.clone(), Chart::circle([0.0, 0.0], 1.0).unwrap()).unwrap();
    let z = Subspace::from_chart(
        space,
        Chart::line(vec![1.0, 0.0], vec![0.0, 1.0], 2.0).unwrap(),
    )
    .unwrap();
    let a = Point::coords([1.0, 0.0]);
    let params = ProfileParams {
        t0: Some(0.1),
        grid_len: 8,
        n_sphere: 48,
        n_target: 256,
        seed: 42,
        ..ProfileParams::default()
    };
    let p1 = epsilon_profile(&a, &z, &y, &params).unwrap();
    let p2 = epsilon_profile(&a, &z, &y, &params).unwrap();
    assert_eq!(
        serde_json::to_string(&p1).unwrap(),
        serde_json::to_string(&p2).unwrap()
    );
}

/// Scenario verdicts survive a +-20% change of the sphere budget.
#[test]
fn scenario_verdicts_stable_under_sphere_budget() {
    let mut params = ScenarioParams::default();
    params.profile.grid_len = 10;
    params.profile.n_target = 512;
    params.profile.seed = 11;

    for id in ["curve", "cone"] {
        let mut kinds: Vec<TangencyKind> = Vec::new();
        for n_sphere in [77, 96, 115] {
            let mut p = params.clone();
            p.profile.n_sphere = n_sphere;
            kinds.push(run_scenario(id, 0.5, &p).unwrap().verdict.kind);
        }
        assert!(
            kinds.iter().all(|k| *k == kinds[0]),
            "{id}: verdicts {kinds:?}"
        );
    }
}
