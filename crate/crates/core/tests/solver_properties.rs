use proptest::prelude::*;

use vsslab::grid::RadialGrid;
use vsslab::params::{derive_exponents, friendly_giant, ExponentSet};
use vsslab::solver::{Frame, InitialCondition, Observers, RadialState, Solver, SolverConfig};

fn reference() -> ExponentSet {
    derive_exponents(1.6, 0.85, 2).unwrap()
}

fn physical(exps: ExponentSet, grid: RadialGrid) -> Solver {
    Solver::new(exps, grid, SolverConfig::default(), Frame::Physical).unwrap()
}

fn observe(s: &Solver, u0: &InitialCondition, times: Vec<f64>) -> (Vec<RadialState>, Vec<f64>) {
    let st = s.init_state(u0).unwrap();
    let end = *times.last().unwrap();
    let obs = Observers {
        times,
        tail_radii: Vec::new(),
    };
    let mut states = Vec::new();
    let (_, log) = s
        .evolve_until(st, end, &obs, &mut |st, _| states.push(st.clone()))
        .unwrap();
    (states, log.iter().map(|r| r.mass).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn mass_never_grows_with_absorption(h in 0.5f64..5.0, w in 0.5f64..2.0) {
        let s = physical(reference(), RadialGrid::uniform(2, 10.0, 101).unwrap());
        let u0 = InitialCondition::Bump { height: h, width: w };
        let m0 = s.mass(&s.init_state(&u0).unwrap());
        let (_, masses) = observe(&s, &u0, (1..=10).map(|k| 0.005 * k as f64).collect());
        let mut prev = m0;
        for m in masses {
            prop_assert!(m <= prev * (1.0 + 1e-12), "{m} > {prev}");
            prev = m;
        }
    }

    #[test]
    fn nonincreasing_profiles_stay_nonincreasing(h in 0.5f64..5.0, w in 0.5f64..2.0) {
        let s = physical(reference(), RadialGrid::uniform(2, 10.0, 101).unwrap());
        let u0 = InitialCondition::Bump { height: h, width: w };
        let (states, _) = observe(&s, &u0, vec![0.01, 0.02, 0.05]);
        for st in states {
            let top = st.u.iter().cloned().fold(0.0, f64::max);
            for pair in st.u.windows(2) {
                prop_assert!(pair[1] <= pair[0] + 1e-9 * top);
            }
            prop_assert!(st.u.iter().all(|&x| x >= -1e-8 * top && x <= h * (1.0 + 1e-9)));
        }
    }

    #[test]
    fn barrier_dominates_capped_data(h in 1.0f64..20.0, offset in 0.2f64..1.0) {
        let e = reference();
        let s = physical(e, RadialGrid::graded(2, 0.05, 0.05, 50.0).unwrap());
        let u0 = InitialCondition::BarrierCapped { height: h, offset };
        let (states, _) = observe(&s, &u0, vec![2e-4, 1e-3]);
        for st in states {
            for (i, &r) in s.grid.nodes.iter().enumerate() {
                if r > offset {
                    let bound = friendly_giant(&e, r - offset).unwrap();
                    prop_assert!(st.u[i] <= bound * (1.0 + 1e-6), "u({r}) = {} > {bound}", st.u[i]);
                }
            }
        }
    }

    #[test]
    fn tail_mass_is_nonincreasing_in_radius(h in 0.5f64..5.0, w in 0.5f64..3.0) {
        let s = physical(reference(), RadialGrid::uniform(2, 20.0, 201).unwrap());
        let st = s.init_state(&InitialCondition::Bump { height: h, width: w }).unwrap();
        let tails: Vec<f64> = (1..20).map(|k| s.tail_mass(&st, k as f64).unwrap()).collect();
        prop_assert!(tails.windows(2).all(|p| p[1] <= p[0]));
        prop_assert!(tails[0] <= s.mass(&st));
    }
}

#[test]
fn unit_ball_masses() {
    let e = reference();
    let s = physical(e, RadialGrid::uniform(2, 1.0, 401).unwrap());
    let mut st = s.init_state(&InitialCondition::Zero).unwrap();
    st.u.iter_mut().for_each(|x| *x = 1.0);
    assert!((s.mass(&st) - std::f64::consts::PI).abs() < 1e-10);
    let e1 = derive_exponents(1.5, 0.8, 1).unwrap();
    let s1 = physical(e1, RadialGrid::uniform(1, 1.0, 401).unwrap());
    let mut st1 = s1.init_state(&InitialCondition::Zero).unwrap();
    st1.u.iter_mut().for_each(|x| *x = 1.0);
    assert!((s1.mass(&st1) - 2.0).abs() < 1e-10);
}

#[test]
fn barrier_tail_mass_follows_the_power_law() {
    // ∫_R^∞ γ r^{-α/β} r^{N-1} dr ∝ R^{N-α/β}.
    let e = reference();
    let s = physical(e, RadialGrid::graded(2, 0.01, 0.01, 1e6).unwrap());
    let u0 = InitialCondition::BarrierCapped { height: 1e6, offset: 0.0 };
    let st = s.init_state(&u0).unwrap();
    let (r1, r2) = (10.0, 100.0);
    let slope = (s.tail_mass(&st, r2).unwrap() / s.tail_mass(&st, r1).unwrap()).ln() / (r2 / r1).ln();
    let want = e.nf() - e.tail_barrier_exp;
    assert!((slope - want).abs() < 0.02, "{slope} vs {want}");
}

#[test]
fn runs_are_bitwise_reproducible_and_compose() {
    let s = physical(reference(), RadialGrid::uniform(2, 10.0, 101).unwrap());
    let u0 = InitialCondition::Bump { height: 2.0, width: 1.0 };
    let obs = Observers {
        times: vec![0.01],
        tail_radii: vec![],
    };
    let full = |st| s.evolve_until(st, 0.02, &obs, &mut |_, _| {}).unwrap().0;
    let a = full(s.init_state(&u0).unwrap());
    let b = full(s.init_state(&u0).unwrap());
    assert_eq!(a.u, b.u);
    let none = Observers::default();
    let half = s.evolve_until(s.init_state(&u0).unwrap(), 0.01, &none, &mut |_, _| {}).unwrap().0;
    let two = s.evolve_until(half, 0.02, &none, &mut |_, _| {}).unwrap().0;
    assert_eq!(a.u, two.u);
    assert_eq!(a.steps, two.steps);
}

#[test]
fn empty_evolution_is_the_identity() {
    let s = physical(reference(), RadialGrid::uniform(2, 10.0, 101).unwrap());
    let st = s.init_state(&InitialCondition::Bump { height: 1.0, width: 1.0 }).unwrap();
    let (end, log) = s.evolve_until(st.clone(), st.s, &Observers::default(), &mut |_, _| {}).unwrap();
    assert_eq!(end, st);
    assert!(log.is_empty());
}
