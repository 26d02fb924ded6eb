use coilopt::analysis::*;
use coilopt::evaluator::Parameterisation;
use coilopt::mfbo::*;
use proptest::prelude::*;

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p{i}")).collect()
}

fn plane() -> DesignSpace {
    DesignSpace::new(Parameterisation::Box {
        labels: vec!["active".into(), "inert".into()],
        bounds: vec![(0.0, 1.0); 2],
    })
    .unwrap()
}

fn config() -> CampaignConfig {
    CampaignConfig {
        acquisition_starts: 12,
        ..CampaignConfig::default()
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn inert_dimension_has_the_longer_lengthscale() {
    let ev = TanksEvaluator::new(vec![1.0, 0.0]);
    let (mut active, mut inert) = (Vec::new(), Vec::new());
    for seed in 0..10 {
        let state = run_campaign(plane(), &ev, 40.0, config(), seed).unwrap();
        let history = lengthscale_history(&state).unwrap();
        let last = history.rows.last().unwrap();
        active.push(last[0]);
        inert.push(last[1]);
    }
    assert!(median(active.clone()) < median(inert.clone()), "{active:?} vs {inert:?}");
}

#[test]
fn exports_follow_the_history() {
    let ev = TanksEvaluator::new(vec![1.0, 0.4]);
    let state = run_campaign(plane(), &ev, 50.0, config(), 7).unwrap();

    let ls = lengthscale_history(&state).unwrap();
    assert_eq!(ls.rows.len(), state.gp_snapshots.len());
    assert_eq!(ls.labels, vec!["active", "inert", "axial", "radial"]);
    assert!(ls.rows.iter().all(|r| r.len() == 4));
    let csv = ls.to_csv().unwrap();
    assert_eq!(csv.lines().count(), ls.rows.len() + 1);
    let hist = ls.histograms(8);
    assert_eq!(hist.len(), ls.rows.len());
    assert!(hist.iter().all(|h| h.counts.iter().sum::<usize>() == 4));
    assert!(ls.to_svg().starts_with("<svg"));
    assert!(ls.to_heatmap_svg().starts_with("<svg"));

    let v = campaign_variability(&state).unwrap();
    assert_eq!(v.labels, vec!["active", "inert"]);
    assert_eq!(v.variability.iter().copied().fold(0.0, f64::max), 1.0);
    assert!(v.variability.iter().all(|&x| x > 0.0 && x <= 1.0));

    let table = export_embedding_data(&state).unwrap();
    assert_eq!(table.rows.len(), state.history.len());
    assert_eq!(table.header, vec!["index", "active", "inert", "iteration", "axial", "radial", "f"]);
    let text = table.to_csv().unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let parsed: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(parsed.len(), state.history.len());
    for (rec, e) in parsed.iter().zip(&state.history) {
        let x: Vec<f64> = (1..3).map(|i| rec[i].parse().unwrap()).collect();
        assert_eq!(x, e.x);
        assert_eq!(rec[3].parse::<i64>().unwrap(), e.iteration);
        assert_eq!(rec[4].parse::<f64>().unwrap(), e.z_rounded.axial);
        assert_eq!(rec[5].parse::<f64>().unwrap(), e.z_rounded.radial);
        assert_eq!(rec[6].parse::<f64>().ok(), e.f);
    }
    // exports are pure functions of the state
    assert_eq!(export_embedding_data(&state).unwrap(), table);
    assert_eq!(lengthscale_history(&state).unwrap(), ls);
}

#[test]
fn empty_campaigns_are_reported() {
    let state = CampaignState::new(plane(), config(), 10.0, 0);
    assert_eq!(lengthscale_history(&state), Err(AnalysisError::NoSnapshots));
    assert_eq!(export_embedding_data(&state).unwrap_err(), AnalysisError::EmptyHistory);
}

#[test]
fn hand_computed_variability() {
    let r = parameter_variability(&[1.0, 2.0, 4.0], &labels(3), 5).unwrap();
    assert_eq!(r.variability, vec![1.0, 0.5, 0.25]);
    assert_eq!(r.source_iteration, 5);
    assert!(parameter_variability(&[1.0, 2.0], &labels(3), 0).is_err());
}

proptest! {
    #[test]
    fn variability_ignores_scale(ls in prop::collection::vec(1e-3f64..1e3, 1..10), c in 1e-3f64..1e3) {
        let a = parameter_variability(&ls, &labels(ls.len()), 0).unwrap();
        let scaled: Vec<f64> = ls.iter().map(|l| l * c).collect();
        let b = parameter_variability(&scaled, &labels(ls.len()), 0).unwrap();
        for (x, y) in a.variability.iter().zip(&b.variability) {
            prop_assert!((x - y).abs() <= 4.0 * f64::EPSILON * x);
        }
        let max = a.variability.iter().copied().fold(0.0, f64::max);
        prop_assert_eq!(max, 1.0);
        prop_assert!(a.variability.iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn variability_permutes_with_its_input(ls in prop::collection::vec(1e-3f64..1e3, 2..10), k in 0usize..10) {
        let mut rotated = ls.clone();
        rotated.rotate_left(k % ls.len());
        let a = parameter_variability(&ls, &labels(ls.len()), 0).unwrap().variability;
        let mut b = parameter_variability(&rotated, &labels(ls.len()), 0).unwrap().variability;
        b.rotate_right(k % ls.len());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn equal_lengthscales_read_one(l in 1e-3f64..1e3, n in 1usize..10) {
        let r = parameter_variability(&vec![l; n], &labels(n), 0).unwrap();
        prop_assert_eq!(r.variability, vec![1.0; n]);
    }
}
