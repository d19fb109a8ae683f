use vbts::env::ContextSet;
use vbts::policies::{run_episode, EpisodeOptions, History, Oracle, Policy, Selection, UniformRandom};
use vbts::{seeded_rng, Result, SimRng};
use vbts_harness::ingest::{
    dataset_env, fit_bundle, generate_mimic, parse_labelled, read_labelled_csv, write_labelled_csv, LabelledTable,
    Transform, MIMIC_CLASS0, MIMIC_FEATURES, MIMIC_ROWS,
};

/// Plays whichever arm carries label 1.
struct AlwaysClassOne {
    history: History,
}

impl Policy for AlwaysClassOne {
    fn name(&self) -> &str {
        "class_one"
    }

    fn select(&mut self, ctx: &ContextSet, _rng: &mut SimRng) -> Result<Selection> {
        let labels = ctx.labels.as_ref().expect("dataset contexts are labelled");
        Ok(Selection::greedy(labels.iter().position(|&l| l == 1).unwrap()))
    }

    fn observe(&mut self, x: &[f64], reward: f64) -> Result<()> {
        self.history.push(x, reward)
    }

    fn history(&self) -> &History {
        &self.history
    }
}

/// Two well separated Gaussian classes in d = 6; only feature 0 carries
/// the label.
fn separable(n: usize, seed: u64) -> LabelledTable {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let mut rng = seeded_rng(seed);
    let d = 6;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 2) as u8;
        let mut row: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        row[0] += if label == 1 { 4.0 } else { -4.0 };
        rows.push(row);
        labels.push(label);
    }
    LabelledTable { feature_names: (0..d).map(|j| format!("f{j}")).collect(), rows, labels }
}

#[test]
fn mimic_has_expected_shape() {
    let mimic = generate_mimic(0);
    assert_eq!(mimic.table.rows.len(), MIMIC_ROWS);
    assert!(mimic.table.rows.iter().all(|r| r.len() == MIMIC_FEATURES));
    assert_eq!(mimic.table.labels.iter().filter(|&&l| l == 0).count(), MIMIC_CLASS0);
    assert_eq!(generate_mimic(0).table.rows, mimic.table.rows);
}

#[test]
fn csv_round_trip_and_log_transform() {
    let dir = tempfile::tempdir().unwrap();
    let table = separable(20, 1);
    let path = dir.path().join("toy.csv");
    write_labelled_csv(&table, &path).unwrap();
    let back = read_labelled_csv(&path, "label", Transform::None).unwrap();
    assert_eq!(back.labels, table.labels);
    for (a, b) in back.rows.iter().zip(&table.rows) {
        for (x, y) in a.iter().zip(b) {
            assert_eq!(x, y);
        }
    }
    let text = "g1,class,g2\n1,0,3\n7,1,0\n";
    let logged = parse_labelled(text.as_bytes(), "class", Transform::Log2).unwrap();
    assert_eq!(logged.feature_names, vec!["g1", "g2"]);
    assert_eq!(logged.rows, vec![vec![1.0, 2.0], vec![3.0, 0.0]]);
    assert!(parse_labelled(text.as_bytes(), "missing", Transform::None).is_err());
}

#[test]
fn constant_column_gets_zero_coefficient() {
    let mut table = separable(80, 2);
    for row in &mut table.rows {
        row[3] = 0.0;
    }
    let bundle = fit_bundle(table, 4).unwrap();
    assert_eq!(bundle.beta_ref[3], 0.0);
    assert!(bundle.beta_ref[0] > 0.0);
    assert!(bundle.noise_scale.is_finite() && bundle.noise_scale > 0.0);
}

#[test]
fn reference_fit_separates_toy_classes() {
    let bundle = fit_bundle(separable(120, 3), 5).unwrap();
    let env = dataset_env(&bundle, Some(0.1)).unwrap();
    let mut oracle = Oracle::new(bundle.beta_ref.clone());
    let trace =
        run_episode(&mut oracle, &env, &EpisodeOptions::new(2000), 0, &mut seeded_rng(4), &mut seeded_rng(5)).unwrap();
    let acc = trace.accuracy().unwrap();
    assert!(acc >= 0.95, "accuracy {acc}");
}

#[test]
fn dataset_env_accuracy_bounds() {
    let bundle = fit_bundle(separable(60, 6), 3).unwrap();
    let env = dataset_env(&bundle, None).unwrap();
    assert_eq!(env.num_arms, 2);

    let mut always = AlwaysClassOne { history: History::new(6) };
    let trace =
        run_episode(&mut always, &env, &EpisodeOptions::new(500), 0, &mut seeded_rng(7), &mut seeded_rng(8)).unwrap();
    assert_eq!(trace.accuracy(), Some(1.0));

    let mut uniform = UniformRandom::new(6);
    let trace =
        run_episode(&mut uniform, &env, &EpisodeOptions::new(10_000), 0, &mut seeded_rng(9), &mut seeded_rng(10))
            .unwrap();
    let acc = trace.accuracy().unwrap();
    assert!((0.49..=0.51).contains(&acc), "uniform accuracy {acc}");
}
