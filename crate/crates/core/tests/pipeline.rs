use std::path::PathBuf;

use sdgm_core::data::{default_gmm_spec, load_csv, save_csv, synth_gmm, Standardizer};
use sdgm_core::{fit, Form, Kernel, LabelColumn, ModelFile, TrainConfig};

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(rel)
}

#[test]
fn ripley_files_have_expected_shape() {
    let train = load_csv(data("ripley/ripley_train.csv"), LabelColumn::Last).unwrap();
    let test = load_csv(data("ripley/ripley_test.csv"), LabelColumn::Last).unwrap();
    assert_eq!((train.len(), train.dim(), train.num_classes()), (250, 2, 2));
    assert_eq!((test.len(), test.dim(), test.num_classes()), (1000, 2, 2));
    assert_eq!(train.labels().iter().filter(|&&l| l == 1).count(), 125);
}

#[test]
fn csv_fit_save_load_predict() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = synth_gmm(&default_gmm_spec(), 120, 200, 4).unwrap();
    let csv = dir.path().join("train.csv");
    save_csv(&train, &csv).unwrap();
    let train = load_csv(&csv, LabelColumn::Last).unwrap();

    for (form, kernel) in [
        (Form::Original, Kernel::Phi),
        (Form::Dual, Kernel::Phi),
        (Form::Dual, Kernel::Poly),
    ] {
        let standardizer = Standardizer::fit(&train);
        let cfg = TrainConfig {
            form,
            kernel,
            components: vec![2],
            max_outer_iter: 15,
            ..TrainConfig::default()
        };
        let (model, report) = fit(&standardizer.apply(&train).unwrap(), &cfg).unwrap();
        assert!(
            report.final_metrics.train_error_rate < 0.3,
            "{form:?} {kernel:?}"
        );

        let file = ModelFile {
            model,
            label_names: train.label_names().to_vec(),
            standardizer: Some(standardizer.clone()),
        };
        let path = dir.path().join("model.json");
        file.save(&path).unwrap();
        let loaded = ModelFile::load(&path).unwrap();
        assert_eq!(loaded, file);
        for x in test.rows() {
            let direct = file
                .model
                .posterior(&standardizer.transform(x).unwrap())
                .unwrap();
            assert_eq!(loaded.posterior(x).unwrap(), direct);
            assert_eq!(loaded.predict(x).unwrap(), file.predict(x).unwrap());
        }
    }
}
