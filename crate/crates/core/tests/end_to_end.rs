use dynqoi::clustering::kmeans_fit;
use dynqoi::density::{cluster_weights, compute_ratios, l1_distance, rejection_sample, updated_density, Kde1d};
use dynqoi::kernel::KernelSpec;
use dynqoi::kpca::{default_proposals, learn_qois_and_transform, QoiMode};
use dynqoi::models::{generate_experiment, ExperimentConfig, ExperimentKind};
use dynqoi::splinefilter::{filter_ensemble, FilterConfig};
use dynqoi::svm::{select_classifier, SvmParams};
use ndarray::{Array2, Axis};

fn rows(values: &Array2<f64>, labels: &[usize], k: usize) -> Array2<f64> {
    let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == k).collect();
    values.select(Axis(0), &idx)
}

#[test]
fn small_oscillator_inversion_moves_towards_data_generating() {
    let cfg = ExperimentConfig {
        n_observed: 200,
        n_predicted: 600,
        ..ExperimentConfig::defaults(ExperimentKind::Oscillator)
    };
    let data = generate_experiment(&cfg, 7).unwrap();
    let filter = FilterConfig {
        time_start_idx: 0,
        time_end_idx: 500,
        num_filter_obs: 20,
        tol: 5e-2,
        min_knots: 3,
        max_knots: 12,
        optimizer_tol: 1e-8,
    };
    let fp = filter_ensemble(&data.predicted, &filter).unwrap();
    let fo = filter_ensemble(&data.observed, &filter).unwrap();
    assert_eq!(fp.values.dim(), (600, 20));
    assert_eq!(fo.values.dim(), (200, 20));
    assert_eq!(fp.filter_times[0], 1.0);
    assert!((fp.filter_times[19] - 6.0).abs() < 1e-12);

    let k = 3;
    let clusters = kmeans_fit(fp.values.view(), k, 10, 1).unwrap();
    let svm = select_classifier(
        fp.values.view(),
        &clusters.labels,
        &[KernelSpec::linear(), KernelSpec::rbf()],
        5,
        &SvmParams::default(),
        2,
    )
    .unwrap();
    let obs_labels = svm.model.classify(fo.values.view()).unwrap();
    let train_labels = svm.model.classify(fp.values.view()).unwrap();
    let agree = train_labels.iter().zip(&clusters.labels).filter(|(a, b)| a == b).count();
    assert!(agree as f64 / 600.0 > 0.95);

    let mut ratios = Vec::new();
    for c in 0..k {
        let q = learn_qois_and_transform(
            rows(&fp.values, &clusters.labels, c).view(),
            rows(&fo.values, &obs_labels, c).view(),
            &default_proposals(),
            QoiMode::Fixed { n: 2 },
        )
        .unwrap();
        assert_eq!(q.predicted.ncols(), 2);
        ratios.push(compute_ratios(q.predicted.view(), q.observed.view()).unwrap());
    }
    let weights = cluster_weights(&obs_labels, k).unwrap();
    let inv = updated_density(&data.predicted_params, &clusters.labels, &ratios, &weights).unwrap();
    assert_eq!(inv.update_weights.len(), 600);
    let mean_u = inv.update_weights.iter().sum::<f64>() / 600.0;
    assert!((mean_u - 1.0).abs() < 0.25, "mean update weight {mean_u}");

    let accepted = rejection_sample(&inv.update_weights, 3).unwrap();
    assert!(!accepted.is_empty() && accepted.len() < 600);

    for j in 0..2 {
        let bounds = data.predicted_params.bounds[j];
        let init = Kde1d::fit(&data.predicted_params.samples.column(j).to_vec(), None).unwrap();
        let dg = Kde1d::fit(&data.observed_params.samples.column(j).to_vec(), None).unwrap();
        let upd = inv.updated_marginal(&data.predicted_params, j).unwrap();
        let before = l1_distance(&init, &dg, bounds, 2001).unwrap();
        let after = l1_distance(&upd, &dg, bounds, 2001).unwrap();
        assert!(after < 0.6 * before, "parameter {j}: {after} vs {before}");
    }
}

#[test]
fn generated_ensembles_are_seed_reproducible() {
    let cfg = ExperimentConfig {
        n_observed: 5,
        n_predicted: 5,
        ..ExperimentConfig::defaults(ExperimentKind::Shock)
    };
    let a = generate_experiment(&cfg, 99).unwrap();
    let b = generate_experiment(&cfg, 99).unwrap();
    let c = generate_experiment(&cfg, 100).unwrap();
    assert_eq!(a.predicted.values, b.predicted.values);
    assert_eq!(a.observed.values, b.observed.values);
    assert_ne!(a.observed.values, c.observed.values);
}
