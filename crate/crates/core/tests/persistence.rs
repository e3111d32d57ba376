use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfrw::embed::{LagSpec, TimeSeries, TransformPipeline};
use rfrw::io::{training_data, ModelFile};
use rfrw::{fit_forest, ForestConfig, GrowthPolicy, MTry, WeightScheme};

#[test]
fn reloaded_models_predict_bit_identically() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let dir = tempfile::tempdir().unwrap();
    for i in 0..50 {
        let n = rng.random_range(60..250);
        // Awkward magnitudes so thresholds and estimates need every digit.
        let scale = 10f64.powi(rng.random_range(-6..7));
        let values: Vec<f64> = (0..n).map(|_| scale * rng.random_range(0.1..10.0f64).powf(1.7)).collect();
        let lags = rng.random_range(1..6);
        let spec = LagSpec::response(lags);
        let series = TimeSeries::new(values);
        let (pipeline, data) = training_data(&series, &spec, &TransformPipeline::default()).unwrap();
        let scheme = [WeightScheme::ExpOne, WeightScheme::LogNormalUnit, WeightScheme::Bootstrap][i % 3];
        let config = ForestConfig {
            num_trees: rng.random_range(1..20),
            m_try: MTry::Third,
            policy: GrowthPolicy::AlgorithmicK { k: rng.random_range(1..8) },
            weight_scheme: scheme,
            master_seed: rng.random(),
        };
        let forest = fit_forest(&data, &config).unwrap();
        let model = ModelFile::new(&forest, spec, pipeline, n, data.n_rows());
        let path = dir.path().join(format!("m{i}.json"));
        model.save(&path).unwrap();
        let back = ModelFile::load(&path).unwrap().forest().unwrap();
        assert_eq!(back, forest);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..lags).map(|_| scale * rng.random_range(-1.0..12.0)).collect();
            assert_eq!(
                forest.predict(&x).unwrap().to_bits(),
                back.predict(&x).unwrap().to_bits()
            );
        }
    }
}
