use mixergm::engine::simulate_graph;
use mixergm::metrics::adjusted_rand_index;
use mixergm::rng::{self, domain};
use mixergm::selection::{membership_probs, observed_dic, select_k, DEFAULT_EPSILON};
use mixergm::{
    ChainConfig, Ensemble, InitStrategy, MixtureModel, ModelSpec, NodeCovariates, PriorSpec, SamplerConfig, Term,
};

fn two_cluster_ensemble(per_cluster: usize, n: usize, seed: u64) -> (Ensemble, Vec<usize>) {
    let spec = ModelSpec::new(vec![Term::Edges], false).unwrap();
    let x = NodeCovariates::empty(n);
    let thetas = [-2.5, 0.5];
    let mut members = Vec::new();
    let mut labels = Vec::new();
    for (c, t) in thetas.iter().enumerate() {
        for i in 0..per_cluster {
            let mut rng = rng::stream(seed, domain::TEST, (c * per_cluster + i) as u64);
            let g = simulate_graph(&spec, &[*t], n, &x, SamplerConfig::for_nodes(n), &mut rng).unwrap();
            members.push((g, x.clone()));
            labels.push(c);
        }
    }
    (Ensemble::new(members).unwrap(), labels)
}

#[test]
fn separated_clusters_are_recovered_and_selected() {
    let (ens, truth) = two_cluster_ensemble(6, 15, 21);
    let spec = ModelSpec::new(vec![Term::Edges], false).unwrap();
    let model = MixtureModel::new(spec.clone(), &ens).unwrap();
    let config = ChainConfig {
        total_iterations: 4000,
        burn_in: 1000,
        thin: 10,
        init: InitStrategy::MpleKmeans,
        seed: 5,
    };
    let mut dics = Vec::new();
    let mut fits = Vec::new();
    for k in 1..=3 {
        let priors = PriorSpec {
            proposal_sd: 0.1,
            ..PriorSpec::defaults(k, &spec, None)
        };
        let post = model.run_chain(k, &priors, &config).unwrap();
        dics.push(observed_dic(&post, &model).unwrap());
        fits.push(post);
    }
    let report = select_k(&dics, DEFAULT_EPSILON).unwrap();
    assert_eq!(report.selected, 2, "{dics:?}");

    let m = membership_probs(&fits[1], &model).unwrap();
    assert_eq!(adjusted_rand_index(&truth, &m.labels).unwrap(), 1.0);
    // edges-only MLE of each cluster is the logit of its pooled density
    let means = fits[1].theta_mean();
    for c in 0..2 {
        let (edges, dyads) = ens
            .iter()
            .zip(&truth)
            .filter(|(_, &l)| l == c)
            .fold((0, 0), |(e, d), (net, _)| {
                (e + net.graph.edge_count(), d + net.graph.dyad_count())
            });
        let p = edges as f64 / dyads as f64;
        let mle = (p / (1.0 - p)).ln();
        assert!(
            (means[c][0] - mle).abs() < 0.05,
            "cluster {c}: {} vs {mle}",
            means[c][0]
        );
    }
}

#[test]
fn chains_are_reproducible_from_the_seed() {
    let (ens, _) = two_cluster_ensemble(3, 8, 2);
    let spec = ModelSpec::new(vec![Term::Edges, Term::Gwesp { decay: 0.25 }], false).unwrap();
    let model = MixtureModel::new(spec.clone(), &ens).unwrap();
    let priors = PriorSpec::defaults(2, &spec, None);
    let config = ChainConfig {
        total_iterations: 600,
        burn_in: 100,
        thin: 5,
        init: InitStrategy::Random { edges_anchor: -2.0 },
        seed: 77,
    };
    let a = model.run_chain(2, &priors, &config).unwrap();
    let b = model.run_chain(2, &priors, &config).unwrap();
    assert_eq!(a.draws, b.draws);
    let c = model
        .run_chain(2, &priors, &ChainConfig { seed: 78, ..config })
        .unwrap();
    assert_ne!(a.draws, c.draws);
}
