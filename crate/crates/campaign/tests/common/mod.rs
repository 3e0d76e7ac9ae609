#![allow(dead_code)]

use std::time::Duration;

use monobo::benchmarks::{eval_benchmark, BenchmarkId};
use monobo::engine::{AlgoConfig, AlgoTag};
use monobo::target::MonotoneDeclaration;
use monobo_campaign::model::{CreateCampaign, DimensionSpec};
use monobo_campaign::service::CampaignService;
use monobo_campaign::store::CampaignStore;

pub fn bowl_request(algo: AlgoTag, seed: u64) -> CreateCampaign {
    CreateCampaign {
        name: "bowl".into(),
        dimensions: ["temperature", "time"]
            .iter()
            .map(|l| DimensionSpec {
                label: l.to_string(),
                unit: None,
                lower: 0.0,
                upper: 5.0,
            })
            .collect(),
        target: 1.5,
        declarations: vec![MonotoneDeclaration::decreasing(0)],
        algo,
        config: None,
        seed,
        initial_design: None,
    }
}

pub fn bowl(x: &[f64]) -> f64 {
    eval_benchmark(BenchmarkId::F1, x).unwrap()
}

pub fn service(dir: &std::path::Path) -> CampaignService {
    CampaignService::new(
        CampaignStore::open(dir).unwrap(),
        AlgoConfig::default(),
        Duration::from_secs(600),
    )
}
