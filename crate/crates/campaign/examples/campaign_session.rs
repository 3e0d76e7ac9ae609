//! A complete campaign driven in-process: create, alternate suggestions and
//! measurements, slice the posterior and export the history.

use std::time::Duration;

use monobo::benchmarks::{eval_benchmark, BenchmarkId};
use monobo::engine::{AlgoConfig, AlgoTag};
use monobo::target::MonotoneDeclaration;
use monobo_campaign::model::{CreateCampaign, DimensionSpec};
use monobo_campaign::service::{CampaignService, ObserveRequest};
use monobo_campaign::store::CampaignStore;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let svc = CampaignService::new(CampaignStore::open(dir.path())?, AlgoConfig::default(), Duration::from_secs(30));

    let view = svc.create(CreateCampaign {
        name: "spinning".into(),
        dimensions: vec![
            DimensionSpec { label: "flow".into(), unit: Some("ml/h".into()), lower: 0.0, upper: 5.0 },
            DimensionSpec { label: "voltage".into(), unit: Some("kV".into()), lower: 0.0, upper: 5.0 },
        ],
        target: 1.5,
        declarations: vec![MonotoneDeclaration::decreasing(0)],
        algo: AlgoTag::BoMg,
        config: None,
        seed: 42,
        initial_design: None,
    })?;
    println!("campaign {}", view.id);

    for _ in 0..10 {
        let ticket = svc.suggest(&view.id)?;
        let y = eval_benchmark(BenchmarkId::F1, &ticket.x)?;
        let state = svc.observe(&view.id, ObserveRequest { ticket_id: ticket.id, y, ..Default::default() })?;
        let coords: Vec<String> = ticket.labeled.iter().map(|c| format!("{}={:.3}", c.label, c.value)).collect();
        println!(
            "ticket {:>2} {}  y={y:.4}  best={:.4}{}",
            ticket.id,
            coords.join(" "),
            state.best_distance.unwrap(),
            if ticket.initial_design { "  (design)" } else { "" }
        );
    }

    let slice = svc.slice(&view.id, 0, 6, None)?;
    for p in &slice.points {
        println!("flow={:.2}  f={:.3}±{:.3}  g={:.3}", p.coord, p.mean_f, 3.0 * p.var_f.sqrt(), p.mean_g);
    }
    print!("{}", svc.export(&view.id, "csv")?);
    Ok(())
}
