mod common;

use std::sync::Arc;

use common::{bowl, bowl_request, service};
use monobo::engine::{suggest, AlgoTag};
use monobo::target::MonotoneDeclaration;
use monobo_campaign::model::EventKind;
use monobo_campaign::service::ObserveRequest;
use monobo_campaign::CampaignError;

fn observe(svc: &monobo_campaign::service::CampaignService, id: &str, ticket: u64, y: f64) {
    svc.observe(
        id,
        ObserveRequest {
            ticket_id: ticket,
            y,
            ..Default::default()
        },
    )
    .unwrap();
}

fn cycle(svc: &monobo_campaign::service::CampaignService, id: &str, n: usize) {
    for _ in 0..n {
        let t = svc.suggest(id).unwrap();
        observe(svc, id, t.id, bowl(&t.x));
    }
}

#[test]
fn rejects_invalid_requests_with_field_messages() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(dir.path());
    let mut req = bowl_request(AlgoTag::BoMg, 1);
    req.dimensions[1].lower = 6.0;
    req.declarations.push(MonotoneDeclaration::increasing(0));
    match svc.create(req) {
        Err(CampaignError::Validation(fields)) => {
            let names: Vec<_> = fields.iter().map(|f| f.field.as_str()).collect();
            assert!(names.iter().any(|f| f.starts_with("dimensions[1]")), "{names:?}");
            assert!(names.iter().any(|f| f.starts_with("declarations")), "{names:?}");
        }
        other => panic!("expected validation error, got {other:?}"),
    }
    assert!(svc.list().unwrap().is_empty());
}

#[test]
fn seeds_then_model_suggestions() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(dir.path());
    let view = svc.create(bowl_request(AlgoTag::BoMg, 3)).unwrap();
    let id = view.id.clone();
    assert_eq!(svc.list().unwrap().len(), 1);

    let first = svc.suggest(&id).unwrap();
    assert!(first.initial_design);
    assert_eq!(first.labeled[0].label, "temperature");
    assert_eq!(svc.suggest(&id).unwrap(), first, "open ticket is re-issued unchanged");
    observe(&svc, &id, first.id, bowl(&first.x));
    cycle(&svc, &id, 2);

    let state = svc.state(&id).unwrap();
    assert!(!state.in_initial_design());
    let expected = suggest(&state.bo_state().unwrap()).unwrap();
    let ticket = svc.suggest(&id).unwrap();
    assert!(!ticket.initial_design);
    assert_eq!(ticket.x, expected.x_next);
    assert_eq!(ticket.diagnostics, expected.diagnostics);
    assert!(ticket.diagnostics.coefficient.is_some());
    assert!(ticket.diagnostics.virtual_points > 0);
}

#[test]
fn observation_rules() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(dir.path());
    let id = svc.create(bowl_request(AlgoTag::Standard, 1)).unwrap().id;

    let err = svc.observe(&id, ObserveRequest { ticket_id: 1, y: 1.0, ..Default::default() });
    assert!(matches!(err, Err(CampaignError::Conflict(_))));

    let t = svc.suggest(&id).unwrap();
    let err = svc.observe(&id, ObserveRequest { ticket_id: t.id + 1, y: 1.0, ..Default::default() });
    assert!(matches!(err, Err(CampaignError::Conflict(_))));
    let err = svc.observe(&id, ObserveRequest { ticket_id: t.id, y: f64::NAN, ..Default::default() });
    assert!(matches!(err, Err(CampaignError::Validation(_))));
    let outside = ObserveRequest {
        ticket_id: t.id,
        y: 1.0,
        x: Some(vec![6.0, 1.0]),
        ..Default::default()
    };
    assert!(matches!(svc.observe(&id, outside.clone()), Err(CampaignError::Validation(_))));

    let view = svc
        .observe(&id, ObserveRequest { allow_out_of_bounds: true, y: 1.5, ..outside })
        .unwrap();
    assert_eq!(view.best_distance, Some(0.0));
    assert!(view.history[0].out_of_bounds);
    let err = svc.observe(&id, ObserveRequest { ticket_id: t.id, y: 1.0, ..Default::default() });
    assert!(matches!(err, Err(CampaignError::Conflict(_))), "closed ticket");

    // the overridden point stays in the model's data
    cycle(&svc, &id, 4);
    let t = svc.suggest(&id).unwrap();
    assert!(!t.initial_design);
    assert!(svc.state(&id).unwrap().bounds().contains(&t.x));
}

#[test]
fn export_matches_history() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(dir.path());
    let id = svc.create(bowl_request(AlgoTag::Standard, 2)).unwrap().id;
    let empty = svc.export(&id, "csv").unwrap();
    assert_eq!(empty, "t,temperature,time,y,g,best_g,alpha_or_beta,algo,seed\n");
    assert!(matches!(svc.export(&id, "xlsx"), Err(CampaignError::UnsupportedFormat(_))));

    cycle(&svc, &id, 5);
    let text = svc.export(&id, "csv").unwrap();
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = r.records().map(|r| r.unwrap()).collect();
    let history = svc.get(&id).unwrap().history;
    assert_eq!(rows.len(), history.len());
    for (row, h) in rows.iter().zip(&history) {
        assert_eq!(row[0].parse::<usize>().unwrap(), h.t);
        assert_eq!(row[1].parse::<f64>().unwrap(), h.x[0]);
        assert_eq!(row[2].parse::<f64>().unwrap(), h.x[1]);
        assert_eq!(row[3].parse::<f64>().unwrap(), h.y);
        assert_eq!(row[5].parse::<f64>().unwrap(), h.best_distance);
        assert_eq!(&row[7], "standard");
    }
}

#[test]
fn slices_through_the_models() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(dir.path());
    let id = svc.create(bowl_request(AlgoTag::BoMg, 4)).unwrap().id;
    let cold = svc.slice(&id, 0, 10, None).unwrap();
    assert!(!cold.model_ready);
    assert!(cold.points.is_empty());

    cycle(&svc, &id, 4);
    let ends = svc.slice(&id, 1, 2, None).unwrap();
    assert!(ends.model_ready);
    let coords: Vec<f64> = ends.points.iter().map(|p| p.coord).collect();
    assert_eq!(coords, vec![0.0, 5.0]);

    let s = svc.slice(&id, 0, 25, Some(vec![2.0, 2.0])).unwrap();
    assert_eq!(s.points.len(), 25);
    assert!(s.points.iter().all(|p| p.var_f >= 0.0 && p.var_g >= 0.0 && p.mean_g.is_finite()));
    assert!(svc.slice(&id, 2, 10, None).is_err());
}

#[test]
fn reload_replays_identical_state() {
    let dir = tempfile::tempdir().unwrap();
    let id = {
        let svc = service(dir.path());
        let id = svc.create(bowl_request(AlgoTag::BoDs, 5)).unwrap().id;
        cycle(&svc, &id, 4);
        svc.suggest(&id).unwrap();
        id
    };
    let a = service(dir.path()).state(&id).unwrap();
    let b = service(dir.path()).state(&id).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.history.len(), 4);
    assert!(a.open_ticket.is_some());

    let events = service(dir.path()).store().read_log(&id).unwrap();
    assert!(matches!(events[0].kind, EventKind::Created { .. }));
    assert_eq!(events.len(), 1 + 2 * 4 + 1);
}

#[test]
fn concurrent_suggests_share_one_ticket() {
    let dir = tempfile::tempdir().unwrap();
    let svc = Arc::new(service(dir.path()));
    let id = svc.create(bowl_request(AlgoTag::Standard, 6)).unwrap().id;
    cycle(&svc, &id, 3);
    let tickets: Vec<_> = (0..6)
        .map(|_| {
            let svc = svc.clone();
            let id = id.clone();
            std::thread::spawn(move || svc.suggest(&id).unwrap())
        })
        .collect::<Vec<_>>()
        .into_iter()
        .map(|h| h.join().unwrap())
        .collect();
    assert!(tickets.windows(2).all(|w| w[0] == w[1]));
    let suggested = svc
        .store()
        .read_log(&id)
        .unwrap()
        .iter()
        .filter(|e| matches!(e.kind, EventKind::Suggested { .. }))
        .count();
    assert_eq!(suggested, 4);
}
