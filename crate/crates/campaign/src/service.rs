//! Campaign operations with per-campaign serialization. Every mutation is
//! written to the event log before it is applied in memory.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use chrono::Utc;
use serde::{Deserialize, Serialize};

use monobo::engine::{suggest, AlgoConfig, AlgoTag, Diagnostics};
use monobo::slice::{posterior_slice, PosteriorSlice};

use crate::error::{CampaignError, Result};
use crate::model::{CampaignState, CreateCampaign, Event, EventKind, HistoryRow, SuggestionTicket};
use crate::store::{CampaignStore, IndexEntry};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObserveRequest {
    pub ticket_id: u64,
    pub y: f64,
    #[serde(default)]
    pub note: Option<String>,
    /// The point actually run, when it differs from the suggestion.
    #[serde(default)]
    pub x: Option<Vec<f64>>,
    #[serde(default)]
    pub allow_out_of_bounds: bool,
}

/// Read model returned by the API.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CampaignView {
    pub id: String,
    pub name: String,
    pub algo: AlgoTag,
    pub request: CreateCampaign,
    pub config: AlgoConfig,
    pub observations: usize,
    pub best_distance: Option<f64>,
    pub in_initial_design: bool,
    pub open_ticket: Option<SuggestionTicket>,
    pub history: Vec<HistoryRow>,
}

impl From<&CampaignState> for CampaignView {
    fn from(s: &CampaignState) -> Self {
        Self {
            id: s.id.clone(),
            name: s.request.name.clone(),
            algo: s.request.algo,
            request: s.request.clone(),
            config: s.config.clone(),
            observations: s.history.len(),
            best_distance: s.best_distance(),
            in_initial_design: s.in_initial_design(),
            open_ticket: s.open_ticket.clone(),
            history: s.history.clone(),
        }
    }
}

pub struct CampaignService {
    store: CampaignStore,
    defaults: AlgoConfig,
    suggest_budget: Duration,
    campaigns: Mutex<HashMap<String, Arc<Mutex<CampaignState>>>>,
    index_lock: Mutex<()>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    // a panic mid-operation leaves the log authoritative; keep serving
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl CampaignService {
    pub fn new(store: CampaignStore, defaults: AlgoConfig, suggest_budget: Duration) -> Self {
        Self {
            store,
            defaults,
            suggest_budget,
            campaigns: Mutex::new(HashMap::new()),
            index_lock: Mutex::new(()),
        }
    }

    pub fn store(&self) -> &CampaignStore {
        &self.store
    }

    fn handle(&self, id: &str) -> Result<Arc<Mutex<CampaignState>>> {
        let mut map = lock(&self.campaigns);
        if let Some(h) = map.get(id) {
            return Ok(h.clone());
        }
        let events = self.store.read_log(id)?;
        let state = CampaignState::replay(&events).map_err(|e| CampaignError::CorruptLog {
            path: id.to_string(),
            reason: e.to_string(),
        })?;
        let h = Arc::new(Mutex::new(state));
        map.insert(id.to_string(), h.clone());
        Ok(h)
    }

    /// Persists `kind` as the next event and applies it.
    fn commit(&self, state: &mut CampaignState, kind: EventKind) -> Result<()> {
        let event = Event {
            seq: state.event_count,
            at: Utc::now(),
            kind,
        };
        state.check(&event)?;
        self.store.append(&state.id, &event)?;
        state.apply(&event)
    }

    pub fn create(&self, mut request: CreateCampaign) -> Result<CampaignView> {
        request.validate()?;
        if request.config.is_none() {
            request.config = Some(self.defaults.clone());
        }
        let id = uuid::Uuid::new_v4().simple().to_string();
        let event = Event {
            seq: 0,
            at: Utc::now(),
            kind: EventKind::Created {
                id: id.clone(),
                request: request.clone(),
            },
        };
        let state = CampaignState::from_created(&event)?;
        self.store.append(&id, &event)?;
        {
            let _guard = lock(&self.index_lock);
            let mut index = self.store.read_index()?;
            index.push(IndexEntry {
                id: id.clone(),
                name: request.name.clone(),
                created_at: event.at,
            });
            self.store.write_index(&index)?;
        }
        let view = CampaignView::from(&state);
        lock(&self.campaigns).insert(id, Arc::new(Mutex::new(state)));
        Ok(view)
    }

    pub fn list(&self) -> Result<Vec<IndexEntry>> {
        self.store.read_index()
    }

    pub fn get(&self, id: &str) -> Result<CampaignView> {
        let h = self.handle(id)?;
        let state = lock(&h);
        Ok(CampaignView::from(&*state))
    }

    pub fn state(&self, id: &str) -> Result<CampaignState> {
        let h = self.handle(id)?;
        let state = lock(&h);
        Ok(state.clone())
    }

    /// Issues the next suggestion, or returns the open ticket unchanged if
    /// one is still awaiting its observation.
    pub fn suggest(&self, id: &str) -> Result<SuggestionTicket> {
        let h = self.handle(id)?;
        let mut state = lock(&h);
        if let Some(open) = &state.open_ticket {
            return Ok(open.clone());
        }
        let (x, diagnostics, initial_design) = match state.next_design_point() {
            Some(x) => (x, Diagnostics::default(), true),
            None => {
                let mut bo = state.bo_state()?;
                bo.deadline = Some(Instant::now() + self.suggest_budget);
                let rec = suggest(&bo)?;
                (rec.x_next, rec.diagnostics, false)
            }
        };
        let ticket = SuggestionTicket {
            id: state.next_ticket,
            labeled: state.labeled(&x),
            x,
            initial_design,
            diagnostics,
            issued_at: Utc::now(),
        };
        self.commit(&mut state, EventKind::Suggested { ticket: ticket.clone() })?;
        Ok(ticket)
    }

    pub fn observe(&self, id: &str, req: ObserveRequest) -> Result<CampaignView> {
        let h = self.handle(id)?;
        let mut state = lock(&h);
        let open = state
            .open_ticket
            .clone()
            .ok_or_else(|| CampaignError::Conflict(format!("ticket {} is not open", req.ticket_id)))?;
        let x = req.x.unwrap_or(open.x);
        let out_of_bounds = req.allow_out_of_bounds && !state.bounds().contains(&x);
        self.commit(
            &mut state,
            EventKind::Observed {
                ticket_id: req.ticket_id,
                x,
                y: req.y,
                note: req.note,
                out_of_bounds,
            },
        )?;
        Ok(CampaignView::from(&*state))
    }

    pub fn update_config(&self, id: &str, config: AlgoConfig) -> Result<CampaignView> {
        let h = self.handle(id)?;
        let mut state = lock(&h);
        self.commit(&mut state, EventKind::ConfigChanged { config })?;
        Ok(CampaignView::from(&*state))
    }

    pub fn export(&self, id: &str, format: &str) -> Result<String> {
        if !format.eq_ignore_ascii_case("csv") {
            return Err(CampaignError::UnsupportedFormat(format.to_string()));
        }
        let state = self.state(id)?;
        export_csv(&state)
    }

    /// Posterior sweep along `dim`. `fixed` defaults to the observation
    /// closest to target, or the centre of the bounds before any data.
    pub fn slice(&self, id: &str, dim: usize, resolution: usize, fixed: Option<Vec<f64>>) -> Result<PosteriorSlice> {
        let state = self.state(id)?;
        let bo = state.bo_state()?;
        let fixed = fixed.unwrap_or_else(|| match bo.incumbent() {
            Some(i) => {
                let mut x = bo.observations.xs[i].clone();
                bo.bounds.clamp(&mut x);
                x
            }
            None => bo.bounds.midpoint(),
        });
        Ok(posterior_slice(&bo, dim, &fixed, resolution)?)
    }
}

/// History as CSV: `t, <one column per dimension label>, y, g, best_g,
/// alpha_or_beta, algo, seed`, one row per observation.
pub fn export_csv(state: &CampaignState) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend(state.request.dimensions.iter().map(|d| d.label.clone()));
    header.extend(["y", "g", "best_g", "alpha_or_beta", "algo", "seed"].map(String::from));
    w.write_record(&header).map_err(csv_err)?;
    for r in &state.history {
        let mut row = vec![r.t.to_string()];
        row.extend(r.x.iter().map(|v| v.to_string()));
        row.push(r.y.to_string());
        row.push(r.distance.to_string());
        row.push(r.best_distance.to_string());
        row.push(r.coefficient.map(|c| c.to_string()).unwrap_or_default());
        row.push(state.request.algo.to_string());
        row.push(state.request.seed.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CampaignError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_err(e: csv::Error) -> CampaignError {
    CampaignError::Engine(monobo::Error::Csv(e))
}
