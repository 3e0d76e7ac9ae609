//! Campaign requests, the event log vocabulary and the state folded from it.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use monobo::engine::{initial_design, AlgoConfig, AlgoTag, BoState, Diagnostics};
use monobo::gp::ObservationSet;
use monobo::target::{MonotoneDeclaration, TargetSpec};
use monobo::Bounds;

use crate::error::{CampaignError, FieldError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionSpec {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    pub lower: f64,
    pub upper: f64,
}

fn default_algo() -> AlgoTag {
    AlgoTag::BoMg
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreateCampaign {
    pub name: String,
    pub dimensions: Vec<DimensionSpec>,
    pub target: f64,
    #[serde(default)]
    pub declarations: Vec<MonotoneDeclaration>,
    #[serde(default = "default_algo")]
    pub algo: AlgoTag,
    /// Filled from the service defaults when absent.
    #[serde(default)]
    pub config: Option<AlgoConfig>,
    #[serde(default)]
    pub seed: u64,
    /// Random suggestions issued before model-based ones; defaults to D + 1.
    #[serde(default)]
    pub initial_design: Option<usize>,
}

impl CreateCampaign {
    /// Collects every field problem rather than stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.name.trim().is_empty() {
            errs.push(FieldError::new("name", "must not be empty"));
        }
        if self.dimensions.is_empty() {
            errs.push(FieldError::new("dimensions", "at least one dimension is required"));
        }
        for (i, d) in self.dimensions.iter().enumerate() {
            if d.label.trim().is_empty() {
                errs.push(FieldError::new(format!("dimensions[{i}].label"), "must not be empty"));
            }
            if !d.lower.is_finite() || !d.upper.is_finite() {
                errs.push(FieldError::new(format!("dimensions[{i}]"), "bounds must be finite"));
            } else if d.lower >= d.upper {
                errs.push(FieldError::new(
                    format!("dimensions[{i}].upper"),
                    format!("upper {} must exceed lower {}", d.upper, d.lower),
                ));
            }
        }
        for (i, d) in self.dimensions.iter().enumerate() {
            if self.dimensions[..i].iter().any(|o| o.label == d.label) {
                errs.push(FieldError::new(format!("dimensions[{i}].label"), format!("duplicate label '{}'", d.label)));
            }
        }
        if !self.target.is_finite() {
            errs.push(FieldError::new("target", "must be finite"));
        }
        for (i, decl) in self.declarations.iter().enumerate() {
            if decl.dim >= self.dimensions.len() {
                errs.push(FieldError::new(
                    format!("declarations[{i}].dim"),
                    format!("dimension {} does not exist", decl.dim),
                ));
            } else if self.declarations[..i].iter().any(|o| o.dim == decl.dim) {
                errs.push(FieldError::new(
                    format!("declarations[{i}].dim"),
                    format!("dimension {} is declared twice", decl.dim),
                ));
            }
        }
        if self.algo.needs_declarations() && self.declarations.is_empty() {
            errs.push(FieldError::new("declarations", format!("{} needs at least one monotone declaration", self.algo)));
        }
        if self.initial_design == Some(0) {
            errs.push(FieldError::new("initial_design", "must be >= 1"));
        }
        if let Some(cfg) = &self.config {
            if let Some(mg) = &cfg.mg {
                if let Err(e) = mg.validate() {
                    errs.push(FieldError::new("config.mg", e.to_string()));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CampaignError::Validation(errs))
        }
    }

    pub fn bounds(&self) -> Result<Bounds> {
        let pairs: Vec<(f64, f64)> = self.dimensions.iter().map(|d| (d.lower, d.upper)).collect();
        Ok(Bounds::new(&pairs)?)
    }

    pub fn initial_design_size(&self) -> usize {
        self.initial_design.unwrap_or(self.dimensions.len() + 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledCoordinate {
    pub label: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuggestionTicket {
    pub id: u64,
    pub x: Vec<f64>,
    pub labeled: Vec<LabeledCoordinate>,
    /// True while the seeded random design is being issued.
    pub initial_design: bool,
    pub diagnostics: Diagnostics,
    pub issued_at: DateTime<Utc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventKind {
    Created {
        id: String,
        request: CreateCampaign,
    },
    Suggested {
        ticket: SuggestionTicket,
    },
    Observed {
        ticket_id: u64,
        x: Vec<f64>,
        y: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        note: Option<String>,
        /// The operator accepted a measurement outside the bounds.
        #[serde(default)]
        out_of_bounds: bool,
    },
    ConfigChanged {
        config: AlgoConfig,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub at: DateTime<Utc>,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    /// 1-based observation index.
    pub t: usize,
    pub ticket_id: u64,
    pub x: Vec<f64>,
    pub y: f64,
    pub distance: f64,
    pub best_distance: f64,
    pub coefficient: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub out_of_bounds: bool,
}

/// Everything known about a campaign; a pure fold of its event log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CampaignState {
    pub id: String,
    pub request: CreateCampaign,
    pub config: AlgoConfig,
    pub created_at: DateTime<Utc>,
    pub history: Vec<HistoryRow>,
    pub open_ticket: Option<SuggestionTicket>,
    pub next_ticket: u64,
    pub event_count: u64,
    #[serde(skip)]
    bounds: Bounds,
}

impl CampaignState {
    /// Replays `events` from scratch. The first event must be `Created`.
    pub fn replay(events: &[Event]) -> Result<Self> {
        let (first, rest) = events
            .split_first()
            .ok_or_else(|| CampaignError::Conflict("event log is empty".into()))?;
        let mut state = Self::from_created(first)?;
        for e in rest {
            state.apply(e)?;
        }
        Ok(state)
    }

    pub fn from_created(event: &Event) -> Result<Self> {
        let EventKind::Created { id, request } = &event.kind else {
            return Err(CampaignError::Conflict("event log must start with a created event".into()));
        };
        request.validate()?;
        Ok(Self {
            id: id.clone(),
            bounds: request.bounds()?,
            config: request.config.clone().unwrap_or_default(),
            request: request.clone(),
            created_at: event.at,
            history: Vec::new(),
            open_ticket: None,
            next_ticket: 1,
            event_count: 1,
        })
    }

    /// Checks that `event` may follow the current state, without applying it.
    pub fn check(&self, event: &Event) -> Result<()> {
        if event.seq != self.event_count {
            return Err(CampaignError::Conflict(format!(
                "event sequence {} does not follow {}",
                event.seq,
                self.event_count - 1
            )));
        }
        match &event.kind {
            EventKind::Created { .. } => Err(CampaignError::Conflict("campaign already created".into())),
            EventKind::Suggested { ticket } => {
                if let Some(open) = &self.open_ticket {
                    return Err(CampaignError::Conflict(format!("ticket {} is still open", open.id)));
                }
                if ticket.id != self.next_ticket {
                    return Err(CampaignError::Conflict(format!("expected ticket {}, got {}", self.next_ticket, ticket.id)));
                }
                Ok(())
            }
            EventKind::Observed { ticket_id, x, y, out_of_bounds, .. } => {
                match &self.open_ticket {
                    Some(t) if t.id == *ticket_id => {}
                    Some(t) => {
                        return Err(CampaignError::Conflict(format!(
                            "ticket {ticket_id} is not the open ticket ({})",
                            t.id
                        )))
                    }
                    None => return Err(CampaignError::Conflict(format!("ticket {ticket_id} is not open"))),
                }
                if !y.is_finite() {
                    return Err(CampaignError::invalid("y", "must be finite"));
                }
                self.bounds
                    .check_point(x)
                    .map_err(|e| CampaignError::invalid("x", e.to_string()))?;
                if !self.bounds.contains(x) && !out_of_bounds {
                    return Err(CampaignError::invalid("x", "lies outside the bounds; set the override flag to accept it"));
                }
                Ok(())
            }
            EventKind::ConfigChanged { config } => {
                if let Some(mg) = &config.mg {
                    mg.validate().map_err(|e| CampaignError::invalid("config.mg", e.to_string()))?;
                }
                Ok(())
            }
        }
    }

    pub fn apply(&mut self, event: &Event) -> Result<()> {
        self.check(event)?;
        match &event.kind {
            EventKind::Created { .. } => unreachable!("rejected by check"),
            EventKind::Suggested { ticket } => {
                self.next_ticket = ticket.id + 1;
                self.open_ticket = Some(ticket.clone());
            }
            EventKind::Observed {
                ticket_id,
                x,
                y,
                note,
                out_of_bounds,
            } => {
                let ticket = self.open_ticket.take().expect("checked above");
                let target = self.target();
                let distance = target.distance(*y);
                let best_distance = self.best_distance().map_or(distance, |b| b.min(distance));
                self.history.push(HistoryRow {
                    t: self.history.len() + 1,
                    ticket_id: *ticket_id,
                    x: x.clone(),
                    y: *y,
                    distance,
                    best_distance,
                    coefficient: ticket.diagnostics.coefficient,
                    note: note.clone(),
                    out_of_bounds: *out_of_bounds,
                });
            }
            EventKind::ConfigChanged { config } => self.config = config.clone(),
        }
        self.event_count += 1;
        Ok(())
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn target(&self) -> TargetSpec {
        TargetSpec { target: self.request.target }
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn best_distance(&self) -> Option<f64> {
        self.history.last().map(|r| r.best_distance)
    }

    pub fn in_initial_design(&self) -> bool {
        self.history.len() < self.request.initial_design_size()
    }

    /// The next point of the seeded random design, if still in that phase.
    pub fn next_design_point(&self) -> Option<Vec<f64>> {
        let n = self.history.len();
        let size = self.request.initial_design_size();
        (n < size).then(|| initial_design(&self.bounds, self.request.seed, size).swap_remove(n))
    }

    pub fn labeled(&self, x: &[f64]) -> Vec<LabeledCoordinate> {
        self.request
            .dimensions
            .iter()
            .zip(x)
            .map(|(d, &value)| LabeledCoordinate {
                label: d.label.clone(),
                value,
                unit: d.unit.clone(),
            })
            .collect()
    }

    /// The optimizer's view of the campaign.
    pub fn bo_state(&self) -> Result<BoState> {
        let mut state = BoState::new(
            self.bounds.clone(),
            self.target(),
            self.request.declarations.clone(),
            self.request.algo,
            self.config.clone(),
            self.request.seed,
        )?;
        let mut obs = ObservationSet::new();
        for r in &self.history {
            obs.push(r.x.clone(), r.y);
        }
        state.initial_count = obs.len().min(self.request.initial_design_size());
        state.observations = obs;
        Ok(state)
    }
}
