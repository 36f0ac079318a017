use std::collections::VecDeque;
use std::sync::Arc;

use chrono::{DateTime, Utc};

use super::{advance, Effect, EventKind, Journey, JourneyContext, JourneyError, SessionEvent};
use crate::gateway::ChatGateway;

/// Runs events through [`advance`] and performs the gateway calls the
/// resulting effects request.
///
/// Work is all-or-nothing per call: if a tutoring turn cannot get a reply
/// the journey is left as it was and nothing is returned for persistence. A
/// failed summary request does not roll back; it is recorded and the
/// placeholder summary applies.
pub struct Orchestrator {
    pub ctx: Arc<JourneyContext>,
    gateway: Arc<dyn ChatGateway>,
}

impl Orchestrator {
    pub fn new(ctx: Arc<JourneyContext>, gateway: Arc<dyn ChatGateway>) -> Self {
        Self { ctx, gateway }
    }

    /// Applies `event` and any follow-up events. On success the journey is
    /// updated and the committed events are returned, numbered from
    /// `next_seq`; the caller appends them to the log.
    pub fn handle(
        &self,
        journey: &mut Journey,
        event: EventKind,
        next_seq: u64,
        now: impl Fn() -> DateTime<Utc>,
    ) -> Result<(Vec<SessionEvent>, Vec<Effect>), JourneyError> {
        let mut tentative = journey.clone();
        let mut queue = VecDeque::from([event]);
        let mut committed = Vec::new();
        let mut all_effects = Vec::new();

        while let Some(event) = queue.pop_front() {
            let (next, effects) = advance(&tentative, &event, &self.ctx)?;
            tentative = next;
            committed.push(event);
            for effect in &effects {
                match effect {
                    Effect::RequestTutorReply { session_key, history } => {
                        let content = self.gateway.complete(session_key, history)?;
                        queue.push_back(EventKind::TutorMessage { content });
                    }
                    Effect::RequestSummary { session_key, history } => {
                        let recorded = match self.gateway.complete(session_key, history) {
                            Ok(reply) => EventKind::SummaryRecorded {
                                reply: Some(reply),
                                error: None,
                            },
                            Err(e) => EventKind::SummaryRecorded {
                                reply: None,
                                error: Some(e.to_string()),
                            },
                        };
                        queue.push_back(recorded);
                    }
                    _ => {}
                }
            }
            all_effects.extend(effects);
        }

        *journey = tentative;
        let events = committed
            .into_iter()
            .enumerate()
            .map(|(k, event)| SessionEvent {
                seq: next_seq + k as u64,
                student_id: journey.student_id.clone(),
                timestamp: now(),
                event,
            })
            .collect();
        Ok((events, all_effects))
    }
}
