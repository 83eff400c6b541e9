//! Per-trial outcome extraction: walk one trace and pull out the recovery
//! timeline relative to the last injected crash.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::protocol::{Micros, Role, ServerId, Term, Variant};
use crate::simnet::Event;

/// Everything one trial contributes to an experiment table. Durations are
/// measured from the metrics anchor — the last scheduled crash, or the end
/// of stabilization when nothing crashes — and are present only when the
/// trial converged (except detection, which needs only a first campaign).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TrialResult {
    pub trial: u32,
    pub variant: Variant,
    pub n: u32,
    pub seed: u64,
    pub converged: bool,
    /// Anchor to the first campaign after it.
    pub detection: Option<Micros>,
    /// First campaign to the winner taking office.
    pub election: Option<Micros>,
    /// Anchor to the winner taking office.
    pub total: Option<Micros>,
    /// Campaigns started at or after the anchor.
    pub campaigns: u32,
    /// Terms in which two or more campaigns started after the anchor and no
    /// leader emerged.
    pub split_vote_phases: u32,
    pub winner: Option<ServerId>,
    /// Messages sent at or after the anchor.
    pub messages: u64,
}

/// Distill a finished trial's trace into a [`TrialResult`].
///
/// `converged` comes from the stop predicate: the run settled a live, acked
/// leader within the horizon. The winner is the holder of the last
/// leadership change at or after the anchor — earlier winners that lost
/// office to a higher term don't count.
pub fn trial_metrics(
    events: &[Event],
    anchor: Micros,
    converged: bool,
    trial: u32,
    variant: Variant,
    n: u32,
    seed: u64,
) -> TrialResult {
    let mut first_campaign: Option<Micros> = None;
    let mut campaigns = 0u32;
    let mut campaigns_per_term: BTreeMap<Term, u32> = BTreeMap::new();
    let mut leaders_per_term: BTreeMap<Term, ServerId> = BTreeMap::new();
    let mut last_won: Option<(ServerId, Micros)> = None;
    let mut messages = 0u64;

    for ev in events {
        if ev.at() < anchor {
            continue;
        }
        match *ev {
            Event::CampaignStarted { at, term, .. } => {
                first_campaign.get_or_insert(at);
                campaigns += 1;
                *campaigns_per_term.entry(term).or_default() += 1;
            }
            Event::RoleChanged {
                at,
                server,
                role: Role::Leader,
                term,
            } => {
                leaders_per_term.insert(term, server);
                last_won = Some((server, at));
            }
            Event::MsgSent { .. } => messages += 1,
            _ => {}
        }
    }

    let split_vote_phases = campaigns_per_term
        .iter()
        .filter(|&(term, &count)| count >= 2 && !leaders_per_term.contains_key(term))
        .count() as u32;

    let detection = first_campaign.map(|at| at - anchor);
    let (winner, total, election) = match (converged, last_won, first_campaign) {
        (true, Some((id, won_at)), Some(started)) => {
            (Some(id), Some(won_at - anchor), Some(won_at - started))
        }
        _ => (None, None, None),
    };

    TrialResult {
        trial,
        variant,
        n,
        seed,
        converged,
        detection,
        election,
        total,
        campaigns,
        split_vote_phases,
        winner,
        messages,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::ms;
    use crate::simnet::{MsgKind, MsgSummary};

    fn campaign(at: Micros, server: ServerId, term: Term) -> Event {
        Event::CampaignStarted {
            at,
            server,
            term,
            priority: 1,
        }
    }

    fn won(at: Micros, server: ServerId, term: Term) -> Event {
        Event::RoleChanged {
            at,
            server,
            role: Role::Leader,
            term,
        }
    }

    fn sent(at: Micros) -> Event {
        Event::MsgSent {
            at,
            from: 1,
            to: 2,
            summary: MsgSummary {
                msg: MsgKind::RequestVote,
                term: 2,
                answers_term: None,
                answers_clock: None,
            },
        }
    }

    #[test]
    fn splits_are_terms_with_rival_campaigns_and_no_winner() {
        let events = vec![
            campaign(ms(1100), 4, 2),
            campaign(ms(1105), 3, 2), // term 2 splits
            campaign(ms(2300), 4, 3),
            won(ms(2600), 4, 3),
        ];
        let r = trial_metrics(&events, ms(100), true, 0, Variant::Raft, 5, 7);
        assert_eq!(r.split_vote_phases, 1);
        assert_eq!(r.campaigns, 3);
        assert_eq!(r.detection, Some(ms(1000)));
        assert_eq!(r.total, Some(ms(2500)));
        assert_eq!(r.election, Some(ms(1500)));
        assert_eq!(r.winner, Some(4));
    }

    #[test]
    fn events_before_the_anchor_are_invisible() {
        let events = vec![
            campaign(ms(500), 9, 1),
            won(ms(800), 9, 1),
            sent(ms(900)),
            campaign(ms(2000), 4, 2),
            won(ms(2400), 4, 2),
            sent(ms(2401)),
        ];
        let r = trial_metrics(&events, ms(1000), true, 0, Variant::Escape, 5, 7);
        assert_eq!(r.campaigns, 1);
        assert_eq!(r.messages, 1);
        assert_eq!(r.winner, Some(4));
        assert_eq!(r.detection, Some(ms(1000)));
    }

    #[test]
    fn the_settled_winner_is_the_last_leadership_change() {
        let events = vec![
            campaign(ms(1100), 4, 2),
            won(ms(1400), 4, 2),
            campaign(ms(1450), 3, 3), // deposes term-2 leader
            won(ms(1800), 3, 3),
        ];
        let r = trial_metrics(&events, ms(1000), true, 0, Variant::Raft, 5, 7);
        assert_eq!(r.winner, Some(3));
        assert_eq!(r.total, Some(ms(800)));
        assert_eq!(r.split_vote_phases, 0, "terms 2 and 3 both crowned leaders");
    }

    #[test]
    fn a_non_converged_trial_reports_detection_only() {
        let events = vec![campaign(ms(1100), 4, 2), campaign(ms(1105), 3, 2)];
        let r = trial_metrics(&events, ms(100), false, 0, Variant::Raft, 5, 7);
        assert!(!r.converged);
        assert_eq!(r.detection, Some(ms(1000)));
        assert_eq!(r.total, None);
        assert_eq!(r.winner, None);
        assert_eq!(r.split_vote_phases, 1);
    }
}
