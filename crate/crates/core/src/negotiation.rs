//! Negotiation-agreement: a synchronous-round, single-initiator auction run
//! over the message bus.
//!
//! An initiator proposes a list of items. Each agent answers with one bid per
//! item it is eligible for. At the round deadline the initiator awards every
//! item whose best bidder also ranks that item first among its own bids; each
//! agent wins at most one item per session and unawarded items roll to the
//! next round. An award becomes binding once the winner's acknowledgement
//! reaches the initiator. Unacknowledged awards lapse after one round window
//! and their items are re-offered under a fresh session id, so a session never
//! awards an item twice.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::EventKind;
use crate::world::{Envelope, MessageBus, Recipient, World};
use crate::{AgentId, ConfigError, WorldError};

/// Identifier of an auctioned item: a task id, slot index or priority rank.
pub type ItemId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SessionId {
    pub initiator: AgentId,
    pub tick: u64,
    pub counter: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OpKind {
    Selection,
    Formation,
    Routing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NegotiationMessage {
    Propose { session: SessionId, op: OpKind, items: Vec<ItemId> },
    Bid { session: SessionId, item: ItemId, utility: f64 },
    Award { session: SessionId, item: ItemId, winner: AgentId },
    Ack { session: SessionId, item: ItemId },
}

impl NegotiationMessage {
    pub fn session(&self) -> SessionId {
        match *self {
            NegotiationMessage::Propose { session, .. }
            | NegotiationMessage::Bid { session, .. }
            | NegotiationMessage::Award { session, .. }
            | NegotiationMessage::Ack { session, .. } => session,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bid {
    pub session: SessionId,
    pub bidder: AgentId,
    pub item: ItemId,
    pub utility: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Award {
    pub item: ItemId,
    pub winner: AgentId,
    pub utility: f64,
}

/// Result of a negotiation: bound items and the items nobody won.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    pub map: BTreeMap<ItemId, AgentId>,
    pub unassigned: BTreeSet<ItemId>,
}

impl Assignment {
    pub fn agent_of(&self, item: ItemId) -> Option<AgentId> {
        self.map.get(&item).copied()
    }

    pub fn item_of(&self, agent: AgentId) -> Option<ItemId> {
        self.map.iter().find(|(_, &a)| a == agent).map(|(&i, _)| i)
    }

    /// No agent holds more than one item.
    pub fn is_one_to_one(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.map.values().all(|a| seen.insert(*a))
    }

    /// Sum of `utility(agent, item)` over assigned pairs.
    pub fn total_utility(&self, utility: impl Fn(AgentId, ItemId) -> f64) -> f64 {
        self.map.iter().map(|(&i, &a)| utility(a, i)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NegotiationError {
    #[error("a session needs at least one item")]
    EmptyItems,
    #[error("initiator {0} does not exist")]
    UnknownInitiator(AgentId),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Starts a session and builds its `Propose` message.
pub fn open_session(
    initiator: AgentId,
    tick: u64,
    counter: u32,
    op: OpKind,
    items: &[ItemId],
) -> Result<(SessionId, NegotiationMessage), NegotiationError> {
    if items.is_empty() {
        return Err(NegotiationError::EmptyItems);
    }
    let session = SessionId { initiator, tick, counter };
    Ok((session, NegotiationMessage::Propose { session, op, items: items.to_vec() }))
}

/// One bid per proposed item with finite utility; other items are skipped.
pub fn make_bids(agent: AgentId, propose: &NegotiationMessage, utility: impl Fn(ItemId) -> f64) -> Vec<Bid> {
    let NegotiationMessage::Propose { session, items, .. } = propose else {
        return Vec::new();
    };
    items
        .iter()
        .filter_map(|&item| {
            let u = utility(item);
            u.is_finite().then_some(Bid { session: *session, bidder: agent, item, utility: u })
        })
        .collect()
}

/// Awards for one round.
///
/// An item goes to its best bidder (ties: lowest agent id) provided that the
/// item is also that bidder's best bid this round (ties: lowest item id).
/// Every other item rolls over. The globally best bid always satisfies both
/// conditions, so a round with bids awards at least one item.
pub fn resolve_round(bids: &[Bid], open_items: &BTreeSet<ItemId>) -> Vec<Award> {
    let better = |a: &Bid, b: &Bid| a.utility > b.utility;
    let mut top_for_item: BTreeMap<ItemId, Bid> = BTreeMap::new();
    let mut favourite: BTreeMap<AgentId, Bid> = BTreeMap::new();
    for bid in bids.iter().filter(|b| open_items.contains(&b.item) && b.utility.is_finite()) {
        top_for_item
            .entry(bid.item)
            .and_modify(|cur| {
                if better(bid, cur) || (bid.utility == cur.utility && bid.bidder < cur.bidder) {
                    *cur = *bid;
                }
            })
            .or_insert(*bid);
        favourite
            .entry(bid.bidder)
            .and_modify(|cur| {
                if better(bid, cur) || (bid.utility == cur.utility && bid.item < cur.item) {
                    *cur = *bid;
                }
            })
            .or_insert(*bid);
    }
    top_for_item
        .values()
        .filter(|b| favourite.get(&b.bidder).is_some_and(|f| f.item == b.item))
        .map(|b| Award { item: b.item, winner: b.bidder, utility: b.utility })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuctionOutcome {
    pub assignment: Assignment,
    pub rounds: u32,
}

/// The same round rule with perfect, instantaneous communication.
pub fn auction(agents: &[AgentId], items: &[ItemId], utility: impl Fn(AgentId, ItemId) -> f64) -> AuctionOutcome {
    let mut open: BTreeSet<ItemId> = items.iter().copied().collect();
    let mut winners = BTreeSet::new();
    let mut assignment = Assignment::default();
    let mut rounds = 0;
    let session = SessionId { initiator: 0, tick: 0, counter: 0 };
    while !open.is_empty() {
        rounds += 1;
        let bids: Vec<Bid> = agents
            .iter()
            .filter(|a| !winners.contains(*a))
            .flat_map(|&a| open.iter().map(move |&i| (a, i)))
            .filter_map(|(a, i)| {
                let u = utility(a, i);
                u.is_finite().then_some(Bid { session, bidder: a, item: i, utility: u })
            })
            .collect();
        if bids.is_empty() {
            break;
        }
        for award in resolve_round(&bids, &open) {
            open.remove(&award.item);
            winners.insert(award.winner);
            assignment.map.insert(award.item, award.winner);
        }
    }
    assignment.unassigned = open;
    AuctionOutcome { assignment, rounds }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    /// Ticks from a send to its delivery.
    pub latency: u64,
    /// Re-offers allowed after lapsed awards or (on a lossy bus) empty rounds.
    pub retry_budget: u32,
    pub lossy: bool,
}

impl ProtocolConfig {
    pub fn for_bus(bus: &MessageBus, retry_budget: u32) -> Self {
        ProtocolConfig { latency: bus.latency(), retry_budget, lossy: bus.loss_prob > 0.0 }
    }

    /// Round deadline offset and award lapse time: a request/response trip
    /// plus one tick.
    pub fn window(&self) -> u64 {
        2 * self.latency + 1
    }
}

/// Side effects produced by a [`Negotiator`] for the host to carry out.
#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    Send { to: Recipient, msg: NegotiationMessage },
    Record(EventKind),
    /// The initiator received the winner's acknowledgement.
    Bound { session: SessionId, item: ItemId, agent: AgentId },
    /// This agent was awarded an item.
    Won { session: SessionId, item: ItemId },
}

#[derive(Debug, Clone)]
struct Round {
    proposed: BTreeSet<ItemId>,
    deadline: u64,
    bids: Vec<Bid>,
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    winner: AgentId,
    session: SessionId,
    expires: u64,
}

/// Initiator-side state of one negotiation, including its re-offers.
#[derive(Debug, Clone)]
pub struct InitiatorSession {
    origin: SessionId,
    current: SessionId,
    op: OpKind,
    cfg: ProtocolConfig,
    items: Vec<ItemId>,
    open: BTreeSet<ItemId>,
    pending: BTreeMap<ItemId, Pending>,
    bound: BTreeMap<ItemId, AgentId>,
    winners: BTreeSet<AgentId>,
    round: Option<Round>,
    rounds: u32,
    retries: u32,
    exhausted: bool,
}

#[derive(Debug, Default)]
struct PollOutcome {
    effects: Vec<Effect>,
    awarded: Vec<(SessionId, ItemId, AgentId)>,
    proposed: Option<(SessionId, Vec<ItemId>)>,
}

impl InitiatorSession {
    fn new(session: SessionId, op: OpKind, items: &[ItemId], cfg: ProtocolConfig) -> Self {
        InitiatorSession {
            origin: session,
            current: session,
            op,
            cfg,
            items: items.to_vec(),
            open: items.iter().copied().collect(),
            pending: BTreeMap::new(),
            bound: BTreeMap::new(),
            winners: BTreeSet::new(),
            round: None,
            rounds: 0,
            retries: 0,
            exhausted: false,
        }
    }

    pub fn origin(&self) -> SessionId {
        self.origin
    }

    pub fn current(&self) -> SessionId {
        self.current
    }

    pub fn op(&self) -> OpKind {
        self.op
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    /// Number of `Propose` rounds started so far.
    pub fn rounds(&self) -> u32 {
        self.rounds
    }

    pub fn is_finished(&self) -> bool {
        self.round.is_none() && self.pending.is_empty() && (self.open.is_empty() || self.exhausted)
    }

    /// Items still under negotiation (open or awaiting acknowledgement).
    pub fn in_play(&self) -> impl Iterator<Item = ItemId> + '_ {
        if self.is_finished() { None } else { Some(self.open.iter().chain(self.pending.keys()).copied()) }
            .into_iter()
            .flatten()
    }

    pub fn assignment(&self) -> Assignment {
        Assignment {
            map: self.bound.clone(),
            unassigned: self.items.iter().copied().filter(|i| !self.bound.contains_key(i)).collect(),
        }
    }

    fn start_round(&mut self, now: u64) -> PollOutcome {
        let items: Vec<ItemId> = self.open.iter().copied().collect();
        self.rounds += 1;
        self.round = Some(Round { proposed: self.open.clone(), deadline: now + self.cfg.window(), bids: Vec::new() });
        let msg = NegotiationMessage::Propose { session: self.current, op: self.op, items: items.clone() };
        PollOutcome {
            effects: alloc::vec![
                Effect::Record(EventKind::Propose { session: self.current, op: self.op, items: items.clone() }),
                Effect::Send { to: Recipient::Broadcast, msg },
            ],
            proposed: Some((self.current, items)),
            ..PollOutcome::default()
        }
    }

    fn on_bid(&mut self, bid: Bid, delivered_at: u64) {
        let Some(round) = self.round.as_mut() else { return };
        let fresh = !round.bids.iter().any(|b| b.bidder == bid.bidder && b.item == bid.item);
        if bid.session == self.current
            && delivered_at <= round.deadline
            && round.proposed.contains(&bid.item)
            && !self.winners.contains(&bid.bidder)
            && bid.utility.is_finite()
            && fresh
        {
            round.bids.push(bid);
        }
    }

    fn on_ack(&mut self, from: AgentId, session: SessionId, item: ItemId) -> Option<Effect> {
        let p = self.pending.get(&item)?;
        if p.winner != from || p.session != session {
            return None;
        }
        self.pending.remove(&item);
        self.bound.insert(item, from);
        Some(Effect::Bound { session, item, agent: from })
    }

    fn poll(&mut self, now: u64, counter: &mut u32) -> PollOutcome {
        let mut out = PollOutcome::default();

        let lapsed: Vec<ItemId> = self.pending.iter().filter(|(_, p)| now >= p.expires).map(|(&i, _)| i).collect();
        let mut reoffer = false;
        for item in lapsed {
            let p = self.pending.remove(&item).expect("pending");
            self.winners.remove(&p.winner);
            if self.retries < self.cfg.retry_budget {
                self.retries += 1;
                self.open.insert(item);
                reoffer = true;
            }
        }
        if reoffer {
            // A fresh session id keeps "one award per item per session".
            self.current = SessionId { initiator: self.origin.initiator, tick: now, counter: *counter };
            *counter += 1;
            self.round = None;
            self.exhausted = false;
        }

        if self.round.as_ref().is_some_and(|r| now >= r.deadline) {
            let round = self.round.take().expect("round");
            let bids: Vec<Bid> = round.bids.into_iter().filter(|b| !self.winners.contains(&b.bidder)).collect();
            if bids.is_empty() {
                if self.cfg.lossy && self.retries < self.cfg.retry_budget {
                    self.retries += 1;
                } else {
                    self.exhausted = true;
                }
            }
            for award in resolve_round(&bids, &self.open) {
                self.open.remove(&award.item);
                self.winners.insert(award.winner);
                self.pending.insert(
                    award.item,
                    Pending { winner: award.winner, session: self.current, expires: now + self.cfg.window() },
                );
                let msg = NegotiationMessage::Award { session: self.current, item: award.item, winner: award.winner };
                out.effects.push(Effect::Record(EventKind::Award {
                    session: self.current,
                    item: award.item,
                    winner: award.winner,
                }));
                out.effects.push(Effect::Send { to: Recipient::Broadcast, msg });
                out.awarded.push((self.current, award.item, award.winner));
            }
        }

        if self.round.is_none() && !self.exhausted && !self.open.is_empty() {
            let next = self.start_round(now);
            out.effects.extend(next.effects);
            out.proposed = next.proposed;
        }
        out
    }
}

/// Bidding policy: utility of an item for the agent, `-inf` to abstain.
pub type BidFn<'a> = &'a dyn Fn(OpKind, ItemId) -> f64;

/// Per-agent protocol state: the participant role plus any sessions this
/// agent initiated.
#[derive(Debug, Clone)]
pub struct Negotiator {
    agent: AgentId,
    cfg: ProtocolConfig,
    counter: u32,
    sessions: Vec<InitiatorSession>,
    holds: BTreeMap<ItemId, SessionId>,
}

impl Negotiator {
    pub fn new(agent: AgentId, cfg: ProtocolConfig) -> Self {
        Negotiator { agent, cfg, counter: 0, sessions: Vec::new(), holds: BTreeMap::new() }
    }

    pub fn agent(&self) -> AgentId {
        self.agent
    }

    /// Items this agent has been awarded and not released.
    pub fn holds(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.holds.keys().copied()
    }

    pub fn release(&mut self, item: ItemId) {
        self.holds.remove(&item);
    }

    pub fn sessions(&self) -> &[InitiatorSession] {
        &self.sessions
    }

    pub fn session(&self, origin: SessionId) -> Option<&InitiatorSession> {
        self.sessions.iter().find(|s| s.origin == origin)
    }

    pub fn has_active_session(&self) -> bool {
        self.sessions.iter().any(|s| !s.is_finished())
    }

    /// Drops finished sessions, returning them.
    pub fn take_finished(&mut self) -> Vec<InitiatorSession> {
        let (done, active) = core::mem::take(&mut self.sessions).into_iter().partition(|s| s.is_finished());
        self.sessions = active;
        done
    }

    fn own_bids(&self, session: SessionId, op: OpKind, items: &[ItemId], bid: BidFn) -> Vec<Bid> {
        // One item per agent: an agent already holding an award abstains.
        if !self.holds.is_empty() {
            return Vec::new();
        }
        let propose = NegotiationMessage::Propose { session, op, items: items.to_vec() };
        make_bids(self.agent, &propose, |item| bid(op, item))
    }

    /// Opens a session as initiator and bids on it locally.
    pub fn open(
        &mut self,
        now: u64,
        op: OpKind,
        items: &[ItemId],
        bid: BidFn,
    ) -> Result<(SessionId, Vec<Effect>), NegotiationError> {
        let (session, _) = open_session(self.agent, now, self.counter, op, items)?;
        self.counter += 1;
        let mut s = InitiatorSession::new(session, op, items, self.cfg);
        let first = s.start_round(now);
        self.sessions.push(s);
        let idx = self.sessions.len() - 1;
        let mut effects = first.effects;
        effects.extend(self.absorb(idx, now, PollOutcome { proposed: first.proposed, ..PollOutcome::default() }, bid));
        Ok((session, effects))
    }

    /// Handles the local side of a poll outcome: own bids on fresh proposals
    /// and own acknowledgements of self-awards.
    fn absorb(&mut self, idx: usize, now: u64, out: PollOutcome, bid: BidFn) -> Vec<Effect> {
        let mut effects = out.effects;
        for (session, item, winner) in out.awarded {
            if winner == self.agent {
                self.holds.insert(item, session);
                effects.push(Effect::Won { session, item });
                effects.push(Effect::Record(EventKind::Ack { session, item, agent: self.agent }));
                effects.extend(self.sessions[idx].on_ack(self.agent, session, item));
            } else if self.holds.get(&item).is_some() {
                self.holds.remove(&item);
            }
        }
        if let Some((session, items)) = out.proposed {
            self.holds.retain(|i, _| !items.contains(i));
            let op = self.sessions[idx].op;
            for b in self.own_bids(session, op, &items, bid) {
                effects.push(Effect::Record(EventKind::Bid { session, item: b.item, bidder: b.bidder, utility: b.utility }));
                self.sessions[idx].on_bid(b, now);
            }
        }
        effects
    }

    /// Handles a message delivered at tick `delivered_at`.
    pub fn deliver(&mut self, env: &Envelope, delivered_at: u64, bid: BidFn) -> Vec<Effect> {
        let mut effects = Vec::new();
        match &env.msg {
            NegotiationMessage::Propose { session, op, items } => {
                self.holds.retain(|i, _| !items.contains(i));
                for b in self.own_bids(*session, *op, items, bid) {
                    effects.push(Effect::Record(EventKind::Bid {
                        session: *session,
                        item: b.item,
                        bidder: b.bidder,
                        utility: b.utility,
                    }));
                    effects.push(Effect::Send {
                        to: Recipient::Agent(session.initiator),
                        msg: NegotiationMessage::Bid { session: *session, item: b.item, utility: b.utility },
                    });
                }
            }
            &NegotiationMessage::Bid { session, item, utility } => {
                if let Some(s) = self.sessions.iter_mut().find(|s| s.current == session) {
                    s.on_bid(Bid { session, bidder: env.from, item, utility }, delivered_at);
                }
            }
            &NegotiationMessage::Award { session, item, winner } => {
                if winner == self.agent {
                    self.holds.insert(item, session);
                    effects.push(Effect::Won { session, item });
                    effects.push(Effect::Record(EventKind::Ack { session, item, agent: self.agent }));
                    effects.push(Effect::Send {
                        to: Recipient::Agent(session.initiator),
                        msg: NegotiationMessage::Ack { session, item },
                    });
                } else {
                    self.holds.remove(&item);
                }
            }
            &NegotiationMessage::Ack { session, item } => {
                if let Some(s) = self.sessions.iter_mut().find(|s| s.current == session || s.pending.contains_key(&item)) {
                    effects.extend(s.on_ack(env.from, session, item));
                }
            }
        }
        effects
    }

    /// Advances every initiated session to tick `now`.
    pub fn poll(&mut self, now: u64, bid: BidFn) -> Vec<Effect> {
        let mut effects = Vec::new();
        for idx in 0..self.sessions.len() {
            let out = self.sessions[idx].poll(now, &mut self.counter);
            effects.extend(self.absorb(idx, now, out, bid));
        }
        effects
    }
}

/// Carries out effects on the world for `agent`. Returns bound pairs.
pub fn apply_effects(
    world: &mut World,
    agent: AgentId,
    effects: Vec<Effect>,
) -> Result<Vec<(ItemId, AgentId)>, WorldError> {
    let mut bound = Vec::new();
    for e in effects {
        match e {
            Effect::Send { to, msg } => {
                world.send(agent, to, msg)?;
            }
            Effect::Record(ev) => world.record(ev),
            Effect::Bound { item, agent, .. } => bound.push((item, agent)),
            Effect::Won { .. } => {}
        }
    }
    Ok(bound)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegotiationOutcome {
    pub session: SessionId,
    pub assignment: Assignment,
    pub rounds: u32,
    /// False when the tick cap was hit before the session settled.
    pub finished: bool,
}

/// Runs one negotiation to completion over the world's bus, stepping the
/// world. Every agent participates with `utility(agent, item)`.
pub fn run_negotiation(
    world: &mut World,
    initiator: AgentId,
    op: OpKind,
    items: &[ItemId],
    utility: &dyn Fn(AgentId, ItemId) -> f64,
    retry_budget: u32,
) -> Result<NegotiationOutcome, NegotiationError> {
    if !world.agents.contains_key(&initiator) {
        return Err(NegotiationError::UnknownInitiator(initiator));
    }
    let cfg = ProtocolConfig::for_bus(&world.bus, retry_budget);
    let mut negotiators: BTreeMap<AgentId, Negotiator> =
        world.agents.keys().map(|&id| (id, Negotiator::new(id, cfg))).collect();

    let init_bid = |_: OpKind, i: ItemId| utility(initiator, i);
    let (session, effects) = negotiators.get_mut(&initiator).expect("initiator").open(world.tick, op, items, &init_bid)?;
    apply_effects(world, initiator, effects)?;

    let rounds_cap = (items.len() as u64 + world.agents.len() as u64 + 2) * (u64::from(retry_budget) + 1);
    let tick_cap = world.tick + (rounds_cap + 2) * (cfg.window() + 1);
    let mut finished = false;
    while world.tick < tick_cap {
        let delivered = world.step();
        let now = world.tick;
        for env in delivered {
            let to = env.to;
            let bid = |_: OpKind, i: ItemId| utility(to, i);
            let effects = negotiators.get_mut(&to).expect("recipient").deliver(&env, now, &bid);
            apply_effects(world, to, effects)?;
        }
        let effects = negotiators.get_mut(&initiator).expect("initiator").poll(now, &init_bid);
        apply_effects(world, initiator, effects)?;
        if negotiators[&initiator].session(session).is_some_and(|s| s.is_finished()) {
            finished = true;
            break;
        }
    }
    let s = negotiators[&initiator].session(session).expect("session");
    Ok(NegotiationOutcome { session, assignment: s.assignment(), rounds: s.rounds(), finished })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Cell, Grid};
    use crate::world::{AgentState, WorldConfig};
    use alloc::vec;

    fn sid() -> SessionId {
        SessionId { initiator: 0, tick: 0, counter: 0 }
    }

    fn bid(bidder: AgentId, item: ItemId, utility: f64) -> Bid {
        Bid { session: sid(), bidder, item, utility }
    }

    fn open(items: &[ItemId]) -> BTreeSet<ItemId> {
        items.iter().copied().collect()
    }

    #[test]
    fn open_session_examples() {
        let (a, p) = open_session(0, 5, 0, OpKind::Selection, &[1]).unwrap();
        assert!(matches!(p, NegotiationMessage::Propose { ref items, .. } if items.len() == 1));
        let (b, _) = open_session(0, 5, 1, OpKind::Selection, &[1]).unwrap();
        assert_ne!(a, b);
        assert_eq!(open_session(0, 5, 2, OpKind::Selection, &[]), Err(NegotiationError::EmptyItems));
    }

    #[test]
    fn make_bids_examples() {
        let (_, p) = open_session(0, 0, 0, OpKind::Selection, &[1, 2]).unwrap();
        assert!(make_bids(3, &p, |_| f64::NEG_INFINITY).is_empty());
        let bids = make_bids(3, &p, |i| if i == 1 { 3.0 } else { f64::NEG_INFINITY });
        assert_eq!(bids.len(), 1);
        assert_eq!((bids[0].item, bids[0].utility), (1, 3.0));
        let bids = make_bids(3, &p, |_| 1.0);
        assert_eq!(bids.len(), 2);
        assert!(bids.iter().all(|b| b.session == p.session()));
    }

    #[test]
    fn resolve_round_examples() {
        let a = resolve_round(&[bid(1, 0, 5.0), bid(2, 0, 3.0)], &open(&[0]));
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].winner, 1);
        let a = resolve_round(&[bid(2, 0, 4.0), bid(1, 0, 4.0)], &open(&[0]));
        assert_eq!(a[0].winner, 1);
        let a = resolve_round(&[bid(1, 1, 5.0), bid(1, 2, 4.0)], &open(&[1, 2]));
        assert_eq!(a, vec![Award { item: 1, winner: 1, utility: 5.0 }]);
        assert!(resolve_round(&[], &open(&[0])).is_empty());
    }

    #[test]
    fn round_rule_defers_a_bidder_whose_favourite_was_lost() {
        // Agent 1 tops item 0 but prefers item 1, which agent 2 wins.
        let bids = [bid(1, 0, 1.0), bid(1, 1, 8.0), bid(2, 1, 9.0)];
        let a = resolve_round(&bids, &open(&[0, 1]));
        assert_eq!(a, vec![Award { item: 1, winner: 2, utility: 9.0 }]);
    }

    #[test]
    fn auction_on_three_by_three() {
        let u = [[9.0, 1.0, 1.0], [8.0, 7.0, 1.0], [1.0, 6.0, 5.0]];
        let out = auction(&[0, 1, 2], &[0, 1, 2], |a, i| u[a as usize][i as usize]);
        assert_eq!(out.assignment.map, BTreeMap::from([(0, 0), (1, 1), (2, 2)]));
        // Agents 1 and 2 each wait for their favourite to be taken first.
        assert_eq!(out.rounds, 3);
    }

    fn bus_world(n: u32, delay: u64, loss: f64, seed: u64) -> World {
        let mut w = World::new(Grid::new(8, 8), WorldConfig::default(), MessageBus::new(delay, loss), seed);
        for i in 0..n {
            w.add_agent(AgentState::new(i, Cell::new(i as i32, 0), 10.0)).unwrap();
        }
        w
    }

    #[test]
    fn singleton_is_assigned_in_round_one() {
        let mut w = bus_world(1, 1, 0.0, 0);
        let out = run_negotiation(&mut w, 0, OpKind::Selection, &[7], &|_, _| 1.0, 10).unwrap();
        assert!(out.finished);
        assert_eq!(out.assignment.agent_of(7), Some(0));
        assert_eq!(out.rounds, 1);
    }

    #[test]
    fn bus_run_matches_the_greedy_example() {
        let u = [[9.0, 1.0, 1.0], [8.0, 7.0, 1.0], [1.0, 6.0, 5.0]];
        let mut w = bus_world(3, 1, 0.0, 0);
        let out = run_negotiation(&mut w, 0, OpKind::Selection, &[0, 1, 2], &|a, i| u[a as usize][i as usize], 10).unwrap();
        assert_eq!(out.assignment.map, BTreeMap::from([(0, 0), (1, 1), (2, 2)]));
        assert!(out.rounds <= 4);
    }

    #[test]
    fn two_agents_three_tasks_leaves_one_unassigned() {
        let mut w = bus_world(2, 1, 0.0, 0);
        let out = run_negotiation(&mut w, 0, OpKind::Selection, &[0, 1, 2], &|a, i| f64::from(a + i), 10).unwrap();
        assert_eq!(out.assignment.map.len(), 2);
        assert_eq!(out.assignment.unassigned.len(), 1);
        assert!(out.assignment.is_one_to_one());
        assert!(out.rounds <= 3);
    }

    #[test]
    fn ineligible_agents_are_never_awarded() {
        let mut w = bus_world(3, 2, 0.0, 0);
        let u = |a: AgentId, _| if a == 1 { f64::NEG_INFINITY } else { 1.0 + f64::from(a) };
        let out = run_negotiation(&mut w, 0, OpKind::Selection, &[0, 1, 2], &u, 10).unwrap();
        assert!(out.assignment.map.values().all(|&a| a != 1));
        assert_eq!(out.assignment.map.len(), 2);
    }

    #[test]
    fn lossy_bus_still_settles_conflict_free() {
        for seed in 0..20 {
            let mut w = bus_world(4, 1, 0.3, seed);
            let out = run_negotiation(&mut w, 0, OpKind::Selection, &[0, 1, 2, 3], &|a, i| f64::from((a * 7 + i * 3) % 5), 10)
                .unwrap();
            assert!(out.finished);
            assert!(out.assignment.is_one_to_one());
        }
    }
}
