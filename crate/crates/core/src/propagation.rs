//! Path loss, SINR under the line-of-sight constraint, and street verdicts.
//!
//! Two nodes see each other iff they share a street, and two distinct nodes
//! share at most one street. All deployed nodes transmit at once. The
//! interferers of a hop are the other nodes on the hop's street, or with
//! [`InterferenceScope::CommonStreets`] every other node the receiver sees.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::StreetSystem;
use crate::placement::{Deployment, InterferenceScope, NetworkParams, Node, NodeId};

/// Exhaustive subset search is refused above this many users.
pub const BRUTEFORCE_USER_LIMIT: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagationError {
    #[error("distance must be non-negative, got {0}")]
    NegativeDistance(f64),
    #[error("node {tx} is not visible from node {rx}")]
    NotVisible { tx: NodeId, rx: NodeId },
    #[error("street has {count} users, exhaustive search is limited to {limit}")]
    TooManyUsers { count: usize, limit: usize },
}

/// `1/(1 + kappa d)^beta`.
pub fn path_loss(d: f64, kappa: f64, beta: f64) -> Result<f64, PropagationError> {
    if !(d >= 0.0) {
        return Err(PropagationError::NegativeDistance(d));
    }
    Ok(PathLoss { kappa, beta }.gain(d))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLoss {
    pub kappa: f64,
    pub beta: f64,
}

impl PathLoss {
    pub fn from_params(params: &NetworkParams) -> Self {
        Self {
            kappa: params.kappa,
            beta: params.beta,
        }
    }

    #[inline]
    pub fn gain(&self, d: f64) -> f64 {
        let base = 1.0 + self.kappa * d;
        if self.beta == 2.0 {
            1.0 / (base * base)
        } else {
            base.powf(-self.beta)
        }
    }
}

pub fn received_power(tx: &Node, rx: &Node, params: &NetworkParams) -> f64 {
    params.power * PathLoss::from_params(params).gain(tx.position.distance(&rx.position))
}

/// Nodes sharing at least one street with `rx`, sorted, `rx` excluded.
pub fn visible_nodes(rx: NodeId, deployment: &Deployment, system: &StreetSystem) -> Vec<NodeId> {
    let mut seen: Vec<NodeId> = deployment
        .streets_of(system, rx)
        .iter()
        .flat_map(|&s| deployment.nodes_on(system, s))
        .filter(|&n| n != rx)
        .collect();
    seen.sort_unstable();
    seen.dedup();
    seen
}

/// The street shared by two distinct nodes.
pub fn common_street(
    a: NodeId,
    b: NodeId,
    deployment: &Deployment,
    system: &StreetSystem,
) -> Option<usize> {
    if a == b {
        return None;
    }
    let sb = deployment.streets_of(system, b);
    deployment
        .streets_of(system, a)
        .iter()
        .copied()
        .find(|s| sb.contains(s))
}

/// Nodes whose power counts at `rx` when it listens to `tx`, `tx` included.
fn heard_nodes(
    tx: NodeId,
    rx: NodeId,
    deployment: &Deployment,
    system: &StreetSystem,
    params: &NetworkParams,
) -> Result<Vec<NodeId>, PropagationError> {
    let street =
        common_street(tx, rx, deployment, system).ok_or(PropagationError::NotVisible { tx, rx })?;
    Ok(match params.interference {
        InterferenceScope::Street => deployment
            .nodes_on(system, street)
            .filter(|&n| n != rx)
            .collect(),
        InterferenceScope::CommonStreets => visible_nodes(rx, deployment, system),
    })
}

/// SINR of the link `tx -> rx`, summed directly from the definition.
pub fn sinr(
    tx: NodeId,
    rx: NodeId,
    deployment: &Deployment,
    system: &StreetSystem,
    params: &NetworkParams,
) -> Result<f64, PropagationError> {
    let heard = heard_nodes(tx, rx, deployment, system, params)?;
    let receiver = deployment.node(rx);
    let signal = received_power(deployment.node(tx), receiver, params);
    let interference: f64 = heard
        .iter()
        .filter(|&&k| k != tx)
        .map(|&k| received_power(deployment.node(k), receiver, params))
        .sum();
    Ok(signal / (params.noise + params.theta * interference))
}

/// Both directions meet the threshold. Nodes without a common street are
/// never linked.
pub fn link_open(
    a: NodeId,
    b: NodeId,
    deployment: &Deployment,
    system: &StreetSystem,
    params: &NetworkParams,
) -> bool {
    let meets = |tx, rx| {
        sinr(tx, rx, deployment, system, params)
            .map(|v| v >= params.threshold)
            .unwrap_or(false)
    };
    meets(a, b) && meets(b, a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StreetStatus {
    OpenDirect,
    OpenChain,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClosureReason {
    MissingRelay,
    InsufficientSinr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreetVerdict {
    pub street_id: usize,
    pub status: StreetStatus,
    pub reason: Option<ClosureReason>,
}

impl StreetVerdict {
    pub fn is_open(&self) -> bool {
        self.status != StreetStatus::Closed
    }

    fn closed(street_id: usize, reason: ClosureReason) -> Self {
        Self {
            street_id,
            status: StreetStatus::Closed,
            reason: Some(reason),
        }
    }

    fn open(street_id: usize, status: StreetStatus) -> Self {
        Self {
            street_id,
            status,
            reason: None,
        }
    }
}

/// Received power totals, precomputed once per realization.
///
/// A link test then costs one path-loss evaluation:
/// `P_sig >= tau (N + theta (total_rx - P_sig))`.
#[derive(Debug, Clone)]
pub struct SinrField<'a> {
    system: &'a StreetSystem,
    deployment: &'a Deployment,
    params: NetworkParams,
    loss: PathLoss,
    /// Per node, power from every node it sees.
    total: Vec<f64>,
    /// Per street, power at each node of `nodes_on` from the others on it.
    street_total: Vec<Vec<f64>>,
}

impl<'a> SinrField<'a> {
    pub fn new(
        system: &'a StreetSystem,
        deployment: &'a Deployment,
        params: &NetworkParams,
    ) -> Self {
        let loss = PathLoss::from_params(params);
        let mut total = vec![0.0; deployment.nodes().len()];
        let mut street_total = Vec::with_capacity(system.streets().len());
        let mut on_street = Vec::new();
        for street in system.streets() {
            on_street.clear();
            on_street.extend(deployment.nodes_on(system, street.id));
            let mut local = vec![0.0; on_street.len()];
            for (i, &a) in on_street.iter().enumerate() {
                let pa = deployment.node(a).position;
                for (j, &b) in on_street.iter().enumerate().skip(i + 1) {
                    let p = params.power * loss.gain(pa.distance(&deployment.node(b).position));
                    local[i] += p;
                    local[j] += p;
                }
            }
            // Streets share at most one node, so each visible pair is met once.
            for (&n, &p) in on_street.iter().zip(&local) {
                total[n] += p;
            }
            street_total.push(local);
        }
        Self {
            system,
            deployment,
            params: *params,
            loss,
            total,
            street_total,
        }
    }

    /// Power received at `rx` from every node it sees.
    pub fn total_power(&self, rx: NodeId) -> f64 {
        self.total[rx]
    }

    /// Power received at `rx` from the other nodes on `street`.
    pub fn street_power(&self, street: usize, rx: NodeId) -> f64 {
        let s = self.system.street(street);
        let first = self.deployment.relay_at(s.v1);
        let second = self.deployment.relay_at(s.v2);
        let relays = first.is_some() as usize + second.is_some() as usize;
        let slot = if first == Some(rx) {
            0
        } else if second == Some(rx) {
            relays - 1
        } else {
            let users = self.deployment.users_on(street);
            assert!(users.contains(&rx), "node {rx} is not on street {street}");
            relays + rx - users.start
        };
        self.street_total[street][slot]
    }

    fn heard(&self, street: usize, rx: NodeId) -> f64 {
        match self.params.interference {
            InterferenceScope::Street => self.street_power(street, rx),
            InterferenceScope::CommonStreets => self.total[rx],
        }
    }

    fn signal(&self, tx: NodeId, rx: NodeId) -> f64 {
        let d = self
            .deployment
            .node(tx)
            .position
            .distance(&self.deployment.node(rx).position);
        self.params.power * self.loss.gain(d)
    }

    /// Threshold test for `tx -> rx` along `street`, which both must lie on.
    #[inline]
    pub fn meets_threshold(&self, street: usize, tx: NodeId, rx: NodeId) -> bool {
        let s = self.signal(tx, rx);
        let interference = (self.heard(street, rx) - s).max(0.0);
        s >= self.params.threshold * (self.params.noise + self.params.theta * interference)
    }

    pub fn sinr(&self, street: usize, tx: NodeId, rx: NodeId) -> f64 {
        let s = self.signal(tx, rx);
        s / (self.params.noise + self.params.theta * (self.heard(street, rx) - s).max(0.0))
    }

    pub fn hop_open(&self, street: usize, a: NodeId, b: NodeId) -> bool {
        self.meets_threshold(street, a, b) && self.meets_threshold(street, b, a)
    }

    /// Direct relay link first, then the chain through every user in order.
    pub fn street_verdict(&self, street: usize) -> StreetVerdict {
        let s = self.system.street(street);
        let (Some(a), Some(b)) = (
            self.deployment.relay_at(s.v1),
            self.deployment.relay_at(s.v2),
        ) else {
            return StreetVerdict::closed(street, ClosureReason::MissingRelay);
        };
        if self.hop_open(street, a, b) {
            return StreetVerdict::open(street, StreetStatus::OpenDirect);
        }
        let users = self.deployment.users_on(street);
        if users.is_empty() {
            return StreetVerdict::closed(street, ClosureReason::InsufficientSinr);
        }
        let chain = std::iter::once(a).chain(users).chain(std::iter::once(b));
        let mut prev = None;
        for node in chain {
            if let Some(p) = prev {
                if !self.hop_open(street, p, node) {
                    return StreetVerdict::closed(street, ClosureReason::InsufficientSinr);
                }
            }
            prev = Some(node);
        }
        StreetVerdict::open(street, StreetStatus::OpenChain)
    }

    pub fn verdicts(&self) -> Vec<StreetVerdict> {
        (0..self.system.streets().len())
            .map(|s| self.street_verdict(s))
            .collect()
    }

    /// Transmitters on `street` meeting the threshold at `rx`.
    pub fn decodable_on(&self, street: usize, rx: NodeId) -> usize {
        self.deployment
            .nodes_on(self.system, street)
            .filter(|&tx| tx != rx && self.meets_threshold(street, tx, rx))
            .count()
    }

    /// Distinct transmitters meeting the threshold at `rx`. Each one shares
    /// exactly one street with `rx`.
    pub fn decodable_count(&self, rx: NodeId) -> usize {
        self.deployment
            .streets_of(self.system, rx)
            .iter()
            .map(|&s| self.decodable_on(s, rx))
            .sum()
    }
}

pub fn street_open(
    street: usize,
    deployment: &Deployment,
    system: &StreetSystem,
    params: &NetworkParams,
) -> StreetVerdict {
    SinrField::new(system, deployment, params).street_verdict(street)
}

pub fn street_verdicts(
    system: &StreetSystem,
    deployment: &Deployment,
    params: &NetworkParams,
) -> Vec<StreetVerdict> {
    SinrField::new(system, deployment, params).verdicts()
}

/// Whether ANY subset of the street's users, kept in street order, relays
/// between the endpoint relays. Interference always comes from the full
/// deployment. Exponential in the number of users.
pub fn street_open_bruteforce(
    street: usize,
    deployment: &Deployment,
    system: &StreetSystem,
    params: &NetworkParams,
) -> Result<bool, PropagationError> {
    let users: Vec<NodeId> = deployment.users_on(street).collect();
    if users.len() > BRUTEFORCE_USER_LIMIT {
        return Err(PropagationError::TooManyUsers {
            count: users.len(),
            limit: BRUTEFORCE_USER_LIMIT,
        });
    }
    let s = system.street(street);
    let (Some(a), Some(b)) = (deployment.relay_at(s.v1), deployment.relay_at(s.v2)) else {
        return Ok(false);
    };
    let mut hop_cache = std::collections::HashMap::new();
    let mut hop = |x: NodeId, y: NodeId| {
        *hop_cache
            .entry((x, y))
            .or_insert_with(|| link_open(x, y, deployment, system, params))
    };
    for mask in 0u32..(1 << users.len()) {
        let mut prev = a;
        let mut ok = true;
        for (i, &u) in users.iter().enumerate() {
            if mask & (1 << i) != 0 {
                if !hop(prev, u) {
                    ok = false;
                    break;
                }
                prev = u;
            }
        }
        if ok && hop(prev, b) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Geometric rule for the noise-only case: the relay gap, or every gap of
/// the full chain, is at most `radius`.
pub fn gilbert_street_open(
    street: usize,
    deployment: &Deployment,
    system: &StreetSystem,
    radius: f64,
) -> bool {
    let s = system.street(street);
    if !(deployment.relays()[s.v1] && deployment.relays()[s.v2]) {
        return false;
    }
    if s.length <= radius {
        return true;
    }
    let offsets = &deployment.users()[street];
    !offsets.is_empty()
        && std::iter::once(0.0)
            .chain(offsets.iter().copied())
            .chain(std::iter::once(s.length))
            .collect::<Vec<_>>()
            .windows(2)
            .all(|w| w[1] - w[0] <= radius)
}
