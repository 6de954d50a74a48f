//! Model parameters and the deployment of relays and users.

use std::ops::Range;

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point, StreetSystem};
use crate::seed::stream_rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("invalid parameter {name}: {reason}")]
    Invalid { name: &'static str, reason: String },
    #[error("inadmissible configuration: noise-scaled threshold {0} must be below 1")]
    Inadmissible(f64),
}

/// Street intensity giving a typical street of `mean_length` metres.
pub fn street_intensity_for_mean_length(mean_length: f64) -> f64 {
    let root = 2.0 / (3.0 * mean_length);
    root * root
}

/// Which nodes a receiver counts as interferers for a hop along a street.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterferenceScope {
    /// Only nodes on the street carrying the hop.
    #[default]
    Street,
    /// Every node sharing any street with the receiver.
    CommonStreets,
}

impl std::str::FromStr for InterferenceScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "street" => Ok(Self::Street),
            "common-streets" => Ok(Self::CommonStreets),
            other => Err(format!(
                "unknown interference scope `{other}` (street, common-streets)"
            )),
        }
    }
}

/// Physical and model parameters. Units: metres, milliwatts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkParams {
    /// Intensity of the Poisson process seeding the streets (m⁻²).
    pub street_intensity: f64,
    /// Linear intensity of users along streets (m⁻¹).
    pub user_intensity: f64,
    /// Probability that a crossroads hosts a relay.
    pub relay_probability: f64,
    /// Transmit power (mW).
    pub power: f64,
    /// Noise power (mW).
    pub noise: f64,
    /// SINR threshold.
    pub threshold: f64,
    /// Interference reduction factor.
    pub theta: f64,
    /// Path-loss exponent.
    pub beta: f64,
    /// Path-loss scaling (m⁻¹).
    pub kappa: f64,
    pub interference: InterferenceScope,
}

impl Default for NetworkParams {
    /// Reference configuration: 100 m typical street, 0 dB threshold,
    /// noise 1e-8 of the transmit power, a relay at every crossroads.
    fn default() -> Self {
        Self {
            street_intensity: street_intensity_for_mean_length(100.0),
            user_intensity: 0.0,
            relay_probability: 1.0,
            power: 1.0,
            noise: 1e-8,
            threshold: 1.0,
            theta: 0.004,
            beta: 2.0,
            kappa: 99.99,
            interference: InterferenceScope::Street,
        }
    }
}

impl NetworkParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        fn check(name: &'static str, ok: bool, value: f64, rule: &str) -> Result<(), ParamError> {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(ParamError::Invalid {
                    name,
                    reason: format!("{value} violates {rule}"),
                })
            }
        }
        check(
            "street_intensity",
            self.street_intensity > 0.0,
            self.street_intensity,
            "> 0",
        )?;
        check(
            "user_intensity",
            self.user_intensity >= 0.0,
            self.user_intensity,
            ">= 0",
        )?;
        check(
            "relay_probability",
            (0.0..=1.0).contains(&self.relay_probability),
            self.relay_probability,
            "in [0, 1]",
        )?;
        check("power", self.power > 0.0, self.power, "> 0")?;
        check("noise", self.noise >= 0.0, self.noise, ">= 0")?;
        check("threshold", self.threshold > 0.0, self.threshold, "> 0")?;
        check("theta", self.theta >= 0.0, self.theta, ">= 0")?;
        check("beta", self.beta > 0.0, self.beta, "> 0")?;
        check("kappa", self.kappa >= 0.0, self.kappa, ">= 0")?;
        let scaled = self.noise_ratio() * self.threshold;
        if scaled >= 1.0 {
            return Err(ParamError::Inadmissible(scaled));
        }
        Ok(())
    }

    /// Noise relative to transmit power, N/P.
    pub fn noise_ratio(&self) -> f64 {
        self.noise / self.power
    }

    pub fn mean_street_length(&self) -> f64 {
        2.0 / (3.0 * self.street_intensity.sqrt())
    }

    /// Sets the user intensity so that a typical street carries `u` users.
    pub fn with_users_per_street(mut self, u: f64) -> Self {
        self.user_intensity = u / self.mean_street_length();
        self
    }

    pub fn derive(&self) -> Result<DerivedParams, ParamError> {
        derive_parameters(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// N/P.
    pub noise_ratio: f64,
    /// Mean length of the typical street (m).
    pub mean_street_length: f64,
    /// Street length per unit area (m⁻¹).
    pub line_intensity: f64,
    /// Crossroads per unit area (m⁻²).
    pub vertex_intensity: f64,
    /// Mean number of users on a typical street.
    pub users_per_street: f64,
    /// Distance at which the noise-limited SNR equals the threshold (m).
    /// Infinite when the path loss is flat (`kappa == 0`).
    pub gilbert_radius: f64,
    /// Hops of length `gilbert_radius` needed to cross a typical street.
    pub hops_per_street: f64,
}

pub fn derive_parameters(params: &NetworkParams) -> Result<DerivedParams, ParamError> {
    params.validate()?;
    let noise_ratio = params.noise_ratio();
    let root = params.street_intensity.sqrt();
    let mean_street_length = 2.0 / (3.0 * root);
    let gilbert_radius =
        inverse_path_loss(noise_ratio * params.threshold, params.kappa, params.beta)?;
    Ok(DerivedParams {
        noise_ratio,
        mean_street_length,
        line_intensity: 2.0 * root,
        vertex_intensity: 2.0 * params.street_intensity,
        users_per_street: params.user_intensity * mean_street_length,
        gilbert_radius,
        hops_per_street: mean_street_length / gilbert_radius,
    })
}

/// Distance `d` with `1/(1+kappa d)^beta == level`.
pub fn inverse_path_loss(level: f64, kappa: f64, beta: f64) -> Result<f64, ParamError> {
    if !(level < 1.0) {
        return Err(ParamError::Inadmissible(level));
    }
    if level <= 0.0 || kappa == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((level.powf(-1.0 / beta) - 1.0) / kappa)
}

/// One Bernoulli(p) relay flag per crossroads.
pub fn place_relays(system: &StreetSystem, p: f64, seed: u64) -> Vec<bool> {
    let mut rng = stream_rng(seed);
    place_relays_with(system, p, &mut rng)
}

pub fn place_relays_with<R: Rng + ?Sized>(system: &StreetSystem, p: f64, rng: &mut R) -> Vec<bool> {
    let coin = Bernoulli::new(p.clamp(0.0, 1.0)).expect("clamped probability");
    (0..system.vertices().len())
        .map(|_| coin.sample(rng))
        .collect()
}

/// Poisson(λ·length) users per street at uniform offsets, sorted.
pub fn place_users(system: &StreetSystem, user_intensity: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed);
    place_users_with(system, user_intensity, &mut rng)
}

pub fn place_users_with<R: Rng + ?Sized>(
    system: &StreetSystem,
    user_intensity: f64,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    system
        .streets()
        .iter()
        .map(|street| {
            let mean = user_intensity * street.length;
            if !(mean > 0.0) {
                return Vec::new();
            }
            let count = Poisson::new(mean).expect("positive mean").sample(rng) as usize;
            let mut offsets: Vec<f64> = (0..count)
                .map(|_| street.length * rng.random::<f64>())
                .collect();
            offsets.sort_by(f64::total_cmp);
            offsets.dedup();
            offsets
        })
        .collect()
}

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Relay,
    User,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub position: Point,
    /// Crossroads id for a relay, street id for a user.
    pub anchor: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeploymentError {
    #[error("expected {expected} {what}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("street {street}: offsets must be strictly increasing within [0, {length}]")]
    Offsets { street: usize, length: f64 },
}

/// Relays and users over one street system, with node positions cached.
///
/// Relay nodes come first (in crossroads order), then users street by
/// street in offset order, so the users of a street occupy a contiguous
/// id range.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    relays: Vec<bool>,
    users: Vec<Vec<f64>>,
    nodes: Vec<Node>,
    relay_node: Vec<Option<NodeId>>,
    user_nodes: Vec<Range<NodeId>>,
}

impl Deployment {
    pub fn new(
        system: &StreetSystem,
        relays: Vec<bool>,
        users: Vec<Vec<f64>>,
    ) -> Result<Self, DeploymentError> {
        if relays.len() != system.vertices().len() {
            return Err(DeploymentError::Shape {
                what: "relay flags",
                expected: system.vertices().len(),
                got: relays.len(),
            });
        }
        if users.len() != system.streets().len() {
            return Err(DeploymentError::Shape {
                what: "user lists",
                expected: system.streets().len(),
                got: users.len(),
            });
        }
        let mut nodes = Vec::new();
        let mut relay_node = vec![None; relays.len()];
        for (v, &present) in relays.iter().enumerate() {
            if present {
                relay_node[v] = Some(nodes.len());
                nodes.push(Node {
                    id: nodes.len(),
                    kind: NodeKind::Relay,
                    position: system.vertex(v),
                    anchor: v,
                });
            }
        }
        let mut user_nodes = Vec::with_capacity(users.len());
        for (s, offsets) in users.iter().enumerate() {
            let length = system.street(s).length;
            let ordered = offsets.windows(2).all(|w| w[0] < w[1]);
            let bounded = offsets.iter().all(|&o| (0.0..=length).contains(&o));
            if !ordered || !bounded {
                return Err(DeploymentError::Offsets { street: s, length });
            }
            let start = nodes.len();
            for &o in offsets {
                nodes.push(Node {
                    id: nodes.len(),
                    kind: NodeKind::User,
                    position: system.point_on(s, o),
                    anchor: s,
                });
            }
            user_nodes.push(start..nodes.len());
        }
        Ok(Self {
            relays,
            users,
            nodes,
            relay_node,
            user_nodes,
        })
    }

    /// Samples relays and users from their own seeds.
    pub fn generate(
        system: &StreetSystem,
        params: &NetworkParams,
        relay_seed: u64,
        user_seed: u64,
    ) -> Self {
        let relays = place_relays(system, params.relay_probability, relay_seed);
        let users = place_users(system, params.user_intensity, user_seed);
        Self::new(system, relays, users).expect("sampled deployment is consistent")
    }

    pub fn relays(&self) -> &[bool] {
        &self.relays
    }

    pub fn users(&self) -> &[Vec<f64>] {
        &self.users
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn relay_at(&self, vertex: usize) -> Option<NodeId> {
        self.relay_node[vertex]
    }

    /// User node ids on a street, in offset order.
    pub fn users_on(&self, street: usize) -> Range<NodeId> {
        self.user_nodes[street].clone()
    }

    pub fn user_count(&self) -> usize {
        self.user_nodes.iter().map(|r| r.len()).sum()
    }

    /// Streets a node lies on: all incident streets for a relay, one for a user.
    pub fn streets_of<'a>(&self, system: &'a StreetSystem, id: NodeId) -> &'a [usize] {
        let node = &self.nodes[id];
        match node.kind {
            NodeKind::Relay => system.incident(node.anchor),
            NodeKind::User => std::slice::from_ref(&system.street(node.anchor).id),
        }
    }

    /// Every node on a street: the endpoint relays that exist and its users.
    pub fn nodes_on(
        &self,
        system: &StreetSystem,
        street: usize,
    ) -> impl Iterator<Item = NodeId> + '_ {
        let s = system.street(street);
        self.relay_node[s.v1]
            .into_iter()
            .chain(self.relay_node[s.v2])
            .chain(self.user_nodes[street].clone())
    }

    /// Copy of this deployment with one more user on `street`.
    pub fn with_extra_user(
        &self,
        system: &StreetSystem,
        street: usize,
        offset: f64,
    ) -> Result<Self, DeploymentError> {
        let mut users = self.users.clone();
        let list = &mut users[street];
        let at = list.partition_point(|&o| o < offset);
        list.insert(at, offset);
        Self::new(system, self.relays.clone(), users)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_street_system, sample_poisson_points, Window};
    use approx::assert_relative_eq;

    fn line_system(lengths: &[f64]) -> StreetSystem {
        // Disjoint horizontal streets, one per requested length.
        let mut vertices = Vec::new();
        let mut edges = Vec::new();
        for (i, &len) in lengths.iter().enumerate() {
            let y = 10.0 * i as f64;
            vertices.push(Point::new(0.0, y));
            vertices.push(Point::new(len, y));
            edges.push((2 * i, 2 * i + 1));
        }
        StreetSystem::from_parts(vertices, &edges).unwrap()
    }

    #[test]
    fn defaults_give_100m_streets_and_unit_hops() {
        let p = NetworkParams::default();
        let d = p.derive().unwrap();
        assert_relative_eq!(d.mean_street_length, 100.0, max_relative = 1e-12);
        assert_relative_eq!(d.gilbert_radius, 100.0, max_relative = 1e-12);
        assert_relative_eq!(d.hops_per_street, 1.0, max_relative = 1e-12);
        assert_eq!(d.users_per_street, 0.0);
    }

    #[test]
    fn rounded_street_intensity_gives_100m() {
        let p = NetworkParams {
            street_intensity: 4.444e-5,
            ..Default::default()
        };
        assert_relative_eq!(p.mean_street_length(), 100.0, max_relative = 1e-4);
        assert_relative_eq!(p.derive().unwrap().vertex_intensity, 8.888e-5);
    }

    #[test]
    fn gilbert_radius_inverts_path_loss() {
        let r = inverse_path_loss(1e-8, 99.99, 2.0).unwrap();
        assert_relative_eq!(r, 100.0, max_relative = 1e-12);
        let direct = 1.0 / (1.0 + 99.99 * 100.0_f64).powi(2);
        assert_relative_eq!(direct, 1e-8, max_relative = 1e-12);
        assert!(inverse_path_loss(1.0, 99.99, 2.0).is_err());
        assert_eq!(inverse_path_loss(0.0, 99.99, 2.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn users_per_street_two_ways() {
        let p = NetworkParams {
            user_intensity: 0.037,
            ..Default::default()
        };
        let d = p.derive().unwrap();
        let via_gamma = 4.0 / 3.0 * p.user_intensity / d.line_intensity;
        assert_relative_eq!(d.users_per_street, via_gamma, max_relative = 1e-15);
        let q = NetworkParams::default().with_users_per_street(3.6);
        assert_relative_eq!(
            q.derive().unwrap().users_per_street,
            3.6,
            max_relative = 1e-12
        );
    }

    #[test]
    fn validation_rejects_bad_values() {
        let base = NetworkParams::default();
        let bad = [
            NetworkParams {
                threshold: 0.0,
                ..base
            },
            NetworkParams {
                street_intensity: 0.0,
                ..base
            },
            NetworkParams {
                relay_probability: 1.5,
                ..base
            },
            NetworkParams {
                theta: -0.1,
                ..base
            },
            NetworkParams { beta: 0.0, ..base },
            NetworkParams {
                kappa: -1.0,
                ..base
            },
            NetworkParams {
                user_intensity: f64::NAN,
                ..base
            },
        ];
        for p in bad {
            assert!(
                matches!(p.validate(), Err(ParamError::Invalid { .. })),
                "{p:?}"
            );
        }
        let noisy = NetworkParams { noise: 2.0, ..base };
        assert!(matches!(noisy.validate(), Err(ParamError::Inadmissible(_))));
    }

    #[test]
    fn relay_extremes() {
        let window = Window::new(1500.0).unwrap();
        let pts = sample_poisson_points(4.444e-5, &window, 5).unwrap();
        let system = build_street_system(&pts, &window).unwrap();
        assert!(place_relays(&system, 1.0, 3).iter().all(|&r| r));
        assert!(place_relays(&system, 0.0, 3).iter().all(|&r| !r));
        assert_eq!(place_relays(&system, 0.5, 3), place_relays(&system, 0.5, 3));
    }

    #[test]
    fn relay_fraction_is_binomial() {
        let window = Window::new(1500.0).unwrap();
        let mut present = 0usize;
        let mut total = 0usize;
        for seed in 0..45 {
            let pts = sample_poisson_points(4.444e-5, &window, seed).unwrap();
            let system = build_street_system(&pts, &window).unwrap();
            let relays = place_relays(&system, 0.8, 1000 + seed);
            present += relays.iter().filter(|&&r| r).count();
            total += relays.len();
        }
        assert!(total >= 10_000, "pooled {total} vertices");
        let frac = present as f64 / total as f64;
        let se = (0.8 * 0.2 / total as f64).sqrt();
        assert!((frac - 0.8).abs() < 3.0 * se, "{frac}");
    }

    #[test]
    fn user_counts_have_poisson_mean() {
        let system = line_system(&vec![100.0; 10_000]);
        let users = place_users(&system, 0.02, 11);
        let n = users.len() as f64;
        let mean = users.iter().map(|u| u.len() as f64).sum::<f64>() / n;
        let se = (2.0 / n).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * se, "{mean}");
        for (s, offsets) in users.iter().enumerate() {
            assert!(offsets.windows(2).all(|w| w[0] < w[1]));
            let len = system.street(s).length;
            assert!(offsets.iter().all(|&o| (0.0..=len).contains(&o)));
        }
        assert!(place_users(&system, 0.0, 11).iter().all(|u| u.is_empty()));
    }

    #[test]
    fn deployment_layout() {
        let system = line_system(&[100.0, 50.0]);
        let relays = vec![true, true, false, true];
        let users = vec![vec![10.0, 60.0], vec![25.0]];
        let d = Deployment::new(&system, relays, users).unwrap();
        assert_eq!(d.nodes().len(), 6);
        assert_eq!(d.relay_at(2), None);
        assert_eq!(d.users_on(0), 3..5);
        assert_eq!(d.node(4).position, Point::new(60.0, 0.0));
        let on0: Vec<_> = d.nodes_on(&system, 0).collect();
        assert_eq!(on0, vec![0, 1, 3, 4]);
        let bad = Deployment::new(&system, vec![true; 4], vec![vec![60.0, 10.0], vec![]]);
        assert!(matches!(
            bad,
            Err(DeploymentError::Offsets { street: 0, .. })
        ));
        let outside = Deployment::new(&system, vec![true; 4], vec![vec![], vec![51.0]]);
        assert!(outside.is_err());
    }
}
