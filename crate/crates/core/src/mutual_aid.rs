//! The mutual-aid community domain: a fairness taxonomy grounded in three properties,
//! satisfaction degrees computed from counted behaviour, and event-log ingestion.
//!
//! * `p1`: help requests are proportionate to help offers (`#requests / #offers > 1`).
//! * `p2`: help requests are proportionate to times chosen as volunteer.
//! * `p3`: tasks are spread evenly over volunteers (`difference(D, U) < ε`).

use std::collections::BTreeMap;

use crate::alignment::SatisfactionProvider;
use crate::context::{ContextSpec, SelectionStrategy};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::taxonomy::{Node, TaxonomyBuilder, ValueTaxonomy};

/// Property catalog ids.
pub const REQUESTS_PER_OFFER: &str = "p1";
pub const REQUESTS_PER_VOLUNTEERING: &str = "p2";
pub const EVEN_WORKLOAD: &str = "p3";

/// The general fairness taxonomy, without importances.
///
/// ```text
/// fairness ─┬─ reciprocity ── balanced_give_take ─┬─ p1
///           │                                     └─ p2
///           └─ equal_treatment ─┬─ equal_division ── p3
///                               └─ equal_pay
/// ```
pub fn fairness_taxonomy<T: Scalar>() -> ValueTaxonomy<T> {
    TaxonomyBuilder::new()
        .label("fairness", "fairness")
        .label("reciprocity", "reciprocity")
        .label("balanced_give_take", "balanced give & take")
        .label("equal_treatment", "equal treatment")
        .label("equal_division", "equal division of workload")
        .label("equal_pay", "equal pay")
        .property("p1", REQUESTS_PER_OFFER)
        .property("p2", REQUESTS_PER_VOLUNTEERING)
        .property("p3", EVEN_WORKLOAD)
        .edge("fairness", "reciprocity")
        .edge("fairness", "equal_treatment")
        .edge("reciprocity", "balanced_give_take")
        .edge("balanced_give_take", "p1")
        .edge("balanced_give_take", "p2")
        .edge("equal_treatment", "equal_division")
        .edge("equal_treatment", "equal_pay")
        .edge("equal_division", "p3")
        .build()
        .expect("fixture is a valid taxonomy")
}

/// A mutual-aid community that cares about offers and even workload.
pub fn community_context<T: Scalar>() -> ContextSpec<T> {
    ContextSpec::new("c")
        .with_importance("p1", T::lit(0.8))
        .and_then(|c| c.with_importance("p2", T::zero()))
        .and_then(|c| c.with_importance("p3", T::lit(0.7)))
        .expect("fixture importances are in range")
        .with_selection(SelectionStrategy::PositiveThreshold(T::zero()))
}

/// A volunteering community supporting the elderly: reciprocity is unwanted.
pub fn elderly_support_context<T: Scalar>() -> ContextSpec<T> {
    ContextSpec::new("c'")
        .with_importance("p1", T::lit(-0.5))
        .and_then(|c| c.with_importance("p2", T::lit(-0.5)))
        .and_then(|c| c.with_importance("p3", T::lit(0.9)))
        .expect("fixture importances are in range")
        .with_selection(SelectionStrategy::PositiveThreshold(T::zero()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Request,
    Offer,
    VolunteerChosen,
    TaskAssigned,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub kind: EventKind,
    pub member: String,
    pub timestamp: u64,
}

impl Event {
    pub fn new(kind: EventKind, member: impl Into<String>, timestamp: u64) -> Self {
        Self {
            kind,
            member: member.into(),
            timestamp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MemberCounts {
    pub requests: u64,
    pub offers: u64,
    /// Times chosen as volunteer.
    pub volunteering: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommunityState {
    pub members: BTreeMap<String, MemberCounts>,
    /// Tasks assigned per volunteer.
    pub task_distribution: BTreeMap<String, u64>,
}

impl CommunityState {
    pub fn total_tasks(&self) -> u64 {
        self.task_distribution.values().sum()
    }

    pub fn counts(&self, member: &str) -> Result<MemberCounts> {
        self.members
            .get(member)
            .copied()
            .ok_or_else(|| Error::UnknownMember(member.to_owned()))
    }
}

/// Folds a log into per-member counters and the task distribution. Counters do not
/// depend on event order.
pub fn ingest(log: &[Event]) -> Result<CommunityState> {
    let mut state = CommunityState::default();
    for (index, event) in log.iter().enumerate() {
        if event.member.is_empty() {
            return Err(Error::MalformedEvent {
                index,
                reason: "empty member id".into(),
            });
        }
        let counts = state.members.entry(event.member.clone()).or_default();
        match event.kind {
            EventKind::Request => counts.requests += 1,
            EventKind::Offer => counts.offers += 1,
            EventKind::VolunteerChosen => counts.volunteering += 1,
            EventKind::TaskAssigned => {
                *state
                    .task_distribution
                    .entry(event.member.clone())
                    .or_default() += 1
            }
        }
    }
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DifferenceMeasure {
    KlDivergence,
    #[default]
    EarthMovers1D,
}

/// How per-member degrees for `p1`/`p2` become one degree for the community.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MemberAggregation {
    /// Mean over members with any activity relevant to the ratio.
    #[default]
    MeanOverMembers,
    /// The entity being assessed is itself a member.
    SingleEntity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainConfig<T> {
    pub max_ratio: T,
    pub epsilon: T,
    pub max_delta: T,
    pub measure: DifferenceMeasure,
    pub member_aggregation: MemberAggregation,
    /// Treat `n > 0` requests over zero offers as `max_ratio` instead of failing.
    pub saturate_undefined_ratio: bool,
}

impl<T: Scalar> Default for DomainConfig<T> {
    fn default() -> Self {
        Self {
            max_ratio: T::lit(5.0),
            epsilon: T::lit(0.1),
            max_delta: T::one(),
            measure: DifferenceMeasure::default(),
            member_aggregation: MemberAggregation::default(),
            saturate_undefined_ratio: false,
        }
    }
}

impl<T: Scalar> DomainConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.max_ratio.is_nan() || self.max_ratio <= T::one() {
            return Err(Error::InvalidConfig(format!(
                "max_ratio must exceed 1, got {}",
                self.max_ratio
            )));
        }
        if self.epsilon.is_nan() || self.epsilon <= T::zero() {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_delta.is_nan() || self.max_delta <= self.epsilon {
            return Err(Error::InvalidConfig(format!(
                "max_delta ({}) must exceed epsilon ({})",
                self.max_delta, self.epsilon
            )));
        }
        Ok(())
    }
}

/// Maps a ratio onto `[-1, 1]`: `[0, 1]` linearly onto `[-1, 0]` and `[1, max_ratio]`
/// onto `[0, 1]`. The ratio is clamped to `[0, max_ratio]` first.
pub fn ratio_satisfaction<T: Scalar>(ratio: T, max_ratio: T) -> T {
    let r = ratio.max(T::zero()).min(max_ratio);
    if r > T::one() {
        (r - T::one()) / (max_ratio - T::one())
    } else {
        r - T::one()
    }
}

/// Maps a distribution difference onto `[-1, 1]`: `[0, ε]` onto `[1, 0]` and
/// `[ε, max_delta]` onto `[0, -1]`. The difference is clamped to `[0, max_delta]` first.
pub fn difference_satisfaction<T: Scalar>(delta: T, epsilon: T, max_delta: T) -> T {
    let d = delta.max(T::zero()).min(max_delta);
    if d < epsilon {
        T::one() - d / epsilon
    } else {
        (epsilon - d) / (max_delta - epsilon)
    }
}

fn member_ratio<T: Scalar>(
    member: &str,
    numerator: u64,
    denominator: u64,
    denominator_name: &'static str,
    cfg: &DomainConfig<T>,
) -> Result<T> {
    match (numerator, denominator) {
        // No evidence either way.
        (0, 0) => Ok(T::one()),
        (_, 0) if cfg.saturate_undefined_ratio => Ok(cfg.max_ratio),
        (n, 0) => Err(Error::UndefinedRatio {
            member: member.to_owned(),
            numerator: n,
            denominator: denominator_name,
        }),
        (n, d) => Ok(T::from_u64(n).expect("count fits") / T::from_u64(d).expect("count fits")),
    }
}

/// Satisfaction of `p1` for one member: requests over offers.
pub fn sd_p1<T: Scalar>(state: &CommunityState, member: &str, cfg: &DomainConfig<T>) -> Result<T> {
    cfg.validate()?;
    let c = state.counts(member)?;
    let r = member_ratio(member, c.requests, c.offers, "offers", cfg)?;
    Ok(ratio_satisfaction(r, cfg.max_ratio))
}

/// Satisfaction of `p2` for one member: requests over times chosen as volunteer.
pub fn sd_p2<T: Scalar>(state: &CommunityState, member: &str, cfg: &DomainConfig<T>) -> Result<T> {
    cfg.validate()?;
    let c = state.counts(member)?;
    let r = member_ratio(member, c.requests, c.volunteering, "volunteering", cfg)?;
    Ok(ratio_satisfaction(r, cfg.max_ratio))
}

/// Satisfaction of `p3`: how close the task distribution is to uniform.
///
/// Volunteers are ordered by task count before measuring, so the result does not
/// depend on how volunteers are named.
pub fn sd_p3<T: Scalar>(state: &CommunityState, cfg: &DomainConfig<T>) -> Result<T> {
    cfg.validate()?;
    let mut counts: Vec<u64> = state.task_distribution.values().copied().collect();
    if counts.is_empty() || counts.iter().all(|&c| c == 0) {
        return Err(Error::EmptyDistribution);
    }
    counts.sort_unstable();
    let d: Vec<T> = counts
        .iter()
        .map(|&c| T::from_u64(c).expect("count fits"))
        .collect();
    let u = vec![T::one(); d.len()];
    let delta = match cfg.measure {
        DifferenceMeasure::KlDivergence => kl_divergence(&d, &u)?,
        DifferenceMeasure::EarthMovers1D => emd_1d(&d, &u)?,
    };
    Ok(difference_satisfaction(delta, cfg.epsilon, cfg.max_delta))
}

fn normalize<T: Scalar>(weights: &[T]) -> Result<Vec<T>> {
    if weights.iter().any(|w| w.is_nan() || *w < T::zero()) {
        return Err(Error::InvalidConfig(
            "distribution weights must be non-negative".into(),
        ));
    }
    let total: T = weights.iter().copied().sum();
    if weights.is_empty() || total <= T::zero() {
        return Err(Error::EmptyDistribution);
    }
    Ok(weights.iter().map(|&w| w / total).collect())
}

/// `KL(D ‖ U) = Σ d_i ln(d_i / u_i)` in nats, with `0 ln 0 = 0`. Both arguments are
/// non-negative weights (e.g. counts) and are normalised first.
pub fn kl_divergence<T: Scalar>(d: &[T], u: &[T]) -> Result<T> {
    if d.len() != u.len() {
        return Err(Error::SupportMismatch {
            left: d.len(),
            right: u.len(),
        });
    }
    let (d, u) = (normalize(d)?, normalize(u)?);
    let mut total = T::zero();
    for (&p, &q) in d.iter().zip(&u) {
        if p == T::zero() {
            continue;
        }
        if q == T::zero() {
            // D puts mass where U has none.
            return Err(Error::SupportMismatch {
                left: d.len(),
                right: u.iter().filter(|q| **q > T::zero()).count(),
            });
        }
        total = total + p * (p / q).ln();
    }
    Ok(total.max(T::zero()))
}

/// Earth mover's distance between two distributions on the same ordered support with
/// unit spacing: `Σ_k |CDF_D(k) − CDF_U(k)|`. Arguments are normalised first.
pub fn emd_1d<T: Scalar>(d: &[T], u: &[T]) -> Result<T> {
    if d.len() != u.len() {
        return Err(Error::SupportMismatch {
            left: d.len(),
            right: u.len(),
        });
    }
    let (d, u) = (normalize(d)?, normalize(u)?);
    let mut carried = T::zero();
    let mut total = T::zero();
    for (&p, &q) in d.iter().zip(&u) {
        carried = carried + p - q;
        total = total + carried.abs();
    }
    Ok(total)
}

/// Satisfaction degrees for the fairness properties, computed from a community state.
#[derive(Debug, Clone)]
pub struct CommunityProvider<T> {
    state: CommunityState,
    cfg: DomainConfig<T>,
}

impl<T: Scalar> CommunityProvider<T> {
    pub fn new(state: CommunityState, cfg: DomainConfig<T>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { state, cfg })
    }

    pub fn state(&self) -> &CommunityState {
        &self.state
    }

    fn per_member(
        &self,
        entity: &str,
        active: impl Fn(&MemberCounts) -> bool,
        sd: impl Fn(&CommunityState, &str, &DomainConfig<T>) -> Result<T>,
    ) -> Result<T> {
        match self.cfg.member_aggregation {
            MemberAggregation::SingleEntity => sd(&self.state, entity, &self.cfg),
            MemberAggregation::MeanOverMembers => {
                let values = self
                    .state
                    .members
                    .iter()
                    .filter(|(_, c)| active(c))
                    .map(|(m, _)| sd(&self.state, m, &self.cfg))
                    .collect::<Result<Vec<T>>>()?;
                if values.is_empty() {
                    return Ok(T::zero());
                }
                let sum: T = values.iter().copied().sum();
                Ok(sum / T::from_count(values.len()))
            }
        }
    }
}

impl<T: Scalar> SatisfactionProvider<T> for CommunityProvider<T> {
    fn satisfaction(&self, entity: &str, node: &Node) -> Result<T> {
        match node.property_id() {
            Some(REQUESTS_PER_OFFER) => {
                self.per_member(entity, |c| c.requests + c.offers > 0, sd_p1)
            }
            Some(REQUESTS_PER_VOLUNTEERING) => {
                self.per_member(entity, |c| c.requests + c.volunteering > 0, sd_p2)
            }
            Some(EVEN_WORKLOAD) => sd_p3(&self.state, &self.cfg),
            _ => Err(Error::MissingSatisfaction(node.id.clone())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::NodeId;
    use EventKind::*;

    fn cfg() -> DomainConfig<f64> {
        DomainConfig::default()
    }

    fn state_with(members: &[(&str, u64, u64, u64)], tasks: &[(&str, u64)]) -> CommunityState {
        CommunityState {
            members: members
                .iter()
                .map(|&(m, requests, offers, volunteering)| {
                    (
                        m.to_owned(),
                        MemberCounts {
                            requests,
                            offers,
                            volunteering,
                        },
                    )
                })
                .collect(),
            task_distribution: tasks.iter().map(|&(m, n)| (m.to_owned(), n)).collect(),
        }
    }

    #[test]
    fn fixture_is_valid() {
        let t = fairness_taxonomy::<f64>();
        assert!(t.validate().is_ok());
        assert_eq!(t.len(), 9);
        assert_eq!(t.property_nodes().count(), 3);
    }

    #[test]
    fn ingest_counts() {
        let log = vec![
            Event::new(Request, "m", 1),
            Event::new(Request, "m", 2),
            Event::new(Offer, "m", 3),
            Event::new(Request, "m", 4),
            Event::new(Offer, "m", 5),
        ];
        let s = ingest(&log).unwrap();
        assert_eq!(
            s.counts("m").unwrap(),
            MemberCounts {
                requests: 3,
                offers: 2,
                volunteering: 0
            }
        );
    }

    #[test]
    fn ingest_empty_and_tasks() {
        assert_eq!(ingest(&[]).unwrap(), CommunityState::default());
        let log = [
            Event::new(TaskAssigned, "v1", 1),
            Event::new(TaskAssigned, "v2", 2),
            Event::new(TaskAssigned, "v1", 3),
            Event::new(TaskAssigned, "v2", 4),
        ];
        let s = ingest(&log).unwrap();
        assert_eq!(
            s.task_distribution,
            BTreeMap::from([("v1".into(), 2), ("v2".into(), 2)])
        );
        assert_eq!(s.total_tasks(), 4);
    }

    #[test]
    fn ingest_rejects_empty_member() {
        assert!(matches!(
            ingest(&[Event::new(Offer, "", 0)]),
            Err(Error::MalformedEvent { index: 0, .. })
        ));
    }

    #[test]
    fn ratio_mapping_points() {
        assert_eq!(ratio_satisfaction(1.0, 5.0), 0.0);
        assert_eq!(ratio_satisfaction(0.0, 5.0), -1.0);
        assert_eq!(ratio_satisfaction(5.0, 5.0), 1.0);
        assert_eq!(ratio_satisfaction(3.0, 5.0), 0.5);
        assert_eq!(ratio_satisfaction(2.5, 4.0), 0.5);
        assert_eq!(ratio_satisfaction(40.0, 5.0), 1.0);
    }

    #[test]
    fn difference_mapping_points() {
        assert_eq!(difference_satisfaction(0.0, 0.1, 1.0), 1.0);
        assert_eq!(difference_satisfaction(0.1, 0.1, 1.0), 0.0);
        assert_eq!(difference_satisfaction(1.0, 0.1, 1.0), -1.0);
        assert_eq!(difference_satisfaction(3.0, 0.1, 1.0), -1.0);
    }

    #[test]
    fn p1_from_counts() {
        let s = state_with(
            &[
                ("a", 3, 1, 0),
                ("b", 2, 2, 0),
                ("c", 0, 4, 0),
                ("d", 0, 0, 0),
                ("e", 2, 0, 0),
            ],
            &[],
        );
        assert_eq!(sd_p1(&s, "a", &cfg()).unwrap(), 0.5);
        assert_eq!(sd_p1(&s, "b", &cfg()).unwrap(), 0.0);
        assert_eq!(sd_p1(&s, "c", &cfg()).unwrap(), -1.0);
        assert_eq!(sd_p1(&s, "d", &cfg()).unwrap(), 0.0);
        assert!(matches!(
            sd_p1(&s, "e", &cfg()),
            Err(Error::UndefinedRatio { .. })
        ));
        let saturate = DomainConfig {
            saturate_undefined_ratio: true,
            ..cfg()
        };
        assert_eq!(sd_p1(&s, "e", &saturate).unwrap(), 1.0);
        assert!(matches!(
            sd_p1(&s, "zz", &cfg()),
            Err(Error::UnknownMember(_))
        ));
    }

    #[test]
    fn p2_from_counts() {
        let s = state_with(&[("a", 2, 0, 2), ("b", 0, 0, 3), ("c", 5, 0, 2)], &[]);
        assert_eq!(sd_p2(&s, "a", &cfg()).unwrap(), 0.0);
        assert_eq!(sd_p2(&s, "b", &cfg()).unwrap(), -1.0);
        let four = DomainConfig {
            max_ratio: 4.0,
            ..cfg()
        };
        assert_eq!(sd_p2(&s, "c", &four).unwrap(), 0.5);
    }

    #[test]
    fn p3_uniform_and_skewed() {
        let even = state_with(&[], &[("v1", 2), ("v2", 2)]);
        assert_eq!(sd_p3(&even, &cfg()).unwrap(), 1.0);
        let skewed = state_with(&[], &[("v1", 4), ("v2", 0)]);
        // EMD 0.5 -> (0.1 - 0.5) / 0.9
        assert!((sd_p3(&skewed, &cfg()).unwrap() - (-0.4 / 0.9)).abs() < 1e-12);
        assert_eq!(
            sd_p3(&state_with(&[], &[]), &cfg()),
            Err(Error::EmptyDistribution)
        );
    }

    #[test]
    fn p3_ignores_volunteer_names() {
        let a = state_with(&[], &[("a", 5), ("b", 1), ("c", 3)]);
        let b = state_with(&[], &[("a", 1), ("b", 3), ("c", 5)]);
        assert_eq!(sd_p3(&a, &cfg()).unwrap(), sd_p3(&b, &cfg()).unwrap());
    }

    #[test]
    fn divergences() {
        assert_eq!(kl_divergence(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!(
            (kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - std::f64::consts::LN_2).abs()
                < 1e-12
        );
        assert_eq!(emd_1d(&[1.0, 0.0], &[0.5, 0.5]).unwrap(), 0.5);
        assert_eq!(emd_1d(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), 0.5);
        assert!(matches!(
            kl_divergence(&[1.0], &[0.5, 0.5]),
            Err(Error::SupportMismatch { .. })
        ));
        assert!(matches!(
            emd_1d(&[1.0, 2.0, 3.0], &[1.0]),
            Err(Error::SupportMismatch { .. })
        ));
        assert!(matches!(
            kl_divergence(&[1.0, 1.0], &[1.0, 0.0]),
            Err(Error::SupportMismatch { .. })
        ));
        assert_eq!(
            emd_1d(&[0.0, 0.0], &[1.0, 1.0]),
            Err(Error::EmptyDistribution)
        );
    }

    #[test]
    fn config_validation() {
        assert!(cfg().validate().is_ok());
        assert!(DomainConfig {
            max_ratio: 1.0,
            ..cfg()
        }
        .validate()
        .is_err());
        assert!(DomainConfig {
            epsilon: 0.0,
            ..cfg()
        }
        .validate()
        .is_err());
        assert!(DomainConfig {
            max_delta: 0.1,
            ..cfg()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn provider_mean_over_members() {
        // sd 0.2 -> R = 1.8; sd 0.6 -> R = 3.4 with max_ratio 5.
        let s = state_with(
            &[("a", 9, 5, 0), ("b", 17, 5, 0), ("idle", 0, 0, 0)],
            &[("a", 1)],
        );
        let p = CommunityProvider::new(s, cfg()).unwrap();
        let node = Node::property(NodeId::new("p1").unwrap(), REQUESTS_PER_OFFER);
        assert!((p.satisfaction("community", &node).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn provider_single_entity() {
        let s = state_with(&[("a", 3, 1, 0)], &[("a", 1)]);
        let p = CommunityProvider::new(
            s.clone(),
            DomainConfig {
                member_aggregation: MemberAggregation::SingleEntity,
                ..cfg()
            },
        )
        .unwrap();
        let node = Node::property(NodeId::new("p1").unwrap(), REQUESTS_PER_OFFER);
        assert_eq!(
            p.satisfaction("a", &node).unwrap(),
            sd_p1(&s, "a", &cfg()).unwrap()
        );
        let unknown = Node::property(NodeId::new("pX").unwrap(), "px");
        assert!(matches!(
            p.satisfaction("a", &unknown),
            Err(Error::MissingSatisfaction(_))
        ));
    }
}
