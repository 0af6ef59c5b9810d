use super::{Region, SampledPath};
use crate::error::{Error, Result};

/// The separating schedule: a slack segment with `m2 = m2°` followed by a
/// binding segment with `m2 = M - m1`. Either segment may be absent.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseSchedule {
    pub slack: Option<SampledPath>,
    pub binding: Option<SampledPath>,
    pub m2_circ: f64,
    pub budget: f64,
}

impl PiecewiseSchedule {
    fn segments(&self) -> impl Iterator<Item = (Region, &SampledPath)> {
        self.slack
            .iter()
            .map(|p| (Region::Slack, p))
            .chain(self.binding.iter().map(|p| (Region::Binding, p)))
    }

    pub fn t_start(&self) -> f64 {
        self.segments().next().map(|(_, p)| p.first().t).unwrap_or(f64::NAN)
    }

    pub fn t_end(&self) -> f64 {
        self.segments().last().map(|(_, p)| p.last().t).unwrap_or(f64::NAN)
    }

    pub fn m1_start(&self) -> f64 {
        self.segments().next().map(|(_, p)| p.first().m1).unwrap_or(f64::NAN)
    }

    pub fn m1_end(&self) -> f64 {
        self.segments().last().map(|(_, p)| p.last().m1).unwrap_or(f64::NAN)
    }

    /// The schedule restricted to types `t <= t_cut`. A binding segment
    /// starting at or after `t_cut` is dropped.
    pub fn truncate_at_t(&self, t_cut: f64) -> Result<Self> {
        let slack = match &self.slack {
            Some(p) if p.first().t <= t_cut => Some(p.truncate_at_t(t_cut)?),
            _ => None,
        };
        let binding = match &self.binding {
            Some(p) if p.first().t < t_cut || (slack.is_none() && p.first().t <= t_cut) => {
                Some(p.truncate_at_t(t_cut)?)
            }
            _ => None,
        };
        Ok(Self { slack, binding, ..*self })
    }

    /// Type at which the binding segment begins, if there is one.
    pub fn t_kink(&self) -> Option<f64> {
        self.binding.as_ref().map(|p| p.first().t)
    }

    fn m2_for(&self, region: Region, m1: f64) -> f64 {
        match region {
            Region::Slack => self.m2_circ,
            Region::Binding => self.budget - m1,
        }
    }

    /// `(m1, m2, region)` of type `t`. Types at the kink are binding.
    pub fn signals(&self, t: f64) -> Result<(f64, f64, Region)> {
        let mut chosen = None;
        for (region, path) in self.segments() {
            let (lo, hi) = path.t_range();
            if t >= lo && t <= hi {
                chosen = Some((region, path));
            }
        }
        let (region, path) = chosen.ok_or(Error::OutOfDomain {
            what: "type outside separating schedule",
            at: vec![t, self.t_start(), self.t_end()],
        })?;
        let m1 = path.m1_at(t)?;
        Ok((m1, self.m2_for(region, m1), region))
    }

    /// Belief `mu(m1)` for `m1` inside the separating range.
    pub fn belief(&self, m1: f64) -> Option<f64> {
        self.segments().find_map(|(_, p)| {
            let (lo, hi) = p.m1_range();
            (m1 >= lo && m1 <= hi).then(|| p.t_at(m1).ok()).flatten()
        })
    }

    /// `(region, mu'(m1))` from the interpolant at an interior point.
    pub fn belief_slope(&self, m1: f64) -> Option<(Region, f64)> {
        self.segments().find_map(|(r, p)| {
            let (lo, hi) = p.m1_range();
            (m1 >= lo && m1 <= hi && !p.is_degenerate())
                .then(|| p.dt_dm1_at(m1).ok().map(|d| (r, d)))
                .flatten()
        })
    }
}
