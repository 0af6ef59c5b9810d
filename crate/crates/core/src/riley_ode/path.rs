use serde::Serialize;

use super::Region;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathNode {
    pub m1: f64,
    pub t: f64,
    /// `dt/dm1` from the right-hand side at the node.
    pub slope: f64,
    pub region: Region,
}

/// A monotone sampled solution `t(m1)` of the belief equation. Read one way
/// it is the belief `mu(m1)`; inverted it is the schedule `m1*(t)`.
///
/// Between nodes the curve is a cubic Hermite interpolant whose node slopes
/// are limited (Fritsch–Carlson) so that it stays monotone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledPath {
    nodes: Vec<PathNode>,
    #[serde(skip)]
    knots: Vec<f64>,
}

impl SampledPath {
    pub fn new(nodes: Vec<PathNode>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvariantViolation {
                what: "empty path".into(),
                at: vec![],
            });
        }
        for w in nodes.windows(2) {
            if !(w[1].m1 > w[0].m1 && w[1].t > w[0].t) {
                return Err(Error::InvariantViolation {
                    what: "path nodes must increase in m1 and t".into(),
                    at: vec![w[0].m1, w[0].t, w[1].m1, w[1].t],
                });
            }
        }
        if nodes
            .windows(2)
            .any(|w| w[0].region == Region::Binding && w[1].region == Region::Slack)
        {
            return Err(Error::InvariantViolation {
                what: "slack nodes must precede binding nodes".into(),
                at: vec![],
            });
        }
        let knots = limited_slopes(&nodes);
        Ok(Self { nodes, knots })
    }

    /// A single-node path (zero-length segment).
    pub fn point(m1: f64, t: f64, slope: f64, region: Region) -> Self {
        let nodes = vec![PathNode { m1, t, slope, region }];
        let knots = vec![slope];
        Self { nodes, knots }
    }

    /// The part of the path with `t <= t_cut`, ending exactly at `t_cut`.
    pub fn truncate_at_t(&self, t_cut: f64) -> Result<Self> {
        let (lo, hi) = self.t_range();
        if t_cut >= hi {
            return Ok(self.clone());
        }
        if t_cut < lo {
            return Err(Error::OutOfDomain {
                what: "truncation type below path",
                at: vec![t_cut, lo, hi],
            });
        }
        let m1 = self.m1_at(t_cut)?;
        let slope = if self.is_degenerate() { self.first().slope } else { self.dt_dm1_at(m1)? };
        let region = self.nodes[self.segment_by_t(t_cut)].region;
        let mut kept: Vec<PathNode> = self.nodes.iter().copied().filter(|n| n.t < t_cut && n.m1 < m1).collect();
        kept.push(PathNode { m1, t: t_cut, slope, region });
        if kept.len() == 1 {
            return Ok(Self::point(m1, t_cut, slope, region));
        }
        Self::new(kept)
    }

    pub fn nodes(&self) -> &[PathNode] {
        &self.nodes
    }

    pub fn first(&self) -> &PathNode {
        &self.nodes[0]
    }

    pub fn last(&self) -> &PathNode {
        self.nodes.last().expect("non-empty")
    }

    pub fn is_degenerate(&self) -> bool {
        self.nodes.len() < 2
    }

    pub fn m1_range(&self) -> (f64, f64) {
        (self.first().m1, self.last().m1)
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.first().t, self.last().t)
    }

    fn segment_by_m1(&self, m1: f64) -> usize {
        let i = self.nodes.partition_point(|n| n.m1 <= m1);
        i.clamp(1, self.nodes.len() - 1) - 1
    }

    fn segment_by_t(&self, t: f64) -> usize {
        let i = self.nodes.partition_point(|n| n.t <= t);
        i.clamp(1, self.nodes.len() - 1) - 1
    }

    fn hermite(&self, i: usize, m1: f64) -> (f64, f64) {
        let (a, b) = (&self.nodes[i], &self.nodes[i + 1]);
        let h = b.m1 - a.m1;
        let s = (m1 - a.m1) / h;
        let (d0, d1) = (self.knots[i], self.knots[i + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let value = h00 * a.t + h10 * h * d0 + h01 * b.t + h11 * h * d1;
        let dh00 = 6.0 * s2 - 6.0 * s;
        let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
        let dh01 = -6.0 * s2 + 6.0 * s;
        let dh11 = 3.0 * s2 - 2.0 * s;
        let deriv = (dh00 * a.t + dh01 * b.t) / h + dh10 * d0 + dh11 * d1;
        (value, deriv)
    }

    fn check_m1(&self, m1: f64) -> Result<()> {
        let (lo, hi) = self.m1_range();
        if m1 < lo || m1 > hi || m1.is_nan() {
            return Err(Error::OutOfDomain {
                what: "m1 outside sampled path",
                at: vec![m1, lo, hi],
            });
        }
        Ok(())
    }

    /// Belief `mu(m1)`.
    pub fn t_at(&self, m1: f64) -> Result<f64> {
        self.check_m1(m1)?;
        if self.is_degenerate() {
            return Ok(self.first().t);
        }
        Ok(self.hermite(self.segment_by_m1(m1), m1).0)
    }

    /// `mu'(m1)` from the interpolant.
    pub fn dt_dm1_at(&self, m1: f64) -> Result<f64> {
        self.check_m1(m1)?;
        if self.is_degenerate() {
            return Ok(self.knots[0]);
        }
        Ok(self.hermite(self.segment_by_m1(m1), m1).1)
    }

    /// Schedule `m1*(t)`: inverts the interpolant on the segment that
    /// brackets `t`.
    pub fn m1_at(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.t_range();
        if t < lo || t > hi || t.is_nan() {
            return Err(Error::OutOfDomain {
                what: "t outside sampled path",
                at: vec![t, lo, hi],
            });
        }
        if self.is_degenerate() {
            return Ok(self.first().m1);
        }
        let i = self.segment_by_t(t);
        let (a, b) = (&self.nodes[i], &self.nodes[i + 1]);
        if t == a.t {
            return Ok(a.m1);
        }
        if t == b.t {
            return Ok(b.m1);
        }
        // Safeguarded Newton on the monotone cubic.
        let (mut lo_m, mut hi_m) = (a.m1, b.m1);
        let mut x = a.m1 + (t - a.t) / (b.t - a.t) * (b.m1 - a.m1);
        for _ in 0..100 {
            let (v, d) = self.hermite(i, x);
            let r = v - t;
            if r == 0.0 {
                return Ok(x);
            }
            if r > 0.0 {
                hi_m = x;
            } else {
                lo_m = x;
            }
            let newton = if d > 0.0 { x - r / d } else { f64::NAN };
            x = if newton > lo_m && newton < hi_m {
                newton
            } else {
                0.5 * (lo_m + hi_m)
            };
            if hi_m - lo_m <= 4.0 * f64::EPSILON * hi_m.abs().max(1.0)
                || (r.abs() <= 1e-15 * t.abs())
            {
                break;
            }
        }
        Ok(x)
    }
}

fn limited_slopes(nodes: &[PathNode]) -> Vec<f64> {
    let mut d: Vec<f64> = nodes.iter().map(|n| n.slope.max(0.0)).collect();
    for i in 0..nodes.len().saturating_sub(1) {
        let delta = (nodes[i + 1].t - nodes[i].t) / (nodes[i + 1].m1 - nodes[i].m1);
        let a = d[i] / delta;
        let b = d[i + 1] / delta;
        let r2 = a * a + b * b;
        if r2 > 9.0 {
            let tau = 3.0 / r2.sqrt();
            d[i] = tau * a * delta;
            d[i + 1] = tau * b * delta;
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sqrt_path(n: usize) -> SampledPath {
        let nodes = (0..n)
            .map(|i| {
                let m1 = i as f64 / (n - 1) as f64;
                let t = (1.0 + m1 * m1).sqrt();
                PathNode { m1, t, slope: m1 / t, region: Region::Slack }
            })
            .collect();
        SampledPath::new(nodes).unwrap()
    }

    #[test]
    fn interpolates_and_inverts() {
        let p = sqrt_path(200);
        for k in 0..=100 {
            let m1 = k as f64 / 100.0;
            let t = p.t_at(m1).unwrap();
            assert!((t - (1.0 + m1 * m1).sqrt()).abs() < 1e-10);
            let back = p.m1_at(t).unwrap();
            assert!((back - m1).abs() < 1e-9, "{m1} {back}");
        }
    }

    #[test]
    fn rejects_non_monotone_nodes() {
        let n = |m1, t| PathNode { m1, t, slope: 1.0, region: Region::Slack };
        assert!(SampledPath::new(vec![n(0.0, 1.0), n(0.5, 1.0)]).is_err());
        assert!(SampledPath::new(vec![n(0.0, 1.0), n(0.0, 1.5)]).is_err());
    }

    #[test]
    fn rejects_interleaved_regions() {
        let nodes = vec![
            PathNode { m1: 0.0, t: 1.0, slope: 1.0, region: Region::Binding },
            PathNode { m1: 1.0, t: 2.0, slope: 1.0, region: Region::Slack },
        ];
        assert!(SampledPath::new(nodes).is_err());
    }

    #[test]
    fn out_of_range_queries() {
        let p = sqrt_path(10);
        assert!(p.t_at(1.5).is_err());
        assert!(p.m1_at(0.5).is_err());
    }
}
