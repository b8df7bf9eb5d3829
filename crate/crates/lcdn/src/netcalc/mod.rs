//! Min-plus network calculus over token-bucket arrival curves and
//! rate-latency service curves.
//!
//! Traffic entering the network is enveloped by an [`ArrivalCurve`]
//! `alpha(t) = burst + rate * t`, and the forwarding capacity of a switch
//! egress port is lower-bounded by a [`ServiceCurve`]
//! `beta(t) = rate * max(0, t - latency)`. For this pair of shapes the two
//! classic deviations have closed forms:
//!
//! ```text
//! delay bound    h(alpha, beta) = latency + burst / service_rate
//! backlog bound  v(alpha, beta) = burst + arrival_rate * latency
//! ```
//!
//! Both require `arrival_rate <= service_rate`; otherwise the backlog grows
//! without bound and the functions report [`NetcalcError::ServiceOverload`]
//! so admission can reject the flow instead of propagating infinities.
//!
//! Strict-priority egress queues receive a *residual* service curve: the
//! port curve minus the arrival envelope of all higher-priority classes and
//! minus one maximum-size lower-priority frame that may already be on the
//! wire (transmission is not preempted). See [`residual_spq`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from bound computations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetcalcError {
    /// The arrival rate exceeds what the server can sustain; delay and
    /// backlog are unbounded. Admission must treat this as a rejection.
    #[error("arrival rate {arrival_bps} bps exceeds service rate {service_bps} bps")]
    ServiceOverload { arrival_bps: f64, service_bps: f64 },
    /// A curve parameter is outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Token-bucket traffic envelope: cumulative arrivals in any window of
/// length `t > 0` are at most `burst_bits + rate_bps * t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalCurve {
    /// Sustained rate in bits per second.
    pub rate_bps: f64,
    /// Maximum burst in bits.
    pub burst_bits: f64,
}

impl ArrivalCurve {
    /// A curve admitting no traffic at all; the identity of [`aggregate`].
    pub const ZERO: ArrivalCurve = ArrivalCurve {
        rate_bps: 0.0,
        burst_bits: 0.0,
    };

    pub fn new(rate_bps: f64, burst_bits: f64) -> ArrivalCurve {
        assert!(
            rate_bps.is_finite() && rate_bps >= 0.0,
            "arrival rate must be finite and non-negative"
        );
        assert!(
            burst_bits.is_finite() && burst_bits >= 0.0,
            "burst must be finite and non-negative"
        );
        ArrivalCurve {
            rate_bps,
            burst_bits,
        }
    }

    /// Evaluate the envelope at `t` seconds. `alpha(0) = 0` by convention.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            self.burst_bits + self.rate_bps * t
        }
    }

    /// Right-continuous evaluation `alpha(t+) = burst + rate * t` for
    /// `t >= 0`. This is the version deviations are measured against: a
    /// burst released at the window start counts.
    pub fn eval_plus(&self, t: f64) -> f64 {
        self.burst_bits + self.rate_bps * t.max(0.0)
    }

    /// Componentwise sum with another envelope.
    pub fn add(&self, other: &ArrivalCurve) -> ArrivalCurve {
        ArrivalCurve {
            rate_bps: self.rate_bps + other.rate_bps,
            burst_bits: self.burst_bits + other.burst_bits,
        }
    }
}

/// Rate-latency service envelope: `beta(t) = rate_bps * max(0, t - latency_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceCurve {
    /// Guaranteed forwarding rate in bits per second. Strictly positive.
    pub rate_bps: f64,
    /// Worst-case dead time before the rate is available, in seconds.
    pub latency_s: f64,
}

impl ServiceCurve {
    pub fn new(rate_bps: f64, latency_s: f64) -> ServiceCurve {
        assert!(
            rate_bps.is_finite() && rate_bps > 0.0,
            "service rate must be finite and positive"
        );
        assert!(
            latency_s.is_finite() && latency_s >= 0.0,
            "service latency must be finite and non-negative"
        );
        ServiceCurve {
            rate_bps,
            latency_s,
        }
    }

    /// Evaluate the guarantee at `t` seconds.
    pub fn eval(&self, t: f64) -> f64 {
        self.rate_bps * (t - self.latency_s).max(0.0)
    }
}

/// Delay and backlog bound of one arrival/service pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSet {
    pub delay_s: f64,
    pub backlog_bits: f64,
}

/// Componentwise sum of arrival envelopes. The empty aggregate is
/// [`ArrivalCurve::ZERO`].
pub fn aggregate<'a, I>(curves: I) -> ArrivalCurve
where
    I: IntoIterator<Item = &'a ArrivalCurve>,
{
    curves
        .into_iter()
        .fold(ArrivalCurve::ZERO, |acc, c| acc.add(c))
}

fn check_stability(a: &ArrivalCurve, s: &ServiceCurve) -> Result<(), NetcalcError> {
    if a.rate_bps > s.rate_bps {
        Err(NetcalcError::ServiceOverload {
            arrival_bps: a.rate_bps,
            service_bps: s.rate_bps,
        })
    } else {
        Ok(())
    }
}

/// Worst-case delay: the horizontal deviation between `a` and `s`,
/// `latency + burst / service_rate` in closed form.
pub fn delay_bound(a: &ArrivalCurve, s: &ServiceCurve) -> Result<f64, NetcalcError> {
    check_stability(a, s)?;
    Ok(s.latency_s + a.burst_bits / s.rate_bps)
}

/// Worst-case buffered data: the vertical deviation between `a` and `s`,
/// `burst + arrival_rate * latency` in closed form.
pub fn backlog_bound(a: &ArrivalCurve, s: &ServiceCurve) -> Result<f64, NetcalcError> {
    check_stability(a, s)?;
    Ok(a.burst_bits + a.rate_bps * s.latency_s)
}

/// Both deviations at once.
pub fn bounds(a: &ArrivalCurve, s: &ServiceCurve) -> Result<BoundSet, NetcalcError> {
    Ok(BoundSet {
        delay_s: delay_bound(a, s)?,
        backlog_bits: backlog_bound(a, s)?,
    })
}

/// Envelope of the traffic after it has traversed a server guaranteeing
/// `s` (min-plus deconvolution): the rate is unchanged and the burst grows
/// to `burst + rate * latency`.
pub fn output_curve(a: &ArrivalCurve, s: &ServiceCurve) -> Result<ArrivalCurve, NetcalcError> {
    check_stability(a, s)?;
    Ok(ArrivalCurve {
        rate_bps: a.rate_bps,
        burst_bits: a.burst_bits + a.rate_bps * s.latency_s,
    })
}

/// Service curve of a whole egress port: full link rate after the measured
/// per-packet processing time plus the scheduler arbitration overhead.
pub fn port_service(
    link_rate_bps: f64,
    t_proc_s: f64,
    t_spq_s: f64,
) -> Result<ServiceCurve, NetcalcError> {
    if !(link_rate_bps.is_finite() && link_rate_bps > 0.0) {
        return Err(NetcalcError::InvalidParameter(format!(
            "link rate must be positive, got {link_rate_bps}"
        )));
    }
    if t_proc_s < 0.0 || t_spq_s < 0.0 {
        return Err(NetcalcError::InvalidParameter(
            "processing and scheduling delays must be non-negative".into(),
        ));
    }
    Ok(ServiceCurve {
        rate_bps: link_rate_bps,
        latency_s: t_proc_s + t_spq_s,
    })
}

/// Residual service left for one strict-priority class.
///
/// Starting from the port curve `beta(t) = C * (t - T)+`, subtract the
/// aggregate envelope of all higher-priority classes and `blocking_bits`
/// of non-preemptable lower-priority transmission. The non-decreasing
/// closure of `[beta(t) - alpha_H(t) - blocking]+` is again rate-latency:
///
/// ```text
/// rate'    = C - r_H
/// latency' = (C * T + b_H + blocking) / (C - r_H)
/// ```
pub fn residual_spq(
    port: &ServiceCurve,
    higher_agg: &ArrivalCurve,
    blocking_bits: f64,
) -> Result<ServiceCurve, NetcalcError> {
    if !(blocking_bits.is_finite() && blocking_bits >= 0.0) {
        return Err(NetcalcError::InvalidParameter(format!(
            "blocking must be finite and non-negative, got {blocking_bits}"
        )));
    }
    if higher_agg.rate_bps >= port.rate_bps {
        return Err(NetcalcError::ServiceOverload {
            arrival_bps: higher_agg.rate_bps,
            service_bps: port.rate_bps,
        });
    }
    if *higher_agg == ArrivalCurve::ZERO && blocking_bits == 0.0 {
        // No interference leaves the port curve exactly unchanged.
        return Ok(*port);
    }
    let rate = port.rate_bps - higher_agg.rate_bps;
    let latency =
        (port.rate_bps * port.latency_s + higher_agg.burst_bits + blocking_bits) / rate;
    Ok(ServiceCurve {
        rate_bps: rate,
        latency_s: latency,
    })
}
