//! Seeded random scenarios shared by the integration tests.
//!
//! Velocities are trigonometric polynomials with values in `[0.55, 1.95]`;
//! boundary data are built so the C1 corner conditions hold exactly, using
//! closed-form derivatives rather than the library's finite differences.

#![allow(dead_code)]

use std::f64::consts::PI;

use continuity_core::continuity::ContinuityProblem;
use continuity_core::fields::{BoundarySignal, InitialProfile, TransportCoefficients, VelocityField};
use continuity_core::transport::TransportProblem;
use continuity_core::{Grid, ScalarProfile, ScalarSignal, SpaceTimeField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `{:?}` keeps every float exact through the parser; parentheses guard
/// the sign.
pub fn lit(x: f64) -> String {
    format!("({x:?})")
}

#[derive(Debug, Clone)]
pub struct Wave {
    pub amp: f64,
    pub k: f64,
    pub m: f64,
    pub phase: f64,
}

impl Wave {
    fn random(rng: &mut ChaCha8Rng, amp: f64) -> Wave {
        Wave {
            amp,
            k: rng.gen_range(0.5..3.0),
            m: rng.gen_range(0.5..3.0),
            phase: rng.gen_range(0.0..2.0 * PI),
        }
    }

    /// `amp·sin(k t + m x + phase)`.
    pub fn source(&self) -> String {
        format!("{}*sin({}*t + {}*x + {})", lit(self.amp), lit(self.k), lit(self.m), lit(self.phase))
    }

    pub fn at_origin(&self) -> f64 {
        self.amp * self.phase.sin()
    }

    /// `∂/∂x` at the origin.
    pub fn dx_at_origin(&self) -> f64 {
        self.amp * self.m * self.phase.cos()
    }
}

/// Velocity `1.25 + w1 + w2` with `|amp1| + |amp2| ≤ 0.7`.
#[derive(Debug, Clone)]
pub struct RandomVelocity {
    pub waves: [Wave; 2],
}

impl RandomVelocity {
    pub fn random(rng: &mut ChaCha8Rng) -> RandomVelocity {
        let a1 = rng.gen_range(0.0..0.4);
        let a2 = rng.gen_range(0.0..0.3);
        RandomVelocity {
            waves: [Wave::random(rng, a1), Wave::random(rng, a2)],
        }
    }

    pub fn source(&self) -> String {
        format!("1.25 + {} + {}", self.waves[0].source(), self.waves[1].source())
    }

    pub fn at_origin(&self) -> f64 {
        1.25 + self.waves.iter().map(Wave::at_origin).sum::<f64>()
    }

    /// `sup v = 1.25 + |amp1| + |amp2|`.
    pub fn sup(&self) -> f64 {
        1.25 + self.waves.iter().map(|w| w.amp.abs()).sum::<f64>()
    }

    pub fn dx_at_origin(&self) -> f64 {
        self.waves.iter().map(Wave::dx_at_origin).sum()
    }

    pub fn field(&self, grid: &Grid) -> VelocityField {
        VelocityField::new(SpaceTimeField::parse(&self.source()).unwrap(), grid).unwrap()
    }
}

/// Profile `c0 + c1·sin(m x + phase)`.
#[derive(Debug, Clone)]
pub struct RandomProfile {
    pub c0: f64,
    pub c1: f64,
    pub m: f64,
    pub phase: f64,
}

impl RandomProfile {
    pub fn random(rng: &mut ChaCha8Rng) -> RandomProfile {
        RandomProfile {
            c0: rng.gen_range(-0.5..0.5),
            c1: rng.gen_range(-0.5..0.5),
            m: rng.gen_range(0.5..4.0),
            phase: rng.gen_range(0.0..2.0 * PI),
        }
    }

    pub fn source(&self) -> String {
        format!("{} + {}*sin({}*x + {})", lit(self.c0), lit(self.c1), lit(self.m), lit(self.phase))
    }

    pub fn at_zero(&self) -> f64 {
        self.c0 + self.c1 * self.phase.sin()
    }

    pub fn slope_at_zero(&self) -> f64 {
        self.c1 * self.m * self.phase.cos()
    }
}

/// Boundary `b0 + β t + γ sin(ω t)` with prescribed value and rate at 0.
pub fn boundary_source(rng: &mut ChaCha8Rng, value: f64, rate: f64) -> String {
    let gamma: f64 = rng.gen_range(-0.3..0.3);
    let omega: f64 = rng.gen_range(1.0..4.0);
    let beta = rate - gamma * omega;
    format!("{} + {}*t + {}*sin({}*t)", lit(value), lit(beta), lit(gamma), lit(omega))
}

/// `w_t + v w_x = a w + f` with C1-compatible data.
#[derive(Debug, Clone)]
pub struct RandomTransport {
    pub v: RandomVelocity,
    pub phi: RandomProfile,
    pub a: Wave,
    pub f: Wave,
    pub b: String,
}

impl RandomTransport {
    pub fn generate(seed: u64) -> RandomTransport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = RandomVelocity::random(&mut rng);
        let phi = RandomProfile::random(&mut rng);
        let a_amp = rng.gen_range(-0.3..0.3);
        let a = Wave::random(&mut rng, a_amp);
        let f_amp = rng.gen_range(-0.5..0.5);
        let f = Wave::random(&mut rng, f_amp);
        // ḃ(0) + v(0,0)φ′(0) = a(0,0)φ(0) + f(0,0)
        let rate = a.at_origin() * phi.at_zero() + f.at_origin() - v.at_origin() * phi.slope_at_zero();
        let b = boundary_source(&mut rng, phi.at_zero(), rate);
        RandomTransport { v, phi, a, f, b }
    }

    pub fn problem(&self, grid: &Grid) -> TransportProblem {
        TransportProblem::new(
            self.v.field(grid),
            InitialProfile::new(ScalarProfile::parse(&self.phi.source()).unwrap(), Vec::new(), grid).unwrap(),
            BoundarySignal::new(ScalarSignal::parse(&self.b).unwrap(), grid).unwrap(),
            TransportCoefficients::new(
                SpaceTimeField::parse(&self.a.source()).unwrap(),
                SpaceTimeField::parse(&self.f.source()).unwrap(),
                grid,
            )
            .unwrap(),
        )
    }
}

/// Continuity data `ρ0 = ρs·e^{φ}` with C1-compatible `b`.
#[derive(Debug, Clone)]
pub struct RandomContinuity {
    pub rho_s: f64,
    pub v: RandomVelocity,
    pub phi: RandomProfile,
    pub b: String,
}

impl RandomContinuity {
    pub fn generate(seed: u64) -> RandomContinuity {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho_s = rng.gen_range(0.5..2.0);
        let v = RandomVelocity::random(&mut rng);
        let phi = RandomProfile::random(&mut rng);
        // ḃ(0) = −∂v/∂x(0,0) − v(0,0)·ρ0′(0)/ρ0(0)
        let rate = -v.dx_at_origin() - v.at_origin() * phi.slope_at_zero();
        let b = boundary_source(&mut rng, phi.at_zero(), rate);
        RandomContinuity { rho_s, v, phi, b }
    }

    pub fn rho0_source(&self) -> String {
        format!("{}*exp({})", lit(self.rho_s), self.phi.source())
    }

    pub fn problem(&self, grid: &Grid) -> ContinuityProblem {
        ContinuityProblem::new(
            self.rho_s,
            InitialProfile::density(ScalarProfile::parse(&self.rho0_source()).unwrap(), grid).unwrap(),
            BoundarySignal::new(ScalarSignal::parse(&self.b).unwrap(), grid).unwrap(),
            self.v.field(grid),
        )
        .unwrap()
    }
}

/// Random source text over `vars`, drawn from the full grammar.
pub fn random_expression(rng: &mut ChaCha8Rng, vars: &[&str], depth: u32) -> String {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..4) {
            0 => format!("{}", rng.gen_range(0..10)),
            1 => format!("{:?}", rng.gen_range(0.0..5.0)),
            2 => ["pi", "e"][rng.gen_range(0..2)].to_string(),
            _ => vars[rng.gen_range(0..vars.len())].to_string(),
        };
    }
    let mut sub = || random_expression(rng, vars, depth - 1);
    let (a, b) = (sub(), sub());
    match rng.gen_range(0..11) {
        0 => format!("{a} + {b}"),
        1 => format!("{a} - {b}"),
        2 => format!("{a}*{b}"),
        3 => format!("{a}/({b})"),
        4 => format!("({a})^({b})"),
        5 => format!("-{a}"),
        6 => format!("({a})"),
        7 => format!("{}({a})", ["exp", "ln", "sin", "cos", "sqrt", "abs"][rng.gen_range(0..6)]),
        8 => format!("min({a}, {b})"),
        9 => format!("max({a}, {b})"),
        _ => format!("{a}^{b}"),
    }
}
