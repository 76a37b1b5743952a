//! Seeded random scenarios. Velocities are `1.25` plus two travelling
//! sine waves with amplitudes summing to at most `0.7`, so `v ∈ [0.55,
//! 1.95]` everywhere. Boundary data are chosen so the corner conditions
//! hold to first order, using closed-form derivatives at the origin.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scenario::{FieldSources, ProblemKind, Scenario};

/// Keeps every float exact through the expression parser.
fn lit(x: f64) -> String {
    format!("({x:?})")
}

/// `amp·sin(k t + m x + phase)`.
struct Wave {
    amp: f64,
    k: f64,
    m: f64,
    phase: f64,
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

    fn source(&self) -> String {
        format!("{}*sin({}*t + {}*x + {})", lit(self.amp), lit(self.k), lit(self.m), lit(self.phase))
    }

    fn at_origin(&self) -> f64 {
        self.amp * self.phase.sin()
    }

    fn dx_at_origin(&self) -> f64 {
        self.amp * self.m * self.phase.cos()
    }
}

struct Velocity([Wave; 2]);

impl Velocity {
    fn random(rng: &mut ChaCha8Rng) -> Velocity {
        let a1 = rng.gen_range(0.0..0.4);
        let a2 = rng.gen_range(0.0..0.3);
        Velocity([Wave::random(rng, a1), Wave::random(rng, a2)])
    }

    fn source(&self) -> String {
        format!("1.25 + {} + {}", self.0[0].source(), self.0[1].source())
    }

    fn at_origin(&self) -> f64 {
        1.25 + self.0[0].at_origin() + self.0[1].at_origin()
    }

    fn dx_at_origin(&self) -> f64 {
        self.0[0].dx_at_origin() + self.0[1].dx_at_origin()
    }
}

/// `c0 + c1·sin(m x + phase)` with its value and slope at 0.
fn profile(rng: &mut ChaCha8Rng) -> (String, f64, f64) {
    let c0: f64 = rng.gen_range(-0.5..0.5);
    let c1: f64 = rng.gen_range(-0.5..0.5);
    let m: f64 = rng.gen_range(0.5..4.0);
    let phase: f64 = rng.gen_range(0.0..2.0 * PI);
    let src = format!("{} + {}*sin({}*x + {})", lit(c0), lit(c1), lit(m), lit(phase));
    (src, c0 + c1 * phase.sin(), c1 * m * phase.cos())
}

/// `b0 + β t + γ sin(ω t)` with `b(0) = value` and `ḃ(0) = rate`.
fn boundary(rng: &mut ChaCha8Rng, value: f64, rate: f64) -> String {
    let gamma: f64 = rng.gen_range(-0.3..0.3);
    let omega: f64 = rng.gen_range(1.0..4.0);
    let beta = rate - gamma * omega;
    format!("{} + {}*t + {}*sin({}*t)", lit(value), lit(beta), lit(gamma), lit(omega))
}

/// Draws the fields of one random scenario of `kind`. Returns `ρs` for
/// continuity problems.
fn draw(kind: ProblemKind, rng: &mut ChaCha8Rng) -> (FieldSources, Option<f64>) {
    match kind {
        ProblemKind::Transport => {
            let v = Velocity::random(rng);
            let (phi, phi0, dphi0) = profile(rng);
            let amp = rng.gen_range(-0.3..0.3);
            let a = Wave::random(rng, amp);
            let amp = rng.gen_range(-0.5..0.5);
            let f = Wave::random(rng, amp);
            // ḃ(0) + v(0,0)φ′(0) = a(0,0)φ(0) + f(0,0)
            let rate = a.at_origin() * phi0 + f.at_origin() - v.at_origin() * dphi0;
            let b = boundary(rng, phi0, rate);
            let fields = FieldSources {
                v: Some(v.source()),
                b: Some(b),
                phi: Some(phi),
                a: Some(a.source()),
                f: Some(f.source()),
                ..FieldSources::default()
            };
            (fields, None)
        }
        ProblemKind::Continuity | ProblemKind::Manufacturing => {
            let rho_s = rng.gen_range(0.5..2.0);
            let v = Velocity::random(rng);
            let (phi, phi0, dphi0) = profile(rng);
            // ρ0 = ρs·e^φ; ḃ(0) = −∂v/∂x(0,0) − v(0,0)·φ′(0)
            let rate = -v.dx_at_origin() - v.at_origin() * dphi0;
            let b = boundary(rng, phi0, rate);
            let fields = FieldSources {
                v: Some(v.source()),
                b: Some(b),
                rho0: Some(format!("{}*exp({phi})", lit(rho_s))),
                ..FieldSources::default()
            };
            (fields, Some(rho_s))
        }
    }
}

/// The `count` scenarios of a campaign, named `<name>_<seed>_<i>`. Grid
/// and certification settings are taken from `template`.
pub fn generate(template: &Scenario, seed: u64, count: usize) -> Vec<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let (fields, rho_s) = draw(template.problem, &mut rng);
            Scenario {
                name: format!("{}_{seed}_{i}", template.name),
                rho_s,
                fields,
                campaign: None,
                jumps: Vec::new(),
                ..template.clone()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;
    use crate::scenario::Problem;
    use continuity_core::fields::{
        check_compatibility_continuity, check_compatibility_transport, Regularity, COMPATIBILITY_TOL,
    };

    fn template(kind: &str) -> Scenario {
        let text = format!("problem = {kind}\ncampaign = 4\nnx = 50\ndt = 0.01\nhorizon = 1\n");
        parse_scenario(&text, "camp").unwrap()
    }

    #[test]
    fn campaigns_are_reproducible() {
        let t = template("transport");
        assert_eq!(generate(&t, 7, 4), generate(&t, 7, 4));
        assert_ne!(generate(&t, 7, 1), generate(&t, 8, 1));
        assert_eq!(generate(&t, 7, 4)[3].name, "camp_7_3");
    }

    #[test]
    fn generated_data_are_valid_and_compatible() {
        for kind in ["transport", "continuity"] {
            let t = template(kind);
            let grid = t.grid().unwrap();
            for s in generate(&t, 11, 4) {
                match s.build(&grid).unwrap() {
                    Problem::Transport(p) => {
                        let r = check_compatibility_transport(&p.phi, &p.b, &p.v, &p.coeffs, COMPATIBILITY_TOL);
                        assert_eq!(r.regularity, Regularity::C1, "{}", s.name);
                    }
                    Problem::Continuity(p) => {
                        assert!(check_compatibility_continuity(p.rho_s, &p.rho0, &p.b, &p.v, COMPATIBILITY_TOL).passes(), "{}", s.name);
                    }
                    Problem::Manufacturing(_) => unreachable!(),
                }
            }
        }
    }
}
