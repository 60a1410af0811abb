use alloc::vec::Vec;

use super::{norm, ImpulseSequence, ImpulsiveSystem, InputSignal};
use crate::error::{invalid, Error, Result};

/// States with Euclidean norm above this abort the simulation.
pub const BLOW_UP_NORM: f64 = 1e12;

/// A continuous piece of the trajectory. The first point is the post-jump
/// state of the preceding impulse (or `x0`); when the segment ends at an
/// impulse its last point is the pre-jump state `x⁻`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub times: Vec<f64>,
    states: Vec<f64>,
    n: usize,
    pub ends_at_impulse: bool,
}

impl Segment {
    fn new(n: usize, t: f64, x: &[f64]) -> Self {
        let mut s = Segment { times: Vec::new(), states: Vec::new(), n, ends_at_impulse: false };
        s.push(t, x);
        s
    }

    fn push(&mut self, t: f64, x: &[f64]) {
        self.times.push(t);
        self.states.extend_from_slice(x);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.n..(i + 1) * self.n]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
    /// `u⁻` at the impulse time.
    pub input: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint<'a> {
    pub t: f64,
    pub x: &'a [f64],
    pub pre_jump: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridTrajectory {
    pub n: usize,
    pub step: f64,
    pub t0: f64,
    pub sequence: ImpulseSequence,
    pub segments: Vec<Segment>,
    pub jumps: Vec<Jump>,
}

impl HybridTrajectory {
    /// Every recorded point in time order. At an impulse time the pre-jump
    /// point comes first, then the post-jump point.
    pub fn points(&self) -> impl Iterator<Item = TrajectoryPoint<'_>> + '_ {
        self.segments.iter().flat_map(|seg| {
            let last = seg.len() - 1;
            (0..seg.len()).map(move |i| TrajectoryPoint {
                t: seg.times[i],
                x: seg.state(i),
                pre_jump: seg.ends_at_impulse && i == last,
            })
        })
    }

    pub fn final_state(&self) -> &[f64] {
        self.segments.last().expect("trajectory has a segment").last_state()
    }

    pub fn final_time(&self) -> f64 {
        *self.segments.last().and_then(|s| s.times.last()).expect("trajectory has a point")
    }

    pub fn point_count(&self) -> usize {
        self.segments.iter().map(Segment::len).sum()
    }
}

struct Rk4<'a> {
    sys: &'a ImpulsiveSystem,
    slots: Vec<f64>,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl<'a> Rk4<'a> {
    fn new(sys: &'a ImpulsiveSystem) -> Self {
        let n = sys.state_dim();
        Rk4 {
            sys,
            slots: alloc::vec![0.0; n + sys.input_dim()],
            k: [alloc::vec![0.0; n], alloc::vec![0.0; n], alloc::vec![0.0; n], alloc::vec![0.0; n]],
            tmp: alloc::vec![0.0; n],
        }
    }

    fn eval_flow(&mut self, x: &[f64], out: usize) -> Result<()> {
        let n = x.len();
        self.slots[..n].copy_from_slice(x);
        for (i, c) in self.sys.flow_compiled().iter().enumerate() {
            self.k[out][i] = c.eval(&self.slots)?;
        }
        Ok(())
    }

    /// One classical RK4 step with the input held at `u`.
    fn step(&mut self, x: &mut [f64], u: &[f64], h: f64) -> Result<()> {
        let n = x.len();
        self.slots[n..].copy_from_slice(u);
        self.eval_flow(x, 0)?;
        for (stage, coef) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
            for i in 0..n {
                self.tmp[i] = x[i] + coef * h * self.k[stage - 1][i];
            }
            let tmp = core::mem::take(&mut self.tmp);
            self.eval_flow(&tmp, stage)?;
            self.tmp = tmp;
        }
        for i in 0..n {
            x[i] += h / 6.0 * (self.k[0][i] + 2.0 * self.k[1][i] + 2.0 * self.k[2][i] + self.k[3][i]);
        }
        Ok(())
    }
}

fn check_finite(t: f64, x: &[f64]) -> Result<()> {
    let nrm = norm(x);
    if !nrm.is_finite() || nrm > BLOW_UP_NORM {
        return Err(Error::BlowUp { time: t, norm: nrm });
    }
    Ok(())
}

/// Integrates the hybrid system on `[t0, horizon]`.
///
/// Between events the classical RK4 scheme runs with step `step`; every
/// impulse time and every input breakpoint is a grid point (the last substep
/// before it is shortened), and the input is constant within each substep.
/// At an impulse time the pre-jump state is recorded, the jump map is applied
/// once with `u⁻`, and the post-jump state starts the next segment.
pub fn simulate(
    sys: &ImpulsiveSystem,
    x0: &[f64],
    t0: f64,
    u: &InputSignal,
    seq: &ImpulseSequence,
    horizon: f64,
    step: f64,
) -> Result<HybridTrajectory> {
    let n = sys.state_dim();
    if x0.len() != n {
        return Err(invalid("initial state has the wrong dimension"));
    }
    if u.dim() != sys.input_dim() {
        return Err(invalid("input has the wrong dimension"));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid("step must be positive"));
    }
    if !(horizon > t0) || !horizon.is_finite() || !t0.is_finite() {
        return Err(invalid("horizon must exceed t0"));
    }
    if seq.times().iter().any(|&t| t <= t0 || t > horizon) {
        return Err(invalid("impulse times must lie in (t0, horizon]"));
    }

    // (time, is_impulse), sorted and deduplicated
    let mut events: Vec<(f64, bool)> = seq.times().iter().map(|&t| (t, true)).collect();
    events.extend(
        u.breakpoints()
            .iter()
            .filter(|&&b| b > t0 && b < horizon)
            .map(|&b| (b, false)),
    );
    events.push((horizon, false));
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    events.dedup_by(|later, earlier| {
        if later.0 == earlier.0 {
            earlier.1 |= later.1;
            true
        } else {
            false
        }
    });

    let mut rk = Rk4::new(sys);
    let mut x = x0.to_vec();
    check_finite(t0, &x)?;
    let mut segments = Vec::new();
    let mut jumps = Vec::new();
    let mut seg = Segment::new(n, t0, &x);
    let mut t = t0;
    for (event, is_impulse) in events {
        let span = event - t;
        if span > 0.0 {
            let steps = libm::ceil(span / step - 1e-9).max(1.0) as usize;
            let mut prev = t;
            for k in 1..=steps {
                let tk = if k == steps { event } else { t + k as f64 * step };
                rk.step(&mut x, u.at(prev), tk - prev)?;
                check_finite(tk, &x)?;
                seg.push(tk, &x);
                prev = tk;
            }
        }
        t = event;
        if is_impulse {
            let input = u.left_limit(event).to_vec();
            let post = sys.jump(&x, &input)?;
            check_finite(event, &post)?;
            seg.ends_at_impulse = true;
            jumps.push(Jump { time: event, pre: x.clone(), post: post.clone(), input });
            segments.push(core::mem::replace(&mut seg, Segment::new(n, event, &post)));
            x = post;
        }
    }
    segments.push(seg);
    Ok(HybridTrajectory { n, step, t0, sequence: seq.clone(), segments, jumps })
}
