use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::point_process::{EventSequence, HawkesModel, ProcessState};

use super::simulate::PathSink;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    Grid,
    /// Recorded right after an event's jump.
    Event,
}

/// One sampled path: states at grid and event times, the driving events and
/// the Wiener increments of every recorded interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dims: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    kinds: Vec<PointKind>,
    events: EventSequence,
    /// `(len - 1) x dims`; empty when the dynamics have no diffusion.
    noise: Vec<f64>,
    origin: ProcessState,
}

impl Trajectory {
    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn kinds(&self) -> &[PointKind] {
        &self.kinds
    }

    pub fn state(&self, p: usize) -> &[f64] {
        &self.states[p * self.dims..(p + 1) * self.dims]
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn initial_state(&self) -> &[f64] {
        self.state(0)
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// State at `t` (right-continuous: the last recorded point at or before `t`).
    pub fn state_at(&self, t: f64) -> Option<&[f64]> {
        let p = self.times.partition_point(|&s| s <= t);
        (p > 0).then(|| self.state(p - 1))
    }

    pub fn events(&self) -> &EventSequence {
        &self.events
    }

    pub fn has_noise(&self) -> bool {
        !self.noise.is_empty()
    }

    /// Wiener increments over `[times[p], times[p + 1]]`.
    pub fn increment(&self, p: usize) -> Option<&[f64]> {
        if self.noise.is_empty() {
            None
        } else {
            Some(&self.noise[p * self.dims..(p + 1) * self.dims])
        }
    }

    /// Excitation summary at the window start.
    pub fn origin(&self) -> &ProcessState {
        &self.origin
    }

    /// Excitation summary at the window end.
    pub fn final_process(&self, model: &HawkesModel) -> ProcessState {
        let mut s = self.origin.clone();
        s.advance(model, self.events.events(), self.end_time());
        s
    }

    /// Appends a path that starts where this one ends.
    pub fn append(&mut self, next: &Trajectory) -> Result<()> {
        if next.dims != self.dims {
            return Err(Error::invalid("cannot join trajectories of different dimension"));
        }
        self.events.extend(&next.events)?;
        self.times.extend_from_slice(&next.times[1..]);
        self.kinds.extend_from_slice(&next.kinds[1..]);
        self.states.extend_from_slice(&next.states[self.dims..]);
        self.noise.extend_from_slice(&next.noise);
        Ok(())
    }

    /// CSV rows `time,dim,state` in time order.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time", "dim", "state"])?;
        for p in 0..self.len() {
            let t = format!("{:.16e}", self.times[p]);
            for (i, x) in self.state(p).iter().enumerate() {
                w.write_record([t.as_str(), &i.to_string(), &format!("{x:.16e}")])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Stores every recorded point; the sink behind [`super::simulate_trajectory`].
#[derive(Debug)]
pub(crate) struct TrajectoryRecorder {
    dims: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    kinds: Vec<PointKind>,
    noise: Vec<f64>,
}

impl TrajectoryRecorder {
    pub fn new(dims: usize) -> Self {
        Self {
            dims,
            times: Vec::new(),
            states: Vec::new(),
            kinds: Vec::new(),
            noise: Vec::new(),
        }
    }

    pub fn finish(self, events: EventSequence, origin: ProcessState) -> Trajectory {
        Trajectory {
            dims: self.dims,
            times: self.times,
            states: self.states,
            kinds: self.kinds,
            events,
            noise: self.noise,
            origin,
        }
    }
}

impl PathSink for TrajectoryRecorder {
    fn point(&mut self, time: f64, x: &[f64], kind: PointKind) {
        self.times.push(time);
        self.states.extend_from_slice(x);
        self.kinds.push(kind);
    }

    fn increment(&mut self, dw: &[f64]) {
        self.noise.extend_from_slice(dw);
    }
}
