use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub dim: usize,
}

/// Realization of an `M`-dimensional counting process on a window.
///
/// Events are stored merged in time order. Each dimension's times are
/// strictly increasing and every time lies in `[start, end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSequence {
    dims: usize,
    start: f64,
    end: f64,
    events: Vec<Event>,
}

impl EventSequence {
    pub fn empty(dims: usize, start: f64, end: f64) -> Self {
        Self {
            dims,
            start,
            end,
            events: Vec::new(),
        }
    }

    pub fn new(dims: usize, start: f64, end: f64, events: Vec<Event>) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && start <= end) {
            return Err(Error::invalid(format!("bad event window [{start}, {end}]")));
        }
        let mut last = vec![f64::NEG_INFINITY; dims];
        let mut prev = f64::NEG_INFINITY;
        for e in &events {
            if e.dim >= dims {
                return Err(Error::invalid(format!("event dimension {} >= {dims}", e.dim)));
            }
            if !(e.time >= start && e.time <= end) {
                return Err(Error::invalid(format!(
                    "event time {} outside window [{start}, {end}]",
                    e.time
                )));
            }
            if e.time < prev {
                return Err(Error::invalid("events are not sorted by time"));
            }
            if e.time <= last[e.dim] {
                return Err(Error::invalid(format!(
                    "times of dimension {} are not strictly increasing at {}",
                    e.dim, e.time
                )));
            }
            last[e.dim] = e.time;
            prev = e.time;
        }
        Ok(Self {
            dims,
            start,
            end,
            events,
        })
    }

    /// Builds a sequence from per-dimension time lists.
    pub fn from_times(per_dim: &[Vec<f64>], start: f64, end: f64) -> Result<Self> {
        let mut events: Vec<Event> = per_dim
            .iter()
            .enumerate()
            .flat_map(|(dim, ts)| ts.iter().map(move |&time| Event { time, dim }))
            .collect();
        events.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.dim.cmp(&b.dim)));
        Self::new(per_dim.len(), start, end, events)
    }

    /// Trusted constructor for samplers that produce sorted in-window events.
    pub(crate) fn from_sorted(dims: usize, start: f64, end: f64, events: Vec<Event>) -> Self {
        debug_assert!(events.windows(2).all(|w| w[0].time <= w[1].time));
        Self {
            dims,
            start,
            end,
            events,
        }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Event> {
        self.events.iter()
    }

    pub fn times(&self, dim: usize) -> impl Iterator<Item = f64> + '_ {
        self.events.iter().filter(move |e| e.dim == dim).map(|e| e.time)
    }

    pub fn count(&self, dim: usize) -> usize {
        self.events.iter().filter(|e| e.dim == dim).count()
    }

    /// Events with `a <= time < b`.
    pub fn between(&self, a: f64, b: f64) -> &[Event] {
        let lo = self.events.partition_point(|e| e.time < a);
        let hi = self.events.partition_point(|e| e.time < b);
        &self.events[lo..hi.max(lo)]
    }

    /// Appends a sequence that starts where this one ends.
    pub fn extend(&mut self, next: &EventSequence) -> Result<()> {
        if next.dims != self.dims {
            return Err(Error::invalid("cannot join event sequences of different dimension"));
        }
        if (next.start - self.end).abs() > 1e-9 * self.end.abs().max(1.0) {
            return Err(Error::invalid(format!(
                "event windows are not contiguous: {} vs {}",
                self.end, next.start
            )));
        }
        self.events.extend_from_slice(&next.events);
        self.end = next.end;
        Ok(())
    }

    /// CSV with a `dimension,time` header, rows in time order, times in
    /// lossless scientific notation.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["dimension", "time"])?;
        for e in &self.events {
            w.write_record([e.dim.to_string(), format!("{:.16e}", e.time)])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Reads a `dimension,time` CSV. The dimension count defaults to the
    /// largest index + 1 and the window to `[0, last event]`.
    pub fn read_csv<R: Read>(reader: R, dims: Option<usize>, window: Option<(f64, f64)>) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut events = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse_err = |what: &str| Error::invalid(format!("events csv row {}: bad {what}", line + 1));
            let dim: usize = rec
                .get(0)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| parse_err("dimension"))?;
            let time: f64 = rec
                .get(1)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| parse_err("time"))?;
            events.push(Event { time, dim });
        }
        events.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.dim.cmp(&b.dim)));
        let dims = dims.unwrap_or_else(|| events.iter().map(|e| e.dim + 1).max().unwrap_or(1));
        let (start, end) = window.unwrap_or_else(|| (0.0, events.last().map_or(0.0, |e| e.time)));
        Self::new(dims, start, end, events)
    }

    pub fn load_csv(path: &Path, dims: Option<usize>, window: Option<(f64, f64)>) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f), dims, window)
    }
}
