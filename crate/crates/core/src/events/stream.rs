use crate::error::{Error, Result};

/// Sign of a brightness change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    #[inline]
    pub fn sign(self) -> i8 {
        match self {
            Polarity::Positive => 1,
            Polarity::Negative => -1,
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        f64::from(self.sign())
    }

    pub fn flipped(self) -> Self {
        match self {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
        }
    }

    /// Accepts `±1`; `0` is read as negative, matching the common `{0, 1}`
    /// polarity encoding.
    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            1 => Some(Polarity::Positive),
            -1 | 0 => Some(Polarity::Negative),
            _ => None,
        }
    }
}

/// A single brightness-change event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    /// Microseconds.
    pub t: u64,
    pub x: u16,
    pub y: u16,
    pub polarity: Polarity,
}

impl Event {
    pub fn new(t: u64, x: u16, y: u16, polarity: Polarity) -> Self {
        Self { t, x, y, polarity }
    }
}

/// Time-ordered events from a `width×height` sensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    width: u32,
    height: u32,
    events: Vec<Event>,
}

impl EventStream {
    /// Validates sortedness and sensor bounds, naming the first offending
    /// record index on failure.
    pub fn new(width: u32, height: u32, events: Vec<Event>) -> Result<Self> {
        if width == 0 || height == 0 || width > u32::from(u16::MAX) + 1 || height > u32::from(u16::MAX) + 1 {
            return Err(Error::invalid(format!("unsupported sensor size {width}x{height}")));
        }
        for (i, e) in events.iter().enumerate() {
            if u32::from(e.x) >= width || u32::from(e.y) >= height {
                return Err(Error::invalid(format!(
                    "event {i} at ({}, {}) outside {width}x{height} sensor",
                    e.x, e.y
                )));
            }
            if i > 0 && events[i - 1].t > e.t {
                return Err(Error::invalid(format!(
                    "event {i} at t={} precedes previous event at t={}",
                    e.t,
                    events[i - 1].t
                )));
            }
        }
        Ok(Self { width, height, events })
    }

    pub fn empty(width: u32, height: u32) -> Self {
        Self { width, height, events: Vec::new() }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// `(height, width)` as array dimensions.
    pub fn dims(&self) -> (usize, usize) {
        (self.height as usize, self.width as usize)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    /// Events with `t_a <= t <= t_b`.
    pub fn window_closed(&self, t_a: u64, t_b: u64) -> &[Event] {
        let lo = self.events.partition_point(|e| e.t < t_a);
        let hi = self.events.partition_point(|e| e.t <= t_b);
        &self.events[lo..hi.max(lo)]
    }

    /// Events with `t_a < t <= t_b`. Consecutive windows sharing an endpoint
    /// partition the stream.
    pub fn window(&self, t_a: u64, t_b: u64) -> &[Event] {
        let lo = self.events.partition_point(|e| e.t <= t_a);
        let hi = self.events.partition_point(|e| e.t <= t_b);
        &self.events[lo..hi.max(lo)]
    }

    /// Time-reverses the events of `(t_a, t_b]` about the window: each
    /// event moves to `t_a + t_b - t` with flipped polarity. Events from
    /// the reversed stream in `(t_a, t']` are then exactly the forward
    /// events in `[t_a + t_b - t', t_b)`, negated.
    pub fn reversed_window(&self, t_a: u64, t_b: u64) -> EventStream {
        let events = self
            .window(t_a, t_b)
            .iter()
            .rev()
            .map(|e| Event { t: t_a + t_b - e.t, polarity: e.polarity.flipped(), ..*e })
            .collect();
        EventStream { width: self.width, height: self.height, events }
    }

    /// Spatially translates every event, dropping those leaving the sensor.
    pub fn shifted(&self, dx: i32, dy: i32) -> EventStream {
        let events = self
            .events
            .iter()
            .filter_map(|e| {
                let x = i64::from(e.x) + i64::from(dx);
                let y = i64::from(e.y) + i64::from(dy);
                if x < 0 || y < 0 || x >= i64::from(self.width) || y >= i64::from(self.height) {
                    None
                } else {
                    Some(Event { x: x as u16, y: y as u16, ..*e })
                }
            })
            .collect();
        EventStream { width: self.width, height: self.height, events }
    }
}
