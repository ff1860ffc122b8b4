//! Time sources. The core crate never reads the system clock itself.

use core::cell::Cell;

/// Monotonic time in seconds from an arbitrary origin.
pub trait Clock {
    fn now(&self) -> f64;
}

/// Always reads zero. Time limits never trigger and measured times are zero.
#[derive(Clone, Copy, Debug, Default)]
pub struct FrozenClock;

impl Clock for FrozenClock {
    fn now(&self) -> f64 {
        0.0
    }
}

/// Advances by a fixed step on every read.
#[derive(Debug, Default)]
pub struct TickClock {
    t: Cell<f64>,
    step: f64,
}

impl TickClock {
    pub fn new(step: f64) -> Self {
        TickClock {
            t: Cell::new(0.0),
            step,
        }
    }
}

impl Clock for TickClock {
    fn now(&self) -> f64 {
        let t = self.t.get();
        self.t.set(t + self.step);
        t
    }
}

impl<C: Clock + ?Sized> Clock for &C {
    fn now(&self) -> f64 {
        (**self).now()
    }
}
