//! Time sources for deadlines and emission timestamps.

use core::cell::Cell;

/// Seconds elapsed since some fixed origin.
pub trait Clock {
    fn now(&self) -> f64;
}

impl<C: Clock + ?Sized> Clock for &C {
    fn now(&self) -> f64 {
        (**self).now()
    }
}

impl<C: Clock + ?Sized> Clock for alloc::boxed::Box<C> {
    fn now(&self) -> f64 {
        (**self).now()
    }
}

/// A virtual clock that advances by a fixed tick every time it is read.
///
/// Timestamps then depend only on the sequence of operations, which makes
/// planning runs reproducible bit for bit.
#[derive(Debug)]
pub struct TickClock {
    tick: f64,
    reads: Cell<u64>,
}

impl TickClock {
    pub fn new(tick: f64) -> Self {
        Self {
            tick,
            reads: Cell::new(0),
        }
    }
}

impl Default for TickClock {
    fn default() -> Self {
        Self::new(1e-3)
    }
}

impl Clock for TickClock {
    fn now(&self) -> f64 {
        let r = self.reads.get();
        self.reads.set(r + 1);
        r as f64 * self.tick
    }
}

/// A clock that always reads zero; deadlines never expire.
#[derive(Debug, Default, Clone, Copy)]
pub struct FrozenClock;

impl Clock for FrozenClock {
    fn now(&self) -> f64 {
        0.0
    }
}
