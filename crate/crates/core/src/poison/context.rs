use alloc::vec::Vec;
use core::ops::{Deref, DerefMut};

use crate::trace::OperatorEvent;

/// Destination for intercepted operator events.
pub trait EventSink {
    fn record(&mut self, event: OperatorEvent);
}

impl EventSink for Vec<OperatorEvent> {
    fn record(&mut self, event: OperatorEvent) {
        self.push(event);
    }
}

/// Drops every event.
#[derive(Clone, Copy, Debug, Default)]
pub struct Discard;

impl EventSink for Discard {
    fn record(&mut self, _event: OperatorEvent) {}
}

impl<S: EventSink + ?Sized> EventSink for &mut S {
    fn record(&mut self, event: OperatorEvent) {
        (**self).record(event);
    }
}

/// Evaluation state shared by every intercepted operation of one run.
///
/// Not shareable between threads of execution; run independent contexts
/// side by side instead.
#[derive(Debug, Default)]
pub struct EvalContext<S = Vec<OperatorEvent>> {
    sink: S,
    suppression_depth: u32,
    next_step: u64,
}

impl<S: EventSink> EvalContext<S> {
    pub fn new(sink: S) -> Self {
        EvalContext {
            sink,
            suppression_depth: 0,
            next_step: 0,
        }
    }

    pub fn is_suppressed(&self) -> bool {
        self.suppression_depth > 0
    }

    pub fn suppression_depth(&self) -> u32 {
        self.suppression_depth
    }

    /// Number of operations intercepted so far; also the step index of the next one.
    pub fn steps(&self) -> u64 {
        self.next_step
    }

    pub fn sink(&self) -> &S {
        &self.sink
    }

    pub fn sink_mut(&mut self) -> &mut S {
        &mut self.sink
    }

    pub fn into_sink(self) -> S {
        self.sink
    }

    /// Enters a monitoring region; poisoning stays disabled until the guard drops.
    pub fn suppress(&mut self) -> Suppressed<'_, S> {
        self.suppression_depth += 1;
        Suppressed { ctx: self }
    }

    /// Runs `body` with poisoning disabled. The depth is restored on every exit path.
    pub fn with_suppression<R>(&mut self, body: impl FnOnce(&mut Self) -> R) -> R {
        let mut guard = self.suppress();
        body(&mut guard)
    }

    pub(crate) fn emit(&mut self, event: OperatorEvent) {
        self.sink.record(event);
    }

    pub(crate) fn take_step(&mut self) -> u64 {
        let step = self.next_step;
        self.next_step += 1;
        step
    }
}

/// Guard returned by [`EvalContext::suppress`].
pub struct Suppressed<'a, S: EventSink> {
    ctx: &'a mut EvalContext<S>,
}

impl<S: EventSink> Deref for Suppressed<'_, S> {
    type Target = EvalContext<S>;

    fn deref(&self) -> &Self::Target {
        self.ctx
    }
}

impl<S: EventSink> DerefMut for Suppressed<'_, S> {
    fn deref_mut(&mut self) -> &mut Self::Target {
        self.ctx
    }
}

impl<S: EventSink> Drop for Suppressed<'_, S> {
    fn drop(&mut self) {
        self.ctx.suppression_depth -= 1;
    }
}
