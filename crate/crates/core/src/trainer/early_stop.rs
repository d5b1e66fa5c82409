#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Tracker state after one validation loss has been observed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarlyStopUpdate {
    pub decision: StopDecision,
    pub best_loss: f64,
    pub stale: usize,
    pub improved: bool,
}

/// Strict-improvement patience rule: equal losses count as stale epochs,
/// and training stops once `stale == patience`.
pub fn early_stop_update(best_loss: f64, stale: usize, new_loss: f64, patience: usize) -> EarlyStopUpdate {
    let improved = new_loss < best_loss;
    let (best_loss, stale) = if improved {
        (new_loss, 0)
    } else {
        (best_loss, stale + 1)
    };
    EarlyStopUpdate {
        decision: if stale >= patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        },
        best_loss,
        stale,
        improved,
    }
}

/// Patience tracker that keeps a snapshot of the best model seen so far.
#[derive(Debug, Clone)]
pub struct EarlyStopping<T> {
    patience: usize,
    best_loss: f64,
    best_epoch: Option<usize>,
    stale: usize,
    snapshot: Option<T>,
}

impl<T> EarlyStopping<T> {
    pub fn new(patience: usize) -> Self {
        assert!(patience >= 1, "patience must be at least 1");
        Self {
            patience,
            best_loss: f64::INFINITY,
            best_epoch: None,
            stale: 0,
            snapshot: None,
        }
    }

    /// Records `epoch`'s validation loss; `snapshot` is only invoked on
    /// improvement.
    pub fn observe(&mut self, epoch: usize, val_loss: f64, snapshot: impl FnOnce() -> T) -> StopDecision {
        let u = early_stop_update(self.best_loss, self.stale, val_loss, self.patience);
        if u.improved {
            self.snapshot = Some(snapshot());
            self.best_epoch = Some(epoch);
        }
        self.best_loss = u.best_loss;
        self.stale = u.stale;
        u.decision
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }

    pub fn stale(&self) -> usize {
        self.stale
    }

    pub fn into_best(self) -> Option<T> {
        self.snapshot
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stops_after_patience_and_keeps_best() {
        let losses = [1.0, 0.9, 0.91, 0.92, 0.93, 0.94, 0.95];
        let mut es = EarlyStopping::new(5);
        let mut stopped_at = None;
        for (i, &l) in losses.iter().enumerate() {
            let epoch = i + 1;
            if es.observe(epoch, l, || epoch) == StopDecision::Stop {
                stopped_at = Some(epoch);
                break;
            }
        }
        assert_eq!(stopped_at, Some(7));
        assert_eq!(es.best_epoch(), Some(2));
        assert_eq!(es.best_loss(), 0.9);
        assert_eq!(es.into_best(), Some(2));
    }

    #[test]
    fn decreasing_losses_never_stop() {
        let mut es = EarlyStopping::new(1);
        for e in 0..100 {
            assert_eq!(es.observe(e, 10.0 - e as f64 * 0.01, || e), StopDecision::Continue);
        }
    }

    #[test]
    fn ties_are_not_improvements() {
        let u = early_stop_update(0.5, 0, 0.5, 2);
        assert!(!u.improved);
        assert_eq!(u.stale, 1);
        let u = early_stop_update(0.5, u.stale, 0.5, 2);
        assert_eq!(u.decision, StopDecision::Stop);
    }

    #[test]
    fn nan_is_not_an_improvement() {
        assert!(!early_stop_update(1.0, 0, f64::NAN, 3).improved);
    }
}
