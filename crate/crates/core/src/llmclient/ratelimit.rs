use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use super::clock::Clock;

/// Sliding-window limiter: at most `limit` grants in any window of length
/// `window`. Shared by all workers of a run.
#[derive(Debug)]
pub struct RateLimiter {
    limit: usize,
    window: Duration,
    granted: Mutex<VecDeque<Duration>>,
}

impl RateLimiter {
    pub fn new(limit: u32, window: Duration) -> RateLimiter {
        RateLimiter {
            limit: limit.max(1) as usize,
            window,
            granted: Mutex::new(VecDeque::new()),
        }
    }

    pub fn per_minute(limit: u32) -> RateLimiter {
        RateLimiter::new(limit, Duration::from_secs(60))
    }

    /// Blocks on `clock` until a request may be sent; returns the grant time.
    pub fn acquire(&self, clock: &dyn Clock) -> Duration {
        loop {
            let wait = {
                let mut log = self.granted.lock().unwrap();
                let now = clock.now();
                while log.front().is_some_and(|t| *t + self.window <= now) {
                    log.pop_front();
                }
                if log.len() < self.limit {
                    log.push_back(now);
                    return now;
                }
                *log.front().expect("log is full") + self.window - now
            };
            clock.sleep(wait);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llmclient::clock::VirtualClock;

    #[test]
    fn waits_for_the_window() {
        let clock = VirtualClock::new();
        let rl = RateLimiter::new(2, Duration::from_secs(60));
        assert_eq!(rl.acquire(&clock), Duration::ZERO);
        clock.advance(Duration::from_secs(10));
        assert_eq!(rl.acquire(&clock), Duration::from_secs(10));
        assert_eq!(rl.acquire(&clock), Duration::from_secs(60));
        assert_eq!(rl.acquire(&clock), Duration::from_secs(70));
    }
}
