use serde::{Deserialize, Serialize};

/// Integer membership in K_h = ((h − 2√h)/2, (h − √h)/2).
///
/// With d = h − 2k the condition is √h < d < 2√h, which is tested as
/// d² > h and d² < 4h so no square root is ever rounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KWindow {
    /// Include the endpoints (closed interval).
    pub closed: bool,
}

impl KWindow {
    pub const OPEN: KWindow = KWindow { closed: false };
    pub const CLOSED: KWindow = KWindow { closed: true };

    pub fn contains(&self, h: u64, k: u64) -> bool {
        if 2 * k >= h {
            return false;
        }
        let d = (h - 2 * k) as u128;
        let h = h as u128;
        if self.closed {
            d * d >= h && d * d <= 4 * h
        } else {
            d * d > h && d * d < 4 * h
        }
    }

    /// All integers of the window, ascending.
    pub fn members(&self, h: u64) -> Vec<u64> {
        let lo = h.saturating_sub(2 * ((h as f64).sqrt() as u64 + 2)) / 2;
        (lo..=h / 2).filter(|&k| self.contains(h, k)).collect()
    }

    /// The member closest to the window's midpoint (h − 1.5√h)/2, rounding down on ties.
    pub fn middle(&self, h: u64) -> Option<u64> {
        let target = (h as f64 - 1.5 * (h as f64).sqrt()) / 2.0;
        self.members(h).into_iter().min_by(|a, b| {
            (*a as f64 - target)
                .abs()
                .total_cmp(&(*b as f64 - target).abs())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_square_endpoints() {
        // K_400 = (180, 190)
        assert_eq!(KWindow::OPEN.members(400), (181..=189).collect::<Vec<_>>());
        assert_eq!(
            KWindow::CLOSED.members(400),
            (180..=190).collect::<Vec<_>>()
        );
        assert!(!KWindow::OPEN.contains(400, 191));
        assert_eq!(KWindow::OPEN.middle(400), Some(185));
    }

    #[test]
    fn irrational_endpoints() {
        // K_{2·8} = K_16 = (4, 6): only 5
        assert_eq!(KWindow::OPEN.members(16), vec![5]);
        // K_100 = (40, 45)
        assert_eq!(KWindow::OPEN.members(100), vec![41, 42, 43, 44]);
        // h = 20: (20 − 8.94)/2 = 5.53, (20 − 4.47)/2 = 7.76
        assert_eq!(KWindow::OPEN.members(20), vec![6, 7]);
        assert_eq!(KWindow::CLOSED.members(20), vec![6, 7]);
    }

    #[test]
    fn matches_float_definition_away_from_endpoints() {
        for h in 2..3000u64 {
            let s = (h as f64).sqrt();
            for k in KWindow::OPEN.members(h) {
                let kf = k as f64;
                assert!(kf > (h as f64 - 2.0 * s) / 2.0 - 1e-9 && kf < (h as f64 - s) / 2.0 + 1e-9);
            }
        }
    }
}
