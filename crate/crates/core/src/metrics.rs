//! Per-bucket measurement series.

use crate::types::SimTime;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Bucket {
    pub dropped: u64,
    pub convergence_active: bool,
    pub delay_sum_us: u64,
    pub delivered: u64,
    pub hops_sum: u64,
    pub control_bits: u64,
}

impl Bucket {
    pub fn mean_delay_us(&self) -> Option<f64> {
        (self.delivered > 0).then(|| self.delay_sum_us as f64 / self.delivered as f64)
    }

    pub fn mean_hops(&self) -> Option<f64> {
        (self.delivered > 0).then(|| self.hops_sum as f64 / self.delivered as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricEvent {
    Drop,
    Delivery { delay_us: u64, hops: u64 },
    TableChange,
    ControlBits(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricSeries {
    pub bucket_s: u64,
    pub buckets: Vec<Bucket>,
}

impl MetricSeries {
    /// `ceil(duration / bucket)` empty buckets.
    pub fn new(bucket_s: u64, duration_s: u64) -> Self {
        assert!(bucket_s > 0, "bucket length must be positive");
        MetricSeries {
            bucket_s,
            buckets: vec![Bucket::default(); duration_s.div_ceil(bucket_s) as usize],
        }
    }

    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    /// Start time of bucket `i` in seconds.
    pub fn bucket_start_s(&self, i: usize) -> u64 {
        i as u64 * self.bucket_s
    }

    pub fn index_of(&self, now: SimTime) -> Option<usize> {
        let i = (now.secs() / self.bucket_s) as usize;
        (i < self.buckets.len()).then_some(i)
    }

    /// Events outside the series are ignored.
    pub fn record(&mut self, event: MetricEvent, now: SimTime) {
        let Some(i) = self.index_of(now) else {
            return;
        };
        let b = &mut self.buckets[i];
        match event {
            MetricEvent::Drop => b.dropped += 1,
            MetricEvent::Delivery { delay_us, hops } => {
                b.delivered += 1;
                b.delay_sum_us += delay_us;
                b.hops_sum += hops;
            }
            MetricEvent::TableChange => b.convergence_active = true,
            MetricEvent::ControlBits(bits) => b.control_bits += bits,
        }
    }

    pub fn total_dropped(&self) -> u64 {
        self.buckets.iter().map(|b| b.dropped).sum()
    }

    pub fn total_delivered(&self) -> u64 {
        self.buckets.iter().map(|b| b.delivered).sum()
    }

    pub fn total_control_bits(&self) -> u64 {
        self.buckets.iter().map(|b| b.control_bits).sum()
    }

    pub fn convergence_active_s(&self) -> u64 {
        self.buckets.iter().filter(|b| b.convergence_active).count() as u64 * self.bucket_s
    }

    /// Aggregate of every bucket whose start lies in `[from_s, to_s)`.
    pub fn window(&self, from_s: u64, to_s: u64) -> Bucket {
        let mut acc = Bucket::default();
        for (i, b) in self.buckets.iter().enumerate() {
            let t = self.bucket_start_s(i);
            if t >= from_s && t < to_s {
                acc.dropped += b.dropped;
                acc.convergence_active |= b.convergence_active;
                acc.delay_sum_us += b.delay_sum_us;
                acc.delivered += b.delivered;
                acc.hops_sum += b.hops_sum;
                acc.control_bits += b.control_bits;
            }
        }
        acc
    }

    pub fn total(&self) -> Bucket {
        self.window(0, u64::MAX)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bucket_means() {
        let mut m = MetricSeries::new(1, 3);
        let t = SimTime::from_micros(1_500_000);
        m.record(MetricEvent::Delivery { delay_us: 100, hops: 1 }, t);
        m.record(MetricEvent::Delivery { delay_us: 300, hops: 2 }, t);
        assert_eq!(m.buckets[1].mean_delay_us(), Some(200.0));
        assert_eq!(m.buckets[1].mean_hops(), Some(1.5));
        assert_eq!(m.buckets[0].mean_delay_us(), None);
        assert_eq!(m.buckets[2].mean_hops(), None);
    }

    #[test]
    fn convergence_is_a_square_wave() {
        let mut m = MetricSeries::new(1, 4);
        m.record(MetricEvent::TableChange, SimTime::from_secs(1));
        m.record(MetricEvent::TableChange, SimTime::from_micros(1_999_999));
        m.record(MetricEvent::TableChange, SimTime::from_secs(3));
        let wave: Vec<bool> = m.buckets.iter().map(|b| b.convergence_active).collect();
        assert_eq!(wave, vec![false, true, false, true]);
        assert_eq!(m.convergence_active_s(), 2);
    }

    #[test]
    fn sizes_and_out_of_range() {
        assert_eq!(MetricSeries::new(1, 0).len(), 0);
        assert_eq!(MetricSeries::new(5, 11).len(), 3);
        let mut m = MetricSeries::new(5, 11);
        m.record(MetricEvent::Drop, SimTime::from_secs(14));
        m.record(MetricEvent::Drop, SimTime::from_secs(15));
        assert_eq!(m.buckets[2].dropped, 1);
        assert_eq!(m.total_dropped(), 1);
    }
}
