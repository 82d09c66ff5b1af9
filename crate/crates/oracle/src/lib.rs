//! Brute-force reference computations for the test suites.
//!
//! Everything here is written as the most direct transcription of the
//! defining formula: explicit loops, no separable passes, no log-sum-exp
//! shifting, no shared helpers with `dar-core`. Slow on purpose.

pub type Rows = Vec<Vec<f64>>;

/// Direct 2-D Gaussian weights, normalized by their own 2-D sum using
/// compensated summation. Indexed `[dy + radius][dx + radius]`.
pub fn gaussian_2d(sigma: f64, radius: usize) -> Rows {
    let r = radius as i64;
    let mut w = vec![vec![0.0; 2 * radius + 1]; 2 * radius + 1];
    let mut raw = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            let v = (-((dy * dy + dx * dx) as f64) / (2.0 * sigma * sigma)).exp();
            w[(dy + r) as usize][(dx + r) as usize] = v;
            raw.push(v);
        }
    }
    let total = neumaier_sum(&raw);
    for row in &mut w {
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    w
}

pub fn neumaier_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// O(n²k²) direct convolution of a {0,1} mask. `replicate` clamps
/// out-of-range reads to the nearest edge pixel, otherwise they read 0.
pub fn naive_blur(
    mask: &[bool],
    width: usize,
    height: usize,
    sigma: f64,
    radius: usize,
    replicate: bool,
) -> Vec<f64> {
    let w = gaussian_2d(sigma, radius);
    let r = radius as i64;
    let mut out = vec![0.0; width * height];
    for y in 0..height as i64 {
        for x in 0..width as i64 {
            let mut acc = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (mut yy, mut xx) = (y + dy, x + dx);
                    let inside = yy >= 0 && yy < height as i64 && xx >= 0 && xx < width as i64;
                    if !inside {
                        if !replicate {
                            continue;
                        }
                        yy = yy.clamp(0, height as i64 - 1);
                        xx = xx.clamp(0, width as i64 - 1);
                    }
                    if mask[(yy as usize) * width + xx as usize] {
                        acc += w[(dy + r) as usize][(dx + r) as usize];
                    }
                }
            }
            out[(y as usize) * width + x as usize] = acc;
        }
    }
    out
}

/// Full DaR pipeline on raw slices with the naive blur, zero padding.
/// Returns (y' mask, surviving fp, surviving fn).
pub fn naive_dar_survivors(
    pred: &[bool],
    gt: &[bool],
    width: usize,
    height: usize,
    sigma: f64,
    radius: usize,
    th: f64,
) -> (Vec<bool>, usize, usize) {
    let fp: Vec<bool> = pred.iter().zip(gt).map(|(&p, &g)| p && !g).collect();
    let fneg: Vec<bool> = pred.iter().zip(gt).map(|(&p, &g)| !p && g).collect();
    let bfp = naive_blur(&fp, width, height, sigma, radius, false);
    let bfn = naive_blur(&fneg, width, height, sigma, radius, false);
    let mut y_prime = vec![false; width * height];
    let (mut sfp, mut sfn) = (0, 0);
    for i in 0..width * height {
        let a = bfp[i] > th;
        let b = bfn[i] > th;
        sfp += a as usize;
        sfn += b as usize;
        y_prime[i] = a || b;
    }
    (y_prime, sfp, sfn)
}

pub fn naive_dar_score(
    pred: &[bool],
    gt: &[bool],
    width: usize,
    height: usize,
    sigma: f64,
    radius: usize,
    th: f64,
) -> f64 {
    let (y_prime, _, _) = naive_dar_survivors(pred, gt, width, height, sigma, radius, th);
    let ones = y_prime.iter().filter(|&&b| b).count() as f64;
    let gt_ones = gt.iter().filter(|&&b| b).count() as f64;
    1.0 - ones / gt_ones
}

/// Largest stripe width whose blurred 1-D profile never exceeds `th`.
///
/// A stripe infinitely long in one direction reduces the 2-D blur to a 1-D
/// convolution of a box profile with the directly evaluated, normalized
/// 1-D Gaussian. The profile is padded so the stripe never touches a border.
pub fn stripe_cutoff(sigma: f64, radius: usize, th: f64, max_width: usize) -> usize {
    let r = radius as i64;
    let raw: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total = neumaier_sum(&raw);
    let g: Vec<f64> = raw.iter().map(|v| v / total).collect();

    let mut cutoff = 0;
    for width in 1..=max_width {
        let len = width + 4 * radius;
        let profile: Vec<bool> = (0..len)
            .map(|i| i >= 2 * radius && i < 2 * radius + width)
            .collect();
        let mut peak = 0.0f64;
        for x in 0..len as i64 {
            let mut acc = 0.0;
            for k in -r..=r {
                let xx = x + k;
                if xx >= 0 && (xx as usize) < len && profile[xx as usize] {
                    acc += g[(k + r) as usize];
                }
            }
            peak = peak.max(acc);
        }
        if peak > th {
            break;
        }
        cutoff = width;
    }
    cutoff
}

/// Per-class (tp, fp, fn) by scanning every pixel once per class.
pub fn confusion_brute(
    pred: &[u32],
    gt: &[u32],
    num_classes: usize,
) -> (Vec<u64>, Vec<u64>, Vec<u64>) {
    let mut tp = vec![0u64; num_classes];
    let mut fp = vec![0u64; num_classes];
    let mut fneg = vec![0u64; num_classes];
    for c in 0..num_classes as u32 {
        for i in 0..pred.len() {
            let p = pred[i] == c;
            let g = gt[i] == c;
            if p && g {
                tp[c as usize] += 1;
            } else if p {
                fp[c as usize] += 1;
            } else if g {
                fneg[c as usize] += 1;
            }
        }
    }
    (tp, fp, fneg)
}

pub fn matmul(a: &Rows, b: &Rows) -> Rows {
    let n = a.len();
    let m = b[0].len();
    let inner = b.len();
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            let mut acc = 0.0;
            for k in 0..inner {
                acc += a[i][k] * b[k][j];
            }
            out[i][j] = acc;
        }
    }
    out
}

/// Scaled dot-product attention for one head, element by element.
pub fn spda(q: &Rows, k: &Rows, v: &Rows, wq: &Rows, wk: &Rows, wv: &Rows) -> Rows {
    let qp = matmul(q, wq);
    let kp = matmul(k, wk);
    let vp = matmul(v, wv);
    let dk = wq[0].len() as f64;
    let mut out = vec![vec![0.0; vp[0].len()]; qp.len()];
    for i in 0..qp.len() {
        let mut e = vec![0.0; kp.len()];
        let mut denom = 0.0;
        for j in 0..kp.len() {
            let mut s = 0.0;
            for c in 0..qp[i].len() {
                s += qp[i][c] * kp[j][c];
            }
            e[j] = (s / dk.sqrt()).exp();
            denom += e[j];
        }
        for j in 0..kp.len() {
            let a = e[j] / denom;
            for c in 0..vp[j].len() {
                out[i][c] += a * vp[j][c];
            }
        }
    }
    out
}

/// One projection set (W_Q, W_K, W_V) per head.
pub struct OracleHead {
    pub wq: Rows,
    pub wk: Rows,
    pub wv: Rows,
}

/// Materializes each head separately, concatenates columns, multiplies by W_o.
pub fn multi_head(q: &Rows, k: &Rows, v: &Rows, heads: &[OracleHead], wo: &Rows) -> Rows {
    let outs: Vec<Rows> = heads
        .iter()
        .map(|h| spda(q, k, v, &h.wq, &h.wk, &h.wv))
        .collect();
    let concat: Rows = (0..q.len())
        .map(|i| outs.iter().flat_map(|o| o[i].iter().copied()).collect())
        .collect();
    matmul(&concat, wo)
}

/// Mean of −ln(exp(z_gt) / Σ exp(z)) over positions, unshifted.
pub fn cross_entropy(logits: &[Vec<f64>], gt: &[u32]) -> f64 {
    let mut total = 0.0;
    for (z, &g) in logits.iter().zip(gt) {
        let denom: f64 = z.iter().map(|v| v.exp()).sum();
        total += -(z[g as usize].exp() / denom).ln();
    }
    total / logits.len() as f64
}

/// Small deterministic generator for test fixtures (xorshift64*).
pub struct FixtureRng(u64);

impl FixtureRng {
    pub fn new(seed: u64) -> Self {
        Self(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1)
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }

    pub fn bool(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    pub fn rows(&mut self, n: usize, m: usize) -> Rows {
        (0..n)
            .map(|_| (0..m).map(|_| self.uniform(-1.0, 1.0)).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_sums_to_one() {
        let w = gaussian_2d(3.0, 9);
        let flat: Vec<f64> = w.iter().flatten().copied().collect();
        assert!((neumaier_sum(&flat) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn stripe_cutoff_matches_offline_sweep() {
        // Offline 40-digit sweep gives 18 for sigma 3, radius 9, th 0.999.
        assert_eq!(stripe_cutoff(3.0, 9, 0.999, 40), 18);
    }
}
