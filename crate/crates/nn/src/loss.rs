use crate::{Error, Result, Tensor};

pub const DICE_SMOOTH: f64 = 1e-5;

const FLUSH: f32 = 1e-30;

#[derive(Clone, Debug)]
pub struct LossValue {
    pub loss: f64,
    pub dice_term: f64,
    pub bce_term: f64,
    /// d loss / d logits.
    pub grad: Tensor,
}

/// Weighted soft-Dice plus binary cross-entropy on sigmoid(logits). The Dice
/// term is `1 - mean` over every `(sample, channel)` pair; cross-entropy is
/// averaged over all elements. `logits` and `target` are `(b, c, ...)`.
pub fn dice_bce_loss(logits: &Tensor, target: &Tensor, w_dice: f64, w_bce: f64) -> Result<LossValue> {
    if logits.shape() != target.shape() || logits.shape().len() < 2 {
        return Err(Error::shape("dice_bce_loss", logits.shape(), target.shape()));
    }
    let pairs = logits.shape()[0] * logits.shape()[1];
    let inner = logits.len() / pairs;
    let total = logits.len() as f64;
    let mut grad = vec![0.0f32; logits.len()];
    let (mut dice_sum, mut bce_sum) = (0.0f64, 0.0f64);
    let mut p = vec![0.0f32; inner];
    for k in 0..pairs {
        let xs = &logits.data()[k * inner..(k + 1) * inner];
        let ts = &target.data()[k * inner..(k + 1) * inner];
        let (mut inter, mut sum) = (0.0f64, 0.0f64);
        let (mut inter32, mut sum32, mut bce32) = (0.0f32, 0.0f32, 0.0f32);
        for (n, ((pi, &x), &t)) in p.iter_mut().zip(xs).zip(ts).enumerate() {
            let e = (-x.abs()).exp();
            *pi = if x >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
            inter32 += *pi * t;
            sum32 += *pi + t;
            bce32 += x.max(0.0) - x * t + e.ln_1p();
            // Flush partial sums to f64 regularly to bound rounding error.
            if n % 256 == 255 {
                inter += inter32 as f64;
                sum += sum32 as f64;
                bce_sum += bce32 as f64;
                (inter32, sum32, bce32) = (0.0, 0.0, 0.0);
            }
        }
        inter += inter32 as f64;
        sum += sum32 as f64;
        bce_sum += bce32 as f64;
        let denom = sum + DICE_SMOOTH;
        let num = 2.0 * inter + DICE_SMOOTH;
        dice_sum += num / denom;
        let gs = &mut grad[k * inner..(k + 1) * inner];
        // d loss / d x = a * t * p(1-p) + b * p(1-p) + c * (p - t)
        let a = (-w_dice * 2.0 / (denom * pairs as f64)) as f32;
        let b = (w_dice * num / (denom * denom * pairs as f64)) as f32;
        let c = (w_bce / total) as f32;
        for ((g, &pi), &t) in gs.iter_mut().zip(&p).zip(ts) {
            let s = pi * (1.0 - pi);
            let v = (a * t + b) * s + c * (pi - t);
            // Subnormal gradients are numerically zero but slow every
            // matrix product they reach downstream.
            *g = if v.abs() < FLUSH { 0.0 } else { v };
        }
    }
    let dice_term = 1.0 - dice_sum / pairs as f64;
    let bce_term = bce_sum / total;
    Ok(LossValue {
        loss: w_dice * dice_term + w_bce * bce_term,
        dice_term,
        bce_term,
        grad: Tensor::new(logits.shape(), grad)?,
    })
}
