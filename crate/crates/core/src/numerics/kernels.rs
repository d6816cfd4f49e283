//! Plain slice kernels shared by the tape ops and by code that runs outside
//! a tape (CBOW training, metrics). Every reduction runs left to right so
//! results are bitwise reproducible.

/// `a[m×k] · b[k×p]`
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, p: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * p];
    for i in 0..m {
        let row = &mut out[i * p..(i + 1) * p];
        for r in 0..k {
            let av = a[i * k + r];
            if av == 0.0 {
                continue;
            }
            let brow = &b[r * p..(r + 1) * p];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `a[m×k] · b[p×k]ᵀ`
pub fn matmul_nt(a: &[f64], b: &[f64], m: usize, k: usize, p: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * p];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..p {
            out[i * p + j] = dot(arow, &b[j * k..(j + 1) * k]);
        }
    }
    out
}

/// `a[m×k]ᵀ · b[m×p]`, giving `k×p`.
pub fn matmul_tn(a: &[f64], b: &[f64], m: usize, k: usize, p: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * p];
    for i in 0..m {
        let brow = &b[i * p..(i + 1) * p];
        for r in 0..k {
            let av = a[i * k + r];
            if av == 0.0 {
                continue;
            }
            let row = &mut out[r * p..(r + 1) * p];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Logistic function, evaluated on the branch that cannot overflow.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Probability clamp used by every cross-entropy in the crate.
pub const PROB_EPS: f64 = 1e-12;

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// `-Σ [y log p + (1-y) log(1-p)]` with `p` clamped to `[ε, 1-ε]`.
pub fn bce_sum(targets: &[f64], probs: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&y, &p) in targets.iter().zip(probs) {
        let p = clamp_prob(p);
        total -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    total
}
