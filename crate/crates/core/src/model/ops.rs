//! Forward and backward kernels over `(h, w, c)` feature maps.

use ndarray::{Array1, Array2, Array3, ArrayView1, Axis};

use super::arch::{ConvSpec, LrnSpec, PoolSpec};

/// Unfolds receptive fields into rows; column index is `(ky·k + kx)·c_in + c`.
pub(crate) fn im2col(input: &Array3<f64>, conv: &ConvSpec, oh: usize, ow: usize) -> Array2<f64> {
    let (h, w, c) = input.dim();
    let k = conv.kernel;
    let src = input.as_slice().expect("standard layout");
    let kc = k * k * c;
    let mut cols = Array2::zeros((oh * ow, kc));
    let dst = cols.as_slice_mut().expect("fresh array");
    let (pt, pl) = (conv.pad[0] as isize, conv.pad[2] as isize);
    for oy in 0..oh {
        for ox in 0..ow {
            let row = &mut dst[(oy * ow + ox) * kc..(oy * ow + ox + 1) * kc];
            let y0 = (oy * conv.stride) as isize - pt;
            let x0 = (ox * conv.stride) as isize - pl;
            for ky in 0..k {
                let y = y0 + ky as isize;
                if y < 0 || y >= h as isize {
                    continue;
                }
                for kx in 0..k {
                    let x = x0 + kx as isize;
                    if x < 0 || x >= w as isize {
                        continue;
                    }
                    let s = (y as usize * w + x as usize) * c;
                    let d = (ky * k + kx) * c;
                    row[d..d + c].copy_from_slice(&src[s..s + c]);
                }
            }
        }
    }
    cols
}

/// Scatters column gradients back onto the input map (adjoint of [`im2col`]).
pub(crate) fn col2im(dcols: &Array2<f64>, conv: &ConvSpec, input_dim: (usize, usize, usize), oh: usize, ow: usize) -> Array3<f64> {
    let (h, w, c) = input_dim;
    let k = conv.kernel;
    let kc = k * k * c;
    let src = dcols.as_slice().expect("standard layout");
    let mut dx = Array3::zeros((h, w, c));
    let dst = dx.as_slice_mut().expect("fresh array");
    let (pt, pl) = (conv.pad[0] as isize, conv.pad[2] as isize);
    for oy in 0..oh {
        for ox in 0..ow {
            let row = &src[(oy * ow + ox) * kc..(oy * ow + ox + 1) * kc];
            let y0 = (oy * conv.stride) as isize - pt;
            let x0 = (ox * conv.stride) as isize - pl;
            for ky in 0..k {
                let y = y0 + ky as isize;
                if y < 0 || y >= h as isize {
                    continue;
                }
                for kx in 0..k {
                    let x = x0 + kx as isize;
                    if x < 0 || x >= w as isize {
                        continue;
                    }
                    let d = (y as usize * w + x as usize) * c;
                    let s = (ky * k + kx) * c;
                    for (o, g) in dst[d..d + c].iter_mut().zip(&row[s..s + c]) {
                        *o += g;
                    }
                }
            }
        }
    }
    dx
}

pub(crate) fn conv_forward(
    input: &Array3<f64>,
    conv: &ConvSpec,
    weight: &Array2<f64>,
    bias: &Array1<f64>,
    out_dim: (usize, usize, usize),
) -> (Array3<f64>, Array2<f64>) {
    let (oh, ow, oc) = out_dim;
    let cols = im2col(input, conv, oh, ow);
    let mut y = cols.dot(&weight.t());
    y += bias;
    let y = y.into_shape_with_order((oh, ow, oc)).expect("conv output shape");
    (y, cols)
}

/// Accumulates weight/bias gradients and returns the input gradient.
pub(crate) fn conv_backward(
    dy: &Array3<f64>,
    cols: &Array2<f64>,
    conv: &ConvSpec,
    weight: &Array2<f64>,
    input_dim: (usize, usize, usize),
    dweight: &mut Array2<f64>,
    dbias: &mut Array1<f64>,
    need_input_grad: bool,
) -> Option<Array3<f64>> {
    let (oh, ow, oc) = dy.dim();
    let dy2 = dy.view().into_shape_with_order((oh * ow, oc)).expect("standard layout");
    ndarray::linalg::general_mat_mul(1.0, &dy2.t(), cols, 1.0, dweight);
    *dbias += &dy2.sum_axis(Axis(0));
    if !need_input_grad {
        return None;
    }
    let dcols = dy2.dot(weight);
    Some(col2im(&dcols, conv, input_dim, oh, ow))
}

pub(crate) fn fc_forward(input: &Array3<f64>, weight: &Array2<f64>, bias: &Array1<f64>) -> Array3<f64> {
    let x = ArrayView1::from(input.as_slice().expect("standard layout"));
    let y = weight.dot(&x) + bias;
    let n = y.len();
    y.into_shape_with_order((1, 1, n)).expect("fc output shape")
}

pub(crate) fn fc_backward(
    dy: &Array3<f64>,
    input: &Array3<f64>,
    weight: &Array2<f64>,
    dweight: &mut Array2<f64>,
    dbias: &mut Array1<f64>,
    need_input_grad: bool,
) -> Option<Array3<f64>> {
    let g = ArrayView1::from(dy.as_slice().expect("standard layout"));
    let x = ArrayView1::from(input.as_slice().expect("standard layout"));
    for (mut row, gi) in dweight.rows_mut().into_iter().zip(g.iter()) {
        if *gi != 0.0 {
            row.scaled_add(*gi, &x);
        }
    }
    *dbias += &g;
    if !need_input_grad {
        return None;
    }
    let dx = weight.t().dot(&g);
    Some(dx.into_shape_with_order(input.dim()).expect("fc input shape"))
}

pub(crate) fn relu_forward(input: &Array3<f64>) -> Array3<f64> {
    input.mapv(|v| v.max(0.0))
}

pub(crate) fn relu_backward(dy: &Array3<f64>, input: &Array3<f64>) -> Array3<f64> {
    let mut dx = dy.clone();
    ndarray::Zip::from(&mut dx).and(input).for_each(|d, &x| {
        if x <= 0.0 {
            *d = 0.0;
        }
    });
    dx
}

/// Max pooling; padded cells never win. Returns the flat input index of each maximum.
pub(crate) fn maxpool_forward(input: &Array3<f64>, pool: &PoolSpec, out_dim: (usize, usize, usize)) -> (Array3<f64>, Vec<usize>) {
    let (h, w, c) = input.dim();
    let (oh, ow, _) = out_dim;
    let src = input.as_slice().expect("standard layout");
    let mut out = Array3::zeros(out_dim);
    let mut argmax = vec![usize::MAX; oh * ow * c];
    let dst = out.as_slice_mut().expect("fresh array");
    for oy in 0..oh {
        for ox in 0..ow {
            let y0 = (oy * pool.stride) as isize - pool.pad[0] as isize;
            let x0 = (ox * pool.stride) as isize - pool.pad[2] as isize;
            for ch in 0..c {
                let mut best = f64::NEG_INFINITY;
                let mut best_i = usize::MAX;
                for ky in 0..pool.size {
                    let y = y0 + ky as isize;
                    if y < 0 || y >= h as isize {
                        continue;
                    }
                    for kx in 0..pool.size {
                        let x = x0 + kx as isize;
                        if x < 0 || x >= w as isize {
                            continue;
                        }
                        let i = (y as usize * w + x as usize) * c + ch;
                        if src[i] > best || best_i == usize::MAX {
                            best = src[i];
                            best_i = i;
                        }
                    }
                }
                let o = (oy * ow + ox) * c + ch;
                dst[o] = if best_i == usize::MAX { 0.0 } else { best };
                argmax[o] = best_i;
            }
        }
    }
    (out, argmax)
}

pub(crate) fn maxpool_backward(dy: &Array3<f64>, argmax: &[usize], input_dim: (usize, usize, usize)) -> Array3<f64> {
    let mut dx = Array3::zeros(input_dim);
    let dst = dx.as_slice_mut().expect("fresh array");
    for (g, &i) in dy.as_slice().expect("standard layout").iter().zip(argmax) {
        if i != usize::MAX {
            dst[i] += g;
        }
    }
    dx
}

/// Cross-channel normalization `y_c = x_c / (k + α Σ_{window} x_j²)^β`. Returns the denominators' bases.
pub(crate) fn lrn_forward(input: &Array3<f64>, lrn: &LrnSpec) -> (Array3<f64>, Array3<f64>) {
    let (_, _, c) = input.dim();
    let half = lrn.size / 2;
    let mut out = input.clone();
    let mut scale = Array3::zeros(input.dim());
    for ((x, mut y), mut d) in input
        .lanes(Axis(2))
        .into_iter()
        .zip(out.lanes_mut(Axis(2)))
        .zip(scale.lanes_mut(Axis(2)))
    {
        for ch in 0..c {
            let lo = ch.saturating_sub(half);
            let hi = (ch + half).min(c - 1);
            let s: f64 = (lo..=hi).map(|j| x[j] * x[j]).sum();
            let base = lrn.k + lrn.alpha * s;
            d[ch] = base;
            y[ch] = x[ch] * base.powf(-lrn.beta);
        }
    }
    (out, scale)
}

pub(crate) fn lrn_backward(dy: &Array3<f64>, input: &Array3<f64>, scale: &Array3<f64>, lrn: &LrnSpec) -> Array3<f64> {
    let (_, _, c) = input.dim();
    let half = lrn.size / 2;
    let mut dx = Array3::zeros(input.dim());
    for (((g, x), d), mut out) in dy
        .lanes(Axis(2))
        .into_iter()
        .zip(input.lanes(Axis(2)))
        .zip(scale.lanes(Axis(2)))
        .zip(dx.lanes_mut(Axis(2)))
    {
        // t_c = dy_c · x_c · d_c^(−β−1)
        let t: Vec<f64> = (0..c).map(|ch| g[ch] * x[ch] * d[ch].powf(-lrn.beta - 1.0)).collect();
        for j in 0..c {
            let lo = j.saturating_sub(half);
            let hi = (j + half).min(c - 1);
            let cross: f64 = t[lo..=hi].iter().sum();
            out[j] = g[j] * d[j].powf(-lrn.beta) - 2.0 * lrn.alpha * lrn.beta * x[j] * cross;
        }
    }
    dx
}
