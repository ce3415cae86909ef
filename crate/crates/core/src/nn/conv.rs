use super::Tensor;
use crate::error::{Result, VadError};
use crate::scalar::Scalar;

struct ConvShape {
    h: usize,
    w: usize,
    cin: usize,
    kh: usize,
    kw: usize,
    cout: usize,
    oh: usize,
    ow: usize,
}

fn conv_shape<F: Scalar>(input: &Tensor<F>, kernels: &Tensor<F>) -> Result<ConvShape> {
    input.expect_rank("conv input", 3)?;
    kernels.expect_rank("conv kernels", 4)?;
    let (h, w, cin) = (input.dims()[0], input.dims()[1], input.dims()[2]);
    let (kh, kw, kc, cout) = (
        kernels.dims()[0],
        kernels.dims()[1],
        kernels.dims()[2],
        kernels.dims()[3],
    );
    if kc != cin {
        return Err(VadError::shape(format!(
            "kernel expects {kc} input channels, input has {cin}"
        )));
    }
    if kh > h || kw > w {
        return Err(VadError::shape(format!(
            "{kh}×{kw} kernel does not fit a {h}×{w} input"
        )));
    }
    Ok(ConvShape {
        h,
        w,
        cin,
        kh,
        kw,
        cout,
        oh: h - kh + 1,
        ow: w - kw + 1,
    })
}

/// Valid (unpadded) stride-1 2-D convolution.
pub fn conv2d_valid<F: Scalar>(
    input: &Tensor<F>,
    kernels: &Tensor<F>,
    bias: &Tensor<F>,
) -> Result<Tensor<F>> {
    let s = conv_shape(input, kernels)?;
    bias.expect_dims("conv bias", &[s.cout])?;
    let inp = input.values();
    let k = kernels.values();
    let b = bias.values();
    let mut out = vec![F::zero(); s.oh * s.ow * s.cout];
    for y in 0..s.oh {
        for x in 0..s.ow {
            let ob = (y * s.ow + x) * s.cout;
            let acc = &mut out[ob..ob + s.cout];
            acc.copy_from_slice(b);
            for dy in 0..s.kh {
                for dx in 0..s.kw {
                    let ib = ((y + dy) * s.w + (x + dx)) * s.cin;
                    let kb = (dy * s.kw + dx) * s.cin * s.cout;
                    for c in 0..s.cin {
                        let v = inp[ib + c];
                        let krow = &k[kb + c * s.cout..kb + (c + 1) * s.cout];
                        for (a, &kv) in acc.iter_mut().zip(krow) {
                            *a += v * kv;
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![s.oh, s.ow, s.cout], out)
}

#[derive(Clone, Debug)]
pub struct Conv2dGrads<F> {
    /// Present only when requested.
    pub input: Option<Tensor<F>>,
    pub kernels: Tensor<F>,
    pub bias: Tensor<F>,
}

pub fn conv2d_valid_backward<F: Scalar>(
    input: &Tensor<F>,
    kernels: &Tensor<F>,
    grad_out: &Tensor<F>,
    want_input_grad: bool,
) -> Result<Conv2dGrads<F>> {
    let s = conv_shape(input, kernels)?;
    grad_out.expect_dims("conv output grad", &[s.oh, s.ow, s.cout])?;
    let inp = input.values();
    let k = kernels.values();
    let g = grad_out.values();
    let mut gk = vec![F::zero(); k.len()];
    let mut gb = vec![F::zero(); s.cout];
    let mut gi = if want_input_grad {
        vec![F::zero(); inp.len()]
    } else {
        Vec::new()
    };
    for y in 0..s.oh {
        for x in 0..s.ow {
            let ob = (y * s.ow + x) * s.cout;
            let grow = &g[ob..ob + s.cout];
            for (acc, &gv) in gb.iter_mut().zip(grow) {
                *acc += gv;
            }
            for dy in 0..s.kh {
                for dx in 0..s.kw {
                    let ib = ((y + dy) * s.w + (x + dx)) * s.cin;
                    let kb = (dy * s.kw + dx) * s.cin * s.cout;
                    for c in 0..s.cin {
                        let v = inp[ib + c];
                        let ks = kb + c * s.cout;
                        for (acc, &gv) in gk[ks..ks + s.cout].iter_mut().zip(grow) {
                            *acc += v * gv;
                        }
                        if want_input_grad {
                            let mut sum = F::zero();
                            for (&kv, &gv) in k[ks..ks + s.cout].iter().zip(grow) {
                                sum += kv * gv;
                            }
                            gi[ib + c] += sum;
                        }
                    }
                }
            }
        }
    }
    Ok(Conv2dGrads {
        input: if want_input_grad {
            Some(Tensor::new(vec![s.h, s.w, s.cin], gi)?)
        } else {
            None
        },
        kernels: Tensor::new(kernels.dims().to_vec(), gk)?,
        bias: Tensor::new(vec![s.cout], gb)?,
    })
}
