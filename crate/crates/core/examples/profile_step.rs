//! Temporary profiling probe (deleted before release).
use std::time::Instant;
use cxr_ensemble::nn::*;
use cxr_ensemble::tensor::Tensor;
use cxr_ensemble::training::{build_model, ArchitectureSpec};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let arch = ArchitectureSpec::by_name("Arch4").unwrap();
    let model = build_model(&arch, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let img: Vec<f32> = (0..150 * 150).map(|_| rng.gen_range(0.0f32..2.0)).collect();
    let image = Tensor::from_vec(&[150, 150, 1], img).unwrap();

    // forward timing
    let n = 20;
    let t = Instant::now();
    for _ in 0..n {
        let _ = model.forward_infer(&image).unwrap();
    }
    println!("forward_infer: {:.2} ms", t.elapsed().as_secs_f64() * 1000.0 / n as f64);

    let trace = model.forward_infer(&image).unwrap();
    let mut dlogits = Tensor::zeros(&[2]);
    dlogits.data_mut()[0] = 1.0;
    let mut grads: Vec<Tensor<f32>> = model.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
    let t = Instant::now();
    for _ in 0..n {
        let _ = model.backward_accumulate(&trace, &dlogits, &mut grads).unwrap();
    }
    println!("backward_accumulate: {:.2} ms", t.elapsed().as_secs_f64() * 1000.0 / n as f64);

    // loss_and_grad on a batch of 8
    let mut batch = Vec::new();
    for _ in 0..8 {
        batch.extend(image.data());
    }
    let images = Tensor::from_vec(&[8, 150, 150, 1], batch).unwrap();
    let labels = Tensor::from_vec(&[8, 2], vec![1.0, 0.0].repeat(8)).unwrap();
    let t = Instant::now();
    for _ in 0..5 {
        let _ = model.loss_and_grad(&images, &labels, 0.01, Some(&[1, 2, 3, 4, 5, 6, 7, 8])).unwrap();
    }
    println!("loss_and_grad batch 8: {:.2} ms ({:.2} ms/img)", t.elapsed().as_secs_f64() * 1000.0 / 5.0, t.elapsed().as_secs_f64() * 1000.0 / 5.0 / 8.0);

    // individual layer probes
    let x1 = Tensor::filled(&[150, 150, 1], 1.0f32);
    let k1 = Tensor::filled(&[3, 3, 1, 32], 0.1f32);
    let b1 = Tensor::zeros(&[32]);
    let t = Instant::now();
    for _ in 0..n { let _ = conv2d_forward(&x1, &k1, &b1, Padding::Same).unwrap(); }
    println!("conv1 fwd (150x150x1->32): {:.2} ms", t.elapsed().as_secs_f64() * 1000.0 / n as f64);

    let x2 = Tensor::filled(&[75, 75, 32], 1.0f32);
    let k2 = Tensor::filled(&[3, 3, 32, 32], 0.1f32);
    let t = Instant::now();
    for _ in 0..n { let _ = conv2d_forward(&x2, &k2, &b1, Padding::Same).unwrap(); }
    println!("conv2 fwd (75x75x32->32): {:.2} ms", t.elapsed().as_secs_f64() * 1000.0 / n as f64);

    let up2 = Tensor::filled(&[75, 75, 32], 0.1f32);
    let mut gk2 = Tensor::zeros(&[3, 3, 32, 32]);
    let mut gb2 = Tensor::zeros(&[32]);
    let t = Instant::now();
    for _ in 0..n { let _ = conv2d_backward_accumulate(&up2, &x2, &k2, Padding::Same, &mut gk2, &mut gb2).unwrap(); }
    println!("conv2 bwd: {:.2} ms", t.elapsed().as_secs_f64() * 1000.0 / n as f64);

    let x3 = Tensor::filled(&[37, 37, 32], 1.0f32);
    let t = Instant::now();
    for _ in 0..n { let _ = conv2d_forward(&x3, &k2, &b1, Padding::Same).unwrap(); }
    println!("conv3 fwd (37x37x32->32): {:.2} ms", t.elapsed().as_secs_f64() * 1000.0 / n as f64);

    let up1 = Tensor::filled(&[150, 150, 32], 0.1f32);
    let mut gk1 = Tensor::zeros(&[3, 3, 1, 32]);
    let mut gb1 = Tensor::zeros(&[32]);
    let t = Instant::now();
    for _ in 0..n { let _ = conv2d_backward_accumulate(&up1, &x1, &k1, Padding::Same, &mut gk1, &mut gb1).unwrap(); }
    println!("conv1 bwd: {:.2} ms", t.elapsed().as_secs_f64() * 1000.0 / n as f64);

    // dense probe
    let xd = Tensor::filled(&[10368], 1.0f32);
    let wd = Tensor::filled(&[10368, 64], 0.01f32);
    let bd = Tensor::zeros(&[64]);
    let t = Instant::now();
    for _ in 0..n { let _ = dense_forward(&xd, &wd, &bd).unwrap(); }
    println!("dense fwd (10368x64): {:.2} ms", t.elapsed().as_secs_f64() * 1000.0 / n as f64);
    let upd = Tensor::filled(&[64], 0.1f32);
    let mut gwd = Tensor::zeros(&[10368, 64]);
    let mut gbd = Tensor::zeros(&[64]);
    let t = Instant::now();
    for _ in 0..n { let _ = dense_backward_accumulate(&upd, &xd, &wd, &mut gwd, &mut gbd).unwrap(); }
    println!("dense bwd: {:.2} ms", t.elapsed().as_secs_f64() * 1000.0 / n as f64);
}
